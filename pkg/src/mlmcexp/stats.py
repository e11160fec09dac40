"""Running moments with deterministic pairwise merging."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass
class Moments:
    n: int = 0
    mean: float = 0.0
    m2: float = 0.0

    def merge(self, n, mean, m2):
        """Fold in another batch (Chan et al. pairwise update)."""
        n = int(n)
        if n == 0:
            return self
        if self.n == 0:
            self.n, self.mean, self.m2 = n, float(mean), float(m2)
            return self
        tot = self.n + n
        delta = mean - self.mean
        self.mean += delta * n / tot
        self.m2 += m2 + delta * delta * self.n * n / tot
        self.n = tot
        return self

    def merged(self, other: "Moments") -> "Moments":
        out = Moments(self.n, self.mean, self.m2)
        return out.merge(other.n, other.mean, other.m2)

    @property
    def sum(self) -> float:
        return self.mean * self.n

    @property
    def sum_sq(self) -> float:
        return self.m2 + self.n * self.mean * self.mean

    @property
    def variance(self) -> float:
        """Population variance (divide by n), as used for level variances."""
        return max(self.m2 / self.n, 0.0) if self.n else 0.0

    @property
    def sample_variance(self) -> float:
        return max(self.m2 / (self.n - 1), 0.0) if self.n > 1 else 0.0

    @property
    def std_error(self) -> float:
        return math.sqrt(self.sample_variance / self.n) if self.n > 1 else 0.0
