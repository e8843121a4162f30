"""Distortion setup shared by the shell-probability and asymptotic modules."""

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError


class CodebookKind(str, enum.Enum):
    SPHERICAL = "spherical"
    IID = "iid"


@dataclass(frozen=True)
class DistortionSetup:
    """Source power ``sigma2`` and distortion level ``D`` with ``0 < D < sigma2``.

    Codewords have power ``p_y = sigma2 - D``. The spherical shell on which a
    single codeword can cover a source block of power ``z`` is
    ``r1^2 <= z <= r2^2`` with ``r1 = sqrt(p_y) - sqrt(D)`` and
    ``r2 = sqrt(p_y) + sqrt(D)``.
    """

    sigma2: float
    D: float

    def __post_init__(self):
        if not (math.isfinite(self.sigma2) and math.isfinite(self.D)):
            raise DomainError("sigma2 and D must be finite")
        if not 0 < self.D < self.sigma2:
            raise DomainError(f"need 0 < D < sigma2, got D={self.D!r}, sigma2={self.sigma2!r}")

    @property
    def p_y(self):
        return self.sigma2 - self.D

    @property
    def r1(self):
        return math.sqrt(self.p_y) - math.sqrt(self.D)

    @property
    def r2(self):
        return math.sqrt(self.p_y) + math.sqrt(self.D)

    @property
    def r1_sq(self):
        return self.r1 ** 2

    @property
    def r2_sq(self):
        return self.r2 ** 2

    @property
    def knee(self):
        """``|sigma2 - 2D|``, where the cover exponent turns around."""
        return abs(self.sigma2 - 2.0 * self.D)

    def scaled(self, c):
        return DistortionSetup(self.sigma2 * c, self.D * c)

    def one_minus_h(self, z):
        """``1 - (z + p_y - D)^2 / (4 z p_y)`` in factored, cancellation-free form.

        The numerator factors as ``(z - r1^2)(r2^2 - z)``.
        """
        z = np.asarray(z, dtype=float)
        out = (z - self.r1_sq) * (self.r2_sq - z) / (4.0 * z * self.p_y)
        return float(out) if out.ndim == 0 else out
