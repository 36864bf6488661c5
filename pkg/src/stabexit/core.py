"""Stability-index arithmetic, normalising constants and the closed-form
mean exit time of a symmetric alpha-stable process from a ball.

Everything here is a pure function of its arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import DomainError

#: Range of alpha on which quadrature and simulation are allowed to run.
DEFAULT_SUPPORTED = (0.1, 1.95)


@dataclass(frozen=True)
class StabilityIndex:
    """Index alpha in (0, 2) of a stable process.

    ``supported`` is the narrower interval inside which the numerical
    routines (quadrature, Monte Carlo) agree to run.  Closed-form
    functions accept the whole open interval.
    """

    alpha: float
    supported: tuple[float, float] = field(default=DEFAULT_SUPPORTED)

    def __post_init__(self):
        a = float(self.alpha)
        if not (0.0 < a < 2.0) or not math.isfinite(a):
            raise DomainError(f"alpha must lie in (0, 2), got {self.alpha!r}")
        lo, hi = self.supported
        if not (0.0 < lo <= hi < 2.0):
            raise DomainError(f"invalid supported range {self.supported!r}")
        object.__setattr__(self, "alpha", a)

    @property
    def is_supported(self) -> bool:
        lo, hi = self.supported
        return lo <= self.alpha <= hi

    def require_supported(self) -> float:
        if not self.is_supported:
            lo, hi = self.supported
            raise DomainError(
                f"alpha={self.alpha} is outside the numerically supported range [{lo}, {hi}]"
            )
        return self.alpha

    def __float__(self):
        return self.alpha


AlphaLike = Union[float, StabilityIndex]


def as_alpha(alpha: AlphaLike, *, numerical: bool = False) -> float:
    """Validate ``alpha`` and return it as a float.

    With ``numerical=True`` the supported sub-range is enforced as well.
    """
    idx = alpha if isinstance(alpha, StabilityIndex) else StabilityIndex(alpha)
    if numerical:
        return idx.require_supported()
    return idx.alpha


def kappa(alpha: AlphaLike) -> float:
    """1 / (Gamma(1 - alpha/2) Gamma(1 + alpha/2))."""
    a = as_alpha(alpha)
    # math.gamma is a Lanczos evaluation good to a few ulps on (0.025, 3).
    return 1.0 / (math.gamma(1.0 - 0.5 * a) * math.gamma(1.0 + 0.5 * a))


def c_alpha(alpha: AlphaLike) -> float:
    """Normalising constant of the profile function, alpha * kappa / 2."""
    a = as_alpha(alpha)
    return 0.5 * a * kappa(a)


def _check_radius(r: float) -> float:
    r = float(r)
    if not (r > 0.0) or not math.isfinite(r):
        raise DomainError(f"radius must be positive and finite, got {r!r}")
    return r


def _sq_norm(x) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return float(np.dot(x, x))


def _positive_part_power(r: float, x, alpha: float) -> float:
    # max() first: a negative base would give NaN under the fractional power.
    base = max(r * r - _sq_norm(x), 0.0)
    return base ** (0.5 * alpha)


def profile(x, r: float, alpha: AlphaLike) -> float:
    """S_r(x) = c_alpha (r^2 - |x|^2)_+^(alpha/2) for a point ``x`` of any dimension."""
    a = as_alpha(alpha)
    r = _check_radius(r)
    return c_alpha(a) * _positive_part_power(r, x, a)


@dataclass(frozen=True)
class ProfileFunction:
    """The function x -> c_alpha (r^2 - |x|^2)_+^(alpha/2) with its constant cached."""

    r: float
    alpha: float
    c_alpha: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "alpha", as_alpha(self.alpha))
        object.__setattr__(self, "r", _check_radius(self.r))
        object.__setattr__(self, "c_alpha", c_alpha(self.alpha))

    def __call__(self, x) -> float:
        return self.c_alpha * _positive_part_power(self.r, x, self.alpha)

    def along_line(self, u: float) -> float:
        """One-dimensional restriction s_r(u); cheaper than ``__call__`` for scalars."""
        base = self.r * self.r - u * u
        if base <= 0.0:
            return 0.0
        return self.c_alpha * base ** (0.5 * self.alpha)


def mean_exit_closed_form(x, r: float, alpha: AlphaLike, mu_total: float) -> float:
    """Mean exit time from the ball B_r started at ``x``.

    ``mu_total`` is the total mass of the spectral measure, so that the
    Levy measure of the complement of the unit ball is ``mu_total/alpha``.
    """
    a = as_alpha(alpha)
    r = _check_radius(r)
    mu_total = float(mu_total)
    if not (mu_total > 0.0) or not math.isfinite(mu_total):
        raise DomainError(f"spectral measure total mass must be positive, got {mu_total!r}")
    return kappa(a) * a / mu_total * _positive_part_power(r, x, a)
