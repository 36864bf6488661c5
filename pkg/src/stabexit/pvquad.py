"""Principal-value quadrature for the directional fractional operator.

The central routine evaluates

    p.v. int_R [f(u + w) - f(u)] |w|^(-1-alpha) dw

for bounded, piecewise smooth ``f``.  The integral is folded onto the
half line, where it becomes absolutely convergent:

    int_0^inf D(w) w^(-1-alpha) dw,   D(w) = f(u+w) + f(u-w) - 2 f(u).

It is then split into three pieces:

* ``(0, eps]``: D(w)/w^2 is smooth in s = (w/eps)^2, so the piece equals
  ``eps^(2-alpha)/2 * int_0^1 G(s) s^(-alpha/2) ds`` and is computed by
  Gauss-Jacobi product integration.  No node comes close to w = 0, which
  is where D(w) suffers catastrophic cancellation.
* ``[eps, W]``: adaptive QUADPACK panels, split at every breakpoint.
* ``(W, inf)``: closed form for functions that vanish there.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, special

from .core import AlphaLike, ProfileFunction, as_alpha
from .errors import CrossCheckError, DegenerateDirectionError, DomainError, QuadratureError
from .spectral import SpectralMeasure, total_mass

_GJ_NODES = 20
_MAX_INNER_HALVINGS = 40


@dataclass(frozen=True)
class PVQuadSpec:
    """Tolerances and cut-offs for :func:`pv_fractional_integral_1d`.

    ``inner_cutoff=None`` picks eps automatically as a quarter of the
    distance from ``u`` to the nearest breakpoint.  ``tail_cutoff=None``
    puts W at the farthest breakpoint.
    """

    abs_tol: float = 1e-9
    rel_tol: float = 1e-9
    max_subdivisions: int = 2000
    inner_cutoff: float | None = None
    tail_cutoff: float | None = None

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise DomainError("abs_tol and rel_tol must be positive")
        if self.max_subdivisions < 1:
            raise DomainError("max_subdivisions must be at least 1")
        if self.inner_cutoff is not None and self.tail_cutoff is not None:
            if not 0 < self.inner_cutoff < self.tail_cutoff:
                raise DomainError("need 0 < inner_cutoff < tail_cutoff")


@dataclass(frozen=True)
class PVQuadResult:
    value: float
    error_estimate: float
    subdivisions_used: int

    def scaled(self, factor: float) -> "PVQuadResult":
        return PVQuadResult(self.value * factor, self.error_estimate * abs(factor), self.subdivisions_used)


def _gauss_jacobi_inner(D: Callable[[float], float], eps: float, alpha: float, n: int) -> float:
    # weight (1+x)^(-alpha/2) on [-1, 1]; s = (1+x)/2 maps onto s^(-alpha/2) on [0, 1]
    x, wt = special.roots_jacobi(n, 0.0, -0.5 * alpha)
    s = 0.5 * (1.0 + x)
    w = eps * np.sqrt(s)
    g = np.array([D(wi) / (wi * wi) for wi in w])
    return eps ** (2.0 - alpha) * 2.0 ** (0.5 * alpha - 2.0) * float(np.dot(wt, g))


def _inner_piece(D, eps, alpha, tol, max_err):
    """Integral of D(w) w^(-1-alpha) over (0, eps], shrinking eps until two rules agree.

    Shrinking eps trades truncation error for rounding noise in D(w)/w^2,
    so the search stops once the disagreement starts growing and the best
    eps seen is kept.
    """
    best = None
    growing = 0
    for _ in range(_MAX_INNER_HALVINGS):
        hi = _gauss_jacobi_inner(D, eps, alpha, _GJ_NODES)
        lo = _gauss_jacobi_inner(D, eps, alpha, _GJ_NODES // 2)
        err = abs(hi - lo)
        if best is None or err < best[1]:
            best = (hi, err, eps)
            growing = 0
        else:
            growing += 1
        if err <= tol or growing >= 3:
            break
        eps *= 0.5
    if best[1] > max_err:
        raise QuadratureError(f"inner Gauss-Jacobi rule did not settle (difference {best[1]:.3g})",
                              best[0], best[1])
    return best


def pv_fractional_integral_1d(
    f: Callable[[float], float],
    u: float,
    alpha: AlphaLike,
    spec: PVQuadSpec | None = None,
    breakpoints: Sequence[float] = (),
    tail: Callable[[float], float] | None = None,
) -> PVQuadResult:
    """p.v. int_R [f(u+w) - f(u)] |w|^(-1-alpha) dw.

    ``breakpoints`` are offsets ``w`` at which ``f(u + w)`` fails to be
    smooth (support edges, kinks).  Beyond ``W`` the integrand is assumed
    to be ``-f(u)|w|^(-1-alpha)``, i.e. ``f(u + w) = 0`` for ``|w| > W``,
    unless ``tail(W)`` is given; it must return the integral over
    ``|w| > W``.
    """
    a = as_alpha(alpha, numerical=True)
    spec = spec or PVQuadSpec()
    u = float(u)
    bps = sorted({abs(float(b)) for b in breakpoints})
    if bps and bps[0] == 0.0:
        raise DomainError("u must not coincide with a breakpoint")

    if spec.tail_cutoff is not None:
        W = float(spec.tail_cutoff)
        if bps and bps[-1] > W:
            raise DomainError("tail_cutoff must enclose every breakpoint")
    elif bps:
        W = bps[-1]
    else:
        raise DomainError("need breakpoints or an explicit tail_cutoff to place W")

    fu = float(f(u))

    def D(w):
        return f(u + w) + f(u - w) - 2.0 * fu

    nearest = bps[0] if bps else W
    eps = spec.inner_cutoff if spec.inner_cutoff is not None else 0.25 * min(nearest, W)
    if eps >= W:
        raise DomainError("inner cutoff must be smaller than the tail cutoff")

    target = max(spec.abs_tol, spec.rel_tol * abs(fu))
    inner, inner_err, eps = _inner_piece(D, eps, a, 0.1 * target, target)

    def integrand(w):
        return D(w) * w ** (-1.0 - a)

    edges = [eps] + [b for b in bps if eps < b < W] + [W]
    value = inner
    err = inner_err
    used = 0
    budget = spec.max_subdivisions
    for lo, hi in zip(edges[:-1], edges[1:]):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            piece, perr, info = integrate.quad(
                integrand, lo, hi, epsabs=spec.abs_tol * 0.1, epsrel=spec.rel_tol * 0.1,
                limit=max(budget - used, 1), full_output=1,
            )[:3]
        used += int(info["last"])
        value += piece
        err += perr
        if used >= budget and perr > max(spec.abs_tol, spec.rel_tol * abs(value)):
            raise QuadratureError("subdivision budget exhausted", value, err)

    if tail is None:
        value += -2.0 * fu * W ** (-a) / a
    else:
        value += float(tail(W))

    if err > max(spec.abs_tol, spec.rel_tol * abs(value)):
        raise QuadratureError(f"error estimate {err:.3g} above tolerance", value, err)
    return PVQuadResult(value=value, error_estimate=err, subdivisions_used=used)


def getoor_identity_check(u: float, r: float, alpha: AlphaLike, spec: PVQuadSpec | None = None) -> PVQuadResult:
    """PV generator of the 1-D profile s_r at ``u``; the value should be -1."""
    a = as_alpha(alpha, numerical=True)
    s = ProfileFunction(r, a)
    u = float(u)
    if not abs(u) < s.r:
        raise DomainError(f"need |u| < r, got u={u}, r={s.r}")
    return pv_fractional_integral_1d(s.along_line, u, a, spec, breakpoints=(-u - s.r, -u + s.r))


def apply_Kv(v, x, r: float, alpha: AlphaLike, spec: PVQuadSpec | None = None) -> PVQuadResult:
    """Directional operator K_v applied to S_r at ``x`` by quadrature.

    The line x + v* w meets the profile as the 1-D profile of radius
    sqrt(r^2 - |x~|^2) evaluated at x_1 + w, where x_1 = x.v* and x~ is the
    component of x orthogonal to v.
    """
    a = as_alpha(alpha, numerical=True)
    v = np.atleast_1d(np.asarray(v, dtype=float))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if v.shape != x.shape:
        raise DomainError("v and x must have the same dimension")
    vnorm = float(np.linalg.norm(v))
    if vnorm == 0.0:
        raise DegenerateDirectionError("K_v is undefined for v = 0")
    if not float(np.linalg.norm(x)) < r:
        raise DomainError(f"need |x| < r, got |x|={np.linalg.norm(x)}, r={r}")
    vs = v / vnorm
    x1 = float(np.dot(x, vs))
    x_perp = x - x1 * vs
    rho2 = r * r - float(np.dot(x_perp, x_perp))
    rho = math.sqrt(rho2)
    if not abs(x1) < rho:
        # only reachable through rounding when |x| is a hair below r
        raise DomainError("point too close to the boundary along this direction")
    return getoor_identity_check(x1, rho, a, spec).scaled(vnorm ** a)


def as_linear_map(A, d: int) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.shape != (d, d):
        raise DomainError(f"linear map must be {d}x{d}, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise DomainError("linear map entries must be finite")
    return A


def _images(mu: SpectralMeasure, A) -> np.ndarray:
    if not mu.is_discrete:
        raise DomainError("apply_K needs a discrete spectral measure")
    A = as_linear_map(A, mu.d)
    images = mu.atoms @ A.T
    norms = np.linalg.norm(images, axis=1)
    if np.any(norms == 0.0):
        raise DegenerateDirectionError("A z vanishes for some atom z; K_{Az} is undefined")
    return images


def apply_K_quadrature(mu: SpectralMeasure, A, x, r: float, alpha: AlphaLike,
                       spec: PVQuadSpec | None = None) -> PVQuadResult:
    """Sum over atoms of m_i K_{A z_i} S_r(x), each term by quadrature."""
    images = _images(mu, A)
    value = 0.0
    err = 0.0
    used = 0
    for image, m in zip(images, mu.masses):
        res = apply_Kv(image, x, r, alpha, spec)
        # K_{-v} = K_v, so the pair {z, -z} contributes twice
        value += 2.0 * m * res.value
        err += 2.0 * m * res.error_estimate
        used += 2 * res.subdivisions_used
    return PVQuadResult(value, err, used)


def apply_K(mu: SpectralMeasure, A, x, r: float, alpha: AlphaLike, *, cross_check: bool = False,
            spec: PVQuadSpec | None = None, cross_check_tol: float | None = None) -> float:
    """K S_r(x) = -int |A z|^alpha mu(dz) for a constant linear map ``A``.

    With ``cross_check`` the value is recomputed atom by atom through
    :func:`apply_Kv`; a disagreement larger than ``cross_check_tol``
    (default: summed quadrature error estimates plus 1e-5 |mu|) raises
    :class:`CrossCheckError`.
    """
    a = as_alpha(alpha)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not float(np.linalg.norm(x)) < r:
        raise DomainError(f"need |x| < r, got |x|={np.linalg.norm(x)}, r={r}")
    images = _images(mu, A)
    if np.array_equal(as_linear_map(A, mu.d), np.eye(mu.d)):
        # stored atoms are unit vectors, so |z|^alpha = 1 and the value is exactly -|mu|
        value = -total_mass(mu)
    else:
        value = -2.0 * math.fsum(m * float(np.linalg.norm(z)) ** a for z, m in zip(images, mu.masses))
    if cross_check:
        quad = apply_K_quadrature(mu, A, x, r, a, spec)
        tol = cross_check_tol if cross_check_tol is not None else quad.error_estimate + 1e-5 * total_mass(mu)
        if abs(quad.value - value) > tol:
            raise CrossCheckError(f"closed form {value!r} vs quadrature {quad.value!r} (tol {tol:.3g})")
    return value


def _check_symmetric_input(mu):
    from .spectral import is_symmetric, symmetrize

    if isinstance(mu, SpectralMeasure):
        return mu
    pairs = list(mu)
    if not is_symmetric(pairs):
        raise DomainError("spectral measure is not symmetric; call symmetrize() first")
    return symmetrize(pairs)


def _sphere_directions(d: int, n: int = 16) -> np.ndarray:
    if d == 1:
        return np.array([[1.0], [-1.0]])
    if d == 2:
        t = 2.0 * np.pi * (np.arange(n) + 0.5) / n
        return np.column_stack([np.cos(t), np.sin(t)])
    g = np.random.default_rng(20240607).standard_normal((n, d))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def apply_K_nu_quadrature(mu, x, r: float, alpha: AlphaLike, spec: PVQuadSpec | None = None) -> PVQuadResult:
    """Generator of the process applied to S_r, with each direction done by quadrature.

    Isotropic measures are handled with an equal-weight direction set; for
    d = 2 this is the midpoint rule in the angle.
    """
    mu = _check_symmetric_input(mu)
    if mu.is_discrete:
        res = apply_K_quadrature(mu, np.eye(mu.d), x, r, alpha, spec)
        return res.scaled(0.5)
    dirs = _sphere_directions(mu.d)
    results = [apply_Kv(z, x, r, alpha, spec) for z in dirs]
    scale = 0.5 * mu.isotropic_mass / len(dirs)
    return PVQuadResult(
        scale * math.fsum(res.value for res in results),
        scale * math.fsum(res.error_estimate for res in results),
        sum(res.subdivisions_used for res in results),
    )


def apply_K_nu(mu, x, r: float, alpha: AlphaLike, *, cross_check: bool = False,
               spec: PVQuadSpec | None = None, cross_check_tol: float | None = None) -> float:
    """Generator of the process applied to S_r inside the ball: -|mu|/2.

    ``mu`` may be a raw atom list; it must already be symmetric.
    """
    mu = _check_symmetric_input(mu)
    as_alpha(alpha)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (mu.d,):
        raise DomainError(f"x must have dimension {mu.d}")
    if not float(np.linalg.norm(x)) < r:
        raise DomainError(f"need |x| < r, got |x|={np.linalg.norm(x)}, r={r}")
    value = -0.5 * total_mass(mu)
    if cross_check:
        quad = apply_K_nu_quadrature(mu, x, r, alpha, spec)
        tol = cross_check_tol if cross_check_tol is not None else quad.error_estimate + 1e-5 * total_mass(mu)
        if abs(quad.value - value) > tol:
            raise CrossCheckError(f"closed form {value!r} vs quadrature {quad.value!r} (tol {tol:.3g})")
    return value
