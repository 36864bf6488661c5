"""Compiled inner loops for path simulation.

Every kernel takes a ``numpy.random.Generator`` owned by the caller; one
generator per path keeps results independent of scheduling.

Exit kernels simulate on the finest grid ``h_f`` and record, for each
level ``l``, the first time on the coarser grid ``h_f * 2**l`` at which
the path is outside the ball.  Coarse increments are sums of fine ones,
so every level is an exact-in-law simulation at its own step and the
levels are coupled pathwise.  ``out[l] < 0`` marks a path still inside
at the horizon.
"""

import math

import numpy as np
from numba import njit

_CACHE = True


@njit(nogil=True, cache=_CACHE)
def sas_standard(gen, alpha):
    """Symmetric stable draw with characteristic function exp(-|t|^alpha)."""
    v = math.pi * (gen.random() - 0.5)
    if alpha == 1.0:
        return math.tan(v)
    w = gen.standard_exponential()
    # log-space form of Chambers-Mallows-Stuck; the factor tends to 1 smoothly as alpha -> 1
    tail = (1.0 - alpha) / alpha * (math.log(math.cos((1.0 - alpha) * v)) - math.log(w))
    return math.sin(alpha * v) / math.cos(v) ** (1.0 / alpha) * math.exp(tail)


@njit(nogil=True, cache=_CACHE)
def positive_stable(gen, a):
    """Totally skewed stable draw with Laplace transform exp(-s^a), 0 < a < 1 (Kanter)."""
    u = math.pi * gen.random()
    while u == 0.0:
        u = math.pi * gen.random()
    w = gen.standard_exponential()
    return (math.sin(a * u) / math.sin(u) ** (1.0 / a)
            * (math.sin((1.0 - a) * u) / w) ** ((1.0 - a) / a))


@njit(nogil=True, cache=_CACHE)
def fill_sas(gen, alpha, sigma, out):
    for i in range(out.shape[0]):
        out[i] = sigma * sas_standard(gen, alpha)


@njit(nogil=True, cache=_CACHE)
def fill_positive_stable(gen, a, out):
    for i in range(out.shape[0]):
        out[i] = positive_stable(gen, a)


@njit(nogil=True, cache=_CACHE)
def _record_grid_exit(k, t, out):
    """Mark levels whose grid contains step k; return True when all levels are done."""
    done = True
    for l in range(out.shape[0]):
        if out[l] < 0.0:
            if k % (1 << l) == 0:
                out[l] = t
            else:
                done = False
    return done


@njit(nogil=True, cache=_CACHE)
def exit_exact_discrete(gen, alpha, atoms, sigmas, x0, r, h_f, nmax, out):
    """Exact increments: one 1-D stable driver per stored atom pair."""
    d = x0.shape[0]
    x = x0.copy()
    r2 = r * r
    for l in range(out.shape[0]):
        out[l] = -1.0
    for k in range(1, nmax + 1):
        for i in range(atoms.shape[0]):
            xi = sigmas[i] * sas_standard(gen, alpha)
            for j in range(d):
                x[j] += atoms[i, j] * xi
        s = 0.0
        for j in range(d):
            s += x[j] * x[j]
        if s >= r2:
            if _record_grid_exit(k, k * h_f, out):
                return


@njit(nogil=True, cache=_CACHE)
def exit_exact_isotropic(gen, alpha, scale, x0, r, h_f, nmax, out):
    """Exact isotropic increments as sqrt(A) * scale * N(0, I) with A positive (alpha/2)-stable."""
    d = x0.shape[0]
    x = x0.copy()
    r2 = r * r
    a = 0.5 * alpha
    for l in range(out.shape[0]):
        out[l] = -1.0
    for k in range(1, nmax + 1):
        m = scale * math.sqrt(positive_stable(gen, a))
        s = 0.0
        for j in range(d):
            x[j] += m * gen.standard_normal()
            s += x[j] * x[j]
        if s >= r2:
            if _record_grid_exit(k, k * h_f, out):
                return


@njit(nogil=True, cache=_CACHE)
def _big_jump(gen, alpha, delta, atoms, cum_probs, isotropic, y):
    d = y.shape[0]
    radius = delta * (1.0 - gen.random()) ** (-1.0 / alpha)
    if isotropic:
        s = 0.0
        for j in range(d):
            y[j] = gen.standard_normal()
            s += y[j] * y[j]
        s = math.sqrt(s)
        for j in range(d):
            y[j] *= radius / s
    else:
        u = gen.random()
        i = 0
        while i < cum_probs.shape[0] - 1 and u >= cum_probs[i]:
            i += 1
        sign = 1.0 if gen.random() < 0.5 else -1.0
        for j in range(d):
            y[j] = sign * radius * atoms[i, j]


@njit(nogil=True, cache=_CACHE)
def _gauss_step(gen, chol, dt, x, z):
    d = x.shape[0]
    sq = math.sqrt(dt)
    for j in range(d):
        z[j] = gen.standard_normal()
    for i in range(d):
        acc = 0.0
        for j in range(d):
            acc += chol[i, j] * z[j]
        x[i] += sq * acc


@njit(nogil=True, cache=_CACHE)
def exit_cpg(gen, alpha, chol, rate, delta, atoms, cum_probs, isotropic, x0, r, h_f, nmax, out):
    """Compound Poisson big jumps plus a Gaussian stand-in for jumps below ``delta``.

    Exit is checked at every grid time and right after every big jump; a
    jump exit is recorded at its exact time on all levels.
    """
    d = x0.shape[0]
    x = x0.copy()
    y = np.empty(d)
    z = np.empty(d)
    r2 = r * r
    for l in range(out.shape[0]):
        out[l] = -1.0
    t = 0.0
    t_jump = gen.standard_exponential() / rate
    for k in range(1, nmax + 1):
        t_grid = k * h_f
        while t_jump <= t_grid:
            _gauss_step(gen, chol, t_jump - t, x, z)
            t = t_jump
            _big_jump(gen, alpha, delta, atoms, cum_probs, isotropic, y)
            s = 0.0
            for j in range(d):
                x[j] += y[j]
                s += x[j] * x[j]
            if s >= r2:
                for l in range(out.shape[0]):
                    if out[l] < 0.0:
                        out[l] = t
                return
            t_jump = t + gen.standard_exponential() / rate
        _gauss_step(gen, chol, t_grid - t, x, z)
        t = t_grid
        s = 0.0
        for j in range(d):
            s += x[j] * x[j]
        if s >= r2:
            if _record_grid_exit(k, t_grid, out):
                return


@njit(nogil=True, cache=_CACHE)
def fill_subgaussian(gen, alpha, scale, out):
    a = 0.5 * alpha
    for i in range(out.shape[0]):
        m = scale * math.sqrt(positive_stable(gen, a))
        for j in range(out.shape[1]):
            out[i, j] = m * gen.standard_normal()
