"""Monte Carlo estimation of mean exit times of symmetric stable processes.

Two path samplers are available:

``ExactIncrement``
    Increments over a grid step are drawn exactly from the stable law.
    A discrete measure with stored atoms ``(z_i, m_i)`` gives
    ``X_t = sum_i Y_t^(i) z_i`` with independent 1-D symmetric stable
    drivers of scale ``(m_i c1(alpha) h)^(1/alpha)``.  Isotropic measures
    use the sub-Gaussian representation.

``CompoundPoissonGaussian``
    Jumps larger than ``delta`` form a compound Poisson process; smaller
    ones are replaced by a Brownian motion with matching covariance.

Exits are detected on the time grid only (and at big-jump times for the
second sampler), so estimates are biased upwards by an amount that
shrinks with the step.  ``refinements`` runs the same paths on finer
nested grids to measure that shift.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from . import _kernels
from .core import AlphaLike, as_alpha, mean_exit_closed_form
from .errors import ConfigError, DomainError
from .spectral import (
    SpectralMeasure,
    big_jump_intensity,
    mean_abs_projection_power,
    small_jump_covariance,
    total_mass,
)

#: Fraction of truncated paths above which an estimate is flagged unreliable.
TRUNCATION_LIMIT = 1e-3
#: Default horizon as a multiple of the closed-form mean.
DEFAULT_HORIZON_FACTOR = 50.0
MAX_SEED = 2**64 - 1


def c1(alpha: AlphaLike) -> float:
    """int_R (1 - cos w) |w|^(-1-alpha) dw.

    Converts a Levy density ``m |w|^(-1-alpha)`` into the characteristic
    exponent ``m c1 |theta|^alpha``.
    """
    a = as_alpha(alpha)
    if a == 1.0:
        return math.pi
    return 2.0 * math.gamma(2.0 - a) * math.cos(0.5 * math.pi * a) / (a * (1.0 - a))


@dataclass(frozen=True)
class StableScale:
    """Scale sigma of the 1-D law with characteristic function exp(-sigma^alpha |theta|^alpha)."""

    sigma: float

    def __post_init__(self):
        if not (self.sigma > 0) or not math.isfinite(self.sigma):
            raise DomainError(f"stable scale must be positive, got {self.sigma!r}")

    def __float__(self):
        return float(self.sigma)


def sample_sas_1d(alpha: AlphaLike, sigma: Union[StableScale, float], rng: np.random.Generator,
                  size: int | None = None):
    """Chambers-Mallows-Stuck draws of the symmetric stable law (Cauchy branch at alpha = 1)."""
    a = as_alpha(alpha, numerical=True)
    s = float(StableScale(float(sigma)))
    out = np.empty(1 if size is None else int(size))
    _kernels.fill_sas(rng, a, s, out)
    return float(out[0]) if size is None else out


def sample_positive_stable(a: float, rng: np.random.Generator, size: int):
    """Draws with Laplace transform exp(-s^a), 0 < a < 1."""
    if not 0.0 < a < 1.0:
        raise DomainError(f"need 0 < a < 1, got {a!r}")
    out = np.empty(int(size))
    _kernels.fill_positive_stable(rng, float(a), out)
    return out


def isotropic_increment_scale(mu: SpectralMeasure, alpha: float, h: float) -> float:
    """Gaussian scale s with X_h = sqrt(A) s N(0, I) for an isotropic measure.

    Over a step h the characteristic exponent is K |theta|^alpha with
    K = h (c1/2) |mu| E|z_1|^alpha, and sqrt(A) s N has exponent
    (s^2 |theta|^2 / 2)^(alpha/2), so s = sqrt(2) K^(1/alpha).
    """
    K = h * 0.5 * c1(alpha) * mu.isotropic_mass * mean_abs_projection_power(mu.d, alpha)
    return math.sqrt(2.0) * K ** (1.0 / alpha)


def sample_isotropic_increment(mu: SpectralMeasure, alpha: AlphaLike, h: float, rng: np.random.Generator,
                               size: int) -> np.ndarray:
    """Exact increments over time ``h`` of the process with isotropic spectral measure ``mu``."""
    a = as_alpha(alpha, numerical=True)
    if mu.is_discrete:
        raise DomainError("sub-Gaussian increments need an isotropic measure")
    out = np.empty((int(size), mu.d))
    _kernels.fill_subgaussian(rng, a, isotropic_increment_scale(mu, a, h), out)
    return out


def path_generator(seed: int, path_id: int) -> np.random.Generator:
    """Independent counter-based stream for one path, keyed by (seed, path_id)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(path_id,))))


@dataclass(frozen=True)
class ExactIncrement:
    kind: str = field(default="exact", init=False)


@dataclass(frozen=True)
class CompoundPoissonGaussian:
    delta: float
    kind: str = field(default="cpg", init=False)


Sampler = Union[ExactIncrement, CompoundPoissonGaussian]


@dataclass(frozen=True, eq=False)
class ExitTimeConfig:
    """Everything that determines a Monte Carlo exit-time run.

    ``t_max=None`` means 50 times the closed-form mean.  ``refinements``
    adds nested grids h/2, h/4, ... simulated on the same paths; the
    estimate itself always refers to step ``h``.
    """

    x0: np.ndarray
    r: float
    alpha: float
    mu: SpectralMeasure
    sampler: Sampler
    h: float
    n_paths: int
    seed: int
    t_max: float | None = None
    refinements: int = 0

    def __post_init__(self):
        try:
            a = as_alpha(self.alpha, numerical=True)
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc
        object.__setattr__(self, "alpha", a)
        x0 = np.atleast_1d(np.asarray(self.x0, dtype=float)).copy()
        x0.setflags(write=False)
        object.__setattr__(self, "x0", x0)
        if not isinstance(self.mu, SpectralMeasure):
            raise ConfigError("mu must be a SpectralMeasure")
        if x0.shape != (self.mu.d,):
            raise ConfigError(f"x0 has dimension {x0.shape[0]}, spectral measure has d={self.mu.d}")
        if not (self.r > 0) or not math.isfinite(self.r):
            raise ConfigError(f"r must be positive, got {self.r!r}")
        if not float(np.linalg.norm(x0)) < self.r:
            raise ConfigError(f"starting point must satisfy |x0| < r (|x0|={np.linalg.norm(x0)}, r={self.r})")
        if not (self.h > 0) or not math.isfinite(self.h):
            raise ConfigError(f"step h must be positive, got {self.h!r}")
        if int(self.n_paths) != self.n_paths or self.n_paths < 1:
            raise ConfigError(f"n_paths must be a positive integer, got {self.n_paths!r}")
        if int(self.seed) != self.seed or not 0 <= self.seed <= MAX_SEED:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        if int(self.refinements) != self.refinements or not 0 <= self.refinements <= 8:
            raise ConfigError("refinements must be an integer in [0, 8]")
        if isinstance(self.sampler, CompoundPoissonGaussian):
            if not (self.sampler.delta > 0) or not self.sampler.delta < self.r / 10.0:
                raise ConfigError(f"CPG threshold delta must satisfy 0 < delta < r/10, got {self.sampler.delta!r}")
        elif not isinstance(self.sampler, ExactIncrement):
            raise ConfigError(f"unknown sampler {self.sampler!r}")
        if self.t_max is None:
            object.__setattr__(self, "t_max", DEFAULT_HORIZON_FACTOR * self.closed_form())
        if not self.h <= self.t_max:
            raise ConfigError(f"need h <= t_max (h={self.h}, t_max={self.t_max})")

    def closed_form(self) -> float:
        return mean_exit_closed_form(self.x0, self.r, self.alpha, total_mass(self.mu))

    def to_dict(self) -> dict:
        sampler = {"kind": self.sampler.kind}
        if isinstance(self.sampler, CompoundPoissonGaussian):
            sampler["delta"] = self.sampler.delta
        return {
            "alpha": self.alpha,
            "r": float(self.r),
            "x0": self.x0.tolist(),
            "mu": self.mu.to_dict(),
            "sampler": sampler,
            "h": float(self.h),
            "t_max": float(self.t_max),
            "n_paths": int(self.n_paths),
            "seed": int(self.seed),
            "refinements": int(self.refinements),
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class ExitTimeEstimate:
    """Sample mean of exit times at step ``h`` with CLT standard error.

    ``level_means[j]`` is the estimate on the grid h / 2**j (index 0 is
    ``mean``); ``shifts[j]`` is the paired difference between levels j
    and j+1 and ``shift_stderrs[j]`` its standard error.
    """

    mean: float
    stderr: float
    n_completed: int
    n_truncated: int
    config_hash: str
    h: float
    level_means: tuple[float, ...] = ()
    level_stderrs: tuple[float, ...] = ()
    shifts: tuple[float, ...] = ()
    shift_stderrs: tuple[float, ...] = ()

    @property
    def n_paths(self) -> int:
        return self.n_completed + self.n_truncated

    @property
    def truncated_fraction(self) -> float:
        return self.n_truncated / self.n_paths

    @property
    def unreliable(self) -> bool:
        return self.truncated_fraction > TRUNCATION_LIMIT


class _PathRunner:
    """Binds a config to the right kernel and precomputed parameters."""

    def __init__(self, config: ExitTimeConfig):
        self.config = config
        mu = config.mu
        a = config.alpha
        self.levels = config.refinements + 1
        self.h_fine = config.h / 2**config.refinements
        n_coarse = math.ceil(config.t_max / config.h - 1e-9)
        self.nmax = n_coarse * 2**config.refinements
        self.horizon = n_coarse * config.h
        self.x0 = np.array(config.x0, dtype=float)
        self.r = float(config.r)
        if isinstance(config.sampler, ExactIncrement):
            if mu.is_discrete:
                self.kind = "exact_discrete"
                self.atoms = np.ascontiguousarray(mu.atoms)
                self.sigmas = (mu.masses * c1(a) * self.h_fine) ** (1.0 / a)
            else:
                self.kind = "exact_isotropic"
                self.scale = isotropic_increment_scale(mu, a, self.h_fine)
        else:
            self.kind = "cpg"
            delta = config.sampler.delta
            cov = small_jump_covariance(mu, a, delta)
            evals, evecs = np.linalg.eigh(cov)
            self.chol = np.ascontiguousarray(evecs * np.sqrt(np.clip(evals, 0.0, None)))
            self.rate = big_jump_intensity(mu, a, delta)
            self.delta = float(delta)
            if mu.is_discrete:
                self.atoms = np.ascontiguousarray(mu.atoms)
                self.cum_probs = np.cumsum(mu.masses) / mu.masses.sum()
                self.isotropic = False
            else:
                self.atoms = np.zeros((1, mu.d))
                self.cum_probs = np.ones(1)
                self.isotropic = True

    def run(self, gen: np.random.Generator, out: np.ndarray) -> None:
        c = self.config
        if self.kind == "exact_discrete":
            _kernels.exit_exact_discrete(gen, c.alpha, self.atoms, self.sigmas, self.x0, self.r,
                                         self.h_fine, self.nmax, out)
        elif self.kind == "exact_isotropic":
            _kernels.exit_exact_isotropic(gen, c.alpha, self.scale, self.x0, self.r,
                                          self.h_fine, self.nmax, out)
        else:
            _kernels.exit_cpg(gen, c.alpha, self.chol, self.rate, self.delta, self.atoms, self.cum_probs,
                              self.isotropic, self.x0, self.r, self.h_fine, self.nmax, out)

    def path_samples(self, path_id: int) -> np.ndarray:
        """Exit times of one path on every level, finest grid last; -1 marks truncation."""
        out = np.empty(self.levels)
        self.run(path_generator(self.config.seed, path_id), out)
        return out[::-1].copy()


def _check_sampler_support(config: ExitTimeConfig, expected: type) -> None:
    if not isinstance(config.sampler, expected):
        raise ConfigError(f"config sampler is {config.sampler.kind!r}")


def simulate_exit_exact(config: ExitTimeConfig, rng: np.random.Generator) -> float:
    """One exit-time sample with exact increments; returns ``t_max`` if the path never left."""
    _check_sampler_support(config, ExactIncrement)
    runner = _PathRunner(config)
    out = np.empty(runner.levels)
    runner.run(rng, out)
    t = out[-1]
    return runner.horizon if t < 0 else float(t)


def simulate_exit_cpg(config: ExitTimeConfig, rng: np.random.Generator) -> float:
    """One exit-time sample from the compound Poisson + Gaussian scheme."""
    _check_sampler_support(config, CompoundPoissonGaussian)
    runner = _PathRunner(config)
    out = np.empty(runner.levels)
    runner.run(rng, out)
    t = out[-1]
    return runner.horizon if t < 0 else float(t)


def _run_block(runner: _PathRunner, start: int, stop: int, samples: np.ndarray) -> None:
    for i in range(start, stop):
        samples[i] = runner.path_samples(i)


def simulate_paths(config: ExitTimeConfig, threads: int = 1) -> tuple[np.ndarray, float]:
    """Raw exit-time samples, shape (n_paths, refinements + 1), and the horizon.

    Column 0 is step ``h``; later columns are the finer grids.  Entries
    equal to -1 are truncated paths.
    """
    runner = _PathRunner(config)
    n = config.n_paths
    samples = np.empty((n, runner.levels))
    threads = max(1, int(threads))
    if threads == 1:
        _run_block(runner, 0, n, samples)
    else:
        bounds = np.linspace(0, n, threads + 1).astype(int)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(_run_block, runner, lo, hi, samples) for lo, hi in zip(bounds[:-1], bounds[1:])]
            for fut in futures:
                fut.result()
    return samples, runner.horizon


def _mean_and_stderr(x: np.ndarray) -> tuple[float, float]:
    n = x.shape[0]
    mean = math.fsum(x) / n
    if n < 2:
        return mean, float("inf")
    var = math.fsum((x - mean) ** 2) / (n - 1)
    return mean, math.sqrt(var / n)


def estimate_mean_exit(config: ExitTimeConfig, threads: int = 1) -> ExitTimeEstimate:
    """Run ``n_paths`` independent paths and summarise the exit times.

    Each path draws from its own stream keyed by (seed, path index) and
    the reduction uses exactly rounded sums over the path-ordered array,
    so the result does not depend on ``threads``.
    """
    raw, horizon = simulate_paths(config, threads)
    truncated = raw < 0
    samples = np.where(truncated, horizon, raw)
    means, errs = zip(*(_mean_and_stderr(samples[:, j]) for j in range(samples.shape[1])))
    shifts, shift_errs = [], []
    for j in range(samples.shape[1] - 1):
        m, e = _mean_and_stderr(samples[:, j] - samples[:, j + 1])
        shifts.append(m)
        shift_errs.append(e)
    n_trunc = int(truncated[:, 0].sum())
    return ExitTimeEstimate(
        mean=means[0],
        stderr=errs[0],
        n_completed=config.n_paths - n_trunc,
        n_truncated=n_trunc,
        config_hash=config.config_hash(),
        h=float(config.h),
        level_means=tuple(means),
        level_stderrs=tuple(errs),
        shifts=tuple(shifts),
        shift_stderrs=tuple(shift_errs),
    )


def config_from_dict(doc: dict, x0=None) -> ExitTimeConfig:
    """Build a config from the JSON schema used by the command line.

    ``x0`` overrides ``doc["x0"]`` (used when a document lists several
    starting points).
    """
    from .spectral import from_dict

    try:
        mu = from_dict(doc["mu"])
        s = doc.get("sampler", {"kind": "exact"})
        if s["kind"] == "exact":
            sampler: Sampler = ExactIncrement()
        elif s["kind"] == "cpg":
            sampler = CompoundPoissonGaussian(float(s.get("delta", float(doc["r"]) / 50.0)))
        else:
            raise ConfigError(f"unknown sampler kind {s['kind']!r}")
        t_max = doc.get("t_max")
        return ExitTimeConfig(
            x0=doc["x0"] if x0 is None else x0,
            r=float(doc["r"]),
            alpha=float(doc["alpha"]),
            mu=mu,
            sampler=sampler,
            h=float(doc["h"]),
            n_paths=int(doc["n_paths"]),
            seed=int(doc["seed"]),
            t_max=None if t_max is None else float(t_max),
            refinements=int(doc.get("refinements", 0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"malformed experiment config: {exc!r}") from exc
