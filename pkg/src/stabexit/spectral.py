"""Spectral measures on the unit sphere and the Levy measure they induce.

A symmetric alpha-stable Levy measure has the polar form
``nu(dx) = mu(dz) dr / r**(1 + alpha)`` with ``mu`` a finite symmetric
measure on the sphere.  Discrete measures are stored canonically as
half-sphere representatives: an atom ``(z, m)`` stands for the pair
``{z: m, -z: m}``, so the total mass is twice the sum of stored masses.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import AlphaLike, as_alpha
from .errors import ConfigError, DomainError

UNIT_TOL = 1e-12
MERGE_TOL = 1e-12

DISCRETE = "discrete"
ISOTROPIC = "isotropic"


def direction(coords) -> np.ndarray:
    """Return ``coords`` as a float array after checking it is a unit vector."""
    z = np.atleast_1d(np.asarray(coords, dtype=float))
    if z.ndim != 1 or not np.all(np.isfinite(z)):
        raise DomainError(f"direction must be a finite vector, got {coords!r}")
    if abs(np.linalg.norm(z) - 1.0) > UNIT_TOL:
        raise DomainError(f"direction {z.tolist()} is not a unit vector (|z|={np.linalg.norm(z)!r})")
    return z


def _half_sphere(z: np.ndarray) -> np.ndarray:
    """Representative of {z, -z} whose first non-negligible coordinate is positive."""
    for c in z:
        if abs(c) > UNIT_TOL:
            return z if c > 0 else -z
    return z


@dataclass(frozen=True, eq=False)
class SpectralMeasure:
    """Finite symmetric measure on the unit sphere of R^d.

    Build instances with :meth:`discrete`, :meth:`isotropic` or
    :func:`symmetrize`; the raw constructor expects canonical atoms.
    """

    d: int
    kind: str
    atoms: np.ndarray | None = None  # (k, d) half-sphere representatives
    masses: np.ndarray | None = None  # (k,) mass of each of z and -z
    isotropic_mass: float | None = None

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise DomainError(f"dimension must be a positive integer, got {self.d!r}")
        object.__setattr__(self, "d", int(self.d))
        if self.kind == DISCRETE:
            atoms = np.array(self.atoms, dtype=float, ndmin=2)
            masses = np.array(self.masses, dtype=float, ndmin=1)
            if atoms.shape[0] == 0 or atoms.shape != (masses.shape[0], self.d):
                raise DomainError("atoms must be a non-empty (k, d) array matching masses")
            if not np.all(np.isfinite(masses)) or np.any(masses <= 0):
                raise DomainError("atom masses must be positive and finite")
            for z in atoms:
                direction(z)
                if not np.array_equal(_half_sphere(z), z):
                    raise DomainError("atoms must be canonical half-sphere representatives; use symmetrize()")
            atoms.setflags(write=False)
            masses.setflags(write=False)
            object.__setattr__(self, "atoms", atoms)
            object.__setattr__(self, "masses", masses)
        elif self.kind == ISOTROPIC:
            m = float(self.isotropic_mass)
            if not (m > 0.0) or not math.isfinite(m):
                raise DomainError(f"total mass must be positive and finite, got {self.isotropic_mass!r}")
            object.__setattr__(self, "isotropic_mass", m)
        else:
            raise DomainError(f"unknown spectral measure kind {self.kind!r}")

    @classmethod
    def discrete(cls, directions: Iterable, masses: Iterable[float]) -> "SpectralMeasure":
        """Symmetrized measure built from an arbitrary list of atoms."""
        return symmetrize(list(zip(directions, masses)))

    @classmethod
    def isotropic(cls, d: int, total_mass: float) -> "SpectralMeasure":
        return cls(d=d, kind=ISOTROPIC, isotropic_mass=total_mass)

    @property
    def is_discrete(self) -> bool:
        return self.kind == DISCRETE

    def full_atoms(self) -> list[tuple[np.ndarray, float]]:
        """All atoms of the symmetric measure, both signs listed."""
        if not self.is_discrete:
            raise DomainError("an isotropic measure has no atoms")
        out = []
        for z, m in zip(self.atoms, self.masses):
            out.append((z.copy(), float(m)))
            out.append((-z, float(m)))
        return out

    def to_dict(self) -> dict:
        if self.is_discrete:
            atoms = [{"z": z.tolist(), "m": m} for z, m in self.full_atoms()]
            return {"d": self.d, "type": DISCRETE, "atoms": atoms}
        return {"d": self.d, "type": ISOTROPIC, "total_mass": self.isotropic_mass}

    def __eq__(self, other):
        if not isinstance(other, SpectralMeasure):
            return NotImplemented
        if (self.d, self.kind) != (other.d, other.kind):
            return False
        if not self.is_discrete:
            return self.isotropic_mass == other.isotropic_mass
        return np.array_equal(self.atoms, other.atoms) and np.array_equal(self.masses, other.masses)

    def __hash__(self):
        return hash(json.dumps(self.to_dict(), sort_keys=True))


def symmetrize(mu) -> SpectralMeasure:
    """Return ``(mu + mu(-.)) / 2`` in canonical half-sphere form.

    ``mu`` is either a :class:`SpectralMeasure` (returned unchanged, it is
    already symmetric) or a sequence of ``(direction, mass)`` pairs.
    Directions closer than ``MERGE_TOL`` are merged.
    """
    if isinstance(mu, SpectralMeasure):
        return mu
    pairs = list(mu)
    if not pairs:
        raise DomainError("cannot symmetrize an empty atom list")
    reps: list[np.ndarray] = []
    weights: list[float] = []
    d = None
    for z, m in pairs:
        z = direction(z)
        m = float(m)
        if not (m > 0.0) or not math.isfinite(m):
            raise DomainError(f"atom masses must be positive and finite, got {m!r}")
        if d is None:
            d = z.shape[0]
        elif z.shape[0] != d:
            raise DomainError("all atoms must have the same dimension")
        rep = _half_sphere(z)
        for i, other in enumerate(reps):
            if np.linalg.norm(rep - other) <= MERGE_TOL:
                weights[i] += m
                break
        else:
            reps.append(rep.copy())
            weights.append(m)
    # The pair {z, -z} of the symmetrized measure carries (mu(z) + mu(-z))/2 on each point.
    masses = np.array(weights) / 2.0
    return SpectralMeasure(d=d, kind=DISCRETE, atoms=np.array(reps), masses=masses)


def is_symmetric(pairs: Sequence, tol: float = MERGE_TOL) -> bool:
    """True when a raw atom list is closed under z -> -z with equal masses."""
    pairs = [(direction(z), float(m)) for z, m in pairs]
    for z, m in pairs:
        mass_z = sum(mm for zz, mm in pairs if np.linalg.norm(zz - z) <= tol)
        mass_neg = sum(mm for zz, mm in pairs if np.linalg.norm(zz + z) <= tol)
        if not math.isclose(mass_z, mass_neg, rel_tol=1e-12, abs_tol=0.0):
            return False
    return True


def total_mass(mu: SpectralMeasure) -> float:
    """|mu|, the mass of the whole sphere."""
    if mu.is_discrete:
        return 2.0 * math.fsum(mu.masses)
    return mu.isotropic_mass


def nu_ball_complement(mu: SpectralMeasure, alpha: AlphaLike) -> float:
    """Levy measure of {|y| >= 1}: |mu| / alpha."""
    return total_mass(mu) / as_alpha(alpha)


def big_jump_intensity(mu: SpectralMeasure, alpha: AlphaLike, delta: float) -> float:
    """Rate of jumps larger than ``delta``: |mu| delta^(-alpha) / alpha."""
    a = as_alpha(alpha)
    if not delta > 0:
        raise DomainError(f"delta must be positive, got {delta!r}")
    return total_mass(mu) * delta ** (-a) / a


def second_moment_matrix(mu: SpectralMeasure) -> np.ndarray:
    """The matrix  int z z^T mu(dz)."""
    if mu.is_discrete:
        # each stored atom stands for z and -z, which contribute equally
        return 2.0 * np.einsum("k,ki,kj->ij", mu.masses, mu.atoms, mu.atoms)
    return np.eye(mu.d) * (mu.isotropic_mass / mu.d)


def small_jump_covariance(mu: SpectralMeasure, alpha: AlphaLike, delta: float) -> np.ndarray:
    """Covariance per unit time of the jumps of size at most ``delta``.

    Integrating y y^T over {|y| <= delta} against the polar form gives
    ``delta^(2-alpha)/(2-alpha) * int z z^T mu(dz)``.
    """
    a = as_alpha(alpha)
    if not delta > 0:
        raise DomainError(f"delta must be positive, got {delta!r}")
    return delta ** (2.0 - a) / (2.0 - a) * second_moment_matrix(mu)


def sample_direction(mu: SpectralMeasure, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw directions from mu/|mu|.

    Returns shape ``(d,)`` when ``size`` is None, else ``(size, d)``.
    """
    n = 1 if size is None else int(size)
    if mu.is_discrete:
        p = mu.masses / mu.masses.sum()
        idx = rng.choice(len(p), size=n, p=p)
        signs = np.where(rng.random(n) < 0.5, 1.0, -1.0)
        out = mu.atoms[idx] * signs[:, None]
    else:
        g = rng.standard_normal((n, mu.d))
        out = g / np.linalg.norm(g, axis=1, keepdims=True)
    return out[0] if size is None else out


def sample_big_jump(mu: SpectralMeasure, alpha: AlphaLike, delta: float, rng: np.random.Generator,
                    size: int | None = None) -> np.ndarray:
    """Draw from nu restricted to {|y| > delta}, normalised.

    The radius has the Pareto tail of dr/r^(1+alpha): delta * U^(-1/alpha).
    """
    a = as_alpha(alpha)
    z = sample_direction(mu, rng, size)
    n = 1 if size is None else int(size)
    # 1 - random() lies in (0, 1], so the radius is finite.
    radius = delta * (1.0 - rng.random(n)) ** (-1.0 / a)
    if size is None:
        return z * radius[0]
    return z * radius[:, None]


def mean_abs_projection_power(d: int, alpha: float) -> float:
    """E|z_1|^alpha for z uniform on the unit sphere of R^d."""
    return math.exp(
        math.lgamma(0.5 * (alpha + 1.0)) + math.lgamma(0.5 * d)
        - 0.5 * math.log(math.pi) - math.lgamma(0.5 * (d + alpha))
    )


def from_dict(doc: dict) -> SpectralMeasure:
    """Build a measure from its JSON document and canonicalize it."""
    try:
        d = int(doc["d"])
        kind = doc["type"]
        if kind == DISCRETE:
            atoms = doc["atoms"]
            pairs = [(a["z"], a["m"]) for a in atoms]
            mu = symmetrize(pairs)
            if mu.d != d:
                raise ConfigError(f"atoms have dimension {mu.d}, document says d={d}")
            return mu
        if kind == ISOTROPIC:
            return SpectralMeasure.isotropic(d, doc["total_mass"])
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed spectral measure document: {exc!r}") from exc
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown spectral measure type {kind!r}")


def load(path) -> SpectralMeasure:
    return from_dict(json.loads(Path(path).read_text()))


def axis_cross(d: int, total: float) -> SpectralMeasure:
    """Equal atoms on +-e_1, ..., +-e_d with the given total mass."""
    eye = np.eye(d)
    return SpectralMeasure(d=d, kind=DISCRETE, atoms=eye, masses=np.full(d, total / (2.0 * d)))


def antipodal_pair(d: int, total: float, axis: int = 0) -> SpectralMeasure:
    z = np.zeros((1, d))
    z[0, axis] = 1.0
    return SpectralMeasure(d=d, kind=DISCRETE, atoms=z, masses=np.array([total / 2.0]))
