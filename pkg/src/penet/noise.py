"""Samplers for the three driving-noise increment laws.

Supported laws for the noise increments of the OU simulator:

* Gaussian: increments over dt are Normal(0, dt).
* Symmetric alpha-stable: a draw with characteristic function
  exp(-scale^alpha |u|^alpha); increments over dt use scale = dt**(1/alpha),
  which is the exact self-similar scaling of the stable motion.
* Student-Levy: the process value at unit time is Student-t(nu).  The law
  of increments over dt != 1 has no closed form, so increments are
  generated as dt * t(nu) (exact at dt = 1, linear-in-dt scale for small
  dt; see README notes on this approximation).

All samplers are pure functions of an explicitly passed ``SeededRng`` and
compute in 64-bit floats.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import SeededRng

GAUSSIAN = "gaussian"
ALPHA_STABLE = "alpha-stable"
STUDENT_LEVY = "student-levy"

_TAGS = (GAUSSIAN, ALPHA_STABLE, STUDENT_LEVY)


@dataclass(frozen=True)
class NoiseKind:
    """One driving-noise law: a tag plus its parameter (alpha or nu)."""

    tag: str
    param: float | None = None

    def __post_init__(self):
        if self.tag not in _TAGS:
            raise ValueError(f"unknown noise tag {self.tag!r}; expected one of {_TAGS}")
        if self.tag == GAUSSIAN:
            if self.param is not None:
                raise ValueError("gaussian noise takes no parameter")
        elif self.tag == ALPHA_STABLE:
            if self.param is None or not 0.0 < self.param <= 2.0:
                raise ValueError(f"stability index must lie in (0, 2], got {self.param}")
        else:
            if self.param is None or self.param <= 0.0:
                raise ValueError(f"degrees of freedom must be > 0, got {self.param}")

    @classmethod
    def gaussian(cls) -> "NoiseKind":
        return cls(GAUSSIAN)

    @classmethod
    def alpha_stable(cls, alpha: float) -> "NoiseKind":
        return cls(ALPHA_STABLE, float(alpha))

    @classmethod
    def student_levy(cls, nu: float) -> "NoiseKind":
        return cls(STUDENT_LEVY, float(nu))


def _check_dt(dt: float) -> float:
    dt = float(dt)
    if not dt > 0.0:
        raise ValueError(f"dt must be > 0, got {dt}")
    return dt


def sample_gaussian_increments(rng: SeededRng, dt: float, size: int) -> np.ndarray:
    """Draws from Normal(0, dt)."""
    dt = _check_dt(dt)
    return rng.generator.standard_normal(size) * np.sqrt(dt)


def sample_gaussian_increment(rng: SeededRng, dt: float) -> float:
    return float(sample_gaussian_increments(rng, dt, 1)[0])


def sample_alpha_stable_batch(rng: SeededRng, alpha: float, scale: float, size: int) -> np.ndarray:
    """Symmetric alpha-stable draws with char. function exp(-scale^alpha |u|^alpha).

    Uses the Chambers-Mallows-Stuck transform of (Uniform(-pi/2, pi/2),
    Exponential(1)) pairs for alpha < 2 and the Gaussian branch
    scale * sqrt(2) * N(0, 1) for alpha = 2.
    """
    alpha = float(alpha)
    scale = float(scale)
    if not 0.0 < alpha <= 2.0:
        raise ValueError(f"stability index must lie in (0, 2], got {alpha}")
    if not scale > 0.0:
        raise ValueError(f"scale must be > 0, got {scale}")
    gen = rng.generator
    if alpha == 2.0:
        return scale * np.sqrt(2.0) * gen.standard_normal(size)
    u = np.pi * (gen.random(size) - 0.5)
    # ziggurat exponentials are positive; the floor only guards the
    # measure-zero w == 0 case, which would otherwise overflow for alpha < 1
    w = np.maximum(gen.standard_exponential(size), 1e-300)
    s = np.sin(alpha * u) / np.cos(u) ** (1.0 / alpha)
    t = (np.cos((1.0 - alpha) * u) / w) ** ((1.0 - alpha) / alpha)
    return scale * s * t


def sample_alpha_stable(rng: SeededRng, alpha: float, scale: float) -> float:
    return float(sample_alpha_stable_batch(rng, alpha, scale, 1)[0])


def sample_student_t_batch(rng: SeededRng, nu: float, size: int) -> np.ndarray:
    """Standard Student-t(nu) draws (location 0, unit scale).

    numpy's generator implements the Normal / sqrt(ChiSquare(nu)/nu) ratio
    construction.
    """
    nu = float(nu)
    if not nu > 0.0:
        raise ValueError(f"degrees of freedom must be > 0, got {nu}")
    return rng.generator.standard_t(nu, size)


def sample_student_t(rng: SeededRng, nu: float) -> float:
    return float(sample_student_t_batch(rng, nu, 1)[0])


def sample_increments(rng: SeededRng, kind: NoiseKind, dt: float, size: int) -> np.ndarray:
    """Increments of the driving noise over a step of length dt."""
    dt = _check_dt(dt)
    if kind.tag == GAUSSIAN:
        return sample_gaussian_increments(rng, dt, size)
    if kind.tag == ALPHA_STABLE:
        return sample_alpha_stable_batch(rng, kind.param, dt ** (1.0 / kind.param), size)
    return dt * sample_student_t_batch(rng, kind.param, size)


def sample_increment(rng: SeededRng, kind: NoiseKind, dt: float) -> float:
    return float(sample_increments(rng, kind, dt, 1)[0])
