"""Ornstein-Uhlenbeck SDE families and Euler-Maruyama simulation.

The simulated model is the Langevin equation

    dX(t) = -eta X(t) dt + epsilon dL(t)

driven by one of the noise laws in :mod:`penet.noise`, discretized with one
Euler-Maruyama step per observation:

    X[j+1] = X[j] - eta X[j] h + epsilon dL_j .

A family bundles the training ranges from which parameters, spanning time
T and length N are drawn uniformly; h = T / N.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .noise import ALPHA_STABLE, GAUSSIAN, STUDENT_LEVY, NoiseKind, sample_increments
from .rng import SeededRng


class SimulationDiverged(RuntimeError):
    """A simulated path hit a non-finite value."""

    def __init__(self, step: int, message: str | None = None):
        self.step = step
        super().__init__(message or f"simulation diverged at step {step}")


@dataclass(frozen=True)
class ParamVector:
    """Packaged SDE parameters: drift eta, noise intensity epsilon and,
    for the heavy-tailed families, the noise parameter (alpha or nu)."""

    eta: float
    epsilon: float
    noise_param: float | None = None

    def __post_init__(self):
        if self.epsilon < 0.0:
            raise ValueError(f"noise intensity must be >= 0, got {self.epsilon}")

    def as_array(self) -> np.ndarray:
        if self.noise_param is None:
            return np.array([self.eta, self.epsilon], dtype=np.float64)
        return np.array([self.eta, self.epsilon, self.noise_param], dtype=np.float64)


@dataclass(frozen=True)
class Trajectory:
    """Equally spaced observations: values x, frequency h and start x0."""

    values: np.ndarray
    h: float
    x0: float

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if values.ndim != 1 or values.shape[0] < 1:
            raise ValueError("trajectory values must be a non-empty 1-D array")
        if not np.isfinite(values).all():
            raise ValueError("trajectory values must be finite")
        if not self.h > 0.0:
            raise ValueError(f"observation frequency must be > 0, got {self.h}")

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    @property
    def spanning_time(self) -> float:
        return self.n * self.h


def _check_interval(name, lo, hi):
    if lo > hi:
        raise ValueError(f"{name} range has lower bound {lo} > upper bound {hi}")


@dataclass(frozen=True)
class SdeFamily:
    """An OU family: noise law selector plus uniform sampling ranges."""

    noise_tag: str
    eta_range: tuple[float, float]
    epsilon_range: tuple[float, float]
    t_range: tuple[float, float]
    n_range: tuple[int, int]
    noise_param_range: tuple[float, float] | None = None

    def __post_init__(self):
        if self.noise_tag not in (GAUSSIAN, ALPHA_STABLE, STUDENT_LEVY):
            raise ValueError(f"unknown noise tag {self.noise_tag!r}")
        _check_interval("eta", *self.eta_range)
        _check_interval("epsilon", *self.epsilon_range)
        _check_interval("T", *self.t_range)
        _check_interval("N", *self.n_range)
        if self.n_range[0] < 2:
            raise ValueError(f"N range lower bound must be >= 2, got {self.n_range[0]}")
        if self.noise_tag == GAUSSIAN:
            if self.noise_param_range is not None:
                raise ValueError("gaussian family takes no noise parameter range")
        else:
            if self.noise_param_range is None:
                raise ValueError(f"{self.noise_tag} family needs a noise parameter range")
            _check_interval("noise parameter", *self.noise_param_range)
            lo = self.noise_param_range[0]
            # validate the endpoints against the noise-law domain
            NoiseKind(self.noise_tag, lo)
            NoiseKind(self.noise_tag, self.noise_param_range[1])

    @property
    def n_params(self) -> int:
        """Number of estimated parameters M."""
        return 2 if self.noise_tag == GAUSSIAN else 3

    @property
    def param_names(self) -> tuple[str, ...]:
        if self.noise_tag == GAUSSIAN:
            return ("eta", "epsilon")
        if self.noise_tag == ALPHA_STABLE:
            return ("eta", "epsilon", "alpha")
        return ("eta", "epsilon", "nu")

    def param_ranges(self) -> tuple[tuple[float, float], ...]:
        if self.noise_param_range is None:
            return (self.eta_range, self.epsilon_range)
        return (self.eta_range, self.epsilon_range, self.noise_param_range)

    def noise_kind(self, theta: ParamVector) -> NoiseKind:
        if self.noise_tag == GAUSSIAN:
            return NoiseKind.gaussian()
        return NoiseKind(self.noise_tag, theta.noise_param)

    def midpoint(self) -> ParamVector:
        mids = [0.5 * (lo + hi) for lo, hi in self.param_ranges()]
        if self.noise_tag == GAUSSIAN:
            return ParamVector(mids[0], mids[1])
        return ParamVector(mids[0], mids[1], mids[2])

    def replace_ranges(self, **fixed: float) -> "SdeFamily":
        """Copy of the family with some parameter ranges pinned to a point.

        Keys are parameter names (``eta``, ``epsilon``, ``alpha``/``nu``) or
        ``t``/``n`` for the design ranges.
        """
        kwargs = {
            "noise_tag": self.noise_tag,
            "eta_range": self.eta_range,
            "epsilon_range": self.epsilon_range,
            "t_range": self.t_range,
            "n_range": self.n_range,
            "noise_param_range": self.noise_param_range,
        }
        for key, value in fixed.items():
            if key == "eta":
                kwargs["eta_range"] = (float(value), float(value))
            elif key == "epsilon":
                kwargs["epsilon_range"] = (float(value), float(value))
            elif key in ("alpha", "nu", "noise_param"):
                kwargs["noise_param_range"] = (float(value), float(value))
            elif key == "t":
                kwargs["t_range"] = (float(value), float(value))
            elif key == "n":
                kwargs["n_range"] = (int(value), int(value))
            else:
                raise ValueError(f"unknown parameter {key!r}")
        return SdeFamily(**kwargs)


def gaussian_family(n_range: tuple[int, int] = (3000, 4000)) -> SdeFamily:
    """Gaussian-driven OU training ranges: eta in [0,5], epsilon in [0,0.05], T in [5,15]."""
    return SdeFamily(GAUSSIAN, (0.0, 5.0), (0.0, 0.05), (5.0, 15.0), n_range)


def alpha_stable_family(n_range: tuple[int, int] = (3000, 4000)) -> SdeFamily:
    """Alpha-stable OU ranges: as Gaussian plus alpha in [1.01, 2]."""
    return SdeFamily(ALPHA_STABLE, (0.0, 5.0), (0.0, 0.05), (5.0, 15.0), n_range, (1.01, 2.0))


def student_family(n_range: tuple[int, int] = (3000, 4000)) -> SdeFamily:
    """Student-Levy OU ranges: eta [0,5], epsilon [0,0.05], T [3,15], nu [2.01,4]."""
    return SdeFamily(STUDENT_LEVY, (0.0, 5.0), (0.0, 0.05), (3.0, 15.0), n_range, (2.01, 4.0))


FAMILY_BUILDERS = {
    GAUSSIAN: gaussian_family,
    ALPHA_STABLE: alpha_stable_family,
    STUDENT_LEVY: student_family,
}


def _uniform(gen: np.random.Generator, lo: float, hi: float) -> float:
    return float(lo + (hi - lo) * gen.random())


def sample_parameters(rng: SeededRng, family: SdeFamily) -> tuple[ParamVector, int, float]:
    """Uniform draw of (theta, N, h) from the family ranges; h = T / N.

    Draw order is fixed (eta, epsilon, noise parameter, T, N) so that a
    stream position never depends on which values were drawn.
    """
    gen = rng.generator
    eta = _uniform(gen, *family.eta_range)
    epsilon = _uniform(gen, *family.epsilon_range)
    noise_param = None
    if family.noise_param_range is not None:
        noise_param = _uniform(gen, *family.noise_param_range)
    t = _uniform(gen, *family.t_range)
    n = int(gen.integers(family.n_range[0], family.n_range[1] + 1))
    return ParamVector(eta, epsilon, noise_param), n, t / n


def simulate_ou(
    rng: SeededRng,
    theta: ParamVector,
    noise: NoiseKind,
    n: int,
    h: float,
    x0: float,
) -> Trajectory:
    """Euler-Maruyama path with X[0] = x0 and exactly n values."""
    n = int(n)
    if n < 2:
        raise ValueError(f"need at least 2 observations, got {n}")
    h = float(h)
    if not h > 0.0:
        raise ValueError(f"step size must be > 0, got {h}")
    increments = sample_increments(rng, noise, h, n - 1)
    # X[j+1] = a X[j] + e_j is a one-pole filter over [x0, e_0, ..., e_{n-2}];
    # overflow to inf is caught below as divergence
    drive = np.empty(n, dtype=np.float64)
    drive[0] = x0
    a = 1.0 - theta.eta * h
    with np.errstate(over="ignore", invalid="ignore"):
        drive[1:] = theta.epsilon * increments
        values = lfilter([1.0], [1.0, -a], drive)
    if not np.isfinite(values).all():
        step = int(np.argmin(np.isfinite(values)))
        raise SimulationDiverged(step)
    return Trajectory(values, h, float(x0))


@dataclass(frozen=True)
class X0Policy:
    """Initial condition policy: uniform draw per record, or a fixed value."""

    kind: str = "uniform"
    low: float = -1.0
    high: float = 1.0
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in ("uniform", "fixed"):
            raise ValueError(f"unknown x0 policy {self.kind!r}")
        if self.kind == "uniform" and self.low > self.high:
            raise ValueError("x0 range lower bound exceeds upper bound")

    @classmethod
    def fixed(cls, value: float) -> "X0Policy":
        return cls(kind="fixed", value=float(value))

    def draw(self, rng: SeededRng) -> float:
        if self.kind == "fixed":
            return self.value
        return _uniform(rng.generator, self.low, self.high)
