"""Synthetic data-generating processes: y = g(x) + sigma(x) e, x ~ U(0,1)^d."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from ..errors import InvalidConfig
from ..numutil import RandomStream
from ..regression import Dataset

NOISES = ("gaussian", "heteroskedastic", "student_t")


@dataclass(frozen=True)
class TruthFunction:
    name: str
    dim: int
    value: Callable[[np.ndarray], np.ndarray]
    deriv: Callable[[np.ndarray, int], np.ndarray]

    def __call__(self, X):
        return self.value(np.asarray(X, dtype=float))


def _linear(X):
    return 1.0 + 2.0 * X[:, 0]


def _linear_d(X, j):
    return np.full(X.shape[0], 2.0 if j == 0 else 0.0)


def _quadratic(X):
    return 1.0 + X[:, 0] - 2.0 * X[:, 0] ** 2


def _quadratic_d(X, j):
    return 1.0 - 4.0 * X[:, 0] if j == 0 else np.zeros(X.shape[0])


def _sine(X):
    return np.sin(2.0 * np.pi * X[:, 0])


def _sine_d(X, j):
    return 2.0 * np.pi * np.cos(2.0 * np.pi * X[:, 0]) if j == 0 else np.zeros(X.shape[0])


def _interaction(X):
    return X[:, 0] * X[:, 1]


def _interaction_d(X, j):
    return X[:, 1 - j].copy()


TRUTHS: dict[str, TruthFunction] = {
    "linear": TruthFunction("linear", 1, _linear, _linear_d),
    "quadratic": TruthFunction("quadratic", 1, _quadratic, _quadratic_d),
    "sine": TruthFunction("sine", 1, _sine, _sine_d),
    "interaction": TruthFunction("interaction", 2, _interaction, _interaction_d),
}


@dataclass(frozen=True)
class DgpSpec:
    """Named truth, noise law, and design dimension.

    Noise laws (all with conditional standard deviation sigma(x)):
    ``gaussian`` sigma(x) = sigma; ``heteroskedastic`` sigma(x) = sigma (0.5 + x_1);
    ``student_t`` sigma(x) = sigma with t(df) shocks rescaled to unit variance.
    ``sigma = 0`` gives noiseless data (exactness checks only).
    """

    truth: str = "sine"
    noise: str = "gaussian"
    sigma: float = 1.0
    df: float = 8.0
    dim: int | None = None

    def __post_init__(self) -> None:
        if self.truth not in TRUTHS:
            raise InvalidConfig(f"unknown truth {self.truth!r}; available: {sorted(TRUTHS)}")
        if self.noise not in NOISES:
            raise InvalidConfig(f"unknown noise {self.noise!r}; available: {NOISES}")
        if not self.sigma >= 0:
            raise InvalidConfig("sigma must be >= 0")
        if self.noise == "student_t" and not self.df > 4:
            raise InvalidConfig("student_t noise needs df > 4 (four finite moments)")
        base = TRUTHS[self.truth].dim
        d = base if self.dim is None else int(self.dim)
        if d < base or d > 3:
            raise InvalidConfig(f"truth {self.truth!r} needs dimension between {base} and 3, got {d}")
        object.__setattr__(self, "dim", d)

    @property
    def g(self) -> TruthFunction:
        return TRUTHS[self.truth]

    def sigma_of(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.noise == "heteroskedastic":
            return self.sigma * (0.5 + X[:, 0])
        return np.full(X.shape[0], float(self.sigma))

    def to_dict(self) -> dict:
        return asdict(self)


def draw_noise(dgp: DgpSpec, X: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    if dgp.noise == "student_t":
        e = rng.standard_t(dgp.df, n) * math.sqrt((dgp.df - 2.0) / dgp.df)
    else:
        e = rng.standard_normal(n)
    return dgp.sigma_of(X) * e


def simulate(dgp: DgpSpec, n: int, stream: RandomStream) -> tuple[Dataset, np.ndarray]:
    """Draw n observations; returns the dataset and the noise vector."""
    rng = stream.generator()
    X = rng.random((n, dgp.dim))
    eps = draw_noise(dgp, X, rng)
    y = dgp.g(X) + eps
    return Dataset(X, y), eps
