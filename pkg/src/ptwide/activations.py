"""Activation functions with their Lipschitz constants and active regions.

Each activation carries an open interval on which |sigma'| is bounded
below by ``k_deriv``. Half-infinite regions (relu, linear) are replaced
by a finite surrogate, which is what the active-fraction diagnostics use;
the surrogate is recorded in every report.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvalidConfigError


@dataclass(frozen=True)
class ActivationSpec:
    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    deriv: Callable[[np.ndarray], np.ndarray]
    lipschitz: float
    active_region: tuple[float, float]  # finite surrogate where needed
    k_deriv: float

    def __post_init__(self):
        lo, hi = self.active_region
        if not lo < hi:
            raise InvalidConfigError(f"active region must satisfy I_l < I_r, got {self.active_region}")


def _relu(u):
    return np.maximum(u, 0.0)


def _relu_deriv(u):
    # Derivative taken as 0 at the kink.
    return (np.asarray(u) > 0).astype(np.float64)


def _tanh_deriv(u):
    t = np.tanh(u)
    return 1.0 - t * t


def _linear(u):
    return np.asarray(u, dtype=np.float64) + 0.0


def _ones_like(u):
    return np.ones_like(np.asarray(u, dtype=np.float64))


TANH = ActivationSpec(
    name="tanh",
    fn=np.tanh,
    deriv=_tanh_deriv,
    lipschitz=1.0,
    active_region=(-1.0, 1.0),
    k_deriv=1.0 - np.tanh(1.0) ** 2,  # ~0.419974
)

RELU = ActivationSpec(
    name="relu",
    fn=_relu,
    deriv=_relu_deriv,
    lipschitz=1.0,
    active_region=(0.0, 3.0),  # finite surrogate of (0, inf)
    k_deriv=1.0,
)

LINEAR = ActivationSpec(
    name="linear",
    fn=_linear,
    deriv=_ones_like,
    lipschitz=1.0,
    active_region=(-3.0, 3.0),  # finite surrogate of the whole line
    k_deriv=1.0,
)


def leaky_relu(slope: float) -> ActivationSpec:
    """Leaky ReLU with the given negative-side slope in (0, 1]."""
    if not 0 < slope <= 1:
        raise InvalidConfigError(f"leaky_relu slope must be in (0, 1], got {slope}")

    def fn(u):
        u = np.asarray(u, dtype=np.float64)
        return np.where(u > 0, u, slope * u)

    def deriv(u):
        u = np.asarray(u, dtype=np.float64)
        return np.where(u > 0, 1.0, np.where(u < 0, slope, 0.0))

    return ActivationSpec(
        name=f"leaky_relu({slope})",
        fn=fn,
        deriv=deriv,
        lipschitz=1.0,
        active_region=(-3.0, 3.0),
        k_deriv=slope,
    )


_BY_NAME = {"tanh": TANH, "relu": RELU, "linear": LINEAR}


def get_activation(name: str) -> ActivationSpec:
    if name.startswith("leaky_relu(") and name.endswith(")"):
        return leaky_relu(float(name[len("leaky_relu("):-1]))
    try:
        return _BY_NAME[name]
    except KeyError:
        raise InvalidConfigError(f"unknown activation {name!r}") from None
