"""Model families, regression structures, and pointwise information.

A model is the pair of a link/response family and a first-order regression
structure, together with a fixed parameter vector at which the design problem
is localized.  The family enters the design problem only through its
intensity: the scalar weight ``u(x, beta)`` multiplying the outer product of
the regression vector in the Fisher information of a single observation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import ndtr

from .errors import DomainError

_SQRT_2PI = math.sqrt(2.0 * math.pi)

# Linear predictors with probabilities this far into a tail are treated as
# numerically degenerate rather than allowed to divide by zero.
PROBIT_TAIL_FLOOR = 1e-300


@dataclass(frozen=True)
class LinkFamily:
    """Intensity rule of a one-parameter exponential-family response.

    Attributes:
        name: stable identifier used by the CLI and in reprs.
        intensity_of_eta: vectorized map from linear predictor values to the
            intensity u; must accept and return numpy arrays.
        eta_in_domain: optional vectorized predicate marking admissible
            linear predictor values; None means the whole real line.
        d2_inverse_intensity: optional analytic second derivative of
            1/u with respect to the linear predictor, used by the
            interval-boundary construction; None falls back to central
            differences.
    """

    name: str
    intensity_of_eta: Callable
    eta_in_domain: Callable | None = None
    d2_inverse_intensity: Callable | None = None

    def __repr__(self) -> str:
        return f"LinkFamily({self.name!r})"


def _logistic_u(eta):
    # sigma(eta) * (1 - sigma(eta)), computed from exp(-|eta|) so large
    # predictors underflow gracefully instead of overflowing.
    a = np.abs(np.asarray(eta, dtype=float))
    e = np.exp(-a)
    return e / (1.0 + e) ** 2


def _probit_u(eta):
    eta = np.asarray(eta, dtype=float)
    pdf = np.exp(-0.5 * eta * eta) / _SQRT_2PI
    cdf = ndtr(eta)
    denom = np.maximum(cdf * (1.0 - cdf), PROBIT_TAIL_FLOOR)
    return pdf * pdf / denom


def _poisson_u(eta):
    return np.exp(np.asarray(eta, dtype=float))


def _gamma_u(eta):
    eta = np.asarray(eta, dtype=float)
    with np.errstate(divide="ignore"):
        return eta ** -2.0


def _linear_u(eta):
    return np.ones_like(np.asarray(eta, dtype=float))


logistic = LinkFamily(
    "logistic",
    _logistic_u,
    d2_inverse_intensity=lambda eta: np.exp(eta) + np.exp(-eta),
)

probit = LinkFamily("probit", _probit_u)

poisson_log = LinkFamily(
    "poisson_log",
    _poisson_u,
    d2_inverse_intensity=lambda eta: np.exp(-np.asarray(eta, dtype=float)),
)

gamma_inverse = LinkFamily(
    "gamma_inverse",
    _gamma_u,
    eta_in_domain=lambda eta: np.asarray(eta, dtype=float) > 0.0,
    d2_inverse_intensity=lambda eta: np.full_like(np.asarray(eta, dtype=float), 2.0),
)

linear_identity = LinkFamily(
    "linear_identity",
    _linear_u,
    d2_inverse_intensity=lambda eta: np.zeros_like(np.asarray(eta, dtype=float)),
)

BUILTIN_FAMILIES: dict[str, LinkFamily] = {
    f.name: f for f in (logistic, probit, poisson_log, gamma_inverse, linear_identity)
}


def custom_family(name, intensity, domain=None, d2_inverse_intensity=None):
    """Wrap scalar callables into a LinkFamily usable by every operation.

    ``intensity`` and the optional predicates take a single float; they are
    vectorized here so batch evaluation works uniformly.
    """
    u_vec = np.vectorize(intensity, otypes=[float])
    dom_vec = None if domain is None else np.vectorize(domain, otypes=[bool])
    d2_vec = (
        None
        if d2_inverse_intensity is None
        else np.vectorize(d2_inverse_intensity, otypes=[float])
    )
    return LinkFamily(name, u_vec, dom_vec, d2_vec)


SINGLE_FACTOR_INTERCEPT = "single_factor_intercept"
FIRST_ORDER_INTERCEPT = "first_order_intercept"
FIRST_ORDER_NO_INTERCEPT = "first_order_no_intercept"

_KIND_NAMES = (
    SINGLE_FACTOR_INTERCEPT,
    FIRST_ORDER_INTERCEPT,
    FIRST_ORDER_NO_INTERCEPT,
)


@dataclass(frozen=True)
class RegressionKind:
    """First-order regression structure: f(x) = (1, x) or f(x) = x."""

    name: str
    nu: int

    def __post_init__(self) -> None:
        if self.name not in _KIND_NAMES:
            raise ValueError(f"unknown regression kind {self.name!r}")
        if int(self.nu) != self.nu or self.nu < 1:
            raise ValueError("number of factors must be a positive integer")
        object.__setattr__(self, "nu", int(self.nu))
        if self.name == SINGLE_FACTOR_INTERCEPT and self.nu != 1:
            raise ValueError("single_factor_intercept requires exactly one factor")

    @property
    def intercept(self) -> bool:
        return self.name != FIRST_ORDER_NO_INTERCEPT

    @property
    def p(self) -> int:
        """Number of regression coefficients."""
        return self.nu + (1 if self.intercept else 0)


def single_factor_intercept() -> RegressionKind:
    return RegressionKind(SINGLE_FACTOR_INTERCEPT, 1)


def first_order_intercept(nu: int) -> RegressionKind:
    return RegressionKind(FIRST_ORDER_INTERCEPT, nu)


def first_order_no_intercept(nu: int) -> RegressionKind:
    return RegressionKind(FIRST_ORDER_NO_INTERCEPT, nu)


@dataclass(frozen=True)
class ModelSpec:
    """A family, a regression structure, and the localizing parameter vector."""

    family: LinkFamily
    kind: RegressionKind
    beta: tuple[float, ...]

    def __post_init__(self) -> None:
        beta = tuple(float(b) for b in np.atleast_1d(np.asarray(self.beta, dtype=float)))
        object.__setattr__(self, "beta", beta)
        if len(beta) != self.kind.p:
            raise ValueError(
                f"beta has length {len(beta)}, expected {self.kind.p} for kind "
                f"{self.kind.name!r} with {self.kind.nu} factor(s)"
            )
        if not all(math.isfinite(b) for b in beta):
            raise ValueError("beta must be finite")
        if self.family.name == "gamma_inverse" and not self.kind.intercept:
            if any(b <= 0.0 for b in beta):
                raise DomainError(
                    "gamma_inverse without intercept requires strictly positive beta"
                )

    @property
    def p(self) -> int:
        return self.kind.p

    @property
    def nu(self) -> int:
        return self.kind.nu


def _as_point(spec: ModelSpec, x) -> np.ndarray:
    pt = np.atleast_1d(np.asarray(x, dtype=float))
    if pt.ndim != 1 or pt.shape[0] != spec.nu:
        raise ValueError(
            f"design point has dimension {pt.shape}, expected ({spec.nu},)"
        )
    return pt


def _as_points(spec: ModelSpec, X) -> np.ndarray:
    pts = np.asarray(X, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None] if spec.nu == 1 else pts[None, :]
    if pts.ndim != 2 or pts.shape[1] != spec.nu:
        raise ValueError(
            f"points array has shape {pts.shape}, expected (n, {spec.nu})"
        )
    return pts


def regression_vector(spec: ModelSpec, x) -> np.ndarray:
    """The regression vector f(x), including the leading 1 when present."""
    pt = _as_point(spec, x)
    if spec.kind.intercept:
        return np.concatenate(([1.0], pt))
    return pt.copy()


def regression_matrix(spec: ModelSpec, X) -> np.ndarray:
    """Rows f(x) for each point of ``X`` (shape (n, p))."""
    pts = _as_points(spec, X)
    if spec.kind.intercept:
        return np.hstack([np.ones((pts.shape[0], 1)), pts])
    return pts.copy()


def linear_predictor(spec: ModelSpec, x) -> float:
    return float(regression_vector(spec, x) @ np.asarray(spec.beta))


def _eta_many(spec: ModelSpec, pts: np.ndarray) -> np.ndarray:
    beta = np.asarray(spec.beta)
    if spec.kind.intercept:
        return beta[0] + pts @ beta[1:]
    return pts @ beta


def intensity_many(spec: ModelSpec, X) -> np.ndarray:
    """Vectorized intensity with full domain checking."""
    pts = _as_points(spec, X)
    eta = _eta_many(spec, pts)
    if spec.family.eta_in_domain is not None:
        ok = np.asarray(spec.family.eta_in_domain(eta), dtype=bool)
        if not ok.all():
            bad = pts[np.argmin(ok)]
            raise DomainError(
                f"point {tuple(float(v) for v in bad)} has linear predictor "
                f"outside the domain of family {spec.family.name!r}"
            )
    u = np.asarray(spec.family.intensity_of_eta(eta), dtype=float)
    good = np.isfinite(u) & (u > 0.0)
    if not good.all():
        bad = pts[np.argmin(good)]
        raise DomainError(
            f"intensity of family {spec.family.name!r} is not finite and positive "
            f"at point {tuple(bad)}"
        )
    return u


def intensity(spec: ModelSpec, x) -> float:
    """The information weight u(x, beta) of one observation at x."""
    return float(intensity_many(spec, _as_point(spec, x)[None, :])[0])


def unit_information(spec: ModelSpec, x) -> np.ndarray:
    """Fisher information of a single observation: u(x, beta) f(x) f(x)^T."""
    f = regression_vector(spec, x)
    return intensity(spec, x) * np.outer(f, f)
