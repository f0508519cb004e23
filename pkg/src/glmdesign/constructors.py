"""Closed-form locally optimal designs on standard regions.

Each constructor returns either bare weights for a fixed support or a
ConstructResult bundling the design with the case that fired and the signed
slack of that case's governing inequality.  Results with condition_ok=True
are certifiable through the equivalence theorem on the stated region; the
slack is reported so callers can trace decisions near case boundaries.
"""

from __future__ import annotations

import itertools
import math

from dataclasses import dataclass

import numpy as np

from .designs import BinaryHypercube, Design, Region, parse_criterion_order, region_points
from .errors import ConvergenceError
from .models import (
    FIRST_ORDER_INTERCEPT,
    FIRST_ORDER_NO_INTERCEPT,
    SINGLE_FACTOR_INTERCEPT,
    ModelSpec,
    intensity_many,
    regression_matrix,
)
from .optimize import OptimizerOptions, optimize_weights

# condition_ok is the margin staying above this signed slack
CONDITION_SLACK = -1e-12

# relative agreement demanded of the four-point stationarity certificate
FOURPOINT_CERT_RTOL = 1e-8

# relative symmetry tolerated by the four-point closed form
FOURPOINT_SYM_RTOL = 1e-9

D_CRITERION = "D"
A_CRITERION = "A"

_SQRT2 = math.sqrt(2.0)
_SQRT3 = math.sqrt(3.0)
_SQRT23 = math.sqrt(2.0 / 3.0)


@dataclass(frozen=True)
class ConstructResult:
    """A constructed design, the case that produced it, and its slack."""

    design: Design
    case_label: str
    condition_ok: bool
    condition_margin: float

    def to_dict(self) -> dict:
        return {
            "design": self.design.to_dict(),
            "case": self.case_label,
            "condition_ok": self.condition_ok,
            "condition_margin": self.condition_margin,
        }


def _result(design: Design, label: str, margin: float) -> ConstructResult:
    margin = float(margin)
    return ConstructResult(design, label, margin >= CONDITION_SLACK, margin)


def _criterion(value: str) -> str:
    crit = str(value).strip().upper()
    if crit not in (D_CRITERION, A_CRITERION):
        raise ValueError(f"criterion must be 'D' or 'A', got {value!r}")
    return crit


def _require_kind(spec: ModelSpec, names: tuple[str, ...], what: str) -> None:
    if spec.kind.name not in names:
        raise ValueError(f"{what} requires regression kind in {names}, got {spec.kind.name!r}")


# ---------------------------------------------------------------------------
# Weight-level closed forms


def saturated_weights(spec: ModelSpec, points, criterion: str) -> np.ndarray:
    """Optimal weights on exactly p spanning points.

    D: equal weights.  A: weights proportional to sqrt(c_ii / u_i) where
    c_ii are the diagonal entries of (F^-1)^T F^-1 for the p x p regression
    matrix F of the support.
    """
    crit = _criterion(criterion)
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    p = spec.p
    if pts.shape[0] != p:
        raise ValueError(f"saturated support needs exactly p={p} points, got {pts.shape[0]}")
    F = regression_matrix(spec, pts)
    sv = np.linalg.svd(F, compute_uv=False)
    if abs(float(np.prod(sv))) <= 1e-12 * float(sv[0]) ** p:
        raise ValueError("saturated support is numerically rank deficient")
    if crit == D_CRITERION:
        return np.full(p, 1.0 / p)
    u = intensity_many(spec, pts)
    Finv = np.linalg.inv(F)
    cdiag = (Finv * Finv).sum(axis=0)
    w = np.sqrt(cdiag / u)
    return w / w.sum()


def fourpoint_d_weights(spec: ModelSpec, points) -> np.ndarray:
    """D-optimal weights on four points of a three-parameter model.

    Requires the symmetric configuration in which the middle two points have
    equal intensity and equal squared complementary determinants; the outer
    two weights then have a closed form and the middle pair share one.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if spec.p != 3:
        raise ValueError("the four-point closed form needs a three-parameter model")
    if pts.shape[0] != 4:
        raise ValueError(f"expected exactly 4 points, got {pts.shape[0]}")
    F = regression_matrix(spec, pts)
    u = intensity_many(spec, pts)
    scale = float(np.linalg.svd(F, compute_uv=False)[0])
    d = np.empty(4)
    for i in range(4):
        d[i] = np.linalg.det(np.delete(F, i, axis=0))
    if (np.abs(d) <= 1e-12 * scale ** 3).any():
        raise ValueError("every three-point subset must span; a complementary determinant is zero")
    d2 = d * d
    if abs(u[1] - u[2]) > FOURPOINT_SYM_RTOL * max(u[1], u[2]):
        raise ValueError("four-point closed form requires matching middle intensities")
    if abs(d2[1] - d2[2]) > FOURPOINT_SYM_RTOL * max(d2[1], d2[2]):
        raise ValueError("four-point closed form requires matching middle determinants")

    # Stationarity of the support-restricted determinant.  In the reduced
    # coordinates a, b below the shared middle weight solves a quadratic; the
    # root written here is the one keeping all four weights in (0, 1), and
    # the rationalized form stays finite as a, b -> 1 (equal weights).
    a = (d2[1] / d2[0]) * (u[0] / u[1])
    b = (d2[1] / d2[3]) * (u[3] / u[1])
    disc = a * a + b * b + 14.0 * a * b + 16.0 * a * a * b * b - 8.0 * a * a * b - 8.0 * a * b * b
    w2 = 2.0 * a * b / (8.0 * a * b - 2.0 * a - 2.0 * b + math.sqrt(disc))
    half_diff = (a - b) * w2 / (4.0 * a * b)
    w1 = (1.0 - 2.0 * w2) / 2.0 + half_diff
    w4 = (1.0 - 2.0 * w2) / 2.0 - half_diff
    w = np.array([w1, w2, w2, w4])
    if (w <= 0.0).any() or (w >= 1.0).any():
        raise ValueError(
            "four-point closed form produced a weight outside (0, 1); "
            "the configuration does not admit a four-point optimum"
        )
    return w / float(w.sum())


def phik_axis_weights(spec: ModelSpec, a, k: float) -> np.ndarray:
    """Order-k optimal weights on the axis support {a_i e_i}.

    Proportional to (a_i^2 u_i)^(-k/(k+1)); equal at k = 0 and proportional
    to (a_i^2 u_i)^-1 in the k -> inf limit.
    """
    k = parse_criterion_order(k)
    _require_kind(spec, (FIRST_ORDER_NO_INTERCEPT,), "axis weighting")
    a = np.atleast_1d(np.asarray(a, dtype=float))
    if a.shape != (spec.nu,) or (a <= 0.0).any() or not np.isfinite(a).all():
        raise ValueError("axis scales must be a positive vector of length nu")
    pts = np.diag(a)
    u = intensity_many(spec, pts)
    expo = -1.0 if math.isinf(k) else -k / (k + 1.0)
    t = (a * a * u) ** expo
    return t / t.sum()


# ---------------------------------------------------------------------------
# Design-level constructions


def binary_two_point_design(spec: ModelSpec, a: float, b: float, criterion: str) -> Design:
    """Optimal two-point design on {a, b} for a single-factor model with intercept."""
    crit = _criterion(criterion)
    _require_kind(spec, (SINGLE_FACTOR_INTERCEPT,), "the two-point design")
    a = float(a)
    b = float(b)
    if a == b:
        raise ValueError("the two support points must differ")
    pts = np.array([[a], [b]])
    if crit == D_CRITERION:
        w = np.array([0.5, 0.5])
    else:
        u = intensity_many(spec, pts)
        wa = math.sqrt((1.0 + b * b) / u[0])
        wb = math.sqrt((1.0 + a * a) / u[1])
        w = np.array([wa, wb]) / (wa + wb)
    return Design.from_arrays(pts, w)


def _second_derivative_inverse_intensity(spec: ModelSpec, xs: np.ndarray) -> np.ndarray:
    """q''(x) for q(x) = 1 / u(x, beta) along a single factor."""
    if spec.family.d2_inverse_intensity is not None:
        beta1 = spec.beta[1]
        eta = spec.beta[0] + beta1 * xs
        return beta1 * beta1 * np.asarray(spec.family.d2_inverse_intensity(eta), dtype=float)
    h = 1e-4 * np.maximum(1.0, np.abs(xs))
    q = lambda t: 1.0 / intensity_many(spec, t[:, None])
    return (q(xs - h) - 2.0 * q(xs) + q(xs + h)) / (h * h)


def interval_boundary_design(
    spec: ModelSpec, criterion: str, grid_n: int = 999
) -> ConstructResult:
    """Two-point boundary design on the unit interval [0, 1].

    Valid while the stated convexity condition on q = 1/u holds across the
    interior, which is checked on a uniform grid of ``grid_n`` points.
    """
    crit = _criterion(criterion)
    _require_kind(spec, (SINGLE_FACTOR_INTERCEPT,), "the boundary design")
    if int(grid_n) != grid_n or grid_n < 2:
        raise ValueError("grid_n must be an integer >= 2")
    ends = np.array([[0.0], [1.0]])
    u = intensity_many(spec, ends)
    q0s, q1s = 1.0 / u[0], 1.0 / u[1]
    xs = np.linspace(0.0, 1.0, int(grid_n) + 2)[1:-1]
    qpp = _second_derivative_inverse_intensity(spec, xs)
    if crit == D_CRITERION:
        lhs = q0s + q1s
        w = np.array([0.5, 0.5])
        label = "D-boundary"
    else:
        q0, q1 = math.sqrt(q0s), math.sqrt(q1s)
        lhs = q0s + q1s + _SQRT2 * q0 * q1
        w = np.array([_SQRT2 * q0, q1])
        w = w / w.sum()
        label = "A-boundary"
    margin = float((lhs - qpp / 2.0).min())
    return _result(Design.from_arrays(ends, w), label, margin)


_CORNERS_2 = ((0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0))

# (dominant index, other three in fixed order, weight multipliers)
_A_CASES_2FACTOR = (
    (0, (1, 2, 3), (_SQRT2, _SQRT2, _SQRT3)),
    (1, (0, 2, 3), (_SQRT2, _SQRT2, 1.0)),
    (2, (0, 1, 3), (_SQRT2, _SQRT2, 1.0)),
    (3, (0, 1, 2), (_SQRT3, 1.0, 1.0)),
)


def _a_case_shortfall(q: np.ndarray, case: int) -> float:
    """Signed slack of one dominant-corner inequality (>= 0 means it holds)."""
    q1, q2, q3, q4 = q
    if case == 0:
        rhs = q2 * q2 + q3 * q3 + q4 * q4 + q2 * q3 + 2.0 * _SQRT23 * (q2 * q4 + q3 * q4)
        return q1 * q1 - rhs
    if case == 1:
        rhs = q1 * q1 + q3 * q3 + q4 * q4 + q1 * q3 + _SQRT2 * q3 * q4
        return q2 * q2 - rhs
    if case == 2:
        rhs = q1 * q1 + q2 * q2 + q4 * q4 + q1 * q2 + _SQRT2 * q2 * q4
        return q3 * q3 - rhs
    rhs = q1 * q1 + q2 * q2 + q3 * q3 + (2.0 / _SQRT3) * (q1 * q2 + q1 * q3)
    return q4 * q4 - rhs


def _polish_fourpoint_d(u: np.ndarray, w0: np.ndarray) -> np.ndarray:
    """Newton refinement of the four-point stationarity system.

    Solves u_i w_i (1/3 - w_i) = c together with sum(w) = 1, starting from an
    iterative estimate that selects the correct quadratic branches.
    """
    x = np.append(w0, u[0] * w0[0] * (1.0 / 3.0 - w0[0]))
    for _ in range(80):
        w, c = x[:4], x[4]
        res = np.append(u * w * (1.0 / 3.0 - w) - c, w.sum() - 1.0)
        if float(np.abs(res).max()) <= 1e-14 * max(1.0, abs(c)):
            break
        jac = np.zeros((5, 5))
        jac[:4, :4] = np.diag(u * (1.0 / 3.0 - 2.0 * w))
        jac[:4, 4] = -1.0
        jac[4, :4] = 1.0
        try:
            x = x - np.linalg.solve(jac, res)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError("four-point stationarity polish hit a singular step") from exc
    else:
        raise ConvergenceError("four-point stationarity polish did not converge")
    w = x[:4]
    if (w <= 0.0).any() or (w >= 1.0).any():
        raise ConvergenceError("four-point stationarity polish left the weight simplex")
    return w / w.sum()


def _certify_fourpoint(u: np.ndarray, w: np.ndarray) -> None:
    c = u * w * (1.0 / 3.0 - w)
    spread = float(c.max() - c.min())
    if spread > FOURPOINT_CERT_RTOL * float(np.abs(c).max()):
        raise ConvergenceError(
            f"four-point certificate failed: stationarity values spread {spread!r}"
        )


def two_factor_design(spec: ModelSpec, criterion: str) -> ConstructResult:
    """Optimal design on the corners of {0, 1}^2 for a two-factor model with
    intercept.

    D: either equal weights on the three highest-intensity corners (when the
    lowest corner is uninformative enough) or a four-point design whose
    weights satisfy the stationarity certificate u_i w_i (1/3 - w_i) = const.
    A: one of four dominant-corner three-point designs, falling back to
    numerically optimized four-point weights when no inequality holds.
    """
    crit = _criterion(criterion)
    _require_kind(spec, (FIRST_ORDER_INTERCEPT,), "the two-factor design")
    if spec.nu != 2:
        raise ValueError("the two-factor design needs exactly two factors")
    corners = np.asarray(_CORNERS_2)
    u = intensity_many(spec, corners)

    if crit == D_CRITERION:
        order = np.argsort(u, kind="stable")
        inv = 1.0 / u
        margin3 = float(inv[order[0]] - inv[order[1:]].sum())
        if margin3 >= 0.0:
            keep = np.sort(order[1:])
            design = Design.from_arrays(corners[keep], np.full(3, 1.0 / 3.0))
            return _result(design, "D-3pt", margin3)
        if abs(spec.beta[1] - spec.beta[2]) <= 1e-9 * max(1.0, abs(spec.beta[1]), abs(spec.beta[2])):
            w = fourpoint_d_weights(spec, corners)
        else:
            seed = optimize_weights(
                spec,
                corners,
                0.0,
                OptimizerOptions(convergence_tol=1e-12, max_iterations=200_000),
            ).weight_array
            w = _polish_fourpoint_d(u, seed)
        _certify_fourpoint(u, w)
        design = Design.from_arrays(corners, w)
        return _result(design, "D-4pt", -margin3)

    q = 1.0 / np.sqrt(u)
    shortfalls = [_a_case_shortfall(q, case) for case in range(4)]
    for case, (dom, others, mult) in enumerate(_A_CASES_2FACTOR):
        margin = shortfalls[case]
        if margin >= 0.0:
            w = np.asarray(mult) * q[list(others)]
            design = Design.from_arrays(corners[list(others)], w / w.sum())
            return _result(design, f"A-3pt-drop{dom + 1}", margin)
    design = optimize_weights(
        spec,
        corners,
        1.0,
        OptimizerOptions(convergence_tol=1e-12, max_iterations=200_000),
    )
    # governing condition: no dominant-corner inequality holds
    margin = float(-max(shortfalls))
    return _result(design, "A-4pt-numeric", margin)


def corner_design_multifactor(spec: ModelSpec, criterion: str) -> ConstructResult:
    """Origin-plus-axes design on {0, 1}^nu for a first-order model with
    intercept, checked against its corner-wise optimality condition."""
    crit = _criterion(criterion)
    _require_kind(spec, (FIRST_ORDER_INTERCEPT,), "the corner design")
    nu = spec.nu
    if nu < 2:
        raise ValueError("the corner design needs at least two factors")
    support = np.vstack([np.zeros(nu), np.eye(nu)])
    u_sup = intensity_many(spec, support)
    corners = np.asarray(list(itertools.product((0.0, 1.0), repeat=nu)))
    u_cor = intensity_many(spec, corners)
    s = corners.sum(axis=1)

    if crit == D_CRITERION:
        lhs = (1.0 - s) ** 2 / u_sup[0] + corners @ (1.0 / u_sup[1:])
        w = np.full(nu + 1, 1.0 / (nu + 1.0))
        label = "D-corner"
    else:
        qs = 1.0 / np.sqrt(u_sup)
        w = np.concatenate(([math.sqrt(nu + 1.0) * qs[0]], qs[1:]))
        w = w / w.sum()
        lhs = (
            qs[0] ** 2 * (1.0 - s) ** 2
            + corners @ (qs[1:] ** 2)
            + (2.0 * qs[0] / math.sqrt(nu + 1.0)) * (s - 1.0) * (corners @ qs[1:])
        )
        label = "A-corner"
    margin = float((1.0 / u_cor - lhs).min())
    return _result(Design.from_arrays(support, w), label, margin)


def axis_design(
    spec: ModelSpec, a, k: float, region: Region | None = None
) -> ConstructResult:
    """Order-k optimal design on the axis support {a_i e_i} for models
    without intercept.

    Fast paths: the inverse-link gamma model is optimal for every positive
    parameter (weights proportional to beta_i^(2k/(k+1)), independent of the
    scales a); the log-link Poisson model on the binary hypercube with unit
    scales reduces to a two-smallest-rates test.  Otherwise the pointwise
    condition is scanned over the supplied finite region.
    """
    k = parse_criterion_order(k)
    _require_kind(spec, (FIRST_ORDER_NO_INTERCEPT,), "the axis design")
    a = np.atleast_1d(np.asarray(a, dtype=float))
    if a.shape != (spec.nu,) or (a <= 0.0).any() or not np.isfinite(a).all():
        raise ValueError("axis scales must be a positive vector of length nu")
    pts = np.diag(a)

    if spec.family.name == "gamma_inverse":
        beta = np.asarray(spec.beta)
        expo = 2.0 if math.isinf(k) else 2.0 * k / (k + 1.0)
        w = beta ** expo
        design = Design.from_arrays(pts, w / w.sum())
        return _result(design, "axis-gamma", 0.0)

    w = phik_axis_weights(spec, a, k)
    design = Design.from_arrays(pts, w)

    if (
        spec.family.name == "poisson_log"
        and bool((a == 1.0).all())
        and (region is None or (isinstance(region, BinaryHypercube) and region.nu == spec.nu))
    ):
        rates = np.sort(np.exp(np.asarray(spec.beta)))
        margin = 1.0 - float(rates[0] + rates[1])
        return _result(design, "axis-poisson", margin)

    if region is None:
        raise ValueError("the general axis condition needs a finite region to scan")
    cand = region_points(region)
    if cand.shape[1] != spec.nu:
        raise ValueError("region dimension does not match the model")
    u_sup = intensity_many(spec, pts)
    u_cand = intensity_many(spec, cand)
    lhs = u_cand * ((cand * cand) @ (1.0 / (a * a * u_sup)))
    margin = float((1.0 - lhs).min())
    return _result(design, "axis-general", margin)


def hypercube_linear_design(nu: int, criterion: str) -> Design:
    """Equal-weight middle-layer designs on {0, 1}^nu for the homoscedastic
    linear model without intercept.

    Odd nu = 2q+1: the layer with q+1 ones (both D and A).  Even nu = 2q:
    the two layers with q and q+1 ones for D, the single layer with q ones
    for A.  The A rule is the stated one; it is not optimal at nu = 2 (see
    the acceptance suite), which is recorded as a known defect.
    """
    crit = _criterion(criterion)
    if int(nu) != nu or nu < 2:
        raise ValueError("the hypercube layer design needs an integer nu >= 2")
    nu = int(nu)
    q, odd = divmod(nu, 2)
    if odd:
        layers = {q + 1}
    else:
        layers = {q, q + 1} if crit == D_CRITERION else {q}
    corners = [
        pt for pt in itertools.product((0.0, 1.0), repeat=nu) if int(sum(pt)) in layers
    ]
    n = len(corners)
    return Design.from_arrays(np.asarray(corners), np.full(n, 1.0 / n))
