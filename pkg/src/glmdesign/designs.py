"""Approximate designs, design regions, and the Kiefer criterion family.

An approximate design is a finitely supported probability measure on the
design region.  All criteria are written so that smaller is better; the
D criterion is the k -> 0 limit and the E criterion the k -> infinity limit
of the family ((1/p) trace M^-k)^(1/k).
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import SingularMatrixError
from .models import ModelSpec, intensity_many, regression_matrix

# Two coordinates are the same point when they agree after rounding to this
# many significant digits.
CANONICAL_DIGITS = 12

# Weight vectors must sum to one within this absolute slack.
WEIGHT_SUM_TOL = 1e-12

# An eigenvalue at or below this multiple of the largest one marks the
# matrix as singular.
SINGULARITY_RATIO = 1e-10

# Relative asymmetry above this rejects a matrix as non-symmetric.
SYMMETRY_RTOL = 1e-10


def canonical_point(x) -> tuple[float, ...]:
    """Round each coordinate to 12 significant digits; the identity key for points."""
    pt = np.atleast_1d(np.asarray(x, dtype=float))
    return tuple(float(f"{c:.{CANONICAL_DIGITS}g}") for c in pt)


def parse_criterion_order(value) -> float:
    """Accept a nonnegative real or the string 'inf' and return the order k."""
    if isinstance(value, str):
        if value.strip().lower() in {"inf", "infinity"}:
            return math.inf
        value = float(value)
    k = float(value)
    if math.isnan(k) or k < 0.0:
        raise ValueError("criterion order k must be a real number in [0, inf]")
    return k


@dataclass(frozen=True)
class Design:
    """A finitely supported probability measure: points and matching weights."""

    points: tuple[tuple[float, ...], ...]
    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ValueError("a design needs at least one point of fixed dimension")
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (pts.shape[0],):
            raise ValueError("weights must align one-to-one with points")
        if not np.isfinite(pts).all() or not np.isfinite(w).all():
            raise ValueError("design points and weights must be finite")
        if (w <= 0.0).any():
            raise ValueError("design weights must be strictly positive")
        if abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(
                f"design weights sum to {float(w.sum())!r}, outside 1 +/- {WEIGHT_SUM_TOL}"
            )
        keys = [canonical_point(p) for p in pts]
        if len(set(keys)) != len(keys):
            raise ValueError("design points must be pairwise distinct")
        object.__setattr__(self, "points", tuple(tuple(float(c) for c in p) for p in pts))
        object.__setattr__(self, "weights", tuple(float(v) for v in w))

    @classmethod
    def from_arrays(cls, points, weights) -> "Design":
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        return cls(tuple(map(tuple, pts)), tuple(np.asarray(weights, dtype=float)))

    @property
    def point_array(self) -> np.ndarray:
        return np.asarray(self.points, dtype=float)

    @property
    def weight_array(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=float)

    @property
    def nu(self) -> int:
        return len(self.points[0])

    @property
    def size(self) -> int:
        return len(self.points)

    def to_dict(self) -> dict:
        return {
            "points": [list(p) for p in self.points],
            "weights": list(self.weights),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Design":
        if not isinstance(doc, dict) or set(doc) != {"points", "weights"}:
            raise ValueError("design document must have exactly 'points' and 'weights'")
        return cls.from_arrays(doc["points"], doc["weights"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "Design":
        return cls.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# Design regions


@dataclass(frozen=True)
class FiniteSet:
    """An explicit finite list of candidate points."""

    points: tuple[tuple[float, ...], ...]

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ValueError("finite_set needs at least one point")
        if not np.isfinite(pts).all():
            raise ValueError("finite_set points must be finite")
        object.__setattr__(self, "points", tuple(map(tuple, pts)))

    @property
    def nu(self) -> int:
        return len(self.points[0])

    def candidate_points(self) -> np.ndarray:
        return _lexsorted(np.asarray(self.points, dtype=float))


@dataclass(frozen=True)
class BinaryHypercube:
    """All 2^nu corners of {0, 1}^nu."""

    nu: int

    def __post_init__(self) -> None:
        if int(self.nu) != self.nu or self.nu < 1:
            raise ValueError("binary_hypercube needs a positive integer dimension")
        object.__setattr__(self, "nu", int(self.nu))

    def candidate_points(self) -> np.ndarray:
        corners = list(itertools.product((0.0, 1.0), repeat=self.nu))
        return np.asarray(corners, dtype=float)


@dataclass(frozen=True)
class GridBox:
    """A per-axis uniform grid over a box, endpoints included."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    resolution: tuple[int, ...]

    def __post_init__(self) -> None:
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        res = np.atleast_1d(np.asarray(self.resolution))
        if not (lo.shape == hi.shape == res.shape) or lo.ndim != 1:
            raise ValueError("grid_box lower/upper/resolution must have equal length")
        if not (np.isfinite(lo).all() and np.isfinite(hi).all()):
            raise ValueError("grid_box bounds must be finite")
        if (hi <= lo).any():
            raise ValueError("grid_box requires lower < upper on every axis")
        if (res.astype(int) != res).any() or (res.astype(int) < 2).any():
            raise ValueError("grid_box needs an integer resolution >= 2 per axis")
        object.__setattr__(self, "lower", tuple(float(v) for v in lo))
        object.__setattr__(self, "upper", tuple(float(v) for v in hi))
        object.__setattr__(self, "resolution", tuple(int(v) for v in res))

    @property
    def nu(self) -> int:
        return len(self.lower)

    def candidate_points(self) -> np.ndarray:
        axes = [
            np.linspace(lo, hi, n)
            for lo, hi, n in zip(self.lower, self.upper, self.resolution)
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)


@dataclass(frozen=True)
class AxisSet:
    """The nu points a_i e_i, one on each coordinate axis."""

    a: tuple[float, ...]

    def __post_init__(self) -> None:
        a = np.atleast_1d(np.asarray(self.a, dtype=float))
        if a.ndim != 1 or a.shape[0] < 1:
            raise ValueError("axis_set needs at least one scale")
        if not np.isfinite(a).all() or (a <= 0.0).any():
            raise ValueError("axis_set scales must be finite and strictly positive")
        object.__setattr__(self, "a", tuple(float(v) for v in a))

    @property
    def nu(self) -> int:
        return len(self.a)

    def candidate_points(self) -> np.ndarray:
        return _lexsorted(np.diag(np.asarray(self.a, dtype=float)))


Region = FiniteSet | BinaryHypercube | GridBox | AxisSet


def _lexsorted(pts: np.ndarray) -> np.ndarray:
    order = np.lexsort(pts.T[::-1])
    return pts[order]


def region_points(region: Region) -> np.ndarray:
    """Candidate points of a region in lexicographic coordinate order."""
    return region.candidate_points()


def region_label(region: Region) -> str:
    if isinstance(region, FiniteSet):
        return f"finite_set({len(region.points)} points)"
    if isinstance(region, BinaryHypercube):
        return f"binary_hypercube(nu={region.nu})"
    if isinstance(region, GridBox):
        return (
            f"grid_box(lower={list(region.lower)}, upper={list(region.upper)}, "
            f"resolution={list(region.resolution)})"
        )
    if isinstance(region, AxisSet):
        return f"axis_set(a={list(region.a)})"
    raise TypeError(f"not a region: {region!r}")


def region_from_dict(doc: dict) -> Region:
    """Build a region from its JSON descriptor."""
    if not isinstance(doc, dict) or "type" not in doc:
        raise ValueError("region descriptor must be an object with a 'type' field")
    kind = doc["type"]
    fields = {k: v for k, v in doc.items() if k != "type"}
    try:
        if kind == "finite_set":
            pts = np.asarray(fields.pop("points"), dtype=float)
            if pts.ndim == 1:
                pts = pts[:, None]
            reg = FiniteSet(tuple(map(tuple, pts)))
        elif kind == "binary_hypercube":
            reg = BinaryHypercube(fields.pop("nu"))
        elif kind == "grid_box":
            reg = GridBox(
                tuple(fields.pop("lower")),
                tuple(fields.pop("upper")),
                tuple(fields.pop("resolution")),
            )
        elif kind == "axis_set":
            reg = AxisSet(tuple(fields.pop("a")))
        else:
            raise ValueError(f"unknown region type {kind!r}")
    except KeyError as exc:
        raise ValueError(f"region {kind!r} is missing field {exc.args[0]!r}") from None
    if fields:
        raise ValueError(f"region {kind!r} has unexpected fields {sorted(fields)}")
    return reg


def region_to_dict(region: Region) -> dict:
    if isinstance(region, FiniteSet):
        return {"type": "finite_set", "points": [list(p) for p in region.points]}
    if isinstance(region, BinaryHypercube):
        return {"type": "binary_hypercube", "nu": region.nu}
    if isinstance(region, GridBox):
        return {
            "type": "grid_box",
            "lower": list(region.lower),
            "upper": list(region.upper),
            "resolution": list(region.resolution),
        }
    if isinstance(region, AxisSet):
        return {"type": "axis_set", "a": list(region.a)}
    raise TypeError(f"not a region: {region!r}")


# ---------------------------------------------------------------------------
# Information matrices and criteria


def weighted_information(spec: ModelSpec, points, weights) -> np.ndarray:
    """Sum of w_i u_i f(x_i) f(x_i)^T without any normalization of w.

    Positively homogeneous of degree one in the weights; ``information_matrix``
    is this accumulator applied to a Design's probability weights.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    w = np.asarray(weights, dtype=float)
    F = regression_matrix(spec, pts)
    u = intensity_many(spec, pts)
    G = F * np.sqrt(u * w)[:, None]
    M = G.T @ G
    return (M + M.T) / 2.0


def information_matrix(design: Design, spec: ModelSpec) -> np.ndarray:
    """The p x p information matrix of a design at the localizing parameter."""
    return weighted_information(spec, design.point_array, design.weight_array)


def _check_symmetric(M: np.ndarray) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("expected a square matrix")
    scale = max(1.0, float(np.abs(M).max()))
    if float(np.abs(M - M.T).max()) > SYMMETRY_RTOL * scale:
        raise ValueError("matrix is not symmetric within tolerance")
    return M


def _eigvals_checked(M: np.ndarray) -> np.ndarray:
    lam = np.linalg.eigvalsh(_check_symmetric(M))
    if lam[-1] <= 0.0 or lam[0] <= SINGULARITY_RATIO * lam[-1]:
        raise SingularMatrixError(
            f"information matrix is singular (eigenvalue range {float(lam[0])!r} to {float(lam[-1])!r})"
        )
    return lam


def min_eigenvalue(M) -> float:
    """Smallest eigenvalue of a symmetric matrix (no singularity gate)."""
    lam = np.linalg.eigvalsh(_check_symmetric(M))
    return float(lam[0])


def _phi_from_eigenvalues(lam: np.ndarray, k: float) -> float:
    """Criterion value from the (ascending, positive) eigenvalues of M."""
    p = lam.shape[0]
    if k == 0.0:
        return float(math.exp(-np.log(lam).mean()))
    if math.isinf(k):
        return float(1.0 / lam[0])
    ratios = lam[0] / lam  # in (0, 1]
    s = float((ratios ** k).sum())
    return float(math.exp(math.log(s / p) / k) / lam[0])


def phi_k_of_matrix(M, k: float) -> float:
    """The order-k criterion of an information matrix; smaller is better.

    k = 0 gives the determinant-based value, k = inf the reciprocal of the
    smallest eigenvalue, and 0 < k < inf the power mean
    ((1/p) trace M^-k)^(1/k).  Large k is evaluated in log space so that it
    approaches the k = inf limit without overflow.
    """
    k = parse_criterion_order(k)
    lam = _eigvals_checked(M)
    return _phi_from_eigenvalues(lam, k)


def phi_k_value(design: Design, spec: ModelSpec, k: float) -> float:
    return phi_k_of_matrix(information_matrix(design, spec), k)


def a_value(design: Design, spec: ModelSpec) -> float:
    """The classical A value trace(M^-1); equals p times the order-1 criterion."""
    lam = _eigvals_checked(information_matrix(design, spec))
    return float((1.0 / lam).sum())
