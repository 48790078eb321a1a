"""Square-root lattices, SL(2,R) deformations, and sampling-density thresholds."""
from __future__ import annotations

from dataclasses import dataclass, field
from math import cos, e, pi, sin, sqrt
from typing import Optional, Sequence

import numpy as np

from .windows import GrowthEnvelope

__all__ = [
    "SqrtLattice",
    "PointSet",
    "SL2Mat",
    "ThresholdReport",
    "sqrt_set",
    "generate",
    "rotation",
    "shear",
    "rect_thresholds",
    "sl2_threshold",
    "shear_admissible_root",
    "als_preset",
    "GAUSSIAN_ALPHA",
]

DET_TOL = 1e-12
SL2_TOL = 1e-10
# largest admissible spacing for the standard Gaussian window, 1/sqrt(2 pi e)
GAUSSIAN_ALPHA = 1.0 / sqrt(2 * pi * e)


def sqrt_set(n_max: int) -> np.ndarray:
    """Sorted ``{+-sqrt(n) : 0 <= n <= n_max}`` with zero listed once."""
    if n_max < 0:
        raise ValueError("n_max must be non-negative")
    pos = np.sqrt(np.arange(1, n_max + 1, dtype=float))
    return np.concatenate([-pos[::-1], [0.0], pos])


def _signed_indices(n_max: int) -> np.ndarray:
    # signed index k <-> sign(k) * sqrt(|k|)
    return np.arange(-n_max, n_max + 1)


@dataclass(frozen=True)
class PointSet:
    """Finite set of points in R^m with their generating indices.

    ``indices[i, j] = (n, s)`` records that coordinate ``j`` of the underlying
    lattice vector is ``s * sqrt(n)``.  ``n = -1`` marks points that were
    added explicitly rather than generated.
    """

    points: np.ndarray
    indices: Optional[np.ndarray] = None
    matrix: Optional[np.ndarray] = None
    label: str = ""

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        object.__setattr__(self, "points", pts)
        if self.indices is not None:
            idx = np.asarray(self.indices, dtype=np.int64).reshape(len(pts), pts.shape[1], 2)
            object.__setattr__(self, "indices", idx)

    def __len__(self):
        return len(self.points)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def replay(self) -> np.ndarray:
        """Recompute each point from its recorded indices (``A @ z``)."""
        if self.indices is None or self.matrix is None:
            raise ValueError("point set carries no generating data")
        z = self.indices[..., 1] * np.sqrt(np.abs(self.indices[..., 0]))
        return z @ np.asarray(self.matrix).T


@dataclass(frozen=True)
class SqrtLattice:
    """Truncation ``{A z : z in (sqrt Z)^m, ||A z|| <= radius}``."""

    A: np.ndarray
    radius: float

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        if A.shape[0] != A.shape[1]:
            raise ValueError("generating matrix must be square")
        if abs(np.linalg.det(A)) <= DET_TOL:
            raise ValueError("generating matrix is singular")
        if self.radius < 0:
            raise ValueError("radius must be non-negative")
        object.__setattr__(self, "A", A)

    @property
    def m(self) -> int:
        return self.A.shape[0]

    def index_bound(self) -> int:
        inv_norm = np.linalg.norm(np.linalg.inv(self.A), 2)
        return int(np.ceil((inv_norm * self.radius) ** 2))


def generate(lat: SqrtLattice) -> PointSet:
    """Enumerate the truncated square-root lattice.

    Points are ordered lexicographically in the signed index vectors
    ``(s_1 n_1, ..., s_m n_m)``.
    """
    n_max = lat.index_bound()
    ks = _signed_indices(n_max)
    m = lat.m
    grids = np.meshgrid(*([ks] * m), indexing="ij")
    k = np.stack([g.ravel() for g in grids], axis=1)
    z = np.sign(k) * np.sqrt(np.abs(k))
    pts = z @ lat.A.T
    # squared-norm comparison with a relative slack so boundary points survive roundoff
    r2 = lat.radius * lat.radius
    keep = np.einsum("ij,ij->i", pts, pts) <= r2 * (1 + 1e-12)
    k = k[keep]
    idx = np.stack([np.abs(k), np.sign(k)], axis=-1)
    return PointSet(pts[keep], idx, lat.A, label="sqrt-lattice")


@dataclass(frozen=True)
class SL2Mat:
    """Real 2x2 matrix ``[[a, b], [c, d]]`` with unit determinant."""

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        det = self.a * self.d - self.b * self.c
        if abs(det - 1.0) > SL2_TOL:
            raise ValueError(f"determinant {det!r} differs from 1")

    @property
    def p(self) -> float:
        return 1.0 / (self.a ** 2 + self.b ** 2)

    @property
    def q(self) -> float:
        return abs(self.a * self.c + self.b * self.d)

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]])

    @classmethod
    def from_matrix(cls, M) -> "SL2Mat":
        M = np.asarray(M, dtype=float)
        return cls(M[0, 0], M[0, 1], M[1, 0], M[1, 1])


def rotation(theta: float) -> SL2Mat:
    return SL2Mat(cos(theta), -sin(theta), sin(theta), cos(theta))


def shear(sigma: float) -> SL2Mat:
    """Shear parallel to the x-axis, ``[[1, sigma], [0, 1]]``."""
    return SL2Mat(1.0, sigma, 0.0, 1.0)


@dataclass(frozen=True)
class ThresholdReport:
    """Spacing bounds in the time (``tau_max``) and frequency (``nu_max``) directions.

    For the SL(2) rules the lattice is ``alpha S (sqrt Z)^2`` with a single
    spacing, so the binding bound is ``alpha_max = min(tau_max + nu_max)``.
    """

    tau_max: tuple
    nu_max: tuple
    admissible: bool
    rule: str
    reason: Optional[str] = None
    requested: Optional[tuple] = None
    extras: dict = field(default_factory=dict)

    @property
    def alpha_max(self) -> float:
        if not self.tau_max:
            return 0.0
        return float(min(self.tau_max + self.nu_max))

    def to_dict(self) -> dict:
        d = {
            "rule": self.rule,
            "tau_max": list(self.tau_max),
            "nu_max": list(self.nu_max),
            "alpha_max": self.alpha_max,
            "admissible": self.admissible,
        }
        if self.requested is not None:
            d["requested"] = list(self.requested)
        if self.reason:
            d["reason"] = self.reason
        d.update(self.extras)
        return d


def _admissible(tau_max, nu_max, spacing) -> bool:
    if spacing is None:
        return True
    tau, nu = spacing
    tau = np.broadcast_to(np.asarray(tau, dtype=float), (len(tau_max),))
    nu = np.broadcast_to(np.asarray(nu, dtype=float), (len(nu_max),))
    return bool(np.all(tau < np.asarray(tau_max)) and np.all(nu < np.asarray(nu_max)))


def rect_thresholds(env: GrowthEnvelope, spacing: Optional[tuple] = None) -> ThresholdReport:
    """Bounds for rectangular lattices ``diag(tau, nu) (sqrt Z)^{2d}``.

    ``tau_j < (2 b_j e)^{-1/2}`` and ``nu_j < (a_j / (2 pi^2 e))^{1/2}`` with
    ``a`` the real-axis decay and ``b`` the imaginary-axis growth of the
    window.  ``spacing = (tau, nu)`` is checked when given.
    """
    a = np.asarray(env.a)
    b = np.asarray(env.b)
    tau_max = tuple(float(v) for v in 1.0 / np.sqrt(2 * b * e))
    nu_max = tuple(float(v) for v in np.sqrt(a / (2 * pi ** 2 * e)))
    req = None if spacing is None else tuple(np.ravel(spacing).tolist())
    return ThresholdReport(tau_max, nu_max, _admissible(tau_max, nu_max, spacing), "rect", requested=req)


def sl2_threshold(S: SL2Mat, variant: str = "conservative", alpha: Optional[float] = None) -> ThresholdReport:
    """Admissible spacing for ``alpha S (sqrt Z)^2`` with the Gaussian window.

    ``conservative`` applies the rectangular bounds to the deformed window,
    whose class has decay ``pi (p - q)`` and growth ``pi (p + q)``:
    ``alpha < (2 pi e)^{-1/2} min{(p+q)^{-1/2}, (p-q)^{1/2}}``.
    ``printed`` returns ``(2 pi e)^{-1/2} min{(p-q)^{-1/2}, (p+q)^{1/2}}``.
    """
    if variant not in ("conservative", "printed"):
        raise ValueError("variant must be 'conservative' or 'printed'")
    p, q = S.p, S.q
    rule = "sl2_" + variant
    extras = {"p": p, "q": q}
    req = None if alpha is None else (float(alpha),)
    if p - q <= 0:
        return ThresholdReport((), (), False, rule, reason="p - q <= 0", requested=req, extras=extras)
    if variant == "conservative":
        tau, nu = GAUSSIAN_ALPHA / sqrt(p + q), GAUSSIAN_ALPHA * sqrt(p - q)
    else:
        tau, nu = GAUSSIAN_ALPHA / sqrt(p - q), GAUSSIAN_ALPHA * sqrt(p + q)
    ok = True if alpha is None else bool(alpha < min(tau, nu))
    return ThresholdReport((tau,), (nu,), ok, rule, requested=req, extras=extras)


def shear_admissible_root(tol: float = 1e-12) -> float:
    """Positive root of ``sigma^3 + sigma = 1``: shears with ``|sigma|`` below it have ``p > q``."""
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid ** 3 + mid < 1.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def als_preset(n_max: int) -> PointSet:
    """Cross-shaped set ``sqrt2({0} x sqrt Z) u sqrt2(sqrt Z x {0}) u {(1,0), (0,1)}``."""
    if n_max < 0:
        raise ValueError("n_max must be non-negative")
    ks = _signed_indices(n_max)
    axis_pts, axis_idx = [], []
    for k in ks:
        v = sqrt(2) * np.sign(k) * sqrt(abs(k))
        entry = (abs(int(k)), int(np.sign(k)))
        axis_pts.append((v, 0.0))
        axis_idx.append((entry, (0, 0)))
        if k != 0:
            axis_pts.append((0.0, v))
            axis_idx.append(((0, 0), entry))
    pts = axis_pts + [(1.0, 0.0), (0.0, 1.0)]
    idx = axis_idx + [((-1, 0), (-1, 0))] * 2
    order = sorted(range(len(pts)), key=lambda i: pts[i])
    return PointSet(
        np.array([pts[i] for i in order]),
        np.array([idx[i] for i in order]),
        sqrt(2) * np.eye(2),
        label="als",
    )


def matrix_from_preset(preset: str, alpha: float = 1.0) -> np.ndarray:
    """Generating matrix for ``rect``, ``rect:tau,nu``, ``rotate:theta``, ``shear:sigma``."""
    name, _, arg = preset.partition(":")
    if name == "rect":
        if arg:
            vals = [float(v) for v in arg.split(",")]
            tau, nu = (vals[0], vals[0]) if len(vals) == 1 else vals
            return np.diag([tau, nu])
        return alpha * np.eye(2)
    if name == "rotate":
        return alpha * rotation(float(arg)).matrix
    if name == "shear":
        return alpha * shear(float(arg)).matrix
    raise ValueError(f"unknown lattice preset {preset!r}")


def parse_matrix(text: str) -> np.ndarray:
    if text.strip().upper() == "I":
        return np.eye(2)
    vals = [float(v) for v in text.split(",")]
    size = int(round(sqrt(len(vals))))
    if size * size != len(vals):
        raise ValueError("matrix needs a square number of entries")
    return np.array(vals).reshape(size, size)
