"""Entire-function tools: maximum modulus, order, Jensen's formula, zero counting,
density of square-root sequences and the Weierstrass-product counterexample."""
from __future__ import annotations

from dataclasses import dataclass, field
from math import e, pi, sqrt
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import polygamma

from .stft import Signal
from .windows import GrowthEnvelope, WindowSpec, eval_window, polygaussian

__all__ = [
    "EntireEval",
    "SqrtSequence",
    "JensenResult",
    "Counterexample",
    "GrowthCheck",
    "max_modulus",
    "log_max_modulus",
    "order_estimate",
    "jensen_check",
    "zero_count_bound",
    "zero_count_bound_opt",
    "threshold_sup",
    "density_classify",
    "counterexample_build",
    "counterexample_table",
    "envelope_sup",
    "spectrogram_class",
    "spectrogram_entire",
    "spectrogram_growth",
]

MIN_THETA = 64
JENSEN_THETA = 4096
JENSEN_THETA_CAP = 2 ** 20
ZERO_CLEARANCE = 1e-3


@dataclass(frozen=True)
class EntireEval:
    """An entire function ``F`` with optional known zeros and claimed growth ``(b, C)``.

    ``fn`` must accept complex arrays.  ``log_abs``, when given, returns
    ``log |F|`` directly and is used for maximum-modulus work at large radii.
    """

    fn: Callable
    zeros: Optional[tuple] = None
    growth: Optional[tuple] = None
    log_abs: Optional[Callable] = None
    label: str = ""

    def __call__(self, z):
        scalar = np.ndim(z) == 0
        out = self.fn(np.asarray(z, dtype=complex))
        return complex(out) if scalar else np.asarray(out, dtype=complex)

    def log_modulus(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        if self.log_abs is not None:
            return np.asarray(self.log_abs(z), dtype=float)
        with np.errstate(divide="ignore"):
            return np.log(np.abs(self.fn(z)))

    @property
    def at_zero(self) -> complex:
        return self(0.0)


def _circle(r, n_theta):
    theta = 2 * pi * np.arange(n_theta) / n_theta
    return r * np.exp(1j * theta)


def max_modulus(F: EntireEval, r: float, n_theta: int = JENSEN_THETA) -> float:
    """``max |F(r e^{i theta})|`` over ``n_theta`` equispaced angles."""
    if n_theta < MIN_THETA:
        raise ValueError(f"n_theta must be at least {MIN_THETA}")
    return float(np.max(np.abs(F(_circle(r, n_theta)))))


def log_max_modulus(F: EntireEval, r: float, n_theta: int = JENSEN_THETA) -> float:
    if n_theta < MIN_THETA:
        raise ValueError(f"n_theta must be at least {MIN_THETA}")
    return float(np.max(F.log_modulus(_circle(r, n_theta))))


def order_estimate(F: EntireEval, radii: Sequence[float], n_theta: int = JENSEN_THETA,
                   resid_tol: float = 0.05) -> float:
    """Least-squares slope of ``log log M(r)`` against ``log r``.

    When the largest relative residual of the fit exceeds ``resid_tol`` the
    slope is refitted on the three largest radii, since the order is an
    asymptotic quantity.
    """
    radii = np.asarray(radii, dtype=float)
    if radii.size < 2 or np.any(np.diff(radii) <= 0) or radii[0] <= 0:
        raise ValueError("need at least two increasing positive radii")
    logM = np.array([log_max_modulus(F, r, n_theta) for r in radii])
    if np.any(logM <= 0):
        raise ValueError("M(r) <= 1 at some radius; log log M is undefined")
    x, y = np.log(radii), np.log(logM)
    slope, icpt = np.polyfit(x, y, 1)
    resid = np.abs(y - (slope * x + icpt)) / np.maximum(np.abs(y), 1e-300)
    if resid.max() > resid_tol and radii.size > 3:
        slope = np.polyfit(x[-3:], y[-3:], 1)[0]
    return float(slope)


@dataclass(frozen=True)
class JensenResult:
    lhs: float
    rhs: float
    gap: float
    n_theta: int
    n_zeros: int


def _jensen_theta(r, zeros, n_theta):
    # trapezoid error for log|z - z_j| on the circle decays like q^N with
    # q the ratio of the smaller to the larger of r and |z_j|
    mods = np.abs(np.asarray(zeros, dtype=complex))
    mods = mods[mods > 0]
    if mods.size == 0:
        return n_theta
    q = float(np.max(np.minimum(mods, r) / np.maximum(mods, r)))
    need = 30.0 / -np.log(q)
    n = n_theta
    while n < need and n < JENSEN_THETA_CAP:
        n *= 2
    return n


def jensen_check(F: EntireEval, r: float, n_theta: int = JENSEN_THETA) -> JensenResult:
    """Compare both sides of Jensen's formula on the circle of radius ``r``.

    ``lhs`` is the trapezoid mean of ``log |F|`` on the circle; ``rhs`` is
    ``log |F(0)| + sum_{|z_j| < r} log(r / |z_j|)`` over the known zeros.  The
    angular resolution is raised above ``n_theta`` when a zero sits close to
    the circle.
    """
    if F.zeros is None:
        raise ValueError("jensen_check needs the zeros of F")
    if not r > 0:
        raise ValueError("radius must be positive")
    f0 = F.at_zero
    if f0 == 0:
        raise ValueError("F(0) = 0; Jensen's formula needs F(0) != 0")
    zeros = np.asarray(F.zeros, dtype=complex)
    mods = np.abs(zeros)
    if np.any(np.abs(mods - r) < ZERO_CLEARANCE):
        raise ValueError(f"radius {r} is within {ZERO_CLEARANCE} of a zero modulus")
    n = _jensen_theta(r, zeros, n_theta)
    lhs = float(np.mean(F.log_modulus(_circle(r, n))))
    inside = mods[mods < r]
    rhs = float(np.log(abs(f0)) + np.sum(np.log(r / inside)))
    return JensenResult(lhs, rhs, abs(lhs - rhs), n, int(inside.size))


def zero_count_bound(b: float, C: float, r: float, s: float) -> float:
    """``(log C + b s^2 r^2) / log s``, an upper bound on the zero count ``n(r)``."""
    if not s > 1:
        raise ValueError("s must exceed 1")
    if not b > 0 or not C > 0:
        raise ValueError("b and C must be positive")
    return (np.log(C) + b * s * s * r * r) / np.log(s)


def zero_count_bound_opt(b: float, C: float, r: float) -> tuple:
    """Minimise :func:`zero_count_bound` over ``s > 1``; returns ``(bound, s)``."""
    res = minimize_scalar(lambda ls: zero_count_bound(b, C, r, np.exp(ls)),
                          bounds=(1e-6, 10.0), method="bounded", options={"xatol": 1e-12})
    return float(res.fun), float(np.exp(res.x))


def threshold_sup(b: float) -> tuple:
    """Numerical ``sup_{s>1} sqrt(2 log s / (b s^2))`` with its maximiser; closed form ``1/sqrt(b e)``."""
    if not b > 0:
        raise ValueError("b must be positive")
    res = minimize_scalar(lambda s: -np.sqrt(2 * np.log(s) / (b * s * s)),
                          bounds=(1.0 + 1e-12, 20.0), method="bounded", options={"xatol": 1e-12})
    return float(-res.fun), float(res.x)


@dataclass(frozen=True)
class SqrtSequence:
    """Positive nodes ``lambda(k) = beta sqrt(k)``, ``k >= 1``, or a tabulated list.

    ``K`` splits the counterexample product: nodes with ``k < K`` enter as
    ``1 - z^2/lambda(k)^2``, the rest through ``1 - z^4/gamma(k)^2`` with
    ``gamma = lambda^2``.
    """

    beta: float
    K: int = 1
    table: Optional[tuple] = None

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.K < 1:
            raise ValueError("K must be at least 1")
        if self.table is not None:
            tab = tuple(float(v) for v in self.table)
            if len(tab) == 0 or tab[0] <= 0 or np.any(np.diff(tab) <= 0):
                raise ValueError("tabulated nodes must be positive and strictly increasing")
            object.__setattr__(self, "table", tab)

    def lam(self, k) -> np.ndarray:
        k = np.asarray(k)
        if self.table is not None:
            if np.any(k < 1) or np.any(k > len(self.table)):
                raise IndexError("node index outside the table")
            return np.asarray(self.table)[k - 1]
        return self.beta * np.sqrt(k.astype(float))

    def gamma(self, k) -> np.ndarray:
        return self.lam(k) ** 2

    def liminf_ratio(self) -> float:
        """``liminf lambda(k)/sqrt(k)``; for a table, the minimum over its upper half."""
        if self.table is None:
            return float(self.beta)
        k = np.arange(1, len(self.table) + 1)
        half = k[len(k) // 2:]
        return float(np.min(self.lam(half) / np.sqrt(half)))


def density_classify(seq: SqrtSequence, b: float) -> str:
    """``uniqueness`` below ``1/sqrt(b e)``, ``non_uniqueness`` above ``sqrt(pi/b)``, else ``gap``."""
    if not b > 0:
        raise ValueError("b must be positive")
    beta = seq.liminf_ratio()
    if beta < 1.0 / sqrt(b * e):
        return "uniqueness"
    if beta > sqrt(pi / b):
        return "non_uniqueness"
    return "gap"


@dataclass(frozen=True)
class Counterexample:
    F: EntireEval
    seq: SqrtSequence
    b: float
    k_max: int
    disk: float
    tail_bound: float


def _product_terms(z, seq: SqrtSequence, k_max: int):
    z = np.asarray(z, dtype=complex)
    z2 = (z * z)[..., None]

    def ratio(g):
        # componentwise: complex division by a real array is not exact in numpy
        return z2.real / g + 1j * (z2.imag / g)

    terms = []
    if seq.K > 1:
        terms.append(1.0 - ratio(seq.gamma(np.arange(1, min(seq.K, k_max + 1)))))
    if k_max >= seq.K:
        q = ratio(seq.gamma(np.arange(seq.K, k_max + 1)))
        # 1 - z^4/g^2 split into two factors so that each real node is an exact root
        terms.append(1.0 - q)
        terms.append(1.0 + q)
    return terms


def _ce_log(z, seq, k_max):
    with np.errstate(divide="ignore"):
        return sum(np.sum(np.log(t), axis=-1) for t in _product_terms(z, seq, k_max))


def _ce_log_abs(z, seq, k_max, chunk=2048):
    # real logarithms only; the paired factors collapse to |1 - q^2|
    z = np.asarray(z, dtype=complex)
    flat = z.ravel()
    out = np.empty(flat.size)
    lo = seq.gamma(np.arange(1, min(seq.K, k_max + 1)))
    hi = seq.gamma(np.arange(seq.K, k_max + 1)) if k_max >= seq.K else np.zeros(0)
    with np.errstate(divide="ignore"):
        for a in range(0, flat.size, chunk):
            z2 = (flat[a:a + chunk] ** 2)[:, None]
            acc = np.zeros(z2.shape[0])
            if lo.size:
                q = z2.real / lo + 1j * (z2.imag / lo)
                acc += np.sum(np.log(np.abs(1.0 - q)), axis=1)
            if hi.size:
                q = z2.real / hi + 1j * (z2.imag / hi)
                acc += np.sum(np.log(np.abs(1.0 - q) * np.abs(1.0 + q)), axis=1)
            out[a:a + chunk] = acc
    return out.reshape(z.shape)


def counterexample_build(seq: SqrtSequence, b: float, k_max: int, disk: float = 5.0,
                         tail_tol: float = 0.1) -> Counterexample:
    """Truncated Weierstrass product vanishing on ``+-lambda(k)``, ``k <= k_max``.

    ``F(z) = prod_{k<K} (1 - z^2/lambda_k^2) prod_{K<=k<=k_max} (1 - z^4/gamma_k^2)``,
    evaluated as a sum of complex logarithms.  The neglected tail changes
    ``log |F|`` on ``|z| <= disk`` by at most ``disk^4 sum_{k>k_max} gamma_k^{-2}``,
    which for ``lambda = beta sqrt(k)`` is ``disk^4 psi'(k_max+1) / beta^4``.
    """
    if not b > 0:
        raise ValueError("b must be positive")
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    if seq.table is not None and k_max > len(seq.table):
        raise ValueError("k_max exceeds the tabulated nodes")
    beta = seq.liminf_ratio()
    if not beta > sqrt(pi / b):
        raise ValueError(f"beta = {beta:g} must exceed sqrt(pi/b) = {sqrt(pi / b):g}")
    if seq.table is None:
        tail = disk ** 4 * float(polygamma(1, k_max + 1)) / seq.beta ** 4
    else:
        # no closed form for a table: bound the tail with the liminf rate
        tail = disk ** 4 * float(polygamma(1, k_max + 1)) / beta ** 4
    if tail > tail_tol:
        raise ValueError(f"k_max = {k_max} leaves tail bound {tail:.3g} > {tail_tol:g} on |z| <= {disk:g}")

    lam = seq.lam(np.arange(1, k_max + 1))
    zeros = [*lam, *(-lam)]
    if k_max >= seq.K:
        hi = lam[seq.K - 1:]
        zeros += [*(1j * hi), *(-1j * hi)]

    def fn(z):
        return np.exp(_ce_log(z, seq, k_max))

    def log_abs(z):
        return _ce_log_abs(z, seq, k_max)

    F = EntireEval(fn, tuple(complex(v) for v in zeros), (b, None), log_abs, label="counterexample")
    return Counterexample(F, seq, b, k_max, disk, tail)


def envelope_sup(F: EntireEval, b: float, radius: float, n_r: int = 101, n_theta: int = 256) -> float:
    """``max |F(z)| exp(-b |z|^2)`` over a polar grid of the disk ``|z| <= radius``."""
    r = np.linspace(0.0, radius, n_r)
    z = (r[:, None] * np.exp(2j * pi * np.arange(n_theta) / n_theta)[None, :]).ravel()
    return float(np.exp(np.max(F.log_modulus(z) - b * np.abs(z) ** 2)))


def counterexample_table(ce: Counterexample, z) -> np.ndarray:
    """Rows ``re, im, F_re, F_im, envelope_ratio`` with ratio ``|F| exp(-b |z|^2)``."""
    z = np.asarray(z, dtype=complex).ravel()
    Fz = ce.F(z)
    ratio = np.abs(Fz) * np.exp(-ce.b * np.abs(z) ** 2)
    return np.column_stack([z.real, z.imag, Fz.real, Fz.imag, ratio])


# --------------------------------------------------------------------------- spectrogram growth


def spectrogram_class(env: GrowthEnvelope) -> tuple:
    """Growth rates ``(2 b_j, 2 pi^2 / a_j)`` of the spectrogram of a window in ``O_a^b``."""
    return tuple(2 * b for b in env.b) + tuple(2 * pi ** 2 / a for a in env.a)


def _reflected(w: WindowSpec) -> WindowSpec:
    """Window ``u -> conj(w(conj u))``; equal to ``w`` for real windows."""
    if w.is_real:
        return w
    return polygaussian([c.conjugate() for c in w.coeffs], w.gamma)


def spectrogram_entire(f: Signal, w: WindowSpec, axis: str = "x", fixed: float = 0.0) -> EntireEval:
    """Entire extension of a line of the spectrogram.

    ``axis="x"`` extends ``x -> |V_w f(x, fixed)|^2`` and ``axis="omega"``
    extends ``omega -> |V_w f(fixed, omega)|^2``, both as
    ``G(z) = V(z) conj(V(conj z))`` with ``V`` the holomorphic continuation.
    """
    if axis not in ("x", "omega"):
        raise ValueError("axis must be 'x' or 'omega'")
    t, dt, fv = f.t, f.dt, f.values
    wr = _reflected(w)

    def V(z):
        z = np.asarray(z, dtype=complex).ravel()
        if axis == "x":
            K = eval_window(wr, t[None, :] - z[:, None]) * np.exp(-2j * pi * fixed * t)[None, :]
        else:
            K = np.conj(eval_window(w, t - fixed))[None, :] * np.exp(-2j * pi * z[:, None] * t[None, :])
        return (K @ fv) * dt

    def fn(z):
        shape = np.shape(z)
        z = np.asarray(z, dtype=complex).ravel()
        return (V(z) * np.conj(V(np.conj(z)))).reshape(shape)

    return EntireEval(fn, label=f"spectrogram-{axis}")


@dataclass(frozen=True)
class GrowthCheck:
    c_fit: float
    order: float
    radii: tuple
    log_M: tuple
    predicted: float


def spectrogram_growth(f: Signal, w: WindowSpec, env: GrowthEnvelope, axis: str = "x",
                       fixed: float = 0.0, radii=(1.5, 2.0, 2.5, 3.0), n_theta: int = 512) -> GrowthCheck:
    """Fit ``log M(r) ~ c r^2 + const`` for a spectrogram line and estimate its order.

    Radii stay moderate: the quadrature of the continuation cancels roughly
    ``exp(pi r^2 / 2)`` in magnitude, so large radii lose all digits.
    """
    G = spectrogram_entire(f, w, axis, fixed)
    radii = tuple(float(r) for r in radii)
    logM = np.array([log_max_modulus(G, r, n_theta) for r in radii])
    c, _ = np.polyfit(np.square(radii), logM, 1)
    order = order_estimate(G, radii, n_theta)
    cls = spectrogram_class(env)
    predicted = cls[0] if axis == "x" else cls[env.dim]
    return GrowthCheck(float(c), order, radii, tuple(float(v) for v in logM), float(predicted))
