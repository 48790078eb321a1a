"""Discretized short-time Fourier transform on uniform grids.

Conventions: ``V_w f(x, omega) = int f(t) conj(w(t - x)) exp(-2 pi i omega t) dt``,
evaluated with the rectangle rule on the signal grid.  All integrands carry
Gaussian decay, which makes the rectangle rule spectrally accurate.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from functools import lru_cache
from math import pi, sqrt
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.fft as sfft

from .lattices import PointSet, SL2Mat
from .windows import WindowSpec, eval_window

__all__ = [
    "Signal",
    "TFSampleSet",
    "CoverageError",
    "GridError",
    "BasisError",
    "DEFAULT_T0",
    "DEFAULT_DT",
    "DEFAULT_N",
    "default_signal",
    "hermite_functions",
    "hermite_mixture",
    "random_mixture",
    "window_signal",
    "window_halfwidth",
    "stft_points",
    "stft_point",
    "sample_phaseless",
    "stft_grid",
    "spectrogram_grid",
    "precision_types",
    "tensor_product",
    "ambiguity_grid_direct",
    "frft",
    "MetaplecticGaussian",
    "metaplectic_gaussian",
]

DEFAULT_T0 = -8.0
DEFAULT_DT = 1.0 / 64
DEFAULT_N = 1025
COVERAGE_TAIL = 1e-12
# pi to long-double accuracy; np.longdouble(np.pi) would only carry 53 bits
PI_EXT = np.longdouble("3.14159265358979323846264338327950288")


class CoverageError(ValueError):
    """The signal grid does not cover the window around a sample point."""

    def __init__(self, msg, index=None):
        super().__init__(msg)
        self.index = index


class GridError(ValueError):
    """Grids that cannot be combined (e.g. frequency grid not FFT-compatible)."""


class BasisError(ValueError):
    """Signal not represented by the requested Hermite expansion."""

    def __init__(self, msg, residual):
        super().__init__(msg)
        self.residual = residual


@dataclass(frozen=True)
class Signal:
    """Complex samples ``values[k] = f(t0 + k dt)``; integrals use weight ``dt``."""

    t0: float
    dt: float
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex).ravel()
        if len(v) < 2:
            raise ValueError("a signal needs at least two samples")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not np.all(np.isfinite(v)):
            raise ValueError("signal values must be finite")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return len(self.values)

    @property
    def t(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self.values))

    @property
    def t_end(self) -> float:
        return self.t0 + self.dt * (len(self.values) - 1)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.dt))

    def inner(self, other: "Signal") -> complex:
        """``<self, other> = int self * conj(other)``."""
        self._check_same_grid(other)
        return complex(np.sum(self.values * np.conj(other.values)) * self.dt)

    def _check_same_grid(self, other: "Signal"):
        if len(self) != len(other) or abs(self.t0 - other.t0) > 1e-12 or abs(self.dt - other.dt) > 1e-15:
            raise GridError("signals live on different grids")

    def scaled(self, c: complex) -> "Signal":
        return Signal(self.t0, self.dt, c * self.values)

    def with_values(self, values) -> "Signal":
        return Signal(self.t0, self.dt, values)

    def shifted(self, s: float) -> "Signal":
        """``t -> f(t - s)`` by linear interpolation, zero outside the grid."""
        return self.with_values(_interp(self, self.t - s))

    def to_dict(self) -> dict:
        return {"t0": self.t0, "dt": self.dt, "values": [[v.real, v.imag] for v in self.values]}

    @classmethod
    def from_dict(cls, d: dict) -> "Signal":
        vals = np.array([complex(re, im) for re, im in d["values"]])
        return cls(float(d["t0"]), float(d["dt"]), vals)

    @classmethod
    def from_function(cls, fn: Callable, t0=DEFAULT_T0, dt=DEFAULT_DT, n=DEFAULT_N) -> "Signal":
        t = t0 + dt * np.arange(n)
        return cls(t0, dt, fn(t))


@dataclass(frozen=True)
class TFSampleSet:
    """Phaseless samples ``|V_w f(lambda)|`` at time-frequency points."""

    points: np.ndarray
    magnitudes: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 2)
        mags = np.asarray(self.magnitudes, dtype=float).ravel()
        if len(pts) != len(mags):
            raise ValueError("points and magnitudes differ in length")
        if np.any(mags < 0):
            raise ValueError("magnitudes must be non-negative")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "magnitudes", mags)

    def __len__(self):
        return len(self.magnitudes)


def _interp(f: Signal, t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    grid = f.t
    re = np.interp(t, grid, f.values.real, left=0.0, right=0.0)
    im = np.interp(t, grid, f.values.imag, left=0.0, right=0.0)
    return re + 1j * im


def default_signal(values_fn: Callable) -> Signal:
    return Signal.from_function(values_fn)


def hermite_functions(n_max: int, t) -> np.ndarray:
    """Rows ``h_0(t), ..., h_{n_max-1}(t)`` of the orthonormal Hermite basis (real ``t``)."""
    t = np.asarray(t, dtype=float)
    out = np.empty((n_max, t.size))
    if n_max == 0:
        return out
    u = sqrt(2 * pi) * t
    gauss = np.exp(-pi * t * t)
    out[0] = 2 ** 0.25 * gauss
    if n_max > 1:
        out[1] = sqrt(2.0) * u * out[0]
    for k in range(1, n_max - 1):
        out[k + 1] = sqrt(2.0 / (k + 1)) * u * out[k] - sqrt(k / (k + 1.0)) * out[k - 1]
    return out


def hermite_mixture(coeffs: Sequence[complex], t0=DEFAULT_T0, dt=DEFAULT_DT, n=DEFAULT_N) -> Signal:
    """``sum_k coeffs[k] h_k`` sampled on the grid."""
    coeffs = np.asarray(coeffs, dtype=complex)
    t = t0 + dt * np.arange(n)
    return Signal(t0, dt, coeffs @ hermite_functions(len(coeffs), t))


def random_mixture(rng: np.random.Generator, n_basis: int, **grid) -> Signal:
    """Hermite mixture with i.i.d. complex normal coefficients, unit coefficient norm."""
    c = rng.standard_normal(n_basis) + 1j * rng.standard_normal(n_basis)
    c /= np.linalg.norm(c)
    return hermite_mixture(c, **grid)


def window_signal(w: WindowSpec, shift: float = 0.0, t0=DEFAULT_T0, dt=DEFAULT_DT, n=DEFAULT_N) -> Signal:
    """Sample ``t -> w(t - shift)`` on the grid."""
    t = t0 + dt * np.arange(n)
    return Signal(t0, dt, eval_window(w, t - shift))


@lru_cache(maxsize=64)
def window_halfwidth(w: WindowSpec, tail: float = COVERAGE_TAIL) -> float:
    """Smallest ``W`` with ``int_{|t| > W} |w|^2 <= tail * ||w||^2``."""
    L = 12.0 / sqrt(w.gamma) + 4.0 * len(w.coeffs or (0,)) + 2.0 * sqrt(w.n + 1)
    t = np.linspace(-L, L, 20001)
    dens = np.abs(eval_window(w, t)) ** 2
    total = dens.sum()
    # mass outside [-|t_i|, |t_i|] for symmetric cut-offs
    r = np.abs(t)
    order = np.argsort(-r)
    outside = np.cumsum(dens[order])
    ok = outside <= tail * total
    if not np.any(ok):
        return float(L)
    last = np.nonzero(ok)[0][-1]
    return float(r[order][last])


def _check_coverage(f: Signal, w: WindowSpec, x):
    W = window_halfwidth(w)
    lo, hi = f.t0 + W, f.t_end - W
    bad = np.nonzero((x < lo - 1e-12) | (x > hi + 1e-12))[0]
    if bad.size:
        i = int(bad[0])
        raise CoverageError(
            f"point {i} (x={x[i]:.6g}) needs the grid to cover [{x[i] - W:.6g}, {x[i] + W:.6g}]",
            index=i,
        )


def _product_grid(f: Signal, w: WindowSpec, xs, omegas) -> np.ndarray:
    t = f.t
    G = f.values[None, :] * np.conj(eval_window(w, t[None, :] - xs[:, None]))
    E = np.exp(-2j * pi * omegas[:, None] * t[None, :])
    return (G @ E.T) * f.dt


def stft_points(f: Signal, w: WindowSpec, pts, check: bool = True, chunk: int = 512) -> np.ndarray:
    """Complex ``V_w f`` at each row ``(x, omega)`` of ``pts``, in input order."""
    pts = np.asarray(pts.points if isinstance(pts, PointSet) else pts, dtype=float).reshape(-1, 2)
    x, om = pts[:, 0], pts[:, 1]
    if check:
        _check_coverage(f, w, x)
    ux, ix = np.unique(x, return_inverse=True)
    uo, io = np.unique(om, return_inverse=True)
    K = len(pts)
    out = np.empty(K, dtype=complex)
    if ux.size * uo.size <= max(64 * K, 4096) and ux.size * uo.size <= 2e7:
        # separable point sets: one matrix product over the distinct coordinates
        step = max(1, int(2e6 // max(len(f), uo.size)))
        for s in range(0, ux.size, step):
            V = _product_grid(f, w, ux[s:s + step], uo)
            sel = (ix >= s) & (ix < s + step)
            out[sel] = V[ix[sel] - s, io[sel]]
        return out
    t = f.t
    for s in range(0, K, chunk):
        xs, oms = x[s:s + chunk], om[s:s + chunk]
        G = np.conj(eval_window(w, t[None, :] - xs[:, None]))
        G *= np.exp(-2j * pi * oms[:, None] * t[None, :])
        out[s:s + chunk] = (G @ f.values) * f.dt
    return out


def stft_point(f: Signal, w: WindowSpec, x: float, omega: float) -> complex:
    return complex(stft_points(f, w, [[x, omega]])[0])


def sample_phaseless(f: Signal, w: WindowSpec, pts) -> TFSampleSet:
    P = np.asarray(pts.points if isinstance(pts, PointSet) else pts, dtype=float).reshape(-1, 2)
    return TFSampleSet(P, np.abs(stft_points(f, w, P)))


def _fft_plan(f: Signal, omegagrid) -> tuple:
    om = np.asarray(omegagrid, dtype=float)
    if om.ndim != 1 or om.size < 2:
        raise GridError("frequency grid must be a 1-D array with at least two nodes")
    d_om = om[1] - om[0]
    if not d_om > 0 or not np.allclose(np.diff(om), d_om, rtol=1e-9, atol=0):
        raise GridError("frequency grid must be uniform and increasing")
    M_real = 1.0 / (d_om * f.dt)
    M = int(round(M_real))
    if abs(M - M_real) > 1e-6 * M_real:
        raise GridError("frequency step must equal 1 / (M dt) for an integer M")
    if M < len(f) or om.size > M:
        raise GridError(f"FFT length {M} cannot hold {len(f)} samples and {om.size} frequencies")
    return om, d_om, M


def precision_types(precision: str):
    """``(complex dtype, real dtype)`` for ``"double"`` or ``"extended"`` (long double)."""
    if precision == "double":
        return np.complex128, np.float64
    if precision == "extended":
        return np.clongdouble, np.longdouble
    raise ValueError(f"unknown precision {precision!r}")


def _window_rows(f: Signal, w: WindowSpec, xs, cdtype, rdtype) -> np.ndarray:
    """``conj(w(t_k - x_i))`` for all ``i, k``.

    When every ``x_i`` sits on the signal grid the entries depend on ``k - i``
    only, so a single table of ``2N - 1`` window values is indexed.
    """
    t0, dt, n = rdtype(f.t0), rdtype(f.dt), len(f)
    m = (np.asarray(xs, dtype=float) - f.t0) / f.dt
    mi = np.rint(m).astype(np.int64)
    if np.all(np.abs(m - mi) < 1e-9):
        lo = -int(mi.max())
        offs = np.arange(lo, n - int(mi.min()))
        table = np.conj(eval_window(w, dt * offs.astype(rdtype), cdtype))
        return table[np.arange(n)[None, :] - mi[:, None] - lo]
    t = t0 + dt * np.arange(n).astype(rdtype)
    return np.conj(eval_window(w, t[None, :] - np.asarray(xs, dtype=rdtype)[:, None], cdtype))


def stft_grid(f: Signal, w: WindowSpec, xgrid, omegagrid, chunk: int = 256,
              precision: str = "double") -> np.ndarray:
    """Complex ``V_w f(x_i, omega_j)`` via zero-padded FFTs of the windowed products.

    ``precision="extended"`` carries every step in long double (only meaningful
    where the platform's long double is wider than 64 bits).
    """
    om, d_om, M = _fft_plan(f, omegagrid)
    cdtype, rdtype = precision_types(precision)
    two_pi = 2 * rdtype(PI_EXT)
    xs = np.asarray(xgrid, dtype=float).ravel()
    t = rdtype(f.t0) + rdtype(f.dt) * np.arange(len(f)).astype(rdtype)
    j = np.arange(om.size).astype(rdtype)
    om0, dom = rdtype(om[0]), rdtype(d_om)
    # exp(-2 pi i omega t) = exp(-2 pi i om0 t) * exp(-2 pi i j d_om t0) * exp(-2 pi i j k / M)
    premod = np.exp(-1j * two_pi * om0 * t)
    postmod = np.exp(-1j * two_pi * j * dom * rdtype(f.t0)) * rdtype(f.dt)
    fv = f.values.astype(cdtype) * premod
    out = np.empty((xs.size, om.size), dtype=cdtype)
    workers = int(os.environ.get("PHASELESS_THREADS", "0") or 0) or None
    for s in range(0, xs.size, chunk):
        prod = fv[None, :] * _window_rows(f, w, xs[s:s + chunk], cdtype, rdtype)
        out[s:s + chunk] = sfft.fft(prod, n=M, axis=1, workers=workers)[:, : om.size] * postmod
    return out


def spectrogram_grid(f: Signal, w: WindowSpec, xgrid, omegagrid, precision: str = "double") -> np.ndarray:
    """``|V_w f(x_i, omega_j)|^2`` on a product grid."""
    V = stft_grid(f, w, xgrid, omegagrid, precision=precision)
    return V.real ** 2 + V.imag ** 2


def tensor_product(f: Signal, omega: float) -> Signal:
    """``t -> f(t - omega) conj(f(t))`` on the grid of ``f``."""
    span = f.t_end - f.t0
    if abs(omega) >= span:
        raise GridError("shift leaves no overlap with the signal grid")
    return f.with_values(_interp(f, f.t - omega) * np.conj(f.values))


def ambiguity_grid_direct(f: Signal, shifts, freqs) -> np.ndarray:
    """``V_f f(s, xi)`` by direct quadrature on every ``(s, xi)`` pair."""
    shifts = np.atleast_1d(np.asarray(shifts, dtype=float))
    freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
    t = f.t
    E = np.exp(-2j * pi * freqs[:, None] * t[None, :])
    rows = np.array([np.conj(tensor_product(f, s).values) for s in shifts])
    return (rows @ E.T) * f.dt


def frft(f: Signal, theta: float, n_basis: int = 64, tol: float = 1e-6) -> Signal:
    """Fractional Fourier transform: Hermite coefficient ``n`` picks up ``exp(-i n theta)``.

    ``theta = pi/2`` is the Fourier transform ``int f(t) exp(-2 pi i omega t) dt``
    (resampled on the same grid).
    """
    H = hermite_functions(n_basis, f.t)
    c = (H @ f.values) * f.dt
    resid = f.values - c @ H
    nf = f.norm()
    rel = float(np.sqrt(np.sum(np.abs(resid) ** 2) * f.dt) / nf) if nf > 0 else 0.0
    if rel > tol:
        raise BasisError(f"Hermite expansion with {n_basis} terms leaves residual {rel:.3g}", rel)
    phases = np.exp(-1j * theta * np.arange(n_basis))
    return f.with_values((c * phases) @ H)


@dataclass(frozen=True)
class MetaplecticGaussian:
    """``t -> C exp(-pi c t^2)``, the metaplectic image of the standard Gaussian."""

    c: complex
    C: float

    def __call__(self, t):
        t = np.asarray(t, dtype=complex)
        return self.C * np.exp(-pi * self.c * t * t)


def metaplectic_gaussian(S: SL2Mat) -> MetaplecticGaussian:
    """Exponent ``c = p (1 + i(ac + bd))``; ``C`` gives unit L2 norm, positive at 0."""
    c = S.p * complex(1.0, S.a * S.c + S.b * S.d)
    return MetaplecticGaussian(c, (2.0 * c.real) ** 0.25)
