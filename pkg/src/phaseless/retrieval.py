"""Phase retrieval from spectrogram data.

Two routes are provided.  The constructive pipeline turns a full spectrogram
into the ambiguity data of the signal and reads the signal off it (up to a
global phase).  The fitter recovers Hermite coefficients from finitely many
phaseless samples by multi-start gradient descent on the quartic loss.

Pipeline conventions
--------------------
With ``f_s(t) = f(t - s) conj(f(t))`` and ``phi_s`` defined the same way from the
window,

* ``Q(x, s) = int |V_phi f(x, w)|^2 exp(-2 pi i w s) dw = <f_s, T_x phi_s>``
* ``F_x Q(xi, s) = F(f_s)(xi) conj(F(phi_s)(xi))``
* ``A(s, xi) = F(f_s)(xi) = conj(V_f f(s, -xi))``

so ``A`` is the ambiguity function of ``f`` up to conjugation and a flip of
the frequency axis.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.fft as sfft

from .lattices import PointSet
from .stft import (
    PI_EXT,
    CoverageError,
    GridError,
    Signal,
    TFSampleSet,
    _interp,
    hermite_mixture,
    precision_types,
    spectrogram_grid,
    stft_points,
)
from .windows import WindowSpec, eval_window

__all__ = [
    "AnchorError",
    "DeconvolutionError",
    "CorrelationGrid",
    "AmbiguityGrid",
    "Reconstruction",
    "FitConfig",
    "FitProblem",
    "FitReport",
    "DistinguishReport",
    "pipeline_omega_grid",
    "spectro_to_correlation",
    "deconvolve",
    "ambiguity_to_signal",
    "reconstruct",
    "phase_align",
    "fit_from_samples",
    "distinguish",
    "thread_count",
]

DEFAULT_EPS_REL = 1e-11
DEFAULT_FLOOR = 1e-11
DEFAULT_M = 2048
DECAY_TOL = 1e-10


class AnchorError(ValueError):
    """``f_0 = |f|^2`` has no usable maximum, so the phase cannot be pinned."""


class DeconvolutionError(ValueError):
    """The window tensor-product spectrum is below threshold everywhere."""


@dataclass(frozen=True)
class CorrelationGrid:
    """``Q(x_i, s_k)``; ``s`` in FFT order (``s_k = k ds`` wrapped to negative)."""

    x: np.ndarray
    s: np.ndarray
    values: np.ndarray


@dataclass(frozen=True)
class AmbiguityGrid:
    """``values[k, j] = F(f_{s_k})(xi_j)``.

    ``shifts`` are the tensor-product shifts (FFT order), ``freqs`` the
    frequencies (FFT order).  ``kept`` flags the shift rows where the window
    spectrum cleared the threshold somewhere; other rows are zero.  ``t0`` and
    ``dt`` describe the time grid on which ``f_s`` is recovered.
    """

    shifts: np.ndarray
    freqs: np.ndarray
    values: np.ndarray
    t0: float
    dt: float
    kept: Optional[np.ndarray] = None

    def row(self, s: float) -> np.ndarray:
        k = int(np.argmin(np.abs(self.shifts - s)))
        return self.values[k]


@dataclass(frozen=True)
class Reconstruction:
    signal: Signal
    ambiguity: AmbiguityGrid
    anchor: float  # t0 at which the phase was pinned


def pipeline_omega_grid(f: Signal, M: int = DEFAULT_M) -> np.ndarray:
    """Frequency grid ``(j - M/2) / (M dt)`` matched to the signal grid by FFT duality."""
    return (np.arange(M) - M // 2) / (M * f.dt)


def _ft_axis1(u, x0, dx, rdtype):
    """Continuous Fourier transform along the last axis, ``xi`` in FFT order."""
    n = u.shape[-1]
    xi = sfft.fftfreq(n).astype(rdtype) / rdtype(dx)
    ph = np.exp(-2j * rdtype(PI_EXT) * xi * rdtype(x0)) * rdtype(dx)
    return xi, sfft.fft(u, axis=-1, workers=thread_count()) * ph


def _ift_axis1(U, x0, dx, rdtype):
    n = U.shape[-1]
    xi = sfft.fftfreq(n).astype(rdtype) / rdtype(dx)
    ph = np.exp(2j * rdtype(PI_EXT) * xi * rdtype(x0)) / rdtype(dx)
    return sfft.ifft(U * ph, axis=-1, workers=thread_count())


def _uniform_step(grid, what):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise GridError(f"{what} grid must be 1-D with at least two nodes")
    step = grid[1] - grid[0]
    if not step > 0 or not np.allclose(np.diff(grid), step, rtol=1e-9, atol=0):
        raise GridError(f"{what} grid must be uniform and increasing")
    return float(step)


def spectro_to_correlation(spec, xgrid, omegagrid, decay_tol: float = DECAY_TOL) -> CorrelationGrid:
    """Fourier transform of the spectrogram in frequency, row by row.

    ``spec[i, j] = |V f(x_i, omega_j)|^2`` on a uniform frequency grid of ``M``
    nodes.  Returns ``Q(x_i, s_k)`` on the dual grid ``s_k = k / (M d_omega)``.
    Long-double input stays in long double.
    """
    spec = np.asarray(spec)
    xs = np.asarray(xgrid, dtype=float).ravel()
    om = np.asarray(omegagrid, dtype=float).ravel()
    if spec.shape != (xs.size, om.size):
        raise GridError(f"spectrogram shape {spec.shape} does not match grids ({xs.size}, {om.size})")
    d_om = _uniform_step(om, "frequency")
    rdtype = np.longdouble if spec.dtype == np.longdouble else np.float64
    M = om.size
    peak = float(np.max(np.abs(spec))) if spec.size else 0.0
    if peak > 0:
        edge = float(np.max(np.abs(spec[:, [0, -1]])))
        if edge > decay_tol * peak:
            raise CoverageError(f"spectrogram is {edge / peak:.2e} of its peak at the frequency boundary")
    s = sfft.fftfreq(M).astype(rdtype) / rdtype(d_om)
    phase = np.exp(-2j * rdtype(PI_EXT) * rdtype(om[0]) * s)
    Q = sfft.fft(spec.astype(rdtype), axis=1, workers=thread_count()) * (rdtype(d_om) * phase)
    if peak > 0:
        qmax = float(np.max(np.abs(Q)))
        far = float(np.max(np.abs(Q[:, M // 2])))
        if far > decay_tol * qmax:
            raise CoverageError("frequency grid too coarse: Q has not decayed at the largest shift")
    return CorrelationGrid(xs, s, Q)


def _shifted_window_rows(w: WindowSpec, x0, dx, n, shift_idx, cdtype, rdtype):
    """Rows ``phi_s(t_j) = phi(t_j - s) conj(phi(t_j))`` for ``s = k dx``."""
    t = rdtype(x0) + rdtype(dx) * np.arange(n).astype(rdtype)
    base = eval_window(w, t, cdtype)
    # phi(t_j - k dx) is phi on the grid shifted by k nodes; tabulate once
    lo = int(min(shift_idx.min(), 0))
    hi = int(max(shift_idx.max(), 0))
    ext = rdtype(x0) + rdtype(dx) * np.arange(-hi, n - lo).astype(rdtype)
    table = eval_window(w, ext, cdtype)
    idx = np.arange(n)[None, :] - shift_idx[:, None] + hi
    return table[idx] * np.conj(base)[None, :]


def deconvolve(Q: CorrelationGrid, w: WindowSpec, eps_rel: float = DEFAULT_EPS_REL,
               floor: float = DEFAULT_FLOOR) -> AmbiguityGrid:
    """Divide out the window tensor product in the ``x``-Fourier domain.

    Each shift row keeps the frequencies where ``|F phi_s|`` exceeds both
    ``eps_rel`` times that row's maximum and ``floor`` times the global maximum
    ``||phi||^2``; everything else is set to zero.  Rows whose ``phi_s`` has
    ``L^1`` norm below the global cut are skipped outright, which is exact
    because ``|F phi_s| <= ||phi_s||_1``.
    """
    if not 0 < eps_rel < 1:
        raise ValueError("eps_rel must lie in (0, 1)")
    if not 0 <= floor < 1:
        raise ValueError("floor must lie in [0, 1)")
    xs = Q.x
    dx = _uniform_step(xs, "x")
    x0 = float(xs[0])
    n = xs.size
    cdtype = Q.values.dtype
    rdtype = np.longdouble if cdtype == np.clongdouble else np.float64
    kf = np.asarray(Q.s, dtype=float) / dx
    k = np.rint(kf).astype(np.int64)
    if np.any(np.abs(kf - k) > 1e-6):
        raise GridError("shift grid must be an integer multiple of the x spacing")

    t = rdtype(x0) + rdtype(dx) * np.arange(n).astype(rdtype)
    phi = eval_window(w, t, cdtype)
    phi_norm2 = np.sum(np.abs(phi) ** 2) * rdtype(dx)
    cut = rdtype(floor) * phi_norm2

    # L1 norms of phi_s from a shifted-window table, cheap enough for every shift
    l1 = np.empty(k.size, dtype=rdtype)
    for a in range(0, k.size, 256):
        rows = _shifted_window_rows(w, x0, dx, n, k[a:a + 256], cdtype, rdtype)
        l1[a:a + 256] = np.sum(np.abs(rows), axis=1) * rdtype(dx)
    kept = l1 > cut
    if not np.any(kept):
        raise DeconvolutionError("window tensor product is below threshold for every shift")

    sel = np.nonzero(kept)[0]
    xi, FQ = _ft_axis1(np.ascontiguousarray(Q.values[:, sel].T), x0, dx, rdtype)
    _, Fphi = _ft_axis1(_shifted_window_rows(w, x0, dx, n, k[sel], cdtype, rdtype), x0, dx, rdtype)
    D = np.conj(Fphi)
    mag = np.abs(D)
    ok = (mag > rdtype(eps_rel) * mag.max(axis=1, keepdims=True)) & (mag > cut)
    if not np.any(ok):
        raise DeconvolutionError("window tensor-product spectrum is below threshold everywhere")
    A = np.zeros((k.size, n), dtype=cdtype)
    A[sel] = np.where(ok, FQ / np.where(ok, D, 1), 0)
    return AmbiguityGrid(np.asarray(Q.s, dtype=float), np.asarray(xi, dtype=float), A, x0, dx, kept)


def ambiguity_to_signal(amb: AmbiguityGrid, anchor_floor: float = 1e-12) -> tuple:
    """Read the signal off its ambiguity data; returns ``(Signal, t_anchor)``.

    ``f_0 = |f|^2`` is maximal at ``t_anchor``, where ``f`` is set to the
    positive root.  Then ``f(t_anchor - s) = f_s(t_anchor) / conj(f(t_anchor))``.
    Shifts outside the kept rows leave zeros.
    """
    vals = amb.values
    cdtype = vals.dtype
    rdtype = np.longdouble if cdtype == np.clongdouble else np.float64
    n = vals.shape[1]
    k = np.rint(amb.shifts / amb.dt).astype(np.int64)
    zero = np.nonzero(k == 0)[0]
    if zero.size == 0:
        raise GridError("ambiguity grid has no zero shift")
    j0 = int(zero[0])
    f0 = _ift_axis1(vals[j0], amb.t0, amb.dt, rdtype).real
    i0 = int(np.argmax(f0))
    peak = f0[i0]
    if not peak > anchor_floor:
        raise AnchorError(f"max |f|^2 = {float(peak):.3g} is below the anchor floor {anchor_floor:g}")
    anchor = np.sqrt(peak)
    # only the t_anchor column of each f_s is needed: a direct sum beats a full inverse FFT
    xi = np.asarray(sfft.fftfreq(n).astype(rdtype) / rdtype(amb.dt))
    t_a = rdtype(amb.t0) + rdtype(amb.dt) * i0
    kern = np.exp(2j * rdtype(PI_EXT) * xi * t_a) / rdtype(amb.dt * n)
    fs_at = vals @ kern
    out = np.zeros(n, dtype=cdtype)
    idx = i0 - k
    good = (idx >= 0) & (idx < n)
    if amb.kept is not None:
        good &= amb.kept
    out[idx[good]] = fs_at[good] / anchor
    out[i0] = anchor  # exact, so rounding cannot leave an imaginary part on the anchor
    sig = Signal(amb.t0, amb.dt, out.astype(complex))
    return sig, float(t_a)


def reconstruct(f: Signal, w: WindowSpec, M: int = DEFAULT_M, eps_rel: float = DEFAULT_EPS_REL,
                floor: float = DEFAULT_FLOOR, precision: str = "extended") -> Reconstruction:
    """Spectrogram of ``f`` on the matched grid, then the full inversion pipeline."""
    om = pipeline_omega_grid(f, M)
    S = spectrogram_grid(f, w, f.t, om, precision=precision)
    Q = spectro_to_correlation(S, f.t, om)
    amb = deconvolve(Q, w, eps_rel=eps_rel, floor=floor)
    sig, t_a = ambiguity_to_signal(amb)
    return Reconstruction(sig, amb, t_a)


def phase_align(f: Signal, g: Signal) -> tuple:
    """Best unimodular ``tau`` with ``f ~ tau g`` and the relative residual."""
    nf, ng = f.norm(), g.norm()
    if nf == 0 or ng == 0:
        raise ValueError("phase_align needs nonzero signals")
    ip = f.inner(g)
    tau = ip / abs(ip) if ip != 0 else 1.0 + 0j
    diff = f.values - tau * g.values
    err = float(np.sqrt(np.sum(np.abs(diff) ** 2) * f.dt) / nf)
    return complex(tau), err


# --------------------------------------------------------------------------- fitting


def thread_count(default: Optional[int] = None) -> int:
    env = os.environ.get("PHASELESS_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return default or min(8, os.cpu_count() or 1)


@dataclass(frozen=True)
class FitConfig:
    """Settings for the multi-start fitter.

    ``step_rule`` is ``"bb"`` (Barzilai-Borwein trial step, then Armijo
    backtracking) or ``"backtrack"`` (previous step doubled, then Armijo
    backtracking).  Iteration stops when the scaled loss drops below ``tol``
    or the gradient norm below ``gtol``.
    """

    n_basis: int = 4
    restarts: int = 8
    max_iters: int = 2000
    step_rule: str = "bb"
    tol: float = 1e-24
    gtol: float = 1e-15
    seed: int = 0
    threads: Optional[int] = None

    def __post_init__(self):
        if self.n_basis < 1:
            raise ValueError("n_basis must be at least 1")
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not self.tol > 0 or not self.gtol > 0:
            raise ValueError("tolerances must be positive")
        if self.step_rule not in ("bb", "backtrack"):
            raise ValueError("step_rule must be 'bb' or 'backtrack'")

    def to_dict(self) -> dict:
        return {
            "n_basis": self.n_basis,
            "restarts": self.restarts,
            "max_iters": self.max_iters,
            "step_rule": self.step_rule,
            "tol": self.tol,
            "gtol": self.gtol,
            "seed": self.seed,
        }


class FitProblem:
    """Quartic loss ``sum (|B c|^2 - m^2)^2 / sum m^4`` for a fixed design matrix.

    ``B[i, k] = V_w h_k(lambda_i)``.  The gradient is returned as one complex
    vector whose real and imaginary parts are the partial derivatives with
    respect to ``Re c`` and ``Im c``.
    """

    def __init__(self, samples: TFSampleSet, w: WindowSpec, n_basis: int, t0=None, dt=None, n=None):
        grid = {}
        if t0 is not None:
            grid = {"t0": t0, "dt": dt, "n": n}
        self.grid = grid
        self.n_basis = n_basis
        eye = np.eye(n_basis)
        self.B = np.stack(
            [stft_points(hermite_mixture(eye[k], **grid), w, samples.points) for k in range(n_basis)],
            axis=1,
        )
        self.m2 = samples.magnitudes ** 2
        s = float(np.sum(self.m2 ** 2))
        self.scale = s if s > 0 else 1.0

    def loss_grad(self, c):
        V = self.B @ c
        r = (V.real ** 2 + V.imag ** 2) - self.m2
        loss = float(np.dot(r, r)) / self.scale
        grad = 4.0 * (self.B.conj().T @ (r * V)) / self.scale
        return loss, grad

    def loss(self, c) -> float:
        return self.loss_grad(np.asarray(c, dtype=complex))[0]

    def grad(self, c) -> np.ndarray:
        return self.loss_grad(np.asarray(c, dtype=complex))[1]

    def signal(self, c) -> Signal:
        return hermite_mixture(c, **self.grid)


@dataclass
class _Run:
    index: int
    coeffs: np.ndarray
    loss: float
    n_iters: int
    status: str


def _descend(prob: FitProblem, c, cfg: FitConfig, index: int) -> _Run:
    L, g = prob.loss_grad(c)
    step = 1.0
    prev = None
    status = "max_iters"
    it = 0
    for it in range(1, cfg.max_iters + 1):
        if L < cfg.tol or np.linalg.norm(g) < cfg.gtol:
            status = "converged"
            it -= 1
            break
        if prev is not None:
            if cfg.step_rule == "bb":
                ds, dg = c - prev[0], g - prev[1]
                sy = float(np.real(np.vdot(ds, dg)))
                step = float(np.real(np.vdot(ds, ds))) / sy if sy > 0 else 2 * step
            else:
                step *= 2
        gg = float(np.real(np.vdot(g, g)))
        while True:
            cn = c - step * g
            Ln, gn = prob.loss_grad(cn)
            if Ln <= L - 1e-4 * step * gg:
                break
            step *= 0.5
            if step < 1e-300:
                break
        if step < 1e-300:
            status = "stalled"
            break
        prev = (c, g)
        c, L, g = cn, Ln, gn
    else:
        if L < cfg.tol or np.linalg.norm(g) < cfg.gtol:
            status = "converged"
    return _Run(index, c, L, it, status)


def _start(prob: FitProblem, cfg: FitConfig, index: int) -> np.ndarray:
    # one independent stream per restart, so thread scheduling cannot change results
    rng = np.random.default_rng([cfg.seed, index])
    c = rng.standard_normal(cfg.n_basis) + 1j * rng.standard_normal(cfg.n_basis)
    target = float(np.sum(prob.m2))
    if target == 0:
        return np.zeros(cfg.n_basis, dtype=complex)
    V = prob.B @ c
    return c * np.sqrt(target / float(np.sum(np.abs(V) ** 2)))


@dataclass
class FitReport:
    status: str
    loss: float
    n_iters: int
    coeffs: np.ndarray
    seed: int
    restart: int
    aligned_error: Optional[float] = None
    signal: Optional[Signal] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        d = {
            "status": self.status,
            "loss": self.loss,
            "n_iters": self.n_iters,
            "coeffs": [[float(c.real), float(c.imag)] for c in self.coeffs],
            "seed": self.seed,
            "restart": self.restart,
        }
        if self.aligned_error is not None:
            d["aligned_error"] = self.aligned_error
        return d


def fit_from_samples(samples: TFSampleSet, w: WindowSpec, cfg: FitConfig = FitConfig(),
                     truth: Optional[Signal] = None) -> FitReport:
    """Recover Hermite coefficients from phaseless samples.

    Restarts run concurrently (``cfg.threads`` or ``PHASELESS_THREADS``); the
    best run is chosen by ``(loss, restart index)``.  Failure to converge is
    reported in ``status``.
    """
    grid = {}
    if truth is not None:
        grid = {"t0": truth.t0, "dt": truth.dt, "n": len(truth)}
    prob = FitProblem(samples, w, cfg.n_basis, **grid)

    def job(i):
        return _descend(prob, _start(prob, cfg, i), cfg, i)

    n_threads = min(cfg.restarts, thread_count(cfg.threads))
    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            runs = list(pool.map(job, range(cfg.restarts)))
    else:
        runs = [job(i) for i in range(cfg.restarts)]
    best = min(runs, key=lambda r: (r.loss, r.index))
    sig = prob.signal(best.coeffs)
    err = None
    if truth is not None:
        try:
            err = phase_align(truth, sig)[1]
        except ValueError:
            # zero truth or zero fit: distance is 0 only if both vanish
            err = 0.0 if truth.norm() == sig.norm() == 0 else 1.0
    return FitReport(best.status, best.loss, best.n_iters, best.coeffs, cfg.seed, best.index, err, sig)


# --------------------------------------------------------------------------- distinguishing


@dataclass(frozen=True)
class DistinguishReport:
    max_dev: float
    argmax: tuple
    aligned_distance: float

    def to_dict(self) -> dict:
        return {
            "max_dev": self.max_dev,
            "argmax": {"x": self.argmax[0], "omega": self.argmax[1]},
            "aligned_distance": self.aligned_distance,
        }


def distinguish(f: Signal, h: Signal, w: WindowSpec, pts) -> DistinguishReport:
    """Largest gap between ``|V_w f|`` and ``|V_w h|`` on ``pts``, plus the phase-aligned distance.

    ``h`` is resampled onto the grid of ``f`` when the grids differ.
    """
    P = np.asarray(pts.points if isinstance(pts, PointSet) else pts, dtype=float).reshape(-1, 2)
    dev = np.abs(np.abs(stft_points(f, w, P)) - np.abs(stft_points(h, w, P)))
    i = int(np.argmax(dev))
    try:
        f._check_same_grid(h)
        h_on_f = h
    except GridError:
        h_on_f = f.with_values(_interp(h, f.t))
    _, dist = phase_align(f, h_on_f)
    return DistinguishReport(float(dev[i]), (float(P[i, 0]), float(P[i, 1])), dist)
