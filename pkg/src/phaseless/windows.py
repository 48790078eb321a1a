"""Analytic window functions and the Gaussian growth classes they live in.

Every supported window is a polynomial times a Gaussian, ``p(z) exp(-gamma z^2)``,
so evaluation at complex arguments is exact and can be carried out in log space
when the Gaussian factor would overflow or underflow.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial, pi, sqrt
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "WindowSpec",
    "GrowthEnvelope",
    "EnvelopeFit",
    "gaussian",
    "hermite",
    "polygaussian",
    "hermite_poly",
    "eval_window",
    "log_abs_window",
    "envelope_fit",
    "class_after_product",
]

VARIANTS = ("gaussian", "hermite", "polygaussian")


@dataclass(frozen=True)
class WindowSpec:
    """A window ``p(z) exp(-gamma z^2)`` of one of three kinds.

    ``gaussian`` has ``p = 1``; ``hermite`` is the orthonormal Hermite function
    of degree ``n`` (``gamma = pi``); ``polygaussian`` carries explicit complex
    polynomial coefficients in ascending degree.
    """

    variant: str
    gamma: float = pi
    n: int = 0
    coeffs: tuple = ()

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown window variant {self.variant!r}")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.variant == "hermite":
            if self.n < 0 or int(self.n) != self.n:
                raise ValueError("Hermite degree must be a non-negative integer")
            if self.gamma != pi:
                raise ValueError("Hermite windows have gamma = pi")
        if self.variant == "polygaussian":
            cs = tuple(complex(c) for c in self.coeffs)
            if not cs or not any(c != 0 for c in cs):
                raise ValueError("polygaussian needs at least one nonzero coefficient")
            object.__setattr__(self, "coeffs", cs)

    def __call__(self, z):
        return eval_window(self, z)

    def poly(self, z, dtype=complex):
        """Polynomial factor ``p(z)``."""
        z = np.asarray(z, dtype=dtype)
        if self.variant == "gaussian":
            return np.ones_like(z)
        if self.variant == "hermite":
            return hermite_poly(self.n, z)
        # Horner, highest degree first
        out = np.zeros_like(z)
        for c in reversed(self.coeffs):
            out = out * z + c
        return out

    @property
    def is_real(self) -> bool:
        """True when the window is real on the real axis."""
        if self.variant != "polygaussian":
            return True
        return all(c.imag == 0 for c in self.coeffs)

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "gamma": self.gamma,
            "n": int(self.n),
            "coeffs": [[c.real, c.imag] for c in self.coeffs],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WindowSpec":
        variant = d["variant"]
        gamma = float(d.get("gamma", pi))
        if variant == "hermite":
            return cls("hermite", n=int(d.get("n", 0)))
        if variant == "gaussian":
            return cls("gaussian", gamma=gamma)
        coeffs = tuple(complex(re, im) for re, im in d["coeffs"])
        return cls("polygaussian", gamma=gamma, coeffs=coeffs)


def gaussian(gamma: float = pi) -> WindowSpec:
    return WindowSpec("gaussian", gamma=gamma)


def hermite(n: int) -> WindowSpec:
    return WindowSpec("hermite", n=n)


def polygaussian(coeffs: Sequence[complex], gamma: float) -> WindowSpec:
    return WindowSpec("polygaussian", gamma=gamma, coeffs=tuple(coeffs))


def hermite_poly(n: int, z):
    """Polynomial part of the orthonormal Hermite function ``h_n``.

    ``h_n(z) = hermite_poly(n, z) * exp(-pi z^2)``.  Uses the three-term
    recurrence in ``u = sqrt(2 pi) z``:
    ``p_{k+1} = sqrt(2/(k+1)) u p_k - sqrt(k/(k+1)) p_{k-1}``, ``p_0 = 2^{1/4}``.
    """
    z = np.asarray(z)
    if not np.iscomplexobj(z):
        z = z.astype(complex)
    real = np.longdouble if z.dtype == np.clongdouble else float
    u = np.sqrt(real(2) * real(np.pi)) * z
    prev = np.zeros_like(z)
    cur = np.full_like(z, np.power(real(2), real(0.25)))
    for k in range(n):
        prev, cur = cur, np.sqrt(real(2) / (k + 1)) * u * cur - np.sqrt(real(k) / (k + 1)) * prev
    return cur


def eval_window(w: WindowSpec, z, dtype=complex):
    """Value of the analytic window at (complex) ``z``; scalar in, scalar out.

    ``dtype=np.clongdouble`` evaluates in extended precision.  Overflow of the
    Gaussian factor saturates to ``inf`` silently.
    """
    scalar = np.ndim(z) == 0
    z = np.asarray(z, dtype=dtype)
    with np.errstate(over="ignore", invalid="ignore"):
        out = w.poly(z, dtype) * np.exp(-w.gamma * z * z)
    return complex(out) if scalar else out


def log_abs_window(w: WindowSpec, z):
    """``log |w(z)|`` computed without forming the Gaussian factor."""
    z = np.asarray(z, dtype=complex)
    with np.errstate(divide="ignore"):
        return np.log(np.abs(w.poly(z))) - w.gamma * (z * z).real


@dataclass(frozen=True)
class GrowthEnvelope:
    """Decay rates ``a`` (real axis), growth rates ``b`` (imaginary axis), constant ``c``.

    Membership reads ``|F(x+iy)| <= c * prod_j exp(-a_j x_j^2) exp(b_j y_j^2)``.
    ``c`` is ``None`` until estimated.
    """

    a: tuple
    b: tuple
    c: Optional[float] = None

    def __post_init__(self):
        a = tuple(float(v) for v in np.atleast_1d(self.a))
        b = tuple(float(v) for v in np.atleast_1d(self.b))
        if len(a) != len(b):
            raise ValueError("a and b must have equal length")
        if not all(v > 0 for v in a + b):
            raise ValueError("envelope rates must be strictly positive")
        if self.c is not None and not self.c > 0:
            raise ValueError("envelope constant must be positive")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def dim(self) -> int:
        return len(self.a)


@dataclass(frozen=True)
class EnvelopeFit:
    envelope: GrowthEnvelope
    verdict: str  # "bounded" | "growing"
    radii: tuple = field(default=())
    constants: tuple = field(default=())


def _log_ratio_max(w, a, b, radius, step):
    n_half = int(round(radius / step))
    axis = step * np.arange(-n_half, n_half + 1)
    x, y = np.meshgrid(axis, axis, indexing="ij")
    log_ratio = log_abs_window(w, x + 1j * y) + a * x * x - b * y * y
    return float(np.max(log_ratio))


def envelope_fit(
    w: WindowSpec,
    a: float,
    b: float,
    radius: float = 6.0,
    points: int = 121,
    rel_tol: float = 0.01,
) -> EnvelopeFit:
    """Estimate the constant of ``|w(x+iy)| <~ exp(-a x^2 + b y^2)`` on a grid.

    The supremum of ``|w| exp(a x^2 - b y^2)`` is taken over the square
    ``[-R, R]^2`` sampled with ``points`` nodes per axis, then over ``2R`` and
    ``4R`` at the same spacing.  The verdict is ``"bounded"`` when both
    doublings change the supremum by less than ``rel_tol`` (relative).
    """
    if not (a > 0 and b > 0):
        raise ValueError("a and b must be positive")
    if radius < 4:
        raise ValueError("grid radius must be at least 4")
    step = 2.0 * radius / (points - 1)
    radii = (radius, 2 * radius, 4 * radius)
    logs = [_log_ratio_max(w, a, b, r, step) for r in radii]
    consts = tuple(float(np.exp(v)) for v in logs)
    # relative change exp(dlog) - 1, evaluated in log space so growth never overflows
    changes = [np.expm1(logs[i + 1] - logs[i]) for i in range(2)]
    bounded = all(abs(ch) < rel_tol for ch in changes)
    c = consts[-1] if np.isfinite(consts[-1]) else float("inf")
    env = GrowthEnvelope((a,), (b,), c if np.isfinite(c) else None)
    return EnvelopeFit(env, "bounded" if bounded else "growing", radii, consts)


def class_after_product(env: GrowthEnvelope, epsilon) -> GrowthEnvelope:
    """Class of ``G F`` for ``G`` of exponential type: ``(a - eps, b + eps)``."""
    eps = np.broadcast_to(np.asarray(epsilon, dtype=float), (env.dim,))
    a = np.asarray(env.a)
    if np.any(eps <= 0) or np.any(eps >= a):
        raise ValueError("need 0 < epsilon < a componentwise")
    return GrowthEnvelope(tuple(a - eps), tuple(np.asarray(env.b) + eps))
