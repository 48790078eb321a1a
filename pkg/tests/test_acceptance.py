"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line."""
import json
import re
import time
from math import e, pi, sqrt

import numpy as np
import pytest

from phaseless.analysis import (
    EntireEval,
    SqrtSequence,
    counterexample_build,
    envelope_sup,
    jensen_check,
    order_estimate,
    spectrogram_growth,
)
from phaseless.cli import main
from phaseless.lattices import (
    SqrtLattice,
    generate,
    rect_thresholds,
    rotation,
    shear_admissible_root,
    sl2_threshold,
)
from phaseless.retrieval import (
    FitConfig,
    distinguish,
    fit_from_samples,
    phase_align,
    pipeline_omega_grid,
    reconstruct,
    spectro_to_correlation,
)
from phaseless.stft import (
    frft,
    hermite_mixture,
    random_mixture,
    sample_phaseless,
    spectrogram_grid,
    stft_points,
    tensor_product,
    window_signal,
)
from phaseless.windows import GrowthEnvelope, hermite

PHI = hermite(0)
ALPHA_GAUSS = sqrt(1 / (2 * pi * e))


def test_criterion_1_threshold_table(criterion):
    rect = rect_thresholds(GrowthEnvelope((pi,), (pi,)))
    rot = [sl2_threshold(rotation(th)).alpha_max for th in (0.0, 0.3, pi / 4, 1.2)]
    root = shear_admissible_root()
    checks = [
        ("rect tau", abs(rect.tau_max[0] - ALPHA_GAUSS) < 1e-12),
        ("rect nu", abs(rect.nu_max[0] - ALPHA_GAUSS) < 1e-12),
        ("rotations", all(abs(a - ALPHA_GAUSS) < 1e-12 for a in rot)),
        ("shear root value", abs(root - 0.682327803828) < 1e-9),
        ("shear root bracket", 0.67 < root < 0.69),
    ]
    criterion(1, "threshold table", checks, f"alpha_max={rect.tau_max[0]:.12f}, root={root:.7f}")


def test_criterion_2_ambiguity_identity(criterion):
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(5):
        f = random_mixture(rng, int(rng.integers(2, 7)))
        om = pipeline_omega_grid(f)
        Q = spectro_to_correlation(spectrogram_grid(f, PHI, f.t, om), f.t, om)
        n, t = len(f), f.t
        xi = np.arange(n // 4, 3 * n // 4 + 1, 8)  # central half of the x grid
        M = Q.s.size
        ks = np.arange(-M // 4, M // 4 + 1, 16)  # central half of the shift grid
        scale = np.max(np.abs(Q.values))
        for k in ks:
            fs = tensor_product(f, k * f.dt).values if abs(k) < n else np.zeros(n)
            u = t[None, :] - t[xi][:, None]
            phis = PHI(u - k * f.dt) * np.conj(PHI(u))
            direct = (np.conj(phis) @ fs) * f.dt
            worst = max(worst, float(np.max(np.abs(Q.values[xi, k % M] - direct))) / scale)
    criterion(2, "ambiguity identity", [("Q vs direct quadrature", worst < 1e-6)], f"max rel dev={worst:.2e}")


def test_criterion_3_constructive_pipeline(criterion):
    rng = np.random.default_rng(3)
    errs, drift = [], []
    for _ in range(20):
        f = random_mixture(rng, int(rng.integers(1, 7)))
        tau = np.exp(2j * pi * rng.random())
        e1 = phase_align(f, reconstruct(f, PHI).signal)[1]
        e2 = phase_align(f, reconstruct(f.scaled(tau), PHI).signal)[1]
        errs.append(e1)
        drift.append(abs(e1 - e2))
    checks = [("error < 1e-3", max(errs) < 1e-3), ("phase invariance 1e-10", max(drift) < 1e-10)]
    criterion(3, "constructive pipeline", checks, f"max err={max(errs):.2e}, max drift={max(drift):.2e}")


def test_criterion_4_closed_form(criterion):
    rng = np.random.default_rng(4)
    lat = generate(SqrtLattice(0.24 * np.eye(2), 2.0)).points
    lat = lat[np.all(np.abs(lat) <= 2, axis=1)]
    irrational = lat[np.any(np.abs(lat / 0.24 - np.round(lat / 0.24)) > 1e-6, axis=1)]
    pts = np.vstack([rng.uniform(-2, 2, (25, 2)), irrational[rng.choice(len(irrational), 25, replace=False)]])
    got = np.abs(stft_points(window_signal(PHI), PHI, pts))
    want = np.exp(-pi * np.sum(pts ** 2, axis=1) / 2)
    dev = float(np.max(np.abs(got - want)))
    criterion(4, "Gaussian closed form", [("50 points within 1e-8", dev < 1e-8)], f"max dev={dev:.2e}")


def test_criterion_5_distinguishability(criterion, lattice_024):
    rng = np.random.default_rng(5)
    devs = []
    while len(devs) < 10:
        f, h = random_mixture(rng, 4), random_mixture(rng, 4)
        rep = distinguish(f, h, PHI, lattice_024)
        if rep.aligned_distance > 0.1:
            devs.append(rep.max_dev)
    h0 = window_signal(PHI)
    mix = hermite_mixture([0.8, 0.5j, -0.3])
    fits = []
    for truth in (h0, mix):
        s = sample_phaseless(truth, PHI, lattice_024)
        fits.append(fit_from_samples(s, PHI, FitConfig(n_basis=4, seed=7), truth=truth).aligned_error)
    checks = [
        ("max_dev > 1e-3 on all pairs", min(devs) > 1e-3),
        ("fit h_0", fits[0] < 1e-3),
        ("fit 3-term mixture", fits[1] < 1e-3),
    ]
    criterion(5, "distinguishability and fitting", checks,
              f"min max_dev={min(devs):.3f}, fit errors={fits[0]:.1e},{fits[1]:.1e}")


def test_criterion_6_sharpness_witness(criterion):
    seq = SqrtSequence(2.0)
    ce = counterexample_build(seq, 1.0, 500)
    lam = seq.lam(np.arange(1, 101))
    resid = float(np.max(np.abs(ce.F(np.concatenate([lam, -lam])))))
    mid = 0.5 * (lam[:10] + lam[1:11])
    mid_min = float(np.min(np.abs(ce.F(mid))))
    sup = envelope_sup(ce.F, 1.0, 5.0)
    sup2 = envelope_sup(counterexample_build(seq, 1.0, 1000).F, 1.0, 5.0)
    change = abs(sup2 - sup) / sup
    checks = [
        ("zeros below 1e-9", resid < 1e-9),
        ("F(0) = 1", ce.F(0.0) == 1),
        ("midpoints above 1e-3", mid_min > 1e-3),
        ("envelope stable within 1%", np.isfinite(sup) and change < 0.01),
    ]
    criterion(6, "sharpness witness", checks,
              f"zero resid={resid:.1e}, midpoint min={mid_min:.3f}, envelope change={change:.1e}")


def test_criterion_7_jensen_suite(criterion):
    rng = np.random.default_rng(7)
    gaps = []
    for i in range(10):
        roots = rng.uniform(0.2, 3.5, i + 1) * np.exp(2j * pi * rng.random(i + 1))
        coeffs = np.poly(roots) * (1 + i)
        F = EntireEval(lambda z, c=coeffs: np.polyval(c, z), zeros=tuple(roots))
        for r in (0.5, 1.5, 2.0, 3.0):
            if np.min(np.abs(np.abs(roots) - r)) >= 1e-3:
                gaps.append(jensen_check(F, r).gap)
    F2 = EntireEval(lambda z: np.exp(z * z), log_abs=lambda z: (z * z).real)
    rho = order_estimate(F2, [2, 3, 4, 5])
    growth = spectrogram_growth(window_signal(PHI), PHI, GrowthEnvelope((pi,), (pi,)))
    checks = [
        ("Jensen gaps < 1e-6", max(gaps) < 1e-6),
        ("order of exp(z^2)", abs(rho - 2) <= 0.1),
        ("spectrogram growth coefficient", growth.c_fit <= 2 * pi * 1.1),
    ]
    criterion(7, "Jensen suite and growth", checks,
              f"max gap={max(gaps):.1e}, order={rho:.3f}, c={growth.c_fit:.3f}")


def test_criterion_8_frft_covariance(criterion):
    rng = np.random.default_rng(8)
    lat = generate(SqrtLattice(0.24 * np.eye(2), 2.0)).points
    lam = lat[rng.choice(len(lat), 30, replace=False)]
    worst = 0.0
    for _ in range(3):
        f = random_mixture(rng, 6)
        for th in (pi / 6, pi / 4):
            R = rotation(th).matrix
            lhs = np.abs(stft_points(f, PHI, lam @ R.T))
            rhs = np.abs(stft_points(frft(f, th), PHI, lam))
            worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    criterion(8, "fractional Fourier covariance", [("within 1e-5", worst < 1e-5)], f"max dev={worst:.1e}")


DETERMINISM = [
    ["lattice", "--preset", "shear:0.5", "--alpha", "0.13", "--radius", "2", "--format", "json"],
    ["thresholds", "--lattice", "rect:0.24"],
    ["sample", "--signal", "random:11:4", "--lattice", "rect:0.24", "--radius", "3", "--format", "json"],
    ["distinguish", "--f", "hermite:0", "--h", "phase:0.3+hermite:0", "--lattice", "rect:0.24"],
    ["reconstruct", "--signal", "random:12:5"],
    ["fit", "--truth", "hermite:0", "--lattice", "rect:0.24", "--radius", "4", "--nbasis", "4", "--seed", "7"],
    ["counterexample", "--beta", "2", "--b", "1", "--kmax", "500", "--disk", "5"],
    ["jensen", "--zeros", "1,-1,0.5+0.5j"],
]
RUN_BLOCK = re.compile(r'^  "run": \{\n(?:    .*\n)*  \},\n', re.M)


def test_criterion_9_determinism(criterion, tmp_path):
    same = {}
    for argv in DETERMINISM:
        texts = []
        for i in range(2):
            out = tmp_path / f"{argv[0]}{i}.json"
            code = main([*argv, "--out", str(out)])
            text = out.read_text()
            json.loads(text)
            texts.append((code, RUN_BLOCK.sub("", text, count=1)))
        same[argv[0]] = texts[0] == texts[1] and texts[0][0] == 0
    checks = [(name, ok) for name, ok in same.items()]
    criterion(9, "byte-identical reruns", checks, f"{sum(same.values())}/{len(same)} commands")
