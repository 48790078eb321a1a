"""Command-line driver: ``phaseless <command> [options]``.

Exit codes: 0 success, 1 usage error, 2 violated precondition, 3 numerical failure.
JSON reports carry the command, the library version and the full configuration;
wall-clock data sits under the separate ``run`` key so that everything else is
reproducible byte for byte.
"""
from __future__ import annotations

import argparse
import sys
import time
from datetime import datetime, timezone
from math import pi, sqrt

import numpy as np

from . import __version__
from . import io as pio
from .analysis import (
    EntireEval,
    SqrtSequence,
    counterexample_build,
    counterexample_table,
    envelope_sup,
    jensen_check,
)
from .lattices import (
    SL2Mat,
    SqrtLattice,
    als_preset,
    generate,
    matrix_from_preset,
    parse_matrix,
    rect_thresholds,
    sl2_threshold,
)
from .retrieval import (
    AnchorError,
    DeconvolutionError,
    FitConfig,
    distinguish,
    fit_from_samples,
    phase_align,
    reconstruct,
)
from .stft import Signal, hermite_mixture, random_mixture, sample_phaseless, window_signal
from .windows import GrowthEnvelope, envelope_fit, gaussian, hermite, polygaussian

EXIT_USAGE, EXIT_PRECONDITION, EXIT_NUMERICAL = 1, 2, 3


class UsageError(ValueError):
    """Malformed command-line value (bad spec string, unsupported format)."""


class NumericalFailure(RuntimeError):
    """The computation ran but did not reach its target (e.g. fit not converged)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# --------------------------------------------------------------------------- spec strings


def _floats(text, what):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"cannot parse {what} {text!r}") from None


def parse_window(text: str):
    """``gaussian[:gamma]``, ``hermite:n``, ``poly:gamma:c0,c1,...`` or ``file:path.json``."""
    name, _, arg = text.partition(":")
    try:
        if name == "gaussian":
            return gaussian(float(arg)) if arg else gaussian()
        if name == "hermite":
            return hermite(int(arg or 0))
        if name == "poly":
            g, _, cs = arg.partition(":")
            return polygaussian(_floats(cs, "coefficients"), float(g))
        if name == "file":
            return pio.load_window(arg)
    except (TypeError, KeyError) as exc:
        raise UsageError(f"bad window spec {text!r}: {exc}") from None
    except ValueError as exc:
        if isinstance(exc, UsageError):
            raise
        raise UsageError(f"bad window spec {text!r}: {exc}") from None
    raise UsageError(f"unknown window kind {name!r}")


def parse_signal(text: str) -> Signal:
    """``+``-separated terms.

    Basis terms are summed: ``hermite:n``, ``hermite:n@re,im``, ``gaussian:gamma``,
    ``random:seed:nbasis``, ``file:path.json``.  Modifiers act on the sum:
    ``phase:theta`` multiplies by ``exp(i theta)``, ``shift:s`` translates.
    """
    terms, phase, shifts = [], 0.0, []
    for tok in (t.strip() for t in text.split("+")):
        if not tok:
            raise UsageError(f"empty term in signal spec {text!r}")
        name, _, arg = tok.partition(":")
        try:
            if name == "hermite":
                n_txt, _, c_txt = arg.partition("@")
                n = int(n_txt)
                c = complex(*_floats(c_txt, "coefficient")) if c_txt else 1.0
                coeffs = np.zeros(n + 1, dtype=complex)
                coeffs[n] = c
                terms.append(hermite_mixture(coeffs))
            elif name == "gaussian":
                terms.append(window_signal(gaussian(float(arg)) if arg else gaussian()))
            elif name == "random":
                seed, _, nb = arg.partition(":")
                terms.append(random_mixture(np.random.default_rng(int(seed)), int(nb or 4)))
            elif name == "file":
                terms.append(pio.load_signal(arg))
            elif name == "phase":
                phase += float(arg)
            elif name == "shift":
                shifts.append(float(arg))
            else:
                raise UsageError(f"unknown signal term {name!r}")
        except UsageError:
            raise
        except (TypeError, ValueError) as exc:
            raise UsageError(f"bad signal term {tok!r}: {exc}") from None
    if not terms:
        raise UsageError(f"signal spec {text!r} has no basis term")
    f = terms[0]
    for g in terms[1:]:
        f = f.with_values(f.values + g.values)
    for s in shifts:
        f = f.shifted(s)
    if phase:
        f = f.scaled(np.exp(1j * phase))
    return f


def _lattice_matrix(args) -> np.ndarray:
    """Generating matrix from ``--matrix`` or a ``--lattice`` preset (``als`` excluded)."""
    if args.matrix:
        try:
            return args.alpha * parse_matrix(args.matrix)
        except ValueError as exc:
            raise UsageError(f"bad matrix {args.matrix!r}: {exc}") from None
    spec = args.lattice or "rect"
    name, _, arg = spec.partition(":")
    try:
        if name == "matrix":
            return args.alpha * parse_matrix(arg)
        if name == "rect" and arg:
            vals = _floats(arg, "spacing")
            if len(vals) not in (1, 2):
                raise UsageError("rect takes one or two spacings")
        return matrix_from_preset(spec, args.alpha)
    except UsageError:
        raise
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def build_points(args):
    if (args.lattice or "") == "als":
        return als_preset(args.nmax)
    return generate(SqrtLattice(_lattice_matrix(args), args.radius))


# --------------------------------------------------------------------------- output


def _config(args) -> dict:
    skip = {"func", "out", "format"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _report(args, result: dict, t_start: float) -> dict:
    return {
        "command": args.command,
        "version": __version__,
        "config": _config(args),
        "result": result,
        "run": {
            "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            "elapsed_s": round(time.perf_counter() - t_start, 6),
        },
    }


def _emit(args, text: str, meta: dict = None):
    if args.out:
        pio.atomic_write(args.out, text)
        if meta is not None:
            pio.atomic_write(args.out + ".meta.json", pio.dumps(meta))
    else:
        sys.stdout.write(text)


def _finish(args, result: dict, t_start: float, csv_text: str = None):
    report = _report(args, result, t_start)
    if args.format == "csv":
        if csv_text is None:
            raise UsageError(f"{args.command} has no CSV output; use --format json")
        meta = dict(report)
        meta.pop("result")
        _emit(args, csv_text, meta)
    else:
        _emit(args, pio.dumps(report))


# --------------------------------------------------------------------------- commands


def cmd_lattice(args, t0):
    ps = build_points(args)
    result = {
        "count": len(ps),
        "matrix": None if ps.matrix is None else ps.matrix,
        "points": ps.points,
        "indices": ps.indices,
    }
    _finish(args, result, t0, pio.pointset_csv(ps))


def _envelope(args):
    if args.envelope:
        a, b = _floats(args.envelope, "envelope")
        return GrowthEnvelope(a, b), {"a": a, "b": b, "source": "given"}
    w = parse_window(args.window)
    env = GrowthEnvelope(w.gamma, w.gamma)
    fit = envelope_fit(w, w.gamma, w.gamma)
    info = {"a": w.gamma, "b": w.gamma, "source": "window", "verdict": fit.verdict}
    if w.variant != "gaussian":
        info["note"] = "polynomial factor: rates are limits, any smaller a and larger b are valid"
    return env, info


def cmd_thresholds(args, t0):
    env, env_info = _envelope(args)
    result = {"envelope": env_info}
    A = _lattice_matrix(args)
    det = float(np.linalg.det(A))
    diagonal = abs(A[0, 1]) < 1e-15 and abs(A[1, 0]) < 1e-15
    if diagonal:
        spacing = (abs(A[0, 0]), abs(A[1, 1]))
        result["rect"] = rect_thresholds(env, spacing).to_dict()
    if det > 0:
        alpha = sqrt(det)
        S = SL2Mat.from_matrix(A / alpha)
        cons = sl2_threshold(S, "conservative", alpha)
        prin = sl2_threshold(S, "printed", alpha)
        result["sl2_conservative"] = cons.to_dict()
        result["sl2_printed"] = prin.to_dict()
        result["variants_differ"] = bool(abs(cons.alpha_max - prin.alpha_max) > 1e-12)
        standard = args.envelope is None and abs(env.a[0] - pi) < 1e-12
        if not standard:
            result["sl2_note"] = "SL(2) bounds assume the standard Gaussian window"
        result["admissible"] = bool(cons.admissible) if not diagonal else bool(result["rect"]["admissible"])
    else:
        result["admissible"] = bool(result.get("rect", {}).get("admissible", False))
    _finish(args, result, t0)


def cmd_sample(args, t0):
    f = parse_signal(args.signal)
    w = parse_window(args.window)
    s = sample_phaseless(f, w, build_points(args))
    result = {"points": s.points, "magnitudes": s.magnitudes}
    _finish(args, result, t0, pio.samples_csv(s))


def cmd_distinguish(args, t0):
    f, h = parse_signal(args.f), parse_signal(args.h)
    rep = distinguish(f, h, parse_window(args.window), build_points(args))
    _finish(args, rep.to_dict(), t0)


def cmd_reconstruct(args, t0):
    f = parse_signal(args.signal)
    rec = reconstruct(f, parse_window(args.window), M=args.M, eps_rel=args.eps_rel,
                      floor=args.floor, precision=args.precision)
    tau, err = phase_align(f, rec.signal)
    result = {
        "aligned_error": err,
        "tau": tau,
        "anchor": rec.anchor,
        "kept_shifts": int(np.count_nonzero(rec.ambiguity.kept)),
    }
    sig = rec.signal
    csv_text = pio.table_csv(["t", "re", "im"], np.column_stack([sig.t, sig.values.real, sig.values.imag]))
    _finish(args, result, t0, csv_text)


def cmd_fit(args, t0):
    w = parse_window(args.window)
    truth = None
    if args.samples:
        samples = pio.read_samples_csv(args.samples)
        if args.truth:
            truth = parse_signal(args.truth)
    elif args.truth:
        truth = parse_signal(args.truth)
        samples = sample_phaseless(truth, w, build_points(args))
    else:
        raise UsageError("fit needs --truth or --samples")
    cfg = FitConfig(n_basis=args.nbasis, restarts=args.restarts, max_iters=args.max_iters,
                    step_rule=args.step_rule, tol=args.tol, seed=args.seed)
    rep = fit_from_samples(samples, w, cfg, truth)
    result = rep.to_dict()
    result["n_samples"] = len(samples)
    _finish(args, result, t0)
    if rep.status != "converged":
        raise NumericalFailure(f"fit ended with status {rep.status!r}")


def cmd_counterexample(args, t0):
    seq = SqrtSequence(args.beta, K=args.K)
    ce = counterexample_build(seq, args.b, args.kmax, disk=args.disk, tail_tol=args.tail_tol)
    lam = seq.lam(np.arange(1, args.kmax + 1))
    resid = float(np.max(np.abs(np.concatenate([ce.F(lam), ce.F(-lam)]))))
    k_mid = min(10, args.kmax - 1)
    mid = 0.5 * (lam[:k_mid] + lam[1:k_mid + 1])
    sup = envelope_sup(ce.F, args.b, args.disk)
    ce2 = counterexample_build(seq, args.b, 2 * args.kmax, disk=args.disk, tail_tol=args.tail_tol)
    sup2 = envelope_sup(ce2.F, args.b, args.disk)
    result = {
        "tail_bound": ce.tail_bound,
        "F0": ce.F(0.0),
        "zero_residual_max": resid,
        "midpoint_min": float(np.min(np.abs(ce.F(mid)))) if k_mid > 0 else None,
        "envelope_sup": sup,
        "envelope_sup_doubled": sup2,
        "envelope_change": abs(sup2 - sup) / sup,
    }
    axis = np.linspace(-args.disk, args.disk, args.grid)
    z = (axis[:, None] + 1j * axis[None, :]).ravel()
    z = z[np.abs(z) <= args.disk * (1 + 1e-12)]
    _finish(args, result, t0, pio.table_csv(pio.COUNTEREXAMPLE_HEADER, counterexample_table(ce, z)))


def _complex_list(text):
    try:
        return [complex(v.replace(" ", "")) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"cannot parse zeros {text!r}") from None


def cmd_jensen(args, t0):
    zeros = np.array(_complex_list(args.zeros)) if args.zeros else np.zeros(0, dtype=complex)
    if np.any(zeros == 0):
        raise ValueError("a zero at the origin makes F(0) = 0")
    scale = args.scale

    def fn(z):
        z = np.asarray(z, dtype=complex)
        return scale * np.prod(1 - z[..., None] / zeros, axis=-1)

    F = EntireEval(fn, tuple(zeros.tolist()), label="polynomial")
    rows = []
    for r in _floats(args.radii, "radii"):
        jr = jensen_check(F, r, args.ntheta)
        rows.append({"r": r, "lhs": jr.lhs, "rhs": jr.rhs, "gap": jr.gap,
                     "n_theta": jr.n_theta, "n_zeros": jr.n_zeros})
    table = [[d["r"], d["lhs"], d["rhs"], d["gap"], d["n_theta"], d["n_zeros"]] for d in rows]
    csv_text = pio.table_csv(["r", "lhs", "rhs", "gap", "n_theta", "n_zeros"], table)
    _finish(args, {"results": rows}, t0, csv_text)


# --------------------------------------------------------------------------- parser


def _lattice_opts(p, radius=4.0):
    p.add_argument("--lattice", "--preset", dest="lattice", default=None,
                   help="rect | rect:alpha | rect:tau,nu | rotate:theta | shear:sigma | als | matrix:a,b,c,d")
    p.add_argument("--matrix", default=None, help="generating matrix, row-major 'a,b,c,d' or 'I'")
    p.add_argument("--alpha", type=float, default=1.0, help="scale applied to preset/matrix")
    p.add_argument("--radius", type=float, default=radius)
    p.add_argument("--nmax", type=int, default=10, help="index range for the als preset")


def build_parser() -> argparse.ArgumentParser:
    def globals_(defaults: bool):
        # flags are accepted before or after the subcommand; only the top level
        # sets defaults so a later subparser cannot overwrite an earlier value
        g = argparse.ArgumentParser(add_help=False)
        kw = (lambda v: {"default": v}) if defaults else (lambda v: {"default": argparse.SUPPRESS})
        g.add_argument("--seed", type=int, **kw(0))
        g.add_argument("--out", help="output file (default stdout)", **kw(None))
        g.add_argument("--format", choices=("csv", "json"), **kw(None))
        return g

    common = globals_(False)
    parser = _Parser(prog="phaseless", description=__doc__.splitlines()[0], parents=[globals_(True)])
    parser.add_argument("--version", action="version", version=f"phaseless {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("lattice", parents=[common], help="enumerate a square-root lattice")
    _lattice_opts(p, radius=3.0)
    p.set_defaults(func=cmd_lattice, default_format="csv")

    p = sub.add_parser("thresholds", parents=[common], help="admissible sampling densities")
    p.add_argument("--window", default="gaussian")
    p.add_argument("--envelope", default=None, help="'a,b' decay/growth rates instead of a window")
    _lattice_opts(p)
    p.set_defaults(func=cmd_thresholds, default_format="json")

    p = sub.add_parser("sample", parents=[common], help="phaseless STFT samples on a lattice")
    p.add_argument("--signal", required=True)
    p.add_argument("--window", default="hermite:0")
    _lattice_opts(p)
    p.set_defaults(func=cmd_sample, default_format="csv")

    p = sub.add_parser("distinguish", parents=[common], help="compare two signals' phaseless samples")
    p.add_argument("--f", required=True)
    p.add_argument("--h", required=True)
    p.add_argument("--window", default="hermite:0")
    _lattice_opts(p)
    p.set_defaults(func=cmd_distinguish, default_format="json")

    p = sub.add_parser("reconstruct", parents=[common], help="invert a full spectrogram")
    p.add_argument("--signal", required=True)
    p.add_argument("--window", default="hermite:0")
    p.add_argument("--M", type=int, default=2048, help="frequency nodes")
    p.add_argument("--eps-rel", dest="eps_rel", type=float, default=1e-11)
    p.add_argument("--floor", type=float, default=1e-11)
    p.add_argument("--precision", choices=("double", "extended"), default="extended")
    p.set_defaults(func=cmd_reconstruct, default_format="json")

    p = sub.add_parser("fit", parents=[common], help="fit Hermite coefficients to phaseless samples")
    p.add_argument("--truth", default=None)
    p.add_argument("--samples", default=None, help="TFSampleSet CSV instead of sampling --truth")
    p.add_argument("--window", default="hermite:0")
    p.add_argument("--nbasis", type=int, default=4)
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--max-iters", dest="max_iters", type=int, default=2000)
    p.add_argument("--step-rule", dest="step_rule", choices=("bb", "backtrack"), default="bb")
    p.add_argument("--tol", type=float, default=1e-24)
    _lattice_opts(p)
    p.set_defaults(func=cmd_fit, default_format="json")

    p = sub.add_parser("counterexample", parents=[common], help="Weierstrass-product witness")
    p.add_argument("--beta", type=float, default=2.0)
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--kmax", type=int, default=500)
    p.add_argument("--K", type=int, default=1)
    p.add_argument("--disk", type=float, default=5.0)
    p.add_argument("--tail-tol", dest="tail_tol", type=float, default=0.1)
    p.add_argument("--grid", type=int, default=41, help="nodes per axis for the CSV table")
    p.set_defaults(func=cmd_counterexample, default_format="json")

    p = sub.add_parser("jensen", parents=[common], help="Jensen's formula for a polynomial")
    p.add_argument("--zeros", default="1,-1", help="comma-separated complex zeros, e.g. '1,-1,0.5+0.2j'")
    p.add_argument("--scale", type=float, default=1.0, help="value F(0)")
    p.add_argument("--radii", default="0.5,1.5,2,3")
    p.add_argument("--ntheta", type=int, default=4096)
    p.set_defaults(func=cmd_jensen, default_format="json")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse: usage errors exit 1, --help/--version exit 0
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    if args.format is None:
        args.format = args.default_format
    del args.default_format
    t0 = time.perf_counter()
    try:
        args.func(args, t0)
    except UsageError as exc:
        print(f"phaseless: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalFailure, AnchorError, DeconvolutionError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"phaseless: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, OSError, KeyError, IndexError) as exc:
        print(f"phaseless: precondition failed: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    return 0


if __name__ == "__main__":
    sys.exit(main())
