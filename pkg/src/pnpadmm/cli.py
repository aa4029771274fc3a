"""Command-line harness: run presets, analyze traces, demo PGS envelopes."""

from __future__ import annotations

import argparse
import concurrent.futures
import sys
from pathlib import Path

import numpy as np

from . import fileio
from .denoisers import estimate_denoiser_bound_constant
from .fidelity import estimate_gradient_bound
from .presets import (
    DENOISERS,
    PRESET_NAMES,
    ExperimentPreset,
    make_preset,
    run_preset,
    with_snapshots,
)
from .sequences import (
    BoundConstructionError,
    ConditionTrace,
    PgsSpec,
    cauchy_index,
    classify_case,
    construct_s12_bound,
    construct_s3_bound,
    estimate_growth_coefficient,
    pgs_chunk_sum_bound,
    pgs_generate,
    verify_bound,
)
from .solver import ConditionFlag, fixed_point_residual

_CONFIG_KEYS = {
    "lam": float,
    "lambda": float,
    "rho0": float,
    "gamma": float,
    "eta": float,
    "max_iter": int,
    "delta_tol": float,
    "seed": int,
    "noise_sigma": float,
    "blur_size": int,
    "downsample_factor": int,
    "image_size": int,
    "image": str,
    "denoiser": str,
    "preset": str,
}


def _preset_from_args(args) -> ExperimentPreset:
    overrides: dict = {}
    name = args.preset
    if args.config:
        raw = fileio.parse_config(args.config)
        for key, value in raw.items():
            if key not in _CONFIG_KEYS:
                raise ValueError(f"unknown config key {key!r}")
            conv = _CONFIG_KEYS[key]
            if key == "preset":
                name = value
            elif key == "lambda":
                overrides["lam"] = float(value)
            elif key == "image":
                overrides["image_source"] = value
            else:
                overrides[key] = conv(value)
    if name is None:
        raise ValueError("no preset given (use --preset or preset= in the config)")
    for flag in ("eta", "gamma", "rho0", "max_iter", "noise_sigma", "seed", "denoiser"):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[flag] = value
    if getattr(args, "lam", None) is not None:
        overrides["lam"] = args.lam
    if getattr(args, "image", None) is not None:
        overrides["image_source"] = args.image
    return make_preset(name, **overrides)


def _summarize(result) -> str:
    trace = result.trace
    cfg = trace.config
    cond = ConditionTrace.from_run_trace(trace)
    lines = [
        f"preset = {result.preset.name}",
        f"iterations = {len(trace)}",
        f"stop_reason = {trace.stop_reason}",
        f"final_delta = {trace.records[-1].delta:.6e}",
        f"final_rho = {trace.records[-1].rho:.6e}",
    ]
    window = min(40, max(1, len(cond.flags)))
    if cond.flags:
        label = classify_case(cond, window)
        lines.append(f"case = {label.label} (window {window}; {label.caveat})")
    if trace.iterates is not None:
        box_rng = np.random.default_rng(cfg.seed + 1)
        samples = [t.x for t in trace.iterates]
        samples += [
            box_rng.uniform(0, 1, result.op.in_dim) for _ in range(16)
        ]
        m = estimate_gradient_bound(
            result.fidelity, samples, region="trajectory plus [0,1]^d samples"
        )
        lines.append(f"gradient_bound_m_hat = {m.m_hat:.6e} ({m.region})")
    est = estimate_denoiser_bound_constant(
        result.preset.denoiser, 16, 16, (0.05, 0.1, 0.2), 20, cfg.seed + 2
    )
    lines.append(f"denoiser_bound_k_hat = {est.k_hat:.6e} (16x16 noise samples)")
    fp = fixed_point_residual(result.fidelity, result.preset.denoiser, trace)
    lines.append(f"fixed_point_residual = {fp.residual:.6e}")
    return "\n".join(lines) + "\n"


def _run_one(preset: ExperimentPreset, out_dir: Path) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    result = run_preset(with_snapshots(preset))
    fileio.write_trace_csv(result.trace.records, out_dir / "trace.csv")
    fileio.save_image(result.restored, out_dir / "restored.pgm")
    (out_dir / "summary.txt").write_text(_summarize(result))
    fileio.write_config(
        {
            "preset": preset.name,
            "lambda": preset.config.lam,
            "rho0": preset.config.rho0,
            "gamma": preset.config.gamma,
            "eta": preset.config.eta,
            "max_iter": preset.config.max_iter,
            "delta_tol": preset.config.delta_tol,
            "seed": preset.config.seed,
            "noise_sigma": preset.noise_sigma,
            "denoiser": getattr(preset.denoiser, "name", "custom"),
        },
        out_dir / "run_config.txt",
    )
    return out_dir / "trace.csv"


def cmd_run(args) -> int:
    preset = _preset_from_args(args)
    out_dir = Path(args.out)
    if args.sweep:
        values = [float(v) for v in args.sweep.split(",")]
        jobs = []
        with concurrent.futures.ThreadPoolExecutor(max_workers=len(values)) as pool:
            for v in values:
                sub = make_preset(preset.name, eta=v, **_sweep_base(preset))
                jobs.append(pool.submit(_run_one, sub, out_dir / f"eta={v:g}"))
            for job in jobs:
                job.result()
        print(f"wrote {len(values)} runs under {out_dir}")
        return 0
    trace_path = _run_one(preset, out_dir)
    print(f"wrote {trace_path}")
    return 0


def _sweep_base(preset: ExperimentPreset) -> dict:
    cfg = preset.config
    return dict(
        lam=cfg.lam,
        rho0=cfg.rho0,
        gamma=cfg.gamma,
        max_iter=cfg.max_iter,
        delta_tol=cfg.delta_tol,
        seed=cfg.seed,
        denoiser=preset.denoiser,
        image_source=preset.image_source,
        image_size=preset.image_size,
        blur_size=preset.blur_size,
        downsample_factor=preset.downsample_factor,
        noise_sigma=preset.noise_sigma,
    )


def _condition_trace_from_csv(path, gamma: float | None, eta: float | None) -> ConditionTrace:
    records = fileio.read_trace_csv(path)
    if len(records) < 2:
        raise BoundConstructionError("insufficient iterations for bound construction")
    if gamma is None:
        gamma = fileio.infer_gamma(records)
    if eta is None:
        eta = fileio.infer_eta(records)
    if gamma is None:
        # no C1 record constrains gamma; any value > 1 is consistent
        gamma = 2.0
    cond = ConditionTrace(
        deltas=np.array([r.delta for r in records]),
        rhos=np.array([r.rho for r in records]),
        flags=tuple(r.condition for r in records[1:]),
        gamma=gamma,
        eta=eta,
    )
    cond.validate()
    return cond


def cmd_analyze(args) -> int:
    cond = _condition_trace_from_csv(args.trace, args.gamma, args.eta)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    n = len(cond)
    window = min(args.window, max(1, n - 1))
    label = classify_case(cond, window)
    has_c1 = ConditionFlag.C1 in cond.flags
    c = estimate_growth_coefficient(cond) if has_c1 else None

    mode = args.mode
    bound_kind = None
    bound_seq = None
    start = None
    note = ""
    if mode in ("auto", "s3"):
        try:
            pgs = construct_s3_bound(cond, c if c is not None else 1.0)
            if c is None:
                raise BoundConstructionError("no C1 iterations to calibrate c")
            bound_kind = "pgs"
            bound_seq = pgs.sequence(n)
            start = pgs.n1 + 1
            spec = pgs.spec
        except BoundConstructionError as exc:
            if mode == "s3":
                raise
            note = f"falling back to geometric bound: {exc}"
    if bound_seq is None:
        geo = construct_s12_bound(cond, c)
        bound_kind = "geometric"
        bound_seq = geo.sequence(n)
        start = geo.start + 1
        spec = PgsSpec(
            beta=geo.rate,
            peak0=float(bound_seq[min(start, n) - 1]) if start <= n else geo.scale,
            chunk_starts=(max(1, start - 1),),
        )

    check = verify_bound(cond.deltas, bound_seq, start=min(start, n))
    cert = cauchy_index(spec.peak0, spec.beta, args.epsilon, spec.chunk_starts)

    with np.errstate(divide="ignore", invalid="ignore"):
        margins = np.where(bound_seq > 0, cond.deltas / bound_seq, np.inf)
    lines = ["iter,delta,bound,margin"]
    for i in range(n):
        if i + 1 >= start:
            lines.append(
                f"{i + 1},{format(cond.deltas[i], '.17g')},"
                f"{format(bound_seq[i], '.17g')},{format(margins[i], '.17g')}"
            )
        else:
            lines.append(f"{i + 1},{format(cond.deltas[i], '.17g')},,")
    (out_dir / "bound.csv").write_text("\n".join(lines) + "\n")

    report = [
        f"trace = {args.trace}",
        f"iterations = {n}",
        f"case = {label.label} (window {window}; {label.caveat})",
        f"bound_kind = {bound_kind}",
        f"bound_start = {start}",
        f"bound_holds = {check.holds}",
        f"worst_margin = {check.worst_margin:.17g}",
        f"growth_coefficient_c = {c if c is not None else 'undefined (no C1)'}",
        f"cauchy_epsilon = {cert.epsilon:g}",
        f"cauchy_chunk_count = {cert.k_index}",
        f"cauchy_start_index = {cert.n_start}",
        f"cauchy_tail_bound = {cert.tail_bound:.17g}",
    ]
    if note:
        report.append(f"note = {note}")
    (out_dir / "bound_report.txt").write_text("\n".join(report) + "\n")
    print(f"bound {bound_kind}: holds={check.holds} worst_margin={check.worst_margin:.6g}")
    return 0 if check.holds else 1


def cmd_pgs_demo(args) -> int:
    lengths = [int(v) for v in args.chunk_lengths.split(",")]
    if any(v < 1 for v in lengths):
        raise ValueError("chunk lengths must be >= 1")
    starts = [1]
    for ln in lengths:
        starts.append(starts[-1] + ln)
    spec = PgsSpec(beta=args.beta, peak0=args.peak, chunk_starts=tuple(starts))
    y = pgs_generate(spec, args.length)
    partial = np.cumsum(y)
    # chunk bound column repeats each chunk's closed-form sum bound
    starts_ext = starts + list(range(starts[-1] + 1, args.length + 1))
    chunk_of = np.empty(args.length, dtype=int)
    for j, (lo, hi) in enumerate(zip(starts_ext, starts_ext[1:] + [args.length])):
        chunk_of[lo : min(hi, args.length)] = j + 1
    chunk_of[: min(starts[0], args.length)] = 1
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    lines = ["k,y,partial_sum,chunk_bound"]
    for k in range(1, args.length + 1):
        cb = pgs_chunk_sum_bound(spec, int(chunk_of[k - 1]))
        lines.append(
            f"{k},{format(y[k - 1], '.17g')},{format(partial[k - 1], '.17g')},"
            f"{format(cb, '.17g')}"
        )
    out.write_text("\n".join(lines) + "\n")
    cert = cauchy_index(spec.peak0, spec.beta, args.epsilon, spec.chunk_starts)
    print(
        f"wrote {out}; tail sums from index {cert.n_start} stay below "
        f"{cert.tail_bound:.6g} < epsilon={cert.epsilon:g}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="pnpadmm",
        description="Plug-and-play ADMM restoration runs and residual-envelope analysis",
    )
    sub = p.add_subparsers(dest="command", required=True)

    pr = sub.add_parser("run", help="degrade an image, solve, write trace and summary")
    pr.add_argument("--preset", choices=PRESET_NAMES)
    pr.add_argument("--config", help="flat key=value config file")
    pr.add_argument("--out", required=True)
    pr.add_argument("--eta", type=float)
    pr.add_argument("--gamma", type=float)
    pr.add_argument("--lambda", dest="lam", type=float)
    pr.add_argument("--rho0", type=float)
    pr.add_argument("--max-iter", dest="max_iter", type=int)
    pr.add_argument("--noise-sigma", dest="noise_sigma", type=float)
    pr.add_argument("--seed", type=int)
    pr.add_argument("--image", help="PGM file to restore instead of the builtin pattern")
    pr.add_argument("--denoiser", choices=sorted(DENOISERS))
    pr.add_argument("--sweep", help="comma-separated eta values, one run each")
    pr.set_defaults(func=cmd_run)

    pa = sub.add_parser("analyze", help="build and verify a residual envelope")
    pa.add_argument("--trace", required=True)
    pa.add_argument("--mode", choices=("auto", "s3", "s12"), default="auto")
    pa.add_argument("--out", required=True)
    pa.add_argument("--epsilon", type=float, default=1e-3)
    pa.add_argument("--window", type=int, default=40)
    pa.add_argument("--gamma", type=float, help="override the inferred growth factor")
    pa.add_argument("--eta", type=float, help="override the inferred threshold")
    pa.set_defaults(func=cmd_analyze)

    pd = sub.add_parser("pgs-demo", help="emit a piecewise geometric sequence as CSV")
    pd.add_argument("--beta", type=float, required=True)
    pd.add_argument("--peak", type=float, default=1.0)
    pd.add_argument("--chunk-lengths", dest="chunk_lengths", default="2,3,4,5")
    pd.add_argument("--length", type=int, default=50)
    pd.add_argument("--epsilon", type=float, default=1e-3)
    pd.add_argument("--out", required=True)
    pd.set_defaults(func=cmd_pgs_demo)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
