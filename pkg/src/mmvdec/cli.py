"""Command-line interface.

Subcommands
-----------
run     Monte-Carlo NMSE sweep; writes per-trial and aggregate CSVs and, by
        default, an NMSE-vs-SNR figure alongside them.
verify  Decoupling identity suite with negative controls; nonzero exit on
        any failed identity.
bench   Per-method wall-clock timings on a single instance, no NMSE.
plot    Render the figure for a previously written CSV.

A plain-text ``key=value`` config file (``--config``) overrides any flag;
keys use the flag names with dashes replaced by underscores.
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import covsolve, estimate, harness, model, verify

SMOKE_DEFAULTS = dict(
    n=16, m_fraction=0.5, t=20, trials=5, snr="0:10:40",
    xi_min=-0.2, xi_max=0.2, grid_sizes="16,32",
    methods="oracle-mmse,l21-cd", seed=1, out="results.csv",
)


def parse_snr_spec(spec: str) -> tuple:
    """Parse '0:5:40' (start:step:stop, inclusive) or '0,10,20' lists."""
    spec = spec.strip()
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ValueError("SNR range must be start:step:stop")
        start, step, stop = (float(p) for p in parts)
        if step <= 0:
            raise ValueError("SNR step must be positive")
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        return tuple(start + i * step for i in range(count))
    return tuple(float(p) for p in spec.split(","))


def _parse_int_list(spec: str) -> tuple:
    return tuple(int(p) for p in spec.split(",") if p)


def _parse_methods(spec: str) -> tuple:
    return tuple(p.strip() for p in spec.split(",") if p.strip())


def load_config_file(path) -> dict:
    """Plain-text key=value pairs; '#' starts a comment."""
    values = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"malformed config line: {raw!r}")
        key, value = line.split("=", 1)
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _build_run_config(args) -> harness.ExperimentConfig:
    settings = {
        "n": args.n,
        "m_fraction": args.m_fraction,
        "t": args.t,
        "trials": args.trials,
        "snr": args.snr,
        "xi_min": args.xi_min,
        "xi_max": args.xi_max,
        "grid_sizes": args.grid_sizes,
        "methods": args.methods,
        "seed": args.seed,
        "out": args.out,
        "sweep_tolerance": args.sweep_tolerance,
        "max_sweeps": args.max_sweeps,
    }
    if args.config:
        file_values = load_config_file(args.config)
        unknown = set(file_values) - set(settings)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        settings.update(file_values)
    args.out = str(settings["out"])
    solver_opts = covsolve.SolveOptions(
        max_sweeps=int(settings["max_sweeps"]),
        coordinate_tolerance=float(settings["sweep_tolerance"]),
    )
    return harness.ExperimentConfig(
        n=int(settings["n"]),
        m_fraction=float(settings["m_fraction"]),
        samples_per_trial=int(settings["t"]),
        trials=int(settings["trials"]),
        snr_db=parse_snr_spec(str(settings["snr"])),
        angular_support=(float(settings["xi_min"]), float(settings["xi_max"])),
        grid_sizes=_parse_int_list(str(settings["grid_sizes"])),
        methods=_parse_methods(str(settings["methods"])),
        base_seed=int(settings["seed"]),
        g_options=solver_opts,
        ml_options=solver_opts,
    )


def _cmd_run(args) -> int:
    try:
        config = _build_run_config(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    table = harness.run_experiment(config)
    out = Path(args.out)
    agg_path = table.write_csv(out)
    print(f"wrote {len(table.records)} trial rows to {out}")
    print(f"wrote aggregates to {agg_path}")
    if not args.no_plot:
        from .plotting import render_nmse_figure

        figure = render_nmse_figure(table, out.with_suffix(".png"))
        print(f"wrote figure to {figure}")
    for agg in table.aggregates():
        label = agg.method if agg.grid_size == 0 else f"{agg.method} G={agg.grid_size}"
        print(
            f"  {label:>18s}  snr={agg.snr_db:5.1f} dB  "
            f"nmse={agg.mean_nmse:.6g} (stderr {agg.stderr:.2g}, {agg.trials} trials)"
        )
    if table.failures:
        print(f"{len(table.failures)} cell(s) failed:", file=sys.stderr)
        for failure in table.failures:
            print(
                f"  method={failure.method} G={failure.grid_size} "
                f"snr={failure.snr_db} trial={failure.trial}: {failure.message}",
                file=sys.stderr,
            )
        return 1
    return 0


def _cmd_verify(args) -> int:
    records = verify.run_suite(seed=args.seed)
    all_pass = True
    rows = []
    for rec in records:
        ok = rec.passed(tolerance=args.tolerance)
        all_pass &= ok
        d = rec.descriptor
        label = (
            f"n={d['n']} m={d['m']} G={d['grid_size']} T={d['num_samples']} "
            f"snr={d['snr_db']:g} {'matched' if d['matched'] else 'diffuse'}"
        )
        print(
            f"{'PASS' if ok else 'FAIL'}  gamma={rec.gamma_err:.3e} "
            f"estimate={rec.estimate_err:.3e} "
            f"controls=({rec.control_gamma_err:.2f},{rec.control_estimate_err:.2f})  {label}"
        )
        rows.append((rec, ok))
    if args.out:
        import csv as _csv

        with Path(args.out).open("w", newline="") as fh:
            writer = _csv.writer(fh)
            writer.writerow(
                (
                    "n", "m", "grid_size", "num_samples", "snr_db", "matched",
                    "gamma_err", "estimate_err",
                    "control_gamma_err", "control_estimate_err", "passed",
                )
            )
            for rec, ok in rows:
                d = rec.descriptor
                writer.writerow(
                    (
                        d["n"], d["m"], d["grid_size"], d["num_samples"],
                        d["snr_db"], int(d["matched"]),
                        format(rec.gamma_err, ".17g"),
                        format(rec.estimate_err, ".17g"),
                        format(rec.control_gamma_err, ".17g"),
                        format(rec.control_estimate_err, ".17g"),
                        int(ok),
                    )
                )
        print(f"wrote report to {args.out}")
    print(f"{'all identities hold' if all_pass else 'identity check FAILED'}")
    return 0 if all_pass else 1


def _cmd_bench(args) -> int:
    rng = np.random.default_rng(args.seed)
    cov = model.diffuse_covariance(args.n, (-0.1, 0.1))
    dictionary = model.build_grid_dictionary(args.n, args.grid_size)
    signals = model.sample_signals(cov, args.t, rng)
    proj = model.sample_selection_projections(args.n, max(1, args.n // 2), args.t, rng)
    noise_variance = 10.0 ** (-args.snr / 10.0)
    sketches = model.sketch(signals, proj, noise_variance, rng)

    def timed(label, fn):
        start = time.perf_counter()
        fn()
        print(f"  {label:<12s} {1e3 * (time.perf_counter() - start):9.1f} ms")

    print(
        f"timings for n={args.n} m={max(1, args.n // 2)} G={args.grid_size} "
        f"T={args.t} snr={args.snr:g} dB"
    )
    timed("oracle-mmse", lambda: estimate.oracle_mmse(cov, proj, sketches, noise_variance))
    gamma = covsolve.solve_g(sketches, proj, dictionary)
    timed("l21-cd", lambda: covsolve.solve_g(sketches, proj, dictionary))
    timed("plug-in", lambda: estimate.plug_in_mmse(gamma, dictionary, proj, sketches))
    timed("ml", lambda: covsolve.solve_ml(sketches, proj, dictionary, noise_variance))
    timed(
        "l21-direct",
        lambda: estimate.l21_ls_direct(
            sketches, proj, dictionary,
            opts=estimate.DirectOptions(tolerance=1e-8),
        ),
    )
    return 0


def _cmd_plot(args) -> int:
    table = harness.ResultTable.read_csv(args.csv)
    from .plotting import render_nmse_figure

    out = args.out or str(Path(args.csv).with_suffix(".png"))
    figure = render_nmse_figure(table, out)
    print(f"wrote figure to {figure}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmvdec",
        description="Joint-sparse recovery benchmarks via decoupled covariance "
        "estimation and plug-in MMSE.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Monte-Carlo NMSE sweep (CSV + figure)")
    run.add_argument("--n", type=int, default=SMOKE_DEFAULTS["n"])
    run.add_argument("--m-fraction", type=float, default=SMOKE_DEFAULTS["m_fraction"])
    run.add_argument("--t", type=int, default=SMOKE_DEFAULTS["t"],
                     help="samples per trial")
    run.add_argument("--trials", type=int, default=SMOKE_DEFAULTS["trials"])
    run.add_argument("--snr", default=SMOKE_DEFAULTS["snr"],
                     help="start:step:stop range or comma list, in dB")
    run.add_argument("--xi-min", type=float, default=SMOKE_DEFAULTS["xi_min"])
    run.add_argument("--xi-max", type=float, default=SMOKE_DEFAULTS["xi_max"])
    run.add_argument("--grid-sizes", default=SMOKE_DEFAULTS["grid_sizes"])
    run.add_argument("--methods", default=SMOKE_DEFAULTS["methods"],
                     help="comma list from: " + ",".join(harness.KNOWN_METHODS))
    run.add_argument("--seed", type=int, default=SMOKE_DEFAULTS["seed"])
    run.add_argument("--out", default=SMOKE_DEFAULTS["out"])
    run.add_argument("--config", default=None,
                     help="key=value file overriding the flags above")
    run.add_argument("--sweep-tolerance", type=float, default=1e-6,
                     help="coordinate-change stopping tolerance of the sweeps")
    run.add_argument("--max-sweeps", type=int, default=300)
    run.add_argument("--no-plot", action="store_true",
                     help="skip the figure next to the CSV")
    run.set_defaults(func=_cmd_run)

    ver = sub.add_parser("verify", help="decoupling identity suite")
    ver.add_argument("--seed", type=int, default=7)
    ver.add_argument("--tolerance", type=float, default=1e-3)
    ver.add_argument("--out", default=None, help="write a per-instance CSV report")
    ver.set_defaults(func=_cmd_verify)

    bench = sub.add_parser("bench", help="solver timings only")
    bench.add_argument("--n", type=int, default=32)
    bench.add_argument("--t", type=int, default=50)
    bench.add_argument("--grid-size", type=int, default=64)
    bench.add_argument("--snr", type=float, default=20.0)
    bench.add_argument("--seed", type=int, default=1)
    bench.set_defaults(func=_cmd_bench)

    plot = sub.add_parser("plot", help="render the figure for an existing CSV")
    plot.add_argument("--csv", required=True)
    plot.add_argument("--out", default=None)
    plot.set_defaults(func=_cmd_plot)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
