"""Command line entry point: ``dplr <subcommand>``.

Subcommands: mechanism | gaps | dbm | bounds | rigidity | verify | experiment.
All randomized subcommands take ``--seed`` and write ``#``-prefixed metadata
headers into their output files.  Exit code is 0 iff the run completed
without error (for verify: iff every check passed).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .bounds import (
    PolylogFactor,
    covariance_utility_bound,
    subspace_utility_bound,
    weaker_metric_bound,
)
from .dyson import (
    TimeGrid,
    coupled_gap_run,
    eigenvalue_sde_path,
    eigenvector_flow_path,
    matrix_diffusion_path,
)
from .errors import DplrError
from .harness import (
    ExperimentConfig,
    header_lines,
    run_experiment,
    run_gap_campaign,
    run_rigidity_check,
    verify_suite,
    write_csv,
    write_gap_report,
    write_rigidity_report,
    _fmt,
)
from .hermitian import eigh, read_matrix
from .mechanism import (
    FIELD_ORDER,
    PrivacyParams,
    check_gap_assumption,
    complex_gaussian_mechanism,
    privacy_time,
    real_gaussian_mechanism,
)
from .randmat import NoiseEnsemble, RngStream


def _parse_values(text: str) -> np.ndarray:
    path = Path(text)
    if path.exists():
        raw = path.read_text()
    else:
        raw = text
    vals = [float(tok) for tok in raw.replace(",", " ").split() if not tok.startswith("#")]
    if not vals:
        raise DplrError(f"no numbers found in {text!r}")
    return np.asarray(vals)


def _read_spectrum_csv(path: str) -> np.ndarray:
    vals = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        vals.extend(float(tok) for tok in line.replace(",", " ").split())
    if not vals:
        raise DplrError(f"no spectrum values in {path}")
    return np.asarray(vals)


def _add_seed(p):
    p.add_argument("--seed", type=int, default=0, help="base 64-bit seed")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dplr", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mechanism", help="run a private low-rank mechanism over trials")
    p.add_argument("--input", required=True, help="matrix file prefix (<name>_re.csv[, _im.csv])")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--t-override", type=float, help="direct noise time (test hook, not private)")
    p.add_argument("--ensemble", choices=["gue", "goe"], default="gue")
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--out", required=True)
    _add_seed(p)

    p = sub.add_parser("gaps", help="collect scaled neighbor gaps and fit the tail exponent")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--ensemble", choices=["gue", "goe"], default="gue")
    p.add_argument("--index", type=int, required=True, help="gap index i (1-based)")
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--out")
    _add_seed(p)

    p = sub.add_parser("dbm", help="simulate matrix / eigenvalue / eigenvector diffusions")
    p.add_argument("--mode", choices=["matrix", "sde", "flow", "coupled"], required=True)
    p.add_argument("--d", type=int)
    p.add_argument("--input", help="matrix prefix for matrix/flow modes (default: zero matrix)")
    p.add_argument("--gamma0", help="initial eigenvalues (comma list or file)")
    p.add_argument("--xi0", help="dominated initial eigenvalues for coupled mode")
    p.add_argument("--ensemble", choices=["gue", "goe"], default="gue")
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--t-end", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--out")
    _add_seed(p)

    p = sub.add_parser("bounds", help="evaluate all applicable theory bounds for a spectrum")
    p.add_argument("--spectrum", required=True, help="CSV file of eigenvalues")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--mode", choices=["leading", "explicit"], default="leading")
    p.add_argument("--constant", type=float, default=1.0)
    p.add_argument("--polylog-L", type=float, default=1.0)

    p = sub.add_parser("rigidity", help="compare sampled spectra to semicircle quantiles")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--ensemble", choices=["gue", "goe"], default="gue")
    p.add_argument("--polylog-L", type=float, default=1.0)
    p.add_argument("--out")
    _add_seed(p)

    p = sub.add_parser("verify", help="run the invariant battery; exit 0 iff all pass")
    p.add_argument("--out", help="write the JSON report here")
    p.add_argument("--quick", action="store_true", help="reduced sample sizes")
    p.add_argument("--inject-fault", help="negative control: sabotage the named check")
    _add_seed(p)

    p = sub.add_parser("experiment", help="run a campaign described by a JSON config")
    p.add_argument("--config", required=True)

    return parser


def _cmd_mechanism(args) -> int:
    m = read_matrix(args.input)
    if args.t_override is not None:
        if args.epsilon is not None or args.delta is not None:
            raise DplrError("give either (--epsilon, --delta) or --t-override, not both")
        params = PrivacyParams.with_noise_time(args.t_override)
    else:
        if args.epsilon is None or args.delta is None:
            raise DplrError("need --epsilon and --delta (or --t-override)")
        params = privacy_time(args.epsilon, args.delta)
    mech = complex_gaussian_mechanism if args.ensemble == "gue" else real_gaussian_mechanism
    rows = []
    for trial in range(args.trials):
        rng = RngStream(args.seed, trial)
        result = mech(m, args.k, params, rng, psd_check="warn")
        metrics = result.metrics.as_dict()
        rows.append(
            [trial]
            + [metrics[name] for name in FIELD_ORDER]
            + [bool(result.gap_assumption_holds)]
        )
    config = {
        "input": args.input, "k": args.k, "epsilon": args.epsilon, "delta": args.delta,
        "t_override": args.t_override, "ensemble": args.ensemble, "trials": args.trials,
        "seed": args.seed,
    }
    write_csv(
        args.out,
        header_lines(args.seed, config, extra={"noise_time_T": _fmt(params.T)}),
        ["trial", *FIELD_ORDER, "gap_assumption"],
        rows,
    )
    return 0


def _cmd_gaps(args) -> int:
    config = ExperimentConfig(
        kind="gaps", d=args.d, ensemble=args.ensemble, gap_index=args.index,
        trials=args.trials, seed=args.seed, output=args.out,
    )
    report = run_gap_campaign(config)
    if args.out:
        write_gap_report(report, args.out)
    s = report.sample
    print(json.dumps({
        "fitted_exponent": s.fitted_exponent,
        "stderr": s.stderr,
        "fit_window": list(s.fit_window),
        "n_fit_points": s.n_fit_points,
    }, indent=2))
    return 0


def _write_trajectory(path, traj, seed, config):
    d = traj.eigenvalues.shape[1]
    columns = ["time"] + [f"eig{i}" for i in range(1, d + 1)]
    rows = [
        [t] + list(traj.eigenvalues[s])
        for s, t in enumerate(traj.times)
    ]
    write_csv(path, header_lines(seed, config), columns, rows)


def _cmd_dbm(args) -> int:
    grid = TimeGrid(args.t0, args.t_end, args.steps)
    rng = RngStream(args.seed, 0)
    config = {k: v for k, v in vars(args).items() if k != "command"}
    if args.mode == "matrix":
        if args.input:
            m = read_matrix(args.input).entries
        else:
            if not args.d:
                raise DplrError("matrix mode needs --input or --d")
            m = np.zeros((args.d, args.d), dtype=np.complex128)
        traj = matrix_diffusion_path(m, grid, args.ensemble, rng)
    elif args.mode == "sde":
        if not args.gamma0:
            raise DplrError("sde mode needs --gamma0")
        gamma0 = _parse_values(args.gamma0)
        beta = NoiseEnsemble.parse(args.ensemble).beta
        traj = eigenvalue_sde_path(gamma0, beta, grid, rng)
    elif args.mode == "flow":
        if not args.input:
            raise DplrError("flow mode needs --input")
        beta = NoiseEnsemble.parse(args.ensemble).beta
        traj = eigenvector_flow_path(eigh(read_matrix(args.input)), beta, grid, rng)
    else:
        if not (args.xi0 and args.gamma0):
            raise DplrError("coupled mode needs --xi0 and --gamma0")
        beta = NoiseEnsemble.parse(args.ensemble).beta
        report = coupled_gap_run(_parse_values(args.xi0), _parse_values(args.gamma0), beta, grid, rng)
        print(json.dumps({
            "max_violation": report.max_violation,
            "first_crossing_time": report.first_crossing_time,
        }, indent=2))
        if args.out:
            write_csv(
                args.out,
                header_lines(args.seed, config),
                ["time", "violation"],
                [[t, v] for t, v in zip(report.times, report.violations)],
            )
        return 0
    if args.out:
        _write_trajectory(args.out, traj, args.seed, config)
    else:
        print(f"final eigenvalues: {traj.eigenvalues[-1]}")
    return 0


def _cmd_bounds(args) -> int:
    spectrum = np.sort(_read_spectrum_csv(args.spectrum))[::-1]
    d = spectrum.shape[0]
    polylog = PolylogFactor(d, args.polylog_L)
    out = {
        "d": d,
        "k": args.k,
        "T": args.T,
        "polylog_factor": polylog.value,
        "mode": args.mode,
    }
    try:
        out["covariance_utility_bound"] = covariance_utility_bound(
            spectrum, args.k, d, args.T, polylog, args.constant, args.mode
        )
    except DplrError as exc:
        out["covariance_utility_bound"] = None
        out["covariance_utility_bound_error"] = str(exc)
    if args.k < d:
        try:
            out["subspace_utility_bound"] = subspace_utility_bound(spectrum, args.k, args.T)
        except DplrError as exc:
            out["subspace_utility_bound"] = None
            out["subspace_utility_bound_error"] = str(exc)
        out["gap_assumption_at_T"] = check_gap_assumption(spectrum, args.k, args.T)
        out["gap_assumption_at_2T"] = check_gap_assumption(spectrum, args.k, 2 * args.T)
    out["weaker_metric_bound"] = weaker_metric_bound(args.k, d, args.T, polylog, args.constant)
    print(json.dumps(out, indent=2, sort_keys=True))
    return 0


def _cmd_rigidity(args) -> int:
    config = ExperimentConfig(
        kind="rigidity", d=args.d, trials=args.trials, ensemble=args.ensemble,
        polylog_L=args.polylog_L, seed=args.seed, output=args.out,
    )
    report = run_rigidity_check(config)
    if args.out:
        write_rigidity_report(report, args.out)
    print(json.dumps({
        "median_max_ratio": report.median_max_ratio,
        "classical_residual_max": report.classical_residual,
    }, indent=2))
    return 0


def _cmd_verify(args) -> int:
    result = verify_suite(seed=args.seed, inject_fault=args.inject_fault, quick=args.quick)
    text = json.dumps(result, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0 if result["passed"] else 1


def _cmd_experiment(args) -> int:
    config = ExperimentConfig.from_json(args.config)
    summary = run_experiment(config)
    print(json.dumps(summary, indent=2, sort_keys=True, default=str))
    if config.kind == "verify":
        return 0 if summary["passed"] else 1
    return 0


_COMMANDS = {
    "mechanism": _cmd_mechanism,
    "gaps": _cmd_gaps,
    "dbm": _cmd_dbm,
    "bounds": _cmd_bounds,
    "rigidity": _cmd_rigidity,
    "verify": _cmd_verify,
    "experiment": _cmd_experiment,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except DplrError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
