"""Command line entry point: ``bellsim run`` and fixture maintenance."""
from __future__ import annotations

import argparse
import logging
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import rng
from .coupling import jp_feasibility
from .events import TimingConfig, generate_click_streams, pair_by_window
from .exact import BudgetExceeded, exact_report
from .fixtures import make_fixtures, verify_fixtures
from .io import dumps_json, write_clicks, write_final, write_json, write_raw
from .model import DEFAULT_BUDGET, SETTING_PAIRS, ModelError, resolve_model
from .pipeline import extract_final
from .stats import (IncompleteTableError, chsh, correlation_table, format_no_signaling,
                    format_table, no_signaling_test, raw_correlations)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VERIFY = 3

log = logging.getLogger("bellsim")


class ConfigError(Exception):
    pass


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bellsim", description="Bell-test simulation under contextual hidden-variable models")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate, pair, post-select and analyse")
    r.add_argument("--model", required=True, help="model file, or gallery/<name>")
    r.add_argument("--trials", type=int, required=True)
    r.add_argument("--seed", type=int, required=True)
    r.add_argument("--schedule", choices=("uniform", "blocks"), default="uniform")
    r.add_argument("--period", type=float, default=1e-6, help="trial period in seconds")
    r.add_argument("--window", type=float, default=2.5e-7, help="coincidence half-width in seconds")
    r.add_argument("--jitter", type=float, default=5e-8, help="Gaussian click jitter sigma in seconds")
    r.add_argument("--pairing", choices=("bins", "nearest"), default="bins")
    r.add_argument("--exact", action="store_true", help="also run the enumeration oracle")
    r.add_argument("--feasibility", action="store_true", help="joint-probability feasibility of the tables")
    r.add_argument("--budget", type=int, default=DEFAULT_BUDGET, help="oracle states per setting pair")
    r.add_argument("--out", default="bellsim-out", help="output directory")
    r.add_argument("--workers", type=int, default=1)

    for name, help_ in (("verify-fixtures", "recompute golden values and compare"),
                        ("make-fixtures", "regenerate golden values")):
        f = sub.add_parser(name, help=help_)
        f.add_argument("--gallery", default=None, help="gallery directory (default: bundled)")
        f.add_argument("--fixtures", default=None, help="fixtures directory (default: bundled)")
    return p


def _check_run_args(args) -> None:
    if args.trials < 0:
        raise ConfigError("--trials must be >= 0")
    try:
        rng.check_seed(args.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if args.workers < 1:
        raise ConfigError("--workers must be >= 1")
    if not (args.period > 0 and args.window > 0 and args.jitter >= 0):
        raise ConfigError("--period and --window must be > 0, --jitter >= 0")
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from None


def _empirical_pairwise(final) -> np.ndarray:
    P = np.zeros((2, 2, 2, 2))
    for x, y in SETTING_PAIRS:
        ab = final.pairs[(x, y)]
        if len(ab) == 0:
            return None
        for ai, a in enumerate((-1, 1)):
            for bi, b in enumerate((-1, 1)):
                P[x - 1, y - 1, ai, bi] = np.count_nonzero((ab[:, 0] == a) & (ab[:, 1] == b)) / len(ab)
    return P


def _empirical_tolerance(nosig) -> float:
    # marginal differences consistent with sampling noise at 4 pooled stderrs
    ses = [c.pooled_se for c in nosig.comparisons if c.testable and math.isfinite(c.pooled_se)]
    return 4 * max(ses) if ses else 1e-9


def run(args) -> int:
    _check_run_args(args)
    try:
        model = resolve_model(args.model)
    except ModelError as exc:
        raise ConfigError(str(exc)) from None
    if args.exact and model.support.states_per_pair > args.budget:
        raise ConfigError(str(BudgetExceeded(model.support.states_per_pair, args.budget)))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        timing = TimingConfig(args.period, args.jitter, args.window)
    out = Path(args.out)

    stream_a, stream_b = generate_click_streams(model, args.trials, timing, args.seed, args.schedule,
                                                workers=args.workers)
    raw = pair_by_window(stream_a, stream_b, timing, args.pairing)
    raw.metadata.update({"model": model.name, "model_hash": model.content_hash, "seed": args.seed,
                         "n_trials": args.trials, "schedule": args.schedule, "rng": rng.ALGORITHM})
    final = extract_final(raw)
    table = correlation_table(final)
    nosig = no_signaling_test(final)

    summary = {"config": {"model": args.model, "trials": args.trials, "seed": args.seed,
                          "schedule": args.schedule, "pairing": args.pairing, "timing": timing.to_dict(),
                          "rng": rng.ALGORITHM},
               "model": {"name": model.name, "variant": model.variant, "content_hash": model.content_hash},
               "pairing": {k: raw.metadata[k] for k in ("n_slots", "n_ambiguous_bins", "n_coincidences",
                                                        "n_clicks_a", "n_clicks_b")},
               "discard_accounting": final.discard_accounting(),
               "correlations": table.to_dict(),
               "raw_correlations": raw_correlations(raw).tolist(),
               "no_signaling": nosig.to_dict(),
               "no_signaling_min_p": nosig.min_p_value()}
    try:
        s_can, s_max = chsh(table)
        summary["chsh"] = {"s_canonical": s_can, "s_max": s_max}
    except IncompleteTableError as exc:
        summary["chsh"] = {"error": str(exc)}

    report = None
    if args.exact:
        report = exact_report(model, args.budget)
        summary["exact"] = report.to_dict()
        write_json(report.to_dict(), out / "exact.json")
    if args.feasibility:
        feas = {}
        P = _empirical_pairwise(final)
        if P is not None:
            tol = _empirical_tolerance(nosig)
            feas["empirical"] = {"tolerance": tol, **jp_feasibility(P, tol).to_dict()}
        else:
            feas["empirical"] = {"status": "undefined", "reason": "a setting pair has no kept records"}
        if report is not None and report.conditional_defined:
            feas["exact"] = jp_feasibility(report.pairwise_distributions()).to_dict()
        summary["feasibility"] = feas
        write_json(feas, out / "feasibility.json")

    write_raw(raw, out / "raw.csv")
    write_clicks(stream_a, out / "clicks_A.csv", out / "settings_A.csv")
    write_clicks(stream_b, out / "clicks_B.csv", out / "settings_B.csv")
    write_final(final, out)
    write_json(table.to_dict(), out / "correlations.json")
    write_json(nosig.to_dict(), out / "no_signaling.json")
    write_json(summary, out / "summary.json")
    text = _summary_text(model, raw, table, summary, nosig)
    (out / "summary.txt").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


def _summary_text(model, raw, table, summary, nosig) -> str:
    lines = [f"model {model.name} ({model.variant}), {summary['config']['trials']} trials, "
             f"seed {summary['config']['seed']}, pairing {summary['config']['pairing']}",
             f"coincidences {raw.metadata['n_coincidences']}, ambiguous bins {raw.metadata['n_ambiguous_bins']}",
             "", format_table(table), ""]
    c = summary["chsh"]
    if "error" in c:
        lines.append(f"CHSH: {c['error']}")
    else:
        lines.append(f"CHSH (post-selected): S = {c['s_canonical']:+.5f}, S_max = {c['s_max']:.5f}")
    lines += ["", format_no_signaling(nosig)]
    if "exact" in summary:
        e = summary["exact"]
        cond, unc = e["conditional"], e["unconditional"]
        lines += ["", f"oracle S_max: conditional {cond['s_max']}, unconditional {unc['s_max']}"]
    if "feasibility" in summary:
        for k, v in summary["feasibility"].items():
            lines.append(f"joint probability ({k}): {v['status']}")
    return "\n".join(lines) + "\n"


def fixtures_cmd(args) -> int:
    if args.command == "make-fixtures":
        for path in make_fixtures(args.gallery, args.fixtures):
            print(f"wrote {path}")
        return EXIT_OK
    result = verify_fixtures(args.gallery, args.fixtures)
    if result.passed:
        print(f"fixtures OK ({len(result.checked)} models)")
        return EXIT_OK
    for name, problems in result.offenders.items():
        for p in problems:
            print(f"FAIL {name}: {p}", file=sys.stderr)
    return EXIT_VERIFY


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        if args.command == "run":
            return run(args)
        return fixtures_cmd(args)
    except ConfigError as exc:
        print(f"bellsim: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
