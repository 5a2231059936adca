"""Command-line front end.

Exit codes: 0 all checks pass, 1 an assertion failed, 2 a retry budget was
exhausted, 3 a precondition was violated, 64 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass

from .errors import BBError, MonteCarloFailure, PreconditionError

EXIT_OK, EXIT_ASSERT, EXIT_BUDGET, EXIT_PRECONDITION, EXIT_USAGE = 0, 1, 2, 3, 64
MODES = ("psl2", "classical", "verify", "stats")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


@dataclass
class RunConfig:
    group: str
    mode: str
    seed: int
    trials: int
    out: str | None
    budget_scale: float
    experiment: str | None


def build_parser() -> argparse.ArgumentParser:
    from .verify import EXPERIMENTS

    ap = _Parser(prog="bbsteinberg", description="Black-box recognition of (P)SL2 and classical groups")
    ap.add_argument("--group", required=True, help="e.g. PSL:1:13:1, Sp:3:13:1, OmegaPlus:4:13:1")
    ap.add_argument("--mode", choices=MODES, default="psl2")
    ap.add_argument("--seed", type=int, default=None, help="RNG seed (default: $BBX_SEED or 0)")
    ap.add_argument("--trials", type=int, default=1000, help="number of trials in stats mode")
    ap.add_argument("--out", default=None, help="write JSON here instead of stdout")
    ap.add_argument("--budget-scale", type=float, default=1.0, help="multiply every retry budget")
    ap.add_argument("--experiment", choices=EXPERIMENTS, default=None)
    return ap


def parse_config(argv) -> RunConfig:
    ap = build_parser()
    ns = ap.parse_args(argv)
    seed = ns.seed
    if seed is None:
        env = os.environ.get("BBX_SEED")
        try:
            seed = int(env) if env else 0
        except ValueError:
            ap.error(f"BBX_SEED={env!r} is not an integer")
    if not 0 <= seed < 2**64:
        ap.error("seed must be a 64-bit unsigned integer")
    if ns.mode == "stats" and ns.experiment is None:
        ap.error("--mode stats needs --experiment")
    from .errors import GroupSpecSyntaxError
    from .matgroup import GroupSpec

    try:
        GroupSpec.parse(ns.group)
    except GroupSpecSyntaxError as exc:
        ap.error(str(exc))
    except PreconditionError:
        pass  # well-formed but unsupported: reported later with exit code 3
    if ns.trials < 1:
        ap.error("--trials must be positive")
    if ns.budget_scale <= 0:
        ap.error("--budget-scale must be positive")
    return RunConfig(ns.group, ns.mode, seed, ns.trials, ns.out, ns.budget_scale, ns.experiment)


def _run_psl2(spec, cfg: RunConfig):
    from .blackbox import matrix_box
    from .sl2 import psl2_pipeline
    from .verify import verify_sl2_triple

    if spec.family != "A" or spec.n != 1:
        raise PreconditionError("psl2 mode needs a rank-1 group such as PSL:1:13:1")
    box = matrix_box(spec, seed=cfg.seed)
    triple = psl2_pipeline(box, spec.p, spec.k, cfg.budget_scale)
    T = verify_sl2_triple(triple, spec)
    doc = {"group": str(spec), "mode": "psl2", "seed": cfg.seed, "triple": triple.to_json(), "transcript": T.to_json()}
    return doc, T.passed, box


def _run_classical(spec, cfg: RunConfig):
    from .classical import algorithm_classical, check_classical_preconditions, make_handle

    check_classical_preconditions(spec)
    handle = make_handle(spec, cfg.seed)
    cert = algorithm_classical(handle, cfg.budget_scale)
    doc = {"group": str(spec), "mode": "classical", "seed": cfg.seed, "certificate": cert.to_json()}
    return doc, cert.transcript.passed, handle.box


def _run_verify(spec, cfg: RunConfig):
    from .verify import replay_transcript

    rank_one = spec.family == "A" and spec.n == 1
    doc, passed, box = (_run_psl2 if rank_one else _run_classical)(spec, cfg)
    transcript = doc["transcript"] if rank_one else doc["certificate"]["transcript"]
    config = None
    if not rank_one:
        from .matgroup import ct_config

        config = ct_config(spec)
    gens = [g.value for g in box.gens]
    replayed = replay_transcript(transcript, spec, gens, config)
    recorded = [a["pass"] for a in transcript["assertions"]]
    agree = replayed == recorded
    out = {
        "group": str(spec),
        "mode": "verify",
        "seed": cfg.seed,
        "assertions": len(recorded),
        "recorded_pass": all(recorded),
        "replay_agrees": agree,
    }
    return out, passed and agree, box


def _run_stats(spec, cfg: RunConfig):
    from .verify import stats_run

    report = stats_run(cfg.experiment, cfg.trials, cfg.seed, str(spec))
    report["mode"] = "stats"
    return report, bool(report["passed"]), None


def run(cfg: RunConfig) -> tuple[dict, int]:
    from .matgroup import GroupSpec

    spec = GroupSpec.parse(cfg.group)
    runner = {"psl2": _run_psl2, "classical": _run_classical, "verify": _run_verify, "stats": _run_stats}[cfg.mode]
    doc, passed, _ = runner(spec, cfg)
    return doc, EXIT_OK if passed else EXIT_ASSERT


def _emit(doc: dict, out: str | None):
    text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    cfg = parse_config(sys.argv[1:] if argv is None else argv)
    try:
        doc, code = run(cfg)
    except PreconditionError as exc:
        doc, code = {"group": cfg.group, "mode": cfg.mode, "error": "precondition", "message": str(exc)}, EXIT_PRECONDITION
    except MonteCarloFailure as exc:
        doc, code = {"group": cfg.group, "mode": cfg.mode, "error": "budget", "message": str(exc)}, EXIT_BUDGET
    except (AssertionError, BBError) as exc:
        doc, code = {"group": cfg.group, "mode": cfg.mode, "error": "assertion", "message": str(exc)}, EXIT_ASSERT
    _emit(doc, cfg.out)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
