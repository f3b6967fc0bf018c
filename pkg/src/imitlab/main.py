"""
Command-line entry point.

    python -m imitlab.main run <config.json>
    python -m imitlab.main verify <mdp.json> <policy_e.json> <policy_i.json> --bound THM1
    python -m imitlab.main worstcase --gammas 0,0.5,0.9,0.99
    python -m imitlab.main report <raw.json> --format csv

Exit codes: 0 clean, 1 a failed campaign (see CampaignAggregate.failed) or a
violated bound under verify, 2 invalid input or a solver that could not finish.
"""
import argparse
import asyncio
import json
import logging
import sys
from pathlib import Path

from pydantic import ValidationError

from .core.errors import LabError
from .core.logging import configure_logging
from .core.schemas import ExperimentConfig, OutputFormat, extended_tree
from .jobs.campaign_job import run_campaign
from .repositories.mdp_repository import load_mdp, load_model, load_policy
from .repositories.report_repository import emit_report, emit_sweep, load_report
from .services.bounds import (
    LEMMA1_IDS,
    BoundId,
    BoundReport,
    check_cor1_trial,
    check_js_tv,
    check_lemma1,
    check_lemma3,
    check_lemma_a_chain,
    check_lemma_c1,
    check_pinsker,
    check_thm1,
    check_thm3,
)
from .services.mdp_core import state_action_occupancy
from .services.worstcase import sweep

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_INVALID = 2

_LEMMA1_KINDS = {bound_id: kind for kind, bound_id in LEMMA1_IDS.items()}
_CHAIN_IDS = (BoundId.LEM_A_STATE, BoundId.LEM_A_SA, BoundId.LEM_A_VALUE)
_MODEL_IDS = (BoundId.LEM_C1, BoundId.LEM3, BoundId.THM3)


class UsageError(LabError):
    """Raised when a subcommand gets arguments it cannot work with."""
    pass


# ── Subcommands ──────────────────────────────────────────────

def cmd_run(args: argparse.Namespace) -> int:
    config = ExperimentConfig.model_validate_json(Path(args.config).read_text(encoding="utf-8"))
    report = asyncio.run(run_campaign(config))
    return EXIT_VIOLATION if report.aggregate.failed else EXIT_OK


def _verify(args: argparse.Namespace) -> BoundReport:
    bound = BoundId(args.bound)
    mdp = load_mdp(args.mdp)
    pi_e = load_policy(args.policy_e)
    pi_i = load_policy(args.policy_i)

    if bound is BoundId.THM1:
        return check_thm1(mdp, pi_e, pi_i)
    if bound in _LEMMA1_KINDS:
        return check_lemma1(mdp, pi_e, pi_i, _LEMMA1_KINDS[bound])
    if bound in _CHAIN_IDS:
        return check_lemma_a_chain(mdp, pi_e, pi_i)[_CHAIN_IDS.index(bound)]
    if bound in (BoundId.PINSKER, BoundId.JS_TV):
        rho_e = state_action_occupancy(mdp, pi_e).rho
        rho_i = state_action_occupancy(mdp, pi_i).rho
        check = check_pinsker if bound is BoundId.PINSKER else check_js_tv
        return check(rho_i, rho_e)
    if bound is BoundId.COR1:
        if args.m is None:
            raise UsageError("COR1 needs --m")
        class_size = args.class_size or mdp.n_actions**mdp.n_states
        return check_cor1_trial(mdp, pi_e, pi_i, class_size, args.m, args.delta)
    if bound in _MODEL_IDS:
        if args.model is None:
            raise UsageError(f"{bound.value} needs --model; policy_e is the data-collecting policy")
        model = load_model(args.model)
        if bound is BoundId.LEM_C1:
            return check_lemma_c1(mdp, model, pi_e)
        check = check_lemma3 if bound is BoundId.LEM3 else check_thm3
        return check(mdp, model, pi_e, pi_i)
    raise UsageError(f"{bound.value} needs demonstration samples; run it through a gail_policy campaign")


def cmd_verify(args: argparse.Namespace) -> int:
    report = _verify(args)
    payload = {
        "bound_id": report.bound_id.value,
        "lhs": report.lhs,
        "rhs": "+inf" if report.vacuous else report.rhs,
        "slack": "+inf" if report.vacuous else report.slack,
        "holds": report.holds,
        "inputs": extended_tree(report.inputs),
    }
    print(json.dumps(payload, indent=2, default=float))
    return EXIT_OK if report.holds else EXIT_VIOLATION


def cmd_worstcase(args: argparse.Namespace) -> int:
    gammas = [float(value) for value in args.gammas.split(",") if value.strip()]
    text = emit_sweep(sweep(gammas), args.output)
    if args.output is None:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    report = load_report(args.raw)
    text = emit_report(report, args.format, args.output)
    if args.output is None:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="imitlab", description="Tabular imitation-learning bound laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a configured campaign")
    run.add_argument("config", type=Path)
    run.set_defaults(handler=cmd_run)

    verify = sub.add_parser("verify", help="check one bound on stored MDP and policies")
    verify.add_argument("mdp", type=Path)
    verify.add_argument("policy_e", type=Path)
    verify.add_argument("policy_i", type=Path)
    verify.add_argument("--bound", required=True, choices=[b.value for b in BoundId])
    verify.add_argument("--model", type=Path, default=None)
    verify.add_argument("--m", type=int, default=None)
    verify.add_argument("--delta", type=float, default=0.1)
    verify.add_argument("--class-size", type=int, default=None)
    verify.set_defaults(handler=cmd_verify)

    worstcase = sub.add_parser("worstcase", help="gamma sweep on the hard instance")
    worstcase.add_argument("--gammas", required=True, help="comma-separated list")
    worstcase.add_argument("--output", type=Path, default=None)
    worstcase.set_defaults(handler=cmd_worstcase)

    report = sub.add_parser("report", help="re-render a JSON campaign report")
    report.add_argument("raw", type=Path)
    report.add_argument("--format", choices=[f.value for f in OutputFormat], default=OutputFormat.CSV.value)
    report.add_argument("--output", type=Path, default=None)
    report.set_defaults(handler=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID

    try:
        return args.handler(args)
    except ValidationError as exc:
        logger.error("Invalid input: %s", exc)
        return EXIT_INVALID
    except (ValueError, LabError, FileNotFoundError) as exc:
        logger.error("%s failed: %s", args.command, exc)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
