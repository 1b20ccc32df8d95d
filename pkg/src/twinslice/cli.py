"""Command-line front end.

Verbs: run | train | eval | compare | sweep. Exit codes: 0 on success,
2 for configuration problems (bad flags, unreadable or invalid scenario,
missing weights), 3 for runtime failures. The output directory can be
overridden with the TWINSLICE_OUT environment variable; nothing else is
read from the environment.
"""
from __future__ import annotations

import argparse
import os
import sys
from typing import Optional, Sequence

from . import runner
from .nn import TrainConfig
from .runner import POLICY_IDS
from .scenario import ExperimentSpec, Scenario, ScenarioError, load_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

DEFAULT_SWEEP = (100.0, 125.0, 150.0, 175.0, 200.0)


class ConfigError(Exception):
    pass


def _add_common(p: argparse.ArgumentParser, policies: bool = True) -> None:
    p.add_argument("--scenario", help="scenario file; omit for built-in defaults")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.add_argument("--out", default="out", help="output directory (default: out)")
    if policies:
        p.add_argument(
            "--policy",
            action="append",
            help=f"policy id, repeatable or comma-separated ({'|'.join(POLICY_IDS)})",
        )
        p.add_argument("--weights", help="trained weights file for dnn policies")
        p.add_argument(
            "--dump-twin",
            action="store_true",
            help="also write a per-slot twin staleness log beside each run CSV",
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="twinslice",
        description="Twin-driven eMBB/URLLC slicing simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate one policy on the scenario")
    _add_common(p_run)

    p_train = sub.add_parser("train", help="train the neural allocator")
    _add_common(p_train, policies=False)
    p_train.add_argument("--epochs", type=int, help="override [train] epochs")
    p_train.add_argument("--lr", type=float, help="override [train] learning_rate")
    p_train.add_argument("--batch", type=int, help="override [train] batch_size")

    p_eval = sub.add_parser("eval", help="evaluate trained weights (dnn+repair)")
    _add_common(p_eval)

    p_cmp = sub.add_parser("compare", help="run several policies at the scenario load")
    _add_common(p_cmp)

    p_sweep = sub.add_parser("sweep", help="policy x lambda sweep with comparison table")
    _add_common(p_sweep)
    p_sweep.add_argument(
        "--lambdas",
        help="comma-separated arrival rates (default: "
        + ",".join(f"{v:g}" for v in DEFAULT_SWEEP)
        + ")",
    )

    return parser


def _load(args) -> Scenario:
    scenario = load_scenario(args.scenario) if args.scenario else Scenario()
    if args.seed is not None:
        scenario = scenario.with_seed(args.seed)
    return scenario


def _out_dir(args) -> str:
    return os.environ.get("TWINSLICE_OUT", args.out)


def _policies(args, default: tuple[str, ...]) -> tuple[str, ...]:
    if not getattr(args, "policy", None):
        return default
    flat: list[str] = []
    for entry in args.policy:
        flat.extend(p.strip() for p in entry.split(",") if p.strip())
    for p in flat:
        if p not in POLICY_IDS:
            raise ConfigError(f"unknown policy {p!r}; known: {', '.join(POLICY_IDS)}")
    return tuple(flat)


def _experiment(args, policies, lambdas) -> ExperimentSpec:
    weights = getattr(args, "weights", None)
    if any(p.startswith("dnn") for p in policies):
        if not weights:
            raise ConfigError("dnn policies need --weights pointing to weights.bin")
        if not os.path.exists(weights):
            raise ConfigError(f"weights file not found: {weights}")
    return ExperimentSpec(
        scenario=_load(args),
        policies=policies,
        out_dir=_out_dir(args),
        lambdas=lambdas,
        weights_path=weights,
        dump_twin=getattr(args, "dump_twin", False),
    )


def _cmd_run(args) -> int:
    policies = _policies(args, default=("orthogonal",))
    if len(policies) != 1:
        raise ConfigError("run takes exactly one --policy; use compare for several")
    spec = _experiment(args, policies, lambdas=None)
    results = runner.run_experiment(spec)
    _print_results(results)
    return EXIT_OK


def _cmd_eval(args) -> int:
    policies = _policies(args, default=("dnn+repair",))
    spec = _experiment(args, policies, lambdas=None)
    results = runner.run_experiment(spec)
    _print_results(results)
    return EXIT_OK


def _cmd_compare(args) -> int:
    policies = _policies(args, default=("orthogonal", "dnn+repair"))
    spec = _experiment(args, policies, lambdas=None)
    results = runner.run_experiment(spec)
    _print_results(results)
    return EXIT_OK


def _cmd_sweep(args) -> int:
    policies = _policies(args, default=("orthogonal", "dnn+repair"))
    if args.lambdas:
        try:
            lambdas = tuple(float(v) for v in args.lambdas.split(","))
        except ValueError:
            raise ConfigError(f"cannot parse --lambdas {args.lambdas!r}")
    else:
        lambdas = DEFAULT_SWEEP
    spec = _experiment(args, policies, lambdas=lambdas)
    results = runner.run_experiment(spec)
    _print_results(results)
    return EXIT_OK


def _cmd_train(args) -> int:
    scenario = _load(args)
    t = scenario.train
    cfg = TrainConfig(
        learning_rate=args.lr if args.lr is not None else t.learning_rate,
        epochs=args.epochs if args.epochs is not None else t.epochs,
        batch_size=args.batch if args.batch is not None else t.batch_size,
        seed=t.seed,
    )
    artifacts = runner.train_command(scenario, cfg, _out_dir(args))
    first = artifacts.result.loss_curve[0][2]
    last = artifacts.result.loss_curve[-1][2]
    print(
        f"trained on {artifacts.dataset_size} snapshots: "
        f"loss {first:.4f} -> {last:.4f}"
    )
    print(f"weights: {artifacts.weights_path}")
    print(f"loss curve: {artifacts.loss_csv_path}")
    return EXIT_OK


def _print_results(results) -> None:
    print(f"{'policy':<12} {'lambda':>9} {'mean SE':>10} {'outage':>8} {'exceed':>8}")
    for policy_id, lam, summary in results:
        lam_s = "schedule" if lam is None else f"{lam:g}"
        print(
            f"{policy_id:<12} {lam_s:>9} "
            f"{summary.mean_spectral_efficiency:>10.4f} "
            f"{summary.outage_probability:>8.4f} "
            f"{summary.cdf.exceedance_mass:>8.4f}"
        )


_COMMANDS = {
    "run": _cmd_run,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "compare": _cmd_compare,
    "sweep": _cmd_sweep,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad flags, which matches our config-error code
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, ScenarioError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        msg = str(exc)
        if "weights" in msg or "policy" in msg:
            print(f"error: {msg}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"runtime error: {msg}", file=sys.stderr)
        return EXIT_RUNTIME
    except (OSError, FloatingPointError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
