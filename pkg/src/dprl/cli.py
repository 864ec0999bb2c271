"""Command-line entry point: ``dprl run``, ``dprl validate-env``, ``dprl oracle``.

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .harness import ArmSpec, ExperimentSpec, SpecError, run_experiment, spec_from_json
from .mdp import MdpError, build_riverswim, exact_value_iteration, load_mdp

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

_ARM_ALIASES = {
    "ucbvi": "ucbvi",
    "jdp": "central",
    "central": "central",
    "ldp": "local",
    "local": "local",
    "none": "none",
}
_OPTION_KEYS = {"eps": "epsilon", "epsilon": "epsilon", "scale": "bonus_scale",
                "bonus_scale": "bonus_scale", "E": "e_override", "label": "label"}


def parse_arm(text: str) -> ArmSpec:
    """Parse ``kind[:key=value,...]``, e.g. ``jdp:eps=1`` or ``ldp:eps=0.5,scale=0.2,E=10``."""
    name, _, rest = text.partition(":")
    if name not in _ARM_ALIASES:
        raise SpecError(f"unknown arm {name!r}; expected one of {sorted(_ARM_ALIASES)}")
    kind = _ARM_ALIASES[name]
    opts: dict = {}
    for item in filter(None, rest.split(",")):
        key, eq, value = item.partition("=")
        if not eq or key not in _OPTION_KEYS:
            raise SpecError(f"bad arm option {item!r} in {text!r}; keys are {sorted(_OPTION_KEYS)}")
        field = _OPTION_KEYS[key]
        if field == "label":
            opts[field] = value
            continue
        try:
            opts[field] = float(value)
        except ValueError:
            raise SpecError(f"arm option {key} needs a number, got {value!r}") from None
    label = opts.pop("label", None)
    if label is None:
        label = name if kind in ("ucbvi", "none") else f"{name} eps={opts.get('epsilon', 1.0):g}"
    return ArmSpec(label=label, kind=kind, **opts)


def _env_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--env", default="riverswim", help="'riverswim' or a JSON model file")
    p.add_argument("--states", type=int, default=6, help="RiverSwim states (builtin only)")
    p.add_argument("--horizon", type=int, default=20, help="RiverSwim horizon (builtin only)")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # usage mistakes are configuration errors
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dprl", description="Private optimistic RL experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a seeded multi-arm regret experiment")
    _env_args(run)
    run.add_argument("--episodes", type=int, help="number of episodes K")
    run.add_argument("--arm", action="append", default=[], help="arm, e.g. ucbvi, jdp:eps=1, ldp:eps=1")
    run.add_argument("--runs", type=int, default=1)
    run.add_argument("--seed", type=int, default=0, help="base seed; run i uses seed + i")
    run.add_argument("--bonus-scale", type=float, default=0.1)
    run.add_argument("--beta", type=float, default=0.1)
    run.add_argument("--stride", type=int, help="checkpoint stride (default K/500)")
    run.add_argument("--out", default="results", help="output directory")
    run.add_argument("--spec", help="JSON experiment spec (other experiment options are ignored)")

    val = sub.add_parser("validate-env", help="check a JSON model file")
    val.add_argument("path")

    orc = sub.add_parser("oracle", help="print the optimal value V*_1 of the initial distribution")
    _env_args(orc)
    return parser


def _load_env(args):
    if args.env == "riverswim":
        return build_riverswim(args.states, args.horizon)
    return load_mdp(args.env)


def _cmd_run(args) -> int:
    if args.spec:
        try:
            doc = json.loads(Path(args.spec).read_text())
        except OSError as err:
            raise SpecError(f"cannot read spec {args.spec}: {err}") from err
        except json.JSONDecodeError as err:
            raise SpecError(f"{args.spec}: invalid JSON at line {err.lineno}, column {err.colno}") from err
        spec = spec_from_json(doc, output_dir=args.out if args.out != "results" else doc.get("output_dir"))
    else:
        if args.episodes is None:
            raise SpecError("--episodes is required unless --spec is given")
        if not args.arm:
            raise SpecError("at least one --arm is required")
        spec = ExperimentSpec(K=args.episodes, arms=tuple(parse_arm(a) for a in args.arm),
                              environment=args.env, H=args.horizon, S=args.states, runs=args.runs,
                              base_seed=args.seed, checkpoint_stride=args.stride, output_dir=args.out,
                              bonus_scale=args.bonus_scale, beta=args.beta)
    report = run_experiment(spec)
    for agg in report.aggregates:
        print(f"{agg.label}: final cumulative regret {agg.mean[-1]:.6g} ± {agg.stderr[-1]:.3g} "
              f"({agg.runs} runs)")
    print(f"wrote {len(report.files)} files to {spec.output_dir}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    mdp = load_mdp(args.path)
    print(f"ok: S={mdp.S} A={mdp.A} H={mdp.H} rewards={mdp.reward_kind.value}")
    return EXIT_OK


def _cmd_oracle(args) -> int:
    mdp = _load_env(args)
    V = exact_value_iteration(mdp)[0]
    print(f"{float(np.dot(mdp.d1, V[0])):.10g}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": _cmd_run, "validate-env": _cmd_validate, "oracle": _cmd_oracle}[args.command]
    try:
        return handler(args)
    except (SpecError, MdpError) as err:
        print(f"dprl: error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, RuntimeError, ValueError) as err:
        print(f"dprl: runtime error: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
