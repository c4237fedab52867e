"""Command-line entry point.

    latflow run --variant ssiv --scenario apples --net-seed 7 --trace run.trace
    latflow transform src/latflow/corpus/fig2.yaml --script walk.txt -o fig6.yaml
    latflow verify --variant ssiv --variant pushed --scenario gen:1:3:5 --seeds 100
    latflow fuzz --variant decoupled_server --seeds 1000
    latflow dump-schedules --messages 2 --max-dups 1

Exit status: 0 on success, 1 on errors (parse, runtime, failed rule), 3
when ``verify``/``fuzz`` find a divergence.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import List, Optional

from .codec import encode
from .figures import FORCED_CUT, VARIANTS, load_variant
from .ir import IRError, dump_deployment, load_deployment, parse_dsl, serialize_graph, single_node
from .lattice import LatticeError
from .netsim import enumerate_small_schedules
from .runtime import DataflowRuntimeError, Runtime
from .scenario import load_scenario
from .transform import TransformError, diff_summary, run_script
from .transform.script import ScriptFailed
from .verify import CONFLICT, cmd_verify, converged_states, render_view, sealed_view

EXIT_DIVERGED = 3
ALL_VARIANTS = list(VARIANTS) + [FORCED_CUT]


def _scenario_arg(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenario", default="apples",
                   help="builtin name (apples), gen:SEED:CLIENTS:MAXLEN, or a YAML scenario file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="latflow", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one program variant to quiescence")
    run.add_argument("--variant", choices=ALL_VARIANTS, required=True)
    _scenario_arg(run)
    run.add_argument("--net-seed", type=int, default=None,
                     help="seed for adversarial channels; omitted means in-order local delivery")
    run.add_argument("--seed", type=int, default=None, help="seed for routing clients to replicas")
    run.add_argument("--replicas", type=int, default=None)
    run.add_argument("--trace", type=Path, default=None, help="write the execution trace here")
    run.add_argument("--dump-schedules", type=Path, default=None, help="write realized channel schedules here")

    tr = sub.add_parser("transform", help="apply a rewrite script to a graph or deployment file")
    tr.add_argument("input", type=Path, help=".hfs program or .yaml deployment")
    tr.add_argument("--script", type=Path, required=True)
    tr.add_argument("-o", "--output", type=Path, default=None, help="write the result here instead of stdout")

    for name, default, text in (("verify", 100, "compare variants across channel seeds"),
                                ("fuzz", 1000, "verify with many seeds")):
        v = sub.add_parser(name, help=text)
        v.add_argument("--variant", choices=ALL_VARIANTS, action="append", required=True,
                       help="repeat to compare several variants")
        _scenario_arg(v)
        v.add_argument("--seeds", type=int, default=default, help="number of channel seeds")
        v.add_argument("--seed", type=int, default=0, help="first channel seed")
        v.add_argument("--replicas", type=int, default=None)
        v.add_argument("--oracle", action="store_true", help="compare against the sequential fold of each session")

    ds = sub.add_parser("dump-schedules", help="list every small delivery schedule")
    ds.add_argument("--messages", type=int, default=2)
    ds.add_argument("--max-dups", type=int, default=1)
    return parser


def cmd_run(args, out) -> int:
    scenario = load_scenario(args.scenario)
    d = load_variant(args.variant, args.replicas)
    if args.net_seed is None:
        result = Runtime(d, scenario, local_baseline=True, route_seed=args.seed).run()
    else:
        route = args.net_seed if args.seed is None else args.seed
        result = Runtime(d, scenario, args.net_seed, route_seed=route).run()
    view = sealed_view(result)
    for line in render_view(view):
        print(line, file=out)
    states = converged_states(result, d)
    if len(states) > 1:
        for node, state in states.items():
            print(f"replica={node} state={encode(state)}", file=out)
    if args.trace:
        args.trace.write_text(result.trace_text())
    if args.dump_schedules:
        lines = []
        for ch, scheds in sorted(result.schedules.items()):
            for s in scheds:
                copies = " ".join(f"t{t}" for t, _ in s.deliveries)
                lines.append(f"channel={ch} seq={s.seq} enqueued=t{s.enqueue_tick} deliveries={copies}")
        args.dump_schedules.write_text("".join(x + "\n" for x in lines))
    return 1 if CONFLICT in view.values() else 0


def cmd_transform(args, out) -> int:
    text_in = args.input
    if text_in.suffix == ".hfs":
        d = single_node(text_in.stem, parse_dsl(text_in.read_text()))
    else:
        d = load_deployment(text_in)
    try:
        result, log = run_script(d, args.script.read_text())
    except ScriptFailed as err:
        for step in err.log:
            print(f"{'applied' if step.ok else 'FAILED '} {step.rule} (line {step.line}){': ' + step.message if step.message else ''}",
                  file=out)
        return 1
    for step in log:
        print(f"applied {step.rule} (line {step.line})", file=out)
    for line in diff_summary(d, result):
        print(f"  {line}", file=out)
    if args.output and args.output.suffix == ".hfs":
        if len(result.nodes) != 1:
            print("error: result has several nodes; write a .yaml deployment", file=sys.stderr)
            return 1
        rendered = serialize_graph(result.nodes[0].graph)
    else:
        rendered = dump_deployment(result)
    if args.output:
        args.output.write_text(rendered)
    else:
        out.write(rendered)
    return 0


def cmd_verify_args(args, out) -> int:
    result = cmd_verify(args.variant, load_scenario(args.scenario), args.seeds, seed_base=args.seed,
                        replicas=args.replicas, against_oracle=args.oracle)
    for line in result.report():
        print(line, file=out)
    return 0 if result.equivalent else EXIT_DIVERGED


def cmd_dump_schedules(args, out) -> int:
    schedules = enumerate_small_schedules(args.messages, args.max_dups)
    print(f"messages={args.messages} max_dups={args.max_dups} schedules={len(schedules)}", file=out)
    for s in schedules:
        print(" ".join(f"m{i + 1}" for i in s), file=out)
    return 0


COMMANDS = {
    "run": cmd_run,
    "transform": cmd_transform,
    "verify": cmd_verify_args,
    "fuzz": cmd_verify_args,
    "dump-schedules": cmd_dump_schedules,
}


def main(argv: Optional[List[str]] = None, out=None) -> int:
    args = build_parser().parse_args(argv)
    out = out or sys.stdout
    try:
        return COMMANDS[args.command](args, out)
    except (IRError, DataflowRuntimeError, TransformError, LatticeError, OSError, KeyError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
