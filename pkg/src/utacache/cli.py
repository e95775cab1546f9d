"""``uta`` command line: gen, solve, sim, verify, report, rerun.

Exit codes: 0 success, 1 validation failure, 2 verification failure,
3 I/O failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .cachesim import simulate_shuffle
from .model import Instance, InstanceTooLarge, validate_instance
from .scenario import ConfigError, ScenarioConfig, World, generate_world, load_config
from .solvers import SOLVERS, allocation_from_dict, get_solver

log = logging.getLogger("utacache")

EXIT_OK, EXIT_INVALID, EXIT_VERIFY, EXIT_IO = 0, 1, 2, 3


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_INVALID):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write(path: Path, text: str) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}", EXIT_IO) from None
    return path


def _read(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_IO) from None


def _seed_override(config: ScenarioConfig, cli_seed: Optional[int]) -> ScenarioConfig:
    from dataclasses import replace
    env = os.environ.get("UTA_SEED")
    if env is not None:
        try:
            config = replace(config, seed=int(env))
        except ValueError:
            raise CliError(f"UTA_SEED must be an integer, got {env!r}") from None
    if cli_seed is not None:
        config = replace(config, seed=cli_seed)
    return config


def _manifest(path: Path, argv: Sequence[str], outputs: Sequence[Path], inputs=(),
              config: Optional[ScenarioConfig] = None, seed=None, solvers=()) -> Path:
    base = path.parent
    manifest = {
        "tool": f"utacache {__version__}",
        "command": list(argv),
        "cwd": os.getcwd(),
        "config": config.to_dict() if config else None,
        "seed": seed,
        "solvers": list(solvers),
        "inputs": {str(p): sha256_file(p) for p in inputs},
        "outputs": {os.path.relpath(p, base): sha256_file(p) for p in sorted(outputs)},
    }
    return _write(path, json.dumps(manifest, indent=1, sort_keys=True) + "\n")


# -- commands ------------------------------------------------------------


def cmd_gen(args, argv) -> int:
    config = load_config(args.config) if args.config else ScenarioConfig()
    config = _seed_override(config, args.seed)
    world = generate_world(config)
    out = Path(args.out)
    outputs = [_write(out / "world.json", world.to_json() + "\n")]
    if world.n_ugs and world.n_cbs:
        inst, _ = world.base_instance()
        outputs.append(_write(out / "instance.json", inst.to_json() + "\n"))
    else:
        log.warning("world has no user groups or CBSs; no instance written")
    inputs = [args.config] if args.config else []
    _manifest(out / "manifest.json", argv, outputs, inputs, config, config.seed)
    print(f"world: {world.n_cbs} CBSs, {world.n_ugs} user groups -> {out}")
    return EXIT_OK


def cmd_solve(args, argv) -> int:
    try:
        inst = Instance.from_json(_read(args.instance))
    except (KeyError, ValueError, TypeError) as exc:
        raise CliError(f"invalid instance {args.instance}: {exc}") from None
    problems = validate_instance(inst)
    if problems:
        raise CliError("invalid instance: " + ", ".join(str(p) for p in problems))
    prev = None
    if args.prev:
        data = json.loads(_read(args.prev))
        prev = allocation_from_dict(data.get("allocation", data))
    try:
        result = get_solver(args.solver)(inst, prev)
    except InstanceTooLarge as exc:
        raise CliError(f"instance-too-large: {exc}") from None
    except ValueError as exc:
        raise CliError(str(exc)) from None
    text = json.dumps(result.to_dict(timing=args.timing), indent=1, sort_keys=True) + "\n"
    if args.out:
        out = _write(Path(args.out), text)
        inputs = [args.instance] + ([args.prev] if args.prev else [])
        _manifest(out.with_name(out.name + ".manifest.json"), argv, [out], inputs,
                  solvers=[args.solver])
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_sim(args, argv) -> int:
    try:
        world = World.from_json(_read(args.world))
    except (KeyError, ValueError, TypeError) as exc:
        raise CliError(f"invalid world {args.world}: {exc}") from None
    config = _seed_override(world.config, args.seed)
    world.config = config
    solvers = args.solver or ["greedy"]
    out = Path(args.out)
    outputs, inputs = [], [args.world]
    if args.scenario == "trace":
        from .trace import read_trace, simulate_trace
        if not args.trace:
            raise CliError("--scenario trace needs --trace PATH")
        if not Path(args.trace).is_file():
            raise CliError(f"trace file not found: {args.trace}", EXIT_IO)
        parsed = read_trace(args.trace)
        if parsed.malformed_count:
            log.warning("%d malformed trace lines skipped", parsed.malformed_count)
        inputs.append(args.trace)
        for name in solvers:
            timeline, workloads = simulate_trace(world, parsed, name, seed=config.seed)
            outputs += _write_timeline(out, timeline)
        outputs.append(_write(out / "workloads.json", workloads.to_json() + "\n"))
    else:
        sections = args.section_len or [config.section_len]
        for section_len in sections:
            for name in solvers:
                timeline = simulate_shuffle(world, name, section_len, seed=config.seed)
                outputs += _write_timeline(out, timeline)
    _manifest(out / "manifest.json", argv, outputs, inputs, config, config.seed, solvers)
    print(f"{len(outputs)} files -> {out}")
    return EXIT_OK


def _write_timeline(out: Path, timeline) -> list[Path]:
    stem = f"{timeline.solver}_s{timeline.section_len}_seed{timeline.seed}"
    return [_write(out / f"run_{stem}.csv", timeline.to_csv()),
            _write(out / f"hit_{stem}.csv", timeline.hit_ratio_csv())]


def cmd_verify(args, argv) -> int:
    from .verify import SUITES
    names = ["matroid", "formulation", "ratio", "relaxation", "marginal"] \
        if args.suite == "all" else [args.suite]
    results = []
    for name in names:
        res = SUITES[name](args.trials, args.seed)
        results.append(res)
        extra = ", ".join(f"{k}={v}" for k, v in res.stats.items())
        print(f"{name:<12} {'PASS' if res.ok else 'FAIL'}  trials={res.trials}  "
              f"failures={len(res.failures)}  {extra}")
    if args.out:
        out = _write(Path(args.out), json.dumps([r.to_dict() for r in results], indent=1,
                                                sort_keys=True, default=str) + "\n")
        _manifest(out.with_name(out.name + ".manifest.json"), argv, [out], seed=args.seed)
    return EXIT_OK if all(r.ok for r in results) else EXIT_VERIFY


def cmd_report(args, argv) -> int:
    from .report import aggregate, render_figures, table_csv
    src = Path(args.metrics_dir)
    if not src.is_dir():
        raise CliError(f"not a directory: {src}", EXIT_IO)
    runs = sorted(src.glob("run_*.csv"))
    if not runs:
        raise CliError(f"no run_*.csv files in {src}")
    table = aggregate(runs)
    out = Path(args.out) if args.out else src
    outputs = [_write(out / "aggregate.csv", table_csv(table))]
    if not args.no_figures:
        outputs += render_figures(table, sorted(src.glob("hit_*.csv")), out / "figures")
    _manifest(out / "report_manifest.json", argv, outputs, runs)
    sys.stdout.write(table_csv(table))
    return EXIT_OK


def cmd_rerun(args, argv) -> int:
    """Replay a manifest's command and compare every output hash."""
    path = Path(args.manifest)
    data = json.loads(_read(path))
    here = os.getcwd()
    try:
        os.chdir(data.get("cwd", here))
        code = main(data["command"])
    finally:
        os.chdir(here)
    if code != EXIT_OK:
        return code
    fresh = json.loads(_read(path))
    mismatched = [p for p, h in data["outputs"].items() if fresh["outputs"].get(p) != h]
    for p in mismatched:
        print(f"MISMATCH {p}")
    print(f"{len(data['outputs']) - len(mismatched)}/{len(data['outputs'])} outputs identical")
    return EXIT_VERIFY if mismatched else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="uta", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate a synthetic world and its instance")
    g.add_argument("--config", help="flat key = value config file (defaults if omitted)")
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--seed", type=int)
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="solve one instance")
    s.add_argument("instance")
    s.add_argument("--solver", choices=sorted(SOLVERS), default="greedy")
    s.add_argument("--prev", help="previous SolveResult JSON feeding the consistency weights")
    s.add_argument("--out", help="write the SolveResult here instead of stdout")
    s.add_argument("--timing", action="store_true", help="include elapsed_ms")
    s.set_defaults(func=cmd_solve)

    m = sub.add_parser("sim", help="simulate allocation policies over time")
    m.add_argument("world")
    m.add_argument("--solver", action="append", choices=sorted(set(SOLVERS) - {"exact"}))
    m.add_argument("--scenario", choices=["shuffle", "trace"], default="shuffle")
    m.add_argument("--section-len", type=int, action="append")
    m.add_argument("--trace")
    m.add_argument("--seed", type=int)
    m.add_argument("--out", required=True)
    m.set_defaults(func=cmd_sim)

    v = sub.add_parser("verify", help="randomised property audits")
    v.add_argument("--suite", choices=["matroid", "ratio", "relaxation", "all"], default="all")
    v.add_argument("--trials", type=int, default=200)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--out")
    v.set_defaults(func=cmd_verify)

    r = sub.add_parser("report", help="aggregate run CSVs and draw figures")
    r.add_argument("metrics_dir")
    r.add_argument("--out")
    r.add_argument("--no-figures", action="store_true")
    r.set_defaults(func=cmd_report)

    x = sub.add_parser("rerun", help="re-execute a manifest and check outputs")
    x.add_argument("manifest")
    x.set_defaults(func=cmd_rerun)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args, argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
