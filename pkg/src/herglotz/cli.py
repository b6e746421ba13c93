"""Command-line entry point.

Exit status: 0 when every check passes, 1 when a check fails, 2 for an
invalid configuration and 3 when a solver fails. With several ``--config``
arguments the first nonzero status in command-line order is returned.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import config as cfgmod
from . import runner
from .errors import ConfigError, ScenarioError

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_SCENARIO = 0, 1, 2, 3


def _threads(n_jobs: int) -> int:
    cap = os.environ.get("HERGLOTZ_THREADS")
    try:
        limit = int(cap) if cap else (os.cpu_count() or 1)
    except ValueError:
        limit = 1
    return max(1, min(limit, n_jobs))


def _load(name, seed):
    cfg = cfgmod.load(cfgmod.resolve(name))
    if seed is not None:
        cfg.raw["seed"] = seed
    return cfg


def _out_dir(cfg, args, n_configs: int) -> Path:
    if args.out is None:
        return cfg.output_dir()
    # several scenarios share --out: one subdirectory each
    return Path(args.out) / cfg.scenario if n_configs > 1 else Path(args.out)


def _run_one(name, args, n_configs) -> tuple[int, str]:
    try:
        cfg = _load(name, args.seed)
        summary = runner.run(cfg, _out_dir(cfg, args, n_configs))
    except ConfigError as exc:
        return EXIT_CONFIG, f"config error: {exc}"
    except ScenarioError as exc:
        return EXIT_SCENARIO, f"scenario error: {exc}"
    lines = [f"{cfg.scenario}:"]
    for c in summary.checks:
        lines.append(f"  {'PASS' if c.passed else 'FAIL'} {c.name} = {c.value:.6g} (tolerance {c.tolerance:g})")
    return (EXIT_OK if summary.passed else EXIT_FAIL), "\n".join(lines)


def cmd_run(args) -> int:
    names = args.config
    with ThreadPoolExecutor(max_workers=_threads(len(names))) as pool:
        results = list(pool.map(lambda n: _run_one(n, args, len(names)), names))
    status = EXIT_OK
    for code, text in results:
        print(text, file=sys.stderr if code in (EXIT_CONFIG, EXIT_SCENARIO) else sys.stdout)
        if status == EXIT_OK and code != EXIT_OK:
            status = code
    return status


def cmd_convergence(args) -> int:
    status = EXIT_OK
    for name in args.config:
        try:
            cfg = _load(name, args.seed)
            table = runner.convergence(cfg, args.levels)
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            status = status or EXIT_CONFIG
            continue
        except ScenarioError as exc:
            print(f"scenario error: {exc}", file=sys.stderr)
            status = status or EXIT_SCENARIO
            continue
        out = _out_dir(cfg, args, len(args.config))
        out.mkdir(parents=True, exist_ok=True)
        table.write(out / "convergence.csv")
        print(f"{cfg.scenario}:")
        print("  h, error, order")
        for h, e, p in table.rows():
            print(f"  {h:.6g}, {e:.6g}, {p:.4g}")
    return status


def cmd_list(args) -> int:
    for path in cfgmod.bundled():
        raw = json.loads(path.read_text())
        print(f"{path.stem:24s} {raw.get('kind', '?'):14s} {raw.get('description', '')}")
    return EXIT_OK


def cmd_validate(args) -> int:
    status = EXIT_OK
    for name in args.config:
        try:
            cfg = _load(name, None)
            # build the objects too, catching bad expressions and parameters
            if cfg.kind.startswith("field-"):
                runner.field_setup(cfg)
            else:
                spec = cfg.lagrangian()
                if cfg.kind == "mechanics":
                    cfg.generators(spec.n_dof)
            print(f"{name}: ok ({cfg.kind})")
        except ConfigError as exc:
            print(f"{name}: config error: {exc}", file=sys.stderr)
            status = EXIT_CONFIG
        except (ValueError, ArithmeticError) as exc:
            print(f"{name}: config error: {exc}", file=sys.stderr)
            status = EXIT_CONFIG
    return status


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="herglotz", description="Action-dependent Lagrangian dynamics and Noether charges.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, with_out=True):
        sp.add_argument("--config", action="append", required=True, metavar="PATH",
                        help="scenario config file or bundled scenario name (repeatable)")
        if with_out:
            sp.add_argument("--out", metavar="DIR", help="output directory (overrides the config)")
            sp.add_argument("--seed", type=int, metavar="U64", help="random seed recorded in the config")

    sp = sub.add_parser("run", help="run scenarios and evaluate their checks")
    common(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("convergence", help="self-convergence table under step halving")
    common(sp)
    sp.add_argument("--levels", type=int, default=3, metavar="N")
    sp.set_defaults(func=cmd_convergence)

    sp = sub.add_parser("list-scenarios", help="list bundled scenarios")
    sp.set_defaults(func=cmd_list)

    sp = sub.add_parser("validate-config", help="schema-check configs without running them")
    common(sp, with_out=False)
    sp.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "seed", None) is not None and not 0 <= args.seed < 2**64:
        print("config error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
