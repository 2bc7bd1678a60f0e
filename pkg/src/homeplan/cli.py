"""``homeplan run | validate | report``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .completion import RuleError, default_rules, load_rules
from .harness import (ConfigError, PipelineVariant, RunConfig, render_report,
                      run_pipeline, validate_tasks, write_validation)
from .scene import SceneError, load_task_bundle


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="homeplan", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one pipeline variant over a task bundle")
    r.add_argument("--bundle", required=True, type=Path)
    r.add_argument("--variant", required=True,
                   choices=[v.value for v in PipelineVariant])
    r.add_argument("--client", help="endpoint base URL or scripted:PATH "
                                    "(the API key is read from OPENAI_API_KEY)")
    r.add_argument("--model", default="scripted", help="model name sent to the endpoint")
    r.add_argument("--rules", type=Path, help="completion rule file (default: bundled)")
    r.add_argument("--tokenizer", default="approx", help="approx or bpe:PATH")
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--out", required=True, type=Path)

    v = sub.add_parser("validate", help="check gt_actions and process differentiation")
    v.add_argument("--bundle", required=True, type=Path)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--perm-cap", type=int, default=720)
    v.add_argument("--rules", type=Path)
    v.add_argument("--out", required=True, type=Path)

    rep = sub.add_parser("report", help="re-render summary.txt from report.json")
    rep.add_argument("--in", dest="in_dir", required=True, type=Path)
    return p


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            config = RunConfig(bundle=args.bundle, variant=args.variant,
                               client=args.client, out=args.out, rules=args.rules,
                               tokenizer=args.tokenizer, jobs=args.jobs,
                               model=args.model)
            run_pipeline(config)
            sys.stdout.write((args.out / "summary.txt").read_text())
        elif args.command == "validate":
            tasks = load_task_bundle(args.bundle.read_text())
            rules = load_rules(args.rules.read_text()) if args.rules else default_rules()
            results = validate_tasks(tasks, rules, args.seed, args.perm_cap)
            sys.stdout.write(write_validation(results, args.out))
        else:
            sys.stdout.write(render_report(args.in_dir))
    except (ConfigError, SceneError, RuleError, OSError) as exc:
        print(f"homeplan: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
