"""Run the built-in presets (or a config) and print the summary table.

    python scripts/run_presets.py [--config configs/full.yaml] [--out out/]
"""
import argparse
import sys
from pathlib import Path

from reflectlab.cli import execute, load_config, parse_config, summary_text, write_outputs


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config")
    ap.add_argument("--out", default="out")
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--parallel", type=int, default=1)
    args = ap.parse_args(argv)
    config = load_config(args.config) if args.config else parse_config({"include_presets": "all"})
    records = execute(config, args.seed, args.parallel)
    write_outputs(Path(args.out), records, args.seed, args.config or "presets")
    sys.stdout.write(summary_text(records))


if __name__ == "__main__":
    main()
