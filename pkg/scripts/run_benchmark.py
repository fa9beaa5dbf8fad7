"""Run the `benchmark-logdet` experiment. Extra arguments are passed to the CLI.

    python3 scripts/run_benchmark.py --out out/benchmark --seed 0
"""
import sys

from changesurface.cli import main

if __name__ == "__main__":
    sys.exit(main(["benchmark-logdet", *sys.argv[1:]]))
