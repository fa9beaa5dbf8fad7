"""Run the `synthetic` experiment. Extra arguments are passed to the CLI.

    python3 scripts/run_synthetic.py --out out/synthetic --seed 0
"""
import sys

from changesurface.cli import main

if __name__ == "__main__":
    sys.exit(main(["synthetic", *sys.argv[1:]]))
