"""Run the `coal` experiment. Extra arguments are passed to the CLI.

    python3 scripts/run_coal.py --out out/coal --seed 0
"""
import sys

from changesurface.cli import main

if __name__ == "__main__":
    sys.exit(main(["coal", *sys.argv[1:]]))
