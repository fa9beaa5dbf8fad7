"""Command-line entry point: ``changesurface <command> [data] [flags]``.

Settings come from ``RunConfig`` defaults, then an optional ``--config``
file of ``key=value`` lines, then explicit flags.  Exit status is 0 on
success, 1 when the pipeline fails and 2 on usage errors.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields

from . import experiments
from .errors import ChangeSurfaceError
from .experiments import RunConfig
from .logdet import WeylStrategy

COMMANDS = {
    "synthetic": experiments.run_synthetic,
    "coal": experiments.run_coal,
    "benchmark-logdet": experiments.run_benchmark_logdet,
    "fit": experiments.run_fit,
    "predict": experiments.run_predict,
}
_FIELDS = {f.name: f for f in fields(RunConfig)}
_TRUE, _FALSE = {"1", "true", "yes", "on"}, {"0", "false", "no", "off"}


def _sizes(text: str) -> tuple:
    return tuple(int(v) for v in text.replace(",", " ").split())


def _convert(name: str, text: str):
    default = _FIELDS[name].default
    if name == "sizes":
        return _sizes(text)
    if isinstance(default, bool):
        low = text.strip().lower()
        if low not in _TRUE | _FALSE:
            raise ValueError(f"expected a boolean, got {text!r}")
        return low in _TRUE
    if isinstance(default, int) or name == "time_axis":
        return int(text)
    if isinstance(default, float):
        return float(text)
    return text.strip()


def read_config(path) -> dict:
    """Parse ``key=value`` lines; ``#`` starts a comment and dashes in keys map to underscores."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key = key.strip().replace("-", "_")
            if not sep or key not in _FIELDS or key == "command":
                raise ValueError(f"{path}:{lineno}: bad config line {raw.strip()!r}")
            out[key] = _convert(key, value)
    return out


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    p = argparse.ArgumentParser(prog="changesurface", argument_default=S,
                                description="Change-surface Gaussian process experiments.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("data", nargs="?", help="dataset CSV (fit, predict; optional for coal)")
    p.add_argument("--config", help="key=value settings file; flags take precedence")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--r", type=int, help="number of regimes")
    p.add_argument("--q", type=int, help="spectral mixture components per dimension")
    p.add_argument("--m", type=int, help="random features per weighting function")
    p.add_argument("--strategy", help="exact, middle or greedy:S")
    p.add_argument("--dense-cap", type=int)
    p.add_argument("--test-frac", type=float)
    p.add_argument("--sort-line", action="store_const", const=True)
    p.add_argument("--with-var", action="store_const", const=True)
    p.add_argument("--time-axis", type=int)
    p.add_argument("--model", help="serialized model (predict)")
    p.add_argument("--points", help="CSV of prediction inputs (predict)")
    p.add_argument("--restarts", type=int)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--init-iters", type=int)
    p.add_argument("--partial-iters", type=int)
    p.add_argument("--g", type=int, help="candidate weighting functions")
    p.add_argument("--h", type=int, help="kernel draws per candidate")
    p.add_argument("--no-ablation", dest="ablation", action="store_const", const=False)
    p.add_argument("--sizes", type=_sizes, help="benchmark sizes, comma separated")
    p.add_argument("--greedy-s", type=int)
    p.add_argument("-v", "--verbose", action="store_const", const=True)
    return p


def parse_config(argv=None) -> RunConfig:
    parser = build_parser()
    ns = vars(parser.parse_args(argv))
    settings = {}
    if "config" in ns:
        try:
            settings = read_config(ns.pop("config"))
        except (OSError, ValueError) as exc:
            parser.error(str(exc))
    settings.update(ns)
    cfg = RunConfig(**settings)
    try:
        WeylStrategy.parse(cfg.strategy)
    except ValueError as exc:
        parser.error(str(exc))
    if cfg.command in ("fit", "predict") and not cfg.data:
        parser.error(f"{cfg.command} needs a dataset path")
    if cfg.command == "predict" and not cfg.model:
        parser.error("predict needs --model")
    return cfg


def main(argv=None) -> int:
    cfg = parse_config(argv)  # argparse exits with status 2 on usage errors
    logging.basicConfig(level=logging.INFO if cfg.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[cfg.command](cfg)
    except (ChangeSurfaceError, OSError) as exc:
        print(f"changesurface: error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote results to {cfg.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
