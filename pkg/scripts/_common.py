"""Shared helpers: write a run config next to the outputs and invoke the CLI."""
import argparse
import json
import os
import sys

from pinchnoma.cli import main


def parser(doc: str, trials: int) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=doc)
    p.add_argument("--out", default="results")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=trials)
    p.add_argument("--workers", type=int, default=1)
    return p


def run(out: str, name: str, config: dict, argv: list) -> None:
    """Save ``config`` as ``out/name.json`` and run the CLI against it; exit on failure."""
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, f"{name}.json")
    with open(path, "w") as fh:
        json.dump(config, fh, indent=2)
    code = main([*argv, "--config", path])
    if code:
        sys.exit(code)
