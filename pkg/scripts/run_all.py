"""Run every config in configs/ and print one status line per experiment."""

import argparse
import sys
from pathlib import Path

from siolab.harness.cli import main

ROOT = Path(__file__).resolve().parents[1]


def run_all(config_dir: Path, out_root: Path) -> int:
    worst = 0
    for cfg in sorted(config_dir.glob("*.toml")):
        code = main(["run", str(cfg), "--output-dir", str(out_root / cfg.stem)])
        print(f"{cfg.stem}: exit {code}")
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--configs", type=Path, default=ROOT / "configs")
    p.add_argument("--out", type=Path, default=ROOT / "out")
    args = p.parse_args()
    sys.exit(run_all(args.configs, args.out))
