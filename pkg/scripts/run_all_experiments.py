#!/usr/bin/env python3
"""Run every shipped experiment config and the check batteries.

Writes CSV reports into ./out and prints one PASS/FAIL line per asserted
property. Exits nonzero if anything fails.
"""

import sys
from pathlib import Path

from dgtime.cli import main

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def run() -> int:
    rc = 0
    for cfg in sorted(CONFIG_DIR.glob("heat1d_q*.cfg")) + sorted(CONFIG_DIR.glob("nonautonomous_q*.cfg")) \
            + [CONFIG_DIR / "scalar_q1.cfg"]:
        print(f"== converge {cfg.name} ==")
        rc = max(rc, main(["converge", "--config", str(cfg), "--out", "out"]))
    for cfg in sorted(CONFIG_DIR.glob("maxreg_*.cfg")):
        print(f"== maxreg {cfg.name} ==")
        rc = max(rc, main(["maxreg", "--config", str(cfg), "--out", "out"]))
    print("== oracle-check ==")
    rc = max(rc, main(["oracle-check"]))
    print("== interp-check ==")
    rc = max(rc, main(["interp-check"]))
    return rc


if __name__ == "__main__":
    sys.exit(run())
