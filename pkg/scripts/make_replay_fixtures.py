#!/usr/bin/env python3
"""Regenerate fixtures/<case>/ replay directories from the bundled demo corpus.

Each directory holds the description plus one digest-keyed recording per
prompt the pipeline sends, so `pragmos run --provider replay` works offline.
"""

import sys
from pathlib import Path

from pragmos.demo import DEMO_CASES, write_replay_dir


def main() -> int:
    root = Path(__file__).resolve().parent.parent / "fixtures"
    for name, case in sorted(DEMO_CASES.items()):
        target = write_replay_dir(case, root / name)
        files = sorted(p.name for p in target.glob("*.json"))
        print(f"{name}: {len(files)} recordings in {target}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
