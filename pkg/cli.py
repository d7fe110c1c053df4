#!/usr/bin/env python3
"""
Source-checkout launcher for the topk-ranking CLI.

Usage:
  python cli.py simulate --n 200 --p 0.25 --L 20 --out data.txt
  python cli.py rank data.txt --method mle --K 10
  python cli.py experiment --preset fig1a --out fig1a.csv
  python cli.py check-theory --format text

Installed packages expose the same commands as `topk-ranking`.
"""

import sys
from pathlib import Path

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent / "src"))

from topk_ranking.cli import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
