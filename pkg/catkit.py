#!/usr/bin/env python3
"""
catkit entry point
==================

Runs one catkit subcommand per process, e.g.

    python catkit.py gen-toy --out data/toy
    python catkit.py train --manifest data/toy/manifest.csv --out runs/cat
"""

import os
import sys

# Add the project root to Python path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

# Load environment variables (CATKIT_THREADS) from .env
from dotenv import load_dotenv

load_dotenv()


def main():
    from app.cli import run

    sys.exit(run())


if __name__ == "__main__":
    main()
