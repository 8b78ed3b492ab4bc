#!/usr/bin/env python3
"""
COVID-19 chest CT classification pipeline.

Usage:
    python run_pipeline.py split --data data/ct --out runs/manifest.tsv
    python run_pipeline.py train --config config.yml
    python run_pipeline.py evaluate --ckpt runs/latest/best.ckpt --data runs/manifest.tsv:test
    python run_pipeline.py predict --ckpt runs/latest/best.ckpt --image scan.png
"""

import sys
from pathlib import Path

# Add the package to the path when run from a checkout
sys.path.insert(0, str(Path(__file__).parent))

from ctclassifier.cli import main

if __name__ == "__main__":
    sys.exit(main())
