#!/usr/bin/env python3
"""Regenerate the committed fixture set under fixtures/."""

import json
import sys
from pathlib import Path

from anthroscan.fixtures import make_fixture_set

if __name__ == "__main__":
    target = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parent.parent / "fixtures"
    summary = make_fixture_set(target)
    print(json.dumps(summary, indent=2, sort_keys=True))
