"""figures --spec <json> --out <dir>: render one spec file (or a list of specs)."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from gamefigs.render import FigureError, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="figures", description=__doc__)
    parser.add_argument("--spec", required=True, help="figure spec JSON (an object or a list of objects)")
    parser.add_argument("--out", required=True, help="output directory for the rendered files")
    args = parser.parse_args(argv)

    spec_path = Path(args.spec)
    try:
        payload = json.loads(spec_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        print(f"cannot load spec {spec_path}: {exc}", file=sys.stderr)
        return 1
    specs = payload if isinstance(payload, list) else [payload]
    try:
        for spec in specs:
            target = render(spec, args.out, base_dir=spec_path.parent)
            print(target)
    except FigureError as exc:
        print(f"figure error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
