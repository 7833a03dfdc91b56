"""Run the acceptance matrix and write acceptance.json next to the printed pass/fail lines."""
import argparse
import json
import sys
import warnings
from pathlib import Path

from wkam.acceptance import CRITERIA
from wkam.action import VelocityCapWarning


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--only", type=int, nargs="*", help="criterion numbers to run (default: all)")
    ap.add_argument("--out", default="out/acceptance.json")
    args = ap.parse_args()
    chosen = [c for i, c in enumerate(CRITERIA, 1) if not args.only or i in args.only]
    results = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", VelocityCapWarning)
        for crit in chosen:
            r = crit()
            print(f"{r.line()} ({r.seconds:.1f} s)", flush=True)
            results.append(r.as_dict())
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(results, indent=2, default=str) + "\n")
    return 0 if all(r["passed"] for r in results) else 1


if __name__ == "__main__":
    sys.exit(main())
