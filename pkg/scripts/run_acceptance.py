#!/usr/bin/env python3
"""Run the acceptance criteria and exit nonzero if any fails.

    python3 scripts/run_acceptance.py            # all ten
    python3 scripts/run_acceptance.py 2 4 9      # a subset
"""

import argparse
import sys

from bersmetrics import acceptance


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("criteria", nargs="*", type=int, help="criterion numbers (default: all)")
    args = ap.parse_args()
    results = acceptance.run_all(select=set(args.criteria) or None)
    failed = [r for r in results if not r.ok]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
