"""Run an intruder study preset and write results, summaries and instances.

    python scripts/run_study.py --preset desk --out results-desk
"""

import argparse
import sys
import time
from pathlib import Path

from robust_mapf.harness import preset, run_study, summary_markdown, write_study


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--preset", default="desk")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0, help="instance generation seed")
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    spec = preset(args.preset, instance_seed=args.seed)
    print(f"{spec.name}: {spec.n_experiments()} experiments on {', '.join(spec.maps)}", file=sys.stderr)
    t0 = time.monotonic()
    solved, results = run_study(
        spec, workers=args.workers,
        progress=lambda i, n: print(f"  {i}/{n}", file=sys.stderr) if i % 50 == 0 or i == n else None,
    )
    out = Path(args.out or f"results-{spec.name}")
    summary = write_study(out, solved, results)
    print(summary_markdown(summary))
    print(f"{len(results)} experiments in {time.monotonic() - t0:.0f} s -> {out}")


if __name__ == "__main__":
    main()
