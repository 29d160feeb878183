"""Staleness distribution of K-batch async gradients at the reference linear-regression parameters."""
import argparse
import json
from pathlib import Path

from ambdg.config import load_config
from ambdg.hub import run_kbatch_async
from ambdg.metrics import staleness_histogram

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--updates", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=2019)
    ap.add_argument("--out", default="results/kbatch_staleness.json")
    args = ap.parse_args()

    # the schedule does not depend on the data, so a small d is enough
    cfg = load_config(CONFIGS / "linreg_kbatch.cfg").with_(
        d=10, horizon_seconds=None, horizon_updates=args.updates, root_seed=args.seed
    )
    hist = staleness_histogram(run_kbatch_async(cfg))
    tail = sum(v for k, v in hist.items() if k >= 5)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps({"histogram": {str(k): v for k, v in hist.items()}, "p_ge_5": tail}, indent=2) + "\n")
    for k, v in hist.items():
        print(f"{k:3d} {v:.4f} {'#' * int(round(v * 100))}")
    print(f"P(staleness >= 5) = {tail:.3f}")


if __name__ == "__main__":
    main()
