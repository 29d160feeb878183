"""AMB-DG against AMB and K-batch async on the linear regression workload.

Writes one averaged trace per scheme plus a comparison summary, e.g.

    python scripts/linreg_comparison.py --out-dir results/linreg --replications 10
"""
import argparse
import json
from pathlib import Path

from ambdg.config import load_config
from ambdg.experiment import compare_records, run_experiment, write_outputs

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
HORIZONS = {"ambdg": 120.0, "amb": 300.0, "kbatch": 120.0}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out-dir", default="results/linreg")
    ap.add_argument("--replications", type=int, default=10)
    ap.add_argument("--seed", type=int)
    args = ap.parse_args()

    out = Path(args.out_dir)
    named = {}
    for scheme, horizon in HORIZONS.items():
        cfg = load_config(CONFIGS / f"linreg_{scheme}.cfg")
        changes = {"replications": args.replications, "horizon_seconds": horizon}
        if args.seed is not None:
            changes["root_seed"] = args.seed
        result = run_experiment(cfg.with_(**changes))
        write_outputs(result, out / scheme)
        named[scheme] = result.records
        print(f"{scheme}: {len(result.records)} updates")
    report = compare_records(named, (0.5, 0.35, 0.2))
    (out / "comparison.json").write_text(json.dumps(report, indent=2) + "\n")
    print(json.dumps(report["time_to_error"], indent=2))


if __name__ == "__main__":
    main()
