"""Minimum, mean and ratio of the epoch minibatch b(t) as T_p varies."""
import argparse
import csv
import sys
from pathlib import Path

from ambdg.config import load_config
from ambdg.experiment import epoch_batch_totals

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--periods", default="1.25,2.5,5.0")
    ap.add_argument("--epochs", type=int, default=1000)
    ap.add_argument("--window", type=int, default=200)
    args = ap.parse_args()

    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["T_p", "window", "b_hat", "b_bar", "ratio"])
    base = load_config(CONFIGS / "linreg_ambdg.cfg")
    for T_p in (float(x) for x in args.periods.split(",")):
        cfg = base.with_(T_p=T_p, T_c=4 * T_p, d=10)
        b = epoch_batch_totals(cfg, args.epochs)
        for k in range(0, args.epochs - args.window + 1, args.window):
            w = b[k : k + args.window]
            writer.writerow([T_p, k // args.window, int(w.min()), w.mean(), w.mean() / w.min()])


if __name__ == "__main__":
    main()
