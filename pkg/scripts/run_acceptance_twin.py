"""Run the acceptance twin and its mu = 0 control, then print the headline numbers."""

import argparse
from pathlib import Path

from nsalpha_da.config import load_config
from nsalpha_da.experiment import run_experiment

ROOT = Path(__file__).resolve().parents[1]


def summarize(name, res):
    recs = res.run.records
    e0 = recs[0].err_combined
    print(f"{name}: err_combined {e0:.4e} -> {recs[-1].err_combined:.4e} (ratio {recs[-1].err_combined / e0:.3e})")
    if res.fit is not None:
        print(f"{name}: gamma {res.fit.gamma:.4f}, r^2 {res.fit.r_squared:.5f} {res.fit.note}")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(ROOT / "out"))
    ap.add_argument("--skip-control", action="store_true")
    args = ap.parse_args()
    runs = [("acceptance", ROOT / "configs" / "acceptance.ini")]
    if not args.skip_control:
        runs.append(("control", ROOT / "configs" / "control.ini"))
    for name, path in runs:
        res = run_experiment(load_config(path), Path(args.out) / name)
        summarize(name, res)


if __name__ == "__main__":
    main()
