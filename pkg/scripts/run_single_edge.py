"""Single source-sink pair: rescaled cost must follow (n/(n+1))^((q-1)/q).

Writes sweep.csv and per-n reports to ./out_single_edge/.
"""

import sys
from pathlib import Path

from branchflow import CostParams, single_edge, sweep, sweep_to_csv
from branchflow.measures import atomic_write_text


def main() -> int:
    q = 2.0
    config = single_edge()
    n_list = [1, 2, 4, 8, 16]
    records, _ = sweep(config, q, n_list, CostParams(q=q))
    out = Path("out_single_edge")
    out.mkdir(exist_ok=True)
    atomic_write_text(out / "sweep.csv", sweep_to_csv(records))
    print(f"{'n':>4} {'rescaled':>12} {'closed form':>12}")
    worst = 0.0
    for r in records:
        exact = (r.n / (r.n + 1.0)) ** ((q - 1.0) / q)
        worst = max(worst, abs(r.rescaled - exact))
        print(f"{r.n:>4} {r.rescaled:>12.8f} {exact:>12.8f}")
    print(f"max deviation {worst:.2e} (tolerance 1e-4); csv in {out}/")
    return 0 if worst < 1e-4 else 1


if __name__ == "__main__":
    sys.exit(main())
