"""Transfer matrices for every published subgroup-charge record in fixtures/published_charges.json.

Prints charge transfer (CT) and local excitation (LE) totals per method, the
donor -> acceptor entries, and the power-vs-gradient exceed count over the
whole table.
"""
import argparse
import json
from pathlib import Path

import numpy as np

from ntx.transfer import partition_donors_acceptors, solve_proportional, solve_quadratic

FIX = Path(__file__).resolve().parents[1] / "fixtures" / "published_charges.json"


def percent(v):
    v = np.asarray(v, dtype=float)
    return v * (100.0 / v.sum())


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--table", type=Path, default=FIX)
    ap.add_argument("--json", type=Path, help="also write all results here")
    args = ap.parse_args(argv)

    records = json.loads(args.table.read_text())["records"]
    dump = []
    exceed = total = 0
    for rec in records:
        names = rec["subgroups"]
        p = partition_donors_acceptors(percent(rec["hole"]), percent(rec["particle"]))
        print(f"\n{rec['id']}  ({rec['molecule']}, state {rec['state']})")
        print("  donors: " + ", ".join(names[i] for i in p.donors) + "   acceptors: " + ", ".join(names[j] for j in p.acceptors))
        entry = {"id": rec["id"], "subgroups": names}
        for r in (solve_proportional(p), solve_quadratic(p)):
            ct = r.charge_transfer
            print(f"  {r.method:<20} CT {ct:6.1f}%  LE {r.local_excitation:6.1f}%")
            for a, i in enumerate(p.donors):
                for b, j in enumerate(p.acceptors):
                    if r.T[a, b] >= 0.05:
                        print(f"      {names[i]:>8} -> {names[j]:<8} {r.T[a, b]:6.1f}%")
            entry[r.method] = r.full_matrix.tolist()
        dump.append(entry)
        for key in ("hole", "particle"):
            for a, b in zip(rec[key], rec[f"{key}_gradient"]):
                total += 1
                exceed += round(abs(a - b), 1) > 2.0
    print(f"\n{exceed} such cases out of {total} differ by more than 2 percentage points")
    if args.json:
        args.json.write_text(json.dumps(dump, indent=2) + "\n")


if __name__ == "__main__":
    main()
