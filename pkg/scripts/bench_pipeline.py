"""Stage timings on the synthetic 97-atom, 80^3-voxel molecule case."""
import argparse
import tempfile
import time
from pathlib import Path

from ntx.charge import charge_table, normalize_percent
from ntx.cube_io import read_cube
from ntx.molecule import build_molecule, load_group_config
from ntx.segmentation import segment_power_diagram
from ntx.synthetic import molecule_case
from ntx.transfer import partition_donors_acceptors, solve_proportional, solve_quadratic


def timed(label, fn, rows):
    t0 = time.perf_counter()
    out = fn()
    rows.append((label, time.perf_counter() - t0))
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--shape", type=int, nargs=3, default=(80, 80, 80))
    ap.add_argument("--atoms", type=int, default=97)
    ap.add_argument("--threads", type=int, nargs="+", default=[1, 2, 4, 8])
    args = ap.parse_args(argv)

    with tempfile.TemporaryDirectory() as tmp:
        paths = molecule_case(n_atoms=args.atoms, shape=tuple(args.shape)).write(Path(tmp), "mol")
        rows = []
        hole, atoms = timed("parse hole cube", lambda: read_cube(paths["hole"]), rows)
        particle, _ = timed("parse particle cube", lambda: read_cube(paths["particle"]), rows)
        m = build_molecule(atoms, load_group_config(paths["groups"]))
        reference = None
        for w in args.threads:
            lv = timed(f"power diagram ({w} threads)", lambda: segment_power_diagram(hole, m, workers=w), rows)
            if reference is None:
                reference = lv.labels
            assert (lv.labels == reference).all(), "labels depend on thread count"
        table = timed("charges", lambda: charge_table(hole, particle, lv, m), rows)
        pct = normalize_percent(table)
        p = partition_donors_acceptors(pct.per_subgroup_hole, pct.per_subgroup_particle)
        timed("proportional transfer", lambda: solve_proportional(p), rows)
        timed("quadratic transfer", lambda: solve_quadratic(p), rows)

    print(f"{hole.n_voxels} voxels, {m.n_atoms} atoms, {m.n_groups} subgroups")
    for label, t in rows:
        print(f"  {label:<28} {1e3 * t:9.1f} ms")


if __name__ == "__main__":
    main()
