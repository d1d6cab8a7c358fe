"""Regenerate the small synthetic fixtures under fixtures/.

The large ~0.5M-voxel molecule case is not committed; tests and
bench_pipeline.py build it on demand with ntx.synthetic.molecule_case.
"""
import argparse
import json
from dataclasses import replace
from pathlib import Path

from ntx.cube_io import ANGSTROM_TO_BOHR, write_cube
from ntx.synthetic import two_gaussian_case

ROOT = Path(__file__).resolve().parents[1] / "fixtures"


def angstrom_variant(text: str) -> str:
    """Same cube rewritten with Angstrom geometry (negative voxel counts)."""
    lines = text.splitlines()
    out = lines[:2]
    natoms = abs(int(lines[2].split()[0]))
    for n, line in enumerate(lines[2 : 6 + natoms], start=2):
        tok = line.split()
        if 3 <= n <= 5:
            vals = [float(v) / ANGSTROM_TO_BOHR for v in tok[1:4]]
            out.append(f"{-int(tok[0]):5d}" + "".join(f" {v: .13E}" for v in vals))
        elif n == 2:
            vals = [float(v) / ANGSTROM_TO_BOHR for v in tok[1:4]]
            out.append(f"{int(tok[0]):5d}" + "".join(f" {v: .13E}" for v in vals))
        else:
            vals = [float(v) / ANGSTROM_TO_BOHR for v in tok[2:5]]
            out.append(f"{int(tok[0]):5d} {float(tok[1]): .13E}" + "".join(f" {v: .13E}" for v in vals))
    out += lines[6 + natoms :]
    return "\n".join(out) + "\n"


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=ROOT)
    args = ap.parse_args(argv)
    out = args.out

    ct = two_gaussian_case(shape=(20, 16, 16))
    ct.write(out / "two_gaussian", "ct")
    # same geometry, hole and particle on the same atom: a pure local excitation
    le = two_gaussian_case(hole_weights=(0.95, 0.25), particle_weights=(0.95, 0.25), shape=(20, 16, 16))
    le.write(out / "two_gaussian", "le")

    hole_text = write_cube(replace(ct.hole, orbital_id=41), ct.atoms)
    (out / "headers").mkdir(parents=True, exist_ok=True)
    (out / "headers" / "dset.cube").write_bytes(hole_text)
    (out / "headers" / "angstrom.cube").write_text(angstrom_variant(write_cube(ct.particle, ct.atoms).decode()))

    table = json.loads((out / "published_charges.json").read_text())
    series = [r["id"] for r in table["records"] if r["id"].startswith("series-")]
    batch = {
        "method": "both",
        "items": [{"name": rid.removeprefix("series-"), "charges": "published_charges.json", "record": rid} for rid in series],
    }
    (out / "batch_copper_series.json").write_text(json.dumps(batch, indent=2) + "\n")
    print(f"fixtures written to {out}")


if __name__ == "__main__":
    main()
