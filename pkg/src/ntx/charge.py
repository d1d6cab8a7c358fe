"""Per-atom and per-subgroup hole/particle charges."""
from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, replace

import numpy as np

from .cube_io import GridField
from .molecule import MoleculeSpec
from .segmentation import LabelVolume

log = logging.getLogger(__name__)

NORMALIZATION_WARN_TOL = 0.05


@dataclass(frozen=True, eq=False)
class ChargeTable:
    per_atom_hole: np.ndarray
    per_atom_particle: np.ndarray
    per_subgroup_hole: np.ndarray
    per_subgroup_particle: np.ndarray
    total_hole: float
    total_particle: float
    percent: bool = False

    @property
    def per_atom_diff(self) -> np.ndarray:
        return self.per_atom_particle - self.per_atom_hole

    @property
    def per_subgroup_diff(self) -> np.ndarray:
        return self.per_subgroup_particle - self.per_subgroup_hole


def density(field: GridField) -> GridField:
    return field.with_values(field.values * field.values)


def fixed_order_sum(values) -> float:
    """Left-to-right float sum; np.sum would reorder (pairwise)."""
    total = 0.0
    for v in np.asarray(values, dtype=float).tolist():
        total += v
    return total


def atom_charges(field: GridField, lv: LabelVolume, n_atoms: int | None = None) -> np.ndarray:
    """vol * sum of squared values over the voxels owned by each atom.

    bincount accumulates in ascending voxel order, which fixes the rounding.
    """
    if not lv.matches(field):
        raise ValueError(
            f"label volume {lv.axis_counts} does not match field grid {field.axis_counts}"
        )
    v = field.values.ravel()
    sums = np.bincount(lv.labels.ravel(), weights=v * v, minlength=n_atoms or 0)
    if n_atoms is not None and sums.size > n_atoms:
        raise ValueError(f"label {sums.size - 1} out of range for {n_atoms} atoms")
    return sums * field.voxel_volume


def subgroup_charges(per_atom, m: MoleculeSpec) -> np.ndarray:
    per_atom = np.asarray(per_atom, dtype=float)
    out = np.zeros(m.n_groups)
    for j, g in enumerate(m.subgroups):
        acc = 0.0
        for i in sorted(g.members):
            acc += float(per_atom[i])
        out[j] = acc
    return out


def charge_table(hole: GridField, particle: GridField, lv: LabelVolume, m: MoleculeSpec) -> ChargeTable:
    if not hole.same_grid(particle):
        raise ValueError("hole and particle fields are sampled on different grids")
    qh = atom_charges(hole, lv, m.n_atoms)
    qp = atom_charges(particle, lv, m.n_atoms)
    table = ChargeTable(
        per_atom_hole=qh,
        per_atom_particle=qp,
        per_subgroup_hole=subgroup_charges(qh, m),
        per_subgroup_particle=subgroup_charges(qp, m),
        total_hole=fixed_order_sum(qh),
        total_particle=fixed_order_sum(qp),
    )
    for name, total in (("hole", table.total_hole), ("particle", table.total_particle)):
        if abs(total - 1.0) > NORMALIZATION_WARN_TOL:
            log.warning("%s NTO integrates to %.4f, not 1", name, total)
    return table


def normalize_percent(t: ChargeTable) -> ChargeTable:
    if not (t.total_hole > 0 and t.total_particle > 0):
        raise ValueError("cannot normalize: total hole or particle charge is zero")
    h = 100.0 / t.total_hole
    p = 100.0 / t.total_particle
    return replace(
        t,
        per_atom_hole=t.per_atom_hole * h,
        per_atom_particle=t.per_atom_particle * p,
        per_subgroup_hole=t.per_subgroup_hole * h,
        per_subgroup_particle=t.per_subgroup_particle * p,
        total_hole=100.0,
        total_particle=100.0,
        percent=True,
    )


# -- export ----------------------------------------------------------------


def charge_table_to_json(t: ChargeTable, m: MoleculeSpec) -> str:
    pct = normalize_percent(t) if not t.percent else t
    group_of = m.atom_to_group
    doc = {
        "totals": {"hole": t.total_hole, "particle": t.total_particle},
        "atoms": [
            {
                "index": a.index,
                "element": a.symbol,
                "subgroup": m.subgroups[group_of[a.index]].name,
                "q_hole": float(t.per_atom_hole[a.index]),
                "q_particle": float(t.per_atom_particle[a.index]),
                "q_diff": float(t.per_atom_diff[a.index]),
            }
            for a in m.atoms
        ],
        "subgroups": [
            {
                "name": g.name,
                "Q_hole": float(t.per_subgroup_hole[j]),
                "Q_particle": float(t.per_subgroup_particle[j]),
                "Q_diff": float(t.per_subgroup_diff[j]),
                "Q_hole_percent": float(pct.per_subgroup_hole[j]),
                "Q_particle_percent": float(pct.per_subgroup_particle[j]),
                "Q_diff_percent": float(pct.per_subgroup_diff[j]),
            }
            for j, g in enumerate(m.subgroups)
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


def charge_table_to_csv(t: ChargeTable, m: MoleculeSpec) -> str:
    pct = normalize_percent(t) if not t.percent else t
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["atom", "element", "subgroup", "q_hole", "q_particle", "q_diff"])
    group_of = m.atom_to_group
    for a in m.atoms:
        i = a.index
        w.writerow([i, a.symbol, m.subgroups[group_of[i]].name,
                    repr(float(t.per_atom_hole[i])), repr(float(t.per_atom_particle[i])),
                    repr(float(t.per_atom_diff[i]))])
    w.writerow([])
    w.writerow(["subgroup", "Q_hole", "Q_particle", "Q_diff", "Q_hole_%", "Q_particle_%", "Q_diff_%"])
    for j, g in enumerate(m.subgroups):
        w.writerow([g.name] + [repr(float(x)) for x in (
            t.per_subgroup_hole[j], t.per_subgroup_particle[j], t.per_subgroup_diff[j],
            pct.per_subgroup_hole[j], pct.per_subgroup_particle[j], pct.per_subgroup_diff[j])])
    return buf.getvalue()
