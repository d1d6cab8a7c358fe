"""Atoms, subgroups and the subgroup config file."""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .cube_io import ANGSTROM_TO_BOHR, CubeAtomRecord

ELEMENT_SYMBOLS = (
    "X",
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne",
    "Na", "Mg", "Al", "Si", "P", "S", "Cl", "Ar", "K", "Ca",
    "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn",
    "Ga", "Ge", "As", "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr",
    "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In", "Sn",
    "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd",
    "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb",
    "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg",
    "Tl", "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th",
    "Pa", "U",
)
ATOMIC_NUMBERS = {s: z for z, s in enumerate(ELEMENT_SYMBOLS) if z > 0}

# Bondi, J. Phys. Chem. 68, 441 (1964), Table I; values in Angstrom.
_BONDI_ANGSTROM = {
    "H": 1.20, "He": 1.40, "Li": 1.82, "C": 1.70, "N": 1.55, "O": 1.52,
    "F": 1.47, "Ne": 1.54, "Na": 2.27, "Mg": 1.73, "Si": 2.10, "P": 1.80,
    "S": 1.80, "Cl": 1.75, "Ar": 1.88, "K": 2.75, "Ni": 1.63, "Cu": 1.40,
    "Zn": 1.39, "Ga": 1.87, "As": 1.85, "Se": 1.90, "Br": 1.85, "Kr": 2.02,
    "Pd": 1.63, "Ag": 1.72, "Cd": 1.58, "In": 1.93, "Sn": 2.17, "Te": 2.06,
    "I": 1.98, "Xe": 2.16, "Pt": 1.72, "Au": 1.66, "Hg": 1.55, "Tl": 1.96,
    "Pb": 2.02, "U": 1.86,
}
BONDI_RADII_BOHR = {ATOMIC_NUMBERS[s]: r * ANGSTROM_TO_BOHR for s, r in _BONDI_ANGSTROM.items()}

REST_GROUP = "REST"


class GroupConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Atom:
    index: int
    element: int
    position: tuple[float, float, float]
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"atom {self.index}: radius must be positive")

    @property
    def symbol(self) -> str:
        return ELEMENT_SYMBOLS[self.element] if self.element < len(ELEMENT_SYMBOLS) else str(self.element)


@dataclass(frozen=True)
class Subgroup:
    name: str
    members: frozenset[int]
    color: Optional[str] = None


@dataclass(frozen=True, eq=False)
class MoleculeSpec:
    atoms: tuple[Atom, ...]
    subgroups: tuple[Subgroup, ...]

    def __post_init__(self):
        atoms = tuple(self.atoms)
        groups = tuple(self.subgroups)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "subgroups", groups)
        if not atoms:
            raise GroupConfigError("molecule has no atoms")
        if not groups:
            raise GroupConfigError("molecule has no subgroups")
        if [a.index for a in atoms] != list(range(len(atoms))):
            raise GroupConfigError("atom indices must be 0..N-1 in order")
        names = [g.name for g in groups]
        if any(not n for n in names):
            raise GroupConfigError("subgroup names must be non-empty")
        if len(set(names)) != len(names):
            raise GroupConfigError(f"duplicate subgroup names: {names}")
        owner = np.full(len(atoms), -1, dtype=np.int64)
        for j, g in enumerate(groups):
            for i in g.members:
                if not 0 <= i < len(atoms):
                    raise GroupConfigError(f"group {g.name!r} references atom {i}, molecule has {len(atoms)}")
                if owner[i] >= 0:
                    raise GroupConfigError(
                        f"atom {i} is in both {groups[owner[i]].name!r} and {g.name!r}"
                    )
                owner[i] = j
        missing = np.flatnonzero(owner < 0)
        if missing.size:
            raise GroupConfigError(f"atoms not assigned to any group: {missing.tolist()}")
        owner.setflags(write=False)
        object.__setattr__(self, "_owner", owner)

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    @property
    def n_groups(self) -> int:
        return len(self.subgroups)

    @property
    def names(self) -> list[str]:
        return [g.name for g in self.subgroups]

    @property
    def colors(self) -> list[Optional[str]]:
        return [g.color for g in self.subgroups]

    @property
    def positions(self) -> np.ndarray:
        return np.array([a.position for a in self.atoms], dtype=float)

    @property
    def radii(self) -> np.ndarray:
        return np.array([a.radius for a in self.atoms], dtype=float)

    @property
    def atom_to_group(self) -> np.ndarray:
        """Subgroup index for each atom (read-only array)."""
        return self._owner


def subgroup_of(m: MoleculeSpec, atom_index: int) -> int:
    if not 0 <= atom_index < m.n_atoms:
        raise IndexError(f"atom index {atom_index} out of range for {m.n_atoms} atoms")
    return int(m.atom_to_group[atom_index])


# -- config parsing --------------------------------------------------------

_RANGE = re.compile(r"^\s*(\d+)\s*-\s*(\d+)\s*$")


def _expand_indices(items, group_name) -> list[int]:
    out = []
    for item in items:
        if isinstance(item, bool):
            raise GroupConfigError(f"group {group_name!r}: bad atom entry {item!r}")
        if isinstance(item, int):
            out.append(item)
            continue
        if isinstance(item, str):
            m = _RANGE.match(item)
            if m:
                lo, hi = int(m.group(1)), int(m.group(2))
                if hi < lo:
                    raise GroupConfigError(f"group {group_name!r}: empty range {item!r}")
                out.extend(range(lo, hi + 1))
                continue
            if item.strip().isdigit():
                out.append(int(item))
                continue
        raise GroupConfigError(f"group {group_name!r}: bad atom entry {item!r}")
    if len(set(out)) != len(out):
        raise GroupConfigError(f"group {group_name!r} lists an atom twice")
    return out


def _parse_color(value) -> Optional[str]:
    if value is None:
        return None
    if isinstance(value, str):
        if re.fullmatch(r"#[0-9a-fA-F]{6}", value):
            return value.lower()
        raise GroupConfigError(f"color must be '#rrggbb', got {value!r}")
    if isinstance(value, (list, tuple)) and len(value) == 3:
        if all(isinstance(c, int) and 0 <= c <= 255 for c in value):
            return "#{:02x}{:02x}{:02x}".format(*value)
    raise GroupConfigError(f"color must be '#rrggbb' or [r, g, b], got {value!r}")


def _normalize_config(config) -> dict:
    # Shorthand {"G1": [0], "G2": [1]} is accepted alongside the full form.
    if isinstance(config, dict) and "groups" not in config:
        return {"groups": [{"name": k, "atoms": v} for k, v in config.items()]}
    if isinstance(config, list):
        return {"groups": config}
    return config


def build_molecule(atoms: Sequence[CubeAtomRecord], subgroup_config: Union[str, dict, list]) -> MoleculeSpec:
    """Combine cube atom records with a subgroup config (JSON text or parsed)."""
    if isinstance(subgroup_config, (str, bytes)):
        try:
            subgroup_config = json.loads(subgroup_config)
        except json.JSONDecodeError as exc:
            raise GroupConfigError(f"group config is not valid JSON: {exc}") from exc
    cfg = _normalize_config(subgroup_config)
    if not isinstance(cfg, dict) or not isinstance(cfg.get("groups"), list):
        raise GroupConfigError("group config needs a 'groups' list")

    n = len(atoms)
    radii_cfg = cfg.get("radii", {}) or {}
    by_element = {}
    for key, r in (radii_cfg.get("element", {}) or {}).items():
        z = ATOMIC_NUMBERS.get(key) if not str(key).isdigit() else int(key)
        if z is None:
            raise GroupConfigError(f"unknown element in radius overrides: {key!r}")
        by_element[z] = float(r) * ANGSTROM_TO_BOHR
    by_atom = {int(k): float(r) * ANGSTROM_TO_BOHR for k, r in (radii_cfg.get("atom", {}) or {}).items()}
    for i in by_atom:
        if not 0 <= i < n:
            raise GroupConfigError(f"radius override for atom {i}, molecule has {n} atoms")

    mol_atoms = []
    for i, rec in enumerate(atoms):
        if i in by_atom:
            r = by_atom[i]
        elif rec.atomic_number in by_element:
            r = by_element[rec.atomic_number]
        elif rec.atomic_number in BONDI_RADII_BOHR:
            r = BONDI_RADII_BOHR[rec.atomic_number]
        else:
            sym = ELEMENT_SYMBOLS[rec.atomic_number] if rec.atomic_number < len(ELEMENT_SYMBOLS) else rec.atomic_number
            raise GroupConfigError(f"no van der Waals radius for element {sym} (atom {i}); add an override")
        mol_atoms.append(Atom(i, rec.atomic_number, tuple(rec.position), r))

    groups = []
    rest_at = None
    for g in cfg["groups"]:
        if not isinstance(g, dict) or "name" not in g:
            raise GroupConfigError(f"group entry needs a name: {g!r}")
        name = str(g["name"])
        color = _parse_color(g.get("color"))
        if name == REST_GROUP and not g.get("atoms"):
            rest_at = len(groups)
            groups.append([name, [], color])
            continue
        groups.append([name, _expand_indices(g.get("atoms", []), name), color])

    if rest_at is not None:
        seen = {i for _, members, _ in groups for i in members}
        groups[rest_at][1] = [i for i in range(n) if i not in seen]
        if not groups[rest_at][1]:
            del groups[rest_at]

    return MoleculeSpec(
        atoms=tuple(mol_atoms),
        subgroups=tuple(Subgroup(name, frozenset(members), color) for name, members, color in groups),
    )


def load_group_config(path: Union[str, Path]):
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise GroupConfigError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from exc
