"""Analytic test fields: sums of Gaussians placed on atoms."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .cube_io import CubeAtomRecord, GridField, save_cube


def gaussian_sum(grid: GridField, centers, weights, exponent: float = 1.0) -> np.ndarray:
    """sum_k w_k exp(-exponent |x - c_k|^2) on the grid sample points."""
    xs = grid.sample_points()
    out = np.zeros(grid.axis_counts)
    for c, w in zip(np.asarray(centers, dtype=float), weights):
        if w == 0:
            continue
        r2 = (xs[0] - c[0]) ** 2 + (xs[1] - c[1]) ** 2 + (xs[2] - c[2]) ** 2
        out += w * np.exp(-exponent * r2)
    return out


def box_grid(lo, hi, shape) -> GridField:
    """Orthogonal grid whose first and last sample points are lo and hi."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    shape = tuple(int(n) for n in shape)
    steps = (hi - lo) / (np.array(shape) - 1)
    return GridField(lo, np.diag(steps), np.zeros(shape))


def normalize(field: GridField) -> GridField:
    total = float(np.sum(field.values ** 2)) * field.voxel_volume
    return field.with_values(field.values / np.sqrt(total))


@dataclass
class SyntheticCase:
    hole: GridField
    particle: GridField
    atoms: list
    groups: dict

    def write(self, directory, stem="case"):
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        paths = {
            "hole": d / f"{stem}_hole.cube",
            "particle": d / f"{stem}_particle.cube",
            "groups": d / f"{stem}_groups.json",
        }
        save_cube(paths["hole"], self.hole, self.atoms)
        save_cube(paths["particle"], self.particle, self.atoms)
        paths["groups"].write_text(json.dumps(self.groups, indent=2) + "\n")
        return paths


def two_gaussian_case(
    separation: float = 4.0,
    hole_weights: Sequence[float] = (0.95, 0.25),
    particle_weights: Sequence[float] = (0.25, 0.95),
    exponent: float = 1.0,
    shape=(40, 32, 32),
    element: int = 6,
) -> SyntheticCase:
    """Two like atoms on the x axis, one per subgroup, each carrying a Gaussian."""
    h = separation / 2.0
    centers = np.array([[-h, 0.0, 0.0], [h, 0.0, 0.0]])
    pad = 4.5
    grid = box_grid((-h - pad, -pad, -pad), (h + pad, pad, pad), shape)
    hole = normalize(grid.with_values(gaussian_sum(grid, centers, hole_weights, exponent)))
    particle = normalize(grid.with_values(gaussian_sum(grid, centers, particle_weights, exponent)))
    hole = GridField(hole.origin, hole.axis_vectors, hole.values, ("synthetic hole", "two gaussians"))
    particle = GridField(particle.origin, particle.axis_vectors, particle.values, ("synthetic particle", "two gaussians"))
    atoms = [CubeAtomRecord(element, float(element), tuple(c)) for c in centers]
    groups = {"groups": [{"name": "G1", "atoms": [0], "color": "#d62728"}, {"name": "G2", "atoms": [1], "color": "#1f77b4"}]}
    return SyntheticCase(hole, particle, atoms, groups)


def molecule_case(
    n_atoms: int = 97,
    shape=(80, 80, 80),
    n_groups: int = 3,
    seed: int = 7,
) -> SyntheticCase:
    """Random molecule-sized atom cloud with hole on the first group and particle on the last."""
    rng = np.random.default_rng(seed)
    # jittered lattice with ~2.6 Bohr spacing, like bonded heavy atoms
    side = int(np.ceil(n_atoms ** (1 / 3)))
    cells = np.array([(i, j, k) for i in range(side) for j in range(side) for k in range(side)], dtype=float)[:n_atoms]
    pos = (cells - (side - 1) / 2.0) * 2.6 + rng.normal(scale=0.3, size=(n_atoms, 3))
    elements = rng.choice([1, 6, 6, 6, 7, 8], size=n_atoms)
    order = np.argsort(pos[:, 0], kind="stable")
    group_of = np.empty(n_atoms, dtype=int)
    for g, chunk in enumerate(np.array_split(order, n_groups)):
        group_of[chunk] = g
    pad = 5.0
    grid = box_grid(pos.min(axis=0) - pad, pos.max(axis=0) + pad, shape)
    wh = np.where(group_of == 0, 1.0, 0.15) * rng.uniform(0.5, 1.0, n_atoms)
    wp = np.where(group_of == n_groups - 1, 1.0, 0.15) * rng.uniform(0.5, 1.0, n_atoms)
    signs = rng.choice([-1.0, 1.0], size=n_atoms)
    hole = normalize(grid.with_values(gaussian_sum(grid, pos, wh * signs, 0.8)))
    particle = normalize(grid.with_values(gaussian_sum(grid, pos, wp * signs[::-1], 0.8)))
    atoms = [CubeAtomRecord(int(z), float(z), tuple(p)) for z, p in zip(elements, pos)]
    names = [f"G{g + 1}" for g in range(n_groups)]
    groups = {"groups": [{"name": names[g], "atoms": np.flatnonzero(group_of == g).tolist()} for g in range(n_groups)]}
    return SyntheticCase(
        GridField(hole.origin, hole.axis_vectors, hole.values, ("synthetic hole", f"{n_atoms} atoms seed {seed}")),
        GridField(particle.origin, particle.axis_vectors, particle.values, ("synthetic particle", f"{n_atoms} atoms seed {seed}")),
        atoms,
        groups,
    )
