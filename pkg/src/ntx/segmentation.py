"""Voxel-to-atom segmentation.

Two labelings are provided: the power diagram (weighted Voronoi with atomic
radii as weights), which ignores field values, and a discrete steepest-ascent
labeling of a density field used as a cross-check.
"""
from __future__ import annotations

import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .cube_io import CubeAtomRecord, GridField
from .molecule import MoleculeSpec


@dataclass(frozen=True, eq=False)
class LabelVolume:
    origin: np.ndarray
    axis_vectors: np.ndarray
    labels: np.ndarray  # (nx, ny, nz) int array

    @property
    def axis_counts(self) -> tuple[int, int, int]:
        return tuple(int(n) for n in self.labels.shape)

    def matches(self, field: GridField, atol: float = 1e-10) -> bool:
        return (
            self.axis_counts == field.axis_counts
            and np.allclose(self.origin, field.origin, rtol=0.0, atol=atol)
            and np.allclose(self.axis_vectors, field.axis_vectors, rtol=0.0, atol=atol)
        )

    def counts(self, n_labels: int) -> np.ndarray:
        return np.bincount(self.labels.ravel(), minlength=n_labels)

    def to_field(self) -> GridField:
        """Labels as a real-valued field, for export to cube viewers."""
        return GridField(self.origin, self.axis_vectors, self.labels.astype(float), ("ntx label volume", "voxel value = label index"))


def worker_count() -> int:
    env = os.environ.get("NTX_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def power_distance(x, p, r) -> float:
    d = [x[0] - p[0], x[1] - p[1], x[2] - p[2]]
    return d[0] * d[0] + d[1] * d[1] + d[2] * d[2] - r * r


def _power_labels_slab(grid: GridField, positions, radii, i0, i1):
    nx, ny, nz = grid.axis_counts
    a = grid.axis_vectors
    i = np.arange(i0, i1, dtype=float)[:, None, None]
    j = np.arange(ny, dtype=float)[None, :, None]
    k = np.arange(nz, dtype=float)[None, None, :]
    shape = (i1 - i0, ny, nz)
    xs = [np.broadcast_to(grid.origin[c] + i * a[0, c] + j * a[1, c] + k * a[2, c], shape) for c in range(3)]

    best = np.full(shape, np.inf)
    labels = np.zeros(shape, dtype=np.int32)
    tmp = np.empty(shape)
    acc = np.empty(shape)
    for idx, (p, r) in enumerate(zip(positions, radii)):
        np.subtract(xs[0], p[0], out=tmp)
        np.multiply(tmp, tmp, out=acc)
        np.subtract(xs[1], p[1], out=tmp)
        np.multiply(tmp, tmp, out=tmp)
        acc += tmp
        np.subtract(xs[2], p[2], out=tmp)
        np.multiply(tmp, tmp, out=tmp)
        acc += tmp
        acc -= r * r
        # strict < keeps the lowest atom index on ties
        closer = acc < best
        np.copyto(best, acc, where=closer)
        labels[closer] = idx
    return labels


def segment_power_diagram(grid: GridField, m: MoleculeSpec, workers: int | None = None) -> LabelVolume:
    """Label every sample point with the atom of smallest power distance."""
    nx = grid.axis_counts[0]
    positions = m.positions
    radii = m.radii
    workers = worker_count() if workers is None else max(1, workers)
    # voxel content never depends on how slabs are split
    n_slabs = min(nx, workers * 4) if workers > 1 else 1
    bounds = np.linspace(0, nx, n_slabs + 1).astype(int)
    spans = [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    if workers == 1 or len(spans) == 1:
        parts = [_power_labels_slab(grid, positions, radii, a, b) for a, b in spans]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda s: _power_labels_slab(grid, positions, radii, *s), spans))
    labels = np.concatenate(parts, axis=0)
    return LabelVolume(grid.origin.copy(), grid.axis_vectors.copy(), labels)


# -- gradient ascent -------------------------------------------------------

_OFFSETS = sorted(
    (d for d in itertools.product((-1, 0, 1), repeat=3) if d != (0, 0, 0)),
    key=lambda d: (d[0], d[1], d[2]),
)


def _nearest_atom(points: np.ndarray, positions: np.ndarray) -> np.ndarray:
    d2 = ((points[:, None, :] - positions[None, :, :]) ** 2).sum(axis=2)
    return np.argmin(d2, axis=1)  # argmin returns the first (lowest) index on ties


def steepest_ascent_roots(density: np.ndarray, axis_vectors: np.ndarray) -> np.ndarray:
    """Flat index of the local maximum reached from each voxel.

    Each voxel steps to the 26-neighbor with the largest positive slope
    (value difference over physical distance); ties go to the lowest linear
    index. Voxels with no uphill neighbor are their own maximum.
    """
    nx, ny, nz = density.shape
    rho = np.asarray(density, dtype=float)
    best_slope = np.zeros(rho.shape)
    parent = np.arange(rho.size, dtype=np.int64).reshape(rho.shape)
    flat = parent.copy()
    # offsets sorted lexicographically == ascending neighbor linear index
    for d in _OFFSETS:
        dist = float(np.linalg.norm(d[0] * axis_vectors[0] + d[1] * axis_vectors[1] + d[2] * axis_vectors[2]))
        src = tuple(slice(max(0, -s), n - max(0, s)) for s, n in zip(d, rho.shape))
        dst = tuple(slice(max(0, s), n - max(0, -s)) for s, n in zip(d, rho.shape))
        slope = (rho[dst] - rho[src]) / dist
        better = slope > best_slope[src]
        best_slope[src] = np.where(better, slope, best_slope[src])
        parent[src] = np.where(better, flat[dst], parent[src])

    root = parent.ravel()
    # pointer jumping; paths are strictly uphill so this terminates
    while True:
        nxt = root[root]
        if np.array_equal(nxt, root):
            break
        root = nxt
    return root


def segment_gradient_ascent(density: GridField, m: MoleculeSpec) -> LabelVolume:
    """Label voxels by the atom nearest to the density maximum they ascend to."""
    rho = density.values
    if np.any(rho < 0):
        raise ValueError("gradient segmentation expects a non-negative density")
    root = steepest_ascent_roots(rho, density.axis_vectors)
    maxima = np.unique(root)
    nx, ny, nz = density.axis_counts
    i, rem = np.divmod(maxima, ny * nz)
    j, k = np.divmod(rem, nz)
    pts = (
        density.origin[None, :]
        + i[:, None] * density.axis_vectors[0]
        + j[:, None] * density.axis_vectors[1]
        + k[:, None] * density.axis_vectors[2]
    )
    owner = _nearest_atom(pts, m.positions)
    lut = np.zeros(rho.size, dtype=np.int32)
    lut[maxima] = owner
    labels = lut[root].reshape(rho.shape)
    return LabelVolume(density.origin.copy(), density.axis_vectors.copy(), labels)


def subgroup_labels(lv: LabelVolume, m: MoleculeSpec) -> LabelVolume:
    lut = m.atom_to_group.astype(np.int32)
    return replace(lv, labels=lut[lv.labels])


def label_cube_atoms(m: MoleculeSpec) -> list[CubeAtomRecord]:
    return [CubeAtomRecord(a.element, float(a.element), tuple(a.position)) for a in m.atoms]
