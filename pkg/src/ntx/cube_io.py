"""Gaussian cube file reading and writing.

Geometry is kept in Bohr internally. Files whose voxel counts are negative
are in Angstrom and get converted at parse time.
"""
from __future__ import annotations

import io
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np

BOHR_IN_ANGSTROM = 0.529177210903
ANGSTROM_TO_BOHR = 1.0 / BOHR_IN_ANGSTROM


class CubeFormatError(ValueError):
    """Raised for malformed cube input. Carries the 1-based line number."""

    def __init__(self, message: str, line: Optional[int] = None, source: Optional[str] = None):
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where += f"{source}"
        if line is not None:
            where += f"{':' if where else 'line '}{line}"
        super().__init__(f"{where}: {message}" if where else message)


@dataclass(frozen=True)
class CubeAtomRecord:
    atomic_number: int
    nuclear_charge: float
    position: tuple[float, float, float]

    def __post_init__(self):
        if self.atomic_number < 1:
            raise ValueError(f"atomic number must be >= 1, got {self.atomic_number}")


@dataclass(frozen=True, eq=False)
class GridField:
    """Scalar field on a regular grid, values stored as an (nx, ny, nz) array.

    Sample point (i, j, k) sits at ``origin + i*ax + j*ay + k*az``; the flat
    (z-fastest) index is ``i*ny*nz + j*nz + k``.
    """

    origin: np.ndarray
    axis_vectors: np.ndarray
    values: np.ndarray
    comments: tuple[str, str] = ("", "")
    orbital_id: Optional[int] = None

    def __post_init__(self):
        origin = np.asarray(self.origin, dtype=float).reshape(3)
        axes = np.asarray(self.axis_vectors, dtype=float).reshape(3, 3)
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 3 or min(values.shape) < 1:
            raise ValueError(f"values must be a non-empty 3D array, got shape {values.shape}")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "axis_vectors", axes)
        object.__setattr__(self, "values", values)
        if not self.voxel_volume > 0:
            raise ValueError("axis vectors are degenerate (zero voxel volume)")

    @property
    def axis_counts(self) -> tuple[int, int, int]:
        return tuple(int(n) for n in self.values.shape)

    @property
    def voxel_volume(self) -> float:
        return float(abs(np.linalg.det(self.axis_vectors)))

    @property
    def n_voxels(self) -> int:
        return int(self.values.size)

    def same_grid(self, other: "GridField", atol: float = 1e-10) -> bool:
        return (
            self.axis_counts == other.axis_counts
            and np.allclose(self.origin, other.origin, rtol=0.0, atol=atol)
            and np.allclose(self.axis_vectors, other.axis_vectors, rtol=0.0, atol=atol)
        )

    def with_values(self, values: np.ndarray) -> "GridField":
        return replace(self, values=np.asarray(values, dtype=float).reshape(self.axis_counts))

    def sample_points(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Cartesian coordinates of every sample point as three (nx, ny, nz) arrays."""
        nx, ny, nz = self.axis_counts
        i = np.arange(nx, dtype=float)[:, None, None]
        j = np.arange(ny, dtype=float)[None, :, None]
        k = np.arange(nz, dtype=float)[None, None, :]
        a = self.axis_vectors
        coords = []
        for c in range(3):
            coords.append(self.origin[c] + i * a[0, c] + j * a[1, c] + k * a[2, c])
        return tuple(np.broadcast_to(x, (nx, ny, nz)) for x in coords)


def linear_index(i: int, j: int, k: int, counts: tuple[int, int, int]) -> int:
    _, ny, nz = counts
    return i * ny * nz + j * nz + k


# -- parsing ---------------------------------------------------------------


def _parse_values(text: str) -> Optional[np.ndarray]:
    # np.fromstring stops quietly at a bad token; callers re-check the count
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            return np.fromstring(text, dtype=float, sep=" ")
        except ValueError:
            return None


def _floats(tokens, lineno, source, what):
    try:
        return [float(t) for t in tokens]
    except ValueError:
        raise CubeFormatError(f"non-numeric token in {what}: {' '.join(tokens)!r}", lineno, source)


def _int(token, lineno, source, what):
    try:
        return int(token)
    except ValueError:
        try:
            x = float(token)
        except ValueError:
            raise CubeFormatError(f"non-numeric {what}: {token!r}", lineno, source)
        if x != int(x):
            raise CubeFormatError(f"{what} must be an integer, got {token!r}", lineno, source)
        return int(x)


def parse_cube(data: Union[str, bytes], source: Optional[str] = None) -> tuple[GridField, list[CubeAtomRecord]]:
    """Parse cube text into a GridField and the atom records of the header."""
    if isinstance(data, bytes):
        data = data.decode("utf-8", errors="replace")
    lines = data.splitlines()

    def line(n):
        if n >= len(lines):
            raise CubeFormatError("unexpected end of file in header", n + 1, source)
        return lines[n]

    comments = (line(0).rstrip("\n"), line(1).rstrip("\n"))

    tok = line(2).split()
    if len(tok) < 4:
        raise CubeFormatError("atom count line needs N and 3 origin coordinates", 3, source)
    natoms_signed = _int(tok[0], 3, source, "atom count")
    origin = _floats(tok[1:4], 3, source, "origin")
    natoms = abs(natoms_signed)
    if natoms == 0:
        raise CubeFormatError("cube file declares zero atoms", 3, source)

    counts = []
    axes = []
    angstrom = False
    for n in range(3, 6):
        tok = line(n).split()
        if len(tok) < 4:
            raise CubeFormatError("axis line needs a count and a 3-vector", n + 1, source)
        c = _int(tok[0], n + 1, source, "voxel count")
        if c == 0:
            raise CubeFormatError("voxel count must be nonzero", n + 1, source)
        if c < 0:
            angstrom = True
        counts.append(abs(c))
        axes.append(_floats(tok[1:4], n + 1, source, "axis vector"))

    atoms = []
    for n in range(6, 6 + natoms):
        tok = line(n).split()
        if len(tok) < 5:
            raise CubeFormatError("atom line needs Z, charge and 3 coordinates", n + 1, source)
        z = _int(tok[0], n + 1, source, "atomic number")
        vals = _floats(tok[1:5], n + 1, source, "atom record")
        if z < 1:
            raise CubeFormatError(f"atomic number must be >= 1, got {z}", n + 1, source)
        atoms.append((z, vals[0], vals[1:4]))

    pos = 6 + natoms
    orbital_id = None
    if natoms_signed < 0:
        tok = line(pos).split()
        if not tok:
            raise CubeFormatError("missing orbital-ID (DSET) line", pos + 1, source)
        n_ids = _int(tok[0], pos + 1, source, "orbital count")
        if n_ids != 1:
            raise CubeFormatError(f"expected exactly one orbital ID, found {n_ids}", pos + 1, source)
        if len(tok) != 2:
            raise CubeFormatError("orbital-ID line must hold a count of 1 and one ID", pos + 1, source)
        orbital_id = _int(tok[1], pos + 1, source, "orbital ID")
        pos += 1

    body = lines[pos:]
    expected = counts[0] * counts[1] * counts[2]
    values = _parse_values("\n".join(body))
    if values is None or values.size != expected:
        # slow path: pin down the offending line
        for off, text in enumerate(body):
            for t in text.split():
                try:
                    float(t)
                except ValueError:
                    raise CubeFormatError(f"non-numeric token in data: {t!r}", pos + off + 1, source)
        values = np.array(" ".join(body).split(), dtype=float)
    if values.size != expected:
        what = "truncated data section" if values.size < expected else "too many data values"
        raise CubeFormatError(f"{what}: expected {expected} values, found {values.size}", len(lines), source)

    scale = ANGSTROM_TO_BOHR if angstrom else 1.0
    grid = GridField(
        origin=np.array(origin) * scale,
        axis_vectors=np.array(axes) * scale,
        values=values.reshape(counts),
        comments=comments,
        orbital_id=orbital_id,
    )
    records = [
        CubeAtomRecord(z, charge, tuple(float(x) * scale for x in xyz)) for z, charge, xyz in atoms
    ]
    return grid, records


def read_cube(path: Union[str, Path]) -> tuple[GridField, list[CubeAtomRecord]]:
    path = Path(path)
    return parse_cube(path.read_text(), source=str(path))


# -- writing ---------------------------------------------------------------


def _vec(v):
    return "".join(f" {x: .13E}" for x in v)


def write_cube(field: GridField, atoms: list[CubeAtomRecord]) -> bytes:
    """Serialize to cube text (Bohr units, 13 significant digits)."""
    if not atoms:
        raise ValueError("a cube file requires at least one atom")
    out = io.StringIO()
    out.write(field.comments[0] + "\n")
    out.write(field.comments[1] + "\n")
    natoms = -len(atoms) if field.orbital_id is not None else len(atoms)
    out.write(f"{natoms:5d}{_vec(field.origin)}\n")
    for n, axis in zip(field.axis_counts, field.axis_vectors):
        out.write(f"{n:5d}{_vec(axis)}\n")
    for a in atoms:
        out.write(f"{a.atomic_number:5d} {a.nuclear_charge: .13E}{_vec(a.position)}\n")
    if field.orbital_id is not None:
        out.write(f"{1:5d}{field.orbital_id:5d}\n")

    nx, ny, nz = field.axis_counts
    rows = field.values.reshape(nx * ny, nz)
    full, rest = divmod(nz, 6)
    for row in rows:
        strs = [f" {x: .13E}" for x in row.tolist()]
        for c in range(full):
            out.write("".join(strs[6 * c : 6 * c + 6]) + "\n")
        if rest:
            out.write("".join(strs[6 * full :]) + "\n")
    return out.getvalue().encode("ascii")


def save_cube(path: Union[str, Path], field: GridField, atoms: list[CubeAtomRecord]) -> None:
    Path(path).write_bytes(write_cube(field, atoms))
