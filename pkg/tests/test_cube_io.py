import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ntx.cube_io import (
    ANGSTROM_TO_BOHR,
    CubeAtomRecord,
    CubeFormatError,
    GridField,
    linear_index,
    parse_cube,
    write_cube,
)

MINIMAL = """minimal
cube
    1    0.000000    0.000000    0.000000
    1    1.000000    0.000000    0.000000
    1    0.000000    1.000000    0.000000
    1    0.000000    0.000000    1.000000
    6    6.000000    0.000000    0.000000    0.000000
  2.0
"""

# values 0..7 on a 2x2x2 grid, written 6 per line
EIGHT = """eight values
z fastest
    1    0.0    0.0    0.0
    2    0.5    0.0    0.0
    2    0.0    0.5    0.0
    2    0.0    0.0    0.5
    1    1.0    0.0    0.0    0.0
 0.0 1.0 2.0 3.0 4.0 5.0
 6.0 7.0
"""

DSET = """orbital cube
with DSET line
   -1    0.0    0.0    0.0
    2    0.3    0.0    0.0
    1    0.0    0.3    0.0
    1    0.0    0.0    0.3
    8    8.0    0.0    0.0    0.0
    1    1
 -1.5E-01  2.5E-01
"""


def test_minimal_cube():
    grid, atoms = parse_cube(MINIMAL)
    assert grid.values.ravel().tolist() == [2.0]
    assert grid.voxel_volume == 1.0
    assert grid.axis_counts == (1, 1, 1)
    assert atoms == [CubeAtomRecord(6, 6.0, (0.0, 0.0, 0.0))]
    assert grid.comments == ("minimal", "cube")


def test_z_fastest_ordering():
    grid, _ = parse_cube(EIGHT)
    assert grid.values.ravel().tolist() == list(map(float, range(8)))
    for i in range(2):
        for j in range(2):
            for k in range(2):
                assert grid.values[i, j, k] == linear_index(i, j, k, (2, 2, 2))
    assert grid.voxel_volume == pytest.approx(0.125)


def test_round_trip_is_byte_stable():
    grid, atoms = parse_cube(EIGHT)
    once = write_cube(grid, atoms)
    g2, a2 = parse_cube(once)
    assert write_cube(g2, a2) == once
    np.testing.assert_array_equal(g2.values, grid.values)


def test_dset_line():
    grid, atoms = parse_cube(DSET)
    assert len(atoms) == 1
    assert grid.orbital_id == 1
    again, _ = parse_cube(write_cube(grid, atoms))
    assert again.orbital_id == 1
    assert again.values.ravel().tolist() == [-0.15, 0.25]


def test_multiple_orbitals_rejected():
    bad = DSET.replace("    1    1\n", "    2    1    2\n")
    with pytest.raises(CubeFormatError, match="exactly one orbital"):
        parse_cube(bad)


def test_angstrom_counts_converted():
    ang = EIGHT.replace("    2    0.5    0.0    0.0", "   -2    0.5    0.0    0.0")
    grid, _ = parse_cube(ang)
    assert grid.axis_counts == (2, 2, 2)
    assert grid.axis_vectors[0, 0] == pytest.approx(0.5 * ANGSTROM_TO_BOHR)
    assert grid.axis_vectors[1, 1] == pytest.approx(0.5 * ANGSTROM_TO_BOHR)


def test_truncated_data():
    with pytest.raises(CubeFormatError, match="expected 8 values, found 7"):
        parse_cube(EIGHT.replace(" 6.0 7.0", " 6.0"))


def test_too_many_values():
    with pytest.raises(CubeFormatError, match="too many"):
        parse_cube(EIGHT.replace(" 6.0 7.0", " 6.0 7.0 8.0"))


def test_truncated_header():
    with pytest.raises(CubeFormatError, match="end of file"):
        parse_cube("\n".join(MINIMAL.splitlines()[:5]))


def test_non_numeric_token_reports_line():
    with pytest.raises(CubeFormatError) as exc:
        parse_cube(EIGHT.replace("6.0 7.0", "6.0 x7"), source="bad.cube")
    assert exc.value.line == 9
    assert "bad.cube:9" in str(exc.value)


def test_non_numeric_header():
    with pytest.raises(CubeFormatError, match="origin"):
        parse_cube(MINIMAL.replace("    1    0.000000    0.000000    0.000000", "    1    abc    0.0    0.0", 1))


def test_trailing_blank_lines_and_ragged_columns():
    text = EIGHT.replace(" 0.0 1.0 2.0 3.0 4.0 5.0\n 6.0 7.0\n", "0.0   1.0\n2.0 3.0 4.0\n\n5.0 6.0 7.0\n\n\n")
    grid, _ = parse_cube(text)
    assert grid.values.ravel().tolist() == list(map(float, range(8)))


def test_write_requires_atoms():
    grid, _ = parse_cube(MINIMAL)
    with pytest.raises(ValueError):
        write_cube(grid, [])


def test_one_voxel_one_data_line():
    grid, atoms = parse_cube(MINIMAL)
    lines = write_cube(grid, atoms).decode().splitlines()
    data = lines[7:]
    assert len(data) == 1 and len(data[0].split()) == 1


def test_non_orthogonal_volume():
    axes = np.array([[1.0, 0.0, 0.0], [0.5, 1.0, 0.0], [0.0, 0.3, 2.0]])
    g = GridField(np.zeros(3), axes, np.zeros((2, 2, 2)))
    assert g.voxel_volume == pytest.approx(2.0)


def test_degenerate_axes_rejected():
    with pytest.raises(ValueError):
        GridField(np.zeros(3), np.zeros((3, 3)), np.zeros((1, 1, 1)))


finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, allow_subnormal=False)


@settings(max_examples=60, deadline=None)
@given(
    shape=st.tuples(st.integers(1, 4), st.integers(1, 4), st.integers(1, 8)),
    data=st.data(),
)
def test_round_trip_property(shape, data):
    n = shape[0] * shape[1] * shape[2]
    vals = np.array(data.draw(st.lists(finite, min_size=n, max_size=n)))
    origin = np.array(data.draw(st.lists(finite, min_size=3, max_size=3)))
    axes = np.diag(data.draw(st.lists(st.floats(0.01, 5.0), min_size=3, max_size=3)))
    g = GridField(origin, axes, vals.reshape(shape), ("a", "b"))
    atoms = [CubeAtomRecord(1, 1.0, (0.1, 0.2, 0.3))]
    back, _ = parse_cube(write_cube(g, atoms))
    np.testing.assert_allclose(back.values, g.values, rtol=1e-12, atol=0)
    np.testing.assert_allclose(back.origin, g.origin, rtol=1e-12, atol=0)
    np.testing.assert_allclose(back.axis_vectors, g.axis_vectors, rtol=1e-12, atol=0)
    assert back.comments == ("a", "b")
