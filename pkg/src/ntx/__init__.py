"""Charge localization and transfer analysis for hole/particle NTO cube files."""
from .charge import ChargeTable, atom_charges, charge_table, density, normalize_percent, subgroup_charges
from .cube_io import CubeAtomRecord, GridField, parse_cube, read_cube, write_cube
from .molecule import MoleculeSpec, build_molecule, subgroup_of
from .segmentation import (
    LabelVolume,
    power_distance,
    segment_gradient_ascent,
    segment_power_diagram,
    subgroup_labels,
)
from .transfer import (
    DonorAcceptorPartition,
    TransferResult,
    assemble_full_matrix,
    build_qp,
    partition_donors_acceptors,
    solve_proportional,
    solve_quadratic,
)

__version__ = "0.1.0"
