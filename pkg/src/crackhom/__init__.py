"""Two-scale finite elements for frictional contact on periodic cracks."""

from .geometry import (Box, CrackSpec, GeometryError, PeriodicCrackedMesh,
                       ReferenceCell, build_periodic_mesh, build_reference_cell,
                       duplicate_crack_dofs, tile_domain)

__all__ = [
    "Box", "CrackSpec", "GeometryError", "PeriodicCrackedMesh",
    "ReferenceCell", "build_periodic_mesh", "build_reference_cell",
    "duplicate_crack_dofs", "tile_domain",
]

__version__ = "0.1.0"
