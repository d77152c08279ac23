"""Legacy ASCII VTK output of simulation snapshots.

Fields are exported as per-cell means (cell data) on the box mesh; 2D
meshes are written as quads in the z = 0 plane, 3D meshes as hexahedra.
"""

import numpy as np

# corner offsets in VTK ordering (quad: CCW; hex: bottom CCW then top CCW)
_QUAD_CORNERS = [(0, 0), (1, 0), (1, 1), (0, 1)]
_HEX_CORNERS = [(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0),
                (0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1)]
_CELL_TYPE = {2: 9, 3: 12}  # VTK_QUAD, VTK_HEXAHEDRON


def cell_means(field):
    """Mean value of a field over each element, shape (n_elem,) or (n_elem, n_comp)."""
    space = field.space
    w = space.tab.volume.weights
    vals = np.einsum("ecl,lq->ecq", field.by_element(), space.tab.phi)
    means = (vals @ w) * space.det_j / space.mesh.element_volume
    return means[:, 0] if space.n_components == 1 else means


def write_vtk(path, mesh, scalars=None, vectors=None, title="chns-dg snapshot"):
    """Write an unstructured-grid legacy VTK (3.0, ASCII) snapshot.

    ``scalars`` and ``vectors`` map field names to FieldCoeffs; every field
    is written as cell data of per-element means.  Vector data is padded to
    three components.
    """
    scalars = scalars or {}
    vectors = vectors or {}
    dim = mesh.dim
    corners = _QUAD_CORNERS if dim == 2 else _HEX_CORNERS
    n_corners = len(corners)
    n_elem = mesh.n_elements

    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {n_elem * n_corners} float",
    ]
    lengths = mesh.element_lengths
    for lower in mesh.element_lower:
        for off in corners:
            pt = lower + np.asarray(off) * lengths
            coords = list(pt) + [0.0] * (3 - dim)
            lines.append(" ".join(f"{c:.9g}" for c in coords))

    lines.append(f"CELLS {n_elem} {n_elem * (n_corners + 1)}")
    for e in range(n_elem):
        base = e * n_corners
        lines.append(" ".join([str(n_corners)]
                              + [str(base + i) for i in range(n_corners)]))
    lines.append(f"CELL_TYPES {n_elem}")
    lines.extend([str(_CELL_TYPE[dim])] * n_elem)

    lines.append(f"CELL_DATA {n_elem}")
    for name, fld in scalars.items():
        lines.append(f"SCALARS {name} float 1")
        lines.append("LOOKUP_TABLE default")
        lines.extend(f"{v:.9g}" for v in cell_means(fld))
    for name, fld in vectors.items():
        lines.append(f"VECTORS {name} float")
        means = np.atleast_2d(cell_means(fld))
        for row in means:
            padded = list(row) + [0.0] * (3 - row.size)
            lines.append(" ".join(f"{v:.9g}" for v in padded))

    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def read_vtk_cell_count(path):
    """Cell count of a legacy VTK file (round-trip check helper)."""
    with open(path) as fh:
        for line in fh:
            if line.startswith("CELLS "):
                return int(line.split()[1])
    raise ValueError(f"no CELLS record in {path}")
