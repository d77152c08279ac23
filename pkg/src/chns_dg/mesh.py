"""Structured axis-aligned box meshes with oriented face connectivity.

Elements are numbered lexicographically with the x index running fastest.
Every interior face stores the pair (left, right) with left < right and a
unit normal pointing from the left element into the right one; boundary
faces store the owning element and the outward normal.
"""

import numpy as np


class FaceSet:
    """Bundle of per-face arrays (one entry per face)."""

    def __init__(self, **arrays):
        n = None
        for name, arr in arrays.items():
            arr = np.asarray(arr)
            setattr(self, name, arr)
            if n is None:
                n = arr.shape[0]
        self.n_faces = 0 if n is None else n

    def __len__(self):
        return self.n_faces


class Mesh:
    """Uniform grid of axis-aligned box elements on a rectangular domain.

    Attributes
    ----------
    dim : int
        Spatial dimension, 2 or 3.
    cells_per_axis : (dim,) int array
        Number of elements along each axis.
    element_lower : (n_elements, dim) array
        Lower corner of each element.
    element_lengths : (dim,) array
        Edge lengths of every element (the grid is uniform).
    interior_faces : FaceSet
        Arrays ``left``, ``right`` (element indices, left < right), ``axis``
        (normal direction), ``normal`` (dim-vector, +e_axis), ``area``.
    boundary_faces : FaceSet
        Arrays ``elem``, ``axis``, ``side`` (0 = lower, 1 = upper),
        ``normal`` (outward), ``area``.
    h : float
        Maximum element diameter (box diagonal).
    """

    def __init__(self, origin, extents, cells_per_axis):
        origin = np.asarray(origin, dtype=float)
        extents = np.asarray(extents, dtype=float)
        cells = np.asarray(cells_per_axis, dtype=int)
        dim = origin.size
        if dim not in (2, 3):
            raise ValueError(f"only 2D/3D supported, got dim={dim}")
        if np.any(cells < 1):
            raise ValueError(f"cells_per_axis must be >= 1, got {cells.tolist()}")
        if np.any(extents <= 0.0):
            raise ValueError(f"domain extents must be positive, got {extents.tolist()}")

        self.dim = dim
        self.origin = origin
        self.extents = extents
        self.cells_per_axis = cells
        self.n_elements = int(np.prod(cells))
        self.element_lengths = extents / cells
        self.h = float(np.linalg.norm(self.element_lengths))

        # lexicographic element multi-indices, x fastest
        grids = np.meshgrid(*[np.arange(n) for n in cells], indexing="ij")
        multi = np.stack([g.reshape(-1, order="F") for g in grids], axis=1)
        self.element_multi_index = multi
        self.element_lower = origin + multi * self.element_lengths

        self.interior_faces = self._build_interior_faces()
        self.boundary_faces = self._build_boundary_faces()

    def flat_index(self, multi):
        """Flat element index of multi-indices, x running fastest."""
        multi = np.asarray(multi)
        strides = np.concatenate(([1], np.cumprod(self.cells_per_axis[:-1])))
        return multi @ strides

    def face_area(self, axis):
        """Measure of a face perpendicular to the given axis."""
        lengths = self.element_lengths
        return float(np.prod(np.delete(lengths, axis)))

    @property
    def element_volume(self):
        return float(np.prod(self.element_lengths))

    def _build_interior_faces(self):
        lefts, rights, axes = [], [], []
        cells = self.cells_per_axis
        multi = self.element_multi_index
        for a in range(self.dim):
            mask = multi[:, a] < cells[a] - 1
            lo = self.flat_index(multi[mask])
            step = multi[mask].copy()
            step[:, a] += 1
            hi = self.flat_index(step)
            lefts.append(lo)
            rights.append(hi)
            axes.append(np.full(lo.shape, a, dtype=int))
        left = np.concatenate(lefts)
        right = np.concatenate(rights)
        axis = np.concatenate(axes)
        normal = np.zeros((left.size, self.dim))
        normal[np.arange(left.size), axis] = 1.0
        area = np.array([self.face_area(a) for a in axis])
        return FaceSet(left=left, right=right, axis=axis, normal=normal, area=area)

    def _build_boundary_faces(self):
        elems, axes, sides = [], [], []
        cells = self.cells_per_axis
        multi = self.element_multi_index
        for a in range(self.dim):
            for side, bound in ((0, 0), (1, cells[a] - 1)):
                mask = multi[:, a] == bound
                elems.append(self.flat_index(multi[mask]))
                axes.append(np.full(mask.sum(), a, dtype=int))
                sides.append(np.full(mask.sum(), side, dtype=int))
        elem = np.concatenate(elems)
        axis = np.concatenate(axes)
        side = np.concatenate(sides)
        normal = np.zeros((elem.size, self.dim))
        normal[np.arange(elem.size), axis] = np.where(side == 0, -1.0, 1.0)
        area = np.array([self.face_area(a) for a in axis])
        return FaceSet(elem=elem, axis=axis, side=side, normal=normal, area=area)


def build_structured_mesh(domain, cells_per_axis):
    """Build a conforming uniform box mesh of a rectangular domain.

    Parameters
    ----------
    domain : sequence of (lo, hi) pairs
        One interval per axis, e.g. ``[(0, 1), (0, 1)]`` for the unit square.
    cells_per_axis : int or sequence of int
        Subdivisions per axis; a scalar is broadcast to every axis.

    Returns
    -------
    Mesh
    """
    domain = np.asarray(domain, dtype=float)
    if domain.ndim != 2 or domain.shape[1] != 2:
        raise ValueError("domain must be a sequence of (lo, hi) pairs")
    dim = domain.shape[0]
    cells = np.broadcast_to(np.asarray(cells_per_axis, dtype=int), (dim,))
    origin = domain[:, 0]
    extents = domain[:, 1] - domain[:, 0]
    return Mesh(origin, extents, cells)


def unit_square_mesh(n):
    return build_structured_mesh([(0.0, 1.0), (0.0, 1.0)], n)


def unit_cube_mesh(n):
    return build_structured_mesh([(0.0, 1.0)] * 3, n)


def face_orientation_check(mesh, tol=1e-14):
    """True iff every interior-face normal is unit length and points from
    the lower-index element into the higher-index one."""
    faces = mesh.interior_faces
    if np.any(faces.left >= faces.right):
        return False
    lengths = np.linalg.norm(faces.normal, axis=1)
    if np.any(np.abs(lengths - 1.0) > tol):
        return False
    # normal must be +e_axis: the right element sits one grid step up along
    # the face axis, so the left-to-right direction is the positive axis
    expected = np.zeros_like(faces.normal)
    expected[np.arange(len(faces)), faces.axis] = 1.0
    return bool(np.all(np.abs(faces.normal - expected) <= tol))
