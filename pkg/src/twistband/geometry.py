"""Cross-section geometry: uniform Cartesian grids over a bounded 2D domain.

Supported shapes are axis-aligned rectangles, discs, and ASCII bitmap masks.
Only strictly interior lattice nodes are kept (homogeneous Dirichlet data);
curved boundaries are therefore represented by a staircase, with O(h) area
and eigenvalue error on the disc.  Boundaries are assumed smooth by the
underlying theory; the staircase approximation is a recorded caveat, not a
resolved one.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import MaskError, TooFewNodesError

MIN_INTERIOR_NODES = 25


@dataclass(frozen=True)
class GeometrySpec:
    """Shape + grid spacing defining the cross section omega.

    shape is one of 'rectangle' (sides a, b), 'disc' (radius r) or
    'mask' (path to an ASCII bitmap; spacing comes from the mask header).
    The domain is centered at the origin.
    """

    shape: str
    h: float
    a: float = 0.0
    b: float = 0.0
    r: float = 0.0
    mask_path: str = ""

    @staticmethod
    def rectangle(a: float, b: float, h: float) -> "GeometrySpec":
        if a <= 0 or b <= 0 or h <= 0:
            raise TooFewNodesError("rectangle sides and spacing must be positive", field="geometry")
        return GeometrySpec(shape="rectangle", h=h, a=a, b=b)

    @staticmethod
    def disc(r: float, h: float) -> "GeometrySpec":
        if r <= 0 or h <= 0:
            raise TooFewNodesError("disc radius and spacing must be positive", field="geometry")
        return GeometrySpec(shape="disc", h=h, r=r)

    @staticmethod
    def mask(path: str) -> "GeometrySpec":
        return GeometrySpec(shape="mask", h=0.0, mask_path=str(path))


@dataclass
class CrossSectionGrid:
    """Interior nodes of omega on a uniform lattice.

    nodes[i] = (x1, x2) of row i; index_map is the 2D lattice with row
    numbers at interior sites and -1 elsewhere; x1s/x2s are the lattice
    coordinate axes so that node (i, j) sits at (x1s[i], x2s[j]).
    """

    nodes: np.ndarray
    index_map: np.ndarray
    x1s: np.ndarray
    x2s: np.ndarray
    h: float
    area: float
    shape: str = "custom"

    @property
    def nnodes(self) -> int:
        return len(self.nodes)

    def dump_csv(self, path) -> None:
        """Write the node list as CSV rows 'i,x1,x2'."""
        with open(path, "w") as fh:
            fh.write("# twistband grid-v1\n")
            fh.write("i,x1,x2\n")
            for i, (x1, x2) in enumerate(self.nodes):
                fh.write(f"{i},{x1!r},{x2!r}\n")


def _interior_count(length: float, h: float) -> int:
    # nodes at -length/2 + i*h strictly inside; commensurate length/h
    # (within 1e-9) puts a node exactly on the boundary, which is excluded
    ratio = length / h
    n = int(np.floor(ratio + 1e-9))
    if abs(n - ratio) <= 1e-9 * max(1.0, ratio):
        return n - 1
    return n


def _grid_from_inside(x1s, x2s, inside, h, shape, area=None):
    index_map = -np.ones(inside.shape, dtype=np.int64)
    ii, jj = np.nonzero(inside)
    index_map[ii, jj] = np.arange(len(ii))
    nodes = np.column_stack([x1s[ii], x2s[jj]])
    count = len(nodes)
    if count < MIN_INTERIOR_NODES:
        raise TooFewNodesError(
            f"only {count} interior nodes (need >= {MIN_INTERIOR_NODES}); decrease h",
            field="geometry.h",
        )
    if area is None:
        area = count * h * h
    return CrossSectionGrid(
        nodes=nodes, index_map=index_map, x1s=x1s, x2s=x2s, h=h, area=area, shape=shape
    )


def build_grid(spec: GeometrySpec) -> CrossSectionGrid:
    """Discretize omega: uniform lattice intersected with the open domain.

    Boundary nodes are excluded (Dirichlet); the area is the node count
    times h^2.  Raises TooFewNodesError below 25 interior nodes and
    MaskError for unreadable bitmaps.
    """
    if spec.shape == "rectangle":
        h = spec.h
        nx = _interior_count(spec.a, h)
        ny = _interior_count(spec.b, h)
        if nx < 1 or ny < 1:
            raise TooFewNodesError("grid spacing leaves no interior nodes", field="geometry.h")
        x1s = -spec.a / 2.0 + h * np.arange(1, nx + 1)
        x2s = -spec.b / 2.0 + h * np.arange(1, ny + 1)
        inside = np.ones((nx, ny), dtype=bool)
        return _grid_from_inside(x1s, x2s, inside, h, "rectangle")
    if spec.shape == "disc":
        h = spec.h
        m = int(np.ceil(spec.r / h))
        x1s = h * np.arange(-m, m + 1, dtype=float)
        x2s = x1s.copy()
        X1, X2 = np.meshgrid(x1s, x2s, indexing="ij")
        inside = X1 * X1 + X2 * X2 < spec.r * spec.r * (1.0 - 1e-12)
        return _grid_from_inside(x1s, x2s, inside, h, "disc")
    if spec.shape == "mask":
        return _grid_from_mask(spec.mask_path)
    raise TooFewNodesError(f"unknown shape {spec.shape!r}", field="geometry.shape")


def _grid_from_mask(path) -> CrossSectionGrid:
    """Parse the ASCII mask format: header 'rows cols h', then '#'/'.' rows."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise MaskError(f"cannot read mask file {path}: {exc}", field="geometry.mask") from exc
    return parse_mask(text)


def parse_mask(text: str) -> CrossSectionGrid:
    lines = [ln.rstrip("\n") for ln in io.StringIO(text) if ln.strip()]
    if not lines:
        raise MaskError("empty mask file", field="geometry.mask")
    header = lines[0].split()
    if len(header) != 3:
        raise MaskError("mask header must be 'rows cols h'", field="geometry.mask")
    try:
        rows, cols, h = int(header[0]), int(header[1]), float(header[2])
    except ValueError as exc:
        raise MaskError(f"bad mask header {lines[0]!r}", field="geometry.mask") from exc
    if rows <= 0 or cols <= 0 or h <= 0:
        raise MaskError("mask rows/cols/h must be positive", field="geometry.mask")
    body = lines[1:]
    if len(body) != rows:
        raise MaskError(f"mask declares {rows} rows, found {len(body)}", field="geometry.mask")
    inside_rc = np.zeros((rows, cols), dtype=bool)
    for r, ln in enumerate(body):
        if len(ln) < cols or any(c not in "#." for c in ln[:cols]):
            raise MaskError(f"mask row {r} malformed: {ln!r}", field="geometry.mask")
        inside_rc[r] = [c == "#" for c in ln[:cols]]
    # row-major bitmap, row 0 on top; recenter so the bitmap center is the origin
    x1s = h * (np.arange(cols) - (cols - 1) / 2.0)
    x2s = h * ((rows - 1) / 2.0 - np.arange(rows))
    inside = inside_rc.T  # lattice indexed (i=x1, j=x2 ascending)
    inside = inside[:, ::-1]
    x2s = x2s[::-1]
    return _grid_from_inside(x1s, x2s, inside, h, "mask")


def render_mask(grid: CrossSectionGrid) -> str:
    """Inverse of parse_mask for round-trip tests and grid export."""
    inside = grid.index_map >= 0
    cols, rows = inside.shape
    out = [f"{rows} {cols} {grid.h!r}"]
    for j in range(rows - 1, -1, -1):
        out.append("".join("#" if inside[i, j] else "." for i in range(cols)))
    return "\n".join(out) + "\n"
