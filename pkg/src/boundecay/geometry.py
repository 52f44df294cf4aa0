"""Lattice domains, exact distance to the boundary, and shrunk regions.

A domain is a uniform lattice of spacing ``h`` together with a boolean
interior mask.  Exterior nodes carry the Dirichlet condition.  The
continuous boundary is kept alongside the mask (as points in 1D and as
segments in 2D) so that distances are measured to the true boundary and
not to the nearest lattice node.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import _core

DEFAULT_NODE_CAP = 20_000
DISK_SEGMENTS = 512
TIE_TOL = 1e-9

GENERATORS = {
    "interval": 1,
    "halfline_truncated": 1,
    "rectangle": 2,
    "disk": 1,
    "lshape": 1,
    "slit_square": 2,
    "koch_prefractal": 1,
}


class DomainError(ValueError):
    """Raised when a domain cannot be built or a region is empty."""


@dataclass(frozen=True)
class DomainSpec:
    """Recipe for :func:`build_domain`.

    ``params`` holds the generator's positional parameters, e.g. ``(1.0,)``
    for ``interval`` or ``(1.0, 0.5)`` for ``slit_square``.
    """

    generator: str
    params: tuple = ()
    resolution: float = 0.05
    mask_file: str | None = None
    node_cap: int = DEFAULT_NODE_CAP

    def validate(self):
        if not self.resolution > 0:
            raise DomainError(f"resolution must be positive, got {self.resolution}")
        if self.mask_file is not None:
            return
        if self.generator not in GENERATORS:
            raise DomainError(f"unknown generator {self.generator!r}")
        if len(self.params) != GENERATORS[self.generator]:
            raise DomainError(
                f"{self.generator} takes {GENERATORS[self.generator]} parameter(s), "
                f"got {len(self.params)}"
            )
        if self.generator == "koch_prefractal":
            level = self.params[0]
            if int(level) != level or not 0 <= level <= 4:
                raise DomainError(f"koch level must be an integer in [0, 4], got {level}")
        elif any(not p > 0 for p in self.params):
            raise DomainError(f"generator parameters must be positive: {self.params}")
        if self.generator == "slit_square" and not self.params[1] < self.params[0]:
            raise DomainError("slit length must be shorter than the square side")


@dataclass(frozen=True, eq=False)
class GridDomain:
    """Masked uniform lattice.

    Node ``idx`` sits at ``origin + idx * spacing``.  ``boundary_points``
    is an ``(k,)`` array of boundary abscissae in 1D; ``boundary_segments``
    is a ``(k, 2, 2)`` array of segments in 2D.  When neither is set the
    boundary is taken to be the lattice boundary nodes themselves.
    """

    dim: int
    shape: tuple
    spacing: float
    origin: tuple
    interior_mask: np.ndarray
    name: str
    hardy_class: str = "generic"
    boundary_points: np.ndarray | None = None
    boundary_segments: np.ndarray | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.interior_mask.setflags(write=False)

    @property
    def h(self):
        return self.spacing

    @property
    def n_interior(self):
        return int(self._flat_interior.size)

    @property
    def _flat_interior(self):
        if "flat" not in self._cache:
            flat = np.flatnonzero(self.interior_mask.ravel())
            flat.setflags(write=False)
            self._cache["flat"] = flat
        return self._cache["flat"]

    @property
    def interior_indices(self):
        """``(n, dim)`` lattice indices of interior nodes, C order."""
        return np.stack(np.unravel_index(self._flat_interior, self.shape), axis=1)

    @property
    def interior_points(self):
        """``(n, dim)`` coordinates of interior nodes."""
        return self.coordinates(self.interior_indices)

    def coordinates(self, idx):
        idx = np.asarray(idx, dtype=float)
        return np.asarray(self.origin) + idx * self.spacing

    @property
    def node_index(self):
        """Full-grid array mapping a node to its interior index, -1 outside."""
        if "node_index" not in self._cache:
            out = np.full(self.shape, -1, dtype=np.int64)
            out.ravel()[self._flat_interior] = np.arange(self.n_interior)
            out.setflags(write=False)
            self._cache["node_index"] = out
        return self._cache["node_index"]

    @property
    def boundary_mask(self):
        """Exterior nodes with at least one interior lattice neighbour."""
        m = self.interior_mask
        near = np.zeros_like(m)
        for axis in range(self.dim):
            near |= np.roll(m, 1, axis=axis) | np.roll(m, -1, axis=axis)
        return near & ~m

    @property
    def boundary_nodes(self):
        """``(k, dim)`` lattice indices of the boundary nodes."""
        return np.argwhere(self.boundary_mask)

    def faces(self):
        """Lattice edges touching the interior.

        Returns ``(left, right, axis, midpoints)`` where ``left`` and
        ``right`` are interior indices (``-1`` for an exterior node) and
        ``midpoints`` are face-centre coordinates.  Every edge appears
        once, oriented in the increasing lattice direction.
        """
        if "faces" in self._cache:
            return self._cache["faces"]
        idx = self.node_index
        lefts, rights, axes, mids = [], [], [], []
        for axis in range(self.dim):
            lo = [slice(None)] * self.dim
            hi = [slice(None)] * self.dim
            lo[axis] = slice(0, -1)
            hi[axis] = slice(1, None)
            a = idx[tuple(lo)]
            b = idx[tuple(hi)]
            keep = (a >= 0) | (b >= 0)
            pos = np.argwhere(keep).astype(float)
            pos[:, axis] += 0.5
            lefts.append(a[keep])
            rights.append(b[keep])
            axes.append(np.full(int(keep.sum()), axis))
            mids.append(self.coordinates(pos))
        out = (
            np.concatenate(lefts),
            np.concatenate(rights),
            np.concatenate(axes),
            np.concatenate(mids),
        )
        for arr in out:
            arr.setflags(write=False)
        self._cache["faces"] = out
        return out

    def digest(self):
        """Stable hash of the lattice and mask (cache key)."""
        hsh = hashlib.sha256()
        hsh.update(repr((self.dim, self.shape, self.spacing, self.origin)).encode())
        hsh.update(np.packbits(self.interior_mask.ravel()).tobytes())
        return hsh.hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class DistanceField:
    """Per-interior-node distance to the boundary (C order of the mask)."""

    values: np.ndarray
    source: str

    def __post_init__(self):
        self.values.setflags(write=False)

    @property
    def max(self):
        return float(self.values.max())

    def scaled(self, factor):
        """Distance multiplied by ``factor`` (e.g. ``1/alpha``)."""
        if factor == 1.0:
            return self
        return DistanceField(self.values * factor, f"{self.source}*{factor:g}")


# --- boundary geometry ------------------------------------------------------


def _closed_segments(verts):
    verts = np.asarray(verts, dtype=float)
    return np.stack([verts, np.roll(verts, -1, axis=0)], axis=1)


def koch_snowflake(level, side=1.0):
    """Vertices of the Koch snowflake prefractal (counter-clockwise).

    The initiator is an equilateral triangle; each side carries
    ``4**level`` segments of length ``side / 3**level``.
    """
    tri = np.array([[0.0, 0.0], [side, 0.0], [side / 2, side * math.sqrt(3) / 2]])
    pts = list(tri)
    rot = np.array([[0.5, math.sqrt(3) / 2], [-math.sqrt(3) / 2, 0.5]])  # -60 degrees
    for _ in range(level):
        new = []
        for p, q in zip(pts, pts[1:] + pts[:1]):
            step = (q - p) / 3
            a = p + step
            b = p + 2 * step
            new.extend([p, a, a + rot @ step, b])
        pts = new
    return np.array(pts)


def _polygon_for(spec):
    """Return ``(inside_polygon, segments, hardy_class, min_feature)``."""
    g, p = spec.generator, spec.params
    if g == "rectangle":
        lx, ly = p
        poly = np.array([[0, 0], [lx, 0], [lx, ly], [0, ly]], dtype=float)
        return poly, _closed_segments(poly), "convex", min(lx, ly)
    if g == "disk":
        (r,) = p
        theta = 2 * np.pi * np.arange(DISK_SEGMENTS) / DISK_SEGMENTS
        poly = r * np.stack([np.cos(theta), np.sin(theta)], axis=1)
        return poly, _closed_segments(poly), "convex", r
    if g == "lshape":
        (size,) = p
        s = size / 2
        poly = np.array(
            [[0, 0], [size, 0], [size, s], [s, s], [s, size], [0, size]], dtype=float
        )
        return poly, _closed_segments(poly), "simply_connected", s
    if g == "slit_square":
        size, slit = p
        poly = np.array([[0, 0], [size, 0], [size, size], [0, size]], dtype=float)
        segs = np.concatenate(
            [_closed_segments(poly), [[[0.0, size / 2], [slit, size / 2]]]]
        )
        return poly, segs, "simply_connected", min(slit, size - slit)
    if g == "koch_prefractal":
        level = int(p[0])
        poly = koch_snowflake(level)
        hardy = "convex" if level == 0 else "simply_connected"
        return poly, _closed_segments(poly), hardy, 3.0 ** (-level)
    raise DomainError(f"{g} is not a 2D generator")


def _finish(mask, spec, name, **kw):
    n = int(mask.sum())
    if n == 0:
        raise DomainError(f"resolution {spec.resolution} too coarse: empty interior")
    if n > spec.node_cap:
        raise DomainError(f"{n} interior nodes exceed the node cap {spec.node_cap}")
    return GridDomain(interior_mask=mask, name=name, **kw)


def _largest_component(mask):
    labels, count = ndimage.label(mask)
    if count <= 1:
        return mask
    sizes = ndimage.sum_labels(mask, labels, index=np.arange(1, count + 1))
    return labels == (int(np.argmax(sizes)) + 1)


def _build_1d(spec):
    (length,) = spec.params
    h = spec.resolution
    n = int(math.floor(length / h + 1e-9)) + 3
    x = (np.arange(n) - 1) * h
    bpts = np.array([0.0, length]) if spec.generator == "interval" else np.array([0.0])
    d = np.min(np.abs(x[:, None] - np.array([0.0, length])[None, :]), axis=1)
    mask = (x > 0) & (x < length) & (d >= h / 2 - 1e-12 * h)
    name = f"{spec.generator}({length:g})/h={h:g}"
    return _finish(
        mask,
        spec,
        name,
        dim=1,
        shape=(n,),
        spacing=h,
        origin=(-h,),
        hardy_class="convex",
        boundary_points=bpts,
    )


def _build_2d(spec):
    poly, segs, hardy, feature = _polygon_for(spec)
    h = spec.resolution
    if spec.generator == "koch_prefractal" and h > feature / 3 + 1e-15:
        raise DomainError(
            f"h={h:g} does not resolve the Koch segment length {feature:g} (need h <= seg/3)"
        )
    lo = poly.min(axis=0)
    hi = poly.max(axis=0)
    shape = tuple(int(math.floor((hi[k] - lo[k]) / h + 1e-9)) + 3 for k in range(2))
    if shape[0] * shape[1] > 50 * spec.node_cap:
        raise DomainError(f"lattice of shape {shape} far exceeds the node cap {spec.node_cap}")
    origin = (float(lo[0] - h), float(lo[1] - h))
    ii, jj = np.meshgrid(np.arange(shape[0]), np.arange(shape[1]), indexing="ij")
    pts = np.stack([origin[0] + ii.ravel() * h, origin[1] + jj.ravel() * h], axis=1)
    pts = np.ascontiguousarray(pts)
    inside = _core.points_in_polygon(pts, np.ascontiguousarray(poly))
    mask = np.zeros(pts.shape[0], dtype=bool)
    cand = np.flatnonzero(inside)
    seg_a = np.ascontiguousarray(segs[:, 0, :])
    seg_b = np.ascontiguousarray(segs[:, 1, :])
    dist = _core.segment_distance(np.ascontiguousarray(pts[cand]), seg_a, seg_b)
    mask[cand[dist >= h / 2 - 1e-12 * h]] = True
    mask = _largest_component(mask.reshape(shape))
    params = ",".join(f"{p:g}" for p in spec.params)
    name = f"{spec.generator}({params})/h={h:g}"
    return _finish(
        mask,
        spec,
        name,
        dim=2,
        shape=shape,
        spacing=h,
        origin=origin,
        hardy_class=hardy,
        boundary_segments=segs,
    )


def read_mask_file(path):
    """Parse a mask file: header ``dim n1 [n2] h`` then rows of 0/1."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DomainError(f"cannot read mask file {path}: {exc}") from exc
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise DomainError(f"mask file {path} is empty")
    head = lines[0].split()
    try:
        dim = int(head[0])
        shape = tuple(int(v) for v in head[1 : 1 + dim])
        h = float(head[1 + dim])
    except (ValueError, IndexError) as exc:
        raise DomainError(f"bad mask header {lines[0]!r}") from exc
    if dim not in (1, 2) or len(head) != dim + 2:
        raise DomainError(f"bad mask header {lines[0]!r}")
    rows = lines[1:]
    nrows = 1 if dim == 1 else shape[0]
    ncols = shape[-1]
    if len(rows) != nrows or any(len(r) != ncols or set(r) - {"0", "1"} for r in rows):
        raise DomainError(f"mask body does not match shape {shape}")
    mask = np.array([[c == "1" for c in r] for r in rows], dtype=bool).reshape(shape)
    return mask, h


def write_mask_file(domain, path):
    """Inverse of :func:`read_mask_file` (the padding layer is kept)."""
    head = " ".join([str(domain.dim), *map(str, domain.shape), repr(domain.spacing)])
    m = domain.interior_mask.reshape(-1, domain.shape[-1]).astype(int)
    body = "\n".join("".join(map(str, row)) for row in m)
    Path(path).write_text(head + "\n" + body + "\n")


def domain_from_mask(mask, h, name="mask", node_cap=DEFAULT_NODE_CAP):
    """Domain whose boundary is the set of its lattice boundary nodes."""
    mask = np.pad(np.asarray(mask, dtype=bool), 1)
    spec = DomainSpec("mask", resolution=h, node_cap=node_cap)
    return _finish(
        mask,
        spec,
        f"{name}/h={h:g}",
        dim=mask.ndim,
        shape=mask.shape,
        spacing=float(h),
        origin=tuple([-float(h)] * mask.ndim),
        hardy_class="generic",
    )


def build_domain(spec: DomainSpec) -> GridDomain:
    """Build the lattice domain described by ``spec`` (deterministic)."""
    spec.validate()
    if spec.mask_file is not None:
        mask, h = read_mask_file(spec.mask_file)
        return domain_from_mask(mask, h, name=Path(spec.mask_file).stem, node_cap=spec.node_cap)
    if spec.generator in ("interval", "halfline_truncated"):
        return _build_1d(spec)
    return _build_2d(spec)


def distance_to_boundary(domain: GridDomain) -> DistanceField:
    """Exact Euclidean distance from each interior node to the boundary."""
    pts = domain.interior_points
    if domain.dim == 1 and domain.boundary_points is not None:
        vals = np.min(np.abs(pts[:, :1] - domain.boundary_points[None, :]), axis=1)
        return DistanceField(vals, "boundary points")
    if domain.boundary_segments is not None:
        segs = domain.boundary_segments
        vals = _core.segment_distance(
            np.ascontiguousarray(pts),
            np.ascontiguousarray(segs[:, 0, :]),
            np.ascontiguousarray(segs[:, 1, :]),
        )
        return DistanceField(vals, "boundary segments")
    bnd = domain.coordinates(domain.boundary_nodes)
    if domain.dim == 1:
        vals = np.min(np.abs(pts - bnd.T), axis=1)
    else:
        b = np.ascontiguousarray(bnd)
        vals = _core.segment_distance(np.ascontiguousarray(pts), b, b)
    return DistanceField(vals, "lattice boundary nodes")


def inner_region(domain: GridDomain, dist: DistanceField, eps: float) -> GridDomain:
    """The region ``{d > eps}`` on the same lattice.

    The result may be disconnected; all components are kept.  Its boundary
    is the lattice boundary of the new mask.  Nodes whose distance equals
    ``eps`` up to rounding are excluded, so lattice-aligned ε give clean
    rows on every side.
    """
    if eps < 0:
        raise DomainError(f"eps must be nonnegative, got {eps}")
    if eps == 0:
        return domain
    keep = dist.values > eps + TIE_TOL * domain.spacing
    if not keep.any():
        raise DomainError(f"empty region: eps={eps:g} >= max d = {dist.max:g}")
    mask = np.zeros(domain.interior_mask.size, dtype=bool)
    mask[domain._flat_interior[keep]] = True
    return GridDomain(
        dim=domain.dim,
        shape=domain.shape,
        spacing=domain.spacing,
        origin=domain.origin,
        interior_mask=mask.reshape(domain.shape),
        name=f"{domain.name}|eps={eps:g}",
        hardy_class=domain.hardy_class,
    )


def strip_indices(dist: DistanceField, eps: float) -> np.ndarray:
    """Interior indices with ``d < eps``; rounding ties are left out."""
    return np.flatnonzero(dist.values < eps - TIE_TOL * abs(eps))


def epsilon_schedule(dist, h, ratio=0.5, floor=10.0, start=None, snap=True):
    """Geometric ε sweep, descending.

    Starts at ``min(0.2 max d, max d / 2)`` unless ``start`` is given and
    stops above ``floor * h``.  With ``snap`` every ε is moved to the nearest
    half-lattice value ``(m + 1/2) h`` so that node sums over the strip are
    midpoint rules across lattice-aligned boundaries.
    """
    top = start if start is not None else min(0.2 * dist.max, dist.max / 2)
    out = []
    eps = top
    while eps >= floor * h * (1 - 1e-12):
        val = (math.floor(eps / h - 0.5 + 1e-9) + 0.5) * h if snap else eps
        if val >= floor * h * (1 - 1e-12) and (not out or val < out[-1]):
            out.append(val)
        eps *= ratio
    return out
