"""Star-convex polygon primitives: rays, vertices, rasterization, IoU.

Conventions (pinned, everything downstream depends on them):

* Ray ``k`` has angle ``theta_k = 2*pi*k / R`` and direction
  ``(sin theta, cos theta)`` in (row, col) axes, i.e. theta grows from the
  +col axis toward the +row axis.
* Integer coordinates are pixel centers.  A pixel belongs to a polygon iff
  its center is inside under the even-odd rule; points exactly on the
  boundary count as inside.
* A polygon with all radii zero rasterizes to exactly its center pixel.

For ray counts divisible by 4 the sin/cos tables are built from a single
quarter-period so that the symmetries ``sin(pi - t) == sin(t)`` and
``sin(-t) == -sin(t)`` hold bit-exactly; the dihedral equivariance of the
whole pipeline rests on this.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

_EPS = 1e-9


def _ray_table(n_rays):
    if n_rays % 4 == 0:
        q = n_rays // 4
        s = np.empty(n_rays, dtype=np.float64)
        base = np.sin(np.pi * np.arange(q + 1) / (2 * q))
        s[: q + 1] = base
        for i in range(1, q + 1):
            s[q + i] = base[q - i]        # sin(pi - t) == sin(t), bit-exact
        for j in range(2 * q, n_rays):
            s[j] = -s[j - 2 * q]          # sin(pi + t) == -sin(t), bit-exact
        c = np.roll(s, -q)                # cos(t) == sin(t + pi/2)
        return s, c
    angles = 2 * np.pi * np.arange(n_rays) / n_rays
    return np.sin(angles), np.cos(angles)


@dataclass
class RayConfig:
    """Fixed set of R equiangular ray directions."""

    n_rays: int
    sin: np.ndarray = field(init=False, repr=False)
    cos: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.n_rays < 3:
            raise ValueError(f"need at least 3 rays, got {self.n_rays}")
        self.sin, self.cos = _ray_table(self.n_rays)


@dataclass
class PolygonCandidate:
    """A star-convex polygon: integer center pixel, R radii, and a score."""

    center: tuple
    radii: np.ndarray
    score: float

    def validate(self, rays: RayConfig):
        if len(self.radii) != rays.n_rays:
            raise ValueError(f"{len(self.radii)} radii for {rays.n_rays} rays")
        if np.any(np.asarray(self.radii) < 0):
            raise ValueError("radii must be non-negative")


def polygon_vertices(c: PolygonCandidate, rays: RayConfig) -> np.ndarray:
    """Vertex k = center + radii[k] * (sin, cos).  Returns an (R, 2) array."""
    radii = np.asarray(c.radii, dtype=np.float64)
    rows = c.center[0] + radii * rays.sin
    cols = c.center[1] + radii * rays.cos
    return np.stack([rows, cols], axis=1)


def bbox(c: PolygonCandidate, rays: RayConfig):
    """Tight integer bounds (rmin, rmax, cmin, cmax) of the vertex set."""
    v = polygon_vertices(c, rays)
    return (
        int(np.floor(v[:, 0].min())),
        int(np.ceil(v[:, 0].max())),
        int(np.floor(v[:, 1].min())),
        int(np.ceil(v[:, 1].max())),
    )


@njit(cache=True)
def _inside_window(vr, vc, r0, c0, nr, nc):  # pragma: no cover - jitted
    """Even-odd point-in-polygon over an nr x nc window of pixel centers.

    Window pixel (i, j) corresponds to image pixel (r0 + i, c0 + j).
    Points on the boundary (within 1e-9) count as inside.

    Works one scan row at a time: the horizontal-ray crossing positions are
    shared by every pixel of the row, and only edges whose row span touches
    the scan row can contain an on-boundary point, so both sets are gathered
    once per row instead of once per pixel.
    """
    n = vr.shape[0]
    out = np.zeros((nr, nc), dtype=np.bool_)
    xints = np.empty(n, dtype=np.float64)
    near = np.empty(n, dtype=np.int64)
    row_margin = 1e-6  # generous bound; the on-edge tolerance itself is 1e-9
    for i in range(nr):
        pr = float(r0 + i)
        n_x = 0
        n_near = 0
        for a in range(n):
            b = a + 1 if a + 1 < n else 0
            y1 = vr[a]
            y2 = vr[b]
            if (y1 > pr) != (y2 > pr):
                xints[n_x] = vc[a] + (pr - y1) * (vc[b] - vc[a]) / (y2 - y1)
                n_x += 1
            lo = y1 if y1 < y2 else y2
            hi = y1 if y1 > y2 else y2
            if lo - row_margin <= pr <= hi + row_margin:
                near[n_near] = a
                n_near += 1
        for j in range(nc):
            pc = float(c0 + j)
            on_edge = False
            for e in range(n_near):
                a = near[e]
                b = a + 1 if a + 1 < n else 0
                y1 = vr[a]
                x1 = vc[a]
                dy = vr[b] - y1
                dx = vc[b] - x1
                seg2 = dx * dx + dy * dy
                if seg2 == 0.0:
                    if abs(pr - y1) <= _EPS and abs(pc - x1) <= _EPS:
                        on_edge = True
                        break
                else:
                    crs = (pc - x1) * dy - (pr - y1) * dx
                    t = ((pc - x1) * dx + (pr - y1) * dy) / seg2
                    if -_EPS <= t <= 1.0 + _EPS and crs * crs <= _EPS * _EPS * seg2:
                        on_edge = True
                        break
            if on_edge:
                out[i, j] = True
            else:
                cross = 0
                for e in range(n_x):
                    if pc < xints[e]:
                        cross += 1
                out[i, j] = (cross & 1) == 1
    return out


def _raster_window(c: PolygonCandidate, rays: RayConfig):
    """Rasterize into the polygon's own bounding box.

    Returns (mask, rmin, cmin) with mask covering the unclipped bbox.
    """
    v = polygon_vertices(c, rays)
    rmin = int(np.floor(v[:, 0].min()))
    rmax = int(np.ceil(v[:, 0].max()))
    cmin = int(np.floor(v[:, 1].min()))
    cmax = int(np.ceil(v[:, 1].max()))
    mask = _inside_window(
        np.ascontiguousarray(v[:, 0]),
        np.ascontiguousarray(v[:, 1]),
        rmin, cmin, rmax - rmin + 1, cmax - cmin + 1,
    )
    return mask, rmin, cmin


def rasterize_polygon(c: PolygonCandidate, rays: RayConfig, bounds) -> np.ndarray:
    """Binary H x W mask of the polygon, clipped to ``bounds = (H, W)``."""
    H, W = bounds
    out = np.zeros((H, W), dtype=bool)
    win, rmin, cmin = _raster_window(c, rays)
    r0 = max(rmin, 0)
    c0 = max(cmin, 0)
    r1 = min(rmin + win.shape[0], H)
    c1 = min(cmin + win.shape[1], W)
    if r0 < r1 and c0 < c1:
        out[r0:r1, c0:c1] = win[r0 - rmin:r1 - rmin, c0 - cmin:c1 - cmin]
    return out


def _window_iou(win_a, ra, ca, win_b, rb, cb) -> float:
    """IoU of two bbox-window masks given their window origins."""
    area_a = int(win_a.sum())
    area_b = int(win_b.sum())
    if area_a + area_b == 0:
        return 0.0
    r0 = max(ra, rb)
    c0 = max(ca, cb)
    r1 = min(ra + win_a.shape[0], rb + win_b.shape[0])
    c1 = min(ca + win_a.shape[1], cb + win_b.shape[1])
    inter = 0
    if r0 < r1 and c0 < c1:
        inter = int(np.count_nonzero(
            win_a[r0 - ra:r1 - ra, c0 - ca:c1 - ca]
            & win_b[r0 - rb:r1 - rb, c0 - cb:c1 - cb]
        ))
    union = area_a + area_b - inter
    return inter / union if union else 0.0


def polygon_iou(a: PolygonCandidate, b: PolygonCandidate, rays: RayConfig) -> float:
    """Rasterized IoU of two polygons over the union of their bounding boxes."""
    ar0, ar1, ac0, ac1 = bbox(a, rays)
    br0, br1, bc0, bc1 = bbox(b, rays)
    if ar1 < br0 or br1 < ar0 or ac1 < bc0 or bc1 < ac0:
        return 0.0  # disjoint boxes, no rasterization needed
    win_a, ra, ca = _raster_window(a, rays)
    win_b, rb, cb = _raster_window(b, rays)
    return _window_iou(win_a, ra, ca, win_b, rb, cb)
