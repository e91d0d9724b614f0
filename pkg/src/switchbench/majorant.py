"""Smallest (nonnegative) concave majorant of a sampled function."""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import DegenerateGrid

CONTACT_TOL = 1e-10


@dataclass(frozen=True)
class SampledFunction:
    ys: np.ndarray
    vals: np.ndarray
    left_anchor: tuple[float, float] | None = None

    def __post_init__(self):
        ys = np.asarray(self.ys, dtype=float)
        vals = np.asarray(self.vals, dtype=float)
        object.__setattr__(self, "ys", ys)
        object.__setattr__(self, "vals", vals)
        if ys.shape != vals.shape or ys.ndim != 1:
            raise ValueError("ys and vals must be 1-d arrays of equal length")
        if len(ys) < 2:
            raise DegenerateGrid("a majorant needs at least two sample points")
        if np.any(np.diff(ys) <= 0):
            raise ValueError("ys must be strictly increasing")
        if not np.all(np.isfinite(vals)):
            raise ValueError("sample values must be finite")
        if self.left_anchor is not None and not self.left_anchor[0] < ys[0]:
            raise ValueError("left anchor must lie strictly left of the grid")


@dataclass(frozen=True)
class MajorantResult:
    vals: np.ndarray
    contact: np.ndarray
    vertices: np.ndarray          # indices into ys of hull vertices (anchor excluded)
    segments: list = field(default_factory=list)   # (y_left, y_right, slope) per hull edge


@numba.njit(cache=True)
def _upper_hull(ys, vals):
    n = ys.shape[0]
    stack = np.empty(n, dtype=np.int64)
    top = 0
    for k in range(n):
        while top >= 2:
            i, j = stack[top - 2], stack[top - 1]
            # pop j unless it lies strictly above the chord from i to k
            cross = (ys[j] - ys[i]) * (vals[k] - vals[i]) - (vals[j] - vals[i]) * (ys[k] - ys[i])
            if cross >= 0.0:
                top -= 1
            else:
                break
        stack[top] = k
        top += 1
    return stack[:top].copy()


def concave_majorant(f: SampledFunction, nonnegative: bool = False,
                     nondecreasing: bool = False) -> MajorantResult:
    """Upper concave envelope of the samples by one monotone-stack pass.

    ``nonnegative`` takes the envelope of max(f, 0). ``nondecreasing`` replaces
    everything right of the hull's maximum by a flat line, which is the right
    answer when the true domain extends to +inf and the envelope must stay
    above zero there.  Contact is judged against the unfloored samples.
    """
    ys, raw = f.ys, f.vals
    vals = np.maximum(raw, 0.0) if nonnegative else raw
    if f.left_anchor is not None:
        ys_all = np.concatenate(([f.left_anchor[0]], ys))
        vals_all = np.concatenate(([f.left_anchor[1]], vals))
        off = 1
    else:
        ys_all, vals_all, off = ys, vals, 0
    hull = _upper_hull(ys_all, vals_all)
    if nondecreasing:
        top = int(np.argmax(vals_all[hull]))
        hull = hull[: top + 1]
    hy, hv = ys_all[hull], vals_all[hull]
    out = np.interp(ys, hy, hv)     # constant beyond the last vertex
    contact = np.abs(out - raw) <= CONTACT_TOL * (1.0 + np.abs(raw))
    slopes = np.diff(hv) / np.diff(hy)
    segments = [(float(hy[k]), float(hy[k + 1]), float(slopes[k])) for k in range(len(slopes))]
    if hy[-1] < ys[-1]:
        segments.append((float(hy[-1]), float(ys[-1]), 0.0))
    verts = hull[hull >= off] - off
    return MajorantResult(out, contact, verts, segments)
