"""Centerline tracks for the car environment.

A track file lists one waypoint per line as ``x y half_width`` (meters).
Blank lines and lines starting with ``#`` are ignored. The last waypoint
must repeat the first within ``CLOSURE_TOLERANCE``.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from rmppi.errors import ArtifactIOError, ConfigError

logger = logging.getLogger(__name__)

CLOSURE_TOLERANCE = 1e-6


@dataclass(frozen=True, eq=False)
class CarTrack:
    centerline: np.ndarray
    half_width: np.ndarray
    closed: bool = True
    _cumlen: np.ndarray = field(init=False, repr=False)
    _seglen: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        pts = np.asarray(self.centerline, dtype=np.float64)
        hw = np.asarray(self.half_width, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
            raise ConfigError("Track needs at least two 2D waypoints")
        if hw.shape != (len(pts),):
            raise ConfigError(
                f"Track has {len(pts)} waypoints but {hw.size} half widths"
            )
        if not np.all(hw > 0):
            raise ConfigError("Track half widths must be positive")
        seg = np.roll(pts, -1, axis=0) - pts if self.closed else np.diff(pts, axis=0)
        seglen = np.linalg.norm(seg, axis=1)
        if np.any(seglen <= 0):
            raise ConfigError("Track contains repeated consecutive waypoints")
        object.__setattr__(self, "centerline", pts)
        object.__setattr__(self, "half_width", hw)
        object.__setattr__(self, "_seglen", seglen)
        object.__setattr__(self, "_cumlen", np.concatenate([[0.0], np.cumsum(seglen)]))

    @property
    def total_length(self) -> float:
        return float(self._cumlen[-1])

    @property
    def n_segments(self) -> int:
        return len(self._seglen)

    @property
    def waypoint_s(self) -> np.ndarray:
        """Arc length at each waypoint."""
        return self._cumlen[: len(self.centerline)]

    def _segment_ends(self):
        a = self.centerline[: self.n_segments]
        b = np.roll(self.centerline, -1, axis=0)[: self.n_segments]
        wa = self.half_width[: self.n_segments]
        wb = np.roll(self.half_width, -1)[: self.n_segments]
        return a, b, wa, wb

    def project(self, position):
        """Nearest-point projection, vectorised over leading dimensions.

        Returns ``(d_center, d_map, s)``. Ties between segments resolve to the
        lowest segment index.
        """
        p = np.asarray(position, dtype=np.float64)
        a, b, wa, wb = self._segment_ends()
        ab = b - a
        rel = p[..., None, :] - a
        t = np.clip(np.sum(rel * ab, axis=-1) / self._seglen**2, 0.0, 1.0)
        foot = a + t[..., None] * ab
        dist = np.linalg.norm(p[..., None, :] - foot, axis=-1)
        idx = np.asarray(np.argmin(dist, axis=-1))
        t_best = np.take_along_axis(t, idx[..., None], axis=-1)[..., 0]
        d_center = np.take_along_axis(dist, idx[..., None], axis=-1)[..., 0]
        d_map = wa[idx] * (1.0 - t_best) + wb[idx] * t_best
        s = self._cumlen[idx] + t_best * self._seglen[idx]
        return d_center, d_map, s

    def progress(self, s_from, s_to):
        """Signed arc-length progress, unwrapped across the lap seam."""
        ds = np.asarray(s_to) - np.asarray(s_from)
        if self.closed:
            length = self.total_length
            ds = (ds + 0.5 * length) % length - 0.5 * length
        return ds

    @cached_property
    def curvature(self) -> np.ndarray:
        """Signed discrete curvature at each waypoint (positive turns left)."""
        pts = self.centerline
        prev_seg = pts - np.roll(pts, 1, axis=0)
        next_seg = np.roll(pts, -1, axis=0) - pts
        heading_in = np.arctan2(prev_seg[:, 1], prev_seg[:, 0])
        heading_out = np.arctan2(next_seg[:, 1], next_seg[:, 0])
        turn = (heading_out - heading_in + np.pi) % (2 * np.pi) - np.pi
        span = 0.5 * (np.linalg.norm(prev_seg, axis=1) + np.linalg.norm(next_seg, axis=1))
        kappa = turn / span
        if not self.closed:
            kappa[0] = kappa[-1] = 0.0
        return kappa

    def point_at(self, s):
        """Centerline point, unit tangent and curvature at arc length ``s``."""
        s = np.asarray(s, dtype=np.float64)
        if self.closed:
            s = s % self.total_length
        else:
            s = np.clip(s, 0.0, self.total_length)
        idx = np.clip(np.searchsorted(self._cumlen, s, side="right") - 1, 0, self.n_segments - 1)
        a, b, _, _ = self._segment_ends()
        t = (s - self._cumlen[idx]) / self._seglen[idx]
        tangent = (b[idx] - a[idx]) / np.expand_dims(self._seglen[idx], -1)
        point = a[idx] + np.expand_dims(t, -1) * (b[idx] - a[idx])
        kappa = self.curvature
        k_next = np.roll(kappa, -1)[: self.n_segments]
        k = kappa[idx] * (1.0 - t) + k_next[idx] * t
        return point, tangent, k


def car_track_distance(track: CarTrack, position):
    return track.project(position)


def load_track(path: Path | str) -> CarTrack:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ArtifactIOError(path, f"cannot read track file ({e.strerror})") from e
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) != 3:
            raise ConfigError(f"{path}:{lineno}: expected 'x y half_width'")
        try:
            rows.append([float(v) for v in fields])
        except ValueError as e:
            raise ConfigError(f"{path}:{lineno}: {e}") from e
    if not rows:
        raise ConfigError(f"{path}: track file is empty")
    data = np.asarray(rows)
    if len(data) < 4:
        raise ConfigError(f"{path}: a closed track needs at least three waypoints")
    gap = np.linalg.norm(data[0, :2] - data[-1, :2])
    if gap > CLOSURE_TOLERANCE:
        raise ConfigError(
            f"{path}: track is not closed, last waypoint is {gap:.3e} m from the first"
        )
    logger.debug("Loaded %d waypoints from %s", len(data) - 1, path)
    return CarTrack(data[:-1, :2], data[:-1, 2], closed=True)


def circle_track(radius: float, n: int = 360, half_width: float = 1.0) -> CarTrack:
    phi = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    pts = np.stack([radius * np.cos(phi), radius * np.sin(phi)], axis=1)
    return CarTrack(pts, np.full(n, half_width), closed=True)


def stadium_track(
    straight: float = 40.0,
    radius: float = 12.0,
    half_width: float = 1.0,
    spacing: float = 1.0,
) -> CarTrack:
    """Counter-clockwise stadium: two straights joined by semicircles."""
    n_straight = max(int(round(straight / spacing)), 1)
    n_arc = max(int(round(np.pi * radius / spacing)), 2)
    xs = np.linspace(0.0, straight, n_straight, endpoint=False)
    bottom = np.stack([xs, np.full_like(xs, -radius)], axis=1)
    phi = np.linspace(-0.5 * np.pi, 0.5 * np.pi, n_arc, endpoint=False)
    right = np.stack([straight + radius * np.cos(phi), radius * np.sin(phi)], axis=1)
    top = np.stack([straight - xs, np.full_like(xs, radius)], axis=1)
    phi = np.linspace(0.5 * np.pi, 1.5 * np.pi, n_arc, endpoint=False)
    left = np.stack([radius * np.cos(phi), radius * np.sin(phi)], axis=1)
    pts = np.concatenate([bottom, right, top, left])
    return CarTrack(pts, np.full(len(pts), half_width), closed=True)


def straight_track(length: float = 10.0, half_width: float = 1.0, n: int = 2) -> CarTrack:
    xs = np.linspace(0.0, length, n)
    pts = np.stack([xs, np.zeros_like(xs)], axis=1)
    return CarTrack(pts, np.full(n, half_width), closed=False)
