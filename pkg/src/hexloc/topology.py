"""Hexagonal-grid reference deployment and UAV placement."""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

NODE_Z_MAX = 5.0

_SQRT3 = np.sqrt(3.0)


@dataclass(frozen=True)
class NodeSite:
    id: int
    x: float
    y: float
    z: float


def node_count(layers: int) -> int:
    return 3 * layers * layers + 3 * layers + 1


def layer_of_rank(n):
    """Ring index of the ``n``-th nearest node (1-based) by cumulative node count.

    Rank ``n`` lies in the smallest ring ``k`` with ``n <= 3k**2 + 3k + 1``;
    rank 1 is ring 0.
    """
    n = np.asarray(n)
    # smallest k with n <= 3k^2 + 3k + 1
    k = np.ceil((-3.0 + np.sqrt(9.0 + 12.0 * (n - 1))) / 6.0).astype(int)
    return k if k.ndim else int(k)


@dataclass(frozen=True)
class Deployment:
    """Ground reference nodes on a hex lattice plus an optional UAV pose.

    ``xyz`` has one row per node, ``ids[i]`` is the id of row ``i`` and
    ``layer[i]`` its hex ring index (0 for the centre node).
    """

    coverage_radius: float
    layers: int
    ids: np.ndarray
    xyz: np.ndarray
    layer: np.ndarray
    uav_offset: float | None = None
    uav_xy: np.ndarray | None = None
    uav_h: float | None = None

    @property
    def nodes(self) -> list[NodeSite]:
        return [NodeSite(int(i), *map(float, p)) for i, p in zip(self.ids, self.xyz)]

    @property
    def has_uav(self) -> bool:
        return self.uav_xy is not None

    @property
    def uav_position(self) -> np.ndarray:
        return np.array([self.uav_xy[0], self.uav_xy[1], self.uav_h])

    def positions_of(self, node_ids) -> np.ndarray:
        index = {int(i): row for row, i in enumerate(self.ids)}
        return self.xyz[[index[int(i)] for i in node_ids]]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["id", "x", "y", "z"])
            for i, (x, y, z) in zip(self.ids, self.xyz):
                w.writerow([int(i), repr(float(x)), repr(float(y)), repr(float(z))])

    @classmethod
    def from_csv(cls, path, coverage_radius: float) -> "Deployment":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        ids = np.array([int(r["id"]) for r in rows])
        xyz = np.array([[float(r["x"]), float(r["y"]), float(r["z"])] for r in rows])
        # recover ring index from the lattice coordinates
        q_r = _lattice_coords(xyz[:, :2], coverage_radius)
        layer = np.max(np.abs(np.c_[q_r, q_r.sum(axis=1)]), axis=1)
        return cls(coverage_radius, int(layer.max()), ids, xyz, layer)


def _lattice_coords(xy, R):
    r = np.rint(xy[:, 1] / (R * _SQRT3 / 2))
    q = np.rint(xy[:, 0] / R - r / 2)
    return np.c_[q, r].astype(int)


def hex_lattice_xy(R: float, layers: int):
    """Lattice points with basis (R, 0), (R/2, R*sqrt(3)/2), ordered by ring then angle.

    Returns ``(xy, layer)``.
    """
    qs, rs = np.meshgrid(np.arange(-layers, layers + 1), np.arange(-layers, layers + 1), indexing="ij")
    qs, rs = qs.ravel(), rs.ravel()
    ring = np.max(np.abs(np.c_[qs, rs, qs + rs]), axis=1)
    keep = ring <= layers
    qs, rs, ring = qs[keep], rs[keep], ring[keep]
    xy = np.c_[R * (qs + rs / 2.0), R * rs * _SQRT3 / 2.0]
    angle = np.mod(np.arctan2(xy[:, 1], xy[:, 0]), 2 * np.pi)
    order = np.lexsort((np.round(angle, 12), ring))
    return xy[order], ring[order]


def generate_hex_grid(R: float, layers: int, rng: np.random.Generator | None = None, z_max: float = NODE_Z_MAX) -> Deployment:
    if R <= 0:
        raise ValueError("coverage radius must be positive")
    if layers < 1:
        raise ValueError("need at least one layer")
    xy, ring = hex_lattice_xy(R, layers)
    z = rng.uniform(0.0, z_max, len(xy)) if rng is not None else np.zeros(len(xy))
    return Deployment(
        coverage_radius=float(R),
        layers=int(layers),
        ids=np.arange(len(xy)),
        xyz=np.c_[xy, z],
        layer=ring,
    )


def place_uav(dep: Deployment, delta: float, h: float, rng: np.random.Generator | None = None, bearing: float | None = None) -> Deployment:
    """Put the UAV at horizontal distance ``delta`` from the centre node."""
    R = dep.coverage_radius
    if not 0.0 <= delta <= R / 2:
        raise ValueError(f"uav offset {delta} outside [0, R/2] = [0, {R / 2}]")
    if not 20.0 <= h <= 120.0:
        raise ValueError(f"uav altitude {h} outside [20, 120] m")
    if bearing is None:
        bearing = rng.uniform(0.0, 2 * np.pi) if rng is not None else 0.0
    xy = np.array([delta * np.cos(bearing), delta * np.sin(bearing)])
    return replace(dep, uav_offset=float(delta), uav_xy=xy, uav_h=float(h))


def random_uav_offset(R: float, rng: np.random.Generator) -> float:
    return float(rng.uniform(0.0, R / 2))


@dataclass(frozen=True)
class SortedDistances:
    ids: np.ndarray
    d2d: np.ndarray
    d3d: np.ndarray

    def __len__(self):
        return len(self.ids)

    def __iter__(self):
        return iter(zip(self.ids.tolist(), self.d2d.tolist(), self.d3d.tolist()))


def sorted_node_distances(dep: Deployment) -> SortedDistances:
    """Nodes by ascending horizontal distance to the UAV, ties by id."""
    if not dep.has_uav:
        raise ValueError("deployment has no UAV placed")
    diff = dep.xyz[:, :2] - dep.uav_xy
    d2d = np.hypot(diff[:, 0], diff[:, 1])
    dz = dep.uav_h - dep.xyz[:, 2]
    order = np.lexsort((dep.ids, d2d))
    d2d = d2d[order]
    return SortedDistances(dep.ids[order], d2d, np.sqrt(d2d**2 + dz[order] ** 2))


def distance_increments(d2d_sorted):
    """Backward differences with d(0) = 0 and d'(0) = 0, so d'(1) = d(1)."""
    d = np.asarray(d2d_sorted, dtype=float)
    d1 = np.diff(d, prepend=0.0, axis=-1)
    d2 = np.diff(d1, prepend=0.0, axis=-1)
    return d1, d2


@dataclass(frozen=True)
class DistanceProfile:
    """Monte Carlo mean of the sorted horizontal distance and its increments."""

    d2d: np.ndarray
    d_prime: np.ndarray
    d_double_prime: np.ndarray
    mean_offset: float
    trials: int

    def layer_slice(self, k: int) -> slice:
        """0-based index range of ranks belonging to layer ``k`` by node count."""
        if k == 0:
            return slice(0, 1)
        return slice(node_count(k - 1), node_count(k))


def empirical_distance_increments(R: float, layers: int, trials: int, rng: np.random.Generator, n_max: int | None = None) -> DistanceProfile:
    """Average sorted distances over random offset in [0, R/2] and bearing."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    xy, _ = hex_lattice_xy(R, layers)
    n = len(xy) if n_max is None else min(n_max, len(xy))
    delta = rng.uniform(0.0, R / 2, trials)
    bearing = rng.uniform(0.0, 2 * np.pi, trials)
    uav = np.c_[delta * np.cos(bearing), delta * np.sin(bearing)]
    d = np.linalg.norm(xy[None, :, :] - uav[:, None, :], axis=-1)
    d = np.sort(d, axis=1)[:, :n]
    d1, d2 = distance_increments(d)
    return DistanceProfile(d.mean(axis=0), d1.mean(axis=0), d2.mean(axis=0), float(delta.mean()), trials)
