"""Genus-2 Fuchsian group of the regular pi/4 octagon, orbit enumeration,
point reduction and the fundamental-domain quadrature mesh."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .errors import BudgetExceeded, ConstructionFailure
from .fields import Grid, ScalarField

N_SIDES = 8
VERTEX_ANGLE = np.pi / 4
# side k is glued to PARTNER[k]; labels around the boundary read a1 b1 a1^-1 b1^-1 a2 b2 a2^-1 b2^-1
PARTNER = {0: 2, 2: 0, 1: 3, 3: 1, 4: 6, 6: 4, 5: 7, 7: 5}
GENERATOR_NAMES = ("a1", "b1", "a2", "b2")
# letters used in words: lowercase = generator, uppercase = inverse
LETTERS = "abcd"


@dataclass(frozen=True)
class MobiusMap:
    """Element of SL(2, C) acting by ``z -> (a z + b) / (c z + d)``."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex).reshape(2, 2)
        m = m / np.sqrt(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_coeffs(cls, a, b, c, d) -> "MobiusMap":
        return cls(np.array([[a, b], [c, d]], dtype=complex))

    @property
    def coeffs(self):
        (a, b), (c, d) = self.matrix
        return a, b, c, d

    def __call__(self, z):
        a, b, c, d = self.coeffs
        return (a * z + b) / (c * z + d)

    def derivative(self, z):
        _, _, c, d = self.coeffs
        return 1.0 / (c * z + d) ** 2

    def __matmul__(self, other: "MobiusMap") -> "MobiusMap":
        return MobiusMap(self.matrix @ other.matrix)

    def inverse(self) -> "MobiusMap":
        a, b, c, d = self.coeffs
        return MobiusMap.from_coeffs(d, -b, -c, a)

    @property
    def trace(self) -> complex:
        return complex(self.matrix[0, 0] + self.matrix[1, 1])

    def distance(self, other: "MobiusMap") -> float:
        """Projective distance: min over the sign ambiguity."""
        return float(min(np.abs(self.matrix - other.matrix).max(),
                         np.abs(self.matrix + other.matrix).max()))

    def to_list(self):
        return [[z.real, z.imag] for z in self.matrix.ravel()]


IDENTITY = MobiusMap(np.eye(2))


def _rotation(theta: float) -> np.ndarray:
    return np.array([[np.exp(0.5j * theta), 0], [0, np.exp(-0.5j * theta)]])


def _translation(dist: float) -> np.ndarray:
    """Hyperbolic translation along the real diameter by ``dist``."""
    c, s = np.cosh(dist / 2), np.sinh(dist / 2)
    return np.array([[c, s], [s, c]], dtype=complex)


@dataclass(frozen=True)
class OctagonGeometry:
    """Regular hyperbolic octagon centred at 0 with a vertex angle ``pi/4``.

    Side ``k`` is centred on direction ``k pi / 4``; vertices sit at
    directions ``(k + 1/2) pi / 4``.
    """

    circumradius: float  # hyperbolic
    inradius: float  # hyperbolic

    @property
    def vertex_radius(self) -> float:
        return float(np.tanh(self.circumradius / 2))

    @property
    def midpoint_radius(self) -> float:
        return float(np.tanh(self.inradius / 2))

    @property
    def vertices(self) -> np.ndarray:
        k = np.arange(N_SIDES)
        return self.vertex_radius * np.exp(1j * (k + 0.5) * np.pi / 4)

    def side_circles(self):
        """Centres and radii of the orthogonal circles carrying the sides."""
        m = self.midpoint_radius
        C = 0.5 * (m + 1 / m)
        r = 0.5 * (1 / m - m)
        k = np.arange(N_SIDES)
        return C * np.exp(1j * k * np.pi / 4), r

    def beyond_side(self, z) -> np.ndarray:
        """Boolean array ``[side, ...]``: point lies past side ``k``."""
        centers, r = self.side_circles()
        z = np.asarray(z)
        return np.abs(z[None, ...] - centers.reshape((-1,) + (1,) * z.ndim)) < r

    def contains(self, z) -> np.ndarray:
        z = np.asarray(z)
        return (np.abs(z) < 1) & ~np.any(self.beyond_side(z), axis=0)


def solve_octagon(angle: float = VERTEX_ANGLE, n: int = N_SIDES) -> OctagonGeometry:
    """Solve for the circumradius giving the requested interior angle.

    The interior angle of the regular ``n``-gon of circumradius ``r`` is
    ``2 arctan(1 / (cosh r tan(pi/n)))``.  The root is found numerically and
    checked against the closed form ``cosh r = cot(pi/n) cot(angle/2)``.
    """
    def excess(r):
        return 2 * np.arctan(1.0 / (np.cosh(r) * np.tan(np.pi / n))) - angle

    r = brentq(excess, 1e-6, 20.0, xtol=1e-15, rtol=1e-15, maxiter=500)
    closed = np.arccosh(1.0 / (np.tan(np.pi / n) * np.tan(angle / 2)))
    if abs(excess(r)) > 1e-12 or abs(r - closed) > 1e-12:
        raise ConstructionFailure(f"vertex radius solve failed: r={r}, closed form {closed}")
    # right triangle centre / side midpoint / vertex
    inradius = np.arccosh(np.cos(angle / 2) / np.sin(np.pi / n))
    return OctagonGeometry(float(r), float(inradius))


@dataclass(frozen=True)
class FuchsianGroup:
    """Side-pairing generators ``a1, b1, a2, b2`` of the octagon group."""

    generators: tuple
    octagon: OctagonGeometry
    side_maps: tuple  # side_maps[k] maps the tile beyond side k back onto the octagon
    words: tuple = field(default=(), compare=False)

    def generator_dict(self):
        return dict(zip(GENERATOR_NAMES, self.generators))

    def letter_maps(self):
        """Map from word letters (``a``..``d`` and inverses ``A``..``D``)."""
        out = {}
        for ch, g in zip(LETTERS, self.generators):
            out[ch] = g
            out[ch.upper()] = g.inverse()
        return out

    def relator(self) -> MobiusMap:
        a1, b1, a2, b2 = self.generators
        comm = lambda x, y: x @ y @ x.inverse() @ y.inverse()
        return comm(a1, b1) @ comm(a2, b2)

    def relator_residual(self) -> float:
        return self.relator().distance(IDENTITY)

    def word_map(self, word: str) -> MobiusMap:
        lm = self.letter_maps()
        m = IDENTITY
        for ch in word:
            m = m @ lm[ch]
        return m

    def to_dict(self, max_len=None) -> dict:
        return {
            "generators": [g.to_list() for g in self.generators],
            "names": list(GENERATOR_NAMES),
            "max_len": max_len,
            "words": list(self.words),
        }


def _side_pairing(j: int, k: int, inradius: float) -> np.ndarray:
    """Map side ``j`` onto side ``k``, carrying the octagon across side ``k``."""
    return _rotation(k * np.pi / 4) @ _translation(2 * inradius) @ _rotation(np.pi - j * np.pi / 4)


@lru_cache(maxsize=None)
def build_genus2_group() -> FuchsianGroup:
    geo = solve_octagon()
    P = {j: MobiusMap(_side_pairing(j, PARTNER[j], geo.inradius)) for j in range(N_SIDES)}
    gens = (P[0].inverse(), P[1], P[4].inverse(), P[5])
    G = FuchsianGroup(gens, geo, tuple(P[j] for j in range(N_SIDES)))
    res = G.relator_residual()
    if res > 1e-9:
        raise ConstructionFailure(f"relator residual {res:.3e}")
    return G


def _key(m: np.ndarray, digits: int = 8):
    """Hashable sign-normalised rounding of an SL2 matrix."""
    flat = m.ravel()
    pivot = flat[np.argmax(np.abs(flat) > 1e-9)]
    if pivot.real < 0 or (pivot.real == 0 and pivot.imag < 0):
        flat = -flat
    return tuple(np.round(np.concatenate([flat.real, flat.imag]), digits))


def _free_successors(word: str):
    last = word[-1] if word else None
    for ch in LETTERS + LETTERS.upper():
        if last is not None and ch == last.swapcase():
            continue
        yield ch


def enumerate_group(G: FuchsianGroup, max_len: int, cap: int = 2_000_000):
    """All reduced words of length ``<= max_len``, deduplicated by matrix distance.

    Returns a list of ``(word, MobiusMap)`` in breadth-first canonical order.
    """
    if max_len < 0:
        raise ValueError("max_len must be non-negative")
    lm = G.letter_maps()
    out = [("", IDENTITY)]
    seen = {_key(IDENTITY.matrix)}
    frontier = [("", IDENTITY)]
    for _ in range(max_len):
        nxt = []
        for word, m in frontier:
            for ch in _free_successors(word):
                mm = m @ lm[ch]
                k = _key(mm.matrix)
                if k in seen:
                    continue
                seen.add(k)
                nxt.append((word + ch, mm))
                if len(out) + len(nxt) > cap:
                    raise BudgetExceeded(f"enumeration exceeded cap {cap}")
        out.extend(nxt)
        frontier = nxt
    return out


@dataclass(frozen=True)
class Orbit:
    """Group elements with displacement ``d(0, g 0) <= radius``.

    ``parent[i]`` and ``letter[i]`` record ``element_i = element_parent * letter``
    so the same words can be replayed in a conjugated group.
    """

    radius: float
    matrices: np.ndarray  # (N, 2, 2)
    parent: np.ndarray
    letter: np.ndarray  # index into "abcdABCD", -1 for identity
    displacement: np.ndarray

    def __len__(self):
        return len(self.matrices)

    def replay(self, generator_mats) -> np.ndarray:
        """Matrices of the same words evaluated on other generators (a,b,c,d order)."""
        gm = [np.asarray(g, dtype=complex) for g in generator_mats]
        gm = gm + [np.linalg.inv(g) for g in gm]
        out = np.empty_like(self.matrices)
        out[0] = np.eye(2)
        for i in range(1, len(self)):
            out[i] = out[self.parent[i]] @ gm[self.letter[i]]
        return out


@lru_cache(maxsize=8)
def orbit_ball(radius: float, slack: float = 0.5, cap: int = 5_000_000) -> Orbit:
    """Breadth-first orbit of 0 truncated by displacement.

    Elements with displacement ``<= radius + slack`` are expanded; only those
    with displacement ``<= radius`` are kept.  The slack guards against words
    whose shortest path leaves the ball briefly.
    """
    G = build_genus2_group()
    letters = LETTERS + LETTERS.upper()
    lm = G.letter_maps()
    gen = np.stack([lm[ch].matrix for ch in letters])
    limit = np.tanh((radius + slack) / 2)
    mats = [np.eye(2, dtype=complex)]
    parent, letter = [0], [-1]
    seen = {0j}
    frontier = np.array([0])
    all_mats = np.eye(2, dtype=complex)[None]
    while len(frontier):
        cand = np.einsum("nij,gjk->ngik", all_mats[frontier], gen).reshape(-1, 2, 2)
        par = np.repeat(frontier, len(letters))
        let = np.tile(np.arange(len(letters)), len(frontier))
        orig = cand[:, 0, 1] / cand[:, 1, 1]
        ok = np.abs(orig) <= limit
        new_idx = []
        base = len(mats)
        for c, p, l, o in zip(cand[ok], par[ok], let[ok], orig[ok]):
            key = complex(round(o.real, 11), round(o.imag, 11))
            if key in seen:
                continue
            seen.add(key)
            mats.append(c)
            parent.append(int(p))
            letter.append(int(l))
            new_idx.append(base + len(new_idx))
            if len(mats) > cap:
                raise BudgetExceeded(f"orbit enumeration exceeded cap {cap}")
        all_mats = np.array(mats)
        frontier = np.array(new_idx, dtype=int)
    mats = np.array(mats)
    disp = 2 * np.arctanh(np.minimum(np.abs(mats[:, 0, 1] / mats[:, 1, 1]), 1 - 1e-16))
    keep = disp <= radius
    # re-index parents of kept elements; expanded-only elements are dropped,
    # so parents are resolved to kept ancestors by replaying full words
    idx = np.flatnonzero(keep)
    remap = -np.ones(len(mats), dtype=int)
    remap[idx] = np.arange(len(idx))
    parent = np.array(parent)
    letter = np.array(letter)
    if np.any(remap[parent[idx]] < 0):
        # a kept element whose parent was only expanded: keep the chain
        chain = set(idx.tolist())
        stack = list(idx)
        while stack:
            p = parent[stack.pop()]
            if p not in chain:
                chain.add(p)
                stack.append(p)
        idx = np.array(sorted(chain))
        remap[:] = -1
        remap[idx] = np.arange(len(idx))
    order = idx
    return Orbit(radius, mats[order], remap[parent[order]], letter[order], disp[order])


def reduce_to_domain(G: FuchsianGroup, z, max_steps: int = 200):
    """Move points into the octagon with side pairings.

    Returns ``(w, coeffs)`` where ``coeffs = (a, b, c, d)`` arrays of the
    element ``M`` with ``w = M z``; ``M'(z) = 1 / (c z + d)^2``.
    """
    z = np.array(z, dtype=complex)
    w = z.copy()
    a = np.ones_like(w)
    b = np.zeros_like(w)
    c = np.zeros_like(w)
    d = np.ones_like(w)
    maps = [m.matrix for m in G.side_maps]
    centers, r = G.octagon.side_circles()
    for _ in range(max_steps):
        moved = False
        for k in range(N_SIDES):
            sel = np.abs(w - centers[k]) < r
            if not np.any(sel):
                continue
            moved = True
            (p, q), (s, t) = maps[k]
            w[sel] = (p * w[sel] + q) / (s * w[sel] + t)
            a[sel], b[sel], c[sel], d[sel] = (p * a[sel] + q * c[sel], p * b[sel] + q * d[sel],
                                              s * a[sel] + t * c[sel], s * b[sel] + t * d[sel])
        if not moved:
            return w, (a, b, c, d)
    raise BudgetExceeded("point reduction did not terminate")


@dataclass(frozen=True)
class FundamentalMesh:
    """Quadrature weights on a cell-centred grid representing the octagon.

    ``kind == "cut"``: ``weights`` is the Euclidean area of each cell
    intersected with the closed octagon.  ``kind == "partition"``: ``weights``
    is ``h^2 chi`` for a smooth Gamma-partition of unity ``chi``; this
    integrates Gamma-invariant densities over the quotient with spectral
    accuracy but is not supported in the octagon.
    """

    grid: Grid
    weights: np.ndarray
    inside: np.ndarray  # weight > 0
    interior: np.ndarray  # fully covered cells
    kind: str = "cut"

    @property
    def centers(self):
        return self.grid.centers()

    def integrate(self, values) -> complex:
        v = np.asarray(values)[self.inside]
        return complex(np.sum(v * self.weights[self.inside]))

    def to_dict(self) -> dict:
        return {"grid": self.grid.to_dict(),
                "domain": {"type": "regular octagon", "vertex_angle": "pi/4", "center": [0.0, 0.0]},
                "weights": self.kind,
                "cells": int(self.inside.sum())}


def mesh_on_grid(G: FuchsianGroup, grid: Grid, subsamples: int = 8) -> FundamentalMesh:
    """Area-fraction weights of ``grid`` cells against the octagon."""
    geo = G.octagon
    z = grid.centers()
    h = grid.spacing
    full = geo.contains(z)
    # cells within a diagonal of the boundary are resolved by subsampling
    centers, r = geo.side_circles()
    dist = np.min(np.abs(np.abs(z[None] - centers[:, None, None]) - r), axis=0)
    near = dist < h * np.sqrt(0.5) + 1e-12
    weights = np.where(full, h * h, 0.0)
    iy, ix = np.nonzero(near)
    if len(iy):
        s = (np.arange(subsamples) + 0.5) / subsamples - 0.5
        off = (s[None, :] + 1j * s[:, None]).ravel() * h
        pts = z[iy, ix][:, None] + off[None, :]
        frac = geo.contains(pts).mean(axis=1)
        weights[iy, ix] = frac * h * h
    inside = weights > 0
    interior = inside & ~near
    return FundamentalMesh(grid, weights, inside, interior)


PARTITION_RADIUS = 2.8


def _bump(x):
    out = np.zeros(np.shape(x))
    m = x < 1
    out[m] = np.exp(-1.0 / (1.0 - x[m] ** 2))
    return out


def partition_weights(G: FuchsianGroup, z, radius: float = PARTITION_RADIUS) -> np.ndarray:
    """Smooth ``chi`` with ``sum_g chi(g z) = 1`` for every ``z`` in the disk.

    ``chi = w / sum_g w(g .)`` where ``w`` is a bump in the hyperbolic
    distance to 0 supported in the ball of the given radius, which must exceed
    the octagon circumradius so that the translates cover the disk.
    """
    r_f = 2 * np.arctanh(G.octagon.vertex_radius)
    if radius <= r_f:
        raise ValueError(f"partition radius {radius} must exceed the circumradius {r_f:.4f}")
    z = np.asarray(z, dtype=complex)
    edge = np.tanh(radius / 2)
    sup = np.abs(z) < edge
    zs = z[sup]
    total = np.zeros(zs.shape)
    for m in orbit_ball(2 * radius + 0.01).matrices:
        gz = (m[0, 0] * zs + m[0, 1]) / (m[1, 0] * zs + m[1, 1])
        a = np.abs(gz)
        k = a < edge
        total[k] += _bump(2 * np.arctanh(a[k]) / radius)
    chi = np.zeros(z.shape)
    chi[sup] = _bump(2 * np.arctanh(np.abs(zs)) / radius) / total
    return chi


def partition_mesh_on_grid(G: FuchsianGroup, grid: Grid,
                           radius: float = PARTITION_RADIUS) -> FundamentalMesh:
    """Partition-of-unity weights on ``grid``, which must cover ``|z| < tanh(radius/2)``."""
    edge = np.tanh(radius / 2)
    x0 = grid.origin
    x1 = x0 + grid.spacing * complex(grid.nx, grid.ny)
    if min(-x0.real, -x0.imag, x1.real, x1.imag) < edge:
        raise ValueError(f"grid does not cover the partition support |z| < {edge:.4f}")
    w = partition_weights(G, grid.centers(), radius) * grid.spacing ** 2
    inside = w > 0
    return FundamentalMesh(grid, w, inside, inside, "partition")


def fundamental_mesh(G: FuchsianGroup, resolution: int, subsamples: int = 8) -> FundamentalMesh:
    if resolution < 16:
        raise ValueError("resolution must be at least 16")
    half = G.octagon.vertex_radius * 1.01
    return mesh_on_grid(G, Grid.square(half, resolution), subsamples)


def rho0(z):
    """Density of the hyperbolic disk metric ``rho0 |dz|^2``."""
    return 4.0 / (1.0 - np.abs(z) ** 2) ** 2


def hyperbolic_density(mesh: FundamentalMesh) -> ScalarField:
    z = mesh.centers
    vals = np.where(np.abs(z) < 1, rho0(np.where(np.abs(z) < 1, z, 0)), 0.0)
    return ScalarField(vals.astype(complex), mesh.grid, "z")


def hyperbolic_area(mesh: FundamentalMesh) -> float:
    return mesh.integrate(hyperbolic_density(mesh).values).real
