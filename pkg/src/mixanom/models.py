"""Lattices, the model catalog, closed-form steady states, and the decorated-domain-wall and edge checks."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

import numpy as np

from . import anomaly
from .anomaly import GroupSpec, z2_product_group
from .lindblad import (ConjugatedState, LindbladModel, ProductState, SectorSpec, apply_symbolic_state)
from .pauli import (OperatorSum, QQ_I, coeff, diagonal_operator, format_word, mul, occupations,
                    word_letters, X, Z)
from .phasepoly import (LocalProduct, PhasePolyUnitary, Region, canonical_equal, compose, compose_all,
                        conjugate_operator, invert, to_operator_sum)

MODEL_NAMES = ("example1", "example2", "example3", "cluster_aspt", "aspt2d_KA", "aspt2d_KBC")
CHAIN_CAP = 16
TRIANGULAR_CAP = 64

_HALF = QQ_I(1, 0) / QQ_I(2, 0)


class ModelError(ValueError):
    pass


# lattices

@dataclass
class Lattice:
    kind: str
    dims: tuple
    boundary: str
    sites: tuple
    sublattice: dict
    edges: tuple
    triangles: tuple = ()
    coords: dict = field(default_factory=dict)
    one_links: dict = field(default_factory=dict)
    boundary_sites: tuple = ()

    def __post_init__(self):
        adj: dict = {s: set() for s in self.sites}
        for a, b in self.edges:
            adj[a].add(b)
            adj[b].add(a)
        self._adj = {s: tuple(sorted(v)) for s, v in adj.items()}
        tri_of: dict = {}
        for t in self.triangles:
            for e in itertools.combinations(sorted(t), 2):
                tri_of.setdefault(e, []).append(t)
        self._edge_triangles = tri_of

    def neighbors(self, s: int) -> tuple:
        return self._adj[s]

    def of_sublattice(self, label: str) -> tuple:
        return tuple(s for s in self.sites if self.sublattice[s] == label)

    def edge_triangles(self, a: int, b: int) -> list:
        return self._edge_triangles.get(tuple(sorted((a, b))), [])

    def same_sublattice_neighbors(self, s: int) -> tuple:
        """Nearest neighbours within the site's own sublattice (triangular lattice)."""
        if self.kind != "triangular":
            raise ModelError("sublattice neighbours are defined for the triangular lattice")
        x, y = self.coords[s]
        out = set()
        for dx, dy in ((1, 1), (2, -1), (-1, 2), (-1, -1), (-2, 1), (1, -2)):
            t = self._site_at(x + dx, y + dy)
            if t is not None and t != s:
                out.add(t)
        return tuple(sorted(out))

    def _site_at(self, x: int, y: int):
        Lx, Ly = self.dims
        if self.boundary == "pbc":
            x, y = x % Lx, y % Ly
        return self._index.get((x, y))

    def is_interior(self, s: int) -> bool:
        return s not in set(self.boundary_sites)


def _chain(L: int, boundary: str) -> Lattice:
    if L < 2:
        raise ModelError("chain needs at least 2 sites")
    sites = tuple(range(1, L + 1))
    edges = [(i, i + 1) for i in range(1, L)]
    if boundary == "pbc" and L > 2:
        edges.append((1, L))
    sub = {s: "even" if s % 2 == 0 else "odd" for s in sites}
    bsites = (1, L) if boundary == "obc" else ()
    return Lattice("chain", (L,), boundary, sites, sub, tuple(edges), boundary_sites=bsites)


_HEX = ((1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1))
_SUB = "ABC"


def _triangular(Lx: int, Ly: int, boundary: str) -> Lattice:
    """Triangular lattice in axial coordinates; sublattice (x + 2y) mod 3.

    PBC needs Lx, Ly multiples of 3.  OBC starts from the Lx x Ly
    parallelogram and removes every A site missing one of its six
    neighbours, so A sites are strictly interior and the boundary holds
    only B and C sites.
    """
    if boundary == "pbc" and (Lx % 3 or Ly % 3):
        raise ModelError("periodic triangular lattice needs dims that are multiples of 3")
    if min(Lx, Ly) < 3:
        raise ModelError("triangular lattice needs dims >= 3")
    cells = {(x, y) for x in range(Lx) for y in range(Ly)}

    def wrap(x, y):
        return (x % Lx, y % Ly) if boundary == "pbc" else (x, y)

    if boundary == "obc":
        for _ in range(2):
            drop = {c for c in cells if (c[0] + 2 * c[1]) % 3 == 0
                    and any(wrap(c[0] + dx, c[1] + dy) not in cells for dx, dy in _HEX)}
            cells -= drop
    tris = []
    for x, y in itertools.product(range(Lx), range(Ly)):
        for t in (((x, y), (x + 1, y), (x, y + 1)), ((x + 1, y), (x, y + 1), (x + 1, y + 1))):
            t = tuple(wrap(*c) for c in t)
            if all(c in cells for c in t):
                tris.append(t)
    used = {c for t in tris for c in t}
    cells &= used
    order = sorted(cells, key=lambda c: (c[1], c[0]))
    index = {c: i + 1 for i, c in enumerate(order)}
    sub = {index[c]: _SUB[(c[0] + 2 * c[1]) % 3] for c in order}
    edges = set()
    for c in order:
        for dx, dy in _HEX:
            d = wrap(c[0] + dx, c[1] + dy)
            if d in index:
                edges.add(tuple(sorted((index[c], index[d]))))
    triangles = []
    for t in tris:
        ids = sorted((index[c] for c in t), key=lambda s: sub[s])
        triangles.append(tuple(ids))
    triangles = sorted(set(triangles))
    one_links: dict = {s: [] for s in index.values()}
    for t in triangles:
        for v in t:
            one_links[v].append(tuple(sorted(w for w in t if w != v)))
    coords = {i: c for c, i in index.items()}
    nb_count = {s: 0 for s in coords}
    for a, b in edges:
        nb_count[a] += 1
        nb_count[b] += 1
    bsites = tuple(s for s in sorted(coords) if nb_count[s] < 6)
    lat = Lattice("triangular", (Lx, Ly), boundary, tuple(sorted(coords)), sub, tuple(sorted(edges)),
                  tuple(triangles), coords, {k: tuple(sorted(v)) for k, v in one_links.items()}, bsites)
    lat._index = index
    return lat


def build_lattice(kind: str, dims, boundary: str = "pbc") -> Lattice:
    if boundary not in ("pbc", "obc"):
        raise ModelError(f"unknown boundary {boundary!r}")
    dims = tuple(dims) if isinstance(dims, (tuple, list)) else (dims,)
    if kind == "chain":
        return _chain(int(dims[0]), boundary)
    if kind == "triangular":
        if len(dims) != 2:
            raise ModelError("triangular lattice takes (Lx, Ly)")
        return _triangular(int(dims[0]), int(dims[1]), boundary)
    raise ModelError(f"unknown lattice kind {kind!r}")


def domain_wall_edges(lat: Lattice, flipped: Iterable[int], label: str) -> list[tuple]:
    """Dual-loop edges N_label: links between the other two sublattices whose
    adjacent triangles hold an odd number of flipped ``label`` vertices."""
    flipped = set(flipped)
    out = []
    for a, b in lat.edges:
        if label in (lat.sublattice[a], lat.sublattice[b]):
            continue
        n = 0
        for t in lat.edge_triangles(a, b):
            third = next(v for v in t if v not in (a, b))
            n += third in flipped
        if n % 2:
            out.append((a, b))
    return out


def ring_order(edges: Iterable[tuple]) -> list[int]:
    """Vertices of a single simple cycle in traversal order."""
    adj: dict = {}
    for a, b in edges:
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    if not adj or any(len(v) != 2 for v in adj.values()):
        raise ModelError("edge graph is not a simple cycle")
    start = min(adj)
    order, prev, cur = [start], None, start
    while True:
        nxt = [v for v in sorted(adj[cur]) if v != prev]
        prev, cur = cur, nxt[0]
        if cur == start:
            break
        order.append(cur)
    if len(order) != len(adj):
        raise ModelError("edge graph has several components")
    return order


# model ids

@dataclass(frozen=True)
class ModelId:
    name: str
    L: int = 6
    Lx: int = 6
    Ly: int = 6
    bc: str = "pbc"
    r: Fraction = Fraction(1)
    J: Fraction = Fraction(1)
    lam: Fraction = Fraction(1, 2)
    J1: Fraction = Fraction(1)
    J2: Fraction = Fraction(1, 2)

    def __post_init__(self):
        if self.name not in MODEL_NAMES:
            raise ModelError(f"unknown model {self.name!r}; choose from {', '.join(MODEL_NAMES)}")
        if self.bc not in ("pbc", "obc"):
            raise ModelError(f"unknown boundary {self.bc!r}")
        for f in ("r", "J", "lam", "J1", "J2"):
            object.__setattr__(self, f, Fraction(getattr(self, f)))
        if self.is_chain:
            if not 3 <= self.L <= CHAIN_CAP:
                raise ModelError(f"chain length must be within 3..{CHAIN_CAP}")
            if self.name in ("example2", "example3", "cluster_aspt") and self.L % 2:
                raise ModelError(f"{self.name} needs an even chain length")
            if self.name == "cluster_aspt" and self.L < 4:
                raise ModelError("cluster_aspt needs L >= 4")
        elif self.Lx * self.Ly > TRIANGULAR_CAP:
            raise ModelError(f"triangular lattice limited to {TRIANGULAR_CAP} cells")

    @property
    def is_chain(self) -> bool:
        return not self.name.startswith("aspt2d")

    def lattice(self) -> Lattice:
        if self.is_chain:
            return build_lattice("chain", self.L, self.bc)
        return build_lattice("triangular", (self.Lx, self.Ly), self.bc)

    def params(self) -> dict:
        out = {"name": self.name, "bc": self.bc, "r": str(self.r)}
        if self.is_chain:
            out["L"] = self.L
        else:
            out.update(Lx=self.Lx, Ly=self.Ly)
        extra = {"example1": ("J", "lam"), "example2": ("J1", "J2"), "example3": ("J",)}.get(self.name, ())
        out.update({k: str(getattr(self, k)) for k in extra})
        return out


CATALOG = {
    "example1": "strong U(1) domain-wall charge (DW subgroup), weak global spin flip; dephasing jumps",
    "example2": "strong CZ ring, weak global spin flip; dephasing jumps",
    "example3": "strong global spin flip, weak CZ ring; jumps X_i - Z X_i Z",
    "cluster_aspt": "1+1D average SPT: strong flips on even sites, weak flips on odd sites",
    "aspt2d_KA": "2+1D CCZ-conjugated model on the triangular lattice: strong A flips, weak B and C flips",
    "aspt2d_KBC": "2+1D CCZ-conjugated model on the triangular lattice: strong B and C flips, weak A flips",
}


def catalog() -> list[dict]:
    rows = []
    for name in MODEL_NAMES:
        params = ["L", "bc", "r"] if not name.startswith("aspt2d") else ["Lx", "Ly", "bc", "r"]
        params += {"example1": ["J", "lam"], "example2": ["J1", "J2"], "example3": ["J"]}.get(name, [])
        rows.append({"model": name, "description": CATALOG[name], "parameters": params})
    return rows


# symmetry operators

def _wrap(i: int, L: int) -> int:
    return (i - 1) % L + 1


def chain_bonds(L: int, bc: str) -> list[tuple]:
    bonds = [(i, i + 1) for i in range(1, L)]
    if bc == "pbc":
        bonds.append((L, 1))
    return bonds


def dw_operator(L: int, bc: str = "pbc") -> LocalProduct:
    """exp(i pi Q) as a product of two-site gates exp[i pi/4 (1 - Z_i Z_j)]."""
    return LocalProduct(tuple(PhasePolyUnitary.zz_quarter(i, j) for i, j in chain_bonds(L, bc)))


def cz_ring(L: int, bc: str = "pbc", sites: Iterable[int] | None = None) -> LocalProduct:
    return LocalProduct(tuple(PhasePolyUnitary.cz(i, j) for i, j in chain_bonds(L, bc)
                              if sites is None or {i, j} <= set(sites)))


def flips(sites: Iterable[int]) -> LocalProduct:
    return LocalProduct(tuple(PhasePolyUnitary.flips([s]) for s in sorted(sites)))


def domain_wall_charge(sites: Iterable[int], pbc: bool = True) -> OperatorSum:
    """Q = 1/4 sum (1 - Z_i Z_{i+1}) over chain bonds."""
    sites = tuple(sorted(sites))
    L = len(sites)
    bonds = chain_bonds(L, "pbc" if pbc else "obc")
    quarter = QQ_I(1, 0) / QQ_I(4, 0)
    out = OperatorSum.zero(sites)
    for i, j in bonds:
        out = out + (OperatorSum.identity(sites) - Z(sites, i, j)).scale(quarter)
    return out


def onsite_group(L: int = 10) -> GroupSpec:
    """Decoupled onsite Z2 x Z2: strong flips on even sites, weak flips on odd sites."""
    even = [s for s in range(1, L + 1) if s % 2 == 0]
    odd = [s for s in range(1, L + 1) if s % 2]
    return z2_product_group([("B", flips(odd), False), ("A", flips(even), True)])


def chain_group(name: str, L: int, bc: str = "pbc") -> GroupSpec:
    sites = range(1, L + 1)
    if name == "example1":
        return z2_product_group([("X", flips(sites), False), ("DW", dw_operator(L, bc), True)])
    if name == "example2":
        return z2_product_group([("CZ", cz_ring(L, bc), True), ("X", flips(sites), False)])
    if name == "example3":
        return z2_product_group([("CZ", cz_ring(L, bc), False), ("X", flips(sites), True)])
    if name == "cluster_aspt":
        even = [s for s in sites if s % 2 == 0]
        odd = [s for s in sites if s % 2]
        return z2_product_group([("K", flips(even), True), ("G", flips(odd), False)])
    raise ModelError(f"no chain group for {name!r}")


def ccz_entangler(lat: Lattice) -> PhasePolyUnitary:
    """U(CCZ): a CCZ gate on every triangle."""
    return PhasePolyUnitary(frozenset(), {frozenset(t): 4 for t in lat.triangles})


def lattice_group(name: str, lat: Lattice) -> GroupSpec:
    A, B, C = (lat.of_sublattice(s) for s in "ABC")
    strong_a = name == "aspt2d_KA"
    return z2_product_group([("A", flips(A), strong_a), ("B", flips(B), not strong_a),
                             ("C", flips(C), not strong_a)])


def o_operator(lat: Lattice, i: int) -> OperatorSum:
    """O_i = X_i times CZ on every 1-link of i, as an explicit Pauli sum."""
    sites = lat.sites
    out = X(sites, i)
    for a, b in lat.one_links[i]:
        cz = (OperatorSum.identity(sites) + Z(sites, a) + Z(sites, b) - Z(sites, a, b)).scale(_HALF)
        out = mul(out, cz)
    return out


def o_unitary(lat: Lattice, i: int) -> PhasePolyUnitary:
    gates = [PhasePolyUnitary.flips([i])] + [PhasePolyUnitary.cz(a, b) for a, b in lat.one_links[i]]
    return compose_all(gates)


# models

def _chain_hamiltonian(mid: ModelId, sites: tuple) -> OperatorSum:
    L, pbc = mid.L, mid.bc == "pbc"
    H = OperatorSum.zero(sites)

    def ok(*idx):
        return pbc or all(1 <= i <= L for i in idx)

    def w(letters):
        return OperatorSum.word(sites, {_wrap(i, L): a for i, a in letters.items()})

    for i in range(1, L + 1):
        if mid.name == "example1":
            if ok(i - 1, i + 1):
                H = H + (w({i: "X"}) - w({i - 1: "Z", i: "X", i + 1: "Z"})).scale(coeff(mid.J))
            if ok(i + 1):
                H = H - w({i: "Z", i + 1: "Z"}).scale(coeff(mid.lam))
        elif mid.name == "example2":
            if ok(i - 1, i + 1):
                H = H + (w({i: "X"}) + w({i - 1: "Z", i: "X", i + 1: "Z"})).scale(coeff(mid.J1))
            if ok(i - 2, i + 2) and L > 4:
                H = H + (w({i - 1: "X", i + 1: "X"})
                         + w({i - 2: "Z", i - 1: "X", i + 1: "X", i + 2: "Z"})).scale(coeff(mid.J2))
        elif mid.name == "example3":
            if ok(i - 1, i + 1):
                H = H + (w({i: "X"}) + w({i - 1: "Z", i: "X", i + 1: "Z"})).scale(coeff(mid.J))
    return H


def _chain_jumps(mid: ModelId, sites: tuple) -> list[OperatorSum]:
    L, pbc = mid.L, mid.bc == "pbc"

    def ok(*idx):
        return pbc or all(1 <= i <= L for i in idx)

    def w(letters):
        return OperatorSum.word(sites, {_wrap(i, L): a for i, a in letters.items()})

    jumps = []
    if mid.name in ("example1", "example2"):
        jumps = [Z(sites, i) for i in sites]
    elif mid.name == "example3":
        jumps = [w({i: "X"}) - w({i - 1: "Z", i: "X", i + 1: "Z"}) for i in sites if ok(i - 1, i + 1)]
    elif mid.name == "cluster_aspt":
        one = OperatorSum.identity(sites)
        for i in range(1, L // 2 + 1):
            e = 2 * i
            if ok(e - 1, e + 2):
                stab = w({e - 1: "Z", e: "X", e + 1: "Z"})
                jumps.append(mul(w({e: "Z", e + 2: "Z"}), (one - stab).scale(_HALF)))
        for i in range(1, L // 2 + 1):
            o = 2 * i - 1
            jumps.append(w({o: "Z"}))
        for i in range(1, L // 2 + 1):
            o = 2 * i - 1
            if ok(o - 1, o + 1):
                jumps.append(w({o - 1: "Z", o: "X", o + 1: "Z"}))
    # rates are uniform across all jump families
    return jumps


def _lattice_jumps(mid: ModelId, lat: Lattice) -> list[OperatorSum]:
    """Bulk jumps of the CCZ-conjugated models; under OBC only sites away from the edge carry jumps."""
    sites = lat.sites
    one = OperatorSum.identity(sites)
    strong_sub = "A" if mid.name == "aspt2d_KA" else "BC"
    jumps = []
    for s in sites:
        if lat.boundary == "obc" and not lat.is_interior(s):
            continue
        Os = o_operator(lat, s)
        if lat.sublattice[s] in strong_sub:
            proj = (one - Os).scale(_HALF)
            nbr = OperatorSum.zero(sites)
            for j in lat.same_sublattice_neighbors(s):
                nbr = nbr + Z(sites, s, j)
            if not nbr.is_zero():
                jumps.append(mul(nbr, proj))
        else:
            jumps.append(Z(sites, s))
            jumps.append(Os)
    return jumps


def build_model(mid: ModelId) -> LindbladModel:
    lat = mid.lattice()
    sites = lat.sites
    if mid.is_chain:
        H = _chain_hamiltonian(mid, sites)
        jumps = _chain_jumps(mid, sites)
        group = chain_group(mid.name, mid.L, mid.bc)
    else:
        H = OperatorSum.zero(sites)
        jumps = _lattice_jumps(mid, lat)
        group = lattice_group(mid.name, lat)
    rates = [coeff(mid.r)] * len(jumps)
    return LindbladModel(sites, H, jumps, rates, mid.bc, group, mid.name, lat)


def _weak_generators(group: GroupSpec) -> list[str]:
    """Independent generators of the weak subgroup."""
    span, gens = {group.identity}, []
    for g in group.weak:
        if g in span:
            continue
        gens.append(g)
        span |= {group.mul(g, h) for h in span}
    return gens


def superop_symmetries(mid: ModelId, model: LindbladModel | None = None) -> list:
    """Superoperators rho -> U rho U^dagger commuting with the Lindbladian.

    Weak-symmetry generators always; on periodic chains also the smallest
    translation that maps the model to itself (two sites for the cluster
    chain, whose sublattices alternate).
    """
    from .lindblad import _generator_matrix, superop_of, translation_matrix

    model = model or build_model(mid)
    sites = model.sites
    out = []
    for g in _weak_generators(model.symmetry):
        U = _generator_matrix(model.symmetry.rep[g].left, sites, len(sites))
        out.append(superop_of(U))
    if mid.is_chain and mid.bc == "pbc":
        out.append(superop_of(translation_matrix(len(sites), 2 if mid.name == "cluster_aspt" else 1)))
    return out


# sectors

def _parse_sector(value):
    if value is None:
        return None
    if isinstance(value, str):
        return Fraction(value)
    return Fraction(value)


def sector_spec(mid: ModelId, sector=None) -> list[SectorSpec]:
    """Strong-symmetry sector used for numerics.  Defaults: q = 0, CZ = +1, X = +1, K = +1."""
    s = _parse_sector(sector)
    L, bc = mid.L, mid.bc
    sites = tuple(range(1, L + 1))
    if mid.name == "example1":
        q = s if s is not None else Fraction(0)
        return [SectorSpec(domain_wall_charge(sites, pbc=bc == "pbc"), complex(q), f"Q={q}")]
    if mid.name == "example2":
        c = int(s) if s is not None else 1
        return [SectorSpec(cz_ring(L, bc).unitary(), c, f"CZ={c:+d}")]
    if mid.name == "example3":
        c = int(s) if s is not None else 1
        return [SectorSpec(flips(sites).unitary(), c, f"X={c:+d}")]
    if mid.name == "cluster_aspt":
        c = int(s) if s is not None else 1
        return [SectorSpec(flips([i for i in sites if i % 2 == 0]).unitary(), c, f"K={c:+d}")]
    raise ModelError(f"no numeric sectors for {mid.name}")


def valid_charges(mid: ModelId) -> list[Fraction]:
    """Domain-wall charges realized on the chain."""
    n_bonds = mid.L if mid.bc == "pbc" else mid.L - 1
    dws = range(0, n_bonds + 1, 2) if mid.bc == "pbc" else range(0, n_bonds + 1)
    return [Fraction(d, 2) for d in dws]


# closed forms

def _dw_values(L: int, bc: str) -> np.ndarray:
    occ = occupations(L)
    bonds = chain_bonds(L, bc)
    return sum((occ[:, i - 1] != occ[:, j - 1]).astype(np.int64) for i, j in bonds)


def charge_projector(L: int, q, bc: str = "pbc") -> OperatorSum:
    """P_{Q=q} expanded over Z words."""
    sites = tuple(range(1, L + 1))
    vals = (_dw_values(L, bc) == int(Fraction(q) * 2)).astype(np.int64)
    if not vals.any():
        raise ModelError(f"charge {q} not realized on this chain")
    return diagonal_operator(sites, vals)


def basis_projector(sites: tuple, bits: Iterable[int]) -> OperatorSum:
    """|b><b| for occupation bits (1 = down), one per site."""
    one = OperatorSum.identity(sites)
    out = one
    for s, b in zip(sites, bits):
        out = mul(out, (one + Z(sites, s).scale(QQ_I(-1 if b else 1, 0))).scale(_HALF))
    return out


def _cz_operator(L: int, bc: str) -> OperatorSum:
    return to_operator_sum(cz_ring(L, bc).unitary(), tuple(range(1, L + 1)), cap=CHAIN_CAP)


def cluster_state(L: int) -> OperatorSum:
    """rho_cluster = prod over even sites of (I + Z X Z)/2 (periodic)."""
    sites = tuple(range(1, L + 1))
    one = OperatorSum.identity(sites)
    out = one
    for e in range(2, L + 1, 2):
        stab = OperatorSum.word(sites, {_wrap(e - 1, L): "Z", e: "X", _wrap(e + 1, L): "Z"})
        out = mul(out, (one + stab).scale(_HALF))
    return out


def trivial_lattice_state(mid: ModelId, lat: Lattice) -> ProductState:
    """Trivial-frame steady state: polarized strong sublattice(s), maximally mixed weak ones."""
    strong_sub = "A" if mid.name == "aspt2d_KA" else "BC"
    factors = {}
    for s in lat.sites:
        if lat.sublattice[s] in strong_sub and (lat.boundary == "pbc" or lat.is_interior(s)):
            factors[s] = (OperatorSum.identity(lat.sites) + X(lat.sites, s)).scale(_HALF)
    return ProductState.build(lat.sites, factors)


def closed_form_steady(mid: ModelId, sector=None, verify: bool = True) -> list:
    """Exact unnormalized steady states of the sector, as a list.

    Chain models give OperatorSums; the 2+1D models give ConjugatedStates
    U(CCZ) (trivial product state) U(CCZ)^dagger.
    """
    s = _parse_sector(sector)
    L, bc = mid.L, mid.bc
    out: list = []
    if mid.name == "example1":
        sites = tuple(range(1, L + 1))
        q = s if s is not None else Fraction(0)
        if q not in valid_charges(mid):
            raise ModelError(f"charge {q} is not a sector of {mid.name} ({bc}, L={L})")
        one = OperatorSum.identity(sites)
        if bc == "pbc":
            if q == 0:
                out = [basis_projector(sites, [0] * L), basis_projector(sites, [1] * L)]
            elif q == Fraction(L, 2):
                out = [basis_projector(sites, [i % 2 for i in range(L)]),
                       basis_projector(sites, [(i + 1) % 2 for i in range(L)])]
            else:
                out = [charge_projector(L, q, bc)]
        else:
            P = charge_projector(L, q, bc)
            sgn = 1 if (2 * q) % 2 == 0 else -1
            z1, zl = Z(sites, 1), Z(sites, L).scale(QQ_I(sgn, 0))
            out = [mul(P, mul(one + z1, one + zl)), mul(P, mul(one - z1, one - zl))]
    elif mid.name == "example2":
        sites = tuple(range(1, L + 1))
        c = int(s) if s is not None else 1
        if c not in (1, -1):
            raise ModelError("CZ sector must be +1 or -1")
        one = OperatorSum.identity(sites)
        proj = one + _cz_operator(L, bc).scale(QQ_I(c, 0))
        if bc == "pbc":
            out = [proj]
        else:
            z1, zl = Z(sites, 1), Z(sites, L)
            out = [mul(mul(one + a * z1, one + b * zl), proj) for a, b in ((1, 1), (-1, -1), (1, -1), (-1, 1))]
    elif mid.name == "example3":
        sites = tuple(range(1, L + 1))
        c = int(s) if s is not None else 1
        if c not in (1, -1):
            raise ModelError("X sector must be +1 or -1")
        one = OperatorSum.identity(sites)
        proj = one + X(sites, *sites).scale(QQ_I(c, 0))
        if bc == "pbc":
            out = [proj]
        else:
            zz = Z(sites, 1, L)
            out = [mul(one + zz, proj), mul(one - zz, proj)]
    elif mid.name == "cluster_aspt":
        c = int(s) if s is not None else 1
        if c not in (1, -1) or (bc == "pbc" and c != 1):
            raise ModelError("cluster closed forms: K = +1 (periodic) or K = +1, -1 (open)")
        if bc == "pbc":
            out = [cluster_state(L)]
        else:
            # the edge projector on X_L fixes K, so keep the two states of this sector
            sites = tuple(range(1, L + 1))
            K = X(sites, *sites[1::2])
            out = [rho for rho in cluster_obc_states(L) if mul(K, rho) == rho.scale(QQ_I(c, 0))]
    else:
        c = int(s) if s is not None else 1
        if c != 1:
            raise ModelError("closed forms are provided for the even strong sector only")
        lat = mid.lattice()
        out = [ConjugatedState(ccz_entangler(lat), trivial_lattice_state(mid, lat))]
    if verify:
        model = build_model(mid)
        for rho in out:
            if not apply_symbolic_state(model, rho).is_zero():
                raise AssertionError(f"closed form for {mid.name} is not annihilated by the Lindbladian")
    return out


def cluster_obc_states(L: int) -> list[OperatorSum]:
    """Bulk steady states of the open cluster chain with the edge in the stabilizer basis."""
    sites = tuple(range(1, L + 1))
    one = OperatorSum.identity(sites)
    base = one
    for e in range(2, L - 1, 2):
        base = mul(base, (one + X(sites, e)).scale(_HALF))
    U = cz_ring(L, "obc").unitary()
    out = []
    for a, b in ((1, 1), (-1, 1), (1, -1), (-1, -1)):
        edge = mul((one + Z(sites, 1).scale(QQ_I(a, 0))).scale(_HALF),
                   (one + X(sites, L).scale(QQ_I(b, 0))).scale(_HALF))
        out.append(conjugate_operator(U, mul(base, edge)))
    return out


def symmetric_steady(mid: ModelId, sector=None) -> OperatorSum:
    """Weak-symmetric combination (sum) of the closed-form states, for chains."""
    states = closed_form_steady(mid, sector, verify=False)
    if mid.name == "example2" and mid.bc == "obc":
        states = states[2:]
    total = states[0]
    for s in states[1:]:
        total = total + s
    return total


# decorated domain walls

@dataclass
class DDWReport:
    residual: PhasePolyUnitary
    predicted: PhasePolyUnitary
    loop_edges: dict
    charges: dict
    odd_sites: list
    corner_angles: dict
    match: bool
    discrepancies: list

    def to_json(self) -> dict:
        return {
            "match": self.match,
            "odd_sites": self.odd_sites,
            "charges": {str(k): v for k, v in sorted(self.charges.items()) if v},
            "corner_angles": {str(k): v for k, v in sorted(self.corner_angles.items())},
            "loop_edges": {k: [list(e) for e in v] for k, v in self.loop_edges.items()},
            "discrepancies": self.discrepancies,
        }


_CHARGE_SUB = {"KA": ("B", "C"), "KBC": ("A", "B")}


def ddw_residual_check(variant: str, M_regions, lat: Lattice | None = None) -> DDWReport:
    """R = U(CCZ)^-1 V U(CCZ) V^-1 for V the flips on M_regions, against the lattice prediction.

    ``M_regions`` maps sublattice label to the flipped sites of that
    sublattice (or is a plain site set, split by sublattice).  The
    prediction is the CZ string on each dual loop N_X times Z_i^{s_i}, with
    s_i the number of 1-links of i whose two endpoints are both flipped.
    """
    if variant not in _CHARGE_SUB:
        raise ModelError(f"unknown variant {variant!r}")
    lat = lat or build_lattice("triangular", (6, 6), "pbc")
    if not isinstance(M_regions, dict):
        regions: dict = {}
        for s in M_regions:
            regions.setdefault(lat.sublattice[s], set()).add(s)
        M_regions = regions
    allowed = _CHARGE_SUB[variant]
    flipped: set = set()
    for label, sites in M_regions.items():
        sites = set(sites)
        if label not in allowed:
            raise ModelError(f"variant {variant} flips only sublattices {allowed}, got {label}")
        bad = [s for s in sites if s not in lat.sublattice or lat.sublattice[s] != label]
        if bad:
            raise ModelError(f"sites {sorted(bad)} are not {label} sites")
        flipped |= sites
    U = ccz_entangler(lat)
    V = PhasePolyUnitary.flips(flipped)
    R = compose(compose(invert(U), V), compose(U, invert(V)))
    loops = {label: domain_wall_edges(lat, M_regions.get(label, ()), label) for label in allowed}
    charge_sub = next(x for x in "ABC" if x not in allowed)
    charges = {}
    for i in lat.of_sublattice(charge_sub):
        charges[i] = sum(1 for a, b in lat.one_links[i] if a in flipped and b in flipped)
    gates = [PhasePolyUnitary.cz(a, b) for edges in loops.values() for a, b in edges]
    gates += [PhasePolyUnitary.z(i) for i, s in charges.items() if s % 2]
    predicted = compose_all(gates)
    ok, report = canonical_equal(R, predicted)
    odd = sorted(i for i, s in charges.items() if s % 2)
    angles = {}
    for i in lat.of_sublattice(charge_sub):
        nb = [n for n in _hex_ring(lat, i)]
        k = sum(1 for n in nb if n in flipped)
        if 0 < k < len(nb):
            angles[i] = 60 * k if _contiguous([n in flipped for n in nb]) else None
    return DDWReport(R, predicted, loops, charges, odd, angles, ok and R.is_diagonal(), report)


def _hex_ring(lat: Lattice, i: int) -> list[int]:
    x, y = lat.coords[i]
    out = []
    for dx, dy in _HEX:
        t = lat._site_at(x + dx, y + dy)
        if t is not None:
            out.append(t)
    return out


def _contiguous(flags: list[bool]) -> bool:
    changes = sum(1 for a, b in zip(flags, flags[1:] + flags[:1]) if a != b)
    return changes <= 2


def o_identity_check(lat: Lattice) -> dict:
    """U(CCZ) X_i U(CCZ)^-1 == X_i prod CZ(1-links of i) on every vertex."""
    U = ccz_entangler(lat)
    Ui = invert(U)
    bad = []
    for i in lat.sites:
        lhs = compose(compose(U, PhasePolyUnitary.flips([i])), Ui)
        if not canonical_equal(lhs, o_unitary(lat, i))[0]:
            bad.append(i)
    return {"vertices": len(lat.sites), "failures": bad, "pass": not bad}


# edge analysis

def _pauli_vec(x: int, z: int, n_bits: int) -> int:
    return x | (z << n_bits)


def _gf2_solve(gens: list[int], target: int, mask: int) -> list[int] | None:
    """Indices c with target ^ XOR(gens[c]) vanishing on ``mask`` bits."""
    rows = [(g & mask, 1 << i) for i, g in enumerate(gens)]
    basis: dict = {}
    for v, comb in rows:
        while v:
            p = v.bit_length() - 1
            if p not in basis:
                basis[p] = (v, comb)
                break
            bv, bc = basis[p]
            v, comb = v ^ bv, comb ^ bc
    t, comb = target & mask, 0
    while t:
        p = t.bit_length() - 1
        if p not in basis:
            return None
        bv, bc = basis[p]
        t, comb = t ^ bv, comb ^ bc
    return [i for i in range(len(gens)) if (comb >> i) & 1]


def _gf2_rank(vecs: list[int]) -> int:
    basis: dict = {}
    for v in vecs:
        while v:
            p = v.bit_length() - 1
            if p not in basis:
                basis[p] = v
                break
            v ^= basis[p]
    return len(basis)


def _single_word(op: OperatorSum):
    if len(op.terms) != 1:
        raise ModelError("expected a single Pauli word")
    return next(iter(op.terms.items()))


def _split_word(op: OperatorSum, left: set, right: set) -> tuple[OperatorSum, OperatorSum]:
    (x, z), c = _single_word(op)
    lm = sum(1 << s for s in left)
    rm = sum(1 << s for s in right)
    if (x | z) & ~(lm | rm):
        raise ModelError("edge residue leaks into the bulk")
    return (OperatorSum._raw(op.sites, {(x & lm, z & lm): c}),
            OperatorSum._raw(op.sites, {(x & rm, z & rm): QQ_I(1, 0)}))


def _commute_sign(a: OperatorSum, b: OperatorSum) -> int:
    ab, ba = mul(a, b), mul(b, a)
    if ab == ba:
        return 1
    if ab == ba.scale(QQ_I(-1, 0)):
        return -1
    return 0


@dataclass
class EdgeReport:
    model: str
    edge_dimension: int | None = None
    dressed: dict = field(default_factory=dict)
    factors: dict = field(default_factory=dict)
    commutation: dict = field(default_factory=dict)
    edge_sites: list = field(default_factory=list)
    edge_action: dict = field(default_factory=dict)
    indicator: complex | None = None
    checks: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_json(self) -> dict:
        out = {"model": self.model, "edge_dimension": self.edge_dimension,
               "dressed": {k: _fmt_op(v) for k, v in self.dressed.items()},
               "factors": {k: _fmt_op(v) for k, v in self.factors.items()},
               "commutation": self.commutation, "edge_sites": self.edge_sites,
               "edge_action": self.edge_action, "checks": self.checks}
        if self.indicator is not None:
            out["indicator"] = int(round(self.indicator.real))
        return out


def _fmt_op(op: OperatorSum) -> str:
    from .pauli import format_coeff

    return " + ".join(f"({format_coeff(c)}) {format_word(*k)}" for k, c in sorted(op.terms.items())) or "0"


def chain_edge_report(L: int, entangler: PhasePolyUnitary | None = None, name: str = "cluster_aspt") -> EdgeReport:
    """Edge structure of the open even/odd chain dressed by ``entangler`` (default: open CZ chain).

    Bulk constraints are the dressed stabilizers S1 = E X_{2i} E (S1 rho = rho)
    and S2 = E X_{2i+1} E (conjugation-invariant) for 1 <= i <= L/2 - 1.
    """
    if L % 2 or L < 6:
        raise ModelError("edge analysis needs an even open chain with L >= 6")
    sites = tuple(range(1, L + 1))
    E = cz_ring(L, "obc").unitary() if entangler is None else entangler
    cache: dict = {}

    def dress(op):
        return conjugate_operator(E, op, cache)

    s1 = [dress(X(sites, 2 * i)) for i in range(1, L // 2)]
    s2 = [dress(X(sites, 2 * i + 1)) for i in range(1, L // 2)]
    n_bits = max(sites) + 1

    def vec(op):
        (x, z), _ = _single_word(op)
        return _pauli_vec(x, z, n_bits)

    rank = _gf2_rank([vec(s) for s in s1 + s2])
    left, right = {1, 2}, {L - 1, L}
    edge_bits = sum(1 << s for s in left | right)
    bulk_mask = ((1 << n_bits) - 1) & ~edge_bits
    bulk_mask = bulk_mask | (bulk_mask << n_bits)
    UK = X(sites, *[s for s in sites if s % 2 == 0])
    UG = X(sites, *[s for s in sites if s % 2])
    out = EdgeReport(name, edge_dimension=2 ** (L - rank))
    for label, U, gens in (("K", UK, s1), ("G", UG, s1 + s2)):
        sol = _gf2_solve([vec(g) for g in gens], vec(U), bulk_mask)
        if sol is None:
            raise ModelError(f"symmetry {label} does not reduce to the edge")
        S = OperatorSum.identity(sites)
        for i in sol:
            S = mul(S, gens[i])
        Lf, Rf = _split_word(mul(U, S), left, right)
        out.factors[f"L_{label}"] = Lf
        out.factors[f"R_{label}"] = Rf
    for a in ("x", "y", "z"):
        out.dressed[f"tau{a}_1"] = dress(OperatorSum.word(sites, {1: a.upper()}))
        out.dressed[f"sigma{a}_{L}"] = dress(OperatorSum.word(sites, {L: a.upper()}))
    f = out.factors
    out.commutation = {"L_K L_G": _commute_sign(f["L_K"], f["L_G"]),
                       "R_K R_G": _commute_sign(f["R_K"], f["R_G"]),
                       "L_K R_G": _commute_sign(f["L_K"], f["R_G"]),
                       "R_K L_G": _commute_sign(f["R_K"], f["L_G"])}
    preserve = all(_commute_sign(d, s) == 1 for d in out.dressed.values() for s in s1 + s2)
    out.checks = {
        "edge_dimension_4": out.edge_dimension == 4,
        "dressed_preserve_subspace": preserve,
        "stabilizers_commute": all(_commute_sign(a, b) == 1 for a, b in itertools.combinations(s1 + s2, 2)),
    }
    return out


def _cz_product(edges: Iterable[tuple]) -> PhasePolyUnitary:
    return compose_all([PhasePolyUnitary.cz(a, b) for a, b in edges])


def _edge_ring(lat: Lattice) -> list[int]:
    edge_edges = [(a, b) for a, b in lat.edges
                  if "A" not in (lat.sublattice[a], lat.sublattice[b]) and len(lat.edge_triangles(a, b)) == 1]
    return ring_order(edge_edges)


def edge_ring_group(ring: list[int], strong_cz: bool) -> tuple[GroupSpec, Region, tuple[str, str]]:
    """CZ-on-links and X-on-sites group of the edge ring, an arc region and the (weak, strong) pair."""
    n = len(ring)
    ring_edges = [(ring[i], ring[(i + 1) % n]) for i in range(n)]
    cz_lp = LocalProduct(tuple(PhasePolyUnitary.cz(a, b) for a, b in ring_edges))
    group = z2_product_group([("CZ", cz_lp, strong_cz), ("X", flips(ring), not strong_cz)])
    arc = ring[1:n // 2 + 2]
    if len(arc) < 6:
        raise ModelError("edge ring too short for the anomaly region")
    M = Region(tuple(arc), {"left": frozenset(arc[:2]), "right": frozenset(arc[-2:])})
    return group, M, (("X", "CZ") if strong_cz else ("CZ", "X"))


ANOMALY_MIN_L = 10


def anomaly_setup(mid: ModelId) -> tuple[GroupSpec, Region, tuple[str, str]]:
    """Group, restriction region (6 sites, 2-site boundary strips) and indicator pair (weak, strong).

    Chains use the periodic group on at least ANOMALY_MIN_L sites; the 2+1D
    models use the induced action on the edge ring of the open lattice.
    """
    if mid.is_chain:
        L = max(mid.L, ANOMALY_MIN_L)
        group = chain_group(mid.name, L, "pbc")
        j = L // 2 - 2
        pair = {"example1": ("X", "DW"), "example2": ("X", "CZ"), "example3": ("CZ", "X"),
                "cluster_aspt": ("G", "K")}[mid.name]
        return group, Region.interval(j, j + 5), pair
    lat = build_lattice("triangular", (mid.Lx, mid.Ly), "obc")
    return edge_ring_group(_edge_ring(lat), mid.name == "aspt2d_KA")


def onsite_setup(L: int = ANOMALY_MIN_L) -> tuple[GroupSpec, Region, tuple[str, str]]:
    """Decoupled onsite Z2 x Z2 on even/odd sites: the anomaly-free reference."""
    j = L // 2 - 2
    return onsite_group(L), Region.interval(j, j + 5), ("B", "A")


def lattice_edge_report(mid: ModelId) -> EdgeReport:
    """Edge symmetry of the open CCZ models and the anomaly indicator of the induced ring action."""
    lat = mid.lattice()
    if lat.boundary != "obc":
        raise ModelError("edge analysis needs an open lattice")
    U = ccz_entangler(lat)
    Ui = invert(U)
    A = lat.of_sublattice("A")
    BC = lat.of_sublattice("B") + lat.of_sublattice("C")
    VA, VBC = PhasePolyUnitary.flips(A), PhasePolyUnitary.flips(BC)
    DA = compose(compose(Ui, compose(VA, U)), invert(VA))
    DBC = compose(compose(Ui, compose(VBC, U)), invert(VBC))
    edge_edges = [(a, b) for a, b in lat.edges
                  if "A" not in (lat.sublattice[a], lat.sublattice[b]) and len(lat.edge_triangles(a, b)) == 1]
    ring = ring_order(edge_edges)
    cz_edge = _cz_product(edge_edges)
    out = EdgeReport(mid.name, edge_sites=ring)
    out.checks["A_flip_leaves_edge_CZ"] = canonical_equal(DA, cz_edge)[0]
    out.checks["BC_flip_commutes_with_CCZ"] = DBC.is_scalar() and DBC.global_exponent == 0
    out.checks["no_A_on_boundary"] = all(lat.sublattice[s] != "A" for s in lat.boundary_sites)
    out.checks["edge_sites_are_boundary"] = set(ring) <= set(lat.boundary_sites)
    dz = all(canonical_equal(compose(compose(U, PhasePolyUnitary.z(s)), Ui), PhasePolyUnitary.z(s))[0] for s in ring)
    out.checks["dressed_z_bare"] = dz
    strong_cz = mid.name == "aspt2d_KA"
    n = len(ring)
    group, M, (a, b) = edge_ring_group(ring, strong_cz)
    table = anomaly.cocycle(group, M)
    out.indicator = anomaly.indicator(table, a, b)
    out.edge_action = {
        "strong": "CZ string on edge links" if strong_cz else "X on edge sites",
        "weak": "X on edge sites" if strong_cz else "CZ string on edge links",
        "pattern": "example2" if strong_cz else "example3",
        "ring_length": n,
    }
    out.checks["indicator_minus_one"] = abs(out.indicator + 1) < 1e-12
    return out


def edge_report(mid: ModelId) -> EdgeReport:
    if mid.bc != "obc":
        raise ModelError("edge_report needs an open-boundary model")
    if mid.name == "cluster_aspt":
        rep = chain_edge_report(mid.L)
        rep.checks["L_K L_G anticommute"] = rep.commutation["L_K L_G"] == -1
        return rep
    if mid.name.startswith("aspt2d"):
        return lattice_edge_report(mid)
    raise ModelError(f"no edge analysis for {mid.name}")


# boundary identities and defects

def boundary_cz_identity(L: int) -> bool:
    """U_OBC(CZ) X U_OBC(CZ) = (-1)^{L-1} Z_1 Z_L X."""
    U = cz_ring(L, "obc").unitary()
    Xg = PhasePolyUnitary.flips(range(1, L + 1))
    lhs = compose(compose(U, Xg), U)
    rhs = compose_all([PhasePolyUnitary.global_phase(4 * ((L - 1) % 2)), PhasePolyUnitary.z(1, L), Xg])
    return canonical_equal(lhs, rhs)[0]
