"""Diagonal phase polynomials dressed by an X-flip layer.

A ``PhasePolyUnitary`` is ``X_a exp(2 pi i / 2^m * sum_S c_S prod_{i in S} n_i)``
with occupation variables ``n_i = (1 - Z_i)/2``.  Pushing ``X_a`` through the
diagonal substitutes ``n_i -> 1 - n_i`` for ``i`` in ``a``.

Symmetries built from local gates are kept as a ``LocalProduct`` so that
restriction to a region can drop whole gates rather than single monomials.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Mapping

import numpy as np

from .pauli import OperatorSum, QQ_I, SizeCapError, _UNITS, _bits, _popcount

EXPANSION_CAP = 16
DEFAULT_M = 3


def _canon(poly: Mapping[frozenset, int], mod: int) -> dict[frozenset, int]:
    out = {}
    for k, v in poly.items():
        v %= mod
        if v:
            out[frozenset(k)] = v
    return out


def _add_into(acc: dict, mono: frozenset, val: int) -> None:
    acc[mono] = acc.get(mono, 0) + val


def substitute_flips(poly: Mapping[frozenset, int], flips: frozenset, mod: int) -> dict[frozenset, int]:
    """Apply n_i -> 1 - n_i for i in ``flips`` (inclusion-exclusion)."""
    acc: dict[frozenset, int] = {}
    for mono, c in poly.items():
        hit = mono & flips
        if not hit:
            _add_into(acc, mono, c)
            continue
        rest = mono - hit
        hit = sorted(hit)
        for r in range(len(hit) + 1):
            sign = -1 if r % 2 else 1
            for sub in combinations(hit, r):
                _add_into(acc, rest | frozenset(sub), sign * c)
    return _canon(acc, mod)


@dataclass(frozen=True)
class PhasePolyUnitary:
    x_layer: frozenset = frozenset()
    poly: Mapping[frozenset, int] = field(default_factory=dict)
    m: int = DEFAULT_M

    def __post_init__(self):
        object.__setattr__(self, "x_layer", frozenset(self.x_layer))
        object.__setattr__(self, "poly", _canon(self.poly, self.modulus))

    @property
    def modulus(self) -> int:
        return 1 << self.m

    # constructors
    @classmethod
    def identity(cls, m: int = DEFAULT_M) -> "PhasePolyUnitary":
        return cls(frozenset(), {}, m)

    @classmethod
    def flips(cls, sites: Iterable[int], m: int = DEFAULT_M) -> "PhasePolyUnitary":
        return cls(frozenset(sites), {}, m)

    @classmethod
    def z(cls, *sites: int, m: int = DEFAULT_M) -> "PhasePolyUnitary":
        half = 1 << (m - 1)
        return cls(frozenset(), {frozenset([s]): half for s in sites}, m)

    @classmethod
    def cz(cls, i: int, j: int, m: int = DEFAULT_M) -> "PhasePolyUnitary":
        return cls(frozenset(), {frozenset([i, j]): 1 << (m - 1)}, m)

    @classmethod
    def ccz(cls, i: int, j: int, k: int, m: int = DEFAULT_M) -> "PhasePolyUnitary":
        return cls(frozenset(), {frozenset([i, j, k]): 1 << (m - 1)}, m)

    @classmethod
    def global_phase(cls, k: int, m: int = DEFAULT_M) -> "PhasePolyUnitary":
        return cls(frozenset(), {frozenset(): k}, m)

    @classmethod
    def zz_quarter(cls, i: int, j: int, m: int = DEFAULT_M) -> "PhasePolyUnitary":
        """exp[i pi/4 (1 - Z_i Z_j)], one bond of exp(i pi Q)."""
        if m < 3:
            raise ValueError("needs phase unit pi/4 or finer")
        q = 1 << (m - 2)
        return cls(frozenset(), {frozenset([i]): q, frozenset([j]): q, frozenset([i, j]): -2 * q}, m)

    @classmethod
    def from_pauli_word(cls, x: int, z: int, m: int = DEFAULT_M) -> "PhasePolyUnitary":
        """The Hermitian word i^{|x&z|} X^x Z^z."""
        if m < 2:
            raise ValueError("Y needs phase unit pi/2 or finer")
        half = 1 << (m - 1)
        poly = {frozenset([s]): half for s in _bits(z)}
        ny = _popcount(x & z)
        if ny:
            poly[frozenset()] = ny * (1 << (m - 2))
        return cls(frozenset(_bits(x)), poly, m)

    # structure
    @property
    def global_exponent(self) -> int:
        return self.poly.get(frozenset(), 0)

    def support(self) -> frozenset:
        s = set(self.x_layer)
        for mono in self.poly:
            s |= mono
        return frozenset(s)

    def degree(self) -> int:
        return max((len(k) for k in self.poly), default=0)

    def is_diagonal(self) -> bool:
        return not self.x_layer

    def is_scalar(self) -> bool:
        return not self.x_layer and all(len(k) == 0 for k in self.poly)

    def __matmul__(self, other: "PhasePolyUnitary") -> "PhasePolyUnitary":
        return compose(self, other)

    def __str__(self) -> str:
        return to_text(self)

    def __hash__(self) -> int:
        return hash((self.x_layer, frozenset(self.poly.items()), self.m))

    def __eq__(self, other) -> bool:
        if not isinstance(other, PhasePolyUnitary):
            return NotImplemented
        return (self.x_layer, self.poly, self.m) == (other.x_layer, other.poly, other.m)


def compose(u: PhasePolyUnitary, v: PhasePolyUnitary) -> PhasePolyUnitary:
    """Canonical form of the operator product u v."""
    if u.m != v.m:
        raise ValueError(f"modulus mismatch: m={u.m} vs m={v.m}")
    # X_a D_p X_b D_q = X_{a^b} (X_b D_p X_b) D_q
    moved = substitute_flips(u.poly, v.x_layer, u.modulus) if v.x_layer else dict(u.poly)
    for mono, c in v.poly.items():
        _add_into(moved, mono, c)
    return PhasePolyUnitary(u.x_layer ^ v.x_layer, moved, u.m)


def compose_all(us: Iterable[PhasePolyUnitary], m: int = DEFAULT_M) -> PhasePolyUnitary:
    out = PhasePolyUnitary.identity(m)
    for u in us:
        out = compose(out, u)
    return out


def invert(u: PhasePolyUnitary) -> PhasePolyUnitary:
    # (X_a D_p)^-1 = D_{-p} X_a = X_a D_{-p o flip_a}
    neg = {k: -c for k, c in u.poly.items()}
    if u.x_layer:
        neg = substitute_flips(neg, u.x_layer, u.modulus)
    return PhasePolyUnitary(u.x_layer, neg, u.m)


def conjugate(u: PhasePolyUnitary, v: PhasePolyUnitary) -> PhasePolyUnitary:
    """u v u^-1."""
    return compose(compose(u, v), invert(u))


def power(u: PhasePolyUnitary, n: int) -> PhasePolyUnitary:
    out = PhasePolyUnitary.identity(u.m)
    base = u if n >= 0 else invert(u)
    for _ in range(abs(n)):
        out = compose(out, base)
    return out


@dataclass(frozen=True)
class Region:
    """Ordered site set with labelled boundary components."""

    sites: tuple
    boundary_components: Mapping[str, frozenset] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "sites", tuple(self.sites))
        comps = {k: frozenset(v) for k, v in self.boundary_components.items()}
        labels = list(comps)
        for a, b in combinations(labels, 2):
            if comps[a] & comps[b]:
                raise ValueError(f"boundary components {a} and {b} overlap")
        object.__setattr__(self, "boundary_components", comps)

    @property
    def site_set(self) -> frozenset:
        return frozenset(self.sites)

    def component_of(self, sites: Iterable[int]) -> str | None:
        """Label of the single component containing all ``sites``; None if none or several."""
        sites = frozenset(sites)
        for label, comp in self.boundary_components.items():
            if sites <= comp:
                return label
        return None

    @classmethod
    def interval(cls, j: int, k: int, width: int = 2) -> "Region":
        """Chain segment [j, k] with left/right boundary strips of ``width`` sites."""
        if k - j + 1 < 2 * width:
            raise ValueError("interval too short for two disjoint boundary strips")
        return cls(tuple(range(j, k + 1)), {
            "left": frozenset(range(j, j + width)),
            "right": frozenset(range(k - width + 1, k + 1)),
        })


@dataclass(frozen=True)
class LocalProduct:
    """Ordered product of local PhasePolyUnitary gates; restriction keeps whole gates."""

    factors: tuple = ()
    m: int = DEFAULT_M

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))

    def unitary(self) -> PhasePolyUnitary:
        return compose_all(self.factors, self.m)

    def __matmul__(self, other: "LocalProduct") -> "LocalProduct":
        return LocalProduct(self.factors + other.factors, self.m)

    def support(self) -> frozenset:
        s: set = set()
        for f in self.factors:
            s |= f.support()
        return frozenset(s)


def restrict(u, M: Region | Iterable[int]):
    """Truncate to region M.

    For a PhasePolyUnitary keep X sites in M and monomials inside M.  For a
    LocalProduct keep the gates whose support lies inside M (X layers are
    truncated site by site).
    """
    sites = M.site_set if isinstance(M, Region) else frozenset(M)
    if isinstance(u, LocalProduct):
        kept = []
        for f in u.factors:
            if f.support() <= sites:
                kept.append(f)
            elif f.is_diagonal():
                continue
            else:
                kept.append(restrict(f, sites))
        return LocalProduct(tuple(kept), u.m)
    return PhasePolyUnitary(u.x_layer & sites,
                            {k: c for k, c in u.poly.items() if k <= sites}, u.m)


def canonical_equal(u: PhasePolyUnitary, v: PhasePolyUnitary) -> tuple[bool, list[str]]:
    if u.m != v.m:
        raise ValueError(f"modulus mismatch: m={u.m} vs m={v.m}")
    report = []
    if u.x_layer != v.x_layer:
        report.append(f"x_layer differs on sites {sorted(u.x_layer ^ v.x_layer)}")
    for mono in sorted(set(u.poly) | set(v.poly), key=lambda s: (len(s), sorted(s))):
        a, b = u.poly.get(mono, 0), v.poly.get(mono, 0)
        if a != b:
            report.append(f"monomial {_fmt_mono(mono)}: {a} vs {b}")
    return not report, report


def _fwht(a: np.ndarray) -> np.ndarray:
    a = a.copy()
    h = 1
    n = a.shape[0]
    while h < n:
        a = a.reshape(-1, 2, h)
        a = np.concatenate([a[:, 0] + a[:, 1], a[:, 0] - a[:, 1]], axis=1)
        a = a.reshape(n)
        h *= 2
    return a


def diagonal_values(u: PhasePolyUnitary, support: list[int]) -> np.ndarray:
    """Phase exponents f(b) mod 2^m for every occupation pattern b of ``support``.

    Bit j of the pattern index is the occupation of ``support[j]``.
    """
    k = len(support)
    pos = {s: j for j, s in enumerate(support)}
    idx = np.arange(1 << k, dtype=np.int64)
    f = np.zeros(1 << k, dtype=np.int64)
    for mono, c in u.poly.items():
        mask = 0
        for s in mono:
            mask |= 1 << pos[s]
        f += c * ((idx & mask) == mask)
    return f % u.modulus


def to_operator_sum(u: PhasePolyUnitary, sites: Iterable[int], cap: int | None = None) -> OperatorSum:
    """Exact Pauli expansion.  Needs all diagonal phases to be powers of i."""
    cap = EXPANSION_CAP if cap is None else cap
    sites = tuple(sorted(set(sites)))
    support = sorted(set().union(*u.poly.keys()) if u.poly else set())
    if len(support) > cap:
        raise SizeCapError(f"diagonal support {len(support)} exceeds expansion cap {cap}")
    if not u.support() <= set(sites):
        raise ValueError(f"unitary support {sorted(u.support())} outside sites")
    f = diagonal_values(u, support)
    step = u.modulus // 4 if u.m >= 2 else None
    if step is None or np.any(f % step):
        raise ValueError("diagonal phases are not powers of i; no Gaussian-rational expansion")
    g = (f // step) % 4
    re_ = (g == 0).astype(np.int64) - (g == 2)
    im_ = (g == 1).astype(np.int64) - (g == 3)
    re_w, im_w = _fwht(re_), _fwht(im_)
    denom = 1 << len(support)
    xmask = 0
    for s in u.x_layer:
        xmask |= 1 << s
    terms = {}
    for zl in np.nonzero((re_w != 0) | (im_w != 0))[0]:
        zmask = 0
        for j, s in enumerate(support):
            if (int(zl) >> j) & 1:
                zmask |= 1 << s
        c = QQ_I(int(re_w[zl]), int(im_w[zl])) / QQ_I(denom, 0)
        # X^a Z^z = i^{-|a&z|} P(a, z)
        c = c * _UNITS[(-_popcount(xmask & zmask)) % 4]
        terms[(xmask, zmask)] = c
    return OperatorSum(sites, terms)


def conjugate_operator(u: PhasePolyUnitary, op: OperatorSum, cache: dict | None = None) -> OperatorSum:
    """u op u^dagger word by word; each conjugated word expands only over its local residue."""
    cache = {} if cache is None else cache
    uinv = invert(u)
    out = OperatorSum.zero(op.sites)
    acc: dict = {}
    for (x, z), c in op.terms.items():
        key = (x, z)
        if key not in cache:
            w = PhasePolyUnitary.from_pauli_word(x, z, u.m)
            cache[key] = to_operator_sum(compose(compose(u, w), uinv), op.sites)
        for k, v in cache[key].terms.items():
            acc[k] = acc.get(k, QQ_I(0, 0)) + c * v
    return OperatorSum._raw(out.sites, acc)


def _fmt_mono(mono: frozenset) -> str:
    return "{" + ",".join(str(s) for s in sorted(mono)) + "}"


def to_text(u: PhasePolyUnitary) -> str:
    xs = "X{" + ",".join(str(s) for s in sorted(u.x_layer)) + "}"
    terms = " ".join(f"{_fmt_mono(k)}:{c}" for k, c in sorted(u.poly.items(), key=lambda kv: (len(kv[0]), sorted(kv[0]))))
    return f"{xs} ; P: {terms} ; m={u.m}".replace("P:  ;", "P: ;")


_MONO_RE = re.compile(r"\{([\d,\s]*)\}:(-?\d+)")


def from_text(text: str) -> PhasePolyUnitary:
    parts = [p.strip() for p in text.split(";")]
    if len(parts) != 3 or not parts[0].startswith("X{") or not parts[1].startswith("P:") or not parts[2].startswith("m="):
        raise ValueError(f"bad phase-poly text {text!r}")
    inner = parts[0][2:-1].strip()
    xs = frozenset(int(t) for t in inner.split(",") if t.strip())
    m = int(parts[2][2:])
    poly: dict[frozenset, int] = {}
    for sites_txt, c in _MONO_RE.findall(parts[1]):
        mono = frozenset(int(t) for t in sites_txt.split(",") if t.strip())
        poly[mono] = poly.get(mono, 0) + int(c)
    return PhasePolyUnitary(xs, poly, m)
