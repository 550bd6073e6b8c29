"""Else-Nayak restriction procedure for strong/weak symmetry superoperators.

A group element gamma = k g acts on a density matrix as
``rho -> U(k g) rho U(g)^dagger``; both sides are restricted to a region, the
boundary obstruction is split into its boundary components, and the
associativity defect of the split pieces gives the anomaly cocycle.
"""
from __future__ import annotations

import cmath
import itertools
import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .phasepoly import (LocalProduct, PhasePolyUnitary, Region, compose, conjugate,
                        from_text, invert, restrict, to_text)

GROUP_CAP = 16


class AnomalyError(ValueError):
    pass


class BoundaryLeak(AnomalyError):
    pass


class StraddlingMonomial(AnomalyError):
    pass


class NonScalarResidue(AnomalyError):
    pass


class CocycleViolation(AnomalyError):
    pass


def _as_unitary(u) -> PhasePolyUnitary:
    return u.unitary() if isinstance(u, LocalProduct) else u


@dataclass(frozen=True)
class SymmetrySuperoperator:
    """rho -> left rho right^dagger."""

    left: object
    right: object

    def unitaries(self) -> tuple[PhasePolyUnitary, PhasePolyUnitary]:
        return _as_unitary(self.left), _as_unitary(self.right)

    def compose(self, other: "SymmetrySuperoperator") -> "SymmetrySuperoperator":
        (a, b), (c, d) = self.unitaries(), other.unitaries()
        return SymmetrySuperoperator(compose(a, c), compose(b, d))

    def inverse(self) -> "SymmetrySuperoperator":
        a, b = self.unitaries()
        return SymmetrySuperoperator(invert(a), invert(b))

    def conjugate(self, other: "SymmetrySuperoperator") -> "SymmetrySuperoperator":
        """self o other o self^-1."""
        (a, b), (c, d) = self.unitaries(), other.unitaries()
        return SymmetrySuperoperator(conjugate(a, c), conjugate(b, d))

    def is_scalar(self) -> bool:
        a, b = self.unitaries()
        return a.is_scalar() and b.is_scalar()

    def is_identity(self) -> bool:
        a, b = self.unitaries()
        return not a.x_layer and not a.poly and not b.x_layer and not b.poly


@dataclass
class GroupSpec:
    elements: tuple
    table: Mapping[tuple, str]
    strong: tuple
    weak: tuple
    rep: Mapping[str, SymmetrySuperoperator]
    identity: str = "I"
    factor: dict = field(default_factory=dict, init=False)

    def __post_init__(self):
        self.elements = tuple(self.elements)
        self.strong, self.weak = tuple(self.strong), tuple(self.weak)
        self.validate()

    def mul(self, a: str, b: str) -> str:
        return self.table[(a, b)]

    def inverse(self, a: str) -> str:
        for b in self.elements:
            if self.table[(a, b)] == self.identity:
                return b
        raise AnomalyError(f"{a} has no inverse")

    def weak_part(self, a: str) -> str:
        return self.factor[a][1]

    def strong_part(self, a: str) -> str:
        return self.factor[a][0]

    @property
    def m(self) -> int:
        return _as_unitary(self.rep[self.identity].left).m

    def validate(self) -> None:
        els = self.elements
        e = self.identity
        if e not in els:
            raise AnomalyError("identity label missing")
        for a in els:
            if self.table[(e, a)] != a or self.table[(a, e)] != a:
                raise AnomalyError(f"{e} is not an identity for {a}")
        for a, b, c in itertools.product(els, repeat=3):
            if self.table[(self.table[(a, b)], c)] != self.table[(a, self.table[(b, c)])]:
                raise AnomalyError(f"table not associative at {(a, b, c)}")
        for a in els:
            self.inverse(a)
        for sub in (self.strong, self.weak):
            if e not in sub:
                raise AnomalyError("subgroups must contain the identity")
        factor = {}
        for k in self.strong:
            for g in self.weak:
                prod = self.table[(k, g)]
                if prod in factor:
                    raise AnomalyError(f"{prod} factors twice as k.g")
                factor[prod] = (k, g)
        if set(factor) != set(els):
            raise AnomalyError("elements do not factor uniquely as k.g")
        self.factor = factor

    def check_homomorphism(self) -> list[str]:
        """Pairs whose full-system reps multiply to the product only up to non-scalars."""
        bad = []
        for a, b in itertools.product(self.elements, repeat=2):
            lhs = self.rep[a].compose(self.rep[b])
            rhs = self.rep[self.table[(a, b)]]
            w = lhs.compose(rhs.inverse())
            if not w.is_scalar():
                bad.append(f"{a}*{b}")
        return bad

    def to_json(self) -> str:
        doc = {
            "elements": list(self.elements),
            "identity": self.identity,
            "table": {f"{a},{b}": self.table[(a, b)] for a, b in itertools.product(self.elements, repeat=2)},
            "strong": list(self.strong),
            "weak": list(self.weak),
            "rep": {g: {"left": [to_text(f) for f in _factors(r.left)],
                        "right": [to_text(f) for f in _factors(r.right)]}
                    for g, r in self.rep.items()},
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "GroupSpec":
        doc = json.loads(text)
        table = {tuple(k.split(",")): v for k, v in doc["table"].items()}
        rep = {}
        for g, r in doc["rep"].items():
            left = [from_text(t) for t in r["left"]]
            right = [from_text(t) for t in r["right"]]
            m = left[0].m if left else 3
            rep[g] = SymmetrySuperoperator(LocalProduct(tuple(left), m), LocalProduct(tuple(right), m))
        return cls(doc["elements"], table, doc["strong"], doc["weak"], rep, doc.get("identity", "I"))


def _factors(u) -> list[PhasePolyUnitary]:
    return list(u.factors) if isinstance(u, LocalProduct) else [u]


def z2_product_group(generators: list[tuple[str, LocalProduct, bool]], identity: str = "I") -> GroupSpec:
    """Z2^n with labelled generators; each tuple is (label, operator, is_strong).

    Element labels concatenate generator labels in listing order, e.g. "XDW".
    The left action is the ordered product of all generators present, the
    right action that of the weak ones only.
    """
    n = len(generators)
    m = generators[0][1].m if n else 3
    labels = []
    bits_of = {}
    for bits in itertools.product((0, 1), repeat=n):
        name = "".join(g[0] for g, b in zip(generators, bits) if b) or identity
        labels.append(name)
        bits_of[name] = bits
    table = {}
    by_bits = {v: k for k, v in bits_of.items()}
    for a, b in itertools.product(labels, repeat=2):
        table[(a, b)] = by_bits[tuple(x ^ y for x, y in zip(bits_of[a], bits_of[b]))]
    strong = [l for l in labels if all(not b or g[2] for g, b in zip(generators, bits_of[l]))]
    weak = [l for l in labels if all(not b or not g[2] for g, b in zip(generators, bits_of[l]))]
    rep = {}
    for l in labels:
        left, right = LocalProduct((), m), LocalProduct((), m)
        for g, b in zip(generators, bits_of[l]):
            if b:
                left = left @ g[1]
                if not g[2]:
                    right = right @ g[1]
        rep[l] = SymmetrySuperoperator(left, right)
    return GroupSpec(tuple(labels), table, tuple(strong), tuple(weak), rep, identity)


class RestrictedRep:
    """Caches U_M(gamma) on both sides for a fixed region."""

    def __init__(self, group: GroupSpec, M: Region):
        self.group, self.M = group, M
        self.ops = {}
        for g in group.elements:
            r = group.rep[g]
            self.ops[g] = SymmetrySuperoperator(_as_unitary(restrict(r.left, M)),
                                                _as_unitary(restrict(r.right, M)))


def _check_support(W: SymmetrySuperoperator, M: Region) -> None:
    allowed = frozenset().union(*M.boundary_components.values()) if M.boundary_components else frozenset()
    for u in W.unitaries():
        leak = u.support() - allowed
        if leak:
            raise BoundaryLeak(f"obstruction acts on {sorted(leak)} outside the boundary components; "
                               "region too small for the operator range")


def boundary_obstruction(g1: str, g2: str, group: GroupSpec, M: Region,
                         _cache: RestrictedRep | None = None) -> SymmetrySuperoperator:
    rr = _cache or RestrictedRep(group, M)
    u1, u2, u12 = rr.ops[g1], rr.ops[g2], rr.ops[group.mul(g1, g2)]
    W = u1.compose(u2).compose(u12.inverse())
    _check_support(W, M)
    return W


def _split_unitary(u: PhasePolyUnitary, M: Region) -> dict[str, PhasePolyUnitary]:
    labels = list(M.boundary_components)
    xs = {l: set() for l in labels}
    polys: dict[str, dict] = {l: {} for l in labels}
    for s in u.x_layer:
        l = M.component_of([s])
        if l is None:
            raise StraddlingMonomial(f"X on site {s} lies in no boundary component")
        xs[l].add(s)
    for mono, c in u.poly.items():
        if not mono:
            polys[labels[0]][mono] = c
            continue
        l = M.component_of(mono)
        if l is None:
            raise StraddlingMonomial(f"monomial {sorted(mono)} straddles boundary components")
        polys[l][mono] = c
    return {l: PhasePolyUnitary(frozenset(xs[l]), polys[l], u.m) for l in labels}


def split_components(W: SymmetrySuperoperator, M: Region) -> dict[str, SymmetrySuperoperator]:
    a, b = W.unitaries()
    sa, sb = _split_unitary(a, M), _split_unitary(b, M)
    return {l: SymmetrySuperoperator(sa[l], sb[l]) for l in M.boundary_components}


def split_boundary(W: SymmetrySuperoperator, M: Region) -> tuple[SymmetrySuperoperator, SymmetrySuperoperator]:
    """(W_l, W_r): the first boundary component (with the global phase) and the product of the rest."""
    parts = split_components(W, M)
    labels = list(M.boundary_components)
    first = parts[labels[0]]
    rest = None
    for l in labels[1:]:
        rest = parts[l] if rest is None else rest.compose(parts[l])
    if rest is None:
        m = first.unitaries()[0].m
        rest = SymmetrySuperoperator(PhasePolyUnitary.identity(m), PhasePolyUnitary.identity(m))
    return first, rest


@dataclass
class CocycleTable:
    group: GroupSpec
    values: dict
    m: int
    region: Region | None = None

    @property
    def modulus(self) -> int:
        return 1 << self.m

    def __getitem__(self, key: tuple) -> int:
        return self.values[key]

    def phase(self, key: tuple) -> complex:
        return _phase(self.values[key], self.modulus)

    def violations(self) -> list[tuple]:
        return cocycle_violations(self.values, self.group, self.modulus)

    def to_json(self) -> str:
        return json.dumps({"m": self.m, "values": {",".join(k): v for k, v in sorted(self.values.items())}},
                          sort_keys=True)


def _phase(exponent: int, mod: int) -> complex:
    exponent %= mod
    if (4 * exponent) % mod == 0:
        return (1, 1j, -1, -1j)[(4 * exponent) // mod]
    return cmath.exp(2j * cmath.pi * exponent / mod)


def cocycle_violations(values: Mapping, group: GroupSpec, mod: int) -> list[tuple]:
    """Quadruples violating w(g2,g3,g4) w(g1,g2g3,g4) w(g1,g2,g3) = w(g1g2,g3,g4) w(g1,g2,g3g4)."""
    mul = group.mul
    bad = []
    for g1, g2, g3, g4 in itertools.product(group.elements, repeat=4):
        lhs = values[(g2, g3, g4)] + values[(g1, mul(g2, g3), g4)] + values[(g1, g2, g3)]
        rhs = values[(mul(g1, g2), g3, g4)] + values[(g1, g2, mul(g3, g4))]
        if (lhs - rhs) % mod:
            bad.append((g1, g2, g3, g4))
    return bad


def cocycle(group: GroupSpec, M: Region, check: bool = True) -> CocycleTable:
    rr = RestrictedRep(group, M)
    els = group.elements
    Wl = {}
    for g1, g2 in itertools.product(els, repeat=2):
        W = boundary_obstruction(g1, g2, group, M, rr)
        Wl[(g1, g2)] = split_boundary(W, M)[0]
    mul = group.mul
    values = {}
    for g1, g2, g3 in itertools.product(els, repeat=3):
        lhs = Wl[(g1, g2)].compose(Wl[(mul(g1, g2), g3)])
        rhs = rr.ops[g1].conjugate(Wl[(g2, g3)]).compose(Wl[(g1, mul(g2, g3))])
        omega = lhs.compose(rhs.inverse())
        if not omega.is_scalar():
            raise NonScalarResidue(f"Omega{(g1, g2, g3)} is not a scalar")
        a, b = omega.unitaries()
        values[(g1, g2, g3)] = (a.global_exponent - b.global_exponent) % a.modulus
    table = CocycleTable(group, values, group.m, M)
    if check:
        bad = table.violations()
        if bad:
            raise CocycleViolation(f"3-cocycle identity fails on {len(bad)} quadruples, e.g. {bad[0]}")
    return table


def indicator_exponent(table: CocycleTable, a: str, b: str) -> int:
    g = table.group
    e = g.identity
    if g.mul(a, a) != e or g.mul(b, b) != e or g.mul(a, b) != g.mul(b, a) or a == e or b == e or a == b:
        raise AnomalyError(f"({a}, {b}) do not generate a Z2 x Z2 subgroup")
    ab = g.mul(a, b)
    v = table.values
    return (v[(a, b, b)] + v[(ab, a, b)] + v[(ab, ab, a)] + v[(a, e, a)]) % table.modulus


def indicator(table: CocycleTable, a: str, b: str) -> complex:
    """w(a,b,b) w(ab,a,b) w(ab,ab,a) w(a,e,a)."""
    return _phase(indicator_exponent(table, a, b), table.modulus)


def coboundary(beta: Mapping, group: GroupSpec, mod: int, on=None) -> dict:
    """d beta(g1,g2,g3) = b(g1,g2) + b(g1g2,g3) - b(g2,g3) - b(g1,g2g3) as exponents.

    ``on`` maps group elements before evaluating beta (used for beta' on G).
    """
    f = on or (lambda x: x)
    mul = group.mul
    out = {}
    for g1, g2, g3 in itertools.product(group.elements, repeat=3):
        h1, h2, h3 = f(g1), f(g2), f(g3)
        h12 = f(mul(g1, g2))
        h23 = f(mul(g2, g3))
        out[(g1, g2, g3)] = (beta[(h1, h2)] + beta[(h12, h3)] - beta[(h2, h3)] - beta[(h1, h23)]) % mod
    return out


def shift_by_coboundary(table: CocycleTable, beta: Mapping, beta_weak: Mapping) -> CocycleTable:
    """Omega . d beta . (d beta')^-1 with beta' evaluated on the weak parts."""
    mod = table.modulus
    g = table.group
    db = coboundary(beta, g, mod)
    dbw = coboundary(beta_weak, g, mod, on=g.weak_part)
    vals = {k: (v + db[k] - dbw[k]) % mod for k, v in table.values.items()}
    return CocycleTable(g, vals, table.m, table.region)


def random_cochains(group: GroupSpec, mod: int, rng: np.random.Generator) -> tuple[dict, dict]:
    beta = {(a, b): int(rng.integers(mod)) for a, b in itertools.product(group.elements, repeat=2)}
    beta_w = {(a, b): int(rng.integers(mod)) for a, b in itertools.product(group.weak, repeat=2)}
    return beta, beta_w


def solve_mod_power_of_two(A: np.ndarray, t: np.ndarray, m: int) -> np.ndarray | None:
    """Solve A x = t over Z/2^m, or return None.

    Elimination with full pivoting on the entry of least 2-adic valuation,
    which over this local ring reduces A to the diagonal of its Smith form.
    """
    mod = 1 << m
    A = np.array(A, dtype=np.int64) % mod
    t = np.array(t, dtype=np.int64) % mod
    rows, cols = A.shape
    colperm = list(range(cols))
    pivots = []  # (row, valuation, unit inverse)
    r = 0
    for _ in range(min(rows, cols)):
        sub = A[r:, r:]
        if not sub.any():
            break
        val = _valuation(sub, m)
        i, j = np.unravel_index(np.argmin(val), val.shape)
        v = int(val[i, j])
        i += r
        j += r
        A[[r, i]] = A[[i, r]]
        t[[r, i]] = t[[i, r]]
        A[:, [r, j]] = A[:, [j, r]]
        colperm[r], colperm[j] = colperm[j], colperm[r]
        p = int(A[r, r])
        unit = p >> v
        uinv = pow(unit, -1, mod)
        below = A[r + 1:, r]
        nz = np.nonzero(below)[0]
        if nz.size:
            f = ((below[nz] >> v) * uinv) % mod
            A[r + 1 + nz] = (A[r + 1 + nz] - f[:, None] * A[r]) % mod
            t[r + 1 + nz] = (t[r + 1 + nz] - f * t[r]) % mod
        pivots.append((v, uinv))
        r += 1
    if np.any(t[r:] % mod):
        return None
    y = np.zeros(cols, dtype=np.int64)
    for i in range(r - 1, -1, -1):
        v, uinv = pivots[i]
        rhs = (t[i] - int(A[i, i + 1:] @ y[i + 1:] % mod)) % mod
        if rhs % (1 << v):
            return None
        y[i] = ((rhs >> v) * uinv) % mod
    x = np.zeros(cols, dtype=np.int64)
    for pos, c in enumerate(colperm):
        x[c] = y[pos]
    return x


def _valuation(a: np.ndarray, m: int) -> np.ndarray:
    val = np.full(a.shape, m + 1, dtype=np.int64)
    rem = a.copy()
    nz = rem != 0
    val[nz] = 0
    for k in range(m):
        even = nz & (rem % 2 == 0)
        val[even] += 1
        rem = np.where(even, rem // 2, rem)
        nz = even
    return val


def is_trivial_class(table: CocycleTable, cap: int = GROUP_CAP) -> tuple[bool, dict | None]:
    """Is Omega = d beta . (d beta')^-1 for cochains beta on Gamma, beta' on G?

    Returns the witness {"beta": ..., "beta_weak": ...} when trivial.
    """
    g = table.group
    if len(g.elements) > cap:
        raise AnomalyError(f"group of order {len(g.elements)} exceeds cap {cap}")
    mod = table.modulus
    pairs = list(itertools.product(g.elements, repeat=2))
    wpairs = list(itertools.product(g.weak, repeat=2))
    col = {p: i for i, p in enumerate(pairs)}
    wcol = {p: len(pairs) + i for i, p in enumerate(wpairs)}
    triples = list(itertools.product(g.elements, repeat=3))
    A = np.zeros((len(triples), len(pairs) + len(wpairs)), dtype=np.int64)
    mul, wp = g.mul, g.weak_part
    for r, (g1, g2, g3) in enumerate(triples):
        for key, s in (((g1, g2), 1), ((mul(g1, g2), g3), 1), ((g2, g3), -1), ((g1, mul(g2, g3)), -1)):
            A[r, col[key]] += s
        h1, h2, h3 = wp(g1), wp(g2), wp(g3)
        for key, s in (((h1, h2), 1), ((wp(mul(g1, g2)), h3), 1), ((h2, h3), -1), ((h1, wp(mul(g2, g3))), -1)):
            A[r, wcol[key]] -= s
    t = np.array([table.values[k] for k in triples], dtype=np.int64)
    x = solve_mod_power_of_two(A, t, table.m)
    if x is None:
        return False, None
    beta = {p: int(x[col[p]]) for p in pairs}
    beta_w = {p: int(x[wcol[p]]) for p in wpairs}
    # the witness must reproduce the table exactly
    zero = CocycleTable(g, {k: 0 for k in triples}, table.m)
    rebuilt = shift_by_coboundary(zero, beta, beta_w)
    if rebuilt.values != {k: v % mod for k, v in table.values.items()}:
        raise AnomalyError("internal: witness does not reproduce the table")
    return True, {"beta": beta, "beta_weak": beta_w}


@dataclass
class DefectReport:
    delta_q: object
    per_defect: object
    q_before: object
    q_after: object


def defect_charge_check(model_id: str = "example1", L: int = 8, string: Iterable[int] | None = None,
                        repeat: int = 1) -> DefectReport:
    """Change of the strong charge Q when a weak-symmetry string S dresses the SSB state.

    ``string`` lists the flipped sites (default a block in the middle of the
    chain); ``repeat`` applies S that many times.
    """
    from . import models
    from .observables import expectation
    from .pauli import OperatorSum, QQ_I, X, mul, product

    if model_id != "example1":
        raise AnomalyError("defect check is defined for the U(1) x Z2 chain (example1)")
    sites = tuple(range(1, L + 1))
    rho = models.closed_form_steady(models.ModelId("example1", L=L, bc="pbc"), sector=0)[0]
    Q = models.domain_wall_charge(sites, pbc=True)
    string = list(range(L // 2 - 1, L // 2 + 2)) if string is None else list(string)
    S = X(sites, *string) if string else OperatorSum.identity(sites)
    Sn = product([S] * repeat, sites) if repeat else OperatorSum.identity(sites)
    rho2 = mul(mul(Sn, rho), Sn.dagger())
    q0, q1 = expectation(rho, Q), expectation(rho2, Q)
    dq = q1 - q0
    return DefectReport(dq, dq / QQ_I(2, 0), q0, q1)
