"""Expectation values and correlators on exact OperatorSum states.

All values are exact Gaussian rationals (sympy QQ_I elements); use
``as_complex`` for floats.
"""
from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass
from typing import Iterable, TextIO

from .pauli import QQ_I, OperatorSum, X, Z, coeff, coeff_to_complex, format_coeff, mul

_ZERO = QQ_I(0, 0)


class ObservableError(ValueError):
    pass


def as_complex(value) -> complex:
    return coeff_to_complex(value)


def trace_product(a: OperatorSum, b: OperatorSum):
    """Exact Tr(ab).  Every Pauli word squares to the identity."""
    a._check(b)
    small, big = (a, b) if len(a.terms) <= len(b.terms) else (b, a)
    tot = _ZERO
    for k, v in small.terms.items():
        w = big.terms.get(k)
        if w is not None:
            tot += v * w
    return tot * QQ_I(2 ** len(a.sites), 0)


@dataclass(frozen=True)
class CorrelatorReport:
    value: object
    connected: object
    normalization: object

    def as_complex(self) -> tuple[complex, complex]:
        return as_complex(self.value), as_complex(self.connected)

    def to_dict(self) -> dict:
        return {"value": format_coeff(self.value), "connected": format_coeff(self.connected),
                "normalization": format_coeff(self.normalization)}


def _homed(op: OperatorSum, sites) -> OperatorSum:
    return op if op.sites == sites else op.with_sites(sites)


def expectation(rho: OperatorSum, O: OperatorSum):
    """Tr(O rho) / Tr(rho)."""
    tr = rho.trace()
    if tr == _ZERO:
        raise ObservableError("state has zero trace")
    return trace_product(_homed(O, rho.sites), rho) / tr


def connected_correlator(rho: OperatorSum, A: OperatorSum, B: OperatorSum) -> CorrelatorReport:
    A, B = _homed(A, rho.sites), _homed(B, rho.sites)
    ab = expectation(rho, mul(A, B))
    return CorrelatorReport(ab, ab - expectation(rho, A) * expectation(rho, B), rho.trace())


def renyi2_correlator(rho: OperatorSum, Ol: OperatorSum, Or: OperatorSum,
                      Ol2: OperatorSum, Or2: OperatorSum) -> CorrelatorReport:
    """Tr(rho Ol Or rho Ol2 Or2)/Tr(rho^2) and its connected part."""
    Ol, Or, Ol2, Or2 = (_homed(o, rho.sites) for o in (Ol, Or, Ol2, Or2))
    purity = trace_product(rho, rho)
    if purity == _ZERO:
        raise ObservableError("state has zero purity")

    def r2(a: OperatorSum, b: OperatorSum):
        return trace_product(mul(rho, a), mul(rho, b)) / purity

    value = r2(mul(Ol, Or), mul(Ol2, Or2))
    return CorrelatorReport(value, value - r2(Ol, Ol2) * r2(Or, Or2), purity)


def string_operator(sites, j: int, k: int, endpoints: bool = True) -> OperatorSum:
    """tau^z_{2j-1} (prod_{i=j..k} sigma^x_{2i}) tau^z_{2k+1} on a chain with odd tau and even sigma sites."""
    sites = tuple(sites)
    if not 1 <= j <= k:
        raise ObservableError(f"need 1 <= j <= k, got j={j}, k={k}")
    if 2 * j - 1 not in sites or 2 * k + 1 not in sites:
        raise ObservableError(f"string ({j}, {k}) runs off the chain {sites[0]}..{sites[-1]}")
    op = X(sites, *(2 * i for i in range(j, k + 1)))
    if endpoints:
        op = mul(mul(Z(sites, 2 * j - 1), op), Z(sites, 2 * k + 1))
    return op


def string_order(rho: OperatorSum, j: int, k: int, endpoints: bool = True):
    return expectation(rho, string_operator(rho.sites, j, k, endpoints))


def boundary_renyi2(rho: OperatorSum, group, region) -> tuple[tuple[str, str, str, str], CorrelatorReport]:
    """Largest connected Renyi-2 boundary correlator over pairs of group elements.

    For each pair (g1, g2) the boundary obstruction W(g1, g2) of the group
    restricted to ``region`` splits into W_l, W_r; Ol, Or are their left
    unitaries and Ol2, Or2 the adjoints of their right unitaries.  Returns
    the pair (strong, weak labels included) with the largest |connected|.
    """
    from .anomaly import RestrictedRep, boundary_obstruction, split_boundary
    from .phasepoly import to_operator_sum

    rr = RestrictedRep(group, region)
    best, best_key = None, None
    for g1, g2 in itertools.product(group.elements, repeat=2):
        W = boundary_obstruction(g1, g2, group, region, rr)
        if W.is_scalar():
            continue
        wl, wr = split_boundary(W, region)
        try:
            (al, bl), (ar, br) = wl.unitaries(), wr.unitaries()
            ops = [to_operator_sum(u, rho.sites) for u in (al, ar, bl, br)]
        except ValueError:
            continue
        rep = renyi2_correlator(rho, ops[0], ops[1], ops[2].dagger(), ops[3].dagger())
        if best is None or abs(as_complex(rep.connected)) > abs(as_complex(best.connected)) + 1e-12:
            best, best_key = rep, (g1, g2, group.weak_part(g1), group.weak_part(g2))
    if best is None:
        raise ObservableError("no non-scalar boundary obstruction in this group")
    return best_key, best


def pure_state(vec, sites) -> OperatorSum:
    """|psi><psi| as an OperatorSum (numeric coefficients)."""
    import numpy as np

    from .pauli import from_dense
    v = np.asarray(vec, dtype=complex).reshape(-1, 1)
    return from_dense(v @ v.conj().T, sites)


def write_csv(rows: Iterable[tuple], out: TextIO | None = None) -> str:
    """One row per (observable, value, connected, sector); returns the text."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["observable", "value", "connected", "sector"])
    for name, value, connected, sector in rows:
        w.writerow([name, format_coeff(coeff(value)) if value is not None else "",
                    format_coeff(coeff(connected)) if connected is not None else "", sector])
    text = buf.getvalue()
    if out is not None:
        out.write(text)
    return text


__all__ = ["CorrelatorReport", "ObservableError", "as_complex", "trace_product", "expectation",
           "connected_correlator", "renyi2_correlator", "string_operator", "string_order",
           "boundary_renyi2", "pure_state", "write_csv"]
