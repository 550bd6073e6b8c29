"""Lindbladians: symmetry checks, exact action on Pauli sums, and sector-resolved steady states.

The dissipator for a jump ``l = sqrt(r) A`` is kept as ``r (A rho A^dag - {A^dag A, rho}/2)``
so that rates stay exact rationals.  Vectorization stacks columns:
``vec(A rho B) = (B^T kron A) vec(rho)``.
"""
from __future__ import annotations

import itertools
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla

from .pauli import (OperatorSum, QQ_I, SizeCapError, coeff, commutator, from_dense, mul,
                    to_dense, to_sparse)
from .phasepoly import LocalProduct, PhasePolyUnitary, conjugate_operator

NULL_TOL = 1e-10
GAP_MARGIN = 100.0
POSITIVITY_TOL = -1e-8
DENSE_BLOCK = 1024
DENSE_NULL = 400
NULL_SHIFT = 1e-3
SHIFT_INVERT_MAX = 4096


def dense_cap() -> int:
    return int(os.environ.get("MIXANOM_DENSE_CAP", "8"))


SPARSE_CAP = 10


@dataclass
class LindbladModel:
    sites: tuple
    hamiltonian: OperatorSum
    jumps: tuple
    rates: tuple = ()
    boundary: str = "pbc"
    symmetry: object = None
    name: str = ""
    lattice: object = None
    _ldl: list = field(default_factory=list, init=False, repr=False)

    def __post_init__(self):
        self.sites = tuple(self.sites)
        self.jumps = tuple(self.jumps)
        self.rates = tuple(coeff(r) for r in (self.rates or [1] * len(self.jumps)))
        if len(self.rates) != len(self.jumps):
            raise ValueError("one rate per jump operator")
        for op in (self.hamiltonian,) + self.jumps:
            if op.sites != self.sites:
                raise ValueError("operators must share the model's site context")
        self._ldl = [mul(l.dagger(), l) for l in self.jumps]

    @property
    def n_sites(self) -> int:
        return len(self.sites)


def _as_unitary(u) -> PhasePolyUnitary:
    return u.unitary() if isinstance(u, LocalProduct) else u


def apply_symbolic(model: LindbladModel, rho: OperatorSum) -> OperatorSum:
    """Exact L[rho] = -i[H, rho] + sum r (A rho A^dag - {A^dag A, rho}/2)."""
    out = commutator(model.hamiltonian, rho).scale(QQ_I(0, -1))
    half = QQ_I(1, 0) / QQ_I(2, 0)
    for A, AdA, r in zip(model.jumps, model._ldl, model.rates):
        term = mul(mul(A, rho), A.dagger()) - commutator(AdA, rho, anti=True).scale(half)
        out = out + term.scale(r)
    return out


@dataclass
class SymmetryReport:
    results: dict
    passed: bool

    def __str__(self) -> str:
        return "\n".join(f"{k}: {v['kind']} {'pass' if v['pass'] else 'FAIL'} ({v['method']})"
                         for k, v in self.results.items())


def _normalized_key(op: OperatorSum):
    """Key identifying an operator up to a unit-modulus factor."""
    if not op.terms:
        return ("zero",)
    first = min(op.terms)
    c0 = op.terms[first]
    return tuple(sorted((k, v / c0) for k, v in op.terms.items()))


def check_symmetry(model: LindbladModel, group=None) -> SymmetryReport:
    """Strong elements must commute with H and every jump; weak ones permute the jumps up to phases."""
    group = group or model.symmetry
    results = {}
    if group is None:
        return SymmetryReport({}, True)
    cache_keys = {}
    for i, (A, r) in enumerate(zip(model.jumps, model.rates)):
        cache_keys.setdefault((_normalized_key(A), r), []).append(i)
    for g in group.elements:
        if g == group.identity:
            continue
        U = _as_unitary(group.rep[g].left)
        cache: dict = {}
        H2 = conjugate_operator(U, model.hamiltonian, cache)
        h_ok = H2 == model.hamiltonian
        conj = [conjugate_operator(U, A, cache) for A in model.jumps]
        if g in group.strong:
            ok = h_ok and all(c == A for c, A in zip(conj, model.jumps))
            results[g] = {"kind": "strong", "pass": ok, "method": "commutation"}
            continue
        ok = h_ok
        method = "jump permutation"
        if ok:
            used = set()
            for c, r in zip(conj, model.rates):
                cand = cache_keys.get((_normalized_key(c), r), [])
                j = next((j for j in cand if j not in used and _unit_ratio(c, model.jumps[j])), None)
                if j is None:
                    ok = False
                    break
                used.add(j)
        if not ok and model.n_sites <= 6:
            method = "superoperator commutation (dense)"
            ok = _superop_commutes(model, U)
        results[g] = {"kind": "weak", "pass": ok, "method": method}
    return SymmetryReport(results, all(v["pass"] for v in results.values()))


def _unit_ratio(a: OperatorSum, b: OperatorSum) -> bool:
    if set(a.terms) != set(b.terms) or not a.terms:
        return False
    k0 = next(iter(a.terms))
    ratio = a.terms[k0] / b.terms[k0]
    if ratio.x ** 2 + ratio.y ** 2 != 1:
        return False
    return all(a.terms[k] == ratio * b.terms[k] for k in a.terms)


def _superop_commutes(model: LindbladModel, U: PhasePolyUnitary) -> bool:
    from .phasepoly import to_operator_sum

    Ud = to_sparse(to_operator_sum(U, model.sites, cap=model.n_sites))
    S = sparse.kron(Ud.conj(), Ud).tocsr()
    Lh = vectorize(model)
    diff = (Lh @ S - S @ Lh)
    return abs(diff).max() < 1e-10 if diff.nnz else True


def vectorize(model: LindbladModel, cap: int | None = None) -> sparse.csr_matrix:
    """Column-stacking superoperator matrix of the Lindbladian."""
    cap = SPARSE_CAP if cap is None else cap
    if model.n_sites > cap:
        raise SizeCapError(f"{model.n_sites} sites exceeds the numeric cap {cap}")
    dim = 1 << model.n_sites
    I = sparse.identity(dim, dtype=complex, format="csr")
    H = to_sparse(model.hamiltonian, cap)
    out = -1j * (sparse.kron(I, H) - sparse.kron(H.T, I))
    for A, AdA, r in zip(model.jumps, model._ldl, model.rates):
        a = to_sparse(A, cap)
        ada = to_sparse(AdA, cap)
        rate = float(r.x.numerator) / float(r.x.denominator)
        out = out + rate * (sparse.kron(a.conj(), a) - 0.5 * sparse.kron(I, ada) - 0.5 * sparse.kron(ada.T, I))
    return out.tocsr()


# sectors

@dataclass(frozen=True)
class SectorSpec:
    """Eigenspace of a strong-symmetry generator.

    ``generator`` is an OperatorSum or PhasePolyUnitary; ``value`` is the
    eigenvalue (a unit-modulus phase, or the charge q for a Hermitian
    generator such as Q).
    """

    generator: object
    value: complex
    label: str = ""


def _generator_matrix(gen, sites, cap) -> sparse.csr_matrix:
    from .phasepoly import to_operator_sum

    if isinstance(gen, (PhasePolyUnitary, LocalProduct)):
        gen = to_operator_sum(_as_unitary(gen), sites, cap=max(cap, len(sites)))
    return to_sparse(gen, cap)


def sector_basis(sites: Sequence[int], sectors: Iterable[SectorSpec], cap: int | None = None) -> sparse.csr_matrix:
    """Orthonormal sparse basis (columns) of the joint eigenspace.

    Every generator is a monomial matrix (diagonal, or a permutation with
    phases), so the group-averaged projector is rank one on each orbit of
    basis states and its nonzero columns give a sparse orthogonal basis.
    """
    cap = SPARSE_CAP if cap is None else cap
    dim = 1 << len(sites)
    P = sparse.identity(dim, dtype=complex, format="csr")
    for sec in sectors:
        G = _generator_matrix(sec.generator, sites, cap)
        P = _eigen_projector(G, complex(sec.value)) @ P
    return _orbit_basis(P)


def _orbit_basis(P) -> sparse.csr_matrix:
    """Orthonormal columns spanning the range of a group-averaged monomial projector."""
    dim = P.shape[0]
    P = sparse.csc_matrix(P)
    P.data[np.abs(P.data) <= 1e-12] = 0
    P.eliminate_zeros()
    covered = np.zeros(dim, dtype=bool)
    rows_out, cols_out, vals_out = [], [], []
    for c in range(dim):
        lo, hi = P.indptr[c], P.indptr[c + 1]
        if lo == hi:
            continue
        rows = P.indices[lo:hi]
        if covered[rows].any():
            continue
        covered[rows] = True
        vals = P.data[lo:hi]
        k = len(cols_out)
        rows_out.append(rows)
        vals_out.append(vals / np.linalg.norm(vals))
        cols_out.append(k)
    if not cols_out:
        return sparse.csr_matrix((dim, 0), dtype=complex)
    r = np.concatenate(rows_out)
    c = np.concatenate([np.full(len(x), k) for x, k in zip(rows_out, cols_out)])
    v = np.concatenate(vals_out)
    return sparse.csr_matrix((v, (r, c)), shape=(dim, len(cols_out)))


def _eigen_projector(G: sparse.csr_matrix, value: complex) -> sparse.csr_matrix:
    dim = G.shape[0]
    offdiag = G - sparse.diags(G.diagonal())
    if offdiag.nnz == 0 or abs(offdiag).max() < 1e-14:
        d = G.diagonal()
        return sparse.diags((np.abs(d - value) < 1e-9).astype(complex)).tocsr()
    # monomial matrix of finite order n: P = (1/n) sum_k value^-k G^k
    I = sparse.identity(dim, dtype=complex, format="csr")
    powers = [I]
    cur = G
    for _ in range(64):
        if abs(cur - I).max() < 1e-12:
            break
        powers.append(cur)
        cur = (cur @ G).tocsr()
    else:
        raise ValueError("sector generator is not of finite order")
    n = len(powers)
    P = sum((value ** (-k)) * p for k, p in enumerate(powers)) / n
    return sparse.csr_matrix(P)


def restrict_superop(L: sparse.csr_matrix, V: sparse.csr_matrix) -> sparse.csr_matrix:
    """(V^T kron V^dag) L (conj(V) kron V): L acting on rho = V A V^dag."""
    right = sparse.kron(V.conj(), V).tocsc()
    left = sparse.kron(V.T, V.conj().T).tocsr()
    return (left @ (L @ right)).tocsr()


def translation_matrix(n_sites: int, shift: int = 1) -> sparse.csr_matrix:
    """Cyclic shift of the site positions, p -> p + shift, on the computational basis."""
    dim = 1 << n_sites
    idx = np.arange(dim)
    out = np.zeros(dim, dtype=np.int64)
    for p in range(n_sites):
        bit = (idx >> (n_sites - 1 - p)) & 1
        q = (p + shift) % n_sites
        out |= bit << (n_sites - 1 - q)
    return sparse.csr_matrix((np.ones(dim, dtype=complex), (out, idx)), shape=(dim, dim))


def superop_of(U) -> sparse.csr_matrix:
    """Column-stacking matrix of rho -> U rho U^dagger."""
    U = sparse.csr_matrix(U)
    return sparse.kron(U.conj(), U).tocsr()


def _order(G: sparse.csr_matrix, limit: int = 64) -> int:
    I = sparse.identity(G.shape[0], dtype=complex, format="csr")
    cur = G
    for n in range(1, limit + 1):
        if abs(cur - I).max() < 1e-12:
            return n
        cur = (cur @ G).tocsr()
    raise ValueError("superoperator symmetry is not of finite order")


def symmetry_blocks(Lb: sparse.csr_matrix, syms: Sequence[sparse.csr_matrix]) -> list[tuple[tuple, sparse.csr_matrix]]:
    """Split Lb by commuting monomial superoperator symmetries (already restricted to the block).

    Returns (eigenvalue labels, orthonormal basis W) for every nonempty joint
    eigenspace; W^dagger Lb W is the corresponding sub-block.
    """
    for S in syms:
        if (abs(S @ Lb - Lb @ S)).max() > 1e-9:
            raise ValueError("superoperator symmetry does not commute with the Lindbladian")
        if np.any(np.diff(sparse.csr_matrix(S).indptr) > 1):
            raise ValueError("superoperator symmetry is not a monomial matrix")
    orders = [_order(sparse.csr_matrix(S)) for S in syms]
    out = []
    for ks in itertools.product(*(range(n) for n in orders)):
        P = sparse.identity(Lb.shape[0], dtype=complex, format="csr")
        for S, n, k in zip(syms, orders, ks):
            P = _eigen_projector(sparse.csr_matrix(S), np.exp(2j * np.pi * k / n)) @ P
        W = _orbit_basis(P)
        if W.shape[1]:
            out.append((ks, W))
    if sum(W.shape[1] for _, W in out) != Lb.shape[0]:
        raise ValueError("superoperator symmetry blocks do not cover the space")
    return out


def block_spectrum(model: LindbladModel, sectors: Iterable[SectorSpec] | SectorSpec | None,
                   superops: Sequence[sparse.csr_matrix]) -> list[tuple[tuple, np.ndarray]]:
    """Dense spectra of the sub-blocks cut out by strong sectors and superoperator symmetries."""
    if isinstance(sectors, SectorSpec):
        sectors = [sectors]
    sectors = list(sectors or [])
    L = vectorize(model)
    V = sector_basis(model.sites, sectors) if sectors else sparse.identity(1 << model.n_sites, dtype=complex, format="csr")
    Lb = restrict_superop(L, V)
    syms = [restrict_superop(S, V) for S in superops]
    out = []
    for ks, W in symmetry_blocks(Lb, syms):
        sub = (W.conj().T @ Lb @ W).toarray()
        out.append((ks, np.linalg.eigvals(sub)))
    return out


@dataclass
class SteadyStateResult:
    degeneracy: int
    states: list
    eigenvalues: np.ndarray
    status: str = "ok"
    dense_states: list = field(default_factory=list, repr=False)
    sector_dim: int = 0


def _null_vectors(M: np.ndarray, k: int) -> np.ndarray:
    _, _, vh = np.linalg.svd(M)
    return vh[-k:].conj().T if k else np.zeros((M.shape[1], 0))


def _nearest_zero(Lb: sparse.csr_matrix, kk: int) -> tuple[np.ndarray, np.ndarray]:
    vals, vecs = spla.eigs(Lb.tocsc(), k=kk, sigma=NULL_SHIFT, tol=1e-14)
    order = np.argsort(np.abs(vals))
    return vals[order], vecs[:, order]


def _rightmost(Lb: sparse.csr_matrix, kk: int, attempts: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs with the largest real part, without factorizing Lb.

    Arnoldi can return unconverged pairs on these non-normal matrices, so
    every pair is checked (residual, Re <= 0) and the run repeated with a
    fresh start vector and a wider subspace on failure.
    """
    n = Lb.shape[0]
    rng = np.random.default_rng(2024)
    scale = max(1.0, float(abs(Lb).sum(axis=0).max()))
    for attempt in range(attempts):
        ncv = min(n - 1, max(2 * kk + 1, 40) * (attempt + 1))
        v0 = rng.normal(size=n) + 1j * rng.normal(size=n)
        try:
            vals, vecs = spla.eigs(Lb, k=kk, which="LR", ncv=ncv, v0=v0, maxiter=50 * n)
        except spla.ArpackNoConvergence:
            continue
        norms = np.linalg.norm(vecs, axis=0)
        if np.any(norms < 0.5):
            continue
        vecs = vecs / norms
        res = np.linalg.norm(Lb @ vecs - vecs * vals, axis=0)
        if np.all(res < 1e-9 * scale) and np.all(vals.real < 1e-9 * scale):
            order = np.argsort(np.abs(vals))
            return vals[order], vecs[:, order]
    raise RuntimeError("Arnoldi did not converge to valid eigenpairs")


def null_space(Lb: sparse.csr_matrix, syms: Sequence[sparse.csr_matrix] = ()) -> tuple[int, np.ndarray, np.ndarray, np.ndarray]:
    """(k, right null basis, left null basis, eigenvalues used for the count).

    With superoperator symmetries the block is split and each piece solved
    densely.  Otherwise small blocks use a dense spectrum, mid-sized ones
    shift-invert Arnoldi near zero and large ones validated rightmost
    Arnoldi, widening the window until it holds a nonzero eigenvalue.
    """
    n = Lb.shape[0]
    if syms:
        Rs, Ls, evs = [], [], []
        for _, W in symmetry_blocks(Lb, syms):
            sub = (W.conj().T @ Lb @ W).toarray()
            ev = np.linalg.eigvals(sub)
            k = int(np.sum(np.abs(ev) < NULL_TOL))
            evs.append(ev)
            if k:
                Rs.append(W @ _null_vectors(sub, k))
                Ls.append(W @ _null_vectors(sub.conj().T, k))
        R = np.column_stack(Rs) if Rs else np.zeros((n, 0), dtype=complex)
        Lf = np.column_stack(Ls) if Ls else np.zeros((n, 0), dtype=complex)
        return R.shape[1], R, Lf, np.concatenate(evs)
    if n <= DENSE_NULL:
        M = Lb.toarray()
        ev = np.linalg.eigvals(M)
        k = int(np.sum(np.abs(ev) < NULL_TOL))
        return k, _null_vectors(M, k), _null_vectors(M.conj().T, k), ev
    nearest = _nearest_zero if n <= SHIFT_INVERT_MAX else _rightmost
    kk = min(n - 2, 12)
    while True:
        ev, R = nearest(Lb, kk)
        k = int(np.sum(np.abs(ev) < NULL_TOL))
        if k < kk or kk >= n - 2:
            break
        kk = min(n - 2, 2 * kk)
    _, Lf = nearest(Lb.conj().T.tocsr(), kk)
    R, _ = np.linalg.qr(R[:, :k])
    Lf, _ = np.linalg.qr(Lf[:, :k])
    return k, R, Lf, ev



def steady_states(model: LindbladModel, sectors: Iterable[SectorSpec] | SectorSpec | None = None,
                  decompose: bool = True, superops: Sequence[sparse.csr_matrix] = ()) -> SteadyStateResult:
    """Null space of the Lindbladian restricted to a strong-symmetry sector.

    ``superops`` are optional commuting superoperator symmetries used to
    split large sectors (see ``symmetry_blocks``).
    """
    if model.n_sites > dense_cap():
        raise SizeCapError(f"{model.n_sites} sites exceeds the dense cap {dense_cap()}")
    if isinstance(sectors, SectorSpec):
        sectors = [sectors]
    sectors = list(sectors or [])
    L = vectorize(model)
    V = sector_basis(model.sites, sectors) if sectors else sparse.identity(1 << model.n_sites, dtype=complex, format="csr")
    d = V.shape[1]
    if d == 0:
        raise ValueError("empty sector")
    Lb = restrict_superop(L, V)
    k, R, Lf, ev = null_space(Lb, [restrict_superop(S, V) for S in superops])
    mags = np.sort(np.abs(ev))
    status = "ok"
    if k == 0:
        raise RuntimeError("no steady state found in this sector")
    if k < len(mags) and mags[k] <= GAP_MARGIN * max(mags[k - 1], 1e-300) and mags[k] < 1e-6:
        status = "degeneracy ambiguous"
    if not decompose:
        return SteadyStateResult(k, [], ev, status, sector_dim=d)
    Vd = V.toarray()
    mats = [Vd @ R[:, i].reshape(d, d, order="F") @ Vd.conj().T for i in range(k)]
    # projection of the identity onto the null space: a faithful steady state
    vec_id = np.eye(d).reshape(-1, order="F")
    rho0_b = (R @ np.linalg.solve(Lf.conj().T @ R, Lf.conj().T @ vec_id)).reshape(d, d, order="F")
    rho0 = Vd @ rho0_b @ Vd.conj().T
    rho0 = (rho0 + rho0.conj().T) / 2
    dense = _extreme_states(mats, rho0)
    for s in dense:
        if np.linalg.eigvalsh(s).min() < POSITIVITY_TOL:
            raise RuntimeError("steady state fails the positivity check")
    states = [from_dense(s, model.sites, exact=True, tol=1e-11) for s in dense]
    return SteadyStateResult(k, states, ev, status, dense, d)


def _extreme_states(mats: list[np.ndarray], rho0: np.ndarray) -> list[np.ndarray]:
    """Split the steady-state span into positive, trace-one states.

    With a faithful steady state rho0 the operators rho0^-1/2 X rho0^-1/2
    commute for an abelian steady-state algebra; their joint spectral
    projections give the extreme points.
    """
    herm = []
    for m in mats:
        herm.append((m + m.conj().T) / 2)
        herm.append((m - m.conj().T) / 2j)
    k = len(mats)
    tr0 = np.trace(rho0).real
    rho0 = rho0 / tr0
    if k == 1:
        return [rho0]
    w, U = np.linalg.eigh(rho0)
    keep = w > 1e-10
    Us, ws = U[:, keep], w[keep]
    inv_sqrt = Us @ np.diag(ws ** -0.5) @ Us.conj().T
    sqrt = Us @ np.diag(ws ** 0.5) @ Us.conj().T
    rng = np.random.default_rng(12345)
    coeffs = rng.normal(size=len(herm))
    Xmix = sum(c * inv_sqrt @ h @ inv_sqrt for c, h in zip(coeffs, herm))
    Xmix = Us.conj().T @ ((Xmix + Xmix.conj().T) / 2) @ Us
    ev, vecs = np.linalg.eigh(Xmix)
    order = np.argsort(ev)
    ev, vecs = ev[order], vecs[:, order]
    groups = [[0]]
    for i in range(1, len(ev)):
        if abs(ev[i] - ev[groups[-1][-1]]) < 1e-7 * max(1.0, abs(ev).max()):
            groups[-1].append(i)
        else:
            groups.append([i])
    if len(groups) != k:
        return _nonabelian_states(herm, inv_sqrt, sqrt, Us, k, rng)
    states = []
    for g in groups:
        proj = Us @ vecs[:, g] @ vecs[:, g].conj().T @ Us.conj().T
        s = sqrt @ proj @ sqrt
        s = (s + s.conj().T) / 2
        states.append(s / np.trace(s).real)
    return states


def _spectral_states(X, Us, sqrt) -> list[np.ndarray]:
    X = Us.conj().T @ ((X + X.conj().T) / 2) @ Us
    ev, vecs = np.linalg.eigh(X)
    out, start = [], 0
    for i in range(1, len(ev) + 1):
        if i == len(ev) or abs(ev[i] - ev[start]) > 1e-7 * max(1.0, abs(ev).max()):
            proj = Us @ vecs[:, start:i] @ vecs[:, start:i].conj().T @ Us.conj().T
            s = sqrt @ proj @ sqrt
            s = (s + s.conj().T) / 2
            out.append(s / np.trace(s).real)
            start = i
    return out


def _nonabelian_states(herm, inv_sqrt, sqrt, Us, k, rng) -> list[np.ndarray]:
    """Positive steady states spanning a non-abelian steady-state set.

    Spectral projections of rho0^-1/2 X rho0^-1/2 lie in the algebra the
    steady states are built on, so sandwiching them with rho0^1/2 gives
    positive steady states.  Keep a linearly independent subset.
    """
    pulled = [inv_sqrt @ h @ inv_sqrt for h in herm]
    candidates = []
    for X in pulled:
        candidates.extend(_spectral_states(X, Us, sqrt))
    for _ in range(2 * k):
        c = rng.normal(size=len(pulled))
        candidates.extend(_spectral_states(sum(a * X for a, X in zip(c, pulled)), Us, sqrt))
    chosen, basis = [], np.zeros((sqrt.size, 0), dtype=complex)
    for s in candidates:
        trial = np.column_stack([basis, s.reshape(-1)])
        if np.linalg.matrix_rank(trial, tol=1e-8) > basis.shape[1]:
            basis, chosen = trial, chosen + [s]
            if len(chosen) == k:
                return chosen
    raise RuntimeError("could not span the steady-state set with positive states")


def spectral_gap(model: LindbladModel, sectors: Iterable[SectorSpec] | SectorSpec | None = None,
                 method: str = "auto", superops: Sequence[sparse.csr_matrix] | None = None) -> float:
    """min over nonzero eigenvalues of -Re(lambda) inside the sector.

    ``superops`` (e.g. translations and weak symmetries as rho -> U rho U^dagger)
    split the sector into smaller dense blocks.
    """
    if model.n_sites > SPARSE_CAP:
        raise SizeCapError(f"{model.n_sites} sites exceeds the numeric cap {SPARSE_CAP}")
    if isinstance(sectors, SectorSpec):
        sectors = [sectors]
    sectors = list(sectors or [])
    if superops:
        return _gap_of(np.concatenate([e for _, e in block_spectrum(model, sectors, superops)]))
    L = vectorize(model)
    if sectors:
        Lb = restrict_superop(L, sector_basis(model.sites, sectors))
    else:
        Lb = L
    if method == "dense" or (method == "auto" and Lb.shape[0] <= DENSE_BLOCK):
        ev = np.linalg.eigvals(Lb.toarray())
    else:
        n, kk = Lb.shape[0], 8
        while True:
            ev, _ = _rightmost(Lb, min(n - 2, kk))
            if np.any(np.abs(ev) >= NULL_TOL) or kk >= n - 2:
                break
            kk *= 2
    return _gap_of(ev)


def _gap_of(ev: np.ndarray) -> float:
    nonzero = ev[np.abs(ev) >= NULL_TOL]
    if nonzero.size == 0:
        return 0.0
    return float(np.min(-nonzero.real))


def dense_superop_apply(model: LindbladModel, rho: np.ndarray) -> np.ndarray:
    """Reference: L[rho] from dense matrices, used as an oracle."""
    H = to_dense(model.hamiltonian)
    out = -1j * (H @ rho - rho @ H)
    for A, r in zip(model.jumps, model.rates):
        a = to_dense(A)
        rate = float(r.x.numerator) / float(r.x.denominator)
        ada = a.conj().T @ a
        out += rate * (a @ rho @ a.conj().T - 0.5 * (ada @ rho + rho @ ada))
    return out


# structured states for the symbolic path

@dataclass(frozen=True)
class ProductState:
    """Tensor product of single-site factors; sites without a factor carry I."""

    sites: tuple
    factors: tuple  # ((site, OperatorSum on the full site context), ...)

    @classmethod
    def build(cls, sites: Iterable[int], factors: dict) -> "ProductState":
        sites = tuple(sorted(set(sites)))
        return cls(sites, tuple(sorted((s, f.with_sites(sites)) for s, f in factors.items())))

    def factor(self, s: int) -> OperatorSum:
        return dict(self.factors).get(s, OperatorSum.identity(self.sites))

    def local(self, region: Iterable[int]) -> OperatorSum:
        out = OperatorSum.identity(self.sites)
        for s in sorted(set(region)):
            out = mul(out, self.factor(s))
        return out

    def expand(self) -> OperatorSum:
        return self.local(self.sites)


@dataclass(frozen=True)
class ConjugatedState:
    """entangler . base . entangler^dagger with an exact phase-polynomial entangler."""

    entangler: PhasePolyUnitary
    base: object  # OperatorSum or ProductState

    def expand(self) -> OperatorSum:
        base = self.base.expand() if isinstance(self.base, ProductState) else self.base
        return conjugate_operator(self.entangler, base)


@dataclass(frozen=True)
class LocalResidual:
    """Result of applying a Lindbladian to a ProductState: ``local`` times the untouched factors."""

    local: OperatorSum
    rest: tuple

    def is_zero(self) -> bool:
        return self.local.is_zero()


def _support_of(op: OperatorSum) -> set:
    return set(op.support())


def pull_back(model: LindbladModel, u: PhasePolyUnitary) -> LindbladModel:
    """Model conjugated by u^dagger: L'[rho] = u^dagger L[u rho u^dagger] u."""
    from .phasepoly import invert

    ui = invert(_as_unitary(u))
    cache: dict = {}
    H = conjugate_operator(ui, model.hamiltonian, cache)
    jumps = [conjugate_operator(ui, A, cache) for A in model.jumps]
    return LindbladModel(model.sites, H, jumps, model.rates, model.boundary, None,
                         model.name + " (pulled back)", model.lattice)


def _apply_product(model: LindbladModel, rho: ProductState) -> LocalResidual:
    half = QQ_I(1, 0) / QQ_I(2, 0)
    pieces = []
    for key, c in model.hamiltonian.terms.items():
        h = OperatorSum._raw(model.sites, {key: c})
        S = _support_of(h)
        r = commutator(h, rho.local(S)).scale(QQ_I(0, -1))
        if not r.is_zero():
            pieces.append((S, r))
    for A, AdA, rate in zip(model.jumps, model._ldl, model.rates):
        S = _support_of(A) | _support_of(AdA)
        loc = rho.local(S)
        r = (mul(mul(A, loc), A.dagger()) - commutator(AdA, loc, anti=True).scale(half)).scale(rate)
        if not r.is_zero():
            pieces.append((S, r))
    union = set().union(*(S for S, _ in pieces)) if pieces else set()
    total = OperatorSum.zero(model.sites)
    for S, r in pieces:
        total = total + mul(r, rho.local(union - S))
    rest = tuple(s for s in rho.sites if s not in union)
    return LocalResidual(total, rest)


def apply_symbolic_state(model: LindbladModel, rho):
    """apply_symbolic extended to ProductState and ConjugatedState inputs.

    A ConjugatedState is handled in the rotated frame: the model is pulled
    back through the entangler, so the residual returned is u^dagger L[rho] u.
    """
    if isinstance(rho, ConjugatedState):
        return apply_symbolic_state(pull_back(model, rho.entangler), rho.base)
    if isinstance(rho, ProductState):
        return _apply_product(model, rho)
    return apply_symbolic(model, rho)


def is_steady(model: LindbladModel, rho) -> bool:
    return apply_symbolic_state(model, rho).is_zero()


# serialization

def operator_to_json(op: OperatorSum) -> dict:
    return {"sites": list(op.sites), "terms": op.to_text()}


def operator_from_json(data: dict) -> OperatorSum:
    return OperatorSum.from_text(data["sites"], data["terms"])


def model_to_json(model: LindbladModel) -> dict:
    from .pauli import format_coeff

    return {
        "name": model.name,
        "sites": list(model.sites),
        "boundary": model.boundary,
        "hamiltonian": model.hamiltonian.to_text(),
        "jumps": [{"operator": A.to_text(), "rate": format_coeff(r)} for A, r in zip(model.jumps, model.rates)],
        "symmetry": None if model.symmetry is None else {
            "elements": list(model.symmetry.elements),
            "strong": list(model.symmetry.strong),
            "weak": list(model.symmetry.weak),
        },
    }


def model_from_json(data: dict) -> LindbladModel:
    from .pauli import parse_coeff

    sites = data["sites"]
    H = OperatorSum.from_text(sites, data["hamiltonian"])
    jumps = [OperatorSum.from_text(sites, j["operator"]) for j in data["jumps"]]
    rates = [parse_coeff(j["rate"]) for j in data["jumps"]]
    return LindbladModel(sites, H, jumps, rates, data.get("boundary", "pbc"), name=data.get("name", ""))
