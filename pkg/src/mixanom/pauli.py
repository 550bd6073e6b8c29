"""Exact Pauli-string algebra.

A Pauli word is stored as a pair of integer bitmasks ``(x, z)`` over global
site indices (bit ``s`` refers to site ``s``).  The pair stands for the
Hermitian operator ``i^{|x&z|} X^x Z^z``, so ``Y`` on a site has both bits set.
Coefficients are exact Gaussian rationals (sympy's ``QQ_I``).
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

import numpy as np
from scipy.linalg import hadamard
from sympy.polys.domains import QQ, QQ_I

DENSE_CAP = 12

_UNITS = (QQ_I(1, 0), QQ_I(0, 1), QQ_I(-1, 0), QQ_I(0, -1))
_ZERO = QQ_I(0, 0)
_ONE = QQ_I(1, 0)
_TWO = QQ_I(2, 0)


class SiteContextError(ValueError):
    pass


class SizeCapError(ValueError):
    pass


def _conj(c):
    return QQ_I(c.x, -c.y)


def coeff(value) -> "QQ_I.dtype":
    """Convert ints, Fractions, floats, complex numbers or sympy numbers to QQ_I."""
    if isinstance(value, QQ_I.dtype):
        return value
    if isinstance(value, (int, np.integer)):
        return QQ_I(int(value), 0)
    if isinstance(value, Fraction):
        return QQ_I.convert_from(QQ(value.numerator, value.denominator), QQ)
    if isinstance(value, (float, np.floating)):
        return coeff(Fraction(float(value)))
    if isinstance(value, (complex, np.complexfloating)):
        re_, im_ = coeff(Fraction(value.real)), coeff(Fraction(value.imag))
        return re_ + im_ * _UNITS[1]
    if isinstance(value, str):
        return parse_coeff(value)
    return QQ_I.from_sympy(value)


def coeff_to_complex(c) -> complex:
    return complex(float(c.x.numerator) / float(c.x.denominator),
                   float(c.y.numerator) / float(c.y.denominator))


def format_coeff(c) -> str:
    re_, im_ = Fraction(int(c.x.numerator), int(c.x.denominator)), Fraction(
        int(c.y.numerator), int(c.y.denominator))
    sign = "-" if im_ < 0 else "+"
    return f"{re_}{sign}{abs(im_)} i"


_COEFF_RE = re.compile(r"^\s*([+-]?\d+(?:/\d+)?)\s*([+-])\s*(\d+(?:/\d+)?)\s*i\s*$")


def parse_coeff(text: str):
    m = _COEFF_RE.match(text)
    if m is None:
        # plain real or decimal
        return coeff(Fraction(text.strip()))
    re_, sign, im_ = m.groups()
    im = Fraction(im_) * (-1 if sign == "-" else 1)
    return coeff(Fraction(re_)) + coeff(im) * _UNITS[1]


def _popcount(v: int) -> int:
    return v.bit_count()


def word_product(x1: int, z1: int, x2: int, z2: int) -> tuple[int, int, int]:
    """Return (x, z, e) with P(x1,z1) P(x2,z2) = i^e P(x, z)."""
    x, z = x1 ^ x2, z1 ^ z2
    e = (_popcount(x1 & z1) + _popcount(x2 & z2) - _popcount(x & z)
         + 2 * _popcount(z1 & x2)) % 4
    return x, z, e


def _mask(sites: Iterable[int]) -> int:
    m = 0
    for s in sites:
        m |= 1 << s
    return m


def _bits(mask: int) -> list[int]:
    out = []
    s = 0
    while mask:
        if mask & 1:
            out.append(s)
        mask >>= 1
        s += 1
    return out


_LETTER_BITS = {"X": (1, 0), "Y": (1, 1), "Z": (0, 1)}


def word_from_letters(letters: Mapping[int, str]) -> tuple[int, int]:
    x = z = 0
    for s, letter in letters.items():
        if letter == "I":
            continue
        bx, bz = _LETTER_BITS[letter]
        x |= bx << s
        z |= bz << s
    return x, z


def word_letters(x: int, z: int) -> dict[int, str]:
    out = {}
    for s in _bits(x | z):
        bx, bz = (x >> s) & 1, (z >> s) & 1
        out[s] = "Y" if bx and bz else ("X" if bx else "Z")
    return out


def format_word(x: int, z: int) -> str:
    letters = word_letters(x, z)
    if not letters:
        return "I"
    return " ".join(f"{letters[s]}{s}" for s in sorted(letters))


_TOKEN_RE = re.compile(r"^([XYZ])(\d+)$")


def parse_word(text: str) -> tuple[int, int]:
    text = text.strip()
    if text in ("", "I"):
        return 0, 0
    letters: dict[int, str] = {}
    for tok in text.split():
        m = _TOKEN_RE.match(tok)
        if m is None:
            raise ValueError(f"bad Pauli token {tok!r}")
        site = int(m.group(2))
        if site in letters:
            raise ValueError(f"site {site} repeated in {text!r}")
        letters[site] = m.group(1)
    return word_from_letters(letters)


@dataclass(frozen=True)
class PauliString:
    """Pauli word with an explicit phase i^phase."""

    x: int = 0
    z: int = 0
    phase: int = 0

    @classmethod
    def from_letters(cls, letters: Mapping[int, str], phase: int = 0) -> "PauliString":
        x, z = word_from_letters(letters)
        return cls(x, z, phase % 4)

    @classmethod
    def parse(cls, text: str) -> "PauliString":
        return cls(*parse_word(text))

    @property
    def letters(self) -> dict[int, str]:
        return word_letters(self.x, self.z)

    @property
    def support(self) -> list[int]:
        return _bits(self.x | self.z)

    def __mul__(self, other: "PauliString") -> "PauliString":
        x, z, e = word_product(self.x, self.z, other.x, other.z)
        return PauliString(x, z, (self.phase + other.phase + e) % 4)

    def commutes(self, other: "PauliString") -> bool:
        return (_popcount(self.x & other.z) + _popcount(self.z & other.x)) % 2 == 0

    def __str__(self) -> str:
        pre = ("", "i ", "-", "-i ")[self.phase]
        return pre + format_word(self.x, self.z)


class OperatorSum:
    """Canonical exact sum of Pauli words on a fixed, ordered site context."""

    __slots__ = ("sites", "terms", "_hash")

    def __init__(self, sites: Iterable[int], terms: Mapping[tuple[int, int], object] | None = None):
        self.sites = tuple(sorted(set(sites)))
        full = _mask(self.sites)
        clean: dict[tuple[int, int], object] = {}
        for key, c in (terms or {}).items():
            c = coeff(c)
            if c == _ZERO:
                continue
            if (key[0] | key[1]) & ~full:
                raise SiteContextError(f"word {format_word(*key)} outside sites {self.sites}")
            clean[key] = c
        self.terms = clean
        self._hash = None

    # constructors
    @classmethod
    def identity(cls, sites: Iterable[int], c=1) -> "OperatorSum":
        return cls(sites, {(0, 0): c})

    @classmethod
    def zero(cls, sites: Iterable[int]) -> "OperatorSum":
        return cls(sites)

    @classmethod
    def word(cls, sites: Iterable[int], text_or_letters, c=1) -> "OperatorSum":
        if isinstance(text_or_letters, str):
            key = parse_word(text_or_letters)
        elif isinstance(text_or_letters, PauliString):
            key = (text_or_letters.x, text_or_letters.z)
            c = coeff(c) * _UNITS[text_or_letters.phase]
        else:
            key = word_from_letters(text_or_letters)
        return cls(sites, {key: c})

    @classmethod
    def from_text(cls, sites: Iterable[int], text: Mapping[str, object]) -> "OperatorSum":
        terms: dict = {}
        for w, c in text.items():
            key = parse_word(w)
            terms[key] = terms.get(key, _ZERO) + coeff(c)
        return cls(sites, terms)

    @classmethod
    def _raw(cls, sites: tuple[int, ...], terms: dict) -> "OperatorSum":
        out = cls.__new__(cls)
        out.sites = sites
        out.terms = {k: v for k, v in terms.items() if v != _ZERO}
        out._hash = None
        return out

    # basic algebra
    def _check(self, other: "OperatorSum") -> None:
        if self.sites != other.sites:
            raise SiteContextError(f"site context mismatch: {self.sites} vs {other.sites}")

    def __add__(self, other):
        if not isinstance(other, OperatorSum):
            other = OperatorSum.identity(self.sites, other)
        self._check(other)
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out.get(k, _ZERO) + v
        return OperatorSum._raw(self.sites, out)

    __radd__ = __add__

    def __neg__(self):
        return OperatorSum._raw(self.sites, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c) -> "OperatorSum":
        c = coeff(c)
        return OperatorSum._raw(self.sites, {k: v * c for k, v in self.terms.items()})

    def __mul__(self, other):
        if not isinstance(other, OperatorSum):
            return self.scale(other)
        return mul(self, other)

    def __rmul__(self, other):
        return self.scale(other)

    def __eq__(self, other) -> bool:
        if not isinstance(other, OperatorSum):
            return NotImplemented
        return self.sites == other.sites and self.terms == other.terms

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.sites, frozenset(self.terms.items())))
        return self._hash

    def dagger(self) -> "OperatorSum":
        return OperatorSum._raw(self.sites, {k: _conj(v) for k, v in self.terms.items()})

    def is_hermitian(self) -> bool:
        return all(v.y == 0 for v in self.terms.values())

    def is_zero(self) -> bool:
        return not self.terms

    def trace(self):
        """Exact trace 2^N times the identity coefficient."""
        return self.terms.get((0, 0), _ZERO) * QQ_I(2 ** len(self.sites), 0)

    def coefficient(self, word: str | tuple[int, int]):
        key = parse_word(word) if isinstance(word, str) else word
        return self.terms.get(key, _ZERO)

    def support(self) -> list[int]:
        m = 0
        for x, z in self.terms:
            m |= x | z
        return _bits(m)

    def with_sites(self, sites: Iterable[int]) -> "OperatorSum":
        """Re-home the same terms on a different (enclosing) site context."""
        return OperatorSum(sites, self.terms)

    def __len__(self) -> int:
        return len(self.terms)

    def to_text(self) -> dict[str, str]:
        return {format_word(*k): format_coeff(v) for k, v in sorted(self.terms.items(), key=lambda kv: _sort_key(kv[0]))}

    def __repr__(self) -> str:
        if not self.terms:
            return "OperatorSum(0)"
        body = " + ".join(f"({format_coeff(v)}) {format_word(*k)}"
                          for k, v in sorted(self.terms.items(), key=lambda kv: _sort_key(kv[0]))[:8])
        more = "" if len(self.terms) <= 8 else f" + ... [{len(self.terms)} terms]"
        return f"OperatorSum({body}{more})"


def _sort_key(key: tuple[int, int]):
    x, z = key
    return (_popcount(x | z), _bits(x | z), x, z)


def mul(a: OperatorSum, b: OperatorSum) -> OperatorSum:
    a._check(b)
    out: dict[tuple[int, int], object] = {}
    get = out.get
    for (x1, z1), c1 in a.terms.items():
        a1 = _popcount(x1 & z1)
        for (x2, z2), c2 in b.terms.items():
            x, z = x1 ^ x2, z1 ^ z2
            e = (a1 + _popcount(x2 & z2) - _popcount(x & z) + 2 * _popcount(z1 & x2)) & 3
            c = c1 * c2
            if e:
                c = c * _UNITS[e]
            k = (x, z)
            out[k] = get(k, _ZERO) + c
    return OperatorSum._raw(a.sites, out)


def commutator(a: OperatorSum, b: OperatorSum, anti: bool = False) -> OperatorSum:
    """ab - ba, or ab + ba when ``anti`` is set."""
    a._check(b)
    out: dict[tuple[int, int], object] = {}
    for (x1, z1), c1 in a.terms.items():
        for (x2, z2), c2 in b.terms.items():
            anticommute = (_popcount(x1 & z2) + _popcount(z1 & x2)) & 1
            if anticommute == anti:
                # commuting pair in a commutator (or anticommuting in an anticommutator) cancels
                continue
            x, z, e = word_product(x1, z1, x2, z2)
            c = c1 * c2 * _UNITS[e] * _TWO
            k = (x, z)
            out[k] = out.get(k, _ZERO) + c
    return OperatorSum._raw(a.sites, out)


def trace_inner(a: OperatorSum, b: OperatorSum):
    """Exact Tr(a^dagger b)."""
    a._check(b)
    tot = _ZERO
    small, big = (a, b) if len(a.terms) <= len(b.terms) else (b, a)
    for k, v in small.terms.items():
        if k in big.terms:
            tot += _conj(a.terms[k]) * b.terms[k]
    return tot * QQ_I(2 ** len(a.sites), 0)


def partial_trace(a: OperatorSum, keep: Iterable[int]) -> OperatorSum:
    keep = tuple(sorted(set(keep)))
    if not set(keep) <= set(a.sites):
        raise SiteContextError(f"region {keep} not inside {a.sites}")
    kmask = _mask(keep)
    scale = QQ_I(2 ** (len(a.sites) - len(keep)), 0)
    out = {}
    for (x, z), c in a.terms.items():
        if (x | z) & ~kmask:
            continue
        out[(x, z)] = c * scale
    return OperatorSum._raw(keep, out)


def _local_masks(sites: tuple[int, ...], x: int, z: int) -> tuple[int, int]:
    n = len(sites)
    xl = zl = 0
    for p, s in enumerate(sites):
        bit = 1 << (n - 1 - p)
        if (x >> s) & 1:
            xl |= bit
        if (z >> s) & 1:
            zl |= bit
    return xl, zl


def _parity_table(n: int) -> np.ndarray:
    par = np.zeros(1 << n, dtype=np.int8)
    for b in range(n):
        par[1 << b: 1 << (b + 1)] = 1 - par[: 1 << b]
    return par


def to_dense(a: OperatorSum, cap: int | None = None) -> np.ndarray:
    """Dense matrix in the Z basis; the first site is the most significant qubit."""
    cap = DENSE_CAP if cap is None else cap
    n = len(a.sites)
    if n > cap:
        raise SizeCapError(f"{n} sites exceeds the dense cap {cap}")
    dim = 1 << n
    par = _parity_table(n)
    idx = np.arange(dim)
    m = np.zeros((dim, dim), dtype=complex)
    phases = np.array([1, 1j, -1, -1j])
    for (x, z), c in a.terms.items():
        xl, zl = _local_masks(a.sites, x, z)
        sign = 1 - 2 * par[idx & zl].astype(float)
        m[idx ^ xl, idx] += coeff_to_complex(c) * phases[_popcount(x & z) % 4] * sign
    return m


def from_dense(m: np.ndarray, sites: Iterable[int], exact: bool = False,
               tol: float = 1e-12, max_denominator: int = 1 << 20) -> OperatorSum:
    """Pauli decomposition of a dense matrix.

    With ``exact`` the coefficients are snapped to rationals (limit_denominator),
    which reproduces dyadic-rational operators exactly.
    """
    sites = tuple(sorted(set(sites)))
    n = len(sites)
    dim = 1 << n
    m = np.asarray(m, dtype=complex)
    if m.shape != (dim, dim):
        raise SiteContextError(f"matrix shape {m.shape} does not fit {n} sites")
    idx = np.arange(dim)
    # V[x, b] = m[b ^ x, b]; coefficient of X^x Z^z is sum_b (-1)^{z.b} V[x, b] / 2^n
    v = m[idx[:, None] ^ idx[None, :], idx[None, :]]
    c = v @ hadamard(dim) / dim
    par_xz = np.array([1, -1j, -1, 1j])  # conj(i^k)
    terms = {}
    for xl in range(dim):
        row = c[xl]
        nz = np.nonzero(np.abs(row) > tol)[0]
        for zl in nz:
            xg = zg = 0
            for p, s in enumerate(sites):
                bit = 1 << (n - 1 - p)
                if xl & bit:
                    xg |= 1 << s
                if zl & bit:
                    zg |= 1 << s
            val = row[zl] * par_xz[_popcount(xl & int(zl)) % 4]
            if exact:
                re_ = Fraction(float(val.real)).limit_denominator(max_denominator)
                im_ = Fraction(float(val.imag)).limit_denominator(max_denominator)
                terms[(xg, zg)] = coeff(re_) + coeff(im_) * _UNITS[1]
            else:
                terms[(xg, zg)] = coeff(complex(val))
    return OperatorSum(sites, terms)


def product(ops: Iterable[OperatorSum], sites: Iterable[int] | None = None) -> OperatorSum:
    ops = list(ops)
    if not ops:
        if sites is None:
            raise ValueError("empty product needs a site context")
        return OperatorSum.identity(sites)
    out = ops[0]
    for o in ops[1:]:
        out = mul(out, o)
    return out


def X(sites, *where) -> OperatorSum:
    return OperatorSum.word(sites, {s: "X" for s in where})


def Y(sites, *where) -> OperatorSum:
    return OperatorSum.word(sites, {s: "Y" for s in where})


def Z(sites, *where) -> OperatorSum:
    return OperatorSum.word(sites, {s: "Z" for s in where})


def to_sparse(a: OperatorSum, cap: int = 14):
    """Sparse CSR matrix in the same basis as ``to_dense``."""
    from scipy import sparse

    n = len(a.sites)
    if n > cap:
        raise SizeCapError(f"{n} sites exceeds the sparse cap {cap}")
    dim = 1 << n
    par = _parity_table(n)
    idx = np.arange(dim)
    rows, cols, vals = [], [], []
    phases = np.array([1, 1j, -1, -1j])
    for (x, z), c in a.terms.items():
        xl, zl = _local_masks(a.sites, x, z)
        sign = 1 - 2 * par[idx & zl].astype(float)
        rows.append(idx ^ xl)
        cols.append(idx)
        vals.append(coeff_to_complex(c) * phases[_popcount(x & z) % 4] * sign)
    if not rows:
        return sparse.csr_matrix((dim, dim), dtype=complex)
    m = sparse.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(dim, dim))
    return m.tocsr()


def diagonal_operator(sites: Iterable[int], values, denominator: int = 1) -> OperatorSum:
    """Exact Z-word expansion of diag(values)/denominator.

    ``values`` are integers indexed by occupation pattern: bit j of the index
    is 1 when ``sites[j]`` points down (Z = -1).
    """
    from .phasepoly import _fwht

    sites = tuple(sorted(set(sites)))
    n = len(sites)
    vals = np.asarray(values, dtype=np.int64)
    if vals.shape != (1 << n,):
        raise ValueError("need one value per basis state")
    w = _fwht(vals)
    denom = QQ_I(denominator << n, 0)
    terms = {}
    for zl in np.nonzero(w)[0]:
        zmask = 0
        for j, s in enumerate(sites):
            if (int(zl) >> j) & 1:
                zmask |= 1 << s
        terms[(0, zmask)] = QQ_I(int(w[zl]), 0) / denom
    return OperatorSum(sites, terms)


def occupations(n: int) -> np.ndarray:
    """(2^n, n) array of occupation bits, column j for site index j."""
    idx = np.arange(1 << n)
    return ((idx[:, None] >> np.arange(n)[None, :]) & 1).astype(np.int64)
