"""Product-domain kernel algebra.

Expressions are trees over six kinds of generator, each attached to a
factor index ``m``::

    S_m        S_m(w_m, z_m)
    dS_m       dS_m/dzbar_m
    d_m        w_m - z_m
    dc_m       conj(w_m - z_m)
    u_m        |w_m - z_m|^2

closed under ``+``, ``*``, ``/`` and integer powers.  Differentiation in
``zbar_m`` uses ``du_m = -d_m``, ``d(dc_m) = -1``, ``d(d_m) = 0`` and
``dS_m = dS_m``.  Simplification rewrites a tree as a sum of monomials over
powers of the weight ``B``; terms sharing the same non-``u`` part are put over
a common power of ``B`` and their ``u`` polynomials collected, which is what
collapses the quotient rule output into compact forms.
"""
from __future__ import annotations

import itertools
from collections import defaultdict
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import SingularityError

LEAF_KINDS = ("S", "dS", "d", "dc", "u")


class Expr:
    def __add__(self, other):
        return Add((self, _wrap(other)))

    def __radd__(self, other):
        return Add((_wrap(other), self))

    def __sub__(self, other):
        return Add((self, Mul((Const(-1), _wrap(other)))))

    def __mul__(self, other):
        return Mul((self, _wrap(other)))

    def __rmul__(self, other):
        return Mul((_wrap(other), self))

    def __truediv__(self, other):
        return Div(self, _wrap(other))

    def __pow__(self, k):
        return Pow(self, int(k))

    def __neg__(self):
        return Mul((Const(-1), self))


def _wrap(x):
    return x if isinstance(x, Expr) else Const(x)


@dataclass(frozen=True)
class Const(Expr):
    value: complex

    def __str__(self):
        return _fmt_number(self.value)


@dataclass(frozen=True)
class Leaf(Expr):
    kind: str
    m: int

    def __post_init__(self):
        if self.kind not in LEAF_KINDS:
            raise ValueError(f"unknown generator {self.kind!r}")

    def __str__(self):
        if self.kind == "d":
            return f"(w_{self.m} - z_{self.m})"
        if self.kind == "dc":
            return f"conj(w_{self.m} - z_{self.m})"
        if self.kind == "dS":
            return f"dSdzbar_{self.m}"
        return f"{self.kind}_{self.m}"


@dataclass(frozen=True)
class Add(Expr):
    terms: tuple

    def __str__(self):
        out = ""
        for i, t in enumerate(self.terms):
            neg, body = _split_sign(t)
            if i == 0:
                out = ("-" if neg else "") + body
            else:
                out += (" - " if neg else " + ") + body
        return out


@dataclass(frozen=True)
class Mul(Expr):
    factors: tuple

    def __str__(self):
        return "*".join(_paren(f, (Add,)) for f in self.factors)


@dataclass(frozen=True)
class Div(Expr):
    num: Expr
    den: Expr

    def __str__(self):
        return f"{_paren(self.num, (Add,))}/{_paren(self.den, (Add, Mul, Div))}"


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    k: int

    def __str__(self):
        return f"{_paren(self.base, (Add, Mul, Div, Pow))}^{self.k}"


def _paren(e, kinds):
    s = str(e)
    return f"({s})" if isinstance(e, kinds) else s


def _split_sign(t):
    if isinstance(t, Mul) and isinstance(t.factors[0], Const):
        c = t.factors[0].value
        if c.imag == 0 and c.real < 0:
            rest = t.factors[1:]
            if c.real == -1:
                return True, "*".join(_paren(f, (Add,)) for f in rest)
            return True, "*".join([_fmt_number(-c)] + [_paren(f, (Add,)) for f in rest])
    if isinstance(t, Div):
        neg, body = _split_sign(t.num)
        if neg:
            return True, f"{body}/{_paren(t.den, (Add, Mul, Div))}"
    if isinstance(t, Const) and t.value.imag == 0 and t.value.real < 0:
        return True, _fmt_number(-t.value)
    return False, str(t)


def _fmt_number(v) -> str:
    v = complex(v)
    if v.imag == 0:
        r = v.real
        return str(int(r)) if r == int(r) and abs(r) < 1e15 else repr(r)
    return f"({v.real!r}{v.imag:+r}j)"


# -- derivatives -----------------------------------------------------------------

def diff_zbar(e: Expr, m: int) -> Expr:
    """Wirtinger derivative d/dzbar_m of a tree (unsimplified)."""
    if isinstance(e, Const):
        return Const(0)
    if isinstance(e, Leaf):
        if e.m != m:
            return Const(0)
        if e.kind == "S":
            return Leaf("dS", m)
        if e.kind == "u":
            return Mul((Const(-1), Leaf("d", m)))
        if e.kind == "dc":
            return Const(-1)
        if e.kind == "d":
            return Const(0)
        raise NotImplementedError("second z-bar derivative of S is not part of the algebra")
    if isinstance(e, Add):
        return Add(tuple(diff_zbar(t, m) for t in e.terms))
    if isinstance(e, Mul):
        parts = []
        for i, f in enumerate(e.factors):
            df = diff_zbar(f, m)
            parts.append(Mul(e.factors[:i] + (df,) + e.factors[i + 1:]))
        return Add(tuple(parts))
    if isinstance(e, Div):
        return Div(
            Add((Mul((diff_zbar(e.num, m), e.den)), Mul((Const(-1), e.num, diff_zbar(e.den, m))))),
            Pow(e.den, 2),
        )
    if isinstance(e, Pow):
        if e.k == 0:
            return Const(0)
        return Mul((Const(e.k), Pow(e.base, e.k - 1), diff_zbar(e.base, m)))
    raise TypeError(type(e))


# -- normal form -------------------------------------------------------------------
# A normal form maps (monomial, k) -> coefficient, representing
# sum coef * monomial / B^k with monomial a sorted tuple of ((kind, m), power).

def weight_B_expr(idx) -> Expr:
    """Tree for ``B = sum_j prod_{m != j} u_m`` over the index tuple."""
    idx = tuple(idx)
    if len(idx) == 1:
        return Const(1)
    terms = []
    for j in reversed(idx):
        terms.append(Mul(tuple(Leaf("u", m) for m in idx if m != j)))
    return Add(tuple(terms))


def _mono_mul(a, b):
    d = dict(a)
    for key, p in b:
        d[key] = d.get(key, 0) + p
    return tuple(sorted((k, p) for k, p in d.items() if p))


def _nf_add(a, b):
    out = defaultdict(complex, a)
    for key, c in b.items():
        out[key] += c
    return {k: v for k, v in out.items() if v != 0}


def _nf_mul(a, b):
    out = defaultdict(complex)
    for (ma, ka), ca in a.items():
        for (mb, kb), cb in b.items():
            out[(_mono_mul(ma, mb), ka + kb)] += ca * cb
    return {k: v for k, v in out.items() if v != 0}


def _nf_pow(a, k):
    out = {((), 0): 1 + 0j}
    for _ in range(k):
        out = _nf_mul(out, a)
    return out


@lru_cache(maxsize=256)
def _b_power_poly(idx, k):
    b = _to_nf(weight_B_expr(idx), idx)
    return tuple(sorted(_nf_pow(b, k).items()))


def _to_nf(e: Expr, idx) -> dict:
    if isinstance(e, Const):
        v = complex(e.value)
        return {((), 0): v} if v != 0 else {}
    if isinstance(e, Leaf):
        return {((((e.kind, e.m), 1),), 0): 1 + 0j}
    if isinstance(e, Add):
        out = {}
        for t in e.terms:
            out = _nf_add(out, _to_nf(t, idx))
        return out
    if isinstance(e, Mul):
        out = {((), 0): 1 + 0j}
        for f in e.factors:
            out = _nf_mul(out, _to_nf(f, idx))
            if not out:
                return {}
        return out
    if isinstance(e, Pow):
        return _nf_pow(_to_nf(e.base, idx), e.k)
    if isinstance(e, Div):
        num = _to_nf(e.num, idx)
        den = _to_nf(e.den, idx)
        if any(k for (_, k) in den):
            # denominator already carries B powers: only pure B^k / B^j cases
            (mono, k), = den.items() if len(den) == 1 else ((None, None),)
            if mono != () or den[(mono, k)] != 1:
                raise NotImplementedError("division outside the B-power algebra")
            return {(m, kk + k): c for (m, kk), c in num.items()}
        if len(den) == 1 and ((), 0) in den:
            c = den[((), 0)]
            return {key: v / c for key, v in num.items()}
        den_sorted = tuple(sorted(den.items()))
        for k in range(1, 16):
            if den_sorted == _b_power_poly(idx, k):
                return {(m, kk + k): c for (m, kk), c in num.items()}
        raise NotImplementedError("division outside the B-power algebra")
    raise TypeError(type(e))


def _canonical(nf: dict, idx) -> dict:
    """Collect like terms over a common power of B per non-u monomial."""
    groups = defaultdict(list)
    for (mono, k), c in nf.items():
        upart = tuple((key, p) for key, p in mono if key[0] == "u")
        rest = tuple((key, p) for key, p in mono if key[0] != "u")
        groups[rest].append((upart, k, c))
    out = {}
    for rest, items in groups.items():
        kmax = max(k for _, k, _ in items)
        acc = {}
        for upart, k, c in items:
            poly = {(upart, 0): c}
            if kmax > k:
                poly = _nf_mul(poly, dict(_b_power_poly(idx, kmax - k)))
            acc = _nf_add(acc, poly)
        poly = {_u_exponents(umono, idx): c for (umono, _), c in acc.items() if abs(c) > 1e-15}
        k = kmax
        while k > 0 and poly:
            quotient = _divide_by_b(poly, idx)
            if quotient is None:
                break
            poly, k = quotient, k - 1
        for ex, c in poly.items():
            umono = tuple((("u", m), p) for m, p in zip(idx, ex) if p)
            out[(_mono_mul(rest, umono), k)] = c
    return out


def _u_exponents(umono, idx):
    d = {key[1]: p for key, p in umono}
    return tuple(d.get(m, 0) for m in idx)


def _divide_by_b(poly: dict, idx):
    """Exact division of a polynomial in the u's by B; ``None`` if not divisible."""
    if len(idx) == 1:
        return dict(poly)
    b = {}
    for j in idx:
        b[tuple(0 if m == j else 1 for m in idx)] = 1.0
    lead_b = max(b)
    rem = {k: complex(v) for k, v in poly.items()}
    quot = {}
    scale = max(abs(v) for v in rem.values())
    while rem:
        lead = max(rem)
        c = rem[lead]
        shift = tuple(a - e for a, e in zip(lead, lead_b))
        if min(shift) < 0:
            return None
        quot[shift] = quot.get(shift, 0) + c
        for mono, cb in b.items():
            key = tuple(a + e for a, e in zip(shift, mono))
            rem[key] = rem.get(key, 0) - c * cb
            if abs(rem[key]) <= 1e-14 * scale:
                del rem[key]
    return quot


def _from_nf(nf: dict, idx) -> Expr:
    if not nf:
        return Const(0)
    bexpr = weight_B_expr(idx)
    order = sorted(nf.items(), key=lambda kv: (kv[0][1], _mono_key(kv[0][0])))
    terms = []
    for (mono, k), c in order:
        factors = []
        for (kind, m), p in sorted(mono, key=_print_key):
            leaf = Leaf(kind, m)
            factors.append(leaf if p == 1 else Pow(leaf, p))
        if c != 1 or not factors:
            factors.insert(0, Const(_clean(c)))
        num = factors[0] if len(factors) == 1 else Mul(tuple(factors))
        if k:
            num = Div(num, bexpr if k == 1 else Pow(bexpr, k))
        terms.append(num)
    return terms[0] if len(terms) == 1 else Add(tuple(terms))


def _print_key(item):
    (kind, m), _ = item
    return (("dS", "S", "d", "dc", "u").index(kind), m)


def _mono_key(mono):
    rank = {k: i for i, k in enumerate(("dS", "S", "d", "dc", "u"))}
    return tuple((rank[kind], m, -p) for (kind, m), p in sorted(mono, key=lambda t: (t[0][1], rank[t[0][0]])))


def _clean(c):
    c = complex(c)
    if c.imag == 0:
        r = c.real
        return int(r) if r == int(r) else r
    return c


def simplify(e: Expr, idx) -> Expr:
    """Constant folding and like-term collection in the B-power algebra."""
    return _from_nf(_canonical(_to_nf(e, tuple(idx)), tuple(idx)), tuple(idx))


def expr_size(e: Expr) -> int:
    if isinstance(e, (Const, Leaf)):
        return 1
    if isinstance(e, Add):
        return 1 + sum(expr_size(t) for t in e.terms)
    if isinstance(e, Mul):
        return 1 + sum(expr_size(t) for t in e.factors)
    if isinstance(e, Div):
        return 1 + expr_size(e.num) + expr_size(e.den)
    if isinstance(e, Pow):
        return 1 + expr_size(e.base)
    raise TypeError(type(e))


# -- index sets and e-kernels ------------------------------------------------------

@dataclass(frozen=True)
class IndexSet:
    """Strictly increasing factor indices (1-based) with a distinguished position."""

    indices: tuple
    j: int

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        object.__setattr__(self, "indices", idx)
        if not idx or any(b <= a for a, b in zip(idx, idx[1:])) or idx[0] < 1:
            raise ValueError(f"indices must be strictly increasing and >= 1: {idx}")
        if not 1 <= self.j <= len(idx):
            raise ValueError(f"position j={self.j} outside 1..{len(idx)}")

    @property
    def s(self) -> int:
        return len(self.indices)

    @property
    def distinguished(self) -> int:
        return self.indices[self.j - 1]

    @property
    def others(self) -> tuple:
        return tuple(i for i in self.indices if i != self.distinguished)


def index_sets(n: int, max_n: int = 4):
    """Every strictly increasing index tuple of ``1..n`` in lexicographic order by size."""
    if n > max_n:
        raise ValueError(f"n={n} exceeds the configured cap {max_n}")
    for s in range(1, n + 1):
        yield from itertools.combinations(range(1, n + 1), s)


def e_kernel_expr(idx: IndexSet) -> Expr:
    s_leaves = tuple(Leaf("S", m) for m in idx.indices)
    if idx.s == 1:
        return s_leaves[0]
    num = Mul(s_leaves + tuple(Leaf("u", m) for m in idx.others))
    return Div(num, weight_B_expr(idx.indices))


@lru_cache(maxsize=None)
def e_kernel_derivative(idx: IndexSet) -> Expr:
    """``d^{s-1} e / dzbar_m`` over every ``m`` in idx except the distinguished one."""
    e = e_kernel_expr(idx)
    for m in idx.others:
        e = simplify(diff_zbar(e, m), idx.indices)
    return e


def lower(e: Expr, indices) -> list:
    """Flatten to ``[(coef, {m: (pS, pdS, pd, pdc, pu)}, k)]`` for quadrature."""
    indices = tuple(indices)
    nf = _canonical(_to_nf(e, indices), indices)
    out = []
    for (mono, k), c in sorted(nf.items(), key=lambda kv: (kv[0][1], _mono_key(kv[0][0]))):
        exps = {m: [0, 0, 0, 0, 0] for m in indices}
        for (kind, m), p in mono:
            exps[m][LEAF_KINDS.index(kind)] += p
        out.append((complex(c), {m: tuple(v) for m, v in exps.items()}, k))
    return out


# -- numeric evaluation ----------------------------------------------------------------

def eval_expr(e: Expr, leaves: dict, idx=None):
    """Evaluate a tree given ``leaves[(kind, m)]`` values (arrays broadcast)."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Leaf):
        return leaves[(e.kind, e.m)]
    if isinstance(e, Add):
        out = 0
        for t in e.terms:
            out = out + eval_expr(t, leaves)
        return out
    if isinstance(e, Mul):
        out = 1
        for f in e.factors:
            out = out * eval_expr(f, leaves)
        return out
    if isinstance(e, Div):
        den = eval_expr(e.den, leaves)
        if np.any(np.asarray(den) == 0):
            raise SingularityError("division by zero on the diagonal set")
        return eval_expr(e.num, leaves) / den
    if isinstance(e, Pow):
        return eval_expr(e.base, leaves) ** e.k
    raise TypeError(type(e))


def leaf_values(ctxs, indices, w, z) -> dict:
    """Generator values at points; ``w``, ``z`` are sequences over all factors (1-based idx)."""
    vals = {}
    for m in indices:
        ctx = ctxs[m - 1]
        wm = w[m - 1]
        zm = np.asarray(z[m - 1], dtype=complex)
        d = wm - zm
        vals[("S", m)] = ctx.S(wm, zm)
        vals[("dS", m)] = ctx.dS(wm, zm)
        vals[("d", m)] = d
        vals[("dc", m)] = np.conj(d)
        vals[("u", m)] = np.abs(d) ** 2
    return vals


def evaluate(e: Expr, ctxs, indices, w, z):
    return eval_expr(e, leaf_values(ctxs, indices, w, z))


def weight_B(w, z):
    """``B(w, z) = sum_j prod_{m != j} |w_m - z_m|^2``; equals 1 for a single factor."""
    w = [np.asarray(x, dtype=complex) for x in w]
    z = [np.asarray(x, dtype=complex) for x in z]
    u = [np.abs(a - b) ** 2 for a, b in zip(w, z)]
    k = len(u)
    if k == 1:
        return np.ones_like(u[0])
    total = 0
    for j in range(k):
        p = 1
        for m in range(k):
            if m != j:
                p = p * u[m]
        total = total + p
    return total


def e_kernel(ctxs, idx: IndexSet, w, z):
    """Direct evaluation of ``e^{idx}_{i_j}(w, z)`` from its defining formula."""
    sel = [m - 1 for m in idx.indices]
    ws = [w[i] for i in sel]
    zs = [np.asarray(z[i], dtype=complex) for i in sel]
    prod_s = 1
    for m, wi, zi in zip(idx.indices, ws, zs):
        prod_s = prod_s * ctxs[m - 1].S(wi, zi)
    if idx.s == 1:
        return prod_s
    b = weight_B(ws, zs)
    if np.any(b == 0):
        raise SingularityError("B vanishes: two or more factors coincide with w")
    num = 1
    for m, wi, zi in zip(idx.indices, ws, zs):
        if m != idx.distinguished:
            num = num * np.abs(wi - zi) ** 2
    return prod_s * num / b
