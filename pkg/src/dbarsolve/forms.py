"""(0,1)-forms ``f = sum_j f_j dzbar_j`` on product domains.

Two variants are supported.  :class:`PolyForm` holds exact polynomial data in
``z`` and ``zbar`` and is checked for dbar-closedness symbolically.
:class:`SampledForm` holds each component as a sum of separable terms
``c * g_1(z_1) ... g_n(z_n)`` with every ``g_l`` sampled on a Cartesian grid
over factor ``l``; values between grid points come from spline interpolation.

Both variants expose :meth:`separable_terms`, the per-factor view used by the
product operators.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import ClosednessError, ConfigError

# -- polynomial forms -----------------------------------------------------------


def _poly_dzbar(poly: dict, m: int) -> dict:
    """``d/dzbar_m`` of ``{(a, b): c}`` (0-based factor ``m``)."""
    out = {}
    for (a, b), c in poly.items():
        if b[m] == 0:
            continue
        nb = b[:m] + (b[m] - 1,) + b[m + 1:]
        key = (a, nb)
        out[key] = out.get(key, 0) + c * b[m]
    return {k: v for k, v in out.items() if v != 0}


def _poly_eval(poly: dict, z):
    """Evaluate at coordinates ``z[l]`` (arrays broadcast together)."""
    z = [np.asarray(x, dtype=complex) for x in z]
    zc = [np.conj(x) for x in z]
    total = 0
    for (a, b), c in poly.items():
        term = c
        for l, (p, q) in enumerate(zip(a, b)):
            if p:
                term = term * z[l] ** p
            if q:
                term = term * zc[l] ** q
        total = total + term
    return total + np.zeros(np.broadcast(*z).shape, dtype=complex) if z else total


class PolyForm:
    """Polynomial (0,1)-form.

    Parameters
    ----------
    n : int
        Number of complex variables.
    components : sequence of length n
        Component ``f_j`` as a mapping ``{(a, b): coef}`` or a list of
        ``(coef, a, b)`` with ``a`` and ``b`` the z- and zbar-exponent tuples.
    check : bool
        Verify closedness ``df_j/dzbar_k = df_k/dzbar_j``.
    """

    variant = "poly"

    def __init__(self, n: int, components, check: bool = True):
        if len(components) != n:
            raise ValueError(f"expected {n} components, got {len(components)}")
        comps = []
        for comp in components:
            items = comp.items() if isinstance(comp, dict) else (((a, b), c) for c, a, b in comp)
            poly = {}
            for (a, b), c in items:
                a, b = tuple(int(x) for x in a), tuple(int(x) for x in b)
                if len(a) != n or len(b) != n or min(a + b, default=0) < 0:
                    raise ValueError(f"bad exponents {a}, {b} for n={n}")
                poly[(a, b)] = poly.get((a, b), 0) + complex(c)
            comps.append({k: v for k, v in poly.items() if v != 0})
        self.n = n
        self.components = tuple(comps)
        if check:
            self.check_closed()

    @classmethod
    def dbar(cls, n: int, g) -> "PolyForm":
        """The exact form ``dbar g`` of a polynomial ``g`` given as ``{(a, b): coef}`` or terms."""
        items = g.items() if isinstance(g, dict) else (((tuple(a), tuple(b)), c) for c, a, b in g)
        poly = {}
        for (a, b), c in items:
            key = (tuple(a), tuple(b))
            poly[key] = poly.get(key, 0) + complex(c)
        return cls(n, [_poly_dzbar(poly, m) for m in range(n)], check=False)

    def check_closed(self):
        for j in range(self.n):
            for k in range(j + 1, self.n):
                lhs = _poly_dzbar(self.components[j], k)
                rhs = _poly_dzbar(self.components[k], j)
                keys = set(lhs) | set(rhs)
                bad = max((abs(lhs.get(q, 0) - rhs.get(q, 0)) for q in keys), default=0.0)
                if bad > 1e-12:
                    raise ClosednessError(
                        f"form is not dbar-closed: df_{j + 1}/dzbar_{k + 1} != df_{k + 1}/dzbar_{j + 1}"
                    )

    @property
    def degree(self) -> int:
        return max((sum(a) + sum(b) for c in self.components for a, b in c), default=0)

    def is_zero(self) -> bool:
        return not any(self.components)

    def derivative(self, j: int, ms) -> dict:
        """``d^k f_j / dzbar_{m_1} ... dzbar_{m_k}`` (1-based indices) as a polynomial."""
        poly = dict(self.components[j - 1])
        for m in ms:
            poly = _poly_dzbar(poly, m - 1)
        return poly

    def component_values(self, j: int, z):
        return _poly_eval(self.components[j - 1], z)

    def separable_terms(self, j: int, poly: dict | None = None):
        """``[(coef, [g_1, ..., g_n])]`` with ``g_l`` vectorized callables or ``None`` for 1."""
        poly = self.components[j - 1] if poly is None else poly
        out = []
        for (a, b), c in sorted(poly.items()):
            out.append((c, [_monomial(p, q) for p, q in zip(a, b)]))
        return out

    def scaled(self, alpha) -> "PolyForm":
        return PolyForm(self.n, [{k: alpha * v for k, v in c.items()} for c in self.components], check=False)

    def __add__(self, other: "PolyForm") -> "PolyForm":
        comps = []
        for a, b in zip(self.components, other.components):
            d = dict(a)
            for k, v in b.items():
                d[k] = d.get(k, 0) + v
            comps.append(d)
        return PolyForm(self.n, comps, check=False)

    # -- text format ---------------------------------------------------------
    def to_text(self) -> str:
        lines = [f"# polynomial (0,1)-form, n={self.n}"]
        for j, comp in enumerate(self.components, 1):
            lines.append(f"component {j}")
            for (a, b), c in sorted(comp.items()):
                lines.append(
                    f"{c.real!r} {c.imag!r} | {' '.join(map(str, a))} | {' '.join(map(str, b))}"
                )
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, n: int | None = None, check: bool = True) -> "PolyForm":
        """Parse the file format or the inline ``poly:`` syntax.

        File format: ``component j`` headers followed by term lines
        ``re im | a_1 .. a_n | b_1 .. b_n``.  Inline format: components
        separated by ``;``, terms by ``,``, e.g. ``poly: 1|0 0|0 1 ; 1|0 0|1 0``.
        """
        text = text.strip()
        if text.startswith("poly:"):
            blocks = [[t for t in part.split(",") if t.strip()] for part in text[5:].split(";")]
        else:
            blocks, cur = [], None
            for raw in text.splitlines():
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if line.lower().startswith("component"):
                    cur = []
                    blocks.append(cur)
                    continue
                if cur is None:
                    raise ConfigError("term line before the first 'component' header")
                cur.append(line)
        comps = [[_parse_term(t) for t in block] for block in blocks]
        sizes = {len(a) for comp in comps for _, a, _ in comp}
        if n is None:
            if len(sizes) > 1:
                raise ConfigError("inconsistent exponent lengths in form text")
            n = sizes.pop() if sizes else len(comps)
        if len(comps) != n:
            raise ConfigError(f"form has {len(comps)} components but exponents imply n={n}")
        try:
            return cls(n, comps, check=check)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def __repr__(self):
        return f"PolyForm(n={self.n}, terms={[len(c) for c in self.components]})"


def _parse_term(text: str):
    parts = [p.strip() for p in text.split("|")]
    if len(parts) != 3:
        raise ConfigError(f"term needs 'coef | z-exponents | zbar-exponents': {text!r}")
    try:
        cparts = parts[0].split()
        if len(cparts) == 2:
            coef = complex(float(cparts[0]), float(cparts[1]))
        elif len(cparts) == 1:
            coef = complex(cparts[0].replace("i", "j"))
        else:
            raise ValueError(parts[0])
        a = tuple(int(x) for x in parts[1].split())
        b = tuple(int(x) for x in parts[2].split())
    except ValueError as exc:
        raise ConfigError(f"cannot parse term {text!r}: {exc}") from exc
    if len(a) != len(b):
        raise ConfigError(f"exponent lengths differ in term {text!r}")
    return coef, a, b


def _monomial(p: int, q: int):
    if p == 0 and q == 0:
        return None

    def g(z):
        z = np.asarray(z, dtype=complex)
        return z**p * np.conj(z) ** q

    return g


# -- sampled forms ------------------------------------------------------------


@dataclass(frozen=True)
class FactorGrid:
    """Uniform ``m x m`` grid over the box ``[x0, x1] x [y0, y1]``."""

    x0: float
    x1: float
    y0: float
    y1: float
    m: int

    @classmethod
    def around(cls, domain, m: int, margin: float = 0.3) -> "FactorGrid":
        t = np.linspace(0, 2 * np.pi, 512, endpoint=False)
        p = domain.gamma(t)
        return cls(p.real.min() - margin, p.real.max() + margin,
                   p.imag.min() - margin, p.imag.max() + margin, int(m))

    @property
    def hx(self) -> float:
        return (self.x1 - self.x0) / (self.m - 1)

    @property
    def hy(self) -> float:
        return (self.y1 - self.y0) / (self.m - 1)

    def points(self) -> np.ndarray:
        """Grid points, ``[ix, iy]`` indexing."""
        x = np.linspace(self.x0, self.x1, self.m)
        y = np.linspace(self.y0, self.y1, self.m)
        return x[:, None] + 1j * y[None, :]

    def sample(self, g) -> np.ndarray:
        return np.asarray(g(self.points()), dtype=complex)

    def interpolate(self, values: np.ndarray, z, order: int = 1):
        z = np.asarray(z, dtype=complex)
        coords = np.stack([(z.real - self.x0) / self.hx, (z.imag - self.y0) / self.hy]).reshape(2, -1)
        re = ndimage.map_coordinates(values.real, coords, order=order, mode="nearest")
        im = ndimage.map_coordinates(values.imag, coords, order=order, mode="nearest")
        return (re + 1j * im).reshape(z.shape)


class SampledForm:
    """Form whose components are sums of separable grid-sampled terms.

    Parameters
    ----------
    grids : sequence of FactorGrid
        One grid per factor.
    components : sequence of length n
        Each component is a list of ``(coef, arrays)`` with ``arrays[l]`` an
        ``m x m`` sample array on ``grids[l]`` or ``None`` (constant 1).
    order : int
        Spline order used to interpolate between grid points.
    """

    variant = "sampled"

    def __init__(self, grids, components, order: int = 1):
        self.grids = tuple(grids)
        self.n = len(self.grids)
        if len(components) != self.n:
            raise ValueError(f"expected {self.n} components, got {len(components)}")
        comps = []
        for comp in components:
            terms = []
            for coef, arrays in comp:
                arrays = list(arrays)
                if len(arrays) != self.n:
                    raise ValueError("each term needs one array (or None) per factor")
                for a, g in zip(arrays, self.grids):
                    if a is not None and np.shape(a) != (g.m, g.m):
                        raise ValueError(f"sample array shape {np.shape(a)} does not match grid {g.m}x{g.m}")
                terms.append((complex(coef), [None if a is None else np.asarray(a, dtype=complex) for a in arrays]))
            comps.append(terms)
        self.components = tuple(comps)
        self.order = order

    @classmethod
    def from_functions(cls, domains, m: int, components, margin: float = 0.3, order: int = 1):
        """Sample ``components[j] = [(coef, [g_1 or None, ...]), ...]`` on grids around each factor."""
        grids = [FactorGrid.around(d, m, margin) for d in domains]
        comps = []
        for comp in components:
            comps.append([(c, [None if g is None else grid.sample(g) for g, grid in zip(gs, grids)])
                          for c, gs in comp])
        return cls(grids, comps, order)

    def is_zero(self) -> bool:
        return not any(c != 0 for comp in self.components for c, _ in comp)

    def separable_terms(self, j: int):
        out = []
        for coef, arrays in self.components[j - 1]:
            out.append((coef, [None if a is None else self._interp(l, a) for l, a in enumerate(arrays)]))
        return out

    def _interp(self, l, a):
        grid, order = self.grids[l], self.order
        return lambda z: grid.interpolate(a, z, order)

    def component_values(self, j: int, z):
        z = [np.asarray(x, dtype=complex) for x in z]
        shape = np.broadcast(*z).shape
        total = np.zeros(shape, dtype=complex)
        for coef, gs in self.separable_terms(j):
            term = np.full(shape, coef, dtype=complex)
            for g, x in zip(gs, z):
                if g is not None:
                    term = term * np.broadcast_to(g(x), shape)
            total += term
        return total

    def map_terms(self, fn) -> "SampledForm":
        """New form with every sample array replaced by ``fn(l, array)``."""
        comps = [[(c, [None if a is None else fn(l, a) for l, a in enumerate(arrs)]) for c, arrs in comp]
                 for comp in self.components]
        return SampledForm(self.grids, comps, self.order)

    def closedness_defect(self) -> float:
        """Max of ``|df_j/dzbar_k - df_k/dzbar_j|`` by centered differences on the grids.

        Only mixed terms contribute: a separable term depends on ``z_k`` only
        through its factor-``k`` array.
        """
        worst = 0.0
        for j in range(self.n):
            for k in range(j + 1, self.n):
                a = self._dzbar_norm(j, k)
                b = self._dzbar_norm(k, j)
                worst = max(worst, abs(a - b))
        return worst

    def _dzbar_norm(self, j, k):
        total = 0.0
        for c, arrs in self.components[j]:
            a = arrs[k]
            if a is None:
                continue
            g = self.grids[k]
            dx = np.gradient(a, g.hx, axis=0)
            dy = np.gradient(a, g.hy, axis=1)
            total += abs(c) * float(np.max(np.abs(0.5 * (dx + 1j * dy))))
        return total

    # -- CSV format ------------------------------------------------------------
    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        buf.write(f"# sampled-form n={self.n} order={self.order}\n")
        for l, g in enumerate(self.grids, 1):
            box = " ".join(format(float(v), ".17g") for v in (g.x0, g.x1, g.y0, g.y1))
            buf.write(f"# grid {l} {box} {g.m}\n")
        for j, comp in enumerate(self.components, 1):
            for t, (c, _) in enumerate(comp):
                buf.write(f"# term {j} {t} {c.real:.17g} {c.imag:.17g}\n")
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["component", "term", "factor", "ix", "iy", "re", "im"])
        for j, comp in enumerate(self.components, 1):
            for t, (_, arrs) in enumerate(comp):
                for l, a in enumerate(arrs, 1):
                    if a is None:
                        continue
                    for ix in range(a.shape[0]):
                        for iy in range(a.shape[1]):
                            v = a[ix, iy]
                            wr.writerow([j, t, l, ix, iy, format(v.real, ".17g"), format(v.imag, ".17g")])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, path) -> "SampledForm":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"form file not found: {path}")
        grids, coefs, n, order = {}, {}, None, 1
        rows = []
        for line in path.read_text().splitlines():
            if line.startswith("#"):
                tok = line[1:].split()
                if tok[0] == "sampled-form":
                    kv = dict(t.split("=") for t in tok[1:])
                    n, order = int(kv["n"]), int(kv.get("order", 1))
                elif tok[0] == "grid":
                    grids[int(tok[1])] = FactorGrid(*map(float, tok[2:6]), int(tok[6]))
                elif tok[0] == "term":
                    coefs[(int(tok[1]), int(tok[2]))] = complex(float(tok[3]), float(tok[4]))
            elif line.strip():
                rows.append(line)
        if n is None or len(grids) != n:
            raise ConfigError(f"{path}: missing sampled-form header or grid lines")
        reader = csv.reader(rows[1:])
        arrays = {}
        for j, t, l, ix, iy, re, im in reader:
            key = (int(j), int(t), int(l))
            if key not in arrays:
                m = grids[int(l)].m
                arrays[key] = np.zeros((m, m), dtype=complex)
            arrays[key][int(ix), int(iy)] = complex(float(re), float(im))
        comps = [[] for _ in range(n)]
        for (j, t), c in sorted(coefs.items()):
            comps[j - 1].append((c, [arrays.get((j, t, l)) for l in range(1, n + 1)]))
        return cls([grids[l] for l in range(1, n + 1)], comps, order)


def load_form(spec: str, n: int | None = None):
    """Form from an inline ``poly:`` string or a file path (``.csv`` means sampled)."""
    spec = spec.strip()
    if spec.startswith("poly:"):
        return PolyForm.from_text(spec, n)
    path = Path(spec)
    if not path.exists():
        raise ConfigError(f"form file not found: {path}")
    if path.suffix.lower() == ".csv":
        return SampledForm.from_csv(path)
    return PolyForm.from_text(path.read_text(), n)
