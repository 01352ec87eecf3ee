"""One-variable kernels and the planar canonical solution operator.

For a planar domain ``D`` and a pole ``w`` inside it::

    H(w, z) = 1 / (2 pi i (z - w))          Cauchy kernel
    L(w, z) = harmonic in z, equal to H(w, z) for z on the boundary
    S(w, z) = L(w, z) - H(w, z)

``S`` vanishes on the boundary, and ``T f(w) = sigma * int S(w, z) f(z) 2i dA(z)``
is the canonical (Bergman-orthogonal) solution of ``du/dwbar = f``.  On the unit
disc ``L(w, z) = zbar / (2 pi i (1 - w zbar))``; other domains go through the
Nystrom solver.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .dirichlet_solver import DirichletSolver
from .errors import DomainError, NearBoundaryError, SingularityError
from .domain_geometry import PlanarDomain
from .quadrature import disc_rule, gauss01, singular_rule, trapezoid_angles

TWO_PI_I = 2j * np.pi


def cauchy_H(w, z):
    """``1 / (2 pi i (z - w))``; raises on ``z == w``."""
    w = np.asarray(w, dtype=complex)
    z = np.asarray(z, dtype=complex)
    d = z - w
    if np.any(d == 0):
        raise SingularityError("Cauchy kernel evaluated at z = w")
    out = 1.0 / (TWO_PI_I * d)
    return out if out.ndim else complex(out)


class KernelContext:
    """Kernel evaluator for one planar domain.

    Parameters
    ----------
    domain : PlanarDomain
    n_boundary : int
        Nystrom node count for Jordan domains; ignored for the disc.

    Notes
    -----
    Harmonic extensions of ``H(w, .)`` are cached per pole.  The cache is
    filled lazily by the owning process and never shared between workers.
    """

    def __init__(self, domain: PlanarDomain, n_boundary: int = 256):
        self.domain = domain
        self.solver = None if domain.is_disc else DirichletSolver(domain, n_boundary)
        self._ext = {}

    # -- pole bookkeeping -------------------------------------------------
    def _check_pole(self, w):
        arr = np.asarray(w, dtype=complex)
        if arr.ndim:
            # arrays of poles broadcast against z through the closed form only
            if not self.domain.is_disc:
                raise DomainError("array-valued poles are supported on the unit disc only")
            if np.any(np.abs(arr) >= 1.0 - self.domain.boundary_tol):
                raise DomainError("every pole must be an interior point")
            return arr
        w = complex(w)
        if self.domain.contains(w) != "interior":
            raise DomainError(f"pole {w} must be an interior point")
        return w

    def extension(self, w):
        w = self._check_pole(w)
        ext = self._ext.get(w)
        if ext is None:
            if len(self._ext) > 4096:
                self._ext.clear()
            ext = self.solver.extension(cauchy_H(w, self.solver.nodes))
            self._ext[w] = ext
        return ext

    def _on_boundary(self, z):
        if self.domain.is_disc:
            return np.abs(1.0 - np.abs(z)) <= self.domain.boundary_tol * 2
        return self.solver.node_distance(z) <= self.domain.boundary_tol * self.domain.diameter

    # -- kernels ------------------------------------------------------------
    def H(self, w, z):
        return cauchy_H(w, z)

    def L(self, w, z):
        """Harmonic extension of ``H(w, .)`` evaluated at ``z``."""
        w = self._check_pole(w)
        z = np.asarray(z, dtype=complex)
        if self.domain.is_disc:
            zc = np.conj(z)
            out = zc / (TWO_PI_I * (1.0 - w * zc))
        else:
            flat = z.reshape(-1)
            out = np.empty(flat.shape, dtype=complex)
            bd = self._on_boundary(flat)
            if bd.any():
                out[bd] = cauchy_H(w, flat[bd])
            if (~bd).any():
                out[~bd] = self.extension(w).value(flat[~bd], allow_near=True)
            out = out.reshape(z.shape)
        return out if out.ndim else complex(out)

    def S(self, w, z):
        """``L - H``; exactly zero on the boundary."""
        w = self._check_pole(w)
        z = np.asarray(z, dtype=complex)
        if np.any(z == w):
            raise SingularityError("S kernel evaluated at z = w")
        if self.domain.is_disc:
            # closed form of L - H; it carries the factor 1 - |z|^2 explicitly
            zc = np.conj(z)
            out = (1.0 - (z * zc).real) / (TWO_PI_I * (1.0 - w * zc) * (w - z))
            out = np.where(self._on_boundary(z), 0.0, out)
        else:
            flat = z.reshape(-1)
            out = np.zeros(flat.shape, dtype=complex)
            inner = ~self._on_boundary(flat)
            if inner.any():
                zi = flat[inner]
                out[inner] = self.extension(w).value(zi, allow_near=True) - cauchy_H(w, zi)
            out = out.reshape(z.shape)
        return out if out.ndim else complex(out)

    def dS(self, w, z):
        """``dS/dzbar = dL/dzbar`` (``H`` is holomorphic in ``z``)."""
        w = self._check_pole(w)
        z = np.asarray(z, dtype=complex)
        if np.any(z == w):
            raise SingularityError("S kernel derivative evaluated at z = w")
        if self.domain.is_disc:
            out = 1.0 / (TWO_PI_I * (1.0 - w * np.conj(z)) ** 2)
        else:
            out = self.extension(w).dzbar(z, allow_near=True)
        out = np.asarray(out)
        return out if out.ndim else complex(out)


def harmonic_L(ctx: KernelContext, w, z):
    return ctx.L(w, z)


def s_kernel(ctx: KernelContext, w, z):
    return ctx.S(w, z)


def s_kernel_dzbar(ctx: KernelContext, w, z):
    return ctx.dS(w, z)


# -- planar canonical solution operator ---------------------------------------------

@lru_cache(maxsize=1)
def orientation_sign() -> int:
    """Sign ``sigma`` making ``sigma * int S f 2i dA`` solve ``du/dwbar = f``.

    Fixed once by the disc with ``f = 1``, whose canonical solution is ``wbar``.
    """
    ctx = KernelContext(PlanarDomain.unit_disc())
    w = 0.3 + 0.2j
    rule = singular_rule(disc_rule(32, 32), w)
    raw = np.sum(rule.weights * ctx.S(w, rule.nodes) * 2j)
    ratio = raw / np.conj(w)
    if abs(abs(ratio) - 1.0) > 1e-6:
        raise SingularityError(f"orientation calibration failed (ratio {ratio})")
    return 1 if ratio.real > 0 else -1


@dataclass
class SolutionField:
    """Values of a solution ``u`` at interior target points.

    ``targets`` has shape ``(m, n)`` (one complex coordinate per factor).
    """

    targets: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.targets, dtype=complex)
        self.targets = t.reshape(len(t), -1) if t.ndim != 2 else t
        self.values = np.asarray(self.values, dtype=complex).reshape(-1)

    @property
    def n(self) -> int:
        return self.targets.shape[1]

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        head = []
        for j in range(1, self.n + 1):
            head += [f"re_w{j}", f"im_w{j}"]
        wr.writerow(head + ["re_u", "im_u"])
        for row, val in zip(self.targets, self.values):
            cells = []
            for c in row:
                cells += [_g17(c.real), _g17(c.imag)]
            wr.writerow(cells + [_g17(val.real), _g17(val.imag)])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, path) -> "SolutionField":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        data = np.array([[float(x) for x in r] for r in rows[1:]])
        n = (data.shape[1] - 2) // 2
        targets = data[:, 0:2 * n:2] + 1j * data[:, 1:2 * n:2]
        return cls(targets, data[:, -2] + 1j * data[:, -1])


def _g17(x: float) -> str:
    return format(float(x), ".17g")


def _point_values(f, z):
    if callable(f):
        return np.asarray(f(z), dtype=complex)
    return np.asarray(f.component_values(1, [z]), dtype=complex)


def check_resolution(domain: PlanarDomain, w: complex, nt: int, factor: float = 5.0):
    """Refuse targets so close to the boundary that ``nt`` angles cannot resolve the rays.

    The ray-length function from ``w`` has complex singularities at distance
    about ``sqrt(2 dist(w))`` from the real axis, so the trapezoidal rule in the
    angle needs ``nt * sqrt(2 dist) >= factor`` to reach several digits.
    """
    dist = domain.dist_to_boundary(w)
    if nt * np.sqrt(2 * dist) < factor:
        raise NearBoundaryError(
            f"target {w} is {dist:.3g} from the boundary; {nt} angles are not enough"
        )


def solve_planar_T(ctx: KernelContext, f, targets, nr: int = 128, nt: int = 128,
                   check: bool = True) -> SolutionField:
    """Canonical solution of ``du/dwbar = f`` on one planar domain.

    Parameters
    ----------
    ctx : KernelContext
    f : callable or form
        Vectorized ``f(z)`` or a one-component form.
    targets : array_like of complex
        Interior points.
    nr, nt : int
        Radial and angular sizes of the polar rule centered at each target.
    """
    sigma = orientation_sign()
    targets = np.atleast_1d(np.asarray(targets, dtype=complex)).ravel()
    tau, wt = gauss01(nr)
    th = trapezoid_angles(nt)
    e = np.exp(1j * th)
    out = np.empty(targets.shape, dtype=complex)
    for i, w in enumerate(targets):
        if ctx.domain.contains(w) != "interior":
            raise DomainError(f"target {w} is not interior")
        if check:
            check_resolution(ctx.domain, w, nt)
        rad = ctx.domain.ray_length(w, th)
        z = w + np.outer(tau, rad * e)
        wts = np.outer(tau * wt, rad**2) * (2 * np.pi / nt)
        vals = ctx.S(w, z) * _point_values(f, z)
        if not np.all(np.isfinite(vals)):
            raise SingularityError(f"non-finite integrand for target {w}")
        out[i] = sigma * 2j * np.sum(wts * vals)
    return SolutionField(targets[:, None], out, {"operator": "T", "n": 1, "nr": nr, "nt": nt})
