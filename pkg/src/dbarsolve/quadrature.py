"""Area quadrature on planar domains and singular rules for product domains.

Regular rules are Gauss-Legendre in the radius times the trapezoidal rule in
the angle.  Singular rules are polar about the singular point, which turns
``1/(z - w)`` into a bounded integrand.  On a product of ``s`` factors the
kernels are singular wherever two or more factors coincide; the product rule
splits the unit cube of scaled radii into the ``s!`` ordered simplices and maps
each with a Duffy-type substitution so that every such set becomes a face
of a cube where the integrand is smooth.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError, PoisonedResultError
from .domain_geometry import PlanarDomain


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    kind: str
    domain: PlanarDomain | None = None
    nr: int = 0
    nt: int = 0
    center: complex | None = None

    @property
    def size(self) -> int:
        return self.nodes.size

    def integrate(self, integrand):
        return integrate(self, integrand)


@lru_cache(maxsize=64)
def gauss01(n: int):
    """Gauss-Legendre nodes and weights on ``[0, 1]``."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def trapezoid_angles(nt: int) -> np.ndarray:
    return 2 * np.pi * np.arange(nt) / nt


def graded_angles(nt: int, phi0: float = 0.0, kappa: float = 1.0):
    """Angles clustered about ``phi0`` and their trapezoidal weights.

    Uses ``theta = phi0 + 2 arctan(kappa tan((phi - phi0) / 2))`` on equispaced
    ``phi``, a periodic Moebius-type map; ``kappa = 1`` is the identity.  Small
    ``kappa`` resolves the ray-length function of a point close to the boundary
    in the direction ``phi0``.
    """
    phi = trapezoid_angles(nt) + np.pi / nt
    if kappa >= 1.0:
        return phi - np.pi / nt, np.full(nt, 2 * np.pi / nt)
    half = 0.5 * (phi - np.pi)
    theta = phi0 + np.pi + 2 * np.arctan(np.tan(half) / kappa)
    c, s = np.cos(half), np.sin(half)
    jac = (1.0 / kappa) / (c * c + (s / kappa) ** 2)
    return np.mod(theta, 2 * np.pi), jac * (2 * np.pi / nt)


def angle_grading(domain: PlanarDomain, w: complex, scale: float = 2.0):
    """``(phi0, kappa)`` for :func:`graded_angles` about an interior point ``w``."""
    if domain.is_disc:
        dist = 1.0 - abs(w)
        phi0 = float(np.angle(w)) if abs(w) > 0 else 0.0
    else:
        t, dist = domain._nearest(w)
        phi0 = float(np.angle(domain.gamma(t) - w))
    kappa = min(1.0, scale * np.sqrt(max(dist, 1e-300) / max(domain.diameter, 1e-300)))
    return phi0, kappa


def disc_rule(nr: int, nt: int, domain: PlanarDomain | None = None) -> QuadratureRule:
    """Polar tensor rule on the unit disc or a star-shaped Jordan domain.

    Jordan domains use radial blending ``c + r (gamma(t) - c)`` from the
    domain's star center, so they must be star-shaped about it.
    """
    if nr < 4 or nt < 4:
        raise ValueError("disc_rule needs nr, nt >= 4")
    domain = PlanarDomain.unit_disc() if domain is None else domain
    r, wr = gauss01(nr)
    t = trapezoid_angles(nt)
    dt = 2 * np.pi / nt
    if domain.is_disc:
        nodes = np.outer(r, np.exp(1j * t))
        weights = np.outer(r * wr, np.full(nt, dt))
    else:
        c = domain.center
        if not domain.is_star_shaped_about(c):
            raise DomainError("area quadrature needs a domain star-shaped about its center")
        g = domain.gamma(t) - c
        jac = np.imag(np.conj(g) * domain.dgamma(t))
        nodes = c + np.outer(r, g)
        weights = np.outer(r * wr, jac * dt)
    return QuadratureRule(nodes.ravel(), weights.ravel(), "polar-regular", domain, nr, nt, domain.center)


def singular_rule(base: QuadratureRule, w0: complex, nr: int | None = None, nt: int | None = None) -> QuadratureRule:
    """Polar rule centered at ``w0`` covering the whole domain of ``base``.

    Radii run from ``w0`` to the boundary along each ray, so ``rho * 1/(z-w0)``
    is smooth and simple poles at ``w0`` integrate spectrally.
    """
    domain = base.domain
    nr = base.nr if nr is None else nr
    nt = base.nt if nt is None else nt
    if domain.contains(w0) != "interior":
        raise DomainError(f"singular point {w0} is not interior")
    tau, wt = gauss01(nr)
    th = trapezoid_angles(nt)
    rad = domain.ray_length(w0, th)
    rho = np.outer(tau, rad)
    nodes = w0 + rho * np.exp(1j * th)[None, :]
    weights = np.outer(tau * wt, rad**2) * (2 * np.pi / nt)
    return QuadratureRule(nodes.ravel(), weights.ravel(), "polar-singular", domain, nr, nt, complex(w0))


def boundary_rule(domain: PlanarDomain, n: int) -> QuadratureRule:
    """Trapezoidal arclength rule on the boundary curve."""
    t = trapezoid_angles(n)
    return QuadratureRule(domain.gamma(t), np.abs(domain.dgamma(t)) * 2 * np.pi / n,
                          "boundary-trapezoid", domain, 0, n)


def integrate(rule: QuadratureRule, integrand) -> complex:
    """``sum_i w_i g(z_i)`` in fixed radial-major order."""
    vals = integrand(rule.nodes) if callable(integrand) else integrand
    vals = np.broadcast_to(np.asarray(vals), rule.nodes.shape)
    bad = ~np.isfinite(vals)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise PoisonedResultError(f"non-finite integrand at node {i} ({rule.nodes[i]})")
    return complex(np.sum(rule.weights * vals))


def integrate_product(rules, integrand) -> complex:
    """Tensor-product quadrature; ``integrand`` receives broadcastable node grids."""
    n = len(rules)
    grids = []
    for i, r in enumerate(rules):
        shape = [1] * n
        shape[i] = r.size
        grids.append(r.nodes.reshape(shape))
    vals = np.asarray(integrand(*grids))
    w = rules[0].weights
    for r in rules[1:]:
        w = np.multiply.outer(w, r.weights)
    vals = np.broadcast_to(vals, w.shape)
    if not np.all(np.isfinite(vals)):
        raise PoisonedResultError("non-finite integrand in product quadrature")
    return complex(np.sum(w * vals))


# -- singular product rules ---------------------------------------------------

@dataclass(frozen=True)
class DuffyTable:
    """Nodes of the ordered-simplex substitution on ``[0,1]^s``.

    ``tau`` lists every distinct scaled radius (products of ``k`` Gauss nodes
    for ranks ``k = 1..s``); ``index[d, l]`` points into ``tau`` for factor
    ``l`` at node ``d``, and ``weight[d]`` carries the Gauss weights and the
    substitution Jacobian.
    """

    s: int
    nr: int
    tau: np.ndarray
    index: np.ndarray
    weight: np.ndarray


@lru_cache(maxsize=32)
def duffy_table(s: int, nr: int, grade: int = 1) -> DuffyTable:
    """Ordered-simplex table with ``nr`` Gauss nodes per coordinate.

    The first coordinate is the largest scaled radius; the others are ratios
    ``y_q`` in ``[0, 1]``, optionally graded as ``y = t^grade`` toward 0, which
    resolves ratios of very different ray lengths across factors.
    """
    y, wy = gauss01(nr)
    if grade > 1:
        yr, wyr = y**grade, wy * grade * y ** (grade - 1)
    else:
        yr, wyr = y, wy
    taus, offsets = [], []
    off = 0
    for k in range(1, s + 1):
        offsets.append(off)
        vals = np.ones(1)
        for q in range(k):
            vals = np.multiply.outer(vals, y if q == 0 else yr).ravel()
        taus.append(vals)
        off += vals.size
    tau = np.concatenate(taus)

    multi = np.array(list(itertools.product(range(nr), repeat=s)), dtype=np.int64)
    wbase = np.ones(len(multi))
    for q in range(s):
        yy, ww = (y, wy) if q == 0 else (yr, wyr)
        wbase *= ww[multi[:, q]] * yy[multi[:, q]] ** (s - 1 - q)
    # flat index of the prefix (i_1..i_k) in [nr]^k
    prefix = np.zeros((len(multi), s), dtype=np.int64)
    acc = np.zeros(len(multi), dtype=np.int64)
    for k in range(s):
        acc = acc * nr + multi[:, k]
        prefix[:, k] = offsets[k] + acc

    idx_blocks, w_blocks = [], []
    for perm in itertools.permutations(range(s)):
        ind = np.empty((len(multi), s), dtype=np.int64)
        for rank, factor in enumerate(perm):
            ind[:, factor] = prefix[:, rank]
        idx_blocks.append(ind)
        w_blocks.append(wbase)
    index = np.ascontiguousarray(np.concatenate(idx_blocks))
    weight = np.concatenate(w_blocks)
    return DuffyTable(s, nr, tau, index, weight)


@dataclass
class PolarFactor:
    """Polar grid of one factor about the target coordinate ``w``.

    Points are ``z = w + R(theta) tau e^{i theta}`` for every angle and every
    scaled radius in a :class:`DuffyTable`.  ``jac`` is the area element
    ``R^2 tau dtau-free dtheta`` factor (Gauss and Duffy weights live in the
    table).
    """

    domain: PlanarDomain
    w: complex
    theta: np.ndarray
    radius: np.ndarray
    tau: np.ndarray
    z: np.ndarray
    jac: np.ndarray

    @classmethod
    def build(cls, domain: PlanarDomain, w: complex, nt: int, tau: np.ndarray) -> "PolarFactor":
        th = trapezoid_angles(nt)
        rad = domain.ray_length(w, th)
        e = np.exp(1j * th)
        z = w + np.outer(rad * e, tau)
        jac = np.outer(rad**2 * (2 * np.pi / nt), tau)
        return cls(domain, complex(w), th, rad, tau, z, jac)

    @property
    def diff(self) -> np.ndarray:
        """``w - z`` on the grid."""
        return self.w - self.z

    @property
    def u(self) -> np.ndarray:
        """``|w - z|^2`` on the grid."""
        return np.outer(self.radius**2, self.tau**2)
