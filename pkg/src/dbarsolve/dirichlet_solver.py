"""Interior Dirichlet problem for the Laplacian on a smooth Jordan domain.

The harmonic extension is represented by a double-layer potential with a
complex density ``mu`` solving ``(I/2 + K) mu = g`` (trapezoidal Nystrom).
Writing ``u = h + conj(k)`` with ``h = C[mu]/2`` and ``k = C[conj(mu)]/2``
(``C`` the Cauchy integral) gives the z-bar derivative in closed form,
``du/dzbar = conj(k')``, and lets points close to the boundary be evaluated
with the barycentric Cauchy formula instead of the plain trapezoidal sum.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import DomainError, NearBoundaryError
from .domain_geometry import PlanarDomain


def _spectral_derivative_matrix(n: int) -> np.ndarray:
    """Matrix of d/dt on equispaced periodic samples (n even)."""
    k = np.fft.fftfreq(n, d=1.0 / n)
    k[n // 2] = 0.0
    eye = np.eye(n)
    return np.real(np.fft.ifft(1j * k[:, None] * np.fft.fft(eye, axis=0), axis=0))


class DirichletSolver:
    """Factorized Nystrom system for one planar domain.

    Parameters
    ----------
    domain : PlanarDomain
    n : int
        Number of boundary nodes (even, at least 32).
    near_factor : float
        Points closer to a boundary node than ``near_factor`` times the
        node spacing are "near"; plain evaluation refuses them.
    """

    def __init__(self, domain: PlanarDomain, n: int = 256, near_factor: float = 5.0):
        if n < 32 or n % 2:
            raise ValueError("node count must be even and at least 32")
        self.domain = domain
        self.n = n
        self.t = 2 * np.pi * np.arange(n) / n
        self.dt = 2 * np.pi / n
        self.nodes = domain.gamma(self.t)
        self.dnodes = domain.dgamma(self.t)
        dd = domain.ddgamma(self.t)
        self.spacing = domain.node_spacing(n)
        self.near_distance = near_factor * self.spacing

        diff = self.nodes[None, :] - self.nodes[:, None]
        np.fill_diagonal(diff, 1.0)
        q = self.dnodes[None, :] * self.dt / diff
        np.fill_diagonal(q, 0.0)
        kmat = np.real(q / (2j * np.pi))
        np.fill_diagonal(kmat, np.real(dd / (4j * np.pi * self.dnodes)) * self.dt)
        system = 0.5 * np.eye(n) + kmat
        cond = np.linalg.cond(system)
        if not np.isfinite(cond) or cond > 1e10:
            raise DomainError(f"near-singular Nystrom system (condition {cond:.3g})")
        self._lu = lu_factor(system)
        self.condition = float(cond)

        # interior boundary trace of the Cauchy integral: C^-[mu] = plemelj @ mu
        deriv = _spectral_derivative_matrix(n)
        plemelj = q - np.diag(q.sum(axis=1)) + self.dt * deriv
        self._plemelj = np.eye(n) + plemelj / (2j * np.pi)

    # -- densities and traces ----------------------------------------------
    def density(self, boundary_values) -> np.ndarray:
        g = np.asarray(boundary_values, dtype=complex)
        if g.shape[0] != self.n:
            raise ValueError(f"expected {self.n} boundary values, got {g.shape[0]}")
        return lu_solve(self._lu, g.real) + 1j * lu_solve(self._lu, g.imag)

    def extension(self, boundary_values) -> "HarmonicExtension":
        mu = self.density(boundary_values)
        h = 0.5 * (self._plemelj @ mu)
        k = 0.5 * (self._plemelj @ np.conj(mu))
        return HarmonicExtension(self, mu, h, k)

    def sample(self, func) -> np.ndarray:
        """Boundary values of ``func`` at the solver nodes."""
        return np.asarray(func(self.nodes), dtype=complex)

    # -- pointwise evaluation ----------------------------------------------
    def extend(self, boundary_values, z, allow_near: bool = False):
        return self.extension(boundary_values).value(z, allow_near=allow_near)

    def extend_dzbar(self, boundary_values, z, allow_near: bool = False):
        return self.extension(boundary_values).dzbar(z, allow_near=allow_near)

    def node_distance(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        flat = z.reshape(-1)
        out = np.empty(flat.shape)
        for s in range(0, flat.size, 4096):
            blk = flat[s:s + 4096]
            out[s:s + 4096] = np.min(np.abs(blk[:, None] - self.nodes[None, :]), axis=1)
        return out.reshape(z.shape)


def build(domain: PlanarDomain, n: int = 256) -> DirichletSolver:
    return DirichletSolver(domain, n)


@dataclass
class HarmonicExtension:
    """Harmonic extension ``u = h + conj(k)`` of one set of boundary values."""

    solver: DirichletSolver
    mu: np.ndarray
    h_trace: np.ndarray
    k_trace: np.ndarray

    def _split(self, z, allow_near):
        z = np.asarray(z, dtype=complex)
        flat = z.reshape(-1)
        dom = self.solver.domain
        if not np.all(dom.inside(flat) | (self.solver.node_distance(flat) < 1e-13)):
            raise DomainError("evaluation point outside the domain")
        near = self.solver.node_distance(flat) < self.solver.near_distance
        if near.any() and not allow_near:
            raise NearBoundaryError(
                "point within the near-boundary threshold "
                f"({self.solver.near_distance:.3g}); use the boundary data instead"
            )
        return z, flat, near

    def value(self, z, allow_near: bool = False):
        z, flat, near = self._split(z, allow_near)
        s = self.solver
        out = np.empty(flat.shape, dtype=complex)
        far = ~near
        if far.any():
            zf = flat[far]
            ker = np.real(s.dnodes[None, :] * s.dt / (2j * np.pi * (s.nodes[None, :] - zf[:, None])))
            out[far] = ker @ self.mu
        if near.any():
            zn = flat[near]
            out[near] = _barycentric(s, self.h_trace, zn) + np.conj(_barycentric(s, self.k_trace, zn))
        return out.reshape(z.shape) if z.ndim else complex(out[0])

    def dzbar(self, z, allow_near: bool = False):
        z, flat, near = self._split(z, allow_near)
        s = self.solver
        out = np.empty(flat.shape, dtype=complex)
        far = ~near
        if far.any():
            zf = flat[far]
            w = s.dnodes[None, :] * s.dt / (s.nodes[None, :] - zf[:, None]) ** 2
            out[far] = np.conj(0.5 * (w @ np.conj(self.mu)) / (2j * np.pi))
        if near.any():
            zn = flat[near]
            out[near] = np.conj(_barycentric_derivative(s, self.k_trace, zn))
        return out.reshape(z.shape) if z.ndim else complex(out[0])


def _barycentric(s: DirichletSolver, trace, z):
    diff = s.nodes[None, :] - z[:, None]
    hit = np.abs(diff) < 1e-14
    diff[hit] = 1.0
    w = s.dnodes[None, :] / diff
    res = (w @ trace) / w.sum(axis=1)
    rows, cols = np.nonzero(hit)
    res[rows] = trace[cols]
    return res


def _barycentric_derivative(s: DirichletSolver, trace, z):
    f = _barycentric(s, trace, z)
    diff = s.nodes[None, :] - z[:, None]
    w = s.dnodes[None, :] / diff
    return ((trace[None, :] - f[:, None]) * w / diff).sum(axis=1) / w.sum(axis=1)
