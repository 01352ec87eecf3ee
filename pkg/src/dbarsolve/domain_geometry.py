"""Planar domains bounded by trigonometric-polynomial curves, and their products.

A :class:`PlanarDomain` is either the unit disc or a Jordan domain whose
boundary is ``gamma(t) = sum_k c_k exp(i k t)``.  A :class:`ProductDomain`
is an ordered tuple of planar factors.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import ConfigError, DomainError

_VALIDATION_SAMPLES = 512
_DIST_SAMPLES = 4096


@dataclass(frozen=True)
class PlanarDomain:
    """Bounded simply connected planar domain with a smooth boundary.

    Parameters
    ----------
    kind : {"disc", "jordan"}
        ``"disc"`` is the unit disc with closed-form kernels.
    coeffs : tuple of (int, complex)
        Fourier coefficients of the boundary curve (jordan kind only).
    seed : complex, optional
        Interior point used for the orientation check and as the star
        center for area quadrature.  Defaults to the mean ``c_0``.
    boundary_tol : float
        Relative width of the boundary band used by :meth:`contains`.
    """

    kind: str = "disc"
    coeffs: tuple = ()
    seed: complex | None = None
    boundary_tol: float = 1e-12
    _checked: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind == "disc":
            object.__setattr__(self, "coeffs", ((1, 1.0 + 0j),))
        elif self.kind == "jordan":
            if not self.coeffs:
                raise DomainError("jordan domain needs boundary coefficients")
            merged: dict[int, complex] = {}
            for k, c in self.coeffs:
                merged[int(k)] = merged.get(int(k), 0j) + complex(c)
            object.__setattr__(
                self, "coeffs", tuple(sorted((k, c) for k, c in merged.items() if c != 0))
            )
            self._validate()
        else:
            raise DomainError(f"unknown domain kind {self.kind!r}")

    # -- constructors -----------------------------------------------------
    @classmethod
    def unit_disc(cls) -> "PlanarDomain":
        return cls("disc")

    @classmethod
    def jordan(cls, coeffs, seed=None, boundary_tol=1e-12) -> "PlanarDomain":
        """Build a Jordan domain from ``{k: c_k}`` or an iterable of ``(k, c_k)``."""
        if isinstance(coeffs, dict):
            coeffs = coeffs.items()
        return cls("jordan", tuple((int(k), complex(c)) for k, c in coeffs), seed, boundary_tol)

    @classmethod
    def ellipse(cls, a: float = 1.0, b: float = 0.2) -> "PlanarDomain":
        """Ellipse ``a e^{it} + b e^{-it}`` with semi-axes ``a + b`` and ``a - b``."""
        return cls.jordan({1: a, -1: b})

    # -- boundary curve ---------------------------------------------------
    @cached_property
    def _k(self):
        return np.array([k for k, _ in self.coeffs], dtype=float)

    @cached_property
    def _c(self):
        return np.array([c for _, c in self.coeffs], dtype=complex)

    def gamma(self, t):
        t = np.asarray(t, dtype=float)
        return np.exp(1j * np.multiply.outer(t, self._k)) @ self._c

    def dgamma(self, t):
        t = np.asarray(t, dtype=float)
        return np.exp(1j * np.multiply.outer(t, self._k)) @ (1j * self._k * self._c)

    def ddgamma(self, t):
        t = np.asarray(t, dtype=float)
        return np.exp(1j * np.multiply.outer(t, self._k)) @ (-(self._k**2) * self._c)

    def boundary_eval(self, t):
        """Return ``(point, tangent, outward_normal)`` at parameter ``t``."""
        tangent = self.dgamma(t)
        normal = -1j * tangent / np.abs(tangent)
        return self.gamma(t), tangent, normal

    @cached_property
    def center(self) -> complex:
        if self.seed is not None:
            return complex(self.seed)
        return complex(dict(self.coeffs).get(0, 0j))

    @cached_property
    def area(self) -> float:
        t = np.linspace(0, 2 * np.pi, 1024, endpoint=False)
        g, dg = self.gamma(t), self.dgamma(t)
        return float(0.5 * np.mean(np.imag(np.conj(g) * dg)) * 2 * np.pi)

    @cached_property
    def diameter(self) -> float:
        if self.kind == "disc":
            return 2.0
        p = self.gamma(np.linspace(0, 2 * np.pi, 256, endpoint=False))
        return float(np.max(np.abs(p[:, None] - p[None, :])))

    @cached_property
    def perimeter(self) -> float:
        t = np.linspace(0, 2 * np.pi, 1024, endpoint=False)
        return float(np.mean(np.abs(self.dgamma(t))) * 2 * np.pi)

    @property
    def is_disc(self) -> bool:
        return self.kind == "disc"

    # -- validation -------------------------------------------------------
    def _validate(self):
        m = _VALIDATION_SAMPLES
        t = np.linspace(0, 2 * np.pi, m, endpoint=False)
        p = self.gamma(t)
        speed = np.abs(self.dgamma(t))
        if speed.min() <= 1e-8 * speed.max():
            raise DomainError("boundary curve is not regular (gamma' vanishes)")
        if _polyline_self_intersects(p):
            raise DomainError("boundary curve is not simple")
        if round(self.winding_number(self.center)) != 1:
            raise DomainError("boundary must wind once positively around the seed point")

    def winding_number(self, z: complex, samples: int = 2048) -> float:
        t = np.linspace(0, 2 * np.pi, samples + 1)
        ang = np.unwrap(np.angle(self.gamma(t) - z))
        return float((ang[-1] - ang[0]) / (2 * np.pi))

    def is_star_shaped_about(self, c: complex, samples: int = 1024) -> bool:
        t = np.linspace(0, 2 * np.pi, samples, endpoint=False)
        return bool(np.all(np.imag(np.conj(self.gamma(t) - c) * self.dgamma(t)) > 0))

    # -- membership -------------------------------------------------------
    def contains(self, z: complex, tol: float | None = None) -> str:
        """Classify ``z`` as ``"interior"``, ``"boundary"`` or ``"exterior"``."""
        tol = self.boundary_tol * self.diameter if tol is None else tol
        z = complex(z)
        if self.is_disc:
            r = abs(z)
            if abs(1.0 - r) <= tol:
                return "boundary"
            return "interior" if r < 1.0 else "exterior"
        if self._nearest(z)[1] <= tol:
            return "boundary"
        return "interior" if round(self.winding_number(z)) == 1 else "exterior"

    def inside(self, z) -> np.ndarray:
        """Vectorized strict interior test (star-shaped domains use the ray test)."""
        z = np.asarray(z, dtype=complex)
        if self.is_disc:
            return np.abs(z) < 1.0
        c = self.center
        if not self.is_star_shaped_about(c):
            flat = [self.contains(v) == "interior" for v in z.ravel()]
            return np.array(flat, dtype=bool).reshape(z.shape)
        d = z - c
        rad = self.ray_length(c, np.angle(d))
        return np.abs(d) < rad

    def _nearest(self, z: complex):
        """Return ``(t*, |z - gamma(t*)|)`` for the nearest boundary point."""
        t = np.linspace(0, 2 * np.pi, _DIST_SAMPLES, endpoint=False)
        d2 = np.abs(self.gamma(t) - z) ** 2
        ts = float(t[np.argmin(d2)])
        for _ in range(30):
            g, dg, ddg = self.gamma(ts), self.dgamma(ts), self.ddgamma(ts)
            diff = g - z
            f1 = 2 * np.real(np.conj(diff) * dg)
            f2 = 2 * (abs(dg) ** 2 + np.real(np.conj(diff) * ddg))
            if f2 <= 0:
                break
            step = f1 / f2
            ts -= step
            if abs(step) < 1e-15:
                break
        return ts, float(abs(self.gamma(ts) - z))

    def dist_to_boundary(self, z: complex) -> float:
        """Distance from an interior point to the boundary curve."""
        z = complex(z)
        if self.is_disc:
            r = abs(z)
            if r > 1.0 + self.boundary_tol * 2:
                raise DomainError(f"point {z} lies outside the unit disc")
            return max(0.0, 1.0 - r)
        if self.contains(z) == "exterior":
            raise DomainError(f"point {z} lies outside the domain")
        return self._nearest(z)[1]

    def ray_length(self, w: complex, theta) -> np.ndarray:
        """Distance from ``w`` to the boundary along directions ``theta``.

        The domain must be star-shaped with respect to ``w``.
        """
        theta = np.asarray(theta, dtype=float)
        w = complex(w)
        if self.is_disc:
            a = np.real(w * np.exp(-1j * theta))
            return -a + np.sqrt(a * a + 1.0 - abs(w) ** 2)
        m = 1024
        ts = np.linspace(0, 2 * np.pi, m + 1)
        phi = np.unwrap(np.angle(self.gamma(ts) - w))
        if phi[-1] - phi[0] < 0 or np.any(np.diff(phi) <= 0):
            raise DomainError(f"domain is not star-shaped about {w}")
        tgt = np.mod(theta - phi[0], 2 * np.pi) + phi[0]
        t = np.interp(tgt, phi, ts)
        e = np.exp(-1j * theta)
        for _ in range(40):
            diff = self.gamma(t) - w
            g = np.imag(e * diff)
            dg = np.imag(e * self.dgamma(t))
            step = g / dg
            t = t - step
            if np.max(np.abs(step)) < 1e-14:
                break
        return np.real(e * (self.gamma(t) - w))

    def node_spacing(self, n_nodes: int) -> float:
        """Largest arclength gap between ``n_nodes`` equispaced parameter values."""
        t = np.linspace(0, 2 * np.pi, 1024, endpoint=False)
        return float(np.max(np.abs(self.dgamma(t))) * 2 * np.pi / n_nodes)

    def to_config(self) -> dict:
        if self.is_disc:
            return {"kind": "disc"}
        return {"kind": "jordan", "coeffs": [[k, c.real, c.imag] for k, c in self.coeffs]}


@dataclass(frozen=True)
class ProductDomain:
    """Ordered product ``D_1 x ... x D_n`` of planar domains."""

    factors: tuple

    def __post_init__(self):
        facs = tuple(self.factors)
        if not facs:
            raise DomainError("a product domain needs at least one factor")
        for f in facs:
            if not isinstance(f, PlanarDomain):
                raise DomainError("factors must be PlanarDomain instances")
        object.__setattr__(self, "factors", facs)

    @classmethod
    def polydisc(cls, n: int) -> "ProductDomain":
        return cls(tuple(PlanarDomain.unit_disc() for _ in range(n)))

    @property
    def n(self) -> int:
        return len(self.factors)

    def __len__(self):
        return self.n

    def __getitem__(self, i):
        return self.factors[i]

    def contains(self, w) -> str:
        labels = [d.contains(x) for d, x in zip(self.factors, w)]
        if "exterior" in labels:
            return "exterior"
        return "boundary" if "boundary" in labels else "interior"

    def dist_to_boundary(self, w) -> float:
        return min(d.dist_to_boundary(x) for d, x in zip(self.factors, w))

    def to_config(self) -> dict:
        return {"factors": [f.to_config() for f in self.factors]}


def _polyline_self_intersects(p: np.ndarray) -> bool:
    a, b = p, np.roll(p, -1)
    m = len(p)
    ax, ay, bx, by = a.real, a.imag, b.real, b.imag

    def orient(px, py, qx, qy, rx, ry):
        return np.sign((qx - px) * (ry - py) - (qy - py) * (rx - px))

    o1 = orient(ax[:, None], ay[:, None], bx[:, None], by[:, None], ax[None, :], ay[None, :])
    o2 = orient(ax[:, None], ay[:, None], bx[:, None], by[:, None], bx[None, :], by[None, :])
    o3 = orient(ax[None, :], ay[None, :], bx[None, :], by[None, :], ax[:, None], ay[:, None])
    o4 = orient(ax[None, :], ay[None, :], bx[None, :], by[None, :], bx[:, None], by[:, None])
    cross = (o1 * o2 < 0) & (o3 * o4 < 0)
    i, j = np.indices((m, m))
    gap = np.abs(i - j)
    adjacent = (gap <= 1) | (gap >= m - 1)
    return bool(np.any(cross & ~adjacent))


def domain_from_config(cfg) -> PlanarDomain | ProductDomain:
    """Parse a domain config dict (or JSON path) into a domain object."""
    if isinstance(cfg, (str, Path)):
        path = Path(cfg)
        if not path.exists():
            raise ConfigError(f"domain config not found: {path}")
        try:
            cfg = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("domain config must be a JSON object")
    if "factors" in cfg:
        return ProductDomain(tuple(_planar_from_config(f) for f in cfg["factors"]))
    return _planar_from_config(cfg)


def _planar_from_config(cfg: dict) -> PlanarDomain:
    kind = cfg.get("kind")
    if kind == "disc":
        return PlanarDomain.unit_disc()
    if kind == "jordan":
        try:
            coeffs = [(int(k), complex(re, im)) for k, re, im in cfg["coeffs"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad jordan coefficients: {exc}") from exc
        seed = cfg.get("seed")
        return PlanarDomain.jordan(coeffs, seed=None if seed is None else complex(*seed))
    raise ConfigError(f"unknown domain kind {kind!r}")


def as_product(domain) -> ProductDomain:
    if isinstance(domain, ProductDomain):
        return domain
    return ProductDomain((domain,))
