#!/usr/bin/env python
"""
Potential energy surfaces in mass-scaled collinear coordinates.

Every surface evaluates V, its gradient and its Hessian at a point (x1, x2) with
plain floats, and describes its two reaction channels through a ChannelGeometry.
All surfaces are shifted so that the floor of the (in) channel is V = 0, which makes
the total energy E equal to the collision energy.

Surface definition files are JSON documents validated by SurfaceDefinition.
"""

import json
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from scipy.interpolate import RectBivariateSpline
from scipy.optimize import brentq, minimize_scalar

from src.scattering.system import MassTriple
from src.utils.errors import ConfigError, DomainError, pointer_diagnostics

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

SURFACE_KINDS = (
    "leps",
    "morse-channels",
    "tabulated-bicubic",
    "constant",
    "quadratic",
    "separable",
)

# Fraction of the dissociation energy at which a diatomic counts as broken
PLATEAU_FRACTION = 0.99

Vector = Tuple[float, float]
Hessian = Tuple[float, float, float]
Derivatives = Tuple[float, Optional[Vector], Optional[Hessian]]


def _unit(v: Vector) -> Vector:
    norm = math.hypot(v[0], v[1])
    if norm == 0.0:
        raise DomainError("direction vector must be non-zero")
    return (v[0] / norm, v[1] / norm)


def _dot(u: Vector, v: Vector) -> float:
    return u[0] * v[0] + u[1] * v[1]


def _normal_toward(direction: Vector, other: Vector) -> Vector:
    """Unit normal to ``direction`` on the side of ``other``; clockwise if they are parallel."""
    along = _dot(other, direction)
    perp = (other[0] - along * direction[0], other[1] - along * direction[1])
    if math.hypot(perp[0], perp[1]) < 1e-12:
        return (direction[1], -direction[0])
    return _unit(perp)


@dataclass(frozen=True)
class Domain:
    """Axis-aligned rectangle in mass-scaled coordinates."""

    x1_min: float
    x1_max: float
    x2_min: float
    x2_max: float

    def __post_init__(self) -> None:
        if not (self.x1_min < self.x1_max and self.x2_min < self.x2_max):
            raise DomainError(f"empty domain rectangle {self}")

    def contains(self, x1: float, x2: float) -> bool:
        return self.x1_min <= x1 <= self.x1_max and self.x2_min <= x2 <= self.x2_max

    def sample(self, n: int, seed: int = 0, margin: float = 0.0) -> np.ndarray:
        """Return n uniformly drawn points, shrinking the rectangle by ``margin``."""
        rng = np.random.default_rng(seed)
        x1 = rng.uniform(self.x1_min + margin, self.x1_max - margin, n)
        x2 = rng.uniform(self.x2_min + margin, self.x2_max - margin, n)
        return np.column_stack([x1, x2])


@dataclass(frozen=True)
class ChannelGeometry:
    """
    Layout of the (in) and rearrangement (out) channels.

    Each channel is a half-line starting at ``center`` along its outward unit
    direction. The channel coordinate u is the distance along that direction and y
    the transverse offset along the channel normal, which points toward the
    dissociation plateau (stretching the channel's diatomic bond).
    """

    center: Vector
    in_direction: Vector
    out_direction: Vector
    in_normal: Vector
    out_normal: Vector
    asymptotic_radius: float
    in_dissociation: float = math.inf
    out_dissociation: float = math.inf

    def __post_init__(self) -> None:
        if not self.asymptotic_radius > 0:
            raise DomainError(f"asymptotic radius must be positive, got {self.asymptotic_radius}")

    def direction(self, channel: str) -> Vector:
        return self.in_direction if channel == "in" else self.out_direction

    def normal(self, channel: str) -> Vector:
        return self.in_normal if channel == "in" else self.out_normal

    def dissociation(self, channel: str) -> float:
        return self.in_dissociation if channel == "in" else self.out_dissociation

    def channel_coords(self, point: np.ndarray, channel: str) -> Tuple[float, float]:
        """Return (u, y) of a point relative to one channel."""
        rel = (float(point[0]) - self.center[0], float(point[1]) - self.center[1])
        return _dot(rel, self.direction(channel)), _dot(rel, self.normal(channel))

    def region(self, point: np.ndarray) -> str:
        """
        Name the region a point occupies.

        Returns:
            str: "in" or "out" beyond the asymptotic radius of a bound channel,
                "dissociated" beyond the radius with both bonds on their plateau,
                "interaction" otherwise
        """
        for channel in ("in", "out"):
            u, y = self.channel_coords(point, channel)
            if u >= self.asymptotic_radius and y < self.dissociation(channel):
                return channel

        _, y_in = self.channel_coords(point, "in")
        _, y_out = self.channel_coords(point, "out")
        distance = math.hypot(float(point[0]) - self.center[0], float(point[1]) - self.center[1])
        if (
            y_in >= self.in_dissociation
            and y_out >= self.out_dissociation
            and distance >= self.asymptotic_radius
        ):
            return "dissociated"
        return "interaction"

    def initial_point(self, x2_0: float, radius: Optional[float] = None) -> np.ndarray:
        """Start point at channel coordinate ``radius`` of the (in) channel, offset x2_0."""
        r = self.asymptotic_radius if radius is None else radius
        return np.array(
            [
                self.center[0] + r * self.in_direction[0] + x2_0 * self.in_normal[0],
                self.center[1] + r * self.in_direction[1] + x2_0 * self.in_normal[1],
            ]
        )

    def incoming_direction(self) -> np.ndarray:
        """Unit velocity pointing down the (in) channel toward the interaction region."""
        return -np.asarray(self.in_direction, dtype=float)

    def with_radius(self, radius: float) -> "ChannelGeometry":
        return ChannelGeometry(
            self.center,
            self.in_direction,
            self.out_direction,
            self.in_normal,
            self.out_normal,
            radius,
            self.in_dissociation,
            self.out_dissociation,
        )


def build_geometry(
    center: Vector,
    in_direction: Vector,
    out_direction: Vector,
    asymptotic_radius: float,
    in_normal: Optional[Vector] = None,
    out_normal: Optional[Vector] = None,
    in_dissociation: float = math.inf,
    out_dissociation: float = math.inf,
) -> ChannelGeometry:
    """Build a ChannelGeometry, defaulting each normal toward the other channel."""
    d_in = _unit(in_direction)
    d_out = _unit(out_direction)
    n_in = _unit(in_normal) if in_normal else _normal_toward(d_in, d_out)
    if out_normal:
        n_out = _unit(out_normal)
    elif abs(_dot(d_in, d_out)) > 1.0 - 1e-12:
        n_out = n_in
    else:
        n_out = _normal_toward(d_out, d_in)
    return ChannelGeometry(
        center=(float(center[0]), float(center[1])),
        in_direction=d_in,
        out_direction=d_out,
        in_normal=n_in,
        out_normal=n_out,
        asymptotic_radius=float(asymptotic_radius),
        in_dissociation=in_dissociation,
        out_dissociation=out_dissociation,
    )


class PotentialSurface(ABC):
    """
    Base class for potential surfaces V(x1, x2) in eV.

    Subclasses implement ``derivatives``; everything else is derived from it.
    """

    kind: str = ""

    def __init__(
        self,
        domain: Domain,
        params: Dict[str, float],
        geometry: ChannelGeometry,
        masses: Optional[MassTriple] = None,
        mu0: Optional[float] = None,
        name: str = "",
    ):
        self.domain = domain
        self.params = dict(params)
        self.geometry = geometry
        self.masses = masses
        if masses is not None:
            self.mu0 = masses.mu0
        else:
            self.mu0 = float(mu0) if mu0 is not None else 1.0
        if not self.mu0 > 0:
            raise DomainError(f"mu0 must be positive, got {self.mu0}")
        self.name = name or self.kind

    @abstractmethod
    def derivatives(self, x1: float, x2: float, order: int = 2) -> Derivatives:
        """
        Evaluate V and, up to ``order``, its gradient and Hessian.

        Returns:
            (V, (V1, V2), (V11, V12, V22)); entries above ``order`` are None
        """

    def value(self, x1: float, x2: float) -> float:
        return self.derivatives(x1, x2, 0)[0]

    def gradient(self, x1: float, x2: float) -> Vector:
        grad = self.derivatives(x1, x2, 1)[1]
        assert grad is not None
        return grad

    def hessian(self, x1: float, x2: float) -> np.ndarray:
        h = self.derivatives(x1, x2, 2)[2]
        assert h is not None
        return np.array([[h[0], h[1]], [h[1], h[2]]])

    def channel_geometry(self) -> ChannelGeometry:
        return self.geometry

    def channel_floor(self, channel: str, u: float, half_width: float = 0.5) -> float:
        """Minimum of V across a channel at channel coordinate u."""
        g = self.geometry
        d, n = g.direction(channel), g.normal(channel)

        def across(y: float) -> float:
            return self.value(g.center[0] + u * d[0] + y * n[0], g.center[1] + u * d[1] + y * n[1])

        result = minimize_scalar(
            across, bounds=(-half_width, half_width), method="bounded", options={"xatol": 1e-9}
        )
        return float(result.fun)

    def floor_drift(self, channel: str, start: float, stop: float, step: float = 1.0) -> float:
        """Largest |dV_floor/du| between channel coordinates ``start`` and ``stop``."""
        us = np.arange(start, stop + 0.5 * step, step)
        floors = np.array([self.channel_floor(channel, float(u)) for u in us])
        return float(np.max(np.abs(np.diff(floors)) / step))

    def channel_width(self, channel: str, energy: float, u: Optional[float] = None) -> float:
        """
        Width of the classically allowed strip across a channel.

        Args:
            channel: "in" or "out"
            energy: Total energy (eV)
            u: Channel coordinate; defaults to the asymptotic radius

        Returns:
            float: Distance between the two turning points across the channel
        """
        g = self.geometry
        u = g.asymptotic_radius if u is None else u
        d, n = g.direction(channel), g.normal(channel)

        def excess(y: float) -> float:
            return (
                self.value(g.center[0] + u * d[0] + y * n[0], g.center[1] + u * d[1] + y * n[1])
                - energy
            )

        if excess(0.0) >= 0.0:
            raise DomainError(f"channel '{channel}' is closed at energy {energy}")

        reach = g.dissociation(channel)
        reach = 10.0 if math.isinf(reach) else reach
        edges = []
        for sign in (1.0, -1.0):
            y = 0.0
            step = 0.01
            while abs(y) < reach and excess(y + sign * step) < 0.0:
                y += sign * step
                step *= 1.5
            outer = y + sign * step
            if abs(outer) >= reach and excess(outer) < 0.0:
                edges.append(sign * reach)
            else:
                edges.append(brentq(excess, y, outer, xtol=1e-10))
        return edges[0] - edges[1]


class ConstantSurface(PotentialSurface):
    """V = value everywhere."""

    kind = "constant"

    def derivatives(self, x1: float, x2: float, order: int = 2) -> Derivatives:
        v = self.params.get("value", 0.0)
        return (
            v,
            (0.0, 0.0) if order >= 1 else None,
            (0.0, 0.0, 0.0) if order >= 2 else None,
        )


class QuadraticSurface(PotentialSurface):
    """V = 1/2 x^T K x + b.x + c with K = [[k11, k12], [k12, k22]]."""

    kind = "quadratic"

    def derivatives(self, x1: float, x2: float, order: int = 2) -> Derivatives:
        p = self.params
        k11, k12, k22 = p.get("k11", 0.0), p.get("k12", 0.0), p.get("k22", 0.0)
        b1, b2, c = p.get("b1", 0.0), p.get("b2", 0.0), p.get("c", 0.0)
        g1 = k11 * x1 + k12 * x2 + b1
        g2 = k12 * x1 + k22 * x2 + b2
        v = 0.5 * (x1 * (k11 * x1 + k12 * x2) + x2 * (k12 * x1 + k22 * x2)) + b1 * x1 + b2 * x2 + c
        return (
            v,
            (g1, g2) if order >= 1 else None,
            (k11, k12, k22) if order >= 2 else None,
        )


class SeparableSurface(PotentialSurface):
    """
    Eckart barrier along x1 times a harmonic transverse well:
    V = barrier * sech^2(x1 / width) + 1/2 k x2^2.
    """

    kind = "separable"

    def derivatives(self, x1: float, x2: float, order: int = 2) -> Derivatives:
        p = self.params
        barrier, width, k = p.get("barrier", 0.0), p.get("width", 1.0), p.get("k", 1.0)
        th = math.tanh(x1 / width)
        sech2 = 1.0 - th * th
        v = barrier * sech2 + 0.5 * k * x2 * x2
        grad = None
        hess = None
        if order >= 1:
            grad = (-2.0 * barrier * sech2 * th / width, k * x2)
        if order >= 2:
            h11 = barrier * (4.0 * sech2 * th * th - 2.0 * sech2 * sech2) / (width * width)
            hess = (h11, 0.0, k)
        return v, grad, hess


def _morse(depth: float, alpha: float, y: float) -> Tuple[float, float, float]:
    """Morse profile D(1 - exp(-a y))^2 with its first two derivatives."""
    e = math.exp(-alpha * y)
    return (
        depth * (1.0 - e) ** 2,
        2.0 * depth * alpha * e * (1.0 - e),
        2.0 * depth * alpha * alpha * e * (2.0 * e - 1.0),
    )


def _plateau_offset(alpha: float) -> float:
    """Bond stretch at which a Morse well reaches PLATEAU_FRACTION of its depth."""
    return -math.log(1.0 - math.sqrt(PLATEAU_FRACTION)) / alpha


class MorseChannelsSurface(PotentialSurface):
    """
    Two Morse valleys meeting at a corner, blended by a tanh switch across the
    bisector, with a Gaussian ridge along the bisector.

    The channels leave the corner along (-1, 0) and (-cos(angle), sin(angle)). With
    equal channel parameters and zero exoergicity the surface is symmetric under
    reflection about the bisector. The corner is an index-1 saddle when
    barrier / ridge_width^2 > 2 depth alpha^2 cos^2(angle / 2).
    """

    kind = "morse-channels"

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        p = self.params
        self.depth_in = p.get("depth_in", p.get("depth", 4.0))
        self.alpha_in = p.get("alpha_in", p.get("alpha", 1.5))
        self.depth_out = p.get("depth_out", p.get("depth", 4.0))
        self.alpha_out = p.get("alpha_out", p.get("alpha", 1.5))
        self.barrier = p.get("barrier", 1.0)
        self.ridge_width = p.get("ridge_width", 0.2)
        self.switch_width = p.get("switch_width", 0.5)
        self.exoergicity = p.get("exoergicity", 0.0)
        g = self.geometry
        self._center = g.center
        self._n_in = g.in_normal
        self._n_out = g.out_normal
        self._e = _unit(
            (g.out_direction[0] - g.in_direction[0], g.out_direction[1] - g.in_direction[1])
        )

    @staticmethod
    def default_geometry(params: Dict[str, float], radius: float) -> ChannelGeometry:
        angle = params.get("angle", math.pi / 3.0)
        alpha_in = params.get("alpha_in", params.get("alpha", 1.5))
        alpha_out = params.get("alpha_out", params.get("alpha", 1.5))
        center = (params.get("center_x1", 0.0), params.get("center_x2", 0.0))
        return build_geometry(
            center,
            (-1.0, 0.0),
            (-math.cos(angle), math.sin(angle)),
            radius,
            in_dissociation=_plateau_offset(alpha_in),
            out_dissociation=_plateau_offset(alpha_out),
        )

    def derivatives(self, x1: float, x2: float, order: int = 2) -> Derivatives:
        px, py = x1 - self._center[0], x2 - self._center[1]
        n_in, n_out, e = self._n_in, self._n_out, self._e
        y_in = px * n_in[0] + py * n_in[1]
        y_out = px * n_out[0] + py * n_out[1]
        s = px * e[0] + py * e[1]

        mi, mi1, mi2 = _morse(self.depth_in, self.alpha_in, y_in)
        mo, mo1, mo2 = _morse(self.depth_out, self.alpha_out, y_out)
        th = math.tanh(s / self.switch_width)
        w = 0.5 * (1.0 + th)
        sig2 = self.ridge_width * self.ridge_width
        ridge = self.barrier * math.exp(-0.5 * s * s / sig2)
        gap = mo + self.exoergicity - mi

        v = (1.0 - w) * mi + w * (mo + self.exoergicity) + ridge
        if order < 1:
            return v, None, None

        w1 = 0.5 * (1.0 - th * th) / self.switch_width
        ridge1 = -s / sig2 * ridge
        a_in = (1.0 - w) * mi1
        a_out = w * mo1
        a_e = w1 * gap + ridge1
        grad = (
            a_in * n_in[0] + a_out * n_out[0] + a_e * e[0],
            a_in * n_in[1] + a_out * n_out[1] + a_e * e[1],
        )
        if order < 2:
            return v, grad, None

        w2 = -th * (1.0 - th * th) / (self.switch_width * self.switch_width)
        ridge2 = (s * s / (sig2 * sig2) - 1.0 / sig2) * ridge
        c_in = (1.0 - w) * mi2
        c_out = w * mo2
        c_e = w2 * gap + ridge2

        def component(i: int, j: int) -> float:
            return (
                c_in * n_in[i] * n_in[j]
                + c_out * n_out[i] * n_out[j]
                + w1 * mo1 * (e[i] * n_out[j] + n_out[i] * e[j])
                - w1 * mi1 * (e[i] * n_in[j] + n_in[i] * e[j])
                + c_e * e[i] * e[j]
            )

        return v, grad, (component(0, 0), component(0, 1), component(1, 1))


class LepsSurface(PotentialSurface):
    """
    London-Eyring-Polanyi-Sato surface for collinear A + BC -> AB + C.

    Each pair k in (AB, BC, AC) has a Morse depth D, range beta, equilibrium
    distance r0 and Sato parameter S. The surface is shifted by D_BC so that the
    floor of the A + BC channel is zero.
    """

    kind = "leps"

    PAIRS = ("AB", "BC", "AC")

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        if self.masses is None:
            raise DomainError("LEPS surface requires masses")
        self._pairs = [self.pair_parameters(self.params, name) for name in self.PAIRS]
        self._offset = self.params.get("energy_offset", self._pairs[1][0])
        a, b, c = self.masses.scaling()
        # d r_k / d x_i for r = (rAB, rBC, rAC)
        self._jac = (
            (1.0 / a, -c / b),
            (0.0, 1.0 / b),
            (1.0 / a, (1.0 - c) / b),
        )

    @staticmethod
    def pair_parameters(params: Dict[str, float], name: str) -> Tuple[float, float, float, float]:
        try:
            return (
                params[f"D_{name}"],
                params[f"beta_{name}"],
                params[f"r0_{name}"],
                params.get(f"sato_{name}", 0.0),
            )
        except KeyError as e:
            raise DomainError(f"LEPS parameter {e.args[0]} missing") from e

    @classmethod
    def default_geometry(
        cls, params: Dict[str, float], masses: MassTriple, radius: float
    ) -> ChannelGeometry:
        a, b, c = masses.scaling()
        r0_ab = cls.pair_parameters(params, "AB")[2]
        r0_bc = cls.pair_parameters(params, "BC")[2]
        beta_ab = cls.pair_parameters(params, "AB")[1]
        beta_bc = cls.pair_parameters(params, "BC")[1]
        norm = math.hypot(b, a * c)
        # Stretching rBC by dr moves b*dr along the (in) normal; stretching rAB by dr
        # moves a*b*dr/norm along the (out) normal.
        return build_geometry(
            (a * (r0_ab + c * r0_bc), b * r0_bc),
            (1.0, 0.0),
            (a * c, b),
            radius,
            in_dissociation=b * _plateau_offset(beta_bc),
            out_dissociation=a * b * _plateau_offset(beta_ab) / norm,
        )

    def bond_distances(self, x1: float, x2: float) -> Tuple[float, float, float]:
        j = self._jac
        r_ab = j[0][0] * x1 + j[0][1] * x2
        r_bc = j[1][1] * x2
        return r_ab, r_bc, r_ab + r_bc

    def derivatives(self, x1: float, x2: float, order: int = 2) -> Derivatives:
        distances = self.bond_distances(x1, x2)
        q = [0.0, 0.0, 0.0]
        jx = [0.0, 0.0, 0.0]
        dq = [0.0, 0.0, 0.0]
        dj = [0.0, 0.0, 0.0]
        d2q = [0.0, 0.0, 0.0]
        d2j = [0.0, 0.0, 0.0]
        for k, ((depth, beta, r0, sato), r) in enumerate(zip(self._pairs, distances)):
            e1 = math.exp(-beta * (r - r0))
            e2 = e1 * e1
            f = depth / (4.0 * (1.0 + sato))
            q[k] = f * ((3.0 + sato) * e2 - (2.0 + 6.0 * sato) * e1)
            jx[k] = f * ((1.0 + 3.0 * sato) * e2 - (6.0 + 2.0 * sato) * e1)
            if order >= 1:
                dq[k] = f * beta * (-2.0 * (3.0 + sato) * e2 + (2.0 + 6.0 * sato) * e1)
                dj[k] = f * beta * (-2.0 * (1.0 + 3.0 * sato) * e2 + (6.0 + 2.0 * sato) * e1)
            if order >= 2:
                d2q[k] = f * beta * beta * (4.0 * (3.0 + sato) * e2 - (2.0 + 6.0 * sato) * e1)
                d2j[k] = f * beta * beta * (4.0 * (1.0 + 3.0 * sato) * e2 - (6.0 + 2.0 * sato) * e1)

        ja, jb, jc = jx
        w = ja * ja + jb * jb + jc * jc - ja * jb - jb * jc - ja * jc
        root = math.sqrt(max(w, 1e-30))
        v = q[0] + q[1] + q[2] - root + self._offset
        if order < 1:
            return v, None, None

        total = ja + jb + jc
        # dW/dj_k = 3 j_k - sum(j)
        u = [3.0 * jk - total for jk in jx]
        vr = [dq[k] - u[k] * dj[k] / (2.0 * root) for k in range(3)]
        jac = self._jac
        grad = (
            sum(vr[k] * jac[k][0] for k in range(3)),
            sum(vr[k] * jac[k][1] for k in range(3)),
        )
        if order < 2:
            return v, grad, None

        root3 = root * root * root
        wr = [u[k] * dj[k] for k in range(3)]
        vrr = [[0.0] * 3 for _ in range(3)]
        for k in range(3):
            for m in range(3):
                delta = 1.0 if k == m else 0.0
                w_km = (3.0 * delta - 1.0) * dj[k] * dj[m] + delta * u[k] * d2j[k]
                vrr[k][m] = delta * d2q[k] - (w_km / (2.0 * root) - wr[k] * wr[m] / (4.0 * root3))

        def component(i: int, j: int) -> float:
            return sum(vrr[k][m] * jac[k][i] * jac[m][j] for k in range(3) for m in range(3))

        return v, grad, (component(0, 0), component(0, 1), component(1, 1))


class TabulatedSurface(PotentialSurface):
    """Bicubic interpolating spline through a rectangular grid of values."""

    kind = "tabulated-bicubic"

    def __init__(
        self, *args, grid_x1: np.ndarray, grid_x2: np.ndarray, values: np.ndarray, **kwargs
    ):
        super().__init__(*args, **kwargs)
        self.grid_x1 = np.asarray(grid_x1, dtype=float)
        self.grid_x2 = np.asarray(grid_x2, dtype=float)
        self.values = np.asarray(values, dtype=float).reshape(len(self.grid_x1), len(self.grid_x2))
        self._spline = RectBivariateSpline(self.grid_x1, self.grid_x2, self.values, kx=3, ky=3, s=0)

    def derivatives(self, x1: float, x2: float, order: int = 2) -> Derivatives:
        sp = self._spline
        v = float(sp.ev(x1, x2))
        grad = None
        hess = None
        if order >= 1:
            grad = (float(sp.ev(x1, x2, dx=1)), float(sp.ev(x1, x2, dy=1)))
        if order >= 2:
            hess = (
                float(sp.ev(x1, x2, dx=2)),
                float(sp.ev(x1, x2, dx=1, dy=1)),
                float(sp.ev(x1, x2, dy=2)),
            )
        return v, grad, hess


class DomainModel(BaseModel):
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)

    x1_min: float
    x1_max: float
    x2_min: float
    x2_max: float

    @model_validator(mode="after")
    def check_order(self) -> "DomainModel":
        if not (self.x1_min < self.x1_max and self.x2_min < self.x2_max):
            raise ValueError("domain minimum must be below maximum on both axes")
        return self


class MassesModel(BaseModel):
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)

    mA: float = Field(gt=0)
    mB: float = Field(gt=0)
    mC: float = Field(gt=0)


class ChannelsModel(BaseModel):
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)

    center: Tuple[float, float]
    in_direction: Tuple[float, float]
    out_direction: Tuple[float, float]
    asymptotic_radius: float = Field(gt=0)
    in_normal: Optional[Tuple[float, float]] = None
    out_normal: Optional[Tuple[float, float]] = None
    in_dissociation: Optional[float] = Field(default=None, gt=0)
    out_dissociation: Optional[float] = Field(default=None, gt=0)


class GridModel(BaseModel):
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)

    x1: List[float] = Field(min_length=4)
    x2: List[float] = Field(min_length=4)
    values: List[float]

    @model_validator(mode="after")
    def check_shape(self) -> "GridModel":
        for axis in ("x1", "x2"):
            knots = getattr(self, axis)
            if any(b <= a for a, b in zip(knots, knots[1:])):
                raise ValueError(f"grid axis {axis} must be strictly increasing")
        if len(self.values) != len(self.x1) * len(self.x2):
            raise ValueError(
                f"grid needs {len(self.x1) * len(self.x2)} row-major values, got {len(self.values)}"
            )
        return self


class SurfaceDefinition(BaseModel):
    """Schema of a surface definition file."""

    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)

    schema_version: Literal[1] = SCHEMA_VERSION
    name: str = ""
    kind: Literal[
        "leps", "morse-channels", "tabulated-bicubic", "constant", "quadratic", "separable"
    ]
    params: Dict[str, float] = Field(default_factory=dict)
    domain: DomainModel
    masses: Optional[MassesModel] = None
    mu0: Optional[float] = Field(default=None, gt=0)
    channels: Optional[ChannelsModel] = None
    asymptotic_radius: Optional[float] = Field(default=None, gt=0)
    grid: Optional[GridModel] = None

    @model_validator(mode="after")
    def check_kind(self) -> "SurfaceDefinition":
        if self.kind == "leps" and self.masses is None:
            raise ValueError("kind 'leps' requires masses")
        if self.kind == "tabulated-bicubic":
            if self.grid is None:
                raise ValueError("kind 'tabulated-bicubic' requires grid")
            if self.channels is None:
                raise ValueError("kind 'tabulated-bicubic' requires channels")
            g, d = self.grid, self.domain
            inside_x1 = g.x1[0] <= d.x1_min and d.x1_max <= g.x1[-1]
            inside_x2 = g.x2[0] <= d.x2_min and d.x2_max <= g.x2[-1]
            if not (inside_x1 and inside_x2):
                raise ValueError("domain must lie inside the grid")
        elif self.grid is not None:
            raise ValueError(
                f"grid is only allowed for kind 'tabulated-bicubic', not '{self.kind}'"
            )
        return self


def _default_radius(definition: SurfaceDefinition) -> float:
    d = definition.domain
    if definition.kind == "morse-channels":
        cx = definition.params.get("center_x1", 0.0)
        cy = definition.params.get("center_x2", 0.0)
        return 0.75 * min(cx - d.x1_min, d.x2_max - cy)
    return 0.75 * min(abs(d.x1_min), abs(d.x1_max))


def build_surface(
    definition: SurfaceDefinition, asymptotic_radius: Optional[float] = None
) -> PotentialSurface:
    """
    Instantiate a surface from a validated definition.

    Args:
        definition: The validated surface definition
        asymptotic_radius: Optional override of the declared asymptotic radius

    Returns:
        PotentialSurface: The surface model
    """
    d = definition.domain
    domain = Domain(d.x1_min, d.x1_max, d.x2_min, d.x2_max)
    masses = None
    if definition.masses is not None:
        m = definition.masses
        masses = MassTriple(m.mA, m.mB, m.mC)
    radius = asymptotic_radius or definition.asymptotic_radius
    params = definition.params

    if definition.channels is not None:
        ch = definition.channels
        geometry = build_geometry(
            ch.center,
            ch.in_direction,
            ch.out_direction,
            radius or ch.asymptotic_radius,
            in_normal=ch.in_normal,
            out_normal=ch.out_normal,
            in_dissociation=ch.in_dissociation or math.inf,
            out_dissociation=ch.out_dissociation or math.inf,
        )
    elif definition.kind == "leps":
        assert masses is not None
        geometry = LepsSurface.default_geometry(params, masses, radius or 18.0)
    elif definition.kind == "morse-channels":
        geometry = MorseChannelsSurface.default_geometry(
            params, radius or _default_radius(definition)
        )
    else:
        geometry = build_geometry(
            (0.0, 0.0), (-1.0, 0.0), (1.0, 0.0), radius or _default_radius(definition)
        )

    common = dict(
        domain=domain,
        params=params,
        geometry=geometry,
        masses=masses,
        mu0=definition.mu0,
        name=definition.name,
    )
    if definition.kind == "tabulated-bicubic":
        assert definition.grid is not None
        surface: PotentialSurface = TabulatedSurface(
            grid_x1=np.array(definition.grid.x1),
            grid_x2=np.array(definition.grid.x2),
            values=np.array(definition.grid.values),
            **common,
        )
    else:
        surface_cls = {
            "leps": LepsSurface,
            "morse-channels": MorseChannelsSurface,
            "constant": ConstantSurface,
            "quadratic": QuadraticSurface,
            "separable": SeparableSurface,
        }[definition.kind]
        surface = surface_cls(**common)

    logger.debug(
        f"Built {definition.kind} surface '{surface.name}' with mu0={surface.mu0:.6g}, "
        f"R_asym={geometry.asymptotic_radius:.4g}"
    )
    return surface


def parse_surface_definition(data: Dict) -> SurfaceDefinition:
    """
    Validate a surface definition mapping.

    Raises:
        ConfigError: With one /json/pointer diagnostic per schema violation
    """
    try:
        return SurfaceDefinition.model_validate(data)
    except ValidationError as e:
        diagnostics = pointer_diagnostics(e)
        raise ConfigError("invalid surface definition", diagnostics) from e


def load_surface_definition(path: Union[str, Path]) -> SurfaceDefinition:
    """Read and validate a surface definition file."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError as e:
        raise ConfigError(f"surface file not found: {path}", [f"/: {path} does not exist"]) from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"surface file is not valid JSON: {path}", [f"/: {e}"]) from e
    return parse_surface_definition(data)


def load_surface(
    path: Union[str, Path], asymptotic_radius: Optional[float] = None
) -> PotentialSurface:
    """
    Load a surface from a definition file.

    Args:
        path: Path to the JSON surface definition
        asymptotic_radius: Optional override of the declared asymptotic radius

    Returns:
        PotentialSurface: The surface model

    Raises:
        ConfigError: If the file is missing or fails schema validation
    """
    definition = load_surface_definition(path)
    surface = build_surface(definition, asymptotic_radius)
    logger.info(f"Loaded {definition.kind} surface from {path}")
    return surface
