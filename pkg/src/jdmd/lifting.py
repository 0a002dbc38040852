"""Nonlinear state embeddings (observables) with analytic Jacobians.

A :class:`LiftingMap` is an ordered list of :class:`BasisTerm` objects. The
first two terms are always the constant ``1`` and the raw state, so the
unlift matrix ``G`` is a selection matrix and ``G @ lift(x) == x`` exactly.

All evaluation functions accept batched inputs of shape ``(..., n_x)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidInputError

KINDS = ("constant", "state", "sin", "cos", "chebyshev", "product")

# Scaled Chebyshev arguments beyond this magnitude count as extrapolation.
EXTRAPOLATION_LIMIT = 1.5


@dataclass(frozen=True)
class BasisTerm:
    """One family of scalar observables.

    Parameters
    ----------
    kind : str
        One of ``constant``, ``state``, ``sin``, ``cos``, ``chebyshev`` or
        ``product``.
    coords : tuple of int
        State coordinates the term is applied to, one output per coordinate.
        Ignored for ``constant`` and ``product``.
    frequency : float
        Multiplier ``k`` for ``sin(k x)`` / ``cos(k x)``.
    order : int
        Chebyshev order.
    pairs : tuple of (int, int)
        For ``product`` terms: pairs of indices into the lifted vector, each
        strictly smaller than the index of this term's first output.
    """

    kind: str
    coords: tuple = ()
    frequency: float = 1.0
    order: int = 0
    pairs: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInputError(f"unknown basis term kind {self.kind!r}")
        object.__setattr__(self, "coords", tuple(int(c) for c in self.coords))
        object.__setattr__(
            self, "pairs", tuple((int(a), int(b)) for a, b in self.pairs)
        )
        if self.kind == "chebyshev" and self.order < 0:
            raise InvalidInputError("chebyshev order must be nonnegative")

    @property
    def size(self) -> int:
        if self.kind == "constant":
            return 1
        if self.kind == "product":
            return len(self.pairs)
        return len(self.coords)

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.kind in ("state", "sin", "cos", "chebyshev"):
            out["coords"] = list(self.coords)
        if self.kind in ("sin", "cos"):
            out["frequency"] = self.frequency
        if self.kind == "chebyshev":
            out["order"] = self.order
        if self.kind == "product":
            out["pairs"] = [list(p) for p in self.pairs]
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "BasisTerm":
        return cls(
            kind=d["kind"],
            coords=tuple(d.get("coords", ())),
            frequency=float(d.get("frequency", 1.0)),
            order=int(d.get("order", 0)),
            pairs=tuple(tuple(p) for p in d.get("pairs", ())),
        )


def chebyshev_with_derivative(s, order):
    """Return ``T_order(s)`` and ``T_order'(s)`` by the three-term recurrence."""
    s = np.asarray(s, dtype=float)
    t_prev, t = np.ones_like(s), s.copy()
    d_prev, d = np.zeros_like(s), np.ones_like(s)
    if order == 0:
        return t_prev, d_prev
    for _ in range(order - 1):
        t_prev, t = t, 2.0 * s * t - t_prev
        d_prev, d = d, 2.0 * t_prev + 2.0 * s * d - d_prev
    return t, d


@dataclass(frozen=True)
class LiftingMap:
    """Ordered collection of basis terms defining ``phi: R^n_x -> R^n_y``.

    ``scales`` holds one ``(offset, half_width)`` row per state coordinate;
    Chebyshev terms are evaluated on ``(x - offset) / half_width``.
    """

    terms: tuple
    n_x: int
    scales: np.ndarray = field(default=None)

    def __post_init__(self):
        terms = tuple(self.terms)
        object.__setattr__(self, "terms", terms)
        if len(terms) < 2 or terms[0].kind != "constant":
            raise InvalidInputError("first term must be the constant")
        if terms[1].kind != "state" or terms[1].coords != tuple(range(self.n_x)):
            raise InvalidInputError("second term must embed the full state")
        if self.scales is None:
            scales = np.tile([0.0, 1.0], (self.n_x, 1))
        else:
            scales = np.array(self.scales, dtype=float).reshape(self.n_x, 2)
        if np.any(scales[:, 1] <= 0):
            raise InvalidInputError("scale half-widths must be positive")
        scales.setflags(write=False)
        object.__setattr__(self, "scales", scales)
        start = 0
        for term in terms:
            if any(c < 0 or c >= self.n_x for c in term.coords):
                raise InvalidInputError("term coordinate out of range")
            if any(max(p) >= start or min(p) < 0 for p in term.pairs):
                raise InvalidInputError("product terms may only use prior outputs")
            start += term.size

    @property
    def n_y(self) -> int:
        return sum(t.size for t in self.terms)

    @property
    def G(self) -> np.ndarray:
        """Unlift (selection) matrix of shape ``(n_x, n_y)``."""
        G = np.zeros((self.n_x, self.n_y))
        G[np.arange(self.n_x), 1 + np.arange(self.n_x)] = 1.0
        return G

    def scaled(self, x):
        return (x - self.scales[:, 0]) / self.scales[:, 1]

    def extrapolation_mask(self, x):
        """True where any Chebyshev-scaled coordinate leaves [-1.5, 1.5]."""
        x = np.asarray(x, dtype=float)
        coords = sorted({c for t in self.terms if t.kind == "chebyshev" for c in t.coords})
        if not coords:
            return np.zeros(x.shape[:-1], dtype=bool)
        s = self.scaled(x)[..., coords]
        return np.any(np.abs(s) > EXTRAPOLATION_LIMIT, axis=-1)

    def with_scales(self, scales) -> "LiftingMap":
        return LiftingMap(self.terms, self.n_x, scales)

    def to_dict(self) -> dict:
        return {
            "terms": [t.to_dict() for t in self.terms],
            "scales": self.scales.tolist(),
            "N_x": self.n_x,
            "N_y": self.n_y,
            "G": self.G.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LiftingMap":
        out = cls(
            tuple(BasisTerm.from_dict(t) for t in d["terms"]),
            int(d["N_x"]),
            np.asarray(d["scales"], dtype=float),
        )
        if "N_y" in d and int(d["N_y"]) != out.n_y:
            raise InvalidInputError("N_y does not match the listed terms")
        return out

    def __eq__(self, other):
        if not isinstance(other, LiftingMap):
            return NotImplemented
        return (
            self.terms == other.terms
            and self.n_x == other.n_x
            and np.array_equal(self.scales, other.scales)
        )

    def __hash__(self):
        return hash((self.terms, self.n_x, self.scales.tobytes()))


def _check_state(lifting: LiftingMap, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (lifting.n_x,):
        raise InvalidInputError(
            f"expected state of dimension {lifting.n_x}, got shape {x.shape}"
        )
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("state contains non-finite values")
    return x


def _evaluate(lifting: LiftingMap, x, with_jacobian: bool):
    x = _check_state(lifting, x)
    batch = x.shape[:-1]
    n_x = lifting.n_x
    s = lifting.scaled(x)
    values, jacs = [], []
    for term in lifting.terms:
        c = list(term.coords)
        if term.kind == "constant":
            val = np.ones(batch + (1,))
            jac = np.zeros(batch + (1, n_x))
        elif term.kind == "product":
            prior = np.concatenate(values, axis=-1)
            a = [p[0] for p in term.pairs]
            b = [p[1] for p in term.pairs]
            val = prior[..., a] * prior[..., b]
            if with_jacobian:
                pj = np.concatenate(jacs, axis=-2)
                jac = prior[..., a, None] * pj[..., b, :] + prior[..., b, None] * pj[..., a, :]
        else:
            if term.kind == "state":
                val = x[..., c]
                dval = np.ones_like(val)
            elif term.kind == "sin":
                k = term.frequency
                val = np.sin(k * x[..., c])
                dval = k * np.cos(k * x[..., c])
            elif term.kind == "cos":
                k = term.frequency
                val = np.cos(k * x[..., c])
                dval = -k * np.sin(k * x[..., c])
            else:
                val, dval = chebyshev_with_derivative(s[..., c], term.order)
                dval = dval / lifting.scales[c, 1]
            if with_jacobian:
                jac = np.zeros(batch + (len(c), n_x))
                jac[..., np.arange(len(c)), c] = dval
        values.append(val)
        if with_jacobian:
            jacs.append(jac)
    y = np.concatenate(values, axis=-1)
    if not with_jacobian:
        return y
    return y, np.concatenate(jacs, axis=-2)


def lift(lifting: LiftingMap, x) -> np.ndarray:
    """Evaluate ``phi(x)``; returns an array of shape ``(..., n_y)``."""
    return _evaluate(lifting, x, with_jacobian=False)


def lift_jacobian(lifting: LiftingMap, x) -> np.ndarray:
    """Evaluate ``d phi / dx``; returns an array of shape ``(..., n_y, n_x)``."""
    return _evaluate(lifting, x, with_jacobian=True)[1]


def lift_with_jacobian(lifting: LiftingMap, x):
    return _evaluate(lifting, x, with_jacobian=True)


def make_lifting_map(
    n_x: int, terms: Sequence[BasisTerm] = (), scales=None
) -> LiftingMap:
    """Prepend the ``[1, x]`` embedding to ``terms`` and build the map."""
    head = (BasisTerm("constant"), BasisTerm("state", coords=tuple(range(n_x))))
    return LiftingMap(head + tuple(terms), n_x, scales)


def scales_from_bounds(bounds) -> np.ndarray:
    """Convert ``(lo, hi)`` rows into ``(offset, half_width)`` rows."""
    bounds = np.asarray(bounds, dtype=float)
    lo, hi = bounds[:, 0], bounds[:, 1]
    if np.any(hi <= lo):
        raise InvalidInputError("bounds must satisfy lo < hi")
    return np.column_stack([(lo + hi) / 2.0, (hi - lo) / 2.0])


def bounds_from_data(states, inflate: float = 0.2, min_half_width: float = 1e-3):
    """Per-coordinate min/max of ``states`` widened by ``inflate`` on each side."""
    states = np.asarray(states, dtype=float).reshape(-1, np.shape(states)[-1])
    lo, hi = states.min(axis=0), states.max(axis=0)
    center = (lo + hi) / 2.0
    half = np.maximum((hi - lo) / 2.0 * (1.0 + inflate), min_half_width)
    return np.column_stack([center - half, center + half])


# x, theta, xdot, thetadot; theta = 0 hangs down, theta = pi is upright.
CARTPOLE_BOUNDS = np.array(
    [[-2.0, 2.0], [-1.0, 4.5], [-5.0, 5.0], [-12.0, 12.0]]
)

# px, pz, theta, vx, vz, omega
MULTIROTOR_BOUNDS = np.array(
    [[-3.0, 3.0], [-3.0, 3.0], [-1.5, 1.5], [-4.0, 4.0], [-4.0, 4.0], [-6.0, 6.0]]
)


def build_cartpole_map(bounds: Optional[np.ndarray] = None) -> LiftingMap:
    """Canonical 33-dimensional cartpole embedding.

    ``[1, x, sin x, cos x, sin 2x, sin 4x, T2(x), T3(x), T4(x)]`` with every
    family applied to all four coordinates.
    """
    coords = (0, 1, 2, 3)
    terms = [
        BasisTerm("sin", coords),
        BasisTerm("cos", coords),
        BasisTerm("sin", coords, frequency=2.0),
        BasisTerm("sin", coords, frequency=4.0),
        BasisTerm("chebyshev", coords, order=2),
        BasisTerm("chebyshev", coords, order=3),
        BasisTerm("chebyshev", coords, order=4),
    ]
    bounds = CARTPOLE_BOUNDS if bounds is None else bounds
    return make_lifting_map(4, terms, scales_from_bounds(bounds))


def build_planar_multirotor_map(bounds: Optional[np.ndarray] = None) -> LiftingMap:
    """Canonical 21-dimensional planar multirotor embedding.

    ``[1, x, sin th, cos th, T2(v), T3(v), pairwise products]`` where ``v``
    collects the three velocities and the products couple the linear
    velocities with the attitude trig terms and the angular rate.
    """
    vel = (3, 4, 5)
    terms = [
        BasisTerm("sin", (2,)),
        BasisTerm("cos", (2,)),
        BasisTerm("chebyshev", vel, order=2),
        BasisTerm("chebyshev", vel, order=3),
    ]
    # flat indices: 1 + i for state i, 7 = sin th, 8 = cos th
    vx, vz, om, sin_th, cos_th = 4, 5, 6, 7, 8
    terms.append(
        BasisTerm(
            "product",
            pairs=(
                (vx, sin_th), (vx, cos_th), (vz, sin_th), (vz, cos_th),
                (om, vx), (om, vz),
            ),
        )
    )
    bounds = MULTIROTOR_BOUNDS if bounds is None else bounds
    return make_lifting_map(6, terms, scales_from_bounds(bounds))
