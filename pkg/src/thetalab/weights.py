"""Integrable parametrization of the dilute O(n) loop model on the square lattice.

The model assigns one of nine local configurations to every lattice site
(empty, four corners, two straight segments, two ways for a pair of strands
to avoid each other on a doubly visited site) with weights rho_1..rho_9,
plus a non-local weight n per closed loop.  The integrable weights are
trigonometric functions of a crossing parameter gamma (fixing the loop
weight n = -2 cos 2*gamma) and a spectral value; the two isotropic spectral
values per gamma give the solvable points used throughout:

    ThetaBN  - the collapsing-polymer multicritical point (gamma = pi/4)
    Dense    - dense polymers                         (gamma = pi/4)
    Dilute   - ordinary SAW criticality               (gamma = 3*pi/4)
    RegimeII - the fourth branch, with a negative coupling (gamma = 3*pi/4)
    ThetaDS  - the p = 0 theta point, reached instead from the completely
               packed model via the n+1 colouring trick (no (gamma, u) form)

Lattice couplings: p per straight segment, K per monomer (edge), tau per
doubly visited site; on normalized weights (rho_1 = 1) these are simply
p = rho_6/rho_2, K = rho_2/rho_1, tau = rho_1*rho_8/rho_2**2.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "CrossingParameter",
    "VertexWeights",
    "LatticeCouplings",
    "IntegrablePoint",
    "TwistSetting",
    "ParametrizationError",
    "zb_weights",
    "isotropic_points",
    "named_point",
    "twist_for_loop_weight",
    "loop_weight",
    "NAMED_POINT_TAGS",
]


class ParametrizationError(ValueError):
    """Raised for spectral/crossing values where the trigonometric weights degenerate."""


def loop_weight(gamma):
    """Weight of a closed loop, n = -2 cos(2*gamma)."""
    return -2.0 * np.cos(2.0 * gamma)


@dataclass(frozen=True)
class CrossingParameter:
    """Crossing parameter gamma in (0, pi); fixes the loop weight n in [-2, 2]."""

    gamma: float

    def __post_init__(self):
        if not 0.0 < self.gamma < np.pi:
            raise ValueError(f"gamma must lie in (0, pi), got {self.gamma}")

    @property
    def n(self):
        return loop_weight(self.gamma)


@dataclass(frozen=True)
class TwistSetting:
    """Boundary twist phi giving non-contractible loops weight 2 cos phi."""

    phi: float

    @property
    def n_noncontractible(self):
        return 2.0 * np.cos(self.phi)


@dataclass(frozen=True)
class LatticeCouplings:
    """Stiffness p (per straight segment), fugacity K (per monomer), contact tau."""

    p: float
    K: float
    tau: float

    @property
    def w(self):
        return self.K**2 * self.tau

    def to_weights(self, n=0.0):
        """Isotropic normalized vertex weights realizing these couplings.

        rho_1 = 1, all corners K, both straights p*K, both contact
        resolutions tau*K**2.
        """
        K, p, tau = self.K, self.p, self.tau
        rho = np.array([1.0, K, K, K, K, p * K, p * K, tau * K**2, tau * K**2])
        return VertexWeights(rho=rho, n=float(n))


@dataclass(frozen=True)
class VertexWeights:
    """The nine local Boltzmann weights plus the closed-loop weight n.

    Order: rho_1 empty; rho_2, rho_3 the {S,E} / {N,W} corner pair;
    rho_4, rho_5 the {S,W} / {N,E} corner pair; rho_6, rho_7 the
    horizontal / vertical straight segments; rho_8, rho_9 the two
    non-crossing resolutions of a doubly visited site
    ({(S,E),(W,N)} and {(S,W),(E,N)} respectively).
    """

    rho: np.ndarray
    n: float

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=float)
        if rho.shape != (9,):
            raise ValueError("expected nine vertex weights")
        object.__setattr__(self, "rho", rho)
        if not np.all(np.isfinite(rho)):
            raise ParametrizationError("non-finite vertex weight")

    def couplings(self):
        rho = self.rho
        p = rho[5] / rho[1]
        K = rho[1] / rho[0]
        tau = rho[0] * rho[7] / rho[1] ** 2
        return LatticeCouplings(p=float(p), K=float(K), tau=float(tau))

    @property
    def all_positive(self):
        return bool(np.all(self.rho > 0))


NAMED_POINT_TAGS = ("ThetaBN", "Dense", "Dilute", "RegimeII", "ThetaDS")


@dataclass(frozen=True)
class IntegrablePoint:
    """One of the named solvable points, with its (gamma, spectral-branch) data."""

    tag: str
    gamma: float | None = None
    branch: str | None = None  # 'plus'/'minus' isotropic branch, None for ThetaDS
    couplings: LatticeCouplings = field(default=None)

    @property
    def has_spectral_form(self):
        return self.branch is not None


def isotropic_points(gamma):
    """The two spectral values (u_plus, u_minus) where the weights are isotropic.

    u_pm = i*(3*gamma/4 +- pi/4); at either value rho_2 = rho_4 and
    rho_8 = rho_9 after canonicalization.
    """
    g = float(gamma)
    if not 0.0 < g < np.pi:
        raise ValueError("gamma must lie in (0, pi)")
    return 1j * (3 * g / 4 + np.pi / 4), 1j * (3 * g / 4 - np.pi / 4)


def _zb_raw(gamma, u):
    """Trigonometric weights before normalization; u is the spectral value."""
    lzb = np.pi / 2 - gamma / 2
    uzb = 1j * complex(u)
    s2 = np.sin(2 * lzb)
    s3 = np.sin(3 * lzb)
    if abs(s2) < 1e-13 or abs(s3) < 1e-13:
        raise ParametrizationError(
            f"degenerate parametrization at gamma={gamma}: sin(2*lambda) or sin(3*lambda) vanishes"
        )
    r = np.empty(9, dtype=complex)
    r[0] = 1 + np.sin(uzb) * np.sin(3 * lzb - uzb) / (s2 * s3)
    r[1] = r[2] = np.sin(3 * lzb - uzb) / s3
    # the rho_4, rho_5 pair carries an extra sign flip relative to the bare
    # trigonometric form; together with the canonicalization below this makes
    # every weight at the polymer point manifestly positive
    r[3] = r[4] = -np.sin(uzb) / s3
    r[5] = r[6] = np.sin(uzb) * np.sin(3 * lzb - uzb) / (s2 * s3)
    r[7] = np.sin(2 * lzb - uzb) * np.sin(3 * lzb - uzb) / (s2 * s3)
    r[8] = -np.sin(uzb) * np.sin(lzb - uzb) / (s2 * s3)
    return r


def zb_weights(gamma, u):
    """Normalized vertex weights at crossing parameter gamma and spectral value u.

    Normalization fixes rho_1 = 1 (so the partition function at n = 0 is
    unity and the bulk free energy vanishes).  Residual sign freedom is
    fixed by three gauge flips that each change the weight of every closed
    loop configuration by +1 (a closed path on the square lattice traverses
    an even number of edges, an even number of straight segments and an
    even number of corners from either reflection pair):

      * rho_2..rho_7 flipped if rho_2 < 0  (sign per monomer)
      * rho_6, rho_7 flipped if rho_6 < 0  (sign per straight segment)
      * rho_4, rho_5 flipped if rho_4 < 0  (sign per corner of one pair)

    With these choices the couplings (p, K, tau) derived from the result
    reproduce the closed forms of all four (gamma, u)-parametrized named
    points, and the weights at ThetaBN, Dense and Dilute are all positive.
    """
    r = _zb_raw(gamma, u)
    if abs(r[0]) < 1e-13:
        raise ParametrizationError("rho_1 vanishes; cannot normalize")
    r = r / r[0]
    if np.max(np.abs(r.imag)) > 1e-10 * max(1.0, np.max(np.abs(r))):
        raise ParametrizationError(
            "complex weights: spectral value is not on an isotropic/physical line"
        )
    r = r.real.copy()
    if r[1] < 0:
        r[1:7] *= -1.0
    if r[5] < 0:
        r[5:7] *= -1.0
    if r[3] < 0:
        r[3:5] *= -1.0
    return VertexWeights(rho=r, n=loop_weight(gamma))


def _theta_ds_weights():
    # completely packed loops with n+1 colouring at n = 0: before
    # normalization rho_1 = 2, corners = 1, straights = 0, contacts = 1
    rho = np.array([1.0, 0.5, 0.5, 0.5, 0.5, 0.0, 0.0, 0.5, 0.5])
    return VertexWeights(rho=rho, n=0.0)


def named_point(tag):
    """Weights and couplings of a named solvable point.

    Returns (IntegrablePoint, VertexWeights).  Couplings are evaluated from
    exact trigonometric closed forms, not decimals.
    """
    s, c, t = np.sin, np.cos, np.tan
    sq2 = np.sqrt(2.0)
    if tag == "ThetaBN":
        gamma, branch = np.pi / 4, "minus"
        cpl = LatticeCouplings(
            p=sq2 * s(np.pi / 16),
            K=1.0 / (2 * c(np.pi / 16) * (1 + t(np.pi / 16) / sq2)),
            tau=0.5 * (2 + sq2 + np.sqrt(2 + sq2)),
        )
    elif tag == "Dense":
        gamma, branch = np.pi / 4, "plus"
        cpl = LatticeCouplings(
            p=sq2 * c(np.pi / 16),
            K=1.0 / (sq2 * c(np.pi / 16) - 2 * s(np.pi / 16)),
            tau=1 + 1 / sq2 - np.sqrt(0.5 + 0.5 / sq2),
        )
    elif tag == "Dilute":
        gamma, branch = 3 * np.pi / 4, "plus"
        cpl = LatticeCouplings(
            p=sq2 * s(3 * np.pi / 16),
            K=sq2 * s(3 * np.pi / 16) / (1 + c(np.pi / 8)),
            tau=1 - 1 / sq2 + np.sqrt(0.5 - 0.5 / sq2),
        )
    elif tag == "RegimeII":
        gamma, branch = 3 * np.pi / 4, "minus"
        cpl = LatticeCouplings(
            p=sq2 * c(3 * np.pi / 16),
            K=4 * s(3 * np.pi / 16) * s(np.pi / 8) / (1 - 8 * s(np.pi / 8) * s(3 * np.pi / 16) ** 2),
            tau=-(1 - np.sqrt(0.5 + 0.5 / sq2)) * c(np.pi / 16) / c(3 * np.pi / 16),
        )
    elif tag == "ThetaDS":
        w = _theta_ds_weights()
        cpl = w.couplings()
        return IntegrablePoint(tag=tag, gamma=None, branch=None, couplings=cpl), w
    else:
        raise ValueError(f"unknown integrable point {tag!r}; expected one of {NAMED_POINT_TAGS}")

    up, um = isotropic_points(gamma)
    w = zb_weights(gamma, up if branch == "plus" else um)
    return IntegrablePoint(tag=tag, gamma=gamma, branch=branch, couplings=cpl), w


def twist_for_loop_weight(gamma):
    """Twist phi = pi - 2*gamma, making non-contractible loops weigh the same as
    contractible ones: 2 cos(pi - 2*gamma) = -2 cos(2*gamma) = n."""
    g = float(gamma)
    if not 0.0 < g < np.pi:
        raise ValueError("gamma must lie in (0, pi)")
    return TwistSetting(phi=np.pi - 2 * g)
