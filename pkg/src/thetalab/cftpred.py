"""Closed-form continuum predictions for the collapsing-polymer loop model.

Everything here is an exact function of the crossing parameter gamma (or of
Coulomb-gas / sigma-model data): central charges, watermelon exponents,
logarithmically corrected effective central charges from the non-compact
continuum, polymer exponents at the two theta points, the twist dependence
of the ground state, the second-virial expansion coefficients, Coulomb-gas
exponents for the completely packed point, and the cigar sigma-model
spectrum with its reflection amplitude.  The numerical pipelines treat
these as ground truth.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np
from scipy.special import loggamma

__all__ = [
    "c_discrete",
    "coupling_A",
    "N_mj",
    "ceff_continuum",
    "gap_to_continuum",
    "watermelon",
    "watermelon_dense",
    "polymer_exponents",
    "central_charge_twist",
    "virial_prediction",
    "coulomb_gas",
    "coulomb_gas_central_charge",
    "theta_ds_exponent",
    "blackhole_dimension",
    "minisuperspace_dimension",
    "nu_of_level",
    "reflection_amplitude",
]


def c_discrete(gamma):
    """Central charge of the twisted zero-leg ground state (a discrete level):
    c = -1 + 12 gamma^2 / (pi (pi - gamma))."""
    g = float(gamma)
    if not 0 < g < np.pi:
        raise ValueError("gamma must lie in (0, pi)")
    return -1.0 + 12.0 * g**2 / (np.pi * (np.pi - g))


def coupling_A(gamma):
    """Universal amplitude of the log-corrected continuum levels:
    A = (5/2) gamma (pi - gamma) / (pi - 3 gamma)^2."""
    g = float(gamma)
    den = (np.pi - 3 * g) ** 2
    if den < 1e-24:
        raise ZeroDivisionError("A(gamma) is singular at gamma = pi/3")
    return 2.5 * g * (np.pi - g) / den


def N_mj(m, j):
    """Integer level index: N = 2j + 1 for even m, 2j + 2 for odd m."""
    if j < 0 or m < 0:
        raise ValueError("m and j must be non-negative")
    return 2 * j + (3 - (-1) ** m) // 2


def ceff_continuum(gamma, m, j, L, B):
    """Finite-size effective central charge of the (m, j) continuum level.

    m > 0 (untwisted):  c = 2 - 3 m^2 gamma / pi - 12 N^2 A / (B + log L)^2
    m = 0, j > 0 (twisted): c = 2 - 12 gamma / pi - 12 N^2 A / (B + log L)^2
    """
    if L < 2:
        raise ValueError("L must be >= 2")
    g = float(gamma)
    A = coupling_A(g)
    N = N_mj(m, j)
    corr = 12.0 * N**2 * A / (B + np.log(L)) ** 2
    if m > 0:
        return 2.0 - 3.0 * m**2 * g / np.pi - corr
    return 2.0 - 12.0 * g / np.pi - corr


def gap_to_continuum(gamma):
    """Distance between the twisted ground state and the bottom of the
    zero-leg continuum: x_g = gamma/(pi - gamma) - 1/4."""
    g = float(gamma)
    return g / (np.pi - g) - 0.25


def watermelon(gamma, m):
    """m-leg watermelon exponent.

    x_m = -(c_{m,0} - c_{0,0})/12 with c_{m,0} = 2 - 3 m^2 gamma/pi and the
    discrete-state c_{0,0}, i.e.

        x_m = -1/4 + m^2 gamma/(4 pi) + gamma^2/(pi (pi - gamma)),

    which reduces to m^2/16 - 1/6 at the polymer point gamma = pi/4.
    """
    g = float(gamma)
    if m < 0:
        raise ValueError("m must be >= 0")
    return -0.25 + m**2 * g / (4 * np.pi) + g**2 / (np.pi * (np.pi - g))


def watermelon_dense(m):
    """Dense-polymer counterpart x_m = (m^2 - 4)/16, equal to the dilute
    polymer-point value shifted by -1/12."""
    return (m**2 - 4) / 16.0


def polymer_exponents(point="ThetaBN"):
    """Exact polymer exponents {nu, gamma, nu_prime, phi} as Fractions.

    ThetaBN: from the watermelon exponents x_1 = -5/48, x_2 = 1/12 via
    nu = 1/(2 - x_2) and gamma = nu (2 - 2 x_1), with crossover
    phi = nu/nu' = 10/23 (nu' = 6/5).  ThetaDS: the percolation-class
    values nu = 4/7, gamma = 8/7, phi = 3/7 (nu' = nu/phi = 4/3).
    """
    if point == "ThetaBN":
        x1 = Fraction(-5, 48)
        x2 = Fraction(1, 12)
        nu = 1 / (2 - x2)
        gamma_exp = nu * (2 - 2 * x1)
        nu_prime = Fraction(6, 5)
        phi = nu / nu_prime
        return {"nu": nu, "gamma": gamma_exp, "nu_prime": nu_prime, "phi": phi}
    if point == "ThetaDS":
        nu = Fraction(4, 7)
        phi = Fraction(3, 7)
        return {"nu": nu, "gamma": Fraction(8, 7), "nu_prime": nu / phi, "phi": phi}
    raise ValueError("point must be 'ThetaBN' or 'ThetaDS'")


def central_charge_twist(phi):
    """Ground-state central charge as a function of the twist at gamma = pi/4.

    For phi <= pi/4 the ground state sits at the bottom of the continuum,
    c = 2 - 12 phi^2/pi^2; for phi >= pi/4 a normalizable discrete level
    takes over, c = -1 + 4 (pi - phi)^2/pi^2.  The branches agree at
    phi = pi/4 (c = 5/4).
    """
    p = float(phi)
    if not 0 <= p <= np.pi:
        raise ValueError("phi must lie in [0, pi]")
    if p <= np.pi / 4:
        return 2.0 - 12.0 * p**2 / np.pi**2
    return -1.0 + 4.0 * (np.pi - p) ** 2 / np.pi**2


def virial_prediction():
    """Expansion coefficients of L log Lambda_0 in the non-contractible-loop
    fugacity at the collapsing-polymer point: (1/3, 1/(6 pi))."""
    return (1.0 / 3.0, 1.0 / (6.0 * np.pi))


def coulomb_gas(g, e0, e, m):
    """Coulomb-gas exponent x_{e,m} = e(e - e0)/(2g) + g m^2 / 2."""
    if g <= 0:
        raise ValueError("coupling g must be positive")
    return e * (e - e0) / (2.0 * g) + g * m**2 / 2.0


def coulomb_gas_central_charge(g, e0):
    """c = 1 - 6 e0^2 / g."""
    if g <= 0:
        raise ValueError("coupling g must be positive")
    return 1.0 - 6.0 * e0**2 / g


def theta_ds_exponent(e, m):
    """Exponents at the completely packed theta point (g = 2/3, e0 = 1/3):
    x = e(3e - 1)/4 + m^2/3."""
    return e * (3 * e - 1) / 4.0 + m**2 / 3.0


def blackhole_dimension(k, j_bh, n_bh, w):
    """Conformal weights of the cigar sigma model:
    Delta, DeltaBar = -j(j+1)/(k-2) + (n +- k w)^2 / (4k)."""
    if k <= 2:
        raise ValueError("level k must exceed 2")
    j = complex(j_bh)
    base = -(j * (j + 1)) / (k - 2)
    d = base + (n_bh + k * w) ** 2 / (4.0 * k)
    dbar = base + (n_bh - k * w) ** 2 / (4.0 * k)
    if abs(d.imag) < 1e-14 and abs(dbar.imag) < 1e-14:
        return d.real, dbar.real
    return d, dbar


def minisuperspace_dimension(k, j_bh, n_bh):
    """Laplacian eigenvalue on the cigar: x = -2 j(j+1)/k + n^2/(2k)."""
    if k <= 0:
        raise ValueError("level k must be positive")
    j = complex(j_bh)
    x = -2.0 * j * (j + 1) / k + n_bh**2 / (2.0 * k)
    return x.real if abs(x.imag) < 1e-14 else x


def nu_of_level(k):
    """Correlation-length exponent along the fugacity direction:
    nu = 2(k-2)/(4k-9); equals 12/23 at k = 8."""
    if k <= 2:
        raise ValueError("level k must exceed 2")
    return 2.0 * (k - 2) / (4.0 * k - 9.0)


def reflection_amplitude(p, n_bh):
    """Classical reflection amplitude of the cigar:
    R0 = Gamma(ip) Gamma^2(1/2 - ip/2 + n/2) / (Gamma(-ip) Gamma^2(1/2 + ip/2 + n/2)).

    Evaluated through complex log-Gamma for stability; |R0| = 1 for real
    momentum p and integer n.
    """
    p = float(p)
    if p == 0.0:
        raise ZeroDivisionError("reflection amplitude has a pole at p = 0")
    if n_bh < 0 or int(n_bh) != n_bh:
        raise ValueError("angular momentum n must be a non-negative integer")
    n = int(n_bh)
    logr = (
        loggamma(1j * p)
        - loggamma(-1j * p)
        + 2.0 * loggamma(0.5 - 0.5j * p + 0.5 * n)
        - 2.0 * loggamma(0.5 + 0.5j * p + 0.5 * n)
    )
    return complex(np.exp(logr))
