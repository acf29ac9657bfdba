"""Izergin-Korepin 19-vertex transfer matrix: the independent spectral oracle.

The two-site R-matrix is assembled from quantum-group projectors onto total
spin 2, 1, 0,

    Rcheck = P2 + (q^2 x - 1)/(q^2 - x) P1 + (q^3 x + 1)/(q^3 + x) P0

with q = e^{i gamma} and x = e^{2 lambda}, then rescaled by the scalar
gauge i (q^2 - x)(q^3 + x) / (x q^{5/2}) / (2 (sin(gamma/2) - sin(5 gamma/2)))
which normalizes transfer-matrix eigenvalues to match the loop model with
unit empty-vertex weight.  The row transfer matrix

    T = Tr_h [ R_{h,L} ... R_{h,1} e^{i phi Sz_h} ]

commutes with total Sz; the eigenvalues of the loop transfer matrix with
ell through-lines form a subset of the vertex spectrum at magnetisation
m = ell (untwisted for ell > 0, twisted by phi in the zero-leg sector,
where phi = pi - 2 gamma reproduces equal contractible/non-contractible
loop weights).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import product

import numpy as np

from .weights import ParametrizationError

__all__ = [
    "IKRMatrix",
    "MagnetisationSector",
    "build_rmatrix",
    "isotropic_x",
    "transfer_matrix_sector",
    "transfer_spectrum",
    "regime_of",
    "yang_baxter_residual",
    "VertexEigenpacket",
]

_SZ_DIAG = np.array([1.0, 0.0, -1.0])  # spin-1 Sz, basis |+1>, |0>, |-1>


def _uq_spin1(q):
    """Spin-1 generators of the deformed algebra, deformation parameter q.

    [E, F] = (K - K^-1)/(q - q^-1), K E K^-1 = q^2 E, K = q^{2 Sz}.
    """
    qnum = lambda k: (q**k - q**-k) / (q - q**-1)  # noqa: E731
    E = np.zeros((3, 3), complex)
    E[0, 1] = np.sqrt(qnum(1) * qnum(2) + 0j)
    E[1, 2] = np.sqrt(qnum(2) * qnum(1) + 0j)
    F = E.T.copy()
    K = np.diag([q**2, q**0, q ** (-2)]).astype(complex)
    return E, F, K


def _casimir_two_sites(q):
    """Coproduct Casimir F E + (q K + q^-1 K^-1)/(q - q^-1)^2 on two sites."""
    E, F, K = _uq_spin1(q)
    Kinv = np.linalg.inv(K)
    I3 = np.eye(3)
    dE = np.kron(E, I3) + np.kron(Kinv, E)
    dF = np.kron(F, K) + np.kron(I3, F)
    dK = np.kron(K, K)
    dKinv = np.kron(Kinv, Kinv)
    return dF @ dE + (q * dK + dKinv / q) / (q - 1 / q) ** 2


def _casimir_eigenvalue(q, s):
    return (q ** (2 * s + 1) + q ** (-(2 * s + 1))) / (q - 1 / q) ** 2


@lru_cache(maxsize=128)
def _projectors(gamma):
    """Projectors onto total spin 0, 1, 2 inside spin-1 x spin-1."""
    q = np.exp(1j * gamma / 2)
    C = _casimir_two_sites(q)
    cs = [_casimir_eigenvalue(q, s) for s in (0, 1, 2)]
    eye = np.eye(9, dtype=complex)
    projs = []
    for s in (0, 1, 2):
        P = eye.copy()
        for sp in (0, 1, 2):
            if sp != s:
                P = P @ (C - cs[sp] * eye) / (cs[s] - cs[sp])
        projs.append(P)
    return tuple(projs)


@dataclass(frozen=True)
class IKRMatrix:
    """Normalized two-site R-matrix at (gamma, x)."""

    gamma: float
    x: complex
    entries: np.ndarray  # (out1, out2, in1, in2)

    @property
    def matrix(self):
        return self.entries.reshape(9, 9)


def build_rmatrix(gamma, x):
    """Assemble the scalar-gauged R-matrix from quantum-group projectors."""
    x = complex(x)
    q = np.exp(1j * gamma)
    if abs(q**2 - x) < 1e-12 or abs(q**3 + x) < 1e-12:
        raise ParametrizationError(f"singular spectral value x={x} at gamma={gamma}")
    P0, P1, P2 = _projectors(gamma)
    R = P2 + ((q**2 * x - 1) / (q**2 - x)) * P1 + ((q**3 * x + 1) / (q**3 + x)) * P0
    pref = 1j * (q**2 - x) * (q**3 + x) / (x * q**2.5)
    scale = 2 * (np.sin(gamma / 2) - np.sin(5 * gamma / 2))
    R = (pref / scale) * R
    R = R.reshape(3, 3, 3, 3)
    # normalize the empty vertex (both sites Sz = 0) to unit weight, the same
    # normalization that fixes rho_1 = 1 on the loop side
    vac = R[1, 1, 1, 1]
    if abs(vac) < 1e-13:
        raise ParametrizationError("vanishing empty-vertex amplitude; cannot normalize")
    R = R / vac
    return IKRMatrix(gamma=float(gamma), x=x, entries=R)


def isotropic_x(gamma, branch):
    """Isotropic spectral values x = +i q^{3/2} ('plus') and -i q^{3/2} ('minus')."""
    q = np.exp(1j * gamma)
    if branch == "plus":
        return 1j * q**1.5
    if branch == "minus":
        return -1j * q**1.5
    raise ValueError("branch must be 'plus' or 'minus'")


def regime_of(gamma, branch):
    """Regime label for an isotropic point: I for the plus branch; the minus
    branch splits into III (gamma < pi/3) and II (gamma > pi/3)."""
    g = float(gamma)
    if not 0 < g < np.pi:
        raise ValueError("gamma must lie in (0, pi)")
    if branch == "plus":
        return "I"
    if branch != "minus":
        raise ValueError("branch must be 'plus' or 'minus'")
    if abs(g - np.pi / 3) < 1e-12:
        return "boundary"
    return "III" if g < np.pi / 3 else "II"


def yang_baxter_residual(gamma, x, y):
    """Relative max-norm residual of the braid Yang-Baxter relation
    R12(x) R23(xy) R12(y) = R23(y) R12(xy) R23(x) on three sites."""
    eye = np.eye(3)
    r12 = lambda z: np.kron(build_rmatrix(gamma, z).matrix, eye)  # noqa: E731
    r23 = lambda z: np.kron(eye, build_rmatrix(gamma, z).matrix)  # noqa: E731
    lhs = r12(x) @ r23(x * y) @ r12(y)
    rhs = r23(y) @ r12(x * y) @ r23(x)
    return float(np.max(np.abs(lhs - rhs)) / max(np.max(np.abs(lhs)), 1.0))


@dataclass(frozen=True)
class MagnetisationSector:
    """All {-1,0,+1}^L strings with total Sz = m, as indices into 3^L."""

    L: int
    m: int

    def indices(self):
        # site value from trit: 0 -> +1, 1 -> 0, 2 -> -1 (row-major trits)
        L = self.L
        idx = np.arange(3**L)
        tot = np.zeros(3**L, dtype=np.int64)
        rem = idx.copy()
        for _ in range(L):
            tot += 1 - (rem % 3)
            rem //= 3
        return idx[tot == self.m]

    @property
    def dim(self):
        return len(self.indices())


def _aux_site_R(R: IKRMatrix):
    """R_{h,i} = P * Rcheck: [a_out, s_out, a_in, s_in]."""
    # Rcheck entries are [o1, o2, i1, i2] on (aux, site); the permutation
    # swaps the two output factors
    return R.entries.transpose(1, 0, 2, 3)


def _apply_full(R4, L, phi, v):
    """Tr_h[R_h1 R_h2 ... R_hL twist_h] applied to one or more full vectors.

    (T v)[s'] = sum_s Tr[ R(s'_1,s_1) ... R(s'_L,s_L) tw ] v[s], with the
    3x3 auxiliary matrices R(s', s)[a', a] = R4[a', s', a, s].  Sites are
    absorbed right to left; F holds (a, b, done-output-block, pending-input
    -block x batch) with s_k the fastest-varying pending index.
    """
    v = np.asarray(v, dtype=complex)
    single = v.ndim == 1
    if single:
        v = v[:, None]
    nb = v.shape[1]
    tw = np.exp(1j * phi * _SZ_DIAG)
    # F_L[a, b; ; s_1..s_L, batch] = tw[b] delta_ab v[s]
    F = np.zeros((3, 3, 1, 3**L * nb), complex)
    for a in range(3):
        F[a, a, 0, :] = tw[a] * v.reshape(3**L * nb)
    F = F.reshape(3, 3, 1, 3**L, nb)
    sp = 1
    for k in range(L, 0, -1):
        F = F.reshape(3, 3, sp * 3 ** (k - 1), 3, nb)
        F = np.einsum("atcs,cbpsB->atbpB", R4, F, optimize=True)
        # s'-block gains s'_k as its slowest index
        F = F.transpose(0, 2, 1, 3, 4).reshape(3, 3, 3, sp, 3 ** (k - 1) * nb)
        sp *= 3
        F = F.reshape(3, 3, sp, 3 ** (k - 1), nb)
    out = np.einsum("aasB->sB", F.reshape(3, 3, 3**L, nb))
    return out[:, 0] if single else out


def transfer_matrix_sector(gamma, x, L, m, phi=0.0):
    """Dense twisted transfer matrix restricted to the Sz = m sector."""
    if L > 8:
        raise ValueError("dense sector transfer matrices are capped at L = 8")
    R4 = _aux_site_R(build_rmatrix(gamma, x))
    sec = MagnetisationSector(L, m)
    idx = sec.indices()
    dim = len(idx)
    T = np.zeros((dim, dim), complex)
    chunk = 256
    for c0 in range(0, dim, chunk):
        cols = idx[c0 : c0 + chunk]
        V = np.zeros((3**L, len(cols)), complex)
        V[cols, np.arange(len(cols))] = 1.0
        W = _apply_full(R4, L, phi, V)
        T[:, c0 : c0 + chunk] = W[idx, :]
        # magnetisation conservation: nothing may leak out of the sector
        W[idx, :] = 0.0
        if np.max(np.abs(W)) > 1e-10:
            raise AssertionError("transfer matrix does not conserve magnetisation")
    return T


@dataclass
class VertexEigenpacket:
    L: int
    m: int
    phi: float
    values: np.ndarray

    @property
    def leading(self):
        return self.values[0]


def transfer_spectrum(gamma, x, L, m, phi=0.0, k=None):
    """Eigenvalues of the twisted IK transfer matrix in the Sz = m sector,
    sorted by descending real part (full dense spectrum for L <= 8)."""
    T = transfer_matrix_sector(gamma, x, L, m, phi=phi)
    vals = np.linalg.eigvals(T)
    vals = vals[np.argsort(-vals.real)]
    if k is not None:
        vals = vals[:k]
    return VertexEigenpacket(L=L, m=m, phi=float(phi), values=vals)
