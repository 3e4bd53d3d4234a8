"""Delay-Doppler operator algebra.

Each path acts on the vectorized MN-point DD grid as the unitary matrix

    T = (F_N kron I_M) P^l D^(k+kappa) (F_N^H kron I_M),

where P is the forward cyclic shift on MN points, D = diag(z^0..z^(MN-1))
with z = exp(j2pi/MN), and D is raised to the real power k+kappa
elementwise. Bin index r splits as r = r1*M + r2 with r1 the Doppler and
r2 the delay coordinate.

The module provides dense constructors for validation, the per-bin
coefficient pair (chi, kappa) that weights beamforming uncertainty and
inter-symbol interference in the closed-form SINR, a fast per-link table
of those coefficients, the fractional-Doppler spreading coefficient of
the scalar input-output relation, and numerical checks of the three
operator identities the rate analysis relies on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import DdPath, OtfsGrid, PathSet
from .exceptions import IdentityCheckError


def dft_matrix(n: int) -> np.ndarray:
    """Unitary DFT matrix, entry (a, b) = exp(-j2pi*a*b/n)/sqrt(n)."""
    idx = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(idx, idx) / n) / np.sqrt(n)


def _doppler_exponent(path: DdPath) -> float:
    return path.doppler_tap + path.frac_doppler


def dd_operator(path: DdPath, grid: OtfsGrid) -> np.ndarray:
    """Dense MN x MN matrix of one path's action on the DD grid."""
    m, n = grid.delay_bins, grid.doppler_bins
    mn = m * n
    if not 0 <= path.delay_tap < m:
        raise ValueError("delay tap outside grid")
    a = _doppler_exponent(path)
    diag = np.exp(2j * np.pi * a * np.arange(mn) / mn)
    # P^l D^a in one shot: column j holds diag[j] at row (j + l) mod MN.
    core = np.zeros((mn, mn), dtype=complex)
    core[(np.arange(mn) + path.delay_tap) % mn, np.arange(mn)] = diag
    f_kron = np.kron(dft_matrix(n), np.eye(m))
    return f_kron @ core @ f_kron.conj().T


def effective_channel(paths: PathSet, grid: OtfsGrid) -> np.ndarray:
    """Effective DD channel of a link: gain-weighted sum of its path
    operators."""
    mn = grid.size
    h = np.zeros((mn, mn), dtype=complex)
    for i in range(paths.n_paths):
        h += paths.gains[i] * dd_operator(paths.path(i), grid)
    return h


def product_row(path_i: DdPath, path_j: DdPath, r: int, grid: OtfsGrid) -> np.ndarray:
    """Row r of T_i T_j^H without forming the full product."""
    t_i = dd_operator(path_i, grid)
    t_j = dd_operator(path_j, grid)
    return t_i[r, :] @ t_j.conj().T


def _same_taps(path_i: DdPath, path_j: DdPath) -> bool:
    return (path_i.delay_tap == path_j.delay_tap
            and path_i.doppler_tap == path_j.doppler_tap
            and path_i.frac_doppler == path_j.frac_doppler)


def chi_kappa(path_i: DdPath, path_j: DdPath, r: int, grid: OtfsGrid):
    """Squared diagonal entry and squared off-diagonal row sum of
    T_i T_j^H at bin r.

    chi weights the precoding-gain uncertainty and kappa the inter-symbol
    interference contributed by the (i, j) path pair. A path paired with
    itself gives (1, 0) since its operator is unitary.
    """
    if not 0 <= r < grid.size:
        raise ValueError("bin index outside grid")
    if _same_taps(path_i, path_j):
        return 1.0, 0.0
    row = product_row(path_i, path_j, r, grid)
    diag = row[r]
    off = row.sum() - diag
    return float(abs(diag) ** 2), float(abs(off) ** 2)


def chi_kappa_tables(paths: PathSet, grid: OtfsGrid):
    """Per-pair (chi, kappa) profiles over the delay coordinate.

    Returns arrays of shape (L, L, M): both coefficients are constant in
    the Doppler coordinate of the bin, so entry [i, j, r2] is the value at
    every bin r with r mod M == r2. Exploits the sparsity of T_i T_j^H:
    its row r has nonzero entries only in the delay block shifted by the
    tap difference, and the block collapses to closed expressions in the
    Doppler phase ramp.
    """
    m, n = grid.delay_bins, grid.doppler_bins
    mn = m * n
    ell = paths.delay_taps
    a_exp = paths.doppler_taps + paths.frac_dopplers
    n_paths = paths.n_paths
    r2 = np.arange(m)
    chi = np.zeros((n_paths, n_paths, m))
    kappa = np.zeros((n_paths, n_paths, m))
    idx = np.arange(n_paths)
    chi[idx, idx, :] = 1.0  # unitary self-product

    # The reversed product is the conjugate transpose of the forward one,
    # so both coefficients are symmetric in (i, j): compute the upper
    # triangle and mirror.
    a_diff = a_exp[:, None] - a_exp[None, :]
    upper = np.triu(np.ones((n_paths, n_paths), dtype=bool), k=1)
    same = (ell[:, None] == ell[None, :]) & upper

    ii, jj = np.nonzero(same)
    if len(ii):
        # Same delay tap: the row's block is aligned with the diagonal.
        # diag = mean of the phase ramp over Doppler blocks, rowsum = the
        # ramp's first element.
        grid_idx = np.arange(n)[:, None] * m + r2[None, :]  # (N, M)
        shifted = (grid_idx[None, :, :] - ell[ii][:, None, None]) % mn
        ramp = np.exp((2j * np.pi / mn) * a_diff[ii, jj][:, None, None] * shifted)
        diag = ramp.sum(axis=1) / n  # (pairs, M)
        rowsum = ramp[:, 0, :]
        chi[ii, jj, :] = chi[jj, ii, :] = np.abs(diag) ** 2
        kappa[ii, jj, :] = kappa[jj, ii, :] = np.abs(rowsum - diag) ** 2

    ii, jj = np.nonzero(upper & ~same)
    if len(ii):
        # Delay taps differ: the diagonal entry vanishes and the row sum
        # has unit magnitude up to rounding.
        shifted = r2[None, :] + (ell[jj] - ell[ii])[:, None]
        u = np.floor_divide(shifted, m)
        rows = ((((-u) % n) * m + r2[None, :] - ell[ii][:, None]) % mn)
        kappa[ii, jj, :] = kappa[jj, ii, :] = np.abs(
            np.exp((2j * np.pi / mn) * a_diff[ii, jj][:, None] * rows)) ** 2
    return chi, kappa


def doppler_spread_sum(c: int, frac_doppler: float, n: int) -> complex:
    """Geometric Doppler-leakage sum over the N symbols of a frame.

    Equals N when c + kappa is zero and vanishes at integer offsets with
    zero fractional Doppler; its squared magnitude divided by N^2 is the
    leaked power at Doppler offset c.
    """
    phases = 2 * np.pi * (c + frac_doppler) * np.arange(n) / n
    return complex(np.exp(1j * phases).sum())


def alpha_coeff(k: int, ell: int, c: int, path: DdPath, grid: OtfsGrid) -> complex:
    """Spreading coefficient of the scalar DD input-output relation at
    observation bin (k, ell), Doppler offset c, for the given path.

    The second branch (observation delay before the path's tap) carries an
    extra full-cycle phase and a reduced spreading sum.
    """
    m, n = grid.delay_bins, grid.doppler_bins
    if not 0 <= ell < m:
        raise ValueError("delay index outside grid")
    k_p, l_p, kap_p = path.doppler_tap, path.delay_tap, path.frac_doppler
    spread = doppler_spread_sum(c, kap_p, n)
    phase = np.exp(-2j * np.pi * (ell - l_p) * (k_p + kap_p) / (m * n))
    if ell >= l_p:
        return (spread / n) * phase
    wrap = np.exp(-2j * np.pi * ((k - k_p + c) % n) / n)
    return ((spread - 1.0) / n) * phase * wrap


@dataclass
class IdentityReport:
    """Worst-case deviations of the three operator identities."""

    unitarity_dev: float
    diag_zero_dev: float
    row_sum_dev: float
    n_paths: int
    n_diag_pairs: int
    tol: float

    @property
    def passed(self) -> bool:
        return (self.unitarity_dev <= self.tol
                and self.diag_zero_dev <= self.tol
                and self.row_sum_dev <= self.tol)


def verify_operator_identities(paths: PathSet, grid: OtfsGrid,
                               tol: float = 1e-9) -> IdentityReport:
    """Check the operator identities on dense matrices.

    Measures, over all paths and ordered pairs: the max-norm deviation of
    T T^H from the identity; the largest diagonal magnitude of T_i T_j^H
    for pairs whose delay taps differ modulo M; and the largest deviation
    of any squared row-sum magnitude of T_i T_j^H from one. Raises
    IdentityCheckError naming the violated property if any deviation
    exceeds tol. Intended for grids with MN up to about 1024.
    """
    m = grid.delay_bins
    mn = grid.size
    mats = np.stack([dd_operator(paths.path(i), grid)
                     for i in range(paths.n_paths)])
    eye = np.eye(mn)
    unit_dev = max(
        float(np.max(np.abs(t @ t.conj().T - eye))) for t in mats
    )
    # Diagonals of all pairwise products without forming the products.
    diags = np.einsum("irc,jrc->ijr", mats, mats.conj())
    delta_ell = (paths.delay_taps[:, None] - paths.delay_taps[None, :]) % m
    off_pairs = delta_ell != 0
    n_diag_pairs = int(off_pairs.sum())
    diag_dev = float(np.max(np.abs(diags[off_pairs]))) if n_diag_pairs else 0.0
    # Row sums of T_i T_j^H are T_i times the conjugated column sums of T_j.
    col_sums = mats.conj().sum(axis=1)
    row_sums = np.einsum("irc,jc->ijr", mats, col_sums)
    row_dev = float(np.max(np.abs(np.abs(row_sums) ** 2 - 1.0)))

    report = IdentityReport(unitarity_dev=unit_dev, diag_zero_dev=diag_dev,
                            row_sum_dev=row_dev, n_paths=paths.n_paths,
                            n_diag_pairs=n_diag_pairs, tol=tol)
    if unit_dev > tol:
        raise IdentityCheckError(
            f"unitarity violated: deviation {unit_dev:.3e} > {tol:.1e}")
    if diag_dev > tol:
        raise IdentityCheckError(
            "distinct-delay diagonal not zero: deviation "
            f"{diag_dev:.3e} > {tol:.1e}")
    if row_dev > tol:
        raise IdentityCheckError(
            f"row-sum magnitude not unit: deviation {row_dev:.3e} > {tol:.1e}")
    return report
