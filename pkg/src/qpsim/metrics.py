"""Scalar figures of merit: concurrence, fidelities and visibilities."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import DataError, DomainError

SIGMA_Y = np.array([[0, -1j], [1j, 0]])
_YY = np.kron(SIGMA_Y, SIGMA_Y)


def check_density_matrix(rho, tol: float = 1e-8) -> np.ndarray:
    """Return ``rho`` as an array after checking Hermiticity, trace and positivity."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DomainError("density matrix must be square")
    if not np.allclose(rho, rho.conj().T, atol=tol):
        raise DomainError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > tol:
        raise DomainError(f"density matrix trace is {np.trace(rho).real}")
    if np.linalg.eigvalsh((rho + rho.conj().T) / 2).min() < -tol:
        raise DomainError("density matrix is not positive semidefinite")
    return rho


def concurrence(rho) -> float:
    """Wootters concurrence of a two-qubit state.

    The spin-flip spectrum is taken as the singular values of
    ``sqrt(rho) YY sqrt(rho)*``, which stays accurate for nearly pure states.
    """
    rho = check_density_matrix(rho)
    if rho.shape != (4, 4):
        raise DomainError("concurrence needs a 4x4 matrix")
    s = _psd_sqrt(rho)
    lam = np.linalg.svd(s @ _YY @ s.conj(), compute_uv=False)
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def _psd_sqrt(m):
    w, v = np.linalg.eigh((m + m.conj().T) / 2)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def fidelity(rho, sigma) -> float:
    """Uhlmann fidelity ``(tr sqrt(sqrt(rho) sigma sqrt(rho)))**2``."""
    rho = check_density_matrix(rho)
    sigma = check_density_matrix(sigma)
    s = _psd_sqrt(rho)
    w = np.linalg.eigvalsh(s @ sigma @ s)
    return float(np.sum(np.sqrt(np.clip(w, 0.0, None))) ** 2)


def state_fidelity(rho, psi) -> float:
    """Fidelity of ``rho`` with the pure state vector ``psi``."""
    psi = np.asarray(psi, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    return float(np.real(psi.conj() @ np.asarray(rho) @ psi))


def process_fidelity(chi) -> float:
    """Overlap with the identity map: the (I, I) entry of the Pauli-basis chi matrix."""
    chi = np.asarray(chi)
    if np.linalg.eigvalsh((chi + chi.conj().T) / 2).min() < -1e-8:
        raise DomainError("chi matrix is not positive semidefinite")
    return float(chi[0, 0].real)


def plateau(t_d: Sequence[float], rates: Sequence[float], tau_c: float, factor: float = 3.0) -> float:
    """Mean rate over scan points with ``|t_d| > factor * tau_c``."""
    t = np.asarray(t_d, dtype=float)
    r = np.asarray(rates, dtype=float)
    far = np.abs(t) > factor * tau_c
    if not far.any():
        raise DataError(f"no scan points beyond {factor} tau_c to estimate the plateau")
    return float(r[far].mean())


def dip_visibility(t_d, rates, tau_c: float, c_inf: float | None = None) -> tuple[float, float, float]:
    """``V = (C_inf - C_min) / C_inf``; returns ``(V, C_inf, C_min)``."""
    if c_inf is None:
        c_inf = plateau(t_d, rates, tau_c)
    c_min = float(np.min(rates))
    if c_inf <= 0:
        raise DataError("plateau rate must be positive")
    return (c_inf - c_min) / c_inf, c_inf, c_min


def enhancement(coalesced: float, distinguishable: float) -> float:
    """Coincidence enhancement ``Gamma = C(0) / C(inf)``."""
    if distinguishable <= 0:
        raise DataError("distinguishable-photon rate must be positive")
    return coalesced / distinguishable


def correlation_visibility(enhanced: Sequence[float], suppressed: Sequence[float]) -> float:
    """``(sum enhanced - sum suppressed) / (sum enhanced + sum suppressed)``."""
    e, s = float(np.sum(enhanced)), float(np.sum(suppressed))
    if e + s <= 0:
        raise DataError("no events in the correlation bases")
    return (e - s) / (e + s)
