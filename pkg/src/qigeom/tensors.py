"""Containers for rank-2 geometric tensors and rank-3 connection fields."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GeometricTensor:
    """Complex ``n x n`` tensor with its four canonical parts.

    With ``S`` and ``A`` the symmetric and antisymmetric parts of ``matrix``::

        matrix = g + 1j * g_tilde + 1j * omega + omega_tilde
        g = Re S,  g_tilde = Im S,  omega = Im A,  omega_tilde = Re A

    All four accessors return real arrays; ``omega`` and ``g_tilde`` are the
    coefficients of the imaginary unit.
    """

    matrix: np.ndarray

    @property
    def sym(self) -> np.ndarray:
        return 0.5 * (self.matrix + self.matrix.T)

    @property
    def antisym(self) -> np.ndarray:
        return 0.5 * (self.matrix - self.matrix.T)

    @property
    def g(self) -> np.ndarray:
        return self.sym.real

    @property
    def g_tilde(self) -> np.ndarray:
        return self.sym.imag

    @property
    def omega(self) -> np.ndarray:
        return self.antisym.imag

    @property
    def omega_tilde(self) -> np.ndarray:
        return self.antisym.real

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def parts(self) -> dict:
        return {"g": self.g, "omega": self.omega, "g_tilde": self.g_tilde,
                "omega_tilde": self.omega_tilde}

    def recompose(self) -> np.ndarray:
        return self.g + 1j * self.g_tilde + 1j * self.omega + self.omega_tilde

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))


@dataclass(frozen=True)
class ConnectionField:
    """Lowered connection coefficients ``coeffs[i, j, k] = Gamma_{ij,k}``."""

    coeffs: np.ndarray

    @property
    def n(self) -> int:
        return self.coeffs.shape[0]

    def symmetry_defect(self) -> float:
        return float(np.max(np.abs(self.coeffs - np.swapaxes(self.coeffs, 0, 1)), initial=0.0))

    @property
    def real(self) -> "ConnectionField":
        return ConnectionField(self.coeffs.real)

    def conj(self) -> "ConnectionField":
        return ConnectionField(np.conj(self.coeffs))

    def __add__(self, other: "ConnectionField") -> "ConnectionField":
        return ConnectionField(self.coeffs + other.coeffs)

    def __sub__(self, other: "ConnectionField") -> "ConnectionField":
        return ConnectionField(self.coeffs - other.coeffs)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.coeffs), initial=0.0))

    def raised(self, metric: np.ndarray, rcond: float = 1e-10) -> np.ndarray:
        """Christoffel symbols ``Gamma^k_{ij}`` via a pseudo-inverse of ``metric``."""
        ginv = np.linalg.pinv(metric, rcond=rcond)
        return np.einsum("ijl,lk->kij", self.coeffs, ginv)


def compatibility_residual(dmetric: np.ndarray, gamma_a: np.ndarray, gamma_b: np.ndarray) -> np.ndarray:
    """``d_k g_ij - Gamma^a_{ik,j} - Gamma^b_{jk,i}`` indexed ``[i, j, k]``.

    ``dmetric[k, i, j] = d_k g_ij``.
    """
    dg = np.transpose(dmetric, (1, 2, 0))
    # gamma_a[i, k, j] -> [i, j, k]; gamma_b[j, k, i] -> [i, j, k]
    return dg - np.transpose(gamma_a, (0, 2, 1)) - np.transpose(gamma_b, (2, 0, 1))
