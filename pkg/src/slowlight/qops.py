"""Small operator toolbox shared by the protocol, shot and tomography layers.

Photonic time-bin modes are truncated to the {0, 1} Fock subspace, so every
mode is a qubit and an n-photon register lives in C^(2^n).  Basis ordering is
big-endian in the photon index: bit k of the basis integer is the occupation
of photon k (photon 0 is the most significant bit).
"""

from __future__ import annotations

import numpy as np

ID2 = np.eye(2, dtype=complex)
SX = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SY = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SZ = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)

# annihilator on the {|0>, |1>} subspace
A_OP = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)

PAULIS = {"I": ID2, "X": SX, "Y": SY, "Z": SZ}


def kron_all(ops) -> np.ndarray:
    out = np.array([[1.0 + 0.0j]])
    for op in ops:
        out = np.kron(out, op)
    return out


def single_mode_moment(n: int, m: int) -> np.ndarray:
    """Matrix of (a^dag)^n a^m on one qubit mode, n, m in {0, 1}."""
    if n not in (0, 1) or m not in (0, 1):
        raise ValueError("moment orders are restricted to {0, 1}")
    op = ID2
    if m:
        op = A_OP @ op
    if n:
        op = A_OP.conj().T @ op
    return op


def moment_operator(signature, n_modes: int) -> np.ndarray:
    """Product operator prod_k (a_k^dag)^(n_k) a_k^(m_k).

    signature: sequence of (n_k, m_k) pairs, one per mode.
    """
    if len(signature) != n_modes:
        raise ValueError("signature length must equal mode count")
    return kron_all([single_mode_moment(n, m) for n, m in signature])


def annihilator(k: int, n_modes: int) -> np.ndarray:
    ops = [ID2] * n_modes
    ops[k] = A_OP
    return kron_all(ops)


def pauli_string(label: str) -> np.ndarray:
    return kron_all([PAULIS[c] for c in label])


def all_moment_signatures(n_modes: int):
    """All 4^n signatures ((n_1,m_1),...), ordered by total order then index."""
    sigs = []
    for code in range(4 ** n_modes):
        sig = []
        c = code
        for _ in range(n_modes):
            sig.append(((c >> 1) & 1, c & 1))
            c >>= 2
        sigs.append(tuple(reversed(sig)))
    sigs.sort(key=lambda s: (sum(n + m for n, m in s), s))
    return sigs


def graph_state(n: int, edges) -> np.ndarray:
    """Graph state CZ^(edges) |+>^n as a 2^n vector (reference construction)."""
    dim = 2 ** n
    psi = np.full(dim, 1.0 / np.sqrt(dim), dtype=complex)
    for (a, b) in edges:
        if a == b or not (0 <= a < n) or not (0 <= b < n):
            raise ValueError(f"bad edge ({a}, {b}) for {n} vertices")
        for idx in range(dim):
            if (idx >> (n - 1 - a)) & 1 and (idx >> (n - 1 - b)) & 1:
                psi[idx] = -psi[idx]
    return psi


def stabilizer_operator(vertex: int, n: int, edges) -> np.ndarray:
    """X on `vertex`, Z on its graph neighbours, identity elsewhere."""
    labels = ["I"] * n
    labels[vertex] = "X"
    for (a, b) in edges:
        if a == vertex:
            labels[b] = "Z"
        elif b == vertex:
            labels[a] = "Z"
    return pauli_string("".join(labels))


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of a real vector onto the probability simplex."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    rho = np.nonzero(u > css / np.arange(1, len(v) + 1))[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def project_density(rho: np.ndarray) -> np.ndarray:
    """Nearest (Frobenius) trace-one PSD matrix: eigenvalue simplex projection."""
    herm = 0.5 * (rho + rho.conj().T)
    vals, vecs = np.linalg.eigh(herm)
    vals = project_simplex(vals.real)
    return (vecs * vals) @ vecs.conj().T


def fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Uhlmann fidelity (squared convention), fast paths for pure inputs."""
    rho = np.asarray(rho, dtype=complex)
    sigma = np.asarray(sigma, dtype=complex)
    if rho.ndim == 1 and sigma.ndim == 1:
        return float(abs(np.vdot(rho, sigma)) ** 2)
    if rho.ndim == 1:
        return float(np.real(np.vdot(rho, sigma @ rho)))
    if sigma.ndim == 1:
        return float(np.real(np.vdot(sigma, rho @ sigma)))
    vals, vecs = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    sq = (vecs * np.sqrt(np.clip(vals.real, 0.0, None))) @ vecs.conj().T
    inner = sq @ sigma @ sq
    ivals = np.linalg.eigvalsh(0.5 * (inner + inner.conj().T))
    return float(np.sum(np.sqrt(np.clip(ivals.real, 0.0, None))) ** 2)


def validate_density(rho: np.ndarray, tol: float = 1e-8) -> None:
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("density matrix must be square")
    if abs(np.trace(rho) - 1.0) > tol:
        raise ValueError(f"density matrix trace {np.trace(rho):!r} is not 1")
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        raise ValueError("density matrix is not Hermitian")
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -tol:
        raise ValueError("density matrix has a negative eigenvalue")
