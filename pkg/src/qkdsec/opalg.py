"""Dense complex linear algebra on Hermitian operators.

Operators are plain ``numpy`` complex arrays of shape ``(dim, dim)``.
Composite systems use row-major indexing: the leftmost tensor factor is the
most significant index, so ``tensor(a, b)[i*db + j, k*db + l] == a[i, k] * b[j, l]``.
"""

from __future__ import annotations

import math
from typing import NamedTuple, Sequence

import numpy as np

from .config import get_config
from .errors import NumericalError, ResourceError, ValidationError


class Spectrum(NamedTuple):
    """Eigenvalues sorted descending, eigenvectors as matching columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def as_operator(a, name: str = "operator") -> np.ndarray:
    """Coerce to a square complex matrix, validating shape and self-adjointness."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise ValidationError(f"{name} must be a non-empty square matrix, got shape {m.shape}")
    tol = get_config().hermitian_tol
    dev = np.max(np.abs(m - m.conj().T))
    if dev > tol * max(1.0, float(np.max(np.abs(m)))):
        raise ValidationError(f"{name} is not Hermitian (max |A - A^dagger| = {dev:.3e})")
    return m


def check_dim(dim: int, what: str = "operator") -> None:
    cap = get_config().dim_cap
    if dim > cap:
        raise ResourceError(f"{what} dimension {dim} exceeds cap {cap}")


def jacobi_eigh(a: np.ndarray, max_sweeps: int | None = None, tol: float | None = None) -> Spectrum:
    """Cyclic Jacobi eigendecomposition of a complex Hermitian matrix.

    Each sweep visits every off-diagonal pivot once; iteration stops when the
    off-diagonal Frobenius norm drops below ``tol`` (relative to the full
    Frobenius norm, absolute for the zero matrix).
    """
    cfg = get_config()
    max_sweeps = cfg.jacobi_max_sweeps if max_sweeps is None else max_sweeps
    tol = cfg.jacobi_tol if tol is None else tol

    m = np.array(a, dtype=complex)
    n = m.shape[0]
    v = np.eye(n, dtype=complex)
    scale = max(np.linalg.norm(m), 1.0)

    def off(x):
        return float(np.linalg.norm(x - np.diag(np.diag(x))))

    for _ in range(max_sweeps):
        if off(m) <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                b = m[p, q]
                if abs(b) <= 1e-300:
                    continue
                phase = b / abs(b)
                theta = 0.5 * math.atan2(2.0 * abs(b), (m[p, p] - m[q, q]).real)
                c, s = math.cos(theta), math.sin(theta)
                g = np.array([[c, -s], [s * phase.conjugate(), c * phase.conjugate()]])
                idx = [p, q]
                m[:, idx] = m[:, idx] @ g
                m[idx, :] = g.conj().T @ m[idx, :]
                v[:, idx] = v[:, idx] @ g
                m[p, q] = m[q, p] = 0.0
    else:
        if off(m) > tol * scale:
            raise NumericalError(
                f"Jacobi eigensolver did not converge on {n}x{n} matrix "
                f"after {max_sweeps} sweeps (off-diagonal norm {off(m):.3e})"
            )

    w = np.diag(m).real.copy()
    order = np.argsort(-w, kind="stable")
    return Spectrum(w[order], v[:, order])


def eig_hermitian(a) -> Spectrum:
    m = as_operator(a)
    if get_config().eig_backend == "jacobi":
        return jacobi_eigh(m)
    if not np.any(m - np.diag(np.diag(m))):
        w = np.diag(m).real
        order = np.argsort(-w, kind="stable")
        return Spectrum(w[order], np.eye(m.shape[0], dtype=complex)[:, order])
    try:
        w, v = np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigh failed on {m.shape[0]}x{m.shape[0]} matrix: {exc}") from exc
    return Spectrum(w[::-1].copy(), v[:, ::-1].copy())


def eigvalsh(a) -> np.ndarray:
    """Eigenvalues only, descending. Cheaper than :func:`eig_hermitian`."""
    m = as_operator(a)
    if get_config().eig_backend == "jacobi":
        return jacobi_eigh(m).eigenvalues
    if not np.any(m - np.diag(np.diag(m))):
        return np.sort(np.diag(m).real)[::-1]
    return np.linalg.eigvalsh(m)[::-1]


def trace_norm(a) -> float:
    """Sum of absolute eigenvalues of a Hermitian operator."""
    return float(np.sum(np.abs(eigvalsh(a))))


def _psd_function(spec: Spectrum, fn) -> np.ndarray:
    w = spec.eigenvalues
    if np.any(w < -get_config().psd_tol):
        raise ValidationError(f"operator has negative eigenvalue {w.min():.3e}")
    w = np.clip(w, 0.0, None)
    v = spec.eigenvectors
    return (v * fn(w)) @ v.conj().T


def sqrtm_psd(a) -> np.ndarray:
    """Square root of a positive semidefinite operator; tiny negative eigenvalues are clamped."""
    return _psd_function(eig_hermitian(a), np.sqrt)


def validate_density(a, name: str = "state") -> np.ndarray:
    m = as_operator(a, name)
    cfg = get_config()
    tr = np.trace(m).real
    if abs(tr - 1.0) > cfg.trace_tol:
        raise ValidationError(f"{name} has trace {tr!r}, expected 1")
    w = eigvalsh(m)
    if w[-1] < -cfg.psd_tol:
        raise ValidationError(f"{name} has negative eigenvalue {w[-1]:.3e}")
    return m


def fidelity(a, b) -> float:
    """Root fidelity ``tr sqrt(sqrt(A) B sqrt(A))`` of two density operators."""
    a = validate_density(a, "first state")
    b = validate_density(b, "second state")
    if a.shape != b.shape:
        raise ValidationError(f"dimension mismatch {a.shape} vs {b.shape}")
    # With A = X X^dag and B = Y Y^dag the fidelity is the nuclear norm of
    # X^dag Y. Eigenvalues below the solver's resolution are dropped from the
    # factors: their square roots would otherwise add ~1e-8 of pure noise.
    x, y = _root_factor(a), _root_factor(b)
    if x.shape[1] == 0 or y.shape[1] == 0:
        return 0.0
    return float(min(np.sum(np.linalg.svd(x.conj().T @ y, compute_uv=False)), 1.0))


def _root_factor(a: np.ndarray) -> np.ndarray:
    spec = eig_hermitian(a)
    w = spec.eigenvalues
    keep = w > 64 * np.finfo(float).eps * a.shape[0] * max(float(w.max()), 0.0)
    return spec.eigenvectors[:, keep] * np.sqrt(w[keep])


def tensor(*ops) -> np.ndarray:
    """Kronecker product, leftmost factor most significant."""
    if not ops:
        raise ValidationError("tensor needs at least one operand")
    dim = 1
    for op in ops:
        dim *= np.shape(op)[0]
    check_dim(dim, "tensor product")
    out = np.asarray(ops[0], dtype=complex)
    for op in ops[1:]:
        out = np.kron(out, np.asarray(op, dtype=complex))
    return out


def partial_trace(a, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Trace out every subsystem not listed in ``keep``.

    Args:
        a: operator on the composite space.
        dims: dimensions of the tensor factors, leftmost most significant.
        keep: indices of subsystems to retain, in any order; the result keeps
            them in their original relative order.
    """
    m = np.asarray(a, dtype=complex)
    dims = [int(d) for d in dims]
    if any(d < 1 for d in dims) or math.prod(dims) != m.shape[0] or m.shape[0] != m.shape[1]:
        raise ValidationError(f"subsystem dims {dims} inconsistent with operator shape {m.shape}")
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= len(dims) for k in keep):
        raise ValidationError(f"keep indices {keep} out of range for {len(dims)} subsystems")
    n = len(dims)
    t = m.reshape(dims + dims)
    # einsum labels: row indices then column indices; traced pairs share a label
    letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
    if 2 * n > len(letters):
        raise ResourceError(f"too many subsystems ({n}) for partial_trace")
    rows = list(letters[:n])
    cols = [rows[i] if i not in keep else letters[n + i] for i in range(n)]
    out = "".join(rows[i] for i in keep) + "".join(cols[i] for i in keep)
    kd = math.prod(dims[i] for i in keep)
    return np.einsum("".join(rows) + "".join(cols) + "->" + out, t).reshape(kd, kd)


def ket(index: int, dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def projector(vec) -> np.ndarray:
    v = np.asarray(vec, dtype=complex).reshape(-1)
    return np.outer(v, v.conj())


def matrix_to_doc(a) -> dict:
    """``{"dim", "re", "im"}`` document, row-major nested lists of floats."""
    m = np.asarray(a, dtype=complex)
    return {
        "dim": int(m.shape[0]),
        "re": [[float(x) for x in row] for row in m.real],
        "im": [[float(x) for x in row] for row in m.imag],
    }


def matrix_from_doc(doc: dict) -> np.ndarray:
    try:
        dim = int(doc["dim"])
        re = np.asarray(doc["re"], dtype=float)
        im = np.asarray(doc.get("im", np.zeros((dim, dim))), dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed matrix document: {exc}") from exc
    if re.shape != (dim, dim) or im.shape != (dim, dim):
        raise ValidationError(f"matrix document entries do not match dim {dim}")
    return re + 1j * im
