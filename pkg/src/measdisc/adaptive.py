"""Sequential (adaptive) discrimination networks with label-controlled unitaries.

Registers are ordered ``(q_1, ..., q_N, ancilla)``.  Query ``k`` applies the
black-box unitary to ``q_k``; after it, a unitary on ``(q_{k+1}, ..., q_N,
ancilla)`` chosen by the labels ``i_1..i_k`` of the first ``k`` registers is
applied.  Final dephasing of ``q_1..q_N`` reads the labels.  With the literal
``U`` layers the network queries the measurement in the basis of the columns
of ``U^dagger``; that measurement is at the same distance from ``P_1`` as
``P_U`` and has the same arc optimum.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import expm
from scipy.optimize import minimize

from .discrimination import discriminator_state, multishot_distance
from .errors import DimensionMismatch, DimensionTooLarge, MeasDiscError, NotPure, ValidationError
from .io import dumps, matrix_from_dict, matrix_to_dict
from .unambiguous import parallel_unitary, unambiguous_entassisted
from .qmat import DensityMatrix, Unitary, haar_unitary, kron, unitarity_residual

MAX_TOTAL_DIM = 256
PURE_TOL = 1e-9


def _label_tuples(d: int, k: int):
    return itertools.product(range(1, d + 1), repeat=k)


@dataclass(frozen=True)
class AdaptiveNetwork:
    dim: int
    shots: int
    ancilla_dim: int | None = None
    controls: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.ancilla_dim is None:
            object.__setattr__(self, "ancilla_dim", self.dim)
        if self.dim < 1 or self.shots < 1 or self.ancilla_dim < 1:
            raise ValidationError("dim, shots and ancilla_dim must be positive")
        if self.total_dim > MAX_TOTAL_DIM:
            raise DimensionTooLarge(f"d^N * ancilla = {self.total_dim} exceeds {MAX_TOTAL_DIM}")
        clean = {}
        for key, v in self.controls.items():
            key = tuple(int(i) for i in key)
            k = len(key)
            if not 1 <= k < self.shots or any(i < 1 or i > self.dim for i in key):
                raise ValidationError(f"control label {key} invalid for d={self.dim}, N={self.shots}")
            m = np.asarray(v.matrix if isinstance(v, Unitary) else v, dtype=complex)
            if m.shape != (self.control_dim(k),) * 2:
                raise DimensionMismatch(f"control {key} has shape {m.shape}, expected {self.control_dim(k)}")
            if unitarity_residual(m) > 1e-9:
                raise ValidationError(f"control {key} is not unitary")
            clean[key] = m
        object.__setattr__(self, "controls", clean)

    @property
    def total_dim(self) -> int:
        return self.dim ** self.shots * self.ancilla_dim

    def control_dim(self, k: int) -> int:
        return self.dim ** (self.shots - k) * self.ancilla_dim

    def control(self, labels: tuple) -> np.ndarray:
        return self.controls.get(tuple(labels), np.eye(self.control_dim(len(labels))))

    @classmethod
    def trivial(cls, dim: int, shots: int, ancilla_dim: int | None = None) -> "AdaptiveNetwork":
        return cls(dim, shots, ancilla_dim)

    @classmethod
    def random(cls, dim: int, shots: int, seed, ancilla_dim: int | None = None) -> "AdaptiveNetwork":
        rng = np.random.default_rng(seed)
        a = dim if ancilla_dim is None else ancilla_dim
        controls = {}
        for k in range(1, shots):
            for lab in _label_tuples(dim, k):
                controls[lab] = haar_unitary(dim ** (shots - k) * a, rng).matrix
        return cls(dim, shots, a, controls)

    def to_dict(self) -> dict:
        return {"d": self.dim, "N": self.shots, "ancilla_dim": self.ancilla_dim,
                "controls": {",".join(map(str, k)): matrix_to_dict(v) for k, v in sorted(self.controls.items())}}

    @classmethod
    def from_dict(cls, obj: dict) -> "AdaptiveNetwork":
        if not isinstance(obj, dict) or not {"d", "N"} <= set(obj):
            raise ValidationError("network object needs keys 'd' and 'N'")
        controls = {}
        for key, m in obj.get("controls", {}).items():
            try:
                lab = tuple(int(t) for t in key.split(","))
            except ValueError as exc:
                raise ValidationError(f"bad control label {key!r}") from exc
            controls[lab] = matrix_from_dict(m)
        return cls(int(obj["d"]), int(obj["N"]), obj.get("ancilla_dim"), controls)


def save_network(net: AdaptiveNetwork, path) -> None:
    Path(path).write_text(dumps(net.to_dict()), encoding="utf-8")


def load_network(path) -> AdaptiveNetwork:
    return AdaptiveNetwork.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _query_layer(u: np.ndarray, k: int, net: AdaptiveNetwork) -> np.ndarray:
    d, n = net.dim, net.shots
    return kron(np.eye(d ** (k - 1)), u, np.eye(d ** (n - k) * net.ancilla_dim))


def _control_layer(k: int, net: AdaptiveNetwork) -> np.ndarray:
    d = net.dim
    out = np.zeros((net.total_dim, net.total_dim), dtype=complex)
    block = net.control_dim(k)
    for idx, lab in enumerate(_label_tuples(d, k)):
        sl = slice(idx * block, (idx + 1) * block)
        out[sl, sl] = net.control(lab)
    return out


def build_adaptive_matrix(u: Unitary, net: AdaptiveNetwork) -> np.ndarray:
    """``A_U = U_N V^(N-1) ... U_2 V^(1) U_1`` with ``U_k`` acting on register ``q_k``."""
    m = np.asarray(u.matrix)
    if m.shape[0] != net.dim:
        raise DimensionMismatch(f"unitary has dim {m.shape[0]}, network expects {net.dim}")
    a = _query_layer(m, 1, net)
    for k in range(1, net.shots):
        a = _query_layer(m, k + 1, net) @ _control_layer(k, net) @ a
    return a


def _dephase_labels(x: np.ndarray, labels: int) -> np.ndarray:
    rest = x.shape[0] // labels
    t = x.reshape(labels, rest, labels, rest)
    out = np.zeros_like(t)
    idx = np.arange(labels)
    out[idx, :, idx, :] = t[idx, :, idx, :]
    return out.reshape(x.shape)


def sequential_channel_apply(a: np.ndarray, rho, n: int, dim: int) -> np.ndarray:
    """``(Delta_{1..N} (x) 1)(A rho A^dagger)`` for ``N`` label registers of size ``dim``."""
    r = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    a = np.asarray(a, dtype=complex)
    if a.shape[0] != r.shape[0] or a.shape[0] % dim ** n:
        raise DimensionMismatch(f"operator {a.shape} and state {r.shape} incompatible with d={dim}, N={n}")
    return _dephase_labels(a @ r @ a.conj().T, dim ** n)


def _difference(u: Unitary, net: AdaptiveNetwork, rho: np.ndarray) -> np.ndarray:
    au = build_adaptive_matrix(u, net)
    a1 = build_adaptive_matrix(Unitary(np.eye(net.dim)), net)
    n, d = net.shots, net.dim
    return sequential_channel_apply(au, rho, n, d) - sequential_channel_apply(a1, rho, n, d)


def _state_matrix(rho, net: AdaptiveNetwork) -> np.ndarray:
    r = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    if r.shape != (net.total_dim, net.total_dim):
        raise DimensionMismatch(f"state has shape {r.shape}, network needs {net.total_dim}")
    return r


def adaptive_value(u: Unitary, net: AdaptiveNetwork, rho) -> float:
    """``||(Psi_U - Psi_1)(rho)||_1``."""
    diff = _difference(u, net, _state_matrix(rho, net))
    return float(np.abs(np.linalg.eigvalsh((diff + diff.conj().T) / 2)).sum())


def purify(rho: np.ndarray, ancilla_dim: int) -> np.ndarray:
    """Vector ``sum_k sqrt(w_k) |v_k>|k>`` on system (x) ancilla; needs rank <= ancilla_dim."""
    w, v = np.linalg.eigh((rho + rho.conj().T) / 2)
    keep = w > 1e-12
    if keep.sum() > ancilla_dim:
        raise DimensionMismatch(f"rank {keep.sum()} exceeds ancilla dimension {ancilla_dim}")
    x = np.zeros((rho.shape[0], ancilla_dim), dtype=complex)
    x[:, : keep.sum()] = v[:, keep][:, ::-1] * np.sqrt(w[keep][::-1])
    return x.reshape(-1)


def parallel_input(u: Unitary, n: int, ancilla_dim: int | None = None) -> DensityMatrix:
    """Purified parallel discriminator for the queried measurement, as a network input."""
    a = u.dim if ancilla_dim is None else ancilla_dim
    s = discriminator_state(u.H, n)
    psi = purify(s.state.matrix, a)
    return DensityMatrix(np.outer(psi, psi.conj()))


def _pure_vector(rho: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh((rho + rho.conj().T) / 2)
    if abs(w[-1] - 1.0) > PURE_TOL or np.abs(w[:-1]).max(initial=0.0) > PURE_TOL:
        raise NotPure(f"input has eigenvalues {np.round(w[-2:], 12)}; a pure state is required")
    return v[:, -1]


def unambiguous_adaptive_bound(u: Unitary, n: int, net: AdaptiveNetwork, rho) -> float:
    """``1 - sum_i |<x_i|y_i>|`` over label tuples, with ``x = A_1 psi`` and ``y = A_U psi`` projected on ``i``."""
    if net.shots != n:
        raise DimensionMismatch(f"network has {net.shots} shots, expected {n}")
    psi = _pure_vector(_state_matrix(rho, net))
    x = build_adaptive_matrix(Unitary(np.eye(net.dim)), net) @ psi
    y = build_adaptive_matrix(u, net) @ psi
    labels = net.dim ** n
    ov = np.einsum("ia,ia->i", x.reshape(labels, -1).conj(), y.reshape(labels, -1))
    return float(1.0 - np.abs(ov).sum())


# -- search ---------------------------------------------------------------------

@dataclass(frozen=True)
class SearchOptions:
    starts: int = 3
    rounds: int = 6
    input_steps: int = 50
    control_iterations: int = 30
    seed: int = 0
    ancilla_dim: int | None = None


def _input_ascent(u: Unitary, net: AdaptiveNetwork, psi: np.ndarray, steps: int):
    au = build_adaptive_matrix(u, net)
    a1 = build_adaptive_matrix(Unitary(np.eye(net.dim)), net)
    labels = net.dim ** net.shots
    best = -1.0
    for _ in range(steps):
        rho = np.outer(psi, psi.conj())
        diff = _dephase_labels(au @ rho @ au.conj().T, labels) - _dephase_labels(a1 @ rho @ a1.conj().T, labels)
        w, v = np.linalg.eigh((diff + diff.conj().T) / 2)
        val = float(np.abs(w).sum())
        if val <= best + 1e-12:
            break
        best = val
        s = _dephase_labels((v * np.sign(w)) @ v.conj().T, labels)
        g = au.conj().T @ s @ au - a1.conj().T @ s @ a1
        psi = np.linalg.eigh((g + g.conj().T) / 2)[1][:, -1]
    return psi, best


def _herm_basis(n: int) -> list[np.ndarray]:
    basis = []
    for i in range(n):
        e = np.zeros((n, n), dtype=complex)
        e[i, i] = 1
        basis.append(e)
        for j in range(i + 1, n):
            s = np.zeros((n, n), dtype=complex)
            s[i, j] = s[j, i] = 1 / np.sqrt(2)
            a = np.zeros((n, n), dtype=complex)
            a[i, j], a[j, i] = -1j / np.sqrt(2), 1j / np.sqrt(2)
            basis += [s, a]
    return basis


def _control_ascent(u: Unitary, net: AdaptiveNetwork, psi: np.ndarray, iterations: int) -> AdaptiveNetwork:
    keys = [lab for k in range(1, net.shots) for lab in _label_tuples(net.dim, k)]
    if not keys:
        return net
    bases = {k: _herm_basis(net.control_dim(len(k))) for k in keys}
    sizes = [len(bases[k]) for k in keys]
    rho = np.outer(psi, psi.conj())

    def network(theta):
        ctrl, off = {}, 0
        for k, size in zip(keys, sizes):
            h = np.tensordot(theta[off: off + size], np.array(bases[k]), axes=1)
            ctrl[k] = net.control(k) @ expm(1j * h)
            off += size
        return AdaptiveNetwork(net.dim, net.shots, net.ancilla_dim, ctrl)

    res = minimize(lambda t: -adaptive_value(u, network(t), rho), np.zeros(sum(sizes)),
                   method="L-BFGS-B", options={"maxiter": iterations, "eps": 1e-7})
    cand = network(res.x)
    return cand if adaptive_value(u, cand, rho) >= adaptive_value(u, net, rho) else net


def adaptive_search(u: Unitary, n: int, opts: SearchOptions | None = None):
    """Best-effort maximisation of the adaptive value; returns ``(value, net, input)``.

    Alternates input updates (sign of the output difference, then top
    eigenvector of the adjoint) with gradient ascent on the controls, whose
    updates are applied as ``V <- V expm(i H)``.  The first start uses trivial
    controls and the purified parallel discriminator when it fits.
    """
    opts = opts or SearchOptions()
    a = u.dim if opts.ancilla_dim is None else opts.ancilla_dim
    rng = np.random.default_rng(opts.seed)
    best = (-1.0, None, None)
    for s in range(opts.starts):
        if s == 0:
            net = AdaptiveNetwork.trivial(u.dim, n, a)
            try:
                psi = _pure_vector(parallel_input(u, n, a).matrix)
            except MeasDiscError:
                psi = None
        else:
            net = AdaptiveNetwork.random(u.dim, n, rng, a)
            psi = None
        if psi is None:
            psi = rng.standard_normal(net.total_dim) + 1j * rng.standard_normal(net.total_dim)
            psi /= np.linalg.norm(psi)
        val = -1.0
        for _ in range(opts.rounds):
            psi, val_in = _input_ascent(u, net, psi, opts.input_steps)
            net = _control_ascent(u, net, psi, opts.control_iterations)
            new = adaptive_value(u, net, np.outer(psi, psi.conj()))
            if new <= val + 1e-10:
                val = max(val, new)
                break
            val = new
        if val > best[0]:
            best = (val, net, DensityMatrix(np.outer(psi, psi.conj())))
    return best


def parallel_margin(u: Unitary, n: int, net: AdaptiveNetwork, rho) -> float:
    """``multishot_distance - adaptive_value``; never negative beyond round-off."""
    return multishot_distance(u, n) - adaptive_value(u, net, rho)


def lifted_unambiguous_input(u: Unitary, n: int, ancilla_dim: int | None = None) -> DensityMatrix:
    """Purified optimal assisted input for ``U^{(x)N}`` in the network's convention.

    With trivial controls the label overlaps are ``(W rho_A)_ii`` for
    ``W = U^{(x)N}``, so the solver optimum ``rho*`` enters as ``W^dagger rho* W``.
    """
    w = parallel_unitary(u, n).matrix
    rho = unambiguous_entassisted(Unitary(w)).optimal_input.matrix
    a = u.dim ** n if ancilla_dim is None else ancilla_dim
    psi = purify(w.conj().T @ rho @ w, a)
    return DensityMatrix(np.outer(psi, psi.conj()))
