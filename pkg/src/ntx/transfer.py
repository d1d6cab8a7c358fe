"""Subgroup-to-subgroup charge transfer from hole/particle subgroup charges.

Groups losing charge (hole > particle) are donors, the rest acceptors.
Transfer only flows donor -> acceptor, so the M x M problem reduces to an
n x m matrix T with prescribed row sums (donor deficits) and column sums
(acceptor surpluses). Two solutions are offered: the closed-form
proportional split and the non-negative least-squares fit to a preferred
transfer vector, solved with a primal active-set method.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

BALANCE_TOL = 1e-6
CONSTRAINT_TOL = 1e-9
KKT_TOL = 1e-10


class TransferError(ValueError):
    pass


class QPFailure(RuntimeError):
    """Active-set solver did not converge; carries the last iterate."""

    def __init__(self, message, t=None, residuals=None):
        super().__init__(message)
        self.t = t
        self.residuals = residuals


@dataclass(frozen=True, eq=False)
class DonorAcceptorPartition:
    hole: np.ndarray
    particle: np.ndarray
    donors: tuple[int, ...]
    acceptors: tuple[int, ...]
    deficits: np.ndarray
    surpluses: np.ndarray
    total: float
    imbalance: float = 0.0  # sum(surplus) - sum(deficit) before balancing

    @property
    def n(self) -> int:
        return len(self.donors)

    @property
    def m(self) -> int:
        return len(self.acceptors)

    @property
    def n_groups(self) -> int:
        return len(self.hole)


@dataclass(frozen=True, eq=False)
class TransferResult:
    partition: DonorAcceptorPartition
    T: np.ndarray
    full_matrix: np.ndarray
    method: str
    t_preferred: Optional[np.ndarray] = None
    row_residual: float = 0.0
    col_residual: float = 0.0
    kkt_residual: float = 0.0
    iterations: int = 0
    local_excitation_only: bool = False

    @property
    def charge_transfer(self) -> float:
        return float(self.T.sum()) if self.T.size else 0.0

    @property
    def local_excitation(self) -> float:
        return float(np.trace(self.full_matrix))


def _fsum(values) -> float:
    total = 0.0
    for v in np.asarray(values, dtype=float).ravel().tolist():
        total += v
    return total


def partition_donors_acceptors(hole: Sequence[float], particle: Sequence[float]) -> DonorAcceptorPartition:
    qh = np.asarray(hole, dtype=float).copy()
    qp = np.asarray(particle, dtype=float).copy()
    if qh.shape != qp.shape or qh.ndim != 1:
        raise TransferError("hole and particle charges must be 1D arrays of equal length")
    if np.any(qh < 0) or np.any(qp < 0):
        raise TransferError("subgroup charges must be non-negative")
    donors = tuple(int(i) for i in np.flatnonzero(qh > qp))
    acceptors = tuple(int(i) for i in np.flatnonzero(~(qh > qp)))
    deficits = qh[list(donors)] - qp[list(donors)]
    surpluses = qp[list(acceptors)] - qh[list(acceptors)]
    total = _fsum(deficits)
    gained = _fsum(surpluses)
    imbalance = gained - total
    if abs(imbalance) > BALANCE_TOL * max(1.0, total):
        raise TransferError(
            f"total deficit {total:.9g} != total surplus {gained:.9g}; normalize hole and particle charges first"
        )
    if gained > 0 and imbalance != 0.0:
        surpluses = surpluses * (total / gained)
    qh.setflags(write=False)
    qp.setflags(write=False)
    return DonorAcceptorPartition(qh, qp, donors, acceptors, deficits, surpluses, total, imbalance)


def assemble_full_matrix(p: DonorAcceptorPartition, T: np.ndarray) -> np.ndarray:
    T = np.asarray(T, dtype=float).reshape(p.n, p.m)
    if np.any(T < 0):
        raise TransferError("transfer matrix has negative entries")
    if p.n and p.m:
        if np.max(np.abs(T.sum(axis=1) - p.deficits)) > CONSTRAINT_TOL:
            raise TransferError("transfer matrix row sums do not match donor deficits")
        if np.max(np.abs(T.sum(axis=0) - p.surpluses)) > CONSTRAINT_TOL:
            raise TransferError("transfer matrix column sums do not match acceptor surpluses")
    Q = np.zeros((p.n_groups, p.n_groups))
    for i in p.donors:
        Q[i, i] = p.particle[i]
    for j in p.acceptors:
        Q[j, j] = p.hole[j]
    for a, i in enumerate(p.donors):
        for b, j in enumerate(p.acceptors):
            Q[i, j] = T[a, b]
    return Q


def _residuals(p, T):
    if not (p.n and p.m):
        return 0.0, 0.0
    return (
        float(np.max(np.abs(T.sum(axis=1) - p.deficits))),
        float(np.max(np.abs(T.sum(axis=0) - p.surpluses))),
    )


def _local_only(p: DonorAcceptorPartition, method: str) -> TransferResult:
    T = np.zeros((0, p.m))
    return TransferResult(p, T, assemble_full_matrix(p, T), method, local_excitation_only=True)


def proportional_transfer(deficits, surpluses, total) -> np.ndarray:
    return np.outer(deficits, surpluses) / total


def solve_proportional(p: DonorAcceptorPartition) -> TransferResult:
    if p.total == 0.0:
        return _local_only(p, "proportional")
    T = proportional_transfer(p.deficits, p.surpluses, p.total)
    row, col = _residuals(p, T)
    return TransferResult(p, T, assemble_full_matrix(p, T), "proportional", row_residual=row, col_residual=col)


def build_qp(p: DonorAcceptorPartition, t_p=None) -> tuple[np.ndarray, np.ndarray]:
    """Equality constraints B t = b over row-major t.

    Rows: n donor row sums, then the first m-1 acceptor column sums (the
    last column sum is implied by the others).
    """
    n, m = p.n, p.m
    if n == 0 or m == 0:
        raise TransferError("need at least one donor and one acceptor")
    if t_p is not None and np.asarray(t_p).size != n * m:
        raise TransferError(f"preferred transfer has {np.asarray(t_p).size} entries, expected {n * m}")
    B = np.zeros((n + m - 1, n * m))
    for i in range(n):
        B[i, i * m : (i + 1) * m] = 1.0
    for j in range(m - 1):
        B[n + j, j::m] = 1.0
    b = np.concatenate([p.deficits, p.surpluses[: m - 1]])
    return B, b


def _eqp(B, b, tp, free):
    """Closest point to tp on {B x = b, x_i = 0 off the free set}."""
    x = np.zeros_like(tp)
    Bf = B[:, free]
    r = b - Bf @ tp[free]
    delta = np.linalg.lstsq(Bf, r, rcond=None)[0]
    x[free] = tp[free] + delta
    return x


def _multipliers(B, tp, x, free, fixed):
    grad = 2.0 * (x - tp)
    lam = np.linalg.lstsq(B[:, free].T, grad[free], rcond=None)[0]
    stationarity = float(np.max(np.abs(B[:, free].T @ lam - grad[free]))) if free.any() else 0.0
    mu = grad[fixed] - B[:, fixed].T @ lam
    return lam, mu, stationarity


def active_set_qp(B, b, tp, x0, max_changes=None, tol=KKT_TOL):
    """Minimize ||x - tp||^2 s.t. B x = b, x >= 0, from a feasible x0.

    Returns (x, kkt_residual, n_changes). Raises QPFailure when the cap on
    working-set changes is hit.
    """
    tp = np.asarray(tp, dtype=float)
    x = np.asarray(x0, dtype=float).copy()
    nvar = x.size
    max_changes = 10 * nvar if max_changes is None else max_changes
    scale = max(1.0, float(np.max(np.abs(b))) if b.size else 1.0)
    step_tol = 1e-13 * scale

    fixed = x <= 0.0
    x[fixed] = 0.0
    changes = 0
    while True:
        free = ~fixed
        target = _eqp(B, b, tp, free)
        p = target - x
        p[fixed] = 0.0
        if np.max(np.abs(p)) <= step_tol:
            x = target
            x[fixed] = 0.0
            _, mu, stat = _multipliers(B, tp, x, free, fixed)
            if mu.size == 0 or mu.min() >= -tol:
                break
            drop = np.flatnonzero(fixed)[int(np.argmin(mu))]
            fixed[drop] = False
        else:
            alpha, block = 1.0, None
            for i in np.flatnonzero(free & (p < 0)):
                ratio = -x[i] / p[i]
                if ratio < alpha:
                    alpha, block = ratio, i
            x = x + alpha * p
            if block is None:
                continue
            x[block] = 0.0
            fixed[block] = True
        changes += 1
        if changes > max_changes:
            raise QPFailure(
                f"active-set iteration cap ({max_changes}) exceeded",
                t=x,
                residuals={"equality": float(np.max(np.abs(B @ x - b))), "min": float(x.min())},
            )

    x = np.maximum(x, 0.0)
    kkt = kkt_residual(B, b, tp, x)
    if kkt > tol * scale:
        raise QPFailure(f"KKT residual {kkt:.3g} above tolerance", t=x, residuals={"kkt": kkt})
    return x, kkt, changes


def kkt_residual(B, b, tp, x, zero_tol=0.0) -> float:
    """Largest KKT violation: primal feasibility, stationarity or dual sign."""
    fixed = x <= zero_tol
    free = ~fixed
    primal = float(np.max(np.abs(B @ x - b))) if b.size else 0.0
    neg = float(max(0.0, -x.min()))
    _, mu, stat = _multipliers(B, tp, x, free, fixed)
    dual = float(max(0.0, -mu.min())) if mu.size else 0.0
    return max(primal, neg, stat, dual)


def uniform_preference(p: DonorAcceptorPartition) -> np.ndarray:
    return np.full(p.n * p.m, p.total / (p.n * p.m))


def solve_quadratic(p: DonorAcceptorPartition, t_p=None) -> TransferResult:
    if p.total == 0.0:
        return _local_only(p, "quadratic")
    B, b = build_qp(p, t_p)
    tp = uniform_preference(p) if t_p is None else np.asarray(t_p, dtype=float).ravel()
    x0 = proportional_transfer(p.deficits, p.surpluses, p.total).ravel()
    x, kkt, changes = active_set_qp(B, b, tp, x0)
    T = x.reshape(p.n, p.m)
    row, col = _residuals(p, T)
    label = "quadratic(uniform)" if t_p is None else "quadratic(custom)"
    return TransferResult(
        p, T, assemble_full_matrix(p, T), label, t_preferred=tp,
        row_residual=row, col_residual=col, kkt_residual=kkt, iterations=changes,
    )


def solve(p: DonorAcceptorPartition, method: str, t_p=None) -> TransferResult:
    if method == "proportional":
        return solve_proportional(p)
    if method == "quadratic":
        return solve_quadratic(p, t_p)
    raise ValueError(f"unknown method {method!r}")


def transfer_to_dict(r: TransferResult, names: Sequence[str]) -> dict:
    p = r.partition
    total_h = _fsum(p.hole)
    le = r.local_excitation
    ct = r.charge_transfer
    return {
        "method": r.method,
        "subgroups": list(names),
        "hole": p.hole.tolist(),
        "particle": p.particle.tolist(),
        "donors": [names[i] for i in p.donors],
        "acceptors": [names[j] for j in p.acceptors],
        "deficits": p.deficits.tolist(),
        "surpluses": p.surpluses.tolist(),
        "total_transfer": p.total,
        "transfers": [
            {"from": names[i], "to": names[j], "value": float(r.T[a, b])}
            for a, i in enumerate(p.donors)
            for b, j in enumerate(p.acceptors)
        ],
        "T": r.T.tolist(),
        "full_matrix": r.full_matrix.tolist(),
        "t_preferred": None if r.t_preferred is None else r.t_preferred.tolist(),
        "residuals": {"row": r.row_residual, "column": r.col_residual, "kkt": r.kkt_residual},
        "local_excitation_only": r.local_excitation_only,
        "summary_percent": {
            "local_excitation": 100.0 * le / total_h if total_h > 0 else 0.0,
            "charge_transfer": 100.0 * ct / total_h if total_h > 0 else 0.0,
        },
    }


def transfer_to_json(r: TransferResult, names: Sequence[str]) -> str:
    return json.dumps(transfer_to_dict(r, names), indent=2) + "\n"
