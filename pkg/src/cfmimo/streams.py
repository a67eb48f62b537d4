"""Stream selection: serving APs for separate-stream mode and the greedy
stream-dropping scheduler for same-stream mode."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .config import ConfigError


@dataclass(frozen=True)
class SelectionSet:
    """Binary diagonal selection matrices Gamma_lk for separate-stream mode.

    Stored as diagonals: diag[l, k, m] == 1 iff AP l transmits stream m to user k.
    Gamma_lk Gamma_lk = Gamma_lk holds trivially; disjoint supports across APs for
    a fixed user guarantee Gamma_lk Gamma_l'k = 0 for l != l'.
    """

    diag: np.ndarray  # (L, K, M) of 0/1

    def matrix(self, l: int, k: int) -> np.ndarray:
        return np.diag(self.diag[l, k].astype(float))

    def rank(self) -> np.ndarray:
        """Streams per (AP, user): rank(Gamma_lk), shape (L, K)."""
        return self.diag.sum(axis=-1)

    def user_mask(self) -> np.ndarray:
        """Streams active for each user across all APs, shape (K, M) of 0/1."""
        return self.diag.sum(axis=0)

    def validate(self) -> None:
        d = self.diag
        if not np.isin(d, (0, 1)).all():
            raise ValueError("selection diagonals must be binary")
        if (d.sum(axis=0) > 1).any():
            raise ValueError("a stream may be served by at most one AP")


@dataclass(frozen=True)
class StreamPlan:
    """Active streams per user for same-stream transmission."""

    active: np.ndarray  # (K, M) boolean

    def n_streams(self) -> int:
        return int(self.active.sum())

    @staticmethod
    def full(K: int, M: int) -> "StreamPlan":
        return StreamPlan(active=np.ones((K, M), dtype=bool))


def select_serving_aps(beta: np.ndarray, M: int) -> SelectionSet:
    """Give each user one stream from each of its M strongest APs.

    Stream m goes to the m-th strongest AP (ties broken toward the lower AP
    index), so exactly M selection matrices per user are nonzero, each rank 1
    with disjoint stream supports.
    """
    beta = np.asarray(beta)
    L, K = beta.shape
    if L < M:
        raise ConfigError(f"need at least M={M} APs to send M separate streams, got L={L}")
    diag = np.zeros((L, K, M), dtype=int)
    for k in range(K):
        order = np.argsort(-beta[:, k], kind="stable")
        for m in range(M):
            diag[order[m], k, m] = 1
    sel = SelectionSet(diag=diag)
    sel.validate()
    return sel


def schedule_streams_same(sum_se_evaluator: Callable[[StreamPlan], float],
                          initial_plan: StreamPlan) -> StreamPlan:
    """Greedy stream removal for same-stream transmission.

    Sweeps the users in order; for each, tentatively drops the user's
    highest-indexed active stream and keeps the drop iff the evaluated sum SE
    strictly increases.  Sweeps repeat until one completes without any drop.
    At most K*M drops can ever occur, which bounds the number of sweeps.
    """
    plan = StreamPlan(active=initial_plan.active.copy())
    best = sum_se_evaluator(plan)
    initial_sum_se = best
    K, M = plan.active.shape
    improved = True
    while improved and plan.n_streams() > 0:
        improved = False
        for k in range(K):
            active_streams = np.flatnonzero(plan.active[k])
            if active_streams.size == 0:
                continue
            candidate = plan.active.copy()
            candidate[k, active_streams[-1]] = False
            cand_se = sum_se_evaluator(StreamPlan(active=candidate))
            if cand_se > best:
                plan = StreamPlan(active=candidate)
                best = cand_se
                improved = True
    assert best >= initial_sum_se
    return plan
