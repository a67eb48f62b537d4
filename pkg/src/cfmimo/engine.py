"""Per-drop Monte Carlo pipeline evaluating every SE bound for each method.

For one network drop the simulation runs three passes of coherence blocks:

  1. normalization pass  -- accumulates E{||column m of Wbar_lk||^2} so the
     precoders can be scaled to the power allocation;
  2. statistics pass     -- same blocks (identical substream) with scaled
     precoders; accumulates the MomentBank (LMMSE moments, hardening-bound
     statistics) and the perfect-CSI bound;
  3. evaluation pass     -- fresh blocks; applies the LMMSE estimator and the
     receive combiners, accumulating the mean combined channel E_bar and the
     residual covariance of the downlink-pilot bounds out of sample.

Randomness is drawn from counter-keyed substreams (master seed, drop index,
purpose, phase), so results are independent of worker count and chunk size and
all methods see identical channel realizations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import SystemConfig
from .downlink import (MomentAccumulator, MomentBank, effective_channels,
                       receive_downlink_pilots, vec_matrices)
from .network import (ChannelSet, NetworkRealization, correlation_sqrt,
                      drop_network, standard_complex_normal, unvec_channels)
from .pilots import PilotBook, UplinkEstimator, build_pilot_book, receive_uplink_pilots
from .precoding import (mmse_precoder_centralized, mmse_precoder_csi_sharing,
                        mmse_precoder_local, normalize_same_stream,
                        normalize_separate_stream, partial_trace)
from .se_bounds import (SEReport, logdet_capacity, mmse_combiner, se_hardening,
                        se_pilot_general, zf_combiner)
from .streams import SelectionSet, StreamPlan, schedule_streams_same, select_serving_aps

CHUNK_BLOCKS = 256

# Substream purposes and phases; part of the reproducibility contract.
_P_GEOMETRY = 0
_P_CHANNEL = 1
_P_UL_NOISE = 2
_P_DL_NOISE = 3
PHASE_STATS = 0      # shared by the normalization and statistics passes
PHASE_EVAL = 1
PHASE_SCHED_STATS = 2
PHASE_SCHED_EVAL = 3

SAME = "same"
SEPARATE_CSI = "separate_csi"
SEPARATE_LOCAL = "separate_local"
PER_ANTENNA = "per_antenna_baseline"


@dataclass
class MethodResult:
    """Everything the harness reports for one (drop, method) pair."""

    report: SEReport
    ap_power: np.ndarray          # (L,) in-sample per-AP average transmit power
    rho: np.ndarray               # power allocation (K,) or (L, K)
    active: np.ndarray            # (K, M) streams carrying data per user
    n_blocks: int = 0


def geometry_seed(master_seed: int, drop_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master_seed, spawn_key=(drop_index, _P_GEOMETRY))


class DropSimulator:
    """Runs the block-level Monte Carlo passes for one network drop.

    Statistics (estimator gains, selection, normalization) live on `net`; the
    channel realizations are drawn from `sampling_net` and mapped through
    `reshape`, which the per-antenna baseline uses to preserve the true joint
    correlation across a user's antennas while processing them as independent
    single-antenna users.
    """

    def __init__(self, config: SystemConfig, net: NetworkRealization,
                 book: PilotBook, master_seed: int, drop_index: int,
                 sampling_net: NetworkRealization | None = None,
                 reshape=None):
        self.cfg = config
        self.net = net
        self.book = book
        self.master_seed = master_seed
        self.drop_index = drop_index
        self.sampling_net = sampling_net if sampling_net is not None else net
        self.reshape = reshape
        self.estimator = UplinkEstimator(net, book, config)
        self.sqrt_R = correlation_sqrt(self.sampling_net.R)
        self.q = config.ul_powers
        # E{Ht_lk Ht_lk^H} per AP block, for the centralized precoder bracket
        self.C_blocks_full = partial_trace(self.estimator.C_err, config.N, config.M)
        self._sel_cache: dict[int, tuple] = {}

    # ------------------------------------------------------------------ RNG

    def _rng(self, purpose: int, phase: int) -> np.random.Generator:
        ss = np.random.SeedSequence(
            self.master_seed, spawn_key=(self.drop_index, purpose, phase))
        return np.random.default_rng(ss)

    def _blocks(self, phase: int, n_blocks: int):
        """Yield (H, Hhat) chunks with phase-keyed deterministic substreams."""
        chan_rng = self._rng(_P_CHANNEL, phase)
        ul_rng = self._rng(_P_UL_NOISE, phase)
        s_net = self.sampling_net
        NM_s = s_net.R.shape[-1]
        done = 0
        while done < n_blocks:
            nc = min(CHUNK_BLOCKS, n_blocks - done)
            z = standard_complex_normal(chan_rng, (nc, s_net.L, s_net.K, NM_s))
            h = np.einsum("lkab,nlkb->nlka", self.sqrt_R, z)
            H = unvec_channels(h, s_net.N, s_net.M)
            if self.reshape is not None:
                H = self.reshape(H)
            y = receive_uplink_pilots(ChannelSet(H=H), self.book, self.cfg, ul_rng)
            Hhat = unvec_channels(self.estimator.estimate(y),
                                  self.cfg.N, self.cfg.M)
            yield H, Hhat
            done += nc

    # ------------------------------------------------------------ precoders

    def _selection_stats(self, sel: SelectionSet):
        """Gamma-masked error and channel moments, cached per selection set."""
        key = id(sel)
        if key not in self._sel_cache:
            N, M = self.cfg.N, self.cfg.M
            C_sel = np.empty_like(self.C_blocks_full)
            stat_sel = np.empty_like(self.C_blocks_full)
            for l in range(self.net.L):
                for k in range(self.net.K):
                    g = sel.diag[l, k].astype(float)
                    C_sel[l, k] = partial_trace(self.estimator.C_err[l, k], N, M, g)
                    stat_sel[l, k] = partial_trace(self.net.R[l, k], N, M, g)
            self._sel_cache[key] = (C_sel, stat_sel)
        return self._sel_cache[key]

    def _raw_precoders(self, method: str, Hhat: np.ndarray,
                       sel: SelectionSet | None) -> np.ndarray:
        """Unnormalized precoders per AP, shape (nc, L, K, N, M)."""
        nc = Hhat.shape[0]
        L, K, N, M = self.net.L, self.net.K, self.cfg.N, self.cfg.M
        if method == SAME:
            W = mmse_precoder_centralized(Hhat, self.C_blocks_full, self.q)
            return np.moveaxis(W.reshape(nc, K, L, N, M), 2, 1)
        C_sel, stat_sel = self._selection_stats(sel)
        if method == SEPARATE_CSI:
            return mmse_precoder_csi_sharing(Hhat, C_sel, sel, self.q)
        if method == SEPARATE_LOCAL:
            return mmse_precoder_local(Hhat, C_sel, stat_sel, sel, self.q)
        raise ValueError(f"unknown method {method!r}")

    @staticmethod
    def _apply_scaling(method: str, Wbar: np.ndarray, scaling,
                       sel: SelectionSet | None,
                       active: np.ndarray) -> np.ndarray:
        if method == SAME:
            mask = active[None, None, :, None, :]
            return Wbar * mask * scaling.scale[None, None, :, None, None]
        mask = sel.diag[None, :, :, None, :]
        return Wbar * mask * scaling.scale[None, :, :, None, None]

    # ---------------------------------------------------------------- passes

    def norm_pass(self, method: str, n_blocks: int, sel: SelectionSet | None,
                  phase: int = PHASE_STATS) -> np.ndarray:
        """E{||column m of Wbar_lk||^2}, shape (L, K, M)."""
        col_norms = np.zeros((self.net.L, self.net.K, self.cfg.M))
        for _, Hhat in self._blocks(phase, n_blocks):
            Wbar = self._raw_precoders(method, Hhat, sel)
            col_norms += np.einsum("nlkam->lkm", np.abs(Wbar) ** 2)
        return col_norms / n_blocks

    def scaling_for(self, method: str, col_norms: np.ndarray,
                    sel: SelectionSet | None, active: np.ndarray):
        if method == SAME:
            return normalize_same_stream(col_norms.sum(axis=0), self.net.beta,
                                         self.cfg.dl_power, active=active)
        sel_norms = np.einsum("lkm,lkm->lk", col_norms, sel.diag.astype(float))
        return normalize_separate_stream(sel_norms, sel, self.net.beta,
                                         self.cfg.dl_power)

    def ap_power_audit(self, method: str, col_norms: np.ndarray, scaling,
                       sel: SelectionSet | None,
                       active: np.ndarray) -> np.ndarray:
        """In-sample per-AP average transmit power, shape (L,)."""
        if method == SAME:
            used = col_norms * active[None, :, :]
            return np.einsum("lkm,k->l", used, scaling.scale**2)
        used = col_norms * sel.diag
        return np.einsum("lkm,lk->l", used, scaling.scale**2)

    def stats_pass(self, method: str, n_blocks: int, scaling,
                   sel: SelectionSet | None, active: np.ndarray,
                   phase: int = PHASE_STATS):
        """MomentBank plus the per-user perfect-CSI SE over the same blocks."""
        K, M = self.net.K, self.cfg.M
        dl_rng = self._rng(_P_DL_NOISE, phase)
        acc = MomentAccumulator(K, self.book.n_groups, M, self.book.group)
        perfect_sum = np.zeros(K)
        eye = np.eye(M)
        for H, Hhat in self._blocks(phase, n_blocks):
            W = self._apply_scaling(method, self._raw_precoders(method, Hhat, sel),
                                    scaling, sel, active)
            B = effective_channels(H, W)
            Y = receive_downlink_pilots(B, self.book, self.q, self.cfg.tau_p, dl_rng)
            acc.update(B, Y)
            gram = np.einsum("nkiam,nkibm->nkab", B, B.conj())
            for k in range(K):
                B_kk = B[:, k, k]
                Xi_inst = gram[:, k] - B_kk @ np.conj(np.swapaxes(B_kk, -1, -2)) + eye
                perfect_sum[k] += logdet_capacity(B_kk, Xi_inst).sum()
        bank = acc.finalize()
        bank.finalize_estimator()
        return bank, perfect_sum / n_blocks

    def eval_pass(self, method: str, n_blocks: int, scaling,
                  sel: SelectionSet | None, active: np.ndarray,
                  bank: MomentBank, combiners=("mmse", "zf"),
                  phase: int = PHASE_EVAL):
        """Out-of-sample moments of the combined system per combiner kind.

        Returns {combiner: (E_bar, C_res)} with E_bar = E{U^H B_hat_kk} and
        C_res the covariance of the residual term of the downlink-pilot bound.
        """
        K, M = self.net.K, self.cfg.M
        dl_rng = self._rng(_P_DL_NOISE, phase)
        acc = {c: _ResidualAccumulator(K, M) for c in combiners}
        for H, Hhat in self._blocks(phase, n_blocks):
            W = self._apply_scaling(method, self._raw_precoders(method, Hhat, sel),
                                    scaling, sel, active)
            B = effective_channels(H, W)
            Y = receive_downlink_pilots(B, self.book, self.q, self.cfg.tau_p, dl_rng)
            B_hat = bank.estimate(vec_matrices(Y))
            for k in range(K):
                for c in combiners:
                    if c == "mmse":
                        U = mmse_combiner(B_hat[:, k, k], B_hat[:, k], bank.C_Berr[k])
                    else:
                        U = zf_combiner(B_hat[:, k, k], active[k],
                                        on_degenerate="zero")
                    acc[c].update(k, U, B[:, k], B_hat[:, k, k])
        return {c: acc[c].finalize(n_blocks) for c in combiners}

    # ------------------------------------------------------------- top level

    def simulate_method(self, method: str, n_blocks: int,
                        n_eval_blocks: int | None = None,
                        schedule: bool = False,
                        n_sched_blocks: int = 100,
                        sel: SelectionSet | None = None) -> MethodResult:
        cfg = self.cfg
        K, M = self.net.K, cfg.M
        n_eval = n_eval_blocks if n_eval_blocks is not None else n_blocks
        if method != SAME:
            if sel is None:
                sel = select_serving_aps(self.net.beta, M)
            active = sel.user_mask().astype(bool)
        else:
            sel = None
            active = StreamPlan.full(K, M).active
        col_norms = self.norm_pass(method, n_blocks, sel)

        if method == SAME and schedule:
            sched_norms = self.norm_pass(method, n_sched_blocks, sel,
                                         phase=PHASE_SCHED_STATS)
            plan = schedule_streams_same(
                lambda p: self._sum_se_for_plan(method, p, sched_norms,
                                                n_sched_blocks),
                StreamPlan(active=active))
            active = plan.active

        scaling = self.scaling_for(method, col_norms, sel, active)
        bank, perfect = self.stats_pass(method, n_blocks, scaling, sel, active)
        results = self.eval_pass(method, n_eval, scaling, sel, active, bank)

        prelog1 = 1.0 - cfg.tau_p / cfg.tau_c
        prelog2 = 1.0 - 2.0 * cfg.tau_p / cfg.tau_c
        report = SEReport(method=method, n_blocks=n_blocks)
        report.add("noCSI", [se_hardening(bank.B_bar[k], bank.Xi[k], prelog1)
                             for k in range(K)], prelog1)
        report.add("fullCSI", prelog1 * perfect, prelog1)
        E_bar, C_res = results["mmse"]
        report.add("pilots", [se_pilot_general(E_bar[k], C_res[k], prelog2,
                                               active[k]) for k in range(K)],
                   prelog2)
        # The ZF bound equals prelog2 * log2|I + C_res^{-1}| when equalization
        # succeeds every block; the general form with the measured mean combined
        # channel also covers realizations with degenerate estimates.
        E_bar_zf, C_res_zf = results["zf"]
        report.add("pilotsZF", [se_pilot_general(E_bar_zf[k], C_res_zf[k],
                                                 prelog2, active[k])
                                for k in range(K)], prelog2)

        return MethodResult(
            report=report,
            ap_power=self.ap_power_audit(method, col_norms, scaling, sel, active),
            rho=scaling.rho, active=active, n_blocks=n_blocks)

    def _sum_se_for_plan(self, method: str, plan: StreamPlan,
                         col_norms: np.ndarray, n_sched: int) -> float:
        """Scheduler objective: sum of the downlink-pilot SEs under the plan."""
        if plan.n_streams() == 0:
            return 0.0
        active = plan.active
        scaling = self.scaling_for(method, col_norms, None, active)
        bank, _ = self.stats_pass(method, n_sched, scaling, None, active,
                                  phase=PHASE_SCHED_STATS)
        results = self.eval_pass(method, n_sched, scaling, None, active, bank,
                                 combiners=("mmse",), phase=PHASE_SCHED_EVAL)
        E_bar, C_res = results["mmse"]
        prelog2 = 1.0 - 2.0 * self.cfg.tau_p / self.cfg.tau_c
        return float(sum(se_pilot_general(E_bar[k], C_res[k], prelog2, active[k])
                         for k in range(self.net.K)))


class _ResidualAccumulator:
    """Accumulates E_bar = E{U^H B_hat_kk} and the residual covariance pieces.

    The residual of the pilot bound is (U^H B_kk - E_bar) s_k
    + sum_{i != k} U^H B_ki s_i + U^H n, whose covariance combines the
    second moment of A = U^H B_kk, the interference grams, and E{U^H U}.
    """

    def __init__(self, K: int, M: int):
        self.sum_E = np.zeros((K, M, M), dtype=complex)
        self.sum_A = np.zeros((K, M, M), dtype=complex)
        self.sum_AAH = np.zeros((K, M, M), dtype=complex)
        self.sum_intf = np.zeros((K, M, M), dtype=complex)
        self.sum_UU = np.zeros((K, M, M), dtype=complex)

    def update(self, k: int, U: np.ndarray, B_k: np.ndarray,
               B_hat_kk: np.ndarray) -> None:
        UH = np.conj(np.swapaxes(U, -1, -2))
        A = UH @ B_k[:, k]
        UB = np.einsum("nma,nimb->niab", U.conj(), B_k)
        self.sum_E[k] += (UH @ B_hat_kk).sum(axis=0)
        self.sum_A[k] += A.sum(axis=0)
        self.sum_AAH[k] += np.einsum("nab,ncb->ac", A, A.conj())
        gram_all = np.einsum("niab,nicb->ac", UB, UB.conj())
        gram_own = np.einsum("nab,ncb->ac", A, A.conj())
        self.sum_intf[k] += gram_all - gram_own
        self.sum_UU[k] += np.einsum("nam,nab->mb", U.conj(), U)

    def finalize(self, n: int):
        E_bar = self.sum_E / n
        mean_A = self.sum_A / n
        EH = np.conj(np.swapaxes(E_bar, -1, -2))
        dev = (self.sum_AAH / n - mean_A @ EH
               - E_bar @ np.conj(np.swapaxes(mean_A, -1, -2))
               + E_bar @ EH)
        C_res = dev + self.sum_intf / n + self.sum_UU / n
        return E_bar, C_res


# ------------------------------------------------------- per-antenna baseline

def build_per_antenna_view(config: SystemConfig, net: NetworkRealization,
                           book: PilotBook):
    """Recast each user antenna as an independent single-antenna user.

    Statistics become the per-antenna diagonal blocks of R (the exact marginal
    law), pilot groups split column-wise so antenna m of user k shares its pilot
    exactly with antenna m of users in P_k, and channels are drawn jointly from
    the true network and reshaped, keeping the physical cross-antenna
    correlation.  Serving APs: the m-th strongest AP of user k serves virtual
    user (k, m), mirroring the separate-stream serving map.
    """
    L, K, N, M = net.L, net.K, config.N, config.M
    cfg_v = config.with_(K=K * M, M=1)
    R4 = net.R.reshape(L, K, M, N, M, N)
    blocks = np.einsum("lkmamb->lkmab", R4)            # (L, K, M, N, N)
    R_v = blocks.reshape(L, K * M, N, N)
    beta_v = np.einsum("lvaa->lv", R_v).real / N
    net_v = NetworkRealization(
        ap_positions=net.ap_positions,
        ue_positions=np.repeat(net.ue_positions, M, axis=0),
        beta=beta_v, R=R_v, N=N, M=1)

    group_v = (book.group[:, None] * M + np.arange(M)[None, :]).reshape(K * M)
    phi_v = np.stack([book.phi[v // M][:, [v % M]] for v in range(K * M)])
    book_v = PilotBook(phi=phi_v, group=group_v, n_groups=book.n_groups * M)

    sel_true = select_serving_aps(net.beta, M)
    sel_v = SelectionSet(diag=sel_true.diag.reshape(L, K * M, 1))

    def reshape(H):
        nc = H.shape[0]
        return np.swapaxes(H, 3, 4).reshape(nc, L, K * M, N, 1)

    return cfg_v, net_v, book_v, sel_v, reshape


# --------------------------------------------------------------- drop driver

@dataclass
class DropOutput:
    results: dict = field(default_factory=dict)   # method -> MethodResult


def run_drop(config: SystemConfig, methods, master_seed: int, drop_index: int,
             n_blocks: int, n_eval_blocks: int | None = None,
             schedule_same: bool = False, n_sched_blocks: int = 100) -> DropOutput:
    """Simulate every requested method on one network drop."""
    net = drop_network(config, geometry_seed(master_seed, drop_index))
    book = build_pilot_book(config, beta=net.beta)
    out = DropOutput()
    sim = None
    for method in methods:
        if method == PER_ANTENNA:
            cfg_v, net_v, book_v, sel_v, reshape = build_per_antenna_view(
                config, net, book)
            sim_v = DropSimulator(cfg_v, net_v, book_v, master_seed, drop_index,
                                  sampling_net=net, reshape=reshape)
            res_v = sim_v.simulate_method(SEPARATE_CSI, n_blocks, n_eval_blocks,
                                          sel=sel_v)
            out.results[method] = _fold_virtual_result(res_v, config.K, config.M)
        else:
            if sim is None:
                sim = DropSimulator(config, net, book, master_seed, drop_index)
            out.results[method] = sim.simulate_method(
                method, n_blocks, n_eval_blocks,
                schedule=schedule_same and method == SAME,
                n_sched_blocks=n_sched_blocks)
    return out


def _fold_virtual_result(res: MethodResult, K: int, M: int) -> MethodResult:
    """Aggregate per-virtual-user SEs back to per-user totals."""
    report = SEReport(method=PER_ANTENNA, n_blocks=res.report.n_blocks)
    for bound, values in res.report.se.items():
        report.add(bound, values.reshape(K, M).sum(axis=1),
                   res.report.prelog[bound])
    return MethodResult(report=report, ap_power=res.ap_power,
                        rho=res.rho, active=res.active.reshape(K, M),
                        n_blocks=res.n_blocks)


# ------------------------------------------------- hardening diagnostic (MR)

def mr_hardening_stats(N: int, M: int, n_blocks: int, seed):
    """Single AP/user, i.i.d. fading, MR precoding: statistics of B = H^H H.

    Returns (B_mean, entry_variance) for checking that the diagonal hardens
    around N while off-diagonal entries keep variance N.
    """
    rng = np.random.default_rng(seed)
    H = standard_complex_normal(rng, (n_blocks, N, M))
    B = np.conj(np.swapaxes(H, -1, -2)) @ H
    return B.mean(axis=0), B.var(axis=0)
