"""Deterministic discrete-event harness for the aggregation protocol.

Simulated milliseconds govern protocol behavior (delivery order, the
collection deadline); wall-clock time is measured separately and only
reported. Given the same config, schedule, and seed, two runs produce
identical event traces, metrics, and models.

Per round: online devices send one masked update each; at the deadline the
server fixes the online list and sends it to online base stations, which
answer with one mask share each; the server reconstructs the mask sum,
updates the global model (or falls back to the previous one), and
broadcasts it. Dropped entities neither send nor receive that round, and
their traffic is accounted as never sent.

Local model training is excluded from the per-role compute times; the
timers cover the aggregation protocol's own work only.
"""

from __future__ import annotations

import heapq
import random
import time
from dataclasses import asdict, dataclass, field as dc_field

from .field import FixedPointCodec
from .messages import (
    GlobalModelMsg,
    MaskedUpdateMsg,
    MaskShareMsg,
    MaskShareMode,
    OnlineListMsg,
    from_bytes,
    wire_length,
)
from .protocol import (
    Aggregator,
    BaseStation,
    CollectStatus,
    MissingShareError,
    UserEquipment,
    generate_key,
    route_setup_shares,
)
from .shamir import AccessStructure

AGGREGATED = "AGGREGATED"
FALLBACK = "FALLBACK"

# tie-break ranks for events sharing a timestamp: deliveries land before the
# deadline fires (arrival exactly at the deadline still counts), and a new
# round starts only after everything due at that instant was delivered
_KIND_DELIVER = 0
_KIND_DEADLINE = 1
_KIND_ROUND_START = 2


@dataclass(frozen=True)
class DropoutSchedule:
    """Which entities are offline, per whole aggregation round.

    Explicit per-round sets, always-offline sets, and seeded per-round
    Bernoulli dropouts combine by union. ``dropped_*`` are pure functions of
    (schedule, t).
    """

    ue_rounds: dict[int, frozenset[int]] = dc_field(default_factory=dict)
    bs_rounds: dict[int, frozenset[int]] = dc_field(default_factory=dict)
    ue_always: frozenset[int] = frozenset()
    bs_always: frozenset[int] = frozenset()
    ue_prob: float = 0.0
    bs_prob: float = 0.0
    prob_seed: int = 0
    prob_ue_ids: tuple[int, ...] = ()
    prob_bs_ids: tuple[int, ...] = ()

    @classmethod
    def none(cls) -> "DropoutSchedule":
        return cls()

    @classmethod
    def constant(cls, ue_ids=(), bs_ids=()) -> "DropoutSchedule":
        """The given entities are offline for every round."""
        return cls(ue_always=frozenset(ue_ids), bs_always=frozenset(bs_ids))

    def _sampled(self, prefix: str, prob: float, ids, t: int) -> frozenset[int]:
        if prob <= 0.0 or not ids:
            return frozenset()
        rng = random.Random(f"{prefix}:{self.prob_seed}:{t}")
        return frozenset(i for i in ids if rng.random() < prob)

    def dropped_ues(self, t: int) -> frozenset[int]:
        return (
            self.ue_always
            | self.ue_rounds.get(t, frozenset())
            | self._sampled("ue", self.ue_prob, self.prob_ue_ids, t)
        )

    def dropped_bss(self, t: int) -> frozenset[int]:
        return (
            self.bs_always
            | self.bs_rounds.get(t, frozenset())
            | self._sampled("bs", self.bs_prob, self.prob_bs_ids, t)
        )


def apply_dropout(
    schedule: DropoutSchedule, t: int, ue_ids, bs_ids
) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Online entity ids for round t: configured minus scheduled-off."""
    online_ues = tuple(sorted(set(ue_ids) - schedule.dropped_ues(t)))
    online_bss = tuple(sorted(set(bs_ids) - schedule.dropped_bss(t)))
    return online_ues, online_bss


@dataclass
class SimConfig:
    n_ues: int = 8
    n_bss: int = 4
    bs_threshold: int = 3
    min_online_fraction: float = 1.0 / 3.0
    model_dim: int = 10
    iterations: int = 10
    rng_seed: int = 0
    latency_base_ms: float = 5.0
    latency_jitter_ms: float = 5.0
    deadline_ms: float = 50.0
    mask_share_mode: MaskShareMode = MaskShareMode.EVALUATED
    frac_bits: int = 16
    magnitude_bound: float = 1.0
    max_summands: int = 1024

    def __post_init__(self):
        if self.n_ues < 1 or self.n_bss < 1:
            raise ValueError("need at least one UE and one BS")
        if not 1 <= self.bs_threshold <= self.n_bss:
            raise ValueError(
                f"bs_threshold must be in [1, {self.n_bss}], got {self.bs_threshold}"
            )
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not 0.0 < self.min_online_fraction <= 1.0:
            raise ValueError("min_online_fraction must be in (0, 1]")
        if self.deadline_ms <= self.latency_base_ms:
            raise ValueError("deadline must exceed the base latency")
        if self.latency_jitter_ms < 0:
            raise ValueError("latency jitter must be >= 0")
        if self.max_summands < self.n_ues:
            raise ValueError("codec max_summands must cover all UEs")

    def codec(self) -> FixedPointCodec:
        return FixedPointCodec(self.frac_bits, self.magnitude_bound, self.max_summands)

    def access_structure(self) -> AccessStructure:
        return AccessStructure(self.bs_threshold, self.n_bss)

    def metadata(self) -> dict:
        out = asdict(self)
        out["mask_share_mode"] = self.mask_share_mode.name
        return out


@dataclass
class SetupMetrics:
    bytes_ue_sent: int = 0
    bytes_bs_recv: int = 0
    msgs_ue_to_bs: int = 0
    time_setup_ms: float = 0.0


@dataclass
class RoundMetrics:
    iteration: int
    online_ues: int
    online_bss: int
    outcome: str = FALLBACK
    online_list_size: int = 0
    accuracy: float = 0.0
    bytes_ue_sent: int = 0
    bytes_ue_recv: int = 0
    bytes_bs_sent: int = 0
    bytes_bs_recv: int = 0
    bytes_af_sent: int = 0
    bytes_af_recv: int = 0
    msgs_ue_to_af: int = 0
    msgs_af_to_bs: int = 0
    msgs_bs_to_af: int = 0
    msgs_af_to_ue: int = 0
    late_drops: int = 0
    stale_drops: int = 0
    duplicate_drops: int = 0
    bs_abstentions: int = 0
    time_ue_ms: float = 0.0
    time_bs_ms: float = 0.0
    time_af_ms: float = 0.0

    def total_sent(self) -> int:
        return self.bytes_ue_sent + self.bytes_bs_sent + self.bytes_af_sent

    def total_received(self) -> int:
        return self.bytes_ue_recv + self.bytes_bs_recv + self.bytes_af_recv


def account_message(metrics, msg, sender_role: str, receiver_role: str) -> None:
    """Charge one delivered message's exact wire length to both roles."""
    nbytes = wire_length(msg)
    setattr(metrics, f"bytes_{sender_role}_sent",
            getattr(metrics, f"bytes_{sender_role}_sent", 0) + nbytes)
    setattr(metrics, f"bytes_{receiver_role}_recv",
            getattr(metrics, f"bytes_{receiver_role}_recv", 0) + nbytes)


@dataclass
class SimResult:
    config: SimConfig
    setup: SetupMetrics
    rounds: list[RoundMetrics]
    final_model: list[float]
    model_history: list[list[float]]


@dataclass
class _RoundState:
    t: int
    online_ues: tuple[int, ...]
    online_bss: tuple[int, ...]
    metrics: RoundMetrics
    finalized: bool = False
    expected_bs: int = 0
    shares: dict[int, MaskShareMsg] = dc_field(default_factory=dict)
    abstained: int = 0
    done: bool = False


class _Timer:
    """Accumulates wall-clock milliseconds onto a metrics attribute."""

    def __init__(self, metrics, attr: str):
        self.metrics = metrics
        self.attr = attr

    def __enter__(self):
        self._start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        elapsed = (time.perf_counter() - self._start) * 1e3
        setattr(self.metrics, self.attr, getattr(self.metrics, self.attr) + elapsed)
        return False


class _Simulation:
    def __init__(self, cfg: SimConfig, schedule: DropoutSchedule, task):
        if task.dim != cfg.model_dim:
            raise ValueError(
                f"task dimension {task.dim} != configured model_dim {cfg.model_dim}"
            )
        if task.n_shards < cfg.n_ues:
            raise ValueError("task has fewer shards than configured UEs")
        self.cfg = cfg
        self.schedule = schedule
        self.task = task
        self.ue_ids = tuple(range(1, cfg.n_ues + 1))
        self.bs_ids = tuple(range(1, cfg.n_bss + 1))
        self._check_schedule()

        master = random.Random(cfg.rng_seed)
        self.key_rng = random.Random(master.getrandbits(64))
        self.shamir_rng = random.Random(master.getrandbits(64))
        self.latency_rng = random.Random(master.getrandbits(64))

        codec = cfg.codec()
        self.ues = {
            i: UserEquipment(
                ue_id=i,
                key=generate_key(self.key_rng),
                codec=codec,
                dim=cfg.model_dim,
                current_model=[0.0] * cfg.model_dim,
            )
            for i in self.ue_ids
        }
        self.bss = {j: BaseStation(bs_id=j) for j in self.bs_ids}
        self.af = Aggregator(
            registered_n=cfg.n_ues,
            min_online_fraction=cfg.min_online_fraction,
            bs_threshold=cfg.access_structure(),
            codec=codec,
            dim=cfg.model_dim,
        )

        self.heap: list = []
        self.seq = 0
        self.now = 0.0
        self.setup_metrics = SetupMetrics()
        self.round_state: dict[int, _RoundState] = {}
        self.model_history: list[list[float]] = []

    def _check_schedule(self):
        ue_set, bs_set = set(self.ue_ids), set(self.bs_ids)
        for t in range(self.cfg.iterations):
            unknown = (self.schedule.dropped_ues(t) - ue_set) | (
                self.schedule.dropped_bss(t) - bs_set
            )
            if unknown:
                raise ValueError(f"dropout schedule references unknown ids {unknown}")

    def _latency(self) -> float:
        return self.cfg.latency_base_ms + self.latency_rng.uniform(
            0.0, self.cfg.latency_jitter_ms
        )

    def _push(self, when: float, kind: int, sender: int, payload) -> None:
        heapq.heappush(self.heap, (when, kind, sender, self.seq, payload))
        self.seq += 1

    def _send(self, msg, dst_role: str, dst_id: int, round_t: int) -> float:
        arrival = self.now + self._latency()
        self._push(
            arrival,
            _KIND_DELIVER,
            msg.sender,
            (msg.to_bytes(), dst_role, dst_id, round_t),
        )
        return arrival

    # -- setup phase ------------------------------------------------------

    def _run_setup(self) -> float:
        """Distribute every UE's shares; returns the last delivery time so
        round 0 starts only once every base station is provisioned."""
        acc = self.cfg.access_structure()
        start = time.perf_counter()
        last_arrival = self.now
        for i in self.ue_ids:
            ue = self.ues[i]
            msgs = ue.setup(acc, self.shamir_rng)
            ue.precompute(self.cfg.iterations)
            delivery = route_setup_shares(msgs, set(self.bs_ids))
            for j in sorted(delivery):
                last_arrival = max(last_arrival, self._send(delivery[j], "bs", j, round_t=-1))
                self.setup_metrics.msgs_ue_to_bs += 1
        self.setup_metrics.time_setup_ms = (time.perf_counter() - start) * 1e3
        return last_arrival

    # -- event handlers ----------------------------------------------------

    def _on_round_start(self, t: int) -> None:
        online_ues, online_bss = apply_dropout(self.schedule, t, self.ue_ids, self.bs_ids)
        state = _RoundState(
            t=t,
            online_ues=online_ues,
            online_bss=online_bss,
            metrics=RoundMetrics(iteration=t, online_ues=len(online_ues),
                                 online_bss=len(online_bss)),
        )
        self.round_state[t] = state
        self.af.begin_round(t)
        for i in online_ues:
            ue = self.ues[i]
            w = self.task.local_update(i - 1, ue.current_model)
            with _Timer(state.metrics, "time_ue_ms"):
                msg = ue.masked_update(w, t)
            self._send(msg, "af", 0, round_t=t)
            state.metrics.msgs_ue_to_af += 1
        self._push(self.now + self.cfg.deadline_ms, _KIND_DEADLINE, 0, t)

    def _on_deadline(self, t: int) -> None:
        state = self.round_state[t]
        state.finalized = True
        with _Timer(state.metrics, "time_af_ms"):
            online_list = self.af.finalize_online_list()
        state.metrics.online_list_size = len(self.af.online_ids)
        if online_list is None or not state.online_bss:
            self._fallback(state)
            return
        state.expected_bs = len(state.online_bss)
        for j in state.online_bss:
            self._send(online_list, "bs", j, round_t=t)
            state.metrics.msgs_af_to_bs += 1

    def _on_deliver(self, raw: bytes, dst_role: str, dst_id: int, round_t: int) -> None:
        msg = from_bytes(raw)
        if round_t < 0:
            account_message(self.setup_metrics, msg, "ue", "bs")
            self.bss[dst_id].receive_share(msg)
            return
        state = self.round_state[round_t]
        metrics = state.metrics
        if isinstance(msg, MaskedUpdateMsg):
            account_message(metrics, msg, "ue", "af")
            if state.finalized:
                metrics.late_drops += 1
                return
            with _Timer(metrics, "time_af_ms"):
                status = self.af.collect_update(msg)
            if status is CollectStatus.STALE:
                metrics.stale_drops += 1
            elif status is CollectStatus.DUPLICATE:
                metrics.duplicate_drops += 1
            return
        if isinstance(msg, OnlineListMsg):
            account_message(metrics, msg, "af", "bs")
            bs = self.bss[dst_id]
            try:
                with _Timer(metrics, "time_bs_ms"):
                    share = bs.mask_share(
                        msg, round_t, self.cfg.mask_share_mode, self.cfg.model_dim
                    )
            except MissingShareError:
                state.abstained += 1
                metrics.bs_abstentions += 1
                self._maybe_recover(state)
                return
            self._send(share, "af", 0, round_t=round_t)
            metrics.msgs_bs_to_af += 1
            return
        if isinstance(msg, MaskShareMsg):
            account_message(metrics, msg, "bs", "af")
            state.shares[msg.sender] = msg
            self._maybe_recover(state)
            return
        if isinstance(msg, GlobalModelMsg):
            account_message(metrics, msg, "af", "ue")
            self.ues[dst_id].current_model = list(msg.weights)
            return
        raise RuntimeError(f"unroutable message {msg!r}")

    def _maybe_recover(self, state: _RoundState) -> None:
        if state.done or len(state.shares) + state.abstained < state.expected_bs:
            return
        with _Timer(state.metrics, "time_af_ms"):
            agg_mask = self.af.recover_mask(
                state.shares, self.cfg.mask_share_mode, self.cfg.model_dim
            )
        if agg_mask is None:
            self._fallback(state)
            return
        with _Timer(state.metrics, "time_af_ms"):
            self.af.unmask_and_aggregate(agg_mask)
        state.metrics.outcome = AGGREGATED
        self._close_round(state)

    def _fallback(self, state: _RoundState) -> None:
        self.af.fallback()
        state.metrics.outcome = FALLBACK
        self._close_round(state)

    def _close_round(self, state: _RoundState) -> None:
        state.done = True
        state.metrics.accuracy = self.task.accuracy(self.af.global_model)
        self.model_history.append(list(self.af.global_model))
        model_msg = self.af.global_model_message()
        last_arrival = self.now
        for i in state.online_ues:
            arrival = self.now + self._latency()
            last_arrival = max(last_arrival, arrival)
            self._push(
                arrival, _KIND_DELIVER, model_msg.sender,
                (model_msg.to_bytes(), "ue", i, state.t),
            )
            state.metrics.msgs_af_to_ue += 1
        if state.t + 1 < self.cfg.iterations:
            self._push(last_arrival, _KIND_ROUND_START, 0, state.t + 1)

    # -- main loop ---------------------------------------------------------

    def run(self) -> SimResult:
        setup_done = self._run_setup()
        self._push(setup_done, _KIND_ROUND_START, 0, 0)
        while self.heap:
            when, kind, _sender, _seq, payload = heapq.heappop(self.heap)
            self.now = when
            if kind == _KIND_DELIVER:
                self._on_deliver(*payload)
            elif kind == _KIND_DEADLINE:
                self._on_deadline(payload)
            else:
                self._on_round_start(payload)
        rounds = [self.round_state[t].metrics for t in sorted(self.round_state)]
        return SimResult(
            config=self.cfg,
            setup=self.setup_metrics,
            rounds=rounds,
            final_model=list(self.af.global_model),
            model_history=self.model_history,
        )


def run_simulation(cfg: SimConfig, schedule: DropoutSchedule, task) -> SimResult:
    """Run setup once, then ``cfg.iterations`` aggregation rounds."""
    return _Simulation(cfg, schedule, task).run()
