"""The three aggregation-protocol roles and their single-round message flow.

Roles:
  * ``UserEquipment`` holds a private masking key, splits it into per-base-
    station shares once at setup, and thereafter sends exactly one masked
    update per round.
  * ``BaseStation`` stores one key share per registered device and answers
    each round's online list with one aggregated mask share.
  * ``Aggregator`` (the untrusted server) collects masked updates, fixes the
    online list, reconstructs the sum of online masks from any threshold-many
    base-station shares, and unmasks only the sum.

Entities are passive state machines: a message in causes a state change and
zero or more messages out. The discrete-event harness in ``simnet`` drives
them; tests may also drive them directly.

``alpha_summation_oracle`` is the ideal behavior the protocol is checked
against in tests: release plaintext sums only for sufficiently large sets.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field as dc_field
from enum import Enum

from . import field, khprf, shamir
from .field import FixedPointCodec
from .messages import (
    GlobalModelMsg,
    MaskedUpdateMsg,
    MaskShareMsg,
    MaskShareMode,
    OnlineListMsg,
    SetupShareMsg,
)
from .shamir import AccessStructure, SecretShare

logger = logging.getLogger(__name__)

AF_SENDER_ID = 0  # reserved sender id for the aggregation server


class ProtocolError(Exception):
    """A party attempted a transition its state machine forbids."""


class MissingShareError(ProtocolError):
    """A base station was asked to cover a device it holds no share for."""


class CollectStatus(Enum):
    ACCEPTED = "accepted"
    DUPLICATE = "duplicate"
    STALE = "stale"


def generate_key(rng) -> int:
    """Fresh uniform masking key in Z_p."""
    return field.rand_element(rng)


@dataclass
class UserEquipment:
    """A device: private key, fixed-point codec, and its view of the model."""

    ue_id: int
    key: int
    codec: FixedPointCodec
    dim: int
    current_model: list[float] = dc_field(default_factory=list)
    precomputed_masks: list[list[int]] | None = None
    _setup_done: bool = False
    _used_iterations: set[int] = dc_field(default_factory=set)

    def setup(self, acc: AccessStructure, rng) -> list[SetupShareMsg]:
        """Split the key into one share per base station (share x = BS index).

        One-shot: the key is shared once; re-running setup without a reset
        would hand out a second, inconsistent share set.
        """
        if self._setup_done:
            raise ProtocolError(f"UE {self.ue_id} already completed setup")
        self._setup_done = True
        return [
            SetupShareMsg(sender=self.ue_id, iteration=0, target_bs=share.x, share=share)
            for share in shamir.split(self.key, acc, rng)
        ]

    def precompute(self, num_iterations: int) -> None:
        """Front-load masks for iterations 0..num_iterations-1."""
        self.precomputed_masks = khprf.precompute_masks(self.key, num_iterations, self.dim)

    def masked_update(self, w, t: int) -> MaskedUpdateMsg:
        """Encode the local update and add this round's mask.

        Each iteration's mask may be used once; reuse would let the server
        cancel masks across rounds and open individual updates.
        """
        if t in self._used_iterations:
            raise ProtocolError(f"UE {self.ue_id} already used its mask for iteration {t}")
        if self.precomputed_masks is not None and t < len(self.precomputed_masks):
            mask = self.precomputed_masks[t]
        else:
            mask = khprf.evaluate(self.key, t, self.dim)
        payload = field.vec_add(field.encode_update(w, self.codec), mask)
        self._used_iterations.add(t)
        return MaskedUpdateMsg(sender=self.ue_id, iteration=t, payload=tuple(payload))


def route_setup_shares(
    messages: list[SetupShareMsg], region_bs_ids: set[int]
) -> dict[int, SetupShareMsg]:
    """Trusted-router step: map each setup share to its target base station.

    The router forwards without storing; it only checks that the batch is
    well-formed (one message per target, all targets in the region).
    """
    delivery: dict[int, SetupShareMsg] = {}
    for msg in messages:
        if msg.target_bs not in region_bs_ids:
            raise ValueError(f"no base station {msg.target_bs} in region")
        if msg.target_bs in delivery:
            raise ValueError(f"duplicate share for base station {msg.target_bs}")
        delivery[msg.target_bs] = msg
    return delivery


def admitted_ues(delivered: dict[int, set[int]], total_bs: int) -> set[int]:
    """Devices whose shares reached every base station.

    Partial setup is treated as no setup at all: a base station missing one
    share would poison its aggregated mask share for any list containing
    that device.
    """
    return {ue for ue, bss in delivered.items() if len(bss) == total_bs}


@dataclass
class BaseStation:
    """Regional relay: holds one key share per registered device."""

    bs_id: int
    stored_shares: dict[int, SecretShare] = dc_field(default_factory=dict)

    def receive_share(self, msg: SetupShareMsg) -> None:
        if msg.target_bs != self.bs_id:
            raise ProtocolError(
                f"share for BS {msg.target_bs} delivered to BS {self.bs_id}"
            )
        if msg.share.x != self.bs_id:
            raise ProtocolError(
                f"share point x={msg.share.x} does not match BS index {self.bs_id}"
            )
        if msg.sender in self.stored_shares:
            raise ProtocolError(
                f"BS {self.bs_id} already stores a share for UE {msg.sender}"
            )
        self.stored_shares[msg.sender] = msg.share

    def mask_share(
        self, online: OnlineListMsg, t: int, mode: MaskShareMode, d: int
    ) -> MaskShareMsg:
        """Sum the key shares of the online list and answer with one message.

        EVALUATED ships the mask vector for the summed share; COMPACT ships
        the summed share itself, leaving expansion to the server. Both carry
        the same information by key-homomorphism.

        Raises MissingShareError if any listed device never registered here;
        the station must abstain rather than emit a wrong share.
        """
        missing = [ue for ue in online.ue_ids if ue not in self.stored_shares]
        if missing:
            raise MissingShareError(
                f"BS {self.bs_id} holds no share for UEs {missing}"
            )
        summed = 0
        for ue in online.ue_ids:
            summed = field.add(summed, self.stored_shares[ue].y)
        if mode is MaskShareMode.EVALUATED:
            return MaskShareMsg(
                sender=self.bs_id, iteration=t, mode=mode,
                vector=tuple(khprf.evaluate(summed, t, d)),
            )
        return MaskShareMsg(sender=self.bs_id, iteration=t, mode=mode, scalar=summed)


@dataclass
class Aggregator:
    """The aggregation server; sees masked updates and aggregated shares only."""

    registered_n: int
    min_online_fraction: float
    bs_threshold: AccessStructure
    codec: FixedPointCodec
    dim: int
    iteration: int = 0
    global_model: list[float] = dc_field(default_factory=list)
    masked_updates: dict[int, tuple[int, ...]] = dc_field(default_factory=dict)
    online_ids: tuple[int, ...] | None = None
    _warned_compact: bool = False

    def __post_init__(self):
        if not self.global_model:
            self.global_model = [0.0] * self.dim

    def begin_round(self, t: int) -> None:
        self.iteration = t
        self.masked_updates = {}
        self.online_ids = None

    def collect_update(self, msg: MaskedUpdateMsg) -> CollectStatus:
        """Log the sender as online; reject duplicates, drop stale rounds."""
        if msg.iteration != self.iteration:
            return CollectStatus.STALE
        if msg.sender in self.masked_updates:
            return CollectStatus.DUPLICATE
        if len(msg.payload) != self.dim:
            raise ValueError(
                f"masked update dim {len(msg.payload)} != model dim {self.dim}"
            )
        self.masked_updates[msg.sender] = msg.payload
        return CollectStatus.ACCEPTED

    def min_online_count(self) -> int:
        return math.ceil(self.min_online_fraction * self.registered_n)

    def finalize_online_list(self) -> OnlineListMsg | None:
        """Fix the online list at the collection deadline.

        Returns the broadcast message, or None when participation fell below
        the configured floor (the caller then halts this round).
        """
        self.online_ids = tuple(sorted(self.masked_updates))
        if len(self.online_ids) < self.min_online_count():
            return None
        return OnlineListMsg(
            sender=AF_SENDER_ID, iteration=self.iteration, ue_ids=self.online_ids
        )

    def recover_mask(
        self, shares: dict[int, MaskShareMsg], mode: MaskShareMode, d: int
    ) -> list[int] | None:
        """Reconstruct the sum of online devices' masks from BS shares.

        Uses the threshold-many lowest-indexed responding stations, for
        reproducibility. Returns None when fewer than threshold responded;
        below threshold the mask sum is information-theoretically out of
        reach, which is exactly the privacy guarantee.
        """
        t_needed = self.bs_threshold.threshold
        if len(shares) < t_needed:
            return None
        chosen = sorted(shares)[:t_needed]
        coeffs = shamir.lagrange_coeffs_at_zero(chosen)
        if mode is MaskShareMode.COMPACT:
            if not self._warned_compact:
                logger.warning(
                    "COMPACT mask shares reveal the aggregated key of the online "
                    "set to the server; two rounds whose online lists differ by "
                    "one device leak that device's key. Prefer EVALUATED."
                )
                self._warned_compact = True
            summed_key = 0
            for lam, j in zip(coeffs, chosen):
                summed_key = field.add(summed_key, field.mul(lam, shares[j].scalar))
            return khprf.evaluate(summed_key, self.iteration, d)
        payloads = [list(shares[j].vector) for j in chosen]
        return shamir.combine_linear(payloads, coeffs)

    def unmask_and_aggregate(self, agg_mask: list[int]) -> list[float]:
        """Subtract the mask sum, decode, average, and fold into the model.

        Returns the global update (uniform average over the online list).
        Only the sum ever exists in decoded form.
        """
        if self.online_ids is None:
            raise ProtocolError("online list not finalized")
        masked_sum = [0] * self.dim
        for ue in self.online_ids:
            masked_sum = field.vec_add(masked_sum, list(self.masked_updates[ue]))
        encoded_sum = field.vec_sub(masked_sum, agg_mask)
        count = len(self.online_ids)
        decoded = field.decode_sum(encoded_sum, self.codec, count)
        update = [x / count for x in decoded]
        self.global_model = [m + u for m, u in zip(self.global_model, update)]
        return update

    def global_model_message(self) -> GlobalModelMsg:
        return GlobalModelMsg(
            sender=AF_SENDER_ID,
            iteration=self.iteration,
            weights=tuple(self.global_model),
        )

    def fallback(self) -> GlobalModelMsg:
        """Halt this round: redistribute the previous model unchanged."""
        return self.global_model_message()


def alpha_summation_oracle(
    partition: list[set[int]],
    updates: dict[int, list[int]],
    alpha: float,
    n: int,
) -> list[list[int] | None]:
    """Ideal summation: per disjoint set, the plaintext field sum if the set
    clears the participation floor ceil(alpha * n), else None.

    Test oracle only; the protocol's end-to-end output must match it.
    """
    seen: set[int] = set()
    for group in partition:
        if seen & group:
            raise ValueError("partition sets overlap")
        seen |= group
    floor = math.ceil(alpha * n)
    results: list[list[int] | None] = []
    for group in partition:
        if len(group) < floor:
            results.append(None)
            continue
        members = sorted(group)
        total = list(updates[members[0]])
        for ue in members[1:]:
            total = field.vec_add(total, updates[ue])
        results.append(total)
    return results
