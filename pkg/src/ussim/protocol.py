"""N-recipient signing over pairwise key stores.

Key distribution runs in two rounds. In preparation, the sender issues a
batch of n*k hash keys to each recipient over their shared link, so at
first only that recipient sees its batch. In sharing, each recipient
splits its batch into n uniformly random chunks of k keys, keeps the
chunk matching its own index, and moves chunk d to recipient d through a
one-time-padded transfer, labelling every key with its slot in the
original batch. Afterwards each recipient holds k keys out of every
batch, and no single user other than the sender knows any batch in full.

A signature tags the message under all n*n*k issued keys. Verification
at acceptance level l checks, batch by batch, how many of the holder's k
keys disagree with the published tag for their slot: a batch passes when
the disagreeing fraction stays strictly below the level's threshold, and
the signature is accepted when the passing fraction strictly exceeds the
level's quorum. Each step down in level loosens both thresholds, which
is what makes an accepted signature safe to forward: whoever receives it
next verifies one level lower and is overwhelmingly likely to agree.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from ._bitops import bits_to_bytes, bits_to_int, int_to_bits, pack_rows, unpack_rows
from .hashing import tags_of_arrays
from .keystore import Network
from .secparams import ProtocolParams, compute_delta, id_bits

__all__ = [
    "OriginKeys",
    "Signature",
    "VerifyResult",
    "Sender",
    "Recipient",
    "run_distribution",
    "forward_chain",
]

PARTITION_STREAM = 0x50415254  # seed-sequence tag for partition draws

_MAGIC = b"USS1"
_VERSION = 1
_HEADER = struct.Struct(">4sBHBHII")  # magic, version, a, t, n, k, payload bytes


class OriginKeys(NamedTuple):
    """One recipient's k-key share of the batch issued through one recipient."""

    slots: np.ndarray
    multipliers: np.ndarray
    offsets: np.ndarray


@dataclass(frozen=True, eq=False)
class Signature:
    """A message plus one tag per issued key.

    tags has shape (n_recipients, n_recipients * k); tags[i, s]
    authenticates the message under slot s of the batch issued through
    recipient i. The wire layout is a fixed 18-byte header (magic
    b"USS1", version, message bits, tag bits, recipient count, keys per
    chunk, payload byte count) followed by the message and then the tags
    in batch-major slot order, all MSB first and zero-padded to a whole
    byte.
    """

    message: int
    tags: np.ndarray
    n_recipients: int
    k: int
    msg_len_bits: int
    tag_len_bits: int

    def __post_init__(self) -> None:
        a, t, n, k = self.msg_len_bits, self.tag_len_bits, self.n_recipients, self.k
        if not 1 <= a <= 0xFFFF:
            raise ValueError(f"msg_len_bits must be in [1, 65535], got {a}")
        if not 1 <= t <= min(a, 0xFF):
            raise ValueError(f"tag_len_bits must be in [1, min(msg_len_bits, 255)], got {t}")
        if not 2 <= n <= 0xFFFF:
            raise ValueError(f"n_recipients must be in [2, 65535], got {n}")
        if not 1 <= k <= 0xFFFFFFFF:
            raise ValueError(f"k must be in [1, 2**32 - 1], got {k}")
        if not 0 <= self.message < (1 << a):
            raise ValueError(f"message must fit in {a} bits")
        if self.tags.shape != (n, n * k):
            raise ValueError(
                f"tags must have shape {(n, n * k)}, got {self.tags.shape}"
            )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Signature):
            return NotImplemented
        return (
            self.message == other.message
            and self.n_recipients == other.n_recipients
            and self.k == other.k
            and self.msg_len_bits == other.msg_len_bits
            and self.tag_len_bits == other.tag_len_bits
            and np.array_equal(self.tags, other.tags)
        )

    def to_bytes(self) -> bytes:
        tag_bits = unpack_rows(self.tags.ravel(), self.tag_len_bits).ravel()
        bits = np.concatenate([int_to_bits(self.message, self.msg_len_bits), tag_bits])
        payload = bits_to_bytes(bits)
        header = _HEADER.pack(
            _MAGIC,
            _VERSION,
            self.msg_len_bits,
            self.tag_len_bits,
            self.n_recipients,
            self.k,
            len(payload),
        )
        return header + payload

    @classmethod
    def from_bytes(cls, data: bytes) -> "Signature":
        if len(data) < _HEADER.size:
            raise ValueError(
                f"signature blob is {len(data)} bytes, shorter than the "
                f"{_HEADER.size}-byte header"
            )
        magic, version, a, t, n, k, payload_len = _HEADER.unpack_from(data)
        if magic != _MAGIC:
            raise ValueError(f"bad magic {magic!r}")
        if version != _VERSION:
            raise ValueError(f"unsupported signature version {version}")
        n_tags = n * n * k
        n_bits = a + n_tags * t
        if payload_len != (n_bits + 7) // 8:
            raise ValueError(
                f"payload length says {payload_len} bytes but the header fields "
                f"need {(n_bits + 7) // 8}"
            )
        expected = _HEADER.size + payload_len
        if len(data) != expected:
            raise ValueError(f"signature blob is {len(data)} bytes, expected {expected}")
        payload = np.frombuffer(data, dtype=np.uint8, offset=_HEADER.size)
        all_bits = np.unpackbits(payload)
        if all_bits[n_bits:].any():
            raise ValueError("nonzero padding bits after the tag stream")
        bits = all_bits[:n_bits]
        message = bits_to_int(bits[:a])
        tags = pack_rows(bits[a:].reshape(n_tags, t)).reshape(n, n * k)
        return cls(
            message=message,
            tags=tags,
            n_recipients=n,
            k=k,
            msg_len_bits=a,
            tag_len_bits=t,
        )


@dataclass(frozen=True)
class VerifyResult:
    """Outcome of one acceptance test."""

    recipient_index: int
    level: int
    accepted: bool
    groups_passed: int
    n_groups: int
    mismatch_counts: tuple[int, ...]
    s_threshold: float
    delta_threshold: float


def _check_network(network: Network, params: ProtocolParams) -> None:
    want = params.n_recipients + 1
    if network.n_users != want:
        raise ValueError(
            f"network has {network.n_users} users but the protocol needs "
            f"{want} (one sender plus {params.n_recipients} recipients)"
        )


def _check_message(message: int, msg_len_bits: int) -> None:
    if not isinstance(message, int) or isinstance(message, bool):
        raise ValueError(f"message must be an int, got {type(message).__name__}")
    if not 0 <= message < (1 << msg_len_bits):
        raise ValueError(f"message must be in [0, 2**{msg_len_bits})")


def _check_signature_match(signature: Signature, params: ProtocolParams) -> None:
    pairs = [
        ("n_recipients", signature.n_recipients, params.n_recipients),
        ("k", signature.k, params.k),
        ("msg_len_bits", signature.msg_len_bits, params.msg_len_bits),
        ("tag_len_bits", signature.tag_len_bits, params.tag_len_bits),
    ]
    for name, got, want in pairs:
        if got != want:
            raise ValueError(f"signature {name} is {got}, protocol expects {want}")


def _decode_keys(bits: np.ndarray, params: ProtocolParams) -> tuple[np.ndarray, np.ndarray]:
    a, t = params.msg_len_bits, params.tag_len_bits
    rows = bits.reshape(-1, a + t)
    return pack_rows(rows[:, :a]), pack_rows(rows[:, a:])


class Sender:
    """The signing user. Issues key batches and publishes tag lists."""

    def __init__(self, network: Network, params: ProtocolParams) -> None:
        _check_network(network, params)
        self.network = network
        self.params = params
        self.user = 0
        self._issued: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    @property
    def prepared(self) -> bool:
        return len(self._issued) == self.params.n_recipients

    def prepare(self) -> None:
        """Issue a fresh batch of n*k keys to every recipient.

        Spends n*k*(a + t) bits on each sender link. The sender records
        its own noiseless view of each batch; a recipient's view may
        differ where its link flips bits.
        """
        if self._issued:
            raise RuntimeError("preparation already ran on this sender")
        p = self.params
        key_len = p.msg_len_bits + p.tag_len_bits
        for r in range(p.n_recipients):
            link = self.network.link(self.user, r + 1)
            bits = link.draw_shared(p.n_recipients * p.k * key_len, side=self.user)
            self._issued[r] = _decode_keys(bits, p)

    def issued_group(self, origin: int) -> tuple[np.ndarray, np.ndarray]:
        """Multipliers and offsets of the batch issued through one recipient."""
        if not self.prepared:
            raise RuntimeError("prepare() has not run")
        if origin not in self._issued:
            raise ValueError(f"origin must be in [0, {self.params.n_recipients}), got {origin}")
        return self._issued[origin]

    def sign(self, message: int) -> Signature:
        """Tag the message under every issued key, in batch-major slot order."""
        if not self.prepared:
            raise RuntimeError("prepare() must run before signing")
        p = self.params
        _check_message(message, p.msg_len_bits)
        rows = [
            tags_of_arrays(mult, off, message, p.msg_len_bits, p.tag_len_bits)
            for mult, off in (self._issued[r] for r in range(p.n_recipients))
        ]
        return Signature(
            message=message,
            tags=np.stack(rows),
            n_recipients=p.n_recipients,
            k=p.k,
            msg_len_bits=p.msg_len_bits,
            tag_len_bits=p.tag_len_bits,
        )


class Recipient:
    """A verifying user. Holds one k-key share of every issued batch."""

    def __init__(self, network: Network, params: ProtocolParams, index: int) -> None:
        _check_network(network, params)
        if not 0 <= index < params.n_recipients:
            raise ValueError(
                f"recipient index must be in [0, {params.n_recipients}), got {index}"
            )
        self.network = network
        self.params = params
        self.index = index
        self.user = index + 1
        self._batch: tuple[np.ndarray, np.ndarray] | None = None
        self._chunks: list[np.ndarray] | None = None
        self._held: dict[int, OriginKeys] = {}

    def receive_batch(self) -> None:
        """Read this recipient's (possibly noisy) view of its issued batch."""
        if self._batch is not None:
            raise RuntimeError("batch already received")
        p = self.params
        key_len = p.msg_len_bits + p.tag_len_bits
        link = self.network.link(0, self.user)
        bits = link.draw_shared(p.n_recipients * p.k * key_len, side=self.user)
        self._batch = _decode_keys(bits, p)

    def make_partition(self) -> None:
        """Split the batch into n uniformly random chunks of k keys each.

        The chunk matching this recipient's own index is kept; the others
        wait for send_share. The draw is private to this recipient: the
        sender never learns which slots ended up where.
        """
        if self._batch is None:
            raise RuntimeError("receive_batch() must run before partitioning")
        if self._chunks is not None:
            raise RuntimeError("partition already drawn")
        p = self.params
        rng = np.random.default_rng([self.network.seed, PARTITION_STREAM, self.index])
        perm = rng.permutation(p.n_recipients * p.k)
        self._chunks = [np.sort(perm[d * p.k : (d + 1) * p.k]) for d in range(p.n_recipients)]
        mult, off = self._batch
        own = self._chunks[self.index]
        self._held[self.index] = OriginKeys(own.copy(), mult[own], off[own])

    def send_share(self, other: "Recipient") -> None:
        """One-time-pad chunk other.index of this batch to that recipient.

        Each key travels as slot id plus multiplier plus offset, costing
        k * (id_bits + a + t) pad bits on the connecting link.
        """
        if self._chunks is None:
            raise RuntimeError("make_partition() must run before sharing")
        if other.index == self.index:
            raise ValueError("a recipient does not share with itself")
        p = self.params
        chunk = self._chunks[other.index]
        mult, off = self._batch
        ib = id_bits(p.n_recipients, p.k)
        rows = np.concatenate(
            [
                unpack_rows(chunk, ib),
                unpack_rows(mult[chunk], p.msg_len_bits),
                unpack_rows(off[chunk], p.tag_len_bits),
            ],
            axis=1,
        )
        link = self.network.link(self.user, other.user)
        delivered = link.otp_transfer(rows.ravel(), from_side=self.user)
        other._receive_share(self.index, delivered)

    def _receive_share(self, origin: int, payload: np.ndarray) -> None:
        if origin in self._held:
            raise RuntimeError(f"share from origin {origin} already received")
        p = self.params
        ib = id_bits(p.n_recipients, p.k)
        rows = payload.reshape(p.k, ib + p.msg_len_bits + p.tag_len_bits)
        slots = pack_rows(rows[:, :ib]).astype(np.int64)
        mult = pack_rows(rows[:, ib : ib + p.msg_len_bits])
        off = pack_rows(rows[:, ib + p.msg_len_bits :])
        self._held[origin] = OriginKeys(slots, mult, off)

    @property
    def distribution_complete(self) -> bool:
        return len(self._held) == self.params.n_recipients

    def batch_view(self) -> tuple[np.ndarray, np.ndarray]:
        """Multipliers and offsets of the full batch this recipient received."""
        if self._batch is None:
            raise RuntimeError("receive_batch() has not run")
        return self._batch

    def held_group(self, origin: int) -> OriginKeys:
        """This recipient's k-key share of one batch."""
        if origin not in self._held:
            raise ValueError(f"no keys held from origin {origin}")
        return self._held[origin]

    def verify(self, signature: Signature, level: int) -> VerifyResult:
        """Acceptance test at one level.

        A batch passes when strictly fewer than s_level * k of this
        recipient's k key tests disagree with the published tags. A key
        whose slot id was corrupted past the tag list's range counts as a
        disagreement. The signature is accepted when the passing fraction
        strictly exceeds the level's quorum.
        """
        if not self.distribution_complete:
            raise RuntimeError(
                f"recipient {self.index} has shares from {len(self._held)} of "
                f"{self.params.n_recipients} batches; distribution is incomplete"
            )
        p = self.params
        _check_signature_match(signature, p)
        if level not in p.s_levels:
            raise ValueError(f"level must be in [-1, {p.l_max}], got {level}")
        s = p.s_levels[level]
        delta = compute_delta(level, p.d_r)
        n, k = p.n_recipients, p.k
        counts = []
        for origin in range(n):
            held = self._held[origin]
            expected = tags_of_arrays(
                held.multipliers, held.offsets, signature.message,
                p.msg_len_bits, p.tag_len_bits,
            )
            slots = held.slots
            valid = (slots >= 0) & (slots < n * k)
            bad = int(np.count_nonzero(~valid))
            published = signature.tags[origin][slots[valid]]
            bad += int(np.count_nonzero(published != expected[valid]))
            counts.append(bad)
        passed = sum(1 for c in counts if c / k < s)
        accepted = passed / n > delta
        return VerifyResult(
            recipient_index=self.index,
            level=level,
            accepted=accepted,
            groups_passed=passed,
            n_groups=n,
            mismatch_counts=tuple(counts),
            s_threshold=s,
            delta_threshold=delta,
        )


def run_distribution(network: Network, params: ProtocolParams) -> tuple[Sender, list[Recipient]]:
    """Run preparation and sharing; return the sender and all recipients.

    Draw order is fixed (batches in recipient order, then transfers in
    source-major order), so one network seed always reproduces the same
    distribution outcome.
    """
    sender = Sender(network, params)
    recipients = [Recipient(network, params, i) for i in range(params.n_recipients)]
    sender.prepare()
    for r in recipients:
        r.receive_batch()
    for r in recipients:
        r.make_partition()
    for src in recipients:
        for dst in recipients:
            if dst.index != src.index:
                src.send_share(dst)
    return sender, recipients


def forward_chain(
    signature: Signature,
    recipients: Sequence[Recipient],
    start_level: int,
) -> list[VerifyResult]:
    """Verify along a forwarding path, one level lower per hop.

    The first recipient tests at start_level, the next at start_level - 1,
    and so on. Stops at the first rejection; a chain in which everyone
    accepted means the message transferred all the way down.
    """
    if not recipients:
        raise ValueError("forward_chain needs at least one recipient")
    if start_level - (len(recipients) - 1) < -1:
        raise ValueError(
            f"a chain of {len(recipients)} hops starting at level {start_level} "
            f"would drop below level -1"
        )
    results = []
    level = start_level
    for recipient in recipients:
        result = recipient.verify(signature, level)
        results.append(result)
        if not result.accepted:
            break
        level -= 1
    return results
