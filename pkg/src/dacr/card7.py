"""Accountable dispersal: Collection -> Dispersal -> Approval -> Agreement, and retrieval.

Replica ids run 0..n-1, views start at 1 and the leader of view ``v`` is
``(v - 1) % n``.  Replica ``p`` owns chunk ``p`` (its own column) and the
parity chunks ``p + n`` and ``p + 2n``.
"""
from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .coding import (CodeParams, DecodeFailure, bytes_to_column, column_to_bytes,
                     decode2d, encode2d)
from .commitment import PCS, TransparentPCS
from .sigs import Attestation, CombinedSignature, Keyring, PartialSig

NULL_TX = b"\x00NULL"
_HDR = struct.Struct(">HIH")   # replica, view, tx count


@dataclass
class Committee:
    """Everything a replica needs to know about its peers and the coding setup."""

    n: int
    f: int
    pcs: PCS
    keys: Keyring

    @classmethod
    def make(cls, n: int, f: int, d: int = 16, pcs: Optional[PCS] = None, seed: int = 0,
             scheme=None, threshold: Optional[int] = None) -> "Committee":
        if n < 3 * f + 1:
            raise ValueError(f"n={n} < 3f+1={3 * f + 1}")
        pcs = pcs or TransparentPCS(d=d)
        keys = Keyring.generate(n, n - f if threshold is None else threshold, seed, scheme)
        return cls(n, f, pcs, keys)

    @property
    def d(self) -> int:
        return self.pcs.d

    @property
    def field(self):
        return self.pcs.field

    @property
    def code(self) -> CodeParams:
        return CodeParams(self.n, self.d, self.field)

    @property
    def quorum(self) -> int:
        return self.n - self.f

    def leader(self, view: int) -> int:
        return (view - 1) % self.n

    def wire_list(self, commitments: tuple) -> bytes:
        """Concatenated wire forms; one list object is shipped to every replica, so cache by identity."""
        cache = self.__dict__.setdefault("_wire_cache", {})
        hit = cache.get(id(commitments))
        if hit is None or hit[0] is not commitments:
            if len(cache) > 64:
                cache.clear()
            hit = cache[id(commitments)] = (commitments, b"".join(self.pcs.wire_bytes(c) for c in commitments))
        return hit[1]

    def att_list(self, atts: tuple) -> bytes:
        cache = self.__dict__.setdefault("_att_cache", {})
        hit = cache.get(id(atts))
        if hit is None or hit[0] is not atts:
            if len(cache) > 64:
                cache.clear()
            hit = cache[id(atts)] = (atts, b"".join(map(_att_bytes, atts)))
        return hit[1]

    @property
    def capacity(self) -> int:
        return self.d * self.field.bytes_per_element


# -- mini-blocks -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MiniBlock:
    replica: int
    view: int
    txs: tuple
    column: np.ndarray
    byte_len: int


def pack_miniblock(replica: int, view: int, txs, com: Committee):
    """Serialize as many txs as fit; returns (MiniBlock, leftover txs)."""
    txs = list(txs) or [NULL_TX]
    body, used = b"", 0
    for tx in txs:
        item = struct.pack(">H", len(tx)) + tx
        if 4 + _HDR.size + len(body) + len(item) > com.capacity:
            break
        body += item
        used += 1
    if used == 0 and txs != [NULL_TX]:
        raise ValueError("transaction larger than a column")
    payload = _HDR.pack(replica, view, used) + body
    raw = struct.pack(">I", len(payload)) + payload
    col = bytes_to_column(raw, com.d, com.field)
    return MiniBlock(replica, view, tuple(txs[:used]), col, len(raw)), txs[used:]


def parse_column(col, com: Committee):
    """Inverse of ``pack_miniblock``; returns None for a zero or malformed column."""
    raw = column_to_bytes(col, com.capacity, com.field)
    (length,) = struct.unpack(">I", raw[:4])
    if length == 0 or length + 4 > len(raw) or length < _HDR.size:
        return None
    replica, view, count = _HDR.unpack(raw[4:4 + _HDR.size])
    off, txs = 4 + _HDR.size, []
    for _ in range(count):
        (ln,) = struct.unpack(">H", raw[off:off + 2])
        txs.append(raw[off + 2:off + 2 + ln])
        off += 2 + ln
    return {"replica": replica, "view": view, "txs": txs}


# -- messages --------------------------------------------------------------

def _lp(b: bytes) -> bytes:
    return struct.pack(">I", len(b)) + b


def _chunk_bytes(col, com: Committee) -> bytes:
    w = com.field.element_wire_bytes
    if com.field.dtype is object:
        return b"".join(int(v).to_bytes(w, "big") for v in col)
    return np.asarray(col, dtype=">u8").view(np.uint8).reshape(-1, 8)[:, 8 - w:].tobytes()


def _att_bytes(a: Attestation) -> bytes:
    return struct.pack(">HQ", a.replica, a.view) + a.sig


@dataclass(eq=False)
class Collection:
    view: int
    sender: int
    attestation: Attestation
    block: MiniBlock
    kind = "Collection"

    def encode(self, com: Committee) -> bytes:
        return b"COL" + struct.pack(">QH", self.view, self.sender) + _att_bytes(self.attestation) \
            + _lp(_chunk_bytes(self.block.column, com))


@dataclass(eq=False)
class Dispersal:
    view: int
    sender: int
    recipient: int
    commitments: tuple          # n per-column commitments
    chunks: dict                # {p+n: column, p+2n: column}
    attestations: tuple         # the attestation set S
    kind = "Dispersal"

    def encode(self, com: Committee) -> bytes:
        parts = [b"DSP", struct.pack(">QHH", self.view, self.sender, self.recipient),
                 struct.pack(">H", len(self.commitments))]
        parts.append(com.wire_list(self.commitments))
        for idx in sorted(self.chunks):
            parts.append(struct.pack(">H", idx) + _lp(_chunk_bytes(self.chunks[idx], com)))
        parts.append(struct.pack(">H", len(self.attestations)))
        parts.append(com.att_list(self.attestations))
        return b"".join(parts)


@dataclass(eq=False)
class Approval:
    view: int
    sender: int
    final_c: bytes
    partial: PartialSig
    kind = "Approval"

    def encode(self, com: Committee) -> bytes:
        return b"APR" + struct.pack(">QH", self.view, self.sender) + self.final_c + self.partial.sig


@dataclass(eq=False)
class Agreement:
    view: int
    sender: int
    final_c: bytes
    combined: CombinedSignature
    kind = "Agreement"

    def encode(self, com: Committee) -> bytes:
        return b"AGR" + struct.pack(">QH", self.view, self.sender) + self.final_c + self.combined.to_bytes()


def approval_msg(final_c: bytes, view: int) -> bytes:
    return b"dacr/approve" + final_c + struct.pack(">Q", view)


# -- replica ---------------------------------------------------------------

class Phase(enum.IntEnum):
    IDLE = 0
    COLLECTED = 1
    DISPERSED = 2
    APPROVED = 3
    COMPLETE = 4
    INCOMPLETE = 5


@dataclass
class InstanceState:
    view: int
    phase: Phase = Phase.IDLE
    block: Optional[MiniBlock] = None
    commitment: object = None
    commitments: Optional[tuple] = None
    attestations: tuple = ()
    final_c: Optional[bytes] = None
    reject: Optional[str] = None


class Card7Replica:
    def __init__(self, rid: int, com: Committee):
        self.rid = rid
        self.com = com
        self.instances: dict[int, InstanceState] = {}
        self.db: dict[bytes, dict] = {}          # final_c -> {chunk index: column}
        self.agg_sigs: dict[tuple, CombinedSignature] = {}
        self.last_signal = 0
        self.approvals_signed: dict[int, bytes] = {}

    def state(self, view: int) -> InstanceState:
        if view not in self.instances:
            self.instances[view] = InstanceState(view)
        return self.instances[view]

    def on_signal(self, view: int, txs) -> tuple[Optional[Collection], list]:
        """Build, commit and attest a mini-block; returns (Collection, leftover txs)."""
        if view <= self.last_signal:
            return None, list(txs)
        self.last_signal = view
        com = self.com
        block, rest = pack_miniblock(self.rid, view, txs, com)
        c = com.pcs.commit(block.column)
        att = com.keys.attest(self.rid, com.pcs.to_bytes(c), view)
        st = self.state(view)
        st.block, st.commitment = block, c
        st.phase = max(st.phase, Phase.COLLECTED)
        return Collection(view, self.rid, att, block), rest

    def verify_dispersal(self, msg: Dispersal) -> tuple[Optional[Approval], Optional[str]]:
        com, pcs, p, n = self.com, self.com.pcs, self.rid, self.com.n
        st = self.state(msg.view)
        if st.phase >= Phase.APPROVED or st.reject or msg.view in self.approvals_signed:
            return None, "duplicate"
        reason, ext = self._check(msg, st)
        if reason:
            st.reject = reason
            return None, reason
        final_c = pcs.final_commit_of(msg.commitments)
        own = st.block.column if (st.block is not None and not pcs.is_identity(msg.commitments[p])) \
            else com.field.zeros(com.d)
        self.db[final_c] = {p: own, p + n: msg.chunks[p + n], p + 2 * n: msg.chunks[p + 2 * n],
                            "view": msg.view, "commitments": msg.commitments}
        st.commitments, st.attestations, st.final_c = msg.commitments, msg.attestations, final_c
        st.phase = Phase.APPROVED
        self.approvals_signed[msg.view] = final_c
        part = com.keys.ms_sign(p, approval_msg(final_c, msg.view))
        return Approval(msg.view, p, final_c, part), None

    def _check(self, msg: Dispersal, st: InstanceState):
        com, pcs, p, n = self.com, self.com.pcs, self.rid, self.com.n
        if len(msg.commitments) != n or set(msg.chunks) != {p + n, p + 2 * n}:
            return "malformed", None
        c_p = msg.commitments[p]
        if st.block is not None and not pcs.is_identity(c_p) and c_p != st.commitment:
            return "own-commit-mismatch", None
        reason = check_inc(msg.attestations, msg.commitments, com, msg.view)
        if reason:
            return reason, None
        ext = pcs.extend_eval(msg.commitments)
        for idx in (p + n, p + 2 * n):
            col = msg.chunks[idx]
            if np.shape(col) != (com.d,) or pcs.commit(col) != ext[idx]:
                return "parity-mismatch", None
        return None, ext

    def on_agreement(self, msg: Agreement) -> bool:
        key = (msg.final_c, msg.view)
        if key in self.agg_sigs:
            return False
        if not self.com.keys.ms_verify(msg.combined, approval_msg(msg.final_c, msg.view)):
            return False
        self.agg_sigs[key] = msg.combined
        st = self.state(msg.view)
        if st.phase != Phase.INCOMPLETE:
            st.phase = Phase.COMPLETE
        return True

    def on_timeout(self, view: int):
        st = self.state(view)
        if st.phase != Phase.COMPLETE:
            st.phase = Phase.INCOMPLETE

    def verify_card(self, final_c: bytes, view: int) -> bool:
        cs = self.agg_sigs.get((final_c, view))
        return cs is not None and self.com.keys.ms_verify(cs, approval_msg(final_c, view))

    # retrieval service
    def serve_chunks(self, final_c: bytes):
        entry = self.db.get(final_c)
        if entry is None:
            return None
        return {k: v for k, v in entry.items() if isinstance(k, int)}

    def serve_point(self, final_c: bytes, owner: int, row: int):
        entry = self.db.get(final_c)
        if entry is None or owner not in entry:
            return None
        return self.com.pcs.create_witness(entry[owner], row)


def check_inc(attestations, commitments, com: Committee, view: int) -> Optional[str]:
    """None if the inclusion rules hold, else the failure cause."""
    # pure function of its arguments; every replica checks the same bundle
    memo = com.__dict__.setdefault("_inc_memo", {})
    key = (tuple(attestations), tuple(commitments), view)
    try:
        return memo[key]
    except KeyError:
        pass
    except TypeError:       # unhashable backend points
        return _check_inc(attestations, commitments, com, view)
    if len(memo) > 256:
        memo.clear()
    out = memo[key] = _check_inc(attestations, commitments, com, view)
    return out


def _check_inc(attestations, commitments, com: Committee, view: int) -> Optional[str]:
    pcs = com.pcs
    attested = set()
    for a in attestations:
        if a.replica in attested or not 0 <= a.replica < com.n:
            return "inclusion-shortfall"
        c = commitments[a.replica]
        if pcs.is_identity(c) or not com.keys.verify_attest(a.replica, pcs.to_bytes(c), view, a):
            return "inclusion-shortfall"
        attested.add(a.replica)
    for i, c in enumerate(commitments):
        if i not in attested and not pcs.is_identity(c):
            return "space-capture"
    if len(attested) < com.quorum:
        return "inclusion-shortfall"
    return None


# -- leader ----------------------------------------------------------------

class Card7Leader:
    def __init__(self, rid: int, com: Committee, view: int, reach_proc_time: float = 0.0):
        self.rid, self.com, self.view = rid, com, view
        self.reach_proc_time = reach_proc_time
        self.collections: dict[int, Collection] = {}
        self.commitments: dict[int, object] = {}
        self.quorum_at: Optional[float] = None
        self.dispersed = False
        self.final_c: Optional[bytes] = None
        self.approvals: dict[bytes, dict[int, PartialSig]] = {}
        self.agreement: Optional[Agreement] = None
        self.matrix = None

    def collect(self, msg: Collection, now: float = 0.0) -> bool:
        """validCollect; returns True if the collection was newly accepted."""
        com = self.com
        if msg.view != self.view or msg.sender in self.collections or self.dispersed:
            return False
        if msg.block.replica != msg.sender or np.shape(msg.block.column) != (com.d,):
            return False
        c = com.pcs.commit(msg.block.column)
        if com.pcs.is_identity(c) or not com.keys.verify_attest(msg.sender, com.pcs.to_bytes(c), self.view,
                                                                msg.attestation):
            return False
        self.collections[msg.sender] = msg
        self.commitments[msg.sender] = c
        if self.quorum_at is None and len(self.collections) >= com.quorum:
            self.quorum_at = now
        return True

    def ready(self, now: float) -> bool:
        return (not self.dispersed and self.quorum_at is not None
                and now >= self.quorum_at + self.reach_proc_time)

    def build(self, included=None, columns=None):
        """Encode the included collections. ``columns`` overrides data (adversarial use)."""
        com, pcs = self.com, self.com.pcs
        included = sorted(self.collections if included is None else included)
        cols = [None] * com.n
        comms = [pcs.identity] * com.n
        for i in included:
            cols[i] = self.collections[i].block.column
            comms[i] = self.commitments[i]
        if columns:
            for i, col in columns.items():
                cols[i] = col
        matrix = encode2d(cols, com.code)
        atts = tuple(self.collections[i].attestation for i in included)
        return tuple(comms), atts, matrix

    def bundles(self, comms, atts, matrix, recipients=None) -> list[Dispersal]:
        n = self.com.n
        rec = range(n) if recipients is None else recipients
        return [Dispersal(self.view, self.rid, p, comms, {p + n: matrix[:, p + n], p + 2 * n: matrix[:, p + 2 * n]},
                          atts) for p in rec]

    def disperse(self, included=None) -> list[Dispersal]:
        comms, atts, matrix = self.build(included)
        self.dispersed = True
        self.matrix = matrix
        self.final_c = self.com.pcs.final_commit_of(list(comms))
        return self.bundles(comms, atts, matrix)

    def on_approval(self, msg: Approval) -> Optional[Agreement]:
        com = self.com
        if self.agreement is not None or msg.view != self.view:
            return None
        if msg.partial.message != approval_msg(msg.final_c, self.view) or msg.partial.signer != msg.sender:
            return None
        if not com.keys.ms_verify_partial(msg.partial):
            return None
        self.approvals.setdefault(msg.final_c, {})[msg.sender] = msg.partial
        if len(self.approvals[msg.final_c]) < com.quorum:
            return None
        # plurality C, ties broken by the smaller digest
        best = min(self.approvals, key=lambda c: (-len(self.approvals[c]), c))
        cs = com.keys.ms_agg(self.approvals[best].values())
        self.agreement = Agreement(self.view, self.rid, best, cs)
        return self.agreement


# -- retrieval -------------------------------------------------------------

class RetrievalExhausted(RuntimeError):
    pass


@dataclass
class RetrievalResult:
    columns: dict            # replica id -> column
    contacted: int
    fallback: bool


def _verified(resp, ext, pcs) -> dict:
    good = {}
    if not isinstance(resp, dict):
        return good
    for idx, col in resp.items():
        if isinstance(idx, int) and 0 <= idx < len(ext):
            try:
                if pcs.commit(col) == ext[idx]:
                    good[idx] = col
            except (ValueError, TypeError):
                pass
    return good


def retrieve_chunk(com: Committee, commitments, target: int, query: Callable, rng: np.random.Generator,
                   leader: Optional[int] = None) -> RetrievalResult:
    """Recover column ``target`` (or every column when ``target == -1``).

    ``query(replica, final_c)`` returns that replica's chunk dict or None.
    """
    pcs, n, f = com.pcs, com.n, com.f
    ext = pcs.extend_eval(list(commitments))
    final_c = pcs.final_commit(ext)
    contacted = []
    if target >= 0:
        for r in dict.fromkeys(x for x in (target, leader) if x is not None):
            contacted.append(r)
            got = _verified(query(r, final_c), ext, pcs)
            if target in got:
                return RetrievalResult({target: got[target]}, len(contacted), False)
    chunks, triples = {}, 0
    need = max(f + 1, -(-n // 3))
    for r in rng.permutation(n):
        r = int(r)
        if r in contacted:
            continue
        contacted.append(r)
        got = _verified(query(r, final_c), ext, pcs)
        if len(got) == 3 and set(got) == {r, r + n, r + 2 * n}:
            triples += 1
        chunks.update(got)
        if triples >= need and len(chunks) >= n:
            break
    else:
        raise RetrievalExhausted(f"only {triples} verified triples")
    data = decode2d(chunks, com.code)
    wanted = range(n) if target < 0 else [target]
    out = {}
    for i in wanted:
        col = data[:, i]
        if pcs.commit(col) != commitments[i]:
            raise DecodeFailure(f"column {i} does not match its commitment")
        out[i] = col
    return RetrievalResult(out, len(contacted), True)


def retrieve_point(com: Committee, commitments, owner: int, row: int, query_point: Callable, query: Callable,
                   rng: np.random.Generator, leader: Optional[int] = None):
    """Single verified cell; falls back to column reconstruction. Returns (value, used_fallback)."""
    pcs = com.pcs
    final_c = pcs.final_commit_of(list(commitments))
    resp = query_point(owner, final_c, row)
    if resp is not None:
        value, w = resp
        if pcs.verify_eval(commitments[owner], row, value, w):
            return int(value), False
    res = retrieve_chunk(com, commitments, owner, query, rng, leader)
    return int(res.columns[owner][row]), True
