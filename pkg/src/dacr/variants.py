"""Comparison protocols on the same message skeleton as card7.

``quarter``  one polynomial over the concatenated mini-blocks, a single
             commitment, per-point witnesses, no attestations, approvals at
             n-2f, and dispersal only to the included replicas (n >= 4f+1).
``vanilla``  the whole block is broadcast; a replica approves iff its own
             mini-block appears verbatim; approvals at n-2f.

``run_da`` drives one dispersal instance of any of the three protocols
(card7 included) synchronously and reports bytes and outcomes.  It is
the dispersal-only mode of the simulator used for the scaling and
trade-off experiments.
"""
from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .card7 import (Agreement, Approval, Card7Leader, Card7Replica, Committee, approval_msg,
                    pack_miniblock, retrieve_chunk, _chunk_bytes, _lp)
from .coding import CodeParams, F65537, domain, rs_decode_row, rs_encode_row
from .commitment import TransparentPCS

WITNESS_BYTES = 32    # a pairing-based opening proof; the transparent witness is only simulated


# -- messages ------------------------------------------------------------------

@dataclass(eq=False)
class QCollection:
    view: int
    sender: int
    block: object
    kind = "Collection"

    def encode(self, com) -> bytes:
        return b"QCL" + struct.pack(">QH", self.view, self.sender) + _lp(_chunk_bytes(self.block.column, com))


@dataclass(eq=False)
class QDispersal:
    view: int
    sender: int
    recipient: int
    commitment: object
    included: tuple
    chunks: dict           # chunk index -> (values, witnesses)
    kind = "Dispersal"

    def encode(self, com) -> bytes:
        parts = [b"QDS", struct.pack(">QHH", self.view, self.sender, self.recipient), bytes(32),
                 struct.pack(">H", len(self.included)), b"".join(struct.pack(">H", i) for i in self.included)]
        for idx in sorted(self.chunks):
            vals, wits = self.chunks[idx]
            parts.append(struct.pack(">H", idx) + _lp(_chunk_bytes(vals, com)) + bytes(WITNESS_BYTES * len(wits)))
        return b"".join(parts)


@dataclass(eq=False)
class VBlock:
    view: int
    sender: int
    recipient: int
    blocks: tuple          # ((replica, raw bytes), ...) in slot order
    kind = "Dispersal"

    def encode(self, com) -> bytes:
        return b"VBL" + struct.pack(">QHH", self.view, self.sender, self.recipient) + \
            b"".join(struct.pack(">H", r) + _lp(raw) for r, raw in self.blocks)

    @property
    def digest(self) -> bytes:
        body = b"".join(struct.pack(">H", r) + _lp(raw) for r, raw in self.blocks)
        return hashlib.sha256(b"dacr/vanilla" + struct.pack(">QH", self.view, self.sender) + body).digest()


def _raw(block, com) -> bytes:
    return _chunk_bytes(block.column, com)


# -- Card-1/4 --------------------------------------------------------------------

class QuarterSetup:
    """Committee plus the 1D polynomial commitment over n*d evaluations."""

    def __init__(self, com: Committee):
        if com.n < 4 * com.f + 1:
            raise ValueError(f"the 1D layout needs n >= 4f+1, got n={com.n}, f={com.f}")
        self.com = com
        n, d, fld = com.n, com.d, com.field
        self.k = n * d
        self.pcs = TransparentPCS(fld, d=self.k, points=domain(fld, 3 * self.k))
        self.params = CodeParams(self.k, 1, fld)

    def chunk_range(self, idx: int) -> range:
        d = self.com.d
        return range(idx * d, (idx + 1) * d)

    def digest(self, commitment, included) -> bytes:
        return hashlib.sha256(b"dacr/quarter" + self.pcs.to_bytes(commitment)
                              + b"".join(struct.pack(">H", i) for i in included)).digest()


class QuarterReplica:
    def __init__(self, rid: int, setup: QuarterSetup):
        self.rid, self.setup, self.com = rid, setup, setup.com
        self.blocks = {}
        self.db = {}
        self.agg_sigs = {}
        self.approved = set()

    def on_signal(self, view, txs):
        block, rest = pack_miniblock(self.rid, view, txs, self.com)
        self.blocks[view] = block
        return QCollection(view, self.rid, block), rest

    def verify_dispersal(self, msg: QDispersal):
        su, com, p, n = self.setup, self.com, self.rid, self.com.n
        if msg.view in self.approved:
            return None, "duplicate"
        if p not in msg.included or len(msg.included) < com.n - com.f:
            return None, "inclusion-shortfall"
        if set(msg.chunks) != {p, p + n, p + 2 * n}:
            return None, "malformed"
        own = self.blocks.get(msg.view)
        if own is None or not np.array_equal(np.asarray(msg.chunks[p][0]), own.column):
            return None, "own-commit-mismatch"
        for idx, (vals, wits) in msg.chunks.items():
            for j, pos in enumerate(su.chunk_range(idx)):
                if not su.pcs.verify_eval(msg.commitment, pos, int(vals[j]), wits[j]):
                    return None, "parity-mismatch"
        c = su.digest(msg.commitment, msg.included)
        self.db[c] = {"commitment": msg.commitment, "included": msg.included,
                      **{idx: vals for idx, (vals, _) in msg.chunks.items()}}
        self.approved.add(msg.view)
        return Approval(msg.view, p, c, com.keys.ms_sign(p, approval_msg(c, msg.view))), None

    def on_agreement(self, msg: Agreement) -> bool:
        if not self.com.keys.ms_verify(msg.combined, approval_msg(msg.final_c, msg.view)):
            return False
        self.agg_sigs[(msg.final_c, msg.view)] = msg.combined
        return True

    def serve_chunks(self, c):
        e = self.db.get(c)
        return None if e is None else {k: v for k, v in e.items() if isinstance(k, int)}


class QuarterLeader:
    def __init__(self, rid: int, setup: QuarterSetup, view: int):
        self.rid, self.setup, self.com, self.view = rid, setup, setup.com, view
        self.collections = {}
        self.approvals = {}
        self.agreement = None
        self.codeword = None

    def collect(self, msg: QCollection, now=0.0) -> bool:
        if msg.view != self.view or msg.sender in self.collections or msg.block.replica != msg.sender:
            return False
        self.collections[msg.sender] = msg
        return True

    def encode(self, included, overrides=None):
        com, su = self.com, self.setup
        data = com.field.zeros(su.k)
        for i in included:
            data[su.chunk_range(i).start:su.chunk_range(i).stop] = self.collections[i].block.column
        for i, col in (overrides or {}).items():
            data[su.chunk_range(i).start:su.chunk_range(i).stop] = col
        return rs_encode_row(data, com.field), data

    def disperse(self, included=None, overrides=None):
        """Dispersal only to the included replicas.  ``overrides`` replaces slot data (adversarial)."""
        com, su, n = self.com, self.setup, self.com.n
        included = tuple(sorted(self.collections if included is None else included))
        word, data = self.encode(included, overrides)
        self.codeword = word
        c = su.pcs.commit(data)
        coeffs = su.pcs.coefficients(data)
        from .commitment import _quotient
        out = []
        for p in included:
            chunks = {}
            for idx in (p, p + n, p + 2 * n):
                vals, wits = [], []
                for pos in su.chunk_range(idx):
                    v, q = _quotient(coeffs, int(su.pcs.points[pos]), com.field.p)
                    vals.append(v)
                    wits.append(tuple(q))
                chunks[idx] = (com.field.array(vals), wits)
            out.append(QDispersal(self.view, self.rid, p, c, included, chunks))
        return out

    def on_approval(self, msg: Approval):
        keys = self.com.keys
        if self.agreement is not None or msg.partial.message != approval_msg(msg.final_c, self.view):
            return None
        if not keys.ms_verify_partial(msg.partial) or msg.partial.signer != msg.sender:
            return None
        self.approvals.setdefault(msg.final_c, {})[msg.sender] = msg.partial
        if len(self.approvals[msg.final_c]) < keys.threshold:
            return None
        best = min(self.approvals, key=lambda c: (-len(self.approvals[c]), c))
        self.agreement = Agreement(self.view, self.rid, best, keys.ms_agg(self.approvals[best].values()))
        return self.agreement


def quarter_retrieve(setup: QuarterSetup, entry_commitment, query, responders, final_c):
    """Decode the 1D codeword from whatever verified chunks the responders return."""
    pts = {}
    for r in responders:
        got = query(r, final_c)
        if not got:
            continue
        for idx, vals in got.items():
            for j, pos in enumerate(setup.chunk_range(idx)):
                pts[pos] = int(vals[j])
        if len(pts) >= setup.k:
            break
    if len(pts) < setup.k:
        return None
    data = rs_decode_row(pts.items(), setup.params)
    d = setup.com.d
    return {i: data[i * d:(i + 1) * d] for i in range(setup.com.n)}


# -- vanilla ---------------------------------------------------------------------

class VanillaReplica:
    def __init__(self, rid: int, com: Committee):
        self.rid, self.com = rid, com
        self.blocks = {}
        self.agg_sigs = {}
        self.db = {}
        self.approved = set()

    def on_signal(self, view, txs):
        block, rest = pack_miniblock(self.rid, view, txs, self.com)
        self.blocks[view] = block
        return QCollection(view, self.rid, block), rest

    def verify_dispersal(self, msg: VBlock):
        if msg.view in self.approved:
            return None, "duplicate"
        own = self.blocks.get(msg.view)
        mine = [raw for r, raw in msg.blocks if r == self.rid]
        if own is None or not mine or mine[0] != _raw(own, self.com):
            return None, "own-block-missing"
        c = msg.digest
        self.db[c] = msg.blocks
        self.approved.add(msg.view)
        return Approval(msg.view, self.rid, c, self.com.keys.ms_sign(self.rid, approval_msg(c, msg.view))), None

    def on_agreement(self, msg: Agreement) -> bool:
        if not self.com.keys.ms_verify(msg.combined, approval_msg(msg.final_c, msg.view)):
            return False
        self.agg_sigs[(msg.final_c, msg.view)] = msg.combined
        return True


class VanillaLeader(QuarterLeader):
    def __init__(self, rid: int, com: Committee, view: int):
        self.rid, self.com, self.view = rid, com, view
        self.collections, self.approvals, self.agreement = {}, {}, None

    def disperse(self, included=None, filler: Optional[dict] = None):
        """Full block to everyone.  ``filler`` maps a slot's claimed owner to leader-chosen bytes."""
        com = self.com
        included = sorted(self.collections if included is None else included)
        slots = [(i, _raw(self.collections[i].block, com)) for i in included]
        slots += sorted((filler or {}).items())
        return [VBlock(self.view, self.rid, p, tuple(slots)) for p in range(com.n)]


# -- one-instance driver ----------------------------------------------------------

@dataclass
class DAResult:
    protocol: str
    n: int
    f: int
    complete: bool
    approvals: int
    reasons: dict
    download: list             # DA bytes received per replica
    block_bytes: int           # one mini-block column on the wire (b)
    included: tuple = ()
    originals: dict = field(default_factory=dict)
    decoded: Optional[dict] = None
    honest_untampered: int = 0
    captured: int = 0
    malicious: frozenset = frozenset()

    @property
    def mean_download(self) -> float:
        return float(np.mean([b for i, b in enumerate(self.download) if i != 0]))

    @property
    def tampered_undetected(self) -> bool:
        """Complete although some honest slot decodes to non-zero data its owner never sent."""
        if not self.complete or self.decoded is None:
            return False
        return any(np.any(self.decoded[i]) and not np.array_equal(self.decoded[i], self.originals[i])
                   for i in self.decoded if i not in self.malicious)


def _fill_txs(rng, com, tx_bytes=8):
    room = com.capacity - 12          # length prefix and header
    tx_bytes = min(tx_bytes, room - 2)
    if tx_bytes < 1:
        return []                     # only the NULL tx fits
    return [rng.bytes(tx_bytes) for _ in range(room // (tx_bytes + 2))]


def run_da(protocol: str, n: int, f: int, d: int = 16, seed: int = 0, strategy: str = "honest",
           victims=None, malicious=None, field_=F65537) -> DAResult:
    """Synchronous single instance, leader id 0 (malicious iff the strategy is not ``honest``).

    strategies: ``honest``; ``tamper`` (mutate included honest victims' data);
    ``capture`` (fill as many slots as the approval threshold allows with
    leader data); ``censor`` (exclude the victims).
    """
    rng = np.random.default_rng(seed)
    thr = n - f if protocol == "card7" else n - 2 * f
    com = Committee.make(n, f, pcs=TransparentPCS(field_, d), seed=seed, threshold=thr)
    bad = set(range(f) if malicious is None else malicious) if strategy != "honest" else set()
    honest = [i for i in range(n) if i not in bad]
    down = [0] * n
    view = 1
    if protocol == "card7":
        reps = [Card7Replica(i, com) for i in range(n)]
        leader = Card7Leader(0, com, view)
    elif protocol == "quarter":
        su = QuarterSetup(com)
        reps = [QuarterReplica(i, su) for i in range(n)]
        leader = QuarterLeader(0, su, view)
    elif protocol == "vanilla":
        reps = [VanillaReplica(i, com) for i in range(n)]
        leader = VanillaLeader(0, com, view)
    else:
        raise ValueError(f"unknown protocol {protocol!r}")

    originals = {}
    for r in reps:
        msg, _ = r.on_signal(view, _fill_txs(rng, com))
        originals[r.rid] = msg.block.column
        if r.rid != 0:
            down[0] += len(msg.encode(com))
        leader.collect(msg)

    victims = set(victims) if victims is not None else set(honest[:f] if f else honest[:1])
    victims -= bad
    included = tuple(sorted(leader.collections))
    captured = 0
    if strategy == "censor":
        included = tuple(i for i in included if i not in victims)
        included = included if len(included) >= n - f else tuple(sorted(leader.collections))[: n - f]

    def mutate(col):
        col = col.copy()
        col[0] = (int(col[0]) + 1) % com.field.p
        return col

    if protocol == "card7":
        columns = {v: mutate(originals[v]) for v in victims} if strategy == "tamper" else None
        comms, atts, matrix = leader.build(included, columns)
        leader.dispersed, leader.matrix = True, matrix
        leader.final_c = com.pcs.final_commit_of(list(comms))
        disp = leader.bundles(comms, atts, matrix)
    elif protocol == "quarter":
        over = {}
        if strategy == "tamper":
            over = {v: mutate(originals[v]) for v in victims}
        elif strategy == "capture":
            # keep n-f slots, all but n-3f honest ones tampered; malicious approvals make up the rest
            hon_inc = [i for i in included if i not in bad]
            keep = set(hon_inc[:n - 3 * f])
            over = {i: mutate(originals[i]) for i in hon_inc if i not in keep}
            captured = len(over)
        disp = leader.disperse(included, over)
    else:
        filler = None
        if strategy == "capture":
            hon_inc = [i for i in included if i not in bad]
            included = tuple(hon_inc[:n - 3 * f])
            filler = {i: _chunk_bytes(com.field.random(rng, d), com) for i in range(n) if i not in included}
            filler = dict(sorted(filler.items())[: n - f - len(included)])
            captured = len(filler)
        elif strategy == "tamper":
            filler = None
            included = tuple(i for i in included if i not in victims)
            filler = {v: _chunk_bytes(mutate(originals[v]), com) for v in victims}
        disp = leader.disperse(included, filler)

    reasons, agreement = {}, None
    for m in disp:
        p = m.recipient
        down[p] += len(m.encode(com))
        if p in bad:
            # malicious replicas sign whatever the leader asks
            c = (com.pcs.final_commit_of(list(m.commitments)) if protocol == "card7"
                 else su.digest(m.commitment, m.included) if protocol == "quarter" else m.digest)
            appr = Approval(view, p, c, com.keys.ms_sign(p, approval_msg(c, view)))
        else:
            appr, why = reps[p].verify_dispersal(m)
            if why:
                reasons[why] = reasons.get(why, 0) + 1
        if appr is not None:
            agreement = leader.on_approval(appr) or agreement
    approvals = sum(len(v) for v in leader.approvals.values())
    complete = False
    if agreement is not None:
        size = len(agreement.encode(com))
        for p in range(1, n):
            down[p] += size
        complete = all(reps[i].on_agreement(agreement) for i in honest)

    decoded = None
    if complete:
        fc = agreement.final_c
        if protocol == "card7":
            src = next(reps[i] for i in honest if fc in reps[i].db)
            res = retrieve_chunk(com, src.db[fc]["commitments"], -1,
                                 lambda r, c: reps[r].serve_chunks(c) if r not in bad else None, rng)
            decoded = res.columns
        elif protocol == "quarter":
            # colluding replicas serve their chunks so a captured block stays retrievable
            word = leader.codeword

            def query(r, c):
                if r not in bad:
                    return reps[r].serve_chunks(c)
                return {i: word[su.chunk_range(i).start:su.chunk_range(i).stop] for i in (r, r + n, r + 2 * n)}
            decoded = quarter_retrieve(su, None, query, [int(r) for r in rng.permutation(n)], fc)
        else:
            src = next(reps[i] for i in honest if fc in reps[i].db)
            decoded = {}
            for r, raw in src.db[fc]:
                w = com.field.element_wire_bytes
                decoded[r] = np.array([int.from_bytes(raw[w * j:w * (j + 1)], "big") for j in range(d)])
    untampered = 0
    if decoded is not None:
        untampered = sum(1 for i in honest if i in decoded and np.array_equal(decoded[i], originals[i]))
    return DAResult(protocol, n, f, complete, approvals, reasons, down, d * com.field.element_wire_bytes,
                    included, originals, decoded, untampered, captured, frozenset(bad))
