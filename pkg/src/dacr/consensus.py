"""Two-phase HotStuff replica with the dispersal protocol fused into its message flow.

Message pairing per view ``v`` (leader ``L_v``):

    Propose  + Dispersal   L_v -> all
    Vote     + Approval    all -> L_v
    Prepare  + Agreement   L_v -> all
    Vote2    + Collection(v+1)   all -> L_{v+1}

A replica locks on a prepare certificate only after ``verify_card`` holds
for the block's final commitment, and ``L_{v+1}`` commits the block once it
holds n-f second-phase votes (a double certificate), which it forwards in
its own proposal.

The node talks to the outside world through ``net`` (see ``simnet.Network``):
``net.now``, ``net.send``, ``net.broadcast``, ``net.timer`` and the
observation hooks ``net.on_commit`` / ``net.block_txs``.
"""
from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

from .card7 import (Agreement, Approval, Card7Leader, Card7Replica, Collection, Committee,
                    Dispersal, Phase, approval_msg)
from .sigs import CombinedSignature, PartialSig
from .adversary import honest_plan


@dataclass(frozen=True, eq=False)
class Block:
    height: int
    view: int
    parent: bytes
    final_c: bytes
    included: int      # bitmap of attested columns
    proposer: int

    def encode(self) -> bytes:
        return struct.pack(">QQ", self.height, self.view) + self.parent + self.final_c \
            + self.included.to_bytes(16, "big") + struct.pack(">i", self.proposer)

    @cached_property
    def id(self) -> bytes:
        return hashlib.sha256(b"dacr/block" + self.encode()).digest()


GENESIS = Block(0, 0, bytes(32), bytes(32), 0, -1)


def vote_msg(phase: int, block_id: bytes, view: int) -> bytes:
    return b"dacr/vote" + bytes([phase]) + block_id + struct.pack(">Q", view)


@dataclass(frozen=True, eq=False)
class Certificate:
    block: Block
    view: int
    phase: int
    combined: CombinedSignature

    @property
    def rank(self):
        return (self.view, self.block.height)

    def encode(self) -> bytes:
        return self.block.encode() + struct.pack(">QB", self.view, self.phase) + self.combined.to_bytes()


def _rank(cert: Optional[Certificate]):
    return (0, 0) if cert is None else cert.rank


# -- messages -----------------------------------------------------------------
# every message reports (dispersal bytes, consensus bytes)

@dataclass(eq=False)
class Propose:
    view: int
    sender: int
    block: Block
    justify: Optional[Certificate]
    justify_da: Optional[Agreement]
    double: Optional[Certificate]
    chain: tuple
    dispersal: Dispersal
    hop: int = 1
    kind = "Propose"

    def sizes(self, com):
        cons = self.block.encode() + b"".join(b.encode() for b in self.chain)
        for c in (self.justify, self.double):
            cons += c.encode() if c else b""
        if self.justify_da:
            cons += self.justify_da.encode(com)
        return len(self.dispersal.encode(com)), len(cons) + 12


@dataclass(eq=False)
class Vote:
    view: int
    sender: int
    block_id: bytes
    partial: PartialSig
    approval: Optional[Approval]
    hop: int = 2
    kind = "Vote"

    def sizes(self, com):
        return (len(self.approval.encode(com)) if self.approval else 0), 12 + 32 + len(self.partial.sig)


@dataclass(eq=False)
class Prepare:
    view: int
    sender: int
    cert: Certificate
    agreement: Agreement
    hop: int = 3
    kind = "Prepare"

    def sizes(self, com):
        return len(self.agreement.encode(com)), 12 + len(self.cert.encode())


@dataclass(eq=False)
class Vote2:
    view: int
    sender: int
    block_id: bytes
    partial: PartialSig
    collection: Optional[Collection]
    hop: int = 4
    kind = "Vote2"

    def sizes(self, com):
        return (len(self.collection.encode(com)) if self.collection else 0), 12 + 32 + len(self.partial.sig)


@dataclass(eq=False)
class NewView:
    view: int
    sender: int
    lock: Optional[Certificate]
    lock_da: Optional[Agreement]
    collection: Optional[Collection]
    kind = "NewView"

    def sizes(self, com):
        cons = 12 + (len(self.lock.encode()) if self.lock else 0) + (len(self.lock_da.encode(com)) if self.lock_da else 0)
        return (len(self.collection.encode(com)) if self.collection else 0), cons


@dataclass(eq=False)
class ClientTx:
    view: int
    sender: int
    tx: bytes
    kind = "ClientTx"

    def sizes(self, com):
        return 0, 12 + len(self.tx)


@dataclass(eq=False)
class Ack:
    view: int
    sender: int
    tx: bytes
    accepted: bool
    kind = "Ack"

    def sizes(self, com):
        return 0, 13 + 32


@dataclass(eq=False)
class Ping:
    view: int
    sender: int
    kind = "Ping"

    def sizes(self, com):
        return 0, 12


@dataclass(eq=False)
class Pong:
    view: int                 # next view this replica will signal
    sender: int
    time_to_signal: float
    kind = "Pong"

    def sizes(self, com):
        return 0, 20


# -- leader role ------------------------------------------------------------------

@dataclass
class LeaderRole:
    da: Card7Leader
    entered_at: Optional[float] = None
    slow: bool = False
    vote2s: dict = field(default_factory=dict)      # block id -> {signer: partial}
    vote2_hop: dict = field(default_factory=dict)
    double: Optional[Certificate] = None
    double_hop: int = 0
    locks: list = field(default_factory=list)       # (cert, agreement)
    proposed: Optional[Block] = None
    votes: dict = field(default_factory=dict)       # block id -> {signer: partial}
    vote_hop: int = 0
    prepared: bool = False


class Node:
    """One replica: consensus state, dispersal replica, leader roles and mempool."""

    def __init__(self, rid: int, com: Committee, net, delta: float, view_timeout: float,
                 reach_proc_time: float = 0.0, adversary=None):
        self.rid, self.com, self.net = rid, com, net
        self.delta, self.base_timeout = delta, view_timeout
        self.reach_proc_time = reach_proc_time
        self.adv = adversary              # None for honest replicas
        self.da = Card7Replica(rid, com)
        self.view = 0
        self.lock: Optional[Certificate] = None
        self.lock_da: Optional[Agreement] = None
        self.blocks = {GENESIS.id: GENESIS}
        self.committed = {GENESIS.id}
        self.commit_height = 0
        self.commit_log: list[Block] = []
        self.voted: set = set()
        self.voted2: set = set()
        self.locks_seen: list = []
        self.pending: dict = {}           # tx -> None, insertion ordered
        self.roles: dict[int, LeaderRole] = {}
        self.timeouts_in_row = 0
        self.view_deadline = 0.0
        self.signals = 0
        self.entered: dict[int, float] = {}

    # helpers --------------------------------------------------------------
    @property
    def malicious(self) -> bool:
        return self.adv is not None

    def leader(self, view: int) -> int:
        return self.com.leader(view)

    def role(self, view: int) -> LeaderRole:
        if view not in self.roles:
            self.roles[view] = LeaderRole(Card7Leader(self.rid, self.com, view, self.reach_proc_time))
        return self.roles[view]

    def cert_ok(self, cert: Certificate) -> bool:
        return self.com.keys.ms_verify(cert.combined, vote_msg(cert.phase, cert.block.id, cert.view))

    def da_ok(self, block: Block, agr: Optional[Agreement]) -> bool:
        if block is GENESIS or block.id == GENESIS.id:
            return True
        return (agr is not None and agr.final_c == block.final_c and agr.view == block.view
                and self.com.keys.ms_verify(agr.combined, approval_msg(block.final_c, block.view)))

    # mempool / signal ---------------------------------------------------------
    def add_tx(self, tx: bytes):
        self.pending.setdefault(tx, None)

    def signal(self, view: int) -> Optional[Collection]:
        if view <= self.da.last_signal:
            return None
        txs = list(self.pending)
        if self.adv:
            txs = self.adv.filter_txs(self, txs)
        col, _ = self.da.on_signal(view, txs)
        self.signals += 1
        self.net.on_signal(self, view, col)
        if self.adv and self.adv.silent(self):
            return None
        return col

    # view changes -------------------------------------------------------------
    def enter_view(self, v: int, via: str, collection: Optional[Collection] = None):
        if v <= self.view:
            return
        for w in range(max(1, self.view), v):
            self.da.on_timeout(w)
        self.view = v
        self.entered[v] = self.net.now
        timeout = self.base_timeout * 2 ** min(self.timeouts_in_row, 6)
        self.view_deadline = self.net.now + timeout
        self.net.timer(self, timeout, self.on_view_timer, v)
        if collection is None:
            collection = self.signal(v)
        if via == "timeout" or via == "start":
            if not (self.adv and self.adv.silent(self)):
                self.net.send(self, self.leader(v), NewView(v, self.rid, self.lock, self.lock_da, collection))
        if self.leader(v) == self.rid:
            r = self.role(v)
            r.entered_at = self.net.now
            r.slow = via != "vote2" and v > 1
            if v > 1:
                # slow path wait, and the fast path's fallback when no double certificate shows up
                self.net.timer(self, 3 * self.delta, lambda _v: self.try_propose(_v), v)
            self.try_propose(v)

    def on_view_timer(self, v: int):
        if v != self.view:
            return
        self.timeouts_in_row += 1
        self.enter_view(v + 1, "timeout")

    # leader side ------------------------------------------------------------------
    def try_propose(self, v: int):
        r = self.roles.get(v)
        if r is None or r.proposed is not None or self.view != v or r.entered_at is None:
            return
        if self.adv and self.adv.silent(self):
            return
        now = self.net.now
        if r.double is None and v > 1 and now < r.entered_at + 3 * self.delta - 1e-12:
            return
        if not r.da.ready(now):
            if r.da.quorum_at is not None:
                self.net.timer(self, max(0.0, r.da.quorum_at + r.da.reach_proc_time - now),
                               lambda _v: self.try_propose(_v), v)
            return
        justify, jda = self.choose_parent(r)
        parent = justify.block if justify else GENESIS
        if self.adv:
            plan = self.adv.leader_plan(self, r, v)
            if plan is None:
                return          # adversary keeps waiting (or stalls for good)
        else:
            plan = honest_plan(self, r)
        chain = self.chain_above_commit(parent)
        sent_blocks = {}
        finals = {}
        for d in plan.dispersals:
            fc = finals.get(id(d.commitments))
            if fc is None:
                fc = finals[id(d.commitments)] = self._final_of(d)
            blk = sent_blocks.get(fc)
            if blk is None:
                inc = 0
                for a in d.attestations:
                    inc |= 1 << a.replica
                blk = sent_blocks[fc] = Block(parent.height + 1, v, parent.id, fc, inc, self.rid)
                self.blocks[blk.id] = blk
            r.proposed = blk
            dbl = r.double if (r.double and justify and r.double.block.id == justify.block.id) else None
            self.net.send(self, d.recipient, Propose(v, self.rid, blk, justify, jda, dbl, chain, d))
        self.net.on_propose(self, v, sent_blocks, plan.matrices)

    def _final_of(self, d: Dispersal) -> bytes:
        pcs = self.com.pcs
        return pcs.final_commit_of(d.commitments)

    def choose_parent(self, r: LeaderRole):
        if r.double is not None:
            blk = r.double.block
            agr = self._agreement_for(blk)
            if agr is not None:
                return r.double, agr
        cands = [(self.lock, self.lock_da)] + r.locks
        cands = [(c, a) for c, a in cands if c is not None and self.da_ok(c.block, a)]
        if not cands:
            return None, None
        return max(cands, key=lambda ca: ca[0].rank)

    def _agreement_for(self, blk: Block) -> Optional[Agreement]:
        cs = self.da.agg_sigs.get((blk.final_c, blk.view))
        if cs is not None:
            return Agreement(blk.view, self.leader(blk.view), blk.final_c, cs)
        if self.lock_da is not None and self.lock_da.final_c == blk.final_c:
            return self.lock_da
        return None

    def chain_above_commit(self, blk: Block, limit: int = 8) -> tuple:
        out = []
        while blk.id not in self.committed and len(out) < limit:
            out.append(blk)
            blk = self.blocks.get(blk.parent)
            if blk is None:
                break
        return tuple(out)

    def on_vote(self, msg: Vote):
        r = self.roles.get(msg.view)
        if r is None or r.proposed is None or self.leader(msg.view) != self.rid:
            return
        keys = self.com.keys
        if msg.partial.signer != msg.sender or msg.partial.message != vote_msg(1, msg.block_id, msg.view):
            return
        if not keys.ms_verify_partial(msg.partial):
            return
        if msg.approval is not None and msg.approval.sender == msg.sender:
            r.da.on_approval(msg.approval)
        r.votes.setdefault(msg.block_id, {})[msg.sender] = msg.partial
        r.vote_hop = max(r.vote_hop, msg.hop)
        self.maybe_prepare(msg.view, msg.block_id)

    def maybe_prepare(self, v: int, block_id: bytes):
        r = self.roles[v]
        votes = r.votes.get(block_id, {})
        agr = r.da.agreement
        if r.prepared or len(votes) < self.com.quorum or agr is None:
            return
        blk = self.blocks.get(block_id)
        if blk is None or blk.final_c != agr.final_c:
            return
        if self.adv and self.adv.withhold_agreement(self, v):
            return
        r.prepared = True
        cert = Certificate(blk, v, 1, self.com.keys.ms_agg(votes.values()))
        self.net.broadcast(self, Prepare(v, self.rid, cert, agr, hop=r.vote_hop + 1))

    def on_vote2(self, msg: Vote2):
        nxt = msg.view + 1
        if self.leader(nxt) != self.rid:
            return
        r = self.role(nxt)
        if msg.collection is not None and msg.collection.sender == msg.sender:
            r.da.collect(msg.collection, self.net.now)
        if msg.partial.signer != msg.sender or msg.partial.message != vote_msg(2, msg.block_id, msg.view):
            return
        if not self.com.keys.ms_verify_partial(msg.partial):
            return
        bucket = r.vote2s.setdefault(msg.block_id, {})
        bucket[msg.sender] = msg.partial
        r.vote2_hop[msg.block_id] = max(r.vote2_hop.get(msg.block_id, 0), msg.hop)
        if r.double is None and len(bucket) >= self.com.quorum and msg.block_id in self.blocks:
            blk = self.blocks[msg.block_id]
            r.double = Certificate(blk, msg.view, 2, self.com.keys.ms_agg(bucket.values()))
            r.double_hop = r.vote2_hop[msg.block_id]
            self.net.on_double_cert(self, r.double, r.double_hop)
            self.commit(blk)
        self.try_propose(nxt)

    def on_newview(self, msg: NewView):
        if self.leader(msg.view) != self.rid or msg.view < self.view:
            return
        r = self.role(msg.view)
        if msg.collection is not None and msg.collection.sender == msg.sender:
            r.da.collect(msg.collection, self.net.now)
        if msg.lock is not None and self.cert_ok(msg.lock) and self.da_ok(msg.lock.block, msg.lock_da):
            self.blocks.setdefault(msg.lock.block.id, msg.lock.block)
            r.locks.append((msg.lock, msg.lock_da))
        self.try_propose(msg.view)

    def on_collection(self, msg: Collection):
        r = self.role(msg.view)
        if msg.sender == msg.block.replica:
            r.da.collect(msg, self.net.now)
        self.try_propose(msg.view)

    # replica side -----------------------------------------------------------------
    def on_propose(self, msg: Propose):
        v = msg.view
        if v < self.view or msg.sender != self.leader(v):
            return
        for b in msg.chain:
            self.blocks.setdefault(b.id, b)
        j = msg.justify
        if j is not None:
            if not self.cert_ok(j):
                return
            self.blocks.setdefault(j.block.id, j.block)
        if msg.justify_da is not None and j is not None and msg.justify_da.final_c == j.block.final_c:
            self.da.on_agreement(msg.justify_da)     # may overtake the Prepare that carried it
        if msg.double is not None and self.cert_ok(msg.double) and msg.double.phase == 2:
            self.blocks.setdefault(msg.double.block.id, msg.double.block)
            self.commit(msg.double.block)
        if v > self.view:
            self.enter_view(v, "propose")
        if v in self.voted and not (self.adv and self.adv.votes_twice(self)):
            return
        parent = j.block if j is not None else GENESIS
        blk = msg.block
        if blk.view != v or blk.parent != parent.id or blk.height != parent.height + 1:
            return
        if not self.da_ok(parent, msg.justify_da):
            return      # never extend a block without its combined signature
        if _rank(j) < _rank(self.lock):
            return
        approval, reason = self.da.verify_dispersal(msg.dispersal)
        self.net.on_dispersal_checked(self, v, reason)
        if approval is None or approval.final_c != blk.final_c:
            return
        inc = 0
        for a in msg.dispersal.attestations:
            inc |= 1 << a.replica
        if inc != blk.included:
            return
        self.blocks[blk.id] = blk
        self.voted.add(v)
        if self.adv and self.adv.silent(self):
            return
        part = self.com.keys.ms_sign(self.rid, vote_msg(1, blk.id, v))
        self.net.send(self, msg.sender, Vote(v, self.rid, blk.id, part, approval, hop=msg.hop + 1))

    def on_prepare(self, msg: Prepare):
        v = msg.view
        cert = msg.cert
        if v < self.view or msg.sender != self.leader(v) or cert.view != v or cert.phase != 1:
            return
        if v in self.voted2 or not self.cert_ok(cert):
            return
        self.da.on_agreement(msg.agreement)
        blk = cert.block
        if msg.agreement.final_c != blk.final_c or not self.da.verify_card(blk.final_c, v):
            return
        self.blocks.setdefault(blk.id, blk)
        if v > self.view:
            self.enter_view(v, "propose")
        if cert.rank > _rank(self.lock):
            self.net.check_lock(self, self.lock, cert)
            self.lock, self.lock_da = cert, msg.agreement
        self.voted2.add(v)
        self.timeouts_in_row = 0
        if self.adv and self.adv.silent(self):
            self.enter_view(v + 1, "vote2")
            return
        col = self.signal(v + 1)
        part = self.com.keys.ms_sign(self.rid, vote_msg(2, blk.id, v))
        self.net.send(self, self.leader(v + 1), Vote2(v, self.rid, blk.id, part, col, hop=msg.hop + 1))
        self.enter_view(v + 1, "vote2", collection=col)

    def commit(self, blk: Block):
        path = []
        cur = blk
        while cur is not None and cur.id not in self.committed:
            path.append(cur)
            cur = self.blocks.get(cur.parent)
        if cur is None:
            return      # missing ancestor; wait for a later certificate
        for b in reversed(path):
            self.committed.add(b.id)
            self.commit_log.append(b)
            self.commit_height = b.height
            for tx in self.net.block_txs(b):
                self.pending.pop(tx, None)
            self.net.on_commit(self, b)

    # client interface -------------------------------------------------------------
    def on_client_tx(self, msg: ClientTx):
        # a late tx is not dropped: it rides in the next mini-block, and the ack names that view
        self.add_tx(msg.tx)
        if not (self.adv and self.adv.silent(self)):
            nxt = max(msg.view, self.da.last_signal + 1)
            self.net.send(self, msg.sender, Ack(nxt, self.rid, msg.tx, True))

    def on_ping(self, msg: Ping):
        if self.adv and self.adv.silent(self):
            return
        nxt = self.da.last_signal + 1
        self.net.send(self, msg.sender, Pong(nxt, self.rid, max(0.0, self.view_deadline - self.net.now)))

    HANDLERS = {
        "Propose": "on_propose", "Vote": "on_vote", "Prepare": "on_prepare", "Vote2": "on_vote2",
        "NewView": "on_newview", "Collection": "on_collection", "ClientTx": "on_client_tx", "Ping": "on_ping",
    }

    def receive(self, msg):
        name = self.HANDLERS.get(msg.kind)
        if name:
            getattr(self, name)(msg)
