"""Byzantine strategies.  One strategy object drives all malicious ids of a run.

Hooks called by ``consensus.Node`` when the node is malicious:

* ``filter_txs(node, txs)``   mini-block content
* ``silent(node)``            send nothing at all
* ``leader_plan(node, role, v)``  -> ``Plan`` or None (not yet / never)
* ``withhold_agreement(node, v)``
* ``votes_twice(node)``

and by the network: ``delay(src, dst, sim)`` for honest traffic (None = default law).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .card7 import Dispersal, parse_column

STRATEGIES = ("HonestAll", "CensorTx", "CensorReplicas", "TamperColumn", "StallAgreement",
              "Equivocate", "SilentReplicas", "SlowHonest")


@dataclass
class Plan:
    dispersals: list
    matrices: dict            # final_c -> d x 3n matrix actually encoded


def honest_plan(node, role, included=None) -> Plan:
    da = role.da
    disp = da.disperse(included)
    return Plan(disp, {da.final_c: da.matrix})


class Strategy:
    name = "HonestAll"

    def __init__(self, sim, params: Optional[dict] = None):
        self.sim = sim
        self.params = dict(params or {})

    def filter_txs(self, node, txs):
        return txs

    def silent(self, node) -> bool:
        return False

    def leader_plan(self, node, role, v) -> Optional[Plan]:
        return honest_plan(node, role)

    def withhold_agreement(self, node, v) -> bool:
        return False

    def votes_twice(self, node) -> bool:
        return False

    def delay(self, src, dst, sim) -> Optional[float]:
        return None

    # helpers for leaders that want more than a bare quorum
    def wait_or_deadline(self, node, role, v, enough: bool) -> bool:
        """True when the leader should act now; otherwise a retry timer is armed."""
        if enough:
            return True
        deadline = role.da.quorum_at + 3 * node.delta
        if node.net.now >= deadline - 1e-12:
            return True
        node.net.timer(node, deadline - node.net.now, lambda _v: node.try_propose(_v), v)
        return False


class HonestAll(Strategy):
    pass


class CensorTx(Strategy):
    """Malicious replicas drop the target txs; a malicious leader excludes every column holding one."""

    name = "CensorTx"

    def targets(self):
        t = self.params.get("targets")
        return set(t) if t is not None else {tg.tx for tg in self.sim.targets}

    def filter_txs(self, node, txs):
        bad = self.targets()
        return [t for t in txs if t not in bad]

    def holds(self, node, col) -> bool:
        info = parse_column(col.block.column, node.com)
        return info is not None and any(t in self.targets() for t in info["txs"])

    def leader_plan(self, node, role, v):
        cols = role.da.collections
        clean = [i for i in sorted(cols) if not self.holds(node, cols[i])]
        q = node.com.quorum
        if not self.wait_or_deadline(node, role, v, len(clean) >= q):
            return None
        dirty = [i for i in sorted(cols) if i not in clean]
        return honest_plan(node, role, clean + dirty[:max(0, q - len(clean))])


class CensorReplicas(Strategy):
    name = "CensorReplicas"

    def victims(self, node):
        vs = self.params.get("victims")
        f = node.com.f
        return set(vs) if vs is not None else set(range(f, 2 * f))

    def leader_plan(self, node, role, v):
        cols = role.da.collections
        victims = self.victims(node)
        keep = [i for i in sorted(cols) if i not in victims]
        q = node.com.quorum
        if not self.wait_or_deadline(node, role, v, len(keep) >= q):
            return None
        rest = [i for i in sorted(cols) if i in victims]
        return honest_plan(node, role, keep + rest[:max(0, q - len(keep))])


class TamperColumn(Strategy):
    """Leader mutates one cell of a victim column.

    mode ``data``: data changed, commitment kept; ``commit``: data and
    commitment changed; ``partial``: honest encoding but the victim's own
    parity chunks are corrupted.
    """

    name = "TamperColumn"

    def leader_plan(self, node, role, v):
        com, da = node.com, role.da
        mode = self.params.get("mode", "data")
        victim = self.params.get("victim")
        row = int(self.params.get("row", 0))
        cols = da.collections
        if victim is None or victim not in cols:
            honest_ids = [i for i in sorted(cols) if i not in self.sim.malicious]
            victim = honest_ids[0] if honest_ids else min(cols)
        if mode == "partial":
            plan = honest_plan(node, role)
            n = com.n
            for d in plan.dispersals:
                if d.recipient == victim:
                    bad = d.chunks[victim + n].copy()
                    bad[row] = (int(bad[row]) + 1) % com.field.p
                    d.chunks = {victim + n: bad, victim + 2 * n: d.chunks[victim + 2 * n]}
            return plan
        col = cols[victim].block.column.copy()
        col[row] = (int(col[row]) + 1) % com.field.p
        comms, atts, matrix = da.build(columns={victim: col})
        if mode == "commit":
            comms = list(comms)
            comms[victim] = com.pcs.commit(col)
            comms = tuple(comms)
        da.dispersed = True
        da.matrix = matrix
        fc = com.pcs.final_commit_of(list(comms))
        da.final_c = fc
        return Plan(da.bundles(comms, atts, matrix), {fc: matrix})


class StallAgreement(Strategy):
    name = "StallAgreement"

    def withhold_agreement(self, node, v):
        return True


class Equivocate(Strategy):
    """Two proposals with different inclusion sets; honest ids split by parity, malicious get both."""

    name = "Equivocate"

    def votes_twice(self, node):
        return True

    def leader_plan(self, node, role, v):
        com, da = node.com, role.da
        cols = sorted(da.collections)
        q = com.quorum
        if not self.wait_or_deadline(node, role, v, len(cols) > q):
            return None
        sets = [cols[:q], cols[-q:]]
        out, mats = [], {}
        bundles = []
        for inc in sets:
            comms, atts, matrix = da.build(inc)
            fc = com.pcs.final_commit_of(list(comms))
            mats[fc] = matrix
            bundles.append(da.bundles(comms, atts, matrix))
        da.dispersed = True
        for p in range(com.n):
            if p in self.sim.malicious:
                out += [bundles[0][p], bundles[1][p]]
            else:
                out.append(bundles[p % 2][p])
        return Plan(out, mats)


class SilentReplicas(Strategy):
    name = "SilentReplicas"

    def silent(self, node):
        return True


class SlowHonest(Strategy):
    """Malicious ids behave; the adversary stretches honest delays (``dist``: max | uniform | tail)."""

    name = "SlowHonest"

    def delay(self, src, dst, sim):
        dist = self.params.get("dist", "max")
        D = sim.cfg.delta
        if dist == "max":
            return D
        if dist == "tail":
            return D * (1.0 - 0.5 * sim.rng.random())
        return None


REGISTRY = {c.__name__: c for c in (HonestAll, CensorTx, CensorReplicas, TamperColumn, StallAgreement,
                                    Equivocate, SilentReplicas, SlowHonest)}


def make_strategy(name: str, sim, params=None) -> Strategy:
    try:
        return REGISTRY[name](sim, params)
    except KeyError:
        raise ValueError(f"unknown adversary strategy {name!r}; choose from {', '.join(STRATEGIES)}") from None
