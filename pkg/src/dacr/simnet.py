"""Deterministic discrete-event simulator for the fused dispersal + consensus protocol.

One ``Simulation`` owns the event queue, the network, every replica and
an optional client.  All randomness comes from one ``numpy`` generator
seeded by the scenario, so (config, seed) fixes the trace byte for byte.
"""
from __future__ import annotations

import dataclasses
import heapq
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import navigator
from .adversary import STRATEGIES, make_strategy
from .card7 import NULL_TX, Committee, Phase, RetrievalExhausted, parse_column, retrieve_chunk
from .coding import F257, F65537, BN254_FR, DecodeFailure
from .commitment import KZGPCS, TransparentPCS
from .consensus import Ack, ClientTx, Node, Ping, Pong
from .sigs import BlsScheme, HmacScheme

FIELDS = {"F257": F257, "F65537": F65537, "BN254": BN254_FR}


class ConfigError(ValueError):
    pass


class InvariantViolation(RuntimeError):
    pass


# -- configuration -------------------------------------------------------------

@dataclass
class AdversaryConfig:
    strategy: str = "HonestAll"
    malicious: Optional[list] = None     # default: ids 0..f-1 (they lead views 1..f)
    params: dict = field(default_factory=dict)


@dataclass
class WorkloadConfig:
    txs: int = 1
    copies: Optional[int] = None         # default n - t + 1 with t = n - 2f
    mode: str = "preload"                # preload | client
    tx_bytes: int = 8
    client_start: float = 0.0


@dataclass
class ScenarioConfig:
    protocol: str = "card7"
    n: int = 4
    f: int = 1
    delta: float = 1.0
    gst: float = 0.0
    pre_gst_cap: float = 5.0
    view_timeout: Optional[float] = None   # default 8 delta
    reach_proc_time: float = 0.0
    d: int = 16
    field: str = "F65537"
    pcs: str = "transparent"
    scheme: str = "hmac"
    latency: str = "uniform"               # uniform | fixed
    rushing: bool = True
    adversary: AdversaryConfig = dataclasses.field(default_factory=AdversaryConfig)
    workload: WorkloadConfig = dataclasses.field(default_factory=WorkloadConfig)
    seed: int = 0
    stop: str = "target-commit"            # target-commit | views
    max_views: int = 40
    max_time: Optional[float] = None
    trace: bool = True

    @property
    def t(self) -> int:
        return self.n - 2 * self.f

    @property
    def copies(self) -> int:
        return self.workload.copies if self.workload.copies is not None else self.n - self.t + 1

    @property
    def timeout(self) -> float:
        return self.view_timeout if self.view_timeout is not None else 8 * self.delta

    @property
    def malicious(self) -> list:
        if self.adversary.strategy == "HonestAll":
            return []
        m = self.adversary.malicious
        return sorted(range(self.f) if m is None else m)

    def validate(self) -> "ScenarioConfig":
        n, f = self.n, self.f
        if self.protocol not in ("card7", "quarter", "vanilla"):
            raise ConfigError(f"protocol: unknown value {self.protocol!r}")
        need = 4 * f + 1 if self.protocol == "quarter" else 3 * f + 1
        if f < 0 or n < need:
            raise ConfigError(f"n: need n >= {need} for protocol {self.protocol} with f={f}, got n={n}")
        if self.delta <= 0 or self.gst < 0 or self.pre_gst_cap <= 0:
            raise ConfigError("delta and pre_gst_cap must be positive, gst non-negative")
        if self.field not in FIELDS:
            raise ConfigError(f"field: choose one of {sorted(FIELDS)}")
        if self.pcs not in ("transparent", "kzg") or self.scheme not in ("hmac", "bls"):
            raise ConfigError("pcs must be transparent|kzg and scheme hmac|bls")
        if self.pcs == "kzg" and self.field != "BN254":
            raise ConfigError("pcs kzg requires field BN254")
        if self.adversary.strategy not in STRATEGIES:
            raise ConfigError(f"adversary.strategy: choose one of {', '.join(STRATEGIES)}")
        bad = [i for i in self.malicious if not 0 <= i < n]
        if bad or len(self.malicious) > f:
            raise ConfigError(f"adversary.malicious: at most f={f} ids in [0, {n})")
        if not 0 <= self.copies <= n:
            raise ConfigError(f"workload.copies: must lie in [0, {n}]")
        if self.workload.mode not in ("preload", "client"):
            raise ConfigError("workload.mode: preload | client")
        if self.latency not in ("uniform", "fixed"):
            raise ConfigError("latency: uniform | fixed")
        if self.stop not in ("target-commit", "views"):
            raise ConfigError("stop: target-commit | views")
        if self.d < 1 or self.workload.tx_bytes < 1:
            raise ConfigError("d and workload.tx_bytes must be positive")
        cap = self.d * FIELDS[self.field].bytes_per_element
        if 12 + 2 + self.workload.tx_bytes > cap:
            raise ConfigError(f"workload.tx_bytes: a {self.workload.tx_bytes}-byte tx does not fit a {cap}-byte column")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "ScenarioConfig":
        raw = dict(raw)
        nested = {"adversary": AdversaryConfig, "workload": WorkloadConfig}
        kwargs = {}
        names = {f.name for f in dataclasses.fields(cls)}
        for k, v in raw.items():
            if k not in names:
                raise ConfigError(f"unknown key {k!r}")
            if k in nested:
                if not isinstance(v, dict):
                    raise ConfigError(f"{k}: expected an object")
                sub = {f.name for f in dataclasses.fields(nested[k])}
                extra = set(v) - sub
                if extra:
                    raise ConfigError(f"{k}: unknown key(s) {sorted(extra)}")
                v = nested[k](**v)
            kwargs[k] = v
        return cls(**kwargs).validate()

    @classmethod
    def from_json(cls, text: str) -> "ScenarioConfig":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"line {e.lineno}, column {e.colno}: {e.msg}") from None
        if not isinstance(raw, dict):
            raise ConfigError("line 1: top level must be an object")
        try:
            return cls.from_dict(raw)
        except TypeError as e:
            raise ConfigError(str(e)) from None


# -- workload --------------------------------------------------------------------

@dataclass
class Target:
    tx: bytes
    holders: tuple
    v_target: int
    acks: int = 0
    ack_views: list = field(default_factory=list)
    failed: Optional[int] = None      # |S_v| when the client could not submit


class ClientActor:
    """Navigator client: sync round (ping/pong), then multicast to x available replicas."""

    def __init__(self, sim, rid: int):
        self.sim, self.rid = sim, rid
        self.view = 0
        self.avail = navigator.AvailabilityView()
        self.sync_started = 0.0
        self.pong_views = {}

    def start(self):
        self.sync_started = self.sim.now
        for r in range(self.sim.cfg.n):
            self.sim.send(self, r, Ping(0, self.rid))
        self.sim.timer(self, 2 * self.sim.cfg.delta, self.submit, None)

    def submit(self, _):
        sim, cfg = self.sim, self.sim.cfg
        view = max(self.pong_views.values(), default=1)
        for tg in sim.targets:
            try:
                plan = navigator.plan_broadcast(self.avail, cfg.copies, view, sim.now, sim.rng)
            except navigator.SubmitFailed as e:
                tg.failed = e.available
                continue
            tg.holders = plan.targets
            tg.v_target = view
            for r in plan.targets:
                sim.send(self, r, ClientTx(view, self.rid, tg.tx))
            self.sent_at = sim.now

    def receive(self, msg):
        sim = self.sim
        if isinstance(msg, Pong):
            if sim.now - self.sync_started <= 2 * sim.cfg.delta:
                self.avail.record(msg.sender, self.sync_started, sim.cfg.delta, msg.time_to_signal)
                self.pong_views[msg.sender] = msg.view
        elif isinstance(msg, Ack) and sim.now - getattr(self, "sent_at", -math.inf) <= 2 * sim.cfg.delta:
            for tg in sim.targets:
                if tg.tx == msg.tx:
                    tg.acks += 1
                    if msg.accepted:
                        tg.ack_views.append(msg.view)


# -- simulation ------------------------------------------------------------------

def build_committee(cfg: ScenarioConfig) -> Committee:
    fld = FIELDS[cfg.field]
    pcs = KZGPCS(d=cfg.d, seed=cfg.seed) if cfg.pcs == "kzg" else TransparentPCS(fld, cfg.d)
    scheme = BlsScheme() if cfg.scheme == "bls" else HmacScheme()
    return Committee.make(cfg.n, cfg.f, pcs=pcs, seed=cfg.seed, scheme=scheme)


class Simulation:
    def __init__(self, cfg: ScenarioConfig):
        cfg.validate()
        if cfg.protocol != "card7":
            raise ConfigError("the consensus simulation runs card7; use variants.run_da for quarter/vanilla")
        self.cfg = cfg
        self.rng = np.random.default_rng(cfg.seed)
        self.com = build_committee(cfg)
        self.malicious = set(cfg.malicious)
        self.adv = make_strategy(cfg.adversary.strategy, self, cfg.adversary.params)
        self.nodes = [Node(i, self.com, self, cfg.delta, cfg.timeout, cfg.reach_proc_time,
                           adversary=self.adv if i in self.malicious else None) for i in range(cfg.n)]
        self.client = ClientActor(self, cfg.n) if cfg.workload.mode == "client" else None
        self.now = 0.0
        self._q: list = []
        self._seq = 0
        self.trace: list = []
        n = cfg.n
        self.bytes = {k: [0] * (n + 1) for k in ("da_sent", "da_recv", "cons_sent", "cons_recv")}
        self.counts = {"sent": 0, "delivered": 0, "dropped": 0}
        self.violations: list[str] = []
        self.commits_by_height: dict[int, bytes] = {}
        self.payload: dict[bytes, dict] = {}       # final_c -> {column: txs}
        self.matrices: dict[bytes, np.ndarray] = {}
        self.proposals: dict[int, dict] = {}       # view -> {final_c: block}
        self.approvals = {}
        self.reasons = {}
        self.votes_sent = set()
        self.double_steps = {}                     # view of certified block -> hops
        self.signal_count = [0] * n
        self.targets: list[Target] = []
        self._done = False

    # plumbing -----------------------------------------------------------------
    def honest(self, i) -> bool:
        return i not in self.malicious

    def _push(self, t, kind, a, b):
        self._seq += 1
        heapq.heappush(self._q, (t, self._seq, kind, a, b))

    def timer(self, node, delay, fn, arg):
        self._push(self.now + delay, "timer", fn, arg)

    def _delay(self, src: int, dst: int) -> float:
        cfg = self.cfg
        D = cfg.delta
        if src == dst:
            return 0.0
        if src in self.malicious and cfg.rushing:
            return 1e-3 * D
        forced = self.adv.delay(src, dst, self) if src < cfg.n and self.honest(src) else None
        if self.now < cfg.gst:
            d = forced if forced is not None else cfg.pre_gst_cap * (1.0 - self.rng.random())
            return min(d, cfg.gst + D - self.now)
        if forced is not None:
            return min(forced, D)
        if cfg.latency == "fixed":
            return D
        return D * (1.0 - self.rng.random())     # (0, delta]

    def send(self, node, dst: int, msg):
        src = node.rid
        if src < self.cfg.n and self.honest(src) and msg.kind in ("Vote", "Vote2"):
            key = (src, msg.view, msg.kind)
            if key in self.votes_sent:
                self.violate(f"replica {src} voted twice ({msg.kind}) in view {msg.view}")
            self.votes_sent.add(key)
        sz = getattr(msg, "_sizes", None)
        if sz is None:
            sz = msg._sizes = msg.sizes(self.com)
        da, cons = sz
        self.bytes["da_sent"][src] += da
        self.bytes["cons_sent"][src] += cons
        self.counts["sent"] += 1
        t = self.now + self._delay(src, dst)
        if self.cfg.trace:
            self.trace.append((round(self.now, 9), src, dst, msg.kind, da + cons, msg.view, round(t, 9)))
        self._push(t, "msg", dst, msg)

    def broadcast(self, node, msg):
        for dst in range(self.cfg.n):
            self.send(node, dst, msg)

    def violate(self, what: str):
        self.violations.append(what)
        self._done = True

    # node hooks -----------------------------------------------------------------
    def on_signal(self, node, view, col):
        self.signal_count[node.rid] += 1

    def on_propose(self, node, view, blocks, matrices):
        self.proposals.setdefault(view, {}).update(blocks)
        n = self.cfg.n
        for fc, mat in matrices.items():
            self.matrices[fc] = mat
            cols = {}
            for i in range(n):
                info = parse_column(mat[:, i], self.com)
                if info is not None:
                    cols[i] = [t for t in info["txs"] if t != NULL_TX]
            self.payload[fc] = cols

    def on_dispersal_checked(self, node, view, reason):
        if self.honest(node.rid):
            if reason is None:
                self.approvals[view] = self.approvals.get(view, 0) + 1
            else:
                self.reasons[reason] = self.reasons.get(reason, 0) + 1

    def on_double_cert(self, node, cert, hops):
        if self.honest(node.rid):
            self.double_steps.setdefault(cert.view, hops)

    def check_lock(self, node, old, new):
        if old is not None and new.rank <= old.rank:
            self.violate(f"lock of replica {node.rid} regressed")

    def block_txs(self, blk):
        cols = self.payload.get(blk.final_c, {})
        out = []
        for i, txs in sorted(cols.items()):
            if blk.included >> i & 1:
                out += txs
        return out

    def on_commit(self, node, blk):
        if not self.honest(node.rid):
            return
        prev = self.commits_by_height.setdefault(blk.height, blk.id)
        if prev != blk.id:
            self.violate(f"conflicting commits at height {blk.height}")
        if self.cfg.stop == "target-commit" and self.targets:
            have = set()
            for b in node.commit_log:
                have.update(self.block_txs(b))
            if all(tg.tx in have for tg in self.targets if tg.failed is None):
                self._done = True

    # workload ---------------------------------------------------------------------
    def _make_targets(self):
        cfg = self.cfg
        for k in range(cfg.workload.txs):
            body = self.rng.bytes(cfg.workload.tx_bytes)
            tx = bytes([1 + k % 255]) + body[1:]
            holders = ()
            if cfg.workload.mode == "preload":
                holders = tuple(sorted(int(r) for r in self.rng.choice(cfg.n, size=cfg.copies, replace=False)))
                for r in holders:
                    self.nodes[r].add_tx(tx)
            self.targets.append(Target(tx, holders, 1))

    # main loop ---------------------------------------------------------------------
    def run(self) -> "RunResult":
        cfg = self.cfg
        self._make_targets()
        for node in self.nodes:
            node.enter_view(1, "start")
        if self.client is not None:
            self._push(cfg.workload.client_start, "timer", lambda _: self.client.start(), None)
        max_time = cfg.max_time if cfg.max_time is not None else math.inf
        honest_nodes = [nd for nd in self.nodes if self.honest(nd.rid)]
        while self._q and not self._done:
            t, _, kind, a, b = heapq.heappop(self._q)
            if t > max_time:
                heapq.heappush(self._q, (t, 0, kind, a, b))
                break
            self.now = t
            if kind == "timer":
                a(b)
            else:
                self.counts["delivered"] += 1
                da, cons = b._sizes
                self.bytes["da_recv"][a] += da
                self.bytes["cons_recv"][a] += cons
                (self.client if a == cfg.n else self.nodes[a]).receive(b)
            if kind == "timer" and min(nd.view for nd in honest_nodes) > cfg.max_views:
                break
        return self.finish()

    def finish(self) -> "RunResult":
        in_flight = sum(1 for e in self._q if e[2] == "msg")
        c = self.counts
        if c["sent"] != c["delivered"] + c["dropped"] + in_flight:
            self.violations.append("message conservation failed")
        return RunResult(self, in_flight)


@dataclass
class RunResult:
    sim: Simulation
    in_flight: int

    @property
    def ok(self) -> bool:
        return not self.sim.violations

    def reference_log(self):
        sim = self.sim
        logs = [sim.nodes[i].commit_log for i in range(sim.cfg.n) if sim.honest(i)]
        return max(logs, key=len) if logs else []

    def inclusion(self) -> list[dict]:
        sim = self.sim
        log = self.reference_log()
        out = []
        for tg in sim.targets:
            v_target = max(tg.ack_views) if tg.ack_views else tg.v_target
            later = [b for b in log if b.view >= v_target]
            early = any(tg.tx in sim.block_txs(b) for b in log if b.view < v_target)
            dist = 0 if early else next((k + 1 for k, b in enumerate(later) if tg.tx in sim.block_txs(b)), None)
            first = later[0] if later else None
            out.append({"tx": tg.tx.hex(), "holders": list(tg.holders), "v_target": v_target,
                        "distance": dist, "in_next_block": (dist is not None and dist <= 1) if (first or early) else None,
                        "acks": tg.acks, "submit_failed": tg.failed})
        return out

    def metrics(self) -> dict:
        sim, cfg = self.sim, self.sim.cfg
        log = self.reference_log()
        honest = [i for i in range(cfg.n) if sim.honest(i)]
        complete = incomplete = 0
        for i in honest:
            node = sim.nodes[i]
            for v, st in node.da.instances.items():
                if v < node.view:
                    complete += st.phase == Phase.COMPLETE
                    incomplete += st.phase == Phase.INCOMPLETE
        steps = {str(v): h for v, h in sorted(sim.double_steps.items())}
        return {
            "protocol": cfg.protocol, "n": cfg.n, "f": cfg.f, "seed": cfg.seed,
            "strategy": cfg.adversary.strategy, "malicious": sorted(sim.malicious),
            "end_time": round(sim.now, 9),
            "views": {str(i): sim.nodes[i].view for i in range(cfg.n)},
            "commits": [{"height": b.height, "view": b.view, "id": b.id.hex(), "included": b.included,
                         "honest_miniblocks": sum(1 for i in honest if b.included >> i & 1)} for b in log],
            "steps_per_block": steps,
            "inclusion": self.inclusion(),
            "complete": complete, "incomplete": incomplete,
            "approvals_per_view": {str(v): sim.approvals.get(v, 0) for v in sorted(sim.proposals)},
            "reject_reasons": dict(sorted(sim.reasons.items())),
            "signals": sim.signal_count,
            "bytes": {k: v[:cfg.n] for k, v in sim.bytes.items()},
            "messages": {**sim.counts, "in_flight": self.in_flight},
            "violations": list(sim.violations),
        }

    def metrics_json(self) -> str:
        return json.dumps(self.metrics(), sort_keys=True, indent=1) + "\n"

    def trace_lines(self) -> str:
        keys = ("time", "from", "to", "type", "size", "view", "deliver")
        return "".join(json.dumps(dict(zip(keys, row)), sort_keys=True) + "\n" for row in self.sim.trace)


def run(cfg: ScenarioConfig) -> RunResult:
    return Simulation(cfg).run()


# -- dispersal-layer property checks -----------------------------------------------

def da_properties(res: RunResult, retrievers: int = 2) -> dict:
    """Evaluate the dispersal properties on a finished run; returns {name: bool} plus details."""
    sim = res.sim
    com, cfg = sim.com, sim.cfg
    n, f = cfg.n, cfg.f
    pcs = com.pcs
    honest = [i for i in range(n) if sim.honest(i)]
    props = {"termination": True, "termination_honest_complete": True, "availability": True,
             "correctness": True, "binding": True, "inclusion": True, "space_capture": True,
             "tamper_resistance": True}
    details = []

    for i in honest:
        node = sim.nodes[i]
        for v in range(1, node.view):
            st = node.da.instances.get(v)
            if st is None or st.phase not in (Phase.COMPLETE, Phase.INCOMPLETE):
                props["termination"] = False
                details.append(f"replica {i} view {v} not terminal")

    # honest-leader views that every honest replica entered after GST
    for v in sorted(sim.proposals):
        if not sim.honest(com.leader(v)):
            continue
        starts = [sim.nodes[i].entered.get(v) for i in honest]
        if any(t is None or t < cfg.gst for t in starts):
            continue
        for i in honest:
            st = sim.nodes[i].da.instances.get(v)
            if sim.nodes[i].view > v and (st is None or st.phase != Phase.COMPLETE):
                props["termination_honest_complete"] = False
                details.append(f"honest-leader view {v} not Complete at replica {i}")

    certified = set()
    for i in honest:
        certified.update(sim.nodes[i].da.agg_sigs)
    rng = np.random.default_rng([cfg.seed, 7])
    for fc, v in sorted(certified, key=lambda k: (k[1], k[0])):
        entry = next((sim.nodes[i].da.db[fc] for i in honest if fc in sim.nodes[i].da.db), None)
        if entry is None:
            props["availability"] = False
            details.append(f"view {v}: no honest replica stores chunks")
            continue
        comms = entry["commitments"]

        def query(r, c, _fc=fc):
            return sim.nodes[r].da.serve_chunks(c) if sim.honest(r) else None

        decoded = []
        for _ in range(retrievers):
            try:
                decoded.append(retrieve_chunk(com, comms, -1, query, rng).columns)
            except (RetrievalExhausted, DecodeFailure) as e:
                props["availability"] = False
                details.append(f"view {v}: retrieval failed ({e})")
        if not decoded:
            continue
        ref = decoded[0]
        for other in decoded[1:]:
            if any(not np.array_equal(ref[i], other[i]) for i in range(n)):
                props["correctness"] = props["binding"] = False
                details.append(f"view {v}: retrievers disagree")
        leader = com.leader(v)
        if sim.honest(leader) and fc in sim.matrices:
            if any(not np.array_equal(ref[i], sim.matrices[fc][:, i]) for i in range(n)):
                props["correctness"] = False
                details.append(f"view {v}: decoded block differs from the honest leader's")
        good_honest = 0
        for i in range(n):
            if pcs.is_identity(comms[i]):
                if np.any(ref[i]):
                    props["space_capture"] = False
                    details.append(f"view {v}: excluded column {i} is not zero")
                continue
            if pcs.commit(ref[i]) != comms[i]:
                props["tamper_resistance"] = False
            if i in honest:
                st = sim.nodes[i].da.instances.get(v)
                if st is not None and st.block is not None:
                    if np.array_equal(ref[i], st.block.column):
                        good_honest += 1
                    else:
                        props["tamper_resistance"] = False
                        details.append(f"view {v}: honest column {i} tampered")
        if good_honest < n - 2 * f:
            props["inclusion"] = False
            details.append(f"view {v}: only {good_honest} honest columns")
    props["details"] = details
    props["certified_instances"] = len(certified)
    return props


# -- scaling and collection-only experiments ----------------------------------------

def fit_line(xs, ys):
    """Least squares y = a + b x; returns (a, b, r2)."""
    xs, ys = np.asarray(xs, float), np.asarray(ys, float)
    b, a = np.polyfit(xs, ys, 1)
    pred = a + b * xs
    ss_res = float(((ys - pred) ** 2).sum())
    ss_tot = float(((ys - ys.mean()) ** 2).sum())
    return float(a), float(b), 1.0 - ss_res / ss_tot if ss_tot else 1.0


def measure_throughput_scaling(ns=(7, 13, 31, 61), d=256, protocols=("card7", "vanilla"), seed=0) -> list[dict]:
    """Per-replica dispersal download for one honest instance, per protocol and n."""
    from .variants import run_da
    rows = []
    for proto in protocols:
        for n in ns:
            f = (n - 1) // 4 if proto == "quarter" else (n - 1) // 3
            out = run_da(proto, n, f, d=d, seed=seed)
            rows.append({"protocol": proto, "n": n, "f": f, "block_bytes": out.block_bytes,
                         "download": out.mean_download, "complete": out.complete})
    return rows


def collection_trials(n, f, x, q, trials, rng, malicious_leader=False, delta=1.0):
    """Vectorised client + collection phase with i.i.d. latencies.

    The client multicasts to ``x`` replicas drawn uniformly; honest replicas'
    Collections reach the leader after i.i.d. (0, delta] delays and an honest
    leader keeps the first ``q`` honest arrivals.  A malicious leader keeps
    every non-holder it can and includes a holder only when fewer than
    ``n - f`` non-holders exist (malicious ids are ``0..f-1``).
    Returns the inclusion frequency.
    """
    holders = np.argsort(rng.random((trials, n)), axis=1)[:, :x]
    held = np.zeros((trials, n), dtype=bool)
    np.put_along_axis(held, holders, True, axis=1)
    hon = held[:, f:]
    if malicious_leader:
        # malicious replicas never carry the tx; the leader needs n-f columns, at least n-2f honest
        honest_nonholders = (n - f) - hon.sum(axis=1)
        return float(np.mean(honest_nonholders < n - 2 * f))
    lat = delta * (1.0 - rng.random((trials, n - f)))
    first = np.argsort(lat, axis=1)[:, :q]
    return float(np.mean(np.take_along_axis(hon, first, axis=1).any(axis=1)))


def retrieval_contacts(f: int, trials: int, seed: int = 0, d: int = 1) -> np.ndarray:
    """Replicas contacted by fallback ``retrieve_chunk`` when owner and leader both deny.

    One honest-leader instance at n = 3f+1 is dispersed once; each trial
    draws a fresh malicious set of size f (always containing the owner and
    the leader) whose members deny every query, then retrieves the owner's
    column.  Returns the per-trial contact counts.
    """
    n = 3 * f + 1
    rng = np.random.default_rng(seed)
    com = Committee.make(n, f, pcs=TransparentPCS(F65537, d), seed=seed)
    from .coding import encode2d
    cols = [com.field.random(rng, d) for _ in range(n)]
    matrix = encode2d(cols, com.code)
    comms = tuple(com.pcs.commit(c) for c in cols)
    store = {r: {r: matrix[:, r], r + n: matrix[:, r + n], r + 2 * n: matrix[:, r + 2 * n]} for r in range(n)}
    owner, leader = 1, 0
    out = np.empty(trials, dtype=np.int64)
    for k in range(trials):
        others = rng.permutation([i for i in range(n) if i not in (owner, leader)])[: f - 2]
        bad = {owner, leader, *map(int, others)}
        res = retrieve_chunk(com, comms, owner, lambda r, c: None if r in bad else store[r], rng, leader)
        out[k] = res.contacted
    return out
