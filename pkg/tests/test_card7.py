import itertools

import numpy as np
import pytest

from dacr.card7 import (NULL_TX, Card7Leader, Card7Replica, Committee, Phase, RetrievalExhausted, check_inc,
                        pack_miniblock, parse_column, retrieve_chunk, retrieve_point)
from dacr.coding import F65537
from dacr.commitment import TransparentPCS


def committee(n, f, d=8, seed=0):
    return Committee.make(n, f, d=d, pcs=TransparentPCS(F65537, d), seed=seed)


def instance(com, view=1, txs=None, included=None):
    """Run one honest instance by hand; returns (leader, replicas, agreement)."""
    reps = [Card7Replica(i, com) for i in range(com.n)]
    lead = Card7Leader(com.leader(view), com, view)
    for r in reps:
        col, _ = r.on_signal(view, (txs or {}).get(r.rid, []))
        lead.collect(col)
    agreement = None
    for d in lead.disperse(included):
        app, _ = reps[d.recipient].verify_dispersal(d)
        if app is not None:
            agreement = lead.on_approval(app) or agreement
    if agreement is not None:
        for r in reps:
            r.on_agreement(agreement)
    return lead, reps, agreement


def test_miniblock_roundtrip():
    com = committee(4, 1, d=16)
    blk, rest = pack_miniblock(2, 5, [b"a", b"bcd"], com)
    assert rest == [] and parse_column(blk.column, com) == {"replica": 2, "view": 5, "txs": [b"a", b"bcd"]}
    blk, _ = pack_miniblock(2, 5, [], com)
    assert parse_column(blk.column, com)["txs"] == [NULL_TX]
    assert parse_column(F65537.zeros(16), com) is None


def test_miniblock_overflow_leaves_rest():
    com = committee(4, 1, d=16)
    blk, rest = pack_miniblock(0, 1, [b"x" * 4] * 5, com)
    assert 0 < len(blk.txs) < 5 and len(rest) == 5 - len(blk.txs)
    with pytest.raises(ValueError):
        pack_miniblock(0, 1, [b"y" * 64], com)


def test_signal_does_not_regress():
    r = Card7Replica(0, committee(4, 1))
    assert r.on_signal(2, [])[0] is not None
    assert r.on_signal(2, [])[0] is None and r.on_signal(1, [])[0] is None


def test_honest_instance_completes():
    com = committee(4, 1)
    lead, reps, agr = instance(com)
    assert agr is not None and len(lead.collections) == 4
    assert all(r.state(1).phase == Phase.COMPLETE and r.verify_card(agr.final_c, 1) for r in reps)
    assert not reps[0].verify_card(b"\0" * 32, 1)


def test_honest_instance_n5():
    _, reps, agr = instance(committee(5, 1))
    assert agr is not None and all(r.state(1).phase == Phase.COMPLETE for r in reps)


def test_excluded_replica_still_approves():
    # accountable inclusion: the excluded replica checks the attestations and approves
    com = committee(4, 1)
    lead, reps, agr = instance(com, included=[0, 1, 2])
    assert agr is not None and reps[3].state(1).reject is None
    assert not reps[3].db[agr.final_c][3].any()


def test_leader_threshold_and_duplicates():
    com = committee(4, 1)
    lead = Card7Leader(0, com, 1)
    reps = [Card7Replica(i, com) for i in range(4)]
    cols = [r.on_signal(1, [])[0] for r in reps]
    for c in cols[:2]:
        lead.collect(c, now=0.0)
    assert not lead.ready(10.0)
    assert not lead.collect(cols[0])
    lead = Card7Leader(0, com, 1, reach_proc_time=2.0)
    for c in cols[:3]:
        lead.collect(c, now=1.0)
    assert not lead.ready(2.5) and lead.ready(3.0)
    assert len(lead.disperse()) == 4


def test_check_inc_all_subsets():
    # hand oracle: valid iff >= n-f attested and every non-identity commitment attested
    com = committee(4, 1)
    reps = [Card7Replica(i, com) for i in range(4)]
    cols = [r.on_signal(1, [])[0] for r in reps]
    pcs = com.pcs
    comms_all = [pcs.commit(c.block.column) for c in cols]
    for nonzero in itertools.chain.from_iterable(itertools.combinations(range(4), k) for k in range(5)):
        for attested in itertools.chain.from_iterable(itertools.combinations(nonzero, k) for k in range(len(nonzero) + 1)):
            comms = [comms_all[i] if i in nonzero else pcs.identity for i in range(4)]
            atts = [cols[i].attestation for i in attested]
            got = check_inc(atts, comms, com, 1)
            if set(attested) != set(nonzero):
                assert got == "space-capture"
            elif len(attested) < 3:
                assert got == "inclusion-shortfall"
            else:
                assert got is None


def test_check_inc_rejects_wrong_view_and_duplicates():
    com = committee(4, 1)
    reps = [Card7Replica(i, com) for i in range(4)]
    cols = [r.on_signal(1, [])[0] for r in reps]
    comms = [com.pcs.commit(c.block.column) for c in cols]
    atts = [c.attestation for c in cols]
    assert check_inc(atts, comms, com, 2) == "inclusion-shortfall"
    assert check_inc(atts[:3] + [atts[0]], comms[:3] + [com.pcs.identity], com, 1) == "inclusion-shortfall"


def test_tampered_parity_rejected_by_owner():
    com = committee(4, 1)
    reps = [Card7Replica(i, com) for i in range(4)]
    lead = Card7Leader(0, com, 1)
    for r in reps:
        lead.collect(r.on_signal(1, [])[0])
    disp = lead.disperse()
    bad = disp[2].chunks[6].copy()
    bad[0] = (int(bad[0]) + 1) % F65537.p
    disp[2].chunks = {6: bad, 10: disp[2].chunks[10]}
    app, why = reps[2].verify_dispersal(disp[2])
    assert app is None and why == "parity-mismatch"
    # untouched replicas approve
    assert reps[1].verify_dispersal(disp[1])[0] is not None


def test_tampered_own_column_withheld():
    com = committee(4, 1)
    reps = [Card7Replica(i, com) for i in range(4)]
    lead = Card7Leader(0, com, 1)
    for r in reps:
        lead.collect(r.on_signal(1, [])[0])
    col = lead.collections[1].block.column.copy()
    col[0] = (int(col[0]) + 1) % F65537.p
    comms, atts, m = lead.build(columns={1: col})
    comms = list(comms)
    comms[1] = com.pcs.commit(col)
    disp = lead.bundles(tuple(comms), atts, m)
    assert reps[1].verify_dispersal(disp[1])[1] == "own-commit-mismatch"
    # other replicas see an attestation over the wrong commitment
    assert reps[2].verify_dispersal(disp[2])[1] == "inclusion-shortfall"


def test_approve_once_per_view():
    com = committee(4, 1)
    _, reps, agr = instance(com)
    lead = Card7Leader(0, com, 1)
    reps2 = [Card7Replica(i, com) for i in range(4)]
    for r in reps2:
        lead.collect(r.on_signal(1, [])[0])
    disp = lead.disperse()
    assert reps2[0].verify_dispersal(disp[0])[0] is not None
    assert reps2[0].verify_dispersal(disp[0]) == (None, "duplicate")


def test_timeout_marks_incomplete():
    r = Card7Replica(0, committee(4, 1))
    r.on_timeout(3)
    assert r.state(3).phase == Phase.INCOMPLETE


def _store(reps, fc):
    return lambda r, c: reps[r].serve_chunks(c)


def test_retrieve_fast_path_and_fallback():
    com = committee(7, 2, d=16)
    _, reps, agr = instance(com, txs={3: [b"hello"]})
    comms = reps[0].db[agr.final_c]["commitments"]
    rng = np.random.default_rng(0)
    res = retrieve_chunk(com, comms, 3, _store(reps, agr.final_c), rng, leader=0)
    assert not res.fallback and res.contacted == 1
    deny = {3, 0}
    q = lambda r, c: None if r in deny else reps[r].serve_chunks(c)
    res = retrieve_chunk(com, comms, 3, q, rng, leader=0)
    assert res.fallback and np.array_equal(res.columns[3], reps[3].state(1).block.column)
    assert parse_column(res.columns[3], com)["txs"] == [b"hello"]


def test_retrieve_rejects_lies():
    com = committee(7, 2)
    _, reps, agr = instance(com)
    comms = reps[0].db[agr.final_c]["commitments"]
    liars = {0, 1, 2}
    def q(r, c):
        got = reps[r].serve_chunks(c)
        if r in liars:
            got = {k: (v + 1) % F65537.p for k, v in got.items()}
        return got
    res = retrieve_chunk(com, comms, -1, q, np.random.default_rng(1))
    assert all(np.array_equal(res.columns[i], reps[i].state(1).block.column) for i in range(7))
    with pytest.raises(RetrievalExhausted):
        retrieve_chunk(com, comms, -1, lambda r, c: None, np.random.default_rng(1))


def test_retrieve_point():
    com = committee(4, 1)
    _, reps, agr = instance(com)
    comms = reps[0].db[agr.final_c]["commitments"]
    rng = np.random.default_rng(0)
    q = lambda r, c: reps[r].serve_chunks(c)
    qp = lambda o, c, j: reps[o].serve_point(c, o, j)
    v, fb = retrieve_point(com, comms, 2, 1, qp, q, rng)
    assert not fb and v == int(reps[2].state(1).block.column[1])
    forged = lambda o, c, j: (qp(o, c, j)[0] + 1, qp(o, c, j)[1])
    v2, fb = retrieve_point(com, comms, 2, 1, forged, q, rng)
    assert fb and v2 == v
