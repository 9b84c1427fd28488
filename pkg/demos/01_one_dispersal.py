"""Walk one accountable dispersal instance by hand, then break it.

Seven replicas (f = 2) each pack a mini-block, the leader encodes the
columns, every replica checks its two parity chunks against the extended
commitment list, and n - f approvals make the instance Complete.  Then the
leader flips one cell of replica 3's column and we watch who notices.
"""
import numpy as np

from dacr.card7 import Card7Leader, Card7Replica, Committee, parse_column, retrieve_chunk
from dacr.coding import F65537
from dacr.commitment import TransparentPCS

com = Committee.make(7, 2, pcs=TransparentPCS(F65537, 16), seed=1)
reps = [Card7Replica(i, com) for i in range(com.n)]
leader = Card7Leader(0, com, view=1)

for r in reps:
    col, _ = r.on_signal(1, [f"tx-from-{r.rid}".encode()])
    leader.collect(col)
print(f"leader holds {len(leader.collections)} collections (needs {com.quorum})")

agreement = None
for d in leader.disperse():
    approval, why = reps[d.recipient].verify_dispersal(d)
    print(f"  replica {d.recipient}: {'approves' if approval else 'rejects: ' + why}")
    if approval:
        agreement = leader.on_approval(approval) or agreement
for r in reps:
    r.on_agreement(agreement)
print("Complete everywhere:", all(r.verify_card(agreement.final_c, 1) for r in reps))

# the leader and replica 3 go quiet; anyone can still rebuild column 3
comms = reps[1].db[agreement.final_c]["commitments"]
deny = {0, 3}
res = retrieve_chunk(com, comms, 3, lambda r, c: None if r in deny else reps[r].serve_chunks(c),
                     np.random.default_rng(0), leader=0)
print(f"column 3 rebuilt after contacting {res.contacted} replicas:", parse_column(res.columns[3], com)["txs"])

# now a tampering leader
reps = [Card7Replica(i, com) for i in range(com.n)]
leader = Card7Leader(1, com, view=2)
for r in reps:
    leader.collect(r.on_signal(2, [])[0])
col = leader.collections[3].block.column.copy()
col[0] = (int(col[0]) + 1) % F65537.p
comms, atts, matrix = leader.build(columns={3: col})
verdicts = [reps[d.recipient].verify_dispersal(d)[1] for d in leader.bundles(comms, atts, matrix)]
print("tampered dispersal verdicts:", verdicts)
print("approvals:", sum(v is None for v in verdicts), "of", com.n, "-> the instance cannot Complete")
