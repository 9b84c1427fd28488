"""Run the consensus simulator under every adversary strategy.

For each strategy: 13 replicas, f = 4, malicious ids 0..3 lead the first
four views, and one target tx is preloaded at n - t + 1 replicas.  We print
where the tx landed and how many views it took.
"""
from dacr.adversary import STRATEGIES
from dacr.simnet import ScenarioConfig, da_properties, run

print(f"{'strategy':16s} {'first commit view':>17s} {'tx distance':>11s} {'incomplete':>10s}  DA properties")
for strat in STRATEGIES:
    res = run(ScenarioConfig.from_dict({"n": 13, "f": 4, "seed": 2, "adversary": {"strategy": strat}}))
    m = res.metrics()
    props = da_properties(res)
    ok = all(v for k, v in props.items() if isinstance(v, bool))
    first = m["commits"][0]["view"] if m["commits"] else None
    print(f"{strat:16s} {first!s:>17s} {m['inclusion'][0]['distance']!s:>11s} {m['incomplete']:>10d}  "
          f"{'all hold' if ok else props['details'][:1]}")
    assert res.ok
