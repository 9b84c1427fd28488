"""Per-replica download against committee size, and the Card-Lite sampling game.

The accountable protocol ships each replica its own parity pair plus the
commitment list, so download grows by a few dozen bytes per replica; the
vanilla protocol ships every mini-block to everybody.
"""
from dacr import lite
from dacr.simnet import fit_line, measure_throughput_scaling

rows = measure_throughput_scaling(ns=(7, 13, 31, 61), d=256)
for proto in ("card7", "vanilla"):
    pts = [r for r in rows if r["protocol"] == proto]
    a, b, r2 = fit_line([r["n"] for r in pts], [r["download"] for r in pts])
    print(f"{proto:8s} " + "  ".join(f"n={r['n']}: {r['download']:8.0f}B" for r in pts)
          + f"   fit {a:.0f} + {b:.1f}*n (R2 {r2:.4f})")

print("\nCard-Lite, tau = 1.5, 50 seeds")
for f, tau, s, k, L, hon, cen in lite.separation_table((16, 32), 1.5, 50):
    print(f"  f={f}: censor s={s}, batches {L} x {k}; honest leaders pass {hon:.2f}, censoring leaders {cen:.2f}")
