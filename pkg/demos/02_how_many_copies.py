"""How many copies should a client send?

Prints the inclusion probability against honest and censoring leaders at
n = 31, f = 10, the copy count that reaches 95% under the default leader
prior, and a quick Monte-Carlo cross-check of one cell.
"""
import numpy as np

from dacr import navigator as nv

n, f = 31, 10
t = n - 2 * f
print(f"n={n} f={f} t={t}; pigeonhole threshold x = n - t + 1 = {n - t + 1}\n")
print(" x   honest(q=t)  honest(q=n-f)  censoring")
for x in (1, 3, 5, 8, 11, 15, 18, 21):
    h_lo = float(nv.pr_inclusion_honest(n, f, x, t))
    h_hi = float(nv.pr_inclusion_honest(n, f, x, n - f))
    m = float(nv.pr_inclusion_malicious(n, f, x))
    print(f"{x:2d}   {h_lo:10.4f}   {h_hi:12.4f}   {m:9.4f}")

x95 = nv.copies_for_target(n, f, t, 0.95)
print(f"\ncopies for 95% under a 2/3-honest leader prior: {x95}")
print(f"after one Incomplete view the prior drops to {float(nv.LeaderBelief().update(False).honest):.2f}; "
      f"copies needed: {nv.copies_for_target(n, f, t, 0.95, nv.LeaderBelief().update(False))}")

rng = np.random.default_rng(0)
mc = nv.mc_inclusion_honest(n, f, 8, 16, 100_000, rng)
print(f"\nMonte-Carlo check at x=8, q=16: {mc:.4f} vs formula {float(nv.pr_inclusion_honest(n, f, 8, 16)):.4f}")

b = nv.censor_bound(n, f, 5, 0.9, 2000)
print(f"censoring 90% of 2000 txs sent with 5 copies each: bound exp({b.log_value:.0f})")
