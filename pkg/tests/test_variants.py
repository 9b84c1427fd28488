import pytest

from dacr.simnet import fit_line, measure_throughput_scaling
from dacr.variants import run_da


@pytest.mark.parametrize("proto,n,f", [("card7", 7, 2), ("quarter", 9, 2), ("vanilla", 7, 2)])
def test_honest_instance_completes(proto, n, f):
    r = run_da(proto, n, f, d=8, seed=0)
    assert r.complete and not r.tampered_undetected and r.honest_untampered == n


def test_card7_tamper_never_completes():
    for seed in range(10):
        r = run_da("card7", 7, 2, d=8, seed=seed, strategy="tamper")
        assert not r.complete and r.reasons.get("parity-mismatch")


@pytest.mark.parametrize("proto", ["quarter", "vanilla"])
def test_non_accountable_variants_miss_tampering(proto):
    n = 9 if proto == "quarter" else 7
    for seed in range(10):
        r = run_da(proto, n, 2, d=8, seed=seed, strategy="tamper")
        assert r.complete and r.tampered_undetected


def test_quarter_excluded_replica_cannot_approve():
    r = run_da("quarter", 9, 2, d=8, seed=0, strategy="censor", victims=[2, 3])
    assert r.complete and r.approvals == 9 - 2 * 2


def test_quarter_inclusion_floor_under_capture():
    n, f = 13, 3
    r = run_da("quarter", n, f, d=8, seed=2, strategy="capture")
    assert r.complete and r.honest_untampered == n - 3 * f


def test_card7_capture_is_zero():
    r = run_da("card7", 7, 2, d=8, seed=0, strategy="capture")
    assert r.captured == 0 and r.honest_untampered >= 7 - 2 * 2


def test_vanilla_capture():
    r = run_da("vanilla", 7, 2, d=8, seed=0, strategy="capture")
    assert r.complete and r.captured == 2 * 2


def test_download_shapes():
    rows = measure_throughput_scaling(ns=(7, 13, 31), d=64)
    c7 = [r for r in rows if r["protocol"] == "card7"]
    va = [r for r in rows if r["protocol"] == "vanilla"]
    _, _, r2 = fit_line([r["n"] for r in c7], [r["download"] for r in c7])
    assert r2 > 0.99
    _, slope, r2 = fit_line([r["n"] for r in va], [r["download"] for r in va])
    assert r2 > 0.99 and slope > 0.9 * va[0]["block_bytes"]
    # the per-replica ratio shrinks roughly like 1/n
    ratios = [a["download"] / b["download"] for a, b in zip(c7, va)]
    assert ratios[0] > ratios[1] > ratios[2]
