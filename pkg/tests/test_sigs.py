import pytest
import dataclasses

from hypothesis import given, settings, strategies as st

from dacr.sigs import AggregationError, Keyring


@pytest.fixture(scope="module")
def keys():
    return Keyring.generate(7, 5, seed=9)


def test_attestation_binds_commitment_and_view(keys):
    a = keys.attest(2, b"c" * 32, 4)
    assert keys.verify_attest(2, b"c" * 32, 4, a)
    assert not keys.verify_attest(2, b"d" * 32, 4, a)
    assert not keys.verify_attest(2, b"c" * 32, 5, a)
    assert not keys.verify_attest(3, b"c" * 32, 4, a)


@settings(max_examples=40, deadline=None)
@given(signers=st.sets(st.integers(0, 6), min_size=1))
def test_threshold_and_bitmap(keys, signers):
    msg = b"block"
    cs = keys.ms_agg(keys.ms_sign(i, msg) for i in signers)
    assert cs.signer_ids() == sorted(signers)
    assert keys.ms_verify(cs, msg) == (len(signers) >= 5)
    assert not keys.ms_verify(cs, b"other")


def test_duplicates_collapse_and_mixed_messages_fail(keys):
    parts = [keys.ms_sign(i, b"m") for i in (0, 1, 2, 3, 4)]
    cs = keys.ms_agg(parts + parts[:2])
    assert cs.count == 5 and keys.ms_verify(cs, b"m")
    with pytest.raises(AggregationError):
        keys.ms_agg([keys.ms_sign(0, b"a"), keys.ms_sign(1, b"b")])
    with pytest.raises(AggregationError):
        keys.ms_agg([])


def test_forged_bitmap_rejected(keys):
    cs = keys.ms_agg(keys.ms_sign(i, b"m") for i in range(5))
    cs = dataclasses.replace(cs, signers=cs.signers | 1 << 6)
    assert not keys.ms_verify(cs, b"m")


def test_partial_verification(keys):
    p = keys.ms_sign(1, b"x")
    assert keys.ms_verify_partial(p)
    assert not keys.ms_verify_partial(dataclasses.replace(p, signer=2))


@pytest.mark.slow
def test_bls_backend():
    pytest.importorskip("py_ecc")
    from dacr.sigs import BlsScheme
    kr = Keyring.generate(4, 3, seed=1, scheme=BlsScheme())
    cs = kr.ms_agg(kr.ms_sign(i, b"m") for i in range(3))
    assert kr.ms_verify(cs, b"m")
    assert not kr.ms_verify(cs, b"n")
