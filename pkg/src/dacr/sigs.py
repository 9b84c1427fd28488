"""Attestations and aggregate multi-signatures with signer bitmaps.

Backends:

* ``HmacScheme`` - keyed HMAC-SHA512 tags, aggregated by summing modulo
  2**512 (a multiset aggregate).  Verification goes through a key registry
  built at keygen, so it is only meaningful inside a closed simulation.
* ``BlsScheme`` - BLS12-381 via ``py_ecc`` (optional, slow).
"""
from __future__ import annotations

import hashlib
import hmac
import struct
from dataclasses import dataclass, field

SIG_BYTES = 64


class AggregationError(ValueError):
    pass


@dataclass(frozen=True)
class Attestation:
    replica: int
    view: int
    sig: bytes


@dataclass(frozen=True)
class PartialSig:
    signer: int
    message: bytes
    sig: bytes


@dataclass(frozen=True)
class CombinedSignature:
    agg: bytes
    signers: int      # bitmap, bit i set <=> replica i signed
    message: bytes
    n: int

    @property
    def count(self) -> int:
        return bin(self.signers).count("1")

    def signer_ids(self) -> list[int]:
        return [i for i in range(self.n) if self.signers >> i & 1]

    def to_bytes(self, with_bitmap: bool = True) -> bytes:
        # bitmap big-endian (replica 0 is the most significant bit), then the signature
        if not with_bitmap:
            return self.agg
        nb = (self.n + 7) // 8
        rev = int(format(self.signers, f"0{nb * 8}b")[::-1], 2)
        return rev.to_bytes(nb, "big") + self.agg


class HmacScheme:
    name = "hmac"

    def __init__(self):
        self._registry: dict[bytes, bytes] = {}
        self._memo: dict = {}   # verification results; tags are deterministic

    def _cached(self, key, fn):
        hit = self._memo.get(key)
        if hit is None:
            if len(self._memo) > 500_000:
                self._memo.clear()
            hit = self._memo[key] = fn()
        return hit

    def keygen(self, seed: bytes):
        sk = hashlib.sha256(b"dacr/sk" + seed).digest()
        pk = hashlib.sha256(b"dacr/pk" + sk).digest()
        self._registry[pk] = sk
        return sk, pk

    def sign(self, sk: bytes, msg: bytes) -> bytes:
        return hmac.digest(sk, msg, "sha512")

    def verify(self, pk: bytes, msg: bytes, sig: bytes) -> bool:
        sk = self._registry.get(pk)
        if sk is None or not isinstance(sig, bytes):
            return False
        return self._cached((pk, msg, sig), lambda: hmac.compare_digest(self.sign(sk, msg), sig))

    def aggregate(self, sigs: list[bytes]) -> bytes:
        acc = sum(int.from_bytes(s, "big") for s in sigs) % (1 << 512)
        return acc.to_bytes(SIG_BYTES, "big")

    def verify_aggregate(self, pks: list[bytes], msg: bytes, agg: bytes) -> bool:
        sks = [self._registry.get(pk) for pk in pks]
        if any(s is None for s in sks) or not isinstance(agg, bytes):
            return False
        return self._cached((tuple(pks), msg, agg),
                            lambda: hmac.compare_digest(self.aggregate([self.sign(sk, msg) for sk in sks]), agg))


class BlsScheme:
    name = "bls"

    def __init__(self):
        from py_ecc.bls import G2ProofOfPossession
        self.bls = G2ProofOfPossession

    def keygen(self, seed: bytes):
        sk = self.bls.KeyGen(hashlib.sha256(b"dacr/bls" + seed).digest())
        return sk, self.bls.SkToPk(sk)

    def sign(self, sk, msg):
        return self.bls.Sign(sk, msg)

    def verify(self, pk, msg, sig):
        try:
            return self.bls.Verify(pk, msg, sig)
        except Exception:  # malformed points
            return False

    def aggregate(self, sigs):
        return self.bls.Aggregate(list(sigs))

    def verify_aggregate(self, pks, msg, agg):
        try:
            return self.bls.FastAggregateVerify(list(pks), msg, agg)
        except Exception:
            return False


def _attest_msg(commitment: bytes, view: int) -> bytes:
    return b"dacr/attest" + struct.pack(">I", len(commitment)) + commitment + struct.pack(">Q", view)


@dataclass
class Keyring:
    """Keys for replicas 0..n-1 plus the aggregate-signature rules of one committee."""

    scheme: object
    n: int
    threshold: int
    sks: list = field(default_factory=list)
    pks: list = field(default_factory=list)

    @classmethod
    def generate(cls, n: int, threshold: int, seed: int = 0, scheme=None) -> "Keyring":
        scheme = scheme or HmacScheme()
        kr = cls(scheme, n, threshold)
        for i in range(n):
            sk, pk = scheme.keygen(struct.pack(">QQ", seed, i))
            kr.sks.append(sk)
            kr.pks.append(pk)
        return kr

    # attestations ---------------------------------------------------------
    def attest(self, replica: int, commitment: bytes, view: int) -> Attestation:
        return Attestation(replica, view, self.scheme.sign(self.sks[replica], _attest_msg(commitment, view)))

    def verify_attest(self, replica: int, commitment: bytes, view: int, att: Attestation) -> bool:
        if att.replica != replica or att.view != view or not 0 <= replica < self.n:
            return False
        return self.scheme.verify(self.pks[replica], _attest_msg(commitment, view), att.sig)

    # multi-signatures -----------------------------------------------------
    def ms_sign(self, replica: int, msg: bytes) -> PartialSig:
        return PartialSig(replica, msg, self.scheme.sign(self.sks[replica], msg))

    def ms_verify_partial(self, part: PartialSig) -> bool:
        return 0 <= part.signer < self.n and self.scheme.verify(self.pks[part.signer], part.message, part.sig)

    def ms_agg(self, partials) -> CombinedSignature:
        partials = list(partials)
        if not partials:
            raise AggregationError("nothing to aggregate")
        msgs = {p.message for p in partials}
        if len(msgs) != 1:
            raise AggregationError("partials over different messages")
        by_signer = {p.signer: p for p in partials}  # duplicates collapse
        bitmap = 0
        for i in by_signer:
            bitmap |= 1 << i
        agg = self.scheme.aggregate([by_signer[i].sig for i in sorted(by_signer)])
        return CombinedSignature(agg, bitmap, msgs.pop(), self.n)

    def ms_verify(self, cs: CombinedSignature, msg: bytes) -> bool:
        if cs is None or cs.message != msg or cs.n != self.n or cs.signers >> self.n:
            return False
        if cs.count < self.threshold:
            return False
        return self.scheme.verify_aggregate([self.pks[i] for i in cs.signer_ids()], msg, cs.agg)
