"""Sampling game for the light-weight dispersal variant and its parameter calculator.

Each replica derives an L x k grid of query targets from the final
commitment; a query is answerable iff the targeted column is included
with a valid attestation.  A replica passes when some batch (row of the
grid) is fully answerable.  The commitment-opening proof is a stub that
the harness answers truthfully; only its size is accounted.
"""
from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass

import numpy as np

from .sigs import Keyring

PROOF_BYTES_PER_LEVEL = 48


@dataclass(frozen=True)
class LiteParams:
    f: int
    tau: float
    s: int
    p_h: float
    p_d: float
    rho: float
    k: int
    L: int
    s_star: int

    @property
    def n(self) -> int:
        return 3 * self.f + 1

    def proof_bytes(self) -> int:
        return PROOF_BYTES_PER_LEVEL * math.ceil(math.log2(self.n))


def s_star(f: int, tau: float) -> int:
    return math.ceil(tau * f / math.log(f))


def lite_params(f: int, tau: float, s: int | None = None) -> LiteParams:
    if f < 2 or tau <= 1:
        raise ValueError("need f >= 2 and tau > 1")
    ss = s_star(f, tau)
    s = ss if s is None else s
    if not 0 <= s <= f:
        raise ValueError(f"s={s} outside [0, f]")
    n = 3 * f + 1
    p_h = (2 * f + 1) / n
    p_d = (2 * f + 1 - s) / n
    lf = math.log(f)
    rho = math.log(1 / p_h) / math.log(1 / p_d)
    k = math.ceil(tau * lf / math.log(1 / p_d))
    L = math.ceil(tau * f ** rho * lf)
    return LiteParams(f, tau, s, p_h, p_d, rho, k, L, ss)


def batch_success_prob(p: float, k: int, L: int) -> float:
    return 1.0 - (1.0 - p ** k) ** L


def sample_matrix(final_c: bytes, replica: int, n: int, k: int, L: int) -> np.ndarray:
    """L x k targets; cell (i, j) is word i*k+j of SHAKE-256(C || replica) reduced mod n."""
    xof = hashlib.shake_256(b"dacr/lite" + final_c + struct.pack(">I", replica))
    words = np.frombuffer(xof.digest(8 * k * L), dtype=">u8")
    return (words % np.uint64(n)).astype(np.int64).reshape(L, k)


@dataclass
class GameResult:
    passes: np.ndarray         # per replica
    leader_ok: bool
    honest_passes: int
    bytes_per_replica: int


class QueryGame:
    """One leader instance: which columns are included, and who is honest."""

    def __init__(self, f: int, params: LiteParams, keys: Keyring | None = None, seed: int = 0):
        self.f, self.n, self.params = f, 3 * f + 1, params
        self.keys = keys or Keyring.generate(self.n, self.n - f, seed)

    def setup(self, censored, rng: np.random.Generator):
        """Honest ids are the first 2f+1; the leader drops the f malicious columns plus ``censored``."""
        n, f = self.n, self.f
        included = np.ones(n, dtype=bool)
        included[2 * f + 1:] = False
        included[list(censored)] = False
        commitments = [rng.bytes(32) for _ in range(n)]
        atts = {i: self.keys.attest(i, commitments[i], 1) for i in range(n) if included[i]}
        return included, commitments, atts

    def run(self, censored, rng: np.random.Generator, final_c: bytes | None = None,
            malicious_leader: bool | None = None, check_sigs: bool = True) -> GameResult:
        n, f, prm = self.n, self.f, self.params
        included, commitments, atts = self.setup(censored, rng)
        final_c = final_c if final_c is not None else rng.bytes(32)
        passes = np.zeros(n, dtype=bool)
        for q in range(n):
            ok_rows = included[sample_matrix(final_c, q, n, prm.k, prm.L)].all(axis=1)
            if not ok_rows.any():
                continue
            row = sample_matrix(final_c, q, n, prm.k, prm.L)[int(np.argmax(ok_rows))]
            # the leader answers that batch; the replica checks each attestation
            if check_sigs:
                ok = all(self.keys.verify_attest(int(r), commitments[r], 1, atts[int(r)]) for r in set(row.tolist()))
            else:
                ok = True
            passes[q] = ok
        honest = int(passes[:2 * f + 1].sum())
        malicious = bool(len(censored)) if malicious_leader is None else malicious_leader
        leader_ok = honest >= f + 1 if malicious else int(passes.sum()) >= 2 * f + 1
        per_reply = prm.k * (74 + 32 + prm.proof_bytes())
        return GameResult(passes, leader_ok, honest, per_reply)


def run_query_game(n: int, f: int, censored, seed: int, params: LiteParams | None = None, tau: float = 1.5):
    """Seeded single game; ``censored`` are the honest ids dropped beyond the f allowed exclusions."""
    if n != 3 * f + 1:
        raise ValueError("the game is defined for n = 3f+1")
    params = params or lite_params(f, tau)
    return QueryGame(f, params, seed=seed).run(censored, np.random.default_rng(seed))


def grind(game: QueryGame, censored, rng: np.random.Generator, tries: int) -> int:
    """Best honest-pass count a leader reaches by trying ``tries`` final commitments."""
    n, f, prm = game.n, game.f, game.params
    included, _, _ = game.setup(censored, rng)
    best = 0
    for _ in range(tries):
        c = rng.bytes(32)
        cnt = sum(bool(included[sample_matrix(c, q, n, prm.k, prm.L)].all(axis=1).any()) for q in range(2 * f + 1))
        best = max(best, cnt)
    return best


def separation_table(fs=(16, 32, 64), tau=1.5, seeds=200, start=0, s=None):
    """Rows (f, tau, s, k, L, honest pass rate, censoring pass rate)."""
    rows = []
    for f in fs:
        prm = lite_params(f, tau, s)
        game = QueryGame(f, prm, seed=start)
        hon = mal = 0
        for sd in range(start, start + seeds):
            rng = np.random.default_rng(sd)
            hon += game.run([], rng, malicious_leader=False).leader_ok
            cens = list(range(2 * f + 1 - prm.s, 2 * f + 1))
            mal += game.run(cens, rng, malicious_leader=True).leader_ok
        rows.append((f, tau, prm.s, prm.k, prm.L, hon / seeds, mal / seeds))
    return rows
