"""Stochastic validation of the distillation maps and attack baselines.

Three layers:

* flag-level simulation: ensembles of per-pair (bit-flip, phase-flip) error
  flags pushed through B/P rounds, whose empirical rates must track the
  closed-form maps;
* bit-level simulation of the prepare-and-measure protocol (announced
  parities, trio compression), which can only see bit errors;
* intercept-resend attack baselines for BB84 and the six-state scheme.

Randomness uses numpy's PCG64 generator (period 2^128).  Streams are split
deterministically by seeding with ``[seed, stream_index]``: stream 0 draws
the initial population, stream k >= 1 drives round k.  Identical seeds give
identical ensembles, pairings, and reports.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import PauliChannelParams
from .convergence import StepSequence, Trajectory, evolve
from .steps import StepKind, apply_step

logger = logging.getLogger(__name__)


def _stream(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, index])


@dataclass
class FlagEnsemble:
    """Population of per-pair (x, z) error flags with its RNG bookkeeping.

    ``x``/``z`` are uint8 arrays (1 = error present); ``params`` is the
    channel whose flag distribution the population follows (the analytic
    image of the source channel under the rounds applied so far);
    ``round_index`` counts applied rounds and selects the next RNG stream.
    """

    x: np.ndarray
    z: np.ndarray
    seed: int
    params: PauliChannelParams
    round_index: int = 0

    def __len__(self) -> int:
        return int(self.x.size)

    @property
    def flags(self) -> np.ndarray:
        """(n, 2) array of (x, z) flag pairs."""
        return np.column_stack([self.x, self.z])


@dataclass(frozen=True)
class EmpiricalRates:
    """Frequency estimates of the X/Y/Z flag categories."""

    qx_hat: float
    qy_hat: float
    qz_hat: float
    n: int
    stderr: tuple[float, float, float]

    def to_dict(self) -> dict:
        return {
            "qx_hat": self.qx_hat,
            "qy_hat": self.qy_hat,
            "qz_hat": self.qz_hat,
            "n": self.n,
            "stderr": list(self.stderr),
        }


def sample_flags(c: PauliChannelParams, n: int, seed: int) -> FlagEnsemble:
    """Draw n independent error-flag pairs from the channel distribution."""
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    u = _stream(seed, 0).random(n)
    # Categories by cumulative rate: [0,qx) X, [qx,qx+qy) Y, then Z, then I.
    x = u < c.qx + c.qy
    z = (u >= c.qx) & (u < c.qx + c.qy + c.qz)
    return FlagEnsemble(
        x.astype(np.uint8), z.astype(np.uint8), seed, c, round_index=0
    )


def estimate_rates(e: FlagEnsemble) -> EmpiricalRates:
    """Empirical X/Y/Z rates with per-component binomial standard errors."""
    n = len(e)
    if n == 0:
        raise ValueError("cannot estimate rates of an empty ensemble")
    x = e.x.astype(bool)
    z = e.z.astype(bool)
    qx = float(np.count_nonzero(x & ~z)) / n
    qy = float(np.count_nonzero(x & z)) / n
    qz = float(np.count_nonzero(~x & z)) / n
    se = tuple(math.sqrt(q * (1.0 - q) / n) for q in (qx, qy, qz))
    return EmpiricalRates(qx, qy, qz, n, se)


def _apply_flag_round(e: FlagEnsemble, kind: StepKind) -> FlagEnsemble:
    rng = _stream(e.seed, e.round_index + 1)
    perm = rng.permutation(len(e))
    block = kind.block_size
    m = len(e) // block
    if m == 0:
        raise ValueError(f"need at least {block} flags for a {kind} round, got {len(e)}")
    cols = [perm[i : block * m : block] for i in range(block)]
    x = [e.x[c] for c in cols]
    z = [e.z[c] for c in cols]
    if kind is StepKind.B:
        keep = x[0] == x[1]
        new_x = x[0][keep]
        new_z = (z[0] ^ z[1])[keep]
    elif kind is StepKind.BX:
        keep = z[0] == z[1]
        new_x = (x[0] ^ x[1])[keep]
        new_z = z[0][keep]
    else:  # P: parity of bit flags, majority of phase flags; nothing discarded
        new_x = x[0] ^ x[1] ^ x[2]
        new_z = ((z[0].astype(np.int16) + z[1] + z[2]) >= 2).astype(np.uint8)
    if new_x.size == 0:
        logger.warning("%s round left no survivors (n=%d)", kind, len(e))
    return FlagEnsemble(
        new_x,
        new_z,
        e.seed,
        apply_step(kind, e.params).params_after,
        e.round_index + 1,
    )


def mc_b_step(e: FlagEnsemble) -> FlagEnsemble:
    """Random pairing; keep the first pair of each block iff x flags agree."""
    return _apply_flag_round(e, StepKind.B)


def mc_p_step(e: FlagEnsemble) -> FlagEnsemble:
    """Random trios; keep one member with parity/majority-combined flags."""
    return _apply_flag_round(e, StepKind.P)


def mc_bx_step(e: FlagEnsemble) -> FlagEnsemble:
    """Phase-basis mirror of :func:`mc_b_step`."""
    return _apply_flag_round(e, StepKind.BX)


@dataclass(frozen=True)
class RoundReport:
    """Bit-level statistics of one protocol round."""

    index: int
    kind: StepKind
    n_in: int
    n_kept: int
    disagreements: int
    rate_hat: float
    rate_pred: float
    stderr: float

    def to_dict(self) -> dict:
        return {
            "round": self.index,
            "kind": self.kind.value,
            "n_in": self.n_in,
            "n_kept": self.n_kept,
            "disagreements": self.disagreements,
            "rate_hat": self.rate_hat,
            "rate_pred": self.rate_pred,
            "stderr": self.stderr,
        }


@dataclass(frozen=True)
class Protocol2Report:
    """Bit-level run of the advantage-distillation rounds."""

    channel: PauliChannelParams
    sequence: StepSequence
    n: int
    seed: int
    rounds: tuple[RoundReport, ...]
    trajectory: Trajectory = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "channel": self.channel.to_dict(),
            "sequence": str(self.sequence),
            "n": self.n,
            "seed": self.seed,
            "rounds": [r.to_dict() for r in self.rounds],
        }


def simulate_protocol2_bits(
    channel: PauliChannelParams,
    seq: StepSequence,
    n: int,
    seed: int,
) -> Protocol2Report:
    """Simulate the announced-parity rounds on actual bit strings.

    Alice's random bits are corrupted at the channel's bit error rate
    (qx + qy; the phase components are invisible at bit level).  B rounds
    keep the first bit of each randomly formed pair iff the announced pair
    parities agree; P rounds replace each random trio by its parity.  The
    per-round disagreement rate is reported against the analytic recursion.
    """
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    traj = evolve(seq, channel, prepare_and_measure=True)
    rng = _stream(seed, 0)
    alice = rng.integers(0, 2, n, dtype=np.uint8)
    bob = alice ^ (rng.random(n) < channel.pz).astype(np.uint8)

    rounds: list[RoundReport] = []
    for rec in traj.records:
        size = alice.size
        block = rec.kind.block_size
        m = size // block
        if m == 0:
            logger.warning("population exhausted before round %d", rec.step_index)
            break
        perm = _stream(seed, rec.step_index).permutation(size)
        cols = [perm[i : block * m : block] for i in range(block)]
        if rec.kind is StepKind.B:
            keep = (alice[cols[0]] ^ alice[cols[1]]) == (bob[cols[0]] ^ bob[cols[1]])
            alice = alice[cols[0]][keep]
            bob = bob[cols[0]][keep]
        else:  # P
            alice = alice[cols[0]] ^ alice[cols[1]] ^ alice[cols[2]]
            bob = bob[cols[0]] ^ bob[cols[1]] ^ bob[cols[2]]
        n_kept = int(alice.size)
        disagreements = int(np.count_nonzero(alice != bob))
        pred = rec.params.pz
        rounds.append(
            RoundReport(
                index=rec.step_index,
                kind=rec.kind,
                n_in=size,
                n_kept=n_kept,
                disagreements=disagreements,
                rate_hat=disagreements / n_kept if n_kept else 0.0,
                rate_pred=pred,
                stderr=math.sqrt(pred * (1.0 - pred) / n_kept) if n_kept else 0.0,
            )
        )
        if n_kept == 0:
            break
    return Protocol2Report(channel, seq, n, seed, tuple(rounds), traj)


@dataclass(frozen=True)
class AttackReport:
    """Sifted-key statistics under an intercept-resend attack."""

    protocol: str
    n: int
    seed: int
    sifted: int
    sift_fraction: float
    errors: int
    error_rate: float
    stderr: float

    def to_dict(self) -> dict:
        return {
            "protocol": self.protocol,
            "n": self.n,
            "seed": self.seed,
            "sifted": self.sifted,
            "sift_fraction": self.sift_fraction,
            "errors": self.errors,
            "error_rate": self.error_rate,
            "stderr": self.stderr,
        }


def intercept_resend(
    protocol: str,
    n: int,
    seed: int,
    eve_matches_basis: bool = False,
) -> AttackReport:
    """Simulate the intercept-resend attack and report the sifted error rate.

    States are (basis, bit) pairs with the measurement-collapse rule: same
    basis reads the bit faithfully, a different basis yields a uniformly
    random bit.  ``eve_matches_basis`` is a diagnostic mode in which Eve
    always measures in Alice's basis (no errors are introduced).
    """
    if protocol not in ("bb84", "sixstate"):
        raise ValueError(f"unknown protocol {protocol!r}; expected bb84 or sixstate")
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    n_bases = 2 if protocol == "bb84" else 3
    rng = _stream(seed, 0)
    alice_basis = rng.integers(0, n_bases, n)
    alice_bit = rng.integers(0, 2, n, dtype=np.uint8)
    if eve_matches_basis:
        eve_basis = alice_basis
    else:
        eve_basis = rng.integers(0, n_bases, n)
    eve_bit = np.where(
        eve_basis == alice_basis, alice_bit, rng.integers(0, 2, n, dtype=np.uint8)
    )
    bob_basis = rng.integers(0, n_bases, n)
    bob_bit = np.where(
        bob_basis == eve_basis, eve_bit, rng.integers(0, 2, n, dtype=np.uint8)
    )
    sifted_mask = bob_basis == alice_basis
    sifted = int(np.count_nonzero(sifted_mask))
    errors = int(np.count_nonzero(alice_bit[sifted_mask] != bob_bit[sifted_mask]))
    rate = errors / sifted if sifted else 0.0
    return AttackReport(
        protocol=protocol,
        n=n,
        seed=seed,
        sifted=sifted,
        sift_fraction=sifted / n,
        errors=errors,
        error_rate=rate,
        stderr=math.sqrt(rate * (1.0 - rate) / sifted) if sifted else 0.0,
    )
