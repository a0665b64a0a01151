"""Pauli channel parametrizations for QKD error-rate analysis.

The central object is an uncorrelated Pauli channel that acts independently
on each transmitted qubit: X with probability ``qx``, Y with ``qy``, Z with
``qz``, and identity with the remaining probability.  Two coordinate systems
are supported:

* raw rates ``(qx, qy, qz)``;
* ``(pz, px, delta)``, where ``pz = qx + qy`` is the observable bit error
  rate, ``px = qy + qz`` the phase error rate, and ``delta = qz - qy`` the
  signed split between the two unobservable components.  The worst-case
  convergence analysis for BB84 is carried out in these coordinates.

All types are immutable values and all operations are pure functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# Validation tolerance: violations beyond this are rejected, while smaller
# negative round-off (iterated maps produce ~1e-17-scale noise) is clamped
# to zero.
SIMPLEX_TOL = 1e-12


def _checked_rate(value: float, name: str) -> float:
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")
    if value < 0.0:
        if value < -SIMPLEX_TOL:
            raise ValueError(f"{name} must be >= 0, got {value}")
        return 0.0
    return float(value)


@dataclass(frozen=True)
class PauliChannelParams:
    """Error rates of an uncorrelated Pauli channel.

    Invariants: each rate is non-negative and ``qx + qy + qz <= 1``; the
    identity rate ``qi = 1 - qx - qy - qz`` is derived, not stored.
    Negative round-off within ``SIMPLEX_TOL`` is clamped to zero so that
    iterated maps stay inside the simplex.
    """

    qx: float
    qy: float
    qz: float

    def __post_init__(self) -> None:
        for name in ("qx", "qy", "qz"):
            object.__setattr__(self, name, _checked_rate(getattr(self, name), name))
        total = self.qx + self.qy + self.qz
        if total > 1.0 + SIMPLEX_TOL:
            raise ValueError(f"qx + qy + qz must be <= 1, got {total}")

    @property
    def qi(self) -> float:
        """Probability of no error."""
        return max(0.0, 1.0 - self.qx - self.qy - self.qz)

    @property
    def pz(self) -> float:
        """Bit error rate qx + qy (disagreement observable in the key basis)."""
        return self.qx + self.qy

    @property
    def px(self) -> float:
        """Phase error rate qy + qz."""
        return self.qy + self.qz

    def to_delta(self) -> "DeltaCoords":
        """Change of variables to (pz, px, delta) coordinates."""
        return DeltaCoords(self.qx + self.qy, self.qy + self.qz, self.qz - self.qy)

    def swap_xz(self) -> "PauliChannelParams":
        """Exchange the roles of bit and phase errors (X <-> Z conjugation)."""
        return PauliChannelParams(self.qz, self.qy, self.qx)

    def to_dict(self) -> dict[str, float]:
        return {
            "qx": self.qx,
            "qy": self.qy,
            "qz": self.qz,
            "pz": self.pz,
            "px": self.px,
            "delta": self.qz - self.qy,
        }


@dataclass(frozen=True)
class DeltaCoords:
    """The (pz, px, delta) reparametrization of a Pauli channel.

    All three values are stored redundantly rather than recomputed so that
    both coordinate systems can be evolved independently and cross-checked.
    A valid instance always corresponds to a valid channel: the recovered
    rates ``qy = (px - delta)/2``, ``qz = (px + delta)/2``, ``qx = pz - qy``
    and the implied ``qi`` must all be non-negative (within ``SIMPLEX_TOL``).
    """

    pz: float
    px: float
    delta: float

    def __post_init__(self) -> None:
        for name in ("pz", "px", "delta"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
        if abs(self.delta) > self.px + SIMPLEX_TOL:
            raise ValueError(
                f"|delta| must be <= px, got delta={self.delta}, px={self.px}"
            )
        qy = 0.5 * (self.px - self.delta)
        qz = 0.5 * (self.px + self.delta)
        qx = self.pz - qy
        if qx < -SIMPLEX_TOL:
            raise ValueError(
                f"recovered qx = pz - (px - delta)/2 must be >= 0, got {qx}"
            )
        qi = 1.0 - self.pz - qz
        if qi < -SIMPLEX_TOL:
            raise ValueError(
                f"recovered qi = 1 - pz - (px + delta)/2 must be >= 0, got {qi}"
            )

    def to_channel(self) -> PauliChannelParams:
        """Invert the change of variables back to (qx, qy, qz)."""
        qy = 0.5 * (self.px - self.delta)
        qz = 0.5 * (self.px + self.delta)
        qx = self.pz - qy
        return PauliChannelParams(qx, qy, qz)

    def to_dict(self) -> dict[str, float]:
        return {"pz": self.pz, "px": self.px, "delta": self.delta}


def bb84_family(p: float, a: float) -> PauliChannelParams:
    """One-parameter channel family consistent with a BB84 error estimate.

    BB84 statistics reveal only the bit and phase error rates, which are
    equal (= p) by the basis symmetry of the protocol; the Y-error rate
    ``a`` is a free parameter.  Returns the channel (p - a, a, p - a).
    """
    if not 0.0 <= a <= p + SIMPLEX_TOL:
        raise ValueError(f"need 0 <= a <= p, got a={a}, p={p}")
    if p > 0.5 + SIMPLEX_TOL:
        raise ValueError(f"need p <= 1/2, got p={p}")
    a = min(a, p)
    return PauliChannelParams(p - a, a, p - a)


def sixstate_channel(p: float) -> PauliChannelParams:
    """Depolarizing channel consistent with a six-state error estimate.

    Full tomographic symmetry pins qx = qy = qz = p/2, where p is the
    observed bit error rate; valid for p up to 2/3.
    """
    if not 0.0 <= p <= 2.0 / 3.0 + SIMPLEX_TOL:
        raise ValueError(f"need 0 <= p <= 2/3, got p={p}")
    return PauliChannelParams(0.5 * p, 0.5 * p, 0.5 * p)
