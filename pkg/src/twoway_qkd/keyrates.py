"""Entropy utilities, secret-key-rate formulas, and reference bounds.

Rates are reported per sifted bit so that one-way schemes, pre-shared-key
reconciliation schemes, and two-way distillation pipelines are directly
comparable.  Negative rates are meaningful: they mark the regime where a
scheme consumes more secret material than it produces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable

if TYPE_CHECKING:  # pragma: no cover
    from .convergence import Trajectory


class NumericalError(RuntimeError):
    """A numeric search failed (no sign change, broken bracket, ...)."""


def binary_entropy(x: float) -> float:
    """Shannon entropy h(x) = -x log2 x - (1-x) log2 (1-x).

    Endpoints are defined by continuity: h(0) = h(1) = 0.  Inputs outside
    [0, 1] by more than 1e-12 raise; smaller excursions are clamped.
    """
    if not -1e-12 <= x <= 1.0 + 1e-12:
        raise ValueError(f"binary_entropy argument must lie in [0, 1], got {x}")
    if x <= 0.0 or x >= 1.0:
        return 0.0
    return -(x * math.log2(x) + (1.0 - x) * math.log2(1.0 - x))


def one_minus_binary_entropy(x: float) -> float:
    """1 - h(x), accurate even where h(x) is within round-off of 1.

    Near x = 1/2 the direct subtraction cancels catastrophically; there the
    identity 1 - h(1/2 - u) = [ln(1 - 4u^2)/2 + u (ln(1+2u) - ln(1-2u))]/ln 2
    is evaluated with log1p instead.  Iterated distillation maps park error
    rates within 1e-16 of 1/2, where this distinction decides convergence.
    """
    u = 0.5 - x
    if abs(u) >= 0.25:
        return 1.0 - binary_entropy(x)
    if not -1e-12 <= x <= 1.0 + 1e-12:  # only NaN reaches here with |u| < 0.25
        raise ValueError(f"argument must lie in [0, 1], got {x}")
    return (
        0.5 * math.log1p(-4.0 * u * u) + u * (math.log1p(2.0 * u) - math.log1p(-2.0 * u))
    ) / math.log(2.0)


@dataclass(frozen=True)
class KeyRateReport:
    """Net key rate of a post-processing scheme at bit error rate ``p``.

    ``components`` holds the named sub-terms the rate is assembled from;
    the reported rate is reproducible from them to 1e-12.
    """

    scheme: str
    p: float
    rate: float
    components: dict[str, float] = field(default_factory=dict)
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "p": self.p,
            "rate": self.rate,
            "components": dict(self.components),
            "note": self.note,
        }


def shor_preskill_rate(p: float) -> KeyRateReport:
    """One-way rate 1 - 2 h(p): h(p) for error correction, h(p) for privacy
    amplification.  Crosses zero near p = 11.0%."""
    if not 0.0 <= p <= 0.5:
        raise ValueError(f"need 0 <= p <= 1/2, got p={p}")
    hp = binary_entropy(p)
    # (1 - h) - h: the same evaluation as the symmetric CSS key fraction,
    # so the two agree bit for bit.
    return KeyRateReport(
        scheme="shor_preskill",
        p=p,
        rate=one_minus_binary_entropy(p) - hp,
        components={"error_correction": hp, "privacy_amplification": hp},
        note="per sifted bit",
    )


def inamori_bb84_rate(p: float) -> KeyRateReport:
    """BB84 rate for the pre-shared-key reconciliation scheme.

    A fraction h(p) of pre-shared key pays for the encrypted syndrome,
    post-selecting agreeing bits keeps a fraction 1 - p, and the
    post-selected phase error rate p / (1 - p) sets the privacy
    amplification cost:  rate = (1-p) [1 - h(p/(1-p))] - h(p).
    """
    if not 0.0 <= p < 0.5:
        raise ValueError(f"need 0 <= p < 1/2, got p={p}")
    sacrificed = binary_entropy(p)
    reconciled = 1.0 - p
    pa_fraction = binary_entropy(p / (1.0 - p))
    return KeyRateReport(
        scheme="inamori_bb84",
        p=p,
        rate=reconciled * (1.0 - pa_fraction) - sacrificed,
        components={
            "sacrificed_fraction": sacrificed,
            "reconciled_fraction": reconciled,
            "pa_fraction": pa_fraction,
        },
        note="per sifted bit; rate = reconciled * (1 - pa) - sacrificed",
    )


def inamori_sixstate_rate(p: float) -> KeyRateReport:
    """Six-state variant of the pre-shared-key reconciliation scheme.

    The extra measurement symmetry halves the post-selected phase error
    rate to p / (2 (1 - p)):  rate = (1-p) [1 - h(p/(2(1-p)))] - h(p).
    Positive up to roughly p = 12.6%.
    """
    if not 0.0 <= p < 2.0 / 3.0:
        raise ValueError(f"need 0 <= p < 2/3, got p={p}")
    sacrificed = binary_entropy(p)
    reconciled = 1.0 - p
    pa_fraction = binary_entropy(p / (2.0 * (1.0 - p)))
    return KeyRateReport(
        scheme="inamori_sixstate",
        p=p,
        rate=reconciled * (1.0 - pa_fraction) - sacrificed,
        components={
            "sacrificed_fraction": sacrificed,
            "reconciled_fraction": reconciled,
            "pa_fraction": pa_fraction,
        },
        note="per sifted bit; rate = reconciled * (1 - pa) - sacrificed",
    )


def rate_threshold(
    rate_fn: Callable[[float], "KeyRateReport | float"],
    upper: float = 0.45,
    tol: float = 1e-6,
) -> float:
    """Largest tolerable bit error rate of a rate formula (root of rate = 0).

    Scans (0, upper] for a sign change, then bisects to ``tol``.  Requires
    a positive rate at p = 0 and a non-positive value somewhere in range.
    """

    def value(p: float) -> float:
        r = rate_fn(p)
        return r.rate if isinstance(r, KeyRateReport) else float(r)

    if value(0.0) <= 0.0:
        raise NumericalError("rate is not positive at p = 0")
    lo = 0.0
    hi = None
    for k in range(1, 65):
        p = upper * k / 64.0
        if value(p) <= 0.0:
            hi = p
            break
        lo = p
    if hi is None:
        raise NumericalError(f"rate has no sign change on (0, {upper}]")
    for _ in range(60):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if value(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def two_way_net_rate(t: "Trajectory") -> KeyRateReport:
    """Net key per sifted bit entering the first distillation round.

    Multiplies the trajectory's cumulative yield by the final CSS key
    fraction.  Only meaningful for converged trajectories; the sacrifice of
    test bits is a finite-size effect and is excluded.
    """
    if not t.converged:
        raise ValueError("trajectory did not converge; no key is produced")
    rate = t.cumulative_yield * max(t.css_rate, 0.0)
    return KeyRateReport(
        scheme="two_way_epp",
        p=t.initial.pz,
        rate=rate,
        components={
            "cumulative_yield": t.cumulative_yield,
            "css_rate": t.css_rate,
        },
        note=(
            "per sifted bit entering round 1; rate = cumulative_yield * "
            "max(css_rate, 0); test-bit sacrifice excluded"
        ),
    )


@dataclass(frozen=True)
class RateBound:
    upper: float
    lower: float


@dataclass(frozen=True)
class ProtocolBounds:
    one_way: RateBound
    two_way: RateBound


@dataclass(frozen=True)
class BoundsTable:
    """Known bit-error-rate bounds for BB84 and the six-state scheme.

    Upper bounds come from explicit attacks (approximate cloning for
    one-way post-processing, intercept-resend for two-way); lower bounds
    from protocols proved secure.
    """

    bb84: ProtocolBounds
    sixstate: ProtocolBounds

    def to_dict(self) -> dict:
        return {
            name: {
                "one_way": {"upper": pb.one_way.upper, "lower": pb.one_way.lower},
                "two_way": {"upper": pb.two_way.upper, "lower": pb.two_way.lower},
            }
            for name, pb in (("bb84", self.bb84), ("sixstate", self.sixstate))
        }

    def as_text(self) -> str:
        lines = []
        for title, pb in (("BB84", self.bb84), ("Six-state scheme", self.sixstate)):
            lines.append(title.center(38))
            lines.append(f"{'':14}{'one-way':>10}{'two-way':>10}")
            lines.append(
                f"{'Upper bound':14}{pb.one_way.upper:>10.4f}{pb.two_way.upper:>10.4f}"
            )
            lines.append(
                f"{'Lower bound':14}{pb.one_way.lower:>10.4f}{pb.two_way.lower:>10.4f}"
            )
            lines.append("")
        return "\n".join(lines).rstrip() + "\n"


def bounds_table() -> BoundsTable:
    """Reference error-rate bounds for one-way and two-way post-processing."""
    return BoundsTable(
        bb84=ProtocolBounds(
            one_way=RateBound(upper=0.146, lower=0.110),
            two_way=RateBound(upper=0.25, lower=0.189),
        ),
        sixstate=ProtocolBounds(
            one_way=RateBound(upper=1.0 / 6.0, lower=0.127),
            two_way=RateBound(upper=1.0 / 3.0, lower=0.264),
        ),
    )
