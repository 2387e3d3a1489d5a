"""Protocol-level types and pure rules shared by the rest of the package.

Intensity classes, polarizations, Bell-outcome grouping of Charlie's click
patterns, sifting, and two small math helpers (binary entropy, Poisson pmf).
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field


class IntensityClass(str, enum.Enum):
    S = "s"
    U = "u"
    V = "v"
    W = "w"

    @property
    def basis(self) -> "Basis":
        return Basis.Z if self is IntensityClass.S else Basis.X


DECOY_CLASSES = (IntensityClass.U, IntensityClass.V, IntensityClass.W)


class Basis(str, enum.Enum):
    Z = "Z"
    X = "X"


class Polarization(str, enum.Enum):
    H = "H"
    V = "V"
    D = "D"
    A = "A"

    @property
    def basis(self) -> Basis:
        return Basis.Z if self in (Polarization.H, Polarization.V) else Basis.X

    @property
    def bit(self) -> int:
        return 0 if self in (Polarization.H, Polarization.D) else 1

    @classmethod
    def for_bit(cls, basis: Basis, bit: int) -> "Polarization":
        if basis is Basis.Z:
            return cls.V if bit else cls.H
        return cls.A if bit else cls.D


class BellOutcome(str, enum.Enum):
    SINGLET = "singlet"
    TRIPLET = "triplet"
    NO_EVENT = "none"


DETECTORS = ("cH", "cV", "dH", "dV")

# Orthogonal-polarization detector pairs, in the order they are reported.
_PAIR_OUTCOMES = (
    (("cH", "cV"), BellOutcome.TRIPLET),
    (("cH", "dV"), BellOutcome.SINGLET),
    (("dH", "cV"), BellOutcome.SINGLET),
    (("dH", "dV"), BellOutcome.TRIPLET),
)
ORTHOGONAL_PAIRS = tuple(p for p, _ in _PAIR_OUTCOMES)
PAIR_OUTCOME = dict(_PAIR_OUTCOMES)


def coincidence_pairs(clicks) -> list[tuple[tuple[str, str], BellOutcome]]:
    """Orthogonal detector pairs present in ``clicks`` with their Bell label."""
    clicks = set(clicks)
    unknown = clicks - set(DETECTORS)
    if unknown:
        raise ValueError(f"unknown detector labels: {sorted(unknown)}")
    return [(pair, out) for pair, out in _PAIR_OUTCOMES if clicks.issuperset(pair)]


def classify_coincidence(clicks) -> list[BellOutcome]:
    """Expand a click pattern into one Bell outcome per orthogonal pair.

    Same-polarization pairs (cH/dH, cV/dV) contribute nothing, so a single
    click or an all-H pattern yields an empty list.

    >>> classify_coincidence({"cH", "dV"})
    [<BellOutcome.SINGLET: 'singlet'>]
    """
    return [out for _, out in coincidence_pairs(clicks)]


def sift_and_flip(basis_a: Basis, basis_b: Basis, outcome: BellOutcome, bit_b: int) -> int | None:
    """Bob's sifted bit, or ``None`` when the bases differ.

    Bob flips every bit except for matched-X triplet events.
    """
    if outcome is BellOutcome.NO_EVENT:
        raise ValueError("sifting requires a successful Bell outcome")
    if bit_b not in (0, 1):
        raise ValueError(f"bit must be 0 or 1, got {bit_b!r}")
    if basis_a is not basis_b:
        return None
    if basis_a is Basis.X and outcome is BellOutcome.TRIPLET:
        return bit_b
    return 1 - bit_b


def is_error(pol_a: Polarization, pol_b: Polarization, outcome: BellOutcome) -> bool:
    """True when a matched-basis event decodes to unequal bits after sifting."""
    sifted = sift_and_flip(pol_a.basis, pol_b.basis, outcome, pol_b.bit)
    if sifted is None:
        raise ValueError("error flag is only defined for matched bases")
    return sifted != pol_a.bit


def binary_entropy(p: float) -> float:
    """Binary entropy in bits, with h(0) = h(1) = 0."""
    if not 0.0 <= p <= 1.0 or math.isnan(p):
        raise ValueError(f"binary entropy needs p in [0, 1], got {p!r}")
    if p == 0.0 or p == 1.0:
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


def poisson_pmf(n: int, mu: float) -> float:
    """Probability that a coherent pulse of mean ``mu`` holds ``n`` photons."""
    if n < 0 or int(n) != n:
        raise ValueError(f"photon number must be a nonnegative integer, got {n!r}")
    if mu < 0 or not math.isfinite(mu):
        raise ValueError(f"flux must be finite and >= 0, got {mu!r}")
    if mu == 0.0:
        return 1.0 if n == 0 else 0.0
    return math.exp(n * math.log(mu) - mu - math.lgamma(n + 1))


@dataclass(frozen=True)
class ClassFluxes:
    """Mean photon number per pulse for each intensity class of one user."""

    s: float
    u: float
    v: float
    w: float

    def __post_init__(self):
        vals = (self.s, self.u, self.v, self.w)
        if not all(math.isfinite(x) and x >= 0 for x in vals):
            raise ValueError(f"fluxes must be finite and >= 0: {vals}")
        if not 0 < self.s <= 1:
            raise ValueError(f"signal flux must lie in (0, 1], got {self.s}")
        if not self.w <= self.v <= self.u < self.s:
            raise ValueError(f"fluxes must satisfy w <= v <= u < s: {vals}")

    def __getitem__(self, cls: IntensityClass | str) -> float:
        return getattr(self, IntensityClass(cls).value)


# 45/48 for the signal class; the three decoy classes share the remainder.
DEFAULT_P_S = 45 / 48


@dataclass(frozen=True)
class ProtocolConfig:
    fluxes_a: ClassFluxes = field(default_factory=lambda: ClassFluxes(0.7, 0.01, 0.002, 0.001))
    fluxes_b: ClassFluxes = field(default_factory=lambda: ClassFluxes(0.7, 0.01, 0.002, 0.001))
    p_s: float = DEFAULT_P_S
    f_ec: float = 1.16
    clock_hz: float = 1e9

    def __post_init__(self):
        if not 0 < self.p_s < 1:
            raise ValueError(f"p_s must lie in (0, 1), got {self.p_s}")
        if not self.f_ec > 1:
            raise ValueError(f"f_ec must exceed 1, got {self.f_ec}")
        if not self.clock_hz > 0:
            raise ValueError(f"clock must be positive, got {self.clock_hz}")

    @property
    def p_z(self) -> float:
        return self.p_s

    @property
    def p_x(self) -> float:
        return 1.0 - self.p_s

    def class_probability(self, cls: IntensityClass | str) -> float:
        cls = IntensityClass(cls)
        return self.p_s if cls is IntensityClass.S else self.p_x / 3.0

    def flux(self, user: str, cls: IntensityClass | str) -> float:
        return (self.fluxes_a if user == "a" else self.fluxes_b)[cls]


def all_round_types():
    """Every (class, polarization) choice of one user with its basis-consistent pol."""
    for cls in IntensityClass:
        basis = cls.basis
        for bit in (0, 1):
            yield cls, Polarization.for_bit(basis, bit)


def round_type_pairs():
    return itertools.product(list(all_round_types()), repeat=2)
