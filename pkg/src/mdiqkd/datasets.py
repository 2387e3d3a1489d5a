"""Count tallies and the gains derived from them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .core import DECOY_CLASSES, BellOutcome, IntensityClass


class IncompleteDatasetError(ValueError):
    """A record required by the estimation is missing."""


@dataclass(frozen=True)
class CountRecord:
    basis_pair: str  # "ZZ" or "XX"
    class_a: IntensityClass
    class_b: IntensityClass
    bell: BellOutcome | None  # None once singlet and triplet are merged
    coincidences: float
    error_coincidences: float
    pairs_emitted: float
    flux_a: float
    flux_b: float

    def __post_init__(self):
        object.__setattr__(self, "class_a", IntensityClass(self.class_a))
        object.__setattr__(self, "class_b", IntensityClass(self.class_b))
        if self.bell is not None:
            object.__setattr__(self, "bell", BellOutcome(self.bell))
        if self.basis_pair not in ("ZZ", "XX"):
            raise ValueError(f"basis pair must be ZZ or XX, got {self.basis_pair!r}")
        expect_z = self.basis_pair == "ZZ"
        for cls in (self.class_a, self.class_b):
            if (cls is IntensityClass.S) != expect_z:
                raise ValueError(f"class {cls.value} does not belong to basis pair {self.basis_pair}")
        if self.coincidences < 0 or self.error_coincidences < 0:
            raise ValueError(f"negative counts in {self.key}")
        if self.error_coincidences > self.coincidences * (1 + 1e-12):
            raise ValueError(f"more errors than coincidences in {self.key}")
        if not self.pairs_emitted > 0:
            raise ValueError(f"pairs_emitted must be positive in {self.key}")
        if min(self.flux_a, self.flux_b) < 0:
            raise ValueError(f"negative flux in {self.key}")

    @property
    def key(self):
        bell = self.bell.value if self.bell else "merged"
        return (self.basis_pair, self.class_a.value, self.class_b.value, bell)

    @property
    def error_rate(self) -> float | None:
        return self.error_coincidences / self.coincidences if self.coincidences > 0 else None


@dataclass
class CountsDataset:
    channel_label: str
    attenuation_db: float
    records: list[CountRecord] = field(default_factory=list)

    def __post_init__(self):
        seen = set()
        for rec in self.records:
            if rec.key in seen:
                raise ValueError(f"duplicate record {rec.key}")
            seen.add(rec.key)

    @property
    def bell_states(self) -> list[BellOutcome | None]:
        states = []
        for rec in self.records:
            if rec.bell not in states:
                states.append(rec.bell)
        return states

    def select(self, bell: BellOutcome | None) -> list[CountRecord]:
        return [r for r in self.records if r.bell == bell]

    def record(self, basis_pair, class_a, class_b, bell) -> CountRecord:
        key = (basis_pair, IntensityClass(class_a).value, IntensityClass(class_b).value,
               BellOutcome(bell).value if bell else "merged")
        for rec in self.records:
            if rec.key == key:
                return rec
        raise IncompleteDatasetError(f"{self.channel_label}: missing record {key}")

    def check_complete(self):
        """Every Bell state needs its ZZ (s,s) record and all nine XX pairs."""
        for bell in self.bell_states:
            self.record("ZZ", "s", "s", bell)
            for a in DECOY_CLASSES:
                for b in DECOY_CLASSES:
                    self.record("XX", a, b, bell)


@dataclass(frozen=True)
class GainEntry:
    class_a: IntensityClass
    class_b: IntensityClass
    gain: float
    error_rate: float | None
    pairs_emitted: float
    coincidences: float
    error_coincidences: float
    flux_a: float
    flux_b: float
    # multiplicative loosening applied when the entry feeds an upper / lower
    # bound; 1.0 in the asymptotic case
    gain_upper: float = 1.0
    gain_lower: float = 1.0
    error_upper: float = 1.0
    error_lower: float = 1.0

    @property
    def pair(self) -> tuple[str, str]:
        return (self.class_a.value, self.class_b.value)

    @property
    def error_gain(self) -> float | None:
        """Gain of error coincidences, Q * E."""
        return None if self.error_rate is None else self.gain * self.error_rate


@dataclass
class GainsTable:
    channel_label: str
    bell: BellOutcome | None
    x: dict[tuple[str, str], GainEntry]
    z: GainEntry | None = None
    fluctuation: dict | None = None  # loosening metadata, None if asymptotic

    def entry(self, a, b) -> GainEntry:
        key = (IntensityClass(a).value, IntensityClass(b).value)
        try:
            return self.x[key]
        except KeyError:
            raise IncompleteDatasetError(f"{self.channel_label}: no XX gain for class pair {key}") from None

    def replace_entries(self, fn, **meta) -> "GainsTable":
        x = {k: fn(e) for k, e in self.x.items()}
        z = fn(self.z) if self.z is not None else None
        return replace(self, x=x, z=z, fluctuation=meta or self.fluctuation)


def _entry(rec: CountRecord) -> GainEntry:
    return GainEntry(
        class_a=rec.class_a,
        class_b=rec.class_b,
        gain=rec.coincidences / rec.pairs_emitted,
        error_rate=rec.error_rate,
        pairs_emitted=rec.pairs_emitted,
        coincidences=rec.coincidences,
        error_coincidences=rec.error_coincidences,
        flux_a=rec.flux_a,
        flux_b=rec.flux_b,
    )


def gains_from_counts(data: CountsDataset, merge_bell: bool = False, bell: BellOutcome | None = None) -> GainsTable:
    """Gains Q = C/N and error rates E = C_err/C per class pair.

    With ``merge_bell`` the singlet and triplet tallies of each class pair
    are added before dividing. Otherwise ``bell`` picks one state; it may be
    omitted when the dataset holds a single state (e.g. already merged).
    """
    if merge_bell:
        from .finitesize import merge_bell as _merge

        if data.bell_states != [None]:
            data = _merge(data)
        bell = None
    elif bell is None:
        states = data.bell_states
        if len(states) != 1:
            raise ValueError("dataset holds several Bell states; pass bell= or merge_bell=True")
        bell = states[0]
    else:
        bell = BellOutcome(bell)
    recs = data.select(bell)
    if not recs:
        raise IncompleteDatasetError(f"{data.channel_label}: no records for Bell state {bell}")
    x = {}
    z = None
    for rec in recs:
        if rec.basis_pair == "XX":
            x[(rec.class_a.value, rec.class_b.value)] = _entry(rec)
        else:
            z = _entry(rec)
    return GainsTable(data.channel_label, bell, x, z)


def emission_probability(flux_a: float, flux_b: float) -> float:
    """Probability that both users emit exactly one photon."""
    return flux_a * math.exp(-flux_a) * flux_b * math.exp(-flux_b)
