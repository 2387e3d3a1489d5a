"""Gaussian n-sigma treatment of statistical fluctuations in the decoy constraints."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .datasets import CountRecord, CountsDataset, GainEntry, GainsTable, IncompleteDatasetError

DEFAULT_CONSTRAINT_COUNT = 21


def epsilon_from_sigmas(n: float) -> float:
    """Two-sided Gaussian tail 1 - erf(n / sqrt(2)), evaluated through erfc."""
    if n < 0 or math.isnan(n):
        raise ValueError(f"sigma count must be >= 0, got {n!r}")
    return math.erfc(n / math.sqrt(2.0))


def fluctuation(x: float, n: float) -> float:
    """Relative fluctuation n / sqrt(x) of a sample of size x."""
    if not x > 0:
        raise ValueError(f"sample size must be positive, got {x!r}")
    return n / math.sqrt(x)


@dataclass(frozen=True)
class FluctuationPolicy:
    n_sigmas: float = 7.0
    constraint_count: int = DEFAULT_CONSTRAINT_COUNT

    def __post_init__(self):
        if self.n_sigmas < 0:
            raise ValueError("n_sigmas must be >= 0")
        if self.constraint_count < 1:
            raise ValueError("constraint_count must be >= 1")

    @property
    def epsilon(self) -> float:
        return epsilon_from_sigmas(self.n_sigmas)

    @property
    def total_budget(self) -> float:
        return self.constraint_count * self.epsilon

    def as_dict(self) -> dict:
        return {
            "n_sigmas": self.n_sigmas,
            "epsilon": self.epsilon,
            "constraint_count": self.constraint_count,
            "total_budget": self.total_budget,
            "gain_sample": "N*Q",
            "error_sample": "N*Q*E",
        }


def _factors(sample: float, n: float) -> tuple[float, float] | None:
    if n == 0:
        return 1.0, 1.0
    if sample <= 0:
        return None
    f = fluctuation(sample, n)
    return 1.0 + f, max(0.0, 1.0 - f)


def loosen(gains: GainsTable, policy: FluctuationPolicy) -> GainsTable:
    """Attach [1 +/- F] factors to every gain and error-gain.

    Gains fluctuate with sample size N*Q (coincidences), error-gains with
    N*Q*E (error coincidences). An empty sample leaves its factor undefined;
    such records are listed in the metadata and their constraints dropped
    downstream.
    """
    n = policy.n_sigmas
    undefined: list[str] = []

    def apply(e: GainEntry) -> GainEntry:
        g = _factors(e.pairs_emitted * e.gain, n)
        if g is None:
            undefined.append(f"{e.pair[0]}{e.pair[1]}:gain")
            g = (math.inf, 0.0)
        err = None
        if e.error_rate is not None:
            err = _factors(e.pairs_emitted * e.gain * e.error_rate, n)
        if err is None:
            undefined.append(f"{e.pair[0]}{e.pair[1]}:error")
            err = (math.inf, 0.0)
        return replace(e, gain_upper=g[0], gain_lower=g[1], error_upper=err[0], error_lower=err[1])

    out = gains.replace_entries(apply)
    meta = policy.as_dict()
    meta["undefined"] = undefined
    out.fluctuation = meta
    return out


def merge_bell(data: CountsDataset) -> CountsDataset:
    """Add singlet and triplet tallies per class pair; pairs_emitted is shared."""
    groups: dict[tuple, list[CountRecord]] = {}
    for rec in data.records:
        if rec.bell is None:
            raise ValueError("dataset is already merged")
        groups.setdefault((rec.basis_pair, rec.class_a, rec.class_b), []).append(rec)
    merged = []
    for key, recs in groups.items():
        if len(recs) != 2:
            raise IncompleteDatasetError(f"{data.channel_label}: missing Bell partner for {key[0]} {key[1].value}{key[2].value}")
        a, b = recs
        if a.pairs_emitted != b.pairs_emitted:
            raise ValueError(f"{data.channel_label}: singlet and triplet disagree on pairs_emitted for {key}")
        merged.append(
            CountRecord(
                basis_pair=a.basis_pair,
                class_a=a.class_a,
                class_b=a.class_b,
                bell=None,
                coincidences=a.coincidences + b.coincidences,
                error_coincidences=a.error_coincidences + b.error_coincidences,
                pairs_emitted=a.pairs_emitted,
                flux_a=a.flux_a,
                flux_b=a.flux_b,
            )
        )
    return CountsDataset(data.channel_label, data.attenuation_db, merged)
