"""Secret key rate and the end-to-end distillation pipeline."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

from .core import BellOutcome, ProtocolConfig, binary_entropy
from .datasets import CountsDataset, GainsTable, IncompleteDatasetError, gains_from_counts
from .decoy import DEFAULT_K, BoundsError, ZeroYieldError, estimate_bounds
from .finitesize import FluctuationPolicy, loosen


class DistillationError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


@dataclass(frozen=True)
class KeyRateInputs:
    p_z: float
    flux_s_a: float
    flux_s_b: float
    q_zz: float  # Z-basis gain per clock cycle
    e_zz: float
    y11_lower: float
    e11_upper: float
    f_ec: float = 1.16
    clock_hz: float = 1e9

    def __post_init__(self):
        for name in ("p_z", "q_zz", "e_zz", "y11_lower", "e11_upper"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if not (self.flux_s_a > 0 and self.flux_s_b > 0):
            raise ValueError("signal fluxes must be positive")


@dataclass(frozen=True)
class KeyRate:
    per_clock: float
    bits_per_s: float
    single_photon_term: float  # per clock, before subtraction
    ec_term: float  # per clock
    clamped: bool


def key_rate(inp: KeyRateInputs) -> KeyRate:
    """R = p_z^2 (s_a e^-s_a)(s_b e^-s_b) y11 [1 - h(e11)] - f_ec Q_zz h(E_zz), floored at 0."""
    p11 = inp.flux_s_a * math.exp(-inp.flux_s_a) * inp.flux_s_b * math.exp(-inp.flux_s_b)
    single = inp.p_z**2 * p11 * inp.y11_lower * (1.0 - binary_entropy(inp.e11_upper))
    ec = inp.f_ec * inp.q_zz * binary_entropy(inp.e_zz)
    raw = single - ec
    r = max(raw, 0.0)
    return KeyRate(r, r * inp.clock_hz, single, ec, raw < 0)


@dataclass
class StateReport:
    bell: str  # "singlet", "triplet" or "merged"
    rate_bits_s: float = 0.0
    q_zz: float | None = None
    q_zz_conditional: float | None = None
    e_zz: float | None = None
    y11_lower: float | None = None
    e11_upper: float | None = None
    single_photon_term: float | None = None
    ec_term: float | None = None
    bounds: dict | None = None
    gains: dict = field(default_factory=dict)
    note: str | None = None


@dataclass
class KeyRateReport:
    channel_label: str
    attenuation_db: float
    mode: str  # "asymptotic" or "finite_size"
    merged: bool
    rate_total: float
    rate_singlet: float | None
    rate_triplet: float | None
    states: list[StateReport]
    parameters: dict

    def to_dict(self) -> dict:
        return asdict(self)

    def summary(self) -> str:
        lines = [f"{self.channel_label}  ({self.mode}, {'merged' if self.merged else 'per Bell state'})"]
        for s in self.states:
            if s.y11_lower is None:
                lines.append(f"  {s.bell:8s} rate {s.rate_bits_s / 1e3:10.3f} kbit/s  ({s.note})")
                continue
            e11 = "n/a" if s.e11_upper is None else f"{s.e11_upper:.4f}"
            lines.append(
                f"  {s.bell:8s} rate {s.rate_bits_s / 1e3:10.3f} kbit/s  y11 >= {s.y11_lower:.5g}  "
                f"e11 <= {e11}  E_ZZ = {s.e_zz:.4%}"
            )
            if s.note:
                lines.append(f"           {s.note}")
        lines.append(f"  total    rate {self.rate_total / 1e3:10.3f} kbit/s")
        return "\n".join(lines)


def _gains_summary(g: GainsTable) -> dict:
    out = {}
    for (a, b), e in sorted(g.x.items()):
        out[a + b] = {"Q": e.gain, "E": e.error_rate, "N": e.pairs_emitted}
    return out


def _distill_state(gains: GainsTable, label: str, protocol: ProtocolConfig, fluct, K, relax) -> StateReport:
    rep = StateReport(bell=label, gains=_gains_summary(gains))
    z = gains.z
    if z is None:
        raise DistillationError("gains", f"{gains.channel_label}: no ZZ record for {label}")
    if z.error_rate is None:
        raise DistillationError("gains", f"{gains.channel_label}: no ZZ coincidences for {label}")
    rep.q_zz_conditional = z.gain
    rep.q_zz = z.gain * protocol.p_z**2
    rep.e_zz = z.error_rate
    if fluct is not None:
        gains = loosen(gains, fluct)
    try:
        bounds = estimate_bounds(gains, K, fluct, relax)
    except ZeroYieldError:
        rep.y11_lower = 0.0
        rep.note = "single-photon yield bound is zero; rate set to 0"
        return rep
    except BoundsError as exc:
        raise DistillationError(exc.stage, str(exc)) from exc
    rep.bounds = bounds.as_dict()
    rep.y11_lower = bounds.y11_lower
    rep.e11_upper = bounds.e11_upper
    if bounds.yield_relaxation_sigmas or bounds.error_relaxation_sigmas:
        rep.note = (
            f"constraints widened by {bounds.yield_relaxation_sigmas:.3g} sigma (yields) and "
            f"{bounds.error_relaxation_sigmas:.3g} sigma (errors) to reach feasibility"
        )
    rate = key_rate(
        KeyRateInputs(
            p_z=protocol.p_z,
            flux_s_a=z.flux_a,
            flux_s_b=z.flux_b,
            q_zz=rep.q_zz,
            e_zz=rep.e_zz,
            y11_lower=bounds.y11_lower,
            e11_upper=bounds.e11_upper,
            f_ec=protocol.f_ec,
            clock_hz=protocol.clock_hz,
        )
    )
    rep.rate_bits_s = rate.bits_per_s
    rep.single_photon_term = rate.single_photon_term
    rep.ec_term = rate.ec_term
    return rep


def distill(
    data: CountsDataset,
    merge_bell: bool | None = None,
    fluct: FluctuationPolicy | None = None,
    K: int = DEFAULT_K,
    protocol: ProtocolConfig | None = None,
    relax: bool = True,
) -> KeyRateReport:
    """Counts to key rate: gains, decoy bounds, then the rate per Bell state.

    ``merge_bell=None`` merges singlet and triplet data exactly when a
    fluctuation policy is given. ``protocol`` supplies p_z, f_ec and the
    clock; fluxes are taken from the dataset itself.
    """
    protocol = protocol or ProtocolConfig()
    if merge_bell is None:
        merge_bell = fluct is not None
    try:
        data.check_complete()
    except IncompleteDatasetError as exc:
        raise DistillationError("dataset", str(exc)) from exc

    states = []
    try:
        if merge_bell or data.bell_states == [None]:
            tables = [("merged", gains_from_counts(data, merge_bell=True))]
        else:
            tables = [(b.value, gains_from_counts(data, bell=b)) for b in data.bell_states]
    except (IncompleteDatasetError, ValueError) as exc:
        raise DistillationError("gains", str(exc)) from exc
    for label, g in tables:
        states.append(_distill_state(g, label, protocol, fluct, K, relax))

    by_label = {s.bell: s.rate_bits_s for s in states}
    merged = "merged" in by_label
    params = {
        "K": K,
        "p_z": protocol.p_z,
        "f_ec": protocol.f_ec,
        "clock_hz": protocol.clock_hz,
        "q_zz_normalization": "per clock: C / N_zz * p_z^2",
        "fluctuation": fluct.as_dict() if fluct else None,
        "relax": relax,
    }
    return KeyRateReport(
        channel_label=data.channel_label,
        attenuation_db=data.attenuation_db,
        mode="finite_size" if fluct is not None else "asymptotic",
        merged=merged,
        rate_total=sum(by_label.values()),
        rate_singlet=by_label.get(BellOutcome.SINGLET.value),
        rate_triplet=by_label.get(BellOutcome.TRIPLET.value),
        states=states,
        parameters=params,
    )
