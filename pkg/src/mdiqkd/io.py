"""CSV datasets, bundled measurement data, and plot-ready CSV output."""

from __future__ import annotations

import csv
import io
import math
from importlib import resources
from pathlib import Path

from .core import BellOutcome
from .datasets import CountRecord, CountsDataset

COLUMNS = (
    "channel_label",
    "attenuation_db",
    "basis_pair",
    "class_a",
    "class_b",
    "bell",
    "coincidences",
    "error_rate_percent",
    "pairs_emitted",
    "flux_a",
    "flux_b",
)

DB_PER_KM = 0.2
BUNDLED_PREFIX = "table2-4_"


class DatasetFormatError(ValueError):
    """A dataset file could not be parsed; the message names the line."""


def _number(text: str, what: str, lineno: int) -> float:
    try:
        val = float(text)
    except ValueError:
        raise DatasetFormatError(f"line {lineno}: {what} is not a number: {text!r}") from None
    if not math.isfinite(val):
        raise DatasetFormatError(f"line {lineno}: {what} must be finite, got {text!r}")
    return val


def _count(val: float) -> float:
    return int(val) if val == int(val) else val


def parse_dataset(text: str, source: str = "<string>") -> CountsDataset:
    reader = csv.reader(io.StringIO(text), skipinitialspace=True)
    rows = [(i + 1, r) for i, r in enumerate(reader) if r and any(f.strip() for f in r)]
    if not rows:
        raise DatasetFormatError(f"{source}: line 1: empty file")
    lineno, header = rows[0]
    header = [h.strip() for h in header]
    if tuple(header) != COLUMNS:
        raise DatasetFormatError(f"{source}: line {lineno}: header must be {','.join(COLUMNS)}")
    if len(rows) == 1:
        raise DatasetFormatError(f"{source}: line {lineno + 1}: no records")
    label = None
    att = None
    records = []
    for lineno, row in rows[1:]:
        if len(row) != len(COLUMNS):
            raise DatasetFormatError(f"{source}: line {lineno}: expected {len(COLUMNS)} fields, got {len(row)}")
        f = dict(zip(COLUMNS, (x.strip() for x in row)))
        row_att = _number(f["attenuation_db"], "attenuation_db", lineno)
        if label is None:
            label, att = f["channel_label"], row_att
        elif f["channel_label"] != label or row_att != att:
            raise DatasetFormatError(f"{source}: line {lineno}: all records must share one channel")
        coinc = _number(f["coincidences"], "coincidences", lineno)
        rate = _number(f["error_rate_percent"], "error_rate_percent", lineno)
        key = f"{f['basis_pair']} {f['class_a']}{f['class_b']} {f['bell']}"
        if not 0.0 <= rate <= 100.0:
            raise DatasetFormatError(f"{source}: line {lineno}: record {key}: error_rate_percent {rate} outside [0, 100]")
        errors = rate * coinc / 100.0
        if coinc == int(coinc):
            errors = round(errors)
        bell = None if f["bell"] == "merged" else f["bell"]
        try:
            rec = CountRecord(
                basis_pair=f["basis_pair"],
                class_a=f["class_a"],
                class_b=f["class_b"],
                bell=bell,
                coincidences=_count(coinc),
                error_coincidences=errors,
                pairs_emitted=_number(f["pairs_emitted"], "pairs_emitted", lineno),
                flux_a=_number(f["flux_a"], "flux_a", lineno),
                flux_b=_number(f["flux_b"], "flux_b", lineno),
            )
        except ValueError as exc:
            raise DatasetFormatError(f"{source}: line {lineno}: record {key}: {exc}") from None
        records.append(rec)
    try:
        return CountsDataset(label, att, records)
    except ValueError as exc:
        raise DatasetFormatError(f"{source}: {exc}") from None


def load_dataset(path) -> CountsDataset:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DatasetFormatError(f"{path}: cannot read: {exc.strerror}") from None
    return parse_dataset(text, str(path))


def _fmt(x: float) -> str:
    if isinstance(x, int) or (float(x).is_integer() and abs(x) < 1e15):
        return str(int(x))
    return format(float(x), ".12g")


def format_dataset(data: CountsDataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in data.records:
        rate = 100.0 * r.error_coincidences / r.coincidences if r.coincidences > 0 else 0.0
        w.writerow(
            [
                data.channel_label,
                _fmt(data.attenuation_db),
                r.basis_pair,
                r.class_a.value,
                r.class_b.value,
                r.bell.value if r.bell else "merged",
                _fmt(r.coincidences),
                format(rate, ".12g"),
                _fmt(r.pairs_emitted),
                _fmt(r.flux_a),
                _fmt(r.flux_b),
            ]
        )
    return buf.getvalue()


def write_dataset(data: CountsDataset, path) -> None:
    Path(path).write_text(format_dataset(data))


def bundled_dataset_names() -> list[str]:
    """Names of the shipped measurement files, ordered by attenuation."""
    files = resources.files("mdiqkd") / "data"
    names = [p.name[len(BUNDLED_PREFIX):-4] for p in files.iterdir() if p.name.startswith(BUNDLED_PREFIX)]
    return sorted(names, key=lambda n: (float(n.split("dB")[0]), n))


def bundled_dataset_path(name: str) -> Path:
    p = resources.files("mdiqkd") / "data" / f"{BUNDLED_PREFIX}{name}.csv"
    if not p.is_file():
        raise FileNotFoundError(f"no bundled dataset {name!r}; have {bundled_dataset_names()}")
    return Path(str(p))


def load_bundled(name: str) -> CountsDataset:
    return load_dataset(bundled_dataset_path(name))


def distance_km(attenuation_db: float) -> float:
    return attenuation_db / DB_PER_KM


def format_rate_curve(points) -> str:
    """CSV rows of (label, attenuation, equivalent distance, rate) for a rate-vs-loss plot.

    ``points`` is an iterable of (label, attenuation_db, rate_bits_s).
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["channel_label", "attenuation_db", "distance_km", "rate_bits_s"])
    for label, att, rate in points:
        w.writerow([label, _fmt(att), format(distance_km(att), ".6g"), format(rate, ".8g")])
    return buf.getvalue()


def emit_rate_curve(points, path=None) -> str:
    text = format_rate_curve(points)
    if path is not None:
        Path(path).write_text(text)
    return text


def format_visibility_grid(jitters_ps, bandwidths_ghz, grid) -> str:
    """Long-format CSV of a visibility grid, one row per (bandwidth, jitter) cell."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["jitter_ps", "bandwidth_ghz", "visibility"])
    for i, bw in enumerate(bandwidths_ghz):
        for j, jt in enumerate(jitters_ps):
            w.writerow([format(jt, ".6g"), format(bw, ".6g"), format(grid[i][j], ".8g")])
    return buf.getvalue()


def format_bell_shares(data: CountsDataset) -> str:
    """Singlet/triplet coincidence totals and shares, for a pie chart."""
    totals = {}
    for r in data.records:
        key = r.bell.value if r.bell else "merged"
        totals[key] = totals.get(key, 0.0) + r.coincidences
    grand = sum(totals.values()) or 1.0
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["bell", "coincidences", "share"])
    for key in (BellOutcome.SINGLET.value, BellOutcome.TRIPLET.value, "merged"):
        if key in totals:
            w.writerow([key, _fmt(totals[key]), format(totals[key] / grand, ".6g")])
    return buf.getvalue()
