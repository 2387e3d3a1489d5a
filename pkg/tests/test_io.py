import pytest

from mdiqkd.core import BellOutcome, ClassFluxes, ProtocolConfig
from mdiqkd.io import (
    COLUMNS,
    DatasetFormatError,
    bundled_dataset_names,
    distance_km,
    emit_rate_curve,
    format_bell_shares,
    format_dataset,
    format_visibility_grid,
    load_bundled,
    load_dataset,
    parse_dataset,
    write_dataset,
)
from mdiqkd.keyrate import distill
from mdiqkd.simulator import ChannelConfig, detector_preset, run_campaign

HEADER = ",".join(COLUMNS)


def test_bundled_233_contents():
    data = load_bundled("2.33dB")
    zz = [r for r in data.records if r.basis_pair == "ZZ"]
    xx = [r for r in data.records if r.basis_pair == "XX"]
    assert len(zz) == 2 and len(xx) == 18
    assert data.record("ZZ", "s", "s", BellOutcome.SINGLET).coincidences == 288399
    assert data.record("ZZ", "s", "s", BellOutcome.TRIPLET).coincidences == 287902
    data.check_complete()


def test_bundled_set_matches_table_rows():
    names = bundled_dataset_names()
    assert len(names) == 7
    assert sum(n.endswith("finite") for n in names) == 1
    assert sum("fibre" in n for n in names) == 1


def test_error_rate_converted_to_counts():
    data = load_bundled("2.33dB")
    r = data.record("ZZ", "s", "s", BellOutcome.SINGLET)
    assert r.error_coincidences == round(0.33 * 288399 / 100)


def test_empty_file(tmp_path):
    p = tmp_path / "empty.csv"
    p.write_text("")
    with pytest.raises(DatasetFormatError, match="line 1"):
        load_dataset(p)


def test_bad_header():
    with pytest.raises(DatasetFormatError, match="header"):
        parse_dataset("a,b,c\n1,2,3\n")


def test_error_rate_out_of_range_names_record():
    text = HEADER + "\nx,1,ZZ,s,s,singlet,100,120,1000,0.5,0.5\n"
    with pytest.raises(DatasetFormatError) as exc:
        parse_dataset(text)
    assert "ZZ ss singlet" in str(exc.value) and "line 2" in str(exc.value)


def test_non_numeric_field_names_line():
    text = HEADER + "\nx,1,ZZ,s,s,singlet,lots,1,1000,0.5,0.5\n"
    with pytest.raises(DatasetFormatError, match="line 2: coincidences"):
        parse_dataset(text)


def test_mixed_channels_rejected():
    text = HEADER + "\nx,1,ZZ,s,s,singlet,100,1,1000,0.5,0.5\ny,2,ZZ,s,s,triplet,100,1,1000,0.5,0.5\n"
    with pytest.raises(DatasetFormatError, match="line 3"):
        parse_dataset(text)


def test_missing_file(tmp_path):
    with pytest.raises(DatasetFormatError, match="cannot read"):
        load_dataset(tmp_path / "nope.csv")


@pytest.mark.parametrize("name", bundled_dataset_names())
def test_round_trip_is_canonical(name, tmp_path):
    data = load_bundled(name)
    once = format_dataset(data)
    again = format_dataset(parse_dataset(once))
    assert once == again
    assert parse_dataset(once) == data


@pytest.mark.parametrize("name", bundled_dataset_names())
def test_every_bundled_dataset_distills(name):
    assert distill(load_bundled(name)).rate_total >= 0


def test_simulator_output_loads(tmp_path):
    fl = ClassFluxes(0.7, 0.01, 0.002, 0.001)
    data = run_campaign(ProtocolConfig(fl, fl), ChannelConfig.from_total(2.33), detector_preset("room_20C"), 0.98,
                        rounds=200_000, x_rounds_per_pair=200_000, seed=1)
    path = tmp_path / "sim.csv"
    write_dataset(data, path)
    loaded = load_dataset(path)
    assert loaded == data
    expected = run_campaign(ProtocolConfig(fl, fl), ChannelConfig.from_total(2.33), detector_preset("room_20C"), 0.98,
                            rounds=8e7, x_rounds_per_pair=1e11, mode="expected")
    write_dataset(expected, path)
    assert distill(load_dataset(path)).rate_total > 0


def test_distance():
    assert distance_km(2.33) == pytest.approx(11.65)
    assert distance_km(0.0) == 0.0


def test_rate_curve(tmp_path):
    path = tmp_path / "curve.csv"
    text = emit_rate_curve([("a", 2.33, 1.2e6), ("b", 0.0, 5.0)], path)
    lines = path.read_text().splitlines()
    assert text == path.read_text()
    assert lines[0] == "channel_label,attenuation_db,distance_km,rate_bits_s"
    assert lines[1].split(",")[2] == "11.65"
    assert lines[2].split(",")[2] == "0"


def test_visibility_grid_csv():
    text = format_visibility_grid([0.0, 1.0], [10.0], [[0.5, 0.4]])
    assert text.splitlines() == ["jitter_ps,bandwidth_ghz,visibility", "0,10,0.5", "1,10,0.4"]


def test_bell_shares():
    lines = format_bell_shares(load_bundled("2.33dB")).splitlines()
    assert lines[0] == "bell,coincidences,share"
    shares = [float(l.split(",")[2]) for l in lines[1:]]
    assert sum(shares) == pytest.approx(1.0)
    assert all(0.4 < s < 0.6 for s in shares)
