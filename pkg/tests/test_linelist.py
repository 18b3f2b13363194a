import io

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from spectrosat.errors import EmptyCatalog, FieldNotNumeric, InvalidBand, IoFailure, RecordTooShort
from spectrosat.linelist import (
    O2_DRY_AIR_FRACTION,
    GasSpecies,
    LineCatalog,
    SpectralLine,
    fixture_path,
    format_par_record,
    load_catalog,
    parse_par_record,
    query_band,
)


def record(mol=2, iso="1", nu="6350.000000", s="1.234E-23", a="5.678E-03", gair=".0720",
           gself="0.095", elower="  123.4567", nair="0.73", dair="-.006500"):
    """A .par record assembled field by field at the HITRAN 2004 widths."""
    head = f"{mol:2d}{iso}{nu:>12}{s:>10}{a:>10}{gair:>5}{gself:>5}{elower:>10}{nair:>4}{dair:>8}"
    assert len(head) == 67
    return head + " " * 93


def test_record_fields_hand_sliced():
    rec = record()
    assert len(rec) == 160
    line = parse_par_record(rec)
    assert line.molecule_id == 2
    assert line.isotopologue == 1
    assert line.nu0 == 6350.0
    assert line.intensity == 1.234e-23
    assert line.einstein_a == 5.678e-3
    assert line.gamma_air == 0.072
    assert line.gamma_self == 0.095
    assert line.elower == 123.4567
    assert line.n_air == 0.73
    assert line.delta_air == -0.0065


def test_nu_field_reads_position():
    assert record(nu=" 6350.000000")[3:15] == " 6350.000000"
    assert parse_par_record(record(nu=" 6350.000000")).nu0 == 6350.0


def test_molecule_field_numbering():
    # HITRAN molecule numbers: 2 = CO2, 6 = CH4, 7 = O2
    assert parse_par_record(record(mol=2)).molecule_id == GasSpecies.CO2.code == 2
    assert parse_par_record(record(mol=6)).molecule_id == GasSpecies.CH4.code == 6
    assert parse_par_record(record(mol=7)).molecule_id == GasSpecies.O2.code == 7


def test_isotopologue_letters():
    assert parse_par_record(record(iso="0")).isotopologue == 10
    assert parse_par_record(record(iso="A")).isotopologue == 11


def test_short_record():
    with pytest.raises(RecordTooShort) as err:
        parse_par_record(record()[:120])
    assert err.value.length == 120


def test_non_numeric_field_reports_offset():
    with pytest.raises(FieldNotNumeric) as err:
        parse_par_record(record(s="abcdefghij"))
    assert err.value.offset == 15
    assert err.value.field == "intensity"


def test_bytes_and_trailing_fields_ignored():
    rec = record()[:67] + "X" * 93 + "extra"
    assert parse_par_record(rec.encode()) == parse_par_record(record())


def test_golden_fixture_records_match_hand_slicing():
    raw = fixture_path().read_text().splitlines()
    for text in raw[::17]:
        line = parse_par_record(text)
        assert line.molecule_id == int(text[0:2])
        assert line.nu0 == float(text[3:15])
        assert line.intensity == float(text[15:25])
        assert line.gamma_air == float(text[35:40])
        assert line.elower == float(text[45:55])
        assert line.delta_air == float(text[59:67])


def test_format_round_trip_on_fixture(catalog):
    for line in catalog.lines:
        assert parse_par_record(format_par_record(line)) == line


def test_load_sorts_ascending():
    text = "\n".join(record(nu=n) for n in ("6400.000000", "6300.000000", "6200.000000"))
    cat = load_catalog(text.encode())
    assert len(cat) == 3
    assert [ln.nu0 for ln in cat] == [6200.0, 6300.0, 6400.0]


def test_empty_stream():
    with pytest.raises(EmptyCatalog):
        load_catalog(io.BytesIO(b""))


def test_malformed_record_isolated():
    text = "\n".join([record(nu="6300.000000"), record(s="not-a-num!"), record(nu="6200.000000")])
    cat = load_catalog(io.BytesIO(text.encode()))
    assert len(cat) == 2
    assert len(cat.diagnostics) == 1
    assert cat.diagnostics[0].line_number == 2


def test_missing_file(tmp_path):
    with pytest.raises(IoFailure):
        load_catalog(tmp_path / "absent.par")


def test_load_is_deterministic():
    data = fixture_path().read_bytes()
    assert load_catalog(data).lines == load_catalog(io.BytesIO(data)).lines


def test_fixture_catalog_clean(catalog):
    assert not catalog.diagnostics
    assert 100 <= len(catalog) <= 500
    nus = [ln.nu0 for ln in catalog]
    assert nus == sorted(nus)


def test_query_finds_both_co2_features(catalog):
    lines = query_band(catalog, GasSpecies.CO2, 6200, 6400)
    nus = np.array([ln.nu0 for ln in lines])
    assert np.any(np.abs(nus - 6250) < 1) and np.any(np.abs(nus - 6350) < 1)
    assert all(ln.molecule_id == 2 for ln in lines)


@pytest.mark.parametrize("species,nu", [("O2", 7880), ("CH4", 6024)])
def test_fixture_covers_features(catalog, species, nu):
    lines = query_band(catalog, species, nu - 1, nu + 1)
    strongest = max(lines, key=lambda ln: ln.intensity)
    assert abs(strongest.nu0 - nu) < 0.5


def test_query_empty_range(catalog):
    assert query_band(catalog, GasSpecies.CH4, 9000, 9100) == []


def test_query_invalid_band(catalog):
    with pytest.raises(InvalidBand):
        query_band(catalog, GasSpecies.CO2, 6300, 6300)


def test_species_constants():
    assert len({sp.code for sp in GasSpecies}) == 3
    assert O2_DRY_AIR_FRACTION == 0.2095


lines_st = st.lists(
    st.builds(
        lambda mol, nu, s: SpectralLine(mol, 1, nu, s, 0.07, 0.09, 10.0, 0.7, -0.005),
        st.sampled_from([2, 6, 7]),
        st.floats(5000, 8000, allow_nan=False),
        st.floats(0, 1e-20),
    ),
    min_size=1,
    max_size=40,
)


@given(lines_st, st.lists(st.floats(5000, 8000), min_size=1, max_size=5), st.sampled_from(list(GasSpecies)))
def test_query_partition_concatenates(lines, cuts, species):
    cat = LineCatalog(tuple(lines))
    edges = sorted({4999.0, 8001.0, *cuts})
    assume(all(np.diff(edges) > 0))
    assume(not any(ln.nu0 in edges for ln in lines))
    parts = []
    for a, b in zip(edges[:-1], edges[1:]):
        parts += query_band(cat, species, a, b)
    assert parts == query_band(cat, species, edges[0], edges[-1])


@given(lines_st, st.floats(5000, 8000), st.floats(1e-3, 3000), st.sampled_from(list(GasSpecies)))
def test_query_matches_exhaustive_scan(lines, lo, width, species):
    cat = LineCatalog(tuple(lines))
    hi = lo + width
    expected = sorted(
        (ln for ln in lines if ln.molecule_id == species.code and lo <= ln.nu0 <= hi),
        key=lambda ln: ln.nu0,
    )
    got = query_band(cat, species, lo, hi)
    assert got == expected
