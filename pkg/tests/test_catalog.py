import pytest
from hypothesis import given, strategies as st

from specnet.catalog import (
    CatalogError,
    CatalogRecord,
    ObjectClass,
    ZWARNING_FLAGS,
    decode_zwarning,
    filter_good,
    parse_catalog,
    serialize_catalog,
)

SAMPLE = """\
#PLATE MJD FIBERID SPECBOSS ZWARNING CLASS Z
3586 55181 1 1 0 0 0.0524000000
3586 55181 2 1 130 1 2.1000000000
3586 55181 3 0 0 2 0.0001000000
"""


def test_parse_basic():
    records = parse_catalog(SAMPLE)
    assert len(records) == 3
    assert records[0] == CatalogRecord(3586, 55181, 1, 1, 0, ObjectClass.GALAXY, 0.0524)
    assert records[1].obj_class is ObjectClass.QSO
    assert records[1].zwarning == 130
    assert records[2].specboss == 0


def test_parse_skips_blank_and_comment_lines():
    assert parse_catalog("\n# comment\n\n") == []


@pytest.mark.parametrize(
    "line,fragment",
    [
        ("1 2 3 1 0 0", "expected 7 columns"),
        ("1 2 3 1 0 0 x", "non-numeric"),
        ("1 2 3 2 0 0 0.5", "specboss"),
        ("1 2 3 1 0 5 0.5", "class code"),
        ("0 2 3 1 0 0 0.5", "positive"),
        ("1 2 3 1 -1 0 0.5", "zwarning"),
        ("1 2 3 1 0 0 -2.0", "z must be"),
    ],
)
def test_parse_malformed_line(line, fragment):
    with pytest.raises(CatalogError, match=fragment) as exc:
        parse_catalog("# header\n" + line + "\n")
    assert exc.value.lineno == 2


def test_parse_duplicate_identifier_is_error():
    text = "1 2 3 1 0 0 0.5\n1 2 3 1 0 1 0.7\n"
    with pytest.raises(CatalogError, match="duplicate") as exc:
        parse_catalog(text)
    assert exc.value.lineno == 2


def test_serialize_round_trip():
    records = parse_catalog(SAMPLE)
    assert parse_catalog(serialize_catalog(records)) == records


def test_serialize_redshift_precision():
    rec = CatalogRecord(1, 2, 3, 1, 0, ObjectClass.QSO, 3.59926)
    assert "3.5992600000" in serialize_catalog([rec])


def test_decode_zwarning_bits():
    assert decode_zwarning(0) == []
    flags = decode_zwarning(130)  # bits 1 and 7
    assert [(f.bit, f.name) for f in flags] == [
        (1, "LITTLE_COVERAGE"),
        (7, "UNPLUGGED"),
    ]
    assert [f.name for f in decode_zwarning(255)] == list(ZWARNING_FLAGS)


def test_decode_zwarning_rejects_unknown_bits():
    with pytest.raises(ValueError):
        decode_zwarning(256)
    with pytest.raises(ValueError):
        decode_zwarning(-1)


@given(st.integers(min_value=0, max_value=255))
def test_decode_zwarning_matches_bit_arithmetic(mask):
    assert sum(1 << f.bit for f in decode_zwarning(mask)) == mask


def test_filter_good_keeps_clean_specboss_records():
    records = parse_catalog(SAMPLE)
    good = filter_good(records)
    assert [r.ident for r in good] == [(3586, 55181, 1)]


def test_object_class_labels():
    assert ObjectClass.GALAXY.label == "galaxy"
    assert ObjectClass.from_label("qso") is ObjectClass.QSO
    assert ObjectClass.from_code(2) is ObjectClass.STAR
    with pytest.raises(ValueError):
        ObjectClass.from_label("nebula")
