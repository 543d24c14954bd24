from __future__ import annotations

import pytest

from focksobolev.verify import SUITES, load_catalogs, verify_suite


@pytest.fixture(scope="module")
def catalogs():
    return load_catalogs()


def test_catalogs_cover_every_suite(catalogs):
    assert set(SUITES) <= set(catalogs)


@pytest.mark.parametrize("suite", ["identities", "theoremA", "theoremB"])
def test_suite_passes(suite):
    checks = verify_suite(suite)
    assert checks
    failed = [c.id for c in checks if not c.passed]
    assert not failed, failed


def test_report_shape():
    checks = verify_suite("theoremB")
    d = checks[0].to_dict()
    assert list(d) == ["id", "description", "measured", "tolerance", "pass"]
    assert isinstance(d["pass"], bool)
    assert len({c.id for c in checks}) == len(checks)


def test_boundedness_reports_every_case(catalogs):
    checks = {c.id: c for c in verify_suite("boundedness", catalogs)}
    assert set(checks) == {f"boundedness/{case['id']}" for case in catalogs["boundedness"]["cases"]}
    for case in ("half-resonant-pi", "opposite", "balanced-2pi", "balanced-pi", "constant"):
        assert checks[f"boundedness/{case}"].passed


def test_unknown_suite():
    with pytest.raises(ValueError):
        verify_suite("nonsense")


def test_custom_catalog(catalogs):
    cat = dict(catalogs)
    cat["theoremB"] = dict(cat["theoremB"], pairs=cat["theoremB"]["pairs"][:1], ms=[1])
    checks = verify_suite("theoremB", cat)
    assert [c.id for c in checks][:1] == [f"theoremB/{cat['theoremB']['pairs'][0]['id']}/m1"]
