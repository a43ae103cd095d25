import pytest

from dampedwave.constants import format_table, verify_constants


def _rows(D):
    return {r.name: r for r in verify_constants(D)}


@pytest.mark.parametrize("D", [5, 6, 7])
def test_exact_rows_pass(D):
    rows = _rows(D)
    for name in ("bracket C_D", "||LW||^2 (exact)", "omega^2 (exact)", "<LLW, LW>"):
        assert rows[name].passed, rows[name]


@pytest.mark.parametrize("D", [5, 6, 7])
def test_reduced_norm_off_by_gamma_factor(D):
    import math
    rows = _rows(D)
    reduced = rows["||LW||^2 (reduced)"]
    assert not reduced.passed
    assert reduced.quadrature / reduced.closed_form == pytest.approx(math.gamma(1 + D / 2),
                                                                    rel=1e-6)


def test_d6_values():
    rows = _rows(6)
    assert rows["bracket C_D"].closed_form == pytest.approx(4608.0)
    assert rows["||LW||^2 (exact)"].closed_form == pytest.approx(3686.4)
    assert rows["omega^2 (exact)"].closed_form == pytest.approx(1.25)


def test_d4_rows():
    rows = _rows(4)
    assert rows["bracket C_D"].passed
    assert rows["<LLW, LW>"].passed
    assert rows["||LW||^2 log-slope"].quadrature == pytest.approx(64.0, rel=0.02)


def test_unsupported_dim():
    with pytest.raises(ValueError):
        verify_constants(3)


def test_table_format():
    text = format_table(6, verify_constants(6))
    assert text.splitlines()[0] == "constants for D = 6"
    assert text.count("PASS") + text.count("FAIL") == 6
