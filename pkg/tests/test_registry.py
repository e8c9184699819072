import pytest
from hypothesis import given
from hypothesis import strategies as st

from reflectlab.errors import InvalidParams, UnknownType
from reflectlab.registry import appendix_rows, lookup_real_forms, recursive_examples


@given(st.integers(1, 12), st.integers(1, 12))
def test_aiii_always_one_row(p, q):
    if p > q:
        p, q = q, p
    rows = lookup_real_forms("AIII", p=p, q=q)
    assert len(rows) == 1
    assert rows[0].real_form_symbols[0].startswith("SO(p,")


@given(st.integers(1, 20))
def test_diii_and_ci_parity(n):
    diii = lookup_real_forms("DIII", n=n)
    ci = lookup_real_forms("CI", n=n)
    assert len(diii) == len(ci) == 1
    assert len(diii[0].real_form_symbols) == (2 if n % 2 == 0 else 1)
    assert len(ci[0].real_form_symbols) == (2 if n % 2 == 0 else 1)


def test_quaternionic_form_only_when_both_even():
    assert len(lookup_real_forms("AIII", p=2, q=4)[0].real_form_symbols) == 2
    assert len(lookup_real_forms("AIII", p=1, q=4)[0].real_form_symbols) == 1


def test_bdi_k_range():
    assert lookup_real_forms("BDI_q2", p=5, k=2)
    with pytest.raises(InvalidParams):
        lookup_real_forms("BDI_q2", p=5, k=3)


def test_recursive_rows_by_family():
    (row,) = lookup_real_forms("recursive", family="quadric")
    assert row.row == 5
    assert [r.family for r in recursive_examples()] == [
        "euclidean", "hermitian_hyperbolic", "complex_projective", "quadric_dual", "quadric"]


def test_table_sizes():
    assert len(appendix_rows()) == 9
    assert len(recursive_examples()) == 5


@pytest.mark.parametrize("call,exc", [
    (lambda: lookup_real_forms("EIII", n=2), UnknownType),
    (lambda: lookup_real_forms("AIII", p=2), InvalidParams),
    (lambda: lookup_real_forms("AIII", p=3, q=2), InvalidParams),
    (lambda: lookup_real_forms("DIII", n=0), InvalidParams),
    (lambda: lookup_real_forms("CI", n=1.5), InvalidParams),
    (lambda: lookup_real_forms("recursive", row=9), InvalidParams),
])
def test_invalid_lookups(call, exc):
    with pytest.raises(exc):
        call()
