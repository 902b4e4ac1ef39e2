import json
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bdchain.chain import (
    ChainSpec,
    ConstantDrift,
    EventuallyConstant,
    RationalExpression,
    SpecError,
    Table,
    TailRule,
    float_probs,
    load_spec,
    parse_spec,
    probs_at,
    serialize,
    validate,
)

from conftest import drift, ec2, example1, mirrored, srw


def test_probs_at_paper_families():
    assert probs_at(srw(), 7) == (F(1, 2), F(1, 2))
    assert probs_at(example1(), 1) == (F(1, 3), F(2, 3))
    assert probs_at(example1(), 4) == (F(4, 9), F(5, 9))
    assert probs_at(mirrored(), 4) == (F(5, 9), F(4, 9))


def test_state_zero_has_no_pair():
    with pytest.raises(ValueError, match="absorbing"):
        probs_at(srw(), 0)


def test_eventually_constant_switches_to_half():
    spec = ec2()
    assert probs_at(spec, 1) == (F(2, 3), F(1, 3))
    assert probs_at(spec, 2) == (F(1, 2), F(1, 2))


@pytest.mark.parametrize("spec", [srw(), example1(), mirrored(), ec2(), drift()], ids=lambda s: s.name)
def test_exact_normalization_deep(spec):
    for n in (1, 2, 3, 10, 999, 10**4, 10**6):
        l, r = probs_at(spec, n)
        assert l + r == 1
        assert 0 < l < 1


def test_float_probs_normalized_to_a_million():
    for spec in (srw(), example1(), mirrored(), ec2(), drift(), drift(p=0.7)):
        left, right = float_probs(spec, 10**6)
        assert abs(left[1:] + right[1:] - 1).max() <= 1e-15


def test_example1_drift_is_one_over_2n_plus_1():
    for n in range(1, 500):
        l, r = probs_at(example1(), n)
        assert r - l == F(1, 2 * n + 1)


def test_validate_example1_deep():
    assert validate(example1(), 1000)


def test_validate_reports_unnormalized_row():
    spec = ChainSpec(Table(((0.5, 0.5), (0.5, 0.5), (0.6, 0.6)), TailRule("half")), 1)
    report = validate(spec, 5)
    assert not report.valid
    assert (report.state, report.reason) == (3, "not normalized")


def test_validate_reports_zero_probability():
    spec = ChainSpec(Table(((F(1, 2), F(1, 2)), (F(0), F(1))), TailRule("half")), 1)
    report = validate(spec, 5)
    assert (report.state, report.reason) == (2, "probability not strictly positive")


def test_validate_reports_bad_start():
    assert validate(ChainSpec(srw().family, 0), 3).reason == "invalid start state"


def test_float_sum_tolerance():
    # 0.1 + 0.9 rounds to 1 exactly; 0.3 + 0.7 - 1 is within one ulp
    spec = ChainSpec(Table(((0.1, 0.9), (0.3, 0.7)), TailRule("half")), 1)
    assert validate(spec, 4)
    spec = ChainSpec(Table(((0.3, 0.7 + 1e-12),), TailRule("half")), 1)
    assert validate(spec, 4).reason == "not normalized"


def test_parse_examples():
    assert parse_spec({"family": "example1", "k": 1}) == example1(1)
    spec = parse_spec({"family": "constant", "p": 0.6666666666666666, "k": 1})
    assert isinstance(spec.family, ConstantDrift)
    assert abs(spec.family.p - 2 / 3) < 1e-15
    assert parse_spec({"family": "constant", "p": "2/3", "k": 1}) == drift(1)


@pytest.mark.parametrize(
    "doc, message",
    [
        ({"family": "constant", "p": 1.2, "k": 1}, "p out of range"),
        ({"family": "nope", "k": 1}, "unknown family"),
        ({"family": "constant", "k": 1}, "missing required parameter 'p'"),
        ({"family": "example1"}, "missing required parameter 'k'"),
        ({"family": "example1", "k": 1, "extra": 3}, "unknown field"),
        ({"family": "eventually-constant", "k": 1, "M": 2, "prefix": [["1/2", "1/2"]]}, "prefix has 1 rows"),
        ({"family": "table", "k": 1, "table": [["1/2", "1/2"]], "tail": {"rule": "wrap"}}, "unknown tail rule"),
        ({"family": "table", "k": 1, "table": [["1/2", "1/2"]], "tail": {"rule": "constant"}}, "tail.p"),
        ({"family": "example1", "k": 0}, "k out of range"),
        ({"family": "example1", "k": 1.5}, "malformed"),
        ("[1, 2]", "malformed"),
        ("{not json", "malformed"),
    ],
)
def test_parse_errors(doc, message):
    with pytest.raises(SpecError, match=message):
        parse_spec(doc)


def test_rational_expression_reproduces_example1():
    spec = parse_spec({"family": "rational", "numerator": [0, 1], "denominator": [1, 2], "k": 1})
    assert isinstance(spec.family, RationalExpression)
    for n in range(1, 50):
        assert probs_at(spec, n) == probs_at(example1(), n)


def test_bundled_files_parse(tmp_path):
    from importlib import resources

    for path in resources.files("bdchain.data").iterdir():
        if path.name.endswith(".json"):
            spec = parse_spec(json.loads(path.read_text()))
            assert validate(spec, 200)
    target = tmp_path / "c.json"
    target.write_text(json.dumps(serialize(ec2())))
    assert load_spec(target) == ec2()


probability = st.one_of(
    st.fractions(min_value=F(1, 1000), max_value=F(999, 1000), max_denominator=1000),
    st.floats(min_value=1e-3, max_value=1 - 1e-3),
)


@st.composite
def specs(draw):
    k = draw(st.integers(1, 50))
    kind = draw(st.sampled_from(["srw", "constant", "example1", "mirrored", "ec", "table", "rational"]))
    if kind == "constant":
        return ChainSpec(ConstantDrift(draw(probability)), k)
    if kind == "ec":
        ls = draw(st.lists(st.fractions(min_value=F(1, 100), max_value=F(99, 100), max_denominator=100),
                           min_size=1, max_size=5))
        return ChainSpec(EventuallyConstant(tuple((l, 1 - l) for l in ls), len(ls)), k)
    if kind == "table":
        ls = draw(st.lists(probability, min_size=1, max_size=5))
        rule = draw(st.sampled_from(["half", "constant", "repeat-last"]))
        tail = TailRule(rule, draw(probability) if rule == "constant" else None)
        return ChainSpec(Table(tuple((l, 1 - l) for l in ls), tail), k)
    if kind == "rational":
        return ChainSpec(RationalExpression((F(0), F(1)), (F(draw(st.integers(1, 5))), F(2))), k)
    return {"srw": srw, "example1": example1, "mirrored": mirrored}[kind](k)


@given(specs())
@settings(max_examples=200, deadline=None)
def test_parse_serialize_roundtrip(spec):
    doc = serialize(spec)
    again = parse_spec(json.loads(json.dumps(doc)))
    assert again == spec
    assert serialize(again) == doc
