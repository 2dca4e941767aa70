from fractions import Fraction

import pytest
from conftest import EXAMPLE1, instances
from hypothesis import given, settings

from mvbp.instance import (
    BIN_SIZES,
    InfeasibleInstanceError,
    InstanceError,
    ParseError,
    bin_cost_default,
    generate_instance,
    make_instance,
    parse_instance,
    read_instance,
    render_instance,
)


def test_example1_counts(ex1):
    assert (ex1.n, ex1.m, ex1.q, ex1.dims) == (3, 2, 2, 2)
    assert ex1.bin(1).capacity == (100, 75) and ex1.bin(1).cost == 3
    assert ex1.bin(2).capacity == (75, 50) and ex1.bin(2).cost == 2
    assert [inc.weight for inc in ex1.item(2).incarnations] == [(40, 15), (25, 25)]
    assert ex1.weight((0, 0)) == (0, 0)


def test_comments_and_rational_costs():
    text = "1  # p\n1\n3/2 10\n1\n2 1\n 4  # weight\n"
    inst = parse_instance(text)
    assert inst.bin(1).cost == Fraction(3, 2)
    assert parse_instance(render_instance(inst)) == inst


def test_vbp_format():
    inst = parse_instance("2\n10 8\n2\n3 4 2\n5 1 1\n")
    assert inst.q == 1 and inst.bin(1).cost == 1
    assert [(it.demand, it.incarnations[0].weight) for it in inst.items] == [(2, (3, 4)), (1, (5, 1))]


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("2\n1\n1 10 10\n0\n", "no items"),
        ("1\n1\n1 10\n1\n0 1\n 3\n", "zero demand"),
        ("1\n1\n1 10\n1\n1 1\n 3 4\n", "line 6"),
        ("1\n1\n1 10\n1\n1 1\n x\n", "line 6, column 2"),
        ("1\n1\n1 10\n1\n1 2\n 3\n 3\n", "duplicates"),
        ("1\n1\n1 10\n1\n1 1\n 3\n9\n", "trailing"),
        ("", "empty"),
    ],
)
def test_parse_errors(text, fragment):
    with pytest.raises(ParseError, match=fragment):
        parse_instance(text)


def test_unfittable_item_is_infeasible_not_syntax():
    text = "2\n1\n1 150 75\n1\n1 1\n 200 10\n"
    with pytest.raises(InfeasibleInstanceError) as err:
        parse_instance(text)
    assert not isinstance(err.value, ParseError)
    assert "item 1" in str(err.value) and "dimension 1" in str(err.value)


def test_invalid_objects():
    with pytest.raises(InstanceError):
        make_instance([(10,)], [0], [(1, [(3,)])])
    with pytest.raises(InstanceError):
        make_instance([(10,)], [1], [(1, [(3,), (3,)])])
    with pytest.raises(InstanceError):
        make_instance([(10,)], [1], [(1, [(3, 1)])])


def test_read_instance(tmp_path):
    path = tmp_path / "ex1.txt"
    path.write_text(EXAMPLE1)
    assert read_instance(path) == parse_instance(EXAMPLE1)
    with pytest.raises(OSError):
        read_instance(tmp_path / "missing.txt")


@settings(max_examples=60, deadline=None)
@given(instances())
def test_render_parse_round_trip(inst):
    assert parse_instance(render_instance(inst)) == inst


def test_generator_ranges_and_sizes():
    inst = generate_instance(3, 3, 500, seed=4)
    assert inst.m <= 51 and inst.n == 500
    assert all(50 <= it.incarnations[0].weight[0] <= 100 for it in inst.items)
    small = generate_instance(1, 5, 25, seed=1)
    assert [bt.capacity[0] for bt in small.bins] == list(BIN_SIZES[5]) == [60, 80, 100, 120, 150]
    assert [bt.cost for bt in small.bins] == [60, 80, 100, 120, 150]
    assert all(len(it.incarnations) == 1 for it in small.items)


@pytest.mark.parametrize("X,q,n", [(1, 3, 25), (2, 5, 100), (3, 3, 200)])
def test_generator_is_deterministic(X, q, n):
    a, b = generate_instance(X, q, n, 7), generate_instance(X, q, n, 7)
    assert render_instance(a) == render_instance(b)
    weights = [it.incarnations[0].weight[0] for it in a.items]
    assert weights == sorted(weights, reverse=True)
    assert sum(it.demand for it in a.items) == n


def test_generator_rejects_bad_params():
    for args in [(4, 3, 10, 0), (1, 4, 10, 0), (1, 3, 0, 0)]:
        with pytest.raises(InstanceError):
            generate_instance(*args)


def test_bin_cost_default():
    assert bin_cost_default(150) == 150
    assert bin_cost_default(60) == 60
    with pytest.raises(InstanceError):
        bin_cost_default(0)
