import itertools
import random
from collections import Counter

import pytest
from hypothesis import strategies as st

from mvbp.instance import InstanceError, make_instance, parse_instance

EXAMPLE1 = """\
2
2
3 100 75
2 75 50
2
2 1
  75 50
1 2
  40 15
  25 25
"""


@pytest.fixture
def ex1():
    return parse_instance(EXAMPLE1, name="example1")


def brute_patterns(instance, t, incarnations=False):
    """All multisets of incarnations fitting bin type t with item counts <= demand.

    Plain enumeration of count vectors, independent of any graph code.
    """
    cap = instance.bin(t).capacity
    incs = instance.incarnations()
    out = set()

    def rec(k, load, counts, chosen):
        if k == len(incs):
            key = tuple(sorted(chosen)) if incarnations else tuple(sorted(i for i, _ in chosen))
            out.add(key)
            return
        inc = incs[k]
        for c in itertools.count():
            if counts[inc.item] + c > instance.item(inc.item).demand:
                break
            new = tuple(x + c * w for x, w in zip(load, inc.weight))
            if any(a > b for a, b in zip(new, cap)):
                break
            counts[inc.item] += c
            rec(k + 1, new, counts, chosen + [inc.label] * c)
            counts[inc.item] -= c

    rec(0, (0,) * instance.dims, Counter(), [])
    return out


def random_instance(rng: random.Random, max_units=8, max_dims=3, max_types=3, max_incs=2,
                    max_weight=20):
    """Small random MVBP instance; retried until every incarnation fits some bin."""
    while True:
        p = rng.randint(1, max_dims)
        q = rng.randint(1, max_types)
        caps = [tuple(rng.randint(3, max_weight) for _ in range(p)) for _ in range(q)]
        costs = [rng.randint(1, 9) for _ in range(q)]
        items, left = [], rng.randint(1, max_units)
        while left > 0:
            b = rng.randint(1, min(3, left))
            left -= b
            incs = {
                tuple(rng.randint(0, c) for c in rng.choice(caps))
                for _ in range(rng.randint(1, max_incs))
            }
            items.append((b, sorted(incs)))
        try:
            return make_instance(caps, costs, items)
        except InstanceError:
            continue


@st.composite
def instances(draw, max_units=8, max_dims=3, max_types=3, max_incs=2):
    seed = draw(st.integers(0, 2**32 - 1))
    return random_instance(random.Random(seed), max_units, max_dims, max_types, max_incs)


# one line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[key])
