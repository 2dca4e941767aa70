"""Instance data model for multiple-choice vector bin packing.

An instance has ``m`` item types and ``q`` bin types over ``p`` resource
dimensions. Each item type has a demand and one or more *incarnations*
(alternative integer weight vectors); each bin type has an integer capacity
vector and a positive cost. Items and incarnations are numbered from 1; the
pair ``(0, 0)`` is reserved for the zero-weight loss label.

Two line-oriented text formats are read (``#`` starts a comment):

MVBP format::

    p
    q
    C(1) W(1)_1 ... W(1)_p
    ...
    m
    b_1 k_1
      w_1 ... w_p          # k_1 incarnation lines
    ...

Classical VBP format (one bin type of cost 1, single incarnations)::

    p
    W_1 ... W_p
    m
    w_1 ... w_p b          # m lines
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

#: label of loss arcs and super source/target connectors
LOSS: tuple[int, int] = (0, 0)

#: item weight ranges of the variable-sized benchmark classes
RANGES: dict[int, tuple[int, int]] = {1: (1, 100), 2: (20, 100), 3: (50, 100)}

#: bin sizes of the variable-sized benchmark classes, keyed by bin type count
BIN_SIZES: dict[int, tuple[int, ...]] = {3: (100, 120, 150), 5: (60, 80, 100, 120, 150)}


class InstanceError(ValueError):
    """Raised for malformed or inconsistent instances."""


class ParseError(InstanceError):
    """Syntax error in an instance file, with 1-based line/column."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)


class InfeasibleInstanceError(InstanceError):
    """An incarnation fits in no bin type."""


@dataclass(frozen=True)
class Incarnation:
    item: int
    variant: int
    weight: tuple[int, ...]

    @property
    def label(self) -> tuple[int, int]:
        return (self.item, self.variant)


@dataclass(frozen=True)
class ItemType:
    index: int
    demand: int
    incarnations: tuple[Incarnation, ...]

    def __post_init__(self) -> None:
        if self.demand < 1:
            raise InstanceError(f"item {self.index}: demand must be >= 1, got {self.demand}")
        if not self.incarnations:
            raise InstanceError(f"item {self.index}: no incarnations")
        seen = set()
        for inc in self.incarnations:
            if inc.item != self.index:
                raise InstanceError(f"incarnation {inc.label} attached to item {self.index}")
            if inc.weight in seen:
                raise InstanceError(
                    f"item {self.index}: duplicate incarnation weight {inc.weight}"
                )
            seen.add(inc.weight)


@dataclass(frozen=True)
class BinType:
    index: int
    capacity: tuple[int, ...]
    cost: Fraction

    def __post_init__(self) -> None:
        if self.cost <= 0:
            raise InstanceError(f"bin type {self.index}: cost must be positive, got {self.cost}")
        if any(c < 0 for c in self.capacity):
            raise InstanceError(f"bin type {self.index}: negative capacity {self.capacity}")


@dataclass(frozen=True)
class Instance:
    dims: int
    items: tuple[ItemType, ...]
    bins: tuple[BinType, ...]
    name: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        if self.dims < 1:
            raise InstanceError("dimension count must be >= 1")
        if not self.bins:
            raise InstanceError("no bin types")
        for k, bt in enumerate(self.bins, 1):
            if bt.index != k:
                raise InstanceError(f"bin types must be numbered 1..q, got {bt.index} at {k}")
            if len(bt.capacity) != self.dims:
                raise InstanceError(
                    f"bin type {k}: capacity has {len(bt.capacity)} entries, expected {self.dims}"
                )
        for k, it in enumerate(self.items, 1):
            if it.index != k:
                raise InstanceError(f"items must be numbered 1..m, got {it.index} at {k}")
            for inc in it.incarnations:
                if len(inc.weight) != self.dims:
                    raise InstanceError(
                        f"incarnation {inc.label}: weight has {len(inc.weight)} entries, "
                        f"expected {self.dims}"
                    )
                if any(w < 0 for w in inc.weight):
                    raise InstanceError(f"incarnation {inc.label}: negative weight {inc.weight}")
                self._check_fits(inc)

    def _check_fits(self, inc: Incarnation) -> None:
        if any(fits(inc.weight, bt.capacity) for bt in self.bins):
            return
        # name the first dimension that no bin type can accommodate
        for d in range(self.dims):
            if all(inc.weight[d] > bt.capacity[d] for bt in self.bins):
                raise InfeasibleInstanceError(
                    f"item {inc.item} incarnation {inc.variant} weight {inc.weight} fits in no "
                    f"bin type: dimension {d + 1} needs {inc.weight[d]}, max capacity "
                    f"{max(bt.capacity[d] for bt in self.bins)}"
                )
        raise InfeasibleInstanceError(
            f"item {inc.item} incarnation {inc.variant} weight {inc.weight} fits in no bin type"
        )

    @property
    def m(self) -> int:
        return len(self.items)

    @property
    def q(self) -> int:
        return len(self.bins)

    @property
    def n(self) -> int:
        return sum(it.demand for it in self.items)

    def item(self, i: int) -> ItemType:
        return self.items[i - 1]

    def bin(self, t: int) -> BinType:
        return self.bins[t - 1]

    def incarnations(self) -> list[Incarnation]:
        return [inc for it in self.items for inc in it.incarnations]

    def weight(self, label: tuple[int, int]) -> tuple[int, ...]:
        if label == LOSS:
            return (0,) * self.dims
        i, j = label
        return self.items[i - 1].incarnations[j - 1].weight

    def weights(self) -> dict[tuple[int, int], tuple[int, ...]]:
        """Label -> weight vector, including the loss label."""
        out = {LOSS: (0,) * self.dims}
        for inc in self.incarnations():
            out[inc.label] = inc.weight
        return out

    def fingerprint(self) -> str:
        return hashlib.sha256(render_instance(self).encode()).hexdigest()[:16]


def fits(weight: Sequence[int], capacity: Sequence[int]) -> bool:
    return all(w <= c for w, c in zip(weight, capacity))


def make_instance(
    capacities: Iterable[Sequence[int]],
    costs: Iterable,
    items: Iterable[tuple[int, Iterable[Sequence[int]]]],
    name: str = "",
) -> Instance:
    """Build an instance from plain lists.

    ``items`` holds ``(demand, [weight, ...])`` pairs, one per item type.

    >>> inst = make_instance([(10,)], [1], [(2, [(3,), (4,)])])
    >>> inst.n, inst.m, inst.q
    (2, 1, 1)
    """
    capacities = [tuple(int(c) for c in cap) for cap in capacities]
    bins = tuple(
        BinType(t, cap, Fraction(cost)) for t, (cap, cost) in enumerate(zip(capacities, costs), 1)
    )
    if len(bins) != len(capacities):
        raise InstanceError("capacities and costs differ in length")
    dims = len(capacities[0]) if capacities else 0
    item_types = []
    for i, (demand, weights) in enumerate(items, 1):
        incs = tuple(
            Incarnation(i, j, tuple(int(x) for x in w)) for j, w in enumerate(weights, 1)
        )
        item_types.append(ItemType(i, int(demand), incs))
    return Instance(dims, tuple(item_types), bins, name)


def bin_cost_default(capacity: int) -> int:
    """Default cost of a generated bin: linear in its size."""
    if capacity < 1:
        raise InstanceError(f"capacity must be >= 1, got {capacity}")
    return capacity


# ---------------------------------------------------------------------------
# text format


def _tokenize(text: str) -> list[tuple[int, list[tuple[int, str]]]]:
    """Non-empty lines as (line number, [(column, token), ...])."""
    out = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0]
        toks = []
        col = 0
        for tok in line.split():
            col = line.index(tok, col)
            toks.append((col + 1, tok))
            col += len(tok)
        if toks:
            out.append((lineno, toks))
    return out


def _int(tok: tuple[int, str], lineno: int, what: str) -> int:
    col, s = tok
    try:
        return int(s)
    except ValueError:
        raise ParseError(f"expected integer {what}, got {s!r}", lineno, col) from None


def _cost(tok: tuple[int, str], lineno: int) -> Fraction:
    col, s = tok
    try:
        return Fraction(s)
    except (ValueError, ZeroDivisionError):
        raise ParseError(f"expected rational cost, got {s!r}", lineno, col) from None


class _Lines:
    def __init__(self, text: str):
        self.lines = _tokenize(text)
        self.pos = 0

    def next(self, count: int | None, what: str) -> tuple[int, list[tuple[int, str]]]:
        if self.pos >= len(self.lines):
            last = self.lines[-1][0] if self.lines else 1
            raise ParseError(f"unexpected end of input, expected {what}", last)
        lineno, toks = self.lines[self.pos]
        self.pos += 1
        if count is not None and len(toks) != count:
            raise ParseError(
                f"expected {count} value(s) for {what}, got {len(toks)}", lineno, toks[0][0]
            )
        return lineno, toks

    def peek_len(self, offset: int = 0) -> int | None:
        k = self.pos + offset
        return len(self.lines[k][1]) if k < len(self.lines) else None

    def done(self) -> None:
        if self.pos < len(self.lines):
            lineno, toks = self.lines[self.pos]
            raise ParseError("trailing data after last item", lineno, toks[0][0])


def parse_instance(text: str, name: str = "") -> Instance:
    """Parse either the MVBP or the classical VBP text format.

    Raises :class:`ParseError` for syntax problems, :class:`InstanceError`
    for inconsistent data and :class:`InfeasibleInstanceError` when some
    incarnation fits in no bin type.
    """
    lines = _Lines(text)
    if not lines.lines:
        raise ParseError("empty input")
    lineno, toks = lines.next(1, "dimension count p")
    p = _int(toks[0], lineno, "p")
    if p < 1:
        raise ParseError(f"p must be >= 1, got {p}", lineno, toks[0][0])
    # MVBP: line 2 is q and line 3 has p+1 values; VBP: line 2 is W and line 3 is m.
    if lines.peek_len() == 1 and lines.peek_len(1) == p + 1:
        inst = _parse_mvbp(lines, p, name)
    elif lines.peek_len() == p:
        inst = _parse_vbp(lines, p, name)
    else:
        lineno, toks = lines.next(None, "header")
        raise ParseError("cannot recognise instance format", lineno, toks[0][0])
    lines.done()
    return inst


def _parse_mvbp(lines: _Lines, p: int, name: str) -> Instance:
    lineno, toks = lines.next(1, "bin type count q")
    q = _int(toks[0], lineno, "q")
    if q < 1:
        raise ParseError("no bin types", lineno, toks[0][0])
    bins = []
    for t in range(1, q + 1):
        lineno, toks = lines.next(p + 1, f"bin type {t} (cost and {p} capacities)")
        cost = _cost(toks[0], lineno)
        cap = tuple(_int(tok, lineno, "capacity") for tok in toks[1:])
        if cost <= 0:
            raise ParseError(f"bin type {t}: cost must be positive", lineno, toks[0][0])
        bins.append(BinType(t, cap, cost))
    lineno, toks = lines.next(1, "item count m")
    m = _int(toks[0], lineno, "m")
    if m < 1:
        raise ParseError("no items", lineno, toks[0][0])
    items = []
    for i in range(1, m + 1):
        lineno, toks = lines.next(2, f"item {i} (demand and incarnation count)")
        b = _int(toks[0], lineno, "demand")
        k = _int(toks[1], lineno, "incarnation count")
        if b < 1:
            raise ParseError(f"item {i}: zero demand", lineno, toks[0][0])
        if k < 1:
            raise ParseError(f"item {i}: no incarnations", lineno, toks[1][0])
        incs = []
        seen: dict[tuple[int, ...], int] = {}
        for j in range(1, k + 1):
            lineno, toks = lines.next(p, f"item {i} incarnation {j} weight")
            w = tuple(_int(tok, lineno, "weight") for tok in toks)
            if w in seen:
                raise ParseError(
                    f"item {i}: incarnation {j} duplicates incarnation {seen[w]}", lineno
                )
            seen[w] = j
            incs.append(Incarnation(i, j, w))
        items.append(ItemType(i, b, tuple(incs)))
    return Instance(p, tuple(items), tuple(bins), name)


def _parse_vbp(lines: _Lines, p: int, name: str) -> Instance:
    lineno, toks = lines.next(p, "capacity vector")
    cap = tuple(_int(tok, lineno, "capacity") for tok in toks)
    lineno, toks = lines.next(1, "item count m")
    m = _int(toks[0], lineno, "m")
    if m < 1:
        raise ParseError("no items", lineno, toks[0][0])
    items = []
    for i in range(1, m + 1):
        lineno, toks = lines.next(p + 1, f"item {i} (weights and demand)")
        w = tuple(_int(tok, lineno, "weight") for tok in toks[:p])
        b = _int(toks[p], lineno, "demand")
        if b < 1:
            raise ParseError(f"item {i}: zero demand", lineno, toks[p][0])
        items.append(ItemType(i, b, (Incarnation(i, 1, w),)))
    return Instance(p, tuple(items), (BinType(1, cap, Fraction(1)),), name)


def _fmt_cost(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def render_instance(inst: Instance) -> str:
    """Render in MVBP format; ``parse_instance`` inverts it."""
    out = [str(inst.dims), str(inst.q)]
    for bt in inst.bins:
        out.append(" ".join([_fmt_cost(bt.cost), *map(str, bt.capacity)]))
    out.append(str(inst.m))
    for it in inst.items:
        out.append(f"{it.demand} {len(it.incarnations)}")
        for inc in it.incarnations:
            out.append("  " + " ".join(map(str, inc.weight)))
    return "\n".join(out) + "\n"


def read_instance(path) -> Instance:
    with open(path) as fh:
        return parse_instance(fh.read(), name=str(path))


# ---------------------------------------------------------------------------
# benchmark generator


def generate_instance(range_class: int, bin_class: int, n: int, seed: int) -> Instance:
    """Random one-dimensional variable-sized bin packing instance.

    Weights are uniform integers in the range of ``range_class`` (1, 2 or 3);
    bin sizes are fixed by ``bin_class`` (3 or 5) and cost their size. Equal
    weights are merged into one item type, listed by decreasing weight.
    """
    if range_class not in RANGES:
        raise InstanceError(f"range class must be one of {sorted(RANGES)}, got {range_class}")
    if bin_class not in BIN_SIZES:
        raise InstanceError(f"bin class must be one of {sorted(BIN_SIZES)}, got {bin_class}")
    if n < 1:
        raise InstanceError(f"n must be >= 1, got {n}")
    lo, hi = RANGES[range_class]
    rng = np.random.default_rng(seed)
    draws = rng.integers(lo, hi + 1, size=n)
    values, counts = np.unique(draws, return_counts=True)
    sizes = BIN_SIZES[bin_class]
    return make_instance(
        [(s,) for s in sizes],
        [bin_cost_default(s) for s in sizes],
        [(int(c), [(int(v),)]) for v, c in zip(values[::-1], counts[::-1])],
        name=f"X{range_class}_q{bin_class}_n{n}_s{seed}",
    )
