import re
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ntx.diagram import DEFAULT_COLORS, DiagramOptions, layout_transition_diagram, render_bar_chart, render_svg
from ntx.transfer import partition_donors_acceptors, solve_proportional, solve_quadratic

GOLDEN = Path(__file__).parent / "golden"
TQ4 = ([94.2, 5.8], [7.1, 92.9])
NAMES = ["THIO", "QUIN"]
COLORS = ["#d62728", "#1f77b4"]


def width(span):
    return span[1] - span[0]


def tq4_spec():
    r = solve_proportional(partition_donors_acceptors(*TQ4))
    return layout_transition_diagram(r.full_matrix, NAMES, COLORS)


def test_single_group():
    d = layout_transition_diagram([[1.0]], ["A"])
    assert len(d.bottom_bars) == len(d.top_bars) == len(d.connectors) == 1
    c = d.connectors[0]
    assert c.local and c.bottom == d.bottom_bars[0] and c.top == d.top_bars[0]
    assert width(d.bottom_bars[0]) == pytest.approx(d.drawable_width)
    assert d.colors == (DEFAULT_COLORS[0],)


def test_tq_state_4_shares():
    d = tq4_spec()
    w = d.drawable_width
    assert width(d.bottom_bars[0]) / w == pytest.approx(0.942)
    assert width(d.top_bars[1]) / w == pytest.approx(0.929)
    big = max(d.connectors, key=lambda c: c.value)
    assert (big.source, big.target) == (0, 1)
    assert big.value == pytest.approx(87.1)
    assert width(big.bottom) / w == pytest.approx(0.871)


def test_rejects_bad_matrices():
    with pytest.raises(ValueError, match="negative"):
        layout_transition_diagram([[1.0, -0.1], [0.0, 1.0]], ["A", "B"])
    with pytest.raises(ValueError, match="zero"):
        layout_transition_diagram(np.zeros((2, 2)), ["A", "B"])
    with pytest.raises(ValueError, match="shape"):
        layout_transition_diagram(np.eye(2), ["A"])


def test_render_is_deterministic():
    assert render_svg(tq4_spec()) == render_svg(tq4_spec())


def test_transition_golden():
    assert render_svg(tq4_spec()) == (GOLDEN / "transition_two_groups.svg").read_bytes()


def test_bar_chart_golden():
    got = render_bar_chart(*TQ4, NAMES, COLORS)
    assert got == (GOLDEN / "bars_two_groups.svg").read_bytes()


def test_bar_chart_single_pair_and_label_sums():
    svg = render_bar_chart([0.3], [0.7], ["A"]).decode()
    assert svg.count('class="hole"') == 1 and svg.count('class="particle"') == 1
    svg = render_bar_chart([1, 1, 1], [2, 3, 5], ["A", "B", "C"]).decode()
    pcts = [float(v) for v in re.findall(r">(\d+\.\d)%<", svg)]
    assert abs(sum(pcts[0::2]) - 100) <= 0.2 and abs(sum(pcts[1::2]) - 100) <= 0.2


def test_sub_epsilon_ribbon_kept_but_not_drawn():
    Q = np.array([[50.0, 0.05], [0.0, 49.95]])
    d = layout_transition_diagram(Q, ["A", "B"], options=DiagramOptions(epsilon=0.1))
    tiny = [c for c in d.connectors if c.source == 0 and c.target == 1][0]
    assert not tiny.drawn and tiny.value == 0.05
    assert render_svg(d).decode().count("<path") == 2


def six_group_matrix(seed):
    rng = np.random.default_rng(seed)
    hole = rng.dirichlet(np.ones(6)) * 100
    particle = rng.dirichlet(np.ones(6)) * 100
    return solve_quadratic(partition_donors_acceptors(hole, particle)).full_matrix


@pytest.mark.parametrize("seed", range(5))
def test_six_groups_spans_stay_inside_bars(seed):
    d = layout_transition_diagram(six_group_matrix(seed), [f"G{i}" for i in range(6)])
    tol = 1e-9
    for c in d.connectors:
        b0, b1 = d.bottom_bars[c.source]
        t0, t1 = d.top_bars[c.target]
        assert b0 - tol <= c.bottom[0] <= c.bottom[1] <= b1 + tol
        assert t0 - tol <= c.top[0] <= c.top[1] <= t1 + tol
    # bars never overlap
    for bars in (d.bottom_bars, d.top_bars):
        for (a0, a1), (b0, b1) in zip(bars, bars[1:]):
            assert a1 < b0


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
def test_widths_and_mass_balance(seed, M):
    rng = np.random.default_rng(seed)
    Q = rng.uniform(0, 1, size=(M, M)) * (rng.random((M, M)) < 0.6)
    Q[0, 0] += 0.5
    d = layout_transition_diagram(Q, [f"G{i}" for i in range(M)])
    o = d.options
    total = sum(width(b) for b in d.bottom_bars)
    assert total == pytest.approx(o.width - 2 * o.margin - (M - 1) * o.gap)
    assert sum(width(t) for t in d.top_bars) == pytest.approx(total)
    for i, bar in enumerate(d.bottom_bars):
        assert abs(sum(width(c.bottom) for c in d.connectors if c.source == i) - width(bar)) <= 0.5
    for j, bar in enumerate(d.top_bars):
        assert abs(sum(width(c.top) for c in d.connectors if c.target == j) - width(bar)) <= 0.5
    scale = total / Q.sum()
    for c in d.connectors:
        # quantized to 0.01 px on output; 0.5 px is the contract
        assert abs(round(width(c.bottom), 2) - c.value * scale) <= 0.5
