"""Security-parameter calculus: levels, thresholds, bounds, costs."""
import math

import pytest

import reference
from ussim.secparams import (
    BoundReport,
    CostMode,
    ProtocolParams,
    SLevelSpec,
    TailMode,
    compute_delta,
    compute_dr,
    compute_lmax,
    consumption,
    id_bits,
    make_s_levels,
    p_forge,
    p_nontransfer,
    solve_k,
    tail_bound_pm,
    uniform_guess_pass_prob,
)

# l_max as a function of n: the largest l with (l+1)(l+2) < n/2.
LMAX_BANDS = {0: range(2, 5), 1: range(5, 13), 2: range(13, 25), 3: range(25, 33)}


def test_lmax_bands():
    for l, ns in LMAX_BANDS.items():
        for n in ns:
            assert compute_lmax(n) == l, f"n={n}"


def test_lmax_rejects_bad_n():
    for n in (1, 0, -3, True, 2.0):
        with pytest.raises(ValueError, match="n"):
            compute_lmax(n)


def test_dr_values():
    assert compute_dr(1, 7) == 1 / 7
    assert compute_dr(0, 2) == 0.0
    assert compute_dr(3, 25) == 3 / 25


def test_dr_rejects_half_and_above():
    with pytest.raises(ValueError, match="below 1/2"):
        compute_dr(1, 2)
    with pytest.raises(ValueError, match="l_max"):
        compute_dr(-1, 7)


def test_s_levels_default_ladder_is_exact():
    assert make_s_levels(1) == {1: 0.005, 0: 0.252, -1: 0.499}
    assert make_s_levels(0) == {0: 0.005, -1: 0.499}


def test_s_levels_endpoints_and_spacing():
    spec = SLevelSpec(eps1=0.01, eps2=0.02)
    for l_max in range(0, 6):
        levels = make_s_levels(l_max, spec)
        assert set(levels) == set(range(l_max, -2, -1))
        assert levels[l_max] == spec.eps1
        assert levels[-1] == pytest.approx(0.5 - spec.eps2, rel=1e-15)
        gaps = [levels[l - 1] - levels[l] for l in range(l_max, -1, -1)]
        assert max(gaps) - min(gaps) < 1e-12


def test_s_level_spec_validation():
    with pytest.raises(ValueError, match="eps1"):
        SLevelSpec(eps1=0.0)
    with pytest.raises(ValueError, match="eps2"):
        SLevelSpec(eps2=0.6)
    with pytest.raises(ValueError, match="eps1 \\+ eps2"):
        SLevelSpec(eps1=0.3, eps2=0.2)


def test_delta_formula():
    d_r = 1 / 7
    assert compute_delta(-1, d_r) == 0.5
    assert compute_delta(0, d_r) == 0.5 + d_r
    assert compute_delta(1, d_r) == 0.5 + 2 * d_r


def test_delta_rejects_unusable_level():
    # 0.5 + 4 * 0.14 exceeds 1: no quorum can meet it
    with pytest.raises(ValueError, match="exceeds 1"):
        compute_delta(3, 0.14)
    with pytest.raises(ValueError, match="level"):
        compute_delta(-2, 0.1)
    with pytest.raises(ValueError, match="d_r"):
        compute_delta(0, 0.5)


def test_tail_bound_both_modes():
    levels = make_s_levels(1)
    gap = levels[0] - levels[1]
    k = 900
    assert tail_bound_pm(1, k, levels, TailMode.SQUARED) == pytest.approx(
        math.exp(-(gap * gap) * k / 2), rel=1e-12
    )
    assert tail_bound_pm(1, k, levels, TailMode.LITERAL) == pytest.approx(
        math.exp(-gap * k / 2), rel=1e-12
    )


def test_tail_bound_needs_adjacent_levels():
    levels = make_s_levels(1)
    with pytest.raises(ValueError, match="levels"):
        tail_bound_pm(-1, 10, levels)
    with pytest.raises(ValueError, match="k"):
        tail_bound_pm(1, 0, levels)


def test_uniform_guess_pass_prob_exact_small_case():
    # k=4, t=1: each guess matches with prob 1/2, pass needs <= 1 mismatch
    assert uniform_guess_pass_prob(4, 1, 0.252) == pytest.approx(5 / 16, rel=1e-12)


def test_uniform_guess_pass_prob_strict_boundary():
    # s*k landing exactly on an integer is excluded by the strict test
    assert uniform_guess_pass_prob(4, 1, 0.25) == pytest.approx(1 / 16, rel=1e-12)
    assert uniform_guess_pass_prob(4, 1, 1 / 8) == pytest.approx(1 / 16, rel=1e-12)


def test_uniform_guess_pass_prob_matches_reference():
    for k, t, s in ((10, 2, 0.3), (50, 4, 0.1), (906, 8, 0.252)):
        worst = math.floor(s * k)
        if worst / k >= s:
            worst -= 1
        want = reference.binom_cdf(worst, k, 1 - 2.0**-t)
        assert uniform_guess_pass_prob(k, t, s) == pytest.approx(want, rel=1e-9)


def _direct_worst_bound(k: int, n: int = 7, l_max: int = 1) -> float:
    """Worst-level bound recomputed with plain float arithmetic."""
    d_r = l_max / n
    levels = make_s_levels(l_max)
    honest = math.floor(n * (1 - d_r) + 1e-12)
    n_p = honest * (honest - 1) // 2
    worst = 0.0
    for l in range(0, l_max + 1):
        gap = levels[l - 1] - levels[l]
        pref = n_p * (n * (compute_delta(l, d_r) - d_r) + 1)
        worst = max(worst, pref * math.exp(-(gap * gap) * k / 2))
    return worst


def test_solve_k_squared_default():
    k = solve_k(1e-10, 7, 1)
    assert k == 900
    assert _direct_worst_bound(900) <= 1e-10
    assert _direct_worst_bound(899) > 1e-10


def test_solve_k_literal():
    assert solve_k(1e-10, 7, 1, mode=TailMode.LITERAL) == 223


def test_solve_k_boundary_other_points():
    for p_target, n, l_max in ((1e-6, 7, 1), (1e-10, 13, 2), (1e-4, 3, 0)):
        k = solve_k(p_target, n, l_max)
        d_r = l_max / n
        levels = make_s_levels(l_max)
        honest = math.floor(n * (1 - d_r) + 1e-12)
        n_p = honest * (honest - 1) // 2

        def worst(kk):
            out = 0.0
            for l in range(0, l_max + 1):
                gap = levels[l - 1] - levels[l]
                pref = n_p * (n * (compute_delta(l, d_r) - d_r) + 1)
                out = max(out, pref * math.exp(-(gap * gap) * kk / 2))
            return out

        assert worst(k) <= p_target
        if k > 1:
            assert worst(k - 1) > p_target


def test_solve_k_rejects_bad_target():
    with pytest.raises(ValueError, match="p_target"):
        solve_k(0.0, 7, 1)
    with pytest.raises(ValueError, match="p_target"):
        solve_k(1.0, 7, 1)


def test_p_forge_prefactor_and_clamp():
    x = 2.0**-20
    assert p_forge(3, 0.0, x) == 9 * x
    assert p_forge(3, 0.0, 0.5) == 1.0
    assert p_forge(7, 1 / 7, 0.0) == 0.0
    with pytest.raises(ValueError, match="p_t"):
        p_forge(3, 0.0, 1.5)


def test_nontransfer_report_structure():
    params = ProtocolParams.build(7, 8, 8)
    assert params.k == 900
    for level, prefactor in ((1, 82.5), (0, 67.5)):
        rep = p_nontransfer(level, params)
        assert isinstance(rep, BoundReport)
        assert rep.n_p == 15
        assert rep.p_nontransfer == pytest.approx(prefactor * rep.p_m, rel=1e-9)
        assert rep.p_t == uniform_guess_pass_prob(900, 8, params.s_levels[level])
        assert rep.p_forge == p_forge(7, params.d_r, rep.p_t)
    assert p_nontransfer(1, params).p_nontransfer <= 1e-10
    assert p_nontransfer(0, params).p_nontransfer <= 1e-10


def test_honest_pair_count_other_shapes():
    params = ProtocolParams.build(8, 8, 8)
    # floor(8 * 7/8) = 7 honest recipients -> 21 pairs
    assert p_nontransfer(1, params).n_p == 21


def test_id_bits_values_and_crossing():
    assert id_bits(2, 1) == 1
    assert id_bits(2, 2) == 2
    assert id_bits(7, 1170) == 13  # 7 * 1170 = 8190 <= 2^13
    assert id_bits(7, 1171) == 14  # 7 * 1171 = 8197 > 2^13
    with pytest.raises(ValueError, match="k"):
        id_bits(7, 0)


def test_consumption_frozen_values():
    params = ProtocolParams.build(7, 8, 8, k=906)
    acc = consumption(params, CostMode.ACCOUNTING)
    assert (acc.preparation_bits, acc.sharing_bits, acc.total_bits) == (
        710304,
        1103508,
        1813812,
    )
    assert acc.id_bits == 13
    lit = consumption(params, CostMode.LITERAL)
    assert (lit.preparation_bits, lit.sharing_bits, lit.total_bits) == (
        355152,
        882,
        356034,
    )


def test_consumption_smallest_instance():
    params = ProtocolParams.build(2, 1, 1, l_max=0, k=1)
    acc = consumption(params, CostMode.ACCOUNTING)
    # preparation: 2 batches of 2 keys of 2 bits; sharing: 2 transfers of
    # 1 key carrying 1 id bit + 2 key bits
    assert (acc.preparation_bits, acc.sharing_bits, acc.total_bits) == (8, 6, 14)
    lit = consumption(params, CostMode.LITERAL)
    assert lit.total_bits == 8


def test_consumption_default_mode_is_accounting():
    params = ProtocolParams.build(7, 8, 8, k=900)
    assert consumption(params).total_bits == 1801800


def test_build_defaults():
    params = ProtocolParams.build(7, 8)
    assert params.tag_len_bits == 8
    assert params.l_max == 1
    assert params.d_r == 1 / 7
    assert params.k == 900
    assert params.s_levels == {1: 0.005, 0: 0.252, -1: 0.499}


def test_build_wide_message_caps_tag_length():
    assert ProtocolParams.build(7, 128, k=10).tag_len_bits == 32


def test_params_validation_messages():
    good = ProtocolParams.build(7, 8, 8, k=10)
    with pytest.raises(ValueError, match="tag_len_bits"):
        ProtocolParams.build(7, 8, 9, k=10)
    with pytest.raises(ValueError, match="k"):
        ProtocolParams.build(7, 8, 8, k=0)
    with pytest.raises(ValueError, match="d_r"):
        ProtocolParams.build(7, 8, 8, d_r=0.6, k=10)
    with pytest.raises(ValueError, match="l_max \\+ 1"):
        ProtocolParams.build(7, 8, 8, l_max=2, d_r=0.2, k=10)
    with pytest.raises(ValueError, match="p_target"):
        ProtocolParams.build(7, 8, 8, k=10, p_target=0.0)
    with pytest.raises(ValueError, match="evenly spaced"):
        ProtocolParams(
            n_recipients=good.n_recipients,
            msg_len_bits=good.msg_len_bits,
            tag_len_bits=good.tag_len_bits,
            l_max=1,
            d_r=good.d_r,
            s_levels={1: 0.005, 0: 0.1, -1: 0.499},
            k=10,
        )
    with pytest.raises(ValueError, match="cover levels"):
        ProtocolParams(
            n_recipients=good.n_recipients,
            msg_len_bits=good.msg_len_bits,
            tag_len_bits=good.tag_len_bits,
            l_max=1,
            d_r=good.d_r,
            s_levels={0: 0.005, -1: 0.499},
            k=10,
        )


def test_literal_mode_needs_smaller_k():
    # exp(-gap*k/2) falls faster than exp(-gap^2*k/2) when gap < 1
    assert solve_k(1e-10, 7, 1, mode=TailMode.LITERAL) < solve_k(1e-10, 7, 1)
