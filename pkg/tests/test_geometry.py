"""Charts, stencils, quadrature, partitions of unity, transition action."""

from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ncym.errors import ShapeError
from ncym.geometry import (
    adjoint_partial_derivative,
    build_sphere_two_charts,
    build_torus,
    expm_antihermitian,
    flat_metric,
    grid_points,
    integrate,
    interp_chart,
    partial_derivative,
    rep_of_group,
    round_sphere_metric,
    su_log,
    transition_conjugate,
)
from ncym.geometry import _radial_profile
from ncym.lie_core import build_representation, build_su


def test_torus_volume_exact():
    man = build_torus(2, 16)
    g = flat_metric(man)
    vol = integrate(man, g, {"t0": np.ones(man.charts[0].shape)})
    assert abs(vol - (2 * np.pi) ** 2) < 1e-12


def test_torus_sin_integrates_to_zero():
    man = build_torus(2, 16)
    g = flat_metric(man)
    x = grid_points(man.charts[0])
    assert abs(integrate(man, g, {"t0": np.sin(x[..., 0])})) < 1e-12


def test_sphere4_volume_within_2_percent():
    man = build_sphere_two_charts(4, 16, 1.0)
    g = round_sphere_metric(man)
    one = {c.name: np.ones(c.shape) for c in man.charts}
    vol = integrate(man, g, one)
    exact = 8.0 * np.pi**2 / 3.0
    assert abs(vol - exact) / exact < 0.02


def test_sphere2_volume_converges():
    exact = 4.0 * np.pi
    errs = []
    for n in (16, 32):
        man = build_sphere_two_charts(2, n, 1.0)
        g = round_sphere_metric(man)
        one = {c.name: np.ones(c.shape) for c in man.charts}
        errs.append(abs(integrate(man, g, one) - exact))
    assert errs[1] < errs[0]
    assert errs[1] / exact < 1e-4


def test_sphere_metric_at_origin():
    # conformal factor 4 r^4 / (r^2 + |x|^2)^2 evaluates to 4 at the chart origin
    man = build_sphere_two_charts(4, 8, radius=np.sqrt(2.0))
    g = round_sphere_metric(man)
    assert np.max(np.abs(g.fn("north", np.zeros(4)) - 4.0 * np.eye(4))) < 1e-12


def test_derivative_second_order_ratio():
    errs = []
    for n in (16, 32):
        man = build_torus(2, n)
        ch = man.charts[0]
        x = grid_points(ch)
        f = np.sin(x[..., 0]) * np.cos(2 * x[..., 1])
        df = partial_derivative(f, ch, 0)
        errs.append(np.max(np.abs(df - np.cos(x[..., 0]) * np.cos(2 * x[..., 1]))))
    ratio = errs[0] / errs[1]
    assert 3.2 < ratio < 4.8


def test_derivative_bounded_chart_second_order():
    errs = []
    for n in (16, 32):
        man = build_sphere_two_charts(2, n, 1.0)
        ch = man.chart("north")
        x = grid_points(ch)
        f = np.sin(x[..., 0]) * np.cos(x[..., 1])
        df = partial_derivative(f, ch, 0)
        errs.append(np.max(np.abs(df - np.cos(x[..., 0]) * np.cos(x[..., 1]))))
    ratio = errs[0] / errs[1]
    assert 3.2 < ratio < 4.8


def test_derivative_fourth_order_flag():
    errs = []
    for n in (16, 32):
        man = build_torus(2, n)
        ch = man.charts[0]
        x = grid_points(ch)
        df = partial_derivative(np.sin(x[..., 0]), ch, 0, order=4)
        errs.append(np.max(np.abs(df - np.cos(x[..., 0]))))
    assert errs[0] / errs[1] > 10.0


def test_derivative_exact_on_linear_bounded():
    man = build_sphere_two_charts(2, 8, 1.0)
    ch = man.chart("north")
    x = grid_points(ch)
    f = 2.0 * x[..., 0] - 0.7 * x[..., 1]
    assert np.max(np.abs(partial_derivative(f, ch, 0) - 2.0)) < 1e-12
    assert np.max(np.abs(partial_derivative(f, ch, 1) + 0.7)) < 1e-12


def test_mixed_partials_commute():
    man = build_sphere_two_charts(2, 16, 1.0)
    ch = man.chart("north")
    x = grid_points(ch)
    f = np.exp(np.sin(x[..., 0]) + x[..., 1] ** 2 / 3.0)
    c1 = partial_derivative(partial_derivative(f, ch, 0), ch, 1)
    c2 = partial_derivative(partial_derivative(f, ch, 1), ch, 0)
    assert np.max(np.abs(c1 - c2)) < 1e-12


@given(st.integers(0, 10**6))
@settings(max_examples=10, deadline=None)
def test_adjoint_stencil_is_exact(seed):
    rng = np.random.default_rng(seed)
    man = build_sphere_two_charts(2, 8, 1.0)
    ch = man.chart("north")
    u = rng.normal(size=ch.shape)
    v = rng.normal(size=ch.shape)
    for ax in range(2):
        lhs = np.sum(partial_derivative(u, ch, ax) * v)
        rhs = np.sum(u * adjoint_partial_derivative(v, ch, ax))
        assert abs(lhs - rhs) < 1e-10


def test_weights_sum_to_one_across_charts():
    man = build_sphere_two_charts(2, 16, 1.0)
    ov = man.overlap("north", "south")
    ch = man.chart("north")
    x = grid_points(ch)
    mask = ov.in_overlap(x)
    y = ov.point_map(x[mask])
    r, margin = man.params["radius"], man.params["margin"]
    rho_s = np.sqrt(np.sum(y * y, axis=-1))
    own = _radial_profile(rho_s, r, margin)
    oth = _radial_profile(r * r / rho_s, r, margin)
    w_south = own / (own + oth)
    assert np.max(np.abs(man.weights["north"][mask] + w_south - 1.0)) < 1e-12


def test_point_map_round_trip():
    man = build_sphere_two_charts(2, 16, 1.5)
    ov = man.overlap("north", "south")
    x = grid_points(man.chart("north"))
    mask = ov.in_overlap(x)
    back = ov.point_map(ov.point_map(x[mask]))
    assert np.max(np.abs(back - x[mask])) < 1e-12


def test_pou_small_perturbation_insensitivity():
    # a smooth perturbation of the weights (still summing to one) moves the
    # integral by at most the perturbation size times the quadrature error
    man = build_sphere_two_charts(2, 32, 1.0)
    g = round_sphere_metric(man)
    r, margin = man.params["radius"], man.params["margin"]
    eps = 1e-6
    new_w = {}
    for ch in man.charts:
        x = grid_points(ch)
        rho = np.sqrt(np.sum(x * x, axis=-1))
        own = _radial_profile(rho, r, margin)
        oth = _radial_profile(r * r / np.maximum(rho, 1e-300), r, margin)
        bump = own * oth  # smooth, supported exactly in the overlap annulus
        sign = 1.0 if ch.name == "north" else -1.0
        new_w[ch.name] = man.weights[ch.name] + sign * eps * bump
    man2 = replace(man, weights=new_w)
    f = {}
    for ch in man.charts:
        x = grid_points(ch)
        rho2 = np.sum(x * x, axis=-1)
        z = (1.0 - rho2) / (1.0 + rho2)
        if ch.name == "south":
            z = -z
        f[ch.name] = 1.0 + z + z * z
    assert abs(integrate(man, g, f) - integrate(man2, g, f)) < 1e-10


def test_pou_change_exact_for_localized_integrand():
    # f supported where every admissible weight is identically 1 on one chart
    man = build_sphere_two_charts(2, 32, 1.0)
    g = round_sphere_metric(man)
    r, margin = man.params["radius"], man.params["margin"]

    def alt(man, p):
        out = {}
        for ch in man.charts:
            x = grid_points(ch)
            rho = np.sqrt(np.sum(x * x, axis=-1))
            own = _radial_profile(rho, r, margin) ** p
            oth = _radial_profile(r * r / np.maximum(rho, 1e-300), r, margin) ** p
            tot = own + oth
            out[ch.name] = np.where(tot > 0, own / np.where(tot > 0, tot, 1.0), 0.0)
        return out

    man2 = replace(man, weights=alt(man, 2.0))
    f = {}
    for ch in man.charts:
        x = grid_points(ch)
        rho = np.sqrt(np.sum(x * x, axis=-1))
        f[ch.name] = np.where(rho < 0.5, np.cos(3.0 * x[..., 0]), 0.0)
        if ch.name == "south":
            f[ch.name] = np.zeros(ch.shape)
    assert abs(integrate(man, g, f) - integrate(man2, g, f)) < 1e-12


def test_grid_size_guards():
    with pytest.raises(ShapeError):
        build_torus(2, 4)
    with pytest.raises(ShapeError):
        build_sphere_two_charts(2, 6, 1.0)
    with pytest.raises(ShapeError):
        build_sphere_two_charts(3, 16, 1.0)


def test_interp_chart_matches_smooth_field():
    man = build_sphere_two_charts(2, 32, 1.0)
    ch = man.chart("north")
    x = grid_points(ch)
    f = np.sin(x[..., 0]) + np.cos(x[..., 1])
    pts = np.array([[0.3, -0.2], [0.11, 0.47]])
    vals = interp_chart(ch, f, pts)
    exact = np.sin(pts[:, 0]) + np.cos(pts[:, 1])
    assert np.max(np.abs(vals - exact)) < 5e-3


def test_su_log_round_trip_and_tracelessness():
    lb = build_su(2)
    rng = np.random.default_rng(3)
    xi = 2.5 * rng.normal(size=(200, 3))
    t = expm_antihermitian(lb.contract(xi))
    lg = su_log(t)
    assert np.max(np.abs(np.trace(lg, axis1=-2, axis2=-1))) < 1e-10
    assert np.max(np.abs(expm_antihermitian(lg) - t)) < 1e-10


def test_rep_of_group_is_homomorphism():
    lb = build_su(2)
    rep = build_representation(lb, "adjoint")
    rng = np.random.default_rng(5)
    t1 = expm_antihermitian(lb.contract(rng.normal(size=(40, 3))))
    t2 = expm_antihermitian(lb.contract(rng.normal(size=(40, 3))))
    lhs = rep_of_group(lb, rep, t1 @ t2)
    rhs = rep_of_group(lb, rep, t1) @ rep_of_group(lb, rep, t2)
    assert np.max(np.abs(lhs - rhs)) < 1e-10


def test_transition_conjugate_inverts():
    lb = build_su(2)
    rep = build_representation(lb, "fundamental")
    rng = np.random.default_rng(11)
    t = expm_antihermitian(lb.contract(rng.normal(size=(30, 3))))
    s = rng.normal(size=(30, 2, 2)) + 1j * rng.normal(size=(30, 2, 2))
    out = transition_conjugate(lb, rep, t, s)
    back = transition_conjugate(lb, rep, t, out, inverse=True)
    assert np.max(np.abs(back - s)) < 1e-12
