//! Properties of self-trapped states sampled on grids.

use selftrap_core::madelung::{convexity_min, quantum_force, quantum_potential, MaskedField};
use selftrap_core::selftrap::{cosh_approx, matched_gaussian, rescale, solve_dimensionless, SelfTrapState};
use selftrap_core::{Backend, Grid, PhysParams};

const SWEEP: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];

fn state(u0: f64, params: PhysParams, pad: f64, n: usize) -> SelfTrapState {
    let prof = solve_dimensionless(u0, 1e-10, 1e-12).unwrap();
    let half = pad * prof.x_m / params.lambda();
    rescale(&prof, &params, &Grid::bounded(-half, half, n).unwrap()).unwrap()
}

fn support_potential(st: &SelfTrapState) -> MaskedField {
    let vals = st
        .potential
        .values()
        .iter()
        .zip(&st.support)
        .map(|(&u, &s)| s.then_some(u))
        .collect();
    MaskedField::from_options(st.grid, vals, 6)
}

#[test]
fn construction_sweep() {
    for u0 in SWEEP {
        let st = state(u0, PhysParams::unit(), 1.1, 4001);
        assert!(st.q_m.is_finite());
        let c = st.grid.nearest(0.0);
        assert_eq!(st.grid.point(c), 0.0);
        let u = st.potential.values();
        assert!((u[c] - st.u_center()).abs() < 1e-8);
        let u_min = (0..u.len()).filter(|&i| st.support[i]).map(|i| u[i]).fold(f64::INFINITY, f64::min);
        assert_eq!(u_min, u[c]);
        assert!(convexity_min(&support_potential(&st)).unwrap() > 0.0);
        let rho = st.rho.values();
        assert!((0..rho.len()).all(|i| (rho[i] - rho[st.mirror(i)]).abs() <= 1e-8));
        assert!((st.rho.integrate().unwrap() - 1.0).abs() < 1e-8);
    }
}

#[test]
fn origin_curvature_is_lambda_squared_u0() {
    let p = PhysParams::new(1.0, 1.0, 0.5).unwrap();
    let st = state(1.0, p, 1.1, 8001);
    let curv = selftrap_core::madelung::curvature(&support_potential(&st), Backend::Fd4, 6).unwrap();
    let c = st.grid.nearest(0.0);
    let expected = p.lambda().powi(2) * st.u_center();
    assert!((curv.get(c).unwrap() - expected).abs() < 1e-6 * expected);
}

#[test]
fn closure_holds_on_the_resolved_support() {
    for u0 in SWEEP {
        let st = state(u0, PhysParams::unit(), 1.05, 40001);
        let fd = quantum_potential(&st.rho, &st.params, 1e-10).unwrap();
        let worst = fd
            .interior_values()
            .filter(|&(i, _)| st.rho.values()[i] > 1e-6)
            .map(|(i, v)| (v - st.potential.values()[i]).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 1e-4 * st.u_center(), "u0 = {u0}: {worst}");
    }
}

/// `U = -(ħ²/2m)((ln R)'' + ((ln R)')²)` evaluated from ln ρ.
#[test]
fn log_form_agrees_with_amplitude_form() {
    let st = state(1.0, PhysParams::unit(), 1.1, 8001);
    let fd = quantum_potential(&st.rho, &st.params, 1e-10).unwrap();
    let g = st.grid;
    let half_log: Vec<f64> = st.rho.values().iter().map(|r| 0.5 * r.max(1e-300).ln()).collect();
    let d1 = g.deriv1(&half_log, Backend::Fd4).unwrap();
    let d2 = g.deriv2(&half_log, Backend::Fd4).unwrap();
    let core = 0.8 * st.q_m;
    for (i, v) in fd.interior_values() {
        if g.point(i).abs() < core {
            let log_form = -0.5 * (d2[i] + d1[i] * d1[i]);
            assert!((log_form - v).abs() < 1e-7, "{log_form} vs {v}");
        }
    }
}

#[test]
fn log_density_is_linear_in_potential() {
    for beta in [1.0, 2.5] {
        let p = PhysParams::new(1.0, 1.0, beta).unwrap();
        let st = state(1.0, p, 1.1, 4001);
        let pts: Vec<(f64, f64)> = (0..st.grid.len())
            .filter(|&i| st.rho.values()[i] > 1e-6)
            .map(|i| (st.potential.values()[i], st.rho.values()[i].ln()))
            .collect();
        let n = pts.len() as f64;
        let (mx, my) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
        let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
        let slope = sxy / sxx;
        assert!((slope + beta).abs() < 0.01 * beta, "slope {slope}");
    }
}

#[test]
fn cosh_approximation_window() {
    let prof = solve_dimensionless(1.0, 1e-10, 1e-12).unwrap();
    let p = PhysParams::unit();
    let lambda = p.lambda();
    let dev = |x: f64| (cosh_approx(1.0, 0.0, &p, x / lambda) - prof.eval(x).unwrap()).abs();
    let inner = (0..=100).map(|k| dev(0.001 * k as f64)).fold(0.0, f64::max);
    assert!(inner <= 1e-3);
    assert!(dev(1.0) >= 10.0 * inner);
    let outer: Vec<f64> = (0..=200).map(|k| dev(0.1 + k as f64 * (0.9 * prof.x_m - 0.1) / 200.0)).collect();
    assert!(outer.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn amplitude_is_concave_on_support() {
    for u0 in SWEEP {
        let st = state(u0, PhysParams::unit(), 1.1, 4001);
        let amp = st.amplitude();
        let mask: Vec<bool> = st.rho.values().iter().map(|&r| r > 1e-16).collect();
        let d2 = st.grid.deriv_masked(amp.values(), &mask, 2, Backend::Fd4).unwrap();
        let edge = selftrap_core::grid::edge_flags(&mask, 6, false);
        for i in 0..mask.len() {
            if mask[i] && !edge[i] {
                assert!(d2[i].unwrap() < 0.0, "u0 = {u0}, q = {}", st.grid.point(i));
            }
        }
    }
}

#[test]
fn density_vanishes_quadratically_at_the_edge() {
    for u0 in SWEEP {
        let st = state(u0, PhysParams::unit(), 1.05, 20001);
        let (mut sx, mut sy, mut sxx, mut sxy, mut n) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (i, &r) in st.rho.values().iter().enumerate() {
            let s = st.q_m - st.grid.point(i).abs();
            if r > 0.0 && s > 1e-4 * st.q_m && s < 1e-2 * st.q_m {
                let (x, y) = (s.ln(), r.ln());
                sx += x;
                sy += y;
                sxx += x * x;
                sxy += x * y;
                n += 1.0;
            }
        }
        let p = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        assert!((p - 2.0).abs() < 0.1, "u0 = {u0}: p = {p}");
    }
}

#[test]
fn support_scales_with_lambda() {
    let a = PhysParams::new(1.0, 1.0, 1.0).unwrap();
    let b = PhysParams::new(1.0, 1.0, 0.25).unwrap();
    assert_eq!(b.lambda(), 2.0 * a.lambda());
    // Dyadic grids: the points of the second are exactly half those of the first.
    let ga = Grid::bounded(-2.0, 2.0, 4097).unwrap();
    let gb = Grid::bounded(-1.0, 1.0, 4097).unwrap();
    let prof = solve_dimensionless(1.0, 1e-10, 1e-12).unwrap();
    let sa = rescale(&prof, &a, &ga).unwrap();
    let sb = rescale(&prof, &b, &gb).unwrap();
    assert_eq!(sa.q_m * a.lambda(), sb.q_m * b.lambda());
    for i in 0..ga.len() {
        assert_eq!(gb.point(i), 0.5 * ga.point(i));
        assert!((sb.rho.values()[i] - 2.0 * sa.rho.values()[i]).abs() < 1e-12);
        assert!((sb.potential.values()[i] - 4.0 * sa.potential.values()[i]).abs() < 1e-12);
    }
}

#[test]
fn matched_gaussian_is_more_peaked_and_not_compact() {
    let st = state(1.0, PhysParams::unit(), 2.5, 4001);
    let g = matched_gaussian(&st).unwrap();
    let c = st.grid.nearest(0.0);
    assert!(g.density_at(0.0, 0.0) > st.rho.values()[c]);
    assert!(g.density_at(0.0, 2.0 * st.q_m) > 0.0);
    let beyond = st.grid.nearest(2.0 * st.q_m);
    assert_eq!(st.rho.values()[beyond], 0.0);
    assert!((g.sigma * g.sigma - st.second_moment).abs() < 1e-15);
}

#[test]
fn quantum_force_is_restoring() {
    let st = state(2.0, PhysParams::unit(), 1.1, 4001);
    let f = quantum_force(&support_potential(&st)).unwrap();
    for (i, v) in f.interior_values() {
        let q = st.grid.point(i);
        if q > 0.0 {
            assert!(v < 0.0);
        } else if q < 0.0 {
            assert!(v > 0.0);
        } else {
            assert!(v.abs() < 1e-10);
        }
    }
}
