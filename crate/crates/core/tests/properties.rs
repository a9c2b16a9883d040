use num_complex::Complex64;
use proptest::prelude::*;

use selftrap_core::evolve::{step, GaussianSpec, WaveField};
use selftrap_core::madelung::{quantum_potential, MadelungFields, MaskOptions};
use selftrap_core::selftrap::{build_state, SolveOptions};
use selftrap_core::{Backend, Grid, PhysParams};

fn backends() -> impl Strategy<Value = Backend> {
    prop_oneof![Just(Backend::Fd2), Just(Backend::Fd4), Just(Backend::Spectral)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn derivatives_are_linear(a in -3.0..3.0f64, b in -3.0..3.0f64, k in 1..6i32, backend in backends()) {
        let g = Grid::periodic(0.0, std::f64::consts::TAU, 128).unwrap();
        let f: Vec<f64> = g.points().iter().map(|x| (k as f64 * x).sin()).collect();
        let h: Vec<f64> = g.points().iter().map(|x| (2.0 * x).cos() + 0.3).collect();
        let mix: Vec<f64> = f.iter().zip(&h).map(|(x, y)| a * x + b * y).collect();
        for order in [1, 2] {
            let d = |v: &[f64]| if order == 1 { g.deriv1(v, backend) } else { g.deriv2(v, backend) }.unwrap();
            let (df, dh, dm) = (d(&f), d(&h), d(&mix));
            for i in 0..g.len() {
                prop_assert!((dm[i] - a * df[i] - b * dh[i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn odd_integrands_vanish(c1 in -2.0..2.0f64, c3 in -2.0..2.0f64, w in 0.5..4.0f64, n in 11..400usize) {
        let g = Grid::bounded(-w, w, 2 * n + 1).unwrap();
        let f: Vec<f64> = g.points().iter().map(|q| c1 * q + c3 * q.powi(3) * (-q * q).exp()).collect();
        let scale = f.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        prop_assert!(g.integrate(&f).unwrap().abs() < 1e-12 * scale * w);
    }

    #[test]
    fn larger_floor_never_unmasks(seed in proptest::collection::vec(0.0..1.0f64, 64), e1 in -12.0..-2.0f64, de in 0.0..4.0f64) {
        let g = Grid::periodic(-4.0, 4.0, 64).unwrap();
        let rho = g.sample(|q| (-q * q).exp());
        let values: Vec<f64> = rho.values().iter().zip(&seed).map(|(r, s)| r * s.powi(6)).collect();
        let rho = selftrap_core::RealField::new(g, values).unwrap();
        let lo = quantum_potential(&rho, &PhysParams::unit(), 10f64.powf(e1));
        let hi = quantum_potential(&rho, &PhysParams::unit(), 10f64.powf(e1 + de));
        if let Ok(hi) = hi {
            let lo = lo.unwrap();
            for i in 0..g.len() {
                prop_assert!(!hi.mask()[i] || lo.mask()[i]);
            }
        }
    }

    #[test]
    fn global_phase_changes_nothing(phi in 0.0..std::f64::consts::TAU, a in -2.0..2.0f64, t in 0.0..1.5f64) {
        let p = PhysParams::unit();
        let g = Grid::periodic(-15.0, 15.0, 512).unwrap();
        let spec = GaussianSpec::new(1.0, p).unwrap();
        let psi = g.sample_complex(|q| spec.psi_at(t, q) * Complex64::from_polar(1.0, a * q * q / 2.0));
        let rotated = psi.map(|z| z * Complex64::from_polar(1.0, phi));
        let opts = MaskOptions::default();
        let f0 = MadelungFields::from_psi(&psi, &p, &opts, t).unwrap();
        let f1 = MadelungFields::from_psi(&rotated, &p, &opts, t).unwrap();
        for i in 0..g.len() {
            prop_assert!((f0.rho.values()[i] - f1.rho.values()[i]).abs() < 1e-14);
            for (x, y) in [(&f0.potential, &f1.potential), (&f0.v, &f1.v), (&f0.theta, &f1.theta)] {
                prop_assert_eq!(x.mask()[i], y.mask()[i]);
                if let (Some(u), Some(w)) = (x.get(i), y.get(i)) {
                    prop_assert!((u - w).abs() <= 1e-8 * (1.0 + u.abs()), "{} vs {}", u, w);
                }
            }
        }
    }

    #[test]
    fn backward_step_undoes_forward_step(dt in 0.01..2.0f64, sigma in 0.5..1.5f64, k0 in -2.0..2.0f64) {
        let p = PhysParams::new(1.0, 1.3, 1.0).unwrap();
        let g = Grid::periodic(-20.0, 20.0, 512).unwrap();
        let spec = GaussianSpec::new(sigma, p).unwrap();
        let psi = g.sample_complex(|q| spec.psi_at(0.0, q) * Complex64::from_polar(1.0, k0 * q));
        let w = WaveField::new(0.0, psi.clone());
        let there = step(&w, &p, dt).unwrap();
        prop_assert!((there.norm() - w.norm()).abs() < 1e-12);
        let back = step(&there, &p, -dt).unwrap();
        prop_assert!(back.t.abs() < 1e-15);
        for (x, y) in back.psi.values().iter().zip(psi.values()) {
            prop_assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn states_are_even_and_scale_with_lambda(u0 in 0.2..5.0f64, beta in 0.2..5.0f64) {
        let p = PhysParams::new(1.0, 1.0, beta).unwrap();
        let opts = SolveOptions::default();
        let q_m0 = build_state(u0, &PhysParams::unit(), &Grid::bounded(-4.0, 4.0, 201).unwrap(), &opts).unwrap().q_m;
        let half = 1.2 * q_m0 * PhysParams::unit().lambda() / p.lambda();
        let st = build_state(u0, &p, &Grid::bounded(-half, half, 401).unwrap(), &opts).unwrap();
        prop_assert!((st.q_m * p.lambda() - q_m0 * 2.0).abs() < 1e-12 * q_m0);
        for i in 0..st.grid.len() {
            prop_assert_eq!(st.rho.values()[i], st.rho.values()[st.mirror(i)]);
        }
    }
}
