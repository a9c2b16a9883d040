use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{ComplexField, Grid, RealField};
use crate::selftrap::PhysParams;

/// Free Gaussian packet of initial width `sigma`, centred at rest at `q = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianSpec {
    pub sigma: f64,
    pub params: PhysParams,
}

impl GaussianSpec {
    pub fn new(sigma: f64, params: PhysParams) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::Config(format!("sigma must be positive, got {sigma}")));
        }
        Ok(Self { sigma, params })
    }

    /// `σ_t² = σ² + ħ²t²/(4m²σ²)`.
    pub fn sigma_t_sq(&self, t: f64) -> f64 {
        let PhysParams { hbar, m, .. } = self.params;
        let s2 = self.sigma * self.sigma;
        s2 + hbar * hbar * t * t / (4.0 * m * m * s2)
    }

    pub fn density_at(&self, t: f64, q: f64) -> f64 {
        let s2 = self.sigma_t_sq(t);
        (-q * q / (2.0 * s2)).exp() / (2.0 * PI * s2).sqrt()
    }

    /// `U = -ħ²q²/(8mσ_t⁴) + ħ²/(4mσ_t²)`, from `U = -(ħ²/2m) R''/R`.
    pub fn potential_at(&self, t: f64, q: f64) -> f64 {
        let PhysParams { hbar, m, .. } = self.params;
        let s2 = self.sigma_t_sq(t);
        -hbar * hbar * q * q / (8.0 * m * s2 * s2) + hbar * hbar / (4.0 * m * s2)
    }

    /// `U''`, uniform in space: `-ħ²/(4mσ_t⁴)`.
    pub fn curvature_at(&self, t: f64) -> f64 {
        let PhysParams { hbar, m, .. } = self.params;
        let s2 = self.sigma_t_sq(t);
        -hbar * hbar / (4.0 * m * s2 * s2)
    }

    /// `v = q ħ²t/(4m²σ²σ_t²)`.
    pub fn velocity_at(&self, t: f64, q: f64) -> f64 {
        let PhysParams { hbar, m, .. } = self.params;
        q * hbar * hbar * t / (4.0 * m * m * self.sigma * self.sigma * self.sigma_t_sq(t))
    }

    /// The spreading-packet solution of the free Schrödinger equation.
    pub fn psi_at(&self, t: f64, q: f64) -> Complex64 {
        let PhysParams { hbar, m, .. } = self.params;
        let s2 = self.sigma * self.sigma;
        let w = Complex64::new(1.0, hbar * t / (2.0 * m * s2));
        let pre = (2.0 * PI * s2).powf(-0.25);
        pre / w.sqrt() * (-(q * q) / (4.0 * s2 * w)).exp()
    }

    /// Density on a grid at `t`.
    pub fn density(&self, grid: &Grid, t: f64) -> RealField {
        grid.sample(|q| self.density_at(t, q))
    }
}

#[derive(Debug, Clone)]
pub struct GaussianSnapshot {
    pub rho: RealField,
    pub potential: RealField,
    pub psi: ComplexField,
}

/// Analytic density, potential and wave function at time `t`.
///
/// The grid must be wide enough that the density at its ends is below
/// `1e-14` of the peak.
pub fn gaussian_analytic(spec: &GaussianSpec, t: f64, grid: &Grid) -> Result<GaussianSnapshot> {
    let peak = spec.density_at(t, 0.0);
    let edge = spec
        .density_at(t, grid.x_min())
        .max(spec.density_at(t, grid.x_max()));
    if edge > 1e-14 * peak {
        return Err(Error::Config(format!(
            "grid [{}, {}] too narrow for a packet of width {} at t = {t}",
            grid.x_min(),
            grid.x_max(),
            spec.sigma_t_sq(t).sqrt()
        )));
    }
    Ok(GaussianSnapshot {
        rho: spec.density(grid, t),
        potential: grid.sample(|q| spec.potential_at(t, q)),
        psi: grid.sample_complex(|q| spec.psi_at(t, q)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spreading_law() {
        let g = GaussianSpec::new(1.0, PhysParams::unit()).unwrap();
        assert_eq!(g.sigma_t_sq(2.0), 2.0);
        assert_eq!(g.sigma_t_sq(0.0), 1.0);
        assert_eq!(g.potential_at(0.0, 0.0), 0.25);
    }

    #[test]
    fn psi_modulus_matches_density() {
        let g = GaussianSpec::new(0.8, PhysParams::new(1.0, 2.0, 1.0).unwrap()).unwrap();
        for t in [0.0, 0.3, 2.0] {
            for q in [-1.5, 0.0, 0.4, 2.2] {
                let r = g.psi_at(t, q).norm_sqr();
                assert!((r - g.density_at(t, q)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn narrow_grid_is_rejected() {
        let spec = GaussianSpec::new(1.0, PhysParams::unit()).unwrap();
        let g = Grid::periodic(-3.0, 3.0, 64).unwrap();
        assert!(matches!(gaussian_analytic(&spec, 0.0, &g), Err(Error::Config(_))));
        let g = Grid::periodic(-20.0, 20.0, 512).unwrap();
        let snap = gaussian_analytic(&spec, 0.0, &g).unwrap();
        let c = g.nearest(0.0);
        assert!(snap.rho.values().iter().all(|&r| r <= snap.rho.values()[c]));
    }
}
