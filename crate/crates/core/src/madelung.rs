//! Hydrodynamic (Madelung) fields of a one-dimensional wave function.
//!
//! With `ψ = R exp(iS/ħ)`, `ρ = R²`, the fields are
//!
//! - quantum potential `U = -(ħ²/2m) R''/R`,
//! - velocity `v = S'/m`, obtained from the probability current
//!   `J = (ħ/m) Im(conj(ψ) ψ')` as `v = J/ρ`; the phase is never unwrapped,
//! - divergence `θ = v'` and quantum force `-U'`.
//!
//! Every quantity that divides by the density lives on a mask `ρ ≥ eps`.
//! Derivatives of masked fields use one-sided stencils at mask boundaries, and
//! nodes close to a boundary are flagged as *edge* so diagnostics can skip them.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{edge_flags, Backend, ComplexField, Grid, RealField};
use crate::selftrap::PhysParams;

/// Default density floor for the quantum potential.
pub const EPS_MASK_POTENTIAL: f64 = 1e-10;
/// Default density floor for velocity and divergence.
pub const EPS_MASK_VELOCITY: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskOptions {
    pub eps_potential: f64,
    pub eps_velocity: f64,
    /// Finite-difference backend used on masked regions.
    pub backend: Backend,
    /// Nodes closer than this to an unmasked node are edge nodes.
    pub edge_width: usize,
}

impl Default for MaskOptions {
    fn default() -> Self {
        Self {
            eps_potential: EPS_MASK_POTENTIAL,
            eps_velocity: EPS_MASK_VELOCITY,
            backend: Backend::Fd4,
            edge_width: Backend::Fd4.stencil_width(2),
        }
    }
}

/// A real field that is only defined where `mask` is set. Undefined entries
/// hold `0.0`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedField {
    grid: Grid,
    values: Vec<f64>,
    mask: Vec<bool>,
    edge: Vec<bool>,
}

impl MaskedField {
    /// Builds a masked field from optional values; `None` entries are unmasked.
    pub fn from_options(grid: Grid, values: Vec<Option<f64>>, edge_width: usize) -> Self {
        let mask: Vec<bool> = values.iter().map(Option::is_some).collect();
        let edge = edge_flags(&mask, edge_width, grid.is_periodic());
        Self {
            grid,
            values: values.into_iter().map(|v| v.unwrap_or(0.0)).collect(),
            mask,
            edge,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn edge(&self) -> &[bool] {
        &self.edge
    }

    pub fn get(&self, i: usize) -> Option<f64> {
        self.mask[i].then(|| self.values[i])
    }

    /// Masked and not an edge node.
    pub fn is_interior(&self, i: usize) -> bool {
        self.mask[i] && !self.edge[i]
    }

    pub fn masked_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Values at interior nodes.
    pub fn interior_values(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.values.len())
            .filter(|&i| self.is_interior(i))
            .map(|i| (i, self.values[i]))
    }

    /// Minimum over interior nodes, if any.
    pub fn interior_min(&self) -> Option<f64> {
        self.interior_values().map(|(_, v)| v).reduce(f64::min)
    }

    fn derivative(&self, order: usize, backend: Backend, edge_width: usize) -> Result<MaskedField> {
        let d = self.grid.deriv_masked(&self.values, &self.mask, order, backend)?;
        Ok(MaskedField::from_options(self.grid, d, edge_width))
    }

    /// Cubic (four-node) interpolation at `x`; `None` unless all four nodes are
    /// interior.
    pub fn interpolate(&self, x: f64) -> Option<f64> {
        let g = &self.grid;
        let n = g.len() as isize;
        let s = (x - g.x_min()) / g.dx();
        let j = s.floor() as isize;
        let t = s - j as f64;
        let mut idx = [0usize; 4];
        for (k, slot) in idx.iter_mut().enumerate() {
            let i = j - 1 + k as isize;
            let i = if g.is_periodic() {
                i.rem_euclid(n)
            } else if i < 0 || i >= n {
                return None;
            } else {
                i
            };
            *slot = i as usize;
        }
        if !idx.iter().all(|&i| self.is_interior(i)) {
            return None;
        }
        let f = idx.map(|i| self.values[i]);
        let w = [
            -t * (t - 1.0) * (t - 2.0) / 6.0,
            (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
            -(t + 1.0) * t * (t - 2.0) / 2.0,
            (t + 1.0) * t * (t - 1.0) / 6.0,
        ];
        Some(f.iter().zip(w).map(|(a, b)| a * b).sum())
    }
}

fn density_mask(rho: &[f64], eps: f64) -> Result<Vec<bool>> {
    if !(eps > 0.0) {
        return Err(Error::Config(format!("eps_mask must be positive, got {eps}")));
    }
    if rho.iter().any(|r| !r.is_finite() || *r < 0.0) {
        return Err(Error::Data("density must be finite and non-negative".into()));
    }
    Ok(rho.iter().map(|&r| r >= eps).collect())
}

/// `U = -(ħ²/2m) R''/R` on nodes with `ρ ≥ eps_mask`, with `R = sqrt(ρ)`.
pub fn quantum_potential(rho: &RealField, params: &PhysParams, eps_mask: f64) -> Result<MaskedField> {
    quantum_potential_with(
        rho,
        params,
        &MaskOptions {
            eps_potential: eps_mask,
            ..MaskOptions::default()
        },
    )
}

pub fn quantum_potential_with(rho: &RealField, params: &PhysParams, opts: &MaskOptions) -> Result<MaskedField> {
    let grid = *rho.grid();
    let mask = density_mask(rho.values(), opts.eps_potential)?;
    if !mask.iter().any(|&m| m) {
        return Err(Error::Data("density is below the mask floor everywhere".into()));
    }
    let amp: Vec<f64> = rho.values().iter().map(|r| r.sqrt()).collect();
    let d2 = grid.deriv_masked(&amp, &mask, 2, opts.backend)?;
    let scale = -params.hbar * params.hbar / (2.0 * params.m);
    let u: Vec<Option<f64>> = d2
        .iter()
        .zip(&amp)
        .map(|(d, &r)| d.map(|d| scale * d / r))
        .collect();
    if u.iter().all(Option::is_none) {
        return Err(Error::Data("no masked run is long enough for the stencil".into()));
    }
    Ok(MaskedField::from_options(grid, u, opts.edge_width))
}

/// Velocity `v = J/ρ` and its divergence `θ = v'`.
#[derive(Debug, Clone)]
pub struct VelocityField {
    pub v: MaskedField,
    pub theta: MaskedField,
}

/// Probability current `J = (ħ/m) Im(conj(ψ) ψ')`, spectral on periodic
/// grids and fourth-order otherwise.
pub fn probability_current(psi: &ComplexField, params: &PhysParams) -> Result<RealField> {
    let backend = if psi.grid().is_periodic() { Backend::Spectral } else { Backend::Fd4 };
    probability_current_with(psi, params, backend)
}

/// As [`probability_current`] with an explicit backend. Finite differences
/// keep the error of a kink in `ψ` local, where the spectral derivative
/// spreads it over the whole cell.
pub fn probability_current_with(psi: &ComplexField, params: &PhysParams, backend: Backend) -> Result<RealField> {
    let grid = *psi.grid();
    // Real and imaginary parts are differentiated separately so that a real
    // wave function carries exactly zero current.
    let re: Vec<f64> = psi.values().iter().map(|p| p.re).collect();
    let im: Vec<f64> = psi.values().iter().map(|p| p.im).collect();
    let dre = grid.deriv1(&re, backend)?;
    let dim = grid.deriv1(&im, backend)?;
    let c = params.hbar / params.m;
    let j = (0..grid.len())
        .map(|i| c * (re[i] * dim[i] - im[i] * dre[i]))
        .collect();
    RealField::new(grid, j)
}

pub fn velocity_field(psi: &ComplexField, params: &PhysParams, eps_mask: f64) -> Result<VelocityField> {
    velocity_field_with(
        psi,
        params,
        &MaskOptions {
            eps_velocity: eps_mask,
            ..MaskOptions::default()
        },
    )
}

pub fn velocity_field_with(psi: &ComplexField, params: &PhysParams, opts: &MaskOptions) -> Result<VelocityField> {
    let grid = *psi.grid();
    if !psi.is_finite() {
        return Err(Error::Data("non-finite wave function".into()));
    }
    let rho: Vec<f64> = psi.values().iter().map(Complex64::norm_sqr).collect();
    let mask = density_mask(&rho, opts.eps_velocity)?;
    if !mask.iter().any(|&m| m) {
        return Err(Error::Data("density is below the velocity mask floor everywhere".into()));
    }
    let j = probability_current_with(psi, params, opts.backend)?;
    let v: Vec<Option<f64>> = j
        .values()
        .iter()
        .zip(&rho)
        .zip(&mask)
        .map(|((j, r), &m)| m.then(|| j / r))
        .collect();
    let v = MaskedField::from_options(grid, v, opts.edge_width);
    let theta = v.derivative(1, opts.backend, opts.edge_width)?;
    Ok(VelocityField { v, theta })
}

/// Quantum force `-U'` on the mask of `u`.
pub fn quantum_force(u: &MaskedField) -> Result<MaskedField> {
    let edge_width = MaskOptions::default().edge_width;
    let d = u.derivative(1, Backend::Fd4, edge_width)?;
    let vals: Vec<Option<f64>> = (0..d.values.len()).map(|i| d.get(i).map(|v| -v)).collect();
    Ok(MaskedField::from_options(d.grid, vals, edge_width))
}

/// Discrete `U''` on the mask of `u`.
pub fn curvature(u: &MaskedField, backend: Backend, edge_width: usize) -> Result<MaskedField> {
    u.derivative(2, backend, edge_width)
}

/// Minimum of `U''` over interior (non-edge) nodes of the mask.
pub fn convexity_min(u: &MaskedField) -> Result<f64> {
    let longest = crate::grid::mask_runs(u.mask(), u.grid().is_periodic())
        .iter()
        .map(Vec::len)
        .max()
        .unwrap_or(0);
    if longest < 5 {
        return Err(Error::Data(
            "convexity needs at least 5 contiguous masked nodes".into(),
        ));
    }
    let opts = MaskOptions::default();
    let c = curvature(u, opts.backend, opts.edge_width)?;
    (0..c.values.len())
        .filter(|&i| c.mask[i] && u.is_interior(i))
        .map(|i| c.values[i])
        .reduce(f64::min)
        .ok_or_else(|| Error::Data("mask has no interior nodes".into()))
}

/// Upper bound `1/|θ₀|` on the time to a caustic implied by
/// `θ⁻¹(t) ≥ θ₀⁻¹ + t`; only a converging start (`θ₀ < 0`) gives a bound.
pub fn caustic_bound(theta0: f64) -> Option<f64> {
    (theta0 < 0.0).then(|| 1.0 / theta0.abs())
}

/// All Madelung fields of a wave function at one instant.
#[derive(Debug, Clone)]
pub struct MadelungFields {
    pub t: f64,
    pub rho: RealField,
    pub amplitude: RealField,
    pub potential: MaskedField,
    pub v: MaskedField,
    pub theta: MaskedField,
    pub force: MaskedField,
    /// `U''` with the potential's edge nodes excluded from its interior.
    pub curvature: MaskedField,
}

impl MadelungFields {
    pub fn from_psi(psi: &ComplexField, params: &PhysParams, opts: &MaskOptions, t: f64) -> Result<Self> {
        let grid = *psi.grid();
        let rho = psi.map(|p| p.norm_sqr());
        let amplitude = rho.map(f64::sqrt);
        let potential = quantum_potential_with(&rho, params, opts)?;
        let VelocityField { v, theta } = velocity_field_with(psi, params, opts)?;
        let force = quantum_force(&potential)?;
        let curv = curvature(&potential, opts.backend, opts.edge_width)?;
        // Restrict the interior of U'' to nodes that are interior for U too.
        let vals: Vec<Option<f64>> = (0..grid.len())
            .map(|i| curv.get(i).filter(|_| potential.is_interior(i)))
            .collect();
        let curvature = MaskedField::from_options(grid, vals, 1);
        Ok(Self {
            t,
            rho,
            amplitude,
            potential,
            v,
            theta,
            force,
            curvature,
        })
    }

    /// `min U''` over interior nodes, if the mask has any.
    pub fn convexity_min(&self) -> Option<f64> {
        self.curvature.interior_min()
    }

    /// `min θ` over interior nodes of the velocity mask.
    pub fn theta_min(&self) -> Option<f64> {
        self.theta.interior_min()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn gaussian(grid: &Grid, sigma: f64) -> RealField {
        grid.sample(|q| (-q * q / (2.0 * sigma * sigma)).exp() / (2.0 * PI * sigma * sigma).sqrt())
    }

    #[test]
    fn gaussian_potential_at_center() {
        let g = Grid::bounded(-12.0, 12.0, 2401).unwrap();
        let u = quantum_potential(&gaussian(&g, 1.0), &PhysParams::unit(), EPS_MASK_POTENTIAL).unwrap();
        let c = g.nearest(0.0);
        assert!((u.get(c).unwrap() - 0.25).abs() < 1e-8);
        for (i, val) in u.interior_values() {
            let q = g.point(i);
            if q.abs() < 4.0 {
                assert!((val - (0.25 - q * q / 8.0)).abs() < 1e-6, "q={q}");
            }
        }
    }

    #[test]
    fn flat_density_has_zero_potential() {
        let g = Grid::periodic(0.0, 1.0, 64).unwrap();
        let rho = RealField::new(g, vec![1.0; 64]).unwrap();
        let u = quantum_potential(&rho, &PhysParams::unit(), 1e-10).unwrap();
        assert!(u.values().iter().all(|v| v.abs() < 1e-12));
        assert_eq!(u.masked_count(), 64);
    }

    #[test]
    fn empty_mask_is_data_error() {
        let g = Grid::bounded(0.0, 1.0, 16).unwrap();
        let rho = RealField::new(g, vec![1e-20; 16]).unwrap();
        assert!(matches!(
            quantum_potential(&rho, &PhysParams::unit(), 1e-10),
            Err(Error::Data(_))
        ));
        let psi = rho.map(|r| Complex64::new(r.sqrt(), 0.0));
        assert!(matches!(velocity_field(&psi, &PhysParams::unit(), 1e-8), Err(Error::Data(_))));
    }

    #[test]
    fn real_wave_function_has_no_flow() {
        let g = Grid::periodic(-10.0, 10.0, 256).unwrap();
        let psi = gaussian(&g, 1.0).map(|r| Complex64::new(r.sqrt(), 0.0));
        let vf = velocity_field(&psi, &PhysParams::unit(), 1e-8).unwrap();
        assert!(vf.v.values().iter().all(|v| *v == 0.0));
        assert!(vf.theta.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn quadratic_phase_gives_linear_velocity() {
        let g = Grid::periodic(-12.0, 12.0, 512).unwrap();
        let (a, p) = (-0.7, PhysParams::new(1.3, 0.8, 1.0).unwrap());
        let psi = g.sample_complex(|q| {
            let amp = (-q * q / 2.0).exp() / PI.powf(0.25);
            Complex64::from_polar(amp, p.m * a * q * q / (2.0 * p.hbar))
        });
        let j = probability_current(&psi, &p).unwrap();
        for (i, (j, z)) in j.values().iter().zip(psi.values()).enumerate() {
            if z.norm_sqr() > 1e-8 {
                assert!((j / z.norm_sqr() - a * g.point(i)).abs() < 1e-8);
            }
        }
        let vf = velocity_field(&psi, &p, 1e-8).unwrap();
        for (i, v) in vf.v.interior_values() {
            assert!((v - a * g.point(i)).abs() < 1e-3);
        }
        for (_, th) in vf.theta.interior_values() {
            assert!((th - a).abs() < 1e-2);
        }
    }

    #[test]
    fn gaussian_force_repels() {
        let g = Grid::bounded(-8.0, 8.0, 801).unwrap();
        let u = quantum_potential(&gaussian(&g, 1.0), &PhysParams::unit(), 1e-10).unwrap();
        let f = quantum_force(&u).unwrap();
        let c = g.nearest(0.0);
        assert!(f.get(c).unwrap().abs() < 1e-9);
        for (i, val) in f.interior_values() {
            let q = g.point(i);
            if q.abs() > 0.1 && q.abs() < 5.0 {
                assert!(val * q > 0.0, "force should point away from the center at q={q}");
            }
        }
    }

    #[test]
    fn gaussian_convexity_is_uniformly_negative() {
        let g = Grid::bounded(-10.0, 10.0, 1001).unwrap();
        let sigma: f64 = 1.5;
        let u = quantum_potential(&gaussian(&g, sigma), &PhysParams::unit(), 1e-10).unwrap();
        let cmin = convexity_min(&u).unwrap();
        assert!(cmin < 0.0);
        assert!((cmin + 1.0 / (4.0 * sigma.powi(4))).abs() < 1e-4, "{cmin}");
    }

    #[test]
    fn constant_potential_has_zero_convexity() {
        let g = Grid::bounded(0.0, 1.0, 50).unwrap();
        let u = MaskedField::from_options(g, vec![Some(2.0); 50], 6);
        assert!(convexity_min(&u).unwrap().abs() < 1e-9);
    }

    #[test]
    fn short_mask_is_rejected() {
        let g = Grid::bounded(0.0, 1.0, 20).unwrap();
        let vals = (0..20).map(|i| (i < 4).then_some(1.0)).collect();
        let u = MaskedField::from_options(g, vals, 6);
        assert!(matches!(convexity_min(&u), Err(Error::Data(_))));
    }

    #[test]
    fn caustic_bound_cases() {
        assert_eq!(caustic_bound(-0.5), Some(2.0));
        assert_eq!(caustic_bound(-2.0), Some(0.5));
        assert_eq!(caustic_bound(0.0), None);
        assert_eq!(caustic_bound(1.0), None);
    }

    #[test]
    fn cubic_interpolation_is_exact_for_cubics() {
        let g = Grid::bounded(0.0, 1.0, 21).unwrap();
        let vals = g.points().iter().map(|x| Some(x * x * x - x)).collect();
        let f = MaskedField::from_options(g, vals, 1);
        for x in [0.113, 0.5, 0.77] {
            assert!((f.interpolate(x).unwrap() - (x * x * x - x)).abs() < 1e-13);
        }
        assert!(f.interpolate(0.01).is_none());
    }
}
