//! Self-trapped states: densities of the form `ρ = exp(-βU)/Z` whose own
//! quantum potential is `U`.
//!
//! Combining the quantum potential `U = -(ħ²/2m) R''/R` with the exponential
//! closure gives `U'' = (β/2) U'² + Λ² U`, `Λ = sqrt(4m/(ħ²β))`. In the
//! dimensionless variables `u = βU`, `x = Λq` this is the one-parameter family
//!
//! ```text
//! u'' = u'²/2 + u,    u(0) = u0 > 0,   u'(0) = 0,
//! ```
//!
//! whose solutions blow up at a finite `x_m`, so the density has compact
//! support `|q| < q_m = x_m/Λ` and vanishes quadratically at its edge.

mod ode;

pub use ode::{integrate as integrate_ode, Dopri5Options, OdeStep};

use crate::error::{Error, Result};
use crate::evolve::GaussianSpec;
use crate::grid::{Field, Grid, RealField};

/// Physical constants of the model. All three must be positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysParams {
    pub hbar: f64,
    pub m: f64,
    pub beta: f64,
}

impl PhysParams {
    pub fn new(hbar: f64, m: f64, beta: f64) -> Result<Self> {
        for (name, v) in [("hbar", hbar), ("m", m), ("beta", beta)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(Self { hbar, m, beta })
    }

    /// Natural units `ħ = m = β = 1`.
    pub fn unit() -> Self {
        Self {
            hbar: 1.0,
            m: 1.0,
            beta: 1.0,
        }
    }

    /// Inverse length scale `Λ = sqrt(4m/(ħ²β))`.
    pub fn lambda(&self) -> f64 {
        (4.0 * self.m / (self.hbar * self.hbar * self.beta)).sqrt()
    }
}

impl Default for PhysParams {
    fn default() -> Self {
        Self::unit()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Density level (relative to the peak) at which integration stops.
    pub rho_floor: f64,
    /// Abscissa beyond which a missing blow-up is reported as divergence.
    pub x_limit: f64,
    /// Largest step in the integration parameter.
    pub max_step: f64,
    /// Fraction of the final nodes used for the blow-up asymptote fit.
    pub fit_fraction: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            rho_floor: 1e-16,
            x_limit: 100.0,
            max_step: 0.02,
            fit_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileNode {
    pub x: f64,
    pub u: f64,
    pub up: f64,
    /// Compensation terms: the node lies at `x + x_lo` with value `u + u_lo`.
    pub x_lo: f64,
    pub u_lo: f64,
}

impl ProfileNode {
    /// `u''` from the equation itself.
    pub fn upp(&self) -> f64 {
        0.5 * self.up * self.up + self.u
    }
}

/// Numerical solution of the dimensionless equation on `[0, x_m)`.
#[derive(Debug, Clone)]
pub struct DimensionlessProfile {
    pub u0: f64,
    pub nodes: Vec<ProfileNode>,
    /// Blow-up abscissa (dimensionless support half-width).
    pub x_m: f64,
    pub x_m_uncertainty: f64,
    /// Constant `c` of the fitted asymptote `u ≈ -2 ln(x_m - x) + c`.
    pub asymptote_const: f64,
}

impl DimensionlessProfile {
    /// `u(x)`, even in `x`; `None` at or beyond the blow-up point.
    ///
    /// Between nodes a quintic Hermite interpolant is built from `u`, `u'`
    /// and `u''` (the latter exact from the equation). Past the last node the
    /// fitted asymptote is used.
    pub fn eval(&self, x: f64) -> Option<f64> {
        self.eval_split(x.abs(), 0.0)
    }

    /// `u` at the non-negative abscissa `x + x_lo`, with `x_lo` a correction
    /// far below the resolution of `x`. Near the blow-up `u'` is large, so
    /// the rounding of the abscissa dominates the error of `u`.
    pub fn eval_split(&self, x: f64, x_lo: f64) -> Option<f64> {
        let last = self.nodes.last().expect("profile has nodes");
        let before = |n: &ProfileNode| n.x < x || (n.x == x && n.x_lo <= x_lo);
        if before(last) {
            let dist = (self.x_m - x) - x_lo;
            return (dist > 0.0).then(|| -2.0 * dist.ln() + self.asymptote_const);
        }
        let j = self.nodes.partition_point(before).max(1);
        let (a, b) = (&self.nodes[j - 1], &self.nodes[j]);
        Some(quintic_hermite(a, b, (x - a.x) + (x_lo - a.x_lo)))
    }

    pub fn u_stop(&self) -> f64 {
        self.nodes.last().map(|n| n.u).unwrap_or(self.u0)
    }
}

/// Quintic Hermite interpolant on `[a, b]` at offset `d` from `a`.
fn quintic_hermite(a: &ProfileNode, b: &ProfileNode, d: f64) -> f64 {
    let h = (b.x - a.x) + (b.x_lo - a.x_lo);
    let t = d / h;
    let (t2, t3) = (t * t, t * t * t);
    let (t4, t5) = (t3 * t, t3 * t2);
    let h1 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
    let h2 = 0.5 * t2 - 1.5 * t3 + 1.5 * t4 - 0.5 * t5;
    let h3 = 0.5 * t3 - t4 + 0.5 * t5;
    let h4 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
    let h5 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
    let du = (b.u - a.u) + (b.u_lo - a.u_lo);
    let inc = du * h5 + h * (a.up * h1 + b.up * h4) + h * h * (a.upp() * h2 + b.upp() * h3);
    a.u + (a.u_lo + inc)
}

/// Solves the dimensionless equation with default options apart from the
/// tolerances.
pub fn solve_dimensionless(u0: f64, rtol: f64, atol: f64) -> Result<DimensionlessProfile> {
    solve_dimensionless_with(
        u0,
        &SolveOptions {
            rtol,
            atol,
            ..SolveOptions::default()
        },
    )
}

pub fn solve_dimensionless_with(u0: f64, opts: &SolveOptions) -> Result<DimensionlessProfile> {
    if !(u0.is_finite() && u0 > 0.0) {
        return Err(Error::Domain(format!("u0 must be positive, got {u0}")));
    }
    if !(opts.rho_floor > 0.0 && opts.rho_floor < 1.0) {
        return Err(Error::Config("rho_floor must lie in (0, 1)".into()));
    }
    let coarse = integrate_profile(u0, opts, opts.rtol, opts.atol, opts.max_step)?;
    let fine = integrate_profile(u0, opts, opts.rtol / 32.0, opts.atol / 32.0, opts.max_step / 2.0)?;

    let (x_m, spread, c) = fit_blowup(&coarse, opts.fit_fraction);
    let (x_m_fine, _, _) = fit_blowup(&fine, opts.fit_fraction);
    Ok(DimensionlessProfile {
        u0,
        nodes: coarse,
        x_m,
        x_m_uncertainty: (x_m - x_m_fine).abs() + spread,
        asymptote_const: c,
    })
}

/// Integrates in the parameter `τ` with `dx/dτ = 1/(1+u')`, which keeps the
/// step finite as `u'` grows without bound near the blow-up.
fn integrate_profile(
    u0: f64,
    opts: &SolveOptions,
    rtol: f64,
    atol: f64,
    max_step: f64,
) -> Result<Vec<ProfileNode>> {
    let u_stop = u0 + 2.0 * (1.0 / opts.rho_floor).ln();
    let ode_opts = Dopri5Options {
        rtol,
        atol,
        h_init: 1e-3_f64.min(max_step),
        h_max: max_step,
        max_steps: 10_000_000,
    };
    let rhs = |_: f64, y: &[f64; 3]| {
        let p = y[2];
        let s = 1.0 / (1.0 + p);
        [s, p * s, (0.5 * p * p + y[1]) * s]
    };
    let steps = integrate_ode(rhs, 0.0, [0.0, u0, 0.0], &ode_opts, |_, y| {
        y[1] >= u_stop || y[0] > opts.x_limit
    })
    .map_err(|e| Error::Divergence(format!("profile integration for u0 = {u0}: {e}")))?;

    let last = steps.last().expect("integrator returns the initial point");
    if last.y[1] < u_stop {
        return Err(Error::Divergence(format!(
            "u did not reach {u_stop} before x = {} (u0 = {u0})",
            opts.x_limit
        )));
    }
    Ok(steps
        .into_iter()
        .map(|s| ProfileNode {
            x: s.y[0],
            u: s.y[1],
            up: s.y[2],
            x_lo: s.y_lo[0],
            u_lo: s.y_lo[1],
        })
        .collect())
}

/// Near the blow-up `u'' ≈ u'²/2`, so `u' ≈ 2/(x_m - x)` and
/// `u ≈ -2 ln(x_m - x) + c`. Each node of the final segment gives the
/// estimate `x + 2/u'`; returns their mean, half their range and `c`.
fn fit_blowup(nodes: &[ProfileNode], fraction: f64) -> (f64, f64, f64) {
    let k = ((nodes.len() as f64 * fraction).ceil() as usize).clamp(1, nodes.len());
    let tail = &nodes[nodes.len() - k..];
    let est: Vec<f64> = tail.iter().map(|n| n.x + (n.x_lo + 2.0 / n.up)).collect();
    let mean = est.iter().sum::<f64>() / k as f64;
    let (lo, hi) = est
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let c = tail.iter().map(|n| n.u + 2.0 * (2.0 / n.up).ln()).sum::<f64>() / k as f64;
    (mean, 0.5 * (hi - lo), c)
}

/// A self-trapped state sampled on a grid.
#[derive(Debug, Clone)]
pub struct SelfTrapState {
    pub params: PhysParams,
    pub grid: Grid,
    /// Dimensionless central value `u0 = βU₀`.
    pub u0: f64,
    pub x_m: f64,
    pub x_m_uncertainty: f64,
    /// Normalized density; exactly zero outside the support.
    pub rho: RealField,
    /// Quantum potential on the support; entries outside hold 0 and are
    /// flagged false in `support`.
    pub potential: RealField,
    pub support: Vec<bool>,
    pub q_m: f64,
    pub q_m_uncertainty: f64,
    /// `Z = ∫ exp(-βU) dq`.
    pub z: f64,
    pub second_moment: f64,
}

impl SelfTrapState {
    /// Central value of the quantum potential, `U₀ = u0/β`.
    pub fn u_center(&self) -> f64 {
        self.u0 / self.params.beta
    }

    /// Quantum amplitude `R = sqrt(ρ)`.
    pub fn amplitude(&self) -> RealField {
        self.rho.map(f64::sqrt)
    }

    /// Index of the mirror node `q → -q` on a symmetric grid.
    pub fn mirror(&self, i: usize) -> usize {
        mirror_index(&self.grid, i)
    }
}

pub(crate) fn mirror_index(grid: &Grid, i: usize) -> usize {
    let n = grid.len();
    if grid.is_periodic() {
        (n - i) % n
    } else {
        n - 1 - i
    }
}

/// Maps a dimensionless profile onto a symmetric grid in physical units.
pub fn rescale(profile: &DimensionlessProfile, params: &PhysParams, grid: &Grid) -> Result<SelfTrapState> {
    if !grid.is_symmetric() {
        return Err(Error::Config("self-trapped states need a grid symmetric about 0".into()));
    }
    let lambda = params.lambda();
    let q_m = profile.x_m / lambda;
    if grid.x_max() < q_m {
        return Err(Error::Config(format!(
            "grid half-width {} does not contain the support half-width {q_m}",
            grid.x_max()
        )));
    }
    let n = grid.len();
    let mut weight = vec![0.0; n];
    let mut potential = vec![0.0; n];
    let mut support = vec![false; n];
    for i in 0..n {
        // Evaluate each mirror pair once so the sampled state is exactly even.
        let j = mirror_index(grid, i);
        let (hi, lo) = grid.point_split(if grid.point(i) <= 0.0 { i } else { j });
        let (hi, lo) = (-hi, -lo);
        let x = lambda * hi;
        let x_lo = lambda.mul_add(hi, -x) + lambda * lo;
        if let Some(u) = profile.eval_split(x, x_lo) {
            let w = (-u).exp();
            if w > 0.0 {
                weight[i] = w;
                potential[i] = u / params.beta;
                support[i] = true;
            }
        }
    }
    let z = grid.integrate(&weight)?;
    if !(z > 0.0) {
        return Err(Error::Config("grid does not resolve the support".into()));
    }
    let rho: Vec<f64> = weight.iter().map(|w| w / z).collect();
    let moment: Vec<f64> = rho.iter().zip(grid.points()).map(|(r, q)| r * q * q).collect();
    let second_moment = grid.integrate(&moment)?;
    Ok(SelfTrapState {
        params: *params,
        grid: *grid,
        u0: profile.u0,
        x_m: profile.x_m,
        x_m_uncertainty: profile.x_m_uncertainty,
        rho: Field::new(*grid, rho)?,
        potential: Field::new(*grid, potential)?,
        support,
        q_m,
        q_m_uncertainty: profile.x_m_uncertainty / lambda,
        z,
        second_moment,
    })
}

/// Solves for `u0` and samples the state on `grid`.
pub fn build_state(u0: f64, params: &PhysParams, grid: &Grid, opts: &SolveOptions) -> Result<SelfTrapState> {
    let profile = solve_dimensionless_with(u0, opts)?;
    rescale(&profile, params, grid)
}

/// Near-extremum approximation `U ≈ U_Q cosh(Λ(q - Q))`.
pub fn cosh_approx(u_q: f64, center: f64, params: &PhysParams, q: f64) -> f64 {
    u_q * (params.lambda() * (q - center)).cosh()
}

/// Gaussian with the same second moment as the state.
pub fn matched_gaussian(state: &SelfTrapState) -> Result<GaussianSpec> {
    if !(state.second_moment > 0.0) {
        return Err(Error::Data("second moment must be positive".into()));
    }
    GaussianSpec::new(state.second_moment.sqrt(), state.params)
}
