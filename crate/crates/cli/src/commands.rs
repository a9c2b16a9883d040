//! The solve, compare and evolve workflows.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use selftrap_core::evolve::{gaussian_analytic, run, EvolutionConfig, EvolutionRecord, GaussianSpec, InitialPhase, StopReason, WaveField};
use selftrap_core::selftrap::{cosh_approx, matched_gaussian, rescale, solve_dimensionless_with, DimensionlessProfile, SelfTrapState};
use selftrap_core::{Field, Grid, PhysParams};

use crate::config::{Initial, Phase, RunConfig};
use crate::output::{num, opt, write_csv, write_json};
use crate::CliError;

pub const PROFILE_CSV: &str = "selftrap_profile.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const COMPARE_CSV: &str = "compare.csv";
pub const COMPARE_JSON: &str = "compare.json";
pub const TIMESERIES_CSV: &str = "timeseries.csv";
pub const EVOLUTION_JSON: &str = "evolution.json";
pub const TRACES_CSV: &str = "traces.csv";

pub const PROFILE_HEADER: [&str; 5] = ["q", "rho", "U", "U_cosh_approx", "R"];

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ParamsOut {
    pub hbar: f64,
    pub m: f64,
    pub beta: f64,
    pub lambda: f64,
}

impl From<&PhysParams> for ParamsOut {
    fn from(p: &PhysParams) -> Self {
        Self {
            hbar: p.hbar,
            m: p.m,
            beta: p.beta,
            lambda: p.lambda(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridOut {
    pub n: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub periodic: bool,
}

impl GridOut {
    pub fn grid(&self) -> Result<Grid, CliError> {
        let g = if self.periodic {
            Grid::periodic(self.x_min, self.x_max, self.n)
        } else {
            Grid::bounded(self.x_min, self.x_max, self.n)
        };
        g.map_err(|e| CliError::Io(format!("grid record: {e}")))
    }
}

impl From<&Grid> for GridOut {
    fn from(g: &Grid) -> Self {
        Self {
            n: g.len(),
            x_min: g.x_min(),
            x_max: g.x_max(),
            periodic: g.is_periodic(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub u0: f64,
    pub lambda: f64,
    pub q_m: f64,
    pub q_m_uncertainty: f64,
    #[serde(rename = "Z")]
    pub z: f64,
    pub second_moment: f64,
    pub u_center: f64,
    pub x_m: f64,
    pub x_m_uncertainty: f64,
    pub params: ParamsOut,
    pub grid: GridOut,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareSummary {
    pub sigma: f64,
    pub q_m: f64,
    pub peak_ratio: f64,
    pub rho_selftrap_0: f64,
    pub rho_gaussian_0: f64,
    pub params: ParamsOut,
    pub grid: GridOut,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvolutionSummary {
    #[serde(rename = "T_convexity")]
    pub t_convexity: Option<f64>,
    pub t_near_caustic: Option<f64>,
    /// `1/|θ₀|` for a converging start.
    pub caustic_bound: Option<f64>,
    pub theta0: Option<f64>,
    pub leak: bool,
    pub stop: String,
    pub samples: usize,
    pub t_last: f64,
    pub initial: Initial,
    pub params: ParamsOut,
    pub grid: GridOut,
}

fn core(e: selftrap_core::Error) -> CliError {
    match e {
        selftrap_core::Error::Config(_) | selftrap_core::Error::Domain(_) => CliError::Config(e.to_string()),
        _ => CliError::Run(e.to_string()),
    }
}

fn prepare(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))
}

fn profile(cfg: &RunConfig) -> Result<(PhysParams, DimensionlessProfile), CliError> {
    let params = cfg.params()?;
    let u0 = cfg.u0()?;
    let prof = solve_dimensionless_with(u0, &cfg.solve_options()).map_err(core)?;
    Ok((params, prof))
}

fn state_on(prof: &DimensionlessProfile, params: &PhysParams, half: f64, n: usize, periodic: bool) -> Result<SelfTrapState, CliError> {
    let grid = if periodic {
        Grid::periodic(-half, half, n)
    } else {
        Grid::bounded(-half, half, n)
    }
    .map_err(core)?;
    rescale(prof, params, &grid).map_err(core)
}

fn half_width(cfg: &RunConfig, q_m: f64, default_padding: f64) -> f64 {
    cfg.grid
        .half_width
        .unwrap_or_else(|| cfg.grid.padding.unwrap_or(default_padding) * q_m)
}

pub fn solve(cfg: &RunConfig, out: &Path) -> Result<SelfTrapState, CliError> {
    let (params, prof) = profile(cfg)?;
    let q_m = prof.x_m / params.lambda();
    let st = state_on(&prof, &params, half_width(cfg, q_m, 1.1), cfg.grid.n.unwrap_or(4001), false)?;
    prepare(out)?;
    if cfg.output.csv() {
        let g = st.grid;
        let u0 = st.u_center();
        let rows = (0..g.len()).map(|i| {
            let q = g.point(i);
            let rho = st.rho.values()[i];
            vec![
                num(q),
                num(rho),
                opt(st.support[i].then(|| st.potential.values()[i])),
                num(cosh_approx(u0, 0.0, &params, q)),
                num(rho.sqrt()),
            ]
        });
        write_csv(&out.join(PROFILE_CSV), &PROFILE_HEADER, rows)?;
    }
    if cfg.output.json() {
        let summary = Summary {
            u0: st.u0,
            lambda: params.lambda(),
            q_m: st.q_m,
            q_m_uncertainty: st.q_m_uncertainty,
            z: st.z,
            second_moment: st.second_moment,
            u_center: st.u_center(),
            x_m: st.x_m,
            x_m_uncertainty: st.x_m_uncertainty,
            params: (&params).into(),
            grid: (&st.grid).into(),
        };
        write_json(&out.join(SUMMARY_JSON), &summary)?;
    }
    Ok(st)
}

/// The compare grid extends to 12σ unless set explicitly, so the Gaussian's
/// second moment is resolved on the emitted rows.
pub fn compare(cfg: &RunConfig, out: &Path) -> Result<CompareSummary, CliError> {
    let (params, prof) = profile(cfg)?;
    let q_m = prof.x_m / params.lambda();
    let n = cfg.grid.n.unwrap_or(8001);
    let mut st = state_on(&prof, &params, half_width(cfg, q_m, 1.1), n, false)?;
    if cfg.grid.half_width.is_none() && cfg.grid.padding.is_none() {
        let sigma = st.second_moment.sqrt();
        st = state_on(&prof, &params, (12.0 * sigma).max(1.1 * q_m), n, false)?;
    }
    let gauss = matched_gaussian(&st).map_err(core)?;
    prepare(out)?;
    let g = st.grid;
    if cfg.output.csv() {
        let rows = (0..g.len()).map(|i| {
            let q = g.point(i);
            vec![num(q), num(st.rho.values()[i]), num(gauss.density_at(0.0, q))]
        });
        write_csv(&out.join(COMPARE_CSV), &["q", "rho_selftrap", "rho_gaussian"], rows)?;
    }
    // ρ(0) = exp(-u0)/Z exactly, whether or not 0 is a grid point.
    let rho0 = (-st.u0).exp() / st.z;
    let rho_g0 = gauss.density_at(0.0, 0.0);
    let summary = CompareSummary {
        sigma: gauss.sigma,
        q_m: st.q_m,
        peak_ratio: rho_g0 / rho0,
        rho_selftrap_0: rho0,
        rho_gaussian_0: rho_g0,
        params: (&params).into(),
        grid: (&g).into(),
    };
    if cfg.output.json() {
        write_json(&out.join(COMPARE_JSON), &summary)?;
    }
    Ok(summary)
}

/// The initial wave and the half-span covered by traces.
fn initial_wave(cfg: &RunConfig, params: &PhysParams) -> Result<(WaveField, f64), CliError> {
    match cfg.evolve.initial {
        Initial::Selftrap => {
            let (_, prof) = profile(cfg)?;
            let q_m = prof.x_m / params.lambda();
            let st = state_on(&prof, params, half_width(cfg, q_m, 2.5), cfg.grid.n.unwrap_or(4096), true)?;
            let amp = st.rho.values().iter().map(|r| Complex64::new(r.sqrt(), 0.0)).collect();
            Ok((WaveField::new(0.0, Field::new(st.grid, amp).map_err(core)?), 0.9 * q_m))
        }
        Initial::Gaussian => {
            let sigma = cfg
                .evolve
                .sigma
                .ok_or_else(|| CliError::Config("evolve.sigma required for a Gaussian start".into()))?;
            let spec = GaussianSpec::new(sigma, *params).map_err(core)?;
            let half = cfg
                .grid
                .half_width
                .unwrap_or_else(|| cfg.grid.padding.unwrap_or(20.0) * sigma);
            let grid = Grid::periodic(-half, half, cfg.grid.n.unwrap_or(2048)).map_err(core)?;
            let psi = gaussian_analytic(&spec, 0.0, &grid).map_err(core)?.psi;
            Ok((WaveField::new(0.0, psi), 3.0 * sigma))
        }
    }
}

pub fn evolve(cfg: &RunConfig, out: &Path) -> Result<EvolutionRecord, CliError> {
    let params = cfg.params()?;
    let e = &cfg.evolve;
    let (wave, span) = initial_wave(cfg, &params)?;
    let phase = match e.phase {
        Phase::Zero => InitialPhase::Zero,
        Phase::Quadratic => InitialPhase::Quadratic(
            e.theta0
                .ok_or_else(|| CliError::Config("evolve.theta0 required for a quadratic phase".into()))?,
        ),
    };
    let mut ec = EvolutionConfig::new(e.dt, e.t_end, params);
    ec.observer_stride = e.stride;
    ec.theta_blowup_threshold = e.theta_threshold;
    ec.boundary_leak_tol = e.leak_tol;
    ec.stop_at_caustic = e.stop_at_caustic;
    ec.masks = cfg.mask_options();
    ec.snapshot_every = e.snapshot_every;
    ec.record_frames = e.traces > 0;
    ec.trace_starts = match e.traces {
        0 => Vec::new(),
        1 => vec![0.0],
        k => (0..k)
            .map(|j| span * (2.0 * j as f64 / (k - 1) as f64 - 1.0))
            .collect(),
    };
    let rec = run(&wave, &phase, &ec).map_err(core)?;
    prepare(out)?;
    if cfg.output.csv() {
        let rows = rec.samples.iter().map(|s| {
            vec![num(s.t), num(s.norm), num(s.variance), opt(s.convexity_min), opt(s.theta_min)]
        });
        write_csv(
            &out.join(TIMESERIES_CSV),
            &["t", "norm", "variance", "convexity_min", "theta_min"],
            rows,
        )?;
        for (k, snap) in rec.snapshots.iter().enumerate() {
            let f = &snap.fields;
            let rows = (0..rec.grid.len()).map(|i| {
                vec![
                    num(rec.grid.point(i)),
                    num(f.rho.values()[i]),
                    opt(f.potential.get(i)),
                    opt(f.v.get(i)),
                    opt(f.theta.get(i)),
                    opt(f.curvature.get(i)),
                ]
            });
            write_csv(
                &out.join(format!("snapshot_{k:04}.csv")),
                &["q", "rho", "U", "v", "theta", "U_qq"],
                rows,
            )?;
        }
        if !rec.traces.is_empty() {
            let rows = rec.traces.iter().flat_map(|tr| {
                tr.points
                    .iter()
                    .map(|p| vec![num(tr.q0), num(p.t), num(p.q), num(p.theta), opt(p.curvature)])
            });
            write_csv(&out.join(TRACES_CSV), &["q0", "t", "q", "theta", "U_qq"], rows)?;
        }
    }
    if cfg.output.json() {
        let summary = EvolutionSummary {
            t_convexity: rec.t_convexity,
            t_near_caustic: rec.t_near_caustic,
            caustic_bound: rec.caustic_bound(),
            theta0: rec.theta0,
            leak: rec.leak,
            stop: match rec.stop {
                StopReason::Completed => "completed",
                StopReason::NearCaustic => "near_caustic",
                StopReason::BoundaryLeak => "boundary_leak",
            }
            .into(),
            samples: rec.samples.len(),
            t_last: rec.samples.last().map_or(0.0, |s| s.t),
            initial: e.initial,
            params: (&params).into(),
            grid: (&rec.grid).into(),
        };
        write_json(&out.join(EVOLUTION_JSON), &summary)?;
    }
    Ok(rec)
}
