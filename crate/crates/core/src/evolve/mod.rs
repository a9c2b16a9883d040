//! Free evolution `iħ ∂ψ/∂t = -(ħ²/2m) ∂²ψ/∂q²` on a periodic lattice.
//!
//! The free Hamiltonian is diagonal in the discrete Fourier basis, so a step
//! multiplies each mode by `exp(-iħk²dt/(2m))` and is exact: the only errors
//! are sampling and aliasing of the initial data. A run records scalar
//! diagnostics at every observer sample and, on request, the velocity frames
//! needed for Lagrangian traces.

mod gaussian;
mod trace;

pub use gaussian::{gaussian_analytic, GaussianSnapshot, GaussianSpec};
pub use trace::{trace_frames, Trace, TraceFrame, TracePoint};

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::Fft;

use crate::error::{Error, Result};
use crate::grid::{fft_pair, ComplexField, Grid, RealField};
use crate::madelung::{MadelungFields, MaskOptions};
use crate::selftrap::PhysParams;

/// A wave function with its time stamp.
#[derive(Debug, Clone)]
pub struct WaveField {
    pub t: f64,
    pub psi: ComplexField,
}

impl WaveField {
    pub fn new(t: f64, psi: ComplexField) -> Self {
        Self { t, psi }
    }

    pub fn grid(&self) -> &Grid {
        self.psi.grid()
    }

    pub fn density(&self) -> RealField {
        self.psi.map(|p| p.norm_sqr())
    }

    pub fn norm(&self) -> f64 {
        self.density().integrate().unwrap_or(f64::NAN)
    }

    /// `∫q²ρ - (∫qρ)²`.
    pub fn variance(&self) -> f64 {
        let g = *self.grid();
        let rho = self.density();
        let q = g.points();
        let first: Vec<f64> = rho.values().iter().zip(&q).map(|(r, x)| r * x).collect();
        let second: Vec<f64> = rho.values().iter().zip(&q).map(|(r, x)| r * x * x).collect();
        let norm = rho.integrate().unwrap_or(f64::NAN);
        let mean = g.integrate(&first).unwrap_or(f64::NAN) / norm;
        g.integrate(&second).unwrap_or(f64::NAN) / norm - mean * mean
    }

    /// Fraction of `Σ|ψ̂_k|²` carried by modes with `|k| > 0.9 k_max`.
    pub fn spectral_tail(&self) -> f64 {
        let g = *self.grid();
        let (fwd, _) = fft_pair(g.len());
        let mut buf = self.psi.values().to_vec();
        fwd.process(&mut buf);
        let cut = 0.9 * g.k_max();
        let (mut tail, mut total) = (0.0, 0.0);
        for (c, k) in buf.iter().zip(g.wavenumbers()) {
            let p = c.norm_sqr();
            total += p;
            if k.abs() > cut {
                tail += p;
            }
        }
        if total > 0.0 {
            tail / total
        } else {
            0.0
        }
    }
}

/// Exact kinetic propagator over a fixed `dt`.
pub struct Propagator {
    grid: Grid,
    dt: f64,
    phases: Vec<Complex64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Propagator {
    pub fn new(grid: &Grid, params: &PhysParams, dt: f64) -> Result<Self> {
        if !grid.is_periodic() {
            return Err(Error::Config("spectral propagation requires a periodic grid".into()));
        }
        if !dt.is_finite() {
            return Err(Error::Config("time step must be finite".into()));
        }
        let n = grid.len();
        let norm = 1.0 / n as f64;
        let w = params.hbar * dt / (2.0 * params.m);
        let phases = grid
            .wavenumbers()
            .into_iter()
            .map(|k| Complex64::from_polar(norm, -w * k * k))
            .collect();
        let (fwd, inv) = fft_pair(n);
        Ok(Self {
            grid: *grid,
            dt,
            phases,
            fwd,
            inv,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step_in_place(&self, wave: &mut WaveField) -> Result<()> {
        if *wave.grid() != self.grid {
            return Err(Error::Config("wave function lives on a different grid".into()));
        }
        let buf = wave.psi.values_mut();
        self.fwd.process(buf);
        for (c, p) in buf.iter_mut().zip(&self.phases) {
            *c *= p;
        }
        self.inv.process(buf);
        wave.t += self.dt;
        Ok(())
    }
}

/// One exact free step of length `dt` (negative steps run backwards).
pub fn step(wave: &WaveField, params: &PhysParams, dt: f64) -> Result<WaveField> {
    let prop = Propagator::new(wave.grid(), params, dt)?;
    let mut out = wave.clone();
    prop.step_in_place(&mut out)?;
    Ok(out)
}

/// Initial phase `S(q)` imposed on `|ψ₀|`.
#[derive(Debug, Clone)]
pub enum InitialPhase {
    Zero,
    /// `S = m a q²/2`, a uniform initial divergence `θ₀ = a`.
    Quadratic(f64),
    Custom(RealField),
}

impl InitialPhase {
    /// Uniform initial divergence, if the phase has one.
    pub fn theta0(&self) -> Option<f64> {
        match self {
            InitialPhase::Zero => Some(0.0),
            InitialPhase::Quadratic(a) => Some(*a),
            InitialPhase::Custom(_) => None,
        }
    }

    pub fn apply(&self, psi: &ComplexField, params: &PhysParams) -> Result<ComplexField> {
        let g = *psi.grid();
        let amp = psi.values().iter().map(|p| p.norm());
        let values: Vec<Complex64> = match self {
            InitialPhase::Zero => amp.map(|a| Complex64::new(a, 0.0)).collect(),
            InitialPhase::Quadratic(a) => amp
                .zip(g.points())
                .map(|(r, q)| Complex64::from_polar(r, params.m * a * q * q / (2.0 * params.hbar)))
                .collect(),
            InitialPhase::Custom(s) => {
                if s.grid() != &g {
                    return Err(Error::Config("phase field lives on a different grid".into()));
                }
                if !s.is_finite() {
                    return Err(Error::Data("non-finite phase field".into()));
                }
                amp.zip(s.values())
                    .map(|(r, s)| Complex64::from_polar(r, s / params.hbar))
                    .collect()
            }
        };
        ComplexField::new(g, values)
    }
}

#[derive(Debug, Clone)]
pub struct EvolutionConfig {
    pub dt: f64,
    pub t_end: f64,
    pub params: PhysParams,
    /// Steps between recorded samples.
    pub observer_stride: usize,
    /// A sample with `min θ` below this marks the approach to a caustic.
    pub theta_blowup_threshold: f64,
    /// Largest tolerated density near the ends of the periodic cell.
    pub boundary_leak_tol: f64,
    pub masks: MaskOptions,
    /// Keep velocity frames for tracing.
    pub record_frames: bool,
    /// Starting points of traces computed at the end of the run.
    pub trace_starts: Vec<f64>,
    /// Keep a full snapshot every this many samples (0: none).
    pub snapshot_every: usize,
    /// Stop once a sample crosses `theta_blowup_threshold`.
    pub stop_at_caustic: bool,
}

impl EvolutionConfig {
    pub fn new(dt: f64, t_end: f64, params: PhysParams) -> Self {
        Self {
            dt,
            t_end,
            params,
            observer_stride: 1,
            theta_blowup_threshold: -1e3,
            boundary_leak_tol: 1e-8,
            masks: MaskOptions::default(),
            record_frames: false,
            trace_starts: Vec::new(),
            snapshot_every: 0,
            stop_at_caustic: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::Config(format!("t_end must be non-negative, got {}", self.t_end)));
        }
        if self.observer_stride == 0 {
            return Err(Error::Config("observer_stride must be at least 1".into()));
        }
        Ok(())
    }
}

/// Scalar diagnostics at one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub norm: f64,
    pub variance: f64,
    pub convexity_min: Option<f64>,
    pub theta_min: Option<f64>,
    pub spectral_tail: f64,
    pub boundary_density: f64,
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub wave: WaveField,
    pub fields: MadelungFields,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Completed,
    NearCaustic,
    BoundaryLeak,
}

#[derive(Debug, Clone)]
pub struct EvolutionRecord {
    pub params: PhysParams,
    pub grid: Grid,
    pub theta0: Option<f64>,
    pub samples: Vec<Sample>,
    pub frames: Vec<TraceFrame>,
    pub snapshots: Vec<Snapshot>,
    pub traces: Vec<Trace>,
    /// First sample time with `min U'' < 0`.
    pub t_convexity: Option<f64>,
    /// First sample time with `min θ` below the blow-up threshold.
    pub t_near_caustic: Option<f64>,
    pub leak: bool,
    pub stop: StopReason,
    /// Final state.
    pub last: WaveField,
}

impl EvolutionRecord {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    /// `1/|θ₀|` for a converging uniform start.
    pub fn caustic_bound(&self) -> Option<f64> {
        self.theta0.and_then(crate::madelung::caustic_bound)
    }
}

/// Traces `q0` through the frames stored in `record`.
pub fn lagrangian_trace(record: &EvolutionRecord, q0: f64) -> Result<Trace> {
    if record.frames.is_empty() {
        return Err(Error::Config("record has no frames; enable record_frames".into()));
    }
    trace_frames(&record.frames, q0)
}

fn boundary_density(rho: &[f64]) -> f64 {
    let w = (rho.len() / 32).max(2);
    rho[..w]
        .iter()
        .chain(&rho[rho.len() - w..])
        .copied()
        .fold(0.0, f64::max)
}

/// Evolves `|ψ₀|·exp(iS/ħ)` to `t_end` and records diagnostics.
pub fn run(psi0: &WaveField, phase: &InitialPhase, config: &EvolutionConfig) -> Result<EvolutionRecord> {
    config.validate()?;
    let grid = *psi0.grid();
    if !grid.is_periodic() {
        return Err(Error::Config("evolution requires a periodic grid".into()));
    }
    let norm0 = psi0.norm();
    if !((norm0 - 1.0).abs() <= 1e-8) {
        return Err(Error::Data(format!("initial state is not normalized (norm = {norm0})")));
    }
    let params = config.params;
    let mut wave = WaveField::new(psi0.t, phase.apply(&psi0.psi, &params)?);
    let interval = Propagator::new(&grid, &params, config.observer_stride as f64 * config.dt)?;
    let n_steps = (config.t_end / config.dt).round() as usize;
    let t_start = psi0.t;

    let mut record = EvolutionRecord {
        params,
        grid,
        theta0: phase.theta0(),
        samples: Vec::new(),
        frames: Vec::new(),
        snapshots: Vec::new(),
        traces: Vec::new(),
        t_convexity: None,
        t_near_caustic: None,
        leak: false,
        stop: StopReason::Completed,
        last: wave.clone(),
    };

    let mut step_index = 0usize;
    loop {
        // Exact time stamps avoid drift from repeated addition.
        wave.t = t_start + step_index as f64 * config.dt;
        if !wave.psi.is_finite() {
            return Err(Error::Data(format!("non-finite wave function at t = {}", wave.t)));
        }
        let fields = MadelungFields::from_psi(&wave.psi, &params, &config.masks, wave.t)?;
        let sample = Sample {
            t: wave.t,
            norm: wave.norm(),
            variance: wave.variance(),
            convexity_min: fields.convexity_min(),
            theta_min: fields.theta_min(),
            spectral_tail: wave.spectral_tail(),
            boundary_density: boundary_density(fields.rho.values()),
        };
        if record.t_convexity.is_none() && sample.convexity_min.is_none_or(|c| c < 0.0) {
            record.t_convexity = Some(sample.t);
        }
        let near_caustic = sample
            .theta_min
            .is_some_and(|th| th < config.theta_blowup_threshold);
        if near_caustic && record.t_near_caustic.is_none() {
            record.t_near_caustic = Some(sample.t);
        }
        if config.record_frames {
            record.frames.push(TraceFrame::from_fields(&fields));
        }
        let sample_index = record.samples.len();
        if config.snapshot_every > 0 && sample_index.is_multiple_of(config.snapshot_every) {
            record.snapshots.push(Snapshot {
                wave: wave.clone(),
                fields,
            });
        }
        record.samples.push(sample);

        if sample.boundary_density > config.boundary_leak_tol {
            record.leak = true;
            record.stop = StopReason::BoundaryLeak;
            break;
        }
        if near_caustic && config.stop_at_caustic {
            record.stop = StopReason::NearCaustic;
            break;
        }
        if step_index >= n_steps {
            break;
        }
        let next = (step_index + config.observer_stride).min(n_steps);
        // The kinetic propagator is exact, so a whole observer interval is one
        // step; this keeps FFT round-off from accumulating with stride.
        if next - step_index == config.observer_stride {
            interval.step_in_place(&mut wave)?;
        } else {
            Propagator::new(&grid, &params, (next - step_index) as f64 * config.dt)?.step_in_place(&mut wave)?;
        }
        step_index = next;
    }
    record.last = wave;

    if !config.trace_starts.is_empty() {
        if !config.record_frames {
            return Err(Error::Config("trace_starts requires record_frames".into()));
        }
        record.traces = config
            .trace_starts
            .iter()
            .map(|&q0| trace_frames(&record.frames, q0))
            .collect::<Result<_>>()?;
    }
    Ok(record)
}
