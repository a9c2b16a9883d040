//! Uniform one-dimensional lattices.
//!
//! A [`Grid`] is either *bounded* (both endpoints are nodes) or *periodic*
//! (`x_max` is identified with `x_min` and is not stored). Derivatives come in
//! three backends: second- and fourth-order finite differences, which use
//! one-sided stencils of the same order next to boundaries, and a Fourier
//! backend that is only defined on periodic grids.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Smallest admissible number of nodes.
pub const MIN_POINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridMode {
    Bounded,
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Fd2,
    Fd4,
    Spectral,
}

impl Backend {
    /// Number of nodes a stencil of this backend touches.
    pub fn stencil_width(self, order: usize) -> usize {
        match (self, order) {
            (Backend::Fd2, 1) => 3,
            (Backend::Fd2, _) => 4,
            (Backend::Fd4, 1) => 5,
            (Backend::Fd4, _) => 6,
            (Backend::Spectral, _) => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    x_min: f64,
    x_max: f64,
    n: usize,
    dx: f64,
    mode: GridMode,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n: usize, mode: GridMode) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) {
            return Err(Error::Config("grid bounds must be finite".into()));
        }
        if n < MIN_POINTS {
            return Err(Error::Config(format!(
                "grid needs at least {MIN_POINTS} points, got {n}"
            )));
        }
        if x_max <= x_min {
            return Err(Error::Config(format!(
                "grid requires x_max > x_min, got [{x_min}, {x_max}]"
            )));
        }
        let dx = match mode {
            GridMode::Bounded => (x_max - x_min) / (n - 1) as f64,
            GridMode::Periodic => (x_max - x_min) / n as f64,
        };
        Ok(Self {
            x_min,
            x_max,
            n,
            dx,
            mode,
        })
    }

    pub fn bounded(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        Self::new(x_min, x_max, n, GridMode::Bounded)
    }

    pub fn periodic(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        Self::new(x_min, x_max, n, GridMode::Periodic)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn mode(&self) -> GridMode {
        self.mode
    }

    pub fn is_periodic(&self) -> bool {
        self.mode == GridMode::Periodic
    }

    /// Length of the periodic cell (or of the bounded interval).
    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn point(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    /// `x_min + i·dx` as an unevaluated sum `hi + lo`, exact to well below
    /// the rounding of [`Grid::point`].
    pub fn point_split(&self, i: usize) -> (f64, f64) {
        let p = i as f64 * self.dx;
        let p_lo = (i as f64).mul_add(self.dx, -p);
        let (hi, lo) = two_sum(self.x_min, p);
        (hi, lo + p_lo)
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.point(i)).collect()
    }

    /// Angular wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.n as i64;
        let base = 2.0 * PI / self.length();
        (0..n)
            .map(|j| {
                let m = if j <= (n - 1) / 2 { j } else { j - n };
                base * m as f64
            })
            .collect()
    }

    /// Largest resolved angular wavenumber, `π/dx`.
    pub fn k_max(&self) -> f64 {
        PI / self.dx
    }

    /// True when a bounded grid is (to round-off) symmetric about zero.
    pub fn is_symmetric(&self) -> bool {
        (self.x_min + self.x_max).abs() <= 1e-12 * self.length()
    }

    /// Index of the node nearest to `x`, clamped to the grid.
    pub fn nearest(&self, x: f64) -> usize {
        let i = ((x - self.x_min) / self.dx).round();
        i.clamp(0.0, (self.n - 1) as f64) as usize
    }

    pub fn sample<F: Fn(f64) -> f64>(&self, f: F) -> RealField {
        Field::new(*self, self.points().into_iter().map(f).collect())
            .expect("length matches by construction")
    }

    pub fn sample_complex<F: Fn(f64) -> Complex64>(&self, f: F) -> ComplexField {
        Field::new(*self, self.points().into_iter().map(f).collect())
            .expect("length matches by construction")
    }

    pub fn deriv1<T: Sample>(&self, f: &[T], backend: Backend) -> Result<Vec<T>> {
        self.derivative(f, 1, backend)
    }

    pub fn deriv2<T: Sample>(&self, f: &[T], backend: Backend) -> Result<Vec<T>> {
        self.derivative(f, 2, backend)
    }

    fn derivative<T: Sample>(&self, f: &[T], order: usize, backend: Backend) -> Result<Vec<T>> {
        self.check_len(f.len())?;
        if !f.iter().all(|v| v.is_finite()) {
            return Err(Error::Data("non-finite value in derivative input".into()));
        }
        match (backend, self.mode) {
            (Backend::Spectral, GridMode::Bounded) => Err(Error::Config(
                "spectral derivatives require a periodic grid".into(),
            )),
            (Backend::Spectral, GridMode::Periodic) => Ok(spectral_derivative(self, f, order)),
            (fd, GridMode::Periodic) => Ok(fd_periodic(f, self.dx, order, fd)),
            (fd, GridMode::Bounded) => {
                if f.len() < fd.stencil_width(order) {
                    return Err(Error::Config("grid too small for stencil".into()));
                }
                Ok(fd_open(f, self.dx, order, fd))
            }
        }
    }

    /// Derivative restricted to the nodes where `mask` is set.
    ///
    /// Each contiguous run of masked nodes is differentiated on its own, with
    /// one-sided stencils at the run ends. Runs shorter than the stencil give
    /// `None`; unmasked nodes are always `None`. On a periodic grid with every
    /// node masked the periodic stencil is used.
    pub fn deriv_masked<T: Sample>(
        &self,
        f: &[T],
        mask: &[bool],
        order: usize,
        backend: Backend,
    ) -> Result<Vec<Option<T>>> {
        self.check_len(f.len())?;
        self.check_len(mask.len())?;
        if backend == Backend::Spectral {
            if self.is_periodic() && mask.iter().all(|&m| m) {
                return Ok(self.derivative(f, order, backend)?.into_iter().map(Some).collect());
            }
            return Err(Error::Config(
                "spectral derivatives need a periodic grid without mask gaps".into(),
            ));
        }
        if mask
            .iter()
            .zip(f)
            .any(|(&m, v)| m && !v.is_finite())
        {
            return Err(Error::Data("non-finite value inside mask".into()));
        }
        let mut out = vec![None; f.len()];
        if self.is_periodic() && mask.iter().all(|&m| m) {
            for (o, d) in out.iter_mut().zip(fd_periodic(f, self.dx, order, backend)) {
                *o = Some(d);
            }
            return Ok(out);
        }
        let width = backend.stencil_width(order);
        for run in mask_runs(mask, self.is_periodic()) {
            if run.len() < width {
                continue;
            }
            let vals: Vec<T> = run.iter().map(|&i| f[i]).collect();
            for (&i, d) in run.iter().zip(fd_open(&vals, self.dx, order, backend)) {
                out[i] = Some(d);
            }
        }
        Ok(out)
    }

    /// Trapezoidal rule on bounded grids, rectangle rule on periodic ones.
    pub fn integrate(&self, f: &[f64]) -> Result<f64> {
        self.check_len(f.len())?;
        if !f.iter().all(|v| v.is_finite()) {
            return Err(Error::Data("non-finite value in integrand".into()));
        }
        let sum: f64 = f.iter().sum();
        Ok(match self.mode {
            GridMode::Bounded => self.dx * (sum - 0.5 * (f[0] + f[self.n - 1])),
            GridMode::Periodic => self.dx * sum,
        })
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::Config(format!(
                "field length {len} does not match grid size {}",
                self.n
            )));
        }
        Ok(())
    }
}

/// Arithmetic needed by the derivative kernels.
pub trait Sample:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> + Send + Sync
{
    fn zero() -> Self;
    fn is_finite(&self) -> bool;
    fn to_complex(self) -> Complex64;
    fn from_complex(c: Complex64) -> Self;
}

impl Sample for f64 {
    fn zero() -> Self {
        0.0
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
    fn from_complex(c: Complex64) -> Self {
        c.re
    }
}

impl Sample for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
    fn to_complex(self) -> Complex64 {
        self
    }
    fn from_complex(c: Complex64) -> Self {
        c
    }
}

/// Values sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<T> {
    grid: Grid,
    values: Vec<T>,
}

pub type RealField = Field<f64>;
pub type ComplexField = Field<Complex64>;

impl<T: Sample> Field<T> {
    pub fn new(grid: Grid, values: Vec<T>) -> Result<Self> {
        grid.check_len(values.len())?;
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![T::zero(); grid.len()],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn deriv1(&self, backend: Backend) -> Result<Self> {
        Ok(Self {
            grid: self.grid,
            values: self.grid.deriv1(&self.values, backend)?,
        })
    }

    pub fn deriv2(&self, backend: Backend) -> Result<Self> {
        Ok(Self {
            grid: self.grid,
            values: self.grid.deriv2(&self.values, backend)?,
        })
    }

    pub fn map<U: Sample, F: Fn(T) -> U>(&self, f: F) -> Field<U> {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

impl RealField {
    pub fn integrate(&self) -> Result<f64> {
        self.grid.integrate(&self.values)
    }
}

/// Contiguous runs of set mask entries, in index order. On periodic grids a
/// run crossing the last node continues at index 0.
pub(crate) fn mask_runs(mask: &[bool], periodic: bool) -> Vec<Vec<usize>> {
    let n = mask.len();
    let mut runs: Vec<Vec<usize>> = Vec::new();
    let mut current: Vec<usize> = Vec::new();
    for (i, &m) in mask.iter().enumerate() {
        if m {
            current.push(i);
        } else if !current.is_empty() {
            runs.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        runs.push(current);
    }
    if periodic && runs.len() > 1 && mask[0] && mask[n - 1] {
        let first = runs.remove(0);
        runs.last_mut().expect("at least one run").extend(first);
    }
    runs
}

/// Masked nodes lying fewer than `width` nodes away from an unmasked node.
pub fn edge_flags(mask: &[bool], width: usize, periodic: bool) -> Vec<bool> {
    let n = mask.len() as isize;
    let w = width as isize;
    (0..n)
        .map(|i| {
            mask[i as usize]
                && (-w + 1..w).any(|d| {
                    let j = i + d;
                    let j = if periodic {
                        j.rem_euclid(n)
                    } else if j < 0 || j >= n {
                        return false;
                    } else {
                        j
                    };
                    !mask[j as usize]
                })
        })
        .collect()
}

fn fd_periodic<T: Sample>(f: &[T], h: f64, order: usize, backend: Backend) -> Vec<T> {
    let n = f.len();
    let at = |i: usize, d: isize| f[(i as isize + d).rem_euclid(n as isize) as usize];
    (0..n)
        .map(|i| match (backend, order) {
            (Backend::Fd2, 1) => (at(i, 1) - at(i, -1)) * (0.5 / h),
            (Backend::Fd2, _) => (at(i, 1) - at(i, 0) * 2.0 + at(i, -1)) * (1.0 / (h * h)),
            (_, 1) => {
                (at(i, -2) - at(i, -1) * 8.0 + at(i, 1) * 8.0 - at(i, 2)) * (1.0 / (12.0 * h))
            }
            (_, _) => {
                (at(i, -1) * 16.0 + at(i, 1) * 16.0 - at(i, 0) * 30.0 - at(i, -2) - at(i, 2))
                    * (1.0 / (12.0 * h * h))
            }
        })
        .collect()
}

fn dot<T: Sample>(coef: &[f64], vals: impl Iterator<Item = T>) -> T {
    coef.iter()
        .zip(vals)
        .fold(T::zero(), |acc, (&c, v)| acc + v * c)
}

// One-sided stencils, indexed by distance from the boundary node.
const FD2_D1_EDGE: [f64; 3] = [-1.5, 2.0, -0.5];
const FD2_D2_EDGE: [f64; 4] = [2.0, -5.0, 4.0, -1.0];
const FD4_D1_EDGE: [[f64; 5]; 2] = [
    [-25.0 / 12.0, 4.0, -3.0, 4.0 / 3.0, -0.25],
    [-0.25, -5.0 / 6.0, 1.5, -0.5, 1.0 / 12.0],
];
const FD4_D2_EDGE: [[f64; 6]; 2] = [
    [
        15.0 / 4.0,
        -77.0 / 6.0,
        107.0 / 6.0,
        -13.0,
        61.0 / 12.0,
        -5.0 / 6.0,
    ],
    [
        5.0 / 6.0,
        -1.25,
        -1.0 / 3.0,
        7.0 / 6.0,
        -0.5,
        1.0 / 12.0,
    ],
];

/// Derivative of a non-periodic sequence with same-order one-sided stencils at
/// both ends. `f.len()` must be at least the stencil width.
fn fd_open<T: Sample>(f: &[T], h: f64, order: usize, backend: Backend) -> Vec<T> {
    let n = f.len();
    let scale = if order == 1 { 1.0 / h } else { 1.0 / (h * h) };
    let sign = if order == 1 { -1.0 } else { 1.0 };
    // Values walking inward from the left or right end.
    let left = |k: usize| f[k];
    let right = |k: usize| f[n - 1 - k];
    let mut out = vec![T::zero(); n];
    match (backend, order) {
        (Backend::Fd2, 1) => {
            for i in 1..n - 1 {
                out[i] = (f[i + 1] - f[i - 1]) * (0.5 * scale);
            }
            out[0] = dot(&FD2_D1_EDGE, (0..3).map(left)) * scale;
            out[n - 1] = dot(&FD2_D1_EDGE, (0..3).map(right)) * (sign * scale);
        }
        (Backend::Fd2, _) => {
            for i in 1..n - 1 {
                out[i] = (f[i + 1] - f[i] * 2.0 + f[i - 1]) * scale;
            }
            out[0] = dot(&FD2_D2_EDGE, (0..4).map(left)) * scale;
            out[n - 1] = dot(&FD2_D2_EDGE, (0..4).map(right)) * scale;
        }
        (_, 1) => {
            for i in 2..n - 2 {
                out[i] = (f[i - 2] - f[i - 1] * 8.0 + f[i + 1] * 8.0 - f[i + 2]) * (scale / 12.0);
            }
            for (b, coef) in FD4_D1_EDGE.iter().enumerate() {
                out[b] = dot(coef, (0..5).map(left)) * scale;
                out[n - 1 - b] = dot(coef, (0..5).map(right)) * (sign * scale);
            }
        }
        (_, _) => {
            for i in 2..n - 2 {
                out[i] = (f[i - 1] * 16.0 + f[i + 1] * 16.0 - f[i] * 30.0 - f[i - 2] - f[i + 2])
                    * (scale / 12.0);
            }
            for (b, coef) in FD4_D2_EDGE.iter().enumerate() {
                out[b] = dot(coef, (0..6).map(left)) * scale;
                out[n - 1 - b] = dot(coef, (0..6).map(right)) * scale;
            }
        }
    }
    out
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) fn fft_pair(n: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft_forward(n), p.plan_fft_inverse(n))
    })
}

fn spectral_derivative<T: Sample>(grid: &Grid, f: &[T], order: usize) -> Vec<T> {
    let n = f.len();
    let (fwd, inv) = fft_pair(n);
    let mut buf: Vec<Complex64> = f.iter().map(|v| v.to_complex()).collect();
    fwd.process(&mut buf);
    let ks = grid.wavenumbers();
    let norm = 1.0 / n as f64;
    for (j, (c, &k)) in buf.iter_mut().zip(&ks).enumerate() {
        let factor = match order {
            // The Nyquist mode of an even grid has no odd-derivative partner.
            1 if n.is_multiple_of(2) && j == n / 2 => Complex64::new(0.0, 0.0),
            1 => Complex64::new(0.0, k),
            _ => {
                let k = if n.is_multiple_of(2) && j == n / 2 { PI / grid.dx() } else { k };
                Complex64::new(-k * k, 0.0)
            }
        };
        *c *= factor * norm;
    }
    inv.process(&mut buf);
    buf.into_iter().map(T::from_complex).collect()
}

/// Error-free sum: `a + b = s + e` exactly.
pub(crate) fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}
