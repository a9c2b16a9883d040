//! Re-checks stored outputs against the invariants they must satisfy.

use std::fmt;
use std::path::Path;

use selftrap_core::madelung::{convexity_min, MaskedField};
use selftrap_core::{Field, Grid};

use crate::commands::{
    CompareSummary, Summary, COMPARE_CSV, COMPARE_JSON, PROFILE_CSV, PROFILE_HEADER, SUMMARY_JSON, TIMESERIES_CSV,
};
use crate::output::{num, Table};
use crate::CliError;

pub const NORM_TOL: f64 = 1e-6;
pub const SYMMETRY_TOL: f64 = 1e-8;
pub const SLOPE_REL_TOL: f64 = 0.01;
pub const MOMENT_REL_TOL: f64 = 1e-6;
pub const NORM_DRIFT_TOL: f64 = 1e-8;
/// Edge band of the potential excluded from the convexity check.
pub const EDGE_WIDTH: usize = 6;

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

fn check(name: &str, pass: bool, detail: String) -> Check {
    Check {
        name: name.into(),
        pass,
        detail,
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Runs every check that applies to the files present in `dir`.
pub fn diagnose(dir: &Path) -> Result<Vec<Check>, CliError> {
    let mut checks = Vec::new();
    if dir.join(PROFILE_CSV).exists() {
        checks.extend(profile_checks(dir)?);
    }
    if dir.join(COMPARE_CSV).exists() {
        checks.extend(compare_checks(dir)?);
    }
    if dir.join(TIMESERIES_CSV).exists() {
        checks.extend(timeseries_checks(dir)?);
    }
    if checks.is_empty() {
        return Err(CliError::Config(format!("no recognised outputs in {}", dir.display())));
    }
    Ok(checks)
}

/// Rebuilds the grid from the q column and checks its spacing.
fn grid_of(q: &[f64], periodic: bool) -> Result<(Grid, Check), CliError> {
    let n = q.len();
    if n < 5 {
        return Err(CliError::Io("too few rows".into()));
    }
    let dx = (q[n - 1] - q[0]) / (n - 1) as f64;
    let grid = if periodic {
        Grid::periodic(q[0], q[n - 1] + dx, n)
    } else {
        Grid::bounded(q[0], q[n - 1], n)
    }
    .map_err(|e| CliError::Io(format!("q column: {e}")))?;
    let worst = (0..n).map(|i| (q[i] - grid.point(i)).abs()).fold(0.0, f64::max);
    let scale = q[0].abs().max(q[n - 1].abs());
    let c = check("uniform_grid", worst <= 1e-12 * scale, format!("max |q - q_i| = {}", num(worst)));
    Ok((grid, c))
}

fn normalization(grid: Grid, rho: &[f64], name: &str) -> Result<Check, CliError> {
    let z = Field::new(grid, rho.to_vec())
        .and_then(|f| f.integrate())
        .map_err(|e| CliError::Io(e.to_string()))?;
    let err = (z - 1.0).abs();
    Ok(check(name, err <= NORM_TOL, format!("|∫ρ dq - 1| = {}", num(err))))
}

/// Least-squares slope of `y` against `x`.
pub fn slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn profile_checks(dir: &Path) -> Result<Vec<Check>, CliError> {
    let table = Table::read(&dir.join(PROFILE_CSV))?;
    let summary: Summary = read_json(&dir.join(SUMMARY_JSON))?;
    let mut out = vec![check(
        "profile_header",
        table.header == PROFILE_HEADER,
        table.header.join(","),
    )];
    let q = table.dense("q")?;
    let rho = table.dense("rho")?;
    let u = table.column("U")?;
    let (grid, spacing) = grid_of(&q, summary.grid.periodic)?;
    out.push(spacing);
    out.push(normalization(grid, &rho, "normalization")?);

    let n = q.len();
    let mirror = |i: usize| if grid.is_periodic() { (n - i) % n } else { n - 1 - i };
    let asym = (0..n).map(|i| (rho[i] - rho[mirror(i)]).abs()).fold(0.0, f64::max);
    out.push(check("symmetry", asym <= SYMMETRY_TOL, format!("max |ρ(q) - ρ(-q)| = {}", num(asym))));

    let outside = (0..n).filter(|&i| u[i].is_none() && rho[i] != 0.0).count();
    out.push(check("support", outside == 0, format!("{outside} rows with ρ ≠ 0 and no U")));

    let potential = MaskedField::from_options(grid, u.clone(), EDGE_WIDTH);
    out.push(match convexity_min(&potential) {
        Ok(c) => check("convexity", c > 0.0, format!("min U'' = {}", num(c))),
        Err(e) => check("convexity", false, e.to_string()),
    });

    let pts: Vec<(f64, f64)> = (0..n)
        .filter_map(|i| u[i].filter(|_| rho[i] > 1e-6).map(|v| (v, rho[i].ln())))
        .collect();
    let beta = summary.params.beta;
    let s = if pts.len() > 2 { slope(&pts) } else { f64::NAN };
    out.push(check(
        "log_linear",
        (s + beta).abs() <= SLOPE_REL_TOL * beta,
        format!("slope of ln ρ vs U = {s}, expected {}", -beta),
    ));
    Ok(out)
}

fn compare_checks(dir: &Path) -> Result<Vec<Check>, CliError> {
    let table = Table::read(&dir.join(COMPARE_CSV))?;
    let summary: CompareSummary = read_json(&dir.join(COMPARE_JSON))?;
    let q = table.dense("q")?;
    let rho = table.dense("rho_selftrap")?;
    let rho_g = table.dense("rho_gaussian")?;
    let (grid, spacing) = grid_of(&q, summary.grid.periodic)?;
    let mut out = vec![spacing];
    out.push(normalization(grid, &rho, "compare_normalization")?);
    out.push(normalization(grid, &rho_g, "compare_gaussian_normalization")?);
    let moment = |r: &[f64]| {
        let f: Vec<f64> = r.iter().zip(&q).map(|(r, q)| r * q * q).collect();
        grid.integrate(&f).map_err(|e| CliError::Io(e.to_string()))
    };
    let (m_s, m_g) = (moment(&rho)?, moment(&rho_g)?);
    let rel = ((m_s - m_g) / m_s).abs();
    out.push(check(
        "second_moment",
        rel <= MOMENT_REL_TOL,
        format!("self-trapped {}, Gaussian {}, relative {}", num(m_s), num(m_g), num(rel)),
    ));
    let stray = (0..q.len()).filter(|&i| q[i].abs() >= summary.q_m && rho[i] != 0.0).count();
    out.push(check("compact_support", stray == 0, format!("{stray} rows with ρ ≠ 0 beyond q_m")));
    out.push(check(
        "peak_ratio",
        summary.peak_ratio > 1.0,
        format!("ρ_G(0)/ρ(0) = {}", summary.peak_ratio),
    ));
    Ok(out)
}

fn timeseries_checks(dir: &Path) -> Result<Vec<Check>, CliError> {
    let table = Table::read(&dir.join(TIMESERIES_CSV))?;
    let t = table.dense("t")?;
    let norm = table.dense("norm")?;
    let drift = norm.iter().map(|v| (v - norm[0]).abs()).fold(0.0, f64::max);
    let increasing = t.windows(2).all(|w| w[1] > w[0]);
    Ok(vec![
        check("norm_conservation", drift <= NORM_DRIFT_TOL, format!("max |N(t) - N(0)| = {}", num(drift))),
        check("time_order", increasing, format!("{} samples", t.len())),
    ])
}
