//! Adaptive Dormand–Prince 5(4) integrator for small autonomous-size systems.

use crate::error::{Error, Result};
use crate::grid::two_sum;

#[derive(Debug, Clone, Copy)]
pub struct Dopri5Options {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for Dopri5Options {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            h_init: 1e-4,
            h_max: 0.02,
            max_steps: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeStep<const N: usize> {
    pub t: f64,
    pub y: [f64; N],
    /// Low-order parts of the compensated state: the solution is `y + y_lo`.
    pub y_lo: [f64; N],
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// Fifth-order weights minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates `y' = rhs(t, y)` from `(t0, y0)` until `stop` returns true for
/// an accepted step. Every accepted step is returned, starting with the
/// initial point.
pub fn integrate<const N: usize, F, S>(
    rhs: F,
    t0: f64,
    y0: [f64; N],
    opts: &Dopri5Options,
    mut stop: S,
) -> Result<Vec<OdeStep<N>>>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
    S: FnMut(f64, &[f64; N]) -> bool,
{
    let mut t = t0;
    let mut y = y0;
    let mut y_lo = [0.0; N];
    let mut h = opts.h_init.min(opts.h_max);
    let mut out = vec![OdeStep { t, y, y_lo }];
    let mut k = [[0.0; N]; 7];
    k[0] = rhs(t, &y);
    let mut rejected_in_row = 0usize;

    for _ in 0..opts.max_steps {
        for s in 1..7 {
            let mut ys = y;
            for (i, v) in ys.iter_mut().enumerate() {
                *v += h * (0..s).map(|j| A[s][j] * k[j][i]).sum::<f64>();
            }
            k[s] = rhs(t + C[s] * h, &ys);
        }
        let mut y_new = y;
        let mut lo_new = y_lo;
        for i in 0..N {
            let d = h * (0..6).map(|j| A[6][j] * k[j][i]).sum::<f64>() + y_lo[i];
            (y_new[i], lo_new[i]) = two_sum(y[i], d);
        }
        let err = (0..N)
            .map(|i| {
                let e = h * (0..7).map(|j| E[j] * k[j][i]).sum::<f64>();
                let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
                (e / sc).powi(2)
            })
            .sum::<f64>()
            / N as f64;
        let err = err.sqrt();

        if !err.is_finite() || !y_new.iter().all(|v| v.is_finite()) {
            h *= 0.25;
            rejected_in_row += 1;
        } else if err <= 1.0 {
            t += h;
            y = y_new;
            y_lo = lo_new;
            // FSAL: the last stage is the derivative at the new point.
            k[0] = k[6];
            out.push(OdeStep { t, y, y_lo });
            if stop(t, &y) {
                return Ok(out);
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h = (h * factor).min(opts.h_max);
            rejected_in_row = 0;
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            rejected_in_row += 1;
        }
        if rejected_in_row > 60 || h < f64::EPSILON * t.abs().max(1.0) * 1e-3 {
            return Err(Error::Divergence(format!(
                "step size underflow at t = {t} (h = {h})"
            )));
        }
    }
    Err(Error::Divergence(format!(
        "no stopping event within {} steps",
        opts.max_steps
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_growth() {
        let opts = Dopri5Options::default();
        let steps = integrate(|_, y: &[f64; 1]| [y[0]], 0.0, [1.0], &opts, |t, _| t >= 2.0).unwrap();
        let last = steps.last().unwrap();
        assert!((last.y[0] - last.t.exp()).abs() < 1e-8 * last.t.exp());
    }

    #[test]
    fn harmonic_oscillator_keeps_energy() {
        let opts = Dopri5Options {
            h_max: 0.5,
            ..Default::default()
        };
        let steps = integrate(
            |_, y: &[f64; 2]| [y[1], -y[0]],
            0.0,
            [1.0, 0.0],
            &opts,
            |t, _| t >= 20.0,
        )
        .unwrap();
        for s in &steps {
            assert!((s.y[0] - s.t.cos()).abs() < 1e-8);
        }
    }

    #[test]
    fn missing_event_is_divergence() {
        let opts = Dopri5Options {
            max_steps: 10,
            ..Default::default()
        };
        let r = integrate(|_, _: &[f64; 1]| [0.0], 0.0, [0.0], &opts, |_, _| false);
        assert!(matches!(r, Err(Error::Divergence(_))));
    }
}
