//! Lagrangian traces `dq/dt = v(q, t)` through recorded velocity frames.

use crate::error::{Error, Result};
use crate::madelung::{MadelungFields, MaskedField};

/// The fields a trace needs at one sample time.
#[derive(Debug, Clone)]
pub struct TraceFrame {
    pub t: f64,
    pub v: MaskedField,
    pub theta: MaskedField,
    pub curvature: MaskedField,
}

impl TraceFrame {
    pub fn new(t: f64, v: MaskedField, theta: MaskedField, curvature: MaskedField) -> Self {
        Self {
            t,
            v,
            theta,
            curvature,
        }
    }

    pub fn from_fields(fields: &MadelungFields) -> Self {
        Self::new(
            fields.t,
            fields.v.clone(),
            fields.theta.clone(),
            fields.curvature.clone(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub t: f64,
    pub q: f64,
    pub theta: f64,
    /// `U''` at the trace position; `None` where the potential is masked.
    pub curvature: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Trace {
    pub q0: f64,
    pub points: Vec<TracePoint>,
    /// Time of the first frame at which the trace had left the mask.
    pub exited_at: Option<f64>,
}

impl Trace {
    /// `dθ/dt` at every point: centred inside, one-sided at both ends.
    pub fn dtheta_dt(&self) -> Vec<(f64, f64)> {
        let p = &self.points;
        let n = p.len();
        if n < 2 {
            return Vec::new();
        }
        (0..n)
            .map(|i| {
                let (a, b) = match i {
                    0 => (0, 1),
                    i if i == n - 1 => (n - 2, n - 1),
                    i => (i - 1, i + 1),
                };
                (p[i].t, (p[b].theta - p[a].theta) / (p[b].t - p[a].t))
            })
            .collect()
    }

    /// Residual `m dθ/dt + m θ² + U''` at interior points, using centred
    /// differences in time.
    pub fn focusing_residual(&self, m: f64) -> Vec<(f64, f64)> {
        self.points
            .windows(3)
            .filter_map(|w| {
                let c = w[1].curvature?;
                let dth = (w[2].theta - w[0].theta) / (w[2].t - w[0].t);
                Some((w[1].t, m * dth + m * w[1].theta * w[1].theta + c))
            })
            .collect()
    }

    /// `θ⁻¹(t) - θ⁻¹(t₀) - (t - t₀)` for points where θ keeps the sign of the
    /// first point. Non-negative values satisfy the caustic inequality.
    pub fn caustic_margin(&self) -> Vec<(f64, f64)> {
        let Some(first) = self.points.first() else {
            return Vec::new();
        };
        if first.theta == 0.0 {
            return Vec::new();
        }
        self.points
            .iter()
            .take_while(|p| p.theta.signum() == first.theta.signum())
            .map(|p| (p.t, 1.0 / p.theta - 1.0 / first.theta - (p.t - first.t)))
            .collect()
    }
}

/// Integrates a trace from `q0` at `frames[0].t` with the midpoint rule,
/// interpolating `v` linearly in time and cubically in space. The trace stops
/// at the first frame where its position is no longer inside the velocity or
/// divergence mask interior.
pub fn trace_frames(frames: &[TraceFrame], q0: f64) -> Result<Trace> {
    let first = frames
        .first()
        .ok_or_else(|| Error::Data("no frames recorded for tracing".into()))?;
    let sample = |f: &TraceFrame, q: f64| -> Option<TracePoint> {
        Some(TracePoint {
            t: f.t,
            q,
            theta: f.theta.interpolate(q)?,
            curvature: f.curvature.interpolate(q),
        })
    };
    let start = sample(first, q0)
        .filter(|_| first.v.interpolate(q0).is_some())
        .ok_or_else(|| Error::Data(format!("trace start q0 = {q0} is outside the initial mask")))?;

    let mut points = vec![start];
    let mut q = q0;
    let mut exited_at = None;
    for w in frames.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let dt = b.t - a.t;
        let step = (|| {
            let k1 = a.v.interpolate(q)?;
            let qh = q + 0.5 * dt * k1;
            let vh = 0.5 * (a.v.interpolate(qh)? + b.v.interpolate(qh)?);
            let qn = q + dt * vh;
            b.v.interpolate(qn)?;
            sample(b, qn)
        })();
        match step {
            Some(p) => {
                q = p.q;
                points.push(p);
            }
            None => {
                exited_at = Some(b.t);
                break;
            }
        }
    }
    Ok(Trace {
        q0,
        points,
        exited_at,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    fn frozen_linear_frames(a: f64, dt: f64, n: usize) -> Vec<TraceFrame> {
        let g = Grid::periodic(-10.0, 10.0, 400).unwrap();
        let v = MaskedField::from_options(g, g.points().iter().map(|q| Some(a * q)).collect(), 6);
        let th = MaskedField::from_options(g, vec![Some(a); g.len()], 6);
        let c = MaskedField::from_options(g, vec![Some(0.0); g.len()], 1);
        (0..n)
            .map(|k| TraceFrame::new(k as f64 * dt, v.clone(), th.clone(), c.clone()))
            .collect()
    }

    #[test]
    fn zero_velocity_keeps_position() {
        let frames = frozen_linear_frames(0.0, 0.01, 20);
        let tr = trace_frames(&frames, 0.37).unwrap();
        assert!(tr.points.iter().all(|p| p.q == 0.37));
        assert_eq!(tr.points.len(), 20);
    }

    #[test]
    fn linear_field_gives_exponential_motion() {
        let a = 0.8;
        let err = |dt: f64| {
            let n = (1.0 / dt).round() as usize + 1;
            let tr = trace_frames(&frozen_linear_frames(a, dt, n), 1.0).unwrap();
            let last = tr.points.last().unwrap();
            (last.q - (a * last.t).exp()).abs()
        };
        assert!(err(0.01) < 1e-4);
        let order = (err(0.02) / err(0.01)).log2();
        assert!((order - 2.0).abs() < 0.2, "order {order}");
    }

    #[test]
    fn start_outside_mask_is_error() {
        let g = Grid::bounded(0.0, 1.0, 50).unwrap();
        let f = MaskedField::from_options(g, vec![None; 50], 6);
        let frame = TraceFrame::new(0.0, f.clone(), f.clone(), f);
        assert!(matches!(trace_frames(&[frame], 0.5), Err(Error::Data(_))));
    }

    #[test]
    fn caustic_margin_of_free_focusing_is_zero() {
        // θ(t) = θ₀/(1 + θ₀ t) saturates the bound.
        let th0 = -2.0;
        let points = (0..20)
            .map(|k| {
                let t = k as f64 * 0.01;
                TracePoint {
                    t,
                    q: 0.0,
                    theta: th0 / (1.0 + th0 * t),
                    curvature: Some(0.0),
                }
            })
            .collect();
        let tr = Trace {
            q0: 0.0,
            points,
            exited_at: None,
        };
        assert!(tr.caustic_margin().iter().all(|(_, m)| m.abs() < 1e-12));
        assert!(tr
            .focusing_residual(1.0)
            .iter()
            .all(|(_, r)| r.abs() < 1e-2));
    }
}
