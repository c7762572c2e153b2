//! Classical fourth-order Runge–Kutta stepping for systems whose state is a
//! list of complex matrices, with fixed steps or step-doubling control.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::C64;

pub type State = Vec<DMatrix<C64>>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepControl {
    /// Largest accepted local error estimate (entrywise, relative to
    /// `max(1, |y|)`).
    pub tol: f64,
    pub h_initial: f64,
    pub h_max: f64,
    pub h_min: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        Self { tol: 1e-9, h_initial: 1e-2, h_max: 5e-2, h_min: 1e-10 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
}

fn axpy(y: &State, k: &State, a: f64) -> State {
    let a = C64::new(a, 0.0);
    y.iter().zip(k).map(|(y, k)| y + k * a).collect()
}

fn max_abs(y: &State) -> f64 {
    y.iter().map(|m| m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))).fold(0.0, f64::max)
}

fn max_diff(a: &State, b: &State) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y.iter()).fold(0.0f64, |acc, (p, q)| acc.max((p - q).norm())))
        .fold(0.0, f64::max)
}

fn check_finite(y: &State) -> Result<()> {
    if y.iter().all(|m| m.iter().all(|z| z.re.is_finite() && z.im.is_finite())) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

/// One classical RK4 step of size `h` (may be negative).
pub fn rk4_step<F>(rhs: &F, t: f64, y: &State, h: f64) -> Result<State>
where
    F: Fn(f64, &State) -> Result<State>,
{
    let k1 = rhs(t, y)?;
    let k2 = rhs(t + 0.5 * h, &axpy(y, &k1, 0.5 * h))?;
    let k3 = rhs(t + 0.5 * h, &axpy(y, &k2, 0.5 * h))?;
    let k4 = rhs(t + h, &axpy(y, &k3, h))?;
    let c = C64::new(h / 6.0, 0.0);
    let two = C64::new(2.0, 0.0);
    Ok((0..y.len())
        .map(|i| &y[i] + (&k1[i] + &k2[i] * two + &k3[i] * two + &k4[i]) * c)
        .collect())
}

/// Fixed-step RK4 through the monotone grid `times`, starting from `y0` at
/// `times[0]`. Each interval is split into `ceil(|Δt| / dt)` equal steps.
pub fn integrate_fixed<F>(rhs: F, times: &[f64], y0: State, dt: f64) -> Result<Vec<State>>
where
    F: Fn(f64, &State) -> Result<State>,
{
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("step size must be positive, got {dt}")));
    }
    check_grid(times)?;
    let mut out = vec![y0.clone()];
    let mut y = y0;
    for w in times.windows(2) {
        let span = w[1] - w[0];
        let steps = ((span.abs() / dt).ceil() as usize).max(1);
        let h = span / steps as f64;
        for k in 0..steps {
            y = rk4_step(&rhs, w[0] + k as f64 * h, &y, h)?;
        }
        check_finite(&y)?;
        out.push(y.clone());
    }
    Ok(out)
}

fn check_grid(times: &[f64]) -> Result<()> {
    if times.is_empty() || times.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidArgument("time grid must be nonempty and finite".into()));
    }
    let up = times.windows(2).all(|w| w[1] > w[0]);
    let down = times.windows(2).all(|w| w[1] < w[0]);
    if times.len() > 1 && !(up || down) {
        return Err(Error::InvalidArgument("time grid must be strictly monotone".into()));
    }
    Ok(())
}

/// Adaptive RK4 through `times`. The local error of each step is estimated
/// by comparing one full step with two half steps; steps whose estimate
/// exceeds `ctl.tol` are rejected and retried with a smaller step. Accepted
/// steps keep the Richardson-extrapolated value.
pub fn integrate_adaptive<F>(rhs: F, times: &[f64], y0: State, ctl: StepControl) -> Result<(Vec<State>, StepStats)>
where
    F: Fn(f64, &State) -> Result<State>,
{
    check_grid(times)?;
    let mut stats = StepStats::default();
    let mut out = vec![y0.clone()];
    let mut y = y0;
    let mut h_abs = ctl.h_initial.min(ctl.h_max);
    for w in times.windows(2) {
        let (mut t, end) = (w[0], w[1]);
        let dir = (end - t).signum();
        while (end - t) * dir > 0.0 {
            let remaining = (end - t).abs();
            let h_try = h_abs.min(remaining);
            let h = dir * h_try;
            let full = rk4_step(&rhs, t, &y, h)?;
            let mid = rk4_step(&rhs, t, &y, 0.5 * h)?;
            let half = rk4_step(&rhs, t + 0.5 * h, &mid, 0.5 * h)?;
            let err = max_diff(&half, &full) / 15.0;
            let scale = max_abs(&y).max(1.0);
            if !err.is_finite() {
                return Err(Error::NonFinite);
            }
            let factor = if err == 0.0 { 4.0 } else { (0.9 * (ctl.tol * scale / err).powf(0.2)).clamp(0.1, 4.0) };
            if err <= ctl.tol * scale {
                y = half.iter().zip(&full).map(|(a, b)| a + (a - b) / C64::new(15.0, 0.0)).collect();
                t = if h_try == remaining { end } else { t + h };
                stats.accepted += 1;
                // a step clipped to hit the grid says nothing about the next one
                if h_try == h_abs {
                    h_abs = (h_abs * factor).min(ctl.h_max);
                }
            } else {
                stats.rejected += 1;
                h_abs = h_try * factor;
                if h_abs < ctl.h_min {
                    return Err(Error::StepRejected { t, error: err });
                }
            }
        }
        check_finite(&y)?;
        out.push(y.clone());
    }
    Ok((out, stats))
}
