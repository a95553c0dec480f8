//! Scalar delay differential equations of the low-pass Ikeda family.
//!
//! The integrated system is
//!
//! ```text
//! T_R · dx/dt = f( Σ_i g_i·μ·x(t − τ_i) + ρ·u(t) + Φ0 ) − x(t)
//! ```
//!
//! with one or more feedback taps `(τ_i, g_i)`. An empty tap list is the
//! open-loop (extreme learning machine) configuration.
//!
//! Integration runs on a fixed grid. Tap delays are snapped to integer
//! multiples of the step so that delayed samples land on stored grid points;
//! the RK4 half-step stages read the history through a cubic Hermite
//! interpolant built from the stored slopes (or linearly, on request).

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// States beyond this magnitude are treated as a blow-up.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

const STEADY_STATE_TOL: f64 = 1e-12;
const STEADY_STATE_MAX_ITER: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Nonlinearity {
    /// `sin²(a)`, the Mach-Zehnder intensity transfer function.
    #[default]
    SinSquared,
    Sine,
    Tanh,
    Linear,
}

impl Nonlinearity {
    #[inline]
    pub fn apply(self, a: f64) -> f64 {
        match self {
            Nonlinearity::SinSquared => {
                let s = a.sin();
                s * s
            }
            Nonlinearity::Sine => a.sin(),
            Nonlinearity::Tanh => a.tanh(),
            Nonlinearity::Linear => a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackTap {
    /// Delay in seconds.
    pub delay: f64,
    pub gain: f64,
}

impl FeedbackTap {
    pub fn new(delay: f64, gain: f64) -> Self {
        Self { delay, gain }
    }
}

/// Dynamical parameters of the delay system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Low-pass response time `T_R` in seconds.
    pub response_time: f64,
    /// Feedback taps; the first one is the principal delay loop.
    pub taps: Vec<FeedbackTap>,
    pub mu: f64,
    pub rho: f64,
    pub phi0: f64,
    pub nonlinearity: Nonlinearity,
}

impl SystemParams {
    pub fn new(
        response_time: f64,
        taps: Vec<FeedbackTap>,
        mu: f64,
        rho: f64,
        phi0: f64,
        nonlinearity: Nonlinearity,
    ) -> Result<Self> {
        let p = Self {
            response_time,
            taps,
            mu,
            rho,
            phi0,
            nonlinearity,
        };
        p.validate()?;
        Ok(p)
    }

    /// Single-loop system with principal delay `tau_d` and feedback gain `beta`.
    pub fn single_loop(
        response_time: f64,
        tau_d: f64,
        beta: f64,
        rho: f64,
        phi0: f64,
        nonlinearity: Nonlinearity,
    ) -> Result<Self> {
        Self::new(
            response_time,
            vec![FeedbackTap::new(tau_d, beta)],
            1.0,
            rho,
            phi0,
            nonlinearity,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.response_time.is_finite() && self.response_time > 0.0) {
            return Err(Error::param(format!(
                "response time must be positive and finite, got {}",
                self.response_time
            )));
        }
        for (i, tap) in self.taps.iter().enumerate() {
            if !(tap.delay.is_finite() && tap.delay > 0.0) {
                return Err(Error::param(format!(
                    "tap {i}: delay must be positive and finite, got {}",
                    tap.delay
                )));
            }
            if !tap.gain.is_finite() {
                return Err(Error::param(format!("tap {i}: gain is not finite")));
            }
        }
        for (name, v) in [("mu", self.mu), ("rho", self.rho), ("phi0", self.phi0)] {
            if !v.is_finite() {
                return Err(Error::param(format!("{name} is not finite")));
            }
        }
        Ok(())
    }

    /// Gain of the principal tap, zero in open loop.
    pub fn beta(&self) -> f64 {
        self.taps.first().map_or(0.0, |t| t.gain)
    }

    /// Sum of all tap gains; the effective gain seen by a constant state.
    pub fn loop_gain(&self) -> f64 {
        self.taps.iter().map(|t| t.gain).sum()
    }

    pub fn max_delay(&self) -> f64 {
        self.taps.iter().map(|t| t.delay).fold(0.0, f64::max)
    }

    pub fn is_open_loop(&self) -> bool {
        self.taps.is_empty()
    }

    /// Argument of the nonlinearity for the given delayed states and drive.
    #[inline]
    pub(crate) fn argument(&self, delayed: &[f64], u: f64) -> f64 {
        let fb: f64 = self
            .taps
            .iter()
            .zip(delayed)
            .map(|(tap, x)| tap.gain * x)
            .sum();
        self.mu * fb + self.rho * u + self.phi0
    }
}

/// Impulse response of the first-order low-pass, `e^{-t/T_R} / T_R` for `t ≥ 0`.
pub fn impulse_response(t: f64, response_time: f64) -> Result<f64> {
    if !(response_time.is_finite() && response_time > 0.0) {
        return Err(Error::param(format!(
            "response time must be positive and finite, got {response_time}"
        )));
    }
    if t < 0.0 {
        return Ok(0.0);
    }
    Ok((-t / response_time).exp() / response_time)
}

/// Right-hand side scaled by the response time, i.e. `T_R · dx/dt`.
pub fn rhs(x: f64, delayed: &[f64], u: f64, p: &SystemParams) -> Result<f64> {
    if delayed.len() != p.taps.len() {
        return Err(Error::contract(format!(
            "expected {} delayed states (one per tap), got {}",
            p.taps.len(),
            delayed.len()
        )));
    }
    Ok(rhs_unchecked(x, delayed, u, p))
}

#[inline]
fn rhs_unchecked(x: f64, delayed: &[f64], u: f64, p: &SystemParams) -> f64 {
    p.nonlinearity.apply(p.argument(delayed, u)) - x
}

/// Fixed point of `x ← f(Σg·μ·x + ρ·u + Φ0)` by plain iteration.
pub fn steady_state(p: &SystemParams, u_const: f64) -> Result<f64> {
    let gain = p.mu * p.loop_gain();
    let offset = p.rho * u_const + p.phi0;
    let map = |x: f64| p.nonlinearity.apply(gain * x + offset);

    let mut x = map(0.0);
    for _ in 0..STEADY_STATE_MAX_ITER {
        let next = map(x);
        if !next.is_finite() || next.abs() > DIVERGENCE_LIMIT {
            break;
        }
        if (next - x).abs() <= STEADY_STATE_TOL && (map(next) - next).abs() <= STEADY_STATE_TOL {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::Regime(format!(
        "fixed-point iteration did not converge within {STEADY_STATE_MAX_ITER} iterations \
         (loop gain {gain}, offset {offset})"
    )))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Euler,
    #[default]
    Rk4,
}

/// How RK4 half-step stages read delayed states between stored grid points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DelayInterpolation {
    Linear,
    /// Cubic Hermite from stored sample slopes; keeps RK4 fourth order.
    #[default]
    Hermite,
}

/// Drive signal as seen by a fixed-step integrator.
pub trait Drive {
    /// Value applied over the step `[t_start, t_end)`.
    fn hold_value(&self, t_start: f64, t_end: f64) -> f64;
}

/// Piecewise-constant (sample-and-hold) signal. Zero outside its support.
#[derive(Debug, Clone, PartialEq)]
pub struct HoldSignal {
    pub t0: f64,
    pub slot: f64,
    pub values: Vec<f64>,
}

impl HoldSignal {
    pub fn new(t0: f64, slot: f64, values: Vec<f64>) -> Result<Self> {
        if !(slot.is_finite() && slot > 0.0) {
            return Err(Error::param(format!("hold slot must be positive, got {slot}")));
        }
        Ok(Self { t0, slot, values })
    }

    /// A constant level held over `[0, duration)`.
    pub fn constant(value: f64, duration: f64) -> Self {
        Self {
            t0: 0.0,
            slot: duration.max(f64::MIN_POSITIVE),
            values: vec![value],
        }
    }

    pub fn duration(&self) -> f64 {
        self.slot * self.values.len() as f64
    }

    pub fn value_at(&self, t: f64) -> f64 {
        let pos = (t - self.t0) / self.slot;
        if pos < 0.0 {
            return 0.0;
        }
        self.values.get(pos as usize).copied().unwrap_or(0.0)
    }
}

impl Drive for HoldSignal {
    #[inline]
    fn hold_value(&self, t_start: f64, t_end: f64) -> f64 {
        self.value_at(0.5 * (t_start + t_end))
    }
}

/// Uniformly sampled state trajectory starting at `t0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t0: f64,
    pub step: f64,
    pub values: Vec<f64>,
}

impl Trajectory {
    pub fn new(t0: f64, step: f64, values: Vec<f64>) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::param(format!("trajectory step must be positive, got {step}")));
        }
        if values.is_empty() {
            return Err(Error::contract("trajectory must hold at least one sample"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::contract(format!("trajectory sample {i} is not finite")));
        }
        Ok(Self { t0, step, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.step
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.values.len() - 1)
    }

    /// Linear interpolation; exact sample when `t` falls on the grid.
    /// Returns `None` outside `[t0, t_end]`.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        let pos = (t - self.t0) / self.step;
        let last = (self.values.len() - 1) as f64;
        let nearest = pos.round();
        if (pos - nearest).abs() <= 1e-9 * pos.abs().max(1.0) {
            if nearest < 0.0 || nearest > last {
                return None;
            }
            return Some(self.values[nearest as usize]);
        }
        if pos < 0.0 || pos > last {
            return None;
        }
        let i = pos.floor() as usize;
        let frac = pos - i as f64;
        Some(self.values[i] + frac * (self.values[i + 1] - self.values[i]))
    }
}

/// Result of snapping a tap delay to the integration grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelaySnap {
    pub requested: f64,
    pub snapped: f64,
    pub lag_steps: usize,
}

impl DelaySnap {
    pub fn relative_shift(&self) -> f64 {
        (self.snapped - self.requested).abs() / self.requested
    }
}

/// Snap each tap delay to the nearest integer multiple of `step` (at least one step).
pub fn snap_delays(taps: &[FeedbackTap], step: f64) -> Vec<DelaySnap> {
    taps.iter()
        .map(|tap| {
            let lag = (tap.delay / step).round().max(1.0) as usize;
            DelaySnap {
                requested: tap.delay,
                snapped: lag as f64 * step,
                lag_steps: lag,
            }
        })
        .collect()
}

/// Default integration step: `min(T_R, δτ) / 16`, shrunk so it divides `δτ` exactly.
pub fn default_step(response_time: f64, node_duration: f64) -> f64 {
    let target = response_time.min(node_duration) / 16.0;
    let per_node = (node_duration / target).ceil().max(1.0);
    node_duration / per_node
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum InitialHistory {
    /// Constant at `steady_state(p, 0)`, or zero when no fixed point is found.
    #[default]
    SteadyState,
    Constant(f64),
    /// Samples on the step grid, oldest first, the last one being `x(0)`.
    Samples(Vec<f64>),
}

/// Circular store of the most recent samples together with the slopes at
/// both ends of each step interval.
#[derive(Debug, Clone)]
pub struct HistoryBuffer {
    step: f64,
    x: Vec<f64>,
    /// Slope dx/dt at the left end of interval `[j, j+1]`.
    slope_left: Vec<f64>,
    /// Slope dx/dt at the right end of interval `[j, j+1]`.
    slope_right: Vec<f64>,
    /// Absolute index of the newest sample.
    head: i64,
}

impl HistoryBuffer {
    /// Buffer spanning `max_lag + 1` steps, filled from the initial history so
    /// that the newest sample is `x(0)`.
    pub fn new(step: f64, max_lag: usize, initial: &InitialHistory, fallback: f64) -> Result<Self> {
        let cap = max_lag + 2;
        let mut buf = Self {
            step,
            x: vec![0.0; cap],
            slope_left: vec![0.0; cap],
            slope_right: vec![0.0; cap],
            head: 0,
        };
        match initial {
            InitialHistory::SteadyState => buf.fill_constant(fallback),
            InitialHistory::Constant(c) => buf.fill_constant(*c),
            InitialHistory::Samples(s) => {
                if s.len() < max_lag + 1 {
                    return Err(Error::Length {
                        needed: max_lag + 1,
                        available: s.len(),
                    });
                }
                let tail = &s[s.len() - (max_lag + 1)..];
                for (k, &v) in tail.iter().enumerate() {
                    let idx = k as i64 - max_lag as i64;
                    let slot = buf.slot(idx);
                    buf.x[slot] = v;
                }
                // finite-difference slopes for the stored intervals
                for k in 0..max_lag {
                    let idx = k as i64 - max_lag as i64;
                    let slope = (tail[k + 1] - tail[k]) / step;
                    let slot = buf.slot(idx);
                    buf.slope_left[slot] = slope;
                    buf.slope_right[slot] = slope;
                }
            }
        }
        Ok(buf)
    }

    fn fill_constant(&mut self, c: f64) {
        self.x.iter_mut().for_each(|v| *v = c);
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn capacity(&self) -> usize {
        self.x.len()
    }

    #[inline]
    fn slot(&self, idx: i64) -> usize {
        idx.rem_euclid(self.x.len() as i64) as usize
    }

    #[inline]
    fn sample(&self, idx: i64) -> f64 {
        debug_assert!(idx <= self.head && self.head - idx < self.x.len() as i64);
        self.x[self.slot(idx)]
    }

    /// Value half a step after sample `idx`.
    #[inline]
    fn midpoint(&self, idx: i64, interp: DelayInterpolation) -> f64 {
        let a = self.x[self.slot(idx)];
        let b = self.x[self.slot(idx + 1)];
        match interp {
            DelayInterpolation::Linear => 0.5 * (a + b),
            DelayInterpolation::Hermite => {
                let s = self.slot(idx);
                0.5 * (a + b) + self.step * (self.slope_left[s] - self.slope_right[s]) / 8.0
            }
        }
    }

    #[inline]
    fn push(&mut self, x_next: f64, slope_left: f64, slope_right: f64) {
        let s = self.slot(self.head);
        self.slope_left[s] = slope_left;
        self.slope_right[s] = slope_right;
        self.head += 1;
        let s = self.slot(self.head);
        self.x[s] = x_next;
    }
}

/// Fixed-step integrator settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integrator {
    pub scheme: Scheme,
    pub step: f64,
    pub interpolation: DelayInterpolation,
}

impl Integrator {
    pub fn new(scheme: Scheme, step: f64) -> Self {
        Self {
            scheme,
            step,
            interpolation: DelayInterpolation::default(),
        }
    }

    pub fn with_interpolation(mut self, interpolation: DelayInterpolation) -> Self {
        self.interpolation = interpolation;
        self
    }

    fn check(&self, p: &SystemParams) -> Result<()> {
        p.validate()?;
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::param(format!("step must be positive, got {}", self.step)));
        }
        if self.step > p.response_time / 2.0 {
            return Err(Error::param(format!(
                "step {} is coarser than T_R/2 = {}",
                self.step,
                p.response_time / 2.0
            )));
        }
        if self.step > p.response_time / 8.0 {
            warn!(
                "step {} exceeds T_R/8; accuracy may suffer",
                self.step
            );
        }
        Ok(())
    }

    /// Integrate over `n_steps` steps from `t = 0`, handing every sample
    /// (including `x(0)`) to `sink` as `(index, value)`.
    pub fn run<D, F>(
        &self,
        p: &SystemParams,
        drive: &D,
        n_steps: usize,
        initial: &InitialHistory,
        mut sink: F,
    ) -> Result<()>
    where
        D: Drive + ?Sized,
        F: FnMut(usize, f64),
    {
        self.check(p)?;
        let h = self.step;
        let snaps = snap_delays(&p.taps, h);
        for s in &snaps {
            if s.relative_shift() > 1e-9 {
                debug!(
                    "tap delay {} snapped to {} ({} steps)",
                    s.requested, s.snapped, s.lag_steps
                );
            }
        }
        let lags: Vec<i64> = snaps.iter().map(|s| s.lag_steps as i64).collect();
        let max_lag = lags.iter().copied().max().unwrap_or(0) as usize;

        let fallback = match initial {
            InitialHistory::SteadyState => steady_state(p, 0.0).unwrap_or(0.0),
            _ => 0.0,
        };
        let mut hist = HistoryBuffer::new(h, max_lag, initial, fallback)?;
        let tr = p.response_time;
        let mut delayed = vec![0.0; lags.len()];

        let mut x = hist.sample(0);
        sink(0, x);

        for i in 0..n_steps {
            let idx = i as i64;
            let t = i as f64 * h;
            let u = drive.hold_value(t, t + h);

            for (d, &lag) in delayed.iter_mut().zip(&lags) {
                *d = hist.sample(idx - lag);
            }
            let k1 = rhs_unchecked(x, &delayed, u, p) / tr;

            let (x_next, slope_right) = match self.scheme {
                Scheme::Euler => (x + h * k1, k1),
                Scheme::Rk4 => {
                    for (d, &lag) in delayed.iter_mut().zip(&lags) {
                        *d = hist.midpoint(idx - lag, self.interpolation);
                    }
                    let k2 = rhs_unchecked(x + 0.5 * h * k1, &delayed, u, p) / tr;
                    let k3 = rhs_unchecked(x + 0.5 * h * k2, &delayed, u, p) / tr;
                    for (d, &lag) in delayed.iter_mut().zip(&lags) {
                        *d = hist.sample(idx + 1 - lag);
                    }
                    let k4 = rhs_unchecked(x + h * k3, &delayed, u, p) / tr;
                    let x_next = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                    // slope at the right end of this interval, under this interval's drive
                    (x_next, rhs_unchecked(x_next, &delayed, u, p) / tr)
                }
            };

            if !x_next.is_finite() || x_next.abs() > DIVERGENCE_LIMIT {
                return Err(Error::Divergence {
                    time: t + h,
                    value: x_next,
                });
            }
            hist.push(x_next, k1, slope_right);
            x = x_next;
            sink(i + 1, x);
        }
        Ok(())
    }

    pub fn integrate<D: Drive + ?Sized>(
        &self,
        p: &SystemParams,
        drive: &D,
        duration: f64,
        initial: &InitialHistory,
    ) -> Result<Trajectory> {
        let n_steps = steps_for(duration, self.step)?;
        let mut values = Vec::with_capacity(n_steps + 1);
        self.run(p, drive, n_steps, initial, |_, x| values.push(x))?;
        Trajectory::new(0.0, self.step, values)
    }
}

fn steps_for(duration: f64, step: f64) -> Result<usize> {
    if !(duration.is_finite() && duration >= 0.0) {
        return Err(Error::param(format!("duration must be nonnegative, got {duration}")));
    }
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::param(format!("step must be positive, got {step}")));
    }
    Ok((duration / step).round() as usize)
}

/// Integrate `p` under `drive` over `[0, duration]`.
pub fn integrate<D: Drive + ?Sized>(
    p: &SystemParams,
    drive: &D,
    step: f64,
    duration: f64,
    initial: &InitialHistory,
    scheme: Scheme,
) -> Result<Trajectory> {
    Integrator::new(scheme, step).integrate(p, drive, duration, initial)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{E, FRAC_PI_2, PI};

    fn params(beta: f64, rho: f64, phi0: f64, nl: Nonlinearity) -> SystemParams {
        SystemParams::single_loop(1.0, 10.0, beta, rho, phi0, nl).unwrap()
    }

    #[test]
    fn impulse_response_values() {
        assert_abs_diff_eq!(impulse_response(0.0, 2.0).unwrap(), 0.5);
        assert_eq!(impulse_response(-1.0, 1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(impulse_response(1.0, 1.0).unwrap(), 1.0 / E, epsilon = 1e-15);
        assert!(impulse_response(1.0, 0.0).is_err());
        assert!(impulse_response(1.0, f64::NAN).is_err());
    }

    #[test]
    fn impulse_response_normalized() {
        let tr = 0.7;
        let n = 400_000;
        let dt = 40.0 * tr / n as f64;
        let mut sum = 0.0;
        for i in 0..=n {
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            sum += w * impulse_response(i as f64 * dt, tr).unwrap();
        }
        assert!((sum * dt - 1.0).abs() <= 1e-6, "{}", sum * dt);
    }

    #[test]
    fn rhs_examples() {
        let p = params(1.0, 1.0, 0.0, Nonlinearity::SinSquared);
        assert_eq!(rhs(0.0, &[0.0], 0.0, &p).unwrap(), 0.0);
        let p = params(1.0, 1.0, FRAC_PI_2, Nonlinearity::SinSquared);
        assert_abs_diff_eq!(rhs(0.0, &[0.0], 0.0, &p).unwrap(), 1.0, epsilon = 1e-15);
        let p = params(1.0, 1.0, 0.0, Nonlinearity::Linear);
        assert_abs_diff_eq!(rhs(0.3, &[0.0], 0.0, &p).unwrap(), -0.3);
        assert!(matches!(rhs(0.0, &[0.0, 1.0], 0.0, &p), Err(Error::Contract(_))));
    }

    #[test]
    fn free_relaxation_decays_with_response_time() {
        let p = params(0.0, 0.0, 0.0, Nonlinearity::SinSquared);
        let drive = HoldSignal::constant(0.0, 10.0);
        for scheme in [Scheme::Euler, Scheme::Rk4] {
            let traj = integrate(&p, &drive, 1.0 / 128.0, 5.0, &InitialHistory::Constant(0.5), scheme)
                .unwrap();
            assert_eq!(traj.len(), 5 * 128 + 1);
            assert!(traj.values.windows(2).all(|w| w[1] < w[0]));
            let at_tr = traj.value_at(1.0).unwrap();
            assert!((at_tr - 0.5 / E).abs() <= 1e-3, "{scheme:?}: {at_tr}");
        }
    }

    #[test]
    fn forced_linear_lowpass_settles_to_drive() {
        let p = params(0.0, 1.0, 0.0, Nonlinearity::Linear);
        let drive = HoldSignal::constant(0.7, 100.0);
        let traj = integrate(&p, &drive, 1.0 / 16.0, 20.0, &InitialHistory::Constant(0.0), Scheme::Rk4)
            .unwrap();
        for i in 0..traj.len() {
            if traj.time(i) >= 5.0 * 1.0 + 2.0 {
                assert!((traj.values[i] - 0.7).abs() <= 1e-3);
            }
        }
        assert!((traj.value_at(20.0).unwrap() - 0.7).abs() <= 1e-8);
    }

    #[test]
    fn coarse_step_rejected() {
        let p = params(0.5, 0.0, 0.0, Nonlinearity::SinSquared);
        let drive = HoldSignal::constant(0.0, 1.0);
        let err = integrate(&p, &drive, 0.6, 10.0, &InitialHistory::SteadyState, Scheme::Euler);
        assert!(matches!(err, Err(Error::Parameter(_))));
    }

    #[test]
    fn divergence_reports_time() {
        // unstable linear loop: gain 3 doubles every round trip
        let p = SystemParams::single_loop(1.0, 2.0, 3.0, 0.0, 0.0, Nonlinearity::Linear).unwrap();
        let drive = HoldSignal::constant(0.0, 1.0);
        let err = integrate(&p, &drive, 0.1, 1e4, &InitialHistory::Constant(1.0), Scheme::Rk4)
            .unwrap_err();
        match err {
            Error::Divergence { time, .. } => assert!(time > 0.0 && time < 1e4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn steady_state_examples() {
        let p = params(0.0, 0.0, 0.0, Nonlinearity::SinSquared);
        assert_eq!(steady_state(&p, 0.0).unwrap(), 0.0);

        let p = SystemParams::single_loop(1.0, 1.0, 0.5, 0.0, 0.2, Nonlinearity::Linear).unwrap();
        assert_abs_diff_eq!(steady_state(&p, 0.0).unwrap(), 0.4, epsilon = 1e-11);

        // damped brute-force iteration as the oracle
        let p = SystemParams::single_loop(1.0, 1.0, 0.2, 0.0, 0.1 * PI, Nonlinearity::SinSquared)
            .unwrap();
        let mut x = 0.0_f64;
        for _ in 0..1_000_000 {
            x = 0.5 * x + 0.5 * (0.2 * x + 0.1 * PI).sin().powi(2);
        }
        let got = steady_state(&p, 0.0).unwrap();
        assert!((got - x).abs() <= 1e-10);
        assert!((got - (0.2 * got + 0.1 * PI).sin().powi(2)).abs() <= 1e-12);
    }

    #[test]
    fn steady_state_fails_in_oscillatory_regime() {
        // x ← -2x + 1 flips sign every iteration and grows
        let p = SystemParams::single_loop(1.0, 1.0, -2.0, 0.0, 1.0, Nonlinearity::Linear).unwrap();
        assert!(matches!(steady_state(&p, 0.0), Err(Error::Regime(_))));
    }

    #[test]
    fn snapping_reports_shift() {
        let snaps = snap_delays(&[FeedbackTap::new(1.03, 1.0), FeedbackTap::new(0.001, 1.0)], 0.1);
        assert_eq!(snaps[0].lag_steps, 10);
        assert_abs_diff_eq!(snaps[0].snapped, 1.0, epsilon = 1e-12);
        assert_eq!(snaps[1].lag_steps, 1);
    }

    #[test]
    fn default_step_divides_node_duration() {
        let step = default_step(1.0, 0.2);
        assert!(step <= 0.2 / 16.0 + 1e-15);
        let ratio = 0.2 / step;
        assert_abs_diff_eq!(ratio, ratio.round(), epsilon = 1e-9);
        let step = default_step(1.0, 100.0);
        assert!(step <= 1.0 / 16.0);
        assert_abs_diff_eq!(100.0 / step, (100.0 / step).round(), epsilon = 1e-9);
    }

    #[test]
    fn hold_signal_is_zero_outside_support() {
        let s = HoldSignal::new(1.0, 0.5, vec![1.0, 2.0]).unwrap();
        assert_eq!(s.value_at(0.9), 0.0);
        assert_eq!(s.value_at(1.2), 1.0);
        assert_eq!(s.value_at(1.7), 2.0);
        assert_eq!(s.value_at(2.1), 0.0);
    }

    #[test]
    fn trajectory_interpolates_linearly() {
        let t = Trajectory::new(1.0, 0.5, vec![0.0, 1.0, 3.0]).unwrap();
        assert_eq!(t.value_at(1.5), Some(1.0));
        assert_eq!(t.value_at(1.75), Some(2.0));
        assert_eq!(t.value_at(0.9), None);
        assert_eq!(t.value_at(2.1), None);
        assert!(Trajectory::new(0.0, 1.0, vec![f64::NAN]).is_err());
    }

    #[test]
    fn sample_history_is_used() {
        // open loop with x(0) taken from the last history sample
        let p = SystemParams::single_loop(1.0, 0.5, 0.0, 0.0, 0.0, Nonlinearity::Linear).unwrap();
        let hist = InitialHistory::Samples(vec![9.0; 4].into_iter().chain([2.0]).collect());
        let drive = HoldSignal::constant(0.0, 1.0);
        let traj = integrate(&p, &drive, 0.125, 0.125, &hist, Scheme::Euler).unwrap();
        assert_eq!(traj.values[0], 2.0);
        let short = InitialHistory::Samples(vec![1.0; 2]);
        assert!(matches!(
            integrate(&p, &drive, 0.125, 1.0, &short, Scheme::Euler),
            Err(Error::Length { .. })
        ));
    }
}
