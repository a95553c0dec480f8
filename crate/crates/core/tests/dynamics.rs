//! Integrator accuracy against an exact piecewise solution of the linear
//! delay equation, plus causality and determinism of the engines.

use delayrc::dde::{
    impulse_response, integrate, HoldSignal, InitialHistory, Nonlinearity, Scheme, SystemParams,
};
use delayrc::reservoir::{make_mask, run_all, Engine, MaskKind, ReservoirConfig};
use delayrc::virtual_net::NodeGrid;
use nalgebra::DMatrix;

/// `T ẋ = g·x(t − τ) − x` with `x ≡ 1` on `t ≤ 0`, solved delay by delay.
/// On `[kτ, (k+1)τ]` the solution is `A + Σ_j B_j s^j e^{−s/T}` with `s = t − kτ`.
struct Steps {
    gain: f64,
    response: f64,
    delay: f64,
    pieces: Vec<(f64, Vec<f64>)>,
}

impl Steps {
    fn new(gain: f64, response: f64, delay: f64, count: usize) -> Self {
        let mut pieces = vec![(gain, vec![1.0 - gain])];
        for _ in 1..count {
            let (a, b) = pieces.last().unwrap().clone();
            let start = eval(a, &b, delay, response);
            let mut next = vec![start - gain * a];
            next.extend(b.iter().enumerate().map(|(j, bj)| gain * bj / (response * (j + 1) as f64)));
            pieces.push((gain * a, next));
        }
        Self {
            gain,
            response,
            delay,
            pieces,
        }
    }

    fn at(&self, t: f64) -> f64 {
        let k = ((t / self.delay).floor() as usize).min(self.pieces.len() - 1);
        let (a, b) = &self.pieces[k];
        eval(*a, b, t - k as f64 * self.delay, self.response)
    }
}

fn eval(a: f64, b: &[f64], s: f64, response: f64) -> f64 {
    let poly: f64 = b.iter().rev().fold(0.0, |acc, bj| acc * s + bj);
    a + poly * (-s / response).exp()
}

fn max_error(scheme: Scheme, step: f64, exact: &Steps) -> f64 {
    let duration = exact.pieces.len() as f64 * exact.delay;
    let p = SystemParams::single_loop(
        exact.response,
        exact.delay,
        exact.gain,
        1.0,
        0.0,
        Nonlinearity::Linear,
    )
    .unwrap();
    let traj = integrate(
        &p,
        &HoldSignal::constant(0.0, duration),
        step,
        duration,
        &InitialHistory::Constant(1.0),
        scheme,
    )
    .unwrap();
    traj.values
        .iter()
        .enumerate()
        .map(|(i, x)| (x - exact.at(traj.time(i))).abs())
        .fold(0.0, f64::max)
}

#[test]
fn exact_solution_is_continuous_at_delay_boundaries() {
    let s = Steps::new(0.8, 1.0, 3.0, 4);
    for k in 1..4 {
        let t = k as f64 * 3.0;
        let (a, b) = &s.pieces[k - 1];
        assert!((eval(*a, b, 3.0, 1.0) - s.at(t)).abs() < 1e-14);
    }
    assert!((s.at(0.0) - 1.0).abs() < 1e-15);
}

#[test]
fn euler_converges_at_first_order() {
    let exact = Steps::new(0.8, 1.0, 3.0, 3);
    let coarse = max_error(Scheme::Euler, 1.0 / 16.0, &exact);
    let fine = max_error(Scheme::Euler, 1.0 / 32.0, &exact);
    let ratio = coarse / fine;
    assert!((1.8..=2.2).contains(&ratio), "ratio {ratio}, errors {coarse} {fine}");
}

#[test]
fn rk4_converges_at_fourth_order() {
    let exact = Steps::new(0.8, 1.0, 3.0, 3);
    let coarse = max_error(Scheme::Rk4, 1.0 / 4.0, &exact);
    let fine = max_error(Scheme::Rk4, 1.0 / 8.0, &exact);
    let ratio = coarse / fine;
    assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}, errors {coarse} {fine}");
    assert!(max_error(Scheme::Rk4, 1.0 / 16.0, &exact) < 1e-6);
}

#[test]
fn impulse_response_is_causal() {
    for t in [-1e-9, -1.0, -100.0] {
        assert_eq!(impulse_response(t, 0.3).unwrap(), 0.0);
    }
}

fn reservoir(mode: Engine) -> ReservoirConfig {
    let grid = NodeGrid::new(20, 0.2, 1).unwrap();
    let params =
        SystemParams::single_loop(0.05, grid.delay(), 0.8, 0.5, 0.3, Nonlinearity::SinSquared).unwrap();
    let mask = make_mask(MaskKind::default(), 9, 20, 1).unwrap();
    ReservoirConfig::single_loop(params, grid, mask, mode)
        .unwrap()
        .with_washout(0)
}

fn inputs(len: usize, seed: u64) -> DMatrix<f64> {
    let u = delayrc::tasks::narma10(len.max(200), seed).unwrap().inputs;
    u.columns(0, len).into_owned()
}

#[test]
fn future_inputs_do_not_change_past_states() {
    for mode in [Engine::ContinuousDde, Engine::DiscreteMap, Engine::Elm] {
        let cfg = reservoir(mode);
        let u = inputs(60, 1);
        let mut v = u.clone();
        for j in 30..60 {
            v[(0, j)] = 0.5 - v[(0, j)];
        }
        let a = run_all(&cfg, &u).unwrap();
        let b = run_all(&cfg, &v).unwrap();
        assert_eq!(a.values.columns(0, 30), b.values.columns(0, 30), "{mode:?}");
        assert_ne!(a.values.column(30), b.values.column(30), "{mode:?}");
    }
}

#[test]
fn engines_are_deterministic() {
    for mode in [Engine::ContinuousDde, Engine::DiscreteMap, Engine::Elm] {
        let cfg = reservoir(mode);
        let u = inputs(50, 2);
        assert_eq!(run_all(&cfg, &u).unwrap(), run_all(&cfg, &u).unwrap());
    }
}
