//! Full delay-reservoir forward pass: masking, time multiplexing, the
//! dynamical engine, and de-multiplexing into a [`StateMatrix`].

use log::warn;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dde::{
    default_step, steady_state, FeedbackTap, HoldSignal, InitialHistory, Integrator, Scheme,
    SystemParams, Trajectory,
};
use crate::error::{Error, Result};
use crate::state::StateMatrix;
use crate::virtual_net::{DelayMap, NodeGrid, Readout};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MaskKind {
    /// Two-valued mask, `{−1, +1}` when bipolar, `{0, 1}` otherwise.
    Binary {
        #[serde(default = "default_true")]
        bipolar: bool,
    },
    /// `levels` equispaced values in `[−1, 1]`.
    MultiLevel { levels: u8 },
    /// Uniform on `[−1, 1]`.
    UniformRandom,
    /// Sum of two sinusoids at `p` and `q` cycles per delay, passed through
    /// the modulator transfer function; entries lie in `[0, 1]`.
    TwoToneSin { p: u32, q: u32 },
}

fn default_true() -> bool {
    true
}

impl Default for MaskKind {
    fn default() -> Self {
        MaskKind::Binary { bipolar: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InputMask {
    /// `N × M` input weights.
    pub weights: DMatrix<f64>,
    pub kind: MaskKind,
    pub seed: u64,
}

impl InputMask {
    pub fn nodes(&self) -> usize {
        self.weights.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn scaled(&self, factor: f64) -> InputMask {
        InputMask {
            weights: &self.weights * factor,
            ..self.clone()
        }
    }
}

/// Two-tone analog mask value at `phase = t / τ_D`.
pub fn two_tone_sin(p: u32, q: u32, phase: f64) -> f64 {
    use std::f64::consts::{FRAC_PI_4, TAU};
    let arg = -FRAC_PI_4 * (TAU * p as f64 * phase).cos() - FRAC_PI_4 * (TAU * q as f64 * phase).cos();
    0.5 * (1.0 + arg.sin())
}

/// Build an `n × m` mask. Deterministic in `(kind, seed, n, m)`.
///
/// Two-tone masks are sampled at node centres `(l + ½)/n` of one period.
pub fn make_mask(kind: MaskKind, seed: u64, n: usize, m: usize) -> Result<InputMask> {
    if n == 0 || m == 0 {
        return Err(Error::param(format!("mask dimensions must be positive, got {n}×{m}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights = match kind {
        MaskKind::Binary { bipolar } => {
            let low = if bipolar { -1.0 } else { 0.0 };
            DMatrix::from_fn(n, m, |_, _| if rng.random::<bool>() { 1.0 } else { low })
        }
        MaskKind::MultiLevel { levels } => {
            if !(2..=6).contains(&levels) {
                return Err(Error::param(format!(
                    "multi-level masks take 2 to 6 levels, got {levels}"
                )));
            }
            let top = (levels - 1) as f64;
            DMatrix::from_fn(n, m, |_, _| {
                let i = rng.random_range(0..levels) as f64;
                -1.0 + 2.0 * i / top
            })
        }
        MaskKind::UniformRandom => DMatrix::from_fn(n, m, |_, _| rng.random_range(-1.0..=1.0)),
        MaskKind::TwoToneSin { p, q } => {
            if m != 1 {
                return Err(Error::param("two-tone masks are defined for scalar input only"));
            }
            if p == q {
                return Err(Error::param(format!("two-tone mask needs p ≠ q, got {p}")));
            }
            DMatrix::from_fn(n, 1, |l, _| two_tone_sin(p, q, (l as f64 + 0.5) / n as f64))
        }
    };
    Ok(InputMask { weights, kind, seed })
}

/// Sample-and-hold drive: slot `(n, l)` carries `(W·u(n))_l` for one `δτ`.
pub fn multiplex(u: &DMatrix<f64>, mask: &InputMask, grid: &NodeGrid) -> Result<HoldSignal> {
    if mask.nodes() != grid.n_nodes {
        return Err(Error::contract(format!(
            "mask has {} rows, grid has {} nodes",
            mask.nodes(),
            grid.n_nodes
        )));
    }
    if mask.inputs() != u.nrows() {
        return Err(Error::contract(format!(
            "mask takes {} inputs, data has {}",
            mask.inputs(),
            u.nrows()
        )));
    }
    let masked = &mask.weights * u;
    HoldSignal::new(0.0, grid.node_duration, masked.as_slice().to_vec())
}

/// Second feedback tap half a relaxation-oscillation period behind the first,
/// the gain split evenly between both.
pub fn double_delay_config(tau_d1: f64, nu_ro: f64, beta: f64) -> Result<Vec<FeedbackTap>> {
    if !(tau_d1.is_finite() && tau_d1 > 0.0) {
        return Err(Error::param(format!("first delay must be positive, got {tau_d1}")));
    }
    if nu_ro.is_nan() || nu_ro <= 0.0 {
        return Err(Error::param(format!(
            "relaxation-oscillation frequency must be positive, got {nu_ro}"
        )));
    }
    let tau_d2 = tau_d1 + 1.0 / (2.0 * nu_ro);
    if tau_d2 - tau_d1 <= 1e-12 * tau_d1 {
        warn!("double-delay taps coincide (ν_RO = {nu_ro}); the configuration is degenerate");
    }
    Ok(vec![
        FeedbackTap::new(tau_d1, 0.5 * beta),
        FeedbackTap::new(tau_d2, 0.5 * beta),
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    /// Numerical integration of the delay differential equation.
    #[serde(alias = "dde")]
    ContinuousDde,
    /// Instantaneous node map.
    #[default]
    #[serde(alias = "map")]
    DiscreteMap,
    /// Open loop: static nonlinear map of the masked input.
    Elm,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IntegrationSettings {
    pub scheme: Scheme,
    /// Defaults to `min(T_R, δτ)/16`, adjusted to divide `δτ`.
    pub step: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReservoirConfig {
    pub params: SystemParams,
    /// Node grid over one delay; `n_nodes` is the total `N` across sub-reservoirs.
    pub grid: NodeGrid,
    /// Mask with `N / edm_sublayers` rows.
    pub mask: InputMask,
    pub edm_sublayers: usize,
    pub readout_desync: f64,
    pub mode: Engine,
    /// Input steps dropped from the front of the state matrix.
    pub washout: usize,
    pub integration: IntegrationSettings,
    pub initial: InitialHistory,
}

/// Default washout: 100 input steps or ten delays, whichever is longer.
pub fn default_washout(grid: &NodeGrid, edm_sublayers: usize) -> usize {
    let period = (grid.n_nodes / edm_sublayers.max(1)) as f64 * grid.node_duration;
    let ten_delays = (10.0 * grid.delay() / period).ceil() as usize;
    ten_delays.max(100)
}

impl ReservoirConfig {
    /// Single-loop reservoir whose principal delay is the grid delay `(N + k)·δτ`.
    pub fn single_loop(
        params: SystemParams,
        grid: NodeGrid,
        mask: InputMask,
        mode: Engine,
    ) -> Result<Self> {
        let mut params = params;
        if mode == Engine::Elm {
            params.taps.clear();
        } else if params.taps.is_empty() {
            return Err(Error::config("closed-loop engines need a feedback tap"));
        } else {
            params.taps[0].delay = grid.delay();
        }
        let cfg = Self {
            washout: default_washout(&grid, 1),
            params,
            grid,
            mask,
            edm_sublayers: 1,
            readout_desync: 0.0,
            mode,
            integration: IntegrationSettings::default(),
            initial: InitialHistory::SteadyState,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_washout(mut self, washout: usize) -> Self {
        self.washout = washout;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.grid.validate()?;
        if self.mode == Engine::Elm && !self.params.taps.is_empty() {
            return Err(Error::config(
                "ELM mode runs open loop; remove the feedback taps",
            ));
        }
        if self.edm_sublayers == 0 || !self.grid.n_nodes.is_multiple_of(self.edm_sublayers) {
            return Err(Error::config(format!(
                "N = {} is not divisible into {} sub-reservoirs",
                self.grid.n_nodes, self.edm_sublayers
            )));
        }
        if self.mask.nodes() != self.nodes_per_step() {
            return Err(Error::config(format!(
                "mask has {} rows, expected {} nodes per input step",
                self.mask.nodes(),
                self.nodes_per_step()
            )));
        }
        if !(self.readout_desync.is_finite() && self.readout_desync > -1.0) {
            return Err(Error::config(format!(
                "readout desync must exceed −1, got {}",
                self.readout_desync
            )));
        }
        if self.mode == Engine::DiscreteMap {
            crate::virtual_net::tap_lags(&self.params, self.grid.node_duration)?;
        }
        if self.mode == Engine::ContinuousDde {
            let step = self.step();
            if step > self.params.response_time / 2.0 {
                return Err(Error::param(format!(
                    "integration step {step} is coarser than T_R/2"
                )));
            }
        }
        Ok(())
    }

    /// Nodes per input step, `N / N_L`.
    pub fn nodes_per_step(&self) -> usize {
        self.grid.n_nodes / self.edm_sublayers.max(1)
    }

    /// Duration of one input step, `τ_D / N_L` up to the desync.
    pub fn step_period(&self) -> f64 {
        self.nodes_per_step() as f64 * self.grid.node_duration
    }

    pub fn step(&self) -> f64 {
        self.integration
            .step
            .unwrap_or_else(|| default_step(self.params.response_time, self.grid.node_duration))
    }

    fn step_grid(&self) -> NodeGrid {
        NodeGrid {
            n_nodes: self.nodes_per_step(),
            ..self.grid
        }
    }

    fn readout(&self) -> Readout {
        Readout::from_grid(&self.step_grid(), self.readout_desync)
    }
}

/// Node states for every input step, washout included.
pub fn run_all(config: &ReservoirConfig, inputs: &DMatrix<f64>) -> Result<StateMatrix> {
    config.validate()?;
    let steps = inputs.ncols();
    if steps == 0 {
        return Err(Error::Length {
            needed: 1,
            available: 0,
        });
    }
    let signal = multiplex(inputs, &config.mask, &config.step_grid())?;
    let values = match config.mode {
        Engine::ContinuousDde => run_continuous(config, &signal, steps)?,
        Engine::DiscreteMap | Engine::Elm => run_map(config, &signal.values, steps)?,
    };
    StateMatrix::new(values, 0)
}

/// Forward pass with the configured washout removed.
pub fn run(config: &ReservoirConfig, inputs: &DMatrix<f64>) -> Result<StateMatrix> {
    if inputs.ncols() <= config.washout {
        return Err(Error::Length {
            needed: config.washout + 1,
            available: inputs.ncols(),
        });
    }
    run_all(config, inputs)?.discard(config.washout)
}

fn extra_slots(readout: &Readout) -> usize {
    if readout.desync > 0.0 {
        (readout.nodes as f64 * readout.desync).ceil() as usize + 1
    } else {
        0
    }
}

fn run_map(config: &ReservoirConfig, slots: &[f64], steps: usize) -> Result<DMatrix<f64>> {
    let readout = config.readout();
    let mut map = match &config.initial {
        InitialHistory::SteadyState => DelayMap::at_rest(&config.params, config.grid.node_duration)?,
        InitialHistory::Constant(c) => DelayMap::new(&config.params, config.grid.node_duration, *c)?,
        InitialHistory::Samples(h) => {
            DelayMap::with_history(&config.params, config.grid.node_duration, h)?
        }
    };
    let mut seq = map.run(slots);
    for _ in 0..extra_slots(&readout) {
        seq.push(map.step(0.0));
    }
    let mut out = DMatrix::zeros(readout.nodes, steps);
    let mut col = vec![0.0; readout.nodes];
    for n in 0..steps {
        readout.read_round_piecewise(&seq, n, &mut col)?;
        out.column_mut(n).copy_from_slice(&col);
    }
    Ok(out)
}

fn run_continuous(config: &ReservoirConfig, signal: &HoldSignal, steps: usize) -> Result<DMatrix<f64>> {
    let readout = config.readout();
    let h = config.step();
    let integrator = Integrator::new(config.integration.scheme, h);
    let period = readout.period;
    let round_end = |n: usize| readout.slot(n, readout.nodes - 1).1;
    let last_needed = readout.span(steps);
    let n_int = (last_needed / h).ceil() as usize + 1;

    let mut out = DMatrix::zeros(readout.nodes, steps);
    let mut col = vec![0.0; readout.nodes];
    let mut window = Trajectory {
        t0: 0.0,
        step: h,
        values: Vec::new(),
    };
    let mut window_start = 0usize;
    let mut next_round = 0usize;
    let mut failure: Option<Error> = None;

    let result = integrator.run(&config.params, signal, n_int, &config.initial, |i, x| {
        window.values.push(x);
        let t = i as f64 * h;
        while failure.is_none() && next_round < steps {
            let need = round_end(next_round);
            if t < need - 1e-9 * need.max(h) {
                break;
            }
            window.t0 = window_start as f64 * h;
            if let Err(e) = readout.read_round(&window, 0.0, next_round, &mut col) {
                failure = Some(e);
                break;
            }
            out.column_mut(next_round).copy_from_slice(&col);
            next_round += 1;
            // keep samples from the start of the next round on
            let keep_from = ((next_round as f64 * period / h).floor() as usize).saturating_sub(1);
            if keep_from > window_start {
                window.values.drain(..keep_from - window_start);
                window_start = keep_from;
            }
        }
    });
    match result {
        Err(Error::Divergence { time, value }) => {
            return Err(Error::RunDivergence {
                step: (time / period) as usize,
                source: Box::new(Error::Divergence { time, value }),
            })
        }
        Err(e) => return Err(e),
        Ok(()) => {}
    }
    if let Some(e) = failure {
        return Err(e);
    }
    if next_round < steps {
        return Err(Error::Length {
            needed: steps,
            available: next_round,
        });
    }
    Ok(out)
}

/// Operating point of the autonomous reservoir, used for initial conditions.
pub fn rest_state(params: &SystemParams) -> f64 {
    steady_state(params, 0.0).unwrap_or(0.0)
}
