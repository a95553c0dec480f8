//! Virtual nodes of a delay system.
//!
//! Within one delay round the continuous state `x(t)` is cut into slots of
//! width `δτ`; slot `l` of round `n` is node `x_l(n)`. With a mask period of
//! `N·δτ` and a delay of `(N + k)·δτ`, node `l` of round `n` sees node `l − k`
//! of round `n − 1` through the feedback loop. When `δτ ≫ T_R` the system
//! settles within each slot and the nodes obey a plain delayed map, which is
//! what [`DelayMap`] iterates.

use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dde::{
    default_step, steady_state, HoldSignal, InitialHistory, Integrator, Scheme, SystemParams,
    Trajectory,
};
use crate::error::{Error, Result};
use crate::state::StateMatrix;

/// Where inside its slot a node value is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SamplingRule {
    #[default]
    EndOfSlot,
    SlotAverage,
    MidSlot,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeGrid {
    pub n_nodes: usize,
    /// Node duration `δτ` in seconds.
    pub node_duration: f64,
    /// Desynchronisation `k`: the delay is `(N + k)·δτ`.
    pub desync: i64,
    pub sampling: SamplingRule,
}

impl NodeGrid {
    pub fn new(n_nodes: usize, node_duration: f64, desync: i64) -> Result<Self> {
        let g = Self {
            n_nodes,
            node_duration,
            desync,
            sampling: SamplingRule::default(),
        };
        g.validate()?;
        Ok(g)
    }

    pub fn with_sampling(mut self, sampling: SamplingRule) -> Self {
        self.sampling = sampling;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_nodes == 0 {
            return Err(Error::param("node count must be at least 1"));
        }
        if !(self.node_duration.is_finite() && self.node_duration > 0.0) {
            return Err(Error::param(format!(
                "node duration must be positive, got {}",
                self.node_duration
            )));
        }
        if self.n_nodes as i64 + self.desync <= 0 {
            return Err(Error::param(format!(
                "delay (N + k)·δτ must be positive (N = {}, k = {})",
                self.n_nodes, self.desync
            )));
        }
        Ok(())
    }

    /// Mask period `τ_m = N·δτ`.
    pub fn mask_duration(&self) -> f64 {
        self.n_nodes as f64 * self.node_duration
    }

    /// Delay `τ_D = (N + k)·δτ`.
    pub fn delay(&self) -> f64 {
        (self.n_nodes as i64 + self.desync) as f64 * self.node_duration
    }

    /// Delay measured in node slots.
    pub fn delay_nodes(&self) -> usize {
        (self.n_nodes as i64 + self.desync) as usize
    }

    /// Start of node `l` (zero based) within a round.
    pub fn node_position(&self, l: usize) -> f64 {
        l as f64 * self.node_duration
    }
}

/// Slot layout used when reading nodes out of a signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Readout {
    pub nodes: usize,
    pub node_duration: f64,
    /// Time between the starts of consecutive rounds.
    pub period: f64,
    pub desync: f64,
    pub rule: SamplingRule,
}

impl Readout {
    pub fn from_grid(grid: &NodeGrid, readout_desync: f64) -> Self {
        Self {
            nodes: grid.n_nodes,
            node_duration: grid.node_duration,
            period: grid.mask_duration(),
            desync: readout_desync,
            rule: grid.sampling,
        }
    }

    fn readout_spacing(&self) -> f64 {
        (1.0 + self.desync) * self.node_duration
    }

    /// Slot `[a, b)` of node `l` in round `n` (both zero based), relative to the origin.
    pub fn slot(&self, n: usize, l: usize) -> (f64, f64) {
        let dr = self.readout_spacing();
        let base = n as f64 * self.period;
        (base + l as f64 * dr, base + (l + 1) as f64 * dr)
    }

    /// Latest time read for `n_steps` rounds.
    pub fn span(&self, n_steps: usize) -> f64 {
        if n_steps == 0 {
            return 0.0;
        }
        self.slot(n_steps - 1, self.nodes - 1).1
    }

    fn validate(&self) -> Result<()> {
        if !(self.desync.is_finite() && self.desync > -1.0) {
            return Err(Error::param(format!(
                "readout desync must exceed -1, got {}",
                self.desync
            )));
        }
        Ok(())
    }

    /// Read one round from `traj`, with slot times offset by `origin`.
    pub fn read_round(&self, traj: &Trajectory, origin: f64, n: usize, out: &mut [f64]) -> Result<()> {
        for (l, slot) in out.iter_mut().enumerate() {
            let (a, b) = self.slot(n, l);
            let (a, b) = (origin + a, origin + b);
            *slot = match self.rule {
                SamplingRule::EndOfSlot => sample(traj, b)?,
                SamplingRule::MidSlot => sample(traj, 0.5 * (a + b))?,
                SamplingRule::SlotAverage => slot_average(traj, a, b)?,
            };
        }
        Ok(())
    }

    /// Read one round from a signal that is constant over each `δτ` slot,
    /// `values[j]` covering `[j·δτ, (j+1)·δτ)`.
    pub fn read_round_piecewise(&self, values: &[f64], n: usize, out: &mut [f64]) -> Result<()> {
        let dt = self.node_duration;
        let at_end = |t: f64| -> Result<f64> {
            // value just before t
            let j = ((t / dt) - 1e-9).ceil() as i64 - 1;
            piece(values, j)
        };
        for (l, slot) in out.iter_mut().enumerate() {
            let (a, b) = self.slot(n, l);
            *slot = match self.rule {
                SamplingRule::EndOfSlot => at_end(b)?,
                SamplingRule::MidSlot => piece(values, (0.5 * (a + b) / dt).floor() as i64)?,
                SamplingRule::SlotAverage => {
                    let first = (a / dt + 1e-9).floor() as i64;
                    let last = ((b / dt) - 1e-9).ceil() as i64 - 1;
                    let mut acc = 0.0;
                    for j in first..=last {
                        let lo = a.max(j as f64 * dt);
                        let hi = b.min((j + 1) as f64 * dt);
                        if hi > lo {
                            acc += (hi - lo) * piece(values, j)?;
                        }
                    }
                    acc / (b - a)
                }
            };
        }
        Ok(())
    }
}

fn piece(values: &[f64], j: i64) -> Result<f64> {
    if j < 0 || j as usize >= values.len() {
        return Err(Error::Length {
            needed: (j.max(0) + 1) as usize,
            available: values.len(),
        });
    }
    Ok(values[j as usize])
}

fn sample(traj: &Trajectory, t: f64) -> Result<f64> {
    traj.value_at(t).ok_or_else(|| Error::Length {
        needed: ((t - traj.t0) / traj.step).ceil().max(0.0) as usize + 1,
        available: traj.len(),
    })
}

/// Time average over `[a, b]` by the trapezoid rule on the sample grid.
fn slot_average(traj: &Trajectory, a: f64, b: f64) -> Result<f64> {
    let xa = sample(traj, a)?;
    let xb = sample(traj, b)?;
    let h = traj.step;
    let first = ((a - traj.t0) / h + 1e-9).ceil() as usize;
    let last = ((b - traj.t0) / h - 1e-9).floor() as usize;
    if first > last {
        return Ok(0.5 * (xa + xb));
    }
    let mut acc = 0.0;
    let mut t_prev = a;
    let mut x_prev = xa;
    for i in first..=last {
        let t = traj.time(i);
        let x = traj.values[i];
        acc += 0.5 * (x + x_prev) * (t - t_prev);
        t_prev = t;
        x_prev = x;
    }
    acc += 0.5 * (xb + x_prev) * (b - t_prev);
    Ok(acc / (b - a))
}

/// Split a trajectory into `n_steps` rounds of `N` nodes.
///
/// Round `n` (1-based) starts at `traj.t0 + (n−1)·τ_m`; node `l` is read
/// from `[(l−1)·δτʳ, l·δτʳ)` within it, `δτʳ = (1+ξ)·δτ`. For `ξ > 0` the
/// last nodes of a round read into the next one.
pub fn continuous_to_nodes(
    traj: &Trajectory,
    grid: &NodeGrid,
    n_steps: usize,
    readout_desync: f64,
) -> Result<StateMatrix> {
    grid.validate()?;
    let readout = Readout::from_grid(grid, readout_desync);
    readout.validate()?;
    if traj.step > grid.node_duration / 2.0 + 1e-15 {
        return Err(Error::param(format!(
            "trajectory step {} exceeds δτ/2 = {}",
            traj.step,
            grid.node_duration / 2.0
        )));
    }
    let needed_end = traj.t0 + readout.span(n_steps);
    if needed_end > traj.t_end() + 1e-9 * needed_end.abs().max(traj.step) {
        return Err(Error::Length {
            needed: ((needed_end - traj.t0) / traj.step).ceil() as usize + 1,
            available: traj.len(),
        });
    }
    let mut values = DMatrix::zeros(grid.n_nodes, n_steps);
    let mut col = vec![0.0; grid.n_nodes];
    for n in 0..n_steps {
        readout.read_round(traj, traj.t0, n, &mut col)?;
        values.column_mut(n).copy_from_slice(&col);
    }
    StateMatrix::new(values, 0)
}

/// Concatenate the columns of a node matrix back into one sequence.
pub fn flatten_nodes(states: &StateMatrix) -> Vec<f64> {
    states.values.as_slice().to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingKernel {
    /// `weights[j]` links node `l` to node `l − j` of the previous round.
    pub weights: Vec<f64>,
    pub truncation_threshold: f64,
}

impl CouplingKernel {
    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Number of offsets carrying at least `fraction` of the zero-offset weight.
    pub fn reach(&self, fraction: f64) -> usize {
        let w0 = self.weights.first().copied().unwrap_or(0.0);
        self.weights.iter().filter(|&&w| w >= fraction * w0).count()
    }
}

pub const DEFAULT_KERNEL_THRESHOLD: f64 = 1e-4;

/// Slot-integrated impulse response, truncated at the default threshold.
pub fn coupling_kernel(response_time: f64, node_duration: f64, max_offset: usize) -> Result<CouplingKernel> {
    coupling_kernel_with_threshold(response_time, node_duration, max_offset, DEFAULT_KERNEL_THRESHOLD)
}

/// `weights[j] = ∫_{jδτ}^{(j+1)δτ} h(t) dt` for `j = 0..=max_offset`, by
/// composite Gauss-Legendre quadrature. Offsets below `threshold·weights[0]` are cut.
pub fn coupling_kernel_with_threshold(
    response_time: f64,
    node_duration: f64,
    max_offset: usize,
    threshold: f64,
) -> Result<CouplingKernel> {
    for (name, v) in [("response time", response_time), ("node duration", node_duration)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::param(format!("{name} must be positive, got {v}")));
        }
    }
    if !(threshold.is_finite() && threshold >= 0.0) {
        return Err(Error::param(format!("truncation threshold must be nonnegative, got {threshold}")));
    }
    // panels no wider than T_R/2 keep the 5-point rule exact to rounding
    let panels = (2.0 * node_duration / response_time).ceil().clamp(1.0, 1e7) as usize;
    let h = |t: f64| (-t / response_time).exp() / response_time;
    let width = node_duration / panels as f64;

    let mut weights = Vec::with_capacity(max_offset + 1);
    for j in 0..=max_offset {
        let start = j as f64 * node_duration;
        if start / response_time > 745.0 {
            // below the smallest subnormal
            weights.push(0.0);
            continue;
        }
        let acc: f64 = (0..panels)
            .map(|i| gauss_legendre5(&h, start + i as f64 * width, width))
            .sum();
        weights.push(acc);
    }
    let w0 = weights[0];
    if let Some(cut) = weights.iter().position(|&w| w < threshold * w0) {
        weights.truncate(cut.max(1));
    }
    Ok(CouplingKernel {
        weights,
        truncation_threshold: threshold,
    })
}

fn gauss_legendre5(f: &impl Fn(f64) -> f64, a: f64, width: f64) -> f64 {
    const NODES: [f64; 5] = [
        0.0,
        -0.538_469_310_105_683_1,
        0.538_469_310_105_683_1,
        -0.906_179_845_938_664,
        0.906_179_845_938_664,
    ];
    const WEIGHTS: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
        0.236_926_885_056_189_1,
    ];
    let half = 0.5 * width;
    let mid = a + half;
    half * NODES
        .iter()
        .zip(WEIGHTS)
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
}

/// Lags in node slots for each feedback tap; delays are snapped to whole slots.
pub fn tap_lags(p: &SystemParams, node_duration: f64) -> Result<Vec<usize>> {
    p.taps
        .iter()
        .enumerate()
        .map(|(i, tap)| {
            let exact = tap.delay / node_duration;
            let lag = exact.round();
            if lag < 1.0 {
                return Err(Error::config(format!(
                    "tap {i}: delay {} is shorter than one node slot {}",
                    tap.delay, node_duration
                )));
            }
            if (exact - lag).abs() > 1e-9 * exact {
                warn!("tap {i}: delay {} is not a whole number of node slots; using {lag}", tap.delay);
            }
            Ok(lag as usize)
        })
        .collect()
}

/// Instantaneous-limit node map iterated slot by slot:
/// `s_j = f(μ·Σ g_i·s_{j−m_i} + ρ·d_j + Φ0)`.
#[derive(Debug, Clone)]
pub struct DelayMap {
    params: SystemParams,
    lags: Vec<usize>,
    ring: Vec<f64>,
    /// Index of the next slot to compute.
    next: usize,
    delayed: Vec<f64>,
}

impl DelayMap {
    /// Map with every slot before the first one held at `initial`.
    pub fn new(params: &SystemParams, node_duration: f64, initial: f64) -> Result<Self> {
        params.validate()?;
        let lags = tap_lags(params, node_duration)?;
        let cap = lags.iter().copied().max().unwrap_or(0) + 1;
        Ok(Self {
            params: params.clone(),
            delayed: vec![0.0; lags.len()],
            lags,
            ring: vec![initial; cap],
            next: 0,
        })
    }

    /// Map whose history is given per slot, oldest first; missing slots take the oldest value.
    pub fn with_history(params: &SystemParams, node_duration: f64, history: &[f64]) -> Result<Self> {
        let Some(&oldest) = history.first() else {
            return Err(Error::param("sample history is empty"));
        };
        if history.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("sample history contains non-finite values"));
        }
        let mut map = Self::new(params, node_duration, oldest)?;
        let cap = map.ring.len();
        for (i, &v) in history.iter().rev().take(cap).enumerate() {
            map.ring[cap - 1 - i] = v;
        }
        Ok(map)
    }

    /// Map starting from the default operating point (steady state, else zero).
    pub fn at_rest(params: &SystemParams, node_duration: f64) -> Result<Self> {
        let x0 = steady_state(params, 0.0).unwrap_or(0.0);
        Self::new(params, node_duration, x0)
    }

    pub fn lags(&self) -> &[usize] {
        &self.lags
    }

    #[inline]
    pub fn step(&mut self, drive: f64) -> f64 {
        let cap = self.ring.len();
        let j = self.next + cap;
        for (d, &m) in self.delayed.iter_mut().zip(&self.lags) {
            *d = self.ring[(j - m) % cap];
        }
        let x = self
            .params
            .nonlinearity
            .apply(self.params.argument(&self.delayed, drive));
        self.ring[j % cap] = x;
        self.next += 1;
        x
    }

    pub fn run(&mut self, drive: &[f64]) -> Vec<f64> {
        drive.iter().map(|&d| self.step(d)).collect()
    }
}

/// One round of the node map on a two-round buffer.
///
/// `older` is round `n−2`, `prev` round `n−1`; references to `l − k ≤ 0`
/// fall into the tail of `older`. Taps shorter than a round read the
/// current round, which is filled in node order.
pub fn discrete_map_step(
    older: &[f64],
    prev: &[f64],
    u_in: &[f64],
    p: &SystemParams,
    grid: &NodeGrid,
) -> Result<Vec<f64>> {
    grid.validate()?;
    let n = grid.n_nodes;
    if grid.desync >= n as i64 {
        return Err(Error::config(format!(
            "desync k = {} must be smaller than N = {n}",
            grid.desync
        )));
    }
    for (name, len) in [("older", older.len()), ("prev", prev.len()), ("u_in", u_in.len())] {
        if len != n {
            return Err(Error::contract(format!("{name} has {len} entries, expected {n}")));
        }
    }
    let lags = tap_lags(p, grid.node_duration)?;
    if let Some(&m) = lags.iter().find(|&&m| m > 2 * n) {
        return Err(Error::config(format!(
            "tap lag of {m} slots reaches beyond the two-round buffer of {} slots",
            2 * n
        )));
    }
    let mut seq = Vec::with_capacity(3 * n);
    seq.extend_from_slice(older);
    seq.extend_from_slice(prev);
    let mut delayed = vec![0.0; lags.len()];
    for l in 0..n {
        let j = 2 * n + l;
        for (d, &m) in delayed.iter_mut().zip(&lags) {
            *d = seq[j - m];
        }
        let x = p.nonlinearity.apply(p.argument(&delayed, u_in[l]));
        seq.push(x);
    }
    Ok(seq.split_off(2 * n))
}

/// Settings for [`equivalence_check_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalenceOptions {
    /// Leading rounds ignored in the comparison.
    pub washout: usize,
    pub scheme: Scheme,
    /// Integration step; defaults to `min(T_R, δτ)/16`.
    pub step: Option<f64>,
}

impl Default for EquivalenceOptions {
    fn default() -> Self {
        Self {
            washout: 10,
            scheme: Scheme::Rk4,
            step: None,
        }
    }
}

/// Largest node deviation between the integrated delay system and the node map.
pub fn equivalence_check(
    p: &SystemParams,
    grid: &NodeGrid,
    drive: &DMatrix<f64>,
    n_steps: usize,
) -> Result<f64> {
    equivalence_check_with(p, grid, drive, n_steps, EquivalenceOptions::default())
}

pub fn equivalence_check_with(
    p: &SystemParams,
    grid: &NodeGrid,
    drive: &DMatrix<f64>,
    n_steps: usize,
    opts: EquivalenceOptions,
) -> Result<f64> {
    grid.validate()?;
    if grid.node_duration < 50.0 * p.response_time {
        return Err(Error::config(format!(
            "equivalence needs δτ ≥ 50·T_R (δτ = {}, T_R = {})",
            grid.node_duration, p.response_time
        )));
    }
    if grid.desync < 1 {
        return Err(Error::config("equivalence check needs desync k ≥ 1"));
    }
    if drive.nrows() != grid.n_nodes || drive.ncols() < n_steps {
        return Err(Error::contract(format!(
            "drive is {}×{}, expected {}×≥{n_steps}",
            drive.nrows(),
            drive.ncols(),
            grid.n_nodes
        )));
    }
    if opts.washout >= n_steps {
        return Err(Error::Length {
            needed: opts.washout + 1,
            available: n_steps,
        });
    }
    let slots = &drive.as_slice()[..n_steps * grid.n_nodes];

    let mut map = DelayMap::at_rest(p, grid.node_duration)?;
    let mapped = map.run(slots);

    let step = opts
        .step
        .unwrap_or_else(|| default_step(p.response_time, grid.node_duration));
    let signal = HoldSignal::new(0.0, grid.node_duration, slots.to_vec())?;
    let traj = Integrator::new(opts.scheme, step).integrate(
        p,
        &signal,
        grid.mask_duration() * n_steps as f64,
        &InitialHistory::SteadyState,
    )?;
    let nodes = continuous_to_nodes(&traj, grid, n_steps, 0.0)?;

    let start = opts.washout * grid.n_nodes;
    let flat = nodes.values.as_slice();
    Ok(flat[start..]
        .iter()
        .zip(&mapped[start..])
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}
