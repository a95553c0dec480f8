//! Benchmark constants taken from the standard task definitions in the
//! reservoir-computing literature. None of them are specific to this crate.

/// NARMA10 drive is i.i.d. uniform on this interval.
pub const NARMA_INPUT_RANGE: (f64, f64) = (0.0, 0.5);
pub const NARMA_ORDER: usize = 10;
/// `y(n+1) = A·y(n) + B·y(n)·Σ_{i<10} y(n−i) + C·u(n−9)·u(n) + D`.
pub const NARMA_A: f64 = 0.3;
pub const NARMA_B: f64 = 0.05;
pub const NARMA_C: f64 = 1.5;
pub const NARMA_D: f64 = 0.1;
/// Sequences with `|y| > NARMA_BOUND` are rejected.
pub const NARMA_BOUND: f64 = 1.0;
pub const NARMA_MAX_RETRIES: usize = 10;

pub const CHANNEL_SYMBOLS: [f64; 4] = [-3.0, -1.0, 1.0, 3.0];
/// Channel impulse response applied to `d(n+2), d(n+1), …, d(n−7)`.
pub const CHANNEL_TAPS: [f64; 10] = [0.08, -0.12, 1.0, 0.18, -0.1, 0.091, -0.05, 0.04, 0.03, 0.01];
/// Number of future symbols the channel reaches into.
pub const CHANNEL_LOOKAHEAD: usize = 2;
/// `u = q + Q2·q² + Q3·q³`.
pub const CHANNEL_Q2: f64 = 0.036;
pub const CHANNEL_Q3: f64 = -0.011;
pub const CHANNEL_DEFAULT_SNR_DB: f64 = 28.0;

pub const SANTA_FE_TRAIN_FRACTION: f64 = 0.75;

/// Memory-capacity probe: i.i.d. uniform on this interval.
pub const PROBE_RANGE: (f64, f64) = (-1.0, 1.0);
pub const PROBE_TRAIN: usize = 10_000;
pub const PROBE_TEST: usize = 2_000;
