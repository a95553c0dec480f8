//! Linear readout: ridge regression, prediction, error metrics,
//! cross-validation and memory capacity.

use std::ops::Range;

use nalgebra::{Cholesky, DMatrix, Dyn};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::par::{map_indexed, Execution};
use crate::reservoir::{run, ReservoirConfig};
use crate::state::StateMatrix;
use crate::tasks::{mc_probe, standard};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Encoding {
    #[default]
    Regression,
    OneHot,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TeacherMatrix {
    /// `K × Q`.
    pub values: DMatrix<f64>,
    pub encoding: Encoding,
}

impl TeacherMatrix {
    pub fn regression(values: DMatrix<f64>) -> Self {
        Self {
            values,
            encoding: Encoding::Regression,
        }
    }

    /// Single-row teacher from a scalar series.
    pub fn series(values: &[f64]) -> Self {
        Self::regression(DMatrix::from_row_slice(1, values.len(), values))
    }

    pub fn one_hot(labels: &[usize], classes: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::param(format!("label {bad} outside {classes} classes")));
        }
        let mut values = DMatrix::zeros(classes, labels.len());
        for (q, &l) in labels.iter().enumerate() {
            values[(l, q)] = 1.0;
        }
        Ok(Self {
            values,
            encoding: Encoding::OneHot,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::contract("teacher contains non-finite values"));
        }
        if self.encoding == Encoding::OneHot {
            for (q, col) in self.values.column_iter().enumerate() {
                let ones = col.iter().filter(|&&v| v == 1.0).count();
                let zeros = col.iter().filter(|&&v| v == 0.0).count();
                if ones != 1 || ones + zeros != col.len() {
                    return Err(Error::contract(format!("teacher column {q} is not one-hot")));
                }
            }
        }
        Ok(())
    }

    fn columns(&self, range: Range<usize>) -> TeacherMatrix {
        TeacherMatrix {
            values: self.values.columns(range.start, range.len()).into_owned(),
            encoding: self.encoding,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutWeights {
    /// `K × N`, or `K × (N+1)` with the bias in the last column.
    pub weights: DMatrix<f64>,
    pub lambda: f64,
    pub bias_included: bool,
}

impl ReadoutWeights {
    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }

    pub fn nodes(&self) -> usize {
        self.weights.ncols() - usize::from(self.bias_included)
    }
}

/// `1e-6 · trace(M·Mᵀ) / N`.
pub fn default_lambda(states: &DMatrix<f64>) -> f64 {
    1e-6 * states.norm_squared() / states.nrows().max(1) as f64
}

fn features(states: &DMatrix<f64>, bias: bool) -> DMatrix<f64> {
    if bias {
        states.clone().insert_row(states.nrows(), 1.0)
    } else {
        states.clone()
    }
}

/// Factorised regularised Gram matrix `M·Mᵀ + λI`.
struct Normal {
    chol: Cholesky<f64, Dyn>,
}

impl Normal {
    fn new(feat: &DMatrix<f64>, lambda: f64) -> Result<Self> {
        let n = feat.nrows();
        let mut gram = feat * feat.transpose();
        for i in 0..n {
            gram[(i, i)] += lambda;
        }
        let scale = (0..n).map(|i| gram[(i, i)]).fold(0.0, f64::max);
        let hint = if lambda == 0.0 { "; use λ > 0" } else { "" };
        let chol = Cholesky::new(gram).ok_or_else(|| {
            Error::Rank(format!("regularised Gram matrix is not positive definite{hint}"))
        })?;
        let pivot = (0..n).map(|i| chol.l_dirty()[(i, i)]).fold(f64::INFINITY, f64::min);
        if pivot * pivot <= 1e-14 * scale {
            return Err(Error::Rank(format!(
                "Gram matrix is numerically singular (min pivot² {:.3e} vs scale {scale:.3e}){hint}",
                pivot * pivot
            )));
        }
        Ok(Self { chol })
    }

    /// `W = T·Mᵀ·(M·Mᵀ + λI)⁻¹`.
    fn solve(&self, feat: &DMatrix<f64>, teacher: &DMatrix<f64>) -> DMatrix<f64> {
        let rhs = feat * teacher.transpose();
        self.chol.solve(&rhs).transpose()
    }
}

/// Ridge regression on `N × Q` states and a `K × Q` teacher.
pub fn ridge_train(
    states: &StateMatrix,
    teacher: &TeacherMatrix,
    lambda: f64,
    bias: bool,
) -> Result<ReadoutWeights> {
    ridge_train_matrix(&states.values, teacher, lambda, bias)
}

pub fn ridge_train_matrix(
    states: &DMatrix<f64>,
    teacher: &TeacherMatrix,
    lambda: f64,
    bias: bool,
) -> Result<ReadoutWeights> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::param(format!("λ must be nonnegative, got {lambda}")));
    }
    if states.ncols() == 0 {
        return Err(Error::Length {
            needed: 1,
            available: 0,
        });
    }
    if teacher.values.ncols() != states.ncols() {
        return Err(Error::contract(format!(
            "{} state columns but {} teacher columns",
            states.ncols(),
            teacher.values.ncols()
        )));
    }
    teacher.validate()?;
    let feat = features(states, bias);
    let normal = Normal::new(&feat, lambda)?;
    Ok(ReadoutWeights {
        weights: normal.solve(&feat, &teacher.values),
        lambda,
        bias_included: bias,
    })
}

/// `y(n) = W·x(n)` for every column.
pub fn predict(w: &ReadoutWeights, states: &StateMatrix) -> Result<DMatrix<f64>> {
    predict_matrix(w, &states.values)
}

pub fn predict_matrix(w: &ReadoutWeights, states: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if w.nodes() != states.nrows() {
        return Err(Error::contract(format!(
            "readout expects {} nodes, states have {}",
            w.nodes(),
            states.nrows()
        )));
    }
    if w.bias_included {
        let n = w.nodes();
        let mut y = w.weights.columns(0, n) * states;
        let b = w.weights.column(n);
        for mut col in y.column_iter_mut() {
            col += b;
        }
        Ok(y)
    } else {
        Ok(&w.weights * states)
    }
}

/// Index of the largest entry per column; ties go to the lowest index.
pub fn argmax_columns(y: &DMatrix<f64>) -> Vec<usize> {
    y.column_iter()
        .map(|col| {
            let mut best = 0;
            for (i, &v) in col.iter().enumerate() {
                if v > col[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}

/// Decoded class labels for a one-hot readout.
pub fn predict_labels(w: &ReadoutWeights, states: &StateMatrix) -> Result<Vec<usize>> {
    Ok(argmax_columns(&predict(w, states)?))
}

/// Mean squared error over the population variance of the target.
pub fn nmse(y: &[f64], target: &[f64]) -> Result<f64> {
    if y.len() != target.len() {
        return Err(Error::contract(format!(
            "{} predictions for {} targets",
            y.len(),
            target.len()
        )));
    }
    if target.len() < 2 {
        return Err(Error::Length {
            needed: 2,
            available: target.len(),
        });
    }
    let n = target.len() as f64;
    let mean = target.iter().sum::<f64>() / n;
    let var = target.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n;
    if !(var > 0.0) {
        return Err(Error::Metric("target variance is zero".into()));
    }
    let mse = y.iter().zip(target).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n;
    Ok(mse / var)
}

/// Fraction of positions where the two sequences differ.
pub fn error_rate<T: PartialEq>(predicted: &[T], truth: &[T]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::contract(format!(
            "{} predictions for {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::contract("error rate of an empty sequence"));
    }
    let wrong = predicted.iter().zip(truth).filter(|(a, b)| a != b).count();
    Ok(wrong as f64 / truth.len() as f64)
}

/// Symbol error rate.
pub fn ser(predicted: &[f64], truth: &[f64]) -> Result<f64> {
    error_rate(predicted, truth)
}

/// Squared Pearson correlation; zero when either side is constant.
pub fn squared_correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return 0.0;
    }
    (sab * sab / (saa * sbb)).clamp(0.0, 1.0)
}

/// Contiguous test blocks covering `0..q` exactly once.
pub fn fold_ranges(q: usize, folds: usize) -> Result<Vec<Range<usize>>> {
    if folds == 0 || folds > q {
        return Err(Error::param(format!("cannot split {q} samples into {folds} folds")));
    }
    Ok((0..folds).map(|f| f * q / folds..(f + 1) * q / folds).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvReport {
    pub fold_scores: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

/// k-fold cross-validation: each block is scored by a readout trained on the others.
pub fn cross_validate<F>(
    states: &StateMatrix,
    teacher: &TeacherMatrix,
    lambda: f64,
    bias: bool,
    folds: usize,
    exec: Execution,
    score: F,
) -> Result<CvReport>
where
    F: Fn(&DMatrix<f64>, &DMatrix<f64>) -> Result<f64> + Sync + Send,
{
    let q = states.steps();
    let ranges = fold_ranges(q, folds)?;
    if folds < 2 {
        return Err(Error::param("cross-validation needs at least two folds"));
    }
    let results = map_indexed(folds, exec, |f| -> Result<f64> {
        let test = ranges[f].clone();
        let keep: Vec<usize> = (0..q).filter(|i| !test.contains(i)).collect();
        let train_x = states.values.select_columns(&keep);
        let train_t = TeacherMatrix {
            values: teacher.values.select_columns(&keep),
            encoding: teacher.encoding,
        };
        let w = ridge_train_matrix(&train_x, &train_t, lambda, bias)?;
        let y = predict(&w, &states.columns(test.start, test.end))?;
        score(&y, &teacher.columns(test).values)
    });
    let fold_scores = results.into_iter().collect::<Result<Vec<_>>>()?;
    let n = fold_scores.len() as f64;
    let mean = fold_scores.iter().sum::<f64>() / n;
    let std = (fold_scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n).sqrt();
    Ok(CvReport {
        fold_scores,
        mean,
        std,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeSettings {
    pub train: usize,
    pub test: usize,
    /// Largest lag; defaults to `2N`.
    pub max_lag: Option<usize>,
    pub seed: u64,
    /// Ridge parameter; defaults to the relative rule.
    pub lambda: Option<f64>,
    pub exec: Execution,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        Self {
            train: standard::PROBE_TRAIN,
            test: standard::PROBE_TEST,
            max_lag: None,
            seed: 0,
            lambda: None,
            exec: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MemoryCapacity {
    /// Per-lag capacities for `u(n−d)`.
    pub linear: Vec<f64>,
    /// Per-lag capacities for `u(n−d)²`.
    pub quadratic: Vec<f64>,
    /// Per-lag capacities for `u(n−d)·u(n−d−1)`.
    pub cross: Vec<f64>,
    pub linear_total: f64,
    pub quadratic_total: f64,
    pub cross_total: f64,
    pub total: f64,
}

/// Memory capacity of a reservoir driven by an i.i.d. uniform probe.
pub fn memory_capacity(config: &ReservoirConfig, probe: &ProbeSettings) -> Result<MemoryCapacity> {
    let n = config.nodes_per_step();
    let max_lag = probe.max_lag.unwrap_or(2 * n);
    let lead = max_lag + 1;
    let total = config.washout + lead + probe.train + probe.test;
    let data = mc_probe(total.max(1000), probe.seed)?;
    let u: Vec<f64> = data.input_series()[..total].to_vec();
    let inputs = DMatrix::from_row_slice(1, total, &u);
    let states = run(config, &inputs)?;
    capacity_from_states(&states.values, &u[config.washout..], probe, max_lag)
}

/// Capacity evaluation for precomputed states. Column `j` of `states`
/// responds to `u[j]`.
pub fn capacity_from_states(
    states: &DMatrix<f64>,
    u: &[f64],
    probe: &ProbeSettings,
    max_lag: usize,
) -> Result<MemoryCapacity> {
    let n = states.nrows();
    if max_lag > 2 * n {
        return Err(Error::param(format!("max lag {max_lag} exceeds 2N = {}", 2 * n)));
    }
    if probe.train < 10 * n {
        return Err(Error::Statistics(format!(
            "{} training samples for {n} nodes; need at least {}",
            probe.train,
            10 * n
        )));
    }
    let lead = max_lag + 1;
    let needed = lead + probe.train + probe.test;
    if states.ncols() < needed || u.len() < needed {
        return Err(Error::Length {
            needed,
            available: states.ncols().min(u.len()),
        });
    }
    let train = lead..lead + probe.train;
    let test = train.end..train.end + probe.test;
    let feat_train = features(&states.columns(train.start, train.len()).into_owned(), true);
    let feat_test = features(&states.columns(test.start, test.len()).into_owned(), true);
    let lambda = probe
        .lambda
        .unwrap_or_else(|| default_lambda(&states.columns(train.start, train.len()).into_owned()));
    let normal = Normal::new(&feat_train, lambda)?;

    let raw = |family: usize, d: usize, j: usize| -> f64 {
        let a = u[j - d];
        match family {
            0 => a,
            1 => a * a,
            _ => a * u[j - d - 1],
        }
    };
    let lags = max_lag + 1;
    let caps = map_indexed(3 * lags, probe.exec, |idx| {
        let (family, d) = (idx / lags, idx % lags);
        // targets are centred on their training mean
        let mean = train.clone().map(|j| raw(family, d, j)).sum::<f64>() / train.len() as f64;
        let target = |j: usize| raw(family, d, j) - mean;
        let t_train = DMatrix::from_iterator(1, train.len(), train.clone().map(target));
        let t_test: Vec<f64> = test.clone().map(target).collect();
        let w = normal.solve(&feat_train, &t_train);
        let y = &w * &feat_test;
        squared_correlation(y.as_slice(), &t_test)
    });
    let linear = caps[..lags].to_vec();
    let quadratic = caps[lags..2 * lags].to_vec();
    let cross = caps[2 * lags..].to_vec();
    let linear_total: f64 = linear.iter().sum();
    let quadratic_total: f64 = quadratic.iter().sum();
    let cross_total: f64 = cross.iter().sum();
    Ok(MemoryCapacity {
        total: linear_total + quadratic_total + cross_total,
        linear,
        quadratic,
        cross,
        linear_total,
        quadratic_total,
        cross_total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dde::{Nonlinearity, SystemParams};
    use crate::reservoir::{make_mask, Engine, MaskKind};
    use crate::virtual_net::NodeGrid;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sm(m: DMatrix<f64>) -> StateMatrix {
        StateMatrix::from_values(m).unwrap()
    }

    #[test]
    fn identity_recovery() {
        let i3 = DMatrix::<f64>::identity(3, 3);
        let w = ridge_train(&sm(i3.clone()), &TeacherMatrix::regression(i3.clone()), 0.0, false).unwrap();
        assert!((w.weights - &i3).abs().max() < 1e-14);
        let w = ridge_train(&sm(i3.clone()), &TeacherMatrix::regression(i3.clone()), 1.0, false).unwrap();
        assert!((w.weights - &i3 * 0.5).abs().max() < 1e-14);
    }

    #[test]
    fn singular_without_regularisation() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
        let t = TeacherMatrix::series(&[1.0, 0.0, 1.0]);
        assert!(matches!(ridge_train_matrix(&m, &t, 0.0, false), Err(Error::Rank(_))));
        ridge_train_matrix(&m, &t, 1e-3, false).unwrap();
    }

    fn pinv_ridge(m: &DMatrix<f64>, t: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
        // min ‖W·[M | √λ·I] − [T | 0]‖ solved through the pseudo-inverse
        let n = m.nrows();
        let q = m.ncols();
        let mut aug = DMatrix::zeros(n, q + n);
        aug.columns_mut(0, q).copy_from(m);
        aug.columns_mut(q, n).copy_from(&(DMatrix::identity(n, n) * lambda.sqrt()));
        let mut t_aug = DMatrix::zeros(t.nrows(), q + n);
        t_aug.columns_mut(0, q).copy_from(t);
        t_aug * aug.pseudo_inverse(1e-300).unwrap()
    }

    #[test]
    fn matches_pseudo_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = DMatrix::from_fn(5, 20, |_, _| rng.random_range(-1.0..1.0));
        let t = DMatrix::from_fn(2, 20, |_, _| rng.random_range(-1.0..1.0));
        let w = ridge_train_matrix(&m, &TeacherMatrix::regression(t.clone()), 1e-6, false).unwrap();
        let oracle = pinv_ridge(&m, &t, 1e-6);
        let rel = (&w.weights - &oracle).norm() / oracle.norm();
        assert!(rel <= 1e-8, "relative error {rel}");
    }

    #[test]
    fn bias_fits_offsets() {
        let m = DMatrix::from_row_slice(1, 4, &[0.0, 1.0, 2.0, 3.0]);
        let t = TeacherMatrix::series(&[5.0, 7.0, 9.0, 11.0]);
        let w = ridge_train_matrix(&m, &t, 0.0, true).unwrap();
        assert_abs_diff_eq!(w.weights[(0, 0)], 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(w.weights[(0, 1)], 5.0, epsilon = 1e-10);
        let y = predict(&w, &sm(m)).unwrap();
        assert_abs_diff_eq!(y[(0, 3)], 11.0, epsilon = 1e-10);
    }

    #[test]
    fn prediction_examples() {
        let w = ReadoutWeights {
            weights: DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]),
            lambda: 0.0,
            bias_included: false,
        };
        let x = sm(DMatrix::from_column_slice(2, 1, &[3.0, 4.0]));
        assert_eq!(predict(&w, &x).unwrap().as_slice(), &[11.0, 4.0]);
        let zero = ReadoutWeights {
            weights: DMatrix::zeros(2, 2),
            ..w.clone()
        };
        assert!(predict(&zero, &x).unwrap().iter().all(|&v| v == 0.0));
        let bad = sm(DMatrix::zeros(3, 1));
        assert!(matches!(predict(&w, &bad), Err(Error::Contract(_))));
    }

    #[test]
    fn argmax_ties_go_low() {
        let y = DMatrix::from_column_slice(3, 2, &[1.0, 1.0, 0.0, 0.0, 2.0, 2.0]);
        assert_eq!(argmax_columns(&y), vec![0, 1]);
    }

    #[test]
    fn one_hot_round_trip() {
        let t = TeacherMatrix::one_hot(&[2, 0, 1, 2], 3).unwrap();
        t.validate().unwrap();
        assert_eq!(argmax_columns(&t.values), vec![2, 0, 1, 2]);
        assert!(TeacherMatrix::one_hot(&[3], 3).is_err());
        let broken = TeacherMatrix {
            values: DMatrix::from_element(2, 1, 1.0),
            encoding: Encoding::OneHot,
        };
        assert!(broken.validate().is_err());
    }

    #[test]
    fn nmse_examples() {
        let t = [1.0, 2.0, 3.0, 6.0];
        assert_eq!(nmse(&t, &t).unwrap(), 0.0);
        let mean = [3.0; 4];
        assert_abs_diff_eq!(nmse(&mean, &t).unwrap(), 1.0, epsilon = 1e-15);
        let var = 3.5;
        let shifted: Vec<f64> = t.iter().map(|v| v + 0.5).collect();
        assert_abs_diff_eq!(nmse(&shifted, &t).unwrap(), 0.25 / var, epsilon = 1e-15);
        assert!(matches!(nmse(&[1.0, 1.0], &[2.0, 2.0]), Err(Error::Metric(_))));
    }

    #[test]
    fn error_rates() {
        let truth: Vec<usize> = (0..500).map(|i| i % 10).collect();
        let mut pred = truth.clone();
        pred[3] = 99;
        pred[400] = 99;
        assert_abs_diff_eq!(error_rate(&pred, &truth).unwrap(), 0.004);
        assert_eq!(error_rate(&truth, &truth).unwrap(), 0.0);
        assert_eq!(ser(&[1.0, 3.0], &[-1.0, -3.0]).unwrap(), 1.0);
        assert!(error_rate::<usize>(&[], &[]).is_err());
    }

    #[test]
    fn folds_cover_every_sample_once() {
        let ranges = fold_ranges(103, 5).unwrap();
        let mut seen = vec![0; 103];
        for r in ranges {
            for i in r {
                seen[i] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
        assert!(fold_ranges(3, 4).is_err());
    }

    #[test]
    fn cross_validation_recovers_linear_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = DMatrix::from_fn(3, 200, |_, _| rng.random_range(-1.0..1.0));
        let t = DMatrix::from_fn(1, 200, |_, q| 2.0 * m[(0, q)] - m[(2, q)]);
        let report = cross_validate(
            &sm(m),
            &TeacherMatrix::regression(t),
            1e-9,
            false,
            4,
            Execution::Sequential,
            |y, t| nmse(y.as_slice(), t.as_slice()),
        )
        .unwrap();
        assert_eq!(report.fold_scores.len(), 4);
        assert!(report.mean < 1e-12);
    }

    fn shift_register(n: usize) -> ReservoirConfig {
        let grid = NodeGrid::new(n, 1.0, 1).unwrap();
        let params = SystemParams::single_loop(0.01, grid.delay(), 0.9, 0.1, 0.0, Nonlinearity::Linear).unwrap();
        let mask = make_mask(MaskKind::UniformRandom, 3, n, 1).unwrap();
        ReservoirConfig::single_loop(params, grid, mask, Engine::DiscreteMap).unwrap()
    }

    #[test]
    fn delay_line_recalls_its_length() {
        let cfg = shift_register(10).with_washout(100);
        let probe = ProbeSettings {
            train: 3000,
            test: 1000,
            ..Default::default()
        };
        let mc = memory_capacity(&cfg, &probe).unwrap();
        assert!(mc.linear_total >= 8.0, "linear MC {}", mc.linear_total);
        assert!(mc.total <= 11.0);
    }

    #[test]
    fn insufficient_samples() {
        let cfg = shift_register(10).with_washout(100);
        let probe = ProbeSettings {
            train: 99,
            test: 100,
            ..Default::default()
        };
        assert!(matches!(memory_capacity(&cfg, &probe), Err(Error::Statistics(_))));
    }

    #[test]
    fn capacity_paths_agree() {
        let cfg = shift_register(6).with_washout(100);
        let mut probe = ProbeSettings {
            train: 1000,
            test: 300,
            ..Default::default()
        };
        probe.exec = Execution::Sequential;
        let a = memory_capacity(&cfg, &probe).unwrap();
        probe.exec = Execution::Parallel;
        assert_eq!(a, memory_capacity(&cfg, &probe).unwrap());
    }
}
