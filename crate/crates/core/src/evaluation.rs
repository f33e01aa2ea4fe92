//! Error metrics, the cross-validation protocol, and the fairness
//! regressions of per-row prediction error on estimated observation
//! probability.

use crate::dataio::{derive_seed, SyntheticData};
use crate::error::{Error, Result};
use crate::estimators::{fit_estimator, EstimatorSpec, Method};
use crate::matcore::{self, DenseMatrix};
use crate::sampling::{estimate_rank1, ObservationSet, SamplingEstimate};
use crate::solver::{FitResult, LambdaGrid, SolverConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Split fractions and seed lineage for repeated evaluation.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SplitPlan {
    /// Fraction of samples used for evaluation (training + validation).
    pub eval_fraction: f64,
    /// Fraction held out for testing; eval_fraction + test_fraction = 1.
    pub test_fraction: f64,
    /// Fraction of the evaluation set used for training in the inner split.
    pub inner_train_fraction: f64,
    pub n_repeats: usize,
    pub rng_seed: u64,
}

impl Default for SplitPlan {
    fn default() -> Self {
        SplitPlan {
            eval_fraction: 0.8,
            test_fraction: 0.2,
            inner_train_fraction: 0.8,
            n_repeats: 20,
            rng_seed: 20240,
        }
    }
}

impl SplitPlan {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("eval_fraction", self.eval_fraction),
            ("test_fraction", self.test_fraction),
            ("inner_train_fraction", self.inner_train_fraction),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        if (self.eval_fraction + self.test_fraction - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "eval_fraction + test_fraction must be 1, got {}",
                self.eval_fraction + self.test_fraction
            )));
        }
        if self.n_repeats == 0 {
            return Err(Error::Config("n_repeats must be >= 1".into()));
        }
        Ok(())
    }
}

/// Which axis a fairness regression aggregates over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FairnessAxis {
    Rows,
    Cols,
}

/// OLS of per-group test RMSE on estimated margin, with a two-sided t-test
/// on the slope (df = points - 2).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FairnessResult {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub t_stat: f64,
    pub p_value: f64,
    pub axis: FairnessAxis,
    pub n_points: usize,
}

/// ||b_hat - b_star||_F / ||b_star||_F.
pub fn relative_frobenius(b_hat: &DenseMatrix, b_star: &DenseMatrix) -> Result<f64> {
    b_hat.check_same_shape(b_star)?;
    let denom = b_star.frobenius_norm();
    if denom == 0.0 {
        return Err(Error::Domain {
            row: 0,
            col: 0,
            reason: "relative error undefined: reference matrix is zero".into(),
        });
    }
    Ok(b_hat.sub(b_star)?.frobenius_norm() / denom)
}

/// Sampling-weighted relative error under the distribution p.
pub fn relative_l2pi(b_hat: &DenseMatrix, b_star: &DenseMatrix, p: &DenseMatrix) -> Result<f64> {
    b_hat.check_same_shape(b_star)?;
    let denom = matcore::l2_pi_norm(b_star, p)?;
    if denom == 0.0 {
        return Err(Error::Domain {
            row: 0,
            col: 0,
            reason: "relative L2(Pi) error undefined: reference vanishes on the support".into(),
        });
    }
    Ok(matcore::l2_pi_norm(&b_hat.sub(b_star)?, p)? / denom)
}

/// Root mean squared prediction error over the test samples (multiplicity kept).
pub fn test_rmse(b_hat: &DenseMatrix, test_obs: &ObservationSet) -> Result<f64> {
    test_obs.require_non_empty("test RMSE")?;
    if b_hat.shape() != (test_obs.n_rows(), test_obs.n_cols()) {
        return Err(Error::Dimension(format!(
            "estimate is {}x{} but test observations live on {}x{}",
            b_hat.n_rows(),
            b_hat.n_cols(),
            test_obs.n_rows(),
            test_obs.n_cols()
        )));
    }
    let sq: f64 = test_obs
        .samples()
        .iter()
        .map(|s| {
            let e = s.value - b_hat.get(s.row, s.col);
            e * e
        })
        .sum();
    Ok((sq / test_obs.len() as f64).sqrt())
}

/// Deterministic shuffled split of 0..n into (first `fraction`, rest).
pub fn split_indices(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!(
            "split fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let k = ((n as f64) * fraction).floor() as usize;
    if k == 0 || k >= n {
        return Err(Error::Config(format!(
            "split of {n} samples at fraction {fraction} leaves an empty part"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    crate::sampling::shuffle(&mut idx, &mut rng);
    let rest = idx.split_off(k);
    Ok((idx, rest))
}

/// One test-set prediction, persisted for fairness replay.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PredictionRecord {
    pub row: usize,
    pub col: usize,
    pub y_true: f64,
    pub y_pred: f64,
}

/// Index of the path point with the lowest validation RMSE (ties keep the
/// earliest, i.e. largest lambda).
pub fn select_lambda_by_validation(path: &[FitResult], val: &ObservationSet) -> Result<usize> {
    if path.is_empty() {
        return Err(Error::InsufficientData("empty fit path".into()));
    }
    let mut best = 0;
    let mut best_rmse = f64::INFINITY;
    for (i, fit) in path.iter().enumerate() {
        let rmse = test_rmse(&fit.b_hat, val)?;
        if rmse < best_rmse {
            best_rmse = rmse;
            best = i;
        }
    }
    Ok(best)
}

/// Outcome of one evaluation repeat.
#[derive(Clone, Debug)]
pub struct RepeatOutcome {
    pub repeat: usize,
    pub lambda: f64,
    pub test_rmse: f64,
    pub predictions: Vec<PredictionRecord>,
}

/// Per-method cross-validation report.
#[derive(Clone, Debug)]
pub struct MethodReport {
    pub method: Method,
    pub repeats: Vec<RepeatOutcome>,
    pub mean_rmse: f64,
    pub two_se: f64,
    pub fairness_rows: Option<FairnessResult>,
    pub fairness_cols: Option<FairnessResult>,
}

pub(crate) const ROLE_OUTER_SPLIT: u64 = 1;
pub(crate) const ROLE_INNER_SPLIT: u64 = 2;
pub(crate) const ROLE_FIT: u64 = 3;
pub(crate) const ROLE_REFIT: u64 = 4;

/// Mean and 2x standard error of a sample.
pub fn mean_and_two_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, 2.0 * (var / n as f64).sqrt())
}

/// The repeated-split protocol: per repeat, split samples 80/20 into
/// evaluation and test, optimize lambda on an inner 80/20 train/validation
/// split, refit on the whole evaluation set at the selected lambda, and score
/// on the test set. Lambda selection never sees test observations.
pub fn cross_validate(
    obs: &ObservationSet,
    spec: &EstimatorSpec,
    plan: &SplitPlan,
) -> Result<MethodReport> {
    plan.validate()?;
    obs.require_non_empty("cross-validation")?;

    let mut repeats = Vec::with_capacity(plan.n_repeats);
    for repeat in 0..plan.n_repeats {
        repeats.push(run_repeat(obs, spec, plan, repeat)?);
    }
    finalize_report(spec.method, obs, repeats)
}

/// One split-fit-refit-score repeat of the protocol; exposed so experiment
/// runners can parallelize over repeats.
pub fn run_repeat(
    obs: &ObservationSet,
    spec: &EstimatorSpec,
    plan: &SplitPlan,
    repeat: usize,
) -> Result<RepeatOutcome> {
    let seed_r = derive_seed(plan.rng_seed, repeat as u64);
    let (eval_idx, test_idx) = split_indices(
        obs.len(),
        plan.eval_fraction,
        derive_seed(seed_r, ROLE_OUTER_SPLIT),
    )?;
    debug_assert!(eval_idx.iter().all(|i| !test_idx.contains(i)));
    let eval = obs.subset(&eval_idx);
    let test = obs.subset(&test_idx);

    let (train_idx, val_idx) = split_indices(
        eval.len(),
        plan.inner_train_fraction,
        derive_seed(seed_r, ROLE_INNER_SPLIT),
    )?;
    let train = eval.subset(&train_idx);
    let val = eval.subset(&val_idx);

    let path = fit_estimator(&train, spec, derive_seed(seed_r, ROLE_FIT), None)?;
    let best = select_lambda_by_validation(&path, &val)?;
    let grid: Vec<f64> = path[..=best].iter().map(|f| f.lambda).collect();
    let lambda = grid[best];

    let refit_spec = EstimatorSpec {
        solver: SolverConfig {
            lambda_grid: LambdaGrid::Explicit(grid),
            ..spec.solver.clone()
        },
        ..spec.clone()
    };
    let refit = fit_estimator(&eval, &refit_spec, derive_seed(seed_r, ROLE_REFIT), None)?;
    let b_hat = &refit.last().expect("non-empty path").b_hat;

    let rmse = test_rmse(b_hat, &test)?;
    let predictions = test
        .samples()
        .iter()
        .map(|s| PredictionRecord {
            row: s.row,
            col: s.col,
            y_true: s.value,
            y_pred: b_hat.get(s.row, s.col),
        })
        .collect();
    Ok(RepeatOutcome {
        repeat,
        lambda,
        test_rmse: rmse,
        predictions,
    })
}

/// Aggregate repeat outcomes into the per-method report (mean, 2 SE, pooled
/// fairness regressions against the full-data margins).
pub fn finalize_report(
    method: Method,
    obs: &ObservationSet,
    repeats: Vec<RepeatOutcome>,
) -> Result<MethodReport> {
    let rmses: Vec<f64> = repeats.iter().map(|r| r.test_rmse).collect();
    let (mean_rmse, two_se) = mean_and_two_se(&rmses);

    let margins = estimate_rank1(obs)?;
    let pooled: Vec<PredictionRecord> = repeats
        .iter()
        .flat_map(|r| r.predictions.iter().copied())
        .collect();
    let fairness_rows = fairness_from_predictions(&pooled, &margins.row_margins, FairnessAxis::Rows).ok();
    let fairness_cols = fairness_from_predictions(&pooled, &margins.col_margins, FairnessAxis::Cols).ok();

    Ok(MethodReport {
        method,
        repeats,
        mean_rmse,
        two_se,
        fairness_rows,
        fairness_cols,
    })
}

/// Per-group RMSE of the predictions regressed on the margin of that group.
pub fn fairness_from_predictions(
    predictions: &[PredictionRecord],
    margins: &[f64],
    axis: FairnessAxis,
) -> Result<FairnessResult> {
    let mut sq_sum = vec![0.0f64; margins.len()];
    let mut count = vec![0usize; margins.len()];
    for p in predictions {
        let g = match axis {
            FairnessAxis::Rows => p.row,
            FairnessAxis::Cols => p.col,
        };
        if g >= margins.len() {
            return Err(Error::Dimension(format!(
                "prediction index {g} outside the {} margins",
                margins.len()
            )));
        }
        let e = p.y_true - p.y_pred;
        sq_sum[g] += e * e;
        count[g] += 1;
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for g in 0..margins.len() {
        if count[g] > 0 {
            xs.push(margins[g]);
            ys.push((sq_sum[g] / count[g] as f64).sqrt());
        }
    }
    ols_t_test(&xs, &ys, axis)
}

/// Fairness regression for one fitted matrix: per-row (or per-column) test
/// RMSE against the estimated margins of the sampling estimate.
pub fn fairness_regression(
    b_hat: &DenseMatrix,
    test_obs: &ObservationSet,
    sampling: &SamplingEstimate,
    axis: FairnessAxis,
) -> Result<FairnessResult> {
    test_obs.require_non_empty("fairness regression")?;
    if b_hat.shape() != (test_obs.n_rows(), test_obs.n_cols()) {
        return Err(Error::Dimension(format!(
            "estimate is {}x{} but test observations live on {}x{}",
            b_hat.n_rows(),
            b_hat.n_cols(),
            test_obs.n_rows(),
            test_obs.n_cols()
        )));
    }
    let predictions: Vec<PredictionRecord> = test_obs
        .samples()
        .iter()
        .map(|s| PredictionRecord {
            row: s.row,
            col: s.col,
            y_true: s.value,
            y_pred: b_hat.get(s.row, s.col),
        })
        .collect();
    let margins = match axis {
        FairnessAxis::Rows => &sampling.row_margins,
        FairnessAxis::Cols => &sampling.col_margins,
    };
    fairness_from_predictions(&predictions, margins, axis)
}

fn ols_t_test(xs: &[f64], ys: &[f64], axis: FairnessAxis) -> Result<FairnessResult> {
    let m = xs.len();
    if m < 3 {
        return Err(Error::InsufficientData(format!(
            "fairness regression needs >= 3 populated groups, got {m}"
        )));
    }
    let mf = m as f64;
    let x_bar = xs.iter().sum::<f64>() / mf;
    let y_bar = ys.iter().sum::<f64>() / mf;
    let sxx: f64 = xs.iter().map(|x| (x - x_bar) * (x - x_bar)).sum();
    if sxx <= 1e-300 {
        return Err(Error::Config(
            "fairness regressor has zero variance (collinear margins)".into(),
        ));
    }
    let sxy: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (x - x_bar) * (y - y_bar))
        .sum();
    let slope = sxy / sxx;
    let intercept = y_bar - slope * x_bar;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    let df = (m - 2) as f64;
    let se = (rss / df / sxx).sqrt().max(f64::MIN_POSITIVE);
    let t_stat = slope / se;
    let dist = StudentsT::new(0.0, 1.0, df)
        .map_err(|e| Error::SolverFailure(format!("t distribution: {e}")))?;
    let p_value = (2.0 * (1.0 - dist.cdf(t_stat.abs()))).clamp(0.0, 1.0);
    Ok(FairnessResult {
        slope,
        intercept,
        slope_se: se,
        t_stat,
        p_value,
        axis,
        n_points: m,
    })
}

/// How a synthetic evaluation picks its penalty level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaSelection {
    /// Ground truth known: lowest relative Frobenius error on the path.
    Oracle,
    /// Internal 80/20 split on the observations, then refit on everything.
    Validation,
}

/// One synthetic evaluation cell.
#[derive(Clone, Debug)]
pub struct SyntheticOutcome {
    pub lambda: f64,
    pub rel_frobenius: f64,
    pub rel_l2pi: f64,
    pub b_hat: DenseMatrix,
}

/// Fit one method with the penalty level chosen on an internal 80/20
/// train/validation split, then refit at that level on all observations.
pub fn fit_with_validation(
    obs: &ObservationSet,
    spec: &EstimatorSpec,
    seed: u64,
) -> Result<FitResult> {
    let (train_idx, val_idx) = split_indices(obs.len(), 0.8, derive_seed(seed, ROLE_INNER_SPLIT))?;
    let train = obs.subset(&train_idx);
    let val = obs.subset(&val_idx);
    let path = fit_estimator(&train, spec, derive_seed(seed, ROLE_FIT), None)?;
    let best = select_lambda_by_validation(&path, &val)?;
    let grid: Vec<f64> = path[..=best].iter().map(|f| f.lambda).collect();
    let refit_spec = EstimatorSpec {
        solver: SolverConfig {
            lambda_grid: LambdaGrid::Explicit(grid),
            ..spec.solver.clone()
        },
        ..spec.clone()
    };
    let refit = fit_estimator(obs, &refit_spec, derive_seed(seed, ROLE_REFIT), None)?;
    Ok(refit.into_iter().last().expect("non-empty path"))
}

/// Fit one method on synthetic data and score it against the ground truth.
pub fn evaluate_on_synthetic(
    data: &SyntheticData,
    spec: &EstimatorSpec,
    selection: LambdaSelection,
    seed: u64,
) -> Result<SyntheticOutcome> {
    let chosen = match selection {
        LambdaSelection::Oracle => {
            let path = fit_estimator(&data.obs, spec, seed, Some(&data.b_star))?;
            let mut best: Option<FitResult> = None;
            let mut best_err = f64::INFINITY;
            for fit in path {
                let err = relative_frobenius(&fit.b_hat, &data.b_star)?;
                if err < best_err {
                    best_err = err;
                    best = Some(fit);
                }
            }
            best.expect("non-empty path")
        }
        LambdaSelection::Validation => fit_with_validation(&data.obs, spec, seed)?,
    };
    Ok(SyntheticOutcome {
        lambda: chosen.lambda,
        rel_frobenius: relative_frobenius(&chosen.b_hat, &data.b_star)?,
        rel_l2pi: relative_l2pi(&chosen.b_hat, &data.b_star, &data.p_star)?,
        b_hat: chosen.b_hat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{Observation, SamplingMethod};
    use crate::weights::WeightConstructionConfig;
    use rand::{Rng, SeedableRng};

    #[test]
    fn relative_error_examples() {
        let eye = DenseMatrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0]]).unwrap();
        assert_eq!(relative_frobenius(&eye, &eye).unwrap(), 0.0);
        let zero = DenseMatrix::zeros(2, 2);
        assert!((relative_frobenius(&zero, &eye).unwrap() - 1.0).abs() < 1e-15);
        let partial = DenseMatrix::from_rows(&[&[1.0, 0.0], &[0.0, 0.0]]).unwrap();
        assert!(
            (relative_frobenius(&partial, &eye).unwrap() - 1.0 / 2f64.sqrt()).abs() < 1e-15
        );
        assert!(matches!(
            relative_frobenius(&eye, &zero),
            Err(Error::Domain { .. })
        ));

        let unif = DenseMatrix::constant(2, 2, 0.25);
        let rf = relative_frobenius(&partial, &eye).unwrap();
        let rl = relative_l2pi(&partial, &eye, &unif).unwrap();
        assert!((rf - rl).abs() < 1e-12, "uniform p reduces L2(Pi) to Frobenius");
    }

    #[test]
    fn rmse_examples() {
        let b = DenseMatrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        let exact = ObservationSet::new(
            2,
            2,
            vec![Observation { row: 0, col: 1, value: 2.0 }],
        )
        .unwrap();
        assert_eq!(test_rmse(&b, &exact).unwrap(), 0.0);

        let off = ObservationSet::new(
            2,
            2,
            vec![Observation { row: 0, col: 0, value: 3.0 }],
        )
        .unwrap();
        assert!((test_rmse(&b, &off).unwrap() - 2.0).abs() < 1e-15);

        let two = ObservationSet::new(
            2,
            2,
            vec![
                Observation { row: 0, col: 0, value: 4.0 },
                Observation { row: 1, col: 0, value: 7.0 },
            ],
        )
        .unwrap();
        assert!((test_rmse(&b, &two).unwrap() - (25.0f64 / 2.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn fairness_closed_form() {
        // Points (1,1), (2,2), (3,2): slope 1/2, t = sqrt(3), p = 1/3.
        let r = ols_t_test(&[1.0, 2.0, 3.0], &[1.0, 2.0, 2.0], FairnessAxis::Rows).unwrap();
        assert!((r.slope - 0.5).abs() < 1e-12);
        assert!((r.intercept - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.t_stat - 3f64.sqrt()).abs() < 1e-9);
        assert!((r.p_value - 1.0 / 3.0).abs() < 1e-9);

        let flat = ols_t_test(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0], FairnessAxis::Rows).unwrap();
        assert_eq!(flat.slope, 0.0);
        assert!((flat.p_value - 1.0).abs() < 1e-9);

        assert!(matches!(
            ols_t_test(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0], FairnessAxis::Rows),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            ols_t_test(&[1.0, 2.0], &[1.0, 2.0], FairnessAxis::Rows),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn fairness_matches_normal_equations() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        for _ in 0..30 {
            let m = 3 + rng.random_range(0..8);
            let xs: Vec<f64> = (0..m).map(|_| rng.random::<f64>() * 3.0).collect();
            let ys: Vec<f64> = (0..m).map(|_| rng.random::<f64>() * 2.0).collect();
            let sxx: f64 = xs.iter().map(|x| x * x).sum();
            let sx: f64 = xs.iter().sum();
            let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
            let sy: f64 = ys.iter().sum();
            let det = m as f64 * sxx - sx * sx;
            if det.abs() < 1e-9 {
                continue;
            }
            let slope = (m as f64 * sxy - sx * sy) / det;
            let intercept = (sy * sxx - sx * sxy) / det;
            let r = ols_t_test(&xs, &ys, FairnessAxis::Cols).unwrap();
            assert!((r.slope - slope).abs() < 1e-12);
            assert!((r.intercept - intercept).abs() < 1e-12);
        }
    }

    #[test]
    fn split_is_disjoint_and_deterministic() {
        let (a1, b1) = split_indices(100, 0.8, 7).unwrap();
        let (a2, b2) = split_indices(100, 0.8, 7).unwrap();
        assert_eq!(a1, a2);
        assert_eq!(b1, b2);
        assert_eq!(a1.len(), 80);
        assert_eq!(b1.len(), 20);
        let mut all: Vec<usize> = a1.iter().chain(&b1).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());

        assert!(split_indices(1, 0.8, 7).is_err());
    }

    fn synthetic_obs(seed: u64, r: usize, c: usize, n: usize) -> ObservationSet {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let samples = (0..n)
            .map(|_| Observation {
                row: rng.random_range(0..r),
                col: rng.random_range(0..c),
                value: rng.random::<f64>() * 2.0,
            })
            .collect();
        ObservationSet::new(r, c, samples).unwrap()
    }

    fn quick_spec(method: Method) -> EstimatorSpec {
        EstimatorSpec {
            method,
            solver: SolverConfig {
                lambda_grid: LambdaGrid::Auto { count: 4, min_ratio: 1e-2 },
                tol: 1e-8,
                max_iter: 300,
                ..Default::default()
            },
            weights: WeightConstructionConfig {
                max_iter: 200,
                ..Default::default()
            },
            sampling: SamplingMethod::Rank1,
        }
    }

    #[test]
    fn cross_validate_deterministic() {
        let obs = synthetic_obs(3, 8, 8, 160);
        let plan = SplitPlan {
            n_repeats: 3,
            rng_seed: 99,
            ..Default::default()
        };
        let spec = quick_spec(Method::Uniform);
        let a = cross_validate(&obs, &spec, &plan).unwrap();
        let b = cross_validate(&obs, &spec, &plan).unwrap();
        assert_eq!(a.mean_rmse.to_bits(), b.mean_rmse.to_bits());
        assert_eq!(a.two_se.to_bits(), b.two_se.to_bits());
        for (x, y) in a.repeats.iter().zip(&b.repeats) {
            assert_eq!(x.lambda.to_bits(), y.lambda.to_bits());
            assert_eq!(x.test_rmse.to_bits(), y.test_rmse.to_bits());
            assert_eq!(x.predictions, y.predictions);
        }
    }

    #[test]
    fn selection_is_exhaustive_argmin() {
        let obs = synthetic_obs(5, 6, 6, 120);
        let (train_idx, val_idx) = split_indices(obs.len(), 0.8, 11).unwrap();
        let train = obs.subset(&train_idx);
        let val = obs.subset(&val_idx);
        let path = crate::estimators::fit_uniform(&train, &quick_spec(Method::Uniform).solver).unwrap();
        let best = select_lambda_by_validation(&path, &val).unwrap();
        let best_rmse = test_rmse(&path[best].b_hat, &val).unwrap();
        for fit in &path {
            assert!(best_rmse <= test_rmse(&fit.b_hat, &val).unwrap() + 1e-15);
        }
    }

    #[test]
    fn single_lambda_grid_selected_trivially() {
        let obs = synthetic_obs(7, 6, 6, 140);
        let plan = SplitPlan {
            n_repeats: 1,
            rng_seed: 4,
            ..Default::default()
        };
        let mut spec = quick_spec(Method::Uniform);
        spec.solver.lambda_grid = LambdaGrid::Explicit(vec![0.05]);
        let report = cross_validate(&obs, &spec, &plan).unwrap();
        assert_eq!(report.repeats.len(), 1);
        assert!((report.repeats[0].lambda - 0.05).abs() < 1e-15);
    }

    #[test]
    fn mean_and_two_se_basic() {
        let (m, se2) = mean_and_two_se(&[1.0, 3.0]);
        assert!((m - 2.0).abs() < 1e-15);
        // sd = sqrt(2), se = 1, 2se = 2.
        assert!((se2 - 2.0).abs() < 1e-12);
        let (m1, se1) = mean_and_two_se(&[5.0]);
        assert_eq!((m1, se1), (5.0, 0.0));
    }
}
