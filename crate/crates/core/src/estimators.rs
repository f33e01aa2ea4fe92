//! The four estimation pipelines sharing one solver: Uniform, Margin,
//! IPW+Uniform, and NU-Recommend.

use crate::dataio::derive_seed;
use crate::error::{Error, Result};
use crate::evaluation;
use crate::matcore::DenseMatrix;
use crate::sampling::{
    estimate_rank1, select_pmlsvt, ObservationSet, PmlsvtConfig, SamplingEstimate, SamplingMethod,
};
use crate::solver::{fit_path, fit_path_with_sample_weights, FitResult, LambdaGrid, SolverConfig};
use crate::weights::{construct_weights, WeightConstructionConfig};
use serde::{Deserialize, Serialize};

/// Benchmarked estimation methods.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Uniform,
    Margin,
    IpwUniform,
    NuRecommend,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Uniform => "uniform",
            Method::Margin => "margin",
            Method::IpwUniform => "ipw_uniform",
            Method::NuRecommend => "nu_recommend",
        }
    }

    pub fn parse(s: &str) -> Result<Method> {
        match s {
            "uniform" => Ok(Method::Uniform),
            "margin" => Ok(Method::Margin),
            "ipw_uniform" => Ok(Method::IpwUniform),
            "nu_recommend" => Ok(Method::NuRecommend),
            other => Err(Error::Config(format!(
                "unknown method {other:?}; expected uniform | margin | ipw_uniform | nu_recommend"
            ))),
        }
    }
}

/// Everything needed to run one method.
#[derive(Clone, Debug)]
pub struct EstimatorSpec {
    pub method: Method,
    pub solver: SolverConfig,
    /// NU-Recommend only.
    pub weights: WeightConstructionConfig,
    /// Sampling estimate used by NU-Recommend and IPW+Uniform.
    pub sampling: SamplingMethod,
}

impl EstimatorSpec {
    pub fn new(method: Method) -> Self {
        EstimatorSpec {
            method,
            solver: SolverConfig::default(),
            weights: WeightConstructionConfig::default(),
            sampling: SamplingMethod::Rank1,
        }
    }
}

/// How NU-Recommend picks the raw estimator's penalty level.
#[derive(Clone, Copy, Debug)]
pub enum RawSelection<'a> {
    /// Internal 80/20 split of the training observations, by validation RMSE.
    Validation,
    /// Ground truth supplied: pick the path point with the lowest relative
    /// Frobenius error.
    Oracle { b_star: &'a DenseMatrix },
}

const ROLE_NU_SPLIT: u64 = 0x4e55_5350;
const ROLE_NU_SAMPLING: u64 = 0x4e55_5341;
const ROLE_IPW_SAMPLING: u64 = 0x4950_5753;

/// Classic trace-norm penalized regression: all weights equal.
pub fn fit_uniform(obs: &ObservationSet, cfg: &SolverConfig) -> Result<Vec<FitResult>> {
    obs.require_non_empty("uniform fit")?;
    let w = DenseMatrix::constant(
        obs.n_rows(),
        obs.n_cols(),
        1.0 / (obs.n_rows() * obs.n_cols()) as f64,
    );
    fit_path(obs, &w, cfg)
}

/// Empirical margins with unobserved rows/columns floored at 1/(2n), as the
/// rank-1 weight matrix W = R C^T.
pub fn margin_weight_matrix(obs: &ObservationSet) -> Result<DenseMatrix> {
    obs.require_non_empty("margin weights")?;
    let est = estimate_rank1(obs)?;
    let floor = 1.0 / (2.0 * obs.len() as f64);
    let r: Vec<f64> = est.row_margins.iter().map(|&m| m.max(floor)).collect();
    let c: Vec<f64> = est.col_margins.iter().map(|&m| m.max(floor)).collect();
    Ok(DenseMatrix::outer(&r, &c))
}

/// Margin-weighted trace-norm penalized regression.
pub fn fit_margin(obs: &ObservationSet, cfg: &SolverConfig) -> Result<Vec<FitResult>> {
    let w = margin_weight_matrix(obs)?;
    fit_path(obs, &w, cfg)
}

/// Inverse propensity weighting on the loss with an unweighted penalty;
/// per-sample weights 1/(d_r d_c P_hat) normalized to mean 1.
pub fn fit_ipw_uniform(
    obs: &ObservationSet,
    cfg: &SolverConfig,
    sampling: &SamplingEstimate,
) -> Result<Vec<FitResult>> {
    obs.require_non_empty("IPW fit")?;
    if sampling.p_hat.shape() != (obs.n_rows(), obs.n_cols()) {
        return Err(Error::Dimension(format!(
            "sampling estimate is {}x{} but observations live on {}x{}",
            sampling.p_hat.n_rows(),
            sampling.p_hat.n_cols(),
            obs.n_rows(),
            obs.n_cols()
        )));
    }
    let cells = (obs.n_rows() * obs.n_cols()) as f64;
    let mut omega = Vec::with_capacity(obs.len());
    for s in obs.samples() {
        let p = sampling.p_hat.get(s.row, s.col);
        if !(p > 0.0) {
            return Err(Error::Domain {
                row: s.row,
                col: s.col,
                reason: format!("zero propensity {p} at an observed entry"),
            });
        }
        omega.push(1.0 / (cells * p));
    }
    let mean = omega.iter().sum::<f64>() / omega.len() as f64;
    for w in &mut omega {
        *w /= mean;
    }
    let w = DenseMatrix::constant(obs.n_rows(), obs.n_cols(), 1.0 / cells);
    fit_path_with_sample_weights(obs, &w, &omega, cfg)
}

/// Sampling matrix as NU-Recommend consumes it: strictly positive everywhere.
/// Rank-1 margins are floored at 1/(2n); a PMLSVT estimate is floored at
/// 1/(2 n d_r d_c). Renormalized to sum 1.
pub fn floored_sampling_matrix(
    obs: &ObservationSet,
    method: SamplingMethod,
    seed: u64,
) -> Result<DenseMatrix> {
    obs.require_non_empty("sampling estimation")?;
    let n = obs.len() as f64;
    let p = match method {
        SamplingMethod::Rank1 => {
            let est = estimate_rank1(obs)?;
            let floor = 1.0 / (2.0 * n);
            let r: Vec<f64> = est.row_margins.iter().map(|&m| m.max(floor)).collect();
            let c: Vec<f64> = est.col_margins.iter().map(|&m| m.max(floor)).collect();
            DenseMatrix::outer(&r, &c)
        }
        SamplingMethod::Pmlsvt => {
            let est = select_pmlsvt(
                obs,
                &PmlsvtConfig::default_for(obs.len()),
                derive_seed(seed, ROLE_NU_SAMPLING),
            )?;
            let floor = 1.0 / (2.0 * n * (obs.n_rows() * obs.n_cols()) as f64);
            est.p_hat.map(|v| v.max(floor))
        }
    };
    Ok(p.scale(1.0 / p.sum()))
}

/// NU-Recommend stages (3)-(4): given the raw estimate and sampling matrix,
/// construct W and run the weighted path.
pub fn fit_nu_recommend_with_raw(
    obs: &ObservationSet,
    cfg: &SolverConfig,
    weight_cfg: &WeightConstructionConfig,
    b_raw: &DenseMatrix,
    p_hat: &DenseMatrix,
) -> Result<Vec<FitResult>> {
    let w = construct_weights(b_raw, p_hat, weight_cfg)?;
    fit_path(obs, &w, cfg)
}

/// Full NU-Recommend pipeline: margin fit for the raw estimate (penalty level
/// picked per `selection`), sampling estimate, weight construction, then the
/// weighted path.
pub fn fit_nu_recommend(
    obs: &ObservationSet,
    cfg: &SolverConfig,
    weight_cfg: &WeightConstructionConfig,
    sampling_method: SamplingMethod,
    selection: RawSelection<'_>,
    seed: u64,
) -> Result<Vec<FitResult>> {
    obs.require_non_empty("NU-Recommend")?;
    let b_raw = match selection {
        RawSelection::Oracle { b_star } => {
            let path = fit_margin(obs, cfg)?;
            let mut best: Option<(f64, DenseMatrix)> = None;
            for fit in path {
                let err = evaluation::relative_frobenius(&fit.b_hat, b_star)?;
                if best.as_ref().is_none_or(|(e, _)| err < *e) {
                    best = Some((err, fit.b_hat));
                }
            }
            best.expect("non-empty path").1
        }
        RawSelection::Validation => {
            let split_seed = derive_seed(seed, ROLE_NU_SPLIT);
            let (train_idx, val_idx) =
                evaluation::split_indices(obs.len(), 0.8, split_seed)?;
            let train = obs.subset(&train_idx);
            let val = obs.subset(&val_idx);
            let path = fit_margin(&train, cfg)?;
            let mut best_idx = 0;
            let mut best_rmse = f64::INFINITY;
            for (i, fit) in path.iter().enumerate() {
                let rmse = evaluation::test_rmse(&fit.b_hat, &val)?;
                if rmse < best_rmse {
                    best_rmse = rmse;
                    best_idx = i;
                }
            }
            // Refit on all training observations down to the selected level.
            let grid: Vec<f64> = path[..=best_idx].iter().map(|f| f.lambda).collect();
            let refit_cfg = SolverConfig {
                lambda_grid: LambdaGrid::Explicit(grid),
                ..cfg.clone()
            };
            let refit = fit_margin(obs, &refit_cfg)?;
            refit.into_iter().last().expect("non-empty path").b_hat
        }
    };
    let p_hat = floored_sampling_matrix(obs, sampling_method, seed)?;
    fit_nu_recommend_with_raw(obs, cfg, weight_cfg, &b_raw, &p_hat)
}

/// Dispatch one estimator spec. `seed` drives NU-Recommend's internal split
/// and any PMLSVT hold-out masks; `oracle` switches NU-Recommend's raw-lambda
/// selection to ground truth.
pub fn fit_estimator(
    obs: &ObservationSet,
    spec: &EstimatorSpec,
    seed: u64,
    oracle: Option<&DenseMatrix>,
) -> Result<Vec<FitResult>> {
    match spec.method {
        Method::Uniform => fit_uniform(obs, &spec.solver),
        Method::Margin => fit_margin(obs, &spec.solver),
        Method::IpwUniform => {
            let est = match spec.sampling {
                SamplingMethod::Rank1 => estimate_rank1(obs)?,
                SamplingMethod::Pmlsvt => select_pmlsvt(
                    obs,
                    &PmlsvtConfig::default_for(obs.len()),
                    derive_seed(seed, ROLE_IPW_SAMPLING),
                )?,
            };
            fit_ipw_uniform(obs, &spec.solver, &est)
        }
        Method::NuRecommend => {
            let selection = match oracle {
                Some(b_star) => RawSelection::Oracle { b_star },
                None => RawSelection::Validation,
            };
            fit_nu_recommend(obs, &spec.solver, &spec.weights, spec.sampling, selection, seed)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore;
    use crate::sampling::Observation;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_obs(rng: &mut ChaCha8Rng, r: usize, c: usize, n: usize) -> ObservationSet {
        let samples = (0..n)
            .map(|_| Observation {
                row: rng.random_range(0..r),
                col: rng.random_range(0..c),
                value: (rng.random::<f64>() - 0.5) * 4.0,
            })
            .collect();
        ObservationSet::new(r, c, samples).unwrap()
    }

    /// Every entry observed once plus `extra` random repeats: the quadratic
    /// term is strictly convex, so the path minimizers are unique and
    /// equivalence tests can compare tightly.
    fn covering_obs(rng: &mut ChaCha8Rng, r: usize, c: usize, extra: usize) -> ObservationSet {
        let mut samples: Vec<Observation> = (0..r)
            .flat_map(|i| {
                (0..c)
                    .map(|j| Observation {
                        row: i,
                        col: j,
                        value: (rng.random::<f64>() - 0.5) * 4.0,
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        for _ in 0..extra {
            samples.push(Observation {
                row: rng.random_range(0..r),
                col: rng.random_range(0..c),
                value: (rng.random::<f64>() - 0.5) * 4.0,
            });
        }
        ObservationSet::new(r, c, samples).unwrap()
    }

    fn max_b_diff(a: &[FitResult], b: &[FitResult]) -> f64 {
        assert_eq!(a.len(), b.len());
        a.iter()
            .zip(b)
            .map(|(x, y)| x.b_hat.sub(&y.b_hat).unwrap().infinity_norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn uniform_absorbs_constant_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let obs = covering_obs(&mut rng, 6, 5, 15);
        let cfg = SolverConfig {
            lambda_grid: LambdaGrid::Auto { count: 6, min_ratio: 1e-2 },
            tol: 1e-22,
            max_iter: 20_000,
            ..Default::default()
        };
        // Delegation is literal: same call, same bits.
        let via_uniform = fit_uniform(&obs, &cfg).unwrap();
        let normalized = DenseMatrix::constant(6, 5, 1.0 / 30.0);
        let direct = fit_path(&obs, &normalized, &cfg).unwrap();
        assert!(max_b_diff(&via_uniform, &direct) < 1e-10);

        // Constant rescaling of the weight is absorbed by the
        // self-calibrating grid: same minimizers once both runs converge.
        let ones = DenseMatrix::constant(6, 5, 1.0);
        let via_ones = fit_path(&obs, &ones, &cfg).unwrap();
        let d = max_b_diff(&via_uniform, &via_ones);
        assert!(d < 1e-10, "divergence {d}");
    }

    #[test]
    fn weight_scaling_against_lambda() {
        // (c W, lambda / sqrt(c)) leaves the B-space trajectory unchanged;
        // the stopping tolerance lives in N-space and scales with c.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let obs = random_obs(&mut rng, 5, 5, 40);
        let w = DenseMatrix::from_fn(5, 5, |_, _| rng.random::<f64>() + 0.2);
        let grid = vec![0.9, 0.5, 0.2, 0.05];
        let c = 4.0_f64;
        let scaled_grid: Vec<f64> = grid.iter().map(|l| l / c.sqrt()).collect();
        let cfg1 = SolverConfig {
            lambda_grid: LambdaGrid::Explicit(grid),
            tol: 1e-24,
            max_iter: 20_000,
            ..Default::default()
        };
        let cfg2 = SolverConfig {
            lambda_grid: LambdaGrid::Explicit(scaled_grid),
            tol: 1e-24 * c,
            max_iter: 20_000,
            ..Default::default()
        };
        let a = fit_path(&obs, &w, &cfg1).unwrap();
        let b = fit_path(&obs, &w.scale(c), &cfg2).unwrap();
        let d = max_b_diff(&a, &b);
        assert!(d < 1e-9, "B-space trajectories diverged by {d}");
        for (x, y) in a.iter().zip(&b) {
            assert!((y.lambda * c.sqrt() - x.lambda).abs() < 1e-15);
        }
    }

    #[test]
    fn margin_weight_example_and_rank() {
        let obs = ObservationSet::new(
            2,
            2,
            vec![
                Observation { row: 0, col: 0, value: 1.0 },
                Observation { row: 0, col: 0, value: 2.0 },
                Observation { row: 0, col: 1, value: 0.5 },
                Observation { row: 1, col: 0, value: 1.5 },
            ],
        )
        .unwrap();
        let w = margin_weight_matrix(&obs).unwrap();
        let expect = DenseMatrix::from_rows(&[
            &[9.0 / 16.0, 3.0 / 16.0],
            &[3.0 / 16.0, 1.0 / 16.0],
        ])
        .unwrap();
        assert!(w.sub(&expect).unwrap().infinity_norm() < 1e-15);
        assert_eq!(matcore::numerical_rank(&w).unwrap(), 1);
    }

    #[test]
    fn margin_floors_unobserved_rows() {
        let obs = ObservationSet::new(
            3,
            2,
            vec![
                Observation { row: 0, col: 0, value: 1.0 },
                Observation { row: 0, col: 1, value: 1.0 },
            ],
        )
        .unwrap();
        let w = margin_weight_matrix(&obs).unwrap();
        assert!(w.min_entry() > 0.0, "floored margins keep W positive");
        let floor = 1.0 / 4.0; // 1/(2n) with n = 2
        assert!((w.get(1, 0) - floor * 0.5).abs() < 1e-15);
    }

    #[test]
    fn margin_reduces_to_uniform_on_uniform_counts() {
        // One observation per entry: margins are uniform, so the weight is a
        // constant matrix and the path matches the uniform method.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let samples: Vec<Observation> = (0..4)
            .flat_map(|i| {
                let v: Vec<Observation> = (0..4)
                    .map(|j| Observation {
                        row: i,
                        col: j,
                        value: rng.random::<f64>() * 2.0 - 1.0,
                    })
                    .collect();
                v
            })
            .collect();
        let obs = ObservationSet::new(4, 4, samples).unwrap();
        let cfg = SolverConfig {
            lambda_grid: LambdaGrid::Auto { count: 5, min_ratio: 1e-2 },
            ..Default::default()
        };
        let a = fit_margin(&obs, &cfg).unwrap();
        let b = fit_uniform(&obs, &cfg).unwrap();
        assert!(max_b_diff(&a, &b) < 1e-10);
    }

    #[test]
    fn ipw_reduces_to_uniform_when_propensity_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let obs = random_obs(&mut rng, 5, 4, 30);
        let est = SamplingEstimate {
            p_hat: DenseMatrix::constant(5, 4, 1.0 / 20.0),
            row_margins: vec![0.2; 5],
            col_margins: vec![0.25; 4],
            method: SamplingMethod::Rank1,
        };
        let cfg = SolverConfig {
            lambda_grid: LambdaGrid::Auto { count: 5, min_ratio: 1e-2 },
            ..Default::default()
        };
        let a = fit_ipw_uniform(&obs, &cfg, &est).unwrap();
        let b = fit_uniform(&obs, &cfg).unwrap();
        assert!(max_b_diff(&a, &b) < 1e-12);
    }

    #[test]
    fn ipw_invariant_to_propensity_rescaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let obs = random_obs(&mut rng, 4, 4, 25);
        let p = DenseMatrix::from_fn(4, 4, |_, _| rng.random::<f64>() + 0.1);
        let p = p.scale(1.0 / p.sum());
        let cfg = SolverConfig {
            lambda_grid: LambdaGrid::Auto { count: 4, min_ratio: 1e-2 },
            ..Default::default()
        };
        let est = |m: DenseMatrix| SamplingEstimate {
            row_margins: m.row_sums(),
            col_margins: m.col_sums(),
            p_hat: m,
            method: SamplingMethod::Rank1,
        };
        let a = fit_ipw_uniform(&obs, &cfg, &est(p.clone())).unwrap();
        // Doubling then renormalizing is a no-op on the weights.
        let b = fit_ipw_uniform(&obs, &cfg, &est(p.scale(2.0).scale(0.5))).unwrap();
        assert!(max_b_diff(&a, &b) < 1e-12);
    }

    #[test]
    fn ipw_scalar_case_matches_uniform() {
        let obs = ObservationSet::new(
            1,
            1,
            vec![Observation { row: 0, col: 0, value: 3.0 }],
        )
        .unwrap();
        let est = SamplingEstimate {
            p_hat: DenseMatrix::constant(1, 1, 0.37),
            row_margins: vec![0.37],
            col_margins: vec![1.0],
            method: SamplingMethod::Rank1,
        };
        let cfg = SolverConfig {
            lambda_grid: LambdaGrid::Explicit(vec![2.0]),
            tol: 1e-20,
            ..Default::default()
        };
        // Normalization forces omega = 1 when n = 1.
        let fit = fit_ipw_uniform(&obs, &cfg, &est).unwrap();
        assert!((fit[0].b_hat.get(0, 0) - 2.0).abs() < 1e-6);
    }

    #[test]
    fn ipw_zero_propensity_rejected() {
        let obs = ObservationSet::new(
            2,
            2,
            vec![Observation { row: 1, col: 1, value: 1.0 }],
        )
        .unwrap();
        let mut p = DenseMatrix::constant(2, 2, 1.0 / 3.0);
        p.set(1, 1, 0.0);
        let est = SamplingEstimate {
            row_margins: p.row_sums(),
            col_margins: p.col_sums(),
            p_hat: p,
            method: SamplingMethod::Rank1,
        };
        assert!(matches!(
            fit_ipw_uniform(&obs, &SolverConfig::default(), &est),
            Err(Error::Domain { row: 1, col: 1, .. })
        ));
    }

    #[test]
    fn nu_uniform_sampling_constant_raw_matches_uniform() {
        // Constant raw estimate + uniform sampling matrix: the program's
        // optimum is constant, so W is uniform and the weighted path is the
        // uniform path.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let obs = covering_obs(&mut rng, 5, 5, 15);
        let cfg = SolverConfig {
            lambda_grid: LambdaGrid::Auto { count: 5, min_ratio: 1e-2 },
            tol: 1e-20,
            max_iter: 20_000,
            ..Default::default()
        };
        let b_raw = DenseMatrix::constant(5, 5, 1.7);
        let p_unif = DenseMatrix::constant(5, 5, 1.0 / 25.0);
        let wcfg = WeightConstructionConfig::default();
        let nu = fit_nu_recommend_with_raw(&obs, &cfg, &wcfg, &b_raw, &p_unif).unwrap();
        let uni = fit_uniform(&obs, &cfg).unwrap();
        // The subgradient descent leaves a ~1e-6-relative ripple on W in this
        // degenerate (exactly constant) case; the paths agree to that floor.
        assert!(max_b_diff(&nu, &uni) < 1e-4);
    }

    #[test]
    fn nu_degenerate_box_is_propensity_weighting() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let obs = random_obs(&mut rng, 4, 4, 40);
        let cfg = SolverConfig {
            lambda_grid: LambdaGrid::Auto { count: 4, min_ratio: 1e-2 },
            ..Default::default()
        };
        let wcfg = WeightConstructionConfig {
            l_bound: 1.0,
            gamma: 1e9,
            ..Default::default()
        };
        let nu = fit_nu_recommend(
            &obs,
            &cfg,
            &wcfg,
            SamplingMethod::Rank1,
            RawSelection::Validation,
            123,
        )
        .unwrap();
        let p_hat = floored_sampling_matrix(&obs, SamplingMethod::Rank1, 123).unwrap();
        let direct = fit_path(&obs, &p_hat, &cfg).unwrap();
        assert!(max_b_diff(&nu, &direct) < 1e-10);
    }

    #[test]
    fn all_methods_return_finite_fits() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let obs = random_obs(&mut rng, 6, 6, 70);
        let cfg = SolverConfig {
            lambda_grid: LambdaGrid::Auto { count: 4, min_ratio: 1e-2 },
            ..Default::default()
        };
        for method in [
            Method::Uniform,
            Method::Margin,
            Method::IpwUniform,
            Method::NuRecommend,
        ] {
            let spec = EstimatorSpec {
                method,
                solver: cfg.clone(),
                weights: WeightConstructionConfig::default(),
                sampling: SamplingMethod::Rank1,
            };
            let fits = fit_estimator(&obs, &spec, 99, None).unwrap();
            assert_eq!(fits.len(), 4, "{method:?} path length");
            for fit in fits {
                assert_eq!(fit.b_hat.shape(), (6, 6));
                assert!(fit.b_hat.is_finite(), "{method:?} produced non-finite entries");
            }
        }
    }
}
