//! Weighted trace-norm penalized regression solved over a lambda path by
//! proximal gradient descent with backtracking/forthtracking line search,
//! via the change of variables N = sqrt(W) o B.

use crate::error::{Error, Result};
use crate::matcore::{self, DenseMatrix};
use crate::sampling::ObservationSet;

/// Penalty levels for one path solve.
#[derive(Clone, Debug)]
pub enum LambdaGrid {
    /// `count` log-spaced values from lambda_max = (2/n)||X~*(Y)||_op down to
    /// lambda_max * min_ratio.
    Auto { count: usize, min_ratio: f64 },
    /// Explicit strictly-decreasing positive values.
    Explicit(Vec<f64>),
}

impl Default for LambdaGrid {
    fn default() -> Self {
        LambdaGrid::Auto {
            count: 30,
            min_ratio: 1e-3,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub lambda_grid: LambdaGrid,
    /// Step size shrinkage parameter, in (0, 1).
    pub beta: f64,
    pub t_init: f64,
    /// Stop once ||N_old - N||_F^2 <= tol.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            lambda_grid: LambdaGrid::default(),
            beta: 0.5,
            t_init: 1.0,
            tol: 1e-8,
            max_iter: 2000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::Config(format!(
                "beta must lie in (0, 1), got {}",
                self.beta
            )));
        }
        if !(self.t_init > 0.0) {
            return Err(Error::Config(format!(
                "t_init must be positive, got {}",
                self.t_init
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be >= 1".into()));
        }
        match &self.lambda_grid {
            LambdaGrid::Auto { count, min_ratio } => {
                if *count == 0 {
                    return Err(Error::Config("lambda grid count must be >= 1".into()));
                }
                if !(*min_ratio > 0.0 && *min_ratio <= 1.0) {
                    return Err(Error::Config(format!(
                        "lambda min_ratio must lie in (0, 1], got {min_ratio}"
                    )));
                }
            }
            LambdaGrid::Explicit(lambdas) => {
                if lambdas.is_empty() {
                    return Err(Error::Config("lambda grid must be non-empty".into()));
                }
                for w in lambdas.windows(2) {
                    if !(w[1] < w[0]) {
                        return Err(Error::Config(
                            "explicit lambda grid must be strictly decreasing".into(),
                        ));
                    }
                }
                if lambdas.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
                    return Err(Error::Config("lambdas must be finite and positive".into()));
                }
            }
        }
        Ok(())
    }
}

/// Estimate for one penalty level, with the solver trace.
#[derive(Clone, Debug)]
pub struct FitResult {
    pub b_hat: DenseMatrix,
    pub lambda: f64,
    /// Composite objective in N-space after the warm start and each accepted step.
    pub objective_trace: Vec<f64>,
    pub n_iterations: usize,
    pub converged: bool,
}

/// [X(B)]_i = B at the i-th sampled position (multiplicity kept).
pub fn apply_design(b: &DenseMatrix, obs: &ObservationSet) -> Result<Vec<f64>> {
    if b.shape() != (obs.n_rows(), obs.n_cols()) {
        return Err(Error::Dimension(format!(
            "matrix is {}x{} but observations live on {}x{}",
            b.n_rows(),
            b.n_cols(),
            obs.n_rows(),
            obs.n_cols()
        )));
    }
    Ok(obs.samples().iter().map(|s| b.get(s.row, s.col)).collect())
}

/// Adjoint of the design: scatter/accumulate v back onto the grid, so that
/// <X(B), v> = <B, X*(v)>.
pub fn adjoint_design(v: &[f64], obs: &ObservationSet) -> Result<DenseMatrix> {
    if v.len() != obs.len() {
        return Err(Error::Dimension(format!(
            "vector has length {}, expected {} samples",
            v.len(),
            obs.len()
        )));
    }
    let mut out = DenseMatrix::zeros(obs.n_rows(), obs.n_cols());
    for (s, &vi) in obs.samples().iter().zip(v) {
        out.set(s.row, s.col, out.get(s.row, s.col) + vi);
    }
    Ok(out)
}

fn check_positive_weights(w: &DenseMatrix) -> Result<()> {
    for i in 0..w.n_rows() {
        for j in 0..w.n_cols() {
            let v = w.get(i, j);
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Domain {
                    row: i,
                    col: j,
                    reason: format!("weight must be positive and finite, got {v}"),
                });
            }
        }
    }
    Ok(())
}

/// Value of (1/n) * ||Y - X(B)||^2 + lambda * ||W o B||_*.
pub fn weighted_objective(
    b: &DenseMatrix,
    obs: &ObservationSet,
    w: &DenseMatrix,
    lambda: f64,
) -> Result<f64> {
    obs.require_non_empty("objective evaluation")?;
    b.check_same_shape(w)?;
    check_positive_weights(w)?;
    if lambda < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "lambda must be >= 0, got {lambda}"
        )));
    }
    let fitted = apply_design(b, obs)?;
    let n = obs.len() as f64;
    let loss: f64 = obs
        .samples()
        .iter()
        .zip(&fitted)
        .map(|(s, &f)| (s.value - f) * (s.value - f))
        .sum::<f64>()
        / n;
    Ok(loss + lambda * matcore::nuclear_norm(&matcore::hadamard(w, b)?)?)
}

/// Transformed least-squares problem: minimize over N
/// g(N) = (1/n) sum_i omega_i (y_i - s_i N[pos_i])^2 with s_i = 1/sqrt(W)[pos_i].
struct Problem {
    n_rows: usize,
    n_cols: usize,
    flat_pos: Vec<usize>,
    scale: Vec<f64>,
    y: Vec<f64>,
    omega: Vec<f64>,
    n: f64,
}

impl Problem {
    fn new(obs: &ObservationSet, w_sqrt: &DenseMatrix, sample_weights: Option<&[f64]>) -> Result<Self> {
        let n = obs.len();
        let n_cols = obs.n_cols();
        let omega = match sample_weights {
            Some(sw) => {
                if sw.len() != n {
                    return Err(Error::Dimension(format!(
                        "{} sample weights for {} observations",
                        sw.len(),
                        n
                    )));
                }
                if sw.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
                    return Err(Error::InvalidArgument(
                        "sample weights must be finite and >= 0".into(),
                    ));
                }
                sw.to_vec()
            }
            None => vec![1.0; n],
        };
        let mut flat_pos = Vec::with_capacity(n);
        let mut scale = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for s in obs.samples() {
            flat_pos.push(s.row * n_cols + s.col);
            scale.push(1.0 / w_sqrt.get(s.row, s.col));
            y.push(s.value);
        }
        Ok(Problem {
            n_rows: obs.n_rows(),
            n_cols,
            flat_pos,
            scale,
            y,
            omega,
            n: n as f64,
        })
    }

    fn g(&self, n_mat: &DenseMatrix) -> f64 {
        let e = n_mat.entries();
        let mut acc = 0.0;
        for i in 0..self.flat_pos.len() {
            let r = self.y[i] - self.scale[i] * e[self.flat_pos[i]];
            acc += self.omega[i] * r * r;
        }
        acc / self.n
    }

    fn grad(&self, n_mat: &DenseMatrix) -> DenseMatrix {
        let e = n_mat.entries();
        let mut out = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for i in 0..self.flat_pos.len() {
            let fitted = self.scale[i] * e[self.flat_pos[i]];
            let g = (2.0 / self.n) * self.omega[i] * (fitted - self.y[i]) * self.scale[i];
            let p = self.flat_pos[i];
            let cur = out.entries()[p];
            out.set(p / self.n_cols, p % self.n_cols, cur + g);
        }
        out
    }

    /// Quadratic form of the loss along a direction:
    /// q(D) = (2/n) sum_i omega_i (s_i D[pos_i])^2, so that
    /// g(N - tD) = g(N) - t<grad g(N), D> + (t^2/2) q(D) exactly.
    fn quad_form(&self, d: &DenseMatrix) -> f64 {
        let e = d.entries();
        let mut acc = 0.0;
        for i in 0..self.flat_pos.len() {
            let v = self.scale[i] * e[self.flat_pos[i]];
            acc += self.omega[i] * v * v;
        }
        2.0 * acc / self.n
    }

    /// (2/n) ||X~*(omega o Y)||_op; N = 0 is stationary iff lambda >= this.
    /// Computed as the operator norm of -grad(0) so that the first prox step
    /// at lambda = lambda_max thresholds every singular value bit-exactly.
    fn lambda_max(&self) -> Result<f64> {
        let zero = DenseMatrix::zeros(self.n_rows, self.n_cols);
        Ok(matcore::norms(&self.grad(&zero).scale(-1.0))?.operator)
    }
}

#[derive(Clone, Debug)]
struct Trial {
    n_next: DenseMatrix,
    nuclear_next: f64,
    g_next: f64,
    gt_norm2: f64,
    pass: bool,
    t: f64,
    // Kept for the sufficient-decrease observer.
    g_cur: f64,
    inner_grad_gt: f64,
}

/// Per-accepted-step line-search record, for verification hooks.
#[allow(dead_code)]
pub(crate) struct StepRecord {
    pub t: f64,
    pub g_before: f64,
    pub g_after: f64,
    pub inner_grad_gt: f64,
    pub gt_norm2: f64,
}

fn inner(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    a.entries().iter().zip(b.entries()).map(|(x, y)| x * y).sum()
}

fn eval_trial(
    prob: &Problem,
    n_mat: &DenseMatrix,
    grad: &DenseMatrix,
    g_cur: f64,
    lambda: f64,
    t: f64,
) -> Result<Trial> {
    let step = n_mat.zip_map(grad, |n, g| n - t * g)?;
    let mut fac = matcore::svd(&step)?;
    for s in &mut fac.singular_values {
        *s = (*s - lambda * t).max(0.0);
    }
    let nuclear_next: f64 = fac.singular_values.iter().sum();
    let n_next = fac.reconstruct();
    let gt = n_mat.zip_map(&n_next, |a, b| (a - b) / t)?;
    let gt_norm2 = gt.entries().iter().map(|x| x * x).sum::<f64>();
    let g_next = prob.g(&n_next);
    let inner_grad_gt = inner(grad, &gt);
    // The loss is exactly quadratic, so the sufficient-decrease inequality
    //   g(N - tG) <= g(N) - t <grad, G> + (t/2) ||G||_F^2
    // is equivalent to t * q(G) <= ||G||_F^2. The latter form is free of the
    // catastrophic cancellation that stalls the evaluated form near optima.
    let pass = t * prob.quad_form(&gt) <= gt_norm2;
    Ok(Trial {
        n_next,
        nuclear_next,
        g_next,
        gt_norm2,
        pass,
        t,
        g_cur,
        inner_grad_gt,
    })
}

/// Step (ii) of the iteration: start from t_init; shrink t := beta*t until the
/// sufficient-decrease test passes, or enlarge t := t/beta while it passes and
/// then step back once.
fn line_search(
    prob: &Problem,
    n_mat: &DenseMatrix,
    grad: &DenseMatrix,
    g_cur: f64,
    lambda: f64,
    cfg: &SolverConfig,
) -> Result<Trial> {
    const MAX_SHRINK: usize = 200;
    const MAX_ENLARGE: usize = 64;

    let first = eval_trial(prob, n_mat, grad, g_cur, lambda, cfg.t_init)?;
    if first.gt_norm2 <= f64::MIN_POSITIVE {
        // Fixed point; no movement at any step size.
        return Ok(first);
    }
    if !first.pass {
        let mut t = cfg.t_init;
        for _ in 0..MAX_SHRINK {
            t *= cfg.beta;
            let trial = eval_trial(prob, n_mat, grad, g_cur, lambda, t)?;
            if trial.pass {
                return Ok(trial);
            }
        }
        // The exact sufficient-decrease margin is O(t * ||G||^2); when that
        // falls under evaluation roundoff the test fails at every step size.
        // The iterate is stationary to machine precision: report no movement.
        Ok(Trial {
            n_next: n_mat.clone(),
            nuclear_next: matcore::nuclear_norm(n_mat)?,
            g_next: g_cur,
            gt_norm2: 0.0,
            pass: true,
            t: cfg.t_init,
            g_cur,
            inner_grad_gt: 0.0,
        })
    } else {
        let mut best = first;
        for _ in 0..MAX_ENLARGE {
            let t = best.t / cfg.beta;
            let trial = eval_trial(prob, n_mat, grad, g_cur, lambda, t)?;
            if trial.pass {
                best = trial;
            } else {
                break;
            }
        }
        Ok(best)
    }
}

fn fit_path_inner(
    obs: &ObservationSet,
    w: &DenseMatrix,
    sample_weights: Option<&[f64]>,
    cfg: &SolverConfig,
    mut observer: Option<&mut dyn FnMut(&StepRecord)>,
) -> Result<Vec<FitResult>> {
    cfg.validate()?;
    obs.require_non_empty("fit_path")?;
    if w.shape() != (obs.n_rows(), obs.n_cols()) {
        return Err(Error::Dimension(format!(
            "weight matrix is {}x{} but observations live on {}x{}",
            w.n_rows(),
            w.n_cols(),
            obs.n_rows(),
            obs.n_cols()
        )));
    }
    check_positive_weights(w)?;
    let w_sqrt = matcore::elementwise_sqrt(w)?;
    let prob = Problem::new(obs, &w_sqrt, sample_weights)?;

    let grid: Vec<f64> = match &cfg.lambda_grid {
        LambdaGrid::Explicit(l) => l.clone(),
        LambdaGrid::Auto { count, min_ratio } => {
            let lambda_max = prob.lambda_max()?;
            if !(lambda_max > 0.0) {
                return Err(Error::Config(
                    "auto lambda grid undefined: the adjoint of the observations is zero".into(),
                ));
            }
            // lambda_max times a factor that depends only on the grid shape,
            // so the whole grid scales exactly with the problem.
            if *count == 1 {
                vec![lambda_max]
            } else {
                (0..*count)
                    .map(|i| {
                        lambda_max * (min_ratio.ln() * i as f64 / (*count - 1) as f64).exp()
                    })
                    .collect()
            }
        }
    };

    let mut n_mat = DenseMatrix::zeros(obs.n_rows(), obs.n_cols());
    let mut results = Vec::with_capacity(grid.len());
    for &lambda in &grid {
        let mut trace =
            vec![prob.g(&n_mat) + lambda * matcore::nuclear_norm(&n_mat)?];
        let mut converged = false;
        let mut n_iterations = 0;
        for _ in 0..cfg.max_iter {
            n_iterations += 1;
            let g_cur = prob.g(&n_mat);
            let grad = prob.grad(&n_mat);
            let trial = line_search(&prob, &n_mat, &grad, g_cur, lambda, cfg)?;
            if let Some(obs_fn) = observer.as_mut() {
                obs_fn(&StepRecord {
                    t: trial.t,
                    g_before: trial.g_cur,
                    g_after: trial.g_next,
                    inner_grad_gt: trial.inner_grad_gt,
                    gt_norm2: trial.gt_norm2,
                });
            }
            let diff2 = n_mat
                .entries()
                .iter()
                .zip(trial.n_next.entries())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
            n_mat = trial.n_next;
            trace.push(trial.g_next + lambda * trial.nuclear_next);
            if diff2 <= cfg.tol {
                converged = true;
                break;
            }
        }
        let b_hat = matcore::hadamard_div(&n_mat, &w_sqrt)?;
        b_hat.check_finite("estimate")?;
        results.push(FitResult {
            b_hat,
            lambda,
            objective_trace: trace,
            n_iterations,
            converged,
        });
    }
    Ok(results)
}

/// Solve min_B (1/n) ||Y - X(B)||^2 + lambda ||sqrt(W) o B||_* for each lambda
/// on the grid, warm-starting down the path from N = 0, and report
/// B_hat = sqrt(W)^-1 o N_hat.
pub fn fit_path(obs: &ObservationSet, w: &DenseMatrix, cfg: &SolverConfig) -> Result<Vec<FitResult>> {
    fit_path_inner(obs, w, None, cfg, None)
}

/// Same solver with per-sample loss weights (inverse propensity weighting).
pub(crate) fn fit_path_with_sample_weights(
    obs: &ObservationSet,
    w: &DenseMatrix,
    sample_weights: &[f64],
    cfg: &SolverConfig,
) -> Result<Vec<FitResult>> {
    fit_path_inner(obs, w, Some(sample_weights), cfg, None)
}

/// lambda_max for an unweighted problem: the smallest penalty that zeroes the fit.
pub fn lambda_max_unweighted(obs: &ObservationSet) -> Result<f64> {
    let ones = DenseMatrix::constant(obs.n_rows(), obs.n_cols(), 1.0);
    let prob = Problem::new(obs, &ones, None)?;
    prob.lambda_max()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::Observation;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single_obs(value: f64) -> ObservationSet {
        ObservationSet::new(1, 1, vec![Observation { row: 0, col: 0, value }]).unwrap()
    }

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

    #[test]
    fn objective_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let o = random_obs(&mut rng, 3, 3, 12);
        let w = DenseMatrix::constant(3, 3, 1.0);
        let zero = DenseMatrix::zeros(3, 3);
        let mean_sq: f64 =
            o.samples().iter().map(|s| s.value * s.value).sum::<f64>() / o.len() as f64;
        assert!((weighted_objective(&zero, &o, &w, 3.0).unwrap() - mean_sq).abs() < 1e-12);

        // lambda = 0 and interpolating fit: objective vanishes.
        let mut interp = DenseMatrix::zeros(2, 2);
        let o2 = ObservationSet::new(
            2,
            2,
            vec![
                Observation { row: 0, col: 1, value: 5.0 },
                Observation { row: 1, col: 0, value: -2.0 },
            ],
        )
        .unwrap();
        interp.set(0, 1, 5.0);
        interp.set(1, 0, -2.0);
        let w2 = DenseMatrix::constant(2, 2, 1.0);
        assert!(weighted_objective(&interp, &o2, &w2, 0.0).unwrap().abs() < 1e-15);

        // Scalar case: (3-2)^2 + 2*2 = 5.
        let o3 = single_obs(3.0);
        let b = DenseMatrix::constant(1, 1, 2.0);
        let w3 = DenseMatrix::constant(1, 1, 1.0);
        assert!((weighted_objective(&b, &o3, &w3, 2.0).unwrap() - 5.0).abs() < 1e-12);

        let bad_w = DenseMatrix::from_rows(&[&[1.0, 0.0], &[1.0, 1.0]]).unwrap();
        assert!(matches!(
            weighted_objective(&zero_2x2(), &o2, &bad_w, 1.0),
            Err(Error::Domain { row: 0, col: 1, .. })
        ));
    }

    fn zero_2x2() -> DenseMatrix {
        DenseMatrix::zeros(2, 2)
    }

    #[test]
    fn design_examples_and_duality() {
        let b = DenseMatrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        let o = ObservationSet::new(2, 2, vec![Observation { row: 0, col: 1, value: 0.0 }]).unwrap();
        assert_eq!(apply_design(&b, &o).unwrap(), vec![2.0]);

        let adj = adjoint_design(&[1.0], &o).unwrap();
        assert_eq!(adj, DenseMatrix::from_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap());

        // <X(B), v> = <B, X*(v)> on a random instance.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let o = random_obs(&mut rng, 4, 4, 20);
        let b = DenseMatrix::from_fn(4, 4, |_, _| rng.random::<f64>() - 0.5);
        let v: Vec<f64> = (0..20).map(|_| rng.random::<f64>() - 0.5).collect();
        let lhs: f64 = apply_design(&b, &o)
            .unwrap()
            .iter()
            .zip(&v)
            .map(|(a, b)| a * b)
            .sum();
        let rhs: f64 = adjoint_design(&v, &o)
            .unwrap()
            .entries()
            .iter()
            .zip(b.entries())
            .map(|(a, b)| a * b)
            .sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn transformed_design_matches_original() {
        // X~(N) = X(B) when N = sqrt(W) o B.
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let o = random_obs(&mut rng, 5, 4, 30);
        let w = DenseMatrix::from_fn(5, 4, |_, _| rng.random::<f64>() * 2.0 + 0.1);
        let b = DenseMatrix::from_fn(5, 4, |_, _| rng.random::<f64>() - 0.5);
        let w_sqrt = matcore::elementwise_sqrt(&w).unwrap();
        let n_mat = matcore::hadamard(&w_sqrt, &b).unwrap();
        let prob = Problem::new(&o, &w_sqrt, None).unwrap();

        let direct = apply_design(&b, &o).unwrap();
        let e = n_mat.entries();
        for (i, &d) in direct.iter().enumerate() {
            let transformed = prob.scale[i] * e[prob.flat_pos[i]];
            assert!(
                (transformed - d).abs() <= 1e-13 * (1.0 + d.abs()),
                "sample {i}: {transformed} vs {d}"
            );
        }
    }

    #[test]
    fn scalar_fit_matches_soft_threshold() {
        // min (3-b)^2 + 2|b| has minimizer 2.
        let o = single_obs(3.0);
        let w = DenseMatrix::constant(1, 1, 1.0);
        let cfg = SolverConfig {
            lambda_grid: LambdaGrid::Explicit(vec![2.0]),
            tol: 1e-20,
            ..Default::default()
        };
        let fits = fit_path(&o, &w, &cfg).unwrap();
        assert!((fits[0].b_hat.get(0, 0) - 2.0).abs() < 1e-6);
        assert!(fits[0].converged);
    }

    #[test]
    fn huge_lambda_zeroes_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let o = random_obs(&mut rng, 6, 5, 40);
        let w = DenseMatrix::constant(6, 5, 1.0);
        let lmax = lambda_max_unweighted(&o).unwrap();
        let cfg = SolverConfig {
            lambda_grid: LambdaGrid::Explicit(vec![lmax * 1.5, lmax]),
            ..Default::default()
        };
        let fits = fit_path(&o, &w, &cfg).unwrap();
        for fit in &fits {
            assert!(fit.converged);
            assert!(
                fit.b_hat.entries().iter().all(|&x| x == 0.0),
                "lambda = {} should zero the fit exactly",
                fit.lambda
            );
        }
    }

    #[test]
    fn noiseless_rank1_interpolation_limit() {
        let u = [1.0, -0.5, 2.0, 0.7, 1.3];
        let v = [0.8, 1.5, -1.0, 0.3, 2.0];
        let b_star = DenseMatrix::outer(&u, &v);
        let samples: Vec<Observation> = (0..5)
            .flat_map(|i| {
                let b = &b_star;
                (0..5).map(move |j| Observation { row: i, col: j, value: b.get(i, j) })
            })
            .collect();
        let o = ObservationSet::new(5, 5, samples).unwrap();
        let w = DenseMatrix::constant(5, 5, 1.0);
        let cfg = SolverConfig {
            lambda_grid: LambdaGrid::Auto { count: 16, min_ratio: 1e-5 },
            tol: 1e-16,
            max_iter: 5000,
            ..Default::default()
        };
        let fits = fit_path(&o, &w, &cfg).unwrap();
        let last = fits.last().unwrap();
        let rel = last.b_hat.sub(&b_star).unwrap().frobenius_norm() / b_star.frobenius_norm();
        assert!(rel <= 1e-3, "relative error {rel} at smallest lambda");
    }

    #[test]
    fn objective_trace_non_increasing_and_sufficient_decrease() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let o = random_obs(&mut rng, 8, 7, 60);
        let w = DenseMatrix::from_fn(8, 7, |_, _| rng.random::<f64>() + 0.2);
        let cfg = SolverConfig {
            lambda_grid: LambdaGrid::Auto { count: 8, min_ratio: 1e-2 },
            ..Default::default()
        };
        let mut violations = 0usize;
        let mut steps = 0usize;
        let mut check = |rec: &StepRecord| {
            steps += 1;
            let rhs = rec.g_before - rec.t * rec.inner_grad_gt + 0.5 * rec.t * rec.gt_norm2;
            if rec.g_after > rhs + 1e-9 * (1.0 + rhs.abs()) {
                violations += 1;
            }
        };
        let fits = fit_path_inner(&o, &w, None, &cfg, Some(&mut check)).unwrap();
        assert!(steps > 0);
        assert_eq!(violations, 0, "accepted steps must satisfy sufficient decrease");
        for fit in &fits {
            for pair in fit.objective_trace.windows(2) {
                assert!(
                    pair[1] <= pair[0] + 1e-10,
                    "objective increased at lambda = {}",
                    fit.lambda
                );
            }
        }
    }

    #[test]
    fn path_monotonicity_in_solved_family() {
        // Along the warm-started path the solved objective (weights sqrt(w))
        // is non-increasing and the penalized nuclear norm non-decreasing as
        // lambda decreases.
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let o = random_obs(&mut rng, 6, 6, 50);
        let w = DenseMatrix::from_fn(6, 6, |_, _| rng.random::<f64>() + 0.3);
        let w_sqrt = matcore::elementwise_sqrt(&w).unwrap();
        let cfg = SolverConfig {
            lambda_grid: LambdaGrid::Auto { count: 10, min_ratio: 1e-2 },
            tol: 1e-12,
            ..Default::default()
        };
        let fits = fit_path(&o, &w, &cfg).unwrap();
        let mut prev_obj = f64::INFINITY;
        let mut prev_nuc = -f64::INFINITY;
        for fit in &fits {
            let obj = weighted_objective(&fit.b_hat, &o, &w_sqrt, fit.lambda).unwrap();
            assert!(
                obj <= prev_obj + 1e-6,
                "objective rose along the path at lambda = {}",
                fit.lambda
            );
            let nuc =
                matcore::nuclear_norm(&matcore::hadamard(&w_sqrt, &fit.b_hat).unwrap()).unwrap();
            assert!(
                nuc >= prev_nuc - 1e-6,
                "penalty norm shrank as lambda decreased at {}",
                fit.lambda
            );
            prev_obj = obj;
            prev_nuc = nuc;
        }
    }

    #[test]
    fn max_iter_flags_unconverged() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let o = random_obs(&mut rng, 6, 6, 60);
        let w = DenseMatrix::constant(6, 6, 1.0);
        let cfg = SolverConfig {
            lambda_grid: LambdaGrid::Auto { count: 2, min_ratio: 1e-3 },
            tol: 1e-30,
            max_iter: 3,
            ..Default::default()
        };
        let fits = fit_path(&o, &w, &cfg).unwrap();
        assert!(fits.iter().any(|f| !f.converged));
        assert!(fits.iter().all(|f| f.n_iterations <= 3));
    }

    #[test]
    fn config_validation_rejects_bad_grids() {
        let bad = |grid: LambdaGrid| SolverConfig {
            lambda_grid: grid,
            ..Default::default()
        };
        assert!(bad(LambdaGrid::Explicit(vec![])).validate().is_err());
        assert!(bad(LambdaGrid::Explicit(vec![0.1, 0.5])).validate().is_err());
        assert!(bad(LambdaGrid::Explicit(vec![0.5, 0.5])).validate().is_err());
        assert!(bad(LambdaGrid::Explicit(vec![0.5, -0.1])).validate().is_err());
        assert!(bad(LambdaGrid::Auto { count: 0, min_ratio: 0.1 }).validate().is_err());
        assert!(bad(LambdaGrid::Auto { count: 5, min_ratio: 1.5 }).validate().is_err());
        assert!(bad(LambdaGrid::Explicit(vec![0.5, 0.1])).validate().is_ok());
        assert!(SolverConfig { beta: 1.0, ..Default::default() }.validate().is_err());
        assert!(SolverConfig { t_init: 0.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn zero_weight_rejected() {
        let o = single_obs(1.0);
        let w = DenseMatrix::constant(1, 1, 0.0);
        assert!(matches!(
            fit_path(&o, &w, &SolverConfig::default()),
            Err(Error::Domain { .. })
        ));
    }
}
