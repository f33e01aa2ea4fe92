//! The non-uniform sampling distribution: counting matrix, rank-1 margin
//! estimator, PMLSVT Poisson recovery, and the categorical sampler used by
//! synthetic experiments.

use crate::error::{Error, Result};
use crate::matcore::{svd, DenseMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// One sampled entry: position plus observed value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

/// A list of (row, col, value) samples over a d_r x d_c grid. Multiplicity is
/// allowed: the same entry may be observed several times with different noise.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationSet {
    n_rows: usize,
    n_cols: usize,
    samples: Vec<Observation>,
}

impl ObservationSet {
    pub fn new(n_rows: usize, n_cols: usize, samples: Vec<Observation>) -> Result<Self> {
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::Dimension(format!(
                "observation grid must be positive, got {n_rows}x{n_cols}"
            )));
        }
        for (i, s) in samples.iter().enumerate() {
            if s.row >= n_rows || s.col >= n_cols {
                return Err(Error::Dimension(format!(
                    "sample {i} at ({}, {}) outside {n_rows}x{n_cols}",
                    s.row, s.col
                )));
            }
            if !s.value.is_finite() {
                return Err(Error::Domain {
                    row: s.row,
                    col: s.col,
                    reason: format!("non-finite sample value at sample {i}"),
                });
            }
        }
        Ok(ObservationSet {
            n_rows,
            n_cols,
            samples,
        })
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    #[inline]
    pub fn samples(&self) -> &[Observation] {
        &self.samples
    }

    /// New set with the same grid holding the samples at `indices`.
    pub fn subset(&self, indices: &[usize]) -> ObservationSet {
        ObservationSet {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            samples: indices.iter().map(|&i| self.samples[i]).collect(),
        }
    }

    pub(crate) fn require_non_empty(&self, what: &str) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::InsufficientData(format!(
                "{what} requires at least one observation"
            )));
        }
        Ok(())
    }

    /// CSV with header `row,col,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row,col,value\n");
        for s in &self.samples {
            out.push_str(&format!("{},{},{}\n", s.row, s.col, s.value));
        }
        out
    }

    pub fn from_csv(text: &str, n_rows: usize, n_cols: usize) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim() == "row,col,value" => {}
            Some((_, header)) => {
                return Err(Error::Parse {
                    line: 1,
                    reason: format!("expected header `row,col,value`, got {header:?}"),
                })
            }
            None => {
                return Err(Error::Parse {
                    line: 0,
                    reason: "empty observation CSV".into(),
                })
            }
        }
        let mut samples = Vec::new();
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(Error::Parse {
                    line: idx + 1,
                    reason: format!("expected 3 fields, got {}", fields.len()),
                });
            }
            let parse_usize = |tok: &str| {
                tok.trim().parse::<usize>().map_err(|e| Error::Parse {
                    line: idx + 1,
                    reason: format!("bad index {tok:?}: {e}"),
                })
            };
            let value = fields[2].trim().parse::<f64>().map_err(|e| Error::Parse {
                line: idx + 1,
                reason: format!("bad value {:?}: {e}", fields[2]),
            })?;
            samples.push(Observation {
                row: parse_usize(fields[0])?,
                col: parse_usize(fields[1])?,
                value,
            });
        }
        ObservationSet::new(n_rows, n_cols, samples)
    }
}

/// Which estimator produced a sampling estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMethod {
    Rank1,
    Pmlsvt,
}

/// Estimated sampling matrix with its row/column margins.
#[derive(Clone, Debug)]
pub struct SamplingEstimate {
    pub p_hat: DenseMatrix,
    pub row_margins: Vec<f64>,
    pub col_margins: Vec<f64>,
    pub method: SamplingMethod,
}

impl SamplingEstimate {
    fn from_p_hat(p_hat: DenseMatrix, method: SamplingMethod) -> Self {
        let row_margins = p_hat.row_sums();
        let col_margins = p_hat.col_sums();
        SamplingEstimate {
            p_hat,
            row_margins,
            col_margins,
            method,
        }
    }
}

/// M_jk = number of samples at (j, k).
pub fn counting_matrix(obs: &ObservationSet) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(obs.n_rows(), obs.n_cols());
    for s in obs.samples() {
        m.set(s.row, s.col, m.get(s.row, s.col) + 1.0);
    }
    m
}

/// Rank-1 estimate: empirical margins R_j = sum_k M_jk / n, C_k = sum_j M_jk / n,
/// and P = R C^T.
pub fn estimate_rank1(obs: &ObservationSet) -> Result<SamplingEstimate> {
    obs.require_non_empty("rank-1 sampling estimation")?;
    let m = counting_matrix(obs);
    let n = obs.len() as f64;
    let row_margins: Vec<f64> = m.row_sums().iter().map(|s| s / n).collect();
    let col_margins: Vec<f64> = m.col_sums().iter().map(|s| s / n).collect();
    let p_hat = DenseMatrix::outer(&row_margins, &col_margins);
    Ok(SamplingEstimate {
        p_hat,
        row_margins,
        col_margins,
        method: SamplingMethod::Rank1,
    })
}

/// Parameters for the PMLSVT Poisson recovery.
#[derive(Clone, Debug)]
pub struct PmlsvtConfig {
    pub lambdas: Vec<f64>,
    /// Step-size backtracking factor, > 1.
    pub eta: f64,
    pub t0: f64,
    pub max_iter: usize,
    /// Stop once consecutive penalized costs differ by less than this.
    pub tol: f64,
}

impl PmlsvtConfig {
    /// Default grid {2^-12, ..., 2^8} * sqrt(n) with eta = 2, t0 = 1,
    /// 500 iterations, cost tolerance 1e-5. The grid reaches well below
    /// sqrt(n) because the Poisson curvature scales like 1/count: on dense
    /// counting matrices the upper half of the grid shrinks everything to
    /// uniform, and the held-out selection needs the smaller levels.
    pub fn default_for(n_samples: usize) -> Self {
        let root_n = (n_samples as f64).sqrt();
        PmlsvtConfig {
            lambdas: (-12..=8).map(|k| f64::powi(2.0, k) * root_n).collect(),
            eta: 2.0,
            t0: 1.0,
            max_iter: 500,
            tol: PMLSVT_TOL,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.lambdas.is_empty() {
            return Err(Error::Config("PMLSVT needs a non-empty lambda grid".into()));
        }
        if self.lambdas.iter().any(|&l| !(l >= 0.0) || !l.is_finite()) {
            return Err(Error::Config("PMLSVT lambdas must be finite and >= 0".into()));
        }
        if !(self.eta > 1.0) {
            return Err(Error::Config(format!("PMLSVT eta must be > 1, got {}", self.eta)));
        }
        if !(self.t0 > 0.0) {
            return Err(Error::Config(format!("PMLSVT t0 must be > 0, got {}", self.t0)));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("PMLSVT max_iter must be >= 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("PMLSVT tol must be > 0, got {}", self.tol)));
        }
        Ok(())
    }
}

/// Whether the iterate is rescaled onto {X >= 0, sum(X) = n} each step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PmlsvtProjection {
    /// P(Z) = (n / sum(Z+)) * Z+ with n the total sample count.
    ScaleToTotal,
    /// Raw proximal iterate; used to check the unconstrained fixed points.
    None,
}

/// One PMLSVT solve at a single lambda.
#[derive(Clone, Debug)]
pub struct PmlsvtSolution {
    /// Unnormalized intensity iterate (scale of the counting matrix).
    pub x: DenseMatrix,
    pub lambda: f64,
    /// Penalized cost f(X) + lambda ||X||_* after each accepted step.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
}

const LOG_CLAMP: f64 = 1e-12;
const PMLSVT_TOL: f64 = 1e-5;

fn poisson_objective(x: &DenseMatrix, counts: &DenseMatrix) -> f64 {
    let mut f = 0.0;
    for (xi, mi) in x.entries().iter().zip(counts.entries()) {
        if *mi > 0.0 {
            f += xi - mi * xi.max(LOG_CLAMP).ln();
        }
    }
    f
}

fn poisson_gradient(x: &DenseMatrix, counts: &DenseMatrix) -> DenseMatrix {
    x.zip_map(counts, |xi, mi| {
        if mi > 0.0 {
            1.0 - mi / xi.max(LOG_CLAMP)
        } else {
            0.0
        }
    })
    .expect("shapes agree")
}

fn project_scale(z: &DenseMatrix, total: f64) -> DenseMatrix {
    let plus = z.map(|v| v.max(0.0));
    let s = plus.sum();
    if s <= 0.0 {
        // Keep the iterate in the feasible cone.
        DenseMatrix::constant(z.n_rows(), z.n_cols(), total / (z.n_rows() * z.n_cols()) as f64)
    } else {
        plus.scale(total / s)
    }
}

/// Proximal iteration for the Poisson nuclear-norm objective at one lambda,
/// starting from `init`. The monotonicity check and stopping rule use the
/// penalized cost f(X) + lambda ||X||_* (the smooth part alone is already
/// stationary at X = M when every entry is observed, so comparing raw f would
/// reject every step). Backtracks t <- eta*t whenever the cost increases and
/// stops once consecutive costs differ by less than 1e-5.
fn pmlsvt_single(
    counts: &DenseMatrix,
    init: DenseMatrix,
    lambda: f64,
    cfg: &PmlsvtConfig,
    projection: PmlsvtProjection,
    total: f64,
) -> Result<PmlsvtSolution> {
    const MAX_BACKTRACK: usize = 200;
    let penalized = |x: &DenseMatrix| -> Result<f64> {
        let nuc: f64 = svd(x)?.singular_values.iter().sum();
        Ok(poisson_objective(x, counts) + lambda * nuc)
    };
    let mut x = init;
    let mut f_cur = penalized(&x)?;
    if !f_cur.is_finite() {
        return Err(Error::SolverFailure(format!(
            "PMLSVT objective non-finite at initialization (lambda = {lambda})"
        )));
    }
    let mut trace = vec![f_cur];
    let mut t = cfg.t0;
    let mut converged = false;

    for _ in 0..cfg.max_iter {
        let grad = poisson_gradient(&x, counts);
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACK {
            let c = x.zip_map(&grad, |xv, gv| xv - gv / t)?;
            let mut fac = svd(&c)?;
            for s in &mut fac.singular_values {
                *s = (*s - lambda / t).max(0.0);
            }
            let z = fac.reconstruct();
            let x_new = match projection {
                PmlsvtProjection::ScaleToTotal => project_scale(&z, total),
                PmlsvtProjection::None => z,
            };
            let f_new = penalized(&x_new)?;
            if !f_new.is_finite() {
                return Err(Error::SolverFailure(format!(
                    "PMLSVT objective non-finite during iteration (lambda = {lambda})"
                )));
            }
            if f_new > f_cur {
                t *= cfg.eta;
                continue;
            }
            accepted = Some((x_new, f_new));
            break;
        }
        let Some((x_new, f_new)) = accepted else {
            // Step size collapsed without progress; iterate is stationary.
            converged = true;
            break;
        };
        let delta = (f_cur - f_new).abs();
        x = x_new;
        f_cur = f_new;
        trace.push(f_cur);
        if delta < cfg.tol {
            converged = true;
            break;
        }
    }

    Ok(PmlsvtSolution {
        x,
        lambda,
        objective_trace: trace,
        converged,
    })
}

/// PMLSVT solves over `cfg.lambdas` in the given order, warm-starting each
/// lambda from the previous iterate; the first starts at the counting matrix.
pub fn pmlsvt_path(
    counts: &DenseMatrix,
    cfg: &PmlsvtConfig,
    projection: PmlsvtProjection,
) -> Result<Vec<PmlsvtSolution>> {
    cfg.validate()?;
    let total = counts.sum();
    if total <= 0.0 {
        return Err(Error::DegenerateInput(
            "PMLSVT requires a counting matrix with at least one observation".into(),
        ));
    }
    let mut out = Vec::with_capacity(cfg.lambdas.len());
    let mut x = counts.clone();
    for &lambda in &cfg.lambdas {
        let sol = pmlsvt_single(counts, x, lambda, cfg, projection, total)?;
        x = sol.x.clone();
        out.push(sol);
    }
    Ok(out)
}

/// Low-rank sampling matrix estimation: one normalized estimate per lambda.
pub fn estimate_pmlsvt(obs: &ObservationSet, cfg: &PmlsvtConfig) -> Result<Vec<SamplingEstimate>> {
    obs.require_non_empty("PMLSVT sampling estimation")?;
    let counts = counting_matrix(obs);
    let sols = pmlsvt_path(&counts, cfg, PmlsvtProjection::ScaleToTotal)?;
    Ok(sols
        .into_iter()
        .map(|sol| {
            let s = sol.x.sum();
            SamplingEstimate::from_p_hat(sol.x.scale(1.0 / s), SamplingMethod::Pmlsvt)
        })
        .collect())
}

/// Grid selection by held-out Poisson log-likelihood on a 10% mask of the
/// observed samples, then a refit on everything at the winning lambda.
pub fn select_pmlsvt(
    obs: &ObservationSet,
    cfg: &PmlsvtConfig,
    holdout_seed: u64,
) -> Result<SamplingEstimate> {
    obs.require_non_empty("PMLSVT sampling estimation")?;
    cfg.validate()?;
    if cfg.lambdas.len() == 1 {
        let mut est = estimate_pmlsvt(obs, cfg)?;
        return Ok(est.pop().expect("one lambda"));
    }
    let n = obs.len();
    let n_heldout = (n / 10).max(1);
    if n_heldout >= n {
        return Err(Error::InsufficientData(
            "PMLSVT grid selection needs at least two observations".into(),
        ));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(holdout_seed);
    shuffle(&mut indices, &mut rng);
    let (held, kept) = indices.split_at(n_heldout);
    let train = obs.subset(kept);
    let test_counts = counting_matrix(&obs.subset(held));
    let n_test = n_heldout as f64;

    let candidates = estimate_pmlsvt(&train, cfg)?;
    let mut best = 0usize;
    let mut best_ll = f64::NEG_INFINITY;
    for (i, est) in candidates.iter().enumerate() {
        let mut ll = 0.0;
        for (m_te, p) in test_counts.entries().iter().zip(est.p_hat.entries()) {
            let mu = (n_test * p).max(LOG_CLAMP);
            ll += m_te * mu.ln() - mu;
        }
        if ll > best_ll {
            best_ll = ll;
            best = i;
        }
    }
    let refit_cfg = PmlsvtConfig {
        lambdas: vec![cfg.lambdas[best]],
        ..cfg.clone()
    };
    let mut est = estimate_pmlsvt(obs, &refit_cfg)?;
    Ok(est.pop().expect("one lambda"))
}

/// Fisher–Yates with our own RNG calls so the stream layout is pinned.
pub(crate) fn shuffle(indices: &mut [usize], rng: &mut ChaCha8Rng) {
    for i in (1..indices.len()).rev() {
        let j = rng.random_range(0..=i);
        indices.swap(i, j);
    }
}

/// Draw `n` i.i.d. entries from the categorical distribution `p` (with
/// replacement) and observe `ground_truth` there plus Gaussian noise.
/// Deterministic given the seed: positions come from stream 1, noise from
/// stream 2 of a ChaCha8 generator.
pub fn draw_observations(
    p: &DenseMatrix,
    ground_truth: &DenseMatrix,
    n: usize,
    noise_sd: f64,
    rng_seed: u64,
) -> Result<ObservationSet> {
    p.check_same_shape(ground_truth)?;
    ground_truth.check_finite("ground truth")?;
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be >= 1".into()));
    }
    if !(noise_sd >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "noise_sd must be >= 0, got {noise_sd}"
        )));
    }
    for i in 0..p.n_rows() {
        for j in 0..p.n_cols() {
            if p.get(i, j) < 0.0 {
                return Err(Error::Domain {
                    row: i,
                    col: j,
                    reason: format!("negative probability {}", p.get(i, j)),
                });
            }
        }
    }
    let total = p.sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "probabilities must sum to 1 within 1e-9, got {total}"
        )));
    }

    let mut cum = Vec::with_capacity(p.entries().len());
    let mut acc = 0.0;
    for &v in p.entries() {
        acc += v;
        cum.push(acc);
    }
    let norm = acc; // kill residual rounding so the last bucket closes at 1

    let mut pos_rng = ChaCha8Rng::seed_from_u64(rng_seed);
    pos_rng.set_stream(1);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(rng_seed);
    noise_rng.set_stream(2);

    let n_cols = p.n_cols();
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = pos_rng.random::<f64>() * norm;
        let flat = cum.partition_point(|&c| c <= u).min(cum.len() - 1);
        let row = flat / n_cols;
        let col = flat % n_cols;
        let mut value = ground_truth.get(row, col);
        if noise_sd > 0.0 {
            let z: f64 = StandardNormal.sample(&mut noise_rng);
            value += noise_sd * z;
        }
        samples.push(Observation { row, col, value });
    }
    ObservationSet::new(p.n_rows(), p.n_cols(), samples)
}
