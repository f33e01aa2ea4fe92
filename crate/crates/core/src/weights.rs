//! The weight matrix W: closeness constant, the weight-construction program
//! solved by projected subgradient descent, and error-bound diagnostics.

use crate::error::{Error, Result};
use crate::matcore::{self, DenseMatrix};
use serde::Serialize;

/// Hyper-parameters of the weight-construction program.
#[derive(Clone, Debug)]
pub struct WeightConstructionConfig {
    /// Box half-width l >= 1 around sqrt(P); l = 1 collapses Q to sqrt(P).
    pub l_bound: f64,
    /// Cap on ||Q o B||_inf.
    pub gamma: f64,
    /// Base step; the update uses step_size/sqrt(t) with the subgradient
    /// normalized to unit Frobenius norm.
    pub step_size: f64,
    pub max_iter: usize,
    /// Stop once the projected update moves less than this in Frobenius norm.
    pub tol: f64,
}

impl Default for WeightConstructionConfig {
    fn default() -> Self {
        WeightConstructionConfig {
            l_bound: 3.0,
            gamma: 3.0,
            step_size: 0.1,
            max_iter: 2000,
            tol: 1e-10,
        }
    }
}

impl WeightConstructionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.l_bound >= 1.0) {
            return Err(Error::Config(format!(
                "l_bound must be >= 1, got {}",
                self.l_bound
            )));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::Config(format!("gamma must be > 0, got {}", self.gamma)));
        }
        if !(self.step_size > 0.0) {
            return Err(Error::Config(format!(
                "step_size must be > 0, got {}",
                self.step_size
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be >= 1".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::Config(format!("tol must be >= 0, got {}", self.tol)));
        }
        Ok(())
    }
}

/// Output of the weight-construction program.
#[derive(Clone, Debug)]
pub struct WeightSolution {
    /// Normalized weight matrix W = Q^2 / sum(Q^2); entries positive, sum 1.
    pub w: DenseMatrix,
    /// Best feasible Q found.
    pub q: DenseMatrix,
    /// ||Q o B||_* at the best iterate.
    pub objective: f64,
    /// Objective of the best iterate after each step; non-increasing.
    pub best_trace: Vec<f64>,
    pub n_iterations: usize,
}

/// Theorem-style diagnostics for one (B, W, P) triple.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BoundDiagnostics {
    pub l: f64,
    pub p_min: f64,
    pub n_star: f64,
    pub r_tilde: usize,
    pub bound_value: f64,
}

/// Smallest l with 1/l <= P_jk / W_jk <= l over all entries; 1 iff w = p.
pub fn closeness_l(w: &DenseMatrix, p: &DenseMatrix) -> Result<f64> {
    w.check_same_shape(p)?;
    let mut l = 1.0f64;
    for i in 0..w.n_rows() {
        for j in 0..w.n_cols() {
            let (wv, pv) = (w.get(i, j), p.get(i, j));
            if !(wv > 0.0) || !wv.is_finite() {
                return Err(Error::Domain {
                    row: i,
                    col: j,
                    reason: format!("weight entry must be positive and finite, got {wv}"),
                });
            }
            if !(pv > 0.0) || !pv.is_finite() {
                return Err(Error::Domain {
                    row: i,
                    col: j,
                    reason: format!("probability entry must be positive and finite, got {pv}"),
                });
            }
            l = l.max(pv / wv).max(wv / pv);
        }
    }
    Ok(l)
}

/// Minimize ||Q o B||_* over the box 1/l <= Q / sqrt(P) <= l with
/// ||Q o B||_inf <= gamma, by projected subgradient descent with diminishing
/// steps, tracking the best feasible iterate. Returns W = Q^2 / sum(Q^2).
pub fn construct_weights(
    b_raw: &DenseMatrix,
    p_hat: &DenseMatrix,
    cfg: &WeightConstructionConfig,
) -> Result<DenseMatrix> {
    Ok(construct_weights_full(b_raw, p_hat, cfg)?.w)
}

pub fn construct_weights_full(
    b_raw: &DenseMatrix,
    p_hat: &DenseMatrix,
    cfg: &WeightConstructionConfig,
) -> Result<WeightSolution> {
    cfg.validate()?;
    b_raw.check_same_shape(p_hat)?;
    b_raw.check_finite("raw estimate")?;
    let (nr, nc) = p_hat.shape();
    for i in 0..nr {
        for j in 0..nc {
            let pv = p_hat.get(i, j);
            if !(pv > 0.0) || !pv.is_finite() {
                return Err(Error::Domain {
                    row: i,
                    col: j,
                    reason: format!("sampling estimate must be positive, got {pv}"),
                });
            }
        }
    }

    let sqrt_p = matcore::elementwise_sqrt(p_hat)?;
    let lower = sqrt_p.scale(1.0 / cfg.l_bound);
    let mut upper = sqrt_p.scale(cfg.l_bound);
    let mut infeasible = Vec::new();
    for i in 0..nr {
        for j in 0..nc {
            let b_abs = b_raw.get(i, j).abs();
            if b_abs > 0.0 {
                // The infinity-norm cap binds only where B is non-zero.
                let cap = cfg.gamma / b_abs;
                if cap < upper.get(i, j) {
                    upper.set(i, j, cap);
                }
            }
            if lower.get(i, j) > upper.get(i, j) {
                infeasible.push((i, j));
            }
        }
    }
    if !infeasible.is_empty() {
        return Err(Error::Infeasible { indices: infeasible });
    }

    let clip = |m: &DenseMatrix| -> DenseMatrix {
        DenseMatrix::from_fn(nr, nc, |i, j| {
            m.get(i, j).max(lower.get(i, j)).min(upper.get(i, j))
        })
    };

    let mut q = clip(&sqrt_p);
    let objective_of = |fac: &matcore::SvdFactors| fac.singular_values.iter().sum::<f64>();

    let mut best_q = q.clone();
    let mut best_obj = f64::INFINITY;
    let mut best_trace = Vec::with_capacity(cfg.max_iter);
    let mut n_iterations = 0;

    for t in 1..=cfg.max_iter {
        n_iterations = t;
        let m = matcore::hadamard(&q, b_raw)?;
        let fac = matcore::svd(&m)?;
        let obj = objective_of(&fac);
        if obj < best_obj {
            best_obj = obj;
            best_q = q.clone();
        }
        best_trace.push(best_obj);

        // Subgradient of ||Q o B||_* in Q: (U V^T) o B, with U, V restricted
        // to numerically non-zero singular values (null directions would
        // only add noise to the descent). The cutoff is far above roundoff
        // so near-rank-deficient iterates do not flicker directions.
        let s1 = fac.singular_values.first().copied().unwrap_or(0.0);
        let k = fac
            .singular_values
            .iter()
            .filter(|&&s| s > 1e-6 * s1)
            .count();
        let mut grad = DenseMatrix::from_fn(nr, nc, |i, j| {
            (0..k)
                .map(|l| fac.left_vectors.get(i, l) * fac.right_vectors.get(j, l))
                .sum::<f64>()
                * b_raw.get(i, j)
        });
        let gnorm = grad.frobenius_norm();
        if gnorm <= 1e-15 {
            break;
        }
        grad = grad.scale(1.0 / gnorm);
        let step = cfg.step_size / (t as f64).sqrt();
        let q_next = clip(&q.zip_map(&grad, |qv, gv| qv - step * gv)?);
        let moved = q_next.sub(&q)?.frobenius_norm();
        q = q_next;
        if moved <= cfg.tol {
            break;
        }
    }

    // Final candidate after the last projection.
    let final_obj = matcore::nuclear_norm(&matcore::hadamard(&q, b_raw)?)?;
    if final_obj < best_obj {
        best_obj = final_obj;
        best_q = q;
    }

    let q_sq = matcore::hadamard(&best_q, &best_q)?;
    let w = q_sq.scale(1.0 / q_sq.sum());
    Ok(WeightSolution {
        w,
        q: best_q,
        objective: best_obj,
        best_trace,
        n_iterations,
    })
}

/// Bound factor (sigma^2 v n*^2) * d * rho * l^4 * r~ / (n * p_min) with the
/// unspecified leading constant taken as 1; relative comparisons only.
#[allow(clippy::too_many_arguments)]
pub fn bound_value(
    l: f64,
    p_min: f64,
    n_star: f64,
    r_tilde: usize,
    d: usize,
    n: usize,
    sigma: f64,
    rho: f64,
) -> f64 {
    (sigma * sigma).max(n_star * n_star) * (d as f64) * rho * l.powi(4) * (r_tilde as f64)
        / (n as f64 * p_min)
}

/// Diagnostics for the recovery bound on one (B, W, P) triple.
pub fn bound_diagnostics(
    b: &DenseMatrix,
    w: &DenseMatrix,
    p: &DenseMatrix,
    n: usize,
    sigma: f64,
    rho: f64,
) -> Result<BoundDiagnostics> {
    b.check_same_shape(w)?;
    b.check_same_shape(p)?;
    if n == 0 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    let d = b.n_rows().max(b.n_cols());
    if !(rho >= (d as f64).ln()) {
        return Err(Error::InvalidArgument(format!(
            "rho must be >= log d = {}, got {rho}",
            (d as f64).ln()
        )));
    }
    let l = closeness_l(w, p)?;
    let p_min = p.min_entry();
    let weighted = matcore::hadamard(&matcore::elementwise_sqrt(w)?, b)?;
    let n_star = (b.n_rows() * b.n_cols()) as f64 * weighted.infinity_norm();
    let r_tilde = matcore::numerical_rank(&weighted)?;
    Ok(BoundDiagnostics {
        l,
        p_min,
        n_star,
        r_tilde,
        bound_value: bound_value(l, p_min, n_star, r_tilde, d, n, sigma, rho),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn closeness_examples() {
        let p = DenseMatrix::from_rows(&[&[0.2, 0.3], &[0.3, 0.2]]).unwrap();
        assert!((closeness_l(&p, &p).unwrap() - 1.0).abs() < 1e-15);

        let unif = DenseMatrix::constant(2, 2, 0.25);
        assert!((closeness_l(&unif, &p).unwrap() - 1.25).abs() < 1e-12);

        // Scaling w by 2 then renormalizing is a no-op: l stays 1.
        let rescaled = p.scale(2.0).scale(0.5);
        assert!((closeness_l(&rescaled, &p).unwrap() - 1.0).abs() < 1e-15);

        let bad = DenseMatrix::from_rows(&[&[0.5, 0.0], &[0.2, 0.3]]).unwrap();
        assert!(matches!(
            closeness_l(&bad, &p),
            Err(Error::Domain { row: 0, col: 1, .. })
        ));
    }

    #[test]
    fn constant_matrix_optimum() {
        // B = J on a 2x2 grid with uniform p = 0.25, L = 2, gamma large:
        // optimum Q = (sqrt(p)/L) J with objective d * sqrt(p)/L * c = 0.5,
        // certified by the lower bound ||Q||_* >= (1^T Q 1)/d.
        let b = DenseMatrix::constant(2, 2, 1.0);
        let p = DenseMatrix::constant(2, 2, 0.25);
        let cfg = WeightConstructionConfig {
            l_bound: 2.0,
            gamma: 100.0,
            ..Default::default()
        };
        let sol = construct_weights_full(&b, &p, &cfg).unwrap();
        assert!(
            (sol.objective - 0.5).abs() < 1e-3,
            "objective {} vs closed form 0.5",
            sol.objective
        );
        // Normalized weights are uniform.
        for &v in sol.w.entries() {
            assert!((v - 0.25).abs() < 1e-6, "weight {v}");
        }
    }

    #[test]
    fn degenerate_box_returns_p() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = DenseMatrix::from_fn(4, 3, |_, _| rng.random::<f64>() + 0.1);
        let p = p.scale(1.0 / p.sum());
        let b = DenseMatrix::from_fn(4, 3, |_, _| rng.random::<f64>() - 0.5);
        let cfg = WeightConstructionConfig {
            l_bound: 1.0,
            gamma: 1e6,
            ..Default::default()
        };
        let w = construct_weights(&b, &p, &cfg).unwrap();
        assert!(w.sub(&p).unwrap().infinity_norm() < 1e-12, "W must collapse to P");
    }

    #[test]
    fn infeasibility_detected() {
        let b = DenseMatrix::constant(2, 2, 10.0);
        let p = DenseMatrix::constant(2, 2, 0.25);
        // Lower box corner sqrt(p)/l * |B| = 0.5/1 * 10 = 5 > gamma.
        let cfg = WeightConstructionConfig {
            l_bound: 1.0,
            gamma: 1.0,
            ..Default::default()
        };
        match construct_weights(&b, &p, &cfg) {
            Err(Error::Infeasible { indices }) => assert_eq!(indices.len(), 4),
            other => panic!("expected infeasibility, got {other:?}"),
        }
    }

    #[test]
    fn feasible_q_and_objective_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = DenseMatrix::from_fn(6, 6, |_, _| rng.random::<f64>() + 0.05);
        let p = p.scale(1.0 / p.sum());
        let b = DenseMatrix::from_fn(6, 6, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let cfg = WeightConstructionConfig::default();
        let sol = construct_weights_full(&b, &p, &cfg).unwrap();

        let sqrt_p = matcore::elementwise_sqrt(&p).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let ratio = sol.q.get(i, j) / sqrt_p.get(i, j);
                assert!(ratio >= 1.0 / cfg.l_bound - 1e-6 && ratio <= cfg.l_bound + 1e-6);
                assert!(sol.q.get(i, j) * b.get(i, j).abs() <= cfg.gamma + 1e-6);
            }
        }
        // Q = sqrt(P) is feasible here (gamma is slack), so the optimum cannot
        // be worse.
        let init_obj =
            matcore::nuclear_norm(&matcore::hadamard(&sqrt_p, &b).unwrap()).unwrap();
        assert!(sol.objective <= init_obj + 1e-6);
        assert!((sol.w.sum() - 1.0).abs() < 1e-12);
        assert!(sol.w.min_entry() > 0.0);

        for pair in sol.best_trace.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12, "best objective must not rise");
        }
    }

    #[test]
    fn rescaling_invariance() {
        // Scaling B by c > 0 and gamma by c leaves W unchanged.
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let p = DenseMatrix::from_fn(5, 4, |_, _| rng.random::<f64>() + 0.1);
        let p = p.scale(1.0 / p.sum());
        let b = DenseMatrix::from_fn(5, 4, |_, _| rng.random::<f64>() * 3.0 - 1.5);
        // Pick gamma between the feasibility floor and the slack regime so
        // the cap actually binds somewhere.
        let l = WeightConstructionConfig::default().l_bound;
        let sqrt_p = matcore::elementwise_sqrt(&p).unwrap();
        let floor = (0..5)
            .flat_map(|i| (0..4).map(move |j| (i, j)))
            .map(|(i, j)| sqrt_p.get(i, j) / l * b.get(i, j).abs())
            .fold(0.0f64, f64::max);
        let base = WeightConstructionConfig {
            gamma: 1.2 * floor,
            max_iter: 300,
            ..Default::default()
        };
        // Power-of-two factor: the scaled problem is a bit-exact rescaling.
        let c = 8.0;
        let scaled = WeightConstructionConfig {
            gamma: base.gamma * c,
            ..base.clone()
        };
        let w1 = construct_weights(&b, &p, &base).unwrap();
        let w2 = construct_weights(&b.scale(c), &p, &scaled).unwrap();
        assert!(
            w1.sub(&w2).unwrap().infinity_norm() < 1e-9,
            "weights must be invariant to joint rescaling"
        );
    }

    #[test]
    fn diagnostics_examples() {
        let d = 4usize;
        let unif = DenseMatrix::constant(d, d, 1.0 / (d * d) as f64);
        let b = DenseMatrix::from_fn(d, d, |i, j| (i + 2 * j) as f64 * 0.1);
        let rho = (d as f64).ln() + 1.0;
        let diag = bound_diagnostics(&b, &unif, &unif, 100, 1.0, rho).unwrap();
        assert!((diag.l - 1.0).abs() < 1e-12);
        assert!((diag.p_min - 1.0 / 16.0).abs() < 1e-15);

        let zero = DenseMatrix::zeros(d, d);
        let diag = bound_diagnostics(&zero, &unif, &unif, 100, 2.0, rho).unwrap();
        assert_eq!(diag.n_star, 0.0);
        assert_eq!(diag.r_tilde, 0);
        assert_eq!(diag.bound_value, 0.0);

        // Factors recomputed independently for two candidate weightings.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = DenseMatrix::from_fn(d, d, |_, _| rng.random::<f64>() + 0.2);
        let p = p.scale(1.0 / p.sum());
        let w1 = DenseMatrix::constant(d, d, 1.0 / 16.0);
        let w2 = p.clone();
        let d1 = bound_diagnostics(&b, &w1, &p, 500, 1.0, rho).unwrap();
        let d2 = bound_diagnostics(&b, &w2, &p, 500, 1.0, rho).unwrap();
        for (di, wi) in [(d1, &w1), (d2, &w2)] {
            let l_direct = closeness_l(wi, &p).unwrap();
            let weighted =
                matcore::hadamard(&matcore::elementwise_sqrt(wi).unwrap(), &b).unwrap();
            let n_star_direct = 16.0 * weighted.infinity_norm();
            let r_direct = matcore::numerical_rank(&weighted).unwrap();
            assert!((di.l - l_direct).abs() < 1e-12);
            assert!((di.n_star - n_star_direct).abs() < 1e-12);
            assert_eq!(di.r_tilde, r_direct);
            let expect = bound_value(l_direct, p.min_entry(), n_star_direct, r_direct, d, 500, 1.0, rho);
            assert!((di.bound_value - expect).abs() <= 1e-12 * expect.abs().max(1.0));
        }
    }

    #[test]
    fn bound_monotonicity() {
        let base = bound_value(1.5, 0.01, 2.0, 3, 10, 100, 1.0, 3.0);
        assert!(bound_value(1.6, 0.01, 2.0, 3, 10, 100, 1.0, 3.0) > base);
        assert!(bound_value(1.5, 0.01, 2.5, 3, 10, 100, 1.0, 3.0) > base);
        assert!(bound_value(1.5, 0.01, 2.0, 4, 10, 100, 1.0, 3.0) > base);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn closeness_symmetric(seed in 0u64..400) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = DenseMatrix::from_fn(3, 4, |_, _| rng.random::<f64>() + 0.05);
            let b = DenseMatrix::from_fn(3, 4, |_, _| rng.random::<f64>() + 0.05);
            let lab = closeness_l(&a, &b).unwrap();
            let lba = closeness_l(&b, &a).unwrap();
            prop_assert!((lab - lba).abs() <= 1e-12 * lab.max(1.0));
            prop_assert!(lab >= 1.0);
        }
    }
}
