//! Dense matrix primitives: SVD, norms, Hadamard algebra, and the
//! singular-value soft-thresholding operator used by every solver.

use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Relative cutoff for numerical rank: singular values above `eps * sigma_1` count.
pub const RANK_EPS: f64 = 1e-9;

/// Row-major dense real matrix. The universal carrier for preference,
/// sampling, weight and count matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    n_rows: usize,
    n_cols: usize,
    entries: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self::constant(n_rows, n_cols, 0.0)
    }

    pub fn constant(n_rows: usize, n_cols: usize, value: f64) -> Self {
        assert!(n_rows > 0 && n_cols > 0, "matrix dimensions must be positive");
        DenseMatrix {
            n_rows,
            n_cols,
            entries: vec![value; n_rows * n_cols],
        }
    }

    pub fn from_vec(n_rows: usize, n_cols: usize, entries: Vec<f64>) -> Result<Self> {
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::Dimension(format!(
                "matrix dimensions must be positive, got {n_rows}x{n_cols}"
            )));
        }
        if entries.len() != n_rows * n_cols {
            return Err(Error::Dimension(format!(
                "entry buffer has length {}, expected {}x{} = {}",
                entries.len(),
                n_rows,
                n_cols,
                n_rows * n_cols
            )));
        }
        Ok(DenseMatrix {
            n_rows,
            n_cols,
            entries,
        })
    }

    /// Build from nested row slices; rows must share one length.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::Dimension("from_rows requires a non-empty grid".into()));
        }
        let n_cols = rows[0].len();
        let mut entries = Vec::with_capacity(rows.len() * n_cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n_cols {
                return Err(Error::Dimension(format!(
                    "row {i} has length {}, expected {n_cols}",
                    r.len()
                )));
            }
            entries.extend_from_slice(r);
        }
        DenseMatrix::from_vec(rows.len(), n_cols, entries)
    }

    pub fn from_fn(n_rows: usize, n_cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut entries = Vec::with_capacity(n_rows * n_cols);
        for i in 0..n_rows {
            for j in 0..n_cols {
                entries.push(f(i, j));
            }
        }
        DenseMatrix {
            n_rows,
            n_cols,
            entries,
        }
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
    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.n_cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.entries[row * self.n_cols + col] = value;
    }

    #[inline]
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|x| x.is_finite())
    }

    pub(crate) fn check_finite(&self, what: &str) -> Result<()> {
        if let Some(pos) = self.entries.iter().position(|x| !x.is_finite()) {
            return Err(Error::Domain {
                row: pos / self.n_cols,
                col: pos % self.n_cols,
                reason: format!("{what} contains a non-finite entry"),
            });
        }
        Ok(())
    }

    pub(crate) fn check_same_shape(&self, other: &DenseMatrix) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::Dimension(format!(
                "shape mismatch: {}x{} vs {}x{}",
                self.n_rows, self.n_cols, other.n_rows, other.n_cols
            )));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> DenseMatrix {
        DenseMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            entries: self.entries.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_map(&self, other: &DenseMatrix, f: impl Fn(f64, f64) -> f64) -> Result<DenseMatrix> {
        self.check_same_shape(other)?;
        Ok(DenseMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn scale(&self, c: f64) -> DenseMatrix {
        self.map(|x| c * x)
    }

    pub fn add(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn sum(&self) -> f64 {
        self.entries.iter().sum()
    }

    pub fn min_entry(&self) -> f64 {
        self.entries.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_entry(&self) -> f64 {
        self.entries.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn transpose(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.n_cols, self.n_rows, |i, j| self.get(j, i))
    }

    /// Plain triple-loop product; dimensions here stay small (<= ~1000).
    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.n_cols != other.n_rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.n_rows, self.n_cols, other.n_rows, other.n_cols
            )));
        }
        let mut out = DenseMatrix::zeros(self.n_rows, other.n_cols);
        for i in 0..self.n_rows {
            for k in 0..self.n_cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.n_cols {
                    out.entries[i * other.n_cols + j] += a * other.get(k, j);
                }
            }
        }
        Ok(out)
    }

    /// Outer product of two vectors.
    pub fn outer(u: &[f64], v: &[f64]) -> DenseMatrix {
        DenseMatrix::from_fn(u.len(), v.len(), |i, j| u[i] * v[j])
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn infinity_norm(&self) -> f64 {
        self.entries.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n_rows)
            .map(|i| (0..self.n_cols).map(|j| self.get(i, j)).sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        (0..self.n_cols)
            .map(|j| (0..self.n_rows).map(|i| self.get(i, j)).sum())
            .collect()
    }

    /// Headerless CSV: one row per line, '.' decimal, shortest round-trip floats.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.n_rows {
            for j in 0..self.n_cols {
                if j > 0 {
                    out.push(',');
                }
                out.push_str(&format!("{}", self.get(i, j)));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<DenseMatrix> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row: Vec<f64> = line
                .split(',')
                .map(|tok| {
                    tok.trim().parse::<f64>().map_err(|e| Error::Parse {
                        line: idx + 1,
                        reason: format!("bad float {tok:?}: {e}"),
                    })
                })
                .collect::<Result<_>>()?;
            if let Some(first) = rows.first() {
                if row.len() != first.len() {
                    return Err(Error::Parse {
                        line: idx + 1,
                        reason: format!("row has {} fields, expected {}", row.len(), first.len()),
                    });
                }
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Parse {
                line: 0,
                reason: "empty matrix CSV".into(),
            });
        }
        let n_rows = rows.len();
        let n_cols = rows[0].len();
        DenseMatrix::from_vec(n_rows, n_cols, rows.into_iter().flatten().collect())
    }
}

/// Thin SVD with singular values sorted non-increasing and a fixed sign
/// convention: the largest-magnitude entry of each left vector is positive,
/// ties broken by lowest index.
#[derive(Clone, Debug)]
pub struct SvdFactors {
    /// d_r x k, orthonormal columns.
    pub left_vectors: DenseMatrix,
    /// Length k, non-increasing, all >= 0.
    pub singular_values: Vec<f64>,
    /// d_c x k, orthonormal columns (V, not V^T).
    pub right_vectors: DenseMatrix,
}

impl SvdFactors {
    /// U * diag(sigma) * V^T.
    pub fn reconstruct(&self) -> DenseMatrix {
        let (r, k) = self.left_vectors.shape();
        let c = self.right_vectors.n_rows();
        DenseMatrix::from_fn(r, c, |i, j| {
            (0..k)
                .map(|l| {
                    self.left_vectors.get(i, l)
                        * self.singular_values[l]
                        * self.right_vectors.get(j, l)
                })
                .sum()
        })
    }

    /// Count of singular values above `RANK_EPS * sigma_1`.
    pub fn numerical_rank(&self) -> usize {
        let s1 = self.singular_values.first().copied().unwrap_or(0.0);
        if s1 <= 0.0 {
            return 0;
        }
        self.singular_values
            .iter()
            .filter(|&&s| s > RANK_EPS * s1)
            .count()
    }
}

/// Sort non-increasing and fix signs so the largest-magnitude entry of each
/// left vector is positive (ties to the lowest index).
fn canonicalize(
    r: usize,
    c: usize,
    sigma_raw: &[f64],
    u_at: impl Fn(usize, usize) -> f64,
    v_at: impl Fn(usize, usize) -> f64,
) -> SvdFactors {
    let k = sigma_raw.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        sigma_raw[b]
            .partial_cmp(&sigma_raw[a])
            .expect("singular values are finite")
            .then(a.cmp(&b))
    });
    let mut left = DenseMatrix::zeros(r, k);
    let mut right = DenseMatrix::zeros(c, k);
    let mut sigma = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        sigma.push(sigma_raw[src]);
        let mut best_i = 0;
        let mut best_abs = -1.0;
        for i in 0..r {
            let a = u_at(i, src).abs();
            if a > best_abs {
                best_abs = a;
                best_i = i;
            }
        }
        let flip = if u_at(best_i, src) < 0.0 { -1.0 } else { 1.0 };
        for i in 0..r {
            left.set(i, dst, flip * u_at(i, src));
        }
        for j in 0..c {
            right.set(j, dst, flip * v_at(j, src));
        }
    }
    SvdFactors {
        left_vectors: left,
        singular_values: sigma,
        right_vectors: right,
    }
}

fn reconstruction_ok(fac: &SvdFactors, m: &DenseMatrix) -> bool {
    let err = match fac.reconstruct().sub(m) {
        Ok(d) => d.frobenius_norm(),
        Err(_) => return false,
    };
    err <= 1e-10 * (1.0 + m.frobenius_norm())
}

/// One-sided Jacobi SVD for an m x n matrix with m >= n: rotate column pairs
/// until all are orthogonal; column norms are the singular values. Slower
/// than the bidiagonal route but accurate on rank-deficient input.
fn jacobi_svd_tall(m: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix, DenseMatrix)> {
    let (rows, cols) = m.shape();
    debug_assert!(rows >= cols);
    let mut a = m.clone();
    let mut v = DenseMatrix::from_fn(cols, cols, |i, j| if i == j { 1.0 } else { 0.0 });
    let tol = 1e-15;
    let max_sweeps = 60;
    // Columns this far below the largest are rounding dust left over from
    // earlier rotations; rotating them cycles forever without converging.
    let max_col2 = (0..cols)
        .map(|j| (0..rows).map(|i| a.get(i, j) * a.get(i, j)).sum::<f64>())
        .fold(0.0f64, f64::max);
    let dust2 = max_col2 * 1e-30;
    let mut converged = false;
    for _ in 0..max_sweeps {
        let mut off = 0usize;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = 0.0;
                for i in 0..rows {
                    let x = a.get(i, p);
                    let y = a.get(i, q);
                    app += x * x;
                    aqq += y * y;
                    apq += x * y;
                }
                if app <= dust2 || aqq <= dust2 {
                    continue;
                }
                if apq.abs() <= tol * (app * aqq).sqrt() || apq == 0.0 {
                    continue;
                }
                off += 1;
                let zeta = (aqq - app) / (2.0 * apq);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for i in 0..rows {
                    let x = a.get(i, p);
                    let y = a.get(i, q);
                    a.set(i, p, cs * x - sn * y);
                    a.set(i, q, sn * x + cs * y);
                }
                for i in 0..cols {
                    let x = v.get(i, p);
                    let y = v.get(i, q);
                    v.set(i, p, cs * x - sn * y);
                    v.set(i, q, sn * x + cs * y);
                }
            }
        }
        if off == 0 {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::SolverFailure(format!(
            "jacobi svd did not converge for {rows}x{cols} matrix"
        )));
    }

    let mut sigma = Vec::with_capacity(cols);
    let mut u = DenseMatrix::zeros(rows, cols);
    let mut zero_cols = Vec::new();
    for j in 0..cols {
        let norm2 = (0..rows).map(|i| a.get(i, j) * a.get(i, j)).sum::<f64>();
        if norm2 > dust2 && norm2 > 0.0 {
            let norm = norm2.sqrt();
            sigma.push(norm);
            for i in 0..rows {
                u.set(i, j, a.get(i, j) / norm);
            }
        } else {
            // Dust directions are not meaningfully orthogonal to anything;
            // report an exact zero and complete the basis below.
            sigma.push(0.0);
            zero_cols.push(j);
        }
    }
    // Exactly-zero singular values leave their left vectors unconstrained;
    // fill with an orthonormal completion so the factor stays orthonormal.
    // The best basis residual can be as small as 1/sqrt(rows), so pick the
    // argmax rather than the first one over a fixed threshold.
    let mut ready: Vec<usize> = (0..cols).filter(|j| sigma[*j] > 0.0).collect();
    for &j in &zero_cols {
        let project = |cand: &mut [f64], ready: &[usize], u: &DenseMatrix| {
            for &l in ready {
                let dot: f64 = (0..rows).map(|i| cand[i] * u.get(i, l)).sum();
                for (i, c) in cand.iter_mut().enumerate() {
                    *c -= dot * u.get(i, l);
                }
            }
        };
        let mut best: Option<(f64, Vec<f64>)> = None;
        for basis in 0..rows {
            let mut cand: Vec<f64> =
                (0..rows).map(|i| if i == basis { 1.0 } else { 0.0 }).collect();
            project(&mut cand, &ready, &u);
            let norm = cand.iter().map(|x| x * x).sum::<f64>().sqrt();
            if best.as_ref().is_none_or(|(b, _)| norm > *b) {
                best = Some((norm, cand));
            }
        }
        let (norm, mut cand) = best.expect("rows >= 1");
        if norm <= 1e-6 {
            return Err(Error::SolverFailure(
                "jacobi svd failed to complete an orthonormal basis".into(),
            ));
        }
        for c in cand.iter_mut() {
            *c /= norm;
        }
        // One re-orthogonalization pass for stability.
        project(&mut cand, &ready, &u);
        let norm = cand.iter().map(|x| x * x).sum::<f64>().sqrt();
        for (i, c) in cand.iter().enumerate() {
            u.set(i, j, c / norm);
        }
        ready.push(j);
    }
    Ok((sigma, u, v))
}

fn jacobi_svd(m: &DenseMatrix) -> Result<SvdFactors> {
    let (r, c) = m.shape();
    if r >= c {
        let (sigma, u, v) = jacobi_svd_tall(m)?;
        Ok(canonicalize(r, c, &sigma, |i, j| u.get(i, j), |i, j| v.get(i, j)))
    } else {
        let (sigma, u, v) = jacobi_svd_tall(&m.transpose())?;
        // A^T = U Sigma V^T means A = V Sigma U^T.
        Ok(canonicalize(r, c, &sigma, |i, j| v.get(i, j), |i, j| u.get(i, j)))
    }
}

/// Singular value decomposition of `m`, deterministic given identical input
/// bits. The bidiagonal backend mis-factors some rank-deficient inputs, so
/// every result is verified by reconstruction and falls back to a one-sided
/// Jacobi sweep when the check fails.
pub fn svd(m: &DenseMatrix) -> Result<SvdFactors> {
    m.check_finite("svd input")?;
    let (r, c) = m.shape();
    let na = DMatrix::from_row_slice(r, c, m.entries());
    if let Some(fac) = na.try_svd(true, true, f64::EPSILON, 0) {
        let u = fac.u.expect("u requested");
        let v_t = fac.v_t.expect("v_t requested");
        let factors = canonicalize(
            r,
            c,
            fac.singular_values.as_slice(),
            |i, j| u[(i, j)],
            |i, j| v_t[(j, i)],
        );
        if reconstruction_ok(&factors, m) {
            return Ok(factors);
        }
    }
    let factors = jacobi_svd(m)?;
    if !reconstruction_ok(&factors, m) {
        return Err(Error::SolverFailure(format!(
            "svd reconstruction failed for {r}x{c} matrix"
        )));
    }
    Ok(factors)
}

/// Sum of singular values.
pub fn nuclear_norm(m: &DenseMatrix) -> Result<f64> {
    Ok(svd(m)?.singular_values.iter().sum())
}

/// Frobenius, operator (spectral) and entrywise-max norms in one pass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Norms {
    pub frobenius: f64,
    pub operator: f64,
    pub infinity: f64,
}

pub fn norms(m: &DenseMatrix) -> Result<Norms> {
    let fac = svd(m)?;
    Ok(Norms {
        frobenius: m.frobenius_norm(),
        operator: fac.singular_values.first().copied().unwrap_or(0.0),
        infinity: m.infinity_norm(),
    })
}

/// Sampling-weighted L2 norm: sqrt(sum_jk p_jk * m_jk^2).
pub fn l2_pi_norm(m: &DenseMatrix, p: &DenseMatrix) -> Result<f64> {
    m.check_same_shape(p)?;
    for i in 0..p.n_rows() {
        for j in 0..p.n_cols() {
            if p.get(i, j) < 0.0 {
                return Err(Error::Domain {
                    row: i,
                    col: j,
                    reason: format!("negative probability weight {}", p.get(i, j)),
                });
            }
        }
    }
    let mut acc = 0.0;
    for (a, w) in m.entries().iter().zip(p.entries()) {
        acc += w * a * a;
    }
    Ok(acc.sqrt())
}

/// Elementwise product.
pub fn hadamard(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    a.zip_map(b, |x, y| x * y)
}

/// Elementwise division; divisor entries must be non-zero.
pub fn hadamard_div(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    a.check_same_shape(b)?;
    for i in 0..b.n_rows() {
        for j in 0..b.n_cols() {
            if b.get(i, j) == 0.0 {
                return Err(Error::Domain {
                    row: i,
                    col: j,
                    reason: "division by zero entry".into(),
                });
            }
        }
    }
    a.zip_map(b, |x, y| x / y)
}

/// Elementwise square root; entries must be >= 0.
pub fn elementwise_sqrt(m: &DenseMatrix) -> Result<DenseMatrix> {
    for i in 0..m.n_rows() {
        for j in 0..m.n_cols() {
            if m.get(i, j) < 0.0 {
                return Err(Error::Domain {
                    row: i,
                    col: j,
                    reason: format!("square root of negative entry {}", m.get(i, j)),
                });
            }
        }
    }
    Ok(m.map(f64::sqrt))
}

/// Matrix soft-thresholding: U * diag(max(sigma_i - tau, 0)) * V^T.
/// Minimizes 0.5*||X - m||_F^2 + tau*||X||_* over X.
pub fn soft_threshold_svd(m: &DenseMatrix, tau: f64) -> Result<DenseMatrix> {
    if tau < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "soft threshold requires tau >= 0, got {tau}"
        )));
    }
    let mut fac = svd(m)?;
    for s in &mut fac.singular_values {
        *s = (*s - tau).max(0.0);
    }
    Ok(fac.reconstruct())
}

/// Numerical rank with the relative cutoff `RANK_EPS`.
pub fn numerical_rank(m: &DenseMatrix) -> Result<usize> {
    Ok(svd(m)?.numerical_rank())
}
