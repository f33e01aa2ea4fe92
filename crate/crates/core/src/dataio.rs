//! Data generation and ingestion: the synthetic low-rank generator,
//! MovieLens-100K parsing with dense-submatrix extraction, and the
//! lab-test-style preprocessing transforms.
//!
//! RNG contract: all randomness flows through ChaCha8 (a 64-bit-seedable
//! counter-based generator). Independent roles draw from independent streams
//! of one seed (factor matrices use streams 1-4) or from sub-seeds produced
//! by `derive_seed` (a splitmix64 round), so factor matrices are bit
//! reproducible regardless of the sample count.

use crate::error::{Error, Result};
use crate::matcore::DenseMatrix;
use crate::sampling::{draw_observations, Observation, ObservationSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

/// Splitmix64 round keyed by role; the documented sub-seed scheme.
pub fn derive_seed(seed: u64, role: u64) -> u64 {
    let mut z = seed ^ role.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const STREAM_U_B: u64 = 1;
const STREAM_V_B: u64 = 2;
const STREAM_U_P: u64 = 3;
const STREAM_V_P: u64 = 4;
const ROLE_OBSERVATIONS: u64 = 5;

/// Synthetic data-generating configuration: d x d ground truth of rank
/// `rank_b`, sampling matrix of rank `rank_p`, n noisy draws.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub d: usize,
    pub rank_b: usize,
    pub rank_p: usize,
    pub noise_sd: f64,
    pub n: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::Config("d must be >= 1".into()));
        }
        if self.rank_b == 0 || self.rank_b > self.d || self.rank_p == 0 || self.rank_p > self.d {
            return Err(Error::Config(format!(
                "ranks must lie in 1..=d = {}, got rank_b = {}, rank_p = {}",
                self.d, self.rank_b, self.rank_p
            )));
        }
        if !(self.noise_sd >= 0.0) {
            return Err(Error::Config(format!(
                "noise_sd must be >= 0, got {}",
                self.noise_sd
            )));
        }
        if self.n == 0 {
            return Err(Error::Config("n must be >= 1".into()));
        }
        Ok(())
    }
}

/// Ground truth and the observations drawn from it.
#[derive(Clone, Debug)]
pub struct SyntheticData {
    pub b_star: DenseMatrix,
    pub p_star: DenseMatrix,
    pub obs: ObservationSet,
}

fn uniform_factor(seed: u64, stream: u64, rows: usize, cols: usize) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    DenseMatrix::from_fn(rows, cols, |_, _| rng.random::<f64>())
}

/// Deterministic test hook: build the dataset from explicit factor matrices.
pub fn generate_with_factors(
    u_b: &DenseMatrix,
    v_b: &DenseMatrix,
    u_p: &DenseMatrix,
    v_p: &DenseMatrix,
    n: usize,
    noise_sd: f64,
    obs_seed: u64,
) -> Result<SyntheticData> {
    let b_star = u_b.matmul(&v_b.transpose())?;
    let p_raw = u_p.matmul(&v_p.transpose())?;
    if !(p_raw.min_entry() > 0.0) {
        return Err(Error::DegenerateInput(
            "sampling factor product has a non-positive entry".into(),
        ));
    }
    let p_star = p_raw.scale(1.0 / p_raw.sum());
    let obs = draw_observations(&p_star, &b_star, n, noise_sd, obs_seed)?;
    Ok(SyntheticData { b_star, p_star, obs })
}

/// B* = U_B V_B^T and P* = normalize(U_P V_P^T) with factor entries i.i.d.
/// Uniform[0, 1]; observations are n categorical draws plus Gaussian noise.
/// Bit-deterministic per seed.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let u_b = uniform_factor(spec.seed, STREAM_U_B, spec.d, spec.rank_b);
    let v_b = uniform_factor(spec.seed, STREAM_V_B, spec.d, spec.rank_b);
    let u_p = uniform_factor(spec.seed, STREAM_U_P, spec.d, spec.rank_p);
    let v_p = uniform_factor(spec.seed, STREAM_V_P, spec.d, spec.rank_p);
    generate_with_factors(
        &u_b,
        &v_b,
        &u_p,
        &v_p,
        spec.n,
        spec.noise_sd,
        derive_seed(spec.seed, ROLE_OBSERVATIONS),
    )
}

/// One parsed ratings row with the original identifiers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RatingRecord {
    pub user: u32,
    pub item: u32,
    pub value: f64,
    pub timestamp: Option<i64>,
}

/// Ratings with original (sparse) identifiers, before re-indexing.
#[derive(Clone, Debug, Default)]
pub struct RatingsTable {
    pub records: Vec<RatingRecord>,
}

/// Parse the MovieLens `u.data` format: tab-separated
/// `user<TAB>item<TAB>rating<TAB>timestamp` (timestamp optional).
pub fn load_movielens(path: &Path) -> Result<RatingsTable> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    let table = parse_movielens(&text)?;
    if table.records.is_empty() {
        log::warn!("ratings file {} is empty", path.display());
    }
    Ok(table)
}

pub fn parse_movielens(text: &str) -> Result<RatingsTable> {
    let mut records = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 && fields.len() != 4 {
            return Err(Error::Parse {
                line: line_no,
                reason: format!("expected 3 or 4 tab-separated fields, got {}", fields.len()),
            });
        }
        let user = fields[0].trim().parse::<u32>().map_err(|e| Error::Parse {
            line: line_no,
            reason: format!("bad user id {:?}: {e}", fields[0]),
        })?;
        let item = fields[1].trim().parse::<u32>().map_err(|e| Error::Parse {
            line: line_no,
            reason: format!("bad item id {:?}: {e}", fields[1]),
        })?;
        let value = fields[2].trim().parse::<f64>().map_err(|e| Error::Parse {
            line: line_no,
            reason: format!("bad rating {:?}: {e}", fields[2]),
        })?;
        let timestamp = if fields.len() == 4 {
            Some(fields[3].trim().parse::<i64>().map_err(|e| Error::Parse {
                line: line_no,
                reason: format!("bad timestamp {:?}: {e}", fields[3]),
            })?)
        } else {
            None
        };
        records.push(RatingRecord {
            user,
            item,
            value,
            timestamp,
        });
    }
    Ok(RatingsTable { records })
}

/// Densely re-indexed submatrix with the retained id maps.
#[derive(Clone, Debug)]
pub struct DenseSubmatrix {
    pub obs: ObservationSet,
    /// Dense row index -> original user id.
    pub user_ids: Vec<u32>,
    /// Dense column index -> original item id.
    pub item_ids: Vec<u32>,
}

fn kept_ids(counts: &BTreeMap<u32, usize>, quantile: f64, what: &str) -> Result<BTreeSet<u32>> {
    if !(0.0..1.0).contains(&quantile) {
        return Err(Error::Config(format!(
            "{what} quantile must lie in [0, 1), got {quantile}"
        )));
    }
    let n = counts.len();
    let k = ((1.0 - quantile) * n as f64).floor() as usize;
    if k == 0 {
        return Err(Error::Config(format!(
            "{what} quantile {quantile} keeps nothing out of {n}"
        )));
    }
    let mut sorted: Vec<usize> = counts.values().copied().collect();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    let threshold = sorted[k - 1];
    Ok(counts
        .iter()
        .filter(|(_, &c)| c >= threshold)
        .map(|(&id, _)| id)
        .collect())
}

/// Keep the most active users and most rated items: count thresholds are the
/// k-th largest counts at the requested quantiles (computed on the full
/// table; everything tied at the threshold is kept), then retain observations
/// with both endpoints kept and re-index densely.
pub fn dense_submatrix(
    table: &RatingsTable,
    user_quantile: f64,
    item_quantile: f64,
) -> Result<DenseSubmatrix> {
    if table.records.is_empty() {
        return Err(Error::InsufficientData("ratings table is empty".into()));
    }
    let mut user_counts: BTreeMap<u32, usize> = BTreeMap::new();
    let mut item_counts: BTreeMap<u32, usize> = BTreeMap::new();
    for r in &table.records {
        *user_counts.entry(r.user).or_default() += 1;
        *item_counts.entry(r.item).or_default() += 1;
    }
    let keep_users = kept_ids(&user_counts, user_quantile, "user")?;
    let keep_items = kept_ids(&item_counts, item_quantile, "item")?;

    let user_ids: Vec<u32> = keep_users.iter().copied().collect();
    let item_ids: Vec<u32> = keep_items.iter().copied().collect();
    let user_index: BTreeMap<u32, usize> =
        user_ids.iter().enumerate().map(|(i, &u)| (u, i)).collect();
    let item_index: BTreeMap<u32, usize> =
        item_ids.iter().enumerate().map(|(i, &m)| (m, i)).collect();

    let samples: Vec<Observation> = table
        .records
        .iter()
        .filter(|r| keep_users.contains(&r.user) && keep_items.contains(&r.item))
        .map(|r| Observation {
            row: user_index[&r.user],
            col: item_index[&r.item],
            value: r.value,
        })
        .collect();
    if samples.is_empty() {
        return Err(Error::Config(
            "dense submatrix is empty at the requested quantiles".into(),
        ));
    }
    let obs = ObservationSet::new(user_ids.len(), item_ids.len(), samples)?;
    Ok(DenseSubmatrix {
        obs,
        user_ids,
        item_ids,
    })
}

/// Replace repeated observations of a cell by their average (lab-style
/// ingestion only; the solver path keeps multiplicity).
pub fn average_duplicates(obs: &ObservationSet) -> ObservationSet {
    let mut acc: BTreeMap<(usize, usize), (f64, usize)> = BTreeMap::new();
    for s in obs.samples() {
        let e = acc.entry((s.row, s.col)).or_insert((0.0, 0));
        e.0 += s.value;
        e.1 += 1;
    }
    let samples = acc
        .into_iter()
        .map(|((row, col), (sum, count))| Observation {
            row,
            col,
            value: sum / count as f64,
        })
        .collect();
    ObservationSet::new(obs.n_rows(), obs.n_cols(), samples).expect("indices already validated")
}

/// Per-column standardization stats on the log(1+x) scale.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ColumnStats {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

const SD_FLOOR: f64 = 1e-12;

/// Column means/SDs of log(1+x) over the supplied (training) observations.
/// Columns with no training data standardize as (mean 0, sd 1).
pub fn labstyle_stats(train: &ObservationSet) -> Result<ColumnStats> {
    train.require_non_empty("lab-style preprocessing")?;
    let cols = train.n_cols();
    let mut sums = vec![0.0f64; cols];
    let mut sq_sums = vec![0.0f64; cols];
    let mut counts = vec![0usize; cols];
    for s in train.samples() {
        if s.value <= -1.0 {
            return Err(Error::Domain {
                row: s.row,
                col: s.col,
                reason: format!("log(1+x) undefined for value {}", s.value),
            });
        }
        let v = s.value.ln_1p();
        sums[s.col] += v;
        sq_sums[s.col] += v * v;
        counts[s.col] += 1;
    }
    let mut means = vec![0.0f64; cols];
    let mut sds = vec![1.0f64; cols];
    for c in 0..cols {
        if counts[c] == 0 {
            continue;
        }
        let m = sums[c] / counts[c] as f64;
        means[c] = m;
        if counts[c] >= 2 {
            let var = (sq_sums[c] - counts[c] as f64 * m * m) / (counts[c] - 1) as f64;
            sds[c] = var.max(0.0).sqrt().max(SD_FLOOR);
        } else {
            sds[c] = SD_FLOOR;
        }
    }
    Ok(ColumnStats { means, sds })
}

/// log(1+x) then per-column standardization with the supplied stats.
pub fn apply_labstyle(obs: &ObservationSet, stats: &ColumnStats) -> Result<ObservationSet> {
    if stats.means.len() != obs.n_cols() {
        return Err(Error::Dimension(format!(
            "stats cover {} columns but observations have {}",
            stats.means.len(),
            obs.n_cols()
        )));
    }
    let samples: Result<Vec<Observation>> = obs
        .samples()
        .iter()
        .map(|s| {
            if s.value <= -1.0 {
                return Err(Error::Domain {
                    row: s.row,
                    col: s.col,
                    reason: format!("log(1+x) undefined for value {}", s.value),
                });
            }
            Ok(Observation {
                row: s.row,
                col: s.col,
                value: (s.value.ln_1p() - stats.means[s.col]) / stats.sds[s.col],
            })
        })
        .collect();
    ObservationSet::new(obs.n_rows(), obs.n_cols(), samples?)
}

/// Inverse of `apply_labstyle` for one predicted value.
pub fn inverse_labstyle(value: f64, col: usize, stats: &ColumnStats) -> f64 {
    (value * stats.sds[col] + stats.means[col]).exp_m1()
}

/// Stats from the training observations only, plus the transformed set.
pub fn preprocess_labstyle(train: &ObservationSet) -> Result<(ObservationSet, ColumnStats)> {
    let stats = labstyle_stats(train)?;
    let transformed = apply_labstyle(train, &stats)?;
    Ok((transformed, stats))
}
