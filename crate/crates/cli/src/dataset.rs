//! Resolve a dataset configuration into observations ready for fitting.

use crate::config::DatasetConfig;
use nucomplete::dataio::{
    average_duplicates, dense_submatrix, generate_synthetic, load_movielens, preprocess_labstyle,
    SyntheticData, SyntheticSpec,
};
use nucomplete::error::{Error, Result};
use nucomplete::sampling::ObservationSet;
use std::path::Path;

pub struct PreparedDataset {
    pub obs: ObservationSet,
    /// Ground truth, synthetic datasets only.
    pub synthetic: Option<SyntheticData>,
}

/// Lab-style input: `row,col,value` CSV with dimensions inferred from the
/// largest indices; repeated cells are averaged and the log(1+x)
/// standardization is applied (stats from the whole file).
fn load_labstyle(path: &Path) -> Result<ObservationSet> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    // Peek dimensions, then parse through the shared reader.
    let mut n_rows = 0usize;
    let mut n_cols = 0usize;
    for (idx, line) in text.lines().enumerate().skip(1) {
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
        let r: usize = fields[0].trim().parse().map_err(|e| Error::Parse {
            line: idx + 1,
            reason: format!("bad row index: {e}"),
        })?;
        let c: usize = fields[1].trim().parse().map_err(|e| Error::Parse {
            line: idx + 1,
            reason: format!("bad col index: {e}"),
        })?;
        n_rows = n_rows.max(r + 1);
        n_cols = n_cols.max(c + 1);
    }
    if n_rows == 0 || n_cols == 0 {
        return Err(Error::InsufficientData(format!(
            "lab-style file {} holds no observations",
            path.display()
        )));
    }
    let obs = ObservationSet::from_csv(&text, n_rows, n_cols)?;
    let averaged = average_duplicates(&obs);
    let (transformed, _stats) = preprocess_labstyle(&averaged)?;
    Ok(transformed)
}

pub fn prepare(dataset: &DatasetConfig) -> Result<PreparedDataset> {
    match dataset {
        DatasetConfig::Synthetic { spec, .. } => {
            let data = generate_synthetic(spec)?;
            Ok(PreparedDataset {
                obs: data.obs.clone(),
                synthetic: Some(data),
            })
        }
        DatasetConfig::Movielens {
            path,
            user_quantile,
            item_quantile,
        } => {
            let table = load_movielens(path)?;
            let sub = dense_submatrix(&table, *user_quantile, *item_quantile)?;
            Ok(PreparedDataset {
                obs: sub.obs,
                synthetic: None,
            })
        }
        DatasetConfig::Labstyle { path } => Ok(PreparedDataset {
            obs: load_labstyle(path)?,
            synthetic: None,
        }),
    }
}

/// Synthetic data for one sweep cell: same spec with a different sample count
/// and a repeat-specific seed.
pub fn synthetic_for_cell(spec: &SyntheticSpec, n: usize, seed: u64) -> Result<SyntheticData> {
    generate_synthetic(&SyntheticSpec { n, seed, ..*spec })
}
