//! Experiment configuration: a flat key-value file with dotted sections,
//! `#` comments, and strict unknown-key rejection.

use nucomplete::dataio::SyntheticSpec;
use nucomplete::error::{Error, Result};
use nucomplete::estimators::{EstimatorSpec, Method};
use nucomplete::evaluation::{LambdaSelection, SplitPlan};
use nucomplete::sampling::SamplingMethod;
use nucomplete::solver::{LambdaGrid, SolverConfig};
use nucomplete::weights::WeightConstructionConfig;
use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Clone, Debug)]
pub enum DatasetConfig {
    Synthetic {
        spec: SyntheticSpec,
        /// Optional sweep of sample sizes for the experiment command.
        n_sweep: Option<Vec<usize>>,
    },
    Movielens {
        path: PathBuf,
        user_quantile: f64,
        item_quantile: f64,
    },
    Labstyle {
        path: PathBuf,
    },
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub methods: Vec<Method>,
    pub solver: SolverConfig,
    pub weights: WeightConstructionConfig,
    pub sampling: SamplingMethod,
    pub plan: SplitPlan,
    pub selection: LambdaSelection,
    pub output_dir: PathBuf,
    pub parallelism: usize,
    pub diagnostics_sigma: f64,
    /// Defaults to log(max dimension) at use sites when not set.
    pub diagnostics_rho: Option<f64>,
}

impl ExperimentConfig {
    pub fn estimator_spec(&self, method: Method) -> EstimatorSpec {
        EstimatorSpec {
            method,
            solver: self.solver.clone(),
            weights: self.weights.clone(),
            sampling: self.sampling,
        }
    }
}

/// Typed reader over the parsed key-value map; tracks consumption so that
/// unknown keys are rejected.
struct KvReader {
    map: BTreeMap<String, (usize, String)>,
    used: BTreeSet<String>,
}

impl KvReader {
    fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let Some(eq) = line.find('=') else {
                return Err(Error::Parse {
                    line: line_no,
                    reason: format!("expected `key = value`, got {line:?}"),
                });
            };
            let key = line[..eq].trim().to_string();
            let value = line[eq + 1..].trim().to_string();
            if key.is_empty() {
                return Err(Error::Parse {
                    line: line_no,
                    reason: "empty key".into(),
                });
            }
            if map.insert(key.clone(), (line_no, value)).is_some() {
                return Err(Error::Parse {
                    line: line_no,
                    reason: format!("duplicate key {key:?}"),
                });
            }
        }
        Ok(KvReader {
            map,
            used: BTreeSet::new(),
        })
    }

    fn raw(&mut self, key: &str) -> Option<String> {
        if let Some((_, v)) = self.map.get(key) {
            self.used.insert(key.to_string());
            Some(v.clone())
        } else {
            None
        }
    }

    fn get<T: FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => {
                let line = self.map[key].0;
                v.parse::<T>().map(Some).map_err(|e| Error::Parse {
                    line,
                    reason: format!("key {key}: bad value {v:?}: {e}"),
                })
            }
        }
    }

    fn get_or<T: FromStr>(&mut self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    fn require<T: FromStr>(&mut self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)?
            .ok_or_else(|| Error::Config(format!("missing required key {key:?}")))
    }

    fn list(&mut self, key: &str) -> Result<Option<Vec<String>>> {
        Ok(self.raw(key).map(|v| {
            v.split(',')
                .map(|t| t.trim().to_string())
                .filter(|t| !t.is_empty())
                .collect()
        }))
    }

    fn finish(self) -> Result<()> {
        let unknown: Vec<&String> = self
            .map
            .keys()
            .filter(|k| !self.used.contains(*k))
            .collect();
        if !unknown.is_empty() {
            return Err(Error::Config(format!(
                "unknown configuration keys: {unknown:?}"
            )));
        }
        Ok(())
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut kv = KvReader::parse(text)?;

    let dataset = match kv.require::<String>("dataset.kind")?.as_str() {
        "synthetic" => {
            let spec = SyntheticSpec {
                d: kv.require("dataset.synthetic.d")?,
                rank_b: kv.require("dataset.synthetic.rank_b")?,
                rank_p: kv.require("dataset.synthetic.rank_p")?,
                noise_sd: kv.get_or("dataset.synthetic.noise_sd", 1.0)?,
                n: kv.require("dataset.synthetic.n")?,
                seed: kv.get_or("dataset.synthetic.seed", 1)?,
            };
            spec.validate()?;
            let n_sweep = match kv.list("dataset.synthetic.n_sweep")? {
                None => None,
                Some(items) => {
                    let mut out = Vec::new();
                    for item in items {
                        out.push(item.parse::<usize>().map_err(|e| {
                            Error::Config(format!(
                                "dataset.synthetic.n_sweep: bad value {item:?}: {e}"
                            ))
                        })?);
                    }
                    if out.is_empty() {
                        return Err(Error::Config("dataset.synthetic.n_sweep is empty".into()));
                    }
                    Some(out)
                }
            };
            DatasetConfig::Synthetic { spec, n_sweep }
        }
        "movielens" => DatasetConfig::Movielens {
            path: PathBuf::from(kv.require::<String>("dataset.movielens.path")?),
            user_quantile: kv.get_or("dataset.movielens.user_quantile", 0.75)?,
            item_quantile: kv.get_or("dataset.movielens.item_quantile", 0.75)?,
        },
        "labstyle" => DatasetConfig::Labstyle {
            path: PathBuf::from(kv.require::<String>("dataset.labstyle.path")?),
        },
        other => {
            return Err(Error::Config(format!(
                "dataset.kind must be synthetic | movielens | labstyle, got {other:?}"
            )))
        }
    };

    let methods = match kv.list("methods")? {
        None => vec![
            Method::Uniform,
            Method::Margin,
            Method::IpwUniform,
            Method::NuRecommend,
        ],
        Some(items) => {
            let mut out = Vec::new();
            for item in items {
                out.push(Method::parse(&item)?);
            }
            if out.is_empty() {
                return Err(Error::Config("methods list is empty".into()));
            }
            out
        }
    };

    let solver = SolverConfig {
        lambda_grid: LambdaGrid::Auto {
            count: kv.get_or("solver.n_lambdas", 30)?,
            min_ratio: kv.get_or("solver.lambda_min_ratio", 1e-3)?,
        },
        beta: kv.get_or("solver.beta", 0.5)?,
        t_init: kv.get_or("solver.t_init", 1.0)?,
        tol: kv.get_or("solver.tol", 1e-8)?,
        max_iter: kv.get_or("solver.max_iter", 2000)?,
    };
    solver.validate()?;

    let weights = WeightConstructionConfig {
        l_bound: kv.get_or("weights.l_bound", 3.0)?,
        gamma: kv.get_or("weights.gamma", 3.0)?,
        step_size: kv.get_or("weights.step_size", 0.1)?,
        max_iter: kv.get_or("weights.max_iter", 2000)?,
        tol: kv.get_or("weights.tol", 1e-10)?,
    };
    weights.validate()?;

    let sampling = match kv
        .get_or::<String>("sampling.method", "rank1".into())?
        .as_str()
    {
        "rank1" => SamplingMethod::Rank1,
        "pmlsvt" => SamplingMethod::Pmlsvt,
        other => {
            return Err(Error::Config(format!(
                "sampling.method must be rank1 | pmlsvt, got {other:?}"
            )))
        }
    };

    let plan = SplitPlan {
        eval_fraction: kv.get_or("plan.eval_fraction", 0.8)?,
        test_fraction: kv.get_or("plan.test_fraction", 0.2)?,
        inner_train_fraction: kv.get_or("plan.inner_train_fraction", 0.8)?,
        n_repeats: kv.get_or("plan.n_repeats", 20)?,
        rng_seed: kv.get_or("plan.seed", 20240)?,
    };
    plan.validate()?;

    let selection = match kv
        .get_or::<String>("selection", "validation".into())?
        .as_str()
    {
        "validation" => LambdaSelection::Validation,
        "oracle" => LambdaSelection::Oracle,
        other => {
            return Err(Error::Config(format!(
                "selection must be validation | oracle, got {other:?}"
            )))
        }
    };
    if matches!(selection, LambdaSelection::Oracle)
        && !matches!(dataset, DatasetConfig::Synthetic { .. })
    {
        return Err(Error::Config(
            "selection = oracle requires a synthetic dataset (ground truth)".into(),
        ));
    }

    let output_dir = PathBuf::from(kv.get_or::<String>("output_dir", "out".into())?);
    let parallelism = kv.get_or("parallelism", 1usize)?;
    if parallelism == 0 {
        return Err(Error::Config("parallelism must be >= 1".into()));
    }
    let diagnostics_sigma = kv.get_or("diagnostics.sigma", 1.0)?;
    let diagnostics_rho = kv.get::<f64>("diagnostics.rho")?;

    kv.finish()?;
    Ok(ExperimentConfig {
        dataset,
        methods,
        solver,
        weights,
        sampling,
        plan,
        selection,
        output_dir,
        parallelism,
        diagnostics_sigma,
        diagnostics_rho,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "\
dataset.kind = synthetic
dataset.synthetic.d = 8
dataset.synthetic.rank_b = 2
dataset.synthetic.rank_p = 2
dataset.synthetic.n = 100
";

    #[test]
    fn parses_minimal_config() {
        let cfg = parse_config(BASE).unwrap();
        assert_eq!(cfg.methods.len(), 4);
        assert_eq!(cfg.parallelism, 1);
        match cfg.dataset {
            DatasetConfig::Synthetic { spec, n_sweep } => {
                assert_eq!(spec.d, 8);
                assert_eq!(spec.noise_sd, 1.0);
                assert!(n_sweep.is_none());
            }
            other => panic!("unexpected dataset {other:?}"),
        }
    }

    #[test]
    fn rejects_unknown_keys() {
        let text = format!("{BASE}solver.warp_speed = 9\n");
        match parse_config(&text) {
            Err(Error::Config(msg)) => assert!(msg.contains("solver.warp_speed"), "{msg}"),
            other => panic!("expected unknown-key rejection, got {other:?}"),
        }
    }

    #[test]
    fn rejects_duplicates_and_bad_lines() {
        let text = format!("{BASE}parallelism = 2\nparallelism = 3\n");
        assert!(matches!(parse_config(&text), Err(Error::Parse { .. })));
        assert!(matches!(
            parse_config("just words\n"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn comments_lists_and_overrides() {
        let text = format!(
            "{BASE}# a comment\nmethods = uniform, margin\n\
             dataset.synthetic.n_sweep = 100, 200\nparallelism = 4  # inline\n"
        );
        let cfg = parse_config(&text).unwrap();
        assert_eq!(cfg.methods, vec![Method::Uniform, Method::Margin]);
        assert_eq!(cfg.parallelism, 4);
        match cfg.dataset {
            DatasetConfig::Synthetic { n_sweep, .. } => {
                assert_eq!(n_sweep, Some(vec![100, 200]))
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn oracle_requires_synthetic() {
        let text =
            "dataset.kind = movielens\ndataset.movielens.path = u.data\nselection = oracle\n";
        assert!(matches!(parse_config(text), Err(Error::Config(_))));
    }

    #[test]
    fn bad_method_rejected() {
        let text = format!("{BASE}methods = uniform, gradient_boosting\n");
        assert!(parse_config(&text).is_err());
    }
}
