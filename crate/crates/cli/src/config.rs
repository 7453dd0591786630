use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use coldstart::coldstart::BreakpointMethod;
use coldstart::dataset::PrefixOrdering;
use coldstart::kmeans::{Init, KMeansConfig};
use coldstart::recsys_eval::EvalConfig;

use crate::failure::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dataset {
    MovieLens,
    Jester,
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dataset::MovieLens => "movielens",
            Dataset::Jester => "jester",
        })
    }
}

impl FromStr for Dataset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "movielens" => Ok(Dataset::MovieLens),
            "jester" => Ok(Dataset::Jester),
            other => Err(format!(
                "unknown dataset {other:?} (expected movielens or jester)"
            )),
        }
    }
}

/// Everything a run needs. Built from defaults, then the config file, then
/// command-line flags.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub dataset: Dataset,
    pub input: PathBuf,
    pub out: PathBuf,
    pub k_coeff: usize,
    pub min_ratings: usize,
    /// Users whose prefixes are replayed for the curves.
    pub sample_size: usize,
    /// Random users kept for every stage after filtering; 0 keeps all.
    pub subsample_users: usize,
    pub seed: u64,
    pub ordering: PrefixOrdering,
    pub t_max: usize,
    pub threads: usize,
    pub restarts: usize,
    pub max_steps: usize,
    pub conv_tol: f64,
    pub init: Init,
    pub eval: EvalConfig,
    pub sweep_coeffs: Vec<usize>,
    pub breakpoint_method: BreakpointMethod,
    pub breakpoint_t_min: usize,
    pub breakpoint_t_max: usize,
    pub jester_strict_counts: bool,
    pub movielens_clamp_half_star: bool,
}

/// Raw `key = value` settings before defaults are filled in.
#[derive(Debug, Default, Clone)]
pub struct Settings {
    entries: Vec<(String, String)>,
}

const KEYS: &[&str] = &[
    "dataset",
    "input",
    "out",
    "k_coeff",
    "min_ratings",
    "sample_size",
    "subsample_users",
    "seed",
    "ordering",
    "t_max",
    "threads",
    "restarts",
    "max_steps",
    "conv_tol",
    "init",
    "holdout_per_user",
    "candidate_pool",
    "relevance_threshold",
    "ndcg_cutoff",
    "sweep_coeffs",
    "breakpoint_method",
    "breakpoint_t_min",
    "breakpoint_t_max",
    "jester_strict_counts",
    "movielens_clamp_half_star",
];

impl Settings {
    pub fn parse(text: &str, origin: &str) -> Result<Self, Failure> {
        let mut s = Settings::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Failure::usage(format!("{origin}:{}: expected `key = value`", n + 1))
            })?;
            s.set(k.trim(), v.trim())
                .map_err(|e| Failure::usage(format!("{origin}:{}: {}", n + 1, e.message)))?;
        }
        Ok(s)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<(), Failure> {
        if !KEYS.contains(&key) {
            return Err(Failure::usage(format!("unknown config key {key:?}")));
        }
        self.entries.retain(|(k, _)| k != key);
        self.entries.push((key.to_string(), value.into()));
        Ok(())
    }

    pub fn merge(&mut self, other: Settings) {
        for (k, v) in other.entries {
            self.entries.retain(|(key, _)| *key != k);
            self.entries.push((k, v));
        }
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>, Failure>
    where
        T::Err: fmt::Display,
    {
        self.get(key)
            .map(|v| {
                v.parse::<T>().map_err(|e| {
                    Failure::usage(format!("config key {key}: cannot parse {v:?}: {e}"))
                })
            })
            .transpose()
    }

    pub fn resolve(&self) -> Result<RunConfig, Failure> {
        let dataset: Dataset = self
            .parsed("dataset")?
            .ok_or_else(|| Failure::usage("no dataset given (--dataset movielens|jester)"))?;
        let input: PathBuf = self
            .parsed("input")?
            .ok_or_else(|| Failure::usage("no input file given (--input PATH)"))?;
        let jester = dataset == Dataset::Jester;
        let t_max = self
            .parsed("t_max")?
            .unwrap_or(if jester { 100 } else { 60 });
        let seed = self.parsed("seed")?.unwrap_or(0);
        let eval_default = EvalConfig::default();
        let sweep_coeffs = match self.get("sweep_coeffs") {
            None => Vec::new(),
            Some(v) => parse_list(v)
                .map_err(|e| Failure::usage(format!("config key sweep_coeffs: {e}")))?,
        };
        let cfg = RunConfig {
            dataset,
            input,
            out: self.parsed("out")?.unwrap_or_else(|| PathBuf::from("out")),
            k_coeff: self
                .parsed("k_coeff")?
                .unwrap_or(if jester { 100 } else { 50 }),
            min_ratings: self.parsed("min_ratings")?.unwrap_or(50),
            sample_size: self.parsed("sample_size")?.unwrap_or(100),
            subsample_users: self.parsed("subsample_users")?.unwrap_or(0),
            seed,
            ordering: self.parsed("ordering")?.unwrap_or(if jester {
                PrefixOrdering::ByItemIndex
            } else {
                PrefixOrdering::ByTimestamp
            }),
            t_max,
            threads: self.parsed("threads")?.unwrap_or(0),
            restarts: self.parsed("restarts")?.unwrap_or(10),
            max_steps: self.parsed("max_steps")?.unwrap_or(100),
            conv_tol: self.parsed("conv_tol")?.unwrap_or(1e-6),
            init: self.parsed("init")?.unwrap_or(Init::KMeansPlusPlus),
            eval: EvalConfig {
                holdout_per_user: self
                    .parsed("holdout_per_user")?
                    .unwrap_or(eval_default.holdout_per_user),
                candidate_pool: self
                    .parsed("candidate_pool")?
                    .unwrap_or(eval_default.candidate_pool),
                relevance_threshold: self
                    .parsed("relevance_threshold")?
                    .unwrap_or(eval_default.relevance_threshold),
                ndcg_cutoff: self
                    .parsed("ndcg_cutoff")?
                    .unwrap_or(eval_default.ndcg_cutoff),
                seed,
            },
            sweep_coeffs,
            breakpoint_method: self
                .parsed("breakpoint_method")?
                .unwrap_or(BreakpointMethod::SegmentedLinear),
            breakpoint_t_min: self.parsed("breakpoint_t_min")?.unwrap_or(1),
            breakpoint_t_max: self.parsed("breakpoint_t_max")?.unwrap_or(t_max),
            jester_strict_counts: self.parsed("jester_strict_counts")?.unwrap_or(false),
            movielens_clamp_half_star: self.parsed("movielens_clamp_half_star")?.unwrap_or(false),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn parse_list(v: &str) -> Result<Vec<usize>, String> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<usize>()
                .map_err(|_| format!("cannot parse {s:?} as a count"))
        })
        .collect()
}

impl RunConfig {
    fn validate(&self) -> Result<(), Failure> {
        for (name, v) in [
            ("k_coeff", self.k_coeff),
            ("min_ratings", self.min_ratings),
            ("sample_size", self.sample_size),
            ("t_max", self.t_max),
        ] {
            if v < 1 {
                return Err(Failure::usage(format!("{name} must be at least 1")));
            }
        }
        if self.breakpoint_t_min > self.breakpoint_t_max {
            return Err(Failure::usage("breakpoint_t_min exceeds breakpoint_t_max"));
        }
        self.kmeans(1).validate().map_err(Failure::from)?;
        self.eval.validate().map_err(Failure::from)?;
        Ok(())
    }

    pub fn kmeans(&self, n_clusters: usize) -> KMeansConfig {
        KMeansConfig {
            n_clusters,
            restarts: self.restarts,
            max_steps: self.max_steps,
            conv_tol: self.conv_tol,
            seed: self.seed,
            init: self.init,
        }
    }

    /// Settings after defaults, as `key = value` lines in a fixed order.
    pub fn to_config_text(&self) -> String {
        let coeffs: Vec<String> = self.sweep_coeffs.iter().map(|c| c.to_string()).collect();
        let mut s = String::new();
        let mut kv = |k: &str, v: &dyn fmt::Display| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("dataset", &self.dataset);
        kv("input", &self.input.display());
        kv("out", &self.out.display());
        kv("k_coeff", &self.k_coeff);
        kv("min_ratings", &self.min_ratings);
        kv("sample_size", &self.sample_size);
        kv("subsample_users", &self.subsample_users);
        kv("seed", &self.seed);
        kv("ordering", &self.ordering);
        kv("t_max", &self.t_max);
        kv("threads", &self.threads);
        kv("restarts", &self.restarts);
        kv("max_steps", &self.max_steps);
        kv("conv_tol", &self.conv_tol);
        kv("init", &self.init);
        kv("holdout_per_user", &self.eval.holdout_per_user);
        kv("candidate_pool", &self.eval.candidate_pool);
        kv("relevance_threshold", &self.eval.relevance_threshold);
        kv("ndcg_cutoff", &self.eval.ndcg_cutoff);
        kv("sweep_coeffs", &coeffs.join(","));
        kv("breakpoint_method", &self.breakpoint_method);
        kv("breakpoint_t_min", &self.breakpoint_t_min);
        kv("breakpoint_t_max", &self.breakpoint_t_max);
        kv("jester_strict_counts", &self.jester_strict_counts);
        kv("movielens_clamp_half_star", &self.movielens_clamp_half_star);
        s
    }
}
