use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use coldstart::coldstart::{
    cohorts, detect_breakpoint, regression_intersection, trajectories, QualityCurve, SuccessCurve,
};
use coldstart::dataset::{
    build_matrix, filter_min_ratings, parse_jester_with, parse_movielens_with, sample_users,
    select_users, write_canonical, CountCheck, DedupPolicy, MovieLensOptions, NormalizationScheme,
    RatingMatrix,
};
use coldstart::kmeans::{fit, n_clusters_from_coeff, read_model, write_model, ClusterModel};
use coldstart::quality::davies_bouldin;
use coldstart::recsys_eval::sweep_coefficient;
use log::{info, warn};
use serde_json::{json, Map, Value};

use crate::config::{Dataset, RunConfig};
use crate::failure::{path_ctx, Context, Failure};

pub const CANONICAL: &str = "canonical.csv";
pub const MODEL: &str = "model.txt";
pub const SWEEP: &str = "sweep.csv";
pub const SUCCESS: &str = "success.csv";
pub const SUCCESS_MIN_COHORT: &str = "success_mincohort.csv";
pub const QUALITY: &str = "quality.csv";
pub const THRESHOLD: &str = "threshold.txt";
pub const SUMMARY: &str = "summary.json";
pub const RESOLVED: &str = "resolved.config";

/// Seed offset for the curve sample, so it is drawn independently of the
/// optional subsample.
const SAMPLE_SEED_OFFSET: u64 = 1;

pub struct Data {
    /// As parsed.
    pub raw: RatingMatrix,
    /// After the minimum-count filter and optional subsample; every stage
    /// works on this.
    pub m: RatingMatrix,
}

pub struct Run {
    pub cfg: RunConfig,
    data: Option<Data>,
    summary: Map<String, Value>,
}

impl Run {
    pub fn new(cfg: RunConfig) -> Result<Self, Failure> {
        fs::create_dir_all(&cfg.out).ctx(format!("creating {}", cfg.out.display()))?;
        write_file(&cfg.out.join(RESOLVED), cfg.to_config_text().as_bytes())?;
        let summary = fs::read_to_string(cfg.out.join(SUMMARY))
            .ok()
            .and_then(|s| serde_json::from_str::<Map<String, Value>>(&s).ok())
            .unwrap_or_default();
        let mut run = Run {
            cfg,
            data: None,
            summary,
        };
        let echo: Map<String, Value> = run
            .cfg
            .to_config_text()
            .lines()
            .filter_map(|l| l.split_once(" = "))
            .map(|(k, v)| (k.to_string(), Value::String(v.to_string())))
            .collect();
        run.summary.insert("config".into(), Value::Object(echo));
        Ok(run)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.cfg.out.join(name)
    }

    fn load_data(&mut self) -> Result<(), Failure> {
        if self.data.is_none() {
            let start = Instant::now();
            let raw = load(&self.cfg)?;
            let mut m = filter_min_ratings(&raw, self.cfg.min_ratings).ctx("filtering users")?;
            let n = self.cfg.subsample_users;
            if n > 0 && n < m.n_users() {
                let mut keep = sample_users(&m, n, self.cfg.seed)?;
                keep.sort_unstable();
                m = select_users(&m, &keep);
            }
            info!(
                "loaded {} users, {} items, {} ratings; {} users kept",
                raw.n_users(),
                raw.n_items(),
                raw.n_ratings(),
                m.n_users()
            );
            self.summary.insert(
                "dataset".into(),
                json!({
                    "name": self.cfg.dataset.to_string(),
                    "users": raw.n_users(),
                    "items": raw.n_items(),
                    "ratings": raw.n_ratings(),
                    "users_kept": m.n_users(),
                    "ratings_kept": m.n_ratings(),
                }),
            );
            self.timing("load", start);
            self.data = Some(Data { raw, m });
        }
        Ok(())
    }

    fn data(&self) -> &Data {
        self.data.as_ref().expect("load_data runs first")
    }

    fn timing(&mut self, stage: &str, start: Instant) {
        let t = self
            .summary
            .entry("timings_secs")
            .or_insert_with(|| Value::Object(Map::new()));
        if let Value::Object(map) = t {
            map.insert(stage.into(), json!(start.elapsed().as_secs_f64()));
        }
    }

    fn section(&mut self, name: &str, value: Value) -> Result<(), Failure> {
        self.summary.insert(name.into(), value);
        let text = serde_json::to_string_pretty(&self.summary)
            .map_err(|e| Failure::invariant(format!("summary serialization: {e}")))?;
        write_file(&self.path(SUMMARY), format!("{text}\n").as_bytes())
    }

    pub fn ingest(&mut self) -> Result<(), Failure> {
        let start = Instant::now();
        let path = self.path(CANONICAL);
        self.load_data()?;
        let data = self.data();
        let mut buf = Vec::new();
        write_canonical(&data.raw, &mut buf)?;
        let (users, items, ratings) =
            (data.raw.n_users(), data.raw.n_items(), data.raw.n_ratings());
        write_file(&path, &buf)?;
        println!("users={users} items={items} ratings={ratings}");
        self.timing("ingest", start);
        let ds = self.summary.get("dataset").cloned().unwrap_or(Value::Null);
        self.section("dataset", ds)
    }

    pub fn fit(&mut self) -> Result<(), Failure> {
        let start = Instant::now();
        let k_coeff = self.cfg.k_coeff;
        self.load_data()?;
        let m = &self.data().m;
        let n_users = m.n_users();
        if k_coeff > n_users {
            warn!("k_coeff {k_coeff} exceeds the {n_users} users; using a single cluster");
        }
        let kcfg = self.cfg.kmeans(n_clusters_from_coeff(n_users, k_coeff));
        let model = fit(m, &kcfg).ctx("fit")?;
        check_assignments(&model, m)?;
        // A single cluster, or coincident centroids, has no index; the model
        // is still worth keeping.
        let db_signed = match davies_bouldin(&model, m) {
            Ok(q) => Some(q.db_signed),
            Err(e) if e.is_methodology() => {
                warn!("no Davies-Bouldin index: {e}");
                None
            }
            Err(e) => return Err(Failure::from(e).context("fit")),
        };
        let mut buf = Vec::new();
        write_model(&model, &mut buf)?;
        println!(
            "n_clusters={} sse={} db_signed={}",
            model.n_clusters(),
            model.sse(),
            db_signed.map_or("none".to_string(), |d| d.to_string())
        );
        let section = json!({
            "n_clusters": model.n_clusters(),
            "sse": model.sse(),
            "db_signed": db_signed,
            "fingerprint": model.fingerprint(),
        });
        write_file(&self.path(MODEL), &buf)?;
        self.timing("fit", start);
        self.section("fit", section)
    }

    pub fn sweep(&mut self) -> Result<(), Failure> {
        let start = Instant::now();
        if self.cfg.sweep_coeffs.is_empty() {
            return Err(Failure::usage(
                "sweep needs at least one coefficient (--coeffs or sweep_coeffs)",
            ));
        }
        let (coeffs, kcfg, ecfg) = (
            self.cfg.sweep_coeffs.clone(),
            self.cfg.kmeans(1),
            self.cfg.eval.clone(),
        );
        self.load_data()?;
        let m = &self.data().m;
        let result = sweep_coefficient(m, &coeffs, &kcfg, &ecfg).ctx("sweep")?;
        let mut buf = Vec::new();
        result.write_csv(&mut buf)?;
        write_file(&self.path(SWEEP), &buf)?;
        println!(
            "best_by_ndcg={} best_by_map={}",
            result.best_by_ndcg, result.best_by_map
        );
        self.timing("sweep", start);
        self.section(
            "sweep",
            json!({ "best_by_ndcg": result.best_by_ndcg, "best_by_map": result.best_by_map }),
        )
    }

    pub fn curves(&mut self) -> Result<(), Failure> {
        let start = Instant::now();
        let model_path = self.path(MODEL);
        let cfg = self.cfg.clone();
        self.load_data()?;
        let m = &self.data().m;
        let model = load_model(&model_path, m)?;

        let n = if cfg.sample_size > m.n_users() {
            warn!(
                "sample of {} exceeds the {} users; using all",
                cfg.sample_size,
                m.n_users()
            );
            m.n_users()
        } else {
            cfg.sample_size
        };
        let mut sample = sample_users(m, n, cfg.seed.wrapping_add(SAMPLE_SEED_OFFSET))?;
        sample.sort_unstable();
        let trajs = trajectories(&model, m, &sample, cfg.t_max, cfg.ordering).ctx("curves")?;
        for tr in &trajs {
            if tr.history_len <= cfg.t_max
                && tr.prefix_clusters[tr.history_len - 1] != tr.final_cluster
            {
                return Err(Failure::invariant(format!(
                    "user {} full-history prefix left its final cluster",
                    tr.user
                )));
            }
        }

        let mut section = Map::new();
        section.insert("sampled_users".into(), json!(sample.len()));
        let min_cohort_path = self.path(SUCCESS_MIN_COHORT);
        let success_trajs = match cfg.dataset {
            Dataset::Jester => trajs.clone(),
            Dataset::MovieLens => {
                let c = cohorts(m, &sample, cfg.min_ratings);
                section.insert("min_cohort_users".into(), json!(c.at_minimum.len()));
                section.insert("above_min_users".into(), json!(c.above_minimum.len()));
                let (at_min, rest): (Vec<_>, Vec<_>) = trajs
                    .iter()
                    .cloned()
                    .partition(|tr| c.at_minimum.binary_search(&tr.user).is_ok());
                if at_min.is_empty() {
                    warn!(
                        "no sampled user has exactly {} ratings; skipping {SUCCESS_MIN_COHORT}",
                        cfg.min_ratings
                    );
                    let _ = fs::remove_file(&min_cohort_path);
                } else {
                    let curve = SuccessCurve::from_trajectories(&at_min, cfg.t_max);
                    let mut buf = Vec::new();
                    curve.write_csv(&mut buf)?;
                    write_file(&min_cohort_path, &buf)?;
                }
                if rest.is_empty() {
                    return Err(Failure::usage(format!(
                        "no sampled user has more than {} ratings",
                        cfg.min_ratings
                    )));
                }
                rest
            }
        };
        let success = SuccessCurve::from_trajectories(&success_trajs, cfg.t_max);
        let quality =
            QualityCurve::from_trajectories(&model, m, &trajs, cfg.t_max).ctx("curves")?;
        let longest = trajs.iter().map(|t| t.history_len).max().unwrap_or(0);
        for p in quality.points.iter().filter(|p| p.t >= longest) {
            if p.current_quality_mean != p.reference_quality_mean {
                return Err(Failure::invariant(format!(
                    "quality curve unsaturated at t = {}",
                    p.t
                )));
            }
        }

        let mut buf = Vec::new();
        success.write_csv(&mut buf)?;
        write_file(&self.path(SUCCESS), &buf)?;
        let mut buf = Vec::new();
        quality.write_csv(&mut buf)?;
        write_file(&self.path(QUALITY), &buf)?;
        if let Some(last) = success.points.last() {
            section.insert("success_last_t".into(), json!(last.t));
            section.insert("success_last_fraction".into(), json!(last.success_fraction));
        }
        if let Some(p) = quality.points.first() {
            section.insert(
                "reference_quality_mean".into(),
                json!(p.reference_quality_mean),
            );
        }
        self.timing("curves", start);
        self.section("curves", Value::Object(section))
    }

    pub fn threshold(&mut self) -> Result<(), Failure> {
        let start = Instant::now();
        let success = SuccessCurve::read_csv(open(&self.path(SUCCESS))?)
            .ctx(path_ctx(&self.path(SUCCESS)))?;
        let quality = QualityCurve::read_csv(open(&self.path(QUALITY))?)
            .ctx(path_ctx(&self.path(QUALITY)))?;
        let bp = detect_breakpoint(
            &success,
            self.cfg.breakpoint_method,
            self.cfg.breakpoint_t_min,
            self.cfg.breakpoint_t_max,
        )
        .ctx("breakpoint")?;
        let mut report = bp.to_key_values();
        let mut section = json!({
            "t_star": bp.t_star,
            "method": bp.method.to_string(),
            "left_slope": bp.left_fit.slope,
            "right_slope": bp.right_fit.slope,
            "total_sse": bp.total_sse,
        });
        let crossing = regression_intersection(&quality);
        match &crossing {
            Ok(ix) => {
                report.push_str(&ix.to_key_values());
                section["t_cross"] = json!(ix.t_cross);
                section["log_a"] = json!(ix.log_a);
                section["log_b"] = json!(ix.log_b);
                section["extrapolated"] = json!(ix.extrapolated);
            }
            Err(_) => {
                report.push_str("t_cross=none\n");
                section["t_cross"] = Value::Null;
            }
        }
        write_file(&self.path(THRESHOLD), report.as_bytes())?;
        println!("t_star={}", bp.t_star);
        self.timing("threshold", start);
        self.section("threshold", section)?;
        let ix = crossing.ctx("intersection")?;
        println!("t_cross={}", ix.t_cross);
        Ok(())
    }

    pub fn pipeline(&mut self) -> Result<(), Failure> {
        self.ingest()?;
        self.fit()?;
        if !self.cfg.sweep_coeffs.is_empty() {
            self.sweep()?;
        }
        self.curves()?;
        self.threshold()
    }
}

fn check_assignments(model: &ClusterModel, m: &RatingMatrix) -> Result<(), Failure> {
    for (u, row) in m.rows().iter().enumerate() {
        let (best, _) = model.assign(row)?;
        if best != model.assignments()[u] {
            return Err(Failure::invariant(format!(
                "user {u} assigned to cluster {} but nearest is {best}",
                model.assignments()[u]
            )));
        }
    }
    Ok(())
}

fn load(cfg: &RunConfig) -> Result<RatingMatrix, Failure> {
    let input = &cfg.input;
    let reader = open(input)?;
    let m = match cfg.dataset {
        Dataset::Jester => {
            let check = if cfg.jester_strict_counts {
                CountCheck::Fail
            } else {
                CountCheck::Warn
            };
            parse_jester_with(reader, check)
        }
        Dataset::MovieLens => {
            let opts = MovieLensOptions {
                clamp_half_star: cfg.movielens_clamp_half_star,
            };
            parse_movielens_with(reader, opts).and_then(|events| {
                build_matrix(
                    &events,
                    NormalizationScheme::Identity1To5,
                    DedupPolicy::KeepLast,
                )
            })
        }
    };
    m.ctx(path_ctx(input))
}

fn load_model(path: &Path, m: &RatingMatrix) -> Result<ClusterModel, Failure> {
    if !path.exists() {
        return Err(Failure::usage(format!(
            "model file {} not found; run `fit` first",
            path.display()
        )));
    }
    read_model(open(path)?, m).ctx(path_ctx(path))
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let f = File::create(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    let mut w = BufWriter::new(f);
    w.write_all(bytes)
        .and_then(|_| w.flush())
        .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}
