//! α sweeps: for every side of every instance, run the requested learners on
//! the native matrix, the induced matrix and each mixed matrix of the grid, and
//! collect one row per metric.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use log::warn;
use rayon::prelude::*;
use serde::Serialize;

use crate::comparability::{pairwise_comparability, BilingualDictionary, Measure};
use crate::error::{Error, Result};
use crate::evaluation::{accuracy, davies_bouldin, nmi};
use crate::learners::{kfold_cv, kmedoids, loocv, Partition};
use crate::matrix::{
    induced_similarity_cols, induced_similarity_rows, mix, ComparabilityMatrix, MixParameter, SimilarityMatrix,
};
use crate::synthetic::{derive_seed, generate_suite, TestSummary};
use crate::text::{native_similarity, Corpus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Task {
    #[serde(rename = "knn-loo")]
    KnnLoo,
    #[serde(rename = "knn-cv")]
    KnnCv,
    #[serde(rename = "kmedoids")]
    KMedoids,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::KnnLoo => "knn-loo",
            Task::KnnCv => "knn-cv",
            Task::KMedoids => "kmedoids",
        })
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "knn-loo" => Ok(Task::KnnLoo),
            "knn-cv" => Ok(Task::KnnCv),
            "kmedoids" => Ok(Task::KMedoids),
            other => Err(Error::InvalidParameter(format!("unknown task {other:?}"))),
        }
    }
}

/// Evenly spaced α values from `start` to `stop` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlphaGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl AlphaGrid {
    pub fn new(start: f64, stop: f64, step: f64) -> Result<Self> {
        let grid = AlphaGrid { start, stop, step };
        grid.values()?;
        Ok(grid)
    }

    /// A grid holding the single value `alpha`.
    pub fn single(alpha: f64) -> Result<Self> {
        AlphaGrid::new(alpha, alpha, 1.0)
    }

    /// Grid points computed as `start + (stop − start)·i/m`, so the last point
    /// is exactly `stop` and no step error accumulates.
    pub fn values(&self) -> Result<Vec<MixParameter>> {
        let AlphaGrid { start, stop, step } = *self;
        MixParameter::new(start)?;
        MixParameter::new(stop)?;
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha step must be positive, got {step}"
            )));
        }
        if stop < start {
            return Err(Error::InvalidParameter(format!(
                "alpha stop {stop} is below start {start}"
            )));
        }
        let intervals = ((stop - start) / step).round() as usize;
        if intervals == 0 {
            return Ok(vec![MixParameter::new(start)?]);
        }
        (0..=intervals)
            .map(|i| MixParameter::new(start + (stop - start) * i as f64 / intervals as f64))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub measure: Measure,
    pub grid: AlphaGrid,
    pub tasks: Vec<Task>,
    pub folds: usize,
    pub seed: u64,
    /// Cluster count for k-medoids; defaults to the number of true classes.
    pub k: Option<usize>,
    pub max_iter: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            measure: Measure::Va2,
            grid: AlphaGrid {
                start: 0.0,
                stop: 1.0,
                step: 0.05,
            },
            tasks: vec![Task::KnnLoo, Task::KnnCv, Task::KMedoids],
            folds: 10,
            seed: 0,
            k: None,
            max_iter: 100,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<Vec<MixParameter>> {
        if self.tasks.is_empty() {
            return Err(Error::InvalidParameter("at least one task is required".into()));
        }
        if self.folds < 2 {
            return Err(Error::InvalidParameter(format!(
                "folds must be at least 2, got {}",
                self.folds
            )));
        }
        self.grid.values()
    }
}

/// One language side of one instance, ready for learning.
#[derive(Debug, Clone)]
pub struct Side {
    pub name: String,
    pub native: SimilarityMatrix,
    pub induced: SimilarityMatrix,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub test: usize,
    pub seed: u64,
    pub sides: Vec<Side>,
    pub comparability_range: Option<(f64, f64)>,
}

/// Inputs to a sweep.
#[derive(Debug, Clone)]
pub enum Source {
    Synthetic {
        base_seed: u64,
        tests: usize,
        v_s: f64,
        v_c: f64,
    },
    Text {
        corpus_a: Corpus,
        corpus_b: Corpus,
        dictionary: BilingualDictionary,
    },
}

fn class_ids(labels: &[usize]) -> Vec<String> {
    let k = labels.iter().max().map_or(0, |m| m + 1);
    (0..k).map(|c| c.to_string()).collect()
}

/// Class id per document plus the class names.
pub type Labels = (Vec<usize>, Vec<String>);

/// One task result: task, fold (for per-fold rows), metric name, value.
pub type TaskValue = (Task, Option<usize>, &'static str, f64);

/// Both sides of an instance, given native matrices and their comparability.
pub fn build_instance(
    test: usize,
    seed: u64,
    names: (&str, &str),
    natives: (SimilarityMatrix, SimilarityMatrix),
    labels: (Labels, Labels),
    comp: &ComparabilityMatrix,
) -> Result<Instance> {
    let induced_a = induced_similarity_rows(comp)?;
    let induced_b = induced_similarity_cols(comp)?;
    Ok(Instance {
        test,
        seed,
        comparability_range: comp.value_range(),
        sides: vec![
            Side {
                name: names.0.to_string(),
                native: natives.0,
                induced: induced_a,
                labels: labels.0 .0,
                class_names: labels.0 .1,
            },
            Side {
                name: names.1.to_string(),
                native: natives.1,
                induced: induced_b,
                labels: labels.1 .0,
                class_names: labels.1 .1,
            },
        ],
    })
}

/// Native similarity, comparability and induced similarity for a bilingual
/// corpus pair.
pub fn text_instance(
    corpus_a: &Corpus,
    corpus_b: &Corpus,
    dictionary: &BilingualDictionary,
    measure: Measure,
    seed: u64,
) -> Result<(Instance, ComparabilityMatrix)> {
    check_languages(corpus_a, corpus_b, dictionary)?;
    let comp = pairwise_comparability(&corpus_a.lexicons(), &corpus_b.lexicons(), dictionary, measure)?;
    let labels = |c: &Corpus| {
        let (p, names) = Partition::from_labels(&c.labels());
        (p.assignment().to_vec(), names)
    };
    let instance = build_instance(
        0,
        seed,
        (corpus_a.language(), corpus_b.language()),
        (native_similarity(corpus_a)?, native_similarity(corpus_b)?),
        (labels(corpus_a), labels(corpus_b)),
        &comp,
    )?;
    Ok((instance, comp))
}

/// Rejects corpus pairs that share a language or disagree with the
/// dictionary's declared languages.
pub fn check_languages(corpus_a: &Corpus, corpus_b: &Corpus, dictionary: &BilingualDictionary) -> Result<()> {
    if corpus_a.language() == corpus_b.language() {
        return Err(Error::LanguageMismatch(format!(
            "both corpora are {:?}; expected two languages",
            corpus_a.language()
        )));
    }
    if let Some((l1, l2)) = dictionary.languages() {
        if (l1, l2) != (corpus_a.language(), corpus_b.language()) {
            return Err(Error::LanguageMismatch(format!(
                "dictionary translates {l1} -> {l2}, corpora are {} and {}",
                corpus_a.language(),
                corpus_b.language()
            )));
        }
    }
    Ok(())
}

/// Instances of a source, synthetic tests in suite order.
pub fn prepare(source: &Source, config: &ExperimentConfig) -> Result<(Vec<Instance>, SourceSummary)> {
    match source {
        Source::Synthetic {
            base_seed,
            tests,
            v_s,
            v_c,
        } => {
            let suite = generate_suite(*base_seed, *tests, *v_s, *v_c)?;
            let summaries = suite.iter().map(|t| t.summary()).collect();
            let instances = suite
                .into_iter()
                .enumerate()
                .map(|(i, t)| {
                    let (la, lb) = (class_ids(&t.labels_s), class_ids(&t.labels_sp));
                    build_instance(
                        i,
                        derive_seed(config.seed, i as u64),
                        ("S", "S'"),
                        (t.sim_s, t.sim_sp),
                        ((t.labels_s, la), (t.labels_sp, lb)),
                        &t.comp,
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((
                instances,
                SourceSummary::Synthetic {
                    base_seed: *base_seed,
                    v_s: *v_s,
                    v_c: *v_c,
                    tests: summaries,
                },
            ))
        }
        Source::Text {
            corpus_a,
            corpus_b,
            dictionary,
        } => {
            let (instance, _) = text_instance(
                corpus_a,
                corpus_b,
                dictionary,
                config.measure,
                derive_seed(config.seed, 0),
            )?;
            Ok((
                vec![instance],
                SourceSummary::Text {
                    languages: (corpus_a.language().to_string(), corpus_b.language().to_string()),
                    documents: (corpus_a.len(), corpus_b.len()),
                    dictionary_pairs: dictionary.pair_count(),
                },
            ))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Native,
    Induced,
    Mixed,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Native => "native",
            Method::Induced => "induced",
            Method::Mixed => "mixed",
        })
    }
}

/// One metric value of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub side: String,
    pub test: usize,
    pub method: Method,
    pub alpha: Option<f64>,
    pub task: Task,
    pub fold: Option<usize>,
    pub metric: &'static str,
    pub value: f64,
    pub seed: u64,
}

pub const CSV_HEADER: &str = "side,test,method,alpha,task,fold,metric,value,seed";

impl Row {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.side,
            self.test,
            self.method,
            self.alpha.map(|a| a.to_string()).unwrap_or_default(),
            self.task,
            self.fold.map(|f| f.to_string()).unwrap_or_default(),
            self.metric,
            self.value,
            self.seed
        )
    }
}

pub fn write_rows<W: Write>(mut writer: W, rows: &[Row]) -> Result<()> {
    writeln!(writer, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(writer, "{}", r.to_csv())?;
    }
    Ok(())
}

/// Runs every requested task on one similarity matrix.
pub fn run_tasks(
    sim: &SimilarityMatrix,
    labels: &[usize],
    config: &ExperimentConfig,
    seed: u64,
) -> Result<Vec<TaskValue>> {
    let mut out = Vec::new();
    for &task in &config.tasks {
        match task {
            Task::KnnLoo => out.push((task, None, "error", loocv(sim, labels)?)),
            Task::KnnCv => {
                let report = kfold_cv(sim, labels, config.folds, seed)?;
                for (f, e) in report.fold_errors.iter().enumerate() {
                    out.push((task, Some(f), "error", *e));
                }
                out.push((task, None, "error_mean", report.mean));
                out.push((task, None, "error_std", report.std_dev));
            }
            Task::KMedoids => {
                let truth = Partition::from_assignment(labels.to_vec());
                let k = config.k.unwrap_or(truth.k());
                let result = kmedoids(sim, k, seed, config.max_iter)?;
                out.push((task, None, "ac", accuracy(&result.partition, &truth)?));
                out.push((task, None, "nmi", nmi(&result.partition, &truth)?));
                match davies_bouldin(sim, &result.partition) {
                    Ok(db) => out.push((task, None, "db", db)),
                    Err(e) => warn!("Davies-Bouldin index skipped: {e}"),
                }
                out.push((task, None, "objective", result.objective()));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SourceSummary {
    Synthetic {
        base_seed: u64,
        v_s: f64,
        v_c: f64,
        tests: Vec<TestSummary>,
    },
    Text {
        languages: (String, String),
        documents: (usize, usize),
        dictionary_pairs: usize,
    },
}

/// Run metadata written next to the result CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub version: &'static str,
    pub config: ExperimentConfig,
    pub alphas: Vec<f64>,
    pub source: SourceSummary,
    pub instance_seeds: Vec<u64>,
    /// Observed (min, max) of each instance's comparability matrix; values are
    /// not clamped.
    pub comparability_ranges: Vec<Option<(f64, f64)>>,
    pub conventions: BTreeMap<&'static str, &'static str>,
}

pub fn conventions() -> BTreeMap<&'static str, &'static str> {
    BTreeMap::from([
        ("idf", "ln(N/df), no smoothing"),
        ("distance", "1 - similarity"),
        ("db_centroid", "medoid"),
        ("zero_norm_similarity", "self 1, others 0"),
        ("degenerate_comparability", "0 with warning"),
        ("synthetic_noise", "standard normal in both branches"),
        ("comparability_orientation", "rows = first side, columns = second side"),
        ("ac_matching", "hungarian, zero-padded when counts differ"),
        ("cv_std", "population standard deviation over folds"),
    ])
}

pub struct SweepOutput {
    pub rows: Vec<Row>,
    pub manifest: Manifest,
}

/// Runs the configured tasks on native, induced and every mixed matrix of
/// every side of every instance.
///
/// Cells run in parallel; rows come back sorted by (side, method, α, task,
/// test), so output is independent of scheduling.
pub fn run_sweep(config: &ExperimentConfig, source: &Source) -> Result<SweepOutput> {
    let alphas = config.validate()?;
    let (instances, summary) = prepare(source, config)?;
    let rows = sweep_instances(config, &alphas, &instances)?;
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        config: config.clone(),
        alphas: alphas.iter().map(|a| a.value()).collect(),
        source: summary,
        instance_seeds: instances.iter().map(|i| i.seed).collect(),
        comparability_ranges: instances.iter().map(|i| i.comparability_range).collect(),
        conventions: conventions(),
    };
    Ok(SweepOutput { rows, manifest })
}

/// The sweep over already prepared instances.
pub fn sweep_instances(config: &ExperimentConfig, alphas: &[MixParameter], instances: &[Instance]) -> Result<Vec<Row>> {
    let mut cells: Vec<(&Instance, &Side, Method, Option<MixParameter>)> = Vec::new();
    for inst in instances {
        for side in &inst.sides {
            cells.push((inst, side, Method::Native, None));
            cells.push((inst, side, Method::Induced, None));
            for &a in alphas {
                cells.push((inst, side, Method::Mixed, Some(a)));
            }
        }
    }
    let chunks: Vec<Vec<Row>> = cells
        .par_iter()
        .map(|&(inst, side, method, alpha)| {
            let mixed;
            let sim = match (method, alpha) {
                (Method::Native, _) => &side.native,
                (Method::Induced, _) => &side.induced,
                (Method::Mixed, Some(a)) => {
                    mixed = mix(&side.native, &side.induced, a)?;
                    &mixed
                }
                (Method::Mixed, None) => unreachable!("mixed cells always carry alpha"),
            };
            let results = run_tasks(sim, &side.labels, config, inst.seed)?;
            Ok(results
                .into_iter()
                .map(|(task, fold, metric, value)| Row {
                    side: side.name.clone(),
                    test: inst.test,
                    method,
                    alpha: alpha.map(MixParameter::value),
                    task,
                    fold,
                    metric,
                    value,
                    seed: inst.seed,
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut rows: Vec<Row> = chunks.into_iter().flatten().collect();
    rows.sort_by(|a, b| {
        a.side
            .cmp(&b.side)
            .then(a.method.cmp(&b.method))
            .then(a.alpha.partial_cmp(&b.alpha).expect("alpha is finite"))
            .then(a.task.cmp(&b.task))
            .then(a.test.cmp(&b.test))
    });
    Ok(rows)
}

/// Mean and variance of one metric across tests (and folds, for per-fold rows).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub side: String,
    pub method: Method,
    pub alpha: Option<f64>,
    pub task: Task,
    pub metric: &'static str,
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
}

pub const SUMMARY_HEADER: &str = "side,method,alpha,task,metric,count,mean,variance";

impl SummaryRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.side,
            self.method,
            self.alpha.map(|a| a.to_string()).unwrap_or_default(),
            self.task,
            self.metric,
            self.count,
            self.mean,
            self.variance
        )
    }
}

pub fn summarize(rows: &[Row]) -> Vec<SummaryRow> {
    type Key = (String, Method, Option<u64>, Task, &'static str);
    let mut groups: BTreeMap<Key, Vec<f64>> = BTreeMap::new();
    for r in rows {
        // Order-preserving key for non-negative alphas.
        let key = (r.side.clone(), r.method, r.alpha.map(f64::to_bits), r.task, r.metric);
        groups.entry(key).or_default().push(r.value);
    }
    groups
        .into_iter()
        .map(|((side, method, alpha, task, metric), values)| {
            let (mean, std) = crate::learners::mean_std(&values);
            SummaryRow {
                side,
                method,
                alpha: alpha.map(f64::from_bits),
                task,
                metric,
                count: values.len(),
                mean,
                variance: std * std,
            }
        })
        .collect()
}

pub fn write_summary<W: Write>(mut writer: W, rows: &[SummaryRow]) -> Result<()> {
    writeln!(writer, "{SUMMARY_HEADER}")?;
    for r in rows {
        writeln!(writer, "{}", r.to_csv())?;
    }
    Ok(())
}
