use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{error, info};
use serde_json::json;

use trimode::comparability::pairwise_comparability;
use trimode::evaluation::evaluate;
use trimode::experiment::{
    check_languages, run_sweep, summarize, write_rows, write_summary, AlphaGrid, ExperimentConfig, Source, Task,
};
use trimode::learners::{kfold_cv, kmedoids, loocv};
use trimode::matrix::{induced_similarity_cols, induced_similarity_rows, mix};
use trimode::synthetic::generate_suite;
use trimode::text::{native_similarity, prepare_corpus, Corpus, Stoplist};
use trimode::toy::{generate_toy, ToyConfig};
use trimode::{BilingualDictionary, ComparabilityMatrix, Error, Measure, MixParameter, Partition, SimilarityMatrix};

#[derive(Parser)]
#[command(
    name = "trimode",
    version,
    about = "Native/induced similarity mixing for bilingual document sets"
)]
struct Cli {
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded suite of synthetic tests.
    Synth(SynthArgs),
    /// Write the constructed bilingual toy corpus and its dictionary.
    Toy(ToyArgs),
    /// Normalize, refine and add noise to a labeled corpus.
    Textprep(TextprepArgs),
    /// tf-idf cosine similarity of a corpus.
    Native(NativeArgs),
    /// Write the `id,label` file of a corpus.
    Labels(NativeArgs),
    /// Pairwise comparability between two corpora.
    Comparability(ComparabilityArgs),
    /// Induced similarity from a comparability matrix.
    Induce(InduceArgs),
    /// Blend native and induced similarity.
    Mix(MixArgs),
    /// 1-NN error by cross-validation or leave-one-out.
    Knn(KnnArgs),
    /// k-medoids clustering of a similarity matrix.
    Kmedoids(KmedoidsArgs),
    /// AC, NMI and optionally DB of a predicted partition.
    Evaluate(EvaluateArgs),
    /// Full α sweep over a synthetic suite or a corpus pair.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, env = "TRIMODE_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, env = "TRIMODE_TESTS", default_value_t = 20)]
    tests: usize,
    #[arg(long, env = "TRIMODE_V_S", default_value_t = trimode::synthetic::DEFAULT_V_S)]
    v_s: f64,
    #[arg(long, env = "TRIMODE_V_C", default_value_t = trimode::synthetic::DEFAULT_V_C)]
    v_c: f64,
    #[arg(long, env = "TRIMODE_OUT")]
    out: PathBuf,
}

#[derive(Args)]
struct ToyArgs {
    #[arg(long, env = "TRIMODE_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, env = "TRIMODE_NOISE_FRACTION", default_value_t = 0.3)]
    noise_fraction: f64,
    #[arg(long, env = "TRIMODE_OUT")]
    out: PathBuf,
}

#[derive(Args)]
struct TextprepArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    stoplist: Option<PathBuf>,
    #[arg(long, env = "TRIMODE_THRESHOLD", default_value_t = 0.5)]
    threshold: f64,
    #[arg(long, env = "TRIMODE_TOP_N", default_value_t = 100)]
    top_n: usize,
    #[arg(long, env = "TRIMODE_NOISE_FRACTION", default_value_t = 0.5)]
    noise_fraction: f64,
    #[arg(long, env = "TRIMODE_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, env = "TRIMODE_OUT")]
    out: PathBuf,
}

#[derive(Args)]
struct NativeArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, env = "TRIMODE_OUT")]
    out: PathBuf,
}

#[derive(Args)]
struct CorpusPair {
    #[arg(long)]
    corpus_a: PathBuf,
    #[arg(long)]
    corpus_b: PathBuf,
    /// Tab-separated `term_a<TAB>term_b` pairs.
    #[arg(long)]
    dictionary: PathBuf,
}

#[derive(Args)]
struct ComparabilityArgs {
    #[command(flatten)]
    inputs: CorpusPair,
    #[arg(long, env = "TRIMODE_MEASURE", default_value = "va2")]
    measure: Measure,
    #[arg(long, env = "TRIMODE_OUT")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Side {
    /// Similarity between rows (first corpus).
    Rows,
    /// Similarity between columns (second corpus).
    Cols,
}

#[derive(Args)]
struct InduceArgs {
    #[arg(long)]
    comparability: PathBuf,
    #[arg(long, value_enum, default_value = "rows")]
    side: Side,
    #[arg(long, env = "TRIMODE_OUT")]
    out: PathBuf,
}

#[derive(Args)]
struct MixArgs {
    #[arg(long)]
    native: PathBuf,
    #[arg(long)]
    induced: PathBuf,
    #[arg(long, env = "TRIMODE_ALPHA")]
    alpha: f64,
    #[arg(long, env = "TRIMODE_OUT")]
    out: PathBuf,
}

#[derive(Args)]
struct KnnArgs {
    #[arg(long)]
    similarity: PathBuf,
    /// `id,label` file covering every matrix id.
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, env = "TRIMODE_FOLDS", default_value_t = 10)]
    folds: usize,
    #[arg(long, env = "TRIMODE_SEED", default_value_t = 0)]
    seed: u64,
    /// Leave-one-out instead of k-fold.
    #[arg(long)]
    loo: bool,
}

#[derive(Args)]
struct KmedoidsArgs {
    #[arg(long)]
    similarity: PathBuf,
    #[arg(long, env = "TRIMODE_K")]
    k: usize,
    #[arg(long, env = "TRIMODE_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, env = "TRIMODE_MAX_ITER", default_value_t = 100)]
    max_iter: usize,
    /// Predicted `id,label` file.
    #[arg(long, env = "TRIMODE_OUT")]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    /// Similarity matrix for the Davies-Bouldin index.
    #[arg(long)]
    similarity: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// First corpus; with --corpus-b and --dictionary selects a text sweep.
    #[arg(long, requires_all = ["corpus_b", "dictionary"])]
    corpus_a: Option<PathBuf>,
    #[arg(long, requires = "corpus_a")]
    corpus_b: Option<PathBuf>,
    #[arg(long, requires = "corpus_a")]
    dictionary: Option<PathBuf>,
    /// Number of synthetic tests; used when no corpora are given.
    #[arg(long, env = "TRIMODE_TESTS", default_value_t = 20)]
    tests: usize,
    #[arg(long, env = "TRIMODE_SYNTH_SEED", default_value_t = 0)]
    synth_seed: u64,
    #[arg(long, env = "TRIMODE_V_S", default_value_t = trimode::synthetic::DEFAULT_V_S)]
    v_s: f64,
    #[arg(long, env = "TRIMODE_V_C", default_value_t = trimode::synthetic::DEFAULT_V_C)]
    v_c: f64,
    #[arg(long, env = "TRIMODE_MEASURE", default_value = "va2")]
    measure: Measure,
    #[arg(long, env = "TRIMODE_ALPHA_START", default_value_t = 0.0)]
    alpha_start: f64,
    #[arg(long, env = "TRIMODE_ALPHA_STOP", default_value_t = 1.0)]
    alpha_stop: f64,
    #[arg(long, env = "TRIMODE_ALPHA_STEP", default_value_t = 0.05)]
    alpha_step: f64,
    #[arg(
        long,
        env = "TRIMODE_TASKS",
        value_delimiter = ',',
        default_value = "knn-loo,knn-cv,kmedoids"
    )]
    tasks: Vec<Task>,
    #[arg(long, env = "TRIMODE_FOLDS", default_value_t = 10)]
    folds: usize,
    #[arg(long, env = "TRIMODE_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, env = "TRIMODE_K")]
    k: Option<usize>,
    #[arg(long, env = "TRIMODE_MAX_ITER", default_value_t = 100)]
    max_iter: usize,
    #[arg(long, env = "TRIMODE_OUT")]
    out: PathBuf,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => 3,
        Error::Parse { .. } | Error::InvalidInput(_) => 4,
        Error::LanguageMismatch(_) => 5,
        Error::InvalidParameter(_) => 6,
        Error::DimensionMismatch { .. } | Error::IdMismatch { .. } => 7,
        Error::CoincidentMedoids { .. } => 1,
    }
}

fn open(path: &Path) -> trimode::Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn create(path: &Path) -> trimode::Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn name(path: &Path) -> String {
    path.display().to_string()
}

fn read_similarity(path: &Path) -> trimode::Result<SimilarityMatrix> {
    SimilarityMatrix::read_csv(open(path)?, &name(path))
}

fn read_comparability(path: &Path) -> trimode::Result<ComparabilityMatrix> {
    ComparabilityMatrix::read_csv(open(path)?, &name(path))
}

fn read_corpus(path: &Path) -> trimode::Result<Corpus> {
    Corpus::read_tsv(open(path)?, &name(path))
}

fn write_similarity(sim: &SimilarityMatrix, path: &Path) -> trimode::Result<()> {
    let mut w = create(path)?;
    sim.write_csv(&mut w)?;
    Ok(w.flush()?)
}

fn write_json(value: &impl serde::Serialize, mut w: impl Write) -> trimode::Result<()> {
    serde_json::to_writer_pretty(&mut w, value).map_err(io::Error::other)?;
    writeln!(w)?;
    Ok(w.flush()?)
}

fn write_labels<S: AsRef<str>>(ids: &[String], labels: &[S], path: &Path) -> trimode::Result<()> {
    let mut w = create(path)?;
    writeln!(w, "id,label")?;
    for (id, l) in ids.iter().zip(labels) {
        writeln!(w, "{id},{}", l.as_ref())?;
    }
    Ok(w.flush()?)
}

/// Reads an `id,label` file.
fn read_labels(path: &Path) -> trimode::Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    let parse = |line: usize, message: String| Error::Parse {
        source_name: name(path),
        line: line as u64,
        message,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "id,label" => {}
        _ => return Err(parse(1, "expected header \"id,label\"".into())),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let Some((id, label)) = line.split_once(',') else {
            return Err(parse(i + 1, format!("expected two fields, found {line:?}")));
        };
        out.push((id.trim().to_string(), label.trim().to_string()));
    }
    Ok(out)
}

/// Labels of `ids`, in that order.
fn labels_for(ids: &[String], path: &Path) -> trimode::Result<Vec<String>> {
    let table: std::collections::HashMap<String, String> = read_labels(path)?.into_iter().collect();
    ids.iter()
        .map(|id| {
            table
                .get(id)
                .cloned()
                .ok_or_else(|| Error::InvalidInput(format!("{}: no label for {id:?}", path.display())))
        })
        .collect()
}

fn synth(args: SynthArgs) -> trimode::Result<()> {
    let suite = generate_suite(args.seed, args.tests, args.v_s, args.v_c)?;
    for (i, t) in suite.iter().enumerate() {
        let dir = args.out.join(format!("test-{i:03}"));
        write_similarity(&t.sim_s, &dir.join("similarity_s.csv"))?;
        write_similarity(&t.sim_sp, &dir.join("similarity_t.csv"))?;
        let mut w = create(&dir.join("comparability.csv"))?;
        t.comp.write_csv(&mut w)?;
        w.flush()?;
        write_labels(
            t.sim_s.ids(),
            &t.labels_s.iter().map(usize::to_string).collect::<Vec<_>>(),
            &dir.join("labels_s.csv"),
        )?;
        write_labels(
            t.sim_sp.ids(),
            &t.labels_sp.iter().map(usize::to_string).collect::<Vec<_>>(),
            &dir.join("labels_t.csv"),
        )?;
    }
    let summaries: Vec<_> = suite.iter().map(|t| t.summary()).collect();
    write_json(&summaries, create(&args.out.join("suite.json"))?)?;
    info!("wrote {} tests to {}", suite.len(), args.out.display());
    Ok(())
}

fn toy(args: ToyArgs) -> trimode::Result<()> {
    let config = ToyConfig {
        noise_fraction: args.noise_fraction,
        ..Default::default()
    };
    let toy = generate_toy(args.seed, &config)?;
    for (corpus, file) in [(&toy.corpus_a, "corpus_a.tsv"), (&toy.corpus_b, "corpus_b.tsv")] {
        let mut w = create(&args.out.join(file))?;
        corpus.write_tsv(&mut w)?;
        w.flush()?;
    }
    let mut w = create(&args.out.join("dictionary.tsv"))?;
    toy.dictionary.write_tsv(&mut w)?;
    Ok(w.flush()?)
}

fn textprep(args: TextprepArgs) -> trimode::Result<()> {
    let stoplist = match &args.stoplist {
        Some(p) => Stoplist::read(open(p)?)?,
        None => Stoplist::default(),
    };
    let raw = read_corpus(&args.corpus)?.normalized(&stoplist);
    let prepared = prepare_corpus(&raw, args.threshold, args.top_n, args.noise_fraction, args.seed)?;
    info!("kept {} of {} documents", prepared.len(), raw.len());
    let mut w = create(&args.out)?;
    prepared.write_tsv(&mut w)?;
    Ok(w.flush()?)
}

fn native(args: NativeArgs) -> trimode::Result<()> {
    write_similarity(&native_similarity(&read_corpus(&args.corpus)?)?, &args.out)
}

fn labels(args: NativeArgs) -> trimode::Result<()> {
    let corpus = read_corpus(&args.corpus)?;
    write_labels(&corpus.ids(), &corpus.labels(), &args.out)
}

fn read_pair(inputs: &CorpusPair) -> trimode::Result<(Corpus, Corpus, BilingualDictionary)> {
    let a = read_corpus(&inputs.corpus_a)?;
    let b = read_corpus(&inputs.corpus_b)?;
    let dict = BilingualDictionary::read_tsv(open(&inputs.dictionary)?, &name(&inputs.dictionary))?;
    check_languages(&a, &b, &dict)?;
    Ok((a, b, dict))
}

fn comparability(args: ComparabilityArgs) -> trimode::Result<()> {
    let (a, b, dict) = read_pair(&args.inputs)?;
    let comp = pairwise_comparability(&a.lexicons(), &b.lexicons(), &dict, args.measure)?;
    let mut w = create(&args.out)?;
    comp.write_csv(&mut w)?;
    Ok(w.flush()?)
}

fn induce(args: InduceArgs) -> trimode::Result<()> {
    let comp = read_comparability(&args.comparability)?;
    let sim = match args.side {
        Side::Rows => induced_similarity_rows(&comp)?,
        Side::Cols => induced_similarity_cols(&comp)?,
    };
    write_similarity(&sim, &args.out)
}

fn mix_cmd(args: MixArgs) -> trimode::Result<()> {
    let alpha = MixParameter::new(args.alpha)?;
    let mixed = mix(&read_similarity(&args.native)?, &read_similarity(&args.induced)?, alpha)?;
    write_similarity(&mixed, &args.out)
}

fn knn(args: KnnArgs) -> trimode::Result<()> {
    let sim = read_similarity(&args.similarity)?;
    let (truth, _) = Partition::from_labels(&labels_for(sim.ids(), &args.labels)?);
    let stdout = io::stdout().lock();
    if args.loo {
        write_json(
            &json!({ "protocol": "loo", "error": loocv(&sim, truth.assignment())? }),
            stdout,
        )
    } else {
        write_json(&kfold_cv(&sim, truth.assignment(), args.folds, args.seed)?, stdout)
    }
}

fn kmedoids_cmd(args: KmedoidsArgs) -> trimode::Result<()> {
    let sim = read_similarity(&args.similarity)?;
    let run = kmedoids(&sim, args.k, args.seed, args.max_iter)?;
    let labels: Vec<String> = run.partition.assignment().iter().map(usize::to_string).collect();
    write_labels(sim.ids(), &labels, &args.out)?;
    let medoids: Vec<&str> = run.medoids.iter().map(|&m| sim.ids()[m].as_str()).collect();
    write_json(
        &json!({
            "k": args.k,
            "seed": run.seed,
            "objective": run.objective(),
            "iterations": run.iterations,
            "converged": run.converged,
            "medoids": medoids,
        }),
        io::stdout().lock(),
    )
}

fn evaluate_cmd(args: EvaluateArgs) -> trimode::Result<()> {
    let pred = read_labels(&args.pred)?;
    let ids: Vec<String> = pred.iter().map(|(id, _)| id.clone()).collect();
    let truth = labels_for(&ids, &args.truth)?;
    let (pred_part, _) = Partition::from_labels(&pred.iter().map(|(_, l)| l.as_str()).collect::<Vec<_>>());
    let (truth_part, _) = Partition::from_labels(&truth);
    let sim = match &args.similarity {
        Some(p) => {
            let sim = read_similarity(p)?;
            if sim.ids() != ids.as_slice() {
                return Err(Error::InvalidInput(format!(
                    "{}: matrix ids do not match the prediction file order",
                    p.display()
                )));
            }
            Some(sim)
        }
        None => None,
    };
    write_json(&evaluate(&pred_part, &truth_part, sim.as_ref())?, io::stdout().lock())
}

fn sweep(args: SweepArgs) -> trimode::Result<()> {
    let config = ExperimentConfig {
        measure: args.measure,
        grid: AlphaGrid::new(args.alpha_start, args.alpha_stop, args.alpha_step)?,
        tasks: args.tasks,
        folds: args.folds,
        seed: args.seed,
        k: args.k,
        max_iter: args.max_iter,
    };
    let source = match (args.corpus_a, args.corpus_b, args.dictionary) {
        (Some(corpus_a), Some(corpus_b), Some(dictionary)) => {
            let (corpus_a, corpus_b, dictionary) = read_pair(&CorpusPair {
                corpus_a,
                corpus_b,
                dictionary,
            })?;
            Source::Text {
                corpus_a,
                corpus_b,
                dictionary,
            }
        }
        _ => Source::Synthetic {
            base_seed: args.synth_seed,
            tests: args.tests,
            v_s: args.v_s,
            v_c: args.v_c,
        },
    };
    let out = run_sweep(&config, &source)?;
    let mut w = create(&args.out.join("results.csv"))?;
    write_rows(&mut w, &out.rows)?;
    w.flush()?;
    let mut w = create(&args.out.join("summary.csv"))?;
    write_summary(&mut w, &summarize(&out.rows))?;
    w.flush()?;
    write_json(&out.manifest, create(&args.out.join("manifest.json"))?)?;
    info!("wrote {} rows to {}", out.rows.len(), args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Toy(a) => toy(a),
        Command::Textprep(a) => textprep(a),
        Command::Native(a) => native(a),
        Command::Labels(a) => labels(a),
        Command::Comparability(a) => comparability(a),
        Command::Induce(a) => induce(a),
        Command::Mix(a) => mix_cmd(a),
        Command::Knn(a) => knn(a),
        Command::Kmedoids(a) => kmedoids_cmd(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Sweep(a) => sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
