//! The `metameval` command line.
//!
//! Exit status: 0 on success, 1 on usage errors, 2 on data or validation
//! errors. Diagnostics go to stderr; data goes to `--out` files or stdout.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{self, export_tables, load_dataset, parse_assignment, parse_mqm_tsv, parse_scores_tsv, read_text, write_text};
use crate::metaeval::TieThreshold;
use crate::model::{validate_dataset, AnnotatedDataset, PartitionSolution, ScoreTable};
use crate::partition::{restrict_dataset, restrict_to_common, solve_partition, PartitionMode};
use crate::protocols::{assemble_from_solution, Protocol, RaterAnnotations, SeverityWeights};
use crate::report::{render_markdown, render_tsv};
use crate::significance::{rank_table, Measure, RankConfig, RankingReport, SwapUnit};
use crate::synth::{gen_dataset, EvaluatorSpec, SynthConfig};

#[derive(Debug, Parser)]
#[command(name = "metameval", version, about = "Meta-evaluation of human and automatic MT evaluators")]
struct Cli {
    /// Optional TOML config; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate score files and write one canonical scores.tsv.
    Ingest(IngestArgs),
    /// Split a rater pool into k independent groups.
    Partition(PartitionArgs),
    /// Build evaluators from rater annotations and a partition.
    Score(ScoreArgs),
    /// Rank evaluators against a gold evaluator.
    Rank(RankArgs),
    /// Generate a synthetic dataset.
    Synth(SynthArgs),
    /// Render a saved JSON ranking report.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// Input scores.tsv files (repeatable).
    #[arg(long = "scores", required = true, num_args = 1..)]
    scores: Vec<PathBuf>,
    /// Keep only segments retained by this partition (and fully scored by every evaluator).
    #[arg(long)]
    partition: Option<PathBuf>,
    /// Keep only segments every evaluator scores for all systems.
    #[arg(long)]
    restrict_to_common: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PartitionArgs {
    #[arg(long)]
    assign: PathBuf,
    /// Number of groups; defaults to the inferred annotations per segment.
    #[arg(long)]
    k: Option<usize>,
    /// Require every rater to join a group.
    #[arg(long)]
    total_partition: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ProtocolArg {
    Mqm,
    Esa,
    Psqm,
    DaSqm,
}

impl From<ProtocolArg> for Protocol {
    fn from(p: ProtocolArg) -> Self {
        match p {
            ProtocolArg::Mqm => Protocol::Mqm,
            ProtocolArg::Esa => Protocol::Esa,
            ProtocolArg::Psqm => Protocol::Psqm,
            ProtocolArg::DaSqm => Protocol::DaSqm,
        }
    }
}

#[derive(Debug, Args)]
struct ScoreArgs {
    #[arg(long)]
    assign: PathBuf,
    #[arg(long)]
    partition: PathBuf,
    /// MQM error spans (spans.tsv).
    #[arg(long, conflicts_with = "scalar")]
    spans: Option<PathBuf>,
    /// Per-rater scalar scores in scores.tsv layout, rater id in the evaluator column.
    #[arg(long)]
    scalar: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "mqm")]
    protocol: ProtocolArg,
    /// Evaluator id prefix; groups become PREFIX-1, PREFIX-2, ...
    #[arg(long)]
    prefix: String,
    /// Severity weight override, e.g. `major=5` or `fluency/punctuation.minor=0.1`.
    #[arg(long = "weight")]
    weights: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Tsv,
    Markdown,
    Json,
}

#[derive(Debug, Args)]
struct RankArgs {
    /// Dataset directory holding scores.tsv, or a scores.tsv file.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    gold: Option<String>,
    #[arg(long, value_delimiter = ',')]
    human: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    measure: Option<Vec<String>>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    perm: Option<usize>,
    #[arg(long)]
    pvalue_perm: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    eps_gold: Option<f64>,
    #[arg(long)]
    swap: Option<String>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    testset: Option<String>,
    #[arg(long)]
    langpair: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 200)]
    segments: usize,
    #[arg(long, default_value_t = 10)]
    systems: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.5,1.0")]
    noise: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0,7")]
    bins: Vec<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; scores.tsv is written inside it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "markdown")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Settings readable from the `--config` TOML file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    gold: Option<String>,
    human: Option<Vec<String>>,
    measure: Option<Vec<String>>,
    alpha: Option<f64>,
    perm: Option<usize>,
    pvalue_perm: Option<usize>,
    seed: Option<u64>,
    eps_gold: Option<f64>,
    swap: Option<String>,
    format: Option<Format>,
    threads: Option<usize>,
    severity: Option<toml::Table>,
}

/// Fully resolved settings of one `rank` run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub data: PathBuf,
    pub gold: String,
    pub human: Vec<String>,
    pub measures: Vec<Measure>,
    pub rank: RankConfig,
    pub format: FormatKind,
    pub testset: Option<String>,
    pub langpair: Option<String>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormatKind {
    Tsv,
    Markdown,
    Json,
}

impl From<Format> for FormatKind {
    fn from(f: Format) -> Self {
        match f {
            Format::Tsv => FormatKind::Tsv,
            Format::Markdown => FormatKind::Markdown,
            Format::Json => FormatKind::Json,
        }
    }
}

enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Runs the command line and returns the process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp
                | ErrorKind::DisplayVersion
                | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("run `metameval --help` for usage");
            1
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn dispatch(cli: Cli) -> CliResult<()> {
    let file = match &cli.config {
        Some(path) => {
            let text = read_text(path)?;
            toml::from_str::<FileConfig>(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => FileConfig::default(),
    };
    configure_threads(file.threads);
    match cli.command {
        Command::Ingest(a) => cmd_ingest(a),
        Command::Partition(a) => cmd_partition(a),
        Command::Score(a) => cmd_score(a, &file),
        Command::Rank(a) => {
            let cfg = resolve_rank(a, file)?;
            cmd_rank(&cfg)
        }
        Command::Synth(a) => cmd_synth(a, &file),
        Command::Report(a) => cmd_report(a),
    }
}

fn configure_threads(from_file: Option<usize>) {
    let env = std::env::var("METAMEVAL_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok());
    if let Some(n) = env.or(from_file).filter(|&n| n > 0) {
        // a pool may already exist when embedded; keep it then
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "input file not found"),
        ))
    }
}

fn require_out_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() && !p.is_dir() => Err(Error::io(
            p,
            std::io::Error::new(std::io::ErrorKind::NotFound, "output directory not found"),
        )),
        _ => Ok(()),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => write_text(path, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct PartitionFile {
    k: usize,
    mode: PartitionMode,
    #[serde(flatten)]
    solution: PartitionSolution,
}

fn read_partition(path: &Path) -> Result<PartitionSolution> {
    let file: PartitionFile = serde_json::from_str(&read_text(path)?)?;
    Ok(file.solution)
}

fn cmd_ingest(a: IngestArgs) -> CliResult<()> {
    for p in &a.scores {
        require_file(p)?;
    }
    if let Some(p) = &a.partition {
        require_file(p)?;
    }
    if let Some(p) = &a.out {
        require_out_parent(p)?;
    }
    let mut tables: BTreeMap<String, ScoreTable> = BTreeMap::new();
    for p in &a.scores {
        for t in parse_scores_tsv(&read_text(p)?)? {
            if tables.contains_key(t.evaluator_id()) {
                return Err(Error::Validation(format!(
                    "evaluator {} appears in more than one input",
                    t.evaluator_id()
                ))
                .into());
            }
            tables.insert(t.evaluator_id().to_owned(), t);
        }
    }
    let mut dataset = AnnotatedDataset::from_tables("ingest", "", tables.into_values());
    let violations = validate_dataset(&dataset);
    if !violations.is_empty() {
        for v in &violations {
            eprintln!("violation: {v}");
        }
        return Err(Error::Validation(format!("{} violation(s)", violations.len())).into());
    }
    let all: Vec<String> = dataset.evaluator_ids().map(str::to_owned).collect();
    let all: Vec<&str> = all.iter().map(String::as_str).collect();
    if let Some(p) = &a.partition {
        let r = restrict_dataset(&dataset, &read_partition(p)?, &all)?;
        r.warnings.iter().for_each(|w| eprintln!("warning: {w}"));
        dataset = r.dataset;
    } else if a.restrict_to_common {
        let r = restrict_to_common(&dataset, &all)?;
        r.warnings.iter().for_each(|w| eprintln!("warning: {w}"));
        dataset = r.dataset;
    }
    eprintln!(
        "{} evaluators, {} systems, {} segments",
        dataset.score_tables.len(),
        dataset.systems.len(),
        dataset.segments.len()
    );
    emit(a.out.as_deref(), &ingest::export_canonical(&dataset))?;
    Ok(())
}

fn cmd_partition(a: PartitionArgs) -> CliResult<()> {
    require_file(&a.assign)?;
    if let Some(p) = &a.out {
        require_out_parent(p)?;
    }
    let assignment = parse_assignment(&read_text(&a.assign)?)?;
    let k = a.k.unwrap_or(assignment.k());
    let mode = if a.total_partition {
        PartitionMode::Total
    } else {
        PartitionMode::AllowUnassigned
    };
    let flagged = assignment.flagged();
    if !flagged.is_empty() {
        eprintln!(
            "warning: {} segment(s) with cover size other than {}",
            flagged.len(),
            assignment.k()
        );
    }
    let solution = solve_partition(&assignment, k, mode)?;
    eprintln!(
        "retained {} of {} segments with {} groups",
        solution.objective,
        assignment.covers().len(),
        k
    );
    let mut json = serde_json::to_string_pretty(&PartitionFile { k, mode, solution })
        .map_err(Error::from)?;
    json.push('\n');
    emit(a.out.as_deref(), &json)?;
    Ok(())
}

fn cmd_score(a: ScoreArgs, file: &FileConfig) -> CliResult<()> {
    require_file(&a.assign)?;
    require_file(&a.partition)?;
    if let Some(p) = &a.out {
        require_out_parent(p)?;
    }
    let protocol: Protocol = a.protocol.into();
    let assignment = parse_assignment(&read_text(&a.assign)?)?;
    let solution = read_partition(&a.partition)?;
    solution.check(&assignment)?;

    let tables = match (protocol, &a.spans, &a.scalar) {
        (Protocol::Mqm, Some(spans), None) => {
            require_file(spans)?;
            let mut weights = SeverityWeights::default();
            if let Some(sev) = &file.severity {
                let mut wrapped = toml::Table::new();
                wrapped.insert("severity".into(), toml::Value::Table(sev.clone()));
                weights.apply_toml(&wrapped)?;
            }
            for w in &a.weights {
                let (key, value) = w
                    .split_once('=')
                    .ok_or_else(|| Failure::Usage(format!("--weight expects KEY=VALUE, got {w:?}")))?;
                let value: f64 = value
                    .trim()
                    .parse()
                    .map_err(|_| Failure::Usage(format!("--weight value {value:?} is not a number")))?;
                weights.apply(key, value)?;
            }
            let set = parse_mqm_tsv(&read_text(spans)?)?;
            assemble_from_solution(
                &a.prefix,
                &solution,
                RaterAnnotations::Spans {
                    set: &set,
                    weights: &weights,
                },
                &assignment,
            )?
        }
        (p, None, Some(scalar)) if p.is_scalar() => {
            require_file(scalar)?;
            let raters: BTreeMap<String, ScoreTable> = parse_scores_tsv(&read_text(scalar)?)?
                .into_iter()
                .map(|t| (t.evaluator_id().to_owned(), t))
                .collect();
            assemble_from_solution(
                &a.prefix,
                &solution,
                RaterAnnotations::Scalar {
                    tables: &raters,
                    protocol: p,
                },
                &assignment,
            )?
        }
        (Protocol::Mqm, _, _) => {
            return Err(Failure::Usage("protocol mqm needs --spans".into()));
        }
        _ => {
            return Err(Failure::Usage(format!(
                "protocol {protocol} needs --scalar"
            )));
        }
    };
    emit(a.out.as_deref(), &export_tables(&tables))?;
    Ok(())
}

fn resolve_rank(a: RankArgs, file: FileConfig) -> CliResult<RunConfig> {
    let gold = a
        .gold
        .or(file.gold)
        .ok_or_else(|| Failure::Usage("rank requires --gold".into()))?;
    let seed = a
        .seed
        .or(file.seed)
        .ok_or_else(|| Failure::Usage("rank requires --seed".into()))?;
    let measures = a
        .measure
        .or(file.measure)
        .unwrap_or_else(|| vec!["spa".into(), "acc-eq".into()])
        .iter()
        .map(|m| m.parse::<Measure>())
        .collect::<Result<Vec<_>>>()
        .map_err(|e| Failure::Usage(e.to_string()))?;
    let swap = match a.swap.or(file.swap) {
        Some(s) => s.parse::<SwapUnit>().map_err(|e| Failure::Usage(e.to_string()))?,
        None => SwapUnit::Item,
    };
    let eps_gold = TieThreshold::new(a.eps_gold.or(file.eps_gold).unwrap_or(0.0))
        .map_err(|e| Failure::Usage(e.to_string()))?;
    let defaults = RankConfig::default();
    Ok(RunConfig {
        data: a.data,
        gold,
        human: a.human.or(file.human).unwrap_or_default(),
        measures,
        rank: RankConfig {
            alpha: a.alpha.or(file.alpha).unwrap_or(defaults.alpha),
            n_perm: a.perm.or(file.perm).unwrap_or(defaults.n_perm),
            pvalue_perm: a.pvalue_perm.or(file.pvalue_perm).unwrap_or(defaults.pvalue_perm),
            seed,
            eps_gold,
            swap_unit: swap,
            smoothing: defaults.smoothing,
        },
        format: a.format.or(file.format).unwrap_or(Format::Markdown).into(),
        testset: a.testset,
        langpair: a.langpair,
        out: a.out,
    })
}

fn cmd_rank(cfg: &RunConfig) -> CliResult<()> {
    let scores_path = if cfg.data.is_dir() {
        cfg.data.join("scores.tsv")
    } else {
        cfg.data.clone()
    };
    require_file(&scores_path)?;
    if let Some(p) = &cfg.out {
        require_out_parent(p)?;
    }
    let testset = cfg.testset.clone().unwrap_or_else(|| {
        let base = if cfg.data.is_dir() {
            cfg.data.as_path()
        } else {
            cfg.data.parent().unwrap_or(Path::new(""))
        };
        base.file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into())
    });
    let dataset = load_dataset(&scores_path, &testset, cfg.langpair.as_deref().unwrap_or(""))?;
    let violations = validate_dataset(&dataset);
    if !violations.is_empty() {
        for v in &violations {
            eprintln!("violation: {v}");
        }
        return Err(Error::Validation(format!("{} violation(s)", violations.len())).into());
    }
    let humans: Vec<&str> = cfg.human.iter().map(String::as_str).collect();
    let report = rank_table(&dataset, &cfg.gold, &humans, &cfg.measures, &cfg.rank)?;
    emit(cfg.out.as_deref(), &render(&report, cfg.format)?)?;
    Ok(())
}

fn render(report: &RankingReport, format: FormatKind) -> Result<String> {
    Ok(match format {
        FormatKind::Markdown => render_markdown(report),
        FormatKind::Tsv => render_tsv(report),
        FormatKind::Json => {
            let mut s = serde_json::to_string_pretty(report)?;
            s.push('\n');
            s
        }
    })
}

fn cmd_synth(a: SynthArgs, file: &FileConfig) -> CliResult<()> {
    let seed = a
        .seed
        .or(file.seed)
        .ok_or_else(|| Failure::Usage("synth requires --seed".into()))?;
    let evaluators = a
        .noise
        .iter()
        .flat_map(|&n| a.bins.iter().map(move |&b| EvaluatorSpec::new(n, b)))
        .collect();
    let config = SynthConfig {
        n_segments: a.segments,
        n_systems: a.systems,
        evaluators,
        seed,
    };
    let dataset = gen_dataset(&config)?;
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    write_text(&a.out.join("scores.tsv"), &ingest::export_canonical(&dataset))?;
    eprintln!(
        "wrote {} evaluators plus gold to {}",
        config.evaluators.len(),
        a.out.join("scores.tsv").display()
    );
    Ok(())
}

fn cmd_report(a: ReportArgs) -> CliResult<()> {
    require_file(&a.input)?;
    if let Some(p) = &a.out {
        require_out_parent(p)?;
    }
    let report: RankingReport = serde_json::from_str(&read_text(&a.input)?).map_err(Error::from)?;
    emit(a.out.as_deref(), &render(&report, a.format.into())?)?;
    Ok(())
}
