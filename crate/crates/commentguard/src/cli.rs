//! Command-line entry point.
//!
//! Exit codes: 0 success, 1 operational error, 2 usage error.

use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use commentguard_core::annotation::{CategoryScheme, NextItem, Rater, RaterGroup};
use commentguard_core::classifiers::{
    ClassifierModel, ModelKind, RemoteSpec, TrainConfig, TransformerJobConfig, DEFAULT_THRESHOLD,
};
use commentguard_core::llm::LlmConfig;
use commentguard_core::metrics::{
    aggregate, confusion, f1_score, fleiss_kappa, reconstruct_confusion, render_report,
    round_half_up, ConfusionMatrix, MetricSet,
};
use commentguard_core::split::{split_indices, SplitSpec};
use commentguard_core::{BinaryLabel, LabeledComment, RawLabel};
use serde::Deserialize;

use crate::annotation_log::{read_session, SessionLog};
use crate::backend::{evaluate, Backend, EvalRun, ModelBackend};
use crate::corpus::{read_corpus, ParsedCorpus};
use crate::llm::{HttpTransport, RecordingTransport, ReplayTransport, Transport};
use crate::model_io::{load_model_file, save_model_file};
use crate::service::{self, ServiceConfig};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Parser)]
#[command(
    name = "commentguard",
    version,
    about = "Comment moderation: train, evaluate, serve and annotate"
)]
pub struct Cli {
    /// Seed for splits and randomized training.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML config whose keys mirror the flag names.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a native classifier on the train part of a corpus.
    Train(TrainArgs),
    /// Score a model file on one split part.
    Eval(EvalArgs),
    /// Report several models side by side.
    Compare(CompareArgs),
    /// Run the HTTP classification service.
    Serve(ServeArgs),
    /// Rate session items interactively; labels are read from stdin.
    Annotate(AnnotateArgs),
    /// Fleiss kappa per rater group.
    Kappa(KappaArgs),
    /// Aggregate per-post confusion matrices.
    AuditFilter(AuditFilterArgs),
    /// Recover an integer confusion matrix from published metrics.
    Reconstruct(ReconstructArgs),
    /// Print the transformer fine-tuning job description.
    TransformerJob(TransformerJobArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Nb,
    Lr,
    Tree,
    Forest,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Nb => ModelKind::NaiveBayes,
            ModelArg::Lr => ModelKind::LogisticRegression,
            ModelArg::Tree => ModelKind::DecisionTree,
            ModelArg::Forest => ModelKind::RandomForest,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PartArg {
    Train,
    Val,
    Test,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GroupArg {
    Expert,
    Amateur,
    Unspecified,
}

impl From<GroupArg> for RaterGroup {
    fn from(g: GroupArg) -> Self {
        match g {
            GroupArg::Expert => RaterGroup::Expert,
            GroupArg::Amateur => RaterGroup::Amateur,
            GroupArg::Unspecified => RaterGroup::Unspecified,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Three,
    Binary,
    Both,
}

fn parse_split(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| format!("`{p}` is not a number"))
        })
        .collect::<Result<_, _>>()?;
    let [a, b, c] = parts[..] else {
        return Err("expected three comma-separated fractions".into());
    };
    SplitSpec::new(a, b, c).map_err(|e| e.to_string())?;
    Ok([a, b, c])
}

#[derive(Debug, Clone, Args)]
pub struct SplitArgs {
    /// Train, validation and test fractions.
    #[arg(long, value_parser = parse_split)]
    pub split: Option<[f64; 3]>,
    /// Shuffle without preserving the class ratio per part.
    #[arg(long)]
    pub no_stratify: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub model: ModelArg,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub split: SplitArgs,
    /// Pick the threshold that maximizes F1 on the validation part.
    #[arg(long)]
    pub tune_threshold: bool,
}

#[derive(Debug, Clone, Args)]
pub struct RemoteArgs {
    /// Answer remote requests from a fixture file instead of the network.
    #[arg(long, conflicts_with = "record")]
    pub replay: Option<PathBuf>,
    /// Append every live remote exchange to a fixture file.
    #[arg(long)]
    pub record: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    pub split_part: PartArg,
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub remote: RemoteArgs,
    /// Also write the report as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long, value_delimiter = ',')]
    pub models: Vec<PathBuf>,
    #[arg(long)]
    pub corpus: PathBuf,
    /// Chat-model config (TOML) evaluated as an extra backend.
    #[arg(long)]
    pub llm: Option<PathBuf>,
    /// Rows per nondeterministic backend.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
    pub runs: u32,
    #[arg(long, value_enum, default_value = "test")]
    pub split_part: PartArg,
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub remote: RemoteArgs,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long)]
    pub host: Option<std::net::IpAddr>,
    /// Report store (JSONL).
    #[arg(long)]
    pub reports: Option<PathBuf>,
    /// Identifier reported to clients.
    #[arg(long)]
    pub model_id: Option<String>,
    /// Disable rate limiting.
    #[arg(long)]
    pub test_mode: bool,
}

#[derive(Debug, Args)]
pub struct AnnotateArgs {
    #[arg(long)]
    pub session: PathBuf,
    #[arg(long)]
    pub rater: String,
    /// Group used when the rater is registered.
    #[arg(long, value_enum)]
    pub group: Option<GroupArg>,
    /// Corpus whose comments are added to the session first.
    #[arg(long)]
    pub items: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct KappaArgs {
    #[arg(long)]
    pub session: PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    pub scheme: SchemeArg,
}

#[derive(Debug, Args)]
pub struct AuditFilterArgs {
    /// JSON array of [tp,fp,fn,tn] arrays or objects, or one `tp,fp,fn,tn` line per post.
    #[arg(long)]
    pub matrices: PathBuf,
}

fn unit_interval(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if (0.0..=1.0).contains(&x) => Ok(x),
        _ => Err(format!("`{s}` is not a number in [0,1]")),
    }
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[arg(long, value_parser = unit_interval)]
    pub accuracy: Option<f64>,
    #[arg(long, value_parser = unit_interval)]
    pub precision: f64,
    #[arg(long, value_parser = unit_interval)]
    pub recall: f64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub n_pos: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub n_neg: u64,
}

#[derive(Debug, Args)]
pub struct TransformerJobArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Settings file. Every key is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub split: Option<[f64; 3]>,
    pub train: TrainConfig,
    pub llm: Option<LlmConfig>,
    pub serve: ServiceConfig,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let cfg: FileConfig =
            toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        if let Some([a, b, c]) = cfg.split {
            SplitSpec::new(a, b, c)
                .with_context(|| format!("invalid split in {}", path.display()))?;
        }
        cfg.train
            .validate()
            .map_err(|e| anyhow!("invalid [train] section: {e}"))?;
        Ok(cfg)
    }
}

enum Failure {
    Usage(String),
    Op(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Op(e)
    }
}

struct Ctx<'a> {
    seed: u64,
    file: FileConfig,
    input: &'a mut dyn BufRead,
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, input: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    0
                }
                _ => {
                    let _ = write!(err, "{text}");
                    2
                }
            };
        }
    };
    match execute(cli, input, out, err) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            2
        }
        Err(Failure::Op(e)) => {
            let _ = writeln!(err, "error: {e:#}");
            1
        }
    }
}

fn execute(
    cli: Cli,
    input: &mut dyn BufRead,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), Failure> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path).map_err(|e| Failure::Usage(format!("{e:#}")))?,
        None => FileConfig::default(),
    };
    let seed = cli.seed.or(file.seed).unwrap_or(DEFAULT_SEED);
    let mut ctx = Ctx {
        seed,
        file,
        input,
        out,
        err,
    };
    match cli.command {
        Command::Train(a) => train(&mut ctx, a),
        Command::Eval(a) => eval(&mut ctx, a),
        Command::Compare(a) => compare(&mut ctx, a),
        Command::Serve(a) => serve(&mut ctx, a),
        Command::Annotate(a) => annotate(&mut ctx, a),
        Command::Kappa(a) => kappa(&mut ctx, a),
        Command::AuditFilter(a) => audit_filter(&mut ctx, a),
        Command::Reconstruct(a) => reconstruct(&mut ctx, a),
        Command::TransformerJob(a) => transformer_job(&mut ctx, a),
    }
}

impl Ctx<'_> {
    fn split_spec(&self, args: &SplitArgs) -> SplitSpec {
        let [a, b, c] = args.split.or(self.file.split).unwrap_or([0.8, 0.1, 0.1]);
        SplitSpec {
            train_fraction: a,
            val_fraction: b,
            test_fraction: c,
            seed: self.seed,
            stratified: !args.no_stratify,
        }
    }

    fn load_labeled(&mut self, path: &Path) -> anyhow::Result<Vec<LabeledComment>> {
        let corpus = read_corpus(path).with_context(|| format!("corpus {}", path.display()))?;
        self.warn_rejected(&corpus);
        let labeled = corpus.labeled()?;
        if labeled.is_empty() {
            bail!("corpus {} holds no usable records", path.display());
        }
        Ok(labeled)
    }

    fn warn_rejected(&mut self, corpus: &ParsedCorpus) {
        if corpus.rejected.is_empty() {
            return;
        }
        let _ = writeln!(
            self.err,
            "warning: skipped {} malformed line(s)",
            corpus.rejected.len()
        );
        for e in corpus.rejected.iter().take(5) {
            let _ = writeln!(self.err, "  {e}");
        }
    }
}

fn pairs(items: &[LabeledComment]) -> Vec<(&str, BinaryLabel)> {
    items.iter().map(|c| (c.text(), c.binary())).collect()
}

fn select_part(
    items: Vec<LabeledComment>,
    part: PartArg,
    spec: &SplitSpec,
) -> anyhow::Result<Vec<LabeledComment>> {
    use commentguard_core::split::SplitPart;
    let part = match part {
        PartArg::All => return Ok(items),
        PartArg::Train => SplitPart::Train,
        PartArg::Val => SplitPart::Validation,
        PartArg::Test => SplitPart::Test,
    };
    let labels: Vec<BinaryLabel> = items.iter().map(LabeledComment::binary).collect();
    let idx = split_indices(&labels, spec)?;
    Ok(idx.part(part).iter().map(|&i| items[i].clone()).collect())
}

/// Threshold maximizing F1 on `val`. Candidates are 0.5 and every distinct
/// validation score; ties prefer the candidate nearest 0.5, then the larger.
pub fn tune_threshold(
    model: &ClassifierModel,
    val: &[(&str, BinaryLabel)],
) -> anyhow::Result<(f64, f64)> {
    let scores: Vec<f64> = val
        .iter()
        .map(|(t, _)| model.predict(t).map(|p| p.score))
        .collect::<Result<_, _>>()?;
    let gold: Vec<BinaryLabel> = val.iter().map(|(_, y)| *y).collect();
    let mut candidates = scores.clone();
    candidates.push(DEFAULT_THRESHOLD);
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let mut best: Option<(f64, f64)> = None;
    for &t in &candidates {
        let pred: Vec<BinaryLabel> = scores
            .iter()
            .map(|&s| {
                if s > t {
                    BinaryLabel::Fraud
                } else {
                    BinaryLabel::Genuine
                }
            })
            .collect();
        let m = confusion(&pred, &gold)?;
        let f1 = f1_score(m.precision(), m.recall());
        let better = match best {
            None => true,
            Some((bt, bf)) => {
                f1 > bf
                    || (f1 == bf
                        && ((t - 0.5).abs() < (bt - 0.5).abs()
                            || ((t - 0.5).abs() == (bt - 0.5).abs() && t > bt)))
            }
        };
        if better {
            best = Some((t, f1));
        }
    }
    best.ok_or_else(|| anyhow!("validation part is empty"))
}

fn train(ctx: &mut Ctx, args: TrainArgs) -> Result<(), Failure> {
    let spec = ctx.split_spec(&args.split);
    let mut cfg = ctx.file.train.clone();
    cfg.seed = ctx.seed;
    let labeled = ctx.load_labeled(&args.corpus)?;
    let split =
        commentguard_core::split::split_dataset(&labeled, &spec).map_err(anyhow::Error::from)?;
    let kind = ModelKind::from(args.model);
    let mut model =
        ClassifierModel::train(kind, &pairs(&split.train), &cfg).map_err(anyhow::Error::from)?;
    if args.tune_threshold {
        let (t, f1) = tune_threshold(&model, &pairs(&split.val))?;
        model = model.with_threshold(t);
        let _ = writeln!(
            ctx.out,
            "tuned threshold {t} (validation F1 {:.4})",
            round_half_up(f1, 4)
        );
    }
    save_model_file(&model, &args.out).map_err(anyhow::Error::from)?;
    let terms = model.vocabulary.as_ref().map_or(0, |v| v.len());
    writeln!(
        ctx.out,
        "trained {kind} on {} of {} items ({terms} terms, threshold {}) -> {}",
        split.train.len(),
        labeled.len(),
        model.threshold,
        args.out.display()
    )
    .map_err(anyhow::Error::from)?;
    Ok(())
}

fn transport(remote: &RemoteArgs) -> anyhow::Result<Arc<dyn Transport>> {
    if let Some(path) = &remote.replay {
        let t =
            ReplayTransport::open(path).with_context(|| format!("fixture {}", path.display()))?;
        return Ok(Arc::new(t));
    }
    let http = HttpTransport::new()?;
    match &remote.record {
        Some(path) => Ok(Arc::new(RecordingTransport::new(http, path)?)),
        None => Ok(Arc::new(http)),
    }
}

fn model_name(path: &Path) -> String {
    path.file_stem().map_or_else(
        || path.display().to_string(),
        |s| s.to_string_lossy().into_owned(),
    )
}

/// Lazily shared transport: built on first use by a remote model.
struct Remote<'a> {
    args: &'a RemoteArgs,
    transport: Option<Arc<dyn Transport>>,
}

impl Remote<'_> {
    fn backend(&mut self, id: String, model: ClassifierModel) -> anyhow::Result<ModelBackend> {
        if model.kind().is_native() {
            return Ok(ModelBackend::with_transport(id, model, Arc::new(Unused)));
        }
        if self.transport.is_none() {
            self.transport = Some(transport(self.args)?);
        }
        Ok(ModelBackend::with_transport(
            id,
            model,
            self.transport.clone().unwrap(),
        ))
    }
}

/// Placeholder for native models, which never call out.
struct Unused;

impl Transport for Unused {
    fn post_json(
        &self,
        url: &str,
        _: &[(String, String)],
        _: &serde_json::Value,
        _: std::time::Duration,
    ) -> Result<serde_json::Value, crate::llm::TransportError> {
        Err(crate::llm::TransportError::Connection(format!(
            "no transport configured for {url}"
        )))
    }
}

fn write_report(
    ctx: &mut Ctx,
    rows: &[(String, EvalRun)],
    csv: Option<&Path>,
) -> anyhow::Result<()> {
    let table: Vec<(&str, MetricSet)> = rows.iter().map(|(n, r)| (n.as_str(), r.metrics)).collect();
    let report = render_report(&table);
    write!(ctx.out, "{}", report.text)?;
    for (name, run) in rows {
        let m = run.matrix;
        write!(
            ctx.out,
            "{name}: tp={} fp={} fn={} tn={}",
            m.tp, m.fp, m.fn_, m.tn
        )?;
        if run.unmappable > 0 {
            write!(ctx.out, " unmappable={}", run.unmappable)?;
        }
        writeln!(ctx.out)?;
    }
    if let Some(path) = csv {
        fs::write(path, &report.csv).with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(())
}

fn eval(ctx: &mut Ctx, args: EvalArgs) -> Result<(), Failure> {
    let spec = ctx.split_spec(&args.split);
    let model = load_model_file(&args.model).map_err(anyhow::Error::from)?;
    let labeled = ctx.load_labeled(&args.corpus)?;
    let items = select_part(labeled, args.split_part, &spec)?;
    let mut remote = Remote {
        args: &args.remote,
        transport: None,
    };
    let backend = remote.backend(model_name(&args.model), model)?;
    let run = evaluate(&backend, &pairs(&items)).map_err(anyhow::Error::from)?;
    write_report(ctx, &[(backend.id().to_string(), run)], args.csv.as_deref())?;
    Ok(())
}

fn compare(ctx: &mut Ctx, args: CompareArgs) -> Result<(), Failure> {
    if args.models.is_empty() && args.llm.is_none() {
        return Err(Failure::Usage("compare needs --models or --llm".into()));
    }
    let spec = ctx.split_spec(&args.split);
    let mut backends = Vec::new();
    let mut remote = Remote {
        args: &args.remote,
        transport: None,
    };
    for path in &args.models {
        let model = load_model_file(path).map_err(anyhow::Error::from)?;
        backends.push(remote.backend(model_name(path), model)?);
    }
    if let Some(path) = &args.llm {
        let text =
            fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let cfg: LlmConfig = toml::from_str(&text)
            .with_context(|| format!("invalid LLM config {}", path.display()))?;
        cfg.validate().map_err(anyhow::Error::from)?;
        let id = cfg.model_name.clone();
        backends.push(remote.backend(id, ClassifierModel::remote(RemoteSpec::Chat(cfg)))?);
    } else if let Some(cfg) = ctx.file.llm.clone() {
        let id = cfg.model_name.clone();
        backends.push(remote.backend(id, ClassifierModel::remote(RemoteSpec::Chat(cfg)))?);
    }
    let labeled = ctx.load_labeled(&args.corpus)?;
    let items = select_part(labeled, args.split_part, &spec)?;
    let items = pairs(&items);
    let mut rows = Vec::new();
    for b in &backends {
        let runs = if b.deterministic() { 1 } else { args.runs };
        for r in 1..=runs {
            let run = evaluate(b, &items).with_context(|| format!("evaluating {}", b.id()))?;
            let name = if runs == 1 {
                b.id().to_string()
            } else {
                format!("{} #{r}", b.id())
            };
            rows.push((name, run));
        }
    }
    write_report(ctx, &rows, args.csv.as_deref())?;
    Ok(())
}

fn serve(ctx: &mut Ctx, args: ServeArgs) -> Result<(), Failure> {
    let mut cfg = ctx.file.serve.clone();
    cfg.apply_env(|k| std::env::var(k).ok())
        .map_err(|e| Failure::Usage(e.to_string()))?;
    if let Some(m) = args.model {
        cfg.model = Some(m);
    }
    if let Some(p) = args.port {
        cfg.port = p;
    }
    if let Some(h) = args.host {
        cfg.host = h;
    }
    if let Some(r) = args.reports {
        cfg.report_store = r;
    }
    if let Some(id) = args.model_id {
        cfg.model_id = Some(id);
    }
    cfg.test_mode |= args.test_mode;
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    if cfg.model.is_none() {
        return Err(Failure::Usage("serve needs --model".into()));
    }
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(anyhow::Error::from)?;
    rt.block_on(service::run(cfg))
        .map_err(anyhow::Error::from)?;
    Ok(())
}

fn annotate(ctx: &mut Ctx, args: AnnotateArgs) -> Result<(), Failure> {
    let mut log = SessionLog::open(&args.session).map_err(anyhow::Error::from)?;
    match log.session().rater(&args.rater) {
        None => {
            let group = args.group.map_or(RaterGroup::Unspecified, RaterGroup::from);
            log.register_rater(Rater {
                id: args.rater.clone(),
                group,
            })
            .map_err(anyhow::Error::from)?;
        }
        Some(r) => {
            if let Some(g) = args.group.map(RaterGroup::from) {
                if g != r.group {
                    let _ = writeln!(
                        ctx.err,
                        "warning: rater {} is registered as {}, ignoring --group",
                        r.id, r.group
                    );
                }
            }
        }
    }
    if let Some(path) = &args.items {
        let corpus = read_corpus(path).with_context(|| format!("corpus {}", path.display()))?;
        ctx.warn_rejected(&corpus);
        let mut added = 0;
        for c in corpus.comments() {
            if log.session().items().iter().all(|i| i.id != c.id) {
                log.add_item(c).map_err(anyhow::Error::from)?;
                added += 1;
            }
        }
        writeln!(ctx.out, "added {added} item(s)").map_err(anyhow::Error::from)?;
    }
    let mut recorded = 0;
    let mut line = String::new();
    loop {
        let (id, text) = match log
            .session()
            .next_item(&args.rater)
            .map_err(anyhow::Error::from)?
        {
            NextItem::Done => break,
            NextItem::Item(c) => (c.id.clone(), c.text.clone()),
        };
        write!(
            ctx.out,
            "[{id}] {text}\nlabel (genuine/spam/scam, q to quit)> "
        )
        .map_err(anyhow::Error::from)?;
        ctx.out.flush().map_err(anyhow::Error::from)?;
        line.clear();
        if ctx
            .input
            .read_line(&mut line)
            .map_err(anyhow::Error::from)?
            == 0
        {
            writeln!(ctx.out).map_err(anyhow::Error::from)?;
            break;
        }
        let answer = line.trim().to_ascii_lowercase();
        if answer == "q" || answer == "quit" {
            break;
        }
        match answer.parse::<RawLabel>() {
            Ok(label) => {
                log.rate(&args.rater, &id, label, false)
                    .map_err(anyhow::Error::from)?;
                recorded += 1;
            }
            Err(_) => {
                let _ = writeln!(ctx.err, "unrecognized label `{answer}`");
            }
        }
    }
    let session = log.session();
    let left = session
        .items()
        .iter()
        .filter(|c| session.rating(&args.rater, &c.id).is_none())
        .count();
    writeln!(
        ctx.out,
        "{recorded} rating(s) recorded, {left} item(s) left for {}",
        args.rater
    )
    .map_err(anyhow::Error::from)?;
    Ok(())
}

fn fmt4(x: f64) -> String {
    format!("{:.4}", round_half_up(x, 4))
}

fn kappa(ctx: &mut Ctx, args: KappaArgs) -> Result<(), Failure> {
    if !args.session.exists() {
        return Err(anyhow!("session {} does not exist", args.session.display()).into());
    }
    let session = read_session(&args.session).map_err(anyhow::Error::from)?;
    let (three, binary) = match args.scheme {
        SchemeArg::Three => (true, false),
        SchemeArg::Binary => (false, true),
        SchemeArg::Both => (true, true),
    };
    let mut header = String::from("group        raters  items  excluded");
    if three {
        header.push_str("  kappa_three");
    }
    if binary {
        header.push_str("  kappa_binary");
    }
    let mut lines = vec![header];
    let row = |name: &str, raters: usize, used: usize, excluded: usize, k3: f64, k2: f64| {
        let mut s = format!("{name:<11}  {raters:<6}  {used:<5}  {excluded:<8}");
        if three {
            s.push_str(&format!("  {:<11}", fmt4(k3)));
        }
        if binary {
            s.push_str(&format!("  {}", fmt4(k2)));
        }
        s.trim_end().to_string()
    };
    for (group, result) in session.agreement_by_group() {
        match result {
            Ok(a) => lines.push(row(
                &group.to_string(),
                a.raters,
                a.items_used,
                a.items_excluded,
                a.kappa_three_way,
                a.kappa_binary,
            )),
            Err(e) => lines.push(format!("{:<11}  {e}", group.to_string())),
        }
    }
    let all = (|| {
        let t3 = session.build_rating_matrix(CategoryScheme::Three)?;
        let t2 = session.build_rating_matrix(CategoryScheme::Binary)?;
        let k3 = fleiss_kappa(&t3.matrix)?;
        let k2 = fleiss_kappa(&t2.matrix)?;
        Ok::<_, commentguard_core::annotation::AnnotationError>((
            t3.item_ids.len(),
            t3.excluded.len(),
            k3,
            k2,
        ))
    })();
    match all {
        Ok((used, excluded, k3, k2)) => {
            lines.push(row("all", session.raters().len(), used, excluded, k3, k2))
        }
        Err(e) => lines.push(format!("{:<11}  {e}", "all")),
    }
    for l in lines {
        writeln!(ctx.out, "{l}").map_err(anyhow::Error::from)?;
    }
    Ok(())
}

#[derive(Deserialize)]
#[serde(untagged)]
enum MatrixEntry {
    Cells([u64; 4]),
    Named(ConfusionMatrix),
}

/// Reads per-post matrices from JSON or from `tp,fp,fn,tn` lines.
pub fn parse_matrices(text: &str) -> anyhow::Result<Vec<ConfusionMatrix>> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('[') {
        let entries: Vec<MatrixEntry> =
            serde_json::from_str(trimmed).context("invalid matrix JSON")?;
        return Ok(entries
            .into_iter()
            .map(|e| match e {
                MatrixEntry::Cells([tp, fp, fn_, tn]) => ConfusionMatrix::new(tp, fp, fn_, tn),
                MatrixEntry::Named(m) => m,
            })
            .collect());
    }
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let cells: Vec<u64> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<u64>())
            .collect::<Result<_, _>>()
            .with_context(|| format!("line {}: expected four counts", i + 1))?;
        let [tp, fp, fn_, tn] = cells[..] else {
            bail!(
                "line {}: expected four counts, found {}",
                i + 1,
                cells.len()
            );
        };
        out.push(ConfusionMatrix::new(tp, fp, fn_, tn));
    }
    Ok(out)
}

fn audit_filter(ctx: &mut Ctx, args: AuditFilterArgs) -> Result<(), Failure> {
    let text = fs::read_to_string(&args.matrices)
        .with_context(|| format!("cannot read {}", args.matrices.display()))?;
    let matrices = parse_matrices(&text)?;
    let m = aggregate(&matrices).map_err(anyhow::Error::from)?;
    if m.total() == 0 {
        return Err(anyhow!("aggregated matrix is empty").into());
    }
    let out = &mut ctx.out;
    let lines = [
        format!("posts: {}", matrices.len()),
        format!(
            "aggregate: tp={} fp={} fn={} tn={}",
            m.tp, m.fp, m.fn_, m.tn
        ),
        format!("recall: {}", fmt4(m.recall())),
        format!("precision: {}  (tp/(tp+fp))", fmt4(m.precision())),
        format!("specificity: {}  (tn/(tn+fp))", fmt4(m.specificity())),
        format!("f1: {}", fmt4(f1_score(m.precision(), m.recall()))),
        format!("accuracy: {}", fmt4(m.accuracy())),
    ];
    for l in lines {
        writeln!(out, "{l}").map_err(anyhow::Error::from)?;
    }
    Ok(())
}

fn reconstruct(ctx: &mut Ctx, args: ReconstructArgs) -> Result<(), Failure> {
    let mut target = MetricSet::from_precision_recall(args.precision, args.recall);
    target.accuracy = args.accuracy;
    let r = reconstruct_confusion(&target, args.n_pos, args.n_neg);
    let m = r.matrix;
    writeln!(
        ctx.out,
        "tp={} fp={} fn={} tn={}\ndeviation: {:.6}\nbalanced accuracy: {}",
        m.tp,
        m.fp,
        m.fn_,
        m.tn,
        r.deviation,
        fmt4(m.balanced_accuracy())
    )
    .map_err(anyhow::Error::from)?;
    Ok(())
}

fn transformer_job(ctx: &mut Ctx, args: TransformerJobArgs) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(&TransformerJobConfig::default())
        .map_err(anyhow::Error::from)?;
    text.push('\n');
    match args.out {
        Some(path) => {
            fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?
        }
        None => write!(ctx.out, "{text}").map_err(anyhow::Error::from)?,
    }
    Ok(())
}
