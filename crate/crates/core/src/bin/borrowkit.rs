use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use borrowkit::corpus::{
    read_bio, read_csv, spans_to_bio, unlocatable_spans, validate_locatable, write_bio_sentence,
    write_csv, write_record, AnnotatedSentence, BioReader, CsvReader, Diagnostic,
};
use borrowkit::rules::{detect, detect_corpus, Gazetteer, RuleConfig, Triggers};
use borrowkit::scorer::score_corpus;
use borrowkit::stat::{token_dataset, train, Feature, Hyper, Lexicons, Model, StatDetector};
use borrowkit::typology::{
    classify_corpus, error_histogram, format_histogram, modal_error, write_error_report,
};
use borrowkit::variants::{stress, variant_corpus, VariantSpec, DEFAULT_DELTA};
use borrowkit::Error;

const THREADS_VAR: &str = "BORROWKIT_THREADS";

#[derive(Parser)]
#[command(
    name = "borrowkit",
    version,
    about = "Anglicism detection and strict span evaluation"
)]
struct Cli {
    /// Print timings to stderr.
    #[arg(long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Table,
    Kv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CorpusFormat {
    Csv,
    Bio,
}

#[derive(Subcommand)]
enum Command {
    /// Score predictions against gold spans.
    Score {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long, value_enum, default_value = "table")]
        format: ReportFormat,
        /// Exit with status 3 when sentence texts differ.
        #[arg(long)]
        strict: bool,
    },
    /// Classify prediction errors and print a histogram.
    Errors {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        /// Error report (semicolon-separated).
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the gazetteer detector.
    Detect {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        rules: RuleArgs,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Train the token classifier on BIO data.
    Train {
        /// BIO training file.
        #[arg(long)]
        train: PathBuf,
        #[command(flatten)]
        lexicons: LexiconArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        learning_rate: f64,
        #[arg(long, default_value_t = 500)]
        epochs: usize,
        #[arg(long, default_value_t = 1e-4)]
        l2: f64,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        /// Feature to leave out (repeatable).
        #[arg(long = "disable-feature", value_parser = parse_feature)]
        disabled: Vec<Feature>,
        /// Write the per-epoch loss, one value per line.
        #[arg(long)]
        loss_trace: Option<PathBuf>,
    },
    /// Run a trained token classifier.
    Predict {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        stat: StatArgs,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Write casing/quotation variants of a gold corpus.
    Variants {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        /// `<casing>-<quotes>`; repeatable, defaults to all sixteen.
        #[arg(long = "spec")]
        specs: Vec<VariantSpec>,
        /// Write the variant sentence ids, one per line, in output order.
        #[arg(long)]
        ids_out: Option<PathBuf>,
    },
    /// Score a detector on every variant of a gold corpus.
    Stress {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long = "spec")]
        specs: Vec<VariantSpec>,
        #[arg(long, default_value_t = DEFAULT_DELTA)]
        delta: f64,
        #[arg(long, value_enum, default_value = "table")]
        format: ReportFormat,
        /// Use the gazetteer detector (default) or a model.
        #[arg(long, conflicts_with = "model")]
        gazetteer: Option<PathBuf>,
        #[arg(long, requires = "gazetteer")]
        exclusions: Option<PathBuf>,
        #[arg(long, requires_all = ["english", "spanish"])]
        model: Option<PathBuf>,
        #[arg(long)]
        english: Option<PathBuf>,
        #[arg(long)]
        spanish: Option<PathBuf>,
    },
    /// Convert between BIO and CSV.
    Convert {
        #[arg(long, value_enum)]
        from: CorpusFormat,
        #[arg(long, value_enum)]
        to: CorpusFormat,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct InputArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    input_format: CorpusFormat,
}

#[derive(Args)]
struct RuleArgs {
    #[arg(long)]
    gazetteer: PathBuf,
    #[arg(long)]
    exclusions: Option<PathBuf>,
    /// Accept ambiguous entries without contextual evidence.
    #[arg(long)]
    no_context: bool,
    #[arg(long)]
    no_exclusions: bool,
    #[arg(long, default_value_t = 5)]
    max_phrase_tokens: usize,
    #[arg(long)]
    no_quote_trigger: bool,
    #[arg(long)]
    no_adjacency_trigger: bool,
    #[arg(long)]
    no_capitalization_trigger: bool,
}

#[derive(Args)]
struct LexiconArgs {
    #[arg(long)]
    english: PathBuf,
    #[arg(long)]
    spanish: PathBuf,
}

#[derive(Args)]
struct StatArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    lexicons: LexiconArgs,
    /// Override the model's threshold.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    no_bridging: bool,
}

fn parse_feature(s: &str) -> Result<Feature, String> {
    s.parse()
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{}: {source}", path.display())]
    Input { path: PathBuf, source: Error },
    #[error("{0}")]
    Core(#[from] Error),
    #[error("{}: {source}", path.display())]
    Output { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Strict(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input { source, .. } if source.is_format_error() => 2,
            CliError::Input {
                source: Error::Io(e),
                ..
            } if e.kind() == io::ErrorKind::NotFound => 2,
            CliError::Core(e) if e.is_format_error() => 2,
            CliError::Usage(_) => 2,
            CliError::Strict(_) => 3,
            _ => 1,
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn at(path: &Path) -> impl Fn(Error) -> CliError + '_ {
    move |source| CliError::Input {
        path: path.to_path_buf(),
        source,
    }
}

fn check_inputs(paths: &[&Path]) -> CliResult {
    for p in paths {
        if !p.is_file() {
            return Err(CliError::Input {
                path: p.to_path_buf(),
                source: Error::Io(io::Error::new(io::ErrorKind::NotFound, "no such file")),
            });
        }
    }
    Ok(())
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| at(path)(e.into()))
}

struct Output {
    path: PathBuf,
    inner: Box<dyn Write>,
}

impl Output {
    fn create(path: Option<&Path>) -> CliResult<Output> {
        match path {
            Some(p) => {
                let f = File::create(p).map_err(|source| CliError::Output {
                    path: p.to_path_buf(),
                    source,
                })?;
                Ok(Output {
                    path: p.to_path_buf(),
                    inner: Box::new(BufWriter::new(f)),
                })
            }
            None => Ok(Output {
                path: PathBuf::from("<stdout>"),
                inner: Box::new(BufWriter::new(io::stdout().lock())),
            }),
        }
    }

    fn wrap(&self, source: io::Error) -> CliError {
        CliError::Output {
            path: self.path.clone(),
            source,
        }
    }

    fn run(&mut self, f: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> CliResult {
        let r = f(&mut self.inner).and_then(|_| self.inner.flush());
        r.map_err(|e| self.wrap(e))
    }
}

fn warn(path: &Path, diagnostics: &[Diagnostic]) {
    for d in diagnostics {
        eprintln!("warning: {}:{}: {}", path.display(), d.line, d.message);
    }
}

fn load_csv(path: &Path) -> CliResult<Vec<AnnotatedSentence>> {
    read_csv(open(path)?).map_err(at(path))
}

fn load_corpus(path: &Path, format: CorpusFormat) -> CliResult<Vec<AnnotatedSentence>> {
    match format {
        CorpusFormat::Csv => load_csv(path),
        CorpusFormat::Bio => {
            let corpus = read_bio(open(path)?).map_err(at(path))?;
            warn(path, &corpus.warnings);
            Ok(corpus.records)
        }
    }
}

fn load_gold(path: &Path) -> CliResult<Vec<AnnotatedSentence>> {
    let gold = load_csv(path)?;
    validate_locatable(&gold).map_err(at(path))?;
    Ok(gold)
}

fn load_gaz(path: &Path, exclusions: Option<&Path>) -> CliResult<Gazetteer> {
    let mut gaz = Gazetteer::new();
    gaz.read_entries(open(path)?).map_err(at(path))?;
    if let Some(x) = exclusions {
        gaz.read_exclusions(open(x)?).map_err(at(x))?;
    }
    Ok(gaz)
}

fn load_lexicons(args: &LexiconArgs) -> CliResult<Lexicons> {
    check_inputs(&[&args.english, &args.spanish])?;
    let spanish = open(&args.spanish)?;
    let english = open(&args.english)?;
    Lexicons::load(spanish, english).map_err(Into::into)
}

fn load_model(path: &Path) -> CliResult<Model> {
    let text = std::fs::read_to_string(path).map_err(|e| at(path)(e.into()))?;
    Model::from_text(&text).map_err(at(path))
}

fn rule_config(args: &RuleArgs) -> CliResult<RuleConfig> {
    let cfg = RuleConfig {
        require_context_for_ambiguous: !args.no_context,
        use_exclusions: !args.no_exclusions,
        max_phrase_tokens: args.max_phrase_tokens,
        triggers: Triggers {
            quotes: !args.no_quote_trigger,
            adjacency: !args.no_adjacency_trigger,
            capitalization: !args.no_capitalization_trigger,
        },
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

fn stat_detector(args: &StatArgs) -> CliResult<StatDetector> {
    check_inputs(&[&args.model])?;
    let mut model = load_model(&args.model)?;
    if let Some(t) = args.threshold {
        model
            .set_threshold(t)
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    Ok(StatDetector {
        model,
        lexicons: load_lexicons(&args.lexicons)?,
        bridging: !args.no_bridging,
    })
}

fn cmd_score(gold_path: &Path, pred_path: &Path, format: ReportFormat, strict: bool) -> CliResult {
    check_inputs(&[gold_path, pred_path])?;
    let gold = load_gold(gold_path)?;
    let pred = load_csv(pred_path)?;
    warn(pred_path, &unlocatable_spans(&pred));
    let score = score_corpus(&gold, &pred)?;
    warn(pred_path, &score.dropped);
    for m in &score.mismatches {
        eprintln!("warning: {m}");
    }
    let mut out = Output::create(None)?;
    let text = match format {
        ReportFormat::Table => score.report.to_table(),
        ReportFormat::Kv => score.report.to_kv(),
    };
    out.run(|w| w.write_all(text.as_bytes()))?;
    if strict && !score.mismatches.is_empty() {
        return Err(CliError::Strict(format!(
            "{} sentence(s) differ between gold and predictions",
            score.mismatches.len()
        )));
    }
    Ok(())
}

fn cmd_errors(gold_path: &Path, pred_path: &Path, out_path: &Path) -> CliResult {
    check_inputs(&[gold_path, pred_path])?;
    let gold = load_gold(gold_path)?;
    let mut pred = load_csv(pred_path)?;
    if pred.is_empty() {
        pred = gold
            .iter()
            .map(|g| AnnotatedSentence::new(g.sentence.clone(), Vec::new()))
            .collect();
    }
    let records = classify_corpus(&gold, &pred)?;
    Output::create(Some(out_path))?.run(|w| write_error_report(w, &records))?;
    let hist = error_histogram(&records);
    let mut text = format_histogram(&hist);
    if let Some(mode) = modal_error(&hist) {
        text.push_str(&format!("Most frequent: {mode}\n"));
    }
    Output::create(None)?.run(|w| w.write_all(text.as_bytes()))
}

fn write_corpus(path: Option<&Path>, records: &[AnnotatedSentence]) -> CliResult {
    Output::create(path)?.run(|w| write_csv(w, records))
}

fn cmd_detect(input: &InputArgs, rules: &RuleArgs, output: Option<&Path>) -> CliResult {
    let mut paths = vec![input.input.as_path(), rules.gazetteer.as_path()];
    paths.extend(rules.exclusions.as_deref());
    check_inputs(&paths)?;
    let cfg = rule_config(rules)?;
    let gaz = load_gaz(&rules.gazetteer, rules.exclusions.as_deref())?;
    let records = load_corpus(&input.input, input.input_format)?;
    write_corpus(output, &detect_corpus(&records, &gaz, &cfg))
}

#[allow(clippy::too_many_arguments)]
fn cmd_train(
    train_path: &Path,
    lexicons: &LexiconArgs,
    model_path: &Path,
    hyper: Hyper,
    threshold: f64,
    disabled: &[Feature],
    loss_trace: Option<&Path>,
) -> CliResult {
    check_inputs(&[train_path])?;
    let lex = load_lexicons(lexicons)?;
    let corpus = read_bio(open(train_path)?).map_err(at(train_path))?;
    warn(train_path, &corpus.warnings);
    let data: Vec<_> = token_dataset(&corpus.records, &lex)
        .map_err(at(train_path))?
        .into_iter()
        .map(|(x, y)| (x.without(disabled), y))
        .collect();
    let mut training = train(&data, &hyper).map_err(at(train_path))?;
    training
        .model
        .set_threshold(threshold)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let text = training.model.to_text();
    Output::create(Some(model_path))?.run(|w| w.write_all(text.as_bytes()))?;
    if let Some(p) = loss_trace {
        Output::create(Some(p))?.run(|w| {
            for l in &training.loss_trace {
                writeln!(w, "{l:.16e}")?;
            }
            Ok(())
        })?;
    }
    let last = training.loss_trace.last().copied().unwrap_or_default();
    let summary = format!(
        "examples={}\nepochs={}\nfinal_loss={last:.6}\n",
        data.len(),
        hyper.epochs
    );
    Output::create(None)?.run(|w| w.write_all(summary.as_bytes()))
}

fn cmd_predict(input: &InputArgs, stat: &StatArgs, output: Option<&Path>) -> CliResult {
    check_inputs(&[&input.input])?;
    let detector = stat_detector(stat)?;
    let records = load_corpus(&input.input, input.input_format)?;
    write_corpus(output, &detector.detect_corpus(&records))
}

fn specs_or_all(specs: &[VariantSpec]) -> Vec<VariantSpec> {
    if specs.is_empty() {
        VariantSpec::all()
    } else {
        specs.to_vec()
    }
}

fn cmd_variants(
    input: &Path,
    output: Option<&Path>,
    specs: &[VariantSpec],
    ids_out: Option<&Path>,
) -> CliResult {
    check_inputs(&[input])?;
    let gold = load_gold(input)?;
    let variants = variant_corpus(&gold, &specs_or_all(specs)).map_err(at(input))?;
    write_corpus(output, &variants)?;
    if let Some(p) = ids_out {
        Output::create(Some(p))?.run(|w| {
            for v in &variants {
                writeln!(w, "{}", v.sentence.id())?;
            }
            Ok(())
        })?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_stress(
    gold_path: &Path,
    specs: &[VariantSpec],
    delta: f64,
    format: ReportFormat,
    gazetteer: Option<&Path>,
    exclusions: Option<&Path>,
    model: Option<&Path>,
    english: Option<&Path>,
    spanish: Option<&Path>,
) -> CliResult {
    check_inputs(&[gold_path])?;
    if delta.is_nan() || delta < 0.0 {
        return Err(CliError::Usage("--delta must be non-negative".into()));
    }
    let gold = load_gold(gold_path)?;
    let specs = specs_or_all(specs);
    let report = match (gazetteer, model, english, spanish) {
        (Some(g), _, _, _) => {
            let mut paths = vec![g];
            paths.extend(exclusions);
            check_inputs(&paths)?;
            let gaz = load_gaz(g, exclusions)?;
            let cfg = RuleConfig::default();
            stress(&gold, &specs, |s| detect(s, &gaz, &cfg), delta)
        }
        (None, Some(m), Some(en), Some(es)) => {
            let detector = stat_detector(&StatArgs {
                model: m.to_path_buf(),
                lexicons: LexiconArgs {
                    english: en.to_path_buf(),
                    spanish: es.to_path_buf(),
                },
                threshold: None,
                no_bridging: false,
            })?;
            stress(&gold, &specs, |s| detector.detect(s), delta)
        }
        _ => {
            return Err(CliError::Usage(
                "stress needs --gazetteer or --model".into(),
            ))
        }
    }
    .map_err(at(gold_path))?;
    let text = match format {
        ReportFormat::Table => report.to_table(),
        ReportFormat::Kv => report.to_kv(),
    };
    Output::create(None)?.run(|w| w.write_all(text.as_bytes()))
}

fn cmd_convert(
    from: CorpusFormat,
    to: CorpusFormat,
    input: &Path,
    output: Option<&Path>,
) -> CliResult {
    check_inputs(&[input])?;
    let reader = open(input)?;
    let mut out = Output::create(output)?;
    match (from, to) {
        (CorpusFormat::Bio, CorpusFormat::Csv) => {
            for item in BioReader::new(reader) {
                let s = item.map_err(at(input))?;
                warn(input, &s.warnings);
                out.run(|w| write_record(w, &s.record))?;
            }
        }
        (CorpusFormat::Csv, CorpusFormat::Bio) => {
            for item in CsvReader::new(reader) {
                let record = item.map_err(at(input))?;
                let rows = spans_to_bio(&record).map_err(at(input))?;
                out.run(|w| write_bio_sentence(w, &rows))?;
            }
        }
        (CorpusFormat::Csv, CorpusFormat::Csv) => {
            for item in CsvReader::new(reader) {
                let record = item.map_err(at(input))?;
                out.run(|w| write_record(w, &record))?;
            }
        }
        (CorpusFormat::Bio, CorpusFormat::Bio) => {
            for item in BioReader::new(reader) {
                let s = item.map_err(at(input))?;
                warn(input, &s.warnings);
                let rows = spans_to_bio(&s.record).map_err(at(input))?;
                out.run(|w| write_bio_sentence(w, &rows))?;
            }
        }
    }
    Ok(())
}

fn configure_threads() -> CliResult {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("{THREADS_VAR}={value:?} is not a thread count")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    configure_threads()?;
    match cli.command {
        Command::Score {
            gold,
            pred,
            format,
            strict,
        } => cmd_score(&gold, &pred, format, strict),
        Command::Errors { gold, pred, out } => cmd_errors(&gold, &pred, &out),
        Command::Detect {
            input,
            rules,
            output,
        } => cmd_detect(&input, &rules, output.as_deref()),
        Command::Train {
            train,
            lexicons,
            model,
            learning_rate,
            epochs,
            l2,
            threshold,
            disabled,
            loss_trace,
        } => cmd_train(
            &train,
            &lexicons,
            &model,
            Hyper {
                learning_rate,
                epochs,
                l2,
            },
            threshold,
            &disabled,
            loss_trace.as_deref(),
        ),
        Command::Predict {
            input,
            stat,
            output,
        } => cmd_predict(&input, &stat, output.as_deref()),
        Command::Variants {
            input,
            output,
            specs,
            ids_out,
        } => cmd_variants(&input, output.as_deref(), &specs, ids_out.as_deref()),
        Command::Stress {
            gold,
            specs,
            delta,
            format,
            gazetteer,
            exclusions,
            model,
            english,
            spanish,
        } => cmd_stress(
            &gold,
            &specs,
            delta,
            format,
            gazetteer.as_deref(),
            exclusions.as_deref(),
            model.as_deref(),
            english.as_deref(),
            spanish.as_deref(),
        ),
        Command::Convert {
            from,
            to,
            input,
            output,
        } => cmd_convert(from, to, &input, output.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let verbose = cli.verbose;
    let started = Instant::now();
    let result = run(cli);
    if verbose {
        eprintln!("elapsed: {:.3}s", started.elapsed().as_secs_f64());
    }
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
