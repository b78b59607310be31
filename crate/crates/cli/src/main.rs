//! `popeval` command line.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 unreadable or
//! malformed data. Standard output carries only the summary line.

mod metrics;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::{Map, Value};

use popeval::analysis::{
    correlate_with_human, count_split_merge, permutation_counts, permutation_options, HumanScoreTable,
    PermutationCounts, SplitMergeCounts,
};
use popeval::annotation::report::{fixed, format_fixed, write_report, Report};
use popeval::annotation::{load_pairs, Format, ImagePair, ParseOptions};
use popeval::baseline::{Vocabulary, DEFAULT_IOU_THRESHOLD};
use popeval::evaluate::{evaluate_image, filter_dontcare};
use popeval::synth::{generate_corpus, SynthError};
use popeval::{EvalConfig, TextInstance};

use metrics::{aggregate, headline, row, score_image, ImageScore, Metric, Settings};

#[derive(Parser)]
#[command(name = "popeval", version, about = "Character-level end-to-end OCR evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score a corpus with one metric.
    Eval(EvalArgs),
    /// Score a corpus with several metrics and correlate them with human ratings.
    Compare(CompareArgs),
    /// Count permutation, split and merge cases.
    Analyze(AnalyzeArgs),
    /// Write a synthetic corpus with expected results.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Icdar2013,
    Icdar2015,
    Charlevel,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Format {
        match f {
            FormatArg::Icdar2013 => Format::Icdar2013,
            FormatArg::Icdar2015 => Format::Icdar2015,
            FormatArg::Charlevel => Format::CharLevel,
        }
    }
}

#[derive(Args)]
struct CorpusArgs {
    /// Ground-truth directory.
    #[arg(long)]
    gt: PathBuf,
    /// Submission directory.
    #[arg(long)]
    det: PathBuf,
    /// Ground-truth file format.
    #[arg(long, value_enum, default_value = "icdar2015")]
    format: FormatArg,
    /// Submission file format; defaults to --format.
    #[arg(long, value_enum)]
    det_format: Option<FormatArg>,
    /// Submission lines carry a confidence before the transcript.
    #[arg(long)]
    confidence: bool,
    /// `image_id,gt_file,det_file` lines pairing files explicitly.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Compare transcripts without folding case.
    #[arg(long)]
    case_sensitive: bool,
    #[arg(long, default_value = popeval::annotation::DEFAULT_DONTCARE_TOKEN)]
    dontcare_token: String,
    /// Drop detections lying more than this share inside a don't-care region.
    #[arg(long, default_value_t = 0.5)]
    dontcare_threshold: f64,
    /// IoU a box match must exceed (box-level metrics).
    #[arg(long, default_value_t = DEFAULT_IOU_THRESHOLD)]
    iou_threshold: f64,
    /// Minimum intersection area for two regions to be related.
    #[arg(long, default_value_t = 1e-9)]
    epsilon: f64,
    /// Word list restricting exact-match end-to-end scoring.
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    jobs: Option<usize>,
    /// Where to write the JSON report.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long, value_enum, default_value = "popeval")]
    metric: Metric,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Human rating file(s), `image_id,score` with scores 1-5. Repeat for
    /// several raters.
    #[arg(long, required = true)]
    human: Vec<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "popeval,e2e,1-ned")]
    metrics: Vec<Metric>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
}

#[derive(Args)]
struct SynthArgs {
    /// Directory to create the corpus in.
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 10)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

enum Failure {
    Usage(String),
    Data(String),
}

type Outcome<T> = Result<T, Failure>;

fn data(e: impl std::fmt::Display) -> Failure {
    Failure::Data(e.to_string())
}

struct Corpus {
    pairs: Vec<ImagePair>,
    warnings: Vec<String>,
    settings: Settings,
    config: Map<String, Value>,
}

fn read(path: &Path) -> Outcome<Vec<u8>> {
    fs::read(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn load(args: &CorpusArgs, needs_confidence: bool) -> Outcome<Corpus> {
    let eval = EvalConfig {
        case_fold: !args.case_sensitive,
        dontcare_token: args.dontcare_token.clone(),
        dontcare_overlap_threshold: args.dontcare_threshold,
        intersection_epsilon: args.epsilon,
    };
    eval.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    if !(0.0..=1.0).contains(&args.iou_threshold) {
        return Err(Failure::Usage(format!(
            "IoU threshold must lie in [0, 1], got {}",
            args.iou_threshold
        )));
    }
    if needs_confidence && !args.confidence {
        return Err(Failure::Usage("average precision needs --confidence".into()));
    }
    if let Some(jobs) = args.jobs {
        if jobs == 0 {
            return Err(Failure::Usage("--jobs must be at least 1".into()));
        }
        // Only the first configuration in a process takes effect.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    let vocab = match &args.vocab {
        Some(path) => Some(
            Vocabulary::parse(&read(path)?, eval.normalize_options())
                .map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?,
        ),
        None => None,
    };

    let gt_format = Format::from(args.format);
    let det_format = args.det_format.map_or(gt_format, Format::from);
    let opts = ParseOptions {
        dontcare_token: args.dontcare_token.clone(),
        confidence: args.confidence,
    };
    let loaded = load_pairs(
        &args.gt,
        &args.det,
        gt_format,
        det_format,
        &opts,
        args.manifest.as_deref(),
    )
    .map_err(data)?;

    let mut config = Map::new();
    let path = |p: &Path| Value::String(p.display().to_string());
    config.insert("gt".into(), path(&args.gt));
    config.insert("det".into(), path(&args.det));
    config.insert("format".into(), Value::String(gt_format.name().into()));
    config.insert("det_format".into(), Value::String(det_format.name().into()));
    config.insert("confidence".into(), Value::Bool(args.confidence));
    config.insert("case_fold".into(), Value::Bool(eval.case_fold));
    config.insert("dontcare_token".into(), Value::String(eval.dontcare_token.clone()));
    config.insert("dontcare_threshold".into(), fixed(eval.dontcare_overlap_threshold));
    config.insert("iou_threshold".into(), fixed(args.iou_threshold));
    config.insert(
        "epsilon".into(),
        Value::String(format!("{:e}", eval.intersection_epsilon)),
    );
    config.insert("vocab".into(), args.vocab.as_deref().map_or(Value::Null, path));
    config.insert("manifest".into(), args.manifest.as_deref().map_or(Value::Null, path));

    Ok(Corpus {
        pairs: loaded.pairs,
        warnings: loaded.warnings,
        settings: Settings {
            eval,
            iou_threshold: args.iou_threshold,
            vocab,
        },
        config,
    })
}

fn score_all(corpus: &Corpus, metric: Metric) -> Outcome<Vec<ImageScore>> {
    corpus
        .pairs
        .par_iter()
        .map(|p| score_image(metric, p, &corpus.settings))
        .collect::<Result<_, _>>()
        .map_err(Failure::Data)
}

fn finish(report: &Report, output: Option<&Path>, summary: &str) -> Outcome<()> {
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(path) = output {
        write_report(report, path).map_err(data)?;
    }
    println!("{summary}");
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Outcome<()> {
    let mut corpus = load(&args.corpus, args.metric == Metric::Ap)?;
    let scores = score_all(&corpus, args.metric)?;
    corpus
        .config
        .insert("metric".into(), Value::String(args.metric.name().into()));
    let agg = aggregate(args.metric, &scores);
    let report = Report {
        config: corpus.config,
        per_image: corpus
            .pairs
            .iter()
            .zip(&scores)
            .map(|(p, s)| row(&p.image_id, s))
            .collect(),
        aggregate: agg.value,
        warnings: corpus.warnings,
        sections: Map::new(),
    };
    finish(&report, args.corpus.output.as_deref(), &agg.summary)
}

fn cmd_compare(args: &CompareArgs) -> Outcome<()> {
    // Command-line order, first occurrence wins.
    let mut metric_list: Vec<Metric> = Vec::new();
    for &m in &args.metrics {
        if !metric_list.contains(&m) {
            metric_list.push(m);
        }
    }
    let mut corpus = load(&args.corpus, metric_list.contains(&Metric::Ap))?;

    let mut raters = Vec::new();
    for path in &args.human {
        raters
            .push(HumanScoreTable::parse(&read(path)?).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?);
    }
    let human = HumanScoreTable::average(&raters).map_err(data)?;

    let mut per_metric = BTreeMap::new();
    let mut aggregates = Map::new();
    for &m in &metric_list {
        let scores = score_all(&corpus, m)?;
        let table: BTreeMap<String, f64> = corpus
            .pairs
            .iter()
            .zip(&scores)
            .map(|(p, s)| (p.image_id.clone(), headline(s)))
            .collect();
        aggregates.insert(m.name().into(), aggregate(m, &scores).value);
        per_metric.insert(m.name().to_owned(), table);
    }
    let r = correlate_with_human(&per_metric, &human).map_err(data)?;

    let per_image = corpus
        .pairs
        .iter()
        .map(|p| {
            let mut row = Map::new();
            row.insert("image_id".into(), Value::String(p.image_id.clone()));
            row.insert("human".into(), fixed(human.scores[&p.image_id]));
            for (name, table) in &per_metric {
                row.insert(name.clone(), fixed(table[&p.image_id]));
            }
            Value::Object(row)
        })
        .collect();
    let mut correlation = Map::new();
    for (name, v) in &r {
        correlation.insert(name.clone(), fixed(*v));
    }
    let summary = metric_list
        .iter()
        .map(|m| format!("r({})={}", m.name(), format_fixed(r[m.name()])))
        .collect::<Vec<_>>()
        .join(" ");

    corpus.config.insert(
        "metrics".into(),
        Value::Array(metric_list.iter().map(|m| Value::String(m.name().into())).collect()),
    );
    corpus.config.insert(
        "human".into(),
        Value::Array(
            args.human
                .iter()
                .map(|p| Value::String(p.display().to_string()))
                .collect(),
        ),
    );
    let mut sections = Map::new();
    sections.insert("correlation".into(), Value::Object(correlation));
    let report = Report {
        config: corpus.config,
        per_image,
        aggregate: Value::Object(aggregates),
        warnings: corpus.warnings,
        sections,
    };
    finish(&report, args.corpus.output.as_deref(), &summary)
}

fn cmd_analyze(args: &AnalyzeArgs) -> Outcome<()> {
    let corpus = load(&args.corpus, false)?;
    let cfg = &corpus.settings.eval;
    let perm_opts = permutation_options(cfg.case_fold);
    let norm = cfg.normalize_options();
    let iou = corpus.settings.iou_threshold;

    let per_image: Vec<(popeval::ImageEvalResult, PermutationCounts, SplitMergeCounts)> = corpus
        .pairs
        .par_iter()
        .map(|p| {
            let (gt, det) = (&p.gt.instances, &p.det.instances);
            let (gts, dets): (Vec<&TextInstance>, Vec<&TextInstance>) = filter_dontcare(gt, det, cfg);
            (
                evaluate_image(gt, det, cfg),
                permutation_counts(&gts, &dets, iou, &perm_opts),
                count_split_merge(&gts, &dets, &norm),
            )
        })
        .collect();

    let results: Vec<(String, popeval::ImageEvalResult)> = corpus
        .pairs
        .iter()
        .zip(&per_image)
        .map(|(p, r)| (p.image_id.clone(), r.0))
        .collect();
    let mut report = Report::popeval(corpus.config, &results, corpus.warnings);
    let (mut perm, mut sm) = (PermutationCounts::default(), SplitMergeCounts::default());
    for (row, (_, p, s)) in report.per_image.iter_mut().zip(&per_image) {
        perm.add(*p);
        sm.add(*s);
        if let Value::Object(m) = row {
            m.insert("permuted_pairs".into(), Value::from(p.permuted));
            m.insert("split_dets".into(), Value::from(s.split_dets));
            m.insert("merged_gts".into(), Value::from(s.merged_gts));
        }
    }
    let mut analysis = Map::new();
    analysis.insert("permuted_pairs".into(), Value::from(perm.permuted));
    analysis.insert("same_component_pairs".into(), Value::from(perm.same_components));
    analysis.insert("permutation_fraction".into(), fixed(perm.fraction()));
    analysis.insert("split_dets".into(), Value::from(sm.split_dets));
    analysis.insert("dets".into(), Value::from(sm.dets));
    analysis.insert("split_fraction".into(), fixed(sm.split_fraction()));
    analysis.insert("merged_gts".into(), Value::from(sm.merged_gts));
    analysis.insert("gts".into(), Value::from(sm.gts));
    analysis.insert("merge_fraction".into(), fixed(sm.merge_fraction()));
    report.sections.insert("analysis".into(), Value::Object(analysis));

    let summary = format!(
        "permutation={} split={} merge={}",
        format_fixed(perm.fraction()),
        format_fixed(sm.split_fraction()),
        format_fixed(sm.merge_fraction())
    );
    finish(&report, args.corpus.output.as_deref(), &summary)
}

fn cmd_synth(args: &SynthArgs) -> Outcome<()> {
    let rows = generate_corpus(args.count, args.seed, &args.output).map_err(|e| match e {
        SynthError::Empty => Failure::Usage(e.to_string()),
        other => data(other),
    })?;
    let results: Vec<_> = rows.iter().map(|(_, r)| *r).collect();
    let total = popeval::evaluate::aggregate(&results);
    let s = total.scores.expect("at least one image");
    println!(
        "images={} precision={} recall={} fscore={}",
        total.images,
        format_fixed(s.precision),
        format_fixed(s.recall),
        format_fixed(s.fscore)
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = match &cli.command {
        Command::Eval(a) => cmd_eval(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Synth(a) => cmd_synth(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
