//! Command-line front end: argument parsing, workspace files and reports.
//!
//! Every JSON report is key-sorted, pretty-printed, newline-terminated and
//! carries `schema_version` plus the configuration that produced it.

use std::collections::HashSet;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::attributes::{attribute_vectors, Attribute, SlenUnit, TrainingStats};
use crate::baseline::{segment_sentence, MatchDict};
use crate::bucketing::{
    bucket_f1, build_tensor, corpus_f1, evaluate_run, gold_bucket_specs, make_buckets, ModelRun, PerformanceTensor,
    DEFAULT_BUCKETS,
};
use crate::corpus::{parse_segmented_file, spans_of, to_segmented_text, CharMap, Corpus, Sentence};
use crate::crossdata::{dense, distance_edges, edge_list, psi_u_correlation, CrossScore, CrossTensor, PsiMatrix};
use crate::diagnosis::{aided_diagnose, aided_diagnosis_tsv, self_diagnose, self_diagnosis_tsv};
use crate::measures::{
    average_rho, dataset_wise, model_wise, normalize_by_max, significance_tables, SIGNIFICANCE_LEVEL,
};
use crate::selection::{select_order, Strategy};
use crate::stats::{friedman, friedman_exact_p, EXACT_MAX_CELLS};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "segdiag",
    version,
    about = "Fine-grained evaluation and diagnosis of word segmentation systems"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CorpusOpts {
    /// Two-column character mapping file applied to every loaded corpus.
    #[arg(long)]
    pub map: Option<PathBuf>,

    /// Unit of the sentence-length attribute.
    #[arg(long, default_value = "char", value_parser = parse_from_str::<SlenUnit>)]
    pub slen_unit: SlenUnit,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the seven attributes of every gold test word as TSV.
    Attrs {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[command(flatten)]
        corpus: CorpusOpts,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bucket-level precision, recall and F1 of one system on one attribute.
    Eval {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long, value_parser = parse_from_str::<Attribute>)]
        attribute: Attribute,
        #[arg(long, default_value_t = DEFAULT_BUCKETS)]
        buckets: usize,
        #[command(flatten)]
        corpus: CorpusOpts,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Build the bucket F1 tensor of several systems on one dataset.
    Tensor {
        #[arg(long, required_unless_present = "workspace")]
        train: Option<PathBuf>,
        #[arg(long, required_unless_present = "workspace")]
        gold: Option<PathBuf>,
        /// System prediction as NAME=PATH; repeatable.
        #[arg(long, value_parser = parse_named_path)]
        pred: Vec<(String, PathBuf)>,
        /// Take the dataset and runs from a workspace file instead.
        #[arg(long, requires = "dataset", conflicts_with_all = ["train", "gold", "pred"])]
        workspace: Option<PathBuf>,
        /// Dataset name; defaults to the gold file stem.
        #[arg(long)]
        dataset: Option<String>,
        /// Comma-separated attributes; all seven when omitted.
        #[arg(long, value_delimiter = ',', value_parser = parse_from_str::<Attribute>)]
        attributes: Vec<Attribute>,
        #[arg(long)]
        buckets: Option<usize>,
        #[command(flatten)]
        corpus: CorpusOpts,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Model-wise and dataset-wise measures from one or more tensors.
    Measures {
        /// Tensor file; repeat for several datasets.
        #[arg(long, required = true)]
        tensor: Vec<PathBuf>,
        /// Attach Friedman p-values and mark cells that do not pass.
        #[arg(long)]
        significance: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Self-diagnosis of one system or aided-diagnosis of two.
    Diagnose {
        /// Tensor file of the system to diagnose.
        #[arg(
            long = "self",
            value_name = "RUN",
            conflicts_with = "aided",
            required_unless_present = "aided"
        )]
        self_run: Option<PathBuf>,
        /// Tensor files of systems A and B.
        #[arg(long, num_args = 2, value_names = ["RUN_A", "RUN_B"])]
        aided: Option<Vec<PathBuf>>,
        /// Model in the self run (default: first).
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        model_a: Option<String>,
        #[arg(long)]
        model_b: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write a bar-chart-ready TSV.
        #[arg(long)]
        tsv: Option<PathBuf>,
    },
    /// Cross-dataset transfer tensor, criterion discrepancy and edge weights.
    Cross {
        #[arg(long)]
        workspace: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Greedy source-corpus ordering against a target dev set.
    Select {
        #[arg(long)]
        target: PathBuf,
        #[arg(long, num_args = 1.., required = true)]
        sources: Vec<PathBuf>,
        #[arg(long, value_parser = parse_from_str::<Strategy>)]
        strategy: Strategy,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Forward maximum-matching segmentation with a training vocabulary.
    Segment {
        #[arg(long)]
        dict_from: PathBuf,
        /// Text to segment; existing whitespace is discarded.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Friedman test over a table with blocks as rows.
    Friedman {
        #[arg(long)]
        table: PathBuf,
        /// Also compute the exact permutation p-value (n*k <= 12).
        #[arg(long)]
        exact: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_from_str<T: std::str::FromStr<Err = Error>>(s: &str) -> std::result::Result<T, String> {
    s.parse::<T>().map_err(|e| e.to_string())
}

fn parse_named_path(s: &str) -> std::result::Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => Ok((name.to_string(), PathBuf::from(path))),
        _ => Err(format!("expected NAME=PATH, got {s:?}")),
    }
}

/// Parse arguments and run; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Cap the global thread pool from `SEGDIAG_THREADS` (0 or unset = automatic).
pub fn configure_threads() {
    if let Some(n) = std::env::var("SEGDIAG_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
    {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Attrs {
            train,
            test,
            corpus,
            out,
        } => cmd_attrs(&train, &test, &corpus, out.as_deref()),
        Command::Eval {
            train,
            gold,
            pred,
            attribute,
            buckets,
            corpus,
            report,
        } => cmd_eval(&train, &gold, &pred, attribute, buckets, &corpus, report.as_deref()),
        Command::Tensor {
            train,
            gold,
            pred,
            workspace,
            dataset,
            attributes,
            buckets,
            corpus,
            out,
        } => {
            let attributes = if attributes.is_empty() {
                Attribute::ALL.to_vec()
            } else {
                attributes
            };
            match workspace {
                Some(ws) => cmd_tensor_workspace(
                    &ws,
                    dataset.as_deref().unwrap_or_default(),
                    &attributes,
                    buckets,
                    &corpus,
                    out.as_deref(),
                ),
                None => {
                    let (train, gold) = (train.expect("required by clap"), gold.expect("required by clap"));
                    let dataset = dataset.unwrap_or_else(|| file_stem(&gold));
                    let input = TensorInput {
                        dataset,
                        train,
                        gold,
                        preds: pred,
                        buckets: buckets.unwrap_or(DEFAULT_BUCKETS),
                        attributes,
                        map: corpus.map.clone(),
                        slen_unit: corpus.slen_unit,
                    };
                    cmd_tensor(&input, out.as_deref())
                }
            }
        }
        Command::Measures {
            tensor,
            significance,
            out,
        } => cmd_measures(&tensor, significance, out.as_deref()),
        Command::Diagnose {
            self_run,
            aided,
            model,
            model_a,
            model_b,
            out,
            tsv,
        } => match (self_run, aided) {
            (Some(path), _) => cmd_diagnose_self(&path, model.as_deref(), out.as_deref(), tsv.as_deref()),
            (None, Some(paths)) => cmd_diagnose_aided(
                &paths[0],
                &paths[1],
                model_a.as_deref(),
                model_b.as_deref(),
                out.as_deref(),
                tsv.as_deref(),
            ),
            (None, None) => Err(Error::invalid("diagnose needs --self or --aided")),
        },
        Command::Cross { workspace, out } => cmd_cross(&workspace, out.as_deref()),
        Command::Select {
            target,
            sources,
            strategy,
            seed,
            map,
            out,
        } => cmd_select(&target, &sources, strategy, seed, map.as_deref(), out.as_deref()),
        Command::Segment {
            dict_from,
            input,
            map,
            out,
        } => cmd_segment(&dict_from, &input, map.as_deref(), out.as_deref()),
        Command::Friedman { table, exact, out } => cmd_friedman(&table, exact, out.as_deref()),
    }
}

// ---------------------------------------------------------------------------
// output helpers

/// Key-sorted pretty JSON with a trailing newline.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    // serde_json's default map is ordered, so a round trip through Value sorts keys
    let value = serde_json::to_value(value)?;
    let mut s = serde_json::to_string_pretty(&value)?;
    s.push('\n');
    Ok(s)
}

fn write_output(path: Option<&Path>, content: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, content).map_err(|e| Error::io(p, e)),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    write_output(path, &to_json_string(value)?)
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn file_stem(p: &Path) -> String {
    p.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into())
}

fn load_map(path: Option<&Path>) -> Result<Option<CharMap>> {
    path.map(CharMap::load).transpose()
}

fn load_sentences(path: &Path, map: Option<&CharMap>) -> Result<Vec<Sentence>> {
    Ok(parse_segmented_file(path, map)?.0)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn check_buckets(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::invalid(format!("--buckets must be at least 2, got {n}")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// attrs

fn cmd_attrs(train: &Path, test: &Path, opts: &CorpusOpts, out: Option<&Path>) -> Result<()> {
    let map = load_map(opts.map.as_deref())?;
    let train = load_sentences(train, map.as_ref())?;
    let test = load_sentences(test, map.as_ref())?;
    let stats = TrainingStats::build(&train)?;
    write_output(out, &attrs_tsv(&test, &stats, opts.slen_unit))
}

/// One row per gold test span with its attributes; ratios to 6 decimals.
pub fn attrs_tsv(test: &[Sentence], stats: &TrainingStats, unit: SlenUnit) -> String {
    let spans = spans_of(test);
    let attrs = attribute_vectors(&spans, test, stats, unit);
    let mut out = String::from("sentence_index\tstart\tend\ttext\twLen\tsLen\toDen\twFre\tcFre\twCon\tcCon\n");
    for (s, a) in spans.iter().zip(&attrs) {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
            s.sentence_index, s.start, s.end, s.text, a.w_len, a.s_len, a.o_den, a.w_fre, a.c_fre, a.w_con, a.c_con
        );
    }
    out
}

// ---------------------------------------------------------------------------
// eval

fn cmd_eval(
    train_path: &Path,
    gold_path: &Path,
    pred_path: &Path,
    attribute: Attribute,
    buckets: usize,
    opts: &CorpusOpts,
    report: Option<&Path>,
) -> Result<()> {
    check_buckets(buckets)?;
    let map = load_map(opts.map.as_deref())?;
    let train = load_sentences(train_path, map.as_ref())?;
    let gold = load_sentences(gold_path, map.as_ref())?;
    let pred = load_sentences(pred_path, map.as_ref())?;
    let stats = TrainingStats::build(&train)?;
    let run = evaluate_run(&gold, &pred, &stats, opts.slen_unit)?;
    let values: Vec<f64> = run.gold.iter().map(|s| s.attrs.get(attribute)).collect();
    let spec = make_buckets(&values, buckets, attribute)?;
    let results = bucket_f1(&run.gold, &run.pred, &spec);
    let corpus = corpus_f1(&gold, &pred)?;

    let report_value = json!({
        "schema_version": SCHEMA_VERSION,
        "attribute": attribute,
        "bucket_specs": spec.intervals(),
        "buckets": results.iter().map(|b| json!({
            "label": b.label,
            "gold_count": b.gold_count,
            "pred_count": b.pred_count,
            "match_count": b.match_count,
            "precision": b.precision,
            "recall": b.recall,
            "f1": b.f1,
        })).collect::<Vec<_>>(),
        "corpus": {
            "precision": corpus.precision,
            "recall": corpus.recall,
            "f1": corpus.f1,
        },
        "config": {
            "train": path_str(train_path),
            "gold": path_str(gold_path),
            "pred": path_str(pred_path),
            "map": opts.map.as_deref().map(path_str),
            "slen_unit": opts.slen_unit,
            "buckets_requested": buckets,
            "buckets_realized": spec.len(),
        },
    });
    write_json(report, &report_value)
}

// ---------------------------------------------------------------------------
// tensor

/// On-disk form of a [`PerformanceTensor`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorFile {
    pub schema_version: u32,
    pub config: Value,
    #[serde(flatten)]
    pub tensor: PerformanceTensor,
}

struct TensorInput {
    dataset: String,
    train: PathBuf,
    gold: PathBuf,
    preds: Vec<(String, PathBuf)>,
    buckets: usize,
    attributes: Vec<Attribute>,
    map: Option<PathBuf>,
    slen_unit: SlenUnit,
}

fn build_tensor_file(input: &TensorInput) -> Result<TensorFile> {
    check_buckets(input.buckets)?;
    if input.preds.is_empty() {
        return Err(Error::invalid("at least one --pred NAME=PATH is required"));
    }
    let map = load_map(input.map.as_deref())?;
    let train = load_sentences(&input.train, map.as_ref())?;
    let gold = load_sentences(&input.gold, map.as_ref())?;
    let preds: Vec<Vec<Sentence>> = input
        .preds
        .iter()
        .map(|(_, p)| load_sentences(p, map.as_ref()))
        .collect::<Result<_>>()?;
    let stats = TrainingStats::build(&train)?;
    let gold_run = evaluate_run(&gold, &gold, &stats, input.slen_unit)?;
    let specs = gold_bucket_specs(&gold_run.gold, &input.attributes, input.buckets)?;
    let runs: Vec<ModelRun<'_>> = input
        .preds
        .iter()
        .zip(&preds)
        .map(|((name, _), pred)| ModelRun {
            model: name,
            gold: &gold,
            pred,
            stats: &stats,
        })
        .collect();
    let tensor = build_tensor(&input.dataset, &runs, &specs, input.slen_unit)?;
    Ok(TensorFile {
        schema_version: SCHEMA_VERSION,
        config: json!({
            "train": path_str(&input.train),
            "gold": path_str(&input.gold),
            "preds": input.preds.iter().map(|(n, p)| json!({"model": n, "pred": path_str(p)})).collect::<Vec<_>>(),
            "map": input.map.as_deref().map(path_str),
            "slen_unit": input.slen_unit,
            "buckets_requested": input.buckets,
        }),
        tensor,
    })
}

fn cmd_tensor(input: &TensorInput, out: Option<&Path>) -> Result<()> {
    write_json(out, &build_tensor_file(input)?)
}

fn cmd_tensor_workspace(
    ws_path: &Path,
    dataset: &str,
    attributes: &[Attribute],
    buckets: Option<usize>,
    opts: &CorpusOpts,
    out: Option<&Path>,
) -> Result<()> {
    let ws = Workspace::load(ws_path)?;
    let entry = ws.dataset(dataset)?;
    let preds: Vec<(String, PathBuf)> = ws
        .runs
        .iter()
        .filter(|r| r.dataset == dataset)
        .map(|r| (r.model.clone(), ws.resolve(&r.pred)))
        .collect();
    let input = TensorInput {
        dataset: dataset.to_string(),
        train: ws.resolve(&entry.train),
        gold: ws.resolve(
            entry
                .test
                .as_ref()
                .ok_or_else(|| Error::invalid(format!("dataset {dataset:?} has no test split")))?,
        ),
        preds,
        buckets: buckets.unwrap_or(ws.options.buckets),
        attributes: attributes.to_vec(),
        map: opts
            .map
            .clone()
            .or_else(|| ws.options.map.as_ref().map(|m| ws.resolve(m))),
        slen_unit: ws.options.slen_unit.unwrap_or(opts.slen_unit),
    };
    cmd_tensor(&input, out)
}

// ---------------------------------------------------------------------------
// measures

fn cmd_measures(paths: &[PathBuf], significance: bool, out: Option<&Path>) -> Result<()> {
    let files: Vec<TensorFile> = paths.iter().map(|p| read_json(p)).collect::<Result<_>>()?;
    let tensors: Vec<PerformanceTensor> = files.into_iter().map(|f| f.tensor).collect();
    let report = measures_report(&tensors, significance)?;
    let mut report = report;
    report["config"] = json!({
        "tensors": paths.iter().map(|p| path_str(p)).collect::<Vec<_>>(),
        "significance": significance,
        "significance_level": SIGNIFICANCE_LEVEL,
    });
    write_json(out, &report)
}

fn scale_opt(m: &[Vec<Option<f64>>], f: f64) -> Vec<Vec<Option<f64>>> {
    m.iter().map(|r| r.iter().map(|v| v.map(|x| x * f)).collect()).collect()
}

fn not_significant(m: &[Vec<Option<f64>>]) -> Vec<Vec<Option<bool>>> {
    m.iter()
        .map(|r| r.iter().map(|p| p.map(|p| p >= SIGNIFICANCE_LEVEL)).collect())
        .collect()
}

/// Measures report over one tensor per dataset.
pub fn measures_report(tensors: &[PerformanceTensor], significance: bool) -> Result<Value> {
    if tensors.is_empty() {
        return Err(Error::invalid("no tensors"));
    }
    let mut names = HashSet::new();
    for t in tensors {
        if !names.insert(t.dataset.as_str()) {
            return Err(Error::invalid(format!("duplicate dataset {:?}", t.dataset)));
        }
    }
    let mut per_dataset = Vec::new();
    let mut tables = Vec::new();
    for t in tensors {
        let mw = model_wise(t);
        let dw = dataset_wise(t, &mw)?;
        let s_sigma_pct: Vec<Vec<f64>> = mw
            .s_sigma
            .iter()
            .map(|r| r.iter().map(|v| v * 100.0).collect())
            .collect();
        per_dataset.push(json!({
            "dataset": t.dataset,
            "models": mw.models,
            "attributes": mw.attributes,
            "corpus_f1": t.corpus.iter().map(|c| c.f1).collect::<Vec<_>>(),
            "s_rho": mw.s_rho,
            "s_sigma": mw.s_sigma,
            "s_rho_percent": scale_opt(&mw.s_rho, 100.0),
            "s_sigma_percent": s_sigma_pct,
            "alpha_mu": dw.alpha_mu,
            "alpha_rho": dw.alpha_rho,
        }));
        tables.push(mw);
    }

    let first = &tensors[0];
    let aligned = tensors
        .iter()
        .all(|t| t.attributes == first.attributes && t.models == first.models);
    let radar = if tensors.iter().all(|t| t.attributes == first.attributes) {
        let mu: Vec<Vec<f64>> = tensors.iter().map(|t| t.alpha_mu.clone()).collect();
        json!({
            "datasets": tensors.iter().map(|t| &t.dataset).collect::<Vec<_>>(),
            "attributes": first.attributes,
            "alpha_mu_normalized": normalize_by_max(&mu),
            "alpha_rho": tables.iter().zip(tensors).map(|(mw, t)| {
                t.attributes.iter().map(|&a| crate::measures::alpha_rho(mw, a).map(|r| r.value)).collect::<Result<Vec<_>>>()
            }).collect::<Result<Vec<_>>>()?,
        })
    } else {
        Value::Null
    };

    let averages = if aligned {
        let (m, a) = (first.models.len(), first.attributes.len());
        let n = tensors.len() as f64;
        json!({
            "models": first.models,
            "attributes": first.attributes,
            "f1_mean": (0..m).map(|i| tensors.iter().map(|t| t.corpus[i].f1).sum::<f64>() / n).collect::<Vec<_>>(),
            "s_rho": (0..m).map(|i| (0..a).map(|j| average_rho(&tables, i, j)).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "s_sigma_mean": (0..m).map(|i| (0..a).map(|j| tables.iter().map(|t| t.s_sigma[i][j]).sum::<f64>() / n).collect::<Vec<_>>()).collect::<Vec<_>>(),
        })
    } else {
        Value::Null
    };

    let significance_block = if significance {
        if !aligned {
            return Err(Error::invalid(
                "significance tables need tensors with identical models and attributes",
            ));
        }
        let sig = significance_tables(tensors)?;
        json!({
            "level": SIGNIFICANCE_LEVEL,
            "datasets": sig.datasets,
            "models": sig.models,
            "attributes": sig.attributes,
            "by_dataset": sig.by_dataset,
            "by_model": sig.by_model,
            "by_dataset_not_significant": not_significant(&sig.by_dataset),
            "by_model_not_significant": not_significant(&sig.by_model),
        })
    } else {
        Value::Null
    };

    Ok(json!({
        "schema_version": SCHEMA_VERSION,
        "datasets": per_dataset,
        "radar": radar,
        "averages": averages,
        "significance": significance_block,
    }))
}

// ---------------------------------------------------------------------------
// diagnose

fn pick_model(tensor: &PerformanceTensor, name: Option<&str>) -> Result<usize> {
    match name {
        None => {
            if tensor.models.is_empty() {
                Err(Error::invalid("tensor has no models"))
            } else {
                Ok(0)
            }
        }
        Some(n) => tensor
            .model_index(n)
            .ok_or_else(|| Error::invalid(format!("model {n:?} not in tensor {:?}", tensor.dataset))),
    }
}

fn cmd_diagnose_self(path: &Path, model: Option<&str>, out: Option<&Path>, tsv: Option<&Path>) -> Result<()> {
    let file: TensorFile = read_json(path)?;
    let i = pick_model(&file.tensor, model)?;
    let diag = self_diagnose(&file.tensor, i)?;
    if let Some(t) = tsv {
        write_output(Some(t), &self_diagnosis_tsv(&diag))?;
    }
    write_json(
        out,
        &json!({
            "schema_version": SCHEMA_VERSION,
            "config": {"run": path_str(path), "model": diag.model},
            "dataset": file.tensor.dataset,
            "self_diagnosis": diag,
        }),
    )
}

fn cmd_diagnose_aided(
    path_a: &Path,
    path_b: &Path,
    model_a: Option<&str>,
    model_b: Option<&str>,
    out: Option<&Path>,
    tsv: Option<&Path>,
) -> Result<()> {
    let a: TensorFile = read_json(path_a)?;
    let b: TensorFile = read_json(path_b)?;
    let ia = pick_model(&a.tensor, model_a)?;
    let ib = pick_model(&b.tensor, model_b)?;
    let diag = aided_diagnose(&a.tensor, ia, &b.tensor, ib)?;
    if let Some(t) = tsv {
        write_output(Some(t), &aided_diagnosis_tsv(&diag))?;
    }
    write_json(
        out,
        &json!({
            "schema_version": SCHEMA_VERSION,
            "config": {
                "run_a": path_str(path_a),
                "run_b": path_str(path_b),
                "model_a": a.tensor.models[ia],
                "model_b": b.tensor.models[ib],
            },
            "dataset": a.tensor.dataset,
            "aided_diagnosis": diag,
        }),
    )
}

// ---------------------------------------------------------------------------
// workspace

/// A dataset entry; also the format of stand-alone corpus files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub name: String,
    pub train: PathBuf,
    #[serde(default)]
    pub dev: Option<PathBuf>,
    #[serde(default)]
    pub test: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunEntry {
    pub model: String,
    pub dataset: String,
    pub pred: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossRunEntry {
    pub source: String,
    pub target: String,
    pub model: String,
    pub pred: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkspaceOptions {
    #[serde(default = "default_buckets")]
    pub buckets: usize,
    #[serde(default)]
    pub slen_unit: Option<SlenUnit>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub map: Option<PathBuf>,
}

fn default_buckets() -> usize {
    DEFAULT_BUCKETS
}

impl Default for WorkspaceOptions {
    fn default() -> Self {
        WorkspaceOptions {
            buckets: DEFAULT_BUCKETS,
            slen_unit: None,
            seed: 0,
            map: None,
        }
    }
}

/// Datasets, system runs and cross-dataset runs of one study. Relative
/// paths resolve against the workspace file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Workspace {
    pub datasets: Vec<DatasetEntry>,
    #[serde(default)]
    pub runs: Vec<RunEntry>,
    #[serde(default)]
    pub cross_runs: Vec<CrossRunEntry>,
    #[serde(default)]
    pub options: WorkspaceOptions,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Workspace {
    pub fn load(path: &Path) -> Result<Workspace> {
        let mut ws: Workspace = read_json(path)?;
        ws.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        ws.validate()?;
        Ok(ws)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn dataset(&self, name: &str) -> Result<&DatasetEntry> {
        self.datasets
            .iter()
            .find(|d| d.name == name)
            .ok_or_else(|| Error::invalid(format!("unknown dataset {name:?}")))
    }

    fn validate(&self) -> Result<()> {
        check_buckets(self.options.buckets)?;
        let mut names = HashSet::new();
        for d in &self.datasets {
            if !names.insert(d.name.as_str()) {
                return Err(Error::invalid(format!("duplicate dataset name {:?}", d.name)));
            }
        }
        let mut run_keys = HashSet::new();
        for r in &self.runs {
            self.dataset(&r.dataset)?;
            if !run_keys.insert((&r.model, &r.dataset)) {
                return Err(Error::invalid(format!("duplicate run ({}, {})", r.model, r.dataset)));
            }
        }
        let mut cross_keys = HashSet::new();
        for r in &self.cross_runs {
            self.dataset(&r.source)?;
            self.dataset(&r.target)?;
            if !cross_keys.insert((&r.source, &r.target, &r.model)) {
                return Err(Error::invalid(format!(
                    "duplicate cross run ({}, {}, {})",
                    r.source, r.target, r.model
                )));
            }
        }
        let mut paths: Vec<&Path> = Vec::new();
        for d in &self.datasets {
            paths.push(&d.train);
            paths.extend(d.dev.as_deref());
            paths.extend(d.test.as_deref());
        }
        paths.extend(self.runs.iter().map(|r| r.pred.as_path()));
        paths.extend(self.cross_runs.iter().map(|r| r.pred.as_path()));
        paths.extend(self.options.map.as_deref());
        for p in paths {
            let full = self.resolve(p);
            if !full.is_file() {
                return Err(Error::io(
                    full,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "referenced file not found"),
                ));
            }
        }
        Ok(())
    }

    fn char_map(&self) -> Result<Option<CharMap>> {
        load_map(self.options.map.as_ref().map(|m| self.resolve(m)).as_deref())
    }
}

fn load_corpus(entry: &DatasetEntry, base: &Path, map: Option<&CharMap>) -> Result<Corpus> {
    let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
    let load_opt = |p: &Option<PathBuf>| -> Result<Vec<Sentence>> {
        match p {
            Some(p) => load_sentences(&resolve(p), map),
            None => Ok(Vec::new()),
        }
    };
    Ok(Corpus::new(
        entry.name.clone(),
        load_sentences(&resolve(&entry.train), map)?,
        load_opt(&entry.dev)?,
        load_opt(&entry.test)?,
    ))
}

// ---------------------------------------------------------------------------
// cross

fn cmd_cross(ws_path: &Path, out: Option<&Path>) -> Result<()> {
    let ws = Workspace::load(ws_path)?;
    let mut report = cross_report(&ws)?;
    report["config"] = json!({ "workspace": path_str(ws_path) });
    write_json(out, &report)
}

pub fn cross_report(ws: &Workspace) -> Result<Value> {
    let map = ws.char_map()?;
    let corpora: Vec<Corpus> = ws
        .datasets
        .iter()
        .map(|d| load_corpus(d, &ws.base_dir, map.as_ref()))
        .collect::<Result<_>>()?;
    for c in &corpora {
        if c.test.is_empty() {
            return Err(Error::invalid(format!("dataset {:?} has no test sentences", c.name)));
        }
    }
    let names: Vec<String> = corpora.iter().map(|c| c.name.clone()).collect();
    let mut models: Vec<String> = Vec::new();
    for r in &ws.cross_runs {
        if !models.contains(&r.model) {
            models.push(r.model.clone());
        }
    }
    let scores: Vec<CrossScore> = ws
        .cross_runs
        .iter()
        .map(|r| {
            let target = corpora.iter().find(|c| c.name == r.target).expect("validated");
            let pred = load_sentences(&ws.resolve(&r.pred), map.as_ref())?;
            Ok(CrossScore {
                source: r.source.clone(),
                target: r.target.clone(),
                model: r.model.clone(),
                f1: corpus_f1(&target.test, &pred)?.f1,
            })
        })
        .collect::<Result<_>>()?;
    let cross = CrossTensor::from_scores(&names, &models, &scores)?;
    let psi = PsiMatrix::compute(&corpora)?;
    let correlations = (0..models.len())
        .map(|k| psi_u_correlation(&psi, &cross, k))
        .collect::<Result<Vec<_>>>()?;
    let psi_edges = distance_edges(&dense(&psi.psi))?;
    let u_edges = distance_edges(&cross.model_mean())?;
    let (observed, total) = cross.coverage();
    Ok(json!({
        "schema_version": SCHEMA_VERSION,
        "datasets": names,
        "models": models,
        "u": cross.u,
        "u_hat": cross.u_hat,
        "psi": psi.psi,
        "psi_x100": psi.scaled(100.0),
        "coverage": {"observed": observed, "total": total},
        "correlations": correlations,
        "edges": {
            "psi": edge_list(&names, &psi_edges),
            "u_mean": edge_list(&names, &u_edges),
        },
    }))
}

// ---------------------------------------------------------------------------
// select

fn load_corpus_file(path: &Path, map: Option<&CharMap>) -> Result<Corpus> {
    let entry: DatasetEntry = read_json(path)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    load_corpus(&entry, &base, map)
}

fn cmd_select(
    target_path: &Path,
    source_paths: &[PathBuf],
    strategy: Strategy,
    seed: u64,
    map_path: Option<&Path>,
    out: Option<&Path>,
) -> Result<()> {
    let map = load_map(map_path)?;
    let target = load_corpus_file(target_path, map.as_ref())?;
    let sources: Vec<Corpus> = source_paths
        .iter()
        .map(|p| load_corpus_file(p, map.as_ref()))
        .collect::<Result<_>>()?;
    let plan = select_order(&target, &sources, strategy, seed)?;
    write_json(
        out,
        &json!({
            "schema_version": SCHEMA_VERSION,
            "config": {
                "target": path_str(target_path),
                "sources": source_paths.iter().map(|p| path_str(p)).collect::<Vec<_>>(),
                "strategy": strategy,
                "seed": seed,
                "map": map_path.map(path_str),
                "measure": "psi",
            },
            "order_names": plan.order_names(),
            "plan": plan,
        }),
    )
}

// ---------------------------------------------------------------------------
// segment

fn cmd_segment(dict_path: &Path, input: &Path, map_path: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let map = load_map(map_path)?;
    let train = load_sentences(dict_path, map.as_ref())?;
    let dict = MatchDict::from_sentences(&train)?;
    let raw = load_sentences(input, map.as_ref())?;
    let segmented = raw
        .iter()
        .map(|s| segment_sentence(s.chars(), &dict))
        .collect::<Result<Vec<_>>>()?;
    write_output(out, &to_segmented_text(&segmented))
}

// ---------------------------------------------------------------------------
// friedman

/// Parse a whitespace-separated table, blocks as rows. Lines starting with
/// `#` are comments; a first row that does not parse is a header; a leading
/// non-numeric field on a data row is a row label.
pub fn parse_table(text: &str) -> std::result::Result<Vec<Vec<f64>>, String> {
    let mut rows = Vec::new();
    let mut seen_first = false;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let parsed: Vec<Option<f64>> = fields.iter().map(|f| f.parse::<f64>().ok()).collect();
        let numbers = match parsed.split_first() {
            Some((None, rest)) if !rest.is_empty() && rest.iter().all(Option::is_some) => rest.to_vec(),
            _ => parsed,
        };
        if numbers.iter().all(Option::is_some) {
            rows.push(numbers.into_iter().flatten().collect());
        } else if !seen_first {
            // header
        } else {
            return Err(format!("line {}: non-numeric cell", lineno + 1));
        }
        seen_first = true;
    }
    Ok(rows)
}

fn cmd_friedman(path: &Path, exact: bool, out: Option<&Path>) -> Result<()> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let table = parse_table(&text).map_err(|message| Error::Format {
        path: path.to_path_buf(),
        message,
    })?;
    let result = friedman(&table)?;
    let exact_p = if exact {
        if result.n_blocks * result.k_treatments > EXACT_MAX_CELLS {
            return Err(Error::invalid(format!(
                "--exact supports n*k <= {EXACT_MAX_CELLS}, table has {}",
                result.n_blocks * result.k_treatments
            )));
        }
        Some(friedman_exact_p(&table)?)
    } else {
        None
    };
    write_json(
        out,
        &json!({
            "schema_version": SCHEMA_VERSION,
            "config": {"table": path_str(path), "exact": exact},
            "statistic": result.statistic,
            "dof": result.dof,
            "p_value": result.p_value,
            "n_blocks": result.n_blocks,
            "k_treatments": result.k_treatments,
            "exact_p_value": exact_p,
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_parsing() {
        let t = parse_table("# c\nb1 b2 b3\nm1 0.9 0.8 0.7\nm2 0.5 0.6 0.7\n").unwrap();
        assert_eq!(t, vec![vec![0.9, 0.8, 0.7], vec![0.5, 0.6, 0.7]]);
        let t = parse_table("1 2\n3 4\n").unwrap();
        assert_eq!(t, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert!(parse_table("1 2\n3 x\n").is_err());
    }

    #[test]
    fn named_path_parsing() {
        assert_eq!(
            parse_named_path("fmm=a/b.txt").unwrap(),
            ("fmm".into(), PathBuf::from("a/b.txt"))
        );
        assert!(parse_named_path("nopath").is_err());
        assert!(parse_named_path("=x").is_err());
    }

    #[test]
    fn json_is_key_sorted() {
        let s = to_json_string(&json!({"b": 1, "a": {"d": 2, "c": 3}})).unwrap();
        assert!(s.find("\"a\"").unwrap() < s.find("\"b\"").unwrap());
        assert!(s.find("\"c\"").unwrap() < s.find("\"d\"").unwrap());
        assert!(s.ends_with("}\n"));
    }

    #[test]
    fn bad_flags_exit_one() {
        assert_eq!(main_with_args(["segdiag", "eval", "--bogus"]), 1);
        assert_eq!(main_with_args(["segdiag", "nosuch"]), 1);
        assert_eq!(main_with_args(["segdiag", "--help"]), 0);
    }
}
