//! Attribute buckets and bucket-level span precision, recall and F1.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attributes::{attribute_vectors, Attribute, AttributeVector, SlenUnit, TrainingStats};
use crate::corpus::{spans_of, Sentence, Span};
use crate::measures::alpha_mu;
use crate::{Error, Result};

/// Default number of buckets per attribute (small / middle / large).
pub const DEFAULT_BUCKETS: usize = 3;

/// Left-closed intervals over one attribute. Bucket `i` holds values in
/// `[cuts[i-1], cuts[i])`; the first bucket is open to the left and the last
/// to the right, so every value lands somewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketSpec {
    pub attribute: Attribute,
    /// Smallest observed gold value.
    pub lo: f64,
    pub cuts: Vec<f64>,
    pub labels: Vec<String>,
    pub requested: usize,
}

/// Display form of one bucket interval; `hi` is `None` for the open end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketInterval {
    pub label: String,
    pub lo: f64,
    pub hi: Option<f64>,
}

impl BucketSpec {
    pub fn len(&self) -> usize {
        self.cuts.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn assign(&self, value: f64) -> usize {
        self.cuts.partition_point(|&c| c <= value)
    }

    pub fn intervals(&self) -> Vec<BucketInterval> {
        (0..self.len())
            .map(|i| BucketInterval {
                label: self.labels[i].clone(),
                lo: if i == 0 { self.lo } else { self.cuts[i - 1] },
                hi: self.cuts.get(i).copied(),
            })
            .collect()
    }
}

fn bucket_labels(n: usize) -> Vec<String> {
    match n {
        1 => vec!["all".to_string()],
        2 => vec!["S".to_string(), "L".to_string()],
        3 => vec!["S".to_string(), "M".to_string(), "L".to_string()],
        _ => (1..=n).map(|i| format!("B{i}")).collect(),
    }
}

/// Equal-mass buckets over the observed `values` of `attribute`.
///
/// Cut `q` is the value at sorted position `floor(q * N / n)`; duplicate cuts
/// collapse, which merges the emptied bucket into its left neighbour. With
/// fewer distinct values than `n_buckets`, every distinct value gets its own
/// bucket.
pub fn make_buckets(values: &[f64], n_buckets: usize, attribute: Attribute) -> Result<BucketSpec> {
    if values.is_empty() {
        return Err(Error::invalid(format!("no values to bucket for {attribute}")));
    }
    if n_buckets < 2 {
        return Err(Error::invalid(format!("need at least 2 buckets, got {n_buckets}")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("non-finite {attribute} value")));
    }
    let mut sorted: Vec<f64> = values
        .iter()
        .map(|&v| if attribute.is_integer() { v.round() } else { v })
        .collect();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let lo = sorted[0];
    let mut distinct = sorted.clone();
    distinct.dedup();

    let cuts: Vec<f64> = if distinct.len() <= n_buckets {
        distinct[1..].to_vec()
    } else {
        let n = sorted.len();
        let mut cuts: Vec<f64> = (1..n_buckets).map(|q| sorted[q * n / n_buckets]).collect();
        cuts.dedup();
        cuts.retain(|&c| c > lo);
        cuts
    };
    let realized = cuts.len() + 1;
    if realized < n_buckets {
        log::warn!("{attribute}: {n_buckets} buckets requested, {realized} realized");
    }
    Ok(BucketSpec {
        attribute,
        lo,
        cuts,
        labels: bucket_labels(realized),
        requested: n_buckets,
    })
}

/// A span with its attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSpan {
    pub span: Span,
    pub attrs: AttributeVector,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn from_counts(gold: usize, pred: usize, matched: usize) -> Prf {
        let precision = if pred == 0 { 0.0 } else { matched as f64 / pred as f64 };
        let recall = if gold == 0 { 0.0 } else { matched as f64 / gold as f64 };
        Prf {
            precision,
            recall,
            f1: harmonic_mean(precision, recall),
        }
    }
}

pub fn harmonic_mean(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketResult {
    pub bucket_index: usize,
    pub label: String,
    pub gold_count: usize,
    pub pred_count: usize,
    pub match_count: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn check_aligned(gold: &[Sentence], pred: &[Sentence]) -> Result<()> {
    if gold.len() != pred.len() {
        return Err(Error::invalid(format!(
            "gold has {} sentences but prediction has {}",
            gold.len(),
            pred.len()
        )));
    }
    for (i, (g, p)) in gold.iter().zip(pred).enumerate() {
        if g.chars() != p.chars() {
            return Err(Error::invalid(format!(
                "sentence {i}: prediction text differs from gold text"
            )));
        }
    }
    Ok(())
}

/// Gold and predicted spans of one system on one test set, with attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluatedRun {
    pub gold: Vec<ScoredSpan>,
    pub pred: Vec<ScoredSpan>,
}

/// Attribute both sides of a run. Predicted spans take their sentence-level
/// attributes from the gold sentence with the same characters, so a
/// predicted span identical to a gold span carries identical attributes.
pub fn evaluate_run(
    gold: &[Sentence],
    pred: &[Sentence],
    stats: &TrainingStats,
    unit: SlenUnit,
) -> Result<EvaluatedRun> {
    check_aligned(gold, pred)?;
    let score = |spans: Vec<Span>| {
        let attrs = attribute_vectors(&spans, gold, stats, unit);
        spans
            .into_iter()
            .zip(attrs)
            .map(|(span, attrs)| ScoredSpan { span, attrs })
            .collect::<Vec<_>>()
    };
    Ok(EvaluatedRun {
        gold: score(spans_of(gold)),
        pred: score(spans_of(pred)),
    })
}

fn matched_keys(gold: &[ScoredSpan], pred: &[ScoredSpan]) -> HashSet<(usize, usize, usize)> {
    let gold_keys: HashSet<_> = gold.iter().map(|s| s.span.key()).collect();
    pred.iter()
        .map(|s| s.span.key())
        .filter(|k| gold_keys.contains(k))
        .collect()
}

/// Per-bucket counts and scores. Recall counts gold spans by their own
/// bucket, precision counts predicted spans by theirs.
pub fn bucket_f1(gold: &[ScoredSpan], pred: &[ScoredSpan], spec: &BucketSpec) -> Vec<BucketResult> {
    let matched = matched_keys(gold, pred);
    let n = spec.len();
    let mut gold_count = vec![0usize; n];
    let mut pred_count = vec![0usize; n];
    let mut match_count = vec![0usize; n];
    for s in gold {
        let b = spec.assign(s.attrs.get(spec.attribute));
        gold_count[b] += 1;
        if matched.contains(&s.span.key()) {
            match_count[b] += 1;
        }
    }
    for s in pred {
        pred_count[spec.assign(s.attrs.get(spec.attribute))] += 1;
    }
    (0..n)
        .map(|i| {
            let prf = Prf::from_counts(gold_count[i], pred_count[i], match_count[i]);
            BucketResult {
                bucket_index: i,
                label: spec.labels[i].clone(),
                gold_count: gold_count[i],
                pred_count: pred_count[i],
                match_count: match_count[i],
                precision: prf.precision,
                recall: prf.recall,
                f1: prf.f1,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusScore {
    pub gold_count: usize,
    pub pred_count: usize,
    pub match_count: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Corpus-level span precision, recall and F1.
pub fn corpus_f1(gold: &[Sentence], pred: &[Sentence]) -> Result<CorpusScore> {
    check_aligned(gold, pred)?;
    let mut counts = (0, 0, 0);
    for (g, p) in gold.iter().zip(pred) {
        let gw: HashSet<_> = g.words().iter().map(|r| (r.start, r.end)).collect();
        counts.0 += g.word_count();
        counts.1 += p.word_count();
        counts.2 += p.words().iter().filter(|r| gw.contains(&(r.start, r.end))).count();
    }
    let prf = Prf::from_counts(counts.0, counts.1, counts.2);
    Ok(CorpusScore {
        gold_count: counts.0,
        pred_count: counts.1,
        match_count: counts.2,
        precision: prf.precision,
        recall: prf.recall,
        f1: prf.f1,
    })
}

/// Bucket specs computed from gold attributes only.
pub fn gold_bucket_specs(gold: &[ScoredSpan], attributes: &[Attribute], n_buckets: usize) -> Result<Vec<BucketSpec>> {
    attributes
        .iter()
        .map(|&a| {
            let values: Vec<f64> = gold.iter().map(|s| s.attrs.get(a)).collect();
            make_buckets(&values, n_buckets, a)
        })
        .collect()
}

/// One system's predictions on a shared test set.
#[derive(Debug, Clone, Copy)]
pub struct ModelRun<'a> {
    pub model: &'a str,
    pub gold: &'a [Sentence],
    pub pred: &'a [Sentence],
    pub stats: &'a TrainingStats,
}

/// Bucket F1 of every model on every attribute, `values[model][attribute][bucket]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceTensor {
    pub dataset: String,
    pub models: Vec<String>,
    pub attributes: Vec<Attribute>,
    pub bucket_specs: Vec<BucketSpec>,
    pub values: Vec<Vec<Vec<f64>>>,
    /// Full bucket tables, same indexing as `values`.
    pub buckets: Vec<Vec<Vec<BucketResult>>>,
    pub corpus: Vec<CorpusScore>,
    /// Mean gold attribute value per attribute.
    pub alpha_mu: Vec<f64>,
}

impl PerformanceTensor {
    pub fn model_index(&self, model: &str) -> Option<usize> {
        self.models.iter().position(|m| m == model)
    }

    pub fn slice(&self, model: usize, attribute: usize) -> &[f64] {
        &self.values[model][attribute]
    }
}

pub fn build_tensor(
    dataset: &str,
    runs: &[ModelRun<'_>],
    specs: &[BucketSpec],
    unit: SlenUnit,
) -> Result<PerformanceTensor> {
    let first = runs.first().ok_or_else(|| Error::invalid("no model runs"))?;
    for r in runs {
        if r.gold != first.gold || r.stats != first.stats {
            return Err(Error::invalid(format!(
                "run {:?} does not share the gold test set and training data of {:?}",
                r.model, first.model
            )));
        }
    }
    let mut names = HashSet::new();
    for r in runs {
        if !names.insert(r.model) {
            return Err(Error::invalid(format!("duplicate model name {:?}", r.model)));
        }
    }

    let evaluated: Vec<(EvaluatedRun, CorpusScore)> = runs
        .par_iter()
        .map(|r| Ok((evaluate_run(r.gold, r.pred, r.stats, unit)?, corpus_f1(r.gold, r.pred)?)))
        .collect::<Result<_>>()?;

    let buckets: Vec<Vec<Vec<BucketResult>>> = evaluated
        .par_iter()
        .map(|(run, _)| specs.iter().map(|spec| bucket_f1(&run.gold, &run.pred, spec)).collect())
        .collect();
    let values = buckets
        .iter()
        .map(|per_attr| per_attr.iter().map(|bs| bs.iter().map(|b| b.f1).collect()).collect())
        .collect();
    let gold_attrs: Vec<AttributeVector> = evaluated[0].0.gold.iter().map(|s| s.attrs).collect();
    let alpha_mu = specs
        .iter()
        .map(|s| alpha_mu(&gold_attrs, s.attribute))
        .collect::<Result<_>>()?;

    Ok(PerformanceTensor {
        dataset: dataset.to_string(),
        models: runs.iter().map(|r| r.model.to_string()).collect(),
        attributes: specs.iter().map(|s| s.attribute).collect(),
        bucket_specs: specs.to_vec(),
        values,
        buckets,
        corpus: evaluated.iter().map(|(_, c)| *c).collect(),
        alpha_mu,
    })
}
