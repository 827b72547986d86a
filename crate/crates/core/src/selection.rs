//! Greedy ordering of source corpora for multi-source transfer.
//!
//! Starting from the target's training data, each step scores every
//! remaining source by a measure of (pool + source) against the target dev
//! set, enqueues one source according to the strategy and adds its training
//! data to the pool.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attributes::TrainingStats;
use crate::corpus::{spans_of, Corpus, Span};
use crate::crossdata::psi;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Max,
    Min,
    Rand,
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(Strategy::Max),
            "min" => Ok(Strategy::Min),
            "rand" => Ok(Strategy::Rand),
            _ => Err(Error::invalid(format!("unknown strategy {s:?}"))),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Max => "max",
            Strategy::Min => "min",
            Strategy::Rand => "rand",
        })
    }
}

/// Scores of every candidate considered at one greedy step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepAudit {
    pub step: usize,
    /// `(source index, score)` for every unselected source, by index.
    pub candidates: Vec<(usize, f64)>,
    pub chosen: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionPlan {
    pub target: String,
    pub sources: Vec<String>,
    pub strategy: Strategy,
    pub seed: Option<u64>,
    /// Source indices in enqueue order.
    pub order: Vec<usize>,
    /// Score of the chosen source at each step.
    pub scores: Vec<f64>,
    pub steps: Vec<StepAudit>,
}

impl SelectionPlan {
    pub fn order_names(&self) -> Vec<&str> {
        self.order.iter().map(|&i| self.sources[i].as_str()).collect()
    }
}

/// Pointwise sum of two training count tables.
pub fn merge_training(a: &TrainingStats, b: &TrainingStats) -> TrainingStats {
    a.merge(b)
}

/// Order `sources` for `target` using the criterion-discrepancy measure.
pub fn select_order(target: &Corpus, sources: &[Corpus], strategy: Strategy, seed: u64) -> Result<SelectionPlan> {
    select_order_with(target, sources, strategy, seed, psi)
}

/// [`select_order`] with a caller-supplied measure `phi(pool, dev spans)`.
pub fn select_order_with<F>(
    target: &Corpus,
    sources: &[Corpus],
    strategy: Strategy,
    seed: u64,
    phi: F,
) -> Result<SelectionPlan>
where
    F: Fn(&TrainingStats, &[Span]) -> Result<f64> + Sync,
{
    if target.dev.is_empty() {
        return Err(Error::invalid(format!("target {:?} has an empty dev set", target.name)));
    }
    if sources.is_empty() {
        return Err(Error::invalid("no source corpora"));
    }
    let mut names = HashSet::new();
    for s in sources {
        if !names.insert(s.name.as_str()) {
            return Err(Error::invalid(format!("duplicate source name {:?}", s.name)));
        }
    }

    let dev = spans_of(&target.dev);
    let source_stats: Vec<TrainingStats> = sources
        .par_iter()
        .map(|s| {
            let mut st = TrainingStats::empty();
            for sent in &s.train {
                st.add_sentence(sent);
            }
            st
        })
        .collect();
    let mut pool = TrainingStats::empty();
    for sent in &target.train {
        pool.add_sentence(sent);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut remaining: Vec<usize> = (0..sources.len()).collect();
    let mut order = Vec::with_capacity(sources.len());
    let mut scores = Vec::with_capacity(sources.len());
    let mut steps = Vec::with_capacity(sources.len());

    while !remaining.is_empty() {
        let candidates: Vec<(usize, f64)> = remaining
            .par_iter()
            .map(|&k| Ok((k, phi(&merge_training(&pool, &source_stats[k]), &dev)?)))
            .collect::<Result<_>>()?;
        let pick = match strategy {
            // strict comparisons keep the lowest index on ties
            Strategy::Max => candidates
                .iter()
                .enumerate()
                .fold(0, |best, (p, c)| if c.1 > candidates[best].1 { p } else { best }),
            Strategy::Min => candidates
                .iter()
                .enumerate()
                .fold(0, |best, (p, c)| if c.1 < candidates[best].1 { p } else { best }),
            Strategy::Rand => rng.gen_range(0..candidates.len()),
        };
        let (chosen, score) = candidates[pick];
        pool.absorb(&source_stats[chosen]);
        order.push(chosen);
        scores.push(score);
        steps.push(StepAudit {
            step: steps.len(),
            candidates,
            chosen,
        });
        remaining.retain(|&k| k != chosen);
    }

    Ok(SelectionPlan {
        target: target.name.clone(),
        sources: sources.iter().map(|s| s.name.clone()).collect(),
        strategy,
        seed: (strategy == Strategy::Rand).then_some(seed),
        order,
        scores,
        steps,
    })
}
