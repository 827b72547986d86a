//! Cross-dataset measures: the transfer F1 tensor and its normalization,
//! the criterion-discrepancy matrix and dataset-distance edge weights.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attributes::{psi_word, TrainingStats};
use crate::corpus::{spans_of, Corpus, LabelSeq, Sentence, Span};
use crate::measures::spearman;
use crate::{Error, Result};

/// Expected label consistency of the test words of one corpus against the
/// training counts of another: the sum over `(word, labels)` types of the
/// type's consistency times its relative frequency among test tokens.
pub fn psi(train_stats: &TrainingStats, test: &[Span]) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::invalid("criterion discrepancy needs a non-empty test set"));
    }
    let mut types: BTreeMap<(&str, &LabelSeq), u64> = BTreeMap::new();
    for s in test {
        *types.entry((s.text.as_str(), &s.labels)).or_insert(0) += 1;
    }
    let total = test.len() as f64;
    let weighted: f64 = types
        .into_iter()
        .map(|((word, labels), count)| psi_word(word, labels, train_stats) * count as f64)
        .sum();
    Ok(weighted / total)
}

pub fn psi_sentences(train_stats: &TrainingStats, test: &[Sentence]) -> Result<f64> {
    psi(train_stats, &spans_of(test))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiMatrix {
    pub datasets: Vec<String>,
    /// `psi[train][test]`.
    pub psi: Vec<Vec<f64>>,
}

impl PsiMatrix {
    /// Every training split against every test split.
    pub fn compute(corpora: &[Corpus]) -> Result<PsiMatrix> {
        let stats: Vec<TrainingStats> = corpora
            .par_iter()
            .map(|c| TrainingStats::build(&c.train))
            .collect::<Result<_>>()?;
        let tests: Vec<Vec<Span>> = corpora.iter().map(|c| spans_of(&c.test)).collect();
        let psi = stats
            .par_iter()
            .map(|s| tests.iter().map(|t| psi(s, t)).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        Ok(PsiMatrix {
            datasets: corpora.iter().map(|c| c.name.clone()).collect(),
            psi,
        })
    }

    pub fn scaled(&self, factor: f64) -> Vec<Vec<f64>> {
        self.psi
            .iter()
            .map(|r| r.iter().map(|v| v * factor).collect())
            .collect()
    }
}

/// Transfer F1 `u[source][target][model]` with the relative in-domain gap
/// `u_hat[i][j][k] = (u[j][j][k] - u[i][j][k]) / u[j][j][k]`.
/// Missing or undefined cells are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossTensor {
    pub datasets: Vec<String>,
    pub models: Vec<String>,
    pub u: Vec<Vec<Vec<Option<f64>>>>,
    pub u_hat: Vec<Vec<Vec<Option<f64>>>>,
}

/// One observed cell of the transfer tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossScore {
    pub source: String,
    pub target: String,
    pub model: String,
    pub f1: f64,
}

pub fn relative_gap(in_domain: f64, transfer: f64) -> Option<f64> {
    if in_domain > 0.0 {
        Some((in_domain - transfer) / in_domain)
    } else {
        None
    }
}

impl CrossTensor {
    pub fn from_scores(datasets: &[String], models: &[String], scores: &[CrossScore]) -> Result<CrossTensor> {
        let d = datasets.len();
        let m = models.len();
        let find = |names: &[String], name: &str, what: &str| {
            names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::invalid(format!("unknown {what} {name:?}")))
        };
        let mut u = vec![vec![vec![None; m]; d]; d];
        for s in scores {
            let i = find(datasets, &s.source, "dataset")?;
            let j = find(datasets, &s.target, "dataset")?;
            let k = find(models, &s.model, "model")?;
            if !(0.0..=1.0).contains(&s.f1) {
                return Err(Error::invalid(format!("F1 {} outside [0, 1]", s.f1)));
            }
            if u[i][j][k].replace(s.f1).is_some() {
                return Err(Error::invalid(format!(
                    "duplicate cell ({}, {}, {})",
                    s.source, s.target, s.model
                )));
            }
        }
        let u_hat = (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| {
                        (0..m)
                            .map(|k| match (u[j][j][k], u[i][j][k]) {
                                (Some(_), Some(_)) if i == j => u[j][j][k].filter(|&v| v > 0.0).map(|_| 0.0),
                                (Some(own), Some(transfer)) => relative_gap(own, transfer),
                                _ => None,
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Ok(CrossTensor {
            datasets: datasets.to_vec(),
            models: models.to_vec(),
            u,
            u_hat,
        })
    }

    /// Number of observed `u` cells out of `d * d * m`.
    pub fn coverage(&self) -> (usize, usize) {
        let total = self.datasets.len().pow(2) * self.models.len();
        let seen = self.u.iter().flatten().flatten().filter(|c| c.is_some()).count();
        (seen, total)
    }

    /// `u` averaged over models with observed cells; `None` if none observed.
    pub fn model_mean(&self) -> Vec<Vec<Option<f64>>> {
        self.u
            .iter()
            .map(|row| {
                row.iter()
                    .map(|cell| {
                        let seen: Vec<f64> = cell.iter().flatten().copied().collect();
                        if seen.is_empty() {
                            None
                        } else {
                            Some(seen.iter().sum::<f64>() / seen.len() as f64)
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiUCorrelation {
    pub model: String,
    /// Per target dataset, Spearman over sources of `(psi[i][j], u[i][j][k])`.
    pub per_target: Vec<Option<f64>>,
    /// Spearman over all off-diagonal `(i, j)` pairs.
    pub pooled: Option<f64>,
}

fn spearman_pairs(pairs: &[(f64, f64)]) -> Option<f64> {
    if pairs.len() < 2 {
        return None;
    }
    let (x, y): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    spearman(&x, &y).ok().flatten()
}

pub fn psi_u_correlation(psi: &PsiMatrix, u: &CrossTensor, model: usize) -> Result<PsiUCorrelation> {
    if psi.datasets != u.datasets {
        return Err(Error::invalid(
            "psi matrix and cross tensor have different dataset axes",
        ));
    }
    let name = u
        .models
        .get(model)
        .ok_or_else(|| Error::invalid(format!("model index {model} out of range")))?;
    let d = psi.datasets.len();
    let per_target = (0..d)
        .map(|j| {
            let pairs: Vec<(f64, f64)> = (0..d)
                .filter_map(|i| u.u[i][j][model].map(|v| (psi.psi[i][j], v)))
                .collect();
            spearman_pairs(&pairs)
        })
        .collect();
    let pooled_pairs: Vec<(f64, f64)> = (0..d)
        .flat_map(|i| (0..d).map(move |j| (i, j)))
        .filter(|(i, j)| i != j)
        .filter_map(|(i, j)| u.u[i][j][model].map(|v| (psi.psi[i][j], v)))
        .collect();
    Ok(PsiUCorrelation {
        model: name.clone(),
        per_target,
        pooled: spearman_pairs(&pooled_pairs),
    })
}

/// Symmetric edge weights `w[i][j] = z[i][j] / z[j][j] + z[j][i] / z[i][i]`.
/// Cells touching a zero or missing diagonal, or a missing entry, are `None`.
pub fn distance_edges(z: &[Vec<Option<f64>>]) -> Result<Vec<Vec<Option<f64>>>> {
    let n = z.len();
    if z.iter().any(|r| r.len() != n) {
        return Err(Error::invalid("edge weights need a square matrix"));
    }
    let diag = |i: usize| z[i][i].filter(|&v| v != 0.0);
    Ok((0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let (dii, djj) = (diag(i)?, diag(j)?);
                    Some(z[i][j]? / djj + z[j][i]? / dii)
                })
                .collect()
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub a: String,
    pub b: String,
    pub weight: f64,
}

/// Upper-triangle edges with defined weights.
pub fn edge_list(names: &[String], w: &[Vec<Option<f64>>]) -> Vec<Edge> {
    let mut edges = Vec::new();
    for i in 0..names.len() {
        for j in i + 1..names.len() {
            if let Some(weight) = w[i][j] {
                edges.push(Edge {
                    a: names[i].clone(),
                    b: names[j].clone(),
                    weight,
                });
            }
        }
    }
    edges
}

pub fn dense(z: &[Vec<f64>]) -> Vec<Vec<Option<f64>>> {
    z.iter().map(|r| r.iter().map(|&v| Some(v)).collect()).collect()
}
