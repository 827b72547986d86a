//! Model-wise and dataset-wise measures over bucketed performance.
//!
//! For model `i` and attribute `j`:
//! - `s_rho[i][j]` is the Spearman correlation between the bucket F1 values
//!   and the bucket order (ascending attribute interval);
//! - `s_sigma[i][j]` is the population standard deviation of those F1 values.
//!
//! For a dataset, `alpha_mu[j]` is the mean gold attribute value and
//! `alpha_rho[j]` the mean of `|s_rho[i][j]|` over models.

use serde::{Deserialize, Serialize};

use crate::attributes::{Attribute, AttributeVector};
use crate::bucketing::PerformanceTensor;
use crate::stats::{average_ranks, friedman};
use crate::{Error, Result};

/// Spearman rank correlation with tie-averaged ranks.
///
/// Returns `Ok(None)` when either input is constant, since the coefficient
/// is undefined there.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "spearman: lengths {} and {} differ",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::invalid("spearman needs at least 2 pairs"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("spearman: non-finite input"));
    }
    Ok(pearson(&average_ranks(x), &average_ranks(y)))
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

pub fn population_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelWiseTable {
    pub models: Vec<String>,
    pub attributes: Vec<Attribute>,
    /// `None` where the coefficient is undefined.
    pub s_rho: Vec<Vec<Option<f64>>>,
    pub s_sigma: Vec<Vec<f64>>,
}

impl ModelWiseTable {
    pub fn attribute_index(&self, attribute: Attribute) -> Option<usize> {
        self.attributes.iter().position(|&a| a == attribute)
    }
}

/// Spearman of one F1 slice against its bucket order. A single-bucket
/// slice has no order to correlate with and counts as undefined.
pub fn slice_rho(slice: &[f64]) -> Option<f64> {
    if slice.len() < 2 {
        return None;
    }
    let order: Vec<f64> = (1..=slice.len()).map(|r| r as f64).collect();
    spearman(slice, &order).ok().flatten()
}

pub fn model_wise(tensor: &PerformanceTensor) -> ModelWiseTable {
    let s_rho = tensor
        .values
        .iter()
        .map(|per_attr| per_attr.iter().map(|slice| slice_rho(slice)).collect())
        .collect();
    let s_sigma = tensor
        .values
        .iter()
        .map(|per_attr| per_attr.iter().map(|slice| population_std(slice)).collect())
        .collect();
    ModelWiseTable {
        models: tensor.models.clone(),
        attributes: tensor.attributes.clone(),
        s_rho,
        s_sigma,
    }
}

/// Mean value of `attribute` over all gold test words.
pub fn alpha_mu(attrs: &[AttributeVector], attribute: Attribute) -> Result<f64> {
    if attrs.is_empty() {
        return Err(Error::invalid("alpha_mu over an empty word list"));
    }
    Ok(attrs.iter().map(|a| a.get(attribute)).sum::<f64>() / attrs.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaRho {
    /// `None` when no model has a defined coefficient.
    pub value: Option<f64>,
    /// Models whose coefficient was undefined and left out of the mean.
    pub excluded: usize,
}

pub fn alpha_rho(mw: &ModelWiseTable, attribute: Attribute) -> Result<AlphaRho> {
    let j = mw
        .attribute_index(attribute)
        .ok_or_else(|| Error::invalid(format!("attribute {attribute} not in table")))?;
    let defined: Vec<f64> = mw.s_rho.iter().filter_map(|row| row[j]).map(f64::abs).collect();
    let excluded = mw.s_rho.len() - defined.len();
    let value = if defined.is_empty() {
        None
    } else {
        Some(defined.iter().sum::<f64>() / defined.len() as f64)
    };
    Ok(AlphaRho { value, excluded })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetWiseTable {
    pub attributes: Vec<Attribute>,
    pub alpha_mu: Vec<f64>,
    pub alpha_rho: Vec<AlphaRho>,
}

pub fn dataset_wise(tensor: &PerformanceTensor, mw: &ModelWiseTable) -> Result<DatasetWiseTable> {
    Ok(DatasetWiseTable {
        attributes: tensor.attributes.clone(),
        alpha_mu: tensor.alpha_mu.clone(),
        alpha_rho: tensor
            .attributes
            .iter()
            .map(|&a| alpha_rho(mw, a))
            .collect::<Result<_>>()?,
    })
}

/// Divide each column by its maximum across rows (`rows[dataset][attribute]`).
/// A column whose maximum is not positive is left as `None`.
pub fn normalize_by_max(rows: &[Vec<f64>]) -> Vec<Vec<Option<f64>>> {
    let width = rows.first().map_or(0, Vec::len);
    let maxima: Vec<f64> = (0..width)
        .map(|j| rows.iter().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    rows.iter()
        .map(|r| {
            r.iter()
                .zip(&maxima)
                .map(|(&v, &m)| if m > 0.0 { Some(v / m) } else { None })
                .collect()
        })
        .collect()
}

/// Significance level used to grey out cells.
pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

/// Friedman p-values over bucket F1 values.
///
/// `by_dataset[d][j]`: blocks are the models evaluated on dataset `d`,
/// treatments the buckets of attribute `j`. `by_model[m][j]`: blocks are the
/// datasets, treatments the buckets of attribute `j` for model `m`.
/// A cell is `None` when the test cannot be formed (fewer than two blocks or
/// buckets, or bucket counts that differ between blocks).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceTables {
    pub datasets: Vec<String>,
    pub models: Vec<String>,
    pub attributes: Vec<Attribute>,
    pub by_dataset: Vec<Vec<Option<f64>>>,
    pub by_model: Vec<Vec<Option<f64>>>,
}

fn friedman_p(table: &[Vec<f64>]) -> Option<f64> {
    friedman(table).ok().map(|r| r.p_value)
}

pub fn significance_tables(tensors: &[PerformanceTensor]) -> Result<SignificanceTables> {
    let first = tensors.first().ok_or_else(|| Error::invalid("no tensors"))?;
    for t in tensors {
        if t.attributes != first.attributes || t.models != first.models {
            return Err(Error::invalid(format!(
                "tensor {:?} does not share models and attributes with {:?}",
                t.dataset, first.dataset
            )));
        }
    }
    let by_dataset = tensors
        .iter()
        .map(|t| {
            (0..t.attributes.len())
                .map(|j| {
                    let table: Vec<Vec<f64>> = t.values.iter().map(|m| m[j].clone()).collect();
                    friedman_p(&table)
                })
                .collect()
        })
        .collect();
    let by_model = (0..first.models.len())
        .map(|i| {
            (0..first.attributes.len())
                .map(|j| {
                    let table: Vec<Vec<f64>> = tensors.iter().map(|t| t.values[i][j].clone()).collect();
                    friedman_p(&table)
                })
                .collect()
        })
        .collect();
    Ok(SignificanceTables {
        datasets: tensors.iter().map(|t| t.dataset.clone()).collect(),
        models: first.models.clone(),
        attributes: first.attributes.clone(),
        by_dataset,
        by_model,
    })
}

/// Average of one model-wise cell across datasets under both conventions
/// for undefined coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AveragedRho {
    /// Mean over datasets where the coefficient is defined.
    pub skip_undefined: Option<f64>,
    /// Mean over all datasets with undefined cells counted as 0.
    pub undefined_as_zero: f64,
    pub excluded: usize,
}

pub fn average_rho(tables: &[ModelWiseTable], model: usize, attribute: usize) -> AveragedRho {
    let cells: Vec<Option<f64>> = tables.iter().map(|t| t.s_rho[model][attribute]).collect();
    let defined: Vec<f64> = cells.iter().flatten().copied().collect();
    AveragedRho {
        skip_undefined: if defined.is_empty() {
            None
        } else {
            Some(defined.iter().sum::<f64>() / defined.len() as f64)
        },
        undefined_as_zero: defined.iter().sum::<f64>() / cells.len().max(1) as f64,
        excluded: cells.len() - defined.len(),
    }
}
