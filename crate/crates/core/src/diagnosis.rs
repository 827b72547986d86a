//! Self-diagnosis (worst bucket of one model) and aided-diagnosis (where a
//! stronger model loses to a weaker one). Ties go to the lower bucket index.

use serde::{Deserialize, Serialize};

use crate::attributes::Attribute;
use crate::bucketing::PerformanceTensor;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfDiagnosisEntry {
    pub attribute: Attribute,
    pub worst_bucket: usize,
    pub worst_bucket_label: String,
    pub worst_f1: f64,
    pub best_f1: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfDiagnosis {
    pub model: String,
    pub entries: Vec<SelfDiagnosisEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AidedMode {
    /// A scores below B on the returned bucket.
    ALoses,
    /// A never scores below B; the returned bucket is A's best.
    ABest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AidedDiagnosisEntry {
    pub attribute: Attribute,
    pub bucket: usize,
    pub bucket_label: String,
    /// `f1_A - f1_B` on the returned bucket.
    pub delta: f64,
    pub mode: AidedMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AidedDiagnosis {
    pub model_a: String,
    pub model_b: String,
    /// True when the inputs were swapped so that A has the higher corpus F1.
    pub swapped: bool,
    pub entries: Vec<AidedDiagnosisEntry>,
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = i;
        }
    }
    best
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Worst bucket of one attribute slice: `(index, worst_f1, gap)`.
pub fn worst_bucket(slice: &[f64]) -> Result<(usize, f64, f64)> {
    if slice.len() < 2 {
        return Err(Error::invalid(format!(
            "self-diagnosis needs at least 2 buckets, got {}",
            slice.len()
        )));
    }
    let worst = argmin(slice);
    let best = argmax(slice);
    Ok((worst, slice[worst], slice[best] - slice[worst]))
}

/// `(bucket, delta, mode)` for aligned slices of models A and B.
pub fn aided_bucket(slice_a: &[f64], slice_b: &[f64]) -> Result<(usize, f64, AidedMode)> {
    if slice_a.len() != slice_b.len() {
        return Err(Error::invalid(format!(
            "bucket count mismatch: {} vs {}",
            slice_a.len(),
            slice_b.len()
        )));
    }
    if slice_a.is_empty() {
        return Err(Error::invalid("no buckets to compare"));
    }
    let deltas: Vec<f64> = slice_a.iter().zip(slice_b).map(|(a, b)| a - b).collect();
    let losing =
        deltas
            .iter()
            .enumerate()
            .filter(|(_, &d)| d < 0.0)
            .fold(None::<(usize, f64)>, |acc, (i, &d)| match acc {
                Some((_, best)) if best <= d => acc,
                _ => Some((i, d)),
            });
    Ok(match losing {
        Some((i, d)) => (i, d, AidedMode::ALoses),
        None => {
            let i = argmax(slice_a);
            (i, deltas[i], AidedMode::ABest)
        }
    })
}

/// Self-diagnosis of `model` on every attribute of the tensor.
pub fn self_diagnose(tensor: &PerformanceTensor, model: usize) -> Result<SelfDiagnosis> {
    let name = tensor
        .models
        .get(model)
        .ok_or_else(|| Error::invalid(format!("model index {model} out of range")))?;
    let entries = tensor
        .attributes
        .iter()
        .enumerate()
        .map(|(j, &attribute)| {
            let (worst, worst_f1, gap) = worst_bucket(tensor.slice(model, j))?;
            Ok(SelfDiagnosisEntry {
                attribute,
                worst_bucket: worst,
                worst_bucket_label: tensor.bucket_specs[j].labels[worst].clone(),
                worst_f1,
                best_f1: worst_f1 + gap,
                gap,
            })
        })
        .collect::<Result<_>>()?;
    Ok(SelfDiagnosis {
        model: name.clone(),
        entries,
    })
}

/// Aided-diagnosis of model `a` of `tensor_a` against model `b` of
/// `tensor_b`. Both tensors must use identical bucket specs. If `b` has the
/// higher corpus F1 the pair is swapped and the swap recorded.
pub fn aided_diagnose(
    tensor_a: &PerformanceTensor,
    a: usize,
    tensor_b: &PerformanceTensor,
    b: usize,
) -> Result<AidedDiagnosis> {
    if tensor_a.bucket_specs != tensor_b.bucket_specs {
        return Err(Error::invalid(
            "aided-diagnosis needs identical bucket specs for both models",
        ));
    }
    for (t, i) in [(tensor_a, a), (tensor_b, b)] {
        if i >= t.models.len() {
            return Err(Error::invalid(format!("model index {i} out of range")));
        }
    }
    let swapped = tensor_a.corpus[a].f1 < tensor_b.corpus[b].f1;
    let ((ta, ia), (tb, ib)) = if swapped {
        ((tensor_b, b), (tensor_a, a))
    } else {
        ((tensor_a, a), (tensor_b, b))
    };
    let entries = ta
        .attributes
        .iter()
        .enumerate()
        .map(|(j, &attribute)| {
            let (bucket, delta, mode) = aided_bucket(ta.slice(ia, j), tb.slice(ib, j))?;
            Ok(AidedDiagnosisEntry {
                attribute,
                bucket,
                bucket_label: ta.bucket_specs[j].labels[bucket].clone(),
                delta,
                mode,
            })
        })
        .collect::<Result<_>>()?;
    Ok(AidedDiagnosis {
        model_a: ta.models[ia].clone(),
        model_b: tb.models[ib].clone(),
        swapped,
        entries,
    })
}

/// Tab-separated `attribute, bucket label, worst f1, gap` rows.
pub fn self_diagnosis_tsv(diag: &SelfDiagnosis) -> String {
    let mut out = String::from("attribute\tbucket\tworst_f1\tgap\n");
    for e in &diag.entries {
        out.push_str(&format!(
            "{}\t{}\t{:.6}\t{:.6}\n",
            e.attribute, e.worst_bucket_label, e.worst_f1, e.gap
        ));
    }
    out
}

pub fn aided_diagnosis_tsv(diag: &AidedDiagnosis) -> String {
    let mut out = String::from("attribute\tbucket\tdelta\tmode\n");
    for e in &diag.entries {
        let mode = match e.mode {
            AidedMode::ALoses => "a_loses",
            AidedMode::ABest => "a_best",
        };
        out.push_str(&format!(
            "{}\t{}\t{:.6}\t{}\n",
            e.attribute, e.bucket_label, e.delta, mode
        ));
    }
    out
}
