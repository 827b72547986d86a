//! Rank statistics, the chi-square tail and the Friedman test.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// 1-based ranks with ties replaced by the mean of the ranks they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(Ordering::Equal));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i..j (0-based) share ranks i+1..=j
        let rank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            ranks[idx] = rank;
        }
        i = j;
    }
    ranks
}

/// Sizes of the tie groups (groups of size 1 included) of `values`.
fn tie_group_sizes(values: &[f64]) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let mut sizes = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        sizes.push(j - i);
        i = j;
    }
    sizes
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    for (i, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

const GAMMA_MAX_ITER: usize = 1000;

/// Regularized upper incomplete gamma function Q(a, x) for `a > 0`, `x >= 0`.
pub fn gamma_q(a: f64, x: f64) -> Result<f64> {
    if a.is_nan() || x.is_nan() || a <= 0.0 || x < 0.0 {
        return Err(Error::invalid(format!("gamma_q domain error: a={a}, x={x}")));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    let log_prefactor = -x + a * x.ln() - ln_gamma(a);
    if x < a + 1.0 {
        // series for P
        let mut ap = a;
        let mut term = 1.0 / a;
        let mut sum = term;
        for _ in 0..GAMMA_MAX_ITER {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * f64::EPSILON {
                let p = (log_prefactor.exp() * sum).min(1.0);
                return Ok(1.0 - p);
            }
        }
        Err(Error::invalid("gamma series did not converge"))
    } else {
        // modified Lentz continued fraction for Q
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..GAMMA_MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < f64::EPSILON {
                return Ok((log_prefactor.exp() * h).clamp(0.0, 1.0));
            }
        }
        Err(Error::invalid("gamma continued fraction did not converge"))
    }
}

/// Upper tail probability of the chi-square distribution.
pub fn chi2_sf(x: f64, dof: usize) -> Result<f64> {
    if dof == 0 {
        return Err(Error::invalid("chi-square needs at least one degree of freedom"));
    }
    if x.is_nan() || x < 0.0 {
        return Err(Error::invalid(format!("chi-square statistic must be >= 0, got {x}")));
    }
    gamma_q(dof as f64 / 2.0, x / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FriedmanResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub n_blocks: usize,
    pub k_treatments: usize,
}

fn validate_table(table: &[Vec<f64>]) -> Result<(usize, usize)> {
    let n = table.len();
    if n < 2 {
        return Err(Error::invalid(format!(
            "friedman test needs at least 2 blocks, got {n}"
        )));
    }
    let k = table[0].len();
    if k < 2 {
        return Err(Error::invalid(format!(
            "friedman test needs at least 2 treatments, got {k}"
        )));
    }
    for (i, row) in table.iter().enumerate() {
        if row.len() != k {
            return Err(Error::invalid(format!(
                "block {i} has {} cells, expected {k}",
                row.len()
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("block {i} has a missing or non-finite cell")));
        }
    }
    Ok((n, k))
}

/// Tie-corrected Friedman statistic of a table already converted to
/// within-block ranks; `correction` is the tie divisor.
fn friedman_statistic_from_ranks(ranks: &[Vec<f64>], correction: f64) -> f64 {
    let n = ranks.len() as f64;
    let k = ranks[0].len();
    let kf = k as f64;
    let centre = (kf + 1.0) / 2.0;
    let ss: f64 = (0..k)
        .map(|j| {
            let mean = ranks.iter().map(|r| r[j]).sum::<f64>() / n;
            (mean - centre).powi(2)
        })
        .sum();
    if correction <= 0.0 {
        return 0.0;
    }
    (12.0 * n / (kf * (kf + 1.0)) * ss / correction).max(0.0)
}

fn tie_correction(table: &[Vec<f64>]) -> f64 {
    let n = table.len() as f64;
    let k = table[0].len() as f64;
    let ties: f64 = table
        .iter()
        .flat_map(|row| tie_group_sizes(row))
        .map(|t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum();
    1.0 - ties / (n * k * (k * k - 1.0))
}

/// Friedman test over `table[block][treatment]`.
pub fn friedman(table: &[Vec<f64>]) -> Result<FriedmanResult> {
    let (n, k) = validate_table(table)?;
    let ranks: Vec<Vec<f64>> = table.iter().map(|row| average_ranks(row)).collect();
    let statistic = friedman_statistic_from_ranks(&ranks, tie_correction(table));
    let dof = k - 1;
    let p_value = chi2_sf(statistic, dof)?;
    Ok(FriedmanResult {
        statistic,
        dof,
        p_value,
        n_blocks: n,
        k_treatments: k,
    })
}

/// Largest `n_blocks * k_treatments` for which [`friedman_exact_p`] runs.
pub const EXACT_MAX_CELLS: usize = 12;

/// Exact permutation p-value of the Friedman statistic: the share of all
/// within-block rearrangements whose statistic is at least the observed one.
pub fn friedman_exact_p(table: &[Vec<f64>]) -> Result<f64> {
    let (n, k) = validate_table(table)?;
    if n * k > EXACT_MAX_CELLS {
        return Err(Error::invalid(format!(
            "exact permutation test limited to n*k <= {EXACT_MAX_CELLS}, got {}",
            n * k
        )));
    }
    let correction = tie_correction(table);
    let ranks: Vec<Vec<f64>> = table.iter().map(|row| average_ranks(row)).collect();
    let observed = friedman_statistic_from_ranks(&ranks, correction);

    let perms = permutations(k);
    // each block independently takes every arrangement of its own ranks
    let block_choices: Vec<Vec<Vec<f64>>> = ranks
        .iter()
        .map(|r| perms.iter().map(|p| p.iter().map(|&i| r[i]).collect()).collect())
        .collect();

    let tol = 1e-9 * observed.abs().max(1.0);
    let mut at_least = 0u64;
    let mut total = 0u64;
    let mut idx = vec![0usize; n];
    let mut current: Vec<Vec<f64>> = block_choices.iter().map(|c| c[0].clone()).collect();
    loop {
        total += 1;
        if friedman_statistic_from_ranks(&current, correction) >= observed - tol {
            at_least += 1;
        }
        // odometer increment
        let mut b = 0;
        loop {
            if b == n {
                return Ok(at_least as f64 / total as f64);
            }
            idx[b] += 1;
            if idx[b] < perms.len() {
                current[b] = block_choices[b][idx[b]].clone();
                break;
            }
            idx[b] = 0;
            current[b] = block_choices[b][0].clone();
            b += 1;
        }
    }
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(k), &mut vec![false; k], &mut out);
    out
}
