//! Transport observables of a probability series: variance, return
//! probability and the cumulative Pólya number.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::ProbabilitySeries;
use crate::lattice::Lattice;

/// Returns outside `[0, 1]` by more than this are rejected by [`polya_number`].
pub const PROBABILITY_SLACK: f64 = 1e-12;

/// Probability-weighted mean squared Euclidean distance from the input site,
/// `σ²(τ) = Σ Δl_j² p_j(τ) / Σ p_j(τ)`.
pub fn variance(
    series: &ProbabilitySeries,
    lattice: &Lattice,
    input_site: usize,
) -> Result<Vec<f64>> {
    if series.n_sites() != lattice.len() {
        return Err(Error::Shape(format!(
            "series has {} sites, lattice has {}",
            series.n_sites(),
            lattice.len()
        )));
    }
    let dl2: Vec<f64> = lattice
        .distances_from(input_site)?
        .into_iter()
        .map(|d| d * d)
        .collect();
    series
        .probabilities
        .iter()
        .map(|row| {
            if row.len() != dl2.len() {
                return Err(Error::Shape("ragged probability matrix".into()));
            }
            let norm: f64 = row.iter().sum();
            if norm <= 0.0 {
                return Err(Error::Domain("probability row sums to zero".into()));
            }
            Ok(row.iter().zip(&dl2).map(|(p, d)| p * d).sum::<f64>() / norm)
        })
        .collect()
}

/// Occupation of the input site at every time point.
pub fn return_probability(series: &ProbabilitySeries) -> Vec<f64> {
    series
        .probabilities
        .iter()
        .map(|row| row[series.input_site])
        .collect()
}

/// Cumulative Pólya number `P_n = 1 - Π_{i ≤ n} (1 - r_i)` over the given
/// sequence of measured return probabilities.
pub fn polya_number(return_probs: &[f64]) -> Result<Vec<f64>> {
    let mut survival = 1.0;
    return_probs
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            if !(-PROBABILITY_SLACK..=1.0 + PROBABILITY_SLACK).contains(&r) {
                return Err(Error::Domain(format!(
                    "return probability {r} at step {i} is outside [0, 1]"
                )));
            }
            survival *= 1.0 - r.clamp(0.0, 1.0);
            Ok(1.0 - survival)
        })
        .collect()
}

/// Per-time observables of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableTable {
    pub times: Vec<f64>,
    pub variance: Vec<f64>,
    pub return_prob: Vec<f64>,
    /// Cumulative over measurements at strictly positive times; a τ = 0
    /// sample contributes nothing (its return probability is trivially 1).
    pub polya: Vec<f64>,
}

impl ObservableTable {
    pub fn compute(series: &ProbabilitySeries, lattice: &Lattice) -> Result<Self> {
        let variance = variance(series, lattice, series.input_site)?;
        let return_prob = return_probability(series);
        let measured: Vec<f64> = series
            .times
            .iter()
            .zip(&return_prob)
            .map(|(&t, &r)| if t > 0.0 { r } else { 0.0 })
            .collect();
        let polya = polya_number(&measured)?;
        Ok(ObservableTable {
            times: series.times.clone(),
            variance,
            return_prob,
            polya,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}
