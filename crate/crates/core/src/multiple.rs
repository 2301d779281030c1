//! Selection over many simultaneous experiments.
//!
//! All three procedures rank p-values ascending, breaking ties by label, and
//! return the rejected original indices in ascending order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequential::ExperimentState;

#[derive(Debug, Clone, PartialEq)]
pub struct MultipleTestInput {
    p_values: Vec<f64>,
    alpha: f64,
    labels: Vec<String>,
}

impl MultipleTestInput {
    pub fn new(p_values: Vec<f64>, alpha: f64, labels: Vec<String>) -> Result<Self> {
        if p_values.is_empty() {
            return Err(Error::invalid("at least one p-value is required"));
        }
        if labels.len() != p_values.len() {
            return Err(Error::DimensionMismatch(format!("{} labels for {} p-values", labels.len(), p_values.len())));
        }
        if let Some(p) = p_values.iter().find(|p| !(**p >= 0.0 && **p <= 1.0)) {
            return Err(Error::invalid(format!("p-value {p} is outside [0, 1]")));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        Ok(Self { p_values, alpha, labels })
    }

    /// Labels default to zero-padded positions, which sort like the indices.
    pub fn unlabeled(p_values: Vec<f64>, alpha: f64) -> Result<Self> {
        let width = p_values.len().to_string().len();
        let labels = (0..p_values.len()).map(|i| format!("{i:0width$}")).collect();
        Self::new(p_values, alpha, labels)
    }

    pub fn m(&self) -> usize {
        self.p_values.len()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn p_values(&self) -> &[f64] {
        &self.p_values
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Original indices in ascending (p, label) order.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.m()).collect();
        idx.sort_by(|&a, &b| {
            self.p_values[a].total_cmp(&self.p_values[b]).then_with(|| self.labels[a].cmp(&self.labels[b]))
        });
        idx
    }

    fn step_up(&self, threshold: impl Fn(usize) -> f64) -> Vec<usize> {
        let order = self.ranking();
        let cut = (1..=self.m()).rev().find(|&j| self.p_values[order[j - 1]] <= threshold(j));
        let mut out: Vec<usize> = order[..cut.unwrap_or(0)].to_vec();
        out.sort_unstable();
        out
    }
}

/// Harmonic number `Σ_{r=1}^m 1/r`.
pub fn harmonic(m: usize) -> f64 {
    (1..=m).map(|r| 1.0 / r as f64).sum()
}

/// Rejects every hypothesis with `p ≤ α/m`.
pub fn bonferroni(input: &MultipleTestInput) -> Vec<usize> {
    let t = input.alpha / input.m() as f64;
    (0..input.m()).filter(|&i| input.p_values[i] <= t).collect()
}

pub fn benjamini_hochberg(input: &MultipleTestInput) -> Vec<usize> {
    let m = input.m() as f64;
    input.step_up(|j| input.alpha * j as f64 / m)
}

pub fn benjamini_yekutieli(input: &MultipleTestInput) -> Vec<usize> {
    let m = input.m() as f64;
    let h = harmonic(input.m());
    input.step_up(|j| input.alpha * j as f64 / (m * h))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Procedure {
    Bonferroni,
    BenjaminiHochberg,
    BenjaminiYekutieli,
}

impl Procedure {
    pub fn apply(&self, input: &MultipleTestInput) -> Vec<usize> {
        match self {
            Procedure::Bonferroni => bonferroni(input),
            Procedure::BenjaminiHochberg => benjamini_hochberg(input),
            Procedure::BenjaminiYekutieli => benjamini_yekutieli(input),
        }
    }

    pub fn short_name(&self) -> &'static str {
        match self {
            Procedure::Bonferroni => "bc",
            Procedure::BenjaminiHochberg => "bh",
            Procedure::BenjaminiYekutieli => "by",
        }
    }
}

impl std::str::FromStr for Procedure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bc" | "bonferroni" => Ok(Procedure::Bonferroni),
            "bh" | "benjamini-hochberg" => Ok(Procedure::BenjaminiHochberg),
            "by" | "benjamini-yekutieli" => Ok(Procedure::BenjaminiYekutieli),
            other => Err(Error::invalid(format!("unknown procedure '{other}'"))),
        }
    }
}

/// Running p-values of experiments observed on a common schedule.
/// Experiments without a statistic yet count as `p = 1`.
pub fn collect_p_values(experiments: &[ExperimentState]) -> Result<Vec<f64>> {
    let first = experiments.first().ok_or_else(|| Error::invalid("no experiments"))?;
    for e in experiments {
        if e.max_horizon != first.max_horizon || e.batches_ingested() != first.batches_ingested() {
            return Err(Error::invalid(format!(
                "experiment '{}' is at batch {} of horizon {}, '{}' at batch {} of horizon {}",
                e.experiment_id,
                e.batches_ingested(),
                e.max_horizon,
                first.experiment_id,
                first.batches_ingested(),
                first.max_horizon
            )));
        }
    }
    Ok(experiments.iter().map(|e| e.running_min_p.unwrap_or(1.0)).collect())
}

/// 0/1 decisions for each experiment at the current common look.
pub fn run_multiple_post(experiments: &[ExperimentState], alpha: f64, procedure: Procedure) -> Result<Vec<u8>> {
    let p = collect_p_values(experiments)?;
    let labels = experiments.iter().map(|e| e.experiment_id.clone()).collect();
    let input = MultipleTestInput::new(p, alpha, labels)?;
    let mut d = vec![0u8; experiments.len()];
    for i in procedure.apply(&input) {
        d[i] = 1;
    }
    Ok(d)
}
