//! Coefficient penalties and their univariate proximal solutions.
//!
//! [`threshold_update`] minimizes `½·v·θ² − z·θ + P_λ(θ)` over a single
//! coordinate, which is the inner step of coordinate descent.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCAD_DEFAULT_GAMMA: f64 = 3.7;
pub const MCP_DEFAULT_GAMMA: f64 = 3.0;
/// Added to pilot magnitudes before inverting them into adaptive weights.
pub const ADAPTIVE_WEIGHT_EPS: f64 = 1e-6;

static FALLBACK_COUNT: AtomicU64 = AtomicU64::new(0);

/// Number of coordinate updates that fell outside the closed-form regime
/// since process start.
pub fn fallback_count() -> u64 {
    FALLBACK_COUNT.load(Ordering::Relaxed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyKind {
    AdaLasso,
    Scad,
    Mcp,
    /// Unpenalized maximum likelihood.
    None,
}

impl PenaltyKind {
    pub fn name(&self) -> &'static str {
        match self {
            PenaltyKind::AdaLasso => "adalasso",
            PenaltyKind::Scad => "scad",
            PenaltyKind::Mcp => "mcp",
            PenaltyKind::None => "mle",
        }
    }
}

impl std::str::FromStr for PenaltyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "adalasso" | "adaptive-lasso" | "alasso" => Ok(PenaltyKind::AdaLasso),
            "scad" => Ok(PenaltyKind::Scad),
            "mcp" => Ok(PenaltyKind::Mcp),
            "none" | "mle" | "sst" => Ok(PenaltyKind::None),
            other => Err(Error::invalid(format!("unknown penalty '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPenalty")]
pub struct PenaltyConfig {
    kind: PenaltyKind,
    gamma: f64,
    weights: Option<Vec<f64>>,
    penalize_intercept: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPenalty {
    kind: PenaltyKind,
    gamma: f64,
    weights: Option<Vec<f64>>,
    penalize_intercept: bool,
}

impl TryFrom<RawPenalty> for PenaltyConfig {
    type Error = Error;

    fn try_from(raw: RawPenalty) -> Result<Self> {
        let cfg = PenaltyConfig::new(raw.kind, raw.gamma)?.with_intercept_penalized(raw.penalize_intercept);
        match raw.weights {
            Some(w) => cfg.with_weights(w),
            None => Ok(cfg),
        }
    }
}

impl PenaltyConfig {
    /// `gamma` is ignored for AdaLasso and None.
    pub fn new(kind: PenaltyKind, gamma: f64) -> Result<Self> {
        match kind {
            PenaltyKind::Scad if !(gamma > 2.0 && gamma.is_finite()) => {
                return Err(Error::invalid(format!("SCAD requires gamma > 2, got {gamma}")))
            }
            PenaltyKind::Mcp if !(gamma > 1.0 && gamma.is_finite()) => {
                return Err(Error::invalid(format!("MCP requires gamma > 1, got {gamma}")))
            }
            _ => {}
        }
        Ok(Self { kind, gamma, weights: None, penalize_intercept: true })
    }

    /// Uses the conventional concavity default for SCAD and MCP.
    pub fn of_kind(kind: PenaltyKind) -> Self {
        let gamma = match kind {
            PenaltyKind::Scad => SCAD_DEFAULT_GAMMA,
            PenaltyKind::Mcp => MCP_DEFAULT_GAMMA,
            _ => 0.0,
        };
        Self { kind, gamma, weights: None, penalize_intercept: true }
    }

    pub fn adalasso() -> Self {
        Self::of_kind(PenaltyKind::AdaLasso)
    }

    pub fn scad() -> Self {
        Self::of_kind(PenaltyKind::Scad)
    }

    pub fn mcp() -> Self {
        Self::of_kind(PenaltyKind::Mcp)
    }

    pub fn none() -> Self {
        Self::of_kind(PenaltyKind::None)
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if let Some(bad) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::invalid(format!("penalty weights must be finite and nonnegative, got {bad}")));
        }
        self.weights = Some(weights);
        Ok(self)
    }

    pub fn without_weights(mut self) -> Self {
        self.weights = None;
        self
    }

    pub fn with_intercept_penalized(mut self, penalize: bool) -> Self {
        self.penalize_intercept = penalize;
        self
    }

    pub fn kind(&self) -> PenaltyKind {
        self.kind
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn penalize_intercept(&self) -> bool {
        self.penalize_intercept
    }

    /// Whether coordinate `j` carries any penalty at all.
    pub fn is_penalized(&self, j: usize) -> bool {
        self.kind != PenaltyKind::None && (j != 0 || self.penalize_intercept)
    }

    /// Per-coordinate multiplier of λ; 1 unless adaptive weights are set.
    pub fn weight(&self, j: usize) -> f64 {
        match (&self.weights, self.kind) {
            (Some(w), PenaltyKind::AdaLasso) => w.get(j).copied().unwrap_or(1.0),
            _ => 1.0,
        }
    }
}

/// Adaptive-lasso weights `1/(|θ̃ⱼ| + ε)` from a pilot estimate.
pub fn adaptive_weights(pilot: &[f64]) -> Vec<f64> {
    pilot.iter().map(|t| 1.0 / (t.abs() + ADAPTIVE_WEIGHT_EPS)).collect()
}

pub fn penalty_value(theta: f64, lambda: f64, cfg: &PenaltyConfig, j: usize) -> f64 {
    if !cfg.is_penalized(j) || lambda == 0.0 {
        return 0.0;
    }
    let t = theta.abs();
    let g = cfg.gamma;
    match cfg.kind {
        PenaltyKind::AdaLasso => lambda * cfg.weight(j) * t,
        PenaltyKind::Scad => {
            if t <= lambda {
                lambda * t
            } else if t < g * lambda {
                (2.0 * g * lambda * t - t * t - lambda * lambda) / (2.0 * (g - 1.0))
            } else {
                lambda * lambda * (g + 1.0) / 2.0
            }
        }
        PenaltyKind::Mcp => {
            if t <= g * lambda {
                lambda * t - t * t / (2.0 * g)
            } else {
                g * lambda * lambda / 2.0
            }
        }
        PenaltyKind::None => 0.0,
    }
}

/// Derivative of the penalty in `|θ|` for `|θ| > 0`; at zero this is the
/// half-width of the subdifferential.
pub fn penalty_slope(theta_abs: f64, lambda: f64, cfg: &PenaltyConfig, j: usize) -> f64 {
    if !cfg.is_penalized(j) {
        return 0.0;
    }
    let g = cfg.gamma;
    match cfg.kind {
        PenaltyKind::AdaLasso => lambda * cfg.weight(j),
        PenaltyKind::Scad => {
            if theta_abs <= lambda {
                lambda
            } else {
                ((g * lambda - theta_abs) / (g - 1.0)).max(0.0)
            }
        }
        PenaltyKind::Mcp => (lambda - theta_abs / g).max(0.0),
        PenaltyKind::None => 0.0,
    }
}

#[inline]
fn soft(t: f64, cut: f64) -> f64 {
    (t - cut).max(0.0)
}

/// Minimizer of `½·v·θ² − z·θ + P_λ(θ)` over θ.
pub fn threshold_update(z: f64, v: f64, lambda: f64, cfg: &PenaltyConfig, j: usize) -> f64 {
    if lambda == 0.0 || !cfg.is_penalized(j) {
        return z / v;
    }
    let t = z.abs();
    let g = cfg.gamma;
    let magnitude = match cfg.kind {
        PenaltyKind::AdaLasso => soft(t, lambda * cfg.weight(j)) / v,
        PenaltyKind::Mcp if v * g > 1.0 => {
            if t <= v * g * lambda {
                soft(t, lambda) / (v - 1.0 / g)
            } else {
                t / v
            }
        }
        PenaltyKind::Scad if v * (g - 1.0) > 1.0 => {
            if t <= lambda * (1.0 + v) {
                soft(t, lambda) / v
            } else if t <= v * g * lambda {
                (t - g * lambda / (g - 1.0)) / (v - 1.0 / (g - 1.0))
            } else {
                t / v
            }
        }
        PenaltyKind::Mcp | PenaltyKind::Scad => {
            FALLBACK_COUNT.fetch_add(1, Ordering::Relaxed);
            enumerate_magnitude(t, v, lambda, cfg, j)
        }
        PenaltyKind::None => t / v,
    };
    if z < 0.0 {
        -magnitude
    } else {
        magnitude
    }
}

/// Global minimizer over θ ≥ 0 found by comparing every stationary point and
/// breakpoint of the piecewise-quadratic objective. Valid for any curvature.
pub fn enumerate_magnitude(t: f64, v: f64, lambda: f64, cfg: &PenaltyConfig, j: usize) -> f64 {
    let g = cfg.gamma;
    let mut candidates = [0.0; 10];
    let mut len = 1;
    let mut piece = |lo: f64, hi: f64, a: f64, b: f64| {
        // minimize ½aθ² − bθ on [lo, hi]
        candidates[len] = lo;
        len += 1;
        if hi.is_finite() {
            candidates[len] = hi;
            len += 1;
        }
        if a > 0.0 {
            candidates[len] = (b / a).clamp(lo, hi);
            len += 1;
        }
    };
    match cfg.kind {
        PenaltyKind::Mcp => {
            piece(0.0, g * lambda, v - 1.0 / g, t - lambda);
            piece(g * lambda, f64::INFINITY, v, t);
        }
        PenaltyKind::Scad => {
            piece(0.0, lambda, v, t - lambda);
            piece(lambda, g * lambda, v - 1.0 / (g - 1.0), t - g * lambda / (g - 1.0));
            piece(g * lambda, f64::INFINITY, v, t);
        }
        PenaltyKind::AdaLasso => piece(0.0, f64::INFINITY, v, t - lambda * cfg.weight(j)),
        PenaltyKind::None => piece(0.0, f64::INFINITY, v, t),
    }
    let objective = |th: f64| 0.5 * v * th * th - t * th + penalty_value(th, lambda, cfg, j);
    let mut best = 0.0;
    let mut best_val = objective(0.0);
    for &c in &candidates[..len] {
        let val = objective(c);
        if val < best_val || (val == best_val && c < best) {
            best = c;
            best_val = val;
        }
    }
    best
}
