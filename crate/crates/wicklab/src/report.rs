//! Certification records for closure topologies: which definition was
//! tested, which convergence statistics were observed, and a three-valued
//! verdict. Statistical tests cannot prove limits, so "failed the test"
//! (refuted) is kept distinct from "not enough evidence" (inconclusive).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::wickalg::GepElement;

/// Which integral definition a report certifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DefinitionTag {
    /// S-transform characterization with moment control ("D3.2").
    #[serde(rename = "D3.2")]
    SCharacterization,
    /// Riemann-sum limit in probability over mesh refinements ("D3.6").
    #[serde(rename = "D3.6")]
    RiemannClosure,
    /// L^p x L^p closedness of the Skorokhod integral ("D3.7").
    #[serde(rename = "D3.7")]
    SkorokhodClosure,
    /// Pathwise-integrand / probability-integral closedness ("D3.10").
    #[serde(rename = "D3.10")]
    AyedKuoClosure,
}

impl DefinitionTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            DefinitionTag::SCharacterization => "D3.2",
            DefinitionTag::RiemannClosure => "D3.6",
            DefinitionTag::SkorokhodClosure => "D3.7",
            DefinitionTag::AyedKuoClosure => "D3.10",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "D3.2" => Some(DefinitionTag::SCharacterization),
            "D3.6" => Some(DefinitionTag::RiemannClosure),
            "D3.7" => Some(DefinitionTag::SkorokhodClosure),
            "D3.10" => Some(DefinitionTag::AyedKuoClosure),
            _ => None,
        }
    }
}

impl fmt::Display for DefinitionTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Certified,
    Refuted,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Certified => "certified",
            Verdict::Refuted => "refuted",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_str())
    }
}

/// One convergence statistic with its Monte Carlo standard error
/// (`std_error` = 0 and `exact` = true for closed-form values).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatPoint {
    pub index: usize,
    pub value: f64,
    pub std_error: f64,
    pub exact: bool,
}

/// One certification stage: a sequence of statistics tested against one
/// threshold. Advisory stages are recorded but do not gate the verdict.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub statistics: Vec<StatPoint>,
    pub threshold: f64,
    pub verdict: Verdict,
    #[serde(default)]
    pub advisory: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

/// Certification thresholds. Defaults: probability events at ε = 1e-2
/// bounded by η = 1e-2 at 99% confidence, L^p Cauchy tails below 1e-3,
/// pathwise integrand tails below 1e-2, exact-statistic tails below 1e-6.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Thresholds {
    pub eps_prob: f64,
    pub eta_prob: f64,
    pub confidence: f64,
    pub lp_tol: f64,
    pub path_tol: f64,
    pub s_tol: f64,
    pub moment_tol: f64,
    pub tail_window: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            eps_prob: 1e-2,
            eta_prob: 1e-2,
            confidence: 0.99,
            lp_tol: 1e-3,
            path_tol: 1e-2,
            s_tol: 1e-6,
            moment_tol: 1e-6,
            tail_window: 3,
        }
    }
}

impl Thresholds {
    /// Two-sided normal quantile for the configured confidence.
    pub fn z_value(&self) -> f64 {
        normal_quantile(0.5 * (1.0 + self.confidence))
    }
}

/// Estimated limit of a certified sequence: the exact element where the
/// algebra has one (optionally with its sampled mean), or a Monte Carlo
/// summary otherwise.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LimitSummary {
    None,
    Symbolic {
        display: String,
        element: Box<GepElement>,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        sample_mean: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        sample_std_error: Option<f64>,
    },
    MonteCarlo {
        mean: f64,
        std_error: f64,
        n_paths: usize,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub definition: DefinitionTag,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub p: Option<f64>,
    pub stages: Vec<StageRecord>,
    pub verdict: Verdict,
    pub limit: LimitSummary,
    pub seed: u64,
    pub n_paths: usize,
    pub thresholds: Thresholds,
}

impl ConvergenceReport {
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "## Convergence report ({}) — verdict: {}\n\n",
            self.definition, self.verdict
        ));
        if let Some(p) = self.p {
            out.push_str(&format!("p = {p}, "));
        }
        out.push_str(&format!("seed = {}, paths = {}\n\n", self.seed, self.n_paths));
        for stage in &self.stages {
            out.push_str(&format!(
                "### {} — {}{} (threshold {:.3e})\n\n",
                stage.name,
                stage.verdict,
                if stage.advisory { ", advisory" } else { "" },
                stage.threshold
            ));
            if let Some(note) = &stage.note {
                out.push_str(&format!("{note}\n\n"));
            }
            out.push_str("| pair | statistic | std error | exact |\n|---|---|---|---|\n");
            for s in &stage.statistics {
                out.push_str(&format!(
                    "| {} | {:.6e} | {:.2e} | {} |\n",
                    s.index, s.value, s.std_error, s.exact
                ));
            }
            out.push('\n');
        }
        match &self.limit {
            LimitSummary::None => {}
            LimitSummary::Symbolic { display, sample_mean, sample_std_error, .. } => {
                out.push_str(&format!("limit: `{display}`\n"));
                if let (Some(m), Some(se)) = (sample_mean, sample_std_error) {
                    out.push_str(&format!("limit (sampled): mean {m:.6} ± {se:.2e}\n"));
                }
            }
            LimitSummary::MonteCarlo { mean, std_error, n_paths } => {
                out.push_str(&format!(
                    "limit (sampled): mean {mean:.6} ± {std_error:.2e} over {n_paths} paths\n"
                ));
            }
        }
        out
    }
}

/// Verdict for one decreasing-statistic stage.
///
/// Certified: every statistic in the tail window sits below the threshold
/// at the configured confidence. Refuted: the final statistic sits provably
/// above the threshold and the tail is not strictly decreasing. Otherwise
/// inconclusive.
pub fn sequence_verdict(
    stats: &[StatPoint],
    threshold: f64,
    z: f64,
    tail_window: usize,
) -> Verdict {
    if stats.is_empty() {
        return Verdict::Inconclusive;
    }
    let start = stats.len().saturating_sub(tail_window.max(1));
    let tail = &stats[start..];
    if tail.iter().all(|s| s.value + z * s.std_error <= threshold) {
        return Verdict::Certified;
    }
    let last = stats.last().unwrap();
    let strictly_decreasing = tail.windows(2).all(|w| w[1].value < w[0].value);
    if last.value - z * last.std_error > threshold && !strictly_decreasing {
        Verdict::Refuted
    } else {
        Verdict::Inconclusive
    }
}

/// Combines stage verdicts: any refuted stage refutes; all certified
/// certifies; otherwise inconclusive. Advisory stages are skipped.
pub fn combine_verdicts(stages: &[StageRecord]) -> Verdict {
    let gating: Vec<&StageRecord> = stages.iter().filter(|s| !s.advisory).collect();
    if gating.iter().any(|s| s.verdict == Verdict::Refuted) {
        Verdict::Refuted
    } else if !gating.is_empty() && gating.iter().all(|s| s.verdict == Verdict::Certified) {
        Verdict::Certified
    } else {
        Verdict::Inconclusive
    }
}

/// Inverse standard normal CDF (Acklam's rational approximation,
/// relative error below 1.2e-9 — far inside the statistical noise of any
/// Monte Carlo quantity it gates).
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile needs p in (0,1)");
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.38357751867269e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    let plow = 0.02425;
    if p < plow {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - plow {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -normal_quantile(1.0 - p)
    }
}
