//! Curated, named reproduction scenarios wiring the symbolic algebra, the
//! integral operators and the Monte Carlo engine together. Every scenario
//! is deterministic given its seed and emits one pass/fail line per
//! expected output, each tagged with the provenance of the expectation.

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Result, WickError};
use crate::integrate::{
    certify_strong_convergence, closure_ayedkuo, closure_skorokhod, malliavin_pairing,
    skorokhod_elementary,
};
use crate::mcsim::{
    divergence_diagnostic, estimate_lp, eval_gep, mean, sample_paths, BridgeSampler,
    PathFunctional, PathView, RefinementPlan,
};
use crate::process::ElementaryProcess;
use crate::report::{ConvergenceReport, StatPoint, Thresholds, Verdict};
use crate::rng::{substream, TAG_SCENARIO, TAG_TEST_FUNCTIONS};
use crate::stepfn::{Grid, Partition, StepFunction};
use crate::synth::Synth;
use crate::wickalg::GepElement;

/// Where an expected value comes from: a closed-form formula, an elementary
/// fact, or an independent oracle computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    ClosedForm,
    Elementary,
    Oracle,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::ClosedForm => "closed-form",
            Provenance::Elementary => "elementary",
            Provenance::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioItem {
    pub name: String,
    pub provenance: Provenance,
    pub expected: String,
    pub observed: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub estimate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub std_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub expected_value: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub id: String,
    pub seed: u64,
    pub params: serde_json::Value,
    pub items: Vec<ScenarioItem>,
    pub convergence: Vec<ConvergenceReport>,
    pub pass: bool,
}

impl ScenarioReport {
    fn new(id: &str, seed: u64, params: serde_json::Value) -> Self {
        ScenarioReport {
            id: id.into(),
            seed,
            params,
            items: Vec::new(),
            convergence: Vec::new(),
            pass: true,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        name: impl Into<String>,
        provenance: Provenance,
        expected: impl Into<String>,
        observed: impl Into<String>,
        estimate: Option<f64>,
        std_error: Option<f64>,
        expected_value: Option<f64>,
        pass: bool,
    ) {
        self.items.push(ScenarioItem {
            name: name.into(),
            provenance,
            expected: expected.into(),
            observed: observed.into(),
            estimate,
            std_error,
            expected_value,
            pass,
        });
        self.pass &= pass;
    }

    pub fn to_markdown(&self) -> String {
        let mut out = format!(
            "# Scenario `{}` — {}\n\nseed {} · params `{}`\n\n",
            self.id,
            if self.pass { "PASS" } else { "FAIL" },
            self.seed,
            self.params
        );
        out.push_str("| quantity | provenance | expected | observed | pass |\n|---|---|---|---|---|\n");
        for it in &self.items {
            out.push_str(&format!(
                "| {} | {} | {} | {} | {} |\n",
                it.name,
                it.provenance.as_str(),
                it.expected,
                it.observed,
                if it.pass { "yes" } else { "NO" }
            ));
        }
        for rep in &self.convergence {
            out.push('\n');
            out.push_str(&rep.to_markdown());
        }
        out
    }

    /// Fixed columns: scenario, quantity, estimate, stderr, expected,
    /// provenance, pass.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("scenario,quantity,estimate,stderr,expected,provenance,pass\n");
        for it in &self.items {
            out.push_str(&format!(
                "{},\"{}\",{},{},{},{},{}\n",
                self.id,
                it.name,
                it.estimate.map_or(String::new(), |v| format!("{v:.10e}")),
                it.std_error.map_or(String::new(), |v| format!("{v:.4e}")),
                it.expected_value.map_or(String::new(), |v| format!("{v:.10e}")),
                it.provenance.as_str(),
                it.pass
            ));
        }
        out
    }
}

// ---------------------------------------------------------------------------
// remark-2-6: lognormal-square moments and the L^p membership boundary
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct Remark26Config {
    pub p: f64,
    pub t_values: Vec<f64>,
    pub n_paths: usize,
    pub seed: u64,
    pub refinement_levels: usize,
    pub refinement_paths: usize,
    pub refinement_eps: f64,
    pub refinement_eta: f64,
}

impl Default for Remark26Config {
    fn default() -> Self {
        Remark26Config {
            p: 1.0,
            // below the boundary 1/(2p): t = 0.2 has a finite-variance
            // estimator, t = 1/3 is the sqrt(3) case (infinite variance but
            // small truncated-tail bias); 0.51 sits just beyond
            t_values: vec![0.0, 0.2, 1.0 / 3.0, 0.51],
            n_paths: 1_000_000,
            seed: 42,
            refinement_levels: 9,
            refinement_paths: 20_000,
            refinement_eps: 0.5,
            refinement_eta: 0.05,
        }
    }
}

/// Moments of `exp(p B_t^2)`: below the boundary `t = 1/(2p)` the Monte
/// Carlo estimate must match `1/sqrt(1 - 2pt)` within three standard
/// errors; above it the estimate must grow without stabilizing across
/// path-count doublings. Also runs the mesh-refinement study of the
/// integrand `exp(B_t^2) · exp((B_1 - B_t)^2)` on [0, 1], which exists as
/// a limit in probability while its squared time-integral blows up.
pub fn scenario_remark_2_6(cfg: &Remark26Config) -> Result<ScenarioReport> {
    if cfg.p <= 0.0 {
        return Err(WickError::ExponentOutOfRange { p: cfg.p, requires: "p > 0" });
    }
    let mut report = ScenarioReport::new(
        "remark-2-6",
        cfg.seed,
        json!({
            "p": cfg.p,
            "t_values": cfg.t_values,
            "n_paths": cfg.n_paths,
            "refinement_levels": cfg.refinement_levels,
            "refinement_paths": cfg.refinement_paths,
        }),
    );
    let boundary = 1.0 / (2.0 * cfg.p);

    for (k, &t) in cfg.t_values.iter().enumerate() {
        if t == 0.0 {
            report.push(
                format!("E[exp({} B_t^2)] at t = 0", cfg.p),
                Provenance::Elementary,
                "1",
                "1 (deterministic)",
                Some(1.0),
                Some(0.0),
                Some(1.0),
                true,
            );
            continue;
        }
        let grid = Grid::new(vec![0.0, t])?;
        let paths = sample_paths(&grid, cfg.n_paths, substream(cfg.seed, TAG_SCENARIO + k as u64))?;
        let draws: Vec<f64> = (0..cfg.n_paths)
            .map(|i| (cfg.p * t * paths.z(i, 0).powi(2)).exp())
            .collect();
        if t < boundary {
            let est = estimate_lp(&draws, 1.0)?;
            let expected = 1.0 / (1.0 - 2.0 * cfg.p * t).sqrt();
            let pass = (est.estimate - expected).abs() <= 3.0 * est.std_error;
            report.push(
                format!("E[exp({} B_t^2)] at t = {t}", cfg.p),
                Provenance::ClosedForm,
                format!("{expected:.6} (within 3 SE)"),
                format!("{:.6} ± {:.2e}", est.estimate, est.std_error),
                Some(est.estimate),
                Some(est.std_error),
                Some(expected),
                pass,
            );
        } else {
            let diag = divergence_diagnostic(&draws, 10)?;
            report.push(
                format!("E[exp({} B_t^2)] at t = {t} (beyond 1/(2p) = {boundary})", cfg.p),
                Provenance::ClosedForm,
                "estimate grows without stabilizing (divergence flag)",
                format!(
                    "growth x{:.3} over doublings, max draw share {:.3} -> diverged = {}",
                    diag.growth_ratio, diag.max_share, diag.diverged
                ),
                Some(diag.growth_ratio),
                None,
                None,
                diag.diverged,
            );
        }
    }

    // Riemann-sum study of exp(B_t^2) * exp((B_1 - B_t)^2) over [0, 1]
    let base = Partition::uniform(0.0, 1.0, 8)?;
    let plan = RefinementPlan::new(base, cfg.refinement_levels)?;
    let f = PathFunctional::exp_sq_brownian();
    let phi = PathFunctional::exp_sq_terminal_increment(1.0);
    let th = Thresholds { eta_prob: cfg.refinement_eta, ..Thresholds::default() };
    let refine = crate::mcsim::refinement_study(
        &f,
        &phi,
        &plan,
        cfg.refinement_paths,
        substream(cfg.seed, TAG_SCENARIO + 100),
        cfg.refinement_eps,
        &th,
    )?;
    report.push(
        "Riemann sums of exp(2B_t^2 - 2 B_t B_1 + B_1^2) Cauchy in probability",
        Provenance::ClosedForm,
        "certified",
        refine.verdict.to_string(),
        None,
        None,
        None,
        refine.verdict == Verdict::Certified,
    );

    // the same integrand fails square-integrability over time x paths
    let finest = cfg.refinement_levels - 1;
    let sampler = BridgeSampler::new(plan.root_grid()?, substream(cfg.seed, TAG_SCENARIO + 100));
    let fine_grid = sampler.grid_at(finest);
    let n_blowup = cfg.refinement_paths.min(20_000);
    let sq_integrals: Vec<f64> = (0..n_blowup)
        .map(|path| {
            let bm = sampler.path_values(path as u64, finest);
            let view = PathView::from_bm(&fine_grid, bm);
            let m = fine_grid.n_cells();
            let mut acc = 0.0;
            for i in 0..m {
                let u = f.eval(&view, i) * phi.eval(&view, i + 1);
                acc += u * u * fine_grid.dt(i);
            }
            acc
        })
        .collect();
    let diag = divergence_diagnostic(&sq_integrals, 8)?;
    report.push(
        "∫ u_t^2 dt of the same integrand blows up (not square integrable)",
        Provenance::ClosedForm,
        "divergence flag",
        format!(
            "growth x{:.3}, max share {:.3} -> diverged = {}",
            diag.growth_ratio, diag.max_share, diag.diverged
        ),
        Some(diag.growth_ratio),
        None,
        None,
        diag.diverged,
    );
    report.convergence.push(refine);
    Ok(report)
}

// ---------------------------------------------------------------------------
// remark-3-8-iii: δ(v^n) for truncations of exp(B^2) on the single cell
// grid {0, 1/3}
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct Remark38iiiConfig {
    pub n_max: u32,
    pub closure_terms: u32,
    pub n_paths: usize,
    pub seed: u64,
}

impl Default for Remark38iiiConfig {
    fn default() -> Self {
        Remark38iiiConfig { n_max: 8, closure_terms: 28, n_paths: 200_000, seed: 42 }
    }
}

const THIRD: f64 = 1.0 / 3.0;

fn b_factor_sum(b: &GepElement, n: u32) -> Result<GepElement> {
    // Σ_{k<=n} B^{2k} / k!
    let mut acc = GepElement::zero(b.grid().clone());
    let mut fact = 1.0;
    for k in 0..=n {
        if k > 0 {
            fact *= k as f64;
        }
        acc = acc.add(&b.pow_capped(2 * k, 64)?.scale(1.0 / fact))?;
    }
    Ok(acc)
}

fn odd_sum(b: &GepElement, n: u32) -> Result<GepElement> {
    // (1/3) Σ_{k<=n} B^{2k+1} / k!
    let mut acc = GepElement::zero(b.grid().clone());
    let mut fact = 1.0;
    for k in 0..=n {
        if k > 0 {
            fact *= k as f64;
        }
        acc = acc.add(&b.pow_capped(2 * k + 1, 64)?.scale(1.0 / fact))?;
    }
    Ok(acc.scale(THIRD))
}

/// Exact closed form of δ(v^n): the telescoping of
/// `δ(B^{2k} ⊗ 1) = B^{2k+1} - (2k/3) B^{2k-1}` leaves a boundary term,
/// `δ(v^n) = (1/3) Σ_{k<=n-1} B^{2k+1}/k! + B^{2n+1}/n!`.
/// The widely quoted all-(1/3) truncation differs by `(2/3) B^{2n+1}/n!`,
/// which vanishes as n grows, so both have the same limit
/// `(1/3) B exp(B^2)`.
fn delta_closed_form(b: &GepElement, n: u32) -> Result<GepElement> {
    let mut acc = GepElement::zero(b.grid().clone());
    let mut fact = 1.0;
    for k in 0..n {
        if k > 0 {
            fact *= k as f64;
        }
        acc = acc.add(&b.pow_capped(2 * k + 1, 64)?.scale(THIRD / fact))?;
    }
    if n > 0 {
        fact *= n as f64;
    }
    acc.add(&b.pow_capped(2 * n + 1, 64)?.scale(1.0 / fact))
}

/// Geometric-series bound `sqrt(2/π) 3^{-3/2} Σ_{k<=n} (2/3)^k`; n = None
/// is the full series.
pub fn remark_3_8_iii_bound(n: Option<u32>) -> f64 {
    let geo = match n {
        Some(n) => 3.0 * (1.0 - (2.0f64 / 3.0).powi(n as i32 + 1)),
        None => 3.0,
    };
    (2.0 / std::f64::consts::PI).sqrt() * 3.0f64.powf(-1.5) * geo
}

/// Skorokhod integrals of `v^n = Σ_{k<=n} B_{1/3}^{2k}/k! ⊗ 1_{(0,1/3]}`:
/// symbolic equality with `(1/3) Σ_{k<=n} B^{2k+1}/k!`, the first-moment
/// bound, pathwise convergence to `(1/3) B exp(B^2)`, and the closure
/// verdicts at p = 1 and p = 2.
pub fn scenario_remark_3_8_iii(cfg: &Remark38iiiConfig) -> Result<ScenarioReport> {
    let mut report = ScenarioReport::new(
        "remark-3-8-iii",
        cfg.seed,
        json!({
            "n_max": cfg.n_max,
            "closure_terms": cfg.closure_terms,
            "n_paths": cfg.n_paths,
        }),
    );
    let grid = Grid::new(vec![0.0, THIRD])?;
    let one_cell = StepFunction::indicator(0.0, THIRD, 1.0)?;
    let b = GepElement::wiener(&one_cell, &grid)?;

    // (a) coefficient-exact symbolic identity for n <= n_max, with the
    // boundary term made explicit: δ(v^n) differs from the all-(1/3)
    // truncation by exactly (2/3) B^{2n+1}/n!
    let mut worst = 0.0f64;
    let mut worst_boundary = 0.0f64;
    for n in 0..=cfg.n_max {
        let u = ElementaryProcess::single(b_factor_sum(&b, n)?, one_cell.clone())?;
        let d = skorokhod_elementary(&u)?;
        worst = worst.max(d.max_coeff_distance(&delta_closed_form(&b, n)?)?);
        let mut fact = 1.0;
        for k in 1..=n {
            fact *= k as f64;
        }
        let boundary = b.pow_capped(2 * n + 1, 64)?.scale(2.0 / (3.0 * fact));
        let with_boundary = odd_sum(&b, n)?.add(&boundary)?;
        worst_boundary = worst_boundary.max(d.max_coeff_distance(&with_boundary)?);
    }
    report.push(
        format!("δ(v^n) = (1/3) Σ_(k<n) B^(2k+1)/k! + B^(2n+1)/n! for n ≤ {}", cfg.n_max),
        Provenance::Oracle,
        "coefficient distance ≤ 1e-9",
        format!("max distance {worst:.2e}"),
        Some(worst),
        None,
        Some(0.0),
        worst <= 1e-9,
    );
    report.push(
        "gap to the all-(1/3) truncation is exactly the vanishing boundary term (2/3) B^(2n+1)/n!",
        Provenance::Oracle,
        "coefficient distance ≤ 1e-9",
        format!("max distance {worst_boundary:.2e}"),
        Some(worst_boundary),
        None,
        Some(0.0),
        worst_boundary <= 1e-9,
    );

    // spot cases: n = 0 gives B itself; n = 1 gives B^3 - (2/3) B
    let d0 = skorokhod_elementary(&ElementaryProcess::single(
        GepElement::one(grid.clone()),
        one_cell.clone(),
    )?)?;
    report.push(
        "δ(1 ⊗ 1_(0,1/3]) = B_(1/3)",
        Provenance::Elementary,
        "exact",
        format!("distance {:.2e}", d0.max_coeff_distance(&b)?),
        None,
        None,
        None,
        d0.approx_eq(&b, 1e-12),
    );
    let d1 = skorokhod_elementary(&ElementaryProcess::single(
        b.pow_capped(2, 64)?,
        one_cell.clone(),
    )?)?;
    let want1 = b.pow_capped(3, 64)?.sub(&b.scale(2.0 * THIRD))?;
    report.push(
        "δ(B^2 ⊗ 1) = B^3 - (2/3) B",
        Provenance::ClosedForm,
        "exact",
        format!("distance {:.2e}", d1.max_coeff_distance(&want1)?),
        None,
        None,
        None,
        d1.approx_eq(&want1, 1e-12),
    );

    // Monte Carlo work on one shared ensemble
    let paths = sample_paths(&grid, cfg.n_paths, substream(cfg.seed, TAG_SCENARIO))?;

    // (b) first moments: the all-(1/3) truncation meets its geometric bound
    // (with equality, since all its terms share the sign of B), while the
    // true δ(v^n) has E|δ(v^n)| = sqrt(2/π)/sqrt(3) for every n
    let truncated = odd_sum(&b, cfg.n_max)?;
    let samples = eval_gep(&truncated, &paths)?;
    let est = estimate_lp(&samples, 1.0)?;
    let bound = remark_3_8_iii_bound(Some(cfg.n_max));
    report.push(
        format!("E|(1/3) Σ_(k≤{}) B^(2k+1)/k!| ≤ sqrt(2/π) 3^(-3/2) Σ (2/3)^k", cfg.n_max),
        Provenance::ClosedForm,
        format!("≤ {bound:.6} + 3 SE"),
        format!("{:.6} ± {:.2e}", est.estimate, est.std_error),
        Some(est.estimate),
        Some(est.std_error),
        Some(bound),
        est.estimate <= bound + 3.0 * est.std_error,
    );
    let d_true = delta_closed_form(&b, cfg.n_max)?;
    let samples_true = eval_gep(&d_true, &paths)?;
    let est_true = estimate_lp(&samples_true, 1.0)?;
    let expected_true = remark_3_8_iii_bound(None);
    report.push(
        format!("E|δ(v^{})| = sqrt(2/π)/sqrt(3) (boundary term restores the full mass)", cfg.n_max),
        Provenance::Oracle,
        format!("{expected_true:.6} within 3 SE"),
        format!("{:.6} ± {:.2e}", est_true.estimate, est_true.std_error),
        Some(est_true.estimate),
        Some(est_true.std_error),
        Some(expected_true),
        (est_true.estimate - expected_true).abs() <= 3.0 * est_true.std_error,
    );

    // limit bound: E|(1/3) B exp(B^2)| ≤ sqrt(2/π)/sqrt(3)
    let limit_samples: Vec<f64> = (0..cfg.n_paths)
        .map(|i| {
            let bt = THIRD.sqrt() * paths.z(i, 0);
            (THIRD * bt * (bt * bt).exp()).abs()
        })
        .collect();
    let est_limit = estimate_lp(&limit_samples, 1.0)?;
    let bound_inf = remark_3_8_iii_bound(None);
    report.push(
        "E|(1/3) B exp(B^2)| ≤ sqrt(2/π)/sqrt(3)",
        Provenance::ClosedForm,
        format!("≤ {bound_inf:.6} + 3 SE"),
        format!("{:.6} ± {:.2e}", est_limit.estimate, est_limit.std_error),
        Some(est_limit.estimate),
        Some(est_limit.std_error),
        Some(bound_inf),
        est_limit.estimate <= bound_inf + 3.0 * est_limit.std_error,
    );

    // (c) pathwise convergence of δ(v^n) toward (1/3) B exp(B^2)
    let mut path_errs = Vec::new();
    for n in [cfg.n_max / 2, cfg.n_max, cfg.n_max * 2] {
        let d = delta_closed_form(&b, n)?;
        let vals = eval_gep(&d, &paths)?;
        let errs: Vec<f64> = vals
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let bt = THIRD.sqrt() * paths.z(i, 0);
                (v - THIRD * bt * (bt * bt).exp()).abs()
            })
            .collect();
        path_errs.push((n, mean(&errs)));
    }
    let decreasing = path_errs.windows(2).all(|w| w[1].1 < w[0].1);
    report.push(
        "pathwise δ(v^n) -> (1/3) B exp(B^2)",
        Provenance::ClosedForm,
        "mean |error| decreasing in n",
        path_errs
            .iter()
            .map(|(n, e)| format!("n={n}: {e:.3e}"))
            .collect::<Vec<_>>()
            .join(", "),
        Some(path_errs.last().unwrap().1),
        None,
        None,
        decreasing,
    );

    // (d) closure verdicts
    let seq: Vec<ElementaryProcess> = (0..=cfg.closure_terms)
        .map(|n| ElementaryProcess::single(b_factor_sum(&b, n)?, one_cell.clone()))
        .collect::<Result<_>>()?;
    let th = Thresholds::default();
    let r_skor_p1 = closure_skorokhod(&seq, 1.0, &paths, &th)?;
    let r_ak_p1 = closure_ayedkuo(&seq, 1.0, &paths, &th)?;
    let r_skor_p2 = closure_skorokhod(&seq, 2.0, &paths, &th)?;
    let r_ak_p2 = closure_ayedkuo(&seq, 2.0, &paths, &th)?;
    report.push(
        "L^p closure (D3.7) at p = 1",
        Provenance::ClosedForm,
        "certified",
        r_skor_p1.verdict.to_string(),
        None,
        None,
        None,
        r_skor_p1.verdict == Verdict::Certified,
    );
    report.push(
        "a.s./probability closure (D3.10) at p = 1",
        Provenance::ClosedForm,
        "certified",
        r_ak_p1.verdict.to_string(),
        None,
        None,
        None,
        r_ak_p1.verdict == Verdict::Certified,
    );
    report.push(
        "L^p closure (D3.7) at p = 2",
        Provenance::ClosedForm,
        "refuted (integrand escapes L^2)",
        r_skor_p2.verdict.to_string(),
        None,
        None,
        None,
        r_skor_p2.verdict == Verdict::Refuted,
    );
    let ak2_advisory_flags = r_ak_p2
        .stages
        .iter()
        .any(|s| s.advisory && s.verdict == Verdict::Refuted);
    report.push(
        "a.s./probability closure (D3.10) at p = 2",
        Provenance::ClosedForm,
        "certified, with the integrand L^2-norm trend flagged",
        format!(
            "{} (ambient-norm flag: {})",
            r_ak_p2.verdict, ak2_advisory_flags
        ),
        None,
        None,
        None,
        r_ak_p2.verdict == Verdict::Certified && ak2_advisory_flags,
    );
    report.convergence.extend([r_skor_p1, r_ak_p1, r_skor_p2, r_ak_p2]);
    Ok(report)
}

// ---------------------------------------------------------------------------
// theorem-2-3: Riemann sums of a Wick-exponential integrand converge to its
// Skorokhod integral across coupled dyadic refinements
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct Theorem23Config {
    pub g: StepFunction,
    pub h: StepFunction,
    pub base_cells: usize,
    pub levels: usize,
    pub n_paths: usize,
    pub seed: u64,
}

impl Default for Theorem23Config {
    fn default() -> Self {
        let one = StepFunction::indicator(0.0, 1.0, 1.0).unwrap();
        Theorem23Config {
            g: one.clone(),
            h: one,
            base_cells: 16,
            levels: 7,
            n_paths: 100_000,
            seed: 42,
        }
    }
}

/// Builds the Riemann sum of `exp◇(I(g·1[0,t))) h(t) · exp◇(I(g·1(t,∞)))`
/// as an exact algebra element on `grid` for the given partition indices.
///
/// Each summand is one exponential term whose drift is `g` masked to zero
/// on the partition cell, times the increment over that cell (the masked
/// halves have disjoint support, so their product picks up no scalar).
/// Terms are assembled directly to keep the construction O(n·m).
fn symbolic_riemann_sum(
    g: &StepFunction,
    h: &StepFunction,
    grid: &Grid,
    idxs: &[usize],
) -> Result<GepElement> {
    use crate::wickalg::poly::{MultiIndex, SparsePoly};
    let g_hat: Vec<f64> = grid
        .cell_values(g)?
        .iter()
        .enumerate()
        .map(|(i, &v)| v * grid.dt(i).sqrt())
        .collect();
    let mut parts = Vec::with_capacity(idxs.len().saturating_sub(1));
    for w in idxs.windows(2) {
        let (kl, kr) = (w[0], w[1]);
        let hv = h.value_at(grid.times()[kl]);
        if hv == 0.0 {
            continue;
        }
        let mut drift = g_hat.clone();
        for d in drift.iter_mut().take(kr).skip(kl) {
            *d = 0.0;
        }
        let mut poly = SparsePoly::zero();
        for cell in kl..kr {
            poly.add_monomial(MultiIndex::single(cell as u32, 1), grid.dt(cell).sqrt());
        }
        parts.push((hv, drift, poly));
    }
    GepElement::from_parts(grid.clone(), parts)
}

/// Desk-scale study of the adapted × instantly-independent factorization of
/// `u = exp◇(I(g)) ⊗ h`: Riemann sums on coupled dyadic refinements must
/// approach `δ(u)` in relative L² distance, the strong-convergence harness
/// must certify the exact sum sequence, and for g = h = 1_(0,1] the limit
/// has the closed form `exp◇(B_1)(B_1 - 1)`.
pub fn scenario_theorem_2_3(cfg: &Theorem23Config) -> Result<ScenarioReport> {
    let mut report = ScenarioReport::new(
        "theorem-2-3",
        cfg.seed,
        json!({
            "g": cfg.g,
            "h": cfg.h,
            "base_cells": cfg.base_cells,
            "levels": cfg.levels,
            "n_paths": cfg.n_paths,
        }),
    );
    let horizon = cfg.g.support_end().max(cfg.h.support_end()).max(1.0);
    let base = Partition::uniform(0.0, horizon, cfg.base_cells)?;
    let plan = RefinementPlan::new(base, cfg.levels)?;
    let sampler = BridgeSampler::new(plan.root_grid()?, substream(cfg.seed, TAG_SCENARIO));
    let finest = cfg.levels - 1;
    let fine_grid = sampler.grid_at(finest);
    if !fine_grid.is_resolved(&cfg.g) || !fine_grid.is_resolved(&cfg.h) {
        return Err(WickError::NotResolved);
    }

    // exact integral and its closed form
    let we = GepElement::wick_exp(&cfg.g, &fine_grid)?;
    let u = ElementaryProcess::single(we.clone(), cfg.h.clone())?;
    let delta = skorokhod_elementary(&u)?;
    let closed = we.mul(
        &GepElement::wiener(&cfg.h, &fine_grid)?
            .sub(&GepElement::constant(fine_grid.clone(), cfg.g.inner(&cfg.h)))?,
    )?;
    report.push(
        "δ(exp◇(I(g)) ⊗ h) = exp◇(I(g))(I(h) - <g,h>)",
        Provenance::ClosedForm,
        "coefficient-exact",
        format!("distance {:.2e}", delta.max_coeff_distance(&closed)?),
        None,
        None,
        None,
        delta.approx_eq(&closed, 1e-10),
    );

    // per-level partitions mapped onto per-level grids
    let mut level_grids = Vec::with_capacity(cfg.levels);
    let mut level_idxs = Vec::with_capacity(cfg.levels);
    for l in 0..cfg.levels {
        let grid = sampler.grid_at(l);
        let part = plan.partition_at(l);
        let idxs: Vec<usize> = part
            .points()
            .iter()
            .map(|&p| grid.time_index(p).ok_or(WickError::PartitionNotOnGrid))
            .collect::<Result<_>>()?;
        level_grids.push(grid);
        level_idxs.push(idxs);
    }

    let f_fun = PathFunctional::adapted_wick_part(cfg.g.clone(), cfg.h.clone());
    let phi_fun = PathFunctional::independent_wick_part(cfg.g.clone());

    // one streaming pass: per path, all level sums plus the exact-integral
    // value on the same underlying Brownian path
    use rayon::prelude::*;
    let rows: Vec<(Vec<f64>, f64)> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|path| {
            let fine_b = sampler.path_values(path as u64, finest);
            let mut sums = Vec::with_capacity(cfg.levels);
            let mut delta_val = 0.0;
            for l in 0..cfg.levels {
                let stride = 1usize << (finest - l);
                let bm: Vec<f64> = fine_b.iter().copied().step_by(stride).collect();
                let view = PathView::from_bm(&level_grids[l], bm);
                let mut acc = 0.0;
                for w in level_idxs[l].windows(2) {
                    let db = view.bm_at(w[1]) - view.bm_at(w[0]);
                    acc += f_fun.eval(&view, w[0]) * phi_fun.eval(&view, w[1]) * db;
                }
                sums.push(acc);
                if l == finest {
                    delta_val = delta.eval_row(view.z());
                }
            }
            (sums, delta_val)
        })
        .collect();

    let delta_norm = delta.expect_mul(&delta)?.sqrt();
    let mut rel_dists: Vec<(f64, f64)> = Vec::with_capacity(cfg.levels);
    for l in 0..cfg.levels {
        let diffs: Vec<f64> = rows.iter().map(|(s, d)| s[l] - d).collect();
        let est = estimate_lp(&diffs, 2.0)?;
        rel_dists.push((est.estimate / delta_norm, est.std_error / delta_norm));
    }
    let decreasing = rel_dists
        .windows(2)
        .all(|w| w[1].0 <= w[0].0 + 3.0 * (w[0].1 + w[1].1));
    let (final_rel, final_se) = *rel_dists.last().unwrap();
    report.push(
        "relative L² distance of Riemann sums to δ(u) decreasing in mesh",
        Provenance::Oracle,
        "non-increasing within 3 SE",
        rel_dists
            .iter()
            .enumerate()
            .map(|(l, (d, _))| format!("L{l}: {d:.4}"))
            .collect::<Vec<_>>()
            .join(", "),
        Some(final_rel),
        Some(final_se),
        None,
        decreasing,
    );
    report.push(
        format!("relative L² distance at mesh 2^-{}", cfg.base_cells.trailing_zeros() as usize + cfg.levels - 1),
        Provenance::Oracle,
        "≤ 5e-2 (3 SE tolerance)",
        format!("{final_rel:.4} ± {final_se:.1e}"),
        Some(final_rel),
        Some(final_se),
        Some(5e-2),
        final_rel <= 5e-2 + 3.0 * final_se,
    );

    // in-probability Cauchy statistics across the coupled levels
    let th = Thresholds::default();
    let z = th.z_value();
    let mut prob_stats = Vec::new();
    for l in 0..cfg.levels - 1 {
        let count = rows
            .iter()
            .filter(|(s, _)| (s[l] - s[l + 1]).abs() / (1.0 + s[l + 1].abs()) > 5e-2)
            .count();
        let frac = count as f64 / cfg.n_paths as f64;
        let se = (frac * (1.0 - frac) / cfg.n_paths as f64).sqrt();
        prob_stats.push(StatPoint { index: l, value: frac, std_error: se, exact: false });
    }
    let prob_verdict =
        crate::report::sequence_verdict(&prob_stats, th.eta_prob, z, th.tail_window);
    let fractions_decay = prob_stats.windows(2).all(|w| w[1].value < w[0].value);
    report.push(
        "level-pair exceedance fractions decay across refinements",
        Provenance::Oracle,
        "strictly decreasing",
        prob_stats
            .iter()
            .map(|s| format!("{:.3}", s.value))
            .collect::<Vec<_>>()
            .join(" > "),
        Some(prob_stats.last().map(|s| s.value).unwrap_or(0.0)),
        None,
        None,
        fractions_decay,
    );
    let refine_report = ConvergenceReport {
        definition: crate::report::DefinitionTag::RiemannClosure,
        p: None,
        stages: vec![crate::report::StageRecord {
            name: "riemann-cauchy-in-probability (eps = 5e-2)".into(),
            statistics: prob_stats,
            threshold: th.eta_prob,
            verdict: prob_verdict,
            advisory: false,
            note: None,
        }],
        verdict: prob_verdict,
        limit: crate::report::LimitSummary::Symbolic {
            display: delta.to_string(),
            element: Box::new(delta.clone()),
            sample_mean: None,
            sample_std_error: None,
        },
        seed: cfg.seed,
        n_paths: cfg.n_paths,
        thresholds: th.clone(),
    };

    // strong-convergence harness on the exact Riemann-sum elements
    let mut seq = Vec::with_capacity(cfg.levels);
    for l in 0..cfg.levels {
        seq.push(symbolic_riemann_sum(&cfg.g, &cfg.h, &fine_grid, &level_idxs_on(
            &fine_grid,
            &plan.partition_at(l),
        )?)?);
    }
    let mut synth = Synth::new(substream(cfg.seed, TAG_TEST_FUNCTIONS));
    let test_fns: Vec<StepFunction> = (0..6)
        .map(|_| synth.step_on_grid(&sampler.grid_at(0), 0.8, 1.0))
        .collect();
    // exact statistics decay like the mesh (S-transforms) and like a few
    // multiples of it (second moments); certify at mesh-scaled thresholds
    let finest_mesh = plan.partition_at(finest).mesh();
    let harness_th = Thresholds {
        s_tol: 10.0 * finest_mesh,
        moment_tol: 100.0 * finest_mesh,
        ..Thresholds::default()
    };
    let tiny = sample_paths(&fine_grid, 8, cfg.seed)?;
    let harness =
        certify_strong_convergence(&seq, &delta, 2.0, &test_fns, &tiny, &harness_th)?;
    report.push(
        "S-transform + second-moment harness on the exact sum sequence",
        Provenance::ClosedForm,
        "certified at mesh-scaled thresholds",
        harness.verdict.to_string(),
        None,
        None,
        None,
        harness.verdict == Verdict::Certified,
    );

    report.convergence.push(refine_report);
    report.convergence.push(harness);
    Ok(report)
}

fn level_idxs_on(grid: &Grid, part: &Partition) -> Result<Vec<usize>> {
    part.points()
        .iter()
        .map(|&p| grid.time_index(p).ok_or(WickError::PartitionNotOnGrid))
        .collect()
}

// ---------------------------------------------------------------------------
// wick-identities: randomized verification of the generator identities
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct WickIdentitiesConfig {
    pub trials: usize,
    pub seed: u64,
}

impl Default for WickIdentitiesConfig {
    fn default() -> Self {
        WickIdentitiesConfig { trials: 100, seed: 42 }
    }
}

/// Randomized verification of the exponential-generator identities:
/// the S-transform of `δ(exp◇(I(g)) ⊗ h)`, the ordinary product rule,
/// the moment formula at p = 1..4, the Wick power-series tail in L², and
/// the derivative/integral duality.
pub fn scenario_wick_identities(cfg: &WickIdentitiesConfig) -> Result<ScenarioReport> {
    let mut report = ScenarioReport::new(
        "wick-identities",
        cfg.seed,
        json!({ "trials": cfg.trials }),
    );
    let mut s = Synth::new(cfg.seed);
    let mut worst_exp_as_wick = 0.0f64;
    let mut worst_product = 0.0f64;
    let mut worst_moment = 0.0f64;
    let mut worst_tail = 0.0f64;
    let mut worst_duality = 0.0f64;

    for _ in 0..cfg.trials {
        let grid = s.grid(6, 2.0);
        let g = s.step_on_grid(&grid, 0.7, 0.8);
        let h = s.step_on_grid(&grid, 0.7, 1.0);
        let v = s.step_on_grid(&grid, 0.7, 0.8);

        // S(δ(exp◇(I(g)) ⊗ h))(v) = e^{<g,v>} <v,h>
        let we = GepElement::wick_exp(&g, &grid)?;
        let d = skorokhod_elementary(&ElementaryProcess::single(we.clone(), h.clone())?)?;
        let lhs = d.s_transform(&v)?;
        let rhs = g.inner(&v).exp() * v.inner(&h);
        worst_exp_as_wick = worst_exp_as_wick.max((lhs - rhs).abs());

        // exp◇(I(g)) exp◇(I(v)) = e^{<g,v>} exp◇(I(g+v))
        let prod = we.mul(&GepElement::wick_exp(&v, &grid)?)?;
        let want = GepElement::wick_exp(&g.add(&v), &grid)?.scale(g.inner(&v).exp());
        worst_product = worst_product.max(prod.max_coeff_distance(&want)?);

        // moment formula for p = 1..4
        let n2 = g.norm_sq();
        for p in 1..=4u32 {
            let got = we.moment(p)?;
            let expected = ((p * p - p) as f64 / 2.0 * n2).exp();
            worst_moment = worst_moment.max((got - expected).abs() / expected);
        }

        // Wick power-series tail in L²: the truncation error of
        // Σ_{k<=N} I(f)^{⋄k}/k! has squared norm Σ_{k>N} ||f||^{2k}/k!
        let f = s.step_on_grid(&grid, 0.7, 0.7);
        let bf = GepElement::wiener(&f, &grid)?;
        let n_trunc = 6u32;
        let mut partial = GepElement::zero(grid.clone());
        let mut fact = 1.0;
        for k in 0..=n_trunc {
            if k > 0 {
                fact *= k as f64;
            }
            partial = partial.add(&bf.wick_power(k, 64)?.scale(1.0 / fact))?;
        }
        let diff = GepElement::wick_exp(&f, &grid)?.sub(&partial)?;
        let got = diff.expect_mul(&diff)?;
        let nf = f.norm_sq();
        let mut tail = nf.exp();
        let mut term = 1.0;
        for k in 0..=n_trunc {
            if k > 0 {
                term *= nf / k as f64;
            }
            tail -= term;
        }
        worst_tail = worst_tail.max((got - tail).abs() / (1.0 + tail.abs()));

        // duality E[F δ(u)] = ∫ E[u_t D_t F] dt
        let ff = s.gep(&grid, 2, 3);
        let u = s.elementary(&grid, 2, true)?;
        let lhs = ff.expect_mul(&skorokhod_elementary(&u)?)?;
        let rhs = malliavin_pairing(&ff, &u)?;
        worst_duality = worst_duality.max((lhs - rhs).abs() / (1.0 + lhs.abs()));
    }

    report.push(
        "S(δ(exp◇(I(g))⊗h))(v) = e^<g,v> <v,h>",
        Provenance::ClosedForm,
        "residual ≤ 1e-10",
        format!("max {worst_exp_as_wick:.2e}"),
        Some(worst_exp_as_wick),
        None,
        Some(0.0),
        worst_exp_as_wick <= 1e-10,
    );
    report.push(
        "exp◇(I(g))·exp◇(I(v)) = e^<g,v> exp◇(I(g+v))",
        Provenance::ClosedForm,
        "coefficient distance ≤ 1e-10",
        format!("max {worst_product:.2e}"),
        Some(worst_product),
        None,
        Some(0.0),
        worst_product <= 1e-10,
    );
    report.push(
        "E[(exp◇(I(g)))^p] = exp((p²-p)/2 ||g||²), p = 1..4",
        Provenance::ClosedForm,
        "relative error ≤ 1e-10",
        format!("max {worst_moment:.2e}"),
        Some(worst_moment),
        None,
        Some(0.0),
        worst_moment <= 1e-10,
    );
    report.push(
        "L² tail of Σ I(f)^⋄k / k! matches Σ_{k>N} ||f||^2k / k!",
        Provenance::ClosedForm,
        "relative error ≤ 1e-10",
        format!("max {worst_tail:.2e}"),
        Some(worst_tail),
        None,
        Some(0.0),
        worst_tail <= 1e-10,
    );
    report.push(
        "E[F δ(u)] = ∫ E[u_t D_t F] dt",
        Provenance::ClosedForm,
        "relative residual ≤ 1e-10",
        format!("max {worst_duality:.2e}"),
        Some(worst_duality),
        None,
        Some(0.0),
        worst_duality <= 1e-10,
    );

    // degenerate case: g = v = 0 collapses everything to 1 = 1
    let grid = Grid::new(vec![0.0, 1.0])?;
    let zero = StepFunction::zero();
    let one = GepElement::wick_exp(&zero, &grid)?;
    let degenerate = one.mul(&one)?.approx_eq(&GepElement::one(grid.clone()), 1e-15)
        && (one.moment(3)? - 1.0).abs() < 1e-15
        && (one.s_transform(&zero)? - 1.0).abs() < 1e-15;
    report.push(
        "degenerate g = v = 0 reduces to 1 = 1",
        Provenance::Elementary,
        "exact",
        "all identities at the constant element",
        None,
        None,
        None,
        degenerate,
    );
    Ok(report)
}

/// Scenario ids usable from the command line.
pub const SCENARIO_IDS: [&str; 4] =
    ["remark-2-6", "remark-3-8-iii", "theorem-2-3", "wick-identities"];
