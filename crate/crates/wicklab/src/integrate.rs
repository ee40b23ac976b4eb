//! Integral operators on elementary processes: the Skorokhod integral and
//! its S-transform characterization residual, the forward Itô sum
//! baseline, and closure drivers certifying the L^p and the
//! almost-sure/probability extension topologies.

use rayon::prelude::*;

use crate::error::{Result, WickError};
use crate::mcsim::{estimate_lp, eval_gep, mean, stable_sum, PathEnsemble};
use crate::process::ElementaryProcess;
use crate::report::{
    combine_verdicts, sequence_verdict, ConvergenceReport, DefinitionTag, LimitSummary,
    StageRecord, StatPoint, Thresholds,
};
use crate::stepfn::StepFunction;
use crate::wickalg::{GepElement, DEFAULT_DEGREE_CAP};

/// Skorokhod integral of an elementary process: on each summand
/// `δ(F ⊗ h) = F ⋄ I(h)`, summed by linearity. On Wick-exponential
/// factors this reduces to `exp◇(I(g)) (I(h) - <g, h>)`.
pub fn skorokhod_elementary(u: &ElementaryProcess) -> Result<GepElement> {
    skorokhod_elementary_capped(u, DEFAULT_DEGREE_CAP)
}

pub fn skorokhod_elementary_capped(u: &ElementaryProcess, cap: u32) -> Result<GepElement> {
    let mut acc = GepElement::zero(u.grid().clone());
    for (f, h) in u.summands() {
        let ih = GepElement::wiener(h, u.grid())?;
        acc = acc.add(&f.wick_mul_capped(&ih, cap)?)?;
    }
    Ok(acc)
}

/// Characterization residual `(SX)(v) - Σ_j (SF_j)(v) <h_j, v>`; the right
/// side is the closed form of `∫ (S u_t)(v) v(t) dt` for elementary `u`.
/// Zero for every test function iff `X` is the Skorokhod integral of `u`.
pub fn s_residual(x: &GepElement, u: &ElementaryProcess, v: &StepFunction) -> Result<f64> {
    if x.grid() != u.grid() {
        return Err(WickError::GridMismatch);
    }
    if !x.grid().is_resolved(v) {
        return Err(WickError::NotResolved);
    }
    let lhs = x.s_transform(v)?;
    let mut rhs = 0.0;
    for (f, h) in u.summands() {
        rhs += f.s_transform(v)? * h.inner(v);
    }
    Ok(lhs - rhs)
}

/// Per-cell sections with the adaptedness precondition of the forward Itô
/// sum: every factor must be adapted before each cell its weight touches.
fn ito_sections(u: &ElementaryProcess) -> Result<Vec<GepElement>> {
    let grid = u.grid();
    for (f, h) in u.summands() {
        let values = grid.cell_values(h)?;
        for (i, &v) in values.iter().enumerate() {
            let (lo, hi) = grid.cell_bounds(i);
            if v != 0.0 && !f.adapted_before(lo)? {
                return Err(WickError::NotAdapted { lo, hi });
            }
        }
    }
    Ok(u.sections())
}

/// Forward Itô sum `Σ_i u^{(i)}(ω) ΔB_i(ω)` over the grid cells of one
/// path, where `u^{(i)}` is the (F_{t_{i-1}}-measurable) cell section.
pub fn ito_pathwise(u: &ElementaryProcess, increments: &[f64]) -> Result<f64> {
    let sections = ito_sections(u)?;
    ito_sum_with_sections(u, &sections, increments)
}

/// Forward Itô sums over a whole ensemble (sections built once).
pub fn ito_pathwise_many(u: &ElementaryProcess, paths: &PathEnsemble) -> Result<Vec<f64>> {
    if u.grid() != paths.grid() {
        return Err(WickError::GridMismatch);
    }
    let sections = ito_sections(u)?;
    let grid = u.grid();
    let sqrt_dt: Vec<f64> = (0..grid.n_cells()).map(|i| grid.dt(i).sqrt()).collect();
    Ok((0..paths.n_paths())
        .into_par_iter()
        .map(|p| {
            let z = paths.row(p);
            sections
                .iter()
                .enumerate()
                .map(|(i, sec)| sec.eval_row(z) * sqrt_dt[i] * z[i])
                .sum()
        })
        .collect())
}

fn ito_sum_with_sections(
    u: &ElementaryProcess,
    sections: &[GepElement],
    increments: &[f64],
) -> Result<f64> {
    let grid = u.grid();
    if increments.len() != grid.n_cells() {
        return Err(WickError::GridMismatch);
    }
    let z: Vec<f64> = increments
        .iter()
        .enumerate()
        .map(|(i, &db)| db / grid.dt(i).sqrt())
        .collect();
    Ok(sections
        .iter()
        .enumerate()
        .map(|(i, sec)| sec.eval_row(&z) * increments[i])
        .sum())
}

/// Closed form of `∫ E[u_t D_t F] dt`, the pairing dual to
/// `E[F δ(u)]`.
pub fn malliavin_pairing(f: &GepElement, u: &ElementaryProcess) -> Result<f64> {
    if f.grid() != u.grid() {
        return Err(WickError::GridMismatch);
    }
    let df = f.malliavin();
    let mut acc = 0.0;
    for (g, h) in u.summands() {
        for (k, e) in df.summands() {
            let w = h.inner(e);
            if w != 0.0 {
                acc += g.expect_mul(k)? * w;
            }
        }
    }
    Ok(acc)
}

struct Stat {
    value: f64,
    std_error: f64,
    exact: bool,
}

fn is_even_integer(p: f64) -> bool {
    p.fract() == 0.0 && (p as i64) % 2 == 0 && p >= 2.0
}

/// `||X||_{L^p(Ω)}`: exact through moments for even integer p (with a
/// Monte Carlo fallback if the power would blow the degree budget),
/// Monte Carlo with jackknife errors otherwise.
fn lp_omega(x: &GepElement, p: f64, paths: &PathEnsemble) -> Result<Stat> {
    if is_even_integer(p) {
        let exact = if p == 2.0 {
            x.expect_mul(x).ok()
        } else {
            x.moment_capped(p as u32, DEFAULT_DEGREE_CAP).ok()
        };
        if let Some(m) = exact {
            return Ok(Stat { value: m.max(0.0).powf(1.0 / p), std_error: 0.0, exact: true });
        }
    }
    let samples = eval_gep(x, paths)?;
    let est = estimate_lp(&samples, p)?;
    Ok(Stat { value: est.estimate, std_error: est.std_error, exact: false })
}

/// `||u||_{L^p(Ω×[0,∞))}` for an elementary process, via its cell sections.
fn lp_time_omega(u: &ElementaryProcess, p: f64, paths: &PathEnsemble) -> Result<Stat> {
    let grid = u.grid();
    let sections = u.sections();
    if is_even_integer(p) {
        let mut total = Some(0.0);
        for (i, sec) in sections.iter().enumerate() {
            let m = if p == 2.0 {
                sec.expect_mul(sec).ok()
            } else {
                sec.moment_capped(p as u32, DEFAULT_DEGREE_CAP).ok()
            };
            match (total, m) {
                (Some(t), Some(v)) => total = Some(t + v * grid.dt(i)),
                _ => total = None,
            }
            if total.is_none() {
                break;
            }
        }
        if let Some(t) = total {
            return Ok(Stat { value: t.max(0.0).powf(1.0 / p), std_error: 0.0, exact: true });
        }
    }
    let per_cell: Vec<Vec<f64>> = sections
        .iter()
        .map(|sec| eval_gep(sec, paths))
        .collect::<Result<_>>()?;
    let n = paths.n_paths();
    let integrals: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|path| {
            let mut acc = 0.0;
            for (i, cell) in per_cell.iter().enumerate() {
                acc += cell[path].abs().powf(p) * grid.dt(i);
            }
            acc.powf(1.0 / p)
        })
        .collect();
    let est = estimate_lp(&integrals, p)?;
    Ok(Stat { value: est.estimate, std_error: est.std_error, exact: false })
}

fn validate_sequence(seq: &[ElementaryProcess], p: f64, paths: &PathEnsemble) -> Result<()> {
    if seq.is_empty() {
        return Err(WickError::EmptySequence);
    }
    if p < 1.0 {
        return Err(WickError::ExponentOutOfRange { p, requires: "p >= 1" });
    }
    for u in seq {
        if u.grid() != paths.grid() {
            return Err(WickError::GridMismatch);
        }
    }
    Ok(())
}

fn symbolic_limit(delta: &GepElement, samples: &[f64]) -> LimitSummary {
    let m = mean(samples);
    let var = stable_sum(
        &samples.iter().map(|x| (x - m) * (x - m)).collect::<Vec<_>>(),
    ) / (samples.len().max(2) - 1) as f64;
    LimitSummary::Symbolic {
        display: delta.to_string(),
        element: Box::new(delta.clone()),
        sample_mean: Some(m),
        sample_std_error: Some((var / samples.len() as f64).sqrt()),
    }
}

/// L^p-closedness driver: certifies that the integrands are Cauchy in
/// `L^p(Ω×[0,∞))` and the Skorokhod integrals are Cauchy in `L^p(Ω)`
/// along the sequence tail.
pub fn closure_skorokhod(
    seq: &[ElementaryProcess],
    p: f64,
    paths: &PathEnsemble,
    thresholds: &Thresholds,
) -> Result<ConvergenceReport> {
    validate_sequence(seq, p, paths)?;
    let z = thresholds.z_value();
    let deltas: Vec<GepElement> =
        seq.iter().map(skorokhod_elementary).collect::<Result<_>>()?;

    let mut integrand_stats = Vec::new();
    let mut integral_stats = Vec::new();
    if seq.len() == 1 {
        integrand_stats.push(StatPoint { index: 0, value: 0.0, std_error: 0.0, exact: true });
        integral_stats.push(StatPoint { index: 0, value: 0.0, std_error: 0.0, exact: true });
    }
    for i in 0..seq.len().saturating_sub(1) {
        let du = seq[i + 1].sub(&seq[i])?;
        let s = lp_time_omega(&du, p, paths)?;
        integrand_stats.push(StatPoint {
            index: i,
            value: s.value,
            std_error: s.std_error,
            exact: s.exact,
        });
        let dd = deltas[i + 1].sub(&deltas[i])?;
        let s = lp_omega(&dd, p, paths)?;
        integral_stats.push(StatPoint {
            index: i,
            value: s.value,
            std_error: s.std_error,
            exact: s.exact,
        });
    }
    let stage1 = StageRecord {
        name: "integrand-lp-cauchy".into(),
        verdict: sequence_verdict(&integrand_stats, thresholds.lp_tol, z, thresholds.tail_window),
        statistics: integrand_stats,
        threshold: thresholds.lp_tol,
        advisory: false,
        note: None,
    };
    let stage2 = StageRecord {
        name: "integral-lp-cauchy".into(),
        verdict: sequence_verdict(&integral_stats, thresholds.lp_tol, z, thresholds.tail_window),
        statistics: integral_stats,
        threshold: thresholds.lp_tol,
        advisory: false,
        note: None,
    };
    let stages = vec![stage1, stage2];
    let verdict = combine_verdicts(&stages);
    let last = deltas.last().unwrap();
    let samples = eval_gep(last, paths)?;
    Ok(ConvergenceReport {
        definition: DefinitionTag::SkorokhodClosure,
        p: Some(p),
        stages,
        verdict,
        limit: symbolic_limit(last, &samples),
        seed: paths.seed(),
        n_paths: paths.n_paths(),
        thresholds: thresholds.clone(),
    })
}

/// Almost-sure/probability closedness driver: stage 1 requires the
/// pathwise integrand distances `∫ |u^n_s - u^m_s|^p ds` to fall below a
/// uniform threshold on every sampled path; stage 2 requires the integrals
/// to be Cauchy in probability. An advisory stage tracks the integrand
/// `L^p(Ω×[0,∞))` norms, which this closure deliberately does not gate on.
pub fn closure_ayedkuo(
    seq: &[ElementaryProcess],
    p: f64,
    paths: &PathEnsemble,
    thresholds: &Thresholds,
) -> Result<ConvergenceReport> {
    validate_sequence(seq, p, paths)?;
    let z = thresholds.z_value();
    let grid = paths.grid();
    let n = paths.n_paths();
    let deltas: Vec<GepElement> =
        seq.iter().map(skorokhod_elementary).collect::<Result<_>>()?;
    let delta_samples: Vec<Vec<f64>> =
        deltas.iter().map(|d| eval_gep(d, paths)).collect::<Result<_>>()?;

    let mut path_stats = Vec::new();
    let mut prob_stats = Vec::new();
    if seq.len() == 1 {
        path_stats.push(StatPoint { index: 0, value: 0.0, std_error: 0.0, exact: true });
        prob_stats.push(StatPoint { index: 0, value: 0.0, std_error: 0.0, exact: true });
    }
    for i in 0..seq.len().saturating_sub(1) {
        let du = seq[i + 1].sub(&seq[i])?;
        let sections = du.sections();
        let per_cell: Vec<Vec<f64>> = sections
            .iter()
            .map(|sec| eval_gep(sec, paths))
            .collect::<Result<_>>()?;
        let worst = (0..n)
            .into_par_iter()
            .map(|path| {
                let mut acc = 0.0;
                for (c, cell) in per_cell.iter().enumerate() {
                    acc += cell[path].abs().powf(p) * grid.dt(c);
                }
                acc
            })
            .reduce(|| 0.0, f64::max);
        path_stats.push(StatPoint { index: i, value: worst, std_error: 0.0, exact: false });

        let count = (0..n)
            .filter(|&path| {
                (delta_samples[i + 1][path] - delta_samples[i][path]).abs()
                    > thresholds.eps_prob
            })
            .count();
        let frac = count as f64 / n as f64;
        let se = (frac * (1.0 - frac) / n as f64).sqrt();
        prob_stats.push(StatPoint { index: i, value: frac, std_error: se, exact: false });
    }

    let stage1 = StageRecord {
        name: "pathwise-integrand-decay".into(),
        verdict: sequence_verdict(&path_stats, thresholds.path_tol, z, thresholds.tail_window),
        statistics: path_stats,
        threshold: thresholds.path_tol,
        advisory: false,
        note: Some("max over sampled paths of ∫|u^n - u^{n+1}|^p dt".into()),
    };
    let stage2 = StageRecord {
        name: "integral-cauchy-in-probability".into(),
        verdict: sequence_verdict(&prob_stats, thresholds.eta_prob, z, thresholds.tail_window),
        statistics: prob_stats,
        threshold: thresholds.eta_prob,
        advisory: false,
        note: Some(format!(
            "P(|δ(u^n) - δ(u^{{n+1}})| > {}) per tail pair",
            thresholds.eps_prob
        )),
    };

    // ambient-membership diagnostic: growth of the integrand L^p norms.
    // A longer window than the verdict tail, since escape from L^p can be
    // slow (norm ratios just above 1 per step).
    let window = thresholds.tail_window.max(8).min(seq.len());
    let mut norm_stats = Vec::new();
    for (k, u) in seq.iter().enumerate().skip(seq.len() - window) {
        let s = lp_time_omega(u, p, paths)?;
        norm_stats.push(StatPoint {
            index: k,
            value: s.value,
            std_error: s.std_error,
            exact: s.exact,
        });
    }
    let growth = if norm_stats.len() >= 2 && norm_stats[0].value > 0.0 {
        norm_stats.last().unwrap().value / norm_stats[0].value
    } else {
        1.0
    };
    let advisory = StageRecord {
        name: "integrand-lp-norm-trend".into(),
        verdict: if growth > 3.0 {
            crate::report::Verdict::Refuted
        } else {
            crate::report::Verdict::Certified
        },
        statistics: norm_stats,
        threshold: f64::INFINITY,
        advisory: true,
        note: Some(format!(
            "||u^n||_Lp growth ratio {growth:.3} over the tail window; the \
             a.s./probability closure does not test ambient L^p membership"
        )),
    };

    let stages = vec![stage1, stage2, advisory];
    let verdict = combine_verdicts(&stages);
    let last = deltas.last().unwrap();
    Ok(ConvergenceReport {
        definition: DefinitionTag::AyedKuoClosure,
        p: Some(p),
        stages,
        verdict,
        limit: symbolic_limit(last, delta_samples.last().unwrap()),
        seed: paths.seed(),
        n_paths: paths.n_paths(),
        thresholds: thresholds.clone(),
    })
}

/// Strong-convergence harness: S-transform convergence at each test
/// function plus p-th moment convergence imply strong `L^p` convergence;
/// both hypotheses are checked numerically and either can refute.
pub fn certify_strong_convergence(
    seq: &[GepElement],
    candidate: &GepElement,
    p: f64,
    test_fns: &[StepFunction],
    paths: &PathEnsemble,
    thresholds: &Thresholds,
) -> Result<ConvergenceReport> {
    if seq.is_empty() {
        return Err(WickError::EmptySequence);
    }
    if p <= 1.0 {
        return Err(WickError::ExponentOutOfRange { p, requires: "p > 1" });
    }
    if test_fns.is_empty() {
        return Err(WickError::Parse("need at least one test function".into()));
    }
    for x in seq {
        if x.grid() != candidate.grid() {
            return Err(WickError::GridMismatch);
        }
    }
    let z = thresholds.z_value();

    let cand_s: Vec<f64> =
        test_fns.iter().map(|v| candidate.s_transform(v)).collect::<Result<_>>()?;
    let mut s_stats = Vec::new();
    for (k, x) in seq.iter().enumerate() {
        let mut worst = 0.0f64;
        for (v, &sv) in test_fns.iter().zip(&cand_s) {
            worst = worst.max((x.s_transform(v)? - sv).abs());
        }
        s_stats.push(StatPoint { index: k, value: worst, std_error: 0.0, exact: true });
    }

    let cand_m = lp_moment(candidate, p, paths)?;
    let mut m_stats = Vec::new();
    for (k, x) in seq.iter().enumerate() {
        let m = lp_moment(x, p, paths)?;
        m_stats.push(StatPoint {
            index: k,
            value: (m.value - cand_m.value).abs(),
            std_error: (m.std_error.powi(2) + cand_m.std_error.powi(2)).sqrt(),
            exact: m.exact && cand_m.exact,
        });
    }

    let stage_s = StageRecord {
        name: "s-transform-convergence".into(),
        verdict: sequence_verdict(&s_stats, thresholds.s_tol, z, thresholds.tail_window),
        statistics: s_stats,
        threshold: thresholds.s_tol,
        advisory: false,
        note: Some(format!("max over {} test functions", test_fns.len())),
    };
    let stage_m = StageRecord {
        name: "p-th-moment-convergence".into(),
        verdict: sequence_verdict(&m_stats, thresholds.moment_tol, z, thresholds.tail_window),
        statistics: m_stats,
        threshold: thresholds.moment_tol,
        advisory: false,
        note: None,
    };
    let stages = vec![stage_s, stage_m];
    let verdict = combine_verdicts(&stages);
    Ok(ConvergenceReport {
        definition: DefinitionTag::SCharacterization,
        p: Some(p),
        stages,
        verdict,
        limit: LimitSummary::Symbolic {
            display: candidate.to_string(),
            element: Box::new(candidate.clone()),
            sample_mean: None,
            sample_std_error: None,
        },
        seed: paths.seed(),
        n_paths: paths.n_paths(),
        thresholds: thresholds.clone(),
    })
}

/// `E[X^p]` for integer p (exact when the budget allows), `E[|X|^p]`
/// sampled otherwise.
fn lp_moment(x: &GepElement, p: f64, paths: &PathEnsemble) -> Result<Stat> {
    if p.fract() == 0.0 {
        let n = p as u32;
        let exact = if n == 2 {
            x.expect_mul(x).ok()
        } else {
            x.moment_capped(n, DEFAULT_DEGREE_CAP).ok()
        };
        if let Some(m) = exact {
            return Ok(Stat { value: m, std_error: 0.0, exact: true });
        }
    }
    let samples = eval_gep(x, paths)?;
    let powered: Vec<f64> = samples.iter().map(|v| v.abs().powf(p)).collect();
    let est = estimate_lp(&powered, 1.0)?;
    Ok(Stat { value: est.estimate, std_error: est.std_error, exact: false })
}
