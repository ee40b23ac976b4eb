//! Exact symbolic algebra of Gaussian exponential-polynomial random
//! variables over a fixed grid.
//!
//! An element is a finite sum of terms
//! `coeff * exp(<a, Z> - |a|^2/2) * P(Z)` in the standardized increments
//! `Z_i = ΔB_i / sqrt(Δt_i)`, which are independent standard normals. The
//! generators are the Wiener integral `I(h)` (drift 0, linear polynomial)
//! and the Wick exponential `exp◇(I(g)) = exp(I(g) - ||g||^2/2)` (drift
//! `g_i sqrt(Δt_i)`, polynomial 1). Products, Wick products, expectations
//! and the S-transform all stay in closed form.

pub mod hermite;
pub mod poly;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Result, WickError};
use crate::process::ElementaryProcess;
use crate::stepfn::{Grid, StepFunction};
use poly::{MultiIndex, SparsePoly};

/// Default cap on polynomial degree for materializing operations.
pub const DEFAULT_DEGREE_CAP: u32 = 64;

/// Tolerance for merging terms whose drift vectors agree coordinatewise.
const DRIFT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct GepTerm {
    pub coeff: f64,
    pub drift: Vec<f64>,
    pub poly: SparsePoly,
}

/// Gaussian exponential-polynomial random variable on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GepElement {
    grid: Grid,
    terms: Vec<GepTerm>,
}

impl GepElement {
    pub fn zero(grid: Grid) -> Self {
        GepElement { grid, terms: Vec::new() }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        let mut x = GepElement::zero(grid);
        if c != 0.0 {
            let m = x.grid.n_cells();
            x.terms.push(GepTerm { coeff: c, drift: vec![0.0; m], poly: SparsePoly::one() });
        }
        x
    }

    pub fn one(grid: Grid) -> Self {
        GepElement::constant(grid, 1.0)
    }

    /// Wiener integral `I(h)` of a step function resolved on the grid:
    /// drift 0 and the linear polynomial `Σ h_i sqrt(Δt_i) Z_i`.
    pub fn wiener(h: &StepFunction, grid: &Grid) -> Result<Self> {
        let values = grid.cell_values(h)?;
        let mut p = SparsePoly::zero();
        for (i, &v) in values.iter().enumerate() {
            if v != 0.0 {
                p.add_monomial(MultiIndex::single(i as u32, 1), v * grid.dt(i).sqrt());
            }
        }
        let mut x = GepElement::zero(grid.clone());
        if !p.is_zero() {
            x.terms.push(GepTerm {
                coeff: 1.0,
                drift: vec![0.0; grid.n_cells()],
                poly: p,
            });
        }
        Ok(x)
    }

    /// Wick exponential `exp◇(I(g)) = exp(I(g) - ||g||^2/2)`:
    /// drift `g_i sqrt(Δt_i)`, polynomial 1, unit coefficient.
    pub fn wick_exp(g: &StepFunction, grid: &Grid) -> Result<Self> {
        let values = grid.cell_values(g)?;
        let drift: Vec<f64> =
            values.iter().enumerate().map(|(i, &v)| v * grid.dt(i).sqrt()).collect();
        Ok(GepElement {
            grid: grid.clone(),
            terms: vec![GepTerm { coeff: 1.0, drift, poly: SparsePoly::one() }],
        })
    }

    pub fn from_parts(grid: Grid, parts: Vec<(f64, Vec<f64>, SparsePoly)>) -> Result<Self> {
        let m = grid.n_cells();
        let mut terms = Vec::with_capacity(parts.len());
        for (coeff, drift, poly) in parts {
            if drift.len() != m {
                return Err(WickError::GridMismatch);
            }
            if !coeff.is_finite() || drift.iter().any(|d| !d.is_finite()) {
                return Err(WickError::NonFinite(coeff));
            }
            terms.push(GepTerm { coeff, drift, poly });
        }
        let mut x = GepElement { grid, terms };
        x.canonicalize();
        Ok(x)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn terms(&self) -> &[GepTerm] {
        &self.terms
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Maximum polynomial degree across terms.
    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|t| t.poly.degree()).max().unwrap_or(0)
    }

    fn check_grid(&self, other: &Self) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(WickError::GridMismatch)
        }
    }

    /// Canonical form: zero terms dropped, scalar coefficients folded into
    /// the polynomials, terms merged when their drifts coincide. Exact
    /// zeros are removed; nonzero coefficients are never pruned, since
    /// Gaussian moments can amplify tiny coefficients by many orders.
    pub fn canonicalize(&mut self) {
        let mut terms = std::mem::take(&mut self.terms);
        for t in &mut terms {
            if t.coeff != 1.0 {
                t.poly = t.poly.scale(t.coeff);
                t.coeff = 1.0;
            }
        }
        terms.retain(|t| t.coeff != 0.0 && !t.poly.is_zero());
        terms.sort_by(|x, y| {
            x.drift
                .iter()
                .zip(y.drift.iter())
                .map(|(a, b)| a.total_cmp(b))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let mut out: Vec<GepTerm> = Vec::with_capacity(terms.len());
        for t in terms {
            match out.last_mut() {
                Some(prev)
                    if prev
                        .drift
                        .iter()
                        .zip(t.drift.iter())
                        .all(|(a, b)| (a - b).abs() <= DRIFT_TOL) =>
                {
                    prev.poly.add_scaled(&t.poly, 1.0);
                }
                _ => out.push(t),
            }
        }
        out.retain(|t| !t.poly.is_zero());
        for t in &mut out {
            if let Some(c) = t.poly.as_constant() {
                t.coeff = c;
                t.poly = SparsePoly::one();
            }
        }
        out.retain(|t| t.coeff != 0.0);
        self.terms = out;
    }

    pub fn canonical(&self) -> Self {
        let mut x = self.clone();
        x.canonicalize();
        x
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut x = self.clone();
        for t in &mut x.terms {
            t.coeff *= c;
        }
        x.canonicalize();
        x
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_grid(other)?;
        let mut x = self.clone();
        x.terms.extend(other.terms.iter().cloned());
        x.canonicalize();
        Ok(x)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    /// Exact pointwise product: drifts add, polynomials multiply and each
    /// term pair picks up `exp(<a, b>)`.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.mul_capped(other, DEFAULT_DEGREE_CAP)
    }

    pub fn mul_capped(&self, other: &Self, cap: u32) -> Result<Self> {
        self.check_grid(other)?;
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for ta in &self.terms {
            for tb in &other.terms {
                let degree = ta.poly.degree() + tb.poly.degree();
                if degree > cap {
                    return Err(WickError::BudgetExceeded { degree, cap });
                }
                let coeff = ta.coeff * tb.coeff * dot(&ta.drift, &tb.drift).exp();
                let drift: Vec<f64> =
                    ta.drift.iter().zip(&tb.drift).map(|(a, b)| a + b).collect();
                terms.push(GepTerm { coeff, drift, poly: ta.poly.mul(&tb.poly) });
            }
        }
        let mut x = GepElement { grid: self.grid.clone(), terms };
        x.canonicalize();
        Ok(x)
    }

    /// Wick product, defined through the S-transform:
    /// `S(X ⋄ Y)(v) = (SX)(v) (SY)(v)` for every step function `v`.
    ///
    /// Per term pair the polynomial factors are Wick-multiplied in the
    /// per-coordinate Hermite basis (exponent addition) and the exponential
    /// factors act by the symbolic translation rule
    /// `exp◇(<a, Z>) ⋄ F(Z) = exp◇(<a, Z>) F(Z - a)`.
    pub fn wick_mul(&self, other: &Self) -> Result<Self> {
        self.wick_mul_capped(other, DEFAULT_DEGREE_CAP)
    }

    pub fn wick_mul_capped(&self, other: &Self, cap: u32) -> Result<Self> {
        self.check_grid(other)?;
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for ta in &self.terms {
            for tb in &other.terms {
                let degree = ta.poly.degree() + tb.poly.degree();
                if degree > cap {
                    return Err(WickError::BudgetExceeded { degree, cap });
                }
                let drift: Vec<f64> =
                    ta.drift.iter().zip(&tb.drift).map(|(a, b)| a + b).collect();
                let poly = match (ta.poly.as_constant(), tb.poly.as_constant()) {
                    (Some(pa), Some(pb)) => SparsePoly::constant(pa * pb),
                    (Some(pa), None) => {
                        let neg: Vec<f64> = ta.drift.iter().map(|x| -x).collect();
                        tb.poly.shift(&neg).scale(pa)
                    }
                    (None, Some(pb)) => {
                        let neg: Vec<f64> = tb.drift.iter().map(|x| -x).collect();
                        ta.poly.shift(&neg).scale(pb)
                    }
                    (None, None) => {
                        let pa = ta.poly.shift(&ta.drift).to_hermite();
                        let pb = tb.poly.shift(&tb.drift).to_hermite();
                        let neg: Vec<f64> = drift.iter().map(|x| -x).collect();
                        pa.mul(&pb).from_hermite().shift(&neg)
                    }
                };
                terms.push(GepTerm { coeff: ta.coeff * tb.coeff, drift, poly });
            }
        }
        let mut x = GepElement { grid: self.grid.clone(), terms };
        x.canonicalize();
        Ok(x)
    }

    /// `X^n` via repeated pointwise multiplication.
    pub fn pow_capped(&self, n: u32, cap: u32) -> Result<Self> {
        let mut acc = GepElement::one(self.grid.clone());
        for _ in 0..n {
            acc = acc.mul_capped(self, cap)?;
        }
        Ok(acc)
    }

    /// `X^{⋄n}`, the n-fold Wick power.
    pub fn wick_power(&self, n: u32, cap: u32) -> Result<Self> {
        let mut acc = GepElement::one(self.grid.clone());
        for _ in 0..n {
            acc = acc.wick_mul_capped(self, cap)?;
        }
        Ok(acc)
    }

    /// Exact expectation via the shift rule
    /// `E[exp(<a,Z> - |a|^2/2) P(Z)] = E[P(Z + a)]`.
    pub fn expect(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coeff * t.poly.expect_shifted(&t.drift))
            .sum()
    }

    /// `E[X Y]` in closed form without materializing the product (degrees
    /// never hit the budget because only a scalar is produced).
    pub fn expect_mul(&self, other: &Self) -> Result<f64> {
        self.check_grid(other)?;
        let mut acc = 0.0;
        for ta in &self.terms {
            for tb in &other.terms {
                let shift: Vec<f64> =
                    ta.drift.iter().zip(&tb.drift).map(|(a, b)| a + b).collect();
                let w = ta.coeff * tb.coeff * dot(&ta.drift, &tb.drift).exp();
                acc += w * ta.poly.mul(&tb.poly).expect_shifted(&shift);
            }
        }
        Ok(acc)
    }

    /// `E[X^n]` for n ≥ 1, splitting the power to halve the materialized
    /// degree.
    pub fn moment(&self, n: u32) -> Result<f64> {
        self.moment_capped(n, DEFAULT_DEGREE_CAP)
    }

    pub fn moment_capped(&self, n: u32, cap: u32) -> Result<f64> {
        if n == 0 {
            return Err(WickError::ExponentOutOfRange { p: 0.0, requires: "n >= 1" });
        }
        if n == 1 {
            return Ok(self.expect());
        }
        let a = n / 2;
        let b = n - a;
        let xa = self.pow_capped(a, cap)?;
        let xb = if b == a { xa.clone() } else { self.pow_capped(b, cap)? };
        xa.expect_mul(&xb)
    }

    /// S-transform `(SX)(v) = E[X exp◇(I(v))]`, exact.
    pub fn s_transform(&self, v: &StepFunction) -> Result<f64> {
        let sv = GepElement::wick_exp(v, &self.grid)?;
        self.expect_mul(&sv)
    }

    /// True iff the element is measurable for the Brownian past up to `t`:
    /// drifts and polynomials involve only cells ending at or before `t`.
    pub fn adapted_before(&self, t: f64) -> Result<bool> {
        let idx = self.grid.time_index(t).ok_or(WickError::NotAGridPoint(t))?;
        Ok(self.terms.iter().all(|term| {
            term.drift.iter().enumerate().all(|(i, &d)| i < idx || d == 0.0)
                && term.poly.terms().all(|(mi, _)| {
                    mi.pairs().iter().all(|&(v, _)| (v as usize) < idx)
                })
        }))
    }

    /// True iff the element depends only on increments after `t`
    /// (instant independence from the past at `t`).
    pub fn independent_after(&self, t: f64) -> Result<bool> {
        let idx = self.grid.time_index(t).ok_or(WickError::NotAGridPoint(t))?;
        Ok(self.terms.iter().all(|term| {
            term.drift.iter().enumerate().all(|(i, &d)| i >= idx || d == 0.0)
                && term.poly.terms().all(|(mi, _)| {
                    mi.pairs().iter().all(|&(v, _)| v as usize >= idx)
                })
        }))
    }

    /// Malliavin derivative `D_t X` as an elementary process
    /// `Σ_i (∂X/∂Z_i) (Δt_i)^{-1/2} ⊗ 1_{cell i}`. On the generators this
    /// reduces to `D_t exp◇(I(g)) = exp◇(I(g)) g(t)` and extends by
    /// linearity and the product rule.
    pub fn malliavin(&self) -> ElementaryProcess {
        let mut summands = Vec::new();
        for i in 0..self.grid.n_cells() {
            let inv_sqrt_dt = 1.0 / self.grid.dt(i).sqrt();
            let mut terms = Vec::new();
            for t in &self.terms {
                let mut p = t.poly.partial(i as u32);
                if t.drift[i] != 0.0 {
                    p.add_scaled(&t.poly, t.drift[i]);
                }
                if !p.is_zero() {
                    terms.push(GepTerm {
                        coeff: t.coeff * inv_sqrt_dt,
                        drift: t.drift.clone(),
                        poly: p,
                    });
                }
            }
            if terms.is_empty() {
                continue;
            }
            let mut factor = GepElement { grid: self.grid.clone(), terms };
            factor.canonicalize();
            let (lo, hi) = self.grid.cell_bounds(i);
            let h = StepFunction::indicator(lo, hi, 1.0).expect("grid cells are valid");
            summands.push((factor, h));
        }
        ElementaryProcess::new(self.grid.clone(), summands)
            .expect("cell indicators are resolved on the grid")
    }

    /// Pathwise evaluation on one row of standardized increments.
    pub fn eval_row(&self, z: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let half_norm = 0.5 * dot(&t.drift, &t.drift);
                t.coeff * (dot(&t.drift, z) - half_norm).exp() * t.poly.eval(z)
            })
            .sum()
    }

    /// Largest folded coefficient magnitude; scale of the element.
    pub fn max_coeff(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coeff.abs() * t.poly.max_abs_coeff())
            .fold(0.0, f64::max)
    }

    /// Coefficient distance after aligning terms by drift; the equality
    /// notion behind "coefficient-exact" checks.
    pub fn max_coeff_distance(&self, other: &Self) -> Result<f64> {
        Ok(self.sub(other)?.max_coeff())
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        match self.max_coeff_distance(other) {
            Ok(d) => d <= tol,
            Err(_) => false,
        }
    }

    /// `Σ_k coeffs[k] X^k` by Horner's rule (ordinary powers).
    pub fn apply_poly_1d(&self, coeffs: &[f64], cap: u32) -> Result<Self> {
        let mut acc = GepElement::zero(self.grid.clone());
        for &c in coeffs.iter().rev() {
            acc = acc.mul_capped(self, cap)?;
            acc = acc.add(&GepElement::constant(self.grid.clone(), c))?;
        }
        Ok(acc)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl fmt::Display for GepElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const MAX_TERMS: usize = 8;
        const MAX_DRIFT: usize = 8;
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, t) in self.terms.iter().enumerate() {
            if k == MAX_TERMS {
                write!(f, " + … ({} terms total)", self.terms.len())?;
                break;
            }
            if k > 0 {
                write!(f, " + ")?;
            }
            let nonzero = t.drift.iter().filter(|&&d| d != 0.0).count();
            let poly_const = t.poly.as_constant();
            match poly_const {
                Some(c) => write!(f, "{:.6}", t.coeff * c)?,
                None => write!(f, "{:.6}", t.coeff)?,
            }
            if nonzero > 0 {
                write!(f, "*exp◇(")?;
                if nonzero > MAX_DRIFT {
                    write!(f, "<a,Z>, {nonzero} cells")?;
                } else {
                    let mut first = true;
                    for (i, &d) in t.drift.iter().enumerate() {
                        if d != 0.0 {
                            if !first {
                                write!(f, " + ")?;
                            }
                            first = false;
                            write!(f, "{:.6}*Z{}", d, i + 1)?;
                        }
                    }
                }
                write!(f, ")")?;
            }
            if poly_const.is_none() {
                if t.poly.n_terms() > MAX_DRIFT {
                    write!(f, "*(poly, {} monomials, degree {})", t.poly.n_terms(), t.poly.degree())?;
                } else {
                    write!(f, "*({})", t.poly)?;
                }
            }
        }
        Ok(())
    }
}

// --- JSON representation: grid times, terms with drift vectors and
// {multi-index: coefficient} maps keyed like "0:2,3:1" ---

#[derive(Serialize, Deserialize)]
struct TermRepr {
    coeff: f64,
    drift: Vec<f64>,
    poly: BTreeMap<String, f64>,
}

#[derive(Serialize, Deserialize)]
struct GepRepr {
    grid: Grid,
    terms: Vec<TermRepr>,
}

fn multi_index_key(mi: &MultiIndex) -> String {
    mi.pairs()
        .iter()
        .map(|(v, e)| format!("{v}:{e}"))
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_multi_index(s: &str) -> std::result::Result<MultiIndex, String> {
    let mut mi = MultiIndex::unit();
    if s.is_empty() {
        return Ok(mi);
    }
    for part in s.split(',') {
        let (v, e) = part
            .split_once(':')
            .ok_or_else(|| format!("bad multi-index component `{part}`"))?;
        let v: u32 = v.trim().parse().map_err(|e| format!("{e}"))?;
        let e: u32 = e.trim().parse().map_err(|e| format!("{e}"))?;
        mi = mi.mul(&MultiIndex::single(v, e));
    }
    Ok(mi)
}

impl Serialize for GepElement {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let repr = GepRepr {
            grid: self.grid.clone(),
            terms: self
                .terms
                .iter()
                .map(|t| TermRepr {
                    coeff: t.coeff,
                    drift: t.drift.clone(),
                    poly: t.poly.terms().map(|(mi, c)| (multi_index_key(mi), c)).collect(),
                })
                .collect(),
        };
        repr.serialize(ser)
    }
}

impl<'de> Deserialize<'de> for GepElement {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let repr = GepRepr::deserialize(de)?;
        let mut parts = Vec::with_capacity(repr.terms.len());
        for t in repr.terms {
            let mut p = SparsePoly::zero();
            for (key, c) in t.poly {
                let mi = parse_multi_index(&key).map_err(serde::de::Error::custom)?;
                p.add_monomial(mi, c);
            }
            parts.push((t.coeff, t.drift, p));
        }
        GepElement::from_parts(repr.grid, parts).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stepfn::make_step;

    fn grid01() -> Grid {
        Grid::new(vec![0.0, 1.0]).unwrap()
    }

    fn ind(lo: f64, hi: f64, v: f64) -> StepFunction {
        StepFunction::indicator(lo, hi, v).unwrap()
    }

    #[test]
    fn wiener_basics() {
        let grid = grid01();
        let b1 = GepElement::wiener(&ind(0.0, 1.0, 1.0), &grid).unwrap();
        assert_eq!(b1.expect(), 0.0);
        assert!((b1.expect_mul(&b1).unwrap() - 1.0).abs() < 1e-14);
        // B_{1/3} = sqrt(1/3) Z on the single-cell grid {0, 1/3}
        let g3 = Grid::new(vec![0.0, 1.0 / 3.0]).unwrap();
        let b = GepElement::wiener(&ind(0.0, 1.0 / 3.0, 1.0), &g3).unwrap();
        assert!((b.expect_mul(&b).unwrap() - 1.0 / 3.0).abs() < 1e-14);
        let z = GepElement::wiener(&StepFunction::zero(), &grid).unwrap();
        assert!(z.is_zero());
        // not resolved -> error
        let fine = ind(0.0, 0.5, 1.0);
        assert_eq!(GepElement::wiener(&fine, &grid).unwrap_err(), WickError::NotResolved);
    }

    #[test]
    fn wick_exp_basics() {
        let grid = grid01();
        let one = GepElement::wick_exp(&StepFunction::zero(), &grid).unwrap();
        assert!(one.approx_eq(&GepElement::one(grid.clone()), 0.0));
        let g = ind(0.0, 1.0, 1.0);
        let we = GepElement::wick_exp(&g, &grid).unwrap();
        assert_eq!(we.expect(), 1.0);
        // E[(exp◇ I(g))^2] = e^{||g||^2}
        let m2 = we.expect_mul(&we).unwrap();
        assert!((m2 - g.norm_sq().exp()).abs() < 1e-12);
        // pathwise: exp(I(g)(ω) - ||g||^2/2)
        let z = [0.37f64];
        let manual = (z[0] - 0.5).exp();
        assert!((we.eval_row(&z) - manual).abs() < 1e-14);
    }

    #[test]
    fn mul_product_rule_for_wick_exponentials() {
        let grid = Grid::new(vec![0.0, 0.5, 1.0, 2.0]).unwrap();
        let g = make_step(&[(0.0, 1.0, 0.8), (1.0, 2.0, -0.3)]).unwrap();
        let v = make_step(&[(0.5, 2.0, 0.6)]).unwrap();
        let lhs = GepElement::wick_exp(&g, &grid)
            .unwrap()
            .mul(&GepElement::wick_exp(&v, &grid).unwrap())
            .unwrap();
        let rhs = GepElement::wick_exp(&g.add(&v), &grid)
            .unwrap()
            .scale(g.inner(&v).exp());
        assert!(lhs.approx_eq(&rhs, 1e-12));
    }

    #[test]
    fn mul_identity_and_square() {
        let grid = grid01();
        let b = GepElement::wiener(&ind(0.0, 1.0, 1.0), &grid).unwrap();
        let one = GepElement::one(grid.clone());
        assert!(b.mul(&one).unwrap().approx_eq(&b, 0.0));
        // on one cell of width t: (sqrt(t) Z)^2 = t Z^2
        let g3 = Grid::new(vec![0.0, 1.0 / 3.0]).unwrap();
        let bt = GepElement::wiener(&ind(0.0, 1.0 / 3.0, 1.0), &g3).unwrap();
        let sq = bt.mul(&bt).unwrap();
        let expected = GepElement::from_parts(
            g3,
            vec![(
                1.0,
                vec![0.0],
                SparsePoly::monomial(MultiIndex::single(0, 2), 1.0 / 3.0),
            )],
        )
        .unwrap();
        assert!(sq.approx_eq(&expected, 1e-15));
    }

    #[test]
    fn wick_mul_on_generators() {
        let grid = Grid::new(vec![0.0, 0.5, 1.0]).unwrap();
        let g = make_step(&[(0.0, 1.0, 1.2)]).unwrap();
        let v = make_step(&[(0.5, 1.0, -0.4)]).unwrap();
        // exp◇(I(g)) ⋄ exp◇(I(v)) = exp◇(I(g+v)), coefficient-exact
        let lhs = GepElement::wick_exp(&g, &grid)
            .unwrap()
            .wick_mul(&GepElement::wick_exp(&v, &grid).unwrap())
            .unwrap();
        let rhs = GepElement::wick_exp(&g.add(&v), &grid).unwrap();
        assert!(lhs.approx_eq(&rhs, 1e-15));

        // I(f) ⋄ I(f) = I(f)^2 - ||f||^2
        let f = make_step(&[(0.0, 1.0, 0.9)]).unwrap();
        let bf = GepElement::wiener(&f, &grid).unwrap();
        let lhs = bf.wick_mul(&bf).unwrap();
        let rhs = bf
            .mul(&bf)
            .unwrap()
            .sub(&GepElement::constant(grid.clone(), f.norm_sq()))
            .unwrap();
        assert!(lhs.approx_eq(&rhs, 1e-12));

        // exp◇(I(g)) ⋄ I(h) = exp◇(I(g)) (I(h) - <g,h>)
        let h = make_step(&[(0.0, 0.5, 2.0)]).unwrap();
        let we = GepElement::wick_exp(&g, &grid).unwrap();
        let lhs = we.wick_mul(&GepElement::wiener(&h, &grid).unwrap()).unwrap();
        let ih = GepElement::wiener(&h, &grid).unwrap();
        let shift = GepElement::constant(grid.clone(), g.inner(&h));
        let rhs = we.mul(&ih.sub(&shift).unwrap()).unwrap();
        assert!(lhs.approx_eq(&rhs, 1e-12));
    }

    #[test]
    fn moments_of_wick_exponential() {
        let grid = Grid::new(vec![0.0, 0.25, 1.0]).unwrap();
        let g = make_step(&[(0.0, 1.0, 0.7), (0.0, 0.25, 0.4)]).unwrap();
        let we = GepElement::wick_exp(&g, &grid).unwrap();
        let n2 = g.norm_sq();
        for p in 1..=4u32 {
            let expected = ((p * p - p) as f64 / 2.0 * n2).exp();
            let got = we.moment(p).unwrap();
            assert!(
                (got - expected).abs() <= 1e-12 * expected,
                "p = {p}: {got} vs {expected}"
            );
        }
    }

    #[test]
    fn s_transform_values() {
        let grid = Grid::new(vec![0.0, 0.5, 1.0]).unwrap();
        let f = make_step(&[(0.0, 1.0, 0.6)]).unwrap();
        let g = make_step(&[(0.5, 1.0, -1.1)]).unwrap();
        let we = GepElement::wick_exp(&f, &grid).unwrap();
        assert!((we.s_transform(&g).unwrap() - f.inner(&g).exp()).abs() < 1e-13);
        let one = GepElement::one(grid.clone());
        assert!((one.s_transform(&g).unwrap() - 1.0).abs() < 1e-14);
        let h = make_step(&[(0.0, 0.5, 2.0)]).unwrap();
        let ih = GepElement::wiener(&h, &grid).unwrap();
        assert!((ih.s_transform(&g).unwrap() - h.inner(&g)).abs() < 1e-13);
    }

    #[test]
    fn malliavin_examples() {
        let grid = Grid::new(vec![0.0, 0.5, 1.0]).unwrap();
        let g = make_step(&[(0.0, 0.5, 1.5), (0.5, 1.0, -0.5)]).unwrap();
        let we = GepElement::wick_exp(&g, &grid).unwrap();
        // D exp◇(I(g)) = exp◇(I(g)) ⊗ g
        let d = we.malliavin();
        let expected =
            ElementaryProcess::new(grid.clone(), vec![(we.clone(), g.clone())]).unwrap();
        assert!(d.approx_eq(&expected, 1e-12));
        // D of a constant vanishes
        assert!(GepElement::constant(grid.clone(), 3.0).malliavin().is_zero());
        // D I(h) = 1 ⊗ h
        let h = make_step(&[(0.0, 1.0, 2.0)]).unwrap();
        let d = GepElement::wiener(&h, &grid).unwrap().malliavin();
        let expected =
            ElementaryProcess::new(grid.clone(), vec![(GepElement::one(grid.clone()), h)])
                .unwrap();
        assert!(d.approx_eq(&expected, 1e-12));
    }

    #[test]
    fn malliavin_is_first_order_in_the_wick_exponent() {
        // sections of D[(exp◇(I(w h)) - 1)/w] approach those of 1 ⊗ h
        // linearly in w; measured in L² since the exponent drifts differ
        let grid = Grid::new(vec![0.0, 0.5, 1.0]).unwrap();
        let h = make_step(&[(0.0, 1.0, 1.0)]).unwrap();
        let expected =
            ElementaryProcess::new(grid.clone(), vec![(GepElement::one(grid.clone()), h.clone())])
                .unwrap();
        let mut errs = Vec::new();
        for w in [1e-3, 5e-4] {
            let hw = h.scale(w);
            let fw = GepElement::wick_exp(&hw, &grid)
                .unwrap()
                .sub(&GepElement::one(grid.clone()))
                .unwrap()
                .scale(1.0 / w);
            let d = fw.malliavin();
            let err = (0..grid.n_cells())
                .map(|i| {
                    let diff =
                        d.cell_section(i).sub(&expected.cell_section(i)).unwrap();
                    diff.expect_mul(&diff).unwrap().sqrt()
                })
                .fold(0.0, f64::max);
            errs.push(err);
        }
        assert!(errs[0] < 2e-3 && errs[1] < 1e-3, "FD errors {errs:?}");
        assert!(errs[1] < 0.75 * errs[0], "not first order: {errs:?}");
    }

    #[test]
    fn adaptedness_predicates() {
        let grid = Grid::new(vec![0.0, 1.0, 2.0]).unwrap();
        // a truncation of exp(B_t^2) over (0, t]: depends on early cells only
        let b1 = GepElement::wiener(&ind(0.0, 1.0, 1.0), &grid).unwrap();
        let trunc = GepElement::one(grid.clone())
            .add(&b1.mul(&b1).unwrap())
            .unwrap();
        assert!(trunc.adapted_before(1.0).unwrap());
        assert!(!trunc.independent_after(1.0).unwrap());

        let g = ind(0.0, 2.0, 0.7);
        let after = GepElement::wick_exp(&g.restrict_after(1.0), &grid).unwrap();
        assert!(after.independent_after(1.0).unwrap());
        assert!(!after.adapted_before(1.0).unwrap());

        let straddle = GepElement::wiener(&ind(0.0, 2.0, 1.0), &grid).unwrap();
        assert!(!straddle.adapted_before(1.0).unwrap());
        assert!(!straddle.independent_after(1.0).unwrap());
        assert_eq!(
            straddle.adapted_before(0.3).unwrap_err(),
            WickError::NotAGridPoint(0.3)
        );
    }

    #[test]
    fn factorization_across_grid_points() {
        // exp◇(I(g)) = exp◇(I(g 1_{[0,t)})) * exp◇(I(g 1_{(t,∞)})), exact
        let grid = Grid::new(vec![0.0, 0.5, 1.0, 1.5]).unwrap();
        let g = make_step(&[(0.0, 1.5, 0.9), (0.5, 1.0, -0.2)]).unwrap();
        let we = GepElement::wick_exp(&g, &grid).unwrap();
        for &t in grid.times() {
            let lhs = GepElement::wick_exp(&g.restrict_before(t), &grid)
                .unwrap()
                .mul(&GepElement::wick_exp(&g.restrict_after(t), &grid).unwrap())
                .unwrap();
            assert!(lhs.approx_eq(&we, 1e-14), "failed at t = {t}");
        }
    }

    #[test]
    fn budget_is_enforced() {
        let grid = grid01();
        let b = GepElement::wiener(&ind(0.0, 1.0, 1.0), &grid).unwrap();
        let p8 = b.pow_capped(8, 64).unwrap();
        assert_eq!(p8.degree(), 8);
        let err = p8.mul_capped(&p8, 10).unwrap_err();
        assert!(matches!(err, WickError::BudgetExceeded { degree: 16, cap: 10 }));
        let err = p8.wick_mul_capped(&p8, 10).unwrap_err();
        assert!(matches!(err, WickError::BudgetExceeded { .. }));
    }

    #[test]
    fn json_round_trip() {
        let grid = Grid::new(vec![0.0, 0.5, 1.0]).unwrap();
        let g = make_step(&[(0.0, 1.0, 0.8)]).unwrap();
        let h = make_step(&[(0.5, 1.0, -1.0)]).unwrap();
        let x = GepElement::wick_exp(&g, &grid)
            .unwrap()
            .mul(&GepElement::wiener(&h, &grid).unwrap())
            .unwrap();
        let js = serde_json::to_string(&x).unwrap();
        let back: GepElement = serde_json::from_str(&js).unwrap();
        assert!(x.approx_eq(&back, 1e-15));
    }
}
