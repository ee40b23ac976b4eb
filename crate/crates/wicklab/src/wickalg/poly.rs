//! Sparse multivariate polynomials in the standardized cell coordinates
//! `Z_1..Z_m`, stored as a map multi-index → coefficient.

use std::collections::BTreeMap;
use std::fmt;

/// Sorted `(variable, exponent)` pairs with positive exponents; the empty
/// index is the constant monomial.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct MultiIndex(Vec<(u32, u32)>);

impl MultiIndex {
    pub fn unit() -> Self {
        MultiIndex(Vec::new())
    }

    pub fn single(var: u32, exp: u32) -> Self {
        if exp == 0 {
            MultiIndex::unit()
        } else {
            MultiIndex(vec![(var, exp)])
        }
    }

    pub fn pairs(&self) -> &[(u32, u32)] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|&(_, e)| e).sum()
    }

    pub fn exponent_of(&self, var: u32) -> u32 {
        self.0
            .iter()
            .find_map(|&(v, e)| (v == var).then_some(e))
            .unwrap_or(0)
    }

    /// Exponent-wise sum (monomial multiplication).
    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() || j < other.0.len() {
            match (self.0.get(i), other.0.get(j)) {
                (Some(&(va, ea)), Some(&(vb, eb))) if va == vb => {
                    out.push((va, ea + eb));
                    i += 1;
                    j += 1;
                }
                (Some(&(va, ea)), Some(&(vb, _))) if va < vb => {
                    out.push((va, ea));
                    i += 1;
                }
                (Some(_), Some(&(vb, eb))) => {
                    out.push((vb, eb));
                    j += 1;
                }
                (Some(&p), None) => {
                    out.push(p);
                    i += 1;
                }
                (None, Some(&p)) => {
                    out.push(p);
                    j += 1;
                }
                (None, None) => unreachable!(),
            }
        }
        MultiIndex(out)
    }

    /// Replaces the exponent of `var` (removing it when `exp` = 0).
    pub fn with_exponent(&self, var: u32, exp: u32) -> Self {
        let mut out: Vec<(u32, u32)> =
            self.0.iter().copied().filter(|&(v, _)| v != var).collect();
        if exp > 0 {
            let pos = out.partition_point(|&(v, _)| v < var);
            out.insert(pos, (var, exp));
        }
        MultiIndex(out)
    }
}

/// Sparse polynomial `Σ c_α Z^α`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparsePoly {
    terms: BTreeMap<MultiIndex, f64>,
}

impl SparsePoly {
    pub fn zero() -> Self {
        SparsePoly { terms: BTreeMap::new() }
    }

    pub fn constant(c: f64) -> Self {
        let mut p = SparsePoly::zero();
        p.add_monomial(MultiIndex::unit(), c);
        p
    }

    pub fn one() -> Self {
        SparsePoly::constant(1.0)
    }

    pub fn monomial(mi: MultiIndex, c: f64) -> Self {
        let mut p = SparsePoly::zero();
        p.add_monomial(mi, c);
        p
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, f64)> {
        self.terms.iter().map(|(mi, &c)| (mi, c))
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self.terms.len() {
            0 => Some(0.0),
            1 => {
                let (mi, &c) = self.terms.iter().next().unwrap();
                (mi.degree() == 0).then_some(c)
            }
            _ => None,
        }
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(MultiIndex::degree).max().unwrap_or(0)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn add_monomial(&mut self, mi: MultiIndex, c: f64) {
        if c == 0.0 {
            return;
        }
        let entry = self.terms.entry(mi).or_insert(0.0);
        *entry += c;
        if *entry == 0.0 {
            let key = self
                .terms
                .iter()
                .find_map(|(k, &v)| (v == 0.0).then(|| k.clone()));
            if let Some(k) = key {
                self.terms.remove(&k);
            }
        }
    }

    pub fn add_scaled(&mut self, other: &Self, c: f64) {
        for (mi, oc) in other.terms() {
            self.add_monomial(mi.clone(), c * oc);
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = SparsePoly::zero();
        out.add_scaled(self, c);
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = SparsePoly::zero();
        for (ma, ca) in self.terms() {
            for (mb, cb) in other.terms() {
                out.add_monomial(ma.mul(mb), ca * cb);
            }
        }
        out
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        self.terms()
            .map(|(mi, c)| {
                let mut v = c;
                for &(var, e) in mi.pairs() {
                    v *= z[var as usize].powi(e as i32);
                }
                v
            })
            .sum()
    }

    /// ∂/∂Z_var.
    pub fn partial(&self, var: u32) -> Self {
        let mut out = SparsePoly::zero();
        for (mi, c) in self.terms() {
            let e = mi.exponent_of(var);
            if e > 0 {
                out.add_monomial(mi.with_exponent(var, e - 1), c * e as f64);
            }
        }
        out
    }

    /// `P(Z + a)` for a dense shift vector indexed by variable.
    pub fn shift(&self, a: &[f64]) -> Self {
        if a.iter().all(|&x| x == 0.0) {
            return self.clone();
        }
        let mut out = SparsePoly::zero();
        for (mi, c) in self.terms() {
            let mut acc: Vec<(MultiIndex, f64)> = vec![(MultiIndex::unit(), c)];
            for &(var, e) in mi.pairs() {
                let s = a[var as usize];
                if s == 0.0 {
                    for item in &mut acc {
                        item.0 = item.0.with_exponent(var, e);
                    }
                    continue;
                }
                let mut next = Vec::with_capacity(acc.len() * (e as usize + 1));
                // (Z + s)^e = Σ_k C(e,k) s^(e-k) Z^k
                let mut binom = 1.0;
                let mut spow = s.powi(e as i32);
                for k in 0..=e {
                    let w = binom * spow;
                    for (pmi, pc) in &acc {
                        next.push((pmi.with_exponent(var, k), pc * w));
                    }
                    binom *= (e - k) as f64 / (k + 1) as f64;
                    spow /= s;
                }
                acc = next;
            }
            for (m, v) in acc {
                out.add_monomial(m, v);
            }
        }
        out
    }

    /// `E[P(Z + a)]` for independent standard normal `Z`, in closed form via
    /// the N(a,1) moment recurrence `m_n = a m_{n-1} + (n-1) m_{n-2}`.
    pub fn expect_shifted(&self, a: &[f64]) -> f64 {
        self.terms()
            .map(|(mi, c)| {
                let mut v = c;
                for &(var, e) in mi.pairs() {
                    v *= normal_moment(e, a.get(var as usize).copied().unwrap_or(0.0));
                }
                v
            })
            .sum()
    }

    /// Rewrites from the monomial basis into the variance-1 Hermite basis;
    /// the returned multi-indices are Hermite degrees per coordinate.
    pub fn to_hermite(&self) -> Self {
        self.change_basis(&monomial_in_hermite_rows(self.max_var_exponent()))
    }

    /// Inverse of [`SparsePoly::to_hermite`].
    pub fn from_hermite(&self) -> Self {
        self.change_basis(&hermite_in_monomial_rows(self.max_var_exponent()))
    }

    fn max_var_exponent(&self) -> u32 {
        self.terms
            .keys()
            .flat_map(|mi| mi.pairs().iter().map(|&(_, e)| e))
            .max()
            .unwrap_or(0)
    }

    fn change_basis(&self, rows: &[Vec<f64>]) -> Self {
        let mut out = SparsePoly::zero();
        for (mi, c) in self.terms() {
            let mut acc: Vec<(MultiIndex, f64)> = vec![(MultiIndex::unit(), c)];
            for &(var, e) in mi.pairs() {
                let row = &rows[e as usize];
                let mut next = Vec::with_capacity(acc.len() * row.len());
                for (k, &w) in row.iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    for (pmi, pc) in &acc {
                        next.push((pmi.with_exponent(var, k as u32), pc * w));
                    }
                }
                acc = next;
            }
            for (m, v) in acc {
                out.add_monomial(m, v);
            }
        }
        out
    }
}

impl fmt::Display for SparsePoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (mi, c) in self.terms() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{c:.6}")?;
            for &(v, e) in mi.pairs() {
                if e == 1 {
                    write!(f, "*Z{}", v + 1)?;
                } else {
                    write!(f, "*Z{}^{}", v + 1, e)?;
                }
            }
        }
        Ok(())
    }
}

/// `E[(Z + a)^n]` for standard normal `Z`.
pub fn normal_moment(n: u32, a: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, a);
    if n == 0 {
        return 1.0;
    }
    for k in 2..=n {
        let next = a * cur + (k - 1) as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Rows 0..=n: coefficients of `x^k` in the variance-1 Hermite basis,
/// `x^k = Σ_j rows[k][j] H_j(x)`.
fn monomial_in_hermite_rows(n: u32) -> Vec<Vec<f64>> {
    let n = n as usize;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    rows.push(vec![1.0]);
    for k in 1..=n {
        let prev = &rows[k - 1];
        let mut row = vec![0.0; k + 1];
        // x * H_j = H_{j+1} + j H_{j-1}
        for (j, &c) in prev.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            row[j + 1] += c;
            if j >= 1 {
                row[j - 1] += c * j as f64;
            }
        }
        rows.push(row);
    }
    rows
}

/// Rows 0..=n: monomial coefficients of `H_k(x)` (variance 1),
/// `H_k(x) = Σ_j rows[k][j] x^j`.
fn hermite_in_monomial_rows(n: u32) -> Vec<Vec<f64>> {
    let n = n as usize;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    rows.push(vec![1.0]);
    if n >= 1 {
        rows.push(vec![0.0, 1.0]);
    }
    for k in 2..=n {
        let mut row = vec![0.0; k + 1];
        // H_k = x H_{k-1} - (k-1) H_{k-2}
        for (j, &c) in rows[k - 1].iter().enumerate() {
            row[j + 1] += c;
        }
        for (j, &c) in rows[k - 2].iter().enumerate() {
            row[j] -= (k - 1) as f64 * c;
        }
        rows.push(row);
    }
    rows
}
