//! Variance-parameterized Hermite polynomials `h^k_t`, the Wick-power
//! analogue of monomials: `h^0 = 1`, `h^1 = x`, and
//! `h^{k+1}_t(x) = x h^k_t(x) - k t h^{k-1}_t(x)`.

/// Evaluates `h^k_t(x)` by the three-term recursion.
pub fn hermite_eval(k: u32, t: f64, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    if k == 0 {
        return 1.0;
    }
    for j in 1..k {
        let next = x * cur - j as f64 * t * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// A finite combination `Σ_k coeffs[k] h^k_t(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteCoeffs {
    pub t: f64,
    pub coeffs: Vec<f64>,
}

impl HermiteCoeffs {
    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, &c)| c * hermite_eval(k as u32, self.t, x))
            .sum()
    }

    /// Monomial coefficients of the same polynomial (index = power of x).
    pub fn to_monomial(&self) -> Vec<f64> {
        let rows = hermite_rows(self.coeffs.len().saturating_sub(1) as u32, self.t);
        let mut out = vec![0.0; self.coeffs.len().max(1)];
        for (k, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            for (j, &w) in rows[k].iter().enumerate() {
                out[j] += c * w;
            }
        }
        out
    }
}

/// Expands `x^n = Σ_k c_k h^k_t(x)` exactly (an upper-triangular change of
/// basis in each degree).
pub fn monomial_to_hermite(n: u32, t: f64) -> HermiteCoeffs {
    let mut row = vec![1.0];
    for _ in 0..n {
        // x * h^j_t = h^{j+1}_t + j t h^{j-1}_t
        let mut next = vec![0.0; row.len() + 1];
        for (j, &c) in row.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            next[j + 1] += c;
            if j >= 1 {
                next[j - 1] += c * j as f64 * t;
            }
        }
        row = next;
    }
    HermiteCoeffs { t, coeffs: row }
}

/// Monomial coefficient rows of `h^0_t .. h^n_t`.
pub fn hermite_rows(n: u32, t: f64) -> Vec<Vec<f64>> {
    let n = n as usize;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    rows.push(vec![1.0]);
    if n >= 1 {
        rows.push(vec![0.0, 1.0]);
    }
    for k in 2..=n {
        let mut row = vec![0.0; k + 1];
        for (j, &c) in rows[k - 1].iter().enumerate() {
            row[j + 1] += c;
        }
        for (j, &c) in rows[k - 2].iter().enumerate() {
            row[j] -= (k - 1) as f64 * t * c;
        }
        rows.push(row);
    }
    rows
}
