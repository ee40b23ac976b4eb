//! Seeded generators for randomized verification inputs: grids, step
//! functions resolved on them, algebra elements and elementary processes.
//! Magnitudes are kept moderate so closed-form exponentials stay well
//! inside double precision.

use crate::rng::{mix64, standard_normal, uniform_open};
use crate::stepfn::{Grid, StepFunction};
use crate::wickalg::poly::{MultiIndex, SparsePoly};
use crate::wickalg::GepElement;
use crate::{ElementaryProcess, Result};

/// Deterministic input generator: a seeded counter stream.
pub struct Synth {
    seed: u64,
    ctr: u64,
}

impl Synth {
    pub fn new(seed: u64) -> Self {
        Synth { seed: mix64(seed ^ 0x5eed_5eed_5eed_5eed), ctr: 0 }
    }

    fn next_uniform(&mut self) -> f64 {
        self.ctr += 1;
        uniform_open(self.seed, self.ctr)
    }

    fn next_normal(&mut self) -> f64 {
        self.ctr += 2;
        standard_normal(self.seed, self.ctr)
    }

    pub fn in_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_uniform()
    }

    pub fn index(&mut self, n: usize) -> usize {
        (self.next_uniform() * n as f64) as usize % n.max(1)
    }

    /// Grid with 1..=max_cells cells of uneven widths on [0, horizon].
    pub fn grid(&mut self, max_cells: usize, horizon: f64) -> Grid {
        let m = 1 + self.index(max_cells);
        let mut gaps: Vec<f64> = (0..m).map(|_| 0.05 + self.next_uniform()).collect();
        let total: f64 = gaps.iter().sum();
        for g in &mut gaps {
            *g *= horizon / total;
        }
        let mut times = Vec::with_capacity(m + 1);
        times.push(0.0);
        let mut acc = 0.0;
        for g in gaps {
            acc += g;
            times.push(acc);
        }
        *times.last_mut().unwrap() = horizon;
        Grid::new(times).expect("positive gaps give a valid grid")
    }

    /// Step function resolved on the grid, roughly `density` of cells
    /// nonzero, values in [-scale, scale].
    pub fn step_on_grid(&mut self, grid: &Grid, density: f64, scale: f64) -> StepFunction {
        let mut pieces = Vec::new();
        for i in 0..grid.n_cells() {
            if self.next_uniform() <= density {
                let (lo, hi) = grid.cell_bounds(i);
                pieces.push((lo, hi, self.in_range(-scale, scale)));
            }
        }
        crate::make_step(&pieces).expect("grid cells are valid pieces")
    }

    /// Random algebra element: a few terms with sparse drifts and small
    /// polynomials.
    pub fn gep(&mut self, grid: &Grid, max_terms: usize, max_degree: u32) -> GepElement {
        let m = grid.n_cells();
        let n_terms = 1 + self.index(max_terms);
        let mut parts = Vec::with_capacity(n_terms);
        for _ in 0..n_terms {
            let coeff = self.in_range(0.2, 1.0) * if self.next_uniform() < 0.5 { -1.0 } else { 1.0 };
            let mut drift = vec![0.0; m];
            for d in drift.iter_mut() {
                if self.next_uniform() < 0.4 {
                    *d = self.in_range(-0.5, 0.5);
                }
            }
            let mut poly = SparsePoly::zero();
            let n_monomials = 1 + self.index(3);
            for _ in 0..n_monomials {
                let mut mi = MultiIndex::unit();
                let n_vars = self.index(3);
                for _ in 0..n_vars {
                    let var = self.index(m) as u32;
                    let e = 1 + self.index(max_degree.max(1) as usize) as u32;
                    mi = mi.mul(&MultiIndex::single(var, e.min(max_degree.max(1))));
                }
                poly.add_monomial(mi, self.in_range(-1.0, 1.0));
            }
            if poly.is_zero() {
                poly = SparsePoly::one();
            }
            parts.push((coeff, drift, poly));
        }
        GepElement::from_parts(grid.clone(), parts).expect("synthesized parts are valid")
    }

    /// Random elementary process; `exp_type` restricts factors to Wick
    /// exponentials.
    pub fn elementary(
        &mut self,
        grid: &Grid,
        max_summands: usize,
        exp_type: bool,
    ) -> Result<ElementaryProcess> {
        let n = 1 + self.index(max_summands);
        let mut summands = Vec::with_capacity(n);
        for _ in 0..n {
            let f = if exp_type {
                let g = self.step_on_grid(grid, 0.7, 0.8);
                GepElement::wick_exp(&g, grid)?
            } else {
                self.gep(grid, 2, 3)
            };
            let h = self.step_on_grid(grid, 0.8, 1.0);
            summands.push((f, h));
        }
        ElementaryProcess::new(grid.clone(), summands)
    }

    /// Random adapted elementary process: each factor only involves cells
    /// strictly before the support of its weight.
    pub fn adapted_elementary(&mut self, grid: &Grid) -> Result<ElementaryProcess> {
        let m = grid.n_cells();
        let mut summands = Vec::new();
        let n = 1 + self.index(3);
        for _ in 0..n {
            // weight lives on one cell; the factor reads earlier cells only
            let cell = self.index(m);
            let (lo, hi) = grid.cell_bounds(cell);
            let h = StepFunction::indicator(lo, hi, self.in_range(-1.0, 1.0))?;
            let f = if cell == 0 {
                GepElement::constant(grid.clone(), self.in_range(-1.0, 1.0))
            } else {
                // element over the truncated grid, lifted to the full one
                let early = self.step_on_grid_prefix(grid, cell);
                let b = GepElement::wiener(&early, grid)?;
                let c = GepElement::constant(grid.clone(), self.in_range(-0.6, 0.6));
                let w = self.step_on_grid_prefix(grid, cell);
                let we = GepElement::wick_exp(&w, grid)?;
                we.mul(&b.add(&c)?)?
            };
            summands.push((f, h));
        }
        ElementaryProcess::new(grid.clone(), summands)
    }

    fn step_on_grid_prefix(&mut self, grid: &Grid, end_cell: usize) -> StepFunction {
        let mut pieces = Vec::new();
        for i in 0..end_cell {
            if self.next_uniform() < 0.7 {
                let (lo, hi) = grid.cell_bounds(i);
                pieces.push((lo, hi, self.in_range(-0.8, 0.8)));
            }
        }
        crate::make_step(&pieces).expect("grid cells are valid pieces")
    }

    pub fn normal(&mut self) -> f64 {
        self.next_normal()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_deterministic_and_valid() {
        let mut a = Synth::new(42);
        let mut b = Synth::new(42);
        for _ in 0..10 {
            let ga = a.grid(8, 2.0);
            let gb = b.grid(8, 2.0);
            assert_eq!(ga, gb);
            let fa = a.step_on_grid(&ga, 0.8, 1.0);
            let fb = b.step_on_grid(&gb, 0.8, 1.0);
            assert_eq!(fa, fb);
            assert!(ga.is_resolved(&fa));
            let xa = a.gep(&ga, 3, 3);
            let xb = b.gep(&gb, 3, 3);
            assert!(xa.approx_eq(&xb, 0.0));
        }
    }

    #[test]
    fn adapted_processes_satisfy_the_predicate() {
        let mut s = Synth::new(7);
        for _ in 0..20 {
            let grid = s.grid(6, 1.5);
            let u = s.adapted_elementary(&grid).unwrap();
            for (f, h) in u.summands() {
                for (i, v) in grid.cell_values(h).unwrap().iter().enumerate() {
                    if *v != 0.0 {
                        let (lo, _) = grid.cell_bounds(i);
                        assert!(f.adapted_before(lo).unwrap());
                    }
                }
            }
        }
    }
}
