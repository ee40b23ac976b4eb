//! Elementary processes `u_t(ω) = Σ_j F_j(ω) h_j(t)` with algebra factors
//! `F_j` and deterministic step weights `h_j`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, WickError};
use crate::stepfn::{Grid, StepFunction};
use crate::wickalg::GepElement;

#[derive(Debug, Clone, PartialEq)]
pub struct ElementaryProcess {
    grid: Grid,
    summands: Vec<(GepElement, StepFunction)>,
}

impl ElementaryProcess {
    pub fn new(grid: Grid, summands: Vec<(GepElement, StepFunction)>) -> Result<Self> {
        for (f, h) in &summands {
            if f.grid() != &grid {
                return Err(WickError::GridMismatch);
            }
            if !grid.is_resolved(h) {
                return Err(WickError::NotResolved);
            }
        }
        Ok(ElementaryProcess { grid, summands })
    }

    /// Single-summand process `F ⊗ h` on the factor's grid.
    pub fn single(f: GepElement, h: StepFunction) -> Result<Self> {
        let grid = f.grid().clone();
        ElementaryProcess::new(grid, vec![(f, h)])
    }

    pub fn zero(grid: Grid) -> Self {
        ElementaryProcess { grid, summands: Vec::new() }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn summands(&self) -> &[(GepElement, StepFunction)] {
        &self.summands
    }

    pub fn is_zero(&self) -> bool {
        self.summands.is_empty() || self.sections().iter().all(GepElement::is_zero)
    }

    /// True iff the process lies in the Wick-exponential span: every factor
    /// is a combination of pure Wick exponentials (constant polynomials).
    pub fn is_exp_type(&self) -> bool {
        self.summands.iter().all(|(f, _)| {
            f.terms().iter().all(|t| t.poly.as_constant().is_some())
        })
    }

    /// The combined algebra element on one grid cell,
    /// `Σ_j h_j(cell i) F_j`.
    pub fn cell_section(&self, cell: usize) -> GepElement {
        let (lo, hi) = self.grid.cell_bounds(cell);
        let mid = 0.5 * (lo + hi);
        let mut acc = GepElement::zero(self.grid.clone());
        for (f, h) in &self.summands {
            let w = h.value_at(mid);
            if w != 0.0 {
                acc = acc.add(&f.scale(w)).expect("same grid");
            }
        }
        acc
    }

    /// Per-cell sections; the canonical form of the process.
    pub fn sections(&self) -> Vec<GepElement> {
        (0..self.grid.n_cells()).map(|i| self.cell_section(i)).collect()
    }

    /// Processes are equal when all their per-cell sections agree.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.grid == other.grid
            && (0..self.grid.n_cells()).all(|i| {
                self.cell_section(i).approx_eq(&other.cell_section(i), tol)
            })
    }

    pub fn scale(&self, c: f64) -> Self {
        ElementaryProcess {
            grid: self.grid.clone(),
            summands: self.summands.iter().map(|(f, h)| (f.scale(c), h.clone())).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.grid != other.grid {
            return Err(WickError::GridMismatch);
        }
        let mut summands = self.summands.clone();
        summands.extend(other.summands.iter().cloned());
        Ok(ElementaryProcess { grid: self.grid.clone(), summands })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }
}

#[derive(Serialize, Deserialize)]
struct SummandRepr {
    factor: GepElement,
    weight: StepFunction,
}

#[derive(Serialize, Deserialize)]
struct ProcessRepr {
    grid: Grid,
    summands: Vec<SummandRepr>,
}

impl Serialize for ElementaryProcess {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ProcessRepr {
            grid: self.grid.clone(),
            summands: self
                .summands
                .iter()
                .map(|(f, h)| SummandRepr { factor: f.clone(), weight: h.clone() })
                .collect(),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for ElementaryProcess {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let repr = ProcessRepr::deserialize(de)?;
        ElementaryProcess::new(
            repr.grid,
            repr.summands.into_iter().map(|s| (s.factor, s.weight)).collect(),
        )
        .map_err(serde::de::Error::custom)
    }
}
