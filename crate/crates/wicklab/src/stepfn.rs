//! Deterministic layer: step functions on left half-open intervals, the
//! grids they resolve on, and interval partitions for Riemann sums.
//!
//! A [`StepFunction`] is a finite sum of scaled indicators `v * 1_{(lo, hi]}`
//! kept in canonical form: intervals sorted, pairwise disjoint, zero pieces
//! dropped and touching pieces with equal values merged. Two canonical step
//! functions represent the same λ-a.e. function iff their interval sequences
//! are identical.

use serde::{Deserialize, Serialize};

use crate::error::{Result, WickError};

/// Tolerance for treating two breakpoints (or grid times) as equal.
pub const TAU_SYM: f64 = 1e-12;

/// One maximal interval of constancy, `value` on `(lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub value: f64,
}

/// A real step function with left half-open pieces, in canonical form.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepFunction {
    intervals: Vec<Interval>,
}

impl StepFunction {
    /// The zero function (empty interval sequence).
    pub fn zero() -> Self {
        StepFunction { intervals: Vec::new() }
    }

    /// `value * 1_{(lo, hi]}`.
    pub fn indicator(lo: f64, hi: f64, value: f64) -> Result<Self> {
        make_step(&[(lo, hi, value)])
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn is_zero(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Pointwise value at `t` (pieces are left-open, right-closed).
    pub fn value_at(&self, t: f64) -> f64 {
        for iv in &self.intervals {
            if t > iv.lo && t <= iv.hi {
                return iv.value;
            }
        }
        0.0
    }

    /// Right end of the support, 0 for the zero function.
    pub fn support_end(&self) -> f64 {
        self.intervals.last().map_or(0.0, |iv| iv.hi)
    }

    pub fn scale(&self, c: f64) -> Self {
        if c == 0.0 {
            return StepFunction::zero();
        }
        StepFunction {
            intervals: self
                .intervals
                .iter()
                .map(|iv| Interval { value: c * iv.value, ..*iv })
                .collect(),
        }
    }

    /// Pointwise (λ-a.e.) sum of two step functions.
    pub fn add(&self, other: &Self) -> Self {
        let pieces: Vec<(f64, f64, f64)> = self
            .intervals
            .iter()
            .chain(other.intervals.iter())
            .map(|iv| (iv.lo, iv.hi, iv.value))
            .collect();
        // canonical inputs are always valid pieces
        make_step(&pieces).expect("canonical pieces are valid")
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    /// L²([0,∞)) inner product `∫ f g dλ`, exact over the common refinement.
    pub fn inner(&self, other: &Self) -> f64 {
        let mut cuts: Vec<f64> = Vec::with_capacity(2 * (self.intervals.len() + other.intervals.len()));
        for iv in self.intervals.iter().chain(other.intervals.iter()) {
            cuts.push(iv.lo);
            cuts.push(iv.hi);
        }
        dedup_sorted(&mut cuts);
        let mut acc = 0.0;
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let mid = 0.5 * (lo + hi);
            let prod = self.value_at(mid) * other.value_at(mid);
            if prod != 0.0 {
                acc += prod * (hi - lo);
            }
        }
        acc
    }

    /// `‖f‖² = ⟨f, f⟩`.
    pub fn norm_sq(&self) -> f64 {
        self.inner(self)
    }

    /// `f · 1_{[0, t)}`; the single point `t` is λ-null, so the result is
    /// stored with the usual (lo, hi] pieces.
    pub fn restrict_before(&self, t: f64) -> Self {
        let mut out = Vec::new();
        for iv in &self.intervals {
            if iv.lo + TAU_SYM < t {
                out.push(Interval { lo: iv.lo, hi: iv.hi.min(t), value: iv.value });
            }
        }
        StepFunction { intervals: out }
    }

    /// `f · 1_{(t, ∞)}`.
    pub fn restrict_after(&self, t: f64) -> Self {
        let mut out = Vec::new();
        for iv in &self.intervals {
            if iv.hi > t + TAU_SYM {
                out.push(Interval { lo: iv.lo.max(t), hi: iv.hi, value: iv.value });
            }
        }
        StepFunction { intervals: out }
    }

    /// All interval endpoints (canonical breakpoints).
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut bs = Vec::with_capacity(2 * self.intervals.len());
        for iv in &self.intervals {
            bs.push(iv.lo);
            bs.push(iv.hi);
        }
        dedup_sorted(&mut bs);
        bs
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        let d = self.sub(other);
        d.intervals.iter().all(|iv| iv.value.abs() <= tol)
    }
}

/// Builds the canonical step function `Σ value_j 1_{(lo_j, hi_j]}`.
/// Overlapping pieces add.
pub fn make_step(pieces: &[(f64, f64, f64)]) -> Result<StepFunction> {
    for &(lo, hi, value) in pieces {
        if !lo.is_finite() || !hi.is_finite() {
            return Err(WickError::NonFinite(if lo.is_finite() { hi } else { lo }));
        }
        if !value.is_finite() {
            return Err(WickError::NonFinite(value));
        }
        if lo < 0.0 || hi <= lo {
            return Err(WickError::InvalidInterval { lo, hi });
        }
    }
    let mut cuts: Vec<f64> = pieces.iter().flat_map(|&(lo, hi, _)| [lo, hi]).collect();
    dedup_sorted(&mut cuts);

    let mut intervals = Vec::new();
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let mid = 0.5 * (lo + hi);
        let mut value = 0.0;
        for &(plo, phi, v) in pieces {
            if plo <= mid && mid <= phi {
                value += v;
            }
        }
        if value != 0.0 {
            intervals.push(Interval { lo, hi, value });
        }
    }
    merge_adjacent(&mut intervals);
    Ok(StepFunction { intervals })
}

fn dedup_sorted(xs: &mut Vec<f64>) {
    xs.sort_by(f64::total_cmp);
    xs.dedup_by(|b, a| (*b - *a).abs() <= TAU_SYM);
}

fn merge_adjacent(intervals: &mut Vec<Interval>) {
    let mut out: Vec<Interval> = Vec::with_capacity(intervals.len());
    for iv in intervals.drain(..) {
        match out.last_mut() {
            Some(prev) if (prev.hi - iv.lo).abs() <= TAU_SYM && prev.value == iv.value => {
                prev.hi = iv.hi;
            }
            _ => out.push(iv),
        }
    }
    *intervals = out;
}

impl Serialize for StepFunction {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        self.intervals.serialize(ser)
    }
}

impl<'de> Deserialize<'de> for StepFunction {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let pieces: Vec<Interval> = Vec::deserialize(de)?;
        let triples: Vec<(f64, f64, f64)> =
            pieces.iter().map(|iv| (iv.lo, iv.hi, iv.value)).collect();
        make_step(&triples).map_err(serde::de::Error::custom)
    }
}

/// A discretization carrier: strictly increasing times `0 = t_0 < … < t_m`.
///
/// A step function is *resolved* on a grid iff it is constant on every cell
/// `(t_{i-1}, t_i]` and zero beyond `t_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    times: Vec<f64>,
}

impl Grid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(WickError::InvalidGrid("a grid needs at least two times"));
        }
        if !times[0].is_finite() || times[0].abs() > TAU_SYM {
            return Err(WickError::InvalidGrid("grid must start at t = 0"));
        }
        for w in times.windows(2) {
            if !w[1].is_finite() || w[1] - w[0] <= TAU_SYM {
                return Err(WickError::InvalidGrid("grid times must be strictly increasing"));
            }
        }
        let mut times = times;
        times[0] = 0.0;
        Ok(Grid { times })
    }

    /// Uniform grid with `n` cells on `[0, horizon]`.
    pub fn uniform(horizon: f64, n: usize) -> Result<Self> {
        if n == 0 || horizon <= 0.0 {
            return Err(WickError::InvalidGrid("uniform grid needs n >= 1, horizon > 0"));
        }
        Grid::new((0..=n).map(|i| horizon * i as f64 / n as f64).collect())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn n_cells(&self) -> usize {
        self.times.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Cell widths Δt_i, i = 1..m (0-indexed).
    pub fn dt(&self, cell: usize) -> f64 {
        self.times[cell + 1] - self.times[cell]
    }

    pub fn cell_bounds(&self, cell: usize) -> (f64, f64) {
        (self.times[cell], self.times[cell + 1])
    }

    /// Index of `t` among the grid times, within tolerance.
    pub fn time_index(&self, t: f64) -> Option<usize> {
        match self.times.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(i) => Some(i),
            Err(i) => {
                if i < self.times.len() && (self.times[i] - t).abs() <= TAU_SYM {
                    Some(i)
                } else if i > 0 && (self.times[i - 1] - t).abs() <= TAU_SYM {
                    Some(i - 1)
                } else {
                    None
                }
            }
        }
    }

    pub fn is_resolved(&self, f: &StepFunction) -> bool {
        if f.support_end() > self.horizon() + TAU_SYM {
            return false;
        }
        f.breakpoints().iter().all(|&b| self.time_index(b).is_some())
    }

    /// Per-cell values of a resolved step function.
    pub fn cell_values(&self, f: &StepFunction) -> Result<Vec<f64>> {
        if !self.is_resolved(f) {
            return Err(WickError::NotResolved);
        }
        Ok((0..self.n_cells())
            .map(|i| {
                let (lo, hi) = self.cell_bounds(i);
                f.value_at(0.5 * (lo + hi))
            })
            .collect())
    }
}

/// Minimal grid on which every input step function is resolved.
pub fn common_grid(fs: &[StepFunction], horizon: f64) -> Result<Grid> {
    if horizon <= 0.0 || !horizon.is_finite() {
        return Err(WickError::InvalidGrid("horizon must be positive and finite"));
    }
    for f in fs {
        if f.support_end() > horizon + TAU_SYM {
            return Err(WickError::HorizonTooSmall { horizon, support_end: f.support_end() });
        }
    }
    let mut times = vec![0.0, horizon];
    for f in fs {
        times.extend(f.breakpoints());
    }
    dedup_sorted(&mut times);
    Grid::new(times)
}

/// Partition `a = s_0 < … < s_n = b` of a compact interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    points: Vec<f64>,
}

impl Partition {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(WickError::InvalidGrid("a partition needs at least two points"));
        }
        if points[0] < 0.0 {
            return Err(WickError::InvalidInterval { lo: points[0], hi: *points.last().unwrap() });
        }
        for w in points.windows(2) {
            if !w[1].is_finite() || w[1] - w[0] <= TAU_SYM {
                return Err(WickError::InvalidGrid("partition points must be strictly increasing"));
            }
        }
        Ok(Partition { points })
    }

    pub fn uniform(a: f64, b: f64, n: usize) -> Result<Self> {
        if n == 0 || b <= a {
            return Err(WickError::InvalidInterval { lo: a, hi: b });
        }
        Partition::new((0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect())
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn a(&self) -> f64 {
        self.points[0]
    }

    pub fn b(&self) -> f64 {
        *self.points.last().unwrap()
    }

    pub fn n_cells(&self) -> usize {
        self.points.len() - 1
    }

    /// Mesh ‖Δ‖ = max cell width.
    pub fn mesh(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Refinement inserting every cell midpoint (halves the mesh).
    pub fn refine_halving(&self) -> Partition {
        let mut pts = Vec::with_capacity(2 * self.points.len());
        for w in self.points.windows(2) {
            pts.push(w[0]);
            pts.push(0.5 * (w[0] + w[1]));
        }
        pts.push(self.b());
        Partition { points: pts }
    }

    /// True iff all partition points are grid times.
    pub fn is_on_grid(&self, grid: &Grid) -> bool {
        self.points.iter().all(|&p| grid.time_index(p).is_some())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ind(lo: f64, hi: f64, v: f64) -> StepFunction {
        StepFunction::indicator(lo, hi, v).unwrap()
    }

    #[test]
    fn make_step_single_indicator() {
        let f = ind(0.0, 1.0, 1.0);
        assert_eq!(f.intervals().len(), 1);
        assert_eq!(f.value_at(0.5), 1.0);
        assert_eq!(f.value_at(0.0), 0.0); // left-open
        assert_eq!(f.value_at(1.0), 1.0); // right-closed
    }

    #[test]
    fn make_step_overlaps_sum_and_cancel() {
        // pointwise-sum oracle on a lattice of sample points
        let pieces = [(0.0, 2.0, 1.0), (1.0, 2.0, -1.0)];
        let f = make_step(&pieces).unwrap();
        let expected = ind(0.0, 1.0, 1.0);
        assert_eq!(f, expected);
        for k in 1..=400 {
            let t = 0.005 * k as f64;
            let direct: f64 = pieces
                .iter()
                .map(|&(lo, hi, v)| if t > lo && t <= hi { v } else { 0.0 })
                .sum();
            assert_eq!(f.value_at(t), direct, "mismatch at t = {t}");
        }
    }

    #[test]
    fn make_step_empty_is_zero() {
        let f = make_step(&[]).unwrap();
        assert!(f.is_zero());
        assert_eq!(f.support_end(), 0.0);
    }

    #[test]
    fn make_step_rejects_bad_pieces() {
        assert!(make_step(&[(-0.5, 1.0, 1.0)]).is_err());
        assert!(make_step(&[(1.0, 1.0, 1.0)]).is_err());
        assert!(make_step(&[(2.0, 1.0, 1.0)]).is_err());
        assert!(make_step(&[(0.0, 1.0, f64::NAN)]).is_err());
        assert!(make_step(&[(0.0, f64::INFINITY, 1.0)]).is_err());
    }

    #[test]
    fn canonicalization_is_idempotent() {
        let f = make_step(&[(0.0, 1.0, 2.0), (1.0, 2.0, 2.0), (0.5, 1.5, 0.0)]).unwrap();
        // touching equal-valued pieces merge into one
        assert_eq!(f.intervals().len(), 1);
        let again = make_step(
            &f.intervals().iter().map(|iv| (iv.lo, iv.hi, iv.value)).collect::<Vec<_>>(),
        )
        .unwrap();
        assert_eq!(f, again);
    }

    #[test]
    fn inner_products() {
        assert_eq!(ind(0.0, 1.0, 1.0).inner(&ind(0.0, 1.0, 2.0)), 2.0);
        assert_eq!(ind(0.0, 1.0, 1.0).inner(&ind(1.0, 2.0, 1.0)), 0.0);
        // overlap length times product of values
        assert_eq!(ind(0.0, 2.0, 1.0).inner(&ind(1.0, 3.0, 3.0)), 3.0);
    }

    #[test]
    fn restrict_splits() {
        let g = ind(0.0, 2.0, 1.0);
        assert_eq!(g.restrict_before(1.0), ind(0.0, 1.0, 1.0));
        assert_eq!(g.restrict_after(1.0), ind(1.0, 2.0, 1.0));
        assert_eq!(g.restrict_before(0.0), StepFunction::zero());
        assert_eq!(g.restrict_after(0.0), g);
        assert_eq!(g.restrict_before(5.0), g);
        assert_eq!(g.restrict_after(5.0), StepFunction::zero());
    }

    #[test]
    fn common_grid_examples() {
        let g = common_grid(&[ind(0.0, 1.0, 1.0)], 1.0).unwrap();
        assert_eq!(g.times(), &[0.0, 1.0]);
        let g = common_grid(&[ind(0.0, 1.0, 1.0), ind(0.5, 2.0, 1.0)], 2.0).unwrap();
        assert_eq!(g.times(), &[0.0, 0.5, 1.0, 2.0]);
        let g = common_grid(&[], 1.0).unwrap();
        assert_eq!(g.times(), &[0.0, 1.0]);
        assert!(common_grid(&[ind(0.0, 3.0, 1.0)], 2.0).is_err());
    }

    #[test]
    fn grid_resolution() {
        let grid = Grid::new(vec![0.0, 0.5, 1.0, 2.0]).unwrap();
        assert!(grid.is_resolved(&ind(0.0, 1.0, 3.0)));
        assert!(!grid.is_resolved(&ind(0.0, 0.7, 1.0)));
        assert!(!grid.is_resolved(&ind(0.0, 3.0, 1.0)));
        assert_eq!(grid.cell_values(&ind(0.5, 2.0, 2.0)).unwrap(), vec![0.0, 2.0, 2.0]);
    }

    #[test]
    fn step_function_json_round_trip() {
        let f = make_step(&[(0.0, 1.0, 1.5), (2.0, 3.0, -0.5)]).unwrap();
        let js = serde_json::to_string(&f).unwrap();
        let back: StepFunction = serde_json::from_str(&js).unwrap();
        assert_eq!(f, back);
        // canonical form on write: overlapping input canonicalizes
        let raw = r#"[{"lo":0.0,"hi":2.0,"value":1.0},{"lo":1.0,"hi":2.0,"value":-1.0}]"#;
        let g: StepFunction = serde_json::from_str(raw).unwrap();
        assert_eq!(g, ind(0.0, 1.0, 1.0));
    }

    #[test]
    fn partition_basics() {
        let p = Partition::uniform(0.0, 1.0, 4).unwrap();
        assert_eq!(p.mesh(), 0.25);
        let r = p.refine_halving();
        assert_eq!(r.n_cells(), 8);
        // refinement contains all coarse points
        for pt in p.points() {
            assert!(r.points().iter().any(|q| (q - pt).abs() <= TAU_SYM));
        }
        assert!((r.mesh() - 0.125).abs() <= TAU_SYM);
    }

    prop_compose! {
        fn arb_step()(n in 0usize..6)(
            pieces in proptest::collection::vec(
                (0.0f64..4.0, 0.01f64..2.0, -2.0f64..2.0), n..=n)
        ) -> StepFunction {
            let triples: Vec<(f64, f64, f64)> =
                pieces.into_iter().map(|(lo, len, v)| (lo, lo + len, v)).collect();
            make_step(&triples).unwrap()
        }
    }

    proptest! {
        #[test]
        fn inner_symmetric_bilinear(f in arb_step(), g in arb_step(), h in arb_step(),
                                    a in -2.0f64..2.0) {
            prop_assert!((f.inner(&g) - g.inner(&f)).abs() <= 1e-12);
            let lhs = f.scale(a).add(&g).inner(&h);
            let rhs = a * f.inner(&h) + g.inner(&h);
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
        }

        #[test]
        fn cauchy_schwarz(f in arb_step(), g in arb_step()) {
            let lhs = f.inner(&g).powi(2);
            let rhs = f.norm_sq() * g.norm_sq();
            prop_assert!(lhs <= rhs + 1e-9 * (1.0 + rhs));
        }

        #[test]
        fn restrict_is_orthogonal_split(f in arb_step(), t in 0.0f64..5.0) {
            let before = f.restrict_before(t);
            let after = f.restrict_after(t);
            prop_assert!(before.add(&after).approx_eq(&f, 1e-12));
            prop_assert!(before.inner(&after).abs() <= 1e-12);
            let sum = before.norm_sq() + after.norm_sq();
            prop_assert!((f.norm_sq() - sum).abs() <= 1e-9 * (1.0 + sum));
        }

        #[test]
        fn common_grid_resolves_inputs(f in arb_step(), g in arb_step()) {
            let horizon = f.support_end().max(g.support_end()).max(1.0);
            let grid = common_grid(&[f.clone(), g.clone()], horizon).unwrap();
            prop_assert!(grid.is_resolved(&f));
            prop_assert!(grid.is_resolved(&g));
            // constant per cell: sample two interior points of every cell
            for i in 0..grid.n_cells() {
                let (lo, hi) = grid.cell_bounds(i);
                let (u, v) = (lo + 0.25 * (hi - lo), lo + 0.75 * (hi - lo));
                prop_assert_eq!(f.value_at(u), f.value_at(v));
                prop_assert_eq!(g.value_at(u), g.value_at(v));
            }
        }
    }
}
