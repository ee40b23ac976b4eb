//! Monte Carlo engine: seeded path ensembles over a grid, pathwise
//! evaluation of algebra elements and black-box functionals, left/right
//! endpoint Riemann sums, coupled mesh-refinement studies and estimators.
//!
//! Reproducibility contract: every draw is a pure function of
//! `(seed, path, cell)`, estimator reductions sum in fixed chunk order, so
//! results are bit-exact across runs and thread schedules.

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WickError};
use crate::report::{
    combine_verdicts, sequence_verdict, ConvergenceReport, DefinitionTag, LimitSummary,
    StageRecord, StatPoint, Thresholds,
};
use crate::rng::{standard_normal, substream, TAG_BRIDGE_LEVEL, TAG_BRIDGE_ROOT, TAG_ENSEMBLE};
use crate::stepfn::{Grid, Partition, StepFunction};
use crate::wickalg::GepElement;

const SUM_CHUNK: usize = 4096;

/// Sums in fixed-size chunks combined in index order; the result does not
/// depend on how chunk sums were scheduled.
pub fn stable_sum(xs: &[f64]) -> f64 {
    if xs.len() <= SUM_CHUNK {
        return xs.iter().sum();
    }
    let partials: Vec<f64> = xs
        .par_chunks(SUM_CHUNK)
        .map(|c| c.iter().sum::<f64>())
        .collect();
    partials.iter().sum()
}

pub fn mean(xs: &[f64]) -> f64 {
    stable_sum(xs) / xs.len() as f64
}

/// Seeded matrix of standardized Brownian increments `Z_i = ΔB_i/√Δt_i`
/// (independent standard normals), one row per path.
#[derive(Debug, Clone)]
pub struct PathEnsemble {
    grid: Grid,
    n_paths: usize,
    seed: u64,
    generator: String,
    samples: Vec<f64>,
}

impl PathEnsemble {
    pub(crate) fn from_matrix(
        grid: Grid,
        n_paths: usize,
        seed: u64,
        generator: String,
        samples: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(samples.len(), n_paths * grid.n_cells());
        PathEnsemble { grid, n_paths, seed, generator, samples }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn generator(&self) -> &str {
        &self.generator
    }

    pub fn row(&self, path: usize) -> &[f64] {
        let m = self.grid.n_cells();
        &self.samples[path * m..(path + 1) * m]
    }

    pub fn z(&self, path: usize, cell: usize) -> f64 {
        self.samples[path * self.grid.n_cells() + cell]
    }
}

/// Reproducible iid ensemble: `Z[path][cell]` is a pure function of
/// `(seed, path, cell)`.
pub fn sample_paths(grid: &Grid, n_paths: usize, seed: u64) -> Result<PathEnsemble> {
    if n_paths == 0 {
        return Err(WickError::ZeroPaths);
    }
    let m = grid.n_cells();
    let stream = substream(seed, TAG_ENSEMBLE);
    let mut samples = vec![0.0; n_paths * m];
    samples
        .par_chunks_mut(m)
        .enumerate()
        .for_each(|(path, row)| {
            let base = path as u64 * m as u64;
            for (j, slot) in row.iter_mut().enumerate() {
                *slot = standard_normal(stream, base + j as u64);
            }
        });
    Ok(PathEnsemble::from_matrix(grid.clone(), n_paths, seed, "counter-v1".into(), samples))
}

/// Pathwise values of an algebra element over an ensemble.
pub fn eval_gep(x: &GepElement, paths: &PathEnsemble) -> Result<Vec<f64>> {
    if x.grid() != paths.grid() {
        return Err(WickError::GridMismatch);
    }
    // hoist the drift half-norms out of the path loop
    let prepared: Vec<(f64, &[f64], f64, &crate::wickalg::poly::SparsePoly)> = x
        .terms()
        .iter()
        .map(|t| {
            let half = 0.5 * t.drift.iter().map(|d| d * d).sum::<f64>();
            (t.coeff, t.drift.as_slice(), half, &t.poly)
        })
        .collect();
    let m = paths.grid().n_cells();
    let out: Vec<f64> = paths
        .samples
        .par_chunks(m)
        .map(|z| {
            prepared
                .iter()
                .map(|(c, drift, half, poly)| {
                    let dz: f64 = drift.iter().zip(z).map(|(d, zi)| d * zi).sum();
                    c * (dz - half).exp() * poly.eval(z)
                })
                .sum::<f64>()
        })
        .collect();
    Ok(out)
}

/// One path restricted to a grid: standardized increments, Brownian values
/// at the grid times, and a per-path memo for functional prefix tables.
pub struct PathView<'a> {
    grid: &'a Grid,
    z: Vec<f64>,
    bm: Vec<f64>,
    memo: RefCell<HashMap<u64, Rc<Vec<f64>>>>,
}

impl<'a> PathView<'a> {
    pub fn from_z(grid: &'a Grid, z: &[f64]) -> Self {
        let mut bm = Vec::with_capacity(z.len() + 1);
        bm.push(0.0);
        let mut acc = 0.0;
        for (i, &zi) in z.iter().enumerate() {
            acc += grid.dt(i).sqrt() * zi;
            bm.push(acc);
        }
        PathView { grid, z: z.to_vec(), bm, memo: RefCell::new(HashMap::new()) }
    }

    pub fn from_bm(grid: &'a Grid, bm: Vec<f64>) -> Self {
        let z: Vec<f64> = (0..grid.n_cells())
            .map(|i| (bm[i + 1] - bm[i]) / grid.dt(i).sqrt())
            .collect();
        PathView { grid, z, bm, memo: RefCell::new(HashMap::new()) }
    }

    pub fn grid(&self) -> &Grid {
        self.grid
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    /// Brownian value at grid time index `k` (B_0 = 0).
    pub fn bm_at(&self, k: usize) -> f64 {
        self.bm[k]
    }

    pub fn increment(&self, cell: usize) -> f64 {
        self.bm[cell + 1] - self.bm[cell]
    }

    /// Lazily built per-path table shared between evaluations (keyed by the
    /// owning functional).
    pub fn table(&self, key: u64, build: impl FnOnce(&PathView) -> Vec<f64>) -> Rc<Vec<f64>> {
        if let Some(t) = self.memo.borrow().get(&key) {
            return Rc::clone(t);
        }
        let t = Rc::new(build(self));
        self.memo.borrow_mut().insert(key, Rc::clone(&t));
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionalKind {
    /// Uses only increments of cells ending at or before the evaluation time.
    Adapted,
    /// Uses only increments of cells starting at or after the evaluation time.
    InstantlyIndependent,
}

impl FunctionalKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            FunctionalKind::Adapted => "adapted",
            FunctionalKind::InstantlyIndependent => "instantly independent",
        }
    }
}

type EvalFn = Arc<dyn Fn(&PathView, usize) -> f64 + Send + Sync>;

static NEXT_FUNCTIONAL_ID: AtomicU64 = AtomicU64::new(1);

/// Caller-supplied evaluation rule `(grid time index, path) -> value` with a
/// declared dependence type. The declaration is spot-checked on sampled
/// paths by perturbing the increments the rule must not read.
#[derive(Clone)]
pub struct PathFunctional {
    kind: FunctionalKind,
    name: String,
    eval: EvalFn,
}

impl PathFunctional {
    pub fn new(
        kind: FunctionalKind,
        name: impl Into<String>,
        eval: impl Fn(&PathView, usize) -> f64 + Send + Sync + 'static,
    ) -> Self {
        PathFunctional { kind, name: name.into(), eval: Arc::new(eval) }
    }

    pub fn kind(&self) -> FunctionalKind {
        self.kind
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, view: &PathView, time_idx: usize) -> f64 {
        (self.eval)(view, time_idx)
    }

    pub fn constant(kind: FunctionalKind, c: f64) -> Self {
        PathFunctional::new(kind, format!("const {c}"), move |_, _| c)
    }

    /// `f(t) = B_t`.
    pub fn brownian() -> Self {
        PathFunctional::new(FunctionalKind::Adapted, "B_t", |v, k| v.bm_at(k))
    }

    /// `φ(t) = B_{t_end} - B_t`.
    pub fn terminal_increment(t_end: f64) -> Self {
        PathFunctional::new(
            FunctionalKind::InstantlyIndependent,
            format!("B_{t_end} - B_t"),
            move |v, k| {
                let e = v.grid().time_index(t_end).expect("t_end must be a grid time");
                v.bm_at(e) - v.bm_at(k)
            },
        )
    }

    /// `f(t) = exp(B_t^2)`.
    pub fn exp_sq_brownian() -> Self {
        PathFunctional::new(FunctionalKind::Adapted, "exp(B_t^2)", |v, k| {
            let b = v.bm_at(k);
            (b * b).exp()
        })
    }

    /// `φ(t) = exp((B_{t_end} - B_t)^2)`.
    pub fn exp_sq_terminal_increment(t_end: f64) -> Self {
        PathFunctional::new(
            FunctionalKind::InstantlyIndependent,
            format!("exp((B_{t_end} - B_t)^2)"),
            move |v, k| {
                let e = v.grid().time_index(t_end).expect("t_end must be a grid time");
                let d = v.bm_at(e) - v.bm_at(k);
                (d * d).exp()
            },
        )
    }

    /// Adapted factor of a Wick-exponential integrand:
    /// `f(t) = exp(I(g 1_{[0,t)}) - ||g 1_{[0,t)}||^2 / 2) h(t)`.
    pub fn adapted_wick_part(g: StepFunction, h: StepFunction) -> Self {
        let id = NEXT_FUNCTIONAL_ID.fetch_add(1, Ordering::Relaxed);
        let eval = move |v: &PathView, k: usize| {
            let table = v.table(id, |view| wick_prefix_table(view, &g, true));
            let ht = h.value_at(view_time(v, k));
            if ht == 0.0 {
                0.0
            } else {
                table[k].exp() * ht
            }
        };
        PathFunctional {
            kind: FunctionalKind::Adapted,
            name: "exp◇(I(g·1[0,t)))·h(t)".into(),
            eval: Arc::new(eval),
        }
    }

    /// Instantly independent factor of a Wick-exponential integrand:
    /// `φ(t) = exp(I(g 1_{(t,∞)}) - ||g 1_{(t,∞)}||^2 / 2)`.
    pub fn independent_wick_part(g: StepFunction) -> Self {
        let id = NEXT_FUNCTIONAL_ID.fetch_add(1, Ordering::Relaxed);
        let eval = move |v: &PathView, k: usize| {
            let table = v.table(id, |view| wick_prefix_table(view, &g, false));
            table[k].exp()
        };
        PathFunctional {
            kind: FunctionalKind::InstantlyIndependent,
            name: "exp◇(I(g·1(t,∞)))".into(),
            eval: Arc::new(eval),
        }
    }
}

fn view_time(v: &PathView, k: usize) -> f64 {
    v.grid().times()[k]
}

/// Table of `I(g·window) - ||g·window||^2/2` at every grid time, where the
/// window is `[0, t_k)` (prefix = true) or `(t_k, ∞)` (prefix = false).
fn wick_prefix_table(view: &PathView, g: &StepFunction, prefix: bool) -> Vec<f64> {
    let grid = view.grid();
    let m = grid.n_cells();
    let mut cell_terms = Vec::with_capacity(m);
    for i in 0..m {
        let (lo, hi) = grid.cell_bounds(i);
        let gv = g.value_at(0.5 * (lo + hi));
        let dt = hi - lo;
        cell_terms.push(gv * view.increment(i) - 0.5 * gv * gv * dt);
    }
    let mut out = vec![0.0; m + 1];
    if prefix {
        for i in 0..m {
            out[i + 1] = out[i] + cell_terms[i];
        }
    } else {
        for i in (0..m).rev() {
            out[i] = out[i + 1] + cell_terms[i];
        }
    }
    out
}

/// Left/right endpoint Riemann sums
/// `Σ_i f(t_{i-1}) φ(t_i) (B_{t_i} - B_{t_{i-1}})` per path.
///
/// `f` is evaluated at left endpoints and must be adapted; `φ` is evaluated
/// at right endpoints and must be instantly independent. Both declarations
/// are spot-checked by perturbing out-of-window increments on sampled paths.
pub fn ak_riemann_sum(
    f: &PathFunctional,
    phi: &PathFunctional,
    partition: &Partition,
    paths: &PathEnsemble,
) -> Result<Vec<f64>> {
    if f.kind() != FunctionalKind::Adapted {
        return Err(WickError::FunctionalTypeViolated {
            declared: "adapted",
            t: partition.a(),
        });
    }
    if phi.kind() != FunctionalKind::InstantlyIndependent {
        return Err(WickError::FunctionalTypeViolated {
            declared: "instantly independent",
            t: partition.b(),
        });
    }
    let grid = paths.grid();
    let idxs: Vec<usize> = partition
        .points()
        .iter()
        .map(|&p| grid.time_index(p).ok_or(WickError::PartitionNotOnGrid))
        .collect::<Result<_>>()?;
    spot_check_kinds(f, phi, &idxs, paths)?;

    let m = grid.n_cells();
    let out: Vec<f64> = paths
        .samples
        .par_chunks(m)
        .map(|z| {
            let view = PathView::from_z(grid, z);
            riemann_sum_on_view(f, phi, &idxs, &view)
        })
        .collect();
    Ok(out)
}

fn riemann_sum_on_view(
    f: &PathFunctional,
    phi: &PathFunctional,
    idxs: &[usize],
    view: &PathView,
) -> f64 {
    let mut acc = 0.0;
    for w in idxs.windows(2) {
        let (kl, kr) = (w[0], w[1]);
        let db = view.bm_at(kr) - view.bm_at(kl);
        acc += f.eval(view, kl) * phi.eval(view, kr) * db;
    }
    acc
}

fn spot_check_kinds(
    f: &PathFunctional,
    phi: &PathFunctional,
    idxs: &[usize],
    paths: &PathEnsemble,
) -> Result<()> {
    let grid = paths.grid();
    let n_paths = paths.n_paths().min(3);
    let lefts = sample_indices(&idxs[..idxs.len() - 1]);
    let rights = sample_indices(&idxs[1..]);
    for path in 0..n_paths {
        let z = paths.row(path);
        let view = PathView::from_z(grid, z);
        for &k in &lefts {
            let base = f.eval(&view, k);
            let mut zp = z.to_vec();
            for item in zp.iter_mut().skip(k) {
                *item += 1.75;
            }
            let perturbed = PathView::from_z(grid, &zp);
            let v2 = f.eval(&perturbed, k);
            if (v2 - base).abs() > 1e-8 * (1.0 + base.abs()) {
                return Err(WickError::FunctionalTypeViolated {
                    declared: "adapted",
                    t: grid.times()[k],
                });
            }
        }
        for &k in &rights {
            let base = phi.eval(&view, k);
            let mut zp = z.to_vec();
            for item in zp.iter_mut().take(k) {
                *item += 1.75;
            }
            let perturbed = PathView::from_z(grid, &zp);
            let v2 = phi.eval(&perturbed, k);
            if (v2 - base).abs() > 1e-8 * (1.0 + base.abs()) {
                return Err(WickError::FunctionalTypeViolated {
                    declared: "instantly independent",
                    t: grid.times()[k],
                });
            }
        }
    }
    Ok(())
}

fn sample_indices(idxs: &[usize]) -> Vec<usize> {
    if idxs.len() <= 4 {
        idxs.to_vec()
    } else {
        let step = idxs.len() / 4;
        (0..4).map(|j| idxs[j * step]).chain([idxs[idxs.len() - 1]]).collect()
    }
}

/// Mesh-halving plan: a base partition and the number of resolutions, each
/// halving every cell. An optional horizon pad extends the sampling grid
/// beyond the partition so right-endpoint factors may read post-horizon
/// increments; the default 0 covers integrands whose value at the final
/// time is constant by construction.
#[derive(Debug, Clone)]
pub struct RefinementPlan {
    base: Partition,
    levels: usize,
    horizon_pad: f64,
}

impl RefinementPlan {
    pub fn new(base: Partition, levels: usize) -> Result<Self> {
        if levels < 3 {
            return Err(WickError::TooFewLevels { min: 3, got: levels });
        }
        Ok(RefinementPlan { base, levels, horizon_pad: 0.0 })
    }

    pub fn with_horizon_pad(mut self, pad: f64) -> Self {
        self.horizon_pad = pad;
        self
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn partition_at(&self, level: usize) -> Partition {
        let mut p = self.base.clone();
        for _ in 0..level {
            p = p.refine_halving();
        }
        p
    }

    /// Root sampling grid: `{0} ∪ base points ∪ pad`.
    pub fn root_grid(&self) -> Result<Grid> {
        let mut times = Vec::new();
        if self.base.a() > 0.0 {
            times.push(0.0);
        }
        times.extend_from_slice(self.base.points());
        if self.horizon_pad > 0.0 {
            times.push(self.base.b() + self.horizon_pad);
        }
        if times[0] != 0.0 {
            times.insert(0, 0.0);
        }
        Grid::new(times)
    }
}

/// Brownian paths on dyadic refinements of a root grid, coupled across
/// levels by midpoint (bridge) insertion: a coarse path is the restriction
/// of every finer one, and fresh normals per level come from substreams of
/// the master seed.
pub struct BridgeSampler {
    root: Grid,
    seed: u64,
}

impl BridgeSampler {
    pub fn new(root: Grid, seed: u64) -> Self {
        BridgeSampler { root, seed }
    }

    pub fn grid_at(&self, level: usize) -> Grid {
        let mut times = self.root.times().to_vec();
        for _ in 0..level {
            let mut next = Vec::with_capacity(2 * times.len());
            for w in times.windows(2) {
                next.push(w[0]);
                next.push(0.5 * (w[0] + w[1]));
            }
            next.push(*times.last().unwrap());
            times = next;
        }
        Grid::new(times).expect("refined grid times are valid")
    }

    /// Brownian values at all grid times of `level` for one path.
    pub fn path_values(&self, path: u64, level: usize) -> Vec<f64> {
        let m0 = self.root.n_cells();
        let root_stream = substream(self.seed, TAG_BRIDGE_ROOT);
        let mut b = Vec::with_capacity(m0 + 1);
        b.push(0.0);
        for i in 0..m0 {
            let z = standard_normal(root_stream, path * m0 as u64 + i as u64);
            let db = self.root.dt(i).sqrt() * z;
            b.push(b[i] + db);
        }
        let mut times = self.root.times().to_vec();
        for lev in 1..=level {
            let stream = substream(self.seed, TAG_BRIDGE_LEVEL + lev as u64);
            let cells = times.len() - 1;
            let mut nb = Vec::with_capacity(2 * b.len());
            let mut nt = Vec::with_capacity(2 * times.len());
            for j in 0..cells {
                let dt = times[j + 1] - times[j];
                let xi = standard_normal(stream, path * cells as u64 + j as u64);
                nb.push(b[j]);
                nt.push(times[j]);
                nb.push(0.5 * (b[j] + b[j + 1]) + 0.5 * dt.sqrt() * xi);
                nt.push(0.5 * (times[j] + times[j + 1]));
            }
            nb.push(*b.last().unwrap());
            nt.push(*times.last().unwrap());
            b = nb;
            times = nt;
        }
        b
    }

    /// Materializes the standardized-increment ensemble of one level.
    pub fn ensemble_at(&self, level: usize, n_paths: usize) -> Result<PathEnsemble> {
        if n_paths == 0 {
            return Err(WickError::ZeroPaths);
        }
        let grid = self.grid_at(level);
        let m = grid.n_cells();
        let mut samples = vec![0.0; n_paths * m];
        samples.par_chunks_mut(m).enumerate().for_each(|(path, row)| {
            let b = self.path_values(path as u64, level);
            for (j, slot) in row.iter_mut().enumerate() {
                *slot = (b[j + 1] - b[j]) / grid.dt(j).sqrt();
            }
        });
        Ok(PathEnsemble::from_matrix(
            grid,
            n_paths,
            self.seed,
            format!("bridge-v1/L{level}"),
            samples,
        ))
    }
}

/// Cauchy-in-probability study of the Riemann sums across coupled mesh
/// refinements: per adjacent resolution pair it estimates
/// `P(|S_l - S_{l+1}| / (1 + |S_{l+1}|) > ε)` on the same underlying paths
/// and applies the closure-driver verdict rule at threshold η.
pub fn refinement_study(
    f: &PathFunctional,
    phi: &PathFunctional,
    plan: &RefinementPlan,
    n_paths: usize,
    seed: u64,
    eps: f64,
    thresholds: &Thresholds,
) -> Result<ConvergenceReport> {
    if n_paths == 0 {
        return Err(WickError::ZeroPaths);
    }
    let root = plan.root_grid()?;
    let sampler = BridgeSampler::new(root, seed);
    let levels = plan.levels();
    let finest = levels - 1;

    // per-level grids and partition-point index maps
    let mut grids = Vec::with_capacity(levels);
    let mut idx_maps = Vec::with_capacity(levels);
    for l in 0..levels {
        let grid = sampler.grid_at(l);
        let part = plan.partition_at(l);
        let idxs: Vec<usize> = part
            .points()
            .iter()
            .map(|&p| grid.time_index(p).ok_or(WickError::PartitionNotOnGrid))
            .collect::<Result<_>>()?;
        grids.push(grid);
        idx_maps.push(idxs);
    }

    // declared-kind spot check on the coarsest resolution
    let coarse = sampler.ensemble_at(0, n_paths.min(3))?;
    spot_check_kinds(f, phi, &idx_maps[0], &coarse)?;

    let stride = |l: usize| 1usize << (finest - l);
    let per_path: Vec<Vec<f64>> = (0..n_paths)
        .into_par_iter()
        .map(|path| {
            let fine_b = sampler.path_values(path as u64, finest);
            (0..levels)
                .map(|l| {
                    let s = stride(l);
                    let bm: Vec<f64> = fine_b.iter().copied().step_by(s).collect();
                    let view = PathView::from_bm(&grids[l], bm);
                    riemann_sum_on_view(f, phi, &idx_maps[l], &view)
                })
                .collect()
        })
        .collect();

    let z = thresholds.z_value();
    let mut stats = Vec::with_capacity(levels - 1);
    for l in 0..levels - 1 {
        let count = per_path
            .iter()
            .filter(|sums| {
                let d = (sums[l] - sums[l + 1]).abs() / (1.0 + sums[l + 1].abs());
                d > eps
            })
            .count();
        let frac = count as f64 / n_paths as f64;
        let se = (frac * (1.0 - frac) / n_paths as f64).sqrt();
        stats.push(StatPoint { index: l, value: frac, std_error: se, exact: false });
    }
    let verdict = sequence_verdict(&stats, thresholds.eta_prob, z, thresholds.tail_window);
    let finest_samples: Vec<f64> = per_path.iter().map(|s| s[finest]).collect();
    let limit_mean = mean(&finest_samples);
    let var = stable_sum(
        &finest_samples.iter().map(|x| (x - limit_mean) * (x - limit_mean)).collect::<Vec<_>>(),
    ) / (n_paths.max(2) - 1) as f64;
    let stage = StageRecord {
        name: format!("riemann-cauchy-in-probability (eps = {eps})"),
        statistics: stats,
        threshold: thresholds.eta_prob,
        verdict,
        advisory: false,
        note: Some(format!(
            "meshes {:.3e} .. {:.3e}, relative differences on bridge-coupled paths",
            plan.partition_at(0).mesh(),
            plan.partition_at(finest).mesh()
        )),
    };
    let overall = combine_verdicts(std::slice::from_ref(&stage));
    Ok(ConvergenceReport {
        definition: DefinitionTag::RiemannClosure,
        p: None,
        stages: vec![stage],
        verdict: overall,
        limit: LimitSummary::MonteCarlo {
            mean: limit_mean,
            std_error: (var / n_paths as f64).sqrt(),
            n_paths,
        },
        seed,
        n_paths,
        thresholds: thresholds.clone(),
    })
}

/// Point estimate with a standard error.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EstimatorResult {
    pub estimate: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub confidence: f64,
}

impl EstimatorResult {
    /// CSV row `estimate,stderr,n,seed` (ensembles regenerate from the
    /// seed, so this is the whole persistent record).
    pub fn csv_row(&self, seed: u64) -> String {
        format!("{:.10e},{:.4e},{},{}", self.estimate, self.std_error, self.n_paths, seed)
    }
}

/// Estimates `E[|X|^p]^{1/p}` with a leave-one-out jackknife standard error.
pub fn estimate_lp(samples: &[f64], p: f64) -> Result<EstimatorResult> {
    if samples.is_empty() {
        return Err(WickError::EmptySamples);
    }
    if p.is_nan() || p <= 0.0 {
        return Err(WickError::ExponentOutOfRange { p, requires: "p > 0" });
    }
    let n = samples.len();
    let powers: Vec<f64> = samples.iter().map(|x| x.abs().powf(p)).collect();
    let total = stable_sum(&powers);
    let estimate = (total / n as f64).powf(1.0 / p);
    if n == 1 {
        return Ok(EstimatorResult { estimate, std_error: 0.0, n_paths: n, confidence: 0.99 });
    }
    let loo: Vec<f64> = powers
        .iter()
        .map(|w| ((total - w) / (n - 1) as f64).powf(1.0 / p))
        .collect();
    let loo_mean = mean(&loo);
    let ss = stable_sum(&loo.iter().map(|t| (t - loo_mean) * (t - loo_mean)).collect::<Vec<_>>());
    let std_error = ((n - 1) as f64 / n as f64 * ss).sqrt();
    Ok(EstimatorResult { estimate, std_error, n_paths: n, confidence: 0.99 })
}

/// Median-of-means estimate of `E[X]` for heavy-tailed samples.
pub fn median_of_means(samples: &[f64], n_blocks: usize) -> Result<EstimatorResult> {
    if samples.is_empty() {
        return Err(WickError::EmptySamples);
    }
    let k = n_blocks.clamp(1, samples.len());
    let block = samples.len() / k;
    let mut means: Vec<f64> = (0..k)
        .map(|j| {
            let lo = j * block;
            let hi = if j + 1 == k { samples.len() } else { lo + block };
            mean(&samples[lo..hi])
        })
        .collect();
    means.sort_by(f64::total_cmp);
    let estimate = if k % 2 == 1 {
        means[k / 2]
    } else {
        0.5 * (means[k / 2 - 1] + means[k / 2])
    };
    let mm = mean(&means);
    let var = means.iter().map(|x| (x - mm) * (x - mm)).sum::<f64>() / k.max(2) as f64;
    // asymptotic inflation of the sample median relative to the mean
    let std_error = (std::f64::consts::PI / 2.0 * var / k as f64).sqrt();
    Ok(EstimatorResult { estimate, std_error, n_paths: samples.len(), confidence: 0.99 })
}

/// Blow-up diagnostics for a sample mean: prefix estimates across
/// path-count doublings plus the dominance of the single largest draw.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DivergenceDiagnostic {
    pub prefix_estimates: Vec<(usize, f64)>,
    pub growth_ratio: f64,
    pub increasing_fraction: f64,
    pub max_share: f64,
    pub diverged: bool,
}

/// A mean estimate "grows without stabilizing" when the doubling sequence
/// keeps increasing, or when a single draw carries a macroscopic share of
/// the whole sum (the signature of an infinite-mean tail).
pub fn divergence_diagnostic(samples: &[f64], doublings: usize) -> Result<DivergenceDiagnostic> {
    if samples.is_empty() {
        return Err(WickError::EmptySamples);
    }
    let n = samples.len();
    let abs: Vec<f64> = samples.iter().map(|x| x.abs()).collect();
    let mut sizes = Vec::new();
    for k in (0..=doublings).rev() {
        let size = n >> k;
        if size >= 2 && sizes.last() != Some(&size) {
            sizes.push(size);
        }
    }
    let prefix_estimates: Vec<(usize, f64)> =
        sizes.iter().map(|&s| (s, mean(&abs[..s]))).collect();
    let first = prefix_estimates.first().map(|&(_, e)| e).unwrap_or(0.0);
    let last = prefix_estimates.last().map(|&(_, e)| e).unwrap_or(0.0);
    let growth_ratio = if first > 0.0 { last / first } else { 1.0 };
    let ups = prefix_estimates.windows(2).filter(|w| w[1].1 > w[0].1).count();
    let steps = prefix_estimates.len().saturating_sub(1).max(1);
    let increasing_fraction = ups as f64 / steps as f64;
    let total = stable_sum(&abs);
    let max_share = if total > 0.0 {
        abs.iter().fold(0.0f64, |m, &x| m.max(x)) / total
    } else {
        0.0
    };
    let diverged = max_share > 0.02 || (growth_ratio > 1.2 && increasing_fraction >= 0.6);
    Ok(DivergenceDiagnostic {
        prefix_estimates,
        growth_ratio,
        increasing_fraction,
        max_share,
        diverged,
    })
}
