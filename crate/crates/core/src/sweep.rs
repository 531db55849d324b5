//! The parameter sweep over schemes, distributions, society sizes, admin
//! rates and tax rates.
//!
//! Every cell is an ensemble summary. Sample `s` of every cell draws from
//! the same stream, keyed only by the base seed and `s`, so cells differ
//! only in the parameters under study. A cell computed on its own is
//! bit-identical to the same cell inside a sweep, whatever the thread
//! count or completion order.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::econ::{FiscalPolicy, Scheme};
use crate::error::{Error, Result};
use crate::eta::{DrawMatrix, EtaSpec, RiskPreset};
use crate::trajectory::{estimate_from_draws, run_ensemble, sample_seed, EnsembleSummary};

/// `count` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let last = (count - 1) as f64;
            (0..count)
                .map(|i| {
                    if i == count - 1 {
                        hi
                    } else {
                        lo + (hi - lo) * (i as f64 / last)
                    }
                })
                .collect()
        }
    }
}

/// Values `lo, lo + step, ..., hi` with the count rounded to the nearest
/// whole number of steps.
pub fn stepped(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let count = ((hi - lo) / step).round() as usize + 1;
    linspace(lo, hi, count)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub a_values: Vec<f64>,
    pub b_values: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub specs: Vec<EtaSpec>,
    pub agent_counts: Vec<usize>,
    pub periods: usize,
    pub samples: usize,
    pub base_seed: u64,
}

impl SweepGrid {
    /// The full grid: 51 tax rates, 41 admin rates, three
    /// schemes, three risk presets, N in {10, 100}, 500 periods, 100 runs.
    pub fn full(base_seed: u64) -> Self {
        Self {
            a_values: stepped(0.0, 1.0, 0.02),
            b_values: stepped(0.0, 0.8, 0.02),
            schemes: Scheme::ALL.to_vec(),
            specs: RiskPreset::ALL.map(RiskPreset::spec).to_vec(),
            agent_counts: vec![10, 100],
            periods: 500,
            samples: 100,
            base_seed,
        }
    }

    /// A reduced grid that finishes in minutes: steps of 0.05, 50 runs of
    /// 300 periods, intermediate risk, N = 10.
    pub fn desk(base_seed: u64) -> Self {
        Self {
            a_values: stepped(0.0, 1.0, 0.05),
            b_values: stepped(0.0, 0.8, 0.05),
            schemes: Scheme::ALL.to_vec(),
            specs: vec![RiskPreset::Intermediate.spec()],
            agent_counts: vec![10],
            periods: 300,
            samples: 50,
            base_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        for (name, values, hi) in [("a", &self.a_values, 1.0), ("b", &self.b_values, 1.0)] {
            if values.is_empty() {
                return fail(format!("{name} grid is empty"));
            }
            if values.iter().any(|v| !(0.0..=hi).contains(v)) {
                return fail(format!("{name} grid leaves [0, {hi}]"));
            }
            if values.windows(2).any(|w| w[0] >= w[1]) {
                return fail(format!("{name} grid must be strictly ascending"));
            }
        }
        if self.schemes.is_empty() || self.specs.is_empty() || self.agent_counts.is_empty() {
            return fail("schemes, specs and agent counts must be non-empty".into());
        }
        if self.agent_counts.contains(&0) {
            return fail("agent counts must be positive".into());
        }
        if self.periods < 2 {
            return fail(format!("need at least 2 periods, got {}", self.periods));
        }
        if self.samples == 0 {
            return fail("need at least one sample per cell".into());
        }
        for spec in &self.specs {
            spec.validate()?;
        }
        Ok(())
    }

    pub fn cells_per_surface(&self) -> usize {
        self.a_values.len() * self.b_values.len()
    }

    pub fn surface_count(&self) -> usize {
        self.schemes.len() * self.specs.len() * self.agent_counts.len()
    }

    pub fn cell_count(&self) -> usize {
        self.surface_count() * self.cells_per_surface()
    }

    /// All cells in canonical order: spec, N, scheme, b, a.
    pub fn cells(&self) -> impl Iterator<Item = CellKey> + '_ {
        let (ns, nn, nm, nb, na) = (
            self.specs.len(),
            self.agent_counts.len(),
            self.schemes.len(),
            self.b_values.len(),
            self.a_values.len(),
        );
        (0..ns).flat_map(move |spec| {
            (0..nn).flat_map(move |agents| {
                (0..nm).flat_map(move |scheme| {
                    (0..nb).flat_map(move |b| {
                        (0..na).map(move |a| CellKey {
                            spec,
                            agents,
                            scheme,
                            b,
                            a,
                        })
                    })
                })
            })
        })
    }

    pub fn policy(&self, key: &CellKey) -> Result<FiscalPolicy> {
        FiscalPolicy::new(
            self.schemes[key.scheme],
            self.a_values[key.a],
            self.b_values[key.b],
        )
    }

    pub fn contains(&self, key: &CellKey) -> bool {
        key.spec < self.specs.len()
            && key.agents < self.agent_counts.len()
            && key.scheme < self.schemes.len()
            && key.b < self.b_values.len()
            && key.a < self.a_values.len()
    }
}

/// Indices of one cell into the grid's axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellKey {
    pub spec: usize,
    pub agents: usize,
    pub scheme: usize,
    pub b: usize,
    pub a: usize,
}

/// Recomputes one cell from scratch.
pub fn compute_cell(grid: &SweepGrid, key: &CellKey) -> Result<EnsembleSummary> {
    run_ensemble(
        grid.agent_counts[key.agents],
        grid.periods,
        &grid.policy(key)?,
        &grid.specs[key.spec],
        grid.base_seed,
        grid.samples,
    )
}

/// Average growth factors over the `(b, a)` plane for one scheme,
/// distribution and society size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthSurface {
    pub scheme: Scheme,
    pub spec: EtaSpec,
    pub agents: usize,
    pub periods: usize,
    pub samples: usize,
    pub base_seed: u64,
    pub a_values: Vec<f64>,
    pub b_values: Vec<f64>,
    /// Row-major by b: `cells[b * a_values.len() + a]`.
    pub cells: Vec<EnsembleSummary>,
}

impl GrowthSurface {
    pub fn cell(&self, b: usize, a: usize) -> &EnsembleSummary {
        &self.cells[b * self.a_values.len() + a]
    }

    pub fn g(&self, b: usize, a: usize) -> Option<f64> {
        self.cell(b, a).avg_g()
    }

    pub fn log_g(&self, b: usize, a: usize) -> Option<f64> {
        self.cell(b, a).mean_log_g
    }

    pub fn se(&self, b: usize, a: usize) -> f64 {
        self.cell(b, a).se_log_g.unwrap_or(0.0)
    }

    pub fn row(&self, b: usize) -> &[EnsembleSummary] {
        let na = self.a_values.len();
        &self.cells[b * na..(b + 1) * na]
    }

    pub fn missing_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.is_missing()).count()
    }

    /// Index of the b grid value closest to `b`.
    pub fn nearest_b(&self, b: f64) -> usize {
        nearest(&self.b_values, b)
    }

    pub fn nearest_a(&self, a: f64) -> usize {
        nearest(&self.a_values, a)
    }
}

fn nearest(values: &[f64], x: f64) -> usize {
    values
        .iter()
        .enumerate()
        .min_by(|(_, p), (_, q)| (*p - x).abs().total_cmp(&(*q - x).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// Cell results keyed by position.
pub type CellMap = BTreeMap<CellKey, EnsembleSummary>;

/// Builds one surface per `(spec, N, scheme)` from a complete cell map.
pub fn assemble_surfaces(grid: &SweepGrid, cells: &CellMap) -> Result<Vec<GrowthSurface>> {
    let mut out = Vec::with_capacity(grid.surface_count());
    let per = grid.cells_per_surface();
    let mut keys = grid.cells();
    for (si, spec) in grid.specs.iter().enumerate() {
        for (ni, &agents) in grid.agent_counts.iter().enumerate() {
            for (mi, &scheme) in grid.schemes.iter().enumerate() {
                let mut summaries = Vec::with_capacity(per);
                for key in keys.by_ref().take(per) {
                    debug_assert_eq!((key.spec, key.agents, key.scheme), (si, ni, mi));
                    let summary = cells.get(&key).ok_or_else(|| {
                        Error::Config(format!("sweep is incomplete: cell {key:?} missing"))
                    })?;
                    summaries.push(*summary);
                }
                out.push(GrowthSurface {
                    scheme,
                    spec: *spec,
                    agents,
                    periods: grid.periods,
                    samples: grid.samples,
                    base_seed: grid.base_seed,
                    a_values: grid.a_values.clone(),
                    b_values: grid.b_values.clone(),
                    cells: summaries,
                });
            }
        }
    }
    Ok(out)
}

/// Drives a sweep. Cells already present in `completed` are not recomputed;
/// new cells are handed to the observer in canonical order.
#[derive(Debug, Clone)]
pub struct SweepRunner<'g> {
    grid: &'g SweepGrid,
    threads: Option<usize>,
    limit: Option<usize>,
    chunk: usize,
}

/// What a (possibly interrupted) run produced.
#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub cells: CellMap,
    pub computed: usize,
    pub complete: bool,
}

impl<'g> SweepRunner<'g> {
    pub fn new(grid: &'g SweepGrid) -> Self {
        Self {
            grid,
            threads: None,
            limit: None,
            chunk: 64,
        }
    }

    /// Worker count; `None` uses the global pool. Ignored without the
    /// `parallel` feature.
    pub fn threads(mut self, threads: Option<usize>) -> Self {
        self.threads = threads;
        self
    }

    /// Stop after computing this many new cells.
    pub fn limit(mut self, limit: Option<usize>) -> Self {
        self.limit = limit;
        self
    }

    /// Cells computed between two observer hand-offs.
    pub fn chunk(mut self, chunk: usize) -> Self {
        self.chunk = chunk.max(1);
        self
    }

    pub fn run(
        &self,
        completed: CellMap,
        mut observe: impl FnMut(&CellKey, &EnsembleSummary) -> Result<()>,
    ) -> Result<SweepOutcome> {
        self.grid.validate()?;
        let exec = Executor::new(self.threads)?;
        let grid = self.grid;
        let mut cells = completed;
        let mut budget = self.limit.unwrap_or(usize::MAX);
        let mut computed = 0;
        let per_group = grid.schemes.len() * grid.cells_per_surface();
        let mut all = grid.cells();
        for spec in &grid.specs {
            for &agents in &grid.agent_counts {
                let pending: Vec<CellKey> = all
                    .by_ref()
                    .take(per_group)
                    .filter(|k| !cells.contains_key(k))
                    .collect();
                if pending.is_empty() {
                    continue;
                }
                if budget == 0 {
                    return Ok(SweepOutcome {
                        cells,
                        computed,
                        complete: false,
                    });
                }
                let draws = exec.map(&(0..grid.samples).collect::<Vec<_>>(), |&s| {
                    DrawMatrix::sample(spec, sample_seed(grid.base_seed, s), agents, grid.periods)
                })?;
                for batch in pending.chunks(self.chunk) {
                    let batch = &batch[..batch.len().min(budget)];
                    let results = exec.map(batch, |k| eval_cell(grid, &draws, agents, k))?;
                    for (key, summary) in batch.iter().zip(results) {
                        observe(key, &summary)?;
                        cells.insert(*key, summary);
                    }
                    computed += batch.len();
                    budget -= batch.len();
                    if budget == 0 {
                        let complete = cells.len() == grid.cell_count();
                        return Ok(SweepOutcome {
                            cells,
                            computed,
                            complete,
                        });
                    }
                }
            }
        }
        let complete = cells.len() == grid.cell_count();
        Ok(SweepOutcome {
            cells,
            computed,
            complete,
        })
    }
}

/// Order-preserving parallel map over a slice.
struct Executor {
    #[cfg(feature = "parallel")]
    pool: Option<rayon::ThreadPool>,
}

impl Executor {
    fn new(threads: Option<usize>) -> Result<Self> {
        #[cfg(feature = "parallel")]
        {
            let pool = threads
                .map(|n| {
                    rayon::ThreadPoolBuilder::new()
                        .num_threads(n.max(1))
                        .build()
                        .map_err(|e| Error::Config(format!("thread pool: {e}")))
                })
                .transpose()?;
            Ok(Self { pool })
        }
        #[cfg(not(feature = "parallel"))]
        {
            let _ = threads;
            Ok(Self {})
        }
    }

    fn map<I, T, F>(&self, items: &[I], f: F) -> Result<Vec<T>>
    where
        I: Sync,
        T: Send,
        F: Fn(&I) -> Result<T> + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            let work = || items.par_iter().map(&f).collect();
            match &self.pool {
                Some(pool) => pool.install(work),
                None => work(),
            }
        }
        #[cfg(not(feature = "parallel"))]
        {
            items.iter().map(f).collect()
        }
    }
}

fn eval_cell(
    grid: &SweepGrid,
    draws: &[DrawMatrix],
    agents: usize,
    key: &CellKey,
) -> Result<EnsembleSummary> {
    let policy = grid.policy(key)?;
    let estimates = draws
        .iter()
        .map(|d| estimate_from_draws(d, agents, &policy))
        .collect::<Result<Vec<_>>>()?;
    Ok(EnsembleSummary::from_estimates(&estimates))
}

/// Runs a whole grid and assembles its surfaces.
pub fn run_sweep(grid: &SweepGrid) -> Result<Vec<GrowthSurface>> {
    let outcome = SweepRunner::new(grid).run(CellMap::new(), |_, _| Ok(()))?;
    assemble_surfaces(grid, &outcome.cells)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(seed: u64) -> SweepGrid {
        SweepGrid {
            a_values: linspace(0.0, 1.0, 3),
            b_values: linspace(0.0, 0.4, 2),
            schemes: Scheme::ALL.to_vec(),
            specs: vec![RiskPreset::Intermediate.spec()],
            agent_counts: vec![1, 4],
            periods: 40,
            samples: 6,
            base_seed: seed,
        }
    }

    #[test]
    fn full_grid_cell_count() {
        let g = SweepGrid::full(0);
        assert_eq!(g.a_values.len(), 51);
        assert_eq!(g.b_values.len(), 41);
        assert_eq!(g.cell_count(), 37_638);
        assert_eq!(g.cells().count(), 37_638);
        assert_eq!(*g.a_values.last().unwrap(), 1.0);
        assert_eq!(*g.b_values.last().unwrap(), 0.8);
        g.validate().unwrap();
    }

    #[test]
    fn stepped_values_hit_endpoints() {
        let v = stepped(0.0, 0.8, 0.05);
        assert_eq!(v.len(), 17);
        assert_eq!(v[0], 0.0);
        assert_eq!(v[16], 0.8);
        assert!((v[4] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn grid_validation() {
        let mut g = tiny(0);
        g.a_values = vec![0.5, 0.2];
        assert!(g.validate().is_err());
        let mut g = tiny(0);
        g.periods = 1;
        assert!(g.validate().is_err());
        let mut g = tiny(0);
        g.b_values.push(1.5);
        assert!(g.validate().is_err());
    }

    #[test]
    fn sweep_cells_match_standalone_cells() {
        let grid = tiny(17);
        let surfaces = run_sweep(&grid).unwrap();
        assert_eq!(surfaces.len(), 6);
        for key in grid.cells() {
            let s = &surfaces[key.agents * grid.schemes.len() + key.scheme];
            assert_eq!(*s.cell(key.b, key.a), compute_cell(&grid, &key).unwrap());
        }
    }

    #[test]
    fn lone_agent_without_tax_ignores_scheme_and_admin_rate() {
        let grid = tiny(3);
        let surfaces = run_sweep(&grid).unwrap();
        let reference = surfaces[0].cell(0, 0);
        for s in surfaces.iter().filter(|s| s.agents == 1) {
            for b in 0..2 {
                assert_eq!(s.cell(b, 0), reference);
            }
        }
    }

    #[test]
    fn limit_and_resume_reach_the_same_cells() {
        let grid = tiny(5);
        let full = SweepRunner::new(&grid)
            .run(CellMap::new(), |_, _| Ok(()))
            .unwrap();
        assert!(full.complete);
        let part = SweepRunner::new(&grid)
            .limit(Some(7))
            .chunk(4)
            .run(CellMap::new(), |_, _| Ok(()))
            .unwrap();
        assert!(!part.complete);
        assert_eq!(part.computed, 7);
        let mut seen = 0;
        let rest = SweepRunner::new(&grid)
            .run(part.cells, |_, _| {
                seen += 1;
                Ok(())
            })
            .unwrap();
        assert!(rest.complete);
        assert_eq!(seen, grid.cell_count() - 7);
        assert_eq!(rest.cells, full.cells);
    }

    #[test]
    fn assembly_requires_every_cell() {
        let grid = tiny(1);
        assert!(assemble_surfaces(&grid, &CellMap::new()).is_err());
    }
}
