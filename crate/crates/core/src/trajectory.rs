//! Trajectories of total income and growth-factor estimation.

use serde::{Deserialize, Serialize};

use crate::econ::{FiscalPolicy, Redistributor, Scheme};
use crate::error::{Error, Result};
use crate::eta::{DrawMatrix, EtaSpec};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Total income `Y(t)`, `t = 0..T-1`, with `Y(0) = N`.
    pub totals: Vec<f64>,
    /// Total human capital before redistribution; `H(0) = N`.
    pub human_capital_totals: Vec<f64>,
    pub agents: usize,
    pub policy: FiscalPolicy,
    pub spec: EtaSpec,
    pub seed: u64,
}

impl Trajectory {
    pub fn periods(&self) -> usize {
        self.totals.len()
    }

    /// Runs the first `agents` rows of `draws` from unit income. Column `t`
    /// of the draws drives the step into period `t`; column 0 is unused.
    pub fn from_draws(draws: &DrawMatrix, agents: usize, policy: &FiscalPolicy) -> Result<Self> {
        check_shape(agents, draws.periods())?;
        if agents > draws.agents() {
            return Err(Error::Config(format!(
                "{agents} agents requested from a draw matrix with {} rows",
                draws.agents()
            )));
        }
        let periods = draws.periods();
        let mut totals = Vec::with_capacity(periods);
        let mut hc_totals = Vec::with_capacity(periods);
        totals.push(agents as f64);
        hc_totals.push(agents as f64);
        simulate(draws, agents, policy, |h, y| {
            hc_totals.push(h);
            totals.push(y);
        });
        Ok(Self {
            totals,
            human_capital_totals: hc_totals,
            agents,
            policy: *policy,
            spec: *draws.spec(),
            seed: draws.seed(),
        })
    }
}

fn check_shape(agents: usize, periods: usize) -> Result<()> {
    if agents == 0 || periods < 2 {
        return Err(Error::Config(format!(
            "trajectories need N >= 1 and T >= 2, got N={agents}, T={periods}"
        )));
    }
    Ok(())
}

/// Core loop; reports `(H(t), Y(t))` for `t = 1..T-1`.
fn simulate(
    draws: &DrawMatrix,
    agents: usize,
    policy: &FiscalPolicy,
    mut record: impl FnMut(f64, f64),
) {
    let mut income = vec![1.0; agents];
    let mut kernel = Redistributor::new(*policy);
    for t in 1..draws.periods() {
        let eta = &draws.column(t)[..agents];
        for (y, e) in income.iter_mut().zip(eta) {
            *y *= e;
        }
        let h: f64 = income.iter().sum();
        kernel.apply(&mut income);
        record(h, income.iter().sum());
    }
}

pub fn run_trajectory(
    agents: usize,
    periods: usize,
    policy: &FiscalPolicy,
    spec: &EtaSpec,
    seed: u64,
) -> Result<Trajectory> {
    check_shape(agents, periods)?;
    let draws = DrawMatrix::sample(spec, seed, agents, periods)?;
    Trajectory::from_draws(&draws, agents, policy)
}

/// One trajectory per scheme, all driven by the same draws.
pub fn run_common_random(
    agents: usize,
    periods: usize,
    schemes: &[Scheme],
    tax_rate: f64,
    admin_rate: f64,
    spec: &EtaSpec,
    seed: u64,
) -> Result<Vec<Trajectory>> {
    check_shape(agents, periods)?;
    let draws = DrawMatrix::sample(spec, seed, agents, periods)?;
    schemes
        .iter()
        .map(|&scheme| {
            let policy = FiscalPolicy::new(scheme, tax_rate, admin_rate)?;
            Trajectory::from_draws(&draws, agents, &policy)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthEstimate {
    /// Slope of `ln Y(t) - ln N` against `t`; `None` when the run had a
    /// non-positive or non-finite total.
    pub log_g: Option<f64>,
}

impl GrowthEstimate {
    pub fn is_finite(&self) -> bool {
        self.log_g.is_some()
    }

    pub fn g(&self) -> Option<f64> {
        self.log_g.map(f64::exp)
    }
}

/// Least squares for `ln Y(t) = ln N + t ln g` with the intercept pinned:
/// `ln g = sum t (ln Y(t) - ln N) / sum t^2`.
pub fn fit_log_growth(totals: &[f64], agents: usize) -> GrowthEstimate {
    if totals.len() < 2 {
        return GrowthEstimate { log_g: None };
    }
    let ln_n = (agents as f64).ln();
    let mut num = 0.0;
    let mut den = 0.0;
    for (t, &y) in totals.iter().enumerate() {
        let ly = y.ln();
        if !(y > 0.0 && ly.is_finite()) {
            return GrowthEstimate { log_g: None };
        }
        let t = t as f64;
        num += t * (ly - ln_n);
        den += t * t;
    }
    GrowthEstimate {
        log_g: Some(num / den),
    }
}

pub fn estimate_growth(trajectory: &Trajectory) -> GrowthEstimate {
    fit_log_growth(&trajectory.totals, trajectory.agents)
}

/// Growth estimate without keeping the trajectory around.
pub fn estimate_from_draws(
    draws: &DrawMatrix,
    agents: usize,
    policy: &FiscalPolicy,
) -> Result<GrowthEstimate> {
    check_shape(agents, draws.periods())?;
    if agents > draws.agents() {
        return Err(Error::Config(format!(
            "{agents} agents requested from a draw matrix with {} rows",
            draws.agents()
        )));
    }
    // Same accumulation as `fit_log_growth`, without storing Y(t).
    let ln_n = (agents as f64).ln();
    let mut num = 0.0;
    let mut den = 0.0;
    let mut t = 0.0;
    let mut finite = true;
    simulate(draws, agents, policy, |_, y| {
        t += 1.0;
        let ly = y.ln();
        if !(y > 0.0 && ly.is_finite()) {
            finite = false;
        }
        num += t * (ly - ln_n);
        den += t * t;
    });
    Ok(GrowthEstimate {
        log_g: finite.then(|| num / den),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub sample_count: usize,
    pub finite_count: usize,
    /// Arithmetic mean of finite `ln g`.
    pub mean_log_g: Option<f64>,
    /// Standard error of `mean_log_g`; zero for a single finite run.
    pub se_log_g: Option<f64>,
}

impl EnsembleSummary {
    /// Aggregates in index order, so the result does not depend on the order
    /// in which runs completed.
    pub fn from_estimates(estimates: &[GrowthEstimate]) -> Self {
        let finite: Vec<f64> = estimates.iter().filter_map(|e| e.log_g).collect();
        let k = finite.len();
        let (mean, se) = if k == 0 {
            (None, None)
        } else {
            let mean = finite.iter().sum::<f64>() / k as f64;
            let se = if k > 1 {
                let ss: f64 = finite.iter().map(|x| (x - mean) * (x - mean)).sum();
                (ss / (k - 1) as f64).sqrt() / (k as f64).sqrt()
            } else {
                0.0
            };
            (Some(mean), Some(se))
        };
        Self {
            sample_count: estimates.len(),
            finite_count: k,
            mean_log_g: mean,
            se_log_g: se,
        }
    }

    /// Geometric mean of the per-run growth factors.
    pub fn avg_g(&self) -> Option<f64> {
        self.mean_log_g.map(f64::exp)
    }

    pub fn is_missing(&self) -> bool {
        self.finite_count == 0
    }
}

/// Seed of sample `index` in an ensemble rooted at `base_seed`.
pub fn sample_seed(base_seed: u64, index: usize) -> u64 {
    rng::stream_key(base_seed, "ensemble", &[index as u64])
}

pub fn run_ensemble(
    agents: usize,
    periods: usize,
    policy: &FiscalPolicy,
    spec: &EtaSpec,
    base_seed: u64,
    samples: usize,
) -> Result<EnsembleSummary> {
    check_shape(agents, periods)?;
    if samples == 0 {
        return Err(Error::Config(
            "an ensemble needs at least one sample".into(),
        ));
    }
    let run = |s: usize| -> Result<GrowthEstimate> {
        let draws = DrawMatrix::sample(spec, sample_seed(base_seed, s), agents, periods)?;
        estimate_from_draws(&draws, agents, policy)
    };
    #[cfg(feature = "parallel")]
    let estimates: Result<Vec<_>> = {
        use rayon::prelude::*;
        (0..samples).into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let estimates: Result<Vec<_>> = (0..samples).map(run).collect();
    Ok(EnsembleSummary::from_estimates(&estimates?))
}
