//! Plot-ready tables for the worked examples: one redistribution round,
//! common-random-number trajectories and distribution statistics.

use serde::Serialize;

use crate::econ::{assess, redistribute, solve_fee, solve_max, FiscalPolicy, IncomeVector, Scheme};
use crate::error::Result;
use crate::eta::{
    clt_params, growth_condition, lognormal_params, mean_growth_bound, tail_stats, EtaSpec,
    GrowthCondition, LogNormalParams, TailStats,
};
use crate::trajectory::run_common_random;

pub const EXAMPLE_INCOMES: [f64; 6] = [100.0, 300.0, 600.0, 1000.0, 1500.0, 2100.0];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RedistributionRow {
    pub scheme: Scheme,
    pub agent: usize,
    pub income: f64,
    pub tax: f64,
    pub net_income: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RedistributionDemo {
    pub tax_rate: f64,
    pub admin_rate: f64,
    pub total_income: f64,
    pub public_good: f64,
    pub government_income: f64,
    pub fee: f64,
    pub max_threshold: f64,
    pub rows: Vec<RedistributionRow>,
}

impl RedistributionDemo {
    pub fn rows_for(&self, scheme: Scheme) -> impl Iterator<Item = &RedistributionRow> {
        self.rows.iter().filter(move |r| r.scheme == scheme)
    }
}

/// Taxes and net incomes of one redistribution round under every scheme.
pub fn demo_redistribution(
    incomes: &IncomeVector,
    tax_rate: f64,
    admin_rate: f64,
) -> Result<RedistributionDemo> {
    let mut rows = Vec::with_capacity(3 * incomes.len());
    let mut public_good = 0.0;
    let mut government_income = 0.0;
    for scheme in Scheme::ALL {
        let policy = FiscalPolicy::new(scheme, tax_rate, admin_rate)?;
        let assessment = assess(incomes, &policy);
        let net = redistribute(incomes, &policy);
        if scheme == Scheme::Proportional {
            public_good = assessment.public_good;
            government_income = assessment.government_income;
        }
        for (agent, ((&income, &tax), &net_income)) in incomes
            .as_slice()
            .iter()
            .zip(&assessment.taxes)
            .zip(net.as_slice())
            .enumerate()
        {
            rows.push(RedistributionRow {
                scheme,
                agent,
                income,
                tax,
                net_income,
            });
        }
    }
    Ok(RedistributionDemo {
        tax_rate,
        admin_rate,
        total_income: incomes.total(),
        public_good,
        government_income,
        fee: solve_fee(incomes, tax_rate),
        max_threshold: solve_max(incomes, tax_rate),
        rows,
    })
}

/// One row of the long-form trajectory table. `series` is a scheme name or
/// one of the analytic guides `geomean_guide` and `mean_guide`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub t: usize,
    pub series: String,
    pub total_income: f64,
    pub human_capital: Option<f64>,
}

pub const GEOMEAN_GUIDE: &str = "geomean_guide";
pub const MEAN_GUIDE: &str = "mean_guide";

/// Trajectories of all three schemes on shared draws, followed by the
/// guides `N <eta>_geo^t` and `N ((1 - ab) <eta>)^t`.
pub fn trajectory_records(
    agents: usize,
    periods: usize,
    tax_rate: f64,
    admin_rate: f64,
    spec: &EtaSpec,
    seed: u64,
) -> Result<Vec<TrajectoryRecord>> {
    let policy = FiscalPolicy::new(Scheme::Proportional, tax_rate, admin_rate)?;
    let n = agents as f64;
    let mut out = Vec::with_capacity(5 * periods);
    if periods >= 2 {
        let runs = run_common_random(
            agents,
            periods,
            &Scheme::ALL,
            tax_rate,
            admin_rate,
            spec,
            seed,
        )?;
        for tr in &runs {
            let name = tr.policy.scheme.name();
            for (t, (&y, &h)) in tr.totals.iter().zip(&tr.human_capital_totals).enumerate() {
                out.push(TrajectoryRecord {
                    t,
                    series: name.to_string(),
                    total_income: y,
                    human_capital: Some(h),
                });
            }
        }
    } else {
        spec.validate()?;
        for scheme in Scheme::ALL {
            for t in 0..periods {
                out.push(TrajectoryRecord {
                    t,
                    series: scheme.name().to_string(),
                    total_income: n,
                    human_capital: Some(n),
                });
            }
        }
    }
    let guides = [
        (GEOMEAN_GUIDE, spec.effective_geomean()),
        (MEAN_GUIDE, mean_growth_bound(&policy, spec)),
    ];
    for (name, g) in guides {
        for t in 0..periods {
            out.push(TrajectoryRecord {
                t,
                series: name.to_string(),
                total_income: n * g.powi(t as i32),
                human_capital: None,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CltPoint {
    pub t: f64,
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsReport {
    pub spec: EtaSpec,
    pub params: LogNormalParams,
    pub tails: TailStats,
    pub condition: GrowthCondition,
    pub degenerate: bool,
    pub clt: Vec<CltPoint>,
}

pub fn stats_report(spec: &EtaSpec, times: &[f64]) -> Result<StatsReport> {
    let params = lognormal_params(spec)?;
    let clt = times
        .iter()
        .map(|&t| {
            let (mean, variance) = clt_params(&params, t);
            CltPoint { t, mean, variance }
        })
        .collect();
    Ok(StatsReport {
        spec: *spec,
        params,
        tails: tail_stats(spec)?,
        condition: growth_condition(spec)?,
        degenerate: params.sigma == 0.0,
        clt,
    })
}
