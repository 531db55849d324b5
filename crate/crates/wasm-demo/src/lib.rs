//! Browser bindings. Every entry point takes plain numbers and returns a JSON
//! string, so the page needs no generated TypeScript types.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use redisgrowth::analysis::{government_curves, zone_boundary, PolicyCurves};
use redisgrowth::report::{demo_redistribution, trajectory_records, TrajectoryRecord};
use redisgrowth::sweep::{linspace, run_sweep};
use redisgrowth::{EtaSpec, IncomeVector, RiskPreset, Scheme, SweepGrid};

const MAX_AGENTS: usize = 1000;
const MAX_PERIODS: usize = 2000;
const MAX_SURFACE_WORK: usize = 20_000_000;

fn eta(mean: f64, geomean: f64) -> Result<EtaSpec, String> {
    EtaSpec::new(mean, geomean).map_err(|e| e.to_string())
}

fn check(what: &str, value: usize, lo: usize, hi: usize) -> Result<(), String> {
    if (lo..=hi).contains(&value) {
        Ok(())
    } else {
        Err(format!("{what} must be in {lo}..={hi}, got {value}"))
    }
}

fn json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

/// Parses comma or whitespace separated incomes.
pub fn parse_incomes(text: &str) -> Result<IncomeVector, String> {
    let values = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| format!("not a number: `{s}`")))
        .collect::<Result<Vec<_>, _>>()?;
    IncomeVector::new(values).map_err(|e| e.to_string())
}

pub fn redistribution_json(
    incomes: &str,
    tax_rate: f64,
    admin_rate: f64,
) -> Result<String, String> {
    let incomes = parse_incomes(incomes)?;
    let demo = demo_redistribution(&incomes, tax_rate, admin_rate).map_err(|e| e.to_string())?;
    json(&demo)
}

#[derive(Serialize)]
struct Series {
    name: String,
    total_income: Vec<f64>,
}

#[derive(Serialize)]
struct Trajectories {
    periods: usize,
    series: Vec<Series>,
}

fn group(records: Vec<TrajectoryRecord>, periods: usize) -> Trajectories {
    let mut series: Vec<Series> = Vec::new();
    for r in records {
        match series.last_mut() {
            Some(s) if s.name == r.series => s.total_income.push(r.total_income),
            _ => series.push(Series {
                name: r.series,
                total_income: vec![r.total_income],
            }),
        }
    }
    Trajectories { periods, series }
}

#[allow(clippy::too_many_arguments)]
pub fn trajectories_json(
    agents: usize,
    periods: usize,
    tax_rate: f64,
    admin_rate: f64,
    mean: f64,
    geomean: f64,
    seed: u64,
) -> Result<String, String> {
    check("agents", agents, 1, MAX_AGENTS)?;
    check("periods", periods, 1, MAX_PERIODS)?;
    let spec = eta(mean, geomean)?;
    let records = trajectory_records(agents, periods, tax_rate, admin_rate, &spec, seed)
        .map_err(|e| e.to_string())?;
    json(&group(records, periods))
}

#[derive(Serialize)]
struct Surface {
    scheme: Scheme,
    a_values: Vec<f64>,
    b_values: Vec<f64>,
    /// Row-major by b; `null` where every run collapsed.
    g: Vec<Option<f64>>,
    /// `(b, a)` points where the growth factor crosses 1.
    crossings: Vec<(f64, f64)>,
    trivial_bound: Vec<(f64, f64)>,
    curves: PolicyCurves,
}

#[allow(clippy::too_many_arguments)]
pub fn surface_json(
    scheme: &str,
    agents: usize,
    periods: usize,
    samples: usize,
    steps: usize,
    mean: f64,
    geomean: f64,
    seed: u64,
) -> Result<String, String> {
    let scheme: Scheme = scheme
        .parse()
        .map_err(|e: redisgrowth::Error| e.to_string())?;
    check("agents", agents, 1, MAX_AGENTS)?;
    check("periods", periods, 2, MAX_PERIODS)?;
    check("samples", samples, 1, 1000)?;
    check("steps", steps, 2, 51)?;
    let work = agents * periods * samples * steps * steps;
    if work > MAX_SURFACE_WORK {
        return Err(format!(
            "surface too large for the browser: {work} agent-periods, limit {MAX_SURFACE_WORK}"
        ));
    }
    let grid = SweepGrid {
        a_values: linspace(0.0, 1.0, steps),
        b_values: linspace(0.0, 0.8, steps),
        schemes: vec![scheme],
        specs: vec![eta(mean, geomean)?],
        agent_counts: vec![agents],
        periods,
        samples,
        base_seed: seed,
    };
    let surface = run_sweep(&grid)
        .map_err(|e| e.to_string())?
        .pop()
        .ok_or("empty sweep")?;
    let boundary = zone_boundary(&surface);
    json(&Surface {
        scheme,
        g: surface.cells.iter().map(|c| c.avg_g()).collect(),
        crossings: boundary.crossings,
        trivial_bound: boundary.trivial_bound,
        curves: government_curves(&surface, 5),
        a_values: surface.a_values,
        b_values: surface.b_values,
    })
}

pub fn presets_json() -> String {
    let list: Vec<_> = RiskPreset::ALL
        .iter()
        .map(|p| {
            let s = p.spec();
            serde_json::json!({ "name": p.name(), "mean": s.mean, "geomean": s.geomean })
        })
        .collect();
    serde_json::Value::from(list).to_string()
}

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = riskPresets)]
pub fn risk_presets() -> String {
    presets_json()
}

/// One redistribution round under all three schemes.
#[wasm_bindgen]
pub fn redistribute(incomes: &str, tax_rate: f64, admin_rate: f64) -> Result<String, JsError> {
    js(redistribution_json(incomes, tax_rate, admin_rate))
}

/// Total income paths of the three schemes on shared draws, with guides.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn trajectories(
    agents: usize,
    periods: usize,
    tax_rate: f64,
    admin_rate: f64,
    mean: f64,
    geomean: f64,
    seed: u64,
) -> Result<String, JsError> {
    js(trajectories_json(
        agents, periods, tax_rate, admin_rate, mean, geomean, seed,
    ))
}

/// Average growth factor over a `steps x steps` grid of tax and admin rates.
#[wasm_bindgen(js_name = growthSurface)]
#[allow(clippy::too_many_arguments)]
pub fn growth_surface(
    scheme: &str,
    agents: usize,
    periods: usize,
    samples: usize,
    steps: usize,
    mean: f64,
    geomean: f64,
    seed: u64,
) -> Result<String, JsError> {
    js(surface_json(
        scheme, agents, periods, samples, steps, mean, geomean, seed,
    ))
}
