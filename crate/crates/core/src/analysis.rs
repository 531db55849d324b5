//! Quantities derived from growth surfaces: optimal tax rates, maximal
//! growth, government income, zone boundaries and zone inclusion.
//!
//! Cells without a finite estimate are skipped everywhere. Argmax ties go
//! to the smaller tax rate (and the smaller admin rate for `b_star`).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::eta::trivial_bound_tax_rate;
use crate::sweep::GrowthSurface;

pub const DEFAULT_SMOOTHING_WINDOW: usize = 5;

/// Default slack, in standard errors, for statistical comparisons.
pub const DEFAULT_SLACK: f64 = 2.0;

fn row_argmax(surface: &GrowthSurface, b: usize) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (a, cell) in surface.row(b).iter().enumerate() {
        if let Some(v) = cell.mean_log_g {
            if best.is_none_or(|(_, m)| v > m) {
                best = Some((a, v));
            }
        }
    }
    best.map(|(a, _)| a)
}

/// `argmax_a g(b, a)`.
pub fn optimal_tax(surface: &GrowthSurface, b: usize) -> Option<f64> {
    row_argmax(surface, b).map(|a| surface.a_values[a])
}

/// `max_a g(b, a)`.
pub fn max_growth(surface: &GrowthSurface, b: usize) -> Option<f64> {
    row_argmax(surface, b).and_then(|a| surface.g(b, a))
}

/// `gov(b, a) = b a g(b, a)`.
pub fn government_income_rate(surface: &GrowthSurface, b: usize, a: usize) -> Option<f64> {
    surface
        .g(b, a)
        .map(|g| surface.b_values[b] * surface.a_values[a] * g)
}

/// Centered moving average. Windows shrink symmetrically near the edges
/// (1, 3, 5, ... points) and skip missing entries; a missing center stays
/// missing.
pub fn smooth(values: &[Option<f64>], window: usize) -> Vec<Option<f64>> {
    let half = window.max(1).saturating_sub(1) / 2;
    let n = values.len();
    (0..n)
        .map(|i| {
            values[i]?;
            let h = half.min(i).min(n - 1 - i);
            let (sum, count) = values[i - h..=i + h]
                .iter()
                .flatten()
                .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
            Some(sum / count as f64)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyCurves {
    pub b_values: Vec<f64>,
    pub a_opt: Vec<Option<f64>>,
    pub a_opt_smooth: Vec<Option<f64>>,
    pub g_max: Vec<Option<f64>>,
    /// Standard error of `ln g_max`.
    pub g_max_se: Vec<Option<f64>>,
    /// `b * smooth(a_opt) * g_max`.
    pub gov_opttax: Vec<Option<f64>>,
    /// `b * a_opt * g_max`.
    pub gov_opttax_raw: Vec<Option<f64>>,
    /// Index of the admin rate maximizing `gov_opttax`.
    pub b_star: Option<usize>,
    pub window: usize,
}

impl PolicyCurves {
    pub fn b_star_value(&self) -> Option<f64> {
        self.b_star.map(|i| self.b_values[i])
    }
}

pub fn government_curves(surface: &GrowthSurface, window: usize) -> PolicyCurves {
    let nb = surface.b_values.len();
    let argmax: Vec<Option<usize>> = (0..nb).map(|b| row_argmax(surface, b)).collect();
    let a_opt: Vec<Option<f64>> = argmax
        .iter()
        .map(|a| a.map(|a| surface.a_values[a]))
        .collect();
    let g_max: Vec<Option<f64>> = argmax
        .iter()
        .enumerate()
        .map(|(b, a)| a.and_then(|a| surface.g(b, a)))
        .collect();
    let g_max_se = argmax
        .iter()
        .enumerate()
        .map(|(b, a)| a.and_then(|a| surface.cell(b, a).se_log_g))
        .collect();
    let a_opt_smooth = smooth(&a_opt, window);
    let gov = |a: &[Option<f64>]| -> Vec<Option<f64>> {
        (0..nb)
            .map(|b| Some(surface.b_values[b] * a[b]? * g_max[b]?))
            .collect()
    };
    let gov_opttax = gov(&a_opt_smooth);
    let gov_opttax_raw = gov(&a_opt);
    let mut b_star: Option<(usize, f64)> = None;
    for (b, v) in gov_opttax.iter().enumerate() {
        if let Some(v) = *v {
            if b_star.is_none_or(|(_, m)| v > m) {
                b_star = Some((b, v));
            }
        }
    }
    PolicyCurves {
        b_values: surface.b_values.clone(),
        a_opt,
        a_opt_smooth,
        g_max,
        g_max_se,
        gov_opttax,
        gov_opttax_raw,
        b_star: b_star.map(|(b, _)| b),
        window,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZoneBoundary {
    /// `(b, a)` points where the interpolated growth factor crosses 1.
    pub crossings: Vec<(f64, f64)>,
    /// `(b, a)` on `(1 - ba) <eta> = 1`, kept where `a` lies inside the grid.
    pub trivial_bound: Vec<(f64, f64)>,
}

/// Per admin rate, the tax rates at which `g - 1` changes sign, linearly
/// interpolated between neighbouring finite cells. Cells with `g = 1`
/// exactly are boundary points themselves.
pub fn zone_boundary(surface: &GrowthSurface) -> ZoneBoundary {
    let mut crossings = Vec::new();
    for (bi, &b) in surface.b_values.iter().enumerate() {
        let finite: Vec<(f64, f64)> = surface
            .row(bi)
            .iter()
            .zip(&surface.a_values)
            .filter_map(|(c, &a)| c.avg_g().map(|g| (a, g - 1.0)))
            .collect();
        for (i, &(a0, d0)) in finite.iter().enumerate() {
            if d0 == 0.0 {
                crossings.push((b, a0));
                continue;
            }
            if let Some(&(a1, d1)) = finite.get(i + 1) {
                if d1 != 0.0 && (d0 < 0.0) != (d1 < 0.0) {
                    crossings.push((b, a0 + (a1 - a0) * d0 / (d0 - d1)));
                }
            }
        }
    }
    let mean = surface.spec.effective_mean();
    let a_lo = surface.a_values.first().copied().unwrap_or(0.0);
    let a_hi = surface.a_values.last().copied().unwrap_or(1.0);
    let trivial_bound = surface
        .b_values
        .iter()
        .filter_map(|&b| trivial_bound_tax_rate(mean, b).map(|a| (b, a)))
        .filter(|&(_, a)| (a_lo..=a_hi).contains(&a))
        .collect();
    ZoneBoundary {
        crossings,
        trivial_bound,
    }
}

/// Whether a cell grows by more than `slack` standard errors.
pub fn grows_significantly(surface: &GrowthSurface, b: usize, a: usize, slack: f64) -> bool {
    surface
        .log_g(b, a)
        .is_some_and(|l| l - slack * surface.se(b, a) > 0.0)
}

/// Whether a cell declines by more than `slack` standard errors (missing
/// cells count as declining).
pub fn declines_significantly(surface: &GrowthSurface, b: usize, a: usize, slack: f64) -> bool {
    surface
        .log_g(b, a)
        .is_none_or(|l| l + slack * surface.se(b, a) < 0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InclusionReport {
    /// Cells where the first surface grows significantly.
    pub growth_cells: usize,
    /// `(b index, a index)` where the first surface grows significantly and
    /// the second declines significantly.
    pub violations: Vec<(usize, usize)>,
    pub slack: f64,
}

impl InclusionReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that the growth zone of `inner` lies within that of `outer`.
pub fn compare_zones(
    inner: &GrowthSurface,
    outer: &GrowthSurface,
    slack: f64,
) -> Result<InclusionReport> {
    if inner.a_values != outer.a_values || inner.b_values != outer.b_values {
        return Err(Error::GridMismatch(
            "tax and admin rate grids differ".into(),
        ));
    }
    let mut growth_cells = 0;
    let mut violations = Vec::new();
    for b in 0..inner.b_values.len() {
        for a in 0..inner.a_values.len() {
            if grows_significantly(inner, b, a, slack) {
                growth_cells += 1;
                if declines_significantly(outer, b, a, slack) {
                    violations.push((b, a));
                }
            }
        }
    }
    Ok(InclusionReport {
        growth_cells,
        violations,
        slack,
    })
}

/// Cells on the destructive side of the trivial bound that nevertheless
/// grow by more than `slack` standard errors.
pub fn trivial_bound_violations(surface: &GrowthSurface, slack: f64) -> Vec<(usize, usize)> {
    let mean = surface.spec.effective_mean();
    let mut out = Vec::new();
    for (bi, &b) in surface.b_values.iter().enumerate() {
        for (ai, &a) in surface.a_values.iter().enumerate() {
            if (1.0 - b * a) * mean < 1.0 && grows_significantly(surface, bi, ai, slack) {
                out.push((bi, ai));
            }
        }
    }
    out
}
