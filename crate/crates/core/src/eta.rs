//! The distribution of human-capital growth factors.
//!
//! Growth factors are log-normal and pinned by their arithmetic mean
//! `<eta>` and geometric mean `<eta>_geo`:
//!
//! ```text
//! mu    = ln <eta>_geo
//! sigma = sqrt(2 (ln <eta> - mu))
//! ```
//!
//! An optional `scale` multiplies every draw; it stands in for the constant
//! factors of a Cobb-Douglas production function, which only rescale eta.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::econ::FiscalPolicy;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaSpec {
    pub mean: f64,
    pub geomean: f64,
    #[serde(default = "unit_scale")]
    pub scale: f64,
}

fn unit_scale() -> f64 {
    1.0
}

impl EtaSpec {
    pub fn new(mean: f64, geomean: f64) -> Result<Self> {
        Self::with_scale(mean, geomean, 1.0)
    }

    pub fn with_scale(mean: f64, geomean: f64, scale: f64) -> Result<Self> {
        let spec = Self {
            mean,
            geomean,
            scale,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("mean", self.mean),
            ("geomean", self.geomean),
            ("scale", self.scale),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidSpec(format!(
                    "{name} must be finite and positive, got {v}"
                )));
            }
        }
        if self.mean < self.geomean {
            return Err(Error::InvalidSpec(format!(
                "arithmetic mean {} is below geometric mean {}",
                self.mean, self.geomean
            )));
        }
        Ok(())
    }

    /// Mean of the scaled draws.
    pub fn effective_mean(&self) -> f64 {
        self.scale * self.mean
    }

    pub fn effective_geomean(&self) -> f64 {
        self.scale * self.geomean
    }

    pub fn is_degenerate(&self) -> bool {
        self.mean == self.geomean
    }

    /// Short label used in file names and tables, e.g. `1.5-0.6667`.
    pub fn label(&self) -> String {
        format!("{:.4}-{:.4}", self.mean, self.geomean)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RiskPreset {
    LessRisky,
    Intermediate,
    MoreRisky,
}

impl RiskPreset {
    pub const ALL: [RiskPreset; 3] = [
        RiskPreset::LessRisky,
        RiskPreset::Intermediate,
        RiskPreset::MoreRisky,
    ];

    /// Every preset balances `<eta> * <eta>_geo = 1`.
    pub fn spec(self) -> EtaSpec {
        let mean = match self {
            RiskPreset::LessRisky => 1.25,
            RiskPreset::Intermediate => 1.5,
            RiskPreset::MoreRisky => 3.0,
        };
        EtaSpec {
            mean,
            geomean: 1.0 / mean,
            scale: 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RiskPreset::LessRisky => "less-risky",
            RiskPreset::Intermediate => "intermediate",
            RiskPreset::MoreRisky => "more-risky",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }
}

pub fn presets() -> [EtaSpec; 3] {
    RiskPreset::ALL.map(RiskPreset::spec)
}

/// Parameters of the normal distribution underlying `ln eta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogNormalParams {
    pub mu: f64,
    pub sigma: f64,
}

impl LogNormalParams {
    pub fn mean(&self) -> f64 {
        (self.mu + 0.5 * self.sigma * self.sigma).exp()
    }

    pub fn geomean(&self) -> f64 {
        self.mu.exp()
    }
}

/// Unscaled log-normal parameters of `spec`.
pub fn lognormal_params(spec: &EtaSpec) -> Result<LogNormalParams> {
    spec.validate()?;
    let mu = spec.geomean.ln();
    let spread = 2.0 * (spec.mean.ln() - mu);
    if spread < 0.0 {
        return Err(Error::InvalidSpec(format!(
            "no real sigma for mean {} and geomean {}",
            spec.mean, spec.geomean
        )));
    }
    Ok(LogNormalParams {
        mu,
        sigma: spread.sqrt(),
    })
}

fn effective_params(spec: &EtaSpec) -> Result<LogNormalParams> {
    let p = lognormal_params(spec)?;
    Ok(LogNormalParams {
        mu: p.mu + spec.scale.ln(),
        sigma: p.sigma,
    })
}

/// `N x T` growth factors, stored time-major so that one period's draws
/// are contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawMatrix {
    agents: usize,
    periods: usize,
    seed: u64,
    spec: EtaSpec,
    draws: Vec<f64>,
}

impl DrawMatrix {
    /// Draws for agent `i` come from lane `i` of the seed's stream, one
    /// standard normal per period. A smaller society therefore sees exactly
    /// the first rows of a larger one.
    pub fn sample(spec: &EtaSpec, seed: u64, agents: usize, periods: usize) -> Result<Self> {
        if agents == 0 || periods == 0 {
            return Err(Error::Config(format!(
                "draw matrix needs N >= 1 and T >= 1, got N={agents}, T={periods}"
            )));
        }
        let params = lognormal_params(spec)?;
        let mut draws = vec![0.0; agents * periods];
        if params.sigma == 0.0 {
            draws.fill(spec.geomean * spec.scale);
        } else {
            let key = rng::stream_key(seed, "eta", &[]);
            for i in 0..agents {
                let mut r = rng::lane_rng(key, i as u64);
                for t in 0..periods {
                    let z: f64 = StandardNormal.sample(&mut r);
                    draws[t * agents + i] = (params.mu + params.sigma * z).exp() * spec.scale;
                }
            }
        }
        Ok(Self {
            agents,
            periods,
            seed,
            spec: *spec,
            draws,
        })
    }

    pub fn agents(&self) -> usize {
        self.agents
    }

    pub fn periods(&self) -> usize {
        self.periods
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn spec(&self) -> &EtaSpec {
        &self.spec
    }

    /// Growth factors of all agents in period `t`.
    pub fn column(&self, t: usize) -> &[f64] {
        &self.draws[t * self.agents..(t + 1) * self.agents]
    }

    pub fn get(&self, agent: usize, t: usize) -> f64 {
        self.draws[t * self.agents + agent]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.draws
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailStats {
    /// P(eta < 1)
    pub p_decline: f64,
    /// P(eta >= 2)
    pub p_double: f64,
    /// P(eta > 10)
    pub p_tenfold: f64,
}

pub fn tail_stats(spec: &EtaSpec) -> Result<TailStats> {
    let p = effective_params(spec)?;
    if p.sigma == 0.0 {
        let eta = p.mu.exp();
        let ind = |b: bool| if b { 1.0 } else { 0.0 };
        return Ok(TailStats {
            p_decline: ind(eta < 1.0),
            p_double: ind(eta >= 2.0),
            p_tenfold: ind(eta > 10.0),
        });
    }
    let phi = Normal::new(0.0, 1.0).expect("standard normal");
    let above = |x: f64| phi.sf((x.ln() - p.mu) / p.sigma);
    Ok(TailStats {
        p_decline: phi.cdf(-p.mu / p.sigma),
        p_double: above(2.0),
        p_tenfold: above(10.0),
    })
}

/// Whether individual trajectories decay while the expected value grows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthCondition {
    pub mu_log_eta: f64,
    pub log_mean_eta: f64,
    pub sigma2_log_eta: f64,
    /// `mu_log_eta < 0 < ln <eta>`
    pub holds: bool,
    /// `mu_log_eta < 0` and `sigma^2 > -2 mu`; agrees with `holds`.
    pub holds_variance_form: bool,
}

pub fn growth_condition(spec: &EtaSpec) -> Result<GrowthCondition> {
    let p = effective_params(spec)?;
    let log_mean = spec.effective_mean().ln();
    let s2 = p.sigma * p.sigma;
    Ok(GrowthCondition {
        mu_log_eta: p.mu,
        log_mean_eta: log_mean,
        sigma2_log_eta: s2,
        holds: p.mu < 0.0 && 0.0 < log_mean,
        holds_variance_form: p.mu < 0.0 && s2 > -2.0 * p.mu,
    })
}

/// Mean and variance of `ln y(t)` for a lone agent after `t` periods.
pub fn clt_params(params: &LogNormalParams, t: f64) -> (f64, f64) {
    (t * params.mu, t * params.sigma * params.sigma)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BorderCase {
    /// No randomness: `g = 1 - ab`.
    RedistributionOnly,
    /// No taxes: `g = <eta>_geo`.
    NoRedistribution,
    /// Full tax, infinite society: `g = (1 - ab) <eta>`.
    FullTaxInfiniteSociety,
}

impl BorderCase {
    pub fn number(self) -> u8 {
        match self {
            BorderCase::RedistributionOnly => 1,
            BorderCase::NoRedistribution => 2,
            BorderCase::FullTaxInfiniteSociety => 3,
        }
    }

    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(BorderCase::RedistributionOnly),
            2 => Some(BorderCase::NoRedistribution),
            3 => Some(BorderCase::FullTaxInfiniteSociety),
            _ => None,
        }
    }
}

/// Analytic growth factor at a border case; rejects inputs the case does
/// not cover.
pub fn border_growth(policy: &FiscalPolicy, spec: &EtaSpec, case: BorderCase) -> Result<f64> {
    spec.validate()?;
    let reject = |reason: String| {
        Err(Error::BorderCase {
            case: case.number(),
            reason,
        })
    };
    match case {
        BorderCase::RedistributionOnly => {
            if spec.effective_mean() != 1.0 || spec.effective_geomean() != 1.0 {
                return reject(format!(
                    "needs eta identically 1, got mean {} geomean {}",
                    spec.effective_mean(),
                    spec.effective_geomean()
                ));
            }
            Ok(policy.retention())
        }
        BorderCase::NoRedistribution => {
            if policy.tax_rate != 0.0 {
                return reject(format!("needs a = 0, got {}", policy.tax_rate));
            }
            Ok(spec.effective_geomean())
        }
        BorderCase::FullTaxInfiniteSociety => {
            if policy.tax_rate != 1.0 {
                return reject(format!("needs a = 1, got {}", policy.tax_rate));
            }
            Ok(mean_growth_bound(policy, spec))
        }
    }
}

/// `(1 - ab) <eta>`: growth of the expected total income, an upper bound on
/// realized growth for any scheme and society size.
pub fn mean_growth_bound(policy: &FiscalPolicy, spec: &EtaSpec) -> f64 {
    policy.retention() * spec.effective_mean()
}

/// Tax rate on the curve `(1 - ba) <eta> = 1`; above it income cannot grow.
/// `None` for `b = 0` where the curve is at infinity.
pub fn trivial_bound_tax_rate(mean_eta: f64, admin_rate: f64) -> Option<f64> {
    (admin_rate > 0.0).then(|| (1.0 - 1.0 / mean_eta) / admin_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::econ::Scheme;

    fn intermediate() -> EtaSpec {
        RiskPreset::Intermediate.spec()
    }

    #[test]
    fn intermediate_params() {
        let p = lognormal_params(&intermediate()).unwrap();
        assert!((p.mu - -0.405).abs() < 5e-4);
        assert!((p.sigma - 1.274).abs() < 5e-4);
        assert!((p.mu - -0.405_465_108_108_164_4).abs() < 1e-12);
        assert!((p.sigma - 1.273_522_843_310_106_2).abs() < 1e-12);
    }

    #[test]
    fn degenerate_and_less_risky_params() {
        let p = lognormal_params(&EtaSpec::new(1.0, 1.0).unwrap()).unwrap();
        assert_eq!((p.mu, p.sigma), (0.0, 0.0));
        // direct evaluation of the conversion formulas
        let p = lognormal_params(&EtaSpec::new(1.25, 0.8).unwrap()).unwrap();
        assert!((p.mu - -0.223_143_551_314_209_7).abs() < 1e-12);
        assert!((p.sigma - 0.944_761_454_154_877_7).abs() < 1e-12);
        assert!((p.mean() - 1.25).abs() < 1e-12 && (p.geomean() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn mean_below_geomean_is_rejected() {
        assert!(EtaSpec::new(0.5, 0.7).is_err());
        let bad = EtaSpec {
            mean: 0.5,
            geomean: 0.7,
            scale: 1.0,
        };
        assert!(lognormal_params(&bad).is_err());
        assert!(EtaSpec::new(0.0, 0.0).is_err());
    }

    #[test]
    fn presets_are_balanced() {
        let [less, mid, more] = presets();
        assert_eq!((less.mean, less.geomean), (1.25, 0.8));
        assert_eq!(mid.mean, 1.5);
        assert!((mid.geomean - 0.6667).abs() < 1e-4);
        assert_eq!(more.mean, 3.0);
        assert!((more.geomean - 0.3333).abs() < 1e-4);
        for s in presets() {
            assert!((s.mean * s.geomean - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_sampling_is_exact() {
        let spec = EtaSpec::new(0.9, 0.9).unwrap();
        let m = DrawMatrix::sample(&spec, 3, 4, 5).unwrap();
        assert!(m.as_slice().iter().all(|&x| x == 0.9));
    }

    #[test]
    fn sampling_is_reproducible() {
        let a = DrawMatrix::sample(&intermediate(), 42, 5, 20).unwrap();
        let b = DrawMatrix::sample(&intermediate(), 42, 5, 20).unwrap();
        assert_eq!(a, b);
        let c = DrawMatrix::sample(&intermediate(), 43, 5, 20).unwrap();
        assert_ne!(a, c);
        assert!(a.as_slice().iter().all(|&x| x.is_finite() && x > 0.0));
    }

    #[test]
    fn smaller_society_sees_prefix_rows() {
        let small = DrawMatrix::sample(&intermediate(), 9, 3, 10).unwrap();
        let big = DrawMatrix::sample(&intermediate(), 9, 8, 10).unwrap();
        for t in 0..10 {
            assert_eq!(small.column(t), &big.column(t)[..3]);
        }
    }

    #[test]
    fn sampling_rejects_empty_shapes() {
        assert!(DrawMatrix::sample(&intermediate(), 1, 0, 5).is_err());
        assert!(DrawMatrix::sample(&intermediate(), 1, 5, 0).is_err());
    }

    #[test]
    fn scale_multiplies_draws() {
        let base = DrawMatrix::sample(&intermediate(), 5, 2, 4).unwrap();
        let scaled_spec = EtaSpec::with_scale(1.5, 2.0 / 3.0, 2.0).unwrap();
        let scaled = DrawMatrix::sample(&scaled_spec, 5, 2, 4).unwrap();
        for (x, y) in base.as_slice().iter().zip(scaled.as_slice()) {
            assert!((2.0 * x - y).abs() <= 1e-12 * y);
        }
    }

    #[test]
    fn intermediate_tails() {
        let t = tail_stats(&intermediate()).unwrap();
        assert!((t.p_decline - 0.625).abs() < 5e-4);
        assert!((t.p_double - 0.194).abs() < 5e-4);
        assert!((t.p_tenfold - 0.017).abs() < 5e-4);
    }

    #[test]
    fn less_risky_tails_match_quadrature() {
        // frozen from adaptive quadrature of the normal density of ln eta
        let t = tail_stats(&RiskPreset::LessRisky.spec()).unwrap();
        assert!((t.p_decline - 0.593_357_521_603_450_2).abs() < 1e-9);
        assert!((t.p_double - 0.166_056_982_610_837_6).abs() < 1e-9);
        assert!((t.p_tenfold - 0.003_754_292_995_698_9).abs() < 1e-9);
    }

    #[test]
    fn degenerate_tails_are_indicators() {
        let t = tail_stats(&EtaSpec::new(1.0, 1.0).unwrap()).unwrap();
        assert_eq!((t.p_decline, t.p_double, t.p_tenfold), (0.0, 0.0, 0.0));
        let t = tail_stats(&EtaSpec::new(0.5, 0.5).unwrap()).unwrap();
        assert_eq!(t.p_decline, 1.0);
    }

    #[test]
    fn growth_condition_cases() {
        let c = growth_condition(&intermediate()).unwrap();
        assert!(c.holds && c.holds_variance_form);
        let c = growth_condition(&EtaSpec::new(1.1, 1.05).unwrap()).unwrap();
        assert!(!c.holds && !c.holds_variance_form);
        // sigma^2 = -2 mu exactly: ln <eta> = 0, strict inequality fails
        let c = growth_condition(&EtaSpec::new(1.0, (-0.5f64).exp()).unwrap()).unwrap();
        assert_eq!(c.log_mean_eta, 0.0);
        assert!(!c.holds && !c.holds_variance_form);
    }

    #[test]
    fn clt_scaling() {
        let p = lognormal_params(&intermediate()).unwrap();
        assert_eq!(clt_params(&p, 0.0), (0.0, 0.0));
        assert_eq!(clt_params(&p, 1.0), (p.mu, p.sigma * p.sigma));
        let (m, v) = clt_params(&p, 500.0);
        assert!((m - -202.732_554_054_082_2).abs() < 1e-9);
        assert!((v - 810.930_216_216_328_7).abs() < 1e-9);
    }

    #[test]
    fn border_cases() {
        let pol = |a, b| FiscalPolicy::new(Scheme::Proportional, a, b).unwrap();
        let flat = EtaSpec::new(1.0, 1.0).unwrap();
        let g = border_growth(&pol(0.3, 0.2), &flat, BorderCase::RedistributionOnly).unwrap();
        assert!((g - 0.94).abs() < 1e-15);
        let g = border_growth(
            &pol(0.0, 0.5),
            &intermediate(),
            BorderCase::NoRedistribution,
        )
        .unwrap();
        assert!((g - 0.6667).abs() < 1e-4);
        let g = border_growth(
            &pol(1.0, 0.2),
            &intermediate(),
            BorderCase::FullTaxInfiniteSociety,
        )
        .unwrap();
        assert!((g - 1.2).abs() < 1e-12);
        assert!((mean_growth_bound(&pol(0.3, 0.2), &intermediate()) - 1.41).abs() < 1e-12);
    }

    #[test]
    fn border_case_preconditions() {
        let pol = |a, b| FiscalPolicy::new(Scheme::Regressive, a, b).unwrap();
        let err = |r: Result<f64>| matches!(r, Err(Error::BorderCase { .. }));
        assert!(err(border_growth(
            &pol(0.3, 0.2),
            &intermediate(),
            BorderCase::RedistributionOnly
        )));
        assert!(err(border_growth(
            &pol(0.3, 0.2),
            &intermediate(),
            BorderCase::NoRedistribution
        )));
        assert!(err(border_growth(
            &pol(0.3, 0.2),
            &intermediate(),
            BorderCase::FullTaxInfiniteSociety
        )));
    }

    #[test]
    fn trivial_bound() {
        let a = trivial_bound_tax_rate(1.5, 0.5).unwrap();
        assert!((a - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(trivial_bound_tax_rate(1.5, 0.0), None);
    }
}
