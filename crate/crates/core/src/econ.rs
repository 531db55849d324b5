//! Single-period economics: production, taxation, redistribution.
//!
//! Everything here is a pure function of its inputs. The allocation-free
//! [`Redistributor`] is the kernel the trajectory code drives; the free
//! functions ([`assess`], [`redistribute`], [`step`]) wrap it for callers
//! that want owned vectors back.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-agent income (or human capital, since production is the identity).
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct IncomeVector(Vec<f64>);

impl IncomeVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyIncome);
        }
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(Error::InvalidIncome { index, value });
        }
        Ok(Self(values))
    }

    /// `n` agents with unit income.
    pub fn ones(n: usize) -> Result<Self> {
        Self::new(vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Total income Y.
    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }
}

impl AsRef<[f64]> for IncomeVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Everyone pays the same fraction of income.
    Proportional,
    /// A common fee, capped at the payer's income.
    Regressive,
    /// All income above a tax-free threshold.
    Progressive,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [
        Scheme::Proportional,
        Scheme::Regressive,
        Scheme::Progressive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Proportional => "proportional",
            Scheme::Regressive => "regressive",
            Scheme::Progressive => "progressive",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "proportional" | "prop" | "proptax" => Ok(Scheme::Proportional),
            "regressive" | "fee" | "dynfee" => Ok(Scheme::Regressive),
            "progressive" | "max" | "dynmax" => Ok(Scheme::Progressive),
            other => Err(Error::Config(format!("unknown tax scheme `{other}`"))),
        }
    }
}

/// Tax scheme plus tax rate `a` and admin rate `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiscalPolicy {
    pub scheme: Scheme,
    pub tax_rate: f64,
    pub admin_rate: f64,
}

impl FiscalPolicy {
    pub fn new(scheme: Scheme, tax_rate: f64, admin_rate: f64) -> Result<Self> {
        check_rate("tax rate", tax_rate)?;
        check_rate("admin rate", admin_rate)?;
        Ok(Self {
            scheme,
            tax_rate,
            admin_rate,
        })
    }

    /// Fraction of total income that survives one round of redistribution.
    pub fn retention(&self) -> f64 {
        1.0 - self.tax_rate * self.admin_rate
    }
}

fn check_rate(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::RateOutOfRange { name, value })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaxAssessment {
    pub taxes: Vec<f64>,
    pub public_good: f64,
    pub government_income: f64,
    /// `c_fee` for regressive, `c_max` for progressive.
    pub threshold: Option<f64>,
    /// Set when taxes were requested from a society with zero total income.
    pub degenerate: bool,
}

impl TaxAssessment {
    pub fn total_tax(&self) -> f64 {
        self.taxes.iter().sum()
    }
}

/// Income production from human capital; the wage is one.
pub fn production(human_capital: &IncomeVector) -> IncomeVector {
    human_capital.clone()
}

/// Human capital built from income: `h_i = eta_i * y_i`.
pub fn human_capital_production(income: &IncomeVector, eta: &[f64]) -> Result<IncomeVector> {
    check_eta(income.len(), eta)?;
    Ok(IncomeVector(
        income.0.iter().zip(eta).map(|(y, e)| y * e).collect(),
    ))
}

fn check_eta(n: usize, eta: &[f64]) -> Result<()> {
    if eta.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: eta.len(),
        });
    }
    match eta
        .iter()
        .enumerate()
        .find(|(_, e)| !(e.is_finite() && **e > 0.0))
    {
        Some((index, &value)) => Err(Error::InvalidEta { index, value }),
        None => Ok(()),
    }
}

/// The regressive fee `c_fee`: the smallest `f` with `sum_i min(y_i, f) = a * Y`.
pub fn solve_fee(income: &IncomeVector, tax_rate: f64) -> f64 {
    let mut sorted = income.0.clone();
    sorted.sort_unstable_by(f64::total_cmp);
    fee_from_sorted(&sorted, tax_rate * income.total(), tax_rate)
}

/// The progressive threshold `c_max`: the largest `m` with
/// `sum_i max(y_i - m, 0) = a * Y`.
pub fn solve_max(income: &IncomeVector, tax_rate: f64) -> f64 {
    let mut sorted = income.0.clone();
    sorted.sort_unstable_by(f64::total_cmp);
    max_from_sorted(&sorted, tax_rate * income.total(), tax_rate)
}

/// `sorted` ascending. On the k-th segment `[y_(k-1), y_(k)]` the collected
/// amount is `prefix_k + f * (n - k)`, so the first segment whose right end
/// reaches the target contains the fee.
fn fee_from_sorted(sorted: &[f64], target: f64, tax_rate: f64) -> f64 {
    let n = sorted.len();
    let top = sorted[n - 1];
    if tax_rate <= 0.0 {
        return 0.0;
    }
    if tax_rate >= 1.0 {
        return top;
    }
    let mut prefix = 0.0;
    let mut lower = 0.0;
    for (k, &v) in sorted.iter().enumerate() {
        let remaining = (n - k) as f64;
        if prefix + v * remaining >= target {
            return ((target - prefix) / remaining).clamp(lower, v);
        }
        prefix += v;
        lower = v;
    }
    top
}

/// `sorted` ascending, walked from the top. With the k largest incomes above
/// the threshold the collected amount is `top_k - k * m`.
fn max_from_sorted(sorted: &[f64], target: f64, tax_rate: f64) -> f64 {
    let n = sorted.len();
    let top = sorted[n - 1];
    if tax_rate <= 0.0 {
        return top;
    }
    if tax_rate >= 1.0 {
        return 0.0;
    }
    let mut top_sum = 0.0;
    for k in 1..=n {
        let upper = sorted[n - k];
        top_sum += upper;
        let next = if k < n { sorted[n - k - 1] } else { 0.0 };
        let kf = k as f64;
        if top_sum - kf * next >= target {
            return ((top_sum - target) / kf).clamp(next, upper);
        }
    }
    0.0
}

#[inline]
fn tax_of(income: f64, scheme: Scheme, tax_rate: f64, threshold: f64) -> f64 {
    match scheme {
        Scheme::Proportional => tax_rate * income,
        Scheme::Regressive => income.min(threshold),
        Scheme::Progressive => (income - threshold).max(0.0),
    }
}

/// Income left after tax, computed directly so that it is monotone in
/// `income` under rounding.
fn kept_of(income: f64, scheme: Scheme, tax_rate: f64, threshold: f64) -> f64 {
    match scheme {
        Scheme::Proportional => (1.0 - tax_rate) * income,
        Scheme::Regressive => (income - threshold).max(0.0),
        Scheme::Progressive => income.min(threshold),
    }
}

/// Scalars of one assessment, without the per-agent tax vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Levy {
    pub collected: f64,
    pub public_good: f64,
    pub government_income: f64,
    pub threshold: Option<f64>,
    pub degenerate: bool,
}

/// Reusable redistribution kernel. Holds a sort buffer so that repeated
/// steps of a trajectory do not allocate.
#[derive(Debug, Clone)]
pub struct Redistributor {
    policy: FiscalPolicy,
    scratch: Vec<f64>,
}

impl Redistributor {
    pub fn new(policy: FiscalPolicy) -> Self {
        Self {
            policy,
            scratch: Vec::new(),
        }
    }

    pub fn policy(&self) -> &FiscalPolicy {
        &self.policy
    }

    /// Threshold and degeneracy flag for `income`; `None` for proportional.
    fn threshold(&mut self, income: &[f64], total: f64) -> (Option<f64>, bool) {
        let FiscalPolicy {
            scheme, tax_rate, ..
        } = self.policy;
        let degenerate = total <= 0.0 && tax_rate > 0.0;
        if scheme == Scheme::Proportional {
            return (None, degenerate);
        }
        if degenerate {
            return (Some(0.0), true);
        }
        self.scratch.clear();
        self.scratch.extend_from_slice(income);
        self.scratch.sort_unstable_by(f64::total_cmp);
        let target = tax_rate * total;
        let c = match scheme {
            Scheme::Regressive => fee_from_sorted(&self.scratch, target, tax_rate),
            Scheme::Progressive => max_from_sorted(&self.scratch, target, tax_rate),
            Scheme::Proportional => unreachable!(),
        };
        (Some(c), false)
    }

    fn levy(&self, collected: f64, threshold: Option<f64>, degenerate: bool) -> Levy {
        let b = self.policy.admin_rate;
        Levy {
            collected,
            public_good: (1.0 - b) * collected,
            government_income: b * collected,
            threshold,
            degenerate,
        }
    }

    /// Replaces `income` by net income after tax and the per-capita public good.
    pub fn apply(&mut self, income: &mut [f64]) -> Levy {
        let total: f64 = income.iter().sum();
        let (threshold, degenerate) = self.threshold(income, total);
        let FiscalPolicy {
            scheme, tax_rate, ..
        } = self.policy;
        let c = threshold.unwrap_or(0.0);
        let mut collected = 0.0;
        for y in income.iter_mut() {
            let tax = tax_of(*y, scheme, tax_rate, c);
            collected += tax;
            *y = kept_of(*y, scheme, tax_rate, c);
        }
        let levy = self.levy(collected, threshold, degenerate);
        let share = levy.public_good / income.len() as f64;
        for y in income.iter_mut() {
            *y += share;
        }
        levy
    }

    pub fn assess(&mut self, income: &[f64]) -> TaxAssessment {
        let total: f64 = income.iter().sum();
        let (threshold, degenerate) = self.threshold(income, total);
        let FiscalPolicy {
            scheme, tax_rate, ..
        } = self.policy;
        let c = threshold.unwrap_or(0.0);
        let taxes: Vec<f64> = income
            .iter()
            .map(|&y| tax_of(y, scheme, tax_rate, c))
            .collect();
        let levy = self.levy(taxes.iter().sum(), threshold, degenerate);
        TaxAssessment {
            taxes,
            public_good: levy.public_good,
            government_income: levy.government_income,
            threshold: levy.threshold,
            degenerate: levy.degenerate,
        }
    }
}

pub fn assess(income: &IncomeVector, policy: &FiscalPolicy) -> TaxAssessment {
    Redistributor::new(*policy).assess(&income.0)
}

/// Net income `y_i - tax_i(y) + pg(y) / N`.
pub fn redistribute(income: &IncomeVector, policy: &FiscalPolicy) -> IncomeVector {
    let mut out = income.0.clone();
    Redistributor::new(*policy).apply(&mut out);
    IncomeVector(out)
}

/// Result of one period: human capital before redistribution and the
/// income that follows from it.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub human_capital: IncomeVector,
    pub income: IncomeVector,
}

/// `y(t+1) = redis(prod(HCprod(y(t))))`.
pub fn step(income: &IncomeVector, eta: &[f64], policy: &FiscalPolicy) -> Result<StepOutcome> {
    let human_capital = human_capital_production(income, eta)?;
    let income = redistribute(&production(&human_capital), policy);
    Ok(StepOutcome {
        human_capital,
        income,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG1: [f64; 6] = [100.0, 300.0, 600.0, 1000.0, 1500.0, 2100.0];

    fn iv(v: &[f64]) -> IncomeVector {
        IncomeVector::new(v.to_vec()).unwrap()
    }

    fn policy(scheme: Scheme, a: f64, b: f64) -> FiscalPolicy {
        FiscalPolicy::new(scheme, a, b).unwrap()
    }

    fn close(x: f64, y: f64, tol: f64) -> bool {
        (x - y).abs() <= tol * x.abs().max(y.abs()).max(1.0)
    }

    #[test]
    fn production_is_identity() {
        assert_eq!(
            production(&iv(&[1.0, 2.0, 3.0])).as_slice(),
            &[1.0, 2.0, 3.0]
        );
        assert_eq!(production(&iv(&[0.0, 5.0])).as_slice(), &[0.0, 5.0]);
    }

    #[test]
    fn income_vector_rejects_bad_input() {
        assert!(matches!(IncomeVector::new(vec![]), Err(Error::EmptyIncome)));
        assert!(matches!(
            IncomeVector::new(vec![1.0, -2.0]),
            Err(Error::InvalidIncome { index: 1, .. })
        ));
        assert!(IncomeVector::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn human_capital_production_multiplies() {
        let h = human_capital_production(&iv(&[1.0, 1.0]), &[1.0, 1.0]).unwrap();
        assert_eq!(h.as_slice(), &[1.0, 1.0]);
        let h = human_capital_production(&iv(&[2.0, 3.0]), &[0.5, 2.0]).unwrap();
        assert_eq!(h.as_slice(), &[1.0, 6.0]);
        let h = human_capital_production(&iv(&[1.0]), &[2.0 / 3.0]).unwrap();
        assert!((h.as_slice()[0] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn human_capital_production_rejects_bad_eta() {
        let y = iv(&[1.0, 1.0]);
        assert!(matches!(
            human_capital_production(&y, &[1.0, 0.0]),
            Err(Error::InvalidEta { index: 1, .. })
        ));
        assert!(human_capital_production(&y, &[1.0, f64::INFINITY]).is_err());
        assert!(human_capital_production(&y, &[-1.0, 1.0]).is_err());
        assert!(matches!(
            human_capital_production(&y, &[1.0]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn fee_matches_worked_example() {
        let c = solve_fee(&iv(&FIG1), 1.0 / 3.0);
        assert!((c - 1100.0 / 3.0).abs() < 1e-9, "{c}");
    }

    #[test]
    fn max_matches_worked_example() {
        let c = solve_max(&iv(&FIG1), 1.0 / 3.0);
        assert!((c - 8200.0 / 9.0).abs() < 1e-9, "{c}");
    }

    #[test]
    fn fee_edge_cases() {
        assert_eq!(solve_fee(&iv(&FIG1), 0.0), 0.0);
        for a in [0.1, 0.5, 0.9] {
            assert!(close(solve_fee(&iv(&[4.0; 7]), a), a * 4.0, 1e-12));
        }
        // min(1, f) + min(9, f) = 6
        assert!(close(solve_fee(&iv(&[1.0, 9.0]), 0.6), 5.0, 1e-12));
        // a = 1: smallest fee that takes everything
        assert_eq!(solve_fee(&iv(&FIG1), 1.0), 2100.0);
    }

    #[test]
    fn max_edge_cases() {
        assert_eq!(solve_max(&iv(&FIG1), 1.0), 0.0);
        assert_eq!(solve_max(&iv(&FIG1), 0.0), 2100.0);
        // max(9 - m, 0) + max(1 - m, 0) = 5
        assert!(close(solve_max(&iv(&[1.0, 9.0]), 0.5), 4.0, 1e-12));
    }

    #[test]
    fn zero_income_is_degenerate_not_an_error() {
        let y = iv(&[0.0, 0.0, 0.0]);
        assert_eq!(solve_fee(&y, 0.5), 0.0);
        assert_eq!(solve_max(&y, 0.5), 0.0);
        for scheme in Scheme::ALL {
            let t = assess(&y, &policy(scheme, 0.5, 0.1));
            assert!(t.degenerate);
            assert!(t.taxes.iter().all(|&x| x == 0.0));
            assert_eq!(
                redistribute(&y, &policy(scheme, 0.5, 0.1)).as_slice(),
                &[0.0; 3]
            );
        }
        assert!(!assess(&y, &policy(Scheme::Regressive, 0.0, 0.1)).degenerate);
    }

    #[test]
    fn assessment_of_worked_example() {
        for scheme in Scheme::ALL {
            let t = assess(&iv(&FIG1), &policy(scheme, 1.0 / 3.0, 0.25));
            assert!((t.total_tax() - 5600.0 / 3.0).abs() < 1e-9);
            assert!((t.public_good - 1400.0).abs() < 1e-9);
            assert!((t.government_income - 1400.0 / 3.0).abs() < 1e-9);
            assert_eq!(t.threshold.is_some(), scheme != Scheme::Proportional);
        }
    }

    #[test]
    fn schemes_agree_at_extreme_rates() {
        for scheme in Scheme::ALL {
            let t = assess(&iv(&FIG1), &policy(scheme, 0.0, 0.3));
            assert!(t.taxes.iter().all(|&x| x == 0.0));
            assert_eq!((t.public_good, t.government_income), (0.0, 0.0));

            let t = assess(&iv(&FIG1), &policy(scheme, 1.0, 0.0));
            assert_eq!(t.taxes, FIG1.to_vec());
            assert!((t.public_good - 5600.0).abs() < 1e-9);
            assert_eq!(t.government_income, 0.0);
        }
    }

    #[test]
    fn redistribution_examples() {
        let net = redistribute(&iv(&FIG1), &policy(Scheme::Proportional, 1.0 / 3.0, 0.25));
        assert!((net.as_slice()[0] - 300.0).abs() < 1e-9);
        for scheme in Scheme::ALL {
            assert_eq!(
                redistribute(&iv(&FIG1), &policy(scheme, 0.0, 0.5)).as_slice(),
                &FIG1
            );
            let eq = redistribute(&iv(&FIG1), &policy(scheme, 1.0, 0.0));
            for v in eq.as_slice() {
                assert!((v - 5600.0 / 6.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn step_with_flat_draws_shrinks_by_retention() {
        let y = IncomeVector::ones(8).unwrap();
        for scheme in Scheme::ALL {
            let out = step(&y, &[1.0; 8], &policy(scheme, 0.3, 0.2)).unwrap();
            for v in out.income.as_slice() {
                assert!((v - 0.94).abs() < 1e-12);
            }
            assert_eq!(out.human_capital.as_slice(), &[1.0; 8]);
        }
    }

    #[test]
    fn step_without_tax_is_pure_multiplication() {
        let y = iv(&[1.0, 2.0, 3.0]);
        let eta = [0.5, 1.5, 2.0];
        for scheme in Scheme::ALL {
            let out = step(&y, &eta, &policy(scheme, 0.0, 0.4)).unwrap();
            assert_eq!(out.income.as_slice(), &[0.5, 3.0, 6.0]);
        }
    }

    #[test]
    fn single_agent_step() {
        let y = iv(&[3.0]);
        for scheme in Scheme::ALL {
            for (a, b) in [(0.3, 0.2), (1.0, 0.5), (0.7, 0.0)] {
                let out = step(&y, &[1.7], &policy(scheme, a, b)).unwrap();
                let expected = (1.0 - a * b) * 1.7 * 3.0;
                assert!(close(out.income.as_slice()[0], expected, 1e-12));
            }
        }
    }

    #[test]
    fn policy_rejects_out_of_range_rates() {
        assert!(FiscalPolicy::new(Scheme::Proportional, 1.1, 0.0).is_err());
        assert!(FiscalPolicy::new(Scheme::Proportional, 0.5, -0.1).is_err());
        assert!(FiscalPolicy::new(Scheme::Proportional, f64::NAN, 0.0).is_err());
    }

    #[test]
    fn scheme_parses_aliases() {
        assert_eq!("dynfee".parse::<Scheme>().unwrap(), Scheme::Regressive);
        assert_eq!(
            "Progressive".parse::<Scheme>().unwrap(),
            Scheme::Progressive
        );
        assert!("flat".parse::<Scheme>().is_err());
    }
}
