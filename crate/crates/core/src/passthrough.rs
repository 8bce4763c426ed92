//! Quantile and transaction-weighted pass-through.
//!
//! Prices are composed as `p(u; c) = φ(μ(u), c)` from a firm's margin quantile
//! function. Transaction-weighted statistics weight each posted price by the
//! mass of transactions it attracts, which is proportional to `1 / (p − c)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::consideration::ConsiderationStructure;
use crate::curvature::{self, DemandSpec, Invertibility};
use crate::error::{Error, Result};
use crate::margin_game::{EquilibriumProfile, MarginDistribution};

fn check_inputs(spec: &DemandSpec, c: f64) -> Result<()> {
    curvature::CostParam::new(c)?;
    spec.validate()?;
    match curvature::invertibility_check(spec, c) {
        Invertibility::Ok => Ok(()),
        Invertibility::Violation { p } => Err(Error::InvertibilityViolated { p }),
    }
}

fn bounded_away(dist: &MarginDistribution) -> Result<()> {
    if dist.support_lo() > 0.0 {
        Ok(())
    } else {
        Err(Error::SupportTouchesCost { firm: dist.firm() })
    }
}

/// Prices and quantile pass-through on a probability grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantileCurve {
    pub u: Vec<f64>,
    pub mu: Vec<f64>,
    pub price: Vec<f64>,
    pub tau_q: Vec<f64>,
    /// Grid points whose `τ^Q` is an interior limit at a knife-edge slope.
    pub boundary: Vec<f64>,
}

pub fn quantile_passthrough(
    profile: &EquilibriumProfile,
    firm: usize,
    spec: &DemandSpec,
    c: f64,
    grid: &[f64],
) -> Result<QuantileCurve> {
    check_inputs(spec, c)?;
    if let Some(&u) = grid.iter().find(|u| !(0.0..=1.0).contains(*u)) {
        return Err(Error::BadConfig(format!("quantile grid point {u} outside [0, 1]")));
    }
    let dist = profile.dist(firm)?;
    let rows: Vec<(f64, f64, curvature::PassRate)> = grid
        .par_iter()
        .map(|&u| {
            let mu = dist.quantile_eval(u);
            (mu, curvature::phi_unchecked(spec, c, mu), curvature::phi_c_unchecked(spec, c, mu))
        })
        .collect();
    Ok(QuantileCurve {
        u: grid.to_vec(),
        mu: rows.iter().map(|r| r.0).collect(),
        price: rows.iter().map(|r| r.1).collect(),
        tau_q: rows.iter().map(|r| r.2.tau).collect(),
        boundary: grid.iter().zip(&rows).filter(|(_, r)| r.2.boundary).map(|(&u, _)| u).collect(),
    })
}

/// `π_i(c) = (1 − c) x(1) π_i*`.
pub fn firm_profit(profile: &EquilibriumProfile, firm: usize, spec: &DemandSpec, c: f64) -> Result<f64> {
    curvature::CostParam::new(c)?;
    Ok((1.0 - c) * spec.x_at_one() * profile.profit(firm)?)
}

/// Mass of transactions at posted price `p`: `π_i(c) / (p − c)`.
pub fn transaction_mass(profile: &EquilibriumProfile, firm: usize, spec: &DemandSpec, c: f64, p: f64) -> Result<f64> {
    let profit = firm_profit(profile, firm, spec, c)?;
    if p <= c {
        return Err(Error::PriceAtCost { p, c });
    }
    Ok(profit / (p - c))
}

/// `B = ∫₀¹ du / (p(u; c) − c)`.
pub fn harmonic_b(profile: &EquilibriumProfile, firm: usize, spec: &DemandSpec, c: f64) -> Result<f64> {
    check_inputs(spec, c)?;
    let dist = profile.dist(firm)?;
    bounded_away(dist)?;
    Ok(dist.expect(|mu| 1.0 / (curvature::phi_unchecked(spec, c, mu) - c)))
}

/// Transaction-weighted mean price `c + 1/B`.
pub fn mean_paid(profile: &EquilibriumProfile, firm: usize, spec: &DemandSpec, c: f64) -> Result<f64> {
    Ok(c + 1.0 / harmonic_b(profile, firm, spec, c)?)
}

/// `τ^trans = 1 + ∫₀¹ (φ_c − 1)/(φ − c)² du / B²`.
pub fn transaction_passthrough(profile: &EquilibriumProfile, firm: usize, spec: &DemandSpec, c: f64) -> Result<f64> {
    let b = harmonic_b(profile, firm, spec, c)?;
    let dist = profile.dist(firm)?;
    let num = dist.expect(|mu| {
        let gap = curvature::phi_unchecked(spec, c, mu) - c;
        (curvature::phi_c_unchecked(spec, c, mu).tau - 1.0) / (gap * gap)
    });
    Ok(1.0 + num / (b * b))
}

/// `K_i = ∫₀¹ du / μ_i(u)`; under unit demand `τ^trans = 1 − 1/K_i`.
pub fn unit_k(profile: &EquilibriumProfile, firm: usize) -> Result<f64> {
    let dist = profile.dist(firm)?;
    bounded_away(dist)?;
    Ok(dist.expect(|mu| 1.0 / mu))
}

/// Unit-demand transaction pass-through of a symmetric market, `1 − ρ/H̄`.
pub fn symmetric_stat(structure: &ConsiderationStructure) -> Result<f64> {
    if !structure.is_symmetric() {
        return Err(Error::NotSymmetric);
    }
    let pgf = structure.pgf(1)?;
    let rho = pgf.rho();
    if rho <= 0.0 {
        return Err(Error::SupportTouchesCost { firm: 1 });
    }
    Ok(1.0 - rho / pgf.mean())
}

/// Transaction-weighted CDF `[∫_{s ≤ p} dF(s)/(s − c)] / B`.
pub fn transaction_cdf(profile: &EquilibriumProfile, firm: usize, spec: &DemandSpec, c: f64, p: f64) -> Result<f64> {
    let b = harmonic_b(profile, firm, spec, c)?;
    let dist = profile.dist(firm)?;
    if p < c {
        return Ok(0.0);
    }
    let mu_p = curvature::mu_of_price(spec, c, p.min(1.0))?;
    let inv_gap = |mu: f64| 1.0 / (curvature::phi_unchecked(spec, c, mu) - c);
    Ok((dist.expect_below(inv_gap, mu_p) / b).min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PassThroughReport {
    pub firm: usize,
    pub demand: DemandSpec,
    pub cost: f64,
    #[serde(flatten)]
    pub quantiles: QuantileCurve,
    #[serde(rename = "B")]
    pub b: f64,
    pub mean_paid: f64,
    pub tau_trans: f64,
    #[serde(rename = "K", skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    pub flags: Vec<String>,
}

impl PassThroughReport {
    pub fn compute(profile: &EquilibriumProfile, firm: usize, spec: &DemandSpec, c: f64, grid: &[f64]) -> Result<Self> {
        let quantiles = quantile_passthrough(profile, firm, spec, c, grid)?;
        let b = harmonic_b(profile, firm, spec, c)?;
        let tau_trans = transaction_passthrough(profile, firm, spec, c)?;
        let k = match spec {
            DemandSpec::Unit => Some(unit_k(profile, firm)?),
            _ => None,
        };
        let flags = quantiles
            .boundary
            .iter()
            .map(|u| format!("tau_q at u={u} is an interior limit (margin slope vanishes)"))
            .collect();
        Ok(Self { firm, demand: spec.clone(), cost: c, quantiles, b, mean_paid: c + 1.0 / b, tau_trans, k, flags })
    }

    /// Columns `u,mu,price,tau_q`.
    pub fn to_csv(&self) -> String {
        let q = &self.quantiles;
        let mut out = String::from("u,mu,price,tau_q\n");
        for k in 0..q.u.len() {
            out.push_str(&format!("{},{},{},{}\n", q.u[k], q.mu[k], q.price[k], q.tau_q[k]));
        }
        out
    }
}

/// `points` evenly spaced values on `[0, 1]`, endpoints included.
pub fn uniform_grid(points: usize) -> Vec<f64> {
    let n = points.max(2) - 1;
    (0..=n).map(|k| k as f64 / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::margin_game::solve;

    fn binom(n: usize, l: f64) -> EquilibriumProfile {
        solve(&ConsiderationStructure::binomial(n, l).unwrap()).unwrap()
    }

    fn monopoly() -> EquilibriumProfile {
        solve(&ConsiderationStructure::from_explicit(1, vec![(vec![1], 1.0)], None).unwrap()).unwrap()
    }

    #[test]
    fn quantile_unit_binomial() {
        let prof = binom(2, 0.5);
        let q = quantile_passthrough(&prof, 1, &DemandSpec::Unit, 0.0, &uniform_grid(11)).unwrap();
        for k in 0..q.u.len() {
            let want = 1.0 / (2.0 - q.u[k]);
            assert!((q.price[k] - want).abs() < 1e-14);
            assert!((q.tau_q[k] - (1.0 - want)).abs() < 1e-14);
        }
        assert!((q.tau_q[0] - 0.5).abs() < 1e-15 && q.tau_q[10].abs() < 1e-15);
    }

    #[test]
    fn quantile_monopoly() {
        let q = quantile_passthrough(&monopoly(), 1, &DemandSpec::Unit, 0.5, &[0.0, 0.5, 1.0]).unwrap();
        assert!(q.price.iter().all(|&p| p == 1.0));
        assert!(q.tau_q.iter().all(|&t| t == 0.0));
    }

    #[test]
    fn quantile_rejects_bad_inputs() {
        let prof = binom(2, 0.5);
        assert!(matches!(
            quantile_passthrough(&prof, 1, &DemandSpec::Ces { eta: 2.0 }, 0.3, &[0.5]),
            Err(Error::InvertibilityViolated { .. })
        ));
        assert!(quantile_passthrough(&prof, 1, &DemandSpec::Unit, 0.3, &[1.5]).is_err());
        assert!(matches!(quantile_passthrough(&prof, 3, &DemandSpec::Unit, 0.3, &[0.5]), Err(Error::BadFirmIndex { .. })));
    }

    #[test]
    fn transaction_mass_examples() {
        let prof = binom(2, 0.5);
        assert!((transaction_mass(&prof, 1, &DemandSpec::Unit, 0.0, 0.5).unwrap() - 0.5).abs() < 1e-15);
        assert!((transaction_mass(&prof, 1, &DemandSpec::Unit, 0.0, 1.0).unwrap() - 0.25).abs() < 1e-15);
        assert!(matches!(transaction_mass(&prof, 1, &DemandSpec::Unit, 0.3, 0.3), Err(Error::PriceAtCost { .. })));
        let t = DemandSpec::Table(curvature::DemandTable::new(&[(0.0, 2.0), (1.0, 2.0)]).unwrap());
        let a = transaction_mass(&prof, 1, &t, 0.0, 0.7).unwrap();
        let b = transaction_mass(&prof, 1, &DemandSpec::Unit, 0.0, 0.7).unwrap();
        assert!((a - 2.0 * b).abs() < 1e-15);
    }

    #[test]
    fn harmonic_and_mean_paid() {
        let prof = binom(2, 0.5);
        assert!((harmonic_b(&prof, 1, &DemandSpec::Unit, 0.0).unwrap() - 1.5).abs() < 1e-12);
        assert!((harmonic_b(&prof, 1, &DemandSpec::Unit, 0.5).unwrap() - 3.0).abs() < 1e-12);
        assert!((mean_paid(&prof, 1, &DemandSpec::Unit, 0.0).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!((mean_paid(&prof, 1, &DemandSpec::Unit, 0.5).unwrap() - (0.5 + 1.0 / 3.0)).abs() < 1e-12);
        let m = monopoly();
        assert!((harmonic_b(&m, 1, &DemandSpec::Unit, 0.4).unwrap() - 1.0 / 0.6).abs() < 1e-14);
        assert!((mean_paid(&m, 1, &DemandSpec::Unit, 0.4).unwrap() - 1.0).abs() < 1e-14);
        let bertrand = solve(&ConsiderationStructure::spatial(4, 2).unwrap()).unwrap();
        assert!(matches!(harmonic_b(&bertrand, 1, &DemandSpec::Unit, 0.0), Err(Error::SupportTouchesCost { .. })));
        assert!(matches!(transaction_passthrough(&bertrand, 1, &DemandSpec::Unit, 0.0), Err(Error::SupportTouchesCost { .. })));
    }

    #[test]
    fn unit_demand_statistics() {
        let prof = binom(2, 0.5);
        for c in [0.0, 0.3, 0.7] {
            let t = transaction_passthrough(&prof, 1, &DemandSpec::Unit, c).unwrap();
            assert!((t - 1.0 / 3.0).abs() < 1e-9, "c={c} t={t}");
        }
        assert!((unit_k(&prof, 1).unwrap() - 1.5).abs() < 1e-12);
        let s = symmetric_stat(&ConsiderationStructure::binomial(2, 0.5).unwrap()).unwrap();
        assert!((s - 1.0 / 3.0).abs() < 1e-15);
        let s = symmetric_stat(&ConsiderationStructure::binomial(3, 0.5).unwrap()).unwrap();
        assert!((s - (1.0 - 0.25 * 1.5 / 0.875)).abs() < 1e-14);
        assert!((unit_k(&monopoly(), 1).unwrap() - 1.0).abs() < 1e-15);
        let asym = ConsiderationStructure::independent(&[0.6, 0.4]).unwrap();
        assert!(matches!(symmetric_stat(&asym), Err(Error::NotSymmetric)));
    }

    #[test]
    fn ces_transaction_matches_finite_difference() {
        let prof = binom(2, 0.5);
        let spec = DemandSpec::Ces { eta: 1.0 };
        let h = 1e-5;
        let fd = (mean_paid(&prof, 1, &spec, 0.5 + h).unwrap() - mean_paid(&prof, 1, &spec, 0.5 - h).unwrap()) / (2.0 * h);
        let t = transaction_passthrough(&prof, 1, &spec, 0.5).unwrap();
        assert!((t - fd).abs() < 1e-6, "{t} vs {fd}");
    }

    #[test]
    fn transaction_cdf_examples() {
        let prof = binom(2, 0.5);
        let f = transaction_cdf(&prof, 1, &DemandSpec::Unit, 0.0, 2.0 / 3.0).unwrap();
        assert!((f - 0.875 / 1.5).abs() < 1e-12, "{f}");
        assert!((transaction_cdf(&prof, 1, &DemandSpec::Unit, 0.0, 1.0).unwrap() - 1.0).abs() < 1e-12);
        for k in 1..20 {
            let p = 0.5 + 0.5 * k as f64 / 20.0;
            let ft = transaction_cdf(&prof, 1, &DemandSpec::Unit, 0.0, p).unwrap();
            let fp = prof.dist(1).unwrap().cdf_eval(p);
            assert!(ft >= fp - 1e-12);
        }
    }

    #[test]
    fn report_round_trip_and_csv() {
        let prof = binom(2, 0.5);
        let r = PassThroughReport::compute(&prof, 1, &DemandSpec::Unit, 0.2, &uniform_grid(5)).unwrap();
        assert!((r.tau_trans - (1.0 - 1.0 / r.k.unwrap())).abs() < 1e-9);
        assert!(r.mean_paid >= r.quantiles.price[0] && r.mean_paid <= r.quantiles.price[4]);
        let csv = r.to_csv();
        assert_eq!(csv.lines().count(), 6);
        assert!(csv.starts_with("u,mu,price,tau_q\n"));
        let json = serde_json::to_value(&r).unwrap();
        assert!(json.get("K").is_some() && json.get("tau_q").is_some());
    }
}
