//! Robust pass-through envelopes.

use rayon::prelude::*;
use serde::Serialize;

use crate::curvature::{self, DemandSpec};
use crate::error::{Error, Result};

/// Default cost for [`critical_elasticity`].
pub const CRITICAL_COST: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UniversalBounds {
    pub price_lo: f64,
    pub price_hi: f64,
    pub tau_lo: f64,
}

/// Bounds that hold for every admissible demand: `c ≤ φ ≤ c + μ(1 − c)` and
/// `φ_c ≥ 1 − μ`, all attained by unit demand.
pub fn universal_bounds(mu: f64, c: f64) -> Result<UniversalBounds> {
    let c = curvature::CostParam::new(c)?.c();
    if !(0.0..=1.0).contains(&mu) {
        return Err(Error::BadMu(mu));
    }
    Ok(UniversalBounds { price_lo: c, price_hi: c + mu * (1.0 - c), tau_lo: 1.0 - mu })
}

/// Upper pass-through bound over a demand family: `linear`, `exp` or
/// `ces1` (unit-elastic CES); `unit` gives its exact value `1 − μ`.
pub fn family_bound(family: &str, mu: f64, c: f64) -> Result<f64> {
    let b = universal_bounds(mu, c)?;
    let d = 1.0 - c;
    match family {
        "unit" => Ok(b.tau_lo),
        "linear" => Ok((1.0 + (1.0 - mu).sqrt()) / 2.0),
        "exp" | "exponential" => Ok(1.0),
        "ces1" | "ces:eta=1" => Ok((1.0 - mu) / (1.0 - mu * d).powi(2)),
        other => Err(Error::UnknownFamily(other.to_string())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopePoint {
    pub family: &'static str,
    pub param: Option<f64>,
    pub mu: f64,
    /// `None` when the point is infeasible.
    pub tau: Option<f64>,
    pub feasible: bool,
    /// Set when `tau` is an interior limit at a vanishing margin slope.
    pub boundary: bool,
}

/// The parameter rows of the standard envelope at cost `c`.
pub fn default_families(c: f64) -> Vec<DemandSpec> {
    let d = 1.0 - c;
    vec![
        DemandSpec::Unit,
        DemandSpec::Linear { b: 0.0 },
        DemandSpec::Linear { b: 0.5 / d },
        DemandSpec::Linear { b: 1.0 / d },
        DemandSpec::Exponential { beta: 0.5 / d },
        DemandSpec::Exponential { beta: 1.0 / d },
        DemandSpec::Ces { eta: 0.5 },
        DemandSpec::Ces { eta: 1.0 },
        DemandSpec::Ces { eta: 1.3 },
        DemandSpec::Ces { eta: 2.0 },
    ]
}

/// `τ` at every `(family, μ)` pair. A point is feasible when `μ` is reached on
/// the increasing branch of the effective margin starting at `c`. The unit
/// baseline is prepended when absent.
pub fn envelope_sweep(families: &[DemandSpec], c: f64, mu_grid: &[f64]) -> Result<Vec<EnvelopePoint>> {
    curvature::CostParam::new(c)?;
    if let Some(&mu) = mu_grid.iter().find(|m| !(0.0..=1.0).contains(*m)) {
        return Err(Error::BadMu(mu));
    }
    let mut rows: Vec<DemandSpec> = Vec::with_capacity(families.len() + 1);
    if !families.iter().any(|f| matches!(f, DemandSpec::Unit)) {
        rows.push(DemandSpec::Unit);
    }
    rows.extend(families.iter().cloned());
    for f in &rows {
        f.validate()?;
    }
    let jobs: Vec<(&DemandSpec, f64)> = rows.iter().flat_map(|f| mu_grid.iter().map(move |&m| (f, m))).collect();
    jobs.par_iter()
        .map(|&(spec, mu)| {
            let hit = curvature::phi_c_on_branch(spec, c, mu)?;
            Ok(EnvelopePoint {
                family: spec.family(),
                param: spec.param(),
                mu,
                tau: hit.map(|(_, r)| r.tau),
                feasible: hit.is_some(),
                boundary: hit.is_some_and(|(_, r)| r.boundary),
            })
        })
        .collect()
}

/// Columns `family,param,mu,tau,feasible`; blank cells for missing values.
pub fn envelope_csv(points: &[EnvelopePoint]) -> String {
    let mut out = String::from("family,param,mu,tau,feasible\n");
    for p in points {
        let param = p.param.map(|v| v.to_string()).unwrap_or_default();
        let tau = p.tau.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{},{},{}\n", p.family, param, p.mu, tau, p.feasible));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalElasticity {
    pub eta: f64,
    pub cost: f64,
    pub criterion: String,
    pub mu_points: usize,
}

const CRITICAL_MU_POINTS: usize = 2001;

/// Smallest `τ` over the feasible part of a `μ` grid; `None` when no point is
/// feasible.
pub fn min_feasible_tau(spec: &DemandSpec, c: f64, mu_points: usize) -> Result<Option<f64>> {
    let grid: Vec<f64> = (0..mu_points).map(|k| k as f64 / (mu_points - 1) as f64).collect();
    let taus: Vec<Option<f64>> = grid
        .par_iter()
        .map(|&mu| curvature::phi_c_on_branch(spec, c, mu).map(|h| h.map(|(_, r)| r.tau)))
        .collect::<Result<_>>()?;
    Ok(taus.into_iter().flatten().reduce(f64::min))
}

/// Smallest CES elasticity `η` at which `τ(μ) ≥ 1` on the entire feasible
/// `μ` range at cost `c`, by bisection on `η ∈ [1, 20]`.
pub fn critical_elasticity(c: f64) -> Result<CriticalElasticity> {
    const LO: f64 = 1.0;
    const HI: f64 = 20.0;
    let c = curvature::CostParam::new(c)?.c();
    let over = |eta: f64| -> Result<bool> {
        Ok(match min_feasible_tau(&DemandSpec::Ces { eta }, c, CRITICAL_MU_POINTS)? {
            Some(t) => t >= 1.0 - 1e-12,
            None => true,
        })
    };
    if over(LO)? || !over(HI)? {
        return Err(Error::NoTransition { lo: LO, hi: HI });
    }
    let (mut lo, mut hi) = (LO, HI);
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if over(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let eta = 0.5 * (lo + hi);
    Ok(CriticalElasticity {
        eta,
        cost: c,
        criterion: format!(
            "smallest CES eta with tau(mu) >= 1 at every feasible mu on a {CRITICAL_MU_POINTS}-point grid, c = {c}"
        ),
        mu_points: CRITICAL_MU_POINTS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|k| k as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn universal_examples() {
        let b = universal_bounds(0.5, 0.2).unwrap();
        assert!((b.price_lo - 0.2).abs() < 1e-15 && (b.price_hi - 0.6).abs() < 1e-15 && (b.tau_lo - 0.5).abs() < 1e-15);
        let b = universal_bounds(0.0, 0.3).unwrap();
        assert_eq!((b.price_lo, b.price_hi, b.tau_lo), (0.3, 0.3, 1.0));
        let b = universal_bounds(1.0, 0.3).unwrap();
        assert_eq!((b.price_lo, b.price_hi, b.tau_lo), (0.3, 1.0, 0.0));
        assert!(universal_bounds(1.1, 0.3).is_err());
    }

    #[test]
    fn family_examples() {
        assert!((family_bound("linear", 0.75, 0.3).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(family_bound("exp", 0.4, 0.3).unwrap(), 1.0);
        assert!((family_bound("ces1", 0.5, 0.5).unwrap() - 0.5 / 0.5625).abs() < 1e-15);
        assert!(matches!(family_bound("cubic", 0.5, 0.5), Err(Error::UnknownFamily(_))));
    }

    #[test]
    fn envelope_respects_family_bounds() {
        let c = 0.5;
        let pts = envelope_sweep(&default_families(c), c, &grid(101)).unwrap();
        for p in pts.iter().filter(|p| p.feasible) {
            let t = p.tau.unwrap();
            assert!(t >= 1.0 - p.mu - 1e-10, "{p:?}");
            match p.family {
                "linear" => assert!(t <= family_bound("linear", p.mu, c).unwrap() + 1e-10 && t <= 1.0 + 1e-10, "{p:?}"),
                "exp" => assert!(t <= 1.0 + 1e-10, "{p:?}"),
                "unit" => assert_eq!(t, 1.0 - p.mu),
                _ => {}
            }
            if p.family == "ces" && p.param == Some(1.0) {
                assert!((t - family_bound("ces1", p.mu, c).unwrap()).abs() < 1e-10, "{p:?}");
            }
        }
    }

    #[test]
    fn ces_overshifts() {
        let pts = envelope_sweep(&[DemandSpec::Ces { eta: 2.0 }], 0.6, &grid(101)).unwrap();
        assert!(pts.iter().any(|p| p.family == "ces" && p.feasible && p.tau.unwrap() > 1.0));
        assert_eq!(pts.iter().filter(|p| p.family == "unit").count(), 101);
    }

    #[test]
    fn csv_layout() {
        let pts = envelope_sweep(&[DemandSpec::Linear { b: 1.0 }], 0.5, &[0.0, 1.0]).unwrap();
        let csv = envelope_csv(&pts);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "family,param,mu,tau,feasible");
        assert_eq!(lines[1], "unit,,0,1,true");
        assert_eq!(lines.len(), 5);
    }

    #[test]
    fn critical_elasticity_closed_form() {
        for c in [0.2, CRITICAL_COST] {
            let r = critical_elasticity(c).unwrap();
            assert!((r.eta - 1.0 / (1.0 - c)).abs() < 1e-6, "c={c}: {r:?}");
            let below = min_feasible_tau(&DemandSpec::Ces { eta: r.eta - 1e-3 }, c, 2001).unwrap().unwrap();
            let above = min_feasible_tau(&DemandSpec::Ces { eta: r.eta + 1e-3 }, c, 2001).unwrap().unwrap();
            assert!(below < 1.0 && above >= 1.0);
        }
    }

    #[test]
    fn unit_elastic_crossing() {
        // (1 − μ) = (1 − μd)² at μ = (2d − 1)/d²
        let c = 0.25;
        let d = 1.0 - c;
        let mu = (2.0 * d - 1.0) / (d * d);
        let t = curvature::phi_c(&DemandSpec::Ces { eta: 1.0 }, c, mu).unwrap();
        assert!((t - 1.0).abs() < 1e-12);
    }
}
