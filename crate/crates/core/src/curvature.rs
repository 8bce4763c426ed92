//! The curvature layer: demand families and the map between normalized
//! margins and prices.
//!
//! For demand `x(p)` and marginal cost `c`, the normalized effective margin is
//! `μ(p; c) = (p − c) x(p) / ((1 − c) x(1))`. When it is increasing on
//! `[c, 1]` it has an inverse `φ(μ, c)`, and `φ_c = ∂φ/∂c` is the pass-through
//! of a fixed margin.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{pchip::Pchip, root::bisect};

/// Normalized margin slope below which `φ_c` is reported as a boundary value.
pub const BOUNDARY_SLOPE: f64 = 1e-9;

/// Tabulated demand on `[0, 1]`, interpolated with a monotone cubic.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandTable {
    interp: Pchip,
    source: Option<String>,
}

impl DemandTable {
    /// `points` are `(p, x)` pairs with `p` strictly increasing from 0 to 1 and
    /// `x` positive and weakly decreasing.
    pub fn new(points: &[(f64, f64)]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::BadDemand("table needs at least two rows".into()));
        }
        let (ps, xs): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
        if ps[0] != 0.0 || ps[ps.len() - 1] != 1.0 {
            return Err(Error::BadDemand("table prices must run from 0 to 1".into()));
        }
        if xs.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
            return Err(Error::BadDemand("table demand must be strictly positive".into()));
        }
        if xs.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::BadDemand("table demand must be weakly decreasing".into()));
        }
        let interp =
            Pchip::new(ps, xs).ok_or_else(|| Error::BadDemand("table prices must be strictly increasing".into()))?;
        Ok(Self { interp, source: None })
    }

    /// Reads `p,x` rows; a non-numeric first line is taken as a header.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut points = Vec::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split(',').map(str::trim);
            let (Some(a), Some(b)) = (cols.next(), cols.next()) else {
                return Err(Error::Parse(format!("{}:{}: expected two columns", path.display(), k + 1)));
            };
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(p), Ok(x)) => points.push((p, x)),
                _ if points.is_empty() && k == 0 => continue,
                _ => return Err(Error::Parse(format!("{}:{}: non-numeric row {line:?}", path.display(), k + 1))),
            }
        }
        let mut t = Self::new(&points)?;
        t.source = Some(path.display().to_string());
        Ok(t)
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        self.interp.knots().iter().copied().zip(self.interp.values().iter().copied()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DemandSpec {
    Unit,
    /// `x(p) = 1 + b(1 − p)`.
    Linear { b: f64 },
    /// `x(p) = e^{β(1 − p)}`.
    Exponential { beta: f64 },
    /// `x(p) = p^{−η}`.
    Ces { eta: f64 },
    Table(DemandTable),
}

/// Outcome of the invertibility check on `[c, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict")]
pub enum Invertibility {
    Ok,
    /// The effective margin stops increasing at price `p`.
    Violation { p: f64 },
}

impl Invertibility {
    pub fn is_ok(&self) -> bool {
        matches!(self, Invertibility::Ok)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostParam(f64);

impl CostParam {
    pub fn new(c: f64) -> Result<Self> {
        if (0.0..1.0).contains(&c) {
            Ok(Self(c))
        } else {
            Err(Error::BadCost(c))
        }
    }

    pub fn c(self) -> f64 {
        self.0
    }

    pub fn d(self) -> f64 {
        1.0 - self.0
    }
}

/// Pass-through of a fixed margin, flagged when the margin slope is within
/// [`BOUNDARY_SLOPE`] of zero (the value is then an interior limit).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassRate {
    pub tau: f64,
    pub boundary: bool,
}

impl DemandSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            DemandSpec::Unit | DemandSpec::Table(_) => true,
            DemandSpec::Linear { b } => b.is_finite() && *b >= 0.0,
            DemandSpec::Exponential { beta } => beta.is_finite() && *beta >= 0.0,
            DemandSpec::Ces { eta } => eta.is_finite() && *eta >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::BadDemand(format!("{self}: parameter must be finite and nonnegative")))
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            DemandSpec::Unit => "unit",
            DemandSpec::Linear { .. } => "linear",
            DemandSpec::Exponential { .. } => "exp",
            DemandSpec::Ces { .. } => "ces",
            DemandSpec::Table(_) => "table",
        }
    }

    pub fn param(&self) -> Option<f64> {
        match *self {
            DemandSpec::Linear { b } => Some(b),
            DemandSpec::Exponential { beta } => Some(beta),
            DemandSpec::Ces { eta } => Some(eta),
            _ => None,
        }
    }

    fn check_price(&self, p: f64) -> Result<()> {
        let lo_ok = match self {
            DemandSpec::Ces { eta } if *eta > 0.0 => p > 0.0,
            _ => p >= 0.0,
        };
        if lo_ok && p <= 1.0 {
            Ok(())
        } else {
            Err(Error::OutOfDomain { p })
        }
    }

    fn x(&self, p: f64) -> f64 {
        match self {
            DemandSpec::Unit => 1.0,
            DemandSpec::Linear { b } => 1.0 + b * (1.0 - p),
            DemandSpec::Exponential { beta } => (beta * (1.0 - p)).exp(),
            DemandSpec::Ces { eta } => p.powf(-eta),
            DemandSpec::Table(t) => t.interp.eval(p),
        }
    }

    fn dx(&self, p: f64) -> f64 {
        match self {
            DemandSpec::Unit => 0.0,
            DemandSpec::Linear { b } => -b,
            DemandSpec::Exponential { beta } => -beta * (beta * (1.0 - p)).exp(),
            DemandSpec::Ces { eta } => -eta * p.powf(-eta - 1.0),
            DemandSpec::Table(t) => t.interp.deriv(p),
        }
    }

    pub fn demand_eval(&self, p: f64) -> Result<f64> {
        self.check_price(p)?;
        Ok(self.x(p))
    }

    pub fn demand_deriv(&self, p: f64) -> Result<f64> {
        self.check_price(p)?;
        Ok(self.dx(p))
    }

    pub fn x_at_one(&self) -> f64 {
        self.x(1.0)
    }

    /// Table demands rescaled so that `x(1) = 1`; the closed families already are.
    pub fn normalized(&self) -> DemandSpec {
        match self {
            DemandSpec::Table(t) => {
                let x1 = t.interp.eval(1.0);
                let pts: Vec<(f64, f64)> = t.points().into_iter().map(|(p, x)| (p, x / x1)).collect();
                DemandSpec::Table(DemandTable::new(&pts).expect("rescaled table stays valid"))
            }
            other => other.clone(),
        }
    }

    /// `ε(p) = −(p − c) x'(p) / x(p)`, written per family so that CES stays
    /// finite at `p = 0`.
    fn epsilon(&self, c: f64, p: f64) -> f64 {
        match self {
            DemandSpec::Unit => 0.0,
            DemandSpec::Linear { b } => b * (p - c) / (1.0 + b * (1.0 - p)),
            DemandSpec::Exponential { beta } => beta * (p - c),
            DemandSpec::Ces { eta } => {
                if p > 0.0 {
                    eta * (p - c) / p
                } else {
                    *eta
                }
            }
            DemandSpec::Table(t) => -(p - c) * t.interp.deriv(p) / t.interp.eval(p),
        }
    }

    /// Effective margin `(p − c) x(p) / ((1 − c) x(1))`, no domain checks.
    fn margin(&self, c: f64, p: f64) -> f64 {
        let raw = match self {
            DemandSpec::Ces { eta } if p <= 0.0 => {
                // (p − c) p^{−η} with p = c = 0
                if *eta < 1.0 {
                    0.0
                } else if *eta == 1.0 {
                    1.0
                } else {
                    f64::INFINITY
                }
            }
            _ => (p - c) * self.x(p),
        };
        raw / ((1.0 - c) * self.x_at_one())
    }

    /// `[x(p) + (p − c) x'(p)] / x(1)`.
    fn margin_slope(&self, c: f64, p: f64) -> f64 {
        match self {
            DemandSpec::Ces { eta } if p <= 0.0 => {
                if *eta < 1.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            _ => self.x(p) * (1.0 - self.epsilon(c, p)) / self.x_at_one(),
        }
    }

    /// Largest `p ≤ 1` such that the effective margin increases on `[c, p]`.
    pub fn increasing_branch_end(&self, c: f64) -> f64 {
        match self.invertibility_at(c) {
            Invertibility::Ok => 1.0,
            Invertibility::Violation { p } => p,
        }
    }

    fn invertibility_at(&self, c: f64) -> Invertibility {
        const SLACK: f64 = 1e-12;
        let d = 1.0 - c;
        match *self {
            DemandSpec::Unit => Invertibility::Ok,
            DemandSpec::Linear { b } => {
                if 1.0 - b * d >= -SLACK {
                    Invertibility::Ok
                } else {
                    Invertibility::Violation { p: (1.0 + b * (1.0 + c)) / (2.0 * b) }
                }
            }
            DemandSpec::Exponential { beta } => {
                if 1.0 - beta * d >= -SLACK {
                    Invertibility::Ok
                } else {
                    Invertibility::Violation { p: c + 1.0 / beta }
                }
            }
            DemandSpec::Ces { eta } => {
                if eta < 1.0 {
                    Invertibility::Ok
                } else if c <= 0.0 {
                    // slope p(1 − η) + ηc vanishes at p = c = 0
                    Invertibility::Violation { p: 0.0 }
                } else if eta == 1.0 || c >= 1.0 - 1.0 / eta - SLACK {
                    Invertibility::Ok
                } else {
                    Invertibility::Violation { p: eta * c / (eta - 1.0) }
                }
            }
            DemandSpec::Table(_) => self.scan_invertibility(c),
        }
    }

    fn scan_invertibility(&self, c: f64) -> Invertibility {
        const SCAN: usize = 4000;
        let slope = |p: f64| self.margin_slope(c, p);
        let mut prev = c;
        for k in 1..=SCAN {
            let p = c + (1.0 - c) * k as f64 / SCAN as f64;
            let s = slope(p);
            let bad = if k == SCAN { s < -1e-12 } else { s <= 0.0 };
            if bad {
                let at = bisect(slope, prev, p, 1e-13).unwrap_or(p);
                return Invertibility::Violation { p: at };
            }
            prev = p;
        }
        if slope(c) <= 0.0 {
            return Invertibility::Violation { p: c };
        }
        Invertibility::Ok
    }
}

impl fmt::Display for DemandSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DemandSpec::Unit => write!(f, "unit"),
            DemandSpec::Linear { b } => write!(f, "linear:b={b}"),
            DemandSpec::Exponential { beta } => write!(f, "exp:beta={beta}"),
            DemandSpec::Ces { eta } => write!(f, "ces:eta={eta}"),
            DemandSpec::Table(t) => write!(f, "table:{}", t.source.as_deref().unwrap_or("<inline>")),
        }
    }
}

/// Parses `unit`, `linear:b=2.0`, `exp:beta=1.5`, `ces:eta=1.0`,
/// `table:path.csv`.
impl FromStr for DemandSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let param = |key: &str| -> Result<f64> {
            let (k, v) = rest
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("{kind}: expected {key}=<value>")))?;
            if k.trim() != key {
                return Err(Error::Parse(format!("{kind}: unknown parameter {k:?}, expected {key:?}")));
            }
            v.trim().parse().map_err(|_| Error::Parse(format!("{kind}: cannot parse {v:?}")))
        };
        let spec = match kind {
            "unit" => DemandSpec::Unit,
            "linear" => DemandSpec::Linear { b: param("b")? },
            "exp" | "exponential" => DemandSpec::Exponential { beta: param("beta")? },
            "ces" => DemandSpec::Ces { eta: param("eta")? },
            "table" => DemandSpec::Table(DemandTable::from_csv(Path::new(rest))?),
            other => return Err(Error::Parse(format!("unknown demand family {other:?}"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl Serialize for DemandSpec {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

fn check_cost(c: f64) -> Result<f64> {
    CostParam::new(c).map(CostParam::c)
}

fn check_mu(mu: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&mu) {
        Ok(mu)
    } else {
        Err(Error::BadMu(mu))
    }
}

pub fn demand_eval(spec: &DemandSpec, p: f64) -> Result<f64> {
    spec.demand_eval(p)
}

pub fn demand_deriv(spec: &DemandSpec, p: f64) -> Result<f64> {
    spec.demand_deriv(p)
}

/// Whether `x(p) + (p − c) x'(p) > 0` on `[c, 1]` (equality tolerated at
/// `p = 1`).
pub fn invertibility_check(spec: &DemandSpec, c: f64) -> Invertibility {
    spec.invertibility_at(c)
}

pub fn mu_of_price(spec: &DemandSpec, c: f64, p: f64) -> Result<f64> {
    let c = check_cost(c)?;
    if p < c {
        return Err(Error::PriceBelowCost { p, c });
    }
    if p > 1.0 {
        return Err(Error::PriceAboveOne(p));
    }
    if p == c {
        return Ok(0.0);
    }
    spec.check_price(p)?;
    Ok(spec.margin(c, p))
}

/// Inverse margin by bisection on `[c, p_end]`; `mu` must be attainable there.
fn bisect_price(spec: &DemandSpec, c: f64, mu: f64, p_end: f64) -> f64 {
    if mu == 0.0 {
        return c;
    }
    if mu == 1.0 && p_end >= 1.0 {
        return 1.0;
    }
    bisect(|p| spec.margin(c, p) - mu, c, p_end, 0.0).unwrap_or(p_end)
}

fn fast_price(spec: &DemandSpec, c: f64, mu: f64) -> Option<f64> {
    let d = 1.0 - c;
    match *spec {
        DemandSpec::Unit => Some(c + mu * d),
        DemandSpec::Linear { b } => {
            let a = 1.0 + b * d;
            // smaller root of b m² − (1 + bd) m + μd = 0, in cancellation-free form
            let disc = (a * a - 4.0 * b * mu * d).max(0.0);
            Some(c + 2.0 * mu * d / (a + disc.sqrt()))
        }
        DemandSpec::Ces { eta } if eta == 1.0 && c > 0.0 => Some(c / (1.0 - mu * d)),
        _ => None,
    }
}

/// Price whose normalized margin is `mu`, always by bisection.
pub fn phi_bisect(spec: &DemandSpec, c: f64, mu: f64) -> Result<f64> {
    let c = check_cost(c)?;
    let mu = check_mu(mu)?;
    if let Invertibility::Violation { p } = spec.invertibility_at(c) {
        return Err(Error::InvertibilityViolated { p });
    }
    Ok(bisect_price(spec, c, mu, 1.0))
}

/// `φ(μ, c)`: the unique `p ∈ [c, 1]` with `(p − c) x(p) = μ (1 − c) x(1)`.
pub fn phi(spec: &DemandSpec, c: f64, mu: f64) -> Result<f64> {
    let c = check_cost(c)?;
    let mu = check_mu(mu)?;
    if let Invertibility::Violation { p } = spec.invertibility_at(c) {
        return Err(Error::InvertibilityViolated { p });
    }
    Ok(phi_unchecked(spec, c, mu))
}

/// `φ` for a spec already known to be invertible at `c`.
pub(crate) fn phi_unchecked(spec: &DemandSpec, c: f64, mu: f64) -> f64 {
    if mu == 0.0 {
        return c;
    }
    if mu == 1.0 {
        return 1.0;
    }
    fast_price(spec, c, mu).unwrap_or_else(|| bisect_price(spec, c, mu, 1.0)).clamp(c, 1.0)
}

fn tau_at(spec: &DemandSpec, c: f64, p: f64) -> (f64, bool) {
    let slope = 1.0 - spec.epsilon(c, p);
    let normalized = if slope.is_finite() { spec.margin_slope(c, p) } else { slope };
    let tau = (1.0 - p) / ((1.0 - c) * slope);
    (tau, normalized < BOUNDARY_SLOPE)
}

// the interior limit: Richardson extrapolation from p − h and p − 2h
fn tau_limit(spec: &DemandSpec, c: f64, p: f64) -> f64 {
    let h = 1e-5 * (p - c);
    let t1 = tau_at(spec, c, p - h).0;
    let t2 = tau_at(spec, c, p - 2.0 * h).0;
    2.0 * t1 - t2
}

/// `φ_c(μ, c) = x(p)(1 − p) / ((1 − c)[x(p) + (p − c) x'(p)])` at `p = φ(μ, c)`,
/// with a boundary flag.
pub fn phi_c_flagged(spec: &DemandSpec, c: f64, mu: f64) -> Result<PassRate> {
    let c = check_cost(c)?;
    let mu = check_mu(mu)?;
    if let Invertibility::Violation { p } = spec.invertibility_at(c) {
        return Err(Error::InvertibilityViolated { p });
    }
    Ok(phi_c_unchecked(spec, c, mu))
}

pub(crate) fn phi_c_unchecked(spec: &DemandSpec, c: f64, mu: f64) -> PassRate {
    if let DemandSpec::Unit = spec {
        return PassRate { tau: 1.0 - mu, boundary: false };
    }
    let p = phi_unchecked(spec, c, mu);
    let (tau, boundary) = tau_at(spec, c, p);
    if boundary && mu > 0.0 {
        let tau = tau_limit(spec, c, p);
        return PassRate { tau, boundary };
    }
    PassRate { tau, boundary }
}

pub fn phi_c(spec: &DemandSpec, c: f64, mu: f64) -> Result<f64> {
    phi_c_flagged(spec, c, mu).map(|r| r.tau)
}

/// Margin and pass-through restricted to the increasing branch of the
/// effective margin, for specs that are not invertible on all of `[c, 1]`.
/// `None` when `mu` lies beyond what the branch can reach.
pub fn phi_c_on_branch(spec: &DemandSpec, c: f64, mu: f64) -> Result<Option<(f64, PassRate)>> {
    let c = check_cost(c)?;
    let mu = check_mu(mu)?;
    let end = spec.increasing_branch_end(c);
    if end >= 1.0 {
        let p = phi_unchecked(spec, c, mu);
        return Ok(Some((p, phi_c_unchecked(spec, c, mu))));
    }
    if end <= c || mu >= spec.margin(c, end) {
        return Ok(None);
    }
    let price = |m: f64| bisect_price(spec, c, m, end);
    let p = price(mu);
    let (tau, boundary) = tau_at(spec, c, p);
    if boundary {
        return Ok(None);
    }
    Ok(Some((p, PassRate { tau, boundary })))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn families() -> Vec<DemandSpec> {
        vec![
            DemandSpec::Unit,
            DemandSpec::Linear { b: 0.5 },
            DemandSpec::Linear { b: 1.0 },
            DemandSpec::Exponential { beta: 0.5 },
            DemandSpec::Exponential { beta: 1.0 },
            DemandSpec::Ces { eta: 0.5 },
            DemandSpec::Ces { eta: 1.0 },
            DemandSpec::Ces { eta: 2.0 },
            DemandSpec::Table(DemandTable::new(&[(0.0, 2.0), (0.3, 1.6), (0.7, 1.2), (1.0, 1.0)]).unwrap()),
        ]
    }

    #[test]
    fn demand_examples() {
        for p in [0.0, 0.3, 1.0] {
            assert_eq!(demand_eval(&DemandSpec::Unit, p).unwrap(), 1.0);
            assert_eq!(demand_deriv(&DemandSpec::Unit, p).unwrap(), 0.0);
        }
        assert_eq!(demand_eval(&DemandSpec::Linear { b: 2.0 }, 0.5).unwrap(), 2.0);
        let ces = DemandSpec::Ces { eta: 1.0 };
        assert!((demand_eval(&ces, 0.5).unwrap() - 2.0).abs() < 1e-15);
        assert!((demand_deriv(&ces, 0.5).unwrap() + 4.0).abs() < 1e-14);
        assert!(matches!(demand_eval(&ces, 0.0), Err(Error::OutOfDomain { .. })));
        assert!(matches!(demand_eval(&DemandSpec::Unit, 1.5), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn invertibility_examples() {
        assert!(invertibility_check(&DemandSpec::Ces { eta: 2.0 }, 0.6).is_ok());
        assert!(matches!(invertibility_check(&DemandSpec::Ces { eta: 2.0 }, 0.3), Invertibility::Violation { .. }));
        for c in [0.0, 0.4, 0.99] {
            assert!(invertibility_check(&DemandSpec::Unit, c).is_ok());
        }
        // knife-edge slopes at b = β = 1/d are admissible
        assert!(invertibility_check(&DemandSpec::Linear { b: 2.0 }, 0.5).is_ok());
        assert!(invertibility_check(&DemandSpec::Exponential { beta: 2.0 }, 0.5).is_ok());
        assert!(!invertibility_check(&DemandSpec::Linear { b: 2.5 }, 0.5).is_ok());
        assert!(!invertibility_check(&DemandSpec::Exponential { beta: 2.5 }, 0.5).is_ok());
        // table scan finds the same boundary as the analytic linear check
        let pts: Vec<(f64, f64)> = (0..=100).map(|k| { let p = k as f64 / 100.0; (p, 1.0 + 3.0 * (1.0 - p)) }).collect();
        let t = DemandSpec::Table(DemandTable::new(&pts).unwrap());
        match (invertibility_check(&t, 0.5), invertibility_check(&DemandSpec::Linear { b: 3.0 }, 0.5)) {
            (Invertibility::Violation { p: a }, Invertibility::Violation { p: b }) => assert!((a - b).abs() < 1e-9, "{a} {b}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn mu_of_price_examples() {
        assert!((mu_of_price(&DemandSpec::Unit, 0.2, 0.6).unwrap() - 0.5).abs() < 1e-15);
        for spec in families() {
            assert_eq!(mu_of_price(&spec, 0.3, 0.3).unwrap(), 0.0);
            assert!((mu_of_price(&spec, 0.3, 1.0).unwrap() - 1.0).abs() < 1e-15);
        }
        let v = mu_of_price(&DemandSpec::Ces { eta: 1.0 }, 0.5, 2.0 / 3.0).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
        assert!(matches!(mu_of_price(&DemandSpec::Unit, 0.5, 0.4), Err(Error::PriceBelowCost { .. })));
        assert!(matches!(mu_of_price(&DemandSpec::Unit, 0.5, 1.1), Err(Error::PriceAboveOne(_))));
    }

    #[test]
    fn phi_examples() {
        assert!((phi(&DemandSpec::Unit, 0.2, 0.5).unwrap() - 0.6).abs() < 1e-15);
        let p = phi(&DemandSpec::Linear { b: 2.0 }, 0.5, 0.75).unwrap();
        assert!((p - 0.75).abs() < 1e-15);
        let p = phi(&DemandSpec::Ces { eta: 1.0 }, 0.5, 0.5).unwrap();
        assert!((p - 2.0 / 3.0).abs() < 1e-15);
        assert!((mu_of_price(&DemandSpec::Ces { eta: 1.0 }, 0.5, p).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(phi(&DemandSpec::Unit, 0.2, 1.5), Err(Error::BadMu(_))));
        assert!(matches!(phi(&DemandSpec::Ces { eta: 2.0 }, 0.3, 0.5), Err(Error::InvertibilityViolated { .. })));
        assert!(matches!(phi(&DemandSpec::Unit, 1.0, 0.5), Err(Error::BadCost(_))));
    }

    #[test]
    fn phi_c_examples() {
        for c in [0.0, 0.3, 0.8] {
            for mu in [0.0, 0.25, 0.9] {
                assert!((phi_c(&DemandSpec::Unit, c, mu).unwrap() - (1.0 - mu)).abs() < 1e-15);
            }
        }
        let t = phi_c(&DemandSpec::Ces { eta: 1.0 }, 0.5, 0.5).unwrap();
        assert!((t - 0.5 / 0.5625).abs() < 1e-14);
        let t = phi_c(&DemandSpec::Linear { b: 2.0 }, 0.5, 0.75).unwrap();
        assert!((t - 0.75).abs() < 1e-14);
    }

    #[test]
    fn knife_edge_top_is_flagged_limit() {
        let r = phi_c_flagged(&DemandSpec::Linear { b: 2.0 }, 0.5, 1.0).unwrap();
        assert!(r.boundary);
        assert!((r.tau - 0.5).abs() < 1e-8, "{r:?}");
        let r = phi_c_flagged(&DemandSpec::Exponential { beta: 2.0 }, 0.5, 1.0).unwrap();
        assert!(r.boundary);
        assert!((r.tau - 1.0).abs() < 1e-8, "{r:?}");
    }

    #[test]
    fn fast_paths_match_bisection() {
        let specs = [DemandSpec::Unit, DemandSpec::Linear { b: 0.7 }, DemandSpec::Linear { b: 2.0 }, DemandSpec::Ces { eta: 1.0 }];
        for spec in &specs {
            for c in [0.1, 0.5, 0.9] {
                if !invertibility_check(spec, c).is_ok() {
                    continue;
                }
                for k in 0..=100 {
                    let mu = k as f64 / 100.0;
                    let a = phi(spec, c, mu).unwrap();
                    let b = phi_bisect(spec, c, mu).unwrap();
                    assert!((a - b).abs() <= 1e-12, "{spec} c={c} mu={mu}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn branch_restricted_inverse() {
        let spec = DemandSpec::Ces { eta: 2.0 };
        let c = 0.2;
        let end = spec.increasing_branch_end(c);
        assert!((end - 0.4).abs() < 1e-15);
        assert!(spec.margin(c, end) > 1.0);
        let (p, r) = phi_c_on_branch(&spec, c, 1.0).unwrap().unwrap();
        assert!(p < end && r.tau > 1.0);
        assert!((spec.margin(c, p) - 1.0).abs() < 1e-12);
        let (p, _) = phi_c_on_branch(&spec, c, 0.5).unwrap().unwrap();
        assert!((spec.margin(c, p) - 0.5).abs() < 1e-12);
        assert!(phi_c_on_branch(&DemandSpec::Ces { eta: 2.0 }, 0.0, 0.5).unwrap().is_none());
    }

    #[test]
    fn parse_strings() {
        assert_eq!("unit".parse::<DemandSpec>().unwrap(), DemandSpec::Unit);
        assert_eq!("linear:b=2.0".parse::<DemandSpec>().unwrap(), DemandSpec::Linear { b: 2.0 });
        assert_eq!("exp:beta=1.5".parse::<DemandSpec>().unwrap(), DemandSpec::Exponential { beta: 1.5 });
        assert_eq!("ces:eta=1.0".parse::<DemandSpec>().unwrap(), DemandSpec::Ces { eta: 1.0 });
        assert!("ces:beta=1".parse::<DemandSpec>().is_err());
        assert!("linear:b=-1".parse::<DemandSpec>().is_err());
        assert!("cubic".parse::<DemandSpec>().is_err());
        let s = DemandSpec::Ces { eta: 1.5 }.to_string();
        assert_eq!(s.parse::<DemandSpec>().unwrap(), DemandSpec::Ces { eta: 1.5 });
    }

    #[test]
    fn table_validation() {
        assert!(DemandTable::new(&[(0.0, 1.0), (1.0, 2.0)]).is_err());
        assert!(DemandTable::new(&[(0.1, 2.0), (1.0, 1.0)]).is_err());
        assert!(DemandTable::new(&[(0.0, 2.0), (1.0, 0.0)]).is_err());
        let t = DemandSpec::Table(DemandTable::new(&[(0.0, 4.0), (0.5, 3.0), (1.0, 2.0)]).unwrap());
        let n = t.normalized();
        assert!((n.x_at_one() - 1.0).abs() < 1e-15);
        // normalization does not move μ or φ
        assert!((mu_of_price(&t, 0.2, 0.7).unwrap() - mu_of_price(&n, 0.2, 0.7).unwrap()).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn universal_bounds_hold(idx in 0usize..9, c in 0.05f64..0.95, mu in 0.0f64..=1.0) {
            let spec = &families()[idx];
            prop_assume!(invertibility_check(spec, c).is_ok());
            let p = phi(spec, c, mu).unwrap();
            prop_assert!(p >= c - 1e-15 && p <= c + mu * (1.0 - c) + 1e-12);
            let t = phi_c(spec, c, mu).unwrap();
            prop_assert!(t >= 1.0 - mu - 1e-10, "{} c={} mu={} tau={}", spec, c, mu, t);
        }

        #[test]
        fn round_trip(idx in 0usize..9, c in 0.05f64..0.95, mu in 0.0f64..=1.0) {
            let spec = &families()[idx];
            prop_assume!(invertibility_check(spec, c).is_ok());
            let p = phi(spec, c, mu).unwrap();
            prop_assert!((mu_of_price(spec, c, p).unwrap() - mu).abs() <= 1e-10);
        }
    }
}
