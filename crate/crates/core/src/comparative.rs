//! Orderings and comparative statics.
//!
//! All verdicts are relative to the grid they were checked on, which always
//! includes the piece boundaries of the distributions involved.

use serde::Serialize;

use crate::consideration::ConsiderationStructure;
use crate::curvature::{self, DemandSpec, Invertibility};
use crate::error::{Error, Result};
use crate::margin_game::{EquilibriumProfile, MarginDistribution};
use crate::passthrough::{self, PassThroughReport};

/// Default number of uniform grid points for dominance checks.
pub const DEFAULT_GRID: usize = 2001;
const ORDER_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `A ≥ B` everywhere on the grid, strictly somewhere.
    ADominatesB,
    BDominatesA,
    Crossing,
    Equal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Witness {
    pub point: f64,
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceVerdict {
    pub relation: Relation,
    /// For a crossing: one point where `A > B` and one where `B > A`.
    /// Otherwise the point of largest separation, if any.
    pub witnesses: Vec<Witness>,
    pub grid_points: usize,
}

fn compare_values(points: &[f64], a: &[f64], b: &[f64]) -> DominanceVerdict {
    let mut a_above: Option<(f64, Witness)> = None;
    let mut b_above: Option<(f64, Witness)> = None;
    for k in 0..points.len() {
        let gap = a[k] - b[k];
        let w = Witness { point: points[k], a: a[k], b: b[k] };
        if gap > ORDER_TOL && a_above.is_none_or(|(g, _)| gap > g) {
            a_above = Some((gap, w));
        }
        if -gap > ORDER_TOL && b_above.is_none_or(|(g, _)| -gap > g) {
            b_above = Some((-gap, w));
        }
    }
    let (relation, witnesses) = match (a_above, b_above) {
        (None, None) => (Relation::Equal, vec![]),
        (Some((_, w)), None) => (Relation::ADominatesB, vec![w]),
        (None, Some((_, w))) => (Relation::BDominatesA, vec![w]),
        (Some((_, wa)), Some((_, wb))) => (Relation::Crossing, vec![wa, wb]),
    };
    DominanceVerdict { relation, witnesses, grid_points: points.len() }
}

fn u_grid(points: usize, extra: &[&MarginDistribution]) -> Vec<f64> {
    let n = points.max(2) - 1;
    let mut g: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
    for d in extra {
        g.extend(d.u_breakpoints());
    }
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}

/// Compares margin quantile functions: `A` dominates when `μ_A(u) ≥ μ_B(u)`.
pub fn quantile_dominates(a: &MarginDistribution, b: &MarginDistribution, grid: usize) -> DominanceVerdict {
    let g = u_grid(grid, &[a, b]);
    let va: Vec<f64> = g.iter().map(|&u| a.quantile_eval(u)).collect();
    let vb: Vec<f64> = g.iter().map(|&u| b.quantile_eval(u)).collect();
    compare_values(&g, &va, &vb)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PgfVerdict {
    /// Order of the rival-count PGFs `H_A(s)` and `H_B(s)` on `[0, 1]`.
    pub pgf: DominanceVerdict,
    pub rho_a: f64,
    pub rho_b: f64,
    /// Margin order, checked when the two `ρ` agree.
    pub margins: Option<DominanceVerdict>,
    /// Whether the margin order is the one the PGF order implies.
    pub consistent: Option<bool>,
    pub flags: Vec<String>,
}

fn mirrored(r: Relation) -> Relation {
    match r {
        Relation::ADominatesB => Relation::BDominatesA,
        Relation::BDominatesA => Relation::ADominatesB,
        other => other,
    }
}

/// PGF order of two symmetric structures. A smaller `H` means more rivals,
/// so at equal `ρ` it is equivalent to larger margins.
pub fn pgf_dominates(a: &ConsiderationStructure, b: &ConsiderationStructure, firm: usize, grid: usize) -> Result<PgfVerdict> {
    if !a.is_symmetric() || !b.is_symmetric() {
        return Err(Error::NotSymmetric);
    }
    let (ha, hb) = (a.pgf(firm)?, b.pgf(firm)?);
    let n = grid.max(2) - 1;
    let s: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
    let va: Vec<f64> = s.iter().map(|&x| ha.eval(x)).collect();
    let vb: Vec<f64> = s.iter().map(|&x| hb.eval(x)).collect();
    let pgf = compare_values(&s, &va, &vb);
    let (rho_a, rho_b) = (ha.rho(), hb.rho());
    let mut flags = Vec::new();
    let (margins, consistent) = if (rho_a - rho_b).abs() <= ORDER_TOL && rho_a > 0.0 {
        let pa = crate::margin_game::solve_symmetric(a)?;
        let pb = crate::margin_game::solve_symmetric(b)?;
        let m = quantile_dominates(pa.dist(firm)?, pb.dist(firm)?, grid);
        let ok = m.relation == mirrored(pgf.relation);
        (Some(m), Some(ok))
    } else {
        if pgf.relation != Relation::Equal {
            flags.push(format!(
                "rho differs ({rho_a} vs {rho_b}); PGF order alone does not imply margin or price dominance"
            ));
        }
        (None, None)
    };
    Ok(PgfVerdict { pgf, rho_a, rho_b, margins, consistent, flags })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwVerdict {
    /// Order of the posted price quantiles.
    pub prices: DominanceVerdict,
    pub b_a: f64,
    pub b_b: f64,
    pub mean_paid_a: f64,
    pub mean_paid_b: f64,
    /// When prices are ordered: whether `B` and mean paid price are ordered
    /// the way price dominance implies.
    pub implied_order_holds: Option<bool>,
}

/// If `A`'s price quantiles dominate `B`'s then `B_A ≤ B_B` and `A`'s mean
/// paid price is the higher one.
pub fn tw_mean_compare(a: &PassThroughReport, b: &PassThroughReport) -> Result<TwVerdict> {
    if a.cost != b.cost {
        return Err(Error::MismatchedCost(a.cost, b.cost));
    }
    if a.quantiles.u != b.quantiles.u {
        return Err(Error::MismatchedGrid);
    }
    let prices = compare_values(&a.quantiles.u, &a.quantiles.price, &b.quantiles.price);
    let tol = 1e-12 * a.b.max(b.b);
    let implied_order_holds = match prices.relation {
        Relation::ADominatesB => Some(a.b <= b.b + tol && a.mean_paid >= b.mean_paid - 1e-12),
        Relation::BDominatesA => Some(b.b <= a.b + tol && b.mean_paid >= a.mean_paid - 1e-12),
        Relation::Equal => Some((a.b - b.b).abs() <= tol),
        Relation::Crossing => None,
    };
    Ok(TwVerdict { prices, b_a: a.b, b_b: b.b, mean_paid_a: a.mean_paid, mean_paid_b: b.mean_paid, implied_order_holds })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FirmDelta {
    pub pre_firm: usize,
    pub post_firm: usize,
    pub u: Vec<f64>,
    /// `φ(μ_post(u), c) − φ(μ_pre(u), c)`.
    pub delta_p: Vec<f64>,
    /// `τ^trans_post − τ^trans_pre`, absent when either side is undefined.
    pub delta_tau_trans: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MergerDelta {
    pub demand: DemandSpec,
    pub cost: f64,
    pub firms: Vec<FirmDelta>,
}

impl MergerDelta {
    /// Columns `pre_firm,post_firm,u,delta_p`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("pre_firm,post_firm,u,delta_p\n");
        for f in &self.firms {
            for (u, d) in f.u.iter().zip(&f.delta_p) {
                out.push_str(&format!("{},{},{},{}\n", f.pre_firm, f.post_firm, u, d));
            }
        }
        out
    }
}

fn tau_trans_or_none(profile: &EquilibriumProfile, firm: usize, spec: &DemandSpec, c: f64) -> Result<Option<f64>> {
    match passthrough::transaction_passthrough(profile, firm, spec, c) {
        Ok(t) => Ok(Some(t)),
        Err(Error::SupportTouchesCost { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Price changes at each quantile for firms surviving a change of market
/// structure. `firm_map` pairs `(pre, post)` firm indices.
pub fn merger_delta(
    pre: &EquilibriumProfile,
    post: &EquilibriumProfile,
    firm_map: &[(usize, usize)],
    spec: &DemandSpec,
    c: f64,
    grid: &[f64],
) -> Result<MergerDelta> {
    let mut firms = Vec::with_capacity(firm_map.len());
    for &(i, j) in firm_map {
        pre.dist(i).map_err(|_| Error::UnsolvedProfile(i))?;
        post.dist(j).map_err(|_| Error::UnsolvedProfile(j))?;
        let qa = passthrough::quantile_passthrough(pre, i, spec, c, grid)?;
        let qb = passthrough::quantile_passthrough(post, j, spec, c, grid)?;
        let delta_p = qb.price.iter().zip(&qa.price).map(|(b, a)| b - a).collect();
        let delta_tau_trans = match (tau_trans_or_none(pre, i, spec, c)?, tau_trans_or_none(post, j, spec, c)?) {
            (Some(a), Some(b)) => Some(b - a),
            _ => None,
        };
        firms.push(FirmDelta { pre_firm: i, post_firm: j, u: grid.to_vec(), delta_p, delta_tau_trans });
    }
    Ok(MergerDelta { demand: spec.clone(), cost: c, firms })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Decreasing,
    Increasing,
    Constant,
    Mixed,
}

/// Numerical direction of `μ ↦ φ_c(μ, c)` on `[mu_lo, mu_hi]`.
pub fn phi_c_direction(spec: &DemandSpec, c: f64, mu_lo: f64, mu_hi: f64, points: usize) -> Result<Direction> {
    if let Invertibility::Violation { p } = curvature::invertibility_check(spec, c) {
        return Err(Error::InvertibilityViolated { p });
    }
    let n = points.max(2) - 1;
    let taus: Vec<f64> = (0..=n)
        .map(|k| curvature::phi_c(spec, c, mu_lo + (mu_hi - mu_lo) * k as f64 / n as f64))
        .collect::<Result<_>>()?;
    let (mut up, mut down) = (false, false);
    for w in taus.windows(2) {
        let d = w[1] - w[0];
        up |= d > 1e-12;
        down |= d < -1e-12;
    }
    Ok(match (up, down) {
        (false, false) => Direction::Constant,
        (true, false) => Direction::Increasing,
        (false, true) => Direction::Decreasing,
        (true, true) => Direction::Mixed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderingCheck {
    pub margins: DominanceVerdict,
    pub prices: DominanceVerdict,
    pub direction: Direction,
    /// Quantile pass-through order; `A` dominates when `τ_A ≥ τ_B`.
    pub passthrough: DominanceVerdict,
    /// Whether the price and pass-through orders are those the margin order
    /// and the direction of `φ_c` imply.
    pub transported: bool,
}

/// Transports a margin order to prices and quantile pass-through under one
/// demand.
pub fn ordering_check(a: &MarginDistribution, b: &MarginDistribution, spec: &DemandSpec, c: f64, grid: usize) -> Result<OrderingCheck> {
    let g = u_grid(grid, &[a, b]);
    let (ma, mb): (Vec<f64>, Vec<f64>) = g.iter().map(|&u| (a.quantile_eval(u), b.quantile_eval(u))).unzip();
    let margins = compare_values(&g, &ma, &mb);
    let lo = ma.iter().chain(&mb).copied().fold(f64::INFINITY, f64::min);
    let hi = ma.iter().chain(&mb).copied().fold(f64::NEG_INFINITY, f64::max);
    let direction = phi_c_direction(spec, c, lo, hi, 257)?;
    let price = |m: &f64| curvature::phi(spec, c, *m);
    let tau = |m: &f64| curvature::phi_c(spec, c, *m);
    let pa: Vec<f64> = ma.iter().map(price).collect::<Result<_>>()?;
    let pb: Vec<f64> = mb.iter().map(price).collect::<Result<_>>()?;
    let ta: Vec<f64> = ma.iter().map(tau).collect::<Result<_>>()?;
    let tb: Vec<f64> = mb.iter().map(tau).collect::<Result<_>>()?;
    let prices = compare_values(&g, &pa, &pb);
    let passthrough = compare_values(&g, &ta, &tb);
    let weak = |r: Relation, want: Relation| r == want || r == Relation::Equal;
    let transported = match margins.relation {
        Relation::ADominatesB | Relation::BDominatesA => {
            let r = margins.relation;
            weak(prices.relation, r)
                && match direction {
                    Direction::Decreasing => weak(passthrough.relation, mirrored(r)),
                    Direction::Increasing => weak(passthrough.relation, r),
                    Direction::Constant => passthrough.relation == Relation::Equal,
                    Direction::Mixed => true,
                }
        }
        Relation::Equal => prices.relation == Relation::Equal,
        Relation::Crossing => true,
    };
    Ok(OrderingCheck { margins, prices, direction, passthrough, transported })
}
