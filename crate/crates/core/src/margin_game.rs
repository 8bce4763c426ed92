//! The cost- and demand-free margin game.
//!
//! A firm's strategy is a distribution over normalized margins `μ ∈ [0, 1]`.
//! Distributions are kept symbolically: an ordered list of analytic pieces,
//! each with a closed-form CDF and quantile, plus point masses.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::consideration::{ConsiderationStructure, RivalCountPgf};
use crate::error::{Error, Result};
use crate::numerics::quad;

/// Closed-form law on one interval of a margin distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params")]
pub enum PieceKind {
    /// `F(μ) = 1 − H⁻¹(ρ/μ)`, quantile `ρ / H(1 − u)`.
    SymmetricPGF { rho: f64, pgf: Vec<f64> },
    /// Higher-ρ duopolist: `F(μ) = 1 − (ρ₁/μ − ρ₂)/(1 − ρ₂)`.
    DuopolyF1 { rho1: f64, rho2: f64 },
    /// Lower-ρ duopolist: `F(μ) = 1 − ρ₁(1 − μ)/((1 − ρ₁)μ)`.
    DuopolyF2 { rho1: f64 },
    /// `F(μ) = Γ(μ)/λ` with `Γ(μ) = 1 − (μ̲/(μ C_m))^{1/(m−1)}`.
    IndependentGamma { mu_floor: f64, c_m: f64, m: usize, lambda: f64 },
    PointMass { mass: f64 },
}

impl PieceKind {
    fn is_atom(&self) -> bool {
        matches!(self, PieceKind::PointMass { .. })
    }

    /// Absolute CDF value of a continuous piece at `mu` (inside its interval).
    fn cdf(&self, mu: f64) -> f64 {
        match self {
            PieceKind::SymmetricPGF { rho, pgf } => {
                let h = RivalCountPgf { coefficients: pgf.clone() };
                1.0 - h.inverse(rho / mu)
            }
            PieceKind::DuopolyF1 { rho1, rho2 } => 1.0 - (rho1 / mu - rho2) / (1.0 - rho2),
            PieceKind::DuopolyF2 { rho1 } => 1.0 - rho1 / (1.0 - rho1) * (1.0 - mu) / mu,
            PieceKind::IndependentGamma { mu_floor, c_m, m, lambda } => {
                let gamma = 1.0 - (mu_floor / (mu * c_m)).powf(1.0 / (*m as f64 - 1.0));
                gamma / lambda
            }
            PieceKind::PointMass { .. } => unreachable!("atoms have no continuous cdf"),
        }
    }

    fn quantile(&self, u: f64) -> f64 {
        match self {
            PieceKind::SymmetricPGF { rho, pgf } => {
                let s = 1.0 - u;
                rho / pgf.iter().rev().fold(0.0, |acc, &b| acc * s + b)
            }
            PieceKind::DuopolyF1 { rho1, rho2 } => rho1 / (1.0 - u * (1.0 - rho2)),
            PieceKind::DuopolyF2 { rho1 } => rho1 / (rho1 + (1.0 - u) * (1.0 - rho1)),
            PieceKind::IndependentGamma { mu_floor, c_m, m, lambda } => {
                mu_floor / (c_m * (1.0 - lambda * u).powi(*m as i32 - 1))
            }
            PieceKind::PointMass { .. } => unreachable!("atoms have no continuous quantile"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub kind: PieceKind,
    u_lo: f64,
    u_hi: f64,
}

impl Piece {
    pub fn u_range(&self) -> (f64, f64) {
        (self.u_lo, self.u_hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub location: f64,
    pub mass: f64,
}

/// Read-only view of a margin strategy used by the equilibrium checkers.
pub trait MarginLaw: Sync {
    /// `P(μ_i ≤ mu)`.
    fn cdf(&self, mu: f64) -> f64;
    /// `P(μ_i < mu)`.
    fn cdf_left(&self, mu: f64) -> f64;
    fn support(&self) -> (f64, f64);
    /// Piece boundaries and atom locations.
    fn breakpoints(&self) -> Vec<f64>;
    fn atoms(&self) -> Vec<Atom>;
    /// Whether `mu` is played: strictly inside a continuous piece, or an atom.
    fn plays(&self, mu: f64) -> bool;

    /// `E[g(μ_i)]`, where `g` may kink at `splits`. The default sums over a
    /// fine partition of `[0, 1]` and is accurate to roughly `1e-6`.
    fn expectation(&self, g: &dyn Fn(f64) -> f64, splits: &[f64]) -> f64 {
        const CELLS: usize = 200_000;
        let mut cuts: Vec<f64> = (0..=CELLS).map(|k| k as f64 / CELLS as f64).collect();
        cuts.extend(splits.iter().copied().filter(|s| (0.0..=1.0).contains(s)));
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut terms = Vec::with_capacity(cuts.len() + 1);
        terms.push(self.cdf(0.0) * g(0.0));
        for w in cuts.windows(2) {
            let at_hi = self.cdf(w[1]) - self.cdf_left(w[1]);
            let inner = self.cdf_left(w[1]) - self.cdf(w[0]);
            terms.push(inner * g(0.5 * (w[0] + w[1])) + at_hi * g(w[1]));
        }
        quad::pairwise_sum(&terms)
    }
}

/// One firm's equilibrium distribution over normalized margins.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginDistribution {
    firm: usize,
    pieces: Vec<Piece>,
}

/// Total-mass tolerance for a distribution.
pub const DIST_TOL: f64 = 1e-10;

impl MarginDistribution {
    /// Validates ordering, contiguity in probability and total mass.
    pub fn from_pieces(firm: usize, raw: Vec<(f64, f64, PieceKind)>) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::BadDistribution("no pieces".into()));
        }
        let mut pieces = Vec::with_capacity(raw.len());
        let mut cum = 0.0;
        let mut prev_hi = f64::NEG_INFINITY;
        for (lo, hi, kind) in raw {
            if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || hi < lo || lo < prev_hi - 1e-12 {
                return Err(Error::BadDistribution(format!("bad interval [{lo}, {hi}]")));
            }
            let (u_lo, u_hi) = match &kind {
                PieceKind::PointMass { mass } => {
                    if !(*mass > 0.0) || lo != hi {
                        return Err(Error::BadDistribution("point mass needs positive mass and a degenerate interval".into()));
                    }
                    (cum, cum + mass)
                }
                k => {
                    if hi <= lo {
                        return Err(Error::BadDistribution(format!("empty continuous piece at {lo}")));
                    }
                    let (a, b) = (k.cdf(lo), k.cdf(hi));
                    if (a - cum).abs() > DIST_TOL || b < a - DIST_TOL || !b.is_finite() {
                        return Err(Error::BadDistribution(format!(
                            "piece [{lo}, {hi}] starts at probability {a}, expected {cum}"
                        )));
                    }
                    (cum, b)
                }
            };
            cum = u_hi;
            prev_hi = hi;
            pieces.push(Piece { lo, hi, kind, u_lo, u_hi });
        }
        if (cum - 1.0).abs() > DIST_TOL {
            return Err(Error::BadDistribution(format!("total probability {cum}")));
        }
        if let Some(last) = pieces.last_mut() {
            last.u_hi = 1.0;
        }
        Ok(Self { firm, pieces })
    }

    pub fn point_mass(firm: usize, location: f64) -> Self {
        Self {
            firm,
            pieces: vec![Piece {
                lo: location,
                hi: location,
                kind: PieceKind::PointMass { mass: 1.0 },
                u_lo: 0.0,
                u_hi: 1.0,
            }],
        }
    }

    pub fn firm(&self) -> usize {
        self.firm
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn support_lo(&self) -> f64 {
        self.pieces[0].lo
    }

    pub fn support_hi(&self) -> f64 {
        self.pieces[self.pieces.len() - 1].hi
    }

    pub fn atom_list(&self) -> Vec<Atom> {
        self.pieces
            .iter()
            .filter_map(|p| match p.kind {
                PieceKind::PointMass { mass } => Some(Atom { location: p.lo, mass }),
                _ => None,
            })
            .collect()
    }

    pub fn is_pure(&self) -> bool {
        self.pieces.len() == 1 && self.pieces[0].kind.is_atom()
    }

    /// Mass of the atom at `mu`, if any.
    pub fn atom_at(&self, mu: f64) -> f64 {
        self.pieces
            .iter()
            .filter(|p| p.kind.is_atom() && p.lo == mu)
            .map(|p| p.u_hi - p.u_lo)
            .sum()
    }

    pub fn cdf_eval(&self, mu: f64) -> f64 {
        let k = self.pieces.partition_point(|p| p.lo <= mu);
        if k == 0 {
            return 0.0;
        }
        let p = &self.pieces[k - 1];
        let v = if p.kind.is_atom() || mu >= p.hi { p.u_hi } else { p.kind.cdf(mu) };
        v.clamp(0.0, 1.0)
    }

    pub fn quantile_eval(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let k = self.pieces.partition_point(|p| p.u_hi < u).min(self.pieces.len() - 1);
        let p = &self.pieces[k];
        if p.kind.is_atom() {
            p.lo
        } else {
            p.kind.quantile(u).clamp(p.lo, p.hi)
        }
    }

    /// Probability-space breakpoints (piece boundaries), including 0 and 1.
    pub fn u_breakpoints(&self) -> Vec<f64> {
        let mut out = vec![0.0];
        out.extend(self.pieces.iter().map(|p| p.u_hi));
        out
    }

    /// `∫₀¹ g(μ(u)) du`: adaptive quadrature on each continuous piece, exact
    /// discrete terms for atoms.
    pub fn expect<G: Fn(f64) -> f64>(&self, g: G) -> f64 {
        let terms: Vec<f64> = self
            .pieces
            .iter()
            .map(|p| match p.kind {
                PieceKind::PointMass { .. } => (p.u_hi - p.u_lo) * g(p.lo),
                ref k => {
                    let (lo, hi) = (p.lo, p.hi);
                    quad::integrate(|u| g(k.quantile(u).clamp(lo, hi)), p.u_lo, p.u_hi, 1e-13, 1e-13).value
                }
            })
            .collect();
        quad::pairwise_sum(&terms)
    }

    /// `∫ g(μ) dF(μ)` over `μ ≤ upper`.
    pub fn expect_below<G: Fn(f64) -> f64>(&self, g: G, upper: f64) -> f64 {
        let terms: Vec<f64> = self
            .pieces
            .iter()
            .filter(|p| p.lo <= upper)
            .map(|p| match p.kind {
                PieceKind::PointMass { .. } => (p.u_hi - p.u_lo) * g(p.lo),
                ref k => {
                    let (lo, hi) = (p.lo, p.hi);
                    let u_top = if upper >= hi { p.u_hi } else { k.cdf(upper).clamp(p.u_lo, p.u_hi) };
                    quad::integrate(|u| g(k.quantile(u).clamp(lo, hi)), p.u_lo, u_top, 1e-13, 1e-13).value
                }
            })
            .collect();
        quad::pairwise_sum(&terms)
    }

    pub fn mean(&self) -> f64 {
        self.expect(|m| m)
    }

    /// Like [`expect`](Self::expect), with continuous pieces also split at
    /// the margins in `splits`.
    pub fn expect_split<G: Fn(f64) -> f64>(&self, g: G, splits: &[f64]) -> f64 {
        let mut terms = Vec::new();
        for p in &self.pieces {
            match p.kind {
                PieceKind::PointMass { .. } => terms.push((p.u_hi - p.u_lo) * g(p.lo)),
                ref k => {
                    let mut cuts = vec![p.u_lo, p.u_hi];
                    cuts.extend(
                        splits.iter().filter(|&&s| p.lo < s && s < p.hi).map(|&s| k.cdf(s).clamp(p.u_lo, p.u_hi)),
                    );
                    cuts.sort_by(f64::total_cmp);
                    cuts.dedup();
                    let (lo, hi) = (p.lo, p.hi);
                    for w in cuts.windows(2) {
                        terms.push(quad::integrate(|u| g(k.quantile(u).clamp(lo, hi)), w[0], w[1], 1e-13, 1e-13).value);
                    }
                }
            }
        }
        quad::pairwise_sum(&terms)
    }
}

impl MarginLaw for MarginDistribution {
    fn cdf(&self, mu: f64) -> f64 {
        self.cdf_eval(mu)
    }

    fn cdf_left(&self, mu: f64) -> f64 {
        (self.cdf_eval(mu) - self.atom_at(mu)).max(0.0)
    }

    fn support(&self) -> (f64, f64) {
        (self.support_lo(), self.support_hi())
    }

    fn breakpoints(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.pieces.iter().flat_map(|p| [p.lo, p.hi]).collect();
        v.dedup();
        v
    }

    fn atoms(&self) -> Vec<Atom> {
        self.atom_list()
    }

    fn plays(&self, mu: f64) -> bool {
        self.pieces.iter().any(|p| if p.kind.is_atom() { p.lo == mu } else { p.lo < mu && mu < p.hi })
    }

    fn expectation(&self, g: &dyn Fn(f64) -> f64, splits: &[f64]) -> f64 {
        self.expect_split(g, splits)
    }
}

/// Which closed form produced a profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolverTag {
    Symmetric,
    Duopoly,
    IndependentN,
    PureBertrand,
    PureMonopoly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumProfile {
    pub distributions: Vec<MarginDistribution>,
    pub profits: Vec<f64>,
    pub solver_tag: SolverTag,
    pub warnings: Vec<String>,
}

impl EquilibriumProfile {
    pub fn n(&self) -> usize {
        self.distributions.len()
    }

    /// Distribution of firm `i` (1-based).
    pub fn dist(&self, i: usize) -> Result<&MarginDistribution> {
        self.distributions.get(i.wrapping_sub(1)).ok_or(Error::BadFirmIndex { index: i, n: self.n() })
    }

    pub fn profit(&self, i: usize) -> Result<f64> {
        self.profits.get(i.wrapping_sub(1)).copied().ok_or(Error::BadFirmIndex { index: i, n: self.n() })
    }

    pub fn laws(&self) -> Vec<&dyn MarginLaw> {
        self.distributions.iter().map(|d| d as &dyn MarginLaw).collect()
    }
}

// ---------------------------------------------------------------------------
// solvers

const RHO_EPS: f64 = 1e-14;

fn pure_profile(structure: &ConsiderationStructure, tag: SolverTag) -> EquilibriumProfile {
    let n = structure.n();
    let (loc, profits) = match tag {
        SolverTag::PureBertrand => (0.0, vec![0.0; n]),
        _ => (1.0, structure.all_stats().iter().map(|s| s.captive).collect()),
    };
    EquilibriumProfile {
        distributions: (1..=n).map(|i| MarginDistribution::point_mass(i, loc)).collect(),
        profits,
        solver_tag: tag,
        warnings: Vec::new(),
    }
}

/// Symmetric consideration: common quantile `μ(u) = ρ / H(1 − u)` on `[ρ, 1]`.
pub fn solve_symmetric(structure: &ConsiderationStructure) -> Result<EquilibriumProfile> {
    if !structure.is_symmetric() {
        return Err(Error::NotSymmetric);
    }
    let stats = structure.firm_stats(1)?;
    if stats.reach <= 0.0 {
        return Err(Error::ZeroReach(1));
    }
    if stats.rho <= RHO_EPS {
        return Ok(pure_profile(structure, SolverTag::PureBertrand));
    }
    if stats.rho >= 1.0 - RHO_EPS {
        return Ok(pure_profile(structure, SolverTag::PureMonopoly));
    }
    let pgf = structure.pgf(1)?;
    let rho = pgf.rho();
    let n = structure.n();
    let distributions = (1..=n)
        .map(|i| {
            MarginDistribution::from_pieces(
                i,
                vec![(rho, 1.0, PieceKind::SymmetricPGF { rho, pgf: pgf.coefficients.clone() })],
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EquilibriumProfile {
        distributions,
        profits: vec![rho * stats.reach; n],
        solver_tag: SolverTag::Symmetric,
        warnings: Vec::new(),
    })
}

/// Asymmetric duopoly with `0 < ρ₂ ≤ ρ₁ < 1` (firms relabelled internally).
pub fn solve_duopoly(structure: &ConsiderationStructure) -> Result<EquilibriumProfile> {
    if structure.n() != 2 {
        return Err(Error::NotDuopoly(structure.n()));
    }
    let stats = structure.all_stats();
    for s in &stats {
        if s.rho <= RHO_EPS || s.rho >= 1.0 - RHO_EPS {
            return Err(Error::DegenerateRho { firm: s.firm, rho: s.rho });
        }
    }
    let (hi, lo) = if stats[0].rho >= stats[1].rho { (0, 1) } else { (1, 0) };
    let (rho1, rho2) = (stats[hi].rho, stats[lo].rho);
    let atom = (rho1 - rho2) / (1.0 - rho2);
    let mut hi_pieces = vec![(rho1, 1.0, PieceKind::DuopolyF1 { rho1, rho2 })];
    if atom > 0.0 {
        hi_pieces.push((1.0, 1.0, PieceKind::PointMass { mass: atom }));
    }
    let hi_dist = MarginDistribution::from_pieces(hi + 1, hi_pieces)?;
    let lo_dist = MarginDistribution::from_pieces(lo + 1, vec![(rho1, 1.0, PieceKind::DuopolyF2 { rho1 })])?;
    let mut distributions = vec![hi_dist, lo_dist];
    distributions.sort_by_key(|d| d.firm);
    let mut profits = vec![0.0; 2];
    profits[hi] = stats[hi].captive;
    profits[lo] = rho1 * stats[lo].reach;
    Ok(EquilibriumProfile { distributions, profits, solver_tag: SolverTag::Duopoly, warnings: Vec::new() })
}

/// Cutoffs and floor of the independent-consideration equilibrium, for
/// reach probabilities sorted in decreasing order.
#[derive(Debug, Clone, PartialEq)]
pub struct IndependentCutoffs {
    /// `μ̲ = Π_{h≥2} (1 − λ_h)`.
    pub mu_floor: f64,
    /// `mu_bar[k - 1] = μ̄_k` for `k = 1..=n+1`, with `μ̄_{n+1} = μ̲`.
    pub mu_bar: Vec<f64>,
    /// `c[m - 1] = C_m = Π_{h>m} (1 − λ_h)`.
    pub c: Vec<f64>,
}

pub fn independent_cutoffs(sorted: &[f64]) -> IndependentCutoffs {
    let n = sorted.len();
    let mu_floor: f64 = sorted.iter().skip(1).map(|l| 1.0 - l).product();
    let c: Vec<f64> = (1..=n).map(|m| sorted.iter().skip(m).map(|l| 1.0 - l).product()).collect();
    let mut mu_bar = vec![1.0; n + 1];
    for k in 3..=n {
        let num: f64 = sorted[1..k - 1].iter().map(|l| 1.0 - l).product();
        mu_bar[k - 1] = num / (1.0 - sorted[k - 1]).powi(k as i32 - 2);
    }
    mu_bar[n] = mu_floor;
    IndependentCutoffs { mu_floor, mu_bar, c }
}

/// The common multiplier `Γ(μ) = λ_j F_j(μ)` of the independent equilibrium.
pub fn independent_gamma(cut: &IndependentCutoffs, mu: f64) -> f64 {
    let n = cut.c.len();
    if mu <= cut.mu_floor {
        return 0.0;
    }
    // active set size m with μ ∈ [μ̄_{m+1}, μ̄_m]
    let m = (2..=n).rev().find(|&m| mu <= cut.mu_bar[m - 1]).unwrap_or(2);
    1.0 - (cut.mu_floor / (mu * cut.c[m - 1])).powf(1.0 / (m as f64 - 1.0))
}

/// Independent consideration with reach probabilities `λ₁ > λ₂ ≥ … ≥ λ_n`.
pub fn solve_independent(structure: &ConsiderationStructure) -> Result<EquilibriumProfile> {
    let lambdas = structure.lambdas().ok_or(Error::NotIndependent)?.to_vec();
    for &l in &lambdas {
        if !(l > 0.0 && l < 1.0) {
            return Err(Error::BadLambda(l));
        }
    }
    let n = lambdas.len();
    if n == 1 {
        return Ok(pure_profile(structure, SolverTag::PureMonopoly));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| lambdas[b].total_cmp(&lambdas[a]));
    let sorted: Vec<f64> = order.iter().map(|&j| lambdas[j]).collect();
    let cut = independent_cutoffs(&sorted);
    let mut warnings = Vec::new();
    if sorted[0] == sorted[1] {
        warnings.push(format!(
            "largest reach {} is shared; using the no-atom limit of the strict-leader equilibrium",
            sorted[0]
        ));
    }
    let mut distributions = vec![None; n];
    let mut profits = vec![0.0; n];
    for (rank0, &firm0) in order.iter().enumerate() {
        let rank = rank0 + 1;
        let lambda = sorted[rank0];
        let mut pieces = Vec::new();
        for m in (rank.max(2)..=n).rev() {
            let (lo, hi) = (cut.mu_bar[m], cut.mu_bar[m - 1]);
            if hi > lo {
                pieces.push((lo, hi, PieceKind::IndependentGamma { mu_floor: cut.mu_floor, c_m: cut.c[m - 1], m, lambda }));
            }
        }
        if rank == 1 {
            let atom = 1.0 - sorted[1] / sorted[0];
            if atom > 0.0 {
                pieces.push((1.0, 1.0, PieceKind::PointMass { mass: atom }));
            }
        }
        distributions[firm0] = Some(MarginDistribution::from_pieces(firm0 + 1, pieces)?);
        profits[firm0] = lambda * cut.mu_floor;
    }
    Ok(EquilibriumProfile {
        distributions: distributions.into_iter().map(|d| d.expect("every firm assigned")).collect(),
        profits,
        solver_tag: SolverTag::IndependentN,
        warnings,
    })
}

/// Dispatch to the closed form that applies.
///
/// Firms nobody considers, and firms whose whole audience is captive, are
/// split off first: the former price at `μ = 1` with zero profit, the latter
/// are local monopolists.
pub fn solve(structure: &ConsiderationStructure) -> Result<EquilibriumProfile> {
    let n = structure.n();
    let stats = structure.all_stats();
    let mut warnings = Vec::new();
    let mut contested = Vec::new();
    for s in &stats {
        if s.reach <= 0.0 {
            warnings.push(format!("firm {} has zero reach and is excluded", s.firm));
        } else if s.rho < 1.0 - RHO_EPS {
            contested.push(s.firm);
        }
    }
    if contested.is_empty() {
        let mut p = pure_profile(structure, SolverTag::PureMonopoly);
        p.warnings = warnings;
        return Ok(p);
    }
    if stats.iter().filter(|s| s.reach > 0.0).all(|s| s.rho <= RHO_EPS) {
        let mut p = pure_profile(structure, SolverTag::PureBertrand);
        for (i, s) in stats.iter().enumerate() {
            if s.reach <= 0.0 {
                p.distributions[i] = MarginDistribution::point_mass(i + 1, 1.0);
            }
        }
        p.warnings = warnings;
        return Ok(p);
    }
    if contested.len() < n {
        let sub = structure.restrict(&contested);
        let mut inner = solve_full(&sub)?;
        let mut full = pure_profile(structure, SolverTag::PureMonopoly);
        for (k, &firm) in contested.iter().enumerate() {
            let d = &inner.distributions[k];
            let raw = d.pieces.iter().map(|p| (p.lo, p.hi, p.kind.clone())).collect();
            full.distributions[firm - 1] = MarginDistribution::from_pieces(firm, raw)?;
            full.profits[firm - 1] = inner.profits[k];
        }
        for s in &stats {
            if !contested.contains(&s.firm) && s.reach > 0.0 {
                warnings.push(format!("firm {} serves only captive consumers and prices at the monopoly margin", s.firm));
            }
        }
        full.solver_tag = inner.solver_tag;
        warnings.append(&mut inner.warnings);
        full.warnings = warnings;
        return Ok(full);
    }
    let mut p = solve_full(structure)?;
    warnings.append(&mut p.warnings);
    p.warnings = warnings;
    Ok(p)
}

fn solve_full(structure: &ConsiderationStructure) -> Result<EquilibriumProfile> {
    if structure.is_symmetric() {
        solve_symmetric(structure)
    } else if structure.is_independent() {
        solve_independent(structure)
    } else if structure.n() == 2 {
        solve_duopoly(structure)
    } else {
        Err(Error::UnsupportedStructure)
    }
}

// ---------------------------------------------------------------------------
// demand in margin space

/// Margin-game demand of firm `i` at `mu` against atomless rivals:
/// `Σ_{S∋i} α_S Π_{j∈S∖{i}} (1 − F_j(μ))`.
pub fn demand_share(
    structure: &ConsiderationStructure,
    i: usize,
    mu: f64,
    rivals: &[MarginDistribution],
) -> Result<f64> {
    check_profile_len(structure, rivals.len())?;
    structure.firm_stats(i)?;
    let mut survive = vec![1.0; structure.n()];
    for (j, d) in rivals.iter().enumerate() {
        if j + 1 == i {
            continue;
        }
        if d.atom_at(mu) > 0.0 {
            return Err(Error::AtomAtPoint { firm: j + 1, mu });
        }
        survive[j] = 1.0 - d.cdf_eval(mu);
    }
    Ok(structure
        .entries()
        .filter(|(s, _)| s.contains(&i))
        .map(|(s, m)| m * s.iter().filter(|&&j| j != i).map(|&j| survive[j - 1]).product::<f64>())
        .sum())
}

/// Factorized demand for independent structures: `λ_i Π_{j≠i} (1 − λ_j F_j(μ))`.
pub fn demand_share_independent(
    structure: &ConsiderationStructure,
    i: usize,
    mu: f64,
    rivals: &[MarginDistribution],
) -> Result<f64> {
    let lambdas = structure.lambdas().ok_or(Error::NotIndependent)?;
    check_profile_len(structure, rivals.len())?;
    structure.firm_stats(i)?;
    let mut q = lambdas[i - 1];
    for (j, d) in rivals.iter().enumerate() {
        if j + 1 == i {
            continue;
        }
        if d.atom_at(mu) > 0.0 {
            return Err(Error::AtomAtPoint { firm: j + 1, mu });
        }
        q *= 1.0 - lambdas[j] * d.cdf_eval(mu);
    }
    Ok(q)
}

fn check_profile_len(structure: &ConsiderationStructure, got: usize) -> Result<()> {
    if got != structure.n() {
        Err(Error::ProfileMismatch { expected: structure.n(), got })
    } else {
        Ok(())
    }
}

/// Rival outcome probabilities at a point: tied or strictly above.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RivalOdds {
    pub tie: f64,
    pub above: f64,
}

pub(crate) fn rival_odds(law: &dyn MarginLaw, mu: f64) -> RivalOdds {
    let f = law.cdf(mu);
    let fl = law.cdf_left(mu).min(f);
    RivalOdds { tie: f - fl, above: 1.0 - f }
}

/// Expected share a consumer with set `set` gives to `i`, ties split
/// uniformly: `Σ_k P(no rival below, k tied) / (k + 1)`.
pub(crate) fn tie_split_share(set: &[usize], i: usize, odds: &[RivalOdds]) -> f64 {
    let mut poly = vec![1.0];
    for &j in set.iter().filter(|&&j| j != i) {
        let o = odds[j - 1];
        if o.tie == 0.0 {
            for c in &mut poly {
                *c *= o.above;
            }
            continue;
        }
        let mut next = vec![0.0; poly.len() + 1];
        for (k, &c) in poly.iter().enumerate() {
            next[k] += c * o.above;
            next[k + 1] += c * o.tie;
        }
        poly = next;
    }
    poly.iter().enumerate().map(|(k, c)| c / (k + 1) as f64).sum()
}

/// Tie-aware margin demand of firm `i` at `mu`.
pub fn demand_share_tie_aware(structure: &ConsiderationStructure, i: usize, mu: f64, laws: &[&dyn MarginLaw]) -> f64 {
    let odds: Vec<RivalOdds> = laws.iter().map(|l| rival_odds(*l, mu)).collect();
    structure.entries().filter(|(s, _)| s.contains(&i)).map(|(s, m)| m * tie_split_share(s, i, &odds)).sum()
}

// ---------------------------------------------------------------------------
// verification

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirmVerification {
    pub firm: usize,
    pub profit: f64,
    /// Max `|μ q_i(μ) − π_i*|` over grid points the firm plays.
    pub indifference_residual: f64,
    /// Max `μ q_i(μ) − π_i*` over the whole grid.
    pub deviation_gain: f64,
    pub worst_deviation_at: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub grid_size: usize,
    pub tol: f64,
    pub firms: Vec<FirmVerification>,
    pub passed: bool,
}

impl VerificationReport {
    pub fn max_gap(&self) -> f64 {
        self.firms.iter().map(|f| f.indifference_residual.max(f.deviation_gain)).fold(0.0, f64::max)
    }
}

/// Evaluation grid: uniform points plus every breakpoint, atom neighbours and
/// the common floor.
pub(crate) fn verification_grid(laws: &[&dyn MarginLaw], grid_size: usize) -> Vec<f64> {
    let step = 1.0 / (grid_size - 1) as f64;
    let mut g: Vec<f64> = (0..grid_size).map(|k| k as f64 * step).collect();
    for law in laws {
        for b in law.breakpoints() {
            g.extend([b, b - step, b + step, b - 1e-9, b + 1e-9]);
        }
        for a in law.atoms() {
            g.extend([a.location, a.location - step, a.location + step]);
        }
    }
    g.retain(|m| (0.0..=1.0).contains(m));
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}

/// Check a candidate profile of arbitrary margin laws against claimed profits.
pub fn verify_laws(
    structure: &ConsiderationStructure,
    laws: &[&dyn MarginLaw],
    profits: &[f64],
    grid_size: usize,
    tol: f64,
) -> Result<VerificationReport> {
    if grid_size < 100 {
        return Err(Error::BadConfig(format!("grid_size {grid_size} < 100")));
    }
    check_profile_len(structure, laws.len())?;
    check_profile_len(structure, profits.len())?;
    let grid = verification_grid(laws, grid_size);
    let n = structure.n();
    // payoff[k][i] at grid[k]
    let payoffs: Vec<Vec<f64>> = grid
        .par_iter()
        .map(|&mu| {
            let odds: Vec<RivalOdds> = laws.iter().map(|l| rival_odds(*l, mu)).collect();
            let mut q = vec![0.0; n];
            for (set, m) in structure.entries() {
                for &i in set {
                    q[i - 1] += m * tie_split_share(set, i, &odds);
                }
            }
            q.into_iter().map(|qi| mu * qi).collect()
        })
        .collect();
    let firms: Vec<FirmVerification> = (0..n)
        .map(|i| {
            let mut resid: f64 = 0.0;
            let mut gain = f64::NEG_INFINITY;
            let mut at = 0.0;
            for (k, &mu) in grid.iter().enumerate() {
                let d = payoffs[k][i] - profits[i];
                if d > gain {
                    gain = d;
                    at = mu;
                }
                if laws[i].plays(mu) {
                    resid = resid.max(d.abs());
                }
            }
            FirmVerification { firm: i + 1, profit: profits[i], indifference_residual: resid, deviation_gain: gain, worst_deviation_at: at }
        })
        .collect();
    let passed = firms.iter().all(|f| f.indifference_residual <= tol && f.deviation_gain <= tol);
    Ok(VerificationReport { grid_size, tol, firms, passed })
}

pub fn verify_equilibrium(
    structure: &ConsiderationStructure,
    profile: &EquilibriumProfile,
    grid_size: usize,
    tol: f64,
) -> Result<VerificationReport> {
    verify_laws(structure, &profile.laws(), &profile.profits, grid_size, tol)
}

// ---------------------------------------------------------------------------
// serialization

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PieceWire {
    interval: [f64; 2],
    #[serde(flatten)]
    kind: PieceKind,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FirmWire {
    firm: usize,
    support: [f64; 2],
    pieces: Vec<PieceWire>,
    atoms: Vec<Atom>,
    profit: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ProfileWire {
    solver: SolverTag,
    firms: Vec<FirmWire>,
    #[serde(default)]
    warnings: Vec<String>,
}

impl Serialize for EquilibriumProfile {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let firms = self
            .distributions
            .iter()
            .zip(&self.profits)
            .map(|(d, &profit)| FirmWire {
                firm: d.firm,
                support: [d.support_lo(), d.support_hi()],
                pieces: d.pieces.iter().map(|p| PieceWire { interval: [p.lo, p.hi], kind: p.kind.clone() }).collect(),
                atoms: d.atom_list(),
                profit,
            })
            .collect();
        ProfileWire { solver: self.solver_tag, firms, warnings: self.warnings.clone() }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for EquilibriumProfile {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let wire = ProfileWire::deserialize(deserializer)?;
        let mut distributions = Vec::with_capacity(wire.firms.len());
        let mut profits = Vec::with_capacity(wire.firms.len());
        for (k, f) in wire.firms.into_iter().enumerate() {
            if f.firm != k + 1 {
                return Err(D::Error::custom(format!("firm {} listed at position {}", f.firm, k + 1)));
            }
            let raw = f.pieces.into_iter().map(|p| (p.interval[0], p.interval[1], p.kind)).collect();
            let d = MarginDistribution::from_pieces(f.firm, raw).map_err(D::Error::custom)?;
            let listed: f64 = f.atoms.iter().map(|a| a.mass).sum();
            let actual: f64 = d.atom_list().iter().map(|a| a.mass).sum();
            if (listed - actual).abs() > DIST_TOL {
                return Err(D::Error::custom(format!("firm {}: atom list disagrees with pieces", f.firm)));
            }
            distributions.push(d);
            profits.push(f.profit);
        }
        Ok(EquilibriumProfile { distributions, profits, solver_tag: wire.solver, warnings: wire.warnings })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn duopoly_structure() -> ConsiderationStructure {
        ConsiderationStructure::from_explicit(2, [(vec![1], 0.3), (vec![2], 0.1), (vec![1, 2], 0.3)], Some(0.3)).unwrap()
    }

    #[test]
    fn symmetric_binomial_two() {
        let p = solve_symmetric(&ConsiderationStructure::binomial(2, 0.5).unwrap()).unwrap();
        let d = p.dist(1).unwrap();
        for k in 0..=10 {
            let u = k as f64 / 10.0;
            assert!((d.quantile_eval(u) - 1.0 / (2.0 - u)).abs() < 1e-15);
        }
        assert_eq!(d.quantile_eval(0.0), 0.5);
        assert_eq!(d.quantile_eval(1.0), 1.0);
        assert!((p.profits[0] - 0.25).abs() < 1e-15);
        assert!(d.atom_list().is_empty());
    }

    #[test]
    fn symmetric_binomial_three() {
        let p = solve_symmetric(&ConsiderationStructure::binomial(3, 0.5).unwrap()).unwrap();
        let d = p.dist(2).unwrap();
        for k in 0..=10 {
            let u = k as f64 / 10.0;
            assert!((d.quantile_eval(u) - 1.0 / (2.0 - u).powi(2)).abs() < 1e-15);
        }
    }

    #[test]
    fn symmetric_degenerate_cases() {
        let p = solve_symmetric(&ConsiderationStructure::spatial(4, 1).unwrap()).unwrap();
        assert_eq!(p.solver_tag, SolverTag::PureMonopoly);
        assert!(p.distributions.iter().all(|d| d.is_pure() && d.quantile_eval(0.3) == 1.0));
        assert!(p.profits.iter().all(|&x| (x - 0.25).abs() < 1e-15));
        let p = solve_symmetric(&ConsiderationStructure::spatial(3, 3).unwrap()).unwrap();
        assert_eq!(p.solver_tag, SolverTag::PureBertrand);
        assert!(p.profits.iter().all(|&x| x == 0.0));
        assert!(matches!(solve_symmetric(&duopoly_structure()), Err(Error::NotSymmetric)));
    }

    #[test]
    fn duopoly_example() {
        let s = duopoly_structure();
        let p = solve_duopoly(&s).unwrap();
        let d1 = p.dist(1).unwrap();
        let d2 = p.dist(2).unwrap();
        let atoms = d1.atom_list();
        assert_eq!(atoms.len(), 1);
        assert!((atoms[0].mass - 1.0 / 3.0).abs() < 1e-15);
        assert!((p.profits[0] - 0.3).abs() < 1e-15);
        assert!((p.profits[1] - 0.2).abs() < 1e-15);
        assert_eq!(d1.cdf_eval(0.5), 0.0);
        assert!(d2.cdf_eval(0.5).abs() < 1e-15);
        assert_eq!(d1.quantile_eval(0.9), 1.0);
        assert!((d1.cdf_eval(1.0) - 1.0).abs() < 1e-15);
        assert!((d1.cdf_left(1.0) - 2.0 / 3.0).abs() < 1e-14);
        assert!(d2.atom_list().is_empty());
        assert!(matches!(solve_duopoly(&ConsiderationStructure::binomial(3, 0.5).unwrap()), Err(Error::NotDuopoly(3))));
        let degenerate = ConsiderationStructure::from_explicit(2, [(vec![1], 0.5), (vec![1, 2], 0.5)], None).unwrap();
        assert!(matches!(solve_duopoly(&degenerate), Err(Error::DegenerateRho { firm: 2, .. })));
    }

    #[test]
    fn duopoly_relabels_when_second_firm_has_higher_rho() {
        let s = ConsiderationStructure::from_explicit(2, [(vec![1], 0.1), (vec![2], 0.3), (vec![1, 2], 0.3)], Some(0.3)).unwrap();
        let p = solve_duopoly(&s).unwrap();
        assert!(p.dist(1).unwrap().atom_list().is_empty());
        assert_eq!(p.dist(2).unwrap().atom_list().len(), 1);
        assert!((p.profits[1] - 0.3).abs() < 1e-15);
        assert!((p.profits[0] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn equal_rho_duopoly_matches_symmetric() {
        let s = ConsiderationStructure::binomial(2, 0.4).unwrap();
        let a = solve_duopoly(&s).unwrap();
        let b = solve_symmetric(&s).unwrap();
        for i in 1..=2 {
            assert!(a.dist(i).unwrap().atom_list().is_empty());
            for k in 0..=50 {
                let mu = 0.6 + 0.4 * k as f64 / 50.0;
                assert!((a.dist(i).unwrap().cdf_eval(mu) - b.dist(i).unwrap().cdf_eval(mu)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn independent_example() {
        let s = ConsiderationStructure::independent(&[0.6, 0.5, 0.4]).unwrap();
        let p = solve_independent(&s).unwrap();
        for (got, want) in p.profits.iter().zip([0.18, 0.15, 0.12]) {
            assert!((got - want).abs() < 1e-15);
        }
        let d1 = p.dist(1).unwrap();
        assert!((d1.support_lo() - 0.3).abs() < 1e-15);
        assert!((d1.atom_list()[0].mass - 1.0 / 6.0).abs() < 1e-15);
        let d3 = p.dist(3).unwrap();
        assert!((d3.support_hi() - 5.0 / 6.0).abs() < 1e-15);
        let gamma = 1.0 - (0.3f64 / 0.48).sqrt();
        assert!((gamma - 0.209_430_584_957_905).abs() < 1e-12);
        assert!((d3.cdf_eval(0.48) - gamma / 0.4).abs() < 1e-14);
        assert!((d1.cdf_eval(0.48) - gamma / 0.6).abs() < 1e-14);
    }

    #[test]
    fn independent_relabels_unsorted_input() {
        let s = ConsiderationStructure::independent(&[0.4, 0.6, 0.5]).unwrap();
        let p = solve_independent(&s).unwrap();
        assert_eq!(p.dist(2).unwrap().atom_list().len(), 1);
        assert!((p.dist(1).unwrap().support_hi() - 5.0 / 6.0).abs() < 1e-15);
        assert!((p.profits[0] - 0.12).abs() < 1e-15);
    }

    #[test]
    fn independent_equal_lambdas_reduce_to_symmetric() {
        let s = ConsiderationStructure::independent(&[0.5, 0.5]).unwrap();
        let p = solve_independent(&s).unwrap();
        assert!(!p.warnings.is_empty());
        let q = solve_symmetric(&ConsiderationStructure::binomial(2, 0.5).unwrap()).unwrap();
        for i in 1..=2 {
            assert!(p.dist(i).unwrap().atom_list().is_empty());
            for k in 0..=20 {
                let u = k as f64 / 20.0;
                assert!((p.dist(i).unwrap().quantile_eval(u) - q.dist(i).unwrap().quantile_eval(u)).abs() < 1e-14);
            }
        }
        assert!(matches!(solve_independent(&duopoly_structure()), Err(Error::NotIndependent)));
    }

    #[test]
    fn demand_share_examples() {
        let s = ConsiderationStructure::binomial(2, 0.5).unwrap();
        let p = solve_symmetric(&s).unwrap();
        assert!((demand_share(&s, 1, 0.2, &p.distributions).unwrap() - 0.5).abs() < 1e-15);
        for k in 0..=10 {
            let u = k as f64 / 10.0;
            let mu = p.dist(1).unwrap().quantile_eval(u);
            let q = demand_share(&s, 1, mu, &p.distributions).unwrap();
            assert!((mu * q - 0.25).abs() < 1e-14);
        }

        let s = ConsiderationStructure::independent(&[0.6, 0.5, 0.4]).unwrap();
        let p = solve_independent(&s).unwrap();
        let q = demand_share_independent(&s, 2, 0.48, &p.distributions).unwrap();
        let q_general = demand_share(&s, 2, 0.48, &p.distributions).unwrap();
        assert!((0.48 * q - 0.15).abs() < 1e-12);
        assert!((q - q_general).abs() < 1e-14);

        let d = solve_duopoly(&duopoly_structure()).unwrap();
        assert!(matches!(demand_share(&duopoly_structure(), 2, 1.0, &d.distributions), Err(Error::AtomAtPoint { firm: 1, .. })));
    }

    #[test]
    fn tie_split_at_atom() {
        let s = duopoly_structure();
        let d = solve_duopoly(&s).unwrap();
        let laws = d.laws();
        // firm 2 at μ = 1 ties with firm 1's atom half the time
        let q = demand_share_tie_aware(&s, 2, 1.0, &laws);
        assert!((q - (0.1 + 0.3 * (1.0 / 3.0) / 2.0)).abs() < 1e-14);
        // firm 1 at its atom faces no rival atom
        assert!((demand_share_tie_aware(&s, 1, 1.0, &laws) - 0.3).abs() < 1e-14);
    }

    #[test]
    fn solve_dispatch() {
        assert_eq!(solve(&ConsiderationStructure::binomial(3, 0.3).unwrap()).unwrap().solver_tag, SolverTag::Symmetric);
        assert_eq!(solve(&duopoly_structure()).unwrap().solver_tag, SolverTag::Duopoly);
        assert_eq!(
            solve(&ConsiderationStructure::independent(&[0.6, 0.5, 0.4]).unwrap()).unwrap().solver_tag,
            SolverTag::IndependentN
        );
        assert_eq!(solve(&ConsiderationStructure::spatial(4, 2).unwrap()).unwrap().solver_tag, SolverTag::PureBertrand);
        assert_eq!(solve(&ConsiderationStructure::spatial(4, 1).unwrap()).unwrap().solver_tag, SolverTag::PureMonopoly);
        let general = ConsiderationStructure::from_explicit(
            3,
            [(vec![1], 0.2), (vec![2], 0.1), (vec![3], 0.1), (vec![1, 2], 0.3), (vec![2, 3], 0.3)],
            None,
        )
        .unwrap();
        assert!(matches!(solve(&general), Err(Error::UnsupportedStructure)));
    }

    #[test]
    fn solve_splits_off_captive_only_firm() {
        let s = ConsiderationStructure::from_explicit(
            3,
            [(vec![1], 0.3), (vec![2], 0.1), (vec![1, 2], 0.3), (vec![3], 0.2)],
            None,
        )
        .unwrap();
        let p = solve(&s).unwrap();
        assert_eq!(p.solver_tag, SolverTag::Duopoly);
        assert!(p.dist(3).unwrap().is_pure());
        assert!((p.profits[2] - 0.2).abs() < 1e-15);
        assert!(verify_equilibrium(&s, &p, 1001, 1e-10).unwrap().passed);
    }

    #[test]
    fn serialization_round_trip() {
        let s = ConsiderationStructure::independent(&[0.7, 0.5, 0.4, 0.3]).unwrap();
        let p = solve(&s).unwrap();
        let text = serde_json::to_string(&p).unwrap();
        assert!(text.contains("\"kind\":\"IndependentGamma\""));
        assert!(text.contains("\"kind\":\"PointMass\""));
        let back: EquilibriumProfile = serde_json::from_str(&text).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn malformed_distributions_rejected() {
        let e = MarginDistribution::from_pieces(1, vec![(0.5, 1.0, PieceKind::DuopolyF2 { rho1: 0.4 })]);
        assert!(matches!(e, Err(Error::BadDistribution(_))));
        let e = MarginDistribution::from_pieces(1, vec![(0.5, 1.0, PieceKind::DuopolyF1 { rho1: 0.5, rho2: 0.25 })]);
        assert!(matches!(e, Err(Error::BadDistribution(_))), "missing atom mass");
    }
}
