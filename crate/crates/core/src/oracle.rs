//! Brute-force checks of solved profiles in price space.
//!
//! [`price_game_deviation_gap`] maps a margin profile to prices and searches
//! a grid of unilateral price deviations. [`simulate`] draws a market of
//! individual consumers, each buying from the cheapest firm it considers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::consideration::ConsiderationStructure;
use crate::curvature::{self, DemandSpec, Invertibility};
use crate::error::{Error, Result};
use crate::margin_game::{self, EquilibriumProfile, MarginLaw, RivalOdds};

/// Default price grid for deviation searches.
pub const DEFAULT_PRICE_GRID: usize = 5001;
/// Default deviation-gap tolerance.
pub const DEFAULT_GAP_TOL: f64 = 1e-6;

fn check_invertible(spec: &DemandSpec, c: f64) -> Result<()> {
    curvature::CostParam::new(c)?;
    spec.validate()?;
    match curvature::invertibility_check(spec, c) {
        Invertibility::Ok => Ok(()),
        Invertibility::Violation { p } => Err(Error::InvertibilityViolated { p }),
    }
}

/// A firm's posted-price law, induced from its margin law by `φ`.
struct PriceView<'a> {
    law: &'a dyn MarginLaw,
    spec: &'a DemandSpec,
    c: f64,
}

impl PriceView<'_> {
    fn mu(&self, p: f64) -> Option<f64> {
        if p < self.c {
            None
        } else {
            Some(curvature::mu_of_price(self.spec, self.c, p.min(1.0)).unwrap_or(0.0))
        }
    }

    fn cdf(&self, p: f64) -> f64 {
        match self.mu(p) {
            None => 0.0,
            Some(m) => self.law.cdf(m),
        }
    }

    fn cdf_left(&self, p: f64) -> f64 {
        match self.mu(p) {
            None => 0.0,
            Some(m) => self.law.cdf_left(m),
        }
    }

    fn odds(&self, p: f64) -> RivalOdds {
        let f = self.cdf(p);
        RivalOdds { tie: f - self.cdf_left(p).min(f), above: 1.0 - f }
    }
}

/// Expected quantity share of firm `i` when posting `p`, ties split uniformly.
fn price_share(structure: &ConsiderationStructure, views: &[PriceView], i: usize, p: f64) -> f64 {
    let odds: Vec<RivalOdds> = views.iter().map(|v| v.odds(p)).collect();
    structure
        .entries()
        .filter(|(s, _)| s.contains(&i))
        .map(|(s, m)| m * margin_game::tie_split_share(s, i, &odds))
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FirmPriceGap {
    pub firm: usize,
    /// Expected payoff of the firm's own mixed strategy.
    pub realized: f64,
    pub best_deviation: f64,
    pub best_price: f64,
    /// `best_deviation − realized`.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceGapReport {
    pub demand: DemandSpec,
    pub cost: f64,
    pub grid_size: usize,
    pub firms: Vec<FirmPriceGap>,
}

impl PriceGapReport {
    pub fn max_gap(&self) -> f64 {
        self.firms.iter().map(|f| f.gap).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn passed(&self, tol: f64) -> bool {
        self.max_gap() <= tol
    }
}

/// Largest gain from a unilateral price deviation, per firm, for the profile
/// mapped to prices under `spec` at cost `c`.
pub fn price_game_deviation_gap(
    structure: &ConsiderationStructure,
    profile: &EquilibriumProfile,
    spec: &DemandSpec,
    c: f64,
    grid_size: usize,
) -> Result<PriceGapReport> {
    price_game_deviation_gap_laws(structure, &profile.laws(), spec, c, grid_size)
}

/// As [`price_game_deviation_gap`], for an arbitrary candidate profile.
pub fn price_game_deviation_gap_laws(
    structure: &ConsiderationStructure,
    laws: &[&dyn MarginLaw],
    spec: &DemandSpec,
    c: f64,
    grid_size: usize,
) -> Result<PriceGapReport> {
    check_invertible(spec, c)?;
    if grid_size < 2 {
        return Err(Error::BadConfig(format!("price grid {grid_size} < 2")));
    }
    if laws.len() != structure.n() {
        return Err(Error::ProfileMismatch { expected: structure.n(), got: laws.len() });
    }
    let views: Vec<PriceView> = laws.iter().map(|&law| PriceView { law, spec, c }).collect();
    let d = 1.0 - c;
    let step = d / (grid_size - 1) as f64;
    let mut grid: Vec<f64> = (0..grid_size).map(|k| c + k as f64 * step).collect();
    let mut mu_breaks: Vec<f64> = Vec::new();
    for law in laws {
        mu_breaks.extend(law.breakpoints());
        mu_breaks.extend(law.atoms().iter().map(|a| a.location));
    }
    mu_breaks.sort_by(f64::total_cmp);
    mu_breaks.dedup();
    for &m in &mu_breaks {
        let p = curvature::phi_unchecked(spec, c, m.clamp(0.0, 1.0));
        grid.extend([p, p - step, p + step, p - 1e-9, p + 1e-9]);
    }
    grid.retain(|p| *p > c && *p <= 1.0);
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let payoff = |i: usize, p: f64| (p - c) * spec.demand_eval(p).unwrap_or(0.0) * price_share(structure, &views, i, p);
    let firms = (1..=structure.n())
        .into_par_iter()
        .map(|i| {
            let (best_deviation, best_price) = grid
                .iter()
                .map(|&p| (payoff(i, p), p))
                .fold((f64::NEG_INFINITY, c), |acc, x| if x.0 > acc.0 { x } else { acc });
            let realized = laws[i - 1].expectation(&|m: f64| payoff(i, curvature::phi_unchecked(spec, c, m)), &mu_breaks);
            FirmPriceGap { firm: i, realized, best_deviation, best_price, gap: best_deviation - realized }
        })
        .collect();
    Ok(PriceGapReport { demand: spec.clone(), cost: c, grid_size, firms })
}

// ---------------------------------------------------------------------------
// Monte Carlo

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub consumers: usize,
    pub seed: u64,
    /// Number of price bins for the empirical CDF and the profit bins.
    pub price_grid_size: usize,
    pub cost: f64,
    pub demand: DemandSpec,
    /// Independent RNG streams; fixes the work split, so results do not depend
    /// on the thread count.
    pub replicates: usize,
    /// Keep every posted price for the empirical CDF and KS distance.
    pub keep_samples: bool,
}

impl SimConfig {
    pub fn new(consumers: usize, seed: u64, cost: f64, demand: DemandSpec) -> Self {
        Self { consumers, seed, price_grid_size: 20, cost, demand, replicates: 64, keep_samples: true }
    }

    fn validate(&self) -> Result<()> {
        if self.consumers == 0 {
            return Err(Error::BadConfig("consumer count must be at least 1".into()));
        }
        if self.price_grid_size < 2 {
            return Err(Error::BadConfig("price grid must have at least 2 points".into()));
        }
        if self.replicates == 0 {
            return Err(Error::BadConfig("replicate count must be at least 1".into()));
        }
        check_invertible(&self.demand, self.cost)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfitBin {
    pub lo: f64,
    pub hi: f64,
    pub posts: u64,
    /// Mean realized profit per consumer draw at which the firm posted a price
    /// in this bin.
    pub mean_profit: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimFirm {
    pub firm: usize,
    pub profit: f64,
    pub profit_se: f64,
    /// Quantity-weighted mean transaction price; `None` without sales.
    pub mean_paid: Option<f64>,
    pub mean_paid_se: Option<f64>,
    pub quantity: f64,
    /// Kolmogorov–Smirnov distance of posted prices to the analytic law.
    pub ks_distance: Option<f64>,
    /// `(p, F̂(p))` on the price grid.
    pub empirical_cdf: Vec<[f64; 2]>,
    pub profit_bins: Vec<ProfitBin>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub consumers: usize,
    pub seed: u64,
    pub cost: f64,
    pub demand: DemandSpec,
    pub firms: Vec<SimFirm>,
}

/// Sums and cross-products of a per-consumer vector.
#[derive(Debug, Clone)]
struct Moments {
    dim: usize,
    sum: Vec<f64>,
    outer: Vec<f64>,
}

impl Moments {
    fn new(dim: usize) -> Self {
        Self { dim, sum: vec![0.0; dim], outer: vec![0.0; dim * dim] }
    }

    fn push(&mut self, z: &[f64]) {
        for a in 0..self.dim {
            if z[a] == 0.0 {
                continue;
            }
            self.sum[a] += z[a];
            for b in 0..self.dim {
                self.outer[a * self.dim + b] += z[a] * z[b];
            }
        }
    }

    fn merge(&mut self, other: &Moments) {
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.outer.iter_mut().zip(&other.outer) {
            *a += b;
        }
    }

    fn mean(&self, n: f64, a: usize) -> f64 {
        self.sum[a] / n
    }

    fn cov(&self, n: f64, a: usize, b: usize) -> f64 {
        self.outer[a * self.dim + b] / n - self.mean(n, a) * self.mean(n, b)
    }

    /// Delta-method variance of `g(mean)` given its gradient.
    fn delta_var(&self, n: f64, grad: &[(usize, f64)]) -> f64 {
        let mut v = 0.0;
        for &(a, ga) in grad {
            for &(b, gb) in grad {
                v += ga * gb * self.cov(n, a, b);
            }
        }
        (v / n).max(0.0)
    }
}

#[derive(Debug, Clone, Copy)]
struct BinStat {
    posts: u64,
    sum: f64,
    sumsq: f64,
}

/// One chunk of consumers.
struct Chunk {
    // per firm: for each cost (a = p x w, b = x w, π = (p − c) x w)
    moments: Vec<Moments>,
    bins: Vec<Vec<BinStat>>,
    samples: Vec<Vec<f64>>,
}

struct Market<'a> {
    structure: &'a ConsiderationStructure,
    profile: &'a EquilibriumProfile,
    spec: &'a DemandSpec,
    costs: Vec<f64>,
    sets: Vec<Vec<usize>>,
    cum: Vec<f64>,
    bin_edges: Vec<Vec<f64>>,
    keep_samples: bool,
}

impl<'a> Market<'a> {
    fn new(
        structure: &'a ConsiderationStructure,
        profile: &'a EquilibriumProfile,
        spec: &'a DemandSpec,
        costs: Vec<f64>,
        bins: usize,
        keep_samples: bool,
    ) -> Result<Self> {
        if profile.n() != structure.n() {
            return Err(Error::ProfileMismatch { expected: structure.n(), got: profile.n() });
        }
        let mut sets = Vec::new();
        let mut cum = Vec::new();
        let mut acc = 0.0;
        for (s, m) in structure.entries() {
            acc += m;
            sets.push(s.to_vec());
            cum.push(acc);
        }
        let c0 = costs[0];
        let bin_edges = profile
            .distributions
            .iter()
            .map(|d| {
                let lo = curvature::phi_unchecked(spec, c0, d.support_lo());
                let hi = curvature::phi_unchecked(spec, c0, d.support_hi());
                (0..=bins).map(|k| lo + (hi - lo) * k as f64 / bins as f64).collect()
            })
            .collect();
        Ok(Self { structure, profile, spec, costs, sets, cum, bin_edges, keep_samples })
    }

    fn run_chunk(&self, seed: u64, stream: u64, consumers: usize) -> Chunk {
        let n = self.structure.n();
        let nc = self.costs.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let mut moments = vec![Moments::new(3 * nc); n];
        let nbins = self.bin_edges.first().map_or(0, |e| e.len() - 1);
        let mut bins = vec![vec![BinStat { posts: 0, sum: 0.0, sumsq: 0.0 }; nbins]; n];
        let mut samples = if self.keep_samples { vec![Vec::with_capacity(consumers); n] } else { vec![Vec::new(); n] };
        let mut mu = vec![0.0; n];
        let mut price = vec![vec![0.0; n]; nc];
        let mut z = vec![vec![0.0; 3 * nc]; n];
        for _ in 0..consumers {
            let r: f64 = rng.random();
            let set_idx = self.cum.partition_point(|&x| x <= r);
            for j in 0..n {
                let u: f64 = rng.random();
                mu[j] = self.profile.distributions[j].quantile_eval(u);
            }
            for (k, &c) in self.costs.iter().enumerate() {
                for j in 0..n {
                    price[k][j] = curvature::phi_unchecked(self.spec, c, mu[j]);
                }
            }
            for zj in z.iter_mut() {
                zj.iter_mut().for_each(|v| *v = 0.0);
            }
            if let Some(set) = self.sets.get(set_idx) {
                // μ order and price order agree at every cost
                let best = set.iter().map(|&j| mu[j - 1]).fold(f64::INFINITY, f64::min);
                let tied: Vec<usize> = set.iter().copied().filter(|&j| mu[j - 1] == best).collect();
                let w = 1.0 / tied.len() as f64;
                for &j in &tied {
                    for (k, &c) in self.costs.iter().enumerate() {
                        let p = price[k][j - 1];
                        if p > 1.0 {
                            continue;
                        }
                        let x = self.spec.demand_eval(p).unwrap_or(0.0) * w;
                        z[j - 1][3 * k] = p * x;
                        z[j - 1][3 * k + 1] = x;
                        z[j - 1][3 * k + 2] = (p - c) * x;
                    }
                }
            }
            for j in 0..n {
                moments[j].push(&z[j]);
                let p = price[0][j];
                if nbins > 0 {
                    let edges = &self.bin_edges[j];
                    let b = edges.partition_point(|&e| e <= p).saturating_sub(1).min(nbins - 1);
                    let prof = z[j][2];
                    let s = &mut bins[j][b];
                    s.posts += 1;
                    s.sum += prof;
                    s.sumsq += prof * prof;
                }
                if self.keep_samples {
                    samples[j].push(p);
                }
            }
        }
        Chunk { moments, bins, samples }
    }

    fn run(&self, seed: u64, consumers: usize, replicates: usize) -> Chunk {
        let reps = replicates.min(consumers);
        let chunks: Vec<Chunk> = (0..reps)
            .into_par_iter()
            .map(|r| {
                let size = consumers / reps + usize::from(r < consumers % reps);
                self.run_chunk(seed, r as u64, size)
            })
            .collect();
        let mut it = chunks.into_iter();
        let mut total = it.next().expect("at least one replicate");
        for ch in it {
            for (a, b) in total.moments.iter_mut().zip(&ch.moments) {
                a.merge(b);
            }
            for (a, b) in total.bins.iter_mut().zip(&ch.bins) {
                for (x, y) in a.iter_mut().zip(b) {
                    x.posts += y.posts;
                    x.sum += y.sum;
                    x.sumsq += y.sumsq;
                }
            }
            for (a, b) in total.samples.iter_mut().zip(ch.samples) {
                a.extend(b);
            }
        }
        total
    }
}

/// Kolmogorov–Smirnov distance between sorted samples and a law given by its
/// CDF and left limit.
pub fn ks_distance<F: Fn(f64) -> f64, L: Fn(f64) -> f64>(sorted: &[f64], cdf: F, cdf_left: L) -> f64 {
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let x = sorted[i];
        let mut j = i;
        while j < sorted.len() && sorted[j] == x {
            j += 1;
        }
        let below = i as f64 / n;
        let at = j as f64 / n;
        d = d.max((below - cdf_left(x)).abs()).max((at - cdf(x)).abs());
        i = j;
    }
    d
}

/// Simulates a market with every consumer drawing fresh prices from the
/// profile mapped to prices.
pub fn simulate(structure: &ConsiderationStructure, profile: &EquilibriumProfile, config: &SimConfig) -> Result<SimResult> {
    config.validate()?;
    let c = config.cost;
    let spec = &config.demand;
    let market = Market::new(structure, profile, spec, vec![c], config.price_grid_size, config.keep_samples)?;
    let total = market.run(config.seed, config.consumers, config.replicates);
    let nf = config.consumers as f64;
    let mut firms = Vec::with_capacity(structure.n());
    for (j, (m, mut samples)) in total.moments.iter().zip(total.samples).enumerate() {
        let profit = m.mean(nf, 2);
        let profit_se = (m.cov(nf, 2, 2).max(0.0) / nf).sqrt();
        let quantity = m.mean(nf, 1);
        let (mean_paid, mean_paid_se) = if m.sum[1] > 0.0 {
            let r = m.sum[0] / m.sum[1];
            let bb = m.mean(nf, 1);
            let var = m.delta_var(nf, &[(0, 1.0 / bb), (1, -r / bb)]);
            (Some(r), Some(var.sqrt()))
        } else {
            (None, None)
        };
        let law = &profile.distributions[j];
        let view = PriceView { law, spec, c };
        let (ks_distance, empirical_cdf) = if config.keep_samples {
            samples.sort_by(f64::total_cmp);
            let ks = ks_distance(&samples, |p| view.cdf(p), |p| view.cdf_left(p));
            let g = config.price_grid_size;
            let cdf = (0..g)
                .map(|k| {
                    let p = c + (1.0 - c) * k as f64 / (g - 1) as f64;
                    [p, samples.partition_point(|&s| s <= p) as f64 / samples.len() as f64]
                })
                .collect();
            (Some(ks), cdf)
        } else {
            (None, Vec::new())
        };
        let edges = &market.bin_edges[j];
        let profit_bins = total.bins[j]
            .iter()
            .enumerate()
            .map(|(b, s)| {
                let k = s.posts as f64;
                let mean = if s.posts > 0 { s.sum / k } else { 0.0 };
                let var = if s.posts > 1 { (s.sumsq / k - mean * mean).max(0.0) / k } else { 0.0 };
                ProfitBin { lo: edges[b], hi: edges[b + 1], posts: s.posts, mean_profit: mean, se: var.sqrt() }
            })
            .collect();
        firms.push(SimFirm {
            firm: j + 1,
            profit,
            profit_se,
            mean_paid,
            mean_paid_se,
            quantity,
            ks_distance,
            empirical_cdf,
            profit_bins,
        });
    }
    Ok(SimResult { consumers: config.consumers, seed: config.seed, cost: c, demand: spec.clone(), firms })
}

impl SimResult {
    /// Columns `firm,p,cdf`.
    pub fn cdf_csv(&self) -> String {
        let mut out = String::from("firm,p,cdf\n");
        for f in &self.firms {
            for [p, v] in &f.empirical_cdf {
                out.push_str(&format!("{},{},{}\n", f.firm, p, v));
            }
        }
        out
    }
}

/// Largest `|mean_profit − target| / se` over bins with at least
/// `min_posts` postings.
pub fn profit_flatness(firm: &SimFirm, target: f64, min_posts: u64) -> f64 {
    firm.profit_bins
        .iter()
        .filter(|b| b.posts >= min_posts && b.se > 0.0)
        .map(|b| (b.mean_profit - target).abs() / b.se)
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McPassthroughFirm {
    pub firm: usize,
    /// `None` when the firm never sells.
    pub tau: Option<f64>,
    pub se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McPassthrough {
    pub c_lo: f64,
    pub c_hi: f64,
    pub consumers: usize,
    pub firms: Vec<McPassthroughFirm>,
}

/// Finite-difference transaction pass-through from two simulated markets that
/// share every random draw.
pub fn mc_passthrough(
    structure: &ConsiderationStructure,
    profile: &EquilibriumProfile,
    config: &SimConfig,
    c_lo: f64,
    c_hi: f64,
) -> Result<McPassthrough> {
    if !(c_lo < c_hi) {
        return Err(Error::BadConfig(format!("need c_lo < c_hi, got {c_lo} and {c_hi}")));
    }
    for c in [c_lo, c_hi] {
        SimConfig { cost: c, ..config.clone() }.validate()?;
    }
    let market = Market::new(structure, profile, &config.demand, vec![c_lo, c_hi], 0, false)?;
    let total = market.run(config.seed, config.consumers, config.replicates);
    let nf = config.consumers as f64;
    let dc = c_hi - c_lo;
    let firms = total
        .moments
        .iter()
        .enumerate()
        .map(|(j, m)| {
            if m.sum[1] <= 0.0 || m.sum[4] <= 0.0 {
                return McPassthroughFirm { firm: j + 1, tau: None, se: None };
            }
            let (al, bl, ah, bh) = (m.mean(nf, 0), m.mean(nf, 1), m.mean(nf, 3), m.mean(nf, 4));
            let tau = (ah / bh - al / bl) / dc;
            let var = m.delta_var(nf, &[(3, 1.0 / bh), (4, -ah / (bh * bh)), (0, -1.0 / bl), (1, al / (bl * bl))]);
            McPassthroughFirm { firm: j + 1, tau: Some(tau), se: Some(var.sqrt() / dc) }
        })
        .collect();
    Ok(McPassthrough { c_lo, c_hi, consumers: config.consumers, firms })
}

/// Profits a firm earns at cost `c` under `spec`, for comparison with
/// simulated values.
pub fn analytic_profits(profile: &EquilibriumProfile, spec: &DemandSpec, c: f64) -> Vec<f64> {
    profile.profits.iter().map(|p| (1.0 - c) * spec.x_at_one() * p).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::margin_game::{solve, MarginDistribution};

    #[test]
    fn binomial_unit_gap() {
        let s = ConsiderationStructure::binomial(2, 0.5).unwrap();
        let p = solve(&s).unwrap();
        let r = price_game_deviation_gap(&s, &p, &DemandSpec::Unit, 0.3, DEFAULT_PRICE_GRID).unwrap();
        assert!(r.max_gap() <= 1e-6, "{r:?}");
        assert!(r.firms.iter().all(|f| (f.realized - 0.7 * 0.25).abs() < 1e-9));
        let r = price_game_deviation_gap(&s, &p, &DemandSpec::Ces { eta: 1.0 }, 0.6, DEFAULT_PRICE_GRID).unwrap();
        assert!(r.max_gap() <= 1e-6, "{r:?}");
    }

    #[test]
    fn forced_pure_strategy_is_beaten() {
        let s = ConsiderationStructure::binomial(2, 0.5).unwrap();
        let p = solve(&s).unwrap();
        let mid = 0.5 * (p.dist(1).unwrap().support_lo() + 1.0);
        let pure = MarginDistribution::point_mass(1, mid);
        let laws: Vec<&dyn MarginLaw> = vec![&pure, p.dist(2).unwrap()];
        let r = price_game_deviation_gap_laws(&s, &laws, &DemandSpec::Unit, 0.3, DEFAULT_PRICE_GRID).unwrap();
        // the rival now gains by undercutting the pure price
        assert!(r.firms[1].gap > 1e-3, "{r:?}");
    }

    #[test]
    fn rejects_noninvertible() {
        let s = ConsiderationStructure::binomial(2, 0.5).unwrap();
        let p = solve(&s).unwrap();
        assert!(matches!(
            price_game_deviation_gap(&s, &p, &DemandSpec::Ces { eta: 2.0 }, 0.3, 101),
            Err(Error::InvertibilityViolated { .. })
        ));
    }

    #[test]
    fn ks_distance_handles_atoms() {
        let cdf = |x: f64| if x >= 1.0 { 1.0 } else { 0.5 * x };
        let left = |x: f64| if x > 1.0 { 1.0 } else { 0.5 * x.min(1.0) };
        let samples = [0.25, 0.75, 1.0, 1.0];
        let d = ks_distance(&samples, cdf, left);
        assert!((d - 0.125).abs() < 1e-15, "{d}");
    }

    #[test]
    fn simulation_is_deterministic_and_sane() {
        let s = ConsiderationStructure::binomial(2, 0.5).unwrap();
        let p = solve(&s).unwrap();
        let cfg = SimConfig::new(20_000, 7, 0.0, DemandSpec::Unit);
        let a = simulate(&s, &p, &cfg).unwrap();
        let b = simulate(&s, &p, &cfg).unwrap();
        assert_eq!(a, b);
        for f in &a.firms {
            assert!(f.profit >= 0.0);
            assert!((f.profit - 0.25).abs() < 4.0 * f.profit_se);
            assert!((f.mean_paid.unwrap() - 2.0 / 3.0).abs() < 4.0 * f.mean_paid_se.unwrap());
        }
    }

    #[test]
    fn empty_market_has_no_sales() {
        let s = ConsiderationStructure::from_explicit(2, vec![], Some(1.0)).unwrap();
        let p = EquilibriumProfile {
            distributions: vec![MarginDistribution::point_mass(1, 1.0), MarginDistribution::point_mass(2, 1.0)],
            profits: vec![0.0, 0.0],
            solver_tag: crate::margin_game::SolverTag::PureMonopoly,
            warnings: vec![],
        };
        let r = simulate(&s, &p, &SimConfig::new(1000, 1, 0.2, DemandSpec::Unit)).unwrap();
        assert!(r.firms.iter().all(|f| f.profit == 0.0 && f.mean_paid.is_none() && f.quantity == 0.0));
    }

    #[test]
    fn monopoly_passthrough_is_zero() {
        let s = ConsiderationStructure::from_explicit(1, vec![(vec![1], 1.0)], None).unwrap();
        let p = solve(&s).unwrap();
        let r = mc_passthrough(&s, &p, &SimConfig::new(1000, 3, 0.5, DemandSpec::Unit), 0.4, 0.6).unwrap();
        assert!(r.firms[0].tau.unwrap().abs() < 1e-12);
    }
}
