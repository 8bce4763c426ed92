//! Consideration structures: the distribution of consumers over the sets of
//! firms whose prices they observe.
//!
//! Firms are indexed `1..=n` everywhere in the public API. Sets are stored in
//! canonical form (sorted, distinct indices); sets carrying zero mass are
//! dropped.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the total mass of a structure.
pub const MASS_TOL: f64 = 1e-12;
/// Tolerance on a user-supplied `alpha_empty`.
pub const EMPTY_MASS_TOL: f64 = 1e-9;
/// Masses within this distance are treated as equal by the symmetry test.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ConsiderationStructure {
    n: usize,
    entries: BTreeMap<Vec<usize>, f64>,
    alpha_empty: f64,
    lambdas: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirmStats {
    pub firm: usize,
    pub reach: f64,
    pub captive: f64,
    pub rho: f64,
}

/// Distribution of the number of rivals seen by a consumer who considers a
/// given firm, as a probability generating function `H(s) = Σ β_k s^k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RivalCountPgf {
    pub coefficients: Vec<f64>,
}

impl RivalCountPgf {
    pub fn eval(&self, s: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, &b| acc * s + b)
    }

    pub fn derivative(&self, s: f64) -> f64 {
        self.coefficients
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, &b)| acc * s + k as f64 * b)
    }

    /// `∫₀¹ H(s) ds`, exact.
    pub fn mean(&self) -> f64 {
        self.coefficients.iter().enumerate().map(|(k, &b)| b / (k + 1) as f64).sum()
    }

    /// `H(0)`, the captive-to-reach ratio.
    pub fn rho(&self) -> f64 {
        self.coefficients.first().copied().unwrap_or(0.0)
    }

    /// Solve `H(s) = y` for `s ∈ [0, 1]`; `H` is nondecreasing there.
    /// Values outside `[H(0), H(1)]` are clamped to the endpoints.
    pub fn inverse(&self, y: f64) -> f64 {
        if y <= self.eval(0.0) {
            return 0.0;
        }
        if y >= self.eval(1.0) {
            return 1.0;
        }
        crate::numerics::root::bisect(|s| self.eval(s) - y, 0.0, 1.0, 0.0).unwrap_or(1.0)
    }
}

pub fn pgf_eval(pgf: &RivalCountPgf, s: f64) -> f64 {
    pgf.eval(s)
}

pub fn pgf_mean(pgf: &RivalCountPgf) -> f64 {
    pgf.mean()
}

fn canonical_set(set: &[usize], n: usize) -> Result<Vec<usize>> {
    let bad = |reason| Error::BadSubset { set: set.to_vec(), n, reason };
    if set.is_empty() {
        return Err(bad("empty set (use alpha_empty)"));
    }
    let mut s = set.to_vec();
    s.sort_unstable();
    if s[0] == 0 || s[s.len() - 1] > n {
        return Err(bad("index out of range"));
    }
    if s.windows(2).any(|w| w[0] == w[1]) {
        return Err(bad("repeated index"));
    }
    Ok(s)
}

fn binomial_coefficient(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

fn subsets_by_mask(n: usize) -> impl Iterator<Item = Vec<usize>> {
    (1u64..(1u64 << n)).map(move |mask| (0..n).filter(|j| mask >> j & 1 == 1).map(|j| j + 1).collect())
}

fn check_lambda(l: f64) -> Result<f64> {
    if l > 0.0 && l < 1.0 {
        Ok(l)
    } else {
        Err(Error::BadLambda(l))
    }
}

impl ConsiderationStructure {
    /// Build from explicit masses on nonempty sets. `alpha_empty` is derived as
    /// the residual when omitted, and must agree with it within 1e-9 when given.
    pub fn from_explicit(
        n: usize,
        entries: impl IntoIterator<Item = (Vec<usize>, f64)>,
        alpha_empty: Option<f64>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::BadSubset { set: vec![], n, reason: "structure needs at least one firm" });
        }
        let mut map: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
        for (set, mass) in entries {
            if !(mass >= 0.0) || !mass.is_finite() {
                return Err(Error::NegativeMass { set, mass });
            }
            let key = canonical_set(&set, n)?;
            if map.contains_key(&key) {
                return Err(Error::BadSubset { set, n, reason: "set listed twice" });
            }
            if mass > 0.0 {
                map.insert(key, mass);
            }
        }
        let listed: f64 = map.values().sum();
        let empty = match alpha_empty {
            Some(e) => {
                if !(e >= 0.0) {
                    return Err(Error::NegativeMass { set: vec![], mass: e });
                }
                if (listed + e - 1.0).abs() > EMPTY_MASS_TOL {
                    return Err(Error::MassSumMismatch { total: listed + e });
                }
                (1.0 - listed).max(0.0)
            }
            None => {
                if listed > 1.0 + MASS_TOL {
                    return Err(Error::MassSumMismatch { total: listed });
                }
                (1.0 - listed).max(0.0)
            }
        };
        Ok(Self { n, entries: map, alpha_empty: empty, lambdas: None })
    }

    /// Random search: every consumer samples each firm independently with the
    /// same probability `lambda`.
    pub fn binomial(n: usize, lambda: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::BadSubset { set: vec![], n, reason: "structure needs at least one firm" });
        }
        check_lambda(lambda)?;
        let mut s = Self::independent(&vec![lambda; n])?;
        s.lambdas = Some(vec![lambda; n]);
        Ok(s)
    }

    /// Independent consideration with firm-specific probabilities.
    pub fn independent(lambdas: &[f64]) -> Result<Self> {
        let n = lambdas.len();
        if n == 0 {
            return Err(Error::BadSubset { set: vec![], n, reason: "structure needs at least one firm" });
        }
        if n > 24 {
            return Err(Error::BadSubset { set: vec![], n, reason: "explicit enumeration limited to 24 firms" });
        }
        for &l in lambdas {
            check_lambda(l)?;
        }
        let entries = subsets_by_mask(n).map(|set| {
            let mass = (1..=n)
                .map(|j| if set.contains(&j) { lambdas[j - 1] } else { 1.0 - lambdas[j - 1] })
                .product::<f64>();
            (set, mass)
        });
        let map: BTreeMap<_, _> = entries.collect();
        let empty = lambdas.iter().map(|l| 1.0 - l).product();
        Ok(Self { n, entries: map, alpha_empty: empty, lambdas: Some(lambdas.to_vec()) })
    }

    /// Spatial market on a circle: mass `1/n` on each window of `k`
    /// consecutive firms.
    pub fn spatial(n: usize, k: usize) -> Result<Self> {
        if n == 0 || k == 0 || k > n {
            return Err(Error::BadWindow { n, k });
        }
        let mut map: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
        for start in 0..n {
            let mut set: Vec<usize> = (0..k).map(|j| (start + j) % n + 1).collect();
            set.sort_unstable();
            *map.entry(set).or_insert(0.0) += 1.0 / n as f64;
        }
        Ok(Self { n, entries: map, alpha_empty: 0.0, lambdas: None })
    }

    /// Symmetric structure given the mass of each individual set of size
    /// `k` in `per_set_mass[k - 1]`.
    pub fn symmetric_by_size(n: usize, per_set_mass: &[f64]) -> Result<Self> {
        if per_set_mass.len() != n {
            return Err(Error::BadSubset { set: vec![], n, reason: "need one mass per set size" });
        }
        if n > 24 {
            return Err(Error::BadSubset { set: vec![], n, reason: "explicit enumeration limited to 24 firms" });
        }
        let entries: Vec<_> = subsets_by_mask(n).map(|s| {
            let m = per_set_mass[s.len() - 1];
            (s, m)
        }).collect();
        Self::from_explicit(n, entries, None)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alpha_empty(&self) -> f64 {
        self.alpha_empty
    }

    /// Mass on a set (in any index order); zero for sets not listed.
    pub fn alpha(&self, set: &[usize]) -> f64 {
        let mut s = set.to_vec();
        s.sort_unstable();
        self.entries.get(&s).copied().unwrap_or(0.0)
    }

    /// Nonempty sets with positive mass, in canonical order.
    pub fn entries(&self) -> impl Iterator<Item = (&[usize], f64)> {
        self.entries.iter().map(|(k, &v)| (k.as_slice(), v))
    }

    pub fn total_mass(&self) -> f64 {
        self.alpha_empty + self.entries.values().sum::<f64>()
    }

    /// Consideration probabilities, when the structure was built as
    /// independent (or binomial).
    pub fn lambdas(&self) -> Option<&[f64]> {
        self.lambdas.as_deref()
    }

    pub fn is_independent(&self) -> bool {
        self.lambdas.is_some()
    }

    fn check_firm(&self, i: usize) -> Result<()> {
        if i == 0 || i > self.n {
            Err(Error::BadFirmIndex { index: i, n: self.n })
        } else {
            Ok(())
        }
    }

    pub fn firm_stats(&self, i: usize) -> Result<FirmStats> {
        self.check_firm(i)?;
        let reach: f64 = self.entries.iter().filter(|(s, _)| s.contains(&i)).map(|(_, &m)| m).sum();
        let captive = self.alpha(&[i]);
        let rho = if reach > 0.0 { (captive / reach).min(1.0) } else { 0.0 };
        Ok(FirmStats { firm: i, reach, captive, rho })
    }

    pub fn all_stats(&self) -> Vec<FirmStats> {
        (1..=self.n).map(|i| self.firm_stats(i).expect("index in range")).collect()
    }

    pub fn pgf(&self, i: usize) -> Result<RivalCountPgf> {
        let stats = self.firm_stats(i)?;
        if stats.reach <= 0.0 {
            return Err(Error::ZeroReach(i));
        }
        let mut coefficients = vec![0.0; self.n];
        for (set, &mass) in self.entries.iter().filter(|(s, _)| s.contains(&i)) {
            coefficients[set.len() - 1] += mass;
        }
        for b in &mut coefficients {
            *b /= stats.reach;
        }
        Ok(RivalCountPgf { coefficients })
    }

    /// True when `α_S` depends only on `|S|`.
    pub fn is_symmetric(&self) -> bool {
        self.size_masses().is_some()
    }

    /// Per-set mass for each set size `1..=n` when the structure is symmetric.
    pub fn size_masses(&self) -> Option<Vec<f64>> {
        let n = self.n;
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![0.0f64; n];
        let mut count = vec![0usize; n];
        for (set, &m) in &self.entries {
            let k = set.len() - 1;
            lo[k] = lo[k].min(m);
            hi[k] = hi[k].max(m);
            count[k] += 1;
        }
        let mut out = vec![0.0; n];
        for k in 0..n {
            if count[k] == 0 || hi[k] <= SYMMETRY_TOL {
                continue;
            }
            let full = binomial_coefficient(n, k + 1);
            if (count[k] as f64) < full - 0.5 || hi[k] - lo[k] > SYMMETRY_TOL {
                return None;
            }
            out[k] = 0.5 * (hi[k] + lo[k]);
        }
        Some(out)
    }

    /// Firms with positive reach.
    pub fn active_firms(&self) -> Vec<usize> {
        self.all_stats().into_iter().filter(|s| s.reach > 0.0).map(|s| s.firm).collect()
    }

    /// Restrict to a subset of firms that carries all positive-mass sets,
    /// relabelled `1..=firms.len()` in the given order.
    pub(crate) fn restrict(&self, firms: &[usize]) -> Self {
        let pos: BTreeMap<usize, usize> = firms.iter().enumerate().map(|(k, &f)| (f, k + 1)).collect();
        let entries = self
            .entries
            .iter()
            .filter_map(|(s, &m)| {
                let mut mapped: Vec<usize> = s.iter().filter_map(|f| pos.get(f).copied()).collect();
                if mapped.len() != s.len() {
                    return None;
                }
                mapped.sort_unstable();
                Some((mapped, m))
            })
            .collect();
        let lambdas = self.lambdas.as_ref().map(|l| firms.iter().map(|&f| l[f - 1]).collect());
        Self { n: firms.len(), entries, alpha_empty: self.alpha_empty, lambdas }
    }
}

// ---------------------------------------------------------------------------
// JSON and generator-string input

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SetMass {
    pub set: Vec<usize>,
    pub mass: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BinomialSpec {
    pub n: usize,
    pub lambda: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndependentSpec {
    pub lambda: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpatialSpec {
    pub n: usize,
    pub k: usize,
}

/// Accepted JSON shapes for a consideration structure.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StructureInput {
    Binomial { binomial: BinomialSpec },
    Independent { independent: IndependentSpec },
    Spatial { spatial: SpatialSpec },
    Explicit {
        n: usize,
        alpha: Vec<SetMass>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha_empty: Option<f64>,
    },
}

impl StructureInput {
    pub fn build(&self) -> Result<ConsiderationStructure> {
        match self {
            Self::Binomial { binomial } => ConsiderationStructure::binomial(binomial.n, binomial.lambda),
            Self::Independent { independent } => ConsiderationStructure::independent(&independent.lambda),
            Self::Spatial { spatial } => ConsiderationStructure::spatial(spatial.n, spatial.k),
            Self::Explicit { n, alpha, alpha_empty } => ConsiderationStructure::from_explicit(
                *n,
                alpha.iter().map(|e| (e.set.clone(), e.mass)),
                *alpha_empty,
            ),
        }
    }
}

impl ConsiderationStructure {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str::<StructureInput>(text)?.build()
    }

    pub fn to_input(&self) -> StructureInput {
        if let Some(l) = &self.lambdas {
            return StructureInput::Independent { independent: IndependentSpec { lambda: l.clone() } };
        }
        StructureInput::Explicit {
            n: self.n,
            alpha: self.entries.iter().map(|(s, &m)| SetMass { set: s.clone(), mass: m }).collect(),
            alpha_empty: Some(self.alpha_empty),
        }
    }
}

impl Serialize for ConsiderationStructure {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_input().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ConsiderationStructure {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        StructureInput::deserialize(deserializer)?.build().map_err(serde::de::Error::custom)
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.trim().parse().map_err(|_| Error::Parse(format!("{key}: cannot parse {v:?} as a number")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.trim().parse().map_err(|_| Error::Parse(format!("{key}: cannot parse {v:?} as an integer")))
}

// split "a=1,b=[x,y],c=2" on top-level commas
fn split_params(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let (mut depth, mut start) = (0i32, 0usize);
    for (i, ch) in s.char_indices() {
        match ch {
            '[' => depth += 1,
            ']' => depth -= 1,
            ',' if depth == 0 => {
                out.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out.into_iter().map(str::trim).filter(|p| !p.is_empty()).collect()
}

/// Parses generator strings such as `binomial:n=2,lambda=0.5`,
/// `independent:lambda=[0.6,0.5,0.4]` and `spatial:n=4,k=2`.
impl FromStr for ConsiderationStructure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut params = BTreeMap::new();
        for p in split_params(rest) {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, got {p:?}")))?;
            params.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| {
            params.get(k).ok_or_else(|| Error::Parse(format!("{kind}: missing parameter {k:?}")))
        };
        match kind.trim() {
            "binomial" => Self::binomial(parse_usize("n", get("n")?)?, parse_f64("lambda", get("lambda")?)?),
            "spatial" => Self::spatial(parse_usize("n", get("n")?)?, parse_usize("k", get("k")?)?),
            "independent" => {
                let raw = get("lambda")?;
                let inner = raw.trim().trim_start_matches('[').trim_end_matches(']');
                let lambdas = inner
                    .split([',', '/'])
                    .map(|v| parse_f64("lambda", v))
                    .collect::<Result<Vec<_>>>()?;
                Self::independent(&lambdas)
            }
            "monopoly" => Self::from_explicit(1, [(vec![1], 1.0)], Some(0.0)),
            other => Err(Error::Parse(format!(
                "unknown structure generator {other:?} (expected binomial, independent, spatial)"
            ))),
        }
    }
}

impl fmt::Display for ConsiderationStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n={} ", self.n)?;
        for (s, m) in &self.entries {
            write!(f, "{s:?}:{m:.6} ")?;
        }
        write!(f, "∅:{:.6}", self.alpha_empty)
    }
}
