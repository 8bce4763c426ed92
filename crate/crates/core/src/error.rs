use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    // consideration structures
    #[error("negative mass {mass} on consideration set {set:?}")]
    NegativeMass { set: Vec<usize>, mass: f64 },
    #[error("invalid consideration set {set:?} for {n} firms: {reason}")]
    BadSubset { set: Vec<usize>, n: usize, reason: &'static str },
    #[error("consideration masses sum to {total}, expected 1")]
    MassSumMismatch { total: f64 },
    #[error("consideration probability {0} must lie strictly inside (0, 1)")]
    BadLambda(f64),
    #[error("window k={k} invalid for n={n} firms (need 1 <= k <= n)")]
    BadWindow { n: usize, k: usize },
    #[error("firm index {index} out of range 1..={n}")]
    BadFirmIndex { index: usize, n: usize },
    #[error("firm {0} has zero reach")]
    ZeroReach(usize),

    // margin game
    #[error("structure is not symmetric")]
    NotSymmetric,
    #[error("structure has {0} firms, duopoly solver needs exactly 2")]
    NotDuopoly(usize),
    #[error("structure was not built from independent consideration probabilities")]
    NotIndependent,
    #[error("captive-to-reach ratio {rho} of firm {firm} is degenerate (must be in (0, 1))")]
    DegenerateRho { firm: usize, rho: f64 },
    #[error("no closed-form solver for this structure; use the oracle module to check candidate profiles")]
    UnsupportedStructure,
    #[error("rival of firm {firm} has an atom at margin {mu}; use the tie-aware evaluation")]
    AtomAtPoint { firm: usize, mu: f64 },
    #[error("malformed margin distribution: {0}")]
    BadDistribution(String),
    #[error("profile has {got} firms but structure has {expected}")]
    ProfileMismatch { expected: usize, got: usize },

    // curvature layer
    #[error("price {p} outside the demand domain [0, 1]")]
    OutOfDomain { p: f64 },
    #[error("invalid demand specification: {0}")]
    BadDemand(String),
    #[error("cost {0} must lie in [0, 1)")]
    BadCost(f64),
    #[error("price {p} is below marginal cost {c}")]
    PriceBelowCost { p: f64, c: f64 },
    #[error("price {0} exceeds the reservation value 1")]
    PriceAboveOne(f64),
    #[error("margin {0} must lie in [0, 1]")]
    BadMu(f64),
    #[error("effective margin is not increasing on [c, 1]: slope vanishes at p = {p}")]
    InvertibilityViolated { p: f64 },

    // pass-through
    #[error("price {p} equals marginal cost {c}")]
    PriceAtCost { p: f64, c: f64 },
    #[error("support of firm {firm} touches marginal cost (captive-to-reach ratio is zero)")]
    SupportTouchesCost { firm: usize },
    #[error("reports were computed at different costs ({0} vs {1})")]
    MismatchedCost(f64, f64),
    #[error("quantile grids differ between the compared reports")]
    MismatchedGrid,
    #[error("profile for firm {0} is unavailable")]
    UnsolvedProfile(usize),

    // bounds
    #[error("no closed-form bound for demand family {0}")]
    UnknownFamily(String),
    #[error("no elasticity transition found in [{lo}, {hi}]")]
    NoTransition { lo: f64, hi: f64 },

    // oracle / io
    #[error("invalid simulation configuration: {0}")]
    BadConfig(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
