use thiserror::Error;

use crate::tree::Vertex;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("branching must be at least 2, got {0}")]
    Branching(usize),
    #[error("depth must be at least 1")]
    ZeroDepth,
    #[error("expected {expected} weights, got {got}")]
    WeightCount { expected: usize, got: usize },
    #[error("weight {0} is not positive")]
    NonPositiveWeight(String),
    #[error("weights sum {0} \u{2260} 1")]
    WeightSum(String),
    #[error("tree with branching {branching} and depth {depth} has too many vertices to index")]
    TooLarge { branching: u64, depth: usize },
    #[error("invalid tree: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidTree(Vec<crate::tree::Diagnostic>),
    #[error("tree document: {0}")]
    Schema(String),
    #[error("vertex {0} is not stored in the tree")]
    UnknownVertex(Vertex),
    #[error("level {level} out of range (limit {limit})")]
    LevelOutOfRange { level: usize, limit: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("value spaces differ: {0} vs {1}")]
    SpaceMismatch(String, String),
    #[error("invalid fraction {0:?}")]
    Fraction(String),
    #[error("function is not harmonic: {0}")]
    NotHarmonic(String),
    #[error("function shapes differ: {0}")]
    ShapeMismatch(String),
    #[error("k must be positive")]
    ZeroIndex,
    #[error("m = {m} exceeds N = {n}")]
    CountRange { n: u32, m: u32 },
    #[error("depth budget {budget} is below the first schedule level {first}")]
    Budget { budget: usize, first: usize },
    #[error("radius must be positive")]
    Radius,
    #[error("last coefficient must be nonzero")]
    ZeroLeadingCoefficient,
    #[error("balls are not provably disjoint: center distance {distance} < radii sum {radii}")]
    NotDisjoint { distance: String, radii: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
