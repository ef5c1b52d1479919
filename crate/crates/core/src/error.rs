use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("element index {index} out of range for semigroup of order {order}")]
    OutOfRange { index: u64, order: u64 },
    #[error("product overflows the carrier encoding: {0}")]
    Overflow(String),
    #[error("invalid Cayley table: {0}")]
    InvalidTable(String),
    #[error("invalid homomorphism: {0}")]
    InvalidHomomorphism(String),
    #[error("invalid predicate: {0}")]
    InvalidPredicate(String),
    #[error("no assignment for free variable {0}")]
    MissingAssignment(char),
    #[error("predicate #{0} is not registered in the structure")]
    UnregisteredPredicate(usize),
    #[error("wrong free variables: expected {expected}, found {found}")]
    WrongArity { expected: String, found: String },
    #[error("structure is not quotient-backed: {0}")]
    NotQuotientBacked(String),
    #[error("predicates are backed by different homomorphisms")]
    MixedHomomorphisms,
    #[error("Y is not a subset of X: element {0} is in Y but not in X")]
    NotSubset(u64),
    #[error("set is not IP: {0}")]
    NotIp(String),
    #[error("formula undecided at stage {stage}: {formula}")]
    Undecided { stage: usize, formula: String },
    #[error("formula is not in the type: {0}")]
    NotInType(String),
    #[error("oracle contract violated: {0}")]
    Contract(String),
    #[error("class {0} is not idempotent")]
    NotIdempotent(usize),
    #[error("no element of class {0} found in the search window")]
    EmptyFiber(usize),
    #[error("malformed encoding: {0}")]
    Decode(String),
    #[error("invalid specification: {0}")]
    Spec(String),
    #[error("transcript replay failed: {0}")]
    Transcript(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Spec(e.to_string())
    }
}
