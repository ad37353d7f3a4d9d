use thiserror::Error;

/// Errors produced by the workbench.
///
/// `Undecided` is special: bounded-budget bisimulation refuses to answer
/// rather than report a wrong group-theoretic fact.
#[derive(Debug, Error)]
pub enum Error {
    #[error("alphabet mismatch: expected m = {expected}, got {got}")]
    AlphabetMismatch { expected: usize, got: usize },

    #[error("elements are defined over different automaton specs")]
    SpecMismatch,

    #[error("letter {letter} out of range for alphabet of size {m}")]
    LetterOutOfRange { letter: usize, m: usize },

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("undecided at budget: section closure exceeded {budget} words")]
    UndecidedAtBudget { budget: usize },

    #[error("enumeration budget exceeded: would need {needed} elements (budget {budget})")]
    EnumerationBudget { needed: usize, budget: usize },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("state `{0}` is not declared in the spec")]
    UnknownState(String),

    #[error("sampler exceeded {0} chain steps")]
    MaxStepsExceeded(usize),

    #[error("measures use different key modes")]
    KeyModeMismatch,

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
