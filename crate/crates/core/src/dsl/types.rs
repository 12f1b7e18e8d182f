use std::fmt;

use serde::{Deserialize, Serialize};

/// Value types flowing through a program: fixed-width real vectors and
/// sequences of them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SemType {
    Vector(usize),
    Sequence(usize),
}

impl SemType {
    /// Width of a vector, or of each element of a sequence.
    pub fn dim(self) -> usize {
        match self {
            SemType::Vector(d) | SemType::Sequence(d) => d,
        }
    }

    pub fn is_sequence(self) -> bool {
        matches!(self, SemType::Sequence(_))
    }
}

impl fmt::Display for SemType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SemType::Vector(d) => write!(f, "Vec({d})"),
            SemType::Sequence(d) => write!(f, "Seq({d})"),
        }
    }
}

/// The type of a function-valued nonterminal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Signature {
    pub input: SemType,
    pub output: SemType,
}

impl Signature {
    pub fn new(input: SemType, output: SemType) -> Self {
        Signature { input, output }
    }

    pub fn vec_to_vec(n: usize, m: usize) -> Self {
        Signature::new(SemType::Vector(n), SemType::Vector(m))
    }

    pub fn seq_to_vec(n: usize, m: usize) -> Self {
        Signature::new(SemType::Sequence(n), SemType::Vector(m))
    }

    pub fn seq_to_seq(n: usize, m: usize) -> Self {
        Signature::new(SemType::Sequence(n), SemType::Sequence(m))
    }

    /// Sequence-to-vector and vector-to-vector signatures are the only ones
    /// besides sequence-to-sequence; vector-to-sequence never occurs.
    pub fn is_well_formed(&self) -> bool {
        self.input.dim() >= 1
            && self.output.dim() >= 1
            && !(matches!(self.input, SemType::Vector(_)) && self.output.is_sequence())
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}→{}", self.input, self.output)
    }
}

/// Whether labels are attached to every frame or to the whole trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    PerFrame,
    PerTrajectory,
}

impl Task {
    pub fn start_signature(self, feature_dim: usize, label_dim: usize) -> Signature {
        match self {
            Task::PerFrame => Signature::seq_to_seq(feature_dim, label_dim),
            Task::PerTrajectory => Signature::seq_to_vec(feature_dim, label_dim),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_matches_program_text_convention() {
        assert_eq!(Signature::seq_to_seq(19, 2).to_string(), "Seq(19)→Seq(2)");
        assert_eq!(Signature::vec_to_vec(3, 1).to_string(), "Vec(3)→Vec(1)");
    }

    #[test]
    fn vector_to_sequence_is_rejected() {
        let sig = Signature::new(SemType::Vector(2), SemType::Sequence(2));
        assert!(!sig.is_well_formed());
        assert!(!Signature::vec_to_vec(0, 2).is_well_formed());
        assert!(Signature::seq_to_vec(4, 2).is_well_formed());
    }
}
