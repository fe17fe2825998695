use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ExperimentError;

pub const OPERAND_MIN: i64 = 2;
pub const OPERAND_MAX: i64 = 99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Operator {
    #[serde(rename = "+")]
    Add,
    #[serde(rename = "-")]
    Sub,
    #[serde(rename = "*")]
    Mul,
}

impl Operator {
    pub fn apply(self, a: i64, b: i64) -> i64 {
        match self {
            Operator::Add => a + b,
            Operator::Sub => a - b,
            Operator::Mul => a * b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistractionProblem {
    pub left: i64,
    pub op: Operator,
    pub right: i64,
    pub answer: i64,
}

pub fn generate_distraction_problems(seed: u64, n: usize) -> Result<Vec<DistractionProblem>, ExperimentError> {
    if n == 0 {
        return Err(ExperimentError::InvalidArgument("at least one distraction problem is required".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| {
            let left = rng.random_range(OPERAND_MIN..=OPERAND_MAX);
            let right = rng.random_range(OPERAND_MIN..=OPERAND_MAX);
            let op = [Operator::Add, Operator::Sub, Operator::Mul][rng.random_range(0..3)];
            DistractionProblem { left, op, right, answer: op.apply(left, right) }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_correct() {
        let a = generate_distraction_problems(1, 50).unwrap();
        assert_eq!(a, generate_distraction_problems(1, 50).unwrap());
        assert_ne!(a, generate_distraction_problems(2, 50).unwrap());
        for p in &a {
            assert!((OPERAND_MIN..=OPERAND_MAX).contains(&p.left) && (OPERAND_MIN..=OPERAND_MAX).contains(&p.right));
            assert_eq!(p.answer, p.op.apply(p.left, p.right));
        }
    }

    #[test]
    fn zero_problems_rejected() {
        assert!(generate_distraction_problems(1, 0).is_err());
    }
}
