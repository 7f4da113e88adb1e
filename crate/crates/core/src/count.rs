//! Exact operation counters for instrumented arithmetic.
//!
//! Counts are incremented at the site of each scalar floating-point
//! multiply, add (subtractions count as adds), and divide. Nothing is
//! sampled or estimated: a counted kernel performs exactly the arithmetic
//! it reports.

use std::ops::AddAssign;

/// Tally of scalar floating-point operations.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct OpCounter {
    pub multiplies: u64,
    pub adds: u64,
    pub divides: u64,
}

impl OpCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn total(&self) -> u64 {
        self.multiplies + self.adds + self.divides
    }
}

impl AddAssign for OpCounter {
    fn add_assign(&mut self, rhs: Self) {
        self.multiplies += rhs.multiplies;
        self.adds += rhs.adds;
        self.divides += rhs.divides;
    }
}

/// Per-stage counters for one least-squares fit.
///
/// `build` covers assembling the normal equations (Gram products and the
/// regressor-outcome products); `solve` covers inverting them and
/// recovering coefficients.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct FitCounts {
    pub build: OpCounter,
    pub solve: OpCounter,
}

impl FitCounts {
    pub fn total(&self) -> u64 {
        self.build.total() + self.solve.total()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn totals_sum_all_kinds() {
        let mut c = OpCounter::new();
        c.multiplies += 2;
        c.adds += 3;
        c.divides += 5;
        assert_eq!(c.total(), 10);

        let mut d = c;
        d += c;
        assert_eq!(d.total(), 20);
    }
}
