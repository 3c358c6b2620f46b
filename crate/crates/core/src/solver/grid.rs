/// Fixed-point cost grid used for every feasibility decision.
///
/// Op costs are scaled to integer units and rounded half-to-even; budgets are
/// scaled and rounded down. Feasibility is `sum(units) <= budget_units`, so the
/// answer never depends on floating-point summation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CostGrid {
    scale: u64,
}

/// Stand-in for an unlimited budget; large enough that no sum reaches it.
pub(crate) const UNBOUNDED_UNITS: i64 = i64::MAX / 4;

impl CostGrid {
    pub fn new(scale: u64) -> Self {
        assert!(scale >= 1, "cost scale must be at least 1");
        Self { scale }
    }

    pub fn scale(&self) -> u64 {
        self.scale
    }

    pub fn units(&self, cost_ms: f64) -> i64 {
        (cost_ms * self.scale as f64).round_ties_even() as i64
    }

    pub fn budget_units(&self, limit_ms: f64) -> i64 {
        if !limit_ms.is_finite() {
            return UNBOUNDED_UNITS;
        }
        let x = limit_ms * self.scale as f64;
        if x >= UNBOUNDED_UNITS as f64 {
            return UNBOUNDED_UNITS;
        }
        // absorb representation error of budgets that sit exactly on the grid
        (x + x.abs() * 1e-12 + 1e-9).floor() as i64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_rules() {
        let g = CostGrid::new(1000);
        assert_eq!(g.units(1.2345), 1234); // 1234.5 rounds to even
        assert_eq!(g.units(0.0025), 2);
        assert_eq!(g.units(0.0035), 4);
        assert_eq!(g.budget_units(1.2349), 1234);
        assert_eq!(g.budget_units(f64::INFINITY), UNBOUNDED_UNITS);
        // 0.6 * 3 = 1.7999999999999998 in binary
        assert_eq!(g.budget_units(0.6 * 3.0), 1800);
    }
}
