//! Global thumbs-up/thumbs-down ledger and the provider's social reputation.

/// Direction of a social media post about the provider.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PostDirection {
    Up,
    Down,
}

/// Cumulative post counters for one run. Counters only grow and are never
/// reset mid-run; posts are unweighted and permanent.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReputationLedger {
    pub s_plus: u64,
    pub s_minus: u64,
}

impl ReputationLedger {
    pub fn record_post(&mut self, direction: PostDirection) {
        match direction {
            PostDirection::Up => self.s_plus += 1,
            PostDirection::Down => self.s_minus += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.s_plus + self.s_minus
    }

    /// Share of positive posts, or `None` while nothing has been posted
    /// (callers keep their cached value in that case).
    pub fn reputation(&self) -> Option<f64> {
        let total = self.total();
        if total == 0 {
            None
        } else {
            Some(self.s_plus as f64 / total as f64)
        }
    }

    /// Volume weight a_t = min(total / nu, 1): how fully consumers take the
    /// social signal into account.
    pub fn volume_weight(&self, nu: u64) -> f64 {
        debug_assert!(nu >= 1);
        (self.total() as f64 / nu as f64).min(1.0)
    }
}
