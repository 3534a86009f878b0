use serde::{Deserialize, Serialize};

/// Number of explicit-feedback flags carried per interaction.
pub const N_EXPLICIT: usize = 3;

/// Column names of the explicit flags, in storage order.
pub const EXPLICIT_NAMES: [&str; N_EXPLICIT] = ["like", "comment", "follow"];

/// Side features of a user-item pair, split by kind. Names live in [`FeatureSchema`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Features {
    pub categorical: Vec<String>,
    pub numeric: Vec<f64>,
}

/// One user-video event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub user_id: u64,
    pub item_id: u64,
    /// Seconds since epoch.
    pub timestamp: i64,
    /// Video duration in seconds, strictly positive.
    pub duration: f64,
    /// Watch time in seconds. May exceed `duration` (rewatching).
    pub watch_time: f64,
    /// like, comment, follow.
    pub explicit: [u8; N_EXPLICIT],
    pub features: Features,
}

impl InteractionRecord {
    /// True when at least one explicit flag is set.
    pub fn any_explicit(&self) -> bool {
        self.explicit.contains(&1)
    }

    /// 1.0 if any explicit flag is set, else 0.0.
    pub fn explicit_indicator(&self) -> f64 {
        if self.any_explicit() {
            1.0
        } else {
            0.0
        }
    }

    /// Checks the per-record invariants, returning a reason on failure.
    pub fn check(&self) -> std::result::Result<(), String> {
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(format!("duration must be > 0, got {}", self.duration));
        }
        if !(self.watch_time.is_finite() && self.watch_time >= 0.0) {
            return Err(format!("watch_time must be >= 0, got {}", self.watch_time));
        }
        if let Some(f) = self.explicit.iter().find(|&&f| f > 1) {
            return Err(format!("explicit flags must be 0 or 1, got {f}"));
        }
        Ok(())
    }
}

/// Names of the side-feature columns, matching [`Features`] positions.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub categorical: Vec<String>,
    pub numeric: Vec<String>,
}

/// A validated record set together with its feature schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub schema: FeatureSchema,
    pub records: Vec<InteractionRecord>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}
