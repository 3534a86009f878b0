//! Seeded property suites shared by the integration tests and the acceptance target.
//!
//! Every suite is deterministic: instances come from ChaCha8 streams with
//! fixed seeds, so a pass or failure is reproducible bit for bit.

#![allow(dead_code)]

pub mod gradients;
pub mod metric_suite;
pub mod objective_suite;
pub mod softtopk_suite;

use std::fmt;

/// Worst observed value of one checked quantity against its limit.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub instances: usize,
    pub worst: f64,
    pub limit: f64,
}

impl Check {
    pub fn new(name: impl Into<String>, limit: f64) -> Self {
        Check {
            name: name.into(),
            instances: 0,
            worst: 0.0,
            limit,
        }
    }

    /// Records one instance; NaN counts as a failure.
    pub fn record(&mut self, value: f64) {
        self.instances += 1;
        if value.is_nan() || value > self.worst {
            self.worst = if value.is_nan() { f64::INFINITY } else { value };
        }
    }

    pub fn passed(&self) -> bool {
        self.instances > 0 && self.worst < self.limit
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} [{}] worst {:.3e} < {:.0e} over {} instances",
            self.name,
            if self.passed() { "ok" } else { "FAIL" },
            self.worst,
            self.limit,
            self.instances
        )
    }
}

/// A suite's checks; it passes when every check passes.
#[derive(Debug, Clone, Default)]
pub struct SuiteReport {
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(Check::passed)
    }

    pub fn push(&mut self, c: Check) {
        self.checks.push(c);
    }

    /// Boolean condition as a check with 0 meaning satisfied.
    pub fn flag(&mut self, name: &str, ok: bool) {
        let mut c = Check::new(name, 0.5);
        c.record(if ok { 0.0 } else { 1.0 });
        self.push(c);
    }

    pub fn summary(&self) -> String {
        self.checks.iter().map(|c| c.to_string()).collect::<Vec<_>>().join("; ")
    }

    pub fn failures(&self) -> String {
        self.checks
            .iter()
            .filter(|c| !c.passed())
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join("; ")
    }
}

/// Entrywise relative error with an absolute floor for near-zero entries.
pub fn rel_err(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

pub fn max_rel_err(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| rel_err(*a, *n, floor))
        .fold(0.0, f64::max)
}

/// Central differences of `f` at `x`, one coordinate at a time.
pub fn central_diff(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|j| {
            p[j] = x[j] + h;
            let up = f(&p);
            p[j] = x[j] - h;
            let dn = f(&p);
            p[j] = x[j];
            (up - dn) / (2.0 * h)
        })
        .collect()
}
