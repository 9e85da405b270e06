//! Evaluation traces: grid values plus run diagnostics.

use crate::problem::TimeGrid;

/// The result of evaluating a fractional integral along a grid.
#[derive(Debug, Clone)]
pub struct EvaluationTrace {
    grid: TimeGrid,
    values: Vec<f64>,
    method: String,
    term_count: usize,
    state_count: usize,
    wall_seconds: f64,
}

impl EvaluationTrace {
    pub(crate) fn new(
        grid: TimeGrid,
        values: Vec<f64>,
        method: &str,
        term_count: usize,
        state_count: usize,
        wall_seconds: f64,
    ) -> Self {
        assert_eq!(grid.len(), values.len(), "trace length mismatch");
        Self {
            grid,
            values,
            method: method.to_string(),
            term_count,
            state_count,
            wall_seconds,
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn final_value(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// Method tag, e.g. `gl-trap` or `expsum`.
    pub fn method(&self) -> &str {
        &self.method
    }

    /// Number of kernel terms / quadrature nodes the method carried.
    pub fn term_count(&self) -> usize {
        self.term_count
    }

    /// Peak number of persistent state scalars (independent of grid size for
    /// the fast methods).
    pub fn state_count(&self) -> usize {
        self.state_count
    }

    pub fn wall_seconds(&self) -> f64 {
        self.wall_seconds
    }
}
