//! Software signal conditioning applied to raw sensor values.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FilterError {
    #[error("filter history is empty")]
    EmptyHistory,
    #[error("moving average window must be at least 1")]
    ZeroWindow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FilterKind {
    None,
    MovingAverage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSpec {
    pub kind: FilterKind,
    #[serde(default = "default_window")]
    pub window: usize,
}

fn default_window() -> usize {
    1
}

impl FilterSpec {
    pub const NONE: FilterSpec = FilterSpec { kind: FilterKind::None, window: 1 };

    pub fn moving_average(window: usize) -> Self {
        Self { kind: FilterKind::MovingAverage, window }
    }

    pub fn validate(&self) -> Result<(), FilterError> {
        if self.kind == FilterKind::MovingAverage && self.window == 0 {
            return Err(FilterError::ZeroWindow);
        }
        Ok(())
    }

    /// Number of past raw values the filter output depends on.
    pub fn span(&self) -> usize {
        match self.kind {
            FilterKind::None => 1,
            FilterKind::MovingAverage => self.window.max(1),
        }
    }
}

/// Filters the most recent sample of `history` (oldest first).
pub fn filter_apply(spec: &FilterSpec, history: &[f64]) -> Result<f64, FilterError> {
    let last = *history.last().ok_or(FilterError::EmptyHistory)?;
    match spec.kind {
        FilterKind::None => Ok(last),
        FilterKind::MovingAverage => {
            spec.validate()?;
            let n = spec.window.min(history.len());
            let tail = &history[history.len() - n..];
            Ok(tail.iter().sum::<f64>() / n as f64)
        }
    }
}

/// Streaming form of [`filter_apply`] keeping only the values it needs.
#[derive(Debug, Clone)]
pub struct FilterState {
    spec: FilterSpec,
    history: VecDeque<f64>,
}

impl FilterState {
    pub fn new(spec: FilterSpec) -> Result<Self, FilterError> {
        spec.validate()?;
        Ok(Self { spec, history: VecDeque::with_capacity(spec.span()) })
    }

    pub fn push(&mut self, raw: f64) -> f64 {
        if self.history.len() == self.spec.span() {
            self.history.pop_front();
        }
        self.history.push_back(raw);
        filter_apply(&self.spec, self.history.make_contiguous()).expect("history holds at least one value")
    }
}
