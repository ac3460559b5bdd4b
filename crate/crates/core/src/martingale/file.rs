//! Kernel specification files.
//!
//! A kernel file is a TOML document describing a stationary finite-state
//! kernel:
//!
//! ```toml
//! dim = 1
//! horizon = 8
//! initial = "full"   # optional, defaults to the first state
//! centered = true    # optional, defaults to false
//!
//! [[state]]
//! name = "full"
//!
//! [[state.outcome]]
//! prob = "0.5"       # decimal string
//! matrix = [1.0]     # dim*dim entries, row-major
//! next = "full"      # optional, defaults to the current state
//!
//! [[state.outcome]]
//! prob = "0.5"
//! matrix = [-1.0]
//! next = "half"
//!
//! [[state]]
//! name = "half"
//! # ...
//! ```

use std::collections::HashMap;
use std::fmt;
use std::ops::Range;

use serde::Deserialize;
use toml::Spanned;

use crate::symmat::SymMatrix;

use super::kernel::{
    kernel_state_dependent_walk, FiniteKernel, Outcome, StateRow, TransitionTable,
};

/// A parse or validation failure with a 1-based source position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KernelFileError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for KernelFileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "line {}, column {}: {}",
            self.line, self.column, self.message
        )
    }
}

impl std::error::Error for KernelFileError {}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKernel {
    dim: Spanned<usize>,
    horizon: usize,
    initial: Option<Spanned<String>>,
    #[serde(default)]
    centered: bool,
    #[serde(default)]
    state: Vec<RawState>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawState {
    name: Spanned<String>,
    #[serde(default)]
    outcome: Vec<RawOutcome>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutcome {
    prob: Spanned<String>,
    matrix: Spanned<Vec<f64>>,
    next: Option<Spanned<String>>,
}

struct Locator<'a> {
    text: &'a str,
}

impl Locator<'_> {
    fn error(&self, span: Option<Range<usize>>, message: impl Into<String>) -> KernelFileError {
        let offset = span.map(|s| s.start).unwrap_or(0).min(self.text.len());
        let before = &self.text[..offset];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        KernelFileError {
            line,
            column,
            message: message.into(),
        }
    }
}

/// Parses and validates a kernel file.
pub fn parse_kernel_file(text: &str) -> Result<FiniteKernel, KernelFileError> {
    let loc = Locator { text };
    let raw: RawKernel =
        toml::from_str(text).map_err(|e| loc.error(e.span(), e.message().to_string()))?;

    let dim = *raw.dim.get_ref();
    if dim == 0 {
        return Err(loc.error(Some(raw.dim.span()), "dim must be >= 1"));
    }
    if raw.state.is_empty() {
        return Err(loc.error(None, "kernel file declares no [[state]] tables"));
    }

    let mut index = HashMap::new();
    for (i, s) in raw.state.iter().enumerate() {
        if index.insert(s.name.get_ref().clone(), i).is_some() {
            return Err(loc.error(
                Some(s.name.span()),
                format!("duplicate state name '{}'", s.name.get_ref()),
            ));
        }
    }
    let lookup = |name: &Spanned<String>| -> Result<usize, KernelFileError> {
        index.get(name.get_ref()).copied().ok_or_else(|| {
            loc.error(
                Some(name.span()),
                format!("unknown state '{}'", name.get_ref()),
            )
        })
    };

    let initial_state = match &raw.initial {
        Some(name) => lookup(name)?,
        None => 0,
    };

    let mut states = Vec::with_capacity(raw.state.len());
    for (si, s) in raw.state.iter().enumerate() {
        if s.outcome.is_empty() {
            return Err(loc.error(
                Some(s.name.span()),
                format!("state '{}' has no outcomes", s.name.get_ref()),
            ));
        }
        let mut outcomes = Vec::with_capacity(s.outcome.len());
        let mut sum = 0.0;
        for o in &s.outcome {
            let prob: f64 = o.prob.get_ref().trim().parse().map_err(|_| {
                loc.error(
                    Some(o.prob.span()),
                    format!("probability '{}' is not a decimal number", o.prob.get_ref()),
                )
            })?;
            if !(prob.is_finite() && prob > 0.0 && prob <= 1.0) {
                return Err(loc.error(
                    Some(o.prob.span()),
                    format!("probability {prob} is not in (0, 1]"),
                ));
            }
            sum += prob;
            let entries = o.matrix.get_ref();
            if entries.len() != dim * dim {
                return Err(loc.error(
                    Some(o.matrix.span()),
                    format!(
                        "matrix has {} entries, expected {} for dim = {dim}",
                        entries.len(),
                        dim * dim
                    ),
                ));
            }
            let value = SymMatrix::from_row_major(dim, entries.clone())
                .map_err(|e| loc.error(Some(o.matrix.span()), e.to_string()))?;
            let next_state = match &o.next {
                Some(name) => lookup(name)?,
                None => si,
            };
            outcomes.push(Outcome::new(prob, value, next_state));
        }
        if (sum - 1.0).abs() > super::PROBABILITY_SUM_TOLERANCE {
            return Err(loc.error(
                Some(s.name.span()),
                format!(
                    "probabilities of state '{}' sum to {sum}, not 1",
                    s.name.get_ref()
                ),
            ));
        }
        states.push(StateRow {
            label: s.name.get_ref().clone(),
            outcomes,
        });
    }

    let kernel = kernel_state_dependent_walk(TransitionTable {
        dim,
        horizon: raw.horizon,
        initial_state,
        states,
        centered: raw.centered,
    })
    .map_err(|e| {
        let span = match &e {
            super::KernelError::NotCentered { state, .. } => {
                raw.state.get(*state).map(|s| s.name.span())
            }
            _ => None,
        };
        loc.error(span, e.to_string())
    })?;
    let description = format!(
        "kernel file: d={dim}, {} states, K={}",
        kernel.num_states(),
        kernel.horizon()
    );
    Ok(kernel.with_description(description))
}
