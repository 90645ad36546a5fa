use std::ops::Range;

use crate::error::{Error, Result};

/// Column layout of a flattened transition row: `[s | a | r | s' | d]`.
///
/// The terminal column is present only when `has_terminal` is set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TransitionSchema {
    state_dim: usize,
    action_dim: usize,
    has_terminal: bool,
}

impl TransitionSchema {
    pub fn new(state_dim: usize, action_dim: usize, has_terminal: bool) -> Result<Self> {
        if state_dim == 0 || action_dim == 0 {
            return Err(Error::invalid(format!(
                "schema dimensions must be positive (state_dim={state_dim}, action_dim={action_dim})"
            )));
        }
        Ok(Self {
            state_dim,
            action_dim,
            has_terminal,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn has_terminal(&self) -> bool {
        self.has_terminal
    }

    pub fn row_dim(&self) -> usize {
        2 * self.state_dim + self.action_dim + 1 + usize::from(self.has_terminal)
    }

    pub fn state_range(&self) -> Range<usize> {
        0..self.state_dim
    }

    pub fn action_range(&self) -> Range<usize> {
        self.state_dim..self.state_dim + self.action_dim
    }

    pub fn reward_index(&self) -> usize {
        self.state_dim + self.action_dim
    }

    pub fn next_state_range(&self) -> Range<usize> {
        let start = self.reward_index() + 1;
        start..start + self.state_dim
    }

    pub fn terminal_index(&self) -> Option<usize> {
        self.has_terminal.then(|| self.row_dim() - 1)
    }

    /// `true` for the terminal column, `false` everywhere else.
    pub fn terminal_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.row_dim()];
        if let Some(t) = self.terminal_index() {
            mask[t] = true;
        }
        mask
    }

    /// CSV header names: `s0.., a0.., r, ns0.., d`.
    pub fn column_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.row_dim());
        names.extend((0..self.state_dim).map(|i| format!("s{i}")));
        names.extend((0..self.action_dim).map(|i| format!("a{i}")));
        names.push("r".to_string());
        names.extend((0..self.state_dim).map(|i| format!("ns{i}")));
        if self.has_terminal {
            names.push("d".to_string());
        }
        names
    }

    /// Inverse of [`column_names`](Self::column_names).
    pub fn from_column_names<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        let count = |prefix: &str| {
            names
                .iter()
                .filter(|n| {
                    let n = n.as_ref();
                    n.strip_prefix(prefix)
                        .is_some_and(|rest| !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()))
                })
                .count()
        };
        let state_dim = count("s");
        let action_dim = count("a");
        let has_terminal = names.last().is_some_and(|n| n.as_ref() == "d");
        let schema = Self::new(state_dim, action_dim, has_terminal)?;
        let expected = schema.column_names();
        let matches = expected.len() == names.len()
            && expected.iter().zip(names).all(|(e, n)| e == n.as_ref());
        if !matches {
            return Err(Error::invalid(format!(
                "unexpected CSV header; expected `{}`",
                expected.join(",")
            )));
        }
        Ok(schema)
    }
}
