use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// De-multiplexed virtual-node states, one column per retained input step.
#[derive(Debug, Clone, PartialEq)]
pub struct StateMatrix {
    pub values: DMatrix<f64>,
    /// Number of leading input steps dropped before the first column.
    pub washout_discarded: usize,
}

impl StateMatrix {
    pub fn new(values: DMatrix<f64>, washout_discarded: usize) -> Result<Self> {
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::contract(format!(
                "state entry {pos} (column-major) is not finite"
            )));
        }
        Ok(Self {
            values,
            washout_discarded,
        })
    }

    pub fn from_values(values: DMatrix<f64>) -> Result<Self> {
        Self::new(values, 0)
    }

    pub fn nodes(&self) -> usize {
        self.values.nrows()
    }

    pub fn steps(&self) -> usize {
        self.values.ncols()
    }

    /// Column range `[start, end)` as a new matrix; washout bookkeeping follows the offset.
    pub fn columns(&self, start: usize, end: usize) -> StateMatrix {
        StateMatrix {
            values: self.values.columns(start, end - start).into_owned(),
            washout_discarded: self.washout_discarded + start,
        }
    }

    /// Drop the first `count` columns.
    pub fn discard(&self, count: usize) -> Result<StateMatrix> {
        if count >= self.steps() {
            return Err(Error::Length {
                needed: count + 1,
                available: self.steps(),
            });
        }
        Ok(self.columns(count, self.steps()))
    }
}
