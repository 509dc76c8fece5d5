//! Fixed-capacity FIFO of `(η, u)` training pairs.

use std::collections::VecDeque;

use thiserror::Error;

use crate::gp::Dataset;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WindowError {
    #[error("pair of dimension {got} pushed into a window of dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("window capacity must be positive")]
    ZeroCapacity,
}

/// Sliding window holding the most recent `capacity` pairs in insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowBuffer {
    capacity: usize,
    dim: usize,
    pairs: VecDeque<(Vec<f64>, f64)>,
    total_pushed: usize,
}

impl WindowBuffer {
    pub fn new(capacity: usize, dim: usize) -> Result<Self, WindowError> {
        if capacity == 0 {
            return Err(WindowError::ZeroCapacity);
        }
        Ok(Self {
            capacity,
            dim,
            pairs: VecDeque::with_capacity(capacity + 1),
            total_pushed: 0,
        })
    }

    /// Appends a pair, evicting the oldest once the window is full.
    pub fn push(&mut self, eta: &[f64], u: f64) -> Result<(), WindowError> {
        if eta.len() != self.dim {
            return Err(WindowError::DimensionMismatch {
                expected: self.dim,
                got: eta.len(),
            });
        }
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.pairs.push_back((eta.to_vec(), u));
        self.total_pushed += 1;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.pairs.len() == self.capacity
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn total_pushed(&self) -> usize {
        self.total_pushed
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.pairs.iter().map(|(x, u)| (x.as_slice(), *u))
    }

    /// Snapshot of the window contents, oldest first.
    pub fn as_dataset(&self) -> Dataset {
        let (inputs, targets) = self.pairs.iter().cloned().unzip();
        Dataset::new(inputs, targets).expect("window pairs share one dimension")
    }
}
