use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{DataError, TimeSeries};

/// Chronological 80/20 split; `train ++ test` is the original series.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSeries {
    pub train: TimeSeries,
    pub test: TimeSeries,
    pub split_index: usize,
}

impl SplitSeries {
    /// The full series (train followed by test).
    pub fn full_values(&self) -> Vec<f64> {
        let mut v = self.train.values().to_vec();
        v.extend_from_slice(self.test.values());
        v
    }
}

/// Splits at `floor(0.8 * len)`.
pub fn split_80_20(s: &TimeSeries) -> Result<SplitSeries, DataError> {
    if s.len() < 5 {
        return Err(DataError::TooShort {
            needed: 5,
            have: s.len(),
        });
    }
    // floor(0.8 n) computed exactly in integers.
    let split_index = s.len() * 4 / 5;
    Ok(SplitSeries {
        train: s.slice(0..split_index)?,
        test: s.slice(split_index..s.len())?,
        split_index,
    })
}

/// A (context, target) pair of index ranges into the windowed series.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub context: Range<usize>,
    pub target: Range<usize>,
}

/// Sliding windows of `context` values followed by `horizon` targets.
///
/// Only full windows are produced. Use a stride of `horizon` at inference
/// time and 1 when extracting training pairs.
pub fn windows(len: usize, context: usize, horizon: usize, stride: usize) -> Result<Vec<Window>, DataError> {
    let needed = context + horizon;
    if len < needed || context == 0 || horizon == 0 || stride == 0 {
        return Err(DataError::TooShort { needed, have: len });
    }
    Ok((0..=len - needed)
        .step_by(stride)
        .map(|s| Window {
            context: s..s + context,
            target: s + context..s + needed,
        })
        .collect())
}

/// Blocks of length `horizon` covering a test segment of `test_len` points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestTiling {
    pub blocks: Vec<Range<usize>>,
    /// Length of the truncated final block, when `test_len` is not a multiple of the horizon.
    pub ragged_tail: Option<usize>,
}

/// Tiles `0..test_len` into consecutive horizon-sized blocks with no overlap
/// or gap; the final block is truncated to the remaining length.
pub fn tile_blocks(test_len: usize, horizon: usize) -> TestTiling {
    assert!(horizon > 0, "horizon must be positive");
    let blocks: Vec<_> = (0..test_len)
        .step_by(horizon)
        .map(|s| s..(s + horizon).min(test_len))
        .collect();
    let rem = test_len % horizon;
    TestTiling {
        blocks,
        ragged_tail: (rem != 0).then_some(rem),
    }
}
