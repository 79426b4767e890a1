//! Run-length coding of row-major id rasters.

use crate::error::{Error, Result};

/// A run of `length` consecutive pixels carrying `value`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Run {
    pub length: u32,
    pub value: u32,
}

pub fn encode(values: &[u32]) -> Vec<Run> {
    let mut runs: Vec<Run> = Vec::new();
    for &v in values {
        match runs.last_mut() {
            Some(run) if run.value == v && run.length < u32::MAX => run.length += 1,
            _ => runs.push(Run { length: 1, value: v }),
        }
    }
    runs
}

/// Expands runs, requiring them to cover exactly `total` values.
pub fn decode(runs: &[Run], total: usize) -> Result<Vec<u32>> {
    let mut out = Vec::with_capacity(total);
    for run in runs {
        if run.length == 0 {
            return Err(Error::format("RLE", "zero-length run"));
        }
        if out.len() + run.length as usize > total {
            return Err(Error::format("RLE", format!("runs overflow {total} pixels")));
        }
        out.extend(std::iter::repeat_n(run.value, run.length as usize));
    }
    if out.len() != total {
        return Err(Error::format(
            "RLE",
            format!("runs cover {} of {total} pixels", out.len()),
        ));
    }
    Ok(out)
}
