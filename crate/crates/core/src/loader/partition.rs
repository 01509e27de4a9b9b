use std::ops::Range;

use super::LoadError;

/// Contiguous module ranges for the lock-free strategy's loading workers.
///
/// One of the `workers` threads reads hardware during setup and then
/// retires, so `workers - 1` threads share the catalog in blocks of
/// `ceil(n / (workers - 1))`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionPlan {
    pub step: usize,
    pub ranges: Vec<Range<usize>>,
}

impl PartitionPlan {
    pub fn loading_workers(&self) -> usize {
        self.ranges.len()
    }
}

pub fn plan_partitions(n_modules: usize, workers: usize) -> Result<PartitionPlan, LoadError> {
    if workers < 2 {
        return Err(LoadError::Config(format!(
            "partitioned loading needs at least 2 workers, got {workers}"
        )));
    }
    let loaders = workers - 1;
    let step = n_modules.div_ceil(loaders);
    let ranges = (0..loaders)
        .map(|t| (t * step).min(n_modules)..((t + 1) * step).min(n_modules))
        .collect();
    Ok(PartitionPlan { step, ranges })
}
