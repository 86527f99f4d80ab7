//! In-process data-parallel executor.
//!
//! Rows are split into contiguous ranges, each range is folded into an
//! accumulator on a worker pool, and the partial results are merged in
//! partition order. Aggregators work on exact integer statistics so the
//! result is the same for every partition count.

use std::ops::Range;

use rayon::prelude::*;

use crate::dataset::FlowTable;
use crate::error::{Error, Result};

/// Partition count mirroring an eight-core cluster.
pub const DEFAULT_PARTITIONS: usize = 8;

/// Contiguous, in-order row ranges covering a table.
#[derive(Clone, Debug)]
pub struct PartitionedTable<'a> {
    table: &'a FlowTable,
    ranges: Vec<Range<usize>>,
}

impl<'a> PartitionedTable<'a> {
    pub fn table(&self) -> &'a FlowTable {
        self.table
    }

    pub fn ranges(&self) -> &[Range<usize>] {
        &self.ranges
    }

    pub fn partition_count(&self) -> usize {
        self.ranges.len()
    }

    pub fn partition(&self, i: usize) -> FlowTable {
        let rows: Vec<usize> = self.ranges[i].clone().collect();
        self.table.take(&rows)
    }
}

/// `n` contiguous ranges over `rows` whose sizes differ by at most one,
/// larger ranges first. Fewer ranges when `n > rows`.
pub fn row_ranges(rows: usize, n: usize) -> Result<Vec<Range<usize>>> {
    if n == 0 {
        return Err(Error::Config("partition count must be at least 1".into()));
    }
    let parts = n.min(rows.max(1));
    let base = rows / parts;
    let extra = rows % parts;
    let mut start = 0;
    Ok((0..parts)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect())
}

pub fn partition(table: &FlowTable, n: usize) -> Result<PartitionedTable<'_>> {
    Ok(PartitionedTable {
        table,
        ranges: row_ranges(table.row_count(), n)?,
    })
}

/// A commutative monoid over per-row statistics.
///
/// Implementations must satisfy `merge(a, zero) == a`, commutativity and
/// associativity of `merge`.
pub trait Aggregator: Sync {
    type Acc: Send;

    fn zero(&self) -> Self::Acc;
    fn accumulate(&self, acc: &mut Self::Acc, row: usize);
    fn merge(&self, a: Self::Acc, b: Self::Acc) -> Self::Acc;
}

/// Runs aggregations over row ranges on a fixed-size worker pool.
pub struct Executor {
    partitions: usize,
    pool: Option<rayon::ThreadPool>,
}

impl std::fmt::Debug for Executor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Executor")
            .field("partitions", &self.partitions)
            .field("workers", &self.workers())
            .finish()
    }
}

impl Default for Executor {
    fn default() -> Self {
        Executor::new(DEFAULT_PARTITIONS, 0).expect("default partition count is valid")
    }
}

impl Executor {
    /// `workers == 0` uses the global pool (one thread per core).
    pub fn new(partitions: usize, workers: usize) -> Result<Self> {
        if partitions == 0 {
            return Err(Error::Config("partition count must be at least 1".into()));
        }
        let pool = if workers == 0 {
            None
        } else {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .build()
                    .map_err(|e| Error::Config(format!("worker pool: {e}")))?,
            )
        };
        Ok(Executor { partitions, pool })
    }

    pub fn partitions(&self) -> usize {
        self.partitions
    }

    pub fn workers(&self) -> usize {
        match &self.pool {
            Some(p) => p.current_num_threads(),
            None => rayon::current_num_threads(),
        }
    }

    /// Folds rows `0..rows` with `agg`. Partials are merged left to right
    /// by partition index.
    pub fn aggregate_rows<A: Aggregator>(&self, rows: usize, agg: &A) -> A::Acc {
        let ranges = row_ranges(rows, self.partitions).expect("partitions >= 1");
        let run = || {
            ranges
                .par_iter()
                .map(|r| {
                    let mut acc = agg.zero();
                    for row in r.clone() {
                        agg.accumulate(&mut acc, row);
                    }
                    acc
                })
                .collect::<Vec<_>>()
        };
        let partials = match &self.pool {
            Some(pool) => pool.install(run),
            None => run(),
        };
        partials
            .into_iter()
            .fold(agg.zero(), |acc, p| agg.merge(acc, p))
    }

    pub fn aggregate<A: Aggregator>(&self, pt: &PartitionedTable<'_>, agg: &A) -> A::Acc {
        let run = || {
            pt.ranges
                .par_iter()
                .map(|r| {
                    let mut acc = agg.zero();
                    for row in r.clone() {
                        agg.accumulate(&mut acc, row);
                    }
                    acc
                })
                .collect::<Vec<_>>()
        };
        let partials = match &self.pool {
            Some(pool) => pool.install(run),
            None => run(),
        };
        partials
            .into_iter()
            .fold(agg.zero(), |acc, p| agg.merge(acc, p))
    }

    /// Runs `f` inside this executor's worker pool.
    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        match &self.pool {
            Some(pool) => pool.install(f),
            None => f(),
        }
    }
}

/// Counts rows.
pub struct RowCount;

impl Aggregator for RowCount {
    type Acc = u64;

    fn zero(&self) -> u64 {
        0
    }

    fn accumulate(&self, acc: &mut u64, _row: usize) {
        *acc += 1;
    }

    fn merge(&self, a: u64, b: u64) -> u64 {
        a + b
    }
}

/// Element-wise sum of integer vectors; the building block of histogram
/// aggregation.
pub fn merge_counts(mut a: Vec<u64>, b: Vec<u64>) -> Vec<u64> {
    if a.len() < b.len() {
        return merge_counts(b, a);
    }
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
    a
}

/// Per-(feature, bin, class) histogram over pre-binned features.
pub struct BinClassHistogram<'a> {
    /// Row-major `rows x features` bin indices.
    pub bins: &'a [Vec<u16>],
    pub targets: &'a [u32],
    pub num_bins: usize,
    pub num_classes: usize,
}

impl BinClassHistogram<'_> {
    pub fn index(&self, feature: usize, bin: usize, class: usize) -> usize {
        (feature * self.num_bins + bin) * self.num_classes + class
    }
}

impl Aggregator for BinClassHistogram<'_> {
    type Acc = Vec<u64>;

    fn zero(&self) -> Vec<u64> {
        let features = self.bins.first().map_or(0, Vec::len);
        vec![0; features * self.num_bins * self.num_classes]
    }

    fn accumulate(&self, acc: &mut Vec<u64>, row: usize) {
        let class = self.targets[row] as usize;
        for (f, &b) in self.bins[row].iter().enumerate() {
            acc[self.index(f, b as usize, class)] += 1;
        }
    }

    fn merge(&self, a: Vec<u64>, b: Vec<u64>) -> Vec<u64> {
        merge_counts(a, b)
    }
}
