//! Chi-square feature ranking and top-k selection.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dataset::{ColumnData, FlowTable};
use crate::error::{Error, Result};

pub const DEFAULT_NUM_BINS: usize = 32;

/// Observed counts of (feature bin, class) pairs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContingencyTable {
    pub observed: Vec<Vec<u64>>,
    pub row_totals: Vec<u64>,
    pub col_totals: Vec<u64>,
    pub total: u64,
}

impl ContingencyTable {
    pub fn from_counts(observed: Vec<Vec<u64>>) -> Self {
        let cols = observed.iter().map(Vec::len).max().unwrap_or(0);
        let row_totals: Vec<u64> = observed.iter().map(|r| r.iter().sum()).collect();
        let col_totals: Vec<u64> = (0..cols)
            .map(|j| observed.iter().map(|r| r.get(j).copied().unwrap_or(0)).sum())
            .collect();
        let total = row_totals.iter().sum();
        ContingencyTable {
            observed,
            row_totals,
            col_totals,
            total,
        }
    }

    pub fn from_columns(feature: &[u32], target: &[u32]) -> Result<Self> {
        if feature.len() != target.len() {
            return Err(Error::Data(format!(
                "feature has {} rows but target has {}",
                feature.len(),
                target.len()
            )));
        }
        let rows = feature.iter().max().map_or(0, |&m| m as usize + 1);
        let cols = target.iter().max().map_or(0, |&m| m as usize + 1);
        let mut observed = vec![vec![0u64; cols]; rows];
        for (&b, &c) in feature.iter().zip(target) {
            observed[b as usize][c as usize] += 1;
        }
        Ok(ContingencyTable::from_counts(observed))
    }

    /// Pearson statistic `sum (O - E)^2 / E` with `E = row * col / N`.
    /// Cells whose expected count is zero contribute nothing.
    pub fn statistic(&self) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        let n = self.total as f64;
        let mut stat = 0.0;
        for (i, row) in self.observed.iter().enumerate() {
            for (j, &o) in row.iter().enumerate() {
                let e = self.row_totals[i] as f64 * self.col_totals[j] as f64 / n;
                if e > 0.0 {
                    let d = o as f64 - e;
                    stat += d * d / e;
                }
            }
        }
        stat
    }

    /// `(r - 1)(c - 1)` over non-empty rows and columns.
    pub fn degrees_of_freedom(&self) -> usize {
        let r = self.row_totals.iter().filter(|&&t| t > 0).count();
        let c = self.col_totals.iter().filter(|&&t| t > 0).count();
        r.saturating_sub(1) * c.saturating_sub(1)
    }
}

/// Equal-width binning of values in [0,1]; 1.0 lands in the last bin.
pub fn bin_continuous(values: &[f64], num_bins: usize) -> Result<Vec<u32>> {
    if num_bins < 2 {
        return Err(Error::Config(format!("need at least 2 bins, got {num_bins}")));
    }
    values
        .iter()
        .map(|&v| {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Domain(format!("value {v} outside [0,1]; normalize first")));
            }
            Ok(((v * num_bins as f64).floor() as usize).min(num_bins - 1) as u32)
        })
        .collect()
}

/// Chi-square statistic and degrees of freedom of a binned feature against
/// a class column.
pub fn chi_square_statistic(feature: &[u32], target: &[u32]) -> Result<(f64, usize)> {
    if feature.is_empty() && target.is_empty() {
        return Err(Error::Data("chi-square needs at least one row".into()));
    }
    let table = ContingencyTable::from_columns(feature, target)?;
    Ok((table.statistic(), table.degrees_of_freedom()))
}

/// Number of features to keep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureCount {
    Top(usize),
    All,
}

impl FeatureCount {
    /// The three settings of the experiment matrix: all, top 10, top 5.
    pub const MATRIX: [FeatureCount; 3] = [FeatureCount::All, FeatureCount::Top(10), FeatureCount::Top(5)];
}

impl fmt::Display for FeatureCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureCount::Top(k) => write!(f, "{k}"),
            FeatureCount::All => f.write_str("all"),
        }
    }
}

impl std::str::FromStr for FeatureCount {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("all") {
            return Ok(FeatureCount::All);
        }
        match s.parse::<usize>() {
            Ok(k) if k > 0 => Ok(FeatureCount::Top(k)),
            _ => Err(Error::Config(format!("feature count must be a positive integer or \"all\", got {s:?}"))),
        }
    }
}

impl Serialize for FeatureCount {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            FeatureCount::Top(k) => s.serialize_u64(*k as u64),
            FeatureCount::All => s.serialize_str("all"),
        }
    }
}

impl<'de> Deserialize<'de> for FeatureCount {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(usize),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(0) => Err(serde::de::Error::custom("feature count must be positive")),
            Repr::Num(k) => Ok(FeatureCount::Top(k)),
            Repr::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSqEntry {
    pub feature: String,
    pub chi2: f64,
    pub dof: usize,
}

/// Features ordered by descending statistic, ties by name ascending.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChiSqRanking {
    pub entries: Vec<ChiSqEntry>,
}

impl ChiSqRanking {
    pub fn new(mut entries: Vec<ChiSqEntry>) -> Self {
        entries.sort_by(|a, b| {
            b.chi2
                .total_cmp(&a.chi2)
                .then_with(|| a.feature.cmp(&b.feature))
        });
        ChiSqRanking { entries }
    }

    pub fn top(&self, k: FeatureCount) -> Vec<String> {
        let n = match k {
            FeatureCount::All => self.entries.len(),
            FeatureCount::Top(k) => k.min(self.entries.len()),
        };
        self.entries[..n].iter().map(|e| e.feature.clone()).collect()
    }
}

/// Ranks every candidate feature of `table` (values in [0,1]) against the
/// integer class column `target_col` and returns the ranking with the first
/// `k` names.
pub fn select_top_k(
    table: &FlowTable,
    target_col: &str,
    k: FeatureCount,
    num_bins: usize,
) -> Result<(ChiSqRanking, Vec<String>)> {
    let target = match &table.require(target_col)?.data {
        ColumnData::Codes(c) => c.as_slice(),
        _ => return Err(Error::Type(format!("{target_col:?} is not integer-encoded"))),
    };
    let candidates = table.feature_names();
    match k {
        FeatureCount::Top(0) => return Err(Error::Config("k must be positive".into())),
        FeatureCount::Top(k) if k > candidates.len() => {
            return Err(Error::Config(format!(
                "k={k} exceeds the {} candidate features",
                candidates.len()
            )))
        }
        _ => {}
    }
    let entries = candidates
        .par_iter()
        .map(|name| {
            let values = match &table.require(name)?.data {
                ColumnData::Numeric(v) => v,
                _ => return Err(Error::Type(format!("feature {name:?} is not numeric"))),
            };
            let binned = bin_continuous(values, num_bins)
                .map_err(|e| Error::Domain(format!("feature {name:?}: {e}")))?;
            let (chi2, dof) = if binned.is_empty() {
                (0.0, 0)
            } else {
                chi_square_statistic(&binned, target)?
            };
            Ok(ChiSqEntry {
                feature: name.clone(),
                chi2,
                dof,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let ranking = ChiSqRanking::new(entries);
    let selected = ranking.top(k);
    Ok((ranking, selected))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binning_boundaries() {
        assert_eq!(bin_continuous(&[0.0, 1.0, 0.55], 10).unwrap(), vec![0, 9, 5]);
        assert!(matches!(bin_continuous(&[1.5], 10), Err(Error::Domain(_))));
        assert!(matches!(bin_continuous(&[f64::NAN], 10), Err(Error::Domain(_))));
        assert!(bin_continuous(&[0.5], 1).is_err());
    }

    #[test]
    fn constant_feature_scores_zero() {
        let (s, dof) = chi_square_statistic(&[3, 3, 3, 3], &[0, 1, 0, 1]).unwrap();
        assert_eq!(s, 0.0);
        assert_eq!(dof, 0);
    }

    #[test]
    fn perfect_association_equals_n() {
        let f = [0, 0, 0, 0, 0, 1, 1, 1, 1, 1];
        let (s, dof) = chi_square_statistic(&f, &f).unwrap();
        assert!((s - 10.0).abs() < 1e-12);
        assert_eq!(dof, 1);
    }

    #[test]
    fn known_two_by_two() {
        let t = ContingencyTable::from_counts(vec![vec![10, 20], vec![30, 40]]);
        let expected = 4.0 / 12.0 + 4.0 / 18.0 + 4.0 / 28.0 + 4.0 / 42.0;
        assert!((t.statistic() - expected).abs() < 1e-12);
        assert!((t.statistic() - 0.793_650_793_650_793_6).abs() < 1e-6);
    }

    #[test]
    fn length_mismatch() {
        assert!(chi_square_statistic(&[0, 1], &[0]).is_err());
        assert!(chi_square_statistic(&[], &[]).is_err());
    }

    #[test]
    fn feature_count_parsing() {
        assert_eq!("all".parse::<FeatureCount>().unwrap(), FeatureCount::All);
        assert_eq!("10".parse::<FeatureCount>().unwrap(), FeatureCount::Top(10));
        assert!("0".parse::<FeatureCount>().is_err());
        let json = serde_json::to_string(&FeatureCount::MATRIX).unwrap();
        assert_eq!(json, r#"["all",10,5]"#);
        let back: Vec<FeatureCount> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, FeatureCount::MATRIX);
    }
}
