//! Seeded synthetic flow corpora with BoT-IoT-shaped labels.
//!
//! Every class draws each feature from its own probability vector over
//! value bins (numeric) or levels (categorical). Missing cells and exact
//! duplicate rows are injected in requested amounts, so preprocessing
//! reports can be checked against the generating spec.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Column, ColumnData, ColumnKind, ColumnSchema, FlowTable, Schema};
use crate::error::{Error, Result};
use crate::ingest::write_csv;
use crate::preprocess::rng;

/// Missing-record counts per subcategory class reported for BoT-IoT.
pub const BOT_IOT_MISSING_ROWS: [(&str, u64); 11] = [
    ("DDoS_TCP", 499),
    ("DoS_HTTP", 26),
    ("DoS_UDP", 522),
    ("Theft_Data_Exfiltration", 4),
    ("DDoS_HTTP", 30),
    ("Theft_Keylogging", 5),
    ("DDoS_UDP", 420),
    ("Reconnaissance_OS_Fingerprint", 128),
    ("Reconnaissance_Service_Scan", 320),
    ("Normal", 471),
    ("DoS_TCP", 378),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureGen {
    /// Values `scale * (bin + u) / num_bins` with `u` uniform in [0,1).
    Numeric { scale: f64 },
    Categorical { levels: Vec<String> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticFeature {
    pub name: String,
    #[serde(flatten)]
    pub generator: FeatureGen,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticClass {
    pub category: String,
    pub subcategory: String,
    pub attack: bool,
    /// Complete rows.
    pub rows: u64,
    /// Extra rows generated with one numeric cell left empty.
    #[serde(default)]
    pub missing: u64,
    /// One probability vector per feature.
    pub distributions: Vec<Vec<f64>>,
}

impl SyntheticClass {
    pub fn class_name(&self) -> String {
        crate::dataset::subcategory_class(&self.category, &self.subcategory)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub num_bins: usize,
    pub features: Vec<SyntheticFeature>,
    pub classes: Vec<SyntheticClass>,
    /// Exact copies of complete rows appended before shuffling.
    #[serde(default)]
    pub duplicates: u64,
}

const NUMERIC_FEATURES: [(&str, f64); 14] = [
    ("dur", 100.0),
    ("mean", 5.0),
    ("stddev", 2.5),
    ("sum", 500.0),
    ("min", 5.0),
    ("max", 5.0),
    ("pkts", 1_000.0),
    ("bytes", 100_000.0),
    ("spkts", 800.0),
    ("dpkts", 200.0),
    ("sbytes", 80_000.0),
    ("dbytes", 20_000.0),
    ("rate", 10_000.0),
    ("srate", 10_000.0),
];

const PROTO_LEVELS: [&str; 5] = ["tcp", "udp", "icmp", "arp", "ipv6-icmp"];
const STATE_LEVELS: [&str; 6] = ["REQ", "RST", "CON", "INT", "FIN", "URP"];

/// (category, subcategory, clean rows) of the partial corpus: 29,507 attack
/// and 2,761 normal rows.
const PARTIAL_CLASSES: [(&str, &str, u64); 11] = [
    ("DDoS", "TCP", 5_500),
    ("DDoS", "UDP", 6_000),
    ("DDoS", "HTTP", 490),
    ("DoS", "TCP", 5_500),
    ("DoS", "UDP", 6_000),
    ("DoS", "HTTP", 490),
    ("Reconnaissance", "OS_Fingerprint", 1_800),
    ("Reconnaissance", "Service_Scan", 3_600),
    ("Theft", "Data_Exfiltration", 36),
    ("Theft", "Keylogging", 91),
    ("Normal", "Normal", 2_761),
];

fn peaked(bins: usize, center: f64, width: f64) -> Vec<f64> {
    let w: Vec<f64> = (0..bins)
        .map(|b| {
            let z = (b as f64 - center) / width;
            (-0.5 * z * z).exp()
        })
        .collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

fn normalized(weights: Vec<f64>) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|x| x / total).collect()
}

impl SyntheticSpec {
    /// A BoT-IoT-shaped corpus: 11 subcategory classes, 14 numeric and two
    /// categorical features, with the missing-row counts reported for BoT-IoT.
    ///
    /// Normal traffic sits in the middle bins of every numeric feature while
    /// each attack class sits at a class-specific pattern of low and high
    /// extremes. Attack traffic as a whole therefore has the same average
    /// composition as normal traffic, which only threshold-based models can
    /// separate.
    pub fn bot_iot_like(seed: u64) -> Self {
        let num_bins = 20;
        let mut shape_rng = rng(seed ^ 0x5EED_5EED);
        let mut features: Vec<SyntheticFeature> = NUMERIC_FEATURES
            .iter()
            .map(|(n, s)| SyntheticFeature {
                name: n.to_string(),
                generator: FeatureGen::Numeric { scale: *s },
            })
            .collect();
        features.push(SyntheticFeature {
            name: "proto".into(),
            generator: FeatureGen::Categorical {
                levels: PROTO_LEVELS.iter().map(|s| s.to_string()).collect(),
            },
        });
        features.push(SyntheticFeature {
            name: "state".into(),
            generator: FeatureGen::Categorical {
                levels: STATE_LEVELS.iter().map(|s| s.to_string()).collect(),
            },
        });
        let classes = PARTIAL_CLASSES
            .iter()
            .map(|&(category, subcategory, rows)| {
                let attack = category != "Normal";
                let mut distributions: Vec<Vec<f64>> = NUMERIC_FEATURES
                    .iter()
                    .map(|_| {
                        if attack {
                            let center = if shape_rng.gen_bool(0.5) { 2.0 } else { 17.0 };
                            peaked(num_bins, center, 1.2)
                        } else {
                            peaked(num_bins, 9.5, 1.2)
                        }
                    })
                    .collect();
                let proto = match (category, subcategory) {
                    (_, "UDP") => vec![0.05, 0.9, 0.03, 0.01, 0.01],
                    (_, "TCP") | (_, "HTTP") | ("Theft", _) => vec![0.9, 0.05, 0.03, 0.01, 0.01],
                    ("Reconnaissance", _) => vec![0.45, 0.25, 0.25, 0.03, 0.02],
                    _ => vec![0.3, 0.35, 0.1, 0.2, 0.05],
                };
                distributions.push(proto);
                distributions.push(normalized(
                    (0..STATE_LEVELS.len()).map(|_| shape_rng.gen_range(0.1..1.0)).collect(),
                ));
                let missing = BOT_IOT_MISSING_ROWS
                    .iter()
                    .find(|(c, _)| *c == crate::dataset::subcategory_class(category, subcategory))
                    .map_or(0, |(_, m)| *m);
                SyntheticClass {
                    category: category.into(),
                    subcategory: subcategory.into(),
                    attack,
                    rows,
                    missing,
                    distributions,
                }
            })
            .collect();
        SyntheticSpec {
            seed,
            num_bins,
            features,
            classes,
            duplicates: 0,
        }
    }

    /// Same class shapes with every class size multiplied by `factor`
    /// (rounded, at least one row for non-empty classes). Missing counts are
    /// kept.
    pub fn scaled(mut self, factor: f64) -> Self {
        for c in &mut self.classes {
            if c.rows > 0 {
                c.rows = ((c.rows as f64 * factor).round() as u64).max(1);
            }
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_bins == 0 {
            return Err(Error::Config("num_bins must be positive".into()));
        }
        let has_numeric = self
            .features
            .iter()
            .any(|f| matches!(f.generator, FeatureGen::Numeric { .. }));
        for c in &self.classes {
            if c.distributions.len() != self.features.len() {
                return Err(Error::Config(format!(
                    "class {} has {} distributions for {} features",
                    c.class_name(),
                    c.distributions.len(),
                    self.features.len()
                )));
            }
            if c.missing > 0 && !has_numeric {
                return Err(Error::Config("missing injection needs a numeric feature".into()));
            }
            for (f, p) in self.features.iter().zip(&c.distributions) {
                let expected = match &f.generator {
                    FeatureGen::Numeric { .. } => self.num_bins,
                    FeatureGen::Categorical { levels } => levels.len(),
                };
                if p.len() != expected {
                    return Err(Error::Config(format!(
                        "class {} feature {}: {} probabilities, expected {expected}",
                        c.class_name(),
                        f.name,
                        p.len()
                    )));
                }
                let sum: f64 = p.iter().sum();
                if p.iter().any(|&x| x.is_nan() || x < 0.0) || (sum - 1.0).abs() > 1e-9 {
                    return Err(Error::Config(format!(
                        "class {} feature {}: probabilities must be non-negative and sum to 1 (sum {sum})",
                        c.class_name(),
                        f.name
                    )));
                }
            }
        }
        Ok(())
    }

    /// Raw-data schema of the generated files.
    pub fn schema(&self) -> Schema {
        let mut cols = vec![ColumnSchema {
            nullable: true,
            ..ColumnSchema::new("pkSeqID", ColumnKind::Excluded)
        }];
        for f in &self.features {
            let kind = match f.generator {
                FeatureGen::Numeric { .. } => ColumnKind::Numeric,
                FeatureGen::Categorical { .. } => ColumnKind::Categorical,
            };
            cols.push(ColumnSchema::new(f.name.clone(), kind));
        }
        for name in ["saddr", "daddr"] {
            cols.push(ColumnSchema {
                nullable: true,
                ..ColumnSchema::new(name, ColumnKind::Excluded)
            });
        }
        cols.push(ColumnSchema::new("attack", ColumnKind::LabelBinary));
        cols.push(ColumnSchema::new("category", ColumnKind::LabelCategory));
        cols.push(ColumnSchema::new("subcategory", ColumnKind::LabelSubcategory));
        Schema::new(cols).expect("generated schema is valid")
    }

    pub fn total_rows(&self) -> u64 {
        self.classes.iter().map(|c| c.rows + c.missing).sum::<u64>() + self.duplicates
    }
}

#[derive(Clone)]
enum Cell {
    Num(f64),
    Level(usize),
}

struct Row {
    class: usize,
    cells: Vec<Cell>,
    saddr: u8,
    daddr: u8,
}

fn draw(p: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &w) in p.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    // rounding left u above the cumulative sum; take the last non-zero entry
    p.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Generates the corpus described by `spec`.
pub fn generate(spec: &SyntheticSpec) -> Result<FlowTable> {
    spec.validate()?;
    let mut rng = rng(spec.seed);
    let numeric: Vec<usize> = spec
        .features
        .iter()
        .enumerate()
        .filter(|(_, f)| matches!(f.generator, FeatureGen::Numeric { .. }))
        .map(|(i, _)| i)
        .collect();
    let mut rows: Vec<Row> = Vec::with_capacity(spec.total_rows() as usize);
    let mut complete: Vec<usize> = Vec::new();
    for (ci, class) in spec.classes.iter().enumerate() {
        for k in 0..class.rows + class.missing {
            let mut cells: Vec<Cell> = spec
                .features
                .iter()
                .zip(&class.distributions)
                .map(|(f, p)| match &f.generator {
                    FeatureGen::Numeric { scale } => {
                        let bin = draw(p, &mut rng);
                        let u: f64 = rng.gen();
                        Cell::Num(scale * (bin as f64 + u) / spec.num_bins as f64)
                    }
                    FeatureGen::Categorical { .. } => Cell::Level(draw(p, &mut rng)),
                })
                .collect();
            if k >= class.rows {
                let f = numeric[rng.gen_range(0..numeric.len())];
                cells[f] = Cell::Num(f64::NAN);
            } else {
                complete.push(rows.len());
            }
            rows.push(Row {
                class: ci,
                cells,
                saddr: rng.gen(),
                daddr: rng.gen(),
            });
        }
    }
    if spec.duplicates > 0 && complete.is_empty() {
        return Err(Error::Config("duplicates requested but no complete rows".into()));
    }
    for _ in 0..spec.duplicates {
        let src = &rows[complete[rng.gen_range(0..complete.len())]];
        let copy = Row {
            class: src.class,
            cells: src.cells.clone(),
            saddr: src.saddr,
            daddr: src.daddr,
        };
        rows.push(copy);
    }
    rows.shuffle(&mut rng);

    let schema = spec.schema();
    let n = rows.len();
    let text = |f: &dyn Fn(&Row) -> String| ColumnData::Text(rows.iter().map(|r| Some(f(r))).collect());
    let mut columns = Vec::with_capacity(schema.columns().len());
    let mut defs = schema.columns().iter();
    let mut next_def = || defs.next().expect("schema matches generator").clone();
    columns.push(Column {
        schema: next_def(),
        data: ColumnData::Text((1..=n).map(|i| Some(i.to_string())).collect()),
    });
    for (fi, f) in spec.features.iter().enumerate() {
        let data = match &f.generator {
            FeatureGen::Numeric { .. } => ColumnData::Numeric(
                rows.iter()
                    .map(|r| match r.cells[fi] {
                        Cell::Num(v) => v,
                        Cell::Level(_) => unreachable!(),
                    })
                    .collect(),
            ),
            FeatureGen::Categorical { levels } => ColumnData::Text(
                rows.iter()
                    .map(|r| match r.cells[fi] {
                        Cell::Level(l) => Some(levels[l].clone()),
                        Cell::Num(_) => unreachable!(),
                    })
                    .collect(),
            ),
        };
        columns.push(Column {
            schema: next_def(),
            data,
        });
    }
    columns.push(Column {
        schema: next_def(),
        data: text(&|r| format!("192.168.100.{}", r.saddr)),
    });
    columns.push(Column {
        schema: next_def(),
        data: text(&|r| format!("192.168.100.{}", r.daddr)),
    });
    columns.push(Column {
        schema: next_def(),
        data: text(&|r| if spec.classes[r.class].attack { "1" } else { "0" }.to_string()),
    });
    columns.push(Column {
        schema: next_def(),
        data: text(&|r| spec.classes[r.class].category.clone()),
    });
    columns.push(Column {
        schema: next_def(),
        data: text(&|r| spec.classes[r.class].subcategory.clone()),
    });
    FlowTable::new(columns)
}

/// Generates the corpus and writes it as CSV.
pub fn generate_synthetic(spec: &SyntheticSpec, out: impl AsRef<Path>) -> Result<FlowTable> {
    let table = generate(spec)?;
    write_csv(&table, out)?;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{class_counts, derive_labels, TaskKind, TARGET_COLUMN};

    #[test]
    fn partial_classes_match_reported_totals() {
        let attack: u64 = PARTIAL_CLASSES.iter().filter(|c| c.0 != "Normal").map(|c| c.2).sum();
        let normal: u64 = PARTIAL_CLASSES.iter().filter(|c| c.0 == "Normal").map(|c| c.2).sum();
        assert_eq!((attack, normal), (29_507, 2_761));
        assert_eq!(BOT_IOT_MISSING_ROWS.iter().map(|c| c.1).sum::<u64>(), 2_803);
    }

    #[test]
    fn spec_validates() {
        let spec = SyntheticSpec::bot_iot_like(1);
        spec.validate().unwrap();
        let mut bad = spec.clone();
        bad.classes[0].distributions[0][0] += 0.5;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn zero_rows_gives_empty_table() {
        let mut spec = SyntheticSpec::bot_iot_like(1);
        for c in &mut spec.classes {
            c.rows = 0;
            c.missing = 0;
        }
        let t = generate(&spec).unwrap();
        assert_eq!(t.row_count(), 0);
        assert_eq!(t.columns().len(), spec.schema().columns().len());
    }

    #[test]
    fn class_ratio_follows_spec() {
        let mut spec = SyntheticSpec::bot_iot_like(3).scaled(0.1);
        for c in &mut spec.classes {
            c.missing = 0;
        }
        let t = derive_labels(&generate(&spec).unwrap(), TaskKind::Binary).unwrap();
        let counts = class_counts(&t, TARGET_COLUMN).unwrap();
        let normal = spec.classes.iter().filter(|c| !c.attack).map(|c| c.rows).sum::<u64>();
        assert_eq!(counts.get("normal"), Some(normal));
        assert_eq!(counts.total(), spec.total_rows());
    }

    #[test]
    fn rare_normal_ratio_survives_generation() {
        let class = |category: &str, attack: bool, rows: u64| SyntheticClass {
            category: category.into(),
            subcategory: category.into(),
            attack,
            rows,
            missing: 0,
            distributions: vec![vec![0.5, 0.5]],
        };
        let spec = SyntheticSpec {
            seed: 4,
            num_bins: 2,
            features: vec![SyntheticFeature {
                name: "rate".into(),
                generator: FeatureGen::Numeric { scale: 1.0 },
            }],
            classes: vec![class("Normal", false, 12), class("DDoS", true, 99_988)],
            duplicates: 0,
        };
        let t = derive_labels(&generate(&spec).unwrap(), TaskKind::Binary).unwrap();
        let counts = class_counts(&t, TARGET_COLUMN).unwrap();
        let share = counts.get("normal").unwrap() as f64 / counts.total() as f64;
        assert!((share * 100.0 - 0.012).abs() < 1e-12);
    }

    #[test]
    fn empty_spec_writes_header_only() {
        let mut spec = SyntheticSpec::bot_iot_like(1);
        for c in &mut spec.classes {
            c.rows = 0;
            c.missing = 0;
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        generate_synthetic(&spec, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(text.starts_with("pkSeqID,dur,"));
    }

    #[test]
    fn same_seed_same_bytes() {
        let spec = SyntheticSpec::bot_iot_like(9).scaled(0.01);
        let render = || {
            let mut buf = Vec::new();
            crate::ingest::write_csv_to(&generate(&spec).unwrap(), &mut buf).unwrap();
            buf
        };
        assert_eq!(render(), render());
    }
}
