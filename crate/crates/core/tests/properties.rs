use proptest::prelude::*;

use flowforge::classifiers::{ClassifierConfig, ClassifierKind, TrainingSet};
use flowforge::dataset::{class_counts, Column, ColumnData, ColumnKind, ColumnSchema, FlowTable, Schema, TaskKind};
use flowforge::evaluate::{confusion_matrix, macro_f1};
use flowforge::feature_select::{chi_square_statistic, select_top_k, FeatureCount};
use flowforge::ingest::{read_csv, union_shards, write_csv, ShardManifest};
use flowforge::partitioned_exec::{merge_counts, partition, BinClassHistogram, Executor, RowCount};
use flowforge::preprocess::{drop_duplicates, drop_missing, index_strings};
use flowforge::{derive_labels, train, TARGET_COLUMN};

fn coded(max_len: usize, bins: u32, classes: u32) -> impl Strategy<Value = (Vec<u32>, Vec<u32>)> {
    prop::collection::vec((0..bins, 0..classes), 1..max_len).prop_map(|v| v.into_iter().unzip())
}

fn flow_table(rows: &[(f64, Option<&str>, bool)]) -> FlowTable {
    FlowTable::new(vec![
        Column {
            schema: ColumnSchema::new("bytes", ColumnKind::Numeric),
            data: ColumnData::Numeric(rows.iter().map(|r| r.0).collect()),
        },
        Column {
            schema: ColumnSchema::new("proto", ColumnKind::Categorical),
            data: ColumnData::Text(rows.iter().map(|r| r.1.map(str::to_string)).collect()),
        },
        Column {
            schema: ColumnSchema::new("attack", ColumnKind::LabelBinary),
            data: ColumnData::Text(rows.iter().map(|r| Some(if r.2 { "1" } else { "0" }.to_string())).collect()),
        },
    ])
    .unwrap()
}

fn flow_rows() -> impl Strategy<Value = Vec<(f64, Option<&'static str>, bool)>> {
    prop::collection::vec(
        (
            prop_oneof![(0u32..6).prop_map(f64::from), Just(f64::NAN), -1e6f64..1e6],
            prop::option::weighted(0.9, prop::sample::select(vec!["tcp", "udp", "icmp", "a,b", "q\"x"])),
            any::<bool>(),
        ),
        0..60,
    )
}

fn schema() -> Schema {
    Schema::new(vec![
        ColumnSchema::new("bytes", ColumnKind::Numeric),
        ColumnSchema::new("proto", ColumnKind::Categorical),
        ColumnSchema::new("attack", ColumnKind::LabelBinary),
    ])
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn chi_square_is_permutation_invariant((f, t) in coded(120, 5, 4), seed in any::<u64>()) {
        let (a, _) = chi_square_statistic(&f, &t).unwrap();
        let n = f.len();
        let mut order: Vec<usize> = (0..n).collect();
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(i, (s >> 33) as usize % (i + 1));
        }
        let pf: Vec<u32> = order.iter().map(|&i| f[i]).collect();
        let pt: Vec<u32> = order.iter().map(|&i| t[i]).collect();
        let (b, _) = chi_square_statistic(&pf, &pt).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
    }

    #[test]
    fn chi_square_doubles_with_duplicated_data((f, t) in coded(120, 5, 4)) {
        let (a, dof_a) = chi_square_statistic(&f, &t).unwrap();
        let f2: Vec<u32> = f.iter().chain(&f).copied().collect();
        let t2: Vec<u32> = t.iter().chain(&t).copied().collect();
        let (b, dof_b) = chi_square_statistic(&f2, &t2).unwrap();
        prop_assert!((b - 2.0 * a).abs() <= 1e-9 * b.max(1.0));
        prop_assert_eq!(dof_a, dof_b);
        prop_assert!(a >= 0.0);
    }

    #[test]
    fn top_k_is_a_prefix_of_the_full_ranking(
        values in prop::collection::vec(prop::collection::vec(0.0f64..=1.0, 6), 4..80),
        k in 1usize..=6,
    ) {
        let n = values.len();
        let mut cols: Vec<Column> = (0..6)
            .map(|j| Column {
                schema: ColumnSchema::new(format!("f{j}"), ColumnKind::Numeric),
                data: ColumnData::Numeric(values.iter().map(|r| r[j]).collect()),
            })
            .collect();
        cols.push(Column {
            schema: ColumnSchema::new("attack", ColumnKind::LabelBinary),
            data: ColumnData::Text((0..n).map(|i| Some((i % 2).to_string())).collect()),
        });
        let table = derive_labels(&FlowTable::new(cols).unwrap(), TaskKind::Binary).unwrap();
        let (ranking, all) = select_top_k(&table, TARGET_COLUMN, FeatureCount::All, 8).unwrap();
        let (_, top) = select_top_k(&table, TARGET_COLUMN, FeatureCount::Top(k), 8).unwrap();
        prop_assert_eq!(&top[..], &all[..k]);
        prop_assert!(ranking.entries.windows(2).all(|w| w[0].chi2 >= w[1].chi2));
    }

    #[test]
    fn dedup_and_missing_removal_are_idempotent(rows in flow_rows()) {
        let table = flow_table(&rows);
        let (once, removed) = drop_duplicates(&table);
        let (twice, again) = drop_duplicates(&once);
        prop_assert_eq!(again, 0);
        prop_assert_eq!(once.row_count() + removed, table.row_count());
        prop_assert_eq!(twice.row_count(), once.row_count());
        let (clean, report) = drop_missing(&table);
        let (clean2, report2) = drop_missing(&clean);
        prop_assert_eq!(clean.row_count() as u64 + report.total(), table.row_count() as u64);
        prop_assert!(report2.is_empty());
        prop_assert_eq!(clean2.row_count(), clean.row_count());
    }

    #[test]
    fn csv_round_trip_preserves_clean_tables(rows in flow_rows()) {
        let (table, _) = drop_missing(&flow_table(&rows));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_csv(&table, &path).unwrap();
        let back = read_csv(&path, &schema()).unwrap();
        prop_assert_eq!(back, table);
    }

    #[test]
    fn union_is_concatenation_in_order(rows in flow_rows(), cut_a in 0usize..60, cut_b in 0usize..60) {
        let (table, _) = drop_missing(&flow_table(&rows));
        let n = table.row_count();
        let (a, b) = (cut_a.min(n), cut_b.min(n));
        let (lo, hi) = (a.min(b), a.max(b));
        let dir = tempfile::tempdir().unwrap();
        let mut paths = Vec::new();
        for (i, range) in [0..lo, lo..hi, hi..n].into_iter().enumerate() {
            let p = dir.path().join(format!("part{i}.csv"));
            write_csv(&table.take(&range.collect::<Vec<_>>()), &p).unwrap();
            paths.push(p);
        }
        let whole = union_shards(&ShardManifest::new(paths.clone()).unwrap(), &schema()).unwrap();
        prop_assert_eq!(&whole, &table);
        // (p0 ∪ p1) ∪ p2 == p0 ∪ (p1 ∪ p2)
        let left = dir.path().join("left.csv");
        write_csv(&union_shards(&ShardManifest::new(paths[..2].to_vec()).unwrap(), &schema()).unwrap(), &left).unwrap();
        let right = dir.path().join("right.csv");
        write_csv(&union_shards(&ShardManifest::new(paths[1..].to_vec()).unwrap(), &schema()).unwrap(), &right).unwrap();
        let l = union_shards(&ShardManifest::new(vec![left, paths[2].clone()]).unwrap(), &schema()).unwrap();
        let r = union_shards(&ShardManifest::new(vec![paths[0].clone(), right]).unwrap(), &schema()).unwrap();
        prop_assert_eq!(l, r);
    }

    #[test]
    fn index_map_is_a_bijection(rows in flow_rows()) {
        let table = flow_table(&rows);
        let (indexed, maps) = index_strings(&table, &["proto".to_string()]).unwrap();
        let map = &maps[0];
        let ColumnData::Numeric(codes) = &indexed.column("proto").unwrap().data else { panic!("codes") };
        let ColumnData::Text(raw) = &table.column("proto").unwrap().data else { panic!("text") };
        for (code, raw) in codes.iter().zip(raw) {
            match raw {
                Some(s) => prop_assert_eq!(map.label(*code as u32), Some(s.as_str())),
                None => prop_assert!(code.is_nan()),
            }
        }
        let mut sorted: Vec<u32> = map.mapping().into_values().collect();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..map.labels.len() as u32).collect::<Vec<_>>());
    }

    #[test]
    fn class_counts_sum_to_rows(rows in flow_rows()) {
        let table = derive_labels(&flow_table(&rows), TaskKind::Binary).unwrap();
        let counts = class_counts(&table, TARGET_COLUMN).unwrap();
        prop_assert_eq!(counts.total(), table.row_count() as u64);
    }

    #[test]
    fn merge_obeys_monoid_laws(
        a in prop::collection::vec(0u64..1000, 0..12),
        b in prop::collection::vec(0u64..1000, 0..12),
        c in prop::collection::vec(0u64..1000, 0..12),
    ) {
        prop_assert_eq!(merge_counts(a.clone(), Vec::new()), a.clone());
        prop_assert_eq!(merge_counts(a.clone(), b.clone()), merge_counts(b.clone(), a.clone()));
        prop_assert_eq!(
            merge_counts(merge_counts(a.clone(), b.clone()), c.clone()),
            merge_counts(a, merge_counts(b, c))
        );
    }

    #[test]
    fn histograms_are_partition_invariant(
        rows in prop::collection::vec((prop::collection::vec(0u16..8, 3), 0u32..3), 0..2000),
    ) {
        let bins: Vec<Vec<u16>> = rows.iter().map(|r| r.0.clone()).collect();
        let targets: Vec<u32> = rows.iter().map(|r| r.1).collect();
        let agg = BinClassHistogram { bins: &bins, targets: &targets, num_bins: 8, num_classes: 3 };
        let reference = Executor::new(1, 1).unwrap().aggregate_rows(rows.len(), &agg);
        for n in [2, 3, 8] {
            let exec = Executor::new(n, 2).unwrap();
            prop_assert_eq!(&exec.aggregate_rows(rows.len(), &agg), &reference);
            prop_assert_eq!(exec.aggregate_rows(rows.len(), &RowCount), rows.len() as u64);
        }
    }

    #[test]
    fn partitions_reconstruct_the_table(rows in flow_rows(), n in 1usize..10) {
        let table = flow_table(&rows);
        let pt = partition(&table, n).unwrap();
        let parts: Vec<FlowTable> = (0..pt.partition_count()).map(|i| pt.partition(i)).collect();
        let sizes: Vec<usize> = parts.iter().map(FlowTable::row_count).collect();
        if let (Some(max), Some(min)) = (sizes.iter().max(), sizes.iter().min()) {
            prop_assert!(max - min <= 1);
        }
        if table.row_count() > 0 {
            let joined = FlowTable::concat(&parts).unwrap();
            prop_assert_eq!(joined.row_count(), table.row_count());
            prop_assert_eq!(drop_missing(&joined).0, drop_missing(&table).0);
        }
    }

    #[test]
    fn macro_f1_ignores_class_relabeling(
        pairs in prop::collection::vec((0u32..4, 0u32..4), 1..200),
        perm in Just(vec![0u32, 1, 2, 3]).prop_shuffle(),
    ) {
        let (actual, predicted): (Vec<u32>, Vec<u32>) = pairs.iter().copied().unzip();
        let a = macro_f1(&confusion_matrix(&actual, &predicted, 4).unwrap());
        let ra: Vec<u32> = actual.iter().map(|&c| perm[c as usize]).collect();
        let rp: Vec<u32> = predicted.iter().map(|&c| perm[c as usize]).collect();
        let b = macro_f1(&confusion_matrix(&ra, &rp, 4).unwrap());
        prop_assert!((a - b).abs() <= 1e-12);
    }
}

#[test]
fn tree_training_is_partition_invariant_on_random_tables() {
    let mut state = 7u64;
    let mut next = move || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    for rows in [50usize, 700, 3000] {
        let features: Vec<Vec<f64>> = (0..rows).map(|_| (0..4).map(|_| next()).collect()).collect();
        let targets: Vec<u32> = features
            .iter()
            .map(|r| u32::from(r[0] + 0.3 * r[1] > 0.6) + u32::from(r[2] > 0.8))
            .collect();
        let set = TrainingSet {
            feature_names: (0..4).map(|i| format!("f{i}")).collect(),
            features,
            targets,
            num_classes: 3,
        };
        let task = flowforge::LabelTask {
            variant: TaskKind::MainCategory,
            class_names: vec!["a".into(), "b".into(), "c".into()],
        };
        for kind in [ClassifierKind::DecisionTree, ClassifierKind::RandomForest] {
            let mut config = ClassifierConfig::new(kind);
            config.forest.num_trees = 5;
            let models: Vec<String> = [1, 2, 3, 8]
                .into_iter()
                .map(|p| train(&config, &set, &task, &Executor::new(p, 0).unwrap()).unwrap().to_json())
                .collect();
            assert!(models.windows(2).all(|w| w[0] == w[1]), "{kind} differs at {rows} rows");
        }
    }
}
