use std::ffi::{CStr, CString};
use std::ptr;

use flowforge::synth::{generate_synthetic, SyntheticSpec};
use flowforge_ffi::*;

fn c(s: &std::path::Path) -> CString {
    CString::new(s.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let p = ff_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn small_corpus(dir: &std::path::Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let spec = SyntheticSpec::bot_iot_like(5).scaled(0.02);
    let csv = dir.join("flows.csv");
    let schema = dir.join("flows.schema.json");
    generate_synthetic(&spec, &csv).unwrap();
    std::fs::write(&schema, spec.schema().to_json_pretty()).unwrap();
    (csv, schema)
}

#[test]
fn table_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, schema) = small_corpus(dir.path());
    let mut table = ptr::null_mut();
    let status = unsafe { ff_table_read_csv(c(&csv).as_ptr(), c(&schema).as_ptr(), &mut table) };
    assert_eq!(status, FfStatus::Ok);
    let rows = unsafe { ff_table_row_count(table) };
    let expected = flowforge::read_csv(&csv, &flowforge::Schema::from_json_file(&schema).unwrap())
        .unwrap()
        .row_count();
    assert_eq!(rows, expected);
    assert_eq!(unsafe { ff_table_column_count(table) }, 22);
    unsafe { ff_table_free(table) };
    unsafe { ff_table_free(ptr::null_mut()) };
    assert_eq!(unsafe { ff_table_row_count(ptr::null()) }, 0);
}

#[test]
fn missing_file_sets_io_status() {
    let mut table = ptr::null_mut();
    let path = CString::new("/nonexistent/flows.csv").unwrap();
    let status = unsafe { ff_table_read_csv(path.as_ptr(), ptr::null(), &mut table) };
    assert_eq!(status, FfStatus::Io);
    assert!(table.is_null());
    assert!(last_error().contains("/nonexistent/flows.csv"));
}

#[test]
fn null_arguments_rejected() {
    let status = unsafe { ff_table_read_csv(ptr::null(), ptr::null(), ptr::null_mut()) };
    assert_eq!(status, FfStatus::NullArgument);
    let mut out = 0u32;
    let status = unsafe { ff_model_predict(ptr::null(), [0.0].as_ptr(), 1, &mut out) };
    assert_eq!(status, FfStatus::NullArgument);
}

#[test]
fn chi_square_through_abi() {
    // 2x2 table [[10,20],[30,40]]
    let mut feature = Vec::new();
    let mut target = Vec::new();
    for (f, t, n) in [(0u32, 0u32, 10), (0, 1, 20), (1, 0, 30), (1, 1, 40)] {
        for _ in 0..n {
            feature.push(f);
            target.push(t);
        }
    }
    let (mut stat, mut dof) = (0.0, 0usize);
    let status = unsafe { ff_chi_square(feature.as_ptr(), target.as_ptr(), feature.len(), &mut stat, &mut dof) };
    assert_eq!(status, FfStatus::Ok);
    assert!((stat - 0.7936507936507936).abs() < 1e-9);
    assert_eq!(dof, 1);
    let status = unsafe { ff_chi_square(feature.as_ptr(), target.as_ptr(), 0, &mut stat, &mut dof) };
    assert_eq!(status, FfStatus::Data);
}

#[test]
fn run_experiment_and_predict() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, schema) = small_corpus(dir.path());
    let config = dir.path().join("run.json");
    std::fs::write(
        &config,
        format!(
            r#"{{"inputs":[{:?}],"schema":{:?},"task":"binary","classifier":"DT","sampling":{{"mode":"none"}}}}"#,
            csv, schema
        ),
    )
    .unwrap();
    let mut report = ptr::null_mut();
    let status = unsafe { ff_run_experiment(c(&config).as_ptr(), &mut report) };
    assert_eq!(status, FfStatus::Ok, "{}", last_error());
    let json = unsafe { CStr::from_ptr(report) }.to_str().unwrap().to_string();
    unsafe { ff_string_free(report) };
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert!(v["metrics"]["macro_f1"].as_f64().unwrap() > 0.9);

    let model_path = dir.path().join("model.json");
    let table = flowforge::read_csv(&csv, &flowforge::Schema::from_json_file(&schema).unwrap()).unwrap();
    let (table, _) = flowforge::index_strings(&table, &flowforge::preprocess::string_columns(&table)).unwrap();
    let (table, _) = flowforge::drop_missing(&table);
    let table = flowforge::derive_labels(&table, flowforge::TaskKind::Binary).unwrap();
    let features = vec!["rate".to_string(), "dur".to_string()];
    let (table, _) = flowforge::min_max_normalize(&table, &features, None).unwrap();
    let set = flowforge::TrainingSet::from_table(&table, &features).unwrap();
    let model = flowforge::train(
        &flowforge::ClassifierConfig::new(flowforge::ClassifierKind::DecisionTree),
        &set,
        table.labels().unwrap(),
        &flowforge::Executor::default(),
    )
    .unwrap();
    model.save(&model_path).unwrap();

    let mut handle = ptr::null_mut();
    assert_eq!(unsafe { ff_model_load(c(&model_path).as_ptr(), &mut handle) }, FfStatus::Ok);
    assert_eq!(unsafe { ff_model_num_features(handle) }, 2);
    assert_eq!(unsafe { ff_model_num_classes(handle) }, 2);
    let row = &set.features[0];
    let mut class = u32::MAX;
    assert_eq!(unsafe { ff_model_predict(handle, row.as_ptr(), row.len(), &mut class) }, FfStatus::Ok);
    assert_eq!(class, model.predict(row).unwrap());
    let status = unsafe { ff_model_predict(handle, row.as_ptr(), 1, &mut class) };
    assert_eq!(status, FfStatus::Data);
    assert!(last_error().contains("model expects 2"));
    unsafe { ff_model_free(handle) };
}

#[test]
fn version_is_set() {
    let v = unsafe { CStr::from_ptr(ff_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
