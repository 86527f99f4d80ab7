use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use flowforge::classifiers::{train, ClassifierConfig, ClassifierKind, ClassifierModel, TrainingSet};
use flowforge::dataset::{derive_labels, derive_labels_with, ColumnKind, ColumnSchema, FlowTable, Schema, TaskKind};
use flowforge::error::{Error, Result};
use flowforge::evaluate::evaluate_model;
use flowforge::feature_select::{select_top_k, FeatureCount, DEFAULT_NUM_BINS};
use flowforge::ingest::{read_csv_with, union_shards, write_csv, CsvOptions, ShardManifest};
use flowforge::partitioned_exec::{Executor, DEFAULT_PARTITIONS};
use flowforge::preprocess::{
    drop_duplicates, drop_missing, index_strings, min_max_normalize, string_columns, undersample, SamplingPlan,
};
use flowforge::runner::{run_experiment, run_matrix, ExperimentConfig, MatrixAxes, DEFAULT_CLASS_CAP, SEED_ENV};
use flowforge::synth::{generate_synthetic, SyntheticSpec};
use flowforge::TARGET_COLUMN;

#[derive(Parser)]
#[command(name = "flowforge", version, about = "Flow-record intrusion detection pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ExecArgs {
    /// Row partitions used for training statistics.
    #[arg(long, default_value_t = DEFAULT_PARTITIONS)]
    partitions: usize,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Args)]
struct InputArgs {
    /// Input CSV.
    #[arg(long = "in")]
    input: PathBuf,
    /// Schema JSON. Defaults to `<in>.schema.json` when present, else the
    /// bundled BoT-IoT schema.
    #[arg(long)]
    schema: Option<PathBuf>,
    /// The file has no header row; columns follow schema order.
    #[arg(long)]
    no_header: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Union CSV shards (glob or manifest file) into one CSV.
    Merge {
        #[arg(long)]
        manifest: String,
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        no_header: bool,
        #[arg(long, default_value_t = ',')]
        delimiter: char,
    },
    /// Index strings, drop duplicates and missing rows, undersample.
    Prep {
        #[command(flatten)]
        input: InputArgs,
        /// Sampling plan JSON (`{"ratios": {...}, "seed": n}`).
        #[arg(long)]
        plan: Option<PathBuf>,
        /// Per-class cap used when no plan is given.
        #[arg(long, default_value_t = DEFAULT_CLASS_CAP)]
        cap: u64,
        /// Skip undersampling.
        #[arg(long)]
        no_sampling: bool,
        #[arg(long, env = SEED_ENV, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Missing-row report JSON, one count per class.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Rank features by chi-square against a task's labels.
    Select {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value = "binary")]
        task: TaskKind,
        #[arg(long, default_value = "all")]
        k: FeatureCount,
        #[arg(long, default_value_t = DEFAULT_NUM_BINS)]
        bins: usize,
        #[arg(long)]
        out_ranking: PathBuf,
    },
    /// Train a classifier and write the model JSON.
    Train {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value = "binary")]
        task: TaskKind,
        #[arg(long, default_value = "RF")]
        classifier: ClassifierKind,
        /// Keep the top k chi-square features.
        #[arg(long, default_value = "all")]
        k: FeatureCount,
        /// Explicit comma-separated feature list (overrides --k).
        #[arg(long, value_delimiter = ',')]
        features: Option<Vec<String>>,
        #[arg(long, default_value_t = DEFAULT_NUM_BINS)]
        bins: usize,
        #[arg(long, env = SEED_ENV, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        model_out: PathBuf,
        #[command(flatten)]
        exec: ExecArgs,
    },
    /// Score a trained model on a labelled CSV.
    Eval {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Per-class metrics as CSV for plotting.
        #[arg(long)]
        emit_plot_data: Option<PathBuf>,
    },
    /// Run one experiment from a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        force_selection: bool,
        #[arg(long)]
        emit_plot_data: Option<PathBuf>,
        #[command(flatten)]
        exec: Option<ExecArgs>,
    },
    /// Run the classifier × feature-count × task matrix.
    Matrix {
        #[arg(long)]
        config: PathBuf,
        /// `partial` (27 runs) or `full` (9 runs, full-data protocol).
        #[arg(long, default_value = "partial")]
        mode: String,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        force_selection: bool,
        /// Run cells concurrently.
        #[arg(long)]
        parallel: bool,
    },
    /// Write a seeded synthetic corpus.
    Synth {
        /// Generator spec JSON; the BoT-IoT-like preset when absent.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, env = SEED_ENV)]
        seed: Option<u64>,
        /// Multiply every class size of the preset.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long)]
        duplicates: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the matching schema JSON.
        #[arg(long)]
        schema_out: Option<PathBuf>,
    },
}

fn schema_sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".schema.json");
    PathBuf::from(s)
}

fn index_sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".index.json");
    PathBuf::from(s)
}

fn write_file(path: &Path, body: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, body).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn read_input(args: &InputArgs) -> Result<FlowTable> {
    let schema = match &args.schema {
        Some(p) => Schema::from_json_file(p)?,
        None => {
            let side = schema_sidecar(&args.input);
            if side.exists() {
                Schema::from_json_file(side)?
            } else {
                Schema::bot_iot()
            }
        }
    };
    read_csv_with(
        &args.input,
        &schema,
        CsvOptions {
            has_header: !args.no_header,
            ..CsvOptions::default()
        },
    )
}

/// Schema of a table after string indexing: indexed columns become numeric.
fn schema_of(table: &FlowTable) -> Result<Schema> {
    Schema::new(
        table
            .columns()
            .iter()
            .map(|c| {
                let kind = match (&c.data, c.kind()) {
                    (flowforge::dataset::ColumnData::Numeric(_), ColumnKind::Categorical) => ColumnKind::Numeric,
                    (_, k) => k,
                };
                ColumnSchema { kind, ..c.schema.clone() }
            })
            .filter(|c| c.kind != ColumnKind::Target)
            .collect(),
    )
}

fn clean(table: &FlowTable) -> Result<(FlowTable, Vec<flowforge::preprocess::IndexMap>)> {
    let (table, maps) = index_strings(table, &string_columns(table))?;
    Ok((drop_missing(&table).0, maps))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Merge {
            manifest,
            schema,
            out,
            no_header,
            delimiter,
        } => {
            let schema = schema.map_or_else(|| Ok(Schema::bot_iot()), Schema::from_json_file)?;
            let manifest = ShardManifest::resolve(&manifest)?
                .with_header(!no_header)
                .with_delimiter(delimiter);
            let table = union_shards(&manifest, &schema)?;
            write_csv(&table, &out)?;
            info!("merged {} shards, {} rows", manifest.paths.len(), table.row_count());
        }
        Command::Prep {
            input,
            plan,
            cap,
            no_sampling,
            seed,
            out,
            report,
        } => {
            let table = read_input(&input)?;
            let rows_in = table.row_count();
            let (table, maps) = index_strings(&table, &string_columns(&table))?;
            let (table, dups) = drop_duplicates(&table);
            let (table, missing) = drop_missing(&table);
            let table = if no_sampling {
                table
            } else {
                let plan = match plan {
                    Some(p) => SamplingPlan::from_json_file(p)?,
                    None => {
                        let mut counts = std::collections::BTreeMap::new();
                        for c in table.row_class_names() {
                            *counts.entry(c).or_insert(0u64) += 1;
                        }
                        SamplingPlan::capped(&counts, cap, seed)
                    }
                };
                undersample(&table, &plan)?
            };
            write_csv(&table, &out)?;
            write_file(&schema_sidecar(&out), schema_of(&table)?.to_json_pretty())?;
            write_file(&index_sidecar(&out), serde_json::to_string_pretty(&maps)?)?;
            if let Some(p) = report {
                write_file(&p, serde_json::to_string_pretty(&missing)?)?;
            }
            println!(
                "{rows_in} rows in, {dups} duplicates, {} with missing values, {} rows out",
                missing.total(),
                table.row_count()
            );
        }
        Command::Select {
            input,
            task,
            k,
            bins,
            out_ranking,
        } => {
            let (table, _) = clean(&read_input(&input)?)?;
            let table = derive_labels(&table, task)?;
            let (table, _) = min_max_normalize(&table, &table.feature_names(), None)?;
            let (ranking, chosen) = select_top_k(&table, TARGET_COLUMN, k, bins)?;
            write_file(&out_ranking, serde_json::to_string_pretty(&ranking)?)?;
            println!("{}", chosen.join(","));
        }
        Command::Train {
            input,
            task,
            classifier,
            k,
            features,
            bins,
            seed,
            model_out,
            exec,
        } => {
            let (table, mut maps) = clean(&read_input(&input)?)?;
            let side = index_sidecar(&input.input);
            if side.exists() {
                let text = std::fs::read_to_string(&side).map_err(|e| Error::Io { path: side, source: e })?;
                maps.extend(serde_json::from_str::<Vec<flowforge::preprocess::IndexMap>>(&text)?);
            }
            let table = derive_labels(&table, task)?;
            let candidates = table.feature_names();
            let (normalized, params) = min_max_normalize(&table, &candidates, None)?;
            let chosen = match (features, k) {
                (Some(f), _) => f,
                (None, FeatureCount::All) => candidates,
                (None, k) => select_top_k(&normalized, TARGET_COLUMN, k, bins)?.1,
            };
            let executor = Executor::new(exec.partitions, exec.workers)?;
            let mut config = ClassifierConfig::new(classifier);
            config.forest.seed = seed;
            let set = TrainingSet::from_table(&normalized, &chosen)?;
            let task = table.labels().expect("labels derived").clone();
            let mut model = executor.install(|| train(&config, &set, &task, &executor))?;
            model.normalization = Some(params);
            model.string_indexes = maps.into_iter().filter(|m| chosen.contains(&m.column)).collect();
            model.save(&model_out)?;
            info!("trained {classifier} on {} rows, {} features", set.len(), chosen.len());
        }
        Command::Eval {
            input,
            model,
            report,
            emit_plot_data,
        } => {
            let model = ClassifierModel::load(&model)?;
            let table = read_input(&input)?;
            let table = drop_missing(&table).0;
            let table = derive_labels_with(&table, &model.task)?;
            let metrics = evaluate_model(&model, &table, &model.task)?;
            print!("{}", metrics.render());
            if let Some(p) = report {
                write_file(&p, serde_json::to_string_pretty(&metrics)?)?;
            }
            if let Some(p) = emit_plot_data {
                write_file(&p, metrics.plot_csv())?;
            }
        }
        Command::Run {
            config,
            out_dir,
            force_selection,
            emit_plot_data,
            exec,
        } => {
            let mut config = ExperimentConfig::from_json_file(config)?.with_env_seed()?;
            config.force_selection |= force_selection;
            if out_dir.is_some() {
                config.output_dir = out_dir;
            }
            if let Some(e) = exec {
                config.partitions = e.partitions;
                config.workers = e.workers;
            }
            let report = run_experiment(&config)?;
            print!("{}", report.summary());
            if let Some(p) = emit_plot_data {
                write_file(&p, report.metrics.plot_csv())?;
            }
        }
        Command::Matrix {
            config,
            mode,
            out_dir,
            force_selection,
            parallel,
        } => {
            let mut config = ExperimentConfig::from_json_file(config)?.with_env_seed()?;
            config.force_selection |= force_selection;
            if out_dir.is_some() {
                config.output_dir = out_dir;
            }
            let axes = match mode.as_str() {
                "partial" => MatrixAxes::partial(),
                "full" => {
                    config.full_data = true;
                    config.feature_k = FeatureCount::All;
                    MatrixAxes::full()
                }
                other => return Err(Error::Config(format!("unknown matrix mode {other:?}"))),
            };
            let result = run_matrix(&config, &axes, parallel)?;
            print!("{}", result.table.render());
        }
        Command::Synth {
            spec,
            seed,
            scale,
            duplicates,
            out,
            schema_out,
        } => {
            let mut spec = match spec {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).map_err(|e| Error::Io { path: p, source: e })?;
                    serde_json::from_str(&text)?
                }
                None => SyntheticSpec::bot_iot_like(seed.unwrap_or(0)).scaled(scale),
            };
            if let Some(s) = seed {
                spec.seed = s;
            }
            if let Some(d) = duplicates {
                spec.duplicates = d;
            }
            let table = generate_synthetic(&spec, &out)?;
            let schema = spec.schema().to_json_pretty();
            write_file(&schema_out.unwrap_or_else(|| schema_sidecar(&out)), schema)?;
            println!("{} rows written to {}", table.row_count(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(_) => ExitCode::from(3),
    }
}
