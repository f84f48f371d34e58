//! Command-line driver for the EDM pipeline.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use edm_core::evaluation::{blind_test, emit_plot_data};
use edm_core::example_gen::{
    coverage_report, read_records_csv, split_dataset, Dataset, LabeledRecord, SplitDataset,
    SplitOrigin,
};
use edm_core::formula_census::{census, load_class_map, read_formula_csv, CensusMetric};
use edm_core::genetic_opt::{derive_seed, optimize_inputs, GaConfig};
use edm_core::neural_net::{parse_network, serialize_network, train, TrainConfig};
use edm_core::pipeline::{
    self, build_dataset, parse_fractions, parse_hidden, read_to_string, run_edm, stage_seed,
    PipelineConfig, PipelineError,
};
use edm_core::rule_model::classify;

#[derive(Parser)]
#[command(name = "edm", about = "Example Driven Modelling for rule-based decision systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SeedArg {
    /// Master seed (falls back to the EDM_SEED environment variable).
    #[arg(long)]
    seed: Option<u64>,
}

impl SeedArg {
    fn resolve(&self) -> Result<u64, PipelineError> {
        if let Some(s) = self.seed {
            return Ok(s);
        }
        match std::env::var("EDM_SEED") {
            Ok(v) => v
                .parse()
                .map_err(|_| PipelineError::Config(format!("EDM_SEED `{v}` is not an integer"))),
            Err(_) => Ok(42),
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Hidden layer sizes, comma separated.
    #[arg(long, default_value = "8")]
    hidden: String,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    #[arg(long, default_value_t = 2000)]
    epochs: usize,
    #[arg(long, default_value_t = 100)]
    patience: usize,
}

impl TrainArgs {
    fn to_config(&self, seed: u64) -> Result<TrainConfig, PipelineError> {
        Ok(TrainConfig {
            learning_rate: self.lr,
            max_epochs: self.epochs,
            patience: self.patience,
            hidden_layers: parse_hidden(&self.hidden).map_err(PipelineError::Config)?,
            seed,
            ..TrainConfig::default()
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Classify records with a ladder; emits a labeled dataset CSV on stdout.
    Oracle {
        #[arg(long)]
        ladder: PathBuf,
        /// Records CSV (header of variable names).
        records: PathBuf,
    },
    /// Generate a condition-covering labeled dataset from a ladder.
    GenExamples {
        #[arg(long)]
        ladder: PathBuf,
        #[arg(long)]
        ranges: PathBuf,
        /// Target examples per (rule, condition, case).
        #[arg(long, default_value_t = 4)]
        k: usize,
        /// Pad with uniform random records up to this size (0 = no padding).
        #[arg(long, default_value_t = 0)]
        min_total: usize,
        #[command(flatten)]
        seed: SeedArg,
        /// Output directory for dataset.csv and coverage.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Split a labeled dataset into train/test/blind CSVs.
    Split {
        /// Labeled dataset CSV.
        input: PathBuf,
        #[arg(long, default_value = "0.6,0.2,0.2")]
        fractions: String,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a network on train/test CSVs.
    Train {
        #[arg(long = "train")]
        train_csv: PathBuf,
        #[arg(long = "test")]
        test_csv: PathBuf,
        /// Number of classes; inferred from the labels when omitted.
        #[arg(long)]
        classes: Option<usize>,
        #[command(flatten)]
        nn: TrainArgs,
        #[command(flatten)]
        seed: SeedArg,
        /// Output directory for network.txt and mse_history.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evolve the input-variable subset and train on the best mask.
    Evolve {
        #[arg(long = "train")]
        train_csv: PathBuf,
        #[arg(long = "test")]
        test_csv: PathBuf,
        #[arg(long)]
        classes: Option<usize>,
        #[arg(long, default_value_t = 12)]
        pop: usize,
        #[arg(long, default_value_t = 10)]
        gens: usize,
        #[command(flatten)]
        nn: TrainArgs,
        #[command(flatten)]
        seed: SeedArg,
        /// Output directory for ga_report.csv, network.txt, mse_history.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Blind-test a serialized network against a blind CSV.
    BlindTest {
        #[arg(long)]
        network: PathBuf,
        /// Blind split CSV (must come from `split`; treated as Blind).
        #[arg(long)]
        blind: PathBuf,
        /// Output directory for blind_plot.csv and summary files.
        #[arg(long)]
        out: PathBuf,
    },
    /// Operator-usage census of a formulas corpus.
    Census {
        /// Corpus CSV with header `workbook_id,formula`.
        #[arg(long)]
        formulas: PathBuf,
        /// Class map CSV `class_name,FUNCTION_NAME`.
        #[arg(long)]
        class_map: PathBuf,
        /// Validate the map against the vendor per-class operator counts.
        #[arg(long)]
        strict: bool,
        /// occurrences, presence or both.
        #[arg(long, default_value = "both")]
        metric: String,
    },
    /// Run the whole pipeline: generate, split, evolve, train, blind-test.
    RunEdm {
        #[arg(long)]
        ladder: PathBuf,
        #[arg(long)]
        ranges: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Optional `key = value` config file; flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        fractions: Option<String>,
        #[arg(long)]
        hidden: Option<String>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        patience: Option<usize>,
        /// Disable the genetic input search.
        #[arg(long = "no-ga")]
        no_ga: bool,
        #[arg(long)]
        pop: Option<usize>,
        #[arg(long)]
        gens: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are success, not usage errors
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn write_out(dir: &PathBuf, name: &str, contents: &str) -> Result<(), PipelineError> {
    fs::create_dir_all(dir).map_err(|e| PipelineError::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))
}

fn load_split_pair(
    train_csv: &PathBuf,
    test_csv: &PathBuf,
) -> Result<(Dataset, Dataset), PipelineError> {
    let tr = Dataset::from_csv(&read_to_string(train_csv)?, SplitOrigin::Train)
        .map_err(|e| PipelineError::Config(format!("{}: {e}", train_csv.display())))?;
    let te = Dataset::from_csv(&read_to_string(test_csv)?, SplitOrigin::Test)
        .map_err(|e| PipelineError::Config(format!("{}: {e}", test_csv.display())))?;
    Ok((tr, te))
}

fn infer_classes(explicit: Option<usize>, sets: &[&Dataset]) -> usize {
    explicit.unwrap_or_else(|| {
        sets.iter()
            .flat_map(|d| d.records.iter().map(|lr| lr.label))
            .max()
            .unwrap_or(2)
            .max(2)
    })
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Oracle { ladder, records } => {
            let ladder = pipeline::load_ladder(&ladder)?;
            let text = read_to_string(&records)?;
            let (variables, recs) = read_records_csv(&text)
                .map_err(|e| PipelineError::Config(format!("{}: {e}", records.display())))?;
            let mut labeled = Vec::with_capacity(recs.len());
            for record in recs {
                let label = classify(&ladder, &record)
                    .map_err(|e| PipelineError::Config(e.to_string()))?;
                labeled.push(LabeledRecord { record, label });
            }
            let dataset = Dataset::new(variables, labeled);
            print!("{}", dataset.to_csv());
            Ok(())
        }
        Command::GenExamples {
            ladder,
            ranges,
            k,
            min_total,
            seed,
            out,
        } => {
            let ladder = pipeline::load_ladder(&ladder)?;
            let ranges = pipeline::load_ranges(&ranges)?;
            let master = seed.resolve()?;
            let (dataset, uncoverable) = build_dataset(&ladder, &ranges, k, min_total, master)?;
            let mut report = coverage_report(&dataset, &ladder)
                .map_err(|e| PipelineError::Config(e.to_string()))?;
            for (ri, ci) in &uncoverable {
                report.mark_uncoverable(&ladder.rules[*ri].name, *ci);
            }
            write_out(&out, "dataset.csv", &dataset.to_csv())?;
            write_out(&out, "coverage.csv", &report.to_csv())?;
            println!("wrote {} records to {}", dataset.len(), out.display());
            Ok(())
        }
        Command::Split {
            input,
            fractions,
            seed,
            out,
        } => {
            let dataset = Dataset::from_csv(&read_to_string(&input)?, SplitOrigin::Unsplit)
                .map_err(|e| PipelineError::Config(format!("{}: {e}", input.display())))?;
            let fractions = parse_fractions(&fractions).map_err(PipelineError::Config)?;
            let master = seed.resolve()?;
            let split = split_dataset(&dataset, fractions, stage_seed(master, "split"))
                .map_err(|e| PipelineError::Config(e.to_string()))?;
            write_out(&out, "train.csv", &split.train.to_csv())?;
            write_out(&out, "test.csv", &split.test.to_csv())?;
            write_out(&out, "blind.csv", &split.blind.to_csv())?;
            println!(
                "split {} records into {}/{}/{}",
                dataset.len(),
                split.train.len(),
                split.test.len(),
                split.blind.len()
            );
            Ok(())
        }
        Command::Train {
            train_csv,
            test_csv,
            classes,
            nn,
            seed,
            out,
        } => {
            let (tr, te) = load_split_pair(&train_csv, &test_csv)?;
            let num_classes = infer_classes(classes, &[&tr, &te]);
            let cfg = nn.to_config(stage_seed(seed.resolve()?, "train"))?;
            let report = train(&tr, &te, num_classes, &cfg).map_err(|e| {
                let code = if matches!(e, edm_core::neural_net::NetError::Diverged { .. }) {
                    3
                } else {
                    2
                };
                PipelineError::Stage {
                    stage: "train",
                    message: e.to_string(),
                    code,
                }
            })?;
            write_out(&out, "network.txt", &serialize_network(&report.network))?;
            write_out(&out, "mse_history.csv", &report.mse_history_csv())?;
            println!(
                "best epoch {} with test MSE {}",
                report.best_epoch, report.best_test_mse
            );
            Ok(())
        }
        Command::Evolve {
            train_csv,
            test_csv,
            classes,
            pop,
            gens,
            nn,
            seed,
            out,
        } => {
            let (tr, te) = load_split_pair(&train_csv, &test_csv)?;
            let _ = infer_classes(classes, &[&tr, &te]);
            let master = seed.resolve()?;
            let nn_cfg = nn.to_config(stage_seed(master, "train"))?;
            let ga_cfg = GaConfig {
                population_size: pop,
                generations: gens,
                seed: stage_seed(master, "ga"),
                ..GaConfig::default()
            };
            // evolve never sees a blind set; an empty one is a placeholder
            let split = SplitDataset {
                blind: Dataset {
                    variables: tr.variables.clone(),
                    records: Vec::new(),
                    origin: SplitOrigin::Blind,
                },
                train: tr,
                test: te,
            };
            let ga_report = optimize_inputs(&split, &ga_cfg, &nn_cfg).map_err(|e| {
                PipelineError::Stage {
                    stage: "evolve",
                    message: e.to_string(),
                    code: 2,
                }
            })?;
            write_out(&out, "ga_report.csv", &ga_report.to_csv())?;
            let genome = &ga_report.best_genome;
            let selected = genome.selected_variables(&split.train.variables);
            let num_classes = infer_classes(classes, &[&split.train, &split.test]);
            let final_cfg = TrainConfig {
                seed: derive_seed(nn_cfg.seed, genome.bits()),
                ..nn_cfg
            };
            let report = train(
                &split.train.with_variables(selected.clone()),
                &split.test.with_variables(selected),
                num_classes,
                &final_cfg,
            )
            .map_err(|e| PipelineError::Stage {
                stage: "train",
                message: e.to_string(),
                code: 2,
            })?;
            write_out(&out, "network.txt", &serialize_network(&report.network))?;
            write_out(&out, "mse_history.csv", &report.mse_history_csv())?;
            println!(
                "best mask {} with fitness {}",
                genome.mask_string(),
                ga_report.best_fitness
            );
            Ok(())
        }
        Command::BlindTest { network, blind, out } => {
            let net = parse_network(&read_to_string(&network)?)
                .map_err(|e| PipelineError::Config(format!("{}: {e}", network.display())))?;
            let blind_set = Dataset::from_csv(&read_to_string(&blind)?, SplitOrigin::Blind)
                .map_err(|e| PipelineError::Config(format!("{}: {e}", blind.display())))?;
            let (results, summary) = blind_test(&net, &blind_set).map_err(|e| {
                PipelineError::Stage {
                    stage: "blind-test",
                    message: e.to_string(),
                    code: 2,
                }
            })?;
            write_out(&out, "blind_plot.csv", &emit_plot_data(&results))?;
            write_out(&out, "summary.csv", &summary.to_csv())?;
            write_out(&out, "summary.txt", &summary.to_text(net.norm.num_classes))?;
            print!("{}", summary.to_text(net.norm.num_classes));
            Ok(())
        }
        Command::Census {
            formulas,
            class_map,
            strict,
            metric,
        } => {
            let metric = match metric.as_str() {
                "both" => CensusMetric::Both,
                "occurrences" => CensusMetric::Occurrences,
                "presence" => CensusMetric::Presence,
                other => {
                    return Err(PipelineError::Config(format!(
                        "unknown metric `{other}` (use occurrences, presence or both)"
                    )))
                }
            };
            let map = load_class_map(&read_to_string(&class_map)?)
                .map_err(|e| PipelineError::Config(format!("{}: {e}", class_map.display())))?;
            if strict {
                map.validate_strict().map_err(|e| PipelineError::Stage {
                    stage: "census",
                    message: e.to_string(),
                    code: 2,
                })?;
            }
            let records = read_formula_csv(&read_to_string(&formulas)?)
                .map_err(|e| PipelineError::Config(format!("{}: {e}", formulas.display())))?;
            let report = census(&records, &map).map_err(|e| PipelineError::Stage {
                stage: "census",
                message: e.to_string(),
                code: 2,
            })?;
            print!("{}", report.to_csv(metric));
            Ok(())
        }
        Command::RunEdm {
            ladder,
            ranges,
            out,
            config,
            seed,
            k,
            fractions,
            hidden,
            lr,
            epochs,
            patience,
            no_ga,
            pop,
            gens,
        } => {
            let mut cfg = PipelineConfig::new(ladder, out);
            cfg.ranges_path = Some(ranges);
            if let Some(path) = config {
                cfg.apply_file(&read_to_string(&path)?)?;
            }
            cfg.master_seed = seed.resolve()?;
            if let Some(v) = k {
                cfg.k = v;
            }
            if let Some(v) = fractions {
                cfg.fractions = parse_fractions(&v).map_err(PipelineError::Config)?;
            }
            if let Some(v) = hidden {
                cfg.train.hidden_layers = parse_hidden(&v).map_err(PipelineError::Config)?;
            }
            if let Some(v) = lr {
                cfg.train.learning_rate = v;
            }
            if let Some(v) = epochs {
                cfg.train.max_epochs = v;
            }
            if let Some(v) = patience {
                cfg.train.patience = v;
            }
            if no_ga {
                cfg.ga_enabled = false;
            }
            if let Some(v) = pop {
                cfg.ga.population_size = v;
            }
            if let Some(v) = gens {
                cfg.ga.generations = v;
            }
            let summary = run_edm(&cfg)?;
            println!(
                "dataset {} -> train {} / test {} / blind {}",
                summary.dataset_size, summary.train_size, summary.test_size, summary.blind_size
            );
            if let Some(mask) = &summary.best_mask {
                println!("selected inputs {mask}");
            }
            println!(
                "blind records {}: {} misclassifications (accuracy {}), blind MSE {}",
                summary.blind_size, summary.misclassifications, summary.accuracy, summary.blind_mse
            );
            Ok(())
        }
    }
}
