//! End-to-end pipeline: generate -> split -> (optional GA) -> train ->
//! blind-test, with every stage seeded deterministically from one master
//! seed so the whole artifact directory is reproducible byte for byte.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::evaluation::{blind_test, emit_plot_data, EvalError};
use crate::example_gen::{
    coverage_report, generate_covering_set, generate_uniform, read_ranges_csv, split_dataset,
    Dataset, GenError, SplitDataset, ValueRange,
};
use crate::genetic_opt::{derive_seed, optimize_inputs, GaConfig, GaError, Genome};
use crate::neural_net::{serialize_network, train, NetError, TrainConfig, TrainReport};
use crate::rule_model::{parse_ladder, DecisionLadder};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("stage {stage}: {message}")]
    Stage { stage: &'static str, message: String, code: i32 },
    #[error("{0}")]
    Io(String),
    #[error("config: {0}")]
    Config(String),
}

impl PipelineError {
    fn of(stage: &'static str, code: i32, err: impl std::fmt::Display) -> Self {
        PipelineError::Stage {
            stage,
            message: err.to_string(),
            code,
        }
    }

    /// CLI exit code: 1 usage, 2 data/validation, 3 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Stage { code, .. } => *code,
            PipelineError::Io(_) => 2,
            PipelineError::Config(_) => 1,
        }
    }
}

fn gen_err(stage: &'static str) -> impl Fn(GenError) -> PipelineError {
    move |e| PipelineError::of(stage, 2, e)
}

fn net_err(stage: &'static str) -> impl Fn(NetError) -> PipelineError {
    move |e| {
        let code = if matches!(e, NetError::Diverged { .. }) { 3 } else { 2 };
        PipelineError::of(stage, code, e)
    }
}

fn ga_err(stage: &'static str) -> impl Fn(GaError) -> PipelineError {
    move |e| {
        let code = match &e {
            GaError::Net(NetError::Diverged { .. }) => 3,
            _ => 2,
        };
        PipelineError::of(stage, code, e)
    }
}

fn eval_err(stage: &'static str) -> impl Fn(EvalError) -> PipelineError {
    move |e| PipelineError::of(stage, 2, e)
}

/// Stage seed derived from the master seed and the stage name (FNV-1a), so
/// stages can be re-run independently.
pub fn stage_seed(master: u64, stage: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in master.to_le_bytes().iter().chain(stage.as_bytes()) {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub ladder_path: PathBuf,
    pub ranges_path: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub k: usize,
    /// Pad the covering set with uniform random records up to this size.
    pub min_total: usize,
    pub fractions: (f64, f64, f64),
    pub train: TrainConfig,
    pub ga: GaConfig,
    pub ga_enabled: bool,
    pub master_seed: u64,
}

impl PipelineConfig {
    pub fn new(ladder_path: PathBuf, out_dir: PathBuf) -> Self {
        Self {
            ladder_path,
            ranges_path: None,
            out_dir,
            k: 4,
            min_total: 125,
            fractions: (0.6, 0.2, 0.2),
            // the pipeline gives the final network a much longer budget than
            // the module-level training default: the covering sets are small
            // and the decision boundaries sharp, so the test-MSE optimum is
            // often reached only after tens of thousands of epochs
            train: TrainConfig {
                max_epochs: 100_000,
                patience: 15_000,
                ..TrainConfig::default()
            },
            ga: GaConfig::default(),
            ga_enabled: true,
            master_seed: 42,
        }
    }

    /// Apply `key = value` lines from a config file. Unknown keys are
    /// rejected; every key has a default so a file is optional.
    pub fn apply_file(&mut self, text: &str) -> Result<(), PipelineError> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(PipelineError::Config(format!(
                    "line {}: expected `key = value`",
                    lineno + 1
                )));
            };
            self.apply_key(key.trim(), value.trim())
                .map_err(|e| PipelineError::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    pub fn apply_key(&mut self, key: &str, value: &str) -> Result<(), String> {
        let parse_u = |v: &str| v.parse::<u64>().map_err(|_| format!("`{v}` is not an integer"));
        let parse_f = |v: &str| v.parse::<f64>().map_err(|_| format!("`{v}` is not a number"));
        match key {
            "ladder" => self.ladder_path = PathBuf::from(value),
            "ranges" => self.ranges_path = Some(PathBuf::from(value)),
            "out" => self.out_dir = PathBuf::from(value),
            "seed" => self.master_seed = parse_u(value)?,
            "k" => self.k = parse_u(value)? as usize,
            "min_total" => self.min_total = parse_u(value)? as usize,
            "fractions" => self.fractions = parse_fractions(value)?,
            "hidden" => self.train.hidden_layers = parse_hidden(value)?,
            "lr" => self.train.learning_rate = parse_f(value)?,
            "epochs" => self.train.max_epochs = parse_u(value)? as usize,
            "patience" => self.train.patience = parse_u(value)? as usize,
            "init_scale" => self.train.init_scale = parse_f(value)?,
            "ga" => self.ga_enabled = parse_bool(value)?,
            "pop" => self.ga.population_size = parse_u(value)? as usize,
            "gens" => self.ga.generations = parse_u(value)? as usize,
            "tournament" => self.ga.tournament_size = parse_u(value)? as usize,
            "crossover" => self.ga.crossover_rate = parse_f(value)?,
            "mutation" => self.ga.mutation_rate = Some(parse_f(value)?),
            "elitism" => self.ga.elitism_count = parse_u(value)? as usize,
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }
}

pub fn parse_fractions(value: &str) -> Result<(f64, f64, f64), String> {
    let parts: Vec<&str> = value.split(',').map(|s| s.trim()).collect();
    if parts.len() != 3 {
        return Err("fractions must be three comma-separated numbers".to_string());
    }
    let mut nums = [0.0f64; 3];
    for (i, p) in parts.iter().enumerate() {
        nums[i] = p.parse().map_err(|_| format!("`{p}` is not a number"))?;
    }
    Ok((nums[0], nums[1], nums[2]))
}

pub fn parse_hidden(value: &str) -> Result<Vec<usize>, String> {
    value
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| format!("`{s}` is not a layer size"))
        })
        .collect()
}

pub fn parse_bool(value: &str) -> Result<bool, String> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        other => Err(format!("`{other}` is not a boolean")),
    }
}

pub fn read_to_string(path: &Path) -> Result<String, PipelineError> {
    fs::read_to_string(path)
        .map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), PipelineError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))
}

pub fn load_ladder(path: &Path) -> Result<DecisionLadder, PipelineError> {
    let text = read_to_string(path)?;
    parse_ladder(&text).map_err(|e| PipelineError::of("parse-ladder", 2, e))
}

pub fn load_ranges(path: &Path) -> Result<Vec<ValueRange>, PipelineError> {
    let text = read_to_string(path)?;
    read_ranges_csv(&text).map_err(|e| PipelineError::of("parse-ranges", 2, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub dataset_size: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub blind_size: usize,
    pub best_mask: Option<String>,
    pub best_epoch: usize,
    pub best_test_mse: f64,
    pub blind_mse: f64,
    pub misclassifications: usize,
    pub accuracy: f64,
}

/// Generate the padded covering dataset for a ladder (covering cases first,
/// uniform fill up to `min_total`).
pub fn build_dataset(
    ladder: &DecisionLadder,
    ranges: &[ValueRange],
    k: usize,
    min_total: usize,
    master_seed: u64,
) -> Result<(Dataset, BTreeSet<(usize, usize)>), PipelineError> {
    let generated = generate_covering_set(ladder, ranges, k, stage_seed(master_seed, "generate"))
        .map_err(gen_err("generate"))?;
    let mut dataset = generated.dataset;
    if dataset.len() < min_total {
        let fill = generate_uniform(
            ladder,
            ranges,
            min_total - dataset.len(),
            stage_seed(master_seed, "fill"),
        )
        .map_err(gen_err("fill"))?;
        dataset.records.extend(fill.records);
    }
    Ok((dataset, generated.uncoverable))
}

/// Run the full pipeline, writing every artifact under `config.out_dir`.
pub fn run_edm(config: &PipelineConfig) -> Result<RunSummary, PipelineError> {
    let ladder = load_ladder(&config.ladder_path)?;
    let ranges_path = config
        .ranges_path
        .as_ref()
        .ok_or_else(|| PipelineError::Config("run-edm requires a ranges file".to_string()))?;
    let ranges = load_ranges(ranges_path)?;
    fs::create_dir_all(&config.out_dir)
        .map_err(|e| PipelineError::Io(format!("{}: {e}", config.out_dir.display())))?;

    // generate
    let (dataset, uncoverable) =
        build_dataset(&ladder, &ranges, config.k, config.min_total, config.master_seed)?;
    write_file(&config.out_dir, "dataset.csv", &dataset.to_csv())?;
    let mut coverage = coverage_report(&dataset, &ladder).map_err(gen_err("coverage"))?;
    for (ri, ci) in &uncoverable {
        coverage.mark_uncoverable(&ladder.rules[*ri].name, *ci);
    }
    write_file(&config.out_dir, "coverage.csv", &coverage.to_csv())?;

    // split
    let split = split_dataset(&dataset, config.fractions, stage_seed(config.master_seed, "split"))
        .map_err(gen_err("split"))?;
    write_file(&config.out_dir, "train.csv", &split.train.to_csv())?;
    write_file(&config.out_dir, "test.csv", &split.test.to_csv())?;
    write_file(&config.out_dir, "blind.csv", &split.blind.to_csv())?;

    // optional GA over the input space, then final training
    let nn_cfg = TrainConfig {
        seed: stage_seed(config.master_seed, "train"),
        ..config.train.clone()
    };
    let (report, best_mask): (TrainReport, Option<String>) = if config.ga_enabled {
        let ga_cfg = GaConfig {
            seed: stage_seed(config.master_seed, "ga"),
            ..config.ga.clone()
        };
        // fitness screening runs at the (cheap) module-level training budget;
        // only the winning genome gets the full budget below
        let screen_cfg = TrainConfig {
            max_epochs: TrainConfig::default().max_epochs,
            patience: TrainConfig::default().patience,
            ..nn_cfg.clone()
        };
        let ga_report = optimize_inputs(&split, &ga_cfg, &screen_cfg).map_err(ga_err("evolve"))?;
        write_file(&config.out_dir, "ga_report.csv", &ga_report.to_csv())?;
        // the screened winner must also beat the all-inputs network at the
        // full training budget to be adopted; screening MSE on a 25-record
        // test set is too noisy to drop variables on its own
        let full = Genome::all_ones(split.train.variables.len());
        let candidates = if ga_report.best_genome == full {
            vec![full.clone()]
        } else {
            vec![ga_report.best_genome.clone(), full.clone()]
        };
        let mut chosen: Option<(TrainReport, Genome)> = None;
        for genome in candidates {
            let selected = genome.selected_variables(&split.train.variables);
            // the all-inputs genome keeps the plain training seed so a run
            // where it wins matches the GA-disabled run exactly
            let final_cfg = TrainConfig {
                seed: if genome == full {
                    nn_cfg.seed
                } else {
                    derive_seed(nn_cfg.seed, genome.bits())
                },
                ..nn_cfg.clone()
            };
            let report = train(
                &split.train.with_variables(selected.clone()),
                &split.test.with_variables(selected),
                ladder.num_classes,
                &final_cfg,
            )
            .map_err(net_err("train"))?;
            let better = match &chosen {
                None => true,
                // the earlier candidate is the GA pick, the later one the
                // all-inputs baseline: keep the baseline unless the GA pick
                // was clearly (20%) better, not just within test-set noise
                Some((best, _)) => best.best_test_mse >= 0.8 * report.best_test_mse,
            };
            if better {
                chosen = Some((report, genome));
            }
        }
        let (report, genome) = chosen.expect("at least one candidate genome");
        (report, Some(genome.mask_string()))
    } else {
        let report = train(&split.train, &split.test, ladder.num_classes, &nn_cfg)
            .map_err(net_err("train"))?;
        (report, None)
    };
    write_file(&config.out_dir, "network.txt", &serialize_network(&report.network))?;
    write_file(&config.out_dir, "mse_history.csv", &report.mse_history_csv())?;

    // blind test
    let (results, summary) = blind_test(&report.network, &split.blind).map_err(eval_err("blind-test"))?;
    write_file(&config.out_dir, "blind_plot.csv", &emit_plot_data(&results))?;
    write_file(&config.out_dir, "summary.csv", &summary.to_csv())?;
    let mut text = summary.to_text(ladder.num_classes);
    if let Some(mask) = &best_mask {
        text.push_str(&format!("selected inputs:    {mask}\n"));
    }
    text.push_str(&format!("best epoch:         {}\n", report.best_epoch));
    text.push_str(&format!("best test MSE:      {}\n", report.best_test_mse));
    write_file(&config.out_dir, "summary.txt", &text)?;

    Ok(RunSummary {
        dataset_size: dataset.len(),
        train_size: split.train.len(),
        test_size: split.test.len(),
        blind_size: split.blind.len(),
        best_mask,
        best_epoch: report.best_epoch,
        best_test_mse: report.best_test_mse,
        blind_mse: summary.blind_mse,
        misclassifications: summary.misclassifications,
        accuracy: summary.accuracy,
    })
}

/// Restrict a split to the variables a genome selects (used by `evolve`).
pub fn restrict_split(split: &SplitDataset, genome: &Genome) -> SplitDataset {
    let selected = genome.selected_variables(&split.train.variables);
    SplitDataset {
        train: split.train.with_variables(selected.clone()),
        test: split.test.with_variables(selected.clone()),
        blind: split.blind.with_variables(selected),
    }
}
