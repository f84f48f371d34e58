//! Genetic search over input-variable subsets.
//!
//! A genome is a bitmask over the ladder's variables. Fitness trains a
//! network on the train/test splits restricted to the masked variables and
//! returns the negated best test MSE, so higher is better and the blind set
//! never influences selection. The training seed is derived from the mask,
//! which makes fitness a pure function of the genome: evaluations are
//! memoized and may run in parallel with bit-identical results.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::example_gen::SplitDataset;
use crate::neural_net::{train, NetError, TrainConfig};

#[derive(Debug, Error)]
pub enum GaError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("invalid GA config: {0}")]
    BadConfig(String),
    #[error("genome must select at least one variable")]
    EmptyGenome,
    #[error("genome length {genome} does not match variable count {variables}")]
    LengthMismatch { genome: usize, variables: usize },
}

/// Input-variable bitmask; bit i selects variable i of the dataset.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Genome {
    mask: Vec<bool>,
}

impl Genome {
    pub fn new(mask: Vec<bool>) -> Result<Self, GaError> {
        if !mask.iter().any(|&b| b) {
            return Err(GaError::EmptyGenome);
        }
        Ok(Self { mask })
    }

    pub fn all_ones(n: usize) -> Self {
        Self {
            mask: vec![true; n],
        }
    }

    pub fn bits(&self) -> &[bool] {
        &self.mask
    }

    pub fn ones(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    /// Mask as a 0/1 string in variable order.
    pub fn mask_string(&self) -> String {
        self.mask.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    pub fn selected_variables(&self, variables: &[String]) -> Vec<String> {
        variables
            .iter()
            .zip(&self.mask)
            .filter(|(_, &b)| b)
            .map(|(v, _)| v.clone())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaConfig {
    pub population_size: usize,
    pub generations: usize,
    pub tournament_size: usize,
    pub crossover_rate: f64,
    /// Per-bit mutation probability; `None` means 1/n.
    pub mutation_rate: Option<f64>,
    pub elitism_count: usize,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 12,
            generations: 10,
            tournament_size: 2,
            crossover_rate: 0.9,
            mutation_rate: None,
            elitism_count: 1,
            seed: 0,
        }
    }
}

impl GaConfig {
    fn validate(&self) -> Result<(), GaError> {
        if self.population_size < 2 {
            return Err(GaError::BadConfig("population_size must be >= 2".to_string()));
        }
        if self.elitism_count >= self.population_size {
            return Err(GaError::BadConfig(
                "elitism_count must be smaller than population_size".to_string(),
            ));
        }
        if self.tournament_size == 0 {
            return Err(GaError::BadConfig("tournament_size must be >= 1".to_string()));
        }
        for (name, rate) in [
            ("crossover_rate", Some(self.crossover_rate)),
            ("mutation_rate", self.mutation_rate),
        ] {
            if let Some(r) = rate {
                if !(0.0..=1.0).contains(&r) {
                    return Err(GaError::BadConfig(format!("{name} must be in [0,1]")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub best_mask: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaReport {
    pub best_genome: Genome,
    pub best_fitness: f64,
    pub generations: Vec<GenerationStats>,
    /// Every mask ever evaluated, with its cached fitness.
    pub evaluations: BTreeMap<Vec<bool>, f64>,
}

impl GaReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("generation,best_fitness,mean_fitness,best_mask\n");
        for g in &self.generations {
            out.push_str(&format!(
                "{},{},{},{}\n",
                g.generation, g.best_fitness, g.mean_fitness, g.best_mask
            ));
        }
        out
    }
}

/// Deterministic per-genome training seed (FNV-1a over the base seed and the
/// mask bits), keeping fitness a pure function of the mask.
pub fn derive_seed(base: u64, mask: &[bool]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    let mut mix = |byte: u8| {
        h ^= byte as u64;
        h = h.wrapping_mul(0x100000001b3);
    };
    for b in base.to_le_bytes() {
        mix(b);
    }
    for &bit in mask {
        mix(if bit { 1 } else { 0 });
    }
    h
}

/// Train on the genome-restricted inputs and return the negated best test
/// MSE. The blind split is never touched.
pub fn fitness(genome: &Genome, split: &SplitDataset, nn_cfg: &TrainConfig) -> Result<f64, GaError> {
    let variables = &split.train.variables;
    if genome.bits().len() != variables.len() {
        return Err(GaError::LengthMismatch {
            genome: genome.bits().len(),
            variables: variables.len(),
        });
    }
    let selected = genome.selected_variables(variables);
    let train_set = split.train.with_variables(selected.clone());
    let test_set = split.test.with_variables(selected);
    let num_classes = num_classes_of(split);
    let cfg = TrainConfig {
        seed: derive_seed(nn_cfg.seed, genome.bits()),
        ..nn_cfg.clone()
    };
    let report = train(&train_set, &test_set, num_classes, &cfg)?;
    Ok(-report.best_test_mse)
}

fn num_classes_of(split: &SplitDataset) -> usize {
    split
        .train
        .records
        .iter()
        .chain(&split.test.records)
        .map(|lr| lr.label)
        .max()
        .unwrap_or(2)
        .max(2)
}

fn repair(mask: &mut [bool], rng: &mut ChaCha8Rng) {
    if !mask.iter().any(|&b| b) {
        let i = rng.random_range(0..mask.len());
        mask[i] = true;
    }
}

fn tournament<'a>(
    scored: &'a [(Genome, f64)],
    size: usize,
    rng: &mut ChaCha8Rng,
) -> &'a Genome {
    let mut best: Option<usize> = None;
    for _ in 0..size {
        let i = rng.random_range(0..scored.len());
        best = Some(match best {
            None => i,
            Some(b) => {
                // higher fitness wins, lower index on ties
                if scored[i].1 > scored[b].1 {
                    i
                } else {
                    b
                }
            }
        });
    }
    &scored[best.unwrap()].0
}

/// Evolve input masks with elitism, tournament selection, uniform crossover
/// and per-bit mutation. Fitness values are memoized by mask; the unevaluated
/// masks of each generation are trained in parallel.
pub fn optimize_inputs(
    split: &SplitDataset,
    ga: &GaConfig,
    nn_cfg: &TrainConfig,
) -> Result<GaReport, GaError> {
    ga.validate()?;
    let n = split.train.variables.len();
    if n == 0 {
        return Err(GaError::EmptyGenome);
    }
    let mutation_rate = ga.mutation_rate.unwrap_or(1.0 / n as f64);
    let mut rng = ChaCha8Rng::seed_from_u64(ga.seed);

    let mut population: Vec<Genome> = (0..ga.population_size)
        .map(|_| {
            let mut mask: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
            repair(&mut mask, &mut rng);
            Genome { mask }
        })
        .collect();

    let mut memo: BTreeMap<Vec<bool>, f64> = BTreeMap::new();
    let mut stats = Vec::new();

    for generation in 1..=ga.generations {
        // evaluate the masks this generation introduces, in parallel
        let mut pending: Vec<Vec<bool>> = population
            .iter()
            .map(|g| g.mask.clone())
            .filter(|m| !memo.contains_key(m))
            .collect();
        pending.sort();
        pending.dedup();
        let results: Vec<(Vec<bool>, f64)> = pending
            .into_par_iter()
            .map(|mask| {
                let genome = Genome { mask: mask.clone() };
                fitness(&genome, split, nn_cfg).map(|f| (mask, f))
            })
            .collect::<Result<_, _>>()?;
        memo.extend(results);

        let mut scored: Vec<(Genome, f64)> = population
            .iter()
            .map(|g| (g.clone(), memo[&g.mask]))
            .collect();
        // rank: fitness descending, mask ascending on ties
        scored.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap()
                .then_with(|| a.0.mask.cmp(&b.0.mask))
        });

        let best_fitness = scored[0].1;
        let mean_fitness =
            scored.iter().map(|(_, f)| f).sum::<f64>() / scored.len() as f64;
        stats.push(GenerationStats {
            generation,
            best_fitness,
            mean_fitness,
            best_mask: scored[0].0.mask_string(),
        });

        if generation == ga.generations {
            break;
        }

        let mut next: Vec<Genome> = scored[..ga.elitism_count]
            .iter()
            .map(|(g, _)| g.clone())
            .collect();
        while next.len() < ga.population_size {
            let p1 = tournament(&scored, ga.tournament_size, &mut rng).clone();
            let p2 = tournament(&scored, ga.tournament_size, &mut rng).clone();
            let (mut c1, mut c2) = if rng.random_range(0.0..1.0) < ga.crossover_rate {
                let mut a = p1.mask.clone();
                let mut b = p2.mask.clone();
                for i in 0..n {
                    if rng.random_bool(0.5) {
                        std::mem::swap(&mut a[i], &mut b[i]);
                    }
                }
                (a, b)
            } else {
                (p1.mask.clone(), p2.mask.clone())
            };
            for child in [&mut c1, &mut c2] {
                for bit in child.iter_mut() {
                    if rng.random_range(0.0..1.0) < mutation_rate {
                        *bit = !*bit;
                    }
                }
                repair(child, &mut rng);
            }
            next.push(Genome { mask: c1 });
            if next.len() < ga.population_size {
                next.push(Genome { mask: c2 });
            }
        }
        population = next;
    }

    let (best_mask, best_fitness) = memo
        .iter()
        .map(|(m, &f)| (m.clone(), f))
        .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then_with(|| b.0.cmp(&a.0)))
        .unwrap();
    Ok(GaReport {
        best_genome: Genome { mask: best_mask },
        best_fitness,
        generations: stats,
        evaluations: memo,
    })
}
