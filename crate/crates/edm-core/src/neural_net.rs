//! Feed-forward network trained from scratch by per-record backpropagation.
//!
//! Inputs are min/max normalized from the training split, the class label is
//! regressed as a single scalar scaled to [0,1], and every non-input unit is
//! logistic. The classic hard threshold (fire iff the weighted input sum
//! exceeds T) is smoothed as `logistic(sum + b)` with `b = -T`; the hard
//! predicate is kept as the [`fires`] diagnostic. Training keeps the weight
//! snapshot with the lowest test-set MSE and stops early once the test MSE
//! has not improved for `patience` epochs.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::example_gen::Dataset;
use crate::rule_model::{DataRecord, LadderError};

#[derive(Debug, Error)]
pub enum NetError {
    #[error(transparent)]
    Ladder(#[from] LadderError),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("training variable `{0}` is constant; the generated dataset is degenerate")]
    ConstantVariable(String),
    #[error("training diverged: non-finite loss at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("network file line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid config: {0}")]
    BadConfig(String),
}

pub fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// The hard threshold predicate: does the unit fire, i.e. is
/// `x1*w1 + ... + xn*wn > T`?
pub fn fires(inputs: &[f64], weights: &[f64], threshold: f64) -> bool {
    inputs.iter().zip(weights).map(|(x, w)| x * w).sum::<f64>() > threshold
}

/// Per-variable (min, max) from the training split plus the class count for
/// target scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationParams {
    /// (variable, min, max) in network input order.
    pub per_var: Vec<(String, f64, f64)>,
    pub num_classes: usize,
}

impl NormalizationParams {
    /// Class `k` of `num_classes` as a scalar target in [0,1].
    pub fn scaled_target(&self, label: usize) -> f64 {
        if self.num_classes <= 1 {
            0.0
        } else {
            (label as f64 - 1.0) / (self.num_classes as f64 - 1.0)
        }
    }
}

/// Fit min/max normalization on a training split.
pub fn normalize_fit(train: &Dataset, num_classes: usize) -> Result<NormalizationParams, NetError> {
    if train.is_empty() {
        return Err(NetError::EmptyDataset);
    }
    let mut per_var = Vec::with_capacity(train.variables.len());
    for name in &train.variables {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for lr in &train.records {
            let v = lr.record.get(name)?;
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if lo == hi {
            return Err(NetError::ConstantVariable(name.clone()));
        }
        per_var.push((name.clone(), lo, hi));
    }
    Ok(NormalizationParams {
        per_var,
        num_classes,
    })
}

/// Map a record to the normalized input vector, clamped to [0,1].
pub fn normalize_apply(params: &NormalizationParams, record: &DataRecord) -> Result<Vec<f64>, NetError> {
    params
        .per_var
        .iter()
        .map(|(name, lo, hi)| {
            let v = record.get(name)?;
            Ok(((v - lo) / (hi - lo)).clamp(0.0, 1.0))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    /// Input variable names, in input order.
    pub variables: Vec<String>,
    /// [n_in, hidden sizes..., 1]
    pub layer_sizes: Vec<usize>,
    /// weights[layer][unit][input]
    pub weights: Vec<Vec<Vec<f64>>>,
    /// biases[layer][unit]
    pub biases: Vec<Vec<f64>>,
    pub norm: NormalizationParams,
}

impl Network {
    /// Forward pass on normalized inputs, returning every layer's
    /// activations (layer 0 is the input itself).
    fn activations(&self, input: Vec<f64>) -> Vec<Vec<f64>> {
        let mut acts = vec![input];
        for (lw, lb) in self.weights.iter().zip(&self.biases) {
            let prev = acts.last().unwrap();
            let next: Vec<f64> = lw
                .iter()
                .zip(lb)
                .map(|(w, b)| {
                    logistic(w.iter().zip(prev).map(|(wi, xi)| wi * xi).sum::<f64>() + b)
                })
                .collect();
            acts.push(next);
        }
        acts
    }

    /// Network output in (0,1) for a record.
    pub fn forward(&self, record: &DataRecord) -> Result<f64, NetError> {
        let x = normalize_apply(&self.norm, record)?;
        Ok(self.activations(x).last().unwrap()[0])
    }
}

/// Mean squared error between network outputs and scaled targets.
pub fn loss_mse(net: &Network, dataset: &Dataset) -> Result<f64, NetError> {
    if dataset.is_empty() {
        return Err(NetError::EmptyDataset);
    }
    let mut sum = 0.0;
    for lr in &dataset.records {
        let r = net.forward(&lr.record)? - net.norm.scaled_target(lr.label);
        sum += r * r;
    }
    Ok(sum / dataset.len() as f64)
}

/// Gradient of a single record's squared error, shaped like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<Vec<f64>>>,
    pub biases: Vec<Vec<f64>>,
}

/// Exact gradient of `(forward(record) - target)^2` w.r.t. every weight and
/// bias, by reverse-mode chain rule.
pub fn backprop_gradient(
    net: &Network,
    record: &DataRecord,
    label: usize,
) -> Result<Gradients, NetError> {
    let x = normalize_apply(&net.norm, record)?;
    let acts = net.activations(x);
    let n_layers = net.weights.len();
    let output = acts[n_layers][0];
    let target = net.norm.scaled_target(label);

    // delta[l][j] = d(error)/d(preactivation of unit j in layer l)
    let mut deltas: Vec<Vec<f64>> = vec![Vec::new(); n_layers];
    deltas[n_layers - 1] = vec![2.0 * (output - target) * output * (1.0 - output)];
    for l in (0..n_layers - 1).rev() {
        let next = &net.weights[l + 1];
        deltas[l] = (0..net.layer_sizes[l + 1])
            .map(|j| {
                let y = acts[l + 1][j];
                let upstream: f64 = next
                    .iter()
                    .zip(&deltas[l + 1])
                    .map(|(w, d)| w[j] * d)
                    .sum();
                upstream * y * (1.0 - y)
            })
            .collect();
    }

    let weights = (0..n_layers)
        .map(|l| {
            deltas[l]
                .iter()
                .map(|d| acts[l].iter().map(|a| d * a).collect())
                .collect()
        })
        .collect();
    let biases = deltas;
    Ok(Gradients { weights, biases })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub hidden_layers: Vec<usize>,
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            max_epochs: 2000,
            patience: 100,
            hidden_layers: vec![8],
            init_scale: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub network: Network,
    pub train_mse_history: Vec<f64>,
    pub test_mse_history: Vec<f64>,
    /// 1-based epoch whose weights the returned network carries.
    pub best_epoch: usize,
    pub best_test_mse: f64,
    pub train_mse_at_best: f64,
}

impl TrainReport {
    pub fn mse_history_csv(&self) -> String {
        let mut out = String::from("epoch,train_mse,test_mse\n");
        for (i, (tr, te)) in self
            .train_mse_history
            .iter()
            .zip(&self.test_mse_history)
            .enumerate()
        {
            out.push_str(&format!("{},{},{}\n", i + 1, tr, te));
        }
        out
    }
}

fn init_network(
    variables: Vec<String>,
    hidden: &[usize],
    norm: NormalizationParams,
    init_scale: f64,
    rng: &mut ChaCha8Rng,
) -> Network {
    let mut layer_sizes = vec![variables.len()];
    layer_sizes.extend_from_slice(hidden);
    layer_sizes.push(1);
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for l in 1..layer_sizes.len() {
        let fan_in = layer_sizes[l - 1];
        let units = layer_sizes[l];
        weights.push(
            (0..units)
                .map(|_| {
                    (0..fan_in)
                        .map(|_| rng.random_range(-init_scale..init_scale))
                        .collect()
                })
                .collect(),
        );
        biases.push(
            (0..units)
                .map(|_| rng.random_range(-init_scale..init_scale))
                .collect(),
        );
    }
    Network {
        variables,
        layer_sizes,
        weights,
        biases,
        norm,
    }
}

/// Train by per-record gradient descent with test-set cross validation.
/// Returns the weight snapshot from the best test-MSE epoch.
pub fn train(
    train: &Dataset,
    test: &Dataset,
    num_classes: usize,
    cfg: &TrainConfig,
) -> Result<TrainReport, NetError> {
    if train.is_empty() || test.is_empty() {
        return Err(NetError::EmptyDataset);
    }
    if train.variables != test.variables {
        return Err(NetError::SchemaMismatch(
            "train and test variable lists differ".to_string(),
        ));
    }
    if cfg.learning_rate <= 0.0 || cfg.init_scale <= 0.0 || cfg.max_epochs == 0 {
        return Err(NetError::BadConfig(
            "learning_rate, init_scale and max_epochs must be positive".to_string(),
        ));
    }
    if cfg.hidden_layers.iter().any(|&h| h == 0) {
        return Err(NetError::BadConfig("hidden layer sizes must be positive".to_string()));
    }

    let norm = normalize_fit(train, num_classes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = init_network(
        train.variables.clone(),
        &cfg.hidden_layers,
        norm,
        cfg.init_scale,
        &mut rng,
    );

    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut train_hist = Vec::new();
    let mut test_hist = Vec::new();
    let mut best: Option<(usize, f64, f64, Network)> = None;
    let mut stale = 0usize;

    for epoch in 1..=cfg.max_epochs {
        use rand::seq::SliceRandom;
        order.shuffle(&mut rng);
        for &i in &order {
            let lr = &train.records[i];
            let g = backprop_gradient(&net, &lr.record, lr.label)?;
            for (lw, gw) in net.weights.iter_mut().zip(&g.weights) {
                for (uw, gu) in lw.iter_mut().zip(gw) {
                    for (w, gg) in uw.iter_mut().zip(gu) {
                        *w -= cfg.learning_rate * gg;
                    }
                }
            }
            for (lb, gb) in net.biases.iter_mut().zip(&g.biases) {
                for (b, gg) in lb.iter_mut().zip(gb) {
                    *b -= cfg.learning_rate * gg;
                }
            }
        }
        let train_mse = loss_mse(&net, train)?;
        let test_mse = loss_mse(&net, test)?;
        if !train_mse.is_finite() || !test_mse.is_finite() {
            return Err(NetError::Diverged { epoch });
        }
        train_hist.push(train_mse);
        test_hist.push(test_mse);
        let improved = best.as_ref().map_or(true, |(_, b, _, _)| test_mse < *b);
        if improved {
            best = Some((epoch, test_mse, train_mse, net.clone()));
            stale = 0;
        } else {
            stale += 1;
            if stale > cfg.patience {
                break;
            }
        }
    }

    let (best_epoch, best_test_mse, train_mse_at_best, network) = best.unwrap();
    Ok(TrainReport {
        network,
        train_mse_history: train_hist,
        test_mse_history: test_hist,
        best_epoch,
        best_test_mse,
        train_mse_at_best,
    })
}

// ---------------------------------------------------------------------------
// Versioned text serialization
// ---------------------------------------------------------------------------

const FORMAT_TAG: &str = "edm-network v1";

/// Serialize a network to versioned UTF-8 text. Floating-point values use
/// shortest-round-trip formatting, so [`parse_network`] recovers them
/// exactly.
pub fn serialize_network(net: &Network) -> String {
    let mut out = String::new();
    out.push_str(FORMAT_TAG);
    out.push('\n');
    out.push_str(&format!("classes: {}\n", net.norm.num_classes));
    out.push_str(&format!("variables: {}\n", net.variables.join(",")));
    out.push_str(&format!(
        "layers: {}\n",
        net.layer_sizes
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(",")
    ));
    for (name, lo, hi) in &net.norm.per_var {
        out.push_str(&format!("norm: {name},{lo},{hi}\n"));
    }
    for (l, (lw, lb)) in net.weights.iter().zip(&net.biases).enumerate() {
        for (u, (uw, b)) in lw.iter().zip(lb).enumerate() {
            let ws: Vec<String> = uw.iter().map(|w| format!("{w}")).collect();
            out.push_str(&format!("unit: {},{},{},{}\n", l + 1, u + 1, ws.join(","), b));
        }
    }
    out
}

pub fn parse_network(text: &str) -> Result<Network, NetError> {
    let err = |line: usize, msg: &str| NetError::Parse {
        line,
        msg: msg.to_string(),
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == FORMAT_TAG => {}
        _ => return Err(err(1, "expected `edm-network v1` header")),
    }
    let mut num_classes = None;
    let mut variables: Vec<String> = Vec::new();
    let mut layer_sizes: Vec<usize> = Vec::new();
    let mut per_var: Vec<(String, f64, f64)> = Vec::new();
    let mut units: Vec<(usize, usize, Vec<f64>, f64)> = Vec::new();

    for (lineno, raw) in lines {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let n = lineno + 1;
        if let Some(rest) = line.strip_prefix("classes:") {
            num_classes = Some(
                rest.trim()
                    .parse::<usize>()
                    .map_err(|_| err(n, "bad class count"))?,
            );
        } else if let Some(rest) = line.strip_prefix("variables:") {
            variables = rest.trim().split(',').map(|s| s.trim().to_string()).collect();
        } else if let Some(rest) = line.strip_prefix("layers:") {
            layer_sizes = rest
                .trim()
                .split(',')
                .map(|s| s.trim().parse::<usize>().map_err(|_| err(n, "bad layer size")))
                .collect::<Result<_, _>>()?;
        } else if let Some(rest) = line.strip_prefix("norm:") {
            let fields: Vec<&str> = rest.trim().split(',').collect();
            if fields.len() != 3 {
                return Err(err(n, "expected `norm: NAME,min,max`"));
            }
            let lo = fields[1].parse().map_err(|_| err(n, "bad norm min"))?;
            let hi = fields[2].parse().map_err(|_| err(n, "bad norm max"))?;
            per_var.push((fields[0].to_string(), lo, hi));
        } else if let Some(rest) = line.strip_prefix("unit:") {
            let fields: Vec<&str> = rest.trim().split(',').collect();
            if fields.len() < 4 {
                return Err(err(n, "expected `unit: layer,unit,w...,bias`"));
            }
            let l: usize = fields[0].parse().map_err(|_| err(n, "bad layer index"))?;
            let u: usize = fields[1].parse().map_err(|_| err(n, "bad unit index"))?;
            let mut vals: Vec<f64> = fields[2..]
                .iter()
                .map(|f| f.parse().map_err(|_| err(n, "bad weight value")))
                .collect::<Result<_, _>>()?;
            let bias = vals.pop().unwrap();
            units.push((l, u, vals, bias));
        } else {
            return Err(err(n, "unrecognized line"));
        }
    }

    let num_classes = num_classes.ok_or_else(|| err(0, "missing `classes:`"))?;
    if layer_sizes.len() < 2 || *layer_sizes.last().unwrap() != 1 {
        return Err(err(0, "layers must end with a single output unit"));
    }
    if variables.len() != layer_sizes[0] || per_var.len() != layer_sizes[0] {
        return Err(err(0, "variable and norm counts must match the input layer"));
    }
    let mut weights: Vec<Vec<Vec<f64>>> = (1..layer_sizes.len())
        .map(|l| vec![Vec::new(); layer_sizes[l]])
        .collect();
    let mut biases: Vec<Vec<f64>> = (1..layer_sizes.len())
        .map(|l| vec![0.0; layer_sizes[l]])
        .collect();
    for (l, u, ws, b) in units {
        if l == 0 || l >= layer_sizes.len() || u == 0 || u > layer_sizes[l] {
            return Err(err(0, "unit index out of range"));
        }
        if ws.len() != layer_sizes[l - 1] {
            return Err(err(0, "unit weight count does not match previous layer"));
        }
        weights[l - 1][u - 1] = ws;
        biases[l - 1][u - 1] = b;
    }
    if weights.iter().flatten().any(|u| u.is_empty()) {
        return Err(err(0, "missing unit line"));
    }
    Ok(Network {
        variables,
        layer_sizes,
        weights,
        biases,
        norm: NormalizationParams {
            per_var,
            num_classes,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::example_gen::{
        generate_covering_set, generate_uniform, read_ranges_csv, split_dataset, Dataset,
        LabeledRecord,
    };
    use crate::rule_model::parse_ladder;

    fn tiny_net(variables: Vec<String>, hidden: &[usize], seed: u64, num_classes: usize) -> Network {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let per_var = variables.iter().map(|v| (v.clone(), 0.0, 1.0)).collect();
        init_network(
            variables,
            hidden,
            NormalizationParams {
                per_var,
                num_classes,
            },
            0.5,
            &mut rng,
        )
    }

    fn record(pairs: &[(&str, f64)]) -> DataRecord {
        DataRecord::from_pairs(pairs.iter().map(|&(k, v)| (k, v)))
    }

    #[test]
    fn normalization_endpoints_and_clamp() {
        let records = vec![
            LabeledRecord {
                record: record(&[("PDB", 460.0)]),
                label: 1,
            },
            LabeledRecord {
                record: record(&[("PDB", 700000.0)]),
                label: 3,
            },
        ];
        let train = Dataset::new(vec!["PDB".to_string()], records);
        let params = normalize_fit(&train, 3).unwrap();
        let at = |v: f64| normalize_apply(&params, &record(&[("PDB", v)])).unwrap()[0];
        assert_eq!(at(460.0), 0.0);
        assert_eq!(at(700000.0), 1.0);
        // blind value below the train minimum clamps to 0
        assert_eq!(at(100.0), 0.0);
        assert_eq!(params.scaled_target(1), 0.0);
        assert_eq!(params.scaled_target(2), 0.5);
        assert_eq!(params.scaled_target(3), 1.0);
    }

    #[test]
    fn constant_variable_is_rejected() {
        let records = vec![
            LabeledRecord {
                record: record(&[("X", 5.0)]),
                label: 1,
            },
            LabeledRecord {
                record: record(&[("X", 5.0)]),
                label: 2,
            },
        ];
        let train = Dataset::new(vec!["X".to_string()], records);
        assert!(matches!(
            normalize_fit(&train, 2),
            Err(NetError::ConstantVariable(_))
        ));
    }

    #[test]
    fn zero_network_outputs_half() {
        let mut net = tiny_net(vec!["A".to_string(), "B".to_string()], &[3], 1, 3);
        for lw in &mut net.weights {
            for uw in lw {
                uw.iter_mut().for_each(|w| *w = 0.0);
            }
        }
        for lb in &mut net.biases {
            lb.iter_mut().for_each(|b| *b = 0.0);
        }
        for (a, b) in [(0.0, 0.0), (0.3, 0.9), (1.0, 1.0)] {
            assert_eq!(net.forward(&record(&[("A", a), ("B", b)])).unwrap(), 0.5);
        }
    }

    #[test]
    fn single_unit_fires_above_threshold() {
        // inputs (1,1), weights (0.6, 0.5): weighted sum 1.1 exceeds T = 1
        assert!(fires(&[1.0, 1.0], &[0.6, 0.5], 1.0));
        assert!(!fires(&[1.0, 0.0], &[0.6, 0.5], 1.0));
        // the smoothed unit agrees: pre-activation 0.1 > 0 gives output > 0.5
        let net = Network {
            variables: vec!["A".to_string(), "B".to_string()],
            layer_sizes: vec![2, 1],
            weights: vec![vec![vec![0.6, 0.5]]],
            biases: vec![vec![-1.0]],
            norm: NormalizationParams {
                per_var: vec![("A".to_string(), 0.0, 1.0), ("B".to_string(), 0.0, 1.0)],
                num_classes: 2,
            },
        };
        let out = net.forward(&record(&[("A", 1.0), ("B", 1.0)])).unwrap();
        assert!(out > 0.5);
        assert!((out - logistic(0.1)).abs() < 1e-15);
    }

    #[test]
    fn forward_stays_inside_open_unit_interval() {
        for seed in 0..20 {
            let net = tiny_net(vec!["A".to_string(), "B".to_string()], &[4, 3], seed, 3);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
            for _ in 0..50 {
                let out = net
                    .forward(&record(&[
                        ("A", rng.random_range(0.0..1.0)),
                        ("B", rng.random_range(0.0..1.0)),
                    ]))
                    .unwrap();
                assert!(out > 0.0 && out < 1.0);
            }
        }
    }

    #[test]
    fn mse_of_constant_half_net_on_zero_targets() {
        let mut net = tiny_net(vec!["X".to_string()], &[2], 3, 3);
        for lw in &mut net.weights {
            for uw in lw {
                uw.iter_mut().for_each(|w| *w = 0.0);
            }
        }
        for lb in &mut net.biases {
            lb.iter_mut().for_each(|b| *b = 0.0);
        }
        let records = (0..4)
            .map(|i| LabeledRecord {
                record: record(&[("X", i as f64 / 4.0)]),
                label: 1, // scaled target 0.0
            })
            .collect();
        let ds = Dataset::new(vec!["X".to_string()], records);
        assert!((loss_mse(&net, &ds).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn mse_matches_hand_computed_residuals() {
        // single logistic unit: output = logistic(0.8*x - 0.2)
        let net = Network {
            variables: vec!["X".to_string()],
            layer_sizes: vec![1, 1],
            weights: vec![vec![vec![0.8]]],
            biases: vec![vec![-0.2]],
            norm: NormalizationParams {
                per_var: vec![("X".to_string(), 0.0, 1.0)],
                num_classes: 3,
            },
        };
        let rows = [(0.1_f64, 1usize), (0.5, 2), (0.9, 3)];
        let records = rows
            .iter()
            .map(|&(x, label)| LabeledRecord {
                record: record(&[("X", x)]),
                label,
            })
            .collect();
        let ds = Dataset::new(vec!["X".to_string()], records);
        // independent arithmetic route
        let expected = rows
            .iter()
            .map(|&(x, label)| {
                let y = 1.0 / (1.0 + (-(0.8 * x - 0.2)).exp());
                let t = (label as f64 - 1.0) / 2.0;
                (y - t) * (y - t)
            })
            .sum::<f64>()
            / 3.0;
        assert!((loss_mse(&net, &ds).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn empty_dataset_loss_is_an_error() {
        let net = tiny_net(vec!["X".to_string()], &[2], 3, 2);
        let ds = Dataset::new(vec!["X".to_string()], Vec::new());
        assert!(matches!(loss_mse(&net, &ds), Err(NetError::EmptyDataset)));
    }

    #[test]
    fn gradient_is_zero_at_exact_fit() {
        // zero net outputs 0.5 which equals the scaled target of class 2/3
        let mut net = tiny_net(vec!["X".to_string()], &[2], 5, 3);
        for lw in &mut net.weights {
            for uw in lw {
                uw.iter_mut().for_each(|w| *w = 0.0);
            }
        }
        for lb in &mut net.biases {
            lb.iter_mut().for_each(|b| *b = 0.0);
        }
        let g = backprop_gradient(&net, &record(&[("X", 0.4)]), 2).unwrap();
        for lw in &g.weights {
            for uw in lw {
                for w in uw {
                    assert!(w.abs() < 1e-12);
                }
            }
        }
        for lb in &g.biases {
            for b in lb {
                assert!(b.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_input_kills_input_weight_gradients_only() {
        let net = tiny_net(vec!["X".to_string(), "Y".to_string()], &[3], 8, 2);
        let g = backprop_gradient(&net, &record(&[("X", 0.0), ("Y", 0.0)]), 1).unwrap();
        for uw in &g.weights[0] {
            for w in uw {
                assert_eq!(*w, 0.0);
            }
        }
        assert!(g.biases[0].iter().any(|b| b.abs() > 0.0));
    }

    /// Central finite differences over the single-record squared error.
    fn numeric_gradient(net: &Network, record: &DataRecord, label: usize) -> Gradients {
        let step = 1e-5;
        let loss = |n: &Network| {
            let y = n.forward(record).unwrap();
            let t = n.norm.scaled_target(label);
            (y - t) * (y - t)
        };
        let mut g = Gradients {
            weights: net.weights.clone(),
            biases: net.biases.clone(),
        };
        for l in 0..net.weights.len() {
            for u in 0..net.weights[l].len() {
                for i in 0..net.weights[l][u].len() {
                    let mut plus = net.clone();
                    plus.weights[l][u][i] += step;
                    let mut minus = net.clone();
                    minus.weights[l][u][i] -= step;
                    g.weights[l][u][i] = (loss(&plus) - loss(&minus)) / (2.0 * step);
                }
                let mut plus = net.clone();
                plus.biases[l][u] += step;
                let mut minus = net.clone();
                minus.biases[l][u] -= step;
                g.biases[l][u] = (loss(&plus) - loss(&minus)) / (2.0 * step);
            }
        }
        g
    }

    #[test]
    fn backprop_matches_finite_differences_on_100_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut checked = 0usize;
        for pair in 0..100u64 {
            let hidden: &[usize] = match pair % 3 {
                0 => &[4],
                1 => &[3, 2],
                _ => &[5],
            };
            let net = tiny_net(vec!["A".to_string(), "B".to_string(), "C".to_string()], hidden, pair, 3);
            let rec = record(&[
                ("A", rng.random_range(0.0..1.0)),
                ("B", rng.random_range(0.0..1.0)),
                ("C", rng.random_range(0.0..1.0)),
            ]);
            let label = 1 + (pair % 3) as usize;
            let exact = backprop_gradient(&net, &rec, label).unwrap();
            let numeric = numeric_gradient(&net, &rec, label);
            let mut check = |a: f64, b: f64| {
                let scale = a.abs().max(b.abs());
                if scale > 1e-8 {
                    assert!(
                        (a - b).abs() / scale < 1e-4,
                        "gradient mismatch: exact {a} vs numeric {b}"
                    );
                } else {
                    assert!((a - b).abs() < 1e-8);
                }
                checked += 1;
            };
            for l in 0..exact.weights.len() {
                for u in 0..exact.weights[l].len() {
                    for i in 0..exact.weights[l][u].len() {
                        check(exact.weights[l][u][i], numeric.weights[l][u][i]);
                    }
                    check(exact.biases[l][u], numeric.biases[l][u]);
                }
            }
        }
        assert!(checked > 1000);
    }

    fn separable_split() -> (Dataset, Dataset) {
        let ladder =
            parse_ladder("variables: X\nclasses: 2\nrule R: X >= 0 ? class 1 : class 2\n").unwrap();
        let ranges = read_ranges_csv("variable,low,high,integer\nX,-1,1,false\n").unwrap();
        let covering = generate_covering_set(&ladder, &ranges, 10, 7).unwrap();
        let mut dataset = covering.dataset;
        let extra = generate_uniform(&ladder, &ranges, 40 - dataset.len().min(40), 8).unwrap();
        dataset.records.extend(extra.records);
        let split = split_dataset(&dataset, (0.6, 0.2, 0.2), 3).unwrap();
        (split.train, split.test)
    }

    #[test]
    fn trains_linearly_separable_problem_to_low_mse() {
        let (train_set, test_set) = separable_split();
        let report = train(&train_set, &test_set, 2, &TrainConfig::default()).unwrap();
        let final_train_mse = *report.train_mse_history.last().unwrap();
        assert!(
            final_train_mse < 0.02,
            "expected MSE < 0.02, got {final_train_mse}"
        );
        assert!(report.train_mse_history.len() <= 2000);
    }

    #[test]
    fn training_is_deterministic() {
        let (train_set, test_set) = separable_split();
        let a = train(&train_set, &test_set, 2, &TrainConfig::default()).unwrap();
        let b = train(&train_set, &test_set, 2, &TrainConfig::default()).unwrap();
        assert_eq!(serialize_network(&a.network), serialize_network(&b.network));
        assert_eq!(a.train_mse_history, b.train_mse_history);
        assert_eq!(a.test_mse_history, b.test_mse_history);
        assert_eq!(a.best_epoch, b.best_epoch);
    }

    #[test]
    fn returned_network_has_minimum_test_mse() {
        let (train_set, test_set) = separable_split();
        let report = train(&train_set, &test_set, 2, &TrainConfig::default()).unwrap();
        let min = report
            .test_mse_history
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        assert_eq!(report.best_test_mse, min);
        assert_eq!(report.test_mse_history[report.best_epoch - 1], min);
        assert!((loss_mse(&report.network, &test_set).unwrap() - min).abs() < 1e-15);
    }

    #[test]
    fn zero_patience_stops_at_first_stale_epoch() {
        let (train_set, test_set) = separable_split();
        let cfg = TrainConfig {
            patience: 0,
            ..TrainConfig::default()
        };
        let report = train(&train_set, &test_set, 2, &cfg).unwrap();
        let n = report.test_mse_history.len();
        assert!(report.best_epoch <= n);
        // either max_epochs was hit while still improving, or the run ended
        // exactly one epoch after the best one
        assert!(n == 2000 || report.best_epoch == n - 1);
    }

    #[test]
    fn forward_ignores_record_key_order() {
        let net = tiny_net(vec!["A".to_string(), "B".to_string()], &[3], 21, 2);
        let r1 = record(&[("A", 0.2), ("B", 0.7)]);
        let r2 = record(&[("B", 0.7), ("A", 0.2)]);
        assert_eq!(net.forward(&r1).unwrap(), net.forward(&r2).unwrap());
    }

    #[test]
    fn network_serialization_round_trips_exactly() {
        let (train_set, test_set) = separable_split();
        let cfg = TrainConfig {
            max_epochs: 50,
            ..TrainConfig::default()
        };
        let report = train(&train_set, &test_set, 2, &cfg).unwrap();
        let text = serialize_network(&report.network);
        let back = parse_network(&text).unwrap();
        assert_eq!(back, report.network);
        assert_eq!(serialize_network(&back), text);
    }

    #[test]
    fn parse_network_rejects_bad_header() {
        assert!(matches!(
            parse_network("something else\n"),
            Err(NetError::Parse { line: 1, .. })
        ));
    }
}
