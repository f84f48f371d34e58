//! Blind testing: class-unit outputs, nearest-class rounding and
//! misclassification accounting.
//!
//! The network's scalar output in (0,1) is mapped affinely to class units
//! `1 + output * (num_classes - 1)`; a prediction within 0.5 class units of
//! the actual class rounds to it and is counted correct.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::example_gen::{Dataset, SplitOrigin};
use crate::neural_net::{NetError, Network};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("blind set is empty")]
    EmptyBlind,
    #[error("dataset is tagged {0:?}, not Blind; blind purity would be violated")]
    NotBlind(SplitOrigin),
    #[error("network input `{0}` is not a column of the blind set")]
    SchemaMismatch(String),
    #[error("output value is not finite")]
    NonFinite,
    #[error("plot csv line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Nearest class to a class-units value, clamped to `[1, num_classes]`;
/// exact .5 ties round toward the higher class.
pub fn round_to_class(output_class_units: f64, num_classes: usize) -> Result<usize, EvalError> {
    if !output_class_units.is_finite() {
        return Err(EvalError::NonFinite);
    }
    let k = (output_class_units + 0.5).floor();
    Ok((k.max(1.0) as usize).min(num_classes))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlindResult {
    pub raw_output: f64,
    pub class_units: f64,
    pub predicted: usize,
    pub actual: usize,
    pub within_band: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub n_blind: usize,
    pub misclassifications: usize,
    pub accuracy: f64,
    pub blind_mse: f64,
    /// (actual, predicted) -> count
    pub confusion: BTreeMap<(usize, usize), usize>,
}

impl EvalSummary {
    pub fn to_text(&self, num_classes: usize) -> String {
        let mut out = String::new();
        out.push_str(&format!("blind records:      {}\n", self.n_blind));
        out.push_str(&format!("misclassifications: {}\n", self.misclassifications));
        out.push_str(&format!("accuracy:           {}\n", self.accuracy));
        out.push_str(&format!("blind MSE:          {}\n", self.blind_mse));
        out.push_str("confusion (actual -> predicted: count):\n");
        for a in 1..=num_classes {
            for p in 1..=num_classes {
                if let Some(c) = self.confusion.get(&(a, p)) {
                    out.push_str(&format!("  {a} -> {p}: {c}\n"));
                }
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("key,value\n");
        out.push_str(&format!("n_blind,{}\n", self.n_blind));
        out.push_str(&format!("misclassifications,{}\n", self.misclassifications));
        out.push_str(&format!("accuracy,{}\n", self.accuracy));
        out.push_str(&format!("blind_mse,{}\n", self.blind_mse));
        for (&(a, p), &c) in &self.confusion {
            out.push_str(&format!("confusion_{a}_{p},{c}\n"));
        }
        out
    }
}

/// Pass a blind dataset through the network. The dataset must carry the
/// `Blind` origin tag; the split's provenance is the only guarantee that it
/// stayed unseen during training and GA selection.
pub fn blind_test(
    net: &Network,
    blind: &Dataset,
) -> Result<(Vec<BlindResult>, EvalSummary), EvalError> {
    if blind.origin != SplitOrigin::Blind {
        return Err(EvalError::NotBlind(blind.origin));
    }
    if blind.is_empty() {
        return Err(EvalError::EmptyBlind);
    }
    for v in &net.variables {
        if !blind.variables.contains(v) {
            return Err(EvalError::SchemaMismatch(v.clone()));
        }
    }
    let num_classes = net.norm.num_classes;
    let mut results = Vec::with_capacity(blind.len());
    let mut misclassifications = 0usize;
    let mut confusion: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut mse = 0.0;
    for lr in &blind.records {
        let raw = net.forward(&lr.record)?;
        let class_units = 1.0 + raw * (num_classes as f64 - 1.0);
        let predicted = round_to_class(class_units, num_classes)?;
        let within_band = (class_units - lr.label as f64).abs() < 0.5;
        if predicted != lr.label {
            misclassifications += 1;
        }
        *confusion.entry((lr.label, predicted)).or_default() += 1;
        let r = raw - net.norm.scaled_target(lr.label);
        mse += r * r;
        results.push(BlindResult {
            raw_output: raw,
            class_units,
            predicted,
            actual: lr.label,
            within_band,
        });
    }
    let n = blind.len();
    let summary = EvalSummary {
        n_blind: n,
        misclassifications,
        accuracy: 1.0 - misclassifications as f64 / n as f64,
        blind_mse: mse / n as f64,
        confusion,
    };
    Ok((results, summary))
}

/// Plot-ready CSV, one row per blind record in input order.
pub fn emit_plot_data(results: &[BlindResult]) -> String {
    let mut out =
        String::from("index,network_output_class_units,actual_class,predicted_class,within_band\n");
    for (i, r) in results.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            i + 1,
            r.class_units,
            r.actual,
            r.predicted,
            r.within_band
        ));
    }
    out
}

/// Inverse of [`emit_plot_data`] up to the fields the CSV carries
/// (`raw_output` is reconstructed from the class-units column).
pub fn parse_plot_data(text: &str, num_classes: usize) -> Result<Vec<BlindResult>, EvalError> {
    let mut results = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(EvalError::Parse {
                line: lineno + 1,
                msg: "expected 5 fields".to_string(),
            });
        }
        let bad = |msg: &str| EvalError::Parse {
            line: lineno + 1,
            msg: msg.to_string(),
        };
        let class_units: f64 = fields[1].parse().map_err(|_| bad("bad class-units value"))?;
        let actual: usize = fields[2].parse().map_err(|_| bad("bad actual class"))?;
        let predicted: usize = fields[3].parse().map_err(|_| bad("bad predicted class"))?;
        let within_band: bool = fields[4].parse().map_err(|_| bad("bad within_band flag"))?;
        results.push(BlindResult {
            raw_output: (class_units - 1.0) / (num_classes as f64 - 1.0),
            class_units,
            predicted,
            actual,
            within_band,
        });
    }
    Ok(results)
}
