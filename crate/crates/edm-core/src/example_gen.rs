//! Labeled example generation from a ladder and train/test/blind splitting.
//!
//! For every condition of every rule the generator produces records that
//! reach the rule with the condition satisfied and records that reach it
//! with the condition violated while the rule's other conditions hold
//! (MC/DC style). Values are drawn from per-variable ranges: the condition
//! boundary itself, boundary +/- delta, and uniform fill. Earlier rules are
//! passed by rejection sampling with a fixed attempt budget.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::rule_model::{
    classify, eval_condition, Action, Comparator, Condition, DataRecord, DecisionLadder,
    LadderError, Rhs,
};

/// Attempt budget per (rule, condition, case) before declaring it uncoverable.
const CASE_BUDGET: usize = 10_000;

#[derive(Debug, Error)]
pub enum GenError {
    #[error(transparent)]
    Ladder(#[from] LadderError),
    #[error("no range declared for variable `{0}`")]
    MissingRange(String),
    #[error("range for `{variable}` is invalid: low {low} must be < high {high} and both finite")]
    BadRange {
        variable: String,
        low: f64,
        high: f64,
    },
    #[error("k must be at least 1")]
    BadK,
    #[error("split fractions must be positive and sum to 1")]
    BadFractions,
    #[error("dataset too small: class {class} has {count} records, need at least 3 to give every split one")]
    TooSmallForSplit { class: usize, count: usize },
    #[error("csv line {line}: {msg}")]
    Csv { line: usize, msg: String },
    #[error("dataset is empty")]
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueRange {
    pub variable: String,
    pub low: f64,
    pub high: f64,
    pub integer_valued: bool,
}

impl ValueRange {
    fn validate(&self) -> Result<(), GenError> {
        if !(self.low.is_finite() && self.high.is_finite() && self.low < self.high) {
            return Err(GenError::BadRange {
                variable: self.variable.clone(),
                low: self.low,
                high: self.high,
            });
        }
        Ok(())
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.integer_valued {
            rng.random_range(self.low as i64..=self.high as i64) as f64
        } else {
            rng.random_range(self.low..self.high)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRecord {
    pub record: DataRecord,
    pub label: usize,
}

/// Which split a dataset came from. Blind purity is asserted on this tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitOrigin {
    Unsplit,
    Train,
    Test,
    Blind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub variables: Vec<String>,
    pub records: Vec<LabeledRecord>,
    pub origin: SplitOrigin,
}

impl Dataset {
    pub fn new(variables: Vec<String>, records: Vec<LabeledRecord>) -> Self {
        Self {
            variables,
            records,
            origin: SplitOrigin::Unsplit,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Same records, restricted variable view (for genome-masked training).
    pub fn with_variables(&self, variables: Vec<String>) -> Dataset {
        Dataset {
            variables,
            records: self.records.clone(),
            origin: self.origin,
        }
    }

    /// Dataset CSV: variable header plus final `class` column.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.variables.join(","));
        out.push_str(",class\n");
        for lr in &self.records {
            let mut fields: Vec<String> = Vec::with_capacity(self.variables.len() + 1);
            for v in &self.variables {
                fields.push(format!("{}", lr.record.values().get(v).copied().unwrap_or(f64::NAN)));
            }
            fields.push(format!("{}", lr.label));
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str, origin: SplitOrigin) -> Result<Dataset, GenError> {
        let (variables, rows) = parse_numeric_csv(text)?;
        let Some((class_pos, _)) = variables.iter().enumerate().find(|(_, v)| *v == "class") else {
            return Err(GenError::Csv {
                line: 1,
                msg: "missing `class` column".to_string(),
            });
        };
        let var_names: Vec<String> = variables
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != class_pos)
            .map(|(_, v)| v.clone())
            .collect();
        let mut records = Vec::with_capacity(rows.len());
        for (lineno, row) in rows.into_iter().enumerate() {
            let label = row[class_pos];
            if label.fract() != 0.0 || label < 1.0 {
                return Err(GenError::Csv {
                    line: lineno + 2,
                    msg: format!("class label `{label}` is not a positive integer"),
                });
            }
            let record = DataRecord::from_pairs(
                variables
                    .iter()
                    .zip(row.iter())
                    .filter(|(name, _)| name.as_str() != "class")
                    .map(|(name, v)| (name.clone(), *v)),
            );
            records.push(LabeledRecord {
                record,
                label: label as usize,
            });
        }
        Ok(Dataset {
            variables: var_names,
            records,
            origin,
        })
    }
}

/// Unlabeled records CSV (header of variable names, `class` column ignored
/// if present).
pub fn read_records_csv(text: &str) -> Result<(Vec<String>, Vec<DataRecord>), GenError> {
    let (header, rows) = parse_numeric_csv(text)?;
    let variables: Vec<String> = header.iter().filter(|h| h.as_str() != "class").cloned().collect();
    let records = rows
        .into_iter()
        .map(|row| {
            DataRecord::from_pairs(
                header
                    .iter()
                    .zip(row.iter())
                    .filter(|(name, _)| name.as_str() != "class")
                    .map(|(name, v)| (name.clone(), *v)),
            )
        })
        .collect();
    Ok((variables, records))
}

fn parse_numeric_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>), GenError> {
    let mut lines = text.lines().enumerate();
    let header: Vec<String> = match lines.next() {
        Some((_, h)) if !h.trim().is_empty() => {
            h.split(',').map(|s| s.trim().to_string()).collect()
        }
        _ => {
            return Err(GenError::Csv {
                line: 1,
                msg: "missing header row".to_string(),
            })
        }
    };
    let mut rows = Vec::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(|s| s.trim()).collect();
        if fields.len() != header.len() {
            return Err(GenError::Csv {
                line: lineno + 1,
                msg: format!("expected {} fields, found {}", header.len(), fields.len()),
            });
        }
        let mut row = Vec::with_capacity(fields.len());
        for f in fields {
            row.push(f.parse::<f64>().map_err(|_| GenError::Csv {
                line: lineno + 1,
                msg: format!("`{f}` is not a number"),
            })?);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(GenError::Empty);
    }
    Ok((header, rows))
}

/// Ranges file: CSV `variable,low,high,integer`.
pub fn read_ranges_csv(text: &str) -> Result<Vec<ValueRange>, GenError> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(|s| s.trim()).collect();
        if fields.len() != 4 {
            return Err(GenError::Csv {
                line: lineno + 1,
                msg: "expected `variable,low,high,integer`".to_string(),
            });
        }
        let parse = |f: &str| -> Result<f64, GenError> {
            f.parse().map_err(|_| GenError::Csv {
                line: lineno + 1,
                msg: format!("`{f}` is not a number"),
            })
        };
        let range = ValueRange {
            variable: fields[0].to_string(),
            low: parse(fields[1])?,
            high: parse(fields[2])?,
            integer_valued: matches!(fields[3], "true" | "1" | "yes"),
        };
        range.validate()?;
        out.push(range);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Coverage accounting
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionCoverage {
    pub rule: String,
    pub condition_index: usize,
    pub satisfy_count: usize,
    pub violate_count: usize,
    pub uncoverable: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CoverageReport {
    pub entries: Vec<ConditionCoverage>,
}

impl CoverageReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rule,condition_index,satisfy_count,violate_count,uncoverable\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                e.rule, e.condition_index, e.satisfy_count, e.violate_count, e.uncoverable
            ));
        }
        out
    }

    pub fn mark_uncoverable(&mut self, rule: &str, condition_index: usize) {
        for e in &mut self.entries {
            if e.rule == rule && e.condition_index == condition_index {
                e.uncoverable = true;
            }
        }
    }
}

/// Replay every record through the ladder, attributing satisfied/violated
/// status to each condition of each rule the record reaches.
pub fn coverage_report(dataset: &Dataset, ladder: &DecisionLadder) -> Result<CoverageReport, GenError> {
    let mut counts: Vec<Vec<(usize, usize)>> = ladder
        .rules
        .iter()
        .map(|r| vec![(0usize, 0usize); r.conditions.len()])
        .collect();
    for lr in &dataset.records {
        for (ri, rule) in ladder.rules.iter().enumerate() {
            let mut all_true = true;
            for (ci, cond) in rule.conditions.iter().enumerate() {
                if eval_condition(cond, &lr.record)? {
                    counts[ri][ci].0 += 1;
                } else {
                    counts[ri][ci].1 += 1;
                    all_true = false;
                }
            }
            let action = if all_true { rule.pass_action } else { rule.fail_action };
            match action {
                Action::Next => continue,
                Action::Class(_) => break,
            }
        }
    }
    let entries = ladder
        .rules
        .iter()
        .zip(counts)
        .flat_map(|(rule, per_cond)| {
            per_cond
                .into_iter()
                .enumerate()
                .map(move |(ci, (sat, vio))| ConditionCoverage {
                    rule: rule.name.clone(),
                    condition_index: ci,
                    satisfy_count: sat,
                    violate_count: vio,
                    uncoverable: false,
                })
        })
        .collect();
    Ok(CoverageReport { entries })
}

// ---------------------------------------------------------------------------
// Covering-set generation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct GeneratedSet {
    pub dataset: Dataset,
    /// (rule index, condition index) pairs where a satisfy or violate case
    /// produced zero records within the budget.
    pub uncoverable: BTreeSet<(usize, usize)>,
}

fn negate(cmp: Comparator) -> Comparator {
    match cmp {
        Comparator::Le => Comparator::Gt,
        Comparator::Lt => Comparator::Ge,
        Comparator::Ge => Comparator::Lt,
        Comparator::Gt => Comparator::Le,
        Comparator::Eq => Comparator::Ne,
        Comparator::Ne => Comparator::Eq,
    }
}

/// Draw a value uniformly from the part of `range` satisfying `cmp threshold`.
/// Used for the non-target conditions of a rule, which only need to hold —
/// keeping them away from their own boundaries isolates the case under test.
fn force_uniform(
    rng: &mut ChaCha8Rng,
    range: &ValueRange,
    cmp: Comparator,
    threshold: f64,
) -> Option<f64> {
    let candidate = match cmp {
        Comparator::Le | Comparator::Lt => {
            let hi = threshold.min(range.high);
            if hi <= range.low {
                return None;
            }
            rng.random_range(range.low..hi)
        }
        Comparator::Ge | Comparator::Gt => {
            let lo = threshold.max(range.low);
            if lo >= range.high {
                return None;
            }
            rng.random_range(lo..range.high)
        }
        Comparator::Eq => threshold,
        Comparator::Ne => range.sample(rng),
    };
    let candidate = if range.integer_valued {
        candidate.round()
    } else {
        candidate
    };
    if candidate < range.low || candidate > range.high || !candidate.is_finite() {
        return None;
    }
    if !cmp.apply(candidate, threshold) {
        return None;
    }
    Some(candidate)
}

fn force_value(
    rng: &mut ChaCha8Rng,
    range: &ValueRange,
    cmp: Comparator,
    threshold: f64,
    satisfied: bool,
    kind: u8,
) -> Option<f64> {
    let cmp = if satisfied { cmp } else { negate(cmp) };
    let span = range.high - range.low;
    let delta = if range.integer_valued {
        (0.01 * span).max(1.0).round()
    } else {
        (0.01 * span).max(1.0)
    };
    let candidate = match kind {
        // boundary value
        0 => match cmp {
            Comparator::Le | Comparator::Ge | Comparator::Eq => threshold,
            Comparator::Lt => threshold - delta,
            Comparator::Gt | Comparator::Ne => threshold + delta,
        },
        // boundary shifted one delta into the satisfying side
        1 => match cmp {
            Comparator::Le | Comparator::Lt => threshold - delta,
            Comparator::Ge | Comparator::Gt => threshold + delta,
            Comparator::Eq => threshold,
            Comparator::Ne => threshold - delta,
        },
        // uniform draw from the satisfying part of the range
        _ => match cmp {
            Comparator::Le | Comparator::Lt => {
                let hi = threshold.min(range.high);
                if hi <= range.low {
                    return None;
                }
                rng.random_range(range.low..hi)
            }
            Comparator::Ge | Comparator::Gt => {
                let lo = threshold.max(range.low);
                if lo >= range.high {
                    return None;
                }
                rng.random_range(lo..range.high)
            }
            Comparator::Eq => threshold,
            Comparator::Ne => range.sample(rng),
        },
    };
    let candidate = if range.integer_valued {
        candidate.round()
    } else {
        candidate
    };
    if candidate < range.low || candidate > range.high || !candidate.is_finite() {
        return None;
    }
    if !cmp.apply(candidate, threshold) {
        return None;
    }
    Some(candidate)
}

fn threshold_of(cond: &Condition, record: &DataRecord) -> Result<f64, LadderError> {
    Ok(match &cond.rhs {
        Rhs::Constant(c) => *c,
        Rhs::Scaled { scale, var } => scale * record.get(var)?,
    })
}

/// Does `record` reach rule `rule_idx`, i.e. does every earlier rule resolve
/// to `Next`?
fn reaches_rule(ladder: &DecisionLadder, record: &DataRecord, rule_idx: usize) -> Result<bool, LadderError> {
    for rule in &ladder.rules[..rule_idx] {
        let mut all_true = true;
        for cond in &rule.conditions {
            if !eval_condition(cond, record)? {
                all_true = false;
                break;
            }
        }
        let action = if all_true { rule.pass_action } else { rule.fail_action };
        if action != Action::Next {
            return Ok(false);
        }
    }
    Ok(true)
}

fn range_map<'a>(
    ladder: &DecisionLadder,
    ranges: &'a [ValueRange],
) -> Result<BTreeMap<String, &'a ValueRange>, GenError> {
    let mut map = BTreeMap::new();
    for r in ranges {
        r.validate()?;
        map.insert(r.variable.clone(), r);
    }
    for v in &ladder.variables {
        if !map.contains_key(&v.name) {
            return Err(GenError::MissingRange(v.name.clone()));
        }
    }
    Ok(map)
}

fn sample_record(
    ladder: &DecisionLadder,
    ranges: &BTreeMap<String, &ValueRange>,
    rng: &mut ChaCha8Rng,
) -> DataRecord {
    DataRecord::from_pairs(
        ladder
            .variables
            .iter()
            .map(|v| (v.name.clone(), ranges[&v.name].sample(rng))),
    )
}

/// Generate a condition-covering dataset: at least `k` records reaching each
/// rule with each condition satisfied and `k` with it violated (other
/// conditions of the rule held true), all labeled by the oracle.
pub fn generate_covering_set(
    ladder: &DecisionLadder,
    ranges: &[ValueRange],
    k: usize,
    seed: u64,
) -> Result<GeneratedSet, GenError> {
    if k == 0 {
        return Err(GenError::BadK);
    }
    let ranges = range_map(ladder, ranges)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records: Vec<LabeledRecord> = Vec::new();
    let mut uncoverable = BTreeSet::new();

    for (ri, rule) in ladder.rules.iter().enumerate() {
        for ci in 0..rule.conditions.len() {
            for case in [true, false] {
                let mut found = 0usize;
                for _ in 0..CASE_BUDGET {
                    if found >= k {
                        break;
                    }
                    let mut record = sample_record(ladder, &ranges, &mut rng);
                    // hold the other conditions of this rule true
                    let mut feasible = true;
                    for (cj, cond) in rule.conditions.iter().enumerate() {
                        if cj == ci {
                            continue;
                        }
                        let t = threshold_of(cond, &record)?;
                        match force_uniform(&mut rng, ranges[&cond.lhs], cond.cmp, t) {
                            Some(v) => record.set(&cond.lhs, v),
                            None => {
                                feasible = false;
                                break;
                            }
                        }
                    }
                    if !feasible {
                        continue;
                    }
                    // set the target condition to the requested case with a
                    // uniform draw from the case's satisfying subrange;
                    // spreading the records over the region interiors trains
                    // better than stacking them on the boundary
                    let target = &rule.conditions[ci];
                    let t = threshold_of(target, &record)?;
                    let kind = 2u8;
                    match force_value(&mut rng, ranges[&target.lhs], target.cmp, t, case, kind) {
                        Some(v) => record.set(&target.lhs, v),
                        None => continue,
                    }
                    // recheck everything (forcing one variable can disturb a
                    // scaled threshold of another condition)
                    if !reaches_rule(ladder, &record, ri)? {
                        continue;
                    }
                    let ok = rule.conditions.iter().enumerate().all(|(cj, cond)| {
                        let sat = eval_condition(cond, &record).unwrap_or(false);
                        if cj == ci {
                            sat == case
                        } else {
                            sat
                        }
                    });
                    if !ok {
                        continue;
                    }
                    let label = classify(ladder, &record)?;
                    records.push(LabeledRecord { record, label });
                    found += 1;
                }
                if found == 0 {
                    uncoverable.insert((ri, ci));
                }
            }
        }
    }

    Ok(GeneratedSet {
        dataset: Dataset::new(ladder.variable_names(), records),
        uncoverable,
    })
}

/// Uniform random labeled records, used to pad a covering set to a target
/// size.
pub fn generate_uniform(
    ladder: &DecisionLadder,
    ranges: &[ValueRange],
    n: usize,
    seed: u64,
) -> Result<Dataset, GenError> {
    let ranges = range_map(ladder, ranges)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(n);
    for _ in 0..n {
        let record = sample_record(ladder, &ranges, &mut rng);
        let label = classify(ladder, &record)?;
        records.push(LabeledRecord { record, label });
    }
    Ok(Dataset::new(ladder.variable_names(), records))
}

// ---------------------------------------------------------------------------
// Splitting
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct SplitDataset {
    pub train: Dataset,
    pub test: Dataset,
    pub blind: Dataset,
}

/// Largest-remainder rounding of `total * fraction` per bucket; remainders go
/// to the buckets with the largest fractional parts, earlier bucket first on
/// ties.
fn apportion(total: usize, fractions: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = fractions.iter().map(|f| f * total as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for i in 0..(total - assigned) {
        counts[order[i % order.len()]] += 1;
    }
    counts
}

/// Stratified train/test/blind split. Per-class allocations follow the
/// fractions as closely as possible while the global split sizes hit the
/// largest-remainder rounding of the totals exactly; leftover records prefer
/// train, then test, then blind.
pub fn split_dataset(
    dataset: &Dataset,
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<SplitDataset, GenError> {
    let fr = [fractions.0, fractions.1, fractions.2];
    if fr.iter().any(|f| !(f.is_finite() && *f > 0.0)) || (fr.iter().sum::<f64>() - 1.0).abs() > 1e-9
    {
        return Err(GenError::BadFractions);
    }
    if dataset.is_empty() {
        return Err(GenError::Empty);
    }

    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, lr) in dataset.records.iter().enumerate() {
        by_class.entry(lr.label).or_default().push(i);
    }
    for (&class, idxs) in &by_class {
        if idxs.len() < 3 {
            return Err(GenError::TooSmallForSplit {
                class,
                count: idxs.len(),
            });
        }
    }

    let totals = apportion(dataset.len(), &fr);
    let mut deficit = totals.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parts: [Vec<usize>; 3] = [Vec::new(), Vec::new(), Vec::new()];

    for idxs in by_class.values() {
        let mut idxs = idxs.clone();
        use rand::seq::SliceRandom;
        idxs.shuffle(&mut rng);
        // per-class floors, at least one per split
        let n = idxs.len();
        let mut alloc: Vec<usize> = fr.iter().map(|f| ((f * n as f64).floor() as usize).max(1)).collect();
        while alloc.iter().sum::<usize>() > n {
            let i = alloc
                .iter()
                .enumerate()
                .max_by_key(|(_, c)| **c)
                .map(|(i, _)| i)
                .unwrap();
            alloc[i] -= 1;
        }
        // hand leftovers to splits still under their global target,
        // train-first
        let mut leftover = n - alloc.iter().sum::<usize>();
        while leftover > 0 {
            let mut placed = false;
            for s in 0..3 {
                if leftover == 0 {
                    break;
                }
                if alloc[s] < deficit[s] {
                    alloc[s] += 1;
                    leftover -= 1;
                    placed = true;
                }
            }
            if !placed {
                alloc[0] += leftover;
                leftover = 0;
            }
        }
        let mut cursor = 0usize;
        for s in 0..3 {
            for _ in 0..alloc[s] {
                parts[s].push(idxs[cursor]);
                cursor += 1;
            }
            deficit[s] = deficit[s].saturating_sub(alloc[s]);
        }
    }

    let take = |idxs: &Vec<usize>, origin: SplitOrigin| {
        let mut sorted = idxs.clone();
        sorted.sort_unstable();
        Dataset {
            variables: dataset.variables.clone(),
            records: sorted.iter().map(|&i| dataset.records[i].clone()).collect(),
            origin,
        }
    };
    Ok(SplitDataset {
        train: take(&parts[0], SplitOrigin::Train),
        test: take(&parts[1], SplitOrigin::Test),
        blind: take(&parts[2], SplitOrigin::Blind),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rule_model::{credit_risk_fixture, parse_ladder};

    pub const FIXTURE_RANGES: &str = include_str!("../fixtures/credit_risk_ranges.csv");
    const REFERENCE_RECORDS: &str = include_str!("../fixtures/reference_records.csv");

    fn fixture_ranges() -> Vec<ValueRange> {
        read_ranges_csv(FIXTURE_RANGES).unwrap()
    }

    #[test]
    fn covering_set_meets_k_floor_on_fixture() {
        let ladder = credit_risk_fixture();
        let generated = generate_covering_set(&ladder, &fixture_ranges(), 4, 11).unwrap();
        assert!(generated.uncoverable.is_empty());
        let report = coverage_report(&generated.dataset, &ladder).unwrap();
        assert_eq!(report.entries.len(), 5);
        for e in &report.entries {
            assert!(e.satisfy_count >= 4, "{e:?}");
            assert!(e.violate_count >= 4, "{e:?}");
        }
    }

    #[test]
    fn covering_set_includes_both_sides_of_net_worth_threshold() {
        let ladder = credit_risk_fixture();
        let generated = generate_covering_set(&ladder, &fixture_ranges(), 4, 11).unwrap();
        let above = generated
            .dataset
            .records
            .iter()
            .filter(|lr| lr.record.get("NW").unwrap() >= 50000.0)
            .count();
        let below = generated.dataset.len() - above;
        assert!(above >= 4 && below >= 4);
    }

    #[test]
    fn smallest_covering_instance() {
        let ladder =
            parse_ladder("variables: X\nclasses: 2\nrule R: X >= 0 ? class 1 : class 2\n").unwrap();
        let ranges = vec![ValueRange {
            variable: "X".to_string(),
            low: -1.0,
            high: 1.0,
            integer_valued: false,
        }];
        let generated = generate_covering_set(&ladder, &ranges, 1, 3).unwrap();
        assert!(generated.uncoverable.is_empty());
        let ones = generated.dataset.records.iter().filter(|lr| lr.label == 1).count();
        let twos = generated.dataset.records.iter().filter(|lr| lr.label == 2).count();
        assert!(ones >= 1 && twos >= 1);
    }

    #[test]
    fn labels_agree_with_oracle_over_10k_records() {
        let ladder = credit_risk_fixture();
        let generated = generate_covering_set(&ladder, &fixture_ranges(), 250, 5).unwrap();
        let uniform = generate_uniform(&ladder, &fixture_ranges(), 10_000 - generated.dataset.len().min(10_000), 6).unwrap();
        let mut total = 0usize;
        for lr in generated.dataset.records.iter().chain(uniform.records.iter()) {
            assert_eq!(lr.label, classify(&ladder, &lr.record).unwrap());
            total += 1;
        }
        assert!(total >= 10_000);
    }

    #[test]
    fn infeasible_condition_is_flagged_not_fatal() {
        // X is always in [0,1] so X >= 5 has no satisfying sample
        let ladder =
            parse_ladder("variables: X\nclasses: 2\nrule R: X >= 5 ? class 1 : class 2\n").unwrap();
        let ranges = vec![ValueRange {
            variable: "X".to_string(),
            low: 0.0,
            high: 1.0,
            integer_valued: false,
        }];
        let generated = generate_covering_set(&ladder, &ranges, 2, 9).unwrap();
        assert!(generated.uncoverable.contains(&(0, 0)));
    }

    #[test]
    fn missing_range_is_an_error() {
        let ladder = credit_risk_fixture();
        assert!(matches!(
            generate_covering_set(&ladder, &[], 1, 0),
            Err(GenError::MissingRange(_))
        ));
    }

    #[test]
    fn generation_is_deterministic() {
        let ladder = credit_risk_fixture();
        let a = generate_covering_set(&ladder, &fixture_ranges(), 4, 17).unwrap();
        let b = generate_covering_set(&ladder, &fixture_ranges(), 4, 17).unwrap();
        assert_eq!(a.dataset.to_csv(), b.dataset.to_csv());
    }

    #[test]
    fn coverage_report_on_empty_replay() {
        let ladder = credit_risk_fixture();
        let dataset = Dataset::new(ladder.variable_names(), Vec::new());
        let report = coverage_report(&dataset, &ladder).unwrap();
        assert!(report.entries.iter().all(|e| e.satisfy_count == 0 && e.violate_count == 0));
    }

    #[test]
    fn reference_rows_replay_through_fixture() {
        let ladder = credit_risk_fixture();
        let dataset = Dataset::from_csv(REFERENCE_RECORDS, SplitOrigin::Unsplit).unwrap();
        assert_eq!(dataset.len(), 10);
        let report = coverage_report(&dataset, &ladder).unwrap();
        // all ten rows exercise rule R1's single condition
        let r1 = &report.entries[0];
        assert_eq!(r1.satisfy_count + r1.violate_count, 10);
        // rows 2 and 5 fail R1 (PDB > 10% of CYS); the other eight reach RC1
        assert_eq!(r1.violate_count, 2);
        let rc1_nw = &report.entries[1];
        assert_eq!(rc1_nw.satisfy_count + rc1_nw.violate_count, 8);
    }

    #[test]
    fn split_100_records_gives_60_20_20() {
        let ladder = credit_risk_fixture();
        let dataset = generate_uniform(&ladder, &fixture_ranges(), 100, 23).unwrap();
        let split = split_dataset(&dataset, (0.6, 0.2, 0.2), 1).unwrap();
        assert_eq!(split.train.len(), 60);
        assert_eq!(split.test.len(), 20);
        assert_eq!(split.blind.len(), 20);
    }

    #[test]
    fn split_125_records_gives_25_blind() {
        let ladder = credit_risk_fixture();
        let dataset = generate_uniform(&ladder, &fixture_ranges(), 125, 23).unwrap();
        let split = split_dataset(&dataset, (0.6, 0.2, 0.2), 1).unwrap();
        assert_eq!(split.blind.len(), 25);
        assert_eq!(split.train.len(), 75);
        assert_eq!(split.test.len(), 25);
    }

    #[test]
    fn split_is_a_partition_and_stratified() {
        let ladder = credit_risk_fixture();
        let dataset = generate_covering_set(&ladder, &fixture_ranges(), 8, 29)
            .unwrap()
            .dataset;
        let split = split_dataset(&dataset, (0.6, 0.2, 0.2), 2).unwrap();
        assert_eq!(
            split.train.len() + split.test.len() + split.blind.len(),
            dataset.len()
        );
        // multiset union equals the source
        let mut all: Vec<String> = split
            .train
            .records
            .iter()
            .chain(&split.test.records)
            .chain(&split.blind.records)
            .map(|lr| format!("{:?}", lr))
            .collect();
        let mut src: Vec<String> = dataset.records.iter().map(|lr| format!("{:?}", lr)).collect();
        all.sort();
        src.sort();
        assert_eq!(all, src);
        // every class present in every split
        for part in [&split.train, &split.test, &split.blind] {
            for class in [1usize, 2, 3] {
                if dataset.records.iter().any(|lr| lr.label == class) {
                    assert!(part.records.iter().any(|lr| lr.label == class));
                }
            }
        }
    }

    #[test]
    fn split_is_deterministic() {
        let ladder = credit_risk_fixture();
        let dataset = generate_covering_set(&ladder, &fixture_ranges(), 4, 31)
            .unwrap()
            .dataset;
        let a = split_dataset(&dataset, (0.6, 0.2, 0.2), 5).unwrap();
        let b = split_dataset(&dataset, (0.6, 0.2, 0.2), 5).unwrap();
        assert_eq!(a.train.to_csv(), b.train.to_csv());
        assert_eq!(a.test.to_csv(), b.test.to_csv());
        assert_eq!(a.blind.to_csv(), b.blind.to_csv());
    }

    #[test]
    fn split_rejects_tiny_classes() {
        let ladder =
            parse_ladder("variables: X\nclasses: 2\nrule R: X >= 0 ? class 1 : class 2\n").unwrap();
        let records = vec![
            LabeledRecord {
                record: DataRecord::from_pairs([("X", 1.0)]),
                label: 1,
            },
            LabeledRecord {
                record: DataRecord::from_pairs([("X", -1.0)]),
                label: 2,
            },
        ];
        let _ = ladder;
        let dataset = Dataset::new(vec!["X".to_string()], records);
        assert!(matches!(
            split_dataset(&dataset, (0.6, 0.2, 0.2), 0),
            Err(GenError::TooSmallForSplit { .. })
        ));
    }

    #[test]
    fn split_rejects_bad_fractions() {
        let ladder = credit_risk_fixture();
        let dataset = generate_uniform(&ladder, &fixture_ranges(), 20, 1).unwrap();
        assert!(matches!(
            split_dataset(&dataset, (0.5, 0.2, 0.2), 0),
            Err(GenError::BadFractions)
        ));
    }

    #[test]
    fn dataset_csv_round_trip() {
        let ladder = credit_risk_fixture();
        let dataset = generate_uniform(&ladder, &fixture_ranges(), 30, 41).unwrap();
        let text = dataset.to_csv();
        let back = Dataset::from_csv(&text, SplitOrigin::Unsplit).unwrap();
        assert_eq!(back, dataset);
    }
}
