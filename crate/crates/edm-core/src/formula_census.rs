//! Census of spreadsheet formula operator usage by vendor function class.
//!
//! Two reporting metrics: occurrence counts (every call counted) and
//! per-workbook presence (percentage of workbooks containing at least one
//! call of a class). A call is an identifier immediately followed by `(`,
//! outside double-quoted string literals. Names not in the class map are
//! bucketed as Unclassified so the counts always conserve.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

/// The 11 vendor function classes with their operator counts.
pub const VENDOR_CLASSES: [(&str, usize); 11] = [
    ("Database", 12),
    ("Date and Time", 20),
    ("Financial", 53),
    ("Engineering", 39),
    ("Information", 18),
    ("Logical", 6),
    ("Look-up and Reference", 17),
    ("Math and Trigonometry", 60),
    ("Statistical", 78),
    ("Text", 35),
    ("External linking", 5),
];

pub const UNCLASSIFIED: &str = "Unclassified";

#[derive(Debug, Error)]
pub enum CensusError {
    #[error("line {line}: unknown class name `{name}`")]
    UnknownClass { line: usize, name: String },
    #[error("line {line}: function `{name}` is already mapped to `{existing}`")]
    DuplicateFunction {
        line: usize,
        name: String,
        existing: String,
    },
    #[error("line {line}: expected `class_name,FUNCTION_NAME`")]
    BadLine { line: usize },
    #[error("strict validation failed: class `{class}` has {actual} operators, expected {expected}")]
    CountMismatch {
        class: String,
        actual: usize,
        expected: usize,
    },
    #[error("no formula records supplied")]
    Empty,
    #[error("record {index} has an empty formula")]
    EmptyFormula { index: usize },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionClassMap {
    /// UPPERCASE function name -> class name.
    map: BTreeMap<String, String>,
}

impl FunctionClassMap {
    pub fn class_of(&self, function: &str) -> Option<&str> {
        self.map.get(function).map(|s| s.as_str())
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Check the per-class operator counts against the vendor table
    /// (total 343).
    pub fn validate_strict(&self) -> Result<(), CensusError> {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for class in self.map.values() {
            *counts.entry(class.as_str()).or_default() += 1;
        }
        for (class, expected) in VENDOR_CLASSES {
            let actual = counts.get(class).copied().unwrap_or(0);
            if actual != expected {
                return Err(CensusError::CountMismatch {
                    class: class.to_string(),
                    actual,
                    expected,
                });
            }
        }
        Ok(())
    }
}

/// Load a class map from CSV lines `class_name,FUNCTION_NAME`. Class names
/// must be one of the 11 vendor classes; function names are uppercased.
pub fn load_class_map(source: &str) -> Result<FunctionClassMap, CensusError> {
    let known: BTreeSet<&str> = VENDOR_CLASSES.iter().map(|(c, _)| *c).collect();
    let mut map = BTreeMap::new();
    for (lineno, raw) in source.lines().enumerate() {
        let line = lineno + 1;
        let text = raw.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let Some((class, function)) = text.rsplit_once(',') else {
            return Err(CensusError::BadLine { line });
        };
        let class = class.trim();
        let function = function.trim().to_uppercase();
        if function.is_empty() {
            return Err(CensusError::BadLine { line });
        }
        if !known.contains(class) {
            return Err(CensusError::UnknownClass {
                line,
                name: class.to_string(),
            });
        }
        if let Some(existing) = map.get(&function) {
            return Err(CensusError::DuplicateFunction {
                line,
                name: function,
                existing: String::clone(existing),
            });
        }
        map.insert(function, class.to_string());
    }
    Ok(FunctionClassMap { map })
}

/// Extract function-call names from a formula, uppercased, with
/// multiplicity, in occurrence order. A call is an identifier
/// `[A-Za-z_][A-Za-z0-9_.]*` followed (after optional spaces) by `(`,
/// outside double-quoted string literals (`""` escapes a quote).
pub fn extract_function_calls(formula: &str) -> Vec<String> {
    let bytes = formula.as_bytes();
    let mut calls = Vec::new();
    let mut i = 0usize;
    while i < bytes.len() {
        let b = bytes[i];
        if b == b'"' {
            // string literal; doubled quotes stay inside it
            i += 1;
            while i < bytes.len() {
                if bytes[i] == b'"' {
                    if i + 1 < bytes.len() && bytes[i + 1] == b'"' {
                        i += 2;
                        continue;
                    }
                    i += 1;
                    break;
                }
                i += 1;
            }
        } else if b.is_ascii_alphabetic() || b == b'_' {
            let start = i;
            i += 1;
            while i < bytes.len()
                && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'.')
            {
                i += 1;
            }
            let end = i;
            let mut j = i;
            while j < bytes.len() && (bytes[j] == b' ' || bytes[j] == b'\t') {
                j += 1;
            }
            if j < bytes.len() && bytes[j] == b'(' {
                calls.push(formula[start..end].to_uppercase());
            }
        } else {
            i += 1;
        }
    }
    calls
}

#[derive(Debug, Clone, PartialEq)]
pub struct FormulaRecord {
    pub workbook_id: String,
    pub formula: String,
}

/// Read a formulas corpus CSV with header `workbook_id,formula`; formulas
/// may contain commas and are double-quote enclosed with `""` escaping.
pub fn read_formula_csv(text: &str) -> Result<Vec<FormulaRecord>, CensusError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row?;
        if row.len() < 2 {
            continue;
        }
        out.push(FormulaRecord {
            workbook_id: row[0].to_string(),
            formula: row[1].to_string(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassStats {
    pub occurrences: usize,
    pub presence_percent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CensusReport {
    /// Per class, in vendor table order, with Unclassified last.
    pub classes: Vec<(String, ClassStats)>,
    pub total_calls: usize,
    pub total_workbooks: usize,
}

impl CensusReport {
    pub fn occurrences(&self, class: &str) -> usize {
        self.classes
            .iter()
            .find(|(c, _)| c == class)
            .map(|(_, s)| s.occurrences)
            .unwrap_or(0)
    }

    pub fn presence_percent(&self, class: &str) -> f64 {
        self.classes
            .iter()
            .find(|(c, _)| c == class)
            .map(|(_, s)| s.presence_percent)
            .unwrap_or(0.0)
    }

    /// `class,occurrences,presence_percent` plus a totals line. `metric`
    /// restricts the value columns.
    pub fn to_csv(&self, metric: CensusMetric) -> String {
        let mut out = String::new();
        match metric {
            CensusMetric::Both => {
                out.push_str("class,occurrences,presence_percent\n");
                for (class, s) in &self.classes {
                    out.push_str(&format!(
                        "\"{}\",{},{}\n",
                        class, s.occurrences, s.presence_percent
                    ));
                }
                out.push_str(&format!(
                    "\"Total\",{},{}\n",
                    self.total_calls, self.total_workbooks
                ));
            }
            CensusMetric::Occurrences => {
                out.push_str("class,occurrences\n");
                for (class, s) in &self.classes {
                    out.push_str(&format!("\"{}\",{}\n", class, s.occurrences));
                }
                out.push_str(&format!("\"Total\",{}\n", self.total_calls));
            }
            CensusMetric::Presence => {
                out.push_str("class,presence_percent\n");
                for (class, s) in &self.classes {
                    out.push_str(&format!("\"{}\",{}\n", class, s.presence_percent));
                }
                out.push_str(&format!("\"Total\",{}\n", self.total_workbooks));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CensusMetric {
    Both,
    Occurrences,
    Presence,
}

/// Count occurrences per class and per-workbook presence over a corpus.
pub fn census(
    records: &[FormulaRecord],
    map: &FunctionClassMap,
) -> Result<CensusReport, CensusError> {
    if records.is_empty() {
        return Err(CensusError::Empty);
    }
    for (index, r) in records.iter().enumerate() {
        if r.formula.is_empty() {
            return Err(CensusError::EmptyFormula { index });
        }
    }
    let mut occurrences: BTreeMap<&str, usize> = BTreeMap::new();
    let mut present: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    let mut workbooks: BTreeSet<&str> = BTreeSet::new();
    let mut total_calls = 0usize;
    for r in records {
        workbooks.insert(&r.workbook_id);
        for call in extract_function_calls(&r.formula) {
            total_calls += 1;
            let class = map.class_of(&call).unwrap_or(UNCLASSIFIED);
            *occurrences.entry(class).or_default() += 1;
            present.entry(class).or_default().insert(&r.workbook_id);
        }
    }
    let total_workbooks = workbooks.len();
    let classes = VENDOR_CLASSES
        .iter()
        .map(|(c, _)| *c)
        .chain([UNCLASSIFIED])
        .map(|class| {
            let occ = occurrences.get(class).copied().unwrap_or(0);
            let hits = present.get(class).map(|s| s.len()).unwrap_or(0);
            (
                class.to_string(),
                ClassStats {
                    occurrences: occ,
                    presence_percent: 100.0 * hits as f64 / total_workbooks as f64,
                },
            )
        })
        .collect();
    Ok(CensusReport {
        classes,
        total_calls,
        total_workbooks,
    })
}
