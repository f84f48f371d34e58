//! Decision ladders: ordered conjunctive rules with pass/fail actions.
//!
//! A ladder is the exact oracle of a decision-support problem. Rules are
//! evaluated top to bottom; a rule whose conjunction holds takes its pass
//! action, otherwise its fail action. `Next` moves to the following rule,
//! `Class(k)` terminates with class `k`. The last rule may not use `Next`,
//! so every evaluation terminates in a class after at most one visit per
//! rule.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LadderError {
    #[error("line {line}, column {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),
    #[error("invalid variable name `{0}`")]
    InvalidVariableName(String),
    #[error("rule `{0}` has no conditions")]
    EmptyConditions(String),
    #[error("last rule `{0}` uses `next`")]
    DanglingNext(String),
    #[error("class index {index} out of range 1..={num_classes}")]
    ClassOutOfRange { index: usize, num_classes: usize },
    #[error("ladder has no rules")]
    NoRules,
    #[error("record is missing variable `{0}`")]
    MissingVariable(String),
    #[error("record value for `{0}` is not finite")]
    NonFiniteValue(String),
    #[error("scale factor must be finite and nonzero")]
    BadScale,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparator {
    Le,
    Lt,
    Ge,
    Gt,
    Eq,
    Ne,
}

impl Comparator {
    pub fn apply(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Comparator::Le => lhs <= rhs,
            Comparator::Lt => lhs < rhs,
            Comparator::Ge => lhs >= rhs,
            Comparator::Gt => lhs > rhs,
            Comparator::Eq => lhs == rhs,
            Comparator::Ne => lhs != rhs,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Comparator::Le => "<=",
            Comparator::Lt => "<",
            Comparator::Ge => ">=",
            Comparator::Gt => ">",
            Comparator::Eq => "==",
            Comparator::Ne => "!=",
        }
    }
}

/// Right-hand side of a condition: a constant, or a constant scale times
/// another variable (e.g. `0.10 * CYS`).
#[derive(Debug, Clone, PartialEq)]
pub enum Rhs {
    Constant(f64),
    Scaled { scale: f64, var: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub lhs: String,
    pub cmp: Comparator,
    pub rhs: Rhs,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.rhs {
            Rhs::Constant(c) => write!(f, "{} {} {}", self.lhs, self.cmp.as_str(), c),
            Rhs::Scaled { scale, var } => {
                write!(f, "{} {} {} * {}", self.lhs, self.cmp.as_str(), scale, var)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Next,
    Class(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub name: String,
    pub conditions: Vec<Condition>,
    pub pass_action: Action,
    pub fail_action: Action,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub description: Option<String>,
}

/// A complete input record: variable name to finite value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DataRecord {
    values: BTreeMap<String, f64>,
}

impl DataRecord {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<I, S>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        Self {
            values: pairs.into_iter().map(|(k, v)| (k.into(), v)).collect(),
        }
    }

    pub fn set(&mut self, name: &str, value: f64) {
        self.values.insert(name.to_string(), value);
    }

    pub fn get(&self, name: &str) -> Result<f64, LadderError> {
        let v = *self
            .values
            .get(name)
            .ok_or_else(|| LadderError::MissingVariable(name.to_string()))?;
        if !v.is_finite() {
            return Err(LadderError::NonFiniteValue(name.to_string()));
        }
        Ok(v)
    }

    pub fn values(&self) -> &BTreeMap<String, f64> {
        &self.values
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionLadder {
    pub variables: Vec<Variable>,
    pub rules: Vec<Rule>,
    pub num_classes: usize,
    pub class_names: BTreeMap<usize, String>,
}

impl DecisionLadder {
    pub fn new(
        variables: Vec<Variable>,
        rules: Vec<Rule>,
        num_classes: usize,
        class_names: BTreeMap<usize, String>,
    ) -> Result<Self, LadderError> {
        let ladder = Self {
            variables,
            rules,
            num_classes,
            class_names,
        };
        ladder.validate()?;
        Ok(ladder)
    }

    pub fn variable_names(&self) -> Vec<String> {
        self.variables.iter().map(|v| v.name.clone()).collect()
    }

    pub fn has_variable(&self, name: &str) -> bool {
        self.variables.iter().any(|v| v.name == name)
    }

    pub fn class_name(&self, index: usize) -> Option<&str> {
        self.class_names.get(&index).map(|s| s.as_str())
    }

    fn validate(&self) -> Result<(), LadderError> {
        if self.rules.is_empty() {
            return Err(LadderError::NoRules);
        }
        let mut seen = std::collections::BTreeSet::new();
        for v in &self.variables {
            if !is_identifier(&v.name) {
                return Err(LadderError::InvalidVariableName(v.name.clone()));
            }
            if !seen.insert(v.name.clone()) {
                return Err(LadderError::DuplicateVariable(v.name.clone()));
            }
        }
        for (idx, &k) in self.class_names.keys().enumerate() {
            let _ = idx;
            if k == 0 || k > self.num_classes {
                return Err(LadderError::ClassOutOfRange {
                    index: k,
                    num_classes: self.num_classes,
                });
            }
        }
        let last = self.rules.len() - 1;
        for (i, rule) in self.rules.iter().enumerate() {
            if rule.conditions.is_empty() {
                return Err(LadderError::EmptyConditions(rule.name.clone()));
            }
            for cond in &rule.conditions {
                if !self.has_variable(&cond.lhs) {
                    return Err(LadderError::UnknownVariable(cond.lhs.clone()));
                }
                if let Rhs::Scaled { scale, var } = &cond.rhs {
                    if !self.has_variable(var) {
                        return Err(LadderError::UnknownVariable(var.clone()));
                    }
                    if !scale.is_finite() || *scale == 0.0 {
                        return Err(LadderError::BadScale);
                    }
                }
            }
            for action in [rule.pass_action, rule.fail_action] {
                match action {
                    Action::Next if i == last => {
                        return Err(LadderError::DanglingNext(rule.name.clone()));
                    }
                    Action::Class(k) if k == 0 || k > self.num_classes => {
                        return Err(LadderError::ClassOutOfRange {
                            index: k,
                            num_classes: self.num_classes,
                        });
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Evaluate a single condition against a record.
pub fn eval_condition(cond: &Condition, record: &DataRecord) -> Result<bool, LadderError> {
    let lhs = record.get(&cond.lhs)?;
    let rhs = match &cond.rhs {
        Rhs::Constant(c) => *c,
        Rhs::Scaled { scale, var } => scale * record.get(var)?,
    };
    Ok(cond.cmp.apply(lhs, rhs))
}

/// Walk the ladder and return the class the record is assigned.
pub fn classify(ladder: &DecisionLadder, record: &DataRecord) -> Result<usize, LadderError> {
    for rule in &ladder.rules {
        let mut all_true = true;
        for cond in &rule.conditions {
            if !eval_condition(cond, record)? {
                all_true = false;
                break;
            }
        }
        let action = if all_true {
            rule.pass_action
        } else {
            rule.fail_action
        };
        match action {
            Action::Next => continue,
            Action::Class(k) => return Ok(k),
        }
    }
    unreachable!("validated ladders terminate: last rule has no Next action")
}

// ---------------------------------------------------------------------------
// DSL parsing and serialization
// ---------------------------------------------------------------------------

struct LineParser<'a> {
    text: &'a str,
    line: usize,
    pos: usize,
}

impl<'a> LineParser<'a> {
    fn new(text: &'a str, line: usize) -> Self {
        Self { text, line, pos: 0 }
    }

    fn err(&self, msg: impl Into<String>) -> LadderError {
        LadderError::Syntax {
            line: self.line,
            col: self.pos + 1,
            msg: msg.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.text.len() && self.rest().starts_with([' ', '\t']) {
            self.pos += 1;
        }
    }

    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    fn eat(&mut self, token: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(token) {
            self.pos += token.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, token: &str) -> Result<(), LadderError> {
        if self.eat(token) {
            Ok(())
        } else {
            Err(self.err(format!("expected `{token}`")))
        }
    }

    fn identifier(&mut self) -> Result<&'a str, LadderError> {
        self.skip_ws();
        let start = self.pos;
        let bytes = self.text.as_bytes();
        if start < bytes.len() && (bytes[start].is_ascii_alphabetic() || bytes[start] == b'_') {
            let mut end = start + 1;
            while end < bytes.len() && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_') {
                end += 1;
            }
            self.pos = end;
            Ok(&self.text[start..end])
        } else {
            Err(self.err("expected identifier"))
        }
    }

    fn number(&mut self) -> Result<f64, LadderError> {
        self.skip_ws();
        let start = self.pos;
        let bytes = self.text.as_bytes();
        let mut end = start;
        if end < bytes.len() && (bytes[end] == b'-' || bytes[end] == b'+') {
            end += 1;
        }
        while end < bytes.len()
            && (bytes[end].is_ascii_digit()
                || bytes[end] == b'.'
                || bytes[end] == b'e'
                || bytes[end] == b'E'
                || ((bytes[end] == b'-' || bytes[end] == b'+')
                    && (bytes[end - 1] == b'e' || bytes[end - 1] == b'E')))
        {
            end += 1;
        }
        let slice = &self.text[start..end];
        let value: f64 = slice
            .parse()
            .map_err(|_| self.err(format!("expected number, found `{slice}`")))?;
        self.pos = end;
        Ok(value)
    }

    fn comparator(&mut self) -> Result<Comparator, LadderError> {
        self.skip_ws();
        for (tok, cmp) in [
            ("<=", Comparator::Le),
            (">=", Comparator::Ge),
            ("==", Comparator::Eq),
            ("!=", Comparator::Ne),
            ("<", Comparator::Lt),
            (">", Comparator::Gt),
        ] {
            if self.eat(tok) {
                return Ok(cmp);
            }
        }
        Err(self.err("expected comparator (<=, <, >=, >, ==, !=)"))
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos == self.text.len()
    }
}

/// Parse the ladder DSL: `variables:`, `classes:` and `rule` declarations,
/// one per line, `#` comments.
pub fn parse_ladder(source: &str) -> Result<DecisionLadder, LadderError> {
    let mut variables: Vec<Variable> = Vec::new();
    let mut num_classes: Option<usize> = None;
    let mut class_names: BTreeMap<usize, String> = BTreeMap::new();
    let mut rules: Vec<Rule> = Vec::new();

    for (lineno, raw) in source.lines().enumerate() {
        let line = lineno + 1;
        let content = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        };
        if content.trim().is_empty() {
            continue;
        }
        let mut p = LineParser::new(content, line);
        if p.eat("variables:") {
            loop {
                let name = p.identifier()?;
                variables.push(Variable {
                    name: name.to_string(),
                    description: None,
                });
                if !p.eat(",") {
                    break;
                }
            }
            if !p.at_end() {
                return Err(p.err("trailing input after variable list"));
            }
        } else if p.eat("classes:") {
            // either `classes: 3` or `classes: 1=Accept, 2=Maybe, 3=Reject`
            let n = p.number()?;
            if n.fract() != 0.0 || n < 1.0 {
                return Err(p.err("class count must be a positive integer"));
            }
            if p.eat("=") {
                // named form; the first number was the first class index
                let mut index = n as usize;
                loop {
                    let label = p.identifier()?;
                    class_names.insert(index, label.to_string());
                    if !p.eat(",") {
                        break;
                    }
                    let next = p.number()?;
                    if next.fract() != 0.0 || next < 1.0 {
                        return Err(p.err("class index must be a positive integer"));
                    }
                    index = next as usize;
                    p.expect("=")?;
                }
                num_classes = Some(class_names.keys().max().copied().unwrap_or(0));
            } else {
                num_classes = Some(n as usize);
            }
            if !p.at_end() {
                return Err(p.err("trailing input after class declaration"));
            }
        } else if p.eat("rule") {
            let name = p.identifier()?.to_string();
            p.expect(":")?;
            let mut conditions = Vec::new();
            loop {
                let lhs = p.identifier()?.to_string();
                let cmp = p.comparator()?;
                // rhs: NUMBER [* IDENT]
                let value = p.number()?;
                let rhs = if p.eat("*") {
                    let var = p.identifier()?.to_string();
                    Rhs::Scaled { scale: value, var }
                } else {
                    Rhs::Constant(value)
                };
                conditions.push(Condition { lhs, cmp, rhs });
                p.skip_ws();
                if p.rest().starts_with("and")
                    && !p.rest()[3..].starts_with(|c: char| c.is_ascii_alphanumeric() || c == '_')
                {
                    p.pos += 3;
                } else {
                    break;
                }
            }
            p.expect("?")?;
            let pass_action = parse_action(&mut p)?;
            p.expect(":")?;
            let fail_action = parse_action(&mut p)?;
            if !p.at_end() {
                return Err(p.err("trailing input after rule"));
            }
            rules.push(Rule {
                name,
                conditions,
                pass_action,
                fail_action,
            });
        } else {
            return Err(p.err("expected `variables:`, `classes:` or `rule`"));
        }
    }

    let num_classes = num_classes.ok_or(LadderError::Syntax {
        line: 0,
        col: 0,
        msg: "missing `classes:` declaration".to_string(),
    })?;
    DecisionLadder::new(variables, rules, num_classes, class_names)
}

fn parse_action(p: &mut LineParser<'_>) -> Result<Action, LadderError> {
    if p.eat("next") {
        Ok(Action::Next)
    } else if p.eat("class") {
        let n = p.number()?;
        if n.fract() != 0.0 || n < 1.0 {
            return Err(p.err("class index must be a positive integer"));
        }
        Ok(Action::Class(n as usize))
    } else {
        Err(p.err("expected `next` or `class K`"))
    }
}

/// Serialize a ladder back to its DSL text. `parse_ladder(serialize_ladder(l))`
/// is structurally equal to `l`.
pub fn serialize_ladder(ladder: &DecisionLadder) -> String {
    let mut out = String::new();
    out.push_str("variables: ");
    out.push_str(&ladder.variable_names().join(", "));
    out.push('\n');
    if ladder.class_names.is_empty() {
        out.push_str(&format!("classes: {}\n", ladder.num_classes));
    } else {
        let parts: Vec<String> = ladder
            .class_names
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        out.push_str(&format!("classes: {}\n", parts.join(", ")));
    }
    for rule in &ladder.rules {
        let conds: Vec<String> = rule.conditions.iter().map(|c| c.to_string()).collect();
        out.push_str(&format!(
            "rule {}: {} ? {} : {}\n",
            rule.name,
            conds.join(" and "),
            action_str(rule.pass_action),
            action_str(rule.fail_action)
        ));
    }
    out
}

fn action_str(a: Action) -> String {
    match a {
        Action::Next => "next".to_string(),
        Action::Class(k) => format!("class {k}"),
    }
}

// ---------------------------------------------------------------------------
// Credit-risk fixture
// ---------------------------------------------------------------------------

/// DSL source of the credit-risk ladder shipped with the crate.
pub const CREDIT_RISK_DSL: &str = include_str!("../fixtures/credit_risk.ladder");

/// The credit-risk ladder: six inputs, two rules, three classes
/// (1 = Accept, 2 = FurtherEnquire, 3 = Reject).
pub fn credit_risk_fixture() -> DecisionLadder {
    parse_ladder(CREDIT_RISK_DSL).expect("embedded fixture parses")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;

    fn record(pairs: &[(&str, f64)]) -> DataRecord {
        DataRecord::from_pairs(pairs.iter().map(|&(k, v)| (k, v)))
    }

    #[test]
    fn fixture_parses_to_expected_shape() {
        let ladder = credit_risk_fixture();
        assert_eq!(ladder.rules.len(), 2);
        assert_eq!(ladder.variables.len(), 6);
        assert_eq!(ladder.num_classes, 3);
        assert_eq!(ladder.class_name(1), Some("Accept"));
        assert_eq!(ladder.class_name(3), Some("Reject"));
        assert_eq!(ladder.rules[0].conditions.len(), 1);
        assert_eq!(ladder.rules[1].conditions.len(), 4);
        assert_eq!(ladder.rules[0].pass_action, Action::Next);
        assert_eq!(ladder.rules[0].fail_action, Action::Class(3));
    }

    #[test]
    fn degenerate_single_class_ladder() {
        let src = "variables: X\nclasses: 1\nrule R: X >= 0 ? class 1 : class 1\n";
        let ladder = parse_ladder(src).unwrap();
        assert_eq!(ladder.rules.len(), 1);
        assert_eq!(ladder.rules[0].pass_action, Action::Class(1));
        assert_eq!(ladder.rules[0].fail_action, Action::Class(1));
    }

    #[test]
    fn dangling_next_on_last_rule_is_rejected() {
        let src = "variables: X\nclasses: 2\nrule R: X >= 0 ? next : class 2\n";
        assert!(matches!(
            parse_ladder(src),
            Err(LadderError::DanglingNext(_))
        ));
    }

    #[test]
    fn unknown_variable_is_rejected() {
        let src = "variables: X\nclasses: 2\nrule R: Y >= 0 ? class 1 : class 2\n";
        assert!(matches!(
            parse_ladder(src),
            Err(LadderError::UnknownVariable(_))
        ));
    }

    #[test]
    fn class_out_of_range_is_rejected() {
        let src = "variables: X\nclasses: 2\nrule R: X >= 0 ? class 1 : class 5\n";
        assert!(matches!(
            parse_ladder(src),
            Err(LadderError::ClassOutOfRange { .. })
        ));
    }

    #[test]
    fn syntax_error_reports_position() {
        let src = "variables: X\nclasses: 2\nrule R: X >?= 0 ? class 1 : class 2\n";
        match parse_ladder(src) {
            Err(LadderError::Syntax { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn eval_condition_scaled_form() {
        let cond = Condition {
            lhs: "PDB".to_string(),
            cmp: Comparator::Le,
            rhs: Rhs::Scaled {
                scale: 0.10,
                var: "CYS".to_string(),
            },
        };
        // 500 <= 1100
        assert!(eval_condition(&cond, &record(&[("PDB", 500.0), ("CYS", 11000.0)])).unwrap());
        // inclusive boundary: PDB exactly 10% of CYS
        assert!(eval_condition(&cond, &record(&[("PDB", 1100.0), ("CYS", 11000.0)])).unwrap());
        assert!(!eval_condition(&cond, &record(&[("PDB", 1101.0), ("CYS", 11000.0)])).unwrap());
    }

    #[test]
    fn eval_condition_net_worth_threshold() {
        let cond = Condition {
            lhs: "NW".to_string(),
            cmp: Comparator::Ge,
            rhs: Rhs::Constant(50000.0),
        };
        assert!(eval_condition(&cond, &record(&[("NW", 66000.0)])).unwrap());
        assert!(!eval_condition(&cond, &record(&[("NW", 49000.0)])).unwrap());
    }

    #[test]
    fn eval_condition_missing_variable() {
        let cond = Condition {
            lhs: "NW".to_string(),
            cmp: Comparator::Ge,
            rhs: Rhs::Constant(50000.0),
        };
        assert!(matches!(
            eval_condition(&cond, &record(&[])),
            Err(LadderError::MissingVariable(_))
        ));
    }

    #[test]
    fn classify_fixture_examples() {
        let ladder = credit_risk_fixture();
        // all Accept conditions hold
        let r = record(&[
            ("CYS", 180000.0),
            ("PDB", 2000.0),
            ("NW", 500000.0),
            ("DBC", 2.0),
            ("DBP", 79.0),
            ("DBS", 1.0),
        ]);
        assert_eq!(classify(&ladder, &r).unwrap(), 1);
        // first rule fails: 2000 > 1000
        let r = record(&[
            ("CYS", 10000.0),
            ("PDB", 2000.0),
            ("NW", 45000.0),
            ("DBC", 3.0),
            ("DBP", 20.0),
            ("DBS", 3.0),
        ]);
        assert_eq!(classify(&ladder, &r).unwrap(), 3);
        // reaches the second rule, DBP too low
        let r = record(&[
            ("CYS", 11000.0),
            ("PDB", 500.0),
            ("NW", 50000.0),
            ("DBC", 4.0),
            ("DBP", 15.0),
            ("DBS", 3.0),
        ]);
        assert_eq!(classify(&ladder, &r).unwrap(), 2);
    }

    /// Literal ladder walk, independent of `classify`: re-evaluates every
    /// condition of every rule up front, then follows the actions.
    fn brute_force_classify(ladder: &DecisionLadder, record: &DataRecord) -> usize {
        let outcomes: Vec<bool> = ladder
            .rules
            .iter()
            .map(|rule| {
                rule.conditions.iter().all(|c| {
                    let lhs = record.get(&c.lhs).unwrap();
                    let rhs = match &c.rhs {
                        Rhs::Constant(v) => *v,
                        Rhs::Scaled { scale, var } => scale * record.get(var).unwrap(),
                    };
                    match c.cmp {
                        Comparator::Le => lhs <= rhs,
                        Comparator::Lt => lhs < rhs,
                        Comparator::Ge => lhs >= rhs,
                        Comparator::Gt => lhs > rhs,
                        Comparator::Eq => lhs == rhs,
                        Comparator::Ne => lhs != rhs,
                    }
                })
            })
            .collect();
        let mut i = 0;
        loop {
            let rule = &ladder.rules[i];
            let action = if outcomes[i] {
                rule.pass_action
            } else {
                rule.fail_action
            };
            match action {
                Action::Next => i += 1,
                Action::Class(k) => return k,
            }
        }
    }

    #[test]
    fn classify_agrees_with_brute_force_on_10k_random_records() {
        let ladder = credit_risk_fixture();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let r = record(&[
                ("CYS", rng.random_range(0.0..1_000_000.0)),
                ("PDB", rng.random_range(0.0..100_000.0)),
                ("NW", rng.random_range(0.0..1_000_000.0)),
                ("DBC", rng.random_range(0.0..5.0_f64).floor()),
                ("DBP", rng.random_range(0.0..100.0_f64).floor()),
                ("DBS", rng.random_range(1.0..4.0_f64).floor()),
            ]);
            assert_eq!(classify(&ladder, &r).unwrap(), brute_force_classify(&ladder, &r));
        }
    }

    // Strategy for small valid ladders.
    fn arb_ladder() -> impl Strategy<Value = DecisionLadder> {
        let n_vars = 1usize..=4;
        n_vars.prop_flat_map(|nv| {
            let vars: Vec<String> = (0..nv).map(|i| format!("V{i}")).collect();
            let num_classes = 1usize..=4;
            num_classes.prop_flat_map(move |nc| {
                let vars = vars.clone();
                let cond = (0..vars.len(), 0usize..6, prop_oneof![
                    (-100.0..100.0f64).prop_map(Rhs::Constant),
                    ((0.01..10.0f64), 0..vars.len()).prop_map({
                        let vars = vars.clone();
                        move |(s, vi)| Rhs::Scaled { scale: s, var: vars[vi].clone() }
                    }),
                ])
                    .prop_map({
                        let vars = vars.clone();
                        move |(vi, ci, rhs)| Condition {
                            lhs: vars[vi].clone(),
                            cmp: [
                                Comparator::Le,
                                Comparator::Lt,
                                Comparator::Ge,
                                Comparator::Gt,
                                Comparator::Eq,
                                Comparator::Ne,
                            ][ci],
                            rhs,
                        }
                    });
                let rule = (prop::collection::vec(cond, 1..4), 0usize..=nc, 0usize..=nc);
                prop::collection::vec(rule, 1..5).prop_map({
                    let vars = vars.clone();
                    move |protos| {
                        let last = protos.len() - 1;
                        let rules: Vec<Rule> = protos
                            .into_iter()
                            .enumerate()
                            .map(|(i, (conds, p, f))| {
                                let mk = |x: usize| {
                                    if x == 0 && i < last {
                                        Action::Next
                                    } else {
                                        Action::Class(x.max(1).min(nc))
                                    }
                                };
                                Rule {
                                    name: format!("R{i}"),
                                    conditions: conds,
                                    pass_action: mk(p),
                                    fail_action: mk(f),
                                }
                            })
                            .collect();
                        DecisionLadder::new(
                            vars.iter()
                                .map(|n| Variable {
                                    name: n.clone(),
                                    description: None,
                                })
                                .collect(),
                            rules,
                            nc,
                            BTreeMap::new(),
                        )
                        .unwrap()
                    }
                })
            })
        })
    }

    proptest! {
        #[test]
        fn serializer_parser_round_trip(ladder in arb_ladder()) {
            let text = serialize_ladder(&ladder);
            let reparsed = parse_ladder(&text).unwrap();
            prop_assert_eq!(reparsed, ladder);
        }

        #[test]
        fn classify_matches_brute_force(ladder in arb_ladder(), seed in any::<u64>()) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let r = DataRecord::from_pairs(
                ladder.variable_names().into_iter().map(|n| (n, rng.random_range(-200.0..200.0))),
            );
            prop_assert_eq!(classify(&ladder, &r).unwrap(), brute_force_classify(&ladder, &r));
        }
    }
}
