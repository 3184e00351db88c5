//! FD/CFD rules: a line-oriented DSL and per-edge confidence measurement.
//!
//! ```text
//! # comment
//! f1: Arena -> Location, Capacity
//! f4: Arena -> Team @ 0.8
//! f6: [Coach=A.Hannum], Start-End -> Team
//! f7: "Home Arena" -> Location @ 70%
//! ```
//!
//! Inside `[...]`, `Attr=Literal` is a constant condition; a bare attribute or
//! `Attr=_` is an ordinary determinant.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::tabular::Table;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Condition {
    pub attr: String,
    pub literal: String,
}

impl Condition {
    pub fn label(&self) -> String {
        format!("{}={}", self.attr, self.literal)
    }

    pub fn holds(&self, value: Option<&str>) -> bool {
        value.is_some_and(|v| v.trim() == self.literal.trim())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rule {
    pub id: String,
    pub condition: Vec<Condition>,
    pub lhs: Vec<String>,
    pub rhs: Vec<String>,
    pub declared_confidence: Option<f64>,
}

impl Rule {
    pub fn is_conditional(&self) -> bool {
        !self.condition.is_empty()
    }

    /// Every attribute the rule mentions.
    pub fn attributes(&self) -> impl Iterator<Item = &str> {
        self.condition
            .iter()
            .map(|c| c.attr.as_str())
            .chain(self.lhs.iter().map(String::as_str))
            .chain(self.rhs.iter().map(String::as_str))
    }

    /// Whether the row satisfies every condition literal.
    pub fn condition_holds(&self, table: &Table, row: usize) -> bool {
        self.condition
            .iter()
            .all(|c| c.holds(table.value(row, &c.attr)))
    }
}

/// Rules plus one confidence per `(rule id, rhs attribute)` edge.
#[derive(Debug, Clone, Default)]
pub struct RuleSet {
    pub rules: Vec<Rule>,
    confidences: BTreeMap<(String, String), f64>,
    pub warnings: Vec<String>,
}

impl RuleSet {
    /// Declared confidences where given, measured against `table` otherwise.
    pub fn estimate(rules: Vec<Rule>, table: &Table) -> Result<Self> {
        let mut set = RuleSet {
            rules: Vec::with_capacity(rules.len()),
            confidences: BTreeMap::new(),
            warnings: Vec::new(),
        };
        for rule in rules {
            let est = estimate_confidence(&rule, table)?;
            for (attr, c) in est.values {
                set.confidences.insert((rule.id.clone(), attr), c);
            }
            set.warnings.extend(est.warnings);
            set.rules.push(rule);
        }
        Ok(set)
    }

    /// Uses declared confidences, defaulting undeclared rules to 1.
    pub fn declared(rules: Vec<Rule>) -> Self {
        let mut confidences = BTreeMap::new();
        for rule in &rules {
            for a in &rule.rhs {
                confidences.insert(
                    (rule.id.clone(), a.clone()),
                    rule.declared_confidence.unwrap_or(1.0),
                );
            }
        }
        RuleSet {
            rules,
            confidences,
            warnings: Vec::new(),
        }
    }

    pub fn confidence(&self, rule_id: &str, attr: &str) -> f64 {
        self.confidences
            .get(&(rule_id.to_string(), attr.to_string()))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn set_confidence(&mut self, rule_id: &str, attr: &str, value: f64) {
        self.confidences
            .insert((rule_id.to_string(), attr.to_string()), value.clamp(0.0, 1.0));
    }

    pub fn get(&self, rule_id: &str) -> Option<&Rule> {
        self.rules.iter().find(|r| r.id == rule_id)
    }

    pub fn confidences(&self) -> &BTreeMap<(String, String), f64> {
        &self.confidences
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EdgeConfidences {
    pub values: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
}

/// Plurality-consistency confidence of each rhs attribute of `rule`.
///
/// Tuples are restricted to those complete on condition, lhs and the rhs
/// attribute and matching the condition literals. Within each lhs group the
/// most frequent rhs value counts as satisfied.
pub fn estimate_confidence(rule: &Rule, table: &Table) -> Result<EdgeConfidences> {
    let col = |a: &str| {
        table.column_index(a).ok_or_else(|| Error::UnknownAttribute {
            rule: rule.id.clone(),
            attr: a.to_string(),
        })
    };
    let cond_cols: Vec<(usize, &Condition)> = rule
        .condition
        .iter()
        .map(|c| Ok((col(&c.attr)?, c)))
        .collect::<Result<_>>()?;
    let lhs_cols: Vec<usize> = rule.lhs.iter().map(|a| col(a)).collect::<Result<_>>()?;
    let rhs_cols: Vec<usize> = rule.rhs.iter().map(|a| col(a)).collect::<Result<_>>()?;

    let mut out = EdgeConfidences::default();
    for (attr, &rc) in rule.rhs.iter().zip(&rhs_cols) {
        if let Some(declared) = rule.declared_confidence {
            out.values.insert(attr.clone(), declared);
            continue;
        }
        let mut groups: HashMap<Vec<&str>, HashMap<&str, usize>> = HashMap::new();
        let mut restricted = 0usize;
        for r in 0..table.num_rows() {
            if !cond_cols.iter().all(|(c, cond)| cond.holds(table.get(r, *c))) {
                continue;
            }
            let Some(key) = lhs_cols
                .iter()
                .map(|&c| table.get(r, c))
                .collect::<Option<Vec<&str>>>()
            else {
                continue;
            };
            let Some(v) = table.get(r, rc) else { continue };
            restricted += 1;
            *groups.entry(key).or_default().entry(v).or_default() += 1;
        }
        let confidence = if restricted == 0 {
            out.warnings.push(format!(
                "rule {}: no tuple supports the edge to {attr}; confidence set to 0",
                rule.id
            ));
            0.0
        } else {
            let support: usize = groups
                .values()
                .map(|counts| counts.values().copied().max().unwrap_or(0))
                .sum();
            support as f64 / restricted as f64
        };
        out.values.insert(attr.clone(), confidence);
    }
    Ok(out)
}

pub fn parse_rules(text: &str) -> Result<Vec<Rule>> {
    let mut rules: Vec<Rule> = Vec::new();
    let mut ids = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let mut p = Parser::new(raw, line_no);
        p.skip_ws();
        if p.at_end() {
            continue;
        }
        let rule = p.rule()?;
        if !ids.insert(rule.id.clone()) {
            return Err(p.error(format!("duplicate rule id {:?}", rule.id)));
        }
        rules.push(rule);
    }
    Ok(rules)
}

pub fn load_rules(path: impl AsRef<std::path::Path>) -> Result<Vec<Rule>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_rules(&text)
}

struct Parser<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    _src: &'a str,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str, line: usize) -> Self {
        Parser {
            chars: src.chars().collect(),
            pos: 0,
            line,
            _src: src,
        }
    }

    fn error(&self, message: impl Into<String>) -> Error {
        Error::RuleSyntax {
            line: self.line,
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn at_end(&self) -> bool {
        matches!(self.peek(), None | Some('#'))
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn at_arrow(&self) -> bool {
        self.peek() == Some('-') && self.chars.get(self.pos + 1) == Some(&'>')
    }

    fn eat(&mut self, ch: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(ch) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, ch: char) -> Result<()> {
        if self.eat(ch) {
            Ok(())
        } else {
            Err(self.error(format!("expected {ch:?}")))
        }
    }

    fn quoted(&mut self) -> Result<String> {
        self.pos += 1;
        let mut out = String::new();
        loop {
            match self.peek() {
                None => return Err(self.error("unterminated quote")),
                Some('"') => {
                    self.pos += 1;
                    if self.peek() == Some('"') {
                        out.push('"');
                        self.pos += 1;
                    } else {
                        return Ok(out);
                    }
                }
                Some(c) => {
                    out.push(c);
                    self.pos += 1;
                }
            }
        }
    }

    fn attr(&mut self) -> Result<String> {
        self.skip_ws();
        if self.peek() == Some('"') {
            let name = self.quoted()?;
            if name.is_empty() {
                return Err(self.error("empty attribute name"));
            }
            return Ok(name);
        }
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_whitespace() || ",[]=@#\":".contains(c) || self.at_arrow() {
                break;
            }
            self.pos += 1;
        }
        if self.pos == start {
            return Err(match self.peek() {
                Some(c) => self.error(format!("expected attribute name, found {c:?}")),
                None => self.error("expected attribute name"),
            });
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }

    fn literal(&mut self) -> Result<String> {
        self.skip_ws();
        if self.peek() == Some('"') {
            return self.quoted();
        }
        let start = self.pos;
        while self.peek().is_some_and(|c| c != ',' && c != ']') {
            self.pos += 1;
        }
        let lit: String = self.chars[start..self.pos].iter().collect();
        let lit = lit.trim().to_string();
        if lit.is_empty() {
            return Err(self.error("empty condition literal"));
        }
        Ok(lit)
    }

    fn rule(&mut self) -> Result<Rule> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c != ':') {
            self.pos += 1;
        }
        let id: String = self.chars[start..self.pos].iter().collect();
        let id = id.trim().to_string();
        if self.peek() != Some(':') || id.is_empty() || id.contains(char::is_whitespace) {
            return Err(self.error("expected `id:` at start of rule"));
        }
        self.pos += 1;

        let mut condition = Vec::new();
        let mut lhs = Vec::new();
        loop {
            if self.eat('[') {
                loop {
                    let attr = self.attr()?;
                    if self.eat('=') {
                        let lit = self.literal()?;
                        if lit == "_" {
                            lhs.push(attr);
                        } else {
                            condition.push(Condition { attr, literal: lit });
                        }
                    } else {
                        lhs.push(attr);
                    }
                    if self.eat(']') {
                        break;
                    }
                    self.expect(',')?;
                }
            } else {
                self.skip_ws();
                if self.at_arrow() {
                    break;
                }
                lhs.push(self.attr()?);
            }
            if !self.eat(',') {
                break;
            }
        }
        self.skip_ws();
        if !self.at_arrow() {
            return Err(self.error("expected `->`"));
        }
        self.pos += 2;

        let mut rhs = vec![self.attr()?];
        while self.eat(',') {
            rhs.push(self.attr()?);
        }

        let mut declared_confidence = None;
        if self.eat('@') {
            self.skip_ws();
            let start = self.pos;
            while self.peek().is_some_and(|c| c.is_ascii_digit() || c == '.') {
                self.pos += 1;
            }
            let num: String = self.chars[start..self.pos].iter().collect();
            let mut value: f64 = num
                .parse()
                .map_err(|_| self.error(format!("invalid confidence {num:?}")))?;
            if self.eat('%') {
                value /= 100.0;
            }
            if !(value > 0.0 && value <= 1.0) {
                return Err(self.error(format!("confidence {value} outside (0, 1]")));
            }
            declared_confidence = Some(value);
        }
        self.skip_ws();
        if !self.at_end() {
            return Err(self.error(format!(
                "unexpected trailing input {:?}",
                self.chars[self.pos..].iter().collect::<String>()
            )));
        }

        if lhs.is_empty() {
            return Err(self.error("empty left-hand side"));
        }
        let mut seen = HashSet::new();
        for a in lhs.iter().chain(&rhs) {
            if !seen.insert(a.as_str()) {
                return Err(self.error(format!("attribute {a:?} repeated or on both sides")));
            }
        }
        for c in &condition {
            if rhs.contains(&c.attr) {
                return Err(self.error(format!("condition attribute {:?} in rhs", c.attr)));
            }
        }
        Ok(Rule {
            id,
            condition,
            lhs,
            rhs,
            declared_confidence,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_plain_fd() {
        let r = &parse_rules("f1: Arena -> Location, Capacity").unwrap()[0];
        assert_eq!(r.id, "f1");
        assert_eq!(r.lhs, ["Arena"]);
        assert_eq!(r.rhs, ["Location", "Capacity"]);
        assert!(r.condition.is_empty());
        assert_eq!(r.declared_confidence, None);
    }

    #[test]
    fn parses_cfd_with_condition() {
        let r = &parse_rules("f6: [Coach=A.Hannum], Start-End -> Team").unwrap()[0];
        assert_eq!(
            r.condition,
            [Condition {
                attr: "Coach".into(),
                literal: "A.Hannum".into()
            }]
        );
        assert_eq!(r.lhs, ["Start-End"]);
        assert_eq!(r.rhs, ["Team"]);
        // pattern-tuple form with the determinant inside the brackets
        let r2 = &parse_rules("f6: [Coach= A.Hannum , Start-End] -> Team").unwrap()[0];
        assert_eq!(r2.condition, r.condition);
        assert_eq!(r2.lhs, r.lhs);
    }

    #[test]
    fn parses_confidence_quotes_and_comments() {
        let rules = parse_rules(
            "# header\n\nf4: Arena -> Team @ 0.8  # trailing\nf5: \"Seat Count\" -> Location @70%\n",
        )
        .unwrap();
        assert_eq!(rules.len(), 2);
        assert_eq!(rules[0].declared_confidence, Some(0.8));
        assert_eq!(rules[1].lhs, ["Seat Count"]);
        assert!((rules[1].declared_confidence.unwrap() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn rejects_invalid_rules_with_line_numbers() {
        for (src, line) in [
            ("fX: A -> A", 1),
            ("ok: A -> B\nbad: -> B", 2),
            ("f: A ->", 1),
            ("f: A B -> C", 1),
            ("f: A -> B @ 1.5", 1),
            ("f: [C=x] -> C", 1),
            ("f: A -> B\nf: C -> D", 2),
            ("no colon A -> B", 1),
        ] {
            match parse_rules(src) {
                Err(Error::RuleSyntax { line: l, .. }) => assert_eq!(l, line, "{src}"),
                other => panic!("{src}: {other:?}"),
            }
        }
    }

    fn table(rows: &[&[&str]]) -> Table {
        Table::from_strs("t", &["Arena", "Team", "Coach"], rows).unwrap()
    }

    #[test]
    fn exact_fd_has_confidence_one() {
        let t = table(&[&["a", "x", ""], &["a", "x", ""], &["b", "y", ""]]);
        let r = &parse_rules("f: Arena -> Team").unwrap()[0];
        assert_eq!(estimate_confidence(r, &t).unwrap().values["Team"], 1.0);
    }

    #[test]
    fn plurality_count_gives_eighty_percent() {
        // Arena a: 5 x + 1 y (plurality 5); Arena b: 3 z + 1 w (plurality 3); 8 of 10
        let t = table(&[
            &["a", "x", ""],
            &["a", "x", ""],
            &["a", "x", ""],
            &["a", "x", ""],
            &["a", "x", ""],
            &["a", "y", ""],
            &["b", "z", ""],
            &["b", "z", ""],
            &["b", "z", ""],
            &["b", "w", ""],
        ]);
        let r = &parse_rules("f4: Arena -> Team").unwrap()[0];
        let c = estimate_confidence(r, &t).unwrap().values["Team"];
        assert!((c - 0.8).abs() < 1e-12);
    }

    #[test]
    fn unsatisfied_condition_gives_zero_and_warning() {
        let t = table(&[&["a", "x", "P"], &["b", "y", "Q"]]);
        let r = &parse_rules("f: [Coach=Nobody], Arena -> Team").unwrap()[0];
        let est = estimate_confidence(r, &t).unwrap();
        assert_eq!(est.values["Team"], 0.0);
        assert_eq!(est.warnings.len(), 1);
    }

    #[test]
    fn declared_confidence_overrides_and_unknown_attr_fails() {
        let t = table(&[&["a", "x", ""], &["a", "y", ""]]);
        let r = &parse_rules("f: Arena -> Team @ 0.8").unwrap()[0];
        assert_eq!(estimate_confidence(r, &t).unwrap().values["Team"], 0.8);
        let bad = &parse_rules("f: Stadium -> Team").unwrap()[0];
        assert!(matches!(
            estimate_confidence(bad, &t),
            Err(Error::UnknownAttribute { .. })
        ));
    }
}
