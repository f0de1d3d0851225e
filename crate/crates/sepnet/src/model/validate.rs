//! Structural validation: class layering, acyclicity, domain membership,
//! cp-table completeness accounting, evaluation-function range checks.
//!
//! All problems are report entries, never errors. Violations make a net
//! invalid; informational entries record legal but notable gaps such as
//! missing statements (those induce incomparability rather than being wrong).

use super::{Assignment, Domain, NetDocument, Value, VariableClass};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// Labels accepted in cp-statement contexts for a numeric parent, standing
/// for the parent's quartile buckets.
pub(crate) const QUARTILE_LABELS: [&str; 4] = ["Q1", "Q2", "Q3", "Q4"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Violation,
    Info,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationEntry {
    pub severity: Severity,
    pub variable: Option<String>,
    pub message: String,
}

impl fmt::Display for ValidationEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Violation => "violation",
            Severity::Info => "info",
        };
        match &self.variable {
            Some(v) => write!(f, "{tag}: {v}: {}", self.message),
            None => write!(f, "{tag}: {}", self.message),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub entries: Vec<ValidationEntry>,
}

impl ValidationReport {
    pub fn violations(&self) -> impl Iterator<Item = &ValidationEntry> {
        self.entries.iter().filter(|e| e.severity == Severity::Violation)
    }

    pub fn infos(&self) -> impl Iterator<Item = &ValidationEntry> {
        self.entries.iter().filter(|e| e.severity == Severity::Info)
    }

    /// True when the report carries no violations (informational entries are
    /// fine).
    pub fn is_valid(&self) -> bool {
        self.violations().next().is_none()
    }

    fn violation(&mut self, variable: Option<&str>, message: impl Into<String>) {
        self.entries.push(ValidationEntry {
            severity: Severity::Violation,
            variable: variable.map(str::to_string),
            message: message.into(),
        });
    }

    fn info(&mut self, variable: Option<&str>, message: impl Into<String>) {
        self.entries.push(ValidationEntry {
            severity: Severity::Info,
            variable: variable.map(str::to_string),
            message: message.into(),
        });
    }
}

/// Reports every violated invariant of `net`, plus informational entries for
/// legal-but-notable gaps. An empty violation list means the net is usable by
/// the order semantics.
pub fn validate(net: &NetDocument) -> ValidationReport {
    let mut report = ValidationReport::default();
    let class_of: BTreeMap<&str, VariableClass> =
        net.variables().iter().map(|v| (v.name.as_str(), v.class)).collect();

    for v in net.variables() {
        match &v.domain {
            Domain::Labels(ls) => {
                if ls.is_empty() {
                    report.violation(Some(&v.name), "empty domain");
                }
                let mut seen = BTreeSet::new();
                for l in ls {
                    if !seen.insert(l) {
                        report.violation(Some(&v.name), format!("domain value `{l}` repeated"));
                    }
                }
                if v.class == VariableClass::Evaluation {
                    report.violation(Some(&v.name), "evaluation variable requires a numeric range domain");
                }
            }
            Domain::Range { min, max, .. } => {
                if v.class != VariableClass::Evaluation {
                    report.violation(Some(&v.name), "numeric range domain on a non-evaluation variable");
                } else if min >= max {
                    report.violation(Some(&v.name), format!("range requires min < max, got [{min}, {max}]"));
                }
            }
        }
        match v.class {
            VariableClass::Scenario => {
                if !v.parents.is_empty() {
                    report.violation(Some(&v.name), "scenario variables are independent and take no parents");
                }
            }
            VariableClass::Evaluation => {
                for p in &v.parents {
                    if class_of.get(p.as_str()) == Some(&VariableClass::Preference) {
                        report.violation(
                            Some(&v.name),
                            format!("evaluation variable depends on preference variable `{p}`"),
                        );
                    }
                }
            }
            VariableClass::Preference => {}
        }
    }

    if let Some(cycle) = find_cycle(net) {
        report.violation(None, format!("dependency cycle: {}", cycle.join(" -> ")));
    }

    for (owner, stmts) in net.cp_tables() {
        let spec = match net.variable(owner) {
            Some(s) => s,
            None => continue, // unreachable: construction checks owners
        };
        if spec.class != VariableClass::Preference {
            report.violation(Some(owner), format!("cp-table on {} variable", spec.class));
            continue;
        }
        let own_labels: Vec<&str> = spec
            .domain
            .labels()
            .map(|ls| ls.iter().map(String::as_str).collect())
            .unwrap_or_default();
        let mut seen_contexts: BTreeSet<&Assignment> = BTreeSet::new();
        for stmt in stmts {
            check_context(&mut report, net, owner, &spec.parents, &stmt.context);
            if !seen_contexts.insert(&stmt.context) {
                report.violation(Some(owner), "context repeated across cp-statements");
            }
            let mut covered = BTreeSet::new();
            for value in stmt.covered_values() {
                if !own_labels.contains(&value) {
                    report.violation(Some(owner), format!("cp-statement orders unknown value `{value}`"));
                }
                if !covered.insert(value) {
                    report.violation(Some(owner), format!("value `{value}` occurs in two strata"));
                }
            }
            let uncovered = own_labels.iter().filter(|l| !covered.contains(**l)).count();
            if uncovered > 0 {
                report.info(
                    Some(owner),
                    format!("missing statements: {uncovered} value(s) uncovered in some context"),
                );
            }
        }
        if let Some(total) = context_space_size(net, &spec.parents) {
            if stmts.len() < total {
                report.info(
                    Some(owner),
                    format!("missing statements: {} of {total} contexts uncovered", total - stmts.len()),
                );
            }
        }
    }

    for (owner, ef) in net.eval_functions() {
        let spec = match net.variable(owner) {
            Some(s) => s,
            None => continue,
        };
        if spec.class != VariableClass::Evaluation {
            report.violation(Some(owner), format!("evaluation function on {} variable", spec.class));
            continue;
        }
        let (min, max) = match spec.domain {
            Domain::Range { min, max, .. } => (min, max),
            Domain::Labels(_) => (f64::NEG_INFINITY, f64::INFINITY),
        };
        let mut seen_contexts: BTreeSet<&Assignment> = BTreeSet::new();
        for (context, value) in &ef.table {
            check_context(&mut report, net, owner, &spec.parents, context);
            if !seen_contexts.insert(context) {
                report.violation(Some(owner), "context repeated across evaluation entries");
            }
            if *value < min || *value > max {
                report.violation(
                    Some(owner),
                    format!("evaluation value {value} outside range [{min}, {max}]"),
                );
            }
        }
    }

    for v in net.variables() {
        match v.class {
            VariableClass::Scenario => {
                if net.cp_table(&v.name).is_none() {
                    report.info(Some(&v.name), "no cp-table for scenario variable");
                }
            }
            VariableClass::Preference => {
                if net.cp_table(&v.name).map_or(true, |t| t.is_empty()) {
                    report.info(Some(&v.name), "no cp-table: all statements missing");
                }
            }
            VariableClass::Evaluation => {
                if net.eval_function(&v.name).map_or(true, |ef| ef.table.is_empty()) {
                    report.info(Some(&v.name), "no evaluation function");
                }
            }
        }
    }

    report
}

fn check_context(
    report: &mut ValidationReport,
    net: &NetDocument,
    owner: &str,
    parents: &[String],
    context: &Assignment,
) {
    for p in parents {
        if !context.contains_key(p) {
            report.violation(Some(owner), format!("context missing parent `{p}`"));
        }
    }
    for (name, value) in context {
        if !parents.contains(name) {
            report.violation(Some(owner), format!("context assigns non-parent `{name}`"));
            continue;
        }
        let Some(spec) = net.variable(name) else { continue };
        let ok = match (&spec.domain, value) {
            (Domain::Range { .. }, Value::Label(l)) => QUARTILE_LABELS.contains(&l.as_str()),
            _ => spec.domain.contains(value),
        };
        if !ok {
            report.violation(
                Some(owner),
                format!("context value `{value}` not in domain of `{name}`"),
            );
        }
    }
}

/// Number of complete parent contexts, when finite. Numeric parents count via
/// their four quartile buckets when boundaries are declared; without
/// boundaries the context space is unbounded and accounting is skipped.
fn context_space_size(net: &NetDocument, parents: &[String]) -> Option<usize> {
    let mut total: usize = 1;
    for p in parents {
        let spec = net.variable(p)?;
        let n = match &spec.domain {
            Domain::Labels(ls) => ls.len(),
            Domain::Range { buckets: Some(_), .. } => QUARTILE_LABELS.len(),
            Domain::Range { buckets: None, .. } => return None,
        };
        total = total.checked_mul(n)?;
    }
    Some(total)
}

fn find_cycle(net: &NetDocument) -> Option<Vec<String>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Color {
        White,
        Gray,
        Black,
    }
    let names: Vec<&str> = net.variables().iter().map(|v| v.name.as_str()).collect();
    let mut color: BTreeMap<&str, Color> = names.iter().map(|n| (*n, Color::White)).collect();
    let mut stack: Vec<&str> = Vec::new();

    fn visit<'a>(
        net: &'a NetDocument,
        node: &'a str,
        color: &mut BTreeMap<&'a str, Color>,
        stack: &mut Vec<&'a str>,
    ) -> Option<Vec<String>> {
        color.insert(node, Color::Gray);
        stack.push(node);
        if let Some(spec) = net.variable(node) {
            for p in &spec.parents {
                match color.get(p.as_str()) {
                    Some(Color::Gray) => {
                        let start = stack.iter().position(|n| *n == p.as_str()).unwrap_or(0);
                        let mut cycle: Vec<String> =
                            stack[start..].iter().map(|s| s.to_string()).collect();
                        cycle.push(p.clone());
                        return Some(cycle);
                    }
                    Some(Color::White) => {
                        if let Some(c) = visit(net, net.variable(p)?.name.as_str(), color, stack) {
                            return Some(c);
                        }
                    }
                    _ => {}
                }
            }
        }
        stack.pop();
        color.insert(node, Color::Black);
        None
    }

    for name in names {
        if color[name] == Color::White {
            if let Some(c) = visit(net, name, &mut color, &mut stack) {
                return Some(c);
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parse_net, CpStatement, NetDocument, VariableSpec};

    fn airport() -> NetDocument {
        parse_net(include_str!("../../../../fixtures/airport_cpnet.net")).unwrap()
    }

    #[test]
    fn airport_net_is_valid_with_scenario_info() {
        let report = validate(&airport());
        assert!(report.is_valid(), "unexpected violations: {:?}", report.entries);
        let infos: Vec<String> = report.infos().map(|e| e.message.clone()).collect();
        assert!(infos.iter().any(|m| m == "no cp-table for scenario variable"));
    }

    #[test]
    fn evaluation_with_preference_parent_is_layering_violation() {
        let text = "variables\n  P preference { y, n }\n  e evaluation [0, 1] <- P\n";
        let report = validate(&parse_net(text).unwrap());
        assert!(!report.is_valid());
        assert!(report
            .violations()
            .any(|e| e.message.contains("depends on preference variable")));
    }

    #[test]
    fn dependency_cycle_is_reported() {
        // The text format cannot forward-reference, so build programmatically.
        let vars = vec![
            VariableSpec {
                name: "p".into(),
                class: VariableClass::Preference,
                domain: Domain::Labels(vec!["y".into(), "n".into()]),
                parents: vec!["q".into()],
            },
            VariableSpec {
                name: "q".into(),
                class: VariableClass::Preference,
                domain: Domain::Labels(vec!["y".into(), "n".into()]),
                parents: vec!["p".into()],
            },
        ];
        let net = NetDocument::new(vars, Default::default(), Default::default()).unwrap();
        let report = validate(&net);
        assert!(report.violations().any(|e| e.message.contains("dependency cycle")));
    }

    #[test]
    fn ef_out_of_range_is_violation() {
        let text = "variables\n  e evaluation [0, 10]\n\nevalfunctions\n  e\n    : 42\n";
        let report = validate(&parse_net(text).unwrap());
        assert!(report.violations().any(|e| e.message.contains("outside range")));
    }

    #[test]
    fn incomplete_cp_table_is_informational() {
        let text = "variables\n  S scenario { a, b }\n  P preference { y, n } <- S\n\ncptables\n  P\n    S=a : y > n\n";
        let report = validate(&parse_net(text).unwrap());
        assert!(report.is_valid());
        assert!(report.infos().any(|e| e.message.contains("1 of 2 contexts uncovered")));
    }

    #[test]
    fn value_in_two_strata_is_violation() {
        let mut tables = std::collections::BTreeMap::new();
        tables.insert(
            "P".to_string(),
            vec![CpStatement::new(
                Assignment::new(),
                vec![vec!["y".into()], vec!["y".into(), "n".into()]],
            )],
        );
        let net = NetDocument::new(
            vec![VariableSpec {
                name: "P".into(),
                class: VariableClass::Preference,
                domain: Domain::Labels(vec!["y".into(), "n".into()]),
                parents: vec![],
            }],
            tables,
            Default::default(),
        )
        .unwrap();
        let report = validate(&net);
        assert!(report.violations().any(|e| e.message.contains("occurs in two strata")));
    }

    #[test]
    fn quartile_labels_allowed_in_numeric_contexts() {
        let text = "variables\n  e evaluation [0, 100] buckets(25, 50, 75)\n  P preference { y, n } <- e\n\ncptables\n  P\n    e=Q1 : y > n\n    e=Q7 : n > y\n";
        let report = validate(&parse_net(text).unwrap());
        let bad: Vec<_> = report.violations().collect();
        assert_eq!(bad.len(), 1, "{bad:?}");
        assert!(bad[0].message.contains("`Q7` not in domain"));
    }
}
