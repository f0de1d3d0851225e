//! Core net representation: variables in three classes (scenario, evaluation,
//! preference), conditional preference tables with indifference and missing
//! statements, evaluation functions, and outcome enumeration.
//!
//! A net document is immutable after construction. Parsing, validation, and
//! enumeration are pure functions, so documents can be shared freely across
//! threads.

mod parse;
mod validate;

pub use parse::{parse_net, serialize_net, ParseError};
pub use validate::{validate, Severity, ValidationEntry, ValidationReport};

use ordered_float::NotNan;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

/// Default ceiling on enumerated outcome counts (2^20).
pub const DEFAULT_OUTCOME_CAP: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VariableClass {
    Scenario,
    Evaluation,
    Preference,
}

impl fmt::Display for VariableClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VariableClass::Scenario => write!(f, "scenario"),
            VariableClass::Evaluation => write!(f, "evaluation"),
            VariableClass::Preference => write!(f, "preference"),
        }
    }
}

/// Domain of a variable: a finite ordered list of labels for scenario and
/// preference variables, a closed numeric range for evaluation variables.
///
/// The label order is declaration order. It is used only for deterministic
/// output and tie-breaking on request, never as a preference.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Labels(Vec<String>),
    Range {
        min: f64,
        max: f64,
        /// Quartile boundaries (q1, q2, q3) used to bucket numeric values
        /// when preference tables condition on this variable.
        buckets: Option<[f64; 3]>,
    },
}

impl Domain {
    pub fn labels(&self) -> Option<&[String]> {
        match self {
            Domain::Labels(ls) => Some(ls),
            Domain::Range { .. } => None,
        }
    }

    /// Index of a label in declaration order, if present.
    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels().and_then(|ls| ls.iter().position(|l| l == label))
    }

    pub fn contains(&self, value: &Value) -> bool {
        match (self, value) {
            (Domain::Labels(ls), Value::Label(l)) => ls.iter().any(|x| x == l),
            (Domain::Range { min, max, .. }, Value::Num(n)) => {
                *min <= n.into_inner() && n.into_inner() <= *max
            }
            _ => false,
        }
    }
}

/// One variable declaration.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableSpec {
    pub name: String,
    pub class: VariableClass,
    pub domain: Domain,
    /// Parent names in declaration order.
    pub parents: Vec<String>,
}

/// A value assigned to a variable: a domain label for scenario/preference
/// variables, a number for evaluation variables. Bucket labels (`Q1`..`Q4`)
/// standing for quartiles of an evaluation variable are ordinary labels.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Label(String),
    Num(NotNan<f64>),
}

impl Value {
    pub fn label(s: impl Into<String>) -> Self {
        Value::Label(s.into())
    }

    /// Panics if `n` is NaN.
    pub fn num(n: f64) -> Self {
        Value::Num(NotNan::new(n).expect("value must not be NaN"))
    }

    pub fn as_label(&self) -> Option<&str> {
        match self {
            Value::Label(s) => Some(s),
            Value::Num(_) => None,
        }
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            Value::Label(_) => None,
            Value::Num(n) => Some(n.into_inner()),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Label(s) => write!(f, "{s}"),
            Value::Num(n) => write!(f, "{}", n.into_inner()),
        }
    }
}

/// A full assignment to some set of variables, keyed by name.
pub type Assignment = BTreeMap<String, Value>;

/// Renders `k=v` pairs joined by `, ` in the given name order, falling back
/// to sorted order for names not listed.
pub fn format_assignment(assignment: &Assignment, name_order: &[String]) -> String {
    let mut parts = Vec::with_capacity(assignment.len());
    for name in name_order {
        if let Some(v) = assignment.get(name) {
            parts.push(format!("{name}={v}"));
        }
    }
    for (name, v) in assignment {
        if !name_order.contains(name) {
            parts.push(format!("{name}={v}"));
        }
    }
    parts.join(", ")
}

/// One row of a cp-table: under `context`, the owner's values are ordered by
/// `strata`, earlier strata preferred, values within a stratum mutually
/// indifferent. Domain values absent from all strata are missing statements.
#[derive(Debug, Clone, PartialEq)]
pub struct CpStatement {
    pub context: Assignment,
    pub strata: Vec<Vec<String>>,
    /// Free numeric annotation (the learner stores the empirical share that
    /// produced the row).
    pub annotation: Option<f64>,
}

impl CpStatement {
    pub fn new(context: Assignment, strata: Vec<Vec<String>>) -> Self {
        CpStatement { context, strata, annotation: None }
    }

    /// Index of the stratum containing `value`, or None if missing.
    pub fn stratum_of(&self, value: &str) -> Option<usize> {
        self.strata.iter().position(|s| s.iter().any(|v| v == value))
    }

    pub fn covered_values(&self) -> impl Iterator<Item = &str> {
        self.strata.iter().flatten().map(|s| s.as_str())
    }
}

/// Per-context point estimates for one evaluation variable.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvaluationFunction {
    pub table: Vec<(Assignment, f64)>,
}

impl EvaluationFunction {
    pub fn lookup(&self, context: &Assignment) -> Option<f64> {
        self.table.iter().find(|(c, _)| c == context).map(|(_, v)| *v)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),
    #[error("variable `{var}` names unknown parent `{parent}`")]
    UnknownParent { var: String, parent: String },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("cp-table for `{0}` which is not a declared variable")]
    CpTableUnknownOwner(String),
    #[error("evaluation function for `{0}` which is not a declared variable")]
    EfUnknownOwner(String),
    #[error("outcome count exceeds cap of {cap}")]
    CapExceeded { cap: usize },
    #[error("no enumeration grid for evaluation variable `{0}`")]
    MissingGrid(String),
}

/// An immutable net: variable declarations, cp-tables, and evaluation
/// functions.
///
/// Construction checks only what is needed for safe traversal (unique names,
/// parents declared, table owners declared); everything else — layering,
/// acyclicity, domain membership, completeness — is reported by [`validate`]
/// so that deliberately broken nets can still be built and inspected.
#[derive(Debug, Clone, PartialEq)]
pub struct NetDocument {
    pub name: String,
    pub description: String,
    variables: Vec<VariableSpec>,
    cp_tables: BTreeMap<String, Vec<CpStatement>>,
    eval_functions: BTreeMap<String, EvaluationFunction>,
}

impl NetDocument {
    pub fn new(
        variables: Vec<VariableSpec>,
        cp_tables: BTreeMap<String, Vec<CpStatement>>,
        eval_functions: BTreeMap<String, EvaluationFunction>,
    ) -> Result<Self, ModelError> {
        let mut seen = BTreeSet::new();
        for v in &variables {
            if !seen.insert(v.name.clone()) {
                return Err(ModelError::DuplicateVariable(v.name.clone()));
            }
        }
        for v in &variables {
            for p in &v.parents {
                if !seen.contains(p) {
                    return Err(ModelError::UnknownParent {
                        var: v.name.clone(),
                        parent: p.clone(),
                    });
                }
            }
        }
        for owner in cp_tables.keys() {
            if !seen.contains(owner) {
                return Err(ModelError::CpTableUnknownOwner(owner.clone()));
            }
        }
        for owner in eval_functions.keys() {
            if !seen.contains(owner) {
                return Err(ModelError::EfUnknownOwner(owner.clone()));
            }
        }
        let mut doc = NetDocument {
            name: String::new(),
            description: String::new(),
            variables,
            cp_tables,
            eval_functions,
        };
        doc.canonicalize();
        Ok(doc)
    }

    pub fn with_metadata(mut self, name: impl Into<String>, description: impl Into<String>) -> Self {
        self.name = name.into();
        self.description = description.into();
        self
    }

    /// Sorts statements by context, ef entries by context, and stratum members
    /// by domain order, so equal nets compare equal regardless of input order.
    fn canonicalize(&mut self) {
        let domains: BTreeMap<String, Domain> = self
            .variables
            .iter()
            .map(|v| (v.name.clone(), v.domain.clone()))
            .collect();
        let context_key = |ctx: &Assignment| -> Vec<(String, u64, String)> {
            ctx.iter()
                .map(|(name, value)| {
                    let idx = match value {
                        Value::Label(l) => domains
                            .get(name)
                            .and_then(|d| d.label_index(l))
                            .map(|i| i as u64)
                            .unwrap_or(u64::MAX),
                        Value::Num(_) => u64::MAX,
                    };
                    (name.clone(), idx, value.to_string())
                })
                .collect()
        };
        for (owner, stmts) in self.cp_tables.iter_mut() {
            let domain = domains.get(owner);
            for stmt in stmts.iter_mut() {
                for stratum in stmt.strata.iter_mut() {
                    stratum.sort_by_key(|v| {
                        domain
                            .and_then(|d| d.label_index(v))
                            .map(|i| i as u64)
                            .unwrap_or(u64::MAX)
                    });
                }
            }
            stmts.sort_by_key(|s| context_key(&s.context));
        }
        for ef in self.eval_functions.values_mut() {
            ef.table.sort_by_key(|(c, _)| context_key(c));
        }
    }

    pub fn variables(&self) -> &[VariableSpec] {
        &self.variables
    }

    pub fn variable(&self, name: &str) -> Option<&VariableSpec> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn variable_names(&self) -> Vec<String> {
        self.variables.iter().map(|v| v.name.clone()).collect()
    }

    pub fn variables_of_class(&self, class: VariableClass) -> impl Iterator<Item = &VariableSpec> {
        self.variables.iter().filter(move |v| v.class == class)
    }

    pub fn cp_tables(&self) -> &BTreeMap<String, Vec<CpStatement>> {
        &self.cp_tables
    }

    pub fn cp_table(&self, owner: &str) -> Option<&[CpStatement]> {
        self.cp_tables.get(owner).map(|v| v.as_slice())
    }

    pub fn eval_functions(&self) -> &BTreeMap<String, EvaluationFunction> {
        &self.eval_functions
    }

    pub fn eval_function(&self, owner: &str) -> Option<&EvaluationFunction> {
        self.eval_functions.get(owner)
    }

    /// Variables in a dependency-respecting order (parents first). Falls back
    /// to declaration order inside cycles, so it is total even on invalid nets.
    pub fn topological_order(&self) -> Vec<&VariableSpec> {
        let mut order: Vec<&VariableSpec> = Vec::with_capacity(self.variables.len());
        let mut placed: BTreeSet<&str> = BTreeSet::new();
        let mut remaining: Vec<&VariableSpec> = self.variables.iter().collect();
        while !remaining.is_empty() {
            let mut progressed = false;
            let mut next_round = Vec::new();
            for v in remaining {
                if v.parents.iter().all(|p| placed.contains(p.as_str())) {
                    placed.insert(&v.name);
                    order.push(v);
                    progressed = true;
                } else {
                    next_round.push(v);
                }
            }
            if !progressed {
                // Cycle: emit what is left in declaration order.
                order.extend(next_round.iter().copied());
                break;
            }
            remaining = next_round;
        }
        order
    }
}

/// A complete assignment of values to some net's variables, ordered and
/// hashable so it can serve as a search-state key.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Outcome(pub Assignment);

impl Outcome {
    pub fn get(&self, name: &str) -> Option<&Value> {
        self.0.get(name)
    }

    pub fn set(&self, name: &str, value: Value) -> Outcome {
        let mut a = self.0.clone();
        a.insert(name.to_string(), value);
        Outcome(a)
    }

    /// Values joined by `,` in the net's declaration order. Variables not
    /// assigned in this outcome are skipped.
    pub fn render(&self, net: &NetDocument) -> String {
        net.variables()
            .iter()
            .filter_map(|v| self.0.get(&v.name).map(|val| val.to_string()))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Enumerates every outcome over the net's variables, lexicographic in
/// declaration order with values in domain (or grid) order.
///
/// Evaluation variables have continuous ranges, so each one present must have
/// a finite grid in `eval_grid`. Nets without evaluation variables accept an
/// empty grid.
pub fn enumerate_outcomes(
    net: &NetDocument,
    eval_grid: &BTreeMap<String, Vec<f64>>,
    cap: usize,
) -> Result<Vec<Outcome>, ModelError> {
    let mut axes: Vec<(&str, Vec<Value>)> = Vec::new();
    for v in net.variables() {
        let values = match (&v.class, &v.domain) {
            (VariableClass::Evaluation, _) => eval_grid
                .get(&v.name)
                .ok_or_else(|| ModelError::MissingGrid(v.name.clone()))?
                .iter()
                .map(|n| Value::num(*n))
                .collect(),
            (_, Domain::Labels(ls)) => ls.iter().map(Value::label).collect(),
            (_, Domain::Range { .. }) => {
                return Err(ModelError::MissingGrid(v.name.clone()));
            }
        };
        axes.push((&v.name, values));
    }
    enumerate_axes(&axes, cap)
}

/// Enumerates outcomes over the non-evaluation variables only, restricted to
/// assignments that agree with `fixed`.
pub fn enumerate_preference_outcomes(
    net: &NetDocument,
    fixed: &Assignment,
    cap: usize,
) -> Result<Vec<Outcome>, ModelError> {
    let mut axes: Vec<(&str, Vec<Value>)> = Vec::new();
    for v in net.variables() {
        if v.class == VariableClass::Evaluation {
            continue;
        }
        let values = if let Some(val) = fixed.get(&v.name) {
            vec![val.clone()]
        } else {
            match &v.domain {
                Domain::Labels(ls) => ls.iter().map(Value::label).collect(),
                Domain::Range { .. } => vec![],
            }
        };
        axes.push((&v.name, values));
    }
    enumerate_axes(&axes, cap)
}

fn enumerate_axes(axes: &[(&str, Vec<Value>)], cap: usize) -> Result<Vec<Outcome>, ModelError> {
    let mut total: usize = 1;
    for (_, values) in axes {
        total = total
            .checked_mul(values.len().max(1))
            .ok_or(ModelError::CapExceeded { cap })?;
        if total > cap {
            return Err(ModelError::CapExceeded { cap });
        }
    }
    let mut outcomes = vec![Assignment::new()];
    for (name, values) in axes {
        if values.is_empty() {
            continue;
        }
        let mut next = Vec::with_capacity(outcomes.len() * values.len());
        for partial in &outcomes {
            for value in values {
                let mut a = partial.clone();
                a.insert(name.to_string(), value.clone());
                next.push(a);
            }
        }
        outcomes = next;
    }
    Ok(outcomes.into_iter().map(Outcome).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary(name: &str, class: VariableClass, parents: &[&str]) -> VariableSpec {
        VariableSpec {
            name: name.to_string(),
            class,
            domain: Domain::Labels(vec![format!("{name}0"), format!("{name}1")]),
            parents: parents.iter().map(|p| p.to_string()).collect(),
        }
    }

    #[test]
    fn rejects_duplicate_variable() {
        let err = NetDocument::new(
            vec![
                binary("x", VariableClass::Preference, &[]),
                binary("x", VariableClass::Preference, &[]),
            ],
            BTreeMap::new(),
            BTreeMap::new(),
        )
        .unwrap_err();
        assert_eq!(err, ModelError::DuplicateVariable("x".into()));
    }

    #[test]
    fn rejects_unknown_parent() {
        let err = NetDocument::new(
            vec![binary("p", VariableClass::Preference, &["q"])],
            BTreeMap::new(),
            BTreeMap::new(),
        )
        .unwrap_err();
        assert_eq!(err, ModelError::UnknownParent { var: "p".into(), parent: "q".into() });
    }

    #[test]
    fn empty_net_is_fine() {
        let net = NetDocument::new(vec![], BTreeMap::new(), BTreeMap::new()).unwrap();
        assert!(net.variables().is_empty());
        let all = enumerate_outcomes(&net, &BTreeMap::new(), 16).unwrap();
        assert_eq!(all.len(), 1); // the empty outcome
    }

    #[test]
    fn enumerate_counts_and_cap() {
        let vars = vec![
            binary("a", VariableClass::Preference, &[]),
            binary("b", VariableClass::Preference, &[]),
            binary("c", VariableClass::Preference, &[]),
        ];
        let net = NetDocument::new(vars, BTreeMap::new(), BTreeMap::new()).unwrap();
        let all = enumerate_outcomes(&net, &BTreeMap::new(), 1 << 20).unwrap();
        assert_eq!(all.len(), 8);
        assert_eq!(all.iter().collect::<BTreeSet<_>>().len(), 8);
        let err = enumerate_outcomes(&net, &BTreeMap::new(), 4).unwrap_err();
        assert_eq!(err, ModelError::CapExceeded { cap: 4 });
    }

    #[test]
    fn enumerate_single_binary() {
        let net = NetDocument::new(
            vec![binary("x", VariableClass::Preference, &[])],
            BTreeMap::new(),
            BTreeMap::new(),
        )
        .unwrap();
        let all = enumerate_outcomes(&net, &BTreeMap::new(), 16).unwrap();
        assert_eq!(all.len(), 2);
        assert_eq!(all[0].get("x"), Some(&Value::label("x0")));
    }

    #[test]
    fn evaluation_variable_needs_grid() {
        let net = NetDocument::new(
            vec![VariableSpec {
                name: "e".into(),
                class: VariableClass::Evaluation,
                domain: Domain::Range { min: 0.0, max: 10.0, buckets: None },
                parents: vec![],
            }],
            BTreeMap::new(),
            BTreeMap::new(),
        )
        .unwrap();
        assert_eq!(
            enumerate_outcomes(&net, &BTreeMap::new(), 16).unwrap_err(),
            ModelError::MissingGrid("e".into())
        );
        let mut grid = BTreeMap::new();
        grid.insert("e".to_string(), vec![0.0, 5.0, 10.0]);
        assert_eq!(enumerate_outcomes(&net, &grid, 16).unwrap().len(), 3);
    }

    #[test]
    fn topological_order_respects_parents() {
        let vars = vec![
            binary("p", VariableClass::Preference, &["t", "s"]),
            binary("s", VariableClass::Scenario, &[]),
            binary("t", VariableClass::Preference, &[]),
        ];
        let net = NetDocument::new(vars, BTreeMap::new(), BTreeMap::new()).unwrap();
        let order: Vec<&str> = net.topological_order().iter().map(|v| v.name.as_str()).collect();
        let pos = |n: &str| order.iter().position(|x| *x == n).unwrap();
        assert!(pos("s") < pos("p"));
        assert!(pos("t") < pos("p"));
    }
}
