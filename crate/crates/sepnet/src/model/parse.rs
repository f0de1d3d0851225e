//! Text format for net documents.
//!
//! The format is line-oriented with three sections. `#` starts a comment.
//!
//! ```text
//! net "airport line"
//! description "who may cut the line"
//!
//! variables
//!   S scenario { a, a_bar }
//!   T preference { o, o_bar }
//!   P preference { c, c_bar } <- S, T
//!   likelihood evaluation [0, 100] buckets(40, 55, 70) <- S
//!
//! cptables
//!   T
//!     : o > o_bar
//!   P
//!     S=a, T=o : c_bar > c
//!
//! evalfunctions
//!   likelihood
//!     S=a : 62
//! ```
//!
//! A cp-statement's relation lists strata separated by `>`, most preferred
//! first; `~` joins indifferent values inside a stratum; domain values simply
//! omitted are missing statements. A trailing `@ <number>` attaches a numeric
//! annotation. Serialization is canonical: parsing the output of
//! [`serialize_net`] reproduces the same document byte for byte.

use super::{
    Assignment, CpStatement, Domain, EvaluationFunction, NetDocument, Value, VariableClass,
    VariableSpec,
};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("line {line}, col {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("line {line}: duplicate variable `{name}`")]
    DuplicateVariable { line: usize, name: String },
    #[error("line {line}: variable `{var}` references unknown parent `{parent}`")]
    UnknownParent { line: usize, var: String, parent: String },
}

fn syntax(line: usize, col: usize, msg: impl Into<String>) -> ParseError {
    ParseError::Syntax { line, col, msg: msg.into() }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Atom(String),
    Str(String),
    LBrace,
    RBrace,
    LBrack,
    RBrack,
    LParen,
    RParen,
    Comma,
    Colon,
    Gt,
    Tilde,
    Eq,
    At,
    Arrow,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Atom(a) => format!("`{a}`"),
            Tok::Str(_) => "quoted string".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LBrack => "`[`".into(),
            Tok::RBrack => "`]`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Gt => "`>`".into(),
            Tok::Tilde => "`~`".into(),
            Tok::Eq => "`=`".into(),
            Tok::At => "`@`".into(),
            Tok::Arrow => "`<-`".into(),
        }
    }
}

struct Token {
    tok: Tok,
    col: usize,
}

fn is_reserved(c: char) -> bool {
    matches!(c, '{' | '}' | '[' | ']' | '(' | ')' | ',' | ':' | '>' | '~' | '=' | '@' | '"' | '<' | '#')
}

fn tokenize(line: &str, lineno: usize) -> Result<Vec<Token>, ParseError> {
    let mut toks = Vec::new();
    let chars: Vec<char> = line.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '#' {
            break;
        }
        let tok = match c {
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            '[' => Tok::LBrack,
            ']' => Tok::RBrack,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            ':' => Tok::Colon,
            '>' => Tok::Gt,
            '~' => Tok::Tilde,
            '=' => Tok::Eq,
            '@' => Tok::At,
            '<' => {
                if chars.get(i + 1) == Some(&'-') {
                    i += 1;
                    Tok::Arrow
                } else {
                    return Err(syntax(lineno, col, "expected `<-`"));
                }
            }
            '"' => {
                let mut s = String::new();
                i += 1;
                loop {
                    match chars.get(i) {
                        Some('"') => break,
                        Some(ch) => {
                            s.push(*ch);
                            i += 1;
                        }
                        None => return Err(syntax(lineno, col, "unterminated string")),
                    }
                }
                Tok::Str(s)
            }
            _ => {
                let mut s = String::new();
                while i < chars.len() && !chars[i].is_whitespace() && !is_reserved(chars[i]) {
                    s.push(chars[i]);
                    i += 1;
                }
                toks.push(Token { tok: Tok::Atom(s), col });
                continue;
            }
        };
        toks.push(Token { tok, col });
        i += 1;
    }
    Ok(toks)
}

struct Cursor<'a> {
    toks: &'a [Token],
    pos: usize,
    line: usize,
}

impl<'a> Cursor<'a> {
    fn new(toks: &'a [Token], line: usize) -> Self {
        Cursor { toks, pos: 0, line }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn col(&self) -> usize {
        self.toks
            .get(self.pos)
            .map(|t| t.col)
            .or_else(|| self.toks.last().map(|t| t.col + 1))
            .unwrap_or(1)
    }

    fn next(&mut self) -> Option<&Tok> {
        let t = self.toks.get(self.pos).map(|t| &t.tok);
        self.pos += 1;
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        let (line, col) = (self.line, self.col());
        match self.next() {
            Some(t) if *t == tok => Ok(()),
            Some(t) => Err(syntax(line, col, format!("expected {}, found {}", tok.describe(), t.describe()))),
            None => Err(syntax(line, col, format!("expected {}", tok.describe()))),
        }
    }

    fn atom(&mut self, what: &str) -> Result<String, ParseError> {
        let (line, col) = (self.line, self.col());
        match self.next() {
            Some(Tok::Atom(a)) => Ok(a.clone()),
            Some(t) => Err(syntax(line, col, format!("expected {what}, found {}", t.describe()))),
            None => Err(syntax(line, col, format!("expected {what}"))),
        }
    }

    fn number(&mut self, what: &str) -> Result<f64, ParseError> {
        let (line, col) = (self.line, self.col());
        let a = self.atom(what)?;
        a.parse::<f64>()
            .map_err(|_| syntax(line, col, format!("expected {what}, found `{a}`")))
    }

    fn done(&mut self) -> Result<(), ParseError> {
        if let Some(t) = self.peek() {
            Err(syntax(self.line, self.col(), format!("unexpected {}", t.describe())))
        } else {
            Ok(())
        }
    }
}

#[derive(PartialEq, Clone, Copy)]
enum Section {
    Preamble,
    Variables,
    CpTables,
    EvalFunctions,
}

/// Parses the documented net text format.
pub fn parse_net(text: &str) -> Result<NetDocument, ParseError> {
    let mut name = String::new();
    let mut description = String::new();
    let mut variables: Vec<VariableSpec> = Vec::new();
    let mut cp_tables: BTreeMap<String, Vec<CpStatement>> = BTreeMap::new();
    let mut eval_functions: BTreeMap<String, EvaluationFunction> = BTreeMap::new();

    let mut section = Section::Preamble;
    let mut owner: Option<String> = None;

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let toks = tokenize(raw, lineno)?;
        if toks.is_empty() {
            continue;
        }
        let mut cur = Cursor::new(&toks, lineno);

        // Section headers and preamble keywords are single leading atoms.
        if let Some(Tok::Atom(head)) = cur.peek() {
            match head.as_str() {
                "variables" if toks.len() == 1 => {
                    section = Section::Variables;
                    owner = None;
                    continue;
                }
                "cptables" if toks.len() == 1 => {
                    section = Section::CpTables;
                    owner = None;
                    continue;
                }
                "evalfunctions" if toks.len() == 1 => {
                    section = Section::EvalFunctions;
                    owner = None;
                    continue;
                }
                "net" | "description" if section == Section::Preamble => {
                    let key = head.clone();
                    cur.next();
                    let (line, col) = (cur.line, cur.col());
                    match cur.next() {
                        Some(Tok::Str(s)) => {
                            if key == "net" {
                                name = s.clone();
                            } else {
                                description = s.clone();
                            }
                        }
                        _ => return Err(syntax(line, col, "expected quoted string")),
                    }
                    cur.done()?;
                    continue;
                }
                _ => {}
            }
        }

        match section {
            Section::Preamble => {
                return Err(syntax(lineno, cur.col(), "expected `net`, `description`, or a section header"));
            }
            Section::Variables => {
                let spec = parse_variable_line(&mut cur, &variables)?;
                if variables.iter().any(|v| v.name == spec.name) {
                    return Err(ParseError::DuplicateVariable { line: lineno, name: spec.name });
                }
                variables.push(spec);
            }
            Section::CpTables => {
                if toks.len() == 1 {
                    let o = cur.atom("variable name")?;
                    require_declared(&o, &variables, lineno, 1)?;
                    cp_tables.entry(o.clone()).or_default();
                    owner = Some(o);
                } else {
                    let o = owner.clone().ok_or_else(|| {
                        syntax(lineno, cur.col(), "cp-statement before any owner variable line")
                    })?;
                    let stmt = parse_statement_line(&mut cur, &variables)?;
                    cp_tables.entry(o).or_default().push(stmt);
                }
            }
            Section::EvalFunctions => {
                if toks.len() == 1 {
                    let o = cur.atom("variable name")?;
                    require_declared(&o, &variables, lineno, 1)?;
                    eval_functions.entry(o.clone()).or_default();
                    owner = Some(o);
                } else {
                    let o = owner.clone().ok_or_else(|| {
                        syntax(lineno, cur.col(), "evaluation entry before any owner variable line")
                    })?;
                    let (context, value) = parse_ef_line(&mut cur, &variables)?;
                    eval_functions.entry(o).or_default().table.push((context, value));
                }
            }
        }
    }

    NetDocument::new(variables, cp_tables, eval_functions)
        .map(|d| d.with_metadata(name, description))
        .map_err(|e| syntax(0, 0, e.to_string()))
}

fn require_declared(
    name: &str,
    variables: &[VariableSpec],
    line: usize,
    col: usize,
) -> Result<(), ParseError> {
    if variables.iter().any(|v| v.name == name) {
        Ok(())
    } else {
        Err(syntax(line, col, format!("`{name}` is not a declared variable")))
    }
}

fn parse_variable_line(
    cur: &mut Cursor,
    declared: &[VariableSpec],
) -> Result<VariableSpec, ParseError> {
    let line = cur.line;
    let name = cur.atom("variable name")?;
    let class_col = cur.col();
    let class = match cur.atom("variable class")?.as_str() {
        "scenario" => VariableClass::Scenario,
        "evaluation" => VariableClass::Evaluation,
        "preference" => VariableClass::Preference,
        other => {
            return Err(syntax(line, class_col, format!("unknown class `{other}` (expected scenario, evaluation, or preference)")));
        }
    };
    let domain = if cur.eat(&Tok::LBrace) {
        let mut labels = Vec::new();
        if !cur.eat(&Tok::RBrace) {
            loop {
                labels.push(cur.atom("domain value")?);
                if cur.eat(&Tok::RBrace) {
                    break;
                }
                cur.expect(Tok::Comma)?;
            }
        }
        Domain::Labels(labels)
    } else if cur.eat(&Tok::LBrack) {
        let min = cur.number("range minimum")?;
        cur.expect(Tok::Comma)?;
        let max = cur.number("range maximum")?;
        cur.expect(Tok::RBrack)?;
        let buckets = if matches!(cur.peek(), Some(Tok::Atom(a)) if a == "buckets") {
            cur.next();
            cur.expect(Tok::LParen)?;
            let q1 = cur.number("quartile boundary")?;
            cur.expect(Tok::Comma)?;
            let q2 = cur.number("quartile boundary")?;
            cur.expect(Tok::Comma)?;
            let q3 = cur.number("quartile boundary")?;
            cur.expect(Tok::RParen)?;
            Some([q1, q2, q3])
        } else {
            None
        };
        Domain::Range { min, max, buckets }
    } else {
        return Err(syntax(line, cur.col(), "expected `{ ... }` or `[min, max]` domain"));
    };
    let mut parents = Vec::new();
    if cur.eat(&Tok::Arrow) {
        loop {
            let col = cur.col();
            let p = cur.atom("parent name")?;
            if !declared.iter().any(|v| v.name == p) && p != name {
                let _ = col;
                return Err(ParseError::UnknownParent { line, var: name, parent: p });
            }
            parents.push(p);
            if !cur.eat(&Tok::Comma) {
                break;
            }
        }
    }
    cur.done()?;
    Ok(VariableSpec { name, class, domain, parents })
}

fn parse_context(cur: &mut Cursor, variables: &[VariableSpec]) -> Result<Assignment, ParseError> {
    let mut context = Assignment::new();
    while cur.peek() != Some(&Tok::Colon) {
        let line = cur.line;
        let col = cur.col();
        let var = cur.atom("context variable")?;
        cur.expect(Tok::Eq)?;
        let raw = cur.atom("context value")?;
        let spec = variables.iter().find(|v| v.name == var);
        if spec.is_none() {
            return Err(syntax(line, col, format!("`{var}` is not a declared variable")));
        }
        let value = match spec.map(|s| s.class) {
            Some(VariableClass::Evaluation) => match raw.parse::<f64>() {
                Ok(n) => Value::num(n),
                Err(_) => Value::Label(raw),
            },
            _ => Value::Label(raw),
        };
        if context.insert(var.clone(), value).is_some() {
            return Err(syntax(line, col, format!("`{var}` repeated in context")));
        }
        if !cur.eat(&Tok::Comma) {
            break;
        }
    }
    Ok(context)
}

fn parse_statement_line(
    cur: &mut Cursor,
    variables: &[VariableSpec],
) -> Result<CpStatement, ParseError> {
    let context = parse_context(cur, variables)?;
    cur.expect(Tok::Colon)?;
    let mut strata = Vec::new();
    loop {
        let mut stratum = vec![cur.atom("preference value")?];
        while cur.eat(&Tok::Tilde) {
            stratum.push(cur.atom("preference value")?);
        }
        strata.push(stratum);
        if !cur.eat(&Tok::Gt) {
            break;
        }
    }
    let annotation = if cur.eat(&Tok::At) {
        Some(cur.number("annotation")?)
    } else {
        None
    };
    cur.done()?;
    Ok(CpStatement { context, strata, annotation })
}

fn parse_ef_line(
    cur: &mut Cursor,
    variables: &[VariableSpec],
) -> Result<(Assignment, f64), ParseError> {
    let context = parse_context(cur, variables)?;
    cur.expect(Tok::Colon)?;
    let value = cur.number("evaluation value")?;
    cur.done()?;
    Ok((context, value))
}

/// Renders the canonical text form. `parse_net(serialize_net(d)) == d` for
/// every document produced by [`parse_net`].
pub fn serialize_net(net: &NetDocument) -> String {
    let mut out = String::new();
    if !net.name.is_empty() {
        out.push_str(&format!("net \"{}\"\n", net.name));
    }
    if !net.description.is_empty() {
        out.push_str(&format!("description \"{}\"\n", net.description));
    }
    let mut sections: Vec<String> = Vec::new();

    if !net.variables().is_empty() {
        let mut s = String::from("variables\n");
        for v in net.variables() {
            s.push_str("  ");
            s.push_str(&v.name);
            s.push(' ');
            s.push_str(&v.class.to_string());
            match &v.domain {
                Domain::Labels(ls) => {
                    s.push_str(&format!(" {{ {} }}", ls.join(", ")));
                }
                Domain::Range { min, max, buckets } => {
                    s.push_str(&format!(" [{min}, {max}]"));
                    if let Some([q1, q2, q3]) = buckets {
                        s.push_str(&format!(" buckets({q1}, {q2}, {q3})"));
                    }
                }
            }
            if !v.parents.is_empty() {
                s.push_str(&format!(" <- {}", v.parents.join(", ")));
            }
            s.push('\n');
        }
        sections.push(s);
    }

    let context_line = |context: &Assignment, parents: &[String]| -> String {
        let mut parts = Vec::new();
        for p in parents {
            if let Some(v) = context.get(p) {
                parts.push(format!("{p}={v}"));
            }
        }
        for (k, v) in context {
            if !parents.contains(k) {
                parts.push(format!("{k}={v}"));
            }
        }
        parts.join(", ")
    };

    let owners: Vec<&VariableSpec> = net
        .variables()
        .iter()
        .filter(|v| net.cp_table(&v.name).is_some())
        .collect();
    if !owners.is_empty() {
        let mut s = String::from("cptables\n");
        for v in owners {
            s.push_str(&format!("  {}\n", v.name));
            for stmt in net.cp_table(&v.name).unwrap() {
                let ctx = context_line(&stmt.context, &v.parents);
                let rel = stmt
                    .strata
                    .iter()
                    .map(|st| st.join(" ~ "))
                    .collect::<Vec<_>>()
                    .join(" > ");
                s.push_str("    ");
                if !ctx.is_empty() {
                    s.push_str(&ctx);
                    s.push(' ');
                }
                s.push_str(&format!(": {rel}"));
                if let Some(a) = stmt.annotation {
                    s.push_str(&format!(" @ {a}"));
                }
                s.push('\n');
            }
        }
        sections.push(s);
    }

    let ef_owners: Vec<&VariableSpec> = net
        .variables()
        .iter()
        .filter(|v| net.eval_function(&v.name).is_some())
        .collect();
    if !ef_owners.is_empty() {
        let mut s = String::from("evalfunctions\n");
        for v in ef_owners {
            s.push_str(&format!("  {}\n", v.name));
            for (ctx, value) in &net.eval_function(&v.name).unwrap().table {
                let ctx = context_line(ctx, &v.parents);
                s.push_str("    ");
                if !ctx.is_empty() {
                    s.push_str(&ctx);
                    s.push(' ');
                }
                s.push_str(&format!(": {value}\n"));
            }
        }
        sections.push(s);
    }

    if !out.is_empty() && !sections.is_empty() {
        out.push('\n');
    }
    out.push_str(&sections.join("\n"));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const AIRPORT: &str = r#"
# John's preferences about cutting the line, with scenario S (a = at the
# airport), time T (o = on time), and judgement P (c = ok to cut).
net "airport line"

variables
  S scenario { a, a_bar }
  T preference { o, o_bar }
  P preference { c, c_bar } <- S, T

cptables
  T
    : o > o_bar
  P
    S=a, T=o : c_bar > c
    S=a, T=o_bar : c_bar > c
    S=a_bar, T=o : c > c_bar
    S=a_bar, T=o_bar : c_bar > c
"#;

    #[test]
    fn parses_airport_net() {
        let net = parse_net(AIRPORT).unwrap();
        assert_eq!(net.name, "airport line");
        assert_eq!(net.variables().len(), 3);
        assert_eq!(net.cp_table("P").unwrap().len(), 4);
        assert_eq!(net.cp_table("T").unwrap().len(), 1);
        assert!(net.cp_table("S").is_none());
        let p = net.variable("P").unwrap();
        assert_eq!(p.parents, vec!["S".to_string(), "T".to_string()]);
    }

    #[test]
    fn empty_document_parses() {
        let net = parse_net("").unwrap();
        assert!(net.variables().is_empty());
        let net = parse_net("variables\n").unwrap();
        assert!(net.variables().is_empty());
    }

    #[test]
    fn unknown_parent_is_an_error() {
        let err = parse_net("variables\n  P preference { y, n } <- Q\n").unwrap_err();
        assert_eq!(err, ParseError::UnknownParent { line: 2, var: "P".into(), parent: "Q".into() });
    }

    #[test]
    fn duplicate_variable_is_an_error() {
        let err = parse_net("variables\n  P preference { y, n }\n  P scenario { a }\n").unwrap_err();
        assert_eq!(err, ParseError::DuplicateVariable { line: 3, name: "P".into() });
    }

    #[test]
    fn syntax_error_carries_position() {
        let err = parse_net("variables\n  P preference y, n\n").unwrap_err();
        match err {
            ParseError::Syntax { line, col, .. } => {
                assert_eq!(line, 2);
                assert!(col > 1);
            }
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn non_ascii_labels_roundtrip() {
        let text = "variables\n  P preference { c̄, c }\n\ncptables\n  P\n    : c̄ > c\n";
        let net = parse_net(text).unwrap();
        assert_eq!(net.cp_table("P").unwrap()[0].strata[0][0], "c̄");
        let again = parse_net(&serialize_net(&net)).unwrap();
        assert_eq!(net, again);
    }

    #[test]
    fn indifference_and_annotation_roundtrip() {
        let text = "variables\n  J preference { yes, no } <- L\n  L scenario { deli, air }\n\ncptables\n  J\n    L=deli : yes ~ no @ 0.5\n    L=air : no > yes @ 0.125\n";
        let net = parse_net(text).unwrap();
        let stmts = net.cp_table("J").unwrap();
        assert_eq!(stmts[0].strata, vec![vec!["yes".to_string(), "no".to_string()]]);
        assert_eq!(stmts[0].annotation, Some(0.5));
        let again = parse_net(&serialize_net(&net)).unwrap();
        assert_eq!(net, again);
    }

    #[test]
    fn evaluation_variable_with_buckets_roundtrips() {
        let text = "variables\n  L scenario { deli, air }\n  e evaluation [0, 100] buckets(25, 50, 75) <- L\n\nevalfunctions\n  e\n    L=deli : 62\n    L=air : 10.5\n";
        let net = parse_net(text).unwrap();
        let spec = net.variable("e").unwrap();
        assert_eq!(spec.domain, Domain::Range { min: 0.0, max: 100.0, buckets: Some([25.0, 50.0, 75.0]) });
        let ef = net.eval_function("e").unwrap();
        assert_eq!(ef.table.len(), 2);
        let again = parse_net(&serialize_net(&net)).unwrap();
        assert_eq!(net, again);
    }

    #[test]
    fn serialize_is_canonical_fixed_point() {
        // Statements deliberately out of canonical order.
        let text = "variables\n  S scenario { a, b }\n  P preference { y, n } <- S\n\ncptables\n  P\n    S=b : y > n\n    S=a : n > y\n";
        let net = parse_net(text).unwrap();
        let canon = serialize_net(&net);
        assert_eq!(parse_net(&canon).unwrap(), net);
        assert_eq!(serialize_net(&parse_net(&canon).unwrap()), canon);
        // Canonical order follows the domain declaration order of S.
        let stmts = net.cp_table("P").unwrap();
        assert_eq!(stmts[0].context.get("S"), Some(&Value::label("a")));
    }
}
