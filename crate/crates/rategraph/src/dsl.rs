//! The model file format: lexer, parser, printer and compiler.
//!
//! The grammar is documented in `docs/model-format.md`. Parsing yields a
//! [`ModelFile`] that keeps every name as written, so printing and parsing
//! again gives back an equal value. [`compile`] resolves names and builds
//! the graphs, rules and closure data of a [`Model`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::sync::Arc;

use rategraph_core::graph::{EdgeId, Graph, Label, NodeId};
use rategraph_core::greg::{
    ClosurePolicy, Equivalence, Invariant, LinearCombination, Model, NamedRule, Observable, Output, Rational,
};
use rategraph_core::rewrite::{RewriteError, Rule};

/// A source position. Compares equal to every other position so that
/// parsed and reprinted files compare structurally.
#[derive(Clone, Copy, Debug, Default)]
pub struct Loc {
    pub line: usize,
    pub col: usize,
}

impl PartialEq for Loc {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl fmt::Display for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{loc}: {msg}")]
pub struct DslError {
    pub loc: Loc,
    pub msg: String,
}

fn err<T>(loc: Loc, msg: impl Into<String>) -> Result<T, DslError> {
    Err(DslError { loc, msg: msg.into() })
}

#[derive(Clone, Debug, PartialEq)]
pub struct NodeDecl {
    pub name: String,
    pub label: String,
    pub loc: Loc,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EdgeDecl {
    pub name: Option<String>,
    pub src: String,
    pub tgt: String,
    pub label: String,
    pub loc: Loc,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraphDecl {
    pub name: String,
    pub nodes: Vec<NodeDecl>,
    pub edges: Vec<EdgeDecl>,
    pub loc: Loc,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RuleDecl {
    pub name: String,
    pub lhs: String,
    pub rhs: String,
    pub rate: Rational,
    /// Preserved items as `(left name, right name)`.
    pub keep: Vec<(String, String)>,
    pub loc: Loc,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NamedRef {
    pub name: String,
    pub target: String,
    pub loc: Loc,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InvariantDecl {
    pub name: String,
    pub patterns: Vec<String>,
    pub loc: Loc,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EquivalenceDecl {
    pub name: String,
    pub pattern: String,
    pub replacement: String,
    pub loc: Loc,
}

/// `coeff * k(r1) * k(r2) ... * observable`
#[derive(Clone, Debug, PartialEq)]
pub struct TermDecl {
    pub coeff: Rational,
    pub rates: Vec<String>,
    pub observable: String,
    pub loc: Loc,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputDecl {
    pub name: String,
    pub terms: Vec<TermDecl>,
    pub loc: Loc,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InitDecl {
    pub observable: String,
    pub value: Rational,
    pub loc: Loc,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PolicyDecl {
    pub max_size: Option<usize>,
    pub max_observables: Option<usize>,
    pub prune: Option<bool>,
    pub substitute: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ModelFile {
    pub name: Option<String>,
    pub node_labels: Vec<String>,
    pub edge_labels: Vec<String>,
    pub graphs: Vec<GraphDecl>,
    pub rules: Vec<RuleDecl>,
    pub observables: Vec<NamedRef>,
    pub invariants: Vec<InvariantDecl>,
    pub equivalences: Vec<EquivalenceDecl>,
    pub outputs: Vec<OutputDecl>,
    pub seeds: Vec<NamedRef>,
    pub init: Vec<InitDecl>,
    pub start: Option<NamedRef>,
    pub policy: PolicyDecl,
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    Punct(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Number(s) => write!(f, "number `{s}`"),
            Tok::Punct(p) => write!(f, "`{p}`"),
            Tok::Eof => write!(f, "end of file"),
        }
    }
}

const PUNCT: [&str; 15] = ["->", "=>", ";", ":", ",", "{", "}", "(", ")", "=", "*", "+", "-", "~", "@"];

fn lex(src: &str) -> Result<Vec<(Tok, Loc)>, DslError> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let loc = Loc { line, col };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        if c.is_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), loc));
        } else if c.is_ascii_digit() {
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.' || chars[i] == '/') {
                i += 1;
            }
            out.push((Tok::Number(chars[start..i].iter().collect()), loc));
        } else if let Some(p) = PUNCT.iter().find(|p| {
            let pc: Vec<char> = p.chars().collect();
            chars[i..].starts_with(&pc)
        }) {
            i += p.len();
            out.push((Tok::Punct(p), loc));
        } else {
            return err(loc, format!("unexpected character `{c}`"));
        }
        col += i - start;
    }
    out.push((Tok::Eof, Loc { line, col }));
    Ok(out)
}

/// Parses `3`, `1/3` or `0.25` exactly.
pub fn parse_rational(s: &str) -> Option<Rational> {
    let int = |t: &str| -> Option<i128> {
        if t.is_empty() || !t.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        t.parse().ok()
    };
    if let Some((n, d)) = s.split_once('/') {
        let (n, d) = (int(n)?, int(d)?);
        return (d != 0).then(|| Rational::new(n, d));
    }
    if let Some((w, f)) = s.split_once('.') {
        let scale = 10i128.checked_pow(u32::try_from(f.len()).ok()?)?;
        let frac = if f.is_empty() { 0 } else { int(f)? };
        return Some(Rational::new(int(w)?.checked_mul(scale)?.checked_add(frac)?, scale));
    }
    int(s).map(Rational::from_integer)
}

pub fn format_rational(r: &Rational) -> String {
    if *r.denom() == 1 {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

struct Parser {
    toks: Vec<(Tok, Loc)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].0
    }

    fn loc(&self) -> Loc {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, Loc) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn is(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn eat(&mut self, p: &str) -> bool {
        let hit = self.is(p);
        if hit {
            self.bump();
        }
        hit
    }

    fn expect(&mut self, p: &str) -> Result<(), DslError> {
        if self.eat(p) {
            Ok(())
        } else {
            err(self.loc(), format!("expected `{p}`, found {}", self.peek()))
        }
    }

    fn ident(&mut self) -> Result<(String, Loc), DslError> {
        match self.bump() {
            (Tok::Ident(s), l) => Ok((s, l)),
            (t, l) => err(l, format!("expected a name, found {t}")),
        }
    }

    fn number(&mut self) -> Result<(Rational, Loc), DslError> {
        match self.bump() {
            (Tok::Number(s), l) => match parse_rational(&s) {
                Some(r) => Ok((r, l)),
                None => err(l, format!("malformed number `{s}`")),
            },
            (t, l) => err(l, format!("expected a number, found {t}")),
        }
    }

    fn usize(&mut self) -> Result<usize, DslError> {
        let (r, l) = self.number()?;
        if !r.is_integer() || *r.numer() < 0 {
            return err(l, "expected a nonnegative integer");
        }
        usize::try_from(*r.numer()).or_else(|_| err(l, "integer too large"))
    }

    fn ident_list(&mut self) -> Result<Vec<(String, Loc)>, DslError> {
        let mut v = vec![self.ident()?];
        while self.eat(",") {
            v.push(self.ident()?);
        }
        Ok(v)
    }

    fn file(&mut self) -> Result<ModelFile, DslError> {
        let mut m = ModelFile::default();
        while *self.peek() != Tok::Eof {
            let (kw, loc) = self.ident()?;
            match kw.as_str() {
                "model" => {
                    if m.name.is_some() {
                        return err(loc, "model name given twice");
                    }
                    m.name = Some(self.ident()?.0);
                    self.expect(";")?;
                }
                "nodes" => {
                    m.node_labels.extend(self.ident_list()?.into_iter().map(|x| x.0));
                    self.expect(";")?;
                }
                "edges" => {
                    m.edge_labels.extend(self.ident_list()?.into_iter().map(|x| x.0));
                    self.expect(";")?;
                }
                "graph" => m.graphs.push(self.graph(loc)?),
                "rule" => m.rules.push(self.rule(loc)?),
                "observable" => {
                    let name = self.ident()?.0;
                    self.expect("=")?;
                    let target = self.ident()?.0;
                    self.expect(";")?;
                    m.observables.push(NamedRef { name, target, loc });
                }
                "invariant" => {
                    let name = self.ident()?.0;
                    self.expect(":")?;
                    let patterns = self.ident_list()?.into_iter().map(|x| x.0).collect();
                    self.expect(";")?;
                    m.invariants.push(InvariantDecl { name, patterns, loc });
                }
                "equivalence" => {
                    let name = self.ident()?.0;
                    self.expect(":")?;
                    let pattern = self.ident()?.0;
                    self.expect("~")?;
                    let replacement = self.ident()?.0;
                    self.expect(";")?;
                    m.equivalences.push(EquivalenceDecl { name, pattern, replacement, loc });
                }
                "output" => m.outputs.push(self.output(loc)?),
                "seed" => {
                    for (target, l) in self.ident_list()? {
                        m.seeds.push(NamedRef { name: target.clone(), target, loc: l });
                    }
                    self.expect(";")?;
                }
                "init" => {
                    let (observable, l) = self.ident()?;
                    self.expect("=")?;
                    let value = self.number()?.0;
                    self.expect(";")?;
                    m.init.push(InitDecl { observable, value, loc: l });
                }
                "start" => {
                    if m.start.is_some() {
                        return err(loc, "start graph given twice");
                    }
                    let (target, l) = self.ident()?;
                    self.expect(";")?;
                    m.start = Some(NamedRef { name: target.clone(), target, loc: l });
                }
                "policy" => {
                    let (key, l) = self.ident()?;
                    match key.as_str() {
                        "max_size" => m.policy.max_size = Some(self.usize()?),
                        "max_obs" => m.policy.max_observables = Some(self.usize()?),
                        "prune" | "substitute" => {
                            let (v, vl) = self.ident()?;
                            let b = match v.as_str() {
                                "on" => true,
                                "off" => false,
                                _ => return err(vl, "expected `on` or `off`"),
                            };
                            if key == "prune" {
                                m.policy.prune = Some(b);
                            } else {
                                m.policy.substitute = Some(b);
                            }
                        }
                        _ => return err(l, format!("unknown policy `{key}`")),
                    }
                    self.expect(";")?;
                }
                _ => return err(loc, format!("unknown declaration `{kw}`")),
            }
        }
        Ok(m)
    }

    fn graph(&mut self, loc: Loc) -> Result<GraphDecl, DslError> {
        let name = self.ident()?.0;
        self.expect("{")?;
        let mut g = GraphDecl { name, nodes: Vec::new(), edges: Vec::new(), loc };
        while !self.eat("}") {
            let item = self.loc();
            // `src -l-> tgt;` is an anonymous edge
            if matches!(self.peek(), Tok::Ident(_)) && matches!(self.peek_at(1), Tok::Punct("-")) {
                let e = self.edge_tail(None, item)?;
                g.edges.push(e);
                continue;
            }
            let names = self.ident_list()?;
            self.expect(":")?;
            let (first, _) = self.ident()?;
            if self.is("-") {
                if names.len() != 1 {
                    return err(item, "an edge declaration names exactly one edge");
                }
                self.pos -= 1;
                let e = self.edge_tail(Some(names[0].0.clone()), item)?;
                g.edges.push(e);
            } else {
                for (n, l) in names {
                    g.nodes.push(NodeDecl { name: n, label: first.clone(), loc: l });
                }
                self.expect(";")?;
            }
        }
        Ok(g)
    }

    fn edge_tail(&mut self, name: Option<String>, loc: Loc) -> Result<EdgeDecl, DslError> {
        let src = self.ident()?.0;
        self.expect("-")?;
        let label = self.ident()?.0;
        self.expect("->")?;
        let tgt = self.ident()?.0;
        self.expect(";")?;
        Ok(EdgeDecl { name, src, tgt, label, loc })
    }

    fn rule(&mut self, loc: Loc) -> Result<RuleDecl, DslError> {
        let name = self.ident()?.0;
        self.expect(":")?;
        let lhs = self.ident()?.0;
        self.expect("=>")?;
        let rhs = self.ident()?.0;
        self.expect("@")?;
        let rate = self.number()?.0;
        let mut keep = Vec::new();
        if self.eat("{") {
            while !self.eat("}") {
                let a = self.ident()?.0;
                let b = if self.eat("->") { self.ident()?.0 } else { a.clone() };
                keep.push((a, b));
                if !self.is("}") {
                    self.expect(",")?;
                }
            }
            self.eat(";");
        } else {
            self.expect(";")?;
        }
        Ok(RuleDecl { name, lhs, rhs, rate, keep, loc })
    }

    fn output(&mut self, loc: Loc) -> Result<OutputDecl, DslError> {
        let name = self.ident()?.0;
        self.expect("=")?;
        let mut terms = Vec::new();
        let mut first = true;
        loop {
            let tloc = self.loc();
            let negative = if self.eat("-") {
                true
            } else if self.eat("+") || first {
                false
            } else {
                break;
            };
            first = false;
            let mut coeff = Rational::from_integer(1);
            let mut rates = Vec::new();
            let observable = loop {
                match self.peek().clone() {
                    Tok::Number(_) => coeff *= self.number()?.0,
                    Tok::Ident(s) if s == "k" && matches!(self.peek_at(1), Tok::Punct("(")) => {
                        self.bump();
                        self.expect("(")?;
                        rates.push(self.ident()?.0);
                        self.expect(")")?;
                    }
                    Tok::Ident(_) => break self.ident()?.0,
                    t => return err(self.loc(), format!("expected a term, found {t}")),
                }
                self.expect("*")?;
            };
            if negative {
                coeff = -coeff;
            }
            terms.push(TermDecl { coeff, rates, observable, loc: tloc });
        }
        self.expect(";")?;
        Ok(OutputDecl { name, terms, loc })
    }
}

pub fn parse_model(src: &str) -> Result<ModelFile, DslError> {
    let mut p = Parser { toks: lex(src)?, pos: 0 };
    p.file()
}

/// Prints a model in the canonical layout; `parse_model` inverts it.
pub fn print_model(m: &ModelFile) -> String {
    let mut s = String::new();
    if let Some(n) = &m.name {
        writeln!(s, "model {n};").unwrap();
    }
    if !m.node_labels.is_empty() {
        writeln!(s, "nodes {};", m.node_labels.join(", ")).unwrap();
    }
    if !m.edge_labels.is_empty() {
        writeln!(s, "edges {};", m.edge_labels.join(", ")).unwrap();
    }
    for g in &m.graphs {
        s.push('\n');
        write!(s, "{}", print_graph_decl(g)).unwrap();
    }
    if !m.rules.is_empty() {
        s.push('\n');
    }
    for r in &m.rules {
        let keep: Vec<String> =
            r.keep.iter().map(|(a, b)| if a == b { a.clone() } else { format!("{a} -> {b}") }).collect();
        writeln!(s, "rule {}: {} => {} @ {} {{ {} }}", r.name, r.lhs, r.rhs, format_rational(&r.rate), keep.join(", "))
            .unwrap();
    }
    for o in &m.observables {
        writeln!(s, "observable {} = {};", o.name, o.target).unwrap();
    }
    for i in &m.invariants {
        writeln!(s, "invariant {}: {};", i.name, i.patterns.join(", ")).unwrap();
    }
    for e in &m.equivalences {
        writeln!(s, "equivalence {}: {} ~ {};", e.name, e.pattern, e.replacement).unwrap();
    }
    for o in &m.outputs {
        write!(s, "output {} =", o.name).unwrap();
        for (i, t) in o.terms.iter().enumerate() {
            let neg = t.coeff < Rational::from_integer(0);
            let mag = if neg { -t.coeff } else { t.coeff };
            match (i, neg) {
                (0, false) => s.push(' '),
                (_, true) => s.push_str(" - "),
                (_, false) => s.push_str(" + "),
            }
            write!(s, "{}", format_rational(&mag)).unwrap();
            for r in &t.rates {
                write!(s, " * k({r})").unwrap();
            }
            write!(s, " * {}", t.observable).unwrap();
        }
        s.push_str(";\n");
    }
    if !m.seeds.is_empty() {
        let names: Vec<&str> = m.seeds.iter().map(|r| r.target.as_str()).collect();
        writeln!(s, "seed {};", names.join(", ")).unwrap();
    }
    for i in &m.init {
        writeln!(s, "init {} = {};", i.observable, format_rational(&i.value)).unwrap();
    }
    if let Some(st) = &m.start {
        writeln!(s, "start {};", st.target).unwrap();
    }
    let p = &m.policy;
    if let Some(n) = p.max_size {
        writeln!(s, "policy max_size {n};").unwrap();
    }
    if let Some(n) = p.max_observables {
        writeln!(s, "policy max_obs {n};").unwrap();
    }
    let onoff = |b: bool| if b { "on" } else { "off" };
    if let Some(b) = p.prune {
        writeln!(s, "policy prune {};", onoff(b)).unwrap();
    }
    if let Some(b) = p.substitute {
        writeln!(s, "policy substitute {};", onoff(b)).unwrap();
    }
    s
}

pub fn print_graph_decl(g: &GraphDecl) -> String {
    let mut s = format!("graph {} {{\n", g.name);
    for n in &g.nodes {
        writeln!(s, "  {}: {};", n.name, n.label).unwrap();
    }
    for e in &g.edges {
        match &e.name {
            Some(n) => writeln!(s, "  {n}: {} -{}-> {};", e.src, e.label, e.tgt).unwrap(),
            None => writeln!(s, "  {} -{}-> {};", e.src, e.label, e.tgt).unwrap(),
        }
    }
    s.push_str("}\n");
    s
}

/// Label alphabets, used to render graphs back into text.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Alphabet {
    pub nodes: Vec<String>,
    pub edges: Vec<String>,
}

impl Alphabet {
    pub fn node(&self, l: Label) -> &str {
        self.nodes.get(l.0 as usize).map_or("?", String::as_str)
    }

    pub fn edge(&self, l: Label) -> &str {
        self.edges.get(l.0 as usize).map_or("?", String::as_str)
    }

    /// A graph as a declaration named `name`, nodes `n0, n1, ...`.
    pub fn graph_decl(&self, name: &str, g: &Graph) -> GraphDecl {
        GraphDecl {
            name: name.to_string(),
            nodes: g
                .nodes()
                .iter()
                .enumerate()
                .map(|(i, n)| NodeDecl { name: format!("n{i}"), label: self.node(n.label).to_string(), loc: Loc::default() })
                .collect(),
            edges: g
                .edges()
                .iter()
                .map(|e| EdgeDecl {
                    name: None,
                    src: format!("n{}", e.src),
                    tgt: format!("n{}", e.tgt),
                    label: self.edge(e.label).to_string(),
                    loc: Loc::default(),
                })
                .collect(),
            loc: Loc::default(),
        }
    }

    /// One-line rendering: `n0:walker n1:dna | n0-leg1->n1`.
    pub fn inline(&self, g: &Graph) -> String {
        let nodes: Vec<String> =
            g.nodes().iter().enumerate().map(|(i, n)| format!("n{i}:{}", self.node(n.label))).collect();
        let edges: Vec<String> =
            g.edges().iter().map(|e| format!("n{}-{}->n{}", e.src, self.edge(e.label), e.tgt)).collect();
        if edges.is_empty() {
            nodes.join(" ")
        } else {
            format!("{} | {}", nodes.join(" "), edges.join(" "))
        }
    }
}

/// A model file with names resolved.
#[derive(Clone, Debug)]
pub struct Compiled {
    pub name: String,
    pub model: Model,
    pub alphabet: Alphabet,
    pub graphs: BTreeMap<String, Arc<Graph>>,
    /// Observables by graph name and by alias.
    pub named: BTreeMap<String, Observable>,
    pub seeds: Vec<Observable>,
    pub init: Vec<(Observable, Rational)>,
    pub start: Option<Arc<Graph>>,
    pub policy: ClosurePolicy,
}

impl Compiled {
    pub fn graph(&self, name: &str) -> Option<&Arc<Graph>> {
        self.graphs.get(name)
    }

    /// A declared name for an observable, aliases first.
    pub fn name_of(&self, obs: &Observable) -> Option<&str> {
        let alias = self.model.observables.iter().find(|(_, o)| o.key() == obs.key());
        alias.map(|(n, _)| n.as_str()).or_else(|| {
            self.named.iter().find(|(_, o)| o.key() == obs.key()).map(|(n, _)| n.as_str())
        })
    }
}

fn compile_graph(g: &GraphDecl, alpha: &Alphabet) -> Result<(Graph, BTreeMap<String, Item>), DslError> {
    let mut out = Graph::new();
    let mut names: BTreeMap<String, Item> = BTreeMap::new();
    for (i, n) in g.nodes.iter().enumerate() {
        let Some(l) = alpha.nodes.iter().position(|x| *x == n.label) else {
            return err(n.loc, format!("unknown node label `{}`", n.label));
        };
        if names.insert(n.name.clone(), Item::Node(i)).is_some() {
            return err(n.loc, format!("`{}` declared twice in graph `{}`", n.name, g.name));
        }
        out.add_node(NodeId(i as u32), Label(l as u32)).expect("fresh ids");
    }
    for (i, e) in g.edges.iter().enumerate() {
        let Some(l) = alpha.edges.iter().position(|x| *x == e.label) else {
            return err(e.loc, format!("unknown edge label `{}`", e.label));
        };
        let end = |n: &str| match names.get(n) {
            Some(Item::Node(p)) => Ok(*p),
            _ => err(e.loc, format!("`{n}` is not a node of graph `{}`", g.name)),
        };
        let (s, t) = (end(&e.src)?, end(&e.tgt)?);
        out.add_edge_at(EdgeId(i as u32), s, t, Label(l as u32)).expect("fresh ids");
        if let Some(n) = &e.name {
            if names.insert(n.clone(), Item::Edge(i)).is_some() {
                return err(e.loc, format!("`{n}` declared twice in graph `{}`", g.name));
            }
        }
    }
    Ok((out, names))
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Item {
    Node(usize),
    Edge(usize),
}

fn unique<'a>(names: impl Iterator<Item = (&'a str, Loc)>, what: &str) -> Result<(), DslError> {
    let mut seen = BTreeSet::new();
    for (n, l) in names {
        if !seen.insert(n) {
            return err(l, format!("{what} `{n}` declared twice"));
        }
    }
    Ok(())
}

/// Resolves names, builds rules from correspondences and checks the model.
pub fn compile(m: &ModelFile) -> Result<Compiled, DslError> {
    let alphabet = Alphabet { nodes: m.node_labels.clone(), edges: m.edge_labels.clone() };
    let top = Loc { line: 1, col: 1 };
    unique(m.node_labels.iter().map(|n| (n.as_str(), top)), "node label")?;
    unique(m.edge_labels.iter().map(|n| (n.as_str(), top)), "edge label")?;
    unique(m.graphs.iter().map(|g| (g.name.as_str(), g.loc)).chain(m.observables.iter().map(|o| (o.name.as_str(), o.loc))), "graph or observable")?;
    unique(m.rules.iter().map(|r| (r.name.as_str(), r.loc)), "rule")?;
    unique(m.outputs.iter().map(|o| (o.name.as_str(), o.loc)), "output")?;

    let mut graphs = BTreeMap::new();
    let mut items = BTreeMap::new();
    for g in &m.graphs {
        let (cg, names) = compile_graph(g, &alphabet)?;
        graphs.insert(g.name.clone(), Arc::new(cg));
        items.insert(g.name.clone(), names);
    }
    let mut named: BTreeMap<String, Observable> =
        graphs.iter().map(|(n, g)| (n.clone(), Observable::new(g))).collect();
    let mut aliases = Vec::new();
    for o in &m.observables {
        let Some(obs) = named.get(&o.target).cloned() else {
            return err(o.loc, format!("unknown graph `{}`", o.target));
        };
        named.insert(o.name.clone(), obs.clone());
        aliases.push((o.name.clone(), obs));
    }
    let lookup = |name: &str, loc: Loc| -> Result<Observable, DslError> {
        named.get(name).cloned().map_or_else(|| err(loc, format!("unknown graph or observable `{name}`")), Ok)
    };

    let mut rules = Vec::new();
    for r in &m.rules {
        let find = |g: &str| {
            graphs.get(g).cloned().map_or_else(|| err(r.loc, format!("unknown graph `{g}` in rule `{}`", r.name)), Ok)
        };
        let (lhs, rhs) = (find(&r.lhs)?, find(&r.rhs)?);
        if r.rate <= Rational::from_integer(0) {
            return err(r.loc, format!("rule `{}` needs a positive rate", r.name));
        }
        let (li, ri) = (&items[&r.lhs], &items[&r.rhs]);
        let (mut nodes, mut edges) = (Vec::new(), Vec::new());
        for (a, b) in &r.keep {
            match (li.get(a), ri.get(b)) {
                (Some(Item::Node(x)), Some(Item::Node(y))) => {
                    if lhs.node(*x).label != rhs.node(*y).label {
                        return err(r.loc, format!("rule `{}`: `{a}` and `{b}` have different labels", r.name));
                    }
                    nodes.push((NodeId(*x as u32), NodeId(*y as u32)));
                }
                (Some(Item::Edge(x)), Some(Item::Edge(y))) => {
                    if lhs.edge(*x).label != rhs.edge(*y).label {
                        return err(r.loc, format!("rule `{}`: `{a}` and `{b}` have different labels", r.name));
                    }
                    edges.push((EdgeId(*x as u32), EdgeId(*y as u32)));
                }
                (None, _) => return err(r.loc, format!("rule `{}`: `{a}` is not in `{}`", r.name, r.lhs)),
                (_, None) => return err(r.loc, format!("rule `{}`: `{b}` is not in `{}`", r.name, r.rhs)),
                _ => return err(r.loc, format!("rule `{}`: `{a}` and `{b}` are not both nodes or both edges", r.name)),
            }
        }
        let rule = Rule::from_correspondence(lhs, rhs, &nodes, &edges)
            .or_else(|e: RewriteError| err(r.loc, format!("rule `{}`: {e}", r.name)))?;
        rules.push(NamedRule { name: r.name.clone(), rule, rate: r.rate });
    }

    let mut invariants = Vec::new();
    for i in &m.invariants {
        let patterns = i.patterns.iter().map(|p| lookup(p, i.loc)).collect::<Result<_, _>>()?;
        invariants.push(Invariant { name: i.name.clone(), patterns });
    }
    let mut equivalences = Vec::new();
    for e in &m.equivalences {
        equivalences.push(Equivalence {
            name: e.name.clone(),
            pattern: lookup(&e.pattern, e.loc)?,
            replacement: lookup(&e.replacement, e.loc)?,
        });
    }
    let mut outputs = Vec::new();
    for o in &m.outputs {
        let mut lc = LinearCombination::new();
        for t in &o.terms {
            let mut c = t.coeff;
            for r in &t.rates {
                let Some(rule) = rules.iter().find(|x| x.name == *r) else {
                    return err(t.loc, format!("unknown rule `{r}`"));
                };
                c *= rule.rate;
            }
            lc.add_term(c, lookup(&t.observable, t.loc)?);
        }
        outputs.push(Output { name: o.name.clone(), combination: lc });
    }
    let seeds = m.seeds.iter().map(|s| lookup(&s.target, s.loc)).collect::<Result<_, _>>()?;
    let init = m.init.iter().map(|i| Ok((lookup(&i.observable, i.loc)?, i.value))).collect::<Result<_, _>>()?;
    let start = match &m.start {
        Some(s) => Some(graphs.get(&s.target).cloned().map_or_else(|| err(s.loc, format!("unknown graph `{}`", s.target)), Ok)?),
        None => None,
    };
    let defaults = ClosurePolicy::default();
    let policy = ClosurePolicy {
        prune_invariants: m.policy.prune.unwrap_or(defaults.prune_invariants),
        substitute_equivalences: m.policy.substitute.unwrap_or(defaults.substitute_equivalences),
        max_size: m.policy.max_size,
        max_observables: m.policy.max_observables.unwrap_or(defaults.max_observables),
    };
    let model = Model {
        node_labels: m.node_labels.clone(),
        edge_labels: m.edge_labels.clone(),
        rules,
        invariants,
        equivalences,
        observables: aliases,
        outputs,
    };
    model.validate().or_else(|e| err(top, e.to_string()))?;
    Ok(Compiled {
        name: m.name.clone().unwrap_or_else(|| "model".into()),
        model,
        alphabet,
        graphs,
        named,
        seeds,
        init,
        start,
        policy,
    })
}
