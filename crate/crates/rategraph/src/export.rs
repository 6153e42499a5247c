//! CSV time series and LaTeX rendering of expanded systems.

use std::fmt::Write as _;
use std::io::Write;

use rategraph_core::greg::Rational;

use crate::dsl::format_rational;
use crate::system::{SystemFile, TermJson};

/// Writes `t,<names...>` followed by one row per sample.
pub fn write_csv<W: Write>(out: W, names: &[String], times: &[f64], rows: &[Vec<f64>]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend(names.iter().cloned());
    w.write_record(&header)?;
    for (t, row) in times.iter().zip(rows) {
        let mut rec = vec![t.to_string()];
        rec.extend(row.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn latex_name(name: &str) -> String {
    let escaped = name.replace('_', "\\_");
    format!("\\langle \\mathrm{{{escaped}}} \\rangle")
}

fn latex_rational(r: &Rational) -> String {
    if *r.denom() == 1 {
        r.numer().to_string()
    } else {
        format!("\\frac{{{}}}{{{}}}", r.numer(), r.denom())
    }
}

fn latex_terms(sys: &SystemFile, names: &dyn Fn(&str) -> String, terms: &[TermJson]) -> String {
    if terms.is_empty() {
        return "0".into();
    }
    let mut s = String::new();
    for (i, t) in terms.iter().enumerate() {
        let c = t.coeff();
        let neg = c < Rational::from_integer(0);
        let mag = if neg { -c } else { c };
        match (i, neg) {
            (0, true) => s.push('-'),
            (0, false) => {}
            (_, true) => s.push_str(" - "),
            (_, false) => s.push_str(" + "),
        }
        let one = mag == Rational::from_integer(1);
        if t.key == sys.constant_key {
            s.push_str(&latex_rational(&mag));
        } else {
            if !one {
                s.push_str(&latex_rational(&mag));
                s.push_str(" \\, ");
            }
            s.push_str(&names(&t.key));
        }
    }
    s
}

/// An `align*` block with one line per equation and per output, followed by
/// a legend of the observables' graphs.
pub fn latex(sys: &SystemFile) -> String {
    let index: Vec<&str> = sys.observables.iter().map(|o| o.key.as_str()).collect();
    let names = |key: &str| -> String {
        match sys.name_of(key) {
            Some(n) => latex_name(&n),
            None => latex_name(&format!("F{}", index.iter().position(|k| *k == key).unwrap_or(0))),
        }
    };
    let mut s = String::new();
    writeln!(s, "% {} ({} equations)", sys.model, sys.equations.len()).unwrap();
    s.push_str("\\begin{align*}\n");
    let mut lines = Vec::new();
    for eq in &sys.equations {
        lines.push(format!("  \\frac{{d}}{{dt}} {} &= {}", names(&eq.lhs_key), latex_terms(sys, &names, &eq.terms)));
    }
    for o in &sys.outputs {
        let name = o.name.replace('_', "\\_");
        lines.push(format!("  \\mathrm{{{name}}} &= {}", latex_terms(sys, &names, &o.terms)));
    }
    s.push_str(&lines.join(" \\\\\n"));
    s.push_str("\n\\end{align*}\n");
    s.push_str("\\begin{itemize}\n");
    for o in &sys.observables {
        if o.key == sys.constant_key {
            continue;
        }
        let nodes: Vec<String> =
            o.graph.nodes.iter().enumerate().map(|(i, l)| format!("n_{{{i}}}\\!:\\!\\mathrm{{{l}}}")).collect();
        let edges: Vec<String> = o
            .graph
            .edges
            .iter()
            .map(|(a, b, l)| format!("n_{{{a}}} \\xrightarrow{{\\mathrm{{{l}}}}} n_{{{b}}}"))
            .collect();
        writeln!(s, "  \\item ${}$: ${}$", names(&o.key), [nodes, edges].concat().join(",\\ ")).unwrap();
    }
    s.push_str("\\end{itemize}\n");
    s
}

/// Plain-text rendering of one right-hand side, for terminal summaries.
pub fn text_terms(sys: &SystemFile, terms: &[TermJson]) -> String {
    if terms.is_empty() {
        return "0".into();
    }
    let names = sys.variable_names();
    let mut parts = Vec::new();
    for t in terms {
        let name = if t.key == sys.constant_key {
            "1".to_string()
        } else {
            sys.equations
                .iter()
                .position(|e| e.lhs_key == t.key)
                .map(|j| names[j].clone())
                .or_else(|| sys.name_of(&t.key))
                .unwrap_or_else(|| t.key.clone())
        };
        parts.push(format!("{} <{}>", format_rational(&t.coeff()), name));
    }
    parts.join(" + ").replace("+ -", "- ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{compile, parse_model};
    use crate::system::expand_model;
    use rategraph_core::greg::ClosurePolicy;

    #[test]
    fn csv_has_header_and_rows() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &["x".into(), "y".into()], &[0.0, 0.5], &[vec![1.0, 2.0], vec![3.0, 4.5]]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,x,y\n0,1,2\n0.5,3,4.5\n");
    }

    #[test]
    fn latex_of_birth_death() {
        let src = "nodes a; graph E {} graph N { x: a; } rule b: E => N @ 2; rule d: N => E @ 1/3; observable X = N; seed X;";
        let c = compile(&parse_model(src).unwrap()).unwrap();
        let f = expand_model(&c, &ClosurePolicy::default()).unwrap();
        let tex = latex(&f);
        assert!(tex.contains("\\frac{d}{dt} \\langle \\mathrm{X} \\rangle &= "), "{tex}");
        assert!(tex.contains("\\frac{1}{3}"), "{tex}");
        assert_eq!(text_terms(&f, &f.equations[0].terms).matches('<').count(), 2);
    }
}
