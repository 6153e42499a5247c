//! The `sys.json` format: an expanded rate-equation system with outputs,
//! initial values and provenance, and its conversion to an ODE problem.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use rategraph_core::canon::CanonicalKey;
use rategraph_core::graph::Graph;
use rategraph_core::greg::{
    apply_closures, close, expand_system, GregError, LinearCombination, Observable, OdeSystem, Rational, Side,
};
use rategraph_core::odeint::{to_f64, OdeProblem};

use crate::dsl::{Alphabet, Compiled};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphJson {
    /// Node labels by position.
    pub nodes: Vec<String>,
    /// `(src, tgt, label)` by position.
    pub edges: Vec<(usize, usize, String)>,
}

impl GraphJson {
    pub fn new(g: &Graph, alpha: &Alphabet) -> Self {
        Self {
            nodes: g.nodes().iter().map(|n| alpha.node(n.label).to_string()).collect(),
            edges: g.edges().iter().map(|e| (e.src, e.tgt, alpha.edge(e.label).to_string())).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Labels {
    pub nodes: Vec<String>,
    pub edges: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableJson {
    pub key: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub graph: GraphJson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermJson {
    #[serde(rename = "coeff-num")]
    pub coeff_num: i128,
    #[serde(rename = "coeff-den")]
    pub coeff_den: i128,
    pub key: String,
}

impl TermJson {
    pub fn coeff(&self) -> Rational {
        Rational::new(self.coeff_num, self.coeff_den)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquationJson {
    #[serde(rename = "lhs-key")]
    pub lhs_key: String,
    pub terms: Vec<TermJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputJson {
    pub name: String,
    pub terms: Vec<TermJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialJson {
    pub key: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyJson {
    pub prune_invariants: bool,
    pub substitute_equivalences: bool,
    pub max_size: Option<usize>,
    pub max_observables: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceJson {
    #[serde(rename = "lhs-key")]
    pub lhs_key: String,
    pub rule: String,
    pub side: String,
    pub gluing: usize,
    pub target: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemFile {
    pub format_version: u32,
    pub model: String,
    pub labels: Labels,
    #[serde(rename = "constant-key")]
    pub constant_key: String,
    pub observables: Vec<ObservableJson>,
    pub equations: Vec<EquationJson>,
    pub outputs: Vec<OutputJson>,
    pub initial: Vec<InitialJson>,
    pub policy: PolicyJson,
    pub provenance: Vec<ProvenanceJson>,
    /// Observables left unexpanded; empty for a closed system.
    pub frontier: Vec<String>,
    pub closed: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum SystemError {
    #[error("unsupported format_version {0}")]
    Version(u32),
    #[error("term refers to unknown observable {0}")]
    UnknownKey(String),
    #[error("zero denominator in a coefficient")]
    ZeroDenominator,
    #[error("initial value for {0} given twice with different values")]
    ConflictingInitial(String),
    #[error("initial value for `{0}`, which the closure policy sets to zero")]
    InitialOnClosed(String),
    #[error(transparent)]
    Greg(#[from] GregError),
    #[error(transparent)]
    Ode(#[from] rategraph_core::odeint::OdeError),
}

fn terms_json(lc: &LinearCombination) -> Vec<TermJson> {
    lc.terms()
        .map(|(c, o)| TermJson { coeff_num: *c.numer(), coeff_den: *c.denom(), key: o.key().to_string() })
        .collect()
}

fn display_name(c: &Compiled, o: &Observable) -> Option<String> {
    if o.is_constant() {
        return Some("1".into());
    }
    c.name_of(o).map(str::to_string)
}

/// Expands `c` with `policy`; outputs and initial values are closed under
/// the same policy and their observables seeded. Variables without an
/// `init` start at their count in the `start` graph, if there is one. On hitting the cap the
/// partial system is returned as `Err((file, error))`.
pub fn expand_model(
    c: &Compiled,
    policy: &rategraph_core::greg::ClosurePolicy,
) -> Result<SystemFile, (Option<Box<SystemFile>>, SystemError)> {
    let mut seeds: Vec<Observable> = c.seeds.clone();
    if seeds.is_empty() {
        seeds.extend(c.model.observables.iter().map(|(_, o)| o.clone()));
    }
    let mut outputs = Vec::new();
    for o in &c.model.outputs {
        let lc = apply_closures(&o.combination, &c.model, policy).map_err(|e| (None, e.into()))?;
        seeds.extend(lc.terms().map(|(_, o)| o.clone()).filter(|o| !o.is_constant()));
        outputs.push((o.name.clone(), lc));
    }
    let mut initial: BTreeMap<CanonicalKey, (f64, String)> = BTreeMap::new();
    for (obs, v) in &c.init {
        let name = display_name(c, obs).unwrap_or_else(|| obs.key().to_string());
        let value = to_f64(v).map_err(|e| (None, e.into()))?;
        match close(obs, &c.model, policy) {
            None if value != 0.0 => return Err((None, SystemError::InitialOnClosed(name))),
            None => {}
            Some(o) => {
                if let Some((old, _)) = initial.get(o.key()) {
                    if *old != value {
                        return Err((None, SystemError::ConflictingInitial(name)));
                    }
                }
                seeds.push(o.clone());
                initial.insert(o.key().clone(), (value, name));
            }
        }
    }
    match expand_system(&c.model, &seeds, policy) {
        Ok(sys) => Ok(system_file(c, &sys, &outputs, &initial)),
        Err(GregError::CapExceeded { cap, open, partial }) => {
            let file = system_file(c, &partial, &outputs, &initial);
            Err((Some(Box::new(file)), GregError::CapExceeded { cap, open, partial }.into()))
        }
        Err(e) => Err((None, e.into())),
    }
}

fn system_file(
    c: &Compiled,
    sys: &OdeSystem,
    outputs: &[(String, LinearCombination)],
    initial: &BTreeMap<CanonicalKey, (f64, String)>,
) -> SystemFile {
    let mut observables: BTreeMap<CanonicalKey, Observable> = BTreeMap::new();
    for eq in sys.equations.values() {
        observables.insert(eq.observable.key().clone(), eq.observable.clone());
        for (_, o) in eq.rhs.terms() {
            observables.insert(o.key().clone(), o.clone());
        }
    }
    for (_, lc) in outputs {
        for (_, o) in lc.terms() {
            observables.insert(o.key().clone(), o.clone());
        }
    }
    let constant = Observable::constant();
    let mut provenance = Vec::new();
    for (k, eq) in &sys.equations {
        for p in &eq.provenance {
            provenance.push(ProvenanceJson {
                lhs_key: k.to_string(),
                rule: c.model.rules[p.rule].name.clone(),
                side: match p.side {
                    Side::Production => "production".into(),
                    Side::Consumption => "consumption".into(),
                },
                gluing: p.gluing,
                target: p.target.as_ref().map(|t| t.to_string()),
            });
        }
    }
    SystemFile {
        format_version: FORMAT_VERSION,
        model: c.name.clone(),
        labels: Labels { nodes: c.alphabet.nodes.clone(), edges: c.alphabet.edges.clone() },
        constant_key: constant.key().to_string(),
        observables: observables
            .values()
            .map(|o| ObservableJson {
                key: o.key().to_string(),
                name: display_name(c, o),
                graph: GraphJson::new(o.graph(), &c.alphabet),
            })
            .collect(),
        equations: sys
            .equations
            .iter()
            .map(|(k, eq)| EquationJson { lhs_key: k.to_string(), terms: terms_json(&eq.rhs) })
            .collect(),
        outputs: outputs.iter().map(|(n, lc)| OutputJson { name: n.clone(), terms: terms_json(lc) }).collect(),
        initial: sys
            .equations
            .iter()
            .filter_map(|(k, eq)| {
                let value = match (initial.get(k), &c.start) {
                    (Some((v, _)), _) => *v,
                    (None, Some(g)) => eq.observable.eval(g) as f64,
                    (None, None) => return None,
                };
                Some(InitialJson { key: k.to_string(), value })
            })
            .collect(),
        policy: PolicyJson {
            prune_invariants: sys.policy.prune_invariants,
            substitute_equivalences: sys.policy.substitute_equivalences,
            max_size: sys.policy.max_size,
            max_observables: sys.policy.max_observables,
        },
        provenance,
        frontier: sys.frontier.iter().map(|k| k.to_string()).collect(),
        closed: sys.is_closed(),
    }
}

/// An output name with its coefficients on the variables and its constant.
pub type OutputRow = (String, Vec<(usize, f64)>, f64);

impl SystemFile {
    pub fn check_version(&self) -> Result<(), SystemError> {
        if self.format_version != FORMAT_VERSION {
            return Err(SystemError::Version(self.format_version));
        }
        Ok(())
    }

    /// Display names of the variables in equation order; unnamed ones get
    /// `F<index>`.
    pub fn variable_names(&self) -> Vec<String> {
        self.equations
            .iter()
            .enumerate()
            .map(|(i, eq)| self.name_of(&eq.lhs_key).unwrap_or_else(|| format!("F{i}")))
            .collect()
    }

    pub fn name_of(&self, key: &str) -> Option<String> {
        self.observables.iter().find(|o| o.key == key).and_then(|o| o.name.clone())
    }

    fn row(&self, terms: &[TermJson]) -> Result<(Vec<(usize, f64)>, f64), SystemError> {
        let mut row = Vec::new();
        let mut constant = 0.0;
        for t in terms {
            if t.coeff_den == 0 {
                return Err(SystemError::ZeroDenominator);
            }
            let c = to_f64(&t.coeff())?;
            if t.key == self.constant_key {
                constant += c;
            } else {
                let Some(j) = self.equations.iter().position(|e| e.lhs_key == t.key) else {
                    return Err(SystemError::UnknownKey(t.key.clone()));
                };
                row.push((j, c));
            }
        }
        Ok((row, constant))
    }

    /// The ODE problem over the equations' observables; unset initial
    /// values are zero.
    pub fn problem(&self, t_end: f64, dt: f64) -> Result<OdeProblem, SystemError> {
        self.check_version()?;
        let mut rows = Vec::new();
        let mut constants = Vec::new();
        for eq in &self.equations {
            let (r, b) = self.row(&eq.terms)?;
            rows.push(r);
            constants.push(b);
        }
        let mut initial = vec![0.0; self.equations.len()];
        for i in &self.initial {
            let Some(j) = self.equations.iter().position(|e| e.lhs_key == i.key) else {
                return Err(SystemError::UnknownKey(i.key.clone()));
            };
            initial[j] = i.value;
        }
        Ok(OdeProblem { rows, constants, initial, t_end, dt })
    }

    /// Outputs as affine functions of the variables.
    pub fn output_rows(&self) -> Result<Vec<OutputRow>, SystemError> {
        self.outputs
            .iter()
            .map(|o| {
                let (r, b) = self.row(&o.terms)?;
                Ok((o.name.clone(), r, b))
            })
            .collect()
    }
}

pub fn eval_row(row: &[(usize, f64)], constant: f64, x: &[f64]) -> f64 {
    constant + row.iter().map(|&(j, a)| a * x[j]).sum::<f64>()
}
