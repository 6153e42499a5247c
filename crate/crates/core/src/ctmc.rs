//! The continuous-time Markov chain of a model on isomorphism classes of
//! graphs: transition rows, stochastic simulation and the master equation
//! on finite reachable spaces.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::sync::Arc;
use alloc::vec::Vec;

use num_traits::Zero;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::canon::{canonicalize, CanonicalKey};
use crate::graph::Graph;
use crate::greg::{LinearCombination, Model, Rational};
use crate::matching::enumerate_matches;
use crate::odeint::{integrate_with, steady_state, to_f64, OdeError, OdeProblem, SteadyOptions};
use crate::rewrite::{apply_rule, RewriteError};

/// Identifier recorded with every trajectory.
pub const RNG_ALGORITHM: &str = "chacha8/seed_from_u64";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CtmcError {
    #[error(transparent)]
    Rewrite(#[from] RewriteError),
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error("more than {cap} reachable states")]
    CapExceeded { cap: usize },
    #[error("end time must be positive and finite, got {0}")]
    BadEnd(f64),
    #[error("initial distribution has {got} entries for {want} states")]
    DistributionArity { got: usize, want: usize },
}

/// One application of a rule at a match, landing in another class.
#[derive(Clone, Debug)]
pub struct Transition {
    pub rule: usize,
    pub match_index: usize,
    pub target: CanonicalKey,
    pub graph: Arc<Graph>,
}

#[derive(Clone, Debug)]
pub struct TransitionRow {
    pub source: CanonicalKey,
    pub transitions: Vec<Transition>,
    /// Off-diagonal rates by target class.
    pub rates: BTreeMap<CanonicalKey, Rational>,
    /// `-Σ rates`.
    pub diagonal: Rational,
}

/// Applies every rule at every match of its left-hand side in `g`;
/// applications whose result is isomorphic to `g` are dropped.
pub fn transition_row(model: &Model, g: &Graph) -> Result<TransitionRow, RewriteError> {
    let (g, source) = canonicalize(g);
    let mut transitions = Vec::new();
    let mut rates: BTreeMap<CanonicalKey, Rational> = BTreeMap::new();
    let mut targets: BTreeMap<CanonicalKey, Arc<Graph>> = BTreeMap::new();
    for (ri, r) in model.rules.iter().enumerate() {
        for (mi, f) in enumerate_matches(r.rule.lhs(), &g).into_iter().enumerate() {
            let d = apply_rule(&r.rule, &f)?;
            let (h, key) = canonicalize(d.result());
            if key == source {
                continue;
            }
            let h = targets.entry(key.clone()).or_insert(h).clone();
            *rates.entry(key.clone()).or_insert_with(Rational::zero) += r.rate;
            transitions.push(Transition { rule: ri, match_index: mi, target: key, graph: h });
        }
    }
    let diagonal = -rates.values().fold(Rational::zero(), |a, b| a + b);
    Ok(TransitionRow { source, transitions, rates, diagonal })
}

/// `Σ_H q_GH (F(H) - F(G))`, the generator applied to `F` at `G`.
pub fn generator_action(model: &Model, g: &Graph, f: &LinearCombination) -> Result<Rational, RewriteError> {
    let row = transition_row(model, g)?;
    let here = f.eval(g);
    let mut seen: BTreeMap<&CanonicalKey, Rational> = BTreeMap::new();
    for t in &row.transitions {
        seen.entry(&t.target).or_insert_with(|| f.eval(&t.graph) - here);
    }
    Ok(row.rates.iter().map(|(k, q)| q * seen[k]).fold(Rational::zero(), |a, b| a + b))
}

struct CachedRow {
    targets: Vec<(f64, CanonicalKey, Arc<Graph>)>,
    total: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    /// Jump times, starting at 0 and strictly increasing.
    pub times: Vec<f64>,
    pub states: Vec<CanonicalKey>,
    /// Values of the tracked combinations after each jump.
    pub values: Vec<Vec<f64>>,
    pub t_end: f64,
    pub seed: u64,
    pub rng: &'static str,
    /// Whether the chain reached a state with no outgoing transitions.
    pub absorbed: bool,
}

impl Trajectory {
    /// Index of the sample in force at time `t`.
    pub fn index_at(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s <= t).saturating_sub(1)
    }

    pub fn values_at(&self, t: f64) -> &[f64] {
        &self.values[self.index_at(t)]
    }
}

/// Stochastic simulation with a per-class cache of transition rows.
pub struct Simulator<'m> {
    model: &'m Model,
    tracked: Vec<LinearCombination>,
    cache: BTreeMap<CanonicalKey, Arc<CachedRow>>,
    values: BTreeMap<CanonicalKey, Arc<Vec<f64>>>,
}

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

impl<'m> Simulator<'m> {
    pub fn new(model: &'m Model, tracked: Vec<LinearCombination>) -> Self {
        Self { model, tracked, cache: BTreeMap::new(), values: BTreeMap::new() }
    }

    fn row(&mut self, key: &CanonicalKey, g: &Graph) -> Result<Arc<CachedRow>, CtmcError> {
        if let Some(r) = self.cache.get(key) {
            return Ok(r.clone());
        }
        let row = transition_row(self.model, g)?;
        let mut graphs: BTreeMap<&CanonicalKey, &Arc<Graph>> = BTreeMap::new();
        for t in &row.transitions {
            graphs.entry(&t.target).or_insert(&t.graph);
        }
        let mut targets = Vec::with_capacity(row.rates.len());
        for (k, q) in &row.rates {
            targets.push((to_f64(q)?, k.clone(), graphs[k].clone()));
        }
        let total = targets.iter().map(|t| t.0).sum();
        let r = Arc::new(CachedRow { targets, total });
        self.cache.insert(key.clone(), r.clone());
        Ok(r)
    }

    fn observe(&mut self, key: &CanonicalKey, g: &Graph) -> Result<Arc<Vec<f64>>, CtmcError> {
        if let Some(v) = self.values.get(key) {
            return Ok(v.clone());
        }
        let v: Vec<f64> = self.tracked.iter().map(|lc| to_f64(&lc.eval(g))).collect::<Result<_, _>>()?;
        let v = Arc::new(v);
        self.values.insert(key.clone(), v.clone());
        Ok(v)
    }

    /// One trajectory from `g0` up to `t_end`.
    pub fn run(&mut self, g0: &Graph, t_end: f64, seed: u64) -> Result<Trajectory, CtmcError> {
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(CtmcError::BadEnd(t_end));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut g, mut key) = canonicalize(g0);
        let mut traj = Trajectory {
            times: alloc::vec![0.0],
            states: alloc::vec![key.clone()],
            values: alloc::vec![self.observe(&key, &g)?.to_vec()],
            t_end,
            seed,
            rng: RNG_ALGORITHM,
            absorbed: false,
        };
        let mut t = 0.0;
        loop {
            let row = self.row(&key, &g)?;
            if row.total <= 0.0 {
                traj.absorbed = true;
                return Ok(traj);
            }
            t += -libm::log(1.0 - uniform(&mut rng)) / row.total;
            if t >= t_end {
                return Ok(traj);
            }
            let mut pick = uniform(&mut rng) * row.total;
            let mut chosen = &row.targets[row.targets.len() - 1];
            for tr in &row.targets {
                if pick < tr.0 {
                    chosen = tr;
                    break;
                }
                pick -= tr.0;
            }
            key = chosen.1.clone();
            g = chosen.2.clone();
            traj.times.push(t);
            traj.states.push(key.clone());
            traj.values.push(self.observe(&key, &g)?.to_vec());
        }
    }
}

/// A finite set of classes closed under transitions, with its generator.
#[derive(Clone, Debug)]
pub struct StateSpace {
    pub states: Vec<(CanonicalKey, Arc<Graph>)>,
    pub index: BTreeMap<CanonicalKey, usize>,
    /// Off-diagonal rates `(target, q)` per state.
    pub rows: Vec<Vec<(usize, Rational)>>,
}

impl StateSpace {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Master equation `p' = pᵀQ` as an affine problem in `p`.
    pub fn master_problem(&self, p0: &[f64], t_end: f64, dt: f64) -> Result<OdeProblem, CtmcError> {
        let n = self.len();
        if p0.len() != n {
            return Err(CtmcError::DistributionArity { got: p0.len(), want: n });
        }
        let mut rows: Vec<Vec<(usize, f64)>> = alloc::vec![Vec::new(); n];
        for (i, out) in self.rows.iter().enumerate() {
            let mut exit = 0.0;
            for (j, q) in out {
                let q = to_f64(q)?;
                rows[*j].push((i, q));
                exit += q;
            }
            rows[i].push((i, -exit));
        }
        Ok(OdeProblem { rows, constants: alloc::vec![0.0; n], initial: p0.to_vec(), t_end, dt })
    }

    pub fn eval(&self, f: &LinearCombination) -> Result<Vec<f64>, CtmcError> {
        Ok(self.states.iter().map(|(_, g)| to_f64(&f.eval(g))).collect::<Result<_, _>>()?)
    }

    /// Point mass on the class of `g`, if it is in the space.
    pub fn point_mass(&self, g: &Graph) -> Option<Vec<f64>> {
        let (_, key) = canonicalize(g);
        let i = *self.index.get(&key)?;
        let mut p = alloc::vec![0.0; self.len()];
        p[i] = 1.0;
        Some(p)
    }
}

/// Breadth-first closure from `g0`; fails once more than `cap` classes
/// are found.
pub fn reachable_space(model: &Model, g0: &Graph, cap: usize) -> Result<StateSpace, CtmcError> {
    let (g, key) = canonicalize(g0);
    let mut space = StateSpace { states: Vec::new(), index: BTreeMap::new(), rows: Vec::new() };
    let mut queue = VecDeque::new();
    space.index.insert(key.clone(), 0);
    space.states.push((key, g));
    queue.push_back(0usize);
    let mut pending: Vec<Vec<(CanonicalKey, Rational)>> = alloc::vec![Vec::new()];
    while let Some(i) = queue.pop_front() {
        let row = transition_row(model, &space.states[i].1)?;
        let mut graphs: BTreeMap<CanonicalKey, Arc<Graph>> = BTreeMap::new();
        for t in row.transitions {
            graphs.entry(t.target).or_insert(t.graph);
        }
        for (k, q) in row.rates {
            if !space.index.contains_key(&k) {
                if space.states.len() == cap {
                    return Err(CtmcError::CapExceeded { cap });
                }
                let j = space.states.len();
                space.index.insert(k.clone(), j);
                space.states.push((k.clone(), graphs[&k].clone()));
                pending.push(Vec::new());
                queue.push_back(j);
            }
            pending[i].push((k, q));
        }
    }
    space.rows = pending
        .into_iter()
        .map(|r| r.into_iter().map(|(k, q)| (space.index[&k], q)).collect())
        .collect();
    Ok(space)
}

/// `E_p(t)[F]` at every integration step, as `(t, value)` pairs.
pub fn master_expectations(
    space: &StateSpace,
    p0: &[f64],
    f: &LinearCombination,
    t_end: f64,
    dt: f64,
) -> Result<Vec<(f64, f64)>, CtmcError> {
    let values = space.eval(f)?;
    let p = space.master_problem(p0, t_end, dt)?;
    let mut out = Vec::new();
    integrate_with(&p, |t, x| out.push((t, x.iter().zip(&values).map(|(a, b)| a * b).sum())))?;
    Ok(out)
}

/// Stationary distribution reached from `p0`, by integrating to steady state.
pub fn master_steady_state(
    space: &StateSpace,
    p0: &[f64],
    dt: f64,
    opts: &SteadyOptions,
) -> Result<Vec<f64>, CtmcError> {
    let p = space.master_problem(p0, 0.0, dt)?;
    Ok(steady_state(&p, opts)?.values)
}
