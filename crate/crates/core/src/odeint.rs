//! Fixed-step RK4 for affine systems `x' = A x + b` and steady-state search.

use alloc::vec::Vec;

use crate::greg::{OdeSystem, Rational};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OdeError {
    #[error("time step must be positive and finite, got {0}")]
    BadStep(f64),
    #[error("end time must be nonnegative and finite, got {0}")]
    BadEnd(f64),
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("{got} initial values for {want} variables")]
    InitialArity { got: usize, want: usize },
    #[error("row {row} refers to variable {col}, only {n} exist")]
    BadColumn { row: usize, col: usize, n: usize },
    #[error("non-finite value at t = {0}")]
    NonFinite(f64),
    #[error("no steady state before t = {t_max}")]
    NoConvergence { t_max: f64, values: Vec<f64> },
    #[error("coefficient {0} does not fit a float")]
    Coefficient(Rational),
}

/// `x' = A x + b` with `A` stored as sparse rows.
#[derive(Clone, Debug, PartialEq)]
pub struct OdeProblem {
    pub rows: Vec<Vec<(usize, f64)>>,
    pub constants: Vec<f64>,
    pub initial: Vec<f64>,
    pub t_end: f64,
    pub dt: f64,
}

pub const DEFAULT_DT: f64 = 1e-3;

pub fn to_f64(r: &Rational) -> Result<f64, OdeError> {
    let x = *r.numer() as f64 / *r.denom() as f64;
    if x.is_finite() { Ok(x) } else { Err(OdeError::Coefficient(*r)) }
}

impl OdeProblem {
    /// The system's variables in key order; `⟨∅⟩` terms become constants.
    pub fn from_system(sys: &OdeSystem, initial: Vec<f64>, t_end: f64, dt: f64) -> Result<Self, OdeError> {
        let keys: Vec<_> = sys.equations.keys().collect();
        let mut rows = Vec::with_capacity(keys.len());
        let mut constants = Vec::with_capacity(keys.len());
        for (row, eq) in sys.equations.values().enumerate() {
            let mut r = Vec::new();
            let mut b = 0.0;
            for (c, obs) in eq.rhs.terms() {
                if obs.is_constant() {
                    b += to_f64(c)?;
                } else {
                    let col = keys.binary_search(&obs.key()).map_err(|_| OdeError::BadColumn {
                        row,
                        col: usize::MAX,
                        n: keys.len(),
                    })?;
                    r.push((col, to_f64(c)?));
                }
            }
            rows.push(r);
            constants.push(b);
        }
        Ok(Self { rows, constants, initial, t_end, dt })
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    fn check(&self) -> Result<(), OdeError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(OdeError::BadStep(self.dt));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(OdeError::BadEnd(self.t_end));
        }
        let n = self.dim();
        if self.initial.len() != n || self.constants.len() != n {
            return Err(OdeError::InitialArity { got: self.initial.len(), want: n });
        }
        for (row, r) in self.rows.iter().enumerate() {
            if let Some(&(col, _)) = r.iter().find(|(c, _)| *c >= n) {
                return Err(OdeError::BadColumn { row, col, n });
            }
        }
        Ok(())
    }

    fn deriv(&self, x: &[f64], out: &mut [f64]) {
        for (i, (row, b)) in self.rows.iter().zip(&self.constants).enumerate() {
            out[i] = b + row.iter().map(|&(j, a)| a * x[j]).sum::<f64>();
        }
    }
}

struct Rk4<'a> {
    p: &'a OdeProblem,
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl<'a> Rk4<'a> {
    fn new(p: &'a OdeProblem) -> Self {
        let n = p.dim();
        let z = alloc::vec![0.0; n];
        Self { p, k: [z.clone(), z.clone(), z.clone(), z.clone()], tmp: z }
    }

    #[allow(clippy::needless_range_loop)]
    fn step(&mut self, x: &mut [f64], h: f64) {
        let n = x.len();
        self.p.deriv(x, &mut self.k[0]);
        for i in 0..n {
            self.tmp[i] = x[i] + 0.5 * h * self.k[0][i];
        }
        self.p.deriv(&self.tmp, &mut self.k[1]);
        for i in 0..n {
            self.tmp[i] = x[i] + 0.5 * h * self.k[1][i];
        }
        self.p.deriv(&self.tmp, &mut self.k[2]);
        for i in 0..n {
            self.tmp[i] = x[i] + h * self.k[2][i];
        }
        self.p.deriv(&self.tmp, &mut self.k[3]);
        for i in 0..n {
            x[i] += h / 6.0 * (self.k[0][i] + 2.0 * self.k[1][i] + 2.0 * self.k[2][i] + self.k[3][i]);
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

/// Number of steps and their length: the smallest step count whose length
/// does not exceed `dt`, so that the last step lands on `t_end`.
fn grid(t_end: f64, dt: f64) -> (usize, f64) {
    if t_end == 0.0 {
        return (0, dt);
    }
    let n = libm::ceil(t_end / dt - 1e-9).max(1.0) as usize;
    (n, t_end / n as f64)
}

/// Calls `observe` at `t = 0` and after every step; returns the final state.
pub fn integrate_with(
    p: &OdeProblem,
    mut observe: impl FnMut(f64, &[f64]),
) -> Result<Vec<f64>, OdeError> {
    p.check()?;
    let (n, h) = grid(p.t_end, p.dt);
    let mut x = p.initial.clone();
    let mut rk = Rk4::new(p);
    observe(0.0, &x);
    for i in 1..=n {
        rk.step(&mut x, h);
        let t = if i == n { p.t_end } else { i as f64 * h };
        if x.iter().any(|v| !v.is_finite()) {
            return Err(OdeError::NonFinite(t));
        }
        observe(t, &x);
    }
    Ok(x)
}

/// The full trajectory, one sample per step.
pub fn integrate(p: &OdeProblem) -> Result<TimeSeries, OdeError> {
    let mut ts = TimeSeries::default();
    integrate_with(p, |t, x| {
        ts.times.push(t);
        ts.values.push(x.to_vec());
    })?;
    Ok(ts)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SteadyOptions {
    pub tol: f64,
    /// Steps between compared states.
    pub window: usize,
    pub t_max: f64,
}

impl Default for SteadyOptions {
    fn default() -> Self {
        Self { tol: 1e-9, window: 100, t_max: 1e4 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SteadyState {
    pub values: Vec<f64>,
    pub t_converged: f64,
}

/// Integrates with step `p.dt` until `max_i |x_i(t) - x_i(t - window·dt)|
/// / max(|x_i(t)|, 1) < tol`. `p.t_end` is ignored.
pub fn steady_state(p: &OdeProblem, opts: &SteadyOptions) -> Result<SteadyState, OdeError> {
    if opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(OdeError::BadTolerance(opts.tol));
    }
    let probe = OdeProblem { t_end: 0.0, ..p.clone() };
    probe.check()?;
    let window = opts.window.max(1);
    let mut x = p.initial.clone();
    let mut mark = x.clone();
    let mut rk = Rk4::new(p);
    let mut step = 0usize;
    loop {
        rk.step(&mut x, p.dt);
        step += 1;
        let t = step as f64 * p.dt;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(OdeError::NonFinite(t));
        }
        if step.is_multiple_of(window) {
            let change = x
                .iter()
                .zip(&mark)
                .map(|(a, b)| (a - b).abs() / a.abs().max(1.0))
                .fold(0.0, f64::max);
            if change < opts.tol {
                return Ok(SteadyState { values: x, t_converged: t });
            }
            mark.copy_from_slice(&x);
        }
        if t >= opts.t_max {
            return Err(OdeError::NoConvergence { t_max: opts.t_max, values: x });
        }
    }
}
