//! Independent stochastic runs in parallel, summarised by mean and
//! standard error at fixed sample times.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use rategraph_core::ctmc::{CtmcError, Simulator, RNG_ALGORITHM};
use rategraph_core::graph::Graph;
use rategraph_core::greg::{LinearCombination, Model};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub format_version: u32,
    pub model: String,
    pub runs: usize,
    pub seed: u64,
    pub rng: String,
    pub names: Vec<String>,
    pub times: Vec<f64>,
    /// `mean[i][j]`: sample time `i`, tracked quantity `j`.
    pub mean: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
    /// Runs that reached a state without transitions before the end.
    pub absorbed: usize,
}

/// `n` points from 0 to `t_end` inclusive.
pub fn sample_grid(t_end: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![t_end],
        _ => (0..n).map(|i| t_end * i as f64 / (n - 1) as f64).collect(),
    }
}

pub struct EnsembleConfig<'a> {
    pub model_name: &'a str,
    pub model: &'a Model,
    pub start: &'a Graph,
    pub tracked: Vec<(String, LinearCombination)>,
    pub t_end: f64,
    pub runs: usize,
    pub seed: u64,
    pub times: Vec<f64>,
}

/// Run `i` uses seed `seed + i`.
pub fn run_ensemble(config: &EnsembleConfig<'_>) -> Result<EnsembleSummary, CtmcError> {
    let tracked: Vec<LinearCombination> = config.tracked.iter().map(|(_, lc)| lc.clone()).collect();
    let samples: Vec<(Vec<Vec<f64>>, bool)> = (0..config.runs)
        .into_par_iter()
        .map_init(
            || Simulator::new(config.model, tracked.clone()),
            |sim, i| {
                let traj = sim.run(config.start, config.t_end, config.seed.wrapping_add(i as u64))?;
                let rows = config.times.iter().map(|&t| traj.values_at(t).to_vec()).collect();
                Ok((rows, traj.absorbed))
            },
        )
        .collect::<Result<_, CtmcError>>()?;
    let k = config.tracked.len();
    let n = config.runs as f64;
    let mut mean = vec![vec![0.0; k]; config.times.len()];
    let mut stderr = vec![vec![0.0; k]; config.times.len()];
    for (i, (m, se)) in mean.iter_mut().zip(stderr.iter_mut()).enumerate() {
        for j in 0..k {
            let xs = samples.iter().map(|(rows, _)| rows[i][j]);
            let mu = xs.clone().sum::<f64>() / n;
            let var = if config.runs > 1 { xs.map(|x| (x - mu) * (x - mu)).sum::<f64>() / (n - 1.0) } else { 0.0 };
            m[j] = mu;
            se[j] = (var / n).sqrt();
        }
    }
    Ok(EnsembleSummary {
        format_version: crate::system::FORMAT_VERSION,
        model: config.model_name.to_string(),
        runs: config.runs,
        seed: config.seed,
        rng: RNG_ALGORITHM.to_string(),
        names: config.tracked.iter().map(|(n, _)| n.clone()).collect(),
        times: config.times.clone(),
        mean,
        stderr,
        absorbed: samples.iter().filter(|s| s.1).count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{compile, parse_model};
    use rategraph_core::greg::{Observable, Rational};

    #[test]
    fn grid_endpoints() {
        assert_eq!(sample_grid(2.0, 3), vec![0.0, 1.0, 2.0]);
        assert_eq!(sample_grid(2.0, 1), vec![2.0]);
    }

    #[test]
    fn ensemble_is_reproducible() {
        let src = "nodes a; graph E {} graph N { x: a; } rule d: N => E @ 1; graph N3 { x, y, z: a; }";
        let c = compile(&parse_model(src).unwrap()).unwrap();
        let count = LinearCombination::single(Rational::from_integer(1), Observable::new(c.graph("N").unwrap()));
        let config = EnsembleConfig {
            model_name: "d",
            model: &c.model,
            start: c.graph("N3").unwrap(),
            tracked: vec![("N".into(), count)],
            t_end: 1.0,
            runs: 50,
            seed: 3,
            times: sample_grid(1.0, 3),
        };
        let a = run_ensemble(&config).unwrap();
        let b = run_ensemble(&config).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.mean[0], vec![3.0]);
        assert_eq!(a.stderr[0], vec![0.0]);
        assert!(a.mean[2][0] < 3.0);
    }
}
