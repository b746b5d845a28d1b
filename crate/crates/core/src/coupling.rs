//! Two-walker shared-noise coupling: both walkers move under the Markov
//! generator with rates `rho_i`, driven by one Poisson stream per direction
//! via thinning against the envelope `sup_x rho_i(x)`. When the two rates
//! agree the walkers move together, which is what makes the displacement
//! difference contract at the drift's Lipschitz scale.

use crate::drift::RateTable;
use crate::error::{Error, Result};
use crate::grid::{Direction, SiteId};
use crate::particle::{SeedStream, SimSeed};
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

/// One realized coupled trajectory, recorded at event times.
#[derive(Debug, Clone)]
pub struct CoupledPairPath {
    pub x0: usize,
    pub y0: usize,
    pub horizon: f64,
    /// Event times at which at least one walker moved.
    pub times: Vec<f64>,
    pub x_path: Vec<u32>,
    pub y_path: Vec<u32>,
    /// True when the event moved both walkers.
    pub shared: Vec<bool>,
    /// sup over [0, horizon] of |X - Y| (piecewise constant between events).
    pub sup_distance: f64,
    pub initial_distance: f64,
    pub final_distance: f64,
}

/// Exact thinning realization of the shared-noise coupling.
pub fn simulate_coupled_walkers(
    x0: &SiteId,
    y0: &SiteId,
    rt: &RateTable,
    horizon: f64,
    seed: SimSeed,
) -> Result<CoupledPairPath> {
    let g = rt.grid().clone();
    let xi = g.index_of(x0)?;
    let yi = g.index_of(y0)?;

    let dirs: Vec<Direction> = g.directions().collect();
    let env: Vec<f64> = dirs.iter().map(|&d| rt.rho_envelope(d)).collect();
    let env_total: f64 = env.iter().sum();
    if !(env_total > 0.0 && env_total.is_finite()) {
        return Err(Error::RateOverflow);
    }

    let mut clock = seed.stream(SeedStream::Clock);
    let mut sel = seed.stream(SeedStream::Selection);
    let mut marks = seed.stream(SeedStream::Thinning);

    let dist = |a: usize, b: usize| -> f64 {
        let pa = g.position(a);
        let pb = g.position(b);
        pa.iter().zip(&pb).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
    };

    let mut x = xi;
    let mut y = yi;
    let d0 = dist(x, y);
    let mut sup = d0;
    let mut times = Vec::new();
    let mut x_path = Vec::new();
    let mut y_path = Vec::new();
    let mut shared = Vec::new();

    let mut t = 0.0f64;
    loop {
        let wait: f64 = Exp1.sample(&mut clock);
        t += wait / env_total;
        if t > horizon {
            break;
        }
        // Candidate direction proportional to its envelope.
        let pick: f64 = sel.gen::<f64>() * env_total;
        let mut acc = 0.0;
        let mut dir = dirs[dirs.len() - 1];
        let mut dir_env = env[env.len() - 1];
        for (k, &d) in dirs.iter().enumerate() {
            acc += env[k];
            if pick < acc {
                dir = d;
                dir_env = env[k];
                break;
            }
        }
        let theta: f64 = marks.gen::<f64>() * dir_env;
        let rx = rt.rho(x, dir);
        let ry = rt.rho(y, dir);
        let move_x = rx > 0.0 && theta <= rx;
        let move_y = ry > 0.0 && theta <= ry;
        if !(move_x || move_y) {
            continue;
        }
        if move_x {
            if let Some(nb) = g.neighbor_index(x, dir) {
                x = nb;
            }
        }
        if move_y {
            if let Some(nb) = g.neighbor_index(y, dir) {
                y = nb;
            }
        }
        times.push(t);
        x_path.push(x as u32);
        y_path.push(y as u32);
        shared.push(move_x && move_y);
        let d = dist(x, y);
        if d > sup {
            sup = d;
        }
    }

    Ok(CoupledPairPath {
        x0: xi,
        y0: yi,
        horizon,
        times,
        x_path,
        y_path,
        shared,
        sup_distance: sup,
        initial_distance: d0,
        final_distance: dist(x, y),
    })
}

/// Monte Carlo contraction statistics across replicas of one configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContractionStats {
    pub replicas: usize,
    pub initial_distance: f64,
    pub mean_sup_distance: f64,
    pub stderr_sup_distance: f64,
    /// `|x0 - y0| e^{C T} + delta`.
    pub threshold: f64,
    /// Empirical `P(sup |X - Y| > threshold)`.
    pub tail_probability: f64,
}

/// Empirical tail of `sup_{s <= T} |X - Y|` against the Lipschitz bound
/// `|x0 - y0| e^{C T} + delta`. All paths must share `(x0, y0, horizon)`.
pub fn contraction_report(paths: &[CoupledPairPath], c: f64, delta: f64) -> Result<ContractionStats> {
    let first = paths.first().ok_or_else(|| {
        Error::InvalidParameter("contraction_report needs at least one path".into())
    })?;
    for p in paths {
        if p.x0 != first.x0 || p.y0 != first.y0 || p.horizon != first.horizon {
            return Err(Error::InvalidParameter(
                "contraction_report paths must share (x0, y0, T)".into(),
            ));
        }
    }
    let n = paths.len() as f64;
    let mean = paths.iter().map(|p| p.sup_distance).sum::<f64>() / n;
    let var = paths.iter().map(|p| (p.sup_distance - mean).powi(2)).sum::<f64>() / n.max(2.0);
    let threshold = first.initial_distance * (c * first.horizon).exp() + delta;
    let exceed = paths.iter().filter(|p| p.sup_distance > threshold).count();
    Ok(ContractionStats {
        replicas: paths.len(),
        initial_distance: first.initial_distance,
        mean_sup_distance: mean,
        stderr_sup_distance: (var / n).sqrt(),
        threshold,
        tail_probability: exceed as f64 / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::{build_q_from_b, DriftModel, MollifierSpec};
    use crate::grid::GridSpec;
    use std::sync::Arc;

    fn table(eps: f64, l: f64, drift: DriftModel) -> Arc<RateTable> {
        let g = GridSpec::new(eps, 1, l).unwrap();
        Arc::new(build_q_from_b(&drift, &MollifierSpec::default(), &g).unwrap())
    }

    #[test]
    fn coalesced_walkers_stay_together_under_constant_rates() {
        let rt = table(0.1, 4.0, DriftModel::Zero);
        let x0 = SiteId::new(vec![0]);
        let path = simulate_coupled_walkers(&x0, &x0, &rt, 0.2, SimSeed(21)).unwrap();
        assert_eq!(path.sup_distance, 0.0);
        assert!(path.shared.iter().all(|&s| s));
        assert!(!path.times.is_empty());
    }

    #[test]
    fn distinct_starts_keep_constant_offset_under_zero_drift() {
        let rt = table(0.1, 4.0, DriftModel::Zero);
        let x0 = SiteId::new(vec![-3]);
        let y0 = SiteId::new(vec![5]);
        let path = simulate_coupled_walkers(&x0, &y0, &rt, 0.2, SimSeed(33)).unwrap();
        let g = rt.grid();
        for (&x, &y) in path.x_path.iter().zip(&path.y_path) {
            let px = g.position(x as usize)[0];
            let py = g.position(y as usize)[0];
            assert!((py - px - 0.8).abs() < 1e-12, "offset drifted: {px} vs {py}");
        }
        assert!((path.sup_distance - 0.8).abs() < 1e-12);
    }

    #[test]
    fn paths_are_bit_deterministic() {
        let rt = table(0.1, 4.0, DriftModel::tanh_well(2.0));
        let x0 = SiteId::new(vec![-1]);
        let y0 = SiteId::new(vec![1]);
        let a = simulate_coupled_walkers(&x0, &y0, &rt, 0.5, SimSeed(77)).unwrap();
        let b = simulate_coupled_walkers(&x0, &y0, &rt, 0.5, SimSeed(77)).unwrap();
        assert_eq!(a.times, b.times);
        assert_eq!(a.x_path, b.x_path);
        assert_eq!(a.y_path, b.y_path);
        assert_eq!(a.shared, b.shared);
    }

    #[test]
    fn zero_horizon_distance_is_initial() {
        let rt = table(0.1, 4.0, DriftModel::tanh_well(2.0));
        let x0 = SiteId::new(vec![0]);
        let y0 = SiteId::new(vec![2]);
        let path = simulate_coupled_walkers(&x0, &y0, &rt, 0.0, SimSeed(5)).unwrap();
        assert_eq!(path.sup_distance, path.initial_distance);
        assert!((path.initial_distance - 0.2).abs() < 1e-12);
    }

    #[test]
    fn contraction_report_zero_drift_has_empty_tail() {
        let rt = table(0.1, 4.0, DriftModel::Zero);
        let x0 = SiteId::new(vec![0]);
        let y0 = SiteId::new(vec![1]);
        let paths: Vec<_> = (0..50)
            .map(|s| simulate_coupled_walkers(&x0, &y0, &rt, 0.5, SimSeed(s)).unwrap())
            .collect();
        let stats = contraction_report(&paths, 2.0, 0.05).unwrap();
        assert_eq!(stats.tail_probability, 0.0);
        assert!((stats.mean_sup_distance - 0.1).abs() < 1e-12);
    }
}
