//! Metrics between grid measures and the end-to-end convergence experiments:
//! particle-to-ODE in N, ODE-to-closed-form in eps, pathwise domination, and
//! the coupled-walker contraction sweep. Replicas fan out over seeds; all
//! aggregation runs in seed order so results are reproducible bit for bit.

use crate::coupling::{contraction_report, simulate_coupled_walkers, ContractionStats};
use crate::drift::{build_q_from_b, DriftModel, MollifierSpec, RateTable};
use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::gridfn::GridFunction;
use crate::grid::{GridSpec, SiteId};
use crate::meanfield::{modulus_of_continuity, solve, DensityPath, RemovalRatePath, SchemeConfig};
use crate::particle::{
    simulate_coupled_pair, simulate_trimmed, ParticleConfiguration, SimSeed, TrimmedRunOptions,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::sync::Arc;

/// Computable surrogates for weak convergence of grid measures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MetricSpec {
    /// Exact CDF-integral Wasserstein-1; dimension one only.
    Wasserstein1_1d,
    /// Sup distance of kernel-smoothed densities at the given bandwidth.
    SupDensity { bandwidth: f64 },
    /// Exact per-site sup distance between the measure vectors.
    SiteSup,
}

/// Distance between two mass vectors on the same grid.
pub fn metric(a: &GridFunction, b: &GridFunction, spec: &MetricSpec) -> Result<f64> {
    a.same_grid(b)?;
    let g = a.grid();
    match spec {
        MetricSpec::Wasserstein1_1d => {
            if g.dim() != 1 {
                return Err(Error::DimensionMismatch(g.dim(), 1));
            }
            let mut cum = 0.0;
            let mut acc = 0.0;
            for (&x, &y) in a.values().iter().zip(b.values()) {
                cum += x - y;
                acc += cum.abs();
            }
            Ok(acc * g.epsilon())
        }
        MetricSpec::SupDensity { bandwidth } => {
            let sa = smooth_density(a, *bandwidth);
            let sb = smooth_density(b, *bandwidth);
            Ok(sa
                .iter()
                .zip(&sb)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max))
        }
        MetricSpec::SiteSup => Ok(a
            .values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)),
    }
}

/// Gaussian-kernel smoothing of a mass vector into density units; the kernel
/// is normalized on the truncated grid so total mass is preserved.
fn smooth_density(f: &GridFunction, bandwidth: f64) -> Vec<f64> {
    let g = f.grid();
    let eps = g.epsilon();
    let d = g.dim();
    let reach = ((4.0 * bandwidth / eps).ceil() as i64).max(1);
    let side = g.side() as i64;
    let s = g.num_sites();
    // Separable kernel: apply per axis.
    let kernel: Vec<f64> = (-reach..=reach)
        .map(|k| (-(k as f64 * eps).powi(2) / (2.0 * bandwidth * bandwidth)).exp())
        .collect();
    let mut cur: Vec<f64> = f.values().to_vec();
    let mut stride = s as i64;
    for _axis in 0..d {
        stride /= side;
        let mut next = vec![0.0; s];
        for site in 0..s as i64 {
            let v = cur[site as usize];
            if v == 0.0 {
                continue;
            }
            let digit = (site / stride) % side;
            // Normalize the truncated kernel window around this site.
            let mut z = 0.0;
            for (j, k) in (-reach..=reach).zip(&kernel) {
                let nd = digit + j;
                if nd >= 0 && nd < side {
                    z += k;
                }
            }
            for (j, k) in (-reach..=reach).zip(&kernel) {
                let nd = digit + j;
                if nd >= 0 && nd < side {
                    next[(site + j * stride) as usize] += v * k / z;
                }
            }
        }
        cur = next;
    }
    let scale = eps.powi(-(d as i32));
    cur.iter_mut().for_each(|v| *v *= scale);
    cur
}

/// Build grid + rate table for one experiment leg.
pub fn build_table(
    drift: &DriftModel,
    eps: f64,
    dim: usize,
    half_width: f64,
    mollifier: &MollifierSpec,
) -> Result<Arc<RateTable>> {
    let g = GridSpec::new(eps, dim, half_width)?;
    Ok(Arc::new(build_q_from_b(drift, mollifier, &g)?))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NConvergenceRow {
    pub n: u64,
    pub mean_w1: f64,
    pub stderr_w1: f64,
    pub mean_beta_w1: f64,
    pub stderr_beta_w1: f64,
    pub seeds: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NConvergenceTable {
    pub rows: Vec<NConvergenceRow>,
    pub horizon: f64,
    pub eps: f64,
}

impl NConvergenceTable {
    pub fn strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].mean_w1 < w[0].mean_w1)
    }
}

/// Fixed eps, growing N: seed-averaged distance between the particle
/// empirical measure at `T` and the grid-ODE density, plus the distance
/// between the time-averaged removal histograms.
#[allow(clippy::too_many_arguments)]
pub fn experiment_converge_n(
    rt: &Arc<RateTable>,
    u0: &GridFunction,
    particle_counts: &[u64],
    seeds: &[u64],
    horizon: f64,
    dt: f64,
    opts: &TrimmedRunOptions,
    spec: &MetricSpec,
    reference: Option<&(DensityPath, RemovalRatePath)>,
) -> Result<NConvergenceTable> {
    let owned;
    let (path, ledger) = match reference {
        Some((p, l)) => (p, l),
        None => {
            let cfg = SchemeConfig::new(dt, crate::meanfield::Scheme::TrimSplitting, rt.grid().epsilon());
            let (p, l, _) = solve(rt, u0, horizon, &cfg, 100)?;
            owned = (p, l);
            (&owned.0, &owned.1)
        }
    };
    let u_t = GridFunction::new(rt.grid().clone(), path.final_frame().to_vec())?;
    let beta_ref = GridFunction::new(rt.grid().clone(), ledger.time_average())?;

    let mut rows = Vec::with_capacity(particle_counts.len());
    for &n in particle_counts {
        let per_seed: Vec<Result<(f64, f64)>> =
            exec::map_indexed(ExecMode::auto(seeds.len(), 1 << 20), seeds.len(), |k| {
                let seed = SimSeed(seeds[k]);
                let init = ParticleConfiguration::sample_from_density(u0, n, seed)?;
                let run = simulate_trimmed(&init, rt, horizon, seed, &[], opts)?;
                let xi = run.final_config.empirical_measure()?;
                let w1 = metric(&xi, &u_t, spec)?;
                let hist = GridFunction::new(
                    rt.grid().clone(),
                    run.ledger.time_average_histogram(rt.grid().num_sites()),
                )?;
                let bw1 = metric(&hist, &beta_ref, spec)?;
                Ok((w1, bw1))
            });
        let mut w1s = Vec::with_capacity(seeds.len());
        let mut bw1s = Vec::with_capacity(seeds.len());
        for r in per_seed {
            let (a, b) = r?;
            w1s.push(a);
            bw1s.push(b);
        }
        let (mw, sw) = mean_stderr(&w1s);
        let (mb, sb) = mean_stderr(&bw1s);
        rows.push(NConvergenceRow {
            n,
            mean_w1: mw,
            stderr_w1: sw,
            mean_beta_w1: mb,
            stderr_beta_w1: sb,
            seeds: seeds.len(),
        });
    }
    Ok(NConvergenceTable { rows, horizon, eps: rt.grid().epsilon() })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpsConvergenceRow {
    pub eps: f64,
    /// Sup over the coarsest grid of |U_eps(x, T) - u_ref(x)|.
    pub sup_density_err: f64,
    /// Modulus of continuity of U_eps(., T) over all grid pairs (reported;
    /// not comparable across resolutions, since finer grids see more pairs).
    pub omega: Vec<(f64, f64)>,
    /// Modulus over the shared probe pairs of the coarsest grid; this is the
    /// quantity the uniform-control gate compares across eps.
    pub omega_common: Vec<(f64, f64)>,
    /// Worst `|U|_inf / (|U_0|_inf e^{(1+C2)t})` over the run.
    pub growth_ratio_max: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpsConvergenceTable {
    pub rows: Vec<EpsConvergenceRow>,
    pub horizon: f64,
}

impl EpsConvergenceTable {
    pub fn strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].sup_density_err < w[0].sup_density_err)
    }

    /// Uniform control of the modulus: on the common probe pairs, omega must
    /// not increase as eps halves beyond the slack both fields are known to
    /// sit from the limit (`|omega(U) - omega(V)| <= 2 sup |U - V|`, bounded
    /// through the measured reference errors of the two rows).
    pub fn omega_non_increasing(&self, extra_slack: f64) -> bool {
        self.rows.windows(2).all(|w| {
            let slack = 2.0 * (w[0].sup_density_err + w[1].sup_density_err) + extra_slack;
            w[0].omega_common
                .iter()
                .zip(&w[1].omega_common)
                .all(|(&(_, prev), &(_, next))| next <= prev + slack)
        })
    }
}

/// Modulus of continuity of a density sample on an evenly spaced probe set.
fn modulus_on_probes(dens: &[f64], spacing: f64, eta: f64) -> f64 {
    let reach = (eta / spacing).floor() as usize;
    let mut worst = 0.0f64;
    for i in 0..dens.len() {
        for k in 1..=reach.min(dens.len() - 1 - i) {
            worst = worst.max((dens[i] - dens[i + k]).abs());
        }
    }
    worst
}

/// Shrinking eps against a fixed reference density (closed form for the
/// flat-top setup). Errors are sampled on the coarsest grid; initial data is
/// the discretized reference itself.
#[allow(clippy::too_many_arguments)]
pub fn experiment_converge_eps(
    drift: &DriftModel,
    epsilons: &[f64],
    half_width: f64,
    horizon: f64,
    mollifier: &MollifierSpec,
    cfgs: impl Fn(f64) -> SchemeConfig,
    u0_of_grid: impl Fn(&Arc<GridSpec>) -> Result<GridFunction>,
    u_ref: impl Fn(f64) -> f64,
    omega_spans: &[f64],
) -> Result<EpsConvergenceTable> {
    let coarsest = epsilons.iter().cloned().fold(0.0, f64::max);
    let mut rows = Vec::new();
    for &eps in epsilons {
        let rt = build_table(drift, eps, 1, half_width, mollifier)?;
        let u0 = u0_of_grid(rt.grid())?;
        let cfg = cfgs(eps);
        let (path, _, report) = solve(&rt, &u0, horizon, &cfg, 1000)?;
        let final_u = GridFunction::new(rt.grid().clone(), path.final_frame().to_vec())?;
        let dens = final_u.density_values();
        let g = rt.grid();
        let ratio = (coarsest / eps).round() as i64;
        let mut sup = 0.0f64;
        let mut coarse_dens = Vec::new();
        for site in g.sites() {
            let c = g.site_at(site).coords[0];
            if c.rem_euclid(ratio) != 0 {
                continue;
            }
            let x = g.position(site)[0];
            sup = sup.max((dens[site] - u_ref(x)).abs());
            coarse_dens.push(dens[site]);
        }
        let omega: Vec<(f64, f64)> =
            omega_spans.iter().map(|&eta| (eta, modulus_of_continuity(&final_u, eta))).collect();
        let omega_common: Vec<(f64, f64)> = omega_spans
            .iter()
            .map(|&eta| (eta, modulus_on_probes(&coarse_dens, coarsest, eta)))
            .collect();
        rows.push(EpsConvergenceRow {
            eps,
            sup_density_err: sup,
            omega,
            omega_common,
            growth_ratio_max: report.growth_ratio_max,
        });
    }
    Ok(EpsConvergenceTable { rows, horizon })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DominationSummary {
    pub runs: usize,
    pub passes: usize,
    pub untrimmed_mean: f64,
    pub untrimmed_stderr: f64,
    /// `N e^T`, the branching-process mean.
    pub expected_untrimmed: f64,
}

impl DominationSummary {
    pub fn all_pass(&self) -> bool {
        self.passes == self.runs
    }

    pub fn mean_within_3_stderr(&self) -> bool {
        (self.untrimmed_mean - self.expected_untrimmed).abs() <= 3.0 * self.untrimmed_stderr
    }
}

/// Coupled trimmed/untrimmed replicas: exact per-site domination plus the
/// branching-process mean of the untrimmed population.
pub fn experiment_domination(
    rt: &Arc<RateTable>,
    init: &ParticleConfiguration,
    seeds: &[u64],
    horizon: f64,
    opts: &TrimmedRunOptions,
) -> Result<DominationSummary> {
    let per_seed: Vec<Result<(bool, f64)>> =
        exec::map_indexed(ExecMode::auto(seeds.len(), 1 << 20), seeds.len(), |k| {
            let run = simulate_coupled_pair(init, rt, horizon, SimSeed(seeds[k]), &[], opts)?;
            Ok((run.domination_ok, run.untrimmed_final.total() as f64))
        });
    let mut passes = 0usize;
    let mut totals = Vec::with_capacity(seeds.len());
    for r in per_seed {
        let (ok, total) = r?;
        if ok {
            passes += 1;
        }
        totals.push(total);
    }
    let (mean, stderr) = mean_stderr(&totals);
    Ok(DominationSummary {
        runs: seeds.len(),
        passes,
        untrimmed_mean: mean,
        untrimmed_stderr: stderr,
        expected_untrimmed: init.total() as f64 * horizon.exp(),
    })
}

/// Coupled-walker replicas at one eps.
pub fn experiment_coupling(
    rt: &Arc<RateTable>,
    x0: f64,
    y0: f64,
    seeds: &[u64],
    horizon: f64,
    lipschitz: f64,
    delta: f64,
) -> Result<ContractionStats> {
    let g = rt.grid();
    let to_site = |x: f64| -> Result<SiteId> {
        let c = (x / g.epsilon()).round();
        if (x - c * g.epsilon()).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "{x} is not representable on the eps = {} grid",
                g.epsilon()
            )));
        }
        Ok(SiteId::new(vec![c as i64]))
    };
    let sx = to_site(x0)?;
    let sy = to_site(y0)?;
    let paths: Vec<Result<crate::coupling::CoupledPairPath>> =
        exec::map_indexed(ExecMode::auto(seeds.len(), 4096), seeds.len(), |k| {
            simulate_coupled_walkers(&sx, &sy, rt, horizon, SimSeed(seeds[k]))
        });
    let paths: Result<Vec<_>> = paths.into_iter().collect();
    contraction_report(&paths?, lipschitz, delta)
}

pub fn mean_stderr(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    if samples.is_empty() {
        return (0.0, 0.0);
    }
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// One verification gate: a named value compared against a threshold.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GateResult {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    /// "<=", ">=", or "==" (booleans encode as 0/1 with "==").
    pub cmp: String,
    pub pass: bool,
}

impl GateResult {
    pub fn le(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        GateResult { name: name.into(), value, threshold, cmp: "<=".into(), pass: value <= threshold }
    }

    pub fn ge(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        GateResult { name: name.into(), value, threshold, cmp: ">=".into(), pass: value >= threshold }
    }

    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        GateResult {
            name: name.into(),
            value: f64::from(u8::from(ok)),
            threshold: 1.0,
            cmp: "==".into(),
            pass: ok,
        }
    }
}

/// Reproducibility manifest embedded next to every experiment's artifacts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub config: serde_json::Value,
    pub content_hash: String,
    pub seeds: Vec<u64>,
    pub versions: ManifestVersions,
    pub gates: Vec<GateResult>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestVersions {
    pub crate_version: String,
}

impl Manifest {
    pub fn new(config: serde_json::Value, seeds: Vec<u64>, gates: Vec<GateResult>) -> Self {
        let version = env!("CARGO_PKG_VERSION").to_string();
        let mut hasher = Sha256::new();
        hasher.update(config.to_string().as_bytes());
        hasher.update(version.as_bytes());
        for s in &seeds {
            hasher.update(s.to_le_bytes());
        }
        let content_hash = format!("{:x}", hasher.finalize());
        Manifest {
            config,
            content_hash,
            seeds,
            versions: ManifestVersions { crate_version: version },
            gates,
        }
    }

    pub fn all_gates_pass(&self) -> bool {
        self.gates.iter().all(|g| g.pass)
    }

    pub fn write<P: AsRef<std::path::Path>>(&self, path: P) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Parse(format!("manifest serialization: {e}")))?;
        std::fs::write(path, text)?;
        Ok(())
    }
}
