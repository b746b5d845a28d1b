//! Deterministic solver for the grid ODE: density `u` grows at unit rate and
//! is trimmed at the top so that total mass stays 1, with the removal rate
//! `Lambda` a probability vector supported on the argmax set.
//!
//! Two independent schemes are provided. `TrimSplitting` takes a free
//! transport-growth Euler step and removes the surplus mass with an exact
//! water-level cap. `ActiveSet` maintains the flat top explicitly and solves
//! for the common level velocity. Cross-agreement of the two substitutes for
//! a convergence theorem.

use crate::drift::{compute_h, RateTable};
use crate::error::{Error, Result};
use crate::gridfn::GridFunction;
use crate::operators::lstar_into;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    TrimSplitting,
    ActiveSet,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scheme::TrimSplitting => write!(f, "trim_splitting"),
            Scheme::ActiveSet => write!(f, "active_set"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub dt: f64,
    pub scheme: Scheme,
    /// Argmax-band width in density units (`U = eps^-d u`); default `10 eps`.
    pub tau_flat: f64,
    /// Abort when cumulative clipped negative mass exceeds this.
    pub max_clip_mass: f64,
}

impl SchemeConfig {
    pub fn new(dt: f64, scheme: Scheme, grid_eps: f64) -> Self {
        SchemeConfig { dt, scheme, tau_flat: 10.0 * grid_eps, max_clip_mass: 1e-6 }
    }

    /// Positivity of the explicit step requires `dt (max rbar + 1) < 1`.
    pub fn validate(&self, rt: &RateTable) -> Result<()> {
        let bound = self.dt * (rt.max_rbar_eff() + 1.0);
        if bound >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "dt too large: dt (max rbar + 1) = {bound} >= 1"
            )));
        }
        if self.dt <= 0.0 {
            return Err(Error::InvalidParameter("dt must be positive".into()));
        }
        Ok(())
    }
}

/// Cap `f` at the level `c` solving `sum (f - c)^+ = m`; removes exactly mass
/// `m` from the top. Exact piecewise-linear solve over sorted values, no
/// iteration tolerance.
pub fn water_level_cap(f: &GridFunction, m: f64) -> Result<(GridFunction, f64)> {
    if m < 0.0 {
        if m > -1e-12 {
            return Ok((f.clone(), f.max_value()));
        }
        return Err(Error::InvalidParameter(format!("negative trim mass {m}")));
    }
    if m == 0.0 {
        return Ok((f.clone(), f.max_value()));
    }
    let mut sorted = f.values().to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let n = sorted.len();
    let mut cum = 0.0;
    let mut level = None;
    for k in 1..n {
        cum += sorted[k - 1];
        // Mass removable by capping at the next distinct value.
        if cum - k as f64 * sorted[k] >= m {
            level = Some((cum - m) / k as f64);
            break;
        }
    }
    let c = match level {
        Some(c) => c,
        None => {
            cum += sorted[n - 1];
            let min = sorted[n - 1];
            let removable = cum - n as f64 * min;
            if m > removable {
                return Err(Error::InfeasibleMass { requested: m, removable });
            }
            (cum - m) / n as f64
        }
    };
    let mut capped = f.clone();
    for v in capped.values_mut() {
        if *v > c {
            *v = c;
        }
    }
    Ok((capped, c))
}

/// One explicit step of the splitting scheme. Returns the new density, the
/// implied removal rate `(u_tilde - u_next)/dt`, the cap level, and the mass
/// clipped away from negative undershoot.
pub fn step_trim_splitting(
    rt: &RateTable,
    u: &GridFunction,
    dt: f64,
) -> Result<(GridFunction, GridFunction, f64, f64)> {
    let grid = u.grid().clone();
    let mut tilde = vec![0.0; u.values().len()];
    lstar_into(rt, u.values(), &mut tilde);
    let mut clipped = 0.0;
    for (t, &v) in tilde.iter_mut().zip(u.values()) {
        *t = v + dt * (*t + v);
        if *t < 0.0 {
            clipped -= *t;
            *t = 0.0;
        }
    }
    let tilde = GridFunction::new(grid.clone(), tilde)?;
    let m = tilde.sum_compensated() - 1.0;
    let (next, level) = water_level_cap(&tilde, m)?;
    let mut lambda = GridFunction::zeros(grid);
    for ((l, &t), &n) in lambda.values_mut().iter_mut().zip(tilde.values()).zip(next.values()) {
        *l = (t - n) / dt;
    }
    Ok((next, lambda, level, clipped))
}

/// One step of the active-set scheme. The set `active` is shrunk at sites
/// whose implied removal rate is negative and grown by sites that reach the
/// updated level (within the band `tau_u`, in mass units); the step is
/// retried after each change. Sites dropped during this step are not
/// re-admitted until the next one, which bounds the retry count.
pub fn step_active_set(
    rt: &RateTable,
    u: &GridFunction,
    active: &BTreeSet<usize>,
    dt: f64,
    tau_u: f64,
) -> Result<(GridFunction, GridFunction, BTreeSet<usize>)> {
    let grid = u.grid().clone();
    let n = grid.num_sites();
    let mut w = vec![0.0; n];
    lstar_into(rt, u.values(), &mut w);
    for (wi, &v) in w.iter_mut().zip(u.values()) {
        *wi += v;
    }

    let mut set: BTreeSet<usize> = active.clone();
    if set.is_empty() {
        return Err(Error::InvalidParameter("active set must not be empty".into()));
    }
    let mut removed: Vec<bool> = vec![false; n];
    let max_retries = 2 * n + 2;
    for _ in 0..max_retries {
        let sum_w: f64 = set.iter().map(|&x| w[x]).sum();
        let hdot = (sum_w - 1.0) / set.len() as f64;

        // Shrink: drop sites that would need negative removal.
        let negative: Vec<usize> = set.iter().copied().filter(|&x| w[x] - hdot < 0.0).collect();
        if !negative.is_empty() && negative.len() < set.len() {
            for x in negative {
                set.remove(&x);
                removed[x] = true;
            }
            continue;
        }

        let mut next = u.clone();
        {
            let vals = next.values_mut();
            for x in 0..n {
                if set.contains(&x) {
                    vals[x] += dt * hdot;
                } else {
                    vals[x] += dt * w[x];
                }
            }
        }
        let level = set.iter().map(|&x| next.value(x)).fold(f64::NEG_INFINITY, f64::max);

        // Grow: admit sites that reached the updated level.
        let mut grew = false;
        for x in 0..n {
            if !set.contains(&x) && !removed[x] && next.value(x) > level - tau_u {
                set.insert(x);
                grew = true;
            }
        }
        if grew {
            continue;
        }

        let mut lambda = GridFunction::zeros(grid);
        {
            let lv = lambda.values_mut();
            for &x in &set {
                lv[x] = w[x] - hdot;
            }
        }
        return Ok((next, lambda, set));
    }
    Err(Error::ActiveSetCycle(max_retries))
}

/// Time-indexed densities recorded on a (possibly strided) mesh.
#[derive(Debug, Clone)]
pub struct DensityPath {
    table: Arc<RateTable>,
    times: Vec<f64>,
    frames: Vec<Vec<f64>>,
}

impl DensityPath {
    pub fn grid(&self) -> &Arc<crate::grid::GridSpec> {
        self.table.grid()
    }

    pub fn table(&self) -> &Arc<RateTable> {
        &self.table
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn frame(&self, k: usize) -> &[f64] {
        &self.frames[k]
    }

    pub fn final_frame(&self) -> &[f64] {
        self.frames.last().expect("nonempty path")
    }

    pub fn gridfn(&self, k: usize) -> GridFunction {
        GridFunction::new(self.table.grid().clone(), self.frames[k].clone()).expect("same grid")
    }

    /// Density-scaled (`eps^-d`) copy of frame `k`.
    pub fn density_frame(&self, k: usize) -> Vec<f64> {
        let g = self.table.grid();
        let scale = g.epsilon().powi(-(g.dim() as i32));
        self.frames[k].iter().map(|v| v * scale).collect()
    }
}

/// Removal rates on the same mesh; frame `k` is the time average of `Lambda`
/// over `[t_k, t_{k+1})`.
#[derive(Debug, Clone)]
pub struct RemovalRatePath {
    times: Vec<f64>,
    frames: Vec<Vec<f64>>,
}

impl RemovalRatePath {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn frame(&self, k: usize) -> &[f64] {
        &self.frames[k]
    }

    /// Time-averaged spatial removal histogram over the whole run,
    /// normalized to total mass 1.
    pub fn time_average(&self) -> Vec<f64> {
        let n = self.frames[0].len();
        let mut acc = vec![0.0; n];
        let mut total = 0.0;
        for (k, frame) in self.frames.iter().enumerate() {
            let dt = self.times.get(k + 1).map(|t| t - self.times[k]).unwrap_or(0.0);
            for (a, &v) in acc.iter_mut().zip(frame) {
                *a += dt * v;
            }
            total += dt;
        }
        if total > 0.0 {
            for a in acc.iter_mut() {
                *a /= total;
            }
        }
        acc
    }
}

/// Per-run aggregates checked against the scheme guarantees.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub scheme: Scheme,
    pub steps: usize,
    /// Worst `| |u|_1 - 1 |` over all steps.
    pub mass_dev_max: f64,
    /// Worst undershoot before clipping (>= 0; 0 means none).
    pub min_u_seen: f64,
    pub clipped_mass_total: f64,
    /// Worst `| sum Lambda - 1 |` over all steps.
    pub lambda_sum_dev_max: f64,
    /// Most negative removal rate seen (0 if none).
    pub lambda_min: f64,
    /// Worst gap `|u|_inf - u(x)` over removal-support sites, in mass units.
    pub support_gap_max: f64,
    /// Accumulated support-condition integral (third line of the ODE).
    pub support_integral: f64,
    /// Growth constant from the h-field used in the sup bound.
    pub c2: f64,
    /// Max over steps of `|u(t)|_inf / (|u_0|_inf e^{(1+C2) t})`.
    pub growth_ratio_max: f64,
    /// Modulus of continuity of the final density at the requested spans.
    pub final_modulus: Vec<(f64, f64)>,
}

impl SolveReport {
    pub fn growth_bound_ok(&self) -> bool {
        self.growth_ratio_max <= 1.0 + 1e-6
    }
}

/// Integrate to time `T`, recording every `record_stride`-th step (the final
/// state is always recorded). Returns the path, the removal ledger, and the
/// per-run report.
pub fn solve(
    rt: &Arc<RateTable>,
    u0: &GridFunction,
    horizon: f64,
    cfg: &SchemeConfig,
    record_stride: usize,
) -> Result<(DensityPath, RemovalRatePath, SolveReport)> {
    cfg.validate(rt)?;
    if rt.grid() != u0.grid() {
        return Err(Error::GridMismatch);
    }
    if (u0.norm_l1() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("|u0|_1 = {} != 1", u0.norm_l1())));
    }
    if u0.min_value() < 0.0 {
        return Err(Error::InvalidParameter("u0 must be nonnegative".into()));
    }
    let stride = record_stride.max(1);
    let steps = (horizon / cfg.dt).round() as usize;
    if steps == 0 || (steps as f64 * cfg.dt - horizon).abs() > 1e-9 * horizon.max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "horizon {horizon} is not a multiple of dt {}",
            cfg.dt
        )));
    }
    let g = rt.grid();
    let tau_u = cfg.tau_flat * g.epsilon().powi(g.dim() as i32);
    let h = compute_h(rt);
    let c2 = h.report().c2;
    let u0_sup = u0.norm_linf();

    let mut u = u0.clone();
    let mut active: BTreeSet<usize> = match cfg.scheme {
        Scheme::ActiveSet => {
            let max = u0.max_value();
            u0.values()
                .iter()
                .enumerate()
                .filter(|(_, &v)| v >= max - tau_u)
                .map(|(i, _)| i)
                .collect()
        }
        Scheme::TrimSplitting => BTreeSet::new(),
    };

    let mut times = vec![0.0];
    let mut frames = vec![u.values().to_vec()];
    let mut lam_times = vec![0.0];
    let mut lam_frames: Vec<Vec<f64>> = Vec::new();
    let mut lam_window = vec![0.0; g.num_sites()];
    let mut window_span = 0.0;

    let mut report = SolveReport {
        scheme: cfg.scheme,
        steps,
        mass_dev_max: (u.sum_compensated() - 1.0).abs(),
        min_u_seen: 0.0,
        clipped_mass_total: 0.0,
        lambda_sum_dev_max: 0.0,
        lambda_min: 0.0,
        support_gap_max: 0.0,
        support_integral: 0.0,
        c2,
        growth_ratio_max: u0_sup / (u0_sup * 1.0),
        final_modulus: Vec::new(),
    };

    for k in 0..steps {
        let (next, lambda, _level, clipped) = match cfg.scheme {
            Scheme::TrimSplitting => {
                let (n, l, lv, c) = step_trim_splitting(rt, &u, cfg.dt)?;
                let _ = lv;
                (n, l, 0.0, c)
            }
            Scheme::ActiveSet => {
                let (n, l, a) = step_active_set(rt, &u, &active, cfg.dt, tau_u)?;
                active = a;
                (n, l, 0.0, 0.0)
            }
        };
        report.clipped_mass_total += clipped;
        if report.clipped_mass_total > cfg.max_clip_mass {
            return Err(Error::InvalidParameter(format!(
                "clipped mass {} exceeds budget {}",
                report.clipped_mass_total, cfg.max_clip_mass
            )));
        }
        let undershoot = -next.min_value().min(0.0);
        report.min_u_seen = report.min_u_seen.max(undershoot);

        let lam_sum = lambda.sum_compensated();
        report.lambda_sum_dev_max = report.lambda_sum_dev_max.max((lam_sum - 1.0).abs());
        report.lambda_min = report.lambda_min.min(lambda.min_value());

        let sup = next.max_value();
        let mut gap = 0.0f64;
        let mut integral = 0.0;
        for (&l, &v) in lambda.values().iter().zip(next.values()) {
            if l > 0.0 {
                gap = gap.max(sup - v);
                integral += (sup - v) * l;
            }
        }
        report.support_gap_max = report.support_gap_max.max(gap);
        report.support_integral += cfg.dt * integral;

        let t = (k + 1) as f64 * cfg.dt;
        let mass = next.sum_compensated();
        report.mass_dev_max = report.mass_dev_max.max((mass - 1.0).abs());
        let bound = u0_sup * ((1.0 + c2) * t).exp();
        report.growth_ratio_max = report.growth_ratio_max.max(next.norm_linf() / bound);

        for (wv, &lv) in lam_window.iter_mut().zip(lambda.values()) {
            *wv += cfg.dt * lv;
        }
        window_span += cfg.dt;

        u = next;
        if (k + 1) % stride == 0 || k + 1 == steps {
            times.push(t);
            frames.push(u.values().to_vec());
            lam_frames.push(lam_window.iter().map(|v| v / window_span).collect());
            lam_times.push(t);
            lam_window.iter_mut().for_each(|v| *v = 0.0);
            window_span = 0.0;
        }
    }

    for &eta in &[0.5, 0.25, 0.1] {
        report.final_modulus.push((eta, modulus_of_continuity(&u, eta)));
    }

    let path = DensityPath { table: rt.clone(), times, frames };
    let ledger = RemovalRatePath { times: lam_times, frames: lam_frames };
    Ok((path, ledger, report))
}

/// Free evolution `du/dt = L* u` with the solver's stepping, growth and
/// removal disabled; used to cross-check against the kernel oracle.
pub fn solve_free(rt: &RateTable, u0: &GridFunction, horizon: f64, dt: f64) -> Result<GridFunction> {
    if rt.grid() != u0.grid() {
        return Err(Error::GridMismatch);
    }
    let steps = (horizon / dt).round() as usize;
    let mut u = u0.values().to_vec();
    let mut scratch = vec![0.0; u.len()];
    for _ in 0..steps {
        lstar_into(rt, &u, &mut scratch);
        for (v, &s) in u.iter_mut().zip(&scratch) {
            *v += dt * s;
        }
    }
    GridFunction::new(rt.grid().clone(), u)
}

/// Modulus of continuity `sup { |U(x) - U(y)| : |x - y| <= eta }` of the
/// density-scaled field.
pub fn modulus_of_continuity(u: &GridFunction, eta: f64) -> f64 {
    let g = u.grid();
    let dens = u.density_values();
    let reach = (eta / g.epsilon()).floor() as i64;
    let side = g.side() as i64;
    let d = g.dim();
    let mut worst = 0.0f64;
    // Enumerate offsets within the eta-ball once, then slide over sites.
    let mut offsets: Vec<Vec<i64>> = vec![vec![]];
    for _ in 0..d {
        let mut next = Vec::new();
        for base in &offsets {
            for step in -reach..=reach {
                let mut o = base.clone();
                o.push(step);
                next.push(o);
            }
        }
        offsets = next;
    }
    let eta2 = (eta / g.epsilon()) * (eta / g.epsilon());
    for off in &offsets {
        let norm2: i64 = off.iter().map(|&o| o * o).sum();
        if norm2 == 0 || (norm2 as f64) > eta2 {
            continue;
        }
        for site in g.sites() {
            let mut ok = true;
            let mut other = site;
            let mut stride = g.num_sites() as i64;
            for (j, &o) in off.iter().enumerate() {
                stride /= side;
                let digit = (site as i64 / stride) % side;
                let nd = digit + o;
                if nd < 0 || nd >= side {
                    ok = false;
                    break;
                }
                other = (other as i64 + o * stride) as usize;
                let _ = j;
            }
            if ok {
                worst = worst.max((dens[site] - dens[other]).abs());
            }
        }
    }
    worst
}

/// Residual report for the integrated ODE identity.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OdeResidualReport {
    /// Worst sup-norm residual of the integrated first line over the tested
    /// dyadic subintervals.
    pub line1_residual: f64,
    pub lambda_sum_dev_max: f64,
    pub lambda_min: f64,
    /// The support-condition integral (third line).
    pub support_integral: f64,
}

/// Verify the recorded path against the integrated form of the ODE on dyadic
/// subintervals, and re-measure the removal-rate admissibility.
pub fn ode_residuals(path: &DensityPath, ledger: &RemovalRatePath) -> Result<OdeResidualReport> {
    let rt = path.table().clone();
    let n = path.num_frames();
    if n < 2 {
        return Err(Error::InvalidParameter("path too short".into()));
    }
    // Integrand w = L* u + u at each recorded frame.
    let mut w = Vec::with_capacity(n);
    for k in 0..n {
        let mut buf = vec![0.0; path.frame(k).len()];
        lstar_into(&rt, path.frame(k), &mut buf);
        for (b, &v) in buf.iter_mut().zip(path.frame(k)) {
            *b += v;
        }
        w.push(buf);
    }
    let times = path.times();
    let mut line1 = 0.0f64;
    let mut pairs: Vec<(usize, usize)> = vec![(0, n - 1)];
    for depth in 1..=2usize {
        let parts = 1 << depth;
        for p in 0..parts {
            let a = p * (n - 1) / parts;
            let b = (p + 1) * (n - 1) / parts;
            if a < b {
                pairs.push((a, b));
            }
        }
    }
    for (a, b) in pairs {
        let mut acc = vec![0.0; path.frame(0).len()];
        for k in a..b {
            let dt = times[k + 1] - times[k];
            for i in 0..acc.len() {
                acc[i] += 0.5 * dt * (w[k][i] + w[k + 1][i]) - dt * ledger.frame(k)[i];
            }
        }
        let ua = path.frame(a);
        let ub = path.frame(b);
        for i in 0..acc.len() {
            line1 = line1.max((ub[i] - ua[i] - acc[i]).abs());
        }
    }

    let mut lam_dev = 0.0f64;
    let mut lam_min = 0.0f64;
    let mut support = 0.0;
    for k in 0..ledger.num_frames() {
        let frame = ledger.frame(k);
        let sum: f64 = frame.iter().sum();
        lam_dev = lam_dev.max((sum - 1.0).abs());
        lam_min = lam_min.min(frame.iter().cloned().fold(0.0, f64::min));
        let u = path.frame(k);
        let sup = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let dt = times[k + 1] - times[k];
        support += dt * frame.iter().zip(u).map(|(&l, &v)| (sup - v) * l).sum::<f64>();
    }

    Ok(OdeResidualReport {
        line1_residual: line1,
        lambda_sum_dev_max: lam_dev,
        lambda_min: lam_min,
        support_integral: support,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::{build_q_from_b, DriftModel, MollifierSpec};
    use crate::grid::GridSpec;

    fn table(eps: f64, l: f64, drift: DriftModel) -> Arc<RateTable> {
        let g = GridSpec::new(eps, 1, l).unwrap();
        Arc::new(build_q_from_b(&drift, &MollifierSpec::default(), &g).unwrap())
    }

    fn gf(grid: &Arc<GridSpec>, vals: &[f64]) -> GridFunction {
        GridFunction::new(grid.clone(), vals.to_vec()).unwrap()
    }

    #[test]
    fn water_level_examples() {
        let g = GridSpec::new(0.5, 1, 0.5).unwrap();
        let f = gf(&g, &[0.5, 0.3, 0.2]);

        let (capped, c) = water_level_cap(&f, 0.1).unwrap();
        assert!((c - 0.4).abs() < 1e-15);
        assert_eq!(capped.values(), &[0.4, 0.3, 0.2]);

        let (capped, c) = water_level_cap(&f, 0.3).unwrap();
        assert!((c - 0.25).abs() < 1e-15);
        assert_eq!(capped.values(), &[0.25, 0.25, 0.2]);

        let (capped, c) = water_level_cap(&f, 0.0).unwrap();
        assert_eq!(c, 0.5);
        assert_eq!(capped.values(), f.values());
    }

    #[test]
    fn water_level_exactness_property() {
        // Removed mass equals m exactly (up to roundoff) for random inputs.
        use rand::{Rng, SeedableRng};
        let g = GridSpec::new(0.5, 1, 12.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..50 {
            let f = GridFunction::from_fn(g.clone(), |_| rng.gen_range(0.0..1.0));
            let total = f.norm_l1();
            let m = rng.gen_range(0.0..0.5) * total * 0.5;
            let (capped, c) = water_level_cap(&f, m).unwrap();
            let removed: f64 = f.values().iter().zip(capped.values()).map(|(a, b)| a - b).sum();
            assert!((removed - m).abs() < 1e-12 * total.max(1.0));
            assert!((capped.max_value() - c).abs() < 1e-12);
        }
    }

    #[test]
    fn water_level_infeasible() {
        let g = GridSpec::new(0.5, 1, 0.5).unwrap();
        let f = gf(&g, &[0.5, 0.3, 0.2]);
        // Removable above min level: 1.0 - 3*0.2 = 0.4.
        assert!(matches!(
            water_level_cap(&f, 0.41),
            Err(Error::InfeasibleMass { .. })
        ));
    }

    #[test]
    fn splitting_step_preserves_mass_exactly() {
        // Uniform plateau on the interior, isolated by zeros: the growth adds
        // dt mass and the cap shaves it back off the top.
        let rt = table(0.1, 2.0, DriftModel::Zero);
        let g = rt.grid().clone();
        let n = g.num_sites();
        let plateau: Vec<usize> = (n / 4..3 * n / 4).collect();
        let mut vals = vec![0.0; n];
        for &s in &plateau {
            vals[s] = 1.0 / plateau.len() as f64;
        }
        let u = gf(&g, &vals);
        let (next, lambda, _, _) = step_trim_splitting(&rt, &u, 1e-3).unwrap();
        assert!((next.sum_compensated() - 1.0).abs() < 1e-13);
        assert!(lambda.min_value() >= 0.0);
        let lam_sum = lambda.sum_compensated();
        assert!((lam_sum - 1.0).abs() < 1e-9, "sum Lambda = {lam_sum}");
    }

    #[test]
    fn water_level_rejects_globally_flat_profile() {
        // A perfectly flat vector has nothing above its minimum to shave.
        let g = GridSpec::new(0.5, 1, 1.0).unwrap();
        let u = GridFunction::from_fn(g, |_| 0.2);
        assert!(matches!(water_level_cap(&u, 1e-3), Err(Error::InfeasibleMass { .. })));
    }

    #[test]
    fn active_set_singleton_algebra() {
        // For A = {x*}: hdot = (L*u+u)(x*) - 1 and Lambda(x*) = 1.
        let rt = table(0.1, 2.0, DriftModel::Zero);
        let g = rt.grid().clone();
        let mut vals = vec![0.0; g.num_sites()];
        // A peaked configuration: mass 1 with a strict argmax at the center.
        let mid = g.num_sites() / 2;
        vals[mid] = 0.4;
        vals[mid - 1] = 0.3;
        vals[mid + 1] = 0.3;
        let u = gf(&g, &vals);
        let active: BTreeSet<usize> = [mid].into_iter().collect();
        let (_, lambda, a_next) = step_active_set(&rt, &u, &active, 1e-4, 1e-4).unwrap();
        assert!((lambda.value(mid) - 1.0).abs() < 1e-12);
        assert!((lambda.sum_compensated() - 1.0).abs() < 1e-12);
        assert!(a_next.contains(&mid));
    }

    #[test]
    fn point_mass_stays_probability_vector() {
        let rt = table(0.1, 2.0, DriftModel::tanh_well(2.0));
        let g = rt.grid().clone();
        let u0 = GridFunction::delta(g.clone(), g.num_sites() / 2);
        for scheme in [Scheme::TrimSplitting, Scheme::ActiveSet] {
            let cfg = SchemeConfig { dt: 1e-4, scheme, ..SchemeConfig::new(1e-4, scheme, 0.1) };
            let (path, _, report) = solve(&rt, &u0, 0.05, &cfg, 50).unwrap();
            assert!(report.mass_dev_max < 1e-9, "{scheme}: {report:?}");
            assert!(report.lambda_min >= -1e-12, "{scheme}: {report:?}");
            assert!(report.lambda_sum_dev_max < 1e-9, "{scheme}");
            let last = path.final_frame();
            assert!(last.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn growth_bound_holds() {
        let rt = table(0.1, 2.0, DriftModel::tanh_well(2.0));
        let g = rt.grid().clone();
        let u0 = GridFunction::from_fn(g.clone(), |x| (-x[0] * x[0]).exp());
        let total = u0.norm_l1();
        let u0 = GridFunction::new(g, u0.values().iter().map(|v| v / total).collect()).unwrap();
        let cfg = SchemeConfig::new(1e-4, Scheme::TrimSplitting, 0.1);
        let (_, _, report) = solve(&rt, &u0, 0.2, &cfg, 100).unwrap();
        assert!(report.growth_bound_ok(), "{report:?}");
    }

    #[test]
    fn free_solver_matches_dense_kernel() {
        use crate::operators::Semigroup;
        let rt = table(0.1, 2.0, DriftModel::tanh_well(2.0));
        let g = rt.grid().clone();
        let u0 = GridFunction::delta(g.clone(), g.num_sites() / 2);
        let t = 0.25;
        let stepped = solve_free(&rt, &u0, t, 2e-6).unwrap();
        let dense = Semigroup::new(rt.clone()).dense_p(t).unwrap();
        let exact = dense.apply(u0.values());
        let mut worst = 0.0f64;
        for (a, b) in stepped.values().iter().zip(&exact) {
            worst = worst.max((a - b).abs());
        }
        assert!(worst <= 1e-6, "worst = {worst}");
    }

    #[test]
    fn modulus_is_monotone_in_eta() {
        let g = GridSpec::new(0.1, 1, 2.0).unwrap();
        let u = GridFunction::from_fn(g, |x| (-x[0] * x[0]).exp());
        let m1 = modulus_of_continuity(&u, 0.1);
        let m2 = modulus_of_continuity(&u, 0.5);
        assert!(m1 <= m2);
        assert!(m1 > 0.0);
    }

    #[test]
    fn cross_scheme_agreement_near_stationarity() {
        // Miniature of the stationarity gate: flat-top initial data at a
        // coarse eps, short horizon, default band width.
        let rt = table(0.1, 6.0, DriftModel::tanh_well(2.0));
        let u0 = crate::stationary::example1().discretize(rt.grid()).unwrap();
        let t = 0.1;
        let cfg_a = SchemeConfig::new(1e-4, Scheme::TrimSplitting, 0.1);
        let cfg_b = SchemeConfig::new(1e-4, Scheme::ActiveSet, 0.1);
        let (pa, _, ra) = solve(&rt, &u0, t, &cfg_a, 1000).unwrap();
        let (pb, _, rb) = solve(&rt, &u0, t, &cfg_b, 1000).unwrap();
        assert!(ra.mass_dev_max < 1e-9 && rb.mass_dev_max < 1e-9);
        let scale = 0.1f64.powi(-1);
        let mut worst = 0.0f64;
        for (a, b) in pa.final_frame().iter().zip(pb.final_frame()) {
            worst = worst.max((a - b).abs() * scale);
        }
        assert!(worst < 1e-2, "density-scale discrepancy {worst}");
    }
}
