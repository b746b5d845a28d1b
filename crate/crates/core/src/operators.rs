//! Discrete generators on the truncated grid: `L_eps`, its adjoint, the
//! Markov generator `barL_eps`, duality, and the fundamental solution.
//!
//! The adjoint is the exact matrix transpose of the truncated `L_eps`, so
//! mass conservation and duality hold at roundoff level on the box. The
//! textbook `rho / rbar` form is kept as an independent cross-check; the two
//! coincide on interior sites.

use crate::drift::{compute_h, RateTable};
use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::gridfn::GridFunction;
use crate::meanfield::{DensityPath, RemovalRatePath};
use std::sync::Arc;

/// `(L f)(x) = sum_i r_i(x) (f(x + eps k_i) - f(x))`, suppressed directions
/// omitted.
pub fn apply_l(rt: &RateTable, f: &GridFunction) -> Result<GridFunction> {
    if rt.grid() != f.grid() {
        return Err(Error::GridMismatch);
    }
    let g = rt.grid().clone();
    let vals = f.values();
    let mut out = vec![0.0; vals.len()];
    let mode = ExecMode::auto(vals.len(), 1);
    exec::fill_indexed(mode, &mut out, |site| {
        let mut acc = 0.0;
        for dir in g.directions() {
            if let Some(nb) = g.neighbor_index(site, dir) {
                acc += rt.r(site, dir) * (vals[nb] - vals[site]);
            }
        }
        acc
    });
    GridFunction::new(rt.grid().clone(), out)
}

/// The adjoint as the exact transpose of the truncated generator:
/// `(L* f)(x) = sum_i rho_i(x) f(x + eps k_i) - rbar_eff(x) f(x)`.
pub fn apply_lstar(rt: &RateTable, f: &GridFunction) -> Result<GridFunction> {
    if rt.grid() != f.grid() {
        return Err(Error::GridMismatch);
    }
    let mut out = vec![0.0; f.values().len()];
    lstar_into(rt, f.values(), &mut out);
    GridFunction::new(rt.grid().clone(), out)
}

/// Scratch-buffer form of `apply_lstar` for time-stepping loops.
pub(crate) fn lstar_into(rt: &RateTable, vals: &[f64], out: &mut [f64]) {
    let g = rt.grid();
    let mode = ExecMode::auto(vals.len(), 1);
    exec::fill_indexed(mode, out, |site| {
        let mut acc = -rt.rbar_eff(site) * vals[site];
        for dir in g.directions() {
            if let Some(nb) = g.neighbor_index(site, dir) {
                acc += rt.rho(site, dir) * vals[nb];
            }
        }
        acc
    });
}

/// The interior formula `sum_i [r_i(x - eps k_i) f(x - eps k_i) - r_i(x) f(x)]`
/// evaluated term by term; independent arithmetic path used to cross-check
/// the transpose on interior sites.
pub fn apply_lstar_direct(rt: &RateTable, f: &GridFunction) -> Result<GridFunction> {
    if rt.grid() != f.grid() {
        return Err(Error::GridMismatch);
    }
    let g = rt.grid().clone();
    let vals = f.values();
    let mut out = vec![0.0; vals.len()];
    for (site, slot) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for dir in g.directions() {
            if let Some(back) = g.neighbor_index(site, dir.reverse(g.dim())) {
                acc += rt.r(back, dir) * vals[back];
            }
            acc -= rt.r(site, dir) * vals[site];
        }
        *slot = acc;
    }
    GridFunction::new(rt.grid().clone(), out)
}

/// The Markov generator `(barL f)(x) = sum_i rho_i(x) (f(x + eps k_i) - f(x))`.
pub fn apply_barl(rt: &RateTable, f: &GridFunction) -> Result<GridFunction> {
    if rt.grid() != f.grid() {
        return Err(Error::GridMismatch);
    }
    let g = rt.grid().clone();
    let vals = f.values();
    let mut out = vec![0.0; vals.len()];
    for (site, slot) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for dir in g.directions() {
            if let Some(nb) = g.neighbor_index(site, dir) {
                acc += rt.rho(site, dir) * (vals[nb] - vals[site]);
            }
        }
        *slot = acc;
    }
    GridFunction::new(rt.grid().clone(), out)
}

/// `|<L f, g> - <f, L* g>|`.
pub fn duality_residual(rt: &RateTable, f: &GridFunction, g: &GridFunction) -> Result<f64> {
    let lf = apply_l(rt, f)?;
    let lsg = apply_lstar(rt, g)?;
    Ok((lf.dot(g)? - f.dot(&lsg)?).abs())
}

/// Largest residual of the decomposition `L* f = barL f - h f` over interior
/// sites.
pub fn h_decomposition_residual(rt: &RateTable, f: &GridFunction) -> Result<f64> {
    let h = compute_h(rt);
    let lstar = apply_lstar(rt, f)?;
    let barl = apply_barl(rt, f)?;
    let g = rt.grid();
    let mut worst = 0.0f64;
    for site in g.sites().filter(|&s| g.is_interior(s)) {
        let lhs = lstar.value(site);
        let rhs = barl.value(site) - h.value(site) * f.value(site);
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}

/// Action of the fundamental solution `p_t` of `d/dt u = L* u` (and of the
/// growth-adjusted kernel `s_t = e^t p_t`), realized matrix-free by explicit
/// sub-stepping under the positivity constraint `dt * max rbar < 1`.
#[derive(Debug, Clone)]
pub struct Semigroup {
    table: Arc<RateTable>,
    /// Largest admissible Euler substep.
    stable_dt: f64,
}

impl Semigroup {
    pub fn new(table: Arc<RateTable>) -> Self {
        let stable_dt = 0.9 / table.max_rbar_eff();
        Semigroup { table, stable_dt }
    }

    pub fn table(&self) -> &Arc<RateTable> {
        &self.table
    }

    pub fn stable_dt(&self) -> f64 {
        self.stable_dt
    }

    fn substeps(&self, duration: f64, dt_hint: Option<f64>) -> (usize, f64) {
        let cap = match dt_hint {
            Some(h) => h.min(self.stable_dt),
            None => self.stable_dt,
        };
        let n = (duration / cap).ceil().max(1.0) as usize;
        (n, duration / n as f64)
    }

    /// Push a measure forward by `duration` under `d/dt u = L* u`.
    /// `dt_hint` caps the substep (the stability bound always applies).
    pub fn evolve_p(&self, u: &GridFunction, duration: f64, dt_hint: Option<f64>) -> Result<GridFunction> {
        if self.table.grid() != u.grid() {
            return Err(Error::GridMismatch);
        }
        if duration == 0.0 {
            return Ok(u.clone());
        }
        let (n, dt) = self.substeps(duration, dt_hint);
        let mut cur = u.values().to_vec();
        let mut scratch = vec![0.0; cur.len()];
        for _ in 0..n {
            lstar_into(&self.table, &cur, &mut scratch);
            for (c, s) in cur.iter_mut().zip(&scratch) {
                *c += dt * *s;
            }
        }
        GridFunction::new(self.table.grid().clone(), cur)
    }

    /// Push forward under the growth-adjusted kernel `s_t = e^t p_t`.
    pub fn evolve_s(&self, u: &GridFunction, duration: f64, dt_hint: Option<f64>) -> Result<GridFunction> {
        let mut out = self.evolve_p(u, duration, dt_hint)?;
        let scale = duration.exp();
        for v in out.values_mut() {
            *v *= scale;
        }
        Ok(out)
    }

    /// Dense `p_t` as a matrix `M` acting on measure vectors (`u_t = M u_0`),
    /// computed by scaling-and-squaring; the independent oracle for the
    /// matrix-free path. Refused above 2000 sites.
    pub fn dense_p(&self, t: f64) -> Result<DenseKernel> {
        let g = self.table.grid();
        let s = g.num_sites();
        if s > 2000 {
            return Err(Error::InvalidParameter(format!(
                "dense kernel limited to 2000 sites, grid has {s}"
            )));
        }
        // Assemble t * L^T.
        let mut a = vec![0.0; s * s];
        for x in 0..s {
            a[x * s + x] = -t * self.table.rbar_eff(x);
            for dir in g.directions() {
                if let Some(nb) = g.neighbor_index(x, dir) {
                    a[x * s + nb] += t * self.table.rho(x, dir);
                }
            }
        }
        Ok(DenseKernel { n: s, m: expm(&a, s) })
    }
}

/// Dense kernel matrix, row-major, acting on measure vectors.
pub struct DenseKernel {
    n: usize,
    m: Vec<f64>,
}

impl DenseKernel {
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n];
        for i in 0..n {
            let row = &self.m[i * n..(i + 1) * n];
            out[i] = row.iter().zip(u).map(|(a, b)| a * b).sum();
        }
        out
    }

    /// `p_t(x, y)`: mass arriving at `y` from a unit mass at `x`.
    pub fn entry(&self, x: usize, y: usize) -> f64 {
        self.m[y * self.n + x]
    }

    /// `sum_y p_t(x, y)` for each `x`.
    pub fn row_sums(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n];
        for y in 0..n {
            for x in 0..n {
                out[x] += self.m[y * self.n + x];
            }
        }
        out
    }
}

/// Matrix exponential by scaling-and-squaring with a Taylor series; adequate
/// for generator matrices (no cancellation blowup: off-diagonals are
/// nonnegative and the scaled norm is kept below 1/4).
fn expm(a: &[f64], n: usize) -> Vec<f64> {
    let norm = (0..n)
        .map(|i| a[i * n..(i + 1) * n].iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let k = if norm > 0.25 { (norm / 0.25).log2().ceil() as u32 } else { 0 };
    let scale = 0.5f64.powi(k as i32);
    let b: Vec<f64> = a.iter().map(|v| v * scale).collect();

    // exp(B) = sum B^j / j!
    let mut result = vec![0.0; n * n];
    for i in 0..n {
        result[i * n + i] = 1.0;
    }
    let mut term = result.clone();
    for j in 1..=60 {
        term = matmul(&term, &b, n);
        for t in term.iter_mut() {
            *t /= j as f64;
        }
        let tnorm: f64 = term.iter().map(|v| v.abs()).sum();
        for (r, t) in result.iter_mut().zip(&term) {
            *r += *t;
        }
        if tnorm < 1e-300 || tnorm < 1e-18 * result.iter().map(|v| v.abs()).sum::<f64>() {
            break;
        }
    }
    for _ in 0..k {
        result = matmul(&result, &result, n);
    }
    result
}

fn matmul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    let mode = ExecMode::auto(n, n * n / 64 + 1);
    let rows: Vec<Vec<f64>> = exec::map_indexed(mode, n, |i| {
        let mut row = vec![0.0; n];
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            let brow = &b[k * n..(k + 1) * n];
            for (slot, &bv) in row.iter_mut().zip(brow) {
                *slot += aik * bv;
            }
        }
        row
    });
    for (i, row) in rows.into_iter().enumerate() {
        out[i * n..(i + 1) * n].copy_from_slice(&row);
    }
    out
}

/// Sup-norm residual of the Duhamel identity
/// `u(t) = u(s) s_{t-s} - int_s^t Lambda_tau s_{t-tau} d tau`
/// with the time integral evaluated by the trapezoid rule on the recorded
/// mesh. Both kernel actions reuse the path's own mesh step, composed
/// interval by interval.
pub fn duhamel_residual(
    path: &DensityPath,
    ledger: &RemovalRatePath,
    s: f64,
    t: f64,
) -> Result<f64> {
    if s > t {
        return Err(Error::InvalidParameter(format!("need s <= t, got s={s}, t={t}")));
    }
    let times = path.times();
    let horizon = *times.last().expect("nonempty path");
    if t > horizon + 1e-12 || s < times[0] - 1e-12 {
        return Err(Error::HorizonExceeded { s, t, horizon });
    }
    let js = index_on_mesh(times, s)?;
    let jt = index_on_mesh(times, t)?;
    if js == jt {
        return Ok(0.0);
    }

    let rt = path.table().clone();
    let sg = Semigroup::new(rt);
    let grid = path.grid().clone();

    // Accumulate A_j = sum_{j' <= j} w_{j'} s_{tau_j - tau_j'} Lambda_j'
    // stepping the whole accumulator forward one mesh interval at a time.
    let mut acc = GridFunction::zeros(grid.clone());
    for j in js..=jt {
        if j > js {
            let delta = times[j] - times[j - 1];
            acc = sg.evolve_s(&acc, delta, Some(delta))?;
        }
        let delta_next = if j < jt { times[j + 1] - times[j] } else { times[j] - times[j - 1] };
        let w = if j == js || j == jt { 0.5 * delta_next } else { 0.5 * (times[j + 1] - times[j - 1]) };
        // Lambda frame k covers [t_k, t_{k+1}); reuse the last frame at t.
        let frame = ledger.frame(j.min(ledger.num_frames() - 1));
        let acc_vals = acc.values_mut();
        for (slot, &lam) in acc_vals.iter_mut().zip(frame) {
            *slot += w * lam;
        }
    }

    // Transported initial slice, composed over the same intervals.
    let mut prop = GridFunction::new(grid, path.frame(js).to_vec())?;
    for j in js + 1..=jt {
        let delta = times[j] - times[j - 1];
        prop = sg.evolve_s(&prop, delta, Some(delta))?;
    }

    let target = path.frame(jt);
    let mut worst = 0.0f64;
    for ((&u, &p), &a) in target.iter().zip(prop.values()).zip(acc.values()) {
        worst = worst.max((u - (p - a)).abs());
    }
    Ok(worst)
}

fn index_on_mesh(times: &[f64], t: f64) -> Result<usize> {
    let step = if times.len() > 1 { times[1] - times[0] } else { 1.0 };
    for (j, &tj) in times.iter().enumerate() {
        if (tj - t).abs() <= 1e-9 * step.max(1e-12) {
            return Ok(j);
        }
    }
    Err(Error::InvalidParameter(format!("time {t} is not on the recorded mesh")))
}
