//! Drift fields, the mollified jump-rate construction `q_{eps,i}`, and the
//! resulting rate tables.
//!
//! The construction sets `g_i = (b . e_i)^+ * eta` and `g_{i+d} = -b . e_i + g_i`,
//! so the discrete drift `sum_i q_i k_i` reproduces `b` identically while all
//! rates `r = eps^-2 + eps^-1 q` stay positive for small enough `eps`.

use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::grid::{Direction, GridSpec};
use crate::quad::{gauss_legendre, Bump};
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::Arc;

/// A drift vector field `b : R^d -> R^d`.
#[derive(Debug, Clone)]
pub enum DriftModel {
    Zero,
    /// `b_j(x) = -scale * tanh(x_j)`; globally Lipschitz with Lipschitz
    /// derivative, so Assumption-1 regular.
    TanhWell { scale: f64 },
    /// `b_j(x) = -a * sign(x_j)`, `a >= 2`. Discontinuous at 0: admitted only
    /// for closed-form oracles, never for rate-table construction.
    SignWell { a: f64 },
    /// Values sampled on a grid, interpolated multilinearly in between and
    /// clamped outside the box.
    Tabulated { grid: Arc<GridSpec>, values: Arc<Vec<Vec<f64>>> },
}

impl DriftModel {
    pub fn tanh_well(scale: f64) -> Self {
        DriftModel::TanhWell { scale }
    }

    pub fn sign_well(a: f64) -> Result<Self> {
        if a < 2.0 {
            return Err(Error::InvalidParameter(format!("sign_well requires a >= 2, got {a}")));
        }
        Ok(DriftModel::SignWell { a })
    }

    pub fn tabulated(grid: Arc<GridSpec>, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != grid.num_sites() {
            return Err(Error::InvalidParameter(format!(
                "tabulated drift has {} rows for {} sites",
                values.len(),
                grid.num_sites()
            )));
        }
        for v in &values {
            if v.len() != grid.dim() {
                return Err(Error::DimensionMismatch(v.len(), grid.dim()));
            }
        }
        Ok(DriftModel::Tabulated { grid, values: Arc::new(values) })
    }

    /// Read a tabulated drift from CSV with columns `x_1..x_d, b_1..b_d`.
    /// Every grid site must be covered exactly once.
    pub fn tabulated_from_csv(path: &Path, grid: Arc<GridSpec>) -> Result<Self> {
        let d = grid.dim();
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
        let mut values = vec![None::<Vec<f64>>; grid.num_sites()];
        for record in reader.records() {
            let record = record?;
            if record.len() != 2 * d {
                return Err(Error::Parse(format!(
                    "expected {} columns (x_1..x_{d}, b_1..b_{d}), got {}",
                    2 * d,
                    record.len()
                )));
            }
            let mut coords = Vec::with_capacity(d);
            for j in 0..d {
                let x: f64 = record[j]
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad coordinate {:?}", &record[j])))?;
                let c = (x / grid.epsilon()).round();
                if (x - c * grid.epsilon()).abs() > 1e-9 * grid.epsilon() {
                    return Err(Error::Parse(format!("{x} is not a grid coordinate")));
                }
                coords.push(c as i64);
            }
            let idx = grid.index_of(&crate::grid::SiteId::new(coords))?;
            let mut b = Vec::with_capacity(d);
            for j in 0..d {
                b.push(
                    record[d + j]
                        .trim()
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad drift value {:?}", &record[d + j])))?,
                );
            }
            values[idx] = Some(b);
        }
        let values: Option<Vec<Vec<f64>>> = values.into_iter().collect();
        let values = values.ok_or_else(|| Error::Parse("tabulated drift does not cover every site".into()))?;
        DriftModel::tabulated(grid, values)
    }

    /// Whether the field satisfies the Assumption-1 regularity needed for
    /// rate-table construction.
    pub fn is_regular(&self) -> bool {
        !matches!(self, DriftModel::SignWell { .. })
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            DriftModel::Zero => "zero",
            DriftModel::TanhWell { .. } => "tanh_well",
            DriftModel::SignWell { .. } => "sign_well",
            DriftModel::Tabulated { .. } => "tabulated",
        }
    }

    /// Component `b_axis(x)`.
    pub fn eval_component(&self, x: &[f64], axis: usize) -> f64 {
        match self {
            DriftModel::Zero => 0.0,
            DriftModel::TanhWell { scale } => -scale * x[axis].tanh(),
            DriftModel::SignWell { a } => {
                let s = x[axis];
                if s > 0.0 {
                    -a
                } else if s < 0.0 {
                    *a
                } else {
                    0.0
                }
            }
            DriftModel::Tabulated { grid, values } => interpolate(grid, values, x, axis),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        (0..x.len()).map(|axis| self.eval_component(x, axis)).collect()
    }
}

/// Multilinear interpolation of tabulated per-site values, clamped to the box.
fn interpolate(grid: &GridSpec, values: &[Vec<f64>], x: &[f64], axis: usize) -> f64 {
    let d = grid.dim();
    let radius = grid.radius() as f64;
    let mut base = vec![0i64; d];
    let mut frac = vec![0.0f64; d];
    for j in 0..d {
        let t = (x[j] / grid.epsilon()).clamp(-radius, radius);
        let lo = t.floor().min(radius - 1.0).max(-radius);
        base[j] = lo as i64;
        frac[j] = t - lo;
    }
    let mut acc = 0.0;
    for corner in 0..(1usize << d) {
        let mut weight = 1.0;
        let mut coords = Vec::with_capacity(d);
        for j in 0..d {
            if corner >> j & 1 == 1 {
                weight *= frac[j];
                coords.push(base[j] + 1);
            } else {
                weight *= 1.0 - frac[j];
                coords.push(base[j]);
            }
        }
        if weight == 0.0 {
            continue;
        }
        let idx = grid.index_of(&crate::grid::SiteId::new(coords)).expect("clamped in box");
        acc += weight * values[idx][axis];
    }
    acc
}

/// Mollifier used to smooth the positive part of the drift.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MollifierSpec {
    pub radius: f64,
    /// Gauss-Legendre nodes per axis for the convolution.
    pub nodes: usize,
}

impl Default for MollifierSpec {
    fn default() -> Self {
        MollifierSpec { radius: 0.5, nodes: 64 }
    }
}

impl MollifierSpec {
    pub fn bump(&self) -> Bump {
        Bump::new(self.radius)
    }
}

/// Per-site, per-direction jump rates `r = eps^-2 + eps^-1 q` together with
/// the adjoint rates `rho_i(x) = r_{i*}(x + eps k_i)`.
///
/// Directions whose step exits the box keep their `q`/`r` entries (the
/// formula is defined everywhere) but carry no `rho`, and the `*_eff` sums
/// skip them; the event engine and the operators only ever look at
/// non-suppressed directions.
#[derive(Debug, Clone)]
pub struct RateTable {
    grid: Arc<GridSpec>,
    q: Vec<f64>,
    r: Vec<f64>,
    rho: Vec<f64>,
    rbar_raw: Vec<f64>,
    rbar_eff: Vec<f64>,
    rhobar_eff: Vec<f64>,
    sup_q: f64,
    min_r: f64,
    drift_kind: &'static str,
}

impl RateTable {
    pub fn grid(&self) -> &Arc<GridSpec> {
        &self.grid
    }

    #[inline]
    pub fn q(&self, site: usize, dir: Direction) -> f64 {
        self.q[site * self.grid.num_directions() + dir.0]
    }

    #[inline]
    pub fn r(&self, site: usize, dir: Direction) -> f64 {
        self.r[site * self.grid.num_directions() + dir.0]
    }

    /// `rho_i(x) = r_{i*}(x + eps k_i)`; 0 for suppressed directions.
    #[inline]
    pub fn rho(&self, site: usize, dir: Direction) -> f64 {
        self.rho[site * self.grid.num_directions() + dir.0]
    }

    /// Raw sum over all 2d directions.
    #[inline]
    pub fn rbar_raw(&self, site: usize) -> f64 {
        self.rbar_raw[site]
    }

    /// Sum of `r` over non-suppressed directions: the single-particle exit
    /// rate on the reflecting box.
    #[inline]
    pub fn rbar_eff(&self, site: usize) -> f64 {
        self.rbar_eff[site]
    }

    #[inline]
    pub fn rhobar_eff(&self, site: usize) -> f64 {
        self.rhobar_eff[site]
    }

    pub fn sup_q(&self) -> f64 {
        self.sup_q
    }

    pub fn min_r(&self) -> f64 {
        self.min_r
    }

    pub fn drift_kind(&self) -> &'static str {
        self.drift_kind
    }

    pub fn max_rbar_eff(&self) -> f64 {
        self.rbar_eff.iter().cloned().fold(0.0, f64::max)
    }

    /// Per-direction envelope `sup_x rho_i(x)` over sites where the step is
    /// admissible; used for thinning in the two-walker coupling.
    pub fn rho_envelope(&self, dir: Direction) -> f64 {
        let nd = self.grid.num_directions();
        (0..self.grid.num_sites())
            .map(|s| self.rho[s * nd + dir.0])
            .fold(0.0, f64::max)
    }

    /// The discrete drift `b_eps(x) = sum_i q_i(x) k_i`.
    pub fn discrete_drift(&self, site: usize) -> Vec<f64> {
        let d = self.grid.dim();
        let mut b = vec![0.0; d];
        for dir in self.grid.directions() {
            let axis = dir.axis(d);
            b[axis] += self.q(site, dir) * dir.sign(d) as f64;
        }
        b
    }
}

/// Build the rate table for a regular drift via the mollified construction.
pub fn build_q_from_b(b: &DriftModel, m: &MollifierSpec, g: &Arc<GridSpec>) -> Result<RateTable> {
    if !b.is_regular() {
        return Err(Error::IrregularDrift(b.kind_name()));
    }
    let d = g.dim();
    let nd = g.num_directions();
    let s = g.num_sites();

    let bump = m.bump();
    let rule = gauss_legendre(m.nodes);
    // Per-axis nodes on [-radius, radius] with weights absorbing eta.
    let nodes: Vec<f64> = rule.0.iter().map(|t| t * m.radius).collect();
    let weights: Vec<f64> = rule
        .0
        .iter()
        .zip(&rule.1)
        .map(|(t, w)| w * m.radius * bump.eval(t * m.radius))
        .collect();

    // g_i(x) = integral of (b.e_i)^+ (x - z) eta_d(z) dz over the radius box,
    // evaluated with the tensor rule; g_{i+d} = -b_i(x) + g_i(x).
    let mode = ExecMode::auto(s, m.nodes.pow(d as u32) * d / 8 + 1);
    let rows: Vec<Vec<f64>> = exec::map_indexed(mode, s, |site| {
        let x = g.position(site);
        let mut row = vec![0.0; nd];
        let mut point = vec![0.0; d];
        for axis in 0..d {
            let mut idx = vec![0usize; d];
            let mut acc = 0.0;
            loop {
                let mut w = 1.0;
                for j in 0..d {
                    point[j] = x[j] - nodes[idx[j]];
                    w *= weights[idx[j]];
                }
                acc += w * b.eval_component(&point, axis).max(0.0);
                // Odometer over the tensor grid.
                let mut j = 0;
                loop {
                    if j == d {
                        break;
                    }
                    idx[j] += 1;
                    if idx[j] < nodes.len() {
                        break;
                    }
                    idx[j] = 0;
                    j += 1;
                }
                if j == d {
                    break;
                }
            }
            row[axis] = acc;
            row[axis + d] = -b.eval_component(&x, axis) + acc;
        }
        row
    });

    let mut q = vec![0.0; s * nd];
    for (site, row) in rows.iter().enumerate() {
        q[site * nd..(site + 1) * nd].copy_from_slice(row);
    }

    finish_table(g, q, b.kind_name())
}

/// Assemble `r`, `rho` and the cached sums from a raw `q` table.
pub(crate) fn finish_table(g: &Arc<GridSpec>, q: Vec<f64>, drift_kind: &'static str) -> Result<RateTable> {
    let nd = g.num_directions();
    let s = g.num_sites();
    let eps = g.epsilon();
    let inv2 = eps.powi(-2);
    let inv1 = eps.recip();

    let r: Vec<f64> = q.iter().map(|&qi| inv2 + inv1 * qi).collect();
    let min_r = r.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min_r > 0.0) {
        return Err(Error::EpsilonTooLarge { min_rate: min_r });
    }
    let sup_q = q.iter().fold(0.0f64, |m, &v| m.max(v.abs()));

    let mut rho = vec![0.0; s * nd];
    let mut rbar_raw = vec![0.0; s];
    let mut rbar_eff = vec![0.0; s];
    let mut rhobar_eff = vec![0.0; s];
    for site in 0..s {
        let mut raw = 0.0;
        let mut eff = 0.0;
        let mut rho_eff = 0.0;
        for k in 0..nd {
            let dir = Direction(k);
            raw += r[site * nd + k];
            if let Some(nb) = g.neighbor_index(site, dir) {
                eff += r[site * nd + k];
                let rev = dir.reverse(g.dim());
                let v = r[nb * nd + rev.0];
                rho[site * nd + k] = v;
                rho_eff += v;
            }
        }
        rbar_raw[site] = raw;
        rbar_eff[site] = eff;
        rhobar_eff[site] = rho_eff;
    }

    Ok(RateTable {
        grid: g.clone(),
        q,
        r,
        rho,
        rbar_raw,
        rbar_eff,
        rhobar_eff,
        sup_q,
        min_r,
        drift_kind,
    })
}

/// Measured Assumption-1 quantities for a rate table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Assumption1Report {
    pub sup_q: f64,
    /// `max |q_i(x) - q_i(y)| / |x - y|` over sampled pairs.
    pub lipschitz: f64,
    /// Second-difference quotient over sampled pairs.
    pub second_difference: f64,
    pub c1_configured: f64,
    pub violated: bool,
}

/// Measure `sup|q|`, the discrete Lipschitz quotient and the
/// second-difference quotient, over all adjacent pairs plus a deterministic
/// sample of distant pairs; flag a violation above `c1`.
pub fn validate_assumption1(rt: &RateTable, c1: f64) -> Assumption1Report {
    let g = rt.grid();
    let d = g.dim();
    let s = g.num_sites();
    let eps = g.epsilon();

    let mut lip = 0.0f64;
    let mut second = 0.0f64;

    let mut visit_pair = |x: usize, y: usize| {
        if x == y {
            return;
        }
        let px = g.position(x);
        let py = g.position(y);
        let dist: f64 = px.iter().zip(&py).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        for dir in g.directions() {
            let dq = (rt.q(x, dir) - rt.q(y, dir)).abs();
            lip = lip.max(dq / dist);
            if let (Some(nx), Some(ny)) = (g.neighbor_index(x, dir), g.neighbor_index(y, dir)) {
                let fx = (rt.q(nx, dir) - rt.q(x, dir)) / eps;
                let fy = (rt.q(ny, dir) - rt.q(y, dir)) / eps;
                second = second.max((fx - fy).abs() / dist);
            }
        }
    };

    for x in 0..s {
        for dir in (0..d).map(Direction) {
            if let Some(y) = g.neighbor_index(x, dir) {
                visit_pair(x, y);
            }
        }
    }
    // Distant pairs from a fixed multiplicative stream; coverage, not RNG.
    let mut state: u64 = 0x9e37_79b9_7f4a_7c15;
    let pairs = 20_000.min(s * s);
    for _ in 0..pairs {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let x = (state >> 33) as usize % s;
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let y = (state >> 33) as usize % s;
        visit_pair(x, y);
    }

    Assumption1Report {
        sup_q: rt.sup_q(),
        lipschitz: lip,
        second_difference: second,
        c1_configured: c1,
        violated: rt.sup_q() > c1 || lip > c1 || second > c1,
    }
}

/// The zeroth-order correction `h_eps = rbar - rhobar` relating the adjoint
/// to the Markov generator.
#[derive(Debug, Clone)]
pub struct HField {
    grid: Arc<GridSpec>,
    values: Vec<f64>,
    report: HReport,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HReport {
    /// `sup |h|` over interior sites (the infinite-grid quantity).
    pub sup_abs_interior: f64,
    /// `sup |h|` over all sites of the truncated box.
    pub sup_abs_all: f64,
    /// Discrete Lipschitz quotient of `h` over interior pairs.
    pub lipschitz: f64,
    /// `sup (-h)^+` over all sites: the part that can push `|u|_inf` up.
    pub growth_part: f64,
    /// The constant used in the `e^{(1+C2)t}` growth bound.
    pub c2: f64,
}

impl HField {
    pub fn grid(&self) -> &Arc<GridSpec> {
        &self.grid
    }

    pub fn value(&self, site: usize) -> f64 {
        self.values[site]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn report(&self) -> HReport {
        self.report
    }
}

/// `h(x) = rbar_eff(x) - rhobar_eff(x)`, with the summary constants.
pub fn compute_h(rt: &RateTable) -> HField {
    let g = rt.grid().clone();
    let s = g.num_sites();
    let values: Vec<f64> = (0..s).map(|x| rt.rbar_eff(x) - rt.rhobar_eff(x)).collect();

    let mut sup_interior = 0.0f64;
    let mut sup_all = 0.0f64;
    let mut growth = 0.0f64;
    let mut lip = 0.0f64;
    for x in 0..s {
        let h = values[x];
        sup_all = sup_all.max(h.abs());
        growth = growth.max(-h);
        if g.is_interior(x) {
            sup_interior = sup_interior.max(h.abs());
            for dir in g.directions() {
                if let Some(y) = g.neighbor_index(x, dir) {
                    if g.is_interior(y) {
                        lip = lip.max((values[x] - values[y]).abs() / g.epsilon());
                    }
                }
            }
        }
    }
    growth = growth.max(0.0);
    let report = HReport {
        sup_abs_interior: sup_interior,
        sup_abs_all: sup_all,
        lipschitz: lip,
        growth_part: growth,
        c2: sup_interior.max(lip).max(growth),
    };
    HField { grid: g, values, report }
}
