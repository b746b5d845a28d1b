//! Flat `key = value` configuration with dotted sections.
//!
//! ```text
//! # comment
//! grid.epsilon = 0.1
//! run.seeds = 0..20
//! sweep.epsilons = 0.1, 0.05, 0.025
//! ```
//!
//! `--set key=value` overrides win over the file. Unknown keys are kept (the
//! manifest embeds the whole map), but every typed accessor names the key it
//! failed on so config errors are actionable.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use trimwalk::drift::{build_q_from_b, DriftModel, MollifierSpec, RateTable};
use trimwalk::gridfn::GridFunction;
use trimwalk::grid::GridSpec;
use trimwalk::meanfield::{Scheme, SchemeConfig};
use trimwalk::particle::RemovalTiming;
use trimwalk::stationary::{self, ClosedFormSolution, Example1Beta};

/// Error that must surface as exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("config {}: {e}", path.display())))?;
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("line {}: expected key = value", lineno + 1)))?;
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        let mut cfg = RunConfig { values };
        cfg.apply_overrides(overrides)?;
        Ok(cfg)
    }

    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<()> {
        for o in overrides {
            let (key, value) = o
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("override {o:?}: expected key=value")))?;
            self.values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| ConfigError(format!("{key}: required")))
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        self.require(key)?
            .parse()
            .map_err(|_| ConfigError(format!("{key}: not a number: {:?}", self.get(key).unwrap())))
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(_) => self.f64(key),
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => {
                v.parse().map_err(|_| ConfigError(format!("{key}: not an integer: {v:?}")))
            }
        }
    }

    pub fn u64_list(&self, key: &str) -> Result<Vec<u64>> {
        let raw = self.require(key)?;
        parse_u64_list(raw).map_err(|m| ConfigError(format!("{key}: {m}")))
    }

    pub fn u64_list_or(&self, key: &str, default: &str) -> Result<Vec<u64>> {
        let raw = self.get(key).unwrap_or(default);
        parse_u64_list(raw).map_err(|m| ConfigError(format!("{key}: {m}")))
    }

    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>> {
        let raw = self.require(key)?;
        raw.split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|_| ConfigError(format!("{key}: not a number list: {raw:?}")))
    }

    pub fn f64_list_or(&self, key: &str, default: Vec<f64>) -> Result<Vec<f64>> {
        match self.get(key) {
            None => Ok(default),
            Some(_) => self.f64_list(key),
        }
    }

    pub fn output_dir(&self) -> Result<PathBuf> {
        let dir = PathBuf::from(self.get("output.dir").unwrap_or("out"));
        std::fs::create_dir_all(&dir)
            .map_err(|e| ConfigError(format!("output.dir: cannot create {}: {e}", dir.display())))?;
        Ok(dir)
    }

    /// Whole config as JSON for the manifest.
    pub fn as_json(&self) -> serde_json::Value {
        serde_json::Value::Object(
            self.values
                .iter()
                .map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone())))
                .collect(),
        )
    }

    // ----- typed domain objects ------------------------------------------

    pub fn grid(&self) -> Result<Arc<GridSpec>> {
        let eps = self.f64("grid.epsilon").map_err(|_| ConfigError("grid.epsilon: required".into()))?;
        let dim = self.usize_or("grid.dim", 1)?;
        let l = self.f64("grid.half_width")?;
        GridSpec::new(eps, dim, l).map_err(|e| ConfigError(format!("grid: {e}")))
    }

    pub fn drift(&self) -> Result<DriftModel> {
        match self.get("drift.kind").unwrap_or("tanh_well") {
            "zero" => Ok(DriftModel::Zero),
            "tanh_well" => Ok(DriftModel::tanh_well(self.f64_or("drift.scale", 2.0)?)),
            "sign_well" => DriftModel::sign_well(self.f64_or("drift.a", 2.0)?)
                .map_err(|e| ConfigError(format!("drift.a: {e}"))),
            "tabulated" => {
                let path = PathBuf::from(self.require("drift.path")?);
                let grid = self.grid()?;
                DriftModel::tabulated_from_csv(&path, grid)
                    .map_err(|e| ConfigError(format!("drift.path: {e}")))
            }
            other => Err(ConfigError(format!("drift.kind: unknown kind {other:?}"))),
        }
    }

    pub fn mollifier(&self) -> Result<MollifierSpec> {
        Ok(MollifierSpec {
            radius: self.f64_or("mollifier.radius", 0.5)?,
            nodes: self.usize_or("mollifier.nodes", 64)?,
        })
    }

    /// Grid + drift + rate table, with the cross-field validation the run
    /// depends on (box alignment, rate positivity) done up front.
    pub fn rate_table(&self) -> Result<Arc<RateTable>> {
        let grid = self.grid()?;
        let drift = self.drift()?;
        let m = self.mollifier()?;
        build_q_from_b(&drift, &m, &grid)
            .map(Arc::new)
            .map_err(|e| ConfigError(format!("grid.epsilon: {e}")))
    }

    pub fn scheme_config(&self, rt: &RateTable) -> Result<SchemeConfig> {
        let dt = self.f64("run.dt")?;
        let scheme = match self.get("scheme.kind").unwrap_or("trim_splitting") {
            "trim_splitting" => Scheme::TrimSplitting,
            "active_set" => Scheme::ActiveSet,
            other => return Err(ConfigError(format!("scheme.kind: unknown scheme {other:?}"))),
        };
        let eps = rt.grid().epsilon();
        let mut cfg = SchemeConfig::new(dt, scheme, eps);
        if let Some(_) = self.get("scheme.tau_flat") {
            cfg.tau_flat = self.f64("scheme.tau_flat")?;
        }
        cfg.max_clip_mass = self.f64_or("scheme.max_clip_mass", 1e-6)?;
        cfg.validate(rt).map_err(|e| ConfigError(format!("run.dt: {e}")))?;
        Ok(cfg)
    }

    pub fn removal_timing(&self) -> Result<RemovalTiming> {
        match self.get("particles.removal_timing").unwrap_or("pre_birth") {
            "pre_birth" => Ok(RemovalTiming::PreBirth),
            "post_birth" => Ok(RemovalTiming::PostBirth),
            other => Err(ConfigError(format!(
                "particles.removal_timing: unknown convention {other:?}"
            ))),
        }
    }

    pub fn seeds(&self) -> Result<Vec<u64>> {
        self.u64_list_or("run.seeds", "0")
    }

    pub fn horizon(&self) -> Result<f64> {
        self.f64("run.horizon")
    }

    pub fn snapshot_times(&self) -> Result<Vec<f64>> {
        self.f64_list_or("run.snapshot_times", vec![])
    }

    /// Initial density on the given grid: `initial.kind` of `example1`,
    /// `point` (mass at the origin) or `csv` (columns x_1, u).
    pub fn initial_density(&self, grid: &Arc<GridSpec>) -> Result<GridFunction> {
        match self.get("initial.kind").unwrap_or("example1") {
            "example1" => stationary::example1()
                .discretize(grid)
                .map_err(|e| ConfigError(format!("initial.kind: {e}"))),
            "point" => {
                let mid = grid
                    .index_of(&trimwalk::grid::SiteId::origin(grid.dim()))
                    .map_err(|e| ConfigError(format!("initial.kind: {e}")))?;
                Ok(GridFunction::delta(grid.clone(), mid))
            }
            "csv" => {
                let path = PathBuf::from(self.require("initial.path")?);
                load_density_csv(&path, grid)
            }
            other => Err(ConfigError(format!("initial.kind: unknown kind {other:?}"))),
        }
    }

    pub fn stationary_solution(&self) -> Result<ClosedFormSolution> {
        let which = self.get("stationary.which").unwrap_or("example1");
        match which {
            "example1" => {
                let beta = match self.get("stationary.beta").unwrap_or("derived") {
                    "derived" => Example1Beta::Derived,
                    "printed" => Example1Beta::PaperPrinted,
                    other => {
                        return Err(ConfigError(format!("stationary.beta: unknown {other:?}")))
                    }
                };
                Ok(stationary::example1_with_beta(beta))
            }
            "example2_flat" => stationary::example2_flat(
                self.f64_or("stationary.a", 3.0)?,
                self.f64_or("stationary.w", 1.0)?,
            )
            .map_err(|e| ConfigError(format!("stationary.a: {e}"))),
            "example2_sharp" => stationary::example2_sharp(
                self.f64_or("stationary.a", 3.0)?,
                self.f64("stationary.v0")?,
            )
            .map_err(|e| ConfigError(format!("stationary.v0: {e}"))),
            "example2_critical" => Ok(stationary::example2_critical()),
            other => Err(ConfigError(format!("stationary.which: unknown solution {other:?}"))),
        }
    }
}

fn parse_u64_list(raw: &str) -> std::result::Result<Vec<u64>, String> {
    let raw = raw.trim();
    if let Some((a, b)) = raw.split_once("..") {
        let lo: u64 = a.trim().parse().map_err(|_| format!("bad range start {a:?}"))?;
        let hi: u64 = b.trim().parse().map_err(|_| format!("bad range end {b:?}"))?;
        if hi < lo {
            return Err(format!("empty range {raw:?}"));
        }
        return Ok((lo..hi).collect());
    }
    raw.split(',')
        .map(|t| t.trim().parse::<u64>().map_err(|_| format!("bad integer {t:?}")))
        .collect()
}

fn load_density_csv(path: &Path, grid: &Arc<GridSpec>) -> Result<GridFunction> {
    if grid.dim() != 1 {
        return Err(ConfigError("initial.path: csv initial data is 1-d only".into()));
    }
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("initial.path: {}: {e}", path.display())))?;
    let mut vals = vec![0.0; grid.num_sites()];
    for (i, line) in text.lines().enumerate() {
        if i == 0 && line.starts_with('x') {
            continue;
        }
        let mut parts = line.split(',');
        let (Some(xs), Some(us)) = (parts.next(), parts.next()) else {
            return Err(ConfigError(format!("initial.path: line {}: expected x,u", i + 1)));
        };
        let x: f64 = xs
            .trim()
            .parse()
            .map_err(|_| ConfigError(format!("initial.path: bad x {xs:?}")))?;
        let u: f64 = us
            .trim()
            .parse()
            .map_err(|_| ConfigError(format!("initial.path: bad u {us:?}")))?;
        let c = (x / grid.epsilon()).round() as i64;
        let site = grid
            .index_of(&trimwalk::grid::SiteId::new(vec![c]))
            .map_err(|e| ConfigError(format!("initial.path: {e}")))?;
        vals[site] = u.max(0.0) * grid.epsilon();
    }
    let total: f64 = vals.iter().sum();
    if total <= 0.0 {
        return Err(ConfigError("initial.path: density has no mass".into()));
    }
    vals.iter_mut().for_each(|v| *v /= total);
    GridFunction::new(grid.clone(), vals).map_err(|e| ConfigError(format!("initial.path: {e}")))
}
