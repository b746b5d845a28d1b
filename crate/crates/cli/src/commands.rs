//! Subcommand implementations. Every command validates its configuration,
//! runs, writes CSV/JSON (and optional SVG) artifacts plus a manifest, and
//! returns its gate results; `main` turns failed gates into exit code 1.

use crate::config::{ConfigError, RunConfig};
use anyhow::Result;
use rand::{Rng, SeedableRng};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use trimwalk::drift::compute_h;
use trimwalk::gridfn::GridFunction;
use trimwalk::harness::{
    experiment_converge_eps, experiment_converge_n, experiment_coupling, experiment_domination,
    GateResult, Manifest, MetricSpec,
};
use trimwalk::io;
use trimwalk::meanfield::{ode_residuals, solve};
use trimwalk::operators::{apply_barl, apply_lstar, duality_residual, Semigroup};
use trimwalk::particle::{
    simulate_coupled_pair, simulate_trimmed, ParticleConfiguration, SimSeed, TrimmedRunOptions,
};
use trimwalk::plot::{line_plot, Series};
use trimwalk::stationary::{standard_test_functions, weak_form_residual};

pub struct CommandOutput {
    pub gates: Vec<GateResult>,
    pub artifacts: Vec<PathBuf>,
}

fn finish(
    dir: &Path,
    name: &str,
    cfg: &RunConfig,
    seeds: Vec<u64>,
    gates: Vec<GateResult>,
    mut artifacts: Vec<PathBuf>,
) -> Result<CommandOutput> {
    let manifest = Manifest::new(
        serde_json::json!({ "command": name, "config": cfg.as_json() }),
        seeds,
        gates.clone(),
    );
    let path = dir.join(format!("{name}.manifest.json"));
    manifest.write(&path)?;
    artifacts.push(path);
    Ok(CommandOutput { gates, artifacts })
}

fn metric_spec(cfg: &RunConfig) -> Result<MetricSpec> {
    Ok(match cfg.get("metric.kind").unwrap_or("wasserstein1") {
        "wasserstein1" => MetricSpec::Wasserstein1_1d,
        "site_sup" => MetricSpec::SiteSup,
        "sup_density" => MetricSpec::SupDensity { bandwidth: cfg.f64_or("metric.bandwidth", 0.25)? },
        other => {
            return Err(ConfigError(format!("metric.kind: unknown metric {other:?}")).into())
        }
    })
}

/// Operator identity suite on the configured grid.
pub fn verify(cfg: &RunConfig, dir: &Path) -> Result<CommandOutput> {
    let rt = cfg.rate_table()?;
    let pairs = cfg.usize_or("verify.pairs", 100)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seeds()?.first().copied().unwrap_or(0));

    let mut worst_duality = 0.0f64;
    let mut worst_cons = 0.0f64;
    for _ in 0..pairs {
        let f = GridFunction::from_fn(rt.grid().clone(), |_| rng.gen_range(-1.0..1.0));
        let g = GridFunction::from_fn(rt.grid().clone(), |_| rng.gen_range(-1.0..1.0));
        let res = duality_residual(&rt, &f, &g)? / (f.norm_l2() * g.norm_l2());
        worst_duality = worst_duality.max(res);
        let s = apply_lstar(&rt, &f)?.sum_compensated().abs();
        worst_cons = worst_cons.max(s / (1.0 + rt.max_rbar_eff() * f.norm_l1()));
    }

    let h = compute_h(&rt);
    let f = GridFunction::from_fn(rt.grid().clone(), |_| rng.gen_range(-1.0..1.0));
    let lstar = apply_lstar(&rt, &f)?;
    let barl = apply_barl(&rt, &f)?;
    let g = rt.grid();
    let mut worst_decomp = 0.0f64;
    for site in g.sites().filter(|&s| g.is_interior(s)) {
        let rhs = barl.value(site) - h.value(site) * f.value(site);
        worst_decomp = worst_decomp.max((lstar.value(site) - rhs).abs());
    }

    let t = cfg.f64_or("verify.kernel_time", 0.25)?;
    let sg = Semigroup::new(rt.clone());
    let mut worst_row = 0.0f64;
    let n = g.num_sites();
    for site in [0, n / 3, n / 2, n - 1] {
        let row = sg.evolve_p(&GridFunction::delta(g.clone(), site), t, None)?;
        worst_row = worst_row.max((row.sum_compensated() - 1.0).abs());
    }

    let gates = vec![
        GateResult::le("duality residual over |f|2 |g|2", worst_duality, 1e-10),
        GateResult::le("adjoint conservation (roundoff scale)", worst_cons, 1e-12),
        GateResult::le("interior L* = barL - h residual", worst_decomp, 1e-12),
        GateResult::le("kernel row-sum deviation", worst_row, 1e-9),
    ];
    finish(dir, "verify", cfg, cfg.seeds()?, gates, vec![])
}

/// Emit and check a closed-form stationary solution.
pub fn stationary(cfg: &RunConfig, dir: &Path, plots: bool) -> Result<CommandOutput> {
    let sol = cfg.stationary_solution()?;
    let nodes = cfg.usize_or("stationary.nodes", 10_000)?;
    let mass = sol.mass(nodes);
    let rate = sol.beta_total_rate(nodes);
    let weak = weak_form_residual(&sol, &standard_test_functions(), 1.0, nodes);

    let mut artifacts = Vec::new();
    if cfg.get("grid.epsilon").is_some() {
        let grid = cfg.grid()?;
        let csv = dir.join("stationary_profile.csv");
        io::write_closed_form_csv(&csv, &sol, &grid)?;
        artifacts.push(csv);
        if plots {
            let series = vec![Series {
                label: sol.name(),
                points: grid.sites().map(|s| {
                    let x = grid.position(s)[0];
                    (x, sol.u(x))
                }).collect(),
            }];
            let svg = dir.join("stationary_profile.svg");
            line_plot(&svg, &format!("stationary density {}", sol.name()), &series)?;
            artifacts.push(svg);
        }
    }

    let gates = vec![
        GateResult::le("stationary mass |int u - 1|", (mass - 1.0).abs(), 1e-8),
        GateResult::le(
            format!("stationary removal rate |beta({rate:.6}) - 1|"),
            (rate - 1.0).abs(),
            1e-8,
        ),
        GateResult::le("weak-form residual", weak.max_residual, 1e-6),
    ];
    finish(dir, "stationary", cfg, vec![], gates, artifacts)
}

/// Event-driven particle run per seed; snapshots and removal ledgers as CSV.
pub fn simulate(cfg: &RunConfig, dir: &Path) -> Result<CommandOutput> {
    let rt = cfg.rate_table()?;
    let u0 = cfg.initial_density(rt.grid())?;
    let n = cfg.u64_list_or("particles.n", "1000")?[0];
    let horizon = cfg.horizon()?;
    let mut times = cfg.snapshot_times()?;
    if times.last().copied() != Some(horizon) {
        times.push(horizon);
    }
    let opts = TrimmedRunOptions { timing: cfg.removal_timing()?, audit_every: None };
    let seeds = cfg.seeds()?;

    let mut gates = Vec::new();
    let mut artifacts = Vec::new();
    for &seed in &seeds {
        let init = ParticleConfiguration::sample_from_density(&u0, n, SimSeed(seed))?;
        let run = simulate_trimmed(&init, &rt, horizon, SimSeed(seed), &times, &opts)?;
        let snap_path = dir.join(format!("snapshots_seed{seed}.csv"));
        io::write_snapshots_csv(&snap_path, &run.snapshots)?;
        let ledger_path = dir.join(format!("ledger_seed{seed}.csv"));
        io::write_ledger_csv(&ledger_path, rt.grid(), &run.ledger)?;
        artifacts.push(snap_path);
        artifacts.push(ledger_path);
        gates.push(GateResult::flag(
            format!("seed {seed}: population conserved ({} events)", run.num_events),
            run.final_config.total() == n,
        ));
        gates.push(GateResult::flag(
            format!("seed {seed}: ledger partitions [0, T] exactly"),
            run.ledger.is_exact_partition(horizon),
        ));
    }
    finish(dir, "simulate", cfg, seeds, gates, artifacts)
}

/// Mean-field solve; path CSV, binary snapshot, residual report.
pub fn solve_cmd(cfg: &RunConfig, dir: &Path, plots: bool) -> Result<CommandOutput> {
    let rt = cfg.rate_table()?;
    let u0 = cfg.initial_density(rt.grid())?;
    let scheme_cfg = cfg.scheme_config(&rt)?;
    let horizon = cfg.horizon()?;
    let steps = (horizon / scheme_cfg.dt).round() as usize;
    let stride = cfg.usize_or("run.record_stride", steps.div_ceil(100).max(1))?;
    let (path, ledger, report) = solve(&rt, &u0, horizon, &scheme_cfg, stride)?;
    let residuals = ode_residuals(&path, &ledger)?;

    let csv = dir.join("path.csv");
    io::write_density_path_csv(&csv, &path, &ledger)?;
    let bin = dir.join("path.bin");
    io::write_binary_path(&bin, &path, &ledger)?;
    let mut artifacts = vec![csv, bin];
    if plots {
        let g = rt.grid();
        let final_dens = path.density_frame(path.num_frames() - 1);
        let series = vec![Series {
            label: format!("U(x, T = {horizon})"),
            points: g.sites().map(|s| (g.position(s)[0], final_dens[s])).collect(),
        }];
        let svg = dir.join("density_final.svg");
        line_plot(&svg, &format!("{} final density", scheme_cfg.scheme), &series)?;
        artifacts.push(svg);
    }

    let eps = rt.grid().epsilon();
    let tau_u = scheme_cfg.tau_flat * eps.powi(rt.grid().dim() as i32);
    let gates = vec![
        GateResult::le("mass deviation", report.mass_dev_max, 1e-9),
        GateResult::le("negative removal rate", -report.lambda_min, 0.0),
        GateResult::le("removal-rate sum deviation", report.lambda_sum_dev_max, 1e-9),
        GateResult::le("support gap (mass units)", report.support_gap_max, tau_u * 1.0001 + 1e-9),
        GateResult::le("growth-bound ratio", report.growth_ratio_max, 1.0 + 1e-6),
        GateResult::le("integrated ODE residual", residuals.line1_residual, 10.0 * scheme_cfg.dt),
    ];
    finish(dir, "solve", cfg, vec![], gates, artifacts)
}

/// Particle-to-ODE convergence in N at fixed eps.
pub fn converge_n(cfg: &RunConfig, dir: &Path, plots: bool) -> Result<CommandOutput> {
    let rt = cfg.rate_table()?;
    let u0 = cfg.initial_density(rt.grid())?;
    let counts = cfg.u64_list("sweep.particle_counts")?;
    let seeds = cfg.seeds()?;
    let horizon = cfg.horizon()?;
    let dt = cfg.f64("run.dt")?;
    let opts = TrimmedRunOptions { timing: cfg.removal_timing()?, audit_every: None };
    let spec = metric_spec(cfg)?;
    let tbl = experiment_converge_n(&rt, &u0, &counts, &seeds, horizon, dt, &opts, &spec, None)?;

    let csv = dir.join("converge_n.csv");
    io::write_csv(
        &csv,
        &["n", "mean_w1", "stderr_w1", "mean_beta_w1", "stderr_beta_w1"],
        tbl.rows.iter().map(|r| {
            vec![
                r.n.to_string(),
                io::format_float(r.mean_w1),
                io::format_float(r.stderr_w1),
                io::format_float(r.mean_beta_w1),
                io::format_float(r.stderr_beta_w1),
            ]
        }),
    )?;
    let mut artifacts = vec![csv];
    if plots {
        let series = vec![Series {
            label: "mean distance vs N".into(),
            points: tbl.rows.iter().map(|r| ((r.n as f64).log10(), r.mean_w1)).collect(),
        }];
        let svg = dir.join("converge_n.svg");
        line_plot(&svg, "N-convergence (log10 N on x)", &series)?;
        artifacts.push(svg);
    }

    let mut gates =
        vec![GateResult::flag("distance strictly decreasing in N", tbl.strictly_decreasing())];
    gates.push(GateResult::le(
        "distance at largest N",
        tbl.rows.last().map(|r| r.mean_w1).unwrap_or(f64::NAN),
        cfg.f64_or("convergence.final_max", 0.05)?,
    ));
    finish(dir, "converge-n", cfg, seeds, gates, artifacts)
}

/// ODE-to-closed-form convergence in eps (flat-top reference).
pub fn converge_eps(cfg: &RunConfig, dir: &Path, plots: bool) -> Result<CommandOutput> {
    if cfg.get("initial.kind").unwrap_or("example1") != "example1" {
        return Err(ConfigError(
            "initial.kind: converge-eps compares against the flat-top closed form; set example1"
                .into(),
        )
        .into());
    }
    let drift = cfg.drift()?;
    let epsilons = cfg.f64_list("sweep.epsilons")?;
    let half_width = cfg.f64("grid.half_width")?;
    let horizon = cfg.horizon()?;
    let dt = cfg.f64("run.dt")?;
    let mollifier = cfg.mollifier()?;
    let sol = trimwalk::stationary::example1();
    let tbl = experiment_converge_eps(
        &drift,
        &epsilons,
        half_width,
        horizon,
        &mollifier,
        |eps| trimwalk::meanfield::SchemeConfig::new(dt, trimwalk::meanfield::Scheme::TrimSplitting, eps),
        |g| trimwalk::stationary::example1().discretize(g),
        |x| sol.u(x),
        &cfg.f64_list_or("sweep.omega_spans", vec![0.5, 0.25, 0.1])?,
    )?;

    let csv = dir.join("converge_eps.csv");
    io::write_csv(
        &csv,
        &["eps", "sup_density_err", "omega_spans", "omega_common", "growth_ratio_max"],
        tbl.rows.iter().map(|r| {
            vec![
                io::format_float(r.eps),
                io::format_float(r.sup_density_err),
                r.omega
                    .iter()
                    .map(|(e, w)| format!("{e}:{w:.6e}"))
                    .collect::<Vec<_>>()
                    .join(" "),
                r.omega_common
                    .iter()
                    .map(|(e, w)| format!("{e}:{w:.6e}"))
                    .collect::<Vec<_>>()
                    .join(" "),
                io::format_float(r.growth_ratio_max),
            ]
        }),
    )?;
    let mut artifacts = vec![csv];
    if plots {
        let series = vec![Series {
            label: "sup density error".into(),
            points: tbl.rows.iter().map(|r| (r.eps, r.sup_density_err)).collect(),
        }];
        let svg = dir.join("converge_eps.svg");
        line_plot(&svg, "eps-convergence", &series)?;
        artifacts.push(svg);
    }

    let gates = vec![
        GateResult::flag("sup error strictly decreasing in eps", tbl.strictly_decreasing()),
        GateResult::le(
            "sup error at finest eps",
            tbl.rows.last().map(|r| r.sup_density_err).unwrap_or(f64::NAN),
            cfg.f64_or("convergence.final_max", 5e-2)?,
        ),
        GateResult::flag("omega non-increasing as eps halves", tbl.omega_non_increasing(0.0)),
        GateResult::le(
            "growth-bound ratio",
            tbl.rows.iter().map(|r| r.growth_ratio_max).fold(0.0, f64::max),
            1.0 + 1e-6,
        ),
    ];
    finish(dir, "converge-eps", cfg, vec![], gates, artifacts)
}

/// Coupled trimmed/untrimmed replicas; exact domination plus the
/// branching-process mean of the untrimmed population.
pub fn dominate(cfg: &RunConfig, dir: &Path) -> Result<CommandOutput> {
    let rt = cfg.rate_table()?;
    let u0 = cfg.initial_density(rt.grid())?;
    let n = cfg.u64_list_or("particles.n", "1000")?[0];
    let horizon = cfg.horizon()?;
    let seeds = cfg.seeds()?;
    let opts = TrimmedRunOptions { timing: cfg.removal_timing()?, audit_every: None };
    let init_seed = cfg.u64_list_or("particles.init_seed", "777")?[0];
    let init = ParticleConfiguration::sample_from_density(&u0, n, SimSeed(init_seed))?;
    let summary = experiment_domination(&rt, &init, &seeds, horizon, &opts)?;

    // Per-seed detail CSV.
    let rows: Vec<Vec<String>> = seeds
        .iter()
        .map(|&s| {
            let run = simulate_coupled_pair(&init, &rt, horizon, SimSeed(s), &[], &opts).unwrap();
            vec![
                s.to_string(),
                u8::from(run.domination_ok).to_string(),
                run.untrimmed_final.total().to_string(),
            ]
        })
        .collect();
    let csv = dir.join("dominate.csv");
    io::write_csv(&csv, &["seed", "domination_ok", "untrimmed_total"], rows)?;

    let gates = vec![
        GateResult::flag(
            format!("exact domination {}/{}", summary.passes, summary.runs),
            summary.all_pass(),
        ),
        GateResult::le(
            format!(
                "untrimmed mean {:.2} vs N e^T = {:.2}",
                summary.untrimmed_mean, summary.expected_untrimmed
            ),
            (summary.untrimmed_mean - summary.expected_untrimmed).abs(),
            3.0 * summary.untrimmed_stderr,
        ),
    ];
    finish(dir, "dominate", cfg, seeds, gates, vec![csv])
}

/// Shared-noise coupled walkers: mean-contraction gate and the optional
/// eps sweep of the tail probability.
pub fn couple(cfg: &RunConfig, dir: &Path) -> Result<CommandOutput> {
    let seeds = cfg.seeds()?;
    let horizon = cfg.horizon()?;
    let x0 = cfg.f64("couple.x0")?;
    let y0 = cfg.f64("couple.y0")?;
    let lipschitz = cfg.f64_or("couple.lipschitz", 2.0)?;
    let delta = cfg.f64_or("couple.delta", 0.2)?;
    let margin = cfg.f64_or("couple.mean_margin", 1.2)?;

    let rt = cfg.rate_table()?;
    let stats = experiment_coupling(&rt, x0, y0, &seeds, horizon, lipschitz, delta)?;
    let mut gates = vec![GateResult::le(
        format!("mean sup |X - Y| ({} replicas)", stats.replicas),
        stats.mean_sup_distance,
        margin * (lipschitz * horizon).exp() * stats.initial_distance,
    )];

    // Example path artifact from the first seed.
    let first = trimwalk::coupling::simulate_coupled_walkers(
        &site_of(&rt, x0)?,
        &site_of(&rt, y0)?,
        &rt,
        horizon,
        SimSeed(seeds.first().copied().unwrap_or(0)),
    )?;
    let path_csv = dir.join("couple_path.csv");
    io::write_coupled_path_csv(&path_csv, rt.grid(), &first)?;
    let mut artifacts = vec![path_csv];

    if cfg.get("sweep.epsilons").is_some() {
        let epsilons = cfg.f64_list("sweep.epsilons")?;
        let drift = cfg.drift()?;
        let mollifier = cfg.mollifier()?;
        let mut rows = Vec::new();
        let mut tails = Vec::new();
        for &eps in &epsilons {
            let rt = trimwalk::harness::build_table(
                &drift,
                eps,
                1,
                cfg.f64("grid.half_width")?,
                &mollifier,
            )?;
            let s = experiment_coupling(&rt, x0, y0, &seeds, horizon, lipschitz, delta)?;
            tails.push(s.tail_probability);
            rows.push(vec![
                io::format_float(eps),
                io::format_float(s.mean_sup_distance),
                io::format_float(s.stderr_sup_distance),
                io::format_float(s.tail_probability),
                io::format_float(s.threshold),
            ]);
        }
        let csv = dir.join("couple_sweep.csv");
        io::write_csv(
            &csv,
            &["eps", "mean_sup", "stderr_sup", "tail_probability", "threshold"],
            rows,
        )?;
        artifacts.push(csv);
        gates.push(GateResult::flag(
            format!(
                "tail probability non-increasing across eps [{}]",
                tails.iter().map(|p| format!("{p:.4}")).collect::<Vec<_>>().join(", ")
            ),
            tails.windows(2).all(|w| w[1] <= w[0]),
        ));
    }
    finish(dir, "couple", cfg, seeds, gates, artifacts)
}

fn site_of(rt: &Arc<trimwalk::drift::RateTable>, x: f64) -> Result<trimwalk::grid::SiteId> {
    let eps = rt.grid().epsilon();
    let c = (x / eps).round();
    if (x - c * eps).abs() > 1e-9 {
        return Err(ConfigError(format!("couple.x0/y0: {x} is not on the eps = {eps} grid")).into());
    }
    Ok(trimwalk::grid::SiteId::new(vec![c as i64]))
}
