use std::fs;
use std::path::Path;

use metric_discretize::analysis::{distortion, PairPlan};
use metric_discretize::complex::{build_complex, MetricMode};
use metric_discretize::ghcheck::{build_levels, gh_condition_check, multiscale_from_levels, origin_nearest, GhCheckReport, MultiscaleConfig};
use metric_discretize::net::NetRecord;
use metric_discretize::poincare::{estimate_constant_lower, PiDomain, PoincareEstimate, SuitePlan};
use metric_discretize::reproduce::reproduce_grid;
use metric_discretize::{build_graph, build_maximal_net, hausdorff_gap, NetGraph, SampledSpace, VERSION};
use serde::Serialize;

use crate::config::{Command, Loaded, RunConfig};
use crate::CliError;

/// Outcome of a command: whether its built-in checks passed.
pub struct Outcome {
    pub pass: bool,
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    config: &'a RunConfig,
    pass: bool,
    result: T,
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Writes the report to `--out`, or prints it when no path is given.
fn emit<T: Serialize>(cfg: &RunConfig, pass: bool, result: T) -> Result<(), CliError> {
    let text = to_json(&Report {
        tool: "mdisc",
        version: VERSION,
        config: cfg,
        pass,
        result,
    })?;
    match &cfg.out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(path, text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn write_table<S: Serialize>(path: &Path, rows: &[S]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn table_path(cfg: &RunConfig) -> std::path::PathBuf {
    cfg.out.as_ref().expect("validated").with_extension("csv")
}

fn suite_plan(cfg: &RunConfig) -> SuitePlan {
    let n = cfg.suite_size;
    SuitePlan {
        random_signs: n,
        gaussians: n.div_ceil(2),
        distance_centers: n.div_ceil(4),
        ..SuitePlan::default()
    }
}

pub fn run(cfg: &RunConfig) -> Result<Outcome, CliError> {
    match cfg.command() {
        Command::Discretize => discretize(cfg),
        Command::ReproduceGrid => reproduce(cfg),
        Command::Multiscale => multiscale(cfg),
        Command::Poincare => poincare(cfg),
        Command::Ghcheck => ghcheck(cfg),
    }
}

fn epsilon_for(cfg: &RunConfig, space: &SampledSpace) -> Result<f64, CliError> {
    cfg.epsilon
        .or_else(|| space.lattice_scale().map(|s| s.to_f64()))
        .ok_or_else(|| CliError::Validation("--epsilon is required for non-lattice spaces".into()))
}

#[derive(Serialize)]
struct DiscretizeSummary {
    space: String,
    points: usize,
    epsilon: f64,
    vertices: usize,
    edges: usize,
    max_degree: usize,
    /// Degree shared by all vertices whose `3ε` neighborhood is sampled;
    /// only defined on lattice samples.
    interior_degree: Option<usize>,
    hausdorff_gap: f64,
    near_tie_edges: usize,
    net_digest: String,
}

fn discretize(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let space = cfg.space_spec().load_space()?;
    let eps = epsilon_for(cfg, &space)?;
    let net = build_maximal_net(&space, eps, cfg.seed)?;
    let g = build_graph(&space, &net)?;
    let interior_degree = if space.is_full_space_lattice() {
        let mut degrees = (0..g.len()).filter(|&v| g.is_degree_interior(v)).map(|v| g.degree(v));
        degrees.next().filter(|&d| degrees.all(|e| e == d))
    } else {
        None
    };
    let summary = DiscretizeSummary {
        space: space.label().to_string(),
        points: space.len(),
        epsilon: eps,
        vertices: g.len(),
        edges: g.edge_count(),
        max_degree: g.max_degree(),
        interior_degree,
        hausdorff_gap: hausdorff_gap(&space, &net)?,
        near_tie_edges: g.near_tie_edges(),
        net_digest: format!("{:016x}", net.digest()),
    };
    println!("vertices {}", summary.vertices);
    println!("edges {}", summary.edges);
    println!("max degree {}", summary.max_degree);
    match summary.interior_degree {
        Some(d) => println!("interior degree {d}"),
        None => println!("interior degree n/a"),
    }
    println!("epsilon {}", summary.epsilon);
    if let Some(dir) = &cfg.out {
        fs::create_dir_all(dir)?;
        let record: NetRecord = net.record();
        fs::write(dir.join("net.json"), to_json(&record)?)?;
        fs::write(dir.join("graph.json"), to_json(&g.export())?)?;
        fs::write(
            dir.join("summary.json"),
            to_json(&Report {
                tool: "mdisc",
                version: VERSION,
                config: cfg,
                pass: true,
                result: &summary,
            })?,
        )?;
        if cfg.emit_table {
            fs::write(dir.join("adjacency.csv"), g.adjacency_csv())?;
        }
    }
    Ok(Outcome { pass: true })
}

fn reproduce(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let (a, b) = cfg.level_range()?;
    let rep = reproduce_grid(a..=b, 3, cfg.seed)?;
    let pass = rep.pass();
    if cfg.out.is_some() {
        for r in &rep.rows {
            let published = r.published_count.map(|p| p.to_string()).unwrap_or_else(|| "-".into());
            println!(
                "level {} eps {} count {} published {} mass {:.12} gap {:.6}",
                r.level, r.epsilon, r.count, published, r.mass, r.gap_to_limit
            );
        }
        for d in &rep.discrepancies {
            println!("note: {d}");
        }
        if cfg.emit_table {
            write_table(&table_path(cfg), &rep.rows)?;
        }
    }
    emit(cfg, pass, &rep)?;
    Ok(Outcome { pass })
}

fn multiscale_config(cfg: &RunConfig) -> Result<MultiscaleConfig, CliError> {
    Ok(MultiscaleConfig {
        levels: cfg.level_count()?,
        epsilon0: cfg.epsilon.expect("resolved"),
        seed: cfg.seed,
        p: cfg.p,
        lambda: cfg.lambda,
        suite: SuitePlan {
            ascent_steps: 100,
            restarts: 2,
            ..suite_plan(cfg)
        },
        ..MultiscaleConfig::default()
    })
}

#[derive(Serialize)]
struct LevelRow {
    level: usize,
    epsilon: f64,
    vertices: usize,
    edges: usize,
    h: f64,
    l: f64,
    k: f64,
    doubling: f64,
    pi_constant: f64,
}

fn multiscale(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let space = cfg.space_spec().load_space()?;
    let mcfg = multiscale_config(cfg)?;
    let levels = build_levels(&space, &mcfg)?;
    let rep = multiscale_from_levels(&space, &levels, &mcfg)?;
    let pass = rep.verdicts.all();
    if cfg.emit_table {
        let rows: Vec<LevelRow> = rep
            .levels
            .iter()
            .map(|l| LevelRow {
                level: l.level,
                epsilon: l.epsilon,
                vertices: l.vertices,
                edges: l.edges,
                h: l.h,
                l: l.l,
                k: l.k,
                doubling: l.doubling,
                pi_constant: l.pi_constant,
            })
            .collect();
        write_table(&table_path(cfg), &rows)?;
    }
    emit(cfg, pass, &rep)?;
    Ok(Outcome { pass })
}

#[derive(Serialize)]
struct PoincareResult {
    vertices: usize,
    epsilon: f64,
    estimate: PoincareEstimate,
    /// `c_lower − c_exact` when the oracle ran; never positive beyond
    /// rounding.
    oracle_gap: Option<f64>,
}

#[derive(Serialize)]
struct SuiteRow<'a> {
    label: &'a str,
    component: usize,
    ratio: f64,
}

fn poincare(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let (g, default_center): (NetGraph, usize) = match cfg.space_spec().load()? {
        Loaded::Graph(g) => {
            let c = (g.len() - 1) / 2;
            (g, c)
        }
        Loaded::Space(space) => {
            let eps = epsilon_for(cfg, &space)?;
            let net = build_maximal_net(&space, eps, cfg.seed)?;
            let g = build_graph(&space, &net)?;
            let q = origin_nearest(&space, net.members()).expect("nonempty net");
            let c = g.vertex_of(q).expect("member");
            (g, c)
        }
    };
    let center = cfg.center.unwrap_or(default_center);
    if center >= g.len() {
        return Err(CliError::Validation(format!("--center {center} out of range (graph has {} vertices)", g.len())));
    }
    let radius = cfg.radius.unwrap_or(2.0 * g.epsilon());
    let domain = PiDomain::graph_ball(&g, center, radius, cfg.lambda)?;
    let mut est = estimate_constant_lower(&g, &domain, cfg.p, &suite_plan(cfg), cfg.seed)?;
    if cfg.oracle {
        if cfg.p != 1.0 {
            return Err(CliError::Validation("the exact oracle is only available at p = 1".into()));
        }
        est = est.with_oracle(&g, &domain)?;
    }
    let oracle_gap = est.c_exact.map(|c| est.c_lower - c);
    let pass = est.violations.is_empty() && oracle_gap.is_none_or(|d| d <= 1e-9 * est.c_lower.max(1.0));
    if cfg.emit_table {
        let rows: Vec<SuiteRow> = est
            .suite
            .iter()
            .map(|e| SuiteRow {
                label: &e.label,
                component: e.component,
                ratio: e.ratio,
            })
            .collect();
        write_table(&table_path(cfg), &rows)?;
    }
    emit(
        cfg,
        pass,
        PoincareResult {
            vertices: g.len(),
            epsilon: g.epsilon(),
            estimate: est,
            oracle_gap,
        },
    )?;
    Ok(Outcome { pass })
}

#[derive(Serialize)]
struct GhResult {
    /// Bi-Lipschitz constant used for the defect bound.
    l: f64,
    l_measured: bool,
    /// Levels with `ε < η / 2L`, where all conditions are predicted to hold.
    predicted_levels: Vec<usize>,
    prediction_holds: bool,
    report: GhCheckReport,
}

fn ghcheck(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let space = cfg.space_spec().load_space()?;
    let mcfg = multiscale_config(cfg)?;
    let levels = build_levels(&space, &mcfg)?;
    let l = match cfg.l {
        Some(l) => l,
        None => {
            let plan = PairPlan {
                sources: 8,
                targets_per_source: 32,
                seed: cfg.seed,
            };
            let mut worst: f64 = 1.0;
            for (_, g) in &levels {
                worst = worst.max(distortion(&space, g, &plan)?.bilipschitz);
            }
            worst
        }
    };
    let complexes = levels
        .iter()
        .map(|(_, g)| build_complex(g, MetricMode::SpaceDerived, Some(&space)))
        .collect::<Result<Vec<_>, _>>()?;
    let q = origin_nearest(&space, levels[0].0.members()).expect("nonempty net");
    let report = gh_condition_check(&space, &complexes, q, cfg.r, cfg.eta, l, cfg.pairs, cfg.seed)?;
    let predicted_levels: Vec<usize> = report
        .levels
        .iter()
        .filter(|r| r.epsilon < cfg.eta / (2.0 * l))
        .map(|r| r.level)
        .collect();
    let prediction_holds = predicted_levels.iter().all(|&i| report.levels[i].pass);
    let pass = prediction_holds && report.i0.is_some();
    if cfg.emit_table {
        write_table(&table_path(cfg), &report.levels)?;
    }
    emit(
        cfg,
        pass,
        GhResult {
            l,
            l_measured: cfg.l.is_none(),
            predicted_levels,
            prediction_holds,
            report,
        },
    )?;
    Ok(Outcome { pass })
}
