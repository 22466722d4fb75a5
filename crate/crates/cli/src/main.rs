//! opinionlab: simulate and analyze nonlinear multi-option opinion dynamics.

// Validation uses `!(x > 0.0)` on purpose: the negation also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::Instant;

use opinionlab_cli::config::ScenarioConfig;
use opinionlab_cli::output;
use opinionlab_cli::recipes::{self, FigureId};
use opinionlab_core::analysis::critical_attention;
use opinionlab_core::dynamics::{integrate, sweep_bifurcation, System};
use opinionlab_core::model::OpinionState;
use opinionlab_core::TwoOptionParams;

#[derive(Parser)]
#[command(
    name = "opinionlab",
    about = "Nonlinear multi-agent multi-option opinion dynamics: simulation, \
             spectral analysis, bifurcation sweeps, cascade studies",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario document (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Override the scenario seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the integration step
    #[arg(long)]
    dt: Option<f64>,
    /// Summary format
    #[arg(long, default_value = "csv", value_parser = ["csv", "json"])]
    format: String,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a scenario and write the trajectory, summary and plot
    Run(CommonArgs),
    /// Print the bifurcation prediction for a scenario
    Analyze(CommonArgs),
    /// Sweep the attention parameter and write branch data
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Swept parameter (only `u` is supported)
        #[arg(long, default_value = "u")]
        parameter: String,
        /// Grid as start:stop:step
        #[arg(long, default_value = "0.3:0.6:0.02")]
        grid: String,
    },
    /// Monte-Carlo cascade-frequency study
    Cascade {
        #[command(flatten)]
        common: CommonArgs,
        /// Trials per grid cell
        #[arg(long, default_value_t = 1000)]
        n_trials: usize,
        /// Input magnitudes, comma separated
        #[arg(long, default_value = "0.01,0.02,0.03,0.04,0.05")]
        magnitudes: String,
        /// Alignment cosines, comma separated
        #[arg(long, default_value = "0.1,0.3,0.5,0.7,0.9")]
        alignments: String,
    },
    /// Run a bundled reference recipe and evaluate its checklist
    Reproduce {
        /// fig2..fig8, fig9_scaled, fig10, or `all`
        id: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Print the spectral report of a scenario's graph
    Graph {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "csv", value_parser = ["csv", "json"])]
        format: String,
    },
}

fn main() {
    if let Err(err) = dispatch() {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn thread_cap() {
    if let Ok(v) = std::env::var("OPINIONLAB_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        }
    }
}

fn dispatch() -> Result<()> {
    thread_cap();
    let cli = Cli::parse();
    match cli.command {
        Command::Run(common) => run_command(&common),
        Command::Analyze(common) => analyze_command(&common),
        Command::Sweep {
            common,
            parameter,
            grid,
        } => sweep_command(&common, &parameter, &grid),
        Command::Cascade {
            common,
            n_trials,
            magnitudes,
            alignments,
        } => cascade_command(&common, n_trials, &magnitudes, &alignments),
        Command::Reproduce { id, out } => reproduce_command(&id, &out),
        Command::Graph { config, format } => graph_command(&config, &format),
    }
}

fn load_scenario(common: &CommonArgs) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(dt) = common.dt {
        cfg.integration.dt = dt;
    }
    Ok(cfg)
}

#[derive(Serialize)]
struct SpectralReport {
    n_agents: usize,
    kind: String,
    symmetric: bool,
    signed: bool,
    strongly_connected: bool,
    lambda_max: f64,
    lambda_min: f64,
    lambda_max_simple: bool,
    lambda_min_simple: bool,
    lambda_min_real: bool,
    lambda_min_real_part_isolated: bool,
    perron_positive: bool,
    v_max: Option<Vec<f64>>,
    w_max: Option<Vec<f64>>,
    v_min: Option<Vec<f64>>,
    w_min: Option<Vec<f64>>,
    eigenvalues_re: Vec<f64>,
    eigenvalues_im: Vec<f64>,
}

fn spectral_report(cfg: &ScenarioConfig) -> Result<SpectralReport> {
    let graph = cfg.build_graph()?;
    let s = graph.spectral_extrema()?;
    let tovec = |v: &Option<DVector<f64>>| v.as_ref().map(|v| v.as_slice().to_vec());
    Ok(SpectralReport {
        n_agents: graph.n_agents(),
        kind: graph.kind().as_str().to_string(),
        symmetric: graph.symmetric(),
        signed: graph.signed(),
        strongly_connected: graph.is_strongly_connected(),
        lambda_max: s.lambda_max,
        lambda_min: s.lambda_min,
        lambda_max_simple: s.lambda_max_simple,
        lambda_min_simple: s.lambda_min_simple,
        lambda_min_real: s.lambda_min_real,
        lambda_min_real_part_isolated: s.lambda_min_real_part_isolated,
        perron_positive: s.perron_positive,
        v_max: tovec(&s.v_max),
        w_max: tovec(&s.w_max),
        v_min: tovec(&s.v_min),
        w_min: tovec(&s.w_min),
        eigenvalues_re: s.eigenvalues.iter().map(|e| e.re).collect(),
        eigenvalues_im: s.eigenvalues.iter().map(|e| e.im).collect(),
    })
}

#[derive(Serialize)]
struct PredictionReport {
    u_star: f64,
    regime: String,
    lambda: f64,
    hypotheses_ok: bool,
    diagnostics: Vec<String>,
    pattern_vector: Vec<f64>,
    centrality_vector: Vec<f64>,
}

fn prediction_report(cfg: &ScenarioConfig) -> Result<Option<PredictionReport>> {
    let graph = cfg.build_graph()?;
    let Some(regime) = cfg.homogeneous_regime(&graph) else {
        return Ok(None);
    };
    match critical_attention(&regime) {
        Ok(pred) => Ok(Some(PredictionReport {
            u_star: pred.u_star,
            regime: pred.regime.as_str().to_string(),
            lambda: pred.lambda,
            hypotheses_ok: pred.hypotheses_ok,
            diagnostics: pred.diagnostics,
            pattern_vector: pred.pattern_vector.as_slice().to_vec(),
            centrality_vector: pred.centrality_vector.as_slice().to_vec(),
        })),
        Err(err) => Ok(Some(PredictionReport {
            u_star: f64::NAN,
            regime: "refused".into(),
            lambda: f64::NAN,
            hypotheses_ok: false,
            diagnostics: vec![err.to_string()],
            pattern_vector: vec![],
            centrality_vector: vec![],
        })),
    }
}

#[derive(Serialize)]
struct RunSummary {
    scenario: Option<String>,
    seed: u64,
    t_end: f64,
    dt: f64,
    runtime_seconds: f64,
    final_time: f64,
    final_state_norm: f64,
    classification: ClassificationSummary,
    prediction: Option<PredictionReport>,
    spectral: SpectralReport,
    trajectory_csv: String,
    plot_svg: String,
}

#[derive(Serialize)]
struct ClassificationSummary {
    label: String,
    agreement: bool,
    consensus: bool,
    dissensus: bool,
    strong_agents: usize,
}

fn classification_summary(system: &System, final_opinions: &[f64]) -> Result<ClassificationSummary> {
    let state = match system {
        System::TwoOption(_) => OpinionState::lift_two_option(final_opinions),
        System::General(s) => {
            let n = s.params.n_agents();
            let no = s.params.n_options();
            OpinionState::project(nalgebra::DMatrix::from_row_slice(n, no, final_opinions))?
        }
    };
    let strong_threshold = 0.3;
    let class = opinionlab_core::classify_state(&state, strong_threshold, 1e-3)?;
    let strong = class
        .opinionated
        .iter()
        .filter(|s| matches!(s, opinionlab_core::analysis::OpinionStrength::Strong))
        .count();
    let norm = state.norm();
    let label = if norm < 1e-6 {
        "neutral equilibrium".to_string()
    } else if class.consensus {
        "consensus".to_string()
    } else if class.agreement {
        "agreement".to_string()
    } else if class.dissensus {
        "dissensus".to_string()
    } else {
        "disagreement".to_string()
    };
    Ok(ClassificationSummary {
        label,
        agreement: class.agreement,
        consensus: class.consensus,
        dissensus: class.dissensus,
        strong_agents: strong,
    })
}

fn run_command(common: &CommonArgs) -> Result<()> {
    let started = Instant::now();
    let cfg = load_scenario(common)?;
    std::fs::create_dir_all(&common.out)?;
    let built = cfg.build()?;
    let traj = integrate(&built.system, built.y0, &built.schedule, built.t_end, built.dt)?;

    let csv_path = common.out.join("trajectory.csv");
    output::write_trajectory_csv(&csv_path, &traj, built.record_every)?;
    let svg_path = common.out.join("trajectory.svg");
    let labels = traj.layout.labels();
    let series: Vec<(String, Vec<f64>)> = (0..labels.len())
        .map(|col| (labels[col].clone(), traj.states.iter().map(|s| s[col]).collect()))
        .collect();
    output::write_line_svg(&svg_path, "trajectory", &traj.times, &series)?;

    let final_idx = traj.last_index();
    let summary = RunSummary {
        scenario: cfg.description.clone(),
        seed: built.seed,
        t_end: built.t_end,
        dt: built.dt,
        runtime_seconds: started.elapsed().as_secs_f64(),
        final_time: traj.times[final_idx],
        final_state_norm: DVector::from_column_slice(traj.opinions_at(final_idx)).norm(),
        classification: classification_summary(&built.system, traj.opinions_at(final_idx))?,
        prediction: prediction_report(&cfg)?,
        spectral: spectral_report(&cfg)?,
        trajectory_csv: csv_path.display().to_string(),
        plot_svg: svg_path.display().to_string(),
    };
    output::write_json(&common.out.join("summary.json"), &summary)?;
    println!(
        "run: {} steps to t = {}, classified as `{}` ({}, {})",
        traj.len(),
        summary.final_time,
        summary.classification.label,
        csv_path.display(),
        svg_path.display()
    );
    Ok(())
}

fn analyze_command(common: &CommonArgs) -> Result<()> {
    let cfg = load_scenario(common)?;
    std::fs::create_dir_all(&common.out)?;
    let report = prediction_report(&cfg)?
        .ok_or_else(|| anyhow!("analysis needs homogeneous scalar gains on a graph"))?;
    let path = common.out.join("prediction.json");
    output::write_json(&path, &report)?;
    if !report.hypotheses_ok {
        eprintln!(
            "hypotheses failed: {}",
            report.diagnostics.join("; ")
        );
        println!("prediction written to {}", path.display());
        std::process::exit(1);
    }
    println!(
        "u* = {:.9} ({}), lambda = {:.9}; written to {}",
        report.u_star,
        report.regime,
        report.lambda,
        path.display()
    );
    Ok(())
}

fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        bail!("grid must be start:stop:step");
    }
    let start: f64 = parts[0].parse().context("grid start")?;
    let stop: f64 = parts[1].parse().context("grid stop")?;
    let step: f64 = parts[2].parse().context("grid step")?;
    if !(step > 0.0) || stop < start {
        bail!("grid needs stop >= start and step > 0");
    }
    let mut grid = Vec::new();
    let mut v = start;
    while v <= stop + 1e-12 {
        grid.push(v);
        v += step;
    }
    Ok(grid)
}

fn parse_list(spec: &str) -> Result<Vec<f64>> {
    spec.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| anyhow!("bad number `{s}`: {e}")))
        .collect()
}

fn sweep_command(common: &CommonArgs, parameter: &str, grid: &str) -> Result<()> {
    if parameter != "u" {
        bail!("only the attention parameter `u` can be swept");
    }
    let cfg = load_scenario(common)?;
    std::fs::create_dir_all(&common.out)?;
    let built = cfg.build()?;
    let System::TwoOption(sys) = &built.system else {
        bail!("bifurcation sweeps are wired to the two-option reduction");
    };
    let graph = cfg.build_graph()?;
    let regime = cfg
        .homogeneous_regime(&graph)
        .ok_or_else(|| anyhow!("sweeps need homogeneous scalar gains for the projection vector"))?;
    let pred = critical_attention(&regime)?;
    let grid = parse_grid(grid)?;
    let params: TwoOptionParams = sys.params.clone();
    let seeds: Vec<DVector<f64>> = vec![
        DVector::zeros(params.n_agents()),
        &pred.pattern_vector * 0.25,
        &pred.pattern_vector * -0.25,
        &pred.pattern_vector * 0.8,
        &pred.pattern_vector * -0.8,
        &pred.pattern_vector * 2.0,
        &pred.pattern_vector * -2.0,
    ];
    let branches = sweep_bifurcation(&params, &grid, &seeds, &pred.centrality_vector)?;
    let path = common.out.join("branches.csv");
    output::write_branch_csv(&path, &branches)?;
    let total: usize = branches.iter().map(|b| b.equilibria.len()).sum();
    println!(
        "sweep: {} grid points, {} equilibria, written to {}",
        branches.len(),
        total,
        path.display()
    );
    Ok(())
}

fn cascade_command(
    common: &CommonArgs,
    n_trials: usize,
    magnitudes: &str,
    alignments: &str,
) -> Result<()> {
    if n_trials == 0 {
        bail!("n_trials must be at least 1");
    }
    let cfg = load_scenario(common)?;
    std::fs::create_dir_all(&common.out)?;
    // the scenario fixes the graph/gains; the study grid comes from flags
    let _ = cfg.build()?;
    let magnitudes = parse_list(magnitudes)?;
    let alignments = parse_list(alignments)?;
    let cells = recipes::cascade_grid(
        &magnitudes,
        &alignments,
        n_trials,
        cfg.seed.wrapping_mul(1_000_003).wrapping_add(90_000),
        cfg.integration.dt.max(0.05),
    )?;
    let path = common.out.join("cascade_frequencies.csv");
    output::write_cascade_csv(&path, &cells)?;
    println!(
        "cascade study: {} cells x {n_trials} trials, written to {}",
        cells.len(),
        path.display()
    );
    Ok(())
}

fn reproduce_command(id: &str, out: &Path) -> Result<()> {
    let ids: Vec<FigureId> = if id == "all" {
        FigureId::all().to_vec()
    } else {
        vec![FigureId::parse(id)?]
    };
    let mut all_passed = true;
    for fig in ids {
        let dir = out.join(fig.as_str());
        let outcome = recipes::run_recipe(fig, &dir)?;
        println!(
            "{}: {} ({:.1} s)",
            fig.as_str(),
            if outcome.all_passed() { "PASS" } else { "FAIL" },
            outcome.runtime_seconds
        );
        for check in &outcome.checks {
            println!(
                "  [{}] {}: {}",
                if check.passed { "ok" } else { "FAILED" },
                check.name,
                check.details
            );
        }
        all_passed &= outcome.all_passed();
    }
    if !all_passed {
        std::process::exit(2);
    }
    Ok(())
}

fn graph_command(config: &Path, format: &str) -> Result<()> {
    let cfg = ScenarioConfig::load(config)?;
    let report = spectral_report(&cfg)?;
    if format == "json" {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!("kind,{}", report.kind);
        println!("n_agents,{}", report.n_agents);
        println!("symmetric,{}", report.symmetric);
        println!("signed,{}", report.signed);
        println!("strongly_connected,{}", report.strongly_connected);
        println!("lambda_max,{}", report.lambda_max);
        println!("lambda_min,{}", report.lambda_min);
        println!("lambda_max_simple,{}", report.lambda_max_simple);
        println!("lambda_min_simple,{}", report.lambda_min_simple);
        println!("lambda_min_real,{}", report.lambda_min_real);
        println!(
            "lambda_min_real_part_isolated,{}",
            report.lambda_min_real_part_isolated
        );
        println!("perron_positive,{}", report.perron_positive);
        if let Some(v) = &report.v_max {
            println!(
                "v_max,{}",
                v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
            );
        }
        if let Some(v) = &report.v_min {
            println!(
                "v_min,{}",
                v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
            );
        }
    }
    Ok(())
}
