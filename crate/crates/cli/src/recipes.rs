//! Bundled reference scenarios with expected-property checklists.
//!
//! Each recipe builds its scenario documents, runs them, writes the data
//! files (scenario TOML, trajectory/branch/cascade CSV, SVG plots) into the
//! output directory, and evaluates a figure-specific checklist. The
//! checklist results are the machine-readable contract; the plots are a
//! convenience.

use anyhow::{anyhow, bail, Result};
use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::Instant;

use opinionlab_core::analysis::{classify_state, critical_attention, Regime};
use opinionlab_core::dynamics::{
    find_equilibrium, integrate, integrate_terminal, sweep_bifurcation, InputSchedule, System,
    Trajectory,
};
use opinionlab_core::feedback::{estimate_cascade_threshold, has_cascaded, CascadeProbe};
use opinionlab_core::graph::{AdjacencySpec, GraphKind};
use opinionlab_core::model::{HomogeneousRegime, OpinionState};
use opinionlab_core::{sampling, TwoOptionParams};

use crate::config::{
    AttentionConfig, CouplingConfig, GraphConfig, InitConfig, InputSpec, IntegrationConfig,
    ModelConfig, PerAgent, PerturbationConfig, ScenarioConfig, ScheduleEntry,
};
use crate::output;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureId {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    Fig8,
    Fig9Scaled,
    Fig10,
}

impl FigureId {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "fig2" => FigureId::Fig2,
            "fig3" => FigureId::Fig3,
            "fig4" => FigureId::Fig4,
            "fig5" => FigureId::Fig5,
            "fig6" => FigureId::Fig6,
            "fig7" => FigureId::Fig7,
            "fig8" => FigureId::Fig8,
            "fig9_scaled" => FigureId::Fig9Scaled,
            "fig10" => FigureId::Fig10,
            other => bail!(
                "unknown figure id `{other}` (expected fig2..fig8, fig9_scaled, fig10)"
            ),
        })
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            FigureId::Fig2 => "fig2",
            FigureId::Fig3 => "fig3",
            FigureId::Fig4 => "fig4",
            FigureId::Fig5 => "fig5",
            FigureId::Fig6 => "fig6",
            FigureId::Fig7 => "fig7",
            FigureId::Fig8 => "fig8",
            FigureId::Fig9Scaled => "fig9_scaled",
            FigureId::Fig10 => "fig10",
        }
    }

    pub fn all() -> [FigureId; 9] {
        [
            FigureId::Fig2,
            FigureId::Fig3,
            FigureId::Fig4,
            FigureId::Fig5,
            FigureId::Fig6,
            FigureId::Fig7,
            FigureId::Fig8,
            FigureId::Fig9Scaled,
            FigureId::Fig10,
        ]
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub details: String,
}

impl CheckResult {
    fn new(name: &str, passed: bool, details: String) -> Self {
        Self {
            name: name.to_string(),
            passed,
            details,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RecipeOutcome {
    pub id: String,
    pub description: String,
    pub checks: Vec<CheckResult>,
    pub artifacts: Vec<PathBuf>,
    pub runtime_seconds: f64,
}

impl RecipeOutcome {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Runs a bundled figure recipe into `out_dir`.
pub fn run_recipe(id: FigureId, out_dir: &Path) -> Result<RecipeOutcome> {
    std::fs::create_dir_all(out_dir)?;
    let start = Instant::now();
    let (description, checks, artifacts) = match id {
        FigureId::Fig2 => fig2(out_dir)?,
        FigureId::Fig3 => fig3(out_dir)?,
        FigureId::Fig4 => fig4(out_dir)?,
        FigureId::Fig5 => fig5(out_dir)?,
        FigureId::Fig6 => fig6(out_dir)?,
        FigureId::Fig7 => fig7(out_dir)?,
        FigureId::Fig8 => fig8(out_dir)?,
        FigureId::Fig9Scaled => fig9_scaled(out_dir, 1000)?,
        FigureId::Fig10 => fig10(out_dir)?,
    };
    let outcome = RecipeOutcome {
        id: id.as_str().to_string(),
        description,
        checks,
        artifacts,
        runtime_seconds: start.elapsed().as_secs_f64(),
    };
    output::write_json(&out_dir.join("report.json"), &outcome)?;
    Ok(outcome)
}

// ---------------------------------------------------------------------------
// shared helpers
// ---------------------------------------------------------------------------

fn integrate_scenario(cfg: &ScenarioConfig) -> Result<(Trajectory, System)> {
    let built = cfg.build()?;
    let traj = integrate(&built.system, built.y0, &built.schedule, built.t_end, built.dt)?;
    Ok((traj, built.system))
}

fn write_scenario(out_dir: &Path, name: &str, cfg: &ScenarioConfig) -> Result<PathBuf> {
    let path = out_dir.join(name);
    std::fs::write(&path, cfg.to_toml()?)?;
    Ok(path)
}

fn save_trajectory(
    out_dir: &Path,
    stem: &str,
    traj: &Trajectory,
    record_every: usize,
    artifacts: &mut Vec<PathBuf>,
) -> Result<()> {
    let csv = out_dir.join(format!("{stem}.csv"));
    output::write_trajectory_csv(&csv, traj, record_every)?;
    artifacts.push(csv);
    let svg = out_dir.join(format!("{stem}.svg"));
    let labels = traj.layout.labels();
    let n_plot = labels.len().min(traj.states[0].len());
    let series: Vec<(String, Vec<f64>)> = (0..n_plot)
        .map(|col| {
            (
                labels[col].clone(),
                traj.states.iter().map(|s| s[col]).collect(),
            )
        })
        .collect();
    output::write_line_svg(&svg, stem, &traj.times, &series)?;
    artifacts.push(svg);
    Ok(())
}

/// Final opinions of a two-option trajectory.
fn final_x(traj: &Trajectory) -> DVector<f64> {
    DVector::from_column_slice(traj.opinions_at(traj.last_index()))
}

/// True when the sign pattern of `x` equals the sign pattern of `pattern`
/// or of `-pattern`; entries of `x` below `tol` are wildcards.
fn signs_match(x: &DVector<f64>, pattern: &DVector<f64>, tol: f64) -> bool {
    let direct = x
        .iter()
        .zip(pattern.iter())
        .all(|(&a, &b)| a.abs() < tol || a.signum() == b.signum());
    let flipped = x
        .iter()
        .zip(pattern.iter())
        .all(|(&a, &b)| a.abs() < tol || a.signum() == -b.signum());
    direct || flipped
}

fn fmt_vec(x: &DVector<f64>) -> String {
    let entries: Vec<String> = x.iter().map(|v| format!("{v:.4}")).collect();
    format!("[{}]", entries.join(", "))
}

// ---------------------------------------------------------------------------
// fig2: linear signed-consensus model next to the saturated model
// ---------------------------------------------------------------------------

/// Three agents, all-to-all signed coupling, structurally balanced split
/// {1} vs {2,3}. The published comparison references an external example
/// whose exact topology is not in scope; this balanced triangle is the
/// desk-scale equivalent and is written out with the artifacts.
fn fig2_config(u: f64, linear: bool) -> ScenarioConfig {
    let gamma_rows = vec![
        vec![0.0, -1.0, -1.0],
        vec![-1.0, 0.0, 1.0],
        vec![-1.0, 1.0, 0.0],
    ];
    ScenarioConfig {
        description: Some(
            "signed balanced triangle, in-degree resistance, bipartite consensus".into(),
        ),
        seed: 0,
        graph: GraphConfig {
            kind: "custom".into(),
            n: None,
            weight: 1.0,
            matrix: Some(gamma_rows.clone()),
        },
        model: ModelConfig {
            n_options: 2,
            representation: None,
            d: PerAgent::Scalar(2.0),
            u: PerAgent::Scalar(u),
            alpha: PerAgent::Scalar(0.0),
            beta: PerAgent::Scalar(0.0),
            gamma: Some(1.0),
            delta: None,
            gamma_matrix: Some(gamma_rows),
            delta_matrix: None,
            b: None,
            linear,
            saturation1: None,
            saturation2: None,
        },
        attention: None,
        coupling: None,
        init: InitConfig {
            x0: Some(vec![0.1, -0.09, -0.1]),
            z0: None,
            random: None,
        },
        schedule: vec![],
        integration: IntegrationConfig {
            t_end: 60.0,
            dt: 0.01,
            record_every: 1,
        },
        perturbations: None,
    }
}

fn fig2(out_dir: &Path) -> Result<(String, Vec<CheckResult>, Vec<PathBuf>)> {
    let mut artifacts = Vec::new();
    let mut checks = Vec::new();

    let linear_cfg = fig2_config(1.0, true);
    let nonlinear_cfg = fig2_config(1.01, false);
    artifacts.push(write_scenario(out_dir, "fig2_linear.toml", &linear_cfg)?);
    artifacts.push(write_scenario(out_dir, "fig2_nonlinear.toml", &nonlinear_cfg)?);

    let (lin, _) = integrate_scenario(&linear_cfg)?;
    let (nl, _) = integrate_scenario(&nonlinear_cfg)?;
    save_trajectory(out_dir, "fig2_linear", &lin, 10, &mut artifacts)?;
    save_trajectory(out_dir, "fig2_nonlinear", &nl, 10, &mut artifacts)?;

    // bipartite consensus: agent 1 against agents 2 and 3, equal magnitudes
    let xl = final_x(&lin);
    let pattern = DVector::from_row_slice(&[1.0, -1.0, -1.0]);
    let magspread = (xl[0].abs() - xl[1].abs())
        .abs()
        .max((xl[1].abs() - xl[2].abs()).abs());
    checks.push(CheckResult::new(
        "linear_bipartite_consensus",
        signs_match(&xl, &pattern, 1e-6) && magspread < 1e-3 && xl.amax() > 0.05,
        format!("final linear state {}", fmt_vec(&xl)),
    ));

    // small-state agreement between the two models over the early window
    let horizon = lin.index_at_time(5.0).min(nl.index_at_time(5.0));
    let mut worst = 0.0f64;
    for idx in 0..=horizon {
        let diff = (&lin.states[idx] - &nl.states[idx]).amax();
        worst = worst.max(diff);
    }
    checks.push(CheckResult::new(
        "linear_nonlinear_agreement",
        worst < 0.05,
        format!("max deviation over t in [0,5]: {worst:.4}"),
    ));

    Ok((
        "linear signed-consensus reference next to the saturated model on a \
         balanced signed triangle"
            .into(),
        checks,
        artifacts,
    ))
}

// ---------------------------------------------------------------------------
// fig3: static signed network, linear decay vs clustered dissensus
// ---------------------------------------------------------------------------

pub fn two_cluster_matrix() -> Vec<Vec<f64>> {
    let clusters: [&[usize]; 2] = [&[0, 1], &[2, 3, 4]];
    let mut rows = vec![vec![0.0; 5]; 5];
    for (p, cp) in clusters.iter().enumerate() {
        for &i in cp.iter() {
            for &k in cp.iter() {
                if i != k {
                    rows[i][k] = -1.0;
                }
            }
            for &k in clusters[1 - p].iter() {
                rows[i][k] = -2.0;
            }
        }
    }
    rows
}

fn fig3_config(linear: bool) -> ScenarioConfig {
    let rows = two_cluster_matrix();
    // the linear reference is the signed-consensus flow: resistance equals
    // the absolute in-degree and the exchange term enters at unit weight
    let (d, u) = if linear {
        let degrees: Vec<f64> = rows
            .iter()
            .map(|r| r.iter().map(|v| v.abs()).sum())
            .collect();
        (PerAgent::Vector(degrees), PerAgent::Scalar(1.0))
    } else {
        (PerAgent::Scalar(1.0), PerAgent::Scalar(0.5))
    };
    ScenarioConfig {
        description: Some("five agents, two antagonistic clusters, static gains".into()),
        seed: 0,
        graph: GraphConfig {
            kind: "custom".into(),
            n: None,
            weight: 1.0,
            matrix: Some(rows.clone()),
        },
        model: ModelConfig {
            n_options: 2,
            representation: None,
            d,
            u,
            alpha: PerAgent::Scalar(0.0),
            beta: PerAgent::Scalar(0.0),
            gamma: None,
            delta: None,
            gamma_matrix: Some(rows),
            delta_matrix: None,
            b: None,
            linear,
            saturation1: None,
            saturation2: None,
        },
        attention: None,
        coupling: None,
        init: InitConfig {
            x0: Some(vec![0.9, -0.4, 0.4, 0.1, -0.8]),
            z0: None,
            random: None,
        },
        schedule: vec![],
        integration: IntegrationConfig {
            t_end: 200.0,
            dt: 0.01,
            record_every: 1,
        },
        perturbations: None,
    }
}

fn fig3(out_dir: &Path) -> Result<(String, Vec<CheckResult>, Vec<PathBuf>)> {
    let mut artifacts = Vec::new();
    let mut checks = Vec::new();
    let partition = vec![vec![0usize, 1], vec![2, 3, 4]];

    let linear_cfg = fig3_config(true);
    let nonlinear_cfg = fig3_config(false);
    artifacts.push(write_scenario(out_dir, "fig3_linear.toml", &linear_cfg)?);
    artifacts.push(write_scenario(out_dir, "fig3_nonlinear.toml", &nonlinear_cfg)?);

    let (lin, _) = integrate_scenario(&linear_cfg)?;
    let (nl, _) = integrate_scenario(&nonlinear_cfg)?;
    save_trajectory(out_dir, "fig3_linear", &lin, 20, &mut artifacts)?;
    save_trajectory(out_dir, "fig3_nonlinear", &nl, 20, &mut artifacts)?;

    let xl = final_x(&lin);
    checks.push(CheckResult::new(
        "linear_decays_to_neutral",
        xl.amax() < 1e-2,
        format!("max |x_i| at t = 200: {:.3e}", xl.amax()),
    ));

    let x = final_x(&nl);
    let spread = |idx: &[usize]| -> f64 {
        let vals: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
        vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - vals.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let s1 = spread(&partition[0]);
    let s2 = spread(&partition[1]);
    let opposite = x[0] * x[2] < 0.0 && x[0].abs() > 0.1 && x[2].abs() > 0.1;
    checks.push(CheckResult::new(
        "nonlinear_clustered_dissensus",
        s1 < 1e-6 && s2 < 1e-6 && opposite,
        format!("final state {}, spreads ({s1:.2e}, {s2:.2e})", fmt_vec(&x)),
    ));

    // classification label via the analysis module
    let lifted = OpinionState::lift_two_option(x.as_slice());
    let class = classify_state(&lifted, 0.3, 1e-3)?;
    checks.push(CheckResult::new(
        "classified_as_disagreement",
        !class.agreement && !class.consensus,
        format!(
            "agreement = {}, consensus = {}, dissensus = {}",
            class.agreement, class.consensus, class.dissensus
        ),
    ));

    // Lyapunov distance to the cluster manifold collapses
    let mut dist_series = Vec::with_capacity(nl.len());
    for idx in 0..nl.len() {
        let d = opinionlab_core::distance_to_cluster_manifold(&nl.opinion_state(idx), &partition)?;
        dist_series.push(d);
    }
    let final_dist = *dist_series.last().unwrap();
    checks.push(CheckResult::new(
        "cluster_distance_collapses",
        final_dist < 1e-8,
        format!("distance at t = 200: {final_dist:.3e}"),
    ));
    let svg = out_dir.join("fig3_cluster_distance.svg");
    output::write_line_svg(
        &svg,
        "distance to cluster manifold",
        &nl.times,
        &[("V_T^(1/2)".to_string(), dist_series)],
    )?;
    artifacts.push(svg);

    // reduced two-cluster model tracks the full model's cluster means
    let built = nonlinear_cfg.build()?;
    let System::TwoOption(sys) = &built.system else {
        bail!("fig3 is a two-option scenario");
    };
    let reduced_full = opinionlab_core::reduce_clusters(&sys.params.lift()?, &partition)?;
    // the lifted reduction is a 2-agent two-option model; run it via the
    // scalar reduction with the reduced gains
    let reduced_params = TwoOptionParams::new(
        reduced_full.d.clone(),
        reduced_full.u.clone(),
        reduced_full.alpha.clone(),
        reduced_full.beta.clone(),
        reduced_full.gamma.clone(),
        reduced_full.delta.clone(),
        DVector::from_fn(2, |p, _| reduced_full.inputs()[(p, 0)]),
        sys.params.s1.clone(),
        sys.params.s2.clone(),
    )?;
    let x0 = DVector::from_row_slice(&[(0.9 - 0.4) / 2.0, (0.4 + 0.1 - 0.8) / 3.0]);
    let reduced_sys = System::TwoOption(opinionlab_core::TwoOptionSystem::plain(reduced_params));
    let (_, xr) = integrate_terminal(&reduced_sys, x0, &InputSchedule::empty(), 200.0, 0.01, None)?;
    let mean1 = (x[0] + x[1]) / 2.0;
    let mean2 = (x[2] + x[3] + x[4]) / 3.0;
    let err = (mean1 - xr[0]).abs().max((mean2 - xr[1]).abs());
    checks.push(CheckResult::new(
        "reduced_model_matches_cluster_means",
        err < 1e-6,
        format!(
            "cluster means ({mean1:.6}, {mean2:.6}) vs reduced ({:.6}, {:.6})",
            xr[0], xr[1]
        ),
    ));

    Ok((
        "static antagonistic clusters: the linear model decays to neutral, the \
         saturated model locks into clustered dissensus"
            .into(),
        checks,
        artifacts,
    ))
}

// ---------------------------------------------------------------------------
// fig4: pitchfork diagrams on the three-agent path
// ---------------------------------------------------------------------------

fn fig4_params(b: DVector<f64>) -> Result<TwoOptionParams> {
    let graph = AdjacencySpec::build(GraphKind::Path, 3, 1.0)?;
    let regime = HomogeneousRegime::new(graph, 1.0, 0.5, 1.0, 0.0, -1.0, 0.0)?;
    Ok(TwoOptionParams::homogeneous(&regime)?.with_inputs(b)?)
}

fn fig4(out_dir: &Path) -> Result<(String, Vec<CheckResult>, Vec<PathBuf>)> {
    let mut artifacts = Vec::new();
    let mut checks = Vec::new();

    let graph = AdjacencySpec::build(GraphKind::Path, 3, 1.0)?;
    let regime = HomogeneousRegime::new(graph.clone(), 1.0, 0.5, 1.0, 0.0, -1.0, 0.0)?;
    let pred = critical_attention(&regime)?;
    let u_star_exact = 1.0 / (1.0 + 2f64.sqrt());
    checks.push(CheckResult::new(
        "critical_attention_formula",
        (pred.u_star - u_star_exact).abs() < 1e-9 && pred.regime == Regime::Disagreement,
        format!("u* = {:.12} (expected {u_star_exact:.12})", pred.u_star),
    ));

    let w_min = pred.centrality_vector.clone();
    let v_min = pred.pattern_vector.clone();

    let seeds: Vec<DVector<f64>> = vec![
        DVector::zeros(3),
        &v_min * 0.25,
        &v_min * -0.25,
        &v_min * 0.8,
        &v_min * -0.8,
        &v_min * 2.0,
        &v_min * -2.0,
    ];
    let grid: Vec<f64> = (0..13).map(|k| 0.30 + 0.02 * k as f64).collect();

    // left panel: inputs orthogonal to the centrality vector
    let b_left = DVector::from_row_slice(&[0.2, 0.0, -0.2]);
    let params_left = fig4_params(b_left.clone())?;
    let branches = sweep_bifurcation(&params_left, &grid, &seeds, &w_min)?;
    let csv = out_dir.join("fig4_left_branches.csv");
    output::write_branch_csv(&csv, &branches)?;
    artifacts.push(csv);

    let mut below_ok = true;
    let mut above_ok = true;
    let mut mirror_ok = true;
    for point in &branches {
        if point.u <= 0.40 {
            below_ok &= point.equilibria.len() == 1 && point.equilibria[0].stable;
        }
        if point.u >= 0.44 {
            let stable: Vec<_> = point.equilibria.iter().filter(|e| e.stable).collect();
            above_ok &= point.equilibria.len() == 3 && stable.len() == 2;
            if stable.len() == 2 {
                mirror_ok &= (stable[0].projection + stable[1].projection).abs() < 1e-6;
            }
        }
    }
    checks.push(CheckResult::new(
        "symmetric_pitchfork_branch_counts",
        below_ok && above_ok,
        format!("single branch below threshold: {below_ok}, three above (two stable): {above_ok}"),
    ));
    checks.push(CheckResult::new(
        "symmetric_pitchfork_mirrored_branches",
        mirror_ok,
        "stable branch projections mirror through zero".into(),
    ));

    // right panel: unfolded along -w_min
    let b_right = &b_left - &w_min * 0.1;
    let unfold =
        opinionlab_core::analysis::unfolding_direction(&b_right, &graph.spectral_extrema()?, Regime::Disagreement)?;
    checks.push(CheckResult::new(
        "unfolding_inner_product",
        (unfold.value + 0.1).abs() < 1e-9 && unfold.predicted_branch_sign == -1,
        format!("<b, w_min> = {:.6}", unfold.value),
    ));

    let params_right = fig4_params(b_right)?;
    let grid_right: Vec<f64> = (0..19).map(|k| 0.30 + 0.02 * k as f64).collect();
    let branches_right = sweep_bifurcation(&params_right, &grid_right, &seeds, &w_min)?;
    let csv = out_dir.join("fig4_right_branches.csv");
    output::write_branch_csv(&csv, &branches_right)?;
    artifacts.push(csv);

    // just above threshold only the selected branch is stable
    let near = branches_right
        .iter()
        .find(|p| p.u >= u_star_exact + 0.04)
        .ok_or_else(|| anyhow!("grid misses the near-threshold point"))?;
    let near_stable: Vec<_> = near.equilibria.iter().filter(|e| e.stable).collect();
    checks.push(CheckResult::new(
        "unfolded_selects_negative_branch",
        near_stable.len() == 1 && near_stable[0].projection < 0.0,
        format!(
            "u = {:.3}: {} stable equilibria, projections {:?}",
            near.u,
            near_stable.len(),
            near_stable.iter().map(|e| e.projection).collect::<Vec<_>>()
        ),
    ));

    // the disconnected branch reconnects in a fold at larger attention
    let reconnect = branches_right
        .iter()
        .find(|p| p.equilibria.iter().filter(|e| e.stable).count() >= 2);
    checks.push(CheckResult::new(
        "saddle_node_reconnection",
        reconnect.is_some_and(|p| p.u > u_star_exact + 0.02),
        match reconnect {
            Some(p) => format!("second stable branch appears at u = {:.3}", p.u),
            None => "no reconnection found on the grid".into(),
        },
    ));

    if let Some(p) = reconnect {
        let u_probe = p.u.max(0.6);
        let mut probe = params_right.clone();
        probe.u = DVector::from_element(3, u_probe);
        let sys = System::TwoOption(opinionlab_core::TwoOptionSystem::plain(probe));
        let report = find_equilibrium(&sys, &v_min * 0.5, 1e-10)?;
        checks.push(CheckResult::new(
            "positive_branch_recovered_by_newton",
            report.converged && report.residual < 1e-10 && report.state.amax() > 0.05,
            format!(
                "u = {u_probe:.3}: residual {:.2e}, state {}",
                report.residual,
                fmt_vec(&report.state)
            ),
        ));
    }

    Ok((
        "disagreement pitchfork on the three-agent path and its input-driven \
         unfolding"
            .into(),
        checks,
        artifacts,
    ))
}

// ---------------------------------------------------------------------------
// fig5: agreement/disagreement patterns on four graph families
// ---------------------------------------------------------------------------

/// Graph sizes are chosen so the quoted attention values sit above the
/// relevant threshold with the bottom eigenvalue simple: 8 agents for path,
/// cycle and star, 10 for the wheel.
fn fig5_cases() -> Vec<(GraphKind, usize, f64)> {
    vec![
        (GraphKind::Path, 8, 0.31),
        (GraphKind::Cycle, 8, 0.31),
        (GraphKind::Star, 8, 0.26),
        (GraphKind::Wheel, 10, 0.26),
    ]
}

fn fig5(out_dir: &Path) -> Result<(String, Vec<CheckResult>, Vec<PathBuf>)> {
    let mut artifacts = Vec::new();
    let mut checks = Vec::new();
    const TRIALS: usize = 50;

    let mut rows = String::from("graph,regime,trials,matches\n");
    for (kind, n, u) in fig5_cases() {
        for (gamma, regime_name) in [(1.3, "agreement"), (-1.3, "disagreement")] {
            let graph = AdjacencySpec::build(kind, n, 1.0)?;
            let regime = HomogeneousRegime::new(graph, 1.0, u, 1.2, 0.0, gamma, 0.0)?;
            let pred = critical_attention(&regime)?;
            if !pred.hypotheses_ok {
                bail!(
                    "{}-{regime_name}: hypotheses failed: {:?}",
                    kind.as_str(),
                    pred.diagnostics
                );
            }
            if u <= pred.u_star {
                bail!(
                    "{}-{regime_name}: quoted attention {u} is below threshold {}",
                    kind.as_str(),
                    pred.u_star
                );
            }
            let params = TwoOptionParams::homogeneous(&regime)?;

            let matches: usize = (0..TRIALS)
                .into_par_iter()
                .map(|trial| {
                    let mut rng =
                        sampling::rng_from_seed(1000 + trial as u64 + 100 * n as u64);
                    let x0 = sampling::uniform_vector(&mut rng, n, -1.0, 1.0).unwrap();
                    let sys = System::TwoOption(opinionlab_core::TwoOptionSystem::plain(
                        params.clone(),
                    ));
                    let (_, x) = integrate_terminal(
                        &sys,
                        x0,
                        &InputSchedule::empty(),
                        500.0,
                        0.01,
                        None,
                    )
                    .unwrap();
                    usize::from(signs_match(&x, &pred.pattern_vector, 1e-3))
                })
                .sum();

            rows.push_str(&format!(
                "{},{},{TRIALS},{matches}\n",
                kind.as_str(),
                regime_name
            ));
            checks.push(CheckResult::new(
                &format!("{}_{regime_name}_pattern", kind.as_str()),
                matches * 100 >= TRIALS * 95,
                format!("{matches}/{TRIALS} runs matched the eigenvector sign pattern"),
            ));
        }
    }
    let csv = out_dir.join("fig5_patterns.csv");
    std::fs::write(&csv, rows)?;
    artifacts.push(csv);

    Ok((
        "steady-state sign patterns on path, cycle, star and wheel graphs \
         match the extremal eigenvectors"
            .into(),
        checks,
        artifacts,
    ))
}

// ---------------------------------------------------------------------------
// fig6 / fig7: single-agent sensitivity and robustness
// ---------------------------------------------------------------------------

/// Single-agent scenario with attention feedback.
///
/// The printed caption value d = 1 cannot reproduce the published behavior:
/// any equilibrium obeys x >= b/d (the social term is nonnegative for
/// x > 0), so with b = 0.5 no weakly opinionated state below 0.35 exists
/// and every input would cascade. With d = 2 the nullclines have the three
/// advertised intersections and the input threshold falls between 0.5 and
/// 1; the scenario file records that choice.
fn fig67_config(b: f64, u_high: f64, schedule: Vec<ScheduleEntry>, t_end: f64) -> ScenarioConfig {
    ScenarioConfig {
        description: Some(
            "single agent with attention feedback; resistance d = 2 replaces the \
             printed d = 1, which contradicts the advertised weak equilibrium"
                .into(),
        ),
        seed: 0,
        graph: GraphConfig {
            kind: "custom".into(),
            n: None,
            weight: 1.0,
            matrix: Some(vec![vec![0.0]]),
        },
        model: ModelConfig {
            n_options: 2,
            representation: None,
            d: PerAgent::Scalar(2.0),
            u: PerAgent::Scalar(0.0),
            alpha: PerAgent::Scalar(2.0),
            beta: PerAgent::Scalar(-1.0),
            gamma: None,
            delta: None,
            gamma_matrix: None,
            delta_matrix: None,
            b: Some(InputSpec::PerAgent(vec![b])),
            linear: false,
            saturation1: None,
            saturation2: None,
        },
        attention: Some(AttentionConfig {
            tau_u: 1.0,
            n_hill: 2.0,
            y_th: 0.4,
            u_low: Some(0.0),
            u_high: Some(u_high),
            u_low_offset: None,
            u_high_offset: None,
            adjacency: None,
            u0: Some(PerAgent::Scalar(0.0)),
            u0_random: None,
        }),
        coupling: None,
        init: InitConfig {
            x0: Some(vec![0.0]),
            z0: None,
            random: None,
        },
        schedule,
        integration: IntegrationConfig {
            t_end,
            dt: 0.01,
            record_every: 1,
        },
        perturbations: None,
    }
}

fn fig6(out_dir: &Path) -> Result<(String, Vec<CheckResult>, Vec<PathBuf>)> {
    let mut artifacts = Vec::new();
    let mut checks = Vec::new();

    let weak_cfg = fig67_config(0.5, 2.0, vec![], 60.0);
    let strong_cfg = fig67_config(1.0, 2.0, vec![], 60.0);
    artifacts.push(write_scenario(out_dir, "fig6_weak.toml", &weak_cfg)?);
    artifacts.push(write_scenario(out_dir, "fig6_strong.toml", &strong_cfg)?);

    let (weak, _) = integrate_scenario(&weak_cfg)?;
    let (strong, strong_sys) = integrate_scenario(&strong_cfg)?;
    save_trajectory(out_dir, "fig6_weak", &weak, 10, &mut artifacts)?;
    save_trajectory(out_dir, "fig6_strong", &strong, 10, &mut artifacts)?;

    let xw = weak.opinions_at(weak.last_index())[0];
    let uw = weak.attention_at(weak.last_index()).unwrap()[0];
    checks.push(CheckResult::new(
        "input_rejected_below_threshold",
        xw.abs() < 0.35,
        format!("b = 0.5: final x = {xw:.4}, u = {uw:.4}"),
    ));

    let xs = strong.opinions_at(strong.last_index())[0];
    let us = strong.attention_at(strong.last_index()).unwrap()[0];
    checks.push(CheckResult::new(
        "input_accepted_above_threshold",
        xs.abs() > 0.8,
        format!("b = 1.0: final x = {xs:.4}, u = {us:.4}"),
    ));

    // the accepted input leaves a single attracting strongly-opinionated
    // equilibrium on the approach path
    let guess = DVector::from_row_slice(&[1.0, 1.5]);
    let report = find_equilibrium(&strong_sys, guess, 1e-10)?;
    checks.push(CheckResult::new(
        "strong_equilibrium_found",
        report.converged && report.state[0] > 0.8,
        format!("equilibrium {}", fmt_vec(&report.state)),
    ));

    Ok((
        "tunable sensitivity for a single agent: input 0.5 is rejected, input \
         1.0 drives a strong opinion"
            .into(),
        checks,
        artifacts,
    ))
}

fn fig7(out_dir: &Path) -> Result<(String, Vec<CheckResult>, Vec<PathBuf>)> {
    let mut artifacts = Vec::new();
    let mut checks = Vec::new();

    for (u_high, expect_retained, label) in [(1.0, false, "low_ceiling"), (2.5, true, "high_ceiling")]
    {
        let schedule = vec![ScheduleEntry {
            t: 40.0,
            b: Some(InputSpec::PerAgent(vec![-1.0])),
            sigma: None,
        }];
        let cfg = fig67_config(1.0, u_high, schedule, 80.0);
        artifacts.push(write_scenario(out_dir, &format!("fig7_{label}.toml"), &cfg)?);
        let (traj, _) = integrate_scenario(&cfg)?;
        save_trajectory(out_dir, &format!("fig7_{label}"), &traj, 10, &mut artifacts)?;

        let before = traj.opinions_at(traj.index_at_time(40.0))[0];
        let after = traj.opinions_at(traj.last_index())[0];
        let retained = after > 0.1;
        let flipped = after < -0.1;
        checks.push(CheckResult::new(
            &format!("formed_positive_opinion_{label}"),
            before > 0.3,
            format!("x just before the switch: {before:.4}"),
        ));
        checks.push(CheckResult::new(
            &format!(
                "{}_{label}",
                if expect_retained { "opinion_retained" } else { "opinion_flipped" }
            ),
            if expect_retained { retained } else { flipped },
            format!("x after the b: +1 -> -1 switch: {after:.4}"),
        ));
    }

    Ok((
        "tunable robustness: a high attention ceiling makes the formed opinion \
         survive an opposing input, a low ceiling lets it flip"
            .into(),
        checks,
        artifacts,
    ))
}

// ---------------------------------------------------------------------------
// fig8: opinion cascades triggered by a single informed agent
// ---------------------------------------------------------------------------

/// The published cascade runs do not state their topology; the desk-scale
/// substitute is the five-agent path, whose bottom eigenvalue is simple
/// (an odd cycle's is not, which would break the disagreement hypotheses).
fn fig8_config(gamma: f64, seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        description: Some(
            "five-agent path; agent 5 receives a suprathreshold input at t = 20".into(),
        ),
        seed,
        graph: GraphConfig {
            kind: "path".into(),
            n: Some(5),
            weight: 1.0,
            matrix: None,
        },
        model: ModelConfig {
            n_options: 2,
            representation: None,
            d: PerAgent::Scalar(1.0),
            u: PerAgent::Scalar(0.0),
            alpha: PerAgent::Scalar(2.0),
            beta: PerAgent::Scalar(0.0),
            gamma: Some(gamma),
            delta: None,
            gamma_matrix: None,
            delta_matrix: None,
            b: Some(InputSpec::PerAgent(vec![-0.05, 0.05, 0.05, 0.05, 0.05])),
            linear: false,
            saturation1: None,
            saturation2: None,
        },
        attention: Some(AttentionConfig {
            tau_u: 5.0,
            n_hill: 3.0,
            y_th: 0.1,
            u_low: None,
            u_high: None,
            u_low_offset: Some(-0.3),
            u_high_offset: Some(0.3),
            adjacency: None,
            u0: None, // defaults to the attention floor
            u0_random: None,
        }),
        coupling: None,
        init: InitConfig {
            x0: None,
            z0: None,
            random: Some(crate::config::RandomSpec::Uniform {
                low: -0.2,
                high: 0.2,
            }),
        },
        schedule: vec![ScheduleEntry {
            t: 20.0,
            b: Some(InputSpec::PerAgent(vec![-0.05, 0.05, 0.05, 0.05, 0.25])),
            sigma: None,
        }],
        integration: IntegrationConfig {
            t_end: 100.0,
            dt: 0.01,
            record_every: 1,
        },
        perturbations: None,
    }
}

fn fig8(out_dir: &Path) -> Result<(String, Vec<CheckResult>, Vec<PathBuf>)> {
    let mut artifacts = Vec::new();
    let mut checks = Vec::new();

    let graph = AdjacencySpec::build(GraphKind::Path, 5, 1.0)?;
    let spectral = graph.spectral_extrema()?;
    let v_min = spectral
        .v_min
        .clone()
        .ok_or_else(|| anyhow!("path spectrum must be real"))?;

    for gamma in [1.0, -1.0, 0.0] {
        let label = match gamma {
            g if g > 0.0 => "agreement",
            g if g < 0.0 => "disagreement",
            _ => "uncoupled",
        };
        let mut cfg = fig8_config(gamma, 8);
        if gamma == 0.0 {
            // gamma = 0 has no opinion coupling; the threshold offsets are
            // relative to u* = d / alpha
            let base = cfg.attention.take().unwrap();
            cfg.attention = Some(AttentionConfig {
                u_low: Some(0.5 - 0.3),
                u_high: Some(0.5 + 0.3),
                u_low_offset: None,
                u_high_offset: None,
                ..base
            });
        }
        artifacts.push(write_scenario(out_dir, &format!("fig8_{label}.toml"), &cfg)?);
        let (traj, _) = integrate_scenario(&cfg)?;
        save_trajectory(out_dir, &format!("fig8_{label}"), &traj, 10, &mut artifacts)?;

        // strong-opinion boundary: a scale below the saturated amplitude,
        // comfortably above input-driven responses
        let strong = 0.3;
        let at_switch = DVector::from_column_slice(traj.opinions_at(traj.index_at_time(20.0)));
        let quiescent = !has_cascaded(at_switch.as_slice(), strong);
        checks.push(CheckResult::new(
            &format!("{label}_quiescent_before_switch"),
            quiescent,
            format!("x(20) = {}", fmt_vec(&at_switch)),
        ));

        let x = final_x(&traj);
        let cascaded = has_cascaded(x.as_slice(), strong);
        checks.push(CheckResult::new(
            &format!("{label}_cascades_after_switch"),
            cascaded,
            format!("x(100) = {}", fmt_vec(&x)),
        ));

        let lifted = OpinionState::lift_two_option(x.as_slice());
        let class = classify_state(&lifted, strong, 1e-3)?;
        let post = match label {
            "agreement" => CheckResult::new(
                "agreement_cascade_classification",
                class.agreement,
                format!("agreement = {}", class.agreement),
            ),
            "disagreement" => CheckResult::new(
                "disagreement_cascade_pattern",
                !class.agreement && signs_match(&x, &v_min, 1e-3),
                format!("pattern {} vs bottom eigenvector {}", fmt_vec(&x), fmt_vec(&v_min)),
            ),
            _ => {
                let b_post = [-0.05f64, 0.05, 0.05, 0.05, 0.25];
                let follows = x
                    .iter()
                    .zip(b_post.iter())
                    .all(|(&xi, &bi)| xi.signum() == bi.signum());
                CheckResult::new(
                    "uncoupled_cascade_follows_inputs",
                    follows,
                    format!("signs of x: {}", fmt_vec(&x)),
                )
            }
        };
        checks.push(post);
    }

    Ok((
        "a single informed agent triggers network cascades: agreement for \
         cooperative coupling, eigenvector-patterned disagreement for \
         competitive coupling, input-following opinions without coupling"
            .into(),
        checks,
        artifacts,
    ))
}

// ---------------------------------------------------------------------------
// fig9 (scaled): cascade frequency grid
// ---------------------------------------------------------------------------

fn fig9_attention(u_low: f64, u_high: f64) -> opinionlab_core::AttentionParams {
    opinionlab_core::AttentionParams::new(10.0, 3.0, 0.2, u_low, u_high)
        .expect("fig9 attention parameters are valid")
}

/// Runs the scaled cascade-frequency grid for the cooperative regime.
pub fn cascade_grid(
    magnitudes: &[f64],
    alignments: &[f64],
    trials: usize,
    seed: u64,
    dt: f64,
) -> Result<Vec<output::CascadeCell>> {
    let graph = AdjacencySpec::build(GraphKind::Path, 5, 1.0)?;
    let regime = HomogeneousRegime::new(graph.clone(), 1.0, 0.0, 2.0, 0.0, 1.0, 0.0)?;
    let pred = critical_attention(&regime)?;
    let ap = fig9_attention(pred.u_star - 0.01, pred.u_star + 0.3);
    let params = TwoOptionParams::homogeneous(&regime)?;
    let w = pred.centrality_vector.clone();
    let n = 5;
    let strong = 0.3;

    let mut cells = Vec::new();
    for (mi, &magnitude) in magnitudes.iter().enumerate() {
        for (ai, &alignment) in alignments.iter().enumerate() {
            let cell_seed = seed + (mi * alignments.len() + ai) as u64 * 1_000_003;
            let cascades: usize = (0..trials)
                .into_par_iter()
                .map(|trial| {
                    let mut rng = sampling::rng_from_seed(cell_seed + trial as u64);
                    let ortho = sampling::unit_orthogonal_to(&mut rng, &w).unwrap();
                    // random sign on the aligned component mirrors drawing b
                    // from a centered distribution
                    let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                    let b = (&w * (alignment * sign)
                        + &ortho * (1.0 - alignment * alignment).sqrt())
                        * magnitude;
                    let p = params.with_inputs(b).unwrap();
                    let sys = System::TwoOption(opinionlab_core::TwoOptionSystem::with_attention(
                        p,
                        ap.clone(),
                        graph.entries(),
                    ));
                    // quoted initial condition: neutral opinions, zero attention
                    let y0 = DVector::zeros(2 * n);
                    let stop = move |_t: f64, y: &[f64]| has_cascaded(&y[..n], strong);
                    let (_, y_final) = integrate_terminal(
                        &sys,
                        y0,
                        &InputSchedule::empty(),
                        500.0,
                        dt,
                        Some(&stop),
                    )
                    .unwrap();
                    usize::from(has_cascaded(&y_final.as_slice()[..n], strong))
                })
                .sum();
            cells.push(output::CascadeCell {
                magnitude,
                alignment,
                trials,
                cascades,
                frequency: cascades as f64 / trials as f64,
                seed: cell_seed,
            });
        }
    }
    Ok(cells)
}

/// One-sided 95% check that `hi` is not below `lo` beyond binomial noise.
fn nondecreasing_with_confidence(lo: &output::CascadeCell, hi: &output::CascadeCell) -> bool {
    let se = |c: &output::CascadeCell| {
        (c.frequency * (1.0 - c.frequency) / c.trials as f64).sqrt()
    };
    let margin = 1.645 * (se(lo).powi(2) + se(hi).powi(2)).sqrt();
    hi.frequency >= lo.frequency - margin
}

fn fig9_scaled(out_dir: &Path, trials: usize) -> Result<(String, Vec<CheckResult>, Vec<PathBuf>)> {
    let mut artifacts = Vec::new();
    let mut checks = Vec::new();

    let magnitudes = [0.01, 0.02, 0.03, 0.04, 0.05];
    let alignments = [0.1, 0.3, 0.5, 0.7, 0.9];
    // a coarser step keeps the Monte-Carlo budget sane; the step-halving
    // accuracy check lives in the dynamics tests
    let cells = cascade_grid(&magnitudes, &alignments, trials, 90_000, 0.05)?;
    let csv = out_dir.join("fig9_scaled_frequencies.csv");
    output::write_cascade_csv(&csv, &cells)?;
    artifacts.push(csv);

    let cell = |mi: usize, ai: usize| &cells[mi * alignments.len() + ai];

    // frequency rises with magnitude at the highest alignment
    let mut mag_ok = true;
    for mi in 0..magnitudes.len() - 1 {
        mag_ok &= nondecreasing_with_confidence(cell(mi, 4), cell(mi + 1, 4));
    }
    let mag_profile: Vec<f64> = (0..magnitudes.len()).map(|mi| cell(mi, 4).frequency).collect();
    checks.push(CheckResult::new(
        "frequency_nondecreasing_in_magnitude",
        mag_ok,
        format!("frequencies at max alignment: {mag_profile:?}"),
    ));

    // frequency rises with alignment at the highest magnitude
    let mut align_ok = true;
    for ai in 0..alignments.len() - 1 {
        align_ok &= nondecreasing_with_confidence(cell(4, ai), cell(4, ai + 1));
    }
    let align_profile: Vec<f64> = (0..alignments.len()).map(|ai| cell(4, ai).frequency).collect();
    checks.push(CheckResult::new(
        "frequency_nondecreasing_in_alignment",
        align_ok,
        format!("frequencies at max magnitude: {align_profile:?}"),
    ));

    let top = cell(magnitudes.len() - 1, alignments.len() - 1);
    checks.push(CheckResult::new(
        "top_bin_cascades",
        top.frequency > 0.9,
        format!("largest magnitude and alignment: frequency {}", top.frequency),
    ));

    Ok((
        format!(
            "cascade frequency over a {}x{} magnitude/alignment grid at {trials} \
             trials per bin (scaled-down Monte-Carlo study)",
            magnitudes.len(),
            alignments.len()
        ),
        checks,
        artifacts,
    ))
}

// ---------------------------------------------------------------------------
// fig10: feedback-controlled transition between consensus and dissensus
// ---------------------------------------------------------------------------

/// Seven agents in clusters of three and four. The attention ceiling and the
/// Hill shape are not quoted for this run; u_high = 2.5, n = 2, y_th = 1.0
/// keep attention pinned near its floor of 2 without changing the story.
fn fig10_config() -> ScenarioConfig {
    let n1 = 3.0;
    let n2 = 4.0;
    let mut gamma_rows = vec![vec![0.0; 7]; 7];
    let mut delta_rows = vec![vec![0.0; 7]; 7];
    for i in 0..7 {
        for k in 0..7 {
            if i == k {
                continue;
            }
            let same = (i < 3) == (k < 3);
            if same {
                let size = if i < 3 { n1 } else { n2 };
                gamma_rows[i][k] = 1.0 / size;
                delta_rows[i][k] = -1.0 / size;
            }
            // inter-cluster entries are dynamic; their initial values come
            // from the coupling block
        }
    }
    ScenarioConfig {
        description: Some(
            "two clusters with dynamic inter-cluster gains; sigma flips at t = 300".into(),
        ),
        seed: 42,
        graph: GraphConfig {
            kind: "all_to_all".into(),
            n: Some(7),
            weight: 1.0,
            matrix: None,
        },
        model: ModelConfig {
            n_options: 2,
            representation: None,
            d: PerAgent::Scalar(1.0),
            u: PerAgent::Scalar(0.0),
            alpha: PerAgent::Scalar(0.0),
            beta: PerAgent::Scalar(0.0),
            gamma: None,
            delta: None,
            gamma_matrix: Some(gamma_rows),
            delta_matrix: Some(delta_rows),
            b: Some(InputSpec::PerAgent(vec![
                0.5, 0.5, 0.5, -0.5, -0.5, -0.5, -0.5,
            ])),
            linear: false,
            saturation1: None,
            saturation2: None,
        },
        attention: Some(AttentionConfig {
            tau_u: 10.0,
            n_hill: 2.0,
            y_th: 1.0,
            u_low: Some(2.0),
            u_high: Some(2.5),
            u_low_offset: None,
            u_high_offset: None,
            adjacency: Some(crate::config::AttentionAdjacency::Named("ones".into())),
            u0: None,
            u0_random: Some(crate::config::RandomSpec::Normal { mean: 0.0, sd: 0.3 }),
        }),
        coupling: Some(CouplingConfig {
            sigma: 1,
            tau_gamma: 100.0,
            tau_delta: 100.0,
            gamma_f: 2.0,
            delta_f: 1.0,
            g_gamma: 10.0,
            g_delta: 10.0,
            partition: vec![vec![0, 1, 2], vec![3, 4, 5, 6]],
            gamma0: None,
            gamma0_random: Some(crate::config::RandomSpec::Normal { mean: -3.0, sd: 0.3 }),
            delta0: None,
            delta0_random: Some(crate::config::RandomSpec::Normal { mean: 1.0, sd: 0.3 }),
        }),
        init: InitConfig {
            x0: None,
            z0: None,
            random: Some(crate::config::RandomSpec::Normal { mean: 0.0, sd: 2.0 }),
        },
        schedule: vec![ScheduleEntry {
            t: 300.0,
            b: None,
            sigma: Some(-1),
        }],
        integration: IntegrationConfig {
            t_end: 600.0,
            dt: 0.01,
            record_every: 1,
        },
        perturbations: Some(PerturbationConfig {
            d_sd: 0.1,
            alpha_sd: 0.1,
            beta_sd: 0.1,
            b_sd: 0.1,
        }),
    }
}

fn fig10(out_dir: &Path) -> Result<(String, Vec<CheckResult>, Vec<PathBuf>)> {
    let mut artifacts = Vec::new();
    let mut checks = Vec::new();

    let cfg = fig10_config();
    artifacts.push(write_scenario(out_dir, "fig10.toml", &cfg)?);
    let (traj, _) = integrate_scenario(&cfg)?;
    save_trajectory(out_dir, "fig10", &traj, 50, &mut artifacts)?;

    let partition = [vec![0usize, 1, 2], vec![3usize, 4, 5, 6]];
    let snapshot = |t: f64| -> DVector<f64> {
        DVector::from_column_slice(traj.opinions_at(traj.index_at_time(t)))
    };

    // consensus through the late sigma = +1 phase: unanimous signs, rows
    // equal up to the input-driven spread
    let mut consensus_ok = true;
    let mut consensus_details = Vec::new();
    for t in [200.0, 250.0, 300.0] {
        let x = snapshot(t);
        let lifted = OpinionState::lift_two_option(x.as_slice());
        let scale = x.amax();
        let class = classify_state(&lifted, 0.3, 0.3 * scale)?;
        consensus_ok &= class.consensus && scale > 0.5;
        consensus_details.push(format!("t={t}: {}", fmt_vec(&x)));
    }
    checks.push(CheckResult::new(
        "consensus_while_cooperative",
        consensus_ok,
        consensus_details.join("; "),
    ));

    // gains: cooperative before the flip, competitive after
    let gains_at = |t: f64| {
        let (g, d) = traj.gains_at(traj.index_at_time(t)).unwrap();
        (g.iter().sum::<f64>() / 7.0, d.iter().sum::<f64>() / 7.0)
    };
    let (g_pre, d_pre) = gains_at(299.0);
    let (g_post, d_post) = gains_at(600.0);
    checks.push(CheckResult::new(
        "gain_feedback_tracks_sigma",
        g_pre - d_pre > 0.5 && g_post - d_post < -0.5,
        format!(
            "mean gamma - delta: {:.3} before the flip, {:.3} at the end",
            g_pre - d_pre,
            g_post - d_post
        ),
    ));

    // two-cluster dissensus by the end of the run
    let x = snapshot(600.0);
    let scale = x.amax();
    let spread = |idx: &[usize]| -> f64 {
        let vals: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
        vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - vals.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let m1 = partition[0].iter().map(|&i| x[i]).sum::<f64>() / 3.0;
    let m2 = partition[1].iter().map(|&i| x[i]).sum::<f64>() / 4.0;
    let dissensus = m1 * m2 < 0.0
        && spread(&partition[0]) < 0.35 * scale
        && spread(&partition[1]) < 0.35 * scale
        && (3.0 * m1 + 4.0 * m2).abs() / 7.0 < 0.25 * scale;
    checks.push(CheckResult::new(
        "clustered_dissensus_after_flip",
        dissensus,
        format!("x(600) = {}, cluster means ({m1:.3}, {m2:.3})", fmt_vec(&x)),
    ));

    Ok((
        "slow feedback on the inter-cluster gains steers the group from \
         consensus to clustered dissensus when sigma flips sign"
            .into(),
        checks,
        artifacts,
    ))
}

// ---------------------------------------------------------------------------
// cascade threshold estimation (shared with the acceptance suite)
// ---------------------------------------------------------------------------

/// Bisects the cascade threshold along the centrality direction for the
/// five-agent path scenario at a given Hill threshold.
pub fn path5_cascade_threshold(y_th: f64) -> Result<opinionlab_core::CascadeThreshold> {
    let graph = AdjacencySpec::build(GraphKind::Path, 5, 1.0)?;
    let regime = HomogeneousRegime::new(graph.clone(), 1.0, 0.0, 2.0, 0.0, 1.0, 0.0)?;
    let pred = critical_attention(&regime)?;
    let ap = opinionlab_core::AttentionParams::new(
        10.0,
        3.0,
        y_th,
        pred.u_star - 0.01,
        pred.u_star + 0.3,
    )?;
    let params = TwoOptionParams::homogeneous(&regime)?;
    let probe = CascadeProbe {
        direction: pred.centrality_vector.clone(),
        bracket: (0.0, 0.2),
        resolution: 5e-4,
        t_end: 500.0,
        dt: 0.05,
        strong_threshold: 0.3,
    };
    Ok(estimate_cascade_threshold(
        &params,
        &ap,
        graph.entries(),
        &probe,
    )?)
}
