//! Executable predictions: critical attention thresholds, state
//! classification, unfolding directions, cluster reduction, and symmetry
//! checks.

use nalgebra::{DMatrix, DVector};

use crate::error::{CoreError, Result};
use crate::graph::{GraphKind, SpectralSummary};
use crate::model::{vector_field, HomogeneousRegime, ModelParams, OpinionState};

/// Regime selected by the sign of `gamma - delta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Agreement,
    Disagreement,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Agreement => "agreement",
            Regime::Disagreement => "disagreement",
        }
    }
}

/// Critical attention prediction with the spectral data backing it.
#[derive(Debug, Clone)]
pub struct RegimePrediction {
    pub u_star: f64,
    pub regime: Regime,
    /// Right eigenvector setting the opinion pattern near the bifurcation.
    pub pattern_vector: DVector<f64>,
    /// Left eigenvector acting as the input-sensitivity (centrality) index.
    pub centrality_vector: DVector<f64>,
    pub lambda: f64,
    pub hypotheses_ok: bool,
    pub diagnostics: Vec<String>,
}

/// Critical attention for the homogeneous regime.
///
/// Cooperative couplings (`gamma > delta`) bifurcate along the leading
/// eigenvector at `u_a = d / (alpha - beta + lambda_max (gamma - delta))`;
/// competitive couplings along the bottom eigenvector at
/// `u_d = d / (alpha - beta + lambda_min (gamma - delta))`. Equal gains are
/// refused: both bifurcations coincide and the analysis does not apply.
pub fn critical_attention(regime: &HomogeneousRegime) -> Result<RegimePrediction> {
    let diff = regime.gamma - regime.delta;
    if diff == 0.0 {
        return Err(CoreError::HypothesisViolated(
            "gamma = delta is a mode interaction: agreement and disagreement \
             bifurcations coincide and this analysis refuses to pick one"
                .into(),
        ));
    }
    let summary = regime.graph.spectral_extrema()?;
    let mut diagnostics = Vec::new();
    let mut ok = true;

    if !regime.graph.is_strongly_connected() {
        ok = false;
        diagnostics.push("graph is not strongly connected".into());
    }

    let (kind, lambda, v, w) = if diff > 0.0 {
        if !summary.lambda_max_real {
            ok = false;
            diagnostics.push("lambda_max is not real".into());
        }
        if !summary.lambda_max_simple {
            ok = false;
            diagnostics.push("lambda_max is not simple".into());
        }
        if !summary.perron_positive {
            diagnostics.push("leading eigenvector is not strictly positive".into());
        }
        (
            Regime::Agreement,
            summary.lambda_max,
            summary.v_max.clone(),
            summary.w_max.clone(),
        )
    } else {
        if !summary.lambda_min_real {
            ok = false;
            diagnostics.push("lambda_min is not real".into());
        }
        if !summary.lambda_min_simple {
            ok = false;
            diagnostics.push("lambda_min is not simple".into());
        }
        if !summary.lambda_min_real_part_isolated {
            ok = false;
            diagnostics.push("another eigenvalue shares the real part of lambda_min".into());
        }
        (
            Regime::Disagreement,
            summary.lambda_min,
            summary.v_min.clone(),
            summary.w_min.clone(),
        )
    };

    let denominator = regime.alpha - regime.beta + lambda * diff;
    if denominator <= 0.0 {
        ok = false;
        diagnostics.push(format!(
            "threshold denominator alpha - beta + lambda (gamma - delta) = {denominator} \
             is not positive"
        ));
    }

    let (Some(v), Some(w)) = (v, w) else {
        return Err(CoreError::HypothesisViolated(format!(
            "no real eigenvector available for the {} regime: {}",
            kind.as_str(),
            diagnostics.join("; ")
        )));
    };

    let u_star = regime.d / denominator;
    Ok(RegimePrediction {
        u_star,
        regime: kind,
        pattern_vector: v,
        centrality_vector: w,
        lambda,
        hypotheses_ok: ok,
        diagnostics,
    })
}

/// Per-agent opinion strength.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpinionStrength {
    Weak,
    Strong,
}

/// Qualitative classification of an opinion state.
#[derive(Debug, Clone)]
pub struct StateClassification {
    pub agreement: bool,
    pub consensus: bool,
    pub dissensus: bool,
    pub opinionated: Vec<OpinionStrength>,
    /// Per agent/option signs: -1, 0 (below tolerance), +1.
    pub sign_matrix: Vec<Vec<i8>>,
}

/// Default boundary between weak and strong opinions. The distinction is
/// qualitative; this scale (fraction of the saturation ceiling times the
/// attention scale) works across the reference scenarios and callers can
/// override it.
pub fn default_strong_threshold(k2: f64, u_scale: f64) -> f64 {
    0.3 * k2 * u_scale.max(1.0)
}

/// Sign-pattern classification. Entries with `|z| < tol` count as
/// sign wildcards; consensus means all rows equal within `tol`; dissensus
/// means every option's group average is below `tol`.
pub fn classify_state(
    state: &OpinionState,
    strong_threshold: f64,
    tol: f64,
) -> Result<StateClassification> {
    if !(strong_threshold > 0.0) || !(tol > 0.0) {
        return Err(CoreError::InvalidParameter(
            "classification thresholds must be positive".into(),
        ));
    }
    let z = state.matrix();
    let n = state.n_agents();
    let no = state.n_options();

    let sign_matrix: Vec<Vec<i8>> = (0..n)
        .map(|i| {
            (0..no)
                .map(|j| {
                    let v = z[(i, j)];
                    if v.abs() < tol {
                        0
                    } else if v > 0.0 {
                        1
                    } else {
                        -1
                    }
                })
                .collect()
        })
        .collect();

    // unanimity per option, wildcards compatible with either sign
    let mut agreement = true;
    for j in 0..no {
        let mut seen = 0i8;
        for signs in &sign_matrix {
            let s = signs[j];
            if s == 0 {
                continue;
            }
            if seen == 0 {
                seen = s;
            } else if seen != s {
                agreement = false;
            }
        }
    }

    let mut consensus = true;
    'outer: for i in 1..n {
        for j in 0..no {
            if (z[(i, j)] - z[(0, j)]).abs() > tol {
                consensus = false;
                break 'outer;
            }
        }
    }
    if consensus {
        agreement = true;
    }

    let dissensus = (0..no).all(|j| {
        let mean: f64 = (0..n).map(|i| z[(i, j)]).sum::<f64>() / n as f64;
        mean.abs() < tol
    });

    let opinionated = (0..n)
        .map(|i| {
            if state.agent_norm(i) >= strong_threshold {
                OpinionStrength::Strong
            } else {
                OpinionStrength::Weak
            }
        })
        .collect();

    Ok(StateClassification {
        agreement,
        consensus,
        dissensus,
        opinionated,
        sign_matrix,
    })
}

/// Inner product of the inputs with the regime's centrality vector: its
/// sign selects the stable branch of the unfolded pitchfork, its magnitude
/// the strength of the unfolding.
#[derive(Debug, Clone, Copy)]
pub struct UnfoldingDirection {
    pub value: f64,
    /// Sign of `<x*, pattern_vector>` on the preferred stable branch;
    /// zero when the inputs leave the pitchfork symmetric.
    pub predicted_branch_sign: i8,
}

pub fn unfolding_direction(
    b: &DVector<f64>,
    summary: &SpectralSummary,
    regime: Regime,
) -> Result<UnfoldingDirection> {
    let w = match regime {
        Regime::Agreement => summary.w_max.as_ref(),
        Regime::Disagreement => summary.w_min.as_ref(),
    }
    .ok_or_else(|| {
        CoreError::HypothesisViolated(format!(
            "no real left eigenvector stored for the {} regime",
            regime.as_str()
        ))
    })?;
    if b.len() != w.len() {
        return Err(CoreError::DimensionMismatch(
            "input vector length must match the agent count".into(),
        ));
    }
    let value = b.dot(w);
    // below rounding noise the pitchfork is effectively symmetric
    let floor = 1e-12 * b.norm().max(1e-300);
    let predicted_branch_sign = if value > floor {
        1
    } else if value < -floor {
        -1
    } else {
        0
    };
    Ok(UnfoldingDirection {
        value,
        predicted_branch_sign,
    })
}

/// Structural description of a cluster-homogeneous parameter set.
#[derive(Debug, Clone)]
pub struct ClusterStructure {
    pub sizes: Vec<usize>,
    pub d: Vec<f64>,
    pub u: Vec<f64>,
    /// Within-cluster self gain and neighbour gain per cluster.
    pub alpha_bar: Vec<f64>,
    pub alpha_tilde: Vec<f64>,
    pub beta_bar: Vec<f64>,
    pub beta_tilde: Vec<f64>,
    /// Between-cluster gains, indexed `[p][s]`.
    pub gamma_tilde: Vec<Vec<f64>>,
    pub delta_tilde: Vec<Vec<f64>>,
    pub b_rows: Vec<DVector<f64>>,
}

const HOMOG_TOL: f64 = 1e-12;

fn all_close(values: impl Iterator<Item = f64>) -> Option<f64> {
    let mut first = None;
    for v in values {
        match first {
            None => first = Some(v),
            Some(f) if (v - f).abs() > HOMOG_TOL => return None,
            _ => {}
        }
    }
    first
}

/// Verifies the structural hypotheses for cluster synchronization: inside a
/// cluster all agents share d, u, inputs and gains; between two clusters the
/// gains are constant. Returns the per-cluster scalars.
pub fn cluster_structure(p: &ModelParams, partition: &[Vec<usize>]) -> Result<ClusterStructure> {
    let n = p.n_agents();
    let mut seen = vec![false; n];
    for cluster in partition {
        if cluster.is_empty() {
            return Err(CoreError::InvalidParameter("empty cluster".into()));
        }
        for &i in cluster {
            if i >= n || seen[i] {
                return Err(CoreError::InvalidParameter(
                    "partition must be a disjoint cover of the agents".into(),
                ));
            }
            seen[i] = true;
        }
    }
    if seen.iter().any(|&s| !s) {
        return Err(CoreError::InvalidParameter(
            "partition must cover every agent".into(),
        ));
    }

    let nc = partition.len();
    let mut out = ClusterStructure {
        sizes: partition.iter().map(|c| c.len()).collect(),
        d: Vec::with_capacity(nc),
        u: Vec::with_capacity(nc),
        alpha_bar: Vec::with_capacity(nc),
        alpha_tilde: Vec::with_capacity(nc),
        beta_bar: Vec::with_capacity(nc),
        beta_tilde: Vec::with_capacity(nc),
        gamma_tilde: vec![vec![0.0; nc]; nc],
        delta_tilde: vec![vec![0.0; nc]; nc],
        b_rows: Vec::with_capacity(nc),
    };

    let refuse = |what: &str, p_idx: usize| {
        CoreError::HypothesisViolated(format!(
            "cluster {p_idx}: {what} is not homogeneous within the cluster"
        ))
    };

    for (p_idx, cluster) in partition.iter().enumerate() {
        out.d.push(
            all_close(cluster.iter().map(|&i| p.d[i])).ok_or_else(|| refuse("d", p_idx))?,
        );
        out.u.push(
            all_close(cluster.iter().map(|&i| p.u[i])).ok_or_else(|| refuse("u", p_idx))?,
        );
        out.alpha_bar.push(
            all_close(cluster.iter().map(|&i| p.alpha[i]))
                .ok_or_else(|| refuse("alpha", p_idx))?,
        );
        out.beta_bar.push(
            all_close(cluster.iter().map(|&i| p.beta[i])).ok_or_else(|| refuse("beta", p_idx))?,
        );

        // within-cluster neighbour gains (skip the diagonal); singleton
        // clusters have no such edges and the value defaults to zero
        let mut pairs = cluster
            .iter()
            .flat_map(|&i| cluster.iter().map(move |&k| (i, k)))
            .filter(|&(i, k)| i != k)
            .peekable();
        if pairs.peek().is_none() {
            out.alpha_tilde.push(0.0);
            out.beta_tilde.push(0.0);
        } else {
            let g = all_close(
                cluster
                    .iter()
                    .flat_map(|&i| cluster.iter().map(move |&k| (i, k)))
                    .filter(|&(i, k)| i != k)
                    .map(|(i, k)| p.gamma[(i, k)]),
            )
            .ok_or_else(|| refuse("within-cluster gamma", p_idx))?;
            let dl = all_close(
                cluster
                    .iter()
                    .flat_map(|&i| cluster.iter().map(move |&k| (i, k)))
                    .filter(|&(i, k)| i != k)
                    .map(|(i, k)| p.delta[(i, k)]),
            )
            .ok_or_else(|| refuse("within-cluster delta", p_idx))?;
            out.alpha_tilde.push(g);
            out.beta_tilde.push(dl);
        }

        // inputs identical across the cluster
        let b0 = p.inputs().row(cluster[0]).transpose();
        for &i in cluster {
            if (p.inputs().row(i).transpose() - &b0).amax() > HOMOG_TOL {
                return Err(refuse("inputs", p_idx));
            }
        }
        out.b_rows.push(b0);
    }

    for (p_idx, cp) in partition.iter().enumerate() {
        for (s_idx, cs) in partition.iter().enumerate() {
            if p_idx == s_idx {
                continue;
            }
            let g = all_close(
                cp.iter()
                    .flat_map(|&i| cs.iter().map(move |&k| (i, k)))
                    .map(|(i, k)| p.gamma[(i, k)]),
            )
            .ok_or_else(|| {
                CoreError::HypothesisViolated(format!(
                    "gamma is not constant from cluster {s_idx} into cluster {p_idx}"
                ))
            })?;
            let dl = all_close(
                cp.iter()
                    .flat_map(|&i| cs.iter().map(move |&k| (i, k)))
                    .map(|(i, k)| p.delta[(i, k)]),
            )
            .ok_or_else(|| {
                CoreError::HypothesisViolated(format!(
                    "delta is not constant from cluster {s_idx} into cluster {p_idx}"
                ))
            })?;
            out.gamma_tilde[p_idx][s_idx] = g;
            out.delta_tilde[p_idx][s_idx] = dl;
        }
    }

    Ok(out)
}

/// Result of the cluster-synchronization sufficient condition.
#[derive(Debug, Clone)]
pub struct ClusterCondition {
    pub holds: bool,
    /// Per-cluster supremum of the contraction bound; synchronization is
    /// guaranteed when every entry is negative.
    pub margins: Vec<f64>,
}

/// Evaluates `sup_{k1, k2} { -d_p + u_p k1 (alpha_bar - alpha_tilde)
/// + u_p k2 (beta_bar - beta_tilde) }` over the derivative ranges
/// `K_q = (0, sup S_q']` of the two saturations.
pub fn check_cluster_condition(
    p: &ModelParams,
    partition: &[Vec<usize>],
) -> Result<ClusterCondition> {
    let s = cluster_structure(p, partition)?;
    let k1_sup = p.s1.derivative_sup();
    let k2_sup = p.s2.derivative_sup();
    // sup over kappa in (0, kappa_max] of c*kappa: c*kappa_max for c > 0,
    // otherwise the supremum is approached at kappa -> 0+
    let sup_term = |c: f64, kappa_max: f64| if c > 0.0 { c * kappa_max } else { 0.0 };
    let mut margins = Vec::with_capacity(s.sizes.len());
    for p_idx in 0..s.sizes.len() {
        let c1 = s.alpha_bar[p_idx] - s.alpha_tilde[p_idx];
        let c2 = s.beta_bar[p_idx] - s.beta_tilde[p_idx];
        let margin = -s.d[p_idx]
            + s.u[p_idx] * sup_term(c1, k1_sup)
            + s.u[p_idx] * sup_term(c2, k2_sup);
        margins.push(margin);
    }
    Ok(ClusterCondition {
        holds: margins.iter().all(|&m| m < 0.0),
        margins,
    })
}

/// Reduced model on the cluster manifold: one agent per cluster with
/// `alpha_hat = alpha_bar + (N_p - 1) alpha_tilde`,
/// `gamma_hat_ps = N_s gamma_tilde_ps`, and likewise for beta/delta.
pub fn reduce_clusters(p: &ModelParams, partition: &[Vec<usize>]) -> Result<ModelParams> {
    let s = cluster_structure(p, partition)?;
    let nc = s.sizes.len();
    let no = p.n_options();

    let mut gamma = DMatrix::zeros(nc, nc);
    let mut delta = DMatrix::zeros(nc, nc);
    for p_idx in 0..nc {
        for s_idx in 0..nc {
            if p_idx != s_idx {
                gamma[(p_idx, s_idx)] = s.sizes[s_idx] as f64 * s.gamma_tilde[p_idx][s_idx];
                delta[(p_idx, s_idx)] = s.sizes[s_idx] as f64 * s.delta_tilde[p_idx][s_idx];
            }
        }
    }
    let mut b = DMatrix::zeros(nc, no);
    for (p_idx, row) in s.b_rows.iter().enumerate() {
        for j in 0..no {
            b[(p_idx, j)] = row[j];
        }
    }
    ModelParams::new(
        DVector::from_vec(s.d.clone()),
        DVector::from_vec(s.u.clone()),
        DVector::from_fn(nc, |p_idx, _| {
            s.alpha_bar[p_idx] + (s.sizes[p_idx] as f64 - 1.0) * s.alpha_tilde[p_idx]
        }),
        DVector::from_fn(nc, |p_idx, _| {
            s.beta_bar[p_idx] + (s.sizes[p_idx] as f64 - 1.0) * s.beta_tilde[p_idx]
        }),
        gamma,
        delta,
        b,
        p.s1.clone(),
        p.s2.clone(),
    )
}

/// Applies agent and option permutations to a state:
/// `result[i][j] = z[agent_perm[i]][option_perm[j]]`.
pub fn permute_state(
    state: &OpinionState,
    agent_perm: &[usize],
    option_perm: &[usize],
) -> Result<OpinionState> {
    let n = state.n_agents();
    let no = state.n_options();
    validate_permutation(agent_perm, n)?;
    validate_permutation(option_perm, no)?;
    let z = state.matrix();
    let permuted = DMatrix::from_fn(n, no, |i, j| z[(agent_perm[i], option_perm[j])]);
    OpinionState::new(permuted)
}

fn validate_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(CoreError::DimensionMismatch(format!(
            "permutation length {} does not match {n}",
            perm.len()
        )));
    }
    let mut seen = vec![false; n];
    for &i in perm {
        if i >= n || seen[i] {
            return Err(CoreError::InvalidParameter(
                "not a valid permutation".into(),
            ));
        }
        seen[i] = true;
    }
    Ok(())
}

/// Maximum over sample states of the commutation defect
/// `|| rho F(Z) - F(rho Z) ||` between the field and a permutation of
/// agents/options. Zero (to rounding) certifies the permutation is a
/// symmetry of the dynamics.
pub fn equivariance_residual(
    p: &ModelParams,
    agent_perm: &[usize],
    option_perm: &[usize],
    sample_states: &[OpinionState],
) -> Result<f64> {
    let mut worst = 0.0f64;
    for state in sample_states {
        let f = vector_field(state, p)?;
        let f_state = OpinionState::project(f)?;
        let rho_f = permute_state(&f_state, agent_perm, option_perm)?;
        let rho_z = permute_state(state, agent_perm, option_perm)?;
        let f_rho = vector_field(&rho_z, p)?;
        let defect = (rho_f.matrix() - f_rho).amax();
        worst = worst.max(defect);
    }
    Ok(worst)
}

/// Closed-form extremal eigenvalue entering the thresholds for the two
/// transitive-symmetry families.
pub fn predict_symmetric_lambda(kind: GraphKind, n: usize, regime: Regime) -> Result<f64> {
    match (kind, regime) {
        (GraphKind::AllToAll, Regime::Agreement) => Ok(n as f64 - 1.0),
        (GraphKind::AllToAll, Regime::Disagreement) => Ok(-1.0),
        (GraphKind::Cycle, Regime::Agreement) => Ok(2.0),
        (GraphKind::Cycle, Regime::Disagreement) => {
            if n.is_multiple_of(2) {
                Ok(-2.0)
            } else {
                Ok(2.0 * (std::f64::consts::PI * (n as f64 - 1.0) / n as f64).cos())
            }
        }
        (other, _) => Err(CoreError::InvalidParameter(format!(
            "no closed-form eigenvalue for graph kind `{}`",
            other.as_str()
        ))),
    }
}
