//! State feedback on model parameters: attention dynamics driven by a Hill
//! saturation of perceived opinion activity, slow dynamics for inter-cluster
//! coupling gains, and the empirical cascade-threshold estimator.

use nalgebra::{DMatrix, DVector};

use crate::error::{CoreError, Result};
use crate::model::OpinionState;

/// Leaky-integrator attention parameters.
///
/// The threshold window `u_high > u* >= u_low > 0` is a hypothesis of the
/// cascade results, not a construction constraint: reference scenarios use
/// `u_low = 0` and even `u* - 0.3 < 0`, so the constructor only requires
/// `u_high > u_low`. Use [`AttentionParams::check_threshold_window`] when an
/// analysis needs the hypothesis.
#[derive(Debug, Clone)]
pub struct AttentionParams {
    pub tau_u: f64,
    pub n_hill: f64,
    pub y_th: f64,
    pub u_low: f64,
    pub u_high: f64,
    /// Perception weights; `None` means `A + I` built from the scenario's
    /// opinion graph at system-composition time.
    pub adjacency: Option<DMatrix<f64>>,
}

impl AttentionParams {
    pub fn new(tau_u: f64, n_hill: f64, y_th: f64, u_low: f64, u_high: f64) -> Result<Self> {
        if !(tau_u > 0.0) {
            return Err(CoreError::InvalidParameter(
                "attention time scale tau_u must be positive".into(),
            ));
        }
        if !(n_hill > 0.0) {
            return Err(CoreError::InvalidParameter(
                "hill exponent must be positive".into(),
            ));
        }
        if !(y_th > 0.0) {
            return Err(CoreError::InvalidParameter(
                "hill threshold y_th must be positive".into(),
            ));
        }
        if !(u_high > u_low) {
            return Err(CoreError::InvalidParameter(
                "attention range needs u_high > u_low".into(),
            ));
        }
        Ok(Self {
            tau_u,
            n_hill,
            y_th,
            u_low,
            u_high,
            adjacency: None,
        })
    }

    pub fn with_adjacency(mut self, adjacency: DMatrix<f64>) -> Self {
        self.adjacency = Some(adjacency);
        self
    }

    /// Validates `u_high > u_star >= u_low > 0` against a scenario's
    /// critical attention.
    pub fn check_threshold_window(&self, u_star: f64) -> Result<()> {
        if !(self.u_high > u_star && u_star >= self.u_low && self.u_low > 0.0) {
            return Err(CoreError::HypothesisViolated(format!(
                "attention window violated: need u_high > u* >= u_low > 0, got \
                 u_high = {}, u* = {u_star}, u_low = {}",
                self.u_high, self.u_low
            )));
        }
        Ok(())
    }

    /// Perception matrix for a given opinion adjacency: the stored override,
    /// or `A + I`.
    pub fn perception_matrix(&self, opinion_adjacency: &DMatrix<f64>) -> DMatrix<f64> {
        match &self.adjacency {
            Some(m) => m.clone(),
            None => {
                let mut m = opinion_adjacency.clone();
                for i in 0..m.nrows() {
                    m[(i, i)] += 1.0;
                }
                m
            }
        }
    }
}

/// Hill saturation `u_low + (u_high - u_low) y^n / (y_th^n + y^n)`.
/// Monotone on y >= 0 with range `[u_low, u_high)`.
pub fn hill_eval(ap: &AttentionParams, y: f64) -> Result<f64> {
    if y < 0.0 {
        return Err(CoreError::InvalidParameter(format!(
            "hill input must be nonnegative (it is a sum of squares), got {y}"
        )));
    }
    if y == 0.0 {
        return Ok(ap.u_low);
    }
    let yn = powf_fast(y, ap.n_hill);
    let tn = powf_fast(ap.y_th, ap.n_hill);
    Ok(ap.u_low + (ap.u_high - ap.u_low) * yn / (tn + yn))
}

#[inline]
fn powf_fast(y: f64, n: f64) -> f64 {
    // integer exponents dominate in practice; skip the powf call for them
    if n == 2.0 {
        y * y
    } else if n == 3.0 {
        y * y * y
    } else if n == n.trunc() && n > 0.0 && n <= 16.0 {
        y.powi(n as i32)
    } else {
        y.powf(n)
    }
}

/// Attention drive for the multi-option state:
/// `tau_u du_i = -u_i + S_u( (1/No) sum_k sum_l (abar_ik z_kl)^2 )`.
pub fn attention_field(
    state: &OpinionState,
    u: &DVector<f64>,
    ap: &AttentionParams,
    perception: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    let n = state.n_agents();
    let no = state.n_options();
    if u.len() != n || perception.nrows() != n || perception.ncols() != n {
        return Err(CoreError::DimensionMismatch(
            "attention state and perception matrix must match the agent count".into(),
        ));
    }
    let z = state.matrix();
    let mut du = DVector::zeros(n);
    for i in 0..n {
        let mut y = 0.0;
        for k in 0..n {
            let w = perception[(i, k)];
            if w == 0.0 {
                continue;
            }
            for l in 0..no {
                let t = w * z[(k, l)];
                y += t * t;
            }
        }
        y /= no as f64;
        du[i] = (-u[i] + hill_eval(ap, y)?) / ap.tau_u;
    }
    Ok(du)
}

/// Slice-based core of the two-option attention drive, used by the
/// integrator's hot loop.
pub(crate) fn attention_rhs_two_option_into(
    x: &[f64],
    u: &[f64],
    ap: &AttentionParams,
    perception: &DMatrix<f64>,
    out: &mut [f64],
) -> Result<()> {
    let n = x.len();
    for i in 0..n {
        let mut y = 0.0;
        for k in 0..n {
            let w = perception[(i, k)];
            if w != 0.0 {
                let t = w * x[k];
                y += t * t;
            }
        }
        out[i] = (-u[i] + hill_eval(ap, y)?) / ap.tau_u;
    }
    Ok(())
}

/// Two-option specialization: the option sum collapses and the 1/No factor
/// drops, leaving `S_u( sum_k (abar_ik x_k)^2 )`.
pub fn attention_field_two_option(
    x: &DVector<f64>,
    u: &DVector<f64>,
    ap: &AttentionParams,
    perception: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    let n = x.len();
    if u.len() != n || perception.nrows() != n || perception.ncols() != n {
        return Err(CoreError::DimensionMismatch(
            "attention state and perception matrix must match the agent count".into(),
        ));
    }
    let mut du = DVector::zeros(n);
    attention_rhs_two_option_into(
        x.as_slice(),
        u.as_slice(),
        ap,
        perception,
        du.as_mut_slice(),
    )?;
    Ok(du)
}

/// Parameters of the slow inter-cluster gain dynamics.
///
/// `sigma = +1` steers the network toward cooperation (consensus),
/// `sigma = -1` toward competition (dissensus); the drive strength follows
/// the joint activity `|xhat_1 * xhat_2|` of the two cluster means through a
/// tanh saturation, so gains decay to zero when either cluster is neutral.
#[derive(Debug, Clone)]
pub struct CouplingFeedbackParams {
    pub sigma: i8,
    pub tau_gamma: f64,
    pub tau_delta: f64,
    pub gamma_f: f64,
    pub delta_f: f64,
    pub g_gamma: f64,
    pub g_delta: f64,
    pub partition: [Vec<usize>; 2],
}

impl CouplingFeedbackParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        sigma: i8,
        tau_gamma: f64,
        tau_delta: f64,
        gamma_f: f64,
        delta_f: f64,
        g_gamma: f64,
        g_delta: f64,
        partition: [Vec<usize>; 2],
    ) -> Result<Self> {
        if sigma != 1 && sigma != -1 {
            return Err(CoreError::InvalidParameter("sigma must be +1 or -1".into()));
        }
        for v in [tau_gamma, tau_delta, gamma_f, delta_f, g_gamma, g_delta] {
            if !(v > 0.0) {
                return Err(CoreError::InvalidParameter(
                    "coupling feedback scales must be positive".into(),
                ));
            }
        }
        if partition[0].is_empty() || partition[1].is_empty() {
            return Err(CoreError::InvalidParameter(
                "both clusters must be nonempty".into(),
            ));
        }
        Ok(Self {
            sigma,
            tau_gamma,
            tau_delta,
            gamma_f,
            delta_f,
            g_gamma,
            g_delta,
            partition,
        })
    }

    /// Checks the partition covers 0..n disjointly.
    pub fn validate_partition(&self, n: usize) -> Result<()> {
        let mut seen = vec![false; n];
        for cluster in &self.partition {
            for &i in cluster {
                if i >= n {
                    return Err(CoreError::InvalidParameter(format!(
                        "partition index {i} out of range for {n} agents"
                    )));
                }
                if seen[i] {
                    return Err(CoreError::InvalidParameter(format!(
                        "agent {i} appears in both clusters"
                    )));
                }
                seen[i] = true;
            }
        }
        if seen.iter().any(|&s| !s) {
            return Err(CoreError::InvalidParameter(
                "partition must cover every agent".into(),
            ));
        }
        Ok(())
    }
}

/// Gain drive for one agent given the two cluster means.
/// Returns `(dgamma, ddelta)`.
pub fn coupling_field(
    gamma_i: f64,
    delta_i: f64,
    xhat_1: f64,
    xhat_2: f64,
    cp: &CouplingFeedbackParams,
    sigma: i8,
) -> (f64, f64) {
    let activity = (xhat_1 * xhat_2).abs();
    let s = sigma as f64;
    let dg = (-gamma_i + s * cp.gamma_f * (cp.g_gamma * activity).tanh()) / cp.tau_gamma;
    let dd = (-delta_i - s * cp.delta_f * (cp.g_delta * activity).tanh()) / cp.tau_delta;
    (dg, dd)
}

/// Cascade verdict for a terminal state: at least half the agents (rounded
/// up) hold an opinion beyond the strong threshold.
pub fn has_cascaded(x: &[f64], strong_threshold: f64) -> bool {
    let needed = x.len().div_ceil(2);
    x.iter().filter(|v| v.abs() >= strong_threshold).count() >= needed
}

/// Outcome of a cascade-threshold bisection.
#[derive(Debug, Clone)]
pub struct CascadeThreshold {
    /// Input magnitude along the probe direction at the cascade boundary.
    pub p_threshold: f64,
    /// Half-width of the final bracket.
    pub resolution: f64,
    pub evaluations: usize,
}

/// Settings for [`estimate_cascade_threshold`].
#[derive(Debug, Clone)]
pub struct CascadeProbe {
    /// Unit input direction; the bisection scales it.
    pub direction: DVector<f64>,
    /// Initial bracket `(lo, hi)` on the input magnitude. The endpoints
    /// must straddle the threshold (no cascade at `lo`, cascade at `hi`).
    pub bracket: (f64, f64),
    /// Bisection stops when the bracket is narrower than this.
    pub resolution: f64,
    /// Horizon for each probe run.
    pub t_end: f64,
    pub dt: f64,
    /// Opinion magnitude defining "strongly opinionated".
    pub strong_threshold: f64,
}

/// Bisection on the input magnitude along a fixed direction: each probe
/// integrates the coupled opinion-attention system from the weakly
/// opinionated rest state (neutral opinions, attention at its floor) and
/// classifies the terminal state. Refuses when the bracket endpoints do not
/// straddle the threshold.
pub fn estimate_cascade_threshold(
    params: &crate::model::TwoOptionParams,
    ap: &AttentionParams,
    opinion_adjacency: &DMatrix<f64>,
    probe: &CascadeProbe,
) -> Result<CascadeThreshold> {
    use crate::dynamics::{integrate_terminal, InputSchedule, System, TwoOptionSystem};

    if opinion_adjacency != &opinion_adjacency.transpose() {
        return Err(CoreError::HypothesisViolated(
            "cascade threshold analysis needs a symmetric adjacency matrix".into(),
        ));
    }
    let n = params.n_agents();
    if probe.direction.len() != n {
        return Err(CoreError::DimensionMismatch(
            "probe direction must have one entry per agent".into(),
        ));
    }
    let (mut lo, mut hi) = probe.bracket;
    if !(lo >= 0.0 && hi > lo) {
        return Err(CoreError::InvalidParameter(
            "cascade bracket must satisfy 0 <= lo < hi".into(),
        ));
    }

    let mut evaluations = 0;
    let mut run = |magnitude: f64| -> Result<bool> {
        evaluations += 1;
        let with_b = params.with_inputs(&probe.direction * magnitude)?;
        let sys = System::TwoOption(TwoOptionSystem::with_attention(
            with_b,
            ap.clone(),
            opinion_adjacency,
        ));
        // weakly opinionated rest: x = 0, u at the attention floor
        let mut y0 = DVector::zeros(2 * n);
        for i in 0..n {
            y0[n + i] = ap.u_low;
        }
        let strong = probe.strong_threshold;
        let stop = move |_t: f64, y: &[f64]| has_cascaded(&y[..n], strong);
        let (_, y_final) = integrate_terminal(
            &sys,
            y0,
            &InputSchedule::empty(),
            probe.t_end,
            probe.dt,
            Some(&stop),
        )?;
        Ok(has_cascaded(&y_final.as_slice()[..n], strong))
    };

    let lo_cascades = run(lo)?;
    let hi_cascades = run(hi)?;
    if lo_cascades || !hi_cascades {
        return Err(CoreError::HypothesisViolated(format!(
            "bracket does not straddle the cascade threshold: \
             magnitude {lo} -> cascade = {lo_cascades}, magnitude {hi} -> cascade = {hi_cascades}"
        )));
    }

    while hi - lo > probe.resolution {
        let mid = 0.5 * (lo + hi);
        if run(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }

    Ok(CascadeThreshold {
        p_threshold: 0.5 * (lo + hi),
        resolution: 0.5 * (hi - lo),
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ap(n: f64, y_th: f64, lo: f64, hi: f64) -> AttentionParams {
        AttentionParams::new(1.0, n, y_th, lo, hi).unwrap()
    }

    #[test]
    fn hill_anchor_points() {
        let p = ap(2.0, 0.4, 0.0, 2.0);
        assert_eq!(hill_eval(&p, 0.0).unwrap(), 0.0);
        // half saturation at the threshold
        assert_abs_diff_eq!(hill_eval(&p, 0.4).unwrap(), 1.0, epsilon = 1e-12);
        // hand value: 2 * 0.64 / (0.16 + 0.64)
        assert_abs_diff_eq!(hill_eval(&p, 0.8).unwrap(), 1.6, epsilon = 1e-12);
        assert!(hill_eval(&p, -0.1).is_err());
    }

    #[test]
    fn hill_is_monotone_and_bounded() {
        let p = ap(3.0, 0.1, 0.2, 0.8);
        let mut prev = f64::NEG_INFINITY;
        for i in 0..400 {
            let y = i as f64 * 0.01;
            let v = hill_eval(&p, y).unwrap();
            assert!(v >= prev - 1e-15);
            assert!(v >= p.u_low && v < p.u_high);
            prev = v;
        }
    }

    #[test]
    fn attention_decays_to_floor_at_neutral_opinions() {
        let p = ap(2.0, 0.4, 0.3, 2.0);
        let state = OpinionState::zeros(3, 2);
        let u = DVector::from_row_slice(&[1.0, 0.5, 0.0]);
        let eye = DMatrix::identity(3, 3);
        let du = attention_field(&state, &u, &p, &eye).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(du[i], -u[i] + 0.3, epsilon = 1e-12);
        }
    }

    #[test]
    fn two_option_matches_general_form() {
        let p = ap(2.0, 0.4, 0.1, 1.5);
        let x = DVector::from_row_slice(&[0.4, -0.3, 0.9]);
        let u = DVector::from_row_slice(&[0.2, 0.2, 0.2]);
        let mut a = DMatrix::zeros(3, 3);
        a[(0, 1)] = 1.0;
        a[(1, 0)] = 1.0;
        a[(1, 2)] = 1.0;
        a[(2, 1)] = 1.0;
        let percep = p.perception_matrix(&a);
        let du2 = attention_field_two_option(&x, &u, &p, &percep).unwrap();
        let lifted = OpinionState::lift_two_option(x.as_slice());
        let dug = attention_field(&lifted, &u, &p, &percep).unwrap();
        // (1/2)((abar x)^2 + (abar(-x))^2) = (abar x)^2
        assert!((du2 - dug).amax() < 1e-14);
    }

    #[test]
    fn perception_default_adds_identity() {
        let p = ap(2.0, 0.4, 0.0, 1.0);
        let mut a = DMatrix::zeros(2, 2);
        a[(0, 1)] = 3.0;
        a[(1, 0)] = 3.0;
        let m = p.perception_matrix(&a);
        assert_eq!(m[(0, 0)], 1.0);
        assert_eq!(m[(0, 1)], 3.0);
    }

    fn cp(sigma: i8) -> CouplingFeedbackParams {
        CouplingFeedbackParams::new(
            sigma,
            100.0,
            100.0,
            2.0,
            1.0,
            10.0,
            10.0,
            [vec![0, 1, 2], vec![3, 4, 5, 6]],
        )
        .unwrap()
    }

    #[test]
    fn gains_decay_when_a_cluster_is_neutral() {
        let p = cp(1);
        let (dg, dd) = coupling_field(0.7, -0.2, 0.0, 1.3, &p, 1);
        assert_abs_diff_eq!(dg, -0.7 / 100.0, epsilon = 1e-15);
        assert_abs_diff_eq!(dd, 0.2 / 100.0, epsilon = 1e-15);
    }

    #[test]
    fn cooperation_locks_in_for_positive_sigma() {
        let p = cp(1);
        // strongly active clusters: targets saturate at +gamma_f / -delta_f
        let (dg, dd) = coupling_field(2.0, -1.0, 3.0, 2.5, &p, 1);
        assert_abs_diff_eq!(dg, 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(dd, 0.0, epsilon = 1e-6);
        // and from neutral gains the drive points toward them
        let (dg, dd) = coupling_field(0.0, 0.0, 3.0, 2.5, &p, 1);
        assert!(dg > 0.0 && dd < 0.0);
    }

    #[test]
    fn competition_locks_in_for_negative_sigma() {
        let p = cp(-1);
        let (dg, dd) = coupling_field(0.0, 0.0, 2.0, -2.0, &p, -1);
        assert!(dg < 0.0 && dd > 0.0);
    }

    #[test]
    fn partition_validation() {
        let p = cp(1);
        assert!(p.validate_partition(7).is_ok());
        assert!(p.validate_partition(8).is_err());
        assert!(p.validate_partition(6).is_err());
    }

    #[test]
    fn cascade_bracket_must_straddle() {
        use crate::graph::{AdjacencySpec, GraphKind};
        use crate::model::{HomogeneousRegime, TwoOptionParams};

        let graph = AdjacencySpec::build(GraphKind::Path, 5, 1.0).unwrap();
        let regime = HomogeneousRegime::new(graph.clone(), 1.0, 0.0, 2.0, 0.0, 1.0, 0.0).unwrap();
        let params = TwoOptionParams::homogeneous(&regime).unwrap();
        let summary = graph.spectral_extrema().unwrap();
        let w = summary.w_max.clone().unwrap();
        let u_star = 1.0 / (2.0 + summary.lambda_max);
        let ap_params = AttentionParams::new(10.0, 3.0, 0.2, u_star - 0.01, u_star + 0.3).unwrap();

        // a direction orthogonal to the centrality vector at moderate
        // magnitude never cascades, so neither endpoint does: refusal
        let mut rng = crate::sampling::rng_from_seed(4);
        let ortho = crate::sampling::unit_orthogonal_to(&mut rng, &w).unwrap();
        let probe = CascadeProbe {
            direction: ortho,
            bracket: (0.001, 0.01),
            resolution: 1e-3,
            t_end: 60.0,
            dt: 0.05,
            strong_threshold: 0.3,
        };
        let err = estimate_cascade_threshold(&params, &ap_params, graph.entries(), &probe)
            .unwrap_err();
        assert!(matches!(err, CoreError::HypothesisViolated(_)), "{err}");

        // asymmetric adjacency is refused up front
        let mut asym = graph.entries().clone();
        asym[(0, 1)] = 2.0;
        let probe = CascadeProbe {
            direction: w.clone(),
            bracket: (0.0, 0.2),
            resolution: 1e-3,
            t_end: 60.0,
            dt: 0.05,
            strong_threshold: 0.3,
        };
        assert!(estimate_cascade_threshold(&params, &ap_params, &asym, &probe).is_err());
    }

    #[test]
    fn attention_stays_in_its_band_along_trajectories() {
        use crate::dynamics::{integrate, InputSchedule, System, TwoOptionSystem};
        use crate::graph::{AdjacencySpec, GraphKind};
        use crate::model::{HomogeneousRegime, TwoOptionParams};
        use nalgebra::DVector;

        let graph = AdjacencySpec::build(GraphKind::Path, 5, 1.0).unwrap();
        let regime = HomogeneousRegime::new(graph.clone(), 1.0, 0.0, 2.0, 0.0, 1.0, 0.0).unwrap();
        let params = TwoOptionParams::homogeneous(&regime)
            .unwrap()
            .with_inputs(DVector::from_element(5, 0.3))
            .unwrap();
        let ap_params = AttentionParams::new(5.0, 3.0, 0.1, 0.2, 0.8).unwrap();
        let sys = System::TwoOption(TwoOptionSystem::with_attention(
            params,
            ap_params.clone(),
            graph.entries(),
        ));
        // start below the floor: the reachable band is [u(0), u_high]
        let mut y0 = DVector::zeros(10);
        for i in 0..5 {
            y0[5 + i] = 0.05;
        }
        let traj = integrate(&sys, y0, &InputSchedule::empty(), 80.0, 0.01).unwrap();
        for idx in 0..traj.len() {
            let u = traj.attention_at(idx).unwrap();
            for &ui in u {
                assert!(ui >= 0.05 - 1e-9 && ui <= ap_params.u_high + 1e-9);
            }
        }
        // the drive saturates strictly below the ceiling
        let final_u = traj.attention_at(traj.last_index()).unwrap();
        assert!(final_u.iter().all(|&u| u < ap_params.u_high));
    }
}
