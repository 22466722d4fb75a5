//! Time integration of the opinion system and its feedback extensions,
//! equilibrium search, bifurcation sweeps, and the cluster-manifold
//! distance diagnostic.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::analysis::{classify_state, StateClassification};
use crate::error::{CoreError, Result};
use crate::feedback::{self, AttentionParams, CouplingFeedbackParams};
use crate::linalg::{fd_jacobian, svd_solve};
use crate::model::{
    self, project_rows, ModelParams, OpinionState, TwoOptionParams,
};

/// Early-exit predicate polled during integration.
pub type StopCondition<'a> = &'a dyn Fn(f64, &[f64]) -> bool;

/// Distance below which two equilibria are merged (max norm).
pub const EQUILIBRIUM_DEDUP: f64 = 1e-6;

/// Stability margin: an equilibrium is stable when every Jacobian eigenvalue
/// (restricted to the physical subspace) has real part below this.
pub const STABILITY_MARGIN: f64 = -1e-7;

/// Piecewise-constant input (and feedback-sign) schedule. Segment starts
/// are strictly increasing; the integrator aligns step boundaries to them.
#[derive(Debug, Clone, Default)]
pub struct InputSchedule {
    segments: Vec<ScheduleSegment>,
}

#[derive(Debug, Clone)]
pub struct ScheduleSegment {
    pub t_start: f64,
    pub inputs: Option<InputChange>,
    pub sigma: Option<i8>,
}

#[derive(Debug, Clone)]
pub enum InputChange {
    General(DMatrix<f64>),
    TwoOption(DVector<f64>),
}

impl InputSchedule {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(segments: Vec<ScheduleSegment>) -> Result<Self> {
        for w in segments.windows(2) {
            if w[1].t_start <= w[0].t_start {
                return Err(CoreError::InvalidParameter(
                    "schedule segment starts must be strictly increasing".into(),
                ));
            }
        }
        Ok(Self { segments })
    }

    pub fn segments(&self) -> &[ScheduleSegment] {
        &self.segments
    }
}

/// Flat-state layout descriptor: opinions first, then optional attention,
/// then optional per-agent coupling gains (gamma block then delta block).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateLayout {
    General {
        n_agents: usize,
        n_options: usize,
        attention: bool,
    },
    TwoOption {
        n_agents: usize,
        attention: bool,
        gains: bool,
    },
}

impl StateLayout {
    pub fn dim(&self) -> usize {
        match *self {
            StateLayout::General {
                n_agents,
                n_options,
                attention,
            } => n_agents * n_options + if attention { n_agents } else { 0 },
            StateLayout::TwoOption {
                n_agents,
                attention,
                gains,
            } => {
                n_agents
                    + if attention { n_agents } else { 0 }
                    + if gains { 2 * n_agents } else { 0 }
            }
        }
    }

    pub fn n_agents(&self) -> usize {
        match *self {
            StateLayout::General { n_agents, .. } => n_agents,
            StateLayout::TwoOption { n_agents, .. } => n_agents,
        }
    }

    pub fn has_attention(&self) -> bool {
        match *self {
            StateLayout::General { attention, .. } => attention,
            StateLayout::TwoOption { attention, .. } => attention,
        }
    }

    pub fn has_gains(&self) -> bool {
        matches!(*self, StateLayout::TwoOption { gains: true, .. })
    }

    /// Column labels for data export, matching the flat state order.
    pub fn labels(&self) -> Vec<String> {
        let mut out = Vec::new();
        match *self {
            StateLayout::General {
                n_agents,
                n_options,
                attention,
            } => {
                for i in 0..n_agents {
                    for j in 0..n_options {
                        out.push(format!("z_{}_{}", i + 1, j + 1));
                    }
                }
                if attention {
                    for i in 0..n_agents {
                        out.push(format!("u_{}", i + 1));
                    }
                }
            }
            StateLayout::TwoOption {
                n_agents,
                attention,
                gains,
            } => {
                for i in 0..n_agents {
                    out.push(format!("x_{}", i + 1));
                }
                if attention {
                    for i in 0..n_agents {
                        out.push(format!("u_{}", i + 1));
                    }
                }
                if gains {
                    for i in 0..n_agents {
                        out.push(format!("gamma_{}", i + 1));
                    }
                    for i in 0..n_agents {
                        out.push(format!("delta_{}", i + 1));
                    }
                }
            }
        }
        out
    }
}

/// A composed dynamical system: the opinion field plus optional attention
/// and coupling-gain feedback.
#[derive(Debug, Clone)]
pub enum System {
    General(GeneralSystem),
    TwoOption(TwoOptionSystem),
}

#[derive(Debug, Clone)]
pub struct GeneralSystem {
    pub params: ModelParams,
    attention: Option<(AttentionParams, DMatrix<f64>)>,
}

impl GeneralSystem {
    pub fn plain(params: ModelParams) -> Self {
        Self {
            params,
            attention: None,
        }
    }

    /// Attaches attention dynamics; `opinion_adjacency` seeds the default
    /// `A + I` perception matrix when the parameters do not override it.
    pub fn with_attention(
        params: ModelParams,
        ap: AttentionParams,
        opinion_adjacency: &DMatrix<f64>,
    ) -> Self {
        let percep = ap.perception_matrix(opinion_adjacency);
        Self {
            params,
            attention: Some((ap, percep)),
        }
    }

    pub fn attention(&self) -> Option<&AttentionParams> {
        self.attention.as_ref().map(|(ap, _)| ap)
    }
}

#[derive(Debug, Clone)]
pub struct TwoOptionSystem {
    pub params: TwoOptionParams,
    attention: Option<(AttentionParams, DMatrix<f64>)>,
    coupling: Option<CouplingFeedbackParams>,
    pub linear: bool,
}

impl TwoOptionSystem {
    pub fn plain(params: TwoOptionParams) -> Self {
        Self {
            params,
            attention: None,
            coupling: None,
            linear: false,
        }
    }

    pub fn linear(params: TwoOptionParams) -> Self {
        Self {
            params,
            attention: None,
            coupling: None,
            linear: true,
        }
    }

    pub fn with_attention(
        params: TwoOptionParams,
        ap: AttentionParams,
        opinion_adjacency: &DMatrix<f64>,
    ) -> Self {
        let percep = ap.perception_matrix(opinion_adjacency);
        Self {
            params,
            attention: Some((ap, percep)),
            coupling: None,
            linear: false,
        }
    }

    pub fn with_feedback(
        params: TwoOptionParams,
        ap: AttentionParams,
        opinion_adjacency: &DMatrix<f64>,
        coupling: CouplingFeedbackParams,
    ) -> Result<Self> {
        coupling.validate_partition(params.n_agents())?;
        let percep = ap.perception_matrix(opinion_adjacency);
        Ok(Self {
            params,
            attention: Some((ap, percep)),
            coupling: Some(coupling),
            linear: false,
        })
    }

    pub fn attention(&self) -> Option<&AttentionParams> {
        self.attention.as_ref().map(|(ap, _)| ap)
    }

    pub fn coupling(&self) -> Option<&CouplingFeedbackParams> {
        self.coupling.as_ref()
    }
}

impl System {
    pub fn layout(&self) -> StateLayout {
        match self {
            System::General(s) => StateLayout::General {
                n_agents: s.params.n_agents(),
                n_options: s.params.n_options(),
                attention: s.attention.is_some(),
            },
            System::TwoOption(s) => StateLayout::TwoOption {
                n_agents: s.params.n_agents(),
                attention: s.attention.is_some(),
                gains: s.coupling.is_some(),
            },
        }
    }

    pub fn dim(&self) -> usize {
        self.layout().dim()
    }

    fn apply_input_change(&mut self, change: &InputChange) -> Result<()> {
        match (self, change) {
            (System::General(s), InputChange::General(b)) => {
                s.params = s.params.with_inputs(b.clone())?;
                Ok(())
            }
            (System::TwoOption(s), InputChange::TwoOption(b)) => {
                s.params = s.params.with_inputs(b.clone())?;
                Ok(())
            }
            _ => Err(CoreError::DimensionMismatch(
                "schedule input shape does not match the system kind".into(),
            )),
        }
    }

    /// Writes the time derivative of the flat state into `out`.
    pub fn eval_into(&self, y: &[f64], sigma: i8, out: &mut [f64]) -> Result<()> {
        debug_assert_eq!(y.len(), self.dim());
        debug_assert_eq!(out.len(), self.dim());
        match self {
            System::General(s) => {
                let n = s.params.n_agents();
                let no = s.params.n_options();
                let z = DMatrix::from_row_slice(n, no, &y[..n * no]);
                let state = OpinionState::project(z)?;
                let dz = match &s.attention {
                    None => model::vector_field(&state, &s.params)?,
                    Some((ap, percep)) => {
                        let u = DVector::from_column_slice(&y[n * no..n * no + n]);
                        let dz = model::vector_field_with_attention(&state, &s.params, &u)?;
                        let du = feedback::attention_field(&state, &u, ap, percep)?;
                        out[n * no..n * no + n].copy_from_slice(du.as_slice());
                        dz
                    }
                };
                for i in 0..n {
                    for j in 0..no {
                        out[i * no + j] = dz[(i, j)];
                    }
                }
                Ok(())
            }
            System::TwoOption(s) => {
                let n = s.params.n_agents();
                let x = &y[..n];
                let u_slice: &[f64] = match &s.attention {
                    Some(_) => &y[n..2 * n],
                    None => s.params.u.as_slice(),
                };

                match &s.coupling {
                    None => {
                        model::two_option_rhs_into(
                            x,
                            &s.params,
                            u_slice,
                            &s.params.gamma,
                            &s.params.delta,
                            s.linear,
                            &mut out[..n],
                        );
                    }
                    Some(cp) => {
                        let base = if s.attention.is_some() { 2 * n } else { n };
                        let gamma_state = &y[base..base + n];
                        let delta_state = &y[base + n..base + 2 * n];
                        // agent i's inter-cluster gains follow its dynamic
                        // gamma_i / delta_i entries; intra-cluster gains stay
                        // at their static values
                        let mut gamma_eff = s.params.gamma.clone();
                        let mut delta_eff = s.params.delta.clone();
                        for (p_idx, cluster) in cp.partition.iter().enumerate() {
                            let other = &cp.partition[1 - p_idx];
                            for &i in cluster {
                                for &k in other {
                                    gamma_eff[(i, k)] = gamma_state[i];
                                    delta_eff[(i, k)] = delta_state[i];
                                }
                            }
                        }
                        model::two_option_rhs_into(
                            x,
                            &s.params,
                            u_slice,
                            &gamma_eff,
                            &delta_eff,
                            s.linear,
                            &mut out[..n],
                        );
                        let mean = |cluster: &[usize]| {
                            cluster.iter().map(|&i| x[i]).sum::<f64>() / cluster.len() as f64
                        };
                        let xhat1 = mean(&cp.partition[0]);
                        let xhat2 = mean(&cp.partition[1]);
                        for i in 0..n {
                            let (dg, dd) = feedback::coupling_field(
                                gamma_state[i],
                                delta_state[i],
                                xhat1,
                                xhat2,
                                cp,
                                sigma,
                            );
                            out[base + i] = dg;
                            out[base + n + i] = dd;
                        }
                    }
                }

                if let Some((ap, percep)) = &s.attention {
                    feedback::attention_rhs_two_option_into(
                        x,
                        u_slice,
                        ap,
                        percep,
                        &mut out[n..2 * n],
                    )?;
                }
                Ok(())
            }
        }
    }

    /// Convenience wrapper returning a fresh vector.
    pub fn eval(&self, y: &DVector<f64>, sigma: i8) -> Result<DVector<f64>> {
        let mut out = DVector::zeros(self.dim());
        self.eval_into(y.as_slice(), sigma, out.as_mut_slice())?;
        Ok(out)
    }

    /// Re-projects the opinion rows of a flat state onto the zero-sum
    /// subspace (no-op for the two-option reduction).
    fn renormalize(&self, y: &mut [f64]) {
        if let System::General(s) = self {
            let n = s.params.n_agents();
            let no = s.params.n_options();
            let mut z = DMatrix::from_row_slice(n, no, &y[..n * no]);
            project_rows(&mut z);
            for i in 0..n {
                for j in 0..no {
                    y[i * no + j] = z[(i, j)];
                }
            }
        }
    }

    fn initial_sigma(&self) -> i8 {
        match self {
            System::TwoOption(s) => s.coupling.as_ref().map(|c| c.sigma).unwrap_or(1),
            System::General(_) => 1,
        }
    }
}

/// Time-stamped snapshots of the composed state with event annotations.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub layout: StateLayout,
    pub events: Vec<(f64, String)>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Opinion part of snapshot `idx` as a state matrix; the two-option
    /// reduction is lifted to its (x, -x) embedding.
    pub fn opinion_state(&self, idx: usize) -> OpinionState {
        let y = &self.states[idx];
        match self.layout {
            StateLayout::General {
                n_agents,
                n_options,
                ..
            } => OpinionState::project(DMatrix::from_row_slice(
                n_agents,
                n_options,
                &y.as_slice()[..n_agents * n_options],
            ))
            .expect("stored snapshots satisfy the state invariants"),
            StateLayout::TwoOption { n_agents, .. } => {
                OpinionState::lift_two_option(&y.as_slice()[..n_agents])
            }
        }
    }

    pub fn opinions_at(&self, idx: usize) -> &[f64] {
        let y = &self.states[idx];
        match self.layout {
            StateLayout::General {
                n_agents,
                n_options,
                ..
            } => &y.as_slice()[..n_agents * n_options],
            StateLayout::TwoOption { n_agents, .. } => &y.as_slice()[..n_agents],
        }
    }

    pub fn attention_at(&self, idx: usize) -> Option<&[f64]> {
        if !self.layout.has_attention() {
            return None;
        }
        let n = self.layout.n_agents();
        let y = &self.states[idx];
        let base = match self.layout {
            StateLayout::General { n_options, .. } => n * n_options,
            StateLayout::TwoOption { .. } => n,
        };
        Some(&y.as_slice()[base..base + n])
    }

    pub fn gains_at(&self, idx: usize) -> Option<(&[f64], &[f64])> {
        if !self.layout.has_gains() {
            return None;
        }
        let n = self.layout.n_agents();
        let base = if self.layout.has_attention() { 2 * n } else { n };
        let y = self.states[idx].as_slice();
        Some((&y[base..base + n], &y[base + n..base + 2 * n]))
    }

    /// Index of the first snapshot at or after time `t`.
    pub fn index_at_time(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s < t - 1e-12)
    }

    pub fn last_index(&self) -> usize {
        self.times.len() - 1
    }
}

/// Classical fixed-step fourth-order integration of the composed system.
///
/// Step boundaries are aligned to schedule segment starts, so a snapshot
/// exists exactly at every event time; opinion rows are re-projected after
/// each step. A non-finite state aborts with the last finite time.
pub fn integrate(
    system: &System,
    y0: DVector<f64>,
    schedule: &InputSchedule,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    integrate_with_observer(system, y0, schedule, t_end, dt, true, None).map(|(traj, _)| traj)
}

/// Integration without trajectory storage; returns the final state. The
/// optional `stop` predicate is polled at every recorded step and ends the
/// run early when it returns true (used by Monte-Carlo cascade studies).
pub fn integrate_terminal(
    system: &System,
    y0: DVector<f64>,
    schedule: &InputSchedule,
    t_end: f64,
    dt: f64,
    stop: Option<StopCondition<'_>>,
) -> Result<(f64, DVector<f64>)> {
    let (traj, last) = integrate_with_observer(system, y0, schedule, t_end, dt, false, stop)?;
    let _ = traj;
    Ok(last)
}

#[allow(clippy::too_many_arguments)]
fn integrate_with_observer(
    system: &System,
    y0: DVector<f64>,
    schedule: &InputSchedule,
    t_end: f64,
    dt: f64,
    record: bool,
    stop: Option<StopCondition<'_>>,
) -> Result<(Trajectory, (f64, DVector<f64>))> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(CoreError::InvalidParameter("dt must be positive".into()));
    }
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(CoreError::InvalidParameter("t_end must be positive".into()));
    }
    let dim = system.dim();
    if y0.len() != dim {
        return Err(CoreError::DimensionMismatch(format!(
            "initial state has length {}, system expects {dim}",
            y0.len()
        )));
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::InvalidParameter(
            "initial state must be finite".into(),
        ));
    }

    let mut sys = system.clone();
    let mut sigma = sys.initial_sigma();
    let mut events: Vec<(f64, String)> = Vec::new();

    // segment boundaries inside (0, t_end)
    let mut boundaries: Vec<(f64, &ScheduleSegment)> = Vec::new();
    for seg in schedule.segments() {
        if seg.t_start <= 0.0 {
            // applies from the start
            if let Some(change) = &seg.inputs {
                sys.apply_input_change(change)?;
            }
            if let Some(s) = seg.sigma {
                sigma = s;
            }
            continue;
        }
        if seg.t_start < t_end {
            boundaries.push((seg.t_start, seg));
        }
    }

    let mut y = y0;
    sys.renormalize(y.as_mut_slice());
    let mut t = 0.0;

    let mut times = Vec::new();
    let mut states = Vec::new();
    if record {
        times.push(t);
        states.push(y.clone());
    }

    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut work = vec![0.0; dim];

    let mut segment_ends: Vec<f64> = boundaries.iter().map(|(t, _)| *t).collect();
    segment_ends.push(t_end);
    let mut boundary_iter = boundaries.into_iter();

    let mut stopped = false;
    for seg_end in segment_ends {
        if stopped {
            break;
        }
        while t < seg_end - 1e-12 {
            let h = dt.min(seg_end - t);
            rk4_step(&sys, sigma, &y, h, &mut k1, &mut k2, &mut k3, &mut k4, &mut work)?;
            for (yi, wi) in y.iter_mut().zip(work.iter()) {
                *yi = *wi;
            }
            sys.renormalize(y.as_mut_slice());
            t += h;
            if y.iter().any(|v| !v.is_finite()) {
                return Err(CoreError::IntegrationAborted {
                    t_last: t - h,
                    reason: "state became non-finite".into(),
                });
            }
            if record {
                times.push(t);
                states.push(y.clone());
            }
            if let Some(pred) = stop {
                if pred(t, y.as_slice()) {
                    stopped = true;
                    break;
                }
            }
        }
        if stopped {
            break;
        }
        // apply the event that starts at seg_end, if any
        if let Some((t_event, seg)) = boundary_iter.next() {
            t = t_event;
            if let Some(change) = &seg.inputs {
                sys.apply_input_change(change)?;
                events.push((t_event, "input_switch".into()));
            }
            if let Some(s) = seg.sigma {
                sigma = s;
                events.push((t_event, "sigma_flip".into()));
            }
        }
    }

    let traj = Trajectory {
        times,
        states,
        layout: system.layout(),
        events,
    };
    Ok((traj, (t, y)))
}

#[allow(clippy::too_many_arguments)]
fn rk4_step(
    sys: &System,
    sigma: i8,
    y: &DVector<f64>,
    h: f64,
    k1: &mut [f64],
    k2: &mut [f64],
    k3: &mut [f64],
    k4: &mut [f64],
    work: &mut [f64],
) -> Result<()> {
    let ys = y.as_slice();
    let dim = ys.len();

    sys.eval_into(ys, sigma, k1)?;
    for i in 0..dim {
        work[i] = ys[i] + 0.5 * h * k1[i];
    }
    sys.eval_into(work, sigma, k2)?;
    for i in 0..dim {
        work[i] = ys[i] + 0.5 * h * k2[i];
    }
    sys.eval_into(work, sigma, k3)?;
    for i in 0..dim {
        work[i] = ys[i] + h * k3[i];
    }
    sys.eval_into(work, sigma, k4)?;
    for i in 0..dim {
        work[i] = ys[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(())
}

/// Result of an equilibrium search.
#[derive(Debug, Clone)]
pub struct EquilibriumReport {
    pub state: DVector<f64>,
    pub layout: StateLayout,
    pub residual: f64,
    pub converged: bool,
    pub classification: Option<StateClassification>,
}

/// Damped Newton iteration on the composed field with a finite-difference
/// Jacobian, falling back to long integration when Newton stalls. The
/// residual of the best iterate is reported either way.
pub fn find_equilibrium(system: &System, guess: DVector<f64>, tol: f64) -> Result<EquilibriumReport> {
    if !(tol > 0.0) {
        return Err(CoreError::InvalidParameter(
            "equilibrium tolerance must be positive".into(),
        ));
    }
    let sigma = system.initial_sigma();
    let mut best = guess.clone();
    let mut best_norm = system.eval(&best, sigma)?.norm();

    let mut tried_fallback = false;
    loop {
        let (state, norm) = newton_polish(system, sigma, best.clone(), tol, 60)?;
        if norm < best_norm {
            best = state;
            best_norm = norm;
        }
        if best_norm < tol || tried_fallback {
            break;
        }
        // fall back once: relax toward an attractor, then polish again
        tried_fallback = true;
        if let Ok((_, settled)) = integrate_terminal(
            system,
            best.clone(),
            &InputSchedule::empty(),
            200.0,
            0.01,
            None,
        ) {
            let norm = system.eval(&settled, sigma)?.norm();
            if norm < best_norm {
                best = settled;
                best_norm = norm;
            }
        }
    }

    let converged = best_norm < tol;
    let classification = classify_snapshot(system, &best);
    Ok(EquilibriumReport {
        state: best,
        layout: system.layout(),
        residual: best_norm,
        converged,
        classification,
    })
}

fn classify_snapshot(system: &System, y: &DVector<f64>) -> Option<StateClassification> {
    let state = match system {
        System::General(s) => {
            let n = s.params.n_agents();
            let no = s.params.n_options();
            OpinionState::project(DMatrix::from_row_slice(n, no, &y.as_slice()[..n * no])).ok()?
        }
        System::TwoOption(s) => {
            OpinionState::lift_two_option(&y.as_slice()[..s.params.n_agents()])
        }
    };
    let u_scale = match system {
        System::General(s) => s
            .attention()
            .map(|ap| ap.u_high)
            .unwrap_or_else(|| s.params.u.max()),
        System::TwoOption(s) => s
            .attention()
            .map(|ap| ap.u_high)
            .unwrap_or_else(|| s.params.u.max()),
    };
    let strong = crate::analysis::default_strong_threshold(1.0, u_scale);
    classify_state(&state, strong, 1e-3).ok()
}

fn newton_polish(
    system: &System,
    sigma: i8,
    mut y: DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<(DVector<f64>, f64)> {
    let f = |v: &DVector<f64>| system.eval(v, sigma).expect("field evaluation");
    let mut fy = f(&y);
    let mut norm = fy.norm();
    for _ in 0..max_iter {
        if norm < tol {
            break;
        }
        let jac = fd_jacobian(f, &y, 1e-6);
        let rhs = -&fy;
        let Some(step) = svd_solve(&jac, &rhs, 1e-12) else {
            break;
        };
        // backtracking line search
        let mut lambda = 1.0;
        let mut improved = false;
        while lambda > 1.0 / 128.0 {
            let cand = &y + &step * lambda;
            let fc = f(&cand);
            let cn = fc.norm();
            if cn < norm {
                y = cand;
                fy = fc;
                norm = cn;
                improved = true;
                break;
            }
            lambda *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Ok((y, norm))
}

/// One point of a bifurcation sweep.
#[derive(Debug, Clone)]
pub struct BranchPoint {
    pub u: f64,
    pub equilibria: Vec<Equilibrium>,
}

#[derive(Debug, Clone)]
pub struct Equilibrium {
    pub x: DVector<f64>,
    pub stable: bool,
    /// Projection of the equilibrium onto the supplied direction.
    pub projection: f64,
    pub residual: f64,
}

/// Forward-simulation sweep over the attention parameter: for each grid
/// value, converge from every seed, deduplicate, and flag stability via the
/// Jacobian spectrum. Runs grid points in parallel, merged in grid order.
pub fn sweep_bifurcation(
    params: &TwoOptionParams,
    u_grid: &[f64],
    seeds: &[DVector<f64>],
    projection: &DVector<f64>,
) -> Result<Vec<BranchPoint>> {
    if u_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CoreError::InvalidParameter(
            "the u grid must be sorted strictly increasing".into(),
        ));
    }
    let points: Vec<Result<BranchPoint>> = u_grid
        .par_iter()
        .map(|&u| {
            let mut p = params.clone();
            p.u = DVector::from_element(p.n_agents(), u);
            let system = System::TwoOption(TwoOptionSystem::plain(p.clone()));
            let mut found: Vec<Equilibrium> = Vec::new();
            for seed in seeds {
                let report = find_equilibrium(&system, seed.clone(), 1e-10)?;
                if !report.converged {
                    continue;
                }
                let x = report.state;
                if found
                    .iter()
                    .any(|e| (&e.x - &x).amax() < EQUILIBRIUM_DEDUP)
                {
                    continue;
                }
                let f = |v: &DVector<f64>| model::vector_field_two_option(v, &p);
                let jac = fd_jacobian(f, &x, 1e-6);
                let eigs = crate::linalg::all_eigenvalues(&jac)?;
                let stable = eigs.iter().all(|e| e.re < STABILITY_MARGIN);
                let projection_value = projection.dot(&x);
                found.push(Equilibrium {
                    x,
                    stable,
                    projection: projection_value,
                    residual: report.residual,
                });
            }
            found.sort_by(|a, b| a.projection.partial_cmp(&b.projection).unwrap());
            Ok(BranchPoint { u, equilibria: found })
        })
        .collect();
    points.into_iter().collect()
}

/// Square root of the pairwise within-cluster spread
/// `V = sum_p (1/2) sum_{i,k in I_p} sum_j (z_ij - z_kj)^2`,
/// the Lyapunov distance to the cluster-synchronization manifold.
pub fn distance_to_cluster_manifold(
    state: &OpinionState,
    partition: &[Vec<usize>],
) -> Result<f64> {
    let n = state.n_agents();
    let mut seen = vec![false; n];
    for cluster in partition {
        for &i in cluster {
            if i >= n {
                return Err(CoreError::InvalidParameter(format!(
                    "partition index {i} out of range for {n} agents"
                )));
            }
            if seen[i] {
                return Err(CoreError::InvalidParameter(format!(
                    "agent {i} appears in more than one cluster"
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
    let z = state.matrix();
    let mut total = 0.0;
    for cluster in partition {
        for &i in cluster {
            for &k in cluster {
                for j in 0..state.n_options() {
                    let diff = z[(i, j)] - z[(k, j)];
                    total += 0.5 * diff * diff;
                }
            }
        }
    }
    Ok(total.sqrt())
}
