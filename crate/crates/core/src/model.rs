//! Opinion states, model parameters and the vector fields.
//!
//! An agent's opinion over `n_options` options is a zero-sum row vector;
//! the full state stacks one row per agent. The general field applies
//! saturations to weighted opinion exchanges and projects each agent's
//! derivative back onto the zero-sum subspace, so the state space is
//! forward invariant.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::error::{CoreError, Result};
use crate::graph::AdjacencySpec;
use crate::saturation::{OddSaturation, SaturationSpec};

/// Tolerance on row sums accepted by [`OpinionState::new`].
pub const ROW_SUM_TOL: f64 = 1e-9;

/// Stacked zero-sum opinion rows, one per agent.
#[derive(Debug, Clone, PartialEq)]
pub struct OpinionState {
    z: DMatrix<f64>,
}

impl OpinionState {
    /// Validates that every row sums to zero within [`ROW_SUM_TOL`].
    pub fn new(z: DMatrix<f64>) -> Result<Self> {
        if z.ncols() < 2 {
            return Err(CoreError::InvalidParameter(
                "opinion state needs at least two options".into(),
            ));
        }
        for i in 0..z.nrows() {
            let s: f64 = z.row(i).sum();
            if s.abs() > ROW_SUM_TOL {
                return Err(CoreError::InvalidParameter(format!(
                    "row {i} sums to {s:e}, expected 0 within {ROW_SUM_TOL:e}"
                )));
            }
        }
        Ok(Self { z })
    }

    /// Projects every row onto the zero-sum subspace, then wraps it.
    pub fn project(mut z: DMatrix<f64>) -> Result<Self> {
        if z.ncols() < 2 {
            return Err(CoreError::InvalidParameter(
                "opinion state needs at least two options".into(),
            ));
        }
        project_rows(&mut z);
        Ok(Self { z })
    }

    pub fn zeros(n_agents: usize, n_options: usize) -> Self {
        Self {
            z: DMatrix::zeros(n_agents, n_options),
        }
    }

    /// Embeds a two-option scalar state: agent `i` becomes `(x_i, -x_i)`.
    pub fn lift_two_option(x: &[f64]) -> Self {
        let mut z = DMatrix::zeros(x.len(), 2);
        for (i, &xi) in x.iter().enumerate() {
            z[(i, 0)] = xi;
            z[(i, 1)] = -xi;
        }
        Self { z }
    }

    pub fn n_agents(&self) -> usize {
        self.z.nrows()
    }

    pub fn n_options(&self) -> usize {
        self.z.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.z
    }

    /// Euclidean norm of the per-agent opinion vector.
    pub fn agent_norm(&self, i: usize) -> f64 {
        self.z.row(i).norm()
    }

    pub fn norm(&self) -> f64 {
        self.z.norm()
    }

    pub fn max_row_sum(&self) -> f64 {
        (0..self.z.nrows())
            .map(|i| self.z.row(i).sum().abs())
            .fold(0.0, f64::max)
    }
}

/// Subtracts the mean from a vector: the projection onto the zero-sum
/// subspace. Idempotent and annihilates constants.
pub fn project_tangent(v: &[f64]) -> Vec<f64> {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| x - mean).collect()
}

pub(crate) fn project_rows(z: &mut DMatrix<f64>) {
    let no = z.ncols() as f64;
    for i in 0..z.nrows() {
        let mean = z.row(i).sum() / no;
        for j in 0..z.ncols() {
            z[(i, j)] -= mean;
        }
    }
}

/// Full parameter set of the multi-option model.
///
/// Inputs are projected at construction (only relative inputs matter); the
/// raw values are retained for reporting.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub d: DVector<f64>,
    pub u: DVector<f64>,
    pub alpha: DVector<f64>,
    pub beta: DVector<f64>,
    pub gamma: DMatrix<f64>,
    pub delta: DMatrix<f64>,
    b: DMatrix<f64>,
    b_raw: DMatrix<f64>,
    pub s1: SaturationSpec,
    pub s2: SaturationSpec,
    n_options: usize,
}

impl ModelParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        d: DVector<f64>,
        u: DVector<f64>,
        alpha: DVector<f64>,
        beta: DVector<f64>,
        gamma: DMatrix<f64>,
        delta: DMatrix<f64>,
        b_raw: DMatrix<f64>,
        s1: SaturationSpec,
        s2: SaturationSpec,
    ) -> Result<Self> {
        let n = d.len();
        let n_options = b_raw.ncols();
        if n_options < 2 {
            return Err(CoreError::InvalidParameter(
                "the model needs at least two options (a single option has a trivial state space)"
                    .into(),
            ));
        }
        if u.len() != n || alpha.len() != n || beta.len() != n {
            return Err(CoreError::DimensionMismatch(
                "per-agent parameter arrays must have equal length".into(),
            ));
        }
        if gamma.nrows() != n || gamma.ncols() != n || delta.nrows() != n || delta.ncols() != n {
            return Err(CoreError::DimensionMismatch(
                "gain matrices must be n_agents x n_agents".into(),
            ));
        }
        if b_raw.nrows() != n {
            return Err(CoreError::DimensionMismatch(
                "input matrix must have one row per agent".into(),
            ));
        }
        if d.iter().any(|&x| !(x > 0.0)) {
            return Err(CoreError::InvalidParameter(
                "resistance d must be positive for every agent".into(),
            ));
        }
        if u.iter().any(|&x| !(x >= 0.0)) {
            return Err(CoreError::InvalidParameter(
                "attention u must be nonnegative for every agent".into(),
            ));
        }
        for i in 0..n {
            if gamma[(i, i)] != 0.0 || delta[(i, i)] != 0.0 {
                return Err(CoreError::InvalidParameter(
                    "gain matrices must have zero diagonal; self-gains live in alpha/beta".into(),
                ));
            }
        }
        let mut b = b_raw.clone();
        project_rows(&mut b);
        Ok(Self {
            d,
            u,
            alpha,
            beta,
            gamma,
            delta,
            b,
            b_raw,
            s1,
            s2,
            n_options,
        })
    }

    /// Minimal homogeneous parameterization: scalar gains on a shared graph,
    /// `Gamma = gamma * A`, `Delta = delta * A`, zero inputs.
    pub fn homogeneous(
        regime: &HomogeneousRegime,
        n_options: usize,
        s1: SaturationSpec,
        s2: SaturationSpec,
    ) -> Result<Self> {
        let n = regime.graph.n_agents();
        let a = regime.graph.entries();
        Self::new(
            DVector::from_element(n, regime.d),
            DVector::from_element(n, regime.u),
            DVector::from_element(n, regime.alpha),
            DVector::from_element(n, regime.beta),
            a * regime.gamma,
            a * regime.delta,
            DMatrix::zeros(n, n_options),
            s1,
            s2,
        )
    }

    pub fn n_agents(&self) -> usize {
        self.d.len()
    }

    pub fn n_options(&self) -> usize {
        self.n_options
    }

    /// The projected (relative) inputs actually used by the field.
    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.b
    }

    /// Inputs as supplied, before projection.
    pub fn raw_inputs(&self) -> &DMatrix<f64> {
        &self.b_raw
    }

    /// Replaces the inputs, projecting the raw values.
    pub fn with_inputs(&self, b_raw: DMatrix<f64>) -> Result<Self> {
        if b_raw.nrows() != self.n_agents() || b_raw.ncols() != self.n_options {
            return Err(CoreError::DimensionMismatch(
                "replacement inputs must match the model shape".into(),
            ));
        }
        let mut out = self.clone();
        let mut b = b_raw.clone();
        project_rows(&mut b);
        out.b = b;
        out.b_raw = b_raw;
        Ok(out)
    }

    /// Replaces the attention vector (used by the coupled feedback system).
    pub fn with_attention(&self, u: DVector<f64>) -> Result<Self> {
        if u.len() != self.n_agents() {
            return Err(CoreError::DimensionMismatch(
                "attention vector must have one entry per agent".into(),
            ));
        }
        let mut out = self.clone();
        out.u = u;
        Ok(out)
    }

    /// True when d, u, alpha, beta are each constant across agents.
    pub fn is_homogeneous(&self) -> bool {
        let all_eq = |v: &DVector<f64>| v.iter().all(|&x| x == v[0]);
        all_eq(&self.d) && all_eq(&self.u) && all_eq(&self.alpha) && all_eq(&self.beta)
    }

    /// Bound on the non-resistance part of the field, used by the
    /// boundedness certificate.
    pub fn coupling_bound(&self) -> f64 {
        let k1 = self.s1.k1().max(self.s1.k2());
        let k2 = self.s2.k1().max(self.s2.k2());
        let mut r = 0.0f64;
        for i in 0..self.n_agents() {
            let bmax = self.b.row(i).amax();
            let c = bmax + self.u[i] * (k1 + (self.n_options as f64 - 1.0) * k2);
            r = r.max(c);
        }
        r
    }
}

/// Radius of the forward-invariant ball: trajectories never leave
/// `max(norm(Z(0)), radius)` (plus numerical slack).
pub fn boundedness_radius(p: &ModelParams) -> f64 {
    let dmin = p.d.min();
    p.n_agents() as f64 * p.n_options() as f64 * p.coupling_bound() / dmin
}

/// Scalar parameters of the homogeneous regime on a shared graph.
#[derive(Debug, Clone)]
pub struct HomogeneousRegime {
    pub graph: AdjacencySpec,
    pub d: f64,
    pub u: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl HomogeneousRegime {
    pub fn new(
        graph: AdjacencySpec,
        d: f64,
        u: f64,
        alpha: f64,
        beta: f64,
        gamma: f64,
        delta: f64,
    ) -> Result<Self> {
        if !(d > 0.0) {
            return Err(CoreError::InvalidParameter("d must be positive".into()));
        }
        if !(u >= 0.0) {
            return Err(CoreError::InvalidParameter("u must be nonnegative".into()));
        }
        Ok(Self {
            graph,
            d,
            u,
            alpha,
            beta,
            gamma,
            delta,
        })
    }
}

/// Right-hand side of the general model. The projection is applied last,
/// so every output row sums to zero.
pub fn vector_field(state: &OpinionState, p: &ModelParams) -> Result<DMatrix<f64>> {
    let n = p.n_agents();
    let no = p.n_options();
    if state.n_agents() != n || state.n_options() != no {
        return Err(CoreError::DimensionMismatch(format!(
            "state is {}x{}, parameters expect {}x{}",
            state.n_agents(),
            state.n_options(),
            n,
            no
        )));
    }
    let z = state.matrix();
    let mut out = DMatrix::zeros(n, no);
    for i in 0..n {
        for j in 0..no {
            // sum the saturated exchange terms option by option, with the
            // same-option channel in place, so the adjacency-tensor path
            // reproduces this loop exactly
            let mut social = 0.0;
            for l in 0..no {
                let mut arg = 0.0;
                if l == j {
                    for k in 0..n {
                        let gain = if k == i { p.alpha[i] } else { p.gamma[(i, k)] };
                        arg += gain * z[(k, l)];
                    }
                    social += p.s1.eval(arg);
                } else {
                    for k in 0..n {
                        let gain = if k == i { p.beta[i] } else { p.delta[(i, k)] };
                        arg += gain * z[(k, l)];
                    }
                    social += p.s2.eval(arg);
                }
            }
            out[(i, j)] = -p.d[i] * z[(i, j)] + p.b[(i, j)] + p.u[i] * social;
        }
    }
    project_rows(&mut out);
    Ok(out)
}

/// Linear reference dynamics: the same structure with the saturations
/// replaced by the identity. Used for side-by-side comparisons with
/// weighted-average consensus models.
pub fn linear_vector_field(state: &OpinionState, p: &ModelParams) -> Result<DMatrix<f64>> {
    let n = p.n_agents();
    let no = p.n_options();
    if state.n_agents() != n || state.n_options() != no {
        return Err(CoreError::DimensionMismatch(
            "state shape does not match parameters".into(),
        ));
    }
    let z = state.matrix();
    let mut out = DMatrix::zeros(n, no);
    for i in 0..n {
        for j in 0..no {
            let mut social = 0.0;
            for l in 0..no {
                let mut arg = 0.0;
                for k in 0..n {
                    let gain = if l == j {
                        if k == i {
                            p.alpha[i]
                        } else {
                            p.gamma[(i, k)]
                        }
                    } else if k == i {
                        p.beta[i]
                    } else {
                        p.delta[(i, k)]
                    };
                    arg += gain * z[(k, l)];
                }
                social += arg;
            }
            out[(i, j)] = -p.d[i] * z[(i, j)] + p.b[(i, j)] + p.u[i] * social;
        }
    }
    project_rows(&mut out);
    Ok(out)
}

/// Parameters of the scalar two-option reduction `x_i = z_i1 = -z_i2`.
#[derive(Debug, Clone)]
pub struct TwoOptionParams {
    pub d: DVector<f64>,
    pub u: DVector<f64>,
    pub alpha: DVector<f64>,
    pub beta: DVector<f64>,
    pub gamma: DMatrix<f64>,
    pub delta: DMatrix<f64>,
    pub b: DVector<f64>,
    pub s1: OddSaturation,
    pub s2: OddSaturation,
}

impl TwoOptionParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        d: DVector<f64>,
        u: DVector<f64>,
        alpha: DVector<f64>,
        beta: DVector<f64>,
        gamma: DMatrix<f64>,
        delta: DMatrix<f64>,
        b: DVector<f64>,
        s1: OddSaturation,
        s2: OddSaturation,
    ) -> Result<Self> {
        let n = d.len();
        if [u.len(), alpha.len(), beta.len(), b.len()] != [n, n, n, n] {
            return Err(CoreError::DimensionMismatch(
                "per-agent arrays must have equal length".into(),
            ));
        }
        if gamma.nrows() != n || gamma.ncols() != n || delta.nrows() != n || delta.ncols() != n {
            return Err(CoreError::DimensionMismatch(
                "gain matrices must be n_agents x n_agents".into(),
            ));
        }
        if d.iter().any(|&x| !(x > 0.0)) {
            return Err(CoreError::InvalidParameter("d must be positive".into()));
        }
        if u.iter().any(|&x| !(x >= 0.0)) {
            return Err(CoreError::InvalidParameter("u must be nonnegative".into()));
        }
        Ok(Self {
            d,
            u,
            alpha,
            beta,
            gamma,
            delta,
            b,
            s1,
            s2,
        })
    }

    /// Homogeneous two-option shortcut on a graph, with tanh saturations.
    pub fn homogeneous(regime: &HomogeneousRegime) -> Result<Self> {
        let n = regime.graph.n_agents();
        let a = regime.graph.entries();
        Self::new(
            DVector::from_element(n, regime.d),
            DVector::from_element(n, regime.u),
            DVector::from_element(n, regime.alpha),
            DVector::from_element(n, regime.beta),
            a * regime.gamma,
            a * regime.delta,
            DVector::zeros(n),
            OddSaturation::tanh(),
            OddSaturation::tanh(),
        )
    }

    pub fn n_agents(&self) -> usize {
        self.d.len()
    }

    pub fn with_inputs(&self, b: DVector<f64>) -> Result<Self> {
        if b.len() != self.n_agents() {
            return Err(CoreError::DimensionMismatch(
                "inputs must have one entry per agent".into(),
            ));
        }
        let mut out = self.clone();
        out.b = b;
        Ok(out)
    }

    /// Lifts to the full two-option model with the same gains; inputs become
    /// `(b_i, -b_i)` and the saturations are the stored odd ones.
    pub fn lift(&self) -> Result<ModelParams> {
        let n = self.n_agents();
        let mut b = DMatrix::zeros(n, 2);
        for i in 0..n {
            b[(i, 0)] = self.b[i];
            b[(i, 1)] = -self.b[i];
        }
        ModelParams::new(
            self.d.clone(),
            self.u.clone(),
            self.alpha.clone(),
            self.beta.clone(),
            self.gamma.clone(),
            self.delta.clone(),
            b,
            self.s1.spec().clone(),
            self.s2.spec().clone(),
        )
    }
}

/// Slice-based core of the two-option dynamics, shared by the public entry
/// points and the integrator's hot loop. `u`, `gamma`, `delta` can differ
/// from the stored parameters when feedback dynamics drive them.
#[allow(clippy::too_many_arguments)]
pub(crate) fn two_option_rhs_into(
    x: &[f64],
    p: &TwoOptionParams,
    u: &[f64],
    gamma: &DMatrix<f64>,
    delta: &DMatrix<f64>,
    linear: bool,
    out: &mut [f64],
) {
    let n = x.len();
    for i in 0..n {
        let mut same = p.alpha[i] * x[i];
        let mut cross = p.beta[i] * x[i];
        for k in 0..n {
            if k != i {
                same += gamma[(i, k)] * x[k];
                cross += delta[(i, k)] * x[k];
            }
        }
        let social = if linear {
            same - cross
        } else {
            p.s1.eval(same) - p.s2.eval(cross)
        };
        out[i] = -p.d[i] * x[i] + u[i] * social + p.b[i];
    }
}

/// Scalar two-option dynamics. With `beta = delta = 0` the second
/// saturation channel contributes nothing.
pub fn vector_field_two_option(x: &DVector<f64>, p: &TwoOptionParams) -> DVector<f64> {
    let n = p.n_agents();
    assert_eq!(x.len(), n, "state length must match agent count");
    let mut out = DVector::zeros(n);
    two_option_rhs_into(
        x.as_slice(),
        p,
        p.u.as_slice(),
        &p.gamma,
        &p.delta,
        false,
        out.as_mut_slice(),
    );
    out
}

/// Linear (unsaturated) counterpart of the two-option dynamics.
pub fn linear_field_two_option(x: &DVector<f64>, p: &TwoOptionParams) -> DVector<f64> {
    let n = p.n_agents();
    assert_eq!(x.len(), n);
    let mut out = DVector::zeros(n);
    two_option_rhs_into(
        x.as_slice(),
        p,
        p.u.as_slice(),
        &p.gamma,
        &p.delta,
        true,
        out.as_mut_slice(),
    );
    out
}

/// General field with the attention vector supplied externally (the coupled
/// opinion-attention system evolves `u` as state).
pub fn vector_field_with_attention(
    state: &OpinionState,
    p: &ModelParams,
    u: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    if u.len() != p.n_agents() {
        return Err(CoreError::DimensionMismatch(
            "attention vector length must match the agent count".into(),
        ));
    }
    let swapped = p.clone().with_attention(u.clone())?;
    vector_field(state, &swapped)
}

/// Analytic Jacobian of the projected field at the neutral point, valid in
/// the homogeneous regime with zero inputs:
/// `J = ((-d + u (alpha - beta)) I + u (Gamma - Delta)) (x) P0`.
#[derive(Debug, Clone)]
pub struct OriginJacobian {
    /// Full `(n*no) x (n*no)` matrix, rows/cols indexed agent-major.
    pub matrix: DMatrix<f64>,
    /// Eigenvalues of the agent-space factor; each appears with
    /// multiplicity `n_options - 1` on the zero-sum subspace.
    pub xi: Vec<Complex<f64>>,
    pub n_agents: usize,
    pub n_options: usize,
}

impl OriginJacobian {
    /// Largest real part over the spectrum restricted to the zero-sum
    /// subspace (the projected-out zero directions are excluded).
    pub fn max_real_part_on_v(&self) -> f64 {
        self.xi.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn jacobian_at_origin(p: &ModelParams) -> Result<OriginJacobian> {
    if !p.is_homogeneous() {
        return Err(CoreError::HypothesisViolated(
            "the origin Jacobian formula needs homogeneous d, u, alpha, beta".into(),
        ));
    }
    if p.inputs().amax() != 0.0 {
        return Err(CoreError::HypothesisViolated(
            "the origin Jacobian formula needs zero relative inputs".into(),
        ));
    }
    let n = p.n_agents();
    let no = p.n_options();
    let (d, u, alpha, beta) = (p.d[0], p.u[0], p.alpha[0], p.beta[0]);

    let mut m = (&p.gamma - &p.delta) * u;
    for i in 0..n {
        m[(i, i)] += -d + u * (alpha - beta);
    }

    let xi: Vec<Complex<f64>> = crate::linalg::all_eigenvalues(&m)?;

    // P0 = I - (1/no) 1 1^T
    let inv = 1.0 / no as f64;
    let mut jac = DMatrix::zeros(n * no, n * no);
    for i in 0..n {
        for k in 0..n {
            let mik = m[(i, k)];
            if mik == 0.0 {
                continue;
            }
            for j in 0..no {
                for l in 0..no {
                    let p0 = if j == l { 1.0 - inv } else { -inv };
                    jac[(i * no + j, k * no + l)] = mik * p0;
                }
            }
        }
    }
    Ok(OriginJacobian {
        matrix: jac,
        xi,
        n_agents: n,
        n_options: no,
    })
}

/// Affine map onto the product of simplices: rows sum to `r` and entries
/// stay in `[0, r]` whenever `|z_ij| <= big_r`.
pub fn simplex_map(state: &OpinionState, r: f64, big_r: f64) -> DMatrix<f64> {
    let no = state.n_options() as f64;
    let scale = r / (no * big_r);
    let shift = r / no;
    state.matrix().map(|z| scale * z + shift)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphKind;
    use approx::assert_abs_diff_eq;

    fn simple_params(n: usize, no: usize, u: f64) -> ModelParams {
        let graph = AdjacencySpec::build(GraphKind::AllToAll, n, 1.0).unwrap();
        let regime = HomogeneousRegime::new(graph, 1.0, u, 0.2, 0.1, 0.2, -0.1).unwrap();
        ModelParams::homogeneous(
            &regime,
            no,
            SaturationSpec::default_general(),
            SaturationSpec::default_general(),
        )
        .unwrap()
    }

    #[test]
    fn project_tangent_examples() {
        assert_eq!(project_tangent(&[1.0, 1.0, 1.0]), vec![0.0, 0.0, 0.0]);
        assert_eq!(project_tangent(&[1.0, -1.0]), vec![1.0, -1.0]);
        assert_eq!(project_tangent(&[2.0, 0.0, 1.0]), vec![1.0, -1.0, 0.0]);
        // idempotent
        let once = project_tangent(&[0.3, -1.2, 2.0]);
        assert_eq!(project_tangent(&once), once);
    }

    #[test]
    fn state_validation() {
        let bad = DMatrix::from_row_slice(1, 2, &[0.2, 0.2]);
        assert!(OpinionState::new(bad.clone()).is_err());
        let fixed = OpinionState::project(bad).unwrap();
        assert_abs_diff_eq!(fixed.matrix()[(0, 0)], 0.2 - 0.2, epsilon = 1e-15);
        assert!(OpinionState::new(DMatrix::zeros(3, 1)).is_err());
    }

    #[test]
    fn neutral_point_is_equilibrium_iff_no_relative_input() {
        let p = simple_params(3, 3, 0.7);
        let zero = OpinionState::zeros(3, 3);
        let f = vector_field(&zero, &p).unwrap();
        assert_eq!(f.norm(), 0.0, "no inputs: the neutral field is exactly zero");

        // a pure average input is annihilated
        let flat = p
            .with_inputs(DMatrix::from_element(3, 3, 0.4))
            .unwrap();
        assert_eq!(vector_field(&zero, &flat).unwrap().norm(), 0.0);

        // a relative input moves the field off zero
        let mut b = DMatrix::zeros(3, 3);
        b[(0, 0)] = 0.5;
        let biased = p.with_inputs(b).unwrap();
        assert!(vector_field(&zero, &biased).unwrap().norm() > 0.0);
    }

    #[test]
    fn single_agent_equilibrium_at_projected_input() {
        // one agent, two options, u = 0, d = 1: the field vanishes at z = b
        let p = ModelParams::new(
            DVector::from_element(1, 1.0),
            DVector::from_element(1, 0.0),
            DVector::from_element(1, 0.0),
            DVector::from_element(1, 0.0),
            DMatrix::zeros(1, 1),
            DMatrix::zeros(1, 1),
            DMatrix::from_row_slice(1, 2, &[0.5, -0.5]),
            SaturationSpec::odd_tanh(),
            SaturationSpec::odd_tanh(),
        )
        .unwrap();
        let eq = OpinionState::new(DMatrix::from_row_slice(1, 2, &[0.5, -0.5])).unwrap();
        let f = vector_field(&eq, &p).unwrap();
        assert!(f.norm() < 1e-15);
    }

    #[test]
    fn input_shift_invariance() {
        let p = simple_params(4, 3, 0.5);
        let mut b = DMatrix::zeros(4, 3);
        b[(0, 0)] = 0.3;
        b[(2, 1)] = -0.8;
        let p1 = p.with_inputs(b.clone()).unwrap();
        // add a different constant to each agent's inputs
        for i in 0..4 {
            for j in 0..3 {
                b[(i, j)] += 0.7 * (i as f64 + 1.0);
            }
        }
        let p2 = p.with_inputs(b).unwrap();
        let state = OpinionState::project(DMatrix::from_fn(4, 3, |i, j| {
            ((i * 3 + j) as f64 * 0.37).sin()
        }))
        .unwrap();
        let f1 = vector_field(&state, &p1).unwrap();
        let f2 = vector_field(&state, &p2).unwrap();
        assert!((f1 - f2).amax() < 1e-13);
    }

    #[test]
    fn rows_of_field_sum_to_zero() {
        let p = simple_params(5, 4, 1.3);
        let state = OpinionState::project(DMatrix::from_fn(5, 4, |i, j| {
            (1.7 * i as f64 - 0.9 * j as f64).cos()
        }))
        .unwrap();
        let f = vector_field(&state, &p).unwrap();
        for i in 0..5 {
            assert!(f.row(i).sum().abs() < 1e-14);
        }
    }

    #[test]
    fn two_option_embedding_matches_general_model() {
        let graph = AdjacencySpec::build(GraphKind::Path, 4, 1.0).unwrap();
        let regime = HomogeneousRegime::new(graph, 1.0, 0.8, 0.5, -0.3, -1.0, 0.4).unwrap();
        let mut p2 = TwoOptionParams::homogeneous(&regime).unwrap();
        p2 = p2
            .with_inputs(DVector::from_row_slice(&[0.2, 0.0, -0.1, 0.05]))
            .unwrap();
        let lifted = p2.lift().unwrap();

        let x = DVector::from_row_slice(&[0.4, -0.2, 0.7, -0.9]);
        let dx = vector_field_two_option(&x, &p2);
        let z = OpinionState::lift_two_option(x.as_slice());
        let dz = vector_field(&z, &lifted).unwrap();
        for i in 0..4 {
            assert_abs_diff_eq!(dz[(i, 0)], dx[i], epsilon = 1e-10);
            assert_abs_diff_eq!(dz[(i, 1)], -dx[i], epsilon = 1e-10);
        }
    }

    #[test]
    fn two_option_neutral_without_inputs() {
        let graph = AdjacencySpec::build(GraphKind::Cycle, 5, 1.0).unwrap();
        let regime = HomogeneousRegime::new(graph, 1.0, 0.4, 0.0, 0.0, 1.0, 0.0).unwrap();
        let p = TwoOptionParams::homogeneous(&regime).unwrap();
        let dx = vector_field_two_option(&DVector::zeros(5), &p);
        assert_eq!(dx.norm(), 0.0);
    }

    #[test]
    fn origin_jacobian_matches_finite_differences() {
        let p = simple_params(3, 3, 0.6);
        let jac = jacobian_at_origin(&p).unwrap();
        let n = 3;
        let no = 3;
        let h = 1e-6;
        for k in 0..n {
            for l in 0..no {
                let mut plus = DMatrix::zeros(n, no);
                plus[(k, l)] = h;
                let mut minus = DMatrix::zeros(n, no);
                minus[(k, l)] = -h;
                // perturbations off the zero-sum subspace are fine: the field
                // extends smoothly and the formula covers the full space
                let fp = vector_field(&OpinionState { z: plus }, &p).unwrap();
                let fm = vector_field(&OpinionState { z: minus }, &p).unwrap();
                for i in 0..n {
                    for j in 0..no {
                        let fd = (fp[(i, j)] - fm[(i, j)]) / (2.0 * h);
                        let an = jac.matrix[(i * no + j, k * no + l)];
                        assert_abs_diff_eq!(fd, an, epsilon = 1e-5);
                    }
                }
            }
        }
    }

    #[test]
    fn origin_jacobian_pure_decay_when_u_zero() {
        let p = simple_params(4, 2, 0.0);
        let jac = jacobian_at_origin(&p).unwrap();
        for xi in &jac.xi {
            assert_abs_diff_eq!(xi.re, -1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(xi.im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn origin_jacobian_refuses_heterogeneous_or_biased() {
        let mut p = simple_params(3, 2, 0.5);
        p.d[1] = 2.0;
        assert!(jacobian_at_origin(&p).is_err());

        let p = simple_params(3, 2, 0.5);
        let mut b = DMatrix::zeros(3, 2);
        b[(0, 0)] = 0.1;
        let p = p.with_inputs(b).unwrap();
        assert!(jacobian_at_origin(&p).is_err());
    }

    #[test]
    fn simplex_map_lands_on_the_simplex() {
        let state = OpinionState::project(DMatrix::from_row_slice(
            2,
            3,
            &[0.9, -0.4, -0.5, -1.0, 0.3, 0.7],
        ))
        .unwrap();
        let y = simplex_map(&state, 1.0, 1.0);
        for i in 0..2 {
            assert_abs_diff_eq!(y.row(i).sum(), 1.0, epsilon = 1e-12);
            for j in 0..3 {
                assert!((0.0..=1.0).contains(&y[(i, j)]));
            }
        }
    }
}
