//! Adjacency-tensor generalization: heterogeneous gains per
//! (agent, agent, option, option) quadruple.
//!
//! The four-gain parameterization is the special case where the tensor is
//! constant across option pairs; `from_params` builds that specialization
//! and the field evaluation mirrors the parametric loop term for term, so
//! the two paths agree bit for bit.

use nalgebra::{DMatrix, DVector};

use crate::error::{CoreError, Result};
use crate::model::{project_rows, ModelParams, OpinionState};
use crate::saturation::SaturationSpec;

/// Gains `entry(i, k, j, l)`: influence of agent k's opinion about option l
/// on agent i's opinion about option j.
#[derive(Debug, Clone)]
pub struct AdjacencyTensor {
    data: Vec<f64>,
    n_agents: usize,
    n_options: usize,
}

impl AdjacencyTensor {
    pub fn zeros(n_agents: usize, n_options: usize) -> Self {
        Self {
            data: vec![0.0; n_agents * n_agents * n_options * n_options],
            n_agents,
            n_options,
        }
    }

    /// Specialization of the four-gain model:
    /// same agent/same option -> alpha, other agent/same option -> gamma,
    /// same agent/other option -> beta, other agent/other option -> delta.
    pub fn from_params(p: &ModelParams) -> Self {
        let n = p.n_agents();
        let no = p.n_options();
        let mut t = Self::zeros(n, no);
        for i in 0..n {
            for k in 0..n {
                for j in 0..no {
                    for l in 0..no {
                        let gain = if j == l {
                            if i == k {
                                p.alpha[i]
                            } else {
                                p.gamma[(i, k)]
                            }
                        } else if i == k {
                            p.beta[i]
                        } else {
                            p.delta[(i, k)]
                        };
                        *t.get_mut(i, k, j, l) = gain;
                    }
                }
            }
        }
        t
    }

    #[inline]
    fn idx(&self, i: usize, k: usize, j: usize, l: usize) -> usize {
        ((i * self.n_agents + k) * self.n_options + j) * self.n_options + l
    }

    #[inline]
    pub fn get(&self, i: usize, k: usize, j: usize, l: usize) -> f64 {
        self.data[self.idx(i, k, j, l)]
    }

    #[inline]
    pub fn get_mut(&mut self, i: usize, k: usize, j: usize, l: usize) -> &mut f64 {
        let idx = self.idx(i, k, j, l);
        &mut self.data[idx]
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn n_options(&self) -> usize {
        self.n_options
    }
}

/// Generalized field: same-option channels run through `s1`, inter-option
/// channels through `s2`; projection applied last.
#[allow(clippy::too_many_arguments)]
pub fn vector_field_tensor(
    state: &OpinionState,
    tensor: &AdjacencyTensor,
    d: &DVector<f64>,
    u: &DVector<f64>,
    b: &DMatrix<f64>,
    s1: &SaturationSpec,
    s2: &SaturationSpec,
) -> Result<DMatrix<f64>> {
    let n = tensor.n_agents();
    let no = tensor.n_options();
    if state.n_agents() != n || state.n_options() != no {
        return Err(CoreError::DimensionMismatch(
            "state shape does not match tensor".into(),
        ));
    }
    if d.len() != n || u.len() != n || b.nrows() != n || b.ncols() != no {
        return Err(CoreError::DimensionMismatch(
            "d, u, b shapes must match the tensor".into(),
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
                    arg += tensor.get(i, k, j, l) * z[(k, l)];
                }
                social += if l == j { s1.eval(arg) } else { s2.eval(arg) };
            }
            out[(i, j)] = -d[i] * z[(i, j)] + b[(i, j)] + u[i] * social;
        }
    }
    project_rows(&mut out);
    Ok(out)
}
