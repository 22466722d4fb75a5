//! Scenario configuration: a single TOML document describing the graph,
//! model parameters, optional feedback blocks, initial conditions, input
//! schedule and integration settings. Unknown fields are rejected.

use anyhow::{anyhow, bail, Context, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use opinionlab_core::analysis::critical_attention;
use opinionlab_core::dynamics::{
    GeneralSystem, InputChange, InputSchedule, ScheduleSegment, System, TwoOptionSystem,
};
use opinionlab_core::feedback::{AttentionParams, CouplingFeedbackParams};
use opinionlab_core::graph::{AdjacencySpec, GraphKind};
use opinionlab_core::model::{HomogeneousRegime, ModelParams, OpinionState, TwoOptionParams};
use opinionlab_core::sampling;
use opinionlab_core::saturation::{OddSaturation, SaturationFamily, SaturationSpec};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default)]
    pub seed: u64,
    pub graph: GraphConfig,
    pub model: ModelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attention: Option<AttentionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<CouplingConfig>,
    #[serde(default)]
    pub init: InitConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub schedule: Vec<ScheduleEntry>,
    #[serde(default)]
    pub integration: IntegrationConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbations: Option<PerturbationConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphConfig {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default = "default_weight")]
    pub weight: f64,
    /// Row-major rows of an explicit matrix (kind = "custom").
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
}

fn default_weight() -> f64 {
    1.0
}

/// A scalar applied to every agent, or one value per agent.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerAgent {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl PerAgent {
    pub fn resolve(&self, n: usize, what: &str) -> Result<DVector<f64>> {
        match self {
            PerAgent::Scalar(v) => Ok(DVector::from_element(n, *v)),
            PerAgent::Vector(vs) => {
                if vs.len() != n {
                    bail!("`{what}` has {} entries, expected {n}", vs.len());
                }
                Ok(DVector::from_row_slice(vs))
            }
        }
    }

    fn scalar(&self) -> Option<f64> {
        match self {
            PerAgent::Scalar(v) => Some(*v),
            PerAgent::Vector(vs) => {
                let first = *vs.first()?;
                vs.iter().all(|&v| v == first).then_some(first)
            }
        }
    }
}

/// Inputs: one scalar per agent (two-option reduction) or one row per agent
/// (general model).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InputSpec {
    PerAgent(Vec<f64>),
    Rows(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "default_options")]
    pub n_options: usize,
    /// "two_option" (scalar reduction) or "general"; defaults to the
    /// reduction when n_options = 2.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub representation: Option<String>,
    pub d: PerAgent,
    pub u: PerAgent,
    #[serde(default = "default_zero")]
    pub alpha: PerAgent,
    #[serde(default = "default_zero")]
    pub beta: PerAgent,
    /// Homogeneous gains scale the graph: `Gamma = gamma * A`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Explicit gain matrices override the scalar form.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_matrix: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_matrix: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<InputSpec>,
    /// Replace the saturations with the identity (reference linear model).
    #[serde(default)]
    pub linear: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub saturation1: Option<SaturationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub saturation2: Option<SaturationConfig>,
}

fn default_options() -> usize {
    2
}

fn default_zero() -> PerAgent {
    PerAgent::Scalar(0.0)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaturationConfig {
    pub family: String,
    #[serde(default = "default_weight")]
    pub k1: f64,
    #[serde(default = "default_weight")]
    pub k2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<(f64, f64)>>,
}

impl SaturationConfig {
    pub fn build(&self) -> Result<SaturationSpec> {
        let family = match self.family.as_str() {
            "odd_tanh" => SaturationFamily::OddTanh,
            "asymmetric_logistic" => SaturationFamily::AsymmetricLogistic,
            "custom_table" => SaturationFamily::CustomTable(
                self.table
                    .clone()
                    .ok_or_else(|| anyhow!("custom_table saturation needs a `table`"))?,
            ),
            other => bail!("unknown saturation family `{other}`"),
        };
        Ok(SaturationSpec::new(family, self.k1, self.k2)?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttentionConfig {
    pub tau_u: f64,
    pub n_hill: f64,
    pub y_th: f64,
    /// Absolute bounds, or offsets relative to the scenario's critical
    /// attention (resolved at build time).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_low: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_high: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_low_offset: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_high_offset: Option<f64>,
    /// "a_plus_i" (default), "ones", or an explicit matrix.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adjacency: Option<AttentionAdjacency>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u0: Option<PerAgent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u0_random: Option<RandomSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttentionAdjacency {
    Named(String),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    pub sigma: i8,
    pub tau_gamma: f64,
    pub tau_delta: f64,
    pub gamma_f: f64,
    pub delta_f: f64,
    pub g_gamma: f64,
    pub g_delta: f64,
    pub partition: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma0: Option<PerAgent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma0_random: Option<RandomSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta0: Option<PerAgent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta0_random: Option<RandomSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "dist", deny_unknown_fields)]
pub enum RandomSpec {
    #[serde(rename = "uniform")]
    Uniform { low: f64, high: f64 },
    #[serde(rename = "normal")]
    Normal { mean: f64, sd: f64 },
}

impl RandomSpec {
    fn sample(&self, rng: &mut rand::rngs::StdRng, n: usize) -> Result<DVector<f64>> {
        Ok(match self {
            RandomSpec::Uniform { low, high } => sampling::uniform_vector(rng, n, *low, *high)?,
            RandomSpec::Normal { mean, sd } => sampling::normal_vector(rng, n, *mean, *sd)?,
        })
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitConfig {
    /// Two-option scalar opinions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    /// General opinion rows (projected on load).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z0: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random: Option<RandomSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleEntry {
    pub t: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<InputSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<i8>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationConfig {
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_record")]
    pub record_every: usize,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        Self {
            t_end: default_t_end(),
            dt: default_dt(),
            record_every: default_record(),
        }
    }
}

fn default_t_end() -> f64 {
    100.0
}

fn default_dt() -> f64 {
    0.01
}

fn default_record() -> usize {
    1
}

/// Per-agent additive normal perturbations applied to selected parameters,
/// drawn from the scenario seed.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationConfig {
    #[serde(default)]
    pub d_sd: f64,
    #[serde(default)]
    pub alpha_sd: f64,
    #[serde(default)]
    pub beta_sd: f64,
    #[serde(default)]
    pub b_sd: f64,
}

/// A scenario resolved into core types, ready to integrate.
pub struct BuiltScenario {
    pub system: System,
    pub y0: DVector<f64>,
    pub schedule: InputSchedule,
    pub t_end: f64,
    pub dt: f64,
    pub record_every: usize,
    pub graph: AdjacencySpec,
    /// Present when the gains were given as scalars on the graph.
    pub homogeneous: Option<HomogeneousRegime>,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).context("invalid scenario document")
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).context("serializing scenario")
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text)
    }

    pub fn build_graph(&self) -> Result<AdjacencySpec> {
        let kind = GraphKind::parse(&self.graph.kind)?;
        if kind == GraphKind::Custom {
            let rows = self
                .graph
                .matrix
                .as_ref()
                .ok_or_else(|| anyhow!("custom graph needs a `matrix`"))?;
            let n = rows.len();
            if rows.iter().any(|r| r.len() != n) {
                bail!("graph matrix must be square");
            }
            let flat: Vec<f64> = rows.iter().flatten().copied().collect();
            Ok(AdjacencySpec::custom(DMatrix::from_row_slice(n, n, &flat))?)
        } else {
            let n = self
                .graph
                .n
                .ok_or_else(|| anyhow!("graph kind `{}` needs `n`", self.graph.kind))?;
            Ok(AdjacencySpec::build(kind, n, self.graph.weight)?)
        }
    }

    fn gain_matrices(&self, graph: &AdjacencySpec) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let n = graph.n_agents();
        let from_rows = |rows: &Vec<Vec<f64>>, what: &str| -> Result<DMatrix<f64>> {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                bail!("`{what}` must be a {n}x{n} matrix");
            }
            let flat: Vec<f64> = rows.iter().flatten().copied().collect();
            Ok(DMatrix::from_row_slice(n, n, &flat))
        };
        let gamma = match (&self.model.gamma_matrix, self.model.gamma) {
            (Some(rows), _) => from_rows(rows, "gamma_matrix")?,
            (None, Some(scale)) => graph.entries() * scale,
            (None, None) => DMatrix::zeros(n, n),
        };
        let delta = match (&self.model.delta_matrix, self.model.delta) {
            (Some(rows), _) => from_rows(rows, "delta_matrix")?,
            (None, Some(scale)) => graph.entries() * scale,
            (None, None) => DMatrix::zeros(n, n),
        };
        Ok((gamma, delta))
    }

    /// Homogeneous-regime view: available when scalar gains were supplied
    /// and the per-agent parameters are constant.
    pub fn homogeneous_regime(&self, graph: &AdjacencySpec) -> Option<HomogeneousRegime> {
        if self.model.gamma_matrix.is_some() || self.model.delta_matrix.is_some() {
            return None;
        }
        let d = self.model.d.scalar()?;
        let u = self.model.u.scalar()?;
        let alpha = self.model.alpha.scalar()?;
        let beta = self.model.beta.scalar()?;
        HomogeneousRegime::new(
            graph.clone(),
            d,
            u,
            alpha,
            beta,
            self.model.gamma.unwrap_or(0.0),
            self.model.delta.unwrap_or(0.0),
        )
        .ok()
    }

    fn is_two_option(&self) -> Result<bool> {
        match self.model.representation.as_deref() {
            Some("two_option") => {
                if self.model.n_options != 2 {
                    bail!("the two-option reduction needs n_options = 2");
                }
                Ok(true)
            }
            Some("general") => Ok(false),
            None => Ok(self.model.n_options == 2),
            Some(other) => bail!("unknown representation `{other}`"),
        }
    }

    fn saturations(&self, two_option: bool) -> Result<(SaturationSpec, SaturationSpec)> {
        let default = if two_option {
            SaturationSpec::odd_tanh()
        } else {
            SaturationSpec::default_general()
        };
        let s1 = match &self.model.saturation1 {
            Some(c) => c.build()?,
            None => default.clone(),
        };
        let s2 = match &self.model.saturation2 {
            Some(c) => c.build()?,
            None => s1.clone(),
        };
        Ok((s1, s2))
    }

    fn resolve_inputs_two_option(&self, spec: &InputSpec, n: usize) -> Result<DVector<f64>> {
        match spec {
            InputSpec::PerAgent(vs) => {
                if vs.len() != n {
                    bail!("inputs have {} entries, expected {n}", vs.len());
                }
                Ok(DVector::from_row_slice(vs))
            }
            InputSpec::Rows(rows) => {
                // accept (b, -b) rows and reduce to the scalar form
                if rows.len() != n || rows.iter().any(|r| r.len() != 2) {
                    bail!("two-option input rows must be {n} pairs");
                }
                Ok(DVector::from_fn(n, |i, _| {
                    0.5 * (rows[i][0] - rows[i][1])
                }))
            }
        }
    }

    fn resolve_inputs_general(&self, spec: &InputSpec, n: usize, no: usize) -> Result<DMatrix<f64>> {
        match spec {
            InputSpec::Rows(rows) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != no) {
                    bail!("input rows must be {n} rows of {no} entries");
                }
                let flat: Vec<f64> = rows.iter().flatten().copied().collect();
                Ok(DMatrix::from_row_slice(n, no, &flat))
            }
            InputSpec::PerAgent(vs) => {
                if no != 2 {
                    bail!("per-agent scalar inputs only make sense with two options");
                }
                if vs.len() != n {
                    bail!("inputs have {} entries, expected {n}", vs.len());
                }
                let mut b = DMatrix::zeros(n, 2);
                for (i, &v) in vs.iter().enumerate() {
                    b[(i, 0)] = v;
                    b[(i, 1)] = -v;
                }
                Ok(b)
            }
        }
    }

    fn attention_params(
        &self,
        cfg: &AttentionConfig,
        graph: &AdjacencySpec,
        u_star: Option<f64>,
    ) -> Result<AttentionParams> {
        let resolve_bound = |abs: Option<f64>, offset: Option<f64>, what: &str| -> Result<f64> {
            match (abs, offset) {
                (Some(v), None) => Ok(v),
                (None, Some(off)) => {
                    let base = u_star.ok_or_else(|| {
                        anyhow!(
                            "`{what}_offset` needs a computable critical attention \
                             (homogeneous scalar gains)"
                        )
                    })?;
                    Ok(base + off)
                }
                (Some(_), Some(_)) => bail!("give `{what}` or `{what}_offset`, not both"),
                (None, None) => bail!("attention block needs `{what}` or `{what}_offset`"),
            }
        };
        let u_low = resolve_bound(cfg.u_low, cfg.u_low_offset, "u_low")?;
        let u_high = resolve_bound(cfg.u_high, cfg.u_high_offset, "u_high")?;
        let mut ap = AttentionParams::new(cfg.tau_u, cfg.n_hill, cfg.y_th, u_low, u_high)?;
        if let Some(adj) = &cfg.adjacency {
            let n = graph.n_agents();
            let matrix = match adj {
                AttentionAdjacency::Named(name) => match name.as_str() {
                    "a_plus_i" => {
                        let mut m = graph.entries().clone();
                        for i in 0..n {
                            m[(i, i)] += 1.0;
                        }
                        m
                    }
                    "ones" => DMatrix::from_element(n, n, 1.0),
                    other => bail!("unknown attention adjacency `{other}`"),
                },
                AttentionAdjacency::Matrix(rows) => {
                    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                        bail!("attention adjacency must be {n}x{n}");
                    }
                    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
                    DMatrix::from_row_slice(n, n, &flat)
                }
            };
            ap = ap.with_adjacency(matrix);
        }
        Ok(ap)
    }

    /// Resolves the document into a runnable system, initial state and
    /// schedule. All randomness is drawn from the scenario seed in a fixed
    /// order, so builds are reproducible.
    pub fn build(&self) -> Result<BuiltScenario> {
        let graph = self.build_graph()?;
        let n = graph.n_agents();
        let two_option = self.is_two_option()?;
        let no = self.model.n_options;
        if no < 2 {
            bail!("n_options must be at least 2");
        }

        let mut rng = sampling::rng_from_seed(self.seed);

        let mut d = self.model.d.resolve(n, "d")?;
        let u = self.model.u.resolve(n, "u")?;
        let mut alpha = self.model.alpha.resolve(n, "alpha")?;
        let mut beta = self.model.beta.resolve(n, "beta")?;
        let (gamma, delta) = self.gain_matrices(&graph)?;

        // perturbations first, in a fixed order
        let mut b_jitter: Option<DVector<f64>> = None;
        if let Some(pert) = &self.perturbations {
            if pert.d_sd > 0.0 {
                d += sampling::normal_vector(&mut rng, n, 0.0, pert.d_sd)?;
            }
            if pert.alpha_sd > 0.0 {
                alpha += sampling::normal_vector(&mut rng, n, 0.0, pert.alpha_sd)?;
            }
            if pert.beta_sd > 0.0 {
                beta += sampling::normal_vector(&mut rng, n, 0.0, pert.beta_sd)?;
            }
            if pert.b_sd > 0.0 {
                b_jitter = Some(sampling::normal_vector(&mut rng, n, 0.0, pert.b_sd)?);
            }
        }

        let (s1, s2) = self.saturations(two_option)?;
        let homogeneous = self.homogeneous_regime(&graph);
        let u_star = homogeneous
            .as_ref()
            .and_then(|reg| critical_attention(reg).ok().map(|p| p.u_star));

        // initial opinions
        let x0_vec: DVector<f64>;
        let z0_mat: DMatrix<f64>;
        if two_option {
            x0_vec = match (&self.init.x0, &self.init.random) {
                (Some(vals), _) => {
                    if vals.len() != n {
                        bail!("x0 has {} entries, expected {n}", vals.len());
                    }
                    DVector::from_row_slice(vals)
                }
                (None, Some(spec)) => spec.sample(&mut rng, n)?,
                (None, None) => DVector::zeros(n),
            };
            z0_mat = DMatrix::zeros(0, 0);
        } else {
            z0_mat = match (&self.init.z0, &self.init.random) {
                (Some(rows), _) => {
                    if rows.len() != n || rows.iter().any(|r| r.len() != no) {
                        bail!("z0 must be {n} rows of {no} entries");
                    }
                    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
                    DMatrix::from_row_slice(n, no, &flat)
                }
                (None, Some(spec)) => {
                    let mut m = DMatrix::zeros(n, no);
                    for i in 0..n {
                        let row = spec.sample(&mut rng, no)?;
                        for j in 0..no {
                            m[(i, j)] = row[j];
                        }
                    }
                    m
                }
                (None, None) => DMatrix::zeros(n, no),
            };
            x0_vec = DVector::zeros(0);
        }

        // attention initial state
        let attention_cfg = self.attention.as_ref();
        let ap = attention_cfg
            .map(|cfg| self.attention_params(cfg, &graph, u_star))
            .transpose()?;
        let u0 = match (attention_cfg, &ap) {
            (Some(cfg), Some(params)) => Some(match (&cfg.u0, &cfg.u0_random) {
                (Some(spec), _) => spec.resolve(n, "u0")?,
                (None, Some(rand)) => rand.sample(&mut rng, n)?,
                (None, None) => DVector::from_element(n, params.u_low),
            }),
            _ => None,
        };

        // coupling gains initial state
        let coupling_cfg = self.coupling.as_ref();
        let (cp, gains0) = match coupling_cfg {
            None => (None, None),
            Some(cfg) => {
                if cfg.partition.len() != 2 {
                    bail!("coupling partition must have exactly two clusters");
                }
                let cp = CouplingFeedbackParams::new(
                    cfg.sigma,
                    cfg.tau_gamma,
                    cfg.tau_delta,
                    cfg.gamma_f,
                    cfg.delta_f,
                    cfg.g_gamma,
                    cfg.g_delta,
                    [cfg.partition[0].clone(), cfg.partition[1].clone()],
                )?;
                let gamma0 = match (&cfg.gamma0, &cfg.gamma0_random) {
                    (Some(spec), _) => spec.resolve(n, "gamma0")?,
                    (None, Some(rand)) => rand.sample(&mut rng, n)?,
                    (None, None) => DVector::zeros(n),
                };
                let delta0 = match (&cfg.delta0, &cfg.delta0_random) {
                    (Some(spec), _) => spec.resolve(n, "delta0")?,
                    (None, Some(rand)) => rand.sample(&mut rng, n)?,
                    (None, None) => DVector::zeros(n),
                };
                (Some(cp), Some((gamma0, delta0)))
            }
        };

        // assemble the system and flat initial state
        let (system, y0) = if two_option {
            let mut b = match &self.model.b {
                Some(spec) => self.resolve_inputs_two_option(spec, n)?,
                None => DVector::zeros(n),
            };
            if let Some(j) = &b_jitter {
                b += j;
            }
            let params = TwoOptionParams::new(
                d,
                u,
                alpha,
                beta,
                gamma,
                delta,
                b,
                OddSaturation::from_spec(s1),
                OddSaturation::from_spec(s2),
            )?;
            let sys = match (&ap, &cp) {
                (None, None) => {
                    if self.model.linear {
                        TwoOptionSystem::linear(params)
                    } else {
                        TwoOptionSystem::plain(params)
                    }
                }
                (Some(a), None) => {
                    if self.model.linear {
                        bail!("the linear reference model does not take feedback blocks");
                    }
                    TwoOptionSystem::with_attention(params, a.clone(), graph.entries())
                }
                (Some(a), Some(c)) => {
                    if self.model.linear {
                        bail!("the linear reference model does not take feedback blocks");
                    }
                    TwoOptionSystem::with_feedback(params, a.clone(), graph.entries(), c.clone())?
                }
                (None, Some(_)) => {
                    bail!("coupling feedback needs an attention block as well")
                }
            };
            let mut y0 = Vec::with_capacity(sysdim(&sys));
            y0.extend_from_slice(x0_vec.as_slice());
            if let Some(u0) = &u0 {
                y0.extend_from_slice(u0.as_slice());
            }
            if let Some((g0, dl0)) = &gains0 {
                y0.extend_from_slice(g0.as_slice());
                y0.extend_from_slice(dl0.as_slice());
            }
            (System::TwoOption(sys), DVector::from_vec(y0))
        } else {
            if cp.is_some() {
                bail!("coupling feedback is only wired to the two-option reduction");
            }
            if self.model.linear {
                bail!("the linear reference model is only wired to the two-option reduction");
            }
            let mut b = match &self.model.b {
                Some(spec) => self.resolve_inputs_general(spec, n, no)?,
                None => DMatrix::zeros(n, no),
            };
            if let Some(j) = &b_jitter {
                // a scalar jitter per agent lands on the first option and is
                // balanced on the rest by the projection
                for i in 0..n {
                    b[(i, 0)] += j[i];
                }
            }
            let params = ModelParams::new(d, u, alpha, beta, gamma, delta, b, s1, s2)?;
            let state = OpinionState::project(z0_mat)?;
            let sys = match &ap {
                None => GeneralSystem::plain(params),
                Some(a) => GeneralSystem::with_attention(params, a.clone(), graph.entries()),
            };
            let mut y0 = Vec::new();
            for i in 0..n {
                for j in 0..no {
                    y0.push(state.matrix()[(i, j)]);
                }
            }
            if let Some(u0) = &u0 {
                y0.extend_from_slice(u0.as_slice());
            }
            (System::General(sys), DVector::from_vec(y0))
        };

        // schedule
        let mut segments = Vec::new();
        for entry in &self.schedule {
            let inputs = match &entry.b {
                None => None,
                Some(spec) => Some(if two_option {
                    InputChange::TwoOption(self.resolve_inputs_two_option(spec, n)?)
                } else {
                    InputChange::General(self.resolve_inputs_general(spec, n, no)?)
                }),
            };
            segments.push(ScheduleSegment {
                t_start: entry.t,
                inputs,
                sigma: entry.sigma,
            });
        }
        let schedule = InputSchedule::new(segments)?;

        if self.integration.record_every == 0 {
            bail!("record_every must be at least 1");
        }

        Ok(BuiltScenario {
            system,
            y0,
            schedule,
            t_end: self.integration.t_end,
            dt: self.integration.dt,
            record_every: self.integration.record_every,
            graph,
            homogeneous,
            seed: self.seed,
        })
    }
}

fn sysdim(sys: &TwoOptionSystem) -> usize {
    let n = sys.params.n_agents();
    n + if sys.attention().is_some() { n } else { 0 }
        + if sys.coupling().is_some() { 2 * n } else { 0 }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 3
[graph]
kind = "path"
n = 3

[model]
d = 1.0
u = 0.5
alpha = 1.0
gamma = -1.0
b = [0.2, 0.0, -0.2]
"#;

    #[test]
    fn minimal_scenario_builds() {
        let cfg = ScenarioConfig::from_toml(MINIMAL).unwrap();
        let built = cfg.build().unwrap();
        assert_eq!(built.system.dim(), 3);
        assert!(built.homogeneous.is_some());
        assert_eq!(built.seed, 3);
    }

    #[test]
    fn unknown_fields_rejected() {
        let bad = format!("{MINIMAL}\nnot_a_field = 1\n");
        assert!(ScenarioConfig::from_toml(&bad).is_err());
        let bad = MINIMAL.replace("[model]", "[model]\nbogus = true");
        assert!(ScenarioConfig::from_toml(&bad).is_err());
    }

    #[test]
    fn roundtrips_through_toml() {
        let cfg = ScenarioConfig::from_toml(MINIMAL).unwrap();
        let text = cfg.to_toml().unwrap();
        let again = ScenarioConfig::from_toml(&text).unwrap();
        assert_eq!(again.seed, cfg.seed);
        assert_eq!(again.to_toml().unwrap(), text);
    }

    #[test]
    fn general_representation_and_offsets() {
        let doc = r#"
[graph]
kind = "all_to_all"
n = 4

[model]
n_options = 3
representation = "general"
d = 1.0
u = 0.5
alpha = 0.2
beta = 0.1
gamma = 0.2
delta = -0.1

[attention]
tau_u = 5.0
n_hill = 3.0
y_th = 0.1
u_low_offset = -0.3
u_high_offset = 0.3
"#;
        let cfg = ScenarioConfig::from_toml(doc).unwrap();
        let built = cfg.build().unwrap();
        // 4 agents x 3 options + 4 attentions
        assert_eq!(built.system.dim(), 16);
    }
}
