//! Experiment configuration file (JSON).

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use qkinlab::random::Sampler;
use qkinlab::vlasov::{lattice_hopping, on_site_interaction};
use qkinlab::{InteractionModel, ManyBodyOperator, OperatorSequence, C64};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub seed: u64,
    pub experiments: Vec<Experiment>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Identities,
    Observables,
    Kinetic,
    Vlasov,
    Gp,
    Meanfield,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Identities => "identities",
            Kind::Observables => "observables",
            Kind::Kinetic => "kinetic",
            Kind::Vlasov => "vlasov",
            Kind::Gp => "gp",
            Kind::Meanfield => "meanfield",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    pub name: String,
    pub kind: Kind,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default)]
    pub controls: Controls,
}

/// A matrix entry: a real number or `[re, im]`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

pub type Entries = Vec<Vec<Entry>>;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorSpec {
    Random,
    Zero,
    Hopping {
        #[serde(default = "yes")]
        periodic: bool,
    },
    OnSite {
        #[serde(default = "one")]
        strength: f64,
    },
    Entries {
        entries: Entries,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default = "two")]
    pub dim: usize,
    #[serde(default = "random_op")]
    pub kinetic: OperatorSpec,
    #[serde(default = "random_op")]
    pub pair: OperatorSpec,
    #[serde(default = "one")]
    pub epsilon: f64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self { dim: 2, kinetic: OperatorSpec::Random, pair: OperatorSpec::Random, epsilon: 1.0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    RandomDensity {
        #[serde(default = "tenth")]
        trace: f64,
    },
    RandomPure,
    Entries {
        entries: Entries,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum CorrelationSpec {
    Identity,
    Random {
        strength: f64,
    },
    /// `g_n = λ^{n−1} I` for `n ≥ 1`.
    Scalar {
        lambda: f64,
    },
    /// Explicit `g_n` by order; unspecified orders are the identity.
    Entries {
        components: BTreeMap<usize, Entries>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    #[serde(default = "default_state")]
    pub f1: StateSpec,
    #[serde(default = "identity_corr")]
    pub correlations: CorrelationSpec,
}

impl Default for InitialSpec {
    fn default() -> Self {
        Self { f1: default_state(), correlations: CorrelationSpec::Identity }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeUnit {
    Absolute,
    /// Times are fractions of the convergence radius `t₀`.
    T0,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Controls {
    #[serde(default = "default_times")]
    pub times: Vec<f64>,
    #[serde(default = "absolute")]
    pub time_unit: TimeUnit,
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    /// Series truncation.
    #[serde(default = "four")]
    pub n_trunc: usize,
    /// Largest particle number of observables and correlations.
    #[serde(default = "three")]
    pub n_max: usize,
    /// Marginal order for functionals, sweeps and hierarchies.
    #[serde(default = "two")]
    pub s: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "sixteen")]
    pub quadrature_nodes: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_ode_tol")]
    pub ode_tolerance: f64,
}

impl Default for Controls {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

fn yes() -> bool {
    true
}
fn one() -> f64 {
    1.0
}
fn tenth() -> f64 {
    0.1
}
fn two() -> usize {
    2
}
fn three() -> usize {
    3
}
fn four() -> usize {
    4
}
fn sixteen() -> usize {
    16
}
fn random_op() -> OperatorSpec {
    OperatorSpec::Random
}
fn default_state() -> StateSpec {
    StateSpec::RandomDensity { trace: 0.1 }
}
fn identity_corr() -> CorrelationSpec {
    CorrelationSpec::Identity
}
fn absolute() -> TimeUnit {
    TimeUnit::Absolute
}
fn default_times() -> Vec<f64> {
    vec![0.5, 1.0]
}
fn default_epsilons() -> Vec<f64> {
    vec![0.2, 0.1, 0.05]
}
fn default_dt() -> f64 {
    1e-3
}
fn default_tolerance() -> f64 {
    1e-6
}
fn default_ode_tol() -> f64 {
    1e-10
}

pub fn load(path: &Path) -> Result<Config, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("malformed config {}: {e}", path.display()))
}

/// Seed of the experiment at `index`.
pub fn experiment_seed(config: &Config, index: usize) -> u64 {
    config.seed.wrapping_add(index as u64)
}

fn matrix(entries: &Entries, dim: usize, n: usize) -> Result<ManyBodyOperator, String> {
    let side = dim.pow(n as u32);
    if entries.len() != side || entries.iter().any(|r| r.len() != side) {
        return Err(format!("expected a {side}x{side} matrix for {n} particle(s) of dimension {dim}"));
    }
    let m = DMatrix::from_fn(side, side, |r, c| match entries[r][c] {
        Entry::Real(x) => C64::new(x, 0.0),
        Entry::Complex([re, im]) => C64::new(re, im),
    });
    ManyBodyOperator::new(dim, (1..=n).collect(), m).map_err(|e| e.to_string())
}

/// Random presets draw from one sampler in a fixed order: kinetic, pair,
/// one-particle state, correlations, then experiment-specific data.
pub struct Built {
    pub model: InteractionModel,
    pub f1: ManyBodyOperator,
    pub correlations: OperatorSequence,
    pub sampler: Sampler,
}

fn operator(spec: &OperatorSpec, dim: usize, n: usize, s: &mut Sampler) -> Result<ManyBodyOperator, String> {
    match spec {
        OperatorSpec::Random if n == 1 => Ok(s.hermitian(dim, 1)),
        OperatorSpec::Random => Ok(s.symmetric_hermitian(dim, n)),
        OperatorSpec::Zero => ManyBodyOperator::zeros(dim, (1..=n).collect()).map_err(|e| e.to_string()),
        OperatorSpec::Hopping { periodic } if n == 1 => lattice_hopping(dim, *periodic).map_err(|e| e.to_string()),
        OperatorSpec::OnSite { strength } if n == 2 => on_site_interaction(dim, *strength).map_err(|e| e.to_string()),
        OperatorSpec::Hopping { .. } => Err("the hopping preset is a one-particle operator".into()),
        OperatorSpec::OnSite { .. } => Err("the on-site preset is a pair operator".into()),
        OperatorSpec::Entries { entries } => matrix(entries, dim, n),
    }
}

pub fn correlations(spec: &CorrelationSpec, dim: usize, n_max: usize, s: &mut Sampler) -> Result<OperatorSequence, String> {
    let identity = |n: usize| ManyBodyOperator::identity(dim, (1..=n).collect()).map_err(|e| e.to_string());
    let seq = match spec {
        CorrelationSpec::Identity => OperatorSequence::identities(dim, n_max).map_err(|e| e.to_string())?,
        CorrelationSpec::Random { strength } => s.correlations(dim, n_max, *strength),
        CorrelationSpec::Scalar { lambda } => {
            let comps = (0..=n_max)
                .map(|n| Ok(if n < 2 { identity(n)? } else { identity(n)?.scaled_re(lambda.powi(n as i32 - 1)) }))
                .collect::<Result<Vec<_>, String>>()?;
            OperatorSequence::new(dim, comps).map_err(|e| e.to_string())?
        }
        CorrelationSpec::Entries { components } => {
            if let Some(&n) = components.keys().find(|&&n| n < 2) {
                return Err(format!("correlation order {n} is fixed (g_0 = 1, g_1 = I)"));
            }
            let comps = (0..=n_max)
                .map(|n| match components.get(&n) {
                    Some(e) => matrix(e, dim, n),
                    None => identity(n),
                })
                .collect::<Result<Vec<_>, String>>()?;
            OperatorSequence::new(dim, comps).map_err(|e| e.to_string())?
        }
    };
    Ok(seq)
}

pub fn build(exp: &Experiment, seed: u64, n_max: usize) -> Result<Built, String> {
    let m = &exp.model;
    if m.dim < 2 {
        return Err("dimension must be at least 2".into());
    }
    let mut s = Sampler::new(seed);
    let k = operator(&m.kinetic, m.dim, 1, &mut s)?;
    let phi = operator(&m.pair, m.dim, 2, &mut s)?;
    let model = InteractionModel::new(k, phi, m.epsilon).map_err(|e| e.to_string())?;
    let f1 = match &exp.initial.f1 {
        StateSpec::RandomDensity { trace } => s.density(m.dim, *trace),
        StateSpec::RandomPure => s.pure_state(m.dim),
        StateSpec::Entries { entries } => matrix(entries, m.dim, 1)?,
    };
    let correlations = correlations(&exp.initial.correlations, m.dim, n_max, &mut s)?;
    Ok(Built { model, f1, correlations, sampler: s })
}
