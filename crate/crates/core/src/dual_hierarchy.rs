//! Marginal observables: the cumulant expansion solving the dual BBGKY
//! hierarchy, its mean-field limit as nested Duhamel integrals, and the
//! dual Vlasov hierarchy.
//!
//! With `H_s = Σ K(j) + ε Σ Φ(i,j)` the hierarchy reads
//! `∂_t B_s = N_s B_s + ε Σ_{j₁≠j₂} N_int(j₁,j₂) B_{s−1}(Y∖j₁)`, and its solution
//! is `B_s(t) = Σ_{X⊆Y, X≠Y} 𝔄_{1+|X|}(t, {Y∖X}, X) B⁰_{s−|X|}(Y∖X)`. In the
//! limit `ε → 0` with `B⁰_n = εⁿ b⁰_n`, `ε^{−s}B_s(t)` tends to the solution
//! `b_s(t)` of `∂_t b_s = Σ N(j) b_s + Σ_{j₁≠j₂} N_int(j₁,j₂) b_{s−1}(Y∖j₁)`.

use itertools::Itertools;

use crate::cluster::{cumulant, particle_cumulant, ClusterArgument};
use crate::error::{Error, Result};
use crate::ode::{integrate_adaptive, StepControl, StepStats};
use crate::operator::{ManyBodyOperator, OperatorSequence};
use crate::propagators::{InteractionModel, Picture, Propagators};
use crate::quadrature::QuadratureSpec;
use crate::C64;

/// Largest `s` accepted by [`limit_marginal_observable`].
pub const MAX_LIMIT_ORDER: usize = 5;
/// Quadrature refinements that move the result by more than this are
/// flagged as under-resolved.
pub const REFINEMENT_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObservableKind {
    General,
    /// Only the one-particle component is nonzero.
    Additive,
    /// Only the `k`-particle component is nonzero.
    KAry(usize),
}

/// Initial sequence `B⁰` (or `b⁰`) together with its values on a time grid.
#[derive(Clone, Debug)]
pub struct ObservableSequence {
    kind: ObservableKind,
    initial: OperatorSequence,
    times: Vec<f64>,
    evolved: Vec<OperatorSequence>,
}

fn is_zero(op: &ManyBodyOperator) -> bool {
    op.matrix().iter().all(|z| *z == C64::new(0.0, 0.0))
}

impl ObservableSequence {
    pub fn new(initial: OperatorSequence, kind: ObservableKind) -> Result<Self> {
        let only = match kind {
            ObservableKind::General => None,
            ObservableKind::Additive => Some(1),
            ObservableKind::KAry(k) => Some(k),
        };
        if let Some(k) = only {
            if k == 0 || k > initial.n_max() {
                return Err(Error::OutOfRange { what: "observable order", value: k, allowed: format!("1..={}", initial.n_max()) });
            }
            for (n, c) in initial.components().iter().enumerate() {
                if n != k && !is_zero(c) {
                    return Err(Error::InvalidArgument(format!("{kind:?} observable has a nonzero component of order {n}")));
                }
            }
        }
        Ok(Self { kind, initial, times: Vec::new(), evolved: Vec::new() })
    }

    pub fn kind(&self) -> ObservableKind {
        self.kind
    }

    pub fn initial(&self) -> &OperatorSequence {
        &self.initial
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn evolved(&self) -> &[OperatorSequence] {
        &self.evolved
    }

    /// Evolves every component with the cumulant expansion.
    pub fn evolve(&self, props: &Propagators, times: &[f64]) -> Result<Self> {
        let mut evolved = Vec::with_capacity(times.len());
        for &t in times {
            let mut comps = vec![self.initial.get(0)?.clone()];
            for s in 1..=self.initial.n_max() {
                comps.push(marginal_observable(props, t, s, &self.initial)?);
            }
            evolved.push(OperatorSequence::new(self.initial.dim(), comps)?);
        }
        Ok(Self { times: times.to_vec(), evolved, ..self.clone() })
    }
}

fn particles(s: usize) -> Vec<usize> {
    (1..=s).collect()
}

fn check_order(s: usize, seq: &OperatorSequence) -> Result<()> {
    if s == 0 || s > seq.n_max() {
        return Err(Error::OutOfRange { what: "marginal order", value: s, allowed: format!("1..={}", seq.n_max()) });
    }
    Ok(())
}

/// `B_s(t, 1..s)` from the cumulant expansion over the initial sequence `b0`.
pub fn marginal_observable(props: &Propagators, t: f64, s: usize, b0: &OperatorSequence) -> Result<ManyBodyOperator> {
    check_order(s, b0)?;
    let y = particles(s);
    let mut acc = ManyBodyOperator::zeros(b0.dim(), y.clone())?;
    for n in 0..s {
        if is_zero(b0.get(s - n)?) {
            continue;
        }
        for x in y.iter().copied().combinations(n) {
            let arg = ClusterArgument::new(y.clone(), x)?;
            let target = b0.on_labels(&arg.cluster())?;
            acc = acc.plus(&cumulant(props, t, &arg, &target)?)?;
        }
    }
    Ok(acc)
}

/// `𝔄_s(t) Σ_j b(j)` for a one-particle observable `b`.
pub fn additive_marginal_observable(props: &Propagators, t: f64, s: usize, b: &ManyBodyOperator) -> Result<ManyBodyOperator> {
    if b.n_particles() != 1 {
        return Err(Error::InvalidArgument("additive observable must act on one particle".into()));
    }
    if s == 0 {
        return Err(Error::OutOfRange { what: "marginal order", value: 0, allowed: ">= 1".into() });
    }
    let y = particles(s);
    let mut sum = ManyBodyOperator::zeros(b.dim(), y.clone())?;
    for &j in &y {
        sum = sum.plus(&b.with_labels(vec![j])?.embed(&y)?)?;
    }
    particle_cumulant(props, t, &y, &sum)
}

/// Couplings of the hierarchies on `1..=s`: the Hamiltonian driving `B_s`
/// itself and, for each `j`, `V_j = Σ_{i≠j} Φ(i,j)`.
struct Couplings {
    own: ManyBodyOperator,
    pair_sums: Vec<ManyBodyOperator>,
}

impl Couplings {
    fn new(model: &InteractionModel, s: usize, limit: bool) -> Result<Self> {
        let y = particles(s);
        let own = if limit { model.with_epsilon(0.0)?.hamiltonian_on(&y)? } else { model.hamiltonian_on(&y)? };
        let mut pair_sums = Vec::with_capacity(s);
        for &j in &y {
            let mut v = ManyBodyOperator::zeros(model.dim(), y.clone())?;
            for &i in y.iter().filter(|&&i| i != j) {
                v = v.plus(&model.pair_on(i, j)?.embed(&y)?)?;
            }
            pair_sums.push(v);
        }
        Ok(Self { own, pair_sums })
    }

    /// `i[H, b]`
    fn transport(&self, b: &ManyBodyOperator) -> Result<ManyBodyOperator> {
        Ok(self.own.commutator(b)?.scaled(C64::new(0.0, 1.0)))
    }

    /// `Σ_{j₁≠j₂} N_int(j₁,j₂) lower(Y∖j₁)` with `lower` on `1..s−1`.
    fn source(&self, lower: &ManyBodyOperator) -> Result<ManyBodyOperator> {
        let s = self.pair_sums.len();
        let y = particles(s);
        let mut acc = ManyBodyOperator::zeros(lower.dim(), y.clone())?;
        for (idx, v) in self.pair_sums.iter().enumerate() {
            let j = idx + 1;
            let rest: Vec<usize> = y.iter().copied().filter(|&l| l != j).collect();
            let embedded = lower.with_labels(rest)?.embed(&y)?;
            acc = acc.plus(&v.commutator(&embedded)?)?;
        }
        Ok(acc.scaled(C64::new(0.0, 1.0)))
    }
}

/// Right-hand side of the dual BBGKY hierarchy for order `s`, given
/// `B_s` and `B_{s−1}` at the same time.
pub fn dual_bbgky_rhs(
    model: &InteractionModel,
    s: usize,
    b_s: &ManyBodyOperator,
    b_lower: Option<&ManyBodyOperator>,
) -> Result<ManyBodyOperator> {
    let c = Couplings::new(model, s, false)?;
    let mut rhs = c.transport(b_s)?;
    if let (true, Some(lower)) = (s > 1, b_lower) {
        rhs = rhs.plus(&c.source(lower)?.scaled_re(model.epsilon()))?;
    }
    Ok(rhs)
}

/// Trace norm of `(B_s(t+dt) − B_s(t−dt))/(2dt)` minus the hierarchy's
/// right-hand side at `t`.
pub fn dual_bbgky_residual(props: &Propagators, t: f64, s: usize, b0: &OperatorSequence, dt: f64) -> Result<f64> {
    check_order(s, b0)?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let plus = marginal_observable(props, t + dt, s, b0)?;
    let minus = marginal_observable(props, t - dt, s, b0)?;
    let derivative = plus.minus(&minus)?.scaled_re(0.5 / dt);
    let now = marginal_observable(props, t, s, b0)?;
    let lower = if s > 1 { Some(marginal_observable(props, t, s - 1, b0)?) } else { None };
    let rhs = dual_bbgky_rhs(props.model(), s, &now, lower.as_ref())?;
    derivative.minus(&rhs)?.trace_norm()
}

/// Result of a nested-quadrature evaluation.
#[derive(Clone, Debug)]
pub struct LimitEvaluation {
    /// Value from the refined rule.
    pub value: ManyBodyOperator,
    /// Operator-norm change between the base and the refined rule.
    pub refinement_gap: f64,
    pub under_resolved: bool,
}

fn duhamel_level(
    props: &Propagators,
    couplings: &[Couplings],
    t: f64,
    s: usize,
    depth: usize,
    b0: &OperatorSequence,
    quad: &QuadratureSpec,
) -> Result<ManyBodyOperator> {
    let y = particles(s);
    let mut acc = props.free_flow(t, &y, b0.get(s)?, Picture::Heisenberg)?;
    if s == 1 || depth == 0 || t == 0.0 {
        return Ok(acc);
    }
    for (tau, w) in quad.rule(0.0, t) {
        let lower = duhamel_level(props, couplings, tau, s - 1, depth - 1, b0, quad)?;
        let src = couplings[s - 1].source(&lower)?;
        acc = acc.plus(&props.free_flow(t - tau, &y, &src, Picture::Heisenberg)?.scaled_re(w))?;
    }
    Ok(acc)
}

/// `b_s(t)` as the sum of nested time-ordered integrals over free flows and
/// pair generators, each level discretised by `quad` (the interaction
/// strength of `props` is ignored). Evaluated with `quad` and its
/// refinement; a change above [`REFINEMENT_TOL`] sets the flag.
pub fn limit_marginal_observable(
    props: &Propagators,
    t: f64,
    s: usize,
    b0: &OperatorSequence,
    quad: &QuadratureSpec,
) -> Result<LimitEvaluation> {
    check_order(s, b0)?;
    if s > MAX_LIMIT_ORDER {
        return Err(Error::OutOfRange { what: "limit marginal order", value: s, allowed: format!("1..={MAX_LIMIT_ORDER}") });
    }
    let free = Propagators::new(props.model().with_epsilon(0.0)?);
    let couplings = (1..=s).map(|k| Couplings::new(free.model(), k, true)).collect::<Result<Vec<_>>>()?;
    let depth = quad.max_nesting.unwrap_or(s - 1).min(s - 1);
    let coarse = duhamel_level(&free, &couplings, t, s, depth, b0, quad)?;
    let fine = duhamel_level(&free, &couplings, t, s, depth, b0, &quad.refined())?;
    let gap = fine.minus(&coarse)?.operator_norm()?;
    Ok(LimitEvaluation { value: fine, refinement_gap: gap, under_resolved: gap > REFINEMENT_TOL })
}

/// Solves the dual Vlasov hierarchy for `b_1, …, b_{n_max}` on `times`
/// (which must start at 0) with adaptive RK4. The interaction strength of
/// `model` is ignored; the pair coupling enters with unit weight.
pub fn integrate_dual_vlasov(
    model: &InteractionModel,
    times: &[f64],
    b0: &OperatorSequence,
    ctl: StepControl,
) -> Result<(ObservableSequence, StepStats)> {
    if times.first() != Some(&0.0) {
        return Err(Error::InvalidArgument("time grid must start at 0".into()));
    }
    let n_max = b0.n_max();
    let couplings = (1..=n_max).map(|s| Couplings::new(model, s, true)).collect::<Result<Vec<_>>>()?;
    let dim = b0.dim();
    let y0: Vec<_> = b0.components()[1..].iter().map(|c| c.matrix().clone()).collect();
    let wrap = |s: usize, m: &nalgebra::DMatrix<C64>| ManyBodyOperator::new(dim, particles(s), m.clone());
    let rhs = |_t: f64, y: &Vec<nalgebra::DMatrix<C64>>| {
        let mut out = Vec::with_capacity(y.len());
        for (idx, m) in y.iter().enumerate() {
            let s = idx + 1;
            let c = &couplings[idx];
            let mut d = c.transport(&wrap(s, m)?)?;
            if s > 1 {
                d = d.plus(&c.source(&wrap(s - 1, &y[idx - 1])?)?)?;
            }
            out.push(d.into_matrix());
        }
        Ok(out)
    };
    let (states, stats) = integrate_adaptive(rhs, times, y0, ctl)?;
    let evolved = states
        .into_iter()
        .map(|st| {
            let mut comps = vec![b0.get(0)?.clone()];
            for (idx, m) in st.iter().enumerate() {
                comps.push(wrap(idx + 1, m)?);
            }
            OperatorSequence::new(dim, comps)
        })
        .collect::<Result<Vec<_>>>()?;
    let obs = ObservableSequence { kind: ObservableKind::General, initial: b0.clone(), times: times.to_vec(), evolved };
    Ok((obs, stats))
}
