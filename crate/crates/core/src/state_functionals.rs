//! Correlated initial states `(1, F₁, g₂F₁⊗F₁, …, g_n F₁^{⊗n}, …)`, the mean
//! value functional, the one-particle series `F₁(t)` solving the generalized
//! kinetic equation, and the marginal functionals `F_s(t | F₁(t))`.

use crate::cluster::{dual_cumulant, generating_operator, ClusterArgument};
use crate::dual_hierarchy::marginal_observable;
use crate::error::{Error, Result};
use crate::operator::{ManyBodyOperator, OperatorSequence, SYMMETRY_TOL};
use crate::propagators::{GeneratorKind, Propagators};
use crate::C64;

/// Largest series index accepted by [`kinetic_series`].
pub const MAX_KINETIC_TERMS: usize = 5;

#[derive(Clone, Debug, PartialEq)]
pub struct CorrelatedState {
    f1: ManyBodyOperator,
    correlations: OperatorSequence,
    epsilon: f64,
}

impl CorrelatedState {
    /// `correlations` must have `g₀ = 1`, `g₁ = I` and exchange-symmetric
    /// components. `epsilon = 0` marks a limit state.
    pub fn new(f1: ManyBodyOperator, correlations: OperatorSequence, epsilon: f64) -> Result<Self> {
        if f1.n_particles() != 1 {
            return Err(Error::InvalidArgument("one-particle operator expected".into()));
        }
        if f1.dim() != correlations.dim() {
            return Err(Error::DimensionMismatch { expected: f1.dim(), found: correlations.dim() });
        }
        if f1.trace_norm()? == 0.0 {
            return Err(Error::InvalidArgument("one-particle operator must be nonzero".into()));
        }
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!("scaling parameter must be nonnegative, got {epsilon}")));
        }
        let d = f1.dim();
        let one = ManyBodyOperator::scalar(d, C64::new(1.0, 0.0));
        if correlations.get(0)?.max_abs_diff(&one)? > SYMMETRY_TOL {
            return Err(Error::InvalidArgument("g_0 must be 1".into()));
        }
        if correlations.n_max() >= 1 && correlations.get(1)?.max_abs_diff(&ManyBodyOperator::identity(d, vec![1])?)? > SYMMETRY_TOL {
            return Err(Error::InvalidArgument("g_1 must be the identity".into()));
        }
        correlations.validate_symmetry(SYMMETRY_TOL)?;
        Ok(Self { f1, correlations, epsilon })
    }

    /// Chaotic state: every `g_n` is the identity.
    pub fn uncorrelated(f1: ManyBodyOperator, n_max: usize, epsilon: f64) -> Result<Self> {
        let g = OperatorSequence::identities(f1.dim(), n_max)?;
        Self::new(f1, g, epsilon)
    }

    pub fn f1(&self) -> &ManyBodyOperator {
        &self.f1
    }

    pub fn correlations(&self) -> &OperatorSequence {
        &self.correlations
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn dim(&self) -> usize {
        self.f1.dim()
    }

    /// The same correlations with a different one-particle operator.
    pub fn with_f1(&self, f1: ManyBodyOperator) -> Result<Self> {
        Self::new(f1, self.correlations.clone(), self.epsilon)
    }
}

/// `⊗_{l ∈ labels} f` for a one-particle `f`.
pub fn product(f: &ManyBodyOperator, labels: &[usize]) -> Result<ManyBodyOperator> {
    ManyBodyOperator::tensor_power(f, labels)
}

/// `g_n Π_{i=1}^n F₁(i)`; component 0 is the scalar 1.
pub fn state_component(state: &CorrelatedState, n: usize) -> Result<ManyBodyOperator> {
    let labels: Vec<usize> = (1..=n).collect();
    let g = state.correlations.get(n)?;
    g.compose(&product(&state.f1, &labels)?)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FunctionalTruncation {
    pub s_max: usize,
    /// Estimated size of the omitted terms: the last term times the
    /// geometric factor `r/(1−r)` of the last observed term ratio `r`.
    pub tail_bound: f64,
}

fn geometric_tail(magnitudes: &[f64]) -> Result<f64> {
    let last = match magnitudes.last() {
        Some(&l) if l > 0.0 => l,
        _ => return Ok(0.0),
    };
    match magnitudes.iter().rev().skip(1).find(|m| **m > 0.0) {
        None => Ok(last),
        Some(prev) => {
            let r = last / prev;
            if r >= 1.0 {
                return Err(Error::NonDecaying(format!("term ratio {r:.3} at the end of the series")));
            }
            Ok(last * r / (1.0 - r))
        }
    }
}

/// `(B, F^c) = Σ_s (1/s!) Tr B_s g_s Π F₁` over the stored components of `b`.
#[derive(Clone, Debug)]
pub struct MeanValue {
    pub value: C64,
    pub terms: Vec<C64>,
    pub truncation: FunctionalTruncation,
}

/// Mean value of the observable sequence `b` (already evolved to the time
/// of interest) in `state`. Requires `‖F₁‖₁ < e^{−1}`.
pub fn mean_value(b: &OperatorSequence, state: &CorrelatedState) -> Result<MeanValue> {
    let norm = state.f1.trace_norm()?;
    if norm >= (-1.0f64).exp() {
        return Err(Error::InvalidArgument(format!("mean value needs a trace norm below 1/e, got {norm}")));
    }
    let mut terms = Vec::with_capacity(b.n_max() + 1);
    let mut fact = 1.0;
    for s in 0..=b.n_max() {
        if s > 0 {
            fact *= s as f64;
        }
        let bs = b.get(s)?;
        let term = if s == 0 {
            bs.trace()
        } else {
            bs.compose(&state_component(state, s)?)?.trace() / fact
        };
        terms.push(term);
    }
    let mags: Vec<f64> = terms.iter().map(|z| z.norm()).collect();
    let tail = geometric_tail(&mags[1.min(mags.len() - 1)..])?;
    let value = terms.iter().sum();
    Ok(MeanValue { value, terms, truncation: FunctionalTruncation { s_max: b.n_max(), tail_bound: tail } })
}

/// Partial sum of a one-particle (or `s`-particle) series with its term sizes.
#[derive(Clone, Debug)]
pub struct SeriesValue {
    pub value: ManyBodyOperator,
    /// Trace norm of every term.
    pub term_norms: Vec<f64>,
    /// False when the last term is not smaller than the one before it.
    pub decaying: bool,
    pub hermiticity_defect: f64,
}

fn finish_series(value: ManyBodyOperator, term_norms: Vec<f64>) -> SeriesValue {
    let decaying = match term_norms.as_slice() {
        [.., prev, last] => last < prev || *last == 0.0,
        _ => true,
    };
    let hermiticity_defect = value.hermiticity_defect();
    SeriesValue { value, term_norms, decaying, hermiticity_defect }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `F₁(t) = Σ_{n ≤ n_trunc} (1/n!) Tr_{2..1+n} 𝔄*_{1+n}(t) g_{1+n} Π F₁⁰`.
pub fn kinetic_series(props: &Propagators, t: f64, state: &CorrelatedState, n_trunc: usize) -> Result<SeriesValue> {
    if n_trunc > MAX_KINETIC_TERMS {
        return Err(Error::OutOfRange { what: "kinetic series truncation", value: n_trunc, allowed: format!("<= {MAX_KINETIC_TERMS}") });
    }
    if state.correlations.n_max() < n_trunc + 1 {
        return Err(Error::MissingComponent(state.correlations.n_max() + 1));
    }
    let mut acc = ManyBodyOperator::zeros(state.dim(), vec![1])?;
    let mut norms = Vec::with_capacity(n_trunc + 1);
    for n in 0..=n_trunc {
        let labels: Vec<usize> = (1..=n + 1).collect();
        let x = state_component(state, n + 1)?;
        let term = dual_cumulant(props, t, &labels, &x)?.partial_trace(&[1])?.scaled_re(1.0 / factorial(n));
        norms.push(term.trace_norm()?);
        acc = acc.plus(&term)?;
    }
    Ok(finish_series(acc, norms))
}

/// Marginal functional of the state with a convergence flag.
#[derive(Clone, Debug)]
pub struct MarginalFunctional {
    pub series: SeriesValue,
    /// Set when `‖F₁(t)‖₁ ≥ e^{−(3s+2)}`, outside the guaranteed
    /// convergence region.
    pub outside_convergence_region: bool,
}

/// `F_s(t | F₁(t)) = Σ_{n ≤ n_trunc} (1/n!) Tr_{s+1..s+n} 𝔊_{1+n}(t, {Y}, X∖Y) Π F₁(t)`.
pub fn marginal_functional(
    props: &Propagators,
    t: f64,
    s: usize,
    f1_t: &ManyBodyOperator,
    correlations: &OperatorSequence,
    n_trunc: usize,
) -> Result<MarginalFunctional> {
    if s == 0 {
        return Err(Error::OutOfRange { what: "marginal order", value: 0, allowed: ">= 1".into() });
    }
    if f1_t.n_particles() != 1 {
        return Err(Error::InvalidArgument("one-particle operator expected".into()));
    }
    let y: Vec<usize> = (1..=s).collect();
    let mut acc = ManyBodyOperator::zeros(f1_t.dim(), y.clone())?;
    let mut norms = Vec::with_capacity(n_trunc + 1);
    for n in 0..=n_trunc {
        let arg = ClusterArgument::with_extras(s, n);
        let f = product(f1_t, arg.host())?;
        let term = generating_operator(props, t, &arg, correlations, &f)?.partial_trace(&y)?.scaled_re(1.0 / factorial(n));
        norms.push(term.trace_norm()?);
        acc = acc.plus(&term)?;
    }
    let threshold = (-(3.0 * s as f64 + 2.0)).exp();
    Ok(MarginalFunctional {
        series: finish_series(acc, norms),
        outside_convergence_region: f1_t.trace_norm()? >= threshold,
    })
}

/// Both sides of `(B(t), F^c) = (B(0), F(t | F₁(t)))`.
#[derive(Clone, Debug)]
pub struct DualityReport {
    pub lhs: C64,
    pub rhs: C64,
    pub residual: f64,
    pub lhs_tail: f64,
    pub rhs_tail: f64,
}

/// Evaluates both sides of the duality with `s_max` particles on the left.
/// The right-hand side uses `F₁(t)` through `n = s_max − 1` and, for each
/// `B⁰_k` with `k ≥ 2`, the marginal functional through `n = s_max − k`,
/// so that both sides contain the same orders in `F₁⁰`. For additive `b0`
/// only `Tr B⁰₁ F₁(t)` appears on the right.
pub fn duality_check(props: &Propagators, t: f64, b0: &OperatorSequence, state: &CorrelatedState, s_max: usize) -> Result<DualityReport> {
    if s_max == 0 {
        return Err(Error::OutOfRange { what: "duality truncation", value: 0, allowed: ">= 1".into() });
    }
    let b0 = b0.truncated(s_max)?;
    let mut evolved = vec![b0.get(0)?.clone()];
    for s in 1..=s_max {
        evolved.push(marginal_observable(props, t, s, &b0)?);
    }
    let evolved = OperatorSequence::new(b0.dim(), evolved)?;
    let left = mean_value(&evolved, state)?;

    let f1 = kinetic_series(props, t, state, s_max - 1)?;
    let mut rhs = b0.get(0)?.trace() + b0.get(1)?.compose(&f1.value)?.trace();
    let b_norm = b0.components().iter().skip(1).map(|c| c.operator_norm()).collect::<Result<Vec<_>>>()?;
    let mut rhs_tail = b_norm[0] * geometric_tail(&f1.term_norms)?;
    for k in 2..=s_max {
        let bk = b0.get(k)?;
        if bk.matrix().iter().all(|z| z.norm() == 0.0) {
            continue;
        }
        let fk = marginal_functional(props, t, k, &f1.value, state.correlations(), s_max - k)?;
        rhs += bk.compose(&fk.series.value)?.trace() / factorial(k);
        rhs_tail += b_norm[k - 1] / factorial(k) * geometric_tail(&fk.series.term_norms)?;
    }
    Ok(DualityReport { lhs: left.value, rhs, residual: (left.value - rhs).norm(), lhs_tail: left.truncation.tail_bound, rhs_tail })
}

/// Right-hand side `N*(1)F₁ + ε Tr₂ N*_int(1,2) F₂` of the generalized
/// kinetic equation.
pub fn gqke_rhs(props: &Propagators, f1: &ManyBodyOperator, f2: &ManyBodyOperator) -> Result<ManyBodyOperator> {
    let free = props.generator(f1, GeneratorKind::Free(1), true)?;
    let collision = props.generator(f2, GeneratorKind::Pair(1, 2), true)?.partial_trace(&[1])?;
    free.plus(&collision.scaled_re(props.model().epsilon()))
}

/// Trace norm of the central difference of `F₁(t)` minus the kinetic
/// equation's right-hand side, with `F₂` truncated one order below `F₁`.
pub fn gqke_residual(props: &Propagators, t: f64, state: &CorrelatedState, dt: f64, n_trunc: usize) -> Result<f64> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let plus = kinetic_series(props, t + dt, state, n_trunc)?.value;
    let minus = kinetic_series(props, t - dt, state, n_trunc)?.value;
    let derivative = plus.minus(&minus)?.scaled_re(0.5 / dt);
    let f1 = kinetic_series(props, t, state, n_trunc)?.value;
    let f2 = marginal_functional(props, t, 2, &f1, state.correlations(), n_trunc.saturating_sub(1))?.series.value;
    derivative.minus(&gqke_rhs(props, &f1, &f2)?)?.trace_norm()
}

/// Whether `g_n Π F₁` is a density operator (up to normalisation).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PositivityEntry {
    pub n: usize,
    pub hermiticity_defect: f64,
    /// Smallest eigenvalue of the hermitian part.
    pub min_eigenvalue: f64,
    pub positive: bool,
}

pub fn positivity_report(state: &CorrelatedState, tol: f64) -> Result<Vec<PositivityEntry>> {
    (1..=state.correlations.n_max())
        .map(|n| {
            let c = state_component(state, n)?;
            let hermiticity_defect = c.hermiticity_defect();
            let min_eigenvalue = c.hermitian_part().min_eigenvalue();
            let positive = hermiticity_defect < tol && min_eigenvalue > -tol;
            Ok(PositivityEntry { n, hermiticity_defect, min_eigenvalue, positive })
        })
        .collect()
}
