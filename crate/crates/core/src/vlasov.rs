//! The Vlasov-type kinetic equation with initial correlations
//!
//! `∂_t f = N*(1) f + Tr₂ N*_int(1,2) 𝔤₂(t) f ⊗ f`,
//! `𝔤_n(t) = Π G*₁(t) g_n Π G*₁(−t)`,
//!
//! its iterated Duhamel series, the propagation of the dressed correlations
//! and the pure-state (Gross–Pitaevskii type) reduction on a lattice. Limit
//! dynamics always use the pair potential with unit weight; the model's
//! `ε` is ignored.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::ode::{integrate_adaptive, integrate_fixed, State, StepControl, StepStats};
use crate::operator::{ManyBodyOperator, OperatorSequence, SYMMETRY_TOL};
use crate::propagators::{InteractionModel, Picture, Propagators};
use crate::state_functionals::{kinetic_series, marginal_functional, product, CorrelatedState, SeriesValue};
use crate::C64;

/// Largest truncation accepted by [`vlasov_series`].
pub const MAX_SERIES_TERMS: usize = 6;

const I: C64 = C64::new(0.0, 1.0);

#[derive(Clone, Debug)]
pub struct VlasovProblem {
    props: Propagators,
    initial: CorrelatedState,
    higher_default_identity: bool,
}

impl VlasovProblem {
    /// `correlations` holds `g_0 = 1, g_1 = I, g_2, …`; the series needs
    /// `g_{1+n}` for every term it evaluates.
    pub fn new(model: &InteractionModel, f1_0: ManyBodyOperator, correlations: OperatorSequence) -> Result<Self> {
        let initial = CorrelatedState::new(f1_0, correlations, 0.0)?;
        Ok(Self { props: Propagators::new(model.limit()), initial, higher_default_identity: false })
    }

    /// Only `g₂` is given; `g_n = I` for `3 ≤ n ≤ n_max`.
    pub fn with_pair_correlation(model: &InteractionModel, f1_0: ManyBodyOperator, g2: ManyBodyOperator, n_max: usize) -> Result<Self> {
        let d = model.dim();
        let mut comps = Vec::with_capacity(n_max.max(2) + 1);
        for n in 0..=n_max.max(2) {
            comps.push(if n == 2 { g2.clone() } else { ManyBodyOperator::identity(d, (1..=n).collect())? });
        }
        let mut p = Self::new(model, f1_0, OperatorSequence::new(d, comps)?)?;
        p.higher_default_identity = true;
        Ok(p)
    }

    /// Uncorrelated initial data, `g_n = I` through `n_max`.
    pub fn uncorrelated(model: &InteractionModel, f1_0: ManyBodyOperator, n_max: usize) -> Result<Self> {
        let g = OperatorSequence::identities(model.dim(), n_max.max(2))?;
        Self::new(model, f1_0, g)
    }

    pub fn props(&self) -> &Propagators {
        &self.props
    }

    pub fn model(&self) -> &InteractionModel {
        self.props.model()
    }

    pub fn f1_0(&self) -> &ManyBodyOperator {
        self.initial.f1()
    }

    pub fn correlations(&self) -> &OperatorSequence {
        self.initial.correlations()
    }

    /// True when correlations beyond the pair level were filled in as the
    /// identity.
    pub fn higher_default_identity(&self) -> bool {
        self.higher_default_identity
    }

    /// `t₀ = (2‖Φ‖ ‖f₁⁰‖₁)^{−1}`; infinite without interaction.
    pub fn t0(&self) -> Result<f64> {
        let denom = 2.0 * self.model().pair_norm() * self.f1_0().trace_norm()?;
        Ok(if denom == 0.0 { f64::INFINITY } else { 1.0 / denom })
    }

    /// `𝔤_n(t) = Π G*₁(t) g_n Π G*₁(−t)` on `1..=n`.
    pub fn dressed_correlation(&self, t: f64, n: usize) -> Result<ManyBodyOperator> {
        let labels: Vec<usize> = (1..=n).collect();
        self.props.free_flow(t, &labels, self.correlations().get(n)?, Picture::Schrodinger)
    }

    /// `𝔤_k(t) Π_{j≤k} f(j)`.
    pub fn dressed_product(&self, t: f64, f: &ManyBodyOperator, k: usize) -> Result<ManyBodyOperator> {
        let labels: Vec<usize> = (1..=k).collect();
        self.dressed_correlation(t, k)?.compose(&product(f, &labels)?)
    }

    fn pair_correlation_is_identity(&self) -> bool {
        let g2 = match self.correlations().get(2) {
            Ok(g) => g,
            Err(_) => return true,
        };
        let id = ManyBodyOperator::identity(self.model().dim(), vec![1, 2]).expect("identity");
        g2.max_abs_diff(&id).map(|e| e == 0.0).unwrap_or(false)
    }
}

/// `−i Tr₂ [Φ(1,2), x]` for a two-particle `x`.
fn collision(model: &InteractionModel, x: &ManyBodyOperator) -> Result<ManyBodyOperator> {
    let phi = model.pair_on(1, 2)?;
    Ok(phi.commutator(x)?.partial_trace(&[1])?.scaled(-I))
}

/// Right-hand side of the kinetic equation at time `t`.
pub fn vlasov_rhs(problem: &VlasovProblem, t: f64, f1: &ManyBodyOperator) -> Result<ManyBodyOperator> {
    if f1.n_particles() != 1 || f1.dim() != problem.model().dim() {
        return Err(Error::DimensionMismatch { expected: problem.model().dim(), found: f1.dim() });
    }
    let f1 = f1.with_labels(vec![1])?;
    let free = problem.model().kinetic().commutator(&f1)?.scaled(-I);
    let ff = product(&f1, &[1, 2])?;
    let x = if problem.pair_correlation_is_identity() { ff } else { problem.dressed_correlation(t, 2)?.compose(&ff)? };
    free.plus(&collision(problem.model(), &x)?)
}

/// How to step an ODE.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Stepping {
    Adaptive(StepControl),
    Fixed(f64),
}

impl Default for Stepping {
    fn default() -> Self {
        Stepping::Adaptive(StepControl::default())
    }
}

fn run_ode<F>(rhs: F, times: &[f64], y0: State, stepping: Stepping) -> Result<(Vec<State>, StepStats)>
where
    F: Fn(f64, &State) -> Result<State>,
{
    match stepping {
        Stepping::Adaptive(ctl) => integrate_adaptive(rhs, times, y0, ctl),
        Stepping::Fixed(dt) => Ok((integrate_fixed(rhs, times, y0, dt)?, StepStats::default())),
    }
}

#[derive(Clone, Debug)]
pub struct VlasovTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<ManyBodyOperator>,
    /// `max_t |Tr f(t) − Tr f(t_start)|`.
    pub trace_drift: f64,
    /// `max_t max|f − f†|`; only expected to stay small for `g₂ = I`.
    pub hermiticity_drift: f64,
    pub stats: StepStats,
}

/// Integrates from `f_start` at `times[0]` through the monotone grid `times`
/// (forwards or backwards).
pub fn evolve_vlasov(problem: &VlasovProblem, f_start: &ManyBodyOperator, times: &[f64], stepping: Stepping) -> Result<VlasovTrajectory> {
    let d = problem.model().dim();
    let rhs = |t: f64, y: &State| {
        let f = ManyBodyOperator::new(d, vec![1], y[0].clone())?;
        Ok(vec![vlasov_rhs(problem, t, &f)?.into_matrix()])
    };
    let (raw, stats) = run_ode(rhs, times, vec![f_start.matrix().clone()], stepping)?;
    let states = raw.into_iter().map(|mut y| ManyBodyOperator::new(d, vec![1], y.remove(0))).collect::<Result<Vec<_>>>()?;
    let tr0 = f_start.trace();
    let trace_drift = states.iter().map(|f| (f.trace() - tr0).norm()).fold(0.0, f64::max);
    let hermiticity_drift = states.iter().map(|f| f.hermiticity_defect()).fold(0.0, f64::max);
    Ok(VlasovTrajectory { times: times.to_vec(), states, trace_drift, hermiticity_drift, stats })
}

/// Cauchy problem from `f₁⁰` at `t = 0`.
pub fn integrate_vlasov(problem: &VlasovProblem, times: &[f64], stepping: Stepping) -> Result<VlasovTrajectory> {
    if times.first() != Some(&0.0) {
        return Err(Error::InvalidArgument("time grid must start at 0".into()));
    }
    evolve_vlasov(problem, problem.f1_0(), times, stepping)
}

/// Iterated Duhamel series of the kinetic equation through `n_trunc`
/// interaction insertions, evaluated at `t`.
///
/// Term `n` carries `n` nested time integrals and traces out `n` extra
/// particles. The terms are computed as the graded solution of the linear
/// hierarchy `∂_t V_m^{(k)} = Σ_j N*(j) V_m^{(k)} + Σ_{i≤m} Tr_{m+1}
/// N*_int(i,m+1) V_{m+1}^{(k−1)}` with `V_m^{(0)}(t) = 𝔤_m(t) Π G*₁(t)f₁⁰`
/// and `V_m^{(k)}(0) = 0`; term `n` is `V_1^{(n)}(t)`. Times at or beyond
/// `t₀` are rejected unless `force` is set.
pub fn vlasov_series(problem: &VlasovProblem, t: f64, n_trunc: usize, force: bool, ctl: StepControl) -> Result<SeriesValue> {
    Ok(vlasov_series_on(problem, &[t], n_trunc, force, ctl)?.remove(0))
}

/// [`vlasov_series`] on a monotone grid of times of one sign, from a single
/// integration of the graded hierarchy.
pub fn vlasov_series_on(problem: &VlasovProblem, times: &[f64], n_trunc: usize, force: bool, ctl: StepControl) -> Result<Vec<SeriesValue>> {
    if n_trunc > MAX_SERIES_TERMS {
        return Err(Error::OutOfRange { what: "series truncation", value: n_trunc, allowed: format!("<= {MAX_SERIES_TERMS}") });
    }
    if times.is_empty() {
        return Ok(Vec::new());
    }
    let t0 = problem.t0()?;
    if let Some(&t) = times.iter().find(|t| t.abs() >= t0) {
        if !force {
            return Err(Error::BeyondConvergenceRadius { t, t0 });
        }
    }
    let forward = times.windows(2).all(|w| w[1] > w[0]) && times[0] >= 0.0;
    let backward = times.windows(2).all(|w| w[1] < w[0]) && times[0] <= 0.0;
    if !(forward || backward) {
        return Err(Error::InvalidArgument("series grid must be strictly monotone away from 0".into()));
    }
    if problem.correlations().n_max() < n_trunc + 1 {
        return Err(Error::MissingComponent(problem.correlations().n_max() + 1));
    }
    let d = problem.model().dim();
    let props = &problem.props;
    let initial: Vec<ManyBodyOperator> = (0..=n_trunc + 1)
        .map(|m| {
            let labels: Vec<usize> = (1..=m).collect();
            problem.correlations().get(m)?.compose(&product(problem.f1_0(), &labels)?)
        })
        .collect::<Result<_>>()?;
    let free_term = |tau: f64, m: usize| -> Result<ManyBodyOperator> {
        props.free_flow(tau, &(1..=m).collect::<Vec<_>>(), &initial[m], Picture::Schrodinger)
    };
    // slot of V_m^{(k)} for k ≥ 1, m + k ≤ n_trunc + 1
    let slots: Vec<(usize, usize)> = (1..=n_trunc).flat_map(|k| (1..=n_trunc + 1 - k).map(move |m| (m, k))).collect();
    let index = |m: usize, k: usize| slots.iter().position(|&s| s == (m, k));
    let free_h: Vec<ManyBodyOperator> = (1..=n_trunc)
        .map(|m| problem.model().with_epsilon(0.0)?.hamiltonian_on(&(1..=m).collect::<Vec<_>>()))
        .collect::<Result<_>>()?;
    // W_m = Σ_{i≤m} Φ(i, m+1) on 1..=m+1
    let couplings: Vec<ManyBodyOperator> = (1..=n_trunc)
        .map(|m| {
            let host: Vec<usize> = (1..=m + 1).collect();
            let mut w = ManyBodyOperator::zeros(d, host.clone())?;
            for i in 1..=m {
                w = w.plus(&problem.model().pair_on(i, m + 1)?.embed(&host)?)?;
            }
            Ok(w)
        })
        .collect::<Result<_>>()?;
    let rhs = |tau: f64, y: &State| -> Result<State> {
        let mut out = Vec::with_capacity(y.len());
        for (slot, &(m, k)) in slots.iter().enumerate() {
            let labels: Vec<usize> = (1..=m).collect();
            let v = ManyBodyOperator::new(d, labels.clone(), y[slot].clone())?;
            let mut dv = free_h[m - 1].commutator(&v)?.scaled(-I);
            let upper = if k == 1 {
                free_term(tau, m + 1)?
            } else {
                let j = index(m + 1, k - 1).expect("graded slot");
                ManyBodyOperator::new(d, (1..=m + 1).collect(), y[j].clone())?
            };
            let src = couplings[m - 1].commutator(&upper)?.partial_trace(&labels)?.scaled(-I);
            dv = dv.plus(&src)?;
            out.push(dv.into_matrix());
        }
        Ok(out)
    };
    let y0: State = slots.iter().map(|&(m, _)| DMatrix::zeros(d.pow(m as u32), d.pow(m as u32))).collect();
    let lead = usize::from(times[0] != 0.0);
    let grid: Vec<f64> = if lead == 1 { std::iter::once(0.0).chain(times.iter().copied()).collect() } else { times.to_vec() };
    let states = if slots.is_empty() || grid.len() == 1 {
        vec![y0; grid.len()]
    } else {
        integrate_adaptive(rhs, &grid, y0, ctl)?.0
    };
    times
        .iter()
        .zip(&states[lead..])
        .map(|(&t, y)| {
            let mut terms = vec![free_term(t, 1)?];
            for k in 1..=n_trunc {
                terms.push(ManyBodyOperator::new(d, vec![1], y[index(1, k).expect("graded slot")].clone())?);
            }
            summarize(d, &terms)
        })
        .collect()
}

fn summarize(d: usize, terms: &[ManyBodyOperator]) -> Result<SeriesValue> {
    let mut acc = ManyBodyOperator::zeros(d, vec![1])?;
    let mut norms = Vec::with_capacity(terms.len());
    for term in terms {
        norms.push(term.trace_norm()?);
        acc = acc.plus(term)?;
    }
    let decaying = match norms.as_slice() {
        [.., prev, last] => last < prev || *last == 0.0,
        _ => true,
    };
    let hermiticity_defect = acc.hermiticity_defect();
    Ok(SeriesValue { value: acc, term_norms: norms, decaying, hermiticity_defect })
}

/// Mean-field comparison at scaling `ε` between the interacting functionals
/// and the limit objects.
#[derive(Clone, Debug)]
pub struct CorrelationCheck {
    /// `‖ε^k F_k(t | F₁(t)) − 𝔤_k(t) Π f₁(t)‖₁`.
    pub residual: f64,
    /// `‖ε F₁(t) − f₁(t)‖₁`.
    pub one_particle_gap: f64,
}

/// Compares, at time `t`, the `k`-particle marginal functional of the
/// `ε`-scaled system (initial data `F₁⁰ = f₁⁰/ε` with the problem's
/// correlations) with the dressed product of the limit solution. Both
/// one-particle objects use the series truncated after `n_trunc` terms and
/// the functional keeps `n_functional` terms.
pub fn correlation_propagation_check(
    scaled: &Propagators,
    problem: &VlasovProblem,
    t: f64,
    k: usize,
    n_trunc: usize,
    n_functional: usize,
    ctl: StepControl,
) -> Result<CorrelationCheck> {
    if !(2..=3).contains(&k) {
        return Err(Error::OutOfRange { what: "correlation order", value: k, allowed: "2..=3".into() });
    }
    let eps = scaled.model().epsilon();
    if eps <= 0.0 {
        return Err(Error::InvalidArgument("the scaled system needs a positive ε".into()));
    }
    let state = CorrelatedState::new(problem.f1_0().scaled_re(1.0 / eps), problem.correlations().clone(), eps)?;
    let big_f1 = kinetic_series(scaled, t, &state, n_trunc)?.value;
    let f1 = vlasov_series(problem, t, n_trunc, true, ctl)?.value;
    let fk = marginal_functional(scaled, t, k, &big_f1, problem.correlations(), n_functional)?.series.value;
    let residual = fk.scaled_re(eps.powi(k as i32)).minus(&problem.dressed_product(t, &f1, k)?)?.trace_norm()?;
    let one_particle_gap = big_f1.scaled_re(eps).minus(&f1)?.trace_norm()?;
    Ok(CorrelationCheck { residual, one_particle_gap })
}

/// Nearest-neighbour hopping `−Σ_x (|x⟩⟨x+1| + |x+1⟩⟨x|)` on `sites` sites.
pub fn lattice_hopping(sites: usize, periodic: bool) -> Result<ManyBodyOperator> {
    let mut m = DMatrix::zeros(sites, sites);
    let bonds = if periodic && sites > 2 { sites } else { sites.saturating_sub(1) };
    for x in 0..bonds {
        let y = (x + 1) % sites;
        m[(x, y)] += C64::new(-1.0, 0.0);
        m[(y, x)] += C64::new(-1.0, 0.0);
    }
    ManyBodyOperator::new(sites, vec![1], m)
}

/// On-site pair interaction `strength · Σ_x |x x⟩⟨x x|`.
pub fn on_site_interaction(sites: usize, strength: f64) -> Result<ManyBodyOperator> {
    let mut m = DMatrix::zeros(sites * sites, sites * sites);
    for x in 0..sites {
        m[(x * sites + x, x * sites + x)] = C64::new(strength, 0.0);
    }
    ManyBodyOperator::new(sites, vec![1, 2], m)
}

/// Per-site coefficients `c_x` when `Φ = Σ_x c_x |x x⟩⟨x x|`.
fn on_site_coefficients(pair: &ManyBodyOperator) -> Option<Vec<f64>> {
    let d = pair.dim();
    let m = pair.matrix();
    for ((r, c), z) in m.iter().enumerate().map(|(k, z)| ((k % m.nrows(), k / m.nrows()), z)) {
        let coincident = r == c && r / d == r % d;
        if !coincident && *z != C64::new(0.0, 0.0) {
            return None;
        }
    }
    Some((0..d).map(|x| m[(x * d + x, x * d + x)].re).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct PureStateProfile {
    pub t: f64,
    pub psi: DVector<C64>,
}

impl PureStateProfile {
    pub fn projector(&self) -> Result<ManyBodyOperator> {
        ManyBodyOperator::new(self.psi.len(), vec![1], &self.psi * self.psi.adjoint())
    }
}

/// Pure-state reduction of the kinetic equation for an on-site pair
/// interaction: `i∂_tψ = Kψ + A_t(ψ)` with
/// `A_t(ψ)_x = c_x ψ*_x Σ_{y,w} 𝔤₂(t)(xx; yw) ψ_y ψ_w`, which is the cubic
/// equation `i∂_tψ = Kψ + c|ψ|²ψ` when `g₂ = I`. The initial `f₁⁰` must be a
/// rank-one projector. A norm change beyond `purity_tol` aborts.
pub fn gp_evolution(problem: &VlasovProblem, times: &[f64], stepping: Stepping, purity_tol: f64) -> Result<Vec<PureStateProfile>> {
    let coeff = on_site_coefficients(problem.model().pair())
        .ok_or_else(|| Error::InvalidArgument("pure-state reduction needs an on-site pair interaction".into()))?;
    let f0 = problem.f1_0();
    let purity = f0.compose(f0)?.trace().re;
    if (f0.trace().re - 1.0).abs() > 1e-10 || (purity - 1.0).abs() > 1e-10 || f0.hermiticity_defect() > SYMMETRY_TOL {
        return Err(Error::InvalidArgument("initial state must be a rank-one projector".into()));
    }
    if times.first() != Some(&0.0) {
        return Err(Error::InvalidArgument("time grid must start at 0".into()));
    }
    let eig = f0.matrix().clone().symmetric_eigen();
    let top = eig.eigenvalues.iter().enumerate().fold(0, |best, (i, v)| if *v > eig.eigenvalues[best] { i } else { best });
    let psi0: DVector<C64> = eig.eigenvectors.column(top).into_owned();
    let d = psi0.len();
    let k = problem.model().kinetic().matrix().clone();
    let identity_pair = problem.pair_correlation_is_identity();
    let rhs = |t: f64, y: &State| -> Result<State> {
        let psi = &y[0];
        let mut nonlinear = DMatrix::zeros(d, 1);
        if identity_pair {
            for x in 0..d {
                nonlinear[(x, 0)] = psi[(x, 0)] * psi[(x, 0)].norm_sqr() * coeff[x];
            }
        } else {
            let g = problem.dressed_correlation(t, 2)?;
            let pp = psi.kronecker(psi);
            let gpp = g.matrix() * pp;
            for x in 0..d {
                nonlinear[(x, 0)] = psi[(x, 0)].conj() * gpp[(x * d + x, 0)] * coeff[x];
            }
        }
        Ok(vec![(&k * psi + nonlinear) * (-I)])
    };
    let y0: State = vec![DMatrix::from_column_slice(d, 1, psi0.as_slice())];
    let (raw, _) = run_ode(rhs, times, y0, stepping)?;
    let mut out = Vec::with_capacity(raw.len());
    for (t, y) in times.iter().zip(raw) {
        let psi = DVector::from_column_slice(y[0].as_slice());
        let loss = (psi.norm_squared() - 1.0).abs();
        if loss > purity_tol {
            return Err(Error::PurityLoss(loss));
        }
        out.push(PureStateProfile { t: *t, psi });
    }
    Ok(out)
}
