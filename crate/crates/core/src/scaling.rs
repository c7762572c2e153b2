//! Mean-field `ε`-sweeps and convergence-rate reports.

use rayon::prelude::*;
use serde::Serialize;

use crate::cluster::{generating_operator, ClusterArgument};
use crate::dual_hierarchy::{limit_marginal_observable, marginal_observable};
use crate::error::{Error, Result};
use crate::ode::StepControl;
use crate::operator::{ManyBodyOperator, OperatorSequence};
use crate::propagators::{InteractionModel, Propagators};
use crate::quadrature::QuadratureSpec;
use crate::state_functionals::{kinetic_series, product, CorrelatedState};
use crate::vlasov::{correlation_propagation_check, vlasov_series_on, VlasovProblem};

/// Errors at or below this are treated as exactly zero.
pub const EXACT_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepSpec {
    epsilons: Vec<f64>,
    times: Vec<f64>,
}

impl SweepSpec {
    /// At least three positive, strictly decreasing `ε`; nonempty times.
    pub fn new(epsilons: Vec<f64>, times: Vec<f64>) -> Result<Self> {
        if epsilons.len() < 3 {
            return Err(Error::InvalidArgument("a sweep needs at least three values of ε".into()));
        }
        if !epsilons.iter().all(|e| *e > 0.0 && e.is_finite()) || !epsilons.windows(2).all(|w| w[1] < w[0]) {
            return Err(Error::InvalidArgument("ε values must be positive and strictly decreasing".into()));
        }
        if times.is_empty() || !times.iter().all(|t| t.is_finite()) {
            return Err(Error::InvalidArgument("a sweep needs finite times".into()));
        }
        Ok(Self { epsilons, times })
    }

    pub fn epsilons(&self) -> &[f64] {
        &self.epsilons
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }
}

/// Acceptance windows for a first-order rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateWindow {
    /// Bounds for the error ratio per halving of `ε`.
    pub ratio: (f64, f64),
    /// Bounds for the fitted log-log slope.
    pub order: (f64, f64),
}

impl Default for RateWindow {
    fn default() -> Self {
        Self { ratio: (1.7, 2.3), order: (0.8, 1.2) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub epsilon: f64,
    pub t: f64,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimeSummary {
    pub t: f64,
    /// `2^p` for the local order `p` between consecutive `ε`.
    pub ratios: Vec<f64>,
    pub order: f64,
    /// Every error at this time is below [`EXACT_FLOOR`].
    pub exact: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub quantity: String,
    pub rows: Vec<ConvergenceRow>,
    pub summaries: Vec<TimeSummary>,
    pub window: RateWindow,
    pub pass: bool,
}

/// Least-squares slope of `y` against `x`.
pub fn fitted_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

impl ConvergenceReport {
    /// `errors[i][j]` is the error at `epsilons[i]`, `times[j]`. A time
    /// passes when its errors are all exactly zero or when every per-halving
    /// ratio and the fitted order fall inside `window`.
    pub fn from_errors(quantity: &str, spec: &SweepSpec, errors: &[Vec<f64>], window: RateWindow) -> Self {
        let eps = spec.epsilons();
        let mut rows = Vec::new();
        for (i, e) in eps.iter().enumerate() {
            for (j, t) in spec.times().iter().enumerate() {
                rows.push(ConvergenceRow { epsilon: *e, t: *t, error: errors[i][j] });
            }
        }
        let summaries: Vec<TimeSummary> = spec
            .times()
            .iter()
            .enumerate()
            .map(|(j, &t)| {
                let col: Vec<f64> = errors.iter().map(|r| r[j]).collect();
                let exact = col.iter().all(|e| *e <= EXACT_FLOOR);
                let ratios = col
                    .windows(2)
                    .zip(eps.windows(2))
                    .map(|(e, x)| 2f64.powf((e[0] / e[1]).ln() / (x[0] / x[1]).ln()))
                    .collect();
                let lx: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
                let ly: Vec<f64> = col.iter().map(|e| e.ln()).collect();
                TimeSummary { t, ratios, order: fitted_slope(&lx, &ly), exact }
            })
            .collect();
        let inside = |v: f64, (lo, hi): (f64, f64)| v >= lo && v <= hi;
        let pass = summaries
            .iter()
            .all(|s| s.exact || (s.ratios.iter().all(|r| inside(*r, window.ratio)) && inside(s.order, window.order)));
        Self { quantity: quantity.to_string(), rows, summaries, window, pass }
    }
}

fn per_epsilon<T: Send>(spec: &SweepSpec, f: impl Fn(f64) -> Result<T> + Sync) -> Result<Vec<T>> {
    spec.epsilons().par_iter().map(|&e| f(e)).collect()
}

/// `‖ε^{−s} B_s^ε(t) − b_s(t)‖` (operator norm) for initial data
/// `B^{ε,0}_n = ε^n b⁰_n`, with the limit evaluated by nested quadrature.
pub fn sweep_observables(
    model: &InteractionModel,
    spec: &SweepSpec,
    s: usize,
    b0: &OperatorSequence,
    quad: &QuadratureSpec,
    window: RateWindow,
) -> Result<ConvergenceReport> {
    let limit = Propagators::new(model.limit());
    let reference: Vec<ManyBodyOperator> = spec
        .times()
        .iter()
        .map(|&t| Ok(limit_marginal_observable(&limit, t, s, b0, quad)?.value))
        .collect::<Result<_>>()?;
    let errors = per_epsilon(spec, |eps| {
        let props = Propagators::new(model.with_epsilon(eps)?);
        let scaled = b0.map_orders(|n| eps.powi(n as i32));
        spec.times()
            .iter()
            .zip(&reference)
            .map(|(&t, b)| marginal_observable(&props, t, s, &scaled)?.scaled_re(eps.powi(-(s as i32))).minus(b)?.operator_norm())
            .collect::<Result<Vec<f64>>>()
    })?;
    Ok(ConvergenceReport::from_errors(&format!("observable_s{s}"), spec, &errors, window))
}

/// `‖ε F₁(t) − f₁(t)‖₁` with `F₁⁰ = f₁⁰/ε`; both sides use the series
/// truncated after `n_trunc` terms.
pub fn sweep_states(problem: &VlasovProblem, spec: &SweepSpec, n_trunc: usize, ctl: StepControl, window: RateWindow) -> Result<ConvergenceReport> {
    let limit = vlasov_series_on(problem, spec.times(), n_trunc, false, ctl)?;
    let errors = per_epsilon(spec, |eps| {
        let props = Propagators::new(problem.model().with_epsilon(eps)?);
        let state = CorrelatedState::new(problem.f1_0().scaled_re(1.0 / eps), problem.correlations().clone(), eps)?;
        spec.times()
            .iter()
            .zip(&limit)
            .map(|(&t, f)| kinetic_series(&props, t, &state, n_trunc)?.value.scaled_re(eps).minus(&f.value)?.trace_norm())
            .collect::<Result<Vec<f64>>>()
    })?;
    Ok(ConvergenceReport::from_errors("one_particle", spec, &errors, window))
}

/// Residual of the `k`-particle dressed-product law along the sweep.
pub fn sweep_correlations(
    problem: &VlasovProblem,
    spec: &SweepSpec,
    k: usize,
    n_trunc: usize,
    n_functional: usize,
    ctl: StepControl,
    window: RateWindow,
) -> Result<ConvergenceReport> {
    let errors = per_epsilon(spec, |eps| {
        let props = Propagators::new(problem.model().with_epsilon(eps)?);
        spec.times()
            .iter()
            .map(|&t| Ok(correlation_propagation_check(&props, problem, t, k, n_trunc, n_functional, ctl)?.residual))
            .collect::<Result<Vec<f64>>>()
    })?;
    Ok(ConvergenceReport::from_errors(&format!("dressed_product_s{k}"), spec, &errors, window))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeneratingLimits {
    /// `‖𝔊₁(t) Π f − 𝔤_s(t) Π f‖₁` along the sweep.
    pub first: ConvergenceReport,
    /// `‖ε^{−1} 𝔊₂(t) Π f‖₁` per `(ε, t)`, same layout as `first.rows`.
    pub second: Vec<ConvergenceRow>,
    /// The second quantity decreases strictly in `ε` at every time.
    pub second_decreasing: bool,
}

/// Mean-field behaviour of the generating operators on products of `f`:
/// `𝔊₁` approaches the dressed correlation and `ε^{−1}𝔊₂` vanishes.
pub fn generating_operator_limits(
    problem: &VlasovProblem,
    spec: &SweepSpec,
    s: usize,
    window: RateWindow,
) -> Result<GeneratingLimits> {
    let f = problem.f1_0();
    let g = problem.correlations();
    let y: Vec<usize> = (1..=s).collect();
    let y2: Vec<usize> = (1..=s + 1).collect();
    let dressed: Vec<ManyBodyOperator> = spec.times().iter().map(|&t| problem.dressed_product(t, f, s)).collect::<Result<_>>()?;
    let per = per_epsilon(spec, |eps| {
        let props = Propagators::new(problem.model().with_epsilon(eps)?);
        spec.times()
            .iter()
            .zip(&dressed)
            .map(|(&t, d)| {
                let g1 = generating_operator(&props, t, &ClusterArgument::with_extras(s, 0), g, &product(f, &y)?)?;
                let g2 = generating_operator(&props, t, &ClusterArgument::with_extras(s, 1), g, &product(f, &y2)?)?;
                Ok((g1.minus(d)?.trace_norm()?, g2.trace_norm()? / eps))
            })
            .collect::<Result<Vec<(f64, f64)>>>()
    })?;
    let first_err: Vec<Vec<f64>> = per.iter().map(|r| r.iter().map(|p| p.0).collect()).collect();
    let first = ConvergenceReport::from_errors(&format!("generating_first_s{s}"), spec, &first_err, window);
    let mut second = Vec::new();
    for (i, &eps) in spec.epsilons().iter().enumerate() {
        for (j, &t) in spec.times().iter().enumerate() {
            second.push(ConvergenceRow { epsilon: eps, t, error: per[i][j].1 });
        }
    }
    let second_decreasing = (0..spec.times().len()).all(|j| per.windows(2).all(|w| w[1][j].1 < w[0][j].1));
    Ok(GeneratingLimits { first, second, second_decreasing })
}
