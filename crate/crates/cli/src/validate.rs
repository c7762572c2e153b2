//! Static checks run before any experiment. A valid configuration yields
//! no diagnostics.

use std::collections::BTreeSet;
use std::fmt;

use qkinlab::scaling::SweepSpec;

use crate::config::{build, experiment_seed, Config, CorrelationSpec, Experiment, Kind, OperatorSpec, StateSpec};
use crate::experiments::{correlation_order, limit_t0, resolve_times};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub experiment: Option<String>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let level = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        match &self.experiment {
            Some(name) => write!(f, "{level} [{name}]: {}", self.message),
            None => write!(f, "{level}: {}", self.message),
        }
    }
}

/// Random correlations above this order are slow to symmetrise.
const RANDOM_CORRELATION_ORDER: usize = 7;

pub fn validate(config: &Config) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if config.experiments.is_empty() {
        out.push(Diagnostic { severity: Severity::Error, experiment: None, message: "no experiments".into() });
    }
    let mut seen = BTreeSet::new();
    for (i, exp) in config.experiments.iter().enumerate() {
        if !seen.insert(exp.name.as_str()) {
            out.push(Diagnostic { severity: Severity::Error, experiment: Some(exp.name.clone()), message: "duplicate experiment name".into() });
        }
        check_experiment(exp, experiment_seed(config, i), &mut out);
    }
    out
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(|d| d.severity == Severity::Error)
}

fn check_experiment(exp: &Experiment, seed: u64, out: &mut Vec<Diagnostic>) {
    let mut push = |severity, message: String| out.push(Diagnostic { severity, experiment: Some(exp.name.clone()), message });
    let c = &exp.controls;
    if exp.name.is_empty() {
        push(Severity::Error, "empty experiment name".into());
    }
    for (what, v) in [("tolerance", c.tolerance), ("ode_tolerance", c.ode_tolerance), ("dt", c.dt)] {
        if !(v > 0.0 && v.is_finite()) {
            push(Severity::Error, format!("{what} must be positive, got {v}"));
        }
    }
    if c.quadrature_nodes < 4 {
        push(Severity::Error, format!("quadrature_nodes must be at least 4, got {}", c.quadrature_nodes));
    }
    if c.times.is_empty() || c.times.iter().any(|t| !t.is_finite() || *t < 0.0) {
        push(Severity::Error, "times must be a nonempty list of nonnegative numbers".into());
    }
    if matches!(exp.kind, Kind::Observables | Kind::Meanfield) && c.s == 0 {
        push(Severity::Error, "s must be at least 1".into());
    }
    if matches!(exp.kind, Kind::Observables) && c.s > c.n_max {
        push(Severity::Warning, format!("s = {} exceeds n_max = {}; only orders up to n_max are checked", c.s, c.n_max));
    }
    if let CorrelationSpec::Random { .. } = exp.initial.correlations {
        if correlation_order(exp) >= RANDOM_CORRELATION_ORDER {
            push(Severity::Warning, format!("random correlations of order {} are expensive to build", correlation_order(exp)));
        }
    }
    let built = match build(exp, seed, correlation_order(exp)) {
        Ok(b) => b,
        Err(e) => {
            push(Severity::Error, e);
            return;
        }
    };
    if let Err(e) = built.correlations.validate_symmetry(1e-10) {
        push(Severity::Error, format!("correlations: {e}"));
    }
    let f1_norm = built.f1.trace_norm().unwrap_or(f64::NAN);
    if matches!(exp.kind, Kind::Kinetic) {
        // F₁⁰ enters the series at every order
        if !(f1_norm < (-1.0f64).exp()) {
            push(Severity::Warning, format!("‖F₁⁰‖₁ = {f1_norm:.3} is not below 1/e; the series may not converge"));
        }
    }
    if matches!(exp.kind, Kind::Meanfield) {
        let bound = (-(3.0 * c.s as f64 + 2.0)).exp();
        if !(f1_norm < bound) {
            push(Severity::Warning, format!("‖f₁⁰‖₁ = {f1_norm:.3e} is not below e^-(3s+2) = {bound:.3e}; observed rates are outside the proven regime"));
        }
        let t0 = limit_t0(&built).unwrap_or(f64::NAN);
        if let Err(e) = SweepSpec::new(c.epsilons.clone(), resolve_times(exp, t0)) {
            push(Severity::Error, format!("sweep: {e}"));
        }
    }
    if matches!(exp.kind, Kind::Vlasov | Kind::Meanfield) {
        match limit_t0(&built) {
            Ok(t0) => {
                let tmax = resolve_times(exp, t0).into_iter().fold(0.0, f64::max);
                if tmax >= t0 {
                    push(Severity::Error, format!("time {tmax} is not below the convergence radius t0 = {t0:.6}"));
                }
            }
            Err(e) => push(Severity::Error, e.to_string()),
        }
    }
    if matches!(exp.kind, Kind::Gp) {
        if !matches!(exp.model.pair, OperatorSpec::OnSite { .. }) {
            push(Severity::Error, "gp needs the on_site pair preset".into());
        }
        if !matches!(exp.initial.f1, StateSpec::RandomPure | StateSpec::Entries { .. }) {
            push(Severity::Error, "gp needs a pure one-particle state".into());
        } else {
            let purity = built.f1.compose(&built.f1).map(|p| (p.trace().re - 1.0).abs()).unwrap_or(f64::NAN);
            if !(purity < 1e-10) {
                push(Severity::Error, format!("one-particle state is not a rank-one projector (|Tr f² − 1| = {purity:.3e})"));
            }
        }
    }
}
