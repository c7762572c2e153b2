//! Experiment runners. Each returns its rows in a fixed order.

use qkinlab::cluster::{dual_cumulant, enumerate_partitions, particle_cumulant};
use qkinlab::dual_hierarchy::{dual_bbgky_residual, integrate_dual_vlasov, limit_marginal_observable, marginal_observable};
use qkinlab::ode::StepControl;
use qkinlab::quadrature::{QuadratureSpec, Scheme};
use qkinlab::scaling::{generating_operator_limits, sweep_correlations, sweep_observables, sweep_states, ConvergenceReport, RateWindow, SweepSpec};
use qkinlab::state_functionals::{duality_check, gqke_residual, kinetic_series, CorrelatedState};
use qkinlab::vlasov::{gp_evolution, integrate_vlasov, vlasov_series_on, Stepping, VlasovProblem};
use qkinlab::{ManyBodyOperator, NormWeight, OperatorSequence, Propagators};

use crate::config::{build, Built, Experiment, Kind, TimeUnit};
use crate::output::{Row, Status, Value};

pub const INVERSION_TOL: f64 = 1e-10;
pub const VANISHING_TOL: f64 = 1e-12;
pub const CONSERVATION_TOL: f64 = 1e-10;
pub const PURITY_TOL: f64 = 1e-8;
const RICHARDSON_TARGET: f64 = 4.0;
const RICHARDSON_HALF_WIDTH: f64 = 0.5;

/// Largest correlation order an experiment needs.
pub fn correlation_order(exp: &Experiment) -> usize {
    let c = &exp.controls;
    match exp.kind {
        Kind::Identities | Kind::Gp => 2,
        Kind::Observables => c.n_max.max(2),
        Kind::Kinetic => (c.n_trunc + 1).max(c.n_max).max(2),
        Kind::Vlasov => (c.n_trunc + 1).max(2),
        Kind::Meanfield => (c.n_trunc + 1).max(c.s + 2),
    }
}

pub struct Context<'a> {
    pub exp: &'a Experiment,
    pub built: Built,
    pub force: bool,
}

impl Context<'_> {
    fn row(&self, t: Option<f64>, epsilon: Option<f64>, quantity: String, value: f64, tolerance: Option<f64>, status: Status, source: &'static str) -> Row {
        Row { experiment: self.exp.name.clone(), t, epsilon, quantity, value: Value::Num(value), tolerance, status, source }
    }

    /// Passes when `value ≤ tolerance`.
    fn bound(&self, t: Option<f64>, epsilon: Option<f64>, quantity: String, value: f64, tolerance: f64, source: &'static str) -> Row {
        let status = if value <= tolerance { Status::Pass } else { Status::Fail };
        self.row(t, epsilon, quantity, value, Some(tolerance), status, source)
    }

    fn info(&self, t: Option<f64>, epsilon: Option<f64>, quantity: String, value: f64, source: &'static str) -> Row {
        self.row(t, epsilon, quantity, value, None, Status::Info, source)
    }

    fn epsilon(&self) -> f64 {
        self.built.model.epsilon()
    }

    fn ctl(&self) -> StepControl {
        StepControl { tol: self.exp.controls.ode_tolerance, ..StepControl::default() }
    }

    fn problem(&self) -> qkinlab::Result<VlasovProblem> {
        VlasovProblem::new(&self.built.model, self.built.f1.clone(), self.built.correlations.clone())
    }
}

/// Requested times, converted from units of `t₀` when asked.
pub fn resolve_times(exp: &Experiment, t0: f64) -> Vec<f64> {
    match exp.controls.time_unit {
        TimeUnit::Absolute => exp.controls.times.clone(),
        TimeUnit::T0 => exp.controls.times.iter().map(|f| f * t0).collect(),
    }
}

pub fn limit_t0(built: &Built) -> qkinlab::Result<f64> {
    VlasovProblem::new(&built.model, built.f1.clone(), built.correlations.clone())?.t0()
}

pub fn run(exp: &Experiment, seed: u64, force: bool) -> Result<Vec<Row>, String> {
    let built = build(exp, seed, correlation_order(exp))?;
    let mut ctx = Context { exp, built, force };
    let rows = match exp.kind {
        Kind::Identities => identities(&mut ctx),
        Kind::Observables => observables(&mut ctx),
        Kind::Kinetic => kinetic(&mut ctx),
        Kind::Vlasov => vlasov(&ctx),
        Kind::Gp => gp(&ctx),
        Kind::Meanfield => meanfield(&mut ctx),
    };
    rows.map_err(|e| e.to_string())
}

fn labels(n: usize) -> Vec<usize> {
    (1..=n).collect()
}

fn identities(ctx: &mut Context) -> qkinlab::Result<Vec<Row>> {
    let props = Propagators::new(ctx.built.model.clone());
    let d = props.dim();
    let eps = Some(ctx.epsilon());
    let mut rows = Vec::new();
    for k in 1..=4 {
        let g = ctx.built.sampler.hermitian(d, k);
        for &t in &ctx.exp.controls.times {
            let mut sum = ManyBodyOperator::zeros(d, labels(k))?;
            for partition in enumerate_partitions(&labels(k))? {
                let mut term = g.clone();
                for block in partition.blocks() {
                    term = particle_cumulant(&props, t, block, &term)?;
                }
                sum = sum.plus(&term)?;
            }
            let err = sum.minus(&props.heisenberg_group(t, &g)?)?.trace_norm()?;
            rows.push(ctx.bound(Some(t), eps, format!("cumulant_inversion_k{k}"), err, INVERSION_TOL, "cluster::particle_cumulant"));
        }
    }
    for n in 1..=3 {
        let target = ctx.built.sampler.general(d, n + 1);
        let heis = particle_cumulant(&props, 0.0, &labels(n + 1), &target)?.operator_norm()?;
        let schr = dual_cumulant(&props, 0.0, &labels(n + 1), &target)?.operator_norm()?;
        rows.push(ctx.bound(Some(0.0), eps, format!("cumulant_at_zero_n{}", n + 1), heis, VANISHING_TOL, "cluster::particle_cumulant"));
        rows.push(ctx.bound(Some(0.0), eps, format!("dual_cumulant_at_zero_n{}", n + 1), schr, VANISHING_TOL, "cluster::dual_cumulant"));
    }
    let g = ctx.built.sampler.general(d, 2);
    let f = ctx.built.sampler.general(d, 2);
    for &t in &ctx.exp.controls.times {
        let lhs = props.heisenberg_group(t, &g)?.compose(&f)?.trace();
        let rhs = g.compose(&props.schrodinger_group(t, &f)?)?.trace();
        rows.push(ctx.bound(Some(t), eps, "group_trace_duality".into(), (lhs - rhs).norm(), INVERSION_TOL, "propagators::schrodinger_group"));
        let twice = props.heisenberg_group(t, &props.heisenberg_group(t, &g)?)?;
        let law = twice.minus(&props.heisenberg_group(2.0 * t, &g)?)?.trace_norm()?;
        rows.push(ctx.bound(Some(t), eps, "group_law".into(), law, INVERSION_TOL, "propagators::heisenberg_group"));
    }
    Ok(rows)
}

fn observables(ctx: &mut Context) -> qkinlab::Result<Vec<Row>> {
    let c = &ctx.exp.controls;
    let props = Propagators::new(ctx.built.model.clone());
    let d = props.dim();
    let eps = Some(ctx.epsilon());
    let b0 = ctx.built.sampler.symmetric_sequence(d, c.n_max, 1.0);
    let mut rows = Vec::new();
    for s in 1..=c.s.min(c.n_max) {
        for &t in &c.times {
            let coarse = dual_bbgky_residual(&props, t, s, &b0, c.dt)?;
            let fine = dual_bbgky_residual(&props, t, s, &b0, 0.5 * c.dt)?;
            rows.push(ctx.info(Some(t), eps, format!("bbgky_residual_s{s}"), coarse, "dual_hierarchy::dual_bbgky_residual"));
            let (ratio, status) = if coarse.max(fine) < 1e-14 {
                (0.0, Status::Pass)
            } else {
                let r = coarse / fine;
                (r, if (r - RICHARDSON_TARGET).abs() <= RICHARDSON_HALF_WIDTH { Status::Pass } else { Status::Fail })
            };
            rows.push(ctx.row(Some(t), eps, format!("bbgky_richardson_s{s}"), ratio, Some(RICHARDSON_HALF_WIDTH), status, "dual_hierarchy::dual_bbgky_residual"));
        }
    }
    let weight = NormWeight::new(0.2)?;
    let factor = weight.evolution_bound_factor().expect("γ below 1/e");
    let initial = b0.sequence_norm(weight)?;
    for &t in &c.times {
        let comps = (0..=c.n_max)
            .map(|n| if n == 0 { Ok(b0.get(0)?.clone()) } else { marginal_observable(&props, t, n, &b0) })
            .collect::<qkinlab::Result<Vec<_>>>()?;
        let ratio = OperatorSequence::new(d, comps)?.sequence_norm(weight)? / (factor * initial);
        rows.push(ctx.bound(Some(t), eps, "norm_bound_ratio".into(), ratio, 1.0, "dual_hierarchy::marginal_observable"));
    }
    // limit hierarchy two ways
    let quad = QuadratureSpec::new(Scheme::GaussLegendre, c.quadrature_nodes, None)?;
    let mut grid = vec![0.0];
    grid.extend(c.times.iter().copied().filter(|t| *t > 0.0));
    let (ode, _) = integrate_dual_vlasov(&ctx.built.model, &grid, &b0, ctx.ctl())?;
    for (i, &t) in grid.iter().enumerate().skip(1) {
        for s in 1..=c.s.min(c.n_max) {
            let q = limit_marginal_observable(&props, t, s, &b0, &quad)?;
            let gap = ode.evolved()[i].get(s)?.minus(&q.value)?.operator_norm()?;
            rows.push(ctx.bound(Some(t), None, format!("limit_rk4_vs_quadrature_s{s}"), gap, c.tolerance, "dual_hierarchy::integrate_dual_vlasov"));
            rows.push(ctx.info(Some(t), None, format!("limit_refinement_gap_s{s}"), q.refinement_gap, "dual_hierarchy::limit_marginal_observable"));
        }
    }
    Ok(rows)
}

fn kinetic(ctx: &mut Context) -> qkinlab::Result<Vec<Row>> {
    let c = &ctx.exp.controls;
    let props = Propagators::new(ctx.built.model.clone());
    let eps = ctx.epsilon();
    let state = CorrelatedState::new(ctx.built.f1.clone(), ctx.built.correlations.clone(), eps)?;
    let b = ctx.built.sampler.hermitian(props.dim(), 1);
    let b0 = OperatorSequence::additive(&b, c.n_trunc + 1)?;
    let tr0 = ctx.built.f1.trace();
    let mut rows = Vec::new();
    for &t in &c.times {
        let series = kinetic_series(&props, t, &state, c.n_trunc)?;
        rows.push(ctx.bound(Some(t), Some(eps), "trace_F1".into(), (series.value.trace() - tr0).norm(), CONSERVATION_TOL, "state_functionals::kinetic_series"));
        rows.push(ctx.info(Some(t), Some(eps), "last_series_term".into(), *series.term_norms.last().expect("terms"), "state_functionals::kinetic_series"));
        let duality = duality_check(&props, t, &b0, &state, c.n_trunc + 1)?;
        rows.push(ctx.bound(Some(t), Some(eps), "additive_duality_residual".into(), duality.residual, c.tolerance, "state_functionals::duality_check"));
        let residual = gqke_residual(&props, t, &state, c.dt, c.n_trunc)?;
        rows.push(ctx.info(Some(t), Some(eps), "kinetic_equation_residual".into(), residual, "state_functionals::gqke_residual"));
    }
    Ok(rows)
}

fn vlasov(ctx: &Context) -> qkinlab::Result<Vec<Row>> {
    let c = &ctx.exp.controls;
    let problem = ctx.problem()?;
    let t0 = problem.t0()?;
    let times = resolve_times(ctx.exp, t0);
    let mut rows = vec![ctx.info(None, None, "t0".into(), t0, "vlasov::VlasovProblem::t0")];
    let mut grid = vec![0.0];
    grid.extend(times.iter().copied().filter(|t| *t > 0.0));
    let direct = integrate_vlasov(&problem, &grid, Stepping::Fixed(c.dt))?;
    let series = vlasov_series_on(&problem, &grid[1..], c.n_trunc, ctx.force, ctx.ctl())?;
    for (i, s) in series.iter().enumerate() {
        let t = grid[i + 1];
        let gap = s.value.minus(&direct.states[i + 1])?.trace_norm()?;
        rows.push(ctx.bound(Some(t), None, "series_direct_gap".into(), gap, c.tolerance, "vlasov::vlasov_series"));
    }
    let last = grid.last().copied();
    rows.push(ctx.bound(last, None, "trace_drift".into(), direct.trace_drift, CONSERVATION_TOL, "vlasov::integrate_vlasov"));
    let chaotic = ctx.built.correlations.get(2)?.max_abs_diff(&ManyBodyOperator::identity(problem.model().dim(), vec![1, 2])?)? == 0.0;
    if chaotic {
        rows.push(ctx.bound(last, None, "hermiticity_drift".into(), direct.hermiticity_drift, CONSERVATION_TOL, "vlasov::integrate_vlasov"));
    } else {
        rows.push(ctx.info(last, None, "hermiticity_drift".into(), direct.hermiticity_drift, "vlasov::integrate_vlasov"));
    }
    Ok(rows)
}

fn gp(ctx: &Context) -> qkinlab::Result<Vec<Row>> {
    let c = &ctx.exp.controls;
    let problem = ctx.problem()?;
    let mut grid = vec![0.0];
    grid.extend(c.times.iter().copied().filter(|t| *t > 0.0));
    let stepping = Stepping::Adaptive(ctx.ctl());
    let traj = integrate_vlasov(&problem, &grid, stepping)?;
    let profiles = gp_evolution(&problem, &grid, stepping, PURITY_TOL)?;
    let mut rows = Vec::new();
    for ((t, f), p) in grid.iter().zip(&traj.states).zip(&profiles).skip(1) {
        let purity = (f.compose(f)?.trace().re - 1.0).abs();
        rows.push(ctx.bound(Some(*t), None, "purity_defect".into(), purity, PURITY_TOL, "vlasov::integrate_vlasov"));
        let gap = f.minus(&p.projector()?)?.trace_norm()?;
        rows.push(ctx.bound(Some(*t), None, "projector_gap".into(), gap, c.tolerance, "vlasov::gp_evolution"));
    }
    Ok(rows)
}

fn report_rows(ctx: &Context, report: &ConvergenceReport, source: &'static str, rows: &mut Vec<Row>) {
    let q = &report.quantity;
    for r in &report.rows {
        rows.push(ctx.info(Some(r.t), Some(r.epsilon), format!("{q}_error"), r.error, source));
    }
    let eps = report.rows.iter().map(|r| r.epsilon).fold(Vec::<f64>::new(), |mut acc, e| {
        if !acc.contains(&e) {
            acc.push(e);
        }
        acc
    });
    let (rlo, rhi) = report.window.ratio;
    let (olo, ohi) = report.window.order;
    for s in &report.summaries {
        let inside = |v: f64, lo: f64, hi: f64| if s.exact || (v >= lo && v <= hi) { Status::Pass } else { Status::Fail };
        for (i, ratio) in s.ratios.iter().enumerate() {
            let v = if s.exact { 0.0 } else { *ratio };
            rows.push(ctx.row(Some(s.t), Some(eps[i + 1]), format!("{q}_ratio"), v, Some(0.5 * (rhi - rlo)), inside(*ratio, rlo, rhi), source));
        }
        let v = if s.exact { 0.0 } else { s.order };
        rows.push(ctx.row(Some(s.t), None, format!("{q}_order"), v, Some(0.5 * (ohi - olo)), inside(s.order, olo, ohi), source));
    }
}

fn meanfield(ctx: &mut Context) -> qkinlab::Result<Vec<Row>> {
    let c = &ctx.exp.controls;
    let problem = ctx.problem()?;
    let times = resolve_times(ctx.exp, problem.t0()?);
    let spec = SweepSpec::new(c.epsilons.clone(), times)?;
    let window = RateWindow::default();
    let mut rows = Vec::new();
    if c.s <= 3 {
        let b0 = ctx.built.sampler.symmetric_sequence(problem.model().dim(), c.s, 1.0);
        let quad = QuadratureSpec::new(Scheme::GaussLegendre, c.quadrature_nodes, None)?;
        let r = sweep_observables(&ctx.built.model, &spec, c.s, &b0, &quad, window)?;
        report_rows(ctx, &r, "scaling::sweep_observables", &mut rows);
    }
    let r = sweep_states(&problem, &spec, c.n_trunc, ctx.ctl(), window)?;
    report_rows(ctx, &r, "scaling::sweep_states", &mut rows);
    let r = sweep_correlations(&problem, &spec, c.s.clamp(2, 3), c.n_trunc, 2, ctx.ctl(), window)?;
    report_rows(ctx, &r, "scaling::sweep_correlations", &mut rows);
    let limits = generating_operator_limits(&problem, &spec, c.s.max(2), RateWindow { ratio: (1.6, 2.4), order: (1.6f64.log2(), 2.4f64.log2()) })?;
    report_rows(ctx, &limits.first, "scaling::generating_operator_limits", &mut rows);
    for r in &limits.second {
        rows.push(ctx.info(Some(r.t), Some(r.epsilon), format!("generating_second_s{}", c.s.max(2)), r.error, "scaling::generating_operator_limits"));
    }
    let status = if limits.second_decreasing { Status::Pass } else { Status::Fail };
    rows.push(ctx.row(None, None, "generating_second_decreasing".into(), f64::from(u8::from(limits.second_decreasing)), None, status, "scaling::generating_operator_limits"));
    Ok(rows)
}
