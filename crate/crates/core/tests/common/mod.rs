//! Independent reference evaluations shared by the integration tests.
#![allow(dead_code)]

use qkinlab::random::Sampler;
use qkinlab::state_functionals::{state_component, CorrelatedState};
use qkinlab::{InteractionModel, ManyBodyOperator, Propagators, C64};

pub fn model(seed: u64, dim: usize, eps: f64) -> InteractionModel {
    let mut s = Sampler::new(seed);
    InteractionModel::new(s.hermitian(dim, 1), s.symmetric_hermitian(dim, 2), eps).unwrap()
}

pub fn props(seed: u64, dim: usize, eps: f64) -> Propagators {
    Propagators::new(model(seed, dim, eps))
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn labels(n: usize) -> Vec<usize> {
    (1..=n).collect()
}

/// Marginal `F_s(t)` of the correlated state evolved sector by sector.
///
/// The marginals `F⁰_n = g_n ΠF₁⁰` are first turned into Fock-space
/// components `D_n = Σ_k (−1)^k/k! Tr_{n+1..n+k} F⁰_{n+k}`, each `D_n` is
/// evolved with the full `n`-particle unitary, and the marginal is
/// reassembled as `Σ_m (1/m!) Tr_{s+1..s+m} D_{s+m}(t)`. Only sectors with at
/// most `cutoff` particles are kept, so the result contains exactly the
/// orders `≤ cutoff` in `F₁⁰`.
pub fn fock_marginal(props: &Propagators, t: f64, state: &CorrelatedState, s: usize, cutoff: usize) -> ManyBodyOperator {
    let initial: Vec<ManyBodyOperator> = (0..=cutoff).map(|n| state_component(state, n).unwrap()).collect();
    let mut out = ManyBodyOperator::zeros(state.dim(), labels(s)).unwrap();
    for m in 0..=(cutoff - s) {
        let n = s + m;
        let mut d = ManyBodyOperator::zeros(state.dim(), labels(n)).unwrap();
        for k in 0..=(cutoff - n) {
            let reduced = initial[n + k].partial_trace(&labels(n)).unwrap();
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            d = d.plus(&reduced.scaled_re(sign / factorial(k))).unwrap();
        }
        let evolved = props.schrodinger_group(t, &d).unwrap();
        out = out.plus(&evolved.partial_trace(&labels(s)).unwrap().scaled_re(1.0 / factorial(m))).unwrap();
    }
    out
}

/// `max |a − b|` over entries.
pub fn gap(a: &ManyBodyOperator, b: &ManyBodyOperator) -> f64 {
    a.max_abs_diff(b).unwrap()
}

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}
