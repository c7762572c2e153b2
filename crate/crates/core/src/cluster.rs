//! Set partitions and the cumulant-type operators built from them.
//!
//! A cumulant of groups is the alternating partition sum
//! `Σ_P (-1)^{|P|-1}(|P|-1)! Π_{X∈P} G_{|θ(X)|}(t, θ(X))`, where the elements
//! being partitioned are either single particles or a cluster of particles
//! that is never split (the declusterization `θ` flattens a block back into
//! particle labels). Products of groups over the blocks of a partition act
//! on disjoint particles and are applied as one tensor-product conjugation.

use itertools::Itertools;

use crate::error::{Error, Result};
use crate::operator::{ManyBodyOperator, OperatorSequence};
use crate::propagators::{Picture, Propagators};

/// Ground sets larger than this are rejected by [`enumerate_partitions`].
pub const MAX_PARTITION_GROUND: usize = 8;
/// Largest total particle number `s + n` accepted by [`generating_operator`].
pub const MAX_GENERATING_PARTICLES: usize = 7;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition<T> {
    blocks: Vec<Vec<T>>,
}

impl<T> Partition<T> {
    pub fn blocks(&self) -> &[Vec<T>] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// `(-1)^{|P|-1} (|P|-1)!`
    pub fn cumulant_weight(&self) -> f64 {
        let k = self.blocks.len();
        let fact: f64 = (1..k).map(|i| i as f64).product();
        if k % 2 == 1 {
            fact
        } else {
            -fact
        }
    }
}

/// All set partitions of `ground`, generated from restricted growth strings.
pub fn enumerate_partitions<T: Clone>(ground: &[T]) -> Result<Vec<Partition<T>>> {
    let n = ground.len();
    if n == 0 || n > MAX_PARTITION_GROUND {
        return Err(Error::OutOfRange { what: "partition ground set", value: n, allowed: format!("1..={MAX_PARTITION_GROUND}") });
    }
    let mut out = Vec::new();
    // a[i] is the block index of element i; a[i] <= 1 + max(a[..i])
    let mut a = vec![0usize; n];
    loop {
        let k = a.iter().copied().max().unwrap_or(0) + 1;
        let mut blocks: Vec<Vec<T>> = vec![Vec::new(); k];
        for (i, &b) in a.iter().enumerate() {
            blocks[b].push(ground[i].clone());
        }
        out.push(Partition { blocks });

        // next restricted growth string
        let mut i = n - 1;
        loop {
            if i == 0 {
                return Ok(out);
            }
            let prefix_max = a[..i].iter().copied().max().unwrap_or(0);
            if a[i] <= prefix_max {
                a[i] += 1;
                for x in a.iter_mut().skip(i + 1) {
                    *x = 0;
                }
                break;
            }
            i -= 1;
        }
    }
}

/// Bell numbers from the Bell triangle.
pub fn bell_number(n: usize) -> u64 {
    let mut row = vec![1u64];
    for _ in 0..n {
        let mut next = vec![*row.last().expect("nonempty row")];
        for &x in &row {
            let last = *next.last().expect("nonempty row");
            next.push(last + x);
        }
        row = next;
    }
    row[0]
}

/// Argument `({Y∖X}, X)` of a cumulant: the host set `Y`, the distinguished
/// particles `X ⊆ Y`, and the cluster `Y∖X` treated as a single element.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterArgument {
    host: Vec<usize>,
    distinguished: Vec<usize>,
}

impl ClusterArgument {
    pub fn new(host: Vec<usize>, distinguished: Vec<usize>) -> Result<Self> {
        for (i, l) in host.iter().enumerate() {
            if host[..i].contains(l) {
                return Err(Error::DuplicateLabel(*l));
            }
        }
        for (i, l) in distinguished.iter().enumerate() {
            if !host.contains(l) {
                return Err(Error::LabelNotInHost(*l));
            }
            if distinguished[..i].contains(l) {
                return Err(Error::DuplicateLabel(*l));
            }
        }
        Ok(Self { host, distinguished })
    }

    /// Cluster `{Y}` on `1..=s` with extra particles `s+1..=s+n`.
    pub fn with_extras(s: usize, n: usize) -> Self {
        Self { host: (1..=s + n).collect(), distinguished: (s + 1..=s + n).collect() }
    }

    pub fn host(&self) -> &[usize] {
        &self.host
    }

    pub fn distinguished(&self) -> &[usize] {
        &self.distinguished
    }

    /// `Y∖X`, in host order.
    pub fn cluster(&self) -> Vec<usize> {
        self.host.iter().copied().filter(|l| !self.distinguished.contains(l)).collect()
    }

    /// Label groups of the cumulant elements: the cluster first, then one
    /// singleton per distinguished particle.
    pub fn elements(&self) -> Vec<Vec<usize>> {
        std::iter::once(self.cluster())
            .chain(self.distinguished.iter().map(|&j| vec![j]))
            .collect()
    }

    /// `θ`: flattens a block of elements into particle labels.
    pub fn declusterize(elements: &[Vec<usize>]) -> Vec<usize> {
        elements.iter().flatten().copied().collect()
    }
}

/// Alternating partition sum of group conjugations over `elements`, applied
/// to `x` (whose labels must contain every element label).
fn cumulant_of_groups(
    props: &Propagators,
    t: f64,
    elements: &[Vec<usize>],
    x: &ManyBodyOperator,
    picture: Picture,
) -> Result<ManyBodyOperator> {
    for l in elements.iter().flatten() {
        if !x.labels().contains(l) {
            return Err(Error::LabelNotInHost(*l));
        }
    }
    let mut acc = ManyBodyOperator::zeros(x.dim(), x.labels().to_vec())?;
    for partition in enumerate_partitions(elements)? {
        let blocks: Vec<Vec<usize>> = partition.blocks().iter().map(|b| ClusterArgument::declusterize(b)).collect();
        let term = props.conjugate_blocks(t, &blocks, x, picture)?;
        acc = acc.plus(&term.scaled_re(partition.cumulant_weight()))?;
    }
    Ok(acc)
}

/// `𝔄_{1+n}(t, {Y∖X}, X)` applied to `target`, an operator on the cluster
/// `Y∖X` that is embedded into `Y` first. The result acts on `Y`.
pub fn cumulant(props: &Propagators, t: f64, arg: &ClusterArgument, target: &ManyBodyOperator) -> Result<ManyBodyOperator> {
    let cluster = arg.cluster();
    let same = target.n_particles() == cluster.len() && cluster.iter().all(|l| target.labels().contains(l));
    if !same {
        return Err(Error::LabelMismatch { left: cluster, right: target.labels().to_vec() });
    }
    let embedded = target.embed(arg.host())?;
    cumulant_of_groups(props, t, &arg.elements(), &embedded, Picture::Heisenberg)
}

/// `𝔄_n(t, 1, …, n)` over the single particles `labels`, applied to an
/// operator `target` that already acts on (at least) those particles.
pub fn particle_cumulant(props: &Propagators, t: f64, labels: &[usize], target: &ManyBodyOperator) -> Result<ManyBodyOperator> {
    let elements: Vec<Vec<usize>> = labels.iter().map(|&l| vec![l]).collect();
    cumulant_of_groups(props, t, &elements, target, Picture::Heisenberg)
}

/// Dual cumulant `𝔄*_{1+n}(t, 1, …, n+1)` over the single particles `labels`.
pub fn dual_cumulant(props: &Propagators, t: f64, labels: &[usize], target: &ManyBodyOperator) -> Result<ManyBodyOperator> {
    let elements: Vec<Vec<usize>> = labels.iter().map(|&l| vec![l]).collect();
    cumulant_of_groups(props, t, &elements, target, Picture::Schrodinger)
}

/// Dual cumulant with a cluster, `𝔄*_{1+n}(t, {Y}, X∖Y)`, where `{Y}` is the
/// argument's cluster and `X∖Y` its distinguished particles.
pub fn dual_cluster_cumulant(
    props: &Propagators,
    t: f64,
    arg: &ClusterArgument,
    target: &ManyBodyOperator,
) -> Result<ManyBodyOperator> {
    cumulant_of_groups(props, t, &arg.elements(), target, Picture::Schrodinger)
}

/// `(𝔄*_1)^{-1}(t, label) = G*_1(-t, label)`.
pub fn inverse_first_cumulant(props: &Propagators, t: f64, label: usize, target: &ManyBodyOperator) -> Result<ManyBodyOperator> {
    props.group_on(-t, &[label], target, Picture::Schrodinger)
}

/// Scattering cumulant `Ă_{1+n}(t, {Y}, X∖Y)` applied to `x`:
/// inverse one-particle flows on every particle of `Y ∪ X∖Y`, then left
/// multiplication by the correlation operator `g_{s+n}`, then the dual
/// cluster cumulant. `x` may carry further particles, on which the map acts
/// as the identity.
pub fn scattering_cumulant(
    props: &Propagators,
    t: f64,
    arg: &ClusterArgument,
    correlations: &OperatorSequence,
    x: &ManyBodyOperator,
) -> Result<ManyBodyOperator> {
    let particles = arg.host();
    if arg.cluster().is_empty() {
        return Err(Error::InvalidArgument("scattering cumulant needs a nonempty cluster".into()));
    }
    let g = correlations.on_labels(particles)?.embed(x.labels())?;
    let unflowed = props.free_flow(-t, particles, x, Picture::Schrodinger)?;
    let dressed = g.compose(&unflowed)?;
    dual_cluster_cumulant(props, t, arg, &dressed)
}

/// Every way of sending each element of `items` to one of `n_targets` bins.
fn assignments(items: &[usize], n_targets: usize) -> Vec<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    let total = n_targets.pow(items.len() as u32);
    for code in 0..total {
        let mut bins = vec![Vec::new(); n_targets];
        let mut c = code;
        for &item in items {
            bins[c % n_targets].push(item);
            c /= n_targets;
        }
        out.push(bins);
    }
    out
}

/// Composite correction attached to the particle `host`, consuming the
/// extra particles `pool`. An empty pool is the identity; otherwise the
/// outermost node removes a nonempty block `B ⊆ pool`, and the rest of the
/// pool is shared between the host and the members of `B`, whose own
/// corrections are applied first.
fn apply_corrections(
    props: &Propagators,
    t: f64,
    host: usize,
    pool: &[usize],
    correlations: &OperatorSequence,
    x: &ManyBodyOperator,
) -> Result<ManyBodyOperator> {
    if pool.is_empty() {
        return Ok(x.clone());
    }
    let mut acc = ManyBodyOperator::zeros(x.dim(), x.labels().to_vec())?;
    for size in 1..=pool.len() {
        for block in pool.iter().copied().combinations(size) {
            let rest: Vec<usize> = pool.iter().copied().filter(|l| !block.contains(l)).collect();
            let mut hosts = vec![host];
            hosts.extend_from_slice(&block);
            for bins in assignments(&rest, hosts.len()) {
                let mut y = x.clone();
                for (h, sub) in hosts.iter().zip(&bins) {
                    y = apply_corrections(props, t, *h, sub, correlations, &y)?;
                }
                let mut node_host = vec![host];
                node_host.extend_from_slice(&block);
                let arg = ClusterArgument::new(node_host, block.clone())?;
                let term = scattering_cumulant(props, t, &arg, correlations, &y)?;
                acc = acc.minus(&term)?;
            }
        }
    }
    Ok(acc)
}

/// Generating operator `𝔊_{1+n}(t, {Y}, X∖Y)` of the marginal functionals,
/// applied to `f` (an operator on `Y ∪ X∖Y`).
///
/// The functional `F_s(t | F_1)` follows from the scattering-cumulant series
/// in the freely evolved one-particle operator `u` by eliminating `u` in
/// favour of `F_1 = Σ_n (1/n!) Tr Ă_{1+n}(t, 1, …) u^{⊗(1+n)}`. Solving for
/// `u` order by order gives nested corrections `u(p) = F_1(p) − Σ_B (1/|B|!)
/// Tr_B Ă(t, p, B)[u(p) ⊗ u^{⊗B}]`, and collecting all terms that use the
/// extra particles `X∖Y` yields `𝔊_{1+n}`: a root scattering cumulant on
/// `Y ∪ R` for every `R ⊆ X∖Y`, with the remaining particles distributed as
/// corrections over the root's particles, each correction carrying a sign.
/// For `n = 0` this is `Ă_1(t, {Y})`; for `n = 1` it is
/// `Ă_2(t, {Y}, s+1) − Ă_1(t, {Y}) Σ_i Ă_2(t, i, s+1)`.
pub fn generating_operator(
    props: &Propagators,
    t: f64,
    arg: &ClusterArgument,
    correlations: &OperatorSequence,
    f: &ManyBodyOperator,
) -> Result<ManyBodyOperator> {
    let total = arg.host().len();
    if total > MAX_GENERATING_PARTICLES {
        return Err(Error::OutOfRange {
            what: "generating operator particle count",
            value: total,
            allowed: format!("<= {MAX_GENERATING_PARTICLES}"),
        });
    }
    if correlations.n_max() < total {
        return Err(Error::MissingComponent(correlations.n_max() + 1));
    }
    let cluster = arg.cluster();
    let extras = arg.distinguished().to_vec();
    let mut acc = ManyBodyOperator::zeros(f.dim(), f.labels().to_vec())?;
    for size in 0..=extras.len() {
        for root in extras.iter().copied().combinations(size) {
            let rest: Vec<usize> = extras.iter().copied().filter(|l| !root.contains(l)).collect();
            let mut hosts = cluster.clone();
            hosts.extend_from_slice(&root);
            for bins in assignments(&rest, hosts.len()) {
                let mut y = f.clone();
                for (h, sub) in hosts.iter().zip(&bins) {
                    y = apply_corrections(props, t, *h, sub, correlations, &y)?;
                }
                let mut root_host = cluster.clone();
                root_host.extend_from_slice(&root);
                let root_arg = ClusterArgument::new(root_host, root.clone())?;
                acc = acc.plus(&scattering_cumulant(props, t, &root_arg, correlations, &y)?)?;
            }
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::Sampler;
    use crate::InteractionModel;

    fn props(seed: u64, eps: f64) -> Propagators {
        let mut s = Sampler::new(seed);
        Propagators::new(InteractionModel::new(s.hermitian(2, 1), s.symmetric_hermitian(2, 2), eps).unwrap())
    }

    /// Stirling-number recurrence, independent of the enumeration.
    fn bell_by_recurrence(n: usize) -> u64 {
        // B_{m+1} = Σ_k C(m, k) B_k
        let mut b = vec![1u64];
        for m in 0..n {
            let mut next = 0u64;
            let mut binom = 1u64;
            for k in 0..=m {
                next += binom * b[k];
                binom = binom * (m - k) as u64 / (k + 1) as u64;
            }
            b.push(next);
        }
        b[n]
    }

    #[test]
    fn partition_counts() {
        assert_eq!(enumerate_partitions(&[1]).unwrap().len(), 1);
        assert_eq!(enumerate_partitions(&[1, 2, 3]).unwrap().len(), 5);
        let five = enumerate_partitions(&[1, 2, 3, 4, 5]).unwrap();
        assert_eq!(five.len() as u64, bell_by_recurrence(5));
        assert_eq!(five.len(), 52);
        for n in 1..=8 {
            let ground: Vec<usize> = (0..n).collect();
            assert_eq!(enumerate_partitions(&ground).unwrap().len() as u64, bell_by_recurrence(n));
            assert_eq!(bell_number(n), bell_by_recurrence(n));
        }
        assert!(enumerate_partitions(&[0; 9]).is_err());
        assert!(enumerate_partitions::<u8>(&[]).is_err());
    }

    #[test]
    fn partitions_are_distinct_and_cover() {
        let ground = [1, 2, 3, 4];
        let parts = enumerate_partitions(&ground).unwrap();
        let mut canon: Vec<Vec<Vec<i32>>> = parts
            .iter()
            .map(|p| {
                let mut b: Vec<Vec<i32>> = p.blocks().iter().map(|x| { let mut y = x.clone(); y.sort(); y }).collect();
                b.sort();
                b
            })
            .collect();
        for p in &canon {
            let mut all: Vec<i32> = p.iter().flatten().copied().collect();
            all.sort();
            assert_eq!(all, ground);
        }
        canon.sort();
        canon.dedup();
        assert_eq!(canon.len(), parts.len());
    }

    #[test]
    fn cumulant_weights_sum_to_zero() {
        for n in 2..=6 {
            let ground: Vec<usize> = (0..n).collect();
            let s: f64 = enumerate_partitions(&ground).unwrap().iter().map(|p| p.cumulant_weight()).sum();
            assert_eq!(s, 0.0);
        }
    }

    #[test]
    fn cluster_argument_declusterizes_to_host() {
        let arg = ClusterArgument::new(vec![1, 2, 3, 4], vec![2, 4]).unwrap();
        assert_eq!(arg.cluster(), vec![1, 3]);
        let mut flat = ClusterArgument::declusterize(&arg.elements());
        flat.sort();
        assert_eq!(flat, vec![1, 2, 3, 4]);
        assert!(ClusterArgument::new(vec![1, 2], vec![3]).is_err());
    }

    #[test]
    fn first_and_second_cumulants() {
        let p = props(1, 0.8);
        let mut s = Sampler::new(2);
        let t = 0.9;
        let b = s.hermitian(2, 3);
        let a1 = cumulant(&p, t, &ClusterArgument::new(vec![1, 2, 3], vec![]).unwrap(), &b).unwrap();
        assert!(a1.max_abs_diff(&p.heisenberg_group(t, &b).unwrap()).unwrap() < 1e-13);

        let b2 = s.hermitian(2, 2).with_labels(vec![1, 3]).unwrap();
        let arg = ClusterArgument::new(vec![1, 2, 3], vec![2]).unwrap();
        let a2 = cumulant(&p, t, &arg, &b2).unwrap();
        let embedded = b2.embed(&[1, 2, 3]).unwrap();
        let full = p.heisenberg_group(t, &embedded).unwrap();
        let split = p.conjugate_blocks(t, &[vec![1, 3], vec![2]], &embedded, Picture::Heisenberg).unwrap();
        assert!(a2.max_abs_diff(&full.minus(&split).unwrap()).unwrap() < 1e-13);
    }

    #[test]
    fn higher_cumulants_vanish_at_zero_time_and_without_interaction() {
        let p = props(3, 0.8);
        let free = props(3, 0.0);
        let mut s = Sampler::new(4);
        for n in 1..=3 {
            let host: Vec<usize> = (1..=n + 1).collect();
            let arg = ClusterArgument::new(host.clone(), (2..=n + 1).collect()).unwrap();
            let b = s.hermitian(2, 1);
            assert!(cumulant(&p, 0.0, &arg, &b).unwrap().operator_norm().unwrap() < 1e-12);
            assert!(cumulant(&free, 1.3, &arg, &b).unwrap().operator_norm().unwrap() < 1e-12);
            let f = s.general(2, n + 1);
            assert!(dual_cumulant(&p, 0.0, &host, &f).unwrap().operator_norm().unwrap() < 1e-12);
            assert!(dual_cumulant(&free, 0.7, &host, &f).unwrap().operator_norm().unwrap() < 1e-12);
        }
    }

    #[test]
    fn dual_cumulants_low_orders() {
        let p = props(5, 1.2);
        let mut s = Sampler::new(6);
        let f1 = s.general(2, 1);
        let d1 = dual_cumulant(&p, 0.6, &[1], &f1).unwrap();
        assert!(d1.max_abs_diff(&p.schrodinger_group(0.6, &f1).unwrap()).unwrap() < 1e-14);

        let f = s.general(2, 2);
        let d2 = dual_cumulant(&p, 0.6, &[1, 2], &f).unwrap();
        // G*_2(t) − G*_1 ⊗ G*_1 from explicit unitaries
        let h2 = p.model().build_hamiltonian(2).unwrap().into_matrix();
        let k = p.model().kinetic().matrix().clone();
        let expm = |h: &nalgebra::DMatrix<crate::C64>, t: f64| {
            let e = h.clone().symmetric_eigen();
            let ph = e.eigenvalues.map(|x| crate::C64::new(0.0, -x * t).exp());
            &e.eigenvectors * nalgebra::DMatrix::from_diagonal(&ph) * e.eigenvectors.adjoint()
        };
        let u2 = expm(&h2, 0.6);
        let u1 = expm(&k, 0.6);
        let u11 = u1.kronecker(&u1);
        let want = &u2 * f.matrix() * u2.adjoint() - &u11 * f.matrix() * u11.adjoint();
        assert!((d2.matrix() - want).camax() < 1e-12);
    }

    #[test]
    fn inverse_first_cumulant_undoes_flow() {
        let p = props(7, 0.9);
        let mut s = Sampler::new(8);
        let f = s.general(2, 1);
        assert!(inverse_first_cumulant(&p, 0.0, 1, &f).unwrap().max_abs_diff(&f).unwrap() < 1e-14);
        let there = dual_cumulant(&p, 1.4, &[1], &f).unwrap();
        let back = inverse_first_cumulant(&p, 1.4, 1, &there).unwrap();
        assert!(back.max_abs_diff(&f).unwrap() < 1e-12);
        let reverse = p.schrodinger_group(-1.4, &f).unwrap();
        assert!(inverse_first_cumulant(&p, 1.4, 1, &f).unwrap().max_abs_diff(&reverse).unwrap() < 1e-14);
    }

    #[test]
    fn scattering_cumulants_at_zero_time() {
        let p = props(9, 0.7);
        let mut s = Sampler::new(10);
        let g = s.correlations(2, 3, 0.3);
        let f = s.general(2, 3);
        let a1 = scattering_cumulant(&p, 0.0, &ClusterArgument::new(vec![1, 2, 3], vec![]).unwrap(), &g, &f).unwrap();
        let want = g.get(3).unwrap().compose(&f).unwrap();
        assert!(a1.max_abs_diff(&want).unwrap() < 1e-14);
        let a2 = scattering_cumulant(&p, 0.0, &ClusterArgument::with_extras(2, 1), &g, &f).unwrap();
        assert!(a2.operator_norm().unwrap() < 1e-12);
    }

    #[test]
    fn scattering_cumulant_free_identity_correlations_is_identity_map() {
        let p = props(11, 0.0);
        let mut s = Sampler::new(12);
        let g = OperatorSequence::identities(2, 3).unwrap();
        let f = s.general(2, 3);
        let a1 = scattering_cumulant(&p, 0.8, &ClusterArgument::new(vec![1, 2, 3], vec![]).unwrap(), &g, &f).unwrap();
        assert!(a1.max_abs_diff(&f).unwrap() < 1e-13);
    }

    #[test]
    fn generating_operators_low_orders_match_closed_forms() {
        let p = props(13, 0.9);
        let mut s = Sampler::new(14);
        let g = s.correlations(2, 3, 0.4);
        let t = 0.7;

        let f2 = s.general(2, 2);
        let g1 = generating_operator(&p, t, &ClusterArgument::with_extras(2, 0), &g, &f2).unwrap();
        let a1 = scattering_cumulant(&p, t, &ClusterArgument::with_extras(2, 0), &g, &f2).unwrap();
        assert!(g1.max_abs_diff(&a1).unwrap() < 1e-14);

        // 𝔊_2(t,{Y},s+1) = Ă_2(t,{Y},s+1) − Ă_1(t,{Y}) Σ_i Ă_2(t,i,s+1), s = 2
        let f3 = s.general(2, 3);
        let g2 = generating_operator(&p, t, &ClusterArgument::with_extras(2, 1), &g, &f3).unwrap();
        let first = scattering_cumulant(&p, t, &ClusterArgument::with_extras(2, 1), &g, &f3).unwrap();
        let mut inner = ManyBodyOperator::zeros(2, vec![1, 2, 3]).unwrap();
        for i in [1, 2] {
            let arg = ClusterArgument::new(vec![i, 3], vec![3]).unwrap();
            inner = inner.plus(&scattering_cumulant(&p, t, &arg, &g, &f3).unwrap()).unwrap();
        }
        let outer = scattering_cumulant(&p, t, &ClusterArgument::new(vec![1, 2], vec![]).unwrap(), &g, &inner).unwrap();
        let want = first.minus(&outer).unwrap();
        assert!(g2.max_abs_diff(&want).unwrap() < 1e-13);
    }

    #[test]
    fn generating_operators_vanish_for_free_uncorrelated_dynamics() {
        let p = props(15, 0.0);
        let mut s = Sampler::new(16);
        let g = OperatorSequence::identities(2, 4).unwrap();
        for n in 1..=2 {
            let f = s.general(2, 2 + n);
            let gn = generating_operator(&p, 0.9, &ClusterArgument::with_extras(2, n), &g, &f).unwrap();
            assert!(gn.operator_norm().unwrap() < 1e-12, "n = {n}");
        }
        let f = s.general(2, 2);
        let g1 = generating_operator(&p, 0.9, &ClusterArgument::with_extras(2, 0), &g, &f).unwrap();
        assert!(g1.max_abs_diff(&f).unwrap() < 1e-13);
    }

    #[test]
    fn generating_operator_guards_size() {
        let p = props(17, 0.5);
        let g = OperatorSequence::identities(2, 8).unwrap();
        let f = ManyBodyOperator::identity(2, (1..=8).collect()).unwrap();
        assert!(generating_operator(&p, 0.1, &ClusterArgument::with_extras(2, 6), &g, &f).is_err());
    }
}
