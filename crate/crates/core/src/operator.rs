//! Dense many-particle operators on `H^{⊗n}` with particle-label bookkeeping.
//!
//! An operator carries the one-particle dimension `d`, an ordered list of
//! distinct particle labels and a dense `d^n × d^n` complex matrix. The first
//! label is the most significant tensor factor, so `A ⊗ B` on labels `(1, 2)`
//! is `kron(A, B)`. Zero labels means a scalar (`H^{⊗0} = ℂ`).

use itertools::Itertools;
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::C64;

/// Tolerance used for hermiticity and exchange-symmetry checks.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Offsets into a `d^n`-dimensional index for every multi-index over the
/// tensor positions `positions` (first position most significant).
pub(crate) fn position_offsets(dim: usize, n_host: usize, positions: &[usize]) -> Vec<usize> {
    let strides: Vec<usize> = positions
        .iter()
        .map(|&p| dim.pow((n_host - 1 - p) as u32))
        .collect();
    let mut offsets = vec![0usize];
    for stride in strides {
        let mut next = Vec::with_capacity(offsets.len() * dim);
        for &o in &offsets {
            for digit in 0..dim {
                next.push(o + digit * stride);
            }
        }
        offsets = next;
    }
    offsets
}

fn check_distinct(labels: &[usize]) -> Result<()> {
    for (i, &a) in labels.iter().enumerate() {
        if labels[..i].contains(&a) {
            return Err(Error::DuplicateLabel(a));
        }
    }
    Ok(())
}

fn positions_in(host: &[usize], labels: &[usize]) -> Result<Vec<usize>> {
    labels
        .iter()
        .map(|l| host.iter().position(|h| h == l).ok_or(Error::LabelNotInHost(*l)))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ManyBodyOperator {
    dim: usize,
    labels: Vec<usize>,
    matrix: DMatrix<C64>,
}

impl ManyBodyOperator {
    pub fn new(dim: usize, labels: Vec<usize>, matrix: DMatrix<C64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("one-particle dimension must be positive".into()));
        }
        check_distinct(&labels)?;
        let side = dim.pow(labels.len() as u32);
        if matrix.nrows() != side || matrix.ncols() != side {
            return Err(Error::DimensionMismatch { expected: side, found: matrix.nrows().max(matrix.ncols()) });
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { dim, labels, matrix })
    }

    /// Builder used internally where the invariants hold by construction.
    pub(crate) fn from_parts(dim: usize, labels: Vec<usize>, matrix: DMatrix<C64>) -> Self {
        debug_assert_eq!(matrix.nrows(), dim.pow(labels.len() as u32));
        Self { dim, labels, matrix }
    }

    pub fn identity(dim: usize, labels: Vec<usize>) -> Result<Self> {
        let side = dim.pow(labels.len() as u32);
        Self::new(dim, labels, DMatrix::identity(side, side))
    }

    pub fn zeros(dim: usize, labels: Vec<usize>) -> Result<Self> {
        let side = dim.pow(labels.len() as u32);
        Self::new(dim, labels, DMatrix::zeros(side, side))
    }

    pub fn scalar(dim: usize, value: C64) -> Self {
        Self::from_parts(dim, Vec::new(), DMatrix::from_element(1, 1, value))
    }

    /// Operator on labels `1..=n` from a matrix.
    pub fn on_first(dim: usize, n: usize, matrix: DMatrix<C64>) -> Result<Self> {
        Self::new(dim, (1..=n).collect(), matrix)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_particles(&self) -> usize {
        self.labels.len()
    }

    pub fn side(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub(crate) fn map_matrix(&self, f: impl FnOnce(&DMatrix<C64>) -> DMatrix<C64>) -> Self {
        Self::from_parts(self.dim, self.labels.clone(), f(&self.matrix))
    }

    /// Renames the particles; the matrix is unchanged.
    pub fn with_labels(&self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.labels.len() {
            return Err(Error::LabelMismatch { left: self.labels.clone(), right: labels });
        }
        check_distinct(&labels)?;
        Ok(Self::from_parts(self.dim, labels, self.matrix.clone()))
    }

    /// The same physical operator with its tensor factors listed in `order`.
    pub fn reorder(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.labels.len() {
            return Err(Error::LabelMismatch { left: self.labels.clone(), right: order.to_vec() });
        }
        check_distinct(order)?;
        if order == self.labels.as_slice() {
            return Ok(self.clone());
        }
        // position in `order` of each of our labels
        let pos = positions_in(order, &self.labels)?;
        let n = self.labels.len();
        let offs = position_offsets(self.dim, n, &pos);
        let side = self.side();
        let mut out = DMatrix::zeros(side, side);
        for (a, &ia) in offs.iter().enumerate() {
            for (b, &ib) in offs.iter().enumerate() {
                out[(ia, ib)] = self.matrix[(a, b)];
            }
        }
        Ok(Self::from_parts(self.dim, order.to_vec(), out))
    }

    /// Matrix of `other` expressed in this operator's factor order.
    pub(crate) fn aligned(&self, other: &Self) -> Result<DMatrix<C64>> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: other.dim });
        }
        if self.labels == other.labels {
            return Ok(other.matrix.clone());
        }
        let same_set = self.labels.len() == other.labels.len()
            && self.labels.iter().all(|l| other.labels.contains(l));
        if !same_set {
            return Err(Error::LabelMismatch { left: self.labels.clone(), right: other.labels.clone() });
        }
        Ok(other.reorder(&self.labels)?.matrix)
    }

    /// Acts as `self` on its own labels and as the identity on the rest of `host`.
    pub fn embed(&self, host: &[usize]) -> Result<Self> {
        check_distinct(host)?;
        let pos = positions_in(host, &self.labels)?;
        let rest: Vec<usize> = (0..host.len()).filter(|p| !pos.contains(p)).collect();
        let n = host.len();
        let op_offs = position_offsets(self.dim, n, &pos);
        let rest_offs = position_offsets(self.dim, n, &rest);
        let side = self.dim.pow(n as u32);
        let mut out = DMatrix::zeros(side, side);
        for &r in &rest_offs {
            for (a, &ia) in op_offs.iter().enumerate() {
                for (b, &ib) in op_offs.iter().enumerate() {
                    out[(ia + r, ib + r)] = self.matrix[(a, b)];
                }
            }
        }
        Ok(Self::from_parts(self.dim, host.to_vec(), out))
    }

    /// Traces out every particle not listed in `keep`; the result lists its
    /// labels in the order of `keep`.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self> {
        check_distinct(keep)?;
        let pos = positions_in(&self.labels, keep)?;
        let n = self.labels.len();
        let rest: Vec<usize> = (0..n).filter(|p| !pos.contains(p)).collect();
        let keep_offs = position_offsets(self.dim, n, &pos);
        let rest_offs = position_offsets(self.dim, n, &rest);
        let side = keep_offs.len();
        let mut out = DMatrix::zeros(side, side);
        for (a, &ia) in keep_offs.iter().enumerate() {
            for (b, &ib) in keep_offs.iter().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for &r in &rest_offs {
                    acc += self.matrix[(ia + r, ib + r)];
                }
                out[(a, b)] = acc;
            }
        }
        Ok(Self::from_parts(self.dim, keep.to_vec(), out))
    }

    /// Traces out the listed particles.
    pub fn trace_out(&self, drop: &[usize]) -> Result<Self> {
        for l in drop {
            if !self.labels.contains(l) {
                return Err(Error::LabelNotInHost(*l));
            }
        }
        let keep: Vec<usize> = self.labels.iter().copied().filter(|l| !drop.contains(l)).collect();
        self.partial_trace(&keep)
    }

    /// Tensor product on disjoint label sets; labels are concatenated.
    pub fn kron(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: other.dim });
        }
        for l in &other.labels {
            if self.labels.contains(l) {
                return Err(Error::DuplicateLabel(*l));
            }
        }
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        Ok(Self::from_parts(self.dim, labels, self.matrix.kronecker(&other.matrix)))
    }

    /// Tensor product `op ⊗ op ⊗ …` of a one-particle operator over `labels`.
    pub fn tensor_power(one: &Self, labels: &[usize]) -> Result<Self> {
        if one.n_particles() != 1 {
            return Err(Error::InvalidArgument("tensor power needs a one-particle operator".into()));
        }
        let mut acc = Self::scalar(one.dim, C64::new(1.0, 0.0));
        for &l in labels {
            acc = acc.kron(&one.with_labels(vec![l])?)?;
        }
        Ok(acc)
    }

    pub fn plus(&self, other: &Self) -> Result<Self> {
        let m = self.aligned(other)?;
        Ok(Self::from_parts(self.dim, self.labels.clone(), &self.matrix + m))
    }

    pub fn minus(&self, other: &Self) -> Result<Self> {
        let m = self.aligned(other)?;
        Ok(Self::from_parts(self.dim, self.labels.clone(), &self.matrix - m))
    }

    /// Operator product `self · other`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        let m = self.aligned(other)?;
        Ok(Self::from_parts(self.dim, self.labels.clone(), &self.matrix * m))
    }

    /// Operator product after embedding both factors into the union of labels
    /// (own labels first).
    pub fn compose_embedded(&self, other: &Self) -> Result<Self> {
        let mut host = self.labels.clone();
        for l in &other.labels {
            if !host.contains(l) {
                host.push(*l);
            }
        }
        let a = self.embed(&host)?;
        let b = other.embed(&host)?;
        Ok(Self::from_parts(self.dim, host, a.matrix * b.matrix))
    }

    pub fn scaled(&self, c: C64) -> Self {
        self.map_matrix(|m| m * c)
    }

    pub fn scaled_re(&self, c: f64) -> Self {
        self.map_matrix(|m| m * C64::new(c, 0.0))
    }

    pub fn adjoint(&self) -> Self {
        self.map_matrix(|m| m.adjoint())
    }

    /// `[self, other] = self·other − other·self`.
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        let m = self.aligned(other)?;
        Ok(Self::from_parts(self.dim, self.labels.clone(), &self.matrix * &m - &m * &self.matrix))
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    /// Largest entrywise modulus of `A − A†`.
    pub fn hermiticity_defect(&self) -> f64 {
        let m = &self.matrix;
        let mut worst = 0.0f64;
        for i in 0..m.nrows() {
            for j in 0..=i {
                worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() < tol
    }

    pub fn hermitian_part(&self) -> Self {
        self.map_matrix(|m| (m + m.adjoint()) * C64::new(0.5, 0.0))
    }

    /// Largest entrywise modulus of `P A P† − A` over adjacent transpositions
    /// `P`, which generate the whole permutation group.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.labels.len();
        let mut worst = 0.0f64;
        for k in 0..n.saturating_sub(1) {
            let mut order = self.labels.clone();
            order.swap(k, k + 1);
            let swapped = self.reorder(&order).expect("permutation of own labels");
            let diff = (&swapped.matrix - &self.matrix).camax();
            worst = worst.max(diff);
        }
        worst
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.symmetry_defect() < tol
    }

    /// Average of `P A P†` over all permutations of the particles.
    pub fn symmetrized(&self) -> Self {
        let n = self.labels.len();
        if n < 2 {
            return self.clone();
        }
        let mut acc = DMatrix::zeros(self.side(), self.side());
        let mut count = 0.0;
        for perm in self.labels.iter().copied().permutations(n) {
            let p = self.reorder(&perm).expect("permutation of own labels");
            acc += p.matrix;
            count += 1.0;
        }
        Self::from_parts(self.dim, self.labels.clone(), acc / C64::new(count, 0.0))
    }

    fn check_finite(&self) -> Result<()> {
        if self.matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(())
    }

    pub fn singular_values(&self) -> Result<Vec<f64>> {
        self.check_finite()?;
        let sv = self.matrix.clone().svd(false, false).singular_values;
        Ok(sv.iter().copied().collect())
    }

    /// Sum of singular values (the trace-class norm).
    pub fn trace_norm(&self) -> Result<f64> {
        Ok(self.singular_values()?.iter().sum())
    }

    /// Largest singular value.
    pub fn operator_norm(&self) -> Result<f64> {
        Ok(self.singular_values()?.iter().copied().fold(0.0, f64::max))
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        let m = self.aligned(other)?;
        Ok((&self.matrix - m).camax())
    }

    pub fn trace_distance(&self, other: &Self) -> Result<f64> {
        self.minus(other)?.trace_norm()
    }

    /// Smallest eigenvalue of the hermitian part; `≥ −tol` means positive
    /// semidefinite.
    pub fn min_eigenvalue(&self) -> f64 {
        let h = self.hermitian_part();
        h.matrix
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Finite family `(g_0, g_1, …, g_{n_max})` with `g_n` on labels `1..=n`.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorSequence {
    dim: usize,
    components: Vec<ManyBodyOperator>,
}

impl OperatorSequence {
    /// Components are relabelled to `1..=n`; component `n` must act on `n`
    /// particles.
    pub fn new(dim: usize, components: Vec<ManyBodyOperator>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidArgument("empty operator sequence".into()));
        }
        let mut normalized = Vec::with_capacity(components.len());
        for (n, c) in components.into_iter().enumerate() {
            if c.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: c.dim() });
            }
            if c.n_particles() != n {
                return Err(Error::DimensionMismatch { expected: n, found: c.n_particles() });
            }
            normalized.push(c.with_labels((1..=n).collect())?);
        }
        Ok(Self { dim, components: normalized })
    }

    /// `(0, b, 0, …, 0)` through order `n_max`.
    pub fn additive(one: &ManyBodyOperator, n_max: usize) -> Result<Self> {
        Self::k_ary(one, n_max)
    }

    /// Sequence whose only nonzero component is `op` (of order `k = |labels|`).
    pub fn k_ary(op: &ManyBodyOperator, n_max: usize) -> Result<Self> {
        let k = op.n_particles();
        if k > n_max {
            return Err(Error::OutOfRange { what: "k-ary order", value: k, allowed: format!("<= {n_max}") });
        }
        let dim = op.dim();
        let components = (0..=n_max)
            .map(|n| if n == k { Ok(op.clone()) } else { ManyBodyOperator::zeros(dim, (1..=n).collect()) })
            .collect::<Result<Vec<_>>>()?;
        Self::new(dim, components)
    }

    /// `g_n = I` for every `n ≤ n_max` (no correlations).
    pub fn identities(dim: usize, n_max: usize) -> Result<Self> {
        let components = (0..=n_max)
            .map(|n| ManyBodyOperator::identity(dim, (1..=n).collect()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(dim, components)
    }

    pub fn zeros(dim: usize, n_max: usize) -> Result<Self> {
        let components = (0..=n_max)
            .map(|n| ManyBodyOperator::zeros(dim, (1..=n).collect()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(dim, components)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_max(&self) -> usize {
        self.components.len() - 1
    }

    pub fn components(&self) -> &[ManyBodyOperator] {
        &self.components
    }

    pub fn get(&self, n: usize) -> Result<&ManyBodyOperator> {
        self.components.get(n).ok_or(Error::MissingComponent(n))
    }

    /// Component `n` relabelled onto `labels`.
    pub fn on_labels(&self, labels: &[usize]) -> Result<ManyBodyOperator> {
        self.get(labels.len())?.with_labels(labels.to_vec())
    }

    /// Scales component `n` by `factor(n)`.
    pub fn map_orders(&self, factor: impl Fn(usize) -> f64) -> Self {
        let components = self
            .components
            .iter()
            .enumerate()
            .map(|(n, c)| c.scaled_re(factor(n)))
            .collect();
        Self { dim: self.dim, components }
    }

    /// Truncates (or pads with zeros) to order `n_max`.
    pub fn truncated(&self, n_max: usize) -> Result<Self> {
        let mut components: Vec<_> = self.components.iter().take(n_max + 1).cloned().collect();
        while components.len() <= n_max {
            let n = components.len();
            components.push(ManyBodyOperator::zeros(self.dim, (1..=n).collect())?);
        }
        Self::new(self.dim, components)
    }

    /// Largest exchange-symmetry defect over all components.
    pub fn symmetry_defect(&self) -> f64 {
        self.components.iter().map(|c| c.symmetry_defect()).fold(0.0, f64::max)
    }

    pub fn validate_symmetry(&self, tol: f64) -> Result<()> {
        let defect = self.symmetry_defect();
        if defect < tol {
            Ok(())
        } else {
            Err(Error::NotSymmetric(defect))
        }
    }

    /// `max_n γⁿ/n! · ‖g_n‖` over the stored components.
    pub fn sequence_norm(&self, weight: NormWeight) -> Result<f64> {
        let mut worst = 0.0f64;
        let mut coeff = 1.0;
        for (n, c) in self.components.iter().enumerate() {
            if n > 0 {
                coeff *= weight.gamma() / n as f64;
            }
            worst = worst.max(coeff * c.operator_norm()?);
        }
        Ok(worst)
    }
}

/// Weight `γ ∈ (0, 1)` of the weighted sequence norm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormWeight(f64);

impl NormWeight {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidArgument(format!("norm weight must lie in (0, 1), got {gamma}")));
        }
        Ok(Self(gamma))
    }

    pub fn gamma(self) -> f64 {
        self.0
    }

    /// `γ < e^{-1}`, the regime where the marginal-observable bound holds.
    pub fn admits_evolution_bound(self) -> bool {
        self.0 < (-1.0f64).exp()
    }

    /// `e²(1 − γe)^{-1}`.
    pub fn evolution_bound_factor(self) -> Option<f64> {
        let e = std::f64::consts::E;
        self.admits_evolution_bound().then(|| e * e / (1.0 - self.0 * e))
    }
}
