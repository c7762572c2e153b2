//! Mean-field scaled Hamiltonians, the Heisenberg and Schrödinger groups and
//! their generators.
//!
//! `H_n = Σ_i K(i) + ε Σ_{i<j} Φ(i,j)`. The Heisenberg group acts as
//! `G_n(t)g = e^{itH_n} g e^{-itH_n}` and its dual (Schrödinger) group as
//! `G*_n(t) = G_n(-t)`. Both are evaluated from a cached eigendecomposition of
//! `H_n`, so identities between them hold to machine precision.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::operator::{ManyBodyOperator, SYMMETRY_TOL};
use crate::C64;

/// Largest particle number a propagator cache is prepared for.
pub const MAX_PARTICLES: usize = 8;

const UNITARY_CACHE_LIMIT: usize = 512;

#[derive(Clone, Debug, PartialEq)]
pub struct InteractionModel {
    dim: usize,
    kinetic: ManyBodyOperator,
    pair: ManyBodyOperator,
    epsilon: f64,
}

impl InteractionModel {
    /// `kinetic` is a hermitian one-particle operator, `pair` a hermitian
    /// exchange-symmetric two-particle operator. `epsilon = 0` switches the
    /// interaction off.
    pub fn new(kinetic: ManyBodyOperator, pair: ManyBodyOperator, epsilon: f64) -> Result<Self> {
        let dim = kinetic.dim();
        if kinetic.n_particles() != 1 {
            return Err(Error::InvalidArgument("kinetic part must act on one particle".into()));
        }
        if pair.n_particles() != 2 {
            return Err(Error::InvalidArgument("pair potential must act on two particles".into()));
        }
        if pair.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: pair.dim() });
        }
        let dk = kinetic.hermiticity_defect();
        if dk >= SYMMETRY_TOL {
            return Err(Error::NotHermitian(dk));
        }
        let dp = pair.hermiticity_defect();
        if dp >= SYMMETRY_TOL {
            return Err(Error::NotHermitian(dp));
        }
        let sym = pair.symmetry_defect();
        if sym >= SYMMETRY_TOL {
            return Err(Error::NotSymmetric(sym));
        }
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!("scaling parameter must be nonnegative, got {epsilon}")));
        }
        Ok(Self {
            dim,
            kinetic: kinetic.with_labels(vec![1])?,
            pair: pair.with_labels(vec![1, 2])?,
            epsilon,
        })
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(self.kinetic.clone(), self.pair.clone(), epsilon)
    }

    /// Collective coupling set to one, as used by the limit (Vlasov) objects.
    pub fn limit(&self) -> Self {
        Self { epsilon: 1.0, ..self.clone() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn kinetic(&self) -> &ManyBodyOperator {
        &self.kinetic
    }

    pub fn pair(&self) -> &ManyBodyOperator {
        &self.pair
    }

    pub fn pair_norm(&self) -> f64 {
        self.pair.operator_norm().expect("finite pair potential")
    }

    /// `K(label)`.
    pub fn kinetic_on(&self, label: usize) -> ManyBodyOperator {
        self.kinetic.with_labels(vec![label]).expect("one label")
    }

    /// `Φ(a, b)`.
    pub fn pair_on(&self, a: usize, b: usize) -> Result<ManyBodyOperator> {
        self.pair.with_labels(vec![a, b])
    }

    /// `H` on the given particles.
    pub fn hamiltonian_on(&self, labels: &[usize]) -> Result<ManyBodyOperator> {
        if labels.is_empty() {
            return Err(Error::OutOfRange { what: "particle number", value: 0, allowed: ">= 1".into() });
        }
        let mut h = ManyBodyOperator::zeros(self.dim, labels.to_vec())?;
        for &l in labels {
            h = h.plus(&self.kinetic_on(l).embed(labels)?)?;
        }
        if self.epsilon != 0.0 {
            for (i, &a) in labels.iter().enumerate() {
                for &b in &labels[i + 1..] {
                    let phi = self.pair_on(a, b)?.embed(labels)?;
                    h = h.plus(&phi.scaled_re(self.epsilon))?;
                }
            }
        }
        Ok(h)
    }

    /// `H_n` on labels `1..=n`.
    pub fn build_hamiltonian(&self, n: usize) -> Result<ManyBodyOperator> {
        self.hamiltonian_on(&(1..=n).collect::<Vec<_>>())
    }
}

/// Direction of a unitary conjugation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Picture {
    /// `g ↦ e^{itH} g e^{-itH}` (observables).
    Heisenberg,
    /// `f ↦ e^{-itH} f e^{itH}` (states).
    Schrodinger,
}

impl Picture {
    pub fn dual(self) -> Self {
        match self {
            Picture::Heisenberg => Picture::Schrodinger,
            Picture::Schrodinger => Picture::Heisenberg,
        }
    }
}

/// Generator selector for [`Propagators::generator`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GeneratorKind {
    /// `N_n` built from the full scaled Hamiltonian on the operator's labels.
    Full,
    /// `N(j)`, the free part on particle `j`.
    Free(usize),
    /// `N_int(j1, j2)`, the unscaled pair part.
    Pair(usize, usize),
}

#[derive(Debug)]
struct Spectrum {
    energies: DVector<f64>,
    vectors: DMatrix<C64>,
}

/// Propagator factory for one [`InteractionModel`]. Eigendecompositions of
/// `H_n` are computed once per particle number; unitaries are memoised per
/// `(n, t)`. The cache is internally synchronised, so a single instance can
/// be shared between threads.
#[derive(Debug)]
pub struct Propagators {
    model: InteractionModel,
    spectra: Vec<OnceLock<Spectrum>>,
    unitaries: Mutex<HashMap<(usize, u64), Arc<DMatrix<C64>>>>,
}

impl Clone for Propagators {
    fn clone(&self) -> Self {
        Self::new(self.model.clone())
    }
}

impl Propagators {
    pub fn new(model: InteractionModel) -> Self {
        Self {
            model,
            spectra: (0..=MAX_PARTICLES).map(|_| OnceLock::new()).collect(),
            unitaries: Mutex::new(HashMap::new()),
        }
    }

    pub fn model(&self) -> &InteractionModel {
        &self.model
    }

    pub fn dim(&self) -> usize {
        self.model.dim
    }

    fn spectrum(&self, n: usize) -> Result<&Spectrum> {
        if n == 0 || n > MAX_PARTICLES {
            return Err(Error::OutOfRange { what: "particle number", value: n, allowed: format!("1..={MAX_PARTICLES}") });
        }
        if let Some(s) = self.spectra[n].get() {
            return Ok(s);
        }
        let h = self.model.build_hamiltonian(n)?;
        let eig = h.into_matrix().symmetric_eigen();
        let spectrum = Spectrum { energies: eig.eigenvalues, vectors: eig.eigenvectors };
        Ok(self.spectra[n].get_or_init(|| spectrum))
    }

    /// `e^{-itH_n}` as a matrix in slot order.
    fn unitary_matrix(&self, n: usize, t: f64) -> Result<Arc<DMatrix<C64>>> {
        let key = (n, t.to_bits());
        if let Some(u) = self.unitaries.lock().expect("cache lock").get(&key) {
            return Ok(Arc::clone(u));
        }
        let s = self.spectrum(n)?;
        let phases = s.energies.map(|e| C64::new(0.0, -e * t).exp());
        let mut scaled = s.vectors.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= phases[j];
        }
        let u = Arc::new(scaled * s.vectors.adjoint());
        let mut cache = self.unitaries.lock().expect("cache lock");
        if cache.len() >= UNITARY_CACHE_LIMIT {
            cache.clear();
        }
        cache.insert(key, Arc::clone(&u));
        Ok(u)
    }

    /// `e^{-itH}` for the particles `labels`.
    pub fn unitary(&self, t: f64, labels: &[usize]) -> Result<ManyBodyOperator> {
        let u = self.unitary_matrix(labels.len(), t)?;
        ManyBodyOperator::new(self.dim(), labels.to_vec(), (*u).clone())
    }

    /// Conjugates `x` by `⊗_b e^{-itH_b}` over disjoint blocks `b` of its
    /// labels (identity on particles outside every block). Each block evolves
    /// under its own Hamiltonian, i.e. the blocks do not interact.
    pub fn conjugate_blocks(
        &self,
        t: f64,
        blocks: &[Vec<usize>],
        x: &ManyBodyOperator,
        picture: Picture,
    ) -> Result<ManyBodyOperator> {
        let mut w = ManyBodyOperator::scalar(self.dim(), C64::new(1.0, 0.0));
        for block in blocks.iter().filter(|b| !b.is_empty()) {
            w = w.kron(&self.unitary(t, block)?)?;
        }
        if w.n_particles() == 0 {
            return Ok(x.clone());
        }
        let w = w.embed(x.labels())?;
        let (wm, xm) = (w.matrix(), x.matrix());
        let out = match picture {
            Picture::Heisenberg => wm.adjoint() * xm * wm,
            Picture::Schrodinger => wm * xm * wm.adjoint(),
        };
        Ok(ManyBodyOperator::from_parts(self.dim(), x.labels().to_vec(), out))
    }

    /// The group on the particles `block` (a subset of `x`'s labels).
    pub fn group_on(&self, t: f64, block: &[usize], x: &ManyBodyOperator, picture: Picture) -> Result<ManyBodyOperator> {
        self.conjugate_blocks(t, &[block.to_vec()], x, picture)
    }

    /// Product of one-particle groups `Π_{j∈labels} G_1(t, j)`.
    pub fn free_flow(&self, t: f64, labels: &[usize], x: &ManyBodyOperator, picture: Picture) -> Result<ManyBodyOperator> {
        let blocks: Vec<Vec<usize>> = labels.iter().map(|&l| vec![l]).collect();
        self.conjugate_blocks(t, &blocks, x, picture)
    }

    /// `G_n(t)g = e^{itH_n} g e^{-itH_n}` over all labels of `g`.
    pub fn heisenberg_group(&self, t: f64, g: &ManyBodyOperator) -> Result<ManyBodyOperator> {
        if g.n_particles() == 0 {
            return Ok(g.clone());
        }
        self.group_on(t, g.labels(), g, Picture::Heisenberg)
    }

    /// `G*_n(t)f = e^{-itH_n} f e^{itH_n}` over all labels of `f`.
    pub fn schrodinger_group(&self, t: f64, f: &ManyBodyOperator) -> Result<ManyBodyOperator> {
        if f.n_particles() == 0 {
            return Ok(f.clone());
        }
        self.group_on(t, f.labels(), f, Picture::Schrodinger)
    }

    /// `N g = -i(gA - Ag)` for the selected part `A` of the Hamiltonian; the
    /// adjoint variant is `N* = -N`.
    pub fn generator(&self, g: &ManyBodyOperator, kind: GeneratorKind, adjoint: bool) -> Result<ManyBodyOperator> {
        let labels = g.labels();
        let part = match kind {
            GeneratorKind::Full => self.model.hamiltonian_on(labels)?,
            GeneratorKind::Free(j) => {
                if !labels.contains(&j) {
                    return Err(Error::LabelNotInHost(j));
                }
                self.model.kinetic_on(j).embed(labels)?
            }
            GeneratorKind::Pair(a, b) => {
                if a == b {
                    return Err(Error::InvalidArgument("pair generator needs two distinct particles".into()));
                }
                self.model.pair_on(a, b)?.embed(labels)?
            }
        };
        let sign = if adjoint { -1.0 } else { 1.0 };
        // -i(gA - Ag) = i[A, g]
        Ok(part.commutator(g)?.scaled(C64::new(0.0, sign)))
    }
}
