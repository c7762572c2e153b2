//! Seeded random instances (hermitian operators, density operators,
//! exchange-symmetric correlation sequences).

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::operator::{ManyBodyOperator, OperatorSequence};
use crate::C64;

pub struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    fn entry(&mut self) -> C64 {
        C64::new(self.rng.gen_range(-1.0..1.0), self.rng.gen_range(-1.0..1.0))
    }

    fn raw(&mut self, side: usize) -> DMatrix<C64> {
        DMatrix::from_fn(side, side, |_, _| self.entry())
    }

    /// Complex matrix with independent entries in the unit square.
    pub fn general(&mut self, dim: usize, n: usize) -> ManyBodyOperator {
        let m = self.raw(dim.pow(n as u32));
        ManyBodyOperator::from_parts(dim, (1..=n).collect(), m)
    }

    pub fn hermitian(&mut self, dim: usize, n: usize) -> ManyBodyOperator {
        let m = self.raw(dim.pow(n as u32));
        let h = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        ManyBodyOperator::from_parts(dim, (1..=n).collect(), h)
    }

    /// Hermitian and invariant under every particle permutation.
    pub fn symmetric_hermitian(&mut self, dim: usize, n: usize) -> ManyBodyOperator {
        self.hermitian(dim, n).symmetrized()
    }

    pub fn unit_vector(&mut self, dim: usize) -> DVector<C64> {
        let v = DVector::from_fn(dim, |_, _| self.entry());
        let norm = v.norm();
        v / C64::new(norm, 0.0)
    }

    /// `|ψ⟩⟨ψ|` for a random unit vector.
    pub fn pure_state(&mut self, dim: usize) -> ManyBodyOperator {
        let v = self.unit_vector(dim);
        ManyBodyOperator::from_parts(dim, vec![1], &v * v.adjoint())
    }

    /// Positive one-particle operator with the given trace.
    pub fn density(&mut self, dim: usize, trace: f64) -> ManyBodyOperator {
        let a = self.raw(dim);
        let rho = &a * a.adjoint();
        let tr = rho.trace().re;
        ManyBodyOperator::from_parts(dim, vec![1], rho * C64::new(trace / tr, 0.0))
    }

    /// Random exchange-symmetric hermitian sequence scaled by `scale`.
    pub fn symmetric_sequence(&mut self, dim: usize, n_max: usize, scale: f64) -> OperatorSequence {
        let components = (0..=n_max)
            .map(|n| self.symmetric_hermitian(dim, n).scaled_re(scale))
            .collect();
        OperatorSequence::new(dim, components).expect("well-formed sequence")
    }

    /// Correlation sequence `g_0 = 1`, `g_1 = I`, `g_n = I + strength·S_n`
    /// with random exchange-symmetric hermitian `S_n`.
    pub fn correlations(&mut self, dim: usize, n_max: usize, strength: f64) -> OperatorSequence {
        let components = (0..=n_max)
            .map(|n| {
                let id = ManyBodyOperator::identity(dim, (1..=n).collect()).expect("identity");
                if n < 2 {
                    id
                } else {
                    id.plus(&self.symmetric_hermitian(dim, n).scaled_re(strength)).expect("same labels")
                }
            })
            .collect();
        OperatorSequence::new(dim, components).expect("well-formed sequence")
    }
}
