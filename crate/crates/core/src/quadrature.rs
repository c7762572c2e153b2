//! One-dimensional quadrature rules on `[a, b]`.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    GaussLegendre,
    /// Composite Simpson; an even node count is raised by one.
    Simpson,
}

/// Per-level quadrature for nested time integrals.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuadratureSpec {
    pub scheme: Scheme,
    pub nodes_per_level: usize,
    /// Deepest nesting evaluated; `None` means all levels.
    pub max_nesting: Option<usize>,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { scheme: Scheme::GaussLegendre, nodes_per_level: 16, max_nesting: None }
    }
}

impl QuadratureSpec {
    pub fn new(scheme: Scheme, nodes_per_level: usize, max_nesting: Option<usize>) -> Result<Self> {
        if nodes_per_level < 4 {
            return Err(Error::OutOfRange { what: "quadrature nodes per level", value: nodes_per_level, allowed: ">= 4".into() });
        }
        Ok(Self { scheme, nodes_per_level, max_nesting })
    }

    /// The same rule with twice the nodes per level.
    pub fn refined(self) -> Self {
        Self { nodes_per_level: 2 * self.nodes_per_level, ..self }
    }

    /// Nodes and weights on `[a, b]`.
    pub fn rule(&self, a: f64, b: f64) -> Vec<(f64, f64)> {
        match self.scheme {
            Scheme::GaussLegendre => gauss_legendre(self.nodes_per_level, a, b),
            Scheme::Simpson => simpson(self.nodes_per_level, a, b),
        }
    }
}

/// Gauss–Legendre nodes and weights on `[a, b]` (Newton iteration on the
/// three-term recurrence). `n ≥ 1`.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((mid - half * x, half * w));
    }
    out
}

/// Composite Simpson nodes and weights on `[a, b]`.
pub fn simpson(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let n = if n % 2 == 0 { n + 1 } else { n.max(3) };
    let h = (b - a) / (n - 1) as f64;
    (0..n)
        .map(|i| {
            let w = if i == 0 || i == n - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            (a + i as f64 * h, w * h / 3.0)
        })
        .collect()
}
