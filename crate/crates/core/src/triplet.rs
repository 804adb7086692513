//! Finite-dimensional boundary-triplet surrogates.
//!
//! For a Hermitian `S` and independent vectors `g0`, `g1` the matrix
//! `T = S + ½(g0 g1* − g1 g0*)` satisfies Green's identity with
//! `Γ0 x = ⟨x, g0⟩`, `Γ1 x = ⟨x, g1⟩` exactly, and `T` is symmetric on
//! `ker Γ`. These systems only exercise the Γ-algebra: a matrix cannot carry
//! deficiency indices (1,1), so no extension is ever built from them.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct FiniteTripletSystem {
    s: DMatrix<Complex64>,
    g0: DVector<Complex64>,
    g1: DVector<Complex64>,
    t: DMatrix<Complex64>,
}

/// `⟨x, y⟩ = Σ x_i conj(y_i)`.
pub fn inner(x: &DVector<Complex64>, y: &DVector<Complex64>) -> Complex64 {
    y.dotc(x)
}

impl FiniteTripletSystem {
    pub fn new(
        s: DMatrix<Complex64>,
        g0: DVector<Complex64>,
        g1: DVector<Complex64>,
    ) -> Result<Self> {
        let n = s.nrows();
        if s.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: s.ncols() });
        }
        if n < 3 {
            return Err(Error::DimensionTooSmall(n));
        }
        for g in [&g0, &g1] {
            if g.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: g.len() });
            }
        }
        let defect = (&s - s.adjoint()).norm();
        if defect > 1e-13 * s.norm().max(1.0) {
            return Err(Error::NotHermitian { defect });
        }
        // singular values of [g0 g1] from the 2x2 Gram matrix
        let a = g0.norm_squared();
        let d = g1.norm_squared();
        let b = g0.dotc(&g1).norm_sqr();
        let mean = 0.5 * (a + d);
        let disc = (0.25 * (a - d) * (a - d) + b).sqrt();
        let (smax, smin) = ((mean + disc).sqrt(), (mean - disc).max(0.0).sqrt());
        if !(smin > 1e-10 * smax) {
            return Err(Error::DependentFunctionals);
        }
        Ok(Self::new_unchecked(s, g0, g1))
    }

    /// Skips validation; negative controls only.
    #[doc(hidden)]
    pub fn new_unchecked(
        s: DMatrix<Complex64>,
        g0: DVector<Complex64>,
        g1: DVector<Complex64>,
    ) -> Self {
        let skew = (&g0 * g1.adjoint() - &g1 * g0.adjoint()) * Complex64::new(0.5, 0.0);
        let t = &s + skew;
        Self { s, g0, g1, t }
    }

    /// A random system of dimension `n`: `S` Hermitian and `g0`, `g1` with
    /// entries uniform in the unit square.
    pub fn random<R: Rng>(n: usize, rng: &mut R) -> Result<Self> {
        let mut entry = || Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let a = DMatrix::from_fn(n, n, |_, _| entry());
        let s = (&a + a.adjoint()) * Complex64::new(0.5, 0.0);
        let g0 = DVector::from_fn(n, |_, _| entry());
        let g1 = DVector::from_fn(n, |_, _| entry());
        Self::new(s, g0, g1)
    }

    pub fn random_seeded(n: usize, seed: u64) -> Result<Self> {
        Self::random(n, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn dim(&self) -> usize {
        self.s.nrows()
    }

    pub fn hermitian_part(&self) -> &DMatrix<Complex64> {
        &self.s
    }

    /// The surrogate for `A*`.
    pub fn operator(&self) -> &DMatrix<Complex64> {
        &self.t
    }

    pub fn g0(&self) -> &DVector<Complex64> {
        &self.g0
    }

    pub fn g1(&self) -> &DVector<Complex64> {
        &self.g1
    }

    /// Spectral norm of `T`.
    pub fn operator_norm(&self) -> f64 {
        self.t
            .clone()
            .singular_values()
            .iter()
            .cloned()
            .fold(0.0, f64::max)
    }

    fn check_len(&self, x: &DVector<Complex64>) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        Ok(())
    }

    pub fn apply(&self, x: &DVector<Complex64>) -> Result<DVector<Complex64>> {
        self.check_len(x)?;
        Ok(&self.t * x)
    }

    pub fn gamma(&self, x: &DVector<Complex64>) -> Result<(Complex64, Complex64)> {
        self.check_len(x)?;
        Ok((inner(x, &self.g0), inner(x, &self.g1)))
    }

    /// Minimum-norm `x` with `Γ x = (c0, c1)`, i.e. `x = G (G*G)⁻¹ c` with
    /// `G = [g0 g1]`.
    pub fn gamma_preimage(&self, c0: Complex64, c1: Complex64) -> DVector<Complex64> {
        let g00 = self.g0.dotc(&self.g0);
        let g01 = self.g0.dotc(&self.g1);
        let g10 = self.g1.dotc(&self.g0);
        let g11 = self.g1.dotc(&self.g1);
        let det = g00 * g11 - g01 * g10;
        let a0 = (g11 * c0 - g01 * c1) / det;
        let a1 = (g00 * c1 - g10 * c0) / det;
        &self.g0 * a0 + &self.g1 * a1
    }

    /// Orthonormal basis of `ker Γ = {x : Γ0 x = Γ1 x = 0}` (Gram-Schmidt with
    /// reorthogonalisation against `g0`, `g1` and the coordinate vectors).
    pub fn kernel_domain_basis(&self) -> Vec<DVector<Complex64>> {
        let n = self.dim();
        let mut frame: Vec<DVector<Complex64>> = Vec::with_capacity(n);
        let push = |v: DVector<Complex64>, frame: &mut Vec<DVector<Complex64>>| -> bool {
            let mut w = v.clone();
            for _ in 0..2 {
                for q in frame.iter() {
                    let c = q.dotc(&w);
                    w -= q * c;
                }
            }
            let norm = w.norm();
            if norm > 1e-8 * v.norm().max(1e-300) {
                frame.push(w / Complex64::new(norm, 0.0));
                true
            } else {
                false
            }
        };
        push(self.g0.clone(), &mut frame);
        push(self.g1.clone(), &mut frame);
        let mut basis = Vec::with_capacity(n - 2);
        for i in 0..n {
            if basis.len() == n - 2 {
                break;
            }
            let e = DVector::from_fn(n, |k, _| {
                if k == i { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) }
            });
            if push(e, &mut frame) {
                basis.push(frame.last().unwrap().clone());
            }
        }
        basis
    }

    /// `|⟨Tx,y⟩ − ⟨x,Ty⟩ − Γ1x·conj(Γ0y) + Γ0x·conj(Γ1y)|`.
    pub fn green_residual(&self, x: &DVector<Complex64>, y: &DVector<Complex64>) -> Result<f64> {
        let tx = self.apply(x)?;
        let ty = self.apply(y)?;
        let (x0, x1) = self.gamma(x)?;
        let (y0, y1) = self.gamma(y)?;
        let lhs = inner(&tx, y) - inner(x, &ty);
        let rhs = x1 * y0.conj() - x0 * y1.conj();
        Ok((lhs - rhs).norm())
    }
}
