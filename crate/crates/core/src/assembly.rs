//! The extension `Ã` on `L²(0,1) ⊕ L²(dσ) ⊕ C` as a Hermitian pencil `(K, M)`.
//!
//! The base space is discretized by cell averages `u_i ≈ x0((i + ½)δ)` on a
//! uniform mesh of `N` cells, `δ = 1/N`; `y(1) = 0` is imposed on the right
//! boundary face. The boundary value `Γ0 x0 = b` is not a degree of freedom of
//! its own:
//!
//! - `f = ∞`: `b = 0`.
//! - `h0 > 0`: the domain constraint `x2 = −h0 Γ0 x0` is eliminated as
//!   `b = −x2/h0`, so `x2` carries the boundary value.
//! - `h0 = 0`: `b` is condensed out through the discrete form of
//!   `Γ1 x0 + h Γ0 x0 + Σ w_j (x1j − t_j Γ0 x0/(1+t_j²)) = 0`.
//!
//! With `Γ1 x0 ≈ (u_0 − b)/(δ/2)` the energy
//!
//! ```text
//! Σ_faces |Δu|²/δ_face + Σ q_i |u_i|² δ + (S − h)|b|² + Σ_j w_j (t_j |x1j|² − 2 Re x1j b̄),
//! S = Σ_j w_j t_j/(1 + t_j²)
//! ```
//!
//! and the mass `Σ δ|u_i|² + Σ w_j |x1j|² + |x2|²/h0` reproduce the three
//! block rows of `Ã` exactly, so `M` is the weighted inner product itself.

use std::sync::{Arc, OnceLock};

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::herglotz::{FValue, HerglotzData};
use crate::models::{char_from_parts, QSpec, SturmLiouvilleModel, TripletSystem};
use crate::resolvent::generalized_resolvent;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Block layout `(n_base, m, aug)` of the extension space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Layout {
    pub n_base: usize,
    pub atoms: usize,
    pub aug: usize,
}

impl Layout {
    pub fn dim(&self) -> usize {
        self.n_base + self.atoms + self.aug
    }
}

/// A vector of the extension space split into its blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockVector {
    pub base: Vec<Complex64>,
    pub atoms: Vec<Complex64>,
    pub aug: Option<Complex64>,
}

impl BlockVector {
    /// `(x, 0, 0)`.
    pub fn from_base(layout: Layout, base: Vec<Complex64>) -> Result<Self> {
        if base.len() != layout.n_base {
            return Err(Error::DimensionMismatch { expected: layout.n_base, found: base.len() });
        }
        Ok(Self {
            base,
            atoms: vec![ZERO; layout.atoms],
            aug: (layout.aug == 1).then_some(ZERO),
        })
    }

    pub fn from_flat(layout: Layout, v: &DVector<Complex64>) -> Self {
        let n = layout.n_base;
        let m = layout.atoms;
        Self {
            base: v.rows(0, n).iter().copied().collect(),
            atoms: v.rows(n, m).iter().copied().collect(),
            aug: (layout.aug == 1).then(|| v[n + m]),
        }
    }

    pub fn to_flat(&self) -> DVector<Complex64> {
        DVector::from_iterator(
            self.base.len() + self.atoms.len() + usize::from(self.aug.is_some()),
            self.base.iter().chain(&self.atoms).chain(self.aug.iter()).copied(),
        )
    }
}

/// Generalized eigenpairs of the pencil, ascending.
#[derive(Debug, Clone)]
pub struct SpectrumResult {
    pub eigenvalues: Vec<f64>,
    /// `‖K v − λ M v‖ / ‖v‖` per pair.
    pub residuals: Vec<f64>,
    /// `M`-normalized eigenvectors.
    pub vectors: Vec<DVector<f64>>,
    pub layout: Layout,
}

impl SpectrumResult {
    pub fn blocks(&self, index: usize) -> BlockVector {
        let v = self.vectors[index].map(|x| Complex64::new(x, 0.0));
        BlockVector::from_flat(self.layout, &v)
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `index,eigenvalue,residual` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,eigenvalue,residual\n");
        for (i, (l, r)) in self.eigenvalues.iter().zip(&self.residuals).enumerate() {
            out.push_str(&format!("{i},{l},{r:e}\n"));
        }
        out
    }
}

#[derive(Debug)]
struct FullSpectrum {
    values: Vec<f64>,
    vectors: Vec<DVector<f64>>,
}

#[derive(Debug, Clone)]
pub struct ExtensionAssembly {
    layout: Layout,
    k: DMatrix<f64>,
    m: DMatrix<f64>,
    gamma0_row: DVector<f64>,
    gamma1_row: DVector<f64>,
    data: HerglotzData,
    q: QSpec,
    n_mesh: usize,
    spectrum: OnceLock<Arc<FullSpectrum>>,
}

type Sparse = Vec<(usize, f64)>;

fn add_sym(k: &mut DMatrix<f64>, a: &Sparse, c: &Sparse, coef: f64) {
    for &(i, ai) in a {
        for &(j, cj) in c {
            let v = 0.5 * coef * ai * cj;
            k[(i, j)] += v;
            k[(j, i)] += v;
        }
    }
}

fn dense(n: usize, s: &Sparse) -> DVector<f64> {
    let mut v = DVector::zeros(n);
    for &(i, x) in s {
        v[i] += x;
    }
    v
}

pub fn assemble_extension(q: &QSpec, fd: &HerglotzData, n_mesh: usize) -> Result<ExtensionAssembly> {
    if n_mesh < 16 {
        return Err(Error::InvalidArgument(format!("n_mesh = {n_mesh} < 16")));
    }
    q.validate()?;
    let data = if fd.is_infinity() {
        HerglotzData::infinity()
    } else {
        HerglotzData::new(fd.h0(), fd.h(), fd.atoms().to_vec())?
    };

    let n = n_mesh;
    let delta = 1.0 / n as f64;
    let m = data.atoms().len();
    let aug = usize::from(!data.is_infinity() && data.h0() > 0.0);
    let layout = Layout { n_base: n, atoms: m, aug };
    let dim = layout.dim();

    let mut k = DMatrix::zeros(dim, dim);
    let mut mass = DMatrix::zeros(dim, dim);
    for i in 0..n {
        mass[(i, i)] = delta;
        let x = (i as f64 + 0.5) * delta;
        k[(i, i)] += q.eval(x) * delta;
    }
    for i in 0..n - 1 {
        let d = vec![(i + 1, 1.0), (i, -1.0)];
        add_sym(&mut k, &d, &d, 1.0 / delta);
    }
    add_sym(&mut k, &vec![(n - 1, 1.0)], &vec![(n - 1, 1.0)], 2.0 / delta);

    let beta: Sparse = if data.is_infinity() {
        Vec::new()
    } else if aug == 1 {
        vec![(n + m, -1.0 / data.h0())]
    } else {
        let pivot = 2.0 / delta - data.h() + data.centering_sum();
        if pivot.abs() < 1e-12 * (2.0 / delta) {
            return Err(Error::InvalidData(
                "boundary condensation is singular for this (h, σ) at this mesh".into(),
            ));
        }
        std::iter::once((0, 2.0 / delta / pivot))
            .chain(data.atoms().iter().enumerate().map(|(j, a)| (n + j, a.weight / pivot)))
            .collect()
    };

    // left boundary face: (u_0 − b)²/(δ/2)
    let mut face: Sparse = vec![(0, 1.0)];
    face.extend(beta.iter().map(|&(i, v)| (i, -v)));
    add_sym(&mut k, &face, &face, 2.0 / delta);

    if !data.is_infinity() {
        add_sym(&mut k, &beta, &beta, data.centering_sum() - data.h());
        for (j, a) in data.atoms().iter().enumerate() {
            let e = vec![(n + j, 1.0)];
            add_sym(&mut k, &e, &e, a.weight * a.position);
            add_sym(&mut k, &e, &beta, -2.0 * a.weight);
            mass[(n + j, n + j)] = a.weight;
        }
        if aug == 1 {
            mass[(n + m, n + m)] = 1.0 / data.h0();
        }
    }

    let gamma0_row = dense(dim, &beta);
    let gamma1_row = dense(dim, &face) * (2.0 / delta);

    Ok(ExtensionAssembly {
        layout,
        k,
        m: mass,
        gamma0_row,
        gamma1_row,
        data,
        q: q.clone(),
        n_mesh,
        spectrum: OnceLock::new(),
    })
}

impl ExtensionAssembly {
    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn stiffness(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn mass(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn data(&self) -> &HerglotzData {
        &self.data
    }

    pub fn q(&self) -> &QSpec {
        &self.q
    }

    pub fn n_mesh(&self) -> usize {
        self.n_mesh
    }

    /// Cell centres of the base mesh.
    pub fn centers(&self) -> Vec<f64> {
        let d = 1.0 / self.n_mesh as f64;
        (0..self.n_mesh).map(|i| (i as f64 + 0.5) * d).collect()
    }

    /// Row `r` with `Γ0 x0 = r·v`.
    pub fn gamma0_row(&self) -> &DVector<f64> {
        &self.gamma0_row
    }

    /// Row `r` with `Γ1 x0 ≈ r·v`.
    pub fn gamma1_row(&self) -> &DVector<f64> {
        &self.gamma1_row
    }

    /// Adds a non-symmetric perturbation to `K`. Negative controls only.
    #[doc(hidden)]
    pub fn with_stiffness_defect(&self, eps: f64) -> Self {
        let mut out = self.clone();
        out.k[(0, 1)] += eps;
        out.spectrum = OnceLock::new();
        out
    }

    /// `(‖K − K*‖/‖K‖, ‖M − M*‖/‖M‖)` in the Frobenius norm.
    pub fn hermitian_defect(&self) -> (f64, f64) {
        let rel = |a: &DMatrix<f64>| (a - a.transpose()).norm() / a.norm().max(f64::MIN_POSITIVE);
        (rel(&self.k), rel(&self.m))
    }

    /// Smallest eigenvalue of `M`.
    pub fn mass_min_eigenvalue(&self) -> f64 {
        let m = &self.m;
        let diagonal = (0..m.nrows()).all(|i| (0..m.ncols()).all(|j| i == j || m[(i, j)] == 0.0));
        if diagonal {
            m.diagonal().iter().copied().fold(f64::INFINITY, f64::min)
        } else {
            SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
        }
    }

    fn cholesky(&self) -> Result<Cholesky<f64, nalgebra::Dyn>> {
        Cholesky::new(self.m.clone())
            .ok_or_else(|| Error::InvalidData("mass matrix is not positive definite".into()))
    }

    fn full_spectrum(&self) -> Result<Arc<FullSpectrum>> {
        if let Some(s) = self.spectrum.get() {
            return Ok(s.clone());
        }
        let chol = self.cholesky()?;
        let l = chol.l();
        let lt = l.transpose();
        // C = L⁻¹ K L⁻ᵀ
        let y = l
            .solve_lower_triangular(&self.k)
            .ok_or_else(|| Error::InvalidData("singular Cholesky factor".into()))?;
        let c = l
            .solve_lower_triangular(&y.transpose())
            .ok_or_else(|| Error::InvalidData("singular Cholesky factor".into()))?;
        let c = (&c + c.transpose()) * 0.5;
        let eig = SymmetricEigen::new(c);
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let mut values = Vec::with_capacity(order.len());
        let mut vectors = Vec::with_capacity(order.len());
        for i in order {
            values.push(eig.eigenvalues[i]);
            let z = eig.eigenvectors.column(i).into_owned();
            let v = lt
                .solve_upper_triangular(&z)
                .ok_or_else(|| Error::InvalidData("singular Cholesky factor".into()))?;
            vectors.push(v);
        }
        let full = Arc::new(FullSpectrum { values, vectors });
        Ok(self.spectrum.get_or_init(|| full).clone())
    }

    /// All generalized eigenvalues of `(K, M)` in `[a, b]`, ascending.
    pub fn eigs(&self, window: (f64, f64)) -> Result<SpectrumResult> {
        let full = self.full_spectrum()?;
        let mut out = SpectrumResult {
            eigenvalues: Vec::new(),
            residuals: Vec::new(),
            vectors: Vec::new(),
            layout: self.layout,
        };
        for (l, v) in full.values.iter().zip(&full.vectors) {
            if *l < window.0 || *l > window.1 {
                continue;
            }
            let r = (&self.k * v - &self.m * v * *l).norm() / v.norm();
            out.eigenvalues.push(*l);
            out.residuals.push(r);
            out.vectors.push(v.clone());
        }
        Ok(out)
    }

    /// Distance of `λ` from the pencil spectrum times `λ_min(M)`: a lower
    /// bound for the smallest singular value of `K − λM`.
    pub fn singular_lower_bound(&self, lambda: Complex64) -> Result<f64> {
        let full = self.full_spectrum()?;
        let dist = full
            .values
            .iter()
            .map(|&mu| (lambda - mu).norm())
            .fold(f64::INFINITY, f64::min);
        Ok(dist * self.mass_min_eigenvalue())
    }

    fn shifted_lu(&self, lambda: Complex64) -> Result<nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>> {
        let threshold = 1e-10 * self.k.norm();
        // the spectrum is real, so |Im λ| alone bounds the distance from below
        if lambda.im.abs() * self.mass_min_eigenvalue() <= threshold {
            let bound = self.singular_lower_bound(lambda)?;
            if bound <= threshold {
                return Err(Error::NearEigenvalue { lambda, distance: bound });
            }
        }
        let a = self.k.map(|x| Complex64::new(x, 0.0)) - self.m.map(|x| Complex64::new(x, 0.0)) * lambda;
        Ok(a.lu())
    }

    fn complex_mass(&self) -> DMatrix<Complex64> {
        self.m.map(|x| Complex64::new(x, 0.0))
    }

    /// Solves `(K − λM) ỹ = M x̃`, the weak form of `(Ã − λ) ỹ = x̃`.
    pub fn resolve(&self, lambda: Complex64, x: &BlockVector) -> Result<BlockVector> {
        let flat = x.to_flat();
        if flat.len() != self.layout.dim() {
            return Err(Error::DimensionMismatch { expected: self.layout.dim(), found: flat.len() });
        }
        let lu = self.shifted_lu(lambda)?;
        let rhs = self.complex_mass() * flat;
        let y = lu
            .solve(&rhs)
            .ok_or(Error::NearEigenvalue { lambda, distance: 0.0 })?;
        Ok(BlockVector::from_flat(self.layout, &y))
    }

    /// Column-wise `(K − λM)⁻¹ M X`.
    pub fn resolve_many(&self, lambda: Complex64, x: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
        let lu = self.shifted_lu(lambda)?;
        let rhs = self.complex_mass() * x;
        lu.solve(&rhs).ok_or(Error::NearEigenvalue { lambda, distance: 0.0 })
    }

    /// `‖(K − λM) y − M x‖ / (‖K‖‖y‖ + ‖M x‖)`.
    pub fn resolve_residual(&self, lambda: Complex64, x: &BlockVector, y: &BlockVector) -> f64 {
        let (xf, yf) = (x.to_flat(), y.to_flat());
        let k = self.k.map(|v| Complex64::new(v, 0.0));
        let mx = self.complex_mass() * &xf;
        let r = &k * &yf - self.complex_mass() * &yf * lambda - &mx;
        r.norm() / (self.k.norm() * yf.norm() + mx.norm())
    }

    /// `Γ0 x0` of a block vector.
    pub fn gamma0(&self, v: &BlockVector) -> Complex64 {
        self.gamma0_row.iter().zip(v.to_flat().iter()).map(|(r, x)| *r * x).sum()
    }

    /// Discrete `Γ1 x0` of a block vector.
    pub fn gamma1(&self, v: &BlockVector) -> Complex64 {
        self.gamma1_row.iter().zip(v.to_flat().iter()).map(|(r, x)| *r * x).sum()
    }

    /// The Cholesky factor `Lᵀ` of `M = L Lᵀ`, so `‖Lᵀ v‖ = ‖v‖_M`.
    pub fn mass_sqrt(&self) -> Result<DMatrix<f64>> {
        Ok(self.cholesky()?.l().transpose())
    }

    /// `Γ0` and `Γ1` rows plus `M`-norm for `x̃ = (x, 0, 0)` sampled at the cell centres.
    pub fn base_vector(&self, x: &dyn Fn(f64) -> Complex64) -> BlockVector {
        let base = self.centers().iter().map(|&s| x(s)).collect();
        BlockVector::from_base(self.layout, base).expect("layout-consistent base block")
    }

    /// Assembly header: `{"layout": [n, m, aug], "h0": .., "h": .., "atoms": [[t, w], ..], ...}`.
    pub fn header_json(&self) -> serde_json::Value {
        serde_json::json!({
            "layout": [self.layout.n_base, self.layout.atoms, self.layout.aug],
            "h0": self.data.h0(),
            "h": self.data.h(),
            "atoms": self.data.atoms().iter().map(|a| [a.position, a.weight]).collect::<Vec<_>>(),
            "infinity": self.data.is_infinity(),
            "n_mesh": self.n_mesh,
            "q": self.q,
        })
    }
}

/// Matrix Market coordinate text (`general`, 1-based indices, nonzeros only).
pub fn matrix_market(a: &DMatrix<f64>) -> String {
    let mut entries = Vec::new();
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            if a[(i, j)] != 0.0 {
                entries.push(format!("{} {} {:e}", i + 1, j + 1, a[(i, j)]));
            }
        }
    }
    let mut out = String::from("%%MatrixMarket matrix coordinate real general\n");
    out.push_str(&format!("{} {} {}\n", a.nrows(), a.ncols(), entries.len()));
    for e in entries {
        out.push_str(&e);
        out.push('\n');
    }
    out
}

/// `L²` distance (midpoint rule) between the base block of the discrete
/// resolvent of `(x, 0, 0)` and the boundary-value resolvent `R_f(λ)x`.
pub fn compression_match(
    asm: &ExtensionAssembly,
    model: &SturmLiouvilleModel,
    fd: &HerglotzData,
    lambda: Complex64,
    x: &dyn Fn(f64) -> Complex64,
) -> Result<f64> {
    let discrete = asm.resolve(lambda, &asm.base_vector(x))?;
    let continuous = generalized_resolvent(model, fd, lambda, x)?;
    let delta = 1.0 / asm.n_mesh() as f64;
    let sum: f64 = asm
        .centers()
        .iter()
        .zip(&discrete.base)
        .map(|(&s, d)| (d - continuous.y.interpolate(s)).norm_sqr())
        .sum();
    Ok((delta * sum).sqrt())
}

/// Singular values (descending) of `[Lᵀ (K − λ_i M)⁻¹ M (x_j, 0, 0)]_{i,j}`.
pub fn minimality_singular_values(
    asm: &ExtensionAssembly,
    lambdas: &[Complex64],
    xs: &[Vec<Complex64>],
) -> Result<Vec<f64>> {
    let layout = asm.layout();
    let needed = layout.atoms + layout.aug + 1;
    if lambdas.len() < needed {
        return Err(Error::InvalidArgument(format!(
            "need at least {needed} λ-samples, got {}",
            lambdas.len()
        )));
    }
    if let Some(l) = lambdas.iter().find(|l| l.im == 0.0) {
        return Err(Error::InvalidArgument(format!("λ = {l} is real")));
    }
    let dim = layout.dim();
    let mut x = DMatrix::zeros(dim, xs.len());
    for (j, col) in xs.iter().enumerate() {
        if col.len() != layout.n_base {
            return Err(Error::DimensionMismatch { expected: layout.n_base, found: col.len() });
        }
        for (i, v) in col.iter().enumerate() {
            x[(i, j)] = *v;
        }
    }
    let root = asm.mass_sqrt()?.map(|v| Complex64::new(v, 0.0));
    let mut big = DMatrix::zeros(dim, lambdas.len() * xs.len());
    for (k, &lambda) in lambdas.iter().enumerate() {
        let y = &root * asm.resolve_many(lambda, &x)?;
        big.columns_mut(k * xs.len(), xs.len()).copy_from(&y);
    }
    let mut sv: Vec<f64> = big.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv)
}

/// Numerical rank (cutoff `1e-8` relative) of the resolvent images of the
/// base block; equals `dim` iff the resolvent span fills the extension space.
pub fn minimality_rank(
    asm: &ExtensionAssembly,
    lambdas: &[Complex64],
    xs: &[Vec<Complex64>],
) -> Result<usize> {
    let sv = minimality_singular_values(asm, lambdas, xs)?;
    let top = sv.first().copied().unwrap_or(0.0);
    Ok(sv.iter().filter(|&&s| s > 1e-8 * top).count())
}

/// Unit vectors of the base block (cell indicators).
pub fn base_unit_vectors(layout: Layout) -> Vec<Vec<Complex64>> {
    (0..layout.n_base)
        .map(|i| {
            let mut v = vec![ZERO; layout.n_base];
            v[i] = Complex64::new(1.0, 0.0);
            v
        })
        .collect()
}

/// How well a pencil eigenpair matches the boundary-value problem.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CorrespondenceRecord {
    /// `min_c ‖x0 − c u_λ‖ / ‖x0‖` with `u_λ` the shooting solution.
    pub ode_residual: f64,
    /// `|χ_f(λ)| / max(|Γ1 u_λ|, |f(λ) Γ0 u_λ|)`.
    pub bc_residual: f64,
    /// `|Γ1 x0 + f(λ) Γ0 x0|` with the discrete boundary rows, relative.
    pub discrete_bc_residual: f64,
    /// `max_j |x1j (t_j − λ) − Γ0 x0|`, relative.
    pub atom_residual: f64,
    /// `|x2 + h0 Γ0 x0|`, relative (0 when there is no `h0` block).
    pub aug_residual: f64,
}

pub fn eigenvector_correspondence(
    asm: &ExtensionAssembly,
    model: &SturmLiouvilleModel,
    fd: &HerglotzData,
    eigenvalue: f64,
    vector: &BlockVector,
) -> Result<CorrespondenceRecord> {
    for a in fd.atoms() {
        if (eigenvalue - a.position).abs() <= 1e-6 * (1.0 + a.position.abs()) {
            return Err(Error::AtomCollision { lambda: eigenvalue, position: a.position });
        }
    }
    let lambda = Complex64::new(eigenvalue, 0.0);
    let u = model.deficiency_solution(lambda)?;
    let us: Vec<Complex64> = asm.centers().iter().map(|&s| u.interpolate(s)).collect();
    let num: Complex64 = vector.base.iter().zip(&us).map(|(x, u)| x * u.conj()).sum();
    let den: f64 = us.iter().map(|u| u.norm_sqr()).sum();
    let c = num / den;
    let resid: f64 = vector.base.iter().zip(&us).map(|(x, u)| (x - c * u).norm_sqr()).sum();
    let norm: f64 = vector.base.iter().map(|x| x.norm_sqr()).sum();
    let ode_residual = (resid / norm).sqrt();

    let fvalue = fd.eval(lambda)?;
    let chi = char_from_parts(model, &u, fvalue);
    let (g0u, g1u) = (model.gamma0(&u), model.gamma1(&u));
    let scale = match fvalue {
        FValue::Infinity => g0u.norm().max(g1u.norm()),
        FValue::Finite(f) => g1u.norm().max(f.norm() * g0u.norm()),
    };
    let bc_residual = chi.norm() / scale;

    let b = asm.gamma0(vector);
    let g1 = asm.gamma1(vector);
    let discrete_bc_residual = match fvalue {
        FValue::Infinity => b.norm() / g1.norm().max(f64::MIN_POSITIVE),
        FValue::Finite(f) => (g1 + f * b).norm() / g1.norm().max((f * b).norm()).max(f64::MIN_POSITIVE),
    };

    let mut atom_scale = b.norm();
    let mut atom_abs: f64 = 0.0;
    for (x1, a) in vector.atoms.iter().zip(fd.atoms()) {
        let t = x1 * (a.position - eigenvalue);
        atom_scale = atom_scale.max(t.norm());
        atom_abs = atom_abs.max((t - b).norm());
    }
    let atom_residual = if vector.atoms.is_empty() { 0.0 } else { atom_abs / atom_scale.max(f64::MIN_POSITIVE) };

    let aug_residual = match vector.aug {
        Some(x2) => {
            let hb = fd.h0() * b;
            (x2 + hb).norm() / x2.norm().max(hb.norm()).max(f64::MIN_POSITIVE)
        }
        None => 0.0,
    };

    Ok(CorrespondenceRecord {
        ode_residual,
        bc_residual,
        discrete_bc_residual,
        atom_residual,
        aug_residual,
    })
}

/// Real roots of `χ_f` in `window` by a sign-change scan on `steps` cells
/// followed by bisection to width `≤ tol`.
pub fn char_roots_with_steps(
    model: &dyn TripletSystem,
    fd: &HerglotzData,
    window: (f64, f64),
    tol: f64,
    steps: usize,
) -> Result<Vec<f64>> {
    let (a, b) = window;
    if !(a < b) || !(tol > 0.0) || steps == 0 {
        return Err(Error::InvalidArgument("bad root-scan parameters".into()));
    }
    if !fd.is_infinity() {
        if let Some(atom) = fd.atoms().iter().find(|t| t.position >= a - tol && t.position <= b + tol) {
            return Err(Error::AtomInWindow { position: atom.position });
        }
    }
    let g = |x: f64| -> Result<f64> {
        let l = Complex64::new(x, 0.0);
        let chi = crate::models::char_function(model, fd, l)?;
        Ok((model.char_phase(l) * chi).re)
    };
    let h = (b - a) / steps as f64;
    let mut roots = Vec::new();
    let mut x0 = a;
    let mut g0 = g(x0)?;
    for i in 1..=steps {
        let x1 = if i == steps { b } else { a + i as f64 * h };
        let g1 = g(x1)?;
        if g0 == 0.0 {
            roots.push(x0);
        } else if g0 * g1 < 0.0 {
            let (mut lo, mut hi, mut glo) = (x0, x1, g0);
            while hi - lo > tol {
                let mid = 0.5 * (lo + hi);
                let gm = g(mid)?;
                if gm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if glo * gm < 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    glo = gm;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        x0 = x1;
        g0 = g1;
    }
    if g0 == 0.0 {
        roots.push(x0);
    }
    Ok(roots)
}

pub fn char_roots(
    model: &dyn TripletSystem,
    fd: &HerglotzData,
    window: (f64, f64),
    tol: f64,
) -> Result<Vec<f64>> {
    char_roots_with_steps(model, fd, window, tol, 1024)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::herglotz::Atom;
    use std::f64::consts::PI;

    fn q0() -> QSpec {
        QSpec::Constant(0.0)
    }

    #[test]
    fn layouts() {
        let n = 40;
        let lin = HerglotzData::new(1.0, 0.0, vec![]).unwrap();
        let asm = assemble_extension(&q0(), &lin, n).unwrap();
        assert_eq!(asm.layout(), Layout { n_base: n, atoms: 0, aug: 1 });
        assert_eq!(asm.mass()[(n, n)], 1.0);

        let half = HerglotzData::new(0.5, 0.0, vec![]).unwrap();
        let asm = assemble_extension(&q0(), &half, n).unwrap();
        assert_eq!(asm.mass()[(n, n)], 2.0);

        let inf = assemble_extension(&q0(), &HerglotzData::infinity(), n).unwrap();
        assert_eq!(inf.layout(), Layout { n_base: n, atoms: 0, aug: 0 });

        let constant = assemble_extension(&q0(), &HerglotzData::constant(2.0).unwrap(), n).unwrap();
        assert_eq!(constant.layout(), Layout { n_base: n, atoms: 0, aug: 0 });

        let two = HerglotzData::new(1.0, 0.0, vec![Atom::new(-1.0, 1.0), Atom::new(2.0, 3.0)]).unwrap();
        let asm = assemble_extension(&q0(), &two, n).unwrap();
        assert_eq!(asm.layout().dim(), n + 3);
        assert_eq!(asm.mass()[(n + 1, n + 1)], 3.0);

        assert!(assemble_extension(&q0(), &lin, 8).is_err());
        let bad = HerglotzData::new_unchecked(0.0, 0.0, vec![Atom::new(0.0, -1.0)]);
        assert!(matches!(assemble_extension(&q0(), &bad, n), Err(Error::InvalidData(_))));
    }

    #[test]
    fn dirichlet_and_neumann_spectra() {
        let inf = assemble_extension(&q0(), &HerglotzData::infinity(), 200).unwrap();
        let s = inf.eigs((0.0, 120.0)).unwrap();
        assert_eq!(s.len(), 3);
        for (k, l) in s.eigenvalues.iter().enumerate() {
            let exact = ((k + 1) as f64 * PI).powi(2);
            assert!((l - exact).abs() / exact < 1e-3);
        }
        let neu = assemble_extension(&q0(), &HerglotzData::constant(0.0).unwrap(), 200).unwrap();
        let s = neu.eigs((0.0, 60.0)).unwrap();
        for (k, l) in s.eigenvalues.iter().enumerate() {
            let exact = ((k as f64 + 0.5) * PI).powi(2);
            assert!((l - exact).abs() / exact < 1e-3);
        }
        assert!(s.residuals.iter().all(|&r| r < 1e-10 * neu.stiffness().norm()));
    }

    #[test]
    fn resolve_dirichlet_eigenfunction() {
        let asm = assemble_extension(&q0(), &HerglotzData::infinity(), 200).unwrap();
        let i = Complex64::new(0.0, 1.0);
        let x = asm.base_vector(&|s| Complex64::new((PI * s).sin(), 0.0));
        let y = asm.resolve(i, &x).unwrap();
        assert!(asm.resolve_residual(i, &x, &y) < 1e-10);
        let k = 1.0 / (Complex64::new(PI * PI, 0.0) - i);
        for (s, v) in asm.centers().iter().zip(&y.base) {
            assert!((v - k * (PI * s).sin()).norm() < 1e-5);
        }
        let yc = asm.resolve(i.conj(), &x).unwrap();
        for (a, b) in y.base.iter().zip(&yc.base) {
            assert!((a.conj() - b).norm() < 1e-12);
        }
        let near = asm.eigs((0.0, 20.0)).unwrap().eigenvalues[0];
        assert!(matches!(asm.resolve(Complex64::new(near, 0.0), &x), Err(Error::NearEigenvalue { .. })));
    }

    #[test]
    fn canonical_rank_is_base_dimension() {
        let asm = assemble_extension(&q0(), &HerglotzData::constant(2.0).unwrap(), 30).unwrap();
        let lambdas = [Complex64::new(0.0, 1.0), Complex64::new(0.0, 2.0), Complex64::new(1.0, 1.0)];
        let rank = minimality_rank(&asm, &lambdas, &base_unit_vectors(asm.layout())).unwrap();
        assert_eq!(rank, 30);
        assert!(minimality_rank(&asm, &[Complex64::new(1.0, 0.0)], &base_unit_vectors(asm.layout())).is_err());
    }

    #[test]
    fn roots_reject_atoms_in_window() {
        let m = SturmLiouvilleModel::new(q0(), 64).unwrap();
        let f = HerglotzData::new(0.0, 0.0, vec![Atom::new(0.0, 1.0)]).unwrap();
        assert!(matches!(char_roots(&m, &f, (-1.0, 5.0), 1e-10), Err(Error::AtomInWindow { .. })));
    }

    #[test]
    fn matrix_market_format() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, -2.5, 4.0]);
        let text = matrix_market(&a);
        assert_eq!(
            text,
            "%%MatrixMarket matrix coordinate real general\n2 2 3\n1 1 1e0\n2 1 -2.5e0\n2 2 4e0\n"
        );
    }
}
