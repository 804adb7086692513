//! Model operators with deficiency indices (1,1) and their boundary triplets.
//!
//! - [`FirstOrderModel`]: `A* = −i d/dx` on `(0,1)` with
//!   `Γ0 y = y(0) − y(1)`, `Γ1 y = (i/2)(y(0) + y(1))`.
//! - [`SturmLiouvilleModel`]: `A* = −d²/dx² + q` on `(0,1)` with `y(1) = 0`
//!   built into the admissible class and `Γ0 y = y(0)`, `Γ1 y = y'(0)`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::herglotz::{FValue, HerglotzData};
use crate::quadrature::{gauss_legendre, simpson_weights};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

type RealFn = Arc<dyn Fn(f64) -> Complex64 + Send + Sync>;

/// A smooth test function together with its first two derivatives.
#[derive(Clone)]
pub struct SmoothFunction {
    pub f: RealFn,
    pub d1: RealFn,
    pub d2: RealFn,
}

impl fmt::Debug for SmoothFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SmoothFunction")
    }
}

impl SmoothFunction {
    pub fn new<F, D1, D2>(f: F, d1: D1, d2: D2) -> Self
    where
        F: Fn(f64) -> Complex64 + Send + Sync + 'static,
        D1: Fn(f64) -> Complex64 + Send + Sync + 'static,
        D2: Fn(f64) -> Complex64 + Send + Sync + 'static,
    {
        Self { f: Arc::new(f), d1: Arc::new(d1), d2: Arc::new(d2) }
    }

    /// `Σ_k a_k e^{i ν_k x}`.
    pub fn trig(terms: Vec<(f64, Complex64)>) -> Self {
        let terms = Arc::new(terms);
        let (t1, t2) = (terms.clone(), terms.clone());
        Self::new(
            move |x| terms.iter().map(|&(nu, a)| a * (I * nu * x).exp()).sum(),
            move |x| t1.iter().map(|&(nu, a)| a * I * nu * (I * nu * x).exp()).sum(),
            move |x| t2.iter().map(|&(nu, a)| -a * nu * nu * (I * nu * x).exp()).sum(),
        )
    }

    /// `(1 − x)·self`, which vanishes at `x = 1`.
    pub fn times_one_minus_x(self) -> Self {
        let (f, d1, d2) = (self.f, self.d1, self.d2);
        let (f1, d1b) = (f.clone(), d1.clone());
        Self::new(
            move |x| (1.0 - x) * f(x),
            move |x| (1.0 - x) * d1(x) - f1(x),
            move |x| (1.0 - x) * d2(x) - 2.0 * d1b(x),
        )
    }

    /// `sin²(πx)·cos(mπx)`: vanishes with its derivative at 0 and at 1, so it
    /// lies in the kernel of Γ for both models.
    pub fn bump(m: usize) -> Self {
        let m = m as f64;
        let parts = move |x: f64| {
            let s = (PI * x).sin().powi(2);
            let s1 = PI * (2.0 * PI * x).sin();
            let s2 = 2.0 * PI * PI * (2.0 * PI * x).cos();
            let c = (m * PI * x).cos();
            let c1 = -m * PI * (m * PI * x).sin();
            let c2 = -(m * PI) * (m * PI) * c;
            (s * c, s1 * c + s * c1, s2 * c + 2.0 * s1 * c1 + s * c2)
        };
        Self::new(
            move |x| Complex64::new(parts(x).0, 0.0),
            move |x| Complex64::new(parts(x).1, 0.0),
            move |x| Complex64::new(parts(x).2, 0.0),
        )
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        (self.f)(x)
    }
}

/// A random trigonometric polynomial `Σ_{|k| ≤ degree} a_k e^{ikπx}`
/// with coefficients uniform in the unit square.
pub fn random_trig<R: Rng>(rng: &mut R, degree: i32) -> SmoothFunction {
    let terms = (-degree..=degree)
        .map(|k| {
            let a = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            (k as f64 * PI, a)
        })
        .collect();
    SmoothFunction::trig(terms)
}

/// A random smooth function vanishing at `x = 1` (admissible for the
/// Sturm-Liouville model).
pub fn random_vanishing_at_one<R: Rng>(rng: &mut R, degree: i32) -> SmoothFunction {
    random_trig(rng, degree).times_one_minus_x()
}

/// An element of `D(A*)` sampled on the owning model's nodes, with boundary
/// values and derivatives at `x = 0` and `x = 1`.
#[derive(Debug, Clone)]
pub struct BoundaryFunction {
    nodes: Arc<[f64]>,
    values: Vec<Complex64>,
    derivs: Vec<Complex64>,
    left: (Complex64, Complex64),
    right: (Complex64, Complex64),
}

impl BoundaryFunction {
    pub fn new(
        nodes: Arc<[f64]>,
        values: Vec<Complex64>,
        derivs: Vec<Complex64>,
        left: (Complex64, Complex64),
        right: (Complex64, Complex64),
    ) -> Result<Self> {
        for v in [&values, &derivs] {
            if v.len() != nodes.len() {
                return Err(Error::DimensionMismatch { expected: nodes.len(), found: v.len() });
            }
        }
        Ok(Self { nodes, values, derivs, left, right })
    }

    pub fn nodes(&self) -> &Arc<[f64]> {
        &self.nodes
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn derivs(&self) -> &[Complex64] {
        &self.derivs
    }

    /// `(y(0), y'(0))`.
    pub fn left(&self) -> (Complex64, Complex64) {
        self.left
    }

    /// `(y(1), y'(1))`.
    pub fn right(&self) -> (Complex64, Complex64) {
        self.right
    }

    fn same_mesh(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.nodes, &other.nodes) || self.nodes[..] == other.nodes[..]
    }

    /// `self + c·other`.
    pub fn add_scaled(&self, c: Complex64, other: &Self) -> Result<Self> {
        if !self.same_mesh(other) {
            return Err(Error::MeshMismatch);
        }
        let zip = |a: &[Complex64], b: &[Complex64]| -> Vec<Complex64> {
            a.iter().zip(b).map(|(a, b)| a + c * b).collect()
        };
        Ok(Self {
            nodes: self.nodes.clone(),
            values: zip(&self.values, &other.values),
            derivs: zip(&self.derivs, &other.derivs),
            left: (self.left.0 + c * other.left.0, self.left.1 + c * other.left.1),
            right: (self.right.0 + c * other.right.0, self.right.1 + c * other.right.1),
        })
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            nodes: self.nodes.clone(),
            values: self.values.iter().map(|v| c * v).collect(),
            derivs: self.derivs.iter().map(|v| c * v).collect(),
            left: (c * self.left.0, c * self.left.1),
            right: (c * self.right.0, c * self.right.1),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .map(|v| v.norm())
            .chain([self.left.0.norm(), self.right.0.norm()])
            .fold(0.0, f64::max)
    }

    fn knot(&self, k: usize) -> (f64, Complex64, Complex64) {
        let lead = usize::from(self.nodes[0] > 0.0);
        let n = self.nodes.len();
        if lead == 1 && k == 0 {
            return (0.0, self.left.0, self.left.1);
        }
        let j = k - lead;
        if j < n {
            (self.nodes[j], self.values[j], self.derivs[j])
        } else {
            (1.0, self.right.0, self.right.1)
        }
    }

    fn knot_count(&self) -> usize {
        self.nodes.len()
            + usize::from(self.nodes[0] > 0.0)
            + usize::from(*self.nodes.last().unwrap() < 1.0)
    }

    /// Cubic Hermite interpolation through the stored values and derivatives.
    pub fn interpolate(&self, x: f64) -> Complex64 {
        let count = self.knot_count();
        let (mut lo, mut hi) = (0, count - 1);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.knot(mid).0 <= x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (x0, y0, d0) = self.knot(lo);
        let (x1, y1, d1) = self.knot(hi);
        let h = x1 - x0;
        if h == 0.0 {
            return y0;
        }
        let s = (x - x0) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        y0 * h00 + d0 * (h10 * h) + y1 * h01 + d1 * (h11 * h)
    }
}

/// Potential of the Sturm-Liouville model: a constant, or samples on a
/// uniform grid over `[0, 1]` joined linearly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QSpec {
    Constant(f64),
    Samples(Vec<f64>),
}

impl Default for QSpec {
    fn default() -> Self {
        QSpec::Constant(0.0)
    }
}

impl QSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            QSpec::Constant(c) if c.is_finite() => Ok(()),
            QSpec::Samples(s) if s.len() >= 2 && s.iter().all(|v| v.is_finite()) => Ok(()),
            _ => Err(Error::InvalidArgument(
                "q must be a finite constant or at least two finite samples".into(),
            )),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            QSpec::Constant(c) => *c,
            QSpec::Samples(s) => {
                let cells = (s.len() - 1) as f64;
                let pos = (x.clamp(0.0, 1.0) * cells).min(cells);
                let i = (pos.floor() as usize).min(s.len() - 2);
                let frac = pos - i as f64;
                s[i] * (1.0 - frac) + s[i + 1] * frac
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    FirstOrder,
    SturmLiouville,
}

/// `{"model": "first_order"|"sturm_liouville", "n": int, "q": spec}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDescriptor {
    pub model: ModelKind,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<QSpec>,
}

impl ModelDescriptor {
    pub fn build(&self) -> Result<Box<dyn TripletSystem>> {
        Ok(match self.model {
            ModelKind::FirstOrder => Box::new(FirstOrderModel::new(self.n)?),
            ModelKind::SturmLiouville => Box::new(SturmLiouvilleModel::new(
                self.q.clone().unwrap_or_default(),
                self.n,
            )?),
        })
    }
}

/// Capability bundle for `(A*, Γ0, Γ1)` of a concrete model.
pub trait TripletSystem: Send + Sync {
    fn descriptor(&self) -> ModelDescriptor;

    /// Quadrature nodes carrying the sampled values.
    fn nodes(&self) -> &Arc<[f64]>;

    fn weights(&self) -> &[f64];

    /// `Σ_k w_k a_k conj(b_k)`.
    fn inner_values(&self, a: &[Complex64], b: &[Complex64]) -> Complex64 {
        self.weights()
            .iter()
            .zip(a.iter().zip(b))
            .map(|(w, (a, b))| *w * a * b.conj())
            .sum()
    }

    fn inner(&self, x: &BoundaryFunction, y: &BoundaryFunction) -> Complex64 {
        self.inner_values(x.values(), y.values())
    }

    fn norm(&self, x: &BoundaryFunction) -> f64 {
        self.inner(x, x).re.max(0.0).sqrt()
    }

    /// The normalised solution of `A* u = λ u` in the admissible class.
    fn deficiency_solution(&self, lambda: Complex64) -> Result<BoundaryFunction>;

    /// Some solution of `A* y − λ y = g` in the admissible class.
    fn particular_solution(
        &self,
        lambda: Complex64,
        g: &dyn Fn(f64) -> Complex64,
    ) -> Result<BoundaryFunction>;

    fn gamma0(&self, u: &BoundaryFunction) -> Complex64;

    fn gamma1(&self, u: &BoundaryFunction) -> Complex64;

    fn sample(&self, x: &SmoothFunction) -> BoundaryFunction;

    /// `A* x` at the nodes.
    fn apply_adjoint(&self, x: &SmoothFunction) -> Vec<Complex64>;

    fn is_admissible(&self, u: &BoundaryFunction) -> bool;

    /// Unimodular factor making `phase·χ_f` real on the real axis.
    fn char_phase(&self, _lambda: Complex64) -> Complex64 {
        Complex64::new(1.0, 0.0)
    }
}

/// `A* = −i d/dx` on `(0, 1)`, Gauss-Legendre inner product.
#[derive(Debug, Clone)]
pub struct FirstOrderModel {
    nodes: Arc<[f64]>,
    weights: Vec<f64>,
}

impl FirstOrderModel {
    pub fn new(n_quad: usize) -> Result<Self> {
        if n_quad < 32 {
            return Err(Error::InvalidArgument(format!("n_quad = {n_quad} < 32")));
        }
        let (nodes, weights) = gauss_legendre(n_quad);
        Ok(Self { nodes: nodes.into(), weights })
    }
}

impl TripletSystem for FirstOrderModel {
    fn descriptor(&self) -> ModelDescriptor {
        ModelDescriptor { model: ModelKind::FirstOrder, n: self.nodes.len(), q: None }
    }

    fn nodes(&self) -> &Arc<[f64]> {
        &self.nodes
    }

    fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `u(x) = e^{iλx}`, `u(0) = 1`.
    fn deficiency_solution(&self, lambda: Complex64) -> Result<BoundaryFunction> {
        let e = |x: f64| (I * lambda * x).exp();
        let values: Vec<Complex64> = self.nodes.iter().map(|&x| e(x)).collect();
        let derivs = values.iter().map(|v| I * lambda * v).collect();
        BoundaryFunction::new(
            self.nodes.clone(),
            values,
            derivs,
            (e(0.0), I * lambda),
            (e(1.0), I * lambda * e(1.0)),
        )
    }

    /// `y(x) = i e^{iλx} ∫_0^x e^{−iλs} g(s) ds`, so `y(0) = 0`.
    fn particular_solution(
        &self,
        lambda: Complex64,
        g: &dyn Fn(f64) -> Complex64,
    ) -> Result<BoundaryFunction> {
        let primitive = |x: f64| -> Complex64 {
            self.nodes
                .iter()
                .zip(&self.weights)
                .map(|(&s, &w)| {
                    let s = s * x;
                    w * x * (-I * lambda * s).exp() * g(s)
                })
                .sum()
        };
        let y = |x: f64| I * (I * lambda * x).exp() * primitive(x);
        let values: Vec<Complex64> = self.nodes.iter().map(|&x| y(x)).collect();
        let derivs = self
            .nodes
            .iter()
            .zip(&values)
            .map(|(&x, v)| I * lambda * v + I * g(x))
            .collect();
        let y1 = y(1.0);
        BoundaryFunction::new(
            self.nodes.clone(),
            values,
            derivs,
            (ZERO, I * g(0.0)),
            (y1, I * lambda * y1 + I * g(1.0)),
        )
    }

    fn gamma0(&self, u: &BoundaryFunction) -> Complex64 {
        u.left().0 - u.right().0
    }

    fn gamma1(&self, u: &BoundaryFunction) -> Complex64 {
        0.5 * I * (u.left().0 + u.right().0)
    }

    fn sample(&self, x: &SmoothFunction) -> BoundaryFunction {
        BoundaryFunction {
            nodes: self.nodes.clone(),
            values: self.nodes.iter().map(|&s| (x.f)(s)).collect(),
            derivs: self.nodes.iter().map(|&s| (x.d1)(s)).collect(),
            left: ((x.f)(0.0), (x.d1)(0.0)),
            right: ((x.f)(1.0), (x.d1)(1.0)),
        }
    }

    fn apply_adjoint(&self, x: &SmoothFunction) -> Vec<Complex64> {
        self.nodes.iter().map(|&s| -I * (x.d1)(s)).collect()
    }

    fn is_admissible(&self, _u: &BoundaryFunction) -> bool {
        true
    }

    /// `−i e^{−iλ/2}`: turns `Γ0 u = 1 − e^{iλ}` into `−2 sin(λ/2)` and
    /// `Γ1 u` into `cos(λ/2)`.
    fn char_phase(&self, lambda: Complex64) -> Complex64 {
        -I * (-0.5 * I * lambda).exp()
    }
}

/// `A* = −d²/dx² + q` on `(0, 1)` with `y(1) = 0`; RK4 shooting on a
/// uniform mesh and composite Simpson inner product.
#[derive(Debug, Clone)]
pub struct SturmLiouvilleModel {
    q: QSpec,
    nodes: Arc<[f64]>,
    weights: Vec<f64>,
}

impl SturmLiouvilleModel {
    pub fn new(q: QSpec, n_mesh: usize) -> Result<Self> {
        if n_mesh < 16 {
            return Err(Error::InvalidArgument(format!("n_mesh = {n_mesh} < 16")));
        }
        q.validate()?;
        let h = 1.0 / n_mesh as f64;
        let nodes: Vec<f64> = (0..=n_mesh).map(|i| i as f64 * h).collect();
        Ok(Self { q, nodes: nodes.into(), weights: simpson_weights(n_mesh, h) })
    }

    pub fn q(&self) -> &QSpec {
        &self.q
    }

    pub fn n_mesh(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Integrates `A* y − λ y = g`, i.e. `y'' = (q − λ) y − g`, backwards
    /// from `x = 1` with `y(1) = y_end`, `y'(1) = dy_end`.
    pub fn shoot(
        &self,
        lambda: Complex64,
        y_end: Complex64,
        dy_end: Complex64,
        source: Option<&dyn Fn(f64) -> Complex64>,
    ) -> Result<BoundaryFunction> {
        let n = self.n_mesh();
        let h = -1.0 / n as f64;
        let rhs = |x: f64, y: Complex64, p: Complex64| -> (Complex64, Complex64) {
            let g = source.map_or(ZERO, |g| g(x));
            (p, (self.q.eval(x) - lambda) * y - g)
        };
        let mut values = vec![ZERO; n + 1];
        let mut derivs = vec![ZERO; n + 1];
        let (mut y, mut p) = (y_end, dy_end);
        values[n] = y;
        derivs[n] = p;
        for i in (1..=n).rev() {
            let x = self.nodes[i];
            let (k1y, k1p) = rhs(x, y, p);
            let (k2y, k2p) = rhs(x + 0.5 * h, y + 0.5 * h * k1y, p + 0.5 * h * k1p);
            let (k3y, k3p) = rhs(x + 0.5 * h, y + 0.5 * h * k2y, p + 0.5 * h * k2p);
            let (k4y, k4p) = rhs(x + h, y + h * k3y, p + h * k3p);
            y += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
            p += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
            if !(y.norm() <= 1e12) {
                return Err(Error::ShootingBlowup { x: self.nodes[i - 1] });
            }
            values[i - 1] = y;
            derivs[i - 1] = p;
        }
        let left = (values[0], derivs[0]);
        let right = (values[n], derivs[n]);
        BoundaryFunction::new(self.nodes.clone(), values, derivs, left, right)
    }
}

impl TripletSystem for SturmLiouvilleModel {
    fn descriptor(&self) -> ModelDescriptor {
        ModelDescriptor {
            model: ModelKind::SturmLiouville,
            n: self.n_mesh(),
            q: Some(self.q.clone()),
        }
    }

    fn nodes(&self) -> &Arc<[f64]> {
        &self.nodes
    }

    fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Shooting data `y(1) = 0`, `y'(1) = −1`.
    fn deficiency_solution(&self, lambda: Complex64) -> Result<BoundaryFunction> {
        self.shoot(lambda, ZERO, Complex64::new(-1.0, 0.0), None)
    }

    /// Shooting data `y(1) = y'(1) = 0`.
    fn particular_solution(
        &self,
        lambda: Complex64,
        g: &dyn Fn(f64) -> Complex64,
    ) -> Result<BoundaryFunction> {
        self.shoot(lambda, ZERO, ZERO, Some(g))
    }

    fn gamma0(&self, u: &BoundaryFunction) -> Complex64 {
        u.left().0
    }

    fn gamma1(&self, u: &BoundaryFunction) -> Complex64 {
        u.left().1
    }

    fn sample(&self, x: &SmoothFunction) -> BoundaryFunction {
        let values: Vec<Complex64> = self.nodes.iter().map(|&s| (x.f)(s)).collect();
        let derivs: Vec<Complex64> = self.nodes.iter().map(|&s| (x.d1)(s)).collect();
        let n = self.nodes.len() - 1;
        BoundaryFunction {
            left: (values[0], derivs[0]),
            right: (values[n], derivs[n]),
            nodes: self.nodes.clone(),
            values,
            derivs,
        }
    }

    fn apply_adjoint(&self, x: &SmoothFunction) -> Vec<Complex64> {
        self.nodes
            .iter()
            .map(|&s| -(x.d2)(s) + self.q.eval(s) * (x.f)(s))
            .collect()
    }

    fn is_admissible(&self, u: &BoundaryFunction) -> bool {
        u.right().0.norm() <= 1e-12 * u.max_abs().max(1.0)
    }
}

/// `χ_f(λ) = Γ1 u_λ + f(λ) Γ0 u_λ`, and `χ_∞(λ) = Γ0 u_λ`.
pub fn char_function(
    model: &dyn TripletSystem,
    fd: &HerglotzData,
    lambda: Complex64,
) -> Result<Complex64> {
    let fvalue = fd.eval(lambda)?;
    let u = model.deficiency_solution(lambda)?;
    Ok(char_from_parts(model, &u, fvalue))
}

pub(crate) fn char_from_parts(
    model: &dyn TripletSystem,
    u: &BoundaryFunction,
    fvalue: FValue,
) -> Complex64 {
    match fvalue {
        FValue::Infinity => model.gamma0(u),
        FValue::Finite(f) => model.gamma1(u) + f * model.gamma0(u),
    }
}

/// `|⟨A*x,y⟩ − ⟨x,A*y⟩ − (Γ1x·conj(Γ0y) − Γ0x·conj(Γ1y))|` for smooth admissible `x`, `y`,
/// relative to `‖A*x‖‖y‖ + ‖x‖‖A*y‖`.
pub fn green_residual(model: &dyn TripletSystem, x: &SmoothFunction, y: &SmoothFunction) -> f64 {
    let (xs, ys) = (model.sample(x), model.sample(y));
    let (ax, ay) = (model.apply_adjoint(x), model.apply_adjoint(y));
    let lhs = model.inner_values(&ax, ys.values()) - model.inner_values(xs.values(), &ay);
    let rhs = model.gamma1(&xs) * model.gamma0(&ys).conj()
        - model.gamma0(&xs) * model.gamma1(&ys).conj();
    let norm = |v: &[Complex64]| model.inner_values(v, v).re.max(0.0).sqrt();
    let scale = norm(&ax) * norm(ys.values()) + norm(xs.values()) * norm(&ay);
    (lhs - rhs).norm() / scale.max(f64::MIN_POSITIVE)
}

/// Weak residual of `A* y − λ y = g`: the largest
/// `|⟨y, Aφ⟩ − λ⟨y, φ⟩ − ⟨g, φ⟩| / ‖φ‖` over bumps `φ ∈ ker Γ`.
pub fn weak_ode_residual(
    model: &dyn TripletSystem,
    y: &BoundaryFunction,
    lambda: Complex64,
    g: &dyn Fn(f64) -> Complex64,
) -> f64 {
    let gs: Vec<Complex64> = model.nodes().iter().map(|&s| g(s)).collect();
    (0..4)
        .map(|m| {
            let phi = SmoothFunction::bump(m);
            let ps = model.sample(&phi);
            let aphi = model.apply_adjoint(&phi);
            let r = model.inner_values(y.values(), &aphi)
                - lambda * model.inner_values(y.values(), ps.values())
                - model.inner_values(&gs, ps.values());
            r.norm() / model.norm(&ps)
        })
        .fold(0.0, f64::max)
}
