//! Herglotz-Nevanlinna functions given by their integral representation
//!
//! ```text
//! f(λ) = h0·λ + h + Σ_j w_j (1/(t_j − λ) − t_j/(1 + t_j²))
//! ```
//!
//! with `h0 ≥ 0`, `h ∈ R` and a finite atomic measure `σ = Σ_j w_j δ_{t_j}`.
//! The constant function `f ≡ ∞` is a separate marker, not a large number.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// A point mass of the representing measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub position: f64,
    pub weight: f64,
}

impl Atom {
    pub fn new(position: f64, weight: f64) -> Self {
        Self { position, weight }
    }

    /// `t / (1 + t²)`, the normalisation term of the representation.
    pub fn centering(&self) -> f64 {
        self.position / (1.0 + self.position * self.position)
    }
}

/// A value of `f` on the extended complex plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FValue {
    Finite(Complex64),
    Infinity,
}

impl FValue {
    pub fn finite(self) -> Option<Complex64> {
        match self {
            FValue::Finite(z) => Some(z),
            FValue::Infinity => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, FValue::Infinity)
    }
}

/// The contractive parameter `ω = (f − i)/(f + i)`; `ω = 1` is the image of `f = ∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Omega(pub Complex64);

/// Representation data `(h0, h, σ)` of a Herglotz-Nevanlinna function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HerglotzRepr", into = "HerglotzRepr")]
pub struct HerglotzData {
    h0: f64,
    h: f64,
    atoms: Vec<Atom>,
    infinity: bool,
}

#[derive(Serialize, Deserialize)]
struct HerglotzRepr {
    #[serde(default)]
    h0: f64,
    #[serde(default)]
    h: f64,
    #[serde(default)]
    atoms: Vec<[f64; 2]>,
    #[serde(default)]
    infinity: bool,
}

impl TryFrom<HerglotzRepr> for HerglotzData {
    type Error = Error;

    fn try_from(repr: HerglotzRepr) -> Result<Self> {
        if repr.infinity {
            return Ok(HerglotzData::infinity());
        }
        let atoms = repr.atoms.iter().map(|&[t, w]| Atom::new(t, w)).collect();
        HerglotzData::new(repr.h0, repr.h, atoms)
    }
}

impl From<HerglotzData> for HerglotzRepr {
    fn from(data: HerglotzData) -> Self {
        HerglotzRepr {
            h0: data.h0,
            h: data.h,
            atoms: data.atoms.iter().map(|a| [a.position, a.weight]).collect(),
            infinity: data.infinity,
        }
    }
}

impl HerglotzData {
    /// Validated constructor. Atoms must have positive weights and strictly
    /// increasing positions.
    pub fn new(h0: f64, h: f64, atoms: Vec<Atom>) -> Result<Self> {
        if !(h0.is_finite() && h0 >= 0.0) {
            return Err(Error::InvalidData(format!("h0 = {h0} must be finite and >= 0")));
        }
        if !h.is_finite() {
            return Err(Error::InvalidData(format!("h = {h} must be finite")));
        }
        for a in &atoms {
            if !(a.position.is_finite() && a.weight.is_finite()) {
                return Err(Error::InvalidData("atom data must be finite".into()));
            }
            if a.weight <= 0.0 {
                return Err(Error::InvalidData(format!(
                    "atom at t = {} has non-positive weight {}",
                    a.position, a.weight
                )));
            }
        }
        if atoms.windows(2).any(|p| p[0].position >= p[1].position) {
            return Err(Error::InvalidData(
                "atom positions must be strictly increasing".into(),
            ));
        }
        Ok(Self { h0, h, atoms, infinity: false })
    }

    /// Builds data without checking any invariant. Only meant for negative
    /// controls in tests.
    #[doc(hidden)]
    pub fn new_unchecked(h0: f64, h: f64, atoms: Vec<Atom>) -> Self {
        Self { h0, h, atoms, infinity: false }
    }

    /// The constant function `f ≡ ∞` (Dirichlet condition `Γ0 y = 0`).
    pub fn infinity() -> Self {
        Self { h0: 0.0, h: 0.0, atoms: Vec::new(), infinity: true }
    }

    /// `f(λ) = c` for a real constant `c`.
    pub fn constant(c: f64) -> Result<Self> {
        Self::new(0.0, c, Vec::new())
    }

    pub fn h0(&self) -> f64 {
        self.h0
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn is_infinity(&self) -> bool {
        self.infinity
    }

    /// `f` is a real constant or `∞`: the extension lives in the base space.
    pub fn is_canonical(&self) -> bool {
        self.infinity || (self.h0 == 0.0 && self.atoms.is_empty())
    }

    /// `Σ_j w_j t_j/(1 + t_j²)`.
    pub fn centering_sum(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight * a.centering()).sum()
    }

    /// Finds an atom within the pole tolerance `1e-14·(1 + |t_j|)` of `lambda`.
    pub fn pole_near(&self, lambda: Complex64) -> Option<&Atom> {
        self.atoms
            .iter()
            .find(|a| (lambda - a.position).norm() <= 1e-14 * (1.0 + a.position.abs()))
    }

    pub fn eval(&self, lambda: Complex64) -> Result<FValue> {
        if self.infinity {
            return Ok(FValue::Infinity);
        }
        if let Some(a) = self.pole_near(lambda) {
            return Err(Error::PoleAtAtom { lambda, position: a.position });
        }
        let mut f = self.h0 * lambda + self.h;
        for a in &self.atoms {
            f += a.weight * (1.0 / (a.position - lambda) - a.centering());
        }
        Ok(FValue::Finite(f))
    }

    /// Like [`eval`](Self::eval) but for callers that already know the data is
    /// finite and `lambda` is off the real axis.
    pub fn eval_finite(&self, lambda: Complex64) -> Result<Complex64> {
        match self.eval(lambda)? {
            FValue::Finite(z) => Ok(z),
            FValue::Infinity => Err(Error::InvalidData("f is identically infinite".into())),
        }
    }

    /// `max(0, −min Im f)` over the grid; zero means no violation of the
    /// Nevanlinna property was found.
    pub fn nevanlinna_violation(&self, grid: &[Complex64]) -> Result<f64> {
        if self.infinity {
            return Ok(0.0);
        }
        let mut min_im = f64::INFINITY;
        for &z in grid {
            if z.im <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "grid point {z} is not in the upper half-plane"
                )));
            }
            min_im = min_im.min(self.eval_finite(z)?.im);
        }
        Ok((-min_im).max(0.0))
    }
}

/// `ω = (f − i)/(f + i)`.
pub fn f_to_omega(f: FValue) -> Result<Omega> {
    match f {
        FValue::Infinity => Ok(Omega(Complex64::new(1.0, 0.0))),
        FValue::Finite(z) => {
            let den = z + I;
            if den == Complex64::new(0.0, 0.0) {
                return Err(Error::DegenerateValue);
            }
            Ok(Omega((z - I) / den))
        }
    }
}

/// `f = (iω + i)/(1 − ω)`; `ω = 1` maps to `∞`.
pub fn omega_to_f(omega: Omega) -> FValue {
    let w = omega.0;
    let den = 1.0 - w;
    if den == Complex64::new(0.0, 0.0) {
        return FValue::Infinity;
    }
    FValue::Finite((I * w + I) / den)
}

/// Recovers the atoms of `σ` inside `window` from values of `f` near the real axis.
///
/// Candidates are the local maxima of `t ↦ ε·Im f(t + iε)` at the first
/// (largest) `ε` of the schedule. Each candidate is re-centred by golden-section
/// maximisation at every `ε` and its weight estimated as the peak height,
/// Richardson-extrapolated in `ε²` over the last two levels.
pub fn stieltjes_invert<F>(
    evaluator: F,
    window: (f64, f64),
    eps_schedule: &[f64],
    min_weight: f64,
) -> Result<Vec<Atom>>
where
    F: Fn(Complex64) -> Complex64,
{
    let (a, b) = window;
    if !(a < b) {
        return Err(Error::InvalidArgument(format!("empty window [{a}, {b}]")));
    }
    if !(min_weight > 0.0) {
        return Err(Error::InvalidArgument("min_weight must be positive".into()));
    }
    let Some(&eps_last) = eps_schedule.last() else {
        return Err(Error::InvalidArgument("empty eps schedule".into()));
    };
    if eps_schedule.iter().any(|&e| !(e > 0.0))
        || eps_schedule.windows(2).any(|p| p[1] >= p[0])
    {
        return Err(Error::InvalidArgument(
            "eps schedule must be positive and strictly decreasing".into(),
        ));
    }
    if eps_last > 1e-6 {
        return Err(Error::InvalidArgument(
            "eps schedule must end at or below 1e-6".into(),
        ));
    }

    let peak = |t: f64, eps: f64| eps * evaluator(Complex64::new(t, eps)).im;

    let eps0 = eps_schedule[0];
    let step = eps0 / 4.0;
    let n = ((b - a) / step).ceil() as usize;
    let step = (b - a) / n as f64;
    let samples: Vec<f64> = (0..=n).map(|i| peak(a + i as f64 * step, eps0)).collect();

    let mut atoms: Vec<Atom> = Vec::new();
    for i in 1..n {
        let v = samples[i];
        if !(v > samples[i - 1] && v >= samples[i + 1] && v >= 0.25 * min_weight) {
            continue;
        }
        let mut center = a + i as f64 * step;
        let mut half = step;
        let mut estimates = Vec::with_capacity(eps_schedule.len());
        for &eps in eps_schedule {
            center = golden_max(|t| peak(t, eps), center - half, center + half);
            estimates.push(peak(center, eps));
            half = 3.0 * eps;
        }
        let k = estimates.len();
        let weight = if k >= 2 {
            let (e1, e2) = (eps_schedule[k - 2], eps_schedule[k - 1]);
            let (w1, w2) = (estimates[k - 2], estimates[k - 1]);
            if (w2 - w1).abs() > 10.0 * min_weight {
                return Err(Error::NonConvergent(format!(
                    "weight estimates near t = {center} do not settle ({w1} vs {w2})"
                )));
            }
            (w2 * e1 * e1 - w1 * e2 * e2) / (e1 * e1 - e2 * e2)
        } else {
            estimates[0]
        };
        if weight < min_weight || center <= a || center >= b {
            continue;
        }
        if atoms.iter().any(|p| (p.position - center).abs() < eps0) {
            continue;
        }
        atoms.push(Atom::new(center, weight));
    }
    atoms.sort_by(|p, q| p.position.total_cmp(&q.position));
    Ok(atoms)
}

fn golden_max<F: Fn(f64) -> f64>(g: F, mut lo: f64, mut hi: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut g1 = g(x1);
    let mut g2 = g(x2);
    for _ in 0..200 {
        if (hi - lo) <= 1e-15 * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
        if g1 < g2 {
            lo = x1;
            x1 = x2;
            g1 = g2;
            x2 = lo + inv_phi * (hi - lo);
            g2 = g(x2);
        } else {
            hi = x2;
            x2 = x1;
            g2 = g1;
            x1 = hi - inv_phi * (hi - lo);
            g1 = g(x1);
        }
    }
    0.5 * (lo + hi)
}

/// Estimates `(h0, h)` from the behaviour of `f` along the imaginary axis.
///
/// `h0 = lim Re[f(iy)/(iy)]` is Richardson-extrapolated along `y = 2^k`,
/// `k = 6..=16`, treating the remainder as a series in `y⁻²`. `h = Re f(i)`
/// because the integrand's real part vanishes at `λ = i`.
pub fn extract_asymptotics<F>(evaluator: F) -> Result<(f64, f64)>
where
    F: Fn(Complex64) -> Complex64,
{
    let levels: Vec<f64> = (6..=16)
        .map(|k| {
            let y = f64::powi(2.0, k);
            (evaluator(Complex64::new(0.0, y)) / Complex64::new(0.0, y)).re
        })
        .collect();

    let mut table = vec![levels];
    for j in 1..table[0].len() {
        let prev = &table[j - 1];
        let factor = f64::powi(4.0, j as i32);
        let next: Vec<f64> = prev
            .windows(2)
            .map(|p| (factor * p[1] - p[0]) / (factor - 1.0))
            .collect();
        table.push(next);
    }
    let diag: Vec<f64> = table.iter().map(|col| *col.last().unwrap()).collect();
    let k = diag.len();
    let h0 = diag[k - 1];
    if (diag[k - 1] - diag[k - 2]).abs() > 1e-6 {
        return Err(Error::NonConvergent(format!(
            "h0 estimates {} and {} differ by more than 1e-6",
            diag[k - 2],
            diag[k - 1]
        )));
    }
    let h = evaluator(I).re;
    Ok((h0, h))
}
