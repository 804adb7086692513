//! Reproducible verification runs.
//!
//! A run expands a [`VerifyConfig`] into an ordered list of named checks, each
//! producing a residual that is compared against its tolerance. Every check
//! draws from its own RNG seeded by `seed` and the check name, so a check run
//! alone reproduces its residual exactly.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assembly::{
    assemble_extension, base_unit_vectors, char_roots, compression_match, eigenvector_correspondence,
    minimality_rank, BlockVector, ExtensionAssembly,
};
use crate::error::{Error, Result};
use crate::herglotz::{
    extract_asymptotics, f_to_omega, omega_to_f, stieltjes_invert, Atom, FValue, HerglotzData, Omega,
};
use crate::models::{
    random_trig, random_vanishing_at_one, green_residual, ModelDescriptor, ModelKind, QSpec,
    SturmLiouvilleModel,
};
use crate::resolvent::{compression_herglotz_check, resolvent_symmetry_residual};
use crate::triplet::{inner, FiniteTripletSystem};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedHerglotz {
    pub name: String,
    pub f: HerglotzData,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Defect {
    /// Perturb `K` off-symmetric in the Hermiticity check.
    Nonhermitian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub triplet_green: f64,
    pub model_green: f64,
    pub cayley: f64,
    pub herglotz_positivity: f64,
    pub inversion: f64,
    pub asymptotics: f64,
    pub resolvent_symmetry: f64,
    pub compression_positivity: f64,
    pub hermitian: f64,
    pub adjoint_sampling: f64,
    pub conjugate_symmetry: f64,
    pub compression: f64,
    pub minimality: f64,
    pub spectrum: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            triplet_green: 1e-12,
            model_green: 1e-8,
            cayley: 1e-12,
            herglotz_positivity: 1e-12,
            inversion: 1e-6,
            asymptotics: 1e-8,
            resolvent_symmetry: 1e-7,
            compression_positivity: 1e-8,
            hermitian: 1e-12,
            adjoint_sampling: 1e-12,
            conjugate_symmetry: 1e-12,
            compression: 1e-4,
            minimality: 0.0,
            spectrum: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub seed: u64,
    pub herglotz: Vec<NamedHerglotz>,
    pub models: Vec<ModelDescriptor>,
    /// Extension meshes, coarse to fine; the finest is used for single-mesh checks.
    pub mesh_sizes: Vec<usize>,
    pub minimality_mesh: usize,
    /// Random samples per sampling check.
    pub samples: usize,
    pub spectrum_window: (f64, f64),
    pub tolerances: Tolerances,
    pub inject_defect: Option<Defect>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        let named = |name: &str, f| NamedHerglotz { name: name.into(), f };
        Self {
            seed: 20240601,
            herglotz: vec![
                named("linear", HerglotzData::new(1.0, 0.0, vec![]).expect("valid")),
                named("atom_at_zero", HerglotzData::new(0.0, 0.0, vec![Atom::new(0.0, 1.0)]).expect("valid")),
                named(
                    "two_atoms",
                    HerglotzData::new(1.0, 0.5, vec![Atom::new(-1.0, 1.0), Atom::new(2.0, 3.0)]).expect("valid"),
                ),
            ],
            models: vec![
                ModelDescriptor { model: ModelKind::FirstOrder, n: 64, q: None },
                ModelDescriptor { model: ModelKind::SturmLiouville, n: 200, q: Some(QSpec::Constant(0.0)) },
            ],
            mesh_sizes: vec![100, 200, 400],
            minimality_mesh: 30,
            samples: 20,
            spectrum_window: (0.5, 60.0),
            tolerances: Tolerances::default(),
            inject_defect: None,
        }
    }
}

fn config_error(field: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config { field: field.into(), message: message.into() }
}

impl VerifyConfig {
    /// Parses and validates a JSON config; errors name the offending field.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            config_error(if path == "." { "<root>".to_string() } else { path }, e.into_inner().to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.herglotz.is_empty() {
            return Err(config_error("herglotz", "at least one Herglotz dataset is required"));
        }
        let mut names: Vec<&str> = self.herglotz.iter().map(|h| h.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(config_error("herglotz", format!("duplicate dataset name {:?}", w[0])));
        }
        if let Some(h) = self.herglotz.iter().find(|h| h.name.is_empty() || h.name.contains(',')) {
            return Err(config_error("herglotz", format!("invalid dataset name {:?}", h.name)));
        }
        if self.models.is_empty() {
            return Err(config_error("models", "at least one model is required"));
        }
        for (i, m) in self.models.iter().enumerate() {
            m.build().map_err(|e| config_error(format!("models[{i}]"), e.to_string()))?;
        }
        let mut labels: Vec<String> = self.models.iter().map(model_label).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(config_error("models", "duplicate model descriptors"));
        }
        if self.mesh_sizes.is_empty() || self.mesh_sizes.iter().any(|&n| n < 16) {
            return Err(config_error("mesh_sizes", "need at least one mesh size, each ≥ 16"));
        }
        if self.minimality_mesh < 16 {
            return Err(config_error("minimality_mesh", "must be ≥ 16"));
        }
        if self.samples == 0 {
            return Err(config_error("samples", "must be positive"));
        }
        let (a, b) = self.spectrum_window;
        if !(a < b) {
            return Err(config_error("spectrum_window", "window is empty"));
        }
        let t = serde_json::to_value(&self.tolerances).expect("plain struct");
        for (k, v) in t.as_object().expect("object") {
            if !v.as_f64().is_some_and(|x| x >= 0.0) {
                return Err(config_error(format!("tolerances.{k}"), "must be a nonnegative number"));
            }
        }
        Ok(())
    }
}

fn model_label(m: &ModelDescriptor) -> String {
    match m.model {
        ModelKind::FirstOrder => format!("fo{}", m.n),
        ModelKind::SturmLiouville => {
            let q = match &m.q {
                None | Some(QSpec::Constant(0.0)) => String::new(),
                Some(q) => format!("_q{:016x}", fnv1a(&serde_json::to_string(q).expect("serializable"))),
            };
            format!("sl{}{q}", m.n)
        }
    }
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf29ce484222325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x100000001b3))
}

pub type Context = BTreeMap<String, String>;

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub context: Context,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
    pub elapsed_ms: f64,
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl VerificationReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&format!(
                "{} {:<48} residual={:<12.3e} tol={:<9.1e} {:>9.1} ms\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.residual,
                c.tolerance,
                c.elapsed_ms
            ));
            if !c.passed {
                for (k, v) in &c.context {
                    out.push_str(&format!("       {k}: {v}\n"));
                }
            }
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        out.push_str(&format!(
            "{}: {} checks, {} failed, seed {}, {:.1} s\n",
            if self.passed { "PASS" } else { "FAIL" },
            self.checks.len(),
            failed,
            self.seed,
            self.elapsed_ms / 1e3
        ));
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Timing-free CSV; identical for identical seed and config.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("check,residual,tolerance,verdict,context\n");
        for c in &self.checks {
            let ctx = serde_json::to_string(&c.context).expect("string map");
            out.push_str(&format!(
                "{},{:e},{:e},{},{}\n",
                c.name,
                c.residual,
                c.tolerance,
                if c.passed { "pass" } else { "fail" },
                csv_field(&ctx)
            ));
        }
        out
    }
}

type CheckFn<'a> = Box<dyn Fn(&mut ChaCha8Rng) -> Result<(f64, Context)> + Send + Sync + 'a>;

struct Check<'a> {
    name: String,
    tolerance: f64,
    run: CheckFn<'a>,
}

fn check<'a>(
    name: String,
    tolerance: f64,
    run: impl Fn(&mut ChaCha8Rng) -> Result<(f64, Context)> + Send + Sync + 'a,
) -> Check<'a> {
    Check { name, tolerance, run: Box::new(run) }
}

fn ctx<const N: usize>(pairs: [(&str, String); N]) -> Context {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn random_c(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> DVector<Complex64> {
    DVector::from_fn(n, |_, _| random_c(rng))
}

fn random_upper(rng: &mut ChaCha8Rng, re: f64, im: (f64, f64)) -> Complex64 {
    Complex64::new(rng.random_range(-re..re), rng.random_range(im.0..im.1))
}

fn fmt_list(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6e}")).collect();
    format!("[{}]", parts.join(" "))
}

/// Names of the checks `config` expands to, in report order.
pub fn check_names(config: &VerifyConfig) -> Result<Vec<String>> {
    config.validate()?;
    Ok(plan(config).into_iter().map(|c| c.name).collect())
}

pub fn run_suite(config: &VerifyConfig) -> Result<VerificationReport> {
    run_suite_filtered(config, |_| true)
}

/// Runs only the checks whose name satisfies `keep`; residuals are identical
/// to those of a full run.
pub fn run_suite_filtered(config: &VerifyConfig, keep: impl Fn(&str) -> bool) -> Result<VerificationReport> {
    config.validate()?;
    let start = Instant::now();
    let checks: Vec<Check> = plan(config).into_iter().filter(|c| keep(&c.name)).collect();
    let slots: Mutex<Vec<Option<CheckResult>>> = Mutex::new(vec![None; checks.len()]);
    let next = AtomicUsize::new(0);
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(checks.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(c) = checks.get(i) else { break };
                let result = execute(config.seed, c);
                slots.lock().expect("no poisoned workers")[i] = Some(result);
            });
        }
    });
    let checks: Vec<CheckResult> = slots
        .into_inner()
        .expect("no poisoned workers")
        .into_iter()
        .map(|r| r.expect("every check ran"))
        .collect();
    Ok(VerificationReport {
        seed: config.seed,
        passed: checks.iter().all(|c| c.passed),
        checks,
        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

fn execute(seed: u64, c: &Check) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(&c.name));
    let t = Instant::now();
    let (residual, context) = match (c.run)(&mut rng) {
        Ok(r) => r,
        Err(e) => (f64::INFINITY, ctx([("error", e.to_string())])),
    };
    CheckResult {
        name: c.name.clone(),
        residual,
        tolerance: c.tolerance,
        passed: residual <= c.tolerance,
        context,
        elapsed_ms: t.elapsed().as_secs_f64() * 1e3,
    }
}

fn plan(config: &VerifyConfig) -> Vec<Check<'_>> {
    let tol = &config.tolerances;
    let samples = config.samples;
    let mut out = vec![check("triplet.green".into(), tol.triplet_green, triplet_green)];
    for m in &config.models {
        out.push(check(format!("model.green.{}", model_label(m)), tol.model_green, move |rng| {
            model_green(m, samples, rng)
        }));
    }
    for d in &config.herglotz {
        let f = &d.f;
        let name = &d.name;
        out.push(check(format!("herglotz.cayley.{name}"), tol.cayley, move |rng| cayley(f, rng)));
        if !f.is_infinity() {
            out.push(check(format!("herglotz.positivity.{name}"), tol.herglotz_positivity, move |rng| {
                let grid: Vec<Complex64> = (0..1000).map(|_| random_upper(rng, 5.0, (1e-3, 5.0))).collect();
                Ok((f.nevanlinna_violation(&grid)?, Context::new()))
            }));
            out.push(check(format!("herglotz.inversion.{name}"), tol.inversion, move |_| inversion(f)));
            out.push(check(format!("herglotz.asymptotics.{name}"), tol.asymptotics, move |_| {
                let (h0, h) = extract_asymptotics(|l| f.eval_finite(l).unwrap_or(Complex64::new(f64::NAN, 0.0)))?;
                let err = (h0 - f.h0()).abs().max((h - f.h()).abs());
                Ok((err, ctx([("h0", format!("{h0:.12}")), ("h", format!("{h:.12}"))])))
            }));
        }
    }
    for d in &config.herglotz {
        for m in &config.models {
            let (f, label) = (&d.f, format!("{}.{}", d.name, model_label(m)));
            out.push(check(format!("resolvent.symmetry.{label}"), tol.resolvent_symmetry, move |rng| {
                resolvent_symmetry(m, f, samples, rng)
            }));
            out.push(check(format!("resolvent.positivity.{label}"), tol.compression_positivity, move |rng| {
                resolvent_positivity(m, f, rng)
            }));
            if m.model != ModelKind::SturmLiouville {
                continue;
            }
            let defect = config.inject_defect;
            out.push(check(format!("extension.hermitian.{label}"), tol.hermitian, move |_| {
                hermitian(config, m, f, defect)
            }));
            out.push(check(format!("extension.adjoint_sampling.{label}"), tol.adjoint_sampling, move |rng| {
                adjoint_sampling(config, m, f, rng)
            }));
            out.push(check(format!("extension.conjugate_symmetry.{label}"), tol.conjugate_symmetry, move |rng| {
                conjugate_symmetry(config, m, f, rng)
            }));
            out.push(check(format!("extension.compression.{label}"), tol.compression, move |rng| {
                compression(config, m, f, rng)
            }));
            out.push(check(format!("extension.minimality.{label}"), tol.minimality, move |rng| {
                minimality(config, m, f, rng)
            }));
            out.push(check(format!("extension.spectrum.{label}"), tol.spectrum, move |_| {
                spectrum(config, m, f)
            }));
        }
    }
    out
}

fn triplet_green(rng: &mut ChaCha8Rng) -> Result<(f64, Context)> {
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(3..=10);
        let sys = FiniteTripletSystem::random(n, rng)?;
        for _ in 0..10 {
            let (x, y) = (random_vec(rng, n), random_vec(rng, n));
            let (tx, ty) = (sys.apply(&x)?, sys.apply(&y)?);
            let scale = tx.norm() * y.norm() + x.norm() * ty.norm();
            worst = worst.max(sys.green_residual(&x, &y)? / scale);
        }
    }
    Ok((worst, ctx([("systems", "100".into()), ("pairs", "10".into())])))
}

fn model_green(m: &ModelDescriptor, samples: usize, rng: &mut ChaCha8Rng) -> Result<(f64, Context)> {
    let model = m.build()?;
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let (x, y) = match m.model {
            ModelKind::FirstOrder => (random_trig(rng, 3), random_trig(rng, 3)),
            ModelKind::SturmLiouville => (random_vanishing_at_one(rng, 2), random_vanishing_at_one(rng, 2)),
        };
        worst = worst.max(green_residual(model.as_ref(), &x, &y));
    }
    Ok((worst, ctx([("pairs", samples.to_string())])))
}

fn cayley(f: &HerglotzData, rng: &mut ChaCha8Rng) -> Result<(f64, Context)> {
    if f.is_infinity() {
        let Omega(w) = f_to_omega(FValue::Infinity)?;
        let back = omega_to_f(Omega(w));
        let r = (w - 1.0).norm() + if back.is_infinite() { 0.0 } else { 1.0 };
        return Ok((r, ctx([("omega", format!("{w}"))])));
    }
    let mut round: f64 = 0.0;
    let mut excess: f64 = 0.0;
    for _ in 0..1000 {
        let im = 10f64.powf(rng.random_range(-2.0..1.0));
        let lambda = Complex64::new(rng.random_range(-5.0..5.0), im);
        let value = f.eval_finite(lambda)?;
        let Omega(w) = f_to_omega(FValue::Finite(value))?;
        excess = excess.max(w.norm() - 1.0);
        if let FValue::Finite(back) = omega_to_f(Omega(w)) {
            round = round.max((back - value).norm() / (1.0 + value.norm()));
        } else {
            round = f64::INFINITY;
        }
    }
    Ok((round.max(excess), ctx([("roundtrip", format!("{round:e}")), ("unit_disk_excess", format!("{excess:e}"))])))
}

fn inversion(f: &HerglotzData) -> Result<(f64, Context)> {
    let atoms = f.atoms();
    let (lo, hi) = atoms
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), t| (a.min(t.position), b.max(t.position)));
    let window = if atoms.is_empty() { (-1.0, 1.0) } else { (lo - 1.0, hi + 1.0) };
    let schedule: Vec<f64> = (2..=7).map(|k| 10f64.powi(-k)).collect();
    let found = stieltjes_invert(|l| f.eval_finite(l).unwrap_or(Complex64::new(0.0, 0.0)), window, &schedule, 1e-3)?;
    let context = ctx([(
        "recovered",
        found.iter().map(|a| format!("({:.6}, {:.6})", a.position, a.weight)).collect::<Vec<_>>().join(" "),
    )]);
    if found.len() != atoms.len() {
        return Ok((f64::INFINITY, context));
    }
    let err = found
        .iter()
        .zip(atoms)
        .map(|(a, b)| (a.position - b.position).abs().max((a.weight - b.weight).abs()))
        .fold(0.0, f64::max);
    Ok((err, context))
}

fn source(rng: &mut ChaCha8Rng, degree: i32) -> impl Fn(f64) -> Complex64 + Send + Sync {
    let s = random_trig(rng, degree);
    move |x| s.eval(x)
}

fn resolvent_symmetry(
    m: &ModelDescriptor,
    f: &HerglotzData,
    samples: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, Context)> {
    let model = m.build()?;
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let lambda = random_upper(rng, 5.0, (0.5, 3.0));
        let (x, y) = (source(rng, 2), source(rng, 2));
        worst = worst.max(resolvent_symmetry_residual(model.as_ref(), f, lambda, &x, &y)?);
    }
    Ok((worst, ctx([("samples", samples.to_string())])))
}

fn resolvent_positivity(m: &ModelDescriptor, f: &HerglotzData, rng: &mut ChaCha8Rng) -> Result<(f64, Context)> {
    let model = m.build()?;
    let grid: Vec<Complex64> = (0..20).map(|_| random_upper(rng, 5.0, (0.1, 3.0))).collect();
    let x = source(rng, 2);
    Ok((compression_herglotz_check(model.as_ref(), f, &grid, &x)?, ctx([("grid", "20".into())])))
}

fn q_of(m: &ModelDescriptor) -> QSpec {
    m.q.clone().unwrap_or_default()
}

fn finest(config: &VerifyConfig) -> usize {
    config.mesh_sizes.iter().copied().max().expect("validated nonempty")
}

fn hermitian(
    config: &VerifyConfig,
    m: &ModelDescriptor,
    f: &HerglotzData,
    defect: Option<Defect>,
) -> Result<(f64, Context)> {
    let mut worst: f64 = 0.0;
    for &n in &config.mesh_sizes {
        let mut asm = assemble_extension(&q_of(m), f, n)?;
        if defect == Some(Defect::Nonhermitian) {
            asm = asm.with_stiffness_defect(1e-6 * asm.stiffness().norm());
        }
        let (k, mm) = asm.hermitian_defect();
        worst = worst.max(k).max(mm);
    }
    Ok((worst, ctx([("meshes", format!("{:?}", config.mesh_sizes))])))
}

fn random_block(rng: &mut ChaCha8Rng, asm: &ExtensionAssembly) -> BlockVector {
    BlockVector::from_flat(asm.layout(), &random_vec(rng, asm.layout().dim()))
}

fn adjoint_sampling(
    config: &VerifyConfig,
    m: &ModelDescriptor,
    f: &HerglotzData,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, Context)> {
    let asm = assemble_extension(&q_of(m), f, finest(config))?;
    let k = asm.stiffness().map(|v| Complex64::new(v, 0.0));
    let knorm = asm.stiffness().norm();
    let mut worst: f64 = 0.0;
    for _ in 0..config.samples {
        let (x, y) = (random_vec(rng, k.nrows()), random_vec(rng, k.nrows()));
        let r = (inner(&(&k * &x), &y) - inner(&x, &(&k * &y))).norm() / (knorm * x.norm() * y.norm());
        worst = worst.max(r);
    }
    Ok((worst, ctx([("n_mesh", finest(config).to_string())])))
}

fn m_inner(mass: &DMatrix<Complex64>, a: &DVector<Complex64>, b: &DVector<Complex64>) -> Complex64 {
    inner(&(mass * a), b)
}

fn conjugate_symmetry(
    config: &VerifyConfig,
    m: &ModelDescriptor,
    f: &HerglotzData,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, Context)> {
    let asm = assemble_extension(&q_of(m), f, finest(config))?;
    let mass = asm.mass().map(|v| Complex64::new(v, 0.0));
    let norm = |v: &DVector<Complex64>| m_inner(&mass, v, v).re.sqrt();
    let mut worst: f64 = 0.0;
    for _ in 0..3 {
        let lambda = random_upper(rng, 5.0, (0.5, 3.0));
        let (x, y) = (random_block(rng, &asm), random_block(rng, &asm));
        let rx = asm.resolve(lambda, &x)?.to_flat();
        let ry = asm.resolve(lambda.conj(), &y)?.to_flat();
        let (xf, yf) = (x.to_flat(), y.to_flat());
        let d = (m_inner(&mass, &rx, &yf) - m_inner(&mass, &xf, &ry)).norm();
        worst = worst.max(d / (norm(&rx) * norm(&yf) + norm(&xf) * norm(&ry)));
    }
    Ok((worst, ctx([("n_mesh", finest(config).to_string())])))
}

fn compression(
    config: &VerifyConfig,
    m: &ModelDescriptor,
    f: &HerglotzData,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, Context)> {
    let model = SturmLiouvilleModel::new(q_of(m), m.n)?;
    let lambda = random_upper(rng, 2.0, (1.0, 3.0));
    let x = source(rng, 1);
    let mut meshes = config.mesh_sizes.clone();
    meshes.sort_unstable();
    let mut errs = Vec::with_capacity(meshes.len());
    for &n in &meshes {
        let asm = assemble_extension(&q_of(m), f, n)?;
        errs.push(compression_match(&asm, &model, f, lambda, &x)?);
    }
    let mut context = ctx([
        ("lambda", format!("{lambda}")),
        ("meshes", format!("{meshes:?}")),
        ("errors", fmt_list(&errs)),
    ]);
    if errs.len() >= 2 {
        let k = errs.len();
        let order = (errs[k - 2] / errs[k - 1]).ln() / (meshes[k - 1] as f64 / meshes[k - 2] as f64).ln();
        context.insert("order".into(), format!("{order:.3}"));
    }
    Ok((*errs.last().expect("nonempty"), context))
}

fn minimality(
    config: &VerifyConfig,
    m: &ModelDescriptor,
    f: &HerglotzData,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, Context)> {
    let asm = assemble_extension(&q_of(m), f, config.minimality_mesh)?;
    let layout = asm.layout();
    let lambdas: Vec<Complex64> =
        (0..layout.atoms + layout.aug + 2).map(|_| random_upper(rng, 3.0, (0.5, 2.0))).collect();
    let rank = minimality_rank(&asm, &lambdas, &base_unit_vectors(layout))?;
    let expected = if f.is_canonical() { layout.n_base } else { layout.dim() };
    Ok((
        rank.abs_diff(expected) as f64,
        ctx([("rank", rank.to_string()), ("expected", expected.to_string()), ("dim", layout.dim().to_string())]),
    ))
}

fn spectrum(config: &VerifyConfig, m: &ModelDescriptor, f: &HerglotzData) -> Result<(f64, Context)> {
    let (mut lo, hi) = config.spectrum_window;
    if !f.is_infinity() {
        for a in f.atoms() {
            if a.position < hi && a.position + 0.5 > lo {
                lo = a.position + 0.5;
            }
        }
    }
    if !(lo < hi) {
        return Ok((0.0, ctx([("skipped", "window covered by atoms".into())])));
    }
    let model = SturmLiouvilleModel::new(q_of(m), m.n)?;
    let roots = char_roots(&model, f, (lo, hi), 1e-12)?;
    let asm = assemble_extension(&q_of(m), f, finest(config))?;
    let eigs = asm.eigs((lo, hi))?;
    let mut context = ctx([
        ("window", format!("[{lo}, {hi}]")),
        ("roots", fmt_list(&roots)),
        ("eigenvalues", fmt_list(&eigs.eigenvalues)),
    ]);
    if roots.len() != eigs.len() {
        return Ok((f64::INFINITY, context));
    }
    let mut worst: f64 = 0.0;
    let mut ode: f64 = 0.0;
    for (i, (r, l)) in roots.iter().zip(&eigs.eigenvalues).enumerate() {
        worst = worst.max((r - l).abs() / r.abs().max(1.0));
        let rec = eigenvector_correspondence(&asm, &model, f, *l, &eigs.blocks(i))?;
        ode = ode.max(rec.ode_residual);
    }
    context.insert("eigenvector_fit".into(), format!("{ode:.3e}"));
    Ok((worst, context))
}
