//! `saf`: batch front end for the self-adjoint-extension toolkit.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use saf_core::assembly::{
    assemble_extension, base_unit_vectors, char_roots, matrix_market, minimality_singular_values,
    BlockVector, ExtensionAssembly,
};
use saf_core::herglotz::{
    extract_asymptotics, f_to_omega, omega_to_f, stieltjes_invert, Atom, FValue, HerglotzData, Omega,
};
use saf_core::models::{ModelDescriptor, ModelKind, QSpec, SturmLiouvilleModel, TripletSystem};
use saf_core::resolvent::{generalized_resolvent, CSV_HEADER};
use saf_core::verify::{run_suite_filtered, Defect, VerifyConfig};

#[derive(Parser)]
#[command(name = "saf", version, about = "Self-adjoint extensions from Herglotz boundary data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Herglotz-Nevanlinna functions.
    #[command(subcommand)]
    Hgz(HgzCommand),
    /// The extension pencil for the Sturm-Liouville model.
    #[command(subcommand)]
    Ext(ExtCommand),
    /// Boundary-value generalized resolvent; one CSV row per λ.
    Resolvent(ResolventArgs),
    /// Run the verification suite.
    Verify(VerifyArgs),
}

#[derive(Args, Clone)]
struct FArgs {
    /// `inf`, `h0=..,h=..,atoms=[[t,w],..]`, or a JSON file path.
    #[arg(long, allow_hyphen_values = true)]
    f: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    h0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    h: Option<f64>,
    /// Atoms as `[[t,w],..]`.
    #[arg(long, allow_hyphen_values = true)]
    atoms: Option<String>,
}

#[derive(Subcommand)]
enum HgzCommand {
    /// Evaluate f(λ).
    Eval {
        #[command(flatten)]
        f: FArgs,
        #[arg(long, allow_hyphen_values = true)]
        lambda: String,
    },
    /// Cayley transform ω = (f − i)/(f + i), or its inverse with `--omega`.
    Cayley {
        #[command(flatten)]
        f: FArgs,
        #[arg(long, allow_hyphen_values = true)]
        lambda: Option<String>,
        /// Transform this value of f instead of evaluating one.
        #[arg(long, allow_hyphen_values = true)]
        value: Option<String>,
        #[arg(long, allow_hyphen_values = true, conflicts_with_all = ["value", "lambda"])]
        omega: Option<String>,
    },
    /// Recover the atoms of σ in a window by Stieltjes inversion.
    Invert {
        #[command(flatten)]
        f: FArgs,
        /// Shorthand for `--atoms` with `h0 = h = 0`.
        #[arg(long, allow_hyphen_values = true)]
        from_atoms: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        window: String,
        #[arg(long, default_value_t = 1e-3)]
        min_weight: f64,
    },
    /// Recover (h0, h) from evaluations along the imaginary axis.
    Asymptotics {
        #[command(flatten)]
        f: FArgs,
    },
}

#[derive(Args, Clone)]
struct ModelArgs {
    #[arg(long, value_enum, default_value_t = ModelChoice::Sl)]
    model: ModelChoice,
    /// Potential: a constant, a JSON list of samples on a uniform grid, or a JSON file.
    #[arg(long, allow_hyphen_values = true)]
    q: Option<String>,
    /// Mesh size.
    #[arg(long, default_value_t = 200)]
    n: usize,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ModelChoice {
    #[value(name = "sl", alias = "sturm_liouville")]
    Sl,
    #[value(name = "first_order", alias = "fo")]
    FirstOrder,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Source {
    /// x ≡ 1
    One,
    /// x(s) = s
    Linear,
    /// x(s) = s(1 − s)
    Parabola,
    /// x(s) = sin(πs)
    Sine,
}

impl Source {
    fn eval(self, s: f64) -> Complex64 {
        Complex64::new(
            match self {
                Source::One => 1.0,
                Source::Linear => s,
                Source::Parabola => s * (1.0 - s),
                Source::Sine => (std::f64::consts::PI * s).sin(),
            },
            0.0,
        )
    }
}

#[derive(Subcommand)]
enum ExtCommand {
    /// Generalized eigenvalues in a window as CSV.
    Eigs {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        f: FArgs,
        #[arg(long, allow_hyphen_values = true)]
        window: String,
    },
    /// Real zeros of the characteristic function in a window as CSV.
    Roots {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        f: FArgs,
        #[arg(long, allow_hyphen_values = true)]
        window: String,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Resolvent of the pencil applied to (x, 0, 0), as block CSV.
    Resolve {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        f: FArgs,
        #[arg(long, allow_hyphen_values = true)]
        lambda: String,
        #[arg(long, value_enum, default_value_t = Source::Parabola)]
        source: Source,
    },
    /// Rank of the resolvent images of the base block.
    Minimality {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        f: FArgs,
        /// Non-real sample points separated by `;`.
        #[arg(long, allow_hyphen_values = true, default_value = "0+1i;0+2i;1+1i;-1+0.5i")]
        lambdas: String,
    },
    /// Write K, M (Matrix Market), a JSON header and optionally a spectrum CSV.
    Export {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        f: FArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        window: Option<String>,
    },
}

#[derive(Args)]
struct ResolventArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    f: FArgs,
    /// λ values separated by `;`.
    #[arg(long, allow_hyphen_values = true)]
    lambda: String,
    #[arg(long, value_enum, default_value_t = Source::Parabola)]
    source: Source,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Args)]
struct VerifyArgs {
    /// JSON config; defaults are used for omitted fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    inject_defect: Option<DefectChoice>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Also write report.txt, report.json and report.csv here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run only checks whose name starts with this prefix.
    #[arg(long)]
    only: Option<String>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum DefectChoice {
    Nonhermitian,
}

fn parse_complex(s: &str) -> Result<Complex64> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || anyhow!("cannot parse complex number {s:?} (expected a+bi)");
    if t.is_empty() {
        return Err(bad());
    }
    let Some(body) = t.strip_suffix('i') else {
        return Ok(Complex64::new(t.parse().map_err(|_| bad())?, 0.0));
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(k) => (&body[..k], &body[k..]),
        None => ("0", body),
    };
    let im = match im {
        "" | "+" => "1",
        "-" => "-1",
        other => other,
    };
    Ok(Complex64::new(re.parse().map_err(|_| bad())?, im.parse().map_err(|_| bad())?))
}

fn fmt_complex(z: Complex64) -> String {
    let re = z.re + 0.0;
    let im = z.im + 0.0;
    if im == 0.0 {
        format!("{re}")
    } else if im < 0.0 {
        format!("{re}-{}i", -im)
    } else {
        format!("{re}+{im}i")
    }
}

fn fmt_fvalue(v: FValue) -> String {
    match v {
        FValue::Infinity => "inf".into(),
        FValue::Finite(z) => fmt_complex(z),
    }
}

fn parse_window(s: &str) -> Result<(f64, f64)> {
    let (a, b) = s.split_once(',').ok_or_else(|| anyhow!("window must be `a,b`, got {s:?}"))?;
    let (a, b): (f64, f64) = (a.trim().parse()?, b.trim().parse()?);
    if !(a < b) {
        bail!("window [{a}, {b}] is empty");
    }
    Ok((a, b))
}

fn parse_lambdas(s: &str) -> Result<Vec<Complex64>> {
    s.split(';').filter(|p| !p.trim().is_empty()).map(parse_complex).collect()
}

fn parse_atoms(s: &str) -> Result<Vec<Atom>> {
    let raw: Vec<[f64; 2]> = serde_json::from_str(s).with_context(|| format!("atoms {s:?}"))?;
    Ok(raw.into_iter().map(|[t, w]| Atom::new(t, w)).collect())
}

/// Splits on commas outside brackets.
fn split_top(s: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let (mut depth, mut start) = (0i32, 0);
    for (i, c) in s.char_indices() {
        match c {
            '[' => depth += 1,
            ']' => depth -= 1,
            ',' if depth == 0 => {
                parts.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&s[start..]);
    parts
}

fn parse_f_inline(s: &str) -> Result<HerglotzData> {
    let (mut h0, mut h, mut atoms) = (0.0, 0.0, Vec::new());
    for part in split_top(s).into_iter().filter(|p| !p.trim().is_empty()) {
        let (k, v) = part.split_once('=').ok_or_else(|| anyhow!("expected key=value in {part:?}"))?;
        match k.trim() {
            "h0" => h0 = v.trim().parse()?,
            "h" => h = v.trim().parse()?,
            "atoms" => atoms = parse_atoms(v.trim())?,
            other => bail!("unknown key {other:?} in f specification"),
        }
    }
    Ok(HerglotzData::new(h0, h, atoms)?)
}

impl FArgs {
    fn resolve(&self) -> Result<HerglotzData> {
        if let Some(spec) = &self.f {
            if self.h0.is_some() || self.h.is_some() || self.atoms.is_some() {
                bail!("--f cannot be combined with --h0/--h/--atoms");
            }
            let spec = spec.trim();
            if spec.eq_ignore_ascii_case("inf") || spec == "∞" {
                return Ok(HerglotzData::infinity());
            }
            if spec.contains('=') {
                return parse_f_inline(spec);
            }
            let text = fs::read_to_string(spec).with_context(|| format!("reading f from {spec}"))?;
            return serde_json::from_str(&text).with_context(|| format!("parsing f from {spec}"));
        }
        let atoms = match &self.atoms {
            Some(a) => parse_atoms(a)?,
            None => Vec::new(),
        };
        Ok(HerglotzData::new(self.h0.unwrap_or(0.0), self.h.unwrap_or(0.0), atoms)?)
    }
}

impl ModelArgs {
    fn q(&self) -> Result<QSpec> {
        let Some(q) = &self.q else { return Ok(QSpec::default()) };
        let q = q.trim();
        let spec = if let Ok(c) = q.parse::<f64>() {
            QSpec::Constant(c)
        } else if q.starts_with('[') {
            QSpec::Samples(serde_json::from_str(q)?)
        } else {
            let text = fs::read_to_string(q).with_context(|| format!("reading q from {q}"))?;
            serde_json::from_str(&text).with_context(|| format!("parsing q from {q}"))?
        };
        spec.validate()?;
        Ok(spec)
    }

    fn descriptor(&self) -> Result<ModelDescriptor> {
        Ok(match self.model {
            ModelChoice::Sl => ModelDescriptor { model: ModelKind::SturmLiouville, n: self.n, q: Some(self.q()?) },
            ModelChoice::FirstOrder => {
                if self.q.is_some() {
                    bail!("--q applies to the Sturm-Liouville model only");
                }
                ModelDescriptor { model: ModelKind::FirstOrder, n: self.n, q: None }
            }
        })
    }

    fn build(&self) -> Result<Box<dyn TripletSystem>> {
        Ok(self.descriptor()?.build()?)
    }

    fn sturm_liouville(&self) -> Result<SturmLiouvilleModel> {
        if self.model != ModelChoice::Sl {
            bail!("the extension pencil is assembled for the Sturm-Liouville model (--model sl)");
        }
        Ok(SturmLiouvilleModel::new(self.q()?, self.n)?)
    }

    fn assemble(&self, f: &HerglotzData) -> Result<ExtensionAssembly> {
        self.sturm_liouville()?;
        Ok(assemble_extension(&self.q()?, f, self.n)?)
    }
}

fn cmd_hgz(cmd: HgzCommand) -> Result<String> {
    match cmd {
        HgzCommand::Eval { f, lambda } => {
            let f = f.resolve()?;
            Ok(format!("{}\n", fmt_fvalue(f.eval(parse_complex(&lambda)?)?)))
        }
        HgzCommand::Cayley { f, lambda, value, omega } => {
            if let Some(w) = omega {
                return Ok(format!("f = {}\n", fmt_fvalue(omega_to_f(Omega(parse_complex(&w)?)))));
            }
            let v = match value {
                Some(v) if v.trim().eq_ignore_ascii_case("inf") => FValue::Infinity,
                Some(v) => FValue::Finite(parse_complex(&v)?),
                None => {
                    let f = f.resolve()?;
                    match lambda {
                        Some(l) => f.eval(parse_complex(&l)?)?,
                        None if f.is_infinity() => FValue::Infinity,
                        None => bail!("--lambda is required unless f = inf"),
                    }
                }
            };
            let Omega(w) = f_to_omega(v)?;
            Ok(format!("omega = {}\n", fmt_complex(w)))
        }
        HgzCommand::Invert { f, from_atoms, window, min_weight } => {
            let f = match from_atoms {
                Some(a) => HerglotzData::new(0.0, 0.0, parse_atoms(&a)?)?,
                None => f.resolve()?,
            };
            if f.is_infinity() {
                bail!("f = inf has no spectral measure to invert");
            }
            let schedule: Vec<f64> = (2..=7).map(|k| 10f64.powi(-k)).collect();
            let atoms = stieltjes_invert(
                |l| f.eval_finite(l).unwrap_or(Complex64::new(0.0, 0.0)),
                parse_window(&window)?,
                &schedule,
                min_weight,
            )?;
            let mut out = String::new();
            for a in atoms {
                let t = (a.position * 1e6).round() / 1e6 + 0.0;
                out.push_str(&format!("({t}, {:.6})\n", a.weight));
            }
            Ok(out)
        }
        HgzCommand::Asymptotics { f } => {
            let f = f.resolve()?;
            if f.is_infinity() {
                bail!("f = inf has no finite asymptotics");
            }
            let (h0, h) = extract_asymptotics(|l| f.eval_finite(l).unwrap_or(Complex64::new(f64::NAN, 0.0)))?;
            Ok(format!("h0 = {h0:.12}\nh = {h:.12}\n"))
        }
    }
}

fn block_csv(v: &BlockVector, centers: &[f64]) -> String {
    let mut out = String::from("block,index,coord,re,im\n");
    for (i, (x, z)) in centers.iter().zip(&v.base).enumerate() {
        out.push_str(&format!("base,{i},{x},{},{}\n", z.re, z.im));
    }
    for (j, z) in v.atoms.iter().enumerate() {
        out.push_str(&format!("atom,{j},,{},{}\n", z.re, z.im));
    }
    if let Some(z) = v.aug {
        out.push_str(&format!("aug,0,,{},{}\n", z.re, z.im));
    }
    out
}

fn cmd_ext(cmd: ExtCommand) -> Result<String> {
    match cmd {
        ExtCommand::Eigs { model, f, window } => {
            let asm = model.assemble(&f.resolve()?)?;
            Ok(asm.eigs(parse_window(&window)?)?.to_csv())
        }
        ExtCommand::Roots { model, f, window, tol } => {
            let m = model.build()?;
            let roots = char_roots(m.as_ref(), &f.resolve()?, parse_window(&window)?, tol)?;
            let mut out = String::from("index,root\n");
            for (i, r) in roots.iter().enumerate() {
                out.push_str(&format!("{i},{r}\n"));
            }
            Ok(out)
        }
        ExtCommand::Resolve { model, f, lambda, source } => {
            let asm = model.assemble(&f.resolve()?)?;
            let x = asm.base_vector(&|s| source.eval(s));
            let y = asm.resolve(parse_complex(&lambda)?, &x)?;
            Ok(block_csv(&y, &asm.centers()))
        }
        ExtCommand::Minimality { model, f, lambdas } => {
            let asm = model.assemble(&f.resolve()?)?;
            let layout = asm.layout();
            let sv = minimality_singular_values(&asm, &parse_lambdas(&lambdas)?, &base_unit_vectors(layout))?;
            let top = sv.first().copied().unwrap_or(0.0);
            let rank = sv.iter().filter(|&&s| s > 1e-8 * top).count();
            Ok(format!(
                "rank = {rank}\ndim = {}\nlayout = ({}, {}, {})\n",
                layout.dim(),
                layout.n_base,
                layout.atoms,
                layout.aug
            ))
        }
        ExtCommand::Export { model, f, out, window } => {
            let asm = model.assemble(&f.resolve()?)?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let write = |name: &str, text: String| -> Result<()> {
                let p = out.join(name);
                fs::write(&p, text).with_context(|| format!("writing {}", p.display()))
            };
            write("K.mtx", matrix_market(asm.stiffness()))?;
            write("M.mtx", matrix_market(asm.mass()))?;
            write("header.json", serde_json::to_string_pretty(&asm.header_json())? + "\n")?;
            if let Some(w) = window {
                write("spectrum.csv", asm.eigs(parse_window(&w)?)?.to_csv())?;
            }
            Ok(format!("wrote {}\n", out.display()))
        }
    }
}

fn cmd_resolvent(args: ResolventArgs) -> Result<String> {
    let model = args.model.build()?;
    let f = args.f.resolve()?;
    let mut out = format!("{CSV_HEADER}\n");
    for lambda in parse_lambdas(&args.lambda)? {
        let r = generalized_resolvent(model.as_ref(), &f, lambda, &|s| args.source.eval(s))?;
        out.push_str(&r.csv_row(lambda));
        out.push('\n');
    }
    Ok(out)
}

enum Failure {
    Config(String),
    Runtime(anyhow::Error),
}

fn load_config(args: &VerifyArgs) -> Result<VerifyConfig, String> {
    let mut config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            VerifyConfig::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None => VerifyConfig::default(),
    };
    if let Ok(seed) = std::env::var("SAF_SEED") {
        config.seed = seed.trim().parse().map_err(|_| format!("SAF_SEED={seed:?} is not an unsigned integer"))?;
    }
    if args.inject_defect == Some(DefectChoice::Nonhermitian) {
        config.inject_defect = Some(Defect::Nonhermitian);
    }
    config.validate().map_err(|e| e.to_string())?;
    Ok(config)
}

fn write_reports(dir: &Path, report: &saf_core::verify::VerificationReport) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.txt"), report.to_text())?;
    fs::write(dir.join("report.json"), report.to_json() + "\n")?;
    fs::write(dir.join("report.csv"), report.to_csv())?;
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<(String, bool), Failure> {
    let config = load_config(&args).map_err(Failure::Config)?;
    let prefix = args.only.clone().unwrap_or_default();
    let report = run_suite_filtered(&config, |n| n.starts_with(&prefix)).map_err(|e| Failure::Config(e.to_string()))?;
    if report.checks.is_empty() {
        return Err(Failure::Config(format!("no check matches --only {prefix:?}")));
    }
    if let Some(dir) = &args.out {
        write_reports(dir, &report).map_err(Failure::Runtime)?;
    }
    let text = match args.format {
        Format::Text => report.to_text(),
        Format::Json => report.to_json() + "\n",
        Format::Csv => report.to_csv(),
    };
    Ok((text, report.passed))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Hgz(c) => cmd_hgz(c).map(|s| (s, true)).map_err(Failure::Runtime),
        Command::Ext(c) => cmd_ext(c).map(|s| (s, true)).map_err(Failure::Runtime),
        Command::Resolvent(a) => cmd_resolvent(a).map(|s| (s, true)).map_err(Failure::Runtime),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok((text, passed)) => {
            print!("{text}");
            if passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
