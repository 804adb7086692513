use std::process::{Command, Output};

fn saf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_saf"))
        .args(args)
        .env_remove("SAF_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn csv_column(text: &str, col: usize) -> Vec<f64> {
    text.lines().skip(1).map(|l| l.split(',').nth(col).unwrap().parse().unwrap()).collect()
}

#[test]
fn hgz_eval_linear() {
    let o = saf(&["hgz", "eval", "--h0", "1", "--h", "2", "--lambda", "0+1i"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "2+1i\n");
}

#[test]
fn hgz_cayley_infinity() {
    let o = saf(&["hgz", "cayley", "--f", "inf"]);
    assert_eq!(stdout(&o), "omega = 1\n");
    let o = saf(&["hgz", "cayley", "--omega", "1"]);
    assert_eq!(stdout(&o), "f = inf\n");
    let o = saf(&["hgz", "cayley", "--value", "0"]);
    assert_eq!(stdout(&o), "omega = -1\n");
}

#[test]
fn hgz_invert_single_atom() {
    let o = saf(&["hgz", "invert", "--from-atoms", "[[0,1]]", "--window", "-1,1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o), "(0, 1.000000)\n");
}

#[test]
fn hgz_asymptotics() {
    let o = saf(&["hgz", "asymptotics", "--f", "h0=0.5,h=-1,atoms=[[-1,1],[2,3]]"]);
    assert_eq!(stdout(&o), "h0 = 0.500000000000\nh = -1.000000000000\n");
}

#[test]
fn ext_eigs_match_tangent_roots_and_dirichlet() {
    let o = saf(&["ext", "eigs", "--model", "sl", "--q", "0", "--f", "h0=1", "--window", "0,50", "--n", "200"]);
    let eigs = csv_column(&stdout(&o), 1);
    let expected = [0.7402, 11.7349, 41.4388];
    assert_eq!(eigs.len(), 3);
    for (e, x) in eigs.iter().zip(expected) {
        assert!((e - x).abs() / x < 1e-3, "{e} vs {x}");
    }

    let o = saf(&["ext", "eigs", "--model", "sl", "--q", "0", "--f", "inf", "--window", "0,50", "--n", "200"]);
    let eigs = csv_column(&stdout(&o), 1);
    assert_eq!(eigs.len(), 2);
    for (e, x) in eigs.iter().zip([9.8696, 39.4784]) {
        assert!((e - x).abs() / x < 1e-3);
    }
}

#[test]
fn ext_roots_cross_validate_eigs() {
    let args = ["--model", "sl", "--q", "0", "--f", "h0=1", "--window", "0,50", "--n", "200"];
    let eigs = csv_column(&stdout(&saf(&[&["ext", "eigs"][..], &args].concat())), 1);
    let roots = csv_column(&stdout(&saf(&[&["ext", "roots"][..], &args].concat())), 1);
    assert_eq!(eigs.len(), roots.len());
    for (e, r) in eigs.iter().zip(&roots) {
        assert!((e - r).abs() / r < 1e-3);
    }
}

#[test]
fn ext_minimality_and_export() {
    let o = saf(&["ext", "minimality", "--n", "30", "--f", "h0=1,atoms=[[-1,1],[2,3]]"]);
    assert!(stdout(&o).starts_with("rank = 33\ndim = 33\n"));
    let o = saf(&["ext", "minimality", "--n", "30", "--f", "h=2"]);
    assert!(stdout(&o).starts_with("rank = 30\ndim = 30\n"));

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("asm");
    let o = saf(&["ext", "export", "--n", "20", "--f", "h0=1,atoms=[[0,2]]", "--window", "0,100", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let header: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("header.json")).unwrap()).unwrap();
    assert_eq!(header["layout"], serde_json::json!([20, 1, 1]));
    let k = std::fs::read_to_string(out.join("K.mtx")).unwrap();
    assert!(k.starts_with("%%MatrixMarket matrix coordinate real general\n22 22 "));
    assert!(std::fs::read_to_string(out.join("spectrum.csv")).unwrap().starts_with("index,eigenvalue,residual\n"));
}

#[test]
fn ext_resolve_blocks() {
    let o = saf(&["ext", "resolve", "--n", "20", "--f", "h0=1,atoms=[[0,2]]", "--lambda", "1+2i", "--source", "sine"]);
    let text = stdout(&o);
    assert!(text.starts_with("block,index,coord,re,im\n"));
    assert_eq!(text.lines().filter(|l| l.starts_with("base,")).count(), 20);
    assert_eq!(text.lines().filter(|l| l.starts_with("atom,")).count(), 1);
    assert_eq!(text.lines().filter(|l| l.starts_with("aug,")).count(), 1);
    let o = saf(&["ext", "eigs", "--model", "first_order", "--f", "inf", "--window", "0,1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn resolvent_csv() {
    let o = saf(&["resolvent", "--model", "first_order", "--n", "64", "--f", "inf", "--lambda", "1+0.5i;-2+1i", "--source", "one"]);
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "lambda_re,lambda_im,residual_ode,residual_bc,c_re,c_im");
    let row: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    // c = −1/λ for the constant source
    let l = num_complex::Complex64::new(1.0, 0.5);
    let c = -1.0 / l;
    assert!((row[4] - c.re).abs() < 1e-12 && (row[5] - c.im).abs() < 1e-12);
    assert_eq!(lines.count(), 1);
}

#[test]
fn verify_exit_codes() {
    let o = saf(&["verify"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));

    let o = saf(&["verify", "--inject-defect", "nonhermitian", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(1));
    for line in stdout(&o).lines().skip(1) {
        let failed = line.contains(",fail,");
        assert_eq!(failed, line.starts_with("extension.hermitian."), "{line}");
    }

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"herglotz": []}"#).unwrap();
    let o = saf(&["verify", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("herglotz"));

    std::fs::write(&bad, "{not json").unwrap();
    assert_eq!(saf(&["verify", "--config", bad.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn verify_is_deterministic_and_seed_overridable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"mesh_sizes": [50, 100], "samples": 4}"#).unwrap();
    let run = |seed: &str| {
        Command::new(env!("CARGO_BIN_EXE_saf"))
            .args(["verify", "--config", cfg.to_str().unwrap(), "--only", "resolvent.symmetry", "--format", "csv"])
            .env("SAF_SEED", seed)
            .output()
            .unwrap()
            .stdout
    };
    assert_eq!(run("11"), run("11"));
    assert_ne!(run("11"), run("12"));

    let out = dir.path().join("reports");
    let o = saf(&["verify", "--config", cfg.to_str().unwrap(), "--only", "herglotz.", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    for f in ["report.txt", "report.json", "report.csv"] {
        assert!(out.join(f).exists());
    }
}
