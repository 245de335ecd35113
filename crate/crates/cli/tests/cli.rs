use std::process::Command;

fn randwaves(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_randwaves"))
        .args(args)
        .env_remove("RANDWAVES_OUT")
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn data_rows(stdout: &str) -> Vec<&str> {
    stdout.lines().filter(|l| !l.starts_with('#')).skip(1).collect()
}

#[test]
fn lattice_row_for_five() {
    let (code, out, _) = randwaves(&["lattice", "--n", "5"]);
    assert_eq!(code, 0);
    assert!(out.lines().next().unwrap().starts_with("# randwaves "));
    let row: Vec<&str> = data_rows(&out)[0].split(',').collect();
    assert_eq!(&row[..3], &["5", "8", "-0.28"]);
    let c: f64 = row[3].parse().unwrap();
    assert!((c - (1.0 + 0.28f64 * 0.28) / 512.0).abs() < 1e-15);
    let e: f64 = row[4].parse().unwrap();
    assert!((e - 197.392_088_021_787_17).abs() < 1e-9);
}

#[test]
fn c42_constant() {
    let (code, out, _) = randwaves(&["constants", "--family", "cqd", "--q", "4", "--d", "2"]);
    assert_eq!(code, 0);
    let v: f64 = data_rows(&out)[0].split(',').nth(1).unwrap().parse().unwrap();
    assert!((v - 0.151_981_775_463_506_66).abs() < 1e-15);
}

#[test]
fn so3_kernel_verdict() {
    let (code, out, _) = randwaves(&["kernel", "--space", "so3", "--lmax", "2"]);
    assert_eq!(code, 0);
    let rows = data_rows(&out);
    let a2: f64 = rows[2].split(',').nth(1).unwrap().parse().unwrap();
    assert!((a2 - 2.0 / (9.0 * std::f64::consts::PI)).abs() < 1e-15);
    assert!(out.contains("verdict: Not (alpha_2"));
}

#[test]
fn unknown_flag_exits_with_usage() {
    let (code, _, err) = randwaves(&["lattice", "--bogus"]);
    assert_eq!(code, 2);
    assert!(err.contains("Usage"));
}

#[test]
fn configuration_errors_exit_two() {
    let (code, _, err) = randwaves(&["lattice", "--n", "3"]);
    assert_eq!(code, 2);
    assert!(err.contains("not a sum of two squares") || err.contains("3"), "{err}");
    let (code, _, _) = randwaves(&["sphere", "--m", "0", "--ell", "5"]);
    assert_eq!(code, 2);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = std::env::temp_dir().join(format!("randwaves-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, "# energy\nn = 65\n").unwrap();
    let (_, out, _) = randwaves(&["lattice", "--config", cfg.to_str().unwrap()]);
    assert!(data_rows(&out)[0].starts_with("65,16,"));
    let (_, out, _) = randwaves(&["lattice", "--config", cfg.to_str().unwrap(), "--n", "25"]);
    assert!(data_rows(&out)[0].starts_with("25,12,"));
}

#[test]
fn sphere_run_writes_outputs() {
    let dir = std::env::temp_dir().join(format!("randwaves-out-{}", std::process::id()));
    let (code, out, _) = randwaves(&[
        "sphere", "--ell", "8", "--m", "6", "--z", "0.5", "--functional", "area,length", "--out", dir.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(out.contains("area@0.5") && out.contains("length@0.5"));
    let reps = std::fs::read_to_string(dir.join("sphere-l8.replicates.csv")).unwrap();
    assert_eq!(reps.lines().count(), 2 + 6);
    assert!(dir.join("sphere-l8.json").exists() && dir.join("summary.csv").exists());
    // Same seed, same output.
    let (_, again, _) = randwaves(&["sphere", "--ell", "8", "--m", "6", "--z", "0.5", "--functional", "area,length", "--workers", "2"]);
    assert_eq!(data_rows(&out), data_rows(&again));
}

#[test]
fn verify_single_analytic_criterion() {
    let (code, out, _) = randwaves(&["verify", "--quick", "--criterion", "2"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.lines().any(|l| l.starts_with("PASS criterion 2")));
}
