use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_versatile-ns"))
}

#[test]
fn verify_passes_and_reports_every_check() {
    let out = bin().arg("verify").output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["jump_identity", "convective_energy", "decomposition", "allaire", "kernel_3d", "kernel_2d", "coercivity_BDM1", "mass_spd_BDM2"]
    {
        assert!(text.contains(&format!("[PASS] {name}")), "missing {name} in\n{text}");
    }
    assert!(!text.contains("[FAIL]"));
}

#[test]
fn bad_arguments_fail_with_a_message() {
    let out = bin().args(["run", "--frobnicate"]).output().unwrap();
    assert!(!out.status.success());
    let out = bin().args(["run", "--zeta", "2", "--out-dir", "/nonexistent/x"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("zeta"));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"k": 1, "viscosity": 0.1}"#).unwrap();
    let out = bin().arg("run").arg("--config").arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("viscosity"));
    let out = bin().arg("verify").env("VNS_THREADS", "0").output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn run_writes_diagnostics_and_fields() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"case": "taylor_green", "formulation": "RT-Symmetric", "nx": 4, "t_end": 0.03}"#).unwrap();
    let out = bin().arg("run").arg("--config").arg(&cfg).arg("--out-dir").arg(dir.path()).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("vel_l2="), "{stdout}");
    let names: Vec<String> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    let diag = names.iter().find(|n| n.starts_with("diagnostics_")).expect("diagnostics file");
    assert!(names.iter().any(|n| n.starts_with("fields_") && n.ends_with(".vtk")), "{names:?}");
    let csv = std::fs::read_to_string(dir.path().join(diag)).unwrap();
    // Header plus levels 0..=3.
    assert_eq!(csv.lines().count(), 5, "{csv}");
}

#[test]
fn convergence_table_ignores_thread_count() {
    let mut tables = Vec::new();
    for threads in ["1", "2"] {
        let dir = tempfile::tempdir().unwrap();
        let out = bin()
            .args(["convergence", "--nx", "4", "--meshes", "4,6", "--t-end", "0.03", "--out-dir"])
            .arg(dir.path())
            .env("VNS_THREADS", threads)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let path = std::fs::read_dir(dir.path()).unwrap().next().unwrap().unwrap().path();
        tables.push(std::fs::read(path).unwrap());
    }
    assert_eq!(tables[0], tables[1]);
}
