use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_brakewell"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn verify_passes_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let first = run(&["verify", "--no-timestamp"], &a);
    assert_eq!(first.status.code(), Some(0), "{}", stdout(&first));
    run(&["verify", "--no-timestamp"], &b);
    let ra = std::fs::read(a.join("verify.csv")).unwrap();
    assert_eq!(ra, std::fs::read(b.join("verify.csv")).unwrap());
    assert!(String::from_utf8(ra).unwrap().starts_with("module,invariant,value,relation,budget,status\n"));

    let stamped = run(&["verify"], &a);
    assert_eq!(stamped.status.code(), Some(0));
    let text = std::fs::read_to_string(a.join("verify.csv")).unwrap();
    assert!(text.starts_with("# generated "));
}

#[test]
fn corrupted_matching_coefficient_fails_verify() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("neg.cfg");
    std::fs::write(&cfg, "model.f3_perturbation = 1e-3\n").unwrap();
    let o = run(&["verify", "--no-timestamp", "--config", cfg.to_str().unwrap()], dir.path());
    assert_ne!(o.status.code(), Some(0));
    let report = std::fs::read_to_string(dir.path().join("verify.csv")).unwrap();
    let failing: Vec<&str> = report.lines().filter(|l| l.ends_with(",FAIL")).collect();
    assert_eq!(failing.len(), 1, "{failing:?}");
    assert!(failing[0].contains("radial curvature jump"));
}

/// Residuals of the concentric well are no worse than those of the default
/// shifted well, check by check.
#[test]
fn concentric_scenario_passes_with_smaller_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let (zero, shifted) = (dir.path().join("zero"), dir.path().join("shifted"));
    assert_eq!(run(&["verify", "--no-timestamp", "--eps", "0"], &zero).status.code(), Some(0));
    run(&["verify", "--no-timestamp"], &shifted);
    let rows = |p: &Path| -> Vec<(String, f64, String)> {
        std::fs::read_to_string(p.join("verify.csv"))
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| {
                let f: Vec<&str> = l.rsplitn(5, ',').collect();
                (f[4].to_string(), f[3].parse().unwrap(), f[2].to_string())
            })
            .collect()
    };
    let shifted_rows = rows(&shifted);
    let mut compared = 0;
    for (name, value, relation) in rows(&zero) {
        if relation != "<=" || !name.starts_with("geodesics") && !name.starts_with("maupertuis") {
            continue;
        }
        if let Some((_, v, _)) = shifted_rows.iter().find(|r| r.0 == name) {
            compared += 1;
            // Residuals at rounding level carry no ordering.
            assert!(value <= v.max(1e-12) * 10.0, "{name}: {value} vs {v}");
        }
    }
    assert!(compared > 5);
}

#[test]
fn census_prints_two_and_writes_its_files() {
    let dir = tempfile::tempdir().unwrap();
    for mode in ["brake", "homoclinic"] {
        let out = dir.path().join(mode);
        let o = run(&["census", "--mode", mode, "--strict", "--no-timestamp"], &out);
        assert_eq!(o.status.code(), Some(0));
        assert!(stdout(&o).contains("count = 2"), "{}", stdout(&o));
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out.join("census.json")).unwrap()).unwrap();
        for key in ["mode", "eps", "energy", "count", "roots", "residual_summary"] {
            assert!(json.get(key).is_some(), "{key}");
        }
        assert_eq!(json["count"], 2);
        assert_eq!(json["mode"], mode);
        let orbit = std::fs::read_to_string(out.join("orbit_0.csv")).unwrap();
        assert!(orbit.starts_with("t,q1,q2,speed\n"));
        assert!(std::fs::read_to_string(out.join("census.csv")).unwrap().starts_with("index,theta,"));
    }
}

#[test]
fn census_eccentricity_sweep() {
    let dir = tempfile::tempdir().unwrap();
    for eps in ["0.01", "0.02", "0.05"] {
        let o = run(&["census", "--eps", eps, "--no-timestamp"], dir.path());
        assert!(stdout(&o).contains("count = 2"), "{eps}: {}", stdout(&o));
    }
}

#[test]
fn export_formats() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["export", "potential-grid"], dir.path()).status.code(), Some(0));
    let grid = std::fs::read_to_string(dir.path().join("potential_grid.csv")).unwrap();
    let mut lines = grid.lines();
    assert_eq!(lines.next(), Some("x,y,V,region"));
    assert_eq!(grid.lines().count(), 1 + 441 * 441);
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[0].parse::<f64>().unwrap(), -2.2f64);
    assert_eq!(first[3], "collar");
    assert!(!grid.contains('\r'));

    assert_eq!(run(&["export", "flow-grid"], dir.path()).status.code(), Some(0));
    let flow = std::fs::read_to_string(dir.path().join("flow_grid.csv")).unwrap();
    assert!(flow.starts_with("p_index,s,x1,x2,f_residual\n"));
    for line in flow.lines().skip(1) {
        let residual: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(residual.abs() < 1e-8, "{line}");
    }

    assert_eq!(run(&["export", "orbits"], dir.path()).status.code(), Some(0));
    assert!(dir.path().join("orbit_1.csv").exists());
}

#[test]
fn bad_input_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "model.eps = 0.05\nmodel.eps = oops\n").unwrap();
    let o = run(&["verify", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("config line 2"));
    let o = run(&["census", "--eps", "0.5"], dir.path());
    assert_eq!(o.status.code(), Some(3));
}
