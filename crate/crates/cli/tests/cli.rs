use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_morphopt"));
    c.env("RUST_LOG", "warn").env("MORPHOPT_THREADS", "2");
    c
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn mesh_info_reports_counts() {
    let o = bin()
        .args(["mesh-info", "--config"])
        .arg(config("cantilever_desk.cfg"))
        .output()
        .unwrap();
    assert!(o.status.success(), "{o:?}");
    let text = stdout(&o);
    assert!(text.contains("nodes: 1281"), "{text}");
    assert!(text.contains("triangles: 2400"), "{text}");
}

#[test]
fn run_then_render() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = bin()
        .args(["run", "--config"])
        .arg(config("cantilever_desk.cfg"))
        .args(["--override", "h=0.1", "--override", "regularization.epsilon=0.2"])
        .args(["--override", "optimizer.max_outer_iters=5", "--seed-free", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{o:?}");
    for f in ["history.csv", "summary.json", "resolved.cfg", "final.vtk", "composite.ppm"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let image = tmp.path().join("again.ppm");
    let o = bin()
        .args(["render", "--vtk"])
        .arg(out.join("final.vtk"))
        .arg("--out")
        .arg(&image)
        .args(["--width", "50"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{o:?}");
    assert!(std::fs::read_to_string(&image).unwrap().starts_with("P3\n50 "));
}

#[test]
fn bad_override_fails_with_key() {
    let o = bin()
        .args(["run", "--config"])
        .arg(config("cantilever_desk.cfg"))
        .args(["--override", "materials.responsive.poisson=0.7"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("materials.responsive.poisson"));
}

#[test]
fn check_gradient_passes_and_refuses_seed_free() {
    let o = bin()
        .args(["check-gradient", "--trials", "3", "--config"])
        .arg(config("cantilever_desk.cfg"))
        .args(["--override", "h=0.1", "--override", "regularization.epsilon=0.2"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{o:?}");
    let text = stdout(&o);
    assert!(text.contains("design max relative error") && text.contains("PASS"), "{text}");

    let o = bin()
        .args(["--seed-free", "check-gradient", "--config"])
        .arg(config("cantilever_desk.cfg"))
        .output()
        .unwrap();
    assert!(!o.status.success());
}

#[test]
fn profile_oracle_prints_csv() {
    let o = bin()
        .args(["profile-oracle", "--epsilons", "0.1,0.05", "--intervals", "400"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{o:?}");
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("epsilon,energy,off_edge,iterations"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2);
    let energy: f64 = rows[0].split(',').nth(1).unwrap().parse().unwrap();
    assert!(energy > 0.6 && energy < 0.668, "{energy}");
}

#[test]
fn invalid_thread_count_is_rejected() {
    let o = bin()
        .env("MORPHOPT_THREADS", "many")
        .args(["mesh-info", "--config"])
        .arg(config("cantilever_desk.cfg"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
