//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use morphopt::driver::{parse_config, run, ProblemSpec, RunArtifacts};
use morphopt::elasticity::{Constraints, Elasticity, SolverSettings};
use morphopt::mesh::{build_rect_mesh, BoxRegion, Side};
use morphopt::sensitivity::{breakdown, evaluate, Gradient};
use morphopt::stimulus_update::minimize_stimulus_field;
use morphopt::verify::{
    brute_force_stimulus, fd_gradient_check, fd_gradient_check_with, profile_coefficient, with_tight_solver,
    ProfilePotential, ProfileSettings,
};
use morphopt::{DesignField, DesignProblem, Material, PhaseSet, StimulusField, VectorField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String), String>;

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn load(name: &str, overrides: &[&str]) -> Result<ProblemSpec, String> {
    let o: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    parse_config(&config_path(name), &o).map_err(|e| e.to_string())
}

fn fail<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn criterion1() -> Outcome {
    let spec = load("cantilever_desk.cfg", &["h=0.05", "regularization.epsilon=0.1"])?;
    let problem = with_tight_solver(&spec.build_problem().map_err(fail)?, 1e-12);
    let report = fd_gradient_check(&problem, 20, 1e-6, 7).map_err(fail)?;
    let corrupt = |pb: &DesignProblem, d: &DesignField, s: &StimulusField| -> morphopt::Result<Gradient> {
        let mut g = evaluate(pb, d, s)?.gradient;
        let bump = |v: &mut [f64]| {
            if let Some(k) = (0..v.len()).max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs())) {
                v[k] *= 1.01;
            }
        };
        let mut flat: Vec<f64> = g.g_rho2.iter().chain(&g.g_rho3).copied().collect();
        bump(&mut flat);
        let n = g.g_rho2.len();
        g.g_rho2.copy_from_slice(&flat[..n]);
        g.g_rho3.copy_from_slice(&flat[n..]);
        for gs in &mut g.g_s {
            bump(gs);
        }
        Ok(g)
    };
    let mutated = fd_gradient_check_with(&problem, 20, 1e-6, 7, &corrupt).map_err(fail)?;
    let ok = report.design <= 1e-5 && report.stimulus <= 1e-5 && !mutated.passes(1e-5);
    Ok((
        ok,
        format!(
            "design {:.2e}, stimulus {:.2e} over {} iterates; corrupted gradient: design {:.2e}, stimulus {:.2e}",
            report.design, report.stimulus, report.trials, mutated.design, mutated.stimulus
        ),
    ))
}

fn criterion2() -> Outcome {
    let spec = load("cantilever_desk.cfg", &["h=0.1", "regularization.epsilon=0.2"])?;
    let problem = spec.build_problem().map_err(fail)?;
    let n = problem.num_nodes();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let design = DesignField {
        rho2: (0..n).map(|_| rng.gen_range(0.0..0.5)).collect(),
        rho3: (0..n).map(|_| rng.gen_range(0.0..0.5)).collect(),
    };
    let lambda: Vec<VectorField> = vec![VectorField::from_dofs(
        (0..2 * n).map(|_| rng.gen_range(-0.05..0.05)).collect(),
    )];
    let closed = minimize_stimulus_field(
        &problem.mesh,
        &design,
        &lambda,
        problem.phases(),
        problem.params.stimulus_weight,
        problem.carrier,
    )
    .map_err(fail)?;
    let brute = brute_force_stimulus(&problem, &design, &lambda, 20_000).map_err(fail)?;
    let diff = closed.cases[0]
        .iter()
        .zip(&brute.cases[0])
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let interior = closed.cases[0].iter().filter(|s| s.abs() < 1.0).count();
    Ok((
        diff <= 1e-4,
        format!("max |Δs| {diff:.2e} over {n} nodes ({interior} interior optima)"),
    ))
}

fn criterion3() -> Outcome {
    let bx = BoxRegion {
        x_min: 0.75,
        x_max: 1.0,
        y_min: 0.0,
        y_max: 0.25,
    };
    let mesh = build_rect_mesh(1.0, 0.5, 1.0 / 20.0, Side::Left, bx).map_err(fail)?;
    let n = mesh.num_nodes();
    let phases = PhaseSet::new(
        Material::new(5.0, 0.3, 0.0).map_err(fail)?,
        Material::new(5.0, 0.3, 1.0).map_err(fail)?,
        1e-4,
    )
    .map_err(fail)?;
    // node 0 at the origin, node 1 its right neighbor on the same row
    let pins = Constraints::point_pins(&mesh, 0, (1, 1));
    let solver = SolverSettings {
        rtol: 1e-10,
        max_iter_factor: 10,
    };
    let el = Elasticity::new(&mesh, phases, pins, solver);
    let c = 0.61;
    let st = el
        .solve_state(&mesh, &DesignField::constant(n, 0.0, 1.0), &StimulusField::constant(1, n, c), None)
        .map_err(fail)?;
    let x0 = mesh.nodes[0];
    let err = (0..n)
        .map(|i| {
            let u = st.u[0].at(i);
            let p = mesh.nodes[i];
            (u[0] - c * (p[0] - x0[0])).abs().max((u[1] - c * (p[1] - x0[1])).abs())
        })
        .fold(0.0, f64::max);
    Ok((err <= 1e-9, format!("max nodal error {err:.2e} (s = {c})")))
}

fn criterion4() -> Outcome {
    let eps = [0.08, 0.04, 0.02, 0.01];
    let points = profile_coefficient(
        &eps,
        ProfilePotential::MultiWell { from: 0, to: 2 },
        &ProfileSettings::default(),
    )
    .map_err(fail)?;
    let energies: Vec<f64> = points.iter().map(|p| p.energy).collect();
    let plateau = energies
        .windows(2)
        .map(|w| (w[1] - w[0]).abs() / w[0].abs())
        .fold(0.0, f64::max);
    let limit = *energies.last().unwrap();
    let bound = 2.0 / 3.0;
    let ok = plateau < 0.02 && limit <= bound + 1e-3 && limit >= 0.9 * bound;
    Ok((
        ok,
        format!(
            "energies {:?}, max successive change {:.2e}, limit {limit:.6} vs straight edge {bound:.6}",
            energies.iter().map(|e| format!("{e:.6}")).collect::<Vec<_>>(),
            plateau
        ),
    ))
}

fn criterion5() -> Outcome {
    let spec = load("cantilever.cfg", &["h=0.016666666666666666"])?;
    let problem = spec.build_problem().map_err(fail)?;
    let n = problem.num_nodes();
    let design = DesignField::constant(n, 0.3, 0.3);
    let stimulus = StimulusField::constant(1, n, 0.0);
    let state = problem.solve_state(&design, &stimulus).map_err(fail)?;
    let b = breakdown(&problem, &design, &stimulus, &state).map_err(fail)?;

    let p = &spec.regularization;
    let area = 1.0 / 3.0;
    let a = 1.0 / 15.0;
    let tracking = 0.5 * a * a;
    // W(0.4, 0.3, 0.3) = 0.4²·0.6² + 2·0.3²·0.7²
    let w = 0.16 * 0.36 + 2.0 * 0.09 * 0.49;
    let perimeter = area * w / p.epsilon;
    let volume = area * (p.nu2 * 0.3 + p.nu3 * 0.3);
    let total = tracking + p.alpha * perimeter + volume;
    let rel = |x: f64, y: f64| (x - y).abs() / y.abs();
    let errs = [
        rel(b.tracking, tracking),
        rel(b.perimeter, perimeter),
        rel(b.volume_penalty, volume),
        rel(b.total, total),
    ];
    let worst = errs.iter().copied().fold(0.0, f64::max);
    let ok = worst <= 1e-10 && b.stimulus_penalty == 0.0;
    Ok((
        ok,
        format!(
            "tracking {:.10e}, perimeter {:.10e}, volume {:.10e}, total {:.10e}; worst relative error {worst:.1e}",
            b.tracking, b.perimeter, b.volume_penalty, b.total
        ),
    ))
}

struct DeskRuns {
    staggered: RunArtifacts,
    monolithic: RunArtifacts,
    elapsed: Duration,
    _dir: tempfile::TempDir,
}

fn desk_runs() -> Result<DeskRuns, String> {
    let dir = tempfile::tempdir().map_err(fail)?;
    let start = Instant::now();
    let go = |cfg: &str, sub: &str| -> Result<RunArtifacts, String> {
        let mut spec = load(cfg, &[])?;
        spec.output.dir = dir.path().join(sub);
        run(&spec).map_err(fail)
    };
    let staggered = go("cantilever_desk.cfg", "staggered")?;
    let monolithic = go("cantilever_monolithic_desk.cfg", "monolithic")?;
    Ok(DeskRuns {
        staggered,
        monolithic,
        elapsed: start.elapsed(),
        _dir: dir,
    })
}

fn monotone(a: &RunArtifacts) -> bool {
    a.outcome
        .history
        .windows(2)
        .all(|w| w[1].breakdown.total <= w[0].breakdown.total)
}

fn in_bounds(a: &RunArtifacts) -> bool {
    let d = &a.outcome.design;
    d.rho2.iter().chain(&d.rho3).all(|v| (0.0..=1.0).contains(v))
        && a.outcome.stimulus.cases.iter().flatten().all(|v| (-1.0..=1.0).contains(v))
}

fn criterion6(runs: &DeskRuns) -> Outcome {
    let s = &runs.staggered;
    let m = &runs.monolithic;
    let first = s.outcome.history.first().unwrap().breakdown.tracking;
    let last = s.outcome.history.last().unwrap().breakdown.tracking;
    let reduction = 1.0 - last / first;
    let checks = [
        ("monotone history (staggered)", monotone(s)),
        ("monotone history (monolithic)", monotone(m)),
        ("staggered tracking reduced by >= 90%", reduction >= 0.9),
        ("bounds honored (staggered)", in_bounds(s)),
        ("bounds honored (monolithic)", in_bounds(m)),
        ("Dirichlet boundary linked to target (staggered)", s.summary.connected),
        ("Dirichlet boundary linked to target (monolithic)", m.summary.connected),
        ("runtime under 15 min", runs.elapsed < Duration::from_secs(900)),
    ];
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    Ok((
        failed.is_empty(),
        format!(
            "staggered: {} iterations ({:?}), tracking {first:.3e} -> {last:.3e} ({:.1}% reduction), volume fractions {:.3}/{:.3}; \
             monolithic: {} iterations ({:?}), volume fractions {:.3}/{:.3}; {:.1} s; failed checks: {:?}",
            s.summary.iterations,
            s.outcome.termination,
            100.0 * reduction,
            s.summary.vol_frac2,
            s.summary.vol_frac3,
            m.summary.iterations,
            m.outcome.termination,
            m.summary.vol_frac2,
            m.summary.vol_frac3,
            runs.elapsed.as_secs_f64(),
            failed
        ),
    ))
}

fn criterion7(runs: &DeskRuns) -> Outcome {
    let s = runs.staggered.summary.breakdown.total;
    let m = runs.monolithic.summary.breakdown.total;
    Ok((
        s <= m,
        format!(
            "staggered {s:.6e} vs monolithic {m:.6e} (budget {} iterations each)",
            load("cantilever_desk.cfg", &[])?.optimizer.max_outer_iters
        ),
    ))
}

/// Maps lattice coordinates of hexagon nodes to indices.
fn lattice_index(nodes: &[[f64; 2]], a: f64) -> HashMap<(i64, i64), usize> {
    let h = 0.5 * 3f64.sqrt();
    nodes
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let j = (p[1] / (a * h)).round() as i64;
            let i = (p[0] / a - 0.5 * j as f64).round() as i64;
            ((i, j), k)
        })
        .collect()
}

fn criterion8() -> Outcome {
    let spec = load("hexagon_contrast10_desk.cfg", &[])?;
    let problem = with_tight_solver(&spec.build_problem().map_err(fail)?, 1e-12);
    let mesh = &problem.mesh;
    let n = mesh.num_nodes();
    let edge = match spec.domain {
        morphopt::driver::config::DomainSpec::Hexagon { edge, .. } => edge,
        _ => return Err("expected a hexagon domain".into()),
    };
    let k = (edge / spec.h).round();
    let index = lattice_index(&mesh.nodes, edge / k);
    // rotation by 2π/3 acts on lattice coordinates as (i, j) -> (-i-j, i)
    let mut perm = vec![0; n];
    for (&(i, j), &node) in &index {
        perm[node] = *index.get(&(-i - j, i)).ok_or("lattice not closed under rotation")?;
    }
    let design = DesignField::constant(n, 0.3, 0.3);
    let stimulus = StimulusField::constant(problem.num_cases(), n, 0.5);
    let g = evaluate(&problem, &design, &stimulus).map_err(fail)?.gradient;
    let scale = g.g_rho2.iter().chain(&g.g_rho3).map(|v| v.abs()).fold(0.0, f64::max);
    let mut worst: f64 = 0.0;
    for node in 0..n {
        worst = worst.max((g.g_rho2[perm[node]] - g.g_rho2[node]).abs());
        worst = worst.max((g.g_rho3[perm[node]] - g.g_rho3[node]).abs());
    }
    let rel = worst / scale;
    // the tracking part must be non-trivial for the check to mean anything
    let spread = g.g_rho3.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v))
        - g.g_rho3.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    Ok((
        rel <= 1e-10 && spread > 1e-3 * scale,
        format!("max |g(Rx) - g(x)| / max |g| = {rel:.2e} over {n} nodes (gradient spread {spread:.2e})"),
    ))
}

fn criterion9(runs: &DeskRuns) -> Outcome {
    let again = desk_runs()?;
    let read = |a: &RunArtifacts| std::fs::read(a.path(morphopt::driver::run::HISTORY_FILE)).map_err(fail);
    let same_s = read(&runs.staggered)? == read(&again.staggered)?;
    let same_m = read(&runs.monolithic)? == read(&again.monolithic)?;
    Ok((
        same_s && same_m,
        format!("staggered identical: {same_s}, monolithic identical: {same_m}"),
    ))
}

fn report(id: usize, title: &str, start: Instant, outcome: Outcome) -> bool {
    let secs = start.elapsed().as_secs_f64();
    match outcome {
        Ok((true, detail)) => {
            println!("criterion {id} ({title}): PASS [{secs:.1} s] {detail}");
            true
        }
        Ok((false, detail)) => {
            println!("criterion {id} ({title}): FAIL [{secs:.1} s] {detail}");
            false
        }
        Err(e) => {
            println!("criterion {id} ({title}): FAIL [{secs:.1} s] error: {e}");
            false
        }
    }
}

fn main() {
    let mut passed = Vec::new();
    let t = Instant::now();
    passed.push(report(1, "gradient exactness", t, criterion1()));
    let t = Instant::now();
    passed.push(report(2, "closed-form stimulus optimality", t, criterion2()));
    let t = Instant::now();
    passed.push(report(3, "analytic dilation", t, criterion3()));
    let t = Instant::now();
    passed.push(report(4, "perimeter coefficient", t, criterion4()));
    let t = Instant::now();
    passed.push(report(5, "constant-field objective values", t, criterion5()));
    let t = Instant::now();
    match desk_runs() {
        Ok(runs) => {
            passed.push(report(6, "desk-scale cantilever", t, criterion6(&runs)));
            passed.push(report(7, "scheme comparison", Instant::now(), criterion7(&runs)));
            let t = Instant::now();
            passed.push(report(8, "equivariance", t, criterion8()));
            let t = Instant::now();
            passed.push(report(9, "determinism", t, criterion9(&runs)));
        }
        Err(e) => {
            for (id, title) in [(6, "desk-scale cantilever"), (7, "scheme comparison"), (9, "determinism")] {
                passed.push(report(id, title, t, Err(e.clone())));
            }
            let t = Instant::now();
            passed.push(report(8, "equivariance", t, criterion8()));
        }
    }
    let failures = passed.iter().filter(|p| !**p).count();
    println!("acceptance: {} passed, {failures} failed", passed.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
