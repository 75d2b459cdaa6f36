//! Orchestration of one optimization run and its artifacts.

use std::collections::VecDeque;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ProblemSpec;
use super::export::{write_history, write_vtk, PointData};
use super::render::composite_export;
use crate::error::Result;
use crate::fields::{DesignField, StimulusField, VectorField};
use crate::functional::ObjectiveBreakdown;
use crate::mesh::Mesh;
use crate::optimizer::{run_monolithic, run_staggered, IterateRecord, IterateSnapshot, Scheme, SchemeOutcome};

pub const HISTORY_FILE: &str = "history.csv";
pub const CONFIG_FILE: &str = "resolved.cfg";
pub const SUMMARY_FILE: &str = "summary.json";
pub const FINAL_FILE: &str = "final.vtk";
pub const IMAGE_FILE: &str = "composite.ppm";
pub const ERROR_FILE: &str = "error.txt";

pub fn snapshot_name(iteration: usize) -> String {
    format!("snapshot_{iteration:05}.vtk")
}

/// Final state of a run; the numbers equal the last history row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub scheme: Scheme,
    pub termination: String,
    pub iterations: usize,
    pub breakdown: ObjectiveBreakdown,
    pub grad_norm_design: f64,
    pub grad_norm_stimulus: f64,
    pub vol_frac2: f64,
    pub vol_frac3: f64,
    /// Whether the thresholded material links the clamped boundary to the target region.
    pub connected: bool,
}

#[derive(Debug)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub snapshots: Vec<PathBuf>,
    pub summary: Summary,
    pub outcome: SchemeOutcome,
    pub mesh: Mesh,
}

impl RunArtifacts {
    pub fn path(&self, file: &str) -> PathBuf {
        self.dir.join(file)
    }
}

/// Writes design, stimuli, displacements and adjoints as nodal VTK data.
pub fn write_fields(
    path: &Path,
    mesh: &Mesh,
    title: &str,
    design: &DesignField,
    stimulus: &StimulusField,
    displacement: &[VectorField],
    adjoint: &[VectorField],
) -> Result<()> {
    let names: Vec<(String, String, String)> = (1..=stimulus.num_cases())
        .map(|j| (format!("s{j}"), format!("u{j}"), format!("lambda{j}")))
        .collect();
    let mut data = vec![PointData::Scalar("rho2", &design.rho2), PointData::Scalar("rho3", &design.rho3)];
    for (j, (s, _, _)) in names.iter().enumerate() {
        data.push(PointData::Scalar(s, &stimulus.cases[j]));
    }
    for (j, (_, u, _)) in names.iter().enumerate() {
        data.push(PointData::Vector(u, &displacement[j].values));
    }
    for (j, (_, _, l)) in names.iter().enumerate() {
        data.push(PointData::Vector(l, &adjoint[j].values));
    }
    write_vtk(BufWriter::new(File::create(path)?), mesh, title, &data)
}

/// Whether nodes with `ρ2 + ρ3 ≥ 1/2` contain a connected component touching
/// both the Dirichlet boundary and a node of the target region.
pub fn links_dirichlet_to_target(mesh: &Mesh, design: &DesignField) -> bool {
    let solid: Vec<bool> = (0..mesh.num_nodes())
        .map(|i| design.rho2[i] + design.rho3[i] >= 0.5)
        .collect();
    let mut goal = vec![false; mesh.num_nodes()];
    for &t in &mesh.target_elements {
        for &i in &mesh.triangles[t] {
            goal[i] = true;
        }
    }
    let adjacency = mesh.node_adjacency();
    let mut seen = vec![false; mesh.num_nodes()];
    let mut queue: VecDeque<usize> = mesh.dirichlet_nodes.iter().copied().filter(|&i| solid[i]).collect();
    for &i in &queue {
        seen[i] = true;
    }
    while let Some(i) = queue.pop_front() {
        if goal[i] {
            return true;
        }
        for &j in &adjacency[i] {
            if solid[j] && !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    false
}

/// Magnification making the largest displacement a tenth of the domain size.
fn auto_scale(mesh: &Mesh, displacement: &[VectorField]) -> f64 {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in &mesh.nodes {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let size = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    let umax = displacement
        .iter()
        .flat_map(|u| (0..u.num_nodes()).map(move |i| u.at(i)))
        .map(|d| d[0].hypot(d[1]))
        .fold(0.0, f64::max);
    if umax > 0.0 {
        0.1 * size / umax
    } else {
        1.0
    }
}

/// Runs the configured scheme and writes every artifact into `spec.output.dir`.
///
/// On a hard failure the history up to that point and an error report are
/// still written before the error is returned.
pub fn run(spec: &ProblemSpec) -> Result<RunArtifacts> {
    let dir = spec.output.dir.clone();
    fs::create_dir_all(&dir)?;
    fs::write(dir.join(CONFIG_FILE), spec.echo()?)?;
    let problem = spec.build_problem()?;
    let (design0, stimulus0) = spec.initial_fields(problem.num_nodes());
    log::info!(
        "{}: {} nodes, {} triangles, {} load case(s), {:?} scheme",
        spec.name,
        problem.mesh.num_nodes(),
        problem.mesh.num_triangles(),
        problem.num_cases(),
        spec.scheme
    );

    let cadence = spec.output.cadence;
    let mut snapshots = Vec::new();
    let mut history: Vec<IterateRecord> = Vec::new();
    let mesh = &problem.mesh;
    let mut observer = |snap: &IterateSnapshot| -> Result<()> {
        let it = snap.record.iteration;
        let b = &snap.record.breakdown;
        log::info!(
            "iter {it:4}  total {:.6e}  tracking {:.6e}  |g_rho| {:.3e}  step {:.3e}",
            b.total,
            b.tracking,
            snap.record.grad_norm_design,
            snap.record.step
        );
        history.push(snap.record.clone());
        if it == 0 || (cadence > 0 && it % cadence == 0) {
            let path = dir.join(snapshot_name(it));
            write_fields(
                &path,
                mesh,
                &format!("{} iteration {it}", spec.name),
                snap.design,
                snap.stimulus,
                snap.displacement,
                snap.adjoint,
            )?;
            snapshots.push(path);
        }
        Ok(())
    };
    let outcome = match spec.scheme {
        Scheme::Monolithic => run_monolithic(&problem, &design0, &stimulus0, &spec.optimizer, &mut observer),
        Scheme::Staggered => run_staggered(&problem, &design0, &stimulus0, &spec.optimizer, &mut observer),
    };
    let outcome = match outcome {
        Ok(o) => o,
        Err(e) => {
            write_history(BufWriter::new(File::create(dir.join(HISTORY_FILE))?), &history)?;
            fs::write(dir.join(ERROR_FILE), format!("{e}\n"))?;
            return Err(e);
        }
    };
    write_history(BufWriter::new(File::create(dir.join(HISTORY_FILE))?), &outcome.history)?;

    let last = outcome.history.last().expect("schemes record the initial iterate").clone();
    let title = format!("{} final", spec.name);
    let final_snapshot = dir.join(snapshot_name(last.iteration));
    if snapshots.last() != Some(&final_snapshot) {
        write_fields(
            &final_snapshot,
            mesh,
            &title,
            &outcome.design,
            &outcome.stimulus,
            &outcome.displacement,
            &outcome.adjoint,
        )?;
        snapshots.push(final_snapshot);
    }
    write_fields(
        &dir.join(FINAL_FILE),
        mesh,
        &title,
        &outcome.design,
        &outcome.stimulus,
        &outcome.displacement,
        &outcome.adjoint,
    )?;

    let scale = if spec.output.render_scale > 0.0 {
        spec.output.render_scale
    } else {
        auto_scale(mesh, &outcome.displacement)
    };
    let rendered = composite_export(
        mesh,
        &outcome.design,
        &outcome.stimulus,
        &outcome.displacement,
        scale,
        spec.output.render_width,
    )?;
    rendered.image.write_ppm(BufWriter::new(File::create(dir.join(IMAGE_FILE))?))?;

    let summary = Summary {
        name: spec.name.clone(),
        scheme: spec.scheme,
        termination: format!("{:?}", outcome.termination),
        iterations: last.iteration,
        breakdown: last.breakdown,
        grad_norm_design: last.grad_norm_design,
        grad_norm_stimulus: last.grad_norm_stimulus,
        vol_frac2: last.vol_frac2,
        vol_frac3: last.vol_frac3,
        connected: links_dirichlet_to_target(mesh, &outcome.design),
    };
    let json = serde_json::to_string_pretty(&summary).map_err(|e| crate::Error::Parse(e.to_string()))?;
    fs::write(dir.join(SUMMARY_FILE), json + "\n")?;
    log::info!(
        "{}: {:?} after {} iterations, objective {:.6e}",
        spec.name,
        outcome.termination,
        last.iteration,
        last.breakdown.total
    );
    Ok(RunArtifacts {
        dir,
        snapshots,
        summary,
        outcome,
        mesh: problem.mesh,
    })
}
