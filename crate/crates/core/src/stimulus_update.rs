//! Pointwise minimization of the stimulus for a frozen design and adjoint.
//!
//! With `u_j` and `λ_j` frozen, the Lagrangian depends on `s_j` through
//! `∫ −c s_j + B s_j²`, where `c = Σ_i a(ρ_i) β_i d κ_i tr e(λ_j)` and
//! `B = q((1 − ρ2 − ρ3)² + ρ2²)`. Each case is minimized independently.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Result};
use crate::fields::{nodal_average_from_elements, DesignField, StimulusField, VectorField};
use crate::materials::{interp, PhaseSet};
use crate::mesh::Mesh;
use crate::elasticity::element_strain;
use crate::DIM;

/// Where the pointwise rule is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StimulusCarrier {
    /// Nodal densities with the area-averaged nodal trace.
    #[default]
    Nodal,
    /// Element centroids, then averaged to the nodes.
    Element,
}

/// Pointwise objective `−c s + b s²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StimulusQuadratic {
    pub c: f64,
    pub b: f64,
}

impl StimulusQuadratic {
    /// Coefficients from the densities `(ρ1, ρ2, ρ3)` and `tr e(λ)`.
    pub fn from_state(phases: &PhaseSet, rho: [f64; 3], trace: f64, weight: f64) -> Self {
        let c = phases
            .phases()
            .iter()
            .zip(rho)
            .map(|(m, r)| interp(r) * m.beta * DIM as f64 * m.bulk())
            .sum::<f64>()
            * trace;
        let b = weight * (rho[0] * rho[0] + rho[1] * rho[1]);
        StimulusQuadratic { c, b }
    }

    pub fn value(&self, s: f64) -> f64 {
        -self.c * s + self.b * s * s
    }
}

/// Minimizer of `−c s + b s²` over `[-1, 1]`.
pub fn optimal_stimulus_pointwise(q: StimulusQuadratic) -> f64 {
    if q.b > 0.0 {
        (q.c / (2.0 * q.b)).clamp(-1.0, 1.0)
    } else if q.c > 0.0 {
        1.0
    } else if q.c < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Per-node quadratics for one load case.
pub fn nodal_quadratics(
    mesh: &Mesh,
    design: &DesignField,
    lambda: &VectorField,
    phases: &PhaseSet,
    weight: f64,
) -> Result<Vec<StimulusQuadratic>> {
    design.check(mesh.num_nodes())?;
    check_len("adjoint dofs", 2 * mesh.num_nodes(), lambda.values.len())?;
    let traces: Vec<f64> = (0..mesh.num_triangles())
        .map(|t| element_strain(mesh, lambda, t).trace())
        .collect();
    let nodal = nodal_average_from_elements(mesh, &traces)?;
    Ok((0..mesh.num_nodes())
        .map(|k| StimulusQuadratic::from_state(phases, design.densities(k), nodal[k], weight))
        .collect())
}

fn element_minimizers(
    mesh: &Mesh,
    design: &DesignField,
    lambda: &VectorField,
    phases: &PhaseSet,
    weight: f64,
) -> Result<Vec<f64>> {
    let per_element: Vec<f64> = mesh
        .triangles
        .iter()
        .enumerate()
        .map(|(t, tri)| {
            let mut rho = [0.0; 3];
            for &k in tri {
                let r = design.densities(k);
                for i in 0..3 {
                    rho[i] += r[i] / 3.0;
                }
            }
            let trace = element_strain(mesh, lambda, t).trace();
            optimal_stimulus_pointwise(StimulusQuadratic::from_state(phases, rho, trace, weight))
        })
        .collect();
    nodal_average_from_elements(mesh, &per_element)
}

/// Closed-form minimizer for every case, one adjoint per case.
pub fn minimize_stimulus_field(
    mesh: &Mesh,
    design: &DesignField,
    lambda: &[VectorField],
    phases: &PhaseSet,
    weight: f64,
    carrier: StimulusCarrier,
) -> Result<StimulusField> {
    let cases = lambda
        .iter()
        .map(|l| match carrier {
            StimulusCarrier::Nodal => Ok(nodal_quadratics(mesh, design, l, phases, weight)?
                .into_iter()
                .map(optimal_stimulus_pointwise)
                .collect()),
            StimulusCarrier::Element => element_minimizers(mesh, design, l, phases, weight),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StimulusField { cases })
}
