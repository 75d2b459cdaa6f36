//! Terms of the total objective
//!
//! ```text
//! O = Σ_j ½∫_Ω₀ |u_j − ū_j|²  +  α P_ε(ρ)  +  ν2∫ρ2 + ν3∫ρ3  +  q ∫(ρ1² + ρ2²) Σ_j s_j²
//! P_ε(ρ) = ∫ W(ρ)/ε + ε (|∇ρ1|² + |∇ρ2|² + |∇ρ3|²),   W(ρ) = Σ_i ρ_i²(1 − ρ_i)²
//! ```
//!
//! with `ρ1 = 1 − ρ2 − ρ3` substituted everywhere and `q = 1` by default.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::fields::{DesignField, StimulusField, TargetDisplacement, VectorField};
use crate::mesh::Mesh;
use crate::quadrature::{interpolate, DEGREE4};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularizationParams {
    pub epsilon: f64,
    pub alpha: f64,
    pub nu2: f64,
    pub nu3: f64,
    /// Weight of the stimulus penalty.
    #[serde(default = "unit_weight")]
    pub stimulus_weight: f64,
}

fn unit_weight() -> f64 {
    1.0
}

impl RegularizationParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidParameter(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        for (name, v) in [
            ("alpha", self.alpha),
            ("nu2", self.nu2),
            ("nu3", self.nu3),
            ("stimulus_weight", self.stimulus_weight),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ObjectiveBreakdown {
    pub tracking: f64,
    /// Unweighted `P_ε`.
    pub perimeter: f64,
    pub volume_penalty: f64,
    /// Weighted stimulus penalty.
    pub stimulus_penalty: f64,
    pub total: f64,
}

impl ObjectiveBreakdown {
    pub fn assemble(tracking: f64, perimeter: f64, volume_penalty: f64, stimulus_penalty: f64, alpha: f64) -> Self {
        ObjectiveBreakdown {
            tracking,
            perimeter,
            volume_penalty,
            stimulus_penalty,
            total: tracking + alpha * perimeter + volume_penalty + stimulus_penalty,
        }
    }
}

/// Single well `t²(1 − t)²`.
#[inline]
pub fn well(t: f64) -> f64 {
    let v = t * (1.0 - t);
    v * v
}

#[inline]
pub fn well_derivative(t: f64) -> f64 {
    2.0 * t * (1.0 - t) * (1.0 - 2.0 * t)
}

pub fn multiwell(rho1: f64, rho2: f64, rho3: f64) -> f64 {
    well(rho1) + well(rho2) + well(rho3)
}

/// `½ Σ_j ∫_Ω₀ |u_j − ū_j|²` with the consistent P1 mass matrix.
pub fn tracking(mesh: &Mesh, u: &[VectorField], targets: &[TargetDisplacement]) -> Result<f64> {
    check_len("target displacements", u.len(), targets.len())?;
    let mut total = 0.0;
    for (uj, tgt) in u.iter().zip(targets) {
        check_len("displacement dofs", 2 * mesh.num_nodes(), uj.values.len())?;
        for &t in &mesh.target_elements {
            let tri = &mesh.triangles[t];
            let area = mesh.geometry(t).area;
            let d = tri.map(|n| {
                let (a, b) = (uj.at(n), tgt.at(n));
                [a[0] - b[0], a[1] - b[1]]
            });
            let mut acc = 0.0;
            for c in 0..2 {
                let s = d[0][c] + d[1][c] + d[2][c];
                let sq = d[0][c] * d[0][c] + d[1][c] * d[1][c] + d[2][c] * d[2][c];
                // vᵀ M v with M = A/12 (1 + I)
                acc += area / 12.0 * (s * s + sq);
            }
            total += 0.5 * acc;
        }
    }
    Ok(total)
}

/// The two integrals that make up `P_ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerimeterTerms {
    /// `∫ W(ρ)`
    pub well: f64,
    /// `∫ |∇ρ1|² + |∇ρ2|² + |∇ρ3|²`
    pub gradient: f64,
}

impl PerimeterTerms {
    pub fn energy(&self, epsilon: f64) -> f64 {
        self.well / epsilon + epsilon * self.gradient
    }
}

pub fn perimeter_terms(mesh: &Mesh, design: &DesignField) -> Result<PerimeterTerms> {
    design.check(mesh.num_nodes())?;
    let mut w = 0.0;
    let mut g = 0.0;
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let geo = mesh.geometry(t);
        let r2 = tri.map(|n| design.rho2[n]);
        let r3 = tri.map(|n| design.rho3[n]);
        let mut we = 0.0;
        for (l, q) in DEGREE4.iter() {
            let a2 = interpolate(l, r2);
            let a3 = interpolate(l, r3);
            we += q * multiwell(1.0 - a2 - a3, a2, a3);
        }
        w += geo.area * we;
        let mut g2 = [0.0; 2];
        let mut g3 = [0.0; 2];
        for k in 0..3 {
            for c in 0..2 {
                g2[c] += r2[k] * geo.grads[k][c];
                g3[c] += r3[k] * geo.grads[k][c];
            }
        }
        let sq = |v: [f64; 2]| v[0] * v[0] + v[1] * v[1];
        g += geo.area * (sq(g2) + sq(g3) + sq([g2[0] + g3[0], g2[1] + g3[1]]));
    }
    Ok(PerimeterTerms { well: w, gradient: g })
}

pub fn perimeter_energy(mesh: &Mesh, design: &DesignField, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
    }
    Ok(perimeter_terms(mesh, design)?.energy(epsilon))
}

/// `∫ f` for a nodal P1 field.
pub fn integrate_nodal(mesh: &Mesh, f: &[f64]) -> f64 {
    mesh.triangles
        .iter()
        .enumerate()
        .map(|(t, tri)| mesh.geometry(t).area * (f[tri[0]] + f[tri[1]] + f[tri[2]]) / 3.0)
        .sum()
}

pub fn volume_penalty(mesh: &Mesh, design: &DesignField, nu2: f64, nu3: f64) -> Result<f64> {
    design.check(mesh.num_nodes())?;
    Ok(nu2 * integrate_nodal(mesh, &design.rho2) + nu3 * integrate_nodal(mesh, &design.rho3))
}

/// `∫ρ2/|Ω|` and `∫ρ3/|Ω|`.
pub fn volume_fractions(mesh: &Mesh, design: &DesignField) -> [f64; 2] {
    let area = mesh.total_area();
    [
        integrate_nodal(mesh, &design.rho2) / area,
        integrate_nodal(mesh, &design.rho3) / area,
    ]
}

/// Unweighted `∫ ((1 − ρ2 − ρ3)² + ρ2²) Σ_j s_j²`.
pub fn stimulus_penalty(mesh: &Mesh, design: &DesignField, stimulus: &StimulusField) -> Result<f64> {
    design.check(mesh.num_nodes())?;
    stimulus.check(stimulus.num_cases(), mesh.num_nodes())?;
    let mut total = 0.0;
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let r2 = tri.map(|n| design.rho2[n]);
        let r3 = tri.map(|n| design.rho3[n]);
        let mut acc = 0.0;
        for (l, q) in DEGREE4.iter() {
            let a2 = interpolate(l, r2);
            let a3 = interpolate(l, r3);
            let a1 = 1.0 - a2 - a3;
            let weight = a1 * a1 + a2 * a2;
            if weight == 0.0 {
                continue;
            }
            let s2: f64 = stimulus
                .cases
                .iter()
                .map(|s| {
                    let v = interpolate(l, tri.map(|n| s[n]));
                    v * v
                })
                .sum();
            acc += q * weight * s2;
        }
        total += mesh.geometry(t).area * acc;
    }
    Ok(total)
}

/// Full breakdown for a solved state.
pub fn total(
    mesh: &Mesh,
    design: &DesignField,
    stimulus: &StimulusField,
    u: &[VectorField],
    targets: &[TargetDisplacement],
    params: &RegularizationParams,
) -> Result<ObjectiveBreakdown> {
    params.validate()?;
    let tr = tracking(mesh, u, targets)?;
    let per = perimeter_energy(mesh, design, params.epsilon)?;
    let vol = volume_penalty(mesh, design, params.nu2, params.nu3)?;
    let q = params.stimulus_weight * stimulus_penalty(mesh, design, stimulus)?;
    Ok(ObjectiveBreakdown::assemble(tr, per, vol, q, params.alpha))
}
