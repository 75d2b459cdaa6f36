//! State and adjoint problems of the phase-field elasticity system.
//!
//! For every load case `j` the displacement `u_j ∈ V` solves
//!
//! ```text
//! Σ_i ∫ a(ρ_i) ℂ_i (e(u_j) − β_i s_j I) : e(φ) dx = 0    ∀ φ ∈ V,
//! ```
//!
//! i.e. `K(ρ) u_j = f_j(ρ, s_j)`. The adjoint `λ_j` solves
//! `K(ρ) λ_j = −M_Ω₀ (u_j − ū_j)` with the same operator. This sign makes
//! `λ_j` the multiplier of the Lagrangian `O + Σ_j ⟨K u_j − f_j, λ_j⟩`, so
//! the sensitivities and the closed-form stimulus take their natural signs.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::{DesignField, StimulusField, TargetDisplacement, VectorField};
use crate::linsolve::{solve_spd_from, CsrMatrix, SolveStats};
use crate::materials::{interp, PhaseSet, Sym2};
use crate::mesh::{ElementGeometry, Mesh};
use crate::quadrature::{interpolate, DEGREE2, DEGREE4};
use crate::DIM;

/// Fixed degrees of freedom (`2·node + component`).
#[derive(Debug, Clone, PartialEq)]
pub struct Constraints {
    fixed: Vec<bool>,
}

impl Constraints {
    /// Both components of every clamped node.
    pub fn from_mesh(mesh: &Mesh) -> Self {
        let mut fixed = vec![false; 2 * mesh.num_nodes()];
        for &n in &mesh.dirichlet_nodes {
            fixed[2 * n] = true;
            fixed[2 * n + 1] = true;
        }
        Constraints { fixed }
    }

    /// Verification-only point constraints: node `full` pinned in both
    /// directions and node `partial.0` pinned in component `partial.1`.
    pub fn point_pins(mesh: &Mesh, full: usize, partial: (usize, usize)) -> Self {
        let mut fixed = vec![false; 2 * mesh.num_nodes()];
        fixed[2 * full] = true;
        fixed[2 * full + 1] = true;
        fixed[2 * partial.0 + partial.1] = true;
        Constraints { fixed }
    }

    pub fn mask(&self) -> &[bool] {
        &self.fixed
    }

    pub fn num_fixed(&self) -> usize {
        self.fixed.iter().filter(|&&f| f).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub rtol: f64,
    /// Iteration cap as a multiple of the system size.
    pub max_iter_factor: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            rtol: 1e-10,
            max_iter_factor: 10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StateSolution {
    pub u: Vec<VectorField>,
    /// Condensed stiffness shared with the adjoint solves.
    pub operator: Arc<CsrMatrix>,
    pub loads: Vec<Vec<f64>>,
    pub stats: Vec<SolveStats>,
}

/// Element-averaged interpolation weights `⟨a(ρ_i)⟩_T` for the three phases,
/// exact for P1 densities.
pub fn mean_phase_weights(nodal: [[f64; 3]; 3]) -> [f64; 3] {
    let mut w = [0.0; 3];
    for (l, q) in DEGREE2.iter() {
        for (i, wi) in w.iter_mut().enumerate() {
            let rho = interpolate(l, [nodal[0][i], nodal[1][i], nodal[2][i]]);
            *wi += q * interp(rho);
        }
    }
    w
}

/// 6×6 isotropic P1 element matrix for Lamé parameters `(mu, lambda)`,
/// degrees of freedom ordered `(x0, y0, x1, y1, x2, y2)`.
pub fn element_stiffness(g: &ElementGeometry, mu: f64, lambda: f64) -> [[f64; 6]; 6] {
    let mut k = [[0.0; 6]; 6];
    for a in 0..3 {
        for b in 0..3 {
            let ga = g.grads[a];
            let gb = g.grads[b];
            let dot = ga[0] * gb[0] + ga[1] * gb[1];
            for c in 0..2 {
                for d in 0..2 {
                    let delta = if c == d { dot } else { 0.0 };
                    k[2 * a + c][2 * b + d] =
                        g.area * (mu * (delta + ga[d] * gb[c]) + lambda * (ga[c] * gb[d]));
                }
            }
        }
    }
    k
}

fn element_dofs(tri: &[usize; 3]) -> [usize; 6] {
    [
        2 * tri[0],
        2 * tri[0] + 1,
        2 * tri[1],
        2 * tri[1] + 1,
        2 * tri[2],
        2 * tri[2] + 1,
    ]
}

/// Nodal `(ρ1, ρ2, ρ3)` on the three vertices of a triangle.
pub fn element_densities(design: &DesignField, tri: &[usize; 3]) -> [[f64; 3]; 3] {
    tri.map(|n| design.densities(n))
}

/// Assembly and solves for a fixed mesh, phase set and set of constraints.
#[derive(Debug, Clone)]
pub struct Elasticity {
    pub phases: PhaseSet,
    pub constraints: Constraints,
    pub solver: SolverSettings,
    template: CsrMatrix,
    slots: Vec<[usize; 36]>,
}

impl Elasticity {
    pub fn new(mesh: &Mesh, phases: PhaseSet, constraints: Constraints, solver: SolverSettings) -> Self {
        let adjacency = mesh.node_adjacency();
        let mut rows = Vec::with_capacity(2 * mesh.num_nodes());
        for nbrs in &adjacency {
            let cols: Vec<usize> = nbrs.iter().flat_map(|&b| [2 * b, 2 * b + 1]).collect();
            rows.push(cols.clone());
            rows.push(cols);
        }
        let template = CsrMatrix::from_pattern(rows);
        let slots = mesh
            .triangles
            .iter()
            .map(|tri| {
                let dofs = element_dofs(tri);
                let mut s = [0usize; 36];
                for r in 0..6 {
                    for c in 0..6 {
                        s[6 * r + c] = template.slot(dofs[r], dofs[c]).expect("pattern covers element");
                    }
                }
                s
            })
            .collect();
        Elasticity {
            phases,
            constraints,
            solver,
            template,
            slots,
        }
    }

    /// Effective Lamé pair of an element: `Σ_i ⟨a(ρ_i)⟩ (μ_i, λ_i)`.
    fn effective_lame(&self, weights: [f64; 3]) -> (f64, f64) {
        let mut mu = 0.0;
        let mut lambda = 0.0;
        for (w, m) in weights.iter().zip(self.phases.phases()) {
            mu += w * m.lame_mu();
            lambda += w * m.lame_lambda();
        }
        (mu, lambda)
    }

    /// Unconstrained stiffness `K(ρ)`.
    pub fn assemble_stiffness(&self, mesh: &Mesh, design: &DesignField) -> Result<CsrMatrix> {
        design.check(mesh.num_nodes())?;
        let mut k = self.template.clone();
        let mut weak = 0usize;
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let w = mean_phase_weights(element_densities(design, tri));
            if w.iter().sum::<f64>() < 1e-14 {
                weak += 1;
            }
            let (mu, lambda) = self.effective_lame(w);
            let ke = element_stiffness(mesh.geometry(t), mu, lambda);
            let slots = &self.slots[t];
            for r in 0..6 {
                for c in 0..6 {
                    k.add_at_slot(slots[6 * r + c], ke[r][c]);
                }
            }
        }
        if weak > 0 {
            log::warn!("{weak} elements have vanishing phase weights; stiffness is near singular");
        }
        Ok(k)
    }

    /// `K(ρ)` with the constrained rows and columns eliminated.
    pub fn condensed_stiffness(&self, mesh: &Mesh, design: &DesignField) -> Result<CsrMatrix> {
        let k = self.assemble_stiffness(mesh, design)?;
        let zeros = vec![0.0; k.dim()];
        Ok(k.eliminate(self.constraints.mask(), &zeros).0)
    }

    /// Load `f(φ) = Σ_i ∫ a(ρ_i) β_i s ℂ_i I : e(φ) dx`, unconstrained.
    pub fn assemble_stimulus_load(&self, mesh: &Mesh, design: &DesignField, s: &[f64]) -> Result<Vec<f64>> {
        design.check(mesh.num_nodes())?;
        crate::error::check_len("stimulus values", mesh.num_nodes(), s.len())?;
        // ℂ_i I = d κ_i I
        let coef: Vec<f64> = self
            .phases
            .phases()
            .iter()
            .map(|m| m.beta * DIM as f64 * m.bulk())
            .collect();
        let mut f = vec![0.0; 2 * mesh.num_nodes()];
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let g = mesh.geometry(t);
            let rho = element_densities(design, tri);
            let sv = tri.map(|n| s[n]);
            let mut integral = 0.0;
            for (l, w) in DEGREE4.iter() {
                let sq = interpolate(l, sv);
                let mut acc = 0.0;
                for i in 0..3 {
                    if coef[i] != 0.0 {
                        acc += interp(interpolate(l, [rho[0][i], rho[1][i], rho[2][i]])) * coef[i];
                    }
                }
                integral += w * acc * sq;
            }
            integral *= g.area;
            for (a, &n) in tri.iter().enumerate() {
                f[2 * n] += integral * g.grads[a][0];
                f[2 * n + 1] += integral * g.grads[a][1];
            }
        }
        Ok(f)
    }

    fn max_iter(&self, n: usize) -> usize {
        self.solver.max_iter_factor.max(1) * n
    }

    fn constrain_rhs(&self, b: &mut [f64]) {
        for (v, &fixed) in b.iter_mut().zip(self.constraints.mask()) {
            if fixed {
                *v = 0.0;
            }
        }
    }

    /// Solves the state system for every load case, optionally warm-started.
    pub fn solve_state(
        &self,
        mesh: &Mesh,
        design: &DesignField,
        stimulus: &StimulusField,
        guess: Option<&[VectorField]>,
    ) -> Result<StateSolution> {
        if self.constraints.num_fixed() == 0 {
            return Err(Error::InvalidParameter("no Dirichlet constraints".into()));
        }
        stimulus.check(stimulus.num_cases(), mesh.num_nodes())?;
        let operator = Arc::new(self.condensed_stiffness(mesh, design)?);
        let loads = stimulus
            .cases
            .iter()
            .map(|s| {
                let mut f = self.assemble_stimulus_load(mesh, design, s)?;
                self.constrain_rhs(&mut f);
                Ok(f)
            })
            .collect::<Result<Vec<_>>>()?;
        let solved = self.solve_many(&operator, &loads, guess)?;
        let (u, stats) = solved.into_iter().unzip();
        Ok(StateSolution {
            u,
            operator,
            loads,
            stats,
        })
    }

    fn solve_many(
        &self,
        operator: &CsrMatrix,
        rhs: &[Vec<f64>],
        guess: Option<&[VectorField]>,
    ) -> Result<Vec<(VectorField, SolveStats)>> {
        let maxit = self.max_iter(operator.dim());
        rhs.par_iter()
            .enumerate()
            .map(|(j, b)| {
                let mut x = match guess.and_then(|g| g.get(j)) {
                    Some(g) if g.values.len() == b.len() => g.values.clone(),
                    _ => vec![0.0; b.len()],
                };
                // warm starts must respect the constraints
                self.constrain_rhs(&mut x);
                let stats = solve_spd_from(operator, b, &mut x, self.solver.rtol, maxit)?;
                Ok((VectorField::from_dofs(x), stats))
            })
            .collect()
    }

    /// Right-hand side `−M_Ω₀ (u − ū)` of the adjoint system, unconstrained.
    pub fn adjoint_load(&self, mesh: &Mesh, u: &VectorField, target: &TargetDisplacement) -> Vec<f64> {
        let mut b = vec![0.0; 2 * mesh.num_nodes()];
        for &t in &mesh.target_elements {
            let tri = &mesh.triangles[t];
            let area = mesh.geometry(t).area;
            let diff: [[f64; 2]; 3] = tri.map(|n| {
                let (un, ub) = (u.at(n), target.at(n));
                [un[0] - ub[0], un[1] - ub[1]]
            });
            for a in 0..3 {
                for c in 0..2 {
                    let mut acc = 0.0;
                    for bb in 0..3 {
                        let m = if a == bb { 2.0 } else { 1.0 } * area / 12.0;
                        acc += m * diff[bb][c];
                    }
                    b[2 * tri[a] + c] -= acc;
                }
            }
        }
        b
    }

    pub fn solve_adjoint(
        &self,
        mesh: &Mesh,
        state: &StateSolution,
        targets: &[TargetDisplacement],
        guess: Option<&[VectorField]>,
    ) -> Result<Vec<VectorField>> {
        crate::error::check_len("target displacements", state.u.len(), targets.len())?;
        let rhs: Vec<Vec<f64>> = state
            .u
            .iter()
            .zip(targets)
            .map(|(u, tgt)| {
                let mut b = self.adjoint_load(mesh, u, tgt);
                self.constrain_rhs(&mut b);
                b
            })
            .collect();
        Ok(self
            .solve_many(&state.operator, &rhs, guess)?
            .into_iter()
            .map(|(l, _)| l)
            .collect())
    }
}

/// Constant strain of a nodal vector field on triangle `t`.
pub fn element_strain(mesh: &Mesh, field: &VectorField, t: usize) -> Sym2 {
    let tri = &mesh.triangles[t];
    Sym2::strain(&mesh.geometry(t).grads, field.element_values(tri))
}
