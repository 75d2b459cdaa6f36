//! Adjoint gradients of the reduced objective `J(ρ2, ρ3, s)`.
//!
//! Derivatives are taken with respect to the nodal coefficients of the
//! discrete fields, so they are exact derivatives of the discrete `J` and
//! agree with central differences up to truncation and solver error.
//!
//! With `λ_j` from `K λ_j = −M_Ω₀(u_j − ū_j)` and
//! `G_ij = ℂ_i(e(u_j) − β_i s_j I) : e(λ_j)`, the design derivative in the
//! direction `N_k` of node `k` is
//!
//! ```text
//! ∂J/∂ρ2_k = Σ_j ∫ (a'(ρ2) G_2j − a'(ρ1) G_1j) N_k
//!          + α/ε ∫ (w'(ρ2) − w'(ρ1)) N_k + 2αε ∫ (∇ρ2 + ∇(ρ2 + ρ3))·∇N_k
//!          + ν2 ∫ N_k + q ∫ 2(ρ2 − ρ1) Σ_j s_j² N_k
//! ```
//!
//! and symmetrically for `ρ3` (whose penalty weight has no `ρ3²` term). The
//! stimulus derivative is `∫ (−Σ_i a(ρ_i) β_i d κ_i tr e(λ_j) + 2qB s_j) N_k`.

use crate::elasticity::{element_strain, StateSolution};
use crate::error::{check_len, Result};
use crate::fields::{DesignField, StimulusField, VectorField};
use crate::functional::{self, well_derivative, ObjectiveBreakdown};
use crate::materials::{interp, interp_derivative, Sym2};
use crate::problem::DesignProblem;
use crate::quadrature::{interpolate, DEGREE4};
use crate::DIM;

#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub g_rho2: Vec<f64>,
    pub g_rho3: Vec<f64>,
    pub g_s: Vec<Vec<f64>>,
}

impl Gradient {
    pub fn design_norm(&self) -> f64 {
        norm(self.g_rho2.iter().chain(&self.g_rho3))
    }

    pub fn stimulus_norm(&self) -> f64 {
        norm(self.g_s.iter().flatten())
    }
}

fn norm<'a>(v: impl Iterator<Item = &'a f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}

/// Per-phase constants `(2μ_i, λ_i, β_i d κ_i)`.
fn phase_constants(problem: &DesignProblem) -> [[f64; 3]; 3] {
    problem
        .phases()
        .phases()
        .map(|m| [2.0 * m.lame_mu(), m.lame_lambda(), m.beta * DIM as f64 * m.bulk()])
}

pub fn grad_design(
    problem: &DesignProblem,
    design: &DesignField,
    stimulus: &StimulusField,
    u: &[VectorField],
    lambda: &[VectorField],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mesh = &problem.mesh;
    let n = mesh.num_nodes();
    design.check(n)?;
    stimulus.check(problem.num_cases(), n)?;
    check_len("displacements", problem.num_cases(), u.len())?;
    check_len("adjoints", problem.num_cases(), lambda.len())?;
    let p = &problem.params;
    let consts = phase_constants(problem);
    let mut g2 = vec![0.0; n];
    let mut g3 = vec![0.0; n];

    for (t, tri) in mesh.triangles.iter().enumerate() {
        let geo = mesh.geometry(t);
        let area = geo.area;
        let r2 = tri.map(|k| design.rho2[k]);
        let r3 = tri.map(|k| design.rho3[k]);
        let s_nodal: Vec<[f64; 3]> = stimulus.cases.iter().map(|s| tri.map(|k| s[k])).collect();

        // per case: G_ij = A_ij − B_ij s with A, B constant on the element
        let strains: Vec<(Sym2, Sym2)> = u
            .iter()
            .zip(lambda)
            .map(|(uj, lj)| (element_strain(mesh, uj, t), element_strain(mesh, lj, t)))
            .collect();
        let mut ga: Vec<[f64; 3]> = Vec::with_capacity(2 * strains.len());
        for (eu, el) in &strains {
            let mut a = [0.0; 3];
            let mut b = [0.0; 3];
            for i in 0..3 {
                a[i] = consts[i][0] * eu.dot(el) + consts[i][1] * eu.trace() * el.trace();
                b[i] = consts[i][2] * el.trace();
            }
            ga.push(a);
            ga.push(b);
        }

        let mut e2 = [0.0; 3];
        let mut e3 = [0.0; 3];
        for (l, w) in DEGREE4.iter() {
            let a2 = interpolate(l, r2);
            let a3 = interpolate(l, r3);
            let a1 = 1.0 - a2 - a3;
            let mut elastic = [0.0; 3];
            let mut s_sq = 0.0;
            for (j, sn) in s_nodal.iter().enumerate() {
                let s = interpolate(l, *sn);
                s_sq += s * s;
                for i in 0..3 {
                    elastic[i] += ga[2 * j][i] - ga[2 * j + 1][i] * s;
                }
            }
            let d1 = interp_derivative(a1);
            let wd1 = well_derivative(a1);
            let base2 = interp_derivative(a2) * elastic[1] - d1 * elastic[0]
                + p.alpha / p.epsilon * (well_derivative(a2) - wd1)
                + p.stimulus_weight * 2.0 * (a2 - a1) * s_sq;
            let base3 = interp_derivative(a3) * elastic[2] - d1 * elastic[0]
                + p.alpha / p.epsilon * (well_derivative(a3) - wd1)
                - p.stimulus_weight * 2.0 * a1 * s_sq;
            for k in 0..3 {
                e2[k] += w * base2 * l[k];
                e3[k] += w * base3 * l[k];
            }
        }

        let mut grad2 = [0.0; 2];
        let mut grad3 = [0.0; 2];
        for k in 0..3 {
            for c in 0..2 {
                grad2[c] += r2[k] * geo.grads[k][c];
                grad3[c] += r3[k] * geo.grads[k][c];
            }
        }
        let gsum = [grad2[0] + grad3[0], grad2[1] + grad3[1]];
        for (k, &node) in tri.iter().enumerate() {
            let gk = geo.grads[k];
            let dot = |v: [f64; 2]| v[0] * gk[0] + v[1] * gk[1];
            let grad_term2 = 2.0 * p.alpha * p.epsilon * (dot(grad2) + dot(gsum));
            let grad_term3 = 2.0 * p.alpha * p.epsilon * (dot(grad3) + dot(gsum));
            g2[node] += area * (e2[k] + grad_term2 + p.nu2 / 3.0);
            g3[node] += area * (e3[k] + grad_term3 + p.nu3 / 3.0);
        }
    }
    Ok((g2, g3))
}

pub fn grad_stimulus(
    problem: &DesignProblem,
    design: &DesignField,
    stimulus: &StimulusField,
    lambda: &[VectorField],
) -> Result<Vec<Vec<f64>>> {
    let mesh = &problem.mesh;
    let n = mesh.num_nodes();
    design.check(n)?;
    stimulus.check(problem.num_cases(), n)?;
    check_len("adjoints", problem.num_cases(), lambda.len())?;
    let consts = phase_constants(problem);
    let q = problem.params.stimulus_weight;
    let mut out = vec![vec![0.0; n]; problem.num_cases()];
    for (j, (s, lj)) in stimulus.cases.iter().zip(lambda).enumerate() {
        let g = &mut out[j];
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let area = mesh.geometry(t).area;
            let tr = element_strain(mesh, lj, t).trace();
            let r2 = tri.map(|k| design.rho2[k]);
            let r3 = tri.map(|k| design.rho3[k]);
            let sv = tri.map(|k| s[k]);
            let mut e = [0.0; 3];
            for (l, w) in DEGREE4.iter() {
                let a2 = interpolate(l, r2);
                let a3 = interpolate(l, r3);
                let a1 = 1.0 - a2 - a3;
                let rho = [a1, a2, a3];
                let mut coupling = 0.0;
                for i in 0..3 {
                    if consts[i][2] != 0.0 {
                        coupling += interp(rho[i]) * consts[i][2];
                    }
                }
                let val = -coupling * tr + 2.0 * q * (a1 * a1 + a2 * a2) * interpolate(l, sv);
                for k in 0..3 {
                    e[k] += w * val * l[k];
                }
            }
            for (k, &node) in tri.iter().enumerate() {
                g[node] += area * e[k];
            }
        }
    }
    Ok(out)
}

/// Solves the state and evaluates the objective; the function the finite
/// difference oracles differentiate.
pub fn reduced_objective(
    problem: &DesignProblem,
    design: &DesignField,
    stimulus: &StimulusField,
) -> Result<ObjectiveBreakdown> {
    let state = problem.solve_state(design, stimulus)?;
    breakdown(problem, design, stimulus, &state)
}

pub fn breakdown(
    problem: &DesignProblem,
    design: &DesignField,
    stimulus: &StimulusField,
    state: &StateSolution,
) -> Result<ObjectiveBreakdown> {
    functional::total(&problem.mesh, design, stimulus, &state.u, &problem.targets, &problem.params)
}

/// `O(ρ, s, u) + Σ_j ⟨K u_j − f_j, λ_j⟩` with the unconstrained operator.
pub fn lagrangian(
    problem: &DesignProblem,
    design: &DesignField,
    stimulus: &StimulusField,
    u: &[VectorField],
    lambda: &[VectorField],
) -> Result<f64> {
    let mesh = &problem.mesh;
    let obj = functional::total(mesh, design, stimulus, u, &problem.targets, &problem.params)?.total;
    let k = problem.elasticity.assemble_stiffness(mesh, design)?;
    let mut coupling = 0.0;
    for ((uj, lj), s) in u.iter().zip(lambda).zip(&stimulus.cases) {
        let f = problem.elasticity.assemble_stimulus_load(mesh, design, s)?;
        let ku = k.mul(&uj.values);
        coupling += ku
            .iter()
            .zip(&f)
            .zip(&lj.values)
            .map(|((a, b), l)| (a - b) * l)
            .sum::<f64>();
    }
    Ok(obj + coupling)
}

/// Objective, state, adjoint and both gradients at one point.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub breakdown: ObjectiveBreakdown,
    pub state: StateSolution,
    pub adjoint: Vec<VectorField>,
    pub gradient: Gradient,
}

pub fn evaluate(problem: &DesignProblem, design: &DesignField, stimulus: &StimulusField) -> Result<Evaluation> {
    let state = problem.solve_state(design, stimulus)?;
    let adjoint = problem.solve_adjoint(&state)?;
    let breakdown = breakdown(problem, design, stimulus, &state)?;
    let (g_rho2, g_rho3) = grad_design(problem, design, stimulus, &state.u, &adjoint)?;
    let g_s = grad_stimulus(problem, design, stimulus, &adjoint)?;
    Ok(Evaluation {
        breakdown,
        state,
        adjoint,
        gradient: Gradient { g_rho2, g_rho3, g_s },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elasticity::SolverSettings;
    use crate::fields::TargetDisplacement;
    use crate::functional::RegularizationParams;
    use crate::materials::{Material, PhaseSet};
    use crate::mesh::{build_rect_mesh, BoxRegion, Side};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn problem(h: f64, params: RegularizationParams) -> DesignProblem {
        let a = 1.0 / 15.0;
        let bx = BoxRegion {
            x_min: 1.0 - 2.0 * a,
            x_max: 1.0,
            y_min: 1.0 / 6.0 - a,
            y_max: 1.0 / 6.0 + a,
        };
        let mesh = build_rect_mesh(1.0, 1.0 / 3.0, h, Side::Left, bx).unwrap();
        let phases = PhaseSet::new(
            Material::new(5.0, 0.3, 0.0).unwrap(),
            Material::new(5.0, 0.3, 1.0).unwrap(),
            1e-4,
        )
        .unwrap();
        DesignProblem::new(
            mesh,
            phases,
            vec![TargetDisplacement::Constant([0.0, 1.0])],
            params,
            SolverSettings {
                rtol: 1e-12,
                max_iter_factor: 10,
            },
        )
        .unwrap()
    }

    fn params() -> RegularizationParams {
        RegularizationParams {
            epsilon: 0.1,
            alpha: 6e-3,
            nu2: 0.1,
            nu3: 0.3,
            stimulus_weight: 1.0,
        }
    }

    fn random_point(n: usize, rng: &mut ChaCha8Rng) -> (DesignField, StimulusField) {
        let d = DesignField {
            rho2: (0..n).map(|_| rng.gen_range(0.1..0.5)).collect(),
            rho3: (0..n).map(|_| rng.gen_range(0.1..0.5)).collect(),
        };
        let s = StimulusField {
            cases: vec![(0..n).map(|_| rng.gen_range(-0.8..0.8)).collect()],
        };
        (d, s)
    }

    #[test]
    fn design_gradient_matches_central_differences() {
        let pb = problem(0.1, params());
        let n = pb.num_nodes();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (d, s) = random_point(n, &mut rng);
        let ev = evaluate(&pb, &d, &s).unwrap();
        let delta = 1e-6;
        for _ in 0..5 {
            let dir: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let shift = |sign: f64| {
                let x: Vec<f64> = d.to_flat().iter().zip(&dir).map(|(a, b)| a + sign * delta * b).collect();
                reduced_objective(&pb, &DesignField::from_flat(&x), &s).unwrap().total
            };
            let fd = (shift(1.0) - shift(-1.0)) / (2.0 * delta);
            let g = ev.gradient.g_rho2.iter().chain(&ev.gradient.g_rho3);
            let an: f64 = g.zip(&dir).map(|(a, b)| a * b).sum();
            assert!((an - fd).abs() <= 1e-5 * fd.abs().max(1e-12), "{an} vs {fd}");
        }
    }

    #[test]
    fn stimulus_gradient_matches_central_differences() {
        let pb = problem(0.1, params());
        let n = pb.num_nodes();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (d, s) = random_point(n, &mut rng);
        let ev = evaluate(&pb, &d, &s).unwrap();
        let delta = 1e-6;
        for _ in 0..5 {
            let dir: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let shift = |sign: f64| {
                let x: Vec<f64> = s.cases[0].iter().zip(&dir).map(|(a, b)| a + sign * delta * b).collect();
                reduced_objective(&pb, &d, &StimulusField { cases: vec![x] }).unwrap().total
            };
            let fd = (shift(1.0) - shift(-1.0)) / (2.0 * delta);
            let an: f64 = ev.gradient.g_s[0].iter().zip(&dir).map(|(a, b)| a * b).sum();
            assert!((an - fd).abs() <= 1e-5 * fd.abs().max(1e-12), "{an} vs {fd}");
        }
    }

    #[test]
    fn vanishing_state_leaves_perimeter_and_volume() {
        let pb = problem(0.1, params());
        let n = pb.num_nodes();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (d, _) = random_point(n, &mut rng);
        let zero_s = StimulusField::constant(1, n, 0.0);
        let zeros = [VectorField::zeros(n)];
        let (g2, g3) = grad_design(&pb, &d, &zero_s, &zeros, &zeros).unwrap();
        // direct perimeter + volume derivative by differences of the functional
        let p = params();
        let f = |x: &DesignField| {
            p.alpha * functional::perimeter_energy(&pb.mesh, x, p.epsilon).unwrap()
                + functional::volume_penalty(&pb.mesh, x, p.nu2, p.nu3).unwrap()
        };
        for node in [0, n / 3, n - 1] {
            for which in 0..2 {
                let mut plus = d.clone();
                let mut minus = d.clone();
                let (vp, vm) = if which == 0 {
                    (&mut plus.rho2, &mut minus.rho2)
                } else {
                    (&mut plus.rho3, &mut minus.rho3)
                };
                vp[node] += 1e-6;
                vm[node] -= 1e-6;
                let fd = (f(&plus) - f(&minus)) / 2e-6;
                let an = if which == 0 { g2[node] } else { g3[node] };
                assert!((an - fd).abs() <= 1e-6 * fd.abs().max(1e-9), "{an} vs {fd}");
            }
        }
        let g_s = grad_stimulus(&pb, &d, &zero_s, &zeros).unwrap();
        assert!(g_s[0].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn perimeter_gradient_vanishes_at_pure_phase() {
        let mut p = params();
        p.nu2 = 0.0;
        p.nu3 = 0.0;
        let pb = problem(0.1, p);
        let n = pb.num_nodes();
        let zeros = [VectorField::zeros(n)];
        let s = StimulusField::constant(1, n, 0.0);
        for (a, b) in [(1.0, 0.0), (0.0, 1.0), (0.0, 0.0)] {
            let (g2, g3) = grad_design(&pb, &DesignField::constant(n, a, b), &s, &zeros, &zeros).unwrap();
            assert!(g2.iter().chain(&g3).all(|v| v.abs() < 1e-15));
        }
    }

    #[test]
    fn no_responsive_material_leaves_penalty_gradient() {
        let pb = problem(0.1, params());
        let n = pb.num_nodes();
        let d = DesignField::constant(n, 0.4, 0.0);
        let s = StimulusField::constant(1, n, 0.5);
        let ev = evaluate(&pb, &d, &s).unwrap();
        let zero = [VectorField::zeros(n)];
        assert_eq!(ev.gradient.g_s, grad_stimulus(&pb, &d, &s, &zero).unwrap());
    }

    #[test]
    fn stimulus_gradient_sign_at_pure_responsive_node() {
        let pb = problem(0.1, params());
        let n = pb.num_nodes();
        let d = DesignField::constant(n, 0.0, 1.0);
        let s = StimulusField::constant(1, n, 0.0);
        let lam = VectorField::from_dofs(pb.mesh.nodes.iter().flat_map(|p| [p[0], p[1]]).collect());
        let g = grad_stimulus(&pb, &d, &s, &[lam]).unwrap();
        assert!(g[0].iter().all(|v| *v < 0.0));
    }

    #[test]
    fn reduced_objective_is_deterministic_and_consistent() {
        let pb = problem(0.1, params());
        let n = pb.num_nodes();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (d, s) = random_point(n, &mut rng);
        let a = reduced_objective(&pb, &d, &s).unwrap();
        let b = reduced_objective(&pb, &d, &s).unwrap();
        assert_eq!(a.total.to_bits(), b.total.to_bits());
        let state = pb.solve_state(&d, &s).unwrap();
        let direct = functional::total(&pb.mesh, &d, &s, &state.u, &pb.targets, &pb.params).unwrap();
        assert_eq!(direct, a);
        let mask = pb.elasticity.constraints.mask().to_vec();
        for _ in 0..3 {
            let lam: Vec<f64> = (0..2 * n)
                .map(|i| if mask[i] { 0.0 } else { rng.gen_range(-1.0..1.0) })
                .collect();
            let l = lagrangian(&pb, &d, &s, &state.u, &[VectorField::from_dofs(lam)]).unwrap();
            assert!((l - a.total).abs() <= 1e-9 * a.total, "{l} vs {}", a.total);
        }
    }
}
