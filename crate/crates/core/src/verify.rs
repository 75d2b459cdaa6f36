//! Independent oracles: finite-difference gradient checks, a grid-search
//! stimulus minimizer and a 1D optimal-profile study of the interface
//! energy.
//!
//! The grid search and the profile solver do not call into the modules they
//! check; they recompute geometry, traces and potentials on their own.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::elasticity::SolverSettings;
use crate::error::{check_len, Error, Result};
use crate::fields::{DesignField, StimulusField, VectorField};
use crate::mesh::Mesh;
use crate::problem::DesignProblem;
use crate::sensitivity::{evaluate, reduced_objective, Gradient};

/// Worst relative errors `|⟨g, φ⟩ − FD| / max(|FD|, 1e−12)` over all trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdReport {
    pub design: f64,
    pub stimulus: f64,
    pub trials: usize,
}

impl FdReport {
    pub fn max(&self) -> f64 {
        self.design.max(self.stimulus)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max() <= tol
    }
}

/// Computes the gradient whose consistency is checked.
pub type GradientFn<'a> = dyn Fn(&DesignProblem, &DesignField, &StimulusField) -> Result<Gradient> + 'a;

fn adjoint_gradient(pb: &DesignProblem, d: &DesignField, s: &StimulusField) -> Result<Gradient> {
    Ok(evaluate(pb, d, s)?.gradient)
}

/// Random interior point and random directions, seeded.
fn random_iterate(rng: &mut ChaCha8Rng, n: usize, cases: usize) -> (DesignField, StimulusField) {
    let d = DesignField {
        rho2: (0..n).map(|_| rng.gen_range(0.05..0.6)).collect(),
        rho3: (0..n).map(|_| rng.gen_range(0.05..0.6)).collect(),
    };
    let s = StimulusField {
        cases: (0..cases)
            .map(|_| (0..n).map(|_| rng.gen_range(-0.9..0.9)).collect())
            .collect(),
    };
    (d, s)
}

fn relative(an: f64, fd: f64) -> f64 {
    (an - fd).abs() / fd.abs().max(1e-12)
}

/// Central-difference check of the adjoint gradients at `trials` random
/// iterates, one random direction per block and iterate.
pub fn fd_gradient_check(problem: &DesignProblem, trials: usize, delta: f64, seed: u64) -> Result<FdReport> {
    fd_gradient_check_with(problem, trials, delta, seed, &adjoint_gradient)
}

pub fn fd_gradient_check_with(
    problem: &DesignProblem,
    trials: usize,
    delta: f64,
    seed: u64,
    gradient: &GradientFn,
) -> Result<FdReport> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("delta must be positive, got {delta}")));
    }
    let n = problem.num_nodes();
    let cases = problem.num_cases();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = FdReport {
        design: 0.0,
        stimulus: 0.0,
        trials,
    };
    let j = |d: &DesignField, s: &StimulusField| -> Result<f64> { Ok(reduced_objective(problem, d, s)?.total) };
    for _ in 0..trials {
        let (d, s) = random_iterate(&mut rng, n, cases);
        let g = gradient(problem, &d, &s)?;
        check_len("design gradient", n, g.g_rho2.len())?;

        let phi: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = d.to_flat();
        let at = |sign: f64| {
            let y: Vec<f64> = x.iter().zip(&phi).map(|(a, b)| a + sign * delta * b).collect();
            j(&DesignField::from_flat(&y), &s)
        };
        let fd = (at(1.0)? - at(-1.0)?) / (2.0 * delta);
        let an: f64 = g.g_rho2.iter().chain(&g.g_rho3).zip(&phi).map(|(a, b)| a * b).sum();
        report.design = report.design.max(relative(an, fd));

        let psi: Vec<f64> = (0..cases * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y = s.to_flat();
        let at = |sign: f64| {
            let z: Vec<f64> = y.iter().zip(&psi).map(|(a, b)| a + sign * delta * b).collect();
            j(&d, &StimulusField::from_flat(&z, cases))
        };
        let fd = (at(1.0)? - at(-1.0)?) / (2.0 * delta);
        let an: f64 = g.g_s.iter().flatten().zip(&psi).map(|(a, b)| a * b).sum();
        report.stimulus = report.stimulus.max(relative(an, fd));
    }
    Ok(report)
}

/// Copy of `problem` with the linear solver tightened for difference
/// quotients.
pub fn with_tight_solver(problem: &DesignProblem, rtol: f64) -> DesignProblem {
    let mut p = problem.clone();
    p.elasticity.solver = SolverSettings {
        rtol,
        ..p.elasticity.solver
    };
    p
}

/// Element trace of the symmetric gradient, from the vertex coordinates.
fn element_trace(mesh: &Mesh, lambda: &VectorField, t: usize) -> (f64, f64) {
    let [a, b, c] = mesh.triangles[t];
    let (pa, pb, pc) = (mesh.nodes[a], mesh.nodes[b], mesh.nodes[c]);
    // solve for the affine map v(x) = v_a + G (x − x_a)
    let m = [[pb[0] - pa[0], pb[1] - pa[1]], [pc[0] - pa[0], pc[1] - pa[1]]];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let va = lambda.at(a);
    let dv = [
        [lambda.at(b)[0] - va[0], lambda.at(b)[1] - va[1]],
        [lambda.at(c)[0] - va[0], lambda.at(c)[1] - va[1]],
    ];
    // ∂v_x/∂x and ∂v_y/∂y by Cramer's rule
    let dvx_dx = (dv[0][0] * m[1][1] - dv[1][0] * m[0][1]) / det;
    let dvy_dy = (m[0][0] * dv[1][1] - m[1][0] * dv[0][1]) / det;
    (dvx_dx + dvy_dy, 0.5 * det.abs())
}

/// Per-node grid search of `−c s + B s²` over `resolution + 1` equispaced
/// values in `[-1, 1]`, with `c` and `B` rebuilt from the adjoint.
pub fn brute_force_stimulus(
    problem: &DesignProblem,
    design: &DesignField,
    lambda: &[VectorField],
    resolution: usize,
) -> Result<StimulusField> {
    let mesh = &problem.mesh;
    let n = mesh.num_nodes();
    design.check(n)?;
    check_len("adjoints", problem.num_cases(), lambda.len())?;
    if resolution == 0 {
        return Err(Error::InvalidParameter("resolution must be positive".into()));
    }
    let ph = problem.phases();
    let coupling: Vec<f64> = [ph.void, ph.passive, ph.responsive]
        .iter()
        .map(|m| {
            let mu = m.young / (2.0 * (1.0 + m.poisson));
            let la = m.young * m.poisson / ((1.0 + m.poisson) * (1.0 - 2.0 * m.poisson));
            m.beta * (2.0 * la + 2.0 * mu)
        })
        .collect();
    let q = problem.params.stimulus_weight;
    let grid: Vec<f64> = (0..=resolution)
        .map(|k| -1.0 + 2.0 * k as f64 / resolution as f64)
        .collect();
    let mut cases = Vec::with_capacity(lambda.len());
    for l in lambda {
        let mut sum = vec![0.0; n];
        let mut wsum = vec![0.0; n];
        for t in 0..mesh.num_triangles() {
            let (tr, area) = element_trace(mesh, l, t);
            for &k in &mesh.triangles[t] {
                sum[k] += area * tr;
                wsum[k] += area;
            }
        }
        let s: Vec<f64> = (0..n)
            .map(|k| {
                let tr = if wsum[k] > 0.0 { sum[k] / wsum[k] } else { 0.0 };
                let (r2, r3) = (design.rho2[k], design.rho3[k]);
                let rho = [1.0 - r2 - r3, r2, r3];
                let c: f64 = (0..3).map(|i| rho[i] * rho[i] * coupling[i]).sum::<f64>() * tr;
                let b = q * (rho[0] * rho[0] + rho[1] * rho[1]);
                let mut best = (f64::INFINITY, 0.0_f64);
                for &v in &grid {
                    let f = -c * v + b * v * v;
                    // ties resolved toward zero
                    if f < best.0 || (f == best.0 && v.abs() < best.1.abs()) {
                        best = (f, v);
                    }
                }
                best.1
            })
            .collect();
        cases.push(s);
    }
    Ok(StimulusField { cases })
}

/// Potential for the 1D profile study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProfilePotential {
    /// Three-phase multi-well between two simplex vertices, phases indexed
    /// 0 (void), 1 (passive), 2 (responsive).
    MultiWell { from: usize, to: usize },
    /// Scalar `scale · u²(1 − u)²` with gradient energy `|u'|²`.
    DoubleWell { scale: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileSettings {
    pub intervals: usize,
    /// Interval length in units of ε.
    pub length_factor: f64,
    pub max_iter: usize,
    /// Stop once the relative energy change per iteration falls below this.
    pub tol: f64,
}

impl Default for ProfileSettings {
    fn default() -> Self {
        ProfileSettings {
            intervals: 4000,
            length_factor: 40.0,
            max_iter: 200_000,
            tol: 1e-13,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfilePoint {
    pub epsilon: f64,
    /// Energy per unit interface length.
    pub energy: f64,
    /// Largest density of the third phase along the profile (0 on an edge).
    pub off_edge: f64,
    pub iterations: usize,
}

fn w1(t: f64) -> f64 {
    let v = t * (1.0 - t);
    v * v
}

fn dw1(t: f64) -> f64 {
    2.0 * t * (1.0 - t) * (1.0 - 2.0 * t)
}

/// Solves `(I + k L) x = rhs` for the 1D Dirichlet Laplacian `L` with fixed
/// end values (Thomas algorithm).
fn implicit_laplacian(k: f64, rhs: &mut [f64]) {
    let m = rhs.len();
    if m < 3 {
        return;
    }
    // unknowns 1..m-1, ends fixed
    let inner = m - 2;
    let (a, b) = (-k, 1.0 + 2.0 * k);
    let mut cp = vec![0.0; inner];
    let mut dp = vec![0.0; inner];
    for i in 0..inner {
        let mut d = rhs[i + 1];
        if i == 0 {
            d -= a * rhs[0];
        }
        if i == inner - 1 {
            d -= a * rhs[m - 1];
        }
        let denom = if i == 0 { b } else { b - a * cp[i - 1] };
        cp[i] = a / denom;
        dp[i] = if i == 0 { d / denom } else { (d - a * dp[i - 1]) / denom };
    }
    for i in (0..inner).rev() {
        let next = if i + 1 < inner { rhs[i + 2] } else { rhs[m - 1] };
        rhs[i + 1] = if i + 1 < inner { dp[i] - cp[i] * next } else { dp[i] };
    }
}

/// Minimizes the discrete `∫ W/ε + ε|ρ'|²` on `[0, length_factor·ε]` for each
/// `ε` by a semi-implicit projected gradient flow.
pub fn profile_coefficient(
    epsilons: &[f64],
    potential: ProfilePotential,
    settings: &ProfileSettings,
) -> Result<Vec<ProfilePoint>> {
    if settings.intervals < 4 {
        return Err(Error::InvalidParameter("profile needs at least 4 intervals".into()));
    }
    epsilons
        .iter()
        .map(|&eps| {
            if !(eps > 0.0) {
                return Err(Error::InvalidParameter(format!("epsilon must be positive, got {eps}")));
            }
            match potential {
                ProfilePotential::MultiWell { from, to } => multiwell_profile(eps, from, to, settings),
                ProfilePotential::DoubleWell { scale } => double_well_profile(eps, scale, settings),
            }
        })
        .collect()
}

fn vertex(phase: usize) -> Result<[f64; 2]> {
    match phase {
        0 => Ok([0.0, 0.0]),
        1 => Ok([1.0, 0.0]),
        2 => Ok([0.0, 1.0]),
        _ => Err(Error::InvalidParameter(format!("phase index {phase} out of range"))),
    }
}

/// Profile of `(ρ2, ρ3)` in the coordinates `p = ρ2 + ρ3`, `q = ρ2 − ρ3`,
/// where `|ρ1'|² + |ρ2'|² + |ρ3'|² = 1.5 p'² + 0.5 q'²` decouples.
fn multiwell_profile(eps: f64, from: usize, to: usize, st: &ProfileSettings) -> Result<ProfilePoint> {
    let (a, b) = (vertex(from)?, vertex(to)?);
    if from == to {
        return Err(Error::InvalidParameter("profile endpoints must differ".into()));
    }
    let third = 3 - from - to;
    let m = st.intervals + 1;
    let h = st.length_factor * eps / st.intervals as f64;
    let mut r2 = vec![0.0; m];
    let mut r3 = vec![0.0; m];
    for k in 0..m {
        let x = k as f64 / st.intervals as f64;
        let t = 1.0 / (1.0 + (-(x - 0.5) * st.length_factor).exp());
        let t = if k == 0 { 0.0 } else if k == m - 1 { 1.0 } else { t };
        r2[k] = a[0] + t * (b[0] - a[0]);
        r3[k] = a[1] + t * (b[1] - a[1]);
        // a small bump into the simplex interior lets the flow leave the edge
        let bump = if k == 0 || k == m - 1 {
            0.0
        } else {
            0.05 * (std::f64::consts::PI * x).sin()
        };
        match third {
            1 => r2[k] += bump,
            2 => r3[k] += bump,
            _ => {
                r2[k] -= 0.5 * bump;
                r3[k] -= 0.5 * bump;
            }
        }
        r2[k] = r2[k].clamp(0.0, 1.0);
        r3[k] = r3[k].clamp(0.0, 1.0);
    }
    let energy = |r2: &[f64], r3: &[f64]| {
        let mut e = 0.0;
        for k in 0..m {
            let w = w1(1.0 - r2[k] - r3[k]) + w1(r2[k]) + w1(r3[k]);
            let weight = if k == 0 || k == m - 1 { 0.5 } else { 1.0 };
            e += weight * h * w / eps;
        }
        for k in 0..m - 1 {
            let (d2, d3) = (r2[k + 1] - r2[k], r3[k + 1] - r3[k]);
            e += eps / h * (d2 * d2 + d3 * d3 + (d2 + d3) * (d2 + d3));
        }
        e
    };
    let tau = 0.2 * eps / h;
    let mut e_old = energy(&r2, &r3);
    let mut iterations = 0;
    for it in 0..st.max_iter {
        iterations = it + 1;
        let mut p: Vec<f64> = (0..m).map(|k| r2[k] + r3[k]).collect();
        let mut q: Vec<f64> = (0..m).map(|k| r2[k] - r3[k]).collect();
        for k in 1..m - 1 {
            let d1 = dw1(1.0 - r2[k] - r3[k]);
            let (d2, d3) = (dw1(r2[k]), dw1(r3[k]));
            let dp = -d1 + 0.5 * (d2 + d3);
            let dq = 0.5 * (d2 - d3);
            p[k] -= tau * h / eps * dp;
            q[k] -= tau * h / eps * dq;
        }
        implicit_laplacian(tau * 2.0 * 1.5 * eps / h, &mut p);
        implicit_laplacian(tau * 2.0 * 0.5 * eps / h, &mut q);
        for k in 1..m - 1 {
            r2[k] = (0.5 * (p[k] + q[k])).clamp(0.0, 1.0);
            r3[k] = (0.5 * (p[k] - q[k])).clamp(0.0, 1.0);
        }
        let e = energy(&r2, &r3);
        if (e_old - e).abs() <= st.tol * e {
            e_old = e;
            break;
        }
        e_old = e;
    }
    let off_edge = (0..m)
        .map(|k| match third {
            0 => 1.0 - r2[k] - r3[k],
            1 => r2[k],
            _ => r3[k],
        })
        .fold(0.0, f64::max);
    Ok(ProfilePoint {
        epsilon: eps,
        energy: e_old,
        off_edge,
        iterations,
    })
}

fn double_well_profile(eps: f64, scale: f64, st: &ProfileSettings) -> Result<ProfilePoint> {
    if !(scale > 0.0) {
        return Err(Error::InvalidParameter(format!("double-well scale must be positive, got {scale}")));
    }
    let m = st.intervals + 1;
    let h = st.length_factor * eps / st.intervals as f64;
    let mut u: Vec<f64> = (0..m).map(|k| k as f64 / st.intervals as f64).collect();
    let energy = |u: &[f64]| {
        let mut e = 0.0;
        for k in 0..m {
            let weight = if k == 0 || k == m - 1 { 0.5 } else { 1.0 };
            e += weight * h * scale * w1(u[k]) / eps;
        }
        for k in 0..m - 1 {
            let d = u[k + 1] - u[k];
            e += eps / h * d * d;
        }
        e
    };
    let tau = 0.2 * eps / h / scale.max(1.0);
    let mut e_old = energy(&u);
    let mut iterations = 0;
    for it in 0..st.max_iter {
        iterations = it + 1;
        for k in 1..m - 1 {
            u[k] -= tau * h / eps * scale * dw1(u[k]);
        }
        implicit_laplacian(tau * 2.0 * eps / h, &mut u);
        for v in u.iter_mut() {
            *v = v.clamp(0.0, 1.0);
        }
        let e = energy(&u);
        if (e_old - e).abs() <= st.tol * e {
            e_old = e;
            break;
        }
        e_old = e;
    }
    Ok(ProfilePoint {
        epsilon: eps,
        energy: e_old,
        off_edge: 0.0,
        iterations,
    })
}
