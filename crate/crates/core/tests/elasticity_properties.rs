//! Design-independent bound on state displacements.

use morphopt::elasticity::SolverSettings;
use morphopt::fields::VectorField;
use morphopt::functional::RegularizationParams;
use morphopt::mesh::{build_rect_mesh, BoxRegion, Mesh, Side};
use morphopt::{DesignField, DesignProblem, Material, PhaseSet, StimulusField, TargetDisplacement};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn h1_norm(mesh: &Mesh, u: &VectorField) -> f64 {
    let mut sq = 0.0;
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let g = mesh.geometry(t);
        let v = u.element_values(tri);
        for c in 0..2 {
            // consistent P1 mass on the element
            let (a, b, d) = (v[0][c], v[1][c], v[2][c]);
            sq += g.area / 12.0 * (2.0 * (a * a + b * b + d * d) + 2.0 * (a * b + b * d + a * d));
            let grad: [f64; 2] = [0, 1].map(|k| (0..3).map(|i| v[i][c] * g.grads[i][k]).sum());
            sq += g.area * (grad[0] * grad[0] + grad[1] * grad[1]);
        }
    }
    sq.sqrt()
}

#[test]
fn displacement_norm_is_bounded_over_random_designs() {
    let bx = BoxRegion {
        x_min: 0.8,
        x_max: 1.0,
        y_min: 0.1,
        y_max: 0.2,
    };
    let mesh = build_rect_mesh(1.0, 1.0 / 3.0, 1.0 / 30.0, Side::Left, bx).unwrap();
    let n = mesh.num_nodes();
    let phases = PhaseSet::new(
        Material::new(5.0, 0.3, 0.0).unwrap(),
        Material::new(5.0, 0.3, 1.0).unwrap(),
        1e-4,
    )
    .unwrap();
    let params = RegularizationParams {
        epsilon: 1.0 / 15.0,
        alpha: 6e-4,
        nu2: 0.1,
        nu3: 0.3,
        stimulus_weight: 1.0,
    };
    let problem = DesignProblem::new(
        mesh,
        phases,
        vec![TargetDisplacement::Constant([0.0, 1.0])],
        params,
        SolverSettings::default(),
    )
    .unwrap();
    let mesh = &problem.mesh;

    // Reference: the homogeneous solid under the largest admissible stimulus.
    let reference = problem
        .solve_state(&DesignField::constant(n, 0.0, 1.0), &StimulusField::constant(1, n, 1.0))
        .unwrap();
    let bound = 10.0 * h1_norm(mesh, &reference.u[0]);
    assert!(bound > 0.0);

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut largest: f64 = 0.0;
    for _ in 0..50 {
        let design = DesignField {
            rho2: (0..n).map(|_| rng.gen_range(0.0..1.0)).collect(),
            rho3: (0..n).map(|_| rng.gen_range(0.0..1.0)).collect(),
        };
        let stimulus = StimulusField {
            cases: vec![(0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()],
        };
        let st = problem.solve_state(&design, &stimulus).unwrap();
        largest = largest.max(h1_norm(mesh, &st.u[0]));
    }
    assert!(largest <= bound, "{largest} exceeds {bound}");
}
