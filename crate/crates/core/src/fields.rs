//! Nodal P1 fields.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Result};
use crate::mesh::Mesh;

/// Densities of the passive (`rho2`) and responsive (`rho3`) phases. The
/// void density `1 - rho2 - rho3` is implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignField {
    pub rho2: Vec<f64>,
    pub rho3: Vec<f64>,
}

impl DesignField {
    pub fn constant(num_nodes: usize, rho2: f64, rho3: f64) -> Self {
        DesignField {
            rho2: vec![rho2; num_nodes],
            rho3: vec![rho3; num_nodes],
        }
    }

    pub fn len(&self) -> usize {
        self.rho2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho2.is_empty()
    }

    pub fn check(&self, num_nodes: usize) -> Result<()> {
        check_len("design rho2", num_nodes, self.rho2.len())?;
        check_len("design rho3", num_nodes, self.rho3.len())
    }

    /// Nodal densities `(ρ1, ρ2, ρ3)` at node `i`.
    pub fn densities(&self, i: usize) -> [f64; 3] {
        let (r2, r3) = (self.rho2[i], self.rho3[i]);
        [1.0 - r2 - r3, r2, r3]
    }

    /// Component-wise clamp of both densities to `[0, 1]`.
    pub fn project(&self) -> DesignField {
        DesignField {
            rho2: self.rho2.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
            rho3: self.rho3.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        }
    }

    /// Concatenation `[rho2, rho3]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(2 * self.len());
        x.extend_from_slice(&self.rho2);
        x.extend_from_slice(&self.rho3);
        x
    }

    pub fn from_flat(x: &[f64]) -> DesignField {
        let n = x.len() / 2;
        DesignField {
            rho2: x[..n].to_vec(),
            rho3: x[n..2 * n].to_vec(),
        }
    }
}

/// One stimulus field per load case.
#[derive(Debug, Clone, PartialEq)]
pub struct StimulusField {
    pub cases: Vec<Vec<f64>>,
}

impl StimulusField {
    pub fn constant(num_cases: usize, num_nodes: usize, value: f64) -> Self {
        StimulusField {
            cases: vec![vec![value; num_nodes]; num_cases],
        }
    }

    pub fn num_cases(&self) -> usize {
        self.cases.len()
    }

    pub fn check(&self, num_cases: usize, num_nodes: usize) -> Result<()> {
        check_len("stimulus cases", num_cases, self.cases.len())?;
        for s in &self.cases {
            check_len("stimulus values", num_nodes, s.len())?;
        }
        Ok(())
    }

    /// Clamp to `[-1, 1]`.
    pub fn project(&self) -> StimulusField {
        StimulusField {
            cases: self
                .cases
                .iter()
                .map(|s| s.iter().map(|v| v.clamp(-1.0, 1.0)).collect())
                .collect(),
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.cases.concat()
    }

    pub fn from_flat(x: &[f64], num_cases: usize) -> StimulusField {
        let n = x.len() / num_cases.max(1);
        StimulusField {
            cases: x.chunks(n.max(1)).take(num_cases).map(<[f64]>::to_vec).collect(),
        }
    }
}

/// Per-node 2-vectors, interleaved as `[x0, y0, x1, y1, …]` so the storage
/// doubles as a degree-of-freedom vector.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub values: Vec<f64>,
}

impl VectorField {
    pub fn zeros(num_nodes: usize) -> Self {
        VectorField {
            values: vec![0.0; 2 * num_nodes],
        }
    }

    pub fn from_dofs(values: Vec<f64>) -> Self {
        VectorField { values }
    }

    pub fn num_nodes(&self) -> usize {
        self.values.len() / 2
    }

    pub fn at(&self, node: usize) -> [f64; 2] {
        [self.values[2 * node], self.values[2 * node + 1]]
    }

    pub fn element_values(&self, tri: &[usize; 3]) -> [[f64; 2]; 3] {
        tri.map(|n| self.at(n))
    }
}

/// Prescribed displacement of the target region for one load case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TargetDisplacement {
    Constant([f64; 2]),
    Nodal(Vec<[f64; 2]>),
}

impl TargetDisplacement {
    pub fn at(&self, node: usize) -> [f64; 2] {
        match self {
            TargetDisplacement::Constant(v) => *v,
            TargetDisplacement::Nodal(v) => v[node],
        }
    }

    pub fn check(&self, num_nodes: usize) -> Result<()> {
        match self {
            TargetDisplacement::Constant(v) => {
                if v.iter().all(|c| c.is_finite()) {
                    Ok(())
                } else {
                    Err(crate::Error::InvalidParameter(format!(
                        "target displacement {v:?} is not finite"
                    )))
                }
            }
            TargetDisplacement::Nodal(v) => check_len("nodal target displacement", num_nodes, v.len()),
        }
    }
}

/// Area-weighted average of element values over the triangles incident to
/// each node.
pub fn nodal_average_from_elements(mesh: &Mesh, element_values: &[f64]) -> Result<Vec<f64>> {
    check_len("element values", mesh.num_triangles(), element_values.len())?;
    let mut sum = vec![0.0; mesh.num_nodes()];
    let mut weight = vec![0.0; mesh.num_nodes()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let area = mesh.geometry(t).area;
        for &n in tri {
            sum[n] += area * element_values[t];
            weight[n] += area;
        }
    }
    Ok(sum
        .iter()
        .zip(&weight)
        .map(|(s, w)| if *w > 0.0 { s / w } else { 0.0 })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_rect_mesh, BoxRegion, Side};
    use proptest::prelude::*;

    fn square(h: f64) -> Mesh {
        let bx = BoxRegion {
            x_min: 0.0,
            x_max: 1.0,
            y_min: 0.0,
            y_max: 1.0,
        };
        build_rect_mesh(1.0, 1.0, h, Side::Left, bx).unwrap()
    }

    #[test]
    fn design_projection() {
        let d = DesignField {
            rho2: vec![1.2, 0.5],
            rho3: vec![-0.1, 0.2],
        };
        let p = d.project();
        assert_eq!(p.rho2, vec![1.0, 0.5]);
        assert_eq!(p.rho3, vec![0.0, 0.2]);
        assert_eq!(p.project(), p);
    }

    #[test]
    fn stimulus_projection() {
        let s = StimulusField {
            cases: vec![vec![1.2, 0.5, -1.7]],
        };
        let p = s.project();
        assert_eq!(p.cases[0], vec![1.0, 0.5, -1.0]);
        assert_eq!(p.project(), p);
    }

    #[test]
    fn constant_element_field_is_constant_nodally() {
        let m = square(0.25);
        let nodal = nodal_average_from_elements(&m, &vec![3.0; m.num_triangles()]).unwrap();
        assert!(nodal.iter().all(|v| (v - 3.0).abs() < 1e-15));
    }

    #[test]
    fn two_element_node_average() {
        // two triangles sharing the edge 1-2
        let nodes = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [2.0, 1.0]];
        let tris = vec![[0, 1, 2], [1, 3, 2]];
        let m = Mesh::new(nodes, tris, vec![0], vec![], 1.0).unwrap();
        let (a1, a2) = (m.geometry(0).area, m.geometry(1).area);
        let nodal = nodal_average_from_elements(&m, &[2.0, 5.0]).unwrap();
        assert!((nodal[1] - (a1 * 2.0 + a2 * 5.0) / (a1 + a2)).abs() < 1e-15);
        assert_eq!(nodal[0], 2.0);
        assert_eq!(nodal[3], 5.0);
    }

    #[test]
    fn affine_recovery_converges_first_order() {
        let f = |p: [f64; 2]| 1.0 + 2.0 * p[0] - 3.0 * p[1];
        let err = |h: f64| {
            let m = square(h);
            let ev: Vec<f64> = (0..m.num_triangles()).map(|t| f(m.centroid(t))).collect();
            let nodal = nodal_average_from_elements(&m, &ev).unwrap();
            nodal
                .iter()
                .zip(&m.nodes)
                .map(|(v, p)| (v - f(*p)).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(0.1), err(0.05));
        let ratio = e1 / e2;
        assert!((ratio - 2.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn size_mismatch_reported() {
        let m = square(0.5);
        assert!(nodal_average_from_elements(&m, &[1.0]).is_err());
        assert!(DesignField::constant(3, 0.1, 0.1).check(m.num_nodes()).is_err());
    }

    proptest! {
        #[test]
        fn projections_idempotent_nonexpansive(a in prop::collection::vec(-3.0..3.0f64, 8),
                                              b in prop::collection::vec(-3.0..3.0f64, 8)) {
            let d1 = DesignField { rho2: a[..4].to_vec(), rho3: a[4..].to_vec() };
            let d2 = DesignField { rho2: b[..4].to_vec(), rho3: b[4..].to_vec() };
            let (p1, p2) = (d1.project(), d2.project());
            prop_assert_eq!(&p1.project(), &p1);
            let dist = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
            prop_assert!(dist(&p1.to_flat(), &p2.to_flat()) <= dist(&d1.to_flat(), &d2.to_flat()));
            let s1 = StimulusField { cases: vec![a.clone()] };
            let s2 = StimulusField { cases: vec![b.clone()] };
            prop_assert_eq!(&s1.project().project(), &s1.project());
            prop_assert!(dist(&s1.project().cases[0], &s2.project().cases[0]) <= dist(&a, &b));
        }
    }
}
