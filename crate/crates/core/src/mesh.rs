//! Structured P1 triangulations of the two design domains.
//!
//! Rectangles are split on a uniform grid with every cell cut along its
//! lower-left to upper-right diagonal. Hexagons are cut from a triangular
//! lattice, which keeps the mesh invariant under rotations by multiples of
//! π/3 about the origin.

use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Side of a rectangle carrying the homogeneous Dirichlet condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

/// Which three alternating hexagon edges are clamped, named by the angles of
/// their outward normals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClampOrientation {
    #[default]
    Normals90_210_330,
    Normals30_150_270,
}

impl ClampOrientation {
    fn normal_angles_deg(self) -> [f64; 3] {
        match self {
            ClampOrientation::Normals90_210_330 => [90.0, 210.0, 330.0],
            ClampOrientation::Normals30_150_270 => [30.0, 150.0, 270.0],
        }
    }
}

/// Axis-aligned box `[x_min, x_max] × [y_min, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxRegion {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl BoxRegion {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x_min && p[0] <= self.x_max && p[1] >= self.y_min && p[1] <= self.y_max
    }
}

/// Area and constant shape-function gradients of one P1 triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementGeometry {
    pub area: f64,
    pub grads: [[f64; 2]; 3],
}

impl ElementGeometry {
    pub fn from_points(p: [[f64; 2]; 3]) -> Self {
        let [p0, p1, p2] = p;
        let twice_area = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
        let inv = 1.0 / twice_area;
        let grads = [
            [(p1[1] - p2[1]) * inv, (p2[0] - p1[0]) * inv],
            [(p2[1] - p0[1]) * inv, (p0[0] - p2[0]) * inv],
            [(p0[1] - p1[1]) * inv, (p1[0] - p0[0]) * inv],
        ];
        ElementGeometry {
            area: 0.5 * twice_area,
            grads,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub nodes: Vec<[f64; 2]>,
    /// Counterclockwise node triples.
    pub triangles: Vec<[usize; 3]>,
    /// Sorted node indices on the clamped boundary.
    pub dirichlet_nodes: Vec<usize>,
    /// Sorted triangle indices whose centroid lies in the target region.
    pub target_elements: Vec<usize>,
    pub cell_size: f64,
    geometry: Vec<ElementGeometry>,
}

impl Mesh {
    /// Assembles a mesh from raw parts, checking the index and orientation
    /// invariants.
    pub fn new(
        nodes: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        mut dirichlet_nodes: Vec<usize>,
        mut target_elements: Vec<usize>,
        cell_size: f64,
    ) -> Result<Self> {
        let mut geometry = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&n| n >= nodes.len()) {
                return Err(Error::InvalidParameter(format!(
                    "triangle {t} references a node outside 0..{}",
                    nodes.len()
                )));
            }
            let g = ElementGeometry::from_points([nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]]);
            if !(g.area > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "triangle {t} has non-positive signed area {}",
                    g.area
                )));
            }
            geometry.push(g);
        }
        dirichlet_nodes.sort_unstable();
        dirichlet_nodes.dedup();
        target_elements.sort_unstable();
        target_elements.dedup();
        if let Some(&n) = dirichlet_nodes.last() {
            if n >= nodes.len() {
                return Err(Error::InvalidParameter(format!("dirichlet node {n} out of range")));
            }
        }
        if let Some(&t) = target_elements.last() {
            if t >= triangles.len() {
                return Err(Error::InvalidParameter(format!("target element {t} out of range")));
            }
        }
        Ok(Mesh {
            nodes,
            triangles,
            dirichlet_nodes,
            target_elements,
            cell_size,
            geometry,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Area and per-node shape-function gradients of triangle `t`.
    pub fn area_and_gradients(&self, t: usize) -> (f64, [[f64; 2]; 3]) {
        let g = &self.geometry[t];
        (g.area, g.grads)
    }

    pub fn geometry(&self, t: usize) -> &ElementGeometry {
        &self.geometry[t]
    }

    pub fn total_area(&self) -> f64 {
        self.geometry.iter().map(|g| g.area).sum()
    }

    pub fn target_area(&self) -> f64 {
        self.target_elements.iter().map(|&t| self.geometry[t].area).sum()
    }

    pub fn centroid(&self, t: usize) -> [f64; 2] {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        [(pa[0] + pb[0] + pc[0]) / 3.0, (pa[1] + pb[1] + pc[1]) / 3.0]
    }

    /// Nodes on edges that belong to exactly one triangle, sorted.
    pub fn boundary_nodes(&self) -> Vec<usize> {
        let mut edge_count: HashMap<(usize, usize), u32> = HashMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *edge_count.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        let mut nodes: Vec<usize> = edge_count
            .into_iter()
            .filter(|&(_, c)| c == 1)
            .flat_map(|((a, b), _)| [a, b])
            .collect();
        nodes.sort_unstable();
        nodes.dedup();
        nodes
    }

    /// Boolean mask over nodes of the clamped set.
    pub fn dirichlet_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.nodes.len()];
        for &n in &self.dirichlet_nodes {
            mask[n] = true;
        }
        mask
    }

    /// Lumped nodal areas `∫ N_k dx`.
    pub fn lumped_areas(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.nodes.len()];
        for (tri, g) in self.triangles.iter().zip(&self.geometry) {
            for &n in tri {
                out[n] += g.area / 3.0;
            }
        }
        out
    }

    /// Sorted neighbour lists (each node includes itself).
    pub fn node_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj: Vec<Vec<usize>> = (0..self.nodes.len()).map(|i| vec![i]).collect();
        for tri in &self.triangles {
            for &a in tri {
                for &b in tri {
                    adj[a].push(b);
                }
            }
        }
        for row in &mut adj {
            row.sort_unstable();
            row.dedup();
        }
        adj
    }
}

/// Uniform rectangle mesh with `round(Lx/h) × round(Ly/h)` cells.
///
/// The node spacing is `Lx/nx`, `Ly/ny`, so the mesh covers the rectangle
/// exactly even when `h` does not divide its sides.
pub fn build_rect_mesh(
    lx: f64,
    ly: f64,
    h: f64,
    dirichlet_side: Side,
    target_box: BoxRegion,
) -> Result<Mesh> {
    if !(lx > 0.0 && ly > 0.0 && h > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "rectangle needs positive lx, ly, h (got {lx}, {ly}, {h})"
        )));
    }
    let nx = (lx / h).round() as usize;
    let ny = (ly / h).round() as usize;
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidParameter(format!(
            "cell size {h} yields a degenerate {nx}×{ny} grid on {lx}×{ly}"
        )));
    }
    let slack = 1e-12 * lx.max(ly);
    if target_box.x_min < -slack
        || target_box.y_min < -slack
        || target_box.x_max > lx + slack
        || target_box.y_max > ly + slack
        || target_box.x_min > target_box.x_max
        || target_box.y_min > target_box.y_max
    {
        return Err(Error::InvalidParameter(format!(
            "target box {target_box:?} is not inside [0,{lx}]×[0,{ly}]"
        )));
    }

    let (dx, dy) = (lx / nx as f64, ly / ny as f64);
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            // Pin the far edges to the exact side lengths.
            let x = if i == nx { lx } else { i as f64 * dx };
            let y = if j == ny { ly } else { j as f64 * dy };
            nodes.push([x, y]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (n00, n10, n01, n11) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
            triangles.push([n00, n10, n11]);
            triangles.push([n00, n11, n01]);
        }
    }
    let dirichlet: Vec<usize> = match dirichlet_side {
        Side::Left => (0..=ny).map(|j| id(0, j)).collect(),
        Side::Right => (0..=ny).map(|j| id(nx, j)).collect(),
        Side::Bottom => (0..=nx).map(|i| id(i, 0)).collect(),
        Side::Top => (0..=nx).map(|i| id(i, ny)).collect(),
    };

    let mut mesh = Mesh::new(nodes, triangles, dirichlet, Vec::new(), h)?;
    mesh.target_elements = (0..mesh.num_triangles())
        .filter(|&t| target_box.contains(mesh.centroid(t)))
        .collect();
    Ok(mesh)
}

/// Regular hexagon of edge `edge` centred at the origin, vertices at angles
/// `0, π/3, …`. Lattice spacing is `edge / round(edge/h)`.
pub fn build_hexagon_mesh(
    edge: f64,
    h: f64,
    target_edge: f64,
    clamp: ClampOrientation,
) -> Result<Mesh> {
    if !(edge > 0.0 && h > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "hexagon needs positive edge and h (got {edge}, {h})"
        )));
    }
    if !(target_edge > 0.0 && target_edge < edge) {
        return Err(Error::InvalidParameter(format!(
            "target hexagon edge {target_edge} must lie in (0, {edge})"
        )));
    }
    if h > 0.5 * edge * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "cell size {h} is coarser than half the hexagon edge {edge}"
        )));
    }
    let k = (edge / h).round().max(1.0) as i64;
    let a = edge / k as f64;
    let half_sqrt3 = 0.5 * 3f64.sqrt();

    let inside = |i: i64, j: i64| i.abs() <= k && j.abs() <= k && (i + j).abs() <= k;
    let mut index: HashMap<(i64, i64), usize> = HashMap::new();
    let mut nodes = Vec::new();
    for j in -k..=k {
        for i in -k..=k {
            if inside(i, j) {
                index.insert((i, j), nodes.len());
                nodes.push([a * (i as f64 + 0.5 * j as f64), a * half_sqrt3 * j as f64]);
            }
        }
    }
    let mut triangles = Vec::with_capacity((6 * k * k) as usize);
    for j in -k..k {
        for i in -k..k {
            let up = [(i, j), (i + 1, j), (i, j + 1)];
            if up.iter().all(|&(p, q)| inside(p, q)) {
                triangles.push(up.map(|c| index[&c]));
            }
            let down = [(i + 1, j), (i + 1, j + 1), (i, j + 1)];
            if down.iter().all(|&(p, q)| inside(p, q)) {
                triangles.push(down.map(|c| index[&c]));
            }
        }
    }

    let apothem = edge * half_sqrt3;
    let tol = 1e-9 * edge;
    let normals: Vec<[f64; 2]> = clamp
        .normal_angles_deg()
        .iter()
        .map(|deg| {
            let th = deg * PI / 180.0;
            [th.cos(), th.sin()]
        })
        .collect();
    let dirichlet: Vec<usize> = nodes
        .iter()
        .enumerate()
        .filter(|(_, p)| {
            normals
                .iter()
                .any(|n| p[0] * n[0] + p[1] * n[1] >= apothem - tol)
        })
        .map(|(i, _)| i)
        .collect();

    let mut mesh = Mesh::new(nodes, triangles, dirichlet, Vec::new(), h)?;
    mesh.target_elements = (0..mesh.num_triangles())
        .filter(|&t| in_centered_hexagon(mesh.centroid(t), target_edge))
        .collect();
    if mesh.target_elements.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "cell size {h} does not resolve the target hexagon of edge {target_edge}"
        )));
    }
    Ok(mesh)
}

/// Point-in-hexagon test for the regular hexagon of edge `edge` with
/// vertices at angles `0, π/3, …`.
pub fn in_centered_hexagon(p: [f64; 2], edge: f64) -> bool {
    let apothem = edge * 0.5 * 3f64.sqrt();
    (0..6).all(|m| {
        let th = PI / 6.0 + m as f64 * PI / 3.0;
        p[0] * th.cos() + p[1] * th.sin() <= apothem
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box() -> BoxRegion {
        BoxRegion {
            x_min: 0.0,
            x_max: 1.0,
            y_min: 0.0,
            y_max: 1.0,
        }
    }

    #[test]
    fn tiny_cantilever_counts() {
        let target = BoxRegion {
            x_min: 2.0 / 3.0,
            x_max: 1.0,
            y_min: 0.0,
            y_max: 1.0 / 3.0,
        };
        let m = build_rect_mesh(1.0, 1.0 / 3.0, 1.0 / 3.0, Side::Left, target).unwrap();
        assert_eq!(m.num_nodes(), 8);
        assert_eq!(m.num_triangles(), 6);
        assert_eq!(m.dirichlet_nodes.len(), 2);
        assert!(m.dirichlet_nodes.iter().all(|&n| m.nodes[n][0] == 0.0));
        assert_eq!(m.target_elements.len(), 2);
    }

    #[test]
    fn whole_domain_target() {
        let m = build_rect_mesh(1.0, 1.0, 0.5, Side::Bottom, unit_box()).unwrap();
        assert_eq!(m.num_triangles(), 8);
        assert_eq!(m.target_elements, (0..8).collect::<Vec<_>>());
        assert!(m.dirichlet_nodes.iter().all(|&n| m.nodes[n][1] == 0.0));
    }

    #[test]
    fn degenerate_rectangle_rejected() {
        assert!(matches!(
            build_rect_mesh(1.0, 0.1, 0.5, Side::Left, unit_box()),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn refinement_quadruples() {
        let bx = BoxRegion {
            x_min: 0.5,
            x_max: 1.0,
            y_min: 0.0,
            y_max: 0.5,
        };
        let coarse = build_rect_mesh(1.0, 0.5, 0.1, Side::Left, bx).unwrap();
        let fine = build_rect_mesh(1.0, 0.5, 0.05, Side::Left, bx).unwrap();
        assert_eq!(fine.num_triangles(), 4 * coarse.num_triangles());
    }

    #[test]
    fn target_box_outside_domain_rejected() {
        let err = build_rect_mesh(1.0, 0.5, 0.1, Side::Left, unit_box());
        assert!(matches!(err, Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn unit_right_triangle_geometry() {
        let g = ElementGeometry::from_points([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(g.area, 0.5);
        assert_eq!(g.grads, [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn translated_triangle_same_geometry() {
        let p = [[0.1, 0.2], [0.9, 0.35], [0.3, 0.8]];
        let g = ElementGeometry::from_points(p);
        let q = p.map(|x| [x[0] + 0.5, x[1] - 0.25]);
        let h = ElementGeometry::from_points(q);
        assert!((g.area - h.area).abs() < 1e-15);
        for k in 0..3 {
            for c in 0..2 {
                assert!((g.grads[k][c] - h.grads[k][c]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn hexagon_area_and_clamps() {
        let m = build_hexagon_mesh(1.0, 0.5, 0.5, ClampOrientation::default()).unwrap();
        let exact = 1.5 * 3f64.sqrt();
        assert!((m.total_area() - exact).abs() <= 1e-12 * exact);
        assert_eq!(m.num_triangles(), 24);
        // three clamped edges of 3 nodes each, no shared corners between
        // alternate edges
        assert_eq!(m.dirichlet_nodes.len(), 9);
        let boundary = m.boundary_nodes();
        assert!(m.dirichlet_nodes.iter().all(|n| boundary.contains(n)));
    }

    #[test]
    fn hexagon_coarse_target_unresolved() {
        let err = build_hexagon_mesh(0.35, 0.35 / 2.0, 0.035, ClampOrientation::default());
        assert!(matches!(err, Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn hexagon_target_fraction() {
        let m = build_hexagon_mesh(0.35, 0.35 / 40.0, 0.035, ClampOrientation::default()).unwrap();
        let frac = m.target_area() / m.total_area();
        // one layer of cells around the target hexagon changes its edge by at most h
        let lo = ((0.035 - m.cell_size) / 0.35f64).powi(2);
        let hi = ((0.035 + m.cell_size) / 0.35f64).powi(2);
        assert!(frac > lo && frac < hi, "fraction {frac} not in ({lo}, {hi})");
    }

    #[test]
    fn alternate_orientation_clamps_other_edges() {
        let a = build_hexagon_mesh(1.0, 0.25, 0.5, ClampOrientation::Normals90_210_330).unwrap();
        let b = build_hexagon_mesh(1.0, 0.25, 0.5, ClampOrientation::Normals30_150_270).unwrap();
        let on_top = |m: &Mesh| {
            m.dirichlet_nodes
                .iter()
                .filter(|&&n| (m.nodes[n][1] - 0.5 * 3f64.sqrt()).abs() < 1e-12)
                .count()
        };
        assert_eq!(on_top(&a), 5);
        // only the two corners shared with the clamped neighbours
        assert_eq!(on_top(&b), 2);
    }
}
