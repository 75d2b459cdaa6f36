//! Composite raster of the deformed structure.
//!
//! Each pixel takes the phase with the larger interpolated density where
//! `ρ2 + ρ3 ≥ 1/2`; void pixels keep the white background. Passive material
//! is black, responsive material runs blue (s = -1) through white (s = 0) to
//! red (s = 1). Several load cases are drawn as side-by-side panels sharing
//! one frame.

use std::io::Write;

use crate::error::{check_len, Error, Result};
use crate::fields::{DesignField, StimulusField, VectorField};
use crate::mesh::Mesh;

pub const BACKGROUND: [u8; 3] = [255, 255, 255];
pub const PASSIVE: [u8; 3] = [0, 0, 0];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    /// Row-major, top row first.
    pub pixels: Vec<[u8; 3]>,
}

impl Image {
    pub fn blank(width: usize, height: usize) -> Self {
        Image {
            width,
            height,
            pixels: vec![BACKGROUND; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    pub fn is_blank(&self) -> bool {
        self.pixels.iter().all(|p| *p == BACKGROUND)
    }

    /// Plain (ASCII) portable pixel map.
    pub fn write_ppm<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "P3")?;
        writeln!(w, "{} {}", self.width, self.height)?;
        writeln!(w, "255")?;
        for row in self.pixels.chunks(self.width.max(1)) {
            let line: Vec<String> = row.iter().map(|p| format!("{} {} {}", p[0], p[1], p[2])).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        Ok(())
    }
}

/// Diverging blue-white-red map on `[-1, 1]`.
pub fn stimulus_color(s: f64) -> [u8; 3] {
    let s = s.clamp(-1.0, 1.0);
    let fade = |t: f64| (255.0 * (1.0 - t)).round() as u8;
    if s >= 0.0 {
        [255, fade(s), fade(s)]
    } else {
        [fade(-s), fade(-s), 255]
    }
}

fn pixel_color(rho2: f64, rho3: f64, s: f64) -> Option<[u8; 3]> {
    if rho2 + rho3 < 0.5 {
        None
    } else if rho2 >= rho3 {
        Some(PASSIVE)
    } else {
        Some(stimulus_color(s))
    }
}

#[derive(Debug, Clone)]
pub struct Rendered {
    pub image: Image,
    /// Deformed triangles whose orientation flipped or collapsed.
    pub inverted: usize,
}

/// Rasterizes `x + scale·u_j` for every case `j`, one panel per case, each
/// `panel_width` pixels wide.
pub fn composite_export(
    mesh: &Mesh,
    design: &DesignField,
    stimulus: &StimulusField,
    displacement: &[VectorField],
    scale: f64,
    panel_width: usize,
) -> Result<Rendered> {
    let n = mesh.num_nodes();
    design.check(n)?;
    stimulus.check(displacement.len(), n)?;
    for u in displacement {
        check_len("displacement", 2 * n, u.values.len())?;
    }
    if panel_width == 0 || displacement.is_empty() {
        return Err(Error::InvalidParameter("render needs a positive width and at least one case".into()));
    }
    let deformed: Vec<Vec<[f64; 2]>> = displacement
        .iter()
        .map(|u| {
            (0..n)
                .map(|i| {
                    let d = u.at(i);
                    [mesh.nodes[i][0] + scale * d[0], mesh.nodes[i][1] + scale * d[1]]
                })
                .collect()
        })
        .collect();
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in deformed.iter().flatten() {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let span = [(hi[0] - lo[0]).max(1e-12), (hi[1] - lo[1]).max(1e-12)];
    let margin = 0.05 * span[0].max(span[1]);
    let (x0, y1) = (lo[0] - margin, hi[1] + margin);
    let px = (span[0] + 2.0 * margin) / panel_width as f64;
    let panel_height = (((span[1] + 2.0 * margin) / px).ceil() as usize).max(1);

    let mut image = Image::blank(panel_width * displacement.len(), panel_height);
    let mut inverted = 0;
    for (j, pts) in deformed.iter().enumerate() {
        let s = &stimulus.cases[j];
        let offset = j * panel_width;
        for tri in &mesh.triangles {
            let p = tri.map(|i| [(pts[i][0] - x0) / px, (y1 - pts[i][1]) / px]);
            let orig = tri.map(|i| mesh.nodes[i]);
            let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
            let ref_det =
                (orig[1][0] - orig[0][0]) * (orig[2][1] - orig[0][1]) - (orig[2][0] - orig[0][0]) * (orig[1][1] - orig[0][1]);
            // Image y points down, so a preserved orientation flips the sign.
            if det * ref_det >= 0.0 {
                inverted += 1;
            }
            if det.abs() < 1e-300 {
                continue;
            }
            let xmin = p.iter().map(|q| q[0]).fold(f64::INFINITY, f64::min).floor().max(0.0) as usize;
            let xmax = (p.iter().map(|q| q[0]).fold(f64::NEG_INFINITY, f64::max).ceil().max(0.0) as usize).min(panel_width);
            let ymin = p.iter().map(|q| q[1]).fold(f64::INFINITY, f64::min).floor().max(0.0) as usize;
            let ymax = (p.iter().map(|q| q[1]).fold(f64::NEG_INFINITY, f64::max).ceil().max(0.0) as usize).min(panel_height);
            for y in ymin..ymax {
                for x in xmin..xmax {
                    let c = [x as f64 + 0.5, y as f64 + 0.5];
                    let l1 = ((p[2][0] - p[0][0]) * (c[1] - p[0][1]) - (c[0] - p[0][0]) * (p[2][1] - p[0][1])) / -det;
                    let l2 = ((p[1][0] - p[0][0]) * (c[1] - p[0][1]) - (c[0] - p[0][0]) * (p[1][1] - p[0][1])) / det;
                    let l0 = 1.0 - l1 - l2;
                    const TOL: f64 = -1e-9;
                    if l0 < TOL || l1 < TOL || l2 < TOL {
                        continue;
                    }
                    let lerp = |v: &[f64]| l0 * v[tri[0]] + l1 * v[tri[1]] + l2 * v[tri[2]];
                    if let Some(color) = pixel_color(lerp(&design.rho2), lerp(&design.rho3), lerp(s)) {
                        image.pixels[y * image.width + offset + x] = color;
                    }
                }
            }
        }
    }
    if inverted > 0 {
        log::warn!("{inverted} deformed triangles are inverted or collapsed at render scale {scale}");
    }
    Ok(Rendered { image, inverted })
}
