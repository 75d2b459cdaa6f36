//! Legacy ASCII VTK files and the CSV iteration history.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::optimizer::IterateRecord;

pub const HISTORY_HEADER: [&str; 11] = [
    "iter",
    "total",
    "tracking",
    "perimeter",
    "volume_penalty",
    "stimulus_penalty",
    "|g_rho|",
    "|g_s|",
    "step",
    "vol_frac2",
    "vol_frac3",
];

/// Named nodal data attached to a VTK file.
#[derive(Debug, Clone, PartialEq)]
pub enum PointData<'a> {
    Scalar(&'a str, &'a [f64]),
    /// Interleaved 2-vectors.
    Vector(&'a str, &'a [f64]),
}

pub fn write_vtk<W: Write>(mut w: W, mesh: &Mesh, title: &str, data: &[PointData]) -> Result<()> {
    let n = mesh.num_nodes();
    for d in data {
        let (name, len, want) = match d {
            PointData::Scalar(name, v) => (name, v.len(), n),
            PointData::Vector(name, v) => (name, v.len(), 2 * n),
        };
        if len != want {
            return Err(Error::Parse(format!("point data `{name}` has {len} values, expected {want}")));
        }
    }
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{}", title.lines().next().unwrap_or(""))?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {n} double")?;
    for p in &mesh.nodes {
        writeln!(w, "{} {} 0", p[0], p[1])?;
    }
    let m = mesh.num_triangles();
    writeln!(w, "CELLS {m} {}", 4 * m)?;
    for t in &mesh.triangles {
        writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    writeln!(w, "CELL_TYPES {m}")?;
    for _ in 0..m {
        writeln!(w, "5")?;
    }
    if !data.is_empty() {
        writeln!(w, "POINT_DATA {n}")?;
    }
    for d in data {
        match d {
            PointData::Scalar(name, v) => {
                writeln!(w, "SCALARS {name} double 1")?;
                writeln!(w, "LOOKUP_TABLE default")?;
                for x in v.iter() {
                    writeln!(w, "{x}")?;
                }
            }
            PointData::Vector(name, v) => {
                writeln!(w, "VECTORS {name} double")?;
                for c in v.chunks(2) {
                    writeln!(w, "{} {} 0", c[0], c[1])?;
                }
            }
        }
    }
    Ok(())
}

/// Contents of a file written by [`write_vtk`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VtkData {
    pub points: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub scalars: Vec<(String, Vec<f64>)>,
    /// Interleaved 2-vectors.
    pub vectors: Vec<(String, Vec<f64>)>,
}

impl VtkData {
    pub fn scalar(&self, name: &str) -> Option<&[f64]> {
        self.scalars.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    pub fn vector(&self, name: &str) -> Option<&[f64]> {
        self.vectors.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

fn num<T: std::str::FromStr>(tok: Option<&str>, what: &str) -> Result<T> {
    tok.ok_or_else(|| bad(format!("missing {what}")))?
        .parse()
        .map_err(|_| bad(format!("malformed {what}")))
}

/// Reads the subset of legacy VTK produced by [`write_vtk`].
pub fn read_vtk<R: BufRead>(r: R) -> Result<VtkData> {
    let mut lines = r.lines();
    let mut next = || -> Result<Option<String>> {
        for l in lines.by_ref() {
            let l = l?;
            if !l.trim().is_empty() {
                return Ok(Some(l));
            }
        }
        Ok(None)
    };
    let header = next()?.ok_or_else(|| bad("empty file"))?;
    if !header.starts_with("# vtk DataFile") {
        return Err(bad("missing VTK header"));
    }
    next()?; // title
    if next()?.as_deref().map(str::trim) != Some("ASCII") {
        return Err(bad("only ASCII files are supported"));
    }
    let mut out = VtkData::default();
    let mut npoints = 0usize;
    while let Some(line) = next()? {
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("DATASET") => {}
            Some("POINTS") => {
                npoints = num(tok.next(), "point count")?;
                for _ in 0..npoints {
                    let l = next()?.ok_or_else(|| bad("truncated POINTS"))?;
                    let mut t = l.split_whitespace();
                    out.points.push([num(t.next(), "x")?, num(t.next(), "y")?]);
                }
            }
            Some("CELLS") => {
                let m: usize = num(tok.next(), "cell count")?;
                for _ in 0..m {
                    let l = next()?.ok_or_else(|| bad("truncated CELLS"))?;
                    let mut t = l.split_whitespace();
                    if num::<usize>(t.next(), "cell size")? != 3 {
                        return Err(bad("only triangles are supported"));
                    }
                    out.triangles.push([num(t.next(), "index")?, num(t.next(), "index")?, num(t.next(), "index")?]);
                }
            }
            Some("CELL_TYPES") => {
                let m: usize = num(tok.next(), "cell type count")?;
                for _ in 0..m {
                    next()?.ok_or_else(|| bad("truncated CELL_TYPES"))?;
                }
            }
            Some("POINT_DATA") => {}
            Some("SCALARS") => {
                let name: String = num(tok.next(), "scalar name")?;
                next()?; // LOOKUP_TABLE
                let mut v = Vec::with_capacity(npoints);
                for _ in 0..npoints {
                    v.push(num(next()?.as_deref().map(str::trim), "scalar value")?);
                }
                out.scalars.push((name, v));
            }
            Some("VECTORS") => {
                let name: String = num(tok.next(), "vector name")?;
                let mut v = Vec::with_capacity(2 * npoints);
                for _ in 0..npoints {
                    let l = next()?.ok_or_else(|| bad("truncated VECTORS"))?;
                    let mut t = l.split_whitespace();
                    v.push(num(t.next(), "vector x")?);
                    v.push(num(t.next(), "vector y")?);
                }
                out.vectors.push((name, v));
            }
            Some(other) => return Err(bad(format!("unexpected section `{other}`"))),
            None => {}
        }
    }
    Ok(out)
}

pub fn history_row(r: &IterateRecord) -> [String; 11] {
    let b = &r.breakdown;
    [
        r.iteration.to_string(),
        b.total.to_string(),
        b.tracking.to_string(),
        b.perimeter.to_string(),
        b.volume_penalty.to_string(),
        b.stimulus_penalty.to_string(),
        r.grad_norm_design.to_string(),
        r.grad_norm_stimulus.to_string(),
        r.step.to_string(),
        r.vol_frac2.to_string(),
        r.vol_frac3.to_string(),
    ]
}

/// Writes the header and one row per record.
pub fn write_history<W: Write>(w: W, history: &[IterateRecord]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(HISTORY_HEADER)?;
    for r in history {
        csv.write_record(history_row(r))?;
    }
    csv.flush()?;
    Ok(())
}
