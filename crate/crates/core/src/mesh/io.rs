//! Plain-text mesh files:
//!
//! ```text
//! V T
//! x y flag      (V lines, flag 1 = boundary)
//! i j k         (T lines, 0-based, newest vertex first)
//! ```

use std::fmt::Write as _;

use super::{Domain, Mesh};
use crate::error::{Error, Result};

pub fn write_mesh(mesh: &Mesh) -> String {
    let mut out = String::new();
    writeln!(out, "{} {}", mesh.num_vertices(), mesh.num_triangles()).unwrap();
    for (p, &b) in mesh.vertices().iter().zip(mesh.boundary_flags()) {
        writeln!(out, "{} {} {}", p[0], p[1], u8::from(b)).unwrap();
    }
    for t in mesh.triangles() {
        writeln!(out, "{} {} {}", t[0], t[1], t[2]).unwrap();
    }
    out
}

pub fn read_mesh(text: &str, domain: Option<Domain>) -> Result<Mesh> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let bad = |lineno: usize, what: &str| Error::Parse(format!("line {}: {what}", lineno + 1));

    let (lineno, header) = lines.next().ok_or_else(|| Error::Parse("empty mesh file".into()))?;
    let counts: Vec<usize> = header
        .split_whitespace()
        .map(|s| s.parse().map_err(|_| bad(lineno, "expected `V T` counts")))
        .collect::<Result<_>>()?;
    let [nv, nt] = counts[..] else {
        return Err(bad(lineno, "expected `V T` counts"));
    };

    let mut vertices = Vec::with_capacity(nv);
    let mut boundary = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (lineno, line) = lines.next().ok_or_else(|| Error::Parse("truncated vertex block".into()))?;
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return Err(bad(lineno, "expected `x y flag`"));
        }
        let x: f64 = f[0].parse().map_err(|_| bad(lineno, "bad x"))?;
        let y: f64 = f[1].parse().map_err(|_| bad(lineno, "bad y"))?;
        let flag = match f[2] {
            "0" => false,
            "1" => true,
            _ => return Err(bad(lineno, "flag must be 0 or 1")),
        };
        vertices.push([x, y]);
        boundary.push(flag);
    }

    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (lineno, line) = lines.next().ok_or_else(|| Error::Parse("truncated triangle block".into()))?;
        let idx: Vec<usize> = line
            .split_whitespace()
            .map(|s| s.parse().map_err(|_| bad(lineno, "bad vertex index")))
            .collect::<Result<_>>()?;
        let [i, j, k] = idx[..] else {
            return Err(bad(lineno, "expected `i j k`"));
        };
        triangles.push([i, j, k]);
    }
    if let Some((lineno, _)) = lines.next() {
        return Err(bad(lineno, "trailing content after triangle block"));
    }
    Mesh::new(domain, vertices, triangles, boundary, 0)
}
