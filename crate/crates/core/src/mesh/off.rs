use std::fmt::Write as _;
use std::path::Path;

use super::{Point3, TriMesh};
use crate::error::{Error, Result};

pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriMesh> {
    let text = std::fs::read_to_string(path)?;
    parse_off(&text)
}

/// Parses an ASCII OFF document. Comments start with `#`; the counts may sit
/// on the header line or on the next non-empty line.
pub fn parse_off(text: &str) -> Result<TriMesh> {
    let mut tokens = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (line, header) = tokens.next().ok_or(Error::Parse {
        line: 0,
        msg: "empty file".into(),
    })?;
    let mut header_words = header.split_whitespace();
    if header_words.next() != Some("OFF") {
        return Err(Error::Parse {
            line,
            msg: format!("expected OFF header, found {header:?}"),
        });
    }
    let rest: Vec<&str> = header_words.collect();
    let (line, counts) = if rest.is_empty() {
        let (l, c) = tokens.next().ok_or(Error::Parse {
            line,
            msg: "missing counts line".into(),
        })?;
        (l, parse_numbers::<usize>(c, l)?)
    } else {
        (line, parse_numbers::<usize>(&rest.join(" "), line)?)
    };
    if counts.len() < 2 {
        return Err(Error::Parse {
            line,
            msg: "counts line needs vertex and face counts".into(),
        });
    }
    let (nv, nf) = (counts[0], counts[1]);

    let mut vertices: Vec<Point3> = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (l, s) = tokens.next().ok_or(Error::Parse {
            line,
            msg: format!("expected {nv} vertices, found {}", vertices.len()),
        })?;
        let xyz = parse_numbers::<f64>(s, l)?;
        if xyz.len() < 3 {
            return Err(Error::Parse {
                line: l,
                msg: "vertex needs three coordinates".into(),
            });
        }
        vertices.push([xyz[0], xyz[1], xyz[2]]);
    }

    let mut faces = Vec::with_capacity(nf);
    for f in 0..nf {
        let (l, s) = tokens.next().ok_or(Error::Parse {
            line,
            msg: format!("expected {nf} faces, found {f}"),
        })?;
        let mut words = s.split_whitespace();
        let arity: usize = parse_word(words.next(), l)?;
        if arity != 3 {
            return Err(Error::NonTriangleFace { face: f, arity });
        }
        let a = parse_word(words.next(), l)?;
        let b = parse_word(words.next(), l)?;
        let c = parse_word(words.next(), l)?;
        // Trailing tokens (per-face colors) are ignored.
        faces.push([a, b, c]);
    }

    TriMesh::new(vertices, faces)
}

pub fn write_off(mesh: &TriMesh) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "OFF");
    let _ = writeln!(out, "{} {} 0", mesh.num_vertices(), mesh.num_faces());
    for p in mesh.vertices() {
        let _ = writeln!(out, "{:?} {:?} {:?}", p[0], p[1], p[2]);
    }
    for f in mesh.faces() {
        let _ = writeln!(out, "3 {} {} {}", f[0], f[1], f[2]);
    }
    out
}

fn parse_numbers<T: std::str::FromStr>(s: &str, line: usize) -> Result<Vec<T>> {
    s.split_whitespace().map(|w| parse_word(Some(w), line)).collect()
}

fn parse_word<T: std::str::FromStr>(w: Option<&str>, line: usize) -> Result<T> {
    let w = w.ok_or(Error::Parse {
        line,
        msg: "unexpected end of line".into(),
    })?;
    w.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("cannot parse {w:?}"),
    })
}
