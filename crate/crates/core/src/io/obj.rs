//! Wavefront OBJ: `v x y z [r g b]` and `f i j k ...` records.

use std::io::Write;
use std::path::Path;

use super::RawMesh;
use crate::mesh::TriMesh;
use crate::{Error, Result};

pub(crate) fn parse(path: &Path, bytes: &[u8]) -> Result<RawMesh> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        location: format!("byte {}", e.valid_up_to()),
        message: "file is not valid UTF-8".into(),
    })?;
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        location: format!("line {line}"),
        message,
    };

    let mut positions = Vec::new();
    let mut colors: Vec<[f64; 3]> = Vec::new();
    let mut colored_vertices = 0usize;
    // (line, raw indices) so range errors can point at the facet
    let mut polygons: Vec<Vec<usize>> = Vec::new();
    let mut polygon_lines = Vec::new();

    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let vals: Vec<f64> = tokens
                    .map(|t| {
                        t.parse::<f64>()
                            .map_err(|_| err(lineno, format!("invalid number `{t}`")))
                    })
                    .collect::<Result<_>>()?;
                let (p, c) = match vals.len() {
                    3 | 4 => ([vals[0], vals[1], vals[2]], None),
                    6 | 7 => {
                        let o = vals.len() - 3;
                        (
                            [vals[0], vals[1], vals[2]],
                            Some([vals[o], vals[o + 1], vals[o + 2]]),
                        )
                    }
                    n => return Err(err(lineno, format!("vertex record has {n} values"))),
                };
                positions.push(p);
                match c {
                    Some(c) => {
                        colored_vertices += 1;
                        colors.push(c.map(|v| v.clamp(0.0, 1.0) * 2.0 - 1.0));
                    }
                    None => colors.push([-1.0; 3]),
                }
            }
            Some("f") => {
                let mut poly = Vec::new();
                for t in tokens {
                    let first = t.split('/').next().unwrap_or("");
                    let idx: i64 = first
                        .parse()
                        .map_err(|_| err(lineno, format!("invalid facet index `{t}`")))?;
                    let resolved = match idx {
                        0 => return Err(err(lineno, "facet index 0 is not valid in OBJ".into())),
                        i if i > 0 => i - 1,
                        i => positions.len() as i64 + i,
                    };
                    if resolved < 0 {
                        return Err(err(
                            lineno,
                            format!("relative index {idx} points before the first vertex"),
                        ));
                    }
                    poly.push(resolved as usize);
                }
                if poly.len() < 3 {
                    return Err(err(lineno, format!("facet has {} vertices", poly.len())));
                }
                polygons.push(poly);
                polygon_lines.push(lineno);
            }
            _ => {}
        }
    }

    let n = positions.len();
    for (k, poly) in polygons.iter().enumerate() {
        if let Some(&bad) = poly.iter().find(|&&v| v >= n) {
            return Err(err(
                polygon_lines[k],
                format!("facet {k} references vertex {} but only {n} vertices exist", bad + 1),
            ));
        }
    }

    let colors = if colored_vertices == 0 {
        None
    } else if colored_vertices == n {
        Some(colors)
    } else {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            location: "vertex records".into(),
            message: format!("{colored_vertices} of {n} vertices carry colors"),
        });
    };

    Ok(RawMesh {
        positions,
        colors,
        polygons,
    })
}

pub(crate) fn write(mesh: &TriMesh, w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "# meshforge")?;
    for (i, p) in mesh.positions.iter().enumerate() {
        match &mesh.colors {
            Some(c) => {
                let c = c[i].map(|v| (v.clamp(-1.0, 1.0) + 1.0) * 0.5);
                writeln!(w, "v {} {} {} {} {} {}", p[0], p[1], p[2], c[0], c[1], c[2])?
            }
            None => writeln!(w, "v {} {} {}", p[0], p[1], p[2])?,
        }
    }
    for t in &mesh.facets {
        writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
    }
    Ok(())
}
