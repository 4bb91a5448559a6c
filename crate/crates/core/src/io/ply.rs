//! Stanford PLY in ASCII and binary (little- or big-endian) encodings.

use std::io::Write;
use std::path::Path;

use super::{color_from_u8, color_to_u8, RawMesh};
use crate::mesh::TriMesh;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyEncoding {
    Ascii,
    BinaryLittleEndian,
    BinaryBigEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Scalar> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    /// Full-scale value used when mapping integer colors to `[-1, 1]`.
    fn color_scale(self) -> Option<f64> {
        match self {
            Scalar::U8 => Some(255.0),
            Scalar::U16 => Some(65535.0),
            Scalar::F32 | Scalar::F64 => None,
            _ => Some(255.0),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { name: String, count: Scalar, item: Scalar },
}

impl Property {
    fn name(&self) -> &str {
        match self {
            Property::Scalar { name, .. } | Property::List { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

struct Header {
    encoding: PlyEncoding,
    elements: Vec<Element>,
    body_start: usize,
    lines: usize,
}

fn parse_header(path: &Path, bytes: &[u8]) -> Result<Header> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        location: format!("line {line}"),
        message,
    };
    let mut pos = 0;
    let mut lineno = 0;
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| err(lineno + 1, "header is not terminated by end_header".into()))?;
        let line = std::str::from_utf8(&bytes[pos..pos + end])
            .map_err(|_| err(lineno + 1, "header is not ASCII".into()))?
            .trim_end_matches('\r')
            .trim();
        pos += end + 1;
        lineno += 1;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if lineno == 1 {
            if line != "ply" {
                return Err(err(1, "missing `ply` magic".into()));
            }
            continue;
        }
        match toks.first().copied() {
            Some("format") => {
                encoding = Some(match toks.get(1).copied() {
                    Some("ascii") => PlyEncoding::Ascii,
                    Some("binary_little_endian") => PlyEncoding::BinaryLittleEndian,
                    Some("binary_big_endian") => PlyEncoding::BinaryBigEndian,
                    other => return Err(err(lineno, format!("unknown format {other:?}"))),
                });
            }
            Some("element") => {
                if toks.len() != 3 {
                    return Err(err(lineno, "malformed element line".into()));
                }
                let count = toks[2]
                    .parse()
                    .map_err(|_| err(lineno, format!("invalid element count `{}`", toks[2])))?;
                elements.push(Element {
                    name: toks[1].to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| err(lineno, "property before any element".into()))?;
                let prop = if toks.get(1) == Some(&"list") {
                    if toks.len() != 5 {
                        return Err(err(lineno, "malformed list property".into()));
                    }
                    let count = Scalar::parse(toks[2])
                        .ok_or_else(|| err(lineno, format!("unknown type `{}`", toks[2])))?;
                    let item = Scalar::parse(toks[3])
                        .ok_or_else(|| err(lineno, format!("unknown type `{}`", toks[3])))?;
                    Property::List {
                        name: toks[4].to_string(),
                        count,
                        item,
                    }
                } else {
                    if toks.len() != 3 {
                        return Err(err(lineno, "malformed property".into()));
                    }
                    let ty = Scalar::parse(toks[1])
                        .ok_or_else(|| err(lineno, format!("unknown type `{}`", toks[1])))?;
                    Property::Scalar {
                        name: toks[2].to_string(),
                        ty,
                    }
                };
                el.props.push(prop);
            }
            Some("end_header") => break,
            Some("comment") | Some("obj_info") | None => {}
            Some(other) => return Err(err(lineno, format!("unexpected header keyword `{other}`"))),
        }
    }
    let encoding = encoding.ok_or_else(|| err(lineno, "missing format line".into()))?;
    Ok(Header {
        encoding,
        elements,
        body_start: pos,
        lines: lineno,
    })
}

/// Sequential value source over the body.
trait Reader {
    fn scalar(&mut self, ty: Scalar) -> std::result::Result<f64, String>;
    /// Called after each element instance.
    fn end_record(&mut self) -> std::result::Result<(), String>;
    fn location(&self) -> String;
}

struct AsciiReader<'a> {
    lines: std::iter::Peekable<std::str::Lines<'a>>,
    current: Vec<&'a str>,
    cursor: usize,
    lineno: usize,
}

impl<'a> AsciiReader<'a> {
    fn fill(&mut self) -> std::result::Result<(), String> {
        while self.cursor >= self.current.len() {
            let line = self.lines.next().ok_or("unexpected end of file")?;
            self.lineno += 1;
            self.current = line.split_whitespace().collect();
            self.cursor = 0;
        }
        Ok(())
    }
}

impl Reader for AsciiReader<'_> {
    fn scalar(&mut self, ty: Scalar) -> std::result::Result<f64, String> {
        self.fill()?;
        let tok = self.current[self.cursor];
        self.cursor += 1;
        let bad = |_| format!("invalid number `{tok}`");
        // round single-precision values the way a binary file would store them
        match ty {
            Scalar::F32 => tok.parse::<f32>().map(f64::from).map_err(bad),
            _ => tok.parse::<f64>().map_err(bad),
        }
    }

    fn end_record(&mut self) -> std::result::Result<(), String> {
        if self.cursor < self.current.len() {
            return Err(format!(
                "{} unexpected trailing values",
                self.current.len() - self.cursor
            ));
        }
        Ok(())
    }

    fn location(&self) -> String {
        format!("line {}", self.lineno)
    }
}

struct BinaryReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    big_endian: bool,
}

impl Reader for BinaryReader<'_> {
    fn scalar(&mut self, ty: Scalar) -> std::result::Result<f64, String> {
        let n = ty.size();
        let raw = self
            .bytes
            .get(self.pos..self.pos + n)
            .ok_or("unexpected end of file")?;
        self.pos += n;
        macro_rules! read {
            ($t:ty) => {{
                let arr: [u8; std::mem::size_of::<$t>()] = raw.try_into().unwrap();
                if self.big_endian {
                    <$t>::from_be_bytes(arr) as f64
                } else {
                    <$t>::from_le_bytes(arr) as f64
                }
            }};
        }
        Ok(match ty {
            Scalar::I8 => raw[0] as i8 as f64,
            Scalar::U8 => raw[0] as f64,
            Scalar::I16 => read!(i16),
            Scalar::U16 => read!(u16),
            Scalar::I32 => read!(i32),
            Scalar::U32 => read!(u32),
            Scalar::F32 => read!(f32),
            Scalar::F64 => read!(f64),
        })
    }

    fn end_record(&mut self) -> std::result::Result<(), String> {
        Ok(())
    }

    fn location(&self) -> String {
        format!("byte {}", self.pos)
    }
}

pub(crate) fn parse(path: &Path, bytes: &[u8]) -> Result<RawMesh> {
    let header = parse_header(path, bytes)?;
    let body = &bytes[header.body_start..];
    match header.encoding {
        PlyEncoding::Ascii => {
            let text = std::str::from_utf8(body).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                location: format!("byte {}", header.body_start + e.valid_up_to()),
                message: "ASCII body is not valid UTF-8".into(),
            })?;
            let mut r = AsciiReader {
                lines: text.lines().peekable(),
                current: Vec::new(),
                cursor: 0,
                lineno: header.lines,
            };
            read_body(path, &header, &mut r)
        }
        enc => {
            let mut r = BinaryReader {
                bytes: body,
                pos: 0,
                big_endian: enc == PlyEncoding::BinaryBigEndian,
            };
            read_body(path, &header, &mut r).map_err(|e| match e {
                Error::Parse {
                    path,
                    location,
                    message,
                } => {
                    // report absolute file offsets
                    let location = location
                        .strip_prefix("byte ")
                        .and_then(|b| b.parse::<usize>().ok())
                        .map(|b| format!("byte {}", b + header.body_start))
                        .unwrap_or(location);
                    Error::Parse {
                        path,
                        location,
                        message,
                    }
                }
                e => e,
            })
        }
    }
}

fn read_body(path: &Path, header: &Header, r: &mut dyn Reader) -> Result<RawMesh> {
    let fail = |r: &dyn Reader, message: String| Error::Parse {
        path: path.to_path_buf(),
        location: r.location(),
        message,
    };
    let mut positions = Vec::new();
    let mut colors = None;
    let mut polygons = Vec::new();
    let mut saw_vertex = false;

    for el in &header.elements {
        match el.name.as_str() {
            "vertex" => {
                saw_vertex = true;
                let find = |n: &str| el.props.iter().position(|p| p.name() == n);
                let (ix, iy, iz) = match (find("x"), find("y"), find("z")) {
                    (Some(a), Some(b), Some(c)) => (a, b, c),
                    _ => return Err(fail(r, "vertex element lacks x/y/z".into())),
                };
                let rgb = match (find("red"), find("green"), find("blue")) {
                    (Some(a), Some(b), Some(c)) => Some([a, b, c]),
                    _ => None,
                };
                let mut cols = Vec::new();
                positions.reserve(el.count);
                let mut vals = vec![0.0; el.props.len()];
                for _ in 0..el.count {
                    for (k, p) in el.props.iter().enumerate() {
                        vals[k] = match p {
                            Property::Scalar { ty, .. } => r.scalar(*ty).map_err(|m| fail(r, m))?,
                            Property::List { count, item, .. } => {
                                let n = r.scalar(*count).map_err(|m| fail(r, m))? as usize;
                                for _ in 0..n {
                                    r.scalar(*item).map_err(|m| fail(r, m))?;
                                }
                                0.0
                            }
                        };
                    }
                    r.end_record().map_err(|m| fail(r, m))?;
                    positions.push([vals[ix], vals[iy], vals[iz]]);
                    if let Some(idx) = rgb {
                        let c = idx.map(|k| {
                            let ty = match &el.props[k] {
                                Property::Scalar { ty, .. } => *ty,
                                Property::List { .. } => Scalar::F64,
                            };
                            match ty.color_scale() {
                                Some(255.0) => color_from_u8(vals[k].clamp(0.0, 255.0) as u8),
                                Some(s) => vals[k] / s * 2.0 - 1.0,
                                None => vals[k].clamp(0.0, 1.0) * 2.0 - 1.0,
                            }
                        });
                        cols.push(c);
                    }
                }
                if rgb.is_some() {
                    colors = Some(cols);
                }
            }
            "face" => {
                let list_idx = el
                    .props
                    .iter()
                    .position(|p| {
                        matches!(p, Property::List { name, .. } if name == "vertex_indices" || name == "vertex_index")
                    })
                    .ok_or_else(|| fail(r, "face element lacks a vertex_indices list".into()))?;
                polygons.reserve(el.count);
                for f in 0..el.count {
                    let mut poly = Vec::new();
                    for (k, p) in el.props.iter().enumerate() {
                        match p {
                            Property::Scalar { ty, .. } => {
                                r.scalar(*ty).map_err(|m| fail(r, m))?;
                            }
                            Property::List { count, item, .. } => {
                                let n = r.scalar(*count).map_err(|m| fail(r, m))? as usize;
                                for _ in 0..n {
                                    let v = r.scalar(*item).map_err(|m| fail(r, m))?;
                                    if k == list_idx {
                                        if v < 0.0 {
                                            return Err(fail(r, format!("facet {f} has negative index {v}")));
                                        }
                                        poly.push(v as usize);
                                    }
                                }
                            }
                        }
                    }
                    r.end_record().map_err(|m| fail(r, m))?;
                    if poly.len() < 3 {
                        return Err(fail(r, format!("facet {f} has {} vertices", poly.len())));
                    }
                    polygons.push(poly);
                }
            }
            _ => {
                for _ in 0..el.count {
                    for p in &el.props {
                        match p {
                            Property::Scalar { ty, .. } => {
                                r.scalar(*ty).map_err(|m| fail(r, m))?;
                            }
                            Property::List { count, item, .. } => {
                                let n = r.scalar(*count).map_err(|m| fail(r, m))? as usize;
                                for _ in 0..n {
                                    r.scalar(*item).map_err(|m| fail(r, m))?;
                                }
                            }
                        }
                    }
                    r.end_record().map_err(|m| fail(r, m))?;
                }
            }
        }
    }
    if !saw_vertex {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            location: "header".into(),
            message: "no vertex element".into(),
        });
    }
    let n = positions.len();
    for (f, poly) in polygons.iter().enumerate() {
        if let Some(&bad) = poly.iter().find(|&&v| v >= n) {
            return Err(Error::IndexOutOfRange {
                facet: f,
                index: bad,
                vertex_count: n,
            });
        }
    }
    Ok(RawMesh {
        positions,
        colors,
        polygons,
    })
}

pub(crate) fn write(mesh: &TriMesh, w: &mut impl Write, encoding: PlyEncoding) -> std::io::Result<()> {
    let fmt = match encoding {
        PlyEncoding::Ascii => "ascii",
        PlyEncoding::BinaryLittleEndian => "binary_little_endian",
        PlyEncoding::BinaryBigEndian => "binary_big_endian",
    };
    writeln!(w, "ply")?;
    writeln!(w, "format {fmt} 1.0")?;
    writeln!(w, "comment meshforge")?;
    writeln!(w, "element vertex {}", mesh.vertex_count())?;
    writeln!(w, "property float x")?;
    writeln!(w, "property float y")?;
    writeln!(w, "property float z")?;
    if mesh.colors.is_some() {
        writeln!(w, "property uchar red")?;
        writeln!(w, "property uchar green")?;
        writeln!(w, "property uchar blue")?;
    }
    writeln!(w, "element face {}", mesh.facet_count())?;
    writeln!(w, "property list uchar int vertex_indices")?;
    writeln!(w, "end_header")?;

    let be = encoding == PlyEncoding::BinaryBigEndian;
    let f32b = |v: f32| if be { v.to_be_bytes() } else { v.to_le_bytes() };
    let i32b = |v: i32| if be { v.to_be_bytes() } else { v.to_le_bytes() };
    for (i, p) in mesh.positions.iter().enumerate() {
        let c = mesh.colors.as_ref().map(|c| c[i].map(color_to_u8));
        if encoding == PlyEncoding::Ascii {
            write!(w, "{} {} {}", p[0] as f32, p[1] as f32, p[2] as f32)?;
            if let Some(c) = c {
                write!(w, " {} {} {}", c[0], c[1], c[2])?;
            }
            writeln!(w)?;
        } else {
            for v in p {
                w.write_all(&f32b(*v as f32))?;
            }
            if let Some(c) = c {
                w.write_all(&c)?;
            }
        }
    }
    for t in &mesh.facets {
        if encoding == PlyEncoding::Ascii {
            writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
        } else {
            w.write_all(&[3u8])?;
            for &v in t {
                w.write_all(&i32b(v as i32))?;
            }
        }
    }
    Ok(())
}
