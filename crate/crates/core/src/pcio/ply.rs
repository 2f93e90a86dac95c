//! PLY reader and writer for colored point clouds.
//!
//! Reads ASCII and binary little-endian files whose `vertex` element carries
//! `x y z` (any numeric type) and `red green blue` (`uchar`). Unknown vertex
//! properties are skipped. Writes `float` positions when every coordinate is
//! exactly representable in 32 bits and `double` otherwise, so binary files
//! always round-trip bit-exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{PcioError, PointCloud, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlyMode {
    Ascii,
    #[default]
    BinaryLe,
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
    fn parse(name: &str) -> Option<Self> {
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

    fn decode_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().expect("8 bytes")),
        }
    }

    fn parse_ascii(self, tok: &str) -> Option<f64> {
        match self {
            Scalar::F32 => tok.parse::<f32>().ok().map(f64::from),
            Scalar::F64 => tok.parse::<f64>().ok(),
            _ => tok.parse::<i64>().ok().map(|v| v as f64),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { name: String },
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Ascii,
    BinaryLe,
}

struct Header {
    format: Format,
    elements: Vec<Element>,
}

fn malformed(msg: impl Into<String>) -> PcioError {
    PcioError::MalformedHeader(msg.into())
}

fn read_header<R: BufRead>(reader: &mut R) -> Result<Header> {
    let mut line = String::new();
    let mut next_line = |reader: &mut R| -> Result<String> {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Err(malformed("unexpected end of file before end_header"));
        }
        Ok(line.trim_end_matches(['\r', '\n']).to_string())
    };

    if next_line(reader)?.trim() != "ply" {
        return Err(malformed("missing `ply` magic"));
    }
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let l = next_line(reader)?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        match toks.first().copied() {
            None | Some("comment") | Some("obj_info") => continue,
            Some("end_header") => break,
            Some("format") => {
                format = Some(match toks.get(1).copied() {
                    Some("ascii") => Format::Ascii,
                    Some("binary_little_endian") => Format::BinaryLe,
                    Some(other) => return Err(malformed(format!("unsupported format `{other}`"))),
                    None => return Err(malformed("format line without a value")),
                });
            }
            Some("element") => {
                let (name, count) = match toks.as_slice() {
                    [_, name, count] => (
                        name.to_string(),
                        count
                            .parse::<usize>()
                            .map_err(|_| malformed(format!("bad element count `{count}`")))?,
                    ),
                    _ => return Err(malformed(format!("bad element line `{l}`"))),
                };
                elements.push(Element {
                    name,
                    count,
                    props: Vec::new(),
                });
            }
            Some("property") => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| malformed("property before any element"))?;
                let prop = match toks.as_slice() {
                    [_, "list", _, _, name] => Property::List {
                        name: name.to_string(),
                    },
                    [_, ty, name] => Property::Scalar {
                        name: name.to_string(),
                        ty: Scalar::parse(ty).ok_or_else(|| PcioError::PropertyType {
                            name: name.to_string(),
                            ty: ty.to_string(),
                        })?,
                    },
                    _ => return Err(malformed(format!("bad property line `{l}`"))),
                };
                element.props.push(prop);
            }
            Some(other) => return Err(malformed(format!("unknown header keyword `{other}`"))),
        }
    }
    let format = format.ok_or_else(|| malformed("missing format line"))?;
    Ok(Header { format, elements })
}

struct VertexLayout {
    types: Vec<Scalar>,
    xyz: [usize; 3],
    rgb: [usize; 3],
}

fn vertex_layout(el: &Element) -> Result<VertexLayout> {
    let mut types = Vec::with_capacity(el.props.len());
    for p in &el.props {
        match p {
            Property::Scalar { ty, .. } => types.push(*ty),
            Property::List { name } => {
                return Err(PcioError::PropertyType {
                    name: name.clone(),
                    ty: "list".into(),
                })
            }
        }
    }
    let find = |want: &'static str| -> Result<usize> {
        el.props
            .iter()
            .position(|p| matches!(p, Property::Scalar { name, .. } if name == want))
            .ok_or(PcioError::MissingAttribute(want))
    };
    let xyz = [find("x")?, find("y")?, find("z")?];
    let rgb = [find("red")?, find("green")?, find("blue")?];
    for (&i, name) in rgb.iter().zip(["red", "green", "blue"]) {
        if types[i] != Scalar::U8 {
            return Err(PcioError::PropertyType {
                name: name.into(),
                ty: format!("{:?}", types[i]).to_lowercase(),
            });
        }
    }
    Ok(VertexLayout { types, xyz, rgb })
}

/// Parses a PLY stream into a [`PointCloud`].
pub fn read_ply<R: BufRead>(mut reader: R) -> Result<PointCloud> {
    let header = read_header(&mut reader)?;
    let vpos = header
        .elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| malformed("no vertex element"))?;
    let vertex = &header.elements[vpos];
    let layout = vertex_layout(vertex)?;
    let n = vertex.count;
    if n == 0 {
        return Err(PcioError::Empty);
    }

    // skip elements that precede the vertex block
    for el in &header.elements[..vpos] {
        match header.format {
            Format::Ascii => {
                let mut sink = String::new();
                for _ in 0..el.count {
                    sink.clear();
                    reader.read_line(&mut sink)?;
                }
            }
            Format::BinaryLe => {
                let mut row = 0usize;
                for p in &el.props {
                    match p {
                        Property::Scalar { ty, .. } => row += ty.size(),
                        Property::List { name } => {
                            return Err(malformed(format!(
                                "list property `{name}` before the vertex element"
                            )))
                        }
                    }
                }
                let mut skip = vec![0u8; row * el.count];
                reader.read_exact(&mut skip)?;
            }
        }
    }

    let mut positions = Vec::with_capacity(n);
    let mut colors = Vec::with_capacity(n);
    let mut values = vec![0.0f64; layout.types.len()];
    match header.format {
        Format::BinaryLe => {
            let row: usize = layout.types.iter().map(|t| t.size()).sum();
            let mut buf = vec![0u8; row];
            for v in 0..n {
                if let Err(e) = reader.read_exact(&mut buf) {
                    return Err(if e.kind() == std::io::ErrorKind::UnexpectedEof {
                        PcioError::Truncated {
                            expected: n,
                            read: v,
                        }
                    } else {
                        e.into()
                    });
                }
                let mut off = 0;
                for (slot, ty) in values.iter_mut().zip(&layout.types) {
                    *slot = ty.decode_le(&buf[off..off + ty.size()]);
                    off += ty.size();
                }
                push_vertex(&layout, &values, &mut positions, &mut colors, v)?;
            }
        }
        Format::Ascii => {
            let mut line = String::new();
            let mut v = 0;
            while v < n {
                line.clear();
                if reader.read_line(&mut line)? == 0 {
                    return Err(PcioError::Truncated {
                        expected: n,
                        read: v,
                    });
                }
                let toks: Vec<&str> = line.split_whitespace().collect();
                if toks.is_empty() {
                    continue;
                }
                if toks.len() != layout.types.len() {
                    return Err(PcioError::MalformedBody {
                        vertex: v,
                        reason: format!("expected {} values, found {}", layout.types.len(), toks.len()),
                    });
                }
                for ((slot, ty), tok) in values.iter_mut().zip(&layout.types).zip(&toks) {
                    *slot = ty.parse_ascii(tok).ok_or_else(|| PcioError::MalformedBody {
                        vertex: v,
                        reason: format!("cannot parse `{tok}` as {ty:?}"),
                    })?;
                }
                push_vertex(&layout, &values, &mut positions, &mut colors, v)?;
                v += 1;
            }
        }
    }
    PointCloud::new(positions, colors)
}

fn push_vertex(
    layout: &VertexLayout,
    values: &[f64],
    positions: &mut Vec<[f64; 3]>,
    colors: &mut Vec<[u8; 3]>,
    vertex: usize,
) -> Result<()> {
    positions.push(layout.xyz.map(|i| values[i]));
    let mut rgb = [0u8; 3];
    for (c, &i) in rgb.iter_mut().zip(&layout.rgb) {
        let v = values[i];
        if !(0.0..=255.0).contains(&v) {
            return Err(PcioError::MalformedBody {
                vertex,
                reason: format!("color value {v} outside [0,255]"),
            });
        }
        *c = v as u8;
    }
    colors.push(rgb);
    Ok(())
}

pub fn load_ply(path: impl AsRef<Path>) -> Result<PointCloud> {
    let file = File::open(path)?;
    read_ply(BufReader::new(file))
}

/// Serializes a cloud. Normals are not written.
pub fn write_ply<W: Write>(cloud: &PointCloud, mode: PlyMode, mut w: W) -> Result<()> {
    let single = cloud
        .positions()
        .iter()
        .all(|p| p.iter().all(|&c| (c as f32) as f64 == c));
    let ty = if single { "float" } else { "double" };
    let format = match mode {
        PlyMode::Ascii => "ascii",
        PlyMode::BinaryLe => "binary_little_endian",
    };
    writeln!(w, "ply")?;
    writeln!(w, "format {format} 1.0")?;
    writeln!(w, "element vertex {}", cloud.len())?;
    for axis in ["x", "y", "z"] {
        writeln!(w, "property {ty} {axis}")?;
    }
    for ch in ["red", "green", "blue"] {
        writeln!(w, "property uchar {ch}")?;
    }
    writeln!(w, "end_header")?;
    for (p, c) in cloud.positions().iter().zip(cloud.colors()) {
        match mode {
            PlyMode::Ascii => {
                if single {
                    writeln!(
                        w,
                        "{} {} {} {} {} {}",
                        p[0] as f32, p[1] as f32, p[2] as f32, c[0], c[1], c[2]
                    )?;
                } else {
                    writeln!(w, "{} {} {} {} {} {}", p[0], p[1], p[2], c[0], c[1], c[2])?;
                }
            }
            PlyMode::BinaryLe => {
                for &v in p {
                    if single {
                        w.write_all(&(v as f32).to_le_bytes())?;
                    } else {
                        w.write_all(&v.to_le_bytes())?;
                    }
                }
                w.write_all(c)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_ply(cloud: &PointCloud, path: impl AsRef<Path>, mode: PlyMode) -> Result<()> {
    let file = File::create(path)?;
    write_ply(cloud, mode, BufWriter::new(file))
}
