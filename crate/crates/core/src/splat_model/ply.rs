//! Binary little-endian PLY in the layout written by the reference 3DGS trainer.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use super::{SplatCloud, SplatRaw, SH_REST_LEN};

#[derive(Debug, Error)]
pub enum PlyError {
    #[error("malformed PLY header: {0}")]
    MalformedHeader(String),
    #[error("unsupported PLY format `{0}` (only binary_little_endian 1.0 is accepted)")]
    UnsupportedFormat(String),
    #[error("truncated PLY body: expected {expected} bytes, found {actual}")]
    TruncatedBody { expected: usize, actual: usize },
    #[error("non-finite value in property `{property}` of vertex {index}")]
    NonFiniteValue { index: usize, property: String },
    #[error("splat {index} has a different spherical-harmonic layout than splat 0")]
    InconsistentLayout { index: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropertyType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl PropertyType {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return None,
        })
    }

    pub fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct PropertyDecl {
    pub name: String,
    pub ty: PropertyType,
    pub offset: usize,
}

/// The vertex element of a parsed header.
#[derive(Debug, Clone)]
pub(crate) struct PlyHeader {
    pub vertex_count: usize,
    pub properties: Vec<PropertyDecl>,
    pub stride: usize,
    /// Byte offset of the first vertex record.
    pub body_offset: usize,
}

impl PlyHeader {
    pub fn parse(bytes: &[u8]) -> Result<Self, PlyError> {
        const END: &[u8] = b"end_header";
        let end = bytes
            .windows(END.len())
            .position(|w| w == END)
            .ok_or_else(|| PlyError::MalformedHeader("missing end_header".into()))?;
        let mut body_offset = end + END.len();
        match bytes.get(body_offset) {
            Some(b'\r') if bytes.get(body_offset + 1) == Some(&b'\n') => body_offset += 2,
            Some(b'\n') => body_offset += 1,
            _ => {
                return Err(PlyError::MalformedHeader(
                    "end_header not terminated".into(),
                ))
            }
        }
        let text = std::str::from_utf8(&bytes[..end])
            .map_err(|_| PlyError::MalformedHeader("header is not UTF-8".into()))?;
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        if lines.next() != Some("ply") {
            return Err(PlyError::MalformedHeader("missing `ply` magic".into()));
        }

        let mut format_seen = false;
        let mut vertex_count = None;
        let mut in_vertex = false;
        let mut properties: Vec<PropertyDecl> = Vec::new();
        let mut stride = 0;
        for line in lines {
            let tokens: Vec<&str> = line.split_whitespace().collect();
            match tokens.as_slice() {
                ["format", fmt, version] => {
                    if *fmt != "binary_little_endian" || *version != "1.0" {
                        return Err(PlyError::UnsupportedFormat(format!("{fmt} {version}")));
                    }
                    format_seen = true;
                }
                ["format", ..] => return Err(PlyError::UnsupportedFormat(line.to_string())),
                ["comment", ..] | ["obj_info", ..] => {}
                ["element", name, count] => {
                    if vertex_count.is_some() {
                        // later elements are ignored along with their data
                        in_vertex = false;
                        log::warn!("ignoring PLY element `{name}` after vertex data");
                        continue;
                    }
                    if *name != "vertex" {
                        return Err(PlyError::MalformedHeader(format!(
                            "element `{name}` precedes the vertex element"
                        )));
                    }
                    let n = count.parse::<usize>().map_err(|_| {
                        PlyError::MalformedHeader(format!("bad vertex count `{count}`"))
                    })?;
                    vertex_count = Some(n);
                    in_vertex = true;
                }
                ["property", "list", ..] if in_vertex => {
                    return Err(PlyError::MalformedHeader(
                        "list properties are not supported on vertices".into(),
                    ))
                }
                ["property", ty, name] if in_vertex => {
                    let ty = PropertyType::parse(ty).ok_or_else(|| {
                        PlyError::MalformedHeader(format!("unknown property type `{ty}`"))
                    })?;
                    if properties.iter().any(|p| p.name == *name) {
                        return Err(PlyError::MalformedHeader(format!(
                            "duplicate property `{name}`"
                        )));
                    }
                    properties.push(PropertyDecl {
                        name: name.to_string(),
                        ty,
                        offset: stride,
                    });
                    stride += ty.size();
                }
                ["property", ..] => {}
                _ => {
                    return Err(PlyError::MalformedHeader(format!(
                        "unrecognized header line `{line}`"
                    )))
                }
            }
        }
        if !format_seen {
            return Err(PlyError::MalformedHeader("missing format line".into()));
        }
        let vertex_count = vertex_count
            .ok_or_else(|| PlyError::MalformedHeader("missing vertex element".into()))?;
        Ok(Self {
            vertex_count,
            properties,
            stride,
            body_offset,
        })
    }

    pub fn find(&self, name: &str) -> Option<&PropertyDecl> {
        self.properties.iter().find(|p| p.name == name)
    }

    /// Returns the vertex body, checking its length.
    pub fn body<'a>(&self, bytes: &'a [u8]) -> Result<&'a [u8], PlyError> {
        let expected = self.vertex_count * self.stride;
        let body = &bytes[self.body_offset..];
        if body.len() < expected {
            return Err(PlyError::TruncatedBody {
                expected,
                actual: body.len(),
            });
        }
        Ok(&body[..expected])
    }

    fn require_f32(&self, name: &str) -> Result<usize, PlyError> {
        let decl = self
            .find(name)
            .ok_or_else(|| PlyError::MalformedHeader(format!("missing property `{name}`")))?;
        if decl.ty != PropertyType::F32 {
            return Err(PlyError::MalformedHeader(format!(
                "property `{name}` must be float"
            )));
        }
        Ok(decl.offset)
    }
}

/// Reads property `decl` of one record as f64.
pub(crate) fn read_scalar(record: &[u8], decl: &PropertyDecl) -> f64 {
    let b = &record[decl.offset..decl.offset + decl.ty.size()];
    match decl.ty {
        PropertyType::I8 => b[0] as i8 as f64,
        PropertyType::U8 => b[0] as f64,
        PropertyType::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
        PropertyType::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
        PropertyType::I32 => i32::from_le_bytes(b.try_into().unwrap()) as f64,
        PropertyType::U32 => u32::from_le_bytes(b.try_into().unwrap()) as f64,
        PropertyType::F32 => f32::from_le_bytes(b.try_into().unwrap()) as f64,
        PropertyType::F64 => f64::from_le_bytes(b.try_into().unwrap()),
    }
}

#[inline]
fn read_f32(record: &[u8], offset: usize) -> f32 {
    f32::from_le_bytes(record[offset..offset + 4].try_into().unwrap())
}

/// Property names of the canonical layout, in file order.
pub fn canonical_property_names(with_sh_rest: bool) -> Vec<String> {
    let mut names: Vec<String> = [
        "x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    if with_sh_rest {
        names.extend((0..SH_REST_LEN).map(|i| format!("f_rest_{i}")));
    }
    names.extend(
        [
            "opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    names
}

/// Bytes per vertex in the canonical layout.
pub fn record_size(with_sh_rest: bool) -> usize {
    canonical_property_names(with_sh_rest).len() * 4
}

/// Parses a 3DGS binary PLY. Properties may appear in any order; unknown properties are
/// skipped with a warning. Normals are optional and default to zero.
pub fn parse_splat_ply(bytes: &[u8]) -> Result<SplatCloud, PlyError> {
    let header = PlyHeader::parse(bytes)?;

    let off3 = |names: [&str; 3]| -> Result<[usize; 3], PlyError> {
        Ok([
            header.require_f32(names[0])?,
            header.require_f32(names[1])?,
            header.require_f32(names[2])?,
        ])
    };
    let position = off3(["x", "y", "z"])?;
    let normal = if ["nx", "ny", "nz"].iter().all(|n| header.find(n).is_some()) {
        Some(off3(["nx", "ny", "nz"])?)
    } else {
        None
    };
    let sh_dc = off3(["f_dc_0", "f_dc_1", "f_dc_2"])?;
    let rest_present = (0..SH_REST_LEN)
        .filter(|i| header.find(&format!("f_rest_{i}")).is_some())
        .count();
    let sh_rest = match rest_present {
        0 => None,
        SH_REST_LEN => Some(
            (0..SH_REST_LEN)
                .map(|i| header.require_f32(&format!("f_rest_{i}")))
                .collect::<Result<Vec<_>, _>>()?,
        ),
        n => {
            return Err(PlyError::MalformedHeader(format!(
                "expected 0 or {SH_REST_LEN} f_rest properties, found {n}"
            )))
        }
    };
    let opacity = header.require_f32("opacity")?;
    let scales = off3(["scale_0", "scale_1", "scale_2"])?;
    let rotation = [
        header.require_f32("rot_0")?,
        header.require_f32("rot_1")?,
        header.require_f32("rot_2")?,
        header.require_f32("rot_3")?,
    ];

    let known: BTreeSet<String> = canonical_property_names(true).into_iter().collect();
    let unknown: Vec<&str> = header
        .properties
        .iter()
        .filter(|p| !known.contains(&p.name))
        .map(|p| p.name.as_str())
        .collect();
    if !unknown.is_empty() {
        log::warn!("skipping unknown PLY properties: {}", unknown.join(", "));
    }

    let body = header.body(bytes)?;
    let mut splats = Vec::with_capacity(header.vertex_count);
    for (index, rec) in body.chunks_exact(header.stride.max(1)).enumerate() {
        let r3 = |o: [usize; 3]| o.map(|o| read_f32(rec, o));
        let raw = SplatRaw {
            position: r3(position),
            normal: normal.map(r3).unwrap_or([0.0; 3]),
            sh_dc: r3(sh_dc),
            sh_rest: sh_rest.as_ref().map(|offs| {
                let mut v = Box::new([0.0f32; SH_REST_LEN]);
                for (dst, &o) in v.iter_mut().zip(offs) {
                    *dst = read_f32(rec, o);
                }
                v
            }),
            opacity_logit: read_f32(rec, opacity),
            log_scales: r3(scales),
            rotation: rotation.map(|o| read_f32(rec, o)),
        };
        if let Some((name, _)) = raw.values().find(|(_, v)| !v.is_finite()) {
            return Err(PlyError::NonFiniteValue {
                index,
                property: name.into_owned(),
            });
        }
        splats.push(raw);
        if splats.len() == header.vertex_count {
            break;
        }
    }
    Ok(SplatCloud { splats })
}

pub fn read_splat_ply(path: &Path) -> Result<SplatCloud, PlyError> {
    parse_splat_ply(&std::fs::read(path)?)
}

/// Serializes `cloud` in the canonical layout (f_rest included iff splat 0 carries it).
pub fn write_splat_ply(cloud: &SplatCloud) -> Result<Vec<u8>, PlyError> {
    let with_rest = cloud
        .splats
        .first()
        .map(|s| s.sh_rest.is_some())
        .unwrap_or(false);
    let names = canonical_property_names(with_rest);
    let mut header = String::new();
    header.push_str("ply\nformat binary_little_endian 1.0\n");
    let _ = writeln!(header, "element vertex {}", cloud.count());
    for name in &names {
        let _ = writeln!(header, "property float {name}");
    }
    header.push_str("end_header\n");

    let mut out = header.into_bytes();
    out.reserve(cloud.count() * names.len() * 4);
    for (index, splat) in cloud.splats.iter().enumerate() {
        if splat.sh_rest.is_some() != with_rest {
            return Err(PlyError::InconsistentLayout { index });
        }
        for (name, v) in splat.values() {
            if !v.is_finite() {
                return Err(PlyError::NonFiniteValue {
                    index,
                    property: name.into_owned(),
                });
            }
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}
