use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;

use crate::splat_model::{read_scalar, PlyError, PlyHeader};

use super::{ExtractionError, PointCloud};

/// Binary little-endian PLY with `x, y, z` as float32.
pub fn write_points_ply(pc: &PointCloud) -> Vec<u8> {
    let mut header = String::new();
    let _ = write!(
        header,
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\nend_header\n",
        pc.len()
    );
    let mut out = header.into_bytes();
    out.reserve(pc.len() * 12);
    for p in &pc.points {
        for v in p.iter() {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    out
}

/// Reads `x, y, z` from a binary little-endian PLY of any scalar types; other properties
/// are ignored.
pub fn parse_points_ply(bytes: &[u8]) -> Result<PointCloud, ExtractionError> {
    let header = PlyHeader::parse(bytes)?;
    let decls = ["x", "y", "z"].map(|name| {
        header
            .find(name)
            .ok_or_else(|| PlyError::MalformedHeader(format!("missing property `{name}`")))
    });
    let [x, y, z] = decls;
    let (x, y, z) = (x?, y?, z?);
    let body = header.body(bytes)?;
    let mut points = Vec::with_capacity(header.vertex_count);
    for (i, rec) in body
        .chunks_exact(header.stride.max(1))
        .take(header.vertex_count)
        .enumerate()
    {
        let p = Vector3::new(
            read_scalar(rec, x),
            read_scalar(rec, y),
            read_scalar(rec, z),
        );
        if !p.iter().all(|v| v.is_finite()) {
            return Err(ExtractionError::NonFinitePoint(i));
        }
        points.push(p);
    }
    Ok(PointCloud::from_points(points))
}

/// Whitespace- or comma-separated text with x, y, z in the first three columns. Blank lines
/// and lines starting with `#` are skipped.
pub fn parse_xyz(text: &str) -> Result<PointCloud, ExtractionError> {
    let mut points = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty());
        let mut xyz = [0.0f64; 3];
        for v in xyz.iter_mut() {
            let tok = cols.next().ok_or_else(|| ExtractionError::Parse {
                line: n + 1,
                message: "expected three coordinates".into(),
            })?;
            *v = tok.parse().map_err(|_| ExtractionError::Parse {
                line: n + 1,
                message: format!("bad number `{tok}`"),
            })?;
        }
        let p = Vector3::from(xyz);
        if !p.iter().all(|v| v.is_finite()) {
            return Err(ExtractionError::NonFinitePoint(points.len()));
        }
        points.push(p);
    }
    Ok(PointCloud::from_points(points))
}

/// Loads a point file: PLY when the content starts with the `ply` magic, XYZ text otherwise.
pub fn load_points(path: &Path) -> Result<PointCloud, ExtractionError> {
    let bytes = std::fs::read(path)?;
    if bytes.starts_with(b"ply") {
        parse_points_ply(&bytes)
    } else {
        let text = String::from_utf8(bytes).map_err(|_| ExtractionError::Parse {
            line: 0,
            message: "point file is neither PLY nor UTF-8 text".into(),
        })?;
        parse_xyz(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ply_round_trip_at_f32() {
        let pc = PointCloud::from_points(vec![
            Vector3::new(1.5, -2.0, 3.25),
            Vector3::new(0.1, 0.2, 0.3),
        ]);
        let bytes = write_points_ply(&pc);
        let back = parse_points_ply(&bytes).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back.points[0], pc.points[0]);
        assert_eq!(back.points[1].x, 0.1f32 as f64);
        assert_eq!(write_points_ply(&back), bytes);
    }

    #[test]
    fn splat_ply_reads_as_points() {
        let header = "ply\nformat binary_little_endian 1.0\nelement vertex 1\nproperty double z\nproperty uchar red\nproperty double y\nproperty double x\nend_header\n";
        let mut bytes = header.as_bytes().to_vec();
        bytes.extend_from_slice(&3.0f64.to_le_bytes());
        bytes.push(200);
        bytes.extend_from_slice(&2.0f64.to_le_bytes());
        bytes.extend_from_slice(&1.0f64.to_le_bytes());
        let pc = parse_points_ply(&bytes).unwrap();
        assert_eq!(pc.points, vec![Vector3::new(1.0, 2.0, 3.0)]);
    }

    #[test]
    fn xyz_text() {
        let pc = parse_xyz("# lidar\n1 2 3\n\n4,5,6, 255 0 0\n").unwrap();
        assert_eq!(
            pc.points,
            vec![Vector3::new(1.0, 2.0, 3.0), Vector3::new(4.0, 5.0, 6.0)]
        );
        assert!(matches!(
            parse_xyz("1 2\n"),
            Err(ExtractionError::Parse { line: 1, .. })
        ));
    }
}
