use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CameraError {
    #[error("rotation is not orthonormal (max |RᵀR − I| = {0:e})")]
    NotOrthonormal(f64),
    #[error("image dimensions must be positive, got {width}×{height}")]
    BadDimensions { width: u32, height: u32 },
    #[error("non-finite camera parameter")]
    NonFinite,
    #[error("{file}:{line}: {msg}")]
    Parse {
        file: String,
        line: usize,
        msg: String,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Pinhole intrinsics with world-to-camera extrinsics.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

/// Result of projecting a world point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projection {
    Visible { pixel: Vector2<f64>, depth: f64 },
    Behind,
}

impl CameraModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
    ) -> Result<Self, CameraError> {
        if width == 0 || height == 0 {
            return Err(CameraError::BadDimensions { width, height });
        }
        if ![fx, fy, cx, cy].iter().all(|v| v.is_finite())
            || !rotation.iter().all(|v| v.is_finite())
            || !translation.iter().all(|v| v.is_finite())
        {
            return Err(CameraError::NonFinite);
        }
        let dev = (rotation.transpose() * rotation - Matrix3::identity())
            .abs()
            .max();
        if dev > 1e-6 {
            return Err(CameraError::NotOrthonormal(dev));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            rotation,
            translation,
        })
    }

    /// `p_cam = R·p + t`; points with `p_cam.z <= 0` are [`Projection::Behind`]. The pixel
    /// is not bounds-checked, see [`CameraModel::pixel_index`].
    pub fn project(&self, point: &Vector3<f64>) -> Projection {
        let p = self.rotation * point + self.translation;
        if p.z <= 0.0 {
            return Projection::Behind;
        }
        Projection::Visible {
            pixel: Vector2::new(self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy),
            depth: p.z,
        }
    }

    /// Integer pixel containing `pixel`, if inside the image. Pixel `(i, j)` covers
    /// `[i, i+1) × [j, j+1)`.
    pub fn pixel_index(&self, pixel: &Vector2<f64>) -> Option<(usize, usize)> {
        let (u, v) = (pixel.x.floor(), pixel.y.floor());
        (u >= 0.0 && v >= 0.0 && u < self.width as f64 && v < self.height as f64)
            .then_some((u as usize, v as usize))
    }

    /// Camera centre in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }
}

/// One record of the cameras JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraEntry {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    /// Row-major world-to-camera rotation.
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_path: Option<String>,
}

impl CameraEntry {
    pub fn to_camera(&self) -> Result<CameraModel, CameraError> {
        CameraModel::new(
            self.fx,
            self.fy,
            self.cx,
            self.cy,
            self.width,
            self.height,
            Matrix3::from_row_slice(&self.rotation),
            Vector3::from(self.translation),
        )
    }

    pub fn from_camera(camera: &CameraModel, mask_path: Option<String>) -> Self {
        let r = camera.rotation;
        Self {
            fx: camera.fx,
            fy: camera.fy,
            cx: camera.cx,
            cy: camera.cy,
            width: camera.width,
            height: camera.height,
            rotation: [
                r[(0, 0)],
                r[(0, 1)],
                r[(0, 2)],
                r[(1, 0)],
                r[(1, 1)],
                r[(1, 2)],
                r[(2, 0)],
                r[(2, 1)],
                r[(2, 2)],
            ],
            translation: camera.translation.into(),
            mask_path,
        }
    }
}

pub fn parse_cameras_json(text: &str) -> Result<Vec<CameraEntry>, CameraError> {
    let entries: Vec<CameraEntry> = serde_json::from_str(text)?;
    for e in &entries {
        e.to_camera()?;
    }
    Ok(entries)
}

/// Loads a cameras JSON file, resolving each `mask_path` against `mask_root` (or the
/// JSON file's directory when `mask_root` is `None`).
pub fn load_cameras_json(
    path: &Path,
    mask_root: Option<&Path>,
) -> Result<Vec<(CameraModel, Option<PathBuf>)>, CameraError> {
    let entries = parse_cameras_json(&std::fs::read_to_string(path)?)?;
    let root = mask_root
        .map(Path::to_path_buf)
        .or_else(|| path.parent().map(Path::to_path_buf))
        .unwrap_or_default();
    entries
        .iter()
        .map(|e| Ok((e.to_camera()?, e.mask_path.as_ref().map(|m| root.join(m)))))
        .collect()
}

/// A registered image from a COLMAP text model.
#[derive(Debug, Clone, PartialEq)]
pub struct ColmapImage {
    pub image_id: u32,
    pub name: String,
    pub camera: CameraModel,
}

struct Intrinsics {
    width: u32,
    height: u32,
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
}

fn parse_err(file: &str, line: usize, msg: impl Into<String>) -> CameraError {
    CameraError::Parse {
        file: file.to_string(),
        line,
        msg: msg.into(),
    }
}

fn parse_num<T: std::str::FromStr>(file: &str, line: usize, tok: &str) -> Result<T, CameraError> {
    tok.parse()
        .map_err(|_| parse_err(file, line, format!("bad number `{tok}`")))
}

/// Reads COLMAP `cameras.txt` and `images.txt` (PINHOLE and SIMPLE_PINHOLE only).
pub fn read_colmap_text(
    cameras_txt: &str,
    images_txt: &str,
) -> Result<Vec<ColmapImage>, CameraError> {
    let mut intrinsics = std::collections::HashMap::new();
    for (i, line) in cameras_txt.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let t: Vec<&str> = line.split_whitespace().collect();
        let f = "cameras.txt";
        if t.len() < 4 {
            return Err(parse_err(
                f,
                i + 1,
                "expected CAMERA_ID MODEL WIDTH HEIGHT PARAMS",
            ));
        }
        let id: u32 = parse_num(f, i + 1, t[0])?;
        let width = parse_num(f, i + 1, t[2])?;
        let height = parse_num(f, i + 1, t[3])?;
        let params = t[4..]
            .iter()
            .map(|p| parse_num::<f64>(f, i + 1, p))
            .collect::<Result<Vec<_>, _>>()?;
        let intr = match (t[1], params.as_slice()) {
            ("PINHOLE", [fx, fy, cx, cy]) => Intrinsics {
                width,
                height,
                fx: *fx,
                fy: *fy,
                cx: *cx,
                cy: *cy,
            },
            ("SIMPLE_PINHOLE", [fl, cx, cy]) => Intrinsics {
                width,
                height,
                fx: *fl,
                fy: *fl,
                cx: *cx,
                cy: *cy,
            },
            (model, _) => {
                return Err(parse_err(
                    f,
                    i + 1,
                    format!("unsupported camera model `{model}` or wrong parameter count"),
                ))
            }
        };
        intrinsics.insert(id, intr);
    }

    let mut images = Vec::new();
    let mut skip_points_line = false;
    for (i, line) in images_txt.lines().enumerate() {
        if line.trim_start().starts_with('#') {
            continue;
        }
        if skip_points_line {
            skip_points_line = false;
            continue;
        }
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.is_empty() {
            continue;
        }
        let f = "images.txt";
        if t.len() < 10 {
            return Err(parse_err(
                f,
                i + 1,
                "expected IMAGE_ID QW QX QY QZ TX TY TZ CAMERA_ID NAME",
            ));
        }
        let image_id = parse_num(f, i + 1, t[0])?;
        let v = t[1..8]
            .iter()
            .map(|p| parse_num::<f64>(f, i + 1, p))
            .collect::<Result<Vec<_>, _>>()?;
        let camera_id: u32 = parse_num(f, i + 1, t[8])?;
        let intr = intrinsics
            .get(&camera_id)
            .ok_or_else(|| parse_err(f, i + 1, format!("unknown camera id {camera_id}")))?;
        let q = UnitQuaternion::from_quaternion(Quaternion::new(v[0], v[1], v[2], v[3]));
        let camera = CameraModel::new(
            intr.fx,
            intr.fy,
            intr.cx,
            intr.cy,
            intr.width,
            intr.height,
            q.to_rotation_matrix().into_inner(),
            Vector3::new(v[4], v[5], v[6]),
        )?;
        images.push(ColmapImage {
            image_id,
            name: t[9..].join(" "),
            camera,
        });
        skip_points_line = true;
    }
    Ok(images)
}
