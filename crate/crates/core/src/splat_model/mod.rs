//! Gaussian splat records: storage-domain values, activation into geometric form, and
//! camera projection.

mod camera;
mod ply;

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};
use thiserror::Error;

pub use camera::{
    load_cameras_json, parse_cameras_json, read_colmap_text, CameraEntry, CameraError, CameraModel,
    ColmapImage, Projection,
};
pub use ply::{
    canonical_property_names, parse_splat_ply, read_splat_ply, record_size, write_splat_ply,
    PlyError, PropertyType,
};
pub(crate) use ply::{read_scalar, PlyHeader};

/// Number of higher-order spherical-harmonic coefficients stored for degree 3.
pub const SH_REST_LEN: usize = 45;

/// Splat parameters exactly as stored in a 3DGS PLY file.
#[derive(Debug, Clone, PartialEq)]
pub struct SplatRaw {
    pub position: [f32; 3],
    /// Unused by 3DGS but part of the file layout.
    pub normal: [f32; 3],
    pub sh_dc: [f32; 3],
    pub sh_rest: Option<Box<[f32; SH_REST_LEN]>>,
    pub opacity_logit: f32,
    pub log_scales: [f32; 3],
    /// Quaternion in `(w, x, y, z)` order, not necessarily normalized.
    pub rotation: [f32; 4],
}

impl SplatRaw {
    pub fn is_finite(&self) -> bool {
        self.values().all(|(_, v)| v.is_finite())
    }

    /// Every stored scalar paired with its PLY property name, in canonical file order.
    pub(crate) fn values(
        &self,
    ) -> impl Iterator<Item = (std::borrow::Cow<'static, str>, f32)> + '_ {
        use std::borrow::Cow;
        let head = [
            ("x", self.position[0]),
            ("y", self.position[1]),
            ("z", self.position[2]),
            ("nx", self.normal[0]),
            ("ny", self.normal[1]),
            ("nz", self.normal[2]),
            ("f_dc_0", self.sh_dc[0]),
            ("f_dc_1", self.sh_dc[1]),
            ("f_dc_2", self.sh_dc[2]),
        ]
        .into_iter()
        .map(|(n, v)| (Cow::Borrowed(n), v));
        let rest = self
            .sh_rest
            .iter()
            .flat_map(|r| r.iter().enumerate())
            .map(|(i, &v)| (Cow::Owned(format!("f_rest_{i}")), v));
        let tail = [
            ("opacity", self.opacity_logit),
            ("scale_0", self.log_scales[0]),
            ("scale_1", self.log_scales[1]),
            ("scale_2", self.log_scales[2]),
            ("rot_0", self.rotation[0]),
            ("rot_1", self.rotation[1]),
            ("rot_2", self.rotation[2]),
            ("rot_3", self.rotation[3]),
        ]
        .into_iter()
        .map(|(n, v)| (Cow::Borrowed(n), v));
        head.chain(rest).chain(tail)
    }
}

/// An ordered collection of raw splats.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SplatCloud {
    pub splats: Vec<SplatRaw>,
}

impl SplatCloud {
    pub fn new(splats: Vec<SplatRaw>) -> Self {
        Self { splats }
    }

    pub fn count(&self) -> usize {
        self.splats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.splats.is_empty()
    }

    /// Activates every splat, failing on the first degenerate rotation.
    pub fn activate_all(&self) -> Result<Vec<GaussianSplat>, SplatError> {
        self.splats
            .iter()
            .enumerate()
            .map(|(i, s)| activate(s).map_err(|e| e.at(i)))
            .collect()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SplatError {
    #[error("splat {index}: quaternion norm {norm:e} is below 1e-12")]
    DegenerateRotation { index: usize, norm: f64 },
    #[error("splat {index}: non-finite parameters")]
    NonFinite { index: usize },
}

impl SplatError {
    fn at(self, index: usize) -> Self {
        match self {
            SplatError::DegenerateRotation { norm, .. } => {
                SplatError::DegenerateRotation { index, norm }
            }
            SplatError::NonFinite { .. } => SplatError::NonFinite { index },
        }
    }
}

/// A splat in geometric form.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSplat {
    pub mean: Vector3<f64>,
    pub scales: Vector3<f64>,
    pub rotation: UnitQuaternion<f64>,
    pub opacity: f64,
    pub covariance: Matrix3<f64>,
}

impl GaussianSplat {
    /// Builds an activated splat from geometric parameters; `opacity` is clamped into the
    /// open interval `(0, 1)`.
    pub fn new(
        mean: Vector3<f64>,
        scales: Vector3<f64>,
        rotation: UnitQuaternion<f64>,
        opacity: f64,
    ) -> Self {
        let covariance = covariance_from(&rotation, &scales);
        Self {
            mean,
            scales,
            rotation,
            opacity: clamp_open_unit(opacity),
            covariance,
        }
    }

    /// Inverse of [`activate`], rounded to the f32 storage domain.
    pub fn to_raw(&self) -> SplatRaw {
        let q = self.rotation.quaternion();
        let logit = (self.opacity / (1.0 - self.opacity)).ln();
        SplatRaw {
            position: [self.mean.x as f32, self.mean.y as f32, self.mean.z as f32],
            normal: [0.0; 3],
            sh_dc: [0.0; 3],
            sh_rest: None,
            opacity_logit: logit as f32,
            log_scales: [
                self.scales.x.ln() as f32,
                self.scales.y.ln() as f32,
                self.scales.z.ln() as f32,
            ],
            rotation: [q.w as f32, q.i as f32, q.j as f32, q.k as f32],
        }
    }

    pub fn aspect_ratios(&self) -> (f64, f64) {
        aspect_ratios(self)
    }
}

fn covariance_from(rotation: &UnitQuaternion<f64>, scales: &Vector3<f64>) -> Matrix3<f64> {
    let r = rotation.to_rotation_matrix().into_inner();
    let s2 = Matrix3::from_diagonal(&scales.component_mul(scales));
    let cov = r * s2 * r.transpose();
    // symmetrize away rounding asymmetry
    (cov + cov.transpose()) * 0.5
}

fn clamp_open_unit(p: f64) -> f64 {
    p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// Numerically stable logistic function.
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Converts storage-domain parameters into a [`GaussianSplat`]:
/// `scales = exp(log_scales)`, `opacity = logistic(logit)`, normalized rotation and
/// `Σ = R·diag(s²)·Rᵀ`.
pub fn activate(raw: &SplatRaw) -> Result<GaussianSplat, SplatError> {
    if !raw.is_finite() {
        return Err(SplatError::NonFinite { index: 0 });
    }
    let [w, x, y, z] = raw.rotation.map(f64::from);
    let norm = (w * w + x * x + y * y + z * z).sqrt();
    if norm < 1e-12 {
        return Err(SplatError::DegenerateRotation { index: 0, norm });
    }
    let rotation = UnitQuaternion::from_quaternion(Quaternion::new(w, x, y, z));
    let scales = Vector3::from(raw.log_scales.map(|l| f64::from(l).exp()));
    let mean = Vector3::from(raw.position.map(f64::from));
    Ok(GaussianSplat::new(
        mean,
        scales,
        rotation,
        logistic(f64::from(raw.opacity_logit)),
    ))
}

/// Axis indices ordered by ascending scale: `[min, mid, max]`. Ties keep index order, so
/// the lower axis index takes the smaller role.
pub fn sorted_axes(values: &[f64; 3]) -> [usize; 3] {
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    idx
}

/// Shape ratios on sorted scales: `(s_max / s_min, s_mid / s_min)`.
///
/// The smallest scale is treated as the disk normal, which makes both ratios invariant
/// to axis permutation and rotation.
pub fn aspect_ratios(splat: &GaussianSplat) -> (f64, f64) {
    let s = [splat.scales.x, splat.scales.y, splat.scales.z];
    let [lo, mid, hi] = sorted_axes(&s);
    (s[hi] / s[lo], s[mid] / s[lo])
}

/// Projects a world point through `camera`. See [`CameraModel::project`].
pub fn project_mean(camera: &CameraModel, point: &Vector3<f64>) -> Projection {
    camera.project(point)
}
