//! Point extraction from splat clouds and Chamfer evaluation.
//!
//! Two extractors are provided: [`mean_extraction`] (one point per splat at its mean) and
//! [`sample_points`], which first picks splats by opacity and then draws points inside each
//! picked Gaussian.

mod chamfer;
pub mod fixtures;
mod io;
mod kdtree;
mod report;
mod sampling;

use nalgebra::{Cholesky, Matrix3, Vector3};
use thiserror::Error;

use crate::splat_model::{GaussianSplat, PlyError};

pub use chamfer::{chamfer, chamfer_brute_force, ChamferMode, ChamferStats};
pub use io::{load_points, parse_points_ply, parse_xyz, write_points_ply};
pub use kdtree::KdTree;
pub use report::{report, ChamferReport};
pub use sampling::{opacity_multinomial, sample_points, AliasTable, SampleWeighting, RNG_CHUNK};

#[derive(Debug, Error)]
pub enum ExtractionError {
    #[error("covariance of splat {index} is not positive definite")]
    SingularCovariance { index: usize },
    #[error("all splat opacities are zero")]
    AllZeroOpacity,
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("empty splat cloud")]
    EmptySplats,
    #[error("bounding box min {min:?} exceeds max {max:?}")]
    BadBox { min: [f64; 3], max: [f64; 3] },
    #[error("min_alpha must lie in [0, 1] (got {0})")]
    BadMinAlpha(f64),
    #[error("live mask has length {got}, expected {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("non-finite point {0}")]
    NonFinitePoint(usize),
    #[error(transparent)]
    Ply(#[from] PlyError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Extracted points with optional provenance.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vector3<f64>>,
    /// Index of the splat each point came from.
    pub source_index: Option<Vec<usize>>,
    pub colors: Option<Vec<[f64; 3]>>,
}

impl PointCloud {
    pub fn from_points(points: Vec<Vector3<f64>>) -> Self {
        Self {
            points,
            source_index: None,
            colors: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Keeps the points at `keep`, in order, along with their attributes.
    fn select(&self, keep: &[usize]) -> Self {
        Self {
            points: keep.iter().map(|&i| self.points[i]).collect(),
            source_index: self
                .source_index
                .as_ref()
                .map(|s| keep.iter().map(|&i| s[i]).collect()),
            colors: self
                .colors
                .as_ref()
                .map(|c| keep.iter().map(|&i| c[i]).collect()),
        }
    }
}

/// Axis-aligned box, closed on both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    min: Vector3<f64>,
    max: Vector3<f64>,
}

impl Aabb {
    pub fn new(min: Vector3<f64>, max: Vector3<f64>) -> Result<Self, ExtractionError> {
        if (0..3).all(|k| min[k] <= max[k]) {
            Ok(Self { min, max })
        } else {
            Err(ExtractionError::BadBox {
                min: min.into(),
                max: max.into(),
            })
        }
    }

    pub fn min(&self) -> &Vector3<f64> {
        &self.min
    }

    pub fn max(&self) -> &Vector3<f64> {
        &self.max
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|k| self.min[k] <= p[k] && p[k] <= self.max[k])
    }
}

/// Points inside `bbox` (boundary included), order preserved.
pub fn crop(pc: &PointCloud, bbox: &Aabb) -> PointCloud {
    let keep: Vec<usize> = (0..pc.len())
        .filter(|&i| bbox.contains(&pc.points[i]))
        .collect();
    pc.select(&keep)
}

/// Cached Cholesky factors for repeated density queries.
#[derive(Debug, Clone)]
pub struct DensityField {
    terms: Vec<(Vector3<f64>, Matrix3<f64>, f64)>,
}

pub(crate) fn cholesky_factor(
    splat: &GaussianSplat,
    index: usize,
) -> Result<Matrix3<f64>, ExtractionError> {
    Cholesky::new(splat.covariance)
        .map(|c| c.l())
        .ok_or(ExtractionError::SingularCovariance { index })
}

impl DensityField {
    pub fn new(splats: &[GaussianSplat]) -> Result<Self, ExtractionError> {
        if splats.is_empty() {
            return Err(ExtractionError::EmptySplats);
        }
        let terms = splats
            .iter()
            .enumerate()
            .map(|(i, s)| Ok((s.mean, cholesky_factor(s, i)?, s.opacity)))
            .collect::<Result<_, ExtractionError>>()?;
        Ok(Self { terms })
    }

    /// `Σ αᵢ·exp(−½ (x−μᵢ)ᵀ Σᵢ⁻¹ (x−μᵢ))`, without the Gaussian normalizer.
    pub fn eval(&self, x: &Vector3<f64>) -> f64 {
        self.terms
            .iter()
            .map(|(mean, l, alpha)| {
                let y = l
                    .solve_lower_triangular(&(x - mean))
                    .expect("factor has a positive diagonal");
                alpha * (-0.5 * y.norm_squared()).exp()
            })
            .sum()
    }
}

/// Opacity-weighted, unnormalized Gaussian mixture density at `x`.
pub fn density(splats: &[GaussianSplat], x: &Vector3<f64>) -> Result<f64, ExtractionError> {
    Ok(DensityField::new(splats)?.eval(x))
}

fn check_live(live: Option<&[bool]>, n: usize) -> Result<(), ExtractionError> {
    match live {
        Some(m) if m.len() != n => Err(ExtractionError::LengthMismatch {
            got: m.len(),
            expected: n,
        }),
        _ => Ok(()),
    }
}

/// One point per live splat with opacity at least `min_alpha`, placed at the mean.
pub fn mean_extraction(
    splats: &[GaussianSplat],
    live: Option<&[bool]>,
    min_alpha: f64,
) -> Result<PointCloud, ExtractionError> {
    if !(0.0..=1.0).contains(&min_alpha) {
        return Err(ExtractionError::BadMinAlpha(min_alpha));
    }
    check_live(live, splats.len())?;
    let keep: Vec<usize> = (0..splats.len())
        .filter(|&i| live.is_none_or(|m| m[i]) && splats[i].opacity >= min_alpha)
        .collect();
    Ok(PointCloud {
        points: keep.iter().map(|&i| splats[i].mean).collect(),
        source_index: Some(keep),
        colors: None,
    })
}
