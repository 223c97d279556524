use std::collections::BTreeMap;

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::splat_model::{CameraModel, Projection, SplatCloud};

use super::{SemanticMask, SemanticsError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelPolicy {
    /// Labels from a single view only.
    PerView(usize),
    /// Mode over all views in which the splat mean lands inside the image.
    Majority,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelAssignment {
    /// One label per splat; 0 when unassigned.
    pub per_splat_label: Vec<u32>,
    /// Label votes per splat (majority policy only).
    pub vote_histograms: Option<Vec<BTreeMap<u32, u32>>>,
}

fn label_in_view(camera: &CameraModel, mask: &SemanticMask, point: &Vector3<f64>) -> Option<u32> {
    match camera.project(point) {
        Projection::Visible { pixel, .. } => {
            camera.pixel_index(&pixel).map(|(u, v)| mask.label_at(u, v))
        }
        Projection::Behind => None,
    }
}

/// Assigns a semantic label to every splat by projecting its mean into the masks.
pub fn assign_labels(
    cloud: &SplatCloud,
    cameras: &[CameraModel],
    masks: &[SemanticMask],
    policy: LabelPolicy,
) -> Result<LabelAssignment, SemanticsError> {
    let means: Vec<Vector3<f64>> = cloud
        .splats
        .iter()
        .map(|s| Vector3::from(s.position.map(f64::from)))
        .collect();
    assign_labels_to_points(&means, cameras, masks, policy)
}

/// [`assign_labels`] on bare points.
///
/// Majority ties resolve toward the lower label id; a point seen by no view gets 0.
/// Label-0 pixels count as votes.
pub fn assign_labels_to_points(
    points: &[Vector3<f64>],
    cameras: &[CameraModel],
    masks: &[SemanticMask],
    policy: LabelPolicy,
) -> Result<LabelAssignment, SemanticsError> {
    if cameras.len() != masks.len() {
        return Err(SemanticsError::PairingMismatch {
            cameras: cameras.len(),
            masks: masks.len(),
        });
    }
    for (c, m) in cameras.iter().zip(masks) {
        let cam_dims = (c.width as usize, c.height as usize);
        if cam_dims != m.labels.dims() {
            return Err(SemanticsError::DimensionMismatch(cam_dims, m.labels.dims()));
        }
    }
    match policy {
        LabelPolicy::PerView(view) => {
            let (camera, mask) =
                cameras
                    .get(view)
                    .zip(masks.get(view))
                    .ok_or(SemanticsError::ViewOutOfRange {
                        view,
                        views: cameras.len(),
                    })?;
            let per_splat_label = points
                .par_iter()
                .map(|p| label_in_view(camera, mask, p).unwrap_or(0))
                .collect();
            Ok(LabelAssignment {
                per_splat_label,
                vote_histograms: None,
            })
        }
        LabelPolicy::Majority => {
            let histograms: Vec<BTreeMap<u32, u32>> = points
                .par_iter()
                .map(|p| {
                    let mut votes = BTreeMap::new();
                    for (camera, mask) in cameras.iter().zip(masks) {
                        if let Some(l) = label_in_view(camera, mask, p) {
                            *votes.entry(l).or_insert(0) += 1;
                        }
                    }
                    votes
                })
                .collect();
            let per_splat_label = histograms
                .iter()
                .map(|votes| {
                    // BTreeMap iterates ascending, so the first maximum is the lowest id
                    let mut best = (0u32, 0u32);
                    for (&label, &n) in votes {
                        if n > best.1 {
                            best = (label, n);
                        }
                    }
                    best.0
                })
                .collect();
            Ok(LabelAssignment {
                per_splat_label,
                vote_histograms: Some(histograms),
            })
        }
    }
}
