//! From semantic masks to per-group shape targets.
//!
//! Edge pixels (Canny) are attributed to the mask label under them, summed per group
//! across images into a perplexity `P_j`, normalized by the group's pixel area into a
//! unit perplexity `p_j`, and mapped to target aspect ratios and an expected splat count.

mod canny;
mod labels;
mod mask;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::GrayImage;

pub use canny::{canny_edges, gaussian_blur, sobel, CannyParams, EdgeMap};
pub use labels::{assign_labels, assign_labels_to_points, LabelAssignment, LabelPolicy};
pub use mask::{decode_mask, load_mask, SemanticMask};

#[derive(Debug, Error)]
pub enum SemanticsError {
    #[error("unreadable mask image: {0}")]
    UnreadableImage(String),
    #[error("label {value} at ({x}, {y}) is outside [0, {label_count})")]
    LabelOutOfRange {
        x: usize,
        y: usize,
        value: u32,
        label_count: u32,
    },
    #[error("Canny thresholds must satisfy 0 < low < high (got low={low}, high={high})")]
    BadThresholds { low: f64, high: f64 },
    #[error("Canny sigma must be positive (got {0})")]
    BadSigma(f64),
    #[error("dimension mismatch: {0:?} vs {1:?}")]
    DimensionMismatch((usize, usize), (usize, usize)),
    #[error("shape constants must satisfy k1 > k2 > 0 and a_max > 1 (got k1={k1}, k2={k2}, a_max={a_max})")]
    BadConstants { k1: f64, k2: f64, a_max: f64 },
    #[error("{cameras} cameras but {masks} masks")]
    PairingMismatch { cameras: usize, masks: usize },
    #[error("view {view} out of range for {views} views")]
    ViewOutOfRange { view: usize, views: usize },
}

/// Edge pixels per mask label. Labels without edges are absent.
pub fn group_edge_counts(
    edges: &EdgeMap,
    mask: &SemanticMask,
) -> Result<BTreeMap<u32, u64>, SemanticsError> {
    if edges.edges.dims() != mask.labels.dims() {
        return Err(SemanticsError::DimensionMismatch(
            edges.edges.dims(),
            mask.labels.dims(),
        ));
    }
    let mut counts = BTreeMap::new();
    for (&e, &label) in edges.edges.as_slice().iter().zip(mask.labels.as_slice()) {
        if e {
            *counts.entry(label).or_insert(0) += 1;
        }
    }
    Ok(counts)
}

/// Pixel area per mask label.
pub fn label_pixel_counts(mask: &SemanticMask) -> BTreeMap<u32, u64> {
    let mut counts = BTreeMap::new();
    for &label in mask.labels.as_slice() {
        *counts.entry(label).or_insert(0) += 1;
    }
    counts
}

/// Edge and pixel counts of one image, keyed by label.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ImageGroupStats {
    pub image_id: String,
    pub edge_counts: BTreeMap<u32, u64>,
    pub pixel_counts: BTreeMap<u32, u64>,
}

/// Runs Canny on `image` and attributes its edges to the labels of `mask`.
pub fn measure_image(
    image_id: impl Into<String>,
    image: &GrayImage,
    mask: &SemanticMask,
    canny: &CannyParams,
) -> Result<ImageGroupStats, SemanticsError> {
    if image.dims() != mask.labels.dims() {
        return Err(SemanticsError::DimensionMismatch(
            image.dims(),
            mask.labels.dims(),
        ));
    }
    let edges = canny_edges(image, canny)?;
    Ok(ImageGroupStats {
        image_id: image_id.into(),
        edge_counts: group_edge_counts(&edges, mask)?,
        pixel_counts: label_pixel_counts(mask),
    })
}

/// Scene-level perplexity of one semantic group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupPerplexity {
    pub label: u32,
    /// `e_ij` for every image in which the group has pixels or edges.
    pub per_image_edges: BTreeMap<String, u64>,
    /// `P_j = Σ_i e_ij`.
    pub total_edges: u64,
    pub pixel_count: u64,
    /// `p_j = P_j / pixel_count`, 0 for an empty group.
    pub unit_perplexity: f64,
}

impl GroupPerplexity {
    /// True when the group covers no pixel in any image.
    pub fn is_empty(&self) -> bool {
        self.pixel_count == 0
    }
}

/// Sums per-image statistics into per-group perplexities. Label 0 ("no caption") is
/// skipped; labels listed in `declared` are reported even when absent from every image.
pub fn aggregate_perplexity(
    per_image: &[ImageGroupStats],
    declared: &[u32],
) -> Vec<GroupPerplexity> {
    let mut groups: BTreeMap<u32, GroupPerplexity> = BTreeMap::new();
    let entry = |groups: &mut BTreeMap<u32, GroupPerplexity>, label: u32| {
        groups.entry(label).or_insert_with(|| GroupPerplexity {
            label,
            per_image_edges: BTreeMap::new(),
            total_edges: 0,
            pixel_count: 0,
            unit_perplexity: 0.0,
        });
    };
    for &label in declared.iter().filter(|&&l| l != 0) {
        entry(&mut groups, label);
    }
    for img in per_image {
        for (&label, &n) in img.pixel_counts.iter().filter(|(&l, _)| l != 0) {
            entry(&mut groups, label);
            let g = groups.get_mut(&label).unwrap();
            g.pixel_count += n;
            g.per_image_edges.entry(img.image_id.clone()).or_insert(0);
        }
        for (&label, &e) in img.edge_counts.iter().filter(|(&l, _)| l != 0) {
            entry(&mut groups, label);
            let g = groups.get_mut(&label).unwrap();
            g.total_edges += e;
            *g.per_image_edges.entry(img.image_id.clone()).or_insert(0) += e;
        }
    }
    groups
        .into_values()
        .map(|mut g| {
            g.unit_perplexity = if g.pixel_count == 0 {
                0.0
            } else {
                g.total_edges as f64 / g.pixel_count as f64
            };
            g
        })
        .collect()
}

/// Free constants of the complexity-to-shape mapping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeConstants {
    pub k1: f64,
    pub k2: f64,
    pub a_max: f64,
    /// Splats per edge pixel; smaller for higher image overlap.
    pub kappa: f64,
}

impl Default for ShapeConstants {
    fn default() -> Self {
        Self {
            k1: 3.0,
            k2: 1.0,
            a_max: 50.0,
            kappa: 0.1,
        }
    }
}

impl ShapeConstants {
    pub fn validate(&self) -> Result<(), SemanticsError> {
        let ok = self.k2 > 0.0
            && self.k1 > self.k2
            && self.a_max > 1.0
            && self.k1.is_finite()
            && self.a_max.is_finite()
            && self.kappa > 0.0
            && self.kappa.is_finite();
        if ok {
            Ok(())
        } else {
            Err(SemanticsError::BadConstants {
                k1: self.k1,
                k2: self.k2,
                a_max: self.a_max,
            })
        }
    }
}

/// Target sorted aspect ratios for a group with unit perplexity `p`.
///
/// Raw targets are `1/(k1·p)` and `1/(k2·p)`; the larger pairs with `a1`. Both are
/// clamped to `[1, a_max]`, and an edge-free group (`p = 0`) gets `(a_max, a_max)`.
pub fn target_shape(p: f64, k1: f64, k2: f64, a_max: f64) -> Result<(f64, f64), SemanticsError> {
    if !(k2 > 0.0 && k1 > k2 && a_max > 1.0 && a_max.is_finite() && k1.is_finite()) || !(p >= 0.0) {
        return Err(SemanticsError::BadConstants { k1, k2, a_max });
    }
    if p == 0.0 {
        return Ok((a_max, a_max));
    }
    let small = 1.0 / (k1 * p);
    let large = 1.0 / (k2 * p);
    Ok((large.clamp(1.0, a_max), small.clamp(1.0, a_max)))
}

/// `N_j = round(kappa · P_j)`, at least 1 for a group with any edges.
///
/// # Panics
/// If `kappa` is not positive and finite.
pub fn expected_splat_count(total_edges: u64, kappa: f64) -> u64 {
    assert!(kappa > 0.0 && kappa.is_finite(), "kappa must be positive");
    if total_edges == 0 {
        return 0;
    }
    ((kappa * total_edges as f64).round() as u64).max(1)
}

/// A group's perplexity together with its shape targets and expected count.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupComplexity {
    pub perplexity: GroupPerplexity,
    pub target_a1: f64,
    pub target_a2: f64,
    pub expected_count: u64,
}

impl GroupComplexity {
    pub fn from_perplexity(
        perplexity: GroupPerplexity,
        constants: &ShapeConstants,
    ) -> Result<Self, SemanticsError> {
        constants.validate()?;
        let (target_a1, target_a2) = target_shape(
            perplexity.unit_perplexity,
            constants.k1,
            constants.k2,
            constants.a_max,
        )?;
        let expected_count = expected_splat_count(perplexity.total_edges, constants.kappa);
        Ok(Self {
            perplexity,
            target_a1,
            target_a2,
            expected_count,
        })
    }
}

/// One group entry of the complexity report JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub caption: Option<String>,
    #[serde(rename = "P")]
    pub total_edges: u64,
    pub pixel_count: u64,
    pub p: f64,
    pub target_a1: f64,
    pub target_a2: f64,
    pub expected_count: u64,
    #[serde(default)]
    pub per_image_edges: BTreeMap<String, u64>,
}

/// The complexity report: constants used plus one entry per label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub k1: f64,
    pub k2: f64,
    pub kappa: f64,
    pub a_max: f64,
    pub groups: BTreeMap<u32, GroupReport>,
}

impl ComplexityReport {
    pub fn new(
        constants: &ShapeConstants,
        groups: &[GroupComplexity],
        captions: &BTreeMap<u32, String>,
    ) -> Self {
        Self {
            k1: constants.k1,
            k2: constants.k2,
            kappa: constants.kappa,
            a_max: constants.a_max,
            groups: groups
                .iter()
                .map(|g| {
                    let p = &g.perplexity;
                    (
                        p.label,
                        GroupReport {
                            caption: captions.get(&p.label).cloned(),
                            total_edges: p.total_edges,
                            pixel_count: p.pixel_count,
                            p: p.unit_perplexity,
                            target_a1: g.target_a1,
                            target_a2: g.target_a2,
                            expected_count: g.expected_count,
                            per_image_edges: p.per_image_edges.clone(),
                        },
                    )
                })
                .collect(),
        }
    }

    /// Shape targets keyed by label.
    pub fn targets(&self) -> BTreeMap<u32, (f64, f64)> {
        self.groups
            .iter()
            .map(|(&l, g)| (l, (g.target_a1, g.target_a2)))
            .collect()
    }

    /// Sum of expected splat counts over all groups.
    pub fn expected_total(&self) -> u64 {
        self.groups.values().map(|g| g.expected_count).sum()
    }
}

/// Reads a captions JSON object mapping label id to caption.
pub fn load_captions(path: &Path) -> Result<BTreeMap<u32, String>, std::io::Error> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
}
