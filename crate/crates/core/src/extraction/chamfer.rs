use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::reduce::chunked_sum;

use super::{ExtractionError, KdTree, PointCloud};

/// Whether distances enter the statistics plain or squared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChamferMode {
    #[default]
    Unsquared,
    Squared,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChamferStats {
    pub mean: f64,
    /// Population variance.
    pub var: f64,
    /// Number of pooled distances, `|a| + |b|`.
    pub count: usize,
}

fn stats(d: &[f64]) -> ChamferStats {
    let n = d.len() as f64;
    let mean = chunked_sum(d, |_, v| *v) / n;
    let var = chunked_sum(d, |_, v| (v - mean) * (v - mean)) / n;
    ChamferStats {
        mean,
        var,
        count: d.len(),
    }
}

fn finish(d2: f64, mode: ChamferMode) -> f64 {
    match mode {
        ChamferMode::Unsquared => d2.sqrt(),
        ChamferMode::Squared => d2,
    }
}

fn one_way(from: &PointCloud, to: &KdTree, mode: ChamferMode) -> Vec<f64> {
    from.points
        .par_iter()
        .map(|p| finish(to.nearest(p).expect("non-empty tree").1, mode))
        .collect()
}

fn check(a: &PointCloud, b: &PointCloud) -> Result<(), ExtractionError> {
    if a.is_empty() || b.is_empty() {
        Err(ExtractionError::EmptyCloud)
    } else {
        Ok(())
    }
}

/// Symmetric Chamfer statistics: every point of `a` and of `b` contributes its distance to
/// the nearest point of the other cloud, and mean and variance are taken over that pooled
/// set.
pub fn chamfer(
    a: &PointCloud,
    b: &PointCloud,
    mode: ChamferMode,
) -> Result<ChamferStats, ExtractionError> {
    check(a, b)?;
    let (ta, tb) = rayon::join(|| KdTree::build(&a.points), || KdTree::build(&b.points));
    let mut d = one_way(a, &tb, mode);
    d.extend(one_way(b, &ta, mode));
    Ok(stats(&d))
}

/// Quadratic reference for [`chamfer`].
pub fn chamfer_brute_force(
    a: &PointCloud,
    b: &PointCloud,
    mode: ChamferMode,
) -> Result<ChamferStats, ExtractionError> {
    check(a, b)?;
    let nn = |p: &nalgebra::Vector3<f64>, cloud: &PointCloud| {
        let best = cloud
            .points
            .iter()
            .map(|q| {
                let d = p - q;
                d.x * d.x + d.y * d.y + d.z * d.z
            })
            .fold(f64::INFINITY, f64::min);
        finish(best, mode)
    };
    let mut d: Vec<f64> = a.points.iter().map(|p| nn(p, b)).collect();
    d.extend(b.points.iter().map(|p| nn(p, a)));
    Ok(stats(&d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Rotation3, Vector3};
    use proptest::prelude::*;

    fn cloud(pts: &[[f64; 3]]) -> PointCloud {
        PointCloud::from_points(pts.iter().map(|p| Vector3::from(*p)).collect())
    }

    #[test]
    fn identity_and_single_pair() {
        let a = cloud(&[[0.0, 1.0, 2.0], [3.0, 4.0, 5.0]]);
        let s = chamfer(&a, &a, ChamferMode::Unsquared).unwrap();
        assert_eq!((s.mean, s.var), (0.0, 0.0));
        let s = chamfer(
            &cloud(&[[0.0; 3]]),
            &cloud(&[[1.0, 0.0, 0.0]]),
            ChamferMode::Unsquared,
        )
        .unwrap();
        assert_eq!((s.mean, s.var, s.count), (1.0, 0.0, 2));
        assert!(chamfer(&a, &PointCloud::default(), ChamferMode::Unsquared).is_err());
    }

    #[test]
    fn squared_mode() {
        let s = chamfer(
            &cloud(&[[0.0; 3]]),
            &cloud(&[[2.0, 0.0, 0.0]]),
            ChamferMode::Squared,
        )
        .unwrap();
        assert_eq!(s.mean, 4.0);
    }

    fn arb_cloud() -> impl Strategy<Value = PointCloud> {
        prop::collection::vec(prop::array::uniform3(-5.0f64..5.0), 1..60).prop_map(|p| cloud(&p))
    }

    proptest! {
        #[test]
        fn symmetric_and_rigid_invariant(a in arb_cloud(), b in arb_cloud(), angle in 0.0f64..6.0) {
            let ab = chamfer(&a, &b, ChamferMode::Unsquared).unwrap();
            let ba = chamfer(&b, &a, ChamferMode::Unsquared).unwrap();
            prop_assert!((ab.mean - ba.mean).abs() < 1e-12);
            prop_assert!((ab.var - ba.var).abs() < 1e-12);
            let r = Rotation3::from_axis_angle(&Vector3::z_axis(), angle);
            let t = Vector3::new(1.0, -2.0, 0.5);
            let move_all = |c: &PointCloud| PointCloud::from_points(c.points.iter().map(|p| r * p + t).collect());
            let moved = chamfer(&move_all(&a), &move_all(&b), ChamferMode::Unsquared).unwrap();
            prop_assert!((moved.mean - ab.mean).abs() < 1e-9);
        }
    }
}
