//! Seeded synthetic scenes for extraction experiments.

use nalgebra::{UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::splat_model::GaussianSplat;

use super::PointCloud;

/// A flat surface covered by opaque splats plus faint splats floating above it.
#[derive(Debug, Clone)]
pub struct FantasyScene {
    pub splats: Vec<GaussianSplat>,
    /// Dense samples of the true surface.
    pub ground_truth: PointCloud,
    /// Number of leading splats that lie on the surface.
    pub on_surface: usize,
}

/// Side length of the square surface patch at `z = 0`.
pub const SURFACE_SIDE: f64 = 10.0;

/// `on_surface` flat splats tile the square `[0, 10]²` at `z = 0` with opacity `alpha_on`;
/// `off_surface` round splats float at height `offset` with opacity `alpha_off`. Ground
/// truth is a 100 × 100 grid on the square.
pub fn fantasy_scene(
    on_surface: usize,
    off_surface: usize,
    alpha_on: f64,
    alpha_off: f64,
    offset: f64,
    seed: u64,
) -> FantasyScene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = (on_surface as f64).sqrt().ceil().max(1.0) as usize;
    let cell = SURFACE_SIDE / side as f64;
    let mut splats = Vec::with_capacity(on_surface + off_surface);
    for i in 0..on_surface {
        let (gx, gy) = ((i % side) as f64, (i / side) as f64);
        let yaw = rng.random::<f64>() * std::f64::consts::TAU;
        splats.push(GaussianSplat::new(
            Vector3::new((gx + 0.5) * cell, (gy + 0.5) * cell, 0.0),
            Vector3::new(0.5 * cell, 0.4 * cell, 0.01 * cell),
            UnitQuaternion::from_euler_angles(0.0, 0.0, yaw),
            alpha_on,
        ));
    }
    for _ in 0..off_surface {
        let x = rng.random::<f64>() * SURFACE_SIDE;
        let y = rng.random::<f64>() * SURFACE_SIDE;
        splats.push(GaussianSplat::new(
            Vector3::new(x, y, offset),
            Vector3::repeat(0.5 * cell),
            UnitQuaternion::identity(),
            alpha_off,
        ));
    }
    let n = 100;
    let step = SURFACE_SIDE / n as f64;
    let points = (0..n * n)
        .map(|k| {
            Vector3::new(
                ((k % n) as f64 + 0.5) * step,
                ((k / n) as f64 + 0.5) * step,
                0.0,
            )
        })
        .collect();
    FantasyScene {
        splats,
        ground_truth: PointCloud::from_points(points),
        on_surface,
    }
}
