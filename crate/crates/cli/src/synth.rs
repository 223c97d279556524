//! Seeded synthetic scene: a textured ground plane with a box on it, faint splats floating
//! above, four oblique cameras, ray-cast label masks and shaded images.

use std::path::PathBuf;

use anyhow::{Context, Result};
use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use splatgeom_core::extraction::{write_points_ply, PointCloud};
use splatgeom_core::grid::{GrayImage, Grid};
use splatgeom_core::semantics::SemanticMask;
use splatgeom_core::splat_model::{
    write_splat_ply, CameraEntry, CameraModel, SplatCloud, SplatRaw,
};

use crate::Outcome;

const GROUND: u32 = 1;
const BOX: u32 = 2;
const EXTENT: f64 = 10.0;
const BOX_MIN: [f64; 3] = [3.5, 3.5, 0.0];
const BOX_MAX: [f64; 3] = [6.5, 6.5, 2.0];
const CHECKER: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOptions {
    pub out: PathBuf,
    pub seed: u64,
    pub width: u32,
    pub height: u32,
    /// Ground splats per side of the grid.
    pub ground_grid: usize,
    pub distractors: usize,
}

impl SynthOptions {
    pub fn new(out: PathBuf, seed: u64) -> Self {
        Self {
            out,
            seed,
            width: 160,
            height: 120,
            ground_grid: 32,
            distractors: 40,
        }
    }
}

struct Hit {
    label: u32,
    shade: f64,
}

fn cast(origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<Hit> {
    let mut best: Option<(f64, Hit)> = None;
    // box, slab method; the entry axis picks the face
    let (mut t0, mut t1, mut axis) = (0.0f64, f64::INFINITY, usize::MAX);
    let mut inside = true;
    for k in 0..3 {
        if dir[k].abs() < 1e-15 {
            if origin[k] < BOX_MIN[k] || origin[k] > BOX_MAX[k] {
                inside = false;
            }
            continue;
        }
        let a = (BOX_MIN[k] - origin[k]) / dir[k];
        let b = (BOX_MAX[k] - origin[k]) / dir[k];
        let (near, far) = if a < b { (a, b) } else { (b, a) };
        if near > t0 {
            t0 = near;
            axis = k;
        }
        t1 = t1.min(far);
    }
    if inside && t0 <= t1 && axis != usize::MAX {
        let shade = match axis {
            2 => 0.8,
            0 => 0.55,
            _ => 0.4,
        };
        best = Some((t0, Hit { label: BOX, shade }));
    }
    if dir.z < 0.0 {
        let t = -origin.z / dir.z;
        let p = origin + dir * t;
        let on_plane = (0.0..=EXTENT).contains(&p.x) && (0.0..=EXTENT).contains(&p.y);
        if on_plane && best.as_ref().is_none_or(|(tb, _)| t < *tb) {
            let cell = (p.x / CHECKER).floor() as i64 + (p.y / CHECKER).floor() as i64;
            let shade = if cell.rem_euclid(2) == 0 { 0.0 } else { 1.0 };
            best = Some((
                t,
                Hit {
                    label: GROUND,
                    shade,
                },
            ));
        }
    }
    best.map(|(_, h)| h)
}

fn look_at(
    eye: Vector3<f64>,
    target: Vector3<f64>,
    width: u32,
    height: u32,
) -> Result<CameraModel> {
    let forward = (target - eye).normalize();
    let right = forward.cross(&Vector3::z()).normalize();
    let down = forward.cross(&right);
    let r = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
    let f = 0.85 * width as f64;
    Ok(CameraModel::new(
        f,
        f,
        width as f64 / 2.0,
        height as f64 / 2.0,
        width,
        height,
        r,
        -(r * eye),
    )?)
}

fn render(camera: &CameraModel) -> Result<(SemanticMask, GrayImage)> {
    let (w, h) = (camera.width as usize, camera.height as usize);
    let origin = camera.center();
    let rt = camera.rotation.transpose();
    let mut labels = Grid::filled(w, h, 0u32);
    let mut image = GrayImage::filled(w, h, 0.05);
    for y in 0..h {
        for x in 0..w {
            let ray = Vector3::new(
                (x as f64 + 0.5 - camera.cx) / camera.fx,
                (y as f64 + 0.5 - camera.cy) / camera.fy,
                1.0,
            );
            if let Some(hit) = cast(&origin, &(rt * ray)) {
                *labels.get_mut(x, y) = hit.label;
                *image.get_mut(x, y) = hit.shade;
            }
        }
    }
    Ok((SemanticMask::new(labels, 3)?, image))
}

fn random_splat(rng: &mut ChaCha8Rng, position: Vector3<f64>, alpha: f64) -> SplatRaw {
    let q: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
    let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-6);
    SplatRaw {
        position: [position.x as f32, position.y as f32, position.z as f32],
        normal: [0.0; 3],
        sh_dc: std::array::from_fn(|_| rng.random_range(-0.5..0.5) as f32),
        sh_rest: None,
        opacity_logit: (alpha / (1.0 - alpha)).ln() as f32,
        log_scales: std::array::from_fn(|_| rng.random_range(0.03f64..0.15).ln() as f32),
        rotation: q.map(|v| (v / norm) as f32),
    }
}

fn in_footprint(x: f64, y: f64) -> bool {
    x > BOX_MIN[0] && x < BOX_MAX[0] && y > BOX_MIN[1] && y < BOX_MAX[1]
}

fn scene_splats(opts: &SynthOptions) -> Vec<SplatRaw> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut splats = Vec::new();
    let g = opts.ground_grid;
    let cell = EXTENT / g as f64;
    for j in 0..g {
        for i in 0..g {
            let x = (i as f64 + rng.random_range(0.2..0.8)) * cell;
            let y = (j as f64 + rng.random_range(0.2..0.8)) * cell;
            if in_footprint(x, y) {
                continue;
            }
            let alpha = rng.random_range(0.6..0.98);
            splats.push(random_splat(&mut rng, Vector3::new(x, y, 0.0), alpha));
        }
    }
    // box top and four sides on a 0.5 grid
    let steps = |lo: f64, hi: f64| {
        let n = ((hi - lo) / 0.5).round() as usize;
        (0..n).map(move |k| lo + (k as f64 + 0.5) * (hi - lo) / n as f64)
    };
    let mut box_points = Vec::new();
    for x in steps(BOX_MIN[0], BOX_MAX[0]) {
        for y in steps(BOX_MIN[1], BOX_MAX[1]) {
            box_points.push(Vector3::new(x, y, BOX_MAX[2]));
        }
    }
    for z in steps(BOX_MIN[2], BOX_MAX[2]) {
        for t in steps(BOX_MIN[0], BOX_MAX[0]) {
            box_points.push(Vector3::new(t, BOX_MIN[1], z));
            box_points.push(Vector3::new(t, BOX_MAX[1], z));
            box_points.push(Vector3::new(BOX_MIN[0], t, z));
            box_points.push(Vector3::new(BOX_MAX[0], t, z));
        }
    }
    for p in box_points {
        let alpha = rng.random_range(0.6..0.98);
        splats.push(random_splat(&mut rng, p, alpha));
    }
    for _ in 0..opts.distractors {
        let p = Vector3::new(
            rng.random_range(0.0..EXTENT),
            rng.random_range(0.0..EXTENT),
            rng.random_range(3.0..5.0),
        );
        splats.push(random_splat(&mut rng, p, 0.05));
    }
    splats
}

fn ground_truth() -> PointCloud {
    let step = 0.1;
    let n = (EXTENT / step) as usize;
    let mut pts = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let (x, y) = ((i as f64 + 0.5) * step, (j as f64 + 0.5) * step);
            if !in_footprint(x, y) {
                pts.push(Vector3::new(x, y, 0.0));
            }
        }
    }
    let grid = |lo: f64, hi: f64| {
        let m = ((hi - lo) / step).round() as usize;
        (0..m).map(move |k| lo + (k as f64 + 0.5) * step)
    };
    for x in grid(BOX_MIN[0], BOX_MAX[0]) {
        for y in grid(BOX_MIN[1], BOX_MAX[1]) {
            pts.push(Vector3::new(x, y, BOX_MAX[2]));
        }
    }
    for z in grid(BOX_MIN[2], BOX_MAX[2]) {
        for t in grid(BOX_MIN[0], BOX_MAX[0]) {
            pts.push(Vector3::new(t, BOX_MIN[1], z));
            pts.push(Vector3::new(t, BOX_MAX[1], z));
            pts.push(Vector3::new(BOX_MIN[0], t, z));
            pts.push(Vector3::new(BOX_MAX[0], t, z));
        }
    }
    PointCloud::from_points(pts)
}

/// Writes `splats.ply`, `cameras.json`, `masks/`, `images/`, `ground_truth.ply` and
/// `captions.json` under `opts.out`. The bundle depends only on the options.
pub fn cmd_synth(opts: &SynthOptions) -> Result<Outcome> {
    let out = &opts.out;
    for dir in [out.clone(), out.join("masks"), out.join("images")] {
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let splats = SplatCloud::new(scene_splats(opts));
    std::fs::write(out.join("splats.ply"), write_splat_ply(&splats)?)?;

    let target = Vector3::new(EXTENT / 2.0, EXTENT / 2.0, 0.5);
    let mut entries = Vec::new();
    for k in 0..4 {
        let theta = std::f64::consts::FRAC_PI_4 + k as f64 * std::f64::consts::FRAC_PI_2;
        let eye = target + Vector3::new(9.0 * theta.cos(), 9.0 * theta.sin(), 8.0);
        let camera = look_at(eye, target, opts.width, opts.height)?;
        let (mask, image) = render(&camera)?;
        let name = format!("view_{k:03}.png");
        mask.save_png(&out.join("masks").join(&name))?;
        image.save_png(&out.join("images").join(&name))?;
        entries.push(CameraEntry::from_camera(
            &camera,
            Some(format!("masks/{name}")),
        ));
    }
    std::fs::write(
        out.join("cameras.json"),
        serde_json::to_string_pretty(&entries)? + "\n",
    )?;
    let gt = ground_truth();
    std::fs::write(out.join("ground_truth.ply"), write_points_ply(&gt))?;
    let captions = json!({ GROUND.to_string(): "ground", BOX.to_string(): "box" });
    std::fs::write(
        out.join("captions.json"),
        serde_json::to_string_pretty(&captions)? + "\n",
    )?;

    let json = json!({
        "out": out,
        "seed": opts.seed,
        "splats": splats.count(),
        "views": entries.len(),
        "ground_truth_points": gt.len(),
    });
    Ok(Outcome {
        text: format!(
            "synth: {} splats, {} views, {} ground-truth points in {}\n",
            splats.count(),
            entries.len(),
            gt.len(),
            out.display()
        ),
        json,
    })
}
