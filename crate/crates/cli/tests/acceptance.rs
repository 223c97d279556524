//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and exits non-zero
//! if any failed or overran its time budget.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use splatgeom_core::extraction::{
    chamfer, chamfer_brute_force, fixtures, mean_extraction, sample_points, ChamferMode,
    PointCloud, SampleWeighting,
};
use splatgeom_core::semantics::{target_shape, CannyParams};
use splatgeom_core::shape_training::{
    dssim, fit_shapes, gc_loss, l1, prune, prune_schedule, ssim, ssim_window, total_loss,
    FitOptions, LossWeights, PenaltyConfig, ResidualSpace, TrainState,
};
use splatgeom_core::spectrum::fixtures::square_corpus;
use splatgeom_core::spectrum::{
    dft2, edge_energy_correlation, highpass_energy, parseval_relative_error,
};
use splatgeom_core::splat_model::{
    parse_splat_ply, sorted_axes, write_splat_ply, GaussianSplat, SplatCloud, SplatRaw, SH_REST_LEN,
};
use splatgeom_core::{Grid, RgbImage};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check, u64);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn finite_f32(rng: &mut ChaCha8Rng) -> f32 {
    loop {
        let v = f32::from_bits(rng.random());
        if v.is_finite() {
            return v;
        }
    }
}

fn ply_round_trip() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for case in 0..1000 {
        let n = rng.random_range(0..40);
        let with_rest = rng.random_bool(0.5);
        let splats = (0..n)
            .map(|_| SplatRaw {
                position: std::array::from_fn(|_| finite_f32(&mut rng)),
                normal: std::array::from_fn(|_| finite_f32(&mut rng)),
                sh_dc: std::array::from_fn(|_| finite_f32(&mut rng)),
                sh_rest: with_rest.then(|| {
                    Box::new(std::array::from_fn::<f32, SH_REST_LEN, _>(|_| {
                        finite_f32(&mut rng)
                    }))
                }),
                opacity_logit: finite_f32(&mut rng),
                log_scales: std::array::from_fn(|_| finite_f32(&mut rng)),
                rotation: std::array::from_fn(|_| finite_f32(&mut rng)),
            })
            .collect();
        let cloud = SplatCloud::new(splats);
        let bytes = write_splat_ply(&cloud).map_err(|e| format!("case {case}: {e}"))?;
        let back = parse_splat_ply(&bytes).map_err(|e| format!("case {case}: {e}"))?;
        ensure(back == cloud, || {
            format!("case {case}: parsed cloud differs")
        })?;
        let again = write_splat_ply(&back).map_err(|e| e.to_string())?;
        ensure(again == bytes, || format!("case {case}: rewrite differs"))?;
    }
    let reference = include_bytes!("../../core/tests/data/reference_3dgs.ply");
    let cloud = parse_splat_ply(reference).map_err(|e| e.to_string())?;
    ensure(cloud.count() == 16, || {
        format!("reference file: {} splats", cloud.count())
    })?;
    Ok("1000 clouds bit-exact, reference file has 16 splats".into())
}

type GcConfig = (Vec<[f64; 3]>, Vec<u32>, BTreeMap<u32, (f64, f64)>);

fn random_gc_config(rng: &mut ChaCha8Rng, n: usize) -> GcConfig {
    let mut ls = Vec::with_capacity(n);
    while ls.len() < n {
        let s: [f64; 3] = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
        // stay away from sort ties, where the loss is not differentiable
        if (0..3).all(|i| (0..i).all(|j| (s[i] - s[j]).abs() > 1e-3)) {
            ls.push(s);
        }
    }
    let labels = (0..n).map(|_| rng.random_range(0..4)).collect();
    let targets = (1..4)
        .map(|l| {
            let a1 = rng.random_range(1.0..50.0);
            (l, (a1, rng.random_range(1.0..=a1)))
        })
        .collect();
    (ls, labels, targets)
}

fn gradient_check() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for case in 0..100 {
        let penalty = PenaltyConfig {
            residual: if case % 2 == 0 {
                ResidualSpace::LogRatio
            } else {
                ResidualSpace::Ratio
            },
            ..PenaltyConfig::default()
        };
        let (ls, labels, targets) = random_gc_config(&mut rng, 16);
        let eval = |x: &[[f64; 3]]| {
            gc_loss(x, &labels, None, &targets, &penalty).map_err(|e| e.to_string())
        };
        let out = eval(&ls)?;
        for i in 0..ls.len() {
            for k in 0..3 {
                let mut plus = ls.clone();
                let mut minus = ls.clone();
                plus[i][k] += h;
                minus[i][k] -= h;
                let fd = (eval(&plus)?.loss - eval(&minus)?.loss) / (2.0 * h);
                let an = out.grad[i][k];
                let scale = an.abs().max(fd.abs());
                if scale > 1e-10 {
                    worst = worst.max((an - fd).abs() / scale);
                }
            }
        }
    }
    ensure(worst < 1e-4, || format!("max relative error {worst:.3e}"))?;
    Ok(format!(
        "max relative error {worst:.2e} over 100 configurations"
    ))
}

fn shape_convergence() -> Check {
    let (k1, k2, a_max) = (3.0, 1.0, 50.0);
    let edgy = target_shape(0.1, k1, k2, a_max).map_err(|e| e.to_string())?;
    let flat = target_shape(0.0, k1, k2, a_max).map_err(|e| e.to_string())?;
    ensure(
        (edgy.0 - 10.0).abs() < 1e-12 && (edgy.1 - 10.0 / 3.0).abs() < 1e-12,
        || format!("target for p=0.1 is {edgy:?}"),
    )?;
    ensure(flat == (a_max, a_max), || {
        format!("target for p=0 is {flat:?}")
    })?;
    let targets = BTreeMap::from([(1, edgy), (2, flat)]);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 60;
    let splats: Vec<SplatRaw> = (0..n)
        .map(|_| {
            GaussianSplat::new(
                Vector3::from(std::array::from_fn(|_| rng.random_range(-5.0..5.0))),
                Vector3::from(std::array::from_fn(|_| rng.random_range(0.05..0.5))),
                UnitQuaternion::from_euler_angles(rng.random(), rng.random(), rng.random()),
                rng.random_range(0.1..0.9),
            )
            .to_raw()
        })
        .collect();
    // every fifth splat stays unlabeled
    let labels: Vec<u32> = (0..n)
        .map(|i| if i % 5 == 4 { 0 } else { 1 + (i % 2) as u32 })
        .collect();
    let opts = FitOptions {
        lr: 0.01,
        iters: 2000,
        penalty: PenaltyConfig::default(),
        schedule: None,
    };
    let out = fit_shapes(&SplatCloud::new(splats), &labels, &targets, &opts)
        .map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for (s, l) in out.cloud.splats.iter().zip(&labels) {
        let Some(&(t1, t2)) = targets.get(l) else {
            continue;
        };
        let sc = s.log_scales.map(|v| f64::from(v).exp());
        let [lo, mid, hi] = sorted_axes(&sc);
        worst = worst
            .max((sc[hi] / sc[lo] / t1 - 1.0).abs())
            .max((sc[mid] / sc[lo] / t2 - 1.0).abs());
    }
    ensure(worst < 0.05, || {
        format!("worst ratio deviation {:.2}%", 100.0 * worst)
    })?;
    Ok(format!(
        "worst ratio deviation {:.3}% after 2000 iterations",
        100.0 * worst
    ))
}

fn naive_dft(data: &[Complex64], w: usize, h: usize, inverse: bool) -> Vec<Complex64> {
    let sign = if inverse { 1.0 } else { -1.0 };
    let norm = if inverse { 1.0 / (w * h) as f64 } else { 1.0 };
    let mut out = vec![Complex64::new(0.0, 0.0); w * h];
    for v in 0..h {
        for u in 0..w {
            let mut acc = Complex64::new(0.0, 0.0);
            for y in 0..h {
                for x in 0..w {
                    let phase = sign
                        * std::f64::consts::TAU
                        * ((u * x) as f64 / w as f64 + (v * y) as f64 / h as f64);
                    acc += data[y * w + x] * Complex64::from_polar(1.0, phase);
                }
            }
            out[v * w + u] = acc * norm;
        }
    }
    out
}

/// Signed frequency of bin `k`, from the signed integer index so that bins lying exactly on
/// a threshold round the same way every time.
fn freq(k: usize, n: usize) -> f64 {
    let signed = if 2 * k <= n {
        k as i64
    } else {
        k as i64 - n as i64
    };
    signed as f64 / n as f64
}

fn parseval_and_highpass() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (w, h) = (rng.random_range(1..=70), rng.random_range(1..=70));
        let img = Grid::from_fn(w, h, |_, _| rng.random_range(-1.0..1.0));
        worst = worst.max(parseval_relative_error(&img));
    }
    ensure(worst < 1e-9, || {
        format!("Parseval relative error {worst:.3e}")
    })?;

    // high-pass oracle: zero the low band of a direct DFT, invert, measure spatial energy
    let mut worst_hp = 0.0f64;
    for _ in 0..20 {
        let (w, h) = (rng.random_range(4..=18), rng.random_range(4..=18));
        let img = Grid::from_fn(w, h, |_, _| rng.random_range(0.0..1.0));
        let spec = dft2(&img);
        let input: Vec<Complex64> = img
            .as_slice()
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        let coeffs = naive_dft(&input, w, h, false);
        for t in [0.05, 0.1, 0.25, 0.4] {
            let masked: Vec<Complex64> = coeffs
                .iter()
                .enumerate()
                .map(|(i, &c)| {
                    if freq(i % w, w).hypot(freq(i / w, h)) >= t {
                        c
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                })
                .collect();
            let oracle: f64 = naive_dft(&masked, w, h, true)
                .iter()
                .map(|c| c.norm_sqr())
                .sum();
            let got = highpass_energy(&spec, t).map_err(|e| e.to_string())?;
            let err = if oracle == 0.0 {
                got.abs()
            } else {
                (got - oracle).abs() / oracle
            };
            worst_hp = worst_hp.max(err);
        }
    }
    ensure(worst_hp < 1e-6, || {
        format!("high-pass relative error {worst_hp:.3e}")
    })?;
    Ok(format!(
        "Parseval error {worst:.2e}, high-pass error {worst_hp:.2e}"
    ))
}

fn edge_energy() -> Check {
    let corpus = square_corpus(50, 256);
    let r = edge_energy_correlation(&corpus, 0.1, &CannyParams::default())
        .map_err(|e| e.to_string())?;
    ensure(r > 0.9, || format!("r = {r:.4}"))?;
    Ok(format!("r = {r:.5} on 50 squares"))
}

fn sampling_statistics() -> Check {
    let splats = vec![
        GaussianSplat::new(
            Vector3::new(1.0, -2.0, 0.5),
            Vector3::new(0.5, 1.0, 2.0),
            UnitQuaternion::from_euler_angles(0.3, -0.4, 1.1),
            0.9,
        ),
        GaussianSplat::new(
            Vector3::new(10.0, 0.0, 0.0),
            Vector3::new(1.5, 0.3, 0.8),
            UnitQuaternion::from_euler_angles(-1.0, 0.2, 0.5),
            0.1,
        ),
    ];
    let n = 100_000;
    let pc =
        sample_points(&splats, None, n, 11, SampleWeighting::Alpha).map_err(|e| e.to_string())?;
    let src = pc.source_index.as_ref().ok_or("no source indices")?;
    let mut details = Vec::new();
    for (i, (s, share)) in splats.iter().zip([0.9, 0.1]).enumerate() {
        let pts: Vec<Vector3<f64>> = pc
            .points
            .iter()
            .zip(src)
            .filter(|(_, &j)| j == i)
            .map(|(p, _)| *p)
            .collect();
        let count = pts.len() as f64;
        let sd = (n as f64 * share * (1.0 - share)).sqrt();
        let z = (count - share * n as f64) / sd;
        ensure(z.abs() <= 3.0, || {
            format!("splat {i}: share z-score {z:.2}")
        })?;
        let m = pts.iter().sum::<Vector3<f64>>() / count;
        let cov = pts
            .iter()
            .map(|p| (p - m) * (p - m).transpose())
            .sum::<Matrix3<f64>>()
            / (count - 1.0);
        let rel = (cov - s.covariance).norm() / s.covariance.norm();
        ensure(rel < 0.05, || {
            format!("splat {i}: covariance off by {:.2}%", 100.0 * rel)
        })?;
        details.push(format!("z={z:.2} cov {:.2}%", 100.0 * rel));
    }
    Ok(details.join(", "))
}

fn fantasy_mitigation() -> Check {
    const HIERARCHICAL_GOLDEN: f64 = 0.05898532901523933;
    const MEAN_GOLDEN: f64 = 0.16438592109877792;
    let scene = fixtures::fantasy_scene(900, 100, 0.9, 0.05, 5.0, 7);
    let sampled = sample_points(&scene.splats, None, 10_000, 7, SampleWeighting::Alpha)
        .map_err(|e| e.to_string())?;
    let means = mean_extraction(&scene.splats, None, 0.0).map_err(|e| e.to_string())?;
    let h = chamfer(&sampled, &scene.ground_truth, ChamferMode::Unsquared)
        .map_err(|e| e.to_string())?;
    let m =
        chamfer(&means, &scene.ground_truth, ChamferMode::Unsquared).map_err(|e| e.to_string())?;
    let ratio = m.mean / h.mean;
    ensure(ratio >= 2.0, || format!("ratio {ratio:.3}"))?;
    ensure(
        (h.mean - HIERARCHICAL_GOLDEN).abs() <= 1e-12 * HIERARCHICAL_GOLDEN,
        || format!("hierarchical mean {} drifted from golden", h.mean),
    )?;
    ensure((m.mean - MEAN_GOLDEN).abs() <= 1e-12 * MEAN_GOLDEN, || {
        format!("mean-extraction mean {} drifted from golden", m.mean)
    })?;
    Ok(format!(
        "hierarchical {:.5}, means {:.5}, ratio {ratio:.2}",
        h.mean, m.mean
    ))
}

fn random_points(rng: &mut ChaCha8Rng, n: usize) -> PointCloud {
    PointCloud::from_points(
        (0..n)
            .map(|_| Vector3::from(std::array::from_fn(|_| rng.random_range(-1.0..1.0))))
            .collect(),
    )
}

fn chamfer_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let a = random_points(&mut rng, 500);
        let b = random_points(&mut rng, 500);
        for mode in [ChamferMode::Unsquared, ChamferMode::Squared] {
            let fast = chamfer(&a, &b, mode).map_err(|e| e.to_string())?;
            let slow = chamfer_brute_force(&a, &b, mode).map_err(|e| e.to_string())?;
            worst = worst
                .max((fast.mean - slow.mean).abs())
                .max((fast.var - slow.var).abs());
        }
        let same = chamfer(&a, &a, ChamferMode::Unsquared).map_err(|e| e.to_string())?;
        ensure(same.mean == 0.0 && same.var == 0.0, || {
            format!("chamfer(a, a) = ({}, {})", same.mean, same.var)
        })?;
    }
    ensure(worst < 1e-12, || format!("max deviation {worst:.3e}"))?;
    Ok(format!("max deviation from brute force {worst:.1e}"))
}

fn pruning_schedule() -> Check {
    let initial = 10_000;
    let state = |iteration| TrainState {
        iteration,
        live_mask: vec![true; initial],
        learning_rate: 0.01,
        warmup_iters: 6_000,
        end_iter: 30_000,
        target_total: 2_000,
    };
    // eighths of the window land on integers, so the interpolation is exact there
    for k in 0..=8u64 {
        let it = 6_000 + 3_000 * k;
        let expected = initial - 1_000 * k as usize;
        let got = prune_schedule(&state(it), initial).map_err(|e| e.to_string())?;
        ensure(got == expected, || {
            format!("iteration {it}: {got} != {expected}")
        })?;
    }
    for (it, expected) in [(0, initial), (40_000, 2_000)] {
        let got = prune_schedule(&state(it), initial).map_err(|e| e.to_string())?;
        ensure(got == expected, || {
            format!("iteration {it}: {got} != {expected}")
        })?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..5 {
        // quantized opacities so ties occur
        let opacities: Vec<f64> = (0..10_000)
            .map(|_| f64::from(rng.random_range(0..500u32)) / 500.0)
            .collect();
        let live: Vec<bool> = (0..10_000).map(|_| rng.random_bool(0.9)).collect();
        let target = rng.random_range(0..8_000);
        let got = prune(&opacities, &live, target);
        // lowest opacity dies first, lower index first among equals
        let mut order: Vec<usize> = (0..live.len()).filter(|&i| live[i]).collect();
        order.sort_by(|&a, &b| opacities[a].total_cmp(&opacities[b]).then(a.cmp(&b)));
        let mut oracle = live.clone();
        for &i in order.iter().take(order.len().saturating_sub(target)) {
            oracle[i] = false;
        }
        ensure(got == oracle, || {
            format!("prune to {target} disagrees with full sort")
        })?;
    }
    Ok(
        "schedule exact at warmup, every eighth of the window and end; prune matches full sort"
            .into(),
    )
}

fn random_rgb(rng: &mut ChaCha8Rng, w: usize, h: usize) -> RgbImage {
    RgbImage::from_fn(w, h, |_, _| {
        std::array::from_fn(|_| rng.random_range(0.0..1.0))
    })
}

/// SSIM with the 2D window applied directly at every pixel.
fn ssim_direct(a: &RgbImage, b: &RgbImage) -> f64 {
    let g = ssim_window();
    let r = g.len() as isize / 2;
    let (w, h) = a.dims();
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let mut total = 0.0;
    for c in 0..3 {
        for y in 0..h as isize {
            for x in 0..w as isize {
                let (mut m1, mut m2, mut e11, mut e22, mut e12) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for dy in -r..=r {
                    for dx in -r..=r {
                        let (px, py) = (x + dx, y + dy);
                        if px < 0 || py < 0 || px >= w as isize || py >= h as isize {
                            continue;
                        }
                        let wt = g[(dx + r) as usize] * g[(dy + r) as usize];
                        let p = a.get(px as usize, py as usize)[c];
                        let q = b.get(px as usize, py as usize)[c];
                        m1 += wt * p;
                        m2 += wt * q;
                        e11 += wt * p * p;
                        e22 += wt * q * q;
                        e12 += wt * p * q;
                    }
                }
                let (s11, s22, s12) = (e11 - m1 * m1, e22 - m2 * m2, e12 - m1 * m2);
                total += (2.0 * m1 * m2 + c1) * (2.0 * s12 + c2)
                    / ((m1 * m1 + m2 * m2 + c1) * (s11 + s22 + c2));
            }
        }
    }
    total / (3 * w * h) as f64
}

fn metric_sanity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let a = random_rgb(&mut rng, 20, 15);
    let d = dssim(&a, &a).map_err(|e| e.to_string())?;
    let l = l1(&a, &a).map_err(|e| e.to_string())?;
    ensure(d.abs() < 1e-15 && l == 0.0, || {
        format!("dssim(a,a)={d}, l1(a,a)={l}")
    })?;

    let mut worst = 0.0f64;
    for _ in 0..10 {
        let (w, h) = (rng.random_range(8..30), rng.random_range(8..30));
        let a = random_rgb(&mut rng, w, h);
        let noise = rng.random_range(0.01..0.5);
        let b = RgbImage::from_fn(w, h, |x, y| {
            let p = a.get(x, y);
            std::array::from_fn(|c| (p[c] + noise * rng.random_range(-1.0..1.0)).clamp(0.0, 1.0))
        });
        let got = ssim(&a, &b).map_err(|e| e.to_string())?;
        worst = worst.max((got - ssim_direct(&a, &b)).abs());
    }
    ensure(worst < 1e-6, || format!("SSIM off by {worst:.3e}"))?;

    // the 3DGS training loss's SSIM, evaluated in float64 on a fixed smooth pair
    let a = RgbImage::from_fn(32, 24, |x, y| {
        std::array::from_fn(|c| 0.5 + 0.4 * (0.3 * x as f64 + 0.7 * y as f64 + c as f64).sin())
    });
    let b = RgbImage::from_fn(32, 24, |x, y| {
        let p = a.get(x, y);
        std::array::from_fn(|c| {
            p[c] + 0.05 * (0.5 * x as f64 - 0.2 * y as f64 + 2.0 * c as f64).cos()
        })
    });
    let s = ssim(&a, &b).map_err(|e| e.to_string())?;
    ensure((s - 0.9932289363893736).abs() < 1e-6, || {
        format!("SSIM {s} vs reference 0.99322894")
    })?;

    let weights = LossWeights::default();
    ensure(
        (weights.lambda_gc, weights.lambda_dssim, weights.lambda_l1) == (0.2, 0.2, 0.6),
        || format!("default weights {weights:?}"),
    )?;
    let t = total_loss(1.0, 1.0, 1.0, &weights);
    ensure(t == 1.0, || format!("total_loss(1,1,1) = {t}"))?;
    Ok(format!("SSIM max deviation {worst:.1e}"))
}

fn run_cli(args: &[&str]) -> Result<splatgeom::Outcome, String> {
    let mut full = vec!["splatgeom"];
    full.extend_from_slice(args);
    splatgeom::run(full).map_err(|e| format!("{}: {e:#}", args.join(" ")))
}

fn pipeline(root: &Path, threads: &str) -> Result<(), String> {
    let p = |name: &str| root.join(name).to_string_lossy().into_owned();
    let bundle = p("bundle");
    let b = |name: &str| format!("{bundle}/{name}");
    run_cli(&[
        "--threads",
        threads,
        "synth",
        "--out",
        &bundle,
        "--seed",
        "7",
    ])?;
    run_cli(&[
        "--threads",
        threads,
        "complexity",
        "--cameras",
        &b("cameras.json"),
        "--images",
        &b("images"),
        "--captions",
        &b("captions.json"),
        "--out",
        &p("report.json"),
    ])?;
    run_cli(&[
        "--threads",
        threads,
        "fit",
        "--splats",
        &b("splats.ply"),
        "--cameras",
        &b("cameras.json"),
        "--report",
        &p("report.json"),
        "--out",
        &p("fit"),
        "--seed",
        "7",
    ])?;
    run_cli(&[
        "--threads",
        threads,
        "extract",
        "--input",
        &p("fit/fitted.ply"),
        "--out",
        &p("points.ply"),
        "--seed",
        "7",
    ])?;
    run_cli(&[
        "--threads",
        threads,
        "chamfer",
        "--a",
        &p("points.ply"),
        "--b",
        &b("ground_truth.ply"),
        "--out",
        &p("chamfer.json"),
    ])?;
    Ok(())
}

fn collect_files(
    dir: &Path,
    base: &Path,
    out: &mut BTreeMap<PathBuf, Vec<u8>>,
) -> std::io::Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_files(&path, base, out)?;
        } else {
            out.insert(
                path.strip_prefix(base).unwrap().to_path_buf(),
                std::fs::read(&path)?,
            );
        }
    }
    Ok(())
}

fn end_to_end_determinism() -> Check {
    let mut runs = Vec::new();
    for threads in ["1", "4"] {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        pipeline(dir.path(), threads)?;
        let mut files = BTreeMap::new();
        collect_files(dir.path(), dir.path(), &mut files).map_err(|e| e.to_string())?;
        runs.push(files);
    }
    let names: Vec<_> = runs[0].keys().collect();
    ensure(names == runs[1].keys().collect::<Vec<_>>(), || {
        "runs wrote different file sets".into()
    })?;
    for (name, bytes) in &runs[0] {
        ensure(&runs[1][name] == bytes, || {
            format!("{} differs between runs", name.display())
        })?;
    }
    let chamfer: serde_json::Value =
        serde_json::from_slice(&runs[0][Path::new("chamfer.json")]).map_err(|e| e.to_string())?;
    Ok(format!(
        "{} files identical across runs (1 and 4 threads), chamfer mean {:.4}",
        names.len(),
        chamfer["mean"].as_f64().unwrap_or(f64::NAN)
    ))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("PLY round-trip", ply_round_trip, 10),
        ("gc_loss gradient check", gradient_check, 5),
        ("shape convergence", shape_convergence, 30),
        ("Parseval and high-pass energy", parseval_and_highpass, 20),
        ("edge/energy correlation", edge_energy, 30),
        ("hierarchical sampling statistics", sampling_statistics, 10),
        ("fantasy-surface mitigation", fantasy_mitigation, 60),
        ("Chamfer oracle", chamfer_oracle, 30),
        ("pruning schedule", pruning_schedule, 5),
        ("metric sanity", metric_sanity, 10),
        ("end-to-end determinism", end_to_end_determinism, 120),
    ];
    let mut failed = 0;
    for (i, (name, check, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let over = elapsed > Duration::from_secs(*budget);
        let (status, detail) = match (&result, over) {
            (Ok(d), false) => ("PASS", d.clone()),
            (Ok(d), true) => ("FAIL", format!("{d}; over the {budget} s budget")),
            (Err(e), _) => ("FAIL", e.clone()),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!(
            "{status} criterion {:>2} {name}: {detail} [{:.2} s / {budget} s]",
            i + 1,
            elapsed.as_secs_f64()
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
