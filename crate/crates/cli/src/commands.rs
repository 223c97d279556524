use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use nalgebra::Vector3;
use rayon::prelude::*;
use serde::Deserialize;
use serde_json::json;

use splatgeom_core::extraction::{
    chamfer, crop, load_points, mean_extraction, report, sample_points, write_points_ply, Aabb,
    ChamferMode, SampleWeighting,
};
use splatgeom_core::grid::GrayImage;
use splatgeom_core::semantics::{
    aggregate_perplexity, assign_labels, load_captions, load_mask, measure_image, target_shape,
    CannyParams, ComplexityReport, GroupComplexity, LabelPolicy, SemanticMask, ShapeConstants,
};
use splatgeom_core::shape_training::{
    fit_shapes, FitOptions, FitSchedule, LossWeights, PenaltyConfig,
};
use splatgeom_core::spectrum::{corpus_stats, correlation_of, fixtures::square_corpus};
use splatgeom_core::splat_model::{
    load_cameras_json, read_splat_ply, write_splat_ply, CameraModel, SplatCloud,
};

use crate::config::{CannyConfig, PipelineConfig};
use crate::{
    CannyArgs, ChamferArgs, ComplexityArgs, ExtractArgs, FitArgs, Outcome, QualityGate, ReportArgs,
    SpectrumArgs,
};

/// Mask images hold at most 16-bit labels.
const MASK_LABEL_LIMIT: u32 = 1 << 16;

fn require(flag: Option<PathBuf>, cfg: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
    flag.or_else(|| cfg.clone())
        .with_context(|| format!("missing --{name} (or paths.{name} in the config)"))
}

fn canny_params(a: &CannyArgs, cfg: &CannyConfig) -> Result<CannyParams> {
    let d = CannyParams::default();
    let p = CannyParams {
        sigma: a.canny_sigma.or(cfg.sigma).unwrap_or(d.sigma),
        low: a.canny_low.or(cfg.low).unwrap_or(d.low),
        high: a.canny_high.or(cfg.high).unwrap_or(d.high),
    };
    p.validate()?;
    Ok(p)
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn load_views(
    cameras: &Path,
    masks_root: Option<&Path>,
) -> Result<Vec<(CameraModel, SemanticMask, PathBuf)>> {
    let entries = load_cameras_json(cameras, masks_root)
        .with_context(|| format!("reading cameras {}", cameras.display()))?;
    ensure!(
        !entries.is_empty(),
        "{} lists no cameras",
        cameras.display()
    );
    entries
        .into_par_iter()
        .enumerate()
        .map(|(i, (camera, mask_path))| {
            let mask_path = mask_path.with_context(|| format!("camera {i} has no mask_path"))?;
            let mask = load_mask(&mask_path, MASK_LABEL_LIMIT)
                .with_context(|| format!("reading mask {}", mask_path.display()))?;
            Ok((camera, mask, mask_path))
        })
        .collect()
}

fn report_text(report: &ComplexityReport) -> String {
    let mut out = format!(
        "k1={} k2={} kappa={} a_max={}\n{:>6}  {:>8}  {:>10}  {:>10}  {:>8}  {:>8}  {:>8}  caption\n",
        report.k1, report.k2, report.kappa, report.a_max, "label", "P", "pixels", "p", "a1", "a2", "N"
    );
    for (label, g) in &report.groups {
        let _ = writeln!(
            out,
            "{label:>6}  {:>8}  {:>10}  {:>10.5}  {:>8.3}  {:>8.3}  {:>8}  {}",
            g.total_edges,
            g.pixel_count,
            g.p,
            g.target_a1,
            g.target_a2,
            g.expected_count,
            g.caption.as_deref().unwrap_or("")
        );
    }
    out
}

/// Canny on every image, edges attributed to mask labels, then per-group perplexity,
/// shape targets and expected splat counts.
pub fn cmd_complexity(a: &ComplexityArgs, cfg: &PipelineConfig) -> Result<Outcome> {
    let paths = &cfg.paths;
    let cameras = require(a.cameras.clone(), &paths.cameras, "cameras")?;
    let images = require(a.images.clone(), &paths.images, "images")?;
    let masks_root = a.masks.clone().or_else(|| paths.masks.clone());
    let captions = match a.captions.clone().or_else(|| paths.captions.clone()) {
        Some(p) => {
            load_captions(&p).with_context(|| format!("reading captions {}", p.display()))?
        }
        None => BTreeMap::new(),
    };
    let d = ShapeConstants::default();
    let c = &cfg.constants;
    let constants = ShapeConstants {
        k1: a.k1.or(c.k1).unwrap_or(d.k1),
        k2: a.k2.or(c.k2).unwrap_or(d.k2),
        a_max: a.a_max.or(c.a_max).unwrap_or(d.a_max),
        kappa: a.kappa.or(c.kappa).unwrap_or(d.kappa),
    };
    constants.validate()?;
    let canny = canny_params(&a.canny, &cfg.canny)?;

    let views = load_views(&cameras, masks_root.as_deref())?;
    let stats = views
        .par_iter()
        .map(|(_, mask, mask_path)| {
            let name = mask_path
                .file_name()
                .context("mask path has no file name")?;
            let image_path = images.join(name);
            let image = GrayImage::open(&image_path)
                .with_context(|| format!("reading image {}", image_path.display()))?;
            measure_image(name.to_string_lossy(), &image, mask, &canny)
                .with_context(|| format!("measuring {}", image_path.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    let declared: Vec<u32> = captions.keys().copied().filter(|&l| l != 0).collect();
    let groups = aggregate_perplexity(&stats, &declared)
        .into_iter()
        .map(|p| GroupComplexity::from_perplexity(p, &constants))
        .collect::<Result<Vec<_>, _>>()?;
    let report = ComplexityReport::new(&constants, &groups, &captions);
    let json = serde_json::to_value(&report)?;
    if let Some(out) = a.out.clone().or_else(|| paths.report.clone()) {
        write_json(&out, &json)?;
    }
    log::info!(
        "complexity: {} groups over {} views",
        report.groups.len(),
        views.len()
    );
    Ok(Outcome {
        text: report_text(&report),
        json,
    })
}

fn read_report(path: &Path) -> Result<ComplexityReport> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading report {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing report {}", path.display()))
}

/// Labels splats by majority vote over the masks, then descends on log-scales toward the
/// group targets while pruning by opacity down to the report's expected total.
pub fn cmd_fit(a: &FitArgs, cfg: &PipelineConfig) -> Result<Outcome> {
    let paths = &cfg.paths;
    let splats_path = require(a.splats.clone(), &paths.splats, "splats")?;
    let cameras = require(a.cameras.clone(), &paths.cameras, "cameras")?;
    let report_path = require(a.report.clone(), &paths.report, "report")?;
    let out = require(a.out.clone(), &paths.output, "out")?;
    let masks_root = a.masks.clone().or_else(|| paths.masks.clone());

    let l = &cfg.loss;
    let d = LossWeights::default();
    let weights = LossWeights {
        lambda_gc: a.lambda_gc.or(l.lambda_gc).unwrap_or(d.lambda_gc),
        lambda_dssim: a.lambda_dssim.or(l.lambda_dssim).unwrap_or(d.lambda_dssim),
        lambda_l1: a.lambda_l1.or(l.lambda_l1).unwrap_or(d.lambda_l1),
    };
    weights.validate()?;
    let dp = PenaltyConfig::default();
    let penalty = PenaltyConfig {
        kind: match a.penalty.as_ref().or(l.penalty.as_ref()) {
            Some(s) => s.parse().map_err(anyhow::Error::msg)?,
            None => dp.kind,
        },
        delta: a.delta.or(l.delta).unwrap_or(dp.delta),
        residual: match a.residual.as_ref().or(l.residual.as_ref()) {
            Some(s) => s.parse().map_err(anyhow::Error::msg)?,
            None => dp.residual,
        },
    };
    let s = &cfg.schedule;
    let iters = a.iters.or(s.iters).unwrap_or(2000);
    let lr = a.lr.or(s.lr).unwrap_or(0.01);
    let warmup = a.warmup.or(s.warmup).unwrap_or(iters * 6000 / 30000);
    let max_gc_loss = a.max_gc_loss.or(s.max_gc_loss).unwrap_or(1e-3);
    let seed = a.seed.or(cfg.sampling.seed);

    let cloud = read_splat_ply(&splats_path)
        .with_context(|| format!("reading splats {}", splats_path.display()))?;
    let report = read_report(&report_path)?;
    let targets = match (a.k1.or(cfg.constants.k1), a.k2.or(cfg.constants.k2)) {
        (None, None) => report.targets(),
        (k1, k2) => {
            let (k1, k2) = (k1.unwrap_or(report.k1), k2.unwrap_or(report.k2));
            report
                .groups
                .iter()
                .map(|(&label, g)| Ok((label, target_shape(g.p, k1, k2, report.a_max)?)))
                .collect::<Result<_>>()?
        }
    };
    let views = load_views(&cameras, masks_root.as_deref())?;
    let (cams, masks): (Vec<_>, Vec<_>) = views.into_iter().map(|(c, m, _)| (c, m)).unzip();
    let labels = assign_labels(&cloud, &cams, &masks, LabelPolicy::Majority)?.per_splat_label;

    let target_total = (report.expected_total() as usize).min(cloud.count());
    if target_total == 0 {
        log::warn!("report expects no splats; pruning disabled");
    }
    let schedule = (warmup < iters && target_total > 0).then_some(FitSchedule {
        warmup_iters: warmup,
        end_iter: iters,
        target_total,
    });
    let opts = FitOptions {
        lr,
        iters,
        penalty,
        schedule,
    };
    let fit = fit_shapes(&cloud, &labels, &targets, &opts)?;

    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let ply_path = out.join("fitted.ply");
    if iters == 0 {
        std::fs::copy(&splats_path, &ply_path)?;
    } else {
        let live = SplatCloud::new(
            fit.cloud
                .splats
                .iter()
                .zip(&fit.live_mask)
                .filter(|(_, &l)| l)
                .map(|(s, _)| s.clone())
                .collect(),
        );
        std::fs::write(&ply_path, write_splat_ply(&live)?)?;
    }
    let mut csv = String::from("iteration,gc_loss,live_count\n");
    for r in &fit.trace {
        let _ = writeln!(csv, "{},{:e},{}", r.iteration, r.gc_loss, r.live_count);
    }
    std::fs::write(out.join("trace.csv"), csv)?;

    let last = *fit.trace.last().expect("trace has the initial row");
    let labeled = labels.iter().filter(|&&l| l != 0).count();
    let converged = last.gc_loss <= max_gc_loss;
    let json = json!({
        "splats_in": cloud.count(),
        "splats_out": last.live_count,
        "labeled": labeled,
        "iters": iters,
        "lr": lr,
        "warmup": warmup,
        "target_total": target_total,
        "penalty": penalty,
        "weights": weights,
        "seed": seed,
        "final_gc_loss": last.gc_loss,
        "weighted_gc_loss": weights.lambda_gc * last.gc_loss,
        "converged": converged,
    });
    write_json(&out.join("fit.json"), &json)?;
    let outcome = Outcome {
        text: format!(
            "fit: {} -> {} splats ({} labeled), final gc_loss {:.3e}\n",
            cloud.count(),
            last.live_count,
            labeled,
            last.gc_loss
        ),
        json,
    };
    if !converged {
        return Err(QualityGate {
            message: format!("final gc_loss {:.3e} exceeds {max_gc_loss:e}", last.gc_loss),
            outcome,
        }
        .into());
    }
    Ok(outcome)
}

fn parse_crop(s: &str) -> Result<Aabb> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("bad crop box `{s}`"))?;
    ensure!(v.len() == 6, "crop box needs six numbers, got {}", v.len());
    Ok(Aabb::new(
        Vector3::new(v[0], v[1], v[2]),
        Vector3::new(v[3], v[4], v[5]),
    )?)
}

/// Hierarchical sampling or mean extraction, optional crop, written as a points PLY.
pub fn cmd_extract(a: &ExtractArgs, cfg: &PipelineConfig) -> Result<Outcome> {
    let sc = &cfg.sampling;
    let input = require(a.input.clone(), &cfg.paths.splats, "input")?;
    let out = require(a.out.clone(), &cfg.paths.output, "out")?;
    let mode = a
        .mode
        .clone()
        .or_else(|| sc.mode.clone())
        .unwrap_or("hierarchical".into());
    let min_alpha = a.min_alpha.or(sc.min_alpha).unwrap_or(0.0);
    let weighting = match a.weighting.as_deref().or(sc.weighting.as_deref()) {
        None | Some("alpha") => SampleWeighting::Alpha,
        Some("alpha-sqrt-det") => SampleWeighting::AlphaSqrtDet,
        Some(other) => bail!("unknown weighting `{other}` (alpha, alpha-sqrt-det)"),
    };
    let bbox = a
        .crop
        .as_deref()
        .or(sc.crop.as_deref())
        .map(parse_crop)
        .transpose()?;

    let cloud =
        read_splat_ply(&input).with_context(|| format!("reading splats {}", input.display()))?;
    let splats = cloud.activate_all()?;
    let (points, seed, n) = match mode.as_str() {
        "mean" => (mean_extraction(&splats, None, min_alpha)?, None, None),
        "hierarchical" => {
            let seed = a
                .seed
                .or(sc.seed)
                .context("hierarchical extraction needs --seed")?;
            let n = a.n.or(sc.n).unwrap_or(1_000_000);
            ensure!(
                (0.0..=1.0).contains(&min_alpha),
                "min_alpha must lie in [0, 1]"
            );
            let live: Vec<bool> = splats.iter().map(|s| s.opacity >= min_alpha).collect();
            (
                sample_points(&splats, Some(&live), n, seed, weighting)?,
                Some(seed),
                Some(n),
            )
        }
        other => bail!("unknown mode `{other}` (hierarchical, mean)"),
    };
    let extracted = points.len();
    let points = match &bbox {
        Some(b) => crop(&points, b),
        None => points,
    };
    std::fs::write(&out, write_points_ply(&points))
        .with_context(|| format!("writing {}", out.display()))?;
    let json = json!({
        "mode": mode,
        "seed": seed,
        "n": n,
        "extracted": extracted,
        "written": points.len(),
        "output": out,
    });
    Ok(Outcome {
        text: format!(
            "extract ({mode}): {} points written to {}\n",
            points.len(),
            out.display()
        ),
        json,
    })
}

/// Symmetric Chamfer statistics between two point files.
pub fn cmd_chamfer(a: &ChamferArgs) -> Result<Outcome> {
    let pa = load_points(&a.a).with_context(|| format!("reading {}", a.a.display()))?;
    let pb = load_points(&a.b).with_context(|| format!("reading {}", a.b.display()))?;
    let mode = if a.squared {
        ChamferMode::Squared
    } else {
        ChamferMode::Unsquared
    };
    let stats = chamfer(&pa, &pb, mode)?;
    let json = json!({ "mean": stats.mean, "var": stats.var, "count": stats.count });
    if let Some(out) = &a.out {
        write_json(out, &json)?;
    }
    Ok(Outcome {
        text: format!(
            "chamfer mean {:.6} var {:.6} over {} distances\n",
            stats.mean, stats.var, stats.count
        ),
        json,
    })
}

fn load_corpus(dir: &Path) -> Result<Vec<GrayImage>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    files.retain(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")));
    files.sort();
    files
        .par_iter()
        .map(|p| GrayImage::open(p).with_context(|| format!("reading {}", p.display())))
        .collect()
}

/// Pearson correlation between Canny edge counts and high-pass energy over a corpus.
pub fn cmd_spectrum_validate(a: &SpectrumArgs, cfg: &PipelineConfig) -> Result<Outcome> {
    let threshold = a.threshold.or(cfg.spectrum.threshold).unwrap_or(0.1);
    let canny = canny_params(&a.canny, &cfg.canny)?;
    let corpus = match a.images.clone().or_else(|| cfg.paths.images.clone()) {
        Some(dir) => load_corpus(&dir)?,
        None => square_corpus(a.count, a.size),
    };
    let stats = corpus_stats(&corpus, threshold, &canny)?;
    let r = correlation_of(&stats)?;
    let json = json!({
        "r": r,
        "threshold": threshold,
        "images": corpus.len(),
        "canny": canny,
        "stats": stats,
    });
    if let Some(out) = &a.out {
        write_json(out, &json)?;
    }
    let outcome = Outcome {
        text: format!(
            "edge count vs high-pass energy: r = {r:.5} over {} images (T = {threshold})\n",
            corpus.len()
        ),
        json,
    };
    if !(r > a.min_r) {
        return Err(QualityGate {
            message: format!("r = {r:.5} is not above {}", a.min_r),
            outcome,
        }
        .into());
    }
    Ok(outcome)
}

#[derive(Deserialize)]
struct Cell {
    mean: f64,
    var: f64,
}

/// Scene × method table from a results JSON file.
pub fn cmd_report(a: &ReportArgs) -> Result<Outcome> {
    let text = std::fs::read_to_string(&a.input)
        .with_context(|| format!("reading {}", a.input.display()))?;
    let raw: BTreeMap<String, BTreeMap<String, Cell>> =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", a.input.display()))?;
    let results = raw
        .into_iter()
        .map(|(scene, methods)| {
            let m = methods
                .into_iter()
                .map(|(k, c)| (k, (c.mean, c.var)))
                .collect();
            (scene, m)
        })
        .collect();
    let table = report(&results);
    let json = table.to_json();
    if let Some(out) = &a.out {
        write_json(out, &json)?;
    }
    Ok(Outcome {
        text: table.to_text(),
        json,
    })
}
