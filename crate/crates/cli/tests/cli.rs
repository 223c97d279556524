use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use splatgeom::{exit_code, run, Outcome};
use splatgeom_core::semantics::{canny_edges, load_mask, CannyParams, SemanticMask};
use splatgeom_core::splat_model::read_splat_ply;
use splatgeom_core::{grid::GrayImage, Grid};

fn cli(args: &[&str]) -> anyhow::Result<Outcome> {
    run(std::iter::once("splatgeom").chain(args.iter().copied()))
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

struct Bundle {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Bundle {
    fn new(seed: u64) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("scene");
        cli(&["synth", "--out", &s(&root), "--seed", &seed.to_string()]).unwrap();
        Self { _dir: dir, root }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn complexity(&self, extra: &[&str]) -> Outcome {
        let mut args = vec![
            "complexity".to_string(),
            "--cameras".into(),
            s(&self.path("cameras.json")),
            "--images".into(),
            s(&self.path("images")),
            "--out".into(),
            s(&self.path("report.json")),
        ];
        args.extend(extra.iter().map(|a| a.to_string()));
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        cli(&refs).unwrap()
    }

    fn fit(&self, out: &str, extra: &[&str]) -> anyhow::Result<Outcome> {
        let mut args = vec![
            "fit".to_string(),
            "--splats".into(),
            s(&self.path("splats.ply")),
            "--cameras".into(),
            s(&self.path("cameras.json")),
            "--report".into(),
            s(&self.path("report.json")),
            "--out".into(),
            s(&self.path(out)),
        ];
        args.extend(extra.iter().map(|a| a.to_string()));
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        cli(&refs)
    }
}

fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(dir: &Path, base: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(&path, base, out);
            } else {
                out.insert(
                    path.strip_prefix(base).unwrap().into(),
                    std::fs::read(&path).unwrap(),
                );
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

fn mask_files(bundle: &Bundle) -> Vec<PathBuf> {
    let mut masks: Vec<_> = std::fs::read_dir(bundle.path("masks"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    masks.sort();
    masks
}

fn trace_rows(path: &Path) -> Vec<(u64, f64, usize)> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("iteration,gc_loss,live_count"));
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (
                f[0].parse().unwrap(),
                f[1].parse().unwrap(),
                f[2].parse().unwrap(),
            )
        })
        .collect()
}

#[test]
fn synth_is_deterministic() {
    let a = Bundle::new(1);
    let b = Bundle::new(1);
    let (ta, tb) = (tree(&a.root), tree(&b.root));
    assert!(ta.contains_key(Path::new("splats.ply")));
    assert!(ta.contains_key(Path::new("ground_truth.ply")));
    assert_eq!(ta, tb);
    let c = Bundle::new(2);
    assert_ne!(
        ta[Path::new("splats.ply")],
        tree(&c.root)[Path::new("splats.ply")]
    );
}

#[test]
fn synth_requires_seed() {
    let dir = tempfile::tempdir().unwrap();
    let r = cli(&["synth", "--out", &s(dir.path())]);
    assert_eq!(exit_code(&r), 1);
}

#[test]
fn complexity_counts_edges_per_label() {
    let b = Bundle::new(3);
    let out = b.complexity(&["--captions", &s(&b.path("captions.json"))]);
    assert!(out.text.starts_with("k1=3 k2=1 "));
    assert_eq!(out.json["k1"], 3.0);
    assert_eq!(out.json["k2"], 1.0);

    let mut expected: BTreeMap<u32, u64> = BTreeMap::new();
    for mask_path in mask_files(&b) {
        let mask = load_mask(&mask_path, 1 << 16).unwrap();
        let image =
            GrayImage::open(&b.path("images").join(mask_path.file_name().unwrap())).unwrap();
        let edges = canny_edges(&image, &CannyParams::default()).unwrap();
        for y in 0..mask.height() {
            for x in 0..mask.width() {
                if *edges.edges.get(x, y) {
                    *expected.entry(mask.label_at(x, y)).or_default() += 1;
                }
            }
        }
    }
    expected.remove(&0);
    for (label, p) in &expected {
        assert_eq!(
            out.json["groups"][label.to_string()]["P"],
            *p,
            "label {label}"
        );
    }
    assert_eq!(out.json["groups"]["1"]["caption"], "ground");
    let on_disk: serde_json::Value =
        serde_json::from_slice(&std::fs::read(b.path("report.json")).unwrap()).unwrap();
    assert_eq!(on_disk, out.json);
}

#[test]
fn complexity_of_background_masks_has_no_groups() {
    let b = Bundle::new(4);
    for mask_path in mask_files(&b) {
        let old = load_mask(&mask_path, 1 << 16).unwrap();
        let blank = SemanticMask::new(Grid::filled(old.width(), old.height(), 0), 1 << 16).unwrap();
        blank.save_png(&mask_path).unwrap();
    }
    let out = b.complexity(&[]);
    assert_eq!(out.json["groups"], serde_json::json!({}));
}

#[test]
fn fit_with_zero_iterations_returns_input() {
    let b = Bundle::new(5);
    b.complexity(&[]);
    b.fit("fit", &["--iters", "0", "--max-gc-loss", "1e9"])
        .unwrap();
    assert_eq!(
        std::fs::read(b.path("fit/fitted.ply")).unwrap(),
        std::fs::read(b.path("splats.ply")).unwrap()
    );
    assert_eq!(trace_rows(&b.path("fit/trace.csv")).len(), 1);
}

#[test]
fn fit_prunes_only_after_warmup() {
    let b = Bundle::new(6);
    b.complexity(&[]);
    let n = read_splat_ply(&b.path("splats.ply")).unwrap().count();

    let out = b
        .fit(
            "late",
            &["--iters", "40", "--warmup", "100", "--max-gc-loss", "1e9"],
        )
        .unwrap();
    assert!(trace_rows(&b.path("late/trace.csv"))
        .iter()
        .all(|r| r.2 == n));
    assert_eq!(
        read_splat_ply(&b.path("late/fitted.ply")).unwrap().count(),
        n
    );
    assert_eq!(out.json["splats_out"], n);

    let out = b
        .fit(
            "early",
            &["--iters", "40", "--warmup", "10", "--max-gc-loss", "1e9"],
        )
        .unwrap();
    let rows = trace_rows(&b.path("early/trace.csv"));
    let target = out.json["target_total"].as_u64().unwrap() as usize;
    assert!(target < n);
    assert!(rows.iter().take(11).all(|r| r.2 == n));
    assert!(rows.windows(2).all(|w| w[1].2 <= w[0].2));
    assert_eq!(rows.last().unwrap().2, target);
    assert_eq!(
        read_splat_ply(&b.path("early/fitted.ply")).unwrap().count(),
        target
    );
}

#[test]
fn fit_reports_quality_gate() {
    let b = Bundle::new(8);
    b.complexity(&[]);
    let r = b.fit("fit", &["--iters", "1", "--max-gc-loss", "1e-12"]);
    assert_eq!(exit_code(&r), 2);
    // outputs are still written
    assert!(b.path("fit/fitted.ply").exists());
}

#[test]
fn flags_override_config() {
    let b = Bundle::new(9);
    b.complexity(&[]);
    let cfg = b.root.join("pipeline.toml");
    std::fs::write(&cfg, "[schedule]\niters = 3\nmax_gc_loss = 1e9\n").unwrap();
    let c = s(&cfg);

    b.fit("from_file", &["--config", &c]).unwrap();
    assert_eq!(trace_rows(&b.path("from_file/trace.csv")).len(), 4);

    b.fit("flag_wins", &["--config", &c, "--iters", "0"])
        .unwrap();
    assert_eq!(trace_rows(&b.path("flag_wins/trace.csv")).len(), 1);

    std::fs::write(&cfg, "[schedule]\niterations = 3\n").unwrap();
    assert_eq!(exit_code(&b.fit("bad", &["--config", &c])), 1);
}

#[test]
fn extract_and_chamfer() {
    let b = Bundle::new(10);
    let pts = b.path("points.ply");
    let gt = s(&b.path("ground_truth.ply"));
    let r = cli(&[
        "extract",
        "--input",
        &s(&b.path("splats.ply")),
        "--out",
        &s(&pts),
    ]);
    assert_eq!(exit_code(&r), 1, "hierarchical extraction needs a seed");

    let args = [
        "extract",
        "--input",
        &s(&b.path("splats.ply")),
        "--out",
        &s(&pts),
        "--seed",
        "3",
        "--n",
        "5000",
    ];
    let out = cli(&args).unwrap();
    let first = std::fs::read(&pts).unwrap();
    cli(&args).unwrap();
    assert_eq!(std::fs::read(&pts).unwrap(), first);
    assert_eq!(out.json["written"], 5000);

    let same = cli(&["chamfer", "--a", &gt, "--b", &gt]).unwrap();
    assert_eq!(same.json["mean"], 0.0);
    assert_eq!(same.json["var"], 0.0);
    let cd = cli(&["chamfer", "--a", &s(&pts), "--b", &gt]).unwrap();
    assert!(cd.json["mean"].as_f64().unwrap() > 0.0);

    let cropped = b.path("cropped.ply");
    let out = cli(&[
        "extract",
        "--input",
        &s(&b.path("splats.ply")),
        "--out",
        &s(&cropped),
        "--mode",
        "mean",
        "--crop",
        "0,0,-1,10,10,1",
    ])
    .unwrap();
    // the box top sits above the crop
    let (extracted, written) = (
        out.json["extracted"].as_u64().unwrap(),
        out.json["written"].as_u64().unwrap(),
    );
    assert!(
        0 < written && written < extracted,
        "{written} of {extracted}"
    );
    let r = cli(&[
        "extract",
        "--input",
        &s(&b.path("splats.ply")),
        "--out",
        &s(&cropped),
        "--mode",
        "mean",
        "--crop",
        "1,2,3",
    ]);
    assert_eq!(exit_code(&r), 1);
}

#[test]
fn report_marks_best_method() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("results.json");
    std::fs::write(
        &input,
        r#"{"scene-a": {"ours": {"mean": 0.031, "var": 0.1}, "baseline": {"mean": 0.05, "var": 0.2}}}"#,
    )
    .unwrap();
    let out = cli(&["report", "--input", &s(&input)]).unwrap();
    assert!(out.text.contains("0.031*"));
    assert_eq!(out.json["scene-a"]["ours"]["best"], true);
    assert_eq!(out.json["scene-a"]["baseline"]["best"], false);
}

#[test]
fn binary_exit_codes_and_json() {
    let bin = env!("CARGO_BIN_EXE_splatgeom");
    let status = |args: &[&str]| Command::new(bin).args(args).output().unwrap();

    let help = status(&["--help"]);
    assert_eq!(help.status.code(), Some(0));

    let missing = status(&[
        "chamfer",
        "--a",
        "/nonexistent/a.ply",
        "--b",
        "/nonexistent/b.ply",
    ]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("error:"));

    assert_eq!(status(&["no-such-command"]).status.code(), Some(1));

    let ok = Command::new(bin)
        .env("SPLATGEOM_THREADS", "2")
        .args([
            "--json",
            "spectrum-validate",
            "--count",
            "12",
            "--size",
            "64",
        ])
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert!(v["r"].as_f64().unwrap() > 0.9);

    // no correlation exceeds 1, so this gate always trips
    let gate = status(&[
        "--json",
        "spectrum-validate",
        "--count",
        "12",
        "--size",
        "64",
        "--min-r",
        "1.0",
    ]);
    assert_eq!(gate.status.code(), Some(2));
    let v: serde_json::Value = serde_json::from_slice(&gate.stdout).unwrap();
    assert!(v["r"].is_number());
}
