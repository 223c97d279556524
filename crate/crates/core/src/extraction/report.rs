use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReportCell {
    pub mean: f64,
    pub var: f64,
    /// Lowest mean within its scene (only set when the scene has several methods).
    pub best: bool,
}

/// Chamfer results by scene and method.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ChamferReport {
    pub scenes: BTreeMap<String, BTreeMap<String, ReportCell>>,
}

/// Builds a scene × method table of `(mean, var)` and flags the best mean per scene.
pub fn report(results: &BTreeMap<String, BTreeMap<String, (f64, f64)>>) -> ChamferReport {
    let scenes = results
        .iter()
        .map(|(scene, methods)| {
            let best = methods
                .values()
                .map(|(m, _)| *m)
                .fold(f64::INFINITY, f64::min);
            let flag = methods.len() > 1;
            let cells = methods
                .iter()
                .map(|(name, &(mean, var))| {
                    (
                        name.clone(),
                        ReportCell {
                            mean,
                            var,
                            best: flag && mean == best,
                        },
                    )
                })
                .collect();
            (scene.clone(), cells)
        })
        .collect();
    ChamferReport { scenes }
}

impl ChamferReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report serializes")
    }

    /// Aligned text table, values to three decimals, best mean marked with `*`. Empty when
    /// there are no results.
    pub fn to_text(&self) -> String {
        if self.scenes.is_empty() {
            return String::new();
        }
        let mut rows = vec![[
            "scene".to_string(),
            "method".into(),
            "mean".into(),
            "var".into(),
        ]];
        for (scene, methods) in &self.scenes {
            for (method, c) in methods {
                let mean = format!("{:.3}{}", c.mean, if c.best { "*" } else { "" });
                rows.push([scene.clone(), method.clone(), mean, format!("{:.3}", c.var)]);
            }
        }
        let mut widths = [0usize; 4];
        for row in &rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let mut out = String::new();
        for row in &rows {
            let line = format!(
                "{:<w0$}  {:<w1$}  {:>w2$}  {:>w3$}",
                row[0],
                row[1],
                row[2],
                row[3],
                w0 = widths[0],
                w1 = widths[1],
                w2 = widths[2],
                w3 = widths[3]
            );
            let _ = writeln!(out, "{}", line.trim_end());
        }
        out
    }
}
