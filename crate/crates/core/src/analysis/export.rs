use super::{AnalysisError, MetricReport, StretchCloud};
use crate::kinematics::{canonical_deformation, principal_stretches_plane, CanonicalDeformation, CanonicalKind};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const LOAD_REACTION_HEADER: &str = "model,sigma_noise,setup,geometry,load,tag,reaction_true,reaction_pred,rel_error";
pub const BOXPLOT_HEADER: &str = "model,setup,load,n,min,whisker_low,q1,median,q3,whisker_high,max";
pub const STRETCH_HEADER: &str = "label,lambda1,lambda2,lambda3";
pub const CANONICAL_HEADER: &str = "deformation,delta,lambda1,lambda2";

/// Evaluation output stored in a run directory as `evaluation*.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationArtifact {
    pub sigma_noise: f64,
    pub report: MetricReport,
}

/// Percentile of sorted data with linear interpolation between order
/// statistics (`p` in `[0, 100]`).
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0);
    let h = (n - 1) as f64 * p / 100.0;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub n: usize,
    pub min: f64,
    pub whisker_low: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub whisker_high: f64,
    pub max: f64,
}

/// Quartiles and Tukey whiskers (most extreme data within 1.5 IQR).
pub fn boxplot_stats(values: &[f64]) -> Option<BoxStats> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let (q1, median, q3) = (percentile(&v, 25.0), percentile(&v, 50.0), percentile(&v, 75.0));
    let iqr = q3 - q1;
    let whisker_low = v.iter().copied().find(|&x| x >= q1 - 1.5 * iqr).unwrap_or(v[0]);
    let whisker_high = v.iter().rev().copied().find(|&x| x <= q3 + 1.5 * iqr).unwrap_or(v[v.len() - 1]);
    Some(BoxStats { n: v.len(), min: v[0], whisker_low, q1, median, q3, whisker_high, max: v[v.len() - 1] })
}

pub fn load_reaction_csv(reports: &[(f64, &MetricReport)]) -> String {
    let mut s = format!("{LOAD_REACTION_HEADER}\n");
    for (sigma, r) in reports {
        for e in &r.per_experiment {
            for c in &e.reactions {
                let _ = writeln!(
                    s,
                    "{},{sigma},{},{},{},{},{:.17e},{:.17e},{:.17e}",
                    csv_field(&r.model),
                    e.setup_id,
                    e.geometry_id,
                    e.load,
                    c.tag,
                    c.truth,
                    c.predicted,
                    c.rel_error
                );
            }
        }
    }
    s
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn load_key(x: f64) -> i64 {
    (x * 1e9).round() as i64
}

/// Box statistics of nodal error norms grouped by setup and load.
pub fn boxplot_groups(report: &MetricReport) -> Vec<(u8, f64, BoxStats)> {
    let mut groups: BTreeMap<(u8, i64), (f64, Vec<f64>)> = BTreeMap::new();
    for e in &report.per_experiment {
        groups.entry((e.setup_id, load_key(e.load))).or_insert_with(|| (e.load, Vec::new())).1.extend(&e.point_errors);
    }
    groups.into_iter().filter_map(|((s, _), (load, v))| boxplot_stats(&v).map(|b| (s, load, b))).collect()
}

pub fn boxplot_csv(reports: &[&MetricReport]) -> String {
    let mut s = format!("{BOXPLOT_HEADER}\n");
    for r in reports {
        for (setup, load, b) in boxplot_groups(r) {
            let _ = writeln!(
                s,
                "{},{setup},{load},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                csv_field(&r.model),
                b.n,
                b.min,
                b.whisker_low,
                b.q1,
                b.median,
                b.q3,
                b.whisker_high,
                b.max
            );
        }
    }
    s
}

pub fn stretch_csv(label: &str, cloud: &StretchCloud) -> String {
    let mut s = format!("{STRETCH_HEADER}\n");
    for p in &cloud.samples {
        let l3 = p.get(2).map(|x| format!("{x:.17e}")).unwrap_or_default();
        let _ = writeln!(s, "{},{:.17e},{:.17e},{l3}", csv_field(label), p[0], p[1]);
    }
    s
}

/// In-plane principal stretches along each canonical deformation for
/// `δ ∈ [0, 0.5]`.
pub fn canonical_curves(n_points: usize) -> Vec<(CanonicalKind, Vec<(f64, f64, f64)>)> {
    let n = n_points.max(2);
    CanonicalKind::ALL
        .iter()
        .map(|&k| {
            let pts = (0..n)
                .map(|i| {
                    let d = 0.5 * i as f64 / (n - 1) as f64;
                    let l = principal_stretches_plane(&canonical_deformation(&CanonicalDeformation::new(k, d)));
                    (d, l[0], l[1])
                })
                .collect();
            (k, pts)
        })
        .collect()
}

pub fn canonical_curves_csv(n_points: usize) -> String {
    let mut s = format!("{CANONICAL_HEADER}\n");
    for (k, pts) in canonical_curves(n_points) {
        for (d, l1, l2) in pts {
            let _ = writeln!(s, "{},{d:.17e},{l1:.17e},{l2:.17e}", k.name());
        }
    }
    s
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const PAD: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn fit<'a>(pts: impl Iterator<Item = &'a (f64, f64)>) -> Self {
        let (mut x, mut y) = ((f64::INFINITY, f64::NEG_INFINITY), (f64::INFINITY, f64::NEG_INFINITY));
        for &(a, b) in pts {
            x = (x.0.min(a), x.1.max(a));
            y = (y.0.min(b), y.1.max(b));
        }
        let widen = |r: (f64, f64)| {
            if !r.0.is_finite() {
                (0.0, 1.0)
            } else if r.1 - r.0 <= 0.0 {
                (r.0 - 0.5, r.1 + 0.5)
            } else {
                let m = 0.05 * (r.1 - r.0);
                (r.0 - m, r.1 + m)
            }
        };
        Self { x: widen(x), y: widen(y) }
    }

    fn px(&self, x: f64) -> f64 {
        PAD + (x - self.x.0) / (self.x.1 - self.x.0) * (W - 2.0 * PAD)
    }

    fn py(&self, y: f64) -> f64 {
        H - PAD - (y - self.y.0) / (self.y.1 - self.y.0) * (H - 2.0 * PAD)
    }
}

fn svg_open(title: &str, f: &Frame, xlabel: &str, ylabel: &str) -> String {
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" font-family=\"sans-serif\" font-size=\"11\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n\
         <rect x=\"{PAD}\" y=\"{PAD}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
        W / 2.0,
        escape(title),
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>", W / 2.0, H - 12.0, escape(xlabel));
    let _ = writeln!(
        s,
        "<text x=\"14\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {})\">{}</text>",
        H / 2.0,
        H / 2.0,
        escape(ylabel)
    );
    for (v, anchor) in [(f.x.0, "start"), (f.x.1, "end")] {
        let _ = writeln!(s, "<text x=\"{:.1}\" y=\"{}\" text-anchor=\"{anchor}\">{v:.3}</text>", f.px(v), H - PAD + 14.0);
    }
    for v in [f.y.0, f.y.1] {
        let _ = writeln!(s, "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">{v:.3}</text>", PAD - 4.0, f.py(v) + 4.0);
    }
    s
}

fn legend(s: &mut String, labels: &[&str]) {
    for (i, l) in labels.iter().enumerate() {
        let y = PAD + 14.0 + 14.0 * i as f64;
        let c = COLORS[i % COLORS.len()];
        let _ = writeln!(s, "<rect x=\"{}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{c}\"/>", W - PAD - 150.0, y - 9.0);
        let _ = writeln!(s, "<text x=\"{}\" y=\"{y}\">{}</text>", W - PAD - 136.0, escape(l));
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn svg_scatter(title: &str, xlabel: &str, ylabel: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let f = Frame::fit(series.iter().flat_map(|(_, p)| p));
    let mut s = svg_open(title, &f, xlabel, ylabel);
    for (i, (_, pts)) in series.iter().enumerate() {
        let c = COLORS[i % COLORS.len()];
        for &(x, y) in pts {
            let _ = writeln!(s, "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"1.5\" fill=\"{c}\" fill-opacity=\"0.5\"/>", f.px(x), f.py(y));
        }
    }
    legend(&mut s, &series.iter().map(|(l, _)| l.as_str()).collect::<Vec<_>>());
    s.push_str("</svg>\n");
    s
}

pub fn svg_lines(title: &str, xlabel: &str, ylabel: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let f = Frame::fit(series.iter().flat_map(|(_, p)| p));
    let mut s = svg_open(title, &f, xlabel, ylabel);
    for (i, (_, pts)) in series.iter().enumerate() {
        let c = COLORS[i % COLORS.len()];
        let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", f.px(x), f.py(y))).collect();
        let _ = writeln!(s, "<polyline points=\"{}\" fill=\"none\" stroke=\"{c}\" stroke-width=\"1.5\"/>", path.join(" "));
        for &(x, y) in pts {
            let _ = writeln!(s, "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{c}\"/>", f.px(x), f.py(y));
        }
    }
    legend(&mut s, &series.iter().map(|(l, _)| l.as_str()).collect::<Vec<_>>());
    s.push_str("</svg>\n");
    s
}

pub fn svg_boxplot(title: &str, ylabel: &str, boxes: &[(String, BoxStats)]) -> String {
    let ys: Vec<(f64, f64)> = boxes.iter().flat_map(|(_, b)| [(0.0, b.whisker_low), (0.0, b.whisker_high)]).collect();
    let mut f = Frame::fit(ys.iter());
    f.x = (0.0, boxes.len().max(1) as f64);
    let mut s = svg_open(title, &f, "", ylabel);
    for (i, (label, b)) in boxes.iter().enumerate() {
        let cx = f.px(i as f64 + 0.5);
        let hw = 0.3 * (W - 2.0 * PAD) / boxes.len() as f64;
        let _ = writeln!(
            s,
            "<line x1=\"{cx:.2}\" x2=\"{cx:.2}\" y1=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>",
            f.py(b.whisker_low),
            f.py(b.whisker_high)
        );
        let _ = writeln!(
            s,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\" stroke=\"black\"/>",
            cx - hw,
            f.py(b.q3),
            2.0 * hw,
            (f.py(b.q1) - f.py(b.q3)).max(0.5),
            COLORS[0]
        );
        let _ = writeln!(
            s,
            "<line x1=\"{:.2}\" x2=\"{:.2}\" y1=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\" stroke-width=\"2\"/>",
            cx - hw,
            cx + hw,
            f.py(b.median),
            f.py(b.median)
        );
        let _ = writeln!(s, "<text x=\"{cx:.2}\" y=\"{}\" text-anchor=\"middle\">{}</text>", H - PAD + 14.0, escape(label));
    }
    s.push_str("</svg>\n");
    s
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExportedFiles {
    pub files: Vec<PathBuf>,
}

fn read_stretch_csv(text: &str) -> Result<Vec<(String, (f64, f64))>, AnalysisError> {
    let mut lines = text.lines();
    if lines.next() != Some(STRETCH_HEADER) {
        return Err(AnalysisError::Malformed("stretch CSV header".into()));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            let num = |s: &str| s.parse::<f64>().map_err(|e| AnalysisError::Malformed(e.to_string()));
            if f.len() < 3 {
                return Err(AnalysisError::Malformed(format!("stretch row {l:?}")));
            }
            Ok((f[0].to_string(), (num(f[1])?, num(f[2])?)))
        })
        .collect()
}

/// Writes CSV and SVG plot data for every `evaluation*.json` and
/// `stretches*.csv` artifact in `run_dir` into `run_dir/plots`.
pub fn export_plot_data(run_dir: &Path) -> Result<ExportedFiles, AnalysisError> {
    let mut evaluations = Vec::new();
    let mut stretch_files = Vec::new();
    let mut entries: Vec<PathBuf> = std::fs::read_dir(run_dir)?.filter_map(|e| e.ok().map(|e| e.path())).collect();
    entries.sort();
    for p in entries {
        let name = p.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        if name.starts_with("evaluation") && name.ends_with(".json") {
            let a: EvaluationArtifact = serde_json::from_str(&std::fs::read_to_string(&p)?)
                .map_err(|e| AnalysisError::Malformed(format!("{name}: {e}")))?;
            evaluations.push(a);
        } else if name.starts_with("stretches") && name.ends_with(".csv") {
            stretch_files.push(p);
        }
    }
    if evaluations.is_empty() {
        return Err(AnalysisError::MissingArtifacts(format!("{}/evaluation*.json", run_dir.display())));
    }
    let out = run_dir.join("plots");
    std::fs::create_dir_all(&out)?;
    let mut files = ExportedFiles::default();
    let mut write = |name: &str, body: String| -> Result<(), AnalysisError> {
        let p = out.join(name);
        std::fs::write(&p, body)?;
        files.files.push(p);
        Ok(())
    };

    let pairs: Vec<(f64, &MetricReport)> = evaluations.iter().map(|a| (a.sigma_noise, &a.report)).collect();
    write("load_reaction.csv", load_reaction_csv(&pairs))?;
    let reports: Vec<&MetricReport> = evaluations.iter().map(|a| &a.report).collect();
    write("error_boxplot.csv", boxplot_csv(&reports))?;
    write("canonical.csv", canonical_curves_csv(51))?;

    let mut series: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for (sigma, r) in &pairs {
        for e in &r.per_experiment {
            if let Some(c) = e.reactions.first() {
                series.entry(format!("{} σ={sigma}", r.model)).or_default().push((e.load, c.predicted));
                series.entry("truth".into()).or_default().push((e.load, c.truth));
            }
        }
    }
    let mut series: Vec<(String, Vec<(f64, f64)>)> = series.into_iter().collect();
    for (_, pts) in &mut series {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        pts.dedup_by(|a, b| a.0 == b.0);
    }
    write("load_reaction.svg", svg_lines("Load-reaction curves", "load", "reaction", &series))?;

    let boxes: Vec<(String, BoxStats)> = boxplot_groups(reports[0]).into_iter().map(|(_, l, b)| (format!("{l}"), b)).collect();
    write("error_boxplot.svg", svg_boxplot("Nodal displacement error", "|d - d_ref|", &boxes))?;

    if !stretch_files.is_empty() {
        let mut clouds: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
        for p in &stretch_files {
            for (label, pt) in read_stretch_csv(&std::fs::read_to_string(p)?)? {
                clouds.entry(label).or_default().push(pt);
            }
        }
        for (k, pts) in canonical_curves(21) {
            clouds.insert(k.name().to_string(), pts.into_iter().map(|(_, a, b)| (a, b)).collect());
        }
        let series: Vec<(String, Vec<(f64, f64)>)> = clouds.into_iter().collect();
        write("stretches.svg", svg_scatter("Principal stretches", "lambda1", "lambda2", &series))?;
    }
    Ok(files)
}
