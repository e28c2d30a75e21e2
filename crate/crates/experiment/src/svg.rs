//! Self-contained SVG figures for run reports.
//!
//! 1D reports draw the learned function, the target and the natural cubic
//! spline with vertical data markers. Radial reports draw the radial mean
//! with a ±1 std band and the rescaled reference profile. Coordinates are
//! printed with fixed precision so identical reports give identical bytes.

use std::fmt::Write as _;

use minnorm_core::analysis_radial::eval_profile;

use crate::analysis::{OneDReport, RadialReport, Report};
use crate::error::{ExpError, ExpResult};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 56.0;
const SAMPLES: usize = 401;

const LEARNED: &str = "#d62728";
const TARGET: &str = "#1f77b4";
const SPLINE: &str = "#2ca02c";
const REFERENCE: &str = "#e377c2";

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(x: (f64, f64), ys: impl Iterator<Item = f64>) -> Self {
        let (mut lo, mut hi) = ys.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        let pad = 0.05 * (hi - lo).max(1e-9);
        Self { x, y: (lo - pad, hi + pad) }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        let y = y.clamp(self.y.0, self.y.1);
        HEIGHT - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }

    fn points(&self, pts: impl Iterator<Item = (f64, f64)>) -> String {
        let mut s = String::new();
        for (x, y) in pts {
            if !s.is_empty() {
                s.push(' ');
            }
            let _ = write!(s, "{:.2},{:.2}", self.px(x), self.py(y));
        }
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title));
}

fn axes(out: &mut String, f: &Frame, xlabel: &str, ylabel: &str) {
    let (x0, x1) = (MARGIN, WIDTH - MARGIN);
    let (y0, y1) = (HEIGHT - MARGIN, MARGIN);
    let _ = writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    for (v, anchor) in [(f.x.0, "start"), (f.x.1, "end")] {
        let _ = writeln!(out, r#"<text x="{:.2}" y="{}" text-anchor="{anchor}">{v:.3}</text>"#, f.px(v), y0 + 16.0);
    }
    for v in [f.y.0, f.y.1] {
        let _ = writeln!(out, r#"<text x="{}" y="{:.2}" text-anchor="end">{v:.3}</text>"#, x0 - 4.0, f.py(v) + 4.0);
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, WIDTH / 2.0, HEIGHT - 12.0, escape(xlabel));
    let _ = writeln!(
        out,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(ylabel)
    );
}

fn polyline(out: &mut String, points: &str, color: &str, class: &str) {
    let _ = writeln!(out, r#"<polyline class="{class}" points="{points}" fill="none" stroke="{color}" stroke-width="1.5"/>"#);
}

fn legend(out: &mut String, entries: &[(&str, String)]) {
    for (i, (color, label)) in entries.iter().enumerate() {
        let y = MARGIN + 4.0 + 16.0 * i as f64;
        let x = WIDTH - MARGIN - 200.0;
        let _ = writeln!(out, r#"<rect x="{x}" y="{}" width="12" height="4" fill="{color}"/>"#, y - 4.0);
        let _ = writeln!(out, r#"<text x="{}" y="{y}">{}</text>"#, x + 18.0, escape(label));
    }
}

fn grid(lo: f64, hi: f64) -> impl Iterator<Item = f64> {
    (0..SAMPLES).map(move |i| lo + (hi - lo) * i as f64 / (SAMPLES - 1) as f64)
}

fn render_1d(r: &OneDReport) -> ExpResult<String> {
    let xs = r.data.x.as_slice();
    if xs.is_empty() {
        return Err(ExpError::Core(minnorm_core::Error::Domain("report has no data".into())));
    }
    let (lo, hi) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let pad = 0.25 * (hi - lo).max(1.0);
    let (lo, hi) = (lo - pad, hi + pad);
    let learned: Vec<(f64, f64)> = grid(lo, hi).map(|x| (x, r.pwl.eval(x))).collect();
    let target: Vec<(f64, f64)> = grid(lo, hi).map(|x| (x, r.target.eval(x))).collect();
    let spline: Option<Vec<(f64, f64)>> = r.spline.as_ref().map(|s| grid(lo, hi).map(|x| (x, s.eval(x))).collect());
    let ys = learned.iter().chain(&target).chain(spline.iter().flatten()).map(|p| p.1).chain(r.data.y.iter().copied());
    let f = Frame::new((lo, hi), ys);

    let mut out = String::new();
    header(&mut out, &r.run_id);
    axes(&mut out, &f, "x", "f(x)");
    for &x in xs {
        let px = f.px(x);
        let _ = writeln!(
            out,
            r##"<line class="data" x1="{px:.2}" y1="{}" x2="{px:.2}" y2="{}" stroke="#bbbbbb" stroke-width="0.75"/>"##,
            MARGIN,
            HEIGHT - MARGIN
        );
    }
    polyline(&mut out, &f.points(target.into_iter()), TARGET, "target");
    if let Some(s) = spline {
        polyline(&mut out, &f.points(s.into_iter()), SPLINE, "spline");
    }
    polyline(&mut out, &f.points(learned.into_iter()), LEARNED, "learned");
    legend(
        &mut out,
        &[
            (LEARNED, format!("{} learned", r.run_id)),
            (TARGET, "target".into()),
            (SPLINE, "natural cubic spline".into()),
        ],
    );
    out.push_str("</svg>\n");
    Ok(out)
}

fn render_radial(r: &RadialReport) -> ExpResult<String> {
    let p = &r.profile;
    if p.is_empty() {
        return Err(ExpError::Core(minnorm_core::Error::Domain("radial profile is empty".into())));
    }
    let reference: Vec<(f64, f64)> =
        p.radii.iter().map(|&rho| Ok((rho, eval_profile(&r.reference, r.fit.r * rho)?))).collect::<ExpResult<_>>()?;
    let std = |k: usize| if p.has_std { p.std[k] } else { 0.0 };
    let upper: Vec<(f64, f64)> = (0..p.len()).map(|k| (p.radii[k], p.mean[k] + std(k))).collect();
    let lower: Vec<(f64, f64)> = (0..p.len()).rev().map(|k| (p.radii[k], p.mean[k] - std(k))).collect();
    let ys = upper.iter().chain(&lower).chain(&reference).map(|q| q.1);
    let (lo, hi) = (p.radii[0], p.radii[p.len() - 1]);
    let f = Frame::new((lo, if hi > lo { hi } else { lo + 1.0 }), ys);

    let mut out = String::new();
    header(&mut out, &r.run_id);
    axes(&mut out, &f, "radius", "radial mean");
    let band = f.points(upper.into_iter().chain(lower));
    let _ = writeln!(out, r#"<polygon class="band" points="{band}" fill="{LEARNED}" fill-opacity="0.2" stroke="none"/>"#);
    polyline(&mut out, &f.points(p.radii.iter().copied().zip(p.mean.iter().copied())), LEARNED, "mean");
    polyline(&mut out, &f.points(reference.into_iter()), REFERENCE, "reference");
    legend(
        &mut out,
        &[
            (LEARNED, format!("{} mean ± std", r.run_id)),
            (REFERENCE, format!("reference at r = {:.4}", r.fit.r)),
        ],
    );
    out.push_str("</svg>\n");
    Ok(out)
}

/// SVG document for a report.
pub fn render_svg(report: &Report) -> ExpResult<String> {
    match report {
        Report::OneD(r) => render_1d(r),
        Report::Radial(r) => render_radial(r),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;
    use crate::run::run_training;
    use minnorm_core::analysis_radial::RadialProfile;
    use std::path::Path;

    fn report(text: &str) -> Report {
        let cfg = RunConfig::parse(text, Path::new(".")).unwrap();
        run_training(&cfg, None).unwrap().report.unwrap()
    }

    #[test]
    fn one_d_figure_structure() {
        let r = report("run_id = fig\nmodel.m = 10\noptim.epochs = 20\ndata.k = 4\n");
        let svg = render_svg(&r).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 3);
        assert_eq!(svg.matches(r#"class="data""#).count(), 8);
        assert!(svg.contains("fig learned"));
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert_eq!(svg, render_svg(&r).unwrap());
    }

    #[test]
    fn radial_figure_structure() {
        let r = report(
            "run_id = rad\ndata.kind = radial\ndata.d = 3\ndata.n = 40\nmodel.m = 10\noptim.epochs = 5\nanalysis.n_dirs = 8\nanalysis.radii = 0:3:16\n",
        );
        let svg = render_svg(&r).unwrap();
        assert_eq!(svg.matches("<polygon").count(), 1);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains(r#"class="mean""#) && svg.contains(r#"class="reference""#));
        assert_eq!(svg, render_svg(&r).unwrap());
    }

    #[test]
    fn empty_report_is_a_domain_error() {
        let Report::Radial(mut r) = report(
            "data.kind = radial\ndata.d = 2\ndata.n = 10\nmodel.m = 4\noptim.epochs = 1\nanalysis.n_dirs = 4\nanalysis.radii = 0:1:3\n",
        ) else {
            panic!("radial report expected")
        };
        r.profile = RadialProfile { radii: vec![], mean: vec![], std: vec![], has_std: false, n_dirs: 0, d: 2 };
        let e = render_svg(&Report::Radial(r)).unwrap_err();
        assert!(matches!(e, ExpError::Core(minnorm_core::Error::Domain(_))), "{e}");
    }
}
