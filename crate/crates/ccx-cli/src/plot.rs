//! SVG and CSV figures from run artifacts. Output bytes depend only on the
//! artifact bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ccx_core::boundary::{CircleSample, DiagnosticReport};
use ccx_core::cone::CurveRow;
use ccx_core::io::peek_kind;

use crate::{load_space, At, CliError, CliResult, DiagnosticsArtifact, FailureKind, RunDir, Stage};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum PlotKind {
    BoundaryCircle,
    BoundCurve,
    HomotopyHeatmap,
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 48.0;

fn mismatch(kind: PlotKind, artifact: &Path) -> CliError {
    CliError::new(Stage::Plot, FailureKind::Stage, format!("{kind:?} cannot be drawn from {}", artifact.display()))
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::new(Stage::Plot, FailureKind::Io, format!("{}: {e}", path.display())))
}

fn csv_rows(text: &str) -> CliResult<Vec<csv::StringRecord>> {
    csv::Reader::from_reader(text.as_bytes())
        .records()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::new(Stage::Plot, FailureKind::Parse, e.to_string()))
}

fn num(s: &str) -> CliResult<f64> {
    s.parse().map_err(|_| CliError::new(Stage::Plot, FailureKind::Parse, format!("bad number {s:?}")))
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        let span = |it: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = it.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            if lo > hi {
                (0.0, 1.0)
            } else if lo == hi {
                (lo - 0.5, hi + 0.5)
            } else {
                (lo, hi)
            }
        };
        Frame { x: span(&mut xs.clone()), y: span(&mut ys.clone()) }
    }

    fn px(&self, x: f64) -> f64 {
        PAD + (x - self.x.0) / (self.x.1 - self.x.0) * (W - 2.0 * PAD)
    }

    fn py(&self, y: f64) -> f64 {
        H - PAD - (y - self.y.0) / (self.y.1 - self.y.0) * (H - 2.0 * PAD)
    }
}

fn svg_open(title: &str, xlabel: &str, ylabel: &str, frame: Option<&Frame>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" font-size="14" text-anchor="middle">{title}</text>"#, W / 2.0);
    let _ = writeln!(
        s,
        r#"<path d="M{PAD} {PAD} V{} H{}" fill="none" stroke="black"/>"#,
        H - PAD,
        W - PAD
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">{xlabel}</text>"#, W / 2.0, H - 12.0);
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {})">{ylabel}</text>"#,
        H / 2.0,
        H / 2.0
    );
    if let Some(f) = frame {
        for (x, y, anchor, v) in [
            (PAD, H - PAD + 16.0, "start", f.x.0),
            (W - PAD, H - PAD + 16.0, "end", f.x.1),
            (PAD - 4.0, H - PAD, "end", f.y.0),
            (PAD - 4.0, PAD + 4.0, "end", f.y.1),
        ] {
            let _ = writeln!(s, r#"<text x="{x}" y="{y}" font-size="10" text-anchor="{anchor}">{v:.3}</text>"#);
        }
    }
    s
}

fn placeholder(title: &str, caveat: &str) -> String {
    let mut s = svg_open(title, "", "", None);
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="13" text-anchor="middle" fill="gray">{caveat}</text>"#, W / 2.0, H / 2.0);
    s.push_str("</svg>\n");
    s
}

fn polyline(s: &mut String, f: &Frame, pts: &[(f64, f64)], color: &str) {
    let d: Vec<String> = pts.iter().filter(|p| p.1.is_finite()).map(|&(x, y)| format!("{:.3},{:.3}", f.px(x), f.py(y))).collect();
    let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}"/>"#, d.join(" "));
}

fn circle_samples(text: &str) -> CliResult<Option<Vec<CircleSample>>> {
    let a: DiagnosticsArtifact = ccx_core::io::open_envelope(text, "boundary-diagnostics").at(Stage::Plot)?;
    Ok(match a.circle {
        Some(DiagnosticReport::Circle { samples, .. }) => Some(samples),
        _ => None,
    })
}

fn curve_rows(artifact: &Path, text: &str) -> CliResult<Vec<CurveRow>> {
    if artifact.extension().is_some_and(|e| e == "csv") {
        let mut rows = Vec::new();
        for r in csv_rows(text)? {
            if r.len() != 3 {
                return Err(mismatch(PlotKind::BoundCurve, artifact));
            }
            rows.push(CurveRow { t: num(&r[0])?, displacement: num(&r[1])?, bound: num(&r[2])? });
        }
        return Ok(rows);
    }
    let a: crate::ConeArtifact = ccx_core::io::open_envelope(text, "cone-audit").at(Stage::Plot)?;
    Ok(a.roundtrip.curve)
}

/// `out` ending in `.csv` gives the plotted data, anything else an SVG.
pub fn plot(artifact: &Path, kind: PlotKind, out: &Path) -> CliResult<()> {
    let text = read(artifact)?;
    let is_json = artifact.extension().is_some_and(|e| e == "json");
    let want_csv = out.extension().is_some_and(|e| e == "csv");
    if is_json {
        let k = peek_kind(&text).at(Stage::Plot)?;
        let ok = match kind {
            PlotKind::BoundaryCircle => k == "boundary-diagnostics",
            PlotKind::BoundCurve => k == "cone-audit",
            PlotKind::HomotopyHeatmap => false,
        };
        if !ok {
            return Err(mismatch(kind, artifact));
        }
    }
    let bytes = match kind {
        PlotKind::BoundaryCircle => {
            if !is_json {
                return Err(mismatch(kind, artifact));
            }
            let samples = circle_samples(&text)?.unwrap_or_default();
            if want_csv {
                let mut s = String::from("a,b,angle,product,invariant\n");
                for c in &samples {
                    let _ = writeln!(s, "{},{},{},{},{}", c.a, c.b, c.angle, c.product, c.invariant);
                }
                s
            } else if samples.is_empty() {
                placeholder("boundary classes", "no class pairs: boundary empty or without coordinates")
            } else {
                let f = Frame::new(samples.iter().map(|c| c.angle), samples.iter().map(|c| c.product));
                let mut s = svg_open("boundary classes: product against angle", "angle", "product", Some(&f));
                for c in &samples {
                    let _ = writeln!(s, r#"<circle cx="{:.3}" cy="{:.3}" r="2" fill="steelblue"/>"#, f.px(c.angle), f.py(c.product));
                }
                s.push_str("</svg>\n");
                s
            }
        }
        PlotKind::BoundCurve => {
            let rows = curve_rows(artifact, &text)?;
            if want_csv {
                let mut s = String::from("t,displacement,bound\n");
                for r in &rows {
                    let _ = writeln!(s, "{},{},{}", r.t, r.displacement, r.bound);
                }
                s
            } else if rows.is_empty() {
                placeholder("roundtrip bound", "no sampled parameters")
            } else {
                let ys = rows.iter().flat_map(|r| [r.displacement, r.bound]);
                let f = Frame::new(rows.iter().map(|r| r.t), ys);
                let mut s = svg_open("log of exp: displacement and bound", "t", "distance", Some(&f));
                polyline(&mut s, &f, &rows.iter().map(|r| (r.t, r.bound)).collect::<Vec<_>>(), "firebrick");
                polyline(&mut s, &f, &rows.iter().map(|r| (r.t, r.displacement)).collect::<Vec<_>>(), "steelblue");
                s.push_str("</svg>\n");
                s
            }
        }
        PlotKind::HomotopyHeatmap => {
            if artifact.extension().is_none_or(|e| e != "csv") {
                return Err(mismatch(kind, artifact));
            }
            let dir = RunDir::open(artifact.parent().unwrap_or(Path::new(".")), Stage::Plot)?;
            let (_, space, _) = load_space(&dir, Stage::Plot)?;
            let mut cells = Vec::new();
            for r in csv_rows(&text)? {
                if r.len() != 3 {
                    return Err(mismatch(kind, artifact));
                }
                let v: u32 = num(&r[0])? as u32;
                let p: u32 = num(&r[2])? as u32;
                if v as usize >= space.len() || p as usize >= space.len() {
                    return Err(CliError::new(Stage::Plot, FailureKind::Parse, "track point outside the space"));
                }
                cells.push((v, num(&r[1])?, space.d(v, p)));
            }
            if want_csv {
                let mut s = String::from("v,t,displacement\n");
                for (v, t, d) in &cells {
                    let _ = writeln!(s, "{v},{t},{d}");
                }
                s
            } else if cells.is_empty() {
                placeholder("homotopy tracks", "no tracks")
            } else {
                let f = Frame::new(cells.iter().map(|c| c.1), cells.iter().map(|c| c.0 as f64));
                let dmax = cells.iter().map(|c| c.2).fold(0.0, f64::max).max(1e-12);
                let vmax = cells.iter().map(|c| c.0).max().unwrap_or(0) as f64 + 1.0;
                let tmax = cells.iter().map(|c| c.1).fold(0.0, f64::max) + 1.0;
                let (cw, ch) = ((W - 2.0 * PAD) / tmax, (H - 2.0 * PAD) / vmax);
                let mut s = svg_open("homotopy displacement d(v, H(v, t))", "t", "v", Some(&f));
                for (v, t, d) in &cells {
                    let shade = 255 - (d / dmax * 220.0).round() as u8;
                    let _ = writeln!(
                        s,
                        r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="rgb({shade},{shade},255)"/>"#,
                        PAD + t * cw,
                        PAD + *v as f64 * ch,
                        cw,
                        ch
                    );
                }
                s.push_str("</svg>\n");
                s
            }
        }
    };
    fs::write(out, bytes).map_err(|e| CliError::new(Stage::Plot, FailureKind::Io, format!("{}: {e}", out.display())))
}
