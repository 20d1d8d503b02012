//! F0 contour plots as standalone SVG.
//!
//! The canvas is always `0 0 WIDTH HEIGHT`; every series is drawn as
//! polylines carrying a fixed CSS class so output can be compared against
//! golden files and restyled.

use std::fmt::Write as _;

pub const WIDTH: f64 = 960.0;
pub const HEIGHT: f64 = 360.0;
const LEFT: f64 = 56.0;
const RIGHT: f64 = 16.0;
const TOP: f64 = 28.0;
const BOTTOM: f64 = 36.0;

const NOTE_NAMES: [&str; 12] = ["C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"];

/// One curve; `None` frames break the line.
#[derive(Debug, Clone)]
pub struct Series {
    pub class: &'static str,
    pub label: &'static str,
    /// Draw as a staircase over frame edges instead of through frame
    /// centres.
    pub steps: bool,
    pub cents: Vec<Option<f64>>,
}

#[derive(Debug, Clone)]
pub struct Plot {
    pub title: String,
    pub frame_shift_s: f64,
    pub series: Vec<Series>,
}

const STYLE: &str = "\
.frame { fill: none; stroke: #444; stroke-width: 1; }
.grid { stroke: #ddd; stroke-width: 0.5; }
.tick { font: 10px sans-serif; fill: #444; }
.title { font: 12px sans-serif; fill: #222; }
.series { fill: none; stroke-linejoin: round; }
.note-pitch { stroke: #999; stroke-width: 3; }
.f0 { stroke: #c0392b; stroke-width: 1.2; }
.f0-smooth { stroke: #2471a3; stroke-width: 1.2; stroke-dasharray: 4 2; }
.f0-reference { stroke: #1e8449; stroke-width: 1; opacity: 0.8; }
";

fn note_name(semitones_from_a4: i64) -> String {
    let midi = 69 + semitones_from_a4;
    let octave = midi.div_euclid(12) - 1;
    format!("{}{octave}", NOTE_NAMES[midi.rem_euclid(12) as usize])
}

fn time_step(seconds: f64) -> f64 {
    for step in [0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 30.0, 60.0] {
        if seconds / step <= 12.0 {
            return step;
        }
    }
    120.0
}

impl Plot {
    pub fn to_svg(&self) -> String {
        let frames = self.series.iter().map(|s| s.cents.len()).max().unwrap_or(0).max(1);
        let values = self
            .series
            .iter()
            .flat_map(|s| s.cents.iter().flatten())
            .filter(|v| v.is_finite());
        let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let (lo, hi) = if lo.is_finite() {
            (((lo - 50.0) / 100.0).floor() * 100.0, ((hi + 50.0) / 100.0).ceil() * 100.0)
        } else {
            (-100.0, 100.0)
        };
        let plot_w = WIDTH - LEFT - RIGHT;
        let plot_h = HEIGHT - TOP - BOTTOM;
        let x = |t: f64| LEFT + plot_w * t / frames as f64;
        let y = |c: f64| TOP + plot_h * (hi - c) / (hi - lo);

        let mut s = String::new();
        let _ = writeln!(
            s,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" width=\"{WIDTH}\" height=\"{HEIGHT}\">"
        );
        let _ = writeln!(s, "<style>\n{STYLE}</style>");
        let _ = writeln!(s, "<text class=\"title\" x=\"{LEFT}\" y=\"16\">{}</text>", escape(&self.title));

        let _ = writeln!(s, "<g class=\"axes\">");
        let span = hi - lo;
        let every = if span <= 1200.0 { 100.0 } else { ((span / 1200.0).ceil()) * 100.0 };
        let mut c = lo;
        while c <= hi + 1e-9 {
            let yy = y(c);
            let _ = writeln!(
                s,
                "<line class=\"grid\" x1=\"{LEFT:.2}\" y1=\"{yy:.2}\" x2=\"{:.2}\" y2=\"{yy:.2}\"/>",
                WIDTH - RIGHT
            );
            let _ = writeln!(
                s,
                "<text class=\"tick\" x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>",
                LEFT - 4.0,
                yy + 3.0,
                note_name((c / 100.0).round() as i64)
            );
            c += every;
        }
        let seconds = frames as f64 * self.frame_shift_s;
        let step = time_step(seconds);
        let mut k = 0usize;
        loop {
            let sec = k as f64 * step;
            if sec > seconds + 1e-9 {
                break;
            }
            let xx = x(sec / self.frame_shift_s);
            let _ = writeln!(
                s,
                "<text class=\"tick\" x=\"{xx:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
                HEIGHT - BOTTOM + 14.0,
                trim_float(sec)
            );
            k += 1;
        }
        let _ = writeln!(
            s,
            "<text class=\"tick\" x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">time [s]</text>",
            LEFT + plot_w / 2.0,
            HEIGHT - 4.0
        );
        let _ = writeln!(
            s,
            "<rect class=\"frame\" x=\"{LEFT:.2}\" y=\"{TOP:.2}\" width=\"{plot_w:.2}\" height=\"{plot_h:.2}\"/>"
        );
        let _ = writeln!(s, "</g>");

        for series in &self.series {
            let _ = writeln!(s, "<g class=\"series {}\">", series.class);
            let _ = writeln!(s, "<title>{}</title>", escape(series.label));
            for run in runs(&series.cents, series.steps) {
                let mut points = String::new();
                for (t, v) in run {
                    let _ = write!(points, "{:.2},{:.2} ", x(t), y(v));
                }
                let _ = writeln!(s, "<polyline points=\"{}\"/>", points.trim_end());
            }
            let _ = writeln!(s, "</g>");
        }

        let _ = writeln!(s, "<g class=\"legend\">");
        let mut lx = WIDTH - RIGHT;
        for series in self.series.iter().rev() {
            lx -= 12.0 + 6.5 * series.label.len() as f64 + 24.0;
            let _ = writeln!(
                s,
                "<line class=\"series {}\" x1=\"{lx:.2}\" y1=\"12\" x2=\"{:.2}\" y2=\"12\"/>",
                series.class,
                lx + 18.0
            );
            let _ = writeln!(
                s,
                "<text class=\"tick\" x=\"{:.2}\" y=\"15\">{}</text>",
                lx + 22.0,
                escape(series.label)
            );
        }
        let _ = writeln!(s, "</g>");
        s.push_str("</svg>\n");
        s
    }
}

/// Contiguous defined stretches as `(frame position, cents)` points.
fn runs(values: &[Option<f64>], steps: bool) -> Vec<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    let mut cur: Vec<(f64, f64)> = Vec::new();
    for (t, v) in values.iter().enumerate() {
        let t = t as f64;
        match v {
            Some(v) if v.is_finite() => {
                if !steps {
                    cur.push((t + 0.5, *v));
                    continue;
                }
                match cur.last() {
                    Some(&(_, last)) if last == *v => {}
                    Some(&(_, last)) => {
                        cur.push((t, last));
                        cur.push((t, *v));
                    }
                    None => cur.push((t, *v)),
                }
            }
            _ => {
                if let Some(&(_, last)) = cur.last() {
                    if steps {
                        cur.push((t, last));
                    }
                    out.push(std::mem::take(&mut cur));
                }
            }
        }
    }
    if let Some(&(_, last)) = cur.last() {
        if steps {
            cur.push((values.len() as f64, last));
        }
        out.push(cur);
    }
    out
}

fn trim_float(v: f64) -> String {
    let s = format!("{v:.1}");
    s.strip_suffix(".0").map(str::to_string).unwrap_or(s)
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plot() -> Plot {
        Plot {
            title: "demo <1>".into(),
            frame_shift_s: 0.005,
            series: vec![
                Series {
                    class: "note-pitch",
                    label: "note",
                    steps: true,
                    cents: vec![Some(0.0), Some(0.0), None, Some(200.0), Some(200.0)],
                },
                Series {
                    class: "f0",
                    label: "F0",
                    steps: false,
                    cents: vec![Some(5.0), Some(10.0), None, None, Some(190.0)],
                },
            ],
        }
    }

    #[test]
    fn fixed_canvas_and_classes() {
        let svg = plot().to_svg();
        assert!(svg.starts_with("<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 960 360\""));
        assert!(svg.contains("<g class=\"series note-pitch\">"));
        assert!(svg.contains("<g class=\"series f0\">"));
        assert!(svg.contains("demo &lt;1&gt;"));
        assert_eq!(svg.matches("<polyline").count(), 4);
        assert_eq!(svg, plot().to_svg());
    }

    #[test]
    fn unvoiced_frames_split_lines() {
        let v = [Some(1.0), Some(2.0), None, Some(3.0)];
        let r = runs(&v, true);
        assert_eq!(r.len(), 2);
        assert_eq!(r[0], vec![(0.0, 1.0), (1.0, 1.0), (1.0, 2.0), (2.0, 2.0)]);
        assert_eq!(r[1], vec![(3.0, 3.0), (4.0, 3.0)]);
        let r = runs(&v, false);
        assert_eq!(r[0], vec![(0.5, 1.0), (1.5, 2.0)]);
        assert_eq!(r[1], vec![(3.5, 3.0)]);
    }

    #[test]
    fn note_names() {
        assert_eq!(note_name(0), "A4");
        assert_eq!(note_name(-9), "C4");
        assert_eq!(note_name(3), "C5");
    }
}
