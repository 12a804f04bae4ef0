//! Minimal SVG line plot: agent states on top, the spread and its
//! envelope below.

use std::fmt::Write;

use crate::dynamics::Trajectory;

const WIDTH: f64 = 1200.0;
const HEIGHT: f64 = 600.0;
const MARGIN: f64 = 50.0;
const MAX_POINTS: usize = 2000;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

struct Panel {
    top: f64,
    height: f64,
    t: (f64, f64),
    y: (f64, f64),
}

impl Panel {
    fn new(top: f64, height: f64, t: (f64, f64), y: (f64, f64)) -> Self {
        let (lo, hi) = if y.1 > y.0 { y } else { (y.0 - 1.0, y.0 + 1.0) };
        let pad = 0.05 * (hi - lo);
        let t = if t.1 > t.0 { t } else { (t.0, t.0 + 1.0) };
        Panel { top, height, t, y: (lo - pad, hi + pad) }
    }

    fn px(&self, t: f64) -> f64 {
        MARGIN + (t - self.t.0) / (self.t.1 - self.t.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        self.top + self.height - (y - self.y.0) / (self.y.1 - self.y.0) * self.height
    }

    fn polyline(&self, out: &mut String, points: impl Iterator<Item = (f64, f64)>, style: &str) {
        let coords: Vec<String> = points.map(|(t, y)| format!("{:.2},{:.2}", self.px(t), self.py(y))).collect();
        let _ = writeln!(out, r#"<polyline fill="none" {style} points="{}"/>"#, coords.join(" "));
    }

    fn frame(&self, out: &mut String, label: &str) {
        let _ = writeln!(
            out,
            r##"<rect x="{MARGIN}" y="{}" width="{}" height="{}" fill="none" stroke="#444"/>"##,
            self.top,
            WIDTH - 2.0 * MARGIN,
            self.height
        );
        let _ = writeln!(out, r#"<text x="{}" y="{}" font-size="12">{label}</text>"#, MARGIN, self.top - 6.0);
        for (value, anchor) in [(self.y.1, self.top + 12.0), (self.y.0, self.top + self.height - 2.0)] {
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{anchor}" font-size="11" text-anchor="end">{value:.3}</text>"#,
                MARGIN - 4.0
            );
        }
    }
}

/// Renders the trajectory; with `rate` the dashed curve
/// `max(0, D(0) + rate * t)` is overlaid on the spread.
pub fn render(traj: &Trajectory, rate: Option<f64>, title: &str) -> String {
    let stride = traj.len().div_ceil(MAX_POINTS).max(1);
    let idx: Vec<usize> = (0..traj.len()).step_by(stride).chain(std::iter::once(traj.len() - 1)).collect();
    let t = (traj.times[0], traj.times[traj.len() - 1]);
    let lo = traj.diagnostics.iter().map(|d| d.min).fold(f64::INFINITY, f64::min);
    let hi = traj.diagnostics.iter().map(|d| d.max).fold(f64::NEG_INFINITY, f64::max);
    let d0 = traj.diagnostics[0].spread;
    let envelope = |s: f64| rate.map(|r| (d0 + r * (s - t.0)).max(0.0));
    let spread_hi = traj
        .spreads()
        .chain([envelope(t.0), envelope(t.1)].into_iter().flatten())
        .fold(0.0, f64::max);

    let states = Panel::new(40.0, 330.0, t, (lo, hi));
    let spread = Panel::new(420.0, 140.0, t, (0.0, spread_hi));

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<title>{}</title>"#, escape(title));
    states.frame(&mut out, &format!("{} : states", escape(title)));
    spread.frame(&mut out, "spread D = M - m");
    for i in 0..traj.n() {
        let color = PALETTE[i % PALETTE.len()];
        states.polyline(
            &mut out,
            idx.iter().map(|&k| (traj.times[k], traj.states[k][i])),
            &format!(r#"stroke="{color}" stroke-width="1.2""#),
        );
    }
    spread.polyline(
        &mut out,
        idx.iter().map(|&k| (traj.times[k], traj.diagnostics[k].spread)),
        r##"stroke="#000" stroke-width="1.2""##,
    );
    if let Some(r) = rate {
        let mut pts = vec![(t.0, d0.max(0.0))];
        if r < 0.0 {
            let tc = t.0 + d0 / -r;
            if tc < t.1 {
                pts.push((tc, 0.0));
            }
        }
        pts.push((t.1, envelope(t.1).unwrap_or(0.0)));
        spread.polyline(&mut out, pts.into_iter(), r##"stroke="#d62728" stroke-width="1.5" stroke-dasharray="8 5""##);
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-size="11" text-anchor="middle">t = {:.3} .. {:.3}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0,
        t.0,
        t.1
    );
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{simulate, DisturbanceSpec, SimConfig};
    use crate::testing::example2;

    #[test]
    fn renders_one_line_per_agent_plus_spread_and_envelope() {
        let traj = simulate(&example2(), &[0.0, 1.0, 2.0], &DisturbanceSpec::Zero, &SimConfig::default()).unwrap();
        let svg = render(&traj, Some(1.0), "a < b");
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains(r#"width="1200" height="600""#));
        assert_eq!(svg.matches("<polyline").count(), 5);
        assert!(svg.contains("stroke-dasharray"));
        assert!(svg.contains("a &lt; b"));
        let plain = render(&traj, None, "x");
        assert_eq!(plain.matches("<polyline").count(), 4);
    }

    #[test]
    fn flat_trajectory_renders() {
        let traj = Trajectory::from_states(vec![0.0], vec![vec![1.0, 1.0]], 1e-9).unwrap();
        let svg = render(&traj, Some(-1.0), "flat");
        assert!(!svg.contains("NaN"));
    }
}
