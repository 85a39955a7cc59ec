//! Self-contained SVG figures.

use std::fmt::Write as _;

use crate::surface::ValueSurface;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 130.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

/// Five-stop blue-to-yellow ramp.
fn colour(x: f64) -> String {
    const STOPS: [(f64, f64, f64); 5] = [
        (68.0, 1.0, 84.0),
        (59.0, 82.0, 139.0),
        (33.0, 145.0, 140.0),
        (94.0, 201.0, 98.0),
        (253.0, 231.0, 37.0),
    ];
    let x = if x.is_finite() { x.clamp(0.0, 1.0) } else { 0.0 } * 4.0;
    let i = (x as usize).min(3);
    let w = x - i as f64;
    let (a, b) = (STOPS[i], STOPS[i + 1]);
    let mix = |p: f64, q: f64| (p + w * (q - p)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{title}</text>"#, WIDTH / 2.0);
}

fn axes(out: &mut String, x: (f64, f64), y: (f64, f64), x_label: &str, y_label: &str) {
    let (x0, x1) = (LEFT, WIDTH - RIGHT);
    let (y0, y1) = (HEIGHT - BOTTOM, TOP);
    let _ = writeln!(out, r#"<path d="M{x0} {y1} V{y0} H{x1}" fill="none" stroke="black"/>"#);
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let px = x0 + f * (x1 - x0);
        let py = y0 + f * (y1 - y0);
        let _ = writeln!(out, r#"<line x1="{px}" y1="{y0}" x2="{px}" y2="{}" stroke="black"/>"#, y0 + 5.0);
        let _ = writeln!(
            out,
            r#"<text x="{px}" y="{}" text-anchor="middle">{:.3}</text>"#,
            y0 + 18.0,
            x.0 + f * (x.1 - x.0)
        );
        let _ = writeln!(out, r#"<line x1="{}" y1="{py}" x2="{x0}" y2="{py}" stroke="black"/>"#, x0 - 5.0);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="end">{:.3}</text>"#,
            x0 - 8.0,
            py + 4.0,
            y.0 + f * (y.1 - y.0)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        out,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{y_label}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    );
}

/// Heatmap of a surface over `(t, y)`, at most `max_cells` per axis.
pub fn heatmap(surface: &ValueSurface, title: &str, max_cells: usize) -> String {
    let l = *surface.lattice();
    let (t0, t1) = (l.t_start, l.t_end);
    let (ya, yb) = (l.y_first, l.y_last());
    let (lo, hi) = surface
        .values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let nt = max_cells.min(l.t_count()).max(1);
    let ny = max_cells.min(l.y_count).max(1);
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM, TOP);
    let cw = (x1 - x0) / nt as f64;
    let ch = (y0 - y1) / ny as f64;
    let mut out = String::new();
    header(&mut out, title);
    for a in 0..nt {
        let t = t0 + (a as f64 + 0.5) / nt as f64 * (t1 - t0);
        for b in 0..ny {
            let y = ya + (b as f64 + 0.5) / ny as f64 * (yb - ya);
            let v = surface.interpolate(t, y);
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                x0 + a as f64 * cw,
                y0 - (b + 1) as f64 * ch,
                cw + 0.3,
                ch + 0.3,
                colour((v - lo) / span)
            );
        }
    }
    axes(&mut out, (t0, t1), (ya, yb), "t", "y");
    let bar_x = WIDTH - RIGHT + 25.0;
    for k in 0..50 {
        let f = k as f64 / 50.0;
        let _ = writeln!(
            out,
            r#"<rect x="{bar_x}" y="{:.2}" width="18" height="{:.2}" fill="{}"/>"#,
            y0 - (f + 0.02) * (y0 - y1),
            (y0 - y1) / 50.0 + 0.3,
            colour(f + 0.01)
        );
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}">{hi:.4}</text>"#, bar_x + 22.0, y1 + 10.0);
    let _ = writeln!(out, r#"<text x="{}" y="{}">{lo:.4}</text>"#, bar_x + 22.0, y0);
    out.push_str("</svg>\n");
    out
}

/// A named polyline series.
pub struct Series<'a> {
    pub name: &'a str,
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub colour: &'a str,
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
}

/// Line chart of several series on shared axes.
pub fn line_chart(series: &[Series<'_>], title: &str, x_label: &str, y_label: &str) -> String {
    let (xa, xb) = range(series.iter().flat_map(|s| s.x.iter().copied()));
    let (mut ya, mut yb) = range(series.iter().flat_map(|s| s.y.iter().copied()));
    if !(yb > ya) {
        ya -= 0.5;
        yb += 0.5;
    }
    let pad = 0.05 * (yb - ya);
    let (ya, yb) = (ya - pad, yb + pad);
    let xs = if xb > xa { xb - xa } else { 1.0 };
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM, TOP);
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, (xa, xb), (ya, yb), x_label, y_label);
    for (k, s) in series.iter().enumerate() {
        let mut d = String::new();
        for (i, (&x, &y)) in s.x.iter().zip(s.y).enumerate() {
            let px = x0 + (x - xa) / xs * (x1 - x0);
            let py = y0 - (y - ya) / (yb - ya) * (y0 - y1);
            let _ = write!(d, "{}{px:.2} {py:.2} ", if i == 0 { "M" } else { "L" });
        }
        let _ = writeln!(out, r#"<path d="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#, d.trim_end(), s.colour);
        let ly = TOP + 20.0 + 18.0 * k as f64;
        let _ = writeln!(
            out,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{}" stroke-width="2"/>"#,
            x1 + 10.0,
            x1 + 30.0,
            s.colour
        );
        let _ = writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, x1 + 35.0, ly + 4.0, s.name);
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::Lattice;

    #[test]
    fn ramp_endpoints() {
        assert_eq!(colour(0.0), "#440154");
        assert_eq!(colour(1.0), "#fde725");
        assert_eq!(colour(f64::NAN), "#440154");
    }

    #[test]
    fn documents_are_closed() {
        let l = Lattice::spanning(0.0, 1.0, 10, 0.1, 1.0, 10).unwrap();
        let s = ValueSurface::from_fn(l, 0.0, |t: f64, y: f64| t + y);
        let svg = heatmap(&s, "test", 20);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<rect").count(), 1 + 11 * 10 + 50);
        let x = [0.0, 0.5, 1.0];
        let y = [1.0, 2.0, 1.5];
        let chart = line_chart(&[Series { name: "a", x: &x, y: &y, colour: "red" }], "c", "t", "v");
        assert!(chart.contains("M70.00"));
        assert!(chart.trim_end().ends_with("</svg>"));
    }
}
