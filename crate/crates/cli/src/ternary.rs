//! Ternary-plot export: barycentric coordinates as CSV and a static SVG
//! scatter.

use std::collections::BTreeMap;
use std::fmt::Write;

use hjd_core::distribution::{ternary_coordinates, LabelDistribution};

const SIZE: f64 = 480.0;
const MARGIN: f64 = 40.0;

/// `uid,p_e,p_n,p_c,x,y` with a header row, in uid order.
pub fn ternary_csv(points: &BTreeMap<String, LabelDistribution>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["uid", "p_e", "p_n", "p_c", "x", "y"])
        .expect("in-memory write");
    for (uid, d) in points {
        let (x, y) = ternary_coordinates(d);
        let [e, n, c] = d.as_array();
        w.write_record([
            uid.clone(),
            e.to_string(),
            n.to_string(),
            c.to_string(),
            x.to_string(),
            y.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv is utf-8")
}

fn to_px(x: f64, y: f64) -> (f64, f64) {
    let side = SIZE - 2.0 * MARGIN;
    (MARGIN + x * side, SIZE - MARGIN - y * side)
}

/// Triangle with E bottom-left, C bottom-right and N on top; one dot per
/// distribution.
pub fn ternary_svg(title: &str, points: &BTreeMap<String, LabelDistribution>) -> String {
    let (ex, ey) = to_px(0.0, 0.0);
    let (cx, cy) = to_px(1.0, 0.0);
    let (nx, ny) = to_px(0.5, 3f64.sqrt() / 2.0);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
        SIZE / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<polygon points="{ex:.1},{ey:.1} {cx:.1},{cy:.1} {nx:.1},{ny:.1}" fill="none" stroke="black" stroke-width="1"/>"#
    );
    for (label, x, y, anchor) in [
        ("E", ex - 6.0, ey + 16.0, "end"),
        ("C", cx + 6.0, cy + 16.0, "start"),
        ("N", nx, ny - 8.0, "middle"),
    ] {
        let _ = writeln!(
            s,
            r#"<text x="{x:.1}" y="{y:.1}" text-anchor="{anchor}" font-family="sans-serif" font-size="13">{label}</text>"#
        );
    }
    for (uid, d) in points {
        let (x, y) = ternary_coordinates(d);
        let (px, py) = to_px(x, y);
        let _ = writeln!(
            s,
            r#"<circle cx="{px:.2}" cy="{py:.2}" r="3" fill="steelblue" fill-opacity="0.7"><title>{}</title></circle>"#,
            escape(uid)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}
