use std::fmt::Write as _;

use super::{CutPattern, Point, Side};

const CUT_STROKE: &str = "#ff0000";
const ENGRAVE_STROKE: &str = "#0000ff";
const MARGIN_MM: f64 = 2.0;

/// Renders the pattern as SVG. Physical size is given in mm; one user unit
/// equals `scale` mm, so `scale = 1` keeps coordinates in mm.
///
/// Cut geometry lives in `<g id="cut">`, annotations in `<g id="engrave">`.
/// Coordinates are written with the shortest exact `f64` form, so parsing
/// them back yields the generated values bit for bit.
pub fn export_svg(cut: &CutPattern, scale: f64) -> String {
    let scale = if scale.is_finite() && scale > 0.0 {
        scale
    } else {
        1.0
    };
    let u = |mm: f64| mm / scale;
    let (min, max) = cut
        .bounds()
        .unwrap_or((Point::new(0.0, 0.0), Point::new(0.0, 0.0)));
    let (x0, y0) = (min.x - MARGIN_MM, min.y - MARGIN_MM);
    let (w, h) = (
        max.x - min.x + 2.0 * MARGIN_MM,
        max.y - min.y + 2.0 * MARGIN_MM,
    );

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}mm" height="{h}mm" viewBox="{} {} {} {}" data-scale="{scale}">"#,
        u(x0),
        u(y0),
        u(w),
        u(h)
    );

    let _ = writeln!(
        s,
        r#"<g id="cut" fill="none" stroke="{CUT_STROKE}" stroke-width="{}">"#,
        u(0.1)
    );
    for outline in &cut.outlines {
        let mut d = String::new();
        for (i, p) in outline.points.iter().enumerate() {
            let cmd = if i == 0 { 'M' } else { 'L' };
            let _ = write!(d, "{cmd}{} {} ", u(p.x), u(p.y));
        }
        d.push('Z');
        let _ = writeln!(s, r#"<path class="outline" d="{d}"/>"#);
    }
    for hole in &cut.holes {
        let _ = writeln!(
            s,
            r#"<circle class="hole" data-side="{}" data-loop="{}" data-index="{}" cx="{}" cy="{}" r="{}"/>"#,
            match hole.side {
                Side::Top => "top",
                Side::Bottom => "bottom",
            },
            hole.loop_index,
            hole.hole_index,
            u(hole.center.x),
            u(hole.center.y),
            u(hole.diameter / 2.0)
        );
    }
    for slot in &cut.slots {
        let r = slot.width / 2.0;
        let half = slot.length / 2.0 - r;
        let (cx, cy) = (slot.center.x, slot.center.y);
        let _ = writeln!(
            s,
            r#"<path class="slot" data-loop="{}" data-index="{}" data-length="{}" data-width="{}" d="M{} {} L{} {} A{} {} 0 0 1 {} {} L{} {} A{} {} 0 0 1 {} {} Z"/>"#,
            slot.loop_index,
            slot.hole_index,
            u(slot.length),
            u(slot.width),
            u(cx - half),
            u(cy - r),
            u(cx + half),
            u(cy - r),
            u(r),
            u(r),
            u(cx + half),
            u(cy + r),
            u(cx - half),
            u(cy + r),
            u(r),
            u(r),
            u(cx - half),
            u(cy - r),
        );
    }
    s.push_str("</g>\n");

    let _ = writeln!(
        s,
        r#"<g id="engrave" fill="none" stroke="{ENGRAVE_STROKE}" stroke-width="{}">"#,
        u(0.1)
    );
    let band = cut.band_height / 2.0;
    for mark in &cut.annotations.loops {
        let _ = writeln!(
            s,
            r#"<path class="loop" data-loop="{}" d="M{} {} L{} {}"/>"#,
            mark.loop_index,
            u(mark.start_x),
            u(-band),
            u(mark.start_x),
            u(-0.75 * band),
        );
        let _ = writeln!(
            s,
            r#"<text class="loop-label" x="{}" y="{}" font-size="{}" stroke="none" fill="{ENGRAVE_STROKE}">{}</text>"#,
            u(mark.start_x),
            u(band * 0.9),
            u(1.5),
            mark.loop_index + 1
        );
    }
    let arm = 0.5;
    for c in &cut.annotations.connections {
        let (x, y) = (c.position.x, c.position.y);
        let _ = writeln!(
            s,
            r#"<path class="connection" data-loop="{}" data-index="{}" data-angle="{}" d="M{} {} L{} {} M{} {} L{} {}"/>"#,
            c.loop_index,
            c.hole_index,
            c.angle,
            u(x - arm),
            u(y),
            u(x + arm),
            u(y),
            u(x),
            u(y - arm),
            u(x),
            u(y + arm),
        );
    }
    s.push_str("</g>\n</svg>\n");
    s
}
