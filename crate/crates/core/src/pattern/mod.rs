//! Flat cut pattern for the flap sheath.
//!
//! The strip runs along +x. Its mid band spans `y in [-h/2, h/2]` with
//! stations spaced `d` apart, `flaps_per_section` stations per sewing loop.
//! Each side of the band has a row of guide holes, one per station, at
//! `y = +-h/4`. Flaps alternate sides station by station, so each side
//! repeats every `2d`. Every flap is a parallelogram of base `W` and length
//! `L`, leaning by the inclination angle; the two sides lean in opposite
//! directions (point symmetry about the strip axis).
//!
//! Each loop has a slot of length `D` at every `connection_interval`-th
//! station, on the centreline and running along the strip. The matching
//! 120 deg connection markers and loop boundaries are engraved rather than
//! cut.

mod svg;

pub use svg::export_svg;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sheath::FlapPattern;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

/// Closed polyline; the last point connects back to the first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub points: Vec<Point>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hole {
    pub center: Point,
    pub diameter: f64,
    pub side: Side,
    pub loop_index: u32,
    /// Position within the loop, `0..flaps_per_section`.
    pub hole_index: u32,
}

/// Stadium-shaped slot running along the strip axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Slot {
    pub center: Point,
    /// Overall length, end cap to end cap.
    pub length: f64,
    pub width: f64,
    pub loop_index: u32,
    pub hole_index: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Top,
    Bottom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flap {
    pub station: u32,
    pub side: Side,
    /// Base left, base right, tip right, tip left.
    pub corners: [Point; 4],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConnectionMarker {
    pub position: Point,
    pub loop_index: u32,
    pub hole_index: u32,
    /// Angular position around the wrapped loop, degrees.
    pub angle: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopMark {
    pub loop_index: u32,
    /// x of the loop's first guide hole.
    pub start_x: f64,
    pub end_x: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Annotations {
    pub loops: Vec<LoopMark>,
    pub connections: Vec<ConnectionMarker>,
}

/// Everything a laser cutter needs, in mm.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CutPattern {
    pub outlines: Vec<Polyline>,
    pub flaps: Vec<Flap>,
    pub holes: Vec<Hole>,
    pub slots: Vec<Slot>,
    pub annotations: Annotations,
    /// Mid band extent along y.
    pub band_height: f64,
}

impl CutPattern {
    pub fn loop_count(&self) -> u32 {
        self.holes
            .iter()
            .map(|h| h.loop_index + 1)
            .max()
            .unwrap_or(0)
    }

    pub fn holes_on_side(&self, side: Side) -> impl Iterator<Item = &Hole> + '_ {
        self.holes.iter().filter(move |h| h.side == side)
    }

    pub fn holes_in_loop(&self, loop_index: u32, side: Side) -> impl Iterator<Item = &Hole> + '_ {
        self.holes_on_side(side)
            .filter(move |h| h.loop_index == loop_index)
    }

    /// Length envelope `(l_max, l_min, l_default)` read back from the cut
    /// geometry: loop count from the holes, pitch from neighbouring holes,
    /// slot length from the slots and band height from the pattern.
    pub fn implied_lengths(&self) -> Option<(f64, f64, f64)> {
        let mut top: Vec<&Hole> = self.holes_on_side(Side::Top).collect();
        if top.len() < 2 {
            return None;
        }
        top.sort_by(|a, b| a.center.x.total_cmp(&b.center.x));
        let pitch = top[1].center.x - top[0].center.x;
        let slot = self.slots.first().map_or(0.0, |s| s.length);
        let intervals = f64::from(self.loop_count().checked_sub(1)?);
        let l_default = intervals * pitch + self.band_height;
        Some((
            l_default + intervals * slot / 2.0,
            l_default - intervals * slot / 2.0,
            l_default,
        ))
    }

    /// Axis-aligned bounds `(min, max)` of every cut feature.
    pub fn bounds(&self) -> Option<(Point, Point)> {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for p in self.outlines.iter().flat_map(|o| &o.points) {
            xs.push(p.x);
            ys.push(p.y);
        }
        for h in &self.holes {
            let r = h.diameter / 2.0;
            xs.extend([h.center.x - r, h.center.x + r]);
            ys.extend([h.center.y - r, h.center.y + r]);
        }
        for s in &self.slots {
            xs.extend([s.center.x - s.length / 2.0, s.center.x + s.length / 2.0]);
            ys.extend([s.center.y - s.width / 2.0, s.center.y + s.width / 2.0]);
        }
        let min = |v: &[f64]| v.iter().copied().reduce(f64::min);
        let max = |v: &[f64]| v.iter().copied().reduce(f64::max);
        Some((
            Point::new(min(&xs)?, min(&ys)?),
            Point::new(max(&xs)?, max(&ys)?),
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct PatternOptions {
    /// Guide hole diameter, mm.
    pub hole_diameter: f64,
    /// Slot width; defaults to the hole diameter.
    pub slot_width: Option<f64>,
    /// Stations between loop-to-loop connections.
    pub connection_interval: u32,
    /// Smallest web of material allowed between two cuts, mm.
    pub min_clearance: f64,
}

impl Default for PatternOptions {
    fn default() -> Self {
        PatternOptions {
            hole_diameter: 0.5,
            slot_width: None,
            connection_interval: 4,
            min_clearance: 0.2,
        }
    }
}

impl PatternOptions {
    pub fn slot_width(&self) -> f64 {
        self.slot_width.unwrap_or(self.hole_diameter)
    }
}

/// Lays out the full flap strip and checks that no two cuts collide.
pub fn generate_cut_pattern(pattern: &FlapPattern, options: &PatternOptions) -> Result<CutPattern> {
    pattern.check()?;
    check_options(options)?;
    check_layout(pattern, options)?;

    let d = pattern.guide_hole_distance;
    let h = pattern.mid_length;
    let w = pattern.flap_width;
    let per_loop = pattern.flaps_per_section;
    let stations = pattern.loop_count * per_loop;
    let slot_width = options.slot_width();
    let lean = pattern.flap_length * pattern.inclination_angle.to_radians().tan();

    let station_x = |k: u32| f64::from(k) * d;
    let end_margin = (w / 2.0).max(pattern.slot_length / 2.0) + d / 2.0;
    let x_start = -end_margin;
    let x_end = station_x(stations - 1) + end_margin;

    let mut holes = Vec::with_capacity(2 * stations as usize);
    let mut slots = Vec::new();
    let mut flaps = Vec::with_capacity(stations as usize);
    let mut connections = Vec::new();
    for k in 0..stations {
        let x = station_x(k);
        let loop_index = k / per_loop;
        let hole_index = k % per_loop;
        for (side, y) in [(Side::Top, h / 4.0), (Side::Bottom, -h / 4.0)] {
            holes.push(Hole {
                center: Point::new(x, y),
                diameter: options.hole_diameter,
                side,
                loop_index,
                hole_index,
            });
        }
        if hole_index.is_multiple_of(options.connection_interval) {
            if pattern.slot_length > 0.0 {
                slots.push(Slot {
                    center: Point::new(x, 0.0),
                    length: pattern.slot_length,
                    width: slot_width,
                    loop_index,
                    hole_index,
                });
            }
            connections.push(ConnectionMarker {
                position: Point::new(x, -3.0 * h / 8.0),
                loop_index,
                hole_index,
                angle: 360.0 * f64::from(hole_index) / f64::from(per_loop),
            });
        }
        let (side, edge, tip, shift) = if k % 2 == 0 {
            (Side::Top, h / 2.0, h / 2.0 + pattern.flap_length, lean)
        } else {
            (
                Side::Bottom,
                -h / 2.0,
                -h / 2.0 - pattern.flap_length,
                -lean,
            )
        };
        flaps.push(Flap {
            station: k,
            side,
            corners: [
                Point::new(x - w / 2.0, edge),
                Point::new(x + w / 2.0, edge),
                Point::new(x + w / 2.0 + shift, tip),
                Point::new(x - w / 2.0 + shift, tip),
            ],
        });
    }

    // Counter-clockwise: bottom edge left to right, then top edge back.
    let mut outline = vec![Point::new(x_start, -h / 2.0)];
    for flap in flaps.iter().filter(|f| f.side == Side::Bottom) {
        let [base_left, base_right, tip_right, tip_left] = flap.corners;
        outline.extend([base_left, tip_left, tip_right, base_right]);
    }
    outline.push(Point::new(x_end, -h / 2.0));
    outline.push(Point::new(x_end, h / 2.0));
    for flap in flaps.iter().rev().filter(|f| f.side == Side::Top) {
        let [base_left, base_right, tip_right, tip_left] = flap.corners;
        outline.extend([base_right, tip_right, tip_left, base_left]);
    }
    outline.push(Point::new(x_start, h / 2.0));

    let loops = (0..pattern.loop_count)
        .map(|i| LoopMark {
            loop_index: i,
            start_x: station_x(i * per_loop),
            end_x: station_x((i + 1) * per_loop - 1),
        })
        .collect();

    Ok(CutPattern {
        outlines: vec![Polyline { points: outline }],
        flaps,
        holes,
        slots,
        annotations: Annotations { loops, connections },
        band_height: h,
    })
}

fn check_options(o: &PatternOptions) -> Result<()> {
    let mut violations = Vec::new();
    if !(o.hole_diameter.is_finite() && o.hole_diameter > 0.0) {
        violations.push(format!(
            "hole-diameter must be > 0, got {}",
            o.hole_diameter
        ));
    }
    if !(o.slot_width().is_finite() && o.slot_width() > 0.0) {
        violations.push(format!("slot-width must be > 0, got {}", o.slot_width()));
    }
    if o.connection_interval == 0 {
        violations.push("connection-interval must be >= 1".to_string());
    }
    if !(o.min_clearance.is_finite() && o.min_clearance >= 0.0) {
        violations.push(format!(
            "min-clearance must be >= 0, got {}",
            o.min_clearance
        ));
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Error::Validation(violations))
    }
}

/// Clearance checks between every pair of feature families that can meet.
fn check_layout(p: &FlapPattern, o: &PatternOptions) -> Result<()> {
    let d = p.guide_hole_distance;
    let h = p.mid_length;
    let clearance = o.min_clearance;
    let slot_width = o.slot_width();
    let mut collisions = Vec::new();

    // Neighbouring flaps on one side are parallel and 2d apart.
    let flap_web = (2.0 * d - p.flap_width) * p.inclination_angle.to_radians().cos();
    if flap_web < clearance {
        collisions.push(format!(
            "flaps at stations k and k+2 overlap: web {flap_web:.4} mm < {clearance} mm \
             (W = {}, 2d = {}, inclination {} deg)",
            p.flap_width,
            2.0 * d,
            p.inclination_angle
        ));
    }
    let hole_web = d - o.hole_diameter;
    if hole_web < clearance {
        collisions.push(format!(
            "adjacent guide holes collide: web {hole_web:.4} mm < {clearance} mm"
        ));
    }
    let edge_web = h / 4.0 - o.hole_diameter / 2.0;
    if edge_web < clearance {
        collisions.push(format!(
            "guide holes collide with the band edge: web {edge_web:.4} mm < {clearance} mm"
        ));
    }
    if p.slot_length > 0.0 {
        if p.slot_length < slot_width {
            collisions.push(format!(
                "slot length {} is shorter than its width {slot_width}",
                p.slot_length
            ));
        }
        let hole_slot_web = h / 4.0 - slot_width / 2.0 - o.hole_diameter / 2.0;
        if hole_slot_web < clearance {
            collisions.push(format!(
                "slot row collides with guide holes: web {hole_slot_web:.4} mm < {clearance} mm"
            ));
        }
        let pitch = f64::from(o.connection_interval.min(p.flaps_per_section)) * d;
        let slot_web = pitch - p.slot_length;
        if p.flaps_per_section > 1 && slot_web < clearance {
            collisions.push(format!(
                "neighbouring slots merge: web {slot_web:.4} mm < {clearance} mm"
            ));
        }
    }
    if collisions.is_empty() {
        Ok(())
    } else {
        Err(Error::Layout(collisions.join("; ")))
    }
}
