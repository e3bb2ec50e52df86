use std::fmt::Write;

use mopa::evaluation::{explored_cells, EpisodeResult};
use mopa::geometry::{Grid, GridIndex, Point};
use mopa::world::{Episode, Scene};

use crate::error::CliError;

/// Pixels per meter.
const SCALE: f64 = 40.0;

fn hex(rgb: [u8; 3]) -> String {
    format!("#{:02x}{:02x}{:02x}", rgb[0], rgb[1], rgb[2])
}

/// Drops interior points that lie on the segment between their neighbours.
pub fn simplify(points: &[Point]) -> Vec<Point> {
    let mut out: Vec<Point> = Vec::with_capacity(points.len());
    for &p in points {
        if out.last() == Some(&p) {
            continue;
        }
        if out.len() >= 2 {
            let a = out[out.len() - 2];
            let b = out[out.len() - 1];
            let (u, v) = (b.sub(a), p.sub(b));
            let cross = u.x * v.y - u.y * v.x;
            if cross.abs() < 1e-9 && u.x * v.x + u.y * v.y > 0.0 {
                out.pop();
            }
        }
        out.push(p);
    }
    out
}

struct Canvas<'a> {
    scene: &'a Scene,
    svg: String,
}

impl Canvas<'_> {
    fn x(&self, x: f64) -> f64 {
        (x - self.scene.spec.origin.x) * SCALE
    }

    fn y(&self, y: f64) -> f64 {
        (self.scene.spec.max_corner().y - y) * SCALE
    }

    /// Row runs of true cells as rectangles.
    fn cells(&mut self, mask: &Grid<bool>, style: &str) {
        let spec = self.scene.spec;
        let cs = spec.cell_size;
        let _ = writeln!(self.svg, "<g {style}>");
        for r in 0..mask.rows() {
            let mut c = 0;
            while c < mask.cols() {
                if !mask[GridIndex::new(r, c)] {
                    c += 1;
                    continue;
                }
                let start = c;
                while c < mask.cols() && mask[GridIndex::new(r, c)] {
                    c += 1;
                }
                let x0 = spec.origin.x + start as f64 * cs;
                let y1 = spec.origin.y + (r + 1) as f64 * cs;
                let _ = writeln!(
                    self.svg,
                    "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\"/>",
                    self.x(x0),
                    self.y(y1),
                    (c - start) as f64 * cs * SCALE,
                    cs * SCALE
                );
            }
        }
        self.svg.push_str("</g>\n");
    }
}

/// SVG of one episode: obstacles, explored overlay, objects by category,
/// trajectory, start marker and success-radius rings at every Found.
pub fn render(scene: &Scene, episode: &Episode, result: &EpisodeResult) -> Result<String, CliError> {
    if episode.scene_id != scene.id || result.scene_id != scene.id {
        return Err(CliError::Data(format!(
            "scene {} does not match episode scene {} / result scene {}",
            scene.id, episode.scene_id, result.scene_id
        )));
    }
    if result.episode_id != episode.id {
        return Err(CliError::Data(format!("result {} is not for episode {}", result.episode_id, episode.id)));
    }
    let spec = scene.spec;
    let w = spec.cols as f64 * spec.cell_size * SCALE;
    let h = spec.rows as f64 * spec.cell_size * SCALE;
    let mut cv = Canvas { scene, svg: String::new() };
    let _ = writeln!(
        cv.svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.2} {h:.2}\">"
    );
    let _ = writeln!(cv.svg, "<title>{} ({})</title>", episode.id, scene.id);
    let _ = writeln!(cv.svg, "<rect width=\"{w:.2}\" height=\"{h:.2}\" fill=\"#ffffff\"/>");

    let mut explored = Grid::filled(spec.rows, spec.cols, false);
    for c in explored_cells(result, scene) {
        explored[c] = true;
    }
    cv.cells(&explored, "id=\"explored\" fill=\"#9ecae1\" fill-opacity=\"0.45\"");
    cv.cells(&scene.obstacles, "id=\"obstacles\" fill=\"#202020\"");

    cv.svg.push_str("<g id=\"objects\" stroke=\"#000000\">\n");
    for o in &episode.objects {
        let goal = episode.goals.iter().position(|&g| g == o.id);
        let width = if goal.is_some() { 3.0 } else { 1.0 };
        let _ = writeln!(
            cv.svg,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"{:.2}\" fill=\"{}\" stroke-width=\"{width}\"><title>{}{}</title></circle>",
            cv.x(o.position.x),
            cv.y(o.position.y),
            o.footprint_radius.max(0.1) * SCALE,
            hex(o.category.rgb()),
            o.category,
            goal.map_or(String::new(), |k| format!(" goal {}", k + 1)),
        );
    }
    cv.svg.push_str("</g>\n");

    let path = simplify(&result.trajectory.iter().map(|p| Point::new(p[0], p[1])).collect::<Vec<_>>());
    let coords: Vec<String> = path.iter().map(|p| format!("{:.2},{:.2}", cv.x(p.x), cv.y(p.y))).collect();
    let _ = writeln!(
        cv.svg,
        "<polyline id=\"trajectory\" points=\"{}\" fill=\"none\" stroke=\"#ff7f0e\" stroke-width=\"2\"/>",
        coords.join(" ")
    );
    let s = episode.start.position();
    let _ = writeln!(
        cv.svg,
        "<circle id=\"start\" cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"#ff7f0e\"/>",
        cv.x(s.x),
        cv.y(s.y)
    );

    cv.svg.push_str("<g id=\"found\" fill=\"none\" stroke-width=\"2\">\n");
    for f in &result.found_events {
        let color = if f.correct { "#2ca02c" } else { "#d62728" };
        let _ = writeln!(
            cv.svg,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"{:.2}\" stroke=\"{color}\"><title>step {}</title></circle>",
            cv.x(f.x),
            cv.y(f.y),
            episode.task.success_radius * SCALE,
            f.step
        );
    }
    cv.svg.push_str("</g>\n</svg>\n");
    Ok(cv.svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn straight_line_collapses_to_endpoints() {
        let pts: Vec<Point> = (0..10).map(|i| Point::new(i as f64 * 0.25, 1.0)).collect();
        assert_eq!(simplify(&pts), vec![pts[0], pts[9]]);
        let bent = [Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(1.0, 1.0)];
        assert_eq!(simplify(&bent).len(), 3);
        let back = [Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.5, 0.0)];
        assert_eq!(simplify(&back).len(), 3);
    }
}
