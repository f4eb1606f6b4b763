//! Deterministic SVG pictures of maps, direction assignments, and plans.
//! Byte-identical output for identical inputs, so renders can be snapshotted.

use std::fmt::Write as _;

use crate::grid::{GridMap, GridPath, GridVertex};
use crate::topo::{Direction, PassageDirections, TopoMap};

const CELL: i64 = 20;
const MARGIN: i64 = 10;

const PALETTE: [&str; 8] = [
    "#e6194b", "#3cb44b", "#4363d8", "#f58231", "#911eb4", "#008080", "#9a6324", "#f032e6",
];

fn center(cell: GridVertex) -> (i64, i64) {
    (
        MARGIN + (cell.col as i64 - 1) * CELL + CELL / 2,
        MARGIN + (cell.row as i64 - 1) * CELL + CELL / 2,
    )
}

/// Point `t` tenths of the way from `p` to `q`; tenths keep the coordinates
/// exact in one decimal place.
fn lerp(p: (i64, i64), q: (i64, i64), tenths: i64) -> (f64, f64) {
    (
        p.0 as f64 + (q.0 - p.0) as f64 * tenths as f64 / 10.0,
        p.1 as f64 + (q.1 - p.1) as f64 * tenths as f64 / 10.0,
    )
}

/// Renders the map, optionally the topological vertices, one arrow per
/// directed passage half, and one polyline per robot path.
pub fn render_svg(
    map: &GridMap,
    topo: Option<&TopoMap>,
    directions: Option<&PassageDirections>,
    paths: &[GridPath],
) -> String {
    let width = map.w as i64 * CELL + 2 * MARGIN;
    let height = map.h as i64 * CELL + 2 * MARGIN;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">"
    );
    let _ = writeln!(
        s,
        "  <defs><marker id=\"arrow\" markerWidth=\"8\" markerHeight=\"8\" refX=\"6\" refY=\"3\" orient=\"auto\"><path d=\"M0,0 L6,3 L0,6 z\" fill=\"#222\"/></marker></defs>"
    );
    let _ = writeln!(s, "  <rect x=\"0\" y=\"0\" width=\"{width}\" height=\"{height}\" fill=\"#ffffff\"/>");
    let _ = writeln!(
        s,
        "  <rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#555\"/>",
        map.w as i64 * CELL,
        map.h as i64 * CELL
    );

    // Shelf blocks between adjacent passage rows and columns.
    for rows in map.h_rows.windows(2) {
        for cols in map.v_cols.windows(2) {
            let x = MARGIN + cols[0] as i64 * CELL;
            let y = MARGIN + rows[0] as i64 * CELL;
            let w = (cols[1] - cols[0] - 1) as i64 * CELL;
            let h = (rows[1] - rows[0] - 1) as i64 * CELL;
            let _ = writeln!(
                s,
                "  <rect x=\"{x}\" y=\"{y}\" width=\"{w}\" height=\"{h}\" fill=\"#c9c9c9\" stroke=\"#999\"/>"
            );
        }
    }

    for path in paths {
        if path.cells.is_empty() {
            continue;
        }
        let color = PALETTE[path.robot % PALETTE.len()];
        let points: Vec<String> = path
            .cells
            .iter()
            .map(|&c| {
                let (x, y) = center(c);
                format!("{x},{y}")
            })
            .collect();
        let _ = writeln!(
            s,
            "  <polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"3\" stroke-opacity=\"0.75\"/>",
            points.join(" ")
        );
    }

    if let Some(topo) = topo {
        if let Some(dirs) = directions {
            for passage in &topo.passages {
                let Some(dir) = dirs.get(passage.id) else { continue };
                let a = center(topo.vertex(passage.a).cell);
                let b = center(topo.vertex(passage.b).cell);
                let vp = center(passage.vp_cell());
                for (p, q) in [(a, vp), (vp, b)] {
                    let (tail, head) = match dir {
                        Direction::AToB => (lerp(p, q, 3), lerp(p, q, 7)),
                        Direction::BToA => (lerp(p, q, 7), lerp(p, q, 3)),
                    };
                    let _ = writeln!(
                        s,
                        "  <line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#222\" stroke-width=\"1.5\" marker-end=\"url(#arrow)\"/>",
                        tail.0, tail.1, head.0, head.1
                    );
                }
            }
        }
        for &c in &topo.crossings {
            let (x, y) = center(topo.vertex(c).cell);
            let _ = writeln!(s, "  <circle cx=\"{x}\" cy=\"{y}\" r=\"4\" fill=\"#333\"/>");
        }
        for passage in &topo.passages {
            let (x, y) = center(passage.vp_cell());
            let _ = writeln!(
                s,
                "  <circle cx=\"{x}\" cy=\"{y}\" r=\"3\" fill=\"#ffffff\" stroke=\"#333\"/>"
            );
        }
    }

    s.push_str("</svg>\n");
    s
}
