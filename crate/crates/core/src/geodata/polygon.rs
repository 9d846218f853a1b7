use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geodata::Grid;

pub type Ring = Vec<(f64, f64)>;

/// Polygon with optional holes and free-form attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    pub id: String,
    exterior: Ring,
    holes: Vec<Ring>,
    pub attributes: BTreeMap<String, String>,
}

impl Polygon {
    pub fn new(
        id: impl Into<String>,
        exterior: Ring,
        holes: Vec<Ring>,
        attributes: BTreeMap<String, String>,
    ) -> Result<Self> {
        let id = id.into();
        for ring in std::iter::once(&exterior).chain(holes.iter()) {
            if ring.len() < 4 {
                return Err(Error::Geometry(format!(
                    "polygon {id}: ring needs at least 4 vertices, has {}",
                    ring.len()
                )));
            }
            if ring.first() != ring.last() {
                return Err(Error::Geometry(format!("polygon {id}: ring is not closed")));
            }
            if ring.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
                return Err(Error::Geometry(format!("polygon {id}: non-finite vertex")));
            }
        }
        let poly = Self {
            id,
            exterior,
            holes,
            attributes,
        };
        if !(poly.area() > 0.0) {
            return Err(Error::Geometry(format!("polygon {}: area must be > 0", poly.id)));
        }
        Ok(poly)
    }

    /// Axis-aligned rectangle, handy for plots and tests.
    pub fn rectangle(id: impl Into<String>, xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> Result<Self> {
        Self::new(
            id,
            vec![(xmin, ymin), (xmax, ymin), (xmax, ymax), (xmin, ymax), (xmin, ymin)],
            Vec::new(),
            BTreeMap::new(),
        )
    }

    pub fn with_attribute(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.attributes.insert(key.into(), value.into());
        self
    }

    pub fn exterior(&self) -> &[(f64, f64)] {
        &self.exterior
    }

    pub fn holes(&self) -> &[Ring] {
        &self.holes
    }

    pub fn attribute_f64(&self, key: &str) -> Option<f64> {
        self.attributes.get(key)?.trim().parse().ok().filter(|v: &f64| v.is_finite())
    }

    fn rings(&self) -> impl Iterator<Item = &Ring> {
        std::iter::once(&self.exterior).chain(self.holes.iter())
    }

    pub fn area(&self) -> f64 {
        ring_area(&self.exterior).abs() - self.holes.iter().map(|h| ring_area(h).abs()).sum::<f64>()
    }

    pub fn bbox(&self) -> (f64, f64, f64, f64) {
        self.exterior.iter().fold(
            (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
            |(x0, y0, x1, y1), &(x, y)| (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
        )
    }

    /// Even-odd membership; points on any ring edge count as inside.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        if self.rings().any(|r| on_boundary(r, x, y)) {
            return true;
        }
        let mut inside = false;
        for ring in self.rings() {
            for w in ring.windows(2) {
                let ((x1, y1), (x2, y2)) = (w[0], w[1]);
                if (y1 > y) != (y2 > y) {
                    let xc = x1 + (y - y1) * (x2 - x1) / (y2 - y1);
                    if x < xc {
                        inside = !inside;
                    }
                }
            }
        }
        inside
    }

    /// Area of intersection with an axis-aligned rectangle.
    pub fn intersection_area(&self, xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> f64 {
        let clip = |r: &Ring| ring_area(&clip_ring(r, xmin, ymin, xmax, ymax)).abs();
        let a = clip(&self.exterior) - self.holes.iter().map(clip).sum::<f64>();
        a.max(0.0)
    }
}

fn ring_area(ring: &[(f64, f64)]) -> f64 {
    if ring.len() < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..ring.len() {
        let (x1, y1) = ring[i];
        let (x2, y2) = ring[(i + 1) % ring.len()];
        s += x1 * y2 - x2 * y1;
    }
    0.5 * s
}

fn on_boundary(ring: &[(f64, f64)], x: f64, y: f64) -> bool {
    ring.windows(2).any(|w| {
        let ((x1, y1), (x2, y2)) = (w[0], w[1]);
        let cross = (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1);
        cross == 0.0
            && x >= x1.min(x2)
            && x <= x1.max(x2)
            && y >= y1.min(y2)
            && y <= y1.max(y2)
    })
}

/// Sutherland-Hodgman clip of a ring against a rectangle. The result may
/// carry degenerate edges but its shoelace area is exact.
fn clip_ring(ring: &[(f64, f64)], xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = ring[..ring.len().saturating_sub(1)].to_vec();
    // (inside test, intersection) per edge
    type Edge = (fn(f64, f64, f64) -> bool, bool, f64);
    let edges: [Edge; 4] = [
        (|x, _, b| x >= b, true, xmin),
        (|x, _, b| x <= b, true, xmax),
        (|_, y, b| y >= b, false, ymin),
        (|_, y, b| y <= b, false, ymax),
    ];
    for (inside, vertical, bound) in edges {
        if pts.is_empty() {
            break;
        }
        let input = std::mem::take(&mut pts);
        let n = input.len();
        for i in 0..n {
            let cur = input[i];
            let prev = input[(i + n - 1) % n];
            let cur_in = inside(cur.0, cur.1, bound);
            let prev_in = inside(prev.0, prev.1, bound);
            if cur_in != prev_in {
                pts.push(if vertical {
                    let t = (bound - prev.0) / (cur.0 - prev.0);
                    (bound, prev.1 + t * (cur.1 - prev.1))
                } else {
                    let t = (bound - prev.1) / (cur.1 - prev.1);
                    (prev.0 + t * (cur.0 - prev.0), bound)
                });
            }
            if cur_in {
                pts.push(cur);
            }
        }
    }
    pts
}

fn cell_range(grid: &Grid, poly: &Polygon) -> Option<(usize, usize, usize, usize)> {
    let g = grid.geometry();
    let (x0, y0, x1, y1) = poly.bbox();
    if x1 < g.xll || x0 > g.xright() || y1 < g.yll || y0 > g.ytop() {
        return None;
    }
    let c0 = ((x0 - g.xll) / g.cellsize).floor().max(0.0) as usize;
    let c1 = (((x1 - g.xll) / g.cellsize).ceil() as usize).min(g.ncols);
    let r0 = ((g.ytop() - y1) / g.cellsize).floor().max(0.0) as usize;
    let r1 = (((g.ytop() - y0) / g.cellsize).ceil() as usize).min(g.nrows);
    Some((r0, r1, c0, c1))
}

/// Row-major indices of the cells whose centers fall inside the polygon.
pub fn cells_in_polygon(grid: &Grid, polygon: &Polygon) -> Vec<usize> {
    let Some((r0, r1, c0, c1)) = cell_range(grid, polygon) else {
        return Vec::new();
    };
    let g = grid.geometry();
    let mut out = Vec::new();
    for r in r0..r1 {
        for c in c0..c1 {
            let (x, y) = g.cell_center(r, c);
            if polygon.contains(x, y) {
                out.push(grid.index(r, c));
            }
        }
    }
    out
}

/// Mean of cell values weighted by each cell's intersection area with the polygon.
pub fn zonal_weighted_mean(grid: &Grid, polygon: &Polygon) -> Result<f64> {
    let empty = || Error::EmptyZone(polygon.id.clone());
    let (r0, r1, c0, c1) = cell_range(grid, polygon).ok_or_else(empty)?;
    let g = grid.geometry();
    let (mut sum_w, mut sum_wv) = (0.0, 0.0);
    for r in r0..r1 {
        for c in c0..c1 {
            let Some(v) = grid.value(r, c) else { continue };
            let (xmin, ymin, xmax, ymax) = g.cell_bounds(r, c);
            let a = polygon.intersection_area(xmin, ymin, xmax, ymax);
            if a > 0.0 {
                sum_w += a;
                sum_wv += a * v;
            }
        }
    }
    if sum_w > 0.0 {
        Ok(sum_wv / sum_w)
    } else {
        Err(empty())
    }
}

pub fn read_polygons(path: impl AsRef<Path>) -> Result<Vec<Polygon>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_polygons(&text, path)
}

/// Parse `id key=value;... : x1 y1, x2 y2, ...` lines, with `hole:` continuation lines.
pub fn parse_polygons(text: &str, path: &Path) -> Result<Vec<Polygon>> {
    struct Pending {
        line: usize,
        id: String,
        exterior: Ring,
        holes: Vec<Ring>,
        attributes: BTreeMap<String, String>,
    }
    let finish = |p: Pending| {
        Polygon::new(p.id, p.exterior, p.holes, p.attributes)
            .map_err(|e| Error::format(path, p.line, e.to_string()))
    };

    let mut out = Vec::new();
    let mut pending: Option<Pending> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("hole:") {
            let p = pending
                .as_mut()
                .ok_or_else(|| Error::format(path, idx + 1, "hole without a polygon"))?;
            p.holes.push(parse_ring(rest, path, idx + 1)?);
            continue;
        }
        if let Some(p) = pending.take() {
            out.push(finish(p)?);
        }
        let (head, coords) = line
            .split_once(':')
            .ok_or_else(|| Error::format(path, idx + 1, "expected `id attrs : coordinates`"))?;
        let mut head = head.trim().splitn(2, char::is_whitespace);
        let id = head.next().unwrap_or("").to_string();
        if id.is_empty() {
            return Err(Error::format(path, idx + 1, "missing polygon id"));
        }
        let mut attributes = BTreeMap::new();
        for kv in head.next().unwrap_or("").split(';') {
            let kv = kv.trim();
            if kv.is_empty() {
                continue;
            }
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::format(path, idx + 1, format!("bad attribute `{kv}`")))?;
            attributes.insert(k.trim().to_string(), v.trim().to_string());
        }
        pending = Some(Pending {
            line: idx + 1,
            id,
            exterior: parse_ring(coords, path, idx + 1)?,
            holes: Vec::new(),
            attributes,
        });
    }
    if let Some(p) = pending {
        out.push(finish(p)?);
    }
    Ok(out)
}

fn parse_ring(text: &str, path: &Path, line: usize) -> Result<Ring> {
    let mut ring = Vec::new();
    for pair in text.split(',') {
        let mut it = pair.split_whitespace().map(str::parse::<f64>);
        match (it.next(), it.next(), it.next()) {
            (Some(Ok(x)), Some(Ok(y)), None) => ring.push((x, y)),
            _ => return Err(Error::format(path, line, format!("bad vertex `{}`", pair.trim()))),
        }
    }
    if ring.len() >= 3 && ring.first() != ring.last() {
        ring.push(ring[0]);
    }
    Ok(ring)
}

pub fn format_polygons(polygons: &[Polygon]) -> String {
    let ring = |r: &Ring| {
        r.iter()
            .map(|(x, y)| format!("{x} {y}"))
            .collect::<Vec<_>>()
            .join(", ")
    };
    let mut out = String::new();
    for p in polygons {
        let attrs: Vec<String> = p.attributes.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let _ = writeln!(out, "{} {} : {}", p.id, attrs.join(";"), ring(&p.exterior));
        for h in &p.holes {
            let _ = writeln!(out, "hole: {}", ring(h));
        }
    }
    out
}
