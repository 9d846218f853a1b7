use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geodata::Grid;

/// Position of a return within its pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReturnClass {
    First,
    Intermediate,
    Last,
    Only,
}

impl ReturnClass {
    pub fn from_numbers(return_number: u32, number_of_returns: u32) -> Self {
        match (return_number == 1, return_number == number_of_returns) {
            (true, true) => ReturnClass::Only,
            (true, false) => ReturnClass::First,
            (false, true) => ReturnClass::Last,
            (false, false) => ReturnClass::Intermediate,
        }
    }

    pub fn is_first(self) -> bool {
        matches!(self, ReturnClass::First | ReturnClass::Only)
    }

    pub fn is_last(self) -> bool {
        matches!(self, ReturnClass::Last | ReturnClass::Only)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointRecord {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub return_class: ReturnClass,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<PointRecord>,
    pub normalized: bool,
}

/// Bookkeeping from [`normalize_heights`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NormalizeTally {
    /// Points outside the DTM or next to nodata terrain.
    pub dropped: usize,
    /// Points below the terrain, clamped to zero height.
    pub clamped: usize,
}

impl PointCloud {
    pub fn new(points: Vec<PointRecord>, normalized: bool) -> Self {
        Self { points, normalized }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Shift every point horizontally.
    pub fn translated(&self, dx: f64, dy: f64) -> PointCloud {
        PointCloud {
            points: self
                .points
                .iter()
                .map(|p| PointRecord {
                    x: p.x + dx,
                    y: p.y + dy,
                    ..*p
                })
                .collect(),
            normalized: self.normalized,
        }
    }
}

/// Subtract the bilinearly interpolated terrain elevation from every point.
pub fn normalize_heights(cloud: &PointCloud, dtm: &Grid) -> Result<(PointCloud, NormalizeTally)> {
    if cloud.normalized {
        return Err(Error::State("point cloud is already height-normalized".into()));
    }
    let mut tally = NormalizeTally::default();
    let mut points = Vec::with_capacity(cloud.points.len());
    for p in &cloud.points {
        let Some(ground) = dtm.bilinear(p.x, p.y) else {
            tally.dropped += 1;
            continue;
        };
        let mut z = p.z - ground;
        if z < 0.0 {
            z = 0.0;
            tally.clamped += 1;
        }
        points.push(PointRecord { z, ..*p });
    }
    Ok((PointCloud::new(points, true), tally))
}

/// Read whitespace-separated `x y z return_number number_of_returns` records.
pub fn read_points(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_points(&text, path)
}

pub fn parse_points(text: &str, path: &Path) -> Result<PointCloud> {
    let mut points = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 5 {
            return Err(Error::format(
                path,
                idx + 1,
                format!("expected 5 fields, found {}", toks.len()),
            ));
        }
        let coord = |i: usize| -> Result<f64> {
            toks[i]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::format(path, idx + 1, format!("bad coordinate `{}`", toks[i])))
        };
        let count = |i: usize| -> Result<u32> {
            toks[i]
                .parse::<u32>()
                .ok()
                .filter(|v| *v >= 1)
                .ok_or_else(|| Error::format(path, idx + 1, format!("bad return count `{}`", toks[i])))
        };
        let (rn, nr) = (count(3)?, count(4)?);
        if rn > nr {
            return Err(Error::format(
                path,
                idx + 1,
                format!("return number {rn} exceeds number of returns {nr}"),
            ));
        }
        points.push(PointRecord {
            x: coord(0)?,
            y: coord(1)?,
            z: coord(2)?,
            return_class: ReturnClass::from_numbers(rn, nr),
        });
    }
    Ok(PointCloud::new(points, false))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: f64, y: f64, z: f64) -> PointRecord {
        PointRecord {
            x,
            y,
            z,
            return_class: ReturnClass::Only,
        }
    }

    fn flat(value: f64) -> Grid {
        Grid::new(4, 4, 0.0, 0.0, 1.0, -9999.0, vec![value; 16]).unwrap()
    }

    #[test]
    fn return_classes() {
        assert_eq!(ReturnClass::from_numbers(1, 1), ReturnClass::Only);
        assert_eq!(ReturnClass::from_numbers(1, 3), ReturnClass::First);
        assert_eq!(ReturnClass::from_numbers(2, 3), ReturnClass::Intermediate);
        assert_eq!(ReturnClass::from_numbers(3, 3), ReturnClass::Last);
        assert!(ReturnClass::Only.is_first() && ReturnClass::Only.is_last());
    }

    #[test]
    fn flat_dtm_subtracts_constant() {
        let cloud = PointCloud::new(vec![pt(1.2, 2.3, 112.0)], false);
        let (out, tally) = normalize_heights(&cloud, &flat(100.0)).unwrap();
        assert_eq!(out.points[0].z, 12.0);
        assert!(out.normalized);
        assert_eq!(tally, NormalizeTally::default());
    }

    #[test]
    fn interpolated_between_centers() {
        let dtm = Grid::new(2, 2, 0.0, 0.0, 1.0, -9999.0, vec![0.0, 1.0, 0.0, 1.0]).unwrap();
        let cloud = PointCloud::new(vec![pt(1.0, 1.0, 10.0)], false);
        let (out, _) = normalize_heights(&cloud, &dtm).unwrap();
        assert_eq!(out.points[0].z, 9.5);
    }

    #[test]
    fn below_ground_is_clamped_and_outside_is_dropped() {
        let cloud = PointCloud::new(
            vec![pt(1.0, 1.0, 99.5), pt(10.0, 1.0, 120.0), pt(2.0, 2.0, 101.0)],
            false,
        );
        let (out, tally) = normalize_heights(&cloud, &flat(100.0)).unwrap();
        assert_eq!(tally, NormalizeTally { dropped: 1, clamped: 1 });
        assert_eq!(out.len(), cloud.len() - tally.dropped);
        assert_eq!(out.points[0].z, 0.0);
        assert!(out.points.iter().all(|p| p.z >= 0.0));
    }

    #[test]
    fn rejects_normalized_input() {
        let cloud = PointCloud::new(vec![], true);
        assert!(matches!(normalize_heights(&cloud, &flat(0.0)), Err(Error::State(_))));
    }

    #[test]
    fn parses_point_text() {
        let text = "# header\n1 2 3 1 1\n\n4 5 6 2 2\n7 8 9 2 3\n";
        let cloud = parse_points(text, Path::new("p.txt")).unwrap();
        assert_eq!(cloud.len(), 3);
        assert_eq!(cloud.points[1].return_class, ReturnClass::Last);
        assert_eq!(cloud.points[2].return_class, ReturnClass::Intermediate);
        assert!(parse_points("1 2 3 4\n", Path::new("p.txt")).is_err());
        assert!(parse_points("1 2 3 3 2\n", Path::new("p.txt")).is_err());
    }
}
