use crate::error::{Error, Result};
use crate::geodata::Grid;

/// Terrain slope in degrees from Horn's 3x3 finite differences.
///
/// Border cells and cells with a nodata neighbour are nodata.
pub fn slope_grid(dtm: &Grid) -> Result<Grid> {
    let (ncols, nrows) = (dtm.ncols(), dtm.nrows());
    if ncols < 3 || nrows < 3 {
        return Err(Error::Dimension(format!(
            "slope needs at least 3x3 cells, got {ncols}x{nrows}"
        )));
    }
    let nodata = dtm.nodata();
    let cs = dtm.cellsize();
    let mut out = vec![nodata; ncols * nrows];
    for r in 1..nrows - 1 {
        'cell: for c in 1..ncols - 1 {
            let mut z = [0.0; 9];
            for (k, slot) in z.iter_mut().enumerate() {
                match dtm.value(r + k / 3 - 1, c + k % 3 - 1) {
                    Some(v) => *slot = v,
                    None => continue 'cell,
                }
            }
            // z[0..9] = NW N NE / W C E / SW S SE
            let dzdx = ((z[2] + 2.0 * z[5] + z[8]) - (z[0] + 2.0 * z[3] + z[6])) / (8.0 * cs);
            let dzdy = ((z[0] + 2.0 * z[1] + z[2]) - (z[6] + 2.0 * z[7] + z[8])) / (8.0 * cs);
            out[r * ncols + c] = dzdx.hypot(dzdy).atan().to_degrees();
        }
    }
    Grid::from_geometry(dtm.geometry(), nodata, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plane(gx: f64, gy: f64) -> Grid {
        let (n, cs) = (5usize, 2.0);
        let mut v = Vec::new();
        for r in 0..n {
            for c in 0..n {
                let x = (c as f64 + 0.5) * cs;
                let y = (n - r) as f64 * cs - 0.5 * cs;
                v.push(100.0 + gx * x + gy * y);
            }
        }
        Grid::new(n, n, 0.0, 0.0, cs, -9999.0, v).unwrap()
    }

    fn interior(g: &Grid) -> Vec<f64> {
        let mut out = Vec::new();
        for r in 1..g.nrows() - 1 {
            for c in 1..g.ncols() - 1 {
                out.push(g.get(r, c));
            }
        }
        out
    }

    #[test]
    fn flat_is_zero_and_border_is_nodata() {
        let s = slope_grid(&plane(0.0, 0.0)).unwrap();
        assert!(interior(&s).iter().all(|v| *v == 0.0));
        assert_eq!(s.get(0, 0), -9999.0);
        assert_eq!(s.get(4, 2), -9999.0);
    }

    #[test]
    fn inclined_planes() {
        for v in interior(&slope_grid(&plane(1.0, 0.0)).unwrap()) {
            assert!((v - 45.0).abs() < 1e-9, "{v}");
        }
        let expected = 2f64.sqrt().atan().to_degrees();
        assert!((expected - 54.7356).abs() < 1e-4);
        for v in interior(&slope_grid(&plane(1.0, 1.0)).unwrap()) {
            assert!((v - expected).abs() < 1e-9, "{v}");
        }
        for v in interior(&slope_grid(&plane(0.0, -3.0)).unwrap()) {
            assert!((v - 3f64.atan().to_degrees()).abs() < 1e-9);
        }
    }

    #[test]
    fn nodata_neighbour_propagates() {
        let mut v = plane(1.0, 0.0).into_values();
        v[0] = -9999.0;
        let g = Grid::new(5, 5, 0.0, 0.0, 2.0, -9999.0, v).unwrap();
        let s = slope_grid(&g).unwrap();
        assert_eq!(s.get(1, 1), -9999.0);
        assert!(s.get(2, 2) != -9999.0);
    }

    #[test]
    fn too_small() {
        let g = Grid::new(2, 3, 0.0, 0.0, 1.0, -9999.0, vec![0.0; 6]).unwrap();
        assert!(matches!(slope_grid(&g), Err(Error::Dimension(_))));
    }
}
