use crate::error::{Error, Result};

/// Single-band raster in a projected CRS.
///
/// Values are row-major with row 0 at the northern edge. A cell holds either a
/// finite value or exactly the `nodata` sentinel.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    ncols: usize,
    nrows: usize,
    xll: f64,
    yll: f64,
    cellsize: f64,
    nodata: f64,
    values: Vec<f64>,
}

/// Shared georeferencing of a grid, without the values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridGeometry {
    pub ncols: usize,
    pub nrows: usize,
    pub xll: f64,
    pub yll: f64,
    pub cellsize: f64,
}

impl GridGeometry {
    pub fn len(&self) -> usize {
        self.ncols * self.nrows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ytop(&self) -> f64 {
        self.yll + self.nrows as f64 * self.cellsize
    }

    pub fn xright(&self) -> f64 {
        self.xll + self.ncols as f64 * self.cellsize
    }

    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.xll + (col as f64 + 0.5) * self.cellsize,
            self.yll + (self.nrows - row) as f64 * self.cellsize - 0.5 * self.cellsize,
        )
    }

    /// Cell containing `(x, y)`; cells are half-open on their east and south edges.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let fc = ((x - self.xll) / self.cellsize).floor();
        let fr = ((self.ytop() - y) / self.cellsize).floor();
        if fc < 0.0 || fr < 0.0 || fc >= self.ncols as f64 || fr >= self.nrows as f64 {
            return None;
        }
        Some((fr as usize, fc as usize))
    }

    /// Bounds of a cell as `(xmin, ymin, xmax, ymax)`.
    pub fn cell_bounds(&self, row: usize, col: usize) -> (f64, f64, f64, f64) {
        let xmin = self.xll + col as f64 * self.cellsize;
        let ymax = self.yll + (self.nrows - row) as f64 * self.cellsize;
        (xmin, ymax - self.cellsize, xmin + self.cellsize, ymax)
    }
}

impl Grid {
    pub fn new(
        ncols: usize,
        nrows: usize,
        xll: f64,
        yll: f64,
        cellsize: f64,
        nodata: f64,
        values: Vec<f64>,
    ) -> Result<Self> {
        if ncols == 0 || nrows == 0 {
            return Err(Error::Dimension(format!(
                "grid must have at least one row and column, got {ncols}x{nrows}"
            )));
        }
        if !(cellsize > 0.0 && cellsize.is_finite()) {
            return Err(Error::Dimension(format!("cellsize must be > 0, got {cellsize}")));
        }
        if !(xll.is_finite() && yll.is_finite() && nodata.is_finite()) {
            return Err(Error::Dimension("non-finite grid header value".into()));
        }
        if values.len() != ncols * nrows {
            return Err(Error::Dimension(format!(
                "expected {} values for {ncols}x{nrows} grid, got {}",
                ncols * nrows,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite() && *v != nodata) {
            return Err(Error::Domain(format!("cell {i} is neither finite nor nodata")));
        }
        Ok(Self {
            ncols,
            nrows,
            xll,
            yll,
            cellsize,
            nodata,
            values,
        })
    }

    /// Grid filled with one value.
    pub fn filled(geometry: GridGeometry, nodata: f64, value: f64) -> Result<Self> {
        Self::from_geometry(geometry, nodata, vec![value; geometry.len()])
    }

    pub fn from_geometry(geometry: GridGeometry, nodata: f64, values: Vec<f64>) -> Result<Self> {
        Self::new(
            geometry.ncols,
            geometry.nrows,
            geometry.xll,
            geometry.yll,
            geometry.cellsize,
            nodata,
            values,
        )
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn xll(&self) -> f64 {
        self.xll
    }

    pub fn yll(&self) -> f64 {
        self.yll
    }

    pub fn cellsize(&self) -> f64 {
        self.cellsize
    }

    pub fn nodata(&self) -> f64 {
        self.nodata
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn geometry(&self) -> GridGeometry {
        GridGeometry {
            ncols: self.ncols,
            nrows: self.nrows,
            xll: self.xll,
            yll: self.yll,
            cellsize: self.cellsize,
        }
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.ncols + col
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[self.index(row, col)]
    }

    /// Cell value, or `None` when the cell holds the nodata sentinel.
    pub fn value(&self, row: usize, col: usize) -> Option<f64> {
        let v = self.get(row, col);
        (v != self.nodata).then_some(v)
    }

    pub fn is_nodata(&self, v: f64) -> bool {
        v == self.nodata
    }

    /// Bilinear interpolation over the four surrounding cell centers.
    ///
    /// Points in the outer half-cell ring are clamped onto the lattice of
    /// centers. Returns `None` outside the extent or when a neighbour with a
    /// non-zero weight is nodata.
    pub fn bilinear(&self, x: f64, y: f64) -> Option<f64> {
        let g = self.geometry();
        if !(x >= g.xll && x <= g.xright() && y >= g.yll && y <= g.ytop()) {
            return None;
        }
        let fc = ((x - g.xll) / g.cellsize - 0.5).clamp(0.0, (g.ncols - 1) as f64);
        let fr = ((g.ytop() - y) / g.cellsize - 0.5).clamp(0.0, (g.nrows - 1) as f64);
        let c0 = fc.floor() as usize;
        let r0 = fr.floor() as usize;
        let tx = fc - c0 as f64;
        let ty = fr - r0 as f64;
        let c1 = (c0 + 1).min(g.ncols - 1);
        let r1 = (r0 + 1).min(g.nrows - 1);

        let mut acc = 0.0;
        for (r, c, w) in [
            (r0, c0, (1.0 - tx) * (1.0 - ty)),
            (r0, c1, tx * (1.0 - ty)),
            (r1, c0, (1.0 - tx) * ty),
            (r1, c1, tx * ty),
        ] {
            if w == 0.0 {
                continue;
            }
            acc += w * self.value(r, c)?;
        }
        Some(acc)
    }

    /// Block-mean aggregation by an integer factor, ignoring nodata.
    pub fn resample_mean(&self, factor: usize) -> Result<Grid> {
        if factor == 0 || self.ncols % factor != 0 || self.nrows % factor != 0 {
            return Err(Error::Dimension(format!(
                "factor {factor} does not divide {}x{}",
                self.ncols, self.nrows
            )));
        }
        let ncols = self.ncols / factor;
        let nrows = self.nrows / factor;
        let mut out = Vec::with_capacity(ncols * nrows);
        for orow in 0..nrows {
            for ocol in 0..ncols {
                let mut sum = 0.0;
                let mut n = 0usize;
                for r in orow * factor..(orow + 1) * factor {
                    for c in ocol * factor..(ocol + 1) * factor {
                        if let Some(v) = self.value(r, c) {
                            sum += v;
                            n += 1;
                        }
                    }
                }
                out.push(if n == 0 { self.nodata } else { sum / n as f64 });
            }
        }
        Grid::new(
            ncols,
            nrows,
            self.xll,
            self.yll,
            self.cellsize * factor as f64,
            self.nodata,
            out,
        )
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// True when both grids share size and georeferencing exactly.
    pub fn same_geometry(&self, other: &Grid) -> bool {
        self.geometry() == other.geometry()
    }
}
