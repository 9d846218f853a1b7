//! Grids, point clouds, polygons and terrain derivatives.

mod ascii;
mod grid;
mod points;
mod polygon;
mod terrain;

pub use ascii::{format_g10, format_grid, parse_grid, read_grid, write_grid};
pub use grid::{Grid, GridGeometry};
pub use points::{normalize_heights, parse_points, read_points, NormalizeTally, PointCloud, PointRecord, ReturnClass};
pub use polygon::{
    cells_in_polygon, format_polygons, parse_polygons, read_polygons, zonal_weighted_mean, Polygon, Ring,
};
pub use terrain::slope_grid;

