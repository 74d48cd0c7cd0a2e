//! Planar projection, grid snapping and great-circle distance.
//!
//! All grid math runs in a local equirectangular projection anchored at a
//! per-run reference point (the dataset bounding box's southwest corner).
//! At city scale the distortion is negligible and keeps cell indices exact.

/// Mean Earth radius in kilometers.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Meters covered by one degree of latitude (also one degree of longitude
/// at the equator).
const METERS_PER_DEGREE: f64 = EARTH_RADIUS_KM * 1000.0 * std::f64::consts::PI / 180.0;

/// Great-circle distance between two lon/lat points, in kilometers.
pub fn haversine_km(lon1: f64, lat1: f64, lon2: f64, lat2: f64) -> f64 {
    let (lat1r, lat2r) = (lat1.to_radians(), lat2.to_radians());
    let dlat = (lat2 - lat1).to_radians();
    let dlon = (lon2 - lon1).to_radians();
    let a = (dlat / 2.0).sin().powi(2) + lat1r.cos() * lat2r.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * a.sqrt().asin()
}

/// A square anonymization grid: cell size plus the projection reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Cell edge length in meters.
    pub size_m: f64,
    /// Reference longitude (projection origin), degrees.
    pub ref_lon: f64,
    /// Reference latitude (projection origin), degrees.
    pub ref_lat: f64,
}

/// One grid cell, identified by signed column/row indices relative to the
/// reference point, with its center back-projected to degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCell {
    pub ix: i64,
    pub iy: i64,
    pub center_lon: f64,
    pub center_lat: f64,
}

impl GridSpec {
    pub fn new(size_m: f64, ref_lon: f64, ref_lat: f64) -> Self {
        assert!(size_m > 0.0, "grid size must be positive");
        Self { size_m, ref_lon, ref_lat }
    }

    fn meters_per_degree_lon(&self) -> f64 {
        METERS_PER_DEGREE * self.ref_lat.to_radians().cos()
    }

    /// Project a lon/lat point to planar meters east/north of the reference.
    pub fn to_planar_m(&self, lon: f64, lat: f64) -> (f64, f64) {
        (
            (lon - self.ref_lon) * self.meters_per_degree_lon(),
            (lat - self.ref_lat) * METERS_PER_DEGREE,
        )
    }

    /// Project a lon/lat point to planar kilometers.
    pub fn to_planar_km(&self, lon: f64, lat: f64) -> (f64, f64) {
        let (x, y) = self.to_planar_m(lon, lat);
        (x / 1000.0, y / 1000.0)
    }

    /// Inverse of [`to_planar_m`](Self::to_planar_m).
    pub fn to_lon_lat(&self, x_m: f64, y_m: f64) -> (f64, f64) {
        (
            self.ref_lon + x_m / self.meters_per_degree_lon(),
            self.ref_lat + y_m / METERS_PER_DEGREE,
        )
    }

    /// Snap a lon/lat point to its grid cell.
    pub fn snap(&self, lon: f64, lat: f64) -> GridCell {
        let (x, y) = self.to_planar_m(lon, lat);
        let ix = (x / self.size_m).floor() as i64;
        let iy = (y / self.size_m).floor() as i64;
        self.cell(ix, iy)
    }

    /// Reconstruct a cell (and its center) from indices.
    pub fn cell(&self, ix: i64, iy: i64) -> GridCell {
        let cx = (ix as f64 + 0.5) * self.size_m;
        let cy = (iy as f64 + 0.5) * self.size_m;
        let (center_lon, center_lat) = self.to_lon_lat(cx, cy);
        GridCell { ix, iy, center_lon, center_lat }
    }
}

impl GridCell {
    /// Cell identity, ignoring the cached center coordinates.
    pub fn id(&self) -> (i64, i64) {
        (self.ix, self.iy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn city_grid() -> GridSpec {
        GridSpec::new(150.0, 113.75, 22.45)
    }

    #[test]
    fn origin_point_snaps_to_cell_zero() {
        let g = city_grid();
        let cell = g.snap(g.ref_lon, g.ref_lat);
        assert_eq!(cell.id(), (0, 0));
        let (cx, cy) = g.to_planar_m(cell.center_lon, cell.center_lat);
        assert!((cx - 75.0).abs() < 1e-6, "center x {cx}");
        assert!((cy - 75.0).abs() < 1e-6, "center y {cy}");
    }

    #[test]
    fn point_just_past_cell_edge_moves_east() {
        let g = city_grid();
        // 151 m due east of the reference, offset computed from the
        // meters-per-degree factor at the reference latitude.
        let m_per_deg = METERS_PER_DEGREE * g.ref_lat.to_radians().cos();
        let lon = g.ref_lon + 151.0 / m_per_deg;
        let cell = g.snap(lon, g.ref_lat);
        assert_eq!(cell.id(), (1, 0));
    }

    #[test]
    fn snapping_a_center_is_idempotent() {
        let g = city_grid();
        for (ix, iy) in [(0, 0), (3, -2), (-17, 41), (100, 100)] {
            let cell = g.cell(ix, iy);
            let again = g.snap(cell.center_lon, cell.center_lat);
            assert_eq!(again.id(), (ix, iy));
        }
    }

    #[test]
    fn haversine_matches_known_separation() {
        // One degree of latitude is about 111.19 km at this radius.
        let d = haversine_km(114.0, 22.0, 114.0, 23.0);
        assert!((d - EARTH_RADIUS_KM.to_radians()).abs() < 1e-9);
    }

    #[test]
    fn planar_roundtrip() {
        let g = city_grid();
        let (x, y) = g.to_planar_m(113.9123, 22.5771);
        let (lon, lat) = g.to_lon_lat(x, y);
        assert!((lon - 113.9123).abs() < 1e-12);
        assert!((lat - 22.5771).abs() < 1e-12);
    }
}
