//! Raw file parsing, grid snapping and cohort-quality filtering.
//!
//! Trajectory files are delimiter-separated `user_id,lon,lat,t` rows; POI
//! files are `tag,lon,lat[,wkt_polygon]` rows where a polygon marks the
//! record as an AOI. Filtering removes per-point localization drift first,
//! then trims users by total recorded span and by maximum speed, using
//! exact sort-then-interpolate percentiles over the whole cohort.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::error::Error;
use crate::geo::{haversine_km, GridCell, GridSpec};
use crate::Result;

/// One unsnapped location record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fix {
    pub lon: f64,
    pub lat: f64,
    pub t: i64,
}

/// A user's parsed records: grouped, time-sorted, duplicate timestamps
/// collapsed to the last occurrence. Coordinates are not yet snapped.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTrajectory {
    pub user_id: String,
    pub points: Vec<Fix>,
}

/// One snapped record of a [`CleanTrajectory`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnappedPoint {
    pub cell: GridCell,
    pub t: i64,
}

/// A per-user, time-sorted, grid-snapped trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct CleanTrajectory {
    pub user_id: String,
    pub points: Vec<SnappedPoint>,
}

impl CleanTrajectory {
    /// Number of trajectory points (the `n_u` of the gyration formula).
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Recorded time span in seconds (0 for a single point).
    pub fn span_secs(&self) -> i64 {
        match (self.points.first(), self.points.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0,
        }
    }
}

/// A POI (point) or AOI (polygon) record with its semantic tag.
#[derive(Debug, Clone, PartialEq)]
pub struct PoiRecord {
    pub tag: String,
    pub lon: f64,
    pub lat: f64,
    /// Closed ring of (lon, lat) vertices; present iff the record is an AOI.
    pub polygon: Option<Vec<(f64, f64)>>,
}

/// How a delimited input stream is laid out.
#[derive(Debug, Clone, Copy)]
pub struct FormatDescriptor {
    pub delimiter: char,
    pub has_header: bool,
}

impl Default for FormatDescriptor {
    fn default() -> Self {
        Self { delimiter: ',', has_header: false }
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn parse_f64(field: &str, name: &str, line: usize) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| parse_err(line, format!("invalid {name} {field:?}")))
}

/// Parse a trajectory stream into per-user raw trajectories.
///
/// Records are grouped by user and sorted by timestamp; rows sharing a
/// (user, t) pair collapse to the last occurrence in input order. Empty
/// input yields an empty map.
pub fn parse_trajectories<R: BufRead>(
    reader: R,
    format: FormatDescriptor,
) -> Result<BTreeMap<String, RawTrajectory>> {
    let mut users: BTreeMap<String, Vec<Fix>> = BTreeMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if idx == 0 && format.has_header {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(format.delimiter).collect();
        if fields.len() != 4 {
            return Err(parse_err(lineno, format!("expected 4 fields, got {}", fields.len())));
        }
        let user_id = fields[0].trim();
        if user_id.is_empty() {
            return Err(parse_err(lineno, "empty user_id"));
        }
        let lon = parse_f64(fields[1], "lon", lineno)?;
        let lat = parse_f64(fields[2], "lat", lineno)?;
        let t = fields[3]
            .trim()
            .parse::<i64>()
            .map_err(|_| parse_err(lineno, format!("invalid timestamp {:?}", fields[3])))?;
        if !(-180.0..=180.0).contains(&lon) {
            return Err(parse_err(lineno, format!("lon {lon} out of range")));
        }
        if !(-90.0..=90.0).contains(&lat) {
            return Err(parse_err(lineno, format!("lat {lat} out of range")));
        }
        if t < 0 {
            return Err(parse_err(lineno, format!("negative timestamp {t}")));
        }
        users.entry(user_id.to_string()).or_default().push(Fix { lon, lat, t });
    }

    let mut out = BTreeMap::new();
    for (user_id, mut points) in users {
        // Stable sort keeps input order among equal timestamps, so keeping
        // the last element of each equal-t run keeps the last occurrence.
        points.sort_by_key(|p| p.t);
        let mut deduped: Vec<Fix> = Vec::with_capacity(points.len());
        for p in points {
            match deduped.last_mut() {
                Some(last) if last.t == p.t => *last = p,
                _ => deduped.push(p),
            }
        }
        out.insert(user_id.clone(), RawTrajectory { user_id, points: deduped });
    }
    Ok(out)
}

/// Serialize raw trajectories back to `user_id,lon,lat,t` rows.
pub fn write_trajectories<W: Write>(
    trajectories: &BTreeMap<String, RawTrajectory>,
    mut writer: W,
    delimiter: char,
) -> Result<()> {
    for traj in trajectories.values() {
        for p in &traj.points {
            writeln!(
                writer,
                "{}{d}{}{d}{}{d}{}",
                traj.user_id,
                p.lon,
                p.lat,
                p.t,
                d = delimiter
            )?;
        }
    }
    Ok(())
}

/// Parse a POI/AOI stream. The optional fourth field is a single-ring WKT
/// polygon; its commas are protected by splitting into at most four fields.
pub fn parse_pois<R: BufRead>(reader: R, format: FormatDescriptor) -> Result<Vec<PoiRecord>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if idx == 0 && format.has_header {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.splitn(4, format.delimiter).collect();
        if fields.len() < 3 {
            return Err(parse_err(lineno, format!("expected >=3 fields, got {}", fields.len())));
        }
        let tag = fields[0].trim();
        if tag.is_empty() {
            return Err(parse_err(lineno, "empty tag"));
        }
        let lon = parse_f64(fields[1], "lon", lineno)?;
        let lat = parse_f64(fields[2], "lat", lineno)?;
        let polygon = match fields.get(3).map(|s| s.trim()) {
            Some("") | None => None,
            Some(wkt) => Some(parse_wkt_polygon(wkt, lineno)?),
        };
        out.push(PoiRecord { tag: tag.to_string(), lon, lat, polygon });
    }
    Ok(out)
}

/// Serialize POI records to `tag,lon,lat[,wkt_polygon]` rows.
pub fn write_pois<W: Write>(pois: &[PoiRecord], mut writer: W, delimiter: char) -> Result<()> {
    for poi in pois {
        match &poi.polygon {
            None => writeln!(writer, "{}{d}{}{d}{}", poi.tag, poi.lon, poi.lat, d = delimiter)?,
            Some(ring) => {
                let verts: Vec<String> =
                    ring.iter().map(|(x, y)| format!("{x} {y}")).collect();
                writeln!(
                    writer,
                    "{}{d}{}{d}{}{d}POLYGON(({}))",
                    poi.tag,
                    poi.lon,
                    poi.lat,
                    verts.join(", "),
                    d = delimiter
                )?;
            }
        }
    }
    Ok(())
}

fn parse_wkt_polygon(wkt: &str, lineno: usize) -> Result<Vec<(f64, f64)>> {
    let inner = wkt
        .strip_prefix("POLYGON((")
        .and_then(|s| s.strip_suffix("))"))
        .ok_or_else(|| parse_err(lineno, format!("unsupported WKT {wkt:?}")))?;
    let mut ring = Vec::new();
    for vertex in inner.split(',') {
        let mut coords = vertex.split_whitespace();
        let x = coords
            .next()
            .and_then(|v| v.parse::<f64>().ok())
            .ok_or_else(|| parse_err(lineno, format!("bad polygon vertex {vertex:?}")))?;
        let y = coords
            .next()
            .and_then(|v| v.parse::<f64>().ok())
            .ok_or_else(|| parse_err(lineno, format!("bad polygon vertex {vertex:?}")))?;
        ring.push((x, y));
    }
    // WKT rings repeat the first vertex at the end; store the open form.
    if ring.len() >= 2 && ring.first() == ring.last() {
        ring.pop();
    }
    if ring.len() < 3 {
        return Err(parse_err(lineno, "polygon ring needs at least 3 vertices"));
    }
    Ok(ring)
}

/// Southwest corner of the bounding box over all parsed points; this is the
/// per-run grid reference. `None` on empty input.
pub fn bounding_box_reference(trajectories: &BTreeMap<String, RawTrajectory>) -> Option<(f64, f64)> {
    let mut sw: Option<(f64, f64)> = None;
    for traj in trajectories.values() {
        for p in &traj.points {
            sw = Some(match sw {
                None => (p.lon, p.lat),
                Some((lon, lat)) => (lon.min(p.lon), lat.min(p.lat)),
            });
        }
    }
    sw
}

/// Snap every trajectory onto the grid.
pub fn snap_trajectories(
    trajectories: &BTreeMap<String, RawTrajectory>,
    grid: &GridSpec,
) -> BTreeMap<String, CleanTrajectory> {
    trajectories
        .iter()
        .map(|(user, traj)| {
            let points = traj
                .points
                .iter()
                .map(|p| SnappedPoint { cell: grid.snap(p.lon, p.lat), t: p.t })
                .collect();
            (user.clone(), CleanTrajectory { user_id: user.clone(), points })
        })
        .collect()
}

/// Counts and thresholds from one [`filter_cohort`] run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FilterReport {
    pub users_in: usize,
    pub users_retained: usize,
    pub points_in: usize,
    pub points_removed_drift: usize,
    pub users_removed_duration: usize,
    pub users_removed_speed: usize,
    pub drift_speed_threshold_mps: Option<f64>,
    pub duration_threshold_secs: Option<f64>,
    pub user_speed_threshold_mps: Option<f64>,
    pub insufficient_cohort: bool,
}

impl FilterReport {
    /// Structured text document: one `key=value` line per field.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("users_in={}\n", self.users_in));
        s.push_str(&format!("users_retained={}\n", self.users_retained));
        s.push_str(&format!("points_in={}\n", self.points_in));
        s.push_str(&format!("points_removed_drift={}\n", self.points_removed_drift));
        s.push_str(&format!("users_removed_duration={}\n", self.users_removed_duration));
        s.push_str(&format!("users_removed_speed={}\n", self.users_removed_speed));
        let fmt_opt = |v: Option<f64>| v.map_or("none".to_string(), |x| x.to_string());
        s.push_str(&format!(
            "drift_speed_threshold_mps={}\n",
            fmt_opt(self.drift_speed_threshold_mps)
        ));
        s.push_str(&format!("duration_threshold_secs={}\n", fmt_opt(self.duration_threshold_secs)));
        s.push_str(&format!(
            "user_speed_threshold_mps={}\n",
            fmt_opt(self.user_speed_threshold_mps)
        ));
        if self.insufficient_cohort {
            s.push_str("note=insufficient cohort\n");
        }
        s
    }
}

/// Exact linear-interpolation quantile of a sorted slice (R type 7).
///
/// The convention matters for the filter semantics: when every value is
/// identical the quantile equals that value, so the strict comparisons used
/// below remove nothing from a degenerate distribution.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    assert!((0.0..=1.0).contains(&q));
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 < sorted.len() {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[lo]
    }
}

fn segment_speed_mps(a: &SnappedPoint, b: &SnappedPoint) -> f64 {
    let dt = (b.t - a.t) as f64;
    debug_assert!(dt > 0.0);
    haversine_km(a.cell.center_lon, a.cell.center_lat, b.cell.center_lon, b.cell.center_lat)
        * 1000.0
        / dt
}

/// Apply the cohort-quality filters.
///
/// Per-point drift removal first (incoming speed above the cohort's
/// `speed_quantile` of all point speeds), then whole-user trims: users whose
/// recorded span falls below the cohort's `duration_quantile` of spans or
/// whose maximum remaining speed exceeds the `speed_quantile` of per-user
/// maximum speeds. A cohort of fewer than 2 users skips the percentile
/// filters entirely.
pub fn filter_cohort(
    trajectories: &BTreeMap<String, CleanTrajectory>,
    speed_quantile: f64,
    duration_quantile: f64,
) -> (BTreeMap<String, CleanTrajectory>, FilterReport) {
    let mut report = FilterReport {
        users_in: trajectories.len(),
        points_in: trajectories.values().map(|t| t.len()).sum(),
        ..FilterReport::default()
    };

    if trajectories.len() < 2 {
        report.insufficient_cohort = true;
        report.users_retained = trajectories.len();
        return (trajectories.clone(), report);
    }

    // Drift: pool every incoming point speed across the cohort.
    let mut all_speeds = Vec::new();
    for traj in trajectories.values() {
        for pair in traj.points.windows(2) {
            all_speeds.push(segment_speed_mps(&pair[0], &pair[1]));
        }
    }

    let mut cleaned: BTreeMap<String, CleanTrajectory> = BTreeMap::new();
    if all_speeds.is_empty() {
        cleaned = trajectories.clone();
    } else {
        all_speeds.sort_by(f64::total_cmp);
        let drift_threshold = quantile_sorted(&all_speeds, speed_quantile);
        report.drift_speed_threshold_mps = Some(drift_threshold);
        for (user, traj) in trajectories {
            let mut kept: Vec<SnappedPoint> = Vec::with_capacity(traj.points.len());
            for p in &traj.points {
                match kept.last() {
                    Some(prev) if segment_speed_mps(prev, p) > drift_threshold => {
                        report.points_removed_drift += 1;
                    }
                    _ => kept.push(*p),
                }
            }
            cleaned.insert(user.clone(), CleanTrajectory { user_id: user.clone(), points: kept });
        }
    }

    // User-level trims on the drift-cleaned cohort.
    let mut spans: Vec<f64> = cleaned.values().map(|t| t.span_secs() as f64).collect();
    spans.sort_by(f64::total_cmp);
    let duration_threshold = quantile_sorted(&spans, duration_quantile);
    report.duration_threshold_secs = Some(duration_threshold);

    let max_speed = |traj: &CleanTrajectory| -> f64 {
        traj.points
            .windows(2)
            .map(|pair| segment_speed_mps(&pair[0], &pair[1]))
            .fold(0.0, f64::max)
    };
    let mut user_max: Vec<f64> = cleaned.values().map(max_speed).collect();
    user_max.sort_by(f64::total_cmp);
    let user_speed_threshold = quantile_sorted(&user_max, speed_quantile);
    report.user_speed_threshold_mps = Some(user_speed_threshold);

    let mut retained = BTreeMap::new();
    for (user, traj) in cleaned {
        if (traj.span_secs() as f64) < duration_threshold {
            report.users_removed_duration += 1;
        } else if max_speed(&traj) > user_speed_threshold {
            report.users_removed_speed += 1;
        } else {
            retained.insert(user, traj);
        }
    }
    report.users_retained = retained.len();
    (retained, report)
}

/// Serialize snapped trajectories as `user_id,ix,iy,t` rows.
pub fn write_clean<W: Write>(
    trajectories: &BTreeMap<String, CleanTrajectory>,
    mut writer: W,
    delimiter: char,
) -> Result<()> {
    for traj in trajectories.values() {
        for p in &traj.points {
            writeln!(
                writer,
                "{}{d}{}{d}{}{d}{}",
                traj.user_id,
                p.cell.ix,
                p.cell.iy,
                p.t,
                d = delimiter
            )?;
        }
    }
    Ok(())
}

/// Read back trajectories written by [`write_clean`], reconstructing cell
/// centers from the grid spec.
pub fn read_clean<R: BufRead>(
    reader: R,
    grid: &GridSpec,
    delimiter: char,
) -> Result<BTreeMap<String, CleanTrajectory>> {
    let mut out: BTreeMap<String, CleanTrajectory> = BTreeMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(delimiter).collect();
        if fields.len() != 4 {
            return Err(parse_err(lineno, format!("expected 4 fields, got {}", fields.len())));
        }
        let user_id = fields[0].trim().to_string();
        let ix = fields[1]
            .trim()
            .parse::<i64>()
            .map_err(|_| parse_err(lineno, format!("invalid ix {:?}", fields[1])))?;
        let iy = fields[2]
            .trim()
            .parse::<i64>()
            .map_err(|_| parse_err(lineno, format!("invalid iy {:?}", fields[2])))?;
        let t = fields[3]
            .trim()
            .parse::<i64>()
            .map_err(|_| parse_err(lineno, format!("invalid timestamp {:?}", fields[3])))?;
        out.entry(user_id.clone())
            .or_insert_with(|| CleanTrajectory { user_id, points: Vec::new() })
            .points
            .push(SnappedPoint { cell: grid.cell(ix, iy), t });
    }
    Ok(out)
}

/// One-line text form of a grid spec, stored alongside snapped artifacts.
pub fn grid_to_text(grid: &GridSpec) -> String {
    format!("size_m={} ref_lon={} ref_lat={}\n", grid.size_m, grid.ref_lon, grid.ref_lat)
}

/// Parse the text form produced by [`grid_to_text`].
pub fn grid_from_text(text: &str) -> Result<GridSpec> {
    let mut size_m = None;
    let mut ref_lon = None;
    let mut ref_lat = None;
    for token in text.split_whitespace() {
        let (key, value) = token
            .split_once('=')
            .ok_or_else(|| parse_err(1, format!("bad grid token {token:?}")))?;
        let v: f64 =
            value.parse().map_err(|_| parse_err(1, format!("bad grid value {value:?}")))?;
        match key {
            "size_m" => size_m = Some(v),
            "ref_lon" => ref_lon = Some(v),
            "ref_lat" => ref_lat = Some(v),
            _ => return Err(parse_err(1, format!("unknown grid key {key:?}"))),
        }
    }
    match (size_m, ref_lon, ref_lat) {
        (Some(s), Some(lon), Some(lat)) => Ok(GridSpec::new(s, lon, lat)),
        _ => Err(parse_err(1, "incomplete grid spec")),
    }
}
