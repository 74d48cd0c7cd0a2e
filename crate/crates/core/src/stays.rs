//! Stay detection and inter-stay trips.
//!
//! A stay is a maximal run of consecutive same-cell points whose time span
//! strictly exceeds the stay threshold. A recording gap longer than
//! `max_gap_minutes` breaks a run so device-off periods cannot fabricate
//! long stays; stays from gap-adjacent runs in the same cell are merged
//! back together, with the gap itself not counted as presence.

use std::io::Write;

use crate::geo::{haversine_km, GridCell};
use crate::ingest::CleanTrajectory;
use crate::Result;

/// Detection parameters. `t_minutes` is the strict lower bound on a stay's
/// span; `max_gap_minutes` bounds the silence tolerated inside one run.
#[derive(Debug, Clone, Copy)]
pub struct StayParams {
    pub t_minutes: f64,
    pub max_gap_minutes: f64,
}

impl Default for StayParams {
    fn default() -> Self {
        Self { t_minutes: 30.0, max_gap_minutes: 120.0 }
    }
}

/// A continuous occupation of one grid cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stay {
    pub cell: GridCell,
    /// First record of the stay, UNIX seconds.
    pub t_start: i64,
    /// Last record of the stay, UNIX seconds.
    pub t_end: i64,
    /// Observed presence in minutes. For a merged stay this is the sum of
    /// the merged runs' spans, so a recording gap is never counted.
    pub duration_min: f64,
    // Source run indices, used to decide merge adjacency.
    first_run: usize,
    last_run: usize,
}

/// A user's stays in chronological order.
#[derive(Debug, Clone, PartialEq)]
pub struct StayList {
    pub user_id: String,
    pub stays: Vec<Stay>,
}

impl StayList {
    pub fn len(&self) -> usize {
        self.stays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stays.is_empty()
    }
}

/// A movement between two consecutive stays.
#[derive(Debug, Clone, PartialEq)]
pub struct Trip {
    pub from_index: usize,
    pub to_index: usize,
    pub depart: i64,
    pub arrive: i64,
    pub distance_km: f64,
}

/// Detect stays in a snapped, time-sorted trajectory.
pub fn detect_stays(traj: &CleanTrajectory, params: &StayParams) -> StayList {
    let max_gap_secs = (params.max_gap_minutes * 60.0) as i64;
    let threshold_secs = params.t_minutes * 60.0;

    // Maximal same-cell runs, broken by a cell change or an over-long gap.
    // Each run keeps its ordinal so merging can require adjacency.
    struct Run {
        cell: GridCell,
        t_start: i64,
        t_end: i64,
        index: usize,
    }
    let mut runs: Vec<Run> = Vec::new();
    for p in &traj.points {
        match runs.last_mut() {
            Some(run) if run.cell.id() == p.cell.id() && p.t - run.t_end <= max_gap_secs => {
                run.t_end = p.t;
            }
            _ => {
                let index = runs.len();
                runs.push(Run { cell: p.cell, t_start: p.t, t_end: p.t, index });
            }
        }
    }

    let mut stays: Vec<Stay> = Vec::new();
    for run in &runs {
        let span_secs = (run.t_end - run.t_start) as f64;
        if span_secs <= threshold_secs {
            continue;
        }
        let stay = Stay {
            cell: run.cell,
            t_start: run.t_start,
            t_end: run.t_end,
            duration_min: span_secs / 60.0,
            first_run: run.index,
            last_run: run.index,
        };
        match stays.last_mut() {
            // Same cell and nothing but a recording gap between the runs.
            Some(prev) if prev.cell.id() == stay.cell.id() && stay.first_run == prev.last_run + 1 => {
                prev.t_end = stay.t_end;
                prev.duration_min += stay.duration_min;
                prev.last_run = stay.last_run;
            }
            _ => stays.push(stay),
        }
    }

    StayList { user_id: traj.user_id.clone(), stays }
}

/// Derive one trip per consecutive stay pair. The distance sums the
/// trajectory's own segments between the end of one stay and the start of
/// the next, falling back to the straight cell-center distance when the
/// trajectory has no record of the transition.
pub fn derive_trips(stay_list: &StayList, traj: &CleanTrajectory) -> Vec<Trip> {
    let mut trips = Vec::new();
    for i in 1..stay_list.stays.len() {
        let from = &stay_list.stays[i - 1];
        let to = &stay_list.stays[i];
        let depart = from.t_end;
        let arrive = to.t_start;
        let window: Vec<_> =
            traj.points.iter().filter(|p| p.t >= depart && p.t <= arrive).collect();
        let distance_km = if window.len() >= 2 {
            window
                .windows(2)
                .map(|pair| {
                    haversine_km(
                        pair[0].cell.center_lon,
                        pair[0].cell.center_lat,
                        pair[1].cell.center_lon,
                        pair[1].cell.center_lat,
                    )
                })
                .sum()
        } else {
            haversine_km(
                from.cell.center_lon,
                from.cell.center_lat,
                to.cell.center_lon,
                to.cell.center_lat,
            )
        };
        trips.push(Trip { from_index: i - 1, to_index: i, depart, arrive, distance_km });
    }
    trips
}

/// Serialize stays as `user_id,ix,iy,t_start,duration_min` rows.
pub fn write_stays<W: Write>(lists: &[&StayList], mut writer: W, delimiter: char) -> Result<()> {
    for list in lists {
        for stay in &list.stays {
            writeln!(
                writer,
                "{}{d}{}{d}{}{d}{}{d}{}",
                list.user_id,
                stay.cell.ix,
                stay.cell.iy,
                stay.t_start,
                stay.duration_min,
                d = delimiter
            )?;
        }
    }
    Ok(())
}
