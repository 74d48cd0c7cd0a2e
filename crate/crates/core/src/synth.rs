//! Deterministic synthetic cohorts: labeled trajectories plus a matching
//! POI/AOI map, so the whole pipeline can be exercised and scored without
//! any proprietary data.
//!
//! Each user is drawn from an archetype that fixes their anchors (home,
//! work, school, ...), a daily schedule template, and movement style.
//! Trajectories sample the simulated day every five minutes; trips move at
//! a constant cruise speed along straight lines between anchors. Anchors
//! carry archetype-consistent POIs (some as AOI polygons), and uniform
//! background POIs add matching noise.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::geo::GridSpec;
use crate::ingest::{Fix, PoiRecord, RawTrajectory};
use crate::Result;

/// Midnight of the simulated day, UNIX seconds.
pub const DAY_START_UNIX: i64 = 1_575_417_600;
const DAY_SECS: i64 = 86_400;
/// Sampling cadence: one record every five minutes, roughly the reference
/// density of 100+ points per user-day.
const CADENCE_SECS: i64 = 300;
const SAMPLES_PER_DAY: i64 = DAY_SECS / CADENCE_SECS;
/// Cruise speed for every simulated trip, km/h.
const TRIP_SPEED_KMH: f64 = 24.0;

/// Built-in archetype names, mirroring the seven lifestyle profiles the
/// clustering is expected to recover (plus `random_walker`, a structureless
/// control cohort used by tests).
pub const ARCHETYPE_NAMES: [&str; 8] = [
    "home_anchored",
    "school_run",
    "short_commuter",
    "long_commuter",
    "live_work_nearby",
    "industrial_commuter",
    "explorer",
    "random_walker",
];

/// Cohort generation parameters.
#[derive(Debug, Clone)]
pub struct CohortSpec {
    pub n_users: usize,
    /// Side of the square city, km.
    pub extent_km: f64,
    /// Density of background (noise) POIs.
    pub poi_noise_per_km2: f64,
    pub seed: u64,
    /// (archetype name, fraction); fractions must sum to 1.
    pub mix: Vec<(String, f64)>,
}

impl CohortSpec {
    /// The default seven-profile mix; explorers sit near the ~10% share
    /// reported for exploratory movers.
    pub fn default_mix() -> Vec<(String, f64)> {
        vec![
            ("home_anchored".into(), 0.16),
            ("school_run".into(), 0.12),
            ("short_commuter".into(), 0.20),
            ("long_commuter".into(), 0.15),
            ("live_work_nearby".into(), 0.13),
            ("industrial_commuter".into(), 0.13),
            ("explorer".into(), 0.11),
        ]
    }

    pub fn new(n_users: usize, seed: u64) -> Self {
        Self {
            n_users,
            extent_km: 25.0,
            poi_noise_per_km2: 3.0,
            seed,
            mix: Self::default_mix(),
        }
    }
}

/// A generated cohort, ready to serialize through the ingest formats.
#[derive(Debug, Clone)]
pub struct Cohort {
    pub trajectories: BTreeMap<String, RawTrajectory>,
    pub pois: Vec<PoiRecord>,
    /// user id -> archetype name; partitions the generated users exactly.
    pub labels: BTreeMap<String, String>,
}

/// One fixed place in a user's day.
#[derive(Debug, Clone)]
struct Anchor {
    x_km: f64,
    y_km: f64,
    tag: &'static str,
    /// Half-side of an AOI square in meters; None makes a point POI.
    aoi_half_m: Option<f64>,
    /// Anchors without a tag (random walk waypoints) place no POI.
    place_poi: bool,
}

impl Anchor {
    fn place(x_km: f64, y_km: f64, tag: &'static str) -> Self {
        Self { x_km, y_km, tag, aoi_half_m: None, place_poi: true }
    }

    fn aoi(x_km: f64, y_km: f64, tag: &'static str, half_m: f64) -> Self {
        Self { x_km, y_km, tag, aoi_half_m: Some(half_m), place_poi: true }
    }

    fn waypoint(x_km: f64, y_km: f64) -> Self {
        Self { x_km, y_km, tag: "", aoi_half_m: None, place_poi: false }
    }
}

/// One scheduled movement: leave for `target` at `depart_min` minutes past
/// midnight. Departures are quantized to the sampling grid.
#[derive(Debug, Clone, Copy)]
struct Leg {
    depart_min: i64,
    target: usize,
}

struct DayPlan {
    anchors: Vec<Anchor>,
    legs: Vec<Leg>,
}

fn dist_km(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Uniform point with a margin from the city edge.
fn point_in_extent(rng: &mut ChaCha8Rng, extent_km: f64, margin_km: f64) -> (f64, f64) {
    (
        rng.random_range(margin_km..extent_km - margin_km),
        rng.random_range(margin_km..extent_km - margin_km),
    )
}

/// A point at a distance drawn from `lo..hi` km away from `from`, kept
/// inside the extent. The distance shrinks when geometry leaves no room.
fn point_at_distance(
    rng: &mut ChaCha8Rng,
    from: (f64, f64),
    lo: f64,
    hi: f64,
    extent_km: f64,
    margin_km: f64,
) -> (f64, f64) {
    let mut d = rng.random_range(lo..hi);
    for _ in 0..200 {
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        let p = (from.0 + d * theta.cos(), from.1 + d * theta.sin());
        if p.0 > margin_km
            && p.0 < extent_km - margin_km
            && p.1 > margin_km
            && p.1 < extent_km - margin_km
        {
            return p;
        }
        d *= 0.95;
    }
    from
}

/// Random departure minute inside a window, quantized to the cadence.
fn minute_in(rng: &mut ChaCha8Rng, lo_min: i64, hi_min: i64) -> i64 {
    let steps = (hi_min - lo_min) / 5;
    lo_min + rng.random_range(0..=steps) * 5
}

fn build_plan(
    archetype: &str,
    rng: &mut ChaCha8Rng,
    extent_km: f64,
) -> Result<DayPlan> {
    let margin = 0.5;
    let home = point_in_extent(rng, extent_km, margin);
    let mut anchors = vec![Anchor::place(home.0, home.1, "residence")];
    let mut legs = Vec::new();

    let add_anchor = |a: Anchor, anchors: &mut Vec<Anchor>| -> usize {
        anchors.push(a);
        anchors.len() - 1
    };

    match archetype {
        "home_anchored" => {
            let shop = point_at_distance(rng, home, 0.6, 1.0, extent_km, margin);
            let shop_idx =
                add_anchor(Anchor::place(shop.0, shop.1, "convenience store"), &mut anchors);
            let out = minute_in(rng, 660, 780);
            legs.push(Leg { depart_min: out, target: shop_idx });
            legs.push(Leg { depart_min: out + minute_in(rng, 60, 90), target: 0 });
            let plaza = point_at_distance(rng, home, 0.4, 0.8, extent_km, margin);
            let plaza_idx = add_anchor(
                Anchor::place(plaza.0, plaza.1, "recreational plaza"),
                &mut anchors,
            );
            let stroll = minute_in(rng, 1110, 1170);
            legs.push(Leg { depart_min: stroll, target: plaza_idx });
            legs.push(Leg { depart_min: stroll + minute_in(rng, 45, 60), target: 0 });
        }
        "school_run" => {
            let school =
                point_at_distance(rng, home, 2.5, 3.5, extent_km, margin);
            let school_idx =
                add_anchor(Anchor::place(school.0, school.1, "high school"), &mut anchors);
            let morning = minute_in(rng, 430, 460);
            legs.push(Leg { depart_min: morning, target: school_idx });
            let back = morning + minute_in(rng, 50, 70);
            // Errand on the way back from the drop-off.
            let market = point_at_distance(rng, school, 0.5, 1.0, extent_km, margin);
            let market_idx =
                add_anchor(Anchor::place(market.0, market.1, "commercial space"), &mut anchors);
            legs.push(Leg { depart_min: back, target: market_idx });
            legs.push(Leg { depart_min: back + minute_in(rng, 45, 65), target: 0 });
            let afternoon = minute_in(rng, 900, 930);
            legs.push(Leg { depart_min: afternoon, target: school_idx });
            legs.push(Leg { depart_min: afternoon + minute_in(rng, 50, 70), target: 0 });
        }
        "short_commuter" => {
            let work = point_at_distance(rng, home, 3.5, 5.0, extent_km, margin);
            let work_idx = add_anchor(Anchor::place(work.0, work.1, "company"), &mut anchors);
            legs.push(Leg { depart_min: minute_in(rng, 450, 510), target: work_idx });
            let lunch = point_at_distance(rng, work, 0.3, 0.6, extent_km, margin);
            let lunch_idx = add_anchor(
                Anchor::place(lunch.0, lunch.1, "chinese restaurant"),
                &mut anchors,
            );
            let out = minute_in(rng, 720, 750);
            legs.push(Leg { depart_min: out, target: lunch_idx });
            legs.push(Leg { depart_min: out + minute_in(rng, 45, 60), target: work_idx });
            legs.push(Leg { depart_min: minute_in(rng, 1080, 1140), target: 0 });
        }
        "long_commuter" => {
            let office =
                point_at_distance(rng, home, 15.0, 19.0, extent_km, margin);
            let office_idx =
                add_anchor(Anchor::place(office.0, office.1, "office building"), &mut anchors);
            legs.push(Leg { depart_min: minute_in(rng, 410, 460), target: office_idx });
            let mall = point_at_distance(rng, office, 0.2, 0.5, extent_km, margin);
            let mall_idx =
                add_anchor(Anchor::place(mall.0, mall.1, "commercial space"), &mut anchors);
            let out = minute_in(rng, 720, 750);
            legs.push(Leg { depart_min: out, target: mall_idx });
            legs.push(Leg { depart_min: out + minute_in(rng, 45, 60), target: office_idx });
            legs.push(Leg { depart_min: minute_in(rng, 1110, 1170), target: 0 });
        }
        "live_work_nearby" => {
            let work = point_at_distance(rng, home, 0.9, 1.5, extent_km, margin);
            let lunch = point_at_distance(rng, work, 0.25, 0.5, extent_km, margin);
            let shop = point_at_distance(rng, home, 0.3, 0.7, extent_km, margin);
            let work_idx = add_anchor(Anchor::place(work.0, work.1, "company"), &mut anchors);
            let lunch_idx = add_anchor(
                Anchor::place(lunch.0, lunch.1, "quick service restaurant"),
                &mut anchors,
            );
            let shop_idx =
                add_anchor(Anchor::place(shop.0, shop.1, "convenience store"), &mut anchors);
            legs.push(Leg { depart_min: minute_in(rng, 480, 540), target: work_idx });
            let lunch_out = minute_in(rng, 720, 750);
            legs.push(Leg { depart_min: lunch_out, target: lunch_idx });
            legs.push(Leg { depart_min: lunch_out + minute_in(rng, 45, 60), target: work_idx });
            let evening = minute_in(rng, 1050, 1095);
            legs.push(Leg { depart_min: evening, target: shop_idx });
            legs.push(Leg { depart_min: evening + minute_in(rng, 35, 50), target: 0 });
        }
        "industrial_commuter" => {
            let park = point_at_distance(rng, home, 9.0, 11.0, extent_km, margin);
            let park_idx =
                add_anchor(Anchor::aoi(park.0, park.1, "industrial park", 120.0), &mut anchors);
            legs.push(Leg { depart_min: minute_in(rng, 410, 450), target: park_idx });
            legs.push(Leg { depart_min: minute_in(rng, 1020, 1080), target: 0 });
        }
        "explorer" => {
            const TARGET_TAGS: [&str; 4] =
                ["park", "recreational plaza", "commercial space", "scenic spot"];
            let visits = rng.random_range(4..=6);
            let mut clock = minute_in(rng, 510, 600);
            let mut from = home;
            for _ in 0..visits {
                let spot =
                    point_at_distance(rng, from, 2.0, 7.0, extent_km, margin);
                let tag = TARGET_TAGS[rng.random_range(0..TARGET_TAGS.len())];
                let anchor = if tag == "park" {
                    Anchor::aoi(spot.0, spot.1, tag, 120.0)
                } else {
                    Anchor::place(spot.0, spot.1, tag)
                };
                let idx = add_anchor(anchor, &mut anchors);
                legs.push(Leg { depart_min: clock, target: idx });
                let travel_min = (dist_km(from, spot) / TRIP_SPEED_KMH * 60.0).ceil() as i64;
                clock += travel_min + minute_in(rng, 45, 90);
                from = spot;
                if rng.random_range(0.0..1.0) < 0.4 {
                    legs.push(Leg { depart_min: clock, target: 0 });
                    let back_min = (dist_km(from, home) / TRIP_SPEED_KMH * 60.0).ceil() as i64;
                    clock += back_min + minute_in(rng, 45, 75);
                    from = home;
                }
            }
            if from != home {
                legs.push(Leg { depart_min: clock.min(1350), target: 0 });
            }
        }
        "random_walker" => {
            let hops = rng.random_range(8..=12);
            let mut clock = minute_in(rng, 420, 480);
            let mut from = home;
            for _ in 0..hops {
                let spot =
                    point_at_distance(rng, from, 1.0, 3.0, extent_km, margin);
                let idx = add_anchor(Anchor::waypoint(spot.0, spot.1), &mut anchors);
                legs.push(Leg { depart_min: clock, target: idx });
                let travel_min = (dist_km(from, spot) / TRIP_SPEED_KMH * 60.0).ceil() as i64;
                clock += travel_min + minute_in(rng, 35, 70);
                from = spot;
                if clock > 1320 {
                    break;
                }
            }
        }
        other => return Err(Error::InvalidSpec(format!("unknown archetype {other:?}"))),
    }
    Ok(DayPlan { anchors, legs })
}

/// Sample a day plan every five minutes. Trips move in a straight planar
/// line at the cruise speed; everything else sits at the current anchor.
fn simulate_day(plan: &DayPlan, city: &GridSpec, user_id: &str) -> RawTrajectory {
    // Sanitize departures: strictly increasing, each after the previous
    // arrival, aligned to the sampling grid.
    struct Move {
        depart_secs: f64,
        arrive_secs: f64,
        from: (f64, f64),
        to: (f64, f64),
    }
    let mut moves: Vec<Move> = Vec::new();
    let mut at = (plan.anchors[0].x_km, plan.anchors[0].y_km);
    let mut ready_at = 0.0f64;
    for leg in &plan.legs {
        let to = (plan.anchors[leg.target].x_km, plan.anchors[leg.target].y_km);
        if to == at {
            continue;
        }
        let mut depart = (leg.depart_min * 60) as f64;
        if depart < ready_at {
            depart = (ready_at / CADENCE_SECS as f64).ceil() * CADENCE_SECS as f64;
        }
        if depart >= DAY_SECS as f64 {
            break;
        }
        let duration = dist_km(at, to) / TRIP_SPEED_KMH * 3600.0;
        moves.push(Move { depart_secs: depart, arrive_secs: depart + duration, from: at, to });
        at = to;
        ready_at = depart + duration + CADENCE_SECS as f64;
    }

    let points = (0..SAMPLES_PER_DAY)
        .map(|s| {
            let t_rel = (s * CADENCE_SECS) as f64;
            let mut pos = (plan.anchors[0].x_km, plan.anchors[0].y_km);
            for m in &moves {
                if t_rel >= m.arrive_secs {
                    pos = m.to;
                } else if t_rel >= m.depart_secs {
                    let f = (t_rel - m.depart_secs) / (m.arrive_secs - m.depart_secs);
                    pos = (m.from.0 + f * (m.to.0 - m.from.0), m.from.1 + f * (m.to.1 - m.from.1));
                    break;
                } else {
                    break;
                }
            }
            let (lon, lat) = city.to_lon_lat(pos.0 * 1000.0, pos.1 * 1000.0);
            Fix { lon, lat, t: DAY_START_UNIX + s * CADENCE_SECS }
        })
        .collect();
    RawTrajectory { user_id: user_id.to_string(), points }
}

fn anchor_pois(plan: &DayPlan, city: &GridSpec) -> Vec<PoiRecord> {
    plan.anchors
        .iter()
        .filter(|a| a.place_poi)
        .map(|a| {
            let (lon, lat) = city.to_lon_lat(a.x_km * 1000.0, a.y_km * 1000.0);
            let polygon = a.aoi_half_m.map(|half| {
                let (x, y) = (a.x_km * 1000.0, a.y_km * 1000.0);
                [
                    (x - half, y - half),
                    (x + half, y - half),
                    (x + half, y + half),
                    (x - half, y + half),
                ]
                .iter()
                .map(|&(px, py)| city.to_lon_lat(px, py))
                .collect()
            });
            PoiRecord { tag: a.tag.to_string(), lon, lat, polygon }
        })
        .collect()
}

/// Largest-remainder apportionment of users to archetypes.
fn apportion(mix: &[(String, f64)], n_users: usize) -> Result<Vec<(String, usize)>> {
    let total: f64 = mix.iter().map(|(_, f)| f).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidSpec(format!("archetype fractions sum to {total}, not 1")));
    }
    for (name, f) in mix {
        if !(0.0..=1.0).contains(f) {
            return Err(Error::InvalidSpec(format!("fraction for {name} out of [0,1]")));
        }
        if !ARCHETYPE_NAMES.contains(&name.as_str()) {
            return Err(Error::InvalidSpec(format!("unknown archetype {name:?}")));
        }
    }
    let mut counts: Vec<(String, usize, f64)> = mix
        .iter()
        .map(|(name, f)| {
            let exact = f * n_users as f64;
            (name.clone(), exact.floor() as usize, exact - exact.floor())
        })
        .collect();
    let mut assigned: usize = counts.iter().map(|(_, c, _)| c).sum();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| counts[b].2.total_cmp(&counts[a].2).then(a.cmp(&b)));
    let mut i = 0;
    while assigned < n_users {
        counts[order[i % order.len()]].1 += 1;
        assigned += 1;
        i += 1;
    }
    Ok(counts.into_iter().map(|(name, c, _)| (name, c)).collect())
}

const NOISE_TAGS: [&str; 6] = [
    "commercial space",
    "chinese restaurant",
    "convenience store",
    "internal building",
    "park",
    "residence",
];

/// City projection used by the generator; the southwest corner doubles as
/// the projection reference.
pub fn city_grid() -> GridSpec {
    GridSpec::new(150.0, 113.75, 22.45)
}

/// Generate a labeled cohort. Equal specs (including seeds) generate
/// identical cohorts; each user draws from an independently derived seed.
pub fn generate_cohort(spec: &CohortSpec) -> Result<Cohort> {
    if spec.n_users == 0 {
        return Err(Error::InvalidSpec("n_users must be >= 1".into()));
    }
    let city = city_grid();
    let quotas = apportion(&spec.mix, spec.n_users)?;

    let mut trajectories = BTreeMap::new();
    let mut labels = BTreeMap::new();
    let mut pois = Vec::new();

    let mut user_idx = 0usize;
    for (archetype, count) in &quotas {
        for _ in 0..*count {
            let user_id = format!("u{user_idx:05}");
            let user_seed =
                spec.seed ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(user_idx as u64 + 1);
            let mut rng = ChaCha8Rng::seed_from_u64(user_seed);
            let plan = build_plan(archetype, &mut rng, spec.extent_km)?;
            trajectories.insert(user_id.clone(), simulate_day(&plan, &city, &user_id));
            pois.extend(anchor_pois(&plan, &city));
            labels.insert(user_id, archetype.clone());
            user_idx += 1;
        }
    }

    // Background noise POIs over the whole extent.
    let mut noise_rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(0xA5A5_A5A5));
    let n_noise = (spec.poi_noise_per_km2 * spec.extent_km * spec.extent_km).round() as usize;
    for i in 0..n_noise {
        let (x, y) = point_in_extent(&mut noise_rng, spec.extent_km, 0.0);
        let (lon, lat) = city.to_lon_lat(x * 1000.0, y * 1000.0);
        pois.push(PoiRecord {
            tag: NOISE_TAGS[i % NOISE_TAGS.len()].to_string(),
            lon,
            lat,
            polygon: None,
        });
    }

    Ok(Cohort { trajectories, pois, labels })
}

/// Serialize a labels map as `user_id,archetype` rows.
pub fn write_labels<W: std::io::Write>(
    labels: &BTreeMap<String, String>,
    mut writer: W,
    delimiter: char,
) -> Result<()> {
    for (user, archetype) in labels {
        writeln!(writer, "{user}{delimiter}{archetype}")?;
    }
    Ok(())
}

/// Parse rows written by [`write_labels`].
pub fn read_labels<R: std::io::BufRead>(
    reader: R,
    delimiter: char,
) -> Result<BTreeMap<String, String>> {
    let mut labels = BTreeMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (user, archetype) = line.split_once(delimiter).ok_or_else(|| Error::Parse {
            line: idx + 1,
            message: "expected user_id,archetype".into(),
        })?;
        labels.insert(user.trim().to_string(), archetype.trim().to_string());
    }
    Ok(labels)
}
