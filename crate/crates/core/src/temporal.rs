//! High-order temporal features: the daily mobility rhythm, its DFT
//! spectrum, and the two spectral ratios built from the one- and
//! two-cycle-per-day components.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::geo::haversine_km;
use crate::ingest::CleanTrajectory;

const SECONDS_PER_DAY: i64 = 86_400;

/// Spectra whose relevant amplitudes fall below this fraction of the DC
/// amplitude carry no periodicity evidence; the ratios then take their
/// neutral conventions instead of amplifying floating-point residue.
const DEGENERATE_REL: f64 = 1e-9;

/// Rhythm binning parameters. `tz_offset_secs` shifts UNIX timestamps into
/// local civil time, since daily rhythms are clock-anchored.
#[derive(Debug, Clone, Copy)]
pub struct RhythmParams {
    pub bins: usize,
    pub tz_offset_secs: i64,
}

impl Default for RhythmParams {
    fn default() -> Self {
        Self { bins: 12, tz_offset_secs: 0 }
    }
}

/// Share of daily travel distance per time-of-day bin.
#[derive(Debug, Clone, PartialEq)]
pub struct MobilityRhythm {
    pub bins: Vec<f64>,
    /// Set when the user covered no distance at all; the bins are then all
    /// zero rather than an arbitrary normalization.
    pub stationary: bool,
}

/// One-sided amplitude spectrum of a length-`series_len` real series.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// `|X_f|` for `f = 0 ..= series_len / 2`.
    pub amplitudes: Vec<f64>,
    pub series_len: usize,
}

/// The two spectral ratios used by the spatiotemporal view.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemporalFeature {
    pub lfer: f64,
    pub dcfr: f64,
}

/// Distance-weighted time-of-day histogram of a user's movement.
///
/// Each consecutive-point segment contributes its distance to the bin
/// containing the segment's midpoint time; the histogram is normalized
/// to the total distance covered.
pub fn mobility_rhythm(traj: &CleanTrajectory, params: &RhythmParams) -> MobilityRhythm {
    assert!(params.bins > 0);
    let mut bins = vec![0.0; params.bins];
    let bin_width = SECONDS_PER_DAY as f64 / params.bins as f64;
    for pair in traj.points.windows(2) {
        let d = haversine_km(
            pair[0].cell.center_lon,
            pair[0].cell.center_lat,
            pair[1].cell.center_lon,
            pair[1].cell.center_lat,
        );
        if d == 0.0 {
            continue;
        }
        let midpoint = (pair[0].t + pair[1].t) as f64 / 2.0;
        let local = midpoint + params.tz_offset_secs as f64;
        let second_of_day = local.rem_euclid(SECONDS_PER_DAY as f64);
        let bin = ((second_of_day / bin_width) as usize).min(params.bins - 1);
        bins[bin] += d;
    }
    let total: f64 = bins.iter().sum();
    if total == 0.0 {
        return MobilityRhythm { bins, stationary: true };
    }
    for b in &mut bins {
        *b /= total;
    }
    MobilityRhythm { bins, stationary: false }
}

/// One-sided DFT amplitudes of a real series, `X_f = sum_j x_j e^{-2pi i f j / k}`.
pub fn dft_amplitudes(series: &[f64]) -> Spectrum {
    let k = series.len();
    assert!(k > 0);
    let mut buffer: Vec<Complex<f64>> =
        series.iter().map(|&x| Complex::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(k).process(&mut buffer);
    let amplitudes = buffer[..=k / 2].iter().map(|c| c.norm()).collect();
    Spectrum { amplitudes, series_len: k }
}

impl Spectrum {
    fn amp(&self, f: usize) -> f64 {
        self.amplitudes.get(f).copied().unwrap_or(0.0)
    }

    /// Energy of the non-DC one-sided spectrum.
    fn non_dc_energy(&self) -> f64 {
        self.amplitudes[1..].iter().map(|a| a * a).sum()
    }
}

/// Low-frequency energy ratio: the share of non-DC spectral energy carried
/// by the one- and two-cycle-per-day components. A spectrum with no
/// meaningful non-DC energy (uniform rhythm, stationary user) maps to 0.
pub fn lfer(spectrum: &Spectrum) -> f64 {
    let energy = spectrum.non_dc_energy();
    if energy.sqrt() <= DEGENERATE_REL * spectrum.amp(0) || energy == 0.0 {
        return 0.0;
    }
    (spectrum.amp(1).powi(2) + spectrum.amp(2).powi(2)) / energy
}

/// Diurnal cycle frequency ratio `amp_2 / (amp_1 + amp_2)`: near 1 for
/// two-cycle-per-day movers, near 0 for one-cycle movers. Without evidence
/// at either frequency the ratio is the neutral 0.5.
pub fn dcfr(spectrum: &Spectrum) -> f64 {
    let (a1, a2) = (spectrum.amp(1), spectrum.amp(2));
    if a1 + a2 <= DEGENERATE_REL * spectrum.amp(0) || a1 + a2 == 0.0 {
        return 0.5;
    }
    a2 / (a1 + a2)
}

/// LFER and DCFR of a user's rhythm.
pub fn temporal_feature(rhythm: &MobilityRhythm) -> TemporalFeature {
    let spectrum = dft_amplitudes(&rhythm.bins);
    TemporalFeature { lfer: lfer(&spectrum), dcfr: dcfr(&spectrum) }
}
