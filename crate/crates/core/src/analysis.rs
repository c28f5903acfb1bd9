//! Regime analysis of transport observables.
//!
//! Power-law exponents are read off log-log least-squares fits. Regime
//! boundaries are threshold events on the probability series (first void,
//! farthest site) and on the local-exponent curve (fractal onset). The
//! thresholds live in [`RegimeParams`] and are reported alongside results.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::ProbabilitySeries;
use crate::lattice::{farthest_sites, landmark_sites, opposite_boundary, Lattice};
use crate::observables::ObservableTable;

/// Least-squares power law `value ≈ exp(intercept) τ^exponent` over a window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub tau_lo: f64,
    pub tau_hi: f64,
    pub exponent: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub samples: usize,
}

/// Minimum number of samples in any fit window.
pub const MIN_FIT_SAMPLES: usize = 5;

struct LineFit {
    slope: f64,
    intercept: f64,
    r_squared: f64,
}

fn least_squares(xs: &[f64], ys: &[f64]) -> LineFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res = syy - slope * sxy;
    let r_squared = if syy > 0.0 {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    LineFit {
        slope,
        intercept,
        r_squared,
    }
}

/// Fits `log(value)` against `log(τ)` using the samples with `τ ∈ [tau_lo, tau_hi]`.
pub fn fit_power_law(
    times: &[f64],
    values: &[f64],
    tau_lo: f64,
    tau_hi: f64,
) -> Result<ScalingFit> {
    if times.len() != values.len() {
        return Err(Error::Shape(format!(
            "{} times vs {} values",
            times.len(),
            values.len()
        )));
    }
    if !(tau_lo < tau_hi) {
        return Err(Error::Domain(format!(
            "empty fit window [{tau_lo}, {tau_hi}]"
        )));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(values)
        .filter(|(t, _)| (tau_lo..=tau_hi).contains(*t))
        .map(|(&t, &v)| {
            if t > 0.0 && v > 0.0 {
                Ok((t.ln(), v.ln()))
            } else {
                Err(Error::Domain(format!(
                    "non-positive sample ({t}, {v}) inside fit window"
                )))
            }
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    if xs.len() < MIN_FIT_SAMPLES {
        return Err(Error::Domain(format!(
            "fit window [{tau_lo}, {tau_hi}] holds {} samples, need {MIN_FIT_SAMPLES}",
            xs.len()
        )));
    }
    let line = least_squares(&xs, &ys);
    Ok(ScalingFit {
        tau_lo,
        tau_hi,
        exponent: line.slope,
        intercept: line.intercept,
        r_squared: line.r_squared,
        samples: xs.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopePoint {
    pub tau: f64,
    pub exponent: f64,
}

/// Local log-log exponents from a sliding window.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SlopeCurve {
    pub window: usize,
    pub points: Vec<SlopePoint>,
    /// Centre times of windows skipped for containing a non-positive sample.
    pub skipped: Vec<f64>,
}

/// Sliding-window least-squares slope of `log(value)` versus `log(τ)`.
///
/// `window` must be odd and at least 5; each point is reported at the time of
/// its window centre.
pub fn loglog_slope(times: &[f64], values: &[f64], window: usize) -> Result<SlopeCurve> {
    if window < 5 || window.is_multiple_of(2) {
        return Err(Error::Domain(format!(
            "slope window must be odd and >= 5, got {window}"
        )));
    }
    if times.len() != values.len() {
        return Err(Error::Shape(format!(
            "{} times vs {} values",
            times.len(),
            values.len()
        )));
    }
    let mut curve = SlopeCurve {
        window,
        ..SlopeCurve::default()
    };
    if times.len() < window {
        return Ok(curve);
    }
    for start in 0..=times.len() - window {
        let t = &times[start..start + window];
        let v = &values[start..start + window];
        let centre = t[window / 2];
        if t.iter().chain(v).any(|&x| !(x > 0.0)) {
            curve.skipped.push(centre);
            continue;
        }
        let xs: Vec<f64> = t.iter().map(|x| x.ln()).collect();
        let ys: Vec<f64> = v.iter().map(|y| y.ln()).collect();
        curve.points.push(SlopePoint {
            tau: centre,
            exponent: least_squares(&xs, &ys).slope,
        });
    }
    Ok(curve)
}

/// Earliest grid time at which the probability on `landmark_set` reaches `epsilon`.
///
/// `Ok(None)` when the threshold is never reached on the grid.
pub fn detect_event(
    series: &ProbabilitySeries,
    landmark_set: &[usize],
    epsilon: f64,
) -> Result<Option<f64>> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Domain(format!(
            "event threshold must lie in (0, 1), got {epsilon}"
        )));
    }
    let n = series.n_sites();
    if let Some(&bad) = landmark_set.iter().find(|&&j| j >= n) {
        return Err(Error::bounds("landmark site", bad, format!("0..{n}")));
    }
    Ok(series
        .times
        .iter()
        .zip(&series.probabilities)
        .find(|(_, row)| landmark_set.iter().map(|&j| row[j]).sum::<f64>() >= epsilon)
        .map(|(&t, _)| t))
}

/// Earliest slope-curve time at or after `after_tau` from which the local
/// exponent stays within `d_f ± band` for `run` consecutive windows.
pub fn detect_fractal_onset(
    curve: &SlopeCurve,
    fractal_dimension: f64,
    band: f64,
    after_tau: f64,
    run: usize,
) -> Option<f64> {
    let inside = |p: &SlopePoint| (p.exponent - fractal_dimension).abs() <= band;
    let pts = &curve.points;
    (0..pts.len())
        .filter(|&i| pts[i].tau >= after_tau)
        .find(|&i| i + run <= pts.len() && pts[i..i + run].iter().all(inside))
        .map(|i| pts[i].tau)
}

/// Longest run of consecutive windows with exponent within `centre ± band`
/// among slope points before `before_tau`.
pub fn longest_run_within(curve: &SlopeCurve, centre: f64, band: f64, before_tau: f64) -> usize {
    let mut best = 0;
    let mut current = 0;
    for p in curve.points.iter().take_while(|p| p.tau < before_tau) {
        if (p.exponent - centre).abs() <= band {
            current += 1;
            best = best.max(current);
        } else {
            current = 0;
        }
    }
    best
}

/// Inclusive index range of a plateau.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plateau {
    pub start: usize,
    pub end: usize,
}

/// Maximal index ranges of at least `min_span` samples over which the curve
/// varies by at most `delta`, scanned left to right.
pub fn detect_plateaus(curve: &[f64], delta: f64, min_span: usize) -> Result<Vec<Plateau>> {
    if !(delta > 0.0) {
        return Err(Error::Domain(format!(
            "plateau tolerance must be positive, got {delta}"
        )));
    }
    if min_span < 5 {
        return Err(Error::Domain(format!(
            "plateau span must be >= 5, got {min_span}"
        )));
    }
    let mut out = Vec::new();
    let mut i = 0;
    while i < curve.len() {
        let (mut lo, mut hi) = (curve[i], curve[i]);
        let mut j = i;
        while j + 1 < curve.len() {
            let next = curve[j + 1];
            if hi.max(next) - lo.min(next) > delta {
                break;
            }
            lo = lo.min(next);
            hi = hi.max(next);
            j += 1;
        }
        if j + 1 - i >= min_span {
            out.push(Plateau { start: i, end: j });
            i = j + 1;
        } else {
            i += 1;
        }
    }
    Ok(out)
}

/// Rise of the curve after its first plateau: the largest later value minus
/// the largest value inside that plateau. Zero without plateaus.
pub fn growth_after_first_plateau(curve: &[f64], plateaus: &[Plateau]) -> f64 {
    let Some(first) = plateaus.first() else {
        return 0.0;
    };
    let inside = curve[first.start..=first.end]
        .iter()
        .copied()
        .fold(f64::MIN, f64::max);
    curve[first.end + 1..]
        .iter()
        .map(|v| v - inside)
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaturationParams {
    /// Width (in τ) of the windows over which growth is measured.
    pub window_tau: f64,
    /// Relative growth per unit τ below which the variance counts as saturated.
    pub max_relative_growth: f64,
    /// Trough depth between maxima, relative to the saturation level, that counts as oscillation.
    pub min_prominence: f64,
}

impl Default for SaturationParams {
    fn default() -> Self {
        SaturationParams {
            window_tau: 1.0,
            max_relative_growth: 0.01,
            min_prominence: 0.005,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaturationOutcome {
    pub saturation_tau: Option<f64>,
    pub oscillation: bool,
}

/// Finds where the variance stops growing after the farthest-site event and
/// whether it oscillates afterwards.
///
/// Growth is measured on the running maximum of the curve, so oscillations
/// below an earlier peak do not count as growth. The variance is saturated
/// from the first time `τ_s ≥ farthest_tau` after which every window of width
/// `window_tau` grows the running maximum by less than `max_relative_growth`
/// per unit τ. Oscillation requires two local maxima after `τ_s` separated by
/// a trough at least `min_prominence` times the saturation level deep.
pub fn detect_saturation_and_oscillation(
    times: &[f64],
    variance: &[f64],
    farthest_tau: Option<f64>,
    params: &SaturationParams,
) -> Result<SaturationOutcome> {
    let absent = SaturationOutcome {
        saturation_tau: None,
        oscillation: false,
    };
    if times.len() != variance.len() {
        return Err(Error::Shape(format!(
            "{} times vs {} values",
            times.len(),
            variance.len()
        )));
    }
    let Some(farthest) = farthest_tau else {
        return Ok(absent);
    };
    let n = times.len();
    let mut envelope = Vec::with_capacity(n);
    let mut peak = f64::MIN;
    for &v in variance {
        peak = peak.max(v);
        envelope.push(peak);
    }

    // growth[j] is the relative growth rate of the window starting at j, if the window fits.
    let mut growth: Vec<Option<f64>> = vec![None; n];
    let mut k = 0;
    for j in 0..n {
        k = k.max(j + 1);
        while k < n && times[k] - times[j] < params.window_tau {
            k += 1;
        }
        if k >= n {
            break;
        }
        let base = envelope[j].abs().max(f64::MIN_POSITIVE);
        growth[j] = Some((envelope[k] - envelope[j]) / (base * (times[k] - times[j])));
    }
    let mut suffix_ok = vec![false; n + 1];
    suffix_ok[n] = true;
    for j in (0..n).rev() {
        suffix_ok[j] = suffix_ok[j + 1] && growth[j].is_none_or(|g| g < params.max_relative_growth);
    }
    let Some(start) = (0..n).find(|&i| times[i] >= farthest && growth[i].is_some() && suffix_ok[i])
    else {
        return Ok(absent);
    };

    let level = envelope[start];
    let maxima: Vec<usize> = (start.max(1)..n.saturating_sub(1))
        .filter(|&i| variance[i] > variance[i - 1] && variance[i] >= variance[i + 1])
        .collect();
    let threshold = params.min_prominence * level.abs();
    let oscillation = maxima.iter().enumerate().any(|(a, &m1)| {
        maxima[a + 1..].iter().any(|&m2| {
            let trough = variance[m1..=m2].iter().copied().fold(f64::MAX, f64::min);
            variance[m1].min(variance[m2]) - trough >= threshold
        })
    });
    Ok(SaturationOutcome {
        saturation_tau: Some(times[start]),
        oscillation,
    })
}

/// Thresholds of the regime analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeParams {
    /// Probability mass on a landmark set that marks arrival.
    pub epsilon: f64,
    /// Half-width of the band around `d_f` for the fractal onset.
    pub band: f64,
    /// Consecutive windows required inside the band.
    pub onset_run: usize,
    /// Samples per local-exponent window (odd).
    pub slope_window: usize,
    /// Leading grid points excluded from every exponent fit.
    pub skip_leading: usize,
    /// The normal-regime fit starts at the first time the variance exceeds this.
    pub normal_floor: f64,
    pub plateau_delta: f64,
    pub plateau_min_span: usize,
    pub saturation: SaturationParams,
}

impl Default for RegimeParams {
    fn default() -> Self {
        RegimeParams {
            epsilon: 0.02,
            band: 0.15,
            onset_run: 5,
            slope_window: 11,
            skip_leading: 2,
            normal_floor: 0.05,
            plateau_delta: 0.002,
            plateau_min_span: 5,
            saturation: SaturationParams::default(),
        }
    }
}

/// Transition times, fits and phenomenology of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub kind: crate::lattice::LatticeKind,
    pub generation: u32,
    pub input_site: usize,
    pub fractal_dimension: Option<f64>,
    pub params: RegimeParams,
    /// Arrival at the first effective void (fractals only).
    pub first_void_tau: Option<f64>,
    /// Arrival at the boundary facing the input (void-free lattices only).
    pub boundary_tau: Option<f64>,
    pub fractal_onset_tau: Option<f64>,
    pub farthest_tau: Option<f64>,
    pub saturation_tau: Option<f64>,
    pub normal_fit: Option<ScalingFit>,
    pub fractal_fit: Option<ScalingFit>,
    /// Pólya plateaus as `(tau_start, tau_end)`.
    pub plateaus: Vec<(f64, f64)>,
    pub polya_extra_growth: f64,
    pub oscillation_detected: bool,
    pub slope_curve: SlopeCurve,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<Calibration>,
}

impl RegimeReport {
    /// Named event times present in the report, in regime order.
    pub fn events(&self) -> Vec<(&'static str, f64)> {
        [
            ("first_void", self.first_void_tau),
            ("boundary", self.boundary_tau),
            ("fractal_onset", self.fractal_onset_tau),
            ("farthest", self.farthest_tau),
            ("saturation", self.saturation_tau),
        ]
        .into_iter()
        .filter_map(|(name, t)| t.map(|t| (name, t)))
        .collect()
    }

    /// Whether first void ≤ fractal onset ≤ farthest ≤ saturation over the detected events.
    pub fn is_ordered(&self) -> bool {
        let seq: Vec<f64> = [
            self.first_void_tau,
            self.fractal_onset_tau,
            self.farthest_tau,
            self.saturation_tau,
        ]
        .into_iter()
        .flatten()
        .collect();
        seq.windows(2).all(|w| w[0] <= w[1])
    }
}

/// Runs the full regime analysis of a series on its lattice.
///
/// Fractal lattices close the normal-regime window at the first-void event;
/// void-free lattices close it when the walker reaches the boundary facing
/// the input. The fractal fit spans `[onset, min(farthest, grid end)]`.
pub fn analyze(
    lattice: &Lattice,
    series: &ProbabilitySeries,
    params: &RegimeParams,
) -> Result<RegimeReport> {
    let table = ObservableTable::compute(series, lattice)?;
    let input = series.input_site;
    let kind = lattice.kind();
    let fractal_dimension = kind.meta().map(|m| m.fractal_dimension);

    let skip = params.skip_leading.min(table.len());
    let fit_times = &table.times[skip..];
    let fit_var = &table.variance[skip..];
    let slope_curve = loglog_slope(fit_times, fit_var, params.slope_window)?;

    let (first_void_tau, boundary_tau, farthest_tau) = if kind.is_fractal() {
        let lm = landmark_sites(lattice, input)?;
        (
            detect_event(series, &lm.first_void_boundary, params.epsilon)?,
            None,
            detect_event(series, &lm.farthest_set, params.epsilon)?,
        )
    } else {
        let (far, _) = farthest_sites(lattice, input)?;
        let facing = opposite_boundary(lattice, input)?;
        (
            None,
            detect_event(series, &facing, params.epsilon)?,
            detect_event(series, &far, params.epsilon)?,
        )
    };

    let grid_end = table.times.last().copied().unwrap_or(0.0);
    let normal_start = fit_times
        .iter()
        .zip(fit_var)
        .find(|(_, &v)| v > params.normal_floor)
        .map(|(&t, _)| t);
    let normal_fit = match (normal_start, first_void_tau.or(boundary_tau)) {
        (Some(lo), Some(hi)) if lo < hi => fit_power_law(fit_times, fit_var, lo, hi).ok(),
        _ => None,
    };

    let (fractal_onset_tau, fractal_fit) = match (kind.is_fractal(), fractal_dimension) {
        (true, Some(df)) => {
            let after = first_void_tau.unwrap_or(0.0);
            let onset =
                detect_fractal_onset(&slope_curve, df, params.band, after, params.onset_run);
            let hi = farthest_tau.map_or(grid_end, |f| f.min(grid_end));
            let fit = onset
                .filter(|&lo| lo < hi)
                .and_then(|lo| fit_power_law(fit_times, fit_var, lo, hi).ok());
            (onset, fit)
        }
        _ => (None, None),
    };

    let saturation = detect_saturation_and_oscillation(
        &table.times,
        &table.variance,
        farthest_tau,
        &params.saturation,
    )?;

    let plateau_idx = detect_plateaus(&table.polya, params.plateau_delta, params.plateau_min_span)?;
    let polya_extra_growth = growth_after_first_plateau(&table.polya, &plateau_idx);
    let plateaus = plateau_idx
        .iter()
        .map(|p| (table.times[p.start], table.times[p.end]))
        .collect();

    Ok(RegimeReport {
        kind,
        generation: lattice.generation(),
        input_site: input,
        fractal_dimension,
        params: *params,
        first_void_tau,
        boundary_tau,
        fractal_onset_tau,
        farthest_tau,
        saturation_tau: saturation.saturation_tau,
        normal_fit,
        fractal_fit,
        plateaus,
        polya_extra_growth,
        oscillation_detected: saturation.oscillation,
        slope_curve,
        calibration: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorEvent {
    FirstVoid,
    Farthest,
}

impl std::str::FromStr for AnchorEvent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "first-void" => Ok(AnchorEvent::FirstVoid),
            "farthest" => Ok(AnchorEvent::Farthest),
            _ => Err(Error::Malformed(format!("unknown anchor event `{s}`"))),
        }
    }
}

/// Ties one detected event to a measured propagation length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub anchor_event: AnchorEvent,
    pub anchor_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedEvent {
    pub name: String,
    pub tau: f64,
    pub mm: f64,
}

/// Linear map from dimensionless time to propagation length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub anchor_event: AnchorEvent,
    pub anchor_mm: f64,
    pub anchor_tau: f64,
    /// Millimetres per unit τ.
    pub scale_mm_per_tau: f64,
    pub events: Vec<CalibratedEvent>,
}

impl Calibration {
    pub fn to_mm(&self, tau: f64) -> f64 {
        if tau == self.anchor_tau {
            self.anchor_mm
        } else {
            tau * self.scale_mm_per_tau
        }
    }

    pub fn to_tau(&self, mm: f64) -> f64 {
        mm / self.scale_mm_per_tau
    }

    pub fn event_mm(&self, name: &str) -> Option<f64> {
        self.events.iter().find(|e| e.name == name).map(|e| e.mm)
    }
}

/// Scales every event of `report` to millimetres using the anchor event.
pub fn calibrate_length(report: &RegimeReport, config: &CalibrationConfig) -> Result<Calibration> {
    if !(config.anchor_mm > 0.0 && config.anchor_mm.is_finite()) {
        return Err(Error::Domain(format!(
            "anchor length must be positive, got {}",
            config.anchor_mm
        )));
    }
    let anchor_tau = match config.anchor_event {
        AnchorEvent::FirstVoid => report.first_void_tau,
        AnchorEvent::Farthest => report.farthest_tau,
    }
    .filter(|&t| t > 0.0)
    .ok_or_else(|| {
        Error::NotFound(format!(
            "anchor event {:?} not detected at positive τ",
            config.anchor_event
        ))
    })?;
    let mut calibration = Calibration {
        anchor_event: config.anchor_event,
        anchor_mm: config.anchor_mm,
        anchor_tau,
        scale_mm_per_tau: config.anchor_mm / anchor_tau,
        events: Vec::new(),
    };
    calibration.events = report
        .events()
        .into_iter()
        .map(|(name, tau)| CalibratedEvent {
            name: name.to_string(),
            tau,
            mm: calibration.to_mm(tau),
        })
        .collect();
    Ok(calibration)
}

/// Millimetres per unit τ obtained by anchoring the gasket (g = 4, apex
/// input, ε = 0.02, 501-point grid on [0, 25]) farthest-site arrival at 9.275 mm.
pub const DEFAULT_MM_PER_TAU: f64 = 1.484;

/// Uniform propagation-length grid in millimetres, endpoints inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LengthGrid {
    pub start_mm: f64,
    pub stop_mm: f64,
    pub step_mm: f64,
}

impl LengthGrid {
    pub fn lengths(&self) -> Vec<f64> {
        let n = ((self.stop_mm - self.start_mm) / self.step_mm + 1e-9).floor() as usize + 1;
        (0..n)
            .map(|i| self.start_mm + i as f64 * self.step_mm)
            .collect()
    }

    /// Grid converted to dimensionless times at `mm_per_tau`.
    pub fn times(&self, mm_per_tau: f64) -> Vec<f64> {
        self.lengths().into_iter().map(|z| z / mm_per_tau).collect()
    }
}

/// Propagation lengths at which intensity patterns were recorded for each
/// lattice family: two uniform runs separated by one irregular step.
/// Regular lattices share the lengths of the fractal they are carved from.
pub fn measurement_lengths(kind: crate::lattice::LatticeKind) -> Option<Vec<f64>> {
    use crate::lattice::LatticeKind::*;
    let segments: [(f64, f64, f64); 2] = match kind {
        Sg | Triangle => [(0.275, 10.775, 0.3), (11.037, 21.537, 0.3)],
        Sc | Square => [(0.25, 8.35, 0.3), (8.475, 16.875, 0.3)],
        Dsc => [(0.3, 19.8, 0.5), (20.325, 38.825, 0.5)],
        Custom => return None,
    };
    Some(
        segments
            .iter()
            .flat_map(|&(start_mm, stop_mm, step_mm)| {
                LengthGrid {
                    start_mm,
                    stop_mm,
                    step_mm,
                }
                .lengths()
            })
            .collect(),
    )
}

/// [`measurement_lengths`] converted to dimensionless times.
pub fn measurement_times(kind: crate::lattice::LatticeKind, mm_per_tau: f64) -> Option<Vec<f64>> {
    measurement_lengths(kind).map(|z| z.into_iter().map(|z| z / mm_per_tau).collect())
}
