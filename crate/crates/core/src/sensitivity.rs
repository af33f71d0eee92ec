//! Growth-rate estimates: turning-point predictions and exponential fits of
//! OTOC series.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::potential::{PotentialError, PotentialModel};
use crate::spectral::OtocSeries;

/// Below this |V''| the quadratic expansion is treated as degenerate.
pub const CURVATURE_FLOOR: f64 = 1e-14;
/// Below this |V'| the turning point sits at the well bottom.
pub const SLOPE_FLOOR: f64 = 1e-14;
/// Allowed |r0 − r_c| / r_c for the local trajectory.
pub const TRAJECTORY_REACH: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SensitivityError {
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("curvature at the turning point is zero; the quadratic expansion is degenerate")]
    CurvatureZero,
    #[error("potential slope at the turning point is zero (energy at the well bottom)")]
    DerivativeZero,
    #[error("series has {found} samples, window detection needs at least {needed}")]
    TooFewSamples { found: usize, needed: usize },
    #[error("no exponential growth window found")]
    NoWindow,
    #[error("fit window has {0} usable points, at least 3 are required")]
    DegenerateFit(usize),
}

pub type Result<T> = std::result::Result<T, SensitivityError>;

/// Sign class of V'' at the turning point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurvatureSign {
    /// V'' > 0: locally oscillatory.
    Positive,
    /// V'' < 0: locally unstable, cosh growth.
    Negative,
    Zero,
}

impl CurvatureSign {
    fn of(x: f64) -> Self {
        if x > 0.0 {
            CurvatureSign::Positive
        } else if x < 0.0 {
            CurvatureSign::Negative
        } else {
            CurvatureSign::Zero
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalSensitivity {
    /// √(|V''(r_c)|/μ)
    pub lambda: f64,
    pub r_c: f64,
    pub curvature_sign: CurvatureSign,
}

fn check_mass(mass: f64) -> Result<()> {
    if mass > 0.0 && mass.is_finite() {
        Ok(())
    } else {
        Err(SensitivityError::Argument(format!("mass must be positive, got {mass}")))
    }
}

pub fn classical_sensitivity(model: &PotentialModel, energy: f64, mass: f64) -> Result<ClassicalSensitivity> {
    check_mass(mass)?;
    let r_c = model.outer_turning_point(energy)?.r_c;
    let v2 = model.evaluate(r_c)?.curvature;
    Ok(ClassicalSensitivity { lambda: (v2.abs() / mass).sqrt(), r_c, curvature_sign: CurvatureSign::of(v2) })
}

/// r(t) for motion in the quadratic expansion of V about the outer turning
/// point, started at (r0, p0).
pub fn classical_quadratic_trajectory(
    model: &PotentialModel,
    energy: f64,
    mass: f64,
    r0: f64,
    p0: f64,
    times: &[f64],
) -> Result<Vec<f64>> {
    check_mass(mass)?;
    let r_c = model.outer_turning_point(energy)?.r_c;
    if (r0 - r_c).abs() > TRAJECTORY_REACH * r_c.abs() {
        return Err(SensitivityError::Argument(format!(
            "r0 = {r0} is further than {TRAJECTORY_REACH}·r_c from the turning point r_c = {r_c}"
        )));
    }
    let d = model.evaluate(r_c)?;
    if d.curvature.abs() < CURVATURE_FLOOR {
        return Err(SensitivityError::CurvatureZero);
    }
    let r_d = r_c - d.slope / d.curvature;
    let omega = (d.curvature.abs() / mass).sqrt();
    let velocity_scale = p0 / (mass * omega);
    let oscillatory = d.curvature > 0.0;
    Ok(times
        .iter()
        .map(|&t| {
            let half = 0.5 * omega * t;
            // cos − 1 = −2 sin²(x/2), cosh − 1 = 2 sinh²(x/2): exact r0 at t = 0
            let (even, odd) = if oscillatory {
                (-2.0 * half.sin().powi(2), (omega * t).sin())
            } else {
                (2.0 * half.sinh().powi(2), (omega * t).sinh())
            };
            r0 + (r0 - r_d) * even + velocity_scale * odd
        })
        .collect())
}

/// Position of the first maximum of Ai(z), z < 0, used to place the peak of
/// the outermost lobe of the wavefunction.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AiryMaximum {
    /// z = −1
    #[default]
    Approximate,
    /// z = −1.018792971647471
    Exact,
}

impl AiryMaximum {
    pub fn z(self) -> f64 {
        match self {
            AiryMaximum::Approximate => -1.0,
            AiryMaximum::Exact => -1.018_792_971_647_471,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemiclassicalSensitivity {
    /// √(|V''(r_m)|/μ)
    pub lambda: f64,
    pub r_m: f64,
    pub r_c: f64,
    /// Airy length (1/(2μ|V'(r_c)|))^{1/3}
    pub r_bar: f64,
}

pub fn semiclassical_sensitivity(
    model: &PotentialModel,
    energy: f64,
    mass: f64,
    airy: AiryMaximum,
) -> Result<SemiclassicalSensitivity> {
    check_mass(mass)?;
    let r_c = model.outer_turning_point(energy)?.r_c;
    let slope = model.evaluate(r_c)?.slope;
    if slope.abs() < SLOPE_FLOOR {
        return Err(SensitivityError::DerivativeZero);
    }
    let r_bar = (1.0 / (2.0 * mass * slope.abs())).cbrt();
    let r_m = r_c + airy.z() * r_bar;
    let v2 = model.evaluate(r_m)?.curvature;
    Ok(SemiclassicalSensitivity { lambda: (v2.abs() / mass).sqrt(), r_m, r_c, r_bar })
}

/// Knobs of [`detect_growth_window`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowOptions {
    pub r2_min: f64,
    pub min_points: usize,
    /// Largest allowed |s₂ − s₁| / s between the log-slopes of the two window halves.
    pub max_slope_drift: f64,
}

impl Default for WindowOptions {
    fn default() -> Self {
        Self { r2_min: 0.98, min_points: 20, max_slope_drift: 0.005 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthWindow {
    /// First and last sample index, inclusive.
    pub start: usize,
    pub end: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub points: usize,
    pub r_squared: f64,
}

impl GrowthWindow {
    pub fn delta_t(&self) -> f64 {
        self.t_end - self.t_start
    }
}

/// Running sums of centred (t, y) for O(1) least squares on any index range.
struct PrefixSums {
    t: Vec<f64>,
    y: Vec<f64>,
    tt: Vec<f64>,
    ty: Vec<f64>,
    yy: Vec<f64>,
    masked: Vec<usize>,
}

#[derive(Debug, Clone, Copy)]
struct LineFit {
    slope: f64,
    r_squared: f64,
}

impl PrefixSums {
    fn new(times: &[f64], y: &[Option<f64>]) -> Self {
        let valid: Vec<(f64, f64)> = times.iter().zip(y).filter_map(|(&t, v)| v.map(|v| (t, v))).collect();
        let count = valid.len().max(1) as f64;
        let t0 = valid.iter().map(|p| p.0).sum::<f64>() / count;
        let y0 = valid.iter().map(|p| p.1).sum::<f64>() / count;
        let len = times.len() + 1;
        let mut s = Self {
            t: vec![0.0; len],
            y: vec![0.0; len],
            tt: vec![0.0; len],
            ty: vec![0.0; len],
            yy: vec![0.0; len],
            masked: vec![0; len],
        };
        for (i, (&t, v)) in times.iter().zip(y).enumerate() {
            let (dt, dy, m) = match v {
                Some(v) => (t - t0, v - y0, 0),
                None => (0.0, 0.0, 1),
            };
            s.t[i + 1] = s.t[i] + dt;
            s.y[i + 1] = s.y[i] + dy;
            s.tt[i + 1] = s.tt[i] + dt * dt;
            s.ty[i + 1] = s.ty[i] + dt * dy;
            s.yy[i + 1] = s.yy[i] + dy * dy;
            s.masked[i + 1] = s.masked[i] + m;
        }
        s
    }

    fn has_gap(&self, lo: usize, hi: usize) -> bool {
        self.masked[hi + 1] != self.masked[lo]
    }

    /// OLS of y on t over samples lo..=hi (no masked samples inside).
    fn fit(&self, lo: usize, hi: usize) -> LineFit {
        let n = (hi - lo + 1) as f64;
        let d = |v: &[f64]| v[hi + 1] - v[lo];
        let (st, sy) = (d(&self.t), d(&self.y));
        let sxx = d(&self.tt) - st * st / n;
        let sxy = d(&self.ty) - st * sy / n;
        let syy = d(&self.yy) - sy * sy / n;
        let slope = sxy / sxx;
        let r_squared = if syy > 0.0 { (sxy * sxy / (sxx * syy)).min(1.0) } else { 0.0 };
        LineFit { slope, r_squared }
    }
}

/// Index of the first sample that is a local maximum of `y` (one-sided at the
/// ends) and lies in the upper half of the range of `y`.
fn growth_end(y: &[Option<f64>]) -> Option<usize> {
    let vals: Vec<f64> = y.iter().flatten().copied().collect();
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let level = lo + 0.5 * (hi - lo);
    let at = |i: usize| y.get(i).copied().flatten().unwrap_or(f64::NEG_INFINITY);
    (0..y.len()).find(|&i| match y[i] {
        Some(v) => v >= level && (i == 0 || v >= at(i - 1)) && (i + 1 == y.len() || v >= at(i + 1)),
        None => false,
    })
}

/// Longest sub-interval of the initial rise of ln C that is well described by
/// a straight line with positive slope.
pub fn detect_growth_window(series: &OtocSeries, options: &WindowOptions) -> Result<GrowthWindow> {
    let min_points = options.min_points.max(3);
    let needed = 4 * min_points;
    if series.values.len() < needed {
        return Err(SensitivityError::TooFewSamples { found: series.values.len(), needed });
    }
    let y: Vec<Option<f64>> =
        series.values.iter().map(|&c| if c > 0.0 && c.is_finite() { Some(c.ln()) } else { None }).collect();
    let end = growth_end(&y).ok_or(SensitivityError::NoWindow)?;
    let times = &series.times[..=end];
    let y = &y[..=end];
    let sums = PrefixSums::new(times, y);

    let qualifies = |lo: usize, hi: usize| -> Option<f64> {
        if sums.has_gap(lo, hi) || y[hi]? <= y[lo]? {
            return None;
        }
        let fit = sums.fit(lo, hi);
        if !(fit.slope > 0.0) || !(fit.r_squared >= options.r2_min) {
            return None;
        }
        let mid = lo + (hi - lo).div_ceil(2);
        let (s1, s2) = (sums.fit(lo, mid - 1).slope, sums.fit(mid, hi).slope);
        if (s2 - s1).abs() > options.max_slope_drift * fit.slope {
            return None;
        }
        Some(fit.r_squared)
    };

    let total = end + 1;
    for len in (min_points..=total).rev() {
        let mut best: Option<(usize, f64)> = None;
        for lo in 0..=total - len {
            if let Some(r2) = qualifies(lo, lo + len - 1) {
                if best.is_none_or(|(_, b)| r2 > b) {
                    best = Some((lo, r2));
                }
            }
        }
        if let Some((lo, r_squared)) = best {
            let hi = lo + len - 1;
            return Ok(GrowthWindow {
                start: lo,
                end: hi,
                t_start: series.times[lo],
                t_end: series.times[hi],
                points: len,
                r_squared,
            });
        }
    }
    Err(SensitivityError::NoWindow)
}

/// α e^{λt} fitted by least squares on ln C.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentialFit {
    pub alpha: f64,
    pub lambda_otoc: f64,
    /// Half-width of the 95% confidence interval on `lambda_otoc`.
    pub ci95: f64,
    pub delta_t: f64,
    pub lambda_dt_product: f64,
    pub points: usize,
    pub r_squared: f64,
}

pub fn fit_exponential(series: &OtocSeries, window: &GrowthWindow) -> Result<ExponentialFit> {
    let hi = window.end.min(series.values.len().saturating_sub(1));
    let pts: Vec<(f64, f64)> = (window.start..=hi)
        .filter_map(|i| {
            let c = series.values[i];
            (c > 0.0 && c.is_finite()).then(|| (series.times[i], c.ln()))
        })
        .collect();
    let n = pts.len();
    if n < 3 {
        return Err(SensitivityError::DegenerateFit(n));
    }
    let nf = n as f64;
    let t_mean = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let y_mean = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - t_mean).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - t_mean) * (p.1 - y_mean)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - y_mean).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(SensitivityError::DegenerateFit(n));
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * t_mean;
    let ssr: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let dof = nf - 2.0;
    let se = (ssr / dof / sxx).sqrt();
    let quantile = StudentsT::new(0.0, 1.0, dof).expect("dof >= 1").inverse_cdf(0.975);
    let delta_t = window.t_end - window.t_start;
    Ok(ExponentialFit {
        alpha: intercept.exp(),
        lambda_otoc: slope,
        ci95: quantile * se,
        delta_t,
        lambda_dt_product: slope * delta_t,
        points: n,
        r_squared: if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 },
    })
}

/// Whether a state showed exponential growth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Exponential,
    Regular,
    Error,
}

/// One state's fitted and predicted growth rates. Fields that could not be
/// computed are `None` (serialised as null) and `error` says why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub n: usize,
    pub energy: f64,
    pub regime: Regime,
    pub lambda_otoc: Option<f64>,
    pub alpha: Option<f64>,
    pub ci95: Option<f64>,
    pub delta_t: Option<f64>,
    pub lambda_dt_product: Option<f64>,
    pub window: Option<GrowthWindow>,
    pub lambda_c: Option<f64>,
    pub lambda_sc: Option<f64>,
    /// OTOC rate predictions 2λ_c and 2λ_sc.
    pub predicted_rate_classical: Option<f64>,
    pub predicted_rate_semiclassical: Option<f64>,
    pub curvature_sign: Option<CurvatureSign>,
    pub r_c: Option<f64>,
    pub r_m: Option<f64>,
    pub convergence_estimate: Option<f64>,
    pub error: Option<String>,
}

impl SensitivityReport {
    /// A `regular` report carrying only the predictions.
    pub fn unfitted(n: usize, energy: f64, predictions: &Predictions) -> Self {
        Self {
            n,
            energy,
            regime: Regime::Regular,
            lambda_otoc: None,
            alpha: None,
            ci95: None,
            delta_t: None,
            lambda_dt_product: None,
            window: None,
            lambda_c: predictions.classical.map(|c| c.lambda),
            lambda_sc: predictions.semiclassical.map(|s| s.lambda),
            predicted_rate_classical: predictions.classical.map(|c| 2.0 * c.lambda),
            predicted_rate_semiclassical: predictions.semiclassical.map(|s| 2.0 * s.lambda),
            curvature_sign: predictions.classical.map(|c| c.curvature_sign),
            r_c: predictions.classical.map(|c| c.r_c),
            r_m: predictions.semiclassical.map(|s| s.r_m),
            convergence_estimate: None,
            error: None,
        }
    }
}

/// Turning-point predictions for one level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Predictions {
    pub classical: Option<ClassicalSensitivity>,
    pub semiclassical: Option<SemiclassicalSensitivity>,
}

pub fn predictions(model: &PotentialModel, energy: f64, mass: f64, airy: AiryMaximum) -> Predictions {
    Predictions {
        classical: classical_sensitivity(model, energy, mass).ok(),
        semiclassical: semiclassical_sensitivity(model, energy, mass, airy).ok(),
    }
}

/// Window detection + fit for one series, merged with the predictions.
pub fn analyse_series(
    series: &OtocSeries,
    energy: f64,
    predictions: &Predictions,
    options: &WindowOptions,
) -> SensitivityReport {
    let mut report = SensitivityReport::unfitted(series.n, energy, predictions);
    report.convergence_estimate = series.convergence_estimate.is_finite().then_some(series.convergence_estimate);
    let fitted = detect_growth_window(series, options).and_then(|w| fit_exponential(series, &w).map(|f| (w, f)));
    match fitted {
        Ok((window, fit)) => {
            report.regime = Regime::Exponential;
            report.lambda_otoc = Some(fit.lambda_otoc);
            report.alpha = Some(fit.alpha);
            report.ci95 = Some(fit.ci95);
            report.delta_t = Some(fit.delta_t);
            report.lambda_dt_product = Some(fit.lambda_dt_product);
            report.window = Some(window);
        }
        Err(SensitivityError::NoWindow) => {}
        Err(e) => {
            report.regime = Regime::Error;
            report.error = Some(e.to_string());
        }
    }
    report
}
