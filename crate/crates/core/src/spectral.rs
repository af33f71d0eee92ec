//! Position and momentum matrix elements over bound states, and the OTOC
//! C_n(t) = -<n|[r(t), p(0)]^2|n> evaluated as a spectral sum.

use faer::Mat;
use thiserror::Error;

use crate::dvr::BoundStateBasis;
use crate::potential::{PotentialError, PotentialModel};

/// Default half-width of the finite-difference stencil in [`momentum_direct`].
pub const DEFAULT_STENCIL_HALF_WIDTH: usize = 8;
/// Number of evenly spread probe times used by the truncation estimate, besides t = 0.
pub const TRUNCATION_PROBES: usize = 32;
/// The truncation estimate needs at least this many states.
pub const MIN_STATES_FOR_ESTIMATE: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("state index {n} out of range: {count} states available")]
    Index { n: usize, count: usize },
    #[error("truncation K = {k} cannot represent state {n}: need K >= n + 2 and K <= {count}")]
    Truncation { n: usize, k: usize, count: usize },
    #[error("truncation estimate needs at least {MIN_STATES_FOR_ESTIMATE} states, got {0}")]
    TooFewStates(usize),
    #[error("time grid needs at least 2 finite points")]
    TimeGrid,
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

pub type Result<T> = std::result::Result<T, SpectralError>;

/// r_nl = <n|r|l> over bound states, with the level energies and mass.
#[derive(Debug, Clone)]
pub struct MatrixElements {
    r: Mat<f64>,
    energies: Vec<f64>,
    mass: f64,
}

impl MatrixElements {
    /// Builds from explicit data; `r` is read from its upper triangle and mirrored.
    pub fn from_parts(r: &Mat<f64>, energies: Vec<f64>, mass: f64) -> Self {
        let k = energies.len();
        assert_eq!((r.nrows(), r.ncols()), (k, k), "matrix shape must match the level count");
        let r = Mat::from_fn(k, k, |i, j| if i <= j { r[(i, j)] } else { r[(j, i)] });
        Self { r, energies, mass }
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn r(&self) -> &Mat<f64> {
        &self.r
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// ⟨n|r|n⟩ for every level.
    pub fn expectation_values(&self) -> Vec<f64> {
        (0..self.len()).map(|n| self.r[(n, n)]).collect()
    }
}

pub fn position_matrix(basis: &BoundStateBasis) -> MatrixElements {
    let grid = basis.grid();
    let dx = grid.spacing();
    let psi = basis.wavefunctions();
    let points = grid.points();
    let weighted = Mat::from_fn(psi.nrows(), psi.ncols(), |i, j| psi[(i, j)] * points[i] * dx);
    let full = psi.transpose() * &weighted;
    MatrixElements::from_parts(&full, basis.energies().to_vec(), basis.mass())
}

/// Real matrix q with p_nl = i q_nl, from q_nl = μ (E_n − E_l) r_nl.
pub fn momentum_from_position(elements: &MatrixElements) -> Mat<f64> {
    let e = elements.energies();
    let mu = elements.mass();
    Mat::from_fn(
        elements.len(),
        elements.len(),
        |n, l| {
            if n == l {
                0.0
            } else {
                mu * (e[n] - e[l]) * elements.r[(n, l)]
            }
        },
    )
}

/// Weights w_1..w_m of the central first-derivative stencil
/// f' ≈ Σ_k w_k (f(x + kh) − f(x − kh)) / h.
pub fn central_difference_weights(half_width: usize) -> Vec<f64> {
    let m = half_width;
    (1..=m)
        .map(|k| {
            // (m!)² / ((m−k)! (m+k)!) as a running product
            let ratio: f64 = (1..=k).map(|j| (m + 1 - j) as f64 / (m + j) as f64).product();
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            sign * ratio / k as f64
        })
        .collect()
}

/// q_nl = −∫ ψ_n ψ_l' dr with ψ_l' from a central stencil (ψ = 0 beyond the box).
pub fn momentum_direct(basis: &BoundStateBasis, half_width: usize) -> Mat<f64> {
    let dx = basis.grid().spacing();
    let psi = basis.wavefunctions();
    let (rows, cols) = (psi.nrows(), psi.ncols());
    let w = central_difference_weights(half_width);
    let deriv = Mat::from_fn(rows, cols, |i, j| {
        let col = basis.wavefunction(j);
        let at = |idx: isize| if idx < 0 || idx >= rows as isize { 0.0 } else { col[idx as usize] };
        let s: f64 = w
            .iter()
            .enumerate()
            .map(|(k, wk)| {
                let k = (k + 1) as isize;
                wk * (at(i as isize + k) - at(i as isize - k))
            })
            .sum();
        s / dx
    });
    let q = psi.transpose() * &deriv;
    Mat::from_fn(cols, cols, |n, l| -q[(n, l)] * dx)
}

/// C_n(t) samples for one state.
#[derive(Debug, Clone, PartialEq)]
pub struct OtocSeries {
    pub n: usize,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Number of levels summed over; 0 when the series was read back from disk.
    pub truncation: usize,
    pub convergence_estimate: f64,
}

impl OtocSeries {
    /// A series read back from stored samples; truncation data are unknown.
    pub fn from_samples(n: usize, times: Vec<f64>, values: Vec<f64>) -> Self {
        assert_eq!(times.len(), values.len());
        Self { n, times, values, truncation: 0, convergence_estimate: f64::NAN }
    }
}

/// Sums C_n(t) over the lowest `k` levels, no estimate.
pub fn otoc_values(n: usize, times: &[f64], elements: &MatrixElements, k: usize) -> Result<Vec<f64>> {
    check_indices(n, k, elements.len())?;
    let e = &elements.energies()[..k];
    let eps: Vec<f64> = e.iter().map(|x| x - e[n]).collect();
    let r = elements.r().as_ref().submatrix(0, 0, k, k);
    let r_n: Vec<f64> = (0..k).map(|j| elements.r()[(n, j)]).collect();
    let mu = elements.mass();
    let t_len = times.len();

    // (sin, cos) of ε_j t_i, row-major in i.
    let trig: Vec<(f64, f64)> = times.iter().flat_map(|&t| eps.iter().map(move |&x| (x * t).sin_cos())).collect();
    // Column blocks [0, T): r_nk ε_k cos, [T, 2T): r_nk ε_k sin, [2T, 3T): r_nk cos, [3T, 4T): r_nk sin.
    let phases = Mat::from_fn(k, 4 * t_len, |j, col| {
        let (block, ti) = (col / t_len, col % t_len);
        let (s, c) = trig[ti * k + j];
        let weight = if block < 2 { r_n[j] * eps[j] } else { r_n[j] };
        weight * if block % 2 == 0 { c } else { s }
    });
    // r is symmetric, so column block·T + i holds Σ_k (phase)_k r_kl over l.
    let prod = r * &phases;

    let values = (0..t_len)
        .map(|ti| {
            let a_re = prod.col_as_slice(ti);
            let a_im = prod.col_as_slice(t_len + ti);
            let b_re = prod.col_as_slice(2 * t_len + ti);
            let b_im = prod.col_as_slice(3 * t_len + ti);
            let row = &trig[ti * k..(ti + 1) * k];
            (0..k)
                .map(|l| {
                    // A = Σ r_nk ε_k e^{−iε_k t} r_kl, B = Σ r_nk e^{−iε_k t} r_kl
                    let (ar, ai) = (a_re[l], -a_im[l]);
                    let (br, bi) = (b_re[l], -b_im[l]);
                    let (s, c) = row[l];
                    // b = A − ε_l B + e^{−iε_l t} conj(A)
                    let re = ar - eps[l] * br + c * ar - s * ai;
                    let im = ai - eps[l] * bi - s * ar - c * ai;
                    re * re + im * im
                })
                .sum::<f64>()
                * mu
                * mu
        })
        .collect();
    Ok(values)
}

fn check_indices(n: usize, k: usize, count: usize) -> Result<()> {
    if n >= count {
        return Err(SpectralError::Index { n, count });
    }
    if k < n + 2 || k > count {
        return Err(SpectralError::Truncation { n, k, count });
    }
    Ok(())
}

/// Reduced truncation used as the comparison reference for `k` levels.
pub fn reference_truncation(k: usize) -> usize {
    k - (k / 10).max(2)
}

/// Probe times for the truncation estimate: t = 0 plus an even stride of `times`.
pub fn probe_times(times: &[f64]) -> Vec<f64> {
    let mut probes = vec![0.0];
    if !times.is_empty() {
        let stride = (times.len() / TRUNCATION_PROBES).max(1);
        probes.extend(times.iter().step_by(stride).copied().filter(|&t| t != 0.0));
    }
    probes
}

/// Largest relative change of C_n at the probe times when the sum is cut from
/// `k` to [`reference_truncation`]`(k)` levels, together with |C_n(0) − 1|
/// if t = 0 is probed. Infinite when the reference cannot represent state n.
pub fn otoc_truncation_error(n: usize, elements: &MatrixElements, k: usize, probes: &[f64]) -> Result<f64> {
    if elements.len() < MIN_STATES_FOR_ESTIMATE || k < MIN_STATES_FOR_ESTIMATE {
        return Err(SpectralError::TooFewStates(k.min(elements.len())));
    }
    check_indices(n, k, elements.len())?;
    let k_ref = reference_truncation(k);
    if k_ref < n + 2 {
        return Ok(f64::INFINITY);
    }
    let full = otoc_values(n, probes, elements, k)?;
    let reduced = otoc_values(n, probes, elements, k_ref)?;
    let mut worst = 0.0f64;
    for ((&t, &a), &b) in probes.iter().zip(&full).zip(&reduced) {
        let diff = (a - b).abs();
        if diff > 0.0 {
            worst = worst.max(diff / a.abs());
        }
        if t == 0.0 {
            worst = worst.max((a - 1.0).abs());
        }
    }
    Ok(worst)
}

/// C_n(t) over the lowest `k` levels, with its truncation estimate.
pub fn otoc_series(n: usize, times: &[f64], elements: &MatrixElements, k: usize) -> Result<OtocSeries> {
    if times.iter().any(|t| !t.is_finite()) {
        return Err(SpectralError::TimeGrid);
    }
    let values = otoc_values(n, times, elements, k)?;
    let convergence_estimate = otoc_truncation_error(n, elements, k, &probe_times(times))?;
    Ok(OtocSeries { n, times: times.to_vec(), values, truncation: k, convergence_estimate })
}

/// Harmonic angular frequency √(V''(r_min)/μ) at the well bottom.
pub fn harmonic_frequency(model: &PotentialModel, mass: f64) -> Result<f64> {
    let (r_min, _) = model.minimum()?;
    let curvature = model.evaluate(r_min)?.curvature;
    Ok((curvature / mass).sqrt())
}

/// Uniform grid on [0, t_max], `points` samples including both ends.
pub fn time_grid(t_max: f64, points: usize) -> Result<Vec<f64>> {
    if points < 2 || !(t_max > 0.0 && t_max.is_finite()) {
        return Err(SpectralError::TimeGrid);
    }
    let last = (points - 1) as f64;
    Ok((0..points).map(|j| t_max * j as f64 / last).collect())
}

pub const DEFAULT_PERIODS: f64 = 50.0;
pub const DEFAULT_TIME_POINTS: usize = 4000;

/// Default span: 50 harmonic periods 2π/ω at the well bottom.
pub fn default_t_max(model: &PotentialModel, mass: f64) -> Result<f64> {
    let omega = harmonic_frequency(model, mass)?;
    Ok(DEFAULT_PERIODS * std::f64::consts::TAU / omega)
}
