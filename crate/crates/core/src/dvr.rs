//! Sine-basis discrete variable representation of the radial Hamiltonian.

use std::f64::consts::PI;

use faer::Mat;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eigen::{symmetric_eigen, EigenError, Selection};
use crate::potential::{PotentialError, PotentialModel};

/// Levels closer than this to the dissociation limit are discarded [hartree].
pub const THRESHOLD_MARGIN: f64 = 1e-10;
pub const MIN_POINTS: usize = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DvrError {
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    Eigen(#[from] EigenError),
    #[error("grid domain error: {0}")]
    Domain(String),
    #[error("grid needs at least {MIN_POINTS} interior points, got {0}")]
    TooFewPoints(usize),
    #[error("reduced mass must be positive and finite, got {0}")]
    Mass(f64),
    #[error("potential has no finite dissociation limit; set a state cap (max_states)")]
    Unbounded,
    #[error("no bound states below the dissociation limit {0} hartree")]
    NoBoundStates(f64),
}

pub type Result<T> = std::result::Result<T, DvrError>;

/// Uniform grid r_i = a + iΔ, i = 1..n, with Δ = (b - a)/(n + 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    pub a: f64,
    pub b: f64,
    pub n: usize,
}

impl RadialGrid {
    pub fn new(a: f64, b: f64, n: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || a >= b {
            return Err(DvrError::Domain(format!("need a < b, got a = {a}, b = {b}")));
        }
        if n < MIN_POINTS {
            return Err(DvrError::TooFewPoints(n));
        }
        Ok(Self { a, b, n })
    }

    pub fn spacing(&self) -> f64 {
        (self.b - self.a) / (self.n + 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        self.a + (i + 1) as f64 * self.spacing()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.point(i)).collect()
    }
}

/// How the grid end points are chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridPolicy {
    /// Inner edge where V = V_∞ + depth; outer edge at twice the outer turning
    /// point of the level bound by `target_binding`·depth.
    Auto {
        target_binding: f64,
    },
    Explicit {
        a: f64,
        b: f64,
    },
}

pub const DEFAULT_TARGET_BINDING: f64 = 1e-6;

impl Default for GridPolicy {
    fn default() -> Self {
        GridPolicy::Auto { target_binding: DEFAULT_TARGET_BINDING }
    }
}

pub fn build_grid(model: &PotentialModel, n: usize, policy: GridPolicy) -> Result<RadialGrid> {
    let (lo, hi) = model.domain();
    let (a, b) = match policy {
        GridPolicy::Explicit { a, b } => {
            if !(a < b) {
                return Err(DvrError::Domain(format!("need a < b, got a = {a}, b = {b}")));
            }
            if !model.contains(a) || !model.contains(b) {
                return Err(DvrError::Domain(format!("[{a}, {b}] is not inside the potential domain [{lo}, {hi}]")));
            }
            match model.minimum() {
                Ok((r_min, _)) if !(a < r_min && r_min < b) => {
                    return Err(DvrError::Domain(format!(
                        "[{a}, {b}] does not contain the potential minimum at r = {r_min}"
                    )));
                }
                _ => {}
            }
            (a, b)
        }
        GridPolicy::Auto { target_binding } => {
            if !(target_binding > 0.0 && target_binding < 1.0) {
                return Err(DvrError::Domain(format!("target_binding must lie in (0, 1), got {target_binding}")));
            }
            let limit = model.dissociation_limit();
            if !limit.is_finite() {
                return Err(DvrError::Domain(
                    "automatic grid needs a finite dissociation limit; give explicit bounds".into(),
                ));
            }
            let (_, v_min) = model.minimum()?;
            let depth = limit - v_min;
            let a = model.inner_wall(limit + depth)?;
            let r_c = model.outer_turning_point(limit - target_binding * depth)?.r_c;
            let b = 2.0 * r_c;
            if !model.contains(b) {
                return Err(DvrError::Domain(format!(
                    "automatic outer edge {b} exceeds the potential domain [{lo}, {hi}]"
                )));
            }
            (a, b)
        }
    };
    RadialGrid::new(a, b, n)
}

/// Sine-DVR kinetic energy matrix (ħ = 1).
pub fn kinetic_matrix(grid: &RadialGrid, mass: f64) -> Result<Mat<f64>> {
    check_mass(mass)?;
    let n = grid.n;
    let np1 = (n + 1) as f64;
    let length = grid.b - grid.a;
    let pref = PI * PI / (4.0 * mass * length * length);
    // csc²(πm / (2(n+1))) for m = 0..=2n
    let csc2: Vec<f64> = (0..=2 * n)
        .map(|m| {
            let s = (PI * m as f64 / (2.0 * np1)).sin();
            1.0 / (s * s)
        })
        .collect();
    let diag_const = (2.0 * np1 * np1 + 1.0) / 3.0;
    let mut t = Mat::zeros(n, n);
    for i in 1..=n {
        t[(i - 1, i - 1)] = pref * (diag_const - csc2[2 * i]);
        for j in i + 1..=n {
            let sign = if (j - i) % 2 == 0 { 1.0 } else { -1.0 };
            let v = pref * sign * (csc2[j - i] - csc2[i + j]);
            t[(i - 1, j - 1)] = v;
            t[(j - 1, i - 1)] = v;
        }
    }
    Ok(t)
}

fn check_mass(mass: f64) -> Result<()> {
    if mass > 0.0 && mass.is_finite() {
        Ok(())
    } else {
        Err(DvrError::Mass(mass))
    }
}

/// Kinetic matrix plus the potential on the diagonal.
pub fn hamiltonian(model: &PotentialModel, grid: &RadialGrid, mass: f64) -> Result<Mat<f64>> {
    let mut h = kinetic_matrix(grid, mass)?;
    for (i, r) in grid.points().into_iter().enumerate() {
        h[(i, i)] += model.value(r)?;
    }
    Ok(h)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolveOptions {
    /// Keep at most this many of the lowest levels. Required when the
    /// potential never dissociates.
    pub max_states: Option<usize>,
}

/// Bound levels and grid wavefunctions normalised to Σψ²Δ = 1.
#[derive(Debug, Clone)]
pub struct BoundStateBasis {
    grid: RadialGrid,
    mass: f64,
    threshold: f64,
    energies: Vec<f64>,
    /// Column n holds ψ_n on the grid points.
    wavefunctions: Mat<f64>,
}

impl BoundStateBasis {
    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn wavefunctions(&self) -> &Mat<f64> {
        &self.wavefunctions
    }

    pub fn wavefunction(&self, n: usize) -> &[f64] {
        self.wavefunctions.col_as_slice(n)
    }
}

pub fn solve_bound_states(
    model: &PotentialModel,
    grid: &RadialGrid,
    mass: f64,
    options: SolveOptions,
) -> Result<BoundStateBasis> {
    check_mass(mass)?;
    let threshold = model.dissociation_limit();
    let cutoff = threshold - THRESHOLD_MARGIN;
    let selection = match (options.max_states, threshold.is_finite()) {
        (Some(k), _) => Selection::Lowest(k),
        (None, true) => Selection::Below(cutoff),
        (None, false) if threshold > 0.0 => return Err(DvrError::Unbounded),
        (None, false) => return Err(DvrError::NoBoundStates(threshold)),
    };
    let h = hamiltonian(model, grid, mass)?;
    let eig = symmetric_eigen(&h, selection)?;
    let keep = eig.values.iter().take_while(|&&e| e < cutoff).count();
    if keep == 0 {
        return Err(DvrError::NoBoundStates(threshold));
    }
    let scale = 1.0 / grid.spacing().sqrt();
    let mut wavefunctions = Mat::from_fn(grid.n, keep, |i, j| eig.vectors[(i, j)]);
    for j in 0..keep {
        let col = wavefunctions.col_as_slice_mut(j);
        let factor = antinode_sign(col) * scale;
        col.iter_mut().for_each(|x| *x *= factor);
    }
    let mut energies = eig.values;
    energies.truncate(keep);
    Ok(BoundStateBasis { grid: *grid, mass, threshold, energies, wavefunctions })
}

/// Sign of ψ at its innermost antinode, ignoring the decaying inner tail.
fn antinode_sign(psi: &[f64]) -> f64 {
    let peak = psi.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let floor = 1e-3 * peak;
    let n = psi.len();
    for i in 0..n {
        let here = psi[i].abs();
        if here >= floor && (i + 1 == n || here >= psi[i + 1].abs()) {
            return if psi[i] < 0.0 { -1.0 } else { 1.0 };
        }
    }
    1.0
}

/// Sign changes of ψ among samples above `rel_floor`·max|ψ|.
pub fn count_nodes(psi: &[f64], rel_floor: f64) -> usize {
    let peak = psi.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let floor = rel_floor * peak;
    let mut last = 0.0f64;
    let mut nodes = 0;
    for &x in psi.iter().filter(|x| x.abs() > floor) {
        if last != 0.0 && x.signum() != last.signum() {
            nodes += 1;
        }
        last = x;
    }
    nodes
}

/// The grid a convergence check re-solves on: 2N+1 points over a doubled box
/// for automatic grids (same spacing, more room), 2N+1 points over the same
/// box for explicit grids (half spacing).
pub fn refined_grid(grid: &RadialGrid, policy: GridPolicy) -> Result<RadialGrid> {
    let b = match policy {
        GridPolicy::Auto { .. } => grid.a + 2.0 * (grid.b - grid.a),
        GridPolicy::Explicit { .. } => grid.b,
    };
    RadialGrid::new(grid.a, b, 2 * grid.n + 1)
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub refined_grid: RadialGrid,
    /// |ΔE_n| for each level present in both solves [hartree].
    pub shifts: Vec<f64>,
}

impl ConvergenceReport {
    /// Largest shift over the first `count` levels.
    pub fn max_shift(&self, count: usize) -> f64 {
        self.shifts.iter().take(count).fold(0.0, |m, &x| m.max(x))
    }
}

pub fn convergence_report(
    model: &PotentialModel,
    basis: &BoundStateBasis,
    policy: GridPolicy,
    options: SolveOptions,
) -> Result<ConvergenceReport> {
    let refined = refined_grid(basis.grid(), policy)?;
    let other = solve_bound_states(model, &refined, basis.mass(), options)?;
    let shifts = basis.energies().iter().zip(other.energies()).map(|(a, b)| (a - b).abs()).collect();
    Ok(ConvergenceReport { refined_grid: refined, shifts })
}
