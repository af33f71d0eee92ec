//! One-dimensional interatomic potentials in atomic units.
//!
//! Supported shapes: harmonic and inverted-harmonic wells (analytic test
//! cases), the 12-6 Lennard-Jones potential, and tabulated curves read from
//! text files and interpolated with a natural cubic spline.

use std::io::BufRead;

use thiserror::Error;

use crate::roots::{bisect_secant, BRACKET_WIDTH};
use crate::spline::NaturalSpline;

/// |V(r_c) - E| bound for refined turning points [hartree].
pub const TURNING_POINT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PotentialError {
    #[error("r = {r} bohr lies outside the potential domain [{lo}, {hi}]")]
    Domain { r: f64, lo: f64, hi: f64 },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("potential has no interior minimum")]
    NoMinimum,
    #[error("no turning point at E = {energy} hartree (allowed: {lower} <= E < {upper})")]
    NoRoot { energy: f64, lower: f64, upper: f64 },
    #[error("cannot bracket the turning point at E = {energy} hartree: V({edge}) at the domain edge is below E")]
    Bracket { energy: f64, edge: f64 },
    #[error("second derivative does not change sign from positive to negative inside the domain")]
    NoInflection,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: radius {r} is not strictly increasing")]
    Order { line: usize, r: f64 },
    #[error("table has {count} data rows, at least 4 are required")]
    TooFewPoints { count: usize },
    #[error("reading potential table: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, PotentialError>;

/// Which family a [`PotentialModel`] belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialKind {
    Harmonic,
    InvertedHarmonic,
    LennardJones,
    Tabulated,
}

impl PotentialKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PotentialKind::Harmonic => "harmonic",
            PotentialKind::InvertedHarmonic => "inverted_harmonic",
            PotentialKind::LennardJones => "lennard_jones",
            PotentialKind::Tabulated => "tabulated",
        }
    }
}

/// V, dV/dr and d²V/dr² at one radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivatives {
    pub value: f64,
    pub slope: f64,
    pub curvature: f64,
}

/// Outer classical turning point at a given energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurningPoint {
    pub r_c: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    /// V = k/2 (r - r0)^2
    Harmonic {
        center: f64,
        curvature: f64,
    },
    /// V = -k/2 (r - r0)^2, k > 0
    InvertedHarmonic {
        center: f64,
        curvature: f64,
    },
    /// V = C12/r^12 - C6/r^6
    LennardJones {
        c6: f64,
        c12: f64,
    },
    Tabulated {
        spline: NaturalSpline,
        asymptote: f64,
    },
}

/// An immutable, evaluable 1D potential.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialModel {
    shape: Shape,
}

/// C12 that gives a Lennard-Jones well of the requested depth for a given C6.
pub fn lj_c12_for_depth(c6: f64, depth: f64) -> Result<f64> {
    if !(c6 > 0.0 && c6.is_finite()) {
        return Err(PotentialError::Argument(format!("C6 must be positive, got {c6}")));
    }
    if !(depth > 0.0 && depth.is_finite()) {
        return Err(PotentialError::Argument(format!("depth must be positive, got {depth}")));
    }
    Ok(c6 * c6 / (4.0 * depth))
}

fn check_finite(name: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(PotentialError::Argument(format!("{name} must be finite, got {x}")))
    }
}

impl PotentialModel {
    /// Harmonic well with non-negative curvature; zero curvature gives a flat box floor.
    pub fn harmonic(center: f64, curvature: f64) -> Result<Self> {
        check_finite("center", center)?;
        check_finite("curvature", curvature)?;
        if curvature < 0.0 {
            return Err(PotentialError::Argument(format!("harmonic curvature must be >= 0, got {curvature}")));
        }
        Ok(Self { shape: Shape::Harmonic { center, curvature } })
    }

    /// Inverted well `-k/2 (r - center)^2`; `curvature` is the magnitude k > 0.
    pub fn inverted_harmonic(center: f64, curvature: f64) -> Result<Self> {
        check_finite("center", center)?;
        if !(curvature > 0.0 && curvature.is_finite()) {
            return Err(PotentialError::Argument(format!(
                "inverted-harmonic curvature magnitude must be positive, got {curvature}"
            )));
        }
        Ok(Self { shape: Shape::InvertedHarmonic { center, curvature } })
    }

    pub fn lennard_jones(c6: f64, c12: f64) -> Result<Self> {
        if !(c6 > 0.0 && c6.is_finite()) || !(c12 > 0.0 && c12.is_finite()) {
            return Err(PotentialError::Argument(format!(
                "Lennard-Jones coefficients must be positive, got C6 = {c6}, C12 = {c12}"
            )));
        }
        Ok(Self { shape: Shape::LennardJones { c6, c12 } })
    }

    /// Lennard-Jones well with the given C6 and well depth.
    pub fn lennard_jones_with_depth(c6: f64, depth: f64) -> Result<Self> {
        Self::lennard_jones(c6, lj_c12_for_depth(c6, depth)?)
    }

    /// Spline through `(radii, values)`. The asymptote defaults to the last value.
    pub fn tabulated(radii: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if radii.len() != values.len() {
            return Err(PotentialError::Argument(format!("{} radii but {} values", radii.len(), values.len())));
        }
        if radii.len() < 4 {
            return Err(PotentialError::TooFewPoints { count: radii.len() });
        }
        for (i, (&r, &v)) in radii.iter().zip(&values).enumerate() {
            if !r.is_finite() || !v.is_finite() {
                return Err(PotentialError::Parse { line: i + 1, message: "non-finite entry".into() });
            }
            if i > 0 && r <= radii[i - 1] {
                return Err(PotentialError::Order { line: i + 1, r });
            }
        }
        let asymptote = values[values.len() - 1];
        Ok(Self { shape: Shape::Tabulated { spline: NaturalSpline::new(radii, values), asymptote } })
    }

    /// Reads a table of `r V` rows (bohr, hartree). Lines whose first
    /// non-blank character is `#` are comments; blank lines are skipped.
    /// Line numbers in errors count every physical line, starting at 1.
    pub fn load_tabulated<R: BufRead>(source: R) -> Result<Self> {
        let mut radii = Vec::new();
        let mut values = Vec::new();
        for (idx, line) in source.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|e| PotentialError::Io(e.to_string()))?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(PotentialError::Parse {
                    line: line_no,
                    message: format!("expected 2 columns \"r V\", found {}", fields.len()),
                });
            }
            let parse = |s: &str| -> Result<f64> {
                match s.parse::<f64>() {
                    Ok(x) if x.is_finite() => Ok(x),
                    _ => Err(PotentialError::Parse { line: line_no, message: format!("not a finite number: {s:?}") }),
                }
            };
            let (r, v) = (parse(fields[0])?, parse(fields[1])?);
            if let Some(&prev) = radii.last() {
                if r <= prev {
                    return Err(PotentialError::Order { line: line_no, r });
                }
            }
            radii.push(r);
            values.push(v);
        }
        if radii.len() < 4 {
            return Err(PotentialError::TooFewPoints { count: radii.len() });
        }
        Self::tabulated(radii, values)
    }

    /// Overrides the dissociation limit of a tabulated curve.
    pub fn with_asymptote(mut self, limit: f64) -> Result<Self> {
        check_finite("asymptote", limit)?;
        match &mut self.shape {
            Shape::Tabulated { asymptote, .. } => {
                *asymptote = limit;
                Ok(self)
            }
            _ => Err(PotentialError::Argument("only tabulated potentials take an asymptote".into())),
        }
    }

    pub fn kind(&self) -> PotentialKind {
        match self.shape {
            Shape::Harmonic { .. } => PotentialKind::Harmonic,
            Shape::InvertedHarmonic { .. } => PotentialKind::InvertedHarmonic,
            Shape::LennardJones { .. } => PotentialKind::LennardJones,
            Shape::Tabulated { .. } => PotentialKind::Tabulated,
        }
    }

    /// Closed interval of valid radii; open ends are reported as infinities,
    /// and the Lennard-Jones lower end 0 itself is excluded.
    pub fn domain(&self) -> (f64, f64) {
        match &self.shape {
            Shape::Harmonic { .. } | Shape::InvertedHarmonic { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Shape::LennardJones { .. } => (0.0, f64::INFINITY),
            Shape::Tabulated { spline, .. } => (spline.first(), spline.last()),
        }
    }

    pub fn contains(&self, r: f64) -> bool {
        if !r.is_finite() {
            return false;
        }
        match &self.shape {
            Shape::Harmonic { .. } | Shape::InvertedHarmonic { .. } => true,
            Shape::LennardJones { .. } => r > 0.0,
            Shape::Tabulated { spline, .. } => r >= spline.first() && r <= spline.last(),
        }
    }

    fn eval_unchecked(&self, r: f64) -> Derivatives {
        match &self.shape {
            Shape::Harmonic { center, curvature } => {
                let x = r - center;
                Derivatives { value: 0.5 * curvature * x * x, slope: curvature * x, curvature: *curvature }
            }
            Shape::InvertedHarmonic { center, curvature } => {
                let x = r - center;
                Derivatives { value: -0.5 * curvature * x * x, slope: -curvature * x, curvature: -curvature }
            }
            Shape::LennardJones { c6, c12 } => {
                let inv = 1.0 / r;
                let inv6 = inv.powi(6);
                let inv12 = inv6 * inv6;
                Derivatives {
                    value: c12 * inv12 - c6 * inv6,
                    slope: (-12.0 * c12 * inv12 + 6.0 * c6 * inv6) * inv,
                    curvature: (156.0 * c12 * inv12 - 42.0 * c6 * inv6) * inv * inv,
                }
            }
            Shape::Tabulated { spline, .. } => {
                let (value, slope, curvature) = spline.eval(r);
                Derivatives { value, slope, curvature }
            }
        }
    }

    /// V, V' and V'' at `r`.
    pub fn evaluate(&self, r: f64) -> Result<Derivatives> {
        if !self.contains(r) {
            let (lo, hi) = self.domain();
            return Err(PotentialError::Domain { r, lo, hi });
        }
        Ok(self.eval_unchecked(r))
    }

    pub fn value(&self, r: f64) -> Result<f64> {
        self.evaluate(r).map(|d| d.value)
    }

    /// Energy of the separated atoms. `+inf` for harmonic wells (nothing
    /// dissociates) and `-inf` for the inverted well.
    pub fn dissociation_limit(&self) -> f64 {
        match &self.shape {
            Shape::Harmonic { .. } => f64::INFINITY,
            Shape::InvertedHarmonic { .. } => f64::NEG_INFINITY,
            Shape::LennardJones { .. } => 0.0,
            Shape::Tabulated { asymptote, .. } => *asymptote,
        }
    }

    /// Location and value of the well bottom.
    pub fn minimum(&self) -> Result<(f64, f64)> {
        match &self.shape {
            Shape::Harmonic { center, .. } => Ok((*center, 0.0)),
            Shape::InvertedHarmonic { .. } => Err(PotentialError::NoMinimum),
            Shape::LennardJones { c6, c12 } => {
                let r = (2.0 * c12 / c6).powf(1.0 / 6.0);
                Ok((r, self.eval_unchecked(r).value))
            }
            Shape::Tabulated { spline, .. } => {
                let ys = spline.values();
                let xs = spline.knots();
                let k = ys
                    .iter()
                    .enumerate()
                    .min_by(|a, b| a.1.total_cmp(b.1))
                    .map(|(i, _)| i)
                    .ok_or(PotentialError::NoMinimum)?;
                if k == 0 || k == ys.len() - 1 {
                    return Err(PotentialError::NoMinimum);
                }
                let r = bisect_secant(|r| spline.eval(r).1, xs[k - 1], xs[k + 1], 1e-14)
                    .ok_or(PotentialError::NoMinimum)?;
                Ok((r, spline.eval(r).0))
            }
        }
    }

    /// Largest radius where V(r) = `energy`.
    pub fn outer_turning_point(&self, energy: f64) -> Result<TurningPoint> {
        if !energy.is_finite() {
            return Err(PotentialError::Argument(format!("energy must be finite, got {energy}")));
        }
        if let Shape::InvertedHarmonic { center, curvature } = self.shape {
            if energy > 0.0 {
                return Err(PotentialError::NoRoot { energy, lower: f64::NEG_INFINITY, upper: 0.0 });
            }
            let r_c = center + (-2.0 * energy / curvature).sqrt();
            return Ok(TurningPoint { r_c, energy });
        }

        let (r_min, v_min) = self.minimum()?;
        let limit = self.dissociation_limit();
        if energy < v_min - 4.0 * f64::EPSILON * v_min.abs() || energy >= limit {
            return Err(PotentialError::NoRoot { energy, lower: v_min, upper: limit });
        }
        if energy <= v_min + 4.0 * f64::EPSILON * v_min.abs() {
            return Ok(TurningPoint { r_c: r_min, energy });
        }

        let r_c = match &self.shape {
            Shape::Harmonic { center, curvature } => {
                if *curvature == 0.0 {
                    return Err(PotentialError::NoRoot { energy, lower: v_min, upper: v_min });
                }
                center + (2.0 * (energy - v_min) / curvature).sqrt()
            }
            Shape::LennardJones { .. } => {
                let mut hi = 2.0 * r_min;
                let mut doublings = 0;
                while self.eval_unchecked(hi).value < energy {
                    hi *= 2.0;
                    doublings += 1;
                    if doublings > 200 || !hi.is_finite() {
                        return Err(PotentialError::Bracket { energy, edge: hi });
                    }
                }
                self.refine(energy, r_min, hi)?
            }
            Shape::Tabulated { spline, .. } => {
                let xs = spline.knots();
                let edge = spline.last();
                if spline.eval(edge).0 < energy {
                    return Err(PotentialError::Bracket { energy, edge });
                }
                // Last knot interval, scanning inward, where the curve rises through E.
                let mut lo = r_min;
                let mut hi = edge;
                for k in (0..xs.len() - 1).rev() {
                    if xs[k + 1] <= r_min {
                        break;
                    }
                    let left = xs[k].max(r_min);
                    if spline.eval(left).0 < energy {
                        lo = left;
                        hi = xs[k + 1];
                        break;
                    }
                }
                self.refine(energy, lo, hi)?
            }
            Shape::InvertedHarmonic { .. } => unreachable!(),
        };
        Ok(TurningPoint { r_c, energy })
    }

    fn refine(&self, energy: f64, lo: f64, hi: f64) -> Result<f64> {
        let f = |r: f64| self.eval_unchecked(r).value - energy;
        let mut r = bisect_secant(f, lo, hi, BRACKET_WIDTH).ok_or(PotentialError::Bracket { energy, edge: hi })?;
        // Flat branches need a tighter bracket to reach the energy tolerance.
        if f(r).abs() > TURNING_POINT_TOLERANCE {
            r = bisect_secant(f, lo, hi, 0.0).ok_or(PotentialError::Bracket { energy, edge: hi })?;
        }
        Ok(r)
    }

    /// Radius inside the well minimum where V(r) = `energy` (repulsive wall).
    pub fn inner_wall(&self, energy: f64) -> Result<f64> {
        let (r_min, v_min) = self.minimum()?;
        if energy <= v_min {
            return Ok(r_min);
        }
        match &self.shape {
            Shape::Harmonic { center, curvature } => {
                if *curvature == 0.0 {
                    return Err(PotentialError::NoRoot { energy, lower: v_min, upper: v_min });
                }
                Ok(center - (2.0 * (energy - v_min) / curvature).sqrt())
            }
            Shape::LennardJones { .. } => {
                let mut lo = 0.5 * r_min;
                while self.eval_unchecked(lo).value < energy {
                    lo *= 0.5;
                }
                self.refine(energy, lo, r_min)
            }
            Shape::Tabulated { spline, .. } => {
                let first = spline.first();
                if spline.eval(first).0 < energy {
                    let (lo, hi) = self.domain();
                    return Err(PotentialError::Domain { r: first, lo, hi });
                }
                let xs = spline.knots();
                let mut lo = first;
                let mut hi = r_min;
                for k in 0..xs.len() - 1 {
                    if xs[k] >= r_min {
                        break;
                    }
                    let right = xs[k + 1].min(r_min);
                    if spline.eval(right).0 < energy {
                        lo = xs[k];
                        hi = right;
                        break;
                    }
                }
                self.refine(energy, lo, hi)
            }
            Shape::InvertedHarmonic { .. } => Err(PotentialError::NoMinimum),
        }
    }

    /// Radius beyond the minimum where V'' turns from positive to negative.
    pub fn curvature_inflection(&self) -> Result<f64> {
        match &self.shape {
            Shape::Harmonic { .. } | Shape::InvertedHarmonic { .. } => Err(PotentialError::NoInflection),
            Shape::LennardJones { c6, c12 } => Ok((26.0 * c12 / (7.0 * c6)).powf(1.0 / 6.0)),
            Shape::Tabulated { spline, .. } => {
                let (r_min, _) = self.minimum()?;
                let xs = spline.knots();
                let ms = spline.knot_curvatures();
                let mut prev_r = r_min;
                let mut prev_c = spline.eval(r_min).2;
                for (&x, &m) in xs.iter().zip(ms).filter(|(&x, _)| x > r_min) {
                    if prev_c > 0.0 && m <= 0.0 {
                        // V'' is linear between knots.
                        return Ok(prev_r + prev_c * (x - prev_r) / (prev_c - m));
                    }
                    prev_r = x;
                    prev_c = m;
                }
                Err(PotentialError::NoInflection)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn lj11() -> PotentialModel {
        PotentialModel::lennard_jones(1.0, 1.0).unwrap()
    }

    fn lj_table(n: usize, lo: f64, hi: f64) -> PotentialModel {
        let lj = lj11();
        let rs: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
        let vs = rs.iter().map(|&r| lj.value(r).unwrap()).collect();
        PotentialModel::tabulated(rs, vs).unwrap()
    }

    #[test]
    fn lj_minimum_value_and_stationarity() {
        let r = 2f64.powf(1.0 / 6.0);
        let d = lj11().evaluate(r).unwrap();
        assert_relative_eq!(d.value, -0.25, epsilon = 1e-15);
        assert!(d.slope.abs() < 1e-14);
    }

    #[test]
    fn harmonic_identities() {
        let d = PotentialModel::harmonic(10.0, 1.0).unwrap().evaluate(11.0).unwrap();
        assert_eq!((d.value, d.slope, d.curvature), (0.5, 1.0, 1.0));
    }

    #[test]
    fn lj_derivatives_closed_form() {
        let r: f64 = 1.7;
        let d = lj11().evaluate(r).unwrap();
        assert_relative_eq!(d.slope, -12.0 * r.powi(-13) + 6.0 * r.powi(-7), epsilon = 1e-15);
        assert_relative_eq!(d.curvature, 156.0 * r.powi(-14) - 42.0 * r.powi(-8), epsilon = 1e-15);
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(lj11().evaluate(0.0), Err(PotentialError::Domain { .. })));
        assert!(matches!(lj11().evaluate(-1.0), Err(PotentialError::Domain { .. })));
        let t = lj_table(10, 1.0, 3.0);
        assert!(t.evaluate(3.0).is_ok());
        assert!(matches!(t.evaluate(3.0001), Err(PotentialError::Domain { .. })));
        assert!(matches!(t.evaluate(0.999), Err(PotentialError::Domain { .. })));
    }

    #[test]
    fn c12_for_depth_examples() {
        assert_eq!(lj_c12_for_depth(1.0, 0.25).unwrap(), 1.0);
        assert_eq!(lj_c12_for_depth(2.0, 0.25).unwrap(), 4.0);
        let c12 = lj_c12_for_depth(1.0, 1.0).unwrap();
        assert_eq!(c12, 0.25);
        let r_min = (2.0f64 * 0.25).powf(1.0 / 6.0);
        let v = PotentialModel::lennard_jones(1.0, c12).unwrap().value(r_min).unwrap();
        assert_relative_eq!(v, -1.0, epsilon = 1e-14);
        assert!(matches!(lj_c12_for_depth(0.0, 1.0), Err(PotentialError::Argument(_))));
        assert!(matches!(lj_c12_for_depth(1.0, -1.0), Err(PotentialError::Argument(_))));
    }

    #[test]
    fn minimum_examples() {
        let (r, v) = lj11().minimum().unwrap();
        assert_relative_eq!(r, 1.122462048309373, epsilon = 1e-12);
        assert_relative_eq!(v, -0.25, epsilon = 1e-15);
        assert_eq!(PotentialModel::harmonic(10.0, 1.0).unwrap().minimum().unwrap(), (10.0, 0.0));
        assert_eq!(PotentialModel::inverted_harmonic(0.0, 1.0).unwrap().minimum(), Err(PotentialError::NoMinimum));
    }

    #[test]
    fn tabulated_minimum_matches_closed_form() {
        let t = lj_table(2000, 0.9, 5.0);
        let (r, _) = t.minimum().unwrap();
        assert!((r - 2f64.powf(1.0 / 6.0)).abs() < 1e-4);
        assert!(t.evaluate(r).unwrap().slope.abs() < 1e-10);
    }

    #[test]
    fn turning_point_examples() {
        let h = PotentialModel::harmonic(0.0, 1.0).unwrap();
        assert_relative_eq!(h.outer_turning_point(2.0).unwrap().r_c, 2.0, epsilon = 1e-15);
        let tp = lj11().outer_turning_point(-0.25).unwrap();
        assert_relative_eq!(tp.r_c, 2f64.powf(1.0 / 6.0), epsilon = 1e-12);
    }

    #[test]
    fn lj_turning_point_against_quadratic_and_bisection() {
        // u = r^-6 solves u^2 - u + 0.125 = 0; the outer root is the smaller u.
        let u = (1.0 - 0.5f64.sqrt()) / 2.0;
        let closed = u.powf(-1.0 / 6.0);
        // independent plain bisection
        let f = |r: f64| r.powi(-12) - r.powi(-6) + 0.125;
        let (mut lo, mut hi) = (1.2, 3.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((closed - lo).abs() < 1e-12);
        let tp = lj11().outer_turning_point(-0.125).unwrap();
        assert!((tp.r_c - closed).abs() < 1e-10);
        assert!((tp.r_c - 1.3774).abs() < 1e-4);
        assert!((lj11().value(tp.r_c).unwrap() + 0.125).abs() <= TURNING_POINT_TOLERANCE);
    }

    #[test]
    fn turning_point_errors() {
        assert!(matches!(lj11().outer_turning_point(-0.3), Err(PotentialError::NoRoot { .. })));
        assert!(matches!(lj11().outer_turning_point(0.0), Err(PotentialError::NoRoot { .. })));
        let t = lj_table(100, 0.95, 1.5);
        // asymptote defaults to V(1.5) ~ -0.08; E just below it needs r beyond the table edge
        let v_edge = t.value(1.5).unwrap();
        assert!(matches!(t.outer_turning_point(v_edge + 1e-3), Err(PotentialError::NoRoot { .. })));
        let t = t.with_asymptote(0.0).unwrap();
        assert!(matches!(t.outer_turning_point(-0.01), Err(PotentialError::Bracket { .. })));
    }

    #[test]
    fn tabulated_turning_point() {
        let t = lj_table(3000, 0.9, 6.0).with_asymptote(0.0).unwrap();
        let exact = lj11().outer_turning_point(-0.125).unwrap().r_c;
        let tp = t.outer_turning_point(-0.125).unwrap();
        assert!((tp.r_c - exact).abs() < 1e-7);
    }

    #[test]
    fn inflection_examples() {
        let r = lj11().curvature_inflection().unwrap();
        assert_relative_eq!(r, (26.0f64 / 7.0).powf(1.0 / 6.0), epsilon = 1e-15);
        assert!((r - 1.2445).abs() < 1e-4);
        assert!(lj11().evaluate(r).unwrap().curvature.abs() < 1e-10);
        assert_eq!(
            PotentialModel::harmonic(0.0, 1.0).unwrap().curvature_inflection(),
            Err(PotentialError::NoInflection)
        );
    }

    #[test]
    fn tabulated_inflection() {
        let t = lj_table(4000, 0.9, 4.0);
        let r = t.curvature_inflection().unwrap();
        assert!((r - (26.0f64 / 7.0).powf(1.0 / 6.0)).abs() < 1e-5);
    }

    #[test]
    fn dissociation_limits() {
        assert_eq!(lj11().dissociation_limit(), 0.0);
        assert_eq!(PotentialModel::harmonic(0.0, 1.0).unwrap().dissociation_limit(), f64::INFINITY);
        assert_eq!(PotentialModel::inverted_harmonic(0.0, 1.0).unwrap().dissociation_limit(), f64::NEG_INFINITY);
        let t = lj_table(500, 0.9, 30.0);
        let expected = 30f64.powi(-12) - 30f64.powi(-6);
        assert_relative_eq!(t.dissociation_limit(), expected, max_relative = 1e-12);
        assert!((t.dissociation_limit() + 1.372e-9).abs() < 1e-12);
    }

    #[test]
    fn loader_minimal_and_errors() {
        let text = "# header\n1.0 4.0\n2.0 1.0\n3.0 0.0\n4.0 1.0\n";
        let m = PotentialModel::load_tabulated(text.as_bytes()).unwrap();
        assert_eq!(m.kind(), PotentialKind::Tabulated);
        assert_eq!(m.domain(), (1.0, 4.0));

        let dup = "1.0 4.0\n2.0 1.0\n2.0 0.5\n3.0 0.0\n4.0 1.0\n";
        assert_eq!(PotentialModel::load_tabulated(dup.as_bytes()), Err(PotentialError::Order { line: 3, r: 2.0 }));

        let bad = "1.0 4.0\n# note\n2.0 x\n";
        assert!(matches!(PotentialModel::load_tabulated(bad.as_bytes()), Err(PotentialError::Parse { line: 3, .. })));

        let three = "1 1\n2 0\n3 1\n";
        assert_eq!(PotentialModel::load_tabulated(three.as_bytes()), Err(PotentialError::TooFewPoints { count: 3 }));

        let extra = "1 1 1\n";
        assert!(matches!(PotentialModel::load_tabulated(extra.as_bytes()), Err(PotentialError::Parse { line: 1, .. })));
    }

    #[test]
    fn loaded_table_tracks_closed_form() {
        let lj = lj11();
        let (lo, hi, n) = (0.9, 10.0, 5000);
        let rs: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
        let mut text = String::from("# LJ(1,1)\n");
        for &r in &rs {
            text.push_str(&format!("{r} {}\n", lj.value(r).unwrap()));
        }
        let t = PotentialModel::load_tabulated(text.as_bytes()).unwrap();
        // natural end conditions perturb the outermost intervals only
        for w in rs.windows(2).skip(20).take(n - 41) {
            let mid = 0.5 * (w[0] + w[1]);
            assert!((t.value(mid).unwrap() - lj.value(mid).unwrap()).abs() < 1e-8, "r = {mid}");
        }
    }

    #[test]
    fn spline_convergence_orders() {
        // Interior errors shrink like h^4, h^3, h^2 for V, V', V''.
        let lj = lj11();
        let probes: Vec<f64> = (0..3000).map(|i| 1.2 + i as f64 * 5e-4).collect();
        let errs = |n: usize| {
            let t = lj_table(n, 0.9, 4.0);
            let mut e = [0.0f64; 3];
            for &r in &probes {
                let a = t.evaluate(r).unwrap();
                let b = lj.evaluate(r).unwrap();
                e[0] = e[0].max((a.value - b.value).abs());
                e[1] = e[1].max((a.slope - b.slope).abs());
                e[2] = e[2].max((a.curvature - b.curvature).abs());
            }
            e
        };
        let coarse = errs(401);
        let fine = errs(801);
        let orders: Vec<f64> = (0..3).map(|k| (coarse[k] / fine[k]).log2()).collect();
        assert!(orders[0] > 3.7, "{orders:?}");
        assert!(orders[1] > 2.7, "{orders:?}");
        assert!(orders[2] > 1.7, "{orders:?}");
    }
}
