//! Ready-made run configurations.
//!
//! `harmonic` is the analytic test case (ω = 1, μ = 1). `rubidium_lj` is a
//! Lennard-Jones well with the rubidium C6 coefficient, the depth of the Rb₂
//! X¹Σg⁺ ground state and the ⁸⁷Rb₂ reduced mass.

use std::path::PathBuf;

use crate::config::{FitSpec, GridPolicyKind, GridSpec, OtocSpec, OutputFormat, OutputSpec, PotentialSpec, RunConfig};

/// Hartree per cm⁻¹.
pub const HARTREE_PER_WAVENUMBER: f64 = 1.0 / 219_474.631_363_2;
/// Electron masses per dalton.
pub const ELECTRON_MASSES_PER_DALTON: f64 = 1_822.888_486_209;

/// Rb dispersion coefficient [hartree·bohr⁶].
pub const RB_C6: f64 = 4698.0;
/// Rb₂ X-state well depth [cm⁻¹].
pub const RB2_DEPTH_WAVENUMBERS: f64 = 3993.59;
/// ⁸⁷Rb atomic mass [dalton].
pub const RB87_MASS_DALTON: f64 = 86.909_180_527;

pub fn rb2_depth() -> f64 {
    RB2_DEPTH_WAVENUMBERS * HARTREE_PER_WAVENUMBER
}

pub fn rb87_reduced_mass() -> f64 {
    0.5 * RB87_MASS_DALTON * ELECTRON_MASSES_PER_DALTON
}

fn output(name: &str) -> OutputSpec {
    OutputSpec { directory: PathBuf::from("out").join(name), formats: vec![OutputFormat::Csv, OutputFormat::Json] }
}

pub fn harmonic() -> RunConfig {
    RunConfig {
        potential: PotentialSpec::Harmonic { center: 10.0, curvature: 1.0 },
        reduced_mass_au: 1.0,
        grid: GridSpec {
            policy: GridPolicyKind::Explicit,
            points: 400,
            a: Some(2.0),
            b: Some(18.0),
            target_binding: None,
            max_states: Some(12),
        },
        otoc: OtocSpec { t_max: Some(4.0 * std::f64::consts::PI), t_points: 400, ..OtocSpec::default() },
        fit: FitSpec::default(),
        output: output("harmonic"),
    }
}

pub fn rubidium_lj() -> RunConfig {
    RunConfig {
        potential: PotentialSpec::LennardJones { c6: RB_C6, c12: None, depth: Some(rb2_depth()) },
        reduced_mass_au: rb87_reduced_mass(),
        grid: GridSpec {
            policy: GridPolicyKind::Auto,
            points: 2000,
            a: None,
            b: None,
            target_binding: Some(1e-3),
            max_states: None,
        },
        otoc: OtocSpec::default(),
        fit: FitSpec::default(),
        output: output("rubidium_lj"),
    }
}

/// Looks a preset up by name.
pub fn by_name(name: &str) -> Option<RunConfig> {
    match name {
        "harmonic" => Some(harmonic()),
        "rubidium_lj" => Some(rubidium_lj()),
        _ => None,
    }
}
