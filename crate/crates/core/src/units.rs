//! Unit conventions. Everything internal is Hartree atomic units; wavenumbers
//! only appear at input/output boundaries.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// cm⁻¹ per Hartree (CODATA 2018).
pub const HARTREE_TO_WAVENUMBER: f64 = 219_474.631_363_2;

/// Electron masses per unified atomic mass unit (CODATA 2018).
pub const AMU_TO_ELECTRON_MASS: f64 = 1_822.888_486_209;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrequencyUnit {
    Hartree,
    Wavenumber,
}

impl FromStr for FrequencyUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hartree" | "ha" | "au" | "a.u." => Ok(Self::Hartree),
            "cm-1" | "cm^-1" | "cm⁻¹" | "wavenumber" => Ok(Self::Wavenumber),
            _ => Err(Error::UnknownUnit(s.to_string())),
        }
    }
}

impl fmt::Display for FrequencyUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Hartree => write!(f, "hartree"),
            Self::Wavenumber => write!(f, "cm-1"),
        }
    }
}

pub fn convert_frequency(value: f64, from: FrequencyUnit, to: FrequencyUnit) -> f64 {
    use FrequencyUnit::*;
    match (from, to) {
        (Hartree, Wavenumber) => value * HARTREE_TO_WAVENUMBER,
        (Wavenumber, Hartree) => value / HARTREE_TO_WAVENUMBER,
        _ => value,
    }
}

/// String-keyed variant used by config parsing.
pub fn convert_frequency_named(value: f64, from: &str, to: &str) -> Result<f64> {
    Ok(convert_frequency(value, from.parse()?, to.parse()?))
}

#[inline]
pub fn hartree_to_wavenumber(value: f64) -> f64 {
    convert_frequency(value, FrequencyUnit::Hartree, FrequencyUnit::Wavenumber)
}

#[inline]
pub fn wavenumber_to_hartree(value: f64) -> f64 {
    convert_frequency(value, FrequencyUnit::Wavenumber, FrequencyUnit::Hartree)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_maps_to_zero() {
        assert_eq!(hartree_to_wavenumber(0.0), 0.0);
    }

    #[test]
    fn cavity_frequency_round_trip() {
        let back = hartree_to_wavenumber(wavenumber_to_hartree(2430.0));
        assert!((back - 2430.0).abs() <= 1e-12 * 2430.0);
    }

    #[test]
    fn unknown_unit_is_rejected() {
        assert!(matches!(
            convert_frequency_named(1.0, "hartree", "furlong"),
            Err(Error::UnknownUnit(_))
        ));
        assert!(convert_frequency_named(1.0, "cm-1", "hartree").is_ok());
    }

    proptest! {
        #[test]
        fn round_trip_identity(x in -1.0e3f64..1.0e3) {
            let back = wavenumber_to_hartree(hartree_to_wavenumber(x));
            prop_assert!((back - x).abs() <= 1e-12 * x.abs().max(f64::MIN_POSITIVE));
        }

        #[test]
        fn conversion_is_linear(x in -10.0f64..10.0, a in -100.0f64..100.0) {
            let lhs = hartree_to_wavenumber(a * x);
            let rhs = a * hartree_to_wavenumber(x);
            prop_assert!((lhs - rhs).abs() <= 1e-14 * rhs.abs().max(1e-300) + 1e-300);
        }
    }
}
