//! Cole-Hopf transforms between Burgers states and positive heat states.
//!
//! `C(v) = -2 ∂ₓv / v` maps strictly positive states to Burgers states, and
//! `H(u) = exp(-½∫₀ˣu) / ∫₀¹exp(-½∫₀ˣu)` maps any state onto the positive,
//! unit-mass cone. `C` ignores constant factors, so `C(δ v) = C(v)`.

use crate::error::{KblError, Result};
use crate::grid::{cumulative_integral, derivative, integrate, ScalarField};

/// Largest admissible `|½∫₀ˣu|` before the exponential is refused.
pub const MAX_EXPONENT: f64 = 700.0;

/// Unit-mass tolerance for the `P_ONE` class.
pub const UNIT_MASS_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StateTag {
    /// Any finite state (Burgers state space).
    L2State,
    /// Strictly positive.
    PPlus,
    /// Strictly positive with unit integral.
    POne,
}

/// A field together with the state class it has been validated against.
#[derive(Debug, Clone, PartialEq)]
pub struct StateClass {
    tag: StateTag,
    field: ScalarField,
}

impl StateClass {
    pub fn l2(field: ScalarField) -> Self {
        Self {
            tag: StateTag::L2State,
            field,
        }
    }

    pub fn p_plus(field: ScalarField) -> Result<Self> {
        check_positive(&field)?;
        Ok(Self {
            tag: StateTag::PPlus,
            field,
        })
    }

    pub fn p_one(field: ScalarField) -> Result<Self> {
        check_positive(&field)?;
        let mass = integrate(&field);
        if (mass - 1.0).abs() > UNIT_MASS_TOL {
            return Err(KblError::Domain(format!(
                "P_ONE state must have unit mass, got {mass}"
            )));
        }
        Ok(Self {
            tag: StateTag::POne,
            field,
        })
    }

    /// Divides a positive field by its mass.
    pub fn normalized(field: ScalarField) -> Result<Self> {
        check_positive(&field)?;
        let mass = integrate(&field);
        Self::p_one(field.scale(1.0 / mass))
    }

    pub fn tag(&self) -> StateTag {
        self.tag
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn into_field(self) -> ScalarField {
        self.field
    }

    pub fn mass(&self) -> f64 {
        integrate(&self.field)
    }
}

fn check_positive(field: &ScalarField) -> Result<()> {
    if let Some(i) = field.values().iter().position(|&v| v <= 0.0) {
        return Err(KblError::Domain(format!(
            "state must be strictly positive; value {} at node {i}",
            field.values()[i]
        )));
    }
    Ok(())
}

/// `H(u)`: always returns a validated `P_ONE` state.
pub fn hopf(u: &ScalarField) -> Result<StateClass> {
    let exponent = cumulative_integral(u).scale(-0.5);
    let (lo, hi) = (exponent.min(), exponent.max());
    // the spread bounds the dynamic range of the exponential after shifting
    let worst = exponent.sup_norm().max(hi - lo);
    if worst > MAX_EXPONENT {
        return Err(KblError::Range { exponent: worst });
    }
    let w = exponent.map(|e| (e - hi).exp())?;
    let mass = integrate(&w);
    StateClass::p_one(w.scale(1.0 / mass))
}

/// `C(v) = -2 ∂ₓv / v` for a positive state.
pub fn cole(v: &StateClass) -> Result<ScalarField> {
    if v.tag() == StateTag::L2State {
        check_positive(v.field())?;
    }
    cole_unchecked(v.field())
}

/// `C(v)` for a raw field, validating positivity.
pub fn cole_field(v: &ScalarField) -> Result<ScalarField> {
    check_positive(v)?;
    cole_unchecked(v)
}

fn cole_unchecked(v: &ScalarField) -> Result<ScalarField> {
    derivative(v).zip_with(v, |dv, v| -2.0 * dv / v)
}
