use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// Strictly increasing maps from ranks in `[0, 1]` to outcomes, each with a
/// closed-form inverse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StructuralMap {
    Identity,
    /// `a * u + b`
    Affine { a: f64, b: f64 },
    /// `exp(a * u + b)`
    ExpAffine { a: f64, b: f64 },
    /// `scale * u^gamma + shift`
    Power {
        gamma: f64,
        #[serde(default = "one")]
        scale: f64,
        #[serde(default)]
        shift: f64,
    },
    /// `a * Phi^-1(u) + b`
    GaussianQuantileAffine { a: f64, b: f64 },
}

fn one() -> f64 {
    1.0
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

// keeps Phi^-1 finite at the endpoints of [0, 1]
const RANK_EPS: f64 = 1e-300;

impl StructuralMap {
    pub fn validate(&self) -> Result<(), String> {
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        match *self {
            StructuralMap::Identity => Ok(()),
            StructuralMap::Affine { a, b }
            | StructuralMap::ExpAffine { a, b }
            | StructuralMap::GaussianQuantileAffine { a, b } => {
                if !finite(&[a, b]) || a <= 0.0 {
                    Err(format!("slope must be finite and positive, got a = {a}, b = {b}"))
                } else {
                    Ok(())
                }
            }
            StructuralMap::Power { gamma, scale, shift } => {
                if !finite(&[gamma, scale, shift]) || gamma <= 0.0 || scale <= 0.0 {
                    Err(format!(
                        "power map needs gamma > 0 and scale > 0, got gamma = {gamma}, scale = {scale}"
                    ))
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            StructuralMap::Identity => u,
            StructuralMap::Affine { a, b } => a * u + b,
            StructuralMap::ExpAffine { a, b } => (a * u + b).exp(),
            StructuralMap::Power { gamma, scale, shift } => scale * u.powf(gamma) + shift,
            StructuralMap::GaussianQuantileAffine { a, b } => {
                a * std_normal().inverse_cdf(u.clamp(RANK_EPS, 1.0 - f64::EPSILON / 2.0)) + b
            }
        }
    }

    /// Rank `u` with `eval(u) == y`, clamped to `[0, 1]` for outcomes
    /// outside the image.
    pub fn inverse(&self, y: f64) -> f64 {
        let u = match *self {
            StructuralMap::Identity => y,
            StructuralMap::Affine { a, b } => (y - b) / a,
            StructuralMap::ExpAffine { a, b } => {
                if y <= 0.0 {
                    0.0
                } else {
                    (y.ln() - b) / a
                }
            }
            StructuralMap::Power { gamma, scale, shift } => {
                let z = (y - shift) / scale;
                if z <= 0.0 {
                    0.0
                } else {
                    z.powf(1.0 / gamma)
                }
            }
            StructuralMap::GaussianQuantileAffine { a, b } => std_normal().cdf((y - b) / a),
        };
        u.clamp(0.0, 1.0)
    }
}
