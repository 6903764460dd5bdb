//! Information accounting for growing adaptels.
//!
//! The information of a segment is the sum of per-pixel negative
//! log-probabilities (in bits) under the best-fitting member of a
//! probability family. For the double exponential family the best fit is the
//! running mean, and a pixel `x` costs `||x - mean|| / (sigma * ln 2)` bits.

use std::f64::consts::LN_2;

use crate::error::{AdaptelError, Result};

/// A family of appearance distributions parameterized by a mean vector.
///
/// Implementations return the self-information in bits of a single
/// observation under the member of the family centered at `mean`.
pub trait InfoModel: Send + Sync {
    fn pixel_info_bits(&self, x: &[f64], mean: &[f64]) -> f64;
}

/// Multivariate double exponential with unit peak density (`Z = 1`), so a
/// pixel equal to the mean carries zero information.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleExponential {
    sigma: f64,
    // 1 / (sigma * ln 2), precomputed for the hot loop.
    inv_scale: f64,
}

/// Default scale in CIELAB distance units.
pub const DEFAULT_SIGMA: f64 = 10.0;

impl DoubleExponential {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(AdaptelError::InvalidConfig(format!(
                "sigma must be positive and finite, got {sigma}"
            )));
        }
        Ok(DoubleExponential {
            sigma,
            inv_scale: 1.0 / (sigma * LN_2),
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

impl Default for DoubleExponential {
    fn default() -> Self {
        DoubleExponential::new(DEFAULT_SIGMA).expect("default sigma is valid")
    }
}

impl InfoModel for DoubleExponential {
    #[inline]
    fn pixel_info_bits(&self, x: &[f64], mean: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), mean.len());
        let sq: f64 = x
            .iter()
            .zip(mean)
            .map(|(a, b)| {
                let d = a - b;
                d * d
            })
            .sum();
        sq.sqrt() * self.inv_scale
    }
}

/// Running statistics of one adaptel.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptelState {
    pub id: u32,
    pub count: usize,
    pub mean: Vec<f64>,
    pub info_bits: f64,
}

impl AdaptelState {
    pub fn empty(id: u32, channels: usize) -> Self {
        AdaptelState {
            id,
            count: 0,
            mean: vec![0.0; channels],
            info_bits: 0.0,
        }
    }

    /// Information of the adaptel if `x` were added to it. A seed on its own
    /// fits its own mean exactly and costs nothing.
    #[inline]
    pub fn candidate_info<M: InfoModel + ?Sized>(&self, x: &[f64], model: &M) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.info_bits + model.pixel_info_bits(x, &self.mean)
        }
    }

    /// Adds `x` with the information value `info` it was accepted at.
    #[inline]
    pub fn absorb(&mut self, x: &[f64], info: f64) {
        let n = self.count as f64;
        let inv = 1.0 / (n + 1.0);
        for (m, &v) in self.mean.iter_mut().zip(x) {
            *m = (n * *m + v) * inv;
        }
        self.count += 1;
        self.info_bits = info;
    }
}

/// Free-function form of [`InfoModel::pixel_info_bits`].
pub fn pixel_info_bits<M: InfoModel + ?Sized>(x: &[f64], mean: &[f64], model: &M) -> f64 {
    model.pixel_info_bits(x, mean)
}

/// Free-function form of [`AdaptelState::candidate_info`].
pub fn candidate_info<M: InfoModel + ?Sized>(state: &AdaptelState, x: &[f64], model: &M) -> f64 {
    state.candidate_info(x, model)
}

/// Returns `state` after absorbing `x` at information `info`.
pub fn absorb(mut state: AdaptelState, x: &[f64], info: f64) -> AdaptelState {
    state.absorb(x, info);
    state
}
