use serde::{Deserialize, Serialize};

use super::field::SurfaceField;

/// Exponent and flavor of a Sobolev norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SobolevIndex {
    pub s: f64,
    /// Homogeneous norms use the weight `|k|` and drop the zero mode.
    pub homogeneous: bool,
}

impl SobolevIndex {
    pub const MIN_S: f64 = -2.0;
    pub const MAX_S: f64 = 12.0;

    pub fn inhomogeneous(s: f64) -> Self {
        Self::checked(s, false)
    }

    pub fn homogeneous(s: f64) -> Self {
        Self::checked(s, true)
    }

    fn checked(s: f64, homogeneous: bool) -> Self {
        assert!(
            (Self::MIN_S..=Self::MAX_S).contains(&s),
            "Sobolev exponent {s} outside [-2, 12]"
        );
        Self { s, homogeneous }
    }

    /// Weight `w(k)^{2s}` multiplying `|f̂(k)|²`.
    pub fn weight_sq(&self, k: [i64; 2]) -> f64 {
        let ksq = (k[0] * k[0] + k[1] * k[1]) as f64;
        if self.homogeneous {
            if ksq == 0.0 {
                0.0
            } else {
                ksq.powf(self.s)
            }
        } else {
            (1.0 + ksq).powf(self.s)
        }
    }
}

/// Weight used for the `Ḣ^{1/2}` seminorm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HalfNormWeight {
    /// `Σ_{k≠0} |k| |ĝ(k)|²`.
    #[default]
    Standard,
    /// `Σ_{k≠0} |k|² |ĝ(k)|²`, kept for comparison with the `Ḣ¹`-weighted variant.
    KSquared,
}

/// `(Σ_k w(k)^{2s} |f̂(k)|²)^{1/2}`.
pub fn sobolev_norm(f: &SurfaceField, idx: SobolevIndex) -> f64 {
    let grid = f.grid();
    f.coeffs()
        .iter()
        .enumerate()
        .map(|(i, c)| idx.weight_sq(grid.wavevector(i)) * c.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Inhomogeneous `H^s` norm.
pub fn hs_norm(f: &SurfaceField, s: f64) -> f64 {
    sobolev_norm(f, SobolevIndex::inhomogeneous(s))
}

/// `‖g‖_{Ḣ^{1/2}}` under the chosen weight convention.
pub fn half_norm(f: &SurfaceField, weight: HalfNormWeight) -> f64 {
    match weight {
        HalfNormWeight::Standard => sobolev_norm(f, SobolevIndex::homogeneous(0.5)),
        HalfNormWeight::KSquared => sobolev_norm(f, SobolevIndex::homogeneous(1.0)),
    }
}
