//! Schmidt spectra and Rényi entropies for an edge bipartition.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Region;
use crate::state::StateVector;

/// Probabilities below this floor are dropped from every spectrum.
pub const TRUNCATION: f64 = 1e-14;
/// Default relative threshold for the numerical Schmidt rank.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    #[default]
    Nats,
    Bits,
}

impl Units {
    pub fn convert(self, nats: f64) -> f64 {
        match self {
            Units::Nats => nats,
            Units::Bits => nats / std::f64::consts::LN_2,
        }
    }
}

/// Eigenvalues of a reduced density matrix, descending.
#[derive(Debug, Clone, PartialEq)]
pub struct EntanglementSpectrum {
    probs: Vec<f64>,
}

impl EntanglementSpectrum {
    /// Sorts, drops values under [`TRUNCATION`] and checks normalization.
    pub fn new(mut probs: Vec<f64>) -> Result<Self> {
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < -1e-12) {
            return Err(Error::InvalidParameters(format!(
                "invalid spectrum entry {p}"
            )));
        }
        probs.retain(|&p| p >= TRUNCATION);
        probs.sort_by(|a, b| b.total_cmp(a));
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParameters(format!(
                "spectrum sums to {total}"
            )));
        }
        Ok(EntanglementSpectrum { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn is_flat(&self, tol: f64) -> bool {
        let p0 = self.probs[0];
        self.probs.iter().all(|p| (p - p0).abs() <= tol)
    }
}

/// Gathers the bits of `b` selected by `mask` into the low positions.
#[inline]
pub(crate) fn extract_bits(b: u64, mask: u64) -> u64 {
    let mut out = 0u64;
    let mut m = mask;
    let mut k = 0;
    while m != 0 {
        let low = m & m.wrapping_neg();
        if b & low != 0 {
            out |= 1 << k;
        }
        k += 1;
        m ^= low;
    }
    out
}

/// Squared Schmidt values of `v` across `A | B`.
pub fn schmidt_spectrum(v: &StateVector, region: &Region) -> Result<EntanglementSpectrum> {
    let n = v.n_sites();
    if region.n_edges_total() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: region.n_edges_total(),
        });
    }
    let norm2 = v.dot(v)?;
    if (norm2 - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidParameters(format!(
            "state norm² is {norm2}, expected 1"
        )));
    }
    let a_mask = region.mask();
    let b_mask = region.complement().mask();
    let (small, large) = if a_mask.count_ones() <= b_mask.count_ones() {
        (a_mask, b_mask)
    } else {
        (b_mask, a_mask)
    };
    let rows = 1usize << small.count_ones();
    let cols = 1usize << large.count_ones();
    let mut m = DMatrix::<f64>::zeros(rows, cols);
    for (b, &amp) in v.amplitudes().iter().enumerate() {
        let b = b as u64;
        m[(
            extract_bits(b, small) as usize,
            extract_bits(b, large) as usize,
        )] = amp;
    }
    // singular values of R from Mᵀ = QR keep small Schmidt weights accurate
    let r = m.transpose().qr().r();
    EntanglementSpectrum::new(r.singular_values().iter().map(|s| s * s).collect())
}

pub fn schmidt_rank(spec: &EntanglementSpectrum, tau: f64) -> usize {
    let p0 = spec.probs.first().copied().unwrap_or(0.0);
    spec.probs.iter().filter(|&&p| p > tau * p0).count()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenyiPoint {
    pub alpha: f64,
    pub value: f64,
}

/// `S_α` in nats with the default rank threshold for `α = 0`.
pub fn renyi(spec: &EntanglementSpectrum, alpha: f64) -> Result<f64> {
    renyi_with_tau(spec, alpha, RANK_TOL)
}

pub fn renyi_point(spec: &EntanglementSpectrum, alpha: f64) -> Result<RenyiPoint> {
    Ok(RenyiPoint {
        alpha,
        value: renyi(spec, alpha)?,
    })
}

pub fn renyi_with_tau(spec: &EntanglementSpectrum, alpha: f64, tau: f64) -> Result<f64> {
    if alpha.is_nan() || alpha < 0.0 {
        return Err(Error::NegativeAlpha(alpha));
    }
    let p = &spec.probs;
    let s = if alpha == 0.0 {
        (schmidt_rank(spec, tau) as f64).ln()
    } else if alpha == 1.0 {
        -p.iter().map(|&x| x * x.ln()).sum::<f64>()
    } else if alpha.is_infinite() {
        -p[0].ln()
    } else if (alpha - 1.0).abs() < 0.25 {
        // ln Σ p^α written around Σ p = 1 so the α → 1 limit stays accurate
        let total: f64 = p.iter().sum();
        let excess: f64 = p
            .iter()
            .map(|&x| x * ((alpha - 1.0) * x.ln()).exp_m1())
            .sum();
        ((total - 1.0) + excess).ln_1p() / (1.0 - alpha)
    } else {
        let top = alpha * p[0].ln();
        let sum: f64 = p.iter().map(|&x| (alpha * x.ln() - top).exp()).sum();
        (top + sum.ln()) / (1.0 - alpha)
    };
    Ok(s.max(0.0))
}
