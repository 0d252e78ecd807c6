//! Exact loop-gas ground states of the toric code deformed by
//! `Σ_s exp(-λ Σ_{i∈s} σ^z_i)`.
//!
//! The ground state in the sector containing the all-up configuration is
//! `Σ_g e^{-λ L_g} |g⟩` over the gauge group `G` generated by star flips, with
//! `L_g` the number of flipped edges. Its reduced density matrix on `A` splits
//! into rank-one blocks labelled by the cosets of `G_A G_B`, with weights
//! `Σ_{g∈D} e^{-2λ L_g} / Z`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entanglement::{renyi, EntanglementSpectrum};
use crate::error::{Error, Result};
use crate::lattice::{LatticeGeometry, Region};
use crate::pauli::{plaquette_terms, star_exponential, OperatorSum, PauliString};
use crate::state::StateVector;

/// Largest enumerable group, `2^20` elements.
pub const MAX_GROUP_BITS: u32 = 20;
/// Phase boundary of the loop gas, for reference.
pub const LAMBDA_C: f64 = 0.44;
/// Exponent factor `w` in `Z = Σ_g e^{-wλ L_g}` for the Hamiltonian coupling λ.
pub const CC_WEIGHT: f64 = 2.0;

/// Linearly independent masks over GF(2), kept in reduced echelon form.
#[derive(Debug, Clone, Default)]
pub struct XorBasis {
    rows: Vec<u64>,
}

impl XorBasis {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn reduce(&self, mut v: u64) -> u64 {
        for &r in &self.rows {
            let pivot = 63 - r.leading_zeros();
            if v >> pivot & 1 == 1 {
                v ^= r;
            }
        }
        v
    }

    /// Adds `v` if independent; returns whether it was.
    pub fn insert(&mut self, v: u64) -> bool {
        let v = self.reduce(v);
        if v == 0 {
            return false;
        }
        let pivot = 63 - v.leading_zeros();
        for r in self.rows.iter_mut() {
            if *r >> pivot & 1 == 1 {
                *r ^= v;
            }
        }
        self.rows.push(v);
        self.rows.sort_by(|a, b| b.cmp(a));
        true
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn contains(&self, v: u64) -> bool {
        self.reduce(v) == 0
    }
}

#[derive(Debug, Clone)]
pub struct GaugeGroup {
    n_edges: usize,
    generators: Vec<u64>,
    elements: Vec<u64>,
}

impl GaugeGroup {
    pub fn elements(&self) -> &[u64] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    /// Independent star products spanning the group.
    pub fn generators(&self) -> &[u64] {
        &self.generators
    }

    /// Length histogram `L → multiplicity`.
    pub fn length_histogram(&self) -> BTreeMap<u32, usize> {
        let mut h = BTreeMap::new();
        for &g in &self.elements {
            *h.entry(loop_length(g)).or_insert(0) += 1;
        }
        h
    }
}

/// Flipped-edge count of a loop configuration.
pub fn loop_length(g: u64) -> u32 {
    g.count_ones()
}

/// All distinct products of star supports.
pub fn enumerate_group(geom: &LatticeGeometry) -> Result<GaugeGroup> {
    let mut basis = XorBasis::new();
    let generators: Vec<u64> = geom
        .stars()
        .iter()
        .copied()
        .filter(|&s| basis.insert(s))
        .collect();
    if generators.len() as u32 > MAX_GROUP_BITS {
        return Err(Error::CapExceeded(format!(
            "gauge group of 2^{} elements exceeds 2^{MAX_GROUP_BITS}",
            generators.len()
        )));
    }
    let size = 1usize << generators.len();
    let mut elements = vec![0u64; size];
    for i in 1..size {
        elements[i] = elements[i & (i - 1)] ^ generators[i.trailing_zeros() as usize];
    }
    Ok(GaugeGroup {
        n_edges: geom.n_edges(),
        generators,
        elements,
    })
}

/// `Z = Σ_g e^{-t L_g}` with `t = wλ`.
pub fn partition_z(group: &GaugeGroup, t: f64) -> f64 {
    group
        .elements
        .iter()
        .map(|&g| (-t * loop_length(g) as f64).exp())
        .sum()
}

#[derive(Debug, Clone)]
pub struct RegionSubgroups {
    pub ga: Vec<u64>,
    pub gb: Vec<u64>,
}

pub fn region_subgroups(group: &GaugeGroup, region: &Region) -> Result<RegionSubgroups> {
    if region.n_edges_total() != group.n_edges {
        return Err(Error::DimensionMismatch {
            expected: group.n_edges,
            got: region.n_edges_total(),
        });
    }
    let a = region.mask();
    let b = region.complement().mask();
    Ok(RegionSubgroups {
        ga: group
            .elements
            .iter()
            .copied()
            .filter(|g| g & !a == 0)
            .collect(),
        gb: group
            .elements
            .iter()
            .copied()
            .filter(|g| g & !b == 0)
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CcModel {
    pub lambda: f64,
}

impl CcModel {
    pub fn new(lambda: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::InvalidParameters(format!(
                "CC coupling must be finite and non-negative, got {lambda}"
            )));
        }
        Ok(CcModel { lambda })
    }

    /// Exponent `t = wλ` of the loop-length weights in `ρ_A`.
    pub fn t(&self) -> f64 {
        CC_WEIGHT * self.lambda
    }

    pub fn is_topological(&self) -> bool {
        self.lambda < LAMBDA_C
    }
}

/// `-Σ_p B_p + Σ_s (e^{-λ Σ_{i∈s} σ^z_i} − A_s)`: each star term is a
/// positive semidefinite rank-one-per-pair operator annihilating the loop gas.
pub fn frustration_free_hamiltonian(geom: &LatticeGeometry, lambda: f64) -> Result<OperatorSum> {
    CcModel::new(lambda)?;
    let mut terms: Vec<PauliString> = plaquette_terms(geom).collect();
    for &s in geom.stars() {
        terms.extend(star_exponential(s, lambda));
        terms.push(PauliString::new(s, 0, -1.0));
    }
    OperatorSum::from_terms(terms)
}

/// Ground energy of [`frustration_free_hamiltonian`]: every star term vanishes.
pub fn frustration_free_energy(geom: &LatticeGeometry) -> f64 {
    -(geom.n_plaquettes() as f64)
}

/// Spectrum of `ρ_A` from the coset weights.
pub fn coset_spectrum(
    group: &GaugeGroup,
    region: &Region,
    model: &CcModel,
) -> Result<EntanglementSpectrum> {
    let sub = region_subgroups(group, region)?;
    let mut h = XorBasis::new();
    for &g in sub.ga.iter().chain(&sub.gb) {
        h.insert(g);
    }
    let t = model.t();
    let mut weights: BTreeMap<u64, f64> = BTreeMap::new();
    for &g in &group.elements {
        *weights.entry(h.reduce(g)).or_insert(0.0) += (-t * loop_length(g) as f64).exp();
    }
    let z: f64 = weights.values().sum();
    EntanglementSpectrum::new(weights.values().map(|w| w / z).collect())
}

/// `S_α` of the loop gas from the coset weights.
pub fn renyi_exact(
    group: &GaugeGroup,
    region: &Region,
    model: &CcModel,
    alpha: f64,
) -> Result<f64> {
    renyi(&coset_spectrum(group, region, model)?, alpha)
}

/// The sum over `G` with `w(g) = Σ_{h∈G_A, k∈G_B} e^{-t L_{hgk}}`:
/// `S_α = (1−α)^{-1} ln( Z^{-α} Σ_g e^{-t L_g} w(g)^{α−1} )`.
pub fn renyi_closed_form(
    group: &GaugeGroup,
    region: &Region,
    model: &CcModel,
    alpha: f64,
) -> Result<f64> {
    if alpha.is_nan() || alpha < 0.0 {
        return Err(Error::NegativeAlpha(alpha));
    }
    if alpha == 1.0 {
        return Err(Error::Unsupported(
            "the closed form is singular at alpha = 1; use renyi_exact".into(),
        ));
    }
    let sub = region_subgroups(group, region)?;
    let t = model.t();
    let weight = |g: u64| (-t * loop_length(g) as f64).exp();
    let z = partition_z(group, t);
    let total: f64 = group
        .elements
        .par_iter()
        .map(|&g| {
            let w: f64 = sub
                .ga
                .iter()
                .flat_map(|&h| sub.gb.iter().map(move |&k| weight(h ^ g ^ k)))
                .sum();
            weight(g) * w.powf(alpha - 1.0)
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    Ok((total.ln() - alpha * z.ln()) / (1.0 - alpha))
}

/// Coset representative for the sector with z-loop eigenvalues
/// `(l^z_1, l^z_2)`.
pub fn sector_offset(geom: &LatticeGeometry, sector: (i8, i8)) -> Result<u64> {
    geom.z_loops()?;
    let pick = |s: i8, mask: u64| -> Result<u64> {
        match s {
            1 => Ok(0),
            -1 => Ok(mask),
            _ => Err(Error::InvalidParameters(format!(
                "loop eigenvalue must be ±1, got {s}"
            ))),
        }
    };
    Ok(pick(sector.0, geom.loop_x_horizontal().mask())?
        ^ pick(sector.1, geom.loop_x_vertical().mask())?)
}

/// Normalized loop-gas state `∝ Σ_g e^{-λ L_{r⊕g}} |r ⊕ g⟩` in the given
/// z-loop sector.
pub fn cc_state_vector(
    geom: &LatticeGeometry,
    lambda: f64,
    sector: (i8, i8),
) -> Result<StateVector> {
    let model = CcModel::new(lambda)?;
    let n = geom.n_edges();
    if n > crate::ed::MAX_SITES {
        return Err(Error::CapExceeded(format!(
            "{n} spins exceed the state-vector cap"
        )));
    }
    let group = enumerate_group(geom)?;
    let r = sector_offset(geom, sector)?;
    let mut v = StateVector::zeros(n);
    let amps = v.amplitudes_mut();
    for &g in group.elements() {
        let c = r ^ g;
        amps[c as usize] = (-model.lambda * loop_length(c) as f64).exp();
    }
    v.normalize();
    Ok(v)
}
