//! Real Pauli strings over edge spins and the model Hamiltonians.
//!
//! A string `c · X^x Z^z` is stored as two bit masks and a real coefficient.
//! Acting on a z-basis configuration `b` (bit set = spin flipped down), the
//! `Z` factors act first: `X^x Z^z |b⟩ = (-1)^{|z ∧ b|} |b ⊕ x⟩`. Only `σ^x`,
//! `σ^z` and identity factors appear in these models, so every matrix element
//! is real.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{LatticeGeometry, LoopKind, LoopSpec};
use crate::state::StateVector;

/// Coefficients below this magnitude are dropped when terms are merged.
pub const MERGE_THRESHOLD: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PauliString {
    pub xmask: u64,
    pub zmask: u64,
    pub coeff: f64,
}

#[inline]
fn parity(m: u64) -> f64 {
    if m.count_ones() & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

impl PauliString {
    pub fn new(xmask: u64, zmask: u64, coeff: f64) -> Self {
        PauliString {
            xmask,
            zmask,
            coeff,
        }
    }

    pub fn identity(coeff: f64) -> Self {
        Self::new(0, 0, coeff)
    }

    pub fn x(edge: usize) -> Self {
        Self::new(1 << edge, 0, 1.0)
    }

    pub fn z(edge: usize) -> Self {
        Self::new(0, 1 << edge, 1.0)
    }

    pub fn x_on(mask: u64) -> Self {
        Self::new(mask, 0, 1.0)
    }

    pub fn z_on(mask: u64) -> Self {
        Self::new(0, mask, 1.0)
    }

    pub fn from_loop(l: &LoopSpec) -> Self {
        match l.kind {
            LoopKind::Z => Self::z_on(l.mask()),
            LoopKind::X => Self::x_on(l.mask()),
        }
    }

    pub fn scaled(self, c: f64) -> Self {
        Self {
            coeff: self.coeff * c,
            ..self
        }
    }

    /// Image of basis configuration `b` and the accompanying real factor.
    #[inline]
    pub fn apply(&self, b: u64) -> (u64, f64) {
        (b ^ self.xmask, self.coeff * parity(self.zmask & b))
    }

    /// Operator product `self · other`.
    pub fn mul(&self, other: &PauliString) -> PauliString {
        let sign = parity(self.zmask & other.xmask);
        PauliString {
            xmask: self.xmask ^ other.xmask,
            zmask: self.zmask ^ other.zmask,
            coeff: self.coeff * other.coeff * sign,
        }
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        ((self.xmask & other.zmask).count_ones() + (self.zmask & other.xmask).count_ones()) % 2 == 0
    }

    /// Whether the real matrix is symmetric (an even number of `XZ` overlaps).
    pub fn is_symmetric(&self) -> bool {
        (self.xmask & self.zmask).count_ones() % 2 == 0
    }

    fn max_edge(&self) -> usize {
        64 - (self.xmask | self.zmask).leading_zeros() as usize
    }
}

/// A sum of Pauli strings with duplicate `(xmask, zmask)` pairs merged.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OperatorSum {
    terms: Vec<PauliString>,
}

impl OperatorSum {
    pub fn new() -> Self {
        Self::default()
    }

    /// Merges duplicates, drops negligible coefficients and sorts the terms.
    pub fn from_terms(terms: impl IntoIterator<Item = PauliString>) -> Result<Self> {
        let mut merged: BTreeMap<(u64, u64), f64> = BTreeMap::new();
        for t in terms {
            if !t.coeff.is_finite() {
                return Err(Error::InvalidParameters(format!(
                    "non-finite coefficient {}",
                    t.coeff
                )));
            }
            *merged.entry((t.xmask, t.zmask)).or_insert(0.0) += t.coeff;
        }
        let terms = merged
            .into_iter()
            .filter(|(_, c)| c.abs() >= MERGE_THRESHOLD)
            .map(|((x, z), c)| PauliString::new(x, z, c))
            .collect();
        Ok(OperatorSum { terms })
    }

    pub fn single(p: PauliString) -> Self {
        Self::from_terms([p]).expect("finite coefficient")
    }

    pub fn identity() -> Self {
        Self::single(PauliString::identity(1.0))
    }

    pub fn terms(&self) -> &[PauliString] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn plus(&self, other: &OperatorSum) -> OperatorSum {
        Self::from_terms(self.terms.iter().chain(other.terms.iter()).copied())
            .expect("finite coefficients")
    }

    pub fn scaled(&self, c: f64) -> OperatorSum {
        Self::from_terms(self.terms.iter().map(|t| t.scaled(c))).expect("finite coefficients")
    }

    pub fn mul(&self, other: &OperatorSum) -> OperatorSum {
        Self::from_terms(
            self.terms
                .iter()
                .flat_map(|a| other.terms.iter().map(move |b| a.mul(b))),
        )
        .expect("finite coefficients")
    }

    /// Whether every term commutes with `p`.
    pub fn commutes_with(&self, p: &PauliString) -> bool {
        self.commutator(&OperatorSum::single(*p)).is_empty()
    }

    /// `[self, other]` with merged terms.
    pub fn commutator(&self, other: &OperatorSum) -> OperatorSum {
        self.mul(other).plus(&other.mul(self).scaled(-1.0))
    }

    pub fn is_symmetric(&self) -> bool {
        self.terms.iter().all(PauliString::is_symmetric)
    }

    /// Smallest number of spins the operator can act on.
    pub fn min_sites(&self) -> usize {
        self.terms
            .iter()
            .map(PauliString::max_edge)
            .max()
            .unwrap_or(0)
    }
}

/// Perturbation families added to the toric code.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PerturbationSpec {
    None,
    /// `Σ_s exp(-λ Σ_{i∈s} σ^z_i)`, one uniform λ for every star.
    CcExp {
        lambda: f64,
    },
    /// `λ_h Σ_{i ∈ horizontal} σ^z_i`.
    HorizontalZ {
        lambda_h: f64,
    },
    /// `λ_z Σ_i σ^z_i`.
    UniformZ {
        lambda_z: f64,
    },
    /// `Σ_i (λ_z σ^z_i + λ_x σ^x_i)`.
    UniformXz {
        lambda_x: f64,
        lambda_z: f64,
    },
}

impl PerturbationSpec {
    pub fn validate(&self) -> Result<()> {
        if let Some((name, v)) = self.params().into_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidParameters(format!(
                "{name} = {v} is not finite"
            )));
        }
        if let PerturbationSpec::CcExp { lambda } = self {
            if *lambda < 0.0 {
                return Err(Error::InvalidParameters(format!(
                    "CC exponent must be non-negative, got {lambda}"
                )));
            }
        }
        Ok(())
    }

    /// Named parameter values, in a fixed order.
    pub fn params(&self) -> Vec<(&'static str, f64)> {
        match *self {
            PerturbationSpec::None => vec![],
            PerturbationSpec::CcExp { lambda } => vec![("lambda", lambda)],
            PerturbationSpec::HorizontalZ { lambda_h } => vec![("lambda_h", lambda_h)],
            PerturbationSpec::UniformZ { lambda_z } => vec![("lambda_z", lambda_z)],
            PerturbationSpec::UniformXz { lambda_x, lambda_z } => {
                vec![("lambda_x", lambda_x), ("lambda_z", lambda_z)]
            }
        }
    }

    /// Whether the perturbation commutes with every plaquette.
    pub fn is_gauge_invariant(&self) -> bool {
        !matches!(self, PerturbationSpec::UniformXz { lambda_x, .. } if *lambda_x != 0.0)
    }
}

/// `-Σ_s A_s` with `A_s` the `σ^x` product on star `s`.
pub fn star_terms(geom: &LatticeGeometry) -> impl Iterator<Item = PauliString> + '_ {
    geom.stars().iter().map(|&m| PauliString::new(m, 0, -1.0))
}

/// `-Σ_p B_p` with `B_p` the `σ^z` product on plaquette `p`.
pub fn plaquette_terms(geom: &LatticeGeometry) -> impl Iterator<Item = PauliString> + '_ {
    geom.plaquettes()
        .iter()
        .map(|&m| PauliString::new(0, m, -1.0))
}

/// `exp(-λ Σ_{i∈s} σ^z_i) = Π_{i∈s} (cosh λ - sinh λ σ^z_i)`, expanded into
/// one diagonal string per subset of the star.
pub fn star_exponential(star: u64, lambda: f64) -> Vec<PauliString> {
    let edges = crate::lattice::edges_of(star);
    let (c, s) = (lambda.cosh(), -lambda.sinh());
    (0u32..1 << edges.len())
        .map(|subset| {
            let mut z = 0u64;
            let mut coeff = 1.0;
            for (k, &e) in edges.iter().enumerate() {
                if subset >> k & 1 == 1 {
                    z |= 1 << e;
                    coeff *= s;
                } else {
                    coeff *= c;
                }
            }
            PauliString::new(0, z, coeff)
        })
        .collect()
}

/// `-Σ_s A_s - Σ_p B_p + V` for the given perturbation.
pub fn build_model(geom: &LatticeGeometry, spec: &PerturbationSpec) -> Result<OperatorSum> {
    spec.validate()?;
    let n = geom.n_edges();
    let mut terms: Vec<PauliString> = star_terms(geom).chain(plaquette_terms(geom)).collect();
    match *spec {
        PerturbationSpec::None => {}
        PerturbationSpec::CcExp { lambda } => {
            for &s in geom.stars() {
                terms.extend(star_exponential(s, lambda));
            }
        }
        PerturbationSpec::HorizontalZ { lambda_h } => {
            terms.extend(
                geom.horizontal_edges()
                    .into_iter()
                    .map(|e| PauliString::z(e).scaled(lambda_h)),
            );
        }
        PerturbationSpec::UniformZ { lambda_z } => {
            terms.extend((0..n).map(|e| PauliString::z(e).scaled(lambda_z)));
        }
        PerturbationSpec::UniformXz { lambda_x, lambda_z } => {
            for e in 0..n {
                terms.push(PauliString::z(e).scaled(lambda_z));
                terms.push(PauliString::x(e).scaled(lambda_x));
            }
        }
    }
    OperatorSum::from_terms(terms)
}

/// Matrix-free form of an [`OperatorSum`] on `n` spins: strings grouped by
/// their flip mask, with the diagonal group tabulated once.
#[derive(Debug, Clone)]
pub struct CompiledOperator {
    n_sites: usize,
    diagonal: Option<Vec<f64>>,
    flips: Vec<(u64, Vec<(u64, f64)>)>,
}

const CHUNK: usize = 1 << 12;

impl CompiledOperator {
    pub fn new(op: &OperatorSum, n_sites: usize) -> Result<Self> {
        if n_sites > 40 {
            return Err(Error::CapExceeded(format!(
                "{n_sites} spins cannot be stored as a dense vector"
            )));
        }
        if op.min_sites() > n_sites {
            return Err(Error::DimensionMismatch {
                expected: n_sites,
                got: op.min_sites(),
            });
        }
        let mut groups: BTreeMap<u64, Vec<(u64, f64)>> = BTreeMap::new();
        for t in op.terms() {
            groups.entry(t.xmask).or_default().push((t.zmask, t.coeff));
        }
        let diagonal = groups.remove(&0).map(|zs| {
            let mut d = vec![0.0; 1 << n_sites];
            d.par_chunks_mut(CHUNK).enumerate().for_each(|(c, out)| {
                let base = (c * CHUNK) as u64;
                for (k, v) in out.iter_mut().enumerate() {
                    let b = base + k as u64;
                    *v = zs.iter().map(|&(z, cf)| cf * parity(z & b)).sum();
                }
            });
            d
        });
        Ok(CompiledOperator {
            n_sites,
            diagonal,
            flips: groups.into_iter().collect(),
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        1 << self.n_sites
    }

    /// `out = O v`, parallel over disjoint output chunks.
    pub fn apply_into(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        let dim = self.dim();
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: v.len(),
            });
        }
        if out.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: out.len(),
            });
        }
        out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, out)| {
            let base = c * CHUNK;
            for (k, o) in out.iter_mut().enumerate() {
                let i = base + k;
                let mut acc = match &self.diagonal {
                    Some(d) => d[i] * v[i],
                    None => 0.0,
                };
                for (x, zs) in &self.flips {
                    // P|j⟩ lands on i exactly when j = i ⊕ x
                    let j = (i as u64) ^ x;
                    let s: f64 = zs.iter().map(|&(z, cf)| cf * parity(z & j)).sum();
                    acc += s * v[j as usize];
                }
                *o = acc;
            }
        });
        Ok(())
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.apply_into(v, &mut out)?;
        Ok(out)
    }
}

/// Exact action of `op` on a state vector without materializing a matrix.
pub fn matvec(op: &OperatorSum, v: &StateVector) -> Result<StateVector> {
    let compiled = CompiledOperator::new(op, v.n_sites())?;
    let out = compiled.apply(v.amplitudes())?;
    StateVector::from_amplitudes(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense;

    #[test]
    fn apply_single_flips_and_signs() {
        assert_eq!(PauliString::x(0).apply(0), (1, 1.0));
        assert_eq!(PauliString::z(0).apply(1), (1, -1.0));
        let g = LatticeGeometry::torus(2, 2).unwrap();
        let star = PauliString::x_on(g.stars()[0]);
        let (b1, s1) = star.apply(0b1010_0000);
        let (b2, s2) = star.apply(b1);
        assert_eq!((b2, s1 * s2), (0b1010_0000, 1.0));
    }

    #[test]
    fn product_convention_matches_sequential_application() {
        let a = PauliString::new(0b011, 0b110, 1.0);
        let b = PauliString::new(0b101, 0b011, 1.0);
        let ab = a.mul(&b);
        for cfg in 0..8u64 {
            let (c1, s1) = b.apply(cfg);
            let (c2, s2) = a.apply(c1);
            assert_eq!(ab.apply(cfg), (c2, s1 * s2));
        }
    }

    #[test]
    fn toric_code_term_counts() {
        let g = LatticeGeometry::torus(2, 2).unwrap();
        let h = build_model(&g, &PerturbationSpec::None).unwrap();
        assert_eq!(h.len(), 8);
        assert!(h.terms().iter().all(|t| t.coeff == -1.0));
        let h = build_model(
            &g,
            &PerturbationSpec::UniformXz {
                lambda_x: 0.03,
                lambda_z: 0.02,
            },
        )
        .unwrap();
        assert_eq!(h.len(), 8 + 16);
    }

    #[test]
    fn star_exponential_matches_dense_exponential() {
        let g = LatticeGeometry::torus(2, 2).unwrap();
        let lambda = 0.3;
        let n = g.n_edges();
        for &s in g.stars() {
            let op = OperatorSum::from_terms(star_exponential(s, lambda)).unwrap();
            assert_eq!(op.len(), 16);
            let m = dense::dense_matrix(&op, n).unwrap();
            for b in 0..1usize << n {
                let sz: f64 = crate::lattice::edges_of(s)
                    .iter()
                    .map(|&e| if b >> e & 1 == 1 { -1.0 } else { 1.0 })
                    .sum();
                let want = (-lambda * sz).exp();
                assert!((m[(b, b)] - want).abs() < 1e-12);
                for c in 0..1usize << n {
                    if c != b {
                        assert_eq!(m[(b, c)], 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn models_are_symmetric_and_commute_as_expected() {
        let g = LatticeGeometry::torus(3, 2).unwrap();
        let tc = build_model(&g, &PerturbationSpec::None).unwrap();
        let (lz1, lx2) = g.wilson_loops();
        let (_, lz2) = g.z_loops().unwrap();
        for spec in [
            PerturbationSpec::None,
            PerturbationSpec::CcExp { lambda: 0.3 },
            PerturbationSpec::HorizontalZ { lambda_h: 0.2 },
            PerturbationSpec::UniformZ { lambda_z: 0.1 },
            PerturbationSpec::UniformXz {
                lambda_x: 0.05,
                lambda_z: 0.025,
            },
        ] {
            let h = build_model(&g, &spec).unwrap();
            assert!(h.is_symmetric());
            let gauge_inv = spec.is_gauge_invariant();
            for &p in g.plaquettes() {
                assert_eq!(
                    h.commutes_with(&PauliString::z_on(p)),
                    gauge_inv,
                    "{spec:?}"
                );
            }
            assert_eq!(
                h.commutes_with(&PauliString::from_loop(&lz1)),
                gauge_inv,
                "{spec:?}"
            );
            assert_eq!(h.commutes_with(&PauliString::from_loop(&lz2)), gauge_inv);
            let bare = matches!(spec, PerturbationSpec::None);
            assert_eq!(h.commutes_with(&PauliString::from_loop(&lx2)), bare);
        }
        for &s in g.stars() {
            assert!(tc.commutes_with(&PauliString::x_on(s)));
        }
        let z1 = PauliString::from_loop(&lz1);
        assert!(!z1.commutes_with(&PauliString::from_loop(&g.loop_x_horizontal())));
        assert!(z1.commutes_with(&PauliString::from_loop(&lx2)));
    }

    #[test]
    fn matvec_identity_and_dense_agreement() {
        let g = LatticeGeometry::torus(2, 2).unwrap();
        let v = StateVector::random(8, 7);
        let w = matvec(&OperatorSum::identity(), &v).unwrap();
        assert_eq!(w.amplitudes(), v.amplitudes());

        let h = build_model(
            &g,
            &PerturbationSpec::UniformXz {
                lambda_x: 0.05,
                lambda_z: 0.025,
            },
        )
        .unwrap();
        let dense_h = dense::kron_matrix(&h, 8).unwrap();
        let hv = matvec(&h, &v).unwrap();
        let want = &dense_h * nalgebra::DVector::from_column_slice(v.amplitudes());
        for (a, b) in hv.amplitudes().iter().zip(want.iter()) {
            assert!((a - b).abs() < 1e-13);
        }
        let up = StateVector::basis(8, 0);
        let hu = matvec(&build_model(&g, &PerturbationSpec::None).unwrap(), &up).unwrap();
        let col = dense::kron_matrix(&build_model(&g, &PerturbationSpec::None).unwrap(), 8)
            .unwrap()
            .column(0)
            .into_owned();
        for (a, b) in hu.amplitudes().iter().zip(col.iter()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn matvec_dimension_mismatch() {
        let op = OperatorSum::single(PauliString::x(5));
        let v = StateVector::basis(3, 0);
        assert!(matches!(
            matvec(&op, &v),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn rejects_bad_parameters() {
        let g = LatticeGeometry::torus(2, 2).unwrap();
        assert!(build_model(&g, &PerturbationSpec::CcExp { lambda: -0.1 }).is_err());
        assert!(build_model(&g, &PerturbationSpec::UniformZ { lambda_z: f64::NAN }).is_err());
    }

    #[test]
    fn merging_drops_cancelled_terms() {
        let op = OperatorSum::from_terms([
            PauliString::new(1, 2, 0.5),
            PauliString::new(1, 2, -0.5),
            PauliString::new(0, 1, 1e-16),
            PauliString::new(4, 0, 2.0),
        ])
        .unwrap();
        assert_eq!(op.terms(), &[PauliString::new(4, 0, 2.0)]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn matvec_is_linear(seed in 0u64..1000, a in -2.0f64..2.0, b in -2.0f64..2.0) {
                let g = LatticeGeometry::torus(2, 2).unwrap();
                let h = build_model(&g, &PerturbationSpec::CcExp { lambda: 0.3 }).unwrap();
                let u = StateVector::random(8, seed);
                let v = StateVector::random(8, seed + 1);
                let mix: Vec<f64> = u.amplitudes().iter().zip(v.amplitudes())
                    .map(|(x, y)| a * x + b * y).collect();
                let lhs = matvec(&h, &StateVector::from_amplitudes(mix).unwrap()).unwrap();
                let hu = matvec(&h, &u).unwrap();
                let hv = matvec(&h, &v).unwrap();
                for i in 0..256 {
                    let rhs = a * hu.amplitudes()[i] + b * hv.amplitudes()[i];
                    prop_assert!((lhs.amplitudes()[i] - rhs).abs() < 1e-13);
                }
            }
        }
    }
}
