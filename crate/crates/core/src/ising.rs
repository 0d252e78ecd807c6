//! Transverse-field Ising chains: exact free-fermion solution, exact
//! diagonalization of the chain variants, and the chain dual of the
//! frustration-free and horizontal-field models.
//!
//! Chains use `H = −J Σ τ^x_μ τ^x_{μ+1} − h Σ τ^z_μ − g Σ τ^x_μ`. On the
//! computational basis `τ^x` acts as `X` and `τ^z` as `Z`.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ed::{connected_correlator, ground_space, ground_space_projected, SolverConfig};
use crate::entanglement::EntanglementSpectrum;
use crate::error::{Error, Result};
use crate::lattice::{Boundary, LatticeGeometry, Region};
use crate::pauli::{matvec, OperatorSum, PauliString};
use crate::state::{dot, StateVector};
use crate::sweep::{entropies, fit_correlation_length, validate_alphas, SweepResult, SweepRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainBoundary {
    Open,
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub n: usize,
    /// `J`
    pub coupling: f64,
    /// `h`
    pub transverse: f64,
    /// `g`
    pub longitudinal: f64,
    pub boundary: ChainBoundary,
}

impl ChainSpec {
    pub fn new(n: usize, coupling: f64, transverse: f64, boundary: ChainBoundary) -> Self {
        ChainSpec {
            n,
            coupling,
            transverse,
            longitudinal: 0.0,
            boundary,
        }
    }

    /// Chain dual of the frustration-free model: `J = λ`, `h = 1`.
    pub fn ff_dual(n: usize, lambda: f64, boundary: ChainBoundary) -> Self {
        ChainSpec::new(n, lambda, 1.0, boundary)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.n > 63 {
            return Err(Error::InvalidParameters(format!(
                "chain length {} outside 2..=63",
                self.n
            )));
        }
        if [self.coupling, self.transverse, self.longitudinal]
            .iter()
            .any(|c| !c.is_finite())
        {
            return Err(Error::InvalidParameters("non-finite chain coupling".into()));
        }
        Ok(())
    }

    fn bonds(&self) -> Vec<(usize, usize)> {
        let mut b: Vec<(usize, usize)> = (0..self.n - 1).map(|m| (m, m + 1)).collect();
        if self.boundary == ChainBoundary::Periodic {
            b.push((self.n - 1, 0));
        }
        b
    }

    pub fn operator(&self) -> Result<OperatorSum> {
        self.validate()?;
        let mut terms = Vec::new();
        for (a, b) in self.bonds() {
            terms.push(PauliString::x_on((1 << a) | (1 << b)).scaled(-self.coupling));
        }
        for m in 0..self.n {
            terms.push(PauliString::z(m).scaled(-self.transverse));
            terms.push(PauliString::x(m).scaled(-self.longitudinal));
        }
        OperatorSum::from_terms(terms)
    }

    /// `Π τ^z`
    pub fn parity(&self) -> PauliString {
        PauliString::z_on((1u64 << self.n) - 1)
    }
}

/// Pfaffian of a real antisymmetric matrix by Parlett–Reid elimination with
/// partial pivoting.
pub fn pfaffian(m: &DMatrix<f64>) -> Result<f64> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: m.ncols(),
        });
    }
    let scale = m.amax().max(1.0);
    if (m + m.transpose()).amax() > 1e-12 * scale {
        return Err(Error::InvalidParameters(
            "matrix is not antisymmetric".into(),
        ));
    }
    if n % 2 == 1 {
        return Ok(0.0);
    }
    let mut a = m.clone();
    let mut pf = 1.0;
    for k in (0..n.saturating_sub(1)).step_by(2) {
        let (mut kp, mut best) = (k + 1, a[(k + 1, k)].abs());
        for i in k + 2..n {
            if a[(i, k)].abs() > best {
                kp = i;
                best = a[(i, k)].abs();
            }
        }
        if kp != k + 1 {
            a.swap_rows(k + 1, kp);
            a.swap_columns(k + 1, kp);
            pf = -pf;
        }
        let pivot = a[(k, k + 1)];
        if pivot == 0.0 {
            return Ok(0.0);
        }
        pf *= pivot;
        for i in k + 2..n {
            let ti = a[(k, i)] / pivot;
            for j in k + 2..n {
                let tj = a[(k, j)] / pivot;
                a[(i, j)] += ti * a[(j, k + 1)] - a[(i, k + 1)] * tj;
            }
        }
    }
    Ok(pf)
}

/// Gaussian ground state of a chain without longitudinal field.
///
/// Majoranas `c_{2μ}`, `c_{2μ+1}` of site μ only couple even to odd, so the
/// correlation matrix `Γ_{jk} = ⟨i c_j c_k⟩` is fixed by its even–odd block
/// `G`, the negative polar factor of the coupling block.
#[derive(Debug, Clone)]
pub struct FermionSolution {
    pub spec: ChainSpec,
    pub energy: f64,
    /// Single-particle energies, ascending.
    pub modes: Vec<f64>,
    g: DMatrix<f64>,
}

const PERIODIC_SIGN: f64 = 1.0;

fn solve_block(
    spec: &ChainSpec,
    boundary_sign: f64,
) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>, DMatrix<f64>) {
    let n = spec.n;
    let mut b = DMatrix::zeros(n, n);
    for m in 0..n {
        b[(m, m)] = 2.0 * spec.transverse;
    }
    for m in 0..n - 1 {
        b[(m + 1, m)] = -2.0 * spec.coupling;
    }
    if spec.boundary == ChainBoundary::Periodic {
        b[(0, n - 1)] += boundary_sign * 2.0 * spec.coupling;
    }
    let svd = b.clone().svd(true, true);
    let u = svd.u.expect("requested");
    let vt = svd.v_t.expect("requested");
    (b, svd.singular_values.iter().copied().collect(), u, vt)
}

/// Exact ground state. Periodic chains are restricted to the even sector
/// `Π τ^z = +1`.
pub fn tfim_solve(spec: &ChainSpec) -> Result<FermionSolution> {
    match spec.boundary {
        ChainBoundary::Open => tfim_solve_sector(spec, None),
        ChainBoundary::Periodic => tfim_solve_sector(spec, Some(1)),
    }
}

/// Lowest state with parity `Π τ^z = parity`, or the global ground state for
/// `None`. Periodic chains require a parity.
pub fn tfim_solve_sector(spec: &ChainSpec, parity: Option<i8>) -> Result<FermionSolution> {
    spec.validate()?;
    if spec.longitudinal != 0.0 {
        return Err(Error::Unsupported(format!(
            "longitudinal field {} breaks the free-fermion structure",
            spec.longitudinal
        )));
    }
    if let Some(p) = parity {
        if p != 1 && p != -1 {
            return Err(Error::InvalidParameters(format!(
                "parity must be ±1, got {p}"
            )));
        }
    }
    let sign = match (spec.boundary, parity) {
        (ChainBoundary::Periodic, None) => {
            return Err(Error::InvalidParameters(
                "periodic chains need a parity sector".into(),
            ))
        }
        (ChainBoundary::Periodic, Some(p)) => PERIODIC_SIGN * f64::from(p),
        (ChainBoundary::Open, _) => 0.0,
    };
    let (_, sv, u, vt) = solve_block(spec, sign);
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[a].total_cmp(&sv[b]));
    let mut flips = vec![1.0; sv.len()];
    let mut energy = -0.5 * sv.iter().sum::<f64>();
    let build = |flips: &[f64]| {
        let mut w = u.clone();
        for (j, f) in flips.iter().enumerate() {
            w.column_mut(j).scale_mut(-f);
        }
        w * &vt
    };
    let mut sol = FermionSolution {
        spec: *spec,
        energy,
        modes: order.iter().map(|&i| sv[i]).collect(),
        g: build(&flips),
    };
    if let Some(p) = parity {
        if (sol.parity()? - f64::from(p)).abs() > 0.5 {
            flips[order[0]] = -1.0;
            energy += sv[order[0]];
            sol.g = build(&flips);
            sol.energy = energy;
        }
    }
    Ok(sol)
}

impl FermionSolution {
    pub fn n(&self) -> usize {
        self.spec.n
    }

    /// Full `2N × 2N` correlation matrix.
    pub fn gamma(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut gm = DMatrix::zeros(2 * n, 2 * n);
        for a in 0..n {
            for b in 0..n {
                gm[(2 * a, 2 * b + 1)] = self.g[(a, b)];
                gm[(2 * b + 1, 2 * a)] = -self.g[(a, b)];
            }
        }
        gm
    }

    pub fn tau_z(&self, mu: usize) -> f64 {
        -self.g[(mu, mu)]
    }

    /// `⟨τ^x_μ τ^x_ν⟩` for `μ < ν`, as a Pfaffian over the Majoranas between
    /// the two sites.
    pub fn tau_xx(&self, mu: usize, nu: usize) -> Result<f64> {
        if mu >= nu || nu >= self.n() {
            return Err(Error::IndexOutOfRange {
                what: "site pair",
                index: nu,
                len: self.n(),
            });
        }
        let gm = self.gamma();
        let idx: Vec<usize> = (2 * mu + 1..=2 * nu).collect();
        let sub = DMatrix::from_fn(idx.len(), idx.len(), |i, j| gm[(idx[i], idx[j])]);
        let sign = if (nu - mu) % 2 == 0 { 1.0 } else { -1.0 };
        Ok(sign * pfaffian(&sub)?)
    }

    /// `⟨Π τ^z⟩`
    pub fn parity(&self) -> Result<f64> {
        let sign = if self.n() % 2 == 0 { 1.0 } else { -1.0 };
        Ok(sign * pfaffian(&self.gamma())?)
    }

    /// Entanglement spectrum of the first `l` sites.
    pub fn block_spectrum(&self, l: usize) -> Result<EntanglementSpectrum> {
        if l == 0 || l >= self.n() {
            return Err(Error::InvalidRegion(format!(
                "block of {l} sites in a chain of {}",
                self.n()
            )));
        }
        let n = self.n();
        let mut nus: Vec<f64> = self
            .g
            .view((0, 0), (l, l))
            .singular_values()
            .iter()
            .map(|v| v.min(1.0))
            .collect();
        nus.sort_by(|a, b| b.total_cmp(a));
        // G is orthogonal, so 1 − ν_k² are the squared singular values of the
        // off-diagonal block; this keeps (1 − ν)/2 accurate when ν ≈ 1.
        let mut sig: Vec<f64> = self
            .g
            .view((0, l), (l, n - l))
            .singular_values()
            .iter()
            .copied()
            .collect();
        sig.sort_by(f64::total_cmp);
        let pad = l.saturating_sub(sig.len());
        let mut probs = vec![1.0];
        for (k, nu) in nus.into_iter().enumerate() {
            let s = if k < pad { 0.0 } else { sig[k - pad] };
            let (p, q) = ((1.0 + nu) / 2.0, s * s / (2.0 * (1.0 + nu)));
            probs = probs.iter().flat_map(|&x| [x * p, x * q]).collect();
        }
        EntanglementSpectrum::new(probs)
    }
}

/// `|⟨τ^x_μ τ^x_{μ+1}⟩ − ⟨τ^x_μ⟩⟨τ^x_{μ+1}⟩|` in the exact ground state. The
/// product of a star-only state factorizes across every bond; the residual
/// measures the loss of that factorization.
pub fn dual_factorization_residual(spec: &ChainSpec, bond: usize) -> Result<f64> {
    let sol = tfim_solve(spec)?;
    if bond + 1 >= spec.n {
        return Err(Error::IndexOutOfRange {
            what: "bond",
            index: bond,
            len: spec.n - 1,
        });
    }
    // parity eigenstates have ⟨τ^x⟩ = 0
    Ok(sol.tau_xx(bond, bond + 1)?.abs())
}

/// Ground energy of the horizontal-field model in the `(+1, +1)` sector of
/// the two z loops, from its decoupled periodic chains.
pub fn horizontal_z_dual_energy(geom: &LatticeGeometry, lambda_h: f64) -> Result<f64> {
    if geom.boundary() != Boundary::Torus {
        return Err(Error::Unsupported("chain dual requires a torus".into()));
    }
    let ring = ChainSpec::new(geom.lx(), -lambda_h, 1.0, ChainBoundary::Periodic);
    let e = tfim_solve(&ring)?.energy;
    Ok(-(geom.n_plaquettes() as f64) + geom.ly() as f64 * e)
}

/// The two symmetry-broken chain perturbations of `−Σ σ^z σ^z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainVariant {
    /// `−λ Σ σ^x`
    V1,
    /// `−λ Σ (σ^z/2 + σ^x)`
    V2,
}

impl ChainVariant {
    pub fn spec(&self, n: usize, lambda: f64) -> ChainSpec {
        let mut s = ChainSpec::new(n, 1.0, lambda, ChainBoundary::Open);
        if *self == ChainVariant::V2 {
            s.longitudinal = lambda / 2.0;
        }
        s
    }
}

fn magnetization(n: usize) -> OperatorSum {
    OperatorSum::from_terms((0..n).map(PauliString::x)).expect("finite")
}

/// Ground state of a chain variant. For `V1` a quasi-degenerate lowest pair
/// is resolved into its positive-magnetization combination.
pub fn chain_ground_state(
    variant: ChainVariant,
    n: usize,
    lambda: f64,
    cfg: &SolverConfig,
) -> Result<(StateVector, f64)> {
    let spec = variant.spec(n, lambda);
    let h = spec.operator()?;
    if variant == ChainVariant::V2 {
        let gs = ground_space(&h, n, &cfg.clone().with_k(1))?;
        return Ok((gs.states[0].clone(), gs.energies[0]));
    }
    let gs = ground_space(&h, n, &cfg.clone().with_k(3))?;
    let e = &gs.energies;
    if e[1] - e[0] >= 0.25 * (e[2] - e[0]) {
        return Ok((gs.states[0].clone(), e[0]));
    }
    let m = magnetization(n);
    let img: Vec<StateVector> = gs.states[..2]
        .iter()
        .map(|s| matvec(&m, s))
        .collect::<Result<_>>()?;
    let proj = DMatrix::from_fn(2, 2, |i, j| {
        dot(gs.states[i].amplitudes(), img[j].amplitudes())
    });
    let proj = (&proj + proj.transpose()) * 0.5;
    let eig = SymmetricEigen::new(proj);
    let top = eig.eigenvalues.imax();
    let y = eig.eigenvectors.column(top);
    let mut amps = vec![0.0; gs.states[0].dim()];
    for (c, s) in y.iter().zip(&gs.states) {
        amps.iter_mut()
            .zip(s.amplitudes())
            .for_each(|(a, b)| *a += c * b);
    }
    let mut v = StateVector::from_amplitudes(amps)?;
    v.normalize();
    if expectation_sum(&v, &m)? < 0.0 {
        v.amplitudes_mut().iter_mut().for_each(|a| *a = -*a);
    }
    let energy = y[0] * y[0] * e[0] + y[1] * y[1] * e[1];
    Ok((v, energy))
}

fn expectation_sum(v: &StateVector, op: &OperatorSum) -> Result<f64> {
    v.dot(&matvec(op, v)?)
}

/// First `n/2` sites.
pub fn half_chain(n: usize) -> Result<Region> {
    Region::from_edges("half", &(0..n / 2).collect::<Vec<_>>(), n)
}

fn chain_xi(n: usize, v: &StateVector) -> Result<Option<f64>> {
    let start = n / 4;
    let mut pts = Vec::new();
    for r in 1..=n / 2 {
        if start + r < n {
            let c = connected_correlator(v, &PauliString::x(start), &PauliString::x(start + r))?;
            pts.push((r as f64, c));
        }
    }
    Ok(fit_correlation_length(&pts))
}

/// Half-chain entropies along a λ path, solved in parallel.
pub fn chain_sweep(
    variant: ChainVariant,
    n: usize,
    lambdas: &[f64],
    alphas: &[f64],
    rank_tol: f64,
    cfg: &SolverConfig,
) -> Result<SweepResult> {
    validate_alphas(alphas)?;
    cfg.validate()?;
    if lambdas.is_empty() || lambdas.iter().any(|l| !l.is_finite()) {
        return Err(Error::InvalidSweep(
            "λ path must be non-empty and finite".into(),
        ));
    }
    if n > cfg.max_sites {
        return Err(Error::CapExceeded(format!(
            "{n} spins exceed the solver cap of {}",
            cfg.max_sites
        )));
    }
    variant.spec(n, 0.0).validate()?;
    let region = half_chain(n)?;
    let rows = lambdas
        .par_iter()
        .enumerate()
        .map(|(i, &lambda)| {
            let params = vec![("lambda".to_string(), lambda)];
            let point = || -> Result<SweepRow> {
                let (v, energy) = chain_ground_state(variant, n, lambda, cfg)?;
                let (s, rank, spectrum) = entropies(&v, &region, alphas, rank_tol)?;
                Ok(SweepRow {
                    index: i,
                    lambda,
                    params: params.clone(),
                    entropies: s,
                    rank,
                    energy,
                    lz1: None,
                    lx2: None,
                    sector_values: None,
                    commutator: None,
                    xi: chain_xi(n, &v)?,
                    spectrum,
                    failure: None,
                })
            };
            point()
                .unwrap_or_else(|e| SweepRow::failed(i, lambda, params.clone(), alphas.len(), &e))
        })
        .collect();
    Ok(SweepResult {
        alphas: alphas.to_vec(),
        region: region.label,
        rows,
        seed: cfg.seed,
    })
}

/// Exact diagonalization of a chain restricted to a parity sector.
pub fn chain_ed_sector(
    spec: &ChainSpec,
    parity: i8,
    cfg: &SolverConfig,
) -> Result<(StateVector, f64)> {
    let p = spec.parity().scaled(f64::from(parity));
    let gs = ground_space_projected(&spec.operator()?, spec.n, &cfg.clone().with_k(1), &[p])?;
    Ok((gs.states[0].clone(), gs.energies[0]))
}
