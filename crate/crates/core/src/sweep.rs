//! λ sweeps, finite-difference derivatives of `S_α(λ)`, α-splitting and
//! differential local convertibility verdicts.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ed::{
    connected_correlator, expectation_string, ground_space, select_sector_strings, SolverConfig,
};
use crate::entanglement::{renyi_with_tau, schmidt_rank, schmidt_spectrum, RANK_TOL};
use crate::error::{Error, Result};
use crate::lattice::{Boundary, EdgeKind, LatticeGeometry, Region};
use crate::pauli::{build_model, PauliString, PerturbationSpec};
use crate::state::StateVector;

/// Default derivative significance threshold, nats per unit λ.
pub const EPSILON: f64 = 1e-7;
/// Default α grid; 20 stands in for α = ∞.
pub const DEFAULT_ALPHAS: [f64; 9] = [0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 20.0];

/// One-parameter paths through the perturbation families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Family {
    ToricCode,
    CcExp,
    HorizontalZ,
    UniformZ,
    /// `λ_x = x·λ`, `λ_z = z·λ`.
    UniformXz {
        x: f64,
        z: f64,
    },
}

impl Family {
    /// `λ_x = λ`, `λ_z = λ/2`.
    pub fn canonical_xz() -> Self {
        Family::UniformXz { x: 1.0, z: 0.5 }
    }

    pub fn spec(&self, lambda: f64) -> PerturbationSpec {
        match *self {
            Family::ToricCode => PerturbationSpec::None,
            Family::CcExp => PerturbationSpec::CcExp { lambda },
            Family::HorizontalZ => PerturbationSpec::HorizontalZ { lambda_h: lambda },
            Family::UniformZ => PerturbationSpec::UniformZ { lambda_z: lambda },
            Family::UniformXz { x, z } => PerturbationSpec::UniformXz {
                lambda_x: x * lambda,
                lambda_z: z * lambda,
            },
        }
    }

    /// Loops labelling sectors: both z loops when the perturbation commutes
    /// with them, otherwise `(l^z_1, l^x_2)`.
    pub fn default_loops(&self, boundary: Boundary) -> SectorLoops {
        match (self, boundary) {
            (_, Boundary::Cylinder) => SectorLoops::Zx,
            (Family::UniformXz { x, .. }, _) if *x != 0.0 => SectorLoops::Zx,
            _ => SectorLoops::Zz,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectorLoops {
    /// `(l^z_1, l^z_2)`
    Zz,
    /// `(l^z_1, l^x_2)`
    Zx,
}

impl SectorLoops {
    pub fn strings(&self, geom: &LatticeGeometry) -> Result<(PauliString, PauliString)> {
        let (a, b) = match self {
            SectorLoops::Zz => geom.z_loops()?,
            SectorLoops::Zx => geom.wilson_loops(),
        };
        Ok((PauliString::from_loop(&a), PauliString::from_loop(&b)))
    }
}

/// Number of quasi-degenerate topological states.
pub fn manifold_size(geom: &LatticeGeometry) -> usize {
    match geom.boundary() {
        Boundary::Torus => 4,
        Boundary::Cylinder => 2,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub lambdas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub region: Region,
    pub rank_tol: f64,
}

impl SweepGrid {
    pub fn new(lambdas: Vec<f64>, alphas: Vec<f64>, region: Region) -> Result<Self> {
        let g = SweepGrid {
            lambdas,
            alphas,
            region,
            rank_tol: RANK_TOL,
        };
        g.validate()?;
        Ok(g)
    }

    /// `start, start + step, …` with `count` points.
    pub fn linspace(start: f64, step: f64, count: usize) -> Vec<f64> {
        (0..count).map(|i| start + step * i as f64).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambdas.is_empty() {
            return Err(Error::InvalidSweep("empty λ path".into()));
        }
        if let Some(l) = self.lambdas.iter().find(|l| !l.is_finite()) {
            return Err(Error::InvalidSweep(format!("non-finite λ {l}")));
        }
        validate_alphas(&self.alphas)?;
        if !(self.rank_tol > 0.0 && self.rank_tol < 1.0) {
            return Err(Error::InvalidSweep(format!(
                "rank tolerance {} outside (0, 1)",
                self.rank_tol
            )));
        }
        Ok(())
    }
}

pub fn validate_alphas(alphas: &[f64]) -> Result<()> {
    if alphas.is_empty() {
        return Err(Error::InvalidSweep("empty α grid".into()));
    }
    if let Some(a) = alphas.iter().find(|a| a.is_nan() || **a < 0.0) {
        return Err(Error::NegativeAlpha(*a));
    }
    if alphas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidSweep(
            "α values must be strictly ascending".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub index: usize,
    pub lambda: f64,
    pub params: Vec<(String, f64)>,
    pub entropies: Vec<f64>,
    pub rank: usize,
    pub energy: f64,
    /// `⟨l^z_1⟩` and `⟨l^x_2⟩`; absent for chains.
    pub lz1: Option<f64>,
    pub lx2: Option<f64>,
    /// Eigenvalues of the loops used for sector selection.
    pub sector_values: Option<(f64, f64)>,
    pub commutator: Option<f64>,
    /// Correlation length from an exponential fit; approximate.
    pub xi: Option<f64>,
    pub spectrum: Vec<f64>,
    pub failure: Option<String>,
}

impl SweepRow {
    pub(crate) fn failed(
        index: usize,
        lambda: f64,
        params: Vec<(String, f64)>,
        n_alpha: usize,
        e: &Error,
    ) -> Self {
        SweepRow {
            index,
            lambda,
            params,
            entropies: vec![f64::NAN; n_alpha],
            rank: 0,
            energy: f64::NAN,
            lz1: None,
            lx2: None,
            sector_values: None,
            commutator: None,
            xi: None,
            spectrum: Vec::new(),
            failure: Some(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub alphas: Vec<f64>,
    pub region: String,
    pub rows: Vec<SweepRow>,
    pub seed: u64,
}

impl SweepResult {
    pub fn lambdas(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.lambda).collect()
    }

    pub fn failures(&self) -> Vec<&SweepRow> {
        self.rows.iter().filter(|r| r.failure.is_some()).collect()
    }

    /// `S_α` column for one α index.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.entropies[j]).collect()
    }

    pub fn alpha_index(&self, alpha: f64) -> Option<usize> {
        self.alphas.iter().position(|&a| a == alpha)
    }
}

/// Entropies, rank and spectrum of `state` across `region`.
pub(crate) fn entropies(
    state: &StateVector,
    region: &Region,
    alphas: &[f64],
    rank_tol: f64,
) -> Result<(Vec<f64>, usize, Vec<f64>)> {
    let spec = schmidt_spectrum(state, region)?;
    let s = alphas
        .iter()
        .map(|&a| renyi_with_tau(&spec, a, rank_tol))
        .collect::<Result<Vec<f64>>>()?;
    Ok((s, schmidt_rank(&spec, rank_tol), spec.probs().to_vec()))
}

/// Least-squares slope of `ln|C(r)|` against `r`; `None` with fewer than two
/// usable points or a non-decaying fit.
pub fn fit_correlation_length(points: &[(f64, f64)]) -> Option<f64> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, c)| c.abs() > 1e-14)
        .map(|&(r, c)| (r, c.abs().ln()))
        .collect();
    if usable.len() < 2 {
        return None;
    }
    let n = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / n;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = usable.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    (slope < 0.0).then(|| -1.0 / slope)
}

fn lattice_xi(geom: &LatticeGeometry, state: &StateVector) -> Result<Option<f64>> {
    let origin = geom.edge(0, 0, EdgeKind::Horizontal).expect("edge exists");
    let mut pts = Vec::new();
    for r in 1..=geom.lx() / 2 {
        if let Some(e) = geom.edge(r, 0, EdgeKind::Horizontal) {
            let c = connected_correlator(state, &PauliString::z(origin), &PauliString::z(e))?;
            pts.push((r as f64, c));
        }
    }
    Ok(fit_correlation_length(&pts))
}

fn solve_point(
    geom: &LatticeGeometry,
    spec: &PerturbationSpec,
    grid: &SweepGrid,
    cfg: &SolverConfig,
    loops: SectorLoops,
) -> Result<SweepRow> {
    let h = build_model(geom, spec)?;
    let k = manifold_size(geom);
    let gs = ground_space(&h, geom.n_edges(), &cfg.clone().with_k(k))?;
    let (l1, l2) = loops.strings(geom)?;
    let sector = select_sector_strings(&gs, (&l1, &l2), (1.0, 1.0), cfg.sector_tol)?;
    let (entropies, rank, spectrum) =
        entropies(&sector.state, &grid.region, &grid.alphas, grid.rank_tol)?;
    let (z1, x2) = geom.wilson_loops();
    Ok(SweepRow {
        index: 0,
        lambda: 0.0,
        params: Vec::new(),
        entropies,
        rank,
        energy: sector.energy,
        lz1: Some(expectation_string(
            &sector.state,
            &PauliString::from_loop(&z1),
        )?),
        lx2: Some(expectation_string(
            &sector.state,
            &PauliString::from_loop(&x2),
        )?),
        sector_values: Some(sector.loop_values),
        commutator: Some(sector.commutator),
        xi: lattice_xi(geom, &sector.state)?,
        spectrum,
        failure: None,
    })
}

pub(crate) fn named(spec: &PerturbationSpec) -> Vec<(String, f64)> {
    spec.params()
        .into_iter()
        .map(|(n, v)| (n.to_string(), v))
        .collect()
}

/// Solves every λ point (in parallel), selects the `(+1, +1)` sector and
/// evaluates the entropies. Points that fail carry a failure marker.
pub fn run_sweep(
    geom: &LatticeGeometry,
    family: Family,
    grid: &SweepGrid,
    cfg: &SolverConfig,
    loops: Option<SectorLoops>,
) -> Result<SweepResult> {
    grid.validate()?;
    cfg.validate()?;
    if grid.region.n_edges_total() != geom.n_edges() {
        return Err(Error::DimensionMismatch {
            expected: geom.n_edges(),
            got: grid.region.n_edges_total(),
        });
    }
    if geom.n_edges() > cfg.max_sites {
        return Err(Error::CapExceeded(format!(
            "{} spins exceed the solver cap of {}",
            geom.n_edges(),
            cfg.max_sites
        )));
    }
    let loops = loops.unwrap_or_else(|| family.default_loops(geom.boundary()));
    loops.strings(geom)?;
    for &l in &grid.lambdas {
        family.spec(l).validate()?;
    }
    let rows = grid
        .lambdas
        .par_iter()
        .enumerate()
        .map(|(i, &lambda)| {
            let spec = family.spec(lambda);
            match solve_point(geom, &spec, grid, cfg, loops) {
                Ok(mut row) => {
                    row.index = i;
                    row.lambda = lambda;
                    row.params = named(&spec);
                    row
                }
                Err(e) => SweepRow::failed(i, lambda, named(&spec), grid.alphas.len(), &e),
            }
        })
        .collect();
    Ok(SweepResult {
        alphas: grid.alphas.clone(),
        region: grid.region.label.clone(),
        rows,
        seed: cfg.seed,
    })
}

/// `∂_λ S_α` at every λ point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeTable {
    pub lambdas: Vec<f64>,
    pub alphas: Vec<f64>,
    /// `[λ index][α index]`, nats per unit λ.
    pub values: Vec<Vec<f64>>,
    /// Set when the λ spacing is not uniform and divided differences were used.
    pub nonuniform: bool,
}

/// Central differences inside the path, one-sided differences at its ends.
pub fn derivatives(result: &SweepResult) -> Result<DerivativeTable> {
    if let Some(r) = result.rows.iter().find(|r| r.failure.is_some()) {
        return Err(Error::InvalidSweep(format!(
            "point {} failed: {}",
            r.index,
            r.failure.as_deref().unwrap_or_default()
        )));
    }
    let lambdas = result.lambdas();
    let rows: Vec<Vec<f64>> = result.rows.iter().map(|r| r.entropies.clone()).collect();
    derivative_table(&lambdas, &result.alphas, &rows)
}

pub fn derivative_table(
    lambdas: &[f64],
    alphas: &[f64],
    rows: &[Vec<f64>],
) -> Result<DerivativeTable> {
    let n = lambdas.len();
    if n < 3 {
        return Err(Error::InvalidSweep(format!(
            "derivatives need at least 3 λ points, got {n}"
        )));
    }
    if rows.len() != n || rows.iter().any(|r| r.len() != alphas.len()) {
        return Err(Error::InvalidSweep("entropy table shape mismatch".into()));
    }
    let steps: Vec<f64> = lambdas.windows(2).map(|w| w[1] - w[0]).collect();
    if steps
        .iter()
        .any(|&s| s == 0.0 || s.signum() != steps[0].signum())
    {
        return Err(Error::InvalidSweep(
            "λ path must be strictly monotone".into(),
        ));
    }
    let nonuniform = steps
        .iter()
        .any(|s| (s - steps[0]).abs() > 1e-9 * steps[0].abs());
    let values = (0..n)
        .map(|i| {
            let (lo, hi) = match i {
                0 => (0, 1),
                _ if i == n - 1 => (n - 2, n - 1),
                _ => (i - 1, i + 1),
            };
            let dl = lambdas[hi] - lambdas[lo];
            (0..alphas.len())
                .map(|j| (rows[hi][j] - rows[lo][j]) / dl)
                .collect()
        })
        .collect();
    Ok(DerivativeTable {
        lambdas: lambdas.to_vec(),
        alphas: alphas.to_vec(),
        values,
        nonuniform,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convertibility {
    Convertible,
    NotConvertible,
}

impl Convertibility {
    fn from(ok: bool) -> Self {
        if ok {
            Convertibility::Convertible
        } else {
            Convertibility::NotConvertible
        }
    }
}

/// A sign change of `∂_λ S_α` between two neighbouring α grid values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub interval: (f64, f64),
    /// Linear interpolation of the zero inside `interval`.
    pub estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub index: usize,
    pub lambda: f64,
    pub split: bool,
    pub crossings: Vec<Crossing>,
    pub non_monotone: bool,
    /// Toward larger λ: every `∂_λ S_α ≤ ε`.
    pub forward: Convertibility,
    /// Toward smaller λ: every `∂_λ S_α ≥ −ε`.
    pub backward: Convertibility,
    /// `+1`, `−1` or `0` per α, relative to ε.
    pub signs: Vec<i8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DlcVerdict {
    pub forward: Convertibility,
    pub backward: Convertibility,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplittingReport {
    pub split: bool,
    /// Smallest interval of grid α values containing every crossing.
    pub alpha0_interval: Option<(f64, f64)>,
    pub dlc: DlcVerdict,
    pub epsilon: f64,
    pub steps: Vec<StepReport>,
}

/// Sign analysis over `α > 0`; the `α = 0` column does not enter.
pub fn detect_splitting(table: &DerivativeTable, eps: f64) -> Result<SplittingReport> {
    if !(eps >= 0.0) {
        return Err(Error::InvalidParameters(format!(
            "threshold {eps} must be ≥ 0"
        )));
    }
    let cols: Vec<usize> = (0..table.alphas.len())
        .filter(|&j| table.alphas[j] > 0.0)
        .collect();
    let sign = |d: f64| -> i8 {
        if d > eps {
            1
        } else if d < -eps {
            -1
        } else {
            0
        }
    };
    let steps: Vec<StepReport> = table
        .values
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let signs: Vec<i8> = cols.iter().map(|&j| sign(row[j])).collect();
            let pos = signs.contains(&1);
            let neg = signs.contains(&-1);
            let mut crossings = Vec::new();
            let mut prev: Option<usize> = None;
            for (c, &j) in cols.iter().enumerate() {
                if signs[c] == 0 {
                    continue;
                }
                if let Some(p) = prev {
                    let pj = cols[p];
                    if signs[p] != signs[c] {
                        let (a0, a1) = (table.alphas[pj], table.alphas[j]);
                        let (d0, d1) = (row[pj], row[j]);
                        crossings.push(Crossing {
                            interval: (a0, a1),
                            estimate: a0 + (a1 - a0) * d0 / (d0 - d1),
                        });
                    }
                }
                prev = Some(c);
            }
            StepReport {
                index: i,
                lambda: table.lambdas[i],
                split: pos && neg,
                non_monotone: crossings.len() > 1,
                crossings,
                forward: Convertibility::from(!pos),
                backward: Convertibility::from(!neg),
                signs,
            }
        })
        .collect();
    let split = steps.iter().any(|s| s.split);
    let alpha0_interval = steps
        .iter()
        .filter(|s| s.split)
        .flat_map(|s| s.crossings.iter().map(|c| c.interval))
        .reduce(|a, b| (a.0.min(b.0), a.1.max(b.1)));
    let dlc = DlcVerdict {
        forward: Convertibility::from(
            steps
                .iter()
                .all(|s| s.forward == Convertibility::Convertible),
        ),
        backward: Convertibility::from(
            steps
                .iter()
                .all(|s| s.backward == Convertibility::Convertible),
        ),
    };
    Ok(SplittingReport {
        split,
        alpha0_interval,
        dlc,
        epsilon: eps,
        steps,
    })
}
