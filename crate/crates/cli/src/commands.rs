use alphasplit_core::ed::{expectation_string, select_sector_strings};
use alphasplit_core::ising::{
    chain_ed_sector, chain_sweep, half_chain, horizontal_z_dual_energy, tfim_solve,
    tfim_solve_sector, ChainBoundary, ChainSpec, ChainVariant,
};
use alphasplit_core::loopgas::{
    cc_state_vector, coset_spectrum, enumerate_group, frustration_free_energy, renyi_exact,
    CC_WEIGHT,
};
use alphasplit_core::sweep::{manifold_size, Convertibility, DlcVerdict, StepReport};
use alphasplit_core::{
    build_model, derivatives, detect_splitting, ground_space, renyi, run_sweep, schmidt_rank,
    schmidt_spectrum, CcModel, DerivativeTable, EdgeKind, Family, LatticeGeometry, PauliString,
    PerturbationSpec, SectorLoops, SweepGrid, SweepResult, SweepRow, Units,
};
use serde::Serialize;

use crate::config::{CrosscheckFamily, ExperimentConfig};
use crate::error::CliError;
use crate::output::{surface_csv, to_json, write_file};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Sweep,
    Loopgas,
    Chain,
    Crosscheck,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Sweep => "sweep",
            Command::Loopgas => "loopgas",
            Command::Chain => "chain",
            Command::Crosscheck => "crosscheck",
        }
    }
}

/// Human-readable lines for stdout.
pub type Summary = Vec<String>;

pub fn run(cmd: Command, cfg: &ExperimentConfig) -> Result<Summary, CliError> {
    match cmd {
        Command::Sweep => sweep(cfg),
        Command::Loopgas => loopgas(cfg),
        Command::Chain => chain(cfg),
        Command::Crosscheck => crosscheck(cfg),
    }
}

#[derive(Serialize)]
struct Point {
    index: usize,
    lambda: f64,
    rank: usize,
    energy: f64,
    lz1: Option<f64>,
    lx2: Option<f64>,
    sector_values: Option<(f64, f64)>,
    commutator: Option<f64>,
    /// Approximate; from an exponential fit of a two-point function.
    xi: Option<f64>,
}

#[derive(Serialize)]
struct Failure {
    index: usize,
    lambda: f64,
    message: String,
}

#[derive(Serialize)]
struct SplitReport<'a> {
    command: &'static str,
    split: Option<bool>,
    alpha0_interval: Option<(f64, f64)>,
    dlc: Option<DlcVerdict>,
    derivative_table: Option<DerivativeTable>,
    steps: Vec<StepReport>,
    epsilon: f64,
    units: Units,
    region: String,
    points: Vec<Point>,
    failures: Vec<Failure>,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    loop_gas: Option<LoopGasInfo>,
    config_echo: &'a ExperimentConfig,
    seed: u64,
}

#[derive(Serialize)]
struct LoopGasInfo {
    group_size: usize,
    /// `w` in the loop weights `e^{-wλL}`.
    length_weight: f64,
    length_histogram: Vec<(u32, usize)>,
}

fn emit(
    cmd: Command,
    cfg: &ExperimentConfig,
    result: &SweepResult,
    loop_gas: Option<LoopGasInfo>,
) -> Result<Summary, CliError> {
    let units = cfg.output.units;
    let failures: Vec<Failure> = result
        .rows
        .iter()
        .filter_map(|r| {
            r.failure.as_ref().map(|m| Failure {
                index: r.index,
                lambda: r.lambda,
                message: m.clone(),
            })
        })
        .collect();
    let mut report = SplitReport {
        command: cmd.name(),
        split: None,
        alpha0_interval: None,
        dlc: None,
        derivative_table: None,
        steps: Vec::new(),
        epsilon: cfg.epsilon,
        units,
        region: result.region.clone(),
        points: result
            .rows
            .iter()
            .map(|r| Point {
                index: r.index,
                lambda: r.lambda,
                rank: r.rank,
                energy: r.energy,
                lz1: r.lz1,
                lx2: r.lx2,
                sector_values: r.sector_values,
                commutator: r.commutator,
                xi: r.xi,
            })
            .collect(),
        failures,
        note: None,
        loop_gas,
        config_echo: cfg,
        seed: result.seed,
    };
    let mut summary = vec![format!(
        "{}: {} λ points, {} α values, region {}",
        cmd.name(),
        result.rows.len(),
        result.alphas.len(),
        result.region
    )];
    if report.failures.is_empty() && result.rows.len() >= 3 {
        let mut table = derivatives(result).map_err(|e| CliError::from_core("path", e))?;
        let rep =
            detect_splitting(&table, cfg.epsilon).map_err(|e| CliError::from_core("epsilon", e))?;
        for row in &mut table.values {
            row.iter_mut().for_each(|d| *d = units.convert(*d));
        }
        summary.push(format!(
            "split = {}, α0 interval = {:?}, forward DLC = {}",
            rep.split,
            rep.alpha0_interval,
            verdict(rep.dlc.forward)
        ));
        report.split = Some(rep.split);
        report.alpha0_interval = rep.alpha0_interval;
        report.dlc = Some(rep.dlc);
        report.steps = rep.steps;
        report.derivative_table = Some(table);
    } else if report.failures.is_empty() {
        report.note = Some("splitting analysis needs at least 3 λ points".into());
    } else {
        report.note = Some("splitting analysis skipped because some points failed".into());
    }
    write_file(&cfg.output.csv, &surface_csv(result, units))?;
    write_file(&cfg.output.json, &to_json(&report))?;
    summary.push(format!(
        "wrote {} and {}",
        cfg.output.csv.display(),
        cfg.output.json.display()
    ));
    if !report.failures.is_empty() {
        let msg = report
            .failures
            .iter()
            .map(|f| format!("λ[{}] = {}: {}", f.index, f.lambda, f.message))
            .collect::<Vec<_>>()
            .join("; ");
        return Err(CliError::Solver(msg));
    }
    Ok(summary)
}

fn verdict(c: Convertibility) -> &'static str {
    match c {
        Convertibility::Convertible => "convertible",
        Convertibility::NotConvertible => "not convertible",
    }
}

fn sweep(cfg: &ExperimentConfig) -> Result<Summary, CliError> {
    let geom = cfg.geometry()?;
    let region = cfg.region.build(&geom)?;
    let mut grid = SweepGrid::new(cfg.path.lambdas()?, cfg.alphas.clone(), region)
        .map_err(|e| CliError::from_core("path", e))?;
    grid.rank_tol = cfg.rank_tol;
    let result = run_sweep(
        &geom,
        cfg.perturbation,
        &grid,
        &cfg.solver,
        cfg.sector_loops,
    )
    .map_err(|e| CliError::from_core("perturbation", e))?;
    emit(Command::Sweep, cfg, &result, None)
}

fn loopgas(cfg: &ExperimentConfig) -> Result<Summary, CliError> {
    if cfg.perturbation != Family::CcExp {
        return Err(CliError::NoExactPath(format!(
            "the loop-gas formula covers only the cc_exp family, not {:?}",
            cfg.perturbation
        )));
    }
    let geom = cfg.geometry()?;
    let region = cfg.region.build(&geom)?;
    let group = enumerate_group(&geom).map_err(|e| CliError::from_core("geometry", e))?;
    let mut rows = Vec::new();
    for (index, lambda) in cfg.path.lambdas()?.into_iter().enumerate() {
        let model = CcModel::new(lambda).map_err(|e| CliError::from_core("path", e))?;
        let spec = coset_spectrum(&group, &region, &model)
            .map_err(|e| CliError::from_core("region", e))?;
        let entropies = cfg
            .alphas
            .iter()
            .map(|&a| alphasplit_core::entanglement::renyi_with_tau(&spec, a, cfg.rank_tol))
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| CliError::from_core("alphas", e))?;
        rows.push(SweepRow {
            index,
            lambda,
            params: vec![("lambda".into(), lambda)],
            entropies,
            rank: schmidt_rank(&spec, cfg.rank_tol),
            energy: frustration_free_energy(&geom),
            // loop-gas states lie in the (+1, +1) sector of the z loops
            lz1: Some(1.0),
            lx2: Some(0.0),
            sector_values: None,
            commutator: None,
            xi: None,
            spectrum: spec.probs().to_vec(),
            failure: None,
        });
    }
    let result = SweepResult {
        alphas: cfg.alphas.clone(),
        region: region.label.clone(),
        rows,
        seed: cfg.solver.seed,
    };
    let info = LoopGasInfo {
        group_size: group.len(),
        length_weight: CC_WEIGHT,
        length_histogram: group.length_histogram().into_iter().collect(),
    };
    emit(Command::Loopgas, cfg, &result, Some(info))
}

fn chain(cfg: &ExperimentConfig) -> Result<Summary, CliError> {
    let c = &cfg.chain;
    let result = chain_sweep(
        c.variant,
        c.n,
        &cfg.path.lambdas()?,
        &cfg.alphas,
        cfg.rank_tol,
        &cfg.solver,
    )
    .map_err(|e| CliError::from_core("chain", e))?;
    emit(Command::Chain, cfg, &result, None)
}

#[derive(Debug, Clone, Serialize)]
pub struct Deviation {
    pub quantity: String,
    pub max_abs_deviation: f64,
    pub gate: f64,
    pub pass: bool,
}

#[derive(Default)]
struct Table(Vec<Deviation>);

impl Table {
    fn record(&mut self, quantity: &str, dev: f64, gate: f64) {
        match self.0.iter_mut().find(|d| d.quantity == quantity) {
            Some(d) => d.max_abs_deviation = d.max_abs_deviation.max(dev),
            None => self.0.push(Deviation {
                quantity: quantity.into(),
                max_abs_deviation: dev,
                gate,
                pass: true,
            }),
        }
    }

    fn finish(mut self) -> Vec<Deviation> {
        for d in &mut self.0 {
            d.pass = d.max_abs_deviation <= d.gate;
        }
        self.0
    }
}

#[derive(Serialize)]
struct CrosscheckReport<'a> {
    command: &'static str,
    family: CrosscheckFamily,
    rows: Vec<Deviation>,
    pass: bool,
    config_echo: &'a ExperimentConfig,
    seed: u64,
}

const LATTICE_GATE: f64 = 1e-8;
const CHAIN_GATE: f64 = 1e-9;
const CHAIN_ENTROPY_GATE: f64 = 1e-8;

fn crosscheck(cfg: &ExperimentConfig) -> Result<Summary, CliError> {
    let lambdas = cfg.path.lambdas()?;
    let family = cfg.crosscheck.family;
    let rows = match family {
        CrosscheckFamily::CcExp => crosscheck_cc(cfg, &lambdas)?,
        CrosscheckFamily::HorizontalZ => crosscheck_horizontal(cfg, &lambdas)?,
        CrosscheckFamily::TfimV1 => crosscheck_tfim(cfg, &lambdas)?,
        other => {
            return Err(CliError::NoExactPath(format!(
                "family {other:?} has no exact solution to compare against"
            )))
        }
    };
    let pass = rows.iter().all(|r| r.pass);
    let mut summary = vec![format!(
        "{:<28} {:>24} {:>10}  result",
        "quantity", "max |deviation|", "gate"
    )];
    for r in &rows {
        summary.push(format!(
            "{:<28} {:>24} {:>10.1e}  {}",
            r.quantity,
            format!("{:.6e}", r.max_abs_deviation),
            r.gate,
            if r.pass { "ok" } else { "EXCEEDED" }
        ));
    }
    let report = CrosscheckReport {
        command: "crosscheck",
        family,
        rows,
        pass,
        config_echo: cfg,
        seed: cfg.solver.seed,
    };
    write_file(&cfg.output.json, &to_json(&report))?;
    summary.push(format!("wrote {}", cfg.output.json.display()));
    if !pass {
        let bad: Vec<String> = report
            .rows
            .iter()
            .filter(|r| !r.pass)
            .map(|r| format!("{} = {:e} > {:e}", r.quantity, r.max_abs_deviation, r.gate))
            .collect();
        for line in &summary {
            println!("{line}");
        }
        return Err(CliError::Gate(bad.join("; ")));
    }
    Ok(summary)
}

/// Ground state in the `(+1, +1)` sector of both z loops.
fn z_sector_state(
    geom: &LatticeGeometry,
    spec: &PerturbationSpec,
    cfg: &ExperimentConfig,
) -> Result<(alphasplit_core::StateVector, f64), CliError> {
    let h = build_model(geom, spec).map_err(|e| CliError::from_core("path", e))?;
    let solver = cfg.solver.clone().with_k(manifold_size(geom));
    let gs =
        ground_space(&h, geom.n_edges(), &solver).map_err(|e| CliError::from_core("solver", e))?;
    let (l1, l2) = SectorLoops::Zz
        .strings(geom)
        .map_err(|e| CliError::from_core("geometry", e))?;
    let s = select_sector_strings(&gs, (&l1, &l2), (1.0, 1.0), cfg.solver.sector_tol)
        .map_err(|e| CliError::from_core("solver", e))?;
    Ok((s.state, s.energy))
}

fn crosscheck_cc(cfg: &ExperimentConfig, lambdas: &[f64]) -> Result<Vec<Deviation>, CliError> {
    let geom = cfg.geometry()?;
    let region = cfg.region.build(&geom)?;
    let group = enumerate_group(&geom).map_err(|e| CliError::from_core("geometry", e))?;
    let mut t = Table::default();
    for &lambda in lambdas {
        let model = CcModel::new(lambda).map_err(|e| CliError::from_core("path", e))?;
        let (v, e) = z_sector_state(&geom, &PerturbationSpec::CcExp { lambda }, cfg)?;
        let exact = cc_state_vector(&geom, lambda, (1, 1))
            .map_err(|e| CliError::from_core("geometry", e))?;
        let overlap = v
            .dot(&exact)
            .map_err(|e| CliError::from_core("geometry", e))?;
        t.record("1 - |overlap|", 1.0 - overlap.abs(), LATTICE_GATE);
        t.record(
            "energy",
            (e - frustration_free_energy(&geom)).abs(),
            LATTICE_GATE,
        );
        let spec = schmidt_spectrum(&v, &region).map_err(|e| CliError::from_core("region", e))?;
        for &a in &cfg.alphas {
            let ed = renyi(&spec, a).map_err(|e| CliError::from_core("alphas", e))?;
            let ex = renyi_exact(&group, &region, &model, a)
                .map_err(|e| CliError::from_core("alphas", e))?;
            t.record(&format!("S_{a}"), (ed - ex).abs(), LATTICE_GATE);
        }
    }
    Ok(t.finish())
}

fn crosscheck_horizontal(
    cfg: &ExperimentConfig,
    lambdas: &[f64],
) -> Result<Vec<Deviation>, CliError> {
    let geom = cfg.geometry()?;
    let lx = geom.lx();
    let mut t = Table::default();
    for &lambda in lambdas {
        let (v, e) = z_sector_state(
            &geom,
            &PerturbationSpec::HorizontalZ { lambda_h: lambda },
            cfg,
        )?;
        let dual = horizontal_z_dual_energy(&geom, lambda)
            .map_err(|e| CliError::from_core("geometry", e))?;
        t.record("energy", (e - dual).abs(), LATTICE_GATE);
        let ring = tfim_solve_sector(
            &ChainSpec::new(lx, -lambda, 1.0, ChainBoundary::Periodic),
            Some(1),
        )
        .map_err(|e| CliError::from_core("geometry", e))?;
        let expect = |p: PauliString| {
            expectation_string(&v, &p).map_err(|e| CliError::from_core("geometry", e))
        };
        for y in 0..geom.ly() {
            for x in 0..lx {
                let star = PauliString::x_on(geom.stars()[geom.star_at(x, y)]);
                t.record(
                    "star ↔ τ^z",
                    (expect(star)? - ring.tau_z(x)).abs(),
                    LATTICE_GATE,
                );
                let edge = geom
                    .edge(x, y, EdgeKind::Horizontal)
                    .expect("torus edges exist");
                let (a, b) = if x + 1 < lx { (x, x + 1) } else { (0, x) };
                let xx = ring
                    .tau_xx(a, b)
                    .map_err(|e| CliError::from_core("geometry", e))?;
                t.record(
                    "σ^z horizontal ↔ τ^xτ^x",
                    (expect(PauliString::z(edge))? - xx).abs(),
                    LATTICE_GATE,
                );
            }
        }
    }
    Ok(t.finish())
}

fn crosscheck_tfim(cfg: &ExperimentConfig, lambdas: &[f64]) -> Result<Vec<Deviation>, CliError> {
    let n = cfg.chain.n;
    let region = half_chain(n).map_err(|e| CliError::from_core("chain.n", e))?;
    let mut t = Table::default();
    for &lambda in lambdas {
        let spec = ChainVariant::V1.spec(n, lambda);
        let ff = tfim_solve(&spec).map_err(|e| CliError::from_core("chain", e))?;
        let (v, e) =
            chain_ed_sector(&spec, 1, &cfg.solver).map_err(|e| CliError::from_core("solver", e))?;
        t.record("energy", (e - ff.energy).abs(), CHAIN_GATE);
        let expect = |p: PauliString| {
            expectation_string(&v, &p).map_err(|e| CliError::from_core("chain", e))
        };
        for mu in 0..n {
            t.record(
                "τ^z",
                (expect(PauliString::z(mu))? - ff.tau_z(mu)).abs(),
                CHAIN_GATE,
            );
            for nu in mu + 1..n {
                let xx = ff
                    .tau_xx(mu, nu)
                    .map_err(|e| CliError::from_core("chain", e))?;
                let ed = expect(PauliString::x_on((1 << mu) | (1 << nu)))?;
                t.record("τ^xτ^x", (ed - xx).abs(), CHAIN_GATE);
            }
        }
        let ed = schmidt_spectrum(&v, &region).map_err(|e| CliError::from_core("chain", e))?;
        let fs = ff
            .block_spectrum(n / 2)
            .map_err(|e| CliError::from_core("chain", e))?;
        for &a in &cfg.alphas {
            let d = renyi(&ed, a).and_then(|x| Ok(x - renyi(&fs, a)?));
            let d = d.map_err(|e| CliError::from_core("alphas", e))?;
            t.record(&format!("S_{a} (half chain)"), d.abs(), CHAIN_ENTROPY_GATE);
        }
    }
    Ok(t.finish())
}
