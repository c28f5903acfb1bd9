use std::path::{Path, PathBuf};

use rayon::prelude::*;

use fqw_core::analysis::{self, CalibrationConfig, RegimeParams, RegimeReport};
use fqw_core::evolution::{log_times, uniform_times};
use fqw_core::io;
use fqw_core::render::{render_frame, RenderSpec};
use fqw_core::{
    build_classical_generator, build_hamiltonian, evolve_classical, evolve_quantum,
    spectral_decompose, Error, Lattice, ObservableTable, ProbabilitySeries, Result,
};

use crate::output::{emit, open, output_path, Artifact, Manifest};
use crate::{
    AnalyzeArgs, AnchorArgs, CalibrateArgs, ClassicalArgs, Command, CouplingArgs, EvolveArgs,
    GridArgs, GridKind, LatticeArgs, ObservablesArgs, RegimeArgs, RenderArgs, RenderSpecArgs,
    SweepArgs,
};

/// Tolerance on row sums and probability bounds of series read from disk.
const SERIES_TOLERANCE: f64 = 1e-9;

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Lattice(a) => lattice(a),
        Command::Evolve(a) => evolve(a),
        Command::Classical(a) => classical(a),
        Command::Observables(a) => observables(a),
        Command::Analyze(a) => analyze(a),
        Command::Render(a) => render(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Sweep(a) => sweep(a),
    }
}

fn read_lattice(path: &Path) -> Result<Lattice> {
    io::read_lattice(open(path)?)
}

fn read_series(path: &Path, lattice: &Lattice) -> Result<ProbabilitySeries> {
    let series = io::read_series(open(path)?)?;
    if series.n_sites() != lattice.len() {
        return Err(Error::Shape(format!(
            "series has {} sites, lattice has {}",
            series.n_sites(),
            lattice.len()
        )));
    }
    series.validate(SERIES_TOLERANCE)?;
    Ok(series)
}

fn times(grid: &GridArgs, lattice: &Lattice) -> Result<Vec<f64>> {
    match grid.grid {
        GridKind::Uniform => uniform_times(grid.tau_max, grid.steps),
        GridKind::Log => log_times(grid.tau_min, grid.tau_max, grid.steps),
        GridKind::Measured => {
            if !(grid.mm_per_tau > 0.0) {
                return Err(Error::Domain(format!(
                    "mm-per-tau must be positive, got {}",
                    grid.mm_per_tau
                )));
            }
            analysis::measurement_times(lattice.kind(), grid.mm_per_tau).ok_or_else(|| {
                Error::Domain(format!(
                    "no recorded lengths for {} lattices",
                    lattice.kind()
                ))
            })
        }
    }
}

fn params(r: &RegimeArgs) -> RegimeParams {
    RegimeParams {
        epsilon: r.epsilon,
        band: r.band,
        slope_window: r.slope_window,
        plateau_delta: r.delta,
        plateau_min_span: r.min_span,
        ..RegimeParams::default()
    }
}

fn render_spec(s: &RenderSpecArgs) -> RenderSpec {
    RenderSpec {
        pixels_per_spacing: s.pixels_per_spacing,
        spot_sigma: s.spot_sigma,
        margin: s.margin,
        gamma: s.gamma,
    }
}

fn quantum_series(
    lattice: &Lattice,
    input: usize,
    couplings: CouplingArgs,
    times: &[f64],
) -> Result<ProbabilitySeries> {
    let h = build_hamiltonian(lattice, couplings.beta, couplings.coupling)?;
    evolve_quantum(&spectral_decompose(&h)?, input, times)
}

fn lattice(a: LatticeArgs) -> Result<()> {
    let lattice = fqw_core::generate(a.kind, a.generation)?;
    emit(&output_path(&a.out), |buf| io::write_lattice(&lattice, buf))?;
    if let Some(dump) = &a.hamiltonian_dump {
        let h = build_hamiltonian(&lattice, a.couplings.beta, a.couplings.coupling)?;
        emit(&output_path(dump), |buf| {
            fqw_core::hamiltonian::write_triplets(h.matrix(), buf)
        })?;
    }
    Ok(())
}

fn evolve(a: EvolveArgs) -> Result<()> {
    let lattice = read_lattice(&a.lattice)?;
    let input = a.input.resolve(&lattice)?;
    let series = quantum_series(&lattice, input, a.couplings, &times(&a.grid, &lattice)?)?;
    emit(&output_path(&a.out), |buf| io::write_series(&series, buf))?;
    if let Some(bin) = &a.binary {
        emit(&output_path(bin), |buf| {
            io::write_series_binary(&series, buf)
        })?;
    }
    Ok(())
}

fn classical(a: ClassicalArgs) -> Result<()> {
    let lattice = read_lattice(&a.lattice)?;
    let input = a.input.resolve(&lattice)?;
    let g = build_classical_generator(&lattice, a.rate)?;
    let series = evolve_classical(&g, input, &times(&a.grid, &lattice)?)?;
    emit(&output_path(&a.out), |buf| io::write_series(&series, buf))?;
    Ok(())
}

fn observables(a: ObservablesArgs) -> Result<()> {
    let lattice = read_lattice(&a.lattice)?;
    let series = read_series(&a.series, &lattice)?;
    let table = ObservableTable::compute(&series, &lattice)?;
    emit(&output_path(&a.out), |buf| {
        io::write_observables_csv(&table, buf)
    })?;
    Ok(())
}

fn attach_calibration(report: &mut RegimeReport, anchor: &AnchorArgs) -> Result<()> {
    if let (Some(anchor_event), Some(anchor_mm)) = (anchor.anchor_event, anchor.anchor_mm) {
        let config = CalibrationConfig {
            anchor_event,
            anchor_mm,
        };
        report.calibration = Some(analysis::calibrate_length(report, &config)?);
    }
    Ok(())
}

fn analyze(a: AnalyzeArgs) -> Result<()> {
    let lattice = read_lattice(&a.lattice)?;
    let series = read_series(&a.series, &lattice)?;
    let mut report = analysis::analyze(&lattice, &series, &params(&a.regime))?;
    attach_calibration(&mut report, &a.anchor)?;
    emit(&output_path(&a.out), |buf| {
        io::write_json(&report, buf, true)
    })?;
    Ok(())
}

fn calibrate(a: CalibrateArgs) -> Result<()> {
    let mut report: RegimeReport = io::read_json(open(&a.report)?)?;
    attach_calibration(
        &mut report,
        &AnchorArgs {
            anchor_event: Some(a.anchor_event),
            anchor_mm: Some(a.anchor_mm),
        },
    )?;
    emit(&output_path(&a.out), |buf| {
        io::write_json(&report, buf, true)
    })?;
    Ok(())
}

fn write_frames(
    series: &ProbabilitySeries,
    lattice: &Lattice,
    indices: &[usize],
    spec: &RenderSpec,
    run: &str,
    dir: &Path,
) -> Result<Vec<Artifact>> {
    spec.validate()?;
    indices
        .par_iter()
        .map(|&i| {
            let image = render_frame(series, lattice, i, spec)?;
            emit(&dir.join(format!("{run}_t{i}.pgm")), |buf| {
                image.write_pgm(buf)
            })
        })
        .collect()
}

fn render(a: RenderArgs) -> Result<()> {
    let lattice = read_lattice(&a.lattice)?;
    let series = read_series(&a.series, &lattice)?;
    let indices: Vec<usize> = if a.time_index.is_empty() {
        (0..series.n_times()).collect()
    } else {
        a.time_index.clone()
    };
    let dir = output_path(&a.out_dir);
    let frames = write_frames(
        &series,
        &lattice,
        &indices,
        &render_spec(&a.spec),
        &a.run,
        &dir,
    )?;
    Manifest::new(&a.run, &dir, frames).write(&dir.join(format!("{}_manifest.json", a.run)))?;
    Ok(())
}

/// Indices of `count` frames spread evenly over `n` time points, ends included.
fn frame_indices(n: usize, count: usize) -> Vec<usize> {
    match (n, count) {
        (0, _) | (_, 0) => vec![],
        (_, 1) => vec![0],
        _ => {
            let mut idx: Vec<usize> = (0..count)
                .map(|k| ((k * (n - 1)) as f64 / (count - 1) as f64).round() as usize)
                .collect();
            idx.dedup();
            idx
        }
    }
}

fn sweep_instance(
    a: &SweepArgs,
    kind: fqw_core::LatticeKind,
    size: u32,
    dir: &Path,
) -> Result<Vec<Artifact>> {
    let name = format!("{kind}{size}");
    let path = |suffix: &str| dir.join(format!("{name}.{suffix}"));
    let lattice = fqw_core::generate(kind, size)?;
    let input = a.input.resolve(&lattice)?;
    let series = quantum_series(&lattice, input, a.couplings, &times(&a.grid, &lattice)?)?;
    let table = ObservableTable::compute(&series, &lattice)?;
    let mut out = vec![
        emit(&path("lattice.json"), |buf| {
            io::write_lattice(&lattice, buf)
        })?,
        emit(&path("series.json"), |buf| io::write_series(&series, buf))?,
        emit(&path("observables.csv"), |buf| {
            io::write_observables_csv(&table, buf)
        })?,
    ];
    // regular lattices and tiny fractals may lack landmarks; the report is then skipped
    match analysis::analyze(&lattice, &series, &params(&a.regime)) {
        Ok(report) => out.push(emit(&path("report.json"), |buf| {
            io::write_json(&report, buf, true)
        })?),
        Err(Error::Structural(_) | Error::NotFound(_)) => {}
        Err(e) => return Err(e),
    }
    let frames = frame_indices(series.n_times(), a.frames);
    out.extend(write_frames(
        &series,
        &lattice,
        &frames,
        &render_spec(&a.spec),
        &name,
        dir,
    )?);
    Ok(out)
}

fn sweep(a: SweepArgs) -> Result<()> {
    let dir: PathBuf = output_path(&a.out_dir);
    let instances: Vec<_> = a
        .kinds
        .iter()
        .flat_map(|&k| a.generations.iter().map(move |&g| (k, g)))
        .collect();
    let artifacts: Vec<Vec<Artifact>> = instances
        .par_iter()
        .map(|&(kind, size)| sweep_instance(&a, kind, size, &dir))
        .collect::<Result<_>>()?;
    Manifest::new(&a.run, &dir, artifacts.into_iter().flatten())
        .write(&dir.join("manifest.json"))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::frame_indices;

    #[test]
    fn frames_are_spread_evenly() {
        assert_eq!(frame_indices(501, 3), vec![0, 250, 500]);
        assert_eq!(frame_indices(501, 1), vec![0]);
        assert_eq!(frame_indices(3, 5), vec![0, 1, 2]);
        assert!(frame_indices(0, 4).is_empty());
    }
}
