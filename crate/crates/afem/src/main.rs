use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use afem::adaptive::{adaptive_loop_with, fit_rate, ndof, AdaptiveOptions, RunRecord};
use afem::config::ExperimentConfig;
use afem::vtk::Snapshot;

#[derive(Parser)]
#[command(name = "afem", about = "Adaptive solver for heat-coupled nonlinear Darcy flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the adaptive loop described by a config file.
    Run { config: PathBuf },
    /// Fit the estimator decay rate from a run record.
    Rates {
        record: PathBuf,
        /// Number of trailing rows used in the least-squares fit.
        #[arg(long, default_value_t = 10)]
        tail: usize,
    },
    /// Convert a stored solution snapshot to a legacy-VTK file.
    Export { snapshot: PathBuf, out: PathBuf },
}

fn run(config_path: &PathBuf) -> Result<(), afem::Error> {
    let cfg = ExperimentConfig::load(config_path)?;
    if cfg.p == 1.0 {
        eprintln!("notice: p = 1.0 is outside the exponent range (1, 2) covered by the analysis");
    }
    std::fs::create_dir_all(&cfg.output_dir)?;

    let mesh = cfg.initial_mesh();
    let data = cfg.problem_data();
    let opts = AdaptiveOptions {
        n_iterations: cfg.n_iterations,
        picard: cfg.picard_options(),
    };

    let mut export_error: Option<afem::Error> = None;
    let mut run = adaptive_loop_with(&mesh, &data, &opts, |iter, mesh, state, indicators| {
        if export_error.is_some() || cfg.snapshot_every == 0 || iter % cfg.snapshot_every != 0 {
            return;
        }
        let snap = Snapshot::from_state(mesh, state, indicators);
        let stem = cfg.output_dir.join(format!("snapshot_{iter:04}"));
        if let Err(e) = snap.save_text(&stem.with_extension("snap")) {
            export_error = Some(e.into());
            return;
        }
        if cfg.export_vtk {
            if let Err(e) = snap.save_vtk(&stem.with_extension("vtk")) {
                export_error = Some(e.into());
            }
        }
    })?;
    if let Some(e) = export_error {
        return Err(e);
    }
    run.record.config = cfg.snapshot_lines();

    if cfg.export_csv {
        let path = cfg.output_dir.join("record.csv");
        let mut w = std::io::BufWriter::new(std::fs::File::create(&path)?);
        run.record.write_csv(&mut w)?;
        println!("wrote {}", path.display());
    }
    let final_snap = Snapshot::from_state(&run.mesh, &run.state, &run.indicators);
    let stem = cfg.output_dir.join("final");
    final_snap.save_text(&stem.with_extension("snap"))?;
    if cfg.export_vtk {
        final_snap.save_vtk(&stem.with_extension("vtk"))?;
    }

    let last = run.record.rows.last().expect("record is never empty");
    println!(
        "finished {} adaptive iterations: {} vertices, {} elements, ndof {}, estimator {:.6e}",
        cfg.n_iterations,
        run.mesh.n_vertices(),
        run.mesh.n_triangles(),
        ndof(&run.mesh),
        last.est_total
    );
    Ok(())
}

fn rates(record_path: &PathBuf, tail: usize) -> Result<(), afem::Error> {
    let mut r = std::io::BufReader::new(std::fs::File::open(record_path)?);
    let record = RunRecord::read_csv(&mut r)?;
    let slope = fit_rate(&record, tail)?;
    println!("{slope:.6}");
    Ok(())
}

fn export(snapshot: &PathBuf, out: &PathBuf) -> Result<(), afem::Error> {
    let snap = Snapshot::load_text(snapshot)?;
    snap.save_vtk(out)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config } => run(config),
        Command::Rates { record, tail } => rates(record, *tail),
        Command::Export { snapshot, out } => export(snapshot, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
