//! `stdmap-lab`: batch experiments on the quantized standard map.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use stdmap_core::classical::HomoclinicFixtures;
use stdmap_experiments::config::ScanConfig;
use stdmap_experiments::manifest::RunManifest;
use stdmap_experiments::runs;

#[derive(Parser)]
#[command(name = "stdmap-lab", about = "Numerical laboratory for the kicked standard map")]
struct Cli {
    /// key=value config file overriding the built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for parallel scans (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// JSON file with measured homoclinic fixtures (A, dA, L values).
    #[arg(long, global = true)]
    seed_fixtures: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenphases vs k with resonance intensities.
    CorrelationScan,
    /// Single-(N, k) spectrum dump.
    Spectrum,
    /// Level-spacing singularity with the semiclassical overlay.
    Spacing,
    /// Normalized IPR collapse across dimensions.
    IprScan,
    /// k_break(N) breakdown boundary.
    PhaseDiagram,
    /// Husimi gallery of the top-intensity states.
    Husimi,
    /// Stable/unstable manifold polylines.
    Manifolds,
    /// Primary homoclinic pair with invariants.
    Homoclinic,
    /// Interpolation-vs-oracle tables for the scaling functions.
    SpecialFunctions,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::CorrelationScan => "correlation-scan",
            Command::Spectrum => "spectrum",
            Command::Spacing => "spacing",
            Command::IprScan => "ipr-scan",
            Command::PhaseDiagram => "phase-diagram",
            Command::Husimi => "husimi",
            Command::Manifolds => "manifolds",
            Command::Homoclinic => "homoclinic",
            Command::SpecialFunctions => "special-functions",
        }
    }
}

fn main() -> ExitCode {
    // LAPACK calls happen inside rayon workers; keep BLAS single-threaded.
    std::env::set_var("OPENBLAS_NUM_THREADS", "1");
    let cli = Cli::parse();

    let cfg = match &cli.config {
        Some(path) => match ScanConfig::load(path) {
            Ok(cfg) => cfg,
            Err(e) => {
                eprintln!("config error: {e}");
                return ExitCode::from(1);
            }
        },
        None => ScanConfig::default(),
    };

    let fixtures = match &cli.seed_fixtures {
        Some(path) => {
            let parsed = std::fs::read_to_string(path)
                .map_err(|e| e.to_string())
                .and_then(|text| serde_json::from_str(&text).map_err(|e| e.to_string()));
            match parsed {
                Ok(f) => f,
                Err(e) => {
                    eprintln!("config error: cannot load fixtures from {}: {e}", path.display());
                    return ExitCode::from(1);
                }
            }
        }
        None => HomoclinicFixtures::default(),
    };

    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("config error: cannot configure {threads} threads: {e}");
            return ExitCode::from(1);
        }
    }

    let out = match runs::prepare_out_dir(&cli.out) {
        Ok(out) => out,
        Err(e) => {
            eprintln!("config error: cannot create {}: {e}", cli.out.display());
            return ExitCode::from(1);
        }
    };

    let mut manifest = RunManifest::new(cli.command.name(), cfg.echo());
    let result = match cli.command {
        Command::CorrelationScan => runs::correlation_scan(&cfg, &out, &mut manifest),
        Command::Spectrum => runs::spectrum(&cfg, &out, &mut manifest),
        Command::Spacing => runs::spacing_singularity(&cfg, &fixtures, &out, &mut manifest),
        Command::IprScan => runs::ipr_scan(&cfg, &out, &mut manifest),
        Command::PhaseDiagram => runs::phase_diagram(&cfg, &out, &mut manifest),
        Command::Husimi => runs::husimi_gallery(&cfg, &out, &mut manifest),
        Command::Manifolds => runs::manifolds(&cfg, &out, &mut manifest),
        Command::Homoclinic => runs::homoclinic_run(&cfg, &fixtures, &out, &mut manifest),
        Command::SpecialFunctions => runs::special_functions(&out, &mut manifest),
    };

    if let Err(e) = &result {
        manifest.task("run", || Err::<(), _>(e.to_string()));
    }
    let failed = manifest.failed_tasks();
    match manifest.write(&out) {
        Ok(path) => eprintln!("manifest: {}", path.display()),
        Err(e) => {
            eprintln!("cannot write manifest: {e}");
            return ExitCode::from(2);
        }
    }
    if result.is_err() || failed > 0 {
        eprintln!("{failed} task(s) failed");
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}
