//! `delone-lab`: reproducible experiments on hulls of aperiodic Delone sets.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid configuration,
//! 3 numerical divergence (a partial manifest is still written).

mod config;
mod experiments;
mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use delone::par;

use config::{Config, ExperimentKind};
use output::{sha256_hex, to_json_bytes, FileEntry, Manifest, Provenance};

const INVALID: u8 = 2;
const DIVERGED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "delone-lab",
    version,
    about = "Experiments on hulls of aperiodic Delone sets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Output directory; overrides `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config without running it.
    Validate { config: PathBuf },
    /// Print the available experiments.
    ListExperiments,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListExperiments => {
            for k in ExperimentKind::ALL {
                println!("{:<14} {}", k.name(), k.summary());
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config } => match load(&config) {
            Ok((cfg, _, _)) => {
                println!(
                    "ok: {} on a {}-dimensional set",
                    cfg.experiment.name(),
                    cfg.spec.dimension()
                );
                ExitCode::SUCCESS
            }
            Err(code) => code,
        },
        Command::Run { config, out } => run(&config, out),
    }
}

fn load(path: &Path) -> Result<(Config, experiments::Prepared, Vec<u8>), ExitCode> {
    let bytes = fs::read(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        ExitCode::from(1)
    })?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| {
        eprintln!("invalid config: {} is not UTF-8", path.display());
        ExitCode::from(INVALID)
    })?;
    let invalid = |e: config::ConfigError| {
        eprintln!("invalid config: {e}");
        ExitCode::from(INVALID)
    };
    let cfg = Config::parse(&text).map_err(invalid)?;
    let prep = experiments::prepare(&cfg).map_err(invalid)?;
    Ok((cfg, prep, bytes))
}

fn thread_cap() -> Result<(), ExitCode> {
    let Ok(v) = std::env::var("DELONE_LAB_THREADS") else {
        return Ok(());
    };
    match v.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            par::set_threads(n);
            Ok(())
        }
        _ => {
            eprintln!("invalid config: DELONE_LAB_THREADS must be a positive integer, got `{v}`");
            Err(ExitCode::from(INVALID))
        }
    }
}

fn run(path: &Path, out: Option<PathBuf>) -> ExitCode {
    let (cfg, prep, bytes) = match load(path) {
        Ok(x) => x,
        Err(code) => return code,
    };
    if let Err(code) = thread_cap() {
        return code;
    }
    let dir = out.unwrap_or_else(|| {
        let base = path.parent().unwrap_or(Path::new("."));
        base.join(&cfg.output_dir)
    });
    let provenance = Provenance {
        code_version: format!("delone-lab {} (delone {})", env!("CARGO_PKG_VERSION"), delone::VERSION),
        config_sha256: sha256_hex(&bytes),
        experiment: cfg.experiment.name().to_string(),
        seed: cfg.seed,
        truncation: serde_json::to_value(&cfg.parameters).expect("parameters serialize"),
    };
    let mut manifest = Manifest {
        tool: "delone-lab",
        provenance: provenance.clone(),
        spec: serde_json::from_str(&cfg.spec.to_json()).expect("spec round-trips"),
        backend: par::backend_name(),
        status: "ok",
        diagnostic: None,
        files: Vec::new(),
    };
    if let Err(e) = fs::create_dir_all(&dir) {
        eprintln!("error: cannot create {}: {e}", dir.display());
        return ExitCode::from(1);
    }

    let result = experiments::execute(&cfg, &prep);
    let artifacts = match result {
        Ok(a) => a,
        Err(e) if experiments::is_numerical(&e) => return diverged(&dir, manifest, e.to_string()),
        Err(e) => {
            eprintln!("invalid config: {e}");
            return ExitCode::from(INVALID);
        }
    };
    let mut failure = None;
    for a in &artifacts {
        if failure.is_none() {
            failure = a.non_finite();
        }
        let body = a.render(&provenance);
        if let Err(e) = fs::write(dir.join(a.name()), &body) {
            eprintln!("error: cannot write {}: {e}", a.name());
            return ExitCode::from(1);
        }
        manifest.files.push(FileEntry {
            name: a.name().to_string(),
            sha256: sha256_hex(&body),
        });
    }
    if let Some(msg) = failure {
        return diverged(&dir, manifest, format!("non-finite result: {msg}"));
    }
    if let Err(code) = write_manifest(&dir, &manifest) {
        return code;
    }
    println!(
        "{}: wrote {} files to {}",
        cfg.experiment.name(),
        manifest.files.len(),
        dir.display()
    );
    ExitCode::SUCCESS
}

fn write_manifest(dir: &Path, m: &Manifest) -> Result<(), ExitCode> {
    fs::write(dir.join("manifest.json"), to_json_bytes(m)).map_err(|e| {
        eprintln!("error: cannot write manifest: {e}");
        ExitCode::from(1)
    })
}

fn diverged(dir: &Path, mut m: Manifest, msg: String) -> ExitCode {
    eprintln!("diverged: {msg}");
    m.status = "diverged";
    m.diagnostic = Some(msg);
    match write_manifest(dir, &m) {
        Ok(()) => ExitCode::from(DIVERGED),
        Err(code) => code,
    }
}
