use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use magcurv_cli::config::{ConfigError, Format, SchemaIssue};
use magcurv_cli::{load_config, run, Artifact};
use magcurv_core::SCHEMA_VERSION;
use serde::Serialize;

/// Magnetic curvature, closed magnetic geodesics and their certification.
///
/// Exit status: 0 when every requested check passes, 1 when a search or a
/// certification fails, 2 on configuration errors, 3 on runtime errors.
#[derive(Debug, Parser)]
#[command(name = "magcurv", version)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Override task.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override output.dir.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Override output.format.
    #[arg(long, value_parser = ["csv", "json"])]
    format: Option<String>,
    /// Progress messages on stderr.
    #[arg(long)]
    verbose: bool,
    /// Worker threads for parallel sections.
    #[arg(long, env = "MAGCURV_THREADS")]
    threads: Option<usize>,
}

#[derive(Serialize)]
struct ErrorBody {
    kind: &'static str,
    message: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    issues: Vec<SchemaIssue>,
}

#[derive(Serialize)]
struct ErrorReport {
    schema_version: u32,
    error: ErrorBody,
}

fn fail(kind: &'static str, message: String, issues: Vec<SchemaIssue>, code: u8) -> ExitCode {
    let report = ErrorReport { schema_version: SCHEMA_VERSION, error: ErrorBody { kind, message, issues } };
    println!("{}", serde_json::to_string_pretty(&report).expect("error report serializes"));
    ExitCode::from(code)
}

/// Write through temporary names so a failed write leaves no partial outputs.
fn write_all(dir: &Path, artifacts: &[Artifact]) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut staged = Vec::with_capacity(artifacts.len());
    for a in artifacts {
        let tmp = dir.join(format!(".{}.tmp", a.name));
        if let Err(e) = std::fs::write(&tmp, &a.contents) {
            for (t, _) in &staged {
                let _ = std::fs::remove_file(t);
            }
            return Err(e);
        }
        staged.push((tmp, dir.join(&a.name)));
    }
    for (tmp, dest) in &staged {
        std::fs::rename(tmp, dest)?;
    }
    Ok(staged.into_iter().map(|(_, d)| d).collect())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads.filter(|&n| n > 0) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let mut cfg = match load_config(&cli.config) {
        Ok(c) => c,
        Err(ConfigError::Schema(issues)) => {
            let msg = format!("{} schema error(s) in {}", issues.len(), cli.config.display());
            return fail("schema", msg, issues, 2);
        }
        Err(e) => return fail("config", e.to_string(), Vec::new(), 2),
    };
    if let Some(seed) = cli.seed {
        cfg.task.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = out.display().to_string();
    }
    if let Some(f) = cli.format.as_deref().and_then(Format::parse) {
        cfg.output.format = f;
    }
    let verbose = cli.verbose;
    let log = move |m: &str| {
        if verbose {
            eprintln!("[magcurv] {m}");
        }
    };
    let outcome = match run(&cfg, &log) {
        Ok(o) => o,
        Err(e) => return fail("runtime", format!("{e:#}"), Vec::new(), 3),
    };
    let written = match write_all(Path::new(&cfg.output.dir), &outcome.artifacts) {
        Ok(w) => w,
        Err(e) => return fail("io", e.to_string(), Vec::new(), 3),
    };
    println!("{}", outcome.summary);
    for path in written {
        println!("wrote {}", path.display());
    }
    if outcome.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
