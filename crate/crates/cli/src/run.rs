//! Subcommand runners. Every run writes its data files and a manifest into
//! the output directory; rerunning a config reproduces them byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use krotov_core::io::{
    read_pulse, write_convergence, write_landscape, write_populations, write_pulse, write_spectrum,
};
use krotov_core::{
    band_filter_pulse, landscape_scan, pulse_spectrum, Direction, Optimizer, Propagator,
    PulseParametrization,
};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Optimize,
    Propagate,
    Landscape,
    Spectrum,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Optimize => "optimize",
            Command::Propagate => "propagate",
            Command::Landscape => "landscape",
            Command::Spectrum => "spectrum",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides `[output] dir`; the default is `runs/<config stem>`.
    pub out: Option<PathBuf>,
    /// Overrides `optimizer.max_iterations`.
    pub max_iter: Option<usize>,
    /// Suppress progress lines on stderr.
    pub quiet: bool,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    /// Output file names, manifest last.
    pub files: Vec<String>,
    /// Key-value lines also written to the manifest.
    pub facts: Vec<(String, String)>,
}

pub const PULSE_FILE: &str = "pulse.dat";
pub const CONVERGENCE_FILE: &str = "convergence.dat";
pub const SPECTRUM_FILE: &str = "spectrum.dat";
pub const POPULATIONS_FILE: &str = "populations.dat";
pub const LANDSCAPE_FILE: &str = "landscape.dat";
pub const MANIFEST_FILE: &str = "manifest.txt";

struct Writer {
    dir: PathBuf,
    files: Vec<String>,
}

impl Writer {
    fn new(dir: PathBuf) -> Result<Self> {
        fs::create_dir_all(&dir).map_err(|source| CliError::Io {
            path: dir.clone(),
            source,
        })?;
        Ok(Writer { dir, files: Vec::new() })
    }

    fn put(&mut self, name: &str, fill: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<()> {
        let path = self.dir.join(name);
        let mut buf = Vec::new();
        fill(&mut buf)
            .and_then(|_| fs::write(&path, &buf))
            .map_err(|source| CliError::Io { path, source })?;
        self.files.push(name.to_string());
        Ok(())
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn manifest(command: Command, config_bytes: &[u8], files: &[String], facts: &[(String, String)]) -> String {
    let mut s = String::from("# krotov run manifest\n");
    let _ = writeln!(s, "command {}", command.name());
    let _ = writeln!(s, "config_sha256 {}", sha256_hex(config_bytes));
    let _ = writeln!(s, "krotov-core {}", krotov_core::VERSION);
    let _ = writeln!(s, "krotov-cli {}", env!("CARGO_PKG_VERSION"));
    for (k, v) in facts {
        let _ = writeln!(s, "{k} {v}");
    }
    for f in files {
        let _ = writeln!(s, "output {f}");
    }
    let _ = writeln!(s, "output {MANIFEST_FILE}");
    s
}

/// Load `config_path` and run `command`.
pub fn run_command(command: Command, config_path: &Path, options: &RunOptions) -> Result<RunSummary> {
    let bytes = fs::read(config_path).map_err(|source| CliError::Io {
        path: config_path.to_path_buf(),
        source,
    })?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| CliError::Parse(format!("{}: not valid UTF-8", config_path.display())))?;
    let base = config_path.parent().map(Path::to_path_buf).unwrap_or_default();
    let config = RunConfig::from_str(&text, &base).map_err(|e| match e {
        CliError::Parse(m) => CliError::Parse(format!("{}: {m}", config_path.display())),
        other => other,
    })?;
    let out = options
        .out
        .clone()
        .or_else(|| config.output_dir())
        .unwrap_or_else(|| default_out_dir(config_path));
    let mut w = Writer::new(out)?;
    let facts = match command {
        Command::Optimize => optimize(&config, options, &mut w)?,
        Command::Propagate => propagate(&config, &mut w)?,
        Command::Landscape => landscape(&config, &mut w)?,
        Command::Spectrum => spectrum(&config, &mut w)?,
    };
    let text = manifest(command, &bytes, &w.files, &facts);
    w.put(MANIFEST_FILE, |b| {
        b.extend_from_slice(text.as_bytes());
        Ok(())
    })?;
    Ok(RunSummary {
        out_dir: w.dir,
        files: w.files,
        facts,
    })
}

/// `runs/<config stem>` under the working directory.
fn default_out_dir(config_path: &Path) -> PathBuf {
    let stem = config_path.file_stem().map(|s| s.to_os_string()).unwrap_or_else(|| "run".into());
    Path::new("runs").join(stem)
}

fn fact(k: &str, v: impl ToString) -> (String, String) {
    (k.to_string(), v.to_string())
}

fn optimize(config: &RunConfig, options: &RunOptions, w: &mut Writer) -> Result<Vec<(String, String)>> {
    let problem = config.optimization_problem(options.max_iter)?;
    let system = problem.system.clone();
    let quiet = options.quiet;
    let result = Optimizer::new(problem)?.run_with(|r| {
        if !quiet {
            eprintln!(
                "iter {:6}  J_T {:.6e}  J_a {:.3e}  J_b {:.6e}  J {:.9e}",
                r.iteration, r.j_t, r.j_a, r.j_b, r.j
            );
        }
    })?;
    let last = result.records.last().expect("at least the guess record");
    w.put(CONVERGENCE_FILE, |b| write_convergence(b, &result.records))?;
    w.put(PULSE_FILE, |b| write_pulse(b, &result.pulse))?;
    w.put(SPECTRUM_FILE, |b| write_spectrum(b, &pulse_spectrum(&result.pulse)))?;
    w.put(POPULATIONS_FILE, |b| write_populations(b, &system, &result.trajectories))?;
    Ok(vec![
        fact("iterations", last.iteration),
        fact("converged", result.converged),
        fact("final_j_t", format!("{:.16e}", last.j_t)),
    ])
}

fn source_pulse(config: &RunConfig, system: &krotov_core::LevelSystem) -> Result<krotov_core::Pulse> {
    let file = config.propagate.as_ref().and_then(|p| p.pulse_file.as_ref());
    match file {
        Some(f) => {
            let pulse = read_pulse(&config.resolve(f))?;
            if !pulse.grid().same_as(&config.grid()?) {
                return Err(CliError::Config(format!(
                    "{} is not sampled on the configured grid",
                    config.resolve(f).display()
                )));
            }
            Ok(pulse)
        }
        None => config.guess_pulse(system),
    }
}

fn propagate(config: &RunConfig, w: &mut Writer) -> Result<Vec<(String, String)>> {
    let system = config.system()?;
    let mut pulse = source_pulse(config, &system)?;
    let mut facts = Vec::new();
    let initial_labels = config.propagate.as_ref().and_then(|p| p.initial.as_deref());
    if let Some(p) = &config.propagate {
        if let Some(keep) = config.keep_intervals(p)? {
            pulse = band_filter_pulse(&pulse, &keep)?;
            facts.push(fact("band_filtered", keep.len()));
        }
    }
    let propagator = Propagator::new(&system, config.propagator_config()?);
    let trajectories = config
        .initial_states(&system, initial_labels)?
        .iter()
        .map(|psi| propagator.propagate(&pulse, psi, Direction::Forward))
        .collect::<krotov_core::Result<Vec<_>>>()?;
    if config.target.is_some() {
        let target = config.target(&system)?;
        let f: f64 = trajectories
            .iter()
            .map(|t| target.fidelity(t.final_state().as_slice()))
            .sum::<f64>()
            / trajectories.len() as f64;
        facts.push(fact("final_fidelity", format!("{f:.16e}")));
    }
    w.put(PULSE_FILE, |b| write_pulse(b, &pulse))?;
    w.put(POPULATIONS_FILE, |b| write_populations(b, &system, &trajectories))?;
    Ok(facts)
}

fn landscape(config: &RunConfig, w: &mut Writer) -> Result<Vec<(String, String)>> {
    let system = config.system()?;
    let grid = config.grid()?;
    let l = config
        .landscape
        .as_ref()
        .ok_or_else(|| CliError::Config("a [landscape] block is required".into()))?;
    let base = PulseParametrization::sodium(&system, 0.0, 0.0, config.landscape_tau()?)?;
    let merit = config.merit(&system)?;
    let result = landscape_scan(
        &system,
        &base,
        &l.e1_au.samples(),
        &l.e2_au.samples(),
        &grid,
        &merit,
        config.propagator_config()?,
    )?;
    w.put(LANDSCAPE_FILE, |b| write_landscape(b, &result, &l.merit))?;
    Ok(vec![fact("merit", &l.merit)])
}

fn spectrum(config: &RunConfig, w: &mut Writer) -> Result<Vec<(String, String)>> {
    let system = config.system()?;
    let pulse = source_pulse(config, &system)?;
    w.put(SPECTRUM_FILE, |b| write_spectrum(b, &pulse_spectrum(&pulse)))?;
    Ok(Vec::new())
}
