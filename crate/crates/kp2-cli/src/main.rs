//! `kp2` — command-line front end for the boundary-control workbench.
//!
//! One binary dispatches every module: critical-length arithmetic
//! (`crit`), exact spectra and the reduced-ODE indicator (`spectral`),
//! time-stepping (`simulate`), observability scans (`observability`),
//! control synthesis (`control`), and feedback stabilization
//! (`stabilize`, `lyapunov`).
//!
//! # Configuration and reproducibility
//!
//! Every numeric option can come from three places, highest precedence
//! first: command-line flag, JSON config file (`--config file.json`,
//! keys are the snake_case field names echoed below), built-in default.
//! The fully resolved configuration of each run is echoed to
//! `<prefix>_config.json` (or embedded in the stdout JSON for the query
//! commands), so a run can always be reproduced byte-for-byte by feeding
//! the echo back through `--config`.  Every text output starts with a
//! `# config sha256=…` comment (CSV) or carries a `config_sha256` member
//! (JSON) identifying the configuration that produced it.
//!
//! All file writes go through a temp-file-plus-rename so that readers
//! never observe a partial file.
//!
//! # Exit codes
//!
//! `0` success; `1` domain/usage errors (invalid flags or parameters,
//! theorem-hypothesis violations); `2` numerical failures (solver
//! breakdown, ill-conditioning, non-convergence).
//!
//! # Environment
//!
//! `KP2_THREADS` caps the worker-thread count for scan fan-out;
//! `KP2_SEED` sets the default RNG seed where one is used (observability
//! scans).

use std::env;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use ndarray::Array2;
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use kp2_core::crit_lengths::{
    contains, enumerate_r, CritError, CriticalParams, Verdict,
};
use kp2_core::hum_control::{
    synthesize_control, ControlProblem, HumError,
};
use kp2_core::observability::{
    scan, GridPolicy, ObsError, ObsMode, ScanConfig,
};
use kp2_core::pde_core::{
    estimate_report, simulate, ControlSignal, Field, Grid, PdeError, SimConfig, Trajectory,
};
use kp2_core::spectral::{
    build_spectrum, criticality_indicator, entire_witness, QuarticSpectrum, SpectralError,
    SpectralODEConfig,
};
use kp2_core::stabilization::{
    check_decay_bound, feedback_simulate, fit_decay, lyapunov_params, StabError,
};

// ---------------------------------------------------------------------
// Failure classification and exit codes
// ---------------------------------------------------------------------

/// A run failure, already classified into the exit-code scheme.
#[derive(Debug)]
enum Failure {
    /// Invalid parameters, usage errors, hypothesis violations → exit 1.
    Domain(String),
    /// Solver breakdown, non-convergence, ill-conditioning → exit 2.
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Domain(_) => 1,
            Failure::Numerical(_) => 2,
        }
    }
    fn message(&self) -> &str {
        match self {
            Failure::Domain(m) | Failure::Numerical(m) => m,
        }
    }
}

impl From<PdeError> for Failure {
    fn from(e: PdeError) -> Self {
        match e {
            PdeError::IllConditioned { .. }
            | PdeError::Solver { .. }
            | PdeError::NanDetected { .. }
            | PdeError::DissipativityViolated { .. } => Failure::Numerical(e.to_string()),
            _ => Failure::Domain(e.to_string()),
        }
    }
}

impl From<ObsError> for Failure {
    fn from(e: ObsError) -> Self {
        match e {
            ObsError::NotConverged { .. } => Failure::Numerical(e.to_string()),
            ObsError::Pde(p) => p.into(),
            _ => Failure::Domain(e.to_string()),
        }
    }
}

impl From<HumError> for Failure {
    fn from(e: HumError) -> Self {
        match e {
            HumError::Stagnation { .. } | HumError::NotConverged { .. } => {
                Failure::Numerical(e.to_string())
            }
            HumError::Pde(p) => p.into(),
            HumError::Obs(o) => o.into(),
            _ => Failure::Domain(e.to_string()),
        }
    }
}

impl From<StabError> for Failure {
    fn from(e: StabError) -> Self {
        match e {
            StabError::Pde(p) => p.into(),
            _ => Failure::Domain(e.to_string()),
        }
    }
}

impl From<CritError> for Failure {
    fn from(e: CritError) -> Self {
        Failure::Domain(e.to_string())
    }
}

impl From<SpectralError> for Failure {
    fn from(e: SpectralError) -> Self {
        match e {
            SpectralError::Eigensolve { .. } => Failure::Numerical(e.to_string()),
            _ => Failure::Domain(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Domain(format!("i/o error: {e}"))
    }
}

type RunResult = Result<(), Failure>;

// ---------------------------------------------------------------------
// Command-line surface
// ---------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "kp2",
    version,
    about = "Numerical workbench for boundary control of the linear KP-II equation on a square",
    propagate_version = true
)]
struct Cli {
    /// JSON config file; command-line flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Critical-length set: enumeration and membership queries.
    Crit {
        #[command(subcommand)]
        sub: CritCmd,
    },
    /// Exact quartic spectra and the reduced-ODE criticality indicator.
    Spectral {
        #[command(subcommand)]
        sub: SpectralCmd,
    },
    /// Time-step the homogeneous, feedback, or boundary-forced system.
    Simulate(SimulateArgs),
    /// Observability-constant estimation.
    Observability {
        #[command(subcommand)]
        sub: ObsCmd,
    },
    /// Boundary-control synthesis.
    Control {
        #[command(subcommand)]
        sub: ControlCmd,
    },
    /// Run the feedback system and certify/report its decay.
    Stabilize(StabilizeArgs),
    /// Print the explicit decay certificate for (L, alpha, safety).
    Lyapunov(LyapunovArgs),
}

#[derive(Subcommand)]
enum CritCmd {
    /// List all members of the critical set in a length window.
    Enumerate(CritEnumerateArgs),
    /// Test whether a length is (witnessed) critical; JSON to stdout.
    Check(CritCheckArgs),
}

#[derive(Args)]
struct CritEnumerateArgs {
    /// Lower end of the length window (exclusive of 0).
    #[arg(long)]
    lmin: Option<f64>,
    /// Upper end of the length window.
    #[arg(long)]
    lmax: Option<f64>,
    /// Cap on each of m1, m2, m3 [default: 10].
    #[arg(long)]
    mcap: Option<u32>,
    /// Output CSV path (columns L,n,m1,m2,m3,P).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CritCheckArgs {
    /// Queried side length.
    #[arg(long)]
    length: Option<f64>,
    /// Absolute matching tolerance [default: 1e-9].
    #[arg(long)]
    tol: Option<f64>,
    /// Cap on each of m1, m2, m3 [default: 10].
    #[arg(long)]
    mcap: Option<u32>,
}

#[derive(Subcommand)]
enum SpectralCmd {
    /// Exact root/Vieta report for one (n, m1, m2, m3) quadruple.
    Report(SpectralReportArgs),
    /// Scan the reduced-ODE criticality indicator over a length window.
    Scan(SpectralScanArgs),
}

#[derive(Args)]
struct SpectralReportArgs {
    #[arg(long)]
    n: Option<u32>,
    #[arg(long)]
    m1: Option<u32>,
    #[arg(long)]
    m2: Option<u32>,
    #[arg(long)]
    m3: Option<u32>,
    /// Output JSON path.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SpectralScanArgs {
    /// Separation constant xi (0 for the 1-D reduction) [default: 0].
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long)]
    lmin: Option<f64>,
    #[arg(long)]
    lmax: Option<f64>,
    /// Number of evenly spaced lengths [default: 33].
    #[arg(long)]
    steps: Option<usize>,
    /// Number of grid cells for the reduced ODE [default: 256].
    #[arg(long, value_name = "N")]
    grid: Option<usize>,
    /// Output CSV path (columns L,indicator).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Side length of the square domain.
    #[arg(long = "L")]
    l: Option<f64>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    ny: Option<usize>,
    /// Horizon (must be an integer multiple of dt).
    #[arg(long = "T")]
    t: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    /// Boundary mode: hom | feedback | control [default: hom].
    #[arg(long)]
    mode: Option<String>,
    /// Feedback gain (feedback mode) [default: 0.5].
    #[arg(long)]
    alpha: Option<f64>,
    /// Initial state: zero | sine | sine2 | file:PATH [default: sine].
    #[arg(long)]
    u0: Option<String>,
    /// Boundary-signal CSV for control mode (as written by `control
    /// synth`); zero signal when omitted.
    #[arg(long, value_name = "FILE")]
    signal: Option<PathBuf>,
    /// Output prefix (writes PREFIX_energy.csv, PREFIX_final.field,
    /// PREFIX_report.json, PREFIX_config.json).
    #[arg(long, value_name = "PREFIX")]
    out: Option<String>,
}

#[derive(Subcommand)]
enum ObsCmd {
    /// Estimate lambda_min of the observability Gramian over a length grid.
    Scan(ObsScanArgs),
}

#[derive(Args)]
struct ObsScanArgs {
    /// Observation mode: ctrl | stab.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    lmin: Option<f64>,
    #[arg(long)]
    lmax: Option<f64>,
    /// Number of evenly spaced lengths.
    #[arg(long)]
    steps: Option<usize>,
    /// Observation horizon.
    #[arg(long = "T")]
    t: Option<f64>,
    /// Target mesh width; the grid for each L is derived from it.
    #[arg(long = "dx-target")]
    dx_target: Option<f64>,
    /// Time step [default: 0.01].
    #[arg(long)]
    dt: Option<f64>,
    /// Feedback gain for stab mode [default: 0.5].
    #[arg(long)]
    alpha: Option<f64>,
    /// Eigenvalue-iteration relative tolerance [default: 1e-8].
    #[arg(long)]
    tol: Option<f64>,
    /// Eigenvalue-iteration cap [default: 2000].
    #[arg(long)]
    maxit: Option<usize>,
    /// RNG seed [default: KP2_SEED or 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path (columns L,lambda_min,C_obs,iters,converged).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ControlCmd {
    /// Synthesize the boundary control steering u0 to uT at time T.
    Synth(ControlSynthArgs),
}

#[derive(Args)]
struct ControlSynthArgs {
    /// Side length of the square domain.
    #[arg(long = "L")]
    l: Option<f64>,
    /// Control horizon.
    #[arg(long = "T")]
    t: Option<f64>,
    /// Grid as NXxNY, e.g. 48x24.
    #[arg(long, value_name = "NXxNY")]
    grid: Option<String>,
    /// Time step [default: 0.01].
    #[arg(long)]
    dt: Option<f64>,
    /// Initial state preset: zero | sine | sine2 | file:PATH [default: zero].
    #[arg(long)]
    u0: Option<String>,
    /// Target state preset: zero | sine | sine2 | file:PATH [default: sine].
    #[arg(long = "uT")]
    u_t: Option<String>,
    /// CG relative-residual tolerance [default: 1e-6].
    #[arg(long)]
    tol: Option<f64>,
    /// CG iteration cap [default: 500].
    #[arg(long)]
    maxit: Option<usize>,
    /// Output prefix (writes PREFIX_h.csv, PREFIX_sol.json,
    /// PREFIX_config.json).
    #[arg(long, value_name = "PREFIX")]
    out: Option<String>,
}

#[derive(Args)]
struct StabilizeArgs {
    /// Side length of the square domain.
    #[arg(long = "L")]
    l: Option<f64>,
    /// Feedback gain [default: 0.5].
    #[arg(long)]
    alpha: Option<f64>,
    /// Horizon.
    #[arg(long = "T")]
    t: Option<f64>,
    /// Grid as NXxNY, e.g. 64x32.
    #[arg(long, value_name = "NXxNY")]
    grid: Option<String>,
    /// Time step [default: 0.01].
    #[arg(long)]
    dt: Option<f64>,
    /// Safety fraction for the certificate [default: 0.9].
    #[arg(long)]
    safety: Option<f64>,
    /// Initial state preset: zero | sine | sine2 | file:PATH [default: sine].
    #[arg(long)]
    u0: Option<String>,
    /// Output prefix (writes PREFIX_energy.csv, PREFIX_certificate.json,
    /// PREFIX_fit.json, PREFIX_config.json).
    #[arg(long, value_name = "PREFIX")]
    out: Option<String>,
}

#[derive(Args)]
struct LyapunovArgs {
    /// Side length (theorem hypothesis: 0 < L < sqrt(3)).
    #[arg(long = "L")]
    l: Option<f64>,
    /// Feedback gain [default: 0.5].
    #[arg(long)]
    alpha: Option<f64>,
    /// Safety fraction in (0, 1) [default: 0.9].
    #[arg(long)]
    safety: Option<f64>,
}

// ---------------------------------------------------------------------
// Config-file merge helpers
// ---------------------------------------------------------------------

/// Loads the JSON config file, if given, and rejects echoes of a
/// different subcommand.
fn load_config(path: Option<&Path>, subcommand: &str) -> Result<Option<Value>, Failure> {
    let Some(path) = path else { return Ok(None) };
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Domain(format!("config file {}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| Failure::Domain(format!("config file {}: {e}", path.display())))?;
    if !value.is_object() {
        return Err(Failure::Domain(format!(
            "config file {}: expected a JSON object",
            path.display()
        )));
    }
    if let Some(tag) = value.get("subcommand").and_then(Value::as_str) {
        if tag != subcommand {
            return Err(Failure::Domain(format!(
                "config file {} is for subcommand '{tag}', not '{subcommand}'",
                path.display()
            )));
        }
    }
    Ok(Some(value))
}

/// Flag value if present, else the config-file value under `key`.
fn resolve<T: serde::de::DeserializeOwned>(
    flag: Option<T>,
    file: &Option<Value>,
    key: &str,
) -> Result<Option<T>, Failure> {
    if flag.is_some() {
        return Ok(flag);
    }
    let Some(obj) = file else { return Ok(None) };
    match obj.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => serde_json::from_value(v.clone())
            .map(Some)
            .map_err(|e| Failure::Domain(format!("config key '{key}': {e}"))),
    }
}

/// Unwraps a merged option or reports the missing key as a usage error.
fn require<T>(v: Option<T>, key: &str) -> Result<T, Failure> {
    v.ok_or_else(|| Failure::Domain(format!("missing required option '{key}' (flag or config file)")))
}

/// Default seed: `KP2_SEED` if set and parseable, else 0.
fn seed_default() -> u64 {
    env::var("KP2_SEED")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(0)
}

// ---------------------------------------------------------------------
// Output helpers (atomic writes, hashing, formats)
// ---------------------------------------------------------------------

/// SHA-256 of the compact JSON serialization of the resolved config.
fn config_hash(resolved: &impl Serialize) -> String {
    let compact = serde_json::to_string(resolved).expect("config serializes");
    let digest = Sha256::digest(compact.as_bytes());
    let mut hex = String::with_capacity(64);
    for b in digest {
        let _ = write!(hex, "{b:02x}");
    }
    hex
}

/// Writes bytes through a temp file in the target directory + rename, so
/// concurrent readers never see a partial file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .map_err(|e| Failure::Domain(format!("temp file in {}: {e}", dir.display())))?;
    tmp.write_all(bytes)?;
    tmp.persist(path)
        .map_err(|e| Failure::Domain(format!("renaming into {}: {e}", path.display())))?;
    Ok(())
}

/// CSV with the config-hash header comment.
fn write_csv(path: &Path, hash: &str, header: &str, rows: &[String]) -> Result<(), Failure> {
    let mut s = String::new();
    let _ = writeln!(s, "# config sha256={hash}");
    let _ = writeln!(s, "{header}");
    for r in rows {
        let _ = writeln!(s, "{r}");
    }
    write_atomic(path, s.as_bytes())
}

/// JSON object with the config hash inserted, pretty-printed.
fn json_with_hash(mut value: Value, hash: &str) -> String {
    value
        .as_object_mut()
        .expect("JSON outputs are objects")
        .insert("config_sha256".into(), json!(hash));
    let mut s = serde_json::to_string_pretty(&value).expect("serializable");
    s.push('\n');
    s
}

fn write_json(path: &Path, value: Value, hash: &str) -> Result<(), Failure> {
    write_atomic(path, json_with_hash(value, hash).as_bytes())
}

/// Echoes the resolved config to `<prefix>_config.json`.
fn echo_config(prefix: &str, resolved: &impl Serialize) -> Result<(), Failure> {
    let mut s = serde_json::to_string_pretty(resolved).expect("config serializes");
    s.push('\n');
    write_atomic(Path::new(&format!("{prefix}_config.json")), s.as_bytes())
}

/// Prefix for sidecar files of `--out file.ext` commands: the path minus
/// its extension.
fn stem_prefix(out: &Path) -> String {
    let stem = out.with_extension("");
    stem.to_string_lossy().into_owned()
}

// ---------------------------------------------------------------------
// Field and signal I/O
// ---------------------------------------------------------------------

/// Builds an initial/target state from a preset name or a field dump.
///
/// `sine` is the lowest product sine mode and `sine2` its slope-compatible
/// variant `sin²(πx/L)·sin(πy/L)`; both are normalized to unit grid norm.
fn preset_field(grid: Grid, spec: &str) -> Result<Field, Failure> {
    let pi = std::f64::consts::PI;
    let l = grid.l();
    let normalized = |f: Field| -> Result<Field, Failure> {
        let n = f.norm_h_sq().sqrt();
        if n == 0.0 {
            return Err(Failure::Domain("preset field is identically zero".into()));
        }
        Ok(Field::new(grid, f.values() / n).map_err(PdeError::from)?)
    };
    match spec {
        "zero" => Ok(Field::zeros(grid)),
        "sine" => normalized(Field::from_fn(grid, |x, y| {
            (pi * x / l).sin() * (pi * y / l).sin()
        })),
        "sine2" => normalized(Field::from_fn(grid, |x, y| {
            (pi * x / l).sin().powi(2) * (pi * y / l).sin()
        })),
        other => {
            if let Some(path) = other.strip_prefix("file:") {
                read_field_dump(Path::new(path), grid)
            } else {
                Err(Failure::Domain(format!(
                    "unknown state preset '{other}' (expected zero | sine | sine2 | file:PATH)"
                )))
            }
        }
    }
}

const FIELD_MAGIC: &[u8; 4] = b"KP2F";
const FIELD_HEADER_LEN: usize = 32;

/// Binary field dump: 32-byte header (magic "KP2F", u32 Nx, u32 Ny,
/// f64 L, f64 t, 4 zero pad bytes), then Nx·Ny little-endian f64 values
/// in row-of-fixed-y order.
fn write_field_dump(path: &Path, f: &Field, t: f64) -> Result<(), Failure> {
    let g = f.grid();
    let mut bytes = Vec::with_capacity(FIELD_HEADER_LEN + 8 * g.dofs());
    bytes.extend_from_slice(FIELD_MAGIC);
    bytes.extend_from_slice(&(g.nx() as u32).to_le_bytes());
    bytes.extend_from_slice(&(g.ny() as u32).to_le_bytes());
    bytes.extend_from_slice(&g.l().to_le_bytes());
    bytes.extend_from_slice(&t.to_le_bytes());
    bytes.extend_from_slice(&[0u8; 4]);
    debug_assert_eq!(bytes.len(), FIELD_HEADER_LEN);
    for v in f.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    write_atomic(path, &bytes)
}

/// Reads a field dump and checks it matches the run's grid.
fn read_field_dump(path: &Path, grid: Grid) -> Result<Field, Failure> {
    let bytes = fs::read(path)
        .map_err(|e| Failure::Domain(format!("field dump {}: {e}", path.display())))?;
    let bad = |detail: &str| {
        Failure::Domain(format!("field dump {}: {detail}", path.display()))
    };
    if bytes.len() < FIELD_HEADER_LEN || &bytes[0..4] != FIELD_MAGIC {
        return Err(bad("missing KP2F header"));
    }
    let nx = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let ny = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let l = f64::from_le_bytes(bytes[12..20].try_into().unwrap());
    if nx != grid.nx() || ny != grid.ny() {
        return Err(bad(&format!(
            "grid mismatch: dump is {nx}x{ny}, run is {}x{}",
            grid.nx(),
            grid.ny()
        )));
    }
    if (l - grid.l()).abs() > 1e-12 * grid.l().max(1.0) {
        return Err(bad(&format!(
            "side-length mismatch: dump L = {l}, run L = {}",
            grid.l()
        )));
    }
    let expected = FIELD_HEADER_LEN + 8 * nx * ny;
    if bytes.len() != expected {
        return Err(bad(&format!(
            "size mismatch: {} bytes, expected {expected}",
            bytes.len()
        )));
    }
    let values = (0..nx * ny)
        .map(|i| {
            let o = FIELD_HEADER_LEN + 8 * i;
            f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap())
        })
        .collect();
    Ok(Field::new(grid, values).map_err(PdeError::from)?)
}

/// Reads a boundary-signal CSV (`t,y,h`, as written by `control synth`)
/// back into the `(Nt+1) x Ny` node lattice.
fn read_signal_csv(path: &Path, nt: usize, ny: usize) -> Result<ControlSignal, Failure> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Failure::Domain(format!("signal file {}: {e}", path.display())))?;
    let mut values = Array2::zeros((nt + 1, ny));
    let mut count = 0usize;
    for record in rdr.records() {
        let record =
            record.map_err(|e| Failure::Domain(format!("signal file {}: {e}", path.display())))?;
        if record.len() != 3 {
            return Err(Failure::Domain(format!(
                "signal file {}: expected 3 columns t,y,h, found {}",
                path.display(),
                record.len()
            )));
        }
        let h: f64 = record[2].parse().map_err(|e| {
            Failure::Domain(format!("signal file {}: bad h value: {e}", path.display()))
        })?;
        if count >= (nt + 1) * ny {
            return Err(Failure::Domain(format!(
                "signal file {}: more rows than the {}x{ny} node lattice",
                path.display(),
                nt + 1
            )));
        }
        values[[count / ny, count % ny]] = h;
        count += 1;
    }
    if count != (nt + 1) * ny {
        return Err(Failure::Domain(format!(
            "signal file {}: {count} data rows, expected {} for the {}x{ny} node lattice",
            path.display(),
            (nt + 1) * ny,
            nt + 1
        )));
    }
    Ok(ControlSignal::new(values).map_err(PdeError::from)?)
}

/// Energy CSV rows shared by `simulate` and `stabilize`: per time node,
/// the energy and the weighted l2 norms of the three recorded traces.
fn energy_csv(traj: &Trajectory) -> (&'static str, Vec<String>) {
    let dy = traj.grid.dy();
    let l2 = |row: ndarray::ArrayView1<f64>| (dy * row.iter().map(|v| v * v).sum::<f64>()).sqrt();
    let rows = traj
        .times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            format!(
                "{},{},{},{},{}",
                t,
                traj.energy[k],
                l2(traj.ux0.row(k)),
                l2(traj.uxl.row(k)),
                l2(traj.nonlocal0.row(k)),
            )
        })
        .collect();
    ("t,E,ux0_l2,uxL_l2,nonlocal0_l2", rows)
}

/// Parses `NXxNY`.
fn parse_grid_spec(spec: &str) -> Result<(usize, usize), Failure> {
    let mut it = spec.split('x');
    let (Some(a), Some(b), None) = (it.next(), it.next(), it.next()) else {
        return Err(Failure::Domain(format!(
            "grid '{spec}' is not of the form NXxNY"
        )));
    };
    let nx = a
        .parse()
        .map_err(|e| Failure::Domain(format!("grid '{spec}': {e}")))?;
    let ny = b
        .parse()
        .map_err(|e| Failure::Domain(format!("grid '{spec}': {e}")))?;
    Ok((nx, ny))
}

/// Evenly spaced scan points (a single point degenerates to `lmin`).
fn linspace(lmin: f64, lmax: f64, steps: usize) -> Result<Vec<f64>, Failure> {
    if steps == 0 {
        return Err(Failure::Domain("steps must be >= 1".into()));
    }
    if !(lmin.is_finite() && lmax.is_finite() && lmax >= lmin) {
        return Err(Failure::Domain(format!(
            "invalid length window [{lmin}, {lmax}]"
        )));
    }
    if steps == 1 {
        return Ok(vec![lmin]);
    }
    Ok((0..steps)
        .map(|i| lmin + (lmax - lmin) * i as f64 / (steps - 1) as f64)
        .collect())
}

// ---------------------------------------------------------------------
// crit
// ---------------------------------------------------------------------

#[derive(Serialize)]
struct CritEnumerateConfig {
    subcommand: &'static str,
    lmin: f64,
    lmax: f64,
    m_cap: u32,
    out: PathBuf,
}

fn run_crit_enumerate(args: CritEnumerateArgs, file: &Option<Value>) -> RunResult {
    let cfg = CritEnumerateConfig {
        subcommand: "crit-enumerate",
        lmin: require(resolve(args.lmin, file, "lmin")?, "lmin")?,
        lmax: require(resolve(args.lmax, file, "lmax")?, "lmax")?,
        m_cap: resolve(args.mcap, file, "m_cap")?.unwrap_or(10),
        out: require(resolve(args.out, file, "out")?, "out")?,
    };
    let hash = config_hash(&cfg);
    echo_config(&stem_prefix(&cfg.out), &cfg)?;

    let members = enumerate_r(cfg.lmin, cfg.lmax, cfg.m_cap)?;
    let rows: Vec<String> = members
        .iter()
        .map(|m| {
            let (m1, m2, m3) = m.params.m();
            format!(
                "{},{},{},{},{},{}",
                m.value,
                m.params.n(),
                m1,
                m2,
                m3,
                m.product
            )
        })
        .collect();
    write_csv(&cfg.out, &hash, "L,n,m1,m2,m3,P", &rows)?;
    eprintln!(
        "crit enumerate: {} members in [{}, {}] with m <= {} -> {}",
        rows.len(),
        cfg.lmin,
        cfg.lmax,
        cfg.m_cap,
        cfg.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct CritCheckConfig {
    subcommand: &'static str,
    length: f64,
    tol: f64,
    m_cap: u32,
}

fn run_crit_check(args: CritCheckArgs, file: &Option<Value>) -> RunResult {
    let cfg = CritCheckConfig {
        subcommand: "crit-check",
        length: require(resolve(args.length, file, "length")?, "length")?,
        tol: resolve(args.tol, file, "tol")?.unwrap_or(1e-9),
        m_cap: resolve(args.mcap, file, "m_cap")?.unwrap_or(10),
    };
    if !(cfg.length.is_finite() && cfg.length > 0.0) {
        return Err(Failure::Domain(format!(
            "length must be positive and finite, got {}",
            cfg.length
        )));
    }
    if !(cfg.tol.is_finite() && cfg.tol >= 0.0) {
        return Err(Failure::Domain(format!(
            "tol must be nonnegative, got {}",
            cfg.tol
        )));
    }
    let hash = config_hash(&cfg);

    let verdict = contains(cfg.length, cfg.tol, cfg.m_cap);
    let witness = match &verdict {
        Verdict::Member(p) => {
            let member = kp2_core::crit_lengths::CriticalLength::new(*p);
            let (m1, m2, m3) = p.m();
            json!({
                "n": p.n(),
                "m1": m1,
                "m2": m2,
                "m3": m3,
                "product": member.product.to_string(),
                "length": member.value,
            })
        }
        Verdict::NoWitnessUnderCap => Value::Null,
    };
    let out = json!({
        "config": serde_json::to_value(&cfg).expect("config serializes"),
        "member": matches!(verdict, Verdict::Member(_)),
        "witness": witness,
    });
    print!("{}", json_with_hash(out, &hash));
    Ok(())
}

// ---------------------------------------------------------------------
// spectral
// ---------------------------------------------------------------------

#[derive(Serialize)]
struct SpectralReportConfig {
    subcommand: &'static str,
    n: u32,
    m1: u32,
    m2: u32,
    m3: u32,
    out: PathBuf,
}

fn spectrum_json(spec: &QuarticSpectrum) -> Value {
    let residuals: Vec<Value> = (0..4)
        .map(|i| {
            let exact = spec
                .exact
                .as_ref()
                .map(|e| e.residuals[i].to_string())
                .unwrap_or_default();
            json!({ "float": spec.vieta_residuals[i], "exact": exact })
        })
        .collect();
    let witness = entire_witness(spec);
    let complex_json = |z: Complex64| json!({ "re": z.re, "im": z.im });
    let (m1, m2, m3) = spec.params.m();
    json!({
        "n": spec.params.n(),
        "m1": m1,
        "m2": m2,
        "m3": m3,
        "product": spec.exact.as_ref().map(|e| e.product.to_string()),
        "l": spec.l,
        "kappa": spec.kappa,
        "sigma": spec.sigma,
        "sigma_exact": spec.exact.as_ref().map(|e| e.sigma.to_string()),
        "residuals": residuals,
        "witness": {
            "alpha1": complex_json(witness.alpha1),
            "alpha2": complex_json(witness.alpha2),
            "max_abs_r1_at_roots": witness.max_abs_r1_at_roots,
        },
    })
}

fn run_spectral_report(args: SpectralReportArgs, file: &Option<Value>) -> RunResult {
    let cfg = SpectralReportConfig {
        subcommand: "spectral-report",
        n: require(resolve(args.n, file, "n")?, "n")?,
        m1: require(resolve(args.m1, file, "m1")?, "m1")?,
        m2: require(resolve(args.m2, file, "m2")?, "m2")?,
        m3: require(resolve(args.m3, file, "m3")?, "m3")?,
        out: require(resolve(args.out, file, "out")?, "out")?,
    };
    let hash = config_hash(&cfg);
    echo_config(&stem_prefix(&cfg.out), &cfg)?;

    let params = CriticalParams::new(cfg.n, cfg.m1, cfg.m2, cfg.m3)?;
    let spec = build_spectrum(&params)?;
    write_json(&cfg.out, spectrum_json(&spec), &hash)?;
    eprintln!("spectral report -> {}", cfg.out.display());
    Ok(())
}

#[derive(Serialize)]
struct SpectralScanConfig {
    subcommand: &'static str,
    xi: f64,
    lmin: f64,
    lmax: f64,
    steps: usize,
    grid: usize,
    out: PathBuf,
}

fn run_spectral_scan(args: SpectralScanArgs, file: &Option<Value>) -> RunResult {
    let cfg = SpectralScanConfig {
        subcommand: "spectral-scan",
        xi: resolve(args.xi, file, "xi")?.unwrap_or(0.0),
        lmin: require(resolve(args.lmin, file, "lmin")?, "lmin")?,
        lmax: require(resolve(args.lmax, file, "lmax")?, "lmax")?,
        steps: resolve(args.steps, file, "steps")?.unwrap_or(33),
        grid: resolve(args.grid, file, "grid")?.unwrap_or(256),
        out: require(resolve(args.out, file, "out")?, "out")?,
    };
    let hash = config_hash(&cfg);
    echo_config(&stem_prefix(&cfg.out), &cfg)?;

    let mut rows = Vec::with_capacity(cfg.steps);
    for l in linspace(cfg.lmin, cfg.lmax, cfg.steps)? {
        let ode = SpectralODEConfig::new(cfg.xi, l, cfg.grid)?;
        let indicator = criticality_indicator(&ode)?;
        rows.push(format!("{l},{indicator}"));
    }
    write_csv(&cfg.out, &hash, "L,indicator", &rows)?;
    eprintln!("spectral scan: {} lengths -> {}", rows.len(), cfg.out.display());
    Ok(())
}

// ---------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------

#[derive(Serialize)]
struct SimulateConfig {
    subcommand: &'static str,
    l: f64,
    nx: usize,
    ny: usize,
    t: f64,
    dt: f64,
    mode: String,
    alpha: f64,
    u0: String,
    signal: Option<PathBuf>,
    out: String,
}

fn run_simulate(args: SimulateArgs, file: &Option<Value>) -> RunResult {
    let cfg = SimulateConfig {
        subcommand: "simulate",
        l: require(resolve(args.l, file, "l")?, "L")?,
        nx: require(resolve(args.nx, file, "nx")?, "nx")?,
        ny: require(resolve(args.ny, file, "ny")?, "ny")?,
        t: require(resolve(args.t, file, "t")?, "T")?,
        dt: require(resolve(args.dt, file, "dt")?, "dt")?,
        mode: resolve(args.mode, file, "mode")?.unwrap_or_else(|| "hom".into()),
        alpha: resolve(args.alpha, file, "alpha")?.unwrap_or(0.5),
        u0: resolve(args.u0, file, "u0")?.unwrap_or_else(|| "sine".into()),
        signal: resolve(args.signal, file, "signal")?,
        out: require(resolve(args.out, file, "out")?, "out")?,
    };
    let hash = config_hash(&cfg);
    echo_config(&cfg.out, &cfg)?;

    let grid = Grid::new(cfg.l, cfg.nx, cfg.ny)?;
    let u0 = preset_field(grid, &cfg.u0)?;
    let sim = match cfg.mode.as_str() {
        "hom" => SimConfig::homogeneous(cfg.t, cfg.dt),
        "feedback" => SimConfig::feedback(cfg.t, cfg.dt, cfg.alpha),
        "control" => SimConfig::control(cfg.t, cfg.dt),
        other => {
            return Err(Failure::Domain(format!(
                "unknown mode '{other}' (expected hom | feedback | control)"
            )))
        }
    };
    let signal = if matches!(cfg.mode.as_str(), "control") {
        let nt = sim.steps()?;
        Some(match &cfg.signal {
            Some(path) => read_signal_csv(path, nt, grid.ny())?,
            None => ControlSignal::zeros(nt, grid.ny()),
        })
    } else {
        if cfg.signal.is_some() {
            return Err(Failure::Domain(
                "--signal is only meaningful with --mode control".into(),
            ));
        }
        None
    };

    let traj = simulate(&u0, &sim, signal.as_ref())?;
    let (header, rows) = energy_csv(&traj);
    write_csv(
        Path::new(&format!("{}_energy.csv", cfg.out)),
        &hash,
        header,
        &rows,
    )?;
    write_field_dump(
        Path::new(&format!("{}_final.field", cfg.out)),
        &traj.final_state,
        *traj.times.last().expect("nonempty trajectory"),
    )?;
    let report = estimate_report(&traj, &u0)?;
    write_json(
        Path::new(&format!("{}_report.json", cfg.out)),
        serde_json::to_value(&report).expect("report serializes"),
        &hash,
    )?;
    eprintln!(
        "simulate: {} steps on {}x{} -> {}_{{energy.csv,final.field,report.json}}",
        traj.steps(),
        cfg.nx,
        cfg.ny,
        cfg.out
    );
    Ok(())
}

// ---------------------------------------------------------------------
// observability
// ---------------------------------------------------------------------

#[derive(Serialize)]
struct ObsScanConfigEcho {
    subcommand: &'static str,
    mode: String,
    lmin: f64,
    lmax: f64,
    steps: usize,
    t: f64,
    dx_target: f64,
    dt: f64,
    alpha: f64,
    tol: f64,
    maxit: usize,
    seed: u64,
    out: PathBuf,
}

fn run_obs_scan(args: ObsScanArgs, file: &Option<Value>) -> RunResult {
    let cfg = ObsScanConfigEcho {
        subcommand: "observability-scan",
        mode: require(resolve(args.mode, file, "mode")?, "mode")?,
        lmin: require(resolve(args.lmin, file, "lmin")?, "lmin")?,
        lmax: require(resolve(args.lmax, file, "lmax")?, "lmax")?,
        steps: require(resolve(args.steps, file, "steps")?, "steps")?,
        t: require(resolve(args.t, file, "t")?, "T")?,
        dx_target: require(resolve(args.dx_target, file, "dx_target")?, "dx-target")?,
        dt: resolve(args.dt, file, "dt")?.unwrap_or(0.01),
        alpha: resolve(args.alpha, file, "alpha")?.unwrap_or(0.5),
        tol: resolve(args.tol, file, "tol")?.unwrap_or(1e-8),
        maxit: resolve(args.maxit, file, "maxit")?.unwrap_or(2000),
        seed: resolve(args.seed, file, "seed")?.unwrap_or_else(seed_default),
        out: require(resolve(args.out, file, "out")?, "out")?,
    };
    let hash = config_hash(&cfg);
    echo_config(&stem_prefix(&cfg.out), &cfg)?;

    let mode = match cfg.mode.as_str() {
        "ctrl" => ObsMode::Ctrl,
        "stab" => ObsMode::Stab { alpha: cfg.alpha },
        other => {
            return Err(Failure::Domain(format!(
                "unknown mode '{other}' (expected ctrl | stab)"
            )))
        }
    };
    let scan_cfg = ScanConfig {
        l_values: linspace(cfg.lmin, cfg.lmax, cfg.steps)?,
        t: cfg.t,
        dt: cfg.dt,
        mode,
        policy: GridPolicy {
            dx_target: cfg.dx_target,
        },
        tol: cfg.tol,
        maxit: cfg.maxit,
        seed: cfg.seed,
    };
    let result = scan(&scan_cfg)?;

    let rows: Vec<String> = result
        .entries
        .iter()
        .map(|entry| match &entry.outcome {
            Ok(r) => format!(
                "{},{},{},{},{}",
                r.l, r.lambda_min, r.c_obs, r.iterations, r.converged
            ),
            Err(msg) => {
                eprintln!("observability scan: L = {} failed: {msg}", entry.l);
                format!("{},NaN,NaN,0,false", entry.l)
            }
        })
        .collect();
    write_csv(&cfg.out, &hash, "L,lambda_min,C_obs,iters,converged", &rows)?;

    for &i in &result.local_min_indices {
        if let Ok(r) = &result.entries[i].outcome {
            println!(
                "observability scan: local minimum lambda_min = {} at L = {}",
                r.lambda_min, r.l
            );
        }
    }
    eprintln!(
        "observability scan: {} lengths ({}) -> {}",
        rows.len(),
        cfg.mode,
        cfg.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------
// control
// ---------------------------------------------------------------------

#[derive(Serialize)]
struct ControlSynthConfig {
    subcommand: &'static str,
    l: f64,
    t: f64,
    grid: String,
    dt: f64,
    u0: String,
    u_t: String,
    tol: f64,
    maxit: usize,
    out: String,
}

fn run_control_synth(args: ControlSynthArgs, file: &Option<Value>) -> RunResult {
    let cfg = ControlSynthConfig {
        subcommand: "control-synth",
        l: require(resolve(args.l, file, "l")?, "L")?,
        t: require(resolve(args.t, file, "t")?, "T")?,
        grid: require(resolve(args.grid, file, "grid")?, "grid")?,
        dt: resolve(args.dt, file, "dt")?.unwrap_or(0.01),
        u0: resolve(args.u0, file, "u0")?.unwrap_or_else(|| "zero".into()),
        u_t: resolve(args.u_t, file, "u_t")?.unwrap_or_else(|| "sine".into()),
        tol: resolve(args.tol, file, "tol")?.unwrap_or(1e-6),
        maxit: resolve(args.maxit, file, "maxit")?.unwrap_or(500),
        out: require(resolve(args.out, file, "out")?, "out")?,
    };
    let hash = config_hash(&cfg);
    // Echo before the (possibly failing) solve so failed runs stay
    // self-describing.
    echo_config(&cfg.out, &cfg)?;

    let (nx, ny) = parse_grid_spec(&cfg.grid)?;
    let grid = Grid::new(cfg.l, nx, ny)?;
    let u0 = preset_field(grid, &cfg.u0)?;
    let u_t = preset_field(grid, &cfg.u_t)?;
    let problem = ControlProblem::new(u0, u_t, cfg.t, cfg.dt, cfg.tol, cfg.maxit)?;

    let sol = synthesize_control(&problem).map_err(|e| {
        let base: Failure = e.into();
        match base {
            Failure::Numerical(msg) => Failure::Numerical(format!(
                "{msg}; the control Gramian is ill-conditioned at this configuration \
                 (near-critical side length or an under-resolved trace lattice)"
            )),
            other => other,
        }
    })?;

    let dy = grid.dy();
    let mut rows = Vec::with_capacity(sol.h.values().nrows() * ny);
    for (k, row) in sol.h.values().rows().into_iter().enumerate() {
        let t = k as f64 * cfg.dt;
        for (j, h) in row.iter().enumerate() {
            let y = (j + 1) as f64 * dy;
            rows.push(format!("{t},{y},{h}"));
        }
    }
    write_csv(
        Path::new(&format!("{}_h.csv", cfg.out)),
        &hash,
        "t,y,h",
        &rows,
    )?;

    let mut sol_json = serde_json::to_value(sol.summary()).expect("summary serializes");
    sol_json
        .as_object_mut()
        .expect("object")
        .insert("j_values".into(), json!(sol.j_values));
    write_json(
        Path::new(&format!("{}_sol.json", cfg.out)),
        sol_json,
        &hash,
    )?;
    eprintln!(
        "control synth: residual {:.3e}, terminal error {:.3e} after {} iterations -> {}_{{h.csv,sol.json}}",
        sol.residual, sol.terminal_error, sol.iterations, cfg.out
    );
    Ok(())
}

// ---------------------------------------------------------------------
// stabilize / lyapunov
// ---------------------------------------------------------------------

#[derive(Serialize)]
struct StabilizeConfig {
    subcommand: &'static str,
    l: f64,
    alpha: f64,
    t: f64,
    grid: String,
    dt: f64,
    safety: f64,
    u0: String,
    out: String,
}

fn run_stabilize(args: StabilizeArgs, file: &Option<Value>) -> RunResult {
    let cfg = StabilizeConfig {
        subcommand: "stabilize",
        l: require(resolve(args.l, file, "l")?, "L")?,
        alpha: resolve(args.alpha, file, "alpha")?.unwrap_or(0.5),
        t: require(resolve(args.t, file, "t")?, "T")?,
        grid: require(resolve(args.grid, file, "grid")?, "grid")?,
        dt: resolve(args.dt, file, "dt")?.unwrap_or(0.01),
        safety: resolve(args.safety, file, "safety")?.unwrap_or(0.9),
        u0: resolve(args.u0, file, "u0")?.unwrap_or_else(|| "sine".into()),
        out: require(resolve(args.out, file, "out")?, "out")?,
    };
    let hash = config_hash(&cfg);
    echo_config(&cfg.out, &cfg)?;

    let cert = lyapunov_params(cfg.l, cfg.alpha, cfg.safety)?;
    let (nx, ny) = parse_grid_spec(&cfg.grid)?;
    let grid = Grid::new(cfg.l, nx, ny)?;
    let u0 = preset_field(grid, &cfg.u0)?;
    let traj = feedback_simulate(&u0, cfg.alpha, cfg.t, cfg.dt)?;
    let trace = traj.energy_trace();

    let (header, rows) = energy_csv(&traj);
    write_csv(
        Path::new(&format!("{}_energy.csv", cfg.out)),
        &hash,
        header,
        &rows,
    )?;

    let check = check_decay_bound(&trace, &cert)?;
    let mut cert_json = serde_json::to_value(cert).expect("certificate serializes");
    cert_json.as_object_mut().expect("object").insert(
        "bound_check".into(),
        serde_json::to_value(check).expect("check serializes"),
    );
    write_json(
        Path::new(&format!("{}_certificate.json", cfg.out)),
        cert_json,
        &hash,
    )?;

    let fit_json = match fit_decay(&trace, (0.0, cfg.t)) {
        Ok(fit) => serde_json::to_value(fit).expect("fit serializes"),
        Err(e) => json!({ "error": e.to_string() }),
    };
    write_json(Path::new(&format!("{}_fit.json", cfg.out)), fit_json, &hash)?;

    println!(
        "bound check: {} (max ratio {} at t = {})",
        if check.holds { "PASS" } else { "FAIL" },
        check.max_ratio,
        check.argmax_t
    );
    eprintln!(
        "stabilize: nu = {}, rho = {} -> {}_{{energy.csv,certificate.json,fit.json}}",
        cert.nu, cert.rho, cfg.out
    );
    Ok(())
}

#[derive(Serialize)]
struct LyapunovConfig {
    subcommand: &'static str,
    l: f64,
    alpha: f64,
    safety: f64,
}

fn run_lyapunov(args: LyapunovArgs, file: &Option<Value>) -> RunResult {
    let cfg = LyapunovConfig {
        subcommand: "lyapunov",
        l: require(resolve(args.l, file, "l")?, "L")?,
        alpha: resolve(args.alpha, file, "alpha")?.unwrap_or(0.5),
        safety: resolve(args.safety, file, "safety")?.unwrap_or(0.9),
    };
    let hash = config_hash(&cfg);
    let cert = lyapunov_params(cfg.l, cfg.alpha, cfg.safety)?;
    let out = json!({
        "config": serde_json::to_value(&cfg).expect("config serializes"),
        "certificate": serde_json::to_value(cert).expect("certificate serializes"),
    });
    print!("{}", json_with_hash(out, &hash));
    Ok(())
}

// ---------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------

fn dispatch(cli: Cli) -> RunResult {
    let config_path = cli.config.as_deref();
    match cli.cmd {
        Cmd::Crit { sub } => match sub {
            CritCmd::Enumerate(a) => {
                let file = load_config(config_path, "crit-enumerate")?;
                run_crit_enumerate(a, &file)
            }
            CritCmd::Check(a) => {
                let file = load_config(config_path, "crit-check")?;
                run_crit_check(a, &file)
            }
        },
        Cmd::Spectral { sub } => match sub {
            SpectralCmd::Report(a) => {
                let file = load_config(config_path, "spectral-report")?;
                run_spectral_report(a, &file)
            }
            SpectralCmd::Scan(a) => {
                let file = load_config(config_path, "spectral-scan")?;
                run_spectral_scan(a, &file)
            }
        },
        Cmd::Simulate(a) => {
            let file = load_config(config_path, "simulate")?;
            run_simulate(a, &file)
        }
        Cmd::Observability { sub } => match sub {
            ObsCmd::Scan(a) => {
                let file = load_config(config_path, "observability-scan")?;
                run_obs_scan(a, &file)
            }
        },
        Cmd::Control { sub } => match sub {
            ControlCmd::Synth(a) => {
                let file = load_config(config_path, "control-synth")?;
                run_control_synth(a, &file)
            }
        },
        Cmd::Stabilize(a) => {
            let file = load_config(config_path, "stabilize")?;
            run_stabilize(a, &file)
        }
        Cmd::Lyapunov(a) => {
            let file = load_config(config_path, "lyapunov")?;
            run_lyapunov(a, &file)
        }
    }
}

fn main() -> ExitCode {
    if let Ok(v) = env::var("KP2_THREADS") {
        if let Ok(k) = v.trim().parse::<usize>() {
            if k >= 1 {
                // Ignore failure: the pool may already be initialized.
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(k)
                    .build_global();
            }
        }
    }

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
