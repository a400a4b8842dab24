//! Command implementations behind the `oqrw` binary.

pub mod config;

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use oqrw::realization::Realizer;
use oqrw::walk::DEFAULT_VALIDATION_TOL;
use oqrw::{
    check_unitary_walk_condition, distribution, gaussian_discrepancy, konno_density, moments, sample_trajectories,
    step, unitary_walk_step, validate_transitions, AmplitudeState, Complex64, OqrwError, State, TrajectoryState,
    Vertex, Walk, WalkDistribution,
};

use crate::config::{InitialSpec, StateFile, WalkConfig};

/// Environment variable overriding the lattice window cap.
pub const WINDOW_CAP_ENV: &str = "OQRW_WINDOW_CAP";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Domain(#[from] OqrwError),
    #[error("{0}")]
    Failed(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {msg}")]
    Parse { path: PathBuf, msg: String },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    /// 1 for domain and validation failures, 2 for I/O, parse and usage problems.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Domain(OqrwError::UnknownPreset(_)) => 2,
            Self::Domain(_) | Self::Failed(_) => 1,
            Self::Io { .. } | Self::Parse { .. } | Self::Usage(_) => 2,
        }
    }
}

type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Parser)]
#[command(name = "oqrw", version, about = "Open quantum random walk simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the normalization of every source.
    Validate {
        config: PathBuf,
        /// Also check the unitary walk condition.
        #[arg(long)]
        unitary_condition: bool,
        #[arg(long, default_value_t = DEFAULT_VALIDATION_TOL)]
        tol: f64,
    },
    /// Exact evolution of the block state.
    Evolve {
        config: PathBuf,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Also write the state every k steps to `<stem>.step<n>.<ext>`.
        #[arg(long)]
        snapshot_every: Option<usize>,
        /// Start from a state file instead of the configured initial state.
        #[arg(long)]
        initial: Option<PathBuf>,
    },
    /// Monte Carlo quantum trajectories.
    Trajectory {
        config: PathBuf,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the dilation apparatus cycle by cycle.
    Realize {
        config: PathBuf,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Drop the decoherence step; needs the unitary walk condition and a pure start.
        #[arg(long)]
        skip_decoherence: bool,
        /// Report the deviation from the exact walk.
        #[arg(long)]
        compare: bool,
    },
    /// Moments and shape statistics of a distribution file.
    Stats {
        file: PathBuf,
        #[arg(long)]
        gaussian: bool,
        /// Tabulate the Konno density with parameters `a` and `lambda`.
        #[arg(long, num_args = 2, value_names = ["A", "LAMBDA"], allow_hyphen_values = true)]
        konno: Option<Vec<f64>>,
        /// Divisor mapping vertices to `x = vertex / scale` (defaults to the step count in the file header).
        #[arg(long)]
        scale: Option<f64>,
    },
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Validate {
            config,
            unitary_condition,
            tol,
        } => cmd_validate(&config, unitary_condition, tol, out),
        Command::Evolve {
            config,
            steps,
            out: path,
            format,
            snapshot_every,
            initial,
        } => cmd_evolve(&config, steps, path.as_deref(), format, snapshot_every, initial.as_deref(), out),
        Command::Trajectory {
            config,
            steps,
            samples,
            seed,
            out: path,
        } => cmd_trajectory(&config, steps, samples, seed, path.as_deref(), out),
        Command::Realize {
            config,
            steps,
            out: path,
            skip_decoherence,
            compare,
        } => cmd_realize(&config, steps, path.as_deref(), skip_decoherence, compare, out),
        Command::Stats {
            file,
            gaussian,
            konno,
            scale,
        } => cmd_stats(&file, gaussian, konno.map(|k| (k[0], k[1])), scale, out),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(|source| CliError::Io {
        path: PathBuf::from("<stdout>"),
        source,
    })
}

/// Writes to `path` when given, else to `out`.
fn deliver(path: Option<&Path>, text: &str, out: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => write_file(p, text),
        None => emit(out, text),
    }
}

pub fn load_config(path: &Path) -> Result<WalkConfig> {
    serde_json::from_str(&read(path)?).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

fn window_cap() -> Result<Option<usize>> {
    match std::env::var(WINDOW_CAP_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("{WINDOW_CAP_ENV}={v} is not a positive integer"))),
        Err(_) => Ok(None),
    }
}

/// Walk with validation enforced and the window cap applied.
fn load_walk(cfg: &WalkConfig) -> Result<(Walk, Option<State>)> {
    let (mut walk, start) = cfg.walk.build()?;
    let report = validate_transitions(&walk, DEFAULT_VALIDATION_TOL)?;
    if !report.pass {
        return Err(CliError::Failed(format!("walk refused: {report}")));
    }
    if let Some(cap) = window_cap()? {
        walk = walk.with_window_cap(cap);
    }
    Ok((walk, start))
}

fn initial_state(cfg: &WalkConfig, walk: &Walk, preset_start: Option<State>, file: Option<&Path>) -> Result<State> {
    if let Some(path) = file {
        let spec: InitialSpec = serde_json::from_str(&read(path)?).map_err(|e| CliError::Parse {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        return Ok(spec.build(walk)?);
    }
    match (&cfg.initial, preset_start) {
        (Some(spec), _) => Ok(spec.build(walk)?),
        (None, Some(s)) => Ok(s),
        (None, None) => Err(CliError::Usage("configuration has no initial state".into())),
    }
}

fn steps_or(flag: Option<usize>, cfg: &WalkConfig) -> Result<usize> {
    flag.or(cfg.run.as_ref().and_then(|r| r.steps))
        .ok_or_else(|| CliError::Usage("number of steps missing: pass --steps or set run.steps".into()))
}

fn with_advice(e: OqrwError) -> CliError {
    match e {
        OqrwError::WindowOverflow { .. } => CliError::Failed(format!("{e}; raise {WINDOW_CAP_ENV} to allow a wider window")),
        other => CliError::Domain(other),
    }
}

pub fn cmd_validate(config: &Path, unitary: bool, tol: f64, out: &mut dyn Write) -> Result<()> {
    let cfg = load_config(config)?;
    let (walk, _) = cfg.walk.build()?;
    let report = validate_transitions(&walk, tol)?;
    let mut text = String::new();
    for (j, dev) in &report.deviations {
        let _ = writeln!(text, "source {j}: deviation {dev:e}");
    }
    let _ = writeln!(
        text,
        "normalization: max deviation {:e} (tol {tol:e}) {}",
        report.max_deviation,
        verdict(report.pass)
    );
    let mut pass = report.pass;
    if unitary {
        let u = check_unitary_walk_condition(&walk, tol);
        let pair = u.worst_pair.map(|(a, b)| format!(" at ({a}, {b})")).unwrap_or_default();
        let _ = writeln!(
            text,
            "unitary condition: max deviation {:e}{pair} {}",
            u.max_deviation,
            verdict(u.pass)
        );
        pass &= u.pass;
    }
    emit(out, &text)?;
    if pass {
        Ok(())
    } else {
        Err(CliError::Failed("validation failed".into()))
    }
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

/// `vertex,probability` rows in ascending vertex order.
pub fn distribution_csv(d: &WalkDistribution) -> String {
    let mut s = String::from("vertex,probability\n");
    for (v, p) in d.iter() {
        let _ = writeln!(s, "{v},{p}");
    }
    s
}

fn render(state: &State, n: usize, format: Format) -> Result<String> {
    Ok(match format {
        Format::Csv => distribution_csv(&distribution(state)?),
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&StateFile::new(n, state)).expect("state serializes");
            s.push('\n');
            s
        }
    })
}

fn snapshot_path(out: &Path, n: usize) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("state");
    let name = match out.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}.step{n}.{ext}"),
        None => format!("{stem}.step{n}"),
    };
    out.with_file_name(name)
}

pub fn cmd_evolve(
    config: &Path,
    steps: Option<usize>,
    path: Option<&Path>,
    format: Format,
    snapshot_every: Option<usize>,
    initial: Option<&Path>,
    out: &mut dyn Write,
) -> Result<()> {
    let cfg = load_config(config)?;
    let n = steps_or(steps, &cfg)?;
    let (walk, start) = load_walk(&cfg)?;
    let mut state = initial_state(&cfg, &walk, start, initial)?;
    let every = match snapshot_every {
        Some(0) => return Err(CliError::Usage("--snapshot-every must be positive".into())),
        Some(k) => {
            let Some(p) = path else {
                return Err(CliError::Usage("--snapshot-every needs --out".into()));
            };
            Some((k, p))
        }
        None => None,
    };
    for k in 0..=n {
        if k > 0 {
            state = step(&state, &walk).map_err(with_advice)?;
        }
        if let Some((every, p)) = every {
            if k % every == 0 {
                write_file(&snapshot_path(p, k), &render(&state, k, format)?)?;
            }
        }
    }
    deliver(path, &render(&state, n, format)?, out)
}

pub fn cmd_trajectory(
    config: &Path,
    steps: Option<usize>,
    samples: Option<usize>,
    seed: Option<u64>,
    path: Option<&Path>,
    out: &mut dyn Write,
) -> Result<()> {
    let cfg = load_config(config)?;
    let n = steps_or(steps, &cfg)?;
    let run = cfg.run.clone().unwrap_or_default();
    let m = samples.or(run.samples).unwrap_or(10_000);
    let seed = seed.or(run.seed).unwrap_or(0);
    let (walk, start) = load_walk(&cfg)?;
    let state = initial_state(&cfg, &walk, start, None)?;
    let ts = single_site(&state)?;
    let sample = sample_trajectories(&ts, &walk, n, m, seed)?;
    let text = format!("# seed={seed} samples={m} steps={n}\n{}", distribution_csv(&sample.empirical));
    deliver(path, &text, out)
}

fn single_site(state: &State) -> Result<TrajectoryState<f64>> {
    let mut it = state.blocks().iter();
    match (it.next(), it.next()) {
        (Some((v, rho)), None) => Ok(TrajectoryState::mixed(*v, rho.clone())?),
        _ => Err(CliError::Failed(
            "trajectories start from a single vertex; the initial state spreads over several".into(),
        )),
    }
}

/// `φ` with `ρ = φ φ*`, when the state is a pure block on one vertex.
fn pure_start(state: &State) -> Result<AmplitudeState<f64>> {
    let mut it = state.blocks().iter();
    let (Some((v, rho)), None) = (it.next(), it.next()) else {
        return Err(CliError::Failed("--skip-decoherence needs a single-vertex pure initial state".into()));
    };
    let d = rho.rows();
    let k = (0..d)
        .max_by(|a, b| rho[(*a, *a)].re.total_cmp(&rho[(*b, *b)].re))
        .expect("non-empty block");
    let scale = 1.0 / rho[(k, k)].re.sqrt();
    let phi: Vec<Complex64> = (0..d).map(|i| rho[(i, k)] * scale).collect();
    if oqrw::ComplexMatrix::outer(&phi).max_abs_diff(rho) > 1e-9 {
        return Err(CliError::Failed("--skip-decoherence needs a pure initial state".into()));
    }
    Ok(AmplitudeState::single(*v, phi))
}

fn realizer_for(walk: &Walk, state: &State, steps: usize) -> Result<Realizer<f64>> {
    if !walk.space().is_lattice() {
        return Ok(Realizer::new(walk)?);
    }
    let lo = *state.blocks().keys().next().unwrap_or(&0);
    let hi = *state.blocks().keys().next_back().unwrap_or(&0);
    let reach = steps as Vertex + 1;
    Ok(Realizer::cyclic(walk, lo - reach, hi + reach)?)
}

pub fn cmd_realize(
    config: &Path,
    steps: Option<usize>,
    path: Option<&Path>,
    skip_decoherence: bool,
    compare: bool,
    out: &mut dyn Write,
) -> Result<()> {
    let cfg = load_config(config)?;
    let n = steps_or(steps, &cfg)?;
    let (walk, start) = load_walk(&cfg)?;
    let state = initial_state(&cfg, &walk, start, None)?;
    let mut csv = String::from("step,vertex,probability\n");
    let mut rows = |k: usize, d: &WalkDistribution| {
        for (v, p) in d.iter() {
            let _ = writeln!(csv, "{k},{v},{p}");
        }
    };
    let mut deviation = 0.0f64;
    if skip_decoherence {
        let cond = check_unitary_walk_condition(&walk, DEFAULT_VALIDATION_TOL);
        if !cond.pass {
            return Err(OqrwError::UnitaryConditionViolated {
                deviation: cond.max_deviation,
            }
            .into());
        }
        let mut psi = pure_start(&state)?;
        let r = realizer_for(&walk, &state, n)?;
        let mut vec = r.embed_amplitudes(&psi)?;
        rows(0, &psi.distribution());
        for k in 1..=n {
            vec = r.coherent_cycle(&vec)?;
            let read = r.read_amplitudes(&vec);
            if compare {
                psi = unitary_walk_step(&psi, &walk)?;
                deviation = deviation.max(read.max_abs_diff(&psi));
            }
            rows(k, &read.distribution());
        }
    } else {
        let r = realizer_for(&walk, &state, n)?;
        let mut t = r.embed(&state)?;
        let mut exact = state.clone();
        rows(0, &distribution(&state)?);
        for k in 1..=n {
            t = r.physical_step(&t)?;
            let read = r.read_blocks(&t)?;
            if compare {
                exact = step(&exact, &walk).map_err(with_advice)?;
                deviation = deviation.max(read.max_block_diff(&exact));
            }
            rows(k, &distribution(&read)?);
        }
    }
    deliver(path, &csv, out)?;
    if compare {
        emit(out, &format!("max_deviation {deviation:e}\n"))?;
    }
    Ok(())
}

/// Parsed distribution file plus any `steps=` value found in `#` header lines.
pub struct DistributionFile {
    pub dist: WalkDistribution,
    pub steps: Option<usize>,
}

/// Reads `vertex,probability` files; for `step,vertex,probability` files the last step is used.
pub fn parse_distribution(path: &Path, text: &str) -> Result<DistributionFile> {
    let bad = |line: usize, msg: &str| CliError::Parse {
        path: path.to_path_buf(),
        msg: format!("line {line}: {msg}"),
    };
    let mut steps = None;
    let mut header: Option<Vec<String>> = None;
    let mut rows: Vec<(usize, i64, f64)> = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line_no = k + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            for part in comment.split_whitespace() {
                if let Some(v) = part.strip_prefix("steps=") {
                    steps = v.parse().ok();
                }
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let Some(cols) = &header else {
            if fields != ["vertex", "probability"] && fields != ["step", "vertex", "probability"] {
                return Err(bad(line_no, "expected header `vertex,probability`"));
            }
            header = Some(fields.iter().map(|s| s.to_string()).collect());
            continue;
        };
        if fields.len() != cols.len() {
            return Err(bad(line_no, "wrong number of fields"));
        }
        let (step, rest) = if cols.len() == 3 {
            (fields[0].parse().map_err(|_| bad(line_no, "bad step"))?, &fields[1..])
        } else {
            (0, &fields[..])
        };
        let v = rest[0].parse().map_err(|_| bad(line_no, "bad vertex"))?;
        let p = rest[1].parse().map_err(|_| bad(line_no, "bad probability"))?;
        rows.push((step, v, p));
    }
    if header.is_none() {
        return Err(bad(0, "empty distribution file"));
    }
    let last = rows.iter().map(|r| r.0).max().unwrap_or(0);
    if header.as_ref().is_some_and(|h| h.len() == 3) {
        steps = Some(last);
    }
    let probs = rows.into_iter().filter(|r| r.0 == last).map(|r| (r.1, r.2)).collect();
    let dist = WalkDistribution::from_probs(probs).map_err(|e| bad(0, &e.to_string()))?;
    Ok(DistributionFile { dist, steps })
}

pub fn cmd_stats(
    file: &Path,
    gaussian: bool,
    konno: Option<(f64, f64)>,
    scale: Option<f64>,
    out: &mut dyn Write,
) -> Result<()> {
    let parsed = parse_distribution(file, &read(file)?)?;
    let m = moments(&parsed.dist);
    let mut text = format!(
        "mean {}\nvariance {}\ntotal_mass {}\n",
        m.mean, m.variance, m.total_mass
    );
    if gaussian {
        let g = gaussian_discrepancy(&parsed.dist)?;
        let _ = writeln!(text, "gaussian_discrepancy {g}");
    }
    if let Some((a, lambda)) = konno {
        let _ = writeln!(text, "konno a={a} lambda={lambda} density_at_0 {}", konno_density(a, lambda, 0.0)?);
        let scale = scale.or(parsed.steps.map(|s| s as f64)).unwrap_or_else(|| {
            parsed.dist.iter().map(|(v, _)| v.unsigned_abs() as f64).fold(1.0, f64::max)
        });
        // lattice weights become densities in x = vertex / scale; the occupied sublattice has spacing 2
        let _ = writeln!(text, "x,empirical_density,konno_density");
        for (v, p) in parsed.dist.iter() {
            let x = v as f64 / scale;
            if x.abs() < a {
                let _ = writeln!(text, "{x},{},{}", p * scale / 2.0, konno_density(a, lambda, x)?);
            }
        }
    }
    emit(out, &text)
}
