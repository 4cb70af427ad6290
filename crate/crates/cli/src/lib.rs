//! Command implementations behind the `mdp-hitting` binary.
//!
//! Every command returns an [`Output`] instead of printing, so tests can
//! check exit codes and bytes directly.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use mdp_hitting::gw::{build_triple_with, mass_mismatch, Normalization, DEFAULT_EQUIVALENCE_TOL, FEASIBILITY_TOL};
use mdp_hitting::io::{DocumentError, Metadata};
use mdp_hitting::oracle::OracleError;
use mdp_hitting::restart::DEFAULT_SUPPORT_THRESHOLD;
use mdp_hitting::{
    build_restart_chain, equivalence_check, estimate_hitting, gw_exhaustive, gw_solve, hitting_discounted,
    hitting_plain, hitting_restart, induced_transition, initial_pair_distribution, load_mdp, occupancy_measure,
    support_set, GwError, GwParams, MatrixDocument, MdpSpec, SimConfig, Targets,
};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const NOT_EQUIVALENT: i32 = 1;
    pub const INVALID_MODEL: i32 = 2;
    pub const PARSE_ERROR: i32 = 3;
    pub const INFEASIBLE_COUPLING: i32 = 4;
    pub const ALL_CENSORED: i32 = 5;
    /// Solver failures and oversized exact requests.
    pub const RUNTIME: i32 = 6;
    /// Bad command-line usage.
    pub const USAGE: i32 = 64;
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Output {
    fn ok(stdout: String) -> Self {
        Self {
            code: exit::OK,
            stdout,
            stderr: String::new(),
        }
    }

    fn fail(code: i32, kind: &str, message: impl ToString) -> Self {
        #[derive(Serialize)]
        struct Diagnostic<'a> {
            error: &'a str,
            message: String,
        }
        let d = Diagnostic {
            error: kind,
            message: message.to_string(),
        };
        Self {
            code,
            stdout: String::new(),
            stderr: json(&d),
        }
    }
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports always serialize");
    s.push('\n');
    s
}

#[derive(Debug, Parser)]
#[command(
    name = "mdp-hitting",
    version,
    about = "Hitting-time geometry and Gromov-Wasserstein comparison of MDPs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Plain,
    Restart,
    Discounted,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and validate an MDP document.
    Validate { path: PathBuf },
    /// Occupancy measure of every state-action pair.
    Occupancy {
        path: PathBuf,
        /// Multiply by 1-gamma so the values sum to one.
        #[arg(long)]
        normalized: bool,
    },
    /// Expected first-hitting times; entry [i][j] is the time to reach i from j.
    Hitting {
        path: PathBuf,
        #[arg(long, value_enum, default_value = "restart")]
        kind: KindArg,
    },
    /// Gromov-Wasserstein distance between two MDPs.
    Gw {
        a: PathBuf,
        b: PathBuf,
        /// Exhaustive search (supports of at most four pairs).
        #[arg(long, conflicts_with = "solver")]
        exact: bool,
        /// Multi-restart entropic solver (the default).
        #[arg(long)]
        solver: bool,
        #[arg(long, default_value_t = 16)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Use raw occupancies instead of normalized ones.
        #[arg(long)]
        no_normalize: bool,
        /// Write the coupling here instead of embedding it in the report.
        #[arg(long)]
        coupling_out: Option<PathBuf>,
    },
    /// Search for a measure- and hitting-time-preserving bijection.
    Equiv {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = DEFAULT_EQUIVALENCE_TOL)]
        tol: f64,
    },
    /// Monte Carlo hitting-time estimate on the restart chain.
    Simulate {
        path: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        episodes: u64,
        /// Per-episode step cap; defaults to min(1e6/(1-gamma), 1e7).
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Target pair, as "state,action" or an index.
        #[arg(long)]
        target: String,
        /// Start pair, as "state,action" or an index.
        #[arg(long)]
        start: String,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => dispatch(cli.command),
        Err(e) => {
            let text = e.render().to_string();
            match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => Output::ok(text),
                _ => Output {
                    code: exit::USAGE,
                    stdout: String::new(),
                    stderr: text,
                },
            }
        }
    }
}

pub fn dispatch(command: Command) -> Output {
    match command {
        Command::Validate { path } => cmd_validate(&path),
        Command::Occupancy { path, normalized } => cmd_occupancy(&path, normalized),
        Command::Hitting { path, kind } => cmd_hitting(&path, kind),
        Command::Gw {
            a,
            b,
            exact,
            solver: _,
            restarts,
            seed,
            no_normalize,
            coupling_out,
        } => cmd_gw(
            &a,
            &b,
            &GwOptions {
                exact,
                restarts,
                seed,
                normalize: !no_normalize,
                coupling_out,
            },
        ),
        Command::Equiv { a, b, tol } => cmd_equiv(&a, &b, tol),
        Command::Simulate {
            path,
            episodes,
            steps,
            seed,
            target,
            start,
        } => cmd_simulate(
            &path,
            &SimulateOptions {
                episodes,
                steps,
                seed,
                target,
                start,
            },
        ),
    }
}

fn load(path: &Path) -> Result<MdpSpec<f64>, Output> {
    let text = fs::read_to_string(path)
        .map_err(|e| Output::fail(exit::PARSE_ERROR, "unreadable", format!("{}: {e}", path.display())))?;
    load_mdp(&text).map_err(|e| document_failure(path, &e))
}

fn document_failure(path: &Path, e: &DocumentError) -> Output {
    let message = format!("{}: {e}", path.display());
    if e.is_parse() {
        Output::fail(exit::PARSE_ERROR, "parse", message)
    } else {
        Output::fail(exit::INVALID_MODEL, "invalid", message)
    }
}

fn runtime(e: impl ToString) -> Output {
    Output::fail(exit::RUNTIME, "runtime", e)
}

pub fn cmd_validate(path: &Path) -> Output {
    #[derive(Serialize)]
    struct Report {
        valid: bool,
        name: String,
        states: usize,
        actions: usize,
        pairs: usize,
        gamma: f64,
        renormalized: Vec<String>,
    }
    let mdp = match load(path) {
        Ok(m) => m,
        Err(out) => return out,
    };
    Output::ok(json(&Report {
        valid: true,
        name: mdp.name().to_string(),
        states: mdp.states().len(),
        actions: mdp.actions().len(),
        pairs: mdp.index().len(),
        gamma: mdp.gamma(),
        renormalized: mdp
            .warnings()
            .iter()
            .map(|w| format!("{} (deficit {:e})", w.location, w.deficit))
            .collect(),
    }))
}

pub fn cmd_occupancy(path: &Path, normalized: bool) -> Output {
    let mdp = match load(path) {
        Ok(m) => m,
        Err(out) => return out,
    };
    let p = induced_transition(&mdp);
    let rho0 = initial_pair_distribution(&mdp);
    let occ = match occupancy_measure(&p, &rho0, mdp.gamma()) {
        Ok(o) => o,
        Err(e) => return runtime(e),
    };
    let values = if normalized {
        occ.normalized()
    } else {
        occ.values.clone()
    };
    let doc = MatrixDocument::from_vector(
        mdp.pair_labels(),
        "occupancy",
        &values,
        Metadata {
            kind: "occupancy".into(),
            gamma: Some(mdp.gamma()),
            sum: Some(values.iter().sum()),
            normalized: Some(normalized),
            ..Metadata::default()
        },
    );
    Output::ok(doc.to_json())
}

pub fn cmd_hitting(path: &Path, kind: KindArg) -> Output {
    let mdp = match load(path) {
        Ok(m) => m,
        Err(out) => return out,
    };
    let p = induced_transition(&mdp);
    let gamma = mdp.gamma();
    let result = match kind {
        KindArg::Plain => hitting_plain(&p, Targets::All),
        KindArg::Discounted => hitting_discounted(&p, gamma),
        KindArg::Restart => {
            let rho0 = initial_pair_distribution(&mdp);
            let support = occupancy_measure(&p, &rho0, gamma)
                .map_err(|e| e.to_string())
                .and_then(|occ| support_set(&occ, DEFAULT_SUPPORT_THRESHOLD).map_err(|e| e.to_string()));
            match support {
                Ok(s) => hitting_restart(&p, &rho0, gamma, &s),
                Err(e) => return runtime(e),
            }
        }
    };
    let t = match result {
        Ok(t) => t,
        Err(e) => return runtime(e),
    };
    let labels = mdp.pair_labels();
    let doc = MatrixDocument::from_matrix(
        labels.clone(),
        labels,
        t.entries(),
        Metadata {
            kind: t.kind().as_str().into(),
            gamma: Some(gamma),
            ..Metadata::default()
        },
    );
    Output::ok(doc.to_json())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GwOptions {
    pub exact: bool,
    pub restarts: usize,
    pub seed: u64,
    pub normalize: bool,
    pub coupling_out: Option<PathBuf>,
}

impl Default for GwOptions {
    fn default() -> Self {
        Self {
            exact: false,
            restarts: 16,
            seed: 0,
            normalize: true,
            coupling_out: None,
        }
    }
}

/// Rounds a total mass for display, so `1/(1−0.5)` prints as `2`.
fn display_mass(v: f64) -> String {
    format!("{}", (v * 1e9).round() / 1e9)
}

pub fn cmd_gw(a: &Path, b: &Path, opts: &GwOptions) -> Output {
    #[derive(Serialize)]
    struct Report {
        value: f64,
        status: &'static str,
        restarts_used: usize,
        #[serde(skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        coupling_path: Option<String>,
        #[serde(skip_serializing_if = "Option::is_none")]
        coupling: Option<MatrixDocument>,
    }
    let (ma, mb) = match (load(a), load(b)) {
        (Ok(x), Ok(y)) => (x, y),
        (Err(out), _) | (_, Err(out)) => return out,
    };
    let normalization = if opts.normalize {
        Normalization::Normalized
    } else {
        Normalization::Raw
    };
    let (tx, ty) = match (
        build_triple_with(&ma, normalization),
        build_triple_with(&mb, normalization),
    ) {
        (Ok(x), Ok(y)) => (x, y),
        (Err(e), _) | (_, Err(e)) => return runtime(e),
    };
    if let Some((x_mass, y_mass)) = mass_mismatch(&tx, &ty, FEASIBILITY_TOL) {
        return Output::fail(
            exit::INFEASIBLE_COUPLING,
            "infeasible",
            format!(
                "total masses differ ({} vs {}); no coupling exists",
                display_mass(x_mass),
                display_mass(y_mass)
            ),
        );
    }
    let result = if opts.exact {
        gw_exhaustive(&tx, &ty)
    } else {
        gw_solve(
            &tx,
            &ty,
            &GwParams {
                restarts: opts.restarts,
                seed: opts.seed,
                ..GwParams::default()
            },
        )
    };
    let r = match result {
        Ok(r) => r,
        Err(e @ GwError::InfeasibleCoupling { .. }) | Err(e @ GwError::MassMismatch { .. }) => {
            return Output::fail(exit::INFEASIBLE_COUPLING, "infeasible", e)
        }
        Err(e) => return runtime(e),
    };
    let coupling = MatrixDocument::from_matrix(
        tx.labels().to_vec(),
        ty.labels().to_vec(),
        &r.coupling.matrix,
        Metadata {
            kind: "coupling".into(),
            seed: (!opts.exact).then_some(opts.seed),
            sum: Some(r.coupling.matrix.sum()),
            normalized: Some(opts.normalize),
            ..Metadata::default()
        },
    );
    let mut report = Report {
        value: r.value,
        status: r.status.as_str(),
        restarts_used: r.restarts_used,
        seed: (!opts.exact).then_some(opts.seed),
        coupling_path: None,
        coupling: None,
    };
    match &opts.coupling_out {
        Some(path) => {
            if let Err(e) = fs::write(path, coupling.to_json()) {
                return runtime(format!("{}: {e}", path.display()));
            }
            report.coupling_path = Some(path.display().to_string());
        }
        None => report.coupling = Some(coupling),
    }
    Output::ok(json(&report))
}

pub fn cmd_equiv(a: &Path, b: &Path, tol: f64) -> Output {
    let (ma, mb) = match (load(a), load(b)) {
        (Ok(x), Ok(y)) => (x, y),
        (Err(out), _) | (_, Err(out)) => return out,
    };
    let (tx, ty) = match (
        build_triple_with(&ma, Normalization::Normalized),
        build_triple_with(&mb, Normalization::Normalized),
    ) {
        (Ok(x), Ok(y)) => (x, y),
        (Err(e), _) | (_, Err(e)) => return runtime(e),
    };
    let not_equivalent = |reason: String| Output {
        code: exit::NOT_EQUIVALENT,
        stdout: format!("equivalent: false\nreason: {reason}\n"),
        stderr: String::new(),
    };
    match equivalence_check(&tx, &ty, tol) {
        Ok(Some(phi)) => {
            let mut out = String::from("equivalent: true\n");
            for (x, &y) in phi.iter().enumerate() {
                out.push_str(&format!("{} -> {}\n", tx.labels()[x], ty.labels()[y]));
            }
            Output::ok(out)
        }
        Ok(None) => not_equivalent("no bijection preserves both measure and hitting times".into()),
        Err(GwError::SizeMismatch { x, y }) => not_equivalent(format!("SizeMismatch (supports of {x} and {y} pairs)")),
        Err(e) => runtime(e),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimulateOptions {
    pub episodes: u64,
    pub steps: Option<u64>,
    pub seed: u64,
    pub target: String,
    pub start: String,
}

fn resolve_pair(mdp: &MdpSpec<f64>, key: &str) -> Option<usize> {
    let labels = mdp.pair_labels();
    labels
        .iter()
        .position(|l| l == key)
        .or_else(|| key.parse::<usize>().ok().filter(|&i| i < labels.len()))
}

pub fn cmd_simulate(path: &Path, opts: &SimulateOptions) -> Output {
    #[derive(Serialize)]
    struct Report {
        target: String,
        start: String,
        mean: f64,
        std_error: f64,
        samples: u64,
        censored: u64,
        max_steps: u64,
        seed: u64,
    }
    let mdp = match load(path) {
        Ok(m) => m,
        Err(out) => return out,
    };
    let (Some(target), Some(start)) = (resolve_pair(&mdp, &opts.target), resolve_pair(&mdp, &opts.start)) else {
        return Output::fail(
            exit::USAGE,
            "usage",
            format!("unknown pair {:?} or {:?}", opts.target, opts.start),
        );
    };
    let p = induced_transition(&mdp);
    let rho0 = initial_pair_distribution(&mdp);
    let chain = build_restart_chain(&p, &rho0, mdp.gamma());
    let max_steps = opts.steps.unwrap_or_else(|| SimConfig::default_max_steps(mdp.gamma()));
    let config = SimConfig::new(opts.seed, opts.episodes, max_steps);
    match estimate_hitting(chain.matrix(), target, start, &config) {
        Ok(e) => Output::ok(json(&Report {
            target: mdp.pair_label(target),
            start: mdp.pair_label(start),
            mean: e.mean,
            std_error: e.std_error,
            samples: e.samples,
            censored: e.censored,
            max_steps,
            seed: opts.seed,
        })),
        Err(e @ OracleError::AllCensored(_)) => Output::fail(exit::ALL_CENSORED, "all_censored", e),
        Err(e) => runtime(e),
    }
}
