//! `buresproj` — fidelity projections onto channel-defined constraint sets,
//! derived channel constructions, and a self-checking verify mode.
//!
//! Exit codes: 0 success, 1 input/validation error, 2 infeasible Gamma
//! candidate (report still written), 3 verification failure.

mod io;
mod verify;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use buresproj::chanrep::{measurement_channel, pinching_channel, trace_channel};
use buresproj::decomp::{
    channel_distance, cp_extension, minimal_change_reverse, petz_map, petz_via_projection,
    prior_channel_decompose, ls_qsot, DistanceBase,
};
use buresproj::matcore::{CMat, DimensionSpec, PsdMatrix, Tolerances};
use buresproj::projector::{
    gamma_map, pgm, project, project_ensemble, project_marginal, project_measurement,
    project_pinching, ConstraintPair, Ensemble, EnsembleProjectionReport, ProjectionReport,
};
use buresproj::{ChannelRep, Error};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use io::{
    channel_value, ensemble_value, matrix_value, read_channel, read_matrix_list, read_psd,
    sha256_hex, to_canonical_string, write_atomic, IoError,
};

#[derive(Parser)]
#[command(name = "buresproj", version, about = "Fidelity projections onto channel constraint sets")]
struct Cli {
    /// Base relative tolerance (also settable via BURESPROJ_DEFAULT_TOL).
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Relative eigenvalue cutoff for ranks and supports.
    #[arg(long, global = true)]
    rank_tol: Option<f64>,
    /// Relative feasibility threshold for the Gamma candidate.
    #[arg(long, global = true)]
    feas_tol: Option<f64>,
    /// Seed for every randomized routine.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output path; omit to print the result document to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON document bundling tol/rank_tol/feas_tol/seed/out defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Project a PSD matrix onto {Q : Lambda(Q) = C} in Bures geometry.
    Project {
        /// PSD matrix document.
        p: PathBuf,
        /// One of trace:c | marginal:k:C.json | marginal:k:identity |
        /// pinching:projs.json:C.json | measurement:projs.json:c1,c2,... |
        /// channel:chan.json:C.json
        #[arg(long)]
        constraint: String,
    },
    /// Project an ensemble onto decompositions of a prescribed total Q.
    EnsembleProject {
        /// Ensemble document.
        ensemble: PathBuf,
        /// PD target total.
        q: PathBuf,
    },
    /// Pretty good measurement of an ensemble.
    Pgm {
        ensemble: PathBuf,
    },
    /// Factor a CP map as (CPT channel) after (prior multiplication).
    Decompose {
        channel: PathBuf,
        /// Fail instead of support-restricting when the prior is singular.
        #[arg(long)]
        strict: bool,
    },
    /// Petz recovery map of a channel with respect to a prior state.
    Petz {
        channel: PathBuf,
        prior: PathBuf,
        /// Use the Choi-projection pipeline instead of the direct formula.
        #[arg(long)]
        via_projection: bool,
    },
    /// Two-time joint state of a channel and an input prior.
    Qsot {
        channel: PathBuf,
        prior: PathBuf,
        #[arg(long, value_enum, default_value_t = RepArg::Jamiolkowski)]
        representation: RepArg,
    },
    /// Minimal-change reverse channel toward a target output state.
    MinimalChange {
        channel: PathBuf,
        prior: PathBuf,
        sigma: PathBuf,
    },
    /// Prior-weighted distance between two channels.
    Distance {
        a: PathBuf,
        b: PathBuf,
        prior: PathBuf,
        #[arg(long, value_enum, default_value_t = BaseArg::BuresSq)]
        base: BaseArg,
    },
    /// Run a self-check suite; prints residuals and a final digest line.
    Verify {
        /// matcore | projections | decomp | crosschecks | all
        suite: String,
        #[arg(long, default_value_t = 6)]
        max_dim: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum RepArg {
    Jamiolkowski,
    Choi,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaseArg {
    BuresSq,
    Fidelity,
    Purified,
}

struct Settings {
    tol: Tolerances,
    seed: u64,
    out: Option<PathBuf>,
}

enum CliError {
    Input(String),
    Infeasible,
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Input(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

fn resolve_settings(cli: &Cli) -> CliResult<Settings> {
    let mut tol = Tolerances::default();
    let mut seed: u64 = 0;
    let mut out = cli.out.clone();

    if let Ok(s) = std::env::var("BURESPROJ_DEFAULT_TOL") {
        let v: f64 = s
            .parse()
            .map_err(|_| CliError::Input(format!("BURESPROJ_DEFAULT_TOL not a float: {s:?}")))?;
        tol.rtol = v;
        tol.psd_tol = v;
    }
    if let Some(cfg) = &cli.config {
        let text = std::fs::read_to_string(cfg)
            .map_err(|e| CliError::Input(format!("{}: {e}", cfg.display())))?;
        let v: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Input(format!("{}: {e}", cfg.display())))?;
        let obj = v
            .as_object()
            .ok_or_else(|| CliError::Input("config must be a JSON object".into()))?;
        for key in obj.keys() {
            if !matches!(key.as_str(), "tol" | "rank_tol" | "feas_tol" | "seed" | "out") {
                return Err(CliError::Input(format!("unknown config key {key:?}")));
            }
        }
        let num = |k: &str| -> CliResult<Option<f64>> {
            match obj.get(k) {
                None => Ok(None),
                Some(x) => x
                    .as_f64()
                    .map(Some)
                    .ok_or_else(|| CliError::Input(format!("config {k} must be a number"))),
            }
        };
        if let Some(v) = num("tol")? {
            tol.rtol = v;
            tol.psd_tol = v;
        }
        if let Some(v) = num("rank_tol")? {
            tol.rank_tol = v;
        }
        if let Some(v) = num("feas_tol")? {
            tol.feas_tol = v;
        }
        if let Some(v) = obj.get("seed") {
            seed = v
                .as_u64()
                .ok_or_else(|| CliError::Input("config seed must be a nonnegative integer".into()))?;
        }
        if out.is_none() {
            if let Some(v) = obj.get("out") {
                let s = v
                    .as_str()
                    .ok_or_else(|| CliError::Input("config out must be a string".into()))?;
                out = Some(PathBuf::from(s));
            }
        }
    }
    if let Some(v) = cli.tol {
        tol.rtol = v;
        tol.psd_tol = v;
    }
    if let Some(v) = cli.rank_tol {
        tol.rank_tol = v;
    }
    if let Some(v) = cli.feas_tol {
        tol.feas_tol = v;
    }
    if let Some(v) = cli.seed {
        seed = v;
    }
    Ok(Settings { tol, seed, out })
}

fn digest_of_file(path: &Path) -> CliResult<String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(sha256_hex(&text))
}

/// Writes the result document (or prints it), plus a RunManifest next to
/// the output file recording input and result digests.
fn emit(
    doc: &Value,
    settings: &Settings,
    command: &str,
    inputs: &[&Path],
    started: Instant,
) -> CliResult<()> {
    let text = to_canonical_string(doc);
    match &settings.out {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(out) => {
            write_atomic(out, &text)?;
            let mut input_digests = Map::new();
            for p in inputs {
                input_digests.insert(p.display().to_string(), Value::String(digest_of_file(p)?));
            }
            let mut results = Map::new();
            results.insert(out.display().to_string(), Value::String(sha256_hex(&text)));
            let manifest = json!({
                "command": command,
                "inputs": Value::Object(input_digests),
                "kind": "run_manifest",
                "results": Value::Object(results),
                "schema_version": io::SCHEMA_VERSION,
                "seed": settings.seed,
                "timings_ms": { "total": started.elapsed().as_millis() as u64 },
                "tolerances": {
                    "feas_tol": settings.tol.feas_tol,
                    "psd_tol": settings.tol.psd_tol,
                    "rank_tol": settings.tol.rank_tol,
                    "rtol": settings.tol.rtol,
                },
            });
            let mpath = manifest_path(out);
            write_atomic(&mpath, &to_canonical_string(&manifest))?;
            println!("wrote {} sha256={}", out.display(), sha256_hex(&text));
            Ok(())
        }
    }
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    name.push_str(".manifest.json");
    out.with_file_name(name)
}

fn report_value(r: &ProjectionReport) -> Value {
    json!({
        "achieved_fidelity": r.achieved_fidelity,
        "dpi_bound": r.dpi_bound,
        "feasibility_residual": r.feasibility_residual,
        "kind": "projection_report",
        "method": r.method,
        "projection": matrix_value("psd", r.projection.matrix()),
        "saturation_gap": r.saturation_gap,
        "schema_version": io::SCHEMA_VERSION,
    })
}

fn ensemble_report_value(r: &EnsembleProjectionReport) -> Value {
    let members: Vec<CMat> = r
        .projection
        .members()
        .iter()
        .map(|m| m.matrix().clone())
        .collect();
    json!({
        "achieved_fidelity": r.achieved_fidelity,
        "dpi_bound": r.dpi_bound,
        "feasibility_residual": r.feasibility_residual,
        "kind": "ensemble_projection_report",
        "method": r.method,
        "projection": ensemble_value(&members),
        "saturation_gap": r.saturation_gap,
        "schema_version": io::SCHEMA_VERSION,
    })
}

/// Parses a constraint spec string and runs the matching closed-form
/// projection. On InfeasibleGamma the raw Gamma candidate is still
/// reported, with method "gamma_infeasible".
fn run_project(
    p_path: &Path,
    constraint: &str,
    settings: &Settings,
    command: &str,
    started: Instant,
) -> CliResult<()> {
    let tol = &settings.tol;
    let p = read_psd(p_path, tol)?;
    let mut inputs: Vec<PathBuf> = vec![p_path.to_path_buf()];

    let parts: Vec<&str> = constraint.splitn(3, ':').collect();
    let outcome: Result<ProjectionReport, Error> = match parts.as_slice() {
        ["trace", cval] => {
            let cval: f64 = cval
                .parse()
                .map_err(|_| CliError::Input(format!("bad trace target {cval:?}")))?;
            if cval <= 0.0 {
                return Err(CliError::Input("trace target must be positive".into()));
            }
            let ch = trace_channel(p.dim())?;
            let target = PsdMatrix::new(CMat::from_element(1, 1, num_complex::Complex64::new(cval, 0.0)), tol.psd_tol)?;
            let pair = ConstraintPair::new(ch, target, tol)?;
            project(&pair, &p, tol)
        }
        ["marginal", k, cspec] => {
            let k: usize = k
                .parse()
                .map_err(|_| CliError::Input(format!("bad factor index {k:?}")))?;
            let c = if *cspec == "identity" {
                let d = (p.dim() as f64).sqrt().round() as usize;
                if d * d != p.dim() {
                    return Err(CliError::Input(
                        "marginal:k:identity needs a square total dimension".into(),
                    ));
                }
                PsdMatrix::identity(d)
            } else {
                let path = PathBuf::from(cspec);
                let c = read_psd(&path, tol)?;
                inputs.push(path);
                c
            };
            let dc = c.dim();
            if p.dim() % dc != 0 {
                return Err(CliError::Input(format!(
                    "target dim {dc} does not divide total dim {}",
                    p.dim()
                )));
            }
            let other = p.dim() / dc;
            let factors = if k == 0 { vec![dc, other] } else { vec![other, dc] };
            if k > 1 {
                return Err(CliError::Input("marginal factor index must be 0 or 1".into()));
            }
            let dims = DimensionSpec::new(factors)?;
            project_marginal(&p, &dims, k, &c, tol)
        }
        ["pinching", projs, cpath] => {
            let ppath = PathBuf::from(projs);
            let cpath = PathBuf::from(cpath);
            let projs = read_matrix_list(&ppath)?;
            let c = read_psd(&cpath, tol)?;
            inputs.push(ppath);
            inputs.push(cpath);
            project_pinching(&p, &projs, &c, tol)
        }
        ["measurement", projs, cs] => {
            let ppath = PathBuf::from(projs);
            let projs = read_matrix_list(&ppath)?;
            inputs.push(ppath);
            let targets: Result<Vec<f64>, _> = cs.split(',').map(str::parse::<f64>).collect();
            let targets =
                targets.map_err(|_| CliError::Input(format!("bad measurement targets {cs:?}")))?;
            project_measurement(&p, &projs, &targets, tol)
        }
        ["channel", chan, cpath] => {
            let chpath = PathBuf::from(chan);
            let cpath = PathBuf::from(cpath);
            let ch = read_channel(&chpath)?;
            let c = read_psd(&cpath, tol)?;
            inputs.push(chpath);
            inputs.push(cpath);
            let pair = ConstraintPair::new(ch, c, tol)?;
            project(&pair, &p, tol)
        }
        _ => {
            return Err(CliError::Input(format!(
                "unrecognized constraint spec {constraint:?}"
            )))
        }
    };

    let input_refs: Vec<&Path> = inputs.iter().map(|p| p.as_path()).collect();
    match outcome {
        Ok(report) => {
            emit(&report_value(&report), settings, command, &input_refs, started)?;
            Ok(())
        }
        Err(Error::InfeasibleGamma { residual }) => {
            // The closed form is certified only when the candidate is
            // feasible; report the candidate and its residual anyway.
            let infeasible_report = infeasible_document(constraint, &p, residual, tol)?;
            emit(&infeasible_report, settings, command, &input_refs, started)?;
            eprintln!("infeasible Gamma candidate: residual {residual:.3e}");
            Err(CliError::Infeasible)
        }
        Err(e) => Err(e.into()),
    }
}

fn infeasible_document(
    constraint: &str,
    p: &PsdMatrix,
    residual: f64,
    tol: &Tolerances,
) -> CliResult<Value> {
    // Only the general Gamma path can be infeasible through `project`;
    // rebuild the candidate for the report.
    let parts: Vec<&str> = constraint.splitn(3, ':').collect();
    let pair = match parts.as_slice() {
        ["trace", cval] => {
            let cval: f64 = cval.parse().unwrap_or(1.0);
            ConstraintPair::new(
                trace_channel(p.dim())?,
                PsdMatrix::new(
                    CMat::from_element(1, 1, num_complex::Complex64::new(cval, 0.0)),
                    tol.psd_tol,
                )?,
                tol,
            )?
        }
        ["pinching", projs, cpath] => {
            let projs = read_matrix_list(Path::new(projs))?;
            let c = read_psd(Path::new(cpath), tol)?;
            ConstraintPair::new(pinching_channel(&projs, tol.rtol.max(1e-8))?, c, tol)?
        }
        ["channel", chan, cpath] => {
            let ch = read_channel(Path::new(chan))?;
            let c = read_psd(Path::new(cpath), tol)?;
            ConstraintPair::new(ch, c, tol)?
        }
        ["measurement", projs, cs] => {
            let projs = read_matrix_list(Path::new(projs))?;
            let targets: Vec<f64> = cs.split(',').filter_map(|s| s.parse().ok()).collect();
            let diag = CMat::from_fn(targets.len(), targets.len(), |i, j| {
                if i == j {
                    num_complex::Complex64::new(targets[i], 0.0)
                } else {
                    num_complex::Complex64::new(0.0, 0.0)
                }
            });
            ConstraintPair::new(
                measurement_channel(&projs, tol.rtol.max(1e-8))?,
                PsdMatrix::new(diag, tol.psd_tol)?,
                tol,
            )?
        }
        _ => {
            return Err(CliError::Input(format!(
                "cannot rebuild Gamma candidate for constraint {constraint:?}"
            )))
        }
    };
    let gamma = gamma_map(&pair, p, tol)?;
    Ok(json!({
        "feasibility_residual": residual,
        "kind": "projection_report",
        "method": "gamma_infeasible",
        "projection": matrix_value("psd", gamma.matrix()),
        "schema_version": io::SCHEMA_VERSION,
    }))
}

fn classification_value(ch: &ChannelRep, tol: f64) -> Value {
    let cls = ch.classify(tol);
    json!({
        "cp_residual": cls.cp_residual,
        "is_cp": cls.is_cp,
        "is_tp": cls.is_tp,
        "is_unital": cls.is_unital,
        "tp_residual": cls.tp_residual,
        "unital_residual": cls.unital_residual,
    })
}

fn dispatch(cli: &Cli, settings: &Settings, command: &str) -> CliResult<()> {
    let started = Instant::now();
    let tol = &settings.tol;
    match &cli.cmd {
        Cmd::Project { p, constraint } => {
            run_project(p, constraint, settings, command, started)
        }
        Cmd::EnsembleProject { ensemble, q } => {
            let members = read_matrix_list(ensemble)?;
            let members: Result<Vec<PsdMatrix>, Error> = members
                .into_iter()
                .map(|m| PsdMatrix::new(m, tol.psd_tol))
                .collect();
            let ens = Ensemble::new(members?)?;
            let qm = read_psd(q, tol)?;
            let report = project_ensemble(&ens, &qm, tol)?;
            emit(
                &ensemble_report_value(&report),
                settings,
                command,
                &[ensemble, q],
                started,
            )
        }
        Cmd::Pgm { ensemble } => {
            let members = read_matrix_list(ensemble)?;
            let members: Result<Vec<PsdMatrix>, Error> = members
                .into_iter()
                .map(|m| PsdMatrix::new(m, tol.psd_tol))
                .collect();
            let ens = Ensemble::new(members?)?;
            let povm = pgm(&ens, tol)?;
            let mats: Vec<CMat> = povm.members().iter().map(|m| m.matrix().clone()).collect();
            emit(&ensemble_value(&mats), settings, command, &[ensemble], started)
        }
        Cmd::Decompose { channel, strict } => {
            let theta = read_channel(channel)?;
            let pair = prior_channel_decompose(&theta, *strict, tol)?;
            // invertibility check: extending the pair recovers the input map
            let rebuilt = cp_extension(&pair.channel, &pair.prior, tol);
            let round_trip_residual = match rebuilt {
                Ok(re) => {
                    let d = (re.choi() - theta.choi()).norm();
                    Value::from(d)
                }
                Err(_) => Value::Null,
            };
            let doc = json!({
                "channel": channel_value(&pair.channel),
                "kind": "prior_channel_pair",
                "prior": matrix_value("psd", pair.prior.matrix()),
                "round_trip_residual": round_trip_residual,
                "schema_version": io::SCHEMA_VERSION,
                "support_restricted": pair.support_restricted,
            });
            emit(&doc, settings, command, &[channel], started)
        }
        Cmd::Petz { channel, prior, via_projection } => {
            let phi = read_channel(channel)?;
            let rho = read_psd(prior, tol)?;
            let map = if *via_projection {
                petz_via_projection(&phi, &rho, tol)?
            } else {
                petz_map(&phi, &rho, tol)?
            };
            let cls = map.classify(tol.rtol.max(1e-8));
            if !(cls.is_cp && cls.is_tp) {
                return Err(CliError::Input(format!(
                    "recovery map failed CPT verification: cp_residual {:.3e}, tp_residual {:.3e}",
                    cls.cp_residual, cls.tp_residual
                )));
            }
            let doc = json!({
                "channel": channel_value(&map),
                "classification": classification_value(&map, tol.rtol.max(1e-8)),
                "kind": "recovery_report",
                "method": if *via_projection { "petz_via_projection" } else { "petz_direct" },
                "schema_version": io::SCHEMA_VERSION,
            });
            emit(&doc, settings, command, &[channel, prior], started)
        }
        Cmd::Qsot { channel, prior, representation } => {
            let phi = read_channel(channel)?;
            let rho = read_psd(prior, tol)?;
            let state = ls_qsot(&phi, &rho, tol)?;
            let (state, rep_name) = match representation {
                RepArg::Jamiolkowski => (state, "jamiolkowski"),
                RepArg::Choi => (state.to_choi()?, "choi"),
            };
            let doc = json!({
                "dims": [state.dim_in, state.dim_out],
                "input_marginal": matrix_value("hermitian", &state.input_marginal()?),
                "joint": matrix_value("hermitian", &state.joint),
                "kind": "qsot_state",
                "output_marginal": matrix_value("psd", &state.output_marginal()?),
                "representation": rep_name,
                "schema_version": io::SCHEMA_VERSION,
            });
            emit(&doc, settings, command, &[channel, prior], started)
        }
        Cmd::MinimalChange { channel, prior, sigma } => {
            let phi = read_channel(channel)?;
            let rho = read_psd(prior, tol)?;
            let sg = read_psd(sigma, tol)?;
            let map = minimal_change_reverse(&phi, &rho, &sg, tol)?;
            let cls = map.classify(tol.rtol.max(1e-8));
            if !(cls.is_cp && cls.is_tp) {
                return Err(CliError::Input(format!(
                    "recovery map failed CPT verification: cp_residual {:.3e}, tp_residual {:.3e}",
                    cls.cp_residual, cls.tp_residual
                )));
            }
            let doc = json!({
                "channel": channel_value(&map),
                "classification": classification_value(&map, tol.rtol.max(1e-8)),
                "kind": "recovery_report",
                "method": "minimal_change",
                "schema_version": io::SCHEMA_VERSION,
            });
            emit(&doc, settings, command, &[channel, prior, sigma], started)
        }
        Cmd::Distance { a, b, prior, base } => {
            let phi = read_channel(a)?;
            let psi = read_channel(b)?;
            let rho = read_psd(prior, tol)?;
            let (base_enum, base_name) = match base {
                BaseArg::BuresSq => (DistanceBase::BuresSq, "bures_sq"),
                BaseArg::Fidelity => (DistanceBase::Fidelity, "fidelity"),
                BaseArg::Purified => (DistanceBase::Purified, "purified"),
            };
            let value = channel_distance(&phi, &psi, &rho, base_enum, tol)?;
            let doc = json!({
                "base": base_name,
                "kind": "distance_report",
                "schema_version": io::SCHEMA_VERSION,
                "value": value,
            });
            emit(&doc, settings, command, &[a, b, prior], started)
        }
        Cmd::Verify { .. } => unreachable!("verify handled in main"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let settings = match resolve_settings(&cli) {
        Ok(s) => s,
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
        Err(CliError::Infeasible) => unreachable!(),
    };

    if let Cmd::Verify { suite, max_dim } = &cli.cmd {
        return match verify::run(suite, settings.seed, *max_dim, &settings.tol) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(3),
            Err(msg) => {
                eprintln!("error: {msg}");
                ExitCode::from(1)
            }
        };
    }

    let command = std::env::args().skip(1).collect::<Vec<_>>().join(" ");
    match dispatch(&cli, &settings, &command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Infeasible) => ExitCode::from(2),
    }
}
