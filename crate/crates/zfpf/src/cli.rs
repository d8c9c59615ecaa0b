//! Batch front door: JSON model files in, machine-readable reports out.
//!
//! Commands: `estimate`, `oracle`, `coeffs` and `sample` take a
//! Hamiltonian JSON plus an optional tensorized-measurement JSON;
//! `csp-estimate` takes a CSP JSON. Reports are single JSON objects; the
//! only field that varies between identical runs is `elapsed_ms`. Exit
//! codes: 0 success, 2 input or domain error, 3 out of regime, 4
//! capability cap, 5 numeric failure.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::csp::{CspClause, CspFormula};
use crate::error::{Error, Result};
use crate::family::log_taylor;
use crate::interpolate::{estimate, EstimateReport, GoodRegion};
use crate::linalg::CMatrix;
use crate::oracle;
use crate::quantum::{
    beta0, estimate_partition, sample_gibbs, Hamiltonian, LocalTerm, QuantumFamily,
    TensorizedMeasurement, DEFAULT_MATRIX_CAP,
};

/// Environment variable overriding both dimension caps.
pub const MATRIX_CAP_ENV: &str = "ZFPF_MATRIX_CAP";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CommandKind {
    Estimate,
    Sample,
    Coeffs,
    Oracle,
    CspEstimate,
}

impl CommandKind {
    fn name(self) -> &'static str {
        match self {
            CommandKind::Estimate => "estimate",
            CommandKind::Sample => "sample",
            CommandKind::Coeffs => "coeffs",
            CommandKind::Oracle => "oracle",
            CommandKind::CspEstimate => "csp-estimate",
        }
    }
}

/// Where the measurement comes from.
#[derive(Clone, Debug, Default)]
pub enum MeasurementSource {
    #[default]
    Identity,
    File(PathBuf),
}

/// Region selection: `auto` picks the zero-free disc of radius `beta0`
/// for quantum models and is an error for CSPs.
#[derive(Clone, Debug, Default)]
pub enum RegionSpec {
    #[default]
    Auto,
    Disc(f64),
    Strip {
        beta: Complex64,
        delta: f64,
    },
}

/// One resolved invocation.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub command: CommandKind,
    pub input: PathBuf,
    pub measurement: MeasurementSource,
    /// Inverse temperature for quantum commands, external field for
    /// `csp-estimate`.
    pub beta: Complex64,
    pub epsilon: f64,
    pub delta: f64,
    /// Zero-freeness bound override; required with a non-auto region.
    pub m_bound: Option<f64>,
    pub region: RegionSpec,
    pub seed: u64,
    /// Truncation order for `coeffs`.
    pub order: Option<usize>,
    pub matrix_cap: usize,
    pub oracle_cap: usize,
}

impl RunConfig {
    pub fn new(command: CommandKind, input: PathBuf) -> RunConfig {
        RunConfig {
            command,
            input,
            measurement: MeasurementSource::Identity,
            beta: Complex64::ZERO,
            epsilon: 1e-3,
            delta: 0.1,
            m_bound: None,
            region: RegionSpec::Auto,
            seed: 0,
            order: None,
            matrix_cap: DEFAULT_MATRIX_CAP,
            oracle_cap: oracle::DEFAULT_DIMENSION_CAP,
        }
    }

    /// Applies the `ZFPF_MATRIX_CAP` override to both caps.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(raw) = std::env::var(MATRIX_CAP_ENV) {
            let cap: usize = raw.parse().map_err(|_| {
                Error::InvalidInput(format!("{MATRIX_CAP_ENV} must be an integer, got {raw:?}"))
            })?;
            self.matrix_cap = cap;
            self.oracle_cap = cap;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Input schemas
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HamiltonianJson {
    q: usize,
    n_sites: usize,
    k: usize,
    d: usize,
    terms: Vec<TermJson>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TermJson {
    support: Vec<u32>,
    /// Row-major, `q^(2|support|)` entries as `[re, im]` pairs.
    matrix: Vec<[f64; 2]>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MeasurementJson {
    #[serde(default)]
    identity: Option<bool>,
    /// One flat `q*q` `[re, im]` list per site.
    #[serde(default)]
    sites: Option<Vec<Vec<[f64; 2]>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CspJson {
    n_vars: usize,
    k: usize,
    d: usize,
    clauses: Vec<ClauseJson>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ClauseJson {
    vars: Vec<u32>,
    table: Vec<[f64; 2]>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

fn complex_of(pair: [f64; 2]) -> Complex64 {
    Complex64::new(pair[0], pair[1])
}

fn square_matrix(flat: &[[f64; 2]], what: &str) -> Result<CMatrix> {
    let len = flat.len();
    let dim = (len as f64).sqrt().round() as usize;
    if dim * dim != len {
        return Err(Error::InvalidInput(format!(
            "{what} has {len} entries, not a square matrix"
        )));
    }
    Ok(CMatrix::from_fn(dim, dim, |i, j| {
        complex_of(flat[i * dim + j])
    }))
}

/// Parses a Hamiltonian model file.
pub fn load_hamiltonian(path: &Path) -> Result<Hamiltonian> {
    let json: HamiltonianJson = read_json(path)?;
    let mut terms = Vec::with_capacity(json.terms.len());
    for (i, t) in json.terms.iter().enumerate() {
        let matrix = square_matrix(&t.matrix, &format!("term {i} matrix"))?;
        let expected = json
            .q
            .checked_pow(t.support.len() as u32)
            .unwrap_or(usize::MAX);
        if matrix.nrows() != expected {
            return Err(Error::InvalidInput(format!(
                "term {i}: matrix is {}x{} but the support needs {expected}x{expected}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        terms.push(LocalTerm::new(t.support.clone(), matrix, json.q)?);
    }
    Hamiltonian::new(json.q, json.n_sites, json.k, json.d, terms)
}

/// Parses a measurement file against a loaded Hamiltonian.
pub fn load_measurement(path: &Path, ham: &Hamiltonian) -> Result<TensorizedMeasurement> {
    let json: MeasurementJson = read_json(path)?;
    let meas = match (json.identity, json.sites) {
        (Some(true), None) => TensorizedMeasurement::Identity,
        (None, Some(sites)) | (Some(false), Some(sites)) => {
            let mats = sites
                .iter()
                .enumerate()
                .map(|(v, flat)| square_matrix(flat, &format!("measurement site {v}")))
                .collect::<Result<Vec<_>>>()?;
            TensorizedMeasurement::Sites(mats)
        }
        _ => {
            return Err(Error::InvalidInput(
                "measurement file needs either \"identity\": true or \"sites\": [...]".into(),
            ))
        }
    };
    meas.validate(ham.q(), ham.n_sites())?;
    Ok(meas)
}

/// Parses a CSP model file.
pub fn load_csp(path: &Path) -> Result<CspFormula> {
    let json: CspJson = read_json(path)?;
    let clauses = json
        .clauses
        .into_iter()
        .map(|c| CspClause {
            vars: c.vars,
            table: c.table.iter().copied().map(complex_of).collect(),
        })
        .collect();
    CspFormula::new(json.n_vars, json.k, json.d, clauses)
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct ValueReport {
    command: &'static str,
    value: [f64; 2],
    log_value: [f64; 2],
    order_m: usize,
    truncation_bound: f64,
    beta0: Option<f64>,
    elapsed_ms: f64,
    warnings: Vec<String>,
}

#[derive(Serialize)]
struct CoeffsReport {
    order: usize,
    coefficients: Vec<[f64; 2]>,
}

#[derive(Serialize)]
struct SampleReport {
    sigma: Vec<u32>,
    seed: u64,
}

fn value_report(
    command: CommandKind,
    rep: &EstimateReport,
    b0: Option<f64>,
    warnings: Vec<String>,
) -> String {
    let report = ValueReport {
        command: command.name(),
        value: [rep.value.re, rep.value.im],
        log_value: [rep.log_value.re, rep.log_value.im],
        order_m: rep.order,
        truncation_bound: rep.truncation_bound,
        beta0: b0,
        elapsed_ms: rep.elapsed_ms,
        warnings,
    };
    serde_json::to_string_pretty(&report).expect("report serialization cannot fail")
}

// ---------------------------------------------------------------------------
// Command dispatch
// ---------------------------------------------------------------------------

fn quantum_beta0(ham: &Hamiltonian) -> Option<f64> {
    let h = ham.term_norm_bound();
    (h > 0.0).then(|| beta0(ham.k(), ham.d(), h))
}

fn build_region(spec: &RegionSpec, x: Complex64) -> Result<GoodRegion> {
    match spec {
        RegionSpec::Auto => Err(Error::InvalidInput(
            "auto region is only defined for quantum estimates".into(),
        )),
        RegionSpec::Disc(radius) => GoodRegion::disc(*radius, x),
        RegionSpec::Strip { beta, delta } => crate::interpolate::strip_map(*beta, *delta),
    }
}

fn run_estimate(config: &RunConfig) -> Result<String> {
    let ham = load_hamiltonian(&config.input)?;
    let meas = match &config.measurement {
        MeasurementSource::Identity => TensorizedMeasurement::Identity,
        MeasurementSource::File(path) => load_measurement(path, &ham)?,
    };
    let b0 = quantum_beta0(&ham);
    let rep = match &config.region {
        RegionSpec::Auto => {
            // Zero-free disc of radius beta0 with M = n from the
            // high-temperature bound.
            if config.m_bound.is_some() {
                return Err(Error::InvalidInput(
                    "--M only applies with an explicit --region; auto derives M = n_sites".into(),
                ));
            }
            estimate_partition(
                &ham,
                &meas,
                config.beta,
                config.epsilon,
                config.delta,
                config.matrix_cap,
            )?
        }
        spec => {
            let m_bound = config.m_bound.ok_or_else(|| {
                Error::InvalidInput(
                    "an explicit --region needs an explicit zero-freeness bound --M".into(),
                )
            })?;
            let region = build_region(spec, config.beta)?;
            let family = QuantumFamily::new(&ham, &meas, config.matrix_cap)?;
            let graph = ham.dependency_graph();
            let mut rep = estimate(
                &family,
                &graph,
                &region,
                config.beta,
                config.epsilon,
                m_bound,
                config.delta,
            )?;
            let trace = meas.total_trace(ham.q(), ham.n_sites());
            rep.value *= trace;
            rep.log_value += Complex64::new(trace.ln(), 0.0);
            rep
        }
    };
    Ok(value_report(config.command, &rep, b0, Vec::new()))
}

fn run_oracle(config: &RunConfig) -> Result<String> {
    let ham = load_hamiltonian(&config.input)?;
    let meas = match &config.measurement {
        MeasurementSource::Identity => TensorizedMeasurement::Identity,
        MeasurementSource::File(path) => load_measurement(path, &ham)?,
    };
    let started = std::time::Instant::now();
    let value = oracle::exact_partition(&ham, &meas, config.beta, config.oracle_cap)?;
    let rep = EstimateReport {
        value,
        log_value: value.ln(),
        order: 0,
        truncation_bound: 0.0,
        elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
    };
    Ok(value_report(
        config.command,
        &rep,
        quantum_beta0(&ham),
        Vec::new(),
    ))
}

fn run_coeffs(config: &RunConfig) -> Result<String> {
    let ham = load_hamiltonian(&config.input)?;
    let meas = match &config.measurement {
        MeasurementSource::Identity => TensorizedMeasurement::Identity,
        MeasurementSource::File(path) => load_measurement(path, &ham)?,
    };
    let order = config.order.ok_or_else(|| {
        Error::InvalidInput("coeffs needs --order (truncation order of the log series)".into())
    })?;
    let family = QuantumFamily::new(&ham, &meas, config.matrix_cap)?;
    let graph = ham.dependency_graph();
    let series = log_taylor(&family, &graph, order)?;
    let report = CoeffsReport {
        order,
        coefficients: series.coeffs().iter().map(|c| [c.re, c.im]).collect(),
    };
    Ok(serde_json::to_string_pretty(&report).expect("report serialization cannot fail"))
}

fn run_sample(config: &RunConfig) -> Result<String> {
    let ham = load_hamiltonian(&config.input)?;
    if config.beta.im != 0.0 {
        return Err(Error::Domain(
            "sampling needs a real positive inverse temperature".into(),
        ));
    }
    let assignment = sample_gibbs(
        &ham,
        config.beta.re,
        config.epsilon,
        config.seed,
        config.delta,
        config.matrix_cap,
    )?;
    let report = SampleReport {
        sigma: assignment.0,
        seed: config.seed,
    };
    Ok(serde_json::to_string_pretty(&report).expect("report serialization cannot fail"))
}

fn run_csp_estimate(config: &RunConfig) -> Result<String> {
    let formula = load_csp(&config.input)?;
    let m_bound = config.m_bound.ok_or_else(|| {
        Error::InvalidInput(
            "csp-estimate needs an explicit zero-freeness bound --M (no universal disc is \
             known for CSPs)"
                .into(),
        )
    })?;
    let region = build_region(&config.region, config.beta)?;
    let rep = crate::csp::estimate_csp(
        &formula,
        &region,
        config.beta,
        config.epsilon,
        config.delta,
        m_bound,
    )?;
    Ok(value_report(config.command, &rep, None, Vec::new()))
}

/// Executes one command, returning the JSON report text.
pub fn run(config: &RunConfig) -> Result<String> {
    match config.command {
        CommandKind::Estimate => run_estimate(config),
        CommandKind::Oracle => run_oracle(config),
        CommandKind::Coeffs => run_coeffs(config),
        CommandKind::Sample => run_sample(config),
        CommandKind::CspEstimate => run_csp_estimate(config),
    }
}

/// Parses `RE` or `RE,IM` into a complex number.
pub fn parse_complex(raw: &str) -> Result<Complex64> {
    let parts: Vec<&str> = raw.split(',').collect();
    let parse = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::InvalidInput(format!("cannot parse {s:?} as a real number")))
    };
    match parts.as_slice() {
        [re] => Ok(Complex64::new(parse(re)?, 0.0)),
        [re, im] => Ok(Complex64::new(parse(re)?, parse(im)?)),
        _ => Err(Error::InvalidInput(format!(
            "complex values are RE or RE,IM; got {raw:?}"
        ))),
    }
}

/// Parses `auto`, `disc:RADIUS` or `strip:RE,IM,DELTA`.
pub fn parse_region(raw: &str) -> Result<RegionSpec> {
    if raw == "auto" {
        return Ok(RegionSpec::Auto);
    }
    if let Some(rest) = raw.strip_prefix("disc:") {
        let radius: f64 = rest
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad disc radius {rest:?}")))?;
        return Ok(RegionSpec::Disc(radius));
    }
    if let Some(rest) = raw.strip_prefix("strip:") {
        let parts: Vec<&str> = rest.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::InvalidInput(format!(
                "strip region is strip:RE,IM,DELTA; got {raw:?}"
            )));
        }
        let beta = parse_complex(&format!("{},{}", parts[0], parts[1]))?;
        let delta: f64 = parts[2]
            .trim()
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad strip delta {:?}", parts[2])))?;
        return Ok(RegionSpec::Strip { beta, delta });
    }
    Err(Error::InvalidInput(format!(
        "region must be auto, disc:RADIUS or strip:RE,IM,DELTA; got {raw:?}"
    )))
}
