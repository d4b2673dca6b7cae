//! Experiment configs, result records and the command implementations behind
//! the `sharppeak` binary. Every command is a pure function of its
//! [`ExperimentConfig`]; the binary only parses flags and writes output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use sharppeak::coupling::{Coupling, RandomInputMatrix, Sandwich, Theta};
use sharppeak::neutral::{discovery_time_mc, hitting_time_y, MutationChain};
use sharppeak::rate::{classify_value, psi, rho_star, RateParams};
use sharppeak::rng::stream;
use sharppeak::two_type::TwoTypeKernel;
use sharppeak::verify::{all_passed, run_battery, VerifyConfig};
use sharppeak::{Error, ModelParams, OccupancyDistribution, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(flatten)]
    pub run: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum RunConfig {
    Psi(PsiConfig),
    PhaseDiagram(PhaseDiagramConfig),
    Exact(ExactConfig),
    Simulate(SimulateConfig),
    Verify(VerifyRunConfig),
    Discovery(DiscoveryConfig),
    Hitting(HittingConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsiConfig {
    pub a: f64,
    pub sigma: f64,
    pub grid: usize,
}

/// Inclusive, evenly spaced sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Range {
    pub fn values(&self) -> Vec<f64> {
        match self.steps {
            0 => Vec::new(),
            1 => vec![self.min],
            n => (0..n)
                .map(|i| {
                    let t = i as f64 / (n - 1) as f64;
                    self.min * (1.0 - t) + self.max * t
                })
                .collect(),
        }
    }

    /// `min:max:steps`.
    pub fn parse(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("expected min:max:steps, got {s:?}"));
        }
        let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}"));
        let steps = parts[2]
            .trim()
            .parse::<usize>()
            .map_err(|e| format!("{:?}: {e}", parts[2]))?;
        let r = Range {
            min: num(parts[0])?,
            max: num(parts[1])?,
            steps,
        };
        if steps == 0 || r.min > r.max {
            return Err(format!("empty range {s:?}"));
        }
        Ok(r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseDiagramConfig {
    pub sigma: f64,
    pub kappa: usize,
    pub a: Range,
    pub alpha: Range,
    pub grid: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExactConfig {
    pub params: ModelParams,
    pub theta: Theta,
    /// Dump the transition kernel instead of the hitting-time table.
    pub kernel: bool,
    /// Kernel entries as natural logarithms.
    pub log_space: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Process {
    Occupancy,
    Sandwich,
    TwoType,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub params: ModelParams,
    pub process: Process,
    pub steps: usize,
    /// Occupancy counts; defaults to all chromosomes in class `ℓ`.
    pub start: Option<Vec<usize>>,
    /// Two-type start; defaults to `m` masters.
    pub z0: Option<usize>,
    pub theta: Theta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyRunConfig {
    pub params: ModelParams,
    pub trials: usize,
}

impl Default for VerifyRunConfig {
    fn default() -> Self {
        let d = VerifyConfig::default();
        Self {
            params: d.params,
            trials: d.trials,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscoveryConfig {
    pub params: ModelParams,
    pub replicas: usize,
    /// Defaults to `50 κ^ℓ`.
    pub horizon: Option<u64>,
    /// Every chromosome starts in this class (`1..=ℓ`); defaults to `ℓ`.
    pub start_class: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HittingConfig {
    pub ell: usize,
    pub kappa: usize,
    pub q: f64,
    pub from: usize,
    pub target: Vec<usize>,
}

impl ExperimentConfig {
    pub fn command(&self) -> &'static str {
        match self.run {
            RunConfig::Psi(_) => "psi",
            RunConfig::PhaseDiagram(_) => "phase-diagram",
            RunConfig::Exact(_) => "exact",
            RunConfig::Simulate(_) => "simulate",
            RunConfig::Verify(_) => "verify",
            RunConfig::Discovery(_) => "discovery",
            RunConfig::Hitting(_) => "hitting",
        }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    NotConverged,
    VerificationFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRecord {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    /// Seconds since the epoch; taken from `SOURCE_DATE_EPOCH` when set so
    /// that records can be made byte-reproducible.
    pub timestamp: u64,
    pub config: ExperimentConfig,
    pub status: Status,
    pub converged: bool,
    pub values: Map<String, Value>,
    /// Units or meaning of selected values.
    pub units: BTreeMap<String, String>,
}

/// A rectangular result, rendered as CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(columns: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub record: ResultRecord,
    pub table: Option<Table>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

impl Output {
    /// CSV for tabular results, JSON otherwise.
    pub fn default_format(&self) -> Format {
        if self.table.is_some() {
            Format::Csv
        } else {
            Format::Json
        }
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => {
                let mut v = serde_json::to_value(&self.record).expect("record serializes");
                if let Some(t) = &self.table {
                    v["table"] = serde_json::to_value(t).expect("table serializes");
                }
                let mut s = serde_json::to_string_pretty(&v).expect("value serializes");
                s.push('\n');
                s
            }
            Format::Csv => {
                let mut s = format!(
                    "# sharppeak {} config_hash={} seed={}\n",
                    self.record.command, self.record.config_hash, self.record.seed
                );
                let table = match &self.table {
                    Some(t) => t.clone(),
                    None => scalar_table(&self.record.values),
                };
                writeln!(s, "{}", table.columns.join(",")).unwrap();
                for row in &table.rows {
                    writeln!(s, "{}", row.join(",")).unwrap();
                }
                s
            }
        }
    }
}

/// One-row table of the scalar entries of a record.
fn scalar_table(values: &Map<String, Value>) -> Table {
    let scalars: Vec<(&String, &Value)> = values.iter().filter(|(_, v)| !v.is_array() && !v.is_object()).collect();
    let mut t = Table::new(scalars.iter().map(|(k, _)| k.as_str()));
    t.push(
        scalars
            .iter()
            .map(|(_, v)| match v {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            })
            .collect(),
    );
    t
}

fn timestamp() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or_else(|| {
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        })
}

fn record(config: &ExperimentConfig, status: Status, values: Value, units: &[(&str, &str)]) -> ResultRecord {
    let Value::Object(values) = values else {
        panic!("record values must be an object")
    };
    ResultRecord {
        command: config.command().to_string(),
        config_hash: config.hash(),
        seed: config.seed,
        timestamp: timestamp(),
        config: config.clone(),
        converged: status != Status::NotConverged,
        status,
        values,
        units: units.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
    }
}

/// Run one experiment.
pub fn run(config: &ExperimentConfig) -> Result<Output> {
    match &config.run {
        RunConfig::Psi(c) => cmd_psi(config, c),
        RunConfig::PhaseDiagram(c) => cmd_phase_diagram(config, c),
        RunConfig::Exact(c) => cmd_exact(config, c),
        RunConfig::Simulate(c) => cmd_simulate(config, c),
        RunConfig::Verify(c) => cmd_verify(config, c),
        RunConfig::Discovery(c) => cmd_discovery(config, c),
        RunConfig::Hitting(c) => cmd_hitting(config, c),
    }
}

pub fn cmd_psi(config: &ExperimentConfig, c: &PsiConfig) -> Result<Output> {
    let r = psi(c.a, c.sigma, c.grid)?;
    let status = if r.converged && r.formulas_agree {
        Status::Ok
    } else {
        Status::NotConverged
    };
    let values = json!({
        "a": r.a,
        "sigma": r.sigma,
        "psi": r.psi,
        "grid": r.grid,
        "previous": r.previous,
        "converged": r.converged,
        "rho_star": rho_star(c.a, c.sigma),
        "path_formula": r.path_formula,
        "path_grid": r.path_grid,
        "shortest_path_same_grid": r.shortest_path_same_grid,
        "formulas_agree": r.formulas_agree,
    });
    Ok(Output {
        record: record(
            config,
            status,
            values,
            &[
                ("psi", "exponential rate per individual"),
                ("grid", "cells of the finest grid"),
                ("previous", "psi on the grid with half as many cells"),
            ],
        ),
        table: None,
    })
}

pub fn cmd_phase_diagram(config: &ExperimentConfig, c: &PhaseDiagramConfig) -> Result<Output> {
    RateParams::new(c.a.min, c.sigma, c.kappa, None)?;
    RateParams::new(c.a.max, c.sigma, c.kappa, None)?;
    let alphas = c.alpha.values();
    for &alpha in &alphas {
        RateParams::new(c.a.min, c.sigma, c.kappa, Some(alpha))?;
    }
    let psis: Vec<_> =
        c.a.values()
            .into_par_iter()
            .map(|a| psi(a, c.sigma, c.grid).map(|r| (a, r)))
            .collect::<Result<_>>()?;
    let ln_kappa = (c.kappa as f64).ln();
    let mut table = Table::new(["a", "alpha", "psi", "ln_kappa_over_alpha", "phase", "converged"]);
    let mut all_converged = true;
    for (a, r) in &psis {
        all_converged &= r.converged;
        for &alpha in &alphas {
            let class = classify_value(r.psi, r.grid, &RateParams::new(*a, c.sigma, c.kappa, Some(alpha))?);
            table.push(vec![
                a.to_string(),
                alpha.to_string(),
                r.psi.to_string(),
                (ln_kappa / alpha).to_string(),
                class.phase.label().to_string(),
                r.converged.to_string(),
            ]);
        }
    }
    let status = if all_converged {
        Status::Ok
    } else {
        Status::NotConverged
    };
    let values = json!({ "points": table.rows.len(), "all_converged": all_converged });
    Ok(Output {
        record: record(config, status, values, &[]),
        table: Some(table),
    })
}

pub fn cmd_exact(config: &ExperimentConfig, c: &ExactConfig) -> Result<Output> {
    let k = TwoTypeKernel::build(&c.params, c.theta)?;
    let m = c.params.m();
    let t = k.expected_hitting_time()?;
    let occupation = k.occupation_functional(|x| x)?;
    let ratio: Vec<f64> = occupation.iter().zip(&t.values).map(|(u, t)| u / (t + 1.0)).collect();
    let values = json!({
        "m": m,
        "theta": c.theta,
        "theta_class": c.theta.class(c.params.ell()),
        "expected_hitting_time_from_m": t.values[m],
        "log_rate_from_m": t.values[m].ln() / m as f64,
        "occupation_ratio_from_m": ratio[m],
        "rho_star": rho_star(c.params.a(), c.params.sigma()),
        "relative_residual": t.relative_residual,
        "row_sum_error": k.max_row_sum_error(),
    });
    let table = if c.kernel {
        let mut table = Table::new(["h", "k", if c.log_space { "ln_p" } else { "p" }]);
        for h in 0..=m {
            for kk in 0..=m {
                let v = if c.log_space { k.ln_prob(h, kk) } else { k.prob(h, kk) };
                table.push(vec![h.to_string(), kk.to_string(), v.to_string()]);
            }
        }
        table
    } else {
        let mut table = Table::new(["i", "expected_hitting_time", "occupation_master_fraction", "ratio"]);
        for i in 0..=m {
            table.push(vec![
                i.to_string(),
                t.values[i].to_string(),
                occupation[i].to_string(),
                ratio[i].to_string(),
            ]);
        }
        table
    };
    Ok(Output {
        record: record(
            config,
            Status::Ok,
            values,
            &[
                (
                    "expected_hitting_time_from_m",
                    "generations until no master is left, from m masters",
                ),
                ("log_rate_from_m", "(1/m) ln of the expected hitting time"),
                (
                    "occupation_ratio_from_m",
                    "mean master fraction over one persistence period",
                ),
            ],
        ),
        table: Some(table),
    })
}

pub fn cmd_simulate(config: &ExperimentConfig, c: &SimulateConfig) -> Result<Output> {
    let p = &c.params;
    let (m, ell) = (p.m(), p.ell());
    let start = match &c.start {
        Some(counts) => OccupancyDistribution::new(counts.clone())?,
        None => OccupancyDistribution::concentrated(m, ell, ell),
    };
    start.check(p)?;
    let mut rng = stream(config.seed, 0);
    let mut r = RandomInputMatrix::sample(m, ell, &mut rng);
    let occ_columns = |prefix: &'static str| (0..=ell).map(move |k| format!("{prefix}o{k}"));
    let counts = |o: &OccupancyDistribution| o.counts().iter().map(|c| c.to_string()).collect::<Vec<_>>();

    let table = match c.process {
        Process::Occupancy => {
            let coupling = Coupling::new(*p);
            let mut table = Table::new(std::iter::once("step".to_string()).chain(occ_columns("")));
            let mut o = start;
            for n in 0..=c.steps {
                if n > 0 {
                    r.refill(&mut rng);
                    o = coupling.step_occupancy(&o, &r);
                }
                table.push(std::iter::once(n.to_string()).chain(counts(&o)).collect());
            }
            table
        }
        Process::Sandwich => {
            let mut table = Table::new(
                std::iter::once("step".to_string())
                    .chain(occ_columns("lower_"))
                    .chain(occ_columns(""))
                    .chain(occ_columns("upper_"))
                    .chain(std::iter::once("ordered".to_string())),
            );
            let mut s = Sandwich::new(*p, start)?;
            for n in 0..=c.steps {
                if n > 0 {
                    r.refill(&mut rng);
                    s.step(&r);
                }
                table.push(
                    std::iter::once(n.to_string())
                        .chain(counts(&s.lower))
                        .chain(counts(&s.middle))
                        .chain(counts(&s.upper))
                        .chain(std::iter::once(s.ordered().to_string()))
                        .collect(),
                );
            }
            table
        }
        Process::TwoType => {
            let coupling = Coupling::new(*p);
            let mut z = c.z0.unwrap_or(m);
            if z > m {
                return Err(Error::InvalidState(format!("z0 = {z} exceeds m = {m}")));
            }
            let mut table = Table::new(["step", "z"]);
            for n in 0..=c.steps {
                if n > 0 {
                    r.refill(&mut rng);
                    z = coupling.two_type_step(z, &r, c.theta);
                }
                table.push(vec![n.to_string(), z.to_string()]);
            }
            table
        }
    };
    let values = json!({ "steps": c.steps, "rows": table.rows.len() });
    Ok(Output {
        record: record(config, Status::Ok, values, &[]),
        table: Some(table),
    })
}

pub fn cmd_verify(config: &ExperimentConfig, c: &VerifyRunConfig) -> Result<Output> {
    let outcomes = run_battery(&VerifyConfig {
        params: c.params,
        seed: config.seed,
        trials: c.trials,
    });
    let passed = all_passed(&outcomes);
    let status = if passed { Status::Ok } else { Status::VerificationFailed };
    let values = json!({
        "all_passed": passed,
        "passed": outcomes.iter().filter(|o| o.passed).count(),
        "checks": outcomes,
    });
    Ok(Output {
        record: record(config, status, values, &[]),
        table: None,
    })
}

pub fn cmd_discovery(config: &ExperimentConfig, c: &DiscoveryConfig) -> Result<Output> {
    let p = &c.params;
    let class = c.start_class.unwrap_or(p.ell());
    if class == 0 || class > p.ell() {
        return Err(Error::InvalidState(format!(
            "start class {class} must lie in 1..={}",
            p.ell()
        )));
    }
    let start = OccupancyDistribution::concentrated(p.m(), p.ell(), class);
    let est = discovery_time_mc(p, &start, c.replicas, c.horizon, config.seed)?;
    let bound = p.m() as f64 * hitting_time_y(p.ell(), p.kappa(), p.q(), p.ell(), &[0])?;
    let values = json!({
        "mean": est.mean,
        "se": est.se,
        "censored_fraction": est.censored_fraction,
        "lower_bound_only": est.lower_bound_only,
        "replicas": est.replicas,
        "horizon": est.horizon,
        "bound_m_times_Etau0": bound,
        "bound_satisfied": est.mean <= bound + 3.0 * est.se,
    });
    Ok(Output {
        record: record(
            config,
            Status::Ok,
            values,
            &[
                ("mean", "generations until a master sequence appears"),
                (
                    "bound_m_times_Etau0",
                    "m times the mean hitting time of class 0 from class l for one chromosome",
                ),
            ],
        ),
        table: None,
    })
}

pub fn cmd_hitting(config: &ExperimentConfig, c: &HittingConfig) -> Result<Output> {
    let t = hitting_time_y(c.ell, c.kappa, c.q, c.from, &c.target)?;
    let chain = MutationChain::new(c.ell, c.kappa, c.q)?;
    let detailed_balance = chain.detailed_balance_error();
    let values = json!({
        "from": c.from,
        "target": c.target,
        "expected_hitting_time": t,
        "log_rate": t.ln() / c.ell as f64,
        "detailed_balance_error": detailed_balance,
    });
    Ok(Output {
        record: record(config, Status::Ok, values, &[("expected_hitting_time", "generations")]),
        table: None,
    })
}

/// Exit code for a failed run.
pub fn error_exit_code(e: &Error) -> u8 {
    match e {
        Error::NonConvergence(_) | Error::Singular(_) => 2,
        _ => 1,
    }
}

/// Exit code for a completed run.
pub fn status_exit_code(s: Status) -> u8 {
    match s {
        Status::Ok => 0,
        Status::NotConverged => 2,
        Status::VerificationFailed => 3,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ModelParams {
        ModelParams::new(2.0, 3, 4, 2, 0.1).unwrap()
    }

    fn every_command() -> Vec<ExperimentConfig> {
        let p = params();
        [
            RunConfig::Psi(PsiConfig {
                a: 0.3,
                sigma: 2.0,
                grid: 200,
            }),
            RunConfig::PhaseDiagram(PhaseDiagramConfig {
                sigma: 2.0,
                kappa: 2,
                a: Range {
                    min: 0.1,
                    max: 0.8,
                    steps: 3,
                },
                alpha: Range {
                    min: 0.5,
                    max: 4.0,
                    steps: 2,
                },
                grid: 100,
            }),
            RunConfig::Exact(ExactConfig {
                params: p,
                theta: Theta::Upper,
                kernel: false,
                log_space: false,
            }),
            RunConfig::Simulate(SimulateConfig {
                params: p,
                process: Process::Sandwich,
                steps: 5,
                start: None,
                z0: None,
                theta: Theta::Lower,
            }),
            RunConfig::Verify(VerifyRunConfig::default()),
            RunConfig::Discovery(DiscoveryConfig {
                params: p,
                replicas: 10,
                horizon: None,
                start_class: None,
            }),
            RunConfig::Hitting(HittingConfig {
                ell: 3,
                kappa: 2,
                q: 0.1,
                from: 3,
                target: vec![0],
            }),
        ]
        .into_iter()
        .map(|run| ExperimentConfig { seed: 7, run })
        .collect()
    }

    #[test]
    fn configs_round_trip() {
        for c in every_command() {
            let json = serde_json::to_string(&c).unwrap();
            let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
            assert_eq!(back, c);
            assert_eq!(back.hash(), c.hash());
            assert!(json.contains(&format!("\"command\":\"{}\"", c.command())));
        }
    }

    #[test]
    fn hash_tracks_seed_and_values() {
        let c = &every_command()[0];
        let mut other = c.clone();
        other.seed += 1;
        assert_ne!(c.hash(), other.hash());
        assert_eq!(c.hash().len(), 64);
    }

    #[test]
    fn ranges() {
        assert_eq!(Range::parse("0:1:3").unwrap().values(), vec![0.0, 0.5, 1.0]);
        assert_eq!(Range::parse("0.2:0.2:1").unwrap().values(), vec![0.2]);
        assert!(Range::parse("1:0:3").is_err());
        assert!(Range::parse("0:1").is_err());
        assert!(Range::parse("0:1:0").is_err());
    }

    #[test]
    fn every_command_runs_and_renders() {
        for c in every_command() {
            let out = run(&c).unwrap();
            assert_eq!(out.record.seed, 7);
            assert_eq!(out.record.config_hash, c.hash());
            let csv = out.render(Format::Csv);
            assert!(csv.starts_with(&format!(
                "# sharppeak {} config_hash={} seed=7\n",
                c.command(),
                c.hash()
            )));
            let json: Value = serde_json::from_str(&out.render(Format::Json)).unwrap();
            assert_eq!(json["command"], c.command());
        }
    }

    #[test]
    fn psi_vanishes_past_the_threshold() {
        let c = ExperimentConfig {
            seed: 0,
            run: RunConfig::Psi(PsiConfig {
                a: 2f64.ln() + 0.1,
                sigma: 2.0,
                grid: 200,
            }),
        };
        let out = run(&c).unwrap();
        assert_eq!(out.record.values["psi"], 0.0);
        assert!(out.record.converged);
        assert_eq!(out.record.status, Status::Ok);
    }

    #[test]
    fn invalid_parameters_name_the_constraint() {
        let c = ExperimentConfig {
            seed: 0,
            run: RunConfig::Psi(PsiConfig {
                a: 0.3,
                sigma: 0.5,
                grid: 100,
            }),
        };
        let e = run(&c).unwrap_err();
        assert_eq!(error_exit_code(&e), 1);
        assert!(e.to_string().contains("sigma"));
        assert_eq!(error_exit_code(&Error::NonConvergence("x".into())), 2);
        assert_eq!(status_exit_code(Status::VerificationFailed), 3);
    }

    #[test]
    fn simulate_is_deterministic() {
        let c = &every_command()[3];
        let a = run(c).unwrap().render(Format::Csv);
        let b = run(c).unwrap().render(Format::Csv);
        assert_eq!(a, b);
        let lines: Vec<&str> = a.lines().collect();
        assert_eq!(lines.len(), 2 + 6);
        assert!(lines[2..].iter().all(|l| l.ends_with("true")));
    }

    #[test]
    fn scalar_csv_for_records() {
        let out = run(&every_command()[6]).unwrap();
        let csv = out.render(Format::Csv);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].contains("expected_hitting_time"));
        assert!(!lines[1].contains("target"));
    }
}
