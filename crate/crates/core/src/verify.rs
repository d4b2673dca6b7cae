//! The property battery behind `sharppeak verify`: each check runs on a small
//! configuration and reports pass/fail with a one-line detail.

use serde::{Deserialize, Serialize};

use crate::coupling::{
    monotonicity_exhaustive, monotonicity_random, positive_correlations_check, sandwich_run, CheckStatus, Theta,
};
use crate::error::Result;
use crate::lumping::lumping_errors;
use crate::markov::renewal_identity_check;
use crate::model::LumpedModel;
use crate::neutral::{equilibrium_sandwich_check, return_probability_bound_check, MutationChain};
use crate::params::ModelParams;
use crate::rate::{binom_rate, drift_map, one_step_cost, rho_star};
use crate::rng::stream;
use crate::state::OccupancyDistribution;
use crate::two_type::TwoTypeKernel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub params: ModelParams,
    pub seed: u64,
    /// Random trials for the Monte Carlo checks.
    pub trials: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            params: ModelParams::new(2.0, 2, 3, 2, 0.1).expect("valid default"),
            seed: 1,
            trials: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Exact checks are held to this absolute tolerance.
pub const EXACT_TOL: f64 = 1e-12;
/// Renewal-identity tolerance.
pub const RENEWAL_TOL: f64 = 1e-10;

fn outcome(name: &'static str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome { name, passed, detail }
}

/// Run every check. Errors from a check are reported as failures, not
/// propagated, so one broken check does not hide the others.
pub fn run_battery(config: &VerifyConfig) -> Vec<CheckOutcome> {
    type Check = fn(&VerifyConfig) -> Result<(bool, String)>;
    let checks: [(&'static str, Check); 10] = [
        ("lumping", lumping),
        ("monotone_coupling", monotone_coupling),
        ("sandwich", sandwich),
        ("positive_correlations", positive_correlations),
        ("reversibility", reversibility),
        ("equilibrium_bounds", equilibrium_bounds),
        ("renewal_identity", renewal),
        ("two_type_order", two_type_order),
        ("rate_function", rate_function),
        ("row_stochastic", row_stochastic),
    ];
    checks
        .iter()
        .map(|(name, check)| match check(config) {
            Ok((passed, detail)) => outcome(name, passed, detail),
            Err(e) => outcome(name, false, format!("error: {e}")),
        })
        .collect()
}

pub fn all_passed(outcomes: &[CheckOutcome]) -> bool {
    outcomes.iter().all(|o| o.passed)
}

fn lumping(c: &VerifyConfig) -> Result<(bool, String)> {
    let r = lumping_errors(&c.params)?;
    Ok((r.max_error() < EXACT_TOL, format!("max error {:.2e}", r.max_error())))
}

fn monotone_coupling(c: &VerifyConfig) -> Result<(bool, String)> {
    let mut rng = stream(c.seed, 1);
    let random = monotonicity_random(&c.params, c.trials, &mut rng);
    let exhaustive = monotonicity_exhaustive(&c.params, 20, &mut rng);
    let violations = random.violations + exhaustive.violations;
    Ok((
        violations == 0,
        format!("{violations} violations in {} pairs", random.trials + exhaustive.trials),
    ))
}

fn sandwich(c: &VerifyConfig) -> Result<(bool, String)> {
    let mut rng = stream(c.seed, 2);
    let p = &c.params;
    let start = OccupancyDistribution::concentrated(p.m(), p.ell(), p.ell());
    let r = sandwich_run(p, start, c.trials, &mut rng)?;
    Ok((
        r.violations == 0,
        format!("{} violations in {} steps", r.violations, r.steps),
    ))
}

fn positive_correlations(c: &VerifyConfig) -> Result<(bool, String)> {
    let mut rng = stream(c.seed, 3);
    let neutral = c.params.with_sigma(1.0)?;
    let ell = neutral.ell();
    let law = vec![1.0 / (ell + 1) as f64; ell + 1];
    let r = positive_correlations_check(&neutral, &law, 3, c.trials.max(200), f64::INFINITY, &mut rng)?;
    let status = r.status();
    // An indeterminate estimate is not a hard failure.
    Ok((
        status != CheckStatus::Fail,
        format!("{status:?} over {} covariances", r.estimates.len()),
    ))
}

fn reversibility(c: &VerifyConfig) -> Result<(bool, String)> {
    let p = &c.params;
    let err = MutationChain::new(p.ell(), p.kappa(), p.q())?.detailed_balance_error();
    Ok((err < EXACT_TOL, format!("detailed-balance error {err:.2e}")))
}

fn equilibrium_bounds(c: &VerifyConfig) -> Result<(bool, String)> {
    let p = &c.params;
    let ret = return_probability_bound_check(p.ell(), p.kappa(), p.q(), 200)?;
    let sand = equilibrium_sandwich_check(p.ell(), p.kappa())?;
    Ok((
        ret.holds() && sand.holds(),
        format!(
            "return bound {}/{} violated, equilibrium sandwich {}/{} violated",
            ret.violations, ret.checked, sand.violations, sand.checked
        ),
    ))
}

fn renewal(c: &VerifyConfig) -> Result<(bool, String)> {
    let model = LumpedModel::new(c.params);
    let (states, kernel) = model.occupancy_kernel();
    let target: Vec<bool> = states.iter().map(|o| o.has_master()).collect();
    let anchor = states
        .binary_search(&OccupancyDistribution::concentrated(
            c.params.m(),
            c.params.ell(),
            c.params.ell(),
        ))
        .expect("enumerated");
    let f: Vec<f64> = states.iter().map(|o| o.masters() as f64 / o.m() as f64).collect();
    let r = renewal_identity_check(&kernel, &target, anchor, &f)?;
    Ok((r.residual < RENEWAL_TOL, format!("lhs {:.12} rhs {:.12}", r.lhs, r.rhs)))
}

fn two_type_order(c: &VerifyConfig) -> Result<(bool, String)> {
    let up = TwoTypeKernel::build(&c.params, Theta::Upper)?;
    let lo = TwoTypeKernel::build(&c.params, Theta::Lower)?;
    let tu = up.expected_hitting_time()?;
    let tl = lo.expected_hitting_time()?;
    let ordered = up.dominates(&lo, EXACT_TOL) && tu.values.iter().zip(&tl.values).all(|(a, b)| a >= b);
    let residual = tu.relative_residual.max(tl.relative_residual);
    Ok((
        ordered && residual < 1e-9,
        format!(
            "E(τ₀|m) upper {:.6} lower {:.6}, relative residual {residual:.1e}",
            tu.values[c.params.m()],
            tl.values[c.params.m()]
        ),
    ))
}

fn rate_function(c: &VerifyConfig) -> Result<(bool, String)> {
    let sigma = c.params.sigma();
    let a = 0.3;
    let mut worst = 0.0f64;
    for p in [0.1, 0.5, 0.9] {
        worst = worst.max(binom_rate(p, p).abs());
    }
    let e = f64::exp(-a);
    worst = worst.max((binom_rate(e, 0.0) - (1.0 / (1.0 - e)).ln()).abs());
    let r = 0.2;
    worst = worst.max(one_step_cost(r, drift_map(r, a, sigma), a, sigma, 1e-12).abs());
    let rho = rho_star(a, sigma);
    worst = worst.max((drift_map(rho, a, sigma) - rho).abs());
    Ok((worst < 1e-9, format!("worst deviation {worst:.2e}")))
}

fn row_stochastic(c: &VerifyConfig) -> Result<(bool, String)> {
    let (_, kernel) = LumpedModel::new(c.params).occupancy_kernel();
    let err = kernel.max_row_sum_error();
    Ok((err < EXACT_TOL, format!("max row-sum error {err:.2e}")))
}
