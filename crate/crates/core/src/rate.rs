//! Large-deviation costs of the master-sequence density and the
//! quasipotential `V`, solved as a shortest path on a grid of `[0, 1]`.
//!
//! One generation of the limiting dynamics selects a master fraction `s`
//! around `f(r)` and then keeps a fraction `t/s` of it around `e^{−a}`; the
//! cost of a move `r → t` is the cheapest such split, `V₁(r,t)`. The
//! quasipotential is the cheapest path of such moves, and `ψ(a) = V(ρ*(a), 0)`
//! is the cost of losing the quasispecies.
//!
//! `+∞` is represented by `f64::INFINITY` and propagates through sums and
//! minima unchanged.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Default number of grid intervals.
pub const DEFAULT_GRID: usize = 2000;
/// Refinement stops once two successive grids agree to this.
pub const CONVERGENCE_TOL: f64 = 1e-3;
/// Grid doublings attempted before giving up.
pub const MAX_REFINEMENTS: usize = 3;
/// Grid used for the independent path-formula evaluation of `ψ`.
pub const PATH_FORMULA_MAX_GRID: usize = 500;
/// Argument tolerance of the golden-section inner minimisation.
pub const INNER_TOL: f64 = 1e-10;
/// Drift iterates examined when testing the zero set of `V`.
pub const DRIFT_ITERATES: usize = 50;

/// Parameters of the limiting dynamics.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RateParams {
    pub a: f64,
    pub sigma: f64,
    pub kappa: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

impl RateParams {
    pub fn new(a: f64, sigma: f64, kappa: usize, alpha: Option<f64>) -> Result<Self> {
        check_a(a)?;
        if !(sigma.is_finite() && sigma >= 1.0) {
            return Err(Error::invalid("sigma", sigma, "sigma >= 1 and finite"));
        }
        if kappa < 2 {
            return Err(Error::invalid("kappa", kappa, "kappa >= 2"));
        }
        if let Some(al) = alpha {
            if al.is_nan() || al < 0.0 {
                return Err(Error::invalid("alpha", al, "alpha in [0, +inf]"));
            }
        }
        Ok(Self { a, sigma, kappa, alpha })
    }
}

fn check_a(a: f64) -> Result<()> {
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::invalid("a", a, "a > 0 and finite"));
    }
    Ok(())
}

/// `x ln(x/y)` with `0 ln 0 = 0` and `x ln(x/0) = +∞` for `x > 0`.
#[inline]
fn entropy_term(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if y == 0.0 {
        f64::INFINITY
    } else {
        x * (x / y).ln()
    }
}

/// Binomial rate function `I(p, t)`; `+∞` outside `t ∈ [0, 1]`.
pub fn binom_rate(p: f64, t: f64) -> f64 {
    if !(0.0..=1.0).contains(&t) {
        return f64::INFINITY;
    }
    entropy_term(t, p) + entropy_term(1.0 - t, 1.0 - p)
}

/// Selection map `f(r) = σr / ((σ−1)r + 1)`.
pub fn selection_map(r: f64, sigma: f64) -> f64 {
    sigma * r / ((sigma - 1.0) * r + 1.0)
}

/// Drift map `F(r) = e^{−a} f(r)`.
pub fn drift_map(r: f64, a: f64, sigma: f64) -> f64 {
    (-a).exp() * selection_map(r, sigma)
}

/// Stable fixed point of the drift map: `(σe^{−a} − 1)/(σ − 1)` when
/// `σe^{−a} > 1`, otherwise `0`.
pub fn rho_star(a: f64, sigma: f64) -> f64 {
    let g = sigma * (-a).exp();
    if g > 1.0 {
        (g - 1.0) / (sigma - 1.0)
    } else {
        0.0
    }
}

/// `I(r, s, t) = I(f(r), s) + s·I(e^{−a}, t/s)`, with the `s = 0` term equal
/// to `0` for `t = 0` and `+∞` otherwise.
pub fn step_rate(r: f64, s: f64, t: f64, a: f64, sigma: f64) -> f64 {
    let first = binom_rate(selection_map(r, sigma), s);
    let second = if s == 0.0 {
        if t == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        s * binom_rate((-a).exp(), t / s)
    };
    first + second
}

/// `V₁(r, t) = inf_{s∈[t,1]} I(r, s, t)` by a 64-point bracketing scan
/// followed by golden-section search to `tol` on `s`.
///
/// The objective is convex in `s`; should a refined value ever come out
/// worse than the best scanned point, a dense scan is used instead.
pub fn one_step_cost(r: f64, t: f64, a: f64, sigma: f64, tol: f64) -> f64 {
    if !(0.0..=1.0).contains(&r) || !(0.0..=1.0).contains(&t) {
        return f64::INFINITY;
    }
    if r == 0.0 {
        return if t == 0.0 { 0.0 } else { f64::INFINITY };
    }
    let g = |s: f64| step_rate(r, s, t, a, sigma);
    const SCAN: usize = 64;
    let (lo, hi) = (t, 1.0);
    // Endpoints exactly: at f(r) = 1 only s = 1 has finite cost.
    let point = |i: usize| {
        if i == SCAN {
            hi
        } else {
            lo + (hi - lo) * i as f64 / SCAN as f64
        }
    };
    let (best_i, best) = (0..=SCAN)
        .map(|i| (i, g(point(i))))
        .fold((0, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc });
    if best == f64::INFINITY || hi - lo <= tol {
        return best;
    }
    let (mut x0, mut x3) = (point(best_i.saturating_sub(1)), point((best_i + 1).min(SCAN)));
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = x3 - phi * (x3 - x0);
    let mut x2 = x0 + phi * (x3 - x0);
    let (mut g1, mut g2) = (g(x1), g(x2));
    while x3 - x0 > tol {
        if g1 <= g2 {
            x3 = x2;
            x2 = x1;
            g2 = g1;
            x1 = x3 - phi * (x3 - x0);
            g1 = g(x1);
        } else {
            x0 = x1;
            x1 = x2;
            g1 = g2;
            x2 = x0 + phi * (x3 - x0);
            g2 = g(x2);
        }
    }
    let refined = g1.min(g2).min(g(x0)).min(g(x3));
    if refined <= best {
        refined
    } else {
        dense_scan(&g, lo, hi)
    }
}

fn dense_scan(g: &impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    const DENSE: usize = 100_000;
    (0..=DENSE)
        .map(|i| {
            g(if i == DENSE {
                hi
            } else {
                lo + (hi - lo) * i as f64 / DENSE as f64
            })
        })
        .fold(f64::INFINITY, f64::min)
}

/// `V₁(r, t)` evaluated at the stationary point of the convex objective,
/// `s* = t + f(1−g)(1−t)/(1 − fg)` with `f = f(r)`, `g = e^{−a}`, which always
/// lies in `[t, 1]`.
pub fn one_step_cost_stationary(r: f64, t: f64, a: f64, sigma: f64) -> f64 {
    if !(0.0..=1.0).contains(&r) || !(0.0..=1.0).contains(&t) {
        return f64::INFINITY;
    }
    let f = selection_map(r, sigma);
    step_rate(r, stationary_split(f, (-a).exp(), t), t, a, sigma)
}

/// Minimising `s` for `V₁`, written from whichever end of `[t, 1]` keeps the
/// degenerate cases `f = 0` (`s = t`) and `f = 1` (`s = 1`) exact.
#[inline]
fn stationary_split(f: f64, g: f64, t: f64) -> f64 {
    let s = if f < 0.5 {
        t + f * (1.0 - g) * (1.0 - t) / (1.0 - f * g)
    } else {
        1.0 - (1.0 - f) * (1.0 - t) / (1.0 - f * g)
    };
    s.clamp(t, 1.0)
}

/// Largest distance between a point of `[0,1]` and the nearest grid node;
/// the resolution to which zero-cost statements hold on a grid of `n` cells.
pub fn grid_tolerance(n: usize) -> f64 {
    1.0 / n as f64
}

/// Nodes of `[0, 1]`: the uniform grid `j/n` with extra exact points merged in.
#[derive(Debug, Clone)]
pub struct CostGrid {
    nodes: Vec<f64>,
    n: usize,
    a: f64,
    sigma: f64,
}

impl CostGrid {
    pub fn new(n: usize, a: f64, sigma: f64) -> Result<Self> {
        Self::with_points(n, a, sigma, &[])
    }

    pub fn with_points(n: usize, a: f64, sigma: f64, extra: &[f64]) -> Result<Self> {
        check_a(a)?;
        if n == 0 {
            return Err(Error::invalid("grid", n, "grid >= 1"));
        }
        if extra.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::Domain("grid points must lie in [0, 1]".into()));
        }
        let mut nodes: Vec<f64> = (0..=n)
            .map(|j| j as f64 / n as f64)
            .chain(extra.iter().copied())
            .collect();
        nodes.sort_by(f64::total_cmp);
        nodes.dedup();
        Ok(Self { nodes, n, a, sigma })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn cells(&self) -> usize {
        self.n
    }

    /// Index of the node equal to `x`, if any.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        self.nodes.binary_search_by(|v| v.total_cmp(&x)).ok()
    }

    /// Index of the node closest to `x`.
    pub fn nearest(&self, x: f64) -> usize {
        let i = self.nodes.partition_point(|&v| v < x);
        if i == 0 {
            0
        } else if i == self.nodes.len() || x - self.nodes[i - 1] <= self.nodes[i] - x {
            i - 1
        } else {
            i
        }
    }

    /// Edge cost `V₁(x_j, x_k)`.
    #[inline]
    pub fn cost(&self, j: usize, k: usize) -> f64 {
        one_step_cost_stationary(self.nodes[j], self.nodes[k], self.a, self.sigma)
    }

    /// Shortest-path potentials `V(x_source, ·)` by a dense label-setting
    /// search; edge costs are computed on the fly.
    pub fn potentials_from(&self, source: usize) -> Vec<f64> {
        self.search(source, None)
    }

    /// `V(x_from, x_to)`, stopping as soon as the target is settled.
    pub fn distance(&self, from: usize, to: usize) -> f64 {
        self.search(from, Some(to))[to]
    }

    fn search(&self, source: usize, target: Option<usize>) -> Vec<f64> {
        let n = self.nodes.len();
        let g = (-self.a).exp();
        // F(x_j) per node; V₁(x_j, ·) only depends on x_j through it.
        let drift: Vec<f64> = self.nodes.iter().map(|&x| selection_map(x, self.sigma)).collect();
        let mut dist = vec![f64::INFINITY; n];
        let mut done = vec![false; n];
        dist[source] = 0.0;
        for _ in 0..n {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for (i, (&d, &fin)) in dist.iter().zip(&done).enumerate() {
                if !fin && d < best {
                    best = d;
                    u = i;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            if Some(u) == target {
                break;
            }
            let f = drift[u];
            if f == 0.0 {
                // Only the null move is finite from 0, and it leads back to 0.
                continue;
            }
            for (v, &t) in self.nodes.iter().enumerate() {
                if done[v] {
                    continue;
                }
                let s = stationary_split(f, g, t);
                let c = binom_rate(f, s) + second_stage(s, t, g);
                let cand = best + c;
                if cand < dist[v] {
                    dist[v] = cand;
                }
            }
        }
        dist
    }
}

#[inline]
fn second_stage(s: f64, t: f64, g: f64) -> f64 {
    if s == 0.0 {
        if t == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        s * binom_rate(g, t / s)
    }
}

/// A grid value together with its refinement history.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Refined {
    pub value: f64,
    /// Cells of the finest grid used.
    pub grid: usize,
    /// Value on the previous (coarser) grid.
    pub previous: f64,
    pub converged: bool,
}

fn refine(n: usize, eval: impl Fn(usize) -> f64) -> Refined {
    let mut previous = eval(n);
    let mut grid = n;
    for _ in 0..MAX_REFINEMENTS {
        let next = eval(2 * grid);
        grid *= 2;
        let converged = (next - previous).abs() < CONVERGENCE_TOL || (next.is_infinite() && previous == next);
        if converged {
            return Refined {
                value: next,
                grid,
                previous,
                converged,
            };
        }
        previous = next;
    }
    Refined {
        value: previous,
        grid,
        previous,
        converged: false,
    }
}

/// `V(s, t)` on a single grid of `n` cells with `s` and `t` as exact nodes.
pub fn quasipotential_on_grid(s: f64, t: f64, a: f64, sigma: f64, n: usize) -> Result<f64> {
    let grid = CostGrid::with_points(n, a, sigma, &[s, t])?;
    let (i, j) = (grid.index_of(s).expect("inserted"), grid.index_of(t).expect("inserted"));
    Ok(grid.distance(i, j))
}

/// `V(s, t)`, doubling the grid from `n` until successive values agree.
pub fn quasipotential(s: f64, t: f64, a: f64, sigma: f64, n: usize) -> Result<Refined> {
    CostGrid::with_points(n, a, sigma, &[s, t])?;
    Ok(refine(n, |k| {
        quasipotential_on_grid(s, t, a, sigma, k).expect("validated")
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PsiResult {
    pub a: f64,
    pub sigma: f64,
    pub psi: f64,
    pub grid: usize,
    pub previous: f64,
    pub converged: bool,
    /// The explicit path formula on its own grid.
    pub path_formula: f64,
    pub path_grid: usize,
    /// The shortest-path value on that same grid.
    pub shortest_path_same_grid: f64,
    /// Whether the two agree within the grid tolerance.
    pub formulas_agree: bool,
}

/// `ψ(a) = V(ρ*(a), 0)`, refined from `n` cells, cross-checked against the
/// explicit minimisation over paths `(ρ_k, γ_k)`.
pub fn psi(a: f64, sigma: f64, n: usize) -> Result<PsiResult> {
    check_a(a)?;
    if !(sigma.is_finite() && sigma >= 1.0) {
        return Err(Error::invalid("sigma", sigma, "sigma >= 1 and finite"));
    }
    let rho = rho_star(a, sigma);
    let refined = if rho == 0.0 {
        // V(0, 0) = 0: the null path.
        Refined {
            value: 0.0,
            grid: n,
            previous: 0.0,
            converged: true,
        }
    } else {
        quasipotential(rho, 0.0, a, sigma, n)?
    };
    let path_grid = n.min(PATH_FORMULA_MAX_GRID);
    let path_formula = psi_path_formula(a, sigma, path_grid)?;
    let same = if rho == 0.0 {
        0.0
    } else {
        quasipotential_on_grid(rho, 0.0, a, sigma, path_grid)?
    };
    Ok(PsiResult {
        a,
        sigma,
        psi: refined.value,
        grid: refined.grid,
        previous: refined.previous,
        converged: refined.converged,
        path_formula,
        path_grid,
        shortest_path_same_grid: same,
        formulas_agree: (path_formula - same).abs() <= grid_tolerance(path_grid),
    })
}

/// `inf_l inf Σ_k I(f(ρ_k), γ_k) + γ_k I(e^{−a}, ρ_{k+1}/γ_k)` from `ρ_0 = ρ*`
/// to `ρ_l = 0`, with `ρ_k` on a grid of `n` cells and each `γ_k` minimised
/// by golden-section search. Relaxes over the number of steps `l` until no
/// value improves.
pub fn psi_path_formula(a: f64, sigma: f64, n: usize) -> Result<f64> {
    let rho = rho_star(a, sigma);
    if rho == 0.0 {
        return Ok(0.0);
    }
    let grid = CostGrid::with_points(n, a, sigma, &[rho])?;
    let nodes = grid.nodes().to_vec();
    let k = nodes.len();
    let costs: Vec<Vec<f64>> = nodes
        .par_iter()
        .map(|&x| {
            nodes
                .iter()
                .map(|&y| one_step_cost(x, y, a, sigma, INNER_TOL))
                .collect()
        })
        .collect();
    let mut best = vec![f64::INFINITY; k];
    best[grid.index_of(rho).expect("inserted")] = 0.0;
    for _ in 0..k {
        let mut next = best.clone();
        let mut changed = false;
        for (y, row) in costs.iter().enumerate() {
            if best[y] == f64::INFINITY {
                continue;
            }
            for (x, &c) in row.iter().enumerate() {
                let cand = best[y] + c;
                if cand < next[x] {
                    next[x] = cand;
                    changed = true;
                }
            }
        }
        best = next;
        if !changed {
            break;
        }
    }
    Ok(best[0])
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Phase {
    Disordered,
    Quasispecies,
    NearCritical { margin: f64 },
}

impl Phase {
    pub fn label(&self) -> &'static str {
        match self {
            Phase::Disordered => "disordered",
            Phase::Quasispecies => "quasispecies",
            Phase::NearCritical { .. } => "near_critical",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PhaseClassification {
    pub phase: Phase,
    pub psi: f64,
    /// Limiting master density: `0`, `ρ*(a)`, or `None` near the curve.
    pub predicted_master: Option<f64>,
}

/// Position of `(a, α)` relative to the curve `α ψ(a) = ln κ`. `α` may be
/// `0` or `+∞`; both are decided without a grid solve.
pub fn classify_phase(a: f64, alpha: f64, sigma: f64, kappa: usize, n: usize) -> Result<PhaseClassification> {
    let params = RateParams::new(a, sigma, kappa, Some(alpha))?;
    let rho = rho_star(a, sigma);
    let disordered = |psi| PhaseClassification {
        phase: Phase::Disordered,
        psi,
        predicted_master: Some(0.0),
    };
    if alpha == 0.0 {
        let psi = if rho == 0.0 { 0.0 } else { psi_value(a, sigma, n)?.0 };
        return Ok(disordered(psi));
    }
    if alpha == f64::INFINITY {
        if rho == 0.0 {
            return Ok(disordered(0.0));
        }
        return Ok(PhaseClassification {
            phase: Phase::Quasispecies,
            psi: psi_value(a, sigma, n)?.0,
            predicted_master: Some(rho),
        });
    }
    let (psi, grid) = psi_value(a, sigma, n)?;
    Ok(classify_value(psi, grid, &params))
}

/// Classification from an already computed `ψ(a)` on a grid of `grid` cells.
pub fn classify_value(psi: f64, grid: usize, params: &RateParams) -> PhaseClassification {
    let alpha = params.alpha.unwrap_or(f64::NAN);
    let ln_kappa = (params.kappa as f64).ln();
    let rho = rho_star(params.a, params.sigma);
    if alpha.is_infinite() {
        return if psi > 0.0 {
            PhaseClassification {
                phase: Phase::Quasispecies,
                psi,
                predicted_master: Some(rho),
            }
        } else {
            PhaseClassification {
                phase: Phase::Disordered,
                psi,
                predicted_master: Some(0.0),
            }
        };
    }
    let margin = alpha * grid_tolerance(grid);
    let value = alpha * psi;
    let (phase, predicted_master) = if value < ln_kappa - margin {
        (Phase::Disordered, Some(0.0))
    } else if value > ln_kappa + margin {
        (Phase::Quasispecies, Some(rho))
    } else {
        (Phase::NearCritical { margin }, None)
    };
    PhaseClassification {
        phase,
        psi,
        predicted_master,
    }
}

fn psi_value(a: f64, sigma: f64, n: usize) -> Result<(f64, usize)> {
    let rho = rho_star(a, sigma);
    if rho == 0.0 {
        return Ok((0.0, n));
    }
    let r = quasipotential(rho, 0.0, a, sigma, n)?;
    if !r.converged {
        return Err(Error::NonConvergence(format!(
            "psi({a}) did not settle: {} on {} cells vs {} before",
            r.value, r.grid, r.previous
        )));
    }
    Ok((r.value, r.grid))
}

/// Critical ratio `α_c = ln κ / ψ(a)`, `+∞` when `ψ(a) = 0`.
pub fn critical_alpha(a: f64, sigma: f64, kappa: usize, n: usize) -> Result<f64> {
    RateParams::new(a, sigma, kappa, None)?;
    let (psi, _) = psi_value(a, sigma, n)?;
    Ok(critical_alpha_from(psi, kappa))
}

pub fn critical_alpha_from(psi: f64, kappa: usize) -> f64 {
    if psi == 0.0 {
        f64::INFINITY
    } else {
        (kappa as f64).ln() / psi
    }
}
