//! Dense linear algebra for small finite Markov chains: absorbing-chain
//! solves, stationary laws and the renewal identity.
//!
//! State spaces here have at most a few thousand states, so everything is
//! dense. Linear systems go through LU with partial pivoting followed by one
//! round of iterative refinement with a compensated residual.

use crate::error::{Error, Result};
use crate::numeric::NeumaierSum;

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Domain("matrix rows must all have length n".into()));
        }
        Ok(Self { n, data: rows.concat() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n..(i + 1) * self.n]
    }

    /// `A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let mut s = NeumaierSum::default();
                for (a, b) in self.row(i).iter().zip(x) {
                    s.add(a * b);
                }
                s.value()
            })
            .collect()
    }

    /// `xᵀ A`, i.e. one step of a distribution under a kernel.
    pub fn left_mul(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                for (o, &a) in out.iter_mut().zip(self.row(i)) {
                    *o += xi * a;
                }
            }
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a != 0.0 {
                    let dst = &mut out.data[i * n..(i + 1) * n];
                    for (d, &b) in dst.iter_mut().zip(other.row(k)) {
                        *d += a * b;
                    }
                }
            }
        }
        out
    }

    /// Largest deviation of a row sum from one.
    pub fn max_row_sum_error(&self) -> f64 {
        (0..self.n)
            .map(|i| (crate::numeric::compensated_sum(self.row(i).iter().copied()) - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// LU factorisation `PA = LU` with partial pivoting.
#[derive(Debug, Clone)]
pub struct Lu {
    a: DenseMatrix,
    lu: DenseMatrix,
    perm: Vec<usize>,
}

impl Lu {
    pub fn factor(a: &DenseMatrix) -> Result<Self> {
        let n = a.n();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            let (pivot_row, pivot) =
                (k..n)
                    .map(|i| (i, lu.get(i, k).abs()))
                    .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            // Negated so that a NaN pivot is also rejected.
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            if !(pivot > f64::EPSILON * scale * n as f64) {
                return Err(Error::Singular(format!("zero pivot in column {k} of {n}")));
            }
            if pivot_row != k {
                perm.swap(k, pivot_row);
                for j in 0..n {
                    let t = lu.get(k, j);
                    lu.set(k, j, lu.get(pivot_row, j));
                    lu.set(pivot_row, j, t);
                }
            }
            let d = lu.get(k, k);
            for i in (k + 1)..n {
                let factor = lu.get(i, k) / d;
                lu.set(i, k, factor);
                if factor != 0.0 {
                    for j in (k + 1)..n {
                        let v = lu.get(i, j) - factor * lu.get(k, j);
                        lu.set(i, j, v);
                    }
                }
            }
        }
        Ok(Self { a: a.clone(), lu, perm })
    }

    fn substitute(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.n();
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu.get(i, j) * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= self.lu.get(i, j) * x[j];
            }
            x[i] = s / self.lu.get(i, i);
        }
        x
    }

    /// Solve `A x = b` with one step of iterative refinement.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = self.substitute(b);
        let r = residual(&self.a, &x, b);
        let dx = self.substitute(&r);
        for (xi, d) in x.iter_mut().zip(dx) {
            *xi += d;
        }
        x
    }
}

/// `b − A x`, accumulated with compensation.
pub fn residual(a: &DenseMatrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    (0..a.n())
        .map(|i| {
            let mut s = NeumaierSum::default();
            s.add(b[i]);
            for (aij, xj) in a.row(i).iter().zip(x) {
                s.add(-aij * xj);
            }
            s.value()
        })
        .collect()
}

pub fn solve(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    Ok(Lu::factor(a)?.solve(b))
}

/// `I − Q` for the kernel restricted to `transient` (in that order).
///
/// The diagonal is formed as the total mass leaving each state rather than
/// `1 − P(h,h)`, which keeps it accurate when `P(h,h)` is within rounding of 1.
pub fn absorbing_system(kernel: &DenseMatrix, transient: &[usize]) -> DenseMatrix {
    let n = transient.len();
    let mut a = DenseMatrix::zeros(n);
    for (r, &h) in transient.iter().enumerate() {
        let row = kernel.row(h);
        let mut leave = NeumaierSum::default();
        for (j, &v) in row.iter().enumerate() {
            if j != h {
                leave.add(v);
            }
        }
        for (c, &k) in transient.iter().enumerate() {
            if c == r {
                a.set(r, c, leave.value());
            } else {
                a.set(r, c, -row[k]);
            }
        }
    }
    a
}

/// Solution of the absorbing system with right-hand side `rhs` given on all
/// states; entries on the target set are zero.
#[derive(Debug, Clone)]
pub struct AbsorbingSolution {
    pub values: Vec<f64>,
    /// `‖(I−Q)x − b‖∞` on the transient states.
    pub residual: f64,
    /// The same residual divided by `‖b‖∞ + ‖I−Q‖∞‖x‖∞`.
    pub relative_residual: f64,
}

/// Solve `u = rhs + Q u` on the complement of `target`, i.e.
/// `u(x) = E(Σ_{n<T} rhs(X_n) | X_0 = x)` with `T` the hitting time of `target`.
pub fn absorbing_functional(kernel: &DenseMatrix, target: &[bool], rhs: &[f64]) -> Result<AbsorbingSolution> {
    let n = kernel.n();
    if target.len() != n || rhs.len() != n {
        return Err(Error::Domain("target and rhs must match the kernel size".into()));
    }
    if !target.iter().any(|&t| t) {
        return Err(Error::Domain("empty target set".into()));
    }
    let transient: Vec<usize> = (0..n).filter(|&i| !target[i]).collect();
    let mut values = vec![0.0; n];
    if transient.is_empty() {
        return Ok(AbsorbingSolution {
            values,
            residual: 0.0,
            relative_residual: 0.0,
        });
    }
    let a = absorbing_system(kernel, &transient);
    let b: Vec<f64> = transient.iter().map(|&i| rhs[i]).collect();
    let x = solve(&a, &b)?;
    let res = residual(&a, &x, &b);
    let residual_inf = res.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let norm_a = (0..a.n())
        .map(|i| a.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let norm_x = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let norm_b = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let denom = norm_b + norm_a * norm_x;
    for (&i, v) in transient.iter().zip(x) {
        values[i] = v;
    }
    Ok(AbsorbingSolution {
        values,
        residual: residual_inf,
        relative_residual: if denom > 0.0 { residual_inf / denom } else { 0.0 },
    })
}

/// Expected hitting time of `target` from every state.
pub fn expected_hitting_times(kernel: &DenseMatrix, target: &[bool]) -> Result<AbsorbingSolution> {
    absorbing_functional(kernel, target, &vec![1.0; kernel.n()])
}

/// Law of the first state visited in `target` (at a time `n ≥ 0`), from every
/// start. Row `x` of the result is that law for `X_0 = x`.
pub fn entrance_law(kernel: &DenseMatrix, target: &[bool]) -> Result<DenseMatrix> {
    let n = kernel.n();
    let transient: Vec<usize> = (0..n).filter(|&i| !target[i]).collect();
    let mut out = DenseMatrix::zeros(n);
    for i in (0..n).filter(|&i| target[i]) {
        out.set(i, i, 1.0);
    }
    if transient.is_empty() {
        return Ok(out);
    }
    let lu = Lu::factor(&absorbing_system(kernel, &transient))?;
    for y in (0..n).filter(|&y| target[y]) {
        let b: Vec<f64> = transient.iter().map(|&x| kernel.get(x, y)).collect();
        for (&x, v) in transient.iter().zip(lu.solve(&b)) {
            out.set(x, y, v);
        }
    }
    Ok(out)
}

/// Whether every state reaches every other state.
pub fn is_irreducible(kernel: &DenseMatrix) -> bool {
    let n = kernel.n();
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                let w = if forward { kernel.get(i, j) } else { kernel.get(j, i) };
                if w > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    n > 0 && reach(true) && reach(false)
}

/// Stationary law by power iteration, stopped once `‖πP − π‖₁ < tol`.
pub fn stationary_distribution(kernel: &DenseMatrix, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = kernel.n();
    let mut pi = vec![1.0 / n as f64; n];
    for _ in 0..max_iter {
        let mut next = kernel.left_mul(&pi);
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= total);
        let change: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        pi = next;
        if change < tol {
            return Ok(pi);
        }
    }
    Err(Error::NonConvergence(format!(
        "power iteration did not reach l1 residual {tol:e} in {max_iter} iterations"
    )))
}

/// Stationary law from the linear system `π(I − P) = 0`, `Σπ = 1`, with the
/// last balance equation replaced by the normalisation.
pub fn stationary_direct(kernel: &DenseMatrix) -> Result<Vec<f64>> {
    let n = kernel.n();
    let mut a = DenseMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            // Transpose of I − P.
            let v = if i == j { 1.0 } else { 0.0 } - kernel.get(j, i);
            a.set(i, j, v);
        }
    }
    for j in 0..n {
        a.set(n - 1, j, 1.0);
    }
    let mut b = vec![0.0; n];
    b[n - 1] = 1.0;
    solve(&a, &b)
}

/// Both sides of the renewal identity for a regeneration at `anchor` after a
/// visit to `target`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenewalCheck {
    /// `Σ_x f(x) μ(x)`.
    pub lhs: f64,
    /// `E(Σ_{n=τ*}^{τ} f(X_n) | X_0 = e) / E(τ | X_0 = e)`.
    pub rhs: f64,
    pub residual: f64,
}

/// Check `Σ f dμ = E(Σ_{τ*}^{τ} f)/E(τ)` where `τ*` is the hitting time of
/// `target` and `τ` the first visit to `anchor` at or after `τ*`.
///
/// Preconditions: the chain is irreducible, `anchor ∉ target`, and `f`
/// vanishes off `target`.
pub fn renewal_identity_check(kernel: &DenseMatrix, target: &[bool], anchor: usize, f: &[f64]) -> Result<RenewalCheck> {
    let n = kernel.n();
    if target.len() != n || f.len() != n || anchor >= n {
        return Err(Error::Domain("target, f and anchor must match the kernel".into()));
    }
    if !is_irreducible(kernel) {
        return Err(Error::Precondition(
            "renewal identity needs an irreducible chain".into(),
        ));
    }
    if target[anchor] {
        return Err(Error::Precondition("anchor must lie outside the target set".into()));
    }
    if (0..n).any(|i| !target[i] && f[i] != 0.0) {
        return Err(Error::Precondition("f must vanish off the target set".into()));
    }

    let mu = stationary_direct(kernel)?;
    let lhs: f64 = crate::numeric::compensated_sum(f.iter().zip(&mu).map(|(a, b)| a * b));

    let at_anchor: Vec<bool> = (0..n).map(|i| i == anchor).collect();
    let to_target = expected_hitting_times(kernel, target)?.values;
    let to_anchor = expected_hitting_times(kernel, &at_anchor)?.values;
    // f(anchor) = 0, so summing up to T_e inclusive or exclusive agrees.
    let reward = absorbing_functional(kernel, &at_anchor, f)?.values;
    let entrance = entrance_law(kernel, target)?;

    let mut cycle = NeumaierSum::default();
    cycle.add(to_target[anchor]);
    let mut gain = NeumaierSum::default();
    for y in (0..n).filter(|&y| target[y]) {
        let w = entrance.get(anchor, y);
        cycle.add(w * to_anchor[y]);
        gain.add(w * reward[y]);
    }
    let rhs = gain.value() / cycle.value();
    Ok(RenewalCheck {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
    })
}
