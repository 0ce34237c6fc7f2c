//! Dense simplex for `max c^T w` subject to `A w <= b`, `w >= 0`, with
//! row generation for constraint families too large to hold at once.
//!
//! The solver keeps a dictionary `x_B = d - M x_N`, `z = z0 + r^T x_N`.
//! Pricing is Dantzig's largest-coefficient rule; after a run of
//! degenerate pivots it falls back to Bland's rule for good, which rules out
//! cycling. Ties are broken by variable label, so results are deterministic.
//! Infeasible starts (`b_i < 0`) go through the one-artificial auxiliary
//! problem.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

pub const MAX_ROWS: usize = 5000;
pub const MAX_VARS: usize = 2000;
const DEGENERATE_STREAK: usize = 50;

/// `max c^T w` s.t. `A w <= b`, `w >= 0`, with `A` dense and row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LPProblem<T> {
    pub objective: Vec<T>,
    pub matrix: Vec<T>,
    pub rhs: Vec<T>,
}

impl<T: Scalar> LPProblem<T> {
    pub fn new(objective: Vec<T>, matrix: Vec<T>, rhs: Vec<T>) -> Result<Self> {
        let p = Self {
            objective,
            matrix,
            rhs,
        };
        p.validate()?;
        Ok(p)
    }

    /// Builds the problem from a list of rows.
    pub fn from_rows(objective: Vec<T>, rows: &[Vec<T>], rhs: Vec<T>) -> Result<Self> {
        let n = objective.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(invalid("matrix", "every row needs one entry per variable"));
        }
        Self::new(objective, rows.concat(), rhs)
    }

    pub fn vars(&self) -> usize {
        self.objective.len()
    }

    pub fn rows(&self) -> usize {
        self.rhs.len()
    }

    fn validate(&self) -> Result<()> {
        let (m, n) = (self.rows(), self.vars());
        if m == 0 || n == 0 {
            return Err(invalid("problem", "need at least one row and one variable"));
        }
        if self.matrix.len() != m * n {
            return Err(invalid("matrix", format!("expected {m} x {n} entries")));
        }
        let finite = |v: &[T]| v.iter().all(|x| x.is_finite());
        if !finite(&self.objective) || !finite(&self.matrix) || !finite(&self.rhs) {
            return Err(invalid("problem", "all entries must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpSolution<T> {
    pub value: T,
    pub weights: Vec<T>,
    pub pivots: usize,
}

/// Solves a dense problem within the size caps.
pub fn lp_maximize<T: Scalar>(problem: &LPProblem<T>) -> Result<LpSolution<T>> {
    problem.validate()?;
    if problem.rows() > MAX_ROWS {
        return Err(Error::TooLarge(format!(
            "{} rows exceed the cap of {MAX_ROWS}; use row generation",
            problem.rows()
        )));
    }
    if problem.vars() > MAX_VARS {
        return Err(Error::TooLarge(format!(
            "{} variables exceed the cap of {MAX_VARS}",
            problem.vars()
        )));
    }
    Dictionary::new(problem).solve()
}

struct Dictionary<T> {
    m: usize,
    n: usize,
    /// `m x n` coefficients `M`, row-major.
    a: Vec<T>,
    d: Vec<T>,
    r: Vec<T>,
    z0: T,
    /// Labels: `0..n` originals, `n..n+m` slacks, `n+m` the artificial.
    basic: Vec<usize>,
    nonbasic: Vec<usize>,
    pivots: usize,
    bland: bool,
    eps: T,
}

impl<T: Scalar> Dictionary<T> {
    fn new(p: &LPProblem<T>) -> Self {
        let (m, n) = (p.rows(), p.vars());
        let scale = p
            .matrix
            .iter()
            .chain(&p.rhs)
            .chain(&p.objective)
            .fold(T::zero(), |acc, v| acc.max(v.abs()))
            .max(T::one());
        Self {
            m,
            n,
            a: p.matrix.clone(),
            d: p.rhs.clone(),
            r: p.objective.clone(),
            z0: T::zero(),
            basic: (n..n + m).collect(),
            nonbasic: (0..n).collect(),
            pivots: 0,
            bland: false,
            eps: T::epsilon() * T::lit(1e3) * scale,
        }
    }

    fn cols(&self) -> usize {
        self.nonbasic.len()
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let k = self.cols();
        let p = self.a[row * k + col];
        let inv = T::one() / p;
        {
            let pr = &mut self.a[row * k..(row + 1) * k];
            for v in pr.iter_mut() {
                *v = *v * inv;
            }
            pr[col] = inv;
        }
        self.d[row] = self.d[row] * inv;
        let pivot_row: Vec<T> = self.a[row * k..(row + 1) * k].to_vec();
        let d_row = self.d[row];
        for i in 0..self.m {
            if i == row {
                continue;
            }
            let f = self.a[i * k + col];
            if f == T::zero() {
                continue;
            }
            let ri = &mut self.a[i * k..(i + 1) * k];
            for (v, &q) in ri.iter_mut().zip(&pivot_row) {
                *v = *v - f * q;
            }
            ri[col] = -f * inv;
            self.d[i] = self.d[i] - f * d_row;
        }
        let f = self.r[col];
        if f != T::zero() {
            for (v, &q) in self.r.iter_mut().zip(&pivot_row) {
                *v = *v - f * q;
            }
            self.r[col] = -f * inv;
            self.z0 = self.z0 + f * d_row;
        }
        std::mem::swap(&mut self.basic[row], &mut self.nonbasic[col]);
        self.pivots += 1;
    }

    fn entering(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for j in 0..self.cols() {
            if self.r[j] <= self.eps {
                continue;
            }
            best = Some(match best {
                None => j,
                Some(b) if self.bland => {
                    if self.nonbasic[j] < self.nonbasic[b] { j } else { b }
                }
                Some(b) => {
                    if self.r[j] > self.r[b] { j } else { b }
                }
            });
        }
        best
    }

    fn leaving(&self, col: usize) -> Option<usize> {
        let k = self.cols();
        let mut best: Option<(usize, T)> = None;
        for i in 0..self.m {
            let a = self.a[i * k + col];
            if a <= self.eps {
                continue;
            }
            let ratio = self.d[i].max(T::zero()) / a;
            best = Some(match best {
                None => (i, ratio),
                Some((b, br)) => {
                    if ratio < br || (ratio == br && self.basic[i] < self.basic[b]) {
                        (i, ratio)
                    } else {
                        (b, br)
                    }
                }
            });
        }
        best.map(|(i, _)| i)
    }

    fn iterate(&mut self) -> Result<()> {
        let limit = 50 * (self.m + self.n) + 1000;
        let mut streak = 0;
        loop {
            let Some(col) = self.entering() else {
                return Ok(());
            };
            let Some(row) = self.leaving(col) else {
                return Err(Error::Unbounded);
            };
            let before = self.z0;
            self.pivot(row, col);
            if self.z0 > before {
                streak = 0;
            } else {
                streak += 1;
                if streak >= DEGENERATE_STREAK {
                    self.bland = true;
                }
            }
            if self.pivots > limit {
                return Err(Error::NoConvergence(self.pivots));
            }
        }
    }

    fn solve(mut self) -> Result<LpSolution<T>> {
        if self.d.iter().any(|&v| v < -self.eps) {
            self.phase_one()?;
        }
        self.iterate()?;
        let mut weights = vec![T::zero(); self.n];
        for (i, &label) in self.basic.iter().enumerate() {
            if label < self.n {
                weights[label] = self.d[i].max(T::zero());
            }
        }
        Ok(LpSolution {
            value: self.z0,
            weights,
            pivots: self.pivots,
        })
    }

    /// Auxiliary problem `max -x0` s.t. `A w - x0 <= b`.
    fn phase_one(&mut self) -> Result<()> {
        let art = self.n + self.m;
        let k = self.cols();
        let mut a = Vec::with_capacity(self.m * (k + 1));
        for i in 0..self.m {
            a.extend_from_slice(&self.a[i * k..(i + 1) * k]);
            a.push(-T::one());
        }
        self.a = a;
        self.nonbasic.push(art);
        let original = std::mem::replace(&mut self.r, vec![T::zero(); k + 1]);
        self.r[k] = -T::one();
        // The most negative row leaves; the dictionary becomes feasible.
        let mut row = 0;
        for i in 1..self.m {
            if self.d[i] < self.d[row] || (self.d[i] == self.d[row] && self.basic[i] < self.basic[row]) {
                row = i;
            }
        }
        self.pivot(row, k);
        self.iterate()?;
        if self.z0 < -self.eps {
            return Err(Error::Infeasible);
        }
        // Drive the artificial out of the basis if it stayed there at level 0.
        if let Some(i) = self.basic.iter().position(|&l| l == art) {
            let kk = self.cols();
            let col = (0..kk)
                .filter(|&j| self.a[i * kk + j].abs() > self.eps)
                .max_by(|&x, &y| {
                    self.a[i * kk + x]
                        .abs()
                        .partial_cmp(&self.a[i * kk + y].abs())
                        .expect("finite")
                        .then(y.cmp(&x))
                })
                .ok_or_else(|| Error::Internal("artificial variable stuck in basis".into()))?;
            self.pivot(i, col);
        }
        let kk = self.cols();
        let j_art = self
            .nonbasic
            .iter()
            .position(|&l| l == art)
            .expect("artificial is nonbasic");
        let mut a = Vec::with_capacity(self.m * (kk - 1));
        for i in 0..self.m {
            for j in 0..kk {
                if j != j_art {
                    a.push(self.a[i * kk + j]);
                }
            }
        }
        self.a = a;
        self.nonbasic.remove(j_art);
        // Express the original objective in the current nonbasic variables.
        let kk = self.cols();
        let mut r = vec![T::zero(); kk];
        let mut z0 = T::zero();
        for (label, &c) in original.iter().enumerate().take(self.n) {
            if c == T::zero() {
                continue;
            }
            if let Some(j) = self.nonbasic.iter().position(|&l| l == label) {
                r[j] = r[j] + c;
            } else if let Some(i) = self.basic.iter().position(|&l| l == label) {
                z0 = z0 + c * self.d[i];
                for j in 0..kk {
                    r[j] = r[j] - c * self.a[i * kk + j];
                }
            }
        }
        self.r = r;
        self.z0 = z0;
        self.bland = false;
        Ok(())
    }
}

/// Constraint family `sum_j entry(i, j) w_j <= rhs(i)` accessed row by row.
pub trait RowOracle<T: Scalar>: Sync {
    fn rows(&self) -> usize;
    fn vars(&self) -> usize;
    fn entry(&self, row: usize, var: usize) -> T;
    fn rhs(&self, row: usize) -> T;

    fn row(&self, row: usize) -> Vec<T> {
        (0..self.vars()).map(|j| self.entry(row, j)).collect()
    }

    fn activity(&self, row: usize, w: &[T]) -> T {
        w.iter()
            .enumerate()
            .filter(|(_, &wj)| wj != T::zero())
            .map(|(j, &wj)| self.entry(row, j) * wj)
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RowGenSettings {
    pub max_active: usize,
    /// Rows added per round.
    pub batch: usize,
    /// Relative violation `activity > (1 + tol) rhs` that triggers a row.
    pub tol: f64,
    pub max_rounds: usize,
}

impl Default for RowGenSettings {
    fn default() -> Self {
        Self {
            max_active: MAX_ROWS,
            batch: 500,
            tol: 1e-9,
            max_rounds: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowGenSolution<T> {
    pub solution: LpSolution<T>,
    pub active_rows: Vec<usize>,
    pub rounds: usize,
    /// Largest `activity / rhs` over all rows at the returned weights.
    pub max_ratio: T,
    /// True when every row holds within the tolerance.
    pub complete: bool,
}

/// Maximises `c^T w` over the oracle's rows.
///
/// Families within the cap are solved at once. Larger ones start from the
/// most binding row of every variable plus an evenly spaced sample and add
/// the most violated rows until none is violated or the active set is full;
/// in the latter case the result is flagged incomplete and `max_ratio`
/// reports the residual violation.
pub fn lp_maximize_rows<T: Scalar, O: RowOracle<T>>(
    objective: &[T],
    oracle: &O,
    settings: &RowGenSettings,
) -> Result<RowGenSolution<T>> {
    let (m, n) = (oracle.rows(), oracle.vars());
    if objective.len() != n {
        return Err(invalid("objective", "one coefficient per variable"));
    }
    if m == 0 || n == 0 {
        return Err(invalid("problem", "need at least one row and one variable"));
    }
    if n > MAX_VARS {
        return Err(Error::TooLarge(format!("{n} variables exceed the cap of {MAX_VARS}")));
    }
    let cap = settings.max_active.min(MAX_ROWS);
    let mut active: Vec<usize> = if m <= cap {
        (0..m).collect()
    } else {
        let mut seed: Vec<usize> = (0..n)
            .into_par_iter()
            .map(|j| {
                let mut best = 0;
                let mut best_v = T::neg_infinity();
                for i in 0..m {
                    let v = oracle.entry(i, j) / oracle.rhs(i).max(T::min_positive_value());
                    if v > best_v {
                        best = i;
                        best_v = v;
                    }
                }
                best
            })
            .collect();
        let sample = (cap / 4).max(1).min(cap.saturating_sub(seed.len()));
        seed.extend((0..sample).map(|k| k * m / sample.max(1)));
        seed.sort_unstable();
        seed.dedup();
        seed.truncate(cap);
        seed
    };
    let tol = T::lit(settings.tol);
    let mut rounds = 0;
    loop {
        rounds += 1;
        let rows: Vec<Vec<T>> = active.par_iter().map(|&i| oracle.row(i)).collect();
        let rhs: Vec<T> = active.iter().map(|&i| oracle.rhs(i)).collect();
        let problem = LPProblem::from_rows(objective.to_vec(), &rows, rhs)?;
        let solution = lp_maximize(&problem)?;
        // Ratios on every row.
        let ratios: Vec<T> = (0..m)
            .into_par_iter()
            .map(|i| oracle.activity(i, &solution.weights) / oracle.rhs(i))
            .collect();
        let max_ratio = ratios.iter().copied().fold(T::zero(), T::max);
        let mut violated: Vec<usize> = (0..m)
            .filter(|&i| ratios[i] > T::one() + tol)
            .filter(|i| active.binary_search(i).is_err())
            .collect();
        let complete = violated.is_empty() && max_ratio <= T::one() + tol;
        let room = cap.saturating_sub(active.len());
        if complete || room == 0 || rounds >= settings.max_rounds || violated.is_empty() {
            return Ok(RowGenSolution {
                solution,
                active_rows: active,
                rounds,
                max_ratio,
                complete,
            });
        }
        violated.sort_by(|&a, &b| {
            ratios[b]
                .partial_cmp(&ratios[a])
                .expect("finite ratios")
                .then(a.cmp(&b))
        });
        violated.truncate(settings.batch.min(room));
        active.extend(violated);
        active.sort_unstable();
    }
}

/// Dense oracle over an explicit problem, handy for tests and small cases.
pub struct DenseOracle<'a, T> {
    pub problem: &'a LPProblem<T>,
}

impl<T: Scalar> RowOracle<T> for DenseOracle<'_, T> {
    fn rows(&self) -> usize {
        self.problem.rows()
    }
    fn vars(&self) -> usize {
        self.problem.vars()
    }
    fn entry(&self, row: usize, var: usize) -> T {
        self.problem.matrix[row * self.problem.vars() + var]
    }
    fn rhs(&self, row: usize) -> T {
        self.problem.rhs[row]
    }
}
