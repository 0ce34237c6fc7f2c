//! Potentials of discrete measures and the norm estimators built on them.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::geometry::{check_dim, dist_p_unchecked, FracParams, ParabolicCube, SpacetimePoint};
use crate::kernels::KernelKind;
use crate::measures::{Atoms, DiscreteMeasure, SignedDiscreteMeasure};
use crate::scalar::Scalar;

/// Which potential operator to apply.
#[derive(Debug, Clone, PartialEq)]
pub enum PotentialVariant<T> {
    /// `sum_i w_i K(p - a_i)`.
    Plain,
    /// Plain, restricted to atoms with `dist_p(p, a_i) > eps`.
    Truncated(T),
    /// `sum_i w_i K(a_i - p)`.
    Dual,
    /// `max_eps |Truncated(eps)|` over the given radii.
    Maximal(Vec<T>),
}

/// Potential value plus the number of atoms that coincided with the point
/// and were left out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PotentialValue<T> {
    pub value: T,
    pub self_hits: usize,
}

#[inline]
fn kernel_at<T: Scalar>(
    kind: &KernelKind<T>,
    p: &SpacetimePoint<T>,
    a: &SpacetimePoint<T>,
    dual: bool,
    params: &FracParams<T>,
) -> T {
    let mut x_sq = T::zero();
    for (&u, &v) in p.x.iter().zip(&a.x) {
        let d = u - v;
        x_sq = x_sq + d * d;
    }
    let dt = if dual { a.t - p.t } else { p.t - a.t };
    kind.value(x_sq, dt, params)
}

/// Evaluates a potential of `mu` at `p`.
///
/// Atoms sitting exactly at `p` are skipped and counted in `self_hits`.
pub fn potential<T: Scalar, M: Atoms<T>>(
    mu: &M,
    kind: &KernelKind<T>,
    variant: &PotentialVariant<T>,
    p: &SpacetimePoint<T>,
    params: &FracParams<T>,
) -> Result<PotentialValue<T>> {
    check_dim(p, params.n())?;
    if let Some(n) = mu.dim() {
        if n != params.n() {
            return Err(Error::DimensionMismatch {
                expected: params.n(),
                found: n,
            });
        }
    }
    kind.check(params)?;
    match variant {
        PotentialVariant::Truncated(eps) if !(*eps > T::zero()) => {
            return Err(invalid("eps", "truncation radius must be positive"))
        }
        PotentialVariant::Maximal(grid) if grid.is_empty() => {
            return Err(invalid("eps_grid", "maximal potential needs at least one radius"))
        }
        PotentialVariant::Maximal(grid) if grid.iter().any(|e| !(*e > T::zero())) => {
            return Err(invalid("eps_grid", "radii must be positive"))
        }
        _ => {}
    }
    Ok(potential_unchecked(mu.atoms(), mu.weights(), kind, variant, p, params))
}

pub(crate) fn potential_unchecked<T: Scalar>(
    atoms: &[SpacetimePoint<T>],
    weights: &[T],
    kind: &KernelKind<T>,
    variant: &PotentialVariant<T>,
    p: &SpacetimePoint<T>,
    params: &FracParams<T>,
) -> PotentialValue<T> {
    let mut self_hits = 0;
    let value = match variant {
        PotentialVariant::Plain | PotentialVariant::Dual => {
            let dual = matches!(variant, PotentialVariant::Dual);
            let mut acc = T::zero();
            for (a, &w) in atoms.iter().zip(weights) {
                if a == p {
                    self_hits += 1;
                    continue;
                }
                acc = acc + w * kernel_at(kind, p, a, dual, params);
            }
            acc
        }
        PotentialVariant::Truncated(eps) => {
            let mut acc = T::zero();
            for (a, &w) in atoms.iter().zip(weights) {
                if dist_p_unchecked(p, a, params) > *eps {
                    acc = acc + w * kernel_at(kind, p, a, false, params);
                }
            }
            acc
        }
        PotentialVariant::Maximal(grid) => {
            // Sort contributions by distance once; each eps is a suffix sum.
            let mut contrib: Vec<(T, T)> = atoms
                .iter()
                .zip(weights)
                .map(|(a, &w)| {
                    (
                        dist_p_unchecked(p, a, params),
                        w * kernel_at(kind, p, a, false, params),
                    )
                })
                .collect();
            contrib.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite distances"));
            let mut suffix = vec![T::zero(); contrib.len() + 1];
            for i in (0..contrib.len()).rev() {
                suffix[i] = suffix[i + 1] + contrib[i].1;
            }
            grid.iter()
                .map(|&eps| suffix[contrib.partition_point(|c| c.0 <= eps)].abs())
                .fold(T::zero(), T::max)
        }
    };
    PotentialValue { value, self_hits }
}

/// `count` quantiles of the sorted pairwise distances, the default radii of
/// the maximal potential.
pub fn default_eps_grid<T: Scalar, M: Atoms<T> + Sync>(
    mu: &M,
    params: &FracParams<T>,
    count: usize,
) -> Result<Vec<T>> {
    let atoms = mu.atoms();
    let mut all: Vec<T> = (0..atoms.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            (i + 1..atoms.len()).map(move |j| dist_p_unchecked(&atoms[i], &atoms[j], params))
        })
        .filter(|&d| d > T::zero())
        .collect();
    if all.is_empty() || count == 0 {
        return Err(Error::Empty("pairwise distances"));
    }
    all.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let last = all.len() - 1;
    let mut out: Vec<T> = (0..count)
        .map(|i| if count == 1 { all[last] } else { all[i * last / (count - 1)] })
        .collect();
    out.dedup();
    Ok(out)
}

/// Uniform tensor grid on a box in `R^{N+1}` with an exclusion radius
/// around atoms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSpec<T> {
    /// Lower corner `[x_1, .., x_N, t]`.
    pub lo: Vec<T>,
    pub hi: Vec<T>,
    /// Nodes per axis, each at least 2.
    pub resolution: Vec<usize>,
    /// Nodes with `dist_p <= exclusion` to an atom are skipped.
    pub exclusion: T,
}

impl<T: Scalar> GridSpec<T> {
    pub fn new(lo: Vec<T>, hi: Vec<T>, resolution: Vec<usize>, exclusion: T) -> Result<Self> {
        if lo.len() < 2 || lo.len() != hi.len() || lo.len() != resolution.len() {
            return Err(invalid("grid", "box corners and resolution must all have N + 1 entries"));
        }
        if lo.iter().zip(&hi).any(|(&a, &b)| !(b > a) || !a.is_finite() || !b.is_finite()) {
            return Err(invalid("grid", "box must be nondegenerate and finite"));
        }
        if resolution.iter().any(|&r| r < 2) {
            return Err(invalid("grid", "resolution must be at least 2 per axis"));
        }
        if !(exclusion >= T::zero()) {
            return Err(invalid("exclusion", "exclusion radius must be nonnegative"));
        }
        Ok(Self {
            lo,
            hi,
            resolution,
            exclusion,
        })
    }

    /// Planar grid `[x_lo, x_hi] x [t_lo, t_hi]` with `nx x nt` nodes.
    pub fn planar(x: (T, T), t: (T, T), nx: usize, nt: usize, exclusion: T) -> Result<Self> {
        Self::new(vec![x.0, t.0], vec![x.1, t.1], vec![nx, nt], exclusion)
    }

    pub fn dim(&self) -> usize {
        self.lo.len() - 1
    }

    pub fn node_count(&self) -> usize {
        self.resolution.iter().product()
    }

    /// Node with flat index `idx`, lexicographic with the last axis fastest.
    pub fn node(&self, mut idx: usize) -> SpacetimePoint<T> {
        let dims = self.lo.len();
        let mut coords = vec![T::zero(); dims];
        for a in (0..dims).rev() {
            let r = self.resolution[a];
            let i = idx % r;
            idx /= r;
            let frac = T::from_usize_lossy(i) / T::from_usize_lossy(r - 1);
            coords[a] = if i == r - 1 {
                self.hi[a]
            } else {
                self.lo[a] + frac * (self.hi[a] - self.lo[a])
            };
        }
        SpacetimePoint::from_coords(&coords)
    }

    pub fn spacing(&self) -> Vec<T> {
        self.lo
            .iter()
            .zip(&self.hi)
            .zip(&self.resolution)
            .map(|((&a, &b), &r)| (b - a) / T::from_usize_lossy(r - 1))
            .collect()
    }

    /// True when `self` has at least the node density of `other` on every
    /// axis and a smaller exclusion radius.
    pub fn is_finer_than(&self, other: &Self) -> bool {
        self.lo.len() == other.lo.len()
            && self.exclusion < other.exclusion
            && self
                .spacing()
                .iter()
                .zip(other.spacing())
                .all(|(&a, b)| a < b)
    }
}

/// Values of a potential on the non-excluded grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct GridValues<T> {
    /// Flat node indices in increasing order.
    pub nodes: Vec<usize>,
    pub values: Vec<T>,
    pub excluded: usize,
}

/// Evaluates a potential at every grid node outside the exclusion balls.
pub fn evaluate_on_grid<T: Scalar, M: Atoms<T> + Sync>(
    mu: &M,
    kind: &KernelKind<T>,
    variant: &PotentialVariant<T>,
    grid: &GridSpec<T>,
    params: &FracParams<T>,
) -> Result<GridValues<T>> {
    if grid.dim() != params.n() {
        return Err(Error::DimensionMismatch {
            expected: params.n(),
            found: grid.dim(),
        });
    }
    // Reuse the argument checks of the pointwise evaluator.
    potential(mu, kind, variant, &grid.node(0), params)?;
    let atoms = mu.atoms();
    let weights = mu.weights();
    let evaluated: Vec<Option<T>> = (0..grid.node_count())
        .into_par_iter()
        .map(|idx| {
            let p = grid.node(idx);
            if atoms
                .iter()
                .any(|a| dist_p_unchecked(&p, a, params) <= grid.exclusion)
            {
                return None;
            }
            Some(potential_unchecked(atoms, weights, kind, variant, &p, params).value)
        })
        .collect();
    let mut out = GridValues {
        nodes: Vec::new(),
        values: Vec::new(),
        excluded: 0,
    };
    for (idx, v) in evaluated.into_iter().enumerate() {
        match v {
            Some(v) => {
                out.nodes.push(idx);
                out.values.push(v);
            }
            None => out.excluded += 1,
        }
    }
    Ok(out)
}

/// Maximum of `|potential|` over the evaluated nodes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupReport<T> {
    pub value: T,
    pub argmax: SpacetimePoint<T>,
    pub evaluated: usize,
    pub excluded: usize,
}

pub fn sup_norm_on_grid<T: Scalar, M: Atoms<T> + Sync>(
    mu: &M,
    kind: &KernelKind<T>,
    variant: &PotentialVariant<T>,
    grid: &GridSpec<T>,
    params: &FracParams<T>,
) -> Result<SupReport<T>> {
    let vals = evaluate_on_grid(mu, kind, variant, grid, params)?;
    sup_of(&vals, grid)
}

pub fn sup_of<T: Scalar>(vals: &GridValues<T>, grid: &GridSpec<T>) -> Result<SupReport<T>> {
    if vals.nodes.is_empty() {
        return Err(Error::Empty("grid nodes outside the exclusion balls"));
    }
    let mut best = 0;
    for i in 1..vals.values.len() {
        if vals.values[i].abs() > vals.values[best].abs() {
            best = i;
        }
    }
    Ok(SupReport {
        value: vals.values[best].abs(),
        argmax: grid.node(vals.nodes[best]),
        evaluated: vals.nodes.len(),
        excluded: vals.excluded,
    })
}

/// CSV dump with header `x_1,..,x_N,t,value`, one row per evaluated node.
pub fn grid_csv<T: Scalar>(vals: &GridValues<T>, grid: &GridSpec<T>) -> String {
    let mut out = String::new();
    for i in 1..=grid.dim() {
        let _ = write!(out, "x_{i},");
    }
    out.push_str("t,value\n");
    for (&idx, v) in vals.nodes.iter().zip(&vals.values) {
        let p = grid.node(idx);
        for c in &p.x {
            let _ = write!(out, "{c:e},");
        }
        let _ = writeln!(out, "{:e},{v:e}", p.t);
    }
    out
}

/// Largest atom count accepted by [`l2_operator_norm`] (dense matrix).
pub const L2_MAX_ATOMS: usize = 8000;
pub const L2_TOLERANCE: f64 = 1e-8;
pub const L2_MAX_STEPS: usize = 10_000;
const L2_SEED: u64 = 0x6c32_6e6f_726d;

/// Norm of `T_{mu, eps}` on `L^2(mu)`.
///
/// With `A_ij = K(a_i - a_j) [dist_p(a_i, a_j) > eps]` and `D = diag(w)`,
/// the operator is unitarily equivalent to `B = D^{1/2} A D^{1/2}` on plain
/// `l^2`; its norm is found by power iteration on `B^T B`, stopped when the
/// eigen-residual drops below `1e-8` of the eigenvalue.
pub fn l2_operator_norm<T: Scalar>(
    mu: &DiscreteMeasure<T>,
    kind: &KernelKind<T>,
    eps: T,
    params: &FracParams<T>,
) -> Result<T> {
    if !(eps > T::zero()) {
        return Err(invalid("eps", "truncation radius must be positive"));
    }
    kind.check(params)?;
    let n = mu.len();
    if n > L2_MAX_ATOMS {
        return Err(Error::TooLarge(format!("{n} atoms exceed the dense limit of {L2_MAX_ATOMS}")));
    }
    for a in mu.atoms() {
        check_dim(a, params.n())?;
    }
    let atoms = mu.atoms();
    let sw: Vec<T> = mu.weights().iter().map(|w| w.sqrt()).collect();
    let b: Vec<T> = (0..n * n)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / n, k % n);
            if dist_p_unchecked(&atoms[i], &atoms[j], params) > eps {
                sw[i] * kernel_at(kind, &atoms[i], &atoms[j], false, params) * sw[j]
            } else {
                T::zero()
            }
        })
        .collect();
    if b.iter().all(|&v| v == T::zero()) {
        return Ok(T::zero());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(L2_SEED);
    let mut v: Vec<T> = (0..n).map(|_| T::lit(rng.random_range(0.5..1.5))).collect();
    normalize(&mut v);
    let tol = T::lit(L2_TOLERANCE);
    let mut bv = vec![T::zero(); n];
    let mut btbv = vec![T::zero(); n];
    for _ in 0..L2_MAX_STEPS {
        mat_vec(&b, n, &v, &mut bv);
        mat_t_vec(&b, n, &bv, &mut btbv);
        let lambda: T = v.iter().zip(&btbv).map(|(&a, &c)| a * c).sum();
        if lambda <= T::zero() {
            // v fell into the kernel; restart from a fresh direction.
            v = (0..n).map(|_| T::lit(rng.random_range(0.5..1.5))).collect();
            normalize(&mut v);
            continue;
        }
        let resid = v
            .iter()
            .zip(&btbv)
            .map(|(&a, &c)| {
                let r = c - lambda * a;
                r * r
            })
            .sum::<T>()
            .sqrt();
        if resid <= tol * lambda {
            return Ok(lambda.sqrt());
        }
        v.copy_from_slice(&btbv);
        normalize(&mut v);
    }
    Err(Error::NoConvergence(L2_MAX_STEPS))
}

fn normalize<T: Scalar>(v: &mut [T]) {
    let norm = v.iter().map(|&c| c * c).sum::<T>().sqrt();
    if norm > T::zero() {
        v.iter_mut().for_each(|c| *c = *c / norm);
    }
}

fn mat_vec<T: Scalar>(b: &[T], n: usize, v: &[T], out: &mut [T]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o = b[i * n..(i + 1) * n].iter().zip(v).map(|(&a, &c)| a * c).sum();
    }
}

fn mat_t_vec<T: Scalar>(b: &[T], n: usize, v: &[T], out: &mut [T]) {
    out.iter_mut().for_each(|o| *o = T::zero());
    for i in 0..n {
        let vi = v[i];
        if vi == T::zero() {
            continue;
        }
        for (o, &a) in out.iter_mut().zip(&b[i * n..(i + 1) * n]) {
            *o = *o + a * vi;
        }
    }
}

/// Smooth bump of unit height supported on a parabolic cube.
///
/// In normalised coordinates `u` in `[-1, 1]` per axis, the one-dimensional
/// profile is 1 on `|u| <= 1/2`, 0 on `|u| >= 1`, and the degree `2r + 1`
/// smoothstep of `2(1 - |u|)` in between, so the bump is `C^r`. The bump is
/// the product of the per-axis profiles.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BumpFunction<T> {
    pub cube: ParabolicCube<T>,
    pub order: usize,
    /// Smoothstep polynomial coefficients in increasing degree.
    coeffs: Vec<T>,
    /// `c_k` bounding the `k`-th derivative of the profile in the unit
    /// coordinate `(x - center) / l`: spatial gradient `<= c_1 / l`, `k`-th
    /// time derivative `<= c_k / l^{2sk}`.
    pub constants: Vec<T>,
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl<T: Scalar> BumpFunction<T> {
    pub fn new(cube: ParabolicCube<T>, order: usize) -> Result<Self> {
        if order == 0 || order > 6 {
            return Err(invalid("order", "smoothness order must lie in 1..=6"));
        }
        let r = order;
        let mut coeffs = vec![0.0; 2 * r + 2];
        for j in 0..=r {
            let c = binomial(r + j, j) * binomial(2 * r + 1, r - j);
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            coeffs[r + 1 + j] += sign * c;
        }
        // Derivative maxima, sampled densely on [0, 1].
        let mut constants = Vec::with_capacity(r);
        let mut poly = coeffs.clone();
        for k in 1..=r {
            poly = (1..poly.len()).map(|i| poly[i] * i as f64).collect();
            let max = (0..=20_000)
                .map(|i| eval_poly(&poly, i as f64 / 20_000.0).abs())
                .fold(0.0, f64::max);
            constants.push(T::lit(max * 4f64.powi(k as i32)));
        }
        Ok(Self {
            cube,
            order,
            coeffs: coeffs.into_iter().map(T::lit).collect(),
            constants,
        })
    }

    fn beta(&self, u: T) -> T {
        let u = u.abs();
        if u <= T::lit(0.5) {
            T::one()
        } else if u >= T::one() {
            T::zero()
        } else {
            let v = T::lit(2.0) * (T::one() - u);
            self.coeffs.iter().rev().fold(T::zero(), |acc, &c| acc * v + c)
        }
    }

    pub fn eval(&self, p: &SpacetimePoint<T>) -> T {
        let half = T::lit(0.5);
        let c = self.cube.center();
        let mut val = self.beta((p.t - c.t) / (half * self.cube.time_length));
        for (&x, &cx) in p.x.iter().zip(&c.x) {
            if val == T::zero() {
                break;
            }
            val = val * self.beta((x - cx) / (half * self.cube.spatial_side));
        }
        val
    }

    /// Bound `c_1 / l(Q)` on the spatial gradient.
    pub fn gradient_bound(&self) -> T {
        self.constants[0] / self.cube.spatial_side
    }
}

fn eval_poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

/// `phi nu`: weights multiplied by the bump; atoms where it vanishes are dropped.
pub fn apply_bump<T: Scalar>(
    nu: &SignedDiscreteMeasure<T>,
    bump: &BumpFunction<T>,
) -> Result<SignedDiscreteMeasure<T>> {
    if let Some(n) = nu.dim() {
        if n != bump.cube.dim() {
            return Err(Error::DimensionMismatch {
                expected: bump.cube.dim(),
                found: n,
            });
        }
    }
    let mut atoms = Vec::new();
    let mut weights = Vec::new();
    for (a, &w) in nu.atoms().iter().zip(nu.weights()) {
        let phi = bump.eval(a);
        if phi != T::zero() && w != T::zero() {
            atoms.push(a.clone());
            weights.push(w * phi);
        }
    }
    SignedDiscreteMeasure::new(atoms, weights)
}

/// Sampled parabolic BMO estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BmoReport<T> {
    pub value: T,
    pub argmax_cube: usize,
    pub per_cube: Vec<T>,
    pub nodes_per_axis: usize,
}

/// Max over cubes of the mean absolute deviation from the mean, both taken
/// over a midpoint lattice of about `nodes_per_cube` points per cube.
pub fn bmo_parabolic_norm<T, F>(
    f: F,
    cubes: &[ParabolicCube<T>],
    nodes_per_cube: usize,
) -> Result<BmoReport<T>>
where
    T: Scalar,
    F: Fn(&SpacetimePoint<T>) -> Result<T> + Sync,
{
    if cubes.is_empty() {
        return Err(Error::Empty("cube family"));
    }
    if nodes_per_cube == 0 {
        return Err(invalid("nodes_per_cube", "need at least one node"));
    }
    let dims = cubes[0].dim() + 1;
    let per_axis = ((nodes_per_cube as f64).powf(1.0 / dims as f64).round() as usize).max(1);
    let total = per_axis.pow(dims as u32);
    let per_cube = cubes
        .par_iter()
        .map(|q| {
            let (lo, hi) = q.bounds();
            let mut vals = Vec::with_capacity(total);
            for idx in 0..total {
                let mut rem = idx;
                let mut coords = vec![T::zero(); dims];
                for a in (0..dims).rev() {
                    let i = rem % per_axis;
                    rem /= per_axis;
                    let frac = (T::from_usize_lossy(i) + T::lit(0.5)) / T::from_usize_lossy(per_axis);
                    coords[a] = lo[a] + frac * (hi[a] - lo[a]);
                }
                vals.push(f(&SpacetimePoint::from_coords(&coords))?);
            }
            let count = T::from_usize_lossy(total);
            let mean = vals.iter().copied().sum::<T>() / count;
            Ok(vals.iter().map(|&v| (v - mean).abs()).sum::<T>() / count)
        })
        .collect::<Result<Vec<T>>>()?;
    let mut argmax = 0;
    for (i, &v) in per_cube.iter().enumerate() {
        if v > per_cube[argmax] {
            argmax = i;
        }
    }
    Ok(BmoReport {
        value: per_cube[argmax],
        argmax_cube: argmax,
        per_cube,
        nodes_per_axis: per_axis,
    })
}

/// `count` random parabolic cubes with side log-uniform in `side_range`,
/// placed inside the box `[lo, hi]` (coordinates `[x_1, .., x_N, t]`).
pub fn random_cube_family<T: Scalar>(
    lo: &[T],
    hi: &[T],
    count: usize,
    side_range: (T, T),
    params: &FracParams<T>,
    seed: u64,
) -> Result<Vec<ParabolicCube<T>>> {
    let n = params.n();
    if lo.len() != n + 1 || hi.len() != n + 1 {
        return Err(Error::DimensionMismatch {
            expected: n + 1,
            found: lo.len(),
        });
    }
    if lo.iter().zip(hi).any(|(&a, &b)| !(b > a)) {
        return Err(invalid("box", "box must be nondegenerate"));
    }
    let (smin, smax) = side_range;
    if !(smin > T::zero() && smax >= smin) {
        return Err(invalid("side_range", "need 0 < min <= max"));
    }
    // Largest side that fits: spatial extent and time extent^{1/2s}.
    let mut fit = (hi[n] - lo[n]).powf(T::one() / params.two_s());
    for a in 0..n {
        fit = fit.min(hi[a] - lo[a]);
    }
    let smax = smax.min(fit);
    let smin = smin.min(smax);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let u: f64 = rng.random();
            let side = (smin.ln() + T::lit(u) * (smax.ln() - smin.ln())).exp();
            let time_len = side.powf(params.two_s());
            let corner: Vec<T> = (0..n)
                .map(|a| lo[a] + T::lit(rng.random::<f64>()) * (hi[a] - lo[a] - side).max(T::zero()))
                .collect();
            let t0 = lo[n] + T::lit(rng.random::<f64>()) * (hi[n] - lo[n] - time_len).max(T::zero());
            ParabolicCube::new(corner, side, t0, params)
        })
        .collect()
}

/// Largest `|f(x, t) - f(x, u)| / |t - u|^alpha` over the pairs.
pub fn lip_norm_t<T, F>(f: F, alpha: T, pairs: &[(SpacetimePoint<T>, SpacetimePoint<T>)]) -> Result<T>
where
    T: Scalar,
    F: Fn(&SpacetimePoint<T>) -> Result<T> + Sync,
{
    if pairs.is_empty() {
        return Err(Error::Empty("pair list"));
    }
    if !(alpha > T::zero() && alpha < T::one()) {
        return Err(invalid("alpha", "must lie in (0, 1)"));
    }
    for (a, b) in pairs {
        if a.x != b.x {
            return Err(invalid("pairs", "both points of a pair must share x"));
        }
        if a.t == b.t {
            return Err(invalid("pairs", "pair times must differ"));
        }
    }
    pairs
        .par_iter()
        .map(|(a, b)| Ok((f(a)? - f(b)?).abs() / (a.t - b.t).abs().powf(alpha)))
        .try_reduce(|| T::zero(), |x, y| Ok(x.max(y)))
}

/// Configuration of the localization experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalizationConfig {
    pub trials: usize,
    pub atoms: usize,
    pub resolutions: Vec<usize>,
    pub exclusion: f64,
    /// Half-width of the margin around the unit cube covered by the grids.
    pub margin: f64,
    pub bump_order: usize,
    pub seed: u64,
}

impl Default for LocalizationConfig {
    fn default() -> Self {
        Self {
            trials: 20,
            atoms: 30,
            resolutions: vec![41, 81, 161],
            exclusion: 0.05,
            margin: 0.5,
            bump_order: 1,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalizationReport {
    /// `ratios[trial][grid]`: localized sup after normalising the plain sup to 1.
    pub ratios: Vec<Vec<f64>>,
    pub c_loc: f64,
    pub bump_constants: Vec<f64>,
}

/// Random signed measures on the unit cube, normalised so the `Half`
/// potential has grid sup 1, are multiplied by the standard bump on that
/// cube; the observed constant is the largest localized grid sup.
pub fn localization_experiment(config: &LocalizationConfig) -> Result<LocalizationReport> {
    if config.trials == 0 || config.atoms == 0 || config.resolutions.is_empty() {
        return Err(invalid("config", "need trials, atoms and at least one grid"));
    }
    let params = FracParams::new(0.5, 1)?;
    let cube = ParabolicCube::new(vec![0.0], 1.0, 0.0, &params)?;
    let bump = BumpFunction::new(cube, config.bump_order)?;
    let kind = KernelKind::Half;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut ratios = Vec::with_capacity(config.trials);
    let (a, b) = (-config.margin, 1.0 + config.margin);
    for _ in 0..config.trials {
        let atoms: Vec<SpacetimePoint<f64>> = (0..config.atoms)
            .map(|_| SpacetimePoint::planar(rng.random::<f64>(), rng.random::<f64>()))
            .collect();
        let weights: Vec<f64> = (0..config.atoms).map(|_| rng.random_range(-1.0..1.0)).collect();
        let nu = SignedDiscreteMeasure::new(atoms, weights)?;
        let mut row = Vec::with_capacity(config.resolutions.len());
        for &res in &config.resolutions {
            let grid = GridSpec::planar((a, b), (a, b), res, res, config.exclusion)?;
            let sup = sup_norm_on_grid(&nu, &kind, &PotentialVariant::Plain, &grid, &params)?;
            let normalized = nu.scaled(1.0 / sup.value);
            let local = apply_bump(&normalized, &bump)?;
            let local_sup = if local.is_empty() {
                0.0
            } else {
                sup_norm_on_grid(&local, &kind, &PotentialVariant::Plain, &grid, &params)?.value
            };
            row.push(local_sup);
        }
        ratios.push(row);
    }
    let c_loc = ratios.iter().flatten().copied().fold(0.0, f64::max);
    Ok(LocalizationReport {
        ratios,
        c_loc,
        bump_constants: bump.constants.clone(),
    })
}
