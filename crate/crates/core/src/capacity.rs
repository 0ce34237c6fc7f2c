//! Capacity lower bounds by linear programming, verified a posteriori, and
//! Hausdorff-content upper bounds.
//!
//! All lower bounds are over positive measures. `Half` and `Tilde` bound
//! the `s = 1/2` capacity with the constraint `P * mu <= 1` (and
//! additionally the dual constraint for `Tilde`) on the nodes of a grid.
//! `GrowthS` replaces admissibility by the growth condition
//! `mu(B_p(a, r)) <= r^{N + 2s - 1}`, which implies it up to constants.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::geometry::{
    dist_p_unchecked, hausdorff_content_upper, ContentReport, FracParams, SetDescriptor,
    SpacetimePoint,
};
use crate::kernels::KernelKind;
use crate::lp::{lp_maximize_rows, RowGenSettings, RowOracle};
use crate::measures::{
    cantor_generation, growth_constant, min_separation, segment_measure, CantorSpec,
    DiscreteMeasure,
};
use crate::potentials::{evaluate_on_grid, GridSpec, PotentialVariant};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CapacityMode {
    Half,
    Tilde,
    GrowthS,
}

impl CapacityMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "half" => Some(Self::Half),
            "tilde" => Some(Self::Tilde),
            "growth_s" | "growth" => Some(Self::GrowthS),
            _ => None,
        }
    }
}

/// Constraint family of the LP.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstraintSpec<T> {
    /// Potential constraints at the nodes of a grid (`half`, `tilde`).
    Grid(GridSpec<T>),
    /// Balls centred at atoms; `radii` quantiles of the pairwise distances
    /// at or above the minimal separation, or every distance when `None`.
    Balls { radii: Option<usize> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityOptions<T> {
    /// Verification grid for `half`/`tilde`; `None` skips verification.
    pub verify_grid: Option<GridSpec<T>>,
    pub verify_tol: T,
    pub content_depth: usize,
    pub rowgen: RowGenSettings,
    /// Radius of the exclusion shell sampled around every atom in addition
    /// to the grid; `None` uses [`default_exclusion`], zero disables it.
    pub shell_radius: Option<T>,
}

impl<T: Scalar> Default for CapacityOptions<T> {
    fn default() -> Self {
        Self {
            verify_grid: None,
            verify_tol: T::lit(1e-6),
            content_depth: 10,
            rowgen: RowGenSettings::default(),
            shell_radius: None,
        }
    }
}

/// Paired bounds with their discretization record.
///
/// Serializes to the keys `mode, s, N, set, lower, upper, rescale_factor,
/// atoms, constraints, grid, verify_grid, runtime_ms` in that order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacityEstimate<T> {
    pub mode: CapacityMode,
    pub s: T,
    #[serde(rename = "N")]
    pub n: usize,
    pub set: SetDescriptor<T>,
    pub lower: T,
    pub upper: T,
    pub rescale_factor: T,
    pub atoms: usize,
    pub constraints: usize,
    pub grid: ConstraintSpec<T>,
    pub verify_grid: Option<GridSpec<T>>,
    pub runtime_ms: u64,
    #[serde(skip)]
    pub details: CapacityDetails<T>,
}

/// Everything else a caller may want to inspect.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CapacityDetails<T> {
    pub lp_value: T,
    pub atom_points: Vec<SpacetimePoint<T>>,
    pub weights: Vec<T>,
    pub active_rows: usize,
    pub rowgen_rounds: usize,
    pub rowgen_complete: bool,
    /// Largest constraint ratio of the LP weights on the constraint family.
    pub constraint_max: T,
    pub verification: Option<VerifyReport<T>>,
    pub content: Option<ContentReport<T>>,
}

/// Atoms on which the LP places mass; `atoms` only matters for segments.
pub fn atoms_for<T: Scalar>(set: &SetDescriptor<T>, atoms: usize) -> Result<Vec<SpacetimePoint<T>>> {
    Ok(match set {
        SetDescriptor::Segment(seg) => segment_measure(seg, atoms)?.into_parts().0,
        SetDescriptor::UnionOfCubes { cubes } => cubes.iter().map(|c| c.center()).collect(),
        SetDescriptor::PointSet { points } => points.clone(),
    })
}

/// Default exclusion radius: twice the atom spacing (`L/m` on segments,
/// the cube side on unions of cubes, the minimal separation on point
/// sets, `0` for a single point).
pub fn default_exclusion<T: Scalar>(
    set: &SetDescriptor<T>,
    atoms: usize,
    params: &FracParams<T>,
) -> Result<T> {
    let two = T::lit(2.0);
    Ok(match set {
        SetDescriptor::Segment(seg) => two * seg.length / T::from_usize_lossy(atoms.max(1)),
        SetDescriptor::UnionOfCubes { cubes } => {
            two * cubes
                .iter()
                .map(|c| c.spatial_side)
                .fold(T::infinity(), T::min)
        }
        SetDescriptor::PointSet { points } => {
            let mu = DiscreteMeasure::new(points.clone(), vec![T::one(); points.len()])?;
            min_separation(&mu, params).map_or(T::zero(), |d| two * d)
        }
    })
}

/// Grid on the bounding box of `set` widened by its largest extent (or 1)
/// on every side.
pub fn default_grid<T: Scalar>(
    set: &SetDescriptor<T>,
    resolution: usize,
    exclusion: T,
) -> Result<GridSpec<T>> {
    let (lo, hi) = set.bounding_box().ok_or(Error::Empty("set descriptor"))?;
    let ext = lo
        .iter()
        .zip(&hi)
        .map(|(&a, &b)| b - a)
        .fold(T::zero(), T::max);
    let pad = if ext > T::zero() { ext } else { T::one() };
    GridSpec::new(
        lo.iter().map(|&v| v - pad).collect(),
        hi.iter().map(|&v| v + pad).collect(),
        vec![resolution; lo.len()],
        exclusion,
    )
}

/// The grid with `2(r - 1) + 1` nodes per axis (containing every original
/// node) and half the exclusion radius.
pub fn refined_grid<T: Scalar>(grid: &GridSpec<T>) -> GridSpec<T> {
    GridSpec {
        resolution: grid.resolution.iter().map(|&r| 2 * r - 1).collect(),
        exclusion: grid.exclusion * T::lit(0.5),
        ..grid.clone()
    }
}

struct PotentialRows<'a, T> {
    nodes: Vec<SpacetimePoint<T>>,
    /// For each row, whether it is a dual-kernel row.
    dual: Vec<bool>,
    atoms: &'a [SpacetimePoint<T>],
    kind: KernelKind<T>,
    params: FracParams<T>,
}

impl<T: Scalar> RowOracle<T> for PotentialRows<'_, T> {
    fn rows(&self) -> usize {
        self.nodes.len()
    }
    fn vars(&self) -> usize {
        self.atoms.len()
    }
    fn entry(&self, row: usize, var: usize) -> T {
        let p = &self.nodes[row];
        let a = &self.atoms[var];
        let mut x_sq = T::zero();
        for (&u, &v) in p.x.iter().zip(&a.x) {
            x_sq = x_sq + (u - v) * (u - v);
        }
        let dt = if self.dual[row] { a.t - p.t } else { p.t - a.t };
        self.kind.value(x_sq, dt, &self.params)
    }
    fn rhs(&self, _row: usize) -> T {
        T::one()
    }
}

struct BallRows<T> {
    /// Sorted atom indices inside each ball.
    members: Vec<Vec<usize>>,
    bound: Vec<T>,
    n: usize,
}

impl<T: Scalar> RowOracle<T> for BallRows<T> {
    fn rows(&self) -> usize {
        self.members.len()
    }
    fn vars(&self) -> usize {
        self.n
    }
    fn entry(&self, row: usize, var: usize) -> T {
        if self.members[row].binary_search(&var).is_ok() {
            T::one()
        } else {
            T::zero()
        }
    }
    fn rhs(&self, row: usize) -> T {
        self.bound[row]
    }
    fn activity(&self, row: usize, w: &[T]) -> T {
        self.members[row].iter().map(|&j| w[j]).sum()
    }
}

/// Ball family used by the growth LP: closed balls `B_p(a_i, r)` for every
/// atom and every radius in the chosen set, with bound `r^d`.
pub fn growth_ball_family<T: Scalar>(
    atoms: &[SpacetimePoint<T>],
    d: T,
    params: &FracParams<T>,
    radii: Option<usize>,
) -> Result<(Vec<Vec<usize>>, Vec<T>, Vec<T>)> {
    if atoms.is_empty() {
        return Err(Error::Empty("atoms"));
    }
    let mu = DiscreteMeasure::new(atoms.to_vec(), vec![T::one(); atoms.len()])?;
    let floor = min_separation(&mu, params).unwrap_or(T::one());
    let mut all: Vec<T> = (0..atoms.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            (i + 1..atoms.len()).map(move |j| dist_p_unchecked(&atoms[i], &atoms[j], params))
        })
        .filter(|&r| r >= floor)
        .collect();
    all.push(floor);
    all.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    all.dedup();
    let radii: Vec<T> = match radii {
        None => all,
        Some(0) => return Err(invalid("radii", "need at least one radius")),
        Some(q) => {
            let last = all.len() - 1;
            let mut r: Vec<T> = (0..q)
                .map(|i| if q == 1 { all[last] } else { all[i * last / (q - 1)] })
                .collect();
            r.dedup();
            r
        }
    };
    let mut members = Vec::new();
    let mut bound = Vec::new();
    for a in atoms {
        let dist: Vec<T> = atoms.iter().map(|b| dist_p_unchecked(a, b, params)).collect();
        let mut last_len = usize::MAX;
        for &r in &radii {
            let inside: Vec<usize> = (0..atoms.len()).filter(|&j| dist[j] <= r).collect();
            // Same member set at a larger radius is a weaker constraint.
            if inside.len() == last_len {
                continue;
            }
            last_len = inside.len();
            members.push(inside);
            bound.push(r.powf(d));
        }
    }
    Ok((members, bound, radii))
}

/// Verification outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport<T> {
    pub factor: T,
    /// Largest constrained quantity: potential sup, or growth constant.
    pub max_value: T,
    pub argmax: Option<SpacetimePoint<T>>,
    pub evaluated: usize,
}

/// Checks the weights on a finer grid and returns the factor `1/V` when the
/// largest constrained potential `V` exceeds `1 + tol`, else `1`.
pub fn verify_and_rescale<T: Scalar>(
    weights: &[T],
    atoms: &[SpacetimePoint<T>],
    kind: &KernelKind<T>,
    dual: bool,
    grid: &GridSpec<T>,
    tol: T,
    params: &FracParams<T>,
) -> Result<VerifyReport<T>> {
    let mu = DiscreteMeasure::new(atoms.to_vec(), weights.to_vec())?;
    let mut max_value = T::zero();
    let mut argmax = None;
    let mut evaluated = 0;
    let variants: &[PotentialVariant<T>] = if dual {
        &[PotentialVariant::Plain, PotentialVariant::Dual]
    } else {
        &[PotentialVariant::Plain]
    };
    for v in variants {
        let vals = evaluate_on_grid(&mu, kind, v, grid, params)?;
        evaluated = vals.nodes.len();
        for (&idx, &val) in vals.nodes.iter().zip(&vals.values) {
            if val.abs() > max_value {
                max_value = val.abs();
                argmax = Some(grid.node(idx));
            }
        }
    }
    Ok(VerifyReport {
        factor: rescale_factor(max_value, tol),
        max_value,
        argmax,
        evaluated,
    })
}

/// `1/V` if `V > 1 + tol`, else `1`.
pub fn rescale_factor<T: Scalar>(v: T, tol: T) -> T {
    if v > T::one() + tol {
        T::one() / v
    } else {
        T::one()
    }
}

/// Lower bound by LP plus the content upper bound.
pub fn capacity_lower<T: Scalar>(
    set: &SetDescriptor<T>,
    mode: CapacityMode,
    params: &FracParams<T>,
    atoms: usize,
    constraints: &ConstraintSpec<T>,
    options: &CapacityOptions<T>,
) -> Result<CapacityEstimate<T>> {
    let start = Instant::now();
    match set.dim() {
        Some(n) if n == params.n() => {}
        Some(n) => {
            return Err(Error::DimensionMismatch {
                expected: params.n(),
                found: n,
            })
        }
        None => return Err(Error::Empty("set descriptor")),
    }
    if matches!(mode, CapacityMode::Half | CapacityMode::Tilde) && !params.is_half() {
        return Err(invalid("s", "half and tilde modes need s = 1/2"));
    }
    if atoms == 0 && matches!(set, SetDescriptor::Segment(_)) {
        return Err(invalid("atoms", "need at least one atom on a segment"));
    }
    let points = atoms_for(set, atoms)?;
    let d = params.critical_dimension();
    let objective = vec![T::one(); points.len()];

    let (sol, constraint_count, verification, verify_grid) = match (mode, constraints) {
        (CapacityMode::Half | CapacityMode::Tilde, ConstraintSpec::Grid(grid)) => {
            if grid.dim() != params.n() {
                return Err(Error::DimensionMismatch {
                    expected: params.n(),
                    found: grid.dim(),
                });
            }
            if let Some(vg) = &options.verify_grid {
                let strictly_smaller =
                    vg.exclusion < grid.exclusion || (grid.exclusion == T::zero() && vg.exclusion == T::zero());
                let denser = vg
                    .spacing()
                    .iter()
                    .zip(grid.spacing())
                    .all(|(&a, b)| a < b);
                if !(strictly_smaller && denser && vg.lo.len() == grid.lo.len()) {
                    return Err(invalid(
                        "verify_grid",
                        "verification grid must be strictly finer with a smaller exclusion radius",
                    ));
                }
            }
            let dual_rows = mode == CapacityMode::Tilde;
            let shell = match options.shell_radius {
                Some(r) => r,
                None => default_exclusion(set, atoms, params)?,
            };
            let oracle = potential_rows(&points, grid, shell, dual_rows, params)?;
            let count = oracle.rows();
            if count == 0 {
                return Err(Error::Empty("constraint rows (every node excluded or inactive)"));
            }
            let sol = lp_maximize_rows(&objective, &oracle, &options.rowgen)?;
            let verification = match &options.verify_grid {
                Some(vg) => Some(verify_and_rescale(
                    &sol.solution.weights,
                    &points,
                    &KernelKind::Half,
                    dual_rows,
                    vg,
                    options.verify_tol,
                    params,
                )?),
                None => None,
            };
            (sol, count, verification, options.verify_grid.clone())
        }
        (CapacityMode::GrowthS, ConstraintSpec::Balls { radii }) => {
            let (members, bound, _) = growth_ball_family(&points, d, params, *radii)?;
            let oracle = BallRows {
                members,
                bound,
                n: points.len(),
            };
            let count = oracle.rows();
            let sol = lp_maximize_rows(&objective, &oracle, &options.rowgen)?;
            // Exact growth constant over all radii is a stronger check.
            let mu = DiscreteMeasure::new(points.clone(), sol.solution.weights.clone())?;
            let verification = if mu.total_mass() > T::zero() {
                let g = growth_constant(&mu, d, params, None)?;
                Some(VerifyReport {
                    factor: rescale_factor(g.constant, options.verify_tol),
                    max_value: g.constant,
                    argmax: Some(points[g.argmax_atom].clone()),
                    evaluated: g.radii_examined,
                })
            } else {
                None
            };
            (sol, count, verification, None)
        }
        _ => {
            return Err(invalid(
                "constraints",
                "half/tilde need a grid, growth_s needs a ball family",
            ))
        }
    };
    let factor = verification.as_ref().map_or(T::one(), |v| v.factor);
    let content = hausdorff_content_upper(set, d, params, options.content_depth)?;
    let lp_value = sol.solution.value;
    Ok(CapacityEstimate {
        mode,
        s: params.s(),
        n: params.n(),
        set: set.clone(),
        lower: (lp_value * factor).max(T::zero()),
        upper: content.value,
        rescale_factor: factor,
        atoms: points.len(),
        constraints: constraint_count,
        grid: constraints.clone(),
        verify_grid,
        runtime_ms: start.elapsed().as_millis() as u64,
        details: CapacityDetails {
            lp_value,
            atom_points: points,
            weights: sol.solution.weights,
            active_rows: sol.active_rows.len(),
            rowgen_rounds: sol.rounds,
            rowgen_complete: sol.complete,
            constraint_max: sol.max_ratio,
            verification,
            content: Some(content),
        },
    })
}

/// Non-excluded grid nodes plus the exclusion shell of every atom.
///
/// Shell probes sit at parabolic distance `shell` from an atom: one in its
/// future (one in its past for the dual rows) and two per spatial axis at
/// equal time. Between atoms spaced below the shell radius the potential
/// then varies slowly at the probe height, which keeps the LP from hiding
/// mass in the gaps of the grid. Rows with no atom strictly in their past
/// (future, for dual rows) are dropped since they vanish identically.
fn potential_rows<'a, T: Scalar>(
    atoms: &'a [SpacetimePoint<T>],
    grid: &GridSpec<T>,
    shell: T,
    dual: bool,
    params: &FracParams<T>,
) -> Result<PotentialRows<'a, T>> {
    if !(shell >= T::zero()) {
        return Err(invalid("shell_radius", "must be nonnegative"));
    }
    let outside = |p: &SpacetimePoint<T>, rho: T| {
        atoms.iter().all(|a| dist_p_unchecked(p, a, params) > rho)
    };
    let mut candidates: Vec<(SpacetimePoint<T>, bool)> = (0..grid.node_count())
        .into_par_iter()
        .map(|idx| grid.node(idx))
        .filter(|p| outside(p, grid.exclusion))
        .flat_map_iter(|p| {
            let mut v = vec![(p.clone(), false)];
            if dual {
                v.push((p, true));
            }
            v
        })
        .collect();
    if shell > T::zero() {
        let tau = shell.powf(params.two_s());
        // Slightly inside the shell so the probe's own atom is not within
        // `shell` of any neighbour by rounding alone.
        let keep = shell * T::lit(1.0 - 1e-9);
        let probes: Vec<(SpacetimePoint<T>, bool)> = atoms
            .par_iter()
            .flat_map_iter(|a| {
                let mut v = vec![(SpacetimePoint::new(a.x.clone(), a.t + tau), false)];
                if dual {
                    v.push((SpacetimePoint::new(a.x.clone(), a.t - tau), true));
                }
                for i in 0..a.x.len() {
                    for sign in [T::one(), -T::one()] {
                        let mut x = a.x.clone();
                        x[i] = x[i] + sign * shell;
                        let p = SpacetimePoint::new(x, a.t);
                        v.push((p.clone(), false));
                        if dual {
                            v.push((p, true));
                        }
                    }
                }
                v
            })
            .filter(|(p, _)| outside(p, keep))
            .collect();
        candidates.extend(probes);
    }
    let (nodes, flags): (Vec<_>, Vec<_>) = candidates
        .into_par_iter()
        .filter(|(p, is_dual)| {
            atoms
                .iter()
                .any(|a| if *is_dual { a.t > p.t } else { a.t < p.t })
        })
        .unzip();
    Ok(PotentialRows {
        nodes,
        dual: flags,
        atoms,
        kind: KernelKind::Half,
        params: *params,
    })
}

/// `T(chi_{Q^k \ Q^{k+m}} mu)(z)` for the natural Cantor measure, with the
/// `Half` kernel, at the upper corner `z = (0, l_k)` of the generation-k
/// cube `Q^k = [0, l_k]^{N+1}`; `Q^{k+m}` is the generation-(k+m) cube
/// containing `z`. Every contributing atom lies strictly in the past of `z`.
pub fn cantor_corner_sum<T: Scalar>(spec: &CantorSpec, m: usize) -> Result<T> {
    if m == 0 {
        return Err(invalid("m", "need m >= 1"));
    }
    let k = spec.k;
    let total = CantorSpec {
        k: k + m,
        ..*spec
    };
    if total.cube_count().filter(|&c| c <= spec.cap).is_none() {
        return Err(Error::TooLarge(format!("generation {} exceeds the cube cap", k + m)));
    }
    // Generation m inside the unit cube, scaled into Q^k.
    let inner = CantorSpec { k: m, ..*spec };
    let (cubes, _) = cantor_generation::<T>(&inner)?;
    let lk = spec.side::<T>();
    let weight = total.cube_mass::<T>();
    let n = spec.n;
    let params = spec.params::<T>();
    let z = SpacetimePoint::new(vec![T::zero(); n], lk);
    let kind = KernelKind::Half;
    let mut acc = T::zero();
    for c in &cubes {
        // The cube containing z: spatial corner at 0 and time interval ending at 1.
        let is_z_cube = c.spatial_corner.iter().all(|&v| v == T::zero())
            && c.time_start + c.time_length == T::one();
        if is_z_cube {
            continue;
        }
        let centre = c.center();
        let y = SpacetimePoint::new(centre.x.iter().map(|&v| v * lk).collect(), centre.t * lk);
        let x_sq = z.x.iter().zip(&y.x).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>();
        acc = acc + weight * kind.value(x_sq, z.t - y.t, &params);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Orientation;

    fn half() -> FracParams<f64> {
        FracParams::new(0.5, 1).unwrap()
    }

    #[test]
    fn single_point_lower_is_distance() {
        let set = SetDescriptor::points(vec![SpacetimePoint::planar(0.0, 0.0)]).unwrap();
        // Nearest node straight above at distance 0.25.
        let grid = GridSpec::planar((-1.0, 1.0), (-1.0, 1.0), 9, 9, 0.0).unwrap();
        let est = capacity_lower(
            &set,
            CapacityMode::Half,
            &half(),
            1,
            &ConstraintSpec::Grid(grid),
            &CapacityOptions::default(),
        )
        .unwrap();
        assert!((est.lower - 0.25).abs() < 1e-15, "{}", est.lower);
        assert_eq!(est.rescale_factor, 1.0);
    }

    #[test]
    fn rescale_factor_rule() {
        assert_eq!(rescale_factor(0.98, 1e-6), 1.0);
        assert_eq!(rescale_factor(2.0, 1e-6), 0.5);
        assert_eq!(rescale_factor(1.0 + 5e-7, 1e-6), 1.0);
    }

    #[test]
    fn tilde_never_exceeds_half() {
        let set = SetDescriptor::segment(Orientation::Horizontal, 1.0, SpacetimePoint::planar(0.0, 0.0))
            .unwrap();
        let grid = GridSpec::planar((-1.0, 2.0), (-1.0, 1.0), 31, 31, 0.05).unwrap();
        let opts = CapacityOptions::default();
        let spec = ConstraintSpec::Grid(grid);
        let h = capacity_lower(&set, CapacityMode::Half, &half(), 20, &spec, &opts).unwrap();
        let t = capacity_lower(&set, CapacityMode::Tilde, &half(), 20, &spec, &opts).unwrap();
        assert!(t.lower <= h.lower, "{} > {}", t.lower, h.lower);
        assert!(h.lower > 0.0);
    }

    #[test]
    fn mode_checks() {
        let set = SetDescriptor::points(vec![SpacetimePoint::planar(0.0, 0.0)]).unwrap();
        let p = FracParams::new(0.75, 1).unwrap();
        let grid = GridSpec::planar((-1.0, 1.0), (-1.0, 1.0), 9, 9, 0.0).unwrap();
        assert!(capacity_lower(
            &set,
            CapacityMode::Half,
            &p,
            1,
            &ConstraintSpec::Grid(grid.clone()),
            &CapacityOptions::default()
        )
        .is_err());
        let coarse = CapacityOptions {
            verify_grid: Some(GridSpec::planar((-1.0, 1.0), (-1.0, 1.0), 5, 5, 0.0).unwrap()),
            ..CapacityOptions::default()
        };
        let set2 = SetDescriptor::points(vec![
            SpacetimePoint::planar(0.0, 0.0),
            SpacetimePoint::planar(0.5, 0.0),
        ])
        .unwrap();
        let g2 = GridSpec::planar((-1.0, 1.0), (-1.0, 1.0), 9, 9, 0.1).unwrap();
        assert!(capacity_lower(&set2, CapacityMode::Half, &half(), 1, &ConstraintSpec::Grid(g2), &coarse).is_err());
    }

    #[test]
    fn corner_sum_positive_and_growing() {
        let spec = CantorSpec::new(1, 0).unwrap();
        let v1: f64 = cantor_corner_sum(&spec, 1).unwrap();
        let v2: f64 = cantor_corner_sum(&spec, 2).unwrap();
        let v8: f64 = cantor_corner_sum(&spec, 8).unwrap();
        assert!(v1 > 0.0);
        assert!(v8 / v2 >= 2.5, "{v8} / {v2}");
        assert!(cantor_corner_sum::<f64>(&spec, 0).is_err());
        let spec1 = CantorSpec::new(1, 1).unwrap();
        let w4: f64 = cantor_corner_sum(&spec1, 4).unwrap();
        let v4: f64 = cantor_corner_sum(&spec, 4).unwrap();
        assert!((w4 / v4 - 1.0).abs() < 0.3);
    }

    #[test]
    fn estimate_json_key_order() {
        let set = SetDescriptor::points(vec![SpacetimePoint::planar(0.0, 0.0)]).unwrap();
        let grid = GridSpec::planar((-1.0, 1.0), (-1.0, 1.0), 9, 9, 0.0).unwrap();
        let est = capacity_lower(
            &set,
            CapacityMode::Half,
            &half(),
            1,
            &ConstraintSpec::Grid(grid),
            &CapacityOptions::default(),
        )
        .unwrap();
        let json = serde_json::to_string(&est).unwrap();
        let keys = [
            "\"mode\"", "\"s\"", "\"N\"", "\"set\"", "\"lower\"", "\"upper\"",
            "\"rescale_factor\"", "\"atoms\"", "\"constraints\"", "\"grid\"",
            "\"verify_grid\"", "\"runtime_ms\"",
        ];
        let mut pos = 0;
        for k in keys {
            let at = json[pos..].find(k).unwrap_or_else(|| panic!("missing {k} in {json}"));
            pos += at;
        }
    }
}
