//! s-parabolic geometry: points, the parabolic metric, cubes, dilations and
//! hierarchical Hausdorff-content covers.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

/// Fractional order `s` together with the spatial dimension `N`.
///
/// `s = 1` is admitted as the classical heat limit so the Gaussian kernel
/// can be reached through the same code paths; everything else expects
/// `0 < s < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FracParams<T> {
    s: T,
    n: usize,
}

impl<T: Scalar> FracParams<T> {
    pub fn new(s: T, n: usize) -> Result<Self> {
        if !(s > T::zero() && s <= T::one()) {
            return Err(invalid("s", format!("must lie in (0, 1], got {s}")));
        }
        if n == 0 {
            return Err(invalid("N", "spatial dimension must be at least 1"));
        }
        Ok(Self { s, n })
    }

    #[inline]
    pub fn s(&self) -> T {
        self.s
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// `2s`, the time exponent of a parabolic cube side.
    #[inline]
    pub fn two_s(&self) -> T {
        self.s + self.s
    }

    /// Critical dimension `N + 2s - 1`.
    pub fn critical_dimension(&self) -> T {
        T::from_usize_lossy(self.n) + self.two_s() - T::one()
    }

    pub fn is_half(&self) -> bool {
        (self.s - T::lit(0.5)).abs() <= T::epsilon() * T::lit(4.0)
    }
}

/// A space-time point `(x, t)` with `x` in `R^N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpacetimePoint<T> {
    pub x: Vec<T>,
    pub t: T,
}

impl<T: Scalar> SpacetimePoint<T> {
    pub fn new(x: Vec<T>, t: T) -> Self {
        Self { x, t }
    }

    /// Point in `R^{1+1}`.
    pub fn planar(x: T, t: T) -> Self {
        Self { x: vec![x], t }
    }

    pub fn origin(n: usize) -> Self {
        Self {
            x: vec![T::zero(); n],
            t: T::zero(),
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// Euclidean norm of the spatial part.
    pub fn spatial_norm(&self) -> T {
        self.x.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    /// Componentwise difference `self - other`.
    pub fn sub(&self, other: &Self) -> Self {
        Self {
            x: self.x.iter().zip(&other.x).map(|(&a, &b)| a - b).collect(),
            t: self.t - other.t,
        }
    }

    /// Componentwise sum `self + other`.
    pub fn add(&self, other: &Self) -> Self {
        Self {
            x: self.x.iter().zip(&other.x).map(|(&a, &b)| a + b).collect(),
            t: self.t + other.t,
        }
    }

    /// The reflected point `-self`.
    pub fn neg(&self) -> Self {
        Self {
            x: self.x.iter().map(|&v| -v).collect(),
            t: -self.t,
        }
    }

    /// Coordinates as `[x_1, .., x_N, t]`.
    pub fn coords(&self) -> Vec<T> {
        let mut c = self.x.clone();
        c.push(self.t);
        c
    }

    pub fn from_coords(c: &[T]) -> Self {
        let (t, x) = c.split_last().expect("at least one coordinate");
        Self { x: x.to_vec(), t: *t }
    }
}

pub(crate) fn check_dim<T: Scalar>(p: &SpacetimePoint<T>, n: usize) -> Result<()> {
    if p.dim() != n {
        Err(Error::DimensionMismatch {
            expected: n,
            found: p.dim(),
        })
    } else {
        Ok(())
    }
}

/// Parabolic norm `|p|_p = max(|x|, |t|^{1/2s})`.
#[inline]
pub fn parabolic_norm<T: Scalar>(p: &SpacetimePoint<T>, params: &FracParams<T>) -> T {
    let time = p.t.abs().powf(T::one() / params.two_s());
    p.spatial_norm().max(time)
}

/// Parabolic distance without dimension checks; callers guarantee matching `N`.
#[inline]
pub(crate) fn dist_p_unchecked<T: Scalar>(
    a: &SpacetimePoint<T>,
    b: &SpacetimePoint<T>,
    params: &FracParams<T>,
) -> T {
    let mut sq = T::zero();
    for (&u, &v) in a.x.iter().zip(&b.x) {
        let d = u - v;
        sq = sq + d * d;
    }
    let time = (a.t - b.t).abs().powf(T::one() / params.two_s());
    sq.sqrt().max(time)
}

/// `dist_p(a, b) = max(|x - y|, |t - u|^{1/2s})`.
pub fn dist_p<T: Scalar>(
    a: &SpacetimePoint<T>,
    b: &SpacetimePoint<T>,
    params: &FracParams<T>,
) -> Result<T> {
    check_dim(a, params.n())?;
    check_dim(b, params.n())?;
    Ok(dist_p_unchecked(a, b, params))
}

/// Parabolic dilation `(x, t) -> (lambda x, lambda^{2s} t)`.
pub fn dilate<T: Scalar>(
    p: &SpacetimePoint<T>,
    lambda: T,
    params: &FracParams<T>,
) -> Result<SpacetimePoint<T>> {
    if !(lambda > T::zero()) || !lambda.is_finite() {
        return Err(invalid("lambda", format!("dilation factor must be positive, got {lambda}")));
    }
    check_dim(p, params.n())?;
    Ok(SpacetimePoint {
        x: p.x.iter().map(|&v| lambda * v).collect(),
        t: lambda.powf(params.two_s()) * p.t,
    })
}

/// `I_1 x .. x I_N x I_{N+1}` with spatial sides `l` and time side `l^{2s}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParabolicCube<T> {
    pub spatial_corner: Vec<T>,
    pub spatial_side: T,
    pub time_start: T,
    pub time_length: T,
}

impl<T: Scalar> ParabolicCube<T> {
    pub fn new(
        spatial_corner: Vec<T>,
        spatial_side: T,
        time_start: T,
        params: &FracParams<T>,
    ) -> Result<Self> {
        if spatial_corner.len() != params.n() {
            return Err(Error::DimensionMismatch {
                expected: params.n(),
                found: spatial_corner.len(),
            });
        }
        if !(spatial_side > T::zero()) {
            return Err(invalid("spatial_side", "cube side must be positive"));
        }
        Ok(Self {
            spatial_corner,
            spatial_side,
            time_start,
            time_length: spatial_side.powf(params.two_s()),
        })
    }

    /// Rebuilds a cube from stored parts, checking the `l^{2s}` time side.
    pub fn from_parts(
        spatial_corner: Vec<T>,
        spatial_side: T,
        time_start: T,
        time_length: T,
        params: &FracParams<T>,
    ) -> Result<Self> {
        let cube = Self::new(spatial_corner, spatial_side, time_start, params)?;
        let rel = (time_length - cube.time_length).abs() / cube.time_length;
        if rel > T::lit(1e-12).max(T::epsilon() * T::lit(8.0)) {
            return Err(invalid(
                "time_length",
                format!("expected side^2s = {}, got {time_length}", cube.time_length),
            ));
        }
        Ok(Self { time_length, ..cube })
    }

    pub fn dim(&self) -> usize {
        self.spatial_corner.len()
    }

    pub fn center(&self) -> SpacetimePoint<T> {
        let half = T::lit(0.5);
        SpacetimePoint {
            x: self
                .spatial_corner
                .iter()
                .map(|&c| c + half * self.spatial_side)
                .collect(),
            t: self.time_start + half * self.time_length,
        }
    }

    /// Closed-cube membership.
    pub fn contains(&self, p: &SpacetimePoint<T>) -> bool {
        p.t >= self.time_start
            && p.t <= self.time_start + self.time_length
            && p
                .x
                .iter()
                .zip(&self.spatial_corner)
                .all(|(&v, &c)| v >= c && v <= c + self.spatial_side)
    }

    pub fn contains_cube(&self, other: &Self) -> bool {
        other.time_start >= self.time_start
            && other.time_start + other.time_length <= self.time_start + self.time_length
            && other
                .spatial_corner
                .iter()
                .zip(&self.spatial_corner)
                .all(|(&o, &c)| o >= c && o + other.spatial_side <= c + self.spatial_side)
    }

    /// Lower and upper coordinate bounds as `[x_1, .., x_N, t]` vectors.
    pub fn bounds(&self) -> (Vec<T>, Vec<T>) {
        let mut lo = self.spatial_corner.clone();
        lo.push(self.time_start);
        let mut hi: Vec<T> = self
            .spatial_corner
            .iter()
            .map(|&c| c + self.spatial_side)
            .collect();
        hi.push(self.time_start + self.time_length);
        (lo, hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    /// Along the first spatial axis at fixed time.
    Horizontal,
    /// Along the time axis at a fixed spatial point.
    Vertical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment<T> {
    pub orientation: Orientation,
    pub length: T,
    pub anchor: SpacetimePoint<T>,
}

impl<T: Scalar> Segment<T> {
    pub fn new(orientation: Orientation, length: T, anchor: SpacetimePoint<T>) -> Result<Self> {
        if !(length > T::zero()) {
            return Err(invalid("length", format!("segment length must be positive, got {length}")));
        }
        Ok(Self {
            orientation,
            length,
            anchor,
        })
    }

    /// Point at arc-length parameter `tau` in `[0, length]`.
    pub fn point_at(&self, tau: T) -> SpacetimePoint<T> {
        let mut p = self.anchor.clone();
        match self.orientation {
            Orientation::Horizontal => p.x[0] = p.x[0] + tau,
            Orientation::Vertical => p.t = p.t + tau,
        }
        p
    }
}

/// Structured description of a compact set in `R^{N+1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SetDescriptor<T> {
    Segment(Segment<T>),
    UnionOfCubes { cubes: Vec<ParabolicCube<T>> },
    PointSet { points: Vec<SpacetimePoint<T>> },
}

impl<T: Scalar> SetDescriptor<T> {
    pub fn segment(orientation: Orientation, length: T, anchor: SpacetimePoint<T>) -> Result<Self> {
        Ok(Self::Segment(Segment::new(orientation, length, anchor)?))
    }

    pub fn cubes(cubes: Vec<ParabolicCube<T>>) -> Result<Self> {
        if cubes.is_empty() {
            return Err(Error::Empty("cube list"));
        }
        Ok(Self::UnionOfCubes { cubes })
    }

    pub fn points(points: Vec<SpacetimePoint<T>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Empty("point set"));
        }
        Ok(Self::PointSet { points })
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            Self::Segment(s) => Some(s.anchor.dim()),
            Self::UnionOfCubes { cubes } => cubes.first().map(|c| c.dim()),
            Self::PointSet { points } => points.first().map(|p| p.dim()),
        }
    }

    fn is_empty(&self) -> bool {
        match self {
            Self::Segment(_) => false,
            Self::UnionOfCubes { cubes } => cubes.is_empty(),
            Self::PointSet { points } => points.is_empty(),
        }
    }

    /// Axis-aligned bounding box as `[x_1, .., x_N, t]` vectors.
    pub fn bounding_box(&self) -> Option<(Vec<T>, Vec<T>)> {
        let mut boxes: Vec<(Vec<T>, Vec<T>)> = match self {
            Self::Segment(seg) => {
                let a = seg.anchor.coords();
                let b = seg.point_at(seg.length).coords();
                vec![(a, b)]
            }
            Self::UnionOfCubes { cubes } => cubes.iter().map(|c| c.bounds()).collect(),
            Self::PointSet { points } => points
                .iter()
                .map(|p| (p.coords(), p.coords()))
                .collect(),
        };
        let (mut lo, mut hi) = boxes.pop()?;
        for (l, h) in boxes {
            for i in 0..lo.len() {
                lo[i] = lo[i].min(l[i]);
                hi[i] = hi[i].max(h[i]);
            }
        }
        Some((lo, hi))
    }
}

/// Which diameter gauge the content sum uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContentMetric {
    /// Parabolic side length `l(Q)`.
    Parabolic,
    /// Euclidean diameter of the lattice cell.
    Euclidean,
}

/// Result of a hierarchical content cover.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContentReport<T> {
    /// Minimum over generations `0..=depth` of the level sums.
    pub value: T,
    pub level_sums: Vec<T>,
    pub best_level: usize,
    pub metric: ContentMetric,
    /// Ratio `(ceil(2^{2s}) / 2^{2s})^depth` between the nominal parabolic
    /// time side of a deepest cell and its actual time side.
    pub time_distortion: T,
    pub time_slabs: usize,
}

#[derive(Debug, Clone)]
struct Cell<T> {
    lo: Vec<T>,
    side: T,
    time_len: T,
}

impl<T: Scalar> Cell<T> {
    fn hi(&self, axis: usize, n: usize) -> T {
        if axis < n {
            self.lo[axis] + self.side
        } else {
            self.lo[axis] + self.time_len
        }
    }
}

struct Lattice<T> {
    n: usize,
    root_hi: Vec<T>,
}

impl<T: Scalar> Lattice<T> {
    /// Half-open membership `[lo, hi)`, closed on the faces of the root.
    fn member(&self, cell: &Cell<T>, axis: usize, v: T) -> bool {
        let lo = cell.lo[axis];
        let hi = cell.hi(axis, self.n);
        if v < lo {
            return false;
        }
        v < hi || (v == hi && hi >= self.root_hi[axis])
    }

    fn closed_interval_meets(&self, cell: &Cell<T>, axis: usize, a: T, b: T) -> bool {
        let lo = cell.lo[axis];
        let hi = cell.hi(axis, self.n);
        let upper_ok = a < hi || (a == hi && hi >= self.root_hi[axis]);
        upper_ok && b >= lo
    }

    fn meets(&self, cell: &Cell<T>, set: &SetDescriptor<T>) -> bool {
        let n = self.n;
        match set {
            SetDescriptor::PointSet { points } => points.iter().any(|p| {
                (0..n).all(|i| self.member(cell, i, p.x[i])) && self.member(cell, n, p.t)
            }),
            SetDescriptor::Segment(seg) => {
                let a = &seg.anchor;
                match seg.orientation {
                    Orientation::Horizontal => {
                        self.member(cell, n, a.t)
                            && (1..n).all(|i| self.member(cell, i, a.x[i]))
                            && self.closed_interval_meets(cell, 0, a.x[0], a.x[0] + seg.length)
                    }
                    Orientation::Vertical => {
                        (0..n).all(|i| self.member(cell, i, a.x[i]))
                            && self.closed_interval_meets(cell, n, a.t, a.t + seg.length)
                    }
                }
            }
            // Closed cells whose interiors meet a cube's interior cover it.
            SetDescriptor::UnionOfCubes { cubes } => cubes.iter().any(|c| {
                let (lo, hi) = c.bounds();
                (0..=n).all(|i| lo[i] < cell.hi(i, n) && hi[i] > cell.lo[i])
            }),
        }
    }
}

/// Upper bound for the `d`-dimensional Hausdorff content of `set`.
///
/// The set is covered by a hierarchical lattice rooted at its bounding cube.
/// Children halve the spatial side and slice time into `ceil(2^{2s})` slabs,
/// which for `s = 1/2` is the dyadic lattice of `R^{N+1}`. At every
/// generation the cells meeting the set form a cover; the reported value is
/// the smallest cover sum seen down to `depth`.
pub fn hausdorff_content_upper<T: Scalar>(
    set: &SetDescriptor<T>,
    d: T,
    params: &FracParams<T>,
    depth: usize,
) -> Result<ContentReport<T>> {
    hausdorff_content_upper_with(set, d, params, depth, ContentMetric::Parabolic)
}

pub fn hausdorff_content_upper_with<T: Scalar>(
    set: &SetDescriptor<T>,
    d: T,
    params: &FracParams<T>,
    depth: usize,
    metric: ContentMetric,
) -> Result<ContentReport<T>> {
    if set.is_empty() {
        return Err(Error::Empty("set descriptor"));
    }
    if !(d > T::zero()) {
        return Err(invalid("d", "content dimension must be positive"));
    }
    let n = params.n();
    match set.dim() {
        Some(dim) if dim == n => {}
        Some(dim) => {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: dim,
            })
        }
        None => return Err(Error::Empty("set descriptor")),
    }
    let (lo, hi) = set.bounding_box().ok_or(Error::Empty("set descriptor"))?;
    let two_s = params.two_s();
    let mut side = T::zero();
    for i in 0..n {
        side = side.max(hi[i] - lo[i]);
    }
    side = side.max((hi[n] - lo[n]).powf(T::one() / two_s));
    if side == T::zero() {
        side = T::one();
    }
    let root = Cell {
        lo: lo.clone(),
        side,
        time_len: side.powf(two_s),
    };
    let mut root_hi: Vec<T> = (0..n).map(|i| lo[i] + side).collect();
    root_hi.push(lo[n] + root.time_len);
    let lattice = Lattice { n, root_hi };

    let slabs = T::lit(2.0)
        .powf(two_s)
        .ceil()
        .to_usize()
        .unwrap_or(2)
        .max(1);
    let gauge = |c: &Cell<T>| -> T {
        match metric {
            ContentMetric::Parabolic => c.side,
            ContentMetric::Euclidean => {
                (T::from_usize_lossy(n) * c.side * c.side + c.time_len * c.time_len).sqrt()
            }
        }
    };

    let mut level = vec![root];
    let mut sums = Vec::with_capacity(depth + 1);
    sums.push(level.iter().map(|c| gauge(c).powf(d)).sum::<T>());
    let half = T::lit(0.5);
    for _ in 0..depth {
        let mut next = Vec::with_capacity(level.len() * (1 << n) * slabs);
        for cell in &level {
            let child_side = cell.side * half;
            let child_time = cell.time_len / T::from_usize_lossy(slabs);
            for mask in 0..(1usize << n) {
                for slab in 0..slabs {
                    let mut clo = cell.lo.clone();
                    for (i, v) in clo.iter_mut().take(n).enumerate() {
                        if mask >> i & 1 == 1 {
                            *v = *v + child_side;
                        }
                    }
                    clo[n] = cell.lo[n] + T::from_usize_lossy(slab) * child_time;
                    let child = Cell {
                        lo: clo,
                        side: child_side,
                        time_len: child_time,
                    };
                    if lattice.meets(&child, set) {
                        next.push(child);
                    }
                }
            }
        }
        if next.is_empty() {
            break;
        }
        sums.push(next.iter().map(|c| gauge(c).powf(d)).sum::<T>());
        level = next;
    }
    let (best_level, value) = sums
        .iter()
        .copied()
        .enumerate()
        .fold((0, T::infinity()), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    let distortion_step = T::from_usize_lossy(slabs) / T::lit(2.0).powf(two_s);
    Ok(ContentReport {
        value,
        best_level,
        metric,
        time_distortion: distortion_step.powi(depth as i32),
        time_slabs: slabs,
        level_sums: sums,
    })
}
