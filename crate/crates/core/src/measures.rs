//! Discrete measures: corner Cantor sets, segment discretizations and
//! parabolic growth constants.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::geometry::{
    check_dim, dist_p_unchecked, FracParams, Orientation, ParabolicCube, Segment, SpacetimePoint,
};
use crate::scalar::Scalar;

/// Shared read access to atoms and weights.
pub trait Atoms<T: Scalar> {
    fn atoms(&self) -> &[SpacetimePoint<T>];
    fn weights(&self) -> &[T];

    fn len(&self) -> usize {
        self.atoms().len()
    }

    fn is_empty(&self) -> bool {
        self.atoms().is_empty()
    }

    /// Spatial dimension of the atoms, `None` for an empty measure.
    fn dim(&self) -> Option<usize> {
        self.atoms().first().map(|a| a.dim())
    }
}

fn validate_atoms<T: Scalar>(atoms: &[SpacetimePoint<T>], weights: &[T]) -> Result<()> {
    if atoms.len() != weights.len() {
        return Err(invalid("weights", "atom and weight counts differ"));
    }
    if let Some(first) = atoms.first() {
        let n = first.dim();
        if n == 0 {
            return Err(invalid("atoms", "spatial dimension must be at least 1"));
        }
        for a in atoms {
            check_dim(a, n)?;
            if a.x.iter().any(|v| !v.is_finite()) || !a.t.is_finite() {
                return Err(invalid("atoms", "atom coordinates must be finite"));
            }
        }
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(invalid("weights", "weights must be finite"));
    }
    Ok(())
}

/// Finite measure with nonnegative weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteMeasure<T> {
    atoms: Vec<SpacetimePoint<T>>,
    weights: Vec<T>,
}

/// Finite measure with real weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignedDiscreteMeasure<T> {
    atoms: Vec<SpacetimePoint<T>>,
    weights: Vec<T>,
}

impl<T: Scalar> Atoms<T> for DiscreteMeasure<T> {
    fn atoms(&self) -> &[SpacetimePoint<T>] {
        &self.atoms
    }
    fn weights(&self) -> &[T] {
        &self.weights
    }
}

impl<T: Scalar> Atoms<T> for SignedDiscreteMeasure<T> {
    fn atoms(&self) -> &[SpacetimePoint<T>] {
        &self.atoms
    }
    fn weights(&self) -> &[T] {
        &self.weights
    }
}

impl<T: Scalar> DiscreteMeasure<T> {
    pub fn new(atoms: Vec<SpacetimePoint<T>>, weights: Vec<T>) -> Result<Self> {
        validate_atoms(&atoms, &weights)?;
        if weights.iter().any(|&w| w < T::zero()) {
            return Err(invalid("weights", "a positive measure needs nonnegative weights"));
        }
        Ok(Self { atoms, weights })
    }

    pub fn empty() -> Self {
        Self {
            atoms: Vec::new(),
            weights: Vec::new(),
        }
    }

    pub fn total_mass(&self) -> T {
        self.weights.iter().copied().sum()
    }

    /// Same atoms, weights multiplied by `factor >= 0`.
    pub fn scaled(&self, factor: T) -> Result<Self> {
        if !(factor >= T::zero()) {
            return Err(invalid("factor", "scale factor must be nonnegative"));
        }
        Ok(Self {
            atoms: self.atoms.clone(),
            weights: self.weights.iter().map(|&w| w * factor).collect(),
        })
    }

    pub fn with_weights(&self, weights: Vec<T>) -> Result<Self> {
        Self::new(self.atoms.clone(), weights)
    }

    pub fn to_signed(&self) -> SignedDiscreteMeasure<T> {
        SignedDiscreteMeasure {
            atoms: self.atoms.clone(),
            weights: self.weights.clone(),
        }
    }

    pub fn into_parts(self) -> (Vec<SpacetimePoint<T>>, Vec<T>) {
        (self.atoms, self.weights)
    }

    pub fn to_text(&self) -> String {
        measure_to_text(&self.atoms, &self.weights)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let (atoms, weights) = measure_from_text(text)?;
        if let Some(i) = weights.iter().position(|&w| w < T::zero()) {
            return Err(invalid(
                "weights",
                format!("atom {} has a negative weight in a positive measure", i + 1),
            ));
        }
        Self::new(atoms, weights)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

impl<T: Scalar> SignedDiscreteMeasure<T> {
    pub fn new(atoms: Vec<SpacetimePoint<T>>, weights: Vec<T>) -> Result<Self> {
        validate_atoms(&atoms, &weights)?;
        Ok(Self { atoms, weights })
    }

    pub fn total_variation(&self) -> T {
        self.weights.iter().map(|w| w.abs()).sum()
    }

    pub fn total(&self) -> T {
        self.weights.iter().copied().sum()
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self {
            atoms: self.atoms.clone(),
            weights: self.weights.iter().map(|&w| w * factor).collect(),
        }
    }

    pub fn into_parts(self) -> (Vec<SpacetimePoint<T>>, Vec<T>) {
        (self.atoms, self.weights)
    }

    pub fn to_text(&self) -> String {
        measure_to_text(&self.atoms, &self.weights)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let (atoms, weights) = measure_from_text(text)?;
        Self::new(atoms, weights)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

fn measure_to_text<T: Scalar>(atoms: &[SpacetimePoint<T>], weights: &[T]) -> String {
    let mut out = String::new();
    for (a, w) in atoms.iter().zip(weights) {
        for v in &a.x {
            let _ = write!(out, "{v:.16e} ");
        }
        let _ = writeln!(out, "{:.16e} {w:.16e}", a.t);
    }
    out
}

fn measure_from_text<T: Scalar>(text: &str) -> Result<(Vec<SpacetimePoint<T>>, Vec<T>)> {
    let mut atoms = Vec::new();
    let mut weights = Vec::new();
    let mut width = None;
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<T>().map_err(|_| Error::Parse {
                    line: idx + 1,
                    reason: format!("not a number: {tok}"),
                })
            })
            .collect::<Result<Vec<T>>>()?;
        if vals.len() < 3 {
            return Err(Error::Parse {
                line: idx + 1,
                reason: "expected `x_1 .. x_N t weight`".into(),
            });
        }
        match width {
            None => width = Some(vals.len()),
            Some(w) if w != vals.len() => {
                return Err(Error::Parse {
                    line: idx + 1,
                    reason: format!("expected {w} columns, found {}", vals.len()),
                })
            }
            _ => {}
        }
        let n = vals.len() - 2;
        atoms.push(SpacetimePoint::new(vals[..n].to_vec(), vals[n]));
        weights.push(vals[n + 1]);
    }
    Ok((atoms, weights))
}

/// Default cap on the number of generation-k Cantor cubes.
pub const DEFAULT_CUBE_CAP: usize = 1 << 20;

/// Where each Cantor cube places its atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AtomPlacement {
    #[default]
    Center,
    /// Lower corner in space and time.
    Corner,
}

/// Generation `k` of the corner Cantor set in `R^{N+1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CantorSpec {
    pub n: usize,
    pub k: usize,
    pub cap: usize,
    pub placement: AtomPlacement,
}

impl CantorSpec {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("N", "spatial dimension must be at least 1"));
        }
        Ok(Self {
            n,
            k,
            cap: DEFAULT_CUBE_CAP,
            placement: AtomPlacement::Center,
        })
    }

    /// `2^{k(N+1)}`, or `None` on overflow.
    pub fn cube_count(&self) -> Option<usize> {
        let bits = self.k.checked_mul(self.n + 1)?;
        if bits >= usize::BITS as usize {
            None
        } else {
            Some(1usize << bits)
        }
    }

    /// Side length of a generation-k cube, `2^{-k(N+1)/N}`.
    pub fn side<T: Scalar>(&self) -> T {
        let num = self.k * (self.n + 1);
        if num % self.n == 0 {
            T::lit(2.0).powi(-((num / self.n) as i32))
        } else {
            T::lit(2.0).powf(-T::from_usize_lossy(num) / T::from_usize_lossy(self.n))
        }
    }

    /// Mass of a generation-k cube, `2^{-k(N+1)}`.
    pub fn cube_mass<T: Scalar>(&self) -> T {
        T::lit(2.0).powi(-((self.k * (self.n + 1)) as i32))
    }

    /// Ambient parameters (`s = 1/2`) for which the cubes are parabolic.
    pub fn params<T: Scalar>(&self) -> FracParams<T> {
        FracParams::new(T::lit(0.5), self.n).expect("s = 1/2 is valid")
    }
}

/// Cubes of generation `k` and the natural measure on them.
///
/// Each cube of generation `j` has `2^{N+1}` children of side
/// `2^{-(N+1)/N}` times its own, one in each vertex. The measure puts mass
/// `2^{-k(N+1)}` on one atom per cube, so the total mass is 1.
pub fn cantor_generation<T: Scalar>(
    spec: &CantorSpec,
) -> Result<(Vec<ParabolicCube<T>>, DiscreteMeasure<T>)> {
    let count = spec
        .cube_count()
        .filter(|&c| c <= spec.cap)
        .ok_or_else(|| {
            Error::TooLarge(format!(
                "generation {} in dimension {} exceeds the cap of {} cubes",
                spec.k, spec.n, spec.cap
            ))
        })?;
    let params = spec.params::<T>();
    let dims = spec.n + 1;
    // Corners in [x_1, .., x_N, t] layout.
    let mut corners: Vec<Vec<T>> = vec![vec![T::zero(); dims]];
    let mut side = T::one();
    for j in 1..=spec.k {
        let child = CantorSpec { k: j, ..*spec }.side::<T>();
        let offset = side - child;
        let mut next = Vec::with_capacity(corners.len() << dims);
        for c in &corners {
            for mask in 0..(1usize << dims) {
                next.push(
                    (0..dims)
                        .map(|a| if mask >> a & 1 == 1 { c[a] + offset } else { c[a] })
                        .collect(),
                );
            }
        }
        corners = next;
        side = child;
    }
    debug_assert_eq!(corners.len(), count);
    let mut cubes = Vec::with_capacity(count);
    let mut atoms = Vec::with_capacity(count);
    for c in corners {
        let cube = ParabolicCube::new(c[..spec.n].to_vec(), side, c[spec.n], &params)?;
        atoms.push(match spec.placement {
            AtomPlacement::Center => cube.center(),
            AtomPlacement::Corner => SpacetimePoint::new(c[..spec.n].to_vec(), c[spec.n]),
        });
        cubes.push(cube);
    }
    let weights = vec![spec.cube_mass::<T>(); count];
    Ok((cubes, DiscreteMeasure::new(atoms, weights)?))
}

/// `m` atoms at the midpoints of an equal subdivision, each of weight `L/m`.
pub fn segment_measure<T: Scalar>(seg: &Segment<T>, m: usize) -> Result<DiscreteMeasure<T>> {
    if m == 0 {
        return Err(invalid("m", "need at least one atom"));
    }
    let mf = T::from_usize_lossy(m);
    let h = seg.length / mf;
    let half = T::lit(0.5);
    let atoms = (0..m)
        .map(|i| seg.point_at((T::from_usize_lossy(i) + half) * h))
        .collect();
    DiscreteMeasure::new(atoms, vec![h; m])
}

/// Minimal distance between distinct atoms, `None` if all atoms coincide.
pub fn min_separation<T: Scalar, M: Atoms<T> + Sync>(mu: &M, params: &FracParams<T>) -> Option<T> {
    let atoms = mu.atoms();
    let best = (0..atoms.len())
        .into_par_iter()
        .map(|i| {
            let mut best = T::infinity();
            for j in i + 1..atoms.len() {
                let d = dist_p_unchecked(&atoms[i], &atoms[j], params);
                if d > T::zero() && d < best {
                    best = d;
                }
            }
            best
        })
        .reduce(|| T::infinity(), |a, b| a.min(b));
    best.is_finite().then_some(best)
}

/// Outcome of [`growth_constant`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthReport<T> {
    /// `max mu(B_p(a, r)) / r^d` over atoms `a` and admissible radii `r`.
    pub constant: T,
    /// Smallest admissible radius (the minimal interatomic distance).
    pub radius_floor: T,
    /// True when no two distinct atoms exist and the floor `1` was used.
    pub floor_by_convention: bool,
    /// Atom and radius where the maximum is attained.
    pub argmax_atom: usize,
    pub argmax_radius: T,
    /// Number of radii examined per atom (all jump radii when exact).
    pub radii_examined: usize,
}

/// Discrete growth constant of `mu` in degree `d`.
///
/// Balls are closed. With `radius_samples = None` every radius at which
/// some `mu(B_p(a, .))` jumps is examined, which gives the exact maximum over
/// all `r >= floor`; `Some(q)` restricts to `q` quantiles of the pairwise
/// distances plus the diameter.
pub fn growth_constant<T: Scalar>(
    mu: &DiscreteMeasure<T>,
    d: T,
    params: &FracParams<T>,
    radius_samples: Option<usize>,
) -> Result<GrowthReport<T>> {
    if mu.is_empty() {
        return Err(Error::Empty("measure"));
    }
    if !(d > T::zero()) {
        return Err(invalid("d", "growth degree must be positive"));
    }
    for a in mu.atoms() {
        check_dim(a, params.n())?;
    }
    if matches!(radius_samples, Some(0)) {
        return Err(invalid("radius_samples", "need at least one radius"));
    }
    let atoms = mu.atoms();
    let weights = mu.weights();
    let (floor, by_convention) = match min_separation(mu, params) {
        Some(f) => (f, false),
        None => (T::one(), true),
    };
    let sampled: Option<Vec<T>> = radius_samples.map(|q| quantile_radii(atoms, params, q, floor));
    let per_atom: Vec<(T, T, usize)> = (0..atoms.len())
        .into_par_iter()
        .map(|i| {
            let mut dw: Vec<(T, T)> = atoms
                .iter()
                .zip(weights)
                .map(|(b, &w)| (dist_p_unchecked(&atoms[i], b, params), w))
                .collect();
            dw.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite distances"));
            let mut best = (T::zero(), floor, 0usize);
            let consider = |r: T, mass: T, best: &mut (T, T, usize)| {
                let ratio = mass / r.powf(d);
                if ratio > best.0 {
                    best.0 = ratio;
                    best.1 = r;
                }
                best.2 += 1;
            };
            match &sampled {
                None => {
                    let mut mass = T::zero();
                    let mut j = 0;
                    // Mass inside the floor radius.
                    while j < dw.len() && dw[j].0 <= floor {
                        mass = mass + dw[j].1;
                        j += 1;
                    }
                    consider(floor, mass, &mut best);
                    while j < dw.len() {
                        let r = dw[j].0;
                        while j < dw.len() && dw[j].0 == r {
                            mass = mass + dw[j].1;
                            j += 1;
                        }
                        consider(r, mass, &mut best);
                    }
                }
                Some(radii) => {
                    let mut mass = T::zero();
                    let mut j = 0;
                    for &r in radii {
                        while j < dw.len() && dw[j].0 <= r {
                            mass = mass + dw[j].1;
                            j += 1;
                        }
                        consider(r, mass, &mut best);
                    }
                }
            }
            best
        })
        .collect();
    let (argmax_atom, &(constant, argmax_radius, _)) = per_atom
        .iter()
        .enumerate()
        .max_by(|a, b| {
            a.1 .0
                .partial_cmp(&b.1 .0)
                .expect("finite ratios")
                .then(b.0.cmp(&a.0))
        })
        .expect("non-empty");
    let radii_examined = per_atom.iter().map(|p| p.2).max().unwrap_or(0);
    Ok(GrowthReport {
        constant,
        radius_floor: floor,
        floor_by_convention: by_convention,
        argmax_atom,
        argmax_radius,
        radii_examined,
    })
}

/// `q` quantiles of the pairwise distances at or above `floor`, plus the diameter.
fn quantile_radii<T: Scalar>(
    atoms: &[SpacetimePoint<T>],
    params: &FracParams<T>,
    q: usize,
    floor: T,
) -> Vec<T> {
    let mut all: Vec<T> = (0..atoms.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            (i + 1..atoms.len()).map(move |j| dist_p_unchecked(&atoms[i], &atoms[j], params))
        })
        .filter(|&r| r >= floor)
        .collect();
    if all.is_empty() {
        return vec![floor];
    }
    all.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let last = all.len() - 1;
    let mut out: Vec<T> = (0..q)
        .map(|i| if q == 1 { all[last] } else { all[i * last / (q - 1)] })
        .collect();
    out.push(*all.last().expect("non-empty"));
    out.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    out.dedup();
    out
}

/// Divides the weights by the growth constant so the rescaled measure has
/// growth constant 1.
pub fn frostman_rescale<T: Scalar>(
    mu: &DiscreteMeasure<T>,
    report: &GrowthReport<T>,
) -> Result<DiscreteMeasure<T>> {
    if !(report.constant > T::zero()) {
        return Err(invalid("report", "growth constant must be positive to rescale"));
    }
    mu.scaled(T::one() / report.constant)
}

/// Convenience: atoms of a horizontal or vertical segment of length `L`
/// anchored at the origin of `R^{1+1}`.
pub fn unit_segment<T: Scalar>(orientation: Orientation, length: T) -> Result<Segment<T>> {
    Segment::new(orientation, length, SpacetimePoint::origin(1))
}
