//! Fundamental solutions of the fractional heat equation.
//!
//! Four kernels are available: the closed-form `s = 1/2` kernel
//! `t / (t^2 + |x|^2)^{(N+1)/2}` exactly as printed (no normalising
//! constant), the Gaussian `(4 pi t)^{-N/2} exp(-|x|^2 / 4t)`, the
//! Blumenthal-Getoor envelope `t / (t^{1/s} + |x|^2)^{(N+2s)/2}`, and the
//! general `P_s` evaluated through its self-similar profile
//! `P_s(x, t) = t^{-N/2s} phi(|x| t^{-1/2s})`, where `phi` is tabulated from
//! the inverse Fourier transform of `exp(-|xi|^{2s})`.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::geometry::{check_dim, FracParams, SpacetimePoint};
use crate::quadrature::{radial_cosine_transform, QuadratureSettings};
use crate::scalar::Scalar;

/// How a profile is scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// `phi-hat(0) = 1`, so `P_s(., t)` has unit mass.
    FourierNormalized,
    /// The `s = 1/2` kernel as printed, i.e. `pi` times the normalised one.
    PaperRaw,
}

impl Normalization {
    pub fn as_str(&self) -> &'static str {
        match self {
            Normalization::FourierNormalized => "fourier-normalized",
            Normalization::PaperRaw => "paper-raw",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "fourier-normalized" => Some(Self::FourierNormalized),
            "paper-raw" => Some(Self::PaperRaw),
            _ => None,
        }
    }
}

/// Settings for [`build_profile`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileSettings {
    pub quadrature: QuadratureSettings,
    /// Largest tabulated argument; `None` picks a default from `s`.
    pub u_max: Option<f64>,
    /// Smallest positive node; the grid is `0` followed by log-spaced nodes.
    pub u_min: f64,
    pub nodes_per_decade: usize,
}

impl Default for ProfileSettings {
    fn default() -> Self {
        Self {
            quadrature: QuadratureSettings::default(),
            u_max: None,
            u_min: 1e-3,
            nodes_per_decade: 200,
        }
    }
}

impl ProfileSettings {
    /// Default table extent.
    ///
    /// Below `s = 1` the ray quadrature keeps roughly `1e-15 u^{2s}` relative
    /// accuracy, so the table stops at `10^{floor(5/s)}` (clamped to
    /// `[1e3, 1e8]`). For `s = 1` the profile is Gaussian and the table stops
    /// at `u = 8`, where it is still resolvable above roundoff.
    pub fn default_u_max(s: f64) -> f64 {
        if s >= 1.0 {
            8.0
        } else {
            10f64.powf((5.0 / s).floor().clamp(3.0, 8.0))
        }
    }
}

/// Record of how a profile was integrated.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureMeta {
    pub settings: ProfileSettings,
    pub max_panels: usize,
    pub max_rel_error: f64,
    pub mass: f64,
}

/// Tabulated radial profile `phi(u)` of `P_s` for `N = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelProfile<T> {
    params: FracParams<T>,
    grid: Vec<T>,
    values: Vec<T>,
    normalization: Normalization,
    meta: Option<QuadratureMeta>,
    // Interpolation data on (log u, log phi) for nodes 1..M.
    log_u: Vec<T>,
    log_phi: Vec<T>,
    slope: Vec<T>,
    tail_coef: T,
}

impl<T: Scalar> KernelProfile<T> {
    /// Builds a profile from tabulated values (e.g. read from disk).
    pub fn from_table(
        params: FracParams<T>,
        grid: Vec<T>,
        values: Vec<T>,
        normalization: Normalization,
    ) -> Result<Self> {
        if params.n() != 1 {
            return Err(Error::UnsupportedDimension(params.n()));
        }
        if grid.len() != values.len() {
            return Err(invalid("values", "grid and value lengths differ"));
        }
        if grid.len() < 4 {
            return Err(invalid("grid", "need at least four nodes"));
        }
        if grid[0] != T::zero() {
            return Err(invalid("grid", "first node must be u = 0"));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("grid", "nodes must be strictly increasing"));
        }
        if values.iter().any(|&v| !(v > T::zero()) || !v.is_finite()) {
            return Err(invalid("values", "profile values must be positive and finite"));
        }
        let log_u: Vec<T> = grid[1..].iter().map(|u| u.ln()).collect();
        let log_phi: Vec<T> = values[1..].iter().map(|v| v.ln()).collect();
        let slope = hermite_slopes(&log_u, &log_phi);
        let u_max = *grid.last().expect("non-empty");
        let phi_max = *values.last().expect("non-empty");
        let tail_coef = if params.s() >= T::one() {
            phi_max * (u_max * u_max / T::lit(4.0)).exp()
        } else {
            phi_max * u_max.powf(T::one() + params.two_s())
        };
        Ok(Self {
            params,
            grid,
            values,
            normalization,
            meta: None,
            log_u,
            log_phi,
            slope,
            tail_coef,
        })
    }

    pub fn params(&self) -> &FracParams<T> {
        &self.params
    }

    pub fn grid(&self) -> &[T] {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn quadrature_meta(&self) -> Option<&QuadratureMeta> {
        self.meta.as_ref()
    }

    pub fn u_max(&self) -> T {
        *self.grid.last().expect("non-empty grid")
    }

    /// Largest argument accepted by the checked evaluators.
    pub fn validity_limit(&self) -> T {
        T::lit(10.0) * self.u_max()
    }

    /// `phi(0)`.
    pub fn peak(&self) -> T {
        self.values[0]
    }

    /// Coefficient of the fitted tail law beyond `u_max`.
    pub fn tail_coefficient(&self) -> T {
        self.tail_coef
    }

    /// `phi(u)` with the range check of the kernel evaluators.
    pub fn phi(&self, u: T) -> Result<T> {
        let u = u.abs();
        if u > self.validity_limit() {
            return Err(Error::OutsideProfileRange {
                u: u.as_f64(),
                limit: self.validity_limit().as_f64(),
            });
        }
        Ok(self.phi_extended(u))
    }

    /// `phi(u)` for any `u`, using the tail law beyond the table.
    pub fn phi_extended(&self, u: T) -> T {
        let u = u.abs();
        let u1 = self.grid[1];
        if u <= u1 {
            // phi is even and smooth at the origin.
            let r = u / u1;
            return self.values[0] + (self.values[1] - self.values[0]) * r * r;
        }
        if u >= self.u_max() {
            return self.tail(u);
        }
        let lu = u.ln();
        let j = self.log_u.partition_point(|&v| v <= lu).clamp(1, self.log_u.len() - 1);
        let (x0, x1) = (self.log_u[j - 1], self.log_u[j]);
        let (y0, y1) = (self.log_phi[j - 1], self.log_phi[j]);
        let h = x1 - x0;
        let v = (lu - x0) / h;
        let v2 = v * v;
        let v3 = v2 * v;
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        let h00 = two * v3 - three * v2 + T::one();
        let h10 = v3 - two * v2 + v;
        let h01 = -two * v3 + three * v2;
        let h11 = v3 - v2;
        (h00 * y0 + h10 * h * self.slope[j - 1] + h01 * y1 + h11 * h * self.slope[j]).exp()
    }

    fn tail(&self, u: T) -> T {
        if self.params.s() >= T::one() {
            self.tail_coef * (-(u * u) / T::lit(4.0)).exp()
        } else {
            self.tail_coef * u.powf(-(T::one() + self.params.two_s()))
        }
    }

    /// Spacing of the tabulated nodes around `u` (used to size difference steps).
    pub fn local_spacing(&self, u: T) -> T {
        let u = u.abs();
        let j = self.grid.partition_point(|&g| g <= u).clamp(1, self.grid.len() - 1);
        self.grid[j] - self.grid[j - 1]
    }

    /// `int_R phi(|u|) du`, i.e. the spatial mass of `P_s(., t)`.
    ///
    /// Trapezoid rule in `log u` over the table plus the exact integral of
    /// the tail law.
    pub fn mass(&self) -> T {
        let u1 = self.grid[1];
        // Quadratic interpolant on [0, u1].
        let mut total = u1 * (self.values[0] + (self.values[1] - self.values[0]) / T::lit(3.0));
        for i in 1..self.grid.len() - 1 {
            let (a, b) = (self.grid[i], self.grid[i + 1]);
            let h = b.ln() - a.ln();
            total = total + T::lit(0.5) * h * (a * self.values[i] + b * self.values[i + 1]);
        }
        let u_max = self.u_max();
        total = total + self.tail_integral(u_max);
        total + total
    }

    /// `int_{a}^{inf}` of the tail law.
    fn tail_integral(&self, a: T) -> T {
        if self.params.s() >= T::one() {
            // int_a^inf e^{-u^2/4} du = sqrt(pi) erfc(a/2); a >= 8 here, so
            // the leading asymptotic term is exact to ~1e-3 of a negligible value.
            self.tail_coef * T::lit(2.0) * (-(a * a) / T::lit(4.0)).exp() / a
        } else {
            let two_s = self.params.two_s();
            self.tail_coef * a.powf(-two_s) / two_s
        }
    }

    /// The same profile in another normalisation.
    pub fn renormalized(&self, normalization: Normalization) -> Result<Self> {
        if normalization == self.normalization {
            return Ok(self.clone());
        }
        if !self.params.is_half() {
            return Err(invalid(
                "normalization",
                "the unnormalised kernel is only defined for s = 1/2",
            ));
        }
        let factor = match normalization {
            Normalization::PaperRaw => T::PI(),
            Normalization::FourierNormalized => T::one() / T::PI(),
        };
        let values = self.values.iter().map(|&v| v * factor).collect();
        let mut out = Self::from_table(self.params, self.grid.clone(), values, normalization)?;
        out.meta = self.meta.clone();
        Ok(out)
    }

    /// Writes the flat text table: header `s N normalization u_max M`, then
    /// `M` lines `u value` with 17 significant digits.
    pub fn to_table_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:.16e} {} {} {:.16e} {}",
            self.params.s(),
            self.params.n(),
            self.normalization.as_str(),
            self.u_max(),
            self.grid.len()
        );
        for (u, v) in self.grid.iter().zip(&self.values) {
            let _ = writeln!(out, "{u:.16e} {v:.16e}");
        }
        out
    }

    pub fn from_table_str(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(Error::Empty("profile table"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(Error::Parse {
                line: 1,
                reason: "header must be `s N normalization u_max M`".into(),
            });
        }
        let parse_t = |tok: &str, line: usize| -> Result<T> {
            tok.parse::<T>().map_err(|_| Error::Parse {
                line,
                reason: format!("not a number: {tok}"),
            })
        };
        let s = parse_t(fields[0], 1)?;
        let n: usize = fields[1].parse().map_err(|_| Error::Parse {
            line: 1,
            reason: "N must be an integer".into(),
        })?;
        let normalization = Normalization::parse(fields[2]).ok_or_else(|| Error::Parse {
            line: 1,
            reason: format!("unknown normalization {}", fields[2]),
        })?;
        let u_max = parse_t(fields[3], 1)?;
        let m: usize = fields[4].parse().map_err(|_| Error::Parse {
            line: 1,
            reason: "M must be an integer".into(),
        })?;
        let mut grid = Vec::with_capacity(m);
        let mut values = Vec::with_capacity(m);
        for (idx, line) in lines {
            let mut it = line.split_whitespace();
            let (Some(a), Some(b), None) = (it.next(), it.next(), it.next()) else {
                return Err(Error::Parse {
                    line: idx + 1,
                    reason: "expected `u value`".into(),
                });
            };
            grid.push(parse_t(a, idx + 1)?);
            values.push(parse_t(b, idx + 1)?);
        }
        if grid.len() != m {
            return Err(Error::Parse {
                line: 1,
                reason: format!("header announces {m} rows, found {}", grid.len()),
            });
        }
        if grid.last().copied() != Some(u_max) {
            return Err(Error::Parse {
                line: 1,
                reason: "u_max does not match the last row".into(),
            });
        }
        let params = FracParams::new(s, n)?;
        Self::from_table(params, grid, values, normalization)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_table_string())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_table_str(&std::fs::read_to_string(path)?)
    }
}

/// Three-point slopes on a non-uniform grid, one-sided at the ends.
fn hermite_slopes<T: Scalar>(x: &[T], y: &[T]) -> Vec<T> {
    let m = x.len();
    let mut d = vec![T::zero(); m];
    for i in 1..m - 1 {
        let h0 = x[i] - x[i - 1];
        let h1 = x[i + 1] - x[i];
        d[i] = (h0 * h0 * (y[i + 1] - y[i]) + h1 * h1 * (y[i] - y[i - 1])) / (h0 * h1 * (h0 + h1));
    }
    let one_sided = |i0: usize, i1: usize, i2: usize, at: usize| -> T {
        // Derivative of the quadratic through three nodes, evaluated at `at`.
        let (x0, x1, x2) = (x[i0], x[i1], x[i2]);
        let (y0, y1, y2) = (y[i0], y[i1], y[i2]);
        let xa = x[at];
        y0 * ((xa - x1) + (xa - x2)) / ((x0 - x1) * (x0 - x2))
            + y1 * ((xa - x0) + (xa - x2)) / ((x1 - x0) * (x1 - x2))
            + y2 * ((xa - x0) + (xa - x1)) / ((x2 - x0) * (x2 - x1))
    };
    d[0] = one_sided(0, 1, 2, 0);
    d[m - 1] = one_sided(m - 3, m - 2, m - 1, m - 1);
    d
}

/// Tabulates `phi(u) = (1/pi) int_0^inf exp(-r^{2s}) cos(r u) dr` for `N = 1`.
///
/// Nodes: `u = 0` and `nodes_per_decade` log-spaced nodes from `u_min` to
/// `u_max`. The result is checked for positivity, monotonicity and unit mass.
pub fn build_profile<T: Scalar>(
    params: &FracParams<T>,
    settings: &ProfileSettings,
) -> Result<KernelProfile<T>> {
    if params.n() != 1 {
        return Err(Error::UnsupportedDimension(params.n()));
    }
    let s = params.s();
    let u_max = settings
        .u_max
        .unwrap_or_else(|| ProfileSettings::default_u_max(s.as_f64()));
    if !(u_max > settings.u_min) || settings.u_min <= 0.0 || settings.nodes_per_decade < 2 {
        return Err(invalid("settings", "need 0 < u_min < u_max and >= 2 nodes per decade"));
    }
    let decades = (u_max / settings.u_min).log10();
    let count = (decades * settings.nodes_per_decade as f64).ceil() as usize;
    let mut grid = Vec::with_capacity(count + 2);
    grid.push(T::zero());
    for i in 0..=count {
        let u = settings.u_min * 10f64.powf(decades * i as f64 / count as f64);
        grid.push(T::lit(u));
    }
    let mut values = Vec::with_capacity(grid.len());
    let mut max_panels = 0;
    let mut max_rel_error = 0f64;
    for &u in &grid {
        let (est, _) = radial_cosine_transform(s, T::zero(), u, &settings.quadrature)?;
        max_panels = max_panels.max(est.panels);
        if est.value > T::zero() {
            max_rel_error = max_rel_error.max((est.error / est.value).as_f64());
        }
        values.push(est.value);
    }
    if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(**v > T::zero())) {
        return Err(Error::QuadratureNonConvergence(format!(
            "profile value {v:e} at u = {:e} is not positive",
            grid[i]
        )));
    }
    for (i, w) in values.windows(2).enumerate() {
        if w[1] > w[0] * (T::one() + T::lit(1e-9)) {
            return Err(Error::QuadratureNonConvergence(format!(
                "profile increases between u = {:e} and u = {:e}",
                grid[i],
                grid[i + 1]
            )));
        }
    }
    let mut profile =
        KernelProfile::from_table(*params, grid, values, Normalization::FourierNormalized)?;
    let mass = profile.mass().as_f64();
    if (mass - 1.0).abs() > 1e-6 {
        return Err(Error::QuadratureNonConvergence(format!(
            "profile mass {mass} differs from 1 by more than 1e-6"
        )));
    }
    profile.meta = Some(QuadratureMeta {
        settings: *settings,
        max_panels,
        max_rel_error,
        mass,
    });
    Ok(profile)
}

/// Kernel selector.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelKind<T> {
    /// `t / (t^2 + |x|^2)^{(N+1)/2}` for `t > 0`, unnormalised.
    Half,
    /// `(4 pi t)^{-N/2} exp(-|x|^2 / 4t)`.
    Gaussian,
    /// Fourier-normalised `P_s` through a tabulated profile.
    Profile(Arc<KernelProfile<T>>),
    /// `t / (t^{1/s} + |x|^2)^{(N+2s)/2}`.
    BgEnvelope,
}

impl<T: Scalar> KernelKind<T> {
    pub fn profile(profile: KernelProfile<T>) -> Self {
        Self::Profile(Arc::new(profile))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Half => "half",
            Self::Gaussian => "gaussian",
            Self::Profile(_) => "profile",
            Self::BgEnvelope => "bg-envelope",
        }
    }

    /// Checks that the kind is usable with `params`.
    pub fn check(&self, params: &FracParams<T>) -> Result<()> {
        match self {
            Self::Profile(p) => {
                if p.params().n() != params.n() || p.params().s() != params.s() {
                    return Err(invalid("kind", "profile was built for different (s, N)"));
                }
                if p.normalization() != Normalization::FourierNormalized {
                    return Err(invalid("kind", "kernel evaluation needs a fourier-normalized profile"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Kernel value from `|x|^2` and `t`, with the profile's range check.
    pub fn value_checked(&self, x_sq: T, t: T, params: &FracParams<T>) -> Result<T> {
        if t <= T::zero() {
            return Ok(T::zero());
        }
        match self {
            Self::Profile(p) => {
                let scale = t.powf(T::one() / params.two_s());
                let phi = p.phi(x_sq.sqrt() / scale)?;
                Ok(phi / scale.powi(params.n() as i32))
            }
            _ => Ok(self.value(x_sq, t, params)),
        }
    }

    /// Kernel value from `|x|^2` and `t`; profile kernels use the tail law
    /// beyond the table without a range check.
    #[inline]
    pub fn value(&self, x_sq: T, t: T, params: &FracParams<T>) -> T {
        if t <= T::zero() {
            return T::zero();
        }
        let n = params.n();
        let nf = T::from_usize_lossy(n);
        let half = T::lit(0.5);
        match self {
            Self::Half => t / (t * t + x_sq).powf(half * (nf + T::one())),
            Self::Gaussian => {
                let four_pi_t = T::lit(4.0) * T::PI() * t;
                four_pi_t.powf(-half * nf) * (-x_sq / (T::lit(4.0) * t)).exp()
            }
            Self::BgEnvelope => {
                let s = params.s();
                t / (t.powf(T::one() / s) + x_sq).powf(half * (nf + s + s))
            }
            Self::Profile(p) => {
                let scale = t.powf(T::one() / params.two_s());
                p.phi_extended(x_sq.sqrt() / scale) / scale.powi(n as i32)
            }
        }
    }
}

/// Evaluates the kernel at `p = (x, t)`; zero for `t <= 0`.
pub fn eval_kernel<T: Scalar>(
    kind: &KernelKind<T>,
    p: &SpacetimePoint<T>,
    params: &FracParams<T>,
) -> Result<T> {
    check_dim(p, params.n())?;
    kind.check(params)?;
    let x_sq = p.x.iter().map(|&v| v * v).sum::<T>();
    kind.value_checked(x_sq, p.t, params)
}

/// Which derivative [`eval_kernel_derivative`] computes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Derivative<T> {
    GradX,
    Dt,
    /// `(-Delta_x)^alpha` with `alpha` in `(0, 1)`.
    FracLaplacian(T),
}

#[derive(Debug, Clone, PartialEq)]
pub enum DerivativeValue<T> {
    Scalar(T),
    Vector(Vec<T>),
}

impl<T: Scalar> DerivativeValue<T> {
    /// Scalar value, or the Euclidean norm of a gradient.
    pub fn magnitude(&self) -> T {
        match self {
            Self::Scalar(v) => v.abs(),
            Self::Vector(v) => v.iter().map(|&c| c * c).sum::<T>().sqrt(),
        }
    }

    pub fn scalar(&self) -> Option<T> {
        match self {
            Self::Scalar(v) => Some(*v),
            Self::Vector(_) => None,
        }
    }
}

/// Relative step of the profile finite differences.
pub const FD_REL_STEP: f64 = 1e-5;
/// Mismatch with `-(-Delta)^s P_s` that triggers the Richardson fallback.
pub const FD_CONSISTENCY_TOL: f64 = 1e-2;

/// Derivatives of the kernels.
///
/// Closed forms for `Half`, `Gaussian` and `BgEnvelope`; for `Profile`,
/// central differences with relative step `1e-5` in `t` and `x`, and the
/// weighted cosine transform for `(-Delta)^alpha`.
pub fn eval_kernel_derivative<T: Scalar>(
    kind: &KernelKind<T>,
    which: Derivative<T>,
    p: &SpacetimePoint<T>,
    params: &FracParams<T>,
) -> Result<DerivativeValue<T>> {
    check_dim(p, params.n())?;
    kind.check(params)?;
    if let Derivative::FracLaplacian(alpha) = which {
        if !(alpha > T::zero() && alpha < T::one()) {
            return Err(invalid("alpha", format!("must lie in (0, 1), got {alpha}")));
        }
    }
    let n = params.n();
    let t = p.t;
    if matches!(kind, KernelKind::Half) && matches!(which, Derivative::Dt) && t == T::zero() {
        return Err(Error::NotDifferentiable);
    }
    if t <= T::zero() {
        return Ok(match which {
            Derivative::GradX => DerivativeValue::Vector(vec![T::zero(); n]),
            _ => DerivativeValue::Scalar(T::zero()),
        });
    }
    let x_sq = p.x.iter().map(|&v| v * v).sum::<T>();
    let nf = T::from_usize_lossy(n);
    let half = T::lit(0.5);
    match (kind, which) {
        (KernelKind::Half, Derivative::Dt) => {
            let r = t * t + x_sq;
            let v = r.powf(-half * (nf + T::one()))
                - (nf + T::one()) * t * t * r.powf(-half * (nf + T::lit(3.0)));
            Ok(DerivativeValue::Scalar(v))
        }
        (KernelKind::Half, Derivative::GradX) => {
            let r = t * t + x_sq;
            let c = -(nf + T::one()) * t * r.powf(-half * (nf + T::lit(3.0)));
            Ok(DerivativeValue::Vector(p.x.iter().map(|&v| c * v).collect()))
        }
        (KernelKind::Half, Derivative::FracLaplacian(alpha)) => {
            // For N = 1 the printed kernel is pi times the normalised s = 1/2 kernel.
            if n != 1 {
                return Err(Error::UnsupportedDimension(n));
            }
            let psi = weighted_profile(T::lit(0.5), alpha, x_sq.sqrt() / t)?;
            Ok(DerivativeValue::Scalar(
                T::PI() * t.powf(-T::one() - alpha - alpha) * psi,
            ))
        }
        (KernelKind::Gaussian, Derivative::Dt) => {
            let w = kind.value(x_sq, t, params);
            Ok(DerivativeValue::Scalar(
                w * (-nf / (T::lit(2.0) * t) + x_sq / (T::lit(4.0) * t * t)),
            ))
        }
        (KernelKind::Gaussian, Derivative::GradX) => {
            let w = kind.value(x_sq, t, params);
            let c = -w / (T::lit(2.0) * t);
            Ok(DerivativeValue::Vector(p.x.iter().map(|&v| c * v).collect()))
        }
        (KernelKind::Gaussian, Derivative::FracLaplacian(alpha)) => {
            if n != 1 {
                return Err(Error::UnsupportedDimension(n));
            }
            let psi = weighted_profile(T::one(), alpha, x_sq.sqrt() / t.sqrt())?;
            Ok(DerivativeValue::Scalar(t.powf(-half - alpha) * psi))
        }
        (KernelKind::BgEnvelope, Derivative::Dt) => {
            let s = params.s();
            let k = half * (nf + s + s);
            let ts = t.powf(T::one() / s);
            let big = ts + x_sq;
            Ok(DerivativeValue::Scalar(
                big.powf(-k) - (k / s) * ts * big.powf(-k - T::one()),
            ))
        }
        (KernelKind::BgEnvelope, Derivative::GradX) => {
            let s = params.s();
            let k = half * (nf + s + s);
            let big = t.powf(T::one() / s) + x_sq;
            let c = -(k + k) * t * big.powf(-k - T::one());
            Ok(DerivativeValue::Vector(p.x.iter().map(|&v| c * v).collect()))
        }
        (KernelKind::BgEnvelope, Derivative::FracLaplacian(_)) => Err(invalid(
            "kind",
            "the envelope is a comparison function, not a solution; no fractional Laplacian",
        )),
        (KernelKind::Profile(_), Derivative::FracLaplacian(alpha)) => {
            if n != 1 {
                return Err(Error::UnsupportedDimension(n));
            }
            Ok(DerivativeValue::Scalar(profile_frac_laplacian(
                params, alpha, x_sq.sqrt(), t,
            )?))
        }
        (KernelKind::Profile(prof), Derivative::GradX) => {
            let scale = t.powf(T::one() / params.two_s());
            let h = T::lit(FD_REL_STEP) * p.spatial_norm().max(scale);
            let mut grad = Vec::with_capacity(n);
            for i in 0..n {
                let mut plus = p.x.clone();
                let mut minus = p.x.clone();
                plus[i] = plus[i] + h;
                minus[i] = minus[i] - h;
                let sq = |v: &[T]| v.iter().map(|&c| c * c).sum::<T>();
                let fp = kind.value(sq(&plus), t, params);
                let fm = kind.value(sq(&minus), t, params);
                grad.push((fp - fm) / (h + h));
            }
            let _ = prof;
            Ok(DerivativeValue::Vector(grad))
        }
        (KernelKind::Profile(prof), Derivative::Dt) => {
            let dt = profile_dt_fd(kind, x_sq, t, params, T::lit(FD_REL_STEP) * t);
            let s = params.s();
            if n != 1 || s >= T::one() {
                return Ok(DerivativeValue::Scalar(dt));
            }
            let target = -profile_frac_laplacian(params, s, x_sq.sqrt(), t)?;
            let scale = dt.abs().max(target.abs());
            if scale == T::zero() || (dt - target).abs() <= T::lit(FD_CONSISTENCY_TOL) * scale {
                return Ok(DerivativeValue::Scalar(dt));
            }
            // Richardson extrapolation with steps spanning several table nodes.
            let scale_t = t.powf(T::one() / params.two_s());
            let u = x_sq.sqrt() / scale_t;
            let rel = (prof.local_spacing(u) / u.max(prof.grid()[1])).max(T::lit(FD_REL_STEP));
            let h = T::lit(4.0) * rel * t;
            let d1 = profile_dt_fd(kind, x_sq, t, params, h);
            let d2 = profile_dt_fd(kind, x_sq, t, params, h * half);
            Ok(DerivativeValue::Scalar((T::lit(4.0) * d2 - d1) / T::lit(3.0)))
        }
    }
}

/// Central difference of the profile kernel in `t` with step `h`.
pub fn profile_dt_fd<T: Scalar>(
    kind: &KernelKind<T>,
    x_sq: T,
    t: T,
    params: &FracParams<T>,
    h: T,
) -> T {
    let h = h.min(t * T::lit(0.5));
    (kind.value(x_sq, t + h, params) - kind.value(x_sq, t - h, params)) / (h + h)
}

/// `psi_alpha(z) = (1/pi) int_0^inf r^{2 alpha} exp(-r^{2s}) cos(r z) dr`.
pub fn weighted_profile<T: Scalar>(s: T, alpha: T, z: T) -> Result<T> {
    let settings = QuadratureSettings::default();
    Ok(radial_cosine_transform(s, alpha + alpha, z, &settings)?.0.value)
}

/// `(-Delta)^alpha P_s(x, t) = t^{-N/2s - alpha/s} psi_alpha(|x| t^{-1/2s})` for `N = 1`.
pub fn profile_frac_laplacian<T: Scalar>(
    params: &FracParams<T>,
    alpha: T,
    x_abs: T,
    t: T,
) -> Result<T> {
    if t <= T::zero() {
        return Ok(T::zero());
    }
    let s = params.s();
    let scale = t.powf(T::one() / params.two_s());
    let psi = weighted_profile(s, alpha, x_abs / scale)?;
    let nf = T::from_usize_lossy(params.n());
    Ok(t.powf(-nf / params.two_s() - alpha / s) * psi)
}

/// `F_s(u) = P_s(1, u)`, so that `P_s(x, t) = |x|^{-N} F_s(t / |x|^{2s})`.
pub fn f_s<T: Scalar>(kind: &KernelKind<T>, u: T, params: &FracParams<T>) -> T {
    kind.value(T::one(), u, params)
}

/// Spatial mass `int_{R} P(x, t) dx` for `N = 1`, by the trapezoid rule on a
/// log-spaced `x` grid independent of any profile table, plus the tail law
/// integrated in closed form beyond the grid.
pub fn spatial_mass<T: Scalar>(kind: &KernelKind<T>, t: T, params: &FracParams<T>) -> Result<T> {
    if params.n() != 1 {
        return Err(Error::UnsupportedDimension(params.n()));
    }
    if t <= T::zero() {
        return Ok(T::zero());
    }
    let scale = t.powf(T::one() / params.two_s());
    let x_lo = T::lit(1e-7) * scale;
    let x_hi = match kind {
        KernelKind::Profile(p) => p.u_max() * scale,
        KernelKind::Gaussian => T::lit(20.0) * t.sqrt(),
        _ => T::lit(1e6) * scale,
    };
    let per_decade = 300.0;
    let decades = (x_hi / x_lo).log10().as_f64();
    let count = (decades * per_decade).ceil() as usize;
    let step = T::lit(decades / count as f64 * std::f64::consts::LN_10);
    let f = |x: T| kind.value(x * x, t, params);
    let mut total = x_lo * f(T::zero());
    let mut prev_x = x_lo;
    let mut prev = prev_x * f(prev_x);
    for i in 1..=count {
        let x = x_lo * (step * T::from_usize_lossy(i)).exp();
        let cur = x * f(x);
        total = total + T::lit(0.5) * step * (prev + cur);
        prev_x = x;
        prev = cur;
    }
    let _ = prev_x;
    // Tail beyond x_hi from the kernel's own decay law.
    let tail = match kind {
        KernelKind::Profile(p) if params.s() < T::one() => {
            let two_s = params.two_s();
            let u = x_hi / scale;
            p.tail_coefficient() * u.powf(-two_s) / two_s
        }
        KernelKind::Half => {
            // int_X^inf t/(t^2+x^2) dx = atan(t/X)
            (t / x_hi).atan()
        }
        KernelKind::BgEnvelope => {
            let s = params.s();
            t * x_hi.powf(-(T::one() + s + s)) * x_hi / (s + s)
        }
        _ => T::zero(),
    };
    Ok(T::lit(2.0) * (total + tail))
}
