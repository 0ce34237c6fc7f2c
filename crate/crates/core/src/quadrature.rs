//! Adaptive Gauss-Kronrod integration and the radial cosine transforms that
//! define the fractional heat profile.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

// 21-point Kronrod extension of the 10-point Gauss rule (QUADPACK qk21).
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_980_097_305,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Integral value with an error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<T> {
    pub value: T,
    pub error: T,
    pub panels: usize,
}

/// Stopping rule for [`integrate_adaptive`]: converged once the summed
/// error estimate is below `max(abs, rel * |I|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance<T> {
    pub abs: T,
    pub rel: T,
}

#[derive(Debug, Clone, Copy)]
struct Panel<T> {
    a: T,
    b: T,
    value: T,
    error: T,
    floor: T,
    key: f64,
}

impl<T> PartialEq for Panel<T> {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}
impl<T> Eq for Panel<T> {}
impl<T> PartialOrd for Panel<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Panel<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key.total_cmp(&other.key)
    }
}

/// One 21-point Kronrod panel: `(kronrod, |kronrod - gauss|, integral of |f|)`.
fn gk21<T: Scalar, F: Fn(T) -> T>(f: &F, a: T, b: T) -> (T, T, T) {
    let half = T::lit(0.5);
    let center = half * (a + b);
    let half_len = half * (b - a);
    let fc = f(center);
    let mut kron = T::lit(WGK[10]) * fc;
    let mut abs_mass = T::lit(WGK[10]) * fc.abs();
    let mut gauss = T::zero();
    for j in 0..10 {
        let dx = half_len * T::lit(XGK[j]);
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        let w = T::lit(WGK[j]);
        kron = kron + w * (f1 + f2);
        abs_mass = abs_mass + w * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss = gauss + T::lit(WG[j / 2]) * (f1 + f2);
        }
    }
    let k = kron * half_len;
    let g = gauss * half_len;
    (k, (k - g).abs(), abs_mass * half_len.abs())
}

fn make_panel<T: Scalar, F: Fn(T) -> T>(f: &F, a: T, b: T) -> Panel<T> {
    let (value, raw_err, abs_mass) = gk21(f, a, b);
    // Panels already at the roundoff floor are never split again.
    let floor = T::lit(50.0) * T::epsilon() * abs_mass;
    let at_floor = raw_err <= floor
        || (b - a).abs() <= T::lit(100.0) * T::epsilon() * a.abs().max(b.abs());
    let error = raw_err.max(floor);
    Panel {
        a,
        b,
        value,
        error,
        floor,
        key: if at_floor { -1.0 } else { error.as_f64() },
    }
}

/// Globally adaptive Gauss-Kronrod integration over consecutive intervals.
///
/// The panel with the largest error estimate is bisected until the total
/// error meets `tol` or every remaining panel sits at its roundoff floor.
pub fn integrate_adaptive<T: Scalar, F: Fn(T) -> T>(
    f: F,
    breakpoints: &[T],
    tol: Tolerance<T>,
    max_panels: usize,
) -> Result<Estimate<T>> {
    if breakpoints.len() < 2 {
        return Ok(Estimate {
            value: T::zero(),
            error: T::zero(),
            panels: 0,
        });
    }
    let mut heap: BinaryHeap<Panel<T>> = breakpoints
        .windows(2)
        .filter(|w| w[1] != w[0])
        .map(|w| make_panel(&f, w[0], w[1]))
        .collect();
    let mut panels = heap.len();
    let mut value: T = heap.iter().map(|p| p.value).sum();
    let mut error: T = heap.iter().map(|p| p.error).sum();
    let mut floor: T = heap.iter().map(|p| p.floor).sum();
    loop {
        // Accumulated roundoff is a floor no amount of splitting can beat.
        let target = tol.abs.max(tol.rel * value.abs()).max(floor * T::lit(2.0));
        let top_key = heap.peek().map(|p| p.key).unwrap_or(-1.0);
        if error <= target || top_key < 0.0 {
            // Re-sum exactly; the running totals drift by rounding.
            let value: T = heap.iter().map(|p| p.value).sum();
            let error: T = heap.iter().map(|p| p.error).sum();
            return Ok(Estimate {
                value,
                error,
                panels,
            });
        }
        if panels >= max_panels {
            return Err(Error::QuadratureNonConvergence(format!(
                "panel budget {max_panels} exhausted with error {error:e} above target {target:e}"
            )));
        }
        let worst = heap.pop().expect("non-empty heap");
        let mid = T::lit(0.5) * (worst.a + worst.b);
        let left = make_panel(&f, worst.a, mid);
        let right = make_panel(&f, mid, worst.b);
        value = value - worst.value + left.value + right.value;
        error = (error - worst.error + left.error + right.error).max(T::zero());
        floor = (floor - worst.floor + left.floor + right.floor).max(T::zero());
        heap.push(left);
        heap.push(right);
        panels += 1;
    }
}

/// Integration settings for the radial transforms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSettings {
    /// Absolute tolerance per half-period panel on the real axis.
    pub panel_abs_tol: f64,
    /// Relative tolerance for each transform value.
    pub rel_tol: f64,
    /// Maximum number of panels per transform evaluation.
    pub panel_budget: usize,
    /// Above this radial argument the rotated-ray route is used (for `s < 1`).
    pub ray_switch: f64,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self {
            panel_abs_tol: 1e-15,
            rel_tol: 1e-12,
            panel_budget: 1_000_000,
            ray_switch: 2.0,
        }
    }
}

/// Which integration path evaluated a transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformRoute {
    RealAxis,
    RotatedRay,
}

/// `(1/pi) * int_0^inf r^p exp(-r^{2s}) cos(r u) dr`.
///
/// With `p = 0` this is the one-dimensional profile `phi(u)` of the
/// fractional heat kernel; `p = 2 alpha` gives the profile of
/// `(-Delta)^alpha` applied to it.
pub fn radial_cosine_transform<T: Scalar>(
    s: T,
    p: T,
    u: T,
    settings: &QuadratureSettings,
) -> Result<(Estimate<T>, TransformRoute)> {
    let u = u.abs();
    if s < T::one() && u > T::lit(settings.ray_switch) {
        Ok((cosine_transform_ray(s, p, u, settings)?, TransformRoute::RotatedRay))
    } else {
        Ok((cosine_transform_real_axis(s, p, u, settings)?, TransformRoute::RealAxis))
    }
}

/// Radius beyond which `r^p exp(-r^{2s})` is below `exp(-margin)`.
fn envelope_cutoff<T: Scalar>(s: T, p: T, margin: T) -> T {
    let inv = T::one() / (s + s);
    let mut r = margin.powf(inv);
    for _ in 0..8 {
        let extra = if r > T::one() { p * r.ln() } else { T::zero() };
        r = (margin + extra).powf(inv);
    }
    r
}

/// Real-axis evaluation: geometric panels for small `u`, half-period panels
/// of length `pi/u` once `u > 1`.
pub fn cosine_transform_real_axis<T: Scalar>(
    s: T,
    p: T,
    u: T,
    settings: &QuadratureSettings,
) -> Result<Estimate<T>> {
    let cutoff = envelope_cutoff(s, p, T::lit(45.0));
    let integrand = |r: T| {
        if r <= T::zero() {
            if p == T::zero() {
                T::one()
            } else {
                T::zero()
            }
        } else {
            r.powf(p) * (-(r.powf(s + s))).exp() * (r * u).cos()
        }
    };
    let mut breaks = vec![T::zero()];
    if u > T::one() {
        let step = T::PI() / u;
        let count = (cutoff / step).ceil().to_usize().unwrap_or(usize::MAX);
        if count > settings.panel_budget {
            return Err(Error::QuadratureNonConvergence(format!(
                "{count} half-period panels exceed budget {}",
                settings.panel_budget
            )));
        }
        // Grade the first panel toward the branch point at r = 0.
        let mut g = step * T::lit(1.0 / 1024.0);
        while g < step {
            breaks.push(g);
            g = g + g;
        }
        for k in 1..=count {
            breaks.push(step * T::from_usize_lossy(k));
        }
    } else {
        let mut g = T::lit(1.0 / 1024.0);
        while g < cutoff {
            breaks.push(g);
            g = g + g;
        }
        breaks.push(cutoff);
    }
    let panels = breaks.len() - 1;
    let tol = Tolerance {
        abs: T::lit(settings.panel_abs_tol) * T::from_usize_lossy(panels),
        rel: T::lit(settings.rel_tol),
    };
    let est = integrate_adaptive(integrand, &breaks, tol, settings.panel_budget)?;
    Ok(Estimate {
        value: est.value / T::PI(),
        error: est.error / T::PI(),
        panels: est.panels,
    })
}

/// Evaluation along the ray `r = rho e^{i theta}`.
///
/// `r^p exp(-r^{2s}) e^{iru}` is analytic in the sector between the real
/// axis and the ray and decays on its arc when `2 s theta < pi/2`, so the
/// real-axis integral equals the ray integral. On the ray the integrand
/// decays like `exp(-u rho sin(theta))`, which removes the slowly cancelling
/// oscillations of the real-axis form at large `u`. Requires `s < 1`.
pub fn cosine_transform_ray<T: Scalar>(
    s: T,
    p: T,
    u: T,
    settings: &QuadratureSettings,
) -> Result<Estimate<T>> {
    if !(s < T::one()) {
        return Err(Error::InvalidParameter {
            name: "s",
            reason: "rotated-ray route needs s < 1".into(),
        });
    }
    let two_s = s + s;
    let theta = T::FRAC_PI_2().min(T::PI() / (T::lit(8.0) * s));
    let (sin_t, cos_t) = theta.sin_cos();
    let (sin_2st, cos_2st) = (two_s * theta).sin_cos();
    let phase0 = (p + T::one()) * theta;
    let integrand = |rho: T| {
        if rho <= T::zero() {
            return if p == T::zero() { phase0.cos() } else { T::zero() };
        }
        let r2s = rho.powf(two_s);
        let re = -r2s * cos_2st - u * rho * sin_t;
        let im = -r2s * sin_2st + u * rho * cos_t + phase0;
        rho.powf(p) * re.exp() * im.cos()
    };
    // Decay from the e^{iru} factor alone sets the outer cutoff.
    let rate = u * sin_t;
    let mut rho_max = T::lit(70.0) / rate;
    for _ in 0..6 {
        let extra = if rho_max > T::one() { p * rho_max.ln() } else { T::zero() };
        rho_max = (T::lit(70.0) + extra) / rate;
    }
    let mut breaks = vec![T::zero()];
    let mut g = rho_max * T::lit(2f64.powi(-45));
    while g < rho_max {
        breaks.push(g);
        g = g + g;
    }
    breaks.push(rho_max);
    let tol = Tolerance {
        abs: T::min_positive_value(),
        rel: T::lit(settings.rel_tol),
    };
    let est = integrate_adaptive(integrand, &breaks, tol, settings.panel_budget)?;
    Ok(Estimate {
        value: est.value / T::PI(),
        error: est.error / T::PI(),
        panels: est.panels,
    })
}
