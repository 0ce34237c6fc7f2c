//! The one-dimensional fractional time derivative
//! `d_t^alpha f(t0) = int (f(s) - f(t0)) / |s - t0|^{1 + alpha} ds`.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::quadrature::{integrate_adaptive, Tolerance};
use crate::scalar::Scalar;

/// Behaviour of `f` outside the integration window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum TailModel<T> {
    /// `f(t0 +- r) ~ f(t0 +- W) (W / r)^beta` for `r > W`; `beta = 0`
    /// extends `f` by its values at the window ends.
    PowerLaw(T),
    /// Nothing is known; the run fails if the unknown part of the tail could
    /// exceed the tolerance.
    Undeclared,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FracTimeSettings<T> {
    /// Half-width `W` of the window `[t0 - W, t0 + W]`, at least 10.
    pub window: T,
    /// Inner cutoff `h`, at most `1e-3`.
    pub mesh: T,
    pub tail: TailModel<T>,
    /// Absolute tolerance for the quadrature and the undeclared tail.
    pub tol: T,
    /// Points where `f` is not smooth.
    pub breakpoints: Vec<T>,
    /// Lipschitz constant near `t0`; estimated from `f` when `None`.
    pub lip: Option<T>,
    pub max_panels: usize,
}

impl<T: Scalar> FracTimeSettings<T> {
    pub fn new(tail: TailModel<T>) -> Self {
        Self {
            window: T::lit(10.0),
            mesh: T::lit(1e-3),
            tail,
            tol: T::lit(1e-8),
            breakpoints: Vec::new(),
            lip: None,
            max_panels: 20_000,
        }
    }
}

/// Value with its error budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FracDerivative<T> {
    pub value: T,
    /// Quadrature error plus the inner-cutoff bound.
    pub error: T,
    /// `Lip * 2 h^{1 - alpha} / (1 - alpha)`, the bound on the omitted inner part.
    pub inner_bound: T,
    /// Contribution from beyond the window (included in `value`).
    pub tail: T,
    pub lip: T,
}

/// Quadrature of the defining integral in the symmetric form
/// `int_h^W (f(t0 + r) + f(t0 - r) - 2 f(t0)) / r^{1 + alpha} dr`
/// on panels refined geometrically toward `r = h`, plus the tail law.
pub fn frac_time_derivative<T, F>(
    f: F,
    t0: T,
    alpha: T,
    settings: &FracTimeSettings<T>,
) -> Result<FracDerivative<T>>
where
    T: Scalar,
    F: Fn(T) -> Result<T>,
{
    if !(alpha > T::zero() && alpha < T::one()) {
        return Err(invalid("alpha", "must lie in (0, 1)"));
    }
    let (w, h) = (settings.window, settings.mesh);
    if !(w >= T::lit(10.0)) {
        return Err(invalid("window", "window must be at least 10"));
    }
    if !(h > T::zero() && h <= T::lit(1e-3)) {
        return Err(invalid("mesh", "inner cutoff must lie in (0, 1e-3]"));
    }
    let f0 = f(t0)?;
    let lip = match settings.lip {
        Some(l) => l,
        None => {
            let fp = f(t0 + h)?;
            let fm = f(t0 - h)?;
            (fp - f0).abs().max((fm - f0).abs()) / h
        }
    };
    let inner_bound = lip * T::lit(2.0) * h.powf(T::one() - alpha) / (T::one() - alpha);

    let mut breaks = vec![h];
    let mut r = h;
    while r * T::lit(2.0) < w {
        r = r * T::lit(2.0);
        breaks.push(r);
    }
    for &b in &settings.breakpoints {
        let d = (b - t0).abs();
        if d > h && d < w {
            breaks.push(d);
        }
    }
    breaks.push(w);
    breaks.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
    breaks.dedup();

    let failure = std::cell::RefCell::new(None);
    let integrand = |r: T| -> T {
        let eval = || -> Result<T> { Ok(f(t0 + r)? + f(t0 - r)? - f0 - f0) };
        match eval() {
            Ok(v) => v / r.powf(T::one() + alpha),
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                T::zero()
            }
        }
    };
    let tol = Tolerance {
        abs: settings.tol,
        rel: T::lit(1e-10),
    };
    let est = integrate_adaptive(integrand, &breaks, tol, settings.max_panels)?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }

    // Tail beyond the window.
    let w_pow = w.powf(-alpha);
    let constant_part = -(f0 + f0) * w_pow / alpha;
    let ends = f(t0 + w)? + f(t0 - w)?;
    let tail = match settings.tail {
        TailModel::PowerLaw(beta) => {
            if !(beta >= T::zero()) {
                return Err(invalid("tail", "decay exponent must be nonnegative"));
            }
            constant_part + ends * w_pow / (alpha + beta)
        }
        TailModel::Undeclared => {
            let unknown = (f(t0 + w)?.abs() + f(t0 - w)?.abs()) * w_pow / alpha;
            if unknown > settings.tol {
                return Err(Error::InvalidParameter {
                    name: "tail",
                    reason: format!(
                        "window truncation could contribute up to {unknown:e}; declare a decay law"
                    ),
                });
            }
            constant_part
        }
    };
    Ok(FracDerivative {
        value: est.value + tail,
        error: est.error + inner_bound,
        inner_bound,
        tail,
        lip,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_has_zero_derivative() {
        let s = FracTimeSettings::new(TailModel::PowerLaw(0.0));
        let d = frac_time_derivative(|_| Ok(2.5f64), 0.3, 0.4, &s).unwrap();
        assert!(d.value.abs() < 1e-12, "{}", d.value);
    }

    #[test]
    fn linear_function_cancels() {
        // Odd integrand in r; the constant extension tail also cancels.
        let s = FracTimeSettings::new(TailModel::PowerLaw(0.0));
        let d = frac_time_derivative(|t: f64| Ok(t), 1.0, 0.5, &s).unwrap();
        assert!(d.value.abs() <= d.error + 1e-10, "{d:?}");
    }

    #[test]
    fn gaussian_against_log_trapezoid() {
        // Independent evaluation of the same integral for f(t) = exp(-t^2)
        // by a fine trapezoid rule in log r.
        let f = |t: f64| Ok((-t * t).exp());
        let alpha: f64 = 0.3;
        let t0: f64 = 0.4;
        let mut s = FracTimeSettings::new(TailModel::PowerLaw(40.0));
        s.mesh = 1e-4;
        let d = frac_time_derivative(f, t0, alpha, &s).unwrap();
        let g = |r: f64| {
            ((-(t0 + r) * (t0 + r)).exp() + (-(t0 - r) * (t0 - r)).exp() - 2.0 * (-t0 * t0).exp())
                / r.powf(1.0 + alpha)
        };
        let (lo, hi) = (1e-12f64.ln(), 30f64.ln());
        let n = 400_000;
        let step = (hi - lo) / n as f64;
        let mut acc = 0.0;
        for i in 0..=n {
            let r = (lo + step * i as f64).exp();
            let wgt = if i == 0 || i == n { 0.5 } else { 1.0 };
            acc += wgt * g(r) * r;
        }
        acc *= step;
        acc += -2.0 * (-t0 * t0).exp() * 30f64.powf(-alpha) / alpha;
        assert!((d.value - acc).abs() < d.error + 1e-6, "{} vs {}", d.value, acc);
    }

    #[test]
    fn validation() {
        let s = FracTimeSettings::new(TailModel::PowerLaw(0.0));
        assert!(frac_time_derivative(|t| Ok(t), 0.0, 1.0, &s).is_err());
        let mut bad = s.clone();
        bad.window = 5.0;
        assert!(frac_time_derivative(|t| Ok(t), 0.0, 0.5, &bad).is_err());
        let undeclared = FracTimeSettings::new(TailModel::Undeclared);
        assert!(frac_time_derivative(|_| Ok(1.0), 0.0, 0.5, &undeclared).is_err());
    }
}
