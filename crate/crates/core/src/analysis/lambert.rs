//! Principal branch of the Lambert W function.

use super::{AnalysisError, AnalysisResult};

const INV_E: f64 = 1.0 / std::f64::consts::E;

/// Evaluate the principal branch W₀, i.e. solve w·e^w = x for w ≥ −1.
///
/// Defined for x ≥ −1/e. An initial guess (branch-point series, Taylor
/// series, or asymptotic logarithms depending on the argument) is refined by
/// Halley iteration; a bracketing bisection fallback guarantees the result
/// even if the iteration stalls. The returned w satisfies
/// |w·e^w − x| ≤ 1e-14·max(1, |x|).
pub fn lambert_w0(x: f64) -> AnalysisResult<f64> {
    if !x.is_finite() {
        return Err(AnalysisError::LambertDomain(x));
    }
    if x < -INV_E {
        // tolerate roundoff right at the branch point
        if x > -INV_E - 4.0 * f64::EPSILON {
            return Ok(-1.0);
        }
        return Err(AnalysisError::LambertDomain(x));
    }
    if x == 0.0 {
        return Ok(0.0);
    }

    let tol = 1e-14 * x.abs().max(1.0);
    if let Some(w) = halley(x, initial_guess(x), tol) {
        return Ok(w);
    }
    bisect(x, tol)
}

fn initial_guess(x: f64) -> f64 {
    if x < -0.25 {
        // expansion about the branch point: w = -1 + p - p²/3 + 11p³/72 + ...
        let p = (2.0 * (std::f64::consts::E * x + 1.0)).max(0.0).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else if x < 0.25 {
        // Taylor series at the origin
        x * (1.0 - x + 1.5 * x * x - 8.0 / 3.0 * x * x * x)
    } else if x < 5.0 {
        (1.0 + x).ln() * 0.7
    } else {
        // two-term asymptotic plus first correction
        let l1 = x.ln();
        let l2 = l1.ln();
        l1 - l2 + l2 / l1
    }
}

fn halley(x: f64, w0: f64, tol: f64) -> Option<f64> {
    let mut w = w0.max(-1.0 + 1e-12);
    for _ in 0..60 {
        let ew = w.exp();
        let f = w * ew - x;
        if f.abs() <= tol {
            return Some(w);
        }
        let fp = (w + 1.0) * ew;
        // Halley step: w' = w - f / (f' - f·f''/(2f')), f'' = (w + 2)·e^w
        let denom = fp - f * (w + 2.0) / (2.0 * (w + 1.0));
        if denom == 0.0 || !denom.is_finite() {
            return None;
        }
        let step = f / denom;
        w -= step;
        if w < -1.0 {
            w = -1.0 + 1e-14;
        }
        if step.abs() <= f64::EPSILON * w.abs().max(f64::EPSILON) {
            // stalled at roundoff; accept only if the residual is met
            let f = w * w.exp() - x;
            return (f.abs() <= tol).then_some(w);
        }
    }
    let f = w * w.exp() - x;
    (f.abs() <= tol).then_some(w)
}

/// Bisection on the monotone map w ↦ w·e^w over [−1, ∞), with a short
/// Newton polish. Only reached if Halley fails to meet the residual bound.
fn bisect(x: f64, tol: f64) -> AnalysisResult<f64> {
    let (mut lo, mut hi) = if x >= 0.0 {
        (0.0, 1.0 + (1.0 + x).ln())
    } else {
        (-1.0, 0.0)
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid * mid.exp() < x {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
            break;
        }
    }
    let mut w = 0.5 * (lo + hi);
    for _ in 0..4 {
        let ew = w.exp();
        let fp = (w + 1.0) * ew;
        if fp > 0.0 {
            w -= (w * ew - x) / fp;
        }
    }
    if (w * w.exp() - x).abs() <= tol {
        Ok(w)
    } else {
        Err(AnalysisError::Numerics(format!(
            "lambert_w0 failed to meet residual bound at x = {x:e}"
        )))
    }
}
