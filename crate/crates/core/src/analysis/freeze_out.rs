//! Freeze-out condition solvers.
//!
//! For a linear ramp g(t) = g_f·t/t_Q that crosses the critical coupling at
//! t_c = g_c·t_Q/g_f, the freeze-out instant t̂ is defined implicitly by
//!
//!   τ(g(t_c − t̂)) = t̂,
//!
//! i.e. the equilibrium relaxation time equals the time left before the
//! critical point is reached. With the coupling offset û = (g_f/t_Q)·t̂ the
//! condition becomes
//!
//!   exponential divergence: A·exp(B/√û) = (t_Q/g_f)·û   (closed form via W₀)
//!   power-law divergence:   τ₀·û^(−νz)   = (t_Q/g_f)·û   (closed form)

use super::{
    lambert_w0, AnalysisError, AnalysisResult, BktFit, FreezeOutResult, SecondOrderKz,
};

/// Solve the freeze-out condition for an exponentially diverging relaxation
/// time τ(g) = A·exp(B/√(g_c − g)).
///
/// The closed form follows by substituting s = 1/√û: the condition becomes
/// (B/2)·s·e^((B/2)s) = (B/2)·√(t_Q/(A·g_f)), so
///
///   t̂ = (t_Q/g_f)·(B / 2W₀(z))²,   z = (B/2)·√(t_Q/(A·g_f)).
pub fn freeze_out_bkt(fit: &BktFit, g_f: f64, t_q: f64) -> AnalysisResult<FreezeOutResult> {
    for (name, v) in [
        ("prefactor A", fit.prefactor),
        ("barrier B", fit.barrier),
        ("critical coupling g_c", fit.g_c),
        ("final coupling g_f", g_f),
        ("ramp duration t_Q", t_q),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(AnalysisError::Parameter(format!(
                "freeze_out_bkt requires {name} > 0, got {v}"
            )));
        }
    }
    let z = 0.5 * fit.barrier * (t_q / (fit.prefactor * g_f)).sqrt();
    let w = lambert_w0(z)?;
    let u = (0.5 * fit.barrier / w).powi(2);
    let t_f = t_q / g_f * u;

    let lhs = fit.prefactor * (fit.barrier / u.sqrt()).exp();
    let rhs = t_q / g_f * u;
    let residual = ((lhs - rhs) / rhs).abs();
    if !residual.is_finite() || residual > 1e-8 {
        return Err(AnalysisError::Numerics(format!(
            "freeze-out solution failed its own defining equation: residual = {residual:e}"
        )));
    }
    Ok(FreezeOutResult {
        t_f,
        critical_offset: u,
        g_at_freeze: Some(fit.g_c - u),
        residual,
    })
}

/// Solve the freeze-out condition for a power-law divergence
/// τ(g) = τ₀·|g − g_c|^(−νz), giving the usual Kibble-Zurek form
///
///   t̂ = τ₀^(1/(1+νz)) · (t_Q/g_f)^(νz/(1+νz)).
///
/// The critical coupling does not enter, so the result reports only the
/// coupling offset û = (g_f/t_Q)·t̂.
pub fn freeze_out_power(
    kz: &SecondOrderKz,
    g_f: f64,
    t_q: f64,
) -> AnalysisResult<FreezeOutResult> {
    for (name, v) in [
        ("tau_0", kz.tau_0),
        ("nu", kz.nu),
        ("z", kz.z),
        ("final coupling g_f", g_f),
        ("ramp duration t_Q", t_q),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(AnalysisError::Parameter(format!(
                "freeze_out_power requires {name} > 0, got {v}"
            )));
        }
    }
    let nuz = kz.nu * kz.z;
    let t_f = kz.tau_0.powf(1.0 / (1.0 + nuz)) * (t_q / g_f).powf(nuz / (1.0 + nuz));
    let u = g_f / t_q * t_f;

    let lhs = kz.tau_0 * u.powf(-nuz);
    let rhs = t_q / g_f * u;
    let residual = ((lhs - rhs) / rhs).abs();
    if !residual.is_finite() || residual > 1e-8 {
        return Err(AnalysisError::Numerics(format!(
            "freeze-out solution failed its own defining equation: residual = {residual:e}"
        )));
    }
    Ok(FreezeOutResult {
        t_f,
        critical_offset: u,
        g_at_freeze: None,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Bracketing bisection on h(u) = A·e^(B/√u) − (t_Q/g_f)·u, which is
    /// strictly decreasing in u, as an independent check on the closed form.
    fn bkt_offset_oracle(a: f64, b: f64, g_f: f64, t_q: f64) -> f64 {
        let h = |u: f64| a * (b / u.sqrt()).exp() - t_q / g_f * u;
        let mut lo = 1e-12;
        let mut hi = 1.0;
        while h(hi) > 0.0 {
            hi *= 2.0;
        }
        for _ in 0..500 {
            let mid = 0.5 * (lo + hi);
            if h(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn closed_form_matches_root_finder() {
        let fit = BktFit { prefactor: 0.7, barrier: 1.9, g_c: 0.9165, residual: 0.0 };
        for &t_q in &[1.0, 10.0, 100.0, 1000.0, 10_000.0] {
            let g_f = 1.2;
            let res = freeze_out_bkt(&fit, g_f, t_q).unwrap();
            let u_oracle = bkt_offset_oracle(fit.prefactor, fit.barrier, g_f, t_q);
            assert_relative_eq!(res.critical_offset, u_oracle, max_relative = 1e-9);
            assert_relative_eq!(res.t_f, t_q / g_f * u_oracle, max_relative = 1e-9);
            assert!(res.residual < 1e-10);
            assert_eq!(res.g_at_freeze, Some(fit.g_c - res.critical_offset));
        }
    }

    #[test]
    fn freeze_out_time_grows_sublinearly_with_ramp_time() {
        // t̂ grows with t_Q, while the offset û shrinks
        let fit = BktFit { prefactor: 0.5, barrier: 2.0, g_c: 0.9, residual: 0.0 };
        let mut last_tf = 0.0;
        let mut last_u = f64::INFINITY;
        for k in 0..8 {
            let t_q = 10f64.powi(k);
            let res = freeze_out_bkt(&fit, 1.1, t_q).unwrap();
            assert!(res.t_f > last_tf);
            assert!(res.critical_offset < last_u);
            last_tf = res.t_f;
            last_u = res.critical_offset;
        }
    }

    #[test]
    fn power_law_closed_form() {
        // nu*z = 1: t̂ = sqrt(τ₀ t_Q/g_f)
        let kz = SecondOrderKz { tau_0: 0.35, nu: 1.0, z: 1.0, d: 1 };
        let res = freeze_out_power(&kz, 2.0, 50.0).unwrap();
        assert_relative_eq!(res.t_f, (0.35f64 * 50.0 / 2.0).sqrt(), max_relative = 1e-14);
        assert!(res.residual < 1e-12);
        assert!(res.g_at_freeze.is_none());
        assert_relative_eq!(res.critical_offset, 2.0 / 50.0 * res.t_f, max_relative = 1e-14);
    }

    #[test]
    fn parameter_validation() {
        let fit = BktFit { prefactor: 1.0, barrier: 1.0, g_c: 1.0, residual: 0.0 };
        assert!(freeze_out_bkt(&fit, 0.0, 1.0).is_err());
        assert!(freeze_out_bkt(&fit, 1.0, -1.0).is_err());
        let bad = BktFit { prefactor: -1.0, ..fit };
        assert!(freeze_out_bkt(&bad, 1.0, 1.0).is_err());

        let kz = SecondOrderKz { tau_0: 1.0, nu: 0.5, z: 2.0, d: 1 };
        assert!(freeze_out_power(&kz, 1.0, 0.0).is_err());
        let bad = SecondOrderKz { z: -2.0, ..kz };
        assert!(freeze_out_power(&bad, 1.0, 1.0).is_err());
    }
}
