//! Curve fitters for relaxation and quench observables.
//!
//! All fitters are deterministic: initialization comes from closed-form
//! linearizations rather than random restarts, and the nonlinear refinement
//! is a plain Levenberg-Marquardt loop with analytic Jacobians.

use super::{AnalysisError, AnalysisResult, BktFit, PowerLawFit, StretchedFit};
use crate::protocols::TimeSeries;

/// Fit y(t) = a·exp(−(t/τ)^β) to the samples of `series` that fall inside
/// `window` (inclusive). All values in the window must be positive; the fit
/// runs on (ln a, ln τ, ln β) so the returned parameters are positive by
/// construction.
pub fn fit_stretched(series: &TimeSeries, window: (f64, f64)) -> AnalysisResult<StretchedFit> {
    let (w0, w1) = window;
    if !(w0 < w1) || !w0.is_finite() || !w1.is_finite() {
        return Err(AnalysisError::Window(format!(
            "window must satisfy t_min < t_max, got ({w0}, {w1})"
        )));
    }
    let mut ts = Vec::new();
    let mut ys = Vec::new();
    for (&t, &y) in series.times.iter().zip(&series.values) {
        if t >= w0 && t <= w1 {
            if !(y > 0.0) {
                return Err(AnalysisError::Window(format!(
                    "non-positive value {y} at t = {t} inside the fit window"
                )));
            }
            ts.push(t);
            ys.push(y);
        }
    }
    if ts.len() < 4 {
        return Err(AnalysisError::Window(format!(
            "need at least 4 samples in the window, found {}",
            ts.len()
        )));
    }

    // Initialization: pick a trial amplitude slightly above the data, then
    // ln ln(a0/y) is linear in ln t with slope β and intercept −β ln τ.
    let y_max = ys.iter().cloned().fold(f64::MIN, f64::max);
    let a0 = 1.05 * y_max;
    let mut lx = Vec::new();
    let mut lz = Vec::new();
    for (&t, &y) in ts.iter().zip(&ys) {
        if t > 0.0 {
            lx.push(t.ln());
            lz.push((a0 / y).ln().ln());
        }
    }
    if lx.len() < 2 {
        return Err(AnalysisError::Window(
            "need at least 2 samples at t > 0 to initialize the fit".into(),
        ));
    }
    let (slope, intercept, _, sxx) = ols(&lx, &lz);
    let beta0 = if sxx > 0.0 { slope.clamp(0.05, 10.0) } else { 1.0 };
    let t_mid = ts[ts.len() / 2].max(1e-12);
    let tau0 = (-intercept / beta0).exp().clamp(1e-3 * t_mid, 1e3 * t_mid);

    let p0 = [a0.ln(), tau0.ln(), beta0.ln()];
    let (p, sse, iters) = lm_stretched(&ts, &ys, p0)?;
    let fit = StretchedFit {
        amplitude: p[0].exp(),
        tau: p[1].exp(),
        beta: p[2].exp(),
        fit_window: window,
        residual: (sse / ts.len() as f64).sqrt(),
    };
    if !(fit.beta > 1e-3 && fit.beta < 50.0) {
        return Err(AnalysisError::NonConvergence(format!(
            "stretching exponent ran away (β = {:e} after {iters} iterations)",
            fit.beta
        )));
    }
    Ok(fit)
}

/// Residuals and Jacobian of the stretched exponential in log-parameters
/// p = (ln a, ln τ, ln β).
fn stretched_eval(ts: &[f64], ys: &[f64], p: [f64; 3]) -> (Vec<f64>, Vec<[f64; 3]>, f64) {
    let (a, beta) = (p[0].exp(), p[2].exp());
    let mut r = Vec::with_capacity(ts.len());
    let mut jac = Vec::with_capacity(ts.len());
    let mut sse = 0.0;
    for (&t, &y) in ts.iter().zip(ys) {
        let (q, l) = if t > 0.0 {
            let l = t.ln() - p[1];
            ((beta * l).min(700.0).exp(), l)
        } else {
            (0.0, 0.0)
        };
        let m = a * (-q).exp();
        let ri = m - y;
        sse += ri * ri;
        r.push(ri);
        if q > 300.0 {
            // model and its derivatives have underflowed to zero here
            jac.push([0.0, 0.0, 0.0]);
        } else {
            jac.push([m, m * beta * q, -m * q * l * beta]);
        }
    }
    (r, jac, sse)
}

fn lm_stretched(
    ts: &[f64],
    ys: &[f64],
    p0: [f64; 3],
) -> AnalysisResult<([f64; 3], f64, usize)> {
    let mut p = p0;
    let (mut r, mut jac, mut sse) = stretched_eval(ts, ys, p);
    let mut lambda = 1e-3;
    for iter in 0..200 {
        let mut ata = [[0.0f64; 3]; 3];
        let mut atr = [0.0f64; 3];
        for (ri, ji) in r.iter().zip(&jac) {
            for a in 0..3 {
                atr[a] += ji[a] * ri;
                for b in 0..3 {
                    ata[a][b] += ji[a] * ji[b];
                }
            }
        }
        let grad_small = atr.iter().all(|g| g.abs() <= 1e-12 * (1.0 + sse));
        if grad_small {
            return Ok((p, sse, iter));
        }
        let mut improved = false;
        for _ in 0..40 {
            let mut m = ata;
            for d in 0..3 {
                m[d][d] *= 1.0 + lambda;
                // keep the system solvable when a column of the Jacobian dies
                m[d][d] += 1e-300;
            }
            let rhs = [-atr[0], -atr[1], -atr[2]];
            let Some(delta) = solve3(&m, &rhs) else {
                lambda *= 10.0;
                continue;
            };
            let p_try = [p[0] + delta[0], p[1] + delta[1], p[2] + delta[2]];
            let (r_t, j_t, sse_t) = stretched_eval(ts, ys, p_try);
            if sse_t.is_finite() && sse_t <= sse {
                let rel_drop = (sse - sse_t) / sse.max(1e-300);
                let tiny_step = delta.iter().all(|d| d.abs() < 1e-13);
                p = p_try;
                r = r_t;
                jac = j_t;
                sse = sse_t;
                lambda = (lambda / 3.0).max(1e-14);
                improved = true;
                if rel_drop < 1e-15 || tiny_step {
                    return Ok((p, sse, iter));
                }
                break;
            }
            lambda *= 4.0;
            if lambda > 1e14 {
                break;
            }
        }
        if !improved {
            // no downhill direction left at any damping: converged to the
            // floating-point floor of this basin
            return Ok((p, sse, iter));
        }
    }
    Err(AnalysisError::NonConvergence(format!(
        "Levenberg-Marquardt exhausted 200 iterations (sse = {sse:e})"
    )))
}

fn solve3(m: &[[f64; 3]; 3], b: &[f64; 3]) -> Option<[f64; 3]> {
    let mut a = *m;
    let mut x = *b;
    let mut perm = [0usize, 1, 2];
    for col in 0..3 {
        let piv = (col..3)
            .max_by(|&i, &j| a[perm[i]][col].abs().total_cmp(&a[perm[j]][col].abs()))?;
        perm.swap(col, piv);
        let pv = a[perm[col]][col];
        if pv.abs() < 1e-300 {
            return None;
        }
        for row in (col + 1)..3 {
            let f = a[perm[row]][col] / pv;
            for k in col..3 {
                a[perm[row]][k] -= f * a[perm[col]][k];
            }
            x[perm[row]] -= f * x[perm[col]];
        }
    }
    let mut out = [0.0f64; 3];
    for col in (0..3).rev() {
        let mut s = x[perm[col]];
        for k in (col + 1)..3 {
            s -= a[perm[col]][k] * out[k];
        }
        out[col] = s / a[perm[col]][col];
    }
    out.iter().all(|v| v.is_finite()).then_some(out)
}

/// Ordinary least squares y = slope·x + intercept.
/// Returns (slope, intercept, sse, centered second moment of x).
fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64, f64, f64) {
    let n = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - xbar) * (x - xbar);
        sxy += (x - xbar) * (y - ybar);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = ybar - slope * xbar;
    let mut sse = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        let r = slope * x + intercept - y;
        sse += r * r;
    }
    (slope, intercept, sse, sxx)
}

/// Fit τ(g) = A·exp(B/√(g_c − g)) to `points` = [(g, τ)], profiling the
/// sum of squared ln τ residuals over g_c and solving the remaining linear
/// problem exactly at each candidate.
pub fn fit_bkt(points: &[(f64, f64)]) -> AnalysisResult<BktFit> {
    let (gs, ltaus) = validate_bkt_points(points)?;
    let g_max = gs.iter().cloned().fold(f64::MIN, f64::max);
    let g_min = gs.iter().cloned().fold(f64::MAX, f64::min);
    let span = (g_max - g_min).max(0.05 * g_max.abs()).max(1e-6);

    // coarse log-spaced scan of the profile, then golden-section refinement
    let sse_at = |gc: f64| ols_bkt(&gs, &ltaus, gc).2;
    let n_scan = 46;
    let mut best = (f64::INFINITY, 0usize);
    let cand: Vec<f64> = (0..n_scan)
        .map(|k| g_max + span * 10f64.powf(-8.0 + 9.0 * k as f64 / (n_scan - 1) as f64))
        .collect();
    for (i, &gc) in cand.iter().enumerate() {
        let s = sse_at(gc);
        if s < best.0 {
            best = (s, i);
        }
    }
    let lo = if best.1 == 0 { g_max + span * 1e-9 } else { cand[best.1 - 1] };
    let hi = if best.1 == n_scan - 1 { cand[n_scan - 1] * 10.0 } else { cand[best.1 + 1] };
    let g_c = golden_min(sse_at, lo, hi, 200);

    let (slope, intercept, sse) = ols_bkt(&gs, &ltaus, g_c);
    if !(slope > 0.0) {
        return Err(AnalysisError::NonConvergence(format!(
            "barrier constant came out non-positive (B = {slope:e}); \
             data are not consistent with a diverging relaxation time"
        )));
    }
    Ok(BktFit {
        prefactor: intercept.exp(),
        barrier: slope,
        g_c,
        residual: (sse / gs.len() as f64).sqrt(),
    })
}

/// Same model as [`fit_bkt`] with the critical coupling pinned externally;
/// only the linear part (A, B) is fitted.
pub fn fit_bkt_pinned(points: &[(f64, f64)], g_c: f64) -> AnalysisResult<BktFit> {
    let (gs, ltaus) = validate_bkt_points(points)?;
    let g_max = gs.iter().cloned().fold(f64::MIN, f64::max);
    if !(g_c > g_max) {
        return Err(AnalysisError::Parameter(format!(
            "pinned critical coupling {g_c} must exceed every sampled coupling (max {g_max})"
        )));
    }
    let (slope, intercept, sse) = ols_bkt(&gs, &ltaus, g_c);
    if !(slope > 0.0) {
        return Err(AnalysisError::NonConvergence(format!(
            "barrier constant came out non-positive (B = {slope:e}) at pinned g_c = {g_c}"
        )));
    }
    Ok(BktFit {
        prefactor: intercept.exp(),
        barrier: slope,
        g_c,
        residual: (sse / gs.len() as f64).sqrt(),
    })
}

fn validate_bkt_points(points: &[(f64, f64)]) -> AnalysisResult<(Vec<f64>, Vec<f64>)> {
    if points.len() < 4 {
        return Err(AnalysisError::Degenerate(format!(
            "divergence fit needs at least 4 points, got {}",
            points.len()
        )));
    }
    let mut gs = Vec::with_capacity(points.len());
    let mut ltaus = Vec::with_capacity(points.len());
    for &(g, tau) in points {
        if !g.is_finite() || !(tau > 0.0) || !tau.is_finite() {
            return Err(AnalysisError::Degenerate(format!(
                "divergence fit needs finite g and positive τ, got ({g}, {tau})"
            )));
        }
        gs.push(g);
        ltaus.push(tau.ln());
    }
    let mut sorted = gs.clone();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    if sorted.len() < 3 {
        return Err(AnalysisError::Degenerate(
            "divergence fit needs at least 3 distinct couplings".into(),
        ));
    }
    Ok((gs, ltaus))
}

/// Linear part of the divergence fit at fixed g_c: regress ln τ on
/// s = (g_c − g)^(−1/2). Returns (slope = B, intercept = ln A, sse).
fn ols_bkt(gs: &[f64], ltaus: &[f64], g_c: f64) -> (f64, f64, f64) {
    let ss: Vec<f64> = gs.iter().map(|&g| 1.0 / (g_c - g).sqrt()).collect();
    let (slope, intercept, sse, _) = ols(&ss, ltaus);
    (slope, intercept, sse)
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> f64 {
    const R: f64 = 0.618_033_988_749_894_9;
    let mut c = b - R * (b - a);
    let mut d = a + R * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - R * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + R * (b - a);
            fd = f(d);
        }
        if (b - a).abs() <= 1e-15 * b.abs().max(1.0) {
            break;
        }
    }
    0.5 * (a + b)
}

/// Fit y = amplitude·x^(−exponent) by ordinary least squares in log-log
/// space, reporting the OLS standard error of the exponent.
pub fn fit_powerlaw(points: &[(f64, f64)]) -> AnalysisResult<PowerLawFit> {
    if points.len() < 3 {
        return Err(AnalysisError::Degenerate(format!(
            "power-law fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    let mut lx = Vec::with_capacity(points.len());
    let mut ly = Vec::with_capacity(points.len());
    for &(x, y) in points {
        if !(x > 0.0) || !(y > 0.0) || !x.is_finite() || !y.is_finite() {
            return Err(AnalysisError::Degenerate(format!(
                "power-law fit requires strictly positive finite coordinates, got ({x}, {y})"
            )));
        }
        lx.push(x.ln());
        ly.push(y.ln());
    }
    let (slope, intercept, sse, sxx) = ols(&lx, &ly);
    if sxx <= 1e-24 {
        return Err(AnalysisError::Degenerate(
            "power-law fit needs at least 2 distinct abscissae".into(),
        ));
    }
    let n = points.len() as f64;
    Ok(PowerLawFit {
        exponent: -slope,
        amplitude: intercept.exp(),
        exponent_stderr: (sse / (n - 2.0) / sxx).sqrt(),
        residual: (sse / n).sqrt(),
    })
}
