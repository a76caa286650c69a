//! Closed forms and numerical quadratures for the limit constants of the
//! long-range navigation model: progress-tail level, sub-critical step-norm
//! limit, the scaled-progress tail at the critical exponent, its mean, and
//! the log-log contraction rate.
//!
//! The edge-probability profile is `f(t) = min(1, c t^-beta)`. Radial
//! integrals of `f` have piecewise closed forms (see
//! [`crate::navigators::ModelParams`]); everything angular goes through
//! adaptive quadrature. Two independent schemes (adaptive Simpson and
//! Gauss-Kronrod 7-15) are provided and cross-checked in the tests.

use crate::navigators::ModelParams;
use crate::point_process::geometry_constants;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

/// Tolerances and budget for adaptive quadrature.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdiv: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            max_subdiv: 20_000,
        }
    }
}

/// A quadrature value with its error estimate.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct QuadResult {
    pub value: f64,
    pub err_est: f64,
    pub subdivisions: usize,
}

/// Adaptive Simpson with Richardson acceptance on each subinterval.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<QuadResult> {
    struct Ctx<'s, F> {
        f: F,
        spec: &'s QuadratureSpec,
        count: usize,
    }
    fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        ctx: &mut Ctx<F>,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        err_acc: &mut f64,
    ) -> Result<f64> {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = (ctx.f)(lm);
        let frm = (ctx.f)(rm);
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let diff = left + right - whole;
        ctx.count += 1;
        if ctx.count > ctx.spec.max_subdiv {
            return Err(Error::QuadratureNonConvergence(format!(
                "adaptive simpson exceeded {} subdivisions on [{a}, {b}]",
                ctx.spec.max_subdiv
            )));
        }
        if diff.abs() <= 15.0 * tol || (b - a) < 1e-14 * (ctx.spec.rel_tol.max(1.0)) {
            *err_acc += diff.abs() / 15.0;
            return Ok(left + right + diff / 15.0);
        }
        let l = recurse(ctx, a, m, fa, flm, fm, left, 0.5 * tol, err_acc)?;
        let r = recurse(ctx, m, b, fm, frm, fb, right, 0.5 * tol, err_acc)?;
        Ok(l + r)
    }

    if a == b {
        return Ok(QuadResult { value: 0.0, err_est: 0.0, subdivisions: 0 });
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(fa, fm, fb, b - a);
    let tol = spec.abs_tol.max(spec.rel_tol * whole.abs());
    let mut ctx = Ctx { f, spec, count: 0 };
    let mut err = 0.0;
    let value = recurse(&mut ctx, a, b, fa, fm, fb, whole, tol, &mut err)?;
    Ok(QuadResult {
        value,
        err_est: err,
        subdivisions: ctx.count,
    })
}

// Gauss-Kronrod 7-15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

fn gk15_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut kron = WGK[7] * f(c);
    let mut gauss = WG[3] * f(c);
    for i in 0..7 {
        let x = h * XGK[i];
        let fsum = f(c - x) + f(c + x);
        kron += WGK[i] * fsum;
        if i % 2 == 1 {
            gauss += WG[i / 2] * fsum;
        }
    }
    kron *= h;
    gauss *= h;
    (kron, (kron - gauss).abs())
}

/// Globally adaptive Gauss-Kronrod 7-15: repeatedly bisect the interval with
/// the largest error estimate.
pub fn gauss_kronrod<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult { value: 0.0, err_est: 0.0, subdivisions: 0 });
    }
    let mut intervals: Vec<(f64, f64, f64, f64)> = Vec::new();
    let (v, e) = gk15_panel(&f, a, b);
    intervals.push((a, b, v, e));
    for step in 0..spec.max_subdiv {
        let value: f64 = intervals.iter().map(|iv| iv.2).sum();
        let err: f64 = intervals.iter().map(|iv| iv.3).sum();
        if err <= spec.abs_tol.max(spec.rel_tol * value.abs()) {
            return Ok(QuadResult {
                value,
                err_est: err,
                subdivisions: step,
            });
        }
        let worst = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .unwrap();
        let (lo, hi, _, _) = intervals.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // interval at floating-point resolution; keep its estimate
            let (v, _) = gk15_panel(&f, lo, hi);
            intervals.push((lo, hi, v, 0.0));
            continue;
        }
        let (v1, e1) = gk15_panel(&f, lo, mid);
        let (v2, e2) = gk15_panel(&f, mid, hi);
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
    Err(Error::QuadratureNonConvergence(format!(
        "gauss-kronrod exceeded {} subdivisions on [{a}, {b}]",
        spec.max_subdiv
    )))
}

/// sin^{d-2}(theta) weighted by the (d-2)-sphere area: the angular density
/// of directions at polar angle theta from a fixed axis.
fn angular_density(d: usize, omega_dm2: f64, theta: f64) -> f64 {
    if d == 2 {
        omega_dm2
    } else {
        omega_dm2 * theta.sin().powi(d as i32 - 2)
    }
}

/// The two radii at which the ray from the origin at angle `theta` meets the
/// sphere of radius `1-u` centered at distance 1: roots of
/// `t^2 - 2 t cos(theta) + u(2-u) = 0`.
///
/// Requires `u` in (0,1) and `0 <= theta < arcsin(1-u)`; outside that range
/// the ray misses the sphere.
pub fn chord_points(theta: f64, u: f64) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&u) || u == 0.0 {
        return Err(Error::InvalidInput(format!("chord parameter u = {u} outside (0,1)")));
    }
    let rho = 1.0 - u;
    let s = theta.sin();
    if !(0.0..FRAC_PI_2).contains(&theta) || s >= rho {
        return Err(Error::InvalidInput(format!(
            "theta = {theta} beyond arcsin(1-u) = {}: no intersection",
            rho.asin()
        )));
    }
    // (1-u)^2 - sin^2 in product form to avoid cancellation
    let disc = ((rho - s) * (rho + s)).sqrt();
    let c = theta.cos();
    Ok((c - disc, c + disc))
}

/// Mass of the profile over a half-space at distance `t` from the center:
/// `integral over {<y,e1> > t} of f(|y|) dy`. Finite only for beta > d.
pub fn half_space_mass(params: &ModelParams, t: f64, spec: &QuadratureSpec) -> Result<f64> {
    if params.beta <= params.d as f64 {
        return Err(Error::InvalidInput(format!(
            "half-space mass diverges for beta = {} <= d = {}",
            params.beta, params.d
        )));
    }
    if t < 0.0 {
        return Err(Error::InvalidInput("negative half-space offset".into()));
    }
    let (_, _, omega_dm2) = geometry_constants(params.d)?;
    let q = gauss_kronrod(
        |theta| {
            let cosb = theta.cos();
            if cosb <= 0.0 {
                return 0.0;
            }
            angular_density(params.d, omega_dm2, theta) * params.radial_mass_tail(t / cosb)
        },
        0.0,
        FRAC_PI_2,
        spec,
    )?;
    Ok(q.value)
}

/// Mass of the profile centered at distance `x` over the ball B(O, rho):
/// `integral over B(O,rho) of f(|X - y|) dy` with `|X| = x`, `0 <= rho <= x`.
pub fn ball_mass(params: &ModelParams, rho: f64, x: f64, spec: &QuadratureSpec) -> Result<f64> {
    if rho < 0.0 || x <= 0.0 || rho > x {
        return Err(Error::InvalidInput(format!("ball mass needs 0 <= rho <= x, got rho = {rho}, x = {x}")));
    }
    if rho == 0.0 {
        return Ok(0.0);
    }
    let (_, _, omega_dm2) = geometry_constants(params.d)?;
    let rho_hat = rho / x;
    let theta_max = rho_hat.min(1.0).asin();
    let q = gauss_kronrod(
        |theta| {
            let s = theta.sin();
            if s >= rho_hat {
                return 0.0;
            }
            let disc = ((rho_hat - s) * (rho_hat + s)).sqrt();
            let c = theta.cos();
            let a = x * (c - disc);
            let b = x * (c + disc);
            angular_density(params.d, omega_dm2, theta)
                * (params.radial_mass(b) - params.radial_mass(a.max(0.0)))
        },
        0.0,
        theta_max,
        spec,
    )?;
    Ok(q.value)
}

/// Exact one-step law of the toward-origin rule at |X| = x: probability that
/// the chosen neighbor has norm >= rho, i.e. that no neighbor lands in
/// B(O, rho), conditioned on the neighbor set in B(O, x) being nonempty.
pub fn step_norm_tail(params: &ModelParams, x: f64, rho: f64, spec: &QuadratureSpec) -> Result<f64> {
    if !(0.0..=x).contains(&rho) {
        return Err(Error::InvalidInput(format!("step norm tail needs 0 <= rho <= x, got {rho}")));
    }
    let atom_miss = 1.0 - params.f(x);
    let none_rho = atom_miss * (-ball_mass(params, rho, x, spec)?).exp();
    let none_all = atom_miss * (-ball_mass(params, x, x, spec)?).exp();
    Ok((none_rho - none_all) / (1.0 - none_all))
}

/// Exact tail of the directed one-step progress: P(progress > t) for the
/// maximal-progress rule over a fresh environment. Requires beta > d.
pub fn directed_progress_tail(params: &ModelParams, t: f64, spec: &QuadratureSpec) -> Result<f64> {
    let lambda_t = half_space_mass(params, t.max(0.0), spec)?;
    let lambda_0 = half_space_mass(params, 0.0, spec)?;
    Ok((-(-lambda_t).exp_m1()) / (-(-lambda_0).exp_m1()))
}

/// The progress-tail level constant: the reported limit of
/// `t^{beta-d} * P(progress > t)` for beta > d,
/// `K = (2 c omega_{d-2} / (beta - d)) (1 - e^{-Lambda})^{-1}
///      * integral_0^{pi/2} cos^{beta-d} theta dtheta`,
/// with `Lambda = (omega_{d-1}/2) integral_0^inf f(r) r^{d-1} dr`.
/// Both integrals are evaluated by adaptive quadrature; the improper radial
/// integral is truncated where its closed-form tail bound drops below 1e-13.
pub fn progress_tail_constant(params: &ModelParams, spec: &QuadratureSpec) -> Result<f64> {
    let d = params.d as f64;
    let beta = params.beta;
    if beta <= d {
        return Err(Error::InvalidInput(format!("progress tail constant needs beta > d, got beta = {beta}, d = {d}")));
    }
    let (_, omega_dm1, omega_dm2) = geometry_constants(params.d)?;
    // radial mass by quadrature, truncated with a power-law tail bound
    let tail_tol = 1e-13;
    let r_cut = params
        .r0()
        .max((params.c / (tail_tol * (beta - d))).powf(1.0 / (beta - d)));
    let radial = gauss_kronrod(
        |r| params.f(r) * r.powi(params.d as i32 - 1),
        0.0,
        r_cut,
        spec,
    )?;
    let lambda = omega_dm1 / 2.0 * (radial.value + tail_tol);
    let cos_int = gauss_kronrod(|th| th.cos().powf(beta - d), 0.0, FRAC_PI_2, spec)?;
    Ok(2.0 * params.c * omega_dm2 / (beta - d) / (-(-lambda).exp_m1()) * cos_int.value)
}

/// Reported limit tail of the scaled step norm in the sub-critical band
/// d-2 < beta < d: `exp(-4 c omega_{d-2} s^2)`.
pub fn q_limit_tail(params: &ModelParams, s: f64) -> Result<f64> {
    check_subcritical(params)?;
    if s < 0.0 {
        return Err(Error::InvalidInput("negative scaled norm".into()));
    }
    let (_, _, omega_dm2) = geometry_constants(params.d)?;
    Ok((-4.0 * params.c * omega_dm2 * s * s).exp())
}

/// Tail of the small-ball Poisson mass under the same scaling:
/// `exp(-c pi_d s^d)`. The mass of the step-norm profile over
/// B(O, s |X|^alpha) is asymptotically `f(|X|) * pi_d (s |X|^alpha)^d
/// = c pi_d s^d` at `alpha = 1 - (d - beta)/2` in the plane, so this is the
/// tail the simulated scaled step norm concentrates on.
pub fn q_small_ball_tail(params: &ModelParams, s: f64) -> Result<f64> {
    check_subcritical(params)?;
    if s < 0.0 {
        return Err(Error::InvalidInput("negative scaled norm".into()));
    }
    let (pi_d, _, _) = geometry_constants(params.d)?;
    Ok((-params.c * pi_d * s.powi(params.d as i32)).exp())
}

fn check_subcritical(params: &ModelParams) -> Result<()> {
    let d = params.d as f64;
    if params.beta <= d - 2.0 || params.beta >= d {
        return Err(Error::InvalidInput(format!(
            "scaled step-norm limit needs d-2 < beta < d, got beta = {}, d = {d}",
            params.beta
        )));
    }
    Ok(())
}

/// `c * integral over B(O, rho) of |e1 - y|^{-d} dy` for rho in (0, 1),
/// in polar form around the singular point so the radial part integrates to
/// a logarithm of the chord radii.
fn scaled_ball_integral(params: &ModelParams, rho: f64, spec: &QuadratureSpec) -> Result<f64> {
    let (_, _, omega_dm2) = geometry_constants(params.d)?;
    let theta_max = rho.asin();
    let q = gauss_kronrod(
        |theta| {
            let s = theta.sin();
            if s >= rho {
                return 0.0;
            }
            let disc = ((rho - s) * (rho + s)).sqrt();
            let c = theta.cos();
            let a = c - disc;
            let b = c + disc;
            angular_density(params.d, omega_dm2, theta) * (b / a).ln()
        },
        0.0,
        theta_max,
        spec,
    )?;
    Ok(params.c * q.value)
}

/// Tail of the scaled progress at the critical exponent beta = d:
/// `1 - exp(-c integral over B(O, e^{-s}) of |e1 - y|^{-d} dy)`, s > 0.
pub fn f_tilde_tail(params: &ModelParams, s: f64, spec: &QuadratureSpec) -> Result<f64> {
    check_critical(params)?;
    if s <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "scaled-progress tail needs s > 0 (the ball integral diverges at s = 0; the tail is 1 there by convention), got {s}"
        )));
    }
    let i = scaled_ball_integral(params, (-s).exp(), spec)?;
    Ok(-(-i).exp_m1())
}

/// Large-s equivalent of [`f_tilde_tail`]: the ball shrinks onto the origin
/// where the integrand is 1, so the exponent tends to `c pi_d e^{-d s}` and
/// the tail to that same value.
pub fn f_tilde_tail_asymptotic(params: &ModelParams, s: f64) -> f64 {
    let (pi_d, _, _) = geometry_constants(params.d).expect("validated dimension");
    params.c * pi_d * (-(params.d as f64) * s).exp()
}

fn check_critical(params: &ModelParams) -> Result<()> {
    if (params.beta - params.d as f64).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "critical-exponent tail needs beta = d, got beta = {}, d = {}",
            params.beta, params.d
        )));
    }
    Ok(())
}

/// Mean of the scaled progress at beta = d via the tail integral
/// `mu_tilde = integral_0^inf F_tilde(s) ds`, truncated where the
/// closed-form bound on the remainder drops below 1e-10.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MuTilde {
    pub value: f64,
    pub err_est: f64,
    /// upper truncation point of the s-integral
    pub cutoff: f64,
    /// bound on the discarded tail mass
    pub tail_bound: f64,
}

pub fn mu_tilde(params: &ModelParams, spec: &QuadratureSpec) -> Result<MuTilde> {
    check_critical(params)?;
    let d = params.d as f64;
    let (pi_d, _, _) = geometry_constants(params.d)?;
    // F_tilde(s) <= c pi_d e^{-ds} (1 - e^{-s})^{-d}; integrate the bound.
    let tail_bound_from = |s: f64| params.c * pi_d * (1.0 - (-s).exp()).powi(-(params.d as i32)) * (-d * s).exp() / d;
    let mut cutoff = 5.0;
    while tail_bound_from(cutoff) > 0.5e-10 {
        cutoff += 1.0;
    }
    let eps = 1e-12; // F_tilde <= 1, so the head below eps contributes <= eps
    let inner_spec = QuadratureSpec {
        abs_tol: spec.abs_tol.min(1e-11),
        ..*spec
    };
    let q = gauss_kronrod(
        |s| f_tilde_tail(params, s, &inner_spec).expect("tail evaluation inside (0, cutoff]"),
        eps,
        cutoff,
        spec,
    )?;
    let tail_bound = tail_bound_from(cutoff);
    Ok(MuTilde {
        value: q.value + tail_bound / 2.0,
        err_est: q.err_est + tail_bound / 2.0 + eps,
        cutoff,
        tail_bound,
    })
}

/// Hop-count scale in the log-log band: `-1 / ln(1 - (d - beta)/2)` for
/// d-2 < beta < d.
pub fn loglog_limit(d: usize, beta: f64) -> Result<f64> {
    let dd = d as f64;
    if beta <= dd - 2.0 || beta >= dd {
        return Err(Error::InvalidInput(format!(
            "log-log limit needs d-2 < beta < d, got beta = {beta}, d = {d}"
        )));
    }
    let alpha = 1.0 - (dd - beta) / 2.0;
    Ok(-1.0 / alpha.ln())
}

/// One of the model tail curves on a grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailCurve {
    pub kind: TailKind,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailKind {
    ProgressTail,
    QLimit,
    FTilde,
}

impl TailCurve {
    pub fn progress_tail(params: &ModelParams, grid: &[f64], spec: &QuadratureSpec) -> Result<Self> {
        let k = progress_tail_constant(params, spec)?;
        let e = params.d as f64 - params.beta;
        let points = grid
            .iter()
            .map(|&t| (t, (k * t.powf(e)).min(1.0)))
            .collect();
        Ok(TailCurve {
            kind: TailKind::ProgressTail,
            points,
        })
    }

    pub fn q_limit(params: &ModelParams, grid: &[f64]) -> Result<Self> {
        let points = grid
            .iter()
            .map(|&s| Ok((s, q_limit_tail(params, s)?)))
            .collect::<Result<_>>()?;
        Ok(TailCurve {
            kind: TailKind::QLimit,
            points,
        })
    }

    pub fn f_tilde(params: &ModelParams, grid: &[f64], spec: &QuadratureSpec) -> Result<Self> {
        let points = grid
            .iter()
            .map(|&s| Ok((s, f_tilde_tail(params, s, spec)?)))
            .collect::<Result<_>>()?;
        Ok(TailCurve {
            kind: TailKind::FTilde,
            points,
        })
    }

    /// Range and monotonicity checks for an emitted grid.
    pub fn validate(&self) -> Result<()> {
        let mut prev = f64::INFINITY;
        for &(t, v) in &self.points {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidInput(format!("tail value {v} at {t} outside [0,1]")));
            }
            if v > prev + 1e-12 {
                return Err(Error::InvalidInput(format!("tail curve increases at {t}")));
            }
            prev = v;
        }
        Ok(())
    }

    /// CSV: `t,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,value\n");
        for (t, v) in &self.points {
            out.push_str(&format!("{t},{v}\n"));
        }
        out
    }
}

/// Constants block emitted by the `analytic` CLI subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstantsReport {
    pub d: usize,
    pub beta: f64,
    pub c: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub progress_tail_constant: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_tilde: Option<MuTilde>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loglog_limit: Option<f64>,
}

impl ConstantsReport {
    /// Evaluate whichever constants the (d, beta) regime admits.
    pub fn compute(params: &ModelParams, spec: &QuadratureSpec) -> Result<Self> {
        let d = params.d as f64;
        Ok(ConstantsReport {
            d: params.d,
            beta: params.beta,
            c: params.c,
            progress_tail_constant: if params.beta > d {
                Some(progress_tail_constant(params, spec)?)
            } else {
                None
            },
            mu_tilde: if (params.beta - d).abs() < 1e-9 {
                Some(mu_tilde(params, spec)?)
            } else {
                None
            },
            loglog_limit: loglog_limit(params.d, params.beta).ok(),
        })
    }
}

/// Geometric grid from `lo` to `hi` with `n` points.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let step = (hi / lo).powf(1.0 / (n as f64 - 1.0));
    (0..n).map(|i| lo * step.powi(i as i32)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::navigators::ModelParams;
    use crate::rng::stream;
    use rand::Rng;

    fn spec() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    /// Romberg integration: the independent reference integrator for this
    /// module's quadratures.
    fn romberg<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, levels: usize) -> f64 {
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(levels);
        let mut h = b - a;
        let mut sum = 0.5 * (f(a) + f(b));
        rows.push(vec![h * sum]);
        for k in 1..levels {
            let n = 1usize << k;
            h *= 0.5;
            for i in (1..n).step_by(2) {
                sum += f(a + i as f64 * h);
            }
            let mut row = vec![h * sum];
            let prev = &rows[k - 1];
            for m in 1..=k {
                let pow = 4f64.powi(m as i32);
                let v = (pow * row[m - 1] - prev[m - 1]) / (pow - 1.0);
                row.push(v);
            }
            rows.push(row);
        }
        *rows.last().unwrap().last().unwrap()
    }

    #[test]
    fn quadrature_schemes_agree() {
        let cases: Vec<(Box<dyn Fn(f64) -> f64>, f64, f64)> = vec![
            (Box::new(|x: f64| x.cos().powi(2)), 0.0, FRAC_PI_2),
            (Box::new(|x: f64| (-x * x).exp()), 0.0, 6.0),
            (Box::new(|x: f64| x.sqrt()), 0.0, 1.0),
        ];
        for (f, a, b) in cases {
            let s = adaptive_simpson(&f, a, b, &spec()).unwrap();
            let g = gauss_kronrod(&f, a, b, &spec()).unwrap();
            let tol = 10.0 * (s.err_est + g.err_est) + 1e-12;
            assert!(
                (s.value - g.value).abs() <= tol,
                "simpson {} vs gk {} (tol {tol})",
                s.value,
                g.value
            );
        }
    }

    #[test]
    fn cos_power_integral() {
        // integral_0^{pi/2} cos^2 = pi/4
        let g = gauss_kronrod(|x| x.cos().powi(2), 0.0, FRAC_PI_2, &spec()).unwrap();
        assert!((g.value - PI / 4.0).abs() < 1e-10);
    }

    #[test]
    fn chord_points_at_zero_angle() {
        let (a, b) = chord_points(0.0, 0.3).unwrap();
        assert!((a - 0.3).abs() < 1e-14);
        assert!((b - 1.7).abs() < 1e-14);
    }

    #[test]
    fn chord_points_vieta_product() {
        let mut r = stream(1, "chord", 0);
        for _ in 0..200 {
            let u: f64 = r.gen_range(0.01..0.99);
            let theta = r.gen_range(0.0..(1.0 - u).asin() * 0.999);
            let (a, b) = chord_points(theta, u).unwrap();
            assert!(a <= b);
            assert!((a * b - u * (2.0 - u)).abs() < 1e-12);
        }
    }

    #[test]
    fn chord_points_domain_errors() {
        assert!(chord_points(0.9, 0.5).is_err()); // arcsin(0.5) ~ 0.52
        assert!(chord_points(0.1, 1.0).is_err());
        assert!(chord_points(0.1, 0.0).is_err());
    }

    #[test]
    fn half_space_mass_matches_closed_form() {
        // beta = 4, d = 2: integral over {y1 > t} of |y|^{-4} dy = pi/(4 t^2)
        // for t >= 1 (profile cap inactive beyond radius 1).
        let p = ModelParams::new(2, 4.0, 1.0).unwrap();
        for t in [1.5, 3.0, 10.0] {
            let m = half_space_mass(&p, t, &spec()).unwrap();
            let exact = PI / (4.0 * t * t);
            assert!((m - exact).abs() < 1e-8 * exact, "t={t}: {m} vs {exact}");
        }
    }

    #[test]
    fn ball_mass_constant_profile_is_volume() {
        // huge c makes f = 1 on the whole ball: mass = pi rho^2
        let p = ModelParams::new(2, 4.0, 1e12).unwrap();
        let m = ball_mass(&p, 2.0, 5.0, &spec()).unwrap();
        assert!((m - PI * 4.0).abs() < 1e-7, "{m}");
    }

    #[test]
    fn ball_mass_matches_monte_carlo() {
        // d=2, beta=1, c=1, |X| = 100, rho = 30: MC integration oracle
        let p = ModelParams::new(2, 1.0, 1.0).unwrap();
        let (rho, x) = (30.0, 100.0);
        let m = ball_mass(&p, rho, x, &spec()).unwrap();
        let mut r = stream(2, "ball-mass-mc", 0);
        let n = 2_000_000usize;
        let mut acc = 0.0;
        let mut acc2 = 0.0;
        for _ in 0..n {
            // uniform in B(O, rho)
            let (mut px, mut py);
            loop {
                px = r.gen_range(-1.0f64..1.0);
                py = r.gen_range(-1.0f64..1.0);
                if px * px + py * py < 1.0 {
                    break;
                }
            }
            let (px, py) = (px * rho, py * rho);
            let dist = ((px - x) * (px - x) + py * py).sqrt();
            let v = p.f(dist);
            acc += v;
            acc2 += v * v;
        }
        let area = PI * rho * rho;
        let mc = acc / n as f64 * area;
        let var = (acc2 / n as f64 - (acc / n as f64).powi(2)) / n as f64;
        let se = var.sqrt() * area;
        assert!((m - mc).abs() < 3.0 * se + 1e-9, "quad {m} vs mc {mc} (se {se})");
    }

    #[test]
    fn progress_tail_constant_values() {
        // d=2, beta=5, c=1: Lambda = pi(1/2 + 1/3), cos^3 integral = 2/3
        let p = ModelParams::new(2, 5.0, 1.0).unwrap();
        let k = progress_tail_constant(&p, &spec()).unwrap();
        let lambda = PI * (0.5 + 1.0 / 3.0);
        let expect = 2.0 * 2.0 / 3.0 / (1.0 - (-lambda).exp()) * (2.0 / 3.0);
        assert!((k - expect).abs() < 1e-8, "{k} vs {expect}");
        assert!(progress_tail_constant(&ModelParams::new(2, 2.0, 1.0).unwrap(), &spec()).is_err());
    }

    #[test]
    fn progress_tail_constant_vs_romberg() {
        // small-c regression against the Romberg reference
        let p = ModelParams::new(2, 4.0, 0.01).unwrap();
        let k = progress_tail_constant(&p, &spec()).unwrap();
        let r_cut = 1e5;
        let radial = romberg(|r| p.f(r) * r, 1e-12, r_cut, 14);
        let lambda = PI * radial;
        let cosint = romberg(|t| t.cos().powi(2), 0.0, FRAC_PI_2, 12);
        let expect = 2.0 * p.c * 2.0 / 2.0 / (1.0 - (-lambda).exp()) * cosint;
        assert!((k - expect).abs() < 1e-6 * expect, "{k} vs {expect}");
    }

    #[test]
    fn directed_tail_level_reaches_constant() {
        // t^{beta-d} * exact tail must flatten to half the reported constant
        // in the plane: the half-space chord measure carries density
        // omega_{d-2} sin^{d-2}, not 2 omega_{d-2}.
        let p = ModelParams::new(2, 5.0, 1.0).unwrap();
        let k = progress_tail_constant(&p, &spec()).unwrap();
        let t = 1e4;
        let level = t.powf(3.0) * directed_progress_tail(&p, t, &spec()).unwrap();
        assert!(
            (level - 0.5 * k).abs() < 1e-3 * k,
            "level {level} vs k/2 = {}",
            0.5 * k
        );
    }

    #[test]
    fn q_limit_tail_values() {
        let p = ModelParams::new(2, 1.0, 1.0).unwrap();
        assert!((q_limit_tail(&p, 0.0).unwrap() - 1.0).abs() < 1e-15);
        let v = q_limit_tail(&p, 0.5).unwrap();
        assert!((v - (-2.0f64).exp()).abs() < 1e-12, "{v}");
        assert!(q_limit_tail(&ModelParams::new(2, 3.0, 1.0).unwrap(), 0.5).is_err());
    }

    #[test]
    fn q_small_ball_tail_matches_ball_mass_limit() {
        // exp(-ball_mass(s x^{1/2}; x)) tends to the small-ball tail as x
        // grows (d = 2, beta = 1, alpha = 1/2).
        let p = ModelParams::new(2, 1.0, 1.0).unwrap();
        for s in [0.5, 1.0, 1.5] {
            let x = 1e8;
            let lam = ball_mass(&p, s * x.sqrt(), x, &spec()).unwrap();
            let lim = q_small_ball_tail(&p, s).unwrap();
            assert!(
                ((-lam).exp() - lim).abs() < 2e-4,
                "s={s}: exp(-{lam}) vs {lim}"
            );
        }
    }

    #[test]
    fn f_tilde_tail_monotone_and_bounded() {
        let p = ModelParams::new(2, 2.0, 1.0).unwrap();
        let grid = geometric_grid(0.01, 10.0, 40);
        let curve = TailCurve::f_tilde(&p, &grid, &spec()).unwrap();
        curve.validate().unwrap();
        assert!(f_tilde_tail(&p, 0.0, &spec()).is_err());
        assert!(f_tilde_tail(&p, -1.0, &spec()).is_err());
    }

    #[test]
    fn f_tilde_tail_asymptotic_ratio() {
        // at s = 8 the tail equals its small-ball equivalent within 1%
        let p = ModelParams::new(2, 2.0, 1.0).unwrap();
        let v = f_tilde_tail(&p, 8.0, &spec()).unwrap();
        let a = f_tilde_tail_asymptotic(&p, 8.0);
        assert!((v / a - 1.0).abs() < 0.01, "ratio {}", v / a);
    }

    #[test]
    fn f_tilde_ball_integral_matches_monte_carlo() {
        // d=2, c=1, s=1: MC integration of the singular ball integral
        let p = ModelParams::new(2, 2.0, 1.0).unwrap();
        let s = 1.0f64;
        let rho = (-s).exp();
        let quad = scaled_ball_integral(&p, rho, &spec()).unwrap();
        let mut r = stream(3, "ftilde-mc", 0);
        let n = 10_000_000usize;
        let mut acc = 0.0;
        let mut acc2 = 0.0;
        for _ in 0..n {
            let (mut px, mut py);
            loop {
                px = r.gen_range(-1.0f64..1.0);
                py = r.gen_range(-1.0f64..1.0);
                if px * px + py * py < 1.0 {
                    break;
                }
            }
            let (px, py) = (px * rho, py * rho);
            let d2 = (px - 1.0) * (px - 1.0) + py * py;
            let v = 1.0 / d2;
            acc += v;
            acc2 += v * v;
        }
        let area = PI * rho * rho;
        let mc = acc / n as f64 * area;
        let var = (acc2 / n as f64 - (acc / n as f64).powi(2)) / n as f64;
        let se = var.sqrt() * area;
        assert!((quad - mc).abs() < 3.0 * se, "quad {quad} vs mc {mc} (se {se})");
    }

    #[test]
    fn mu_tilde_dual_scheme_and_monotone_in_c() {
        let p1 = ModelParams::new(2, 2.0, 1.0).unwrap();
        let mt = mu_tilde(&p1, &spec()).unwrap();
        assert!(mt.value.is_finite() && mt.value > 0.0);
        // independent scheme: adaptive Simpson over the same integrand
        let simpson = adaptive_simpson(
            |s| f_tilde_tail(&p1, s, &spec()).unwrap(),
            1e-12,
            mt.cutoff,
            &spec(),
        )
        .unwrap();
        assert!(
            (mt.value - (simpson.value + mt.tail_bound / 2.0)).abs() < 1e-8,
            "gk {} vs simpson {}",
            mt.value,
            simpson.value
        );
        // larger c means heavier neighbor mass near the origin: mu grows
        let mut prev = 0.0;
        for c in [0.5, 1.0, 2.0] {
            let p = ModelParams::new(2, 2.0, c).unwrap();
            let v = mu_tilde(&p, &spec()).unwrap().value;
            assert!(v > prev, "mu_tilde not increasing at c = {c}");
            prev = v;
        }
    }

    #[test]
    fn loglog_limit_values() {
        assert!((loglog_limit(2, 1.0).unwrap() - 1.0 / 2f64.ln()).abs() < 1e-12);
        assert!((loglog_limit(3, 1.5).unwrap() - 1.0 / 4f64.ln()).abs() < 1e-12);
        assert!(loglog_limit(2, 2.0).is_err());
        assert!(loglog_limit(2, 0.0).is_err());
        // alpha -> 1 blows up
        assert!(loglog_limit(2, 1.999999).unwrap() > 1e5);
    }

    #[test]
    fn tail_curves_validate() {
        let p = ModelParams::new(2, 5.0, 1.0).unwrap();
        let grid = geometric_grid(1.0, 100.0, 30);
        let c = TailCurve::progress_tail(&p, &grid, &spec()).unwrap();
        c.validate().unwrap();
        let csv = c.to_csv();
        assert!(csv.starts_with("t,value\n"));
        let p2 = ModelParams::new(2, 1.0, 1.0).unwrap();
        TailCurve::q_limit(&p2, &geometric_grid(0.01, 3.0, 20))
            .unwrap()
            .validate()
            .unwrap();
    }
}
