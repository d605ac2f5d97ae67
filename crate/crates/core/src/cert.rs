//! Certification of tracker parameters.
//!
//! For a quadratic with curvature `lambda` the error dynamics have the
//! characteristic polynomial
//!
//! ```text
//! chi(z) = z^2 + (lambda alpha - 2) z + (1 - lambda gamma)
//! ```
//!
//! The worst-case root modulus over `lambda in [m, L]` is the R-convergence
//! rate. Roots inside `|z| < rho` correspond to coefficient pairs inside the
//! triangle `T_rho` with vertices `(-2 rho, rho^2)`, `(2 rho, rho^2)`,
//! `(0, -rho^2)`. Global convergence over the whole sector class follows from
//! the discrete circle criterion: `chi` at `lambda = m` is Schur and
//!
//! ```text
//! H0(z) = (1 + L G0(z)) / (1 + m G0(z))
//! ```
//!
//! is strictly positive real.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sector::SectorBounds;
use crate::tracker::TrackerParams;

/// Default number of points in the `lambda` sweep.
pub const RATE_GRID: usize = 2001;
/// Default number of intervals on `[0, pi]` for the SPR sweep.
pub const SPR_GRID: usize = 4096;
/// Absolute tolerance for boundary classification in the coefficient plane.
pub const BOUNDARY_TOLERANCE: f64 = 1e-12;
/// Schur strictness: all roots must satisfy `|z| <= 1 - SCHUR_MARGIN`.
pub const SCHUR_MARGIN: f64 = 1e-9;
/// Below this modulus a transfer-function denominator counts as a pole.
pub const POLE_TOLERANCE: f64 = 1e-14;

/// `chi(z) = z^2 + a1 z + a2` at sector gain `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharPolyCoeffs {
    pub a1: f64,
    pub a2: f64,
    pub lambda: f64,
}

impl CharPolyCoeffs {
    pub fn new(a1: f64, a2: f64) -> Self {
        Self {
            a1,
            a2,
            lambda: f64::NAN,
        }
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        z * z + z * self.a1 + self.a2
    }

    /// Both roots; real roots come first-larger-magnitude first.
    pub fn roots(&self) -> [Complex64; 2] {
        let (a1, a2) = (self.a1, self.a2);
        let disc = a1 * a1 - 4.0 * a2;
        if disc >= 0.0 {
            // avoid cancellation: q has the larger magnitude
            let q = -0.5 * (a1 + a1.signum() * disc.sqrt());
            let q = if a1 == 0.0 { 0.5 * disc.sqrt() } else { q };
            let other = if q == 0.0 { 0.0 } else { a2 / q };
            [Complex64::new(q, 0.0), Complex64::new(other, 0.0)]
        } else {
            let re = -0.5 * a1;
            let im = 0.5 * (-disc).sqrt();
            [Complex64::new(re, im), Complex64::new(re, -im)]
        }
    }
}

pub fn char_poly(params: &TrackerParams, lambda: f64) -> CharPolyCoeffs {
    CharPolyCoeffs {
        a1: -2.0 + lambda * params.alpha,
        a2: 1.0 - lambda * params.gamma,
        lambda,
    }
}

/// Largest root modulus of `z^2 + a1 z + a2`.
pub fn spectral_radius(coeffs: &CharPolyCoeffs) -> f64 {
    let disc = coeffs.a1 * coeffs.a1 - 4.0 * coeffs.a2;
    if disc < 0.0 {
        // complex pair: |z|^2 = a2 > 0
        coeffs.a2.sqrt()
    } else {
        let [r1, r2] = coeffs.roots();
        r1.re.abs().max(r2.re.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub rate: f64,
    /// Sector gain at which the supremum is attained.
    pub lambda: f64,
}

/// `sup_{m <= lambda <= L} rho(chi_lambda)` from a uniform grid (both
/// endpoints included) refined by ternary search around the grid maximiser.
pub fn r_rate(params: &TrackerParams, bounds: &SectorBounds, grid: usize) -> Result<RateEstimate> {
    if grid < 2 {
        return Err(Error::invalid("rate grid needs at least 2 points"));
    }
    let (m, l) = (bounds.m(), bounds.l());
    let radius = |lambda: f64| spectral_radius(&char_poly(params, lambda));
    if m == l {
        return Ok(RateEstimate {
            rate: radius(m),
            lambda: m,
        });
    }
    let at = |i: usize| {
        if i == grid - 1 {
            l
        } else {
            m + (l - m) * i as f64 / (grid - 1) as f64
        }
    };
    let (best_i, best) = (0..grid)
        .map(|i| (i, radius(at(i))))
        .fold((0, f64::NEG_INFINITY), |acc, (i, r)| if r > acc.1 { (i, r) } else { acc });
    let mut estimate = RateEstimate {
        rate: best,
        lambda: at(best_i),
    };

    let (mut lo, mut hi) = (at(best_i.saturating_sub(1)), at((best_i + 1).min(grid - 1)));
    for _ in 0..100 {
        let a = lo + (hi - lo) / 3.0;
        let b = hi - (hi - lo) / 3.0;
        if radius(a) < radius(b) {
            lo = a;
        } else {
            hi = b;
        }
    }
    let mid = 0.5 * (lo + hi);
    let refined = radius(mid);
    if refined > estimate.rate {
        estimate = RateEstimate {
            rate: refined,
            lambda: mid,
        };
    }
    Ok(estimate)
}

/// Triangle `T_rho` of monic quadratics with both roots in `|z| < rho`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriangleRegion {
    rho: f64,
}

impl TriangleRegion {
    /// `rho` in `(0, 1]`; `rho = 1` gives the Schur (Jury) triangle.
    pub fn new(rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(Error::invalid(format!("triangle radius must lie in (0, 1], got {rho}")));
        }
        Ok(Self { rho })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn p(&self) -> (f64, f64) {
        (-2.0 * self.rho, self.rho * self.rho)
    }

    pub fn q(&self) -> (f64, f64) {
        (2.0 * self.rho, self.rho * self.rho)
    }

    pub fn r(&self) -> (f64, f64) {
        (0.0, -self.rho * self.rho)
    }

    /// Signed slacks of the three edges, non-negative inside:
    /// `[S1: chi(rho) >= 0, S2: chi(-rho) >= 0, S3: rho^2 - a2 >= 0]`.
    pub fn edge_slacks(&self, a1: f64, a2: f64) -> [f64; 3] {
        let r = self.rho;
        let r2 = r * r;
        [r2 + r * a1 + a2, r2 - r * a1 + a2, r2 - a2]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    Inside,
    Boundary,
    Outside,
}

/// Jury-test classification of `(a1, a2)` against `T_rho`.
pub fn jury_membership(coeffs: &CharPolyCoeffs, region: &TriangleRegion) -> Membership {
    let slack = region
        .edge_slacks(coeffs.a1, coeffs.a2)
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    if slack < -BOUNDARY_TOLERANCE {
        Membership::Outside
    } else if slack <= BOUNDARY_TOLERANCE {
        Membership::Boundary
    } else {
        Membership::Inside
    }
}

/// Both roots within `|z| <= 1 - SCHUR_MARGIN`.
pub fn is_schur(coeffs: &CharPolyCoeffs) -> bool {
    let region = TriangleRegion::new(1.0 - SCHUR_MARGIN).expect("valid radius");
    jury_membership(coeffs, &region) != Membership::Outside
}

/// Segment `J` traced by `(a1, a2)` as `lambda` runs over `[m, L]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentJ {
    pub e1: CharPolyCoeffs,
    pub e2: CharPolyCoeffs,
    pub params: TrackerParams,
    pub bounds: SectorBounds,
}

impl SegmentJ {
    pub fn new(params: &TrackerParams, bounds: &SectorBounds) -> Self {
        Self {
            e1: char_poly(params, bounds.m()),
            e2: char_poly(params, bounds.l()),
            params: *params,
            bounds: *bounds,
        }
    }
}

/// Closed containment `J ⊂ T_rho`; endpoint membership suffices by convexity.
pub fn segment_in_triangle(params: &TrackerParams, bounds: &SectorBounds, region: &TriangleRegion) -> bool {
    let seg = SegmentJ::new(params, bounds);
    [seg.e1, seg.e2]
        .iter()
        .all(|e| jury_membership(e, region) != Membership::Outside)
}

/// Largest `kappa` with `J(alpha, gamma, m, kappa m) ⊂ T_rho`, or 0 when the
/// `lambda = m` endpoint is already outside.
///
/// Each edge slack is affine in `lambda`, so the exit point of the ray
/// `E(lambda)` is the smallest root among the decreasing slacks.
pub fn kappa_bar(params: &TrackerParams, m: f64, region: &TriangleRegion) -> f64 {
    let e1 = char_poly(params, m);
    if jury_membership(&e1, region) == Membership::Outside {
        return 0.0;
    }
    let r = region.rho();
    let r2 = r * r;
    let (alpha, gamma) = (params.alpha, params.gamma);
    // slack_k(lambda) = c_k + d_k lambda
    let slopes = [r * alpha - gamma, -r * alpha - gamma, gamma];
    let offsets = [r2 - 2.0 * r + 1.0, r2 + 2.0 * r + 1.0, r2 - 1.0];
    let lambda_bar = offsets
        .iter()
        .zip(slopes)
        .filter(|(_, d)| *d < 0.0)
        .map(|(c, d)| -c / d)
        .fold(f64::INFINITY, f64::min);
    (lambda_bar / m).max(0.0)
}

/// `(1 + rho^2) / (1 - rho^2)`: the largest condition number admitting rate `rho`.
pub fn kappa_max(rho: f64) -> Result<f64> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::invalid(format!("rho must lie in (0, 1), got {rho}")));
    }
    let r2 = rho * rho;
    Ok((1.0 + r2) / (1.0 - r2))
}

/// Inverse of [`kappa_max`]: `sqrt((kappa - 1) / (kappa + 1))`.
pub fn optimal_rate(kappa: f64) -> Result<f64> {
    if !(kappa > 1.0 && kappa.is_finite()) {
        return Err(Error::invalid(format!("condition number must exceed 1, got {kappa}")));
    }
    Ok(((kappa - 1.0) / (kappa + 1.0)).sqrt())
}

/// Step size attaining `kappa_max(rho)`: `(2/m)(1 - rho^2)/(1 + rho^2)`.
pub fn alpha_for_rate(rho: f64, m: f64) -> f64 {
    let r2 = rho * rho;
    2.0 * (1.0 - r2) / (m * (1.0 + r2))
}

/// Delayed-gradient weight attaining `kappa_max(rho)`: `(1 - rho^2)/m`.
pub fn gamma_for_rate(rho: f64, m: f64) -> f64 {
    (1.0 - rho * rho) / m
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignResult {
    pub alpha_star: f64,
    pub gamma_star: f64,
    pub rho_star: f64,
}

impl DesignResult {
    pub fn params(&self) -> TrackerParams {
        TrackerParams::raw(self.alpha_star, self.gamma_star)
    }
}

/// Rate-optimal circle-certified design for `kappa = L/m > 1`.
///
/// Evaluates to `alpha = 2/L`, `gamma = 2/(m + L)`.
pub fn design_optimal(bounds: &SectorBounds) -> Result<DesignResult> {
    let rho = optimal_rate(bounds.kappa())?;
    Ok(DesignResult {
        alpha_star: alpha_for_rate(rho, bounds.m()),
        gamma_star: gamma_for_rate(rho, bounds.m()),
        rho_star: rho,
    })
}

/// `G0(z) = (alpha z - gamma) / (z - 1)^2`.
pub fn g0_eval(params: &TrackerParams, z: Complex64) -> Result<Complex64> {
    let d = z - 1.0;
    if d.norm() < POLE_TOLERANCE {
        return Err(Error::PoleAtOne);
    }
    Ok((z * params.alpha - params.gamma) / (d * d))
}

/// `H0(e^{i omega})` in rational form.
pub fn h0_eval(params: &TrackerParams, bounds: &SectorBounds, omega: f64) -> Result<Complex64> {
    let z = Complex64::from_polar(1.0, omega);
    let num = char_poly(params, bounds.l()).eval(z);
    let den = char_poly(params, bounds.m()).eval(z);
    if den.norm() < POLE_TOLERANCE {
        return Err(Error::PoleOnUnitCircle { omega });
    }
    Ok(num / den)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SprReport {
    pub spr_ok: bool,
    pub denominator_schur: bool,
    /// Minimum of `Re H0` over the pole-free grid points.
    pub margin: f64,
    pub argmin_omega: f64,
    pub poles_on_circle: usize,
}

/// Discrete strict positive realness of `H0` on `grid + 1` points of `[0, pi]`.
pub fn spr_check(params: &TrackerParams, bounds: &SectorBounds, grid: usize) -> Result<SprReport> {
    if grid < 64 {
        return Err(Error::invalid("SPR grid needs at least 64 intervals"));
    }
    let denominator_schur = is_schur(&char_poly(params, bounds.m()));
    let mut margin = f64::INFINITY;
    let mut argmin_omega = 0.0;
    let mut poles = 0;
    for k in 0..=grid {
        let omega = PI * k as f64 / grid as f64;
        match h0_eval(params, bounds, omega) {
            Ok(h) if h.re < margin => {
                margin = h.re;
                argmin_omega = omega;
            }
            Ok(_) => {}
            Err(_) => poles += 1,
        }
    }
    if !margin.is_finite() {
        margin = f64::NEG_INFINITY;
    }
    Ok(SprReport {
        spr_ok: denominator_schur && poles == 0 && margin > 0.0,
        denominator_schur,
        margin,
        argmin_omega,
        poles_on_circle: poles,
    })
}

/// `1 + m G0(z)` has no zeros in `|z| >= 1`.
pub fn schur_check(params: &TrackerParams, m: f64) -> bool {
    is_schur(&char_poly(params, m))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub schur_ok: bool,
    pub spr_ok: bool,
    pub spr_margin: f64,
    pub r_rate: f64,
    pub globally_convergent: bool,
}

impl Certificate {
    /// A circle-certified design must have a rate below one.
    pub fn is_consistent(&self) -> bool {
        !self.globally_convergent || self.r_rate < 1.0
    }
}

pub fn certify(params: &TrackerParams, bounds: &SectorBounds) -> Certificate {
    let schur_ok = schur_check(params, bounds.m());
    let spr = spr_check(params, bounds, SPR_GRID).expect("default grid is valid");
    let rate = r_rate(params, bounds, RATE_GRID).expect("default grid is valid");
    Certificate {
        schur_ok,
        spr_ok: spr.spr_ok,
        spr_margin: spr.margin,
        r_rate: rate.rate,
        globally_convergent: schur_ok && spr.spr_ok,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::Matrix2;
    use proptest::prelude::*;

    fn reference_bounds() -> SectorBounds {
        SectorBounds::new(0.1, 6.0).unwrap()
    }

    /// Independent route: eigenvalues of the companion matrix.
    fn companion_radius(a1: f64, a2: f64) -> f64 {
        let c = Matrix2::new(0.0, 1.0, -a2, -a1);
        c.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn char_poly_examples() {
        let b = reference_bounds();
        let p = TrackerParams::raw(2.0 / b.l(), 0.0);
        assert_abs_diff_eq!(char_poly(&p, b.l()).a1, 0.0, epsilon = 1e-15);

        let c = char_poly(&TrackerParams::raw(0.0, 0.0), b.m());
        assert_eq!((c.a1, c.a2), (-2.0, 1.0));

        let c = char_poly(&TrackerParams::raw(1.0 / 3.0, 2.0 / 6.1), 0.1);
        assert_abs_diff_eq!(c.a1, -1.966_666_666_666_666_7, epsilon = 1e-12);
        assert_abs_diff_eq!(c.a2, 1.0 - 0.2 / 6.1, epsilon = 1e-15);
        assert_abs_diff_eq!(c.a2, 0.967_213, epsilon = 1e-6);
    }

    #[test]
    fn spectral_radius_examples() {
        assert_eq!(spectral_radius(&CharPolyCoeffs::new(-2.0, 1.0)), 1.0);
        assert_abs_diff_eq!(spectral_radius(&CharPolyCoeffs::new(0.0, -0.49)), 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(spectral_radius(&CharPolyCoeffs::new(0.5, 0.81)), 0.9, epsilon = 1e-15);
        assert_eq!(spectral_radius(&CharPolyCoeffs::new(0.0, 0.0)), 0.0);
    }

    #[test]
    fn roots_are_roots() {
        for (a1, a2) in [(-2.0, 1.0), (3.0, 1e-12), (-1e8, 1.0), (0.3, 0.9), (0.0, -4.0)] {
            let c = CharPolyCoeffs::new(a1, a2);
            for z in c.roots() {
                let scale = 1.0 + z.norm().powi(2) + a1.abs() * z.norm() + a2.abs();
                assert!(c.eval(z).norm() <= 1e-12 * scale, "({a1}, {a2}) root {z}");
            }
        }
    }

    #[test]
    fn rate_at_optimal_design() {
        let b = reference_bounds();
        let d = design_optimal(&b).unwrap();
        let r = r_rate(&d.params(), &b, RATE_GRID).unwrap();
        assert_abs_diff_eq!(r.rate, (59.0f64 / 61.0).sqrt(), epsilon = 1e-9);
        assert_abs_diff_eq!(r.rate, 0.983_470, epsilon = 1e-6);
        // attained at both endpoints
        assert_abs_diff_eq!(spectral_radius(&char_poly(&d.params(), b.m())), d.rho_star, epsilon = 1e-12);
        assert_abs_diff_eq!(spectral_radius(&char_poly(&d.params(), b.l())), d.rho_star, epsilon = 1e-12);

        let zero = r_rate(&TrackerParams::raw(0.0, 0.0), &b, 101).unwrap();
        assert_eq!(zero.rate, 1.0);

        let single = SectorBounds::new(2.0, 2.0).unwrap();
        let p = TrackerParams::raw(0.3, 0.2);
        let r = r_rate(&p, &single, 11).unwrap();
        assert_eq!(r.rate, spectral_radius(&char_poly(&p, 2.0)));
        assert!(r_rate(&p, &b, 1).is_err());
    }

    #[test]
    fn rate_sweep_is_max_of_endpoints() {
        // chi's radius is quasi-convex along J, so the sup sits at an endpoint
        let b = reference_bounds();
        for (alpha, gamma) in [(0.2, 0.15), (0.3, 0.1), (0.05, 0.3), (0.33, 0.33)] {
            let p = TrackerParams::raw(alpha, gamma);
            let r = r_rate(&p, &b, 501).unwrap().rate;
            let ends = spectral_radius(&char_poly(&p, b.m())).max(spectral_radius(&char_poly(&p, b.l())));
            assert_abs_diff_eq!(r, ends, epsilon = 1e-12);
        }
    }

    #[test]
    fn jury_examples() {
        for rho in [0.1, 0.5, 0.99] {
            let t = TriangleRegion::new(rho).unwrap();
            assert_eq!(jury_membership(&CharPolyCoeffs::new(0.0, 0.0), &t), Membership::Inside);
            for (a1, a2) in [t.p(), t.q(), t.r()] {
                assert_eq!(jury_membership(&CharPolyCoeffs::new(a1, a2), &t), Membership::Boundary);
            }
            assert_eq!(
                jury_membership(&CharPolyCoeffs::new(0.0, rho * rho * 1.01), &t),
                Membership::Outside
            );
        }
        assert!(TriangleRegion::new(0.0).is_err());
        assert!(TriangleRegion::new(1.5).is_err());
    }

    #[test]
    fn segment_examples() {
        let b = reference_bounds();
        let d = design_optimal(&b).unwrap();
        let t = TriangleRegion::new(d.rho_star).unwrap();
        assert!(segment_in_triangle(&d.params(), &b, &t));
        let seg = SegmentJ::new(&d.params(), &b);
        // E1 on the top edge S3, E2 on S1 (at the bottom vertex R)
        let s_e1 = t.edge_slacks(seg.e1.a1, seg.e1.a2);
        let s_e2 = t.edge_slacks(seg.e2.a1, seg.e2.a2);
        assert_abs_diff_eq!(s_e1[2], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s_e2[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(seg.e2.a1, t.r().0, epsilon = 1e-12);
        assert_abs_diff_eq!(seg.e2.a2, t.r().1, epsilon = 1e-12);

        let huge = TrackerParams::raw(10.0 / b.m(), d.gamma_star);
        assert!(!segment_in_triangle(&huge, &b, &t));

        let point = SectorBounds::new(1.0, 1.0).unwrap();
        let p = TrackerParams::raw(1.0, 0.9);
        let region = TriangleRegion::new(0.5).unwrap();
        assert_eq!(
            segment_in_triangle(&p, &point, &region),
            jury_membership(&char_poly(&p, 1.0), &region) != Membership::Outside
        );
    }

    fn kappa_bar_by_bisection(p: &TrackerParams, m: f64, region: &TriangleRegion) -> f64 {
        let inside = |k: f64| segment_in_triangle(p, &SectorBounds::new(m, k * m).unwrap(), region);
        if !inside(1.0) {
            return 0.0;
        }
        let mut hi = 2.0;
        while inside(hi) {
            hi *= 2.0;
        }
        let mut lo = hi / 2.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if inside(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    #[test]
    fn kappa_bar_round_trip_and_bisection() {
        for kappa in [1.5, 3.0, 10.0, 60.0, 500.0] {
            let m = 0.1;
            let b = SectorBounds::new(m, kappa * m).unwrap();
            let d = design_optimal(&b).unwrap();
            let region = TriangleRegion::new(d.rho_star).unwrap();
            assert_abs_diff_eq!(kappa_bar(&d.params(), m, &region), kappa, epsilon = 1e-9 * kappa);
        }

        // horizontal ray: E1 = (-2 + m alpha, 1) is outside every T_rho with rho < 1
        let region = TriangleRegion::new(0.9).unwrap();
        assert_eq!(kappa_bar(&TrackerParams::raw(0.5, 0.0), 0.1, &region), 0.0);
        assert_eq!(kappa_bar(&TrackerParams::raw(0.0, 0.0), 0.1, &region), 0.0);

        let mut checked = 0;
        for i in 0..400 {
            let rho = 0.3 + 0.69 * ((i * 37) % 100) as f64 / 100.0;
            let m = 0.1;
            let alpha = (2.0 - 2.0 * rho) / m + 0.02 * ((i * 13) % 50) as f64 / m;
            let gamma = (1.0 - rho * rho) / m + 0.01 * ((i * 7) % 31) as f64 / m;
            let p = TrackerParams::raw(alpha, gamma);
            let region = TriangleRegion::new(rho).unwrap();
            let closed = kappa_bar(&p, m, &region);
            let bisect = kappa_bar_by_bisection(&p, m, &region);
            if closed > 0.0 {
                checked += 1;
            }
            assert_abs_diff_eq!(closed, bisect, epsilon = 1e-9 * closed.max(1.0));
        }
        assert!(checked > 50, "only {checked} cases had E1 inside");
    }

    #[test]
    fn kappa_max_examples() {
        assert_abs_diff_eq!(kappa_max(1e-8).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(kappa_max(1.0 / 3.0f64.sqrt()).unwrap(), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(kappa_max((59.0f64 / 61.0).sqrt()).unwrap(), 60.0, epsilon = 1e-10);
        assert!(kappa_max(0.0).is_err());
        assert!(kappa_max(1.0).is_err());
    }

    #[test]
    fn design_examples() {
        let d = design_optimal(&reference_bounds()).unwrap();
        assert_abs_diff_eq!(d.alpha_star, 1.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(d.gamma_star, 2.0 / 6.1, epsilon = 1e-14);
        assert_abs_diff_eq!(d.gamma_star, 0.327_869, epsilon = 1e-6);
        assert_abs_diff_eq!(d.rho_star, 0.983_470, epsilon = 1e-6);

        let m = 0.7;
        let d = design_optimal(&SectorBounds::new(m, 3.0 * m).unwrap()).unwrap();
        assert_abs_diff_eq!(d.rho_star, 0.5f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(d.alpha_star, 2.0 / (3.0 * m), epsilon = 1e-14);
        assert_abs_diff_eq!(d.gamma_star, 1.0 / (2.0 * m), epsilon = 1e-14);

        assert!(design_optimal(&SectorBounds::new(1.0, 1.0).unwrap()).is_err());
    }

    #[test]
    fn g0_examples() {
        let p = TrackerParams::raw(1.0 / 3.0, 2.0 / 6.1);
        assert_abs_diff_eq!(g0_eval(&p, Complex64::new(0.0, 0.0)).unwrap().re, -p.gamma, epsilon = 1e-15);
        let at_minus_one = g0_eval(&p, Complex64::new(-1.0, 0.0)).unwrap();
        assert_abs_diff_eq!(at_minus_one.re, (-1.0 / 3.0 - 2.0 / 6.1) / 4.0, epsilon = 1e-15);
        let big = 1e8;
        let far = g0_eval(&p, Complex64::new(big, 0.0)).unwrap();
        assert_abs_diff_eq!(far.norm() * big, p.alpha, epsilon = 1e-7);
        assert_eq!(g0_eval(&p, Complex64::new(1.0, 0.0)), Err(Error::PoleAtOne));
    }

    #[test]
    fn h0_matches_loop_definition() {
        // (1 + L G0) / (1 + m G0) must equal the rational form
        let b = reference_bounds();
        let p = TrackerParams::raw(0.25, 0.2);
        for k in 1..200 {
            let omega = PI * k as f64 / 200.0;
            let z = Complex64::from_polar(1.0, omega);
            let g = g0_eval(&p, z).unwrap();
            let direct = (g * b.l() + 1.0) / (g * b.m() + 1.0);
            let rational = h0_eval(&p, &b, omega).unwrap();
            assert!((direct - rational).norm() < 1e-10 * rational.norm().max(1.0));
        }
    }

    #[test]
    fn h0_examples() {
        let same = SectorBounds::new(0.4, 0.4).unwrap();
        let p = TrackerParams::raw(0.3, 0.1);
        for k in 0..32 {
            let h = h0_eval(&p, &same, k as f64 * 0.1).unwrap();
            assert_abs_diff_eq!(h.re, 1.0, epsilon = 1e-14);
            assert_abs_diff_eq!(h.im, 0.0, epsilon = 1e-14);
        }

        let b = reference_bounds();
        let d = design_optimal(&b).unwrap();
        let r2 = d.rho_star * d.rho_star;
        let h1 = h0_eval(&d.params(), &b, 0.0).unwrap();
        assert_abs_diff_eq!(h1.re, (1.0 + r2) / (1.0 - r2), epsilon = 1e-9);
        assert_abs_diff_eq!(h1.re, 60.0, epsilon = 1e-9);

        assert!(matches!(
            h0_eval(&TrackerParams::raw(0.0, 0.0), &b, 0.0),
            Err(Error::PoleOnUnitCircle { .. })
        ));
    }

    #[test]
    fn spr_examples() {
        for kappa in [2.0, 10.0, 60.0] {
            let b = SectorBounds::new(0.1, 0.1 * kappa).unwrap();
            let d = design_optimal(&b).unwrap();
            let s = spr_check(&d.params(), &b, 1024).unwrap();
            assert!(s.spr_ok && s.margin > 0.0, "kappa {kappa}: {s:?}");
            // numerator of Re H0 is (1 - rho^2)^3/(1 + rho^2) at cos w = 1 and grows as cos w drops
            let r2 = d.rho_star * d.rho_star;
            let numer = |c: f64| 1.0 - r2 * r2 - 4.0 * r2 * (1.0 - r2) / (1.0 + r2) * c;
            assert_abs_diff_eq!(numer(1.0), (1.0 - r2).powi(3) / (1.0 + r2), epsilon = 1e-15);
            assert!(numer(-1.0) > numer(1.0));
        }

        let zero = spr_check(&TrackerParams::raw(0.0, 0.0), &reference_bounds(), 128).unwrap();
        assert!(!zero.spr_ok && !zero.denominator_schur);
        assert_eq!(zero.poles_on_circle, 1);
        assert_abs_diff_eq!(zero.margin, 1.0, epsilon = 1e-12);

        assert!(spr_check(&TrackerParams::raw(0.1, 0.1), &reference_bounds(), 10).is_err());
    }

    #[test]
    fn spr_counterexample_with_schur_denominator() {
        // found by a random scan over (alpha, gamma); frozen as a regression input
        let b = SectorBounds::new(1.0, 4.0).unwrap();
        let p = TrackerParams::raw(0.3, 0.134);
        assert!(schur_check(&p, b.m()));
        assert!(schur_check(&p, b.l()));
        let s = spr_check(&p, &b, 1024).unwrap();
        assert!(s.denominator_schur);
        assert!(s.margin < 0.0, "{s:?}");
        assert!(!s.spr_ok);
    }

    #[test]
    fn schur_examples() {
        let b = reference_bounds();
        let d = design_optimal(&b).unwrap();
        assert!(schur_check(&d.params(), b.m()));
        assert!(!schur_check(&TrackerParams::raw(0.0, 0.0), b.m()));
        assert!(!schur_check(&TrackerParams::raw(0.3, -0.5), b.m()));
    }

    #[test]
    fn certify_examples() {
        let b = reference_bounds();
        let c = certify(&design_optimal(&b).unwrap().params(), &b);
        assert!(c.globally_convergent && c.is_consistent());
        assert_abs_diff_eq!(c.r_rate, 0.983_470, epsilon = 1e-6);

        assert!(!certify(&TrackerParams::raw(0.0, 0.0), &b).globally_convergent);

        let hb = 4.0 / (b.l().sqrt() + b.m().sqrt()).powi(2);
        let c = certify(&TrackerParams::raw(hb, 0.0), &b);
        assert!(!c.globally_convergent);
        assert!(c.r_rate >= 1.0);
    }

    #[test]
    fn certificate_json_fields() {
        let b = reference_bounds();
        let c = certify(&design_optimal(&b).unwrap().params(), &b);
        let v: serde_json::Value = serde_json::to_value(c).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["globally_convergent", "r_rate", "schur_ok", "spr_margin", "spr_ok"]);
    }

    proptest! {
        #[test]
        fn spectral_radius_matches_companion_eigenvalues(a1 in -4.0f64..4.0, a2 in -4.0f64..4.0) {
            let fast = spectral_radius(&CharPolyCoeffs::new(a1, a2));
            let slow = companion_radius(a1, a2);
            // a double root is ill-conditioned for the eigen-solver, not for the closed form
            let disc = (a1 * a1 - 4.0 * a2).abs();
            let tol = if disc < 1e-6 { 1e-6 } else { 1e-10 };
            prop_assert!((fast - slow).abs() <= tol * (1.0 + slow), "{fast} vs {slow}");
        }

        #[test]
        fn kappa_max_inverts_optimal_rate(kappa in 1.0001f64..1e4) {
            let rho = optimal_rate(kappa).unwrap();
            prop_assert!((kappa_max(rho).unwrap() - kappa).abs() <= 1e-12 * kappa.max(1.0) * 10.0);
        }
    }
}
