//! Quadrature toolbox: Gauss-Legendre rules, adaptive Gauss-Kronrod
//! panels, and product rules on circles, spheres, and balls.
//!
//! Everything here is deterministic: node sets are either hardcoded
//! constants or produced by fixed-iteration Newton refinements, so repeated
//! runs yield bit-identical values.

use crate::{Error, Result};
use std::collections::HashMap;
use std::sync::{Arc, LazyLock, Mutex};

/// Abscissae of the 15-point Kronrod rule (positive half; symmetric).
/// Odd-indexed entries are the embedded 7-point Gauss nodes.
const XGK15: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

/// Weights of the 15-point Kronrod rule, matching `XGK15`.
const WGK15: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

/// Weights of the embedded 7-point Gauss rule (for `XGK15[1], [3], [5], [7]`).
const WG7: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One Gauss-Kronrod 15(7) panel on `[a, b]`.
///
/// Returns the Kronrod value and the |K15 - G7| error estimate.
pub fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut kron = 0.0;
    let mut gauss = 0.0;
    for (i, (&x, &wk)) in XGK15.iter().zip(WGK15.iter()).enumerate() {
        let (fl, fr) = if x == 0.0 {
            let v = f(mid);
            (v, 0.0)
        } else {
            (f(mid - half * x), f(mid + half * x))
        };
        let s = fl + fr;
        kron += wk * s;
        if i % 2 == 1 {
            // Odd Kronrod indices (and the center node at i = 7) carry the
            // embedded 7-point Gauss rule.
            gauss += WG7[i / 2] * s;
        }
    }
    (kron * half, (kron - gauss).abs() * half)
}

/// Adaptive Gauss-Kronrod integration of `f` over `[a, b]` to absolute
/// tolerance `tol`, by panel bisection.
///
/// Fails with a divergence error when the panel queue exceeds its budget
/// without meeting the tolerance, which is how non-integrable inputs
/// surface.
pub fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::domain("adaptive quadrature needs finite endpoints"));
    }
    if a == b {
        return Ok(0.0);
    }
    let total_len = (b - a).abs();
    let mut stack = vec![(a, b)];
    let mut sum = 0.0;
    let mut panels = 0usize;
    // Error mass of panels accepted only because they hit the width floor;
    // a non-integrable singularity shows up here as O(1) per floor panel.
    let mut unresolved = 0.0;
    while let Some((lo, hi)) = stack.pop() {
        panels += 1;
        if panels > 20_000 {
            return Err(Error::divergence(format!(
                "adaptive quadrature on [{a:.3e}, {b:.3e}] exceeded panel budget (tol {tol:.1e})"
            )));
        }
        let (val, err) = kronrod15(f, lo, hi);
        if !val.is_finite() {
            return Err(Error::numeric(format!(
                "non-finite integrand value in panel [{lo:.6e}, {hi:.6e}]"
            )));
        }
        let local_tol = tol * ((hi - lo).abs() / total_len).max(1e-3 * f64::EPSILON);
        if err <= local_tol {
            sum += val;
        } else if (hi - lo).abs() < 1e-15 * total_len {
            sum += val;
            unresolved += err;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid));
            stack.push((mid, hi));
        }
    }
    if unresolved > 4.0 * tol.max(1e-13 * sum.abs()) {
        return Err(Error::divergence(format!(
            "adaptive quadrature on [{a:.3e}, {b:.3e}] left error mass {unresolved:.2e} \
             in width-floor panels (tol {tol:.1e})"
        )));
    }
    Ok(sum)
}

type GlCache = LazyLock<Mutex<HashMap<usize, Arc<(Vec<f64>, Vec<f64>)>>>>;
static GL_CACHE: GlCache = LazyLock::new(|| Mutex::new(HashMap::new()));

/// Gauss-Legendre nodes and weights on `[-1, 1]`, cached per order.
///
/// Nodes are computed by Newton iteration on the Legendre recurrence from
/// the Chebyshev initial guess; the iteration count is fixed by a 1e-15
/// residual target, so the tables are deterministic.
pub fn gauss_legendre(n: usize) -> Arc<(Vec<f64>, Vec<f64>)> {
    assert!(n >= 1, "gauss_legendre order must be positive");
    let mut cache = GL_CACHE.lock().unwrap();
    if let Some(hit) = cache.get(&n) {
        return hit.clone();
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_pair(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                let (p2, d2) = legendre_pair(n, x);
                dp = d2;
                x -= p2 / d2;
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    // Newton sweeps from the Chebyshev guess order nodes descending in x.
    nodes.reverse();
    weights.reverse();
    let entry = Arc::new((nodes, weights));
    cache.insert(n, entry.clone());
    entry
}

/// Legendre P_n(x) and its derivative via the three-term recurrence.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = (n as f64) * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss-Legendre nodes and weights mapped to `[a, b]`.
pub fn gl_on(a: f64, b: f64, n: usize) -> Vec<(f64, f64)> {
    let gl = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    gl.0.iter()
        .zip(gl.1.iter())
        .map(|(&x, &w)| (mid + half * x, w * half))
        .collect()
}

/// Fixed-node quadrature rule on the unit sphere; weights sum to the
/// surface measure.
///
/// * `d = 2`: 512 midpoint angles (no node on the equator `{x_1 = 0}`).
/// * `d = 3`: 266 nodes as a product of 7-point Gauss-Legendre rules per
///   `cos(polar)` hemisphere and 19 uniform azimuths, so integrands with a
///   kink or jump across the equatorial plane are still integrated panel by
///   panel on smooth pieces.
pub struct SphereRule {
    pub dim: usize,
    nodes: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl SphereRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }
}

static SPHERE_RULES: LazyLock<Mutex<HashMap<usize, Arc<SphereRule>>>> =
    LazyLock::new(|| Mutex::new(HashMap::new()));

/// The fixed sphere rule for dimension `d` (2 or 3).
pub fn sphere_rule(dim: usize) -> Result<Arc<SphereRule>> {
    let mut cache = SPHERE_RULES.lock().unwrap();
    if let Some(hit) = cache.get(&dim) {
        return Ok(hit.clone());
    }
    let rule = match dim {
        2 => {
            let n = 512;
            let dw = 2.0 * std::f64::consts::PI / n as f64;
            let mut nodes = Vec::with_capacity(n);
            let mut weights = Vec::with_capacity(n);
            for i in 0..n {
                let ang = (i as f64 + 0.5) * dw;
                nodes.push(vec![ang.cos(), ang.sin()]);
                weights.push(dw);
            }
            SphereRule {
                dim,
                nodes,
                weights,
            }
        }
        3 => {
            // 2 hemispheres x 7 polar nodes x 19 azimuths = 266 nodes.
            let gl = gauss_legendre(7);
            let n_az = 19;
            let dphi = 2.0 * std::f64::consts::PI / n_az as f64;
            let mut nodes = Vec::with_capacity(266);
            let mut weights = Vec::with_capacity(266);
            for hemi in [1.0f64, -1.0] {
                for (&x, &w) in gl.0.iter().zip(gl.1.iter()) {
                    // cos(polar) in (0, 1), mirrored by `hemi`.
                    let c = hemi * 0.5 * (x + 1.0);
                    let s = (1.0 - c * c).max(0.0).sqrt();
                    let w_pol = 0.5 * w;
                    for j in 0..n_az {
                        let phi = (j as f64 + 0.5) * dphi;
                        nodes.push(vec![s * phi.cos(), s * phi.sin(), c]);
                        weights.push(w_pol * dphi);
                    }
                }
            }
            SphereRule {
                dim,
                nodes,
                weights,
            }
        }
        _ => {
            return Err(Error::domain(format!(
                "sphere quadrature supports d in {{2, 3}}, got {dim}"
            )))
        }
    };
    let arc = Arc::new(rule);
    cache.insert(dim, arc.clone());
    Ok(arc)
}

/// Integral of `f` over the sphere of radius `rho` around `center`.
pub fn integrate_sphere<F: FnMut(&[f64]) -> f64>(
    center: &[f64],
    rho: f64,
    mut f: F,
) -> Result<f64> {
    let dim = center.len();
    let rule = sphere_rule(dim)?;
    let mut pt = vec![0.0; dim];
    let mut sum = 0.0;
    for i in 0..rule.len() {
        let n = rule.node(i);
        for k in 0..dim {
            pt[k] = center[k] + rho * n[k];
        }
        sum += rule.weight(i) * f(&pt);
    }
    Ok(sum * rho.powi(dim as i32 - 1))
}

/// Number of radial panels per ray in ball quadratures.
const BALL_RADIAL_PANELS: usize = 4;

/// Integral of `f` over `B_r(center)` restricted to `{inside}`.
///
/// Each radial ray is split at the first `inside` sign change (located by
/// bisection), so integrands that are smooth on the domain but jump to zero
/// across its boundary are integrated on smooth pieces only. Rays are
/// assumed to cross the boundary at most once, which holds for the gentle
/// graph slopes this laboratory works at.
pub fn integrate_ball_masked<F, G>(
    center: &[f64],
    r: f64,
    radial_n: usize,
    mut inside: G,
    mut f: F,
) -> Result<f64>
where
    F: FnMut(&[f64]) -> f64,
    G: FnMut(&[f64]) -> bool,
{
    let dim = center.len();
    let rule = sphere_rule(dim)?;
    let mut pt = vec![0.0; dim];
    let mut sum = 0.0;
    let dpow = dim as i32 - 1;
    for i in 0..rule.len() {
        let dir = rule.node(i);
        let at = |rho: f64, pt: &mut Vec<f64>| {
            for k in 0..dim {
                pt[k] = center[k] + rho * dir[k];
            }
        };
        // Locate the radial extent of the domain along this ray.
        at(1e-9 * r, &mut pt);
        let center_in = inside(&pt);
        at(r, &mut pt);
        let end_in = inside(&pt);
        let cut = if center_in == end_in {
            if center_in {
                r
            } else {
                continue;
            }
        } else {
            let (mut lo, mut hi) = (1e-9 * r, r);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                at(mid, &mut pt);
                if inside(&pt) == center_in {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            if center_in {
                0.5 * (lo + hi)
            } else {
                // Center-side sliver is outside: integrate the far piece.
                let start = 0.5 * (lo + hi);
                let mut ray = 0.0;
                for (lo_p, hi_p) in split_panels(start, r) {
                    for (rho, w) in gl_on(lo_p, hi_p, radial_n) {
                        at(rho, &mut pt);
                        ray += w * rho.powi(dpow) * f(&pt);
                    }
                }
                sum += rule.weight(i) * ray;
                continue;
            }
        };
        let mut ray = 0.0;
        for (lo_p, hi_p) in split_panels(0.0, cut) {
            for (rho, w) in gl_on(lo_p, hi_p, radial_n) {
                at(rho, &mut pt);
                ray += w * rho.powi(dpow) * f(&pt);
            }
        }
        sum += rule.weight(i) * ray;
    }
    Ok(sum)
}

fn split_panels(a: f64, b: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(BALL_RADIAL_PANELS);
    let step = (b - a) / BALL_RADIAL_PANELS as f64;
    for k in 0..BALL_RADIAL_PANELS {
        out.push((a + step * k as f64, a + step * (k + 1) as f64));
    }
    out
}

/// Integral of `f` over the full ball `B_r(center)` (no mask).
pub fn integrate_ball<F: FnMut(&[f64]) -> f64>(
    center: &[f64],
    r: f64,
    radial_n: usize,
    mut f: F,
) -> Result<f64> {
    integrate_ball_masked(center, r, radial_n, |_| true, &mut f)
}

/// Exit radius of the ray `offset + rho * dir` from the origin-centered
/// ball of radius `cap_r` (largest non-negative root).
pub fn ray_ball_exit(offset: &[f64], dir: &[f64], cap_r: f64) -> f64 {
    let od: f64 = offset.iter().zip(dir.iter()).map(|(a, b)| a * b).sum();
    let oo: f64 = offset.iter().map(|a| a * a).sum();
    let disc = od * od + cap_r * cap_r - oo;
    if disc <= 0.0 {
        return 0.0;
    }
    (-od + disc.sqrt()).max(0.0)
}

/// Geometric panel decomposition of `[a, b]`, finest near `a`.
///
/// Panel boundaries halve toward `a` until the innermost panel is shorter
/// than `a.max(b * 2^-max_halvings)`.
pub fn geometric_panels(a: f64, b: f64, max_halvings: usize) -> Vec<(f64, f64)> {
    assert!(b > a && a >= 0.0);
    let mut cuts = vec![b];
    let mut hi = b;
    for _ in 0..max_halvings {
        let lo = 0.5 * hi;
        if lo <= a * 1.5 {
            break;
        }
        cuts.push(lo);
        hi = lo;
    }
    cuts.push(a);
    cuts.reverse();
    cuts.windows(2).map(|w| (w[0], w[1])).collect()
}

/// Surface measure of the unit sphere in `R^d`.
pub fn sphere_area(dim: usize) -> f64 {
    // 2 pi^{d/2} / Gamma(d/2)
    match dim {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI,
        4 => 2.0 * std::f64::consts::PI * std::f64::consts::PI,
        _ => {
            let d = dim as f64;
            2.0 * std::f64::consts::PI.powf(d / 2.0) / gamma_fn(d / 2.0)
        }
    }
}

/// Volume of the unit ball in `R^d`.
pub fn ball_volume(dim: usize) -> f64 {
    sphere_area(dim) / dim as f64
}

/// Gamma function for positive half-integer and integer arguments.
pub fn gamma_fn(x: f64) -> f64 {
    let two_x = 2.0 * x;
    let k = two_x.round() as i64;
    assert!(
        (two_x - k as f64).abs() < 1e-12 && k > 0,
        "gamma_fn supports positive half-integers, got {x}"
    );
    if k % 2 == 0 {
        // Integer argument: (n-1)!
        let n = k / 2;
        let mut acc = 1.0;
        for i in 2..n {
            acc *= i as f64;
        }
        acc
    } else {
        // Half-integer: Gamma(1/2) = sqrt(pi), then shift up.
        let mut acc = std::f64::consts::PI.sqrt();
        let mut arg = 0.5;
        while arg < x - 0.25 {
            acc *= arg;
            arg += 1.0;
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_exact_on_low_degree() {
        // K15 integrates degree <= 22 exactly; check x^8 on [0, 1].
        let (v, _) = kronrod15(&|x: f64| x.powi(8), 0.0, 1.0);
        assert!((v - 1.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn adaptive_handles_mild_singularity() {
        // Integral of sqrt(x) on [0, 1] = 2/3.
        let v = adaptive(&|x: f64| x.sqrt(), 0.0, 1.0, 1e-12).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-10, "got {v}");
    }

    #[test]
    fn adaptive_reports_divergence() {
        let r = adaptive(&|x: f64| 1.0 / x, 0.0, 1.0, 1e-10);
        assert!(r.is_err());
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in [2usize, 5, 7, 12, 16] {
            let deg = 2 * n - 1;
            let exact = 2.0 / (deg as f64 + 1.0) * if deg % 2 == 0 { 1.0 } else { 0.0 };
            let gl = gauss_legendre(n);
            let val: f64 = gl
                .0
                .iter()
                .zip(gl.1.iter())
                .map(|(&x, &w)| w * x.powi(deg as i32))
                .sum();
            assert!(
                (val - exact).abs() < 1e-14,
                "n={n} deg={deg} val={val} exact={exact}"
            );
            let mass: f64 = gl.1.iter().sum();
            assert!((mass - 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn sphere_rule_masses() {
        for d in [2usize, 3] {
            let rule = sphere_rule(d).unwrap();
            let mass: f64 = (0..rule.len()).map(|i| rule.weight(i)).sum();
            assert!((mass - sphere_area(d)).abs() < 1e-12, "d={d} mass={mass}");
            let expected = if d == 2 { 512 } else { 266 };
            assert_eq!(rule.len(), expected);
        }
    }

    #[test]
    fn sphere_rule_exact_on_even_monomials() {
        // d=3: integral of z^2 over S^2 is 4 pi / 3; x^2 y^2 is 4 pi / 15.
        let rule = sphere_rule(3).unwrap();
        let mut z2 = 0.0;
        let mut x2y2 = 0.0;
        for i in 0..rule.len() {
            let n = rule.node(i);
            z2 += rule.weight(i) * n[2] * n[2];
            x2y2 += rule.weight(i) * n[0] * n[0] * n[1] * n[1];
        }
        let pi = std::f64::consts::PI;
        assert!((z2 - 4.0 * pi / 3.0).abs() < 1e-12);
        assert!((x2y2 - 4.0 * pi / 15.0).abs() < 1e-12);
    }

    #[test]
    fn ball_rule_volume_and_moment() {
        // Volume of B_1 in R^2 and the moment of t^2 over the upper half
        // disc, integrated with the half-plane mask.
        let v = integrate_ball(&[0.0, 0.0], 1.0, 12, |_| 1.0).unwrap();
        assert!((v - std::f64::consts::PI).abs() < 1e-12);

        let m = integrate_ball_masked(
            &[0.0, 0.0],
            1.0,
            12,
            |p| p[1] > 0.0,
            |p| p[1] * p[1],
        )
        .unwrap();
        assert!(
            (m - std::f64::consts::PI / 8.0).abs() < 1e-10,
            "upper-half t^2 moment: {m}"
        );
    }

    #[test]
    fn masked_ball_handles_tilted_halfspace() {
        // Half disc cut by a tilted line through the center: area pi/2.
        let n = [0.6, 0.8];
        let v = integrate_ball_masked(
            &[0.0, 0.0],
            1.0,
            12,
            |p| p[0] * n[0] + p[1] * n[1] > 0.0,
            |_| 1.0,
        )
        .unwrap();
        assert!((v - 0.5 * std::f64::consts::PI).abs() < 1e-9, "got {v}");
    }

    #[test]
    fn ray_exit_radius() {
        let rho = ray_ball_exit(&[0.3, 0.0], &[1.0, 0.0], 1.0);
        assert!((rho - 0.7).abs() < 1e-15);
        let rho = ray_ball_exit(&[0.3, 0.0], &[-1.0, 0.0], 1.0);
        assert!((rho - 1.3).abs() < 1e-15);
    }

    #[test]
    fn gamma_fn_values() {
        assert!((gamma_fn(1.0) - 1.0).abs() < 1e-15);
        assert!((gamma_fn(4.0) - 6.0).abs() < 1e-15);
        let rt_pi = std::f64::consts::PI.sqrt();
        assert!((gamma_fn(0.5) - rt_pi).abs() < 1e-15);
        assert!((gamma_fn(2.5) - 1.5 * 0.5 * rt_pi).abs() < 1e-14);
    }
}
