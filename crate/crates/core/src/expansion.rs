//! Boundary expansion machinery: blowups and tangent extraction, the
//! Newtonian correction of the flattened equation, polynomial extraction
//! along two independent routes, and the error-band checks for
//! `u = P_N + psi`.
//!
//! Everything here works in flat chart coordinates on fields that are
//! either restricted to the upper half (masked) or oddly extended. The
//! polynomial `P_N` is assembled as `P1 + P2`: `P1` is the degree-limited
//! harmonic projection of `v - w` over a full ball (where that difference
//! is harmonic), and `P2` is the Taylor polynomial at the origin of the
//! Newtonian potential `w` of the force `(A - Id) grad v`, computed from
//! kernel-derivative integrals with a shrinking inner cutoff.

use crate::field::{DiffField, Field, PolyField};
use crate::geometry::Chart;
use crate::hhp::{
    gamma_taylor_term, monomials, orthonormal_basis_full, OrthoBasis, Polynomial,
};
use crate::linalg::{lstsq, norm, Mat};
use crate::modulus::{theta_ring, theta_tilde, Modulus, ModulusConfig};
use crate::quad::{gl_on, integrate_ball_masked, ray_ball_exit, sphere_area, sphere_rule};
use crate::{Error, Result};

/// Radial Gauss order for masked projection integrals.
const TANGENT_RADIAL_N: usize = 16;

/// Angular node count for the lab's own polar rules in d = 2.
const POLAR_ANGLES_2D: usize = 96;

/// Directions with surface weights on the unit sphere (weights sum to the
/// sphere area). In d = 2 a midpoint angle rule of the requested size; in
/// d = 3 the shared product rule.
fn directions(dim: usize, n_2d: usize) -> Result<Vec<(Vec<f64>, f64)>> {
    match dim {
        2 => {
            let w = 2.0 * std::f64::consts::PI / n_2d as f64;
            Ok((0..n_2d)
                .map(|k| {
                    let t = (k as f64 + 0.5) * w;
                    (vec![t.cos(), t.sin()], w)
                })
                .collect())
        }
        3 => {
            let rule = sphere_rule(3)?;
            Ok((0..rule.len())
                .map(|i| (rule.node(i).to_vec(), rule.weight(i)))
                .collect())
        }
        _ => Err(Error::domain(format!("expansion supports dim 2 or 3, got {dim}"))),
    }
}

/// The rescaled, L2-normalized field `T(Z) = u(center + r Z) / scale`,
/// with `scale = (r^{-d} int_{B_r cap D} u^2)^{1/2}`, so that `T` has unit
/// mass on the unit ball intersected with the (rescaled) domain.
pub struct BlowupField<'a> {
    inner: &'a dyn Field,
    center: Vec<f64>,
    pub r: f64,
    pub scale: f64,
}

pub fn blowup<'a>(inner: &'a dyn Field, center: &[f64], r: f64) -> Result<BlowupField<'a>> {
    let scale = crate::frequency::l2_ball(inner, center, r)?;
    if !(scale > 1e-300) {
        return Err(Error::degenerate(format!(
            "field has no mass on the ball of radius {r:.3e}; cannot rescale"
        )));
    }
    Ok(BlowupField {
        inner,
        center: center.to_vec(),
        r,
        scale,
    })
}

impl BlowupField<'_> {
    fn pullback(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(&self.center)
            .map(|(zi, ci)| ci + self.r * zi)
            .collect()
    }
}

impl Field for BlowupField<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn value(&self, z: &[f64]) -> f64 {
        self.inner.value(&self.pullback(z)) / self.scale
    }

    fn gradient(&self, z: &[f64]) -> Vec<f64> {
        self.inner
            .gradient(&self.pullback(z))
            .iter()
            .map(|g| g * self.r / self.scale)
            .collect()
    }

    fn inside(&self, z: &[f64]) -> bool {
        self.inner.inside(&self.pullback(z))
    }

    fn hull_radius(&self) -> f64 {
        let center_norm = norm(&self.center);
        ((self.inner.hull_radius() - center_norm) / self.r).max(0.0)
    }
}

/// Tangent extraction along a shrinking radius ladder: normalized
/// degree-`order` harmonic projections of the blowups, together with the
/// L2 distance `eps(r)` from each blowup to its projection.
pub struct TangentFlow {
    pub radii: Vec<f64>,
    pub eps: Vec<f64>,
    pub tangents: Vec<Polynomial>,
    pub tangent: Polynomial,
}

/// Project the blowups of `field` at `center` onto the degree-`order`
/// harmonic layer of `basis` (half-ball orthonormal). Radii must be given
/// in decreasing order; the final tangent is the one at the smallest
/// radius, normalized in L2 of the half ball with a deterministic sign.
///
/// `field` must be the one-sided solution, zero or masked below the
/// boundary: projections use the half-ball normalization, so an odd
/// extension would double every coefficient and corrupt the deviation
/// ladder.
pub fn tangent_from_blowups(
    field: &dyn Field,
    center: &[f64],
    order: u32,
    radii: &[f64],
    basis: &OrthoBasis,
) -> Result<TangentFlow> {
    if !basis.half {
        return Err(Error::contract("tangent extraction needs the half-ball basis"));
    }
    if basis.max_degree < order as usize {
        return Err(Error::contract(format!(
            "basis holds degrees up to {} but order {order} was requested",
            basis.max_degree
        )));
    }
    let mut eps_all = Vec::with_capacity(radii.len());
    let mut tangents = Vec::with_capacity(radii.len());
    for &r in radii {
        let t = blowup(field, center, r)?;
        if t.hull_radius() < 1.0 {
            return Err(Error::domain(format!(
                "blowup at radius {r:.3e} does not cover the unit ball"
            )));
        }
        let mut coeffs = vec![0.0; basis.len()];
        for (k, c) in coeffs.iter_mut().enumerate() {
            let e = basis.element(k);
            *c = integrate_ball_masked(
                &vec![0.0; t.dim()],
                1.0,
                TANGENT_RADIAL_N,
                |p| t.inside(p),
                |p| t.value(p) * e.eval(p),
            )?;
        }
        let mass = integrate_ball_masked(
            &vec![0.0; t.dim()],
            1.0,
            TANGENT_RADIAL_N,
            |p| t.inside(p),
            |p| {
                let v = t.value(p);
                v * v
            },
        )?;
        let captured: f64 = (0..basis.len())
            .filter(|&k| basis.degree_of(k) == order as usize)
            .map(|k| coeffs[k] * coeffs[k])
            .sum();
        eps_all.push((mass - captured).max(0.0).sqrt());
        let mut p = Polynomial::new(t.dim());
        for k in 0..basis.len() {
            if basis.degree_of(k) == order as usize && coeffs[k] != 0.0 {
                p = p.add(&basis.element(k).scaled(coeffs[k]));
            }
        }
        tangents.push(normalize_tangent(&p)?);
    }
    let tangent = tangents
        .last()
        .cloned()
        .ok_or_else(|| Error::domain("tangent ladder needs at least one radius"))?;
    Ok(TangentFlow {
        radii: radii.to_vec(),
        eps: eps_all,
        tangents,
        tangent,
    })
}

/// Unit half-ball L2 normalization with the deterministic sign that makes
/// the lexicographically first nonzero coefficient positive.
pub fn normalize_tangent(p: &Polynomial) -> Result<Polynomial> {
    let nrm2 = crate::hhp::inner_product_half_ball(p, p);
    if nrm2 <= 1e-280 {
        return Err(Error::degenerate("tangent candidate has no mass"));
    }
    let mut q = p.scaled(1.0 / nrm2.sqrt());
    let sign = q
        .terms()
        .find(|(_, &c)| c != 0.0)
        .map(|(_, &c)| if c < 0.0 { -1.0 } else { 1.0 })
        .unwrap_or(1.0);
    if sign < 0.0 {
        q = q.scaled(-1.0);
    }
    Ok(q)
}

/// Sign-aligned L2 half-ball distance between normalized polynomials.
pub fn tangent_distance(p: &Polynomial, q: &Polynomial) -> Result<f64> {
    let pn = normalize_tangent(p)?;
    let qn = normalize_tangent(q)?;
    let diff = pn.sub(&qn);
    let sum = pn.add(&qn);
    let d1 = crate::hhp::inner_product_half_ball(&diff, &diff).sqrt();
    let d2 = crate::hhp::inner_product_half_ball(&sum, &sum).sqrt();
    Ok(d1.min(d2))
}

/// Quintic ramp: 1 on `[0, R/2]`, 0 at and beyond `R`, C2-smooth between.
pub fn cutoff(rho: f64, big_r: f64) -> f64 {
    if rho <= 0.5 * big_r {
        return 1.0;
    }
    if rho >= big_r {
        return 0.0;
    }
    let s = (rho - 0.5 * big_r) / (0.5 * big_r);
    1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
}

/// The force of the flattened equation: `zeta(|Z|) (A(Z) - Id) grad v(Z)`
/// on the oddly-extended field (the coefficient below the interface is the
/// reflected one).
pub fn force_of_chart<'a>(
    ext: &'a dyn Field,
    chart: &'a Chart<'a>,
    big_r: f64,
) -> impl Fn(&[f64]) -> Vec<f64> + 'a {
    move |z: &[f64]| {
        let d = z.len();
        let zeta = cutoff(norm(z), big_r);
        if zeta == 0.0 || chart.domain.is_flat() {
            return vec![0.0; d];
        }
        let a = match chart.coefficient_matrix_ext(&z[..d - 1], z[d - 1]) {
            Ok(a) => a,
            Err(_) => return vec![0.0; d],
        };
        let g = ext.gradient(z);
        let ag = a.matvec(&g);
        (0..d).map(|i| zeta * (ag[i] - g[i])).collect()
    }
}

/// Newtonian potential `w(Y) = int grad Gamma(Y - Z) . f(Z) dZ` of a
/// force supported in `B_R`, evaluated by polar quadrature around `Y`
/// where the kernel singularity cancels exactly:
/// `w(Y) = sigma^{-1} int_S int_0^{exit} n . f(Y + t n) dt dsigma(n)`.
pub fn newtonian_w_of(
    force: &dyn Fn(&[f64]) -> Vec<f64>,
    dim: usize,
    big_r: f64,
    y: &[f64],
) -> Result<f64> {
    let dirs = directions(dim, 64)?;
    let sigma = sphere_area(dim);
    let mut sum = 0.0;
    let mut pt = vec![0.0; dim];
    for (n, wn) in &dirs {
        let exit = ray_ball_exit(y, n, big_r);
        if exit <= 0.0 {
            continue;
        }
        let mut ray = 0.0;
        let panels = 6;
        let step = exit / panels as f64;
        for p in 0..panels {
            for (t, wt) in gl_on(step * p as f64, step * (p + 1) as f64, 4) {
                for k in 0..dim {
                    pt[k] = y[k] + t * n[k];
                }
                let f = force(&pt);
                ray += wt * crate::linalg::dot(n, &f);
            }
        }
        sum += wn * ray;
    }
    Ok(sum / sigma)
}

/// Potential of a chart's force field.
pub fn newtonian_w(
    ext: &dyn Field,
    chart: &Chart<'_>,
    big_r: f64,
    y: &[f64],
) -> Result<f64> {
    if chart.domain.is_flat() {
        return Ok(0.0);
    }
    let force = force_of_chart(ext, chart, big_r);
    newtonian_w_of(&force, ext.dim(), big_r, y)
}

/// Taylor polynomial (degrees `0..=order`) of the Newtonian potential of
/// `force` at the origin, from kernel-derivative integrals over
/// `{delta <= |Z| < R}` with a dyadic `delta` ladder. Returns the
/// polynomial at the smallest cutoff and the drift of the last halving as
/// a noise estimate (coefficient scale).
pub fn kernel_polynomial_of(
    force: &dyn Fn(&[f64]) -> Vec<f64>,
    dim: usize,
    big_r: f64,
    order: u32,
) -> Result<(Polynomial, f64)> {
    let dirs = directions(dim, POLAR_ANGLES_2D)?;
    // Sample points per degree: unisolvent sets on the unit sphere.
    let mut samples: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut mono_sets: Vec<Vec<Vec<u32>>> = Vec::new();
    for k in 0..=order as usize {
        let monos = monomials(dim, k);
        let m = monos.len();
        let want = (3 * m).min(dirs.len());
        let stride = dirs.len() / want;
        let pts: Vec<Vec<f64>> = (0..want).map(|i| dirs[i * stride].0.clone()).collect();
        samples.push(pts);
        mono_sets.push(monos);
    }

    // Shells: [R/2, R] then dyadic halvings down to R 2^{-ladder}.
    let ladder = 11usize;
    let mut shells: Vec<(f64, f64)> = vec![(0.5 * big_r, big_r)];
    for j in 1..ladder {
        shells.push((big_r * 0.5f64.powi(j as i32 + 1), big_r * 0.5f64.powi(j as i32)));
    }

    // Accumulated sampled values of each degree term, per shell.
    let n_deg = order as usize + 1;
    let mut shell_vals: Vec<Vec<Vec<f64>>> = shells
        .iter()
        .map(|_| samples.iter().map(|s| vec![0.0; s.len()]).collect())
        .collect();
    let mut pt = vec![0.0; dim];
    for (si, &(a, b)) in shells.iter().enumerate() {
        for (n, wn) in &dirs {
            for (t, wt) in gl_on(a, b, 8) {
                for k in 0..dim {
                    pt[k] = t * n[k];
                }
                let f = force(&pt);
                if f.iter().all(|&v| v == 0.0) {
                    continue;
                }
                let jac = wn * wt * t.powi(dim as i32 - 1);
                for k in 0..n_deg {
                    for (i, y) in samples[k].iter().enumerate() {
                        let term = gamma_taylor_term(y, &pt, k)?;
                        shell_vals[si][k][i] += jac * crate::linalg::dot(&term, &f);
                    }
                }
            }
        }
    }

    // Prefix sums from the outermost shell inwards give the delta ladder.
    let mut totals: Vec<Vec<f64>> = samples.iter().map(|s| vec![0.0; s.len()]).collect();
    let mut prev_snapshot: Option<Vec<Vec<f64>>> = None;
    let mut last_snapshot: Option<Vec<Vec<f64>>> = None;
    for (si, _) in shells.iter().enumerate() {
        for k in 0..n_deg {
            for i in 0..totals[k].len() {
                totals[k][i] += shell_vals[si][k][i];
            }
        }
        if si + 1 == shells.len() {
            last_snapshot = Some(totals.clone());
        } else if si + 2 == shells.len() {
            prev_snapshot = Some(totals.clone());
        }
    }
    let last = last_snapshot.unwrap();
    let prev = prev_snapshot.unwrap_or_else(|| last.clone());
    let mut noise = 0.0f64;
    for k in 0..n_deg {
        for i in 0..last[k].len() {
            noise = noise.max((last[k][i] - prev[k][i]).abs());
        }
    }

    // Fit each homogeneous degree by least squares on its sample values.
    let mut poly = Polynomial::new(dim);
    for k in 0..n_deg {
        let monos = &mono_sets[k];
        let pts = &samples[k];
        let mut a = Mat::zeros(pts.len(), monos.len());
        for (i, y) in pts.iter().enumerate() {
            for (j, alpha) in monos.iter().enumerate() {
                let mut v = 1.0;
                for (x, &e) in y.iter().zip(alpha) {
                    v *= x.powi(e as i32);
                }
                a[(i, j)] = v;
            }
        }
        let c = lstsq(&a, &last[k])?;
        for (j, alpha) in monos.iter().enumerate() {
            if c[j] != 0.0 {
                poly = poly.add(&Polynomial::monomial(dim, alpha, c[j]));
            }
        }
    }
    Ok((poly, noise))
}

/// Kernel Taylor polynomial of a chart's force field.
pub fn kernel_polynomial(
    ext: &dyn Field,
    chart: &Chart<'_>,
    big_r: f64,
    order: u32,
) -> Result<(Polynomial, f64)> {
    if chart.domain.is_flat() {
        return Ok((Polynomial::new(ext.dim()), 0.0));
    }
    let force = force_of_chart(ext, chart, big_r);
    kernel_polynomial_of(&force, ext.dim(), big_r, order)
}

/// The assembled boundary expansion `v = P + psi` in flat coordinates.
pub struct Expansion {
    pub order: u32,
    /// Harmonic projection of `v - w` (degrees `<= order`).
    pub p_harmonic: Polynomial,
    /// Kernel Taylor polynomial of `w` (degrees `<= order`).
    pub p_kernel: Polynomial,
    /// `P = p_harmonic + p_kernel`.
    pub polynomial: Polynomial,
    /// Drift of the last kernel-ladder halving (coefficient scale).
    pub kernel_noise: f64,
    /// Fraction of the squared mass of `v` captured by `P` on the probe
    /// ball `B_{R/16}`.
    pub mass_fraction: f64,
}

/// Assemble the expansion of an oddly-extended flat-side field around the
/// boundary origin: `P1` from the harmonic projection of `v - w` over the
/// full ball `B_{R/4}`, `P2` from the kernel ladder, then a mass audit at
/// the probe radius `R/16`.
pub fn assemble_expansion(
    ext: &dyn Field,
    chart: &Chart<'_>,
    order: u32,
    big_r: f64,
) -> Result<Expansion> {
    let dim = ext.dim();
    if ext.hull_radius() < big_r {
        return Err(Error::domain(format!(
            "field hull {:.3} does not cover the working radius {big_r:.3}",
            ext.hull_radius()
        )));
    }
    let (p_kernel, kernel_noise) = kernel_polynomial(ext, chart, big_r, order)?;

    // Projection of v - w over the full ball of radius R/4, in rescaled
    // coordinates W = Y / (R/4) where the basis is orthonormal.
    let rp = 0.25 * big_r;
    let basis = orthonormal_basis_full(dim, order as usize)?;
    let dirs = directions(dim, 80)?;
    let force = force_of_chart(ext, chart, big_r);
    let flat = chart.domain.is_flat();
    // Quadrature nodes (polar over the full ball) with cached v - w.
    let mut nodes: Vec<(Vec<f64>, f64, f64)> = Vec::new();
    for (n, wn) in &dirs {
        for (t, wt) in gl_on(0.0, 1.0, 12) {
            let y: Vec<f64> = n.iter().map(|ni| rp * t * ni).collect();
            let w_val = if flat {
                0.0
            } else {
                newtonian_w_of(&force, dim, big_r, &y)?
            };
            let g = ext.value(&y) - w_val;
            // Jacobian in W coordinates: t^{d-1} dt dsigma.
            nodes.push((n.iter().map(|ni| t * ni).collect(), wn * wt * t.powi(dim as i32 - 1), g));
        }
    }
    let mut p_harmonic = Polynomial::new(dim);
    for k in 0..basis.len() {
        let e = basis.element(k);
        let mut c = 0.0;
        for (w_pt, jac, g) in &nodes {
            c += jac * g * e.eval(w_pt);
        }
        if c != 0.0 {
            // e_k lives in W coordinates; pull back to Y = rp W.
            p_harmonic = p_harmonic.add(&e.dilate(1.0 / rp).scaled(c));
        }
    }
    let polynomial = p_harmonic.add(&p_kernel);

    // Mass audit on the probe ball.
    let probe = big_r / 16.0;
    let pf = PolyField::new(polynomial.clone());
    let psi = DiffField { a: ext, b: &pf };
    let m_v = crate::frequency::mass(ext, &vec![0.0; dim], probe)?;
    let m_psi = crate::frequency::mass(&psi, &vec![0.0; dim], probe)?;
    let mass_fraction = if m_v > 0.0 { (1.0 - m_psi / m_v).max(0.0) } else { 0.0 };

    Ok(Expansion {
        order,
        p_harmonic,
        p_kernel,
        polynomial,
        kernel_noise,
        mass_fraction,
    })
}

/// One radius rung of an error-band check.
#[derive(Debug, Clone)]
pub struct BandReport {
    pub radii: Vec<f64>,
    pub sups: Vec<f64>,
    pub bounds: Vec<f64>,
    pub ratios: Vec<f64>,
}

fn sup_on_sphere(field: &dyn Field, rho: f64, grad: bool) -> Result<f64> {
    let dim = field.dim();
    let dirs = directions(dim, 256)?;
    let mut sup = 0.0f64;
    for (n, _) in &dirs {
        let p: Vec<f64> = n.iter().map(|ni| rho * ni).collect();
        let v = if grad {
            norm(&field.gradient(&p))
        } else {
            field.value(&p).abs()
        };
        sup = sup.max(v);
    }
    Ok(sup)
}

/// Sup of `|v - P|` on spheres `|Y| = rho` against the modulus band
/// `rho^order * theta_tilde(2 rho)`.
pub fn psi_sup_band(
    ext: &dyn Field,
    expansion: &Expansion,
    modulus: &Modulus,
    cfg: &ModulusConfig,
    radii: &[f64],
) -> Result<BandReport> {
    let pf = PolyField::new(expansion.polynomial.clone());
    let psi = DiffField { a: ext, b: &pf };
    let mut report = BandReport {
        radii: radii.to_vec(),
        sups: Vec::new(),
        bounds: Vec::new(),
        ratios: Vec::new(),
    };
    for &rho in radii {
        let sup = sup_on_sphere(&psi, rho, false)?;
        let bound = rho.powi(expansion.order as i32) * theta_tilde(modulus, cfg, 2.0 * rho)?;
        report.sups.push(sup);
        report.bounds.push(bound);
        report.ratios.push(if bound > 0.0 { sup / bound } else { f64::INFINITY });
    }
    Ok(report)
}

/// Sup of `|grad(v - P)|` on spheres against
/// `rho^{order-1} * theta_ring(2 rho)`.
pub fn psi_grad_band(
    ext: &dyn Field,
    expansion: &Expansion,
    modulus: &Modulus,
    cfg: &ModulusConfig,
    radii: &[f64],
) -> Result<BandReport> {
    let pf = PolyField::new(expansion.polynomial.clone());
    let psi = DiffField { a: ext, b: &pf };
    let mut report = BandReport {
        radii: radii.to_vec(),
        sups: Vec::new(),
        bounds: Vec::new(),
        ratios: Vec::new(),
    };
    for &rho in radii {
        let sup = sup_on_sphere(&psi, rho, true)?;
        let bound =
            rho.powi(expansion.order as i32 - 1) * theta_ring(modulus, cfg, 2.0 * rho)?;
        report.sups.push(sup);
        report.bounds.push(bound);
        report.ratios.push(if bound > 0.0 { sup / bound } else { f64::INFINITY });
    }
    Ok(report)
}

/// Evaluate the flat-coordinates polynomial on the curved domain: ambient
/// point in, `P(to_flat(X))` out.
pub fn graph_form_value(poly: &Polynomial, chart: &Chart<'_>, point: &[f64]) -> Result<f64> {
    let flat = chart.to_flat(point)?;
    Ok(poly.eval(&flat))
}

/// Residual of the vertical-shift identity
/// `P(x, t - phi) = P(x, t) - phi int_0^1 (d_d P)(x, t - tau phi) dtau`
/// with the integral evaluated by 8-node Gauss (exact for polynomial
/// integrands). A direct check that the graph form of the expansion and
/// its polynomial-plus-correction form agree.
pub fn shift_identity_residual(poly: &Polynomial, x: &[f64], t: f64, phi: f64) -> f64 {
    let dim = poly.dim;
    let mut shifted = x.to_vec();
    shifted.push(t - phi);
    let lhs = poly.eval(&shifted);
    let mut plain = x.to_vec();
    plain.push(t);
    let dd = poly.derivative(dim - 1);
    let mut correction = 0.0;
    for (tau, w) in gl_on(0.0, 1.0, 8) {
        let mut p = x.to_vec();
        p.push(t - tau * phi);
        correction += w * dd.eval(&p);
    }
    let rhs = poly.eval(&plain) - phi * correction;
    (lhs - rhs).abs()
}

/// Least-squares slope of `ln(values)` against `ln(radii)`; the decay
/// order of a ladder.
pub fn log_slope(radii: &[f64], values: &[f64]) -> f64 {
    let n = radii.len().min(values.len());
    assert!(n >= 2, "slope needs at least two points");
    let xs: Vec<f64> = radii[..n].iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = values[..n].iter().map(|v| v.max(1e-300).ln()).collect();
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n {
        num += (xs[i] - mx) * (ys[i] - my);
        den += (xs[i] - mx) * (xs[i] - mx);
    }
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::PolyField;
    use crate::geometry::{GraphDomain, GraphShape};
    use crate::hhp::orthonormal_vanishing_basis;
    use crate::modulus::Modulus;
    use crate::solver::{extend_odd, solve_dirichlet, CoeffSource, HalfBoxProblem, HalfGrid};

    fn poly(dim: usize, terms: &[(&[u32], f64)]) -> Polynomial {
        let mut p = Polynomial::new(dim);
        for (alpha, c) in terms {
            p = p.add(&Polynomial::monomial(dim, alpha, *c));
        }
        p
    }

    #[test]
    fn blowup_has_unit_mass() {
        let u = poly(2, &[(&[0, 1], 1.0), (&[1, 1], 2.0)]);
        let field = PolyField::on_halfspace(u);
        let t = blowup(&field, &[0.0, 0.0], 0.3).unwrap();
        let mass = crate::frequency::mass(&t, &[0.0, 0.0], 1.0).unwrap();
        assert!((mass - 1.0).abs() < 1e-10, "blowup mass {mass}");
    }

    #[test]
    fn tangent_recovers_homogeneous_harmonic() {
        // u = 2 y s is already homogeneous harmonic of degree 2; every
        // blowup equals its normalized self, eps = 0.
        let u = poly(2, &[(&[1, 1], 2.0)]);
        let field = PolyField::on_halfspace(u.clone());
        let basis = orthonormal_vanishing_basis(2, 3).unwrap();
        let flow = tangent_from_blowups(&field, &[0.0, 0.0], 2, &[0.4, 0.2], &basis).unwrap();
        for e in &flow.eps {
            assert!(*e < 1e-8, "eps {e}");
        }
        let d = tangent_distance(&flow.tangent, &u).unwrap();
        assert!(d < 1e-8, "tangent distance {d}");
    }

    #[test]
    fn tangent_flow_converges_at_first_order() {
        // u = s + 2 y s: the degree-1 tangent is s and eps(r) ~ r.
        let u = poly(2, &[(&[0, 1], 1.0), (&[1, 1], 2.0)]);
        let field = PolyField::on_halfspace(u);
        let basis = orthonormal_vanishing_basis(2, 3).unwrap();
        let radii = [0.4, 0.2, 0.1, 0.05];
        let flow = tangent_from_blowups(&field, &[0.0, 0.0], 1, &radii, &basis).unwrap();
        for w in flow.eps.windows(2) {
            assert!(w[1] < w[0], "eps ladder not decreasing: {:?}", flow.eps);
        }
        let slope = log_slope(&radii, &flow.eps);
        assert!(slope > 0.9, "eps decay slope {slope}");
        let s_only = poly(2, &[(&[0, 1], 1.0)]);
        let d = tangent_distance(&flow.tangent, &s_only).unwrap();
        assert!(d < 0.12, "tangent distance to s: {d}");
    }

    #[test]
    fn cutoff_ramp_shape() {
        assert_eq!(cutoff(0.2, 1.0), 1.0);
        assert_eq!(cutoff(0.5, 1.0), 1.0);
        assert_eq!(cutoff(1.0, 1.0), 0.0);
        assert_eq!(cutoff(1.5, 1.0), 0.0);
        let mid = cutoff(0.75, 1.0);
        assert!(mid > 0.4 && mid < 0.6, "midpoint {mid}");
        // C1 near the joins: finite differences stay small.
        let eps = 1e-6;
        for rho in [0.5, 1.0] {
            let d = (cutoff(rho + eps, 1.0) - cutoff(rho - eps, 1.0)) / (2.0 * eps);
            assert!(d.abs() < 1e-4, "ramp derivative {d} at {rho}");
        }
    }

    /// Green-identity oracle: for f = grad G with G supported inside the
    /// cutoff plateau, the potential of f is exactly -G.
    fn bump_force(dim: usize, rho: f64) -> impl Fn(&[f64]) -> Vec<f64> {
        move |z: &[f64]| {
            let r2: f64 = z.iter().map(|v| v * v).sum::<f64>() / (rho * rho);
            if r2 >= 1.0 {
                return vec![0.0; dim];
            }
            // G = (1 - r^2)^4, grad G = -8 (1 - r^2)^3 z / rho^2.
            let u = 1.0 - r2;
            z.iter().map(|&v| -8.0 * u * u * u * v / (rho * rho)).collect()
        }
    }

    fn bump(z: &[f64], rho: f64) -> f64 {
        let r2: f64 = z.iter().map(|v| v * v).sum::<f64>() / (rho * rho);
        if r2 >= 1.0 {
            return 0.0;
        }
        let u = 1.0 - r2;
        u * u * u * u
    }

    #[test]
    fn newtonian_potential_matches_green_identity_2d() {
        let rho = 0.5;
        let force = bump_force(2, rho);
        for y in [[0.0, 0.0], [0.2, 0.1], [-0.3, 0.25], [0.7, 0.0]] {
            let w = newtonian_w_of(&force, 2, 1.0, &y).unwrap();
            let want = -bump(&y, rho);
            assert!(
                (w - want).abs() < 2e-4,
                "w({y:?}) = {w}, want {want}"
            );
        }
    }

    #[test]
    fn newtonian_potential_matches_green_identity_3d() {
        let rho = 0.5;
        let force = bump_force(3, rho);
        for y in [[0.1, 0.0, 0.05], [-0.2, 0.15, 0.1]] {
            let w = newtonian_w_of(&force, 3, 1.0, &y).unwrap();
            let want = -bump(&y, rho);
            assert!((w - want).abs() < 2e-4, "w({y:?}) = {w}, want {want}");
        }
    }

    #[test]
    fn kernel_polynomial_matches_bump_taylor() {
        // Taylor of w = -G at 0: constant -1, vanishing gradient.
        let rho = 0.5;
        let force = bump_force(2, rho);
        let (p, noise) = kernel_polynomial_of(&force, 2, 1.0, 1).unwrap();
        let c0 = p.coeff(&[0, 0]);
        assert!((c0 + 1.0).abs() < 1e-3, "constant coefficient {c0}");
        assert!(p.coeff(&[1, 0]).abs() < 1e-3);
        assert!(p.coeff(&[0, 1]).abs() < 1e-3);
        // The ladder drift is the innermost annulus: near 0 the integrand
        // tends to -8/(2 pi rho^2) = -16/pi, so the last halving adds
        // -16 (2^{-20} - 2^{-22}) for R = 1.
        let want = 16.0 * (0.5f64.powi(20) - 0.5f64.powi(22));
        assert!(
            (noise - want).abs() < 1e-7,
            "ladder noise {noise} vs derived {want}"
        );
    }

    #[test]
    fn flat_expansion_is_exact_on_harmonic_polynomials() {
        // With the identity coefficient the kernel route is empty and the
        // projection reproduces the polynomial exactly.
        let domain = GraphDomain::flat(2);
        let chart = Chart::new(&domain, &[0.0]);
        let u = poly(2, &[(&[0, 1], 1.3), (&[1, 1], -0.8)]);
        let field = PolyField::new(u.clone());
        let exp = assemble_expansion(&field, &chart, 2, 1.0).unwrap();
        assert!(exp.p_kernel.is_empty(), "kernel part should vanish");
        let delta = exp.polynomial.sub(&u).max_abs_coeff();
        assert!(delta < 1e-8, "coefficient error {delta}");
        assert!(exp.mass_fraction > 0.999999, "mass fraction {}", exp.mass_fraction);
    }

    #[test]
    fn curved_expansion_routes_agree() {
        // Solve the gentle curved problem, expand, and compare the
        // degree-1 part of P with the blowup tangent.
        let domain = GraphDomain::new(
            2,
            GraphShape::RadialPower { kappa: 0.003, power: 1.5 },
            Modulus::power(0.5, 0.0064, 4.0).unwrap(),
        )
        .unwrap();
        let chart = Chart::new(&domain, &[0.0]);
        let grid = HalfGrid::new(2, 1.0, 1.0, 1.0 / 64.0).unwrap();
        let problem = HalfBoxProblem {
            grid,
            coeff: CoeffSource::Chart(&chart),
            bc: &|p: &[f64]| if p[1] <= 0.0 { 0.0 } else { p[1] },
        };
        let sol = solve_dirichlet(&problem).unwrap();
        let ext = extend_odd(&sol.field).unwrap();
        let exp = assemble_expansion(&ext, &chart, 1, 0.8).unwrap();
        assert!(exp.mass_fraction > 0.99, "mass fraction {}", exp.mass_fraction);

        let basis = orthonormal_vanishing_basis(2, 2).unwrap();
        let flow =
            tangent_from_blowups(&sol.field, &[0.0, 0.0], 1, &[0.2, 0.1, 0.05], &basis).unwrap();
        let p1 = exp.polynomial.degree_part(1);
        let d = tangent_distance(&p1, &flow.tangent).unwrap();
        assert!(d < 8e-2, "route disagreement {d}");
    }

    #[test]
    fn shift_identity_exact_for_polynomials() {
        let p = poly(2, &[(&[0, 1], 1.0), (&[1, 1], 2.0), (&[0, 2], -0.7)]);
        for (x, t, phi) in [(0.3, 0.4, 0.05), (-0.2, 0.7, 0.13), (0.0, 0.1, 0.0)] {
            let r = shift_identity_residual(&p, &[x], t, phi);
            assert!(r < 1e-13, "identity residual {r}");
        }
    }

    #[test]
    fn log_slope_recovers_power() {
        let radii = [0.4f64, 0.2, 0.1, 0.05];
        let values: Vec<f64> = radii.iter().map(|r| 3.0 * r.powf(1.5)).collect();
        let s = log_slope(&radii, &values);
        assert!((s - 1.5).abs() < 1e-12, "slope {s}");
    }
}
