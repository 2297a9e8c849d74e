//! Frequency functionals: the Almgren ratio, its modulus-corrected
//! monotone variant, vanishing orders, and doubling exponents.
//!
//! For a field `u` on a domain `D`, the ratio
//! `N(r) = r * int_{B_r cap D} |grad u|^2 / int_{dB_r cap D} u^2`
//! is the basic order-of-vanishing meter: it is exactly the degree on
//! homogeneous harmonics (Euler's identity plus Green), monotone in `r`
//! for harmonic fields, and monotone after an `exp(C int_0^r theta/s)`
//! correction with an interior-shifted center on Dini graph domains.

use crate::field::Field;
use crate::modulus::{dini_integral, theta_hat, Modulus, ModulusConfig};
use crate::quad::{integrate_ball_masked, integrate_sphere};
use crate::{Error, Result};

/// Gauss order per radial panel in energy integrals.
const RADIAL_N: usize = 24;

/// Relative floor under which the height integral counts as roundoff.
const HEIGHT_FLOOR: f64 = 1e-14;

/// Height `int_{dB_r(center) cap D} u^2`.
pub fn height(field: &dyn Field, center: &[f64], r: f64) -> Result<f64> {
    integrate_sphere(center, r, |p| {
        if field.inside(p) {
            let v = field.value(p);
            v * v
        } else {
            0.0
        }
    })
}

/// Dirichlet energy `int_{B_r(center) cap D} |grad u|^2`.
pub fn dirichlet(field: &dyn Field, center: &[f64], r: f64) -> Result<f64> {
    integrate_ball_masked(
        center,
        r,
        RADIAL_N,
        |p| field.inside(p),
        |p| field.gradient(p).iter().map(|g| g * g).sum::<f64>(),
    )
}

/// Squared-mass `int_{B_r(center) cap D} u^2`.
pub fn mass(field: &dyn Field, center: &[f64], r: f64) -> Result<f64> {
    integrate_ball_masked(
        center,
        r,
        RADIAL_N,
        |p| field.inside(p),
        |p| {
            let v = field.value(p);
            v * v
        },
    )
}

/// Scale-invariant normalizer `(r^{-d} int_{B_r cap D} u^2)^{1/2}`.
pub fn l2_ball(field: &dyn Field, center: &[f64], r: f64) -> Result<f64> {
    let m = mass(field, center, r)?;
    Ok((m * r.powi(-(field.dim() as i32))).sqrt())
}

/// Coarse sup of `|u|` over the ball, sampled on sphere shells; used only
/// to scale the roundoff floor of the height.
fn sup_scale(field: &dyn Field, center: &[f64], r: f64) -> Result<f64> {
    let mut sup = 0.0f64;
    for frac in [0.25, 0.5, 1.0] {
        integrate_sphere(center, frac * r, |p| {
            if field.inside(p) {
                sup = sup.max(field.value(p).abs());
            }
            0.0
        })?;
    }
    Ok(sup)
}

/// Almgren ratio `r D(r) / H(r)`; degenerate when the height has
/// collapsed to roundoff relative to the field's size.
pub fn almgren(field: &dyn Field, center: &[f64], r: f64) -> Result<f64> {
    let h = height(field, center, r)?;
    let sup = sup_scale(field, center, r)?;
    let floor = HEIGHT_FLOOR * sup * sup * r.powi(field.dim() as i32 - 1);
    if h <= floor || sup == 0.0 {
        return Err(Error::degenerate(format!(
            "height {h:.3e} at radius {r:.3e} is below the roundoff floor {floor:.3e}"
        )));
    }
    let d = dirichlet(field, center, r)?;
    Ok(r * d / h)
}

/// Modulus-corrected frequency at radius `r` for a field anchored at a
/// boundary point placed at the origin of flat coordinates: the center is
/// shifted into the domain by `3 r theta_hat(r)` along the vertical axis
/// and the ratio is multiplied by `exp(C int_0^r theta/s ds)`. Requires
/// the smallness condition `theta(4r) < 1/26`.
pub fn modified_frequency(
    field: &dyn Field,
    modulus: &Modulus,
    cfg: &ModulusConfig,
    r: f64,
) -> Result<f64> {
    if modulus.eval(4.0 * r) >= 1.0 / 26.0 {
        return Err(Error::domain(format!(
            "theta(4r) = {:.4} at r = {r:.3e} violates the smallness condition",
            modulus.eval(4.0 * r)
        )));
    }
    let dim = field.dim();
    let mut center = vec![0.0; dim];
    center[dim - 1] = 3.0 * r * theta_hat(modulus, r, cfg.quad_tol)?;
    let n = almgren(field, &center, r)?;
    let damping = dini_integral(modulus, 0.0, r, cfg.quad_tol)?;
    Ok((cfg.freq_constant * damping).exp() * n)
}

/// A frequency sweep over an ascending radius ladder.
#[derive(Debug, Clone)]
pub struct FrequencyCurve {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
}

impl FrequencyCurve {
    /// Largest violation of monotone nondecrease along the curve
    /// (zero when the curve is nondecreasing).
    pub fn max_drop(&self) -> f64 {
        self.values
            .windows(2)
            .map(|w| w[0] - w[1])
            .fold(0.0f64, f64::max)
    }
}

/// Plain Almgren sweep around a fixed center.
pub fn frequency_curve(
    field: &dyn Field,
    center: &[f64],
    radii: &[f64],
) -> Result<FrequencyCurve> {
    let mut values = Vec::with_capacity(radii.len());
    for &r in radii {
        values.push(almgren(field, center, r)?);
    }
    Ok(FrequencyCurve {
        radii: radii.to_vec(),
        values,
    })
}

/// Modulus-corrected sweep anchored at the flat origin.
pub fn modified_curve(
    field: &dyn Field,
    modulus: &Modulus,
    cfg: &ModulusConfig,
    radii: &[f64],
) -> Result<FrequencyCurve> {
    let mut values = Vec::with_capacity(radii.len());
    for &r in radii {
        values.push(modified_frequency(field, modulus, cfg, r)?);
    }
    Ok(FrequencyCurve {
        radii: radii.to_vec(),
        values,
    })
}

/// Vanishing order at `center`: the Almgren ratio at the smallest radius
/// of the ladder, snapped to the nearest integer. Fails when the ratio
/// sits further than the snap threshold from every integer.
pub fn vanishing_order(
    field: &dyn Field,
    center: &[f64],
    radii: &[f64],
) -> Result<(u32, f64)> {
    if radii.is_empty() {
        return Err(Error::domain("vanishing_order needs at least one radius"));
    }
    let r_min = radii.iter().cloned().fold(f64::INFINITY, f64::min);
    let n = almgren(field, center, r_min)?;
    let snapped = n.round();
    if (n - snapped).abs() > 0.3 || snapped < 0.0 {
        return Err(Error::extraction(format!(
            "frequency {n:.4} at radius {r_min:.3e} does not snap to an integer order"
        )));
    }
    Ok((snapped as u32, n))
}

/// One rung of a doubling sweep: the measured mass-doubling exponent at
/// radius pair `(r, 2r)` together with the band predicted by the
/// frequency bounds.
#[derive(Debug, Clone)]
pub struct DoublingBand {
    pub r: f64,
    pub exponent: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Mass-doubling exponents `log2(M(2r)/M(r))` with predicted bands
/// `[d + 2 N_limit exp(-C int_0^{4r} theta/s), d + 2 N_mod(2r)]`, where
/// `N_limit` is the vanishing order at the anchor.
pub fn doubling_exponents(
    field: &dyn Field,
    modulus: &Modulus,
    cfg: &ModulusConfig,
    radii: &[f64],
    limit_order: f64,
) -> Result<Vec<DoublingBand>> {
    let dim = field.dim() as f64;
    let origin = vec![0.0; field.dim()];
    let mut out = Vec::with_capacity(radii.len());
    for &r in radii {
        let m1 = mass(field, &origin, r)?;
        let m2 = mass(field, &origin, 2.0 * r)?;
        if m1 <= 0.0 || m2 <= 0.0 {
            return Err(Error::degenerate(format!(
                "vanishing mass at radius {r:.3e} in a doubling sweep"
            )));
        }
        let exponent = (m2 / m1).log2();
        let damping = dini_integral(modulus, 0.0, 4.0 * r, cfg.quad_tol)?;
        let lower = dim + 2.0 * limit_order * (-cfg.freq_constant * damping).exp();
        let upper = dim + 2.0 * modified_frequency(field, modulus, cfg, 2.0 * r)?;
        out.push(DoublingBand {
            r,
            exponent,
            lower,
            upper,
        });
    }
    Ok(out)
}
