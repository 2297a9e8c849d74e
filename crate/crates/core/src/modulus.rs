//! Dini moduli of continuity and the derived decay moduli.
//!
//! A modulus `theta` is nondecreasing with `theta(0) = 0`; the Dini
//! condition asks that `int_0 theta(s)/s ds` converges. Everything
//! quantitative downstream (frequency drift, blow-up rates, error bands) is
//! expressed through the derived moduli built here:
//!
//! * `theta_hat`   - double log-average of the Dini slice, sandwiched
//!   between `theta(r)` and `theta(4r)`; drives the boundary-shift map.
//! * `theta_tilde` - `theta(4r) + int_0^{4r} theta/s + r int_{4r}^{2R}
//!   theta/s^2`; the blow-up convergence modulus.
//! * `theta_sharp` - `sup_{s in [t, R]} (t/s)^beta theta(s)`; the largest
//!   beta-decaying majorant, used by the gradient bands.
//! * `theta_ring`  - `theta_tilde(3r) + theta(4r) + int_0^{4r} theta/s +
//!   int_0^{4r} theta_sharp/s`; the gradient-error modulus.
//!
//! Improper integrals from 0 are computed with an analytic head per
//! modulus kind below a small cutoff plus adaptive panels in the
//! log-variable `t = ln s` above it, so slowly converging kinds (log-power)
//! still meet absolute tolerances near machine precision.

use crate::quad::adaptive;
use crate::{Error, Result};

/// Functional form of a modulus of continuity.
#[derive(Debug, Clone)]
pub enum ModulusKind {
    /// Identically zero (flat boundary, exact half-space geometry).
    Zero,
    /// `theta(r) = c r^alpha` with `alpha` strictly inside `(0, 1)`.
    Power { alpha: f64, c: f64 },
    /// `theta(r) = c / log^p(e + 1/r)` with `p > 1`; Dini but slower than
    /// any power.
    LogPower { p: f64, c: f64 },
    /// Piecewise-linear interpolation of user samples `(r_i, v_i)`,
    /// monotonized by a running maximum. Below the first positive node the
    /// value extends linearly from a `(0, 0)` node when one is supplied and
    /// as the constant `v_0` otherwise (the latter is non-Dini unless
    /// `v_0 = 0`).
    Table { nodes: Vec<(f64, f64)> },
}

/// A modulus of continuity, frozen to a constant beyond `cap`.
#[derive(Debug, Clone)]
pub struct Modulus {
    kind: ModulusKind,
    cap: f64,
}

impl Modulus {
    pub fn zero() -> Self {
        Modulus {
            kind: ModulusKind::Zero,
            cap: f64::INFINITY,
        }
    }

    pub fn power(alpha: f64, c: f64, cap: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::domain(format!(
                "power modulus needs alpha in (0, 1), got {alpha}"
            )));
        }
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::domain(format!(
                "power modulus needs finite c >= 0, got {c}"
            )));
        }
        Self::check_cap(cap)?;
        Ok(Modulus {
            kind: ModulusKind::Power { alpha, c },
            cap,
        })
    }

    pub fn log_power(p: f64, c: f64, cap: f64) -> Result<Self> {
        if !(p > 1.0) {
            return Err(Error::domain(format!(
                "log-power modulus needs p > 1 for the Dini condition, got {p}"
            )));
        }
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::domain(format!(
                "log-power modulus needs finite c >= 0, got {c}"
            )));
        }
        Self::check_cap(cap)?;
        Ok(Modulus {
            kind: ModulusKind::LogPower { p, c },
            cap,
        })
    }

    /// Build a table modulus. Nodes are sorted, deduplicated, and pushed up
    /// to a running maximum so the result is nondecreasing.
    pub fn table(mut nodes: Vec<(f64, f64)>, cap: f64) -> Result<Self> {
        Self::check_cap(cap)?;
        if nodes.is_empty() {
            return Err(Error::domain("table modulus needs at least one node"));
        }
        for &(r, v) in &nodes {
            if !(r >= 0.0 && r.is_finite() && v >= 0.0 && v.is_finite()) {
                return Err(Error::domain(format!(
                    "table node ({r}, {v}) is not a finite point in the first quadrant"
                )));
            }
        }
        nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
        nodes.dedup_by(|a, b| a.0 == b.0);
        let mut run = 0.0f64;
        for node in nodes.iter_mut() {
            run = run.max(node.1);
            node.1 = run;
        }
        Ok(Modulus {
            kind: ModulusKind::Table { nodes },
            cap,
        })
    }

    fn check_cap(cap: f64) -> Result<()> {
        if cap > 0.0 {
            Ok(())
        } else {
            Err(Error::domain(format!("modulus cap must be positive, got {cap}")))
        }
    }

    /// `theta(r)`; the argument is clamped to `cap` first.
    pub fn eval(&self, r: f64) -> f64 {
        assert!(r >= 0.0 && !r.is_nan(), "modulus argument must be >= 0, got {r}");
        let r = r.min(self.cap);
        match &self.kind {
            ModulusKind::Zero => 0.0,
            ModulusKind::Power { alpha, c } => {
                if r == 0.0 {
                    0.0
                } else {
                    c * r.powf(*alpha)
                }
            }
            ModulusKind::LogPower { p, c } => {
                if r == 0.0 {
                    0.0
                } else {
                    c / (std::f64::consts::E + 1.0 / r).ln().powf(*p)
                }
            }
            ModulusKind::Table { nodes } => {
                let first = nodes[0];
                if r <= first.0 {
                    if first.0 == 0.0 {
                        return first.1;
                    }
                    // Linear from an explicit (0, 0) start, constant
                    // extension otherwise.
                    return if first.1 == 0.0 {
                        0.0
                    } else {
                        first.1
                    };
                }
                let last = nodes[nodes.len() - 1];
                if r >= last.0 {
                    return last.1;
                }
                let idx = nodes.partition_point(|&(x, _)| x <= r);
                let (r0, v0) = nodes[idx - 1];
                let (r1, v1) = nodes[idx];
                v0 + (v1 - v0) * (r - r0) / (r1 - r0)
            }
        }
    }

    /// True when the modulus is identically zero.
    pub fn is_zero(&self) -> bool {
        match &self.kind {
            ModulusKind::Zero => true,
            ModulusKind::Power { c, .. } | ModulusKind::LogPower { c, .. } => *c == 0.0,
            ModulusKind::Table { nodes } => nodes.iter().all(|&(_, v)| v == 0.0),
        }
    }

    pub fn kind(&self) -> &ModulusKind {
        &self.kind
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            ModulusKind::Zero => "zero",
            ModulusKind::Power { .. } => "power",
            ModulusKind::LogPower { .. } => "log_power",
            ModulusKind::Table { .. } => "table",
        }
    }

    /// Value of `theta` at `0+` (zero for Dini moduli; positive for
    /// constant-extended tables, which then fail Dini integrals).
    fn limit_at_zero(&self) -> f64 {
        match &self.kind {
            ModulusKind::Zero | ModulusKind::Power { .. } | ModulusKind::LogPower { .. } => 0.0,
            ModulusKind::Table { nodes } => {
                let first = nodes[0];
                if first.0 == 0.0 || first.1 == 0.0 {
                    if first.0 == 0.0 {
                        first.1
                    } else {
                        0.0
                    }
                } else {
                    first.1
                }
            }
        }
    }

    /// First radius at which the piecewise description can change shape
    /// (first positive table node, or the cap).
    fn first_breakpoint(&self) -> f64 {
        match &self.kind {
            ModulusKind::Table { nodes } => nodes
                .iter()
                .map(|&(r, _)| r)
                .find(|&r| r > 0.0)
                .unwrap_or(self.cap)
                .min(self.cap),
            _ => self.cap,
        }
    }
}

/// Shared numeric configuration for derived moduli.
#[derive(Debug, Clone)]
pub struct ModulusConfig {
    /// Reference radius `R`: the outer scale in tail integrals and the
    /// right endpoint of sharp-modulus suprema.
    pub big_r: f64,
    /// Decay exponent of the sharp modulus, in `(0, 1)`.
    pub beta: f64,
    /// Absolute tolerance for every quadrature in this module.
    pub quad_tol: f64,
    /// Constant in the frequency drift factor `exp(c int_0^r theta/s ds)`.
    pub freq_constant: f64,
}

impl Default for ModulusConfig {
    fn default() -> Self {
        ModulusConfig {
            big_r: 1.0,
            beta: 0.5,
            quad_tol: 1e-10,
            freq_constant: 1.0,
        }
    }
}

impl ModulusConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.big_r > 0.0 && self.big_r.is_finite()) {
            return Err(Error::config(format!("R must be positive, got {}", self.big_r)));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::config(format!(
                "beta must lie in (0, 1), got {}",
                self.beta
            )));
        }
        if !(self.quad_tol > 0.0 && self.quad_tol < 1e-2) {
            return Err(Error::config(format!(
                "quad_tol must lie in (0, 1e-2), got {}",
                self.quad_tol
            )));
        }
        if !(self.freq_constant >= 0.0 && self.freq_constant.is_finite()) {
            return Err(Error::config(format!(
                "freq_constant must be finite and >= 0, got {}",
                self.freq_constant
            )));
        }
        Ok(())
    }
}

/// Standing smallness normalization at the reference radius: requires
/// `theta(8R) < 1/72` and `int_0^{16R} theta(s)/s ds <= 1`.
///
/// Scenario configs that fail this should be rescaled rather than run.
pub fn check_normalization(m: &Modulus, cfg: &ModulusConfig) -> Result<()> {
    cfg.validate()?;
    let at8 = m.eval(8.0 * cfg.big_r);
    if !(at8 < 1.0 / 72.0) {
        return Err(Error::config(format!(
            "modulus too large at scale: theta(8R) = {at8:.6e} >= 1/72"
        )));
    }
    let dini = dini_integral(m, 0.0, 16.0 * cfg.big_r, cfg.quad_tol)?;
    if !(dini <= 1.0) {
        return Err(Error::config(format!(
            "Dini mass too large: int_0^{{16R}} theta/s = {dini:.6e} > 1"
        )));
    }
    Ok(())
}

/// `int_a^b theta(s)/s ds` with `0 <= a < b`, to absolute tolerance `tol`.
///
/// For `a = 0` the integral is improper; an analytic head below a
/// kind-specific cutoff keeps the cost bounded for slowly-decaying moduli.
/// A positive limit of `theta` at zero makes the integral diverge, which is
/// reported as a divergence error.
pub fn dini_integral(m: &Modulus, a: f64, b: f64, tol: f64) -> Result<f64> {
    if !(a >= 0.0 && b >= a && b.is_finite()) {
        return Err(Error::domain(format!(
            "dini_integral needs 0 <= a <= b < inf, got [{a}, {b}]"
        )));
    }
    if a == b || m.is_zero() {
        return Ok(0.0);
    }
    if a > 0.0 {
        return log_variable_panel(m, a, b, tol);
    }
    if m.limit_at_zero() > 0.0 {
        return Err(Error::divergence(format!(
            "theta({:.1e}+) = {:.3e} > 0: int_0 theta/s ds diverges",
            0.0,
            m.limit_at_zero()
        )));
    }
    let (cut, head) = dini_head(m, b);
    if !head.is_finite() {
        return Err(Error::divergence("theta has a positive floor at 0".to_string()));
    }
    if cut >= b {
        return Ok(head);
    }
    Ok(head + log_variable_panel(m, cut, b, tol)?)
}

/// Analytic head `int_0^cut theta(s)/s ds` for a kind-specific cutoff
/// `cut <= limit`. Returns `(cut, value)`.
fn dini_head(m: &Modulus, limit: f64) -> (f64, f64) {
    match &m.kind {
        ModulusKind::Zero => (limit, 0.0),
        ModulusKind::Power { alpha, c } => {
            let cut = limit.min(m.cap);
            (cut, c * cut.powf(*alpha) / alpha)
        }
        ModulusKind::LogPower { p, c } => {
            // With w = ln(e + 1/s): int theta/s ds = int w^-p (1 + e/(e^w - e)) dw.
            // Below w0 = 36 the correction term is ~1e-17 relative, so the
            // head is c w0^(1-p) / (p-1) up to machine precision.
            let w0 = 36.0f64;
            let cut = (1.0 / (w0.exp() - std::f64::consts::E)).min(limit).min(m.cap);
            let w_cut = (std::f64::consts::E + 1.0 / cut).ln();
            (cut, c * w_cut.powf(1.0 - p) / (p - 1.0))
        }
        ModulusKind::Table { nodes } => {
            let first = nodes[0];
            if first.0 == 0.0 && nodes.len() > 1 {
                // Linear segment from (0, 0) to the next node.
                let (r1, v1) = nodes[1];
                let slope = v1 / r1;
                let cut = limit.min(r1).min(m.cap);
                (cut, slope * cut)
            } else if first.0 > 0.0 && first.1 == 0.0 {
                // theta = 0 below the first node.
                let cut = limit.min(first.0).min(m.cap);
                (cut, 0.0)
            } else {
                // Single node at 0: constant table.
                let cut = limit.min(m.cap);
                if first.1 == 0.0 {
                    (cut, 0.0)
                } else {
                    // Diverges; callers screen with limit_at_zero first.
                    (cut, f64::INFINITY)
                }
            }
        }
    }
}

/// Adaptive integration of `theta(s)/s` over `[a, b]`, `a > 0`, in the
/// log variable.
fn log_variable_panel(m: &Modulus, a: f64, b: f64, tol: f64) -> Result<f64> {
    adaptive(&|t: f64| m.eval(t.exp()), a.ln(), b.ln(), tol)
}

/// `int_a^b theta(s)/s^2 ds` with `0 < a <= b`.
pub fn inv_square_integral(m: &Modulus, a: f64, b: f64, tol: f64) -> Result<f64> {
    if !(a > 0.0 && b >= a && b.is_finite()) {
        return Err(Error::domain(format!(
            "inv_square_integral needs 0 < a <= b < inf, got [{a}, {b}]"
        )));
    }
    if a == b || m.is_zero() {
        return Ok(0.0);
    }
    // t = ln s turns theta/s^2 ds into theta(e^t) e^-t dt, an exact change
    // of variables, so the absolute tolerance carries over unchanged.
    adaptive(&|t: f64| m.eval(t.exp()) * (-t).exp(), a.ln(), b.ln(), tol)
}

/// Double log-average `theta_hat(r) = (1/ln^2 2) int_r^{2r} (1/t)
/// int_t^{2t} theta(s)/s ds dt`.
///
/// Satisfies `theta(r) <= theta_hat(r) <= theta(4r)` and inherits the Dini
/// property; it is the modulus used for boundary-shift maps because it is
/// always strictly positive for nonzero `theta` and varies smoothly.
pub fn theta_hat(m: &Modulus, r: f64, tol: f64) -> Result<f64> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::domain(format!("theta_hat needs r > 0, got {r}")));
    }
    if m.is_zero() {
        return Ok(0.0);
    }
    let ln2 = std::f64::consts::LN_2;
    let inner_tol = tol * 0.2 * ln2;
    // Inner slice values sit in [theta(r) ln 2, theta(4r) ln 2]; the outer
    // integrand (1/t) * slice is smooth, so plain adaptive panels suffice.
    let outer = adaptive(
        &|t: f64| {
            let slice = dini_integral(m, t, 2.0 * t, inner_tol).unwrap_or(f64::NAN);
            slice / t
        },
        r,
        2.0 * r,
        tol * 0.5 * ln2 * ln2,
    )?;
    let val = outer / (ln2 * ln2);
    if !val.is_finite() {
        return Err(Error::numeric("theta_hat quadrature produced a non-finite value"));
    }
    Ok(val)
}

/// Blow-up convergence modulus
/// `theta_tilde(r) = theta(4r) + int_0^{4r} theta/s + r int_{4r}^{2R} theta/s^2`.
///
/// Requires `0 < r < R/2` so the tail integral is nontrivial.
pub fn theta_tilde(m: &Modulus, cfg: &ModulusConfig, r: f64) -> Result<f64> {
    if !(r > 0.0 && r < cfg.big_r / 2.0) {
        return Err(Error::domain(format!(
            "theta_tilde needs 0 < r < R/2 = {}, got {r}",
            cfg.big_r / 2.0
        )));
    }
    let head = m.eval(4.0 * r);
    let dini = dini_integral(m, 0.0, 4.0 * r, cfg.quad_tol)?;
    let tail = r * inv_square_integral(m, 4.0 * r, 2.0 * cfg.big_r, cfg.quad_tol)?;
    Ok(head + dini + tail)
}

/// Tail-decay factor `r int_{4r}^{2R} theta(s)/s^2 ds` alone.
pub fn tail_decay(m: &Modulus, cfg: &ModulusConfig, r: f64) -> Result<f64> {
    if !(r > 0.0 && 4.0 * r < 2.0 * cfg.big_r) {
        return Err(Error::domain(format!(
            "tail_decay needs 0 < 4r < 2R, got r = {r}, R = {}",
            cfg.big_r
        )));
    }
    Ok(r * inv_square_integral(m, 4.0 * r, 2.0 * cfg.big_r, cfg.quad_tol)?)
}

/// `h(s) = theta(s) / s^beta`, the ratio maximized by the sharp modulus.
fn sharp_ratio(m: &Modulus, beta: f64, s: f64) -> f64 {
    m.eval(s) / s.powf(beta)
}

/// Sharp modulus `theta_sharp(t) = sup_{s in [t, R]} (t/s)^beta theta(s)
/// = t^beta sup_{s in [t, R]} theta(s)/s^beta`.
///
/// The supremum is scanned on a geometric grid (64 points per decade,
/// breakpoints included) and refined by fixed-iteration golden-section
/// search around the best grid point.
pub fn theta_sharp(m: &Modulus, cfg: &ModulusConfig, t: f64) -> Result<f64> {
    if !(t > 0.0 && t <= cfg.big_r) {
        return Err(Error::domain(format!(
            "theta_sharp needs 0 < t <= R = {}, got {t}",
            cfg.big_r
        )));
    }
    if m.is_zero() {
        return Ok(0.0);
    }
    Ok(t.powf(cfg.beta) * sharp_sup(m, cfg.beta, t, cfg.big_r))
}

/// `sup_{s in [lo, hi]} theta(s)/s^beta` by grid scan plus golden refine.
fn sharp_sup(m: &Modulus, beta: f64, lo: f64, hi: f64) -> f64 {
    debug_assert!(lo > 0.0 && hi >= lo);
    if hi == lo {
        return sharp_ratio(m, beta, lo);
    }
    let per_decade = 64usize;
    let decades = (hi / lo).log10();
    let n = ((decades * per_decade as f64).ceil() as usize).clamp(8, 4000);
    let ratio = (hi / lo).powf(1.0 / n as f64);
    let mut candidates: Vec<f64> = (0..=n).map(|k| lo * ratio.powi(k as i32)).collect();
    // Kinks of the piecewise description are candidate maximizers too.
    if let ModulusKind::Table { nodes } = &m.kind {
        for &(r, _) in nodes {
            if r > lo && r < hi {
                candidates.push(r);
            }
        }
    }
    if m.cap > lo && m.cap < hi {
        candidates.push(m.cap);
    }
    candidates.push(hi);
    let mut best = lo;
    let mut best_val = f64::NEG_INFINITY;
    for &s in &candidates {
        let v = sharp_ratio(m, beta, s);
        if v > best_val {
            best_val = v;
            best = s;
        }
    }
    // Golden-section refinement in a bracket one grid step around the best
    // candidate (clamped to the domain).
    let (mut a, mut b) = (
        (best / ratio).max(lo),
        (best * ratio).min(hi),
    );
    let phi = 0.5 * (5.0f64.sqrt() - 1.0);
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let mut f1 = sharp_ratio(m, beta, x1);
    let mut f2 = sharp_ratio(m, beta, x2);
    for _ in 0..60 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = sharp_ratio(m, beta, x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = sharp_ratio(m, beta, x1);
        }
    }
    best_val.max(f1).max(f2)
}

/// `int_0^x theta_sharp(s)/s ds`, needed by `theta_ring`.
///
/// Writing `theta_sharp(s) = s^beta G(s)` with `G(s) = sup_{[s, R]}
/// theta/sigma^beta` nonincreasing, the integral splits at a radius `s*`
/// below which `h = theta/sigma^beta` is monotone:
/// * `h` nonincreasing toward `s*`: below the crossing `h(s_c) = G(s*)` the
///   sharp modulus equals `theta` (head by `dini_integral`), between `s_c`
///   and `s*` it is exactly `s^beta G(s*)` (closed form);
/// * `h` nondecreasing: `G` is constant below `s*` (closed form).
/// Above `s*` the integrand is evaluated directly under adaptive panels.
pub fn sharp_dini_integral(m: &Modulus, cfg: &ModulusConfig, x: f64) -> Result<f64> {
    if !(x > 0.0 && x <= cfg.big_r) {
        return Err(Error::domain(format!(
            "sharp_dini_integral needs 0 < x <= R = {}, got {x}",
            cfg.big_r
        )));
    }
    if m.is_zero() {
        return Ok(0.0);
    }
    if m.limit_at_zero() > 0.0 {
        return Err(Error::divergence(
            "theta(0+) > 0: the sharp modulus is not Dini-integrable",
        ));
    }
    let beta = cfg.beta;
    let tol = cfg.quad_tol;
    // Largest radius below which h is monotone on the sampled ladder.
    let cap_star = x.min(m.first_breakpoint());
    let mut s_star = cap_star;
    {
        let mut prev = sharp_ratio(m, beta, cap_star);
        let mut k = 0;
        while k < 40 {
            let s = cap_star * 0.5f64.powi(k + 1);
            let h = sharp_ratio(m, beta, s);
            let s_mid = cap_star * 0.5f64.powi(k) * 0.75;
            let h_mid = sharp_ratio(m, beta, s_mid);
            // Monotone on this rung iff h_mid sits between its neighbors.
            let lo = prev.min(h) - 1e-13 * prev.abs().max(h.abs());
            let hi = prev.max(h) + 1e-13 * prev.abs().max(h.abs());
            if h_mid < lo || h_mid > hi {
                s_star = s;
            }
            prev = h;
            k += 1;
        }
    }
    let g_star = sharp_sup(m, beta, s_star, cfg.big_r);
    let h_at = |s: f64| sharp_ratio(m, beta, s);
    let h_star = h_at(s_star);
    let h_deep = h_at(s_star * 1e-6);
    let head = if h_deep >= h_star {
        // h grows toward 0: theta_sharp = theta below the crossing.
        if h_star >= g_star {
            dini_integral(m, 0.0, s_star, tol)?
        } else {
            // Bisect h(s_c) = g_star on (0, s_star]; h is monotone there.
            let mut lo = s_star * 1e-300f64.max(f64::MIN_POSITIVE);
            let mut hi = s_star;
            if h_at(lo.max(f64::MIN_POSITIVE)) < g_star {
                // Even deep values stay under the sup: the sharp modulus is
                // s^beta g_star everywhere below s_star.
                g_star * s_star.powf(beta) / beta
            } else {
                for _ in 0..200 {
                    let mid = (lo * hi).sqrt();
                    if h_at(mid) >= g_star {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let s_c = (lo * hi).sqrt();
                dini_integral(m, 0.0, s_c, tol)?
                    + g_star * (s_star.powf(beta) - s_c.powf(beta)) / beta
            }
        }
    } else {
        // h shrinks toward 0: G is frozen at g_star below s_star.
        g_star * s_star.powf(beta) / beta
    };
    if s_star >= x {
        return Ok(head);
    }
    let tail = adaptive(
        &|t: f64| {
            let s = t.exp();
            s.powf(beta) * sharp_sup(m, beta, s, cfg.big_r)
        },
        s_star.ln(),
        x.ln(),
        tol,
    )?;
    Ok(head + tail)
}

/// Gradient-error modulus
/// `theta_ring(r) = theta_tilde(3r) + theta(4r) + int_0^{4r} theta/s
/// + int_0^{4r} theta_sharp/s`.
///
/// Requires `0 < r < R/6` (so the tilde term is in range).
pub fn theta_ring(m: &Modulus, cfg: &ModulusConfig, r: f64) -> Result<f64> {
    if !(r > 0.0 && r < cfg.big_r / 6.0) {
        return Err(Error::domain(format!(
            "theta_ring needs 0 < r < R/6 = {}, got {r}",
            cfg.big_r / 6.0
        )));
    }
    let tilde = theta_tilde(m, cfg, 3.0 * r)?;
    let head = m.eval(4.0 * r);
    let dini = dini_integral(m, 0.0, 4.0 * r, cfg.quad_tol)?;
    let sharp = sharp_dini_integral(m, cfg, 4.0 * r)?;
    Ok(tilde + head + dini + sharp)
}

/// Hat modulus of a modulus of continuity on reference scale 1:
/// `omega_hat(t) = omega(t) + omega(4t) + omega_sharp(4t)` with
/// `omega_sharp(t) = sup_{s in [t, 1]} (t/s)^beta omega(s)`.
pub fn omega_hat(omega: &Modulus, beta: f64, t: f64) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("omega_hat needs t > 0, got {t}")));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::domain(format!("omega_hat needs beta in (0,1), got {beta}")));
    }
    let sharp_at = |s: f64| -> f64 {
        if omega.is_zero() {
            return 0.0;
        }
        let hi = s.max(1.0);
        s.powf(beta) * sharp_sup(omega, beta, s, hi)
    };
    Ok(omega.eval(t) + omega.eval(4.0 * t) + sharp_at(4.0 * t))
}

/// Largest working radius at which the shift-map smallness `theta(4r) <
/// 1/26` holds, clamped to `R`.
pub fn neighborhood_radius(m: &Modulus, cfg: &ModulusConfig) -> f64 {
    let bound = 1.0 / 26.0;
    if m.eval(4.0 * cfg.big_r) < bound {
        return cfg.big_r;
    }
    let (mut lo, mut hi) = (0.0f64, cfg.big_r);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if m.eval(4.0 * mid) < bound {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ModulusConfig {
        ModulusConfig::default()
    }

    /// Identity modulus theta(s) = s as a two-node table (exactly linear).
    fn identity_table(cap: f64) -> Modulus {
        Modulus::table(vec![(0.0, 0.0), (cap, cap)], cap).unwrap()
    }

    #[test]
    fn constructors_reject_bad_parameters() {
        assert!(Modulus::power(1.0, 1.0, 1.0).is_err());
        assert!(Modulus::power(0.0, 1.0, 1.0).is_err());
        assert!(Modulus::power(0.5, -1.0, 1.0).is_err());
        assert!(Modulus::log_power(1.0, 1.0, 1.0).is_err());
        assert!(Modulus::table(vec![], 1.0).is_err());
        assert!(Modulus::table(vec![(0.1, -0.2)], 1.0).is_err());
    }

    #[test]
    fn table_monotonization_is_running_max() {
        let m = Modulus::table(vec![(0.0, 0.0), (0.2, 0.5), (0.4, 0.3), (0.6, 0.7)], 2.0).unwrap();
        assert_eq!(m.eval(0.4), 0.5);
        assert!(m.eval(0.5) > 0.5 && m.eval(0.5) < 0.7);
        // Nondecreasing on a sweep.
        let mut prev = 0.0;
        for k in 0..200 {
            let v = m.eval(k as f64 * 0.01);
            assert!(v >= prev - 1e-15);
            prev = v;
        }
    }

    #[test]
    fn eval_freezes_beyond_cap() {
        let m = Modulus::power(0.5, 1.0, 0.25).unwrap();
        assert_eq!(m.eval(0.25), m.eval(10.0));
        assert_eq!(m.eval(4.0), 0.5);
    }

    #[test]
    fn dini_integral_power_matches_closed_form() {
        // int_0^b c s^(a-1) ds = c b^a / a.
        for (alpha, c, b) in [(0.5, 1.0, 0.1), (0.3, 2.0, 0.05), (0.9, 0.7, 1.0)] {
            let m = Modulus::power(alpha, c, 8.0).unwrap();
            let got = dini_integral(&m, 0.0, b, 1e-12).unwrap();
            let exact = c * b.powf(alpha) / alpha;
            assert!(
                (got - exact).abs() < 1e-11,
                "alpha={alpha} c={c} b={b}: got {got}, exact {exact}"
            );
        }
    }

    #[test]
    fn dini_integral_additivity_and_monotone_limits() {
        let m = Modulus::log_power(2.0, 1.0, 8.0).unwrap();
        let whole = dini_integral(&m, 0.0, 0.4, 1e-12).unwrap();
        let lo = dini_integral(&m, 0.0, 0.05, 1e-12).unwrap();
        let hi = dini_integral(&m, 0.05, 0.4, 1e-12).unwrap();
        assert!((whole - lo - hi).abs() < 5e-12, "additivity: {whole} vs {}", lo + hi);
        // int_0^b -> 0 as b -> 0 on a halving ladder, and for p = 2 the
        // exact tail is int_{w(b)}^inf w^-2 (1 + e/(e^w - e)) dw =
        // 1/w(b) + O(e^-w(b)) with w(b) = ln(e + 1/b).
        let mut prev = whole;
        for k in 1..30 {
            let b = 0.4 * 0.5f64.powi(k);
            let v = dini_integral(&m, 0.0, b, 1e-12).unwrap();
            assert!(v < prev + 1e-12 && v >= 0.0);
            prev = v;
        }
        let b_last = 0.4 * 0.5f64.powi(29);
        let w = (std::f64::consts::E + 1.0 / b_last).ln();
        assert!(
            (prev - 1.0 / w).abs() < 1e-9,
            "tail after 29 halvings: {prev} vs 1/w = {}",
            1.0 / w
        );
    }

    /// Independent oracle for the log-power Dini integral via integration
    /// by parts: with F(s) = -1/ln(e + 1/s) one has F'(s) =
    /// -theta(s)/(s (e s + 1)) for p = 2, c = 1, hence
    /// `int_0^b theta/s ds = -(1 + e b) F(b) + e int_0^b F(s) ds`,
    /// and the right side only needs a proper integral of a bounded
    /// function. This never touches the implementation's log-variable head.
    #[test]
    fn dini_integral_log_power_matches_parts_oracle() {
        let e = std::f64::consts::E;
        let f = |s: f64| -1.0 / (e + 1.0 / s).ln();
        let b = 0.1;
        let proper = adaptive(&f, 1e-13, b, 1e-13).unwrap();
        let oracle = -(1.0 + e * b) * f(b) + e * proper;
        let m = Modulus::log_power(2.0, 1.0, 8.0).unwrap();
        let got = dini_integral(&m, 0.0, b, 1e-12).unwrap();
        assert!(
            (got - oracle).abs() < 1e-10,
            "log-power Dini integral: got {got}, oracle {oracle}"
        );
    }

    #[test]
    fn dini_integral_diverges_for_positive_table_floor() {
        let m = Modulus::table(vec![(0.1, 0.2), (1.0, 0.4)], 2.0).unwrap();
        assert!(dini_integral(&m, 0.0, 1.0, 1e-10).is_err());
        // But away from zero it is a plain proper integral.
        assert!(dini_integral(&m, 0.05, 1.0, 1e-10).is_ok());
    }

    #[test]
    fn theta_hat_linear_modulus_closed_form() {
        // For theta(s) = c s: theta_hat(r) = c r / ln^2 2.
        let cap = 8.0;
        let m = identity_table(cap);
        let ln2 = std::f64::consts::LN_2;
        for r in [0.01, 0.1, 0.5] {
            let got = theta_hat(&m, r, 1e-11).unwrap();
            let exact = r / (ln2 * ln2);
            assert!(
                (got - exact).abs() < 1e-9,
                "r={r}: theta_hat {got} vs closed form {exact}"
            );
        }
    }

    #[test]
    fn theta_hat_sandwich_three_kinds() {
        let cfgv = cfg();
        let kinds = [
            Modulus::power(0.5, 1.0, 8.0).unwrap(),
            Modulus::log_power(2.0, 1.0, 8.0).unwrap(),
            Modulus::table(
                vec![(0.0, 0.0), (0.01, 0.02), (0.1, 0.05), (0.5, 0.08), (4.0, 0.125)],
                8.0,
            )
            .unwrap(),
        ];
        for m in &kinds {
            for k in 0..20 {
                let r = cfgv.big_r * (10f64).powf(-6.0 * (1.0 - k as f64 / 19.0));
                let hat = theta_hat(m, r, 1e-11).unwrap();
                assert!(
                    m.eval(r) <= hat + 1e-9 && hat <= m.eval(4.0 * r) + 1e-9,
                    "{} r={r}: {} <= {hat} <= {}",
                    m.kind_name(),
                    m.eval(r),
                    m.eval(4.0 * r)
                );
            }
        }
    }

    #[test]
    fn theta_tilde_identity_modulus_closed_form() {
        // theta(s) = s, R = 1, r < 1/2:
        // theta(4r) = 4r, int_0^{4r} ds = 4r,
        // r int_{4r}^{2} s^-1 ds = r ln(1/(2r)).
        let m = identity_table(8.0);
        let c = cfg();
        for r in [0.05, 0.1, 0.2] {
            let got = theta_tilde(&m, &c, r).unwrap();
            let exact = 8.0 * r + r * (1.0 / (2.0 * r)).ln();
            assert!(
                (got - exact).abs() < 1e-9,
                "r={r}: theta_tilde {got} vs {exact}"
            );
        }
        assert!(theta_tilde(&m, &c, 0.5).is_err());
    }

    #[test]
    fn tail_decay_identity_modulus() {
        let m = identity_table(8.0);
        let c = cfg();
        for r in [0.01, 0.1, 0.3] {
            let got = tail_decay(&m, &c, r).unwrap();
            let exact = r * (1.0 / (2.0 * r)).ln();
            assert!((got - exact).abs() < 1e-9, "r={r}: {got} vs {exact}");
        }
    }

    #[test]
    fn theta_sharp_power_cases() {
        let c = cfg();
        // alpha < beta: sup at s = t, theta_sharp = theta.
        let m_lo = Modulus::power(0.25, 1.0, 8.0).unwrap();
        for t in [0.01, 0.1, 0.5] {
            let got = theta_sharp(&m_lo, &c, t).unwrap();
            assert!(
                (got - m_lo.eval(t)).abs() < 1e-10,
                "alpha<beta t={t}: {got} vs {}",
                m_lo.eval(t)
            );
        }
        // alpha > beta: sup at s = R, theta_sharp = (t/R)^beta theta(R).
        let m_hi = Modulus::power(0.75, 1.0, 8.0).unwrap();
        for t in [0.01, 0.1, 0.5] {
            let got = theta_sharp(&m_hi, &c, t).unwrap();
            let exact = (t / c.big_r).powf(c.beta) * m_hi.eval(c.big_r);
            assert!((got - exact).abs() < 1e-10, "alpha>beta t={t}: {got} vs {exact}");
        }
    }

    #[test]
    fn sharp_integral_power_closed_forms() {
        let c = cfg();
        // alpha < beta: theta_sharp = theta, integral = c x^alpha / alpha.
        let m_lo = Modulus::power(0.25, 1.0, 8.0).unwrap();
        let got = sharp_dini_integral(&m_lo, &c, 0.4).unwrap();
        let exact = 0.4f64.powf(0.25) / 0.25;
        assert!((got - exact).abs() < 1e-8, "alpha<beta: {got} vs {exact}");
        // alpha > beta: theta_sharp(s) = s^beta R^(alpha-beta) (for R inside
        // the cap), integral = x^beta R^(alpha-beta) / beta.
        let m_hi = Modulus::power(0.75, 1.0, 8.0).unwrap();
        let got = sharp_dini_integral(&m_hi, &c, 0.4).unwrap();
        let exact = 0.4f64.powf(0.5) * 1.0f64.powf(0.25) / 0.5;
        assert!((got - exact).abs() < 1e-8, "alpha>beta: {got} vs {exact}");
    }

    #[test]
    fn sharp_integral_log_power_converges_on_ladder() {
        let c = cfg();
        let m = Modulus::log_power(2.0, 1.0, 8.0).unwrap();
        let mut prev = f64::INFINITY;
        for k in 2..24 {
            let x = 0.5f64.powi(k);
            let v = sharp_dini_integral(&m, &c, x).unwrap();
            assert!(v.is_finite() && v >= 0.0 && v <= prev + 1e-12);
            prev = v;
        }
        assert!(prev < 0.2, "sharp Dini tail too heavy: {prev}");
    }

    #[test]
    fn theta_ring_decreases_to_zero() {
        let c = cfg();
        for m in [
            Modulus::power(0.5, 1.0, 8.0).unwrap(),
            Modulus::log_power(2.0, 1.0, 8.0).unwrap(),
        ] {
            let mut prev = f64::INFINITY;
            for k in 4..15 {
                let r = 0.5f64.powi(k);
                let v = theta_ring(&m, &c, r).unwrap();
                assert!(v > 0.0 && v < prev, "{} k={k}: {v} !< {prev}", m.kind_name());
                prev = v;
            }
        }
    }

    #[test]
    fn omega_hat_linear_closed_form() {
        // omega(t) = t, beta = 1/2, t <= 1/4:
        // omega_sharp(4t) = sqrt(4t) sup_{s in [4t,1]} s^(1/2) = 2 sqrt(t),
        // so omega_hat(t) = t + 4t + 2 sqrt(t).
        let omega = identity_table(1.0);
        for t in [0.01, 0.1, 0.25] {
            let got = omega_hat(&omega, 0.5, t).unwrap();
            let exact = 5.0 * t + 2.0 * t.sqrt();
            assert!((got - exact).abs() < 1e-9, "t={t}: {got} vs {exact}");
        }
    }

    #[test]
    fn normalization_check_accepts_and_rejects() {
        let c = cfg();
        let gentle = Modulus::power(0.5, 0.0064, 4.0).unwrap();
        check_normalization(&gentle, &c).unwrap();
        let steep = Modulus::power(0.5, 0.45, 8.0).unwrap();
        assert!(check_normalization(&steep, &c).is_err());
    }

    #[test]
    fn neighborhood_radius_monotone_in_c() {
        let c = cfg();
        let small = Modulus::power(0.5, 0.0064, 4.0).unwrap();
        let large = Modulus::power(0.5, 0.45, 8.0).unwrap();
        let r_small = neighborhood_radius(&small, &c);
        let r_large = neighborhood_radius(&large, &c);
        assert_eq!(r_small, c.big_r);
        assert!(r_large < r_small);
        assert!(large.eval(4.0 * r_large * 0.999) < 1.0 / 26.0);
    }

    #[test]
    fn zero_modulus_short_circuits() {
        let c = cfg();
        let m = Modulus::zero();
        assert_eq!(dini_integral(&m, 0.0, 1.0, 1e-12).unwrap(), 0.0);
        assert_eq!(theta_hat(&m, 0.1, 1e-12).unwrap(), 0.0);
        assert_eq!(theta_tilde(&m, &c, 0.1).unwrap(), 0.0);
        assert_eq!(theta_sharp(&m, &c, 0.1).unwrap(), 0.0);
        assert_eq!(theta_ring(&m, &c, 0.1).unwrap(), 0.0);
    }
}
