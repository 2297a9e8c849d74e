//! Acceptance gate: twelve end-to-end checks, one test per numbered
//! criterion, each printing a `criterion NN <name>: PASS/FAIL (<detail>)`
//! line (visible under `--nocapture`) and asserting the same condition.
//!
//! Every tolerance is pinned as a const below, next to the measurement it
//! was frozen from. The curved-chart solves shared by criteria 06-09 are
//! built once through `OnceLock`.

use std::f64::consts::PI;
use std::sync::OnceLock;
use std::time::Instant;

use dinilab::expansion::{
    assemble_expansion, log_slope, psi_grad_band, psi_sup_band, tangent_distance,
    tangent_from_blowups, Expansion,
};
use dinilab::field::PolyField;
use dinilab::frequency::{almgren, doubling_exponents, vanishing_order};
use dinilab::geometry::{Chart, Frame, GraphDomain, GraphShape};
use dinilab::hhp::{orthonormal_basis_full, orthonormal_vanishing_basis, Polynomial};
use dinilab::modulus::{tail_decay, theta_hat, theta_ring, theta_tilde, Modulus, ModulusConfig};
use dinilab::solver::{extend_odd, solve_dirichlet, CoeffSource, DiscreteField, HalfBoxProblem, HalfGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// 01: frame orthogonality and block identities, 1000 random gradients per dim.
const FRAME_RESIDUAL_MAX: f64 = 1e-12;
// 02: rotated-graph identity, 500 samples per dim.
const GRAPH_IDENTITY_MAX: f64 = 1e-10;
// 03: smoothed-modulus sandwich theta(r) <= theta_hat(r) <= theta(4r),
// slack absorbs the quadrature tolerance (1e-10 requested).
const SANDWICH_SLACK: f64 = 1e-8;
// 04: frequency of exact degree-N harmonics equals N.
const EULER_TOL: f64 = 1e-3;
// 06: measured doubling exponents sit inside their predicted bands
// (worst margin measured at h = 1/256: 1.18e-2 inside).
const DOUBLING_EXCURSION_MAX: f64 = 0.0;
// 07: decay rate of the blow-up deviation ladder; the asymmetric boundary
// data makes the smooth quadratic term dominate, so the measured slope is
// ~1.0 against a floor of alpha - 0.15 = 0.35 for the alpha = 1/2 modulus.
const RATE_SLOPE_MIN: f64 = 0.35;
// 07: eps(r)/theta_tilde(r) bounded along the ladder; measured max 2.44
// at h = 1/256, frozen with 2.5x headroom.
const RATE_RATIO_MAX: f64 = 6.0;
// 08: kernel-route vs blow-up-route tangents.
const ROUTE_FLAT_TOL: f64 = 1e-6;
const ROUTE_CURVED_TOL: f64 = 5e-2;
// 09: fitted band constants move by at most 50% between h and h/2
// (measured drift at 1/128 -> 1/256: under 1e-4 relative).
const BAND_STABILITY: f64 = 1.5;
// 09: divergence guard on the fitted constants themselves; measured 2.72
// (value band) and 0.76 (gradient band) at h = 1/256.
const BAND_CONSTANT_CEILING: f64 = 100.0;
// 10: tangent distance at the last center, and against the closed form.
const CONTINUITY_FINAL_TOL: f64 = 1e-3;
// 10: monotonicity slack at the quadrature noise floor; the fixture is
// exactly homogeneous at every center on its singular line, so successive
// distances agree to machine precision rather than strictly decreasing.
const MONOTONE_FLOOR: f64 = 1e-12;
// 11: each error modulus must at least halve from k = 4 to k = 14
// (measured final/initial: 0.03 for the power kind, 0.09 for log-power).
const LIMIT_SHRINK: f64 = 0.5;

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("criterion {id:02} {name}: {verdict} ({detail})");
    assert!(pass, "criterion {id:02} {name}: {detail}");
}

/// Gentle curved benchmark shared by criteria 06-09: power-law graph with a
/// dominating power-1/2 modulus, asymmetric positive boundary data, solved
/// at h = 1/256 (fine) and h = 1/128 (coarse), odd-extended.
struct Curved {
    domain: GraphDomain,
    cfg: ModulusConfig,
    /// Odd extensions, for two-sided integrals (doubling, kernel, bands).
    fine: DiscreteField,
    coarse: DiscreteField,
    /// Unextended half-grid solution at h = 1/256, for blow-up projections.
    fine_half: DiscreteField,
    order: u32,
}

fn curved_bc(p: &[f64]) -> f64 {
    let s = p[1];
    if s <= 0.0 {
        0.0
    } else {
        s * (1.0 + 0.4 * (2.0 * p[0]).tanh())
    }
}

fn curved() -> &'static Curved {
    static CURVED: OnceLock<Curved> = OnceLock::new();
    CURVED.get_or_init(|| {
        let domain = GraphDomain::new(
            2,
            GraphShape::RadialPower { kappa: 0.003, power: 1.5 },
            Modulus::power(0.5, 0.0064, 4.0).unwrap(),
        )
        .unwrap();
        let chart = Chart::new(&domain, &[0.0]);
        let mut halves = Vec::new();
        let mut fields = Vec::new();
        for grid in [256usize, 128] {
            let g = HalfGrid::new(2, 1.0, 1.0, 1.0 / grid as f64).unwrap();
            let problem = HalfBoxProblem { grid: g, coeff: CoeffSource::Chart(&chart), bc: &curved_bc };
            let sol = solve_dirichlet(&problem).unwrap();
            assert!(sol.residual <= 1e-8, "solve at 1/{grid} left residual {:.2e}", sol.residual);
            fields.push(extend_odd(&sol.field).unwrap());
            halves.push(sol.field);
        }
        let coarse = fields.pop().unwrap();
        let fine = fields.pop().unwrap();
        let fine_half = halves.swap_remove(0);
        let (order, _) = vanishing_order(&fine, &[0.0, 0.0], &[0.4, 0.2, 0.1]).unwrap();
        assert_eq!(order, 1, "positive boundary data must vanish to first order");
        Curved { domain, cfg: ModulusConfig::default(), fine, coarse, fine_half, order }
    })
}

/// Boundary expansions of the shared curved solves at both grids.
fn curved_expansions() -> &'static (Expansion, Expansion) {
    static EXPANSIONS: OnceLock<(Expansion, Expansion)> = OnceLock::new();
    EXPANSIONS.get_or_init(|| {
        let c = curved();
        let chart = Chart::new(&c.domain, &[0.0]);
        let fine = assemble_expansion(&c.fine, &chart, c.order, 0.8).unwrap();
        let coarse = assemble_expansion(&c.coarse, &chart, c.order, 0.8).unwrap();
        (fine, coarse)
    })
}

/// Max absolute entry of `M - Id` over the leading `n x n` block reached
/// through a closure, so callers can form blocks without allocating.
fn max_abs(n: usize, entry: impl Fn(usize, usize) -> f64) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max(entry(i, j).abs());
        }
    }
    worst
}

#[test]
fn criterion_01_frame_blocks() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for dim in [2usize, 3, 4] {
        let dm1 = dim - 1;
        let mut grads: Vec<Vec<f64>> = Vec::with_capacity(1000);
        grads.push(vec![0.0; dm1]);
        let mut e1 = vec![0.0; dm1];
        e1[0] = 1.0;
        grads.push(e1);
        grads.push(vec![1.0 / (dm1 as f64).sqrt(); dm1]);
        while grads.len() < 1000 {
            let g: Vec<f64> = (0..dm1).map(|_| rng.gen_range(-1.0..1.0)).collect();
            if g.iter().map(|v| v * v).sum::<f64>() <= 1.0 {
                grads.push(g);
            }
        }
        for g in &grads {
            let frame = Frame::from_gradient(g);
            let o = frame.matrix();
            // Full orthogonality O O^T = Id.
            let ortho = max_abs(dim, |i, j| {
                let mut s = if i == j { -1.0 } else { 0.0 };
                for k in 0..dim {
                    s += o[(i, k)] * o[(j, k)];
                }
                s
            });
            // Block identities of the bordered rotation
            // [[Otil, b], [dvec^T, c]]: Otil Otil^T + b b^T = Id,
            // Otil dvec + c b = 0, |dvec|^2 + c^2 = 1.
            let c = o[(dm1, dm1)];
            let upper = max_abs(dm1, |i, j| {
                let mut s = if i == j { -1.0 } else { 0.0 };
                for k in 0..dm1 {
                    s += o[(i, k)] * o[(j, k)];
                }
                s + o[(i, dm1)] * o[(j, dm1)]
            });
            let mut mixed: f64 = 0.0;
            for i in 0..dm1 {
                let mut s = c * o[(i, dm1)];
                for k in 0..dm1 {
                    s += o[(i, k)] * o[(dm1, k)];
                }
                mixed = mixed.max(s.abs());
            }
            let mut corner = c * c - 1.0;
            for k in 0..dm1 {
                corner += o[(dm1, k)] * o[(dm1, k)];
            }
            // Closed-form ties to the generating gradient: the last column
            // is (Otil g, c) scaled and the bottom row is (-c g^T, c).
            let gnorm2: f64 = g.iter().map(|v| v * v).sum();
            let mut tie = (c - 1.0 / (1.0 + gnorm2).sqrt()).abs();
            for i in 0..dm1 {
                let mut otg = 0.0;
                for k in 0..dm1 {
                    otg += o[(i, k)] * g[k];
                }
                tie = tie.max((o[(i, dm1)] - otg).abs());
                tie = tie.max((o[(dm1, i)] + c * g[i]).abs());
            }
            worst = worst
                .max(ortho)
                .max(upper)
                .max(mixed)
                .max(corner.abs())
                .max(tie);
        }
    }
    report(
        1,
        "frame-blocks",
        worst <= FRAME_RESIDUAL_MAX,
        &format!("worst residual {worst:.3e} over 3000 frames, {:?}", start.elapsed()),
    );
}

#[test]
fn criterion_02_graph_mapping() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for dim in [2usize, 3] {
        let dm1 = dim - 1;
        let domain = GraphDomain::new(
            dim,
            GraphShape::RadialPower { kappa: 0.2, power: 1.5 },
            Modulus::power(0.5, 0.45, 8.0).unwrap(),
        )
        .unwrap();
        let x0: Vec<f64> = if dim == 2 { vec![0.3] } else { vec![0.25, -0.2] };
        let chart = Chart::new(&domain, &x0);
        let base = domain.on_graph(&x0);
        for sample in 0..500 {
            let x: Vec<f64> = if sample == 0 {
                x0.clone()
            } else {
                x0.iter().map(|&v| v + rng.gen_range(-1.0..1.0)).collect()
            };
            let lifted = domain.on_graph(&x);
            let rel: Vec<f64> = lifted.iter().zip(&base).map(|(a, b)| a - b).collect();
            let rotated = chart.frame.rotate(&rel);
            let y = chart.g_map(&x);
            let height = chart.phi_tilde(&y).unwrap();
            for i in 0..dm1 {
                worst = worst.max((rotated[i] - y[i]).abs());
            }
            worst = worst.max((rotated[dm1] - height).abs());
        }
    }
    report(
        2,
        "graph-mapping",
        worst <= GRAPH_IDENTITY_MAX,
        &format!("worst identity gap {worst:.3e} over 1000 boundary points, {:?}", start.elapsed()),
    );
}

#[test]
fn criterion_03_sandwich() {
    let start = Instant::now();
    let cases = [
        Modulus::power(0.5, 0.0064, 4.0).unwrap(),
        Modulus::log_power(2.0, 0.015, 4.0).unwrap(),
        Modulus::table(
            vec![(0.0, 0.0), (1e-4, 8e-4), (1e-2, 3e-3), (0.2, 8e-3), (1.0, 1.5e-2)],
            2.0,
        )
        .unwrap(),
    ];
    let caps = [4.0f64, 4.0, 2.0];
    let mut worst_low: f64 = 0.0;
    let mut worst_high: f64 = 0.0;
    for (m, &cap) in cases.iter().zip(&caps) {
        let lo: f64 = 1e-6;
        for i in 0..50 {
            let r = lo * (cap / lo).powf(i as f64 / 49.0);
            let hat = theta_hat(m, r, 1e-10).unwrap();
            worst_low = worst_low.max(m.eval(r) - hat);
            worst_high = worst_high.max(hat - m.eval(4.0 * r));
        }
    }
    let worst = worst_low.max(worst_high);
    report(
        3,
        "sandwich",
        worst <= SANDWICH_SLACK,
        &format!(
            "worst lower gap {worst_low:.3e}, upper gap {worst_high:.3e} over 150 radii, {:?}",
            start.elapsed()
        ),
    );
}

#[test]
fn criterion_04_euler_frequency() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut count = 0usize;
    for dim in [2usize, 3] {
        let basis = orthonormal_basis_full(dim, 4).unwrap();
        let origin = vec![0.0; dim];
        for i in 0..basis.len() {
            let degree = basis.degree_of(i);
            if degree == 0 {
                continue;
            }
            let pf = PolyField::new(basis.element(i).clone());
            for r in [0.1, 0.2, 0.4] {
                let n = almgren(&pf, &origin, r).unwrap();
                worst = worst.max((n - degree as f64).abs());
            }
            count += 1;
        }
    }
    report(
        4,
        "euler-frequency",
        worst <= EULER_TOL,
        &format!("worst |N(r) - degree| {worst:.3e} over {count} harmonics x 3 radii, {:?}", start.elapsed()),
    );
}

#[test]
fn criterion_05_vanishing_orders() {
    let start = Instant::now();
    let poly = Polynomial::monomial(3, &[1, 0, 1], 1.0).add(&Polynomial::monomial(3, &[0, 1, 1], 1.0));
    let field = PolyField::on_halfspace(poly);
    let (at_origin, _) = vanishing_order(&field, &[0.0, 0.0, 0.0], &[0.4, 0.2, 0.1]).unwrap();
    let (on_line, _) = vanishing_order(&field, &[0.3, -0.3, 0.0], &[0.2, 0.1]).unwrap();
    let (off_line, _) = vanishing_order(&field, &[0.3, 0.0, 0.0], &[0.1, 0.05]).unwrap();
    // Centers just off the singular line, marching toward the origin: the
    // order stays 1 while the limit point carries order 2, so the limit
    // order can only jump up (upper semicontinuity), never down.
    let mut sequence_ok = true;
    let mut seq_orders = Vec::new();
    for j in 0..4 {
        let eps = 0.1 * 0.5f64.powi(j);
        let (oj, _) = vanishing_order(&field, &[eps, eps, 0.0], &[0.5 * eps]).unwrap();
        sequence_ok &= oj == 1 && oj <= at_origin;
        seq_orders.push(oj);
    }
    let pass = at_origin == 2 && on_line == 2 && off_line == 1 && sequence_ok;
    report(
        5,
        "vanishing-orders",
        pass,
        &format!(
            "origin {at_origin}, on-line {on_line}, off-line {off_line}, sequence {seq_orders:?} <= 2, {:?}",
            start.elapsed()
        ),
    );
}

#[test]
fn criterion_06_doubling_bands() {
    let start = Instant::now();
    let c = curved();
    let radii: Vec<f64> = (0..6).map(|k| 0.4 * 0.75f64.powi(k)).collect();
    let bands = doubling_exponents(&c.fine, c.domain.modulus(), &c.cfg, &radii, c.order as f64).unwrap();
    let mut worst = f64::NEG_INFINITY;
    for b in &bands {
        worst = worst.max((b.lower - b.exponent).max(b.exponent - b.upper));
    }
    report(
        6,
        "doubling-bands",
        worst <= DOUBLING_EXCURSION_MAX,
        &format!("worst band excursion {worst:+.3e} over {} radius pairs, {:?}", bands.len(), start.elapsed()),
    );
}

#[test]
fn criterion_07_blowup_rate() {
    let start = Instant::now();
    let c = curved();
    let radii: Vec<f64> = (2..=7).map(|k| 0.5f64.powi(k)).collect();
    let basis = orthonormal_vanishing_basis(2, 2).unwrap();
    let flow = tangent_from_blowups(&c.fine_half, &[0.0, 0.0], c.order, &radii, &basis).unwrap();
    let slope = log_slope(&radii, &flow.eps);
    let mut ratio_max: f64 = 0.0;
    for (i, &r) in radii.iter().enumerate() {
        let tt = theta_tilde(c.domain.modulus(), &c.cfg, r).unwrap();
        ratio_max = ratio_max.max(flow.eps[i] / tt);
    }
    let pass = slope >= RATE_SLOPE_MIN && ratio_max <= RATE_RATIO_MAX && ratio_max.is_finite();
    report(
        7,
        "blowup-rate",
        pass,
        &format!(
            "eps slope {slope:.3} (floor {RATE_SLOPE_MIN}), max eps/theta_tilde {ratio_max:.3} (cap {RATE_RATIO_MAX}), {:?}",
            start.elapsed()
        ),
    );
}

#[test]
fn criterion_08_route_agreement() {
    let start = Instant::now();
    // Flat fixture s + 2ys: globally harmonic, odd in s, vanishing on the
    // boundary, so the polynomial field is its own odd extension and the
    // kernel route carries no force correction.
    let poly = Polynomial::monomial(2, &[0, 1], 1.0).add(&Polynomial::monomial(2, &[1, 1], 2.0));
    let pf = PolyField::new(poly.clone());
    let flat_domain = GraphDomain::flat(2);
    let flat_chart = Chart::new(&flat_domain, &[0.0]);
    let flat_exp = assemble_expansion(&pf, &flat_chart, 1, 0.8).unwrap();
    let basis = orthonormal_vanishing_basis(2, 2).unwrap();
    let half_pf = PolyField::on_halfspace(poly);
    let flat_flow =
        tangent_from_blowups(&half_pf, &[0.0, 0.0], 1, &[0.2, 0.1, 0.05], &basis).unwrap();
    let flat_dist =
        tangent_distance(&flat_exp.polynomial.degree_part(1), &flat_flow.tangent).unwrap();

    let c = curved();
    let (fine_exp, _) = curved_expansions();
    let curved_flow =
        tangent_from_blowups(&c.fine_half, &[0.0, 0.0], c.order, &[0.2, 0.1, 0.05], &basis).unwrap();
    let curved_dist = tangent_distance(
        &fine_exp.polynomial.degree_part(c.order as usize),
        &curved_flow.tangent,
    )
    .unwrap();
    let pass = flat_dist <= ROUTE_FLAT_TOL && curved_dist <= ROUTE_CURVED_TOL;
    report(
        8,
        "route-agreement",
        pass,
        &format!("flat distance {flat_dist:.3e}, curved distance {curved_dist:.3e}, {:?}", start.elapsed()),
    );
}

#[test]
fn criterion_09_error_bands() {
    let start = Instant::now();
    let c = curved();
    let (fine_exp, coarse_exp) = curved_expansions();
    let sup_rungs: Vec<f64> = (0..6).map(|k| 0.2 * 0.7f64.powi(k)).collect();
    let grad_rungs: Vec<f64> = (0..4).map(|k| 0.08 * 0.7f64.powi(k)).collect();
    let m = c.domain.modulus();

    // Fitted constant for |psi| <= C rho^N theta_tilde(rho): the smallest C
    // that covers every rung, i.e. the max measured ratio.
    let fit_sup = |field: &DiscreteField, exp: &Expansion| -> f64 {
        let band = psi_sup_band(field, exp, m, &c.cfg, &sup_rungs).unwrap();
        let mut fit: f64 = 0.0;
        for (i, &rho) in sup_rungs.iter().enumerate() {
            let bound = rho.powi(exp.order as i32) * theta_tilde(m, &c.cfg, rho).unwrap();
            fit = fit.max(band.sups[i] / bound);
        }
        fit
    };
    // |grad psi| <= C' rho^{N-1} theta_ring(2 rho): the band report's own
    // bound already has that shape, so its max ratio is the fitted C'.
    let fit_grad = |field: &DiscreteField, exp: &Expansion| -> f64 {
        let band = psi_grad_band(field, exp, m, &c.cfg, &grad_rungs).unwrap();
        band.ratios.iter().cloned().fold(0.0f64, f64::max)
    };

    let c_fine = fit_sup(&c.fine, fine_exp);
    let c_coarse = fit_sup(&c.coarse, coarse_exp);
    let g_fine = fit_grad(&c.fine, fine_exp);
    let g_coarse = fit_grad(&c.coarse, coarse_exp);

    let stable = |a: f64, b: f64| a / b <= BAND_STABILITY && b / a <= BAND_STABILITY;
    let healthy = |v: f64| v.is_finite() && v > 0.0 && v <= BAND_CONSTANT_CEILING;
    let pass = healthy(c_fine)
        && healthy(c_coarse)
        && healthy(g_fine)
        && healthy(g_coarse)
        && stable(c_fine, c_coarse)
        && stable(g_fine, g_coarse);
    report(
        9,
        "error-bands",
        pass,
        &format!(
            "C {c_fine:.3} vs {c_coarse:.3}, C' {g_fine:.3} vs {g_coarse:.3} across h -> h/2, {:?}",
            start.elapsed()
        ),
    );
}

#[test]
fn criterion_10_tangent_continuity() {
    let start = Instant::now();
    let poly = Polynomial::monomial(3, &[1, 0, 1], 1.0).add(&Polynomial::monomial(3, &[0, 1, 1], 1.0));
    let field = PolyField::on_halfspace(poly);
    let basis = orthonormal_vanishing_basis(3, 2).unwrap();
    let radii = [0.2, 0.1, 0.05];
    let tangent_at = |center: &[f64]| {
        tangent_from_blowups(&field, center, 2, &radii, &basis)
            .unwrap()
            .tangent
    };
    let origin_tangent = tangent_at(&[0.0, 0.0, 0.0]);
    // Hand-derived tangent at every center of the singular line: the
    // normalized field itself, scaled by its half-ball norm sqrt(4 pi/105).
    let scale = (105.0 / (4.0 * PI)).sqrt();
    let closed = Polynomial::monomial(3, &[1, 0, 1], scale).add(&Polynomial::monomial(3, &[0, 1, 1], scale));
    let anchor = tangent_distance(&origin_tangent, &closed).unwrap();

    let inv_sqrt2 = 0.5f64.sqrt();
    let mut distances = Vec::new();
    for j in 0..5 {
        let delta = 0.3 * 0.5f64.powi(j);
        let center = [delta * inv_sqrt2, -delta * inv_sqrt2, 0.0];
        let tangent = tangent_at(&center);
        distances.push(tangent_distance(&tangent, &origin_tangent).unwrap());
    }
    let mut monotone = true;
    for w in distances.windows(2) {
        monotone &= w[1] <= w[0] + MONOTONE_FLOOR;
    }
    let last = *distances.last().unwrap();
    let final_closed = anchor.max(last);
    let pass = monotone && last <= CONTINUITY_FINAL_TOL && anchor <= CONTINUITY_FINAL_TOL;
    report(
        10,
        "tangent-continuity",
        pass,
        &format!(
            "distances {:?} monotone within {MONOTONE_FLOOR:.0e}, final vs closed form {final_closed:.3e}, {:?}",
            distances
                .iter()
                .map(|d| format!("{d:.2e}"))
                .collect::<Vec<_>>(),
            start.elapsed()
        ),
    );
}

#[test]
fn criterion_11_modulus_limits() {
    let start = Instant::now();
    let cfg = ModulusConfig::default();
    let cases = [
        Modulus::power(0.5, 0.0064, 4.0).unwrap(),
        Modulus::log_power(2.0, 0.015, 4.0).unwrap(),
    ];
    let mut pass = true;
    let mut detail = String::new();
    for m in &cases {
        let mut seqs: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        for k in 4..=14 {
            let r = 0.5f64.powi(k);
            seqs[0].push(theta_tilde(m, &cfg, r).unwrap());
            seqs[1].push(theta_ring(m, &cfg, r).unwrap());
            seqs[2].push(tail_decay(m, &cfg, r).unwrap());
        }
        for (name, seq) in ["tilde", "ring", "tail"].iter().zip(&seqs) {
            let decreasing = seq.windows(2).all(|w| w[1] < w[0]);
            let shrink = seq.last().unwrap() / seq.first().unwrap();
            pass &= decreasing && shrink <= LIMIT_SHRINK;
            detail.push_str(&format!("{} {name} x{shrink:.3} ", m.kind_name()));
        }
    }
    report(
        11,
        "modulus-limits",
        pass,
        &format!("final/initial over k = 4..14: {detail}{:?}", start.elapsed()),
    );
}

#[test]
fn criterion_12_determinism() {
    let start = Instant::now();
    let root = std::env::temp_dir().join(format!("dinilab-accept-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&root);
    let mut listings: Vec<Vec<(String, Vec<u8>)>> = Vec::new();
    for run in 0..2 {
        let out = root.join(format!("run{run}"));
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_dinilab"))
            .args(["full-verify", "--seed", "11", "--out"])
            .arg(&out)
            .output()
            .expect("full-verify run");
        assert!(
            status.status.success(),
            "full-verify exited with {:?}: {}",
            status.status.code(),
            String::from_utf8_lossy(&status.stdout)
        );
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(&out)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
            })
            .collect();
        files.sort_by(|a, b| a.0.cmp(&b.0));
        listings.push(files);
    }
    let names: Vec<&String> = listings[0].iter().map(|f| &f.0).collect();
    let identical = listings[0] == listings[1];
    let _ = std::fs::remove_dir_all(&root);
    report(
        12,
        "determinism",
        identical && !names.is_empty(),
        &format!("{} artifacts byte-identical across repeated runs, {:?}", names.len(), start.elapsed()),
    );
}
