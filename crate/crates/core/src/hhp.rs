//! Homogeneous harmonic polynomials and the fundamental solution.
//!
//! Basis polynomials of each degree are built by exact rational elimination
//! of the Laplace constraints, then scaled to primitive integer coefficient
//! vectors, so their Laplacians vanish identically in floating point (the
//! coefficient arithmetic stays inside the exact-integer range of f64).
//! Orthonormalization over the upper half ball uses closed-form monomial
//! moments; no quadrature enters the basis itself.
//!
//! The second half of the module differentiates the gradient of the
//! fundamental solution symbolically (sums of `c x^alpha |x|^-q` terms) and
//! assembles Taylor terms of `Y -> grad Gamma(Y - Z)`, which the expansion
//! module integrates against Newtonian-potential densities.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, LazyLock, Mutex};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::quad::{gamma_fn, sphere_area};
use crate::{Error, Result};

/// Sparse polynomial over `R^dim` with monomial exponents as keys.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    pub dim: usize,
    terms: BTreeMap<Vec<u32>, f64>,
}

impl Polynomial {
    pub fn new(dim: usize) -> Self {
        Polynomial {
            dim,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        let mut p = Polynomial::new(dim);
        if c != 0.0 {
            p.terms.insert(vec![0; dim], c);
        }
        p
    }

    pub fn monomial(dim: usize, alpha: &[u32], c: f64) -> Self {
        assert_eq!(alpha.len(), dim);
        let mut p = Polynomial::new(dim);
        if c != 0.0 {
            p.terms.insert(alpha.to_vec(), c);
        }
        p
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &f64)> {
        self.terms.iter()
    }

    pub fn coeff(&self, alpha: &[u32]) -> f64 {
        self.terms.get(alpha).copied().unwrap_or(0.0)
    }

    fn insert_add(&mut self, alpha: Vec<u32>, c: f64) {
        if c == 0.0 {
            return;
        }
        let entry = self.terms.entry(alpha).or_insert(0.0);
        *entry += c;
        if *entry == 0.0 {
            // Keep the support minimal so exactness checks see true zeros.
            let key: Vec<u32> = self
                .terms
                .iter()
                .find(|(_, v)| **v == 0.0)
                .map(|(k, _)| k.clone())
                .unwrap();
            self.terms.remove(&key);
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim);
        let mut sum = 0.0;
        for (alpha, &c) in &self.terms {
            let mut prod = c;
            for (xi, &ai) in x.iter().zip(alpha) {
                if ai > 0 {
                    prod *= xi.powi(ai as i32);
                }
            }
            sum += prod;
        }
        sum
    }

    pub fn derivative(&self, i: usize) -> Polynomial {
        assert!(i < self.dim);
        let mut out = Polynomial::new(self.dim);
        for (alpha, &c) in &self.terms {
            if alpha[i] == 0 {
                continue;
            }
            let mut a = alpha.clone();
            a[i] -= 1;
            out.insert_add(a, c * alpha[i] as f64);
        }
        out
    }

    pub fn eval_gradient(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim).map(|i| self.derivative(i).eval(x)).collect()
    }

    pub fn laplacian(&self) -> Polynomial {
        let mut out = Polynomial::new(self.dim);
        for (alpha, &c) in &self.terms {
            for i in 0..self.dim {
                if alpha[i] >= 2 {
                    let mut a = alpha.clone();
                    a[i] -= 2;
                    out.insert_add(a, c * (alpha[i] * (alpha[i] - 1)) as f64);
                }
            }
        }
        out
    }

    pub fn degree(&self) -> usize {
        self.terms
            .keys()
            .map(|a| a.iter().sum::<u32>() as usize)
            .max()
            .unwrap_or(0)
    }

    /// Homogeneous part of degree `k`.
    pub fn degree_part(&self, k: usize) -> Polynomial {
        let mut out = Polynomial::new(self.dim);
        for (alpha, &c) in &self.terms {
            if alpha.iter().sum::<u32>() as usize == k {
                out.insert_add(alpha.clone(), c);
            }
        }
        out
    }

    /// `p(lambda x)`: each coefficient picks up `lambda^{|alpha|}`.
    pub fn dilate(&self, lambda: f64) -> Polynomial {
        let mut p = Polynomial::new(self.dim);
        for (alpha, &c) in self.terms() {
            let total: u32 = alpha.iter().sum();
            p.insert_add(alpha.clone(), c * lambda.powi(total as i32));
        }
        p
    }

    pub fn scaled(&self, c: f64) -> Polynomial {
        let mut out = Polynomial::new(self.dim);
        for (alpha, &v) in &self.terms {
            out.insert_add(alpha.clone(), c * v);
        }
        out
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        assert_eq!(self.dim, other.dim);
        let mut out = self.clone();
        for (alpha, &c) in &other.terms {
            out.insert_add(alpha.clone(), c);
        }
        out
    }

    pub fn sub(&self, other: &Polynomial) -> Polynomial {
        self.add(&other.scaled(-1.0))
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |m, &c| m.max(c.abs()))
    }
}

/// All exponent vectors of total degree `n` in `dim` variables, in
/// lexicographic order.
pub fn monomials(dim: usize, n: usize) -> Vec<Vec<u32>> {
    fn rec(dim: usize, n: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if dim == 1 {
            prefix.push(n);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in 0..=n {
            prefix.push(k);
            rec(dim - 1, n - k, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(dim, n as u32, &mut Vec::new(), &mut out);
    out
}

/// Dimension of the space of homogeneous harmonic polynomials of degree
/// `n` in `dim` variables.
pub fn harmonic_dimension(dim: usize, n: usize) -> usize {
    assert!(dim >= 2);
    if n == 0 {
        return 1;
    }
    if dim == 2 {
        return 2;
    }
    // (2n + d - 2) (n + d - 3)! / (n! (d - 2)!)
    let num_lo = n + 1;
    let num_hi = n + dim - 3;
    let mut value: u128 = (2 * n + dim - 2) as u128;
    for k in num_lo..=num_hi {
        value *= k as u128;
    }
    let mut den: u128 = 1;
    for k in 1..=(dim - 2) {
        den *= k as u128;
    }
    (value / den) as usize
}

/// Integer basis of homogeneous harmonic polynomials of degree `n`.
///
/// The Laplace constraints are eliminated over exact rationals; the null
/// space vectors are cleared to primitive integer vectors, so each returned
/// polynomial satisfies `laplacian() == 0` with no rounding at all.
pub fn harmonic_basis(dim: usize, n: usize) -> Result<Vec<Polynomial>> {
    if dim < 2 {
        return Err(Error::domain(format!("harmonic basis needs dim >= 2, got {dim}")));
    }
    let monos = monomials(dim, n);
    if n < 2 {
        // Every polynomial of degree < 2 is harmonic.
        return Ok(monos
            .into_iter()
            .map(|alpha| Polynomial::monomial(dim, &alpha, 1.0))
            .collect());
    }
    let constraints = monomials(dim, n - 2);
    let col_of: HashMap<Vec<u32>, usize> = monos
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, m)| (m, i))
        .collect();
    // Row per degree-(n-2) monomial beta: sum_i (beta_i + 2)(beta_i + 1)
    // c_{beta + 2 e_i} = 0.
    let rows = constraints.len();
    let cols = monos.len();
    let mut m: Vec<Vec<BigRational>> = vec![vec![BigRational::zero(); cols]; rows];
    for (r, beta) in constraints.iter().enumerate() {
        for i in 0..dim {
            let mut alpha = beta.clone();
            alpha[i] += 2;
            let col = col_of[&alpha];
            let w = ((beta[i] + 2) * (beta[i] + 1)) as i64;
            m[r][col] = BigRational::from_integer(BigInt::from(w));
        }
    }
    let null = rational_null_space(&mut m, cols);
    let expect = harmonic_dimension(dim, n);
    if null.len() != expect {
        return Err(Error::contract(format!(
            "harmonic null space has dimension {} but the count formula gives {expect}",
            null.len()
        )));
    }
    let mut basis = Vec::with_capacity(null.len());
    for vec_q in null {
        let ints = primitive_integer_vector(&vec_q)?;
        let mut p = Polynomial::new(dim);
        for (alpha, c) in monos.iter().zip(&ints) {
            if *c != 0 {
                p.insert_add(alpha.clone(), *c as f64);
            }
        }
        basis.push(p);
    }
    Ok(basis)
}

/// Null space of a rational matrix by reduced row echelon form; the basis
/// vectors correspond to free columns in ascending order.
fn rational_null_space(m: &mut [Vec<BigRational>], cols: usize) -> Vec<Vec<BigRational>> {
    let rows = m.len();
    let mut pivot_cols = Vec::new();
    let mut row = 0usize;
    for col in 0..cols {
        let mut piv = None;
        for r in row..rows {
            if !m[r][col].is_zero() {
                piv = Some(r);
                break;
            }
        }
        let Some(piv) = piv else { continue };
        m.swap(row, piv);
        let lead = m[row][col].clone();
        for c in col..cols {
            m[row][c] = &m[row][c] / &lead;
        }
        for r in 0..rows {
            if r != row && !m[r][col].is_zero() {
                let factor = m[r][col].clone();
                for c in col..cols {
                    let delta = &factor * &m[row][c];
                    m[r][c] = &m[r][c] - &delta;
                }
            }
        }
        pivot_cols.push(col);
        row += 1;
        if row == rows {
            break;
        }
    }
    let pivot_row_of: HashMap<usize, usize> = pivot_cols
        .iter()
        .enumerate()
        .map(|(r, &c)| (c, r))
        .collect();
    let mut basis = Vec::new();
    for free in 0..cols {
        if pivot_row_of.contains_key(&free) {
            continue;
        }
        let mut v = vec![BigRational::zero(); cols];
        v[free] = BigRational::one();
        for (&pc, &pr) in &pivot_row_of {
            v[pc] = -m[pr][free].clone();
        }
        basis.push(v);
    }
    basis
}

/// Clear denominators and divide by the gcd; sign fixed so the first
/// nonzero entry is positive.
fn primitive_integer_vector(v: &[BigRational]) -> Result<Vec<i64>> {
    let mut lcm = BigInt::one();
    for q in v {
        lcm = lcm.lcm(q.denom());
    }
    let mut ints: Vec<BigInt> = v.iter().map(|q| (q * &lcm).to_integer()).collect();
    let mut g = BigInt::zero();
    for z in &ints {
        g = g.gcd(z);
    }
    if !g.is_zero() && g != BigInt::one() {
        for z in ints.iter_mut() {
            *z = &*z / &g;
        }
    }
    if let Some(first) = ints.iter().find(|z| !z.is_zero()) {
        if first.is_negative() {
            for z in ints.iter_mut() {
                *z = -&*z;
            }
        }
    }
    ints.into_iter()
        .map(|z| {
            i64::try_from(&z).map_err(|_| {
                Error::numeric(format!("harmonic basis coefficient {z} exceeds i64"))
            })
        })
        .collect()
}

/// Monomial moment over the upper unit half ball:
/// `int_{B_1, x_d > 0} x^gamma dx`.
///
/// Zero when any of the first `d-1` exponents is odd; otherwise
/// `prod_i Gamma((gamma_i + 1)/2) / Gamma((|gamma| + d)/2) / (|gamma| + d)`.
pub fn half_ball_moment(gamma: &[u32]) -> f64 {
    let d = gamma.len();
    assert!(d >= 2);
    if gamma[..d - 1].iter().any(|&g| g % 2 == 1) {
        return 0.0;
    }
    let total: u32 = gamma.iter().sum();
    let mut prod = 1.0;
    for &g in gamma {
        prod *= gamma_fn((g as f64 + 1.0) / 2.0);
    }
    prod / gamma_fn((total as f64 + d as f64) / 2.0) / (total as f64 + d as f64)
}

/// Harmonic polynomials of degree `n` vanishing on `{x_d = 0}`: the parts
/// of the harmonic basis odd in the last coordinate. The Laplacian
/// preserves vertical parity, so each odd part is itself harmonic; the
/// independent ones are kept (exact integer coefficients survive the
/// filtering untouched).
pub fn vanishing_harmonic_basis(dim: usize, n: usize) -> Result<Vec<Polynomial>> {
    let mut out: Vec<Polynomial> = Vec::new();
    for p in harmonic_basis(dim, n)? {
        let mut odd = Polynomial::new(dim);
        for (alpha, &c) in p.terms() {
            if alpha[dim - 1] % 2 == 1 {
                odd.insert_add(alpha.clone(), c);
            }
        }
        if odd.is_empty() {
            continue;
        }
        // Keep only candidates independent of what we already have, by a
        // scale-relative Gram-Schmidt residual over the half ball.
        let mut resid = odd.clone();
        for q in &out {
            let c = inner_product_half_ball(&resid, q) / inner_product_half_ball(q, q);
            resid = resid.sub(&q.scaled(c));
        }
        let full = inner_product_half_ball(&odd, &odd);
        let left = inner_product_half_ball(&resid, &resid);
        if left > 1e-20 * full {
            out.push(odd);
        }
    }
    Ok(out)
}

/// Orthonormal basis (in `L^2` of the upper half ball) of the
/// boundary-vanishing harmonics of degrees `1..=max_degree`. Odd-odd
/// products are even in the vertical coordinate, so half-ball inner
/// products are half the full-ball ones and homogeneous layers of
/// different degree are exactly orthogonal; orthonormalization therefore
/// never mixes degrees.
pub fn orthonormal_vanishing_basis(dim: usize, max_degree: usize) -> Result<OrthoBasis> {
    let mut raw = Vec::new();
    let mut degrees = Vec::new();
    for n in 1..=max_degree {
        for p in vanishing_harmonic_basis(dim, n)? {
            raw.push(p);
            degrees.push(n);
        }
    }
    let mut ortho: Vec<Polynomial> = Vec::with_capacity(raw.len());
    for mut p in raw {
        for e in &ortho {
            let c = inner_product_half_ball(&p, e);
            p = p.sub(&e.scaled(c));
        }
        for e in &ortho {
            let c = inner_product_half_ball(&p, e);
            p = p.sub(&e.scaled(c));
        }
        let nrm2 = inner_product_half_ball(&p, &p);
        if nrm2 <= 1e-20 {
            return Err(Error::conditioning(
                "vanishing harmonic basis element collapsed during orthonormalization",
            ));
        }
        ortho.push(p.scaled(1.0 / nrm2.sqrt()));
    }
    Ok(OrthoBasis {
        dim,
        max_degree,
        half: true,
        elements: ortho,
        degrees,
    })
}

/// Monomial moment over the full unit ball: zero when any exponent is odd,
/// and twice the half-ball value otherwise (the vertical-even slice halves
/// exactly).
pub fn full_ball_moment(gamma: &[u32]) -> f64 {
    if gamma.iter().any(|&g| g % 2 == 1) {
        return 0.0;
    }
    2.0 * half_ball_moment(gamma)
}

fn inner_product_by_moment(p: &Polynomial, q: &Polynomial, moment: fn(&[u32]) -> f64) -> f64 {
    assert_eq!(p.dim, q.dim);
    let mut sum = 0.0;
    for (alpha, &ca) in p.terms() {
        for (beta, &cb) in q.terms() {
            let gamma: Vec<u32> = alpha.iter().zip(beta).map(|(a, b)| a + b).collect();
            let m = moment(&gamma);
            if m != 0.0 {
                sum += ca * cb * m;
            }
        }
    }
    sum
}

/// `L^2` inner product of two polynomials over the upper unit half ball,
/// by exact monomial moments.
pub fn inner_product_half_ball(p: &Polynomial, q: &Polynomial) -> f64 {
    inner_product_by_moment(p, q, half_ball_moment)
}

/// `L^2` inner product over the full unit ball.
pub fn inner_product_full_ball(p: &Polynomial, q: &Polynomial) -> f64 {
    inner_product_by_moment(p, q, full_ball_moment)
}

/// Orthonormal basis of harmonic polynomials of degree at most
/// `max_degree`, in `L^2` of either the upper unit half ball or the full
/// unit ball.
pub struct OrthoBasis {
    pub dim: usize,
    pub max_degree: usize,
    /// Whether the inner product is the half-ball one.
    pub half: bool,
    elements: Vec<Polynomial>,
    degrees: Vec<usize>,
}

/// Joint orthonormalization across degrees 0..=max_degree by modified
/// Gram-Schmidt in degree-then-construction order (deterministic), in the
/// upper half-ball inner product.
pub fn orthonormal_basis(dim: usize, max_degree: usize) -> Result<OrthoBasis> {
    orthonormalize(dim, max_degree, true)
}

/// Same basis construction in the full-ball inner product, where
/// homogeneous harmonics of different degrees are exactly orthogonal.
pub fn orthonormal_basis_full(dim: usize, max_degree: usize) -> Result<OrthoBasis> {
    orthonormalize(dim, max_degree, false)
}

fn orthonormalize(dim: usize, max_degree: usize, half: bool) -> Result<OrthoBasis> {
    let product = if half {
        inner_product_half_ball
    } else {
        inner_product_full_ball
    };
    let mut raw = Vec::new();
    let mut degrees = Vec::new();
    for n in 0..=max_degree {
        for p in harmonic_basis(dim, n)? {
            raw.push(p);
            degrees.push(n);
        }
    }
    let mut ortho: Vec<Polynomial> = Vec::with_capacity(raw.len());
    for mut p in raw {
        for e in &ortho {
            let c = product(&p, e);
            p = p.sub(&e.scaled(c));
        }
        // Second Gram-Schmidt pass for numerical orthogonality.
        for e in &ortho {
            let c = product(&p, e);
            p = p.sub(&e.scaled(c));
        }
        let nrm2 = product(&p, &p);
        if nrm2 <= 1e-20 {
            return Err(Error::conditioning(
                "harmonic basis element collapsed during orthonormalization",
            ));
        }
        ortho.push(p.scaled(1.0 / nrm2.sqrt()));
    }
    Ok(OrthoBasis {
        dim,
        max_degree,
        half,
        elements: ortho,
        degrees,
    })
}

impl OrthoBasis {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn element(&self, i: usize) -> &Polynomial {
        &self.elements[i]
    }

    pub fn degree_of(&self, i: usize) -> usize {
        self.degrees[i]
    }

    /// The basis inner product (half- or full-ball per construction).
    pub fn product(&self, p: &Polynomial, q: &Polynomial) -> f64 {
        if self.half {
            inner_product_half_ball(p, q)
        } else {
            inner_product_full_ball(p, q)
        }
    }

    /// Exact expansion coefficients `<p, e_i>` of a polynomial in the
    /// basis (valid when `p` lies in the harmonic span).
    pub fn coefficients_of(&self, p: &Polynomial) -> Vec<f64> {
        self.elements.iter().map(|e| self.product(p, e)).collect()
    }

    pub fn reconstruct(&self, coeffs: &[f64]) -> Polynomial {
        assert_eq!(coeffs.len(), self.elements.len());
        let mut p = Polynomial::new(self.dim);
        for (e, &c) in self.elements.iter().zip(coeffs) {
            if c != 0.0 {
                p = p.add(&e.scaled(c));
            }
        }
        p
    }
}

/// `grad Gamma(z) = -z / (sigma_{d-1} |z|^d)` for the fundamental solution
/// normalized so that `-Delta Gamma = delta_0` (all `d >= 2`).
pub fn grad_gamma(z: &[f64]) -> Vec<f64> {
    let d = z.len();
    let r2: f64 = z.iter().map(|v| v * v).sum();
    let scale = -1.0 / (sphere_area(d) * r2.powf(d as f64 / 2.0));
    z.iter().map(|&v| v * scale).collect()
}

/// One summand `coef * z^pow * |z|^-q` of a derivative of the fundamental
/// solution.
#[derive(Debug, Clone)]
struct SymTerm {
    coef: f64,
    pow: Vec<u32>,
    q: u32,
}

type SymSum = Vec<SymTerm>;

fn derive_sum(s: &SymSum, i: usize) -> SymSum {
    let mut acc: BTreeMap<(Vec<u32>, u32), f64> = BTreeMap::new();
    for t in s {
        if t.pow[i] > 0 {
            let mut p = t.pow.clone();
            p[i] -= 1;
            *acc.entry((p, t.q)).or_insert(0.0) += t.coef * t.pow[i] as f64;
        }
        let mut p = t.pow.clone();
        p[i] += 1;
        *acc.entry((p, t.q + 2)).or_insert(0.0) -= t.coef * t.q as f64;
    }
    acc.into_iter()
        .filter(|&(_, c)| c != 0.0)
        .map(|((pow, q), coef)| SymTerm { coef, pow, q })
        .collect()
}

fn eval_sum(s: &SymSum, z: &[f64]) -> f64 {
    let r = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut out = 0.0;
    for t in s {
        let mut v = t.coef * r.powi(-(t.q as i32));
        for (zi, &pi) in z.iter().zip(&t.pow) {
            if pi > 0 {
                v *= zi.powi(pi as i32);
            }
        }
        out += v;
    }
    out
}

/// All derivatives `D^beta` of the components of `grad Gamma` for
/// `|beta| = k`, keyed by `beta`.
struct TaylorLayer {
    entries: Vec<(Vec<u32>, Vec<SymSum>)>,
}

type TaylorCache = LazyLock<Mutex<HashMap<(usize, usize), Arc<TaylorLayer>>>>;
static TAYLOR_CACHE: TaylorCache = LazyLock::new(|| Mutex::new(HashMap::new()));

fn taylor_layer(dim: usize, k: usize) -> Arc<TaylorLayer> {
    if let Some(hit) = TAYLOR_CACHE.lock().unwrap().get(&(dim, k)) {
        return hit.clone();
    }
    let layer = if k == 0 {
        let sigma = sphere_area(dim);
        let comps: Vec<SymSum> = (0..dim)
            .map(|j| {
                let mut pow = vec![0u32; dim];
                pow[j] = 1;
                vec![SymTerm {
                    coef: -1.0 / sigma,
                    pow,
                    q: dim as u32,
                }]
            })
            .collect();
        TaylorLayer {
            entries: vec![(vec![0u32; dim], comps)],
        }
    } else {
        let prev = taylor_layer(dim, k - 1);
        let prev_of: HashMap<&[u32], &Vec<SymSum>> = prev
            .entries
            .iter()
            .map(|(b, c)| (b.as_slice(), c))
            .collect();
        let mut entries = Vec::new();
        for beta in monomials(dim, k) {
            let i = beta.iter().position(|&b| b > 0).unwrap();
            let mut parent = beta.clone();
            parent[i] -= 1;
            let comps = prev_of[parent.as_slice()];
            let derived: Vec<SymSum> = comps.iter().map(|s| derive_sum(s, i)).collect();
            entries.push((beta, derived));
        }
        TaylorLayer { entries }
    };
    let arc = Arc::new(layer);
    TAYLOR_CACHE
        .lock()
        .unwrap()
        .insert((dim, k), arc.clone());
    arc
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Degree-`k` Taylor term of `Y -> grad Gamma(Y - Z)` around `Y = 0`:
/// `sum_{|beta| = k} D^beta (grad Gamma)(-Z) Y^beta / beta!`.
///
/// Homogeneous of degree `k` in `Y` and bounded by
/// `C_k |Z|^{1 - d - k} |Y|^k`.
pub fn gamma_taylor_term(y: &[f64], z: &[f64], k: usize) -> Result<Vec<f64>> {
    let dim = y.len();
    if z.len() != dim {
        return Err(Error::domain("gamma_taylor_term needs matching dimensions"));
    }
    let zn: f64 = z.iter().map(|v| v * v).sum::<f64>();
    if zn == 0.0 {
        return Err(Error::domain("gamma_taylor_term is singular at Z = 0"));
    }
    let neg_z: Vec<f64> = z.iter().map(|v| -v).collect();
    let layer = taylor_layer(dim, k);
    let mut out = vec![0.0; dim];
    for (beta, comps) in &layer.entries {
        let mut ypow = 1.0;
        let mut bfact = 1.0;
        for (yi, &bi) in y.iter().zip(beta) {
            if bi > 0 {
                ypow *= yi.powi(bi as i32);
                bfact *= factorial(bi);
            }
        }
        if ypow == 0.0 {
            continue;
        }
        let w = ypow / bfact;
        for (j, s) in comps.iter().enumerate() {
            out[j] += w * eval_sum(s, &neg_z);
        }
    }
    Ok(out)
}
