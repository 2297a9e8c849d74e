//! Graph domains with Dini-continuous gradients, adapted boundary frames,
//! and the flattening charts used by the solver and the expansion.
//!
//! A domain is the region above a graph `t = phi(x)` in `R^d` whose
//! gradient has a Dini modulus of continuity. At a boundary point the
//! adapted frame is the rotation taking the graph normal to the vertical
//! axis; in rotated coordinates the boundary is again a graph `phi_tilde`
//! with the same modulus (up to fixed constants) and zero gradient at the
//! base point. The chart composes that rotation with the vertical shear
//! `(y, s) -> (y, s + phi_tilde(y))`, turning the Laplace problem into a
//! divergence-form problem with matrix `A(y)` on a true half-space.

use crate::linalg::{dot, norm, Mat};
use crate::modulus::{theta_hat, Modulus};
use crate::{Error, Result};

/// Rotation adapted to a graph gradient `g`: maps the graph normal
/// `(-g, 1)/sqrt(1+|g|^2)` to `e_d` and tangent vectors to horizontals.
///
/// The matrix has the closed form (with `c = 1/sqrt(1+|g|^2)` and unit
/// vector `gh = g/|g|`):
/// upper-left block `Id + (c-1) gh gh^T`, upper-right column `c g`,
/// bottom row `(-c g^T, c)`; it is special orthogonal for every `g`.
#[derive(Debug, Clone)]
pub struct Frame {
    pub dim: usize,
    o: Mat,
}

impl Frame {
    pub fn from_gradient(g: &[f64]) -> Frame {
        let dm1 = g.len();
        let dim = dm1 + 1;
        let gnorm = norm(g);
        let c = 1.0 / (1.0 + gnorm * gnorm).sqrt();
        let mut o = Mat::zeros(dim, dim);
        for i in 0..dm1 {
            o[(i, i)] = 1.0;
        }
        if gnorm > 0.0 {
            for i in 0..dm1 {
                for j in 0..dm1 {
                    o[(i, j)] += (c - 1.0) * g[i] * g[j] / (gnorm * gnorm);
                }
            }
        }
        for i in 0..dm1 {
            o[(i, dm1)] = c * g[i];
            o[(dm1, i)] = -c * g[i];
        }
        o[(dm1, dm1)] = c;
        Frame { dim, o }
    }

    /// Ambient to adapted coordinates: `O x`.
    pub fn rotate(&self, x: &[f64]) -> Vec<f64> {
        self.o.matvec(x)
    }

    /// Adapted back to ambient coordinates: `O^T y`.
    pub fn rotate_back(&self, y: &[f64]) -> Vec<f64> {
        self.o.t_matvec(y)
    }

    pub fn matrix(&self) -> &Mat {
        &self.o
    }

    /// Frobenius distance between two frame rotations.
    pub fn distance(&self, other: &Frame) -> f64 {
        self.o.frobenius_distance(&other.o)
    }
}

/// Analytic graph shapes.
#[derive(Debug, Clone)]
pub enum GraphShape {
    /// `phi = 0`: exact half-space.
    Flat,
    /// `phi(x) = kappa |x|^power` with `power` in `(1, 2]`; the gradient is
    /// `power - 1` Hoelder, so a power modulus with that exponent (and a
    /// large enough constant) dominates it.
    RadialPower { kappa: f64, power: f64 },
}

impl GraphShape {
    fn phi(&self, x: &[f64]) -> f64 {
        match self {
            GraphShape::Flat => 0.0,
            GraphShape::RadialPower { kappa, power } => kappa * norm(x).powf(*power),
        }
    }

    fn grad_phi(&self, x: &[f64]) -> Vec<f64> {
        match self {
            GraphShape::Flat => vec![0.0; x.len()],
            GraphShape::RadialPower { kappa, power } => {
                let r = norm(x);
                if r == 0.0 {
                    return vec![0.0; x.len()];
                }
                let scale = kappa * power * r.powf(power - 2.0);
                x.iter().map(|&xi| scale * xi).collect()
            }
        }
    }
}

/// The region `{(x, t) : t > phi(x)}` together with the modulus that
/// dominates the gradient oscillation of `phi`.
#[derive(Debug, Clone)]
pub struct GraphDomain {
    pub dim: usize,
    shape: GraphShape,
    modulus: Modulus,
}

impl GraphDomain {
    pub fn new(dim: usize, shape: GraphShape, modulus: Modulus) -> Result<Self> {
        if dim < 2 {
            return Err(Error::domain(format!("graph domains need dim >= 2, got {dim}")));
        }
        if let GraphShape::RadialPower { kappa, power } = &shape {
            if !(*power > 1.0 && *power <= 2.0) {
                return Err(Error::domain(format!(
                    "radial power shape needs power in (1, 2], got {power}"
                )));
            }
            if !kappa.is_finite() {
                return Err(Error::domain("radial power shape needs finite kappa"));
            }
        }
        Ok(GraphDomain { dim, shape, modulus })
    }

    pub fn flat(dim: usize) -> Self {
        GraphDomain {
            dim,
            shape: GraphShape::Flat,
            modulus: Modulus::zero(),
        }
    }

    pub fn is_flat(&self) -> bool {
        matches!(self.shape, GraphShape::Flat)
    }

    pub fn modulus(&self) -> &Modulus {
        &self.modulus
    }

    /// Graph height over `x` (a point of `R^{d-1}`).
    pub fn phi(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim - 1);
        self.shape.phi(x)
    }

    pub fn grad_phi(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.dim - 1);
        self.shape.grad_phi(x)
    }

    /// Membership of an ambient point `(x, t)`.
    pub fn contains(&self, point: &[f64]) -> bool {
        debug_assert_eq!(point.len(), self.dim);
        let (x, t) = point.split_at(self.dim - 1);
        t[0] > self.phi(x)
    }

    /// Lift `x` to the boundary point `(x, phi(x))`.
    pub fn on_graph(&self, x: &[f64]) -> Vec<f64> {
        let mut p = x.to_vec();
        p.push(self.phi(x));
        p
    }

    /// Largest sampled ratio `|grad phi(x) - grad phi(y)| / theta(|x-y|)`
    /// over random pairs in the ball of radius `region`; at most 1 for an
    /// admissible (domain, modulus) pairing.
    pub fn gradient_ratio_sup(&self, region: f64, pairs: usize, seed: u64) -> f64 {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let dm1 = self.dim - 1;
        let mut sup: f64 = 0.0;
        for _ in 0..pairs {
            let x: Vec<f64> = (0..dm1).map(|_| rng.gen_range(-region..region)).collect();
            let y: Vec<f64> = (0..dm1).map(|_| rng.gen_range(-region..region)).collect();
            let sep = norm(&x.iter().zip(&y).map(|(a, b)| a - b).collect::<Vec<_>>());
            if sep < 1e-12 {
                continue;
            }
            let gx = self.grad_phi(&x);
            let gy = self.grad_phi(&y);
            let diff = norm(&gx.iter().zip(&gy).map(|(a, b)| a - b).collect::<Vec<_>>());
            let theta = self.modulus.eval(sep);
            if theta == 0.0 {
                if diff > 0.0 {
                    return f64::INFINITY;
                }
                continue;
            }
            sup = sup.max(diff / theta);
        }
        sup
    }
}

/// Flattening chart at a boundary base point `x0`.
///
/// Composition of (i) the adapted frame rotation about `X0 = (x0, phi(x0))`
/// and (ii) the vertical shear by the rotated graph `phi_tilde`, after
/// which the domain locally becomes `{s > 0}`.
pub struct Chart<'a> {
    pub domain: &'a GraphDomain,
    pub x0: Vec<f64>,
    pub base: Vec<f64>,
    pub frame: Frame,
    g0: Vec<f64>,
    c: f64,
}

impl<'a> Chart<'a> {
    pub fn new(domain: &'a GraphDomain, x0: &[f64]) -> Chart<'a> {
        assert_eq!(x0.len(), domain.dim - 1);
        let g0 = domain.grad_phi(x0);
        let frame = Frame::from_gradient(&g0);
        let c = 1.0 / (1.0 + dot(&g0, &g0)).sqrt();
        Chart {
            domain,
            x0: x0.to_vec(),
            base: domain.on_graph(x0),
            frame,
            g0,
            c,
        }
    }

    /// Horizontal part of the rotated graph point:
    /// `g(x) = Otil (x - x0) + (phi(x) - phi(x0)) b` where `Otil` and `b`
    /// are the frame blocks.
    pub fn g_map(&self, x: &[f64]) -> Vec<f64> {
        let dm1 = self.domain.dim - 1;
        let o = self.frame.matrix();
        let dphi = self.domain.phi(x) - self.domain.phi(&self.x0);
        let mut out = vec![0.0; dm1];
        for i in 0..dm1 {
            let mut s = 0.0;
            for j in 0..dm1 {
                s += o[(i, j)] * (x[j] - self.x0[j]);
            }
            out[i] = s + o[(i, dm1)] * dphi;
        }
        out
    }

    /// Jacobian `Dg(x) = Otil + b grad phi(x)^T`.
    pub fn g_jacobian(&self, x: &[f64]) -> Mat {
        let dm1 = self.domain.dim - 1;
        let o = self.frame.matrix();
        let gp = self.domain.grad_phi(x);
        let mut m = Mat::zeros(dm1, dm1);
        for i in 0..dm1 {
            for j in 0..dm1 {
                m[(i, j)] = o[(i, j)] + o[(i, dm1)] * gp[j];
            }
        }
        m
    }

    /// Invert `g_map` by Newton iteration (quadratic convergence; the
    /// Jacobian is a Dini-small perturbation of an orthogonal block).
    pub fn g_inverse(&self, y: &[f64]) -> Result<Vec<f64>> {
        let dm1 = self.domain.dim - 1;
        assert_eq!(y.len(), dm1);
        if self.domain.is_flat() && norm(&self.g0) == 0.0 {
            let mut x = self.x0.clone();
            for i in 0..dm1 {
                x[i] += y[i];
            }
            return Ok(x);
        }
        // Seed with the inverse of the leading orthogonal block.
        let mut x = self.x0.clone();
        {
            let gn2 = dot(&self.g0, &self.g0);
            if gn2 > 0.0 {
                let coef = (1.0 / self.c - 1.0) / gn2;
                let gy = dot(&self.g0, y);
                for i in 0..dm1 {
                    x[i] += y[i] + coef * self.g0[i] * gy;
                }
            } else {
                for i in 0..dm1 {
                    x[i] += y[i];
                }
            }
        }
        let tol = 1e-13 * (1.0 + norm(y));
        for _ in 0..60 {
            let fx = self.g_map(&x);
            let res: Vec<f64> = fx.iter().zip(y).map(|(a, b)| a - b).collect();
            if norm(&res) <= tol {
                return Ok(x);
            }
            let jac = self.g_jacobian(&x);
            let step = jac.solve(&res)?;
            for i in 0..dm1 {
                x[i] -= step[i];
            }
        }
        Err(Error::convergence(format!(
            "chart inversion did not reach {tol:.1e} in 60 Newton steps at y = {y:?}"
        )))
    }

    /// Height of the boundary graph in rotated coordinates:
    /// `phi_tilde(y) = -c g0 . (x - x0) + c (phi(x) - phi(x0))` at
    /// `x = g_inverse(y)`.
    pub fn phi_tilde(&self, y: &[f64]) -> Result<f64> {
        if self.domain.is_flat() && norm(&self.g0) == 0.0 {
            return Ok(0.0);
        }
        let x = self.g_inverse(y)?;
        let mut s = 0.0;
        for i in 0..self.domain.dim - 1 {
            s -= self.c * self.g0[i] * (x[i] - self.x0[i]);
        }
        s += self.c * (self.domain.phi(&x) - self.domain.phi(&self.x0));
        Ok(s)
    }

    /// Gradient of the rotated graph:
    /// `grad phi_tilde(y) = c Dg(x)^-T (grad phi(x) - g0)`; it vanishes at
    /// `y = 0` by construction.
    pub fn grad_phi_tilde(&self, y: &[f64]) -> Result<Vec<f64>> {
        let dm1 = self.domain.dim - 1;
        if self.domain.is_flat() && norm(&self.g0) == 0.0 {
            return Ok(vec![0.0; dm1]);
        }
        let x = self.g_inverse(y)?;
        let gp = self.domain.grad_phi(&x);
        let rhs: Vec<f64> = gp
            .iter()
            .zip(&self.g0)
            .map(|(a, b)| self.c * (a - b))
            .collect();
        // Dg^T q = rhs  =>  q = Dg^-T rhs.
        self.g_jacobian(&x).transpose().solve(&rhs)
    }

    /// Ambient point to chart coordinates `(y, s)`: rotate about the base
    /// point, then subtract the rotated graph height.
    pub fn to_flat(&self, point: &[f64]) -> Result<Vec<f64>> {
        let dim = self.domain.dim;
        assert_eq!(point.len(), dim);
        let rel: Vec<f64> = point.iter().zip(&self.base).map(|(a, b)| a - b).collect();
        let mut rot = self.frame.rotate(&rel);
        let h = self.phi_tilde(&rot[..dim - 1])?;
        rot[dim - 1] -= h;
        Ok(rot)
    }

    /// Chart coordinates `(y, s)` back to the ambient point
    /// `X0 + O^T (y, s + phi_tilde(y))`.
    pub fn from_flat(&self, flat: &[f64]) -> Result<Vec<f64>> {
        let dim = self.domain.dim;
        assert_eq!(flat.len(), dim);
        let mut lifted = flat.to_vec();
        lifted[dim - 1] += self.phi_tilde(&flat[..dim - 1])?;
        let back = self.frame.rotate_back(&lifted);
        Ok(back.iter().zip(&self.base).map(|(a, b)| a + b).collect())
    }

    /// Divergence-form coefficient matrix of the flattened Laplacian:
    /// `A(y) = [[Id, -q], [-q^T, 1 + |q|^2]]` with `q = grad phi_tilde(y)`.
    /// Unit determinant and symmetric positive definite.
    pub fn coefficient_matrix(&self, y: &[f64]) -> Result<Mat> {
        let dm1 = self.domain.dim - 1;
        let q = self.grad_phi_tilde(y)?;
        let mut a = Mat::identity(self.domain.dim);
        for i in 0..dm1 {
            a[(i, dm1)] = -q[i];
            a[(dm1, i)] = -q[i];
        }
        a[(dm1, dm1)] = 1.0 + dot(&q, &q);
        Ok(a)
    }

    /// Coefficient matrix of the odd extension across `{s = 0}`: the
    /// off-diagonal column changes sign on the lower half-space, which is
    /// exactly the conjugation by the reflection `(y, s) -> (y, -s)`.
    pub fn coefficient_matrix_ext(&self, y: &[f64], s: f64) -> Result<Mat> {
        let mut a = self.coefficient_matrix(y)?;
        if s < 0.0 {
            let dm1 = self.domain.dim - 1;
            for i in 0..dm1 {
                a[(i, dm1)] = -a[(i, dm1)];
                a[(dm1, i)] = -a[(dm1, i)];
            }
        }
        Ok(a)
    }

    /// Interior shift `3 r theta_hat(r)` at scale `r`.
    pub fn interior_shift(&self, r: f64, tol: f64) -> Result<f64> {
        Ok(3.0 * r * theta_hat(self.domain.modulus(), r, tol)?)
    }

    /// Shifted chart map `Psi(Y) = X0 + O^T (Y + 3 |Y| theta_hat(|Y|) e_d)`;
    /// pushes rotated coordinates far enough above the graph that half-balls
    /// land inside the domain.
    pub fn psi_map(&self, y_rot: &[f64], tol: f64) -> Result<Vec<f64>> {
        let dim = self.domain.dim;
        assert_eq!(y_rot.len(), dim);
        let r = norm(y_rot);
        let mut lifted = y_rot.to_vec();
        if r > 0.0 {
            lifted[dim - 1] += self.interior_shift(r, tol)?;
        }
        let back = self.frame.rotate_back(&lifted);
        Ok(back.iter().zip(&self.base).map(|(a, b)| a + b).collect())
    }
}
