//! Field abstraction: scalar functions with gradients on a region of
//! validity, the common currency between the solver, the frequency
//! functionals, and the expansion.

use crate::geometry::Chart;
use crate::hhp::Polynomial;

/// A scalar field with gradient, a domain indicator, and a radius of
/// validity around the origin of its coordinate system.
pub trait Field {
    fn dim(&self) -> usize;
    fn value(&self, point: &[f64]) -> f64;
    fn gradient(&self, point: &[f64]) -> Vec<f64>;
    /// Domain indicator; integration masks rely on this.
    fn inside(&self, _point: &[f64]) -> bool {
        true
    }
    /// Radius around the origin within which values are trustworthy.
    fn hull_radius(&self) -> f64;
}

/// Exact polynomial field, optionally restricted to the upper half space
/// `{x_d > 0}` (the restriction only affects the indicator; evaluation is
/// the plain polynomial everywhere).
pub struct PolyField {
    pub poly: Polynomial,
    pub upper_halfspace: bool,
    pub hull: f64,
}

impl PolyField {
    pub fn new(poly: Polynomial) -> Self {
        PolyField {
            poly,
            upper_halfspace: false,
            hull: f64::INFINITY,
        }
    }

    pub fn on_halfspace(poly: Polynomial) -> Self {
        PolyField {
            poly,
            upper_halfspace: true,
            hull: f64::INFINITY,
        }
    }
}

impl Field for PolyField {
    fn dim(&self) -> usize {
        self.poly.dim
    }

    fn value(&self, point: &[f64]) -> f64 {
        self.poly.eval(point)
    }

    fn gradient(&self, point: &[f64]) -> Vec<f64> {
        self.poly.eval_gradient(point)
    }

    fn inside(&self, point: &[f64]) -> bool {
        !self.upper_halfspace || point[self.poly.dim - 1] > 0.0
    }

    fn hull_radius(&self) -> f64 {
        self.hull
    }
}

/// Pointwise difference `a - b` of two fields on the intersection of
/// their regions.
pub struct DiffField<'a> {
    pub a: &'a dyn Field,
    pub b: &'a dyn Field,
}

impl Field for DiffField<'_> {
    fn dim(&self) -> usize {
        self.a.dim()
    }

    fn value(&self, point: &[f64]) -> f64 {
        self.a.value(point) - self.b.value(point)
    }

    fn gradient(&self, point: &[f64]) -> Vec<f64> {
        let ga = self.a.gradient(point);
        let gb = self.b.gradient(point);
        ga.iter().zip(&gb).map(|(x, y)| x - y).collect()
    }

    fn inside(&self, point: &[f64]) -> bool {
        self.a.inside(point) && self.b.inside(point)
    }

    fn hull_radius(&self) -> f64 {
        self.a.hull_radius().min(self.b.hull_radius())
    }
}

/// A flat-coordinates field pushed forward through a chart: evaluates
/// `v(to_flat(X))` on the curved domain, zero at and below the boundary.
///
/// The gradient is the exact chain rule through the rotation and the
/// vertical shear: `grad_X u = O^T (grad_y v - v_s grad phi_tilde, v_s)`.
pub struct UnflattenedField<'a> {
    pub inner: &'a dyn Field,
    pub chart: &'a Chart<'a>,
}

impl Field for UnflattenedField<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn value(&self, point: &[f64]) -> f64 {
        let flat = match self.chart.to_flat(point) {
            Ok(f) => f,
            Err(_) => return 0.0,
        };
        let d = flat.len();
        if flat[d - 1] <= 0.0 {
            return 0.0;
        }
        self.inner.value(&flat)
    }

    fn gradient(&self, point: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let flat = match self.chart.to_flat(point) {
            Ok(f) => f,
            Err(_) => return vec![0.0; d],
        };
        if flat[d - 1] <= 0.0 {
            return vec![0.0; d];
        }
        let gv = self.inner.gradient(&flat);
        let q = match self.chart.grad_phi_tilde(&flat[..d - 1]) {
            Ok(q) => q,
            Err(_) => return vec![0.0; d],
        };
        let vs = gv[d - 1];
        let mut sheared = Vec::with_capacity(d);
        for k in 0..d - 1 {
            sheared.push(gv[k] - vs * q[k]);
        }
        sheared.push(vs);
        self.chart.frame.rotate_back(&sheared)
    }

    fn inside(&self, point: &[f64]) -> bool {
        match self.chart.to_flat(point) {
            Ok(flat) => {
                let d = flat.len();
                flat[d - 1] > 0.0 && self.inner.inside(&flat)
            }
            Err(_) => false,
        }
    }

    fn hull_radius(&self) -> f64 {
        // The chart is a bounded perturbation of a rotation near the base
        // point; half of the inner hull is a safe region of validity.
        0.5 * self.inner.hull_radius()
    }
}
