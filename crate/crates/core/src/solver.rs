//! Divergence-form Dirichlet solver on half-box grids, and the discrete
//! fields it produces.
//!
//! The computational domain is the box `[-L, L]^{d-1} x [0, V]` whose
//! boundary is exactly grid-aligned, so Dirichlet data enters with no
//! geometric snapping error; downstream functionals only read the solution
//! well inside the box. Elements are multilinear (Q1) on cubes of side `h`
//! with the coefficient matrix frozen at each cell center, which keeps the
//! assembled system symmetric positive definite for any symmetric positive
//! definite pointwise coefficient (a face-averaged finite-volume stencil
//! would lose symmetry for full-tensor coefficients). The solve is
//! Jacobi-preconditioned conjugate gradients.
//!
//! `extend_odd` reflects a zero-bottom solution to the lower half box; the
//! reflected coefficient flips the sign of its off-diagonal column, and the
//! interface fluxes then match exactly, which `weak_residual` can verify
//! against smooth test bumps.

use std::collections::HashMap;
use std::sync::{Arc, LazyLock, Mutex};

use crate::field::Field;
use crate::geometry::Chart;
use crate::linalg::Mat;
use crate::{Error, Result};

/// Uniform grid on `[-L, L]^{d-1} x [0, V]` with spacing `h`.
#[derive(Debug, Clone)]
pub struct HalfGrid {
    pub dim: usize,
    pub h: f64,
    /// Horizontal node indices run over `-n_h ..= n_h`.
    pub n_h: i64,
    /// Vertical node indices run over `0 ..= n_v`.
    pub n_v: i64,
}

impl HalfGrid {
    pub fn new(dim: usize, half_width: f64, height: f64, h: f64) -> Result<Self> {
        if !(dim == 2 || dim == 3) {
            return Err(Error::domain(format!("solver supports dim 2 or 3, got {dim}")));
        }
        if !(h > 0.0 && half_width > 0.0 && height > 0.0) {
            return Err(Error::domain("grid needs positive extents and spacing"));
        }
        let n_h = (half_width / h).round() as i64;
        let n_v = (height / h).round() as i64;
        if ((n_h as f64) * h - half_width).abs() > 1e-9 * half_width
            || ((n_v as f64) * h - height).abs() > 1e-9 * height
        {
            return Err(Error::domain(format!(
                "grid spacing {h} does not divide extents {half_width} x {height}"
            )));
        }
        if n_h < 2 || n_v < 2 {
            return Err(Error::domain("grid must have at least two cells per axis"));
        }
        let nodes = (2 * n_h + 1).pow(dim as u32 - 1) * (n_v + 1);
        if nodes > 40_000_000 {
            return Err(Error::domain(format!(
                "grid with {nodes} nodes exceeds the memory guard"
            )));
        }
        Ok(HalfGrid { dim, h, n_h, n_v })
    }

    pub fn node_point(&self, idx: &[i64]) -> Vec<f64> {
        idx.iter().map(|&i| i as f64 * self.h).collect()
    }
}

/// Where the coefficient matrix comes from.
pub enum CoeffSource<'a> {
    /// Identity coefficients: plain Laplace.
    Identity,
    /// Flattened-Laplacian coefficients `A(y)` of a boundary chart.
    Chart(&'a Chart<'a>),
}

/// A Dirichlet problem on the half box: `div(A grad v) = 0` inside,
/// `v = bc` on the whole box boundary (bottom included; pass data that
/// vanishes at `s = 0` for boundary-vanishing scenarios).
pub struct HalfBoxProblem<'a> {
    pub grid: HalfGrid,
    pub coeff: CoeffSource<'a>,
    pub bc: &'a dyn Fn(&[f64]) -> f64,
}

/// Solver outcome: the discrete field plus iteration statistics.
pub struct Solution {
    pub field: DiscreteField,
    pub iterations: usize,
    pub residual: f64,
}

/// Reference-cell stiffness tensors `S^{kl}[a][b] = int dN_a/dx_k dN_b/dx_l`
/// over `[0,1]^d`, exact via 2-point Gauss products; flat layout
/// `((k d + l) n + a) n + b` with `n = 2^d`.
fn stiffness_tensors(dim: usize) -> Arc<Vec<f64>> {
    static CACHE: LazyLock<Mutex<HashMap<usize, Arc<Vec<f64>>>>> =
        LazyLock::new(|| Mutex::new(HashMap::new()));
    if let Some(hit) = CACHE.lock().unwrap().get(&dim) {
        return hit.clone();
    }
    let n_sh = 1usize << dim;
    let g = [0.5 - 0.5 / 3.0f64.sqrt(), 0.5 + 0.5 / 3.0f64.sqrt()];
    let mut tensors = vec![0.0; dim * dim * n_sh * n_sh];
    // Iterate Gauss points as odometers over {0,1}^d.
    for gp in 0..n_sh {
        let x: Vec<f64> = (0..dim).map(|i| g[(gp >> i) & 1]).collect();
        // Each axis contributes Gauss weight 1/2 on [0,1].
        let weight = 1.0 / n_sh as f64;
        for a in 0..n_sh {
            for k in 0..dim {
                let da = shape_grad(dim, a, k, &x);
                for b in 0..n_sh {
                    for l in 0..dim {
                        let db = shape_grad(dim, b, l, &x);
                        tensors[((k * dim + l) * n_sh + a) * n_sh + b] += weight * da * db;
                    }
                }
            }
        }
    }
    let arc = Arc::new(tensors);
    CACHE.lock().unwrap().insert(dim, arc.clone());
    arc
}

/// `d N_a / d x_k` at `x` on the reference cell, where
/// `N_a(x) = prod_i (a_i ? x_i : 1 - x_i)`.
fn shape_grad(dim: usize, a: usize, k: usize, x: &[f64]) -> f64 {
    let mut v = 1.0;
    for i in 0..dim {
        let bit = (a >> i) & 1;
        if i == k {
            v *= if bit == 1 { 1.0 } else { -1.0 };
        } else {
            v *= if bit == 1 { x[i] } else { 1.0 - x[i] };
        }
    }
    v
}

/// Compressed sparse row matrix (square, symmetric by construction).
struct Csr {
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<f64>,
}

impl Csr {
    fn matvec(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.values[k] * x[self.col_idx[k] as usize];
            }
            *o = s;
        }
    }

    fn diagonal(&self, r: usize) -> f64 {
        for k in self.row_ptr[r]..self.row_ptr[r + 1] {
            if self.col_idx[k] as usize == r {
                return self.values[k];
            }
        }
        0.0
    }
}

/// Unknown-node indexing for the half box: all strictly interior nodes.
struct Indexing {
    dim: usize,
    n_h: i64,
    n_v: i64,
    /// Strides per axis (horizontal axes then vertical last).
    strides: Vec<i64>,
    rows: usize,
}

impl Indexing {
    fn new(grid: &HalfGrid) -> Self {
        let m_h = 2 * grid.n_h - 1;
        let m_v = grid.n_v - 1;
        let dm1 = grid.dim - 1;
        // Vertical is the slowest axis; horizontals nest inside.
        let mut strides = vec![0i64; grid.dim];
        let mut acc = 1i64;
        for k in (0..dm1).rev() {
            strides[k] = acc;
            acc *= m_h;
        }
        strides[grid.dim - 1] = acc;
        let rows = (acc * m_v) as usize;
        Indexing {
            dim: grid.dim,
            n_h: grid.n_h,
            n_v: grid.n_v,
            strides,
            rows,
        }
    }

    /// Unknown id of a node index, or None if the node is Dirichlet.
    fn id_of(&self, idx: &[i64]) -> Option<usize> {
        let dm1 = self.dim - 1;
        let j = idx[dm1];
        if j <= 0 || j >= self.n_v {
            return None;
        }
        let mut id = (j - 1) * self.strides[dm1];
        for k in 0..dm1 {
            let i = idx[k];
            if i <= -self.n_h || i >= self.n_h {
                return None;
            }
            id += (i + self.n_h - 1) * self.strides[k];
        }
        Some(id as usize)
    }
}

/// Assemble and solve the Dirichlet problem.
pub fn solve_dirichlet(problem: &HalfBoxProblem) -> Result<Solution> {
    let grid = &problem.grid;
    let dim = grid.dim;
    let dm1 = dim - 1;
    let h = grid.h;
    let n_sh = 1usize << dim;
    let indexing = Indexing::new(grid);
    let rows = indexing.rows;
    let tensors = stiffness_tensors(dim);
    let hscale = h.powi(dim as i32 - 2);

    // Element stiffness per horizontal cell (the coefficient depends only
    // on the horizontal coordinates).
    let m_cells_h = 2 * grid.n_h;
    let horiz_cells: usize = (m_cells_h as usize).pow(dm1 as u32);
    let mut cell_k: Vec<Vec<f64>> = Vec::with_capacity(horiz_cells);
    for cell in 0..horiz_cells {
        // Decode horizontal cell lower corner.
        let mut rem = cell as i64;
        let mut corner = vec![0i64; dm1];
        for k in (0..dm1).rev() {
            corner[k] = rem % m_cells_h - grid.n_h;
            rem /= m_cells_h;
        }
        let center: Vec<f64> = corner.iter().map(|&i| (i as f64 + 0.5) * h).collect();
        let a = match &problem.coeff {
            CoeffSource::Identity => Mat::identity(dim),
            CoeffSource::Chart(chart) => {
                if chart.domain.is_flat() {
                    Mat::identity(dim)
                } else {
                    chart.coefficient_matrix(&center)?
                }
            }
        };
        let mut ke = vec![0.0; n_sh * n_sh];
        for k in 0..dim {
            for l in 0..dim {
                let akl = a[(k, l)];
                if akl == 0.0 {
                    continue;
                }
                let base = (k * dim + l) * n_sh * n_sh;
                for e in 0..n_sh * n_sh {
                    ke[e] += akl * tensors[base + e] * hscale;
                }
            }
        }
        cell_k.push(ke);
    }

    // CSR pattern: neighbors within the 3^d stencil, enumerated in
    // ascending id order (offsets sorted lexicographically match the
    // stride order).
    let mut row_ptr = vec![0usize; rows + 1];
    let stencil: Vec<Vec<i64>> = {
        let mut offs = Vec::new();
        let mut cur = vec![-1i64; dim];
        loop {
            // Vertical slowest: orders ids ascending.
            let mut o = vec![0i64; dim];
            o[..dm1].copy_from_slice(&cur[1..]);
            o[dm1] = cur[0];
            offs.push(o);
            let mut k = dim;
            loop {
                if k == 0 {
                    break;
                }
                k -= 1;
                cur[k] += 1;
                if cur[k] <= 1 {
                    break;
                }
                cur[k] = -1;
            }
            if cur.iter().all(|&c| c == -1) {
                break;
            }
        }
        offs
    };

    let decode = |id: usize| -> Vec<i64> {
        let mut idx = vec![0i64; dim];
        let mut rem = id as i64;
        let j = rem / indexing.strides[dm1];
        idx[dm1] = j + 1;
        rem %= indexing.strides[dm1];
        for k in 0..dm1 {
            let q = rem / indexing.strides[k];
            idx[k] = q - grid.n_h + 1;
            rem %= indexing.strides[k];
        }
        idx
    };

    for row in 0..rows {
        let idx = decode(row);
        let mut count = 0;
        for off in &stencil {
            let nb: Vec<i64> = idx.iter().zip(off).map(|(a, b)| a + b).collect();
            if indexing.id_of(&nb).is_some() {
                count += 1;
            }
        }
        row_ptr[row + 1] = row_ptr[row] + count;
    }
    let nnz = row_ptr[rows];
    let mut col_idx = vec![0u32; nnz];
    let mut values = vec![0.0f64; nnz];
    for row in 0..rows {
        let idx = decode(row);
        let mut at = row_ptr[row];
        for off in &stencil {
            let nb: Vec<i64> = idx.iter().zip(off).map(|(a, b)| a + b).collect();
            if let Some(id) = indexing.id_of(&nb) {
                col_idx[at] = id as u32;
                at += 1;
            }
        }
    }

    let find_slot = |row: usize, col: usize, col_idx: &[u32], row_ptr: &[usize]| -> usize {
        let lo = row_ptr[row];
        let hi = row_ptr[row + 1];
        let target = col as u32;
        let mut a = lo;
        let mut b = hi;
        while a < b {
            let mid = (a + b) / 2;
            if col_idx[mid] < target {
                a = mid + 1;
            } else {
                b = mid;
            }
        }
        debug_assert!(col_idx[a] == target);
        a
    };

    let mut rhs = vec![0.0f64; rows];
    // Boundary values, evaluated once per node on demand.
    let mut bc_cache: HashMap<Vec<i64>, f64> = HashMap::new();
    let mut bc_value = |idx: &[i64]| -> f64 {
        if let Some(&v) = bc_cache.get(idx) {
            return v;
        }
        let point: Vec<f64> = idx.iter().map(|&i| i as f64 * h).collect();
        let v = (problem.bc)(&point);
        bc_cache.insert(idx.to_vec(), v);
        v
    };

    // Scatter element contributions; vertical stacks share the horizontal
    // element matrix.
    let mut corner = vec![-grid.n_h; dm1];
    loop {
        let mut cell_code = 0i64;
        for k in 0..dm1 {
            cell_code = cell_code * m_cells_h + (corner[k] + grid.n_h);
        }
        let ke = &cell_k[cell_code as usize];
        for j in 0..grid.n_v {
            // Node indices of the element corners; bit i of a selects the
            // upper node along axis i (horizontal axes first, vertical
            // last to match shape function ordering).
            let mut ids: Vec<Option<usize>> = Vec::with_capacity(n_sh);
            let mut nodes: Vec<Vec<i64>> = Vec::with_capacity(n_sh);
            for a in 0..n_sh {
                let mut nd = vec![0i64; dim];
                for k in 0..dm1 {
                    nd[k] = corner[k] + ((a >> k) & 1) as i64;
                }
                nd[dm1] = j + ((a >> dm1) & 1) as i64;
                ids.push(indexing.id_of(&nd));
                nodes.push(nd);
            }
            for a in 0..n_sh {
                let Some(ra) = ids[a] else { continue };
                for b in 0..n_sh {
                    let kab = ke[a * n_sh + b];
                    if kab == 0.0 {
                        continue;
                    }
                    match ids[b] {
                        Some(cb) => {
                            let slot = find_slot(ra, cb, &col_idx, &row_ptr);
                            values[slot] += kab;
                        }
                        None => {
                            rhs[ra] -= kab * bc_value(&nodes[b]);
                        }
                    }
                }
            }
        }
        // Advance the horizontal odometer.
        let mut k = dm1;
        loop {
            if k == 0 {
                corner.clear();
                break;
            }
            k -= 1;
            corner[k] += 1;
            if corner[k] <= grid.n_h - 1 {
                break;
            }
            corner[k] = -grid.n_h;
        }
        if corner.is_empty() {
            break;
        }
    }

    let csr = Csr {
        row_ptr,
        col_idx,
        values,
    };
    let (x, iterations, residual) = cg_jacobi(&csr, &rhs, 1e-10)?;

    // Full nodal array over the box, boundary values included.
    let m_h_all = (2 * grid.n_h + 1) as usize;
    let layer: usize = m_h_all.pow(dm1 as u32);
    let total = layer * (grid.n_v as usize + 1);
    let mut nodal = vec![0.0f64; total];
    let mut idx = vec![0i64; dim];
    for flat in 0..total {
        let mut rem = flat;
        let j = (rem / layer) as i64;
        rem %= layer;
        for k in (0..dm1).rev() {
            idx[k] = (rem % m_h_all) as i64 - grid.n_h;
            rem /= m_h_all;
        }
        idx[dm1] = j;
        nodal[flat] = match indexing.id_of(&idx) {
            Some(id) => x[id],
            None => bc_value(&idx),
        };
    }

    Ok(Solution {
        field: DiscreteField {
            dim,
            h,
            n_h: grid.n_h,
            j_min: 0,
            j_max: grid.n_v,
            values: nodal,
            masked_to_upper: true,
        },
        iterations,
        residual,
    })
}

/// Jacobi-preconditioned conjugate gradients; relative residual target.
fn cg_jacobi(a: &Csr, b: &[f64], tol_rel: f64) -> Result<(Vec<f64>, usize, f64)> {
    let n = b.len();
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], 0, 0.0));
    }
    let mut diag = vec![0.0; n];
    for (r, d) in diag.iter_mut().enumerate() {
        let v = a.diagonal(r);
        if v <= 0.0 {
            return Err(Error::conditioning(format!(
                "non-positive diagonal {v:.3e} at row {r}: system is not SPD"
            )));
        }
        *d = v;
    }
    let mut x = vec![0.0; n];
    let mut r: Vec<f64> = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(ri, di)| ri / di).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];
    let max_iter = 200 + 60 * (n as f64).sqrt() as usize;
    for it in 0..max_iter {
        a.matvec(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            return Err(Error::conditioning(format!(
                "indefinite direction in CG at iteration {it} (pAp = {pap:.3e})"
            )));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rnorm <= tol_rel * bnorm {
            return Ok((x, it + 1, rnorm / bnorm));
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::convergence(format!(
        "conjugate gradients did not reach {tol_rel:.1e} in {max_iter} iterations"
    )))
}

/// Grid function on `[-L, L]^{d-1} x [j_min h, j_max h]` with multilinear
/// interpolation; gradients interpolate nodal central differences, which
/// keeps them second-order accurate away from kinks.
pub struct DiscreteField {
    pub dim: usize,
    pub h: f64,
    pub n_h: i64,
    pub j_min: i64,
    pub j_max: i64,
    values: Vec<f64>,
    masked_to_upper: bool,
}

impl DiscreteField {
    fn layer_size(&self) -> usize {
        ((2 * self.n_h + 1) as usize).pow(self.dim as u32 - 1)
    }

    fn flat_index(&self, idx: &[i64]) -> usize {
        let dm1 = self.dim - 1;
        let m = (2 * self.n_h + 1) as usize;
        let mut flat = (idx[dm1] - self.j_min) as usize;
        for k in 0..dm1 {
            flat = flat * m + (idx[k] + self.n_h) as usize;
        }
        flat
    }

    pub fn node_value(&self, idx: &[i64]) -> f64 {
        self.values[self.flat_index(idx)]
    }

    /// Flat little-endian dump: magic `DFLD`, `dim: u32`, `n_h: i64`,
    /// `j_min: i64`, `j_max: i64`, `h: f64`, then the nodal values in
    /// storage order (vertical layer slowest).
    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(44 + 8 * self.values.len());
        out.extend_from_slice(b"DFLD");
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&self.n_h.to_le_bytes());
        out.extend_from_slice(&self.j_min.to_le_bytes());
        out.extend_from_slice(&self.j_max.to_le_bytes());
        out.extend_from_slice(&self.h.to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    fn in_node_range(&self, idx: &[i64]) -> bool {
        let dm1 = self.dim - 1;
        idx[..dm1].iter().all(|&i| i.abs() <= self.n_h)
            && idx[dm1] >= self.j_min
            && idx[dm1] <= self.j_max
    }

    /// Gradient at a node by central differences (one-sided second-order
    /// stencils on the box faces).
    pub fn nodal_gradient(&self, idx: &[i64]) -> Vec<f64> {
        let d = self.dim;
        let mut g = vec![0.0; d];
        for k in 0..d {
            let lo_ok = {
                let mut n = idx.to_vec();
                n[k] -= 1;
                self.in_node_range(&n)
            };
            let hi_ok = {
                let mut n = idx.to_vec();
                n[k] += 1;
                self.in_node_range(&n)
            };
            let at = |delta: i64| {
                let mut n = idx.to_vec();
                n[k] += delta;
                self.node_value(&n)
            };
            g[k] = if lo_ok && hi_ok {
                (at(1) - at(-1)) / (2.0 * self.h)
            } else if hi_ok {
                (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * self.h)
            } else {
                (3.0 * at(0) - 4.0 * at(-1) + at(-2)) / (2.0 * self.h)
            };
        }
        g
    }

    /// Lower cell corner and barycentric weights for a point; None outside.
    fn locate(&self, point: &[f64]) -> Option<(Vec<i64>, Vec<f64>)> {
        let d = self.dim;
        let mut corner = vec![0i64; d];
        let mut frac = vec![0.0; d];
        for k in 0..d {
            let (lo, hi) = if k + 1 == d {
                (self.j_min, self.j_max)
            } else {
                (-self.n_h, self.n_h)
            };
            let t = point[k] / self.h;
            let mut c = t.floor() as i64;
            if c < lo {
                return None;
            }
            if c >= hi {
                if t <= hi as f64 + 1e-12 {
                    c = hi - 1;
                } else {
                    return None;
                }
            }
            corner[k] = c;
            frac[k] = (t - c as f64).clamp(0.0, 1.0);
        }
        Some((corner, frac))
    }

    fn interpolate<G: Fn(&[i64]) -> f64>(&self, corner: &[i64], frac: &[f64], get: G) -> f64 {
        let d = self.dim;
        let mut sum = 0.0;
        for a in 0..(1usize << d) {
            let mut w = 1.0;
            let mut node = corner.to_vec();
            for k in 0..d {
                if (a >> k) & 1 == 1 {
                    w *= frac[k];
                    node[k] += 1;
                } else {
                    w *= 1.0 - frac[k];
                }
            }
            if w != 0.0 {
                sum += w * get(&node);
            }
        }
        sum
    }
}

impl Field for DiscreteField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, point: &[f64]) -> f64 {
        match self.locate(point) {
            Some((corner, frac)) => self.interpolate(&corner, &frac, |n| self.node_value(n)),
            None => 0.0,
        }
    }

    fn gradient(&self, point: &[f64]) -> Vec<f64> {
        match self.locate(point) {
            Some((corner, frac)) => (0..self.dim)
                .map(|k| self.interpolate(&corner, &frac, |n| self.nodal_gradient(n)[k]))
                .collect(),
            None => vec![0.0; self.dim],
        }
    }

    fn inside(&self, point: &[f64]) -> bool {
        let d = self.dim;
        if self.masked_to_upper && point[d - 1] <= 0.0 {
            return false;
        }
        self.locate(point).is_some()
    }

    fn hull_radius(&self) -> f64 {
        let horiz = self.n_h as f64 * self.h;
        let vert_lo = if self.masked_to_upper {
            f64::INFINITY
        } else {
            -self.j_min as f64 * self.h
        };
        let vert_hi = self.j_max as f64 * self.h;
        (horiz.min(vert_hi).min(vert_lo) - 2.0 * self.h).max(0.0)
    }
}

/// Odd reflection of a zero-bottom half-box field across `{s = 0}`.
///
/// Fails if the bottom row is not numerically zero; the reflected field
/// satisfies the extended equation with the sign-flipped coefficient, so
/// its interface residual vanishes identically.
pub fn extend_odd(field: &DiscreteField) -> Result<DiscreteField> {
    if field.j_min != 0 {
        return Err(Error::domain("extend_odd expects a field with bottom at s = 0"));
    }
    let scale = field.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let layer = field.layer_size();
    for flat in 0..layer {
        let v = field.values[flat];
        if v.abs() > 1e-12 * scale.max(1e-300) {
            return Err(Error::contract(format!(
                "bottom row is not zero (found {v:.3e}); odd extension is invalid"
            )));
        }
    }
    let j_max = field.j_max;
    let mut values = vec![0.0; layer * (2 * j_max as usize + 1)];
    for j in -j_max..=j_max {
        let src_j = j.abs();
        let sign = if j < 0 { -1.0 } else { 1.0 };
        let dst_base = ((j + j_max) as usize) * layer;
        let src_base = (src_j as usize) * layer;
        for off in 0..layer {
            values[dst_base + off] = sign * field.values[src_base + off];
        }
    }
    Ok(DiscreteField {
        dim: field.dim,
        h: field.h,
        n_h: field.n_h,
        j_min: -j_max,
        j_max,
        values,
        masked_to_upper: false,
    })
}

/// Weak residual `int A grad u . grad zeta` over the support of a smooth
/// bump `zeta` centered at `center` with radius `radius`, by midpoint
/// quadrature on an `n_sub^d` subgrid. Near zero (up to discretization
/// error) when `u` solves the equation weakly across the region.
pub fn weak_residual(
    field: &dyn Field,
    coeff: &dyn Fn(&[f64]) -> Mat,
    center: &[f64],
    radius: f64,
    n_sub: usize,
) -> f64 {
    let d = field.dim();
    let hq = 2.0 * radius / n_sub as f64;
    let mut sum = 0.0;
    let mut idx = vec![0usize; d];
    loop {
        let point: Vec<f64> = (0..d)
            .map(|k| center[k] - radius + (idx[k] as f64 + 0.5) * hq)
            .collect();
        let r2: f64 = point
            .iter()
            .zip(center)
            .map(|(p, c)| (p - c) * (p - c))
            .sum::<f64>()
            / (radius * radius);
        if r2 < 1.0 {
            // zeta = (1 - r^2)^2, grad zeta = -4 (1 - r^2) (x - c) / R^2.
            let gu = field.gradient(&point);
            let a = coeff(&point);
            let agu = a.matvec(&gu);
            let gz: Vec<f64> = point
                .iter()
                .zip(center)
                .map(|(p, c)| -4.0 * (1.0 - r2) * (p - c) / (radius * radius))
                .collect();
            let dotv: f64 = agu.iter().zip(&gz).map(|(x, y)| x * y).sum();
            sum += dotv * hq.powi(d as i32);
        }
        let mut k = d;
        loop {
            if k == 0 {
                return sum;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < n_sub {
                break;
            }
            idx[k] = 0;
        }
    }
}
