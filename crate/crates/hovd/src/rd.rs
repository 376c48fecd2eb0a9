//! Nonlinear reaction–diffusion on the unit square,
//! `−∇·(eᵐ∇u) + u³ = ρ` with homogeneous Neumann conditions, observed
//! through its boundary trace.
//!
//! Nodes sit on an `n × n` grid with spacing `h = 1/(n−1)`, node index
//! `iy·n + ix`. The 5-point stencil with ghost-node reflection is written in
//! its symmetric (control-volume) form: row `i` carries the cell weight
//! `h² wᵢ` with `wᵢ = 1, ½, ¼` for interior, edge and corner nodes, and each
//! grid edge has conductance `c_e · exp((m_i + m_j)/2)` with `c_e = ½` along
//! the boundary and `1` inside.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::error::{HovdError, Result};
use crate::model::{ImplicitModel, StateSolver, Var};

/// Variance parameter of the source bump, `2·0.2²`.
const SOURCE_WIDTH: f64 = 2.0 * 0.2 * 0.2;

#[derive(Debug, Clone)]
struct Edge {
    i: usize,
    j: usize,
    c: f64,
}

#[derive(Debug, Clone)]
pub struct ReactionDiffusion {
    n: usize,
    h: f64,
    edges: Vec<Edge>,
    /// `h² wᵢ`
    mass: Vec<f64>,
    rho: Vec<f64>,
    boundary: Vec<usize>,
}

impl ReactionDiffusion {
    /// Model on an `n × n` grid with `ρ(c) = exp(‖c − (½,½)‖² / (2·0.2²))`.
    pub fn new(n: usize) -> Result<Self> {
        Self::with_source(n, |x, y| {
            let r2 = (x - 0.5).powi(2) + (y - 0.5).powi(2);
            (r2 / SOURCE_WIDTH).exp()
        })
    }

    pub fn with_source(n: usize, rho: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if n < 4 {
            return Err(HovdError::Config(format!("grid needs at least 4 nodes per side, got {n}")));
        }
        let h = 1.0 / (n - 1) as f64;
        let idx = |ix: usize, iy: usize| iy * n + ix;
        let on_edge = |k: usize| k == 0 || k == n - 1;
        let mut edges = Vec::with_capacity(2 * n * (n - 1));
        for iy in 0..n {
            for ix in 0..n {
                if ix + 1 < n {
                    let c = if on_edge(iy) { 0.5 } else { 1.0 };
                    edges.push(Edge { i: idx(ix, iy), j: idx(ix + 1, iy), c });
                }
                if iy + 1 < n {
                    let c = if on_edge(ix) { 0.5 } else { 1.0 };
                    edges.push(Edge { i: idx(ix, iy), j: idx(ix, iy + 1), c });
                }
            }
        }
        let mut mass = vec![0.0; n * n];
        let mut source = vec![0.0; n * n];
        for iy in 0..n {
            for ix in 0..n {
                let w = match (on_edge(ix), on_edge(iy)) {
                    (true, true) => 0.25,
                    (true, false) | (false, true) => 0.5,
                    (false, false) => 1.0,
                };
                mass[idx(ix, iy)] = h * h * w;
                source[idx(ix, iy)] = rho(ix as f64 * h, iy as f64 * h);
            }
        }
        let mut boundary = Vec::with_capacity(4 * (n - 1));
        boundary.extend((0..n - 1).map(|ix| idx(ix, 0)));
        boundary.extend((0..n - 1).map(|iy| idx(n - 1, iy)));
        boundary.extend((1..n).rev().map(|ix| idx(ix, n - 1)));
        boundary.extend((1..n).rev().map(|iy| idx(0, iy)));
        Ok(Self {
            n,
            h,
            edges,
            mass,
            rho: source,
            boundary,
        })
    }

    pub fn grid_size(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn source(&self) -> &[f64] {
        &self.rho
    }

    /// Lumped mass `h² wᵢ`.
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// Boundary nodes, counter-clockwise from the origin.
    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary
    }

    fn edge_coefficient(&self, e: &Edge, m: &[f64], m_dirs: &[&[f64]]) -> f64 {
        let mut c = e.c * (0.5 * (m[e.i] + m[e.j])).exp();
        for p in m_dirs {
            c *= 0.5 * (p[e.i] + p[e.j]);
        }
        c
    }

    /// `Σ_e coef_e (x_i − x_j)` scattered to both endpoints.
    fn diffusion(&self, m: &[f64], m_dirs: &[&[f64]], x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        for e in &self.edges {
            let flux = self.edge_coefficient(e, m, m_dirs) * (x[e.i] - x[e.j]);
            out[e.i] += flux;
            out[e.j] -= flux;
        }
        out
    }

    /// Gradient in the free parameter direction of `wᵀ diffusion(m, m_dirs ∪ {·}, x)`.
    fn diffusion_param_adjoint(&self, m: &[f64], m_dirs: &[&[f64]], x: &[f64], w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; m.len()];
        for e in &self.edges {
            let t = self.edge_coefficient(e, m, m_dirs) * (w[e.i] - w[e.j]) * (x[e.i] - x[e.j]);
            out[e.i] += 0.5 * t;
            out[e.j] += 0.5 * t;
        }
        out
    }

    /// `h² wᵢ · ∂ᵇ(u³)/∂uᵇ [v₁ … v_b]`, `None` for `b ≥ 4`.
    fn reaction(&self, u: &[f64], u_dirs: &[&[f64]], include_source: bool) -> Option<Vec<f64>> {
        let n = u.len();
        let f: Box<dyn Fn(usize) -> f64> = match u_dirs {
            [] => Box::new(|i| {
                let s = if include_source { self.rho[i] } else { 0.0 };
                u[i].powi(3) - s
            }),
            [a] => Box::new(|i| 3.0 * u[i] * u[i] * a[i]),
            [a, b] => Box::new(|i| 6.0 * u[i] * a[i] * b[i]),
            [a, b, c] => Box::new(|i| 6.0 * a[i] * b[i] * c[i]),
            _ => return None,
        };
        Some((0..n).map(|i| self.mass[i] * f(i)).collect())
    }

    /// The weighted graph Laplacian at `m = 0` plus the lumped mass.
    pub fn shifted_laplacian(&self) -> Vec<(usize, usize, f64)> {
        let zero = vec![0.0; self.n * self.n];
        let mut t = self.laplacian_triplets(&zero);
        t.extend(self.mass.iter().enumerate().map(|(i, &w)| (i, i, w)));
        t
    }

    fn laplacian_triplets(&self, m: &[f64]) -> Vec<(usize, usize, f64)> {
        let mut t = Vec::with_capacity(4 * self.edges.len());
        for e in &self.edges {
            let c = self.edge_coefficient(e, m, &[]);
            t.push((e.i, e.i, c));
            t.push((e.j, e.j, c));
            t.push((e.i, e.j, -c));
            t.push((e.j, e.i, -c));
        }
        t
    }
}

fn add(a: Option<Vec<f64>>, b: Option<Vec<f64>>) -> Option<Vec<f64>> {
    match (a, b) {
        (Some(mut x), Some(y)) => {
            for (p, q) in x.iter_mut().zip(&y) {
                *p += q;
            }
            Some(x)
        }
        (x, None) => x,
        (None, y) => y,
    }
}

impl ImplicitModel for ReactionDiffusion {
    fn param_dim(&self) -> usize {
        self.n * self.n
    }

    fn state_dim(&self) -> usize {
        self.n * self.n
    }

    fn output_dim(&self) -> usize {
        self.boundary.len()
    }

    fn residual(&self, m: &[f64], u: &[f64]) -> Vec<f64> {
        add(Some(self.diffusion(m, &[], u)), self.reaction(u, &[], true)).unwrap()
    }

    fn output(&self, _m: &[f64], u: &[f64]) -> Vec<f64> {
        self.boundary.iter().map(|&i| self.h * u[i]).collect()
    }

    fn residual_partial(&self, m: &[f64], u: &[f64], m_dirs: &[&[f64]], u_dirs: &[&[f64]]) -> Option<Vec<f64>> {
        let diffusion = match u_dirs {
            [] => Some(self.diffusion(m, m_dirs, u)),
            [v] => Some(self.diffusion(m, m_dirs, v)),
            _ => None,
        };
        let reaction = if m_dirs.is_empty() {
            self.reaction(u, u_dirs, true)
        } else {
            None
        };
        add(diffusion, reaction)
    }

    fn residual_partial_adjoint(
        &self,
        m: &[f64],
        u: &[f64],
        m_dirs: &[&[f64]],
        u_dirs: &[&[f64]],
        w: &[f64],
        free: Var,
    ) -> Option<Vec<f64>> {
        match free {
            Var::U => {
                let diffusion = u_dirs.is_empty().then(|| self.diffusion(m, m_dirs, w));
                let reaction = if m_dirs.is_empty() && u_dirs.len() < 3 {
                    let mut dirs = u_dirs.to_vec();
                    dirs.push(w);
                    self.reaction(u, &dirs, false)
                } else {
                    None
                };
                add(diffusion, reaction)
            }
            Var::M => match u_dirs {
                [] => Some(self.diffusion_param_adjoint(m, m_dirs, u, w)),
                [v] => Some(self.diffusion_param_adjoint(m, m_dirs, v, w)),
                _ => None,
            },
        }
    }

    fn output_partial(&self, m: &[f64], u: &[f64], m_dirs: &[&[f64]], u_dirs: &[&[f64]]) -> Option<Vec<f64>> {
        if !m_dirs.is_empty() {
            return None;
        }
        match u_dirs {
            [] => Some(self.output(m, u)),
            [v] => Some(self.output(m, v)),
            _ => None,
        }
    }

    fn output_partial_adjoint(
        &self,
        _m: &[f64],
        u: &[f64],
        m_dirs: &[&[f64]],
        u_dirs: &[&[f64]],
        w: &[f64],
        free: Var,
    ) -> Option<Vec<f64>> {
        if free == Var::M || !m_dirs.is_empty() || !u_dirs.is_empty() {
            return None;
        }
        let mut out = vec![0.0; u.len()];
        for (&i, &q) in self.boundary.iter().zip(w) {
            out[i] += self.h * q;
        }
        Some(out)
    }

    fn factorize_state_jacobian(&self, m: &[f64], u: &[f64]) -> Result<Box<dyn StateSolver>> {
        let mut t = self.laplacian_triplets(m);
        t.extend((0..u.len()).map(|i| (i, i, 3.0 * self.mass[i] * u[i] * u[i])));
        Ok(Box::new(SparseLu::new(self.state_dim(), &t)?))
    }

    fn initial_state(&self, _m: &[f64]) -> Vec<f64> {
        self.rho.iter().map(|r| r.cbrt()).collect()
    }
}

/// Sparse LU of a square matrix given as (row, col, value) triplets;
/// duplicates are summed.
pub struct SparseLu {
    n: usize,
    lu: Lu<usize, f64>,
}

impl SparseLu {
    pub fn new(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let t: Vec<Triplet<usize, usize, f64>> = triplets.iter().map(|&(r, c, v)| Triplet::new(r, c, v)).collect();
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &t)
            .map_err(|e| HovdError::Singular(format!("{e:?}")))?;
        let lu = a.sp_lu().map_err(|e| HovdError::Singular(format!("{e:?}")))?;
        Ok(Self { n, lu })
    }

    fn run(&self, rhs: &[f64], transpose: bool) -> Result<Vec<f64>> {
        if rhs.len() != self.n {
            return Err(HovdError::ShapeMismatch(format!(
                "right-hand side has length {}, expected {}",
                rhs.len(),
                self.n
            )));
        }
        let mut x = Mat::from_fn(self.n, 1, |i, _| rhs[i]);
        if transpose {
            self.lu.solve_transpose_in_place(x.as_mut());
        } else {
            self.lu.solve_in_place(x.as_mut());
        }
        let out: Vec<f64> = (0..self.n).map(|i| x[(i, 0)]).collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(HovdError::Singular("solve produced non-finite values".into()));
        }
        Ok(out)
    }
}

impl StateSolver for SparseLu {
    fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.run(rhs, false)
    }

    fn solve_transpose(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.run(rhs, true)
    }
}

/// `W = h (K₀ + M)⁻¹`, a discrete `(−Δ + I)⁻¹` acting on white noise.
pub struct Whitening {
    scale: f64,
    lu: SparseLu,
}

impl Whitening {
    pub fn new(model: &ReactionDiffusion) -> Result<Self> {
        Ok(Self {
            scale: model.spacing(),
            lu: SparseLu::new(model.param_dim(), &model.shifted_laplacian())?,
        })
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut p = self.lu.solve(x)?;
        for v in &mut p {
            *v *= self.scale;
        }
        Ok(p)
    }
}
