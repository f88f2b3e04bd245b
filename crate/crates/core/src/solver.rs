//! Two-layer Fourier × Chebyshev collocation for `-div(σ∇u) = 1`.
//!
//! Unknowns are nodal values of the pulled-back field on the inner layer
//! (a symmetric diameter grid, so the polar center needs no special
//! treatment) followed by the annulus layer. Rows are, in the same order:
//! continuity at the interface, the scaled PDE inside the inclusion, the
//! conormal flux balance at the interface, the scaled PDE in the annulus
//! and the Dirichlet condition on the outer boundary.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use faer::linalg::solvers::PartialPivLu;
use faer::prelude::*;
use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::chebyshev::{fourier_d1, fourier_d2, DiameterGrid, UnitIntervalGrid};
use crate::error::{Error, Result};
use crate::fourier::{uniform_angles, AngularField};
use crate::geometry::{reference_map, GeometrySpec, Layer, MapDerivs, RayData, ReferenceMap};

/// Largest admissible fraction of `∂ₙu` energy in the top third of the modes
/// beyond the bandwidth of the geometry.
pub const TAIL_ENERGY_LIMIT: f64 = 1e-8;

/// Relative criticality defect above which a base is rejected.
pub const CRITICALITY_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conductivity {
    pub sigma_c: f64,
    pub s: f64,
}

impl Conductivity {
    pub fn new(sigma_c: f64, s: f64) -> Result<Self> {
        let c = Self { sigma_c, s };
        c.validate()?;
        Ok(c)
    }

    pub fn one_phase() -> Self {
        Self { sigma_c: 1.0, s: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.sigma_c.is_finite() || !self.s.is_finite() || self.sigma_c <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "conductivity must be finite with sigma_c > 0 (got {}, {})",
                self.sigma_c, self.s
            )));
        }
        if self.inclusion() <= 0.0 {
            return Err(Error::EllipticityLoss {
                sigma: self.inclusion(),
            });
        }
        Ok(())
    }

    /// Conductivity inside the inclusion, `σ_c + s`.
    pub fn inclusion(&self) -> f64 {
        self.sigma_c + self.s
    }

    pub fn with_shift(&self, s: f64) -> Result<Self> {
        Self::new(self.sigma_c, s)
    }

    pub fn layer(&self, layer: Layer) -> f64 {
        match layer {
            Layer::Inner => self.inclusion(),
            Layer::Annulus => 1.0,
        }
    }
}

/// Angular modes `K` and radial collocation points per layer.
///
/// The angular grid has `2K + 2` nodes; the inner layer stores the positive
/// half of a symmetric diameter grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Resolution {
    pub modes: usize,
    pub annulus_nodes: usize,
    pub inner_nodes: usize,
}

impl Default for Resolution {
    fn default() -> Self {
        Self::with_modes(32)
    }
}

impl Resolution {
    /// Radial counts large enough to carry `r^K` in both layers.
    pub fn with_modes(modes: usize) -> Self {
        Self {
            modes,
            annulus_nodes: (modes + 4).max(20),
            inner_nodes: (modes / 2 + 3).max(8),
        }
    }

    pub fn angular_nodes(&self) -> usize {
        2 * self.modes + 2
    }

    pub fn unknowns(&self) -> usize {
        (self.annulus_nodes + self.inner_nodes) * self.angular_nodes()
    }

    pub fn validate(&self) -> Result<()> {
        if self.modes < 2 || self.annulus_nodes < 4 || self.inner_nodes < 3 {
            return Err(Error::ResolutionTooLow(format!(
                "need K >= 2, at least 4 annulus and 3 inner nodes (got {self:?})"
            )));
        }
        Ok(())
    }
}

/// Per-resolution differentiation matrices.
#[derive(Clone)]
struct Grid {
    m: usize,
    fd1: Mat<f64>,
    fd2: Mat<f64>,
    ann: UnitIntervalGrid,
    inn: DiameterGrid,
}

impl Grid {
    fn new(res: &Resolution) -> Self {
        let m = res.angular_nodes();
        Self {
            m,
            fd1: fourier_d1(m),
            fd2: fourier_d2(m),
            ann: UnitIntervalGrid::new(res.annulus_nodes),
            inn: DiameterGrid::new(res.inner_nodes),
        }
    }

    fn mirror(&self, j: usize) -> usize {
        (j + self.m / 2) % self.m
    }

    fn inner_len(&self) -> usize {
        self.inn.len() * self.m
    }

    fn total(&self) -> usize {
        (self.inn.len() + self.ann.len()) * self.m
    }

    fn rows(&self, layer: Layer) -> usize {
        match layer {
            Layer::Inner => self.inn.len(),
            Layer::Annulus => self.ann.len(),
        }
    }

    fn t(&self, layer: Layer, i: usize) -> f64 {
        match layer {
            Layer::Inner => self.inn.nodes[i],
            Layer::Annulus => self.ann.nodes[i],
        }
    }

    fn offset(&self, layer: Layer) -> usize {
        match layer {
            Layer::Inner => 0,
            Layer::Annulus => self.inner_len(),
        }
    }
}

/// Coefficients of `P² Δ` in reference coordinates.
struct PdeCoeffs {
    tt: f64,
    t: f64,
    tth: f64,
}

fn pde_coeffs(d: &MapDerivs) -> PdeCoeffs {
    let pt2 = d.p_t * d.p_t;
    let a = d.p_th / d.p_t;
    let a_t = (d.p_tth * d.p_t - d.p_th * d.p_tt) / pt2;
    let a_th = (d.p_thth * d.p_t - d.p_th * d.p_tth) / pt2;
    PdeCoeffs {
        tt: d.p * d.p / pt2 + a * a,
        t: -d.p * d.p * d.p_tt / (pt2 * d.p_t) + d.p / d.p_t + a * a_t - a_th,
        tth: -2.0 * a,
    }
}

/// Reference-coordinate derivatives of a layer field, row-major `(i, j)`.
struct RawDerivs {
    v_t: Mat<f64>,
    v_tt: Mat<f64>,
    v_th: Mat<f64>,
    v_thth: Mat<f64>,
    v_tth: Mat<f64>,
}

/// Polar derivatives at one node: `u_ϱ`, `∂_θ u`, and the Hessian in the
/// orthonormal frame `(e_ϱ, e_θ)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct PolarDerivs {
    pub u_r: f64,
    pub u_th: f64,
    pub h_rr: f64,
    pub h_rth: f64,
    pub h_thth: f64,
}

fn polar_derivs(d: &MapDerivs, v_t: f64, v_tt: f64, v_th: f64, v_thth: f64, v_tth: f64) -> PolarDerivs {
    let pt2 = d.p_t * d.p_t;
    let a = d.p_th / d.p_t;
    let a_t = (d.p_tth * d.p_t - d.p_th * d.p_tt) / pt2;
    let a_th = (d.p_thth * d.p_t - d.p_th * d.p_tth) / pt2;
    let u_r = v_t / d.p_t;
    let u_th = v_th - a * v_t;
    let u_rr = v_tt / pt2 - d.p_tt * v_t / (pt2 * d.p_t);
    let u_rth = (v_tth - a_t * v_t - a * v_tt) / d.p_t;
    let u_thth = v_thth - 2.0 * a * v_tth + a * a * v_tt + (a * a_t - a_th) * v_t;
    let rho = d.p;
    PolarDerivs {
        u_r,
        u_th,
        h_rr: u_rr,
        h_rth: u_rth / rho - u_th / (rho * rho),
        h_thth: u_thth / (rho * rho) + u_r / rho,
    }
}

/// Outer-boundary data of a field at the `M` angular nodes.
#[derive(Debug, Clone)]
pub struct BoundaryTrace {
    pub derivs: Vec<PolarDerivs>,
    /// `R(θ_j)`.
    pub radius: Vec<f64>,
    /// `R'(θ_j)`.
    pub radius_d: Vec<f64>,
    /// Signed normal derivative `∇u·n`.
    pub dn: Vec<f64>,
    /// `nᵀ D²u n`.
    pub dnn: Vec<f64>,
}

impl BoundaryTrace {
    /// `n·e_ϱ = R / √(R² + R'²)` at each node.
    pub fn normal_radial(&self) -> Vec<f64> {
        self.radius
            .iter()
            .zip(&self.radius_d)
            .map(|(r, d)| r / r.hypot(*d))
            .collect()
    }

    /// `∇u·∇w` at the boundary nodes.
    pub fn dot_gradient(&self, other: &BoundaryTrace) -> Vec<f64> {
        self.derivs
            .iter()
            .zip(&other.derivs)
            .zip(&self.radius)
            .map(|((a, b), r)| a.u_r * b.u_r + a.u_th * b.u_th / (r * r))
            .collect()
    }
}

/// Assembled and factorized collocation operator for one `(geometry,
/// conductivity, resolution)` triple. Immutable; shared through [`Arc`].
pub struct TransmissionSystem {
    geom: GeometrySpec,
    cond: Conductivity,
    res: Resolution,
    grid: Grid,
    rays: Vec<RayData>,
    /// Map derivatives per node, in unknown order.
    maps: Vec<MapDerivs>,
    area_weights: Vec<f64>,
    lu: PartialPivLu<f64>,
}

impl fmt::Debug for TransmissionSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TransmissionSystem")
            .field("geom", &self.geom)
            .field("cond", &self.cond)
            .field("res", &self.res)
            .field("unknowns", &self.grid.total())
            .finish()
    }
}

impl TransmissionSystem {
    /// Assembles and factorizes; also returns the unfactorized matrix.
    fn assemble(geom: &GeometrySpec, cond: &Conductivity, res: &Resolution) -> Result<(Self, Mat<f64>)> {
        cond.validate()?;
        res.validate()?;
        let m = res.angular_nodes();
        if m < 2 * geom.order() + 1 {
            return Err(Error::ResolutionTooLow(format!(
                "{m} angular nodes cannot carry geometry of order {}",
                geom.order()
            )));
        }
        let map = reference_map(geom)?;
        let grid = Grid::new(res);
        let rays = map.rays(m);
        let total = grid.total();

        let mut maps = Vec::with_capacity(total);
        let mut area_weights = Vec::with_capacity(total);
        let h = 2.0 * PI / m as f64;
        for layer in [Layer::Inner, Layer::Annulus] {
            for i in 0..grid.rows(layer) {
                let t = grid.t(layer, i);
                let w = match layer {
                    Layer::Inner => grid.inn.half_weights[i],
                    Layer::Annulus => grid.ann.weights[i],
                };
                for ray in &rays {
                    let d = ReferenceMap::derivs(layer, t, ray);
                    area_weights.push(w * h * d.p * d.p_t);
                    maps.push(d);
                }
            }
        }

        let mut a = Mat::<f64>::zeros(total, total);
        let n_in = grid.inn.len();
        let n_out = grid.ann.len();
        let off = grid.inner_len();
        let (fd1, fd2) = (&grid.fd1, &grid.fd2);
        let inn = &grid.inn;
        let ann = &grid.ann;

        for i in 0..n_in {
            for j in 0..m {
                let row = i * m + j;
                if i == 0 {
                    a[(row, row)] = 1.0;
                    a[(row, off + j)] = -1.0;
                    continue;
                }
                let mj = grid.mirror(j);
                let c = pde_coeffs(&maps[row]);
                for l in 0..n_in {
                    a[(row, l * m + j)] += c.tt * inn.d2_pos[(i, l)] + c.t * inn.d1_pos[(i, l)];
                    a[(row, l * m + mj)] += c.tt * inn.d2_neg[(i, l)] + c.t * inn.d1_neg[(i, l)];
                    if c.tth != 0.0 {
                        let (dp, dn) = (c.tth * inn.d1_pos[(i, l)], c.tth * inn.d1_neg[(i, l)]);
                        for k in 0..m {
                            a[(row, l * m + k)] += dp * fd1[(j, k)] + dn * fd1[(mj, k)];
                        }
                    }
                }
                for k in 0..m {
                    a[(row, i * m + k)] += fd2[(j, k)];
                }
            }
        }

        let sigma_in = cond.inclusion();
        for i in 0..n_out {
            for j in 0..m {
                let row = off + i * m + j;
                if i == n_out - 1 {
                    a[(row, row)] = 1.0;
                    continue;
                }
                if i == 0 {
                    // σ_in F_in - F_out with F = α v_t - β v_θ
                    let ray = &rays[j];
                    let [r, r1, _] = ray.inclusion;
                    let beta = r1 / r;
                    let mj = grid.mirror(j);
                    let p_in = maps[j].p_t;
                    let p_out = maps[row].p_t;
                    let alpha_in = (r * r + r1 * r1) / (r * p_in);
                    let alpha_out = (r * r + r1 * r1) / (r * p_out);
                    for l in 0..n_in {
                        a[(row, l * m + j)] += sigma_in * alpha_in * inn.d1_pos[(0, l)];
                        a[(row, l * m + mj)] += sigma_in * alpha_in * inn.d1_neg[(0, l)];
                    }
                    for l in 0..n_out {
                        a[(row, off + l * m + j)] -= alpha_out * ann.d1[(0, l)];
                    }
                    for k in 0..m {
                        a[(row, k)] -= sigma_in * beta * fd1[(j, k)];
                        a[(row, off + k)] += beta * fd1[(j, k)];
                    }
                    continue;
                }
                let c = pde_coeffs(&maps[row]);
                for l in 0..n_out {
                    a[(row, off + l * m + j)] += c.tt * ann.d2[(i, l)] + c.t * ann.d1[(i, l)];
                    if c.tth != 0.0 {
                        let dl = c.tth * ann.d1[(i, l)];
                        for k in 0..m {
                            a[(row, off + l * m + k)] += dl * fd1[(j, k)];
                        }
                    }
                }
                for k in 0..m {
                    a[(row, off + i * m + k)] += fd2[(j, k)];
                }
            }
        }

        let lu = a.partial_piv_lu();
        let system = Self {
            geom: geom.clone(),
            cond: *cond,
            res: *res,
            grid,
            rays,
            maps,
            area_weights,
            lu,
        };
        Ok((system, a))
    }

    pub fn geometry(&self) -> &GeometrySpec {
        &self.geom
    }

    pub fn conductivity(&self) -> &Conductivity {
        &self.cond
    }

    pub fn resolution(&self) -> &Resolution {
        &self.res
    }

    pub fn unknowns(&self) -> usize {
        self.grid.total()
    }

    pub fn angular_nodes(&self) -> usize {
        self.grid.m
    }

    fn layer_of(&self, idx: usize) -> Layer {
        if idx < self.grid.inner_len() {
            Layer::Inner
        } else {
            Layer::Annulus
        }
    }

    /// Right-hand side of the state equation.
    fn state_rhs(&self) -> Mat<f64> {
        let m = self.grid.m;
        let n_out = self.grid.ann.len();
        let off = self.grid.inner_len();
        Mat::from_fn(self.grid.total(), 1, |idx, _| {
            let layer = self.layer_of(idx);
            let i = match layer {
                Layer::Inner => idx / m,
                Layer::Annulus => (idx - off) / m,
            };
            let interface = i == 0;
            let dirichlet = layer == Layer::Annulus && i == n_out - 1;
            if interface || dirichlet {
                0.0
            } else {
                let p = self.maps[idx].p;
                -p * p / self.cond.layer(layer)
            }
        })
    }

    fn solve_mat(&self, rhs: &Mat<f64>) -> Result<Mat<f64>> {
        let x = self.lu.solve(rhs);
        for j in 0..x.ncols() {
            for i in 0..x.nrows() {
                if !x[(i, j)].is_finite() {
                    return Err(Error::SingularSystem(
                        "collocation system produced non-finite values".into(),
                    ));
                }
            }
        }
        Ok(x)
    }

    /// Solves the homogeneous transmission problem for each column of
    /// outer Dirichlet data (each of length `M`).
    pub fn solve_dirichlet(&self, data: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let m = self.grid.m;
        let base = self.grid.inner_len() + (self.grid.ann.len() - 1) * m;
        let mut rhs = Mat::<f64>::zeros(self.grid.total(), data.len());
        for (col, d) in data.iter().enumerate() {
            if d.len() != m {
                return Err(Error::InvalidArgument(format!(
                    "Dirichlet data needs {m} nodal values, got {}",
                    d.len()
                )));
            }
            for j in 0..m {
                rhs[(base + j, col)] = d[j];
            }
        }
        let x = self.solve_mat(&rhs)?;
        Ok((0..data.len())
            .map(|c| (0..x.nrows()).map(|i| x[(i, c)]).collect())
            .collect())
    }

    fn layer_mat(&self, layer: Layer, values: &[f64]) -> Mat<f64> {
        let m = self.grid.m;
        let off = self.grid.offset(layer);
        Mat::from_fn(self.grid.rows(layer), m, |i, j| values[off + i * m + j])
    }

    fn raw_derivs(&self, layer: Layer, values: &[f64]) -> RawDerivs {
        let v = self.layer_mat(layer, values);
        let v_th = &v * self.grid.fd1.transpose();
        let v_thth = &v * self.grid.fd2.transpose();
        let dt = |w: &Mat<f64>, order: usize| -> Mat<f64> {
            match layer {
                Layer::Annulus => {
                    let d = if order == 1 { &self.grid.ann.d1 } else { &self.grid.ann.d2 };
                    d * w
                }
                Layer::Inner => {
                    let (dp, dn) = if order == 1 {
                        (&self.grid.inn.d1_pos, &self.grid.inn.d1_neg)
                    } else {
                        (&self.grid.inn.d2_pos, &self.grid.inn.d2_neg)
                    };
                    let shifted = Mat::from_fn(w.nrows(), w.ncols(), |l, j| w[(l, self.grid.mirror(j))]);
                    dp * w + dn * shifted
                }
            }
        };
        RawDerivs {
            v_t: dt(&v, 1),
            v_tt: dt(&v, 2),
            v_tth: dt(&v_th, 1),
            v_th,
            v_thth,
        }
    }

    /// Polar derivatives at every node, in unknown order.
    pub fn nodal_derivs(&self, values: &[f64]) -> Vec<PolarDerivs> {
        let m = self.grid.m;
        let mut out = Vec::with_capacity(self.grid.total());
        for layer in [Layer::Inner, Layer::Annulus] {
            let r = self.raw_derivs(layer, values);
            let off = self.grid.offset(layer);
            for i in 0..self.grid.rows(layer) {
                for j in 0..m {
                    out.push(polar_derivs(
                        &self.maps[off + i * m + j],
                        r.v_t[(i, j)],
                        r.v_tt[(i, j)],
                        r.v_th[(i, j)],
                        r.v_thth[(i, j)],
                        r.v_tth[(i, j)],
                    ));
                }
            }
        }
        out
    }

    /// Derivatives of a field on the outer boundary.
    pub fn boundary_trace(&self, values: &[f64]) -> BoundaryTrace {
        let m = self.grid.m;
        let r = self.raw_derivs(Layer::Annulus, values);
        let last = self.grid.ann.len() - 1;
        let off = self.grid.inner_len() + last * m;
        let mut trace = BoundaryTrace {
            derivs: Vec::with_capacity(m),
            radius: Vec::with_capacity(m),
            radius_d: Vec::with_capacity(m),
            dn: Vec::with_capacity(m),
            dnn: Vec::with_capacity(m),
        };
        for j in 0..m {
            let d = polar_derivs(
                &self.maps[off + j],
                r.v_t[(last, j)],
                r.v_tt[(last, j)],
                r.v_th[(last, j)],
                r.v_thth[(last, j)],
                r.v_tth[(last, j)],
            );
            let [big_r, big_r1, _] = self.rays[j].outer;
            let speed = big_r.hypot(big_r1);
            let (nr, nt) = (big_r / speed, -big_r1 / speed);
            trace.dn.push(nr * d.u_r + nt * d.u_th / big_r);
            trace
                .dnn
                .push(nr * nr * d.h_rr + 2.0 * nr * nt * d.h_rth + nt * nt * d.h_thth);
            trace.radius.push(big_r);
            trace.radius_d.push(big_r1);
            trace.derivs.push(d);
        }
        trace
    }

    /// Quadrature of nodal values over both layers (area element included).
    pub fn integrate(&self, nodal: &[f64]) -> f64 {
        nodal.iter().zip(&self.area_weights).map(|(v, w)| v * w).sum()
    }

    /// Conductivity at each node, in unknown order.
    pub fn conductivity_nodes(&self) -> Vec<f64> {
        (0..self.grid.total())
            .map(|idx| self.cond.layer(self.layer_of(idx)))
            .collect()
    }

    /// `∫ σ ∇a·∇b` by layer quadrature.
    pub fn energy_form(&self, a: &[f64], b: &[f64]) -> f64 {
        let da = self.nodal_derivs(a);
        let db = self.nodal_derivs(b);
        let sigma = self.conductivity_nodes();
        let integrand: Vec<f64> = (0..self.grid.total())
            .map(|idx| {
                let rho = self.maps[idx].p;
                sigma[idx] * (da[idx].u_r * db[idx].u_r + da[idx].u_th * db[idx].u_th / (rho * rho))
            })
            .collect();
        self.integrate(&integrand)
    }

    /// Reference and physical coordinates of every node, in unknown order.
    pub fn nodes(&self) -> Vec<NodePoint> {
        let m = self.grid.m;
        let angles = uniform_angles(m);
        let mut out = Vec::with_capacity(self.grid.total());
        for layer in [Layer::Inner, Layer::Annulus] {
            let off = self.grid.offset(layer);
            for i in 0..self.grid.rows(layer) {
                for (j, &theta) in angles.iter().enumerate() {
                    let p = self.maps[off + i * m + j].p;
                    out.push(NodePoint {
                        layer,
                        t: self.grid.t(layer, i),
                        theta,
                        radius: p,
                        position: [p * theta.cos(), p * theta.sin()],
                        boundary: layer == Layer::Annulus && i + 1 == self.grid.ann.len(),
                    });
                }
            }
        }
        out
    }

    /// Largest jumps of `u` and of `σ F` across the interface, where
    /// `F = r u_ϱ - (r'/r) ∂_θ u` is the unnormalized conormal derivative.
    pub fn interface_mismatch(&self, values: &[f64]) -> (f64, f64) {
        let m = self.grid.m;
        let off = self.grid.inner_len();
        let d = self.nodal_derivs(values);
        let sigma_in = self.cond.inclusion();
        let mut jump = 0.0_f64;
        let mut flux = 0.0_f64;
        for j in 0..m {
            jump = jump.max((values[j] - values[off + j]).abs());
            let [r, r1, _] = self.rays[j].inclusion;
            let f = |p: &PolarDerivs| r * p.u_r - r1 / r * p.u_th;
            flux = flux.max((sigma_in * f(&d[j]) - f(&d[off + j])).abs());
        }
        (jump, flux)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct NodePoint {
    pub layer: Layer,
    pub t: f64,
    pub theta: f64,
    pub radius: f64,
    pub position: [f64; 2],
    pub boundary: bool,
}

/// The state `u` pulled back to the reference layers, with boundary traces.
#[derive(Debug, Clone)]
pub struct PulledBackSolution {
    system: Arc<TransmissionSystem>,
    values: Vec<f64>,
    trace: BoundaryTrace,
    /// `∂ₙu` on the outer boundary, projected onto `K` modes.
    pub dn_u: AngularField,
    /// `∂²ₙₙu` on the outer boundary, projected onto `K` modes.
    pub dnn_u: AngularField,
    /// Mean of `|∂ₙu|` over the boundary nodes.
    pub c_base: f64,
    pub resolution: Resolution,
    pde_residual: f64,
}

impl PulledBackSolution {
    pub fn system(&self) -> &Arc<TransmissionSystem> {
        &self.system
    }

    pub fn geometry(&self) -> &GeometrySpec {
        &self.system.geom
    }

    pub fn conductivity(&self) -> &Conductivity {
        &self.system.cond
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn inner_values(&self) -> &[f64] {
        &self.values[..self.system.grid.inner_len()]
    }

    pub fn annulus_values(&self) -> &[f64] {
        &self.values[self.system.grid.inner_len()..]
    }

    pub fn trace(&self) -> &BoundaryTrace {
        &self.trace
    }

    /// Relative residual of the collocation equations.
    pub fn pde_residual(&self) -> f64 {
        self.pde_residual
    }

    /// `|∮ σ ∂ₙu ds + |Ω||`.
    pub fn flux_defect(&self) -> f64 {
        let m = self.trace.dn.len();
        let h = 2.0 * PI / m as f64;
        let flux: f64 = (0..m)
            .map(|j| self.trace.dn[j] * h * self.trace.radius[j].hypot(self.trace.radius_d[j]))
            .sum();
        (flux + self.geometry().area()).abs()
    }

    pub fn interface_mismatch(&self) -> (f64, f64) {
        self.system.interface_mismatch(&self.values)
    }

    /// `∫ σ |∇u|²`.
    pub fn dirichlet_energy(&self) -> f64 {
        self.system.energy_form(&self.values, &self.values)
    }
}

/// Solves `-div(σ∇u) = 1` in `Ω_ξ`, `u = 0` on `∂Ω_ξ`.
pub fn solve_state(geom: &GeometrySpec, cond: &Conductivity, res: &Resolution) -> Result<PulledBackSolution> {
    let (system, matrix) = TransmissionSystem::assemble(geom, cond, res)?;
    let rhs = system.state_rhs();
    let x = system.solve_mat(&rhs)?;
    let residual = &matrix * &x - &rhs;
    drop(matrix);
    let scale = (0..rhs.nrows()).map(|i| rhs[(i, 0)].abs()).fold(0.0, f64::max);
    let pde_residual = (0..residual.nrows())
        .map(|i| residual[(i, 0)].abs())
        .fold(0.0, f64::max)
        / scale.max(f64::MIN_POSITIVE);
    let values: Vec<f64> = (0..x.nrows()).map(|i| x[(i, 0)]).collect();
    let trace = system.boundary_trace(&values);
    let dn_u = AngularField::from_samples(&trace.dn, res.modes)?;
    let dnn_u = AngularField::from_samples(&trace.dnn, res.modes)?;
    // modes carried by the geometry itself are data, not under-resolution
    let cut = ((2 * res.modes) / 3).max(geom.xi().bandwidth()).max(geom.phi().bandwidth());
    let tail = dn_u.energy_fraction_above(cut);
    if tail > TAIL_ENERGY_LIMIT {
        return Err(Error::ResolutionTooLow(format!(
            "modes above {cut} carry {tail:.2e} of the normal-derivative energy"
        )));
    }
    let c_base = trace.dn.iter().map(|v| v.abs()).sum::<f64>() / trace.dn.len() as f64;
    Ok(PulledBackSolution {
        system: Arc::new(system),
        values,
        trace,
        dn_u,
        dnn_u,
        c_base,
        resolution: *res,
        pde_residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Criticality {
    pub c: f64,
    pub max_deviation: f64,
    pub relative_defect: f64,
}

/// Mean of `|∂ₙu|` and its largest deviation over the boundary nodes.
pub fn criticality(sol: &PulledBackSolution) -> Criticality {
    let c = sol.c_base;
    let max_deviation = sol
        .trace
        .dn
        .iter()
        .map(|v| (v.abs() - c).abs())
        .fold(0.0, f64::max);
    Criticality {
        c,
        max_deviation,
        relative_defect: max_deviation / c,
    }
}

/// The overdetermined constant of a critical base.
pub fn compute_c(sol: &PulledBackSolution) -> Result<f64> {
    let report = criticality(sol);
    if report.relative_defect > CRITICALITY_LIMIT {
        return Err(Error::NotCritical {
            c: report.c,
            relative_defect: report.relative_defect,
        });
    }
    Ok(report.c)
}
