//! Shape functional, overdetermined residual, Hadamard derivative, the
//! shape-derivative field `u'` and a finite-difference checker.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{uniform_angles, AngularField};
use crate::geometry::GeometrySpec;
use crate::solver::{solve_state, BoundaryTrace, Conductivity, PulledBackSolution, Resolution};

/// Parameter `λ = (φ, f, s)`, extended by `η ∈ span{cos θ, sin θ}` for the
/// projected problem at the one-phase disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub phi: AngularField,
    pub f: AngularField,
    pub s: f64,
    #[serde(default)]
    pub eta: [f64; 2],
}

impl ParamVector {
    pub fn zero() -> Self {
        Self {
            phi: AngularField::zeros(0),
            f: AngularField::zeros(0),
            s: 0.0,
            eta: [0.0, 0.0],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.phi.is_zero() && self.f.is_zero() && self.s == 0.0 && self.eta == [0.0, 0.0]
    }

    pub fn scaled(&self, t: f64) -> Self {
        Self {
            phi: self.phi.scaled(t),
            f: self.f.scaled(t),
            s: self.s * t,
            eta: [self.eta[0] * t, self.eta[1] * t],
        }
    }

    /// `η₁ cos θ + η₂ sin θ` as a field of the given order (at least 1).
    pub fn eta_field(&self, order: usize) -> AngularField {
        let mut e = AngularField::zeros(order.max(1));
        e.coeffs_mut()[1] = self.eta[0];
        e.coeffs_mut()[2] = self.eta[1];
        e
    }

    pub fn eta_norm(&self) -> f64 {
        self.eta[0].hypot(self.eta[1])
    }

    /// Geometry and conductivity at boundary correction `xi` (which must
    /// already include any `η` contribution).
    pub fn realize(&self, base_geom: &GeometrySpec, base_cond: &Conductivity, xi: &AngularField) -> Result<(GeometrySpec, Conductivity)> {
        let phi = add_fields(base_geom.phi(), &self.phi);
        let xi = add_fields(base_geom.xi(), xi);
        let geom = GeometrySpec::new(xi, phi, base_geom.rho())?;
        let cond = Conductivity::new(base_cond.sigma_c, base_cond.s + self.s)?;
        Ok((geom, cond))
    }
}

/// Sum of fields of possibly different orders.
pub fn add_fields(a: &AngularField, b: &AngularField) -> AngularField {
    let order = a.order().max(b.order());
    &a.resized(order) + &b.resized(order)
}

/// `J = ∫ σ|∇u|² - ∫ (c + f)²` from a state solution, with `f` extended as
/// a function of the polar angle.
pub fn functional_j_of(sol: &PulledBackSolution, f: &AngularField, c: f64) -> f64 {
    let cf = add_fields(&AngularField::constant(0, c), f);
    let r = sol.geometry().outer_radius();
    let cf2 = cf.product(&cf);
    let r2 = r.product(&r);
    sol.dirichlet_energy() - PI * cf2.mean_product(&r2)
}

pub fn functional_j(geom: &GeometrySpec, cond: &Conductivity, f: &AngularField, c: f64, res: &Resolution) -> Result<f64> {
    let sol = solve_state(geom, cond, res)?;
    Ok(functional_j_of(&sol, f, c))
}

/// `g = (∂ₙu)² - (c + f)²` at the reference angles, truncated to `K` modes.
pub fn residual_g(sol: &PulledBackSolution, f: &AngularField, c: f64) -> AngularField {
    let k = sol.resolution.modes;
    let cf = add_fields(&AngularField::constant(0, c), f).resized(k);
    let dn = &sol.dn_u;
    &dn.product(dn).resized(k) - &cf.product(&cf).resized(k)
}

/// `|∇u| - (c + f)` at the reference angles (diagnostic form of `g`).
pub fn residual_abs(sol: &PulledBackSolution, f: &AngularField, c: f64) -> Result<AngularField> {
    let m = sol.trace().dn.len();
    let cf = add_fields(&AngularField::constant(0, c), f).sample(m);
    let vals: Vec<f64> = sol.trace().dn.iter().zip(&cf).map(|(d, v)| d.abs() - v).collect();
    AngularField::from_samples(&vals, sol.resolution.modes)
}

/// `∮ g (V·n) ds` for the radial graph direction `V = δ e_ϱ`, where
/// `(V·n) ds = δ R dθ`.
pub fn hadamard_derivative(sol: &PulledBackSolution, f: &AngularField, c: f64, xi_dir: &AngularField) -> f64 {
    let g = residual_g(sol, f, c);
    let r = sol.geometry().outer_radius();
    2.0 * PI * g.product(xi_dir).mean_product(&r)
}

/// `∮ g ν ds` for a boundary field with normal component `ν` given at the
/// reference angles.
pub fn hadamard_derivative_normal(sol: &PulledBackSolution, f: &AngularField, c: f64, normal: &AngularField) -> f64 {
    let g = residual_g(sol, f, c);
    let r = sol.geometry().outer_radius();
    let order = g.order() + normal.order() + r.order();
    let m = 4 * order + 16;
    let (gv, nv, rv, dv) = (g.sample(m), normal.sample(m), r.sample(m), r.derivative().sample(m));
    let h = 2.0 * PI / m as f64;
    (0..m).map(|j| gv[j] * nv[j] * rv[j].hypot(dv[j]) * h).sum()
}

/// Shape derivative `u'` for a radial graph direction.
#[derive(Debug, Clone)]
pub struct ShapeDerivative {
    pub values: Vec<f64>,
    /// `∂ₙu'` on the outer boundary, projected onto `K` modes.
    pub dn: AngularField,
    pub trace: BoundaryTrace,
}

/// Dirichlet data `-∇u·V = -u_ϱ δ` of `u'` for `V = δ e_ϱ`, at the nodes.
fn shape_dirichlet_data(sol: &PulledBackSolution, dir: &AngularField) -> Vec<f64> {
    let m = sol.trace().derivs.len();
    let d = dir.sample(m);
    sol.trace().derivs.iter().zip(&d).map(|(p, v)| -p.u_r * v).collect()
}

/// Solves `-div(σ∇u') = 0`, `u' = -∇u·V` on `∂Ω` for each direction,
/// sharing the factorization of the state system.
pub fn solve_shape_derivatives(sol: &PulledBackSolution, dirs: &[AngularField]) -> Result<Vec<ShapeDerivative>> {
    let data: Vec<Vec<f64>> = dirs.iter().map(|d| shape_dirichlet_data(sol, d)).collect();
    let fields = sol.system().solve_dirichlet(&data)?;
    fields
        .into_iter()
        .map(|values| {
            let trace = sol.system().boundary_trace(&values);
            let dn = AngularField::from_samples(&trace.dn, sol.resolution.modes)?;
            Ok(ShapeDerivative { values, dn, trace })
        })
        .collect()
}

pub fn solve_shape_derivative(sol: &PulledBackSolution, xi: &AngularField) -> Result<ShapeDerivative> {
    Ok(solve_shape_derivatives(sol, std::slice::from_ref(xi))?.remove(0))
}

/// `∫ σ ∇u·∇u'`, which vanishes because `u ∈ H¹₀`.
pub fn energy_identity(sol: &PulledBackSolution, du: &ShapeDerivative) -> f64 {
    sol.system().energy_form(sol.values(), &du.values)
}

/// A perturbation of the outer boundary used by the finite-difference
/// checker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Perturbation {
    /// `R → R + h δ`.
    OuterGraph(AngularField),
    /// Boundary points move by `h (ν n + τ t)`, with `ν`, `τ` given at the
    /// reference angles and `t` the unit tangent.
    BoundaryField { normal: AngularField, tangential: AngularField },
    /// Reparametrization of the boundary curve by `θ → θ + h τ(θ)`; the
    /// point set, and hence the geometry, is unchanged.
    Reparametrization(AngularField),
}

impl Perturbation {
    /// Geometry after a step of size `h`, graph truncated to `order` modes.
    pub fn apply(&self, geom: &GeometrySpec, h: f64, order: usize) -> Result<GeometrySpec> {
        let step_error = |e: Error| match e {
            e if e.is_geometry() => Error::StepTooLarge {
                step: h,
                reason: e.to_string(),
            },
            e => e,
        };
        match self {
            Perturbation::OuterGraph(d) => {
                let xi = add_fields(geom.xi(), &d.scaled(h));
                geom.with_xi(xi).map_err(step_error)
            }
            Perturbation::BoundaryField { normal, tangential } => {
                let xi = displaced_graph(geom, normal, tangential, h, order).map_err(step_error)?;
                geom.with_xi(xi).map_err(step_error)
            }
            Perturbation::Reparametrization(_) => Ok(geom.clone()),
        }
    }

    /// Normal component of the field on the boundary, `(V·n)` at the
    /// reference angles, for fields that are not reparametrizations.
    pub fn normal_trace(&self, geom: &GeometrySpec) -> AngularField {
        match self {
            Perturbation::OuterGraph(d) => {
                // δ e_ϱ · n = δ R / √(R² + R'²), sampled and projected
                let r = geom.outer_radius();
                let order = d.order() + r.order() + 8;
                let m = 4 * order + 2;
                let (dv, rv, r1) = (d.sample(m), r.sample(m), r.derivative().sample(m));
                let vals: Vec<f64> = (0..m).map(|j| dv[j] * rv[j] / rv[j].hypot(r1[j])).collect();
                AngularField::from_samples(&vals, 2 * order).expect("enough samples")
            }
            Perturbation::BoundaryField { normal, .. } => normal.clone(),
            Perturbation::Reparametrization(t) => AngularField::zeros(t.order()),
        }
    }
}

/// Graph `R_h - 1` of the curve `x(θ) + h V(θ)`, projected onto `order`
/// modes after re-sampling at uniform polar angles.
fn displaced_graph(geom: &GeometrySpec, normal: &AngularField, tangential: &AngularField, h: f64, order: usize) -> Result<AngularField> {
    let r = geom.outer_radius();
    let r1 = r.derivative();
    let point = |th: f64| -> [f64; 2] {
        let (big_r, d) = (r.eval(th), r1.eval(th));
        let speed = big_r.hypot(d);
        let (nu, tau) = (normal.eval(th), tangential.eval(th));
        // n and t in the polar frame, then Cartesian
        let (n_r, n_t) = (big_r / speed, -d / speed);
        let (t_r, t_t) = (d / speed, big_r / speed);
        let v_r = big_r + h * (nu * n_r + tau * t_r);
        let v_t = h * (nu * n_t + tau * t_t);
        let (s, c) = th.sin_cos();
        [v_r * c - v_t * s, v_r * s + v_t * c]
    };
    let wrap = |a: f64| (a + PI).rem_euclid(2.0 * PI) - PI;
    let m = 4 * order + 8;
    let mut samples = Vec::with_capacity(m);
    for alpha in uniform_angles(m) {
        let mut th = alpha;
        let mut converged = false;
        for _ in 0..60 {
            let p = point(th);
            let resid = wrap(p[1].atan2(p[0]) - alpha);
            if resid.abs() < 1e-15 {
                converged = true;
                break;
            }
            let eps = 1e-6;
            let (pa, pb) = (point(th + eps), point(th - eps));
            let slope = wrap(pa[1].atan2(pa[0]) - pb[1].atan2(pb[0])) / (2.0 * eps);
            if slope <= 0.0 {
                return Err(Error::StarShapeViolation { min_radius: 0.0 });
            }
            th -= resid / slope;
        }
        if !converged {
            return Err(Error::StarShapeViolation { min_radius: 0.0 });
        }
        let p = point(th);
        samples.push(p[0].hypot(p[1]) - 1.0);
    }
    AngularField::from_samples(&samples, order)
}

/// Finite-difference estimate of a directional derivative of `J`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdEstimate {
    pub value: f64,
    pub error_estimate: f64,
    /// Central differences at each step.
    pub central: Vec<f64>,
}

/// Default steps for [`fd_shape_derivative`].
pub const FD_STEPS: [f64; 3] = [1e-3, 5e-4, 2.5e-4];

/// Central differences of `J` along `direction`, Richardson-extrapolated
/// over `steps` (decreasing, even error expansion).
pub fn fd_shape_derivative(
    geom: &GeometrySpec,
    cond: &Conductivity,
    f: &AngularField,
    c: f64,
    direction: &Perturbation,
    steps: &[f64],
    res: &Resolution,
) -> Result<FdEstimate> {
    if steps.is_empty() || steps.windows(2).any(|w| !(w[1] < w[0])) || steps.iter().any(|h| !(*h > 0.0)) {
        return Err(Error::InvalidArgument("steps must be positive and decreasing".into()));
    }
    let order = res.modes;
    let mut central = Vec::with_capacity(steps.len());
    for &h in steps {
        let plus = direction.apply(geom, h, order)?;
        let minus = direction.apply(geom, -h, order)?;
        let jp = functional_j(&plus, cond, f, c, res)?;
        let jm = functional_j(&minus, cond, f, c, res)?;
        central.push((jp - jm) / (2.0 * h));
    }
    let (value, error_estimate) = richardson(steps, &central);
    Ok(FdEstimate {
        value,
        error_estimate,
        central,
    })
}

/// Richardson table for an error expansion in `h², h⁴, …`; returns the
/// most extrapolated value and its distance to the previous level.
pub fn richardson(steps: &[f64], values: &[f64]) -> (f64, f64) {
    let mut level: Vec<f64> = values.to_vec();
    let mut prev_best = *level.last().unwrap();
    let mut best = prev_best;
    let mut power = 2;
    while level.len() > 1 {
        let next: Vec<f64> = (0..level.len() - 1)
            .map(|i| {
                let ratio = (steps[i] / steps[i + 1]).powi(power);
                (ratio * level[i + 1] - level[i]) / (ratio - 1.0)
            })
            .collect();
        prev_best = best;
        best = *next.last().unwrap();
        level = next;
        power += 2;
    }
    (best, (best - prev_best).abs())
}
