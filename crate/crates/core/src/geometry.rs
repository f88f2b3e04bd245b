//! Star-shaped two-phase configurations described as radial graphs.
//!
//! The outer boundary is `R(θ) = 1 + ξ(θ)` and the inclusion boundary is
//! `r(θ) = ρ + φ(θ)`, both over the unit reference circle. Normal graph
//! perturbations of the circle are radial, so the extension of `ξ n` off
//! the reference circle is the radial field built by
//! [`extend_normal_field`].

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{uniform_angles, AngularField};

/// Minimum gap between the inclusion and the outer boundary.
pub const INCLUSION_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometrySpec {
    outer_graph: AngularField,
    inclusion_graph: AngularField,
    rho: f64,
}

impl GeometrySpec {
    /// `xi` perturbs the unit circle, `phi` perturbs the circle of radius `rho`.
    pub fn new(xi: AngularField, phi: AngularField, rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "base inclusion radius must lie in (0, 1), got {rho}"
            )));
        }
        let geom = Self {
            outer_graph: xi,
            inclusion_graph: phi,
            rho,
        };
        geom.validate()?;
        Ok(geom)
    }

    pub fn concentric(rho: f64) -> Result<Self> {
        Self::new(AngularField::zeros(0), AngularField::zeros(0), rho)
    }

    fn validate(&self) -> Result<()> {
        let (r_out_min, _) = self.outer_radius().min_max();
        if r_out_min <= 0.0 {
            return Err(Error::StarShapeViolation {
                min_radius: r_out_min,
            });
        }
        let (r_in_min, r_in_max) = self.inclusion_radius().min_max();
        if r_in_min <= 0.0 {
            return Err(Error::StarShapeViolation {
                min_radius: r_in_min,
            });
        }
        let gap = r_out_min - r_in_max;
        if gap < INCLUSION_MARGIN {
            return Err(Error::InclusionOverlap {
                gap,
                margin: INCLUSION_MARGIN,
            });
        }
        let (m, d) = self.inclusion_diameter_split();
        let order = m.order().max(d.order()).max(1);
        let m_samples = m.resized(order).sample(8 * (order + 1));
        let d_samples = d.resized(order).sample(8 * (order + 1));
        let slack = m_samples
            .iter()
            .zip(&d_samples)
            .map(|(m, d)| m - 2.0 * d.abs())
            .fold(f64::INFINITY, f64::min);
        if slack <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "inclusion too far off-center for the diameter map (slack {slack:.3e})"
            )));
        }
        Ok(())
    }

    pub fn xi(&self) -> &AngularField {
        &self.outer_graph
    }

    pub fn phi(&self) -> &AngularField {
        &self.inclusion_graph
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn order(&self) -> usize {
        self.outer_graph.order().max(self.inclusion_graph.order())
    }

    /// `R(θ) = 1 + ξ(θ)`.
    pub fn outer_radius(&self) -> AngularField {
        let mut r = self.outer_graph.clone();
        r.coeffs_mut()[0] += 1.0;
        r
    }

    /// `r(θ) = ρ + φ(θ)`.
    pub fn inclusion_radius(&self) -> AngularField {
        let mut r = self.inclusion_graph.clone();
        r.coeffs_mut()[0] += self.rho;
        r
    }

    /// Even (`m`) and odd (`d`) parts of the inclusion radius:
    /// `m(θ) = (r(θ) + r(θ+π))/2`, `d(θ) = (r(θ) - r(θ+π))/2`.
    pub fn inclusion_diameter_split(&self) -> (AngularField, AngularField) {
        let r = self.inclusion_radius();
        (r.parity_part(false), r.parity_part(true))
    }

    /// Same inclusion, new outer graph.
    pub fn with_xi(&self, xi: AngularField) -> Result<Self> {
        Self::new(xi, self.inclusion_graph.clone(), self.rho)
    }

    pub fn with_phi(&self, phi: AngularField) -> Result<Self> {
        Self::new(self.outer_graph.clone(), phi, self.rho)
    }

    /// `|Ω_ξ| = ½ ∫ R² dθ`, exact for the trigonometric graph.
    pub fn area(&self) -> f64 {
        let r = self.outer_radius();
        PI * r.mean_product(&r)
    }

    /// `|D_φ|`.
    pub fn inclusion_area(&self) -> f64 {
        let r = self.inclusion_radius();
        PI * r.mean_product(&r)
    }

    /// Cutoff radii for the normal extension: `(0.75, 1.5)` unless the
    /// inclusion reaches past `0.75 - margin`, in which case the inner
    /// cutoff moves halfway between the inclusion and the unit circle.
    pub fn default_cutoffs(&self) -> (f64, f64) {
        let (_, r_max) = self.inclusion_radius().min_max();
        let inner = if r_max + INCLUSION_MARGIN < 0.75 {
            0.75
        } else {
            0.5 * (r_max + 1.0)
        };
        (inner, 1.5)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Outer,
    Inclusion,
}

/// Sampled boundary curve with normals, curvature and arclength weights.
#[derive(Debug, Clone)]
pub struct BoundaryFrame {
    pub angles: Vec<f64>,
    pub nodes: Vec<[f64; 2]>,
    pub normal: Vec<[f64; 2]>,
    pub curvature: Vec<f64>,
    pub arclength_weight: Vec<f64>,
}

impl BoundaryFrame {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.arclength_weight.iter().sum()
    }

    /// Trapezoidal boundary integral of nodal values.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        values
            .iter()
            .zip(&self.arclength_weight)
            .map(|(v, w)| v * w)
            .sum()
    }
}

pub fn build_frame(geom: &GeometrySpec, which: Boundary, m: usize) -> Result<BoundaryFrame> {
    let graph = match which {
        Boundary::Outer => geom.outer_radius(),
        Boundary::Inclusion => geom.inclusion_radius(),
    };
    if m < 2 * graph.order() + 1 {
        return Err(Error::ResolutionTooLow(format!(
            "{m} boundary nodes for a graph of order {}",
            graph.order()
        )));
    }
    let g = graph.sample(m);
    let g1 = graph.derivative().sample(m);
    let g2 = graph.derivative().derivative().sample(m);
    let angles = uniform_angles(m);
    let h = 2.0 * PI / m as f64;
    let mut frame = BoundaryFrame {
        angles: angles.clone(),
        nodes: Vec::with_capacity(m),
        normal: Vec::with_capacity(m),
        curvature: Vec::with_capacity(m),
        arclength_weight: Vec::with_capacity(m),
    };
    for j in 0..m {
        let (s, c) = angles[j].sin_cos();
        let speed = g[j].hypot(g1[j]);
        frame.nodes.push([g[j] * c, g[j] * s]);
        frame
            .normal
            .push([(g[j] * c + g1[j] * s) / speed, (g[j] * s - g1[j] * c) / speed]);
        frame
            .curvature
            .push((g[j] * g[j] + 2.0 * g1[j] * g1[j] - g[j] * g2[j]) / speed.powi(3));
        frame.arclength_weight.push(h * speed);
    }
    Ok(frame)
}

/// Quintic smoothstep: 0 at 0, 1 at 1, first and second derivatives vanish
/// at both ends.
fn smoothstep(z: f64) -> f64 {
    let z = z.clamp(0.0, 1.0);
    z * z * z * (10.0 + z * (-15.0 + 6.0 * z))
}

/// Radial extension `x ↦ ξ(θ(x)) χ(|x|) x/|x|` of the normal field `ξ n`
/// on the unit circle.
#[derive(Debug, Clone)]
pub struct NormalExtension {
    xi: AngularField,
    inner: f64,
    outer: f64,
}

pub fn extend_normal_field(xi: &AngularField, cutoff_inner: f64, cutoff_outer: f64) -> Result<NormalExtension> {
    if !(cutoff_inner > 0.0 && cutoff_inner < 1.0 && cutoff_outer > 1.0) {
        return Err(Error::CutoffOrdering {
            inner: cutoff_inner,
            outer: cutoff_outer,
        });
    }
    Ok(NormalExtension {
        xi: xi.clone(),
        inner: cutoff_inner,
        outer: cutoff_outer,
    })
}

impl NormalExtension {
    /// The radial bump: 1 on the unit circle, 0 outside `(inner, outer)`.
    pub fn cutoff(&self, radius: f64) -> f64 {
        if radius <= self.inner || radius >= self.outer {
            0.0
        } else if radius <= 1.0 {
            smoothstep((radius - self.inner) / (1.0 - self.inner))
        } else {
            smoothstep((self.outer - radius) / (self.outer - 1.0))
        }
    }

    pub fn eval(&self, p: [f64; 2]) -> [f64; 2] {
        let r = p[0].hypot(p[1]);
        let chi = self.cutoff(r);
        if chi == 0.0 {
            return [0.0, 0.0];
        }
        let theta = p[1].atan2(p[0]);
        let amp = self.xi.eval(theta) * chi / r;
        [amp * p[0], amp * p[1]]
    }

    pub fn support(&self) -> (f64, f64) {
        (self.inner, self.outer)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layer {
    Inner,
    Annulus,
}

/// Boundary radii and their first two angular derivatives at one angle.
#[derive(Debug, Clone, Copy, Default)]
pub struct RayData {
    pub outer: [f64; 3],
    pub inclusion: [f64; 3],
    /// Even part of the inclusion radius.
    pub mean: [f64; 3],
    /// Odd part of the inclusion radius.
    pub skew: [f64; 3],
}

/// Physical polar radius `P(t, θ)` of a layer point with its partial
/// derivatives.
#[derive(Debug, Clone, Copy)]
pub struct MapDerivs {
    pub p: f64,
    pub p_t: f64,
    pub p_tt: f64,
    pub p_th: f64,
    pub p_tth: f64,
    pub p_thth: f64,
}

/// Two-layer coordinate map from reference coordinates `(t, θ)`.
///
/// The annulus layer maps to radius `r(θ) + t (R(θ) - r(θ))`. The inner
/// layer maps to radius `t m(θ) + t² d(θ)`, where `m` and `d` are the even
/// and odd parts of `r`; this reduces to `t r(θ)` for centrally symmetric
/// inclusions and is consistent on full diameters, `P(-t, θ) = -P(t, θ+π)`.
#[derive(Debug, Clone)]
pub struct ReferenceMap {
    outer: [AngularField; 3],
    inclusion: [AngularField; 3],
    mean: [AngularField; 3],
    skew: [AngularField; 3],
}

fn with_derivatives(f: AngularField) -> [AngularField; 3] {
    let d1 = f.derivative();
    let d2 = d1.derivative();
    [f, d1, d2]
}

pub fn reference_map(geom: &GeometrySpec) -> Result<ReferenceMap> {
    geom.validate()?;
    let (m, d) = geom.inclusion_diameter_split();
    Ok(ReferenceMap {
        outer: with_derivatives(geom.outer_radius()),
        inclusion: with_derivatives(geom.inclusion_radius()),
        mean: with_derivatives(m),
        skew: with_derivatives(d),
    })
}

fn eval3(f: &[AngularField; 3], theta: f64) -> [f64; 3] {
    [f[0].eval(theta), f[1].eval(theta), f[2].eval(theta)]
}

fn sample3(f: &[AngularField; 3], m: usize) -> [Vec<f64>; 3] {
    [f[0].sample(m), f[1].sample(m), f[2].sample(m)]
}

impl ReferenceMap {
    pub fn ray(&self, theta: f64) -> RayData {
        RayData {
            outer: eval3(&self.outer, theta),
            inclusion: eval3(&self.inclusion, theta),
            mean: eval3(&self.mean, theta),
            skew: eval3(&self.skew, theta),
        }
    }

    /// Ray data at `m` uniform angles.
    pub fn rays(&self, m: usize) -> Vec<RayData> {
        let o = sample3(&self.outer, m);
        let i = sample3(&self.inclusion, m);
        let a = sample3(&self.mean, m);
        let b = sample3(&self.skew, m);
        (0..m)
            .map(|j| RayData {
                outer: [o[0][j], o[1][j], o[2][j]],
                inclusion: [i[0][j], i[1][j], i[2][j]],
                mean: [a[0][j], a[1][j], a[2][j]],
                skew: [b[0][j], b[1][j], b[2][j]],
            })
            .collect()
    }

    pub fn derivs(layer: Layer, t: f64, ray: &RayData) -> MapDerivs {
        match layer {
            Layer::Annulus => {
                let [r0, r1, r2] = ray.inclusion;
                let [q0, q1, q2] = ray.outer;
                MapDerivs {
                    p: r0 + t * (q0 - r0),
                    p_t: q0 - r0,
                    p_tt: 0.0,
                    p_th: r1 + t * (q1 - r1),
                    p_tth: q1 - r1,
                    p_thth: r2 + t * (q2 - r2),
                }
            }
            Layer::Inner => {
                let [m0, m1, m2] = ray.mean;
                let [d0, d1, d2] = ray.skew;
                MapDerivs {
                    p: t * m0 + t * t * d0,
                    p_t: m0 + 2.0 * t * d0,
                    p_tt: 2.0 * d0,
                    p_th: t * m1 + t * t * d1,
                    p_tth: m1 + 2.0 * t * d1,
                    p_thth: t * m2 + t * t * d2,
                }
            }
        }
    }

    pub fn radius(&self, layer: Layer, t: f64, theta: f64) -> f64 {
        Self::derivs(layer, t, &self.ray(theta)).p
    }

    pub fn to_physical(&self, layer: Layer, t: f64, theta: f64) -> [f64; 2] {
        let p = self.radius(layer, t, theta);
        [p * theta.cos(), p * theta.sin()]
    }

    /// `∂(x, y)/∂(t, θ)` as rows `[∂x/∂t, ∂x/∂θ]`, `[∂y/∂t, ∂y/∂θ]`.
    pub fn jacobian(&self, layer: Layer, t: f64, theta: f64) -> [[f64; 2]; 2] {
        let d = Self::derivs(layer, t, &self.ray(theta));
        let (s, c) = theta.sin_cos();
        [
            [d.p_t * c, d.p_th * c - d.p * s],
            [d.p_t * s, d.p_th * s + d.p * c],
        ]
    }

    /// Determinant of [`Self::jacobian`], equal to `P ∂P/∂t`.
    pub fn jacobian_det(&self, layer: Layer, t: f64, theta: f64) -> f64 {
        let d = Self::derivs(layer, t, &self.ray(theta));
        d.p * d.p_t
    }

    /// Inverse map: layer, `t ∈ [0, 1]` and `θ ∈ [0, 2π)`.
    pub fn from_physical(&self, p: [f64; 2]) -> (Layer, f64, f64) {
        let radius = p[0].hypot(p[1]);
        let theta = p[1].atan2(p[0]).rem_euclid(2.0 * PI);
        let ray = self.ray(theta);
        let r = ray.inclusion[0];
        if radius <= r {
            let (m, d) = (ray.mean[0], ray.skew[0]);
            // positive root of d t² + m t - radius = 0, cancellation-free
            let t = 2.0 * radius / (m + (m * m + 4.0 * d * radius).sqrt());
            (Layer::Inner, t, theta)
        } else {
            (Layer::Annulus, (radius - r) / (ray.outer[0] - r), theta)
        }
    }
}
