//! Truncated real Fourier series on the reference circle.
//!
//! An [`AngularField`] of order `K` stores `2K+1` coefficients laid out as
//! `(a0, a1, b1, a2, b2, ..., aK, bK)` and represents
//! `θ ↦ a0 + Σ_k (a_k cos kθ + b_k sin kθ)`.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct AngularField {
    coeffs: Vec<f64>,
}

impl TryFrom<Vec<f64>> for AngularField {
    type Error = Error;

    fn try_from(coeffs: Vec<f64>) -> Result<Self> {
        AngularField::new(coeffs)
    }
}

impl From<AngularField> for Vec<f64> {
    fn from(field: AngularField) -> Self {
        field.coeffs
    }
}

/// Uniform angles `2πj/m`, `j = 0..m`.
pub fn uniform_angles(m: usize) -> Vec<f64> {
    (0..m).map(|j| 2.0 * PI * j as f64 / m as f64).collect()
}

/// Coefficient slot of `cos kθ` (k ≥ 0).
#[inline]
pub fn cos_index(k: usize) -> usize {
    if k == 0 {
        0
    } else {
        2 * k - 1
    }
}

/// Coefficient slot of `sin kθ` (k ≥ 1).
#[inline]
pub fn sin_index(k: usize) -> usize {
    debug_assert!(k >= 1);
    2 * k
}

/// Wave number carried by coefficient slot `i`.
#[inline]
pub fn mode_of(i: usize) -> usize {
    i.div_ceil(2)
}

impl AngularField {
    /// Builds a field from a coefficient vector of odd length `2K+1`.
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len().is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "angular field needs an odd number of coefficients, got {}",
                coeffs.len()
            )));
        }
        if let Some(bad) = coeffs.iter().find(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite Fourier coefficient {bad}"
            )));
        }
        Ok(Self { coeffs })
    }

    pub fn zeros(order: usize) -> Self {
        Self {
            coeffs: vec![0.0; 2 * order + 1],
        }
    }

    pub fn constant(order: usize, value: f64) -> Self {
        let mut f = Self::zeros(order);
        f.coeffs[0] = value;
        f
    }

    /// `amplitude · cos kθ` as a field of the given order.
    pub fn cos_mode(order: usize, k: usize, amplitude: f64) -> Self {
        assert!(k <= order, "mode {k} exceeds order {order}");
        let mut f = Self::zeros(order);
        f.coeffs[cos_index(k)] = amplitude;
        f
    }

    /// `amplitude · sin kθ` as a field of the given order.
    pub fn sin_mode(order: usize, k: usize, amplitude: f64) -> Self {
        assert!(k >= 1 && k <= order, "sine mode {k} invalid for order {order}");
        let mut f = Self::zeros(order);
        f.coeffs[sin_index(k)] = amplitude;
        f
    }

    /// The `i`-th element of the coefficient basis.
    pub fn basis(order: usize, i: usize) -> Self {
        let mut f = Self::zeros(order);
        f.coeffs[i] = 1.0;
        f
    }

    /// Trigonometric projection of uniformly sampled values `v_j = F(2πj/m)`.
    ///
    /// Exact for band-limited data when `m ≥ 2K+1`.
    pub fn from_samples(values: &[f64], order: usize) -> Result<Self> {
        let m = values.len();
        if m < 2 * order + 1 {
            return Err(Error::InvalidArgument(format!(
                "{m} samples cannot resolve order {order}"
            )));
        }
        let mut coeffs = vec![0.0; 2 * order + 1];
        let inv = 1.0 / m as f64;
        coeffs[0] = values.iter().sum::<f64>() * inv;
        for k in 1..=order {
            let (mut a, mut b) = (0.0, 0.0);
            for (j, v) in values.iter().enumerate() {
                // reduce the phase index to keep the argument small
                let phase = 2.0 * PI * ((k * j) % m) as f64 * inv;
                a += v * phase.cos();
                b += v * phase.sin();
            }
            coeffs[cos_index(k)] = 2.0 * a * inv;
            coeffs[sin_index(k)] = 2.0 * b * inv;
        }
        Self::new(coeffs)
    }

    pub fn order(&self) -> usize {
        (self.coeffs.len() - 1) / 2
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn a(&self, k: usize) -> f64 {
        self.coeffs.get(cos_index(k)).copied().unwrap_or(0.0)
    }

    pub fn b(&self, k: usize) -> f64 {
        if k == 0 {
            return 0.0;
        }
        self.coeffs.get(sin_index(k)).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    /// Zero-pads or truncates to `order`.
    pub fn resized(&self, order: usize) -> Self {
        let mut coeffs = vec![0.0; 2 * order + 1];
        let n = coeffs.len().min(self.coeffs.len());
        coeffs[..n].copy_from_slice(&self.coeffs[..n]);
        Self { coeffs }
    }

    pub fn eval(&self, theta: f64) -> f64 {
        let mut s = self.coeffs[0];
        for k in 1..=self.order() {
            let (sn, cs) = (k as f64 * theta).sin_cos();
            s += self.coeffs[cos_index(k)] * cs + self.coeffs[sin_index(k)] * sn;
        }
        s
    }

    /// Values at `m` uniform angles.
    pub fn sample(&self, m: usize) -> Vec<f64> {
        let order = self.order();
        let mut out = vec![self.coeffs[0]; m];
        for (j, v) in out.iter_mut().enumerate() {
            for k in 1..=order {
                let phase = 2.0 * PI * ((k * j) % m) as f64 / m as f64;
                let (sn, cs) = phase.sin_cos();
                *v += self.coeffs[cos_index(k)] * cs + self.coeffs[sin_index(k)] * sn;
            }
        }
        out
    }

    /// Exact angular derivative in coefficient space.
    pub fn derivative(&self) -> Self {
        let mut out = Self::zeros(self.order());
        for k in 1..=self.order() {
            let kf = k as f64;
            out.coeffs[cos_index(k)] = kf * self.coeffs[sin_index(k)];
            out.coeffs[sin_index(k)] = -kf * self.coeffs[cos_index(k)];
        }
        out
    }

    /// Exact product of two trigonometric polynomials (order `K1 + K2`).
    pub fn product(&self, other: &Self) -> Self {
        let (p, q) = (self.order(), other.order());
        let mut out = Self::zeros(p + q);
        for k in 0..=p {
            let (ak, bk) = (self.a(k), self.b(k));
            if ak == 0.0 && bk == 0.0 {
                continue;
            }
            for l in 0..=q {
                let (al, bl) = (other.a(l), other.b(l));
                if al == 0.0 && bl == 0.0 {
                    continue;
                }
                // products of cos/sin pairs split into sum and difference modes
                let sum = k + l;
                let diff = k.abs_diff(l);
                let sign = if k >= l { 1.0 } else { -1.0 };
                let cc = ak * al;
                let ss = bk * bl;
                let sc = bk * al;
                let cs = ak * bl;
                out.add_cos(sum, 0.5 * (cc - ss));
                out.add_cos(diff, 0.5 * (cc + ss));
                out.add_sin(sum, 0.5 * (sc + cs));
                out.add_sin(diff, 0.5 * sign * (sc - cs));
            }
        }
        out
    }

    /// Product truncated back to the order of `self`.
    pub fn product_truncated(&self, other: &Self) -> Self {
        self.product(other).resized(self.order())
    }

    /// Mean value over the circle, `(1/2π) ∫ F dθ`.
    pub fn mean(&self) -> f64 {
        self.coeffs[0]
    }

    /// `(1/2π) ∫ F G dθ`, exact.
    pub fn mean_product(&self, other: &Self) -> f64 {
        let mut s = self.a(0) * other.a(0);
        for k in 1..=self.order().min(other.order()) {
            s += 0.5 * (self.a(k) * other.a(k) + self.b(k) * other.b(k));
        }
        s
    }

    /// Largest absolute value, sampled on a grid eight times finer than the order.
    pub fn sup_norm(&self) -> f64 {
        let m = 8 * (self.order() + 1);
        self.sample(m).into_iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    pub fn min_max(&self) -> (f64, f64) {
        let m = 8 * (self.order() + 1);
        self.sample(m)
            .into_iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    }

    /// Parseval energy `a0² + ½ Σ (a_k² + b_k²)`.
    pub fn energy(&self) -> f64 {
        self.mean_product(self)
    }

    /// Fraction of the energy carried by modes above two thirds of the order.
    pub fn tail_energy_fraction(&self) -> f64 {
        self.energy_fraction_above((2 * self.order()) / 3)
    }

    /// Fraction of the energy carried by modes `k > cut`.
    pub fn energy_fraction_above(&self, cut: usize) -> f64 {
        let total = self.energy();
        if total == 0.0 {
            return 0.0;
        }
        let tail: f64 = ((cut + 1)..=self.order())
            .map(|k| 0.5 * (self.a(k).powi(2) + self.b(k).powi(2)))
            .sum();
        tail / total
    }

    /// Highest mode with a nonzero coefficient.
    pub fn bandwidth(&self) -> usize {
        (0..self.len()).rev().find(|&i| self.coeffs[i] != 0.0).map_or(0, mode_of)
    }

    /// Keeps only the modes of the given parity of `k` (constant counts as even).
    pub fn parity_part(&self, odd: bool) -> Self {
        let mut out = self.clone();
        for (i, c) in out.coeffs.iter_mut().enumerate() {
            if (mode_of(i) % 2 == 1) != odd {
                *c = 0.0;
            }
        }
        out
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn max_abs_coeff_diff(&self, other: &Self) -> f64 {
        let n = self.len().max(other.len());
        (0..n)
            .map(|i| {
                let a = self.coeffs.get(i).copied().unwrap_or(0.0);
                let b = other.coeffs.get(i).copied().unwrap_or(0.0);
                (a - b).abs()
            })
            .fold(0.0, f64::max)
    }

    fn add_cos(&mut self, k: usize, v: f64) {
        self.coeffs[cos_index(k)] += v;
    }

    fn add_sin(&mut self, k: usize, v: f64) {
        if k > 0 {
            self.coeffs[sin_index(k)] += v;
        }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        let order = self.order().max(other.order());
        let (a, b) = (self.resized(order), other.resized(order));
        Self {
            coeffs: a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| f(*x, *y)).collect(),
        }
    }
}

impl Add for &AngularField {
    type Output = AngularField;
    fn add(self, rhs: Self) -> AngularField {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &AngularField {
    type Output = AngularField;
    fn sub(self, rhs: Self) -> AngularField {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Neg for &AngularField {
    type Output = AngularField;
    fn neg(self) -> AngularField {
        self.scaled(-1.0)
    }
}

impl Mul<f64> for &AngularField {
    type Output = AngularField;
    fn mul(self, rhs: f64) -> AngularField {
        self.scaled(rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn field(coeffs: &[f64]) -> AngularField {
        AngularField::new(coeffs.to_vec()).unwrap()
    }

    #[test]
    fn zero_field_is_all_zero() {
        let z = AngularField::zeros(5);
        assert!(z.is_zero());
        assert_eq!(z.len(), 11);
        assert_eq!(z.eval(1.3), 0.0);
    }

    #[test]
    fn rejects_even_length_and_nan() {
        assert!(AngularField::new(vec![1.0, 2.0]).is_err());
        assert!(AngularField::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn derivative_of_pure_cosine() {
        for k in 1..=12 {
            let f = AngularField::cos_mode(12, k, 1.0);
            let d = f.derivative();
            for &t in &[0.1, 0.7, 2.0, 5.5] {
                let expect = -(k as f64) * (k as f64 * t).sin();
                assert!((d.eval(t) - expect).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn product_matches_pointwise() {
        let f = field(&[0.3, 1.0, -0.5, 0.2, 0.7]);
        let g = field(&[-1.0, 0.0, 2.0, 0.4, -0.3, 0.1, 0.05]);
        let p = f.product(&g);
        assert_eq!(p.order(), 5);
        for &t in &[0.0, 0.4, 1.9, 3.3, 6.0] {
            assert!((p.eval(t) - f.eval(t) * g.eval(t)).abs() < 1e-14);
        }
        assert!((f.mean_product(&g) - p.mean()).abs() < 1e-15);
    }

    #[test]
    fn parity_split_recombines() {
        let f = field(&[0.3, 1.0, -0.5, 0.2, 0.7, 0.1, 0.2]);
        let sum = &f.parity_part(false) + &f.parity_part(true);
        assert_eq!(sum, f);
        // odd part flips sign under θ → θ+π
        let odd = f.parity_part(true);
        assert!((odd.eval(0.3) + odd.eval(0.3 + PI)).abs() < 1e-14);
    }

    #[test]
    fn tail_energy_of_low_modes_is_zero() {
        let f = AngularField::cos_mode(9, 2, 1.0);
        assert_eq!(f.tail_energy_fraction(), 0.0);
        let g = AngularField::cos_mode(9, 9, 1.0);
        assert!((g.tail_energy_fraction() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn serde_is_plain_array() {
        let f = field(&[1.0, 0.5, -0.25]);
        let s = serde_json::to_string(&f).unwrap();
        assert_eq!(s, "[1.0,0.5,-0.25]");
        let back: AngularField = serde_json::from_str(&s).unwrap();
        assert_eq!(back, f);
        assert!(serde_json::from_str::<AngularField>("[1.0,2.0]").is_err());
    }

    proptest! {
        #[test]
        fn sample_then_project_roundtrips(
            coeffs in proptest::collection::vec(-1.0f64..1.0, 1..=16usize)
                .prop_filter("odd", |v| v.len() % 2 == 1),
            extra in 0usize..4,
        ) {
            let f = AngularField::new(coeffs).unwrap();
            let m = 2 * f.order() + 1 + extra;
            let back = AngularField::from_samples(&f.sample(m), f.order()).unwrap();
            prop_assert!(back.max_abs_coeff_diff(&f) < 1e-13);
        }
    }
}
