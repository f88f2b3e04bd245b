//! Chebyshev–Lobatto nodes, differentiation matrices and interpolatory
//! quadrature weights.

use std::f64::consts::PI;

use faer::Mat;
use faer::prelude::*;

/// Lobatto points `cos(πj/n)`, `j = 0..=n`, in descending order.
pub fn lobatto_points(n: usize) -> Vec<f64> {
    (0..=n).map(|j| (PI * j as f64 / n as f64).cos()).collect()
}

/// First-derivative matrix on the Lobatto points of [`lobatto_points`].
///
/// Off-diagonal entries use the explicit formula, the diagonal is fixed by
/// the negative-sum rule so that constants are differentiated exactly.
pub fn diff_matrix(n: usize) -> Mat<f64> {
    let x = lobatto_points(n);
    let c = |j: usize| {
        let base = if j == 0 || j == n { 2.0 } else { 1.0 };
        if j.is_multiple_of(2) {
            base
        } else {
            -base
        }
    };
    let mut d = Mat::<f64>::zeros(n + 1, n + 1);
    for i in 0..=n {
        let mut row_sum = 0.0;
        for j in 0..=n {
            if i != j {
                let v = c(i) / c(j) / (x[i] - x[j]);
                d[(i, j)] = v;
                row_sum += v;
            }
        }
        d[(i, i)] = -row_sum;
    }
    d
}

fn cheb_t(k: usize, x: f64) -> f64 {
    (k as f64 * x.clamp(-1.0, 1.0).acos()).cos()
}

/// Interpolatory weights for `∫_a^b` on the nodes `x` (any ordering),
/// obtained from the Chebyshev moment system.
pub fn quadrature_weights(x: &[f64], a: f64, b: f64) -> Vec<f64> {
    let n = x.len();
    let moment = |k: usize, t: f64| -> f64 {
        // antiderivative of T_k evaluated at t
        match k {
            0 => t,
            1 => 0.5 * t * t,
            _ => {
                let kp = (k + 1) as f64;
                let km = (k - 1) as f64;
                cheb_t(k + 1, t) / (2.0 * kp) - cheb_t(k - 1, t) / (2.0 * km)
            }
        }
    };
    let mut vt = Mat::<f64>::zeros(n, n);
    let mut rhs = Mat::<f64>::zeros(n, 1);
    for k in 0..n {
        for (q, &xq) in x.iter().enumerate() {
            vt[(k, q)] = cheb_t(k, xq);
        }
        rhs[(k, 0)] = moment(k, b) - moment(k, a);
    }
    let w = vt.partial_piv_lu().solve(&rhs);
    (0..n).map(|q| w[(q, 0)]).collect()
}

/// Lobatto grid mapped to `[0, 1]` in ascending order, with its first and
/// second derivative matrices and Clenshaw–Curtis weights.
#[derive(Debug, Clone)]
pub struct UnitIntervalGrid {
    pub nodes: Vec<f64>,
    pub d1: Mat<f64>,
    pub d2: Mat<f64>,
    pub weights: Vec<f64>,
}

impl UnitIntervalGrid {
    /// `points` nodes (at least 3), `t_0 = 0`, `t_last = 1`.
    pub fn new(points: usize) -> Self {
        assert!(points >= 3, "need at least three Lobatto points");
        let n = points - 1;
        let x = lobatto_points(n);
        let d = diff_matrix(n);
        // reverse so that t ascends; t = (1 - cos)/2 maps [-1,1] onto [0,1]
        let nodes: Vec<f64> = (0..=n).map(|i| 0.5 * (1.0 + x[n - i])).collect();
        let d1 = Mat::<f64>::from_fn(points, points, |i, j| 2.0 * d[(n - i, n - j)]);
        let d2 = &d1 * &d1;
        let xr: Vec<f64> = (0..=n).map(|i| x[n - i]).collect();
        let weights = quadrature_weights(&xr, -1.0, 1.0)
            .into_iter()
            .map(|w| 0.5 * w)
            .collect();
        Self {
            nodes,
            d1,
            d2,
            weights,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Symmetric Lobatto grid on `[-1, 1]` with an even number of points,
/// stored through its positive half only.
///
/// A function sampled on the grid is assumed to satisfy the diameter
/// symmetry `v(-t, θ) = v(t, θ + π)`; the matrices `d*_pos`/`d*_neg` act on
/// the positive-half values at `θ` and `θ + π` respectively.
#[derive(Debug, Clone)]
pub struct DiameterGrid {
    /// Positive nodes, descending from `1`.
    pub nodes: Vec<f64>,
    pub d1_pos: Mat<f64>,
    pub d1_neg: Mat<f64>,
    pub d2_pos: Mat<f64>,
    pub d2_neg: Mat<f64>,
    /// Weights for `∫_0^1 H dt` of integrands odd under the diameter
    /// symmetry (`H(-t, θ) = -H(t, θ + π)`), to be summed over all angles.
    pub half_weights: Vec<f64>,
}

impl DiameterGrid {
    /// `half` positive nodes (full grid has `2·half` points, none at 0).
    pub fn new(half: usize) -> Self {
        assert!(half >= 2, "need at least two positive nodes");
        let n = 2 * half - 1;
        let x = lobatto_points(n);
        let d = diff_matrix(n);
        let d2 = &d * &d;
        let mirror = |l: usize| n - l;
        let d1_pos = Mat::<f64>::from_fn(half, half, |i, l| d[(i, l)]);
        let d1_neg = Mat::<f64>::from_fn(half, half, |i, l| d[(i, mirror(l))]);
        let d2_pos = Mat::<f64>::from_fn(half, half, |i, l| d2[(i, l)]);
        let d2_neg = Mat::<f64>::from_fn(half, half, |i, l| d2[(i, mirror(l))]);
        let w = quadrature_weights(&x, 0.0, 1.0);
        let half_weights = (0..half).map(|l| w[l] - w[mirror(l)]).collect();
        Self {
            nodes: x[..half].to_vec(),
            d1_pos,
            d1_neg,
            d2_pos,
            d2_neg,
            half_weights,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Fourier differentiation matrices on `m` (even) uniform angles.
pub fn fourier_d1(m: usize) -> Mat<f64> {
    assert!(m.is_multiple_of(2), "fourier matrices assume an even node count");
    let h = 2.0 * PI / m as f64;
    Mat::<f64>::from_fn(m, m, |j, k| {
        if j == k {
            0.0
        } else {
            let diff = j as isize - k as isize;
            let sign = if diff.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            0.5 * sign / (0.5 * diff as f64 * h).tan()
        }
    })
}

pub fn fourier_d2(m: usize) -> Mat<f64> {
    assert!(m.is_multiple_of(2), "fourier matrices assume an even node count");
    let h = 2.0 * PI / m as f64;
    Mat::<f64>::from_fn(m, m, |j, k| {
        if j == k {
            -PI * PI / (3.0 * h * h) - 1.0 / 6.0
        } else {
            let diff = j as isize - k as isize;
            let sign = if diff.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            -0.5 * sign / (0.5 * diff as f64 * h).sin().powi(2)
        }
    })
}
