//! Closed-form references: radial two-phase states, single-mode
//! transmission solutions at concentric bases and the ball spectrum.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Piecewise quadratic `u(r) = a0 + a2 r²` on `[0, ρ]` and `[ρ, R]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub breakpoints: [f64; 3],
    /// `(a0, a2)` inside the inclusion.
    pub inner: [f64; 2],
    /// `(a0, a2)` in the outer phase.
    pub outer: [f64; 2],
    /// `|u'(R)|`.
    pub c_value: f64,
    pub sigma_c: f64,
    pub dimension: usize,
}

impl RadialProfile {
    pub fn eval(&self, r: f64) -> f64 {
        let [a0, a2] = if r <= self.breakpoints[1] {
            self.inner
        } else {
            self.outer
        };
        a0 + a2 * r * r
    }

    pub fn derivative(&self, r: f64) -> f64 {
        let a2 = if r <= self.breakpoints[1] {
            self.inner[1]
        } else {
            self.outer[1]
        };
        2.0 * a2 * r
    }
}

/// Radial solution of `-div(σ∇u) = 1` in the ball of radius `r_out` in
/// dimension `n`, with a concentric inclusion of radius `rho`.
///
/// The divergence theorem on balls gives `σ u'(r) = -r/n` in each phase.
pub fn radial_two_phase(rho: f64, sigma_c: f64, n: usize, r_out: f64) -> Result<RadialProfile> {
    if !(rho > 0.0 && rho < r_out) || !(sigma_c > 0.0) || n < 2 {
        return Err(Error::InvalidArgument(format!(
            "radial profile needs 0 < rho < R, sigma_c > 0, N >= 2 (got {rho}, {sigma_c}, {n}, {r_out})"
        )));
    }
    let nf = n as f64;
    let outer = [r_out * r_out / (2.0 * nf), -1.0 / (2.0 * nf)];
    let a2_in = -1.0 / (2.0 * nf * sigma_c);
    let u_rho = outer[0] + outer[1] * rho * rho;
    let inner = [u_rho - a2_in * rho * rho, a2_in];
    Ok(RadialProfile {
        breakpoints: [0.0, rho, r_out],
        inner,
        outer,
        c_value: r_out / nf,
        sigma_c,
        dimension: n,
    })
}

/// Coefficients of the single-mode transmission solution
/// `w = A r^k` inside, `B r^k + C r^-k` outside (`B + C log r` for `k = 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeSolution {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Radial derivative at `r = 1`.
    pub dn_trace: f64,
}

/// Gaussian elimination with partial pivoting on a 3×3 system.
fn solve3(mut m: [[f64; 3]; 3], mut rhs: [f64; 3]) -> Result<[f64; 3]> {
    let scale = m
        .iter()
        .flat_map(|row| row.iter())
        .fold(0.0_f64, |acc, v| acc.max(v.abs()));
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        if m[pivot][col].abs() <= 1e-14 * scale {
            return Err(Error::SingularSystem(format!(
                "mode system has a vanishing pivot in column {col}"
            )));
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in (col + 1)..3 {
            let factor = m[row][col] / m[col][col];
            let pivot_row = m[col];
            for (dst, src) in m[row].iter_mut().zip(pivot_row).skip(col) {
                *dst -= factor * src;
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let tail: f64 = ((row + 1)..3).map(|k| m[row][k] * x[k]).sum();
        x[row] = (rhs[row] - tail) / m[row][row];
    }
    Ok(x)
}

/// Solves `div(σ∇w) = 0` for one Fourier mode on the concentric unit disk
/// with inclusion radius `rho` and `w(1) = dirichlet`.
pub fn mode_transmission(k: usize, rho: f64, sigma_c: f64, dirichlet: f64) -> Result<ModeSolution> {
    if !(rho > 0.0 && rho < 1.0) || !(sigma_c > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "mode oracle needs 0 < rho < 1 and sigma_c > 0 (got {rho}, {sigma_c})"
        )));
    }
    if k >= 1 {
        // with x = Cρ^{-2k}: continuity gives A = B + x, flux gives σA = B - x
        let kf = k as f64;
        let rho2k = rho.powi(2 * k as i32);
        let b = dirichlet * (sigma_c + 1.0) / ((sigma_c + 1.0) - (sigma_c - 1.0) * rho2k);
        let c = -b * (sigma_c - 1.0) * rho2k / (sigma_c + 1.0);
        let a = b - b * (sigma_c - 1.0) / (sigma_c + 1.0);
        return Ok(ModeSolution {
            a,
            b,
            c,
            dn_trace: kf * (b - c),
        });
    }
    // unknowns (A, B, C); rows: continuity, flux, outer value
    let (m, rhs) = (
        [[1.0, -1.0, -rho.ln()], [0.0, 0.0, 1.0 / rho], [0.0, 1.0, 0.0]],
        [0.0, 0.0, dirichlet],
    );
    let [a, b, c] = solve3(m, rhs)?;
    Ok(ModeSolution { a, b, c, dn_trace: c })
}

/// Diagonal entry of `Γ` on mode `k` at the concentric planar base with
/// unit outer radius: `∂ₙu' + ∂²ₙₙu` with `u' = cos kθ / 2` on the boundary.
pub fn gamma_mode(k: usize, rho: f64, sigma_c: f64) -> Result<f64> {
    Ok(mode_transmission(k, rho, sigma_c, 0.5)?.dn_trace - 0.5)
}

/// Eigenvalue of `Q` on degree-`k` spherical harmonics at the unit ball in
/// dimension `n`: `-2(k - 1)/n²`.
pub fn ball_q_eigenvalue(k: usize, n: usize) -> f64 {
    let nf = n as f64;
    -2.0 * (k as f64 - 1.0) / (nf * nf)
}
