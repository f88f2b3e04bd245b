//! The boundary operators `Γ(ξ) = ∂ₙu'[ξ] + ∂²ₙₙu ξ` and `Q = -2cΓ` over
//! the truncated Fourier basis, the Jacobian of the residual at general
//! geometries, and the nondegeneracy test.

use faer::prelude::*;
use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::digest::stable_hash;
use crate::error::{Error, Result};
use crate::fourier::{cos_index, mode_of, sin_index, AngularField};
use crate::shape::solve_shape_derivatives;
use crate::solver::{criticality, PulledBackSolution, CRITICALITY_LIMIT};

/// Default relative threshold on singular values for the kernel test.
pub const DEFAULT_REL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OperatorKind {
    Gamma,
    Q,
    QBar,
    /// Derivative of the residual in the outer graph at a general geometry.
    Jacobian,
}

impl OperatorKind {
    pub fn label(&self) -> &'static str {
        match self {
            OperatorKind::Gamma => "Gamma",
            OperatorKind::Q => "Q",
            OperatorKind::QBar => "Q_bar",
            OperatorKind::Jacobian => "Jacobian",
        }
    }
}

/// Coefficient label `a0`, `a1`, `b1`, …
pub fn coeff_label(i: usize) -> String {
    let k = mode_of(i);
    if k == 0 {
        "a0".to_string()
    } else if i == cos_index(k) {
        format!("a{k}")
    } else {
        format!("b{k}")
    }
}

/// A linear operator on `AngularField` coefficients. `basis` lists the
/// coefficient indices that rows and columns refer to (all of them, except
/// for the barycenter-restricted operator).
#[derive(Debug, Clone)]
pub struct LinearOperatorMatrix {
    pub matrix: Mat<f64>,
    pub kind: OperatorKind,
    pub geometry_id: String,
    /// Descending.
    pub singular_values: Vec<f64>,
    pub basis: Vec<usize>,
    pub modes: usize,
}

fn singular_values(m: &Mat<f64>) -> Result<Vec<f64>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    m.singular_values()
        .map_err(|e| Error::SingularSystem(format!("SVD failed: {e:?}")))
}

impl LinearOperatorMatrix {
    pub fn new(matrix: Mat<f64>, kind: OperatorKind, geometry_id: String, basis: Vec<usize>, modes: usize) -> Result<Self> {
        if matrix.nrows() != basis.len() || matrix.ncols() != basis.len() {
            return Err(Error::InvalidArgument(format!(
                "operator of size {}x{} does not match a basis of {} functions",
                matrix.nrows(),
                matrix.ncols(),
                basis.len()
            )));
        }
        for j in 0..matrix.ncols() {
            for i in 0..matrix.nrows() {
                if !matrix[(i, j)].is_finite() {
                    return Err(Error::SingularSystem("operator has non-finite entries".into()));
                }
            }
        }
        let singular_values = singular_values(&matrix)?;
        Ok(Self {
            matrix,
            kind,
            geometry_id,
            singular_values,
            basis,
            modes,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }

    /// Largest absolute off-diagonal entry.
    pub fn off_diagonal_leakage(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0_f64;
        for j in 0..n {
            for i in 0..n {
                if i != j {
                    worst = worst.max(self.matrix[(i, j)].abs());
                }
            }
        }
        worst
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.matrix[(i, i)]).collect()
    }

    /// Restriction of `x` to the basis coordinates.
    pub fn coordinates(&self, x: &AngularField) -> Vec<f64> {
        let x = x.resized(self.modes);
        self.basis.iter().map(|&i| x.coeffs()[i]).collect()
    }

    /// Field with the given basis coordinates (other coefficients zero).
    pub fn field(&self, coords: &[f64]) -> AngularField {
        let mut out = AngularField::zeros(self.modes);
        for (&i, &v) in self.basis.iter().zip(coords) {
            out.coeffs_mut()[i] = v;
        }
        out
    }

    pub fn apply(&self, x: &AngularField) -> AngularField {
        let c = self.coordinates(x);
        let n = self.dim();
        let y: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| self.matrix[(i, j)] * c[j]).sum())
            .collect();
        self.field(&y)
    }

    /// Solves `A y = rhs` on the basis coordinates.
    pub fn solve(&self, rhs: &AngularField) -> Result<AngularField> {
        let n = self.dim();
        let b = self.coordinates(rhs);
        let smallest = self.singular_values.last().copied().unwrap_or(0.0);
        let largest = self.singular_values.first().copied().unwrap_or(0.0);
        if !(smallest > 1e-14 * largest) {
            return Err(Error::SingularSystem(format!(
                "{} operator is numerically singular",
                self.kind.label()
            )));
        }
        let rhs = Mat::from_fn(n, 1, |i, _| b[i]);
        let y = self.matrix.partial_piv_lu().solve(&rhs);
        let coords: Vec<f64> = (0..n).map(|i| y[(i, 0)]).collect();
        Ok(self.field(&coords))
    }

    pub fn scaled(&self, factor: f64, kind: OperatorKind) -> Result<Self> {
        let m = Mat::from_fn(self.dim(), self.dim(), |i, j| factor * self.matrix[(i, j)]);
        Self::new(m, kind, self.geometry_id.clone(), self.basis.clone(), self.modes)
    }

    /// Row-major CSV with a self-describing header.
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# kind={} geometry_id={} K={}\n",
            self.kind.label(),
            self.geometry_id,
            self.modes
        );
        out.push_str("row");
        for &j in &self.basis {
            out.push(',');
            out.push_str(&coeff_label(j));
        }
        out.push('\n');
        for (r, &i) in self.basis.iter().enumerate() {
            out.push_str(&coeff_label(i));
            for c in 0..self.dim() {
                out.push_str(&format!(",{:.17e}", self.matrix[(r, c)]));
            }
            out.push('\n');
        }
        out
    }

    /// Diagonal entries with mode labels, and the singular values.
    pub fn spectrum_csv(&self) -> String {
        let mut out = format!(
            "# kind={} geometry_id={} K={}\nindex,coefficient,mode,diagonal,singular_value\n",
            self.kind.label(),
            self.geometry_id,
            self.modes
        );
        for (r, &i) in self.basis.iter().enumerate() {
            out.push_str(&format!(
                "{r},{},{},{:.17e},{:.17e}\n",
                coeff_label(i),
                mode_of(i),
                self.matrix[(r, r)],
                self.singular_values[r]
            ));
        }
        out
    }
}

fn full_basis(modes: usize) -> Vec<usize> {
    (0..2 * modes + 1).collect()
}

fn operator_id(sol: &PulledBackSolution) -> String {
    stable_hash(&(sol.geometry(), sol.conductivity(), &sol.resolution))
}

fn basis_fields(modes: usize) -> Vec<AngularField> {
    (0..2 * modes + 1).map(|i| AngularField::basis(modes, i)).collect()
}

/// `Γ` at the state `sol`: column `j` is `∂ₙu'[e_j] + ∂²ₙₙu (e_j e_ϱ·n)`,
/// with the multiplication carried out in coefficient space.
pub fn assemble_gamma(sol: &PulledBackSolution) -> Result<LinearOperatorMatrix> {
    let k = sol.resolution.modes;
    let dirs = basis_fields(k);
    let du = solve_shape_derivatives(sol, &dirs)?;
    let trace = sol.trace();
    let weight: Vec<f64> = trace.dnn.iter().zip(trace.normal_radial()).map(|(a, b)| a * b).collect();
    let w = AngularField::from_samples(&weight, k)?;
    let n = dirs.len();
    let mut m = Mat::<f64>::zeros(n, n);
    for (j, (dir, d)) in dirs.iter().zip(&du).enumerate() {
        let col = &d.dn + &w.product(dir).resized(k);
        for i in 0..n {
            m[(i, j)] = col.coeffs()[i];
        }
    }
    LinearOperatorMatrix::new(m, OperatorKind::Gamma, operator_id(sol), full_basis(k), k)
}

/// `Q = -2cΓ`, valid at a critical base where `∂ₙu ≡ -c`.
pub fn assemble_q(gamma: &LinearOperatorMatrix, sol: &PulledBackSolution) -> Result<LinearOperatorMatrix> {
    if gamma.kind != OperatorKind::Gamma {
        return Err(Error::InvalidArgument(format!(
            "expected a Gamma operator, got {}",
            gamma.kind.label()
        )));
    }
    let report = criticality(sol);
    if report.relative_defect > CRITICALITY_LIMIT {
        return Err(Error::NotCritical {
            c: report.c,
            relative_defect: report.relative_defect,
        });
    }
    gamma.scaled(-2.0 * report.c, OperatorKind::Q)
}

/// Derivative of `residual_g` with respect to the outer graph at the
/// current geometry. For `V = δ e_ϱ` the boundary value of `|∇u|²` moves by
/// `2∇u·(∇u' + D²u V)`; the column is the derivative of the truncated
/// product `(∂ₙu)²`.
pub fn residual_jacobian(sol: &PulledBackSolution) -> Result<LinearOperatorMatrix> {
    let k = sol.resolution.modes;
    let dirs = basis_fields(k);
    let du = solve_shape_derivatives(sol, &dirs)?;
    let trace = sol.trace();
    let m_nodes = trace.dn.len();
    let n = dirs.len();
    let mut m = Mat::<f64>::zeros(n, n);
    for (j, (dir, d)) in dirs.iter().zip(&du).enumerate() {
        let delta = dir.sample(m_nodes);
        let ddn: Vec<f64> = (0..m_nodes)
            .map(|q| {
                let (u, v, r) = (&trace.derivs[q], &d.trace.derivs[q], trace.radius[q]);
                let half_dgrad2 = u.u_r * (v.u_r + delta[q] * u.h_rr) + (u.u_th / r) * (v.u_th / r + delta[q] * u.h_rth);
                half_dgrad2 / trace.dn[q]
            })
            .collect();
        let ddn = AngularField::from_samples(&ddn, k)?;
        let col = sol.dn_u.product(&ddn).resized(k).scaled(2.0);
        for i in 0..n {
            m[(i, j)] = col.coeffs()[i];
        }
    }
    LinearOperatorMatrix::new(m, OperatorKind::Jacobian, operator_id(sol), full_basis(k), k)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NondegeneracyReport {
    pub is_nondegenerate: bool,
    pub kernel_basis: Vec<AngularField>,
    pub smallest_sv: f64,
    pub largest_sv: f64,
    /// `smallest_sv / largest_sv` (0 for the zero operator).
    pub ratio: f64,
    /// Singular values, descending.
    pub spectrum: Vec<f64>,
}

/// Kernel test: nondegenerate iff the smallest singular value exceeds
/// `rel_tol` times the largest.
pub fn nondegeneracy_report(op: &LinearOperatorMatrix, rel_tol: f64) -> Result<NondegeneracyReport> {
    let n = op.dim();
    let svd = op
        .matrix
        .svd()
        .map_err(|e| Error::SingularSystem(format!("SVD failed: {e:?}")))?;
    let s: Vec<f64> = (0..n).map(|i| svd.S().column_vector()[i]).collect();
    let largest = s.first().copied().unwrap_or(0.0);
    let smallest = s.last().copied().unwrap_or(0.0);
    let threshold = rel_tol * largest;
    let v = svd.V();
    let kernel_basis = (0..n)
        .filter(|&i| largest == 0.0 || s[i] <= threshold)
        .map(|i| {
            let coords: Vec<f64> = (0..n).map(|r| v[(r, i)]).collect();
            op.field(&coords)
        })
        .collect::<Vec<_>>();
    let ratio = if largest > 0.0 { smallest / largest } else { 0.0 };
    Ok(NondegeneracyReport {
        is_nondegenerate: largest > 0.0 && smallest > threshold,
        kernel_basis,
        smallest_sv: smallest,
        largest_sv: largest,
        ratio,
        spectrum: s,
    })
}

/// `L²` projection annihilating the `cos θ`, `sin θ` components.
pub fn project_bar(x: &AngularField) -> AngularField {
    let mut out = x.clone();
    if out.order() >= 1 {
        out.coeffs_mut()[cos_index(1)] = 0.0;
        out.coeffs_mut()[sin_index(1)] = 0.0;
    }
    out
}

/// `π_bar ∘ Q` restricted to fields without `cos θ`, `sin θ` components.
pub fn q_bar(q: &LinearOperatorMatrix) -> Result<LinearOperatorMatrix> {
    let keep: Vec<usize> = (0..q.dim())
        .filter(|&r| mode_of(q.basis[r]) != 1)
        .collect();
    let basis: Vec<usize> = keep.iter().map(|&r| q.basis[r]).collect();
    let m = Mat::from_fn(keep.len(), keep.len(), |i, j| q.matrix[(keep[i], keep[j])]);
    LinearOperatorMatrix::new(m, OperatorKind::QBar, q.geometry_id.clone(), basis, q.modes)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MuShiftReport {
    pub mu: f64,
    pub smallest_sv: f64,
    pub invertible: bool,
}

/// Smallest singular value of `Γ + μI` for `μ` just above `‖∂²ₙₙu‖∞`.
pub fn mu_shift_diagnostic(gamma: &LinearOperatorMatrix, sol: &PulledBackSolution) -> Result<MuShiftReport> {
    let sup = sol.trace().dnn.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let mu = 1.01 * sup + 1e-3;
    let n = gamma.dim();
    let shifted = Mat::from_fn(n, n, |i, j| gamma.matrix[(i, j)] + if i == j { mu } else { 0.0 });
    let s = singular_values(&shifted)?;
    let smallest = s.last().copied().unwrap_or(0.0);
    let largest = s.first().copied().unwrap_or(0.0);
    Ok(MuShiftReport {
        mu,
        smallest_sv: smallest,
        invertible: smallest > DEFAULT_REL_TOL * largest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GeometrySpec;
    use crate::oracles::{ball_q_eigenvalue, gamma_mode};
    use crate::solver::{solve_state, Conductivity, Resolution};

    fn disk(k: usize) -> PulledBackSolution {
        let geom = GeometrySpec::concentric(0.5).unwrap();
        solve_state(&geom, &Conductivity::one_phase(), &Resolution::with_modes(k)).unwrap()
    }

    #[test]
    fn disk_gamma_and_q_are_diagonal() {
        let sol = disk(10);
        let gamma = assemble_gamma(&sol).unwrap();
        let q = assemble_q(&gamma, &sol).unwrap();
        assert!(q.off_diagonal_leakage() < 1e-9);
        for (r, &i) in q.basis.iter().enumerate() {
            let k = mode_of(i);
            assert!((q.entry(r, r) - ball_q_eigenvalue(k, 2)).abs() < 1e-9, "mode {k}");
            assert!((gamma.entry(r, r) - (k as f64 - 1.0) / 2.0).abs() < 1e-9);
        }
        let again = assemble_gamma(&sol).unwrap();
        assert_eq!(again.matrix, gamma.matrix);
        assert_eq!(again.geometry_id, gamma.geometry_id);
    }

    #[test]
    fn disk_kernel_is_translations() {
        let sol = disk(8);
        let q = assemble_q(&assemble_gamma(&sol).unwrap(), &sol).unwrap();
        let rep = nondegeneracy_report(&q, DEFAULT_REL_TOL).unwrap();
        assert!(!rep.is_nondegenerate);
        assert_eq!(rep.kernel_basis.len(), 2);
        for v in &rep.kernel_basis {
            let k1 = v.a(1).hypot(v.b(1));
            assert!((k1 - 1.0).abs() < 1e-9);
        }
        let qb = q_bar(&q).unwrap();
        assert_eq!(qb.dim(), 2 * 8 - 1);
        assert!((qb.singular_values.last().unwrap() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn two_phase_gamma_matches_mode_oracle() {
        let geom = GeometrySpec::concentric(0.5).unwrap();
        let sol = solve_state(&geom, &Conductivity::new(2.0, 0.0).unwrap(), &Resolution::with_modes(10)).unwrap();
        let gamma = assemble_gamma(&sol).unwrap();
        for (r, &i) in gamma.basis.iter().enumerate() {
            let expected = gamma_mode(mode_of(i), 0.5, 2.0).unwrap();
            assert!((gamma.entry(r, r) - expected).abs() < 1e-9, "{} {} {}", coeff_label(i), gamma.entry(r, r), expected);
        }
        let rep = nondegeneracy_report(&gamma, DEFAULT_REL_TOL).unwrap();
        assert!(rep.is_nondegenerate);
        let q = assemble_q(&gamma, &sol).unwrap();
        assert!((q.entry(1, 1) + 1.0 / 11.0).abs() < 1e-9);
        // at critical bases the residual Jacobian is Q
        let jac = residual_jacobian(&sol).unwrap();
        for i in 0..q.dim() {
            for j in 0..q.dim() {
                assert!((jac.entry(i, j) - q.entry(i, j)).abs() < 1e-10);
            }
        }
        let mu = mu_shift_diagnostic(&gamma, &sol).unwrap();
        assert!(mu.invertible && mu.mu > 0.5);
    }

    #[test]
    fn q_requires_criticality() {
        let geom = GeometrySpec::new(AngularField::cos_mode(2, 2, 0.05), AngularField::zeros(0), 0.5).unwrap();
        let sol = solve_state(&geom, &Conductivity::new(2.0, 0.0).unwrap(), &Resolution::with_modes(12)).unwrap();
        let gamma = assemble_gamma(&sol).unwrap();
        assert!(matches!(assemble_q(&gamma, &sol), Err(Error::NotCritical { .. })));
    }

    #[test]
    fn zero_operator_has_full_kernel() {
        let op = LinearOperatorMatrix::new(Mat::zeros(5, 5), OperatorKind::Gamma, "0".into(), full_basis(2), 2).unwrap();
        let rep = nondegeneracy_report(&op, DEFAULT_REL_TOL).unwrap();
        assert!(!rep.is_nondegenerate);
        assert_eq!(rep.kernel_basis.len(), 5);
    }

    #[test]
    fn projection_examples() {
        let x = AngularField::new(vec![1.0, 2.0, 0.0, 3.0, 0.0]).unwrap();
        assert_eq!(project_bar(&x).coeffs(), &[1.0, 0.0, 0.0, 3.0, 0.0]);
        assert!(project_bar(&AngularField::cos_mode(1, 1, 1.0)).is_zero());
        let y = project_bar(&x);
        assert_eq!(project_bar(&y), y);
    }

    #[test]
    fn csv_is_self_describing() {
        let sol = disk(3);
        let gamma = assemble_gamma(&sol).unwrap();
        let csv = gamma.to_csv();
        let mut lines = csv.lines();
        assert!(lines.next().unwrap().starts_with("# kind=Gamma geometry_id="));
        assert_eq!(lines.next().unwrap(), "row,a0,a1,b1,a2,b2,a3,b3");
        assert_eq!(csv.lines().count(), 2 + 7);
        assert_eq!(gamma.spectrum_csv().lines().count(), 2 + 7);
    }
}
