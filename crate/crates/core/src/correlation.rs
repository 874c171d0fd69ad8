//! Spatial correlation of rectangular surfaces and the link covariances
//! built from it.
//!
//! Element `i` of a surface with `n_h` elements per row sits at
//! `(0, mod(i-1, n_h) d_h, floor((i-1)/n_h) d_v)` and the correlation
//! between two elements under isotropic scattering is
//! `d_h d_v sinc(2 |u_i - u_j| / lambda)` with the normalized sinc.
//!
//! The inter-surface channel has the Kronecker covariance
//! `beta_12 R1 (x) R2`, which is only ever handled in factored form.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{LinkPathLoss, Scenario};

/// Relative eigenvalue floor below which a matrix is rejected as not PSD.
pub const PSD_FLOOR: f64 = 1e-10;

/// Normalized sinc, `sin(pi x) / (pi x)` with `sinc(0) = 1`.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// A rectangular grid of reflecting elements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrsGeometry {
    /// Elements per row.
    pub n_h: usize,
    /// Elements per column.
    pub n_v: usize,
    /// Element width, meters.
    pub d_h: f64,
    /// Element height, meters.
    pub d_v: f64,
    pub wavelength: f64,
}

impl IrsGeometry {
    pub fn new(n_h: usize, n_v: usize, d_h: f64, d_v: f64, wavelength: f64) -> Result<Self> {
        if n_h == 0 || n_v == 0 {
            return Err(Error::Domain(format!("grid must be non-empty, got {n_h} x {n_v}")));
        }
        if !(d_h > 0.0 && d_v > 0.0 && wavelength > 0.0) {
            return Err(Error::Domain(format!(
                "element size and wavelength must be positive (d_h={d_h}, d_v={d_v}, lambda={wavelength})"
            )));
        }
        Ok(IrsGeometry { n_h, n_v, d_h, d_v, wavelength })
    }

    /// Square elements of side `d` on the most nearly square grid holding
    /// exactly `n` elements (`n_h` is the smallest divisor of `n` that is at
    /// least `sqrt(n)`).
    pub fn near_square(n: usize, d: f64, wavelength: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("surface needs at least one element".into()));
        }
        let n_h = (1..=n).find(|&h| n.is_multiple_of(h) && h * h >= n).unwrap_or(n);
        Self::new(n_h, n / n_h, d, d, wavelength)
    }

    /// Number of elements `N = n_h * n_v`.
    pub fn len(&self) -> usize {
        self.n_h * self.n_v
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Element area `d_h * d_v`, the diagonal of the correlation matrix.
    pub fn element_area(&self) -> f64 {
        self.d_h * self.d_v
    }
}

/// Position of element `index` (1-based) in meters.
pub fn element_position(index: usize, geometry: &IrsGeometry) -> Result<[f64; 3]> {
    if index == 0 || index > geometry.len() {
        return Err(Error::Domain(format!(
            "element index {index} outside 1..={}",
            geometry.len()
        )));
    }
    let e = index - 1;
    Ok([
        0.0,
        (e % geometry.n_h) as f64 * geometry.d_h,
        (e / geometry.n_h) as f64 * geometry.d_v,
    ])
}

/// Hermitian positive semidefinite N x N matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix(DMatrix<Complex64>);

impl CorrelationMatrix {
    /// Wraps `m` after checking it is square and Hermitian (to `1e-12`
    /// relative); the lower triangle is then mirrored from the upper one.
    pub fn new(mut m: DMatrix<Complex64>) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: m.ncols() });
        }
        let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for i in 0..n {
            for j in i..n {
                let d = (m[(i, j)] - m[(j, i)].conj()).norm();
                if d > 1e-12 * scale.max(f64::MIN_POSITIVE) {
                    return Err(Error::Domain(format!("matrix not Hermitian at ({i}, {j})")));
                }
                if i == j {
                    m[(i, i)].im = 0.0;
                } else {
                    m[(j, i)] = m[(i, j)].conj();
                }
            }
        }
        Ok(CorrelationMatrix(m))
    }

    /// Diagonal matrix `value * I`.
    pub fn scaled_identity(n: usize, value: f64) -> Self {
        CorrelationMatrix(DMatrix::from_diagonal_element(n, n, Complex64::new(value, 0.0)))
    }

    /// Uncorrelated surface: `d_h d_v I`.
    pub fn uncorrelated(geometry: &IrsGeometry) -> Self {
        Self::scaled_identity(geometry.len(), geometry.element_area())
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.diagonal().iter().map(|z| z.re).sum()
    }

    /// `c * R`.
    pub fn scaled(&self, c: f64) -> CorrelationMatrix {
        CorrelationMatrix(self.0.map(|z| z * c))
    }

    /// True when every off-diagonal entry is exactly zero.
    pub fn is_diagonal(&self) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..n).all(|j| i == j || self.0[(i, j)] == Complex64::new(0.0, 0.0)))
    }

    /// Real eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.0.clone()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Writes the real parts row-major as CSV.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        for row in self.0.row_iter() {
            let line: Vec<String> = row.iter().map(|z| format!("{:e}", z.re)).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }
}

/// Correlation matrix of a rectangular surface under isotropic scattering.
pub fn sinc_correlation(geometry: &IrsGeometry) -> CorrelationMatrix {
    let n = geometry.len();
    let area = geometry.element_area();
    let pos: Vec<[f64; 3]> = (1..=n)
        .map(|i| element_position(i, geometry).expect("index in range"))
        .collect();
    let mut m = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for i in 0..n {
        m[(i, i)] = Complex64::new(area, 0.0);
        for j in (i + 1)..n {
            let dist = ((pos[i][1] - pos[j][1]).powi(2) + (pos[i][2] - pos[j][2]).powi(2)).sqrt();
            let v = Complex64::new(area * sinc(2.0 * dist / geometry.wavelength), 0.0);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    CorrelationMatrix(m)
}

/// Hermitian square root `S` with `S S^H = R`; eigenvalues below zero
/// (within the PSD floor) are clipped.
pub fn hermitian_sqrt(r: &CorrelationMatrix) -> Result<DMatrix<Complex64>> {
    let eig = SymmetricEigen::new(r.0.clone());
    let max = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -PSD_FLOOR * max {
        return Err(Error::NotPsd { min, max });
    }
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (k, lam) in eig.eigenvalues.iter().enumerate() {
        let s = lam.max(0.0).sqrt();
        scaled.column_mut(k).scale_mut(s);
    }
    Ok(&scaled * v.adjoint())
}

/// The five path-loss gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkGains {
    pub t1: f64,
    pub l12: f64,
    pub l2r: f64,
    pub l1r: f64,
    pub t2: f64,
}

impl LinkGains {
    pub fn scaled(&self, c: f64) -> LinkGains {
        LinkGains {
            t1: self.t1 * c,
            l12: self.l12 * c,
            l2r: self.l2r * c,
            l1r: self.l1r * c,
            t2: self.t2 * c,
        }
    }
}

impl From<&LinkPathLoss> for LinkGains {
    fn from(p: &LinkPathLoss) -> Self {
        LinkGains { t1: p.beta_t1, l12: p.beta_12, l2r: p.beta_2r, l1r: p.beta_1r, t2: p.beta_t2 }
    }
}

/// Covariances of all five links.
///
/// `R_t1 = beta_t1 R1`, `R_1r = beta_1r R1`, `R_2r = beta_2r R2`,
/// `R_t2 = beta_t2 R2`; the inter-surface covariance stays factored as
/// `(beta_12, R1, R2)`.
#[derive(Debug, Clone)]
pub struct LinkCovarianceSet {
    r1: CorrelationMatrix,
    r2: CorrelationMatrix,
    gains: LinkGains,
    r_t1: CorrelationMatrix,
    r_1r: CorrelationMatrix,
    r_2r: CorrelationMatrix,
    r_t2: CorrelationMatrix,
}

impl LinkCovarianceSet {
    pub fn new(r1: CorrelationMatrix, r2: CorrelationMatrix, gains: LinkGains) -> Result<Self> {
        for (name, b) in [("t1", gains.t1), ("12", gains.l12), ("2r", gains.l2r), ("1r", gains.l1r), ("t2", gains.t2)] {
            if !(b >= 0.0) || !b.is_finite() {
                return Err(Error::Domain(format!("path loss beta_{name} must be non-negative, got {b}")));
            }
        }
        Ok(LinkCovarianceSet {
            r_t1: r1.scaled(gains.t1),
            r_1r: r1.scaled(gains.l1r),
            r_2r: r2.scaled(gains.l2r),
            r_t2: r2.scaled(gains.t2),
            r1,
            r2,
            gains,
        })
    }

    pub fn n1(&self) -> usize {
        self.r1.dim()
    }

    pub fn n2(&self) -> usize {
        self.r2.dim()
    }

    pub fn r1(&self) -> &CorrelationMatrix {
        &self.r1
    }

    pub fn r2(&self) -> &CorrelationMatrix {
        &self.r2
    }

    pub fn gains(&self) -> LinkGains {
        self.gains
    }

    pub fn beta_12(&self) -> f64 {
        self.gains.l12
    }

    pub fn r_t1(&self) -> &CorrelationMatrix {
        &self.r_t1
    }

    pub fn r_1r(&self) -> &CorrelationMatrix {
        &self.r_1r
    }

    pub fn r_2r(&self) -> &CorrelationMatrix {
        &self.r_2r
    }

    pub fn r_t2(&self) -> &CorrelationMatrix {
        &self.r_t2
    }

    /// Covariance `E[D_ik D_jl^*] = beta_12 R1_ij R2_kl` of the inter-surface
    /// channel entries (rows index IRS 1, columns IRS 2).
    pub fn inter_covariance(&self, i: usize, k: usize, j: usize, l: usize) -> Complex64 {
        self.r1.0[(i, j)] * self.r2.0[(k, l)] * self.gains.l12
    }

    /// Same path losses with both surfaces treated as uncorrelated.
    pub fn decorrelated(&self) -> Result<Self> {
        let a1 = self.r1.0[(0, 0)].re;
        let a2 = self.r2.0[(0, 0)].re;
        Self::new(
            CorrelationMatrix::scaled_identity(self.n1(), a1),
            CorrelationMatrix::scaled_identity(self.n2(), a2),
            self.gains,
        )
    }
}

/// Builds the link covariances of `scenario` from its surface geometries.
pub fn build_link_covariances(scenario: &Scenario) -> Result<LinkCovarianceSet> {
    LinkCovarianceSet::new(
        sinc_correlation(&scenario.irs1_geometry),
        sinc_correlation(&scenario.irs2_geometry),
        LinkGains::from(&scenario.pathloss),
    )
}

/// Uncorrelated counterpart of [`build_link_covariances`].
pub fn build_uncorrelated_covariances(scenario: &Scenario) -> Result<LinkCovarianceSet> {
    LinkCovarianceSet::new(
        CorrelationMatrix::uncorrelated(&scenario.irs1_geometry),
        CorrelationMatrix::uncorrelated(&scenario.irs2_geometry),
        LinkGains::from(&scenario.pathloss),
    )
}

/// Frobenius norm of a complex matrix.
pub fn frobenius(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
