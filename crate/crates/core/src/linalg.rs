//! Thin complex linear-algebra helpers shared by the optics and tomography code.
//!
//! Everything here operates on fixed-size nalgebra matrices over `Complex64`.
//! Eigendecompositions assume Hermitian input; callers are expected to
//! hermitize first when the matrix comes out of floating-point arithmetic.

use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type M2 = Matrix2<C64>;
pub type M4 = Matrix4<C64>;
pub type V2 = Vector2<C64>;

pub const ZERO: C64 = Complex64::new(0.0, 0.0);
pub const ONE: C64 = Complex64::new(1.0, 0.0);
pub const I: C64 = Complex64::new(0.0, 1.0);

pub fn c(re: f64) -> C64 {
    Complex64::new(re, 0.0)
}

/// (m + m†)/2.
pub fn hermitize2(m: &M2) -> M2 {
    (m + m.adjoint()) * c(0.5)
}

/// (m + m†)/2.
pub fn hermitize4(m: &M4) -> M4 {
    (m + m.adjoint()) * c(0.5)
}

/// Eigendecomposition of a Hermitian 2x2; eigenvalues ascending, columns of
/// the returned matrix are the matching orthonormal eigenvectors.
pub fn herm_eigen2(m: &M2) -> (Vector2<f64>, M2) {
    let se = m.symmetric_eigen();
    sort_eigen2(se.eigenvalues, se.eigenvectors)
}

/// Eigendecomposition of a Hermitian 4x4; eigenvalues ascending.
pub fn herm_eigen4(m: &M4) -> (Vector4<f64>, M4) {
    let se = m.symmetric_eigen();
    sort_eigen4(se.eigenvalues, se.eigenvectors)
}

fn sort_eigen2(vals: Vector2<f64>, vecs: M2) -> (Vector2<f64>, M2) {
    let mut idx = [0usize, 1];
    idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    let mut sv = Vector2::zeros();
    let mut sm = M2::zeros();
    for (k, &i) in idx.iter().enumerate() {
        sv[k] = vals[i];
        sm.set_column(k, &vecs.column(i));
    }
    (sv, sm)
}

fn sort_eigen4(vals: Vector4<f64>, vecs: M4) -> (Vector4<f64>, M4) {
    let mut idx = [0usize, 1, 2, 3];
    idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    let mut sv = Vector4::zeros();
    let mut sm = M4::zeros();
    for (k, &i) in idx.iter().enumerate() {
        sv[k] = vals[i];
        sm.set_column(k, &vecs.column(i));
    }
    (sv, sm)
}

/// Rebuild sum_k f(lambda_k) v_k v_k† from an eigendecomposition.
pub fn rebuild4(vals: &Vector4<f64>, vecs: &M4, f: impl Fn(f64) -> f64) -> M4 {
    let mut out = M4::zeros();
    for k in 0..4 {
        let v = vecs.column(k);
        out += (v * v.adjoint()) * c(f(vals[k]));
    }
    out
}

/// Square root of a Hermitian PSD matrix. Eigenvalues in [-clip, 0) are
/// treated as zero; anything below -clip is rejected.
pub fn herm_sqrt4(m: &M4, clip: f64) -> Result<M4> {
    let (vals, vecs) = herm_eigen4(m);
    if vals[0] < -clip {
        return Err(Error::invalid(format!(
            "matrix is not positive semidefinite (min eigenvalue {:.3e})",
            vals[0]
        )));
    }
    Ok(rebuild4(&vals, &vecs, |x| x.max(0.0).sqrt()))
}

/// Inverse square root of a Hermitian positive-definite 2x2.
pub fn herm_inv_sqrt2(m: &M2) -> Result<M2> {
    let (vals, vecs) = herm_eigen2(m);
    if vals[0] <= 1e-14 {
        return Err(Error::Numerical(format!(
            "matrix is numerically singular (min eigenvalue {:.3e})",
            vals[0]
        )));
    }
    let mut out = M2::zeros();
    for k in 0..2 {
        let v = vecs.column(k);
        out += (v * v.adjoint()) * c(1.0 / vals[k].sqrt());
    }
    Ok(out)
}

pub fn min_eigval4(m: &M4) -> f64 {
    herm_eigen4(m).0[0]
}

pub fn frobenius2(m: &M2) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn frobenius4(m: &M4) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn random_hermitian4(seed: u64) -> M4 {
        // xorshift-style fill; only needs to be reproducible, not high quality
        let mut s = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1);
        let mut next = move || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let mut m = M4::zeros();
        for i in 0..4 {
            for j in 0..4 {
                m[(i, j)] = C64::new(next(), next());
            }
        }
        hermitize4(&m)
    }

    #[test]
    fn complex_hermitian_eigen_reconstructs_input() {
        for seed in 1..20u64 {
            let m = random_hermitian4(seed);
            let (vals, vecs) = herm_eigen4(&m);
            let rebuilt = rebuild4(&vals, &vecs, |x| x);
            assert!(frobenius4(&(rebuilt - m)) < 1e-10, "seed {seed}");
            assert!(vals[0] <= vals[1] && vals[1] <= vals[2] && vals[2] <= vals[3]);
            // eigenvectors orthonormal
            let g = vecs.adjoint() * vecs;
            assert!(frobenius4(&(g - M4::identity())) < 1e-10);
        }
    }

    #[test]
    fn sqrt_of_psd_squares_back() {
        let m = {
            let a = random_hermitian4(7);
            a * a // PSD by construction
        };
        let r = herm_sqrt4(&hermitize4(&m), 1e-12).unwrap();
        assert!(frobenius4(&(r * r - m)) < 1e-9);
    }

    #[test]
    fn inv_sqrt2_inverts() {
        let m = M2::new(c(2.0), C64::new(0.3, 0.1), C64::new(0.3, -0.1), c(1.0));
        let r = herm_inv_sqrt2(&m).unwrap();
        let should_be_eye = r * m * r;
        assert_abs_diff_eq!(
            frobenius2(&(should_be_eye - M2::identity())),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn inv_sqrt2_rejects_singular() {
        let m = M2::new(c(1.0), ZERO, ZERO, ZERO);
        assert!(herm_inv_sqrt2(&m).is_err());
    }
}
