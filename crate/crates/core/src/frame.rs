//! Curvature evaluated in arbitrary orthonormal frames.
//!
//! At a point of a rotationally symmetric metric, pick the orthonormal basis
//! `(e_0, e_1, ..., e_n)` where `e_0` is the radial unit vector and the rest
//! span the sphere fibre. The curvature operator is diagonal in this basis:
//! a 2-plane containing `e_0` has sectional curvature `k0`, a fibre 2-plane
//! has `k1`. For arbitrary orthonormal vectors `u, v` written in this basis,
//! symmetry makes the sectional and Ricci curvatures depend only on the
//! radial components `u_0, v_0`:
//!
//! ```text
//! sec(u, v) = (u_0^2 + v_0^2) k0 + (1 - u_0^2 - v_0^2) k1,
//! Ric(u, u) = (1 + (n-1) u_0^2) k0 + (n-1)(1 - u_0^2) k1.
//! ```
//!
//! The brute-force check (contracting the full `R_{abcd}` tensor against
//! random frames) lives in the test suite; these closed forms are what the
//! laboratory uses.

use crate::error::FlowError;

/// Default tolerance for orthonormality validation.
pub const ORTHONORMAL_TOL: f64 = 1e-10;

/// A set of orthonormal vectors at a point, written in coordinates with
/// respect to the orthonormal basis `(radial, fibre_1, ..., fibre_n)`.
///
/// `vectors[i][0]` is the radial component of the `i`-th vector; the
/// remaining components lie along fibre directions. The set may contain
/// between 1 and `n + 1` vectors of dimension `n + 1`.
#[derive(Debug, Clone)]
pub struct FrameSet {
    /// Vectors in orthonormal-basis coordinates, each of length `dim`.
    pub vectors: Vec<Vec<f64>>,
}

impl FrameSet {
    /// Build a frame set, validating shape only (see [`validate`](Self::validate)
    /// for the metric check).
    pub fn new(vectors: Vec<Vec<f64>>) -> Result<Self, FlowError> {
        if vectors.is_empty() {
            return Err(FlowError::InvalidInput("frame set needs at least one vector".into()));
        }
        let dim = vectors[0].len();
        if dim < 3 {
            return Err(FlowError::InvalidInput(format!(
                "frame vectors live in dimension n+1 >= 3; got {dim}"
            )));
        }
        if vectors.len() > dim {
            return Err(FlowError::InvalidInput(format!(
                "{} vectors cannot be orthonormal in dimension {dim}",
                vectors.len()
            )));
        }
        for (i, v) in vectors.iter().enumerate() {
            if v.len() != dim {
                return Err(FlowError::InvalidInput(format!(
                    "frame vector {i} has length {}, expected {dim}",
                    v.len()
                )));
            }
            if v.iter().any(|c| !c.is_finite()) {
                return Err(FlowError::InvalidInput(format!("frame vector {i} has a non-finite component")));
            }
        }
        Ok(FrameSet { vectors })
    }

    /// Ambient dimension `n + 1`.
    pub fn dim(&self) -> usize {
        self.vectors[0].len()
    }

    /// Number of vectors in the set.
    pub fn count(&self) -> usize {
        self.vectors.len()
    }

    /// Verify pairwise orthonormality within `tol` (Euclidean inner product,
    /// since coordinates are taken in an orthonormal basis).
    pub fn validate(&self, tol: f64) -> Result<(), FlowError> {
        for i in 0..self.count() {
            for j in i..self.count() {
                let dot: f64 =
                    self.vectors[i].iter().zip(&self.vectors[j]).map(|(a, b)| a * b).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                if (dot - expect).abs() > tol {
                    return Err(FlowError::NotOrthonormal {
                        detail: format!(
                            "<v{i}, v{j}> = {dot:.3e}, expected {expect} within {tol:.1e}"
                        ),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Sectional curvature of the plane spanned by frame vectors `i` and `j`,
/// given the two curvature generators at the point.
///
/// Fails with [`FlowError::NotOrthonormal`] when the pair is not orthonormal
/// within [`ORTHONORMAL_TOL`], and with [`FlowError::InvalidInput`] when
/// `i == j` or an index is out of range.
pub fn frame_sectional(k0: f64, k1: f64, frame: &FrameSet, i: usize, j: usize) -> Result<f64, FlowError> {
    if i == j {
        return Err(FlowError::InvalidInput("sectional curvature needs two distinct vectors".into()));
    }
    let count = frame.count();
    if i >= count || j >= count {
        return Err(FlowError::InvalidInput(format!(
            "frame indices ({i}, {j}) out of range for {count} vectors"
        )));
    }
    let pair = FrameSet { vectors: vec![frame.vectors[i].clone(), frame.vectors[j].clone()] };
    pair.validate(ORTHONORMAL_TOL)?;
    let ui0 = frame.vectors[i][0];
    let uj0 = frame.vectors[j][0];
    let radial_weight = ui0 * ui0 + uj0 * uj0;
    Ok(radial_weight * k0 + (1.0 - radial_weight) * k1)
}

/// Ricci curvature `Ric(u_i, u_i)` for frame vector `i`, given the curvature
/// generators and the fibre dimension `n = dim - 1`.
pub fn frame_ricci(k0: f64, k1: f64, frame: &FrameSet, i: usize) -> Result<f64, FlowError> {
    if i >= frame.count() {
        return Err(FlowError::InvalidInput(format!(
            "frame index {i} out of range for {} vectors",
            frame.count()
        )));
    }
    let single = FrameSet { vectors: vec![frame.vectors[i].clone()] };
    single.validate(ORTHONORMAL_TOL)?;
    let nf = (frame.dim() - 1) as f64;
    let eps = frame.vectors[i][0] * frame.vectors[i][0];
    Ok((1.0 + (nf - 1.0) * eps) * k0 + (nf - 1.0) * (1.0 - eps) * k1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_frames_recover_generators() {
        // e_0, e_1 orthonormal axis vectors in dimension 3 (n = 2).
        let f = FrameSet::new(vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        f.validate(1e-14).unwrap();
        let (k0, k1) = (0.7, -0.2);
        // Radial plane: k0; fibre plane: k1.
        assert!((frame_sectional(k0, k1, &f, 0, 1).unwrap() - k0).abs() < 1e-15);
        assert!((frame_sectional(k0, k1, &f, 1, 2).unwrap() - k1).abs() < 1e-15);
        // Ricci eigenvalues: radial n*k0, spherical k0 + (n-1)k1.
        assert!((frame_ricci(k0, k1, &f, 0).unwrap() - 2.0 * k0).abs() < 1e-15);
        assert!((frame_ricci(k0, k1, &f, 1).unwrap() - (k0 + k1)).abs() < 1e-15);
    }

    #[test]
    fn tilted_plane_interpolates() {
        // Plane spanned by (e_0 + e_1)/sqrt(2) and e_2 in n = 2: the radial
        // weight is 1/2, so sec = (k0 + k1)/2.
        let inv = 1.0 / 2.0_f64.sqrt();
        let f = FrameSet::new(vec![vec![inv, inv, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
        let sec = frame_sectional(2.0, 4.0, &f, 0, 1).unwrap();
        assert!((sec - 3.0).abs() < 1e-14);
    }

    #[test]
    fn non_orthonormal_is_rejected() {
        let f = FrameSet::new(vec![vec![1.0, 0.0, 0.0], vec![0.9, 0.1, 0.0]]).unwrap();
        assert!(matches!(
            frame_sectional(1.0, 1.0, &f, 0, 1),
            Err(FlowError::NotOrthonormal { .. })
        ));
        let g = FrameSet::new(vec![vec![2.0, 0.0, 0.0]]).unwrap();
        assert!(matches!(frame_ricci(1.0, 1.0, &g, 0), Err(FlowError::NotOrthonormal { .. })));
    }

    #[test]
    fn duplicate_index_is_rejected() {
        let f = FrameSet::new(vec![vec![1.0, 0.0, 0.0]]).unwrap();
        assert!(frame_sectional(1.0, 1.0, &f, 0, 0).is_err());
    }
}
