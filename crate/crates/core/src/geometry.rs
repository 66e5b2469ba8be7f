//! Frames, planes, and vector geometry shared by the whole toolkit.
//!
//! The central type is [`GroundFrame`]: an estimated surface plane described
//! by a unit normal and an origin on the surface. Penetration depth is the
//! perpendicular distance below that plane.

use nalgebra::{Matrix3, Point3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// World up direction used to orient fitted plane normals.
pub const WORLD_UP: Vector3<f64> = Vector3::new(0.0, 0.0, 1.0);

/// Minimum triangle area (m^2) below which three contacts are degenerate.
pub const DEGENERACY_AREA: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GeometryError {
    #[error("contact points are collinear or coincident")]
    DegenerateContacts,
}

/// Estimated ground surface plane: unit normal plus an origin on the surface.
///
/// The normal always points away from gravity (`normal.z > 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundFrame {
    pub normal: Vector3<f64>,
    pub origin: Point3<f64>,
}

impl GroundFrame {
    /// Frame for a flat horizontal surface through `origin`.
    pub fn horizontal(origin: Point3<f64>) -> Self {
        Self {
            normal: WORLD_UP,
            origin,
        }
    }
}

fn orient_up(n: Vector3<f64>) -> Vector3<f64> {
    if n.dot(&WORLD_UP) < 0.0 {
        -n
    } else {
        n
    }
}

/// Fits a plane through exactly three contact points.
///
/// The normal is the normalized cross product of the two edge vectors,
/// sign-flipped so it points away from gravity. The origin is the centroid
/// of the three contacts; callers that know the penetrating toe's contact
/// point should follow up with [`apply_contact_correction`].
pub fn fit_plane_three_points(
    c_i: Point3<f64>,
    c_j: Point3<f64>,
    c_k: Point3<f64>,
) -> Result<GroundFrame, GeometryError> {
    let v_ij = c_j - c_i;
    let v_ik = c_k - c_i;
    let cross = v_ij.cross(&v_ik);
    // |cross| is twice the triangle area.
    if cross.norm() <= 2.0 * DEGENERACY_AREA {
        return Err(GeometryError::DegenerateContacts);
    }
    let normal = orient_up(cross.normalize());
    let origin = Point3::from((c_i.coords + c_j.coords + c_k.coords) / 3.0);
    Ok(GroundFrame { normal, origin })
}

/// Fits a plane to three or more points by total least squares
/// (minimizing orthogonal distances).
///
/// For exactly three points this reduces to [`fit_plane_three_points`].
pub fn fit_plane_least_squares(points: &[Point3<f64>]) -> Result<GroundFrame, GeometryError> {
    if points.len() < 3 {
        return Err(GeometryError::DegenerateContacts);
    }
    let n = points.len() as f64;
    let centroid = points.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords) / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p.coords - centroid;
        cov += d * d.transpose();
    }
    let eig = cov.symmetric_eigen();
    // Smallest eigenvector is the plane normal; the two larger eigenvalues
    // must describe a genuinely 2-D spread of points.
    let mut idx: Vec<usize> = (0..3).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let (i_min, i_mid) = (idx[0], idx[1]);
    if eig.eigenvalues[i_mid] <= DEGENERACY_AREA * DEGENERACY_AREA {
        return Err(GeometryError::DegenerateContacts);
    }
    let normal = orient_up(eig.eigenvectors.column(i_min).into_owned().normalize());
    Ok(GroundFrame {
        normal,
        origin: Point3::from(centroid),
    })
}

/// Moves the frame origin to the penetrating toe's first-contact point,
/// keeping the normal. After correction the contact point has depth 0.
pub fn apply_contact_correction(frame: GroundFrame, contact: Point3<f64>) -> GroundFrame {
    GroundFrame {
        normal: frame.normal,
        origin: contact,
    }
}

/// Perpendicular distance of `p` below the frame surface, in meters.
/// Positive below the surface, negative above.
pub fn signed_depth(frame: &GroundFrame, p: Point3<f64>) -> f64 {
    -(p - frame.origin).dot(&frame.normal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn three_point_flat_ground() {
        let f = fit_plane_three_points(
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
        )
        .unwrap();
        assert_relative_eq!(f.normal, Vector3::new(0.0, 0.0, 1.0), epsilon = 1e-12);
    }

    #[test]
    fn three_point_tilted() {
        // v_ij x v_ik = (1,0,1) x (0,1,0) = (-1, 0, 1)
        let f = fit_plane_three_points(
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 1.0),
            Point3::new(0.0, 1.0, 0.0),
        )
        .unwrap();
        let s = 1.0 / 2.0_f64.sqrt();
        assert_relative_eq!(f.normal, Vector3::new(-s, 0.0, s), epsilon = 1e-12);
    }

    #[test]
    fn three_point_collinear_rejected() {
        let r = fit_plane_three_points(
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(2.0, 0.0, 0.0),
        );
        assert_eq!(r, Err(GeometryError::DegenerateContacts));
    }

    #[test]
    fn least_squares_coplanar() {
        let pts = [
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(1.0, 1.0, 0.0),
        ];
        let f = fit_plane_least_squares(&pts).unwrap();
        assert_relative_eq!(f.normal, Vector3::new(0.0, 0.0, 1.0), epsilon = 1e-12);
    }

    #[test]
    fn least_squares_matches_three_point_fit() {
        let pts = [
            Point3::new(0.1, -0.2, 0.05),
            Point3::new(0.4, 0.1, -0.02),
            Point3::new(-0.3, 0.3, 0.11),
        ];
        let exact = fit_plane_three_points(pts[0], pts[1], pts[2]).unwrap();
        let lsq = fit_plane_least_squares(&pts).unwrap();
        assert_relative_eq!(exact.normal, lsq.normal, epsilon = 1e-9);
    }

    #[test]
    fn least_squares_small_perturbation() {
        let pts = [
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(1.0, 1.0, 1e-3),
        ];
        let f = fit_plane_least_squares(&pts).unwrap();
        let angle = f.normal.angle(&Vector3::new(0.0, 0.0, 1.0));
        assert!(angle < 0.2_f64.to_radians(), "angle {angle}");
    }

    #[test]
    fn least_squares_two_points_rejected() {
        let pts = [Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0)];
        assert_eq!(
            fit_plane_least_squares(&pts),
            Err(GeometryError::DegenerateContacts)
        );
    }

    #[test]
    fn contact_correction_is_idempotent_and_zeroes_depth() {
        let frame = GroundFrame::horizontal(Point3::origin());
        let contact = Point3::new(1.0, 1.0, -0.02);
        let corrected = apply_contact_correction(frame, contact);
        assert_eq!(corrected.origin, contact);
        assert_eq!(corrected.normal, frame.normal);
        let twice = apply_contact_correction(corrected, contact);
        assert_eq!(twice, corrected);
        assert_eq!(signed_depth(&corrected, contact), 0.0);
    }

    #[test]
    fn signed_depth_flat_and_tilted() {
        let flat = GroundFrame::horizontal(Point3::origin());
        assert_relative_eq!(
            signed_depth(&flat, Point3::new(0.3, -0.1, -0.02)),
            0.02,
            epsilon = 1e-12
        );
        assert_eq!(signed_depth(&flat, Point3::new(0.5, 0.5, 0.0)), 0.0);

        let s = 1.0 / 2.0_f64.sqrt();
        let tilted = GroundFrame {
            normal: Vector3::new(s, 0.0, s),
            origin: Point3::new(0.2, 0.0, 0.1),
        };
        let p = Point3::from(tilted.origin.coords - 0.02 * tilted.normal);
        assert_relative_eq!(signed_depth(&tilted, p), 0.02, epsilon = 1e-12);
    }

    fn arb_point() -> impl Strategy<Value = Point3<f64>> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64).prop_map(|(x, y, z)| Point3::new(x, y, z))
    }

    proptest! {
        #[test]
        fn plane_fit_order_invariance(a in arb_point(), b in arb_point(), c in arb_point()) {
            if let Ok(f1) = fit_plane_three_points(a, b, c) {
                for (p, q, r) in [(a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)] {
                    let f2 = fit_plane_three_points(p, q, r).unwrap();
                    prop_assert!((f1.normal - f2.normal).norm() < 1e-9);
                }
            }
        }

        #[test]
        fn depth_is_affine_along_normal(
            a in arb_point(), b in arb_point(), c in arb_point(),
            p in arb_point(), t in 0.0..0.5f64,
        ) {
            if let Ok(f) = fit_plane_three_points(a, b, c) {
                let shifted = Point3::from(p.coords - t * f.normal);
                let d0 = signed_depth(&f, p);
                let d1 = signed_depth(&f, shifted);
                prop_assert!((d1 - (d0 + t)).abs() < 1e-9);
            }
        }

        #[test]
        fn rigid_motion_equivariance(
            a in arb_point(), b in arb_point(), c in arb_point(),
            yaw in -3.0..3.0f64, tx in -1.0..1.0f64, ty in -1.0..1.0f64, tz in -1.0..1.0f64,
        ) {
            // Rotation about world up keeps the orientation convention valid.
            let rot = nalgebra::Rotation3::from_axis_angle(&Vector3::z_axis(), yaw);
            let tr = Vector3::new(tx, ty, tz);
            let m = |p: Point3<f64>| Point3::from(rot * p.coords + tr);
            if let Ok(f1) = fit_plane_three_points(a, b, c) {
                let f2 = fit_plane_three_points(m(a), m(b), m(c)).unwrap();
                prop_assert!((rot * f1.normal - f2.normal).norm() < 1e-9);
                prop_assert!((m(f1.origin) - f2.origin).norm() < 1e-9);
            }
        }
    }
}
