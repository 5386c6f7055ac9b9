use nalgebra::{Matrix3, Matrix4, Point3, Rotation3, Vector3};

use crate::wire::Matrix4f;

/// Rigid 4×4 homogeneous transform. Camera-to-world unless stated otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose(pub Matrix4<f64>);

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Pose(Matrix4::identity())
    }

    pub fn from_parts(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&translation);
        Pose(m)
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self::from_parts(Matrix3::identity(), t)
    }

    /// Camera looking along +z with x right and y down, turned by `yaw` about
    /// the y axis then tilted by `pitch` about its own x axis (radians).
    pub fn from_yaw_pitch(position: Vector3<f64>, yaw: f64, pitch: f64) -> Self {
        let r =
            Rotation3::from_axis_angle(&Vector3::y_axis(), yaw) * Rotation3::from_axis_angle(&Vector3::x_axis(), pitch);
        Self::from_parts(*r.matrix(), position)
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        self.0.fixed_view::<3, 3>(0, 0).into_owned()
    }

    pub fn translation(&self) -> Vector3<f64> {
        self.0.fixed_view::<3, 1>(0, 3).into_owned()
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose(self.0 * other.0)
    }

    /// Rigid inverse (transpose of the rotation block).
    pub fn inverse(&self) -> Pose {
        let rt = self.rotation().transpose();
        Self::from_parts(rt, -(rt * self.translation()))
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.0.transform_point(&Point3::from(*p)).coords
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation() * v
    }

    /// Orthonormal rotation with determinant +1 and a homogeneous bottom row.
    pub fn is_rigid(&self, tol: f64) -> bool {
        let r = self.rotation();
        let bottom_ok = (self.0[(3, 0)]).abs() <= tol
            && (self.0[(3, 1)]).abs() <= tol
            && (self.0[(3, 2)]).abs() <= tol
            && (self.0[(3, 3)] - 1.0).abs() <= tol;
        bottom_ok
            && (r.transpose() * r - Matrix3::identity()).abs().max() <= tol
            && (r.determinant() - 1.0).abs() <= tol
    }

    pub fn to_wire(&self) -> Matrix4f {
        std::array::from_fn(|i| self.0[(i / 4, i % 4)] as f32)
    }

    pub fn from_wire(m: &Matrix4f) -> Pose {
        Pose(Matrix4::from_fn(|r, c| m[r * 4 + c] as f64))
    }

    pub fn to_row_major(&self) -> [f64; 16] {
        std::array::from_fn(|i| self.0[(i / 4, i % 4)])
    }

    pub fn from_row_major(m: &[f64; 16]) -> Pose {
        Pose(Matrix4::from_fn(|r, c| m[r * 4 + c]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_pose() -> impl Strategy<Value = Pose> {
        (-3.0f64..3.0, -1.5f64..1.5, -3.0f64..3.0, prop::array::uniform3(-5.0f64..5.0)).prop_map(|(a, b, c, t)| {
            let r = Rotation3::from_euler_angles(a, b, c);
            Pose::from_parts(*r.matrix(), Vector3::from(t))
        })
    }

    proptest! {
        #[test]
        fn composition_is_associative(a in arb_pose(), b in arb_pose(), c in arb_pose()) {
            let left = a.compose(&b).compose(&c);
            let right = a.compose(&b.compose(&c));
            prop_assert!((left.0 - right.0).abs().max() < 1e-9);
        }

        #[test]
        fn inverse_undoes_pose(a in arb_pose(), p in prop::array::uniform3(-10.0f64..10.0)) {
            let p = Vector3::from(p);
            let back = a.inverse().transform_point(&a.transform_point(&p));
            prop_assert!((back - p).norm() < 1e-9);
            prop_assert!(a.is_rigid(1e-9));
        }
    }

    #[test]
    fn wire_round_trip_keeps_rigidity() {
        let p = Pose::from_yaw_pitch(Vector3::new(0.1, -0.2, 0.3), 0.4, -0.1);
        let back = Pose::from_wire(&p.to_wire());
        assert!(back.is_rigid(1e-4));
        assert!((back.0 - p.0).abs().max() < 1e-6);
        assert!(crate::wire::validate_pose(&p.to_wire()).is_ok());
    }

    #[test]
    fn yaw_turns_forward_axis() {
        let p = Pose::from_yaw_pitch(Vector3::zeros(), std::f64::consts::FRAC_PI_2, 0.0);
        let fwd = p.transform_vector(&Vector3::z());
        assert!((fwd - Vector3::x()).norm() < 1e-12);
    }
}
