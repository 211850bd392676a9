//! Domain types shared by every module: Gaussian primitives, scenes,
//! cameras, images, and dense numeric maps.

use nalgebra::{Matrix3, Matrix4, Vector3};

use crate::error::{Error, Result};

/// One anisotropic 3D Gaussian primitive.
///
/// Scale is stored as the natural log of the per-axis standard deviation and
/// opacity as a logit, matching the 3DGS PLY convention and keeping both
/// parameters unconstrained for the optimizer. Color is the view-independent
/// RGB triplet (degree-0 spherical-harmonic equivalent).
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian3D {
    /// World-space mean.
    pub position: Vector3<f64>,
    /// Unit quaternion, wxyz order.
    pub rotation: [f64; 4],
    /// ln of per-axis standard deviation in world units.
    pub log_scale: Vector3<f64>,
    /// Sigmoid-activated to opacity in (0, 1).
    pub opacity_logit: f64,
    /// RGB in [0, 1].
    pub color: Vector3<f64>,
}

impl Gaussian3D {
    /// Activated opacity in (0, 1).
    pub fn opacity(&self) -> f64 {
        sigmoid(self.opacity_logit)
    }

    /// Per-axis standard deviation in world units.
    pub fn scale(&self) -> Vector3<f64> {
        self.log_scale.map(f64::exp)
    }
}

/// Ordered collection of Gaussians plus the per-Gaussian scale snapshot taken
/// at construction. The snapshot is the reference for scale-band clamping and
/// is never mutated afterwards; densification assigns new snapshots to the
/// Gaussians it creates.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianScene {
    pub gaussians: Vec<Gaussian3D>,
    initial_scale: Vec<Vector3<f64>>,
    scene_extent: f64,
}

impl GaussianScene {
    pub fn new(gaussians: Vec<Gaussian3D>) -> Self {
        let initial_scale = gaussians.iter().map(Gaussian3D::scale).collect();
        let scene_extent = bounding_radius(&gaussians);
        Self {
            gaussians,
            initial_scale,
            scene_extent,
        }
    }

    pub fn len(&self) -> usize {
        self.gaussians.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaussians.is_empty()
    }

    /// exp(log_scale) captured when the Gaussian entered the scene.
    pub fn initial_scale(&self, index: usize) -> Vector3<f64> {
        self.initial_scale[index]
    }

    pub fn initial_scales(&self) -> &[Vector3<f64>] {
        &self.initial_scale
    }

    /// Radius of the bounding sphere of positions, floored to stay positive
    /// for non-empty scenes.
    pub fn scene_extent(&self) -> f64 {
        self.scene_extent
    }

    /// Rebuilds the Gaussian list while keeping snapshot semantics: surviving
    /// Gaussians keep their snapshot, new ones snapshot their creation scale.
    /// `keep[i]` maps each new slot to `Some(old_index)` or `None` for a
    /// freshly created Gaussian. Used by densification/pruning.
    pub(crate) fn rebuild(&mut self, gaussians: Vec<Gaussian3D>, keep: &[Option<usize>]) {
        assert_eq!(gaussians.len(), keep.len());
        let initial_scale = keep
            .iter()
            .zip(&gaussians)
            .map(|(src, g)| match src {
                Some(old) => self.initial_scale[*old],
                None => g.scale(),
            })
            .collect();
        self.gaussians = gaussians;
        self.initial_scale = initial_scale;
        self.scene_extent = bounding_radius(&self.gaussians);
    }
}

fn bounding_radius(gaussians: &[Gaussian3D]) -> f64 {
    if gaussians.is_empty() {
        return 0.0;
    }
    let mut center = Vector3::zeros();
    for g in gaussians {
        center += g.position;
    }
    center /= gaussians.len() as f64;
    let radius = gaussians
        .iter()
        .map(|g| (g.position - center).norm())
        .fold(0.0, f64::max);
    radius.max(1e-6)
}

/// Pinhole camera: intrinsics in pixels plus a rigid world-to-camera
/// transform. Convention: +z forward, +x right, +y down, pixel centers at
/// integer + 0.5.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraView {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

/// Orthonormality gate applied when a camera is constructed from external
/// numbers (manifests, CLI files).
pub const CAMERA_ORTHONORMALITY_TOLERANCE: f64 = 1e-4;

impl CameraView {
    /// Validates intrinsics and the rigid transform. `world_to_camera` is
    /// row-major.
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
        world_to_camera: [f64; 16],
    ) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0) {
            return Err(Error::CameraInvalid {
                what: format!("fx and fy must be positive, got fx={fx}, fy={fy}"),
            });
        }
        if width == 0 || height == 0 {
            return Err(Error::CameraInvalid {
                what: format!("zero image dimension {width}x{height}"),
            });
        }
        if !(0.0 <= cx && cx < width as f64) || !(0.0 <= cy && cy < height as f64) {
            return Err(Error::CameraInvalid {
                what: format!("principal point ({cx}, {cy}) outside {width}x{height} viewport"),
            });
        }
        if world_to_camera.iter().any(|v| !v.is_finite()) {
            return Err(Error::CameraInvalid {
                what: "non-finite world_to_camera entry".to_string(),
            });
        }
        let m = Matrix4::from_row_slice(&world_to_camera);
        let bottom = [m[(3, 0)], m[(3, 1)], m[(3, 2)], m[(3, 3)]];
        if bottom != [0.0, 0.0, 0.0, 1.0] {
            return Err(Error::CameraInvalid {
                what: format!("last row of world_to_camera must be [0,0,0,1], got {bottom:?}"),
            });
        }
        let rotation = m.fixed_view::<3, 3>(0, 0).into_owned();
        let max_dev = orthonormality_deviation(&rotation);
        if max_dev > CAMERA_ORTHONORMALITY_TOLERANCE {
            return Err(Error::CameraNotOrthonormal {
                max_dev,
                tolerance: CAMERA_ORTHONORMALITY_TOLERANCE,
            });
        }
        let translation = Vector3::new(m[(0, 3)], m[(1, 3)], m[(2, 3)]);
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            rotation,
            translation,
        })
    }

    /// Builds a camera from an explicit rotation/translation pair already
    /// known to be rigid (harness look-at poses).
    pub fn from_parts(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
    ) -> Result<Self> {
        let mut m = [0.0; 16];
        for r in 0..3 {
            for c in 0..3 {
                m[r * 4 + c] = rotation[(r, c)];
            }
            m[r * 4 + 3] = translation[r];
        }
        m[15] = 1.0;
        Self::new(fx, fy, cx, cy, width, height, m)
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// World point to camera space.
    pub fn to_camera(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Row-major 4x4 world-to-camera matrix.
    pub fn world_to_camera(&self) -> [f64; 16] {
        let mut m = [0.0; 16];
        for r in 0..3 {
            for c in 0..3 {
                m[r * 4 + c] = self.rotation[(r, c)];
            }
            m[r * 4 + 3] = self.translation[r];
        }
        m[15] = 1.0;
        m
    }
}

pub(crate) fn orthonormality_deviation(r: &Matrix3<f64>) -> f64 {
    let should_be_identity = r.transpose() * r;
    let mut max_dev: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let target = if i == j { 1.0 } else { 0.0 };
            max_dev = max_dev.max((should_be_identity[(i, j)] - target).abs());
        }
    }
    max_dev
}

/// Row-major floating-point image with values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl ImageBuffer {
    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
        }
    }

    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height * channels {
            return Err(Error::DimensionMismatch {
                context: "image buffer",
                expected_w: width,
                expected_h: height,
                expected_c: channels,
                got_w: data.len(),
                got_h: 1,
                got_c: 1,
            });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "image buffer",
                index,
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[self.index(x, y, c)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f64) {
        let i = self.index(x, y, c);
        self.data[i] = v;
    }

    pub fn same_shape(&self, other: &ImageBuffer) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }
}

/// Row-major dense numeric grid; carries class logits (C channels),
/// probabilities, or scalar maps (1 channel).
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMap {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl DenseMap {
    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
        }
    }

    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height * channels {
            return Err(Error::DimensionMismatch {
                context: "dense map",
                expected_w: width,
                expected_h: height,
                expected_c: channels,
                got_w: data.len(),
                got_h: 1,
                got_c: 1,
            });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "dense map",
                index,
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[self.index(x, y, c)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f64) {
        let i = self.index(x, y, c);
        self.data[i] = v;
    }
}

/// One supervision view: image, camera, and optional per-pixel class logits.
/// Views without logits are treated as fully confident downstream.
#[derive(Debug, Clone)]
pub struct PseudoView {
    pub image: ImageBuffer,
    pub camera: CameraView,
    pub logits: Option<DenseMap>,
}

/// Normalizes to unit length, preserving direction.
pub fn normalize_quaternion(q: [f64; 4]) -> Result<[f64; 4]> {
    let norm = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::DegenerateRotation);
    }
    Ok([q[0] / norm, q[1] / norm, q[2] / norm, q[3] / norm])
}

/// Rotation matrix of a unit quaternion (wxyz).
pub fn quat_to_rotation(q: [f64; 4]) -> Matrix3<f64> {
    let [w, x, y, z] = q;
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

/// World-space covariance R diag(exp(log_scale))^2 R^T. Normalizes the
/// rotation first; errors on a zero-norm quaternion.
pub fn covariance_3d(g: &Gaussian3D) -> Result<Matrix3<f64>> {
    let q = normalize_quaternion(g.rotation)?;
    let r = quat_to_rotation(q);
    let s2 = g.log_scale.map(|v| (2.0 * v).exp());
    let d = Matrix3::from_diagonal(&s2);
    Ok(r * d * r.transpose())
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Inverse of [`sigmoid`] for values strictly inside (0, 1).
#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn gaussian(rotation: [f64; 4], log_scale: [f64; 3]) -> Gaussian3D {
        Gaussian3D {
            position: Vector3::zeros(),
            rotation,
            log_scale: Vector3::from_row_slice(&log_scale),
            opacity_logit: 0.0,
            color: Vector3::new(0.5, 0.5, 0.5),
        }
    }

    #[test]
    fn covariance_identity_quaternion_unit_scale() {
        let cov = covariance_3d(&gaussian([1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0])).unwrap();
        assert_relative_eq!(cov, Matrix3::identity(), epsilon = 1e-12);
    }

    #[test]
    fn covariance_axis_scaling_squares() {
        let cov =
            covariance_3d(&gaussian([1.0, 0.0, 0.0, 0.0], [2f64.ln(), 0.0, 0.0])).unwrap();
        let expected = Matrix3::from_diagonal(&Vector3::new(4.0, 1.0, 1.0));
        assert_relative_eq!(cov, expected, epsilon = 1e-12);
    }

    #[test]
    fn covariance_rotated_ninety_about_z() {
        // Oracle: explicit rotation-matrix multiplication with Rz(90 deg).
        let half = std::f64::consts::FRAC_PI_4;
        let q = [half.cos(), 0.0, 0.0, half.sin()];
        let cov = covariance_3d(&gaussian(q, [2f64.ln(), 0.0, 0.0])).unwrap();

        let rz = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        let d = Matrix3::from_diagonal(&Vector3::new(4.0, 1.0, 1.0));
        let expected = rz * d * rz.transpose();
        assert_relative_eq!(cov, expected, epsilon = 1e-12);
        assert_relative_eq!(
            cov,
            Matrix3::from_diagonal(&Vector3::new(1.0, 4.0, 1.0)),
            epsilon = 1e-12
        );
    }

    #[test]
    fn covariance_zero_quaternion_is_error() {
        let err = covariance_3d(&gaussian([0.0; 4], [0.0; 3])).unwrap_err();
        assert!(err.to_string().contains("degenerate rotation"));
    }

    #[test]
    fn normalize_quaternion_examples() {
        assert_eq!(
            normalize_quaternion([1.0, 0.0, 0.0, 0.0]).unwrap(),
            [1.0, 0.0, 0.0, 0.0]
        );
        assert_eq!(
            normalize_quaternion([2.0, 0.0, 0.0, 0.0]).unwrap(),
            [1.0, 0.0, 0.0, 0.0]
        );
        assert_eq!(
            normalize_quaternion([1.0, 1.0, 1.0, 1.0]).unwrap(),
            [0.5, 0.5, 0.5, 0.5]
        );
        assert!(normalize_quaternion([0.0; 4]).is_err());
    }

    #[test]
    fn quat_rotation_matches_nalgebra() {
        let q = normalize_quaternion([0.9, -0.3, 0.2, 0.1]).unwrap();
        let ours = quat_to_rotation(q);
        let theirs = nalgebra::UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(
            q[0], q[1], q[2], q[3],
        ))
        .to_rotation_matrix()
        .into_inner();
        assert_relative_eq!(ours, theirs, epsilon = 1e-12);
    }

    #[test]
    fn scene_extent_positive_and_snapshot_fixed() {
        let mut g = gaussian([1.0, 0.0, 0.0, 0.0], [0.1, 0.2, 0.3]);
        g.position = Vector3::new(1.0, 0.0, 0.0);
        let mut g2 = g.clone();
        g2.position = Vector3::new(-1.0, 0.0, 0.0);
        let mut scene = GaussianScene::new(vec![g, g2]);
        assert_relative_eq!(scene.scene_extent(), 1.0, epsilon = 1e-12);

        let snap = scene.initial_scale(0);
        scene.gaussians[0].log_scale = Vector3::new(1.0, 1.0, 1.0);
        assert_eq!(scene.initial_scale(0), snap);
    }

    #[test]
    fn camera_rejects_scaled_rotation() {
        let mut m = [0.0; 16];
        for i in 0..3 {
            m[i * 4 + i] = 1.1;
        }
        m[15] = 1.0;
        let err = CameraView::new(100.0, 100.0, 10.0, 10.0, 20, 20, m).unwrap_err();
        assert!(matches!(err, Error::CameraNotOrthonormal { .. }));
    }

    #[test]
    fn camera_rejects_bad_intrinsics() {
        let mut m = [0.0; 16];
        for i in 0..4 {
            m[i * 4 + i] = 1.0;
        }
        assert!(CameraView::new(0.0, 100.0, 10.0, 10.0, 20, 20, m).is_err());
        assert!(CameraView::new(100.0, 100.0, 25.0, 10.0, 20, 20, m).is_err());
    }

    proptest! {
        #[test]
        fn covariance_invariant_to_sign_flip(
            w in -1.0f64..1.0, x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0,
            s0 in -2.0f64..1.0, s1 in -2.0f64..1.0, s2 in -2.0f64..1.0,
        ) {
            prop_assume!(w * w + x * x + y * y + z * z > 1e-6);
            let a = gaussian([w, x, y, z], [s0, s1, s2]);
            let b = gaussian([-w, -x, -y, -z], [s0, s1, s2]);
            prop_assert_eq!(covariance_3d(&a).unwrap(), covariance_3d(&b).unwrap());
        }

        #[test]
        fn covariance_eigenvalues_are_squared_scales(
            w in -1.0f64..1.0, x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0,
            s0 in -2.0f64..1.0, s1 in -2.0f64..1.0, s2 in -2.0f64..1.0,
        ) {
            prop_assume!(w * w + x * x + y * y + z * z > 1e-6);
            let cov = covariance_3d(&gaussian([w, x, y, z], [s0, s1, s2])).unwrap();
            let mut eigen: Vec<f64> = cov.symmetric_eigenvalues().iter().copied().collect();
            let mut expected: Vec<f64> = [s0, s1, s2].iter().map(|v| (2.0 * v).exp()).collect();
            eigen.sort_by(|a, b| a.partial_cmp(b).unwrap());
            expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for (e, x) in eigen.iter().zip(&expected) {
                prop_assert!((e - x).abs() <= 1e-6 * x.abs().max(1e-12));
            }
        }

        #[test]
        fn sigmoid_logit_round_trip(alpha in 0.01f64..=0.99) {
            prop_assert!((sigmoid(logit(alpha)) - alpha).abs() < 1e-7);
        }
    }
}
