//! Simulated 6-axis arm (ABB IRB120 geometry): DH forward chain, damped
//! least-squares inverse kinematics, Cartesian-to-joint trajectory transfer
//! at the controller rate, and pose replay at the IMU rate.

use crate::math::{mat4_mul, mat4_rotation, mat4_translation, solve6, Mat4, Quat, Vec3, MAT4_IDENTITY};
use crate::synth::CartesianTrajectory;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Controller-side joint trajectory rate.
pub const DEFAULT_JOINT_RATE_HZ: f64 = 42.0;

const IK_DAMPING: f64 = 0.01;
const IK_STEP_CLAMP_RAD: f64 = 0.1;
const IK_MAX_ITERS: usize = 500;
const IK_POS_TOL_M: f64 = 1e-5;
const IK_ROT_TOL_RAD: f64 = 1e-4;
/// Joints may be clamped onto a limit when within this slack of it.
const LIMIT_SLACK_RAD: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum KinError {
    #[error("joint {joint} at {value:.4} rad outside limits [{lo:.4}, {hi:.4}]")]
    JointLimit { joint: usize, value: f64, lo: f64, hi: f64 },
    #[error("target position norm {norm:.3} m exceeds reach {max:.3} m")]
    Unreachable { norm: f64, max: f64 },
    #[error("no convergence after {iters} iterations (pos err {pos_err:.2e} m, rot err {rot_err:.2e} rad)")]
    NoConvergence { iters: usize, pos_err: f64, rot_err: f64 },
    #[error("planning failed at trajectory index {index}: {source}")]
    PlanningFailed {
        index: usize,
        #[source]
        source: Box<KinError>,
    },
    #[error("invalid input: {0}")]
    BadInput(String),
}

/// One standard Denavit-Hartenberg row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DhRow {
    pub a: f64,
    pub alpha: f64,
    pub d: f64,
    pub theta_offset: f64,
}

/// Serial 6R arm description: DH rows plus joint limits and rated reach.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotModel {
    dh_rows: [DhRow; 6],
    joint_limits: [(f64, f64); 6],
    max_reach_m: f64,
}

impl RobotModel {
    pub fn new(
        dh_rows: [DhRow; 6],
        joint_limits: [(f64, f64); 6],
        max_reach_m: f64,
    ) -> Result<Self, KinError> {
        for (i, (lo, hi)) in joint_limits.iter().enumerate() {
            if !(lo < hi) {
                return Err(KinError::BadInput(format!("joint {i} limits [{lo}, {hi}] inverted")));
            }
        }
        if !(max_reach_m > 0.0) {
            return Err(KinError::BadInput(format!("max reach {max_reach_m} not positive")));
        }
        Ok(RobotModel { dh_rows, joint_limits, max_reach_m })
    }

    pub fn dh_rows(&self) -> &[DhRow; 6] {
        &self.dh_rows
    }

    pub fn joint_limits(&self) -> &[(f64, f64); 6] {
        &self.joint_limits
    }

    pub fn max_reach_m(&self) -> f64 {
        self.max_reach_m
    }

    pub fn check_limits(&self, joints: &[f64; 6]) -> Result<(), KinError> {
        for (i, &q) in joints.iter().enumerate() {
            let (lo, hi) = self.joint_limits[i];
            if q < lo || q > hi {
                return Err(KinError::JointLimit { joint: i, value: q, lo, hi });
            }
        }
        Ok(())
    }
}

/// Rigid-body pose: position plus unit-quaternion orientation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vec3,
    pub orientation: Quat,
}

impl Pose {
    pub fn new(position: Vec3, orientation: Quat) -> Self {
        Pose { position, orientation: orientation.normalized() }
    }
}

/// Watch-mount wrist adjustment, degrees about each tool axis. Intrinsic
/// composition in the order Y, Z, X (configurable by constructing the
/// quaternion differently if another convention is needed).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MountRotation {
    pub rx_deg: f64,
    pub ry_deg: f64,
    pub rz_deg: f64,
}

impl Default for MountRotation {
    fn default() -> Self {
        MountRotation { rx_deg: 20.0, ry_deg: 60.0, rz_deg: 5.0 }
    }
}

impl MountRotation {
    pub fn identity() -> Self {
        MountRotation { rx_deg: 0.0, ry_deg: 0.0, rz_deg: 0.0 }
    }

    pub fn validate(&self) -> Result<(), KinError> {
        for (name, v) in [("rx", self.rx_deg), ("ry", self.ry_deg), ("rz", self.rz_deg)] {
            if !(-180.0..=180.0).contains(&v) {
                return Err(KinError::BadInput(format!("mount {name} {v} deg outside [-180, 180]")));
            }
        }
        Ok(())
    }

    /// Intrinsic Y -> Z -> X composition.
    pub fn to_quat(&self) -> Quat {
        let qy = Quat::from_axis_angle(Vec3::new(0.0, 1.0, 0.0), self.ry_deg.to_radians());
        let qz = Quat::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), self.rz_deg.to_radians());
        let qx = Quat::from_axis_angle(Vec3::new(1.0, 0.0, 0.0), self.rx_deg.to_radians());
        qy.mul(qz).mul(qx)
    }
}

/// Time-stamped joint-angle sequence at a fixed rate.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTrajectory {
    rate_hz: f64,
    frames: Vec<[f64; 6]>,
}

impl JointTrajectory {
    /// Maximum joint step between consecutive frames (continuity at 42 Hz).
    pub const MAX_STEP_RAD: f64 = 0.2;

    pub fn new(rate_hz: f64, frames: Vec<[f64; 6]>) -> Result<Self, KinError> {
        if frames.is_empty() {
            return Err(KinError::BadInput("joint trajectory needs at least one frame".into()));
        }
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(KinError::BadInput(format!("bad joint rate {rate_hz}")));
        }
        for (i, w) in frames.windows(2).enumerate() {
            for j in 0..6 {
                let step = (w[1][j] - w[0][j]).abs();
                if step >= Self::MAX_STEP_RAD {
                    return Err(KinError::BadInput(format!(
                        "joint {j} steps {step:.3} rad between frames {i} and {}",
                        i + 1
                    )));
                }
            }
        }
        Ok(JointTrajectory { rate_hz, frames })
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn frames(&self) -> &[[f64; 6]] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.frames.len() as f64 / self.rate_hz
    }
}

/// Placement of the writing task in the robot workspace: plane centre, the
/// fixed tool orientation the digits are written with (before the watch
/// mount is composed on), and the posture that seeds the first IK solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WritingSetup {
    pub center: Vec3,
    pub base_orientation: Quat,
    pub home_joints: [f64; 6],
}

impl Default for WritingSetup {
    fn default() -> Self {
        WritingSetup {
            center: Vec3::new(0.37, 0.0, 0.40),
            // Tool z toward the plane (+x in the base frame), tool x down.
            // Paired with the home posture below the wrist works mid-range
            // across the whole mount and wrist-angle envelope.
            base_orientation: Quat::from_axis_angle(
                Vec3::new(0.0, 1.0, 0.0),
                std::f64::consts::FRAC_PI_2,
            ),
            home_joints: [0.0, 0.15, 0.61, -0.93, 0.48, -2.10],
        }
    }
}

/// Datasheet-derived IRB120 model: d1=0.290, a2=0.270, a3=0.070, d4=0.302,
/// d6=0.072 with the standard alpha column, rated reach 0.58 m.
pub fn irb120_model() -> RobotModel {
    use std::f64::consts::FRAC_PI_2;
    let deg = |v: f64| v.to_radians();
    RobotModel::new(
        [
            DhRow { a: 0.0, alpha: -FRAC_PI_2, d: 0.290, theta_offset: 0.0 },
            DhRow { a: 0.270, alpha: 0.0, d: 0.0, theta_offset: -FRAC_PI_2 },
            DhRow { a: 0.070, alpha: -FRAC_PI_2, d: 0.0, theta_offset: 0.0 },
            DhRow { a: 0.0, alpha: FRAC_PI_2, d: 0.302, theta_offset: 0.0 },
            DhRow { a: 0.0, alpha: -FRAC_PI_2, d: 0.0, theta_offset: 0.0 },
            DhRow { a: 0.0, alpha: 0.0, d: 0.072, theta_offset: 0.0 },
        ],
        [
            (deg(-165.0), deg(165.0)),
            (deg(-110.0), deg(110.0)),
            (deg(-110.0), deg(70.0)),
            (deg(-160.0), deg(160.0)),
            (deg(-120.0), deg(120.0)),
            (deg(-400.0), deg(400.0)),
        ],
        0.58,
    )
    .expect("static model is valid")
}

fn dh_matrix(row: &DhRow, q: f64) -> Mat4 {
    let theta = q + row.theta_offset;
    let (st, ct) = theta.sin_cos();
    let (sa, ca) = row.alpha.sin_cos();
    [
        [ct, -st * ca, st * sa, row.a * ct],
        [st, ct * ca, -ct * sa, row.a * st],
        [0.0, sa, ca, row.d],
        [0.0, 0.0, 0.0, 1.0],
    ]
}

/// Joint origins and z axes for every frame 0..=6 plus the tool transform;
/// feeds both FK and the geometric Jacobian.
struct Chain {
    origins: [Vec3; 7],
    z_axes: [Vec3; 7],
    tool: Mat4,
}

fn chain(model: &RobotModel, joints: &[f64; 6]) -> Chain {
    let mut t = MAT4_IDENTITY;
    let mut origins = [Vec3::ZERO; 7];
    let mut z_axes = [Vec3::ZERO; 7];
    origins[0] = Vec3::ZERO;
    z_axes[0] = Vec3::new(0.0, 0.0, 1.0);
    for i in 0..6 {
        t = mat4_mul(&t, &dh_matrix(&model.dh_rows[i], joints[i]));
        origins[i + 1] = mat4_translation(&t);
        z_axes[i + 1] = Vec3::new(t[0][2], t[1][2], t[2][2]);
    }
    Chain { origins, z_axes, tool: t }
}

fn chain_pose(c: &Chain) -> Pose {
    Pose::new(mat4_translation(&c.tool), Quat::from_rotation_matrix(&mat4_rotation(&c.tool)))
}

/// Forward kinematics without joint-limit validation.
pub fn fk_unchecked(model: &RobotModel, joints: &[f64; 6]) -> Pose {
    chain_pose(&chain(model, joints))
}

/// Forward kinematics; joints must be within limits.
pub fn fk(model: &RobotModel, joints: &[f64; 6]) -> Result<Pose, KinError> {
    model.check_limits(joints)?;
    Ok(fk_unchecked(model, joints))
}

/// Position of the wrist centre (frame-4 origin); the rated 0.58 m reach is
/// measured from the shoulder (frame-1 origin) to here.
fn wrist_center(model: &RobotModel, joints: &[f64; 6]) -> (Vec3, Vec3) {
    let c = chain(model, joints);
    (c.origins[1], c.origins[4])
}

/// Numerically computed maximum shoulder-to-wrist reach over the elbow range.
pub fn computed_max_reach(model: &RobotModel) -> f64 {
    let (lo, hi) = model.joint_limits[2];
    let steps = 2000;
    let mut best: f64 = 0.0;
    for k in 0..=steps {
        let q3 = lo + (hi - lo) * k as f64 / steps as f64;
        let (shoulder, wrist) = wrist_center(model, &[0.0, 0.0, q3, 0.0, 0.0, 0.0]);
        best = best.max((wrist - shoulder).norm());
    }
    best
}

/// Geometric Jacobian (world frame), columns = joints, rows = [v; w].
fn jacobian(c: &Chain) -> [[f64; 6]; 6] {
    let p_e = mat4_translation(&c.tool);
    let mut j = [[0.0; 6]; 6];
    for col in 0..6 {
        let z = c.z_axes[col];
        let lin = z.cross(p_e - c.origins[col]);
        j[0][col] = lin.x;
        j[1][col] = lin.y;
        j[2][col] = lin.z;
        j[3][col] = z.x;
        j[4][col] = z.y;
        j[5][col] = z.z;
    }
    j
}

/// Damped least-squares inverse kinematics from a seed posture.
///
/// Iterates `dq = (J^T J + lambda^2 I)^-1 J^T e` with a per-iteration step
/// clamp; converges when the FK position error drops under 1e-5 m and the
/// orientation error under 1e-4 rad.
pub fn ik(model: &RobotModel, target: &Pose, seed_joints: &[f64; 6]) -> Result<[f64; 6], KinError> {
    // Rated reach is measured shoulder to wrist centre; place the target's
    // wrist centre by backing the tool offset out along the target tool z.
    let tool_z = target.orientation.rotate(Vec3::new(0.0, 0.0, 1.0));
    let wrist_target = target.position - tool_z * model.dh_rows[5].d;
    let shoulder = chain(model, &[0.0; 6]).origins[1];
    let norm = (wrist_target - shoulder).norm();
    if norm > model.max_reach_m {
        return Err(KinError::Unreachable { norm, max: model.max_reach_m });
    }
    model.check_limits(seed_joints)?;

    let mut q = *seed_joints;
    let mut pos_err = f64::INFINITY;
    let mut rot_err = f64::INFINITY;
    for _ in 0..IK_MAX_ITERS {
        let c = chain(model, &q);
        let pose = chain_pose(&c);
        let dp = target.position - pose.position;
        let dw = pose.orientation.rotation_to(target.orientation);
        pos_err = dp.norm();
        rot_err = pose.orientation.angle_to(target.orientation);
        if pos_err < IK_POS_TOL_M && rot_err < IK_ROT_TOL_RAD {
            return finish_ik(model, q);
        }

        let j = jacobian(&c);
        let e = [dp.x, dp.y, dp.z, dw.x, dw.y, dw.z];
        // A = J^T J + lambda^2 I, b = J^T e
        let mut a = [[0.0; 6]; 6];
        let mut b = [0.0; 6];
        for r in 0..6 {
            for cix in 0..6 {
                let mut acc = 0.0;
                for k in 0..6 {
                    acc += j[k][r] * j[k][cix];
                }
                a[r][cix] = acc;
            }
            a[r][r] += IK_DAMPING * IK_DAMPING;
            b[r] = (0..6).map(|k| j[k][r] * e[k]).sum();
        }
        let mut dq = solve6(&a, &b).ok_or(KinError::NoConvergence {
            iters: IK_MAX_ITERS,
            pos_err,
            rot_err,
        })?;
        let max_step = dq.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if max_step > IK_STEP_CLAMP_RAD {
            let scale = IK_STEP_CLAMP_RAD / max_step;
            for v in &mut dq {
                *v *= scale;
            }
        }
        for (qi, di) in q.iter_mut().zip(&dq) {
            *qi += di;
        }
    }
    Err(KinError::NoConvergence { iters: IK_MAX_ITERS, pos_err, rot_err })
}

fn finish_ik(model: &RobotModel, mut q: [f64; 6]) -> Result<[f64; 6], KinError> {
    for (i, qi) in q.iter_mut().enumerate() {
        let (lo, hi) = model.joint_limits[i];
        if *qi < lo {
            if lo - *qi <= LIMIT_SLACK_RAD {
                *qi = lo;
            } else {
                return Err(KinError::JointLimit { joint: i, value: *qi, lo, hi });
            }
        } else if *qi > hi {
            if *qi - hi <= LIMIT_SLACK_RAD {
                *qi = hi;
            } else {
                return Err(KinError::JointLimit { joint: i, value: *qi, lo, hi });
            }
        }
    }
    Ok(q)
}

/// Tool orientation a plan targets for a given mount adjustment.
pub fn planned_tool_orientation(setup: &WritingSetup, mount: &MountRotation) -> Quat {
    setup.base_orientation.mul(mount.to_quat())
}

/// The mirrored wrist branch reaching the same region: q4 and q6 unwound by
/// a half turn, q5 negated.
fn wrist_flip(q: &[f64; 6]) -> [f64; 6] {
    use std::f64::consts::PI;
    let unwind = |v: f64| if v > 0.0 { v - PI } else { v + PI };
    [q[0], q[1], q[2], unwind(q[3]), -q[4], unwind(q[5])]
}

fn limit_margin(model: &RobotModel, q: &[f64; 6]) -> f64 {
    q.iter()
        .zip(model.joint_limits())
        .map(|(&v, &(lo, hi))| (v - lo).min(hi - v))
        .fold(f64::INFINITY, f64::min)
}

/// Transfer a 200 Hz Cartesian path to joint space at `out_rate_hz`:
/// resample the path, fix the tool orientation to the writing orientation
/// composed with the mount rotation, and solve IK point by point, each
/// solve seeded with the previous frame (the first from the home posture).
pub fn plan_joint_trajectory(
    model: &RobotModel,
    traj: &CartesianTrajectory,
    mount: &MountRotation,
    out_rate_hz: f64,
) -> Result<JointTrajectory, KinError> {
    plan_joint_trajectory_with(model, &WritingSetup::default(), traj, mount, out_rate_hz)
}

pub fn plan_joint_trajectory_with(
    model: &RobotModel,
    setup: &WritingSetup,
    traj: &CartesianTrajectory,
    mount: &MountRotation,
    out_rate_hz: f64,
) -> Result<JointTrajectory, KinError> {
    if (traj.rate_hz() - crate::synth::SYNTH_RATE_HZ).abs() > 1e-9 {
        return Err(KinError::BadInput(format!(
            "expected a {} Hz Cartesian trajectory, got {} Hz",
            crate::synth::SYNTH_RATE_HZ,
            traj.rate_hz()
        )));
    }
    if !(out_rate_hz.is_finite() && out_rate_hz > 0.0) {
        return Err(KinError::BadInput(format!("bad output rate {out_rate_hz}")));
    }
    mount.validate()?;

    let n_out = (traj.len() as f64 * out_rate_hz / traj.rate_hz()).round() as usize;
    let path = traj
        .resample(n_out.max(2))
        .map_err(|e| KinError::BadInput(format!("path resample failed: {e}")))?;

    let orientation = planned_tool_orientation(setup, mount);
    // The first frame decides the wrist branch for the whole plan; try the
    // home posture and its wrist-flipped mirror, keep the roomier solution.
    let first_target = Pose::new(setup.center + path.points()[0], orientation);
    let mut seed: Option<[f64; 6]> = None;
    let mut seed_margin = f64::NEG_INFINITY;
    let mut first_err: Option<KinError> = None;
    for candidate in [setup.home_joints, wrist_flip(&setup.home_joints)] {
        match ik(model, &first_target, &candidate) {
            Ok(sol) => {
                let margin = limit_margin(model, &sol);
                if margin > seed_margin {
                    seed_margin = margin;
                    seed = Some(sol);
                }
            }
            Err(e) => first_err = Some(e),
        }
    }
    let mut seed = seed.ok_or_else(|| KinError::PlanningFailed {
        index: 0,
        source: Box::new(first_err.expect("at least one candidate attempted")),
    })?;

    let mut frames = Vec::with_capacity(path.len());
    for (index, p) in path.points().iter().enumerate() {
        let target = Pose::new(setup.center + *p, orientation);
        let q = ik(model, &target, &seed)
            .map_err(|e| KinError::PlanningFailed { index, source: Box::new(e) })?;
        seed = q;
        frames.push(q);
    }
    JointTrajectory::new(path.rate_hz(), frames)
}

/// Interpolate a joint trajectory to the IMU rate (cubic Hermite per joint)
/// and run FK per frame: the pose sequence the wrist-mounted sensor rides.
pub fn replay(
    model: &RobotModel,
    jt: &JointTrajectory,
    imu_rate_hz: f64,
) -> Result<Vec<Pose>, KinError> {
    if !(imu_rate_hz.is_finite() && imu_rate_hz > 0.0) {
        return Err(KinError::BadInput(format!("bad IMU rate {imu_rate_hz}")));
    }
    let frames = jt.frames();
    let n_out = (jt.duration_s() * imu_rate_hz).round() as usize;
    let n_out = n_out.max(1);
    let last = (frames.len() - 1) as f64;

    let mut poses = Vec::with_capacity(n_out);
    for k in 0..n_out {
        let u = (k as f64 / imu_rate_hz * jt.rate_hz()).min(last);
        let i = (u.floor() as usize).min(frames.len().saturating_sub(2));
        let q = if frames.len() == 1 {
            frames[0]
        } else {
            let t = u - i as f64;
            let mut out = [0.0; 6];
            for (j, slot) in out.iter_mut().enumerate() {
                let p1 = frames[i][j];
                let p2 = frames[i + 1][j];
                let m1 = if i == 0 {
                    frames[1][j] - frames[0][j]
                } else {
                    0.5 * (frames[i + 1][j] - frames[i - 1][j])
                };
                let m2 = if i + 2 >= frames.len() {
                    frames[i + 1][j] - frames[i][j]
                } else {
                    0.5 * (frames[i + 2][j] - frames[i][j])
                };
                let t2 = t * t;
                let t3 = t2 * t;
                *slot = (2.0 * t3 - 3.0 * t2 + 1.0) * p1
                    + (t3 - 2.0 * t2 + t) * m1
                    + (-2.0 * t3 + 3.0 * t2) * p2
                    + (t3 - t2) * m2;
            }
            out
        };
        // Planned frames are limit-checked; interpolation between valid
        // frames may touch a limit exactly, so skip re-validation here.
        poses.push(fk_unchecked(model, &q));
    }
    Ok(poses)
}
