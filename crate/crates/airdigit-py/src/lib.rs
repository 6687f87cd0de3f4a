//! Python bindings: the signal types, trajectory synthesis, arm kinematics
//! and the pipeline commands, exposed as one extension module.

use airdigit::imu::Provenance;
use airdigit::math::{Quat, Vec3};
use airdigit::pipeline;
use airdigit::robot::{self, JointTrajectory, MountRotation, Pose, RobotModel};
use airdigit::signal::{ChannelKind, FilterSpec, SampledSignal3};
use airdigit::synth::{self, AugmentationParams};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use std::path::PathBuf;
use std::str::FromStr;

/// ((x, y, z), (w, qx, qy, qz))
type PoseTuple = ((f64, f64, f64), (f64, f64, f64, f64));

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn channel_from_str(s: &str) -> PyResult<ChannelKind> {
    ChannelKind::from_str(s).map_err(value_err)
}

/// Uniformly sampled 3-axis signal.
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
struct Signal3 {
    inner: SampledSignal3,
}

#[pymethods]
impl Signal3 {
    #[new]
    fn new(x: Vec<f64>, y: Vec<f64>, z: Vec<f64>, rate_hz: f64) -> PyResult<Self> {
        Ok(Signal3 { inner: SampledSignal3::new(x, y, z, rate_hz).map_err(value_err)? })
    }

    #[pyo3(signature = (cutoff_hz=20.0, order=4, zero_phase=true))]
    fn lowpass(&self, cutoff_hz: f64, order: usize, zero_phase: bool) -> PyResult<Signal3> {
        let spec = FilterSpec { cutoff_hz, order, zero_phase };
        Ok(Signal3 { inner: self.inner.lowpass(&spec).map_err(value_err)? })
    }

    fn resample_fourier(&self, n: usize) -> PyResult<Signal3> {
        Ok(Signal3 { inner: self.inner.resample_fourier(n).map_err(value_err)? })
    }

    fn differentiate(&self) -> PyResult<Signal3> {
        Ok(Signal3 { inner: self.inner.differentiate().map_err(value_err)? })
    }

    fn integrate(&self, detrend: bool) -> Signal3 {
        Signal3 { inner: self.inner.integrate(detrend) }
    }

    /// Flat classifier layout [x*100 | y*100 | z*100]; axes must hold
    /// exactly 100 samples.
    fn to_feature_values(&self, channel: &str) -> PyResult<Vec<f64>> {
        let kind = channel_from_str(channel)?;
        Ok(self.inner.to_feature_vector(kind).map_err(value_err)?.into_values())
    }

    fn x(&self) -> Vec<f64> {
        self.inner.x().to_vec()
    }

    fn y(&self) -> Vec<f64> {
        self.inner.y().to_vec()
    }

    fn z(&self) -> Vec<f64> {
        self.inner.z().to_vec()
    }

    fn rate_hz(&self) -> f64 {
        self.inner.rate_hz()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Simulated 6-axis arm with the rated 0.58 m reach.
#[pyclass]
struct Robot {
    model: RobotModel,
}

#[pymethods]
impl Robot {
    #[new]
    fn new() -> Self {
        Robot { model: robot::irb120_model() }
    }

    fn max_reach_m(&self) -> f64 {
        self.model.max_reach_m()
    }

    fn computed_max_reach(&self) -> f64 {
        robot::computed_max_reach(&self.model)
    }

    /// Forward kinematics: joints (rad) -> ((x, y, z), (w, qx, qy, qz)).
    fn fk(&self, joints: [f64; 6]) -> PyResult<PoseTuple> {
        let pose = robot::fk(&self.model, &joints).map_err(value_err)?;
        Ok(pose_tuple(&pose))
    }

    /// Damped least-squares IK from a seed posture.
    fn ik(
        &self,
        position: (f64, f64, f64),
        orientation_wxyz: (f64, f64, f64, f64),
        seed_joints: [f64; 6],
    ) -> PyResult<[f64; 6]> {
        let target = Pose::new(
            Vec3::new(position.0, position.1, position.2),
            Quat {
                w: orientation_wxyz.0,
                x: orientation_wxyz.1,
                y: orientation_wxyz.2,
                z: orientation_wxyz.3,
            },
        );
        robot::ik(&self.model, &target, &seed_joints).map_err(runtime_err)
    }

    /// Plan the joint trajectory for one synthesized digit stroke; returns
    /// (frames, rate_hz).
    #[pyo3(signature = (digit, speed=1.0, size=1.0, wrist_deg=0.0, rotation_deg=0.0, seed=0, out_rate_hz=42.0))]
    #[allow(clippy::too_many_arguments)]
    fn plan_digit(
        &self,
        digit: u8,
        speed: f64,
        size: f64,
        wrist_deg: f64,
        rotation_deg: f64,
        seed: u64,
        out_rate_hz: f64,
    ) -> PyResult<(Vec<[f64; 6]>, f64)> {
        let template = synth::digit_template(digit).map_err(value_err)?;
        let params = AugmentationParams {
            speed_scale: speed,
            size_scale: size,
            wrist_angle_deg: wrist_deg,
            rotation_deg,
        };
        let traj =
            synth::synthesize_trajectory(template, &params, synth::DEFAULT_PLANE_SCALE_M, seed)
                .map_err(value_err)?;
        let mount = MountRotation {
            rx_deg: MountRotation::default().rx_deg + wrist_deg,
            ..MountRotation::default()
        };
        let jt = robot::plan_joint_trajectory(&self.model, &traj, &mount, out_rate_hz)
            .map_err(runtime_err)?;
        Ok((jt.frames().to_vec(), jt.rate_hz()))
    }

    /// Interpolate a joint trajectory to the IMU rate and return the poses.
    fn replay(
        &self,
        frames: Vec<[f64; 6]>,
        rate_hz: f64,
        imu_rate_hz: f64,
    ) -> PyResult<Vec<PoseTuple>> {
        let jt = JointTrajectory::new(rate_hz, frames).map_err(value_err)?;
        let poses = robot::replay(&self.model, &jt, imu_rate_hz).map_err(runtime_err)?;
        Ok(poses.iter().map(pose_tuple).collect())
    }
}

fn pose_tuple(pose: &Pose) -> PoseTuple {
    (
        (pose.position.x, pose.position.y, pose.position.z),
        (
            pose.orientation.w,
            pose.orientation.x,
            pose.orientation.y,
            pose.orientation.z,
        ),
    )
}

/// Built-in control-point template for a digit: (points, canonical_duration_s).
#[pyfunction]
fn digit_template(digit: u8) -> PyResult<(Vec<(f64, f64)>, f64)> {
    let t = synth::digit_template(digit).map_err(value_err)?;
    Ok((
        t.control_points.iter().map(|p| (p[0], p[1])).collect(),
        t.canonical_duration_s,
    ))
}

/// Augmentation grid as (speed, size, wrist_deg, rotation_deg) tuples.
#[pyfunction]
fn augmentation_grid(levels: usize) -> PyResult<Vec<(f64, f64, f64, f64)>> {
    Ok(synth::augmentation_grid(levels)
        .map_err(value_err)?
        .into_iter()
        .map(|p| (p.speed_scale, p.size_scale, p.wrist_angle_deg, p.rotation_deg))
        .collect())
}

/// Synthesize one pen-tip path; returns (points, rate_hz).
#[pyfunction]
#[pyo3(signature = (digit, speed=1.0, size=1.0, wrist_deg=0.0, rotation_deg=0.0, plane_scale_m=0.15, seed=0))]
fn synthesize_trajectory(
    digit: u8,
    speed: f64,
    size: f64,
    wrist_deg: f64,
    rotation_deg: f64,
    plane_scale_m: f64,
    seed: u64,
) -> PyResult<(Vec<(f64, f64, f64)>, f64)> {
    let template = synth::digit_template(digit).map_err(value_err)?;
    let params = AugmentationParams {
        speed_scale: speed,
        size_scale: size,
        wrist_angle_deg: wrist_deg,
        rotation_deg,
    };
    let traj = synth::synthesize_trajectory(template, &params, plane_scale_m, seed)
        .map_err(value_err)?;
    Ok((
        traj.points().iter().map(|p| (p.x, p.y, p.z)).collect(),
        traj.rate_hz(),
    ))
}

/// Generate a dataset tree; returns (robot_count, human_count).
#[pyfunction]
#[pyo3(signature = (out_dir, config_json=None))]
fn generate_dataset(out_dir: PathBuf, config_json: Option<&str>) -> PyResult<(usize, usize)> {
    let config: pipeline::ExperimentConfig = match config_json {
        Some(text) => serde_json::from_str(text).map_err(value_err)?,
        None => pipeline::ExperimentConfig::default(),
    };
    let manifest = pipeline::cmd_generate(&config, &out_dir).map_err(runtime_err)?;
    let robot = manifest
        .entries
        .iter()
        .filter(|e| e.provenance == Provenance::Robot)
        .count();
    Ok((robot, manifest.entries.len() - robot))
}

/// Preprocess a dataset into its feature store; returns (path, entry_count).
#[pyfunction]
fn preprocess_dataset(dataset_dir: PathBuf) -> PyResult<(String, usize)> {
    let (store, path) = pipeline::cmd_preprocess(&dataset_dir, None).map_err(runtime_err)?;
    Ok((path.display().to_string(), store.entries.len()))
}

/// Train on a feature store; returns (mean_accuracy, std_accuracy, report_path).
#[pyfunction]
#[pyo3(signature = (features_path, out_dir, channel=None, iterations=None, seed=None))]
fn train_on_features(
    features_path: PathBuf,
    out_dir: PathBuf,
    channel: Option<&str>,
    iterations: Option<usize>,
    seed: Option<u64>,
) -> PyResult<(f64, f64, String)> {
    let channel = channel.map(channel_from_str).transpose()?;
    let overrides = pipeline::TrainOverrides { channel, iterations, seed };
    let (report, path) =
        pipeline::cmd_train(&features_path, &out_dir, &overrides).map_err(runtime_err)?;
    Ok((
        report.mean_accuracy,
        report.std_accuracy,
        path.display().to_string(),
    ))
}

/// Render one or more report files side by side.
#[pyfunction]
fn render_reports(paths: Vec<PathBuf>) -> PyResult<String> {
    pipeline::cmd_report(&paths, None).map_err(runtime_err)
}

#[pymodule]
fn airdigit_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Signal3>()?;
    m.add_class::<Robot>()?;
    m.add_function(wrap_pyfunction!(digit_template, m)?)?;
    m.add_function(wrap_pyfunction!(augmentation_grid, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize_trajectory, m)?)?;
    m.add_function(wrap_pyfunction!(generate_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(preprocess_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(train_on_features, m)?)?;
    m.add_function(wrap_pyfunction!(render_reports, m)?)?;
    Ok(())
}
