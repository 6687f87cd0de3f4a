//! Wrist-IMU simulation: converts pose sequences (robot replay, or
//! human-like paths plus a wrist-sway model) into sensor-frame acceleration
//! with gravity, and derives velocity/trajectory channels by integration so
//! both provenances go through one identical code path.

use crate::math::{derive_seed, Quat, Vec3};
use crate::robot::Pose;
use crate::signal::{SampledSignal3, SignalError};
use crate::synth::{AugmentationParams, CartesianTrajectory, SynthError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default accelerometer noise, human-like samples (m/s^2, per axis).
pub const HUMAN_ACCEL_NOISE_STD: f64 = 0.05;
/// Default accelerometer noise, robot samples (the arm is smoother).
pub const ROBOT_ACCEL_NOISE_STD: f64 = 0.02;
/// Wrist-sway magnitude for the human pose model, degrees.
pub const WRIST_SWAY_SIGMA_DEG: f64 = 3.0;

#[derive(Debug, Error)]
pub enum ImuError {
    #[error("need at least 5 poses, got {0}")]
    TooShort(usize),
    #[error("invalid IMU config: {0}")]
    BadConfig(String),
    #[error("invalid sample: {0}")]
    BadSample(String),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

/// Simulated watch sensor settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImuConfig {
    pub rate_hz: f64,
    pub gravity_mps2: f64,
    pub include_gravity: bool,
    /// Per-axis white-noise standard deviation on the acceleration channel.
    pub noise_std: [f64; 3],
    pub seed: u64,
}

impl Default for ImuConfig {
    fn default() -> Self {
        ImuConfig {
            rate_hz: 100.0,
            gravity_mps2: 9.81,
            include_gravity: true,
            noise_std: [0.0; 3],
            seed: 0,
        }
    }
}

impl ImuConfig {
    pub fn validate(&self) -> Result<(), ImuError> {
        // The downstream 20 Hz low-pass needs headroom under Nyquist.
        if !(self.rate_hz > 40.0) {
            return Err(ImuError::BadConfig(format!(
                "rate {} Hz must exceed twice the 20 Hz filter cutoff",
                self.rate_hz
            )));
        }
        if self.noise_std.iter().any(|s| *s < 0.0 || !s.is_finite()) {
            return Err(ImuError::BadConfig("noise std must be non-negative".into()));
        }
        Ok(())
    }

    pub fn world_gravity(&self) -> Vec3 {
        Vec3::new(0.0, 0.0, -self.gravity_mps2)
    }
}

/// Where a sample came from; the axis of the train/test separation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Provenance {
    #[serde(rename = "human-like")]
    HumanLike,
    #[serde(rename = "robot")]
    Robot,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::HumanLike => "human-like",
            Provenance::Robot => "robot",
        }
    }
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Provenance {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "human" | "human-like" | "humanlike" => Ok(Provenance::HumanLike),
            "robot" => Ok(Provenance::Robot),
            other => Err(format!("unknown provenance '{other}'")),
        }
    }
}

/// One labelled digit execution: the three IMU channels plus provenance and
/// the augmentation it was generated with.
#[derive(Debug, Clone, PartialEq)]
pub struct GestureSample {
    label: u8,
    provenance: Provenance,
    acceleration: SampledSignal3,
    velocity: SampledSignal3,
    trajectory: SampledSignal3,
    params: AugmentationParams,
    duration_s: f64,
}

impl GestureSample {
    pub fn new(
        label: u8,
        provenance: Provenance,
        acceleration: SampledSignal3,
        velocity: SampledSignal3,
        trajectory: SampledSignal3,
        params: AugmentationParams,
    ) -> Result<Self, ImuError> {
        if label > 9 {
            return Err(ImuError::BadSample(format!("label {label} outside 0-9")));
        }
        let len = acceleration.len();
        let rate = acceleration.rate_hz();
        for (name, ch) in [("velocity", &velocity), ("trajectory", &trajectory)] {
            if ch.len() != len || (ch.rate_hz() - rate).abs() > 1e-12 {
                return Err(ImuError::BadSample(format!(
                    "{name} channel disagrees with acceleration on length or rate"
                )));
            }
        }
        let duration_s = acceleration.duration_s();
        if !(2.0..=4.0).contains(&duration_s) {
            return Err(ImuError::BadSample(format!("duration {duration_s} s outside [2, 4]")));
        }
        Ok(GestureSample {
            label,
            provenance,
            acceleration,
            velocity,
            trajectory,
            params,
            duration_s,
        })
    }

    pub fn label(&self) -> u8 {
        self.label
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn params(&self) -> &AugmentationParams {
        &self.params
    }

    pub fn duration_s(&self) -> f64 {
        self.duration_s
    }

    pub fn channel(&self, kind: crate::signal::ChannelKind) -> &SampledSignal3 {
        match kind {
            crate::signal::ChannelKind::Acceleration => &self.acceleration,
            crate::signal::ChannelKind::Velocity => &self.velocity,
            crate::signal::ChannelKind::Trajectory => &self.trajectory,
        }
    }
}

/// Sensor-frame acceleration for a pose sequence sampled at `cfg.rate_hz`:
/// second-order central differences of position, plus the world gravity
/// vector when enabled, rotated into the sensor frame, plus seeded noise.
pub fn poses_to_acceleration(poses: &[Pose], cfg: &ImuConfig) -> Result<SampledSignal3, ImuError> {
    cfg.validate()?;
    let n = poses.len();
    if n < 5 {
        return Err(ImuError::TooShort(n));
    }
    let r2 = cfg.rate_hz * cfg.rate_hz;
    let world_accel = |i: usize| -> Vec3 {
        let p = |k: usize| poses[k].position;
        if i == 0 {
            // One-sided second difference, second-order accurate.
            (p(0) * 2.0 - p(1) * 5.0 + p(2) * 4.0 - p(3)) * r2
        } else if i == n - 1 {
            (p(n - 1) * 2.0 - p(n - 2) * 5.0 + p(n - 3) * 4.0 - p(n - 4)) * r2
        } else {
            (p(i + 1) - p(i) * 2.0 + p(i - 1)) * r2
        }
    };
    let gravity = if cfg.include_gravity { cfg.world_gravity() } else { Vec3::ZERO };

    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    for (i, pose) in poses.iter().enumerate() {
        let total = world_accel(i) + gravity;
        let sensed = pose.orientation.conj().rotate(total);
        let noise = [
            gaussian(&mut rng) * cfg.noise_std[0],
            gaussian(&mut rng) * cfg.noise_std[1],
            gaussian(&mut rng) * cfg.noise_std[2],
        ];
        x.push(sensed.x + noise[0]);
        y.push(sensed.y + noise[1]);
        z.push(sensed.z + noise[2]);
    }
    Ok(SampledSignal3::new(x, y, z, cfg.rate_hz)?)
}

/// Velocity and trajectory channels from gravity-free acceleration, by
/// detrended trapezoidal integration. This is the single derivation applied
/// to both provenances, so the classifier never sees an origin-dependent
/// transform.
pub fn derive_channels(accel: &SampledSignal3) -> (SampledSignal3, SampledSignal3) {
    let velocity = accel.integrate(true);
    let trajectory = velocity.integrate(true);
    (velocity, trajectory)
}

/// Full sample construction: sensor acceleration (gravity on per config), a
/// gravity-free copy made by subtracting the known rotated gravity, and the
/// derived velocity/trajectory channels.
pub fn make_sample(
    label: u8,
    provenance: Provenance,
    poses: &[Pose],
    params: AugmentationParams,
    cfg: &ImuConfig,
) -> Result<GestureSample, ImuError> {
    let acceleration = poses_to_acceleration(poses, cfg)?;
    let gravity = if cfg.include_gravity { cfg.world_gravity() } else { Vec3::ZERO };
    let mut gx = Vec::with_capacity(poses.len());
    let mut gy = Vec::with_capacity(poses.len());
    let mut gz = Vec::with_capacity(poses.len());
    for (i, pose) in poses.iter().enumerate() {
        let g_sensor = pose.orientation.conj().rotate(gravity);
        gx.push(acceleration.x()[i] - g_sensor.x);
        gy.push(acceleration.y()[i] - g_sensor.y);
        gz.push(acceleration.z()[i] - g_sensor.z);
    }
    let gravity_free = SampledSignal3::new(gx, gy, gz, cfg.rate_hz)?;
    let (velocity, trajectory) = derive_channels(&gravity_free);
    GestureSample::new(label, provenance, acceleration, velocity, trajectory, params)
}

/// Slowly varying wrist orientation about `base`: per-axis band-limited
/// sway built from three low-frequency sinusoids with total std
/// `sigma_deg`, seeded.
pub fn wrist_sway_orientations(
    base: Quat,
    n: usize,
    rate_hz: f64,
    sigma_deg: f64,
    seed: u64,
) -> Vec<Quat> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let sigma = sigma_deg.to_radians();
    let mut tracks = Vec::with_capacity(3);
    for _ in 0..3 {
        let raw: Vec<(f64, f64, f64)> = (0..3)
            .map(|_| {
                (
                    rng.random_range(0.5..1.0),
                    rng.random_range(0.2..1.2), // Hz
                    rng.random_range(0.0..std::f64::consts::TAU),
                )
            })
            .collect();
        // Scale so the summed sinusoid variance is sigma^2.
        let var: f64 = raw.iter().map(|(a, _, _)| a * a / 2.0).sum();
        let k = sigma / var.sqrt();
        tracks.push(raw.into_iter().map(|(a, f, p)| (a * k, f, p)).collect::<Vec<_>>());
    }
    (0..n)
        .map(|i| {
            let t = i as f64 / rate_hz;
            let angle = |track: &[(f64, f64, f64)]| -> f64 {
                track
                    .iter()
                    .map(|(a, f, p)| a * (std::f64::consts::TAU * f * t + p).sin())
                    .sum()
            };
            let qx = Quat::from_axis_angle(Vec3::new(1.0, 0.0, 0.0), angle(&tracks[0]));
            let qy = Quat::from_axis_angle(Vec3::new(0.0, 1.0, 0.0), angle(&tracks[1]));
            let qz = Quat::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), angle(&tracks[2]));
            base.mul(qx.mul(qy).mul(qz))
        })
        .collect()
}

/// Pose sequence for a human-like sample: the synthesized path resampled to
/// the IMU rate, carried with swaying wrist orientation about `base`.
pub fn human_poses(
    traj: &CartesianTrajectory,
    base: Quat,
    imu_rate_hz: f64,
    sway_sigma_deg: f64,
    seed: u64,
) -> Result<Vec<Pose>, SynthError> {
    let n = (traj.duration_s() * imu_rate_hz).round() as usize;
    let path = traj.resample(n.max(2))?;
    let orientations =
        wrist_sway_orientations(base, path.len(), imu_rate_hz, sway_sigma_deg, derive_seed(seed, &[0x73]));
    Ok(path
        .points()
        .iter()
        .zip(orientations)
        .map(|(p, q)| Pose::new(*p, q))
        .collect())
}

/// Standard normal draw via Box-Muller.
fn gaussian(rng: &mut ChaCha12Rng) -> f64 {
    let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::ChannelKind;
    use std::f64::consts::{PI, TAU};

    fn stationary_poses(n: usize, orientation: Quat) -> Vec<Pose> {
        vec![Pose::new(Vec3::new(0.1, 0.2, 0.3), orientation); n]
    }

    #[test]
    fn stationary_with_gravity_reads_g() {
        let cfg = ImuConfig::default();
        let tilted = Quat::from_axis_angle(Vec3::new(1.0, 0.3, 0.0), 0.7);
        for orientation in [Quat::IDENTITY, tilted] {
            let accel = poses_to_acceleration(&stationary_poses(300, orientation), &cfg).unwrap();
            for i in 0..accel.len() {
                let mag = Vec3::new(accel.x()[i], accel.y()[i], accel.z()[i]).norm();
                assert!((mag - 9.81).abs() < 1e-6, "magnitude {mag}");
            }
        }
    }

    #[test]
    fn stationary_without_gravity_is_zero() {
        let cfg = ImuConfig { include_gravity: false, ..ImuConfig::default() };
        let accel = poses_to_acceleration(&stationary_poses(200, Quat::IDENTITY), &cfg).unwrap();
        for i in 0..accel.len() {
            assert!(accel.x()[i].abs() < 1e-12);
            assert!(accel.y()[i].abs() < 1e-12);
            assert!(accel.z()[i].abs() < 1e-12);
        }
    }

    #[test]
    fn config_requires_headroom_over_filter_cutoff() {
        let cfg = ImuConfig { rate_hz: 40.0, ..ImuConfig::default() };
        assert!(matches!(cfg.validate(), Err(ImuError::BadConfig(_))));
        ImuConfig::default().validate().unwrap();
    }

    #[test]
    fn too_few_poses_rejected() {
        let cfg = ImuConfig::default();
        assert!(matches!(
            poses_to_acceleration(&stationary_poses(4, Quat::IDENTITY), &cfg),
            Err(ImuError::TooShort(4))
        ));
    }

    #[test]
    fn sinusoidal_motion_matches_analytic_second_derivative() {
        let cfg = ImuConfig { include_gravity: false, ..ImuConfig::default() };
        let amp = 0.02;
        let omega = TAU * 5.0;
        let poses: Vec<Pose> = (0..500)
            .map(|k| {
                let t = k as f64 / cfg.rate_hz;
                Pose::new(Vec3::new(amp * (omega * t).sin(), 0.0, 0.0), Quat::IDENTITY)
            })
            .collect();
        let accel = poses_to_acceleration(&poses, &cfg).unwrap();
        let mut err = 0.0;
        let mut refsum = 0.0;
        for k in 0..500 {
            let t = k as f64 / cfg.rate_hz;
            let want = -amp * omega * omega * (omega * t).sin();
            err += (accel.x()[k] - want).powi(2);
            refsum += want * want;
        }
        let rel = (err / refsum).sqrt();
        assert!(rel < 0.01, "relative rms {rel}");
    }

    #[test]
    fn derive_channels_of_zero_is_zero() {
        let accel = SampledSignal3::from_fn(300, 100.0, |_| (0.0, 0.0, 0.0)).unwrap();
        let (v, t) = derive_channels(&accel);
        assert!(v.x().iter().all(|a| a.abs() < 1e-12));
        assert!(t.x().iter().all(|a| a.abs() < 1e-12));
    }

    #[test]
    fn synthesized_motion_recovers_shape() {
        // x(t) known; acceleration simulated; the derived trajectory must
        // correlate strongly with the detrended input displacement.
        // Sine displacements start from rest like real strokes; integration
        // detrending assumes near-zero end velocities.
        let cfg = ImuConfig { include_gravity: false, ..ImuConfig::default() };
        let freqs = [1.5, 2.0, 1.0];
        let poses: Vec<Pose> = (0..400)
            .map(|k| {
                let t = k as f64 / cfg.rate_hz;
                Pose::new(
                    Vec3::new(
                        0.05 * (TAU * freqs[0] * t).sin(),
                        0.04 * (TAU * freqs[1] * t).sin(),
                        0.03 * (TAU * freqs[2] * t).sin(),
                    ),
                    Quat::IDENTITY,
                )
            })
            .collect();
        let accel = poses_to_acceleration(&poses, &cfg).unwrap();
        let (_v, traj) = derive_channels(&accel);

        for axis in 0..3 {
            let got = traj.axis(axis);
            let want: Vec<f64> = poses
                .iter()
                .map(|p| match axis {
                    0 => p.position.x,
                    1 => p.position.y,
                    _ => p.position.z,
                })
                .collect();
            // Detrend the reference the same way integration does.
            let (b, m) = crate::signal::linear_fit(&want, 1.0 / cfg.rate_hz);
            let want: Vec<f64> = want
                .iter()
                .enumerate()
                .map(|(i, v)| v - b - m * i as f64 / cfg.rate_hz)
                .collect();
            let corr = pearson(got, &want);
            assert!(corr >= 0.99, "axis {axis} correlation {corr}");
        }
    }

    fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let mut cov = 0.0;
        let mut va = 0.0;
        let mut vb = 0.0;
        for (x, y) in a.iter().zip(b) {
            cov += (x - ma) * (y - mb);
            va += (x - ma).powi(2);
            vb += (y - mb).powi(2);
        }
        cov / (va.sqrt() * vb.sqrt())
    }

    #[test]
    fn derived_channels_have_zero_trend() {
        let cfg = ImuConfig { include_gravity: false, noise_std: [0.1; 3], ..ImuConfig::default() };
        let poses: Vec<Pose> = (0..250)
            .map(|k| {
                let t = k as f64 / cfg.rate_hz;
                Pose::new(Vec3::new(0.03 * (TAU * 2.0 * t).sin(), 0.0, 0.0), Quat::IDENTITY)
            })
            .collect();
        let accel = poses_to_acceleration(&poses, &cfg).unwrap();
        let (v, t) = derive_channels(&accel);
        for sig in [v, t] {
            for axis in 0..3 {
                let (intercept, slope) = crate::signal::linear_fit(sig.axis(axis), 0.01);
                assert!(slope.abs() < 1e-9 && intercept.abs() < 1e-9);
            }
        }
    }

    #[test]
    fn gravity_toggle_shifts_by_constant_under_fixed_orientation() {
        let orientation = Quat::from_axis_angle(Vec3::new(0.2, 1.0, 0.1), 0.9);
        let poses: Vec<Pose> = (0..200)
            .map(|k| {
                let t = k as f64 / 100.0;
                Pose::new(Vec3::new(0.02 * (TAU * t).sin(), 0.0, 0.0), orientation)
            })
            .collect();
        let seed = 77;
        let on = poses_to_acceleration(
            &poses,
            &ImuConfig { seed, noise_std: [0.05; 3], ..ImuConfig::default() },
        )
        .unwrap();
        let off = poses_to_acceleration(
            &poses,
            &ImuConfig {
                seed,
                noise_std: [0.05; 3],
                include_gravity: false,
                ..ImuConfig::default()
            },
        )
        .unwrap();
        let d0 = Vec3::new(
            on.x()[0] - off.x()[0],
            on.y()[0] - off.y()[0],
            on.z()[0] - off.z()[0],
        );
        for i in 1..on.len() {
            let di = Vec3::new(
                on.x()[i] - off.x()[i],
                on.y()[i] - off.y()[i],
                on.z()[i] - off.z()[i],
            );
            assert!((di - d0).norm() < 1e-12);
        }
        assert!((d0.norm() - 9.81).abs() < 1e-12);
    }

    #[test]
    fn make_sample_is_deterministic_and_well_formed() {
        let cfg = ImuConfig { noise_std: [0.02; 3], seed: 1234, ..ImuConfig::default() };
        let poses: Vec<Pose> = (0..300)
            .map(|k| {
                let t = k as f64 / cfg.rate_hz;
                Pose::new(
                    Vec3::new(0.05 * (TAU * 1.5 * t).sin(), 0.04 * (TAU * 2.0 * t).cos(), 0.4),
                    Quat::from_axis_angle(Vec3::new(0.0, 1.0, 0.0), PI / 3.0),
                )
            })
            .collect();
        let a = make_sample(2, Provenance::Robot, &poses, AugmentationParams::neutral(), &cfg)
            .unwrap();
        let b = make_sample(2, Provenance::Robot, &poses, AugmentationParams::neutral(), &cfg)
            .unwrap();
        assert_eq!(a, b);
        assert_eq!(a.label(), 2);
        assert_eq!(a.channel(ChannelKind::Acceleration).len(), 300);
        assert_eq!(a.channel(ChannelKind::Velocity).len(), 300);
        assert_eq!(a.channel(ChannelKind::Trajectory).len(), 300);
        assert!((a.duration_s() - 3.0).abs() < 1e-9);
    }

    #[test]
    fn wrist_sway_stays_near_base() {
        let base = Quat::from_axis_angle(Vec3::new(0.0, 1.0, 0.0), 1.0);
        let qs = wrist_sway_orientations(base, 400, 100.0, 3.0, 5);
        assert_eq!(qs.len(), 400);
        let max = qs.iter().map(|q| base.angle_to(*q)).fold(0.0f64, f64::max);
        // Three sinusoids with total std 3 deg stay well under 20 deg.
        assert!(max < 20.0f64.to_radians(), "max sway {} deg", max.to_degrees());
        assert!(max > 0.1f64.to_radians(), "sway did not move");
    }
}
