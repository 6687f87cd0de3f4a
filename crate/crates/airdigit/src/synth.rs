//! Human-like pen-tip trajectory synthesis for the digits 0-9.
//!
//! Each digit ships as a hand-authored control-point template in the unit
//! box. A Catmull-Rom spline through the points, traversed with a
//! minimum-jerk arc-length profile, stands in for recorded human strokes.
//! The augmentation grid varies stroke speed, figure size, wrist angle and
//! in-plane rotation.

use crate::imu::{self, GestureSample, ImuConfig, Provenance};
use crate::math::{derive_seed, Vec3};
use crate::robot::{MountRotation, WritingSetup};
use crate::signal::SignalError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;
use thiserror::Error;

/// Synthesis sample rate, matching the capture rig the templates stand in for.
pub const SYNTH_RATE_HZ: f64 = 200.0;
/// Default physical size of the unit template box, in metres.
pub const DEFAULT_PLANE_SCALE_M: f64 = 0.15;
/// Every sample's duration is clamped into this envelope (seconds).
pub const DURATION_RANGE_S: (f64, f64) = (2.0, 4.0);

/// Smooth in-plane jitter amplitude, in unit-box units.
const JITTER_AMP: f64 = 0.004;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("unknown digit {0}, expected 0-9")]
    UnknownDigit(u8),
    #[error("invalid template: {0}")]
    BadTemplate(String),
    #[error("plane scale {0} m outside (0.05, 0.5]")]
    BadPlaneScale(f64),
    #[error("invalid augmentation parameters: {0}")]
    BadParams(String),
    #[error("grid levels {0} outside 1..=5")]
    BadLevels(usize),
    #[error("trajectory invariant violated: {0}")]
    TrajectoryInvariant(String),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error("sample construction failed: {0}")]
    Imu(#[from] crate::imu::ImuError),
}

/// Control-point template for one digit, drawn as a single stroke inside the
/// unit box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DigitTemplate {
    pub digit: u8,
    pub control_points: Vec<[f64; 2]>,
    pub canonical_duration_s: f64,
}

impl DigitTemplate {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.digit > 9 {
            return Err(SynthError::UnknownDigit(self.digit));
        }
        let n = self.control_points.len();
        if !(4..=64).contains(&n) {
            return Err(SynthError::BadTemplate(format!(
                "digit {} has {} control points, expected 4..=64",
                self.digit, n
            )));
        }
        for p in &self.control_points {
            if !(0.0..=1.0).contains(&p[0]) || !(0.0..=1.0).contains(&p[1]) {
                return Err(SynthError::BadTemplate(format!(
                    "digit {} control point ({}, {}) outside the unit box",
                    self.digit, p[0], p[1]
                )));
            }
        }
        if !(DURATION_RANGE_S.0..=DURATION_RANGE_S.1).contains(&self.canonical_duration_s) {
            return Err(SynthError::BadTemplate(format!(
                "digit {} canonical duration {} outside [2, 4] s",
                self.digit, self.canonical_duration_s
            )));
        }
        Ok(())
    }
}

/// One point in the augmentation space.
///
/// Grid iteration order is lexicographic over the fields in declaration
/// order: speed, size, wrist angle, rotation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentationParams {
    pub speed_scale: f64,
    pub size_scale: f64,
    pub wrist_angle_deg: f64,
    pub rotation_deg: f64,
}

impl AugmentationParams {
    pub fn neutral() -> Self {
        AugmentationParams { speed_scale: 1.0, size_scale: 1.0, wrist_angle_deg: 0.0, rotation_deg: 0.0 }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        for (name, v) in [("speed_scale", self.speed_scale), ("size_scale", self.size_scale)] {
            if !(0.25..=4.0).contains(&v) {
                return Err(SynthError::BadParams(format!("{name} {v} outside [0.25, 4]")));
            }
        }
        if !self.wrist_angle_deg.is_finite() || !self.rotation_deg.is_finite() {
            return Err(SynthError::BadParams("angles must be finite".into()));
        }
        Ok(())
    }
}

impl Default for AugmentationParams {
    fn default() -> Self {
        Self::neutral()
    }
}

/// Value ranges the augmentation grid and the human set draw from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentationRanges {
    pub speed: (f64, f64),
    pub size: (f64, f64),
    pub wrist_angle_deg: (f64, f64),
    pub rotation_deg: (f64, f64),
}

impl Default for AugmentationRanges {
    fn default() -> Self {
        AugmentationRanges {
            speed: (0.75, 1.25),
            size: (0.8, 1.2),
            wrist_angle_deg: (-15.0, 15.0),
            rotation_deg: (-10.0, 10.0),
        }
    }
}

/// A pen-tip path in 3-D space, uniformly sampled.
///
/// The digit lives in the vertical y-z plane at x = 0, centred on the
/// origin; consumers translate it to their own writing-plane centre.
#[derive(Debug, Clone, PartialEq)]
pub struct CartesianTrajectory {
    points: Vec<Vec3>,
    rate_hz: f64,
    duration_clamped: bool,
}

impl CartesianTrajectory {
    pub fn new(points: Vec<Vec3>, rate_hz: f64) -> Result<Self, SynthError> {
        Self::with_clamp_flag(points, rate_hz, false)
    }

    fn with_clamp_flag(
        points: Vec<Vec3>,
        rate_hz: f64,
        duration_clamped: bool,
    ) -> Result<Self, SynthError> {
        if points.len() < 2 {
            return Err(SynthError::TrajectoryInvariant(format!(
                "need at least 2 points, got {}",
                points.len()
            )));
        }
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(SynthError::TrajectoryInvariant(format!("bad rate {rate_hz}")));
        }
        for (i, w) in points.windows(2).enumerate() {
            let step = (w[1] - w[0]).norm();
            if !(step < 0.1) {
                return Err(SynthError::TrajectoryInvariant(format!(
                    "step {step} m between samples {i} and {} breaks continuity",
                    i + 1
                )));
            }
        }
        Ok(CartesianTrajectory { points, rate_hz, duration_clamped })
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.points.len() as f64 / self.rate_hz
    }

    /// True when the speed scale pushed the nominal duration outside the
    /// [2, 4] s envelope and it was clamped back.
    pub fn duration_clamped(&self) -> bool {
        self.duration_clamped
    }

    /// Resample the path to `n` points with the Fourier method.
    ///
    /// The line through the endpoints is removed first and re-added at the
    /// new sample times; paths are not periodic, and resampling the residual
    /// (which is zero at both ends) avoids wrap-around ringing.
    pub fn resample(&self, n: usize) -> Result<CartesianTrajectory, SynthError> {
        let m = self.points.len();
        let t_last = (m - 1) as f64 / self.rate_hz;
        let first = self.points[0];
        let last = self.points[m - 1];
        let line = |t: f64| first + (last - first) * (t / t_last);

        let mut axes: Vec<Vec<f64>> = (0..3).map(|_| Vec::with_capacity(m)).collect();
        for (i, p) in self.points.iter().enumerate() {
            let l = line(i as f64 / self.rate_hz);
            axes[0].push(p.x - l.x);
            axes[1].push(p.y - l.y);
            axes[2].push(p.z - l.z);
        }
        let sig = crate::signal::SampledSignal3::new(
            axes[0].clone(),
            axes[1].clone(),
            axes[2].clone(),
            self.rate_hz,
        )?;
        let res = sig.resample_fourier(n)?;
        let new_rate = res.rate_hz();
        let points = (0..n)
            .map(|k| {
                let l = line((k as f64 / new_rate).min(t_last));
                Vec3::new(res.x()[k] + l.x, res.y()[k] + l.y, res.z()[k] + l.z)
            })
            .collect();
        CartesianTrajectory::with_clamp_flag(points, new_rate, self.duration_clamped)
    }
}

static BUILTIN_TEMPLATES: OnceLock<Vec<DigitTemplate>> = OnceLock::new();

/// The ten built-in digit templates, parsed from the bundled data file.
pub fn builtin_templates() -> &'static [DigitTemplate] {
    BUILTIN_TEMPLATES.get_or_init(|| {
        parse_templates(include_str!("../data/digit_templates.json"))
            .expect("bundled digit templates are valid")
    })
}

/// Parse and validate a template set in the documented JSON schema
/// (array of `{digit, control_points, canonical_duration_s}`).
pub fn parse_templates(json: &str) -> Result<Vec<DigitTemplate>, SynthError> {
    let templates: Vec<DigitTemplate> =
        serde_json::from_str(json).map_err(|e| SynthError::BadTemplate(e.to_string()))?;
    for t in &templates {
        t.validate()?;
    }
    for digit in 0..=9u8 {
        if !templates.iter().any(|t| t.digit == digit) {
            return Err(SynthError::BadTemplate(format!("missing template for digit {digit}")));
        }
    }
    Ok(templates)
}

/// Built-in template for one digit.
pub fn digit_template(digit: u8) -> Result<&'static DigitTemplate, SynthError> {
    template_for(builtin_templates(), digit)
}

/// Template for one digit within a (possibly user-supplied) set.
pub fn template_for(templates: &[DigitTemplate], digit: u8) -> Result<&DigitTemplate, SynthError> {
    templates
        .iter()
        .find(|t| t.digit == digit)
        .ok_or(SynthError::UnknownDigit(digit))
}

/// Full Cartesian product over {speed, wrist angle, size, rotation} with
/// `levels` evenly spaced values per parameter, using the default ranges.
pub fn augmentation_grid(levels: usize) -> Result<Vec<AugmentationParams>, SynthError> {
    augmentation_grid_with(&AugmentationRanges::default(), levels)
}

pub fn augmentation_grid_with(
    ranges: &AugmentationRanges,
    levels: usize,
) -> Result<Vec<AugmentationParams>, SynthError> {
    if !(1..=5).contains(&levels) {
        return Err(SynthError::BadLevels(levels));
    }
    let span = |range: (f64, f64)| -> Vec<f64> {
        if levels == 1 {
            vec![(range.0 + range.1) / 2.0]
        } else {
            (0..levels)
                .map(|j| range.0 + (range.1 - range.0) * j as f64 / (levels - 1) as f64)
                .collect()
        }
    };
    let speeds = span(ranges.speed);
    let sizes = span(ranges.size);
    let wrists = span(ranges.wrist_angle_deg);
    let rotations = span(ranges.rotation_deg);
    let mut grid = Vec::with_capacity(levels.pow(4));
    for &speed_scale in &speeds {
        for &size_scale in &sizes {
            for &wrist_angle_deg in &wrists {
                for &rotation_deg in &rotations {
                    grid.push(AugmentationParams {
                        speed_scale,
                        size_scale,
                        wrist_angle_deg,
                        rotation_deg,
                    });
                }
            }
        }
    }
    Ok(grid)
}

/// Synthesize the pen-tip path for a template under the given augmentation.
///
/// The spline through the control points is traversed with a minimum-jerk
/// arc-length profile over `canonical_duration_s / speed_scale` seconds
/// (clamped into [2, 4] s), jittered smoothly in-plane (seeded), centred,
/// rotated in-plane, scaled by `size_scale * plane_scale_m`, and embedded
/// into the vertical y-z plane.
pub fn synthesize_trajectory(
    template: &DigitTemplate,
    params: &AugmentationParams,
    plane_scale_m: f64,
    seed: u64,
) -> Result<CartesianTrajectory, SynthError> {
    template.validate()?;
    params.validate()?;
    if !(plane_scale_m > 0.05 && plane_scale_m <= 0.5) {
        return Err(SynthError::BadPlaneScale(plane_scale_m));
    }

    let nominal = template.canonical_duration_s / params.speed_scale;
    let duration = nominal.clamp(DURATION_RANGE_S.0, DURATION_RANGE_S.1);
    let clamped = (nominal - duration).abs() > 1e-12;
    let n = (duration * SYNTH_RATE_HZ).round() as usize;

    let spline = CatmullRom::new(&template.control_points);
    let scale = params.size_scale * plane_scale_m;
    // The min-jerk profile runs over a warped arc length that slows the pen
    // through corners (with braking distance), the way writers do; constant
    // arc-length speed would carry full speed into direction changes and
    // spike the acceleration the wrist sensor sees.
    let table = spline.profile_table(512, scale, duration);

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let jitter = [JitterTrack::draw(&mut rng), JitterTrack::draw(&mut rng)];

    let rot = params.rotation_deg.to_radians();
    let (rc, rs) = (rot.cos(), rot.sin());

    let mut points = Vec::with_capacity(n);
    for k in 0..n {
        let tau = k as f64 / (n - 1) as f64;
        let m = table.weighted_total * min_jerk_fraction(tau);
        let u = table.param_at_weighted(m);
        let [mut px, mut py] = spline.eval(u);
        px += jitter[0].eval(tau);
        py += jitter[1].eval(tau);
        // Centre on the unit box, rotate in-plane, then scale to metres.
        let cx = px - 0.5;
        let cy = py - 0.5;
        let rx = rc * cx - rs * cy;
        let ry = rs * cx + rc * cy;
        points.push(Vec3::new(0.0, rx * scale, ry * scale));
    }
    CartesianTrajectory::with_clamp_flag(points, SYNTH_RATE_HZ, clamped)
}

/// Generate the human-like evaluation set: `per_digit` samples for each
/// digit with seeded random augmentation draws, rendered to IMU channels
/// through the wrist-sway pose model.
pub fn generate_human_set(
    per_digit: usize,
    seed: u64,
    imu_cfg: &ImuConfig,
) -> Result<Vec<GestureSample>, SynthError> {
    generate_human_set_with(
        per_digit,
        seed,
        imu_cfg,
        &AugmentationRanges::default(),
        DEFAULT_PLANE_SCALE_M,
        &MountRotation::default(),
        builtin_templates(),
    )
}

#[allow(clippy::too_many_arguments)]
pub fn generate_human_set_with(
    per_digit: usize,
    seed: u64,
    imu_cfg: &ImuConfig,
    ranges: &AugmentationRanges,
    plane_scale_m: f64,
    mount: &MountRotation,
    templates: &[DigitTemplate],
) -> Result<Vec<GestureSample>, SynthError> {
    if per_digit == 0 {
        return Err(SynthError::BadParams("per_digit must be >= 1".into()));
    }
    let mut samples = Vec::with_capacity(per_digit * 10);
    for digit in 0..=9u8 {
        let template = template_for(templates, digit)?;
        for index in 0..per_digit {
            let sample_seed = derive_seed(seed, &[0x68756d, digit as u64, index as u64]);
            let mut rng = ChaCha12Rng::seed_from_u64(sample_seed);
            let params = AugmentationParams {
                speed_scale: rng.random_range(ranges.speed.0..=ranges.speed.1),
                size_scale: rng.random_range(ranges.size.0..=ranges.size.1),
                wrist_angle_deg: rng
                    .random_range(ranges.wrist_angle_deg.0..=ranges.wrist_angle_deg.1),
                rotation_deg: rng.random_range(ranges.rotation_deg.0..=ranges.rotation_deg.1),
            };
            let traj = synthesize_trajectory(
                template,
                &params,
                plane_scale_m,
                derive_seed(sample_seed, &[1]),
            )?;
            let worn = MountRotation {
                rx_deg: mount.rx_deg + params.wrist_angle_deg,
                ry_deg: mount.ry_deg,
                rz_deg: mount.rz_deg,
            };
            let base = WritingSetup::default().base_orientation.mul(worn.to_quat());
            let poses = imu::human_poses(
                &traj,
                base,
                imu_cfg.rate_hz,
                imu::WRIST_SWAY_SIGMA_DEG,
                derive_seed(sample_seed, &[2]),
            )?;
            let cfg = ImuConfig { seed: derive_seed(sample_seed, &[3]), ..imu_cfg.clone() };
            samples.push(imu::make_sample(digit, Provenance::HumanLike, &poses, params, &cfg)?);
        }
    }
    Ok(samples)
}

/// Minimum-jerk position fraction along the path at normalized time `tau`.
pub fn min_jerk_fraction(tau: f64) -> f64 {
    let t = tau.clamp(0.0, 1.0);
    t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
}

/// Peak |d2s/dt2| of a minimum-jerk profile over length `l` and duration `t`.
pub fn min_jerk_peak_accel(l: f64, t: f64) -> f64 {
    // Max of l * (60 tau - 180 tau^2 + 120 tau^3) / t^2 at tau = (3-sqrt(3))/6.
    let tau = (3.0 - 3.0f64.sqrt()) / 6.0;
    l * (60.0 * tau - 180.0 * tau * tau + 120.0 * tau * tau * tau) / (t * t)
}

/// Rotate planar points about the origin; used by the in-plane rotation
/// augmentation.
pub fn rotate_in_plane(points: &mut [[f64; 2]], angle_deg: f64) {
    let a = angle_deg.to_radians();
    let (c, s) = (a.cos(), a.sin());
    for p in points {
        let (x, y) = (p[0], p[1]);
        p[0] = c * x - s * y;
        p[1] = s * x + c * y;
    }
}

/// Uniform Catmull-Rom spline through a point list, endpoints duplicated.
struct CatmullRom {
    points: Vec<[f64; 2]>,
}

impl CatmullRom {
    fn new(points: &[[f64; 2]]) -> Self {
        CatmullRom { points: points.to_vec() }
    }

    fn segments(&self) -> usize {
        self.points.len() - 1
    }

    fn point(&self, i: isize) -> [f64; 2] {
        let idx = i.clamp(0, self.points.len() as isize - 1) as usize;
        self.points[idx]
    }

    /// Evaluate at global parameter `u` in [0, segments].
    fn eval(&self, u: f64) -> [f64; 2] {
        let segs = self.segments();
        let clamped = u.clamp(0.0, segs as f64);
        let mut i = clamped.floor() as usize;
        if i >= segs {
            i = segs - 1;
        }
        let t = clamped - i as f64;
        let p0 = self.point(i as isize - 1);
        let p1 = self.point(i as isize);
        let p2 = self.point(i as isize + 1);
        let p3 = self.point(i as isize + 2);
        let mut out = [0.0; 2];
        for d in 0..2 {
            let t2 = t * t;
            let t3 = t2 * t;
            out[d] = 0.5
                * (2.0 * p1[d]
                    + (-p0[d] + p2[d]) * t
                    + (2.0 * p0[d] - 5.0 * p1[d] + 4.0 * p2[d] - p3[d]) * t2
                    + (-p0[d] + 3.0 * p1[d] - 3.0 * p2[d] + p3[d]) * t3);
        }
        out
    }

    /// Dense table mapping spline parameter to a warped arc length that
    /// encodes corner slow-down with braking distance.
    ///
    /// Construction: per dense sample, a corner speed cap
    /// `v_lim = sqrt(a_c / kappa)` (physical curvature), propagated forward
    /// and backward under a tangential-acceleration cap so the pen brakes
    /// into and accelerates out of corners; the warp factor is
    /// `g = max(1, v_peak / v_lim)` and the profile traverses `m = ∫ g ds`.
    fn profile_table(&self, per_segment: usize, scale_m: f64, duration_s: f64) -> ArcLengthTable {
        let total_samples = self.segments() * per_segment + 1;
        let mut pts = Vec::with_capacity(total_samples);
        for k in 0..total_samples {
            let u = k as f64 * self.segments() as f64 / (total_samples - 1) as f64;
            pts.push((u, self.eval(u)));
        }
        let mut kappas = vec![0.0; total_samples];
        for k in 1..total_samples - 1 {
            kappas[k] = circumcircle_curvature(pts[k - 1].1, pts[k].1, pts[k + 1].1);
        }
        // Windowed max over the distance one output sample smears (finite
        // differences at the synthesis rate mix each point with its
        // neighbourhood two output steps wide), so ramp speeds respect
        // curvature slightly ahead, not just at the point itself. Expressed
        // in table cells this is scale-free, keeping synthesis exactly
        // homogeneous in figure size.
        let window = ((3.75 * total_samples as f64 / (duration_s * SYNTH_RATE_HZ)).ceil()
            as isize)
            .max(3);
        let kappas: Vec<f64> = (0..total_samples as isize)
            .map(|k| {
                let lo = (k - window).max(0) as usize;
                let hi = ((k + window) as usize).min(total_samples - 1);
                kappas[lo..=hi].iter().cloned().fold(0.0f64, f64::max)
            })
            .collect();

        let mut params = Vec::with_capacity(total_samples);
        let mut lengths = Vec::with_capacity(total_samples);
        let mut steps = Vec::with_capacity(total_samples);
        params.push(0.0);
        lengths.push(0.0);
        steps.push(0.0);
        let mut s_acc = 0.0;
        for k in 1..total_samples {
            let p = pts[k].1;
            let prev = pts[k - 1].1;
            let ds = ((p[0] - prev[0]).powi(2) + (p[1] - prev[1]).powi(2)).sqrt() * scale_m;
            s_acc += ds;
            params.push(pts[k].0);
            lengths.push(s_acc);
            steps.push(ds);
        }

        // Acceleration budgets: fractions of the bound the synthesized path
        // promises (10x the min-jerk profile peak).
        let total_len = s_acc;
        let budget = 10.0 * min_jerk_peak_accel(total_len, duration_s);
        let a_centripetal = 0.65 * budget;
        let a_braking = 0.30 * budget;

        // Absolute corner speed caps with braking-distance propagation.
        let mut v_lim = vec![f64::INFINITY; total_samples];
        for k in 0..total_samples {
            let kappa_phys = kappas[k] / scale_m;
            if kappa_phys > 1e-9 {
                v_lim[k] = (a_centripetal / kappa_phys).sqrt();
            }
        }
        for k in 1..total_samples {
            let reachable = (v_lim[k - 1] * v_lim[k - 1] + 2.0 * a_braking * steps[k]).sqrt();
            v_lim[k] = v_lim[k].min(reachable);
        }
        for k in (0..total_samples - 1).rev() {
            let reachable = (v_lim[k + 1] * v_lim[k + 1] + 2.0 * a_braking * steps[k + 1]).sqrt();
            v_lim[k] = v_lim[k].min(reachable);
        }

        // Size the warp so the traversal speed respects the caps: each cell
        // needs g >= nominal_speed(tau at that cell) / v_lim. The mapping
        // from cell to stroke time depends on the warp itself, so iterate;
        // the loop settles unless the capped zones alone exceed the stroke
        // time, which the templates are shaped to avoid.
        let mut weighted: Vec<f64> = lengths.clone();
        let mut warped_total = total_len;
        for _ in 0..60 {
            let mut m_acc = 0.0;
            let mut next = vec![0.0; total_samples];
            for k in 1..total_samples {
                let v = 0.5 * (v_lim[k - 1] + v_lim[k]);
                let m_mid = 0.5 * (weighted[k - 1] + weighted[k]);
                let tau = invert_min_jerk(m_mid / warped_total);
                let nominal = warped_total * min_jerk_rate(tau) / duration_s;
                let g = if v.is_finite() && v > 0.0 { (nominal / v).max(1.0) } else { 1.0 };
                m_acc += steps[k] * g;
                next[k] = m_acc;
            }
            weighted = next;
            let settled = (m_acc - warped_total).abs() <= 1e-10 * m_acc;
            warped_total = m_acc;
            if settled {
                break;
            }
        }

        ArcLengthTable {
            params,
            weighted,
            weighted_total: warped_total,
        }
    }
}

/// d(min_jerk_fraction)/d(tau).
fn min_jerk_rate(tau: f64) -> f64 {
    let t = tau.clamp(0.0, 1.0);
    30.0 * t * t * (1.0 - t) * (1.0 - t)
}

const INV_MIN_JERK_BINS: usize = 4096;

fn inverse_min_jerk_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        (0..=INV_MIN_JERK_BINS)
            .map(|i| {
                let f = i as f64 / INV_MIN_JERK_BINS as f64;
                let mut lo = 0.0;
                let mut hi = 1.0;
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if min_jerk_fraction(mid) < f {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            })
            .collect()
    })
}

/// Inverse of [`min_jerk_fraction`] via a fixed lookup table (monotone).
fn invert_min_jerk(frac: f64) -> f64 {
    let table = inverse_min_jerk_table();
    let f = frac.clamp(0.0, 1.0) * INV_MIN_JERK_BINS as f64;
    let i = (f.floor() as usize).min(INV_MIN_JERK_BINS - 1);
    let t = f - i as f64;
    table[i] * (1.0 - t) + table[i + 1] * t
}


fn circumcircle_curvature(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ac = [c[0] - a[0], c[1] - a[1]];
    let bc = [c[0] - b[0], c[1] - b[1]];
    let cross = (ab[0] * ac[1] - ab[1] * ac[0]).abs();
    let denom = (ab[0] * ab[0] + ab[1] * ab[1]).sqrt()
        * (ac[0] * ac[0] + ac[1] * ac[1]).sqrt()
        * (bc[0] * bc[0] + bc[1] * bc[1]).sqrt();
    if denom < 1e-18 {
        0.0
    } else {
        2.0 * cross / denom
    }
}

struct ArcLengthTable {
    params: Vec<f64>,
    weighted: Vec<f64>,
    weighted_total: f64,
}

impl ArcLengthTable {
    /// Spline parameter at cumulative weighted length `m` (linear
    /// interpolation between table rows).
    fn param_at_weighted(&self, m: f64) -> f64 {
        if m <= 0.0 {
            return self.params[0];
        }
        if m >= self.weighted_total {
            return *self.params.last().unwrap();
        }
        let idx = self.weighted.partition_point(|&l| l < m);
        let (l0, l1) = (self.weighted[idx - 1], self.weighted[idx]);
        let (u0, u1) = (self.params[idx - 1], self.params[idx]);
        if l1 - l0 < 1e-15 {
            return u0;
        }
        u0 + (u1 - u0) * (m - l0) / (l1 - l0)
    }
}

/// One axis of band-limited jitter: three low-order sinusoids under a
/// sin(pi*tau) envelope, so the stroke endpoints stay exact.
struct JitterTrack {
    comps: [(f64, f64, f64); 3], // (amplitude, cycles, phase)
}

impl JitterTrack {
    fn draw(rng: &mut ChaCha12Rng) -> Self {
        let mut comps = [(0.0, 0.0, 0.0); 3];
        for (h, c) in comps.iter_mut().enumerate() {
            let amp = JITTER_AMP * rng.random_range(0.5..1.0) / (h + 1) as f64;
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            *c = (amp, (h + 1) as f64, phase);
        }
        JitterTrack { comps }
    }

    fn eval(&self, tau: f64) -> f64 {
        let env = (std::f64::consts::PI * tau).sin();
        self.comps
            .iter()
            .map(|(a, cycles, phase)| a * (std::f64::consts::TAU * cycles * tau + phase).sin())
            .sum::<f64>()
            * env
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn templates_cover_all_digits_distinctly() {
        let templates = builtin_templates();
        assert_eq!(templates.len(), 10);
        for (i, a) in templates.iter().enumerate() {
            a.validate().unwrap();
            for b in &templates[i + 1..] {
                assert_ne!(a.control_points, b.control_points, "digits {} and {}", a.digit, b.digit);
            }
        }
    }

    #[test]
    fn digit_zero_is_closed() {
        let t = digit_template(0).unwrap();
        let first = t.control_points.first().unwrap();
        let last = t.control_points.last().unwrap();
        let d = ((first[0] - last[0]).powi(2) + (first[1] - last[1]).powi(2)).sqrt();
        assert!(d <= 0.05, "digit 0 gap {d}");
    }

    #[test]
    fn digit_one_is_narrow() {
        let t = digit_template(1).unwrap();
        let xs: Vec<f64> = t.control_points.iter().map(|p| p[0]).collect();
        let ys: Vec<f64> = t.control_points.iter().map(|p| p[1]).collect();
        let width = xs.iter().cloned().fold(f64::MIN, f64::max)
            - xs.iter().cloned().fold(f64::MAX, f64::min);
        let height = ys.iter().cloned().fold(f64::MIN, f64::max)
            - ys.iter().cloned().fold(f64::MAX, f64::min);
        assert!(width / height < 0.4, "aspect {}", width / height);
    }

    #[test]
    fn unknown_digit_is_rejected() {
        assert!(matches!(digit_template(10), Err(SynthError::UnknownDigit(10))));
    }

    #[test]
    fn neutral_synthesis_is_deterministic_and_starts_at_first_point() {
        let t = digit_template(3).unwrap();
        let params = AugmentationParams::neutral();
        let a = synthesize_trajectory(t, &params, 0.15, 7).unwrap();
        let b = synthesize_trajectory(t, &params, 0.15, 7).unwrap();
        assert_eq!(a.points(), b.points());

        // With neutral rotation/size the start point is the first control
        // point, centred and scaled onto the plane.
        let expect = Vec3::new(
            0.0,
            (t.control_points[0][0] - 0.5) * 0.15,
            (t.control_points[0][1] - 0.5) * 0.15,
        );
        let got = a.points()[0];
        assert!((got - expect).norm() < 1e-9, "start {got:?} vs {expect:?}");
    }

    #[test]
    fn size_scale_doubles_bounding_box_diagonal() {
        let t = digit_template(5).unwrap();
        let mut p1 = AugmentationParams::neutral();
        p1.size_scale = 1.0;
        let mut p2 = p1;
        p2.size_scale = 2.0;
        let a = synthesize_trajectory(t, &p1, 0.15, 99).unwrap();
        let b = synthesize_trajectory(t, &p2, 0.15, 99).unwrap();
        let diag = |tr: &CartesianTrajectory| {
            let mut lo = [f64::MAX; 3];
            let mut hi = [f64::MIN; 3];
            for p in tr.points() {
                for (d, v) in [p.x, p.y, p.z].into_iter().enumerate() {
                    lo[d] = lo[d].min(v);
                    hi[d] = hi[d].max(v);
                }
            }
            ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2) + (hi[2] - lo[2]).powi(2)).sqrt()
        };
        let ratio = diag(&b) / diag(&a);
        assert!((ratio - 2.0).abs() < 1e-6, "diagonal ratio {ratio}");
    }

    #[test]
    fn canonical_three_seconds_gives_600_points() {
        let t = digit_template(0).unwrap(); // canonical 3.0 s
        let traj = synthesize_trajectory(t, &AugmentationParams::neutral(), 0.15, 0).unwrap();
        assert_eq!(traj.len(), 600);
        assert_eq!(traj.rate_hz(), 200.0);
        assert!(!traj.duration_clamped());
    }

    #[test]
    fn extreme_speed_clamps_duration_with_flag() {
        let t = digit_template(0).unwrap();
        let mut params = AugmentationParams::neutral();
        params.speed_scale = 0.25; // nominal 12 s -> clamp at 4 s
        let traj = synthesize_trajectory(t, &params, 0.15, 0).unwrap();
        assert!(traj.duration_clamped());
        assert!((traj.duration_s() - 4.0).abs() < 1e-6);
    }

    #[test]
    fn grid_sizes_match_level_counts() {
        assert_eq!(augmentation_grid(3).unwrap().len(), 81);
        assert_eq!(augmentation_grid(2).unwrap().len(), 16);
        let single = augmentation_grid(1).unwrap();
        assert_eq!(single.len(), 1);
        assert_eq!(single[0], AugmentationParams::neutral());
        assert!(matches!(augmentation_grid(0), Err(SynthError::BadLevels(0))));
        assert!(matches!(augmentation_grid(6), Err(SynthError::BadLevels(6))));
    }

    #[test]
    fn grid_has_no_duplicates_and_expected_values() {
        let grid = augmentation_grid(3).unwrap();
        for (i, a) in grid.iter().enumerate() {
            for b in &grid[i + 1..] {
                assert_ne!(a, b);
            }
        }
        let speeds: Vec<f64> = grid.iter().map(|p| p.speed_scale).collect();
        assert!(speeds.contains(&0.75) && speeds.contains(&1.0) && speeds.contains(&1.25));
    }

    #[test]
    fn grid_is_deterministic_lexicographic() {
        let a = augmentation_grid(3).unwrap();
        let b = augmentation_grid(3).unwrap();
        assert_eq!(a, b);
        // Innermost field (rotation) varies fastest.
        assert_eq!(a[0].rotation_deg, -10.0);
        assert_eq!(a[1].rotation_deg, 0.0);
        assert_eq!(a[2].rotation_deg, 10.0);
        assert_eq!(a[0].speed_scale, a[26].speed_scale);
    }

    #[test]
    fn durations_stay_in_envelope_across_grid() {
        for digit in 0..=9u8 {
            let template = digit_template(digit).unwrap();
            for params in augmentation_grid(3).unwrap() {
                let traj = synthesize_trajectory(template, &params, 0.15, 1).unwrap();
                let d = traj.duration_s();
                assert!((2.0..=4.0).contains(&d), "digit {digit} duration {d}");
                assert!(!traj.duration_clamped(), "digit {digit} clamped at {params:?}");
            }
        }
    }

    #[test]
    fn acceleration_bounded_by_min_jerk_peak() {
        for digit in 0..=9u8 {
            let template = digit_template(digit).unwrap();
            for (seed, params) in [
                (1, AugmentationParams::neutral()),
                (2, AugmentationParams { speed_scale: 1.25, size_scale: 1.2, wrist_angle_deg: 15.0, rotation_deg: -10.0 }),
            ] {
                let traj = synthesize_trajectory(template, &params, 0.15, seed).unwrap();
                let pts = traj.points();
                let rate = traj.rate_hz();
                let length: f64 = pts.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
                let bound = 10.0 * min_jerk_peak_accel(length, traj.duration_s());
                let mut max_acc: f64 = 0.0;
                for w in pts.windows(3) {
                    let acc = (w[2] - w[1] * 2.0 + w[0]) * (rate * rate);
                    max_acc = max_acc.max(acc.norm());
                }
                assert!(max_acc <= bound, "digit {digit}: max accel {max_acc} > bound {bound}");
            }
        }
    }

    #[test]
    fn resample_keeps_endpoints_and_count() {
        let t = digit_template(2).unwrap();
        let traj = synthesize_trajectory(t, &AugmentationParams::neutral(), 0.15, 3).unwrap();
        let out = traj.resample(122).unwrap();
        assert_eq!(out.len(), 122);
        // Spectrum truncation moves individual samples a little; endpoints
        // stay within a fraction of a millimetre.
        assert!((out.points()[0] - traj.points()[0]).norm() < 1e-3);
        // Rate rescaled by n/len.
        let want_rate = 200.0 * 122.0 / traj.len() as f64;
        assert!((out.rate_hz() - want_rate).abs() < 1e-9);
    }

    #[test]
    fn human_set_counts_and_uniform_labels() {
        let cfg = crate::imu::ImuConfig::default();
        let samples = generate_human_set(10, 5, &cfg).unwrap();
        assert_eq!(samples.len(), 100);
        let mut histogram = [0usize; 10];
        for s in &samples {
            assert_eq!(s.provenance(), crate::imu::Provenance::HumanLike);
            histogram[s.label() as usize] += 1;
        }
        assert!(histogram.iter().all(|&n| n == 10), "{histogram:?}");
    }

    #[test]
    fn human_set_is_deterministic() {
        let cfg = crate::imu::ImuConfig::default();
        let a = generate_human_set(1, 77, &cfg).unwrap();
        let b = generate_human_set(1, 77, &cfg).unwrap();
        assert_eq!(a, b);
        let c = generate_human_set(1, 78, &cfg).unwrap();
        assert_ne!(a, c);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        /// Rotating by theta then -theta returns the original point set.
        #[test]
        fn rotation_round_trips(theta in -180.0f64..180.0, seed in 0u64..500) {
            use rand::{Rng, SeedableRng};
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let mut pts: Vec<[f64; 2]> =
                (0..12).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
            let orig = pts.clone();
            rotate_in_plane(&mut pts, theta);
            rotate_in_plane(&mut pts, -theta);
            for (a, b) in pts.iter().zip(&orig) {
                prop_assert!((a[0] - b[0]).abs() < 1e-9);
                prop_assert!((a[1] - b[1]).abs() < 1e-9);
            }
        }

        /// Any speed draw from the default ranges keeps duration in [2, 4].
        #[test]
        fn sampled_durations_in_envelope(digit in 0u8..10, speed in 0.75f64..1.25) {
            let template = digit_template(digit).unwrap();
            let params = AugmentationParams { speed_scale: speed, ..AugmentationParams::neutral() };
            let traj = synthesize_trajectory(template, &params, 0.15, 11).unwrap();
            prop_assert!((2.0..=4.0).contains(&traj.duration_s()));
        }
    }
}
