//! Procedural tube anatomies, centerline camera paths and a sphere-traced
//! depth renderer.
//!
//! A [`TubeWorld`] is a smooth centerline (Catmull-Rom through seeded control
//! points, densely sampled into a polyline) with a radius that varies along
//! arclength. Its interior signed distance is `r(s) − dist(p, centerline)`:
//! positive inside, zero on the wall. Both ends are extended straight so rays
//! leaving through an end still see a wall.
//!
//! Camera convention: +z is the viewing direction, pixel `(col, row)` looks
//! along `((col + 0.5 − cx)/fx, (row + 0.5 − cy)/fy, 1)`, and depth is the
//! z-component of the hit point in camera coordinates.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::depth::DepthMap;
use crate::error::{Error, Result};
use crate::pose::Trajectory;
use crate::se3::{Pose, Quaternion, RotationMatrix, Vec3};
use crate::DEPTH_FAR_PLANE_CM;

/// Smallest and largest admissible tube radius, centimeters.
pub const RADIUS_BOUNDS: (f64, f64) = (0.5, 4.0);
/// Required ratio between the smallest radius of curvature and the largest
/// tube radius.
pub const CURVATURE_MARGIN: f64 = 1.5;
/// Distance below which a marched ray counts as a wall hit, centimeters.
pub const HIT_TOLERANCE: f64 = 1e-5;
pub const STEP_SAFETY: f64 = 0.9;
pub const MAX_STEPS: usize = 512;
/// Minimum clearance between a sampled camera and the wall, centimeters.
pub const CAMERA_CLEARANCE: f64 = 0.1;

const SUBDIVISIONS: usize = 20;
const END_EXTENSION: f64 = 40.0;

/// Pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    /// Native image side of the challenge frames.
    pub const CHALLENGE_SIZE: usize = 475;
    pub const CHALLENGE_FOCAL: f64 = 227.6;

    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0 && fx.is_finite() && fy.is_finite()) {
            return Err(Error::Geometry(format!("focal lengths must be positive (fx={fx}, fy={fy})")));
        }
        if !(cx.is_finite() && cy.is_finite()) {
            return Err(Error::Geometry("principal point must be finite".into()));
        }
        Ok(Intrinsics { fx, fy, cx, cy })
    }

    /// Challenge-like field of view rescaled to a square image of `size`
    /// pixels, principal point at the image center.
    pub fn challenge_like(size: usize) -> Self {
        let k = size as f64 / Self::CHALLENGE_SIZE as f64;
        let c = size as f64 / 2.0;
        Intrinsics { fx: Self::CHALLENGE_FOCAL * k, fy: Self::CHALLENGE_FOCAL * k, cx: c, cy: c }
    }

    /// Camera-frame ray through the pixel center, with unit z.
    pub fn pixel_ray(&self, col: usize, row: usize) -> Vec3 {
        Vec3::new((col as f64 + 0.5 - self.cx) / self.fx, (row as f64 + 0.5 - self.cy) / self.fy, 1.0)
    }

    pub fn contains_principal_point(&self, width: usize, height: usize) -> bool {
        (0.0..=width as f64).contains(&self.cx) && (0.0..=height as f64).contains(&self.cy)
    }
}

/// Shape parameters of a procedural tube.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TubeParams {
    /// Centerline length, centimeters.
    pub length: f64,
    /// Distance between successive control points, centimeters.
    pub control_spacing: f64,
    /// Largest heading change between successive control segments, degrees.
    pub max_turn_deg: f64,
    /// Largest deviation of any heading from +z, degrees.
    pub max_heading_deg: f64,
    pub base_radius: f64,
    pub radius_amplitude: f64,
    /// Dominant period of the radius variation, centimeters.
    pub radius_wavelength: f64,
}

impl Default for TubeParams {
    fn default() -> Self {
        TubeParams {
            length: 120.0,
            control_spacing: 5.0,
            max_turn_deg: 12.0,
            max_heading_deg: 50.0,
            base_radius: 2.0,
            radius_amplitude: 0.6,
            radius_wavelength: 25.0,
        }
    }
}

impl TubeParams {
    /// Straight cylinder along +z.
    pub fn straight_cylinder(radius: f64, length: f64) -> Self {
        TubeParams {
            length,
            control_spacing: 5.0,
            max_turn_deg: 0.0,
            max_heading_deg: 0.0,
            base_radius: radius,
            radius_amplitude: 0.0,
            radius_wavelength: 25.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.length) || !positive(self.control_spacing) || !positive(self.radius_wavelength) {
            return Err(Error::Geometry("length, control spacing and wavelength must be positive".into()));
        }
        if !(0.0..180.0).contains(&self.max_turn_deg) || !(0.0..90.0).contains(&self.max_heading_deg) {
            return Err(Error::Geometry("turn must be in [0, 180) and heading cone in [0, 90) degrees".into()));
        }
        let (lo, hi) = (self.base_radius - self.radius_amplitude, self.base_radius + self.radius_amplitude);
        if self.radius_amplitude < 0.0 || lo < RADIUS_BOUNDS.0 || hi > RADIUS_BOUNDS.1 {
            return Err(Error::Geometry(format!(
                "radius range [{lo}, {hi}] leaves [{}, {}]",
                RADIUS_BOUNDS.0, RADIUS_BOUNDS.1
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct CenterSample {
    pos: Vec3,
    /// Arclength from the start of the tube proper (negative on the
    /// leading extension).
    s: f64,
    radius: f64,
}

/// A tubular anatomy.
#[derive(Debug, Clone, PartialEq)]
pub struct TubeWorld {
    pub params: TubeParams,
    pub seed: u64,
    pub control_points: Vec<Vec3>,
    samples: Vec<CenterSample>,
    /// Transported unit normal per sample.
    normals: Vec<Vec3>,
    radius_phases: [f64; 2],
    min_curvature_radius: f64,
}

fn rotate_about(v: Vec3, axis: Vec3, angle: f64) -> Vec3 {
    Quaternion::from_axis_angle(axis, angle).map(|q| q.rotate(v)).unwrap_or(v)
}

fn angle_between(a: Vec3, b: Vec3) -> f64 {
    let c = a.dot(b) / (a.norm() * b.norm());
    libm::acos(c.clamp(-1.0, 1.0))
}

fn any_perpendicular(v: Vec3) -> Vec3 {
    let helper = if libm::fabs(v.x) < 0.9 { Vec3::new(1.0, 0.0, 0.0) } else { Vec3::new(0.0, 1.0, 0.0) };
    v.cross(helper).normalized().unwrap_or(Vec3::new(0.0, 1.0, 0.0))
}

fn catmull_rom(p0: Vec3, p1: Vec3, p2: Vec3, p3: Vec3, t: f64) -> Vec3 {
    let t2 = t * t;
    let t3 = t2 * t;
    (p1 * 2.0 + (p2 - p0) * t + (p0 * 2.0 - p1 * 5.0 + p2 * 4.0 - p3) * t2 + (-p0 + p1 * 3.0 - p2 * 3.0 + p3) * t3)
        * 0.5
}

/// Distance from `p` to segment `a→b`, and the segment parameter in [0, 1].
fn segment_distance(p: Vec3, a: Vec3, b: Vec3) -> (f64, f64) {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 { ((p - a).dot(ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    ((p - (a + ab * t)).norm(), t)
}

/// Builds a seeded tube; fails if the sampled centerline bends tighter than
/// the curvature margin allows.
pub fn make_tube(params: &TubeParams, seed: u64) -> Result<TubeWorld> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let n_segments = libm::ceil(params.length / params.control_spacing) as usize;
    let axis_z = Vec3::new(0.0, 0.0, 1.0);
    let max_turn = params.max_turn_deg.to_radians();
    let cone = params.max_heading_deg.to_radians();
    let mut heading = axis_z;
    let mut control_points = vec![Vec3::ZERO];
    for _ in 0..n_segments {
        if max_turn > 0.0 {
            let theta = max_turn * rng.gen_range(0.5..1.0);
            let spin = rng.gen_range(0.0..2.0 * PI);
            let axis = rotate_about(any_perpendicular(heading), heading, spin);
            let mut next = rotate_about(heading, axis, theta);
            if angle_between(next, axis_z) > cone {
                next = rotate_about(heading, axis, -theta);
            }
            if angle_between(next, axis_z) > cone {
                // steer back toward +z
                let back = heading.cross(axis_z).normalized().unwrap_or(axis);
                next = rotate_about(heading, back, theta.min(angle_between(heading, axis_z)));
            }
            heading = next.normalized().unwrap_or(axis_z);
        }
        let last = *control_points.last().expect("non-empty");
        control_points.push(last + heading * params.control_spacing);
    }

    // dense polyline through the control points
    let m = control_points.len();
    let ghost_start = control_points[0] * 2.0 - control_points[1];
    let ghost_end = control_points[m - 1] * 2.0 - control_points[m - 2];
    let cp = |i: isize| -> Vec3 {
        if i < 0 {
            ghost_start
        } else if i as usize >= m {
            ghost_end
        } else {
            control_points[i as usize]
        }
    };
    let mut points = Vec::with_capacity((m - 1) * SUBDIVISIONS + 1);
    for seg in 0..m - 1 {
        let i = seg as isize;
        for k in 0..SUBDIVISIONS {
            let t = k as f64 / SUBDIVISIONS as f64;
            points.push(catmull_rom(cp(i - 1), cp(i), cp(i + 1), cp(i + 2), t));
        }
    }
    points.push(control_points[m - 1]);

    // curvature of the tube proper, from turning angles between segments
    let mut min_curvature_radius = f64::INFINITY;
    for w in points.windows(3) {
        let (a, b) = (w[1] - w[0], w[2] - w[1]);
        let turn = angle_between(a, b);
        if turn > 1e-12 {
            let r = 0.5 * (a.norm() + b.norm()) / turn;
            min_curvature_radius = min_curvature_radius.min(r);
        }
    }
    let max_radius = params.base_radius + params.radius_amplitude;
    if min_curvature_radius <= CURVATURE_MARGIN * max_radius {
        return Err(Error::Geometry(format!(
            "centerline radius of curvature {min_curvature_radius:.3} cm is not above {CURVATURE_MARGIN} x max radius {max_radius} cm"
        )));
    }

    let radius_phases = [rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..2.0 * PI)];

    // straight extensions past both ends
    let step = params.control_spacing / SUBDIVISIONS as f64;
    let n_ext = libm::ceil(END_EXTENSION / step) as usize;
    let t_start = (points[1] - points[0]).normalized().unwrap_or(axis_z);
    let t_end = (points[points.len() - 1] - points[points.len() - 2]).normalized().unwrap_or(axis_z);
    let mut all = Vec::with_capacity(points.len() + 2 * n_ext);
    for k in (1..=n_ext).rev() {
        all.push(points[0] - t_start * (k as f64 * step));
    }
    all.extend_from_slice(&points);
    let last = points[points.len() - 1];
    for k in 1..=n_ext {
        all.push(last + t_end * (k as f64 * step));
    }

    let mut samples = Vec::with_capacity(all.len());
    let mut s = -(n_ext as f64) * step;
    for (i, p) in all.iter().enumerate() {
        if i > 0 {
            let d = (*p - all[i - 1]).norm();
            // the extension is laid out at exactly `step`; the spline part
            // is measured
            s += d;
        }
        samples.push(CenterSample { pos: *p, s, radius: 0.0 });
    }
    // re-zero arclength at the first spline point
    let s0 = samples[n_ext].s;
    for sample in &mut samples {
        sample.s -= s0;
    }

    let mut world = TubeWorld {
        params: *params,
        seed,
        control_points,
        samples,
        normals: Vec::new(),
        radius_phases,
        min_curvature_radius,
    };
    for i in 0..world.samples.len() {
        let s = world.samples[i].s;
        world.samples[i].radius = world.radius_profile(s);
    }

    // parallel-transported normals
    let mut normals = Vec::with_capacity(world.samples.len());
    let mut n = any_perpendicular(world.tangent_at_sample(0));
    if world.params.max_turn_deg == 0.0 {
        n = Vec3::new(1.0, 0.0, 0.0);
    }
    for i in 0..world.samples.len() {
        let t = world.tangent_at_sample(i);
        n = (n - t * n.dot(t)).normalized().unwrap_or_else(|| any_perpendicular(t));
        normals.push(n);
    }
    world.normals = normals;
    Ok(world)
}

impl TubeWorld {
    pub fn length(&self) -> f64 {
        self.params.length
    }

    pub fn max_radius(&self) -> f64 {
        self.params.base_radius + self.params.radius_amplitude
    }

    pub fn min_curvature_radius(&self) -> f64 {
        self.min_curvature_radius
    }

    /// Radius as a function of arclength; stays within base ± amplitude.
    pub fn radius_profile(&self, s: f64) -> f64 {
        let p = &self.params;
        if p.radius_amplitude == 0.0 {
            return p.base_radius;
        }
        let w = 2.0 * PI / p.radius_wavelength;
        let wave =
            0.6 * libm::sin(w * s + self.radius_phases[0]) + 0.4 * libm::sin(2.7 * w * s + self.radius_phases[1]);
        p.base_radius + p.radius_amplitude * wave
    }

    fn tangent_at_sample(&self, i: usize) -> Vec3 {
        let n = self.samples.len();
        let (a, b) = if i + 1 < n { (i, i + 1) } else { (i - 1, i) };
        (self.samples[b].pos - self.samples[a].pos).normalized().unwrap_or(Vec3::new(0.0, 0.0, 1.0))
    }

    fn segment_at(&self, s: f64) -> (usize, f64) {
        let idx = self.samples.partition_point(|c| c.s <= s).clamp(1, self.samples.len() - 1) - 1;
        let (a, b) = (self.samples[idx], self.samples[idx + 1]);
        let t = ((s - a.s) / (b.s - a.s)).clamp(0.0, 1.0);
        (idx, t)
    }

    /// Centerline point at arclength `s`.
    pub fn centerline_point(&self, s: f64) -> Vec3 {
        let (i, t) = self.segment_at(s);
        let (a, b) = (self.samples[i].pos, self.samples[i + 1].pos);
        a + (b - a) * t
    }

    /// Unit tangent, transported normal and binormal at arclength `s`.
    pub fn frame_at(&self, s: f64) -> (Vec3, Vec3, Vec3) {
        let (i, _) = self.segment_at(s);
        let t = self.tangent_at_sample(i);
        let n = (self.normals[i] - t * self.normals[i].dot(t)).normalized().unwrap_or_else(|| any_perpendicular(t));
        (t, n, t.cross(n))
    }

    /// Distance to the centerline, the segment it was measured on, and the
    /// arclength of the closest point. Searches locally from `hint`.
    fn closest_local(&self, p: Vec3, hint: usize) -> (f64, usize, f64) {
        let last = self.samples.len() - 2;
        let seg = |i: usize| segment_distance(p, self.samples[i].pos, self.samples[i + 1].pos);
        let mut i = hint.min(last);
        let (mut d, mut t) = seg(i);
        loop {
            if i < last {
                let (dn, tn) = seg(i + 1);
                if dn < d {
                    (i, d, t) = (i + 1, dn, tn);
                    continue;
                }
            }
            if i > 0 {
                let (dp, tp) = seg(i - 1);
                if dp < d {
                    (i, d, t) = (i - 1, dp, tp);
                    continue;
                }
            }
            break;
        }
        (d, i, t)
    }

    fn closest_global(&self, p: Vec3) -> (f64, usize, f64) {
        let mut best = (f64::INFINITY, 0, 0.0);
        for i in 0..self.samples.len() - 1 {
            let (d, t) = segment_distance(p, self.samples[i].pos, self.samples[i + 1].pos);
            if d < best.0 {
                best = (d, i, t);
            }
        }
        best
    }

    fn radius_on_segment(&self, i: usize, t: f64) -> f64 {
        let (a, b) = (self.samples[i].radius, self.samples[i + 1].radius);
        a + (b - a) * t
    }

    /// Interior signed distance: positive inside the tube.
    pub fn signed_distance(&self, p: Vec3) -> f64 {
        let (d, i, t) = self.closest_global(p);
        self.radius_on_segment(i, t) - d
    }

    fn signed_distance_local(&self, p: Vec3, hint: &mut usize) -> f64 {
        let (d, i, t) = self.closest_local(p, *hint);
        *hint = i;
        self.radius_on_segment(i, t) - d
    }

    /// Arclength of the centerline point closest to `p`.
    pub fn arclength_of(&self, p: Vec3) -> f64 {
        let (_, i, t) = self.closest_global(p);
        let (a, b) = (self.samples[i].s, self.samples[i + 1].s);
        a + (b - a) * t
    }

    /// Distance from `p` to the centerline and the tube radius there.
    pub fn radial_position(&self, p: Vec3) -> (f64, f64) {
        let (d, i, t) = self.closest_global(p);
        (d, self.radius_on_segment(i, t))
    }
}

/// How a camera path is laid along a tube.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrajectoryPlan {
    pub n_frames: usize,
    /// Arclength of the first frame, centimeters.
    pub start: f64,
    /// Centerline advance per frame, centimeters.
    pub step: f64,
    /// Stationary standard deviation of the lateral offset, centimeters.
    pub lateral_sigma: f64,
    /// Stationary standard deviation of each rotation-vector component,
    /// degrees.
    pub angular_sigma_deg: f64,
    /// Frame-to-frame correlation of the perturbation processes, in [0, 1).
    pub correlation: f64,
    pub seed: u64,
    /// RNG stream; distinct per trajectory.
    pub stream: u64,
}

impl Default for TrajectoryPlan {
    fn default() -> Self {
        TrajectoryPlan {
            n_frames: 200,
            start: 2.0,
            step: 0.1,
            lateral_sigma: 0.3,
            angular_sigma_deg: 3.0,
            correlation: 0.95,
            seed: 0,
            stream: 0,
        }
    }
}

impl TrajectoryPlan {
    pub fn label(&self) -> String {
        format!("traj_{:03}", self.stream)
    }

    fn validate(&self, world: &TubeWorld) -> Result<()> {
        if self.n_frames < 2 {
            return Err(Error::Plan(format!("need at least 2 frames, got {}", self.n_frames)));
        }
        if !(self.lateral_sigma >= 0.0 && self.angular_sigma_deg >= 0.0) {
            return Err(Error::Plan("perturbation sigmas must be non-negative".into()));
        }
        if self.step.is_nan() || self.step <= 0.0 || !(0.0..1.0).contains(&self.correlation) || self.start < 0.0 {
            return Err(Error::Plan("step must be positive, correlation in [0, 1), start ≥ 0".into()));
        }
        let end = self.start + self.step * (self.n_frames - 1) as f64;
        if end > world.length() {
            return Err(Error::Plan(format!(
                "path ends at arclength {end} cm beyond tube length {} cm",
                world.length()
            )));
        }
        Ok(())
    }
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; u1 in (0, 1]
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen::<f64>();
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * PI * u2)
}

/// Walks the centerline at `plan.step` per frame with smoothly correlated
/// lateral and angular perturbations. The camera's +z follows the tangent
/// before perturbation. A frame whose camera would leave the tube is redrawn
/// up to 100 times.
pub fn sample_trajectory(world: &TubeWorld, plan: &TrajectoryPlan) -> Result<Trajectory> {
    plan.validate(world)?;
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    rng.set_stream(plan.stream);

    let rho = plan.correlation;
    let innovation = libm::sqrt(1.0 - rho * rho);
    let ang_sigma = plan.angular_sigma_deg.to_radians();
    let mut lateral = [0.0f64; 2];
    let mut angular = [0.0f64; 3];
    let mut first = true;
    let mut poses = Vec::with_capacity(plan.n_frames);

    for k in 0..plan.n_frames {
        let s = plan.start + plan.step * k as f64;
        let center = world.centerline_point(s);
        let (t, n, b) = world.frame_at(s);
        let mut accepted = None;
        for _ in 0..100 {
            // the first frame draws from the stationary distribution
            let (keep, fresh) = if first { (0.0, 1.0) } else { (rho, innovation) };
            let cand_lat = [
                keep * lateral[0] + fresh * plan.lateral_sigma * standard_normal(&mut rng),
                keep * lateral[1] + fresh * plan.lateral_sigma * standard_normal(&mut rng),
            ];
            let cand_ang = [
                keep * angular[0] + fresh * ang_sigma * standard_normal(&mut rng),
                keep * angular[1] + fresh * ang_sigma * standard_normal(&mut rng),
                keep * angular[2] + fresh * ang_sigma * standard_normal(&mut rng),
            ];
            let position = center + n * cand_lat[0] + b * cand_lat[1];
            if world.signed_distance(position) > CAMERA_CLEARANCE {
                accepted = Some((position, cand_lat, cand_ang));
                break;
            }
        }
        let Some((position, lat, ang)) = accepted else {
            return Err(Error::Plan(format!("frame {k}: camera left the tube after 100 draws")));
        };
        lateral = lat;
        angular = ang;
        first = false;

        let base = Quaternion::from_matrix(&RotationMatrix::from_columns(n, b, t))?;
        let perturb = Quaternion::from_rotation_vector(Vec3::new(ang[0], ang[1], ang[2]));
        poses.push(Pose::new(position, base * perturb)?);
    }
    Trajectory::new(plan.label(), poses)
}

/// Per-pixel sphere tracer bound to one world, camera and image size.
#[derive(Debug, Clone, Copy)]
pub struct DepthRenderer<'a> {
    world: &'a TubeWorld,
    pose: Pose,
    rotation: RotationMatrix,
    intrinsics: Intrinsics,
    width: usize,
    height: usize,
    start_hint: usize,
}

impl<'a> DepthRenderer<'a> {
    /// Fails with a geometry error when the camera is not inside the tube.
    pub fn new(
        world: &'a TubeWorld,
        pose: &Pose,
        intrinsics: &Intrinsics,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyInput);
        }
        let (d, hint, t) = world.closest_global(pose.translation);
        if world.radius_on_segment(hint, t) - d <= 0.0 {
            return Err(Error::Geometry(format!(
                "camera at ({:.3}, {:.3}, {:.3}) is outside the tube",
                pose.translation.x, pose.translation.y, pose.translation.z
            )));
        }
        Ok(DepthRenderer {
            world,
            pose: *pose,
            rotation: pose.rotation.to_matrix(),
            intrinsics: *intrinsics,
            width,
            height,
            start_hint: hint,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// z-depth of one pixel, clamped to the far plane.
    pub fn depth_at(&self, col: usize, row: usize) -> f64 {
        let ray_cam = self.intrinsics.pixel_ray(col, row);
        let ray_len = ray_cam.norm();
        let dir = self.rotation.mul_vec(ray_cam) * (1.0 / ray_len);
        let origin = self.pose.translation;
        // t is the distance along the unit ray; z-depth = t / |ray_cam|
        let t_far = DEPTH_FAR_PLANE_CM * ray_len;
        let mut hint = self.start_hint;
        let mut t = 0.0;
        for _ in 0..MAX_STEPS {
            let d = self.world.signed_distance_local(origin + dir * t, &mut hint);
            if d < HIT_TOLERANCE {
                return (t / ray_len).min(DEPTH_FAR_PLANE_CM);
            }
            t += STEP_SAFETY * d;
            if t > t_far {
                return DEPTH_FAR_PLANE_CM;
            }
        }
        DEPTH_FAR_PLANE_CM
    }

    /// Fills one image row.
    pub fn render_row(&self, row: usize, out: &mut [f64]) {
        for (col, v) in out.iter_mut().enumerate().take(self.width) {
            *v = self.depth_at(col, row);
        }
    }
}

/// Sphere-traced z-depth image, serially in row-major order.
pub fn render_depth(
    world: &TubeWorld,
    pose: &Pose,
    intrinsics: &Intrinsics,
    width: usize,
    height: usize,
) -> Result<DepthMap> {
    let renderer = DepthRenderer::new(world, pose, intrinsics, width, height)?;
    let mut data = vec![0.0; width * height];
    for (row, chunk) in data.chunks_mut(width).enumerate() {
        renderer.render_row(row, chunk);
    }
    DepthMap::new(width, height, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use colobench_oracle as oracle;

    fn cylinder() -> TubeWorld {
        make_tube(&TubeParams::straight_cylinder(2.0, 100.0), 0).unwrap()
    }

    fn axis_camera(s: f64) -> Pose {
        Pose::from_translation(Vec3::new(0.0, 0.0, s))
    }

    #[test]
    fn straight_cylinder_is_valid() {
        let w = cylinder();
        assert!(w.min_curvature_radius().is_infinite());
        assert_eq!(w.radius_profile(13.0), 2.0);
        assert!((w.signed_distance(Vec3::new(0.5, 0.0, 30.0)) - 1.5).abs() < 1e-12);
        assert!(w.signed_distance(Vec3::new(3.0, 0.0, 30.0)) < 0.0);
    }

    #[test]
    fn same_seed_same_tube() {
        let p = TubeParams::default();
        assert_eq!(make_tube(&p, 42).unwrap().control_points, make_tube(&p, 42).unwrap().control_points);
        assert_ne!(make_tube(&p, 42).unwrap().control_points, make_tube(&p, 43).unwrap().control_points);
    }

    #[test]
    fn random_tubes_satisfy_invariants() {
        let p = TubeParams::default();
        for seed in 0..100 {
            let w = make_tube(&p, seed).unwrap();
            assert!(w.min_curvature_radius() > CURVATURE_MARGIN * w.max_radius());
            let mut s = -5.0;
            while s < p.length + 5.0 {
                let r = w.radius_profile(s);
                assert!((RADIUS_BOUNDS.0..=RADIUS_BOUNDS.1).contains(&r));
                s += 0.37;
            }
        }
    }

    #[test]
    fn tight_bends_are_rejected() {
        let p = TubeParams {
            control_spacing: 1.0,
            max_turn_deg: 60.0,
            max_heading_deg: 80.0,
            base_radius: 3.5,
            radius_amplitude: 0.5,
            ..TubeParams::default()
        };
        for seed in 0..5 {
            assert!(matches!(make_tube(&p, seed), Err(Error::Geometry(_))));
        }
        let too_wide = TubeParams { base_radius: 3.8, radius_amplitude: 0.5, ..TubeParams::default() };
        assert!(matches!(make_tube(&too_wide, 0), Err(Error::Geometry(_))));
    }

    #[test]
    fn unperturbed_path_on_cylinder_is_straight() {
        let w = cylinder();
        let plan =
            TrajectoryPlan { n_frames: 30, lateral_sigma: 0.0, angular_sigma_deg: 0.0, ..TrajectoryPlan::default() };
        let traj = sample_trajectory(&w, &plan).unwrap();
        let q0 = traj.poses[0].rotation;
        for (k, p) in traj.poses.iter().enumerate() {
            assert_eq!(p.rotation, q0);
            assert!(p.translation.x.abs() < 1e-12 && p.translation.y.abs() < 1e-12);
            assert!((p.translation.z - (plan.start + plan.step * k as f64)).abs() < 1e-9);
        }
        // camera looks down the tube
        assert!((q0.rotate(Vec3::new(0.0, 0.0, 1.0)) - Vec3::new(0.0, 0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn same_plan_same_trajectory() {
        let w = make_tube(&TubeParams::default(), 7).unwrap();
        let plan = TrajectoryPlan { seed: 3, stream: 1, ..TrajectoryPlan::default() };
        assert_eq!(sample_trajectory(&w, &plan).unwrap(), sample_trajectory(&w, &plan).unwrap());
        let other = TrajectoryPlan { stream: 2, ..plan };
        assert_ne!(sample_trajectory(&w, &plan).unwrap(), sample_trajectory(&w, &other).unwrap());
    }

    #[test]
    fn random_plans_stay_inside() {
        for i in 0..100u64 {
            let w = make_tube(&TubeParams::default(), i % 10).unwrap();
            let plan = TrajectoryPlan {
                n_frames: 60,
                start: (i % 7) as f64 * 3.0,
                step: 0.2 + (i % 5) as f64 * 0.1,
                lateral_sigma: 0.1 + (i % 4) as f64 * 0.2,
                seed: i,
                stream: i,
                ..TrajectoryPlan::default()
            };
            let traj = sample_trajectory(&w, &plan).unwrap();
            for p in &traj.poses {
                let (dist, radius) = w.radial_position(p.translation);
                assert!(dist < radius);
                assert!((p.rotation.norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn plan_errors() {
        let w = cylinder();
        let long = TrajectoryPlan { n_frames: 2000, step: 1.0, ..TrajectoryPlan::default() };
        assert!(matches!(sample_trajectory(&w, &long), Err(Error::Plan(_))));
        let single = TrajectoryPlan { n_frames: 1, ..TrajectoryPlan::default() };
        assert!(matches!(sample_trajectory(&w, &single), Err(Error::Plan(_))));
        // offsets far larger than the tube cannot be placed
        let wild = TrajectoryPlan { lateral_sigma: 50.0, ..TrajectoryPlan::default() };
        assert!(matches!(sample_trajectory(&w, &wild), Err(Error::Plan(_))));
    }

    #[test]
    fn border_pixel_matches_cylinder_closed_form() {
        let w = cylinder();
        let k = Intrinsics::challenge_like(Intrinsics::CHALLENGE_SIZE);
        let renderer = DepthRenderer::new(&w, &axis_camera(40.0), &k, 475, 475).unwrap();
        // left border pixel on the central row: ray angle α from the axis
        let ray = k.pixel_ray(0, 237);
        assert_eq!(ray.y, 0.0);
        let alpha = libm::atan(ray.x.abs());
        let expected = 2.0 * alpha.cos() / alpha.sin();
        assert!((renderer.depth_at(0, 237) - expected).abs() < 1e-3);
    }

    #[test]
    fn sphere_tracing_matches_quadratic_oracle() {
        let w = cylinder();
        let k = Intrinsics::challenge_like(64);
        for (x, y) in [(0.0, 0.0), (0.6, -0.3)] {
            let pose = Pose::from_translation(Vec3::new(x, y, 30.0));
            let map = render_depth(&w, &pose, &k, 64, 64).unwrap();
            let mut worst = 0.0f64;
            for row in 0..64 {
                for col in 0..64 {
                    let r = k.pixel_ray(col, row);
                    let exact = oracle::cylinder_hit_depth([x, y], r.to_array(), 2.0)
                        .unwrap_or(f64::INFINITY)
                        .min(DEPTH_FAR_PLANE_CM);
                    worst = worst.max((map.get(col, row) - exact).abs());
                }
            }
            assert!(worst < 1e-3, "max diff {worst}");
        }
    }

    #[test]
    fn narrow_field_of_view_sees_only_far_plane() {
        let w = cylinder();
        let k = Intrinsics::new(1e4, 1e4, 8.0, 8.0).unwrap();
        let map = render_depth(&w, &axis_camera(20.0), &k, 16, 16).unwrap();
        assert!(map.data().iter().all(|&d| d == DEPTH_FAR_PLANE_CM));
    }

    #[test]
    fn camera_outside_is_rejected() {
        let w = cylinder();
        let k = Intrinsics::challenge_like(8);
        let pose = Pose::from_translation(Vec3::new(5.0, 0.0, 20.0));
        assert!(matches!(render_depth(&w, &pose, &k, 8, 8), Err(Error::Geometry(_))));
    }

    #[test]
    fn rendered_depth_is_continuous() {
        let w = make_tube(&TubeParams::default(), 5).unwrap();
        let plan = TrajectoryPlan { n_frames: 3, seed: 5, ..TrajectoryPlan::default() };
        let traj = sample_trajectory(&w, &plan).unwrap();
        let k = Intrinsics::challenge_like(48);
        let map = render_depth(&w, &traj.poses[1], &k, 48, 48).unwrap();
        assert!(map.data().iter().all(|&d| d > 0.0 && d <= DEPTH_FAR_PLANE_CM));
        // Neighbouring rays differ by about 1/fx radians. Away from the far
        // clamp, a wall met at grazing angle β moves by ≈ depth·(Δangle)/tan β;
        // with β bounded below by the wall slope this stays well under the
        // loose bound used here.
        let dtheta = 1.0 / k.fx;
        for row in 0..48 {
            for col in 0..47 {
                let (a, b) = (map.get(col, row), map.get(col + 1, row));
                if a < DEPTH_FAR_PLANE_CM && b < DEPTH_FAR_PLANE_CM {
                    let bound = a.max(b) * a.max(b) * dtheta * 2.0 + 0.05;
                    assert!((a - b).abs() <= bound, "({col},{row}): {a} vs {b}");
                }
            }
        }
    }
}
