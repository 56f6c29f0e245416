//! Analytic workpiece surfaces and on-surface reference paths.
//!
//! Three shapes cover the shipped scenarios: an infinite plane, a sinusoidal
//! extrusion (a wavy sheet, constant along one horizontal axis), and a dome
//! (sphere). Each answers point queries with a signed distance (negative
//! inside the material), the outward surface normal, and the closest surface
//! point. Queries are the ground truth that the contact model and the run
//! metrics are built on; the controller itself never sees them.

use nalgebra::{Unit, Vector3};

use crate::error::{Error, Result};

/// Result of a point query against a surface.
#[derive(Debug, Clone)]
pub struct ContactQuery {
    /// Signed distance to the surface: negative means inside the material.
    pub signed_distance: f64,
    /// Outward unit normal at the closest surface point.
    pub true_normal: Unit<Vector3<f64>>,
    /// Closest point on the surface.
    pub closest_point: Vector3<f64>,
}

/// Reference path request: endpoints plus timing. The path is generated on
/// the surface at uniform speed (uniform arc length per sample).
#[derive(Debug, Clone)]
pub struct PathSpec {
    pub start: Vector3<f64>,
    pub end: Vector3<f64>,
    /// Path duration in seconds.
    pub duration: f64,
    /// Sample rate in Hz; samples are emitted at `t_i = i / rate`.
    pub rate: f64,
}

/// One reference-path sample: where the contact point should be at `t`, and
/// the nominal outward normal there.
#[derive(Debug, Clone)]
pub struct PathSample {
    pub t: f64,
    pub position: Vector3<f64>,
    pub normal: Unit<Vector3<f64>>,
}

/// Analytic surface shapes.
#[derive(Debug, Clone)]
pub enum SurfaceModel {
    /// Infinite plane through `point` with outward unit `normal`.
    Plane { point: Vector3<f64>, normal: Unit<Vector3<f64>> },
    /// Height field `z = z0 + amplitude * sin(k * s)` where `s` is the
    /// horizontal coordinate along `wave_dir` (perpendicular to the
    /// extrusion axis). The sheet is solid below the height field.
    SineExtrusion {
        amplitude: f64,
        /// Spatial angular frequency in rad/m (2*pi / wavelength).
        k: f64,
        z0: f64,
        /// Horizontal direction along which the profile varies.
        wave_dir: Unit<Vector3<f64>>,
    },
    /// Solid sphere ("dome" when resting on a table).
    Dome { center: Vector3<f64>, radius: f64 },
}

impl SurfaceModel {
    /// Plane through `point` with (not necessarily unit) outward `normal`.
    pub fn plane(point: Vector3<f64>, normal: Vector3<f64>) -> Result<Self> {
        let normal = Unit::try_new(normal, 1e-12)
            .ok_or_else(|| Error::InvalidSurface("plane normal is zero-length".into()))?;
        Ok(Self::Plane { point, normal })
    }

    /// Sinusoidal extrusion; `extrusion_axis` is the horizontal axis along
    /// which the profile is constant.
    pub fn sine_extrusion(
        amplitude: f64,
        k: f64,
        z0: f64,
        extrusion_axis: Vector3<f64>,
    ) -> Result<Self> {
        if !amplitude.is_finite() || amplitude < 0.0 {
            return Err(Error::InvalidSurface(format!("amplitude must be >= 0, got {amplitude}")));
        }
        if !k.is_finite() || k <= 0.0 {
            return Err(Error::InvalidSurface(format!("spatial frequency must be > 0, got {k}")));
        }
        let horizontal = Vector3::new(extrusion_axis.x, extrusion_axis.y, 0.0);
        let axis = Unit::try_new(horizontal, 1e-9).ok_or_else(|| {
            Error::InvalidSurface("extrusion axis must have a horizontal component".into())
        })?;
        let wave_dir = Unit::new_normalize(axis.cross(&Vector3::z()));
        Ok(Self::SineExtrusion { amplitude, k, z0, wave_dir })
    }

    pub fn dome(center: Vector3<f64>, radius: f64) -> Result<Self> {
        if !radius.is_finite() || radius <= 0.0 {
            return Err(Error::InvalidSurface(format!("dome radius must be > 0, got {radius}")));
        }
        Ok(Self::Dome { center, radius })
    }

    /// Height of a sine extrusion at a horizontal position.
    fn sine_height(
        amplitude: f64,
        k: f64,
        z0: f64,
        wave_dir: &Vector3<f64>,
        p: &Vector3<f64>,
    ) -> f64 {
        let s = wave_dir.x * p.x + wave_dir.y * p.y;
        z0 + amplitude * (k * s).sin()
    }

    /// Signed distance, outward normal, and closest point for `p`.
    ///
    /// The plane and dome answers are exact; the sine extrusion uses the
    /// vertical residual `p_z - h(x, y)` as its signed distance, whose sign
    /// and zero set agree with the exact distance while staying cheap and
    /// smooth. Errors with a degenerate-query report at the exact dome
    /// center, where no direction is preferred.
    pub fn query(&self, p: &Vector3<f64>) -> Result<ContactQuery> {
        match self {
            Self::Plane { point, normal } => {
                let signed_distance = normal.dot(&(p - point));
                Ok(ContactQuery {
                    signed_distance,
                    true_normal: *normal,
                    closest_point: p - normal.into_inner() * signed_distance,
                })
            }
            Self::SineExtrusion { amplitude, k, z0, wave_dir } => {
                let height = Self::sine_height(*amplitude, *k, *z0, wave_dir, p);
                let s = wave_dir.x * p.x + wave_dir.y * p.y;
                let slope = amplitude * k * (k * s).cos();
                let gradient = Vector3::new(-slope * wave_dir.x, -slope * wave_dir.y, 1.0);
                Ok(ContactQuery {
                    signed_distance: p.z - height,
                    true_normal: Unit::new_normalize(gradient),
                    closest_point: Vector3::new(p.x, p.y, height),
                })
            }
            Self::Dome { center, radius } => {
                let radial = p - center;
                let distance = radial.norm();
                if distance < 1e-12 {
                    return Err(Error::DegenerateQuery {
                        x: p.x,
                        y: p.y,
                        z: p.z,
                        reason: "point coincides with the dome center",
                    });
                }
                let true_normal = Unit::new_unchecked(radial / distance);
                Ok(ContactQuery {
                    signed_distance: distance - radius,
                    true_normal,
                    closest_point: center + true_normal.into_inner() * *radius,
                })
            }
        }
    }

    /// Uniform-speed reference path on the surface from `spec.start` to
    /// `spec.end`, sampled at `spec.rate` for `spec.duration` seconds
    /// (`duration * rate + 1` samples).
    ///
    /// Endpoints are first projected onto the surface (vertically for the
    /// sine sheet, radially for the dome, orthogonally for the plane). The
    /// dome path follows the great arc between the projected endpoints;
    /// coincident-with-center or antipodal endpoints have no usable arc and
    /// are rejected.
    pub fn desired_path(&self, spec: &PathSpec) -> Result<Vec<PathSample>> {
        if !spec.rate.is_finite() || spec.rate <= 0.0 {
            return Err(Error::PathOffSurface(format!(
                "sample rate must be positive, got {}",
                spec.rate
            )));
        }
        if !spec.duration.is_finite() || spec.duration < 0.0 {
            return Err(Error::PathOffSurface(format!(
                "duration must be >= 0, got {}",
                spec.duration
            )));
        }
        let steps = (spec.duration * spec.rate).round() as usize;
        let times: Vec<f64> = (0..=steps).map(|i| i as f64 / spec.rate).collect();

        match self {
            Self::Plane { .. } => {
                let a = self.query(&spec.start)?.closest_point;
                let b = self.query(&spec.end)?.closest_point;
                self.sample_line(&a, &b, &times)
            }
            Self::SineExtrusion { .. } => {
                let a = self.query(&spec.start)?.closest_point;
                let b = self.query(&spec.end)?.closest_point;
                self.sample_arc_length_uniform(&a, &b, &times)
            }
            Self::Dome { center, radius } => {
                let to_unit = |p: &Vector3<f64>, name: &str| -> Result<Unit<Vector3<f64>>> {
                    Unit::try_new(p - center, 1e-9).ok_or_else(|| {
                        Error::PathOffSurface(format!(
                            "{name} endpoint coincides with the dome center and cannot be projected"
                        ))
                    })
                };
                let a = to_unit(&spec.start, "start")?;
                let b = to_unit(&spec.end, "end")?;
                let cos_angle = a.dot(&b).clamp(-1.0, 1.0);
                let angle = cos_angle.acos();
                if angle > std::f64::consts::PI - 1e-9 {
                    return Err(Error::PathOffSurface(
                        "endpoints are antipodal on the dome; the great arc is ambiguous".into(),
                    ));
                }
                let samples = times
                    .iter()
                    .map(|&t| {
                        let u = if spec.duration > 0.0 { t / spec.duration } else { 0.0 };
                        let dir = if angle < 1e-12 {
                            a.into_inner()
                        } else {
                            (a.into_inner() * ((1.0 - u) * angle).sin()
                                + b.into_inner() * (u * angle).sin())
                                / angle.sin()
                        };
                        let normal = Unit::new_normalize(dir);
                        PathSample { t, position: center + normal.into_inner() * *radius, normal }
                    })
                    .collect();
                Ok(samples)
            }
        }
    }

    /// Straight on-surface segment (plane case: already arc-length uniform).
    fn sample_line(
        &self,
        a: &Vector3<f64>,
        b: &Vector3<f64>,
        times: &[f64],
    ) -> Result<Vec<PathSample>> {
        let last = times.last().copied().unwrap_or(0.0);
        times
            .iter()
            .map(|&t| {
                let u = if last > 0.0 { t / last } else { 0.0 };
                let position = a + (b - a) * u;
                let normal = self.query(&position)?.true_normal;
                Ok(PathSample { t, position, normal })
            })
            .collect()
    }

    /// Uniform-speed traversal of the surface curve above the straight
    /// horizontal segment from `a` to `b`.
    ///
    /// Builds a dense chord-length table of the lifted curve, then inverts it
    /// so successive samples advance by equal arc length.
    fn sample_arc_length_uniform(
        &self,
        a: &Vector3<f64>,
        b: &Vector3<f64>,
        times: &[f64],
    ) -> Result<Vec<PathSample>> {
        let lift = |u: f64| -> Result<Vector3<f64>> {
            let horizontal = a + (b - a) * u;
            Ok(self.query(&horizontal)?.closest_point)
        };
        let dense = (times.len().saturating_sub(1)).max(1000) * 4;
        let mut cumulative = Vec::with_capacity(dense + 1);
        let mut length = 0.0;
        let mut previous = lift(0.0)?;
        cumulative.push(0.0);
        for j in 1..=dense {
            let point = lift(j as f64 / dense as f64)?;
            length += (point - previous).norm();
            cumulative.push(length);
            previous = point;
        }
        let last = times.last().copied().unwrap_or(0.0);
        times
            .iter()
            .map(|&t| {
                let frac = if last > 0.0 { t / last } else { 0.0 };
                let target = frac * length;
                let u = if length < 1e-15 {
                    0.0
                } else {
                    // Invert the cumulative table with a binary search plus
                    // linear interpolation inside the bracketing segment.
                    let idx = cumulative.partition_point(|&s| s < target).clamp(1, dense);
                    let (s0, s1) = (cumulative[idx - 1], cumulative[idx]);
                    let within = if s1 > s0 { (target - s0) / (s1 - s0) } else { 0.0 };
                    ((idx - 1) as f64 + within) / dense as f64
                };
                let position = lift(u)?;
                let normal = self.query(&position)?.true_normal;
                Ok(PathSample { t, position, normal })
            })
            .collect()
    }
}
