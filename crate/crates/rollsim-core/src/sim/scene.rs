//! World content for the synthesizer: point sets, textured planes, and
//! procedural radiance fields. Radiance values live in [0, 1].

use crate::geometry::{Point3, Vec3};
use crate::sim::SimError;
use std::fmt;
use std::sync::Arc;

/// Grayscale texture sampled bilinearly with clamped edges, values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Texture {
    width: u32,
    height: u32,
    data: Vec<f64>,
}

impl Texture {
    pub fn new(width: u32, height: u32, data: Vec<f64>) -> Result<Self, SimError> {
        if width == 0 || height == 0 || data.len() != (width * height) as usize {
            return Err(SimError::InvalidScene {
                reason: format!(
                    "texture size {width}x{height} does not match {} samples",
                    data.len()
                ),
            });
        }
        if data.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
            return Err(SimError::InvalidScene {
                reason: "texture values must lie in [0, 1]".to_string(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }

    /// Checkerboard with square cells of `cell` pixels.
    pub fn checkerboard(width: u32, height: u32, cell: u32) -> Self {
        let cell = cell.max(1);
        let data = (0..width * height)
            .map(|i| {
                let (x, y) = (i % width, i / width);
                if ((x / cell) + (y / cell)) % 2 == 0 {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        Self {
            width,
            height,
            data,
        }
    }

    /// Vertical bright stripes of the given period and duty cycle.
    pub fn vertical_stripes(width: u32, height: u32, period: u32, duty: f64) -> Self {
        let period = period.max(1);
        let duty = duty.clamp(0.0, 1.0);
        let on = ((period as f64 * duty).round() as u32).clamp(1, period);
        let data = (0..width * height)
            .map(|i| if (i % width) % period < on { 1.0 } else { 0.0 })
            .collect();
        Self {
            width,
            height,
            data,
        }
    }

    /// Smooth horizontal ramp from 0 to 1.
    pub fn horizontal_ramp(width: u32, height: u32) -> Self {
        let data = (0..width * height)
            .map(|i| (i % width) as f64 / (width.max(2) - 1) as f64)
            .collect();
        Self {
            width,
            height,
            data,
        }
    }

    /// Bilinear sample with `u, v` in [0, 1] mapped across the full texture;
    /// coordinates outside are clamped to the edge.
    pub fn sample(&self, u: f64, v: f64) -> f64 {
        let gx = (u * self.width as f64 - 0.5).clamp(0.0, (self.width - 1) as f64);
        let gy = (v * self.height as f64 - 0.5).clamp(0.0, (self.height - 1) as f64);
        let x0 = gx.floor() as u32;
        let y0 = gy.floor() as u32;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = gx - x0 as f64;
        let fy = gy - y0 as f64;
        let at = |x: u32, y: u32| self.data[(y * self.width + x) as usize];
        at(x0, y0) * (1.0 - fx) * (1.0 - fy)
            + at(x1, y0) * fx * (1.0 - fy)
            + at(x0, y1) * (1.0 - fx) * fy
            + at(x1, y1) * fx * fy
    }
}

/// A world point with its emitted radiance.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenePoint {
    pub position: Point3,
    pub radiance: f64,
}

/// Finite textured rectangle in world space.
#[derive(Debug, Clone, PartialEq)]
pub struct TexturedPlane {
    center: Point3,
    u_axis: Vec3,
    v_axis: Vec3,
    normal: Vec3,
    /// Full side lengths along u and v, meters.
    extent: (f64, f64),
    texture: Texture,
}

impl TexturedPlane {
    pub fn new(
        center: Point3,
        u_axis: Vec3,
        v_axis: Vec3,
        extent: (f64, f64),
        texture: Texture,
    ) -> Result<Self, SimError> {
        if !(extent.0 > 0.0) || !(extent.1 > 0.0) {
            return Err(SimError::InvalidScene {
                reason: format!("plane extent must be positive, got {extent:?}"),
            });
        }
        let eps = 1e-9;
        if (u_axis.norm() - 1.0).abs() > eps
            || (v_axis.norm() - 1.0).abs() > eps
            || u_axis.dot(&v_axis).abs() > eps
        {
            return Err(SimError::InvalidScene {
                reason: "plane axes must be orthonormal".to_string(),
            });
        }
        let normal = u_axis.cross(&v_axis);
        Ok(Self {
            center,
            u_axis,
            v_axis,
            normal,
            extent,
            texture,
        })
    }

    /// Fronto-parallel plane at depth `z` facing the +Z camera axis.
    pub fn fronto_parallel(z: f64, extent: (f64, f64), texture: Texture) -> Result<Self, SimError> {
        Self::new(
            Point3::new(0.0, 0.0, z),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            extent,
            texture,
        )
    }

    pub fn center(&self) -> Point3 {
        self.center
    }
    pub fn extent(&self) -> (f64, f64) {
        self.extent
    }
    pub fn normal(&self) -> Vec3 {
        self.normal
    }

    /// Radiance seen along a world-space ray, 0 when the ray misses.
    pub fn radiance(&self, origin: &Point3, dir: &Vec3) -> f64 {
        let denom = self.normal.dot(dir);
        if denom.abs() < 1e-15 {
            return 0.0;
        }
        let t = self.normal.dot(&(self.center - origin)) / denom;
        if t <= 1e-12 {
            return 0.0;
        }
        let hit = origin + dir * t;
        let rel = hit - self.center;
        let u = rel.dot(&self.u_axis) / self.extent.0 + 0.5;
        let v = rel.dot(&self.v_axis) / self.extent.1 + 0.5;
        if !(0.0..=1.0).contains(&u) || !(0.0..=1.0).contains(&v) {
            return 0.0;
        }
        self.texture.sample(u, v)
    }
}

/// Pure radiance field over world rays, used for procedural backgrounds.
#[derive(Clone)]
pub struct ProceduralField {
    name: String,
    field: Arc<dyn Fn(&Point3, &Vec3) -> f64 + Send + Sync>,
}

impl ProceduralField {
    pub fn new<F>(name: impl Into<String>, field: F) -> Self
    where
        F: Fn(&Point3, &Vec3) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            field: Arc::new(field),
        }
    }

    /// Direction-space checker pattern: sign structure of the normalized ray
    /// direction at the given angular frequency.
    pub fn direction_checker(frequency: f64) -> Self {
        Self::new("direction_checker", move |_origin: &Point3, dir: &Vec3| {
            let d = dir.normalize();
            let s = (frequency * d.x).sin() * (frequency * d.y).sin();
            if s >= 0.0 {
                1.0
            } else {
                0.0
            }
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn radiance(&self, origin: &Point3, dir: &Vec3) -> f64 {
        (self.field)(origin, dir).clamp(0.0, 1.0)
    }
}

impl fmt::Debug for ProceduralField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProceduralField")
            .field("name", &self.name)
            .finish()
    }
}

/// World content variants understood by the synthesizer.
#[derive(Debug, Clone)]
pub enum Scene {
    /// Discrete radiant points, rendered by forward projection.
    PointSet(Vec<ScenePoint>),
    /// A textured rectangle, rendered by ray casting.
    TexturedPlane(TexturedPlane),
    /// Arbitrary radiance field over rays, rendered by ray casting.
    Procedural(ProceduralField),
}

impl Scene {
    pub fn point_set(points: Vec<ScenePoint>) -> Result<Self, SimError> {
        if points
            .iter()
            .any(|p| !p.radiance.is_finite() || p.radiance < 0.0 || p.radiance > 1.0)
        {
            return Err(SimError::InvalidScene {
                reason: "point radiance must lie in [0, 1]".to_string(),
            });
        }
        Ok(Scene::PointSet(points))
    }

    /// Radiance along a world ray for the ray-cast variants; point sets
    /// contribute through projection splats instead and return 0 here.
    pub fn radiance(&self, origin: &Point3, dir: &Vec3) -> f64 {
        match self {
            Scene::PointSet(_) => 0.0,
            Scene::TexturedPlane(plane) => plane.radiance(origin, dir),
            Scene::Procedural(field) => field.radiance(origin, dir),
        }
    }
}
