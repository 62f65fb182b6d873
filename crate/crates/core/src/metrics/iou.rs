use serde::{Deserialize, Serialize};

/// Axis-aligned 3D box: center and full extents along x, y, z, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box3D {
    pub center: [f64; 3],
    pub dims: [f64; 3],
}

impl Box3D {
    pub fn new(center: [f64; 3], dims: [f64; 3]) -> Self {
        Self { center, dims }
    }

    /// Dims must be finite and strictly positive on every axis.
    pub fn validate(&self) -> Result<(), String> {
        if self.center.iter().any(|c| !c.is_finite()) {
            return Err("box center must be finite".into());
        }
        if self.dims.iter().any(|d| !d.is_finite() || *d <= 0.0) {
            return Err(format!("box dims must be positive, got {:?}", self.dims));
        }
        Ok(())
    }

    pub fn min_corner(&self) -> [f64; 3] {
        std::array::from_fn(|i| self.center[i] - self.dims[i] / 2.0)
    }

    pub fn max_corner(&self) -> [f64; 3] {
        std::array::from_fn(|i| self.center[i] + self.dims[i] / 2.0)
    }

    pub fn volume(&self) -> f64 {
        self.dims.iter().product()
    }
}

/// Intersection volume over union volume of two axis-aligned boxes.
pub fn iou3d(a: &Box3D, b: &Box3D) -> f64 {
    let (amin, amax) = (a.min_corner(), a.max_corner());
    let (bmin, bmax) = (b.min_corner(), b.max_corner());
    let mut inter = 1.0;
    for axis in 0..3 {
        let overlap = amax[axis].min(bmax[axis]) - amin[axis].max(bmin[axis]);
        if overlap <= 0.0 {
            return 0.0;
        }
        inter *= overlap;
    }
    let union = a.volume() + b.volume() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}
