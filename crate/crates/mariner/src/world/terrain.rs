//! Seeded heightfield terrain and exact ray queries.
//!
//! The seafloor is a grid of axis-aligned columns: each cell has one top
//! elevation (negative, below the surface) and the terrain occupies
//! everything beneath it. Ray casts walk the cells the ray crosses, so a
//! reported depth never skips an intersection — the soundness tests rely on
//! this.

use serde::{Deserialize, Serialize};

pub type Vec3 = [f64; 3];

pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn scale(a: Vec3, k: f64) -> Vec3 {
    [a[0] * k, a[1] * k, a[2] * k]
}

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn normalize(a: Vec3) -> Vec3 {
    let n = norm(a);
    if n == 0.0 {
        [0.0, 0.0, 0.0]
    } else {
        scale(a, 1.0 / n)
    }
}

/// Wraps an angle into [-pi, pi).
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut x = (a + std::f64::consts::PI) % two_pi;
    if x < 0.0 {
        x += two_pi;
    }
    x - std::f64::consts::PI
}

/// A labelled macro-region shaping the seafloor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionLabel {
    pub class: String,
    pub center: [f64; 2],
    pub extent: f64,
    /// Target elevation of the feature (ridge crest, hilltop, or plain level).
    pub level: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Heightfield {
    pub origin: [f64; 2],
    pub cell_size: f64,
    pub nx: usize,
    pub ny: usize,
    pub floor: f64,
    heights: Vec<f64>,
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

fn lattice_value(seed: u64, gi: i64, gj: i64) -> f64 {
    let h = splitmix(seed ^ (gi as u64).wrapping_mul(0x9e37_79b1) ^ (gj as u64).wrapping_mul(0x85eb_ca77));
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Smooth value noise in [0, 1] over a lattice of `period` cells.
fn value_noise(seed: u64, i: f64, j: f64, period: f64) -> f64 {
    let gi = (i / period).floor();
    let gj = (j / period).floor();
    let fi = smoothstep(i / period - gi);
    let fj = smoothstep(j / period - gj);
    let (gi, gj) = (gi as i64, gj as i64);
    let v00 = lattice_value(seed, gi, gj);
    let v10 = lattice_value(seed, gi + 1, gj);
    let v01 = lattice_value(seed, gi, gj + 1);
    let v11 = lattice_value(seed, gi + 1, gj + 1);
    let a = v00 + (v10 - v00) * fi;
    let b = v01 + (v11 - v01) * fi;
    a + (b - a) * fj
}

impl Heightfield {
    /// Generates the seeded seafloor: low-amplitude value noise plus the
    /// labelled features. Canyons are two parallel ridges running along y,
    /// hills a single bump, plains a flattened shelf at their level.
    pub fn generate(
        seed: u64,
        origin: [f64; 2],
        size: [f64; 2],
        cell_size: f64,
        floor: f64,
        noise_amplitude: f64,
        regions: &[RegionLabel],
    ) -> Self {
        let nx = (size[0] / cell_size).ceil() as usize;
        let ny = (size[1] / cell_size).ceil() as usize;
        let mut heights = vec![floor; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let x = origin[0] + (i as f64 + 0.5) * cell_size;
                let y = origin[1] + (j as f64 + 0.5) * cell_size;
                let mut h = floor + noise_amplitude * value_noise(seed, i as f64, j as f64, 8.0);
                for region in regions {
                    let dx = x - region.center[0];
                    let dy = y - region.center[1];
                    let d2 = dx * dx + dy * dy;
                    let sigma = region.extent / 2.0;
                    match region.class.as_str() {
                        "hill" => {
                            let bump = (region.level - floor) * (-d2 / (2.0 * sigma * sigma)).exp();
                            h = h.max(floor + bump);
                        }
                        "canyon" => {
                            // Two ridges along the y axis, one wall each side.
                            let half = region.extent / 2.0;
                            if dy.abs() <= region.extent {
                                for wall_x in [-half, half] {
                                    let dw = dx - wall_x;
                                    let ridge = (region.level - floor)
                                        * (-(dw * dw) / (2.0 * (half / 4.0) * (half / 4.0))).exp();
                                    h = h.max(floor + ridge);
                                }
                            }
                        }
                        "plain" => {
                            if d2.sqrt() <= region.extent {
                                h = region.level;
                            }
                        }
                        _ => {}
                    }
                }
                heights[j * nx + i] = h.min(-0.1);
            }
        }
        Heightfield { origin, cell_size, nx, ny, floor, heights }
    }

    pub fn flat(origin: [f64; 2], size: [f64; 2], cell_size: f64, floor: f64) -> Self {
        Self::generate(0, origin, size, cell_size, floor, 0.0, &[])
    }

    fn cell_index(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let i = ((x - self.origin[0]) / self.cell_size).floor();
        let j = ((y - self.origin[1]) / self.cell_size).floor();
        if i < 0.0 || j < 0.0 || i as usize >= self.nx || j as usize >= self.ny {
            None
        } else {
            Some((i as usize, j as usize))
        }
    }

    /// Terrain top elevation at a point; the floor outside the grid.
    pub fn height_at(&self, x: f64, y: f64) -> f64 {
        match self.cell_index(x, y) {
            Some((i, j)) => self.heights[j * self.nx + i],
            None => self.floor,
        }
    }

    pub fn set_height(&mut self, x: f64, y: f64, h: f64) {
        if let Some((i, j)) = self.cell_index(x, y) {
            self.heights[j * self.nx + i] = h;
        }
    }

    /// Distance along a normalized ray to the terrain, if hit within
    /// `max_range`. Walks every cell the ray crosses; within a cell the
    /// intersection with the column top is solved exactly.
    pub fn ray(&self, origin: Vec3, dir: Vec3, max_range: f64) -> Option<f64> {
        let eps = 1e-12;
        // Height below the start: immediate contact.
        if origin[2] <= self.height_at(origin[0], origin[1]) {
            return Some(0.0);
        }
        if dir[0].abs() < eps && dir[1].abs() < eps {
            // Vertical ray: single column.
            let h = self.height_at(origin[0], origin[1]);
            if dir[2] < 0.0 {
                let th = (h - origin[2]) / dir[2];
                if th >= 0.0 && th <= max_range {
                    return Some(th);
                }
            }
            return None;
        }
        // `t_entry` is the exact parameter at which the ray entered the
        // current cell; the lookup point sits a hair inside it so boundary
        // cases resolve to a definite cell.
        let mut t_entry = 0.0f64;
        loop {
            let t_lookup = t_entry + 1e-9;
            let px = origin[0] + dir[0] * t_lookup;
            let py = origin[1] + dir[1] * t_lookup;
            let h = self.height_at(px, py);
            let z_entry = origin[2] + dir[2] * t_entry;
            if z_entry <= h {
                return Some(t_entry);
            }
            let next_boundary = |o: f64, d: f64, go: f64| -> f64 {
                if d.abs() < eps {
                    return f64::INFINITY;
                }
                let cur = o + d * t_lookup;
                let rel = (cur - go) / self.cell_size;
                let k = if d > 0.0 { rel.floor() + 1.0 } else { rel.ceil() - 1.0 };
                let boundary = go + k * self.cell_size;
                (boundary - cur) / d + t_lookup
            };
            let tx = next_boundary(origin[0], dir[0], self.origin[0]);
            let ty = next_boundary(origin[1], dir[1], self.origin[1]);
            let t_exit = tx.min(ty);
            // Descending ray can meet the current column top before leaving.
            if dir[2] < -eps {
                let th = (h - origin[2]) / dir[2];
                if th >= t_entry && th <= t_exit.min(max_range) {
                    return Some(th);
                }
            }
            if t_exit >= max_range {
                return None;
            }
            t_entry = t_exit;
        }
    }
}

/// Distance along a normalized ray to a sphere, if hit within `max_range`.
pub fn ray_sphere(origin: Vec3, dir: Vec3, center: Vec3, radius: f64, max_range: f64) -> Option<f64> {
    let oc = sub(origin, center);
    let b = dot(oc, dir);
    let c = dot(oc, oc) - radius * radius;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let t = if -b - sq >= 0.0 { -b - sq } else { -b + sq };
    if t >= 0.0 && t <= max_range {
        Some(t)
    } else {
        None
    }
}

/// Distance to the water surface plane z = 0 for an ascending ray.
pub fn ray_surface(origin: Vec3, dir: Vec3, max_range: f64) -> Option<f64> {
    if dir[2] <= 1e-12 || origin[2] >= 0.0 {
        return None;
    }
    let t = -origin[2] / dir[2];
    if t <= max_range {
        Some(t)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_floor_open_water() {
        let hf = Heightfield::flat([0.0, 0.0], [100.0, 100.0], 2.0, -30.0);
        let t = hf.ray([50.0, 50.0, -10.0], [1.0, 0.0, 0.0], 50.0);
        assert_eq!(t, None);
    }

    #[test]
    fn wall_ahead_hits_at_exact_distance() {
        let mut hf = Heightfield::flat([0.0, 0.0], [100.0, 100.0], 2.0, -30.0);
        // A wall column spanning x in [54, 56) at every y.
        for j in 0..hf.ny {
            let y = 1.0 + 2.0 * j as f64;
            hf.set_height(55.0, y, -0.1);
        }
        let t = hf.ray([49.0, 50.0, -10.0], [1.0, 0.0, 0.0], 50.0).unwrap();
        assert!((t - 5.0).abs() < 1e-9, "expected 5.0, got {t}");
    }

    #[test]
    fn descending_ray_hits_floor() {
        let hf = Heightfield::flat([0.0, 0.0], [100.0, 100.0], 2.0, -30.0);
        let t = hf.ray([50.0, 50.0, -10.0], [0.0, 0.0, -1.0], 50.0).unwrap();
        assert!((t - 20.0).abs() < 1e-9);
    }

    #[test]
    fn surface_ray_from_ten_meters() {
        let t = ray_surface([50.0, 50.0, -10.0], [0.0, 0.0, 1.0], 50.0).unwrap();
        assert!((t - 10.0).abs() < 1e-12);
    }

    #[test]
    fn sphere_hit_in_front() {
        let t = ray_sphere([0.0, 0.0, -10.0], [1.0, 0.0, 0.0], [10.0, 0.0, -10.0], 2.0, 50.0);
        assert!((t.unwrap() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn generation_is_seed_deterministic() {
        let regions = [RegionLabel {
            class: "hill".into(),
            center: [40.0, 40.0],
            extent: 20.0,
            level: -8.0,
        }];
        let a = Heightfield::generate(7, [0.0, 0.0], [80.0, 80.0], 2.0, -30.0, 1.5, &regions);
        let b = Heightfield::generate(7, [0.0, 0.0], [80.0, 80.0], 2.0, -30.0, 1.5, &regions);
        assert_eq!(a, b);
        let c = Heightfield::generate(8, [0.0, 0.0], [80.0, 80.0], 2.0, -30.0, 1.5, &regions);
        assert_ne!(a, c);
    }

    #[test]
    fn hill_region_rises_above_floor() {
        let regions = [RegionLabel {
            class: "hill".into(),
            center: [40.0, 40.0],
            extent: 20.0,
            level: -8.0,
        }];
        let hf = Heightfield::generate(7, [0.0, 0.0], [80.0, 80.0], 2.0, -30.0, 0.0, &regions);
        assert!(hf.height_at(40.0, 40.0) > -9.0);
        assert!(hf.height_at(5.0, 5.0) < -28.0);
    }
}
