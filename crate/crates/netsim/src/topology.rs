//! Hexagonal multi-cell layouts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::TopologyConfig;

pub type Point = [f64; 2];

pub fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Base stations, users and (optionally) one relay per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deployment {
    pub cell_radius_m: f64,
    pub base_stations: Vec<Point>,
    pub users: Vec<Point>,
    /// Serving cell of every user.
    pub serving: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relays: Option<Vec<Point>>,
}

impl Deployment {
    pub fn n_cells(&self) -> usize {
        self.base_stations.len()
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn users_in_cell(&self, cell: usize) -> impl Iterator<Item = usize> + '_ {
        self.serving.iter().enumerate().filter(move |(_, &c)| c == cell).map(|(u, _)| u)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("deployment serializes")
    }
}

// axial directions for flat-top hexagons
const DIRECTIONS: [(i64, i64); 6] = [(1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1)];

/// The first `n` cells of a hexagonal spiral (center, then ring 1, ring 2, …)
/// in axial coordinates.
fn spiral(n: usize) -> Vec<(i64, i64)> {
    let mut out = vec![(0, 0)];
    let mut ring = 1;
    while out.len() < n {
        let (dq, dr) = DIRECTIONS[4];
        let mut cur = (dq * ring, dr * ring);
        for &(sq, sr) in &DIRECTIONS {
            for _ in 0..ring {
                out.push(cur);
                cur = (cur.0 + sq, cur.1 + sr);
            }
        }
        ring += 1;
    }
    out.truncate(n);
    out
}

/// Centers of flat-top hexagonal cells with circumradius `r`; neighbours are `√3·r` apart.
pub fn hex_centers(n: usize, r: f64) -> Vec<Point> {
    let s3 = 3f64.sqrt();
    spiral(n).into_iter().map(|(q, rr)| [1.5 * r * q as f64, s3 * r * (rr as f64 + q as f64 / 2.0)]).collect()
}

/// Whether `p` (relative to the cell center) lies in a flat-top hexagon of circumradius `r`.
pub fn in_hexagon(p: Point, r: f64) -> bool {
    let s3 = 3f64.sqrt();
    let (x, y) = (p[0].abs(), p[1].abs());
    y <= s3 / 2.0 * r && s3 * x + y <= s3 * r
}

/// Uniform point in the hexagon, at least `min_d` from its center.
fn sample_in_cell<R: Rng>(rng: &mut R, center: Point, r: f64, min_d: f64) -> Point {
    let h = 3f64.sqrt() / 2.0 * r;
    loop {
        let p = [rng.random_range(-r..=r), rng.random_range(-h..=h)];
        if in_hexagon(p, r) && p[0].hypot(p[1]) >= min_d {
            return [center[0] + p[0], center[1] + p[1]];
        }
    }
}

/// Deterministic in `seed`: hexagonal cells with users placed uniformly by
/// rejection sampling.
pub fn generate_topology(cfg: &TopologyConfig, seed: u64) -> Deployment {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(STREAM_PLACEMENT);
    let r = cfg.cell_radius_m;
    let base_stations = hex_centers(cfg.n_cells, r);
    let mut users = Vec::with_capacity(cfg.n_cells * cfg.users_per_cell);
    let mut serving = Vec::with_capacity(users.capacity());
    for (c, &bs) in base_stations.iter().enumerate() {
        for _ in 0..cfg.users_per_cell {
            users.push(sample_in_cell(&mut rng, bs, r, cfg.min_distance_m));
            serving.push(c);
        }
    }
    Deployment { cell_radius_m: r, base_stations, users, serving, relays: None }
}

pub(crate) const STREAM_PLACEMENT: u64 = 1;
pub(crate) const STREAM_SHADOWING: u64 = 2;
pub(crate) const STREAM_SHADOWING_RELAY: u64 = 3;
pub(crate) const STREAM_FADING_BASE: u64 = 1 << 32;
