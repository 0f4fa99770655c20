//! Floor geometry, cluster state and the per-episode mobility update.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EnvError;

/// A point on the factory floor, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance_to(&self, other: Position) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        (dx * dx + dy * dy).sqrt()
    }
}

/// Cardinal heading of a cluster's rigid motion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Heading {
    North,
    South,
    East,
    West,
}

impl Heading {
    pub const ALL: [Heading; 4] = [Heading::North, Heading::South, Heading::East, Heading::West];

    pub fn delta(&self) -> (f64, f64) {
        match self {
            Heading::North => (0.0, 1.0),
            Heading::South => (0.0, -1.0),
            Heading::East => (1.0, 0.0),
            Heading::West => (-1.0, 0.0),
        }
    }
}

/// Static description of the floor: AP grid, cluster counts, sub-bands and
/// the member tether radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub floor_size_m: (f64, f64),
    pub ap_positions: Vec<Position>,
    pub num_clusters: usize,
    pub members_per_cluster: usize,
    pub num_subbands: usize,
    pub max_member_distance_m: f64,
}

impl Topology {
    pub fn num_aps(&self) -> usize {
        self.ap_positions.len()
    }

    pub fn num_robots(&self) -> usize {
        self.num_clusters * (self.members_per_cluster + 1)
    }

    /// Checks the structural invariants. The spectrum-sharing relation
    /// `M = N/2` is enforced unless `allow_subband_mismatch` is set.
    pub fn validate(&self, allow_subband_mismatch: bool) -> Result<(), EnvError> {
        let (w, h) = self.floor_size_m;
        if !(w > 0.0 && h > 0.0) {
            return Err(EnvError::InvalidTopology("floor dimensions must be positive".into()));
        }
        if self.ap_positions.is_empty() {
            return Err(EnvError::InvalidTopology("at least one AP required".into()));
        }
        if self.num_clusters == 0 {
            return Err(EnvError::InvalidTopology("at least one cluster required".into()));
        }
        if self.num_subbands == 0 {
            return Err(EnvError::InvalidTopology("at least one sub-band required".into()));
        }
        if !(self.max_member_distance_m > 0.0) {
            return Err(EnvError::InvalidTopology("max_member_distance_m must be positive".into()));
        }
        for p in &self.ap_positions {
            if p.x < 0.0 || p.x > w || p.y < 0.0 || p.y > h {
                return Err(EnvError::InvalidTopology(format!(
                    "AP at ({}, {}) outside the {w}x{h} m floor",
                    p.x, p.y
                )));
            }
        }
        let d = self.max_member_distance_m;
        if 2.0 * d >= w || 2.0 * d >= h {
            return Err(EnvError::InvalidTopology(
                "floor too small to keep a member disc inside".into(),
            ));
        }
        if !allow_subband_mismatch
            && (self.num_clusters % 2 != 0 || self.num_subbands * 2 != self.num_clusters)
        {
            return Err(EnvError::InvalidTopology(format!(
                "spectrum sharing requires M = N/2 with N even (got N={}, M={}); \
                 set the override flag to relax",
                self.num_clusters, self.num_subbands
            )));
        }
        Ok(())
    }

    /// Leader positions live in the rectangle inset by the tether radius so
    /// the whole member disc stays on the floor.
    pub fn leader_bounds(&self) -> (Position, Position) {
        let d = self.max_member_distance_m;
        (
            Position::new(d, d),
            Position::new(self.floor_size_m.0 - d, self.floor_size_m.1 - d),
        )
    }
}

/// Mutable per-cluster state: leader position, member offsets, and the rigid
/// motion the cluster is following.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterState {
    pub leader: Position,
    pub members: Vec<Position>,
    pub heading: Heading,
    pub speed_mps: f64,
}

impl ClusterState {
    /// Draws the initial leader position and heading.
    pub fn spawn(topo: &Topology, speed_mps: f64, rng: &mut ChaCha8Rng) -> Self {
        let (lo, hi) = topo.leader_bounds();
        let leader = Position::new(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y));
        let heading = Heading::ALL[rng.random_range(0..4)];
        Self { leader, members: Vec::new(), heading, speed_mps }
    }

    /// Moves the leader by one episode step. If the current heading would
    /// push the member disc off the floor the heading is resampled uniformly
    /// among the directions that keep it inside.
    pub fn advance(&mut self, topo: &Topology, step_m: f64, rng: &mut ChaCha8Rng) {
        let (lo, hi) = topo.leader_bounds();
        let fits = |p: Position| p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y;
        let moved = |h: Heading| {
            let (dx, dy) = h.delta();
            Position::new(self.leader.x + dx * step_m, self.leader.y + dy * step_m)
        };
        if !fits(moved(self.heading)) {
            let feasible: Vec<Heading> =
                Heading::ALL.into_iter().filter(|&h| fits(moved(h))).collect();
            assert!(!feasible.is_empty(), "leader bounds leave no feasible heading");
            self.heading = feasible[rng.random_range(0..feasible.len())];
        }
        self.leader = moved(self.heading);
    }

    /// Redraws the members uniformly over the disc of radius `d` around the
    /// leader.
    pub fn place_members(&mut self, count: usize, d: f64, rng: &mut ChaCha8Rng) {
        self.members = (0..count)
            .map(|_| {
                let r = d * rng.random::<f64>().sqrt();
                let theta = rng.random::<f64>() * std::f64::consts::TAU;
                Position::new(self.leader.x + r * theta.cos(), self.leader.y + r * theta.sin())
            })
            .collect();
    }
}
