//! Per-episode payload accounting for both phases.
//!
//! Remaining bits are derived from one cumulative delivered counter per
//! receiver, so `initial - final == sum(delivered)` holds bit-exactly.

/// Tracks remaining payload per leader (Phase I) and per member (Phase II).
#[derive(Debug, Clone, PartialEq)]
pub struct PayloadLedger {
    /// Combined cluster payload `8·B_o·(O+1)` in bits.
    leader_initial_bits: f64,
    /// Phase-II success threshold per member, in bits.
    member_initial_bits: f64,
    leader_delivered: Vec<f64>,
    member_delivered: Vec<Vec<f64>>,
    pub slot_duration_s: f64,
    pub phase1_slots: usize,
    pub phase2_slots: usize,
}

impl PayloadLedger {
    pub fn new(
        num_clusters: usize,
        members_per_cluster: usize,
        leader_initial_bits: f64,
        member_initial_bits: f64,
        slot_duration_s: f64,
        phase1_slots: usize,
        phase2_slots: usize,
    ) -> Self {
        Self {
            leader_initial_bits,
            member_initial_bits,
            leader_delivered: vec![0.0; num_clusters],
            member_delivered: vec![vec![0.0; members_per_cluster]; num_clusters],
            slot_duration_s,
            phase1_slots,
            phase2_slots,
        }
    }

    pub fn leader_initial_bits(&self) -> f64 {
        self.leader_initial_bits
    }

    pub fn member_initial_bits(&self) -> f64 {
        self.member_initial_bits
    }

    /// May go negative once delivery completes.
    pub fn leader_remaining_bits(&self, n: usize) -> f64 {
        self.leader_initial_bits - self.leader_delivered[n]
    }

    pub fn member_remaining_bits(&self, n: usize, o: usize) -> f64 {
        self.member_initial_bits - self.member_delivered[n][o]
    }

    pub fn leader_total_delivered(&self, n: usize) -> f64 {
        self.leader_delivered[n]
    }

    pub fn deliver_to_leader(&mut self, n: usize, bits: f64) {
        debug_assert!(bits >= 0.0);
        self.leader_delivered[n] += bits;
    }

    pub fn deliver_to_member(&mut self, n: usize, o: usize, bits: f64) {
        debug_assert!(bits >= 0.0);
        self.member_delivered[n][o] += bits;
    }

    pub fn leader_complete(&self, n: usize) -> bool {
        self.leader_remaining_bits(n) <= 0.0
    }

    pub fn member_complete(&self, n: usize, o: usize) -> bool {
        self.member_remaining_bits(n, o) <= 0.0
    }
}
