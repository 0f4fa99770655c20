//! CSV row types shared by the training loop, the evaluator and the CLI.
//!
//! All result files use one fixed schema per kind so downstream plotting
//! never needs policy-specific parsing.

use std::io::{self, Write};

/// One row of the training metrics stream.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainEpisodeRow {
    pub episode: u64,
    /// Mean TD loss across agents; NaN until the replay warm-up is over.
    pub mean_loss: f64,
    pub sum_reward: f64,
    pub epsilon: f64,
    pub wall_ms: f64,
}

impl TrainEpisodeRow {
    pub const HEADER: &'static str = "episode,mean_loss,sum_reward,epsilon,wall_ms";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.episode, self.mean_loss, self.sum_reward, self.epsilon, self.wall_ms
        )
    }
}

/// One summary row of an evaluation or baseline run.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultsRow {
    pub payload_bytes: f64,
    pub n_clusters: usize,
    pub policy_name: String,
    pub delivery_probability: f64,
    pub n_episodes: usize,
    pub seed: u64,
}

impl ResultsRow {
    pub const HEADER: &'static str =
        "payload_bytes,n_clusters,policy_name,delivery_probability,n_episodes,seed";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.payload_bytes,
            self.n_clusters,
            self.policy_name,
            self.delivery_probability,
            self.n_episodes,
            self.seed
        )
    }
}

/// One row of the per-slot episode trace. The `aps` column joins the chosen
/// AP indices with `+` (for example `0+2`, or `1` for single connectivity).
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub episode: u64,
    pub slot: usize,
    pub leader: usize,
    pub aps: String,
    pub subband: usize,
    pub power_dbm: f64,
    pub sinr_db: f64,
    pub rate_mbps: f64,
    pub remaining_bits: f64,
}

impl TraceRow {
    pub const HEADER: &'static str =
        "episode,slot,leader,aps,subband,power_dbm,sinr_db,rate_mbps,remaining_bits";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.episode,
            self.slot,
            self.leader,
            self.aps,
            self.subband,
            self.power_dbm,
            self.sinr_db,
            self.rate_mbps,
            self.remaining_bits
        )
    }
}

/// Delivery outcome of one evaluation episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeMetrics {
    pub episode: u64,
    pub payload_bytes: f64,
    pub success_fraction: f64,
    pub leaders_succeeded: usize,
    pub members_succeeded: usize,
    pub mean_leader_rate_mbps: f64,
}

impl EpisodeMetrics {
    pub const HEADER: &'static str =
        "episode,payload_bytes,success_fraction,leaders_succeeded,members_succeeded,mean_leader_rate_mbps";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.episode,
            self.payload_bytes,
            self.success_fraction,
            self.leaders_succeeded,
            self.members_succeeded,
            self.mean_leader_rate_mbps
        )
    }
}

/// Writes a header plus rows to any sink.
pub fn write_csv<W: Write, R, F: Fn(&R) -> String>(
    mut w: W,
    header: &str,
    rows: &[R],
    to_csv: F,
) -> io::Result<()> {
    writeln!(w, "{header}")?;
    for row in rows {
        writeln!(w, "{}", to_csv(row))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn results_row_schema() {
        let row = ResultsRow {
            payload_bytes: 60.0,
            n_clusters: 4,
            policy_name: "marl2".into(),
            delivery_probability: 0.9995,
            n_episodes: 1000,
            seed: 17,
        };
        assert_eq!(row.to_csv(), "60,4,marl2,0.9995,1000,17");
        assert_eq!(ResultsRow::HEADER.split(',').count(), row.to_csv().split(',').count());
    }

    #[test]
    fn csv_writer_emits_header_first() {
        let rows = vec![TrainEpisodeRow {
            episode: 0,
            mean_loss: f64::NAN,
            sum_reward: 12.5,
            epsilon: 1.0,
            wall_ms: 0.25,
        }];
        let mut buf = Vec::new();
        write_csv(&mut buf, TrainEpisodeRow::HEADER, &rows, TrainEpisodeRow::to_csv).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(TrainEpisodeRow::HEADER));
        assert_eq!(lines.next(), Some("0,NaN,12.5,1,0.25"));
    }
}
