//! Synthetic interaction logs with planted cluster structure.
//!
//! Items form `clusters` groups. Each user follows a fixed number of
//! clusters; their history is a series of short sessions, each inside one
//! cluster, walking that cluster's items in order from a random start.
//! Sessions alternate between the user's clusters.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{IoContext, Result};
use crate::ingest::InteractionRecord;

const HOUR: i64 = 3600;
const DAY: i64 = 86_400;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub clusters: usize,
    pub items_per_cluster: usize,
    pub users: usize,
    pub clusters_per_user: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub session_min: usize,
    pub session_max: usize,
    /// Separate sessions by gaps longer than any within-session gap, so
    /// temporal closeness marks same-cluster pairs.
    pub interval_signal: bool,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            clusters: 4,
            items_per_cluster: 40,
            users: 500,
            clusters_per_user: 2,
            min_len: 18,
            max_len: 36,
            session_min: 3,
            session_max: 6,
            interval_signal: true,
            seed: 0,
        }
    }
}

pub fn item_id(cluster: usize, item: usize) -> String {
    format!("c{cluster}_i{item}")
}

/// Cluster of a generated raw item id.
pub fn cluster_of(raw: &str) -> Option<usize> {
    raw.strip_prefix('c')?.split('_').next()?.parse().ok()
}

fn within_gap<R: Rng>(rng: &mut R) -> i64 {
    rng.gen_range(HOUR..=2 * DAY)
}

pub fn generate(cfg: &SynthConfig) -> Vec<InteractionRecord> {
    assert!(cfg.clusters_per_user <= cfg.clusters && cfg.clusters_per_user >= 1);
    assert!(cfg.min_len <= cfg.max_len && cfg.session_min >= 1 && cfg.session_min <= cfg.session_max);
    assert!(
        cfg.max_len <= cfg.clusters_per_user * cfg.items_per_cluster,
        "sequences would revisit items"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::new();
    for u in 0..cfg.users {
        let user = format!("u{u}");
        let chosen: Vec<usize> = sample(&mut rng, cfg.clusters, cfg.clusters_per_user).into_vec();
        let mut cursor: Vec<usize> = chosen.iter().map(|_| rng.gen_range(0..cfg.items_per_cluster)).collect();
        let mut used = vec![0usize; chosen.len()];
        let len = rng.gen_range(cfg.min_len..=cfg.max_len);
        let mut t = 1_500_000_000 + rng.gen_range(0..30 * DAY);
        let mut slot = rng.gen_range(0..chosen.len());
        let mut emitted = 0;
        while emitted < len {
            // skip clusters whose items are used up
            while used[slot] == cfg.items_per_cluster {
                slot = (slot + 1) % chosen.len();
            }
            let session = rng
                .gen_range(cfg.session_min..=cfg.session_max)
                .min(len - emitted)
                .min(cfg.items_per_cluster - used[slot]);
            for s in 0..session {
                if s > 0 {
                    t += within_gap(&mut rng);
                }
                out.push(InteractionRecord {
                    user_id: user.clone(),
                    item_id: item_id(chosen[slot], cursor[slot]),
                    timestamp: t,
                });
                cursor[slot] = (cursor[slot] + 1) % cfg.items_per_cluster;
                used[slot] += 1;
            }
            emitted += session;
            t += if cfg.interval_signal {
                rng.gen_range(65 * DAY..=180 * DAY)
            } else {
                within_gap(&mut rng)
            };
            slot = (slot + 1) % chosen.len();
        }
    }
    out
}

/// `user,item,timestamp` lines, readable with the default log format.
pub fn to_csv(records: &[InteractionRecord]) -> String {
    let mut s = String::new();
    for r in records {
        let _ = writeln!(s, "{},{},{}", r.user_id, r.item_id, r.timestamp);
    }
    s
}

pub fn write_csv(path: &Path, records: &[InteractionRecord]) -> Result<()> {
    fs::write(path, to_csv(records)).with_path(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::{HashMap, HashSet};

    #[test]
    fn users_stay_in_their_clusters_without_revisits() {
        let cfg = SynthConfig {
            users: 50,
            ..SynthConfig::default()
        };
        let recs = generate(&cfg);
        let mut by_user: HashMap<&str, Vec<&InteractionRecord>> = HashMap::new();
        for r in &recs {
            by_user.entry(&r.user_id).or_default().push(r);
        }
        assert_eq!(by_user.len(), 50);
        for rs in by_user.values() {
            assert!((18..=36).contains(&rs.len()));
            let clusters: HashSet<usize> = rs.iter().map(|r| cluster_of(&r.item_id).unwrap()).collect();
            assert!(clusters.len() <= 2);
            let items: HashSet<&str> = rs.iter().map(|r| r.item_id.as_str()).collect();
            assert_eq!(items.len(), rs.len());
            assert!(rs.windows(2).all(|w| w[0].timestamp < w[1].timestamp));
        }
    }

    #[test]
    fn cross_session_gaps_exceed_window_with_signal() {
        let recs = generate(&SynthConfig {
            users: 20,
            ..SynthConfig::default()
        });
        for w in recs.windows(2).filter(|w| w[0].user_id == w[1].user_id) {
            let gap = w[1].timestamp - w[0].timestamp;
            let same = cluster_of(&w[0].item_id) == cluster_of(&w[1].item_id);
            if !same {
                assert!(gap > 64 * DAY);
            }
        }
    }

    #[test]
    fn deterministic() {
        let cfg = SynthConfig {
            users: 10,
            ..SynthConfig::default()
        };
        assert_eq!(generate(&cfg), generate(&cfg));
    }
}
