use alloc::vec::Vec;

use crate::train::RunRecord;
use crate::{Error, Result};

/// Successive-weight gaps over the snapshots of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct GapStats {
    pub depth: usize,
    /// Largest `||V_{k+1} - V_k||_F + ||W_{k+1} - W_k||_F` over `k` and snapshots.
    pub max_gap: f64,
    /// `(t, max_k summed gap)` per snapshot.
    pub per_t_max: Vec<(f64, f64)>,
    /// Largest `||V_{k+1} - V_k||_F` alone.
    pub max_gap_v: f64,
    /// Largest `||W_{k+1} - W_k||_F` alone.
    pub max_gap_w: f64,
}

/// Gap maxima over every snapshot; zero for `L = 1`.
pub fn gap_stats(record: &RunRecord) -> GapStats {
    let mut stats = GapStats {
        depth: record.depth,
        max_gap: 0.0,
        per_t_max: Vec::with_capacity(record.snapshots.len()),
        max_gap_v: 0.0,
        max_gap_w: 0.0,
    };
    for snap in &record.snapshots {
        let mut summed = 0.0f64;
        for (dv, dw) in snap.params.successive_gaps() {
            summed = summed.max(dv + dw);
            stats.max_gap_v = stats.max_gap_v.max(dv);
            stats.max_gap_w = stats.max_gap_w.max(dw);
        }
        stats.max_gap = stats.max_gap.max(summed);
        stats.per_t_max.push((snap.t, summed));
    }
    stats
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightBlock {
    V,
    W,
}

/// One scalar entry of every `V_k` or every `W_k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProfileEntry {
    pub block: WeightBlock,
    pub row: usize,
    pub col: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProfileCurve {
    pub t: f64,
    /// `(k / L, entry of block k)` for `k = 1..L`.
    pub points: Vec<(f64, f64)>,
    /// `sum_k |z_{k+1} - z_k|`.
    pub total_variation: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightProfile {
    pub entry: ProfileEntry,
    pub curves: Vec<ProfileCurve>,
}

/// The chosen entry across depth, one curve per snapshot.
pub fn weight_profile(record: &RunRecord, entry: ProfileEntry) -> Result<WeightProfile> {
    let mut curves = Vec::with_capacity(record.snapshots.len());
    for snap in &record.snapshots {
        let p = &snap.params;
        let depth = p.depth();
        let blocks = match entry.block {
            WeightBlock::V => p.vs(),
            WeightBlock::W => p.ws(),
        };
        let (rows, cols) = blocks[0].shape();
        if entry.row >= rows || entry.col >= cols {
            return Err(Error::Index("profile entry outside the weight block"));
        }
        let points: Vec<(f64, f64)> = blocks
            .iter()
            .enumerate()
            .map(|(k, m)| ((k + 1) as f64 / depth as f64, m.get(entry.row, entry.col)))
            .collect();
        let total_variation = points.windows(2).map(|w| (w[1].1 - w[0].1).abs()).sum();
        curves.push(ProfileCurve { t: snap.t, points, total_variation });
    }
    Ok(WeightProfile { entry, curves })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_iid, init_standard, Dataset, Dims};
    use crate::numcore::Rng;
    use crate::train::{run, Snapshot, TrainConfig};

    fn init_record(params: crate::model::ResNetParams) -> RunRecord {
        RunRecord {
            depth: params.depth(),
            times: alloc::vec![0.0],
            losses: alloc::vec![1.0],
            grad_norm_sq: alloc::vec![1.0],
            snapshots: alloc::vec![Snapshot { iteration: 0, t: 0.0, params }],
        }
    }

    #[test]
    fn weight_tied_init_has_no_gap() {
        let p = init_standard(&Rng::new(1), Dims::new(8, 6, 4, 2, 2)).unwrap();
        let stats = gap_stats(&init_record(p));
        assert_eq!(stats.max_gap, 0.0);
        assert_eq!(stats.per_t_max, alloc::vec![(0.0, 0.0)]);
    }

    #[test]
    fn iid_init_gap_is_order_sqrt_qm() {
        // ||G - G'||_F for independent 16 x 16 Gaussians is about sqrt(2 * 256)
        // per block; the summed V + W gap has only the W term at init.
        let p = init_iid(&Rng::new(2), Dims::new(20, 16, 16, 4, 4)).unwrap();
        let stats = gap_stats(&init_record(p));
        let typical = libm::sqrt(2.0 * 256.0);
        assert!(stats.max_gap > 0.9 * typical && stats.max_gap < 1.5 * typical, "{}", stats.max_gap);
        assert_eq!(stats.max_gap_v, 0.0);
    }

    #[test]
    fn max_gap_is_max_of_per_t() {
        let dims = Dims::new(5, 6, 4, 2, 2);
        let p = init_standard(&Rng::new(3), dims).unwrap();
        let data = Dataset::gaussian(&Rng::new(3), 2, 2, 4).unwrap();
        let record = run(&p, crate::model::Activation::Gelu, &data, &TrainConfig::new(0.05, 20)).unwrap();
        let stats = gap_stats(&record);
        let from_series = stats.per_t_max.iter().map(|e| e.1).fold(0.0, f64::max);
        assert_eq!(stats.max_gap, from_series);
        assert!(stats.max_gap > 0.0);
        assert_eq!(gap_stats(&record), stats);
    }

    #[test]
    fn profile_total_variation() {
        let tied = init_standard(&Rng::new(4), Dims::new(10, 6, 4, 2, 2)).unwrap();
        let entry = ProfileEntry { block: WeightBlock::W, row: 1, col: 2 };
        let prof = weight_profile(&init_record(tied), entry).unwrap();
        assert_eq!(prof.curves[0].total_variation, 0.0);
        assert_eq!(prof.curves[0].points.len(), 10);
        assert_eq!(prof.curves[0].points[9].0, 1.0);
        let bad = ProfileEntry { block: WeightBlock::V, row: 6, col: 0 };
        let p = init_standard(&Rng::new(4), Dims::new(2, 6, 4, 2, 2)).unwrap();
        assert!(matches!(weight_profile(&init_record(p), bad), Err(Error::Index(_))));
    }

    #[test]
    fn iid_total_variation_grows_linearly() {
        // E|g - g'| = 2 / sqrt(pi) for independent standard normals
        let entry = ProfileEntry { block: WeightBlock::W, row: 0, col: 0 };
        let mean_tv = |depth: usize| {
            let runs = 40;
            (0..runs)
                .map(|seed| {
                    let p = init_iid(&Rng::new(seed), Dims::new(depth, 4, 4, 2, 2)).unwrap();
                    weight_profile(&init_record(p), entry).unwrap().curves[0].total_variation
                })
                .sum::<f64>()
                / runs as f64
        };
        let per_step = 2.0 / libm::sqrt(core::f64::consts::PI);
        for depth in [32, 128] {
            let tv = mean_tv(depth);
            let expected = per_step * (depth - 1) as f64;
            assert!((tv / expected - 1.0).abs() < 0.1, "{depth}: {tv} vs {expected}");
        }
    }
}
