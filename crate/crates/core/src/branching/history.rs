use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Direction;

/// How the recorded GMI efficacies are summarized per variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GmiHistoryMode {
    /// Normalized efficacy of the most recent qualifying cut.
    #[default]
    MostRecent,
    /// Running mean of all recorded normalized efficacies.
    Average,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PseudoCost {
    pub sum: f64,
    pub count: usize,
}

impl PseudoCost {
    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum / self.count as f64)
    }
}

/// Per-variable statistics owned by one solve.
#[derive(Debug, Clone)]
pub struct BranchHistory {
    pub down: Vec<PseudoCost>,
    pub up: Vec<PseudoCost>,
    pub strong_inits: Vec<usize>,
    pub last_gmi_eff: Vec<Option<f64>>,
    gmi_sum: Vec<(f64, usize)>,
    pub rng: ChaCha8Rng,
}

impl BranchHistory {
    pub fn new(n_vars: usize, seed: u64) -> Self {
        BranchHistory {
            down: vec![PseudoCost::default(); n_vars],
            up: vec![PseudoCost::default(); n_vars],
            strong_inits: vec![0; n_vars],
            last_gmi_eff: vec![None; n_vars],
            gmi_sum: vec![(0.0, 0); n_vars],
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn pseudocost(&self, j: usize, dir: Direction) -> &PseudoCost {
        match dir {
            Direction::Down => &self.down[j],
            Direction::Up => &self.up[j],
        }
    }

    /// Mean unit gain over all variables with observations in `dir`, or 1.
    pub fn global_mean(&self, dir: Direction) -> f64 {
        let table = match dir {
            Direction::Down => &self.down,
            Direction::Up => &self.up,
        };
        let (s, c) = table.iter().filter(|p| p.count > 0).fold((0.0, 0usize), |(s, c), p| (s + p.mean().unwrap(), c + 1));
        if c == 0 {
            1.0
        } else {
            s / c as f64
        }
    }

    /// Average unit gain for `j` in `dir`, falling back to the global mean.
    pub fn unit_gain(&self, j: usize, dir: Direction) -> f64 {
        self.pseudocost(j, dir).mean().unwrap_or_else(|| self.global_mean(dir))
    }

    pub fn reliability(&self, j: usize) -> usize {
        self.down[j].count.min(self.up[j].count)
    }

    pub fn gmi_score(&self, j: usize, mode: GmiHistoryMode) -> Option<f64> {
        match mode {
            GmiHistoryMode::MostRecent => self.last_gmi_eff[j],
            GmiHistoryMode::Average => {
                let (s, c) = self.gmi_sum[j];
                (c > 0).then(|| s / c as f64)
            }
        }
    }
}

/// Records one observed branching gain; negative gains count as zero.
pub fn update_pseudocost(hist: &mut BranchHistory, j: usize, dir: Direction, frac: f64, gain: f64) {
    let gain = gain.max(0.0);
    let (entry, unit) = match dir {
        Direction::Down => (&mut hist.down[j], gain / frac),
        Direction::Up => (&mut hist.up[j], gain / (1.0 - frac)),
    };
    entry.sum += unit;
    entry.count += 1;
}

/// Stores, for each cut of one separation round whose raw efficacy exceeds
/// `eps`, its efficacy normalized by the round's maximum.
pub fn record_gmi_history(hist: &mut BranchHistory, round: &[(usize, f64)], eps: f64) {
    let max = round.iter().map(|&(_, e)| e).fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) {
        return;
    }
    for &(j, raw) in round {
        if raw > eps {
            let norm = raw / max;
            hist.last_gmi_eff[j] = Some(norm);
            hist.gmi_sum[j].0 += norm;
            hist.gmi_sum[j].1 += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pseudocost_updates() {
        let mut h = BranchHistory::new(2, 1);
        update_pseudocost(&mut h, 0, Direction::Down, 0.3, 0.6);
        assert!((h.down[0].sum - 2.0).abs() < 1e-12);
        update_pseudocost(&mut h, 1, Direction::Up, 0.3, 0.0);
        assert_eq!(h.up[1].count, 1);
        assert_eq!(h.up[1].sum, 0.0);
        let mut h = BranchHistory::new(1, 1);
        update_pseudocost(&mut h, 0, Direction::Down, 0.5, 1.0);
        update_pseudocost(&mut h, 0, Direction::Down, 0.5, 2.0);
        assert_eq!(h.down[0].mean(), Some(3.0));
        update_pseudocost(&mut h, 0, Direction::Up, 0.5, -4.0);
        assert_eq!(h.up[0].mean(), Some(0.0));
    }

    #[test]
    fn gmi_history_normalizes_and_overwrites() {
        let mut h = BranchHistory::new(3, 1);
        record_gmi_history(&mut h, &[(1, 0.5), (2, 0.25)], 1e-4);
        assert_eq!(h.last_gmi_eff[1], Some(1.0));
        assert_eq!(h.last_gmi_eff[2], Some(0.5));
        record_gmi_history(&mut h, &[(2, 5e-5)], 1e-4);
        assert_eq!(h.last_gmi_eff[2], Some(0.5));
        record_gmi_history(&mut h, &[(2, 0.1), (0, 0.4)], 1e-4);
        assert_eq!(h.last_gmi_eff[2], Some(0.25));
        assert_eq!(h.gmi_score(2, GmiHistoryMode::Average), Some(0.375));
        assert_eq!(h.last_gmi_eff[0], Some(1.0));
    }
}
