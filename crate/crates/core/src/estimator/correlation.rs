//! Time-domain chirp correlation: pilot removal, block candidates and the
//! per-row correlation table that resolves block index and Doppler.

use serde::Serialize;

use crate::ops::OpCounts;
use crate::zak::C64;

/// Zeroes every sample whose power exceeds `threshold`.
pub fn isolate_chirp(received: &[C64], threshold: f64) -> Vec<C64> {
    received
        .iter()
        .map(|&v| {
            if v.norm_sqr() > threshold {
                C64::new(0.0, 0.0)
            } else {
                v
            }
        })
        .collect()
}

/// `Σ_{q′} signal[lag + q′]·template*[q′]`, truncated at the end of `signal`.
pub fn correlate_at(signal: &[C64], template: &[C64], lag: usize) -> C64 {
    if lag >= signal.len() {
        return C64::new(0.0, 0.0);
    }
    signal[lag..].iter().zip(template).map(|(s, p)| s * p.conj()).sum()
}

/// Correlation against `template` for every lag in `[0, max_lag]`.
pub fn correlate(signal: &[C64], template: &[C64], max_lag: usize, ops: &mut OpCounts) -> Vec<C64> {
    (0..=max_lag)
        .map(|lag| {
            ops.correlation += template.len().min(signal.len().saturating_sub(lag)) as u64;
            correlate_at(signal, template, lag)
        })
        .collect()
}

/// Distinct blocks `⌊q/M⌋` over the lags whose correlation reaches `threshold`.
pub fn block_candidates(correlation: &[C64], threshold: f64, m: usize) -> Vec<usize> {
    let mut blocks: Vec<usize> = correlation
        .iter()
        .enumerate()
        .filter(|(_, c)| c.norm() >= threshold)
        .map(|(q, _)| q / m)
        .collect();
    blocks.dedup();
    blocks
}

/// Correlations `C[β][λ]` for one aliased delay across block candidates β
/// and Doppler candidates λ, with the per-block winners and the selected set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationTable {
    pub aliased_delay: usize,
    pub block_len: usize,
    pub blocks: Vec<usize>,
    pub dopplers: Vec<usize>,
    /// `values[β][λ]`.
    pub values: Vec<Vec<C64>>,
    /// Winning Doppler position per block.
    pub winners: Vec<usize>,
    /// Selected block positions, strongest first.
    pub selected: Vec<usize>,
}

impl CorrelationTable {
    /// Derives winners (ties to the smaller λ) and the `|dopplers|` strongest
    /// blocks (ties to the smaller β) from a filled table.
    pub fn from_values(
        aliased_delay: usize,
        block_len: usize,
        blocks: Vec<usize>,
        dopplers: Vec<usize>,
        values: Vec<Vec<C64>>,
    ) -> Self {
        assert_eq!(values.len(), blocks.len(), "one row per block");
        assert!(
            values.iter().all(|r| r.len() == dopplers.len()),
            "one column per Doppler"
        );
        let winners: Vec<usize> = values
            .iter()
            .map(|row| {
                let mut best = 0;
                for (j, v) in row.iter().enumerate() {
                    if v.norm() > row[best].norm() {
                        best = j;
                    }
                }
                best
            })
            .collect();
        let mut order: Vec<usize> = (0..blocks.len()).collect();
        order.sort_by(|&a, &b| {
            let (va, vb) = (values[a][winners[a]].norm(), values[b][winners[b]].norm());
            vb.total_cmp(&va).then(a.cmp(&b))
        });
        order.truncate(dopplers.len());
        Self {
            aliased_delay,
            block_len,
            blocks,
            dopplers,
            values,
            winners,
            selected: order,
        }
    }

    /// Fills the table by correlating `signal` with one template per Doppler.
    pub fn measure(
        aliased_delay: usize,
        block_len: usize,
        blocks: &[usize],
        dopplers: &[usize],
        signal: &[C64],
        templates: &[&[C64]],
        ops: &mut OpCounts,
    ) -> Self {
        let values = blocks
            .iter()
            .map(|&b| {
                let lag = aliased_delay + b * block_len;
                templates
                    .iter()
                    .map(|t| {
                        ops.correlation += t.len() as u64;
                        correlate_at(signal, t, lag)
                    })
                    .collect()
            })
            .collect();
        Self::from_values(aliased_delay, block_len, blocks.to_vec(), dopplers.to_vec(), values)
    }

    /// Delay hypothesis `ℓ̂ + b_β·M`.
    pub fn delay(&self, beta: usize) -> usize {
        self.aliased_delay + self.blocks[beta] * self.block_len
    }

    pub fn winner_doppler(&self, beta: usize) -> usize {
        self.dopplers[self.winners[beta]]
    }

    pub fn best(&self, beta: usize) -> C64 {
        self.values[beta][self.winners[beta]]
    }

    /// Fewer block candidates than Doppler candidates.
    pub fn under_resolved(&self) -> bool {
        self.blocks.len() < self.dopplers.len()
    }

    /// Selected (delay, Doppler) pairs, strongest first.
    pub fn selected_pairs(&self) -> Vec<(usize, usize)> {
        self.selected
            .iter()
            .map(|&b| (self.delay(b), self.winner_doppler(b)))
            .collect()
    }

    /// Whether some selected block has a runner-up Doppler whose correlation
    /// magnitude is within `ε₁` (relative) of its winner.
    pub fn doppler_near_tie(&self, epsilon1: f64) -> bool {
        self.selected.iter().any(|&b| {
            let top = self.best(b).norm();
            top > 0.0
                && (0..self.dopplers.len())
                    .filter(|&j| j != self.winners[b])
                    .any(|j| (top - self.values[b][j].norm()) / top <= epsilon1)
        })
    }

    /// Unselected blocks paired with a selected block that shares their
    /// winning Doppler and whose correlation magnitude they approach within `ε₁`.
    pub fn delay_near_ties(&self, epsilon1: f64) -> Vec<(usize, usize)> {
        (0..self.blocks.len())
            .filter(|b| !self.selected.contains(b))
            .filter_map(|b| {
                let partner = self.selected.iter().copied().find(|&s| {
                    let top = self.best(s).norm();
                    self.winners[s] == self.winners[b] && top > 0.0 && (top - self.best(b).norm()) / top <= epsilon1
                })?;
                Some((b, partner))
            })
            .collect()
    }
}
