//! MSE-gated corrections after the correlation stage: re-pairing Dopplers
//! with delays inside one aliased row, and recovering a second delay that
//! shares a Doppler with an already selected one.

use super::correlation::CorrelationTable;
use super::reconstruct::PathModel;
use super::{PathEstimate, PathSource};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RefineOutcome {
    pub mse: f64,
    /// The trigger condition held and candidates were scored.
    pub searched: bool,
    /// The path list was replaced by a strictly better one.
    pub changed: bool,
    /// The Doppler set was too large for exhaustive pairing.
    pub skipped: bool,
}

/// Every ordered selection of `len` distinct items from `items`.
pub fn arrangements(items: &[usize], len: usize) -> Vec<Vec<usize>> {
    fn go(items: &[usize], len: usize, used: &mut Vec<bool>, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == len {
            out.push(cur.clone());
            return;
        }
        for i in 0..items.len() {
            if !used[i] {
                used[i] = true;
                cur.push(items[i]);
                go(items, len, used, cur, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    if len <= items.len() {
        go(
            items,
            len,
            &mut vec![false; items.len()],
            &mut Vec::with_capacity(len),
            &mut out,
        );
    }
    out
}

/// Tries every assignment of the row's Doppler set to its selected delays and
/// keeps the one with the lowest error, if it beats `mse`.
pub fn refine_doppler<M: PathModel>(
    mse: f64,
    table: &CorrelationTable,
    paths: &mut Vec<PathEstimate>,
    epsilon1: f64,
    max_set: usize,
    model: &mut M,
) -> RefineOutcome {
    let mut outcome = RefineOutcome {
        mse,
        ..Default::default()
    };
    if table.dopplers.len() < 2 || !table.doppler_near_tie(epsilon1) {
        return outcome;
    }
    if table.dopplers.len() > max_set {
        outcome.skipped = true;
        return outcome;
    }
    let slots: Vec<usize> = table
        .selected
        .iter()
        .filter_map(|&b| {
            let d = table.delay(b);
            paths
                .iter()
                .position(|p| p.delay == d && p.source != PathSource::Stage1)
        })
        .collect();
    if slots.is_empty() {
        return outcome;
    }
    outcome.searched = true;
    let from = slots.iter().map(|&i| paths[i].delay).min().unwrap_or(0);
    let mut best: Option<Vec<PathEstimate>> = None;
    for assignment in arrangements(&table.dopplers, slots.len()) {
        let mut trial = paths.clone();
        for (&slot, &k) in slots.iter().zip(&assignment) {
            trial[slot].doppler = k;
        }
        let err = model.fit(&mut trial, from);
        if err < outcome.mse {
            outcome.mse = err;
            best = Some(trial);
        }
    }
    if let Some(b) = best {
        *paths = b;
        outcome.changed = true;
    }
    outcome
}

/// For each unselected block that nearly matches a selected same-Doppler
/// block, tentatively adds its delay; keeps it only on a strict error drop.
/// Stops as soon as the error falls below `gate`.
pub fn refine_delay<M: PathModel>(
    mse: f64,
    table: &CorrelationTable,
    paths: &mut Vec<PathEstimate>,
    epsilon1: f64,
    gate: f64,
    model: &mut M,
) -> RefineOutcome {
    let mut outcome = RefineOutcome {
        mse,
        ..Default::default()
    };
    for (beta, partner) in table.delay_near_ties(epsilon1) {
        if outcome.mse < gate {
            break;
        }
        let delay = table.delay(beta);
        if paths.iter().any(|p| p.delay == delay) {
            continue;
        }
        outcome.searched = true;
        let mut trial = paths.clone();
        trial.push(PathEstimate {
            delay,
            doppler: table.winner_doppler(beta),
            gain: Default::default(),
            source: PathSource::Refine2,
        });
        trial.sort_by_key(|p| p.delay);
        let err = model.fit(&mut trial, delay.min(table.delay(partner)));
        if err < outcome.mse {
            outcome.mse = err;
            *paths = trial;
            outcome.changed = true;
        }
    }
    outcome
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zak::C64;

    #[test]
    fn arrangement_counts() {
        assert_eq!(arrangements(&[1, 2], 2), vec![vec![1, 2], vec![2, 1]]);
        assert_eq!(arrangements(&[1, 2, 3], 3).len(), 6);
        assert_eq!(arrangements(&[1, 2, 3, 4], 2).len(), 12);
        assert!(arrangements(&[1], 2).is_empty());
    }

    /// Error = number of paths whose (delay, Doppler) is not in `truth`, plus
    /// the number of truth entries missing.
    struct SetModel {
        truth: Vec<(usize, usize)>,
        calls: usize,
    }

    impl PathModel for SetModel {
        fn fit(&mut self, paths: &mut [PathEstimate], _: usize) -> f64 {
            self.calls += 1;
            let have: Vec<(usize, usize)> = paths.iter().map(|p| (p.delay, p.doppler)).collect();
            let wrong = have.iter().filter(|x| !self.truth.contains(x)).count();
            let missing = self.truth.iter().filter(|x| !have.contains(x)).count();
            (wrong + missing) as f64
        }
    }

    fn p(delay: usize, doppler: usize) -> PathEstimate {
        PathEstimate {
            delay,
            doppler,
            gain: C64::new(1.0, 0.0),
            source: PathSource::Stage2,
        }
    }

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn doppler_pairing_with_two_candidates_scores_two_assignments() {
        let table = CorrelationTable::from_values(
            4,
            8,
            vec![0, 2],
            vec![2, 5],
            vec![vec![c(0.85), c(0.9)], vec![c(1.0), c(0.95)]],
        );
        let mut paths = vec![p(4, 5), p(20, 2)];
        let mut model = SetModel {
            truth: vec![(4, 2), (20, 5)],
            calls: 0,
        };
        let out = refine_doppler(4.0, &table, &mut paths, 0.6, 7, &mut model);
        assert_eq!(model.calls, 2);
        assert!(out.changed && out.mse == 0.0);
        assert_eq!(
            paths.iter().map(|x| (x.delay, x.doppler)).collect::<Vec<_>>(),
            vec![(4, 2), (20, 5)]
        );
    }

    #[test]
    fn separated_correlations_leave_list_alone() {
        let table = CorrelationTable::from_values(
            4,
            8,
            vec![0, 2],
            vec![2, 5],
            vec![vec![c(0.1), c(0.9)], vec![c(1.0), c(0.2)]],
        );
        let mut paths = vec![p(4, 5), p(20, 2)];
        let before = paths.clone();
        let mut model = SetModel {
            truth: vec![],
            calls: 0,
        };
        let out = refine_doppler(4.0, &table, &mut paths, 0.6, 7, &mut model);
        assert!(!out.searched && !out.changed);
        assert_eq!(paths, before);
        assert_eq!(model.calls, 0);
    }

    #[test]
    fn delay_recovery_keeps_only_improvements() {
        let table = CorrelationTable::from_values(
            4,
            8,
            vec![0, 1, 2, 3],
            vec![2, 5],
            vec![
                vec![c(0.85), c(0.9)],
                vec![c(0.8), c(0.5)],
                vec![c(1.0), c(0.95)],
                vec![c(0.2), c(0.3)],
            ],
        );
        let mut paths = vec![p(4, 2), p(20, 5)];
        let mut model = SetModel {
            truth: vec![(4, 2), (12, 2), (20, 5)],
            calls: 0,
        };
        let out = refine_delay(1.0, &table, &mut paths, 0.6, 0.5, &mut model);
        assert!(out.changed);
        assert!(paths
            .iter()
            .any(|x| x.delay == 12 && x.doppler == 2 && x.source == PathSource::Refine2));
        assert!(!paths.iter().any(|x| x.delay == 28));
        assert_eq!(model.calls, 1);
    }
}
