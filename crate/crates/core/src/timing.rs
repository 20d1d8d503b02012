//! Note time-lags, adjusted note lengths and phoneme duration allocation.
//!
//! Lags are signed frame offsets of each note's reference phoneme relative
//! to the score. Adjusted note lengths are the sung note spans implied by
//! the lags; each is then split over the note's phonemes either in
//! proportion to the predicted means or by maximizing the Gaussian duration
//! likelihood under the sum constraint.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::{AlignmentError, PhonemeAlignment};
use crate::nnet::{Network, NetworkError};
use crate::score::Score;
use crate::seq::Seq;

#[derive(Debug, Error, PartialEq)]
pub enum TimingError {
    #[error("infeasible time-lag: notes {notes:?} would have non-positive length")]
    InfeasibleLag { notes: Vec<usize> },
    #[error("the first time-lag must be zero, got {0}")]
    FirstLag(f64),
    #[error("{lengths} note lengths but {lags} lags")]
    LagCount { lengths: usize, lags: usize },
    #[error("duration means must be positive with a positive sum")]
    BadMeans,
    #[error("duration variances must be positive")]
    BadVariance,
    #[error("phoneme {phoneme} gets a non-positive duration {value}")]
    InfeasibleDuration { phoneme: usize, value: f64 },
    #[error("{frames} frames cannot hold {phonemes} phonemes of at least one frame")]
    TooShort { frames: usize, phonemes: usize },
    #[error("means and variances differ in length")]
    Shape,
    #[error(transparent)]
    Alignment(#[from] AlignmentError),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// What to do with lags or durations that leave a note or phoneme with no
/// frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RepairMode {
    /// Fail with an error naming the offending entries.
    #[default]
    Strict,
    /// Clamp to one frame, rebalance the rest, and flag the result.
    Clamp,
}

/// Index of the reference phoneme within each note.
pub fn reference_phoneme_map(score: &Score) -> Vec<usize> {
    score.notes.iter().map(|n| n.reference_phoneme()).collect()
}

/// Lag of every note: aligned reference-phoneme start minus score note
/// start. The first entry is always zero.
pub fn compute_time_lag_targets(
    score: &Score,
    alignment: &PhonemeAlignment,
) -> Result<Vec<f64>, TimingError> {
    let starts = alignment.reference_starts(score)?;
    let mut lags: Vec<f64> = score
        .note_spans()
        .iter()
        .zip(&starts)
        .map(|(span, &s)| s as f64 - span.start as f64)
        .collect();
    if let Some(first) = lags.first_mut() {
        *first = 0.0;
    }
    Ok(lags)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustedNoteLengths {
    pub l_hat: Vec<usize>,
    /// Set when [`RepairMode::Clamp`] changed the result.
    pub repaired: bool,
}

/// `L̂_n = L_n − g_n + g_{n+1}` and `L̂_N = L_N − g_N`, with lags rounded to
/// whole frames so the total is preserved exactly.
pub fn adjust_note_lengths(
    lengths: &[usize],
    lags: &[f64],
    mode: RepairMode,
) -> Result<AdjustedNoteLengths, TimingError> {
    if lengths.len() != lags.len() {
        return Err(TimingError::LagCount {
            lengths: lengths.len(),
            lags: lags.len(),
        });
    }
    if let Some(&g0) = lags.first() {
        if g0 != 0.0 {
            return Err(TimingError::FirstLag(g0));
        }
    }
    let g: Vec<i64> = lags.iter().map(|v| v.round() as i64).collect();
    let n = lengths.len();
    let raw: Vec<i64> = (0..n)
        .map(|i| {
            let next = if i + 1 < n { g[i + 1] } else { 0 };
            lengths[i] as i64 - g[i] + next
        })
        .collect();
    let bad: Vec<usize> = (0..n).filter(|&i| raw[i] <= 0).collect();
    if bad.is_empty() {
        return Ok(AdjustedNoteLengths {
            l_hat: raw.iter().map(|&v| v as usize).collect(),
            repaired: false,
        });
    }
    if mode == RepairMode::Strict {
        return Err(TimingError::InfeasibleLag { notes: bad });
    }
    let total: i64 = raw.iter().sum();
    if total < n as i64 {
        return Err(TimingError::InfeasibleLag { notes: bad });
    }
    let mut fixed = raw;
    let mut debt: i64 = 0;
    for &i in &bad {
        debt += 1 - fixed[i];
        fixed[i] = 1;
    }
    take_from_largest(&mut fixed, debt);
    Ok(AdjustedNoteLengths {
        l_hat: fixed.iter().map(|&v| v as usize).collect(),
        repaired: true,
    })
}

/// Removes `debt` units one at a time from the largest entry (earliest on
/// ties), never taking an entry below one.
fn take_from_largest(values: &mut [i64], mut debt: i64) {
    while debt > 0 {
        let (i, _) = values
            .iter()
            .enumerate()
            .rev()
            .max_by_key(|&(_, v)| *v)
            .expect("non-empty");
        debug_assert!(values[i] > 1);
        values[i] -= 1;
        debt -= 1;
    }
}

/// Integer durations plus the real-valued allocation they came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub frames: Vec<usize>,
    pub real: Vec<f64>,
    /// Set when clamping changed the allocation.
    pub repaired: bool,
}

/// Rounds non-negative reals summing to `total` onto integers summing to
/// `total` exactly: floors, then the largest remainders get one extra
/// frame (the later phoneme wins ties). Every entry is then raised to at
/// least one frame by taking frames from the largest entry (earliest wins
/// ties).
pub fn integerize(real: &[f64], total: usize) -> Vec<usize> {
    let k = real.len();
    if k == 0 {
        return Vec::new();
    }
    let floors: Vec<i64> = real.iter().map(|v| v.max(0.0).floor() as i64).collect();
    let mut out = floors.clone();
    let assigned: i64 = floors.iter().sum();
    let mut left = total as i64 - assigned;
    let mut order: Vec<usize> = (0..k).collect();
    // largest remainder first; on equal remainders the later phoneme first
    order.sort_by(|&a, &b| {
        let ra = real[a].max(0.0) - floors[a] as f64;
        let rb = real[b].max(0.0) - floors[b] as f64;
        rb.total_cmp(&ra).then(b.cmp(&a))
    });
    let mut i = 0;
    while left > 0 {
        out[order[i % k]] += 1;
        left -= 1;
        i += 1;
    }
    while left < 0 {
        // only reachable through floating-point drift in `real`
        let (j, _) = out.iter().enumerate().rev().max_by_key(|&(_, v)| *v).unwrap();
        out[j] -= 1;
        left += 1;
    }
    let debt: i64 = out.iter().filter(|&&v| v < 1).map(|&v| 1 - v).sum();
    if debt > 0 && total >= k {
        out.iter_mut().filter(|v| **v < 1).for_each(|v| *v = 1);
        take_from_largest(&mut out, debt);
    }
    out.into_iter().map(|v| v.max(0) as usize).collect()
}

fn check_room(l_hat: usize, k: usize) -> Result<(), TimingError> {
    if l_hat < k {
        return Err(TimingError::TooShort {
            frames: l_hat,
            phonemes: k,
        });
    }
    Ok(())
}

/// Splits `l_hat` frames in proportion to the mean durations.
pub fn allocate_uniform(l_hat: usize, mu: &[f64]) -> Result<Allocation, TimingError> {
    let sum: f64 = mu.iter().sum();
    if mu.is_empty() || mu.iter().any(|&m| !(m > 0.0)) || !(sum > 0.0) {
        return Err(TimingError::BadMeans);
    }
    check_room(l_hat, mu.len())?;
    let real: Vec<f64> = mu.iter().map(|m| l_hat as f64 * m / sum).collect();
    Ok(Allocation {
        frames: integerize(&real, l_hat),
        real,
        repaired: false,
    })
}

/// Maximizes `Σ log N(d_k | μ_k, σ²_k)` subject to `Σ d_k = l_hat`:
/// `d_k = μ_k + ρ σ²_k` with `ρ = (l_hat − Σμ) / Σσ²`.
///
/// A phoneme whose optimum is below one frame is an error in strict mode.
/// In clamp mode it is fixed at one frame and the remaining phonemes are
/// re-solved on the remaining length.
pub fn allocate_ml(
    l_hat: usize,
    mu: &[f64],
    var: &[f64],
    mode: RepairMode,
) -> Result<Allocation, TimingError> {
    if mu.len() != var.len() {
        return Err(TimingError::Shape);
    }
    if mu.is_empty() || mu.iter().any(|m| !m.is_finite()) {
        return Err(TimingError::BadMeans);
    }
    if var.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(TimingError::BadVariance);
    }
    check_room(l_hat, mu.len())?;
    let mut fixed = vec![false; mu.len()];
    let mut real = vec![0.0; mu.len()];
    let mut repaired = false;
    loop {
        let free_len = l_hat as f64 - fixed.iter().filter(|f| **f).count() as f64;
        let (sum_mu, sum_var) = (0..mu.len())
            .filter(|&k| !fixed[k])
            .fold((0.0, 0.0), |(a, b), k| (a + mu[k], b + var[k]));
        let rho = (free_len - sum_mu) / sum_var;
        let mut violated = false;
        for k in 0..mu.len() {
            if fixed[k] {
                real[k] = 1.0;
                continue;
            }
            real[k] = mu[k] + rho * var[k];
            if real[k] < 1.0 {
                if mode == RepairMode::Strict && real[k] <= 0.0 {
                    return Err(TimingError::InfeasibleDuration {
                        phoneme: k,
                        value: real[k],
                    });
                }
                if mode == RepairMode::Clamp {
                    violated = true;
                }
            }
        }
        if !violated {
            break;
        }
        for k in 0..mu.len() {
            if !fixed[k] && real[k] < 1.0 {
                fixed[k] = true;
            }
        }
        repaired = true;
    }
    Ok(Allocation {
        frames: integerize(&real, l_hat),
        real,
        repaired,
    })
}

/// Gaussian duration model output for a sequence of phonemes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurationDistribution {
    pub mu: Vec<f64>,
    pub var: Vec<f64>,
}

/// Runs the lag model over note-level features; the first lag is zero.
pub fn predict_time_lags(
    features: &Seq,
    note_pitch: &[f64],
    model: &Network,
) -> Result<Vec<f64>, TimingError> {
    let out = model.forward_seq(features, note_pitch)?;
    let mut lags = out.column(0);
    if let Some(first) = lags.first_mut() {
        *first = 0.0;
    }
    Ok(lags)
}

/// Runs the density model over phoneme-level features.
pub fn predict_durations(
    features: &Seq,
    note_pitch: &[f64],
    model: &Network,
) -> Result<DurationDistribution, TimingError> {
    let out = model.forward_seq(features, note_pitch)?;
    Ok(DurationDistribution {
        mu: out.column(0),
        var: out.column(1).into_iter().map(f64::exp).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AllocationMethod {
    Uniform,
    #[default]
    Ml,
}

/// Phonemes allocated against each adjusted note length: from the note's
/// reference phoneme up to the next note's reference phoneme, so a note's
/// group ends with the consonants that lead into the next note. The first
/// group starts at phoneme 0. Indices are into the score's phoneme layout.
pub fn allocation_groups(score: &Score) -> Vec<std::ops::Range<usize>> {
    let mut starts = Vec::with_capacity(score.notes.len());
    let mut k = 0;
    for note in &score.notes {
        starts.push(k + note.reference_phoneme());
        k += note.sung_phonemes().len();
    }
    if let Some(first) = starts.first_mut() {
        *first = 0;
    }
    (0..starts.len())
        .map(|i| starts[i]..starts.get(i + 1).copied().unwrap_or(k))
        .collect()
}

/// Phoneme durations for a whole score from adjusted note lengths and a
/// per-phoneme duration distribution. Returns the frames per phoneme and
/// whether any group needed repair.
pub fn allocate_score(
    score: &Score,
    l_hat: &[usize],
    dist: &DurationDistribution,
    method: AllocationMethod,
    mode: RepairMode,
) -> Result<(Vec<usize>, bool), TimingError> {
    let groups = allocation_groups(score);
    let total = groups.last().map_or(0, |g| g.end);
    if dist.mu.len() != total || dist.var.len() != total || l_hat.len() != groups.len() {
        return Err(TimingError::Shape);
    }
    let mut out = Vec::with_capacity(total);
    let mut repaired = false;
    for (g, &len) in groups.iter().zip(l_hat) {
        if g.is_empty() {
            // a note whose reference phoneme is shared cannot happen with
            // non-empty notes; keep the invariant explicit
            return Err(TimingError::Shape);
        }
        // predicted means can be tiny or negative; keep them usable
        let mu: Vec<f64> = dist.mu[g.clone()].iter().map(|m| m.max(0.5)).collect();
        let a = match method {
            AllocationMethod::Uniform => allocate_uniform(len, &mu)?,
            AllocationMethod::Ml => allocate_ml(len, &mu, &dist.var[g.clone()], mode)?,
        };
        repaired |= a.repaired;
        out.extend(a.frames);
    }
    Ok((out, repaired))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alignment::PhonemeAlignment;
    use crate::score::test_support::score;
    use proptest::prelude::*;

    #[test]
    fn adjust_example() {
        let a = adjust_note_lengths(&[100, 100, 100], &[0.0, 10.0, -5.0], RepairMode::Strict)
            .unwrap();
        assert_eq!(a.l_hat, vec![110, 85, 105]);
        let id = adjust_note_lengths(&[7, 9], &[0.0, 0.0], RepairMode::Strict).unwrap();
        assert_eq!(id.l_hat, vec![7, 9]);
    }

    #[test]
    fn infeasible_lag() {
        // second note starts 20 frames early: first note has -10 frames
        let err = adjust_note_lengths(&[10, 100], &[0.0, -20.0], RepairMode::Strict).unwrap_err();
        assert_eq!(err, TimingError::InfeasibleLag { notes: vec![0] });
        let fixed = adjust_note_lengths(&[10, 100], &[0.0, -20.0], RepairMode::Clamp).unwrap();
        assert!(fixed.repaired);
        assert_eq!(fixed.l_hat, vec![1, 109]);
        assert!(adjust_note_lengths(&[10], &[1.0], RepairMode::Strict).is_err());
    }

    #[test]
    fn uniform_examples() {
        assert_eq!(allocate_uniform(120, &[20.0, 40.0]).unwrap().frames, vec![40, 80]);
        assert_eq!(allocate_uniform(60, &[20.0, 40.0]).unwrap().frames, vec![20, 40]);
        assert_eq!(allocate_uniform(10, &[1.0, 1.0, 1.0]).unwrap().frames, vec![3, 3, 4]);
        assert_eq!(allocate_uniform(10, &[0.0, 0.0]), Err(TimingError::BadMeans));
    }

    #[test]
    fn ml_examples() {
        let a = allocate_ml(100, &[30.0, 50.0], &[10.0, 40.0], RepairMode::Strict).unwrap();
        assert!((a.real[0] - 34.0).abs() < 1e-12 && (a.real[1] - 66.0).abs() < 1e-12);
        assert_eq!(a.frames, vec![34, 66]);
        let same = allocate_ml(80, &[30.0, 50.0], &[10.0, 40.0], RepairMode::Strict).unwrap();
        assert_eq!(same.real, vec![30.0, 50.0]);
        let eq = allocate_ml(90, &[20.0, 40.0], &[5.0, 5.0], RepairMode::Strict).unwrap();
        assert_eq!(eq.frames, vec![35, 55]);
    }

    #[test]
    fn ml_negative_duration() {
        // the deficit lands mostly on the high-variance phoneme
        let small = allocate_ml(10, &[50.0, 10.0], &[100.0, 1.0], RepairMode::Strict).unwrap();
        assert_eq!(small.frames, vec![1, 9]);
        let err = allocate_ml(10, &[10.0, 60.0], &[100.0, 1.0], RepairMode::Strict).unwrap_err();
        assert!(matches!(err, TimingError::InfeasibleDuration { phoneme: 0, .. }));
        let ok = allocate_ml(10, &[10.0, 60.0], &[1.0, 100.0], RepairMode::Clamp).unwrap();
        assert_eq!(ok.frames, vec![9, 1]);
        let fixed = allocate_ml(10, &[10.0, 60.0], &[100.0, 1.0], RepairMode::Clamp).unwrap();
        assert!(fixed.repaired);
        assert_eq!(fixed.frames, vec![1, 9]);
    }

    /// Exhaustive integer splits: least maximum deviation, then least squared
    /// deviation, then lexicographically smallest.
    fn oracle_split(exact: &[f64], total: usize) -> Vec<usize> {
        fn rec(k: usize, left: usize, cur: &mut Vec<usize>, all: &mut Vec<Vec<usize>>, n: usize) {
            if k + 1 == n {
                cur.push(left);
                all.push(cur.clone());
                cur.pop();
                return;
            }
            for v in 0..=left {
                cur.push(v);
                rec(k + 1, left - v, cur, all, n);
                cur.pop();
            }
        }
        let mut all = Vec::new();
        rec(0, total, &mut Vec::new(), &mut all, exact.len());
        let score = |d: &Vec<usize>| {
            let dev: Vec<f64> = d.iter().zip(exact).map(|(&a, &e)| (a as f64 - e).abs()).collect();
            let max = dev.iter().cloned().fold(0.0, f64::max);
            let sq: f64 = dev.iter().map(|x| x * x).sum();
            // round away float noise so ties compare equal
            ((max * 1e9).round() as i64, (sq * 1e9).round() as i64)
        };
        all.sort_by(|a, b| score(a).cmp(&score(b)).then(a.cmp(b)));
        all.swap_remove(0)
    }

    #[test]
    fn integerize_matches_exhaustive_oracle() {
        assert_eq!(oracle_split(&[10.0 / 3.0; 3], 10), vec![3, 3, 4]);
        let cases: &[(&[f64], usize)] = &[
            (&[1.0, 1.0, 1.0], 10),
            (&[2.0, 3.0], 7),
            (&[1.0, 2.0, 3.0, 4.0], 13),
            (&[5.0, 1.0, 1.0], 9),
            (&[1.0, 1.0, 1.0, 1.0], 6),
        ];
        for &(mu, total) in cases {
            let a = allocate_uniform(total, mu).unwrap();
            assert_eq!(a.frames, oracle_split(&a.real, total), "{mu:?} {total}");
        }
    }

    #[test]
    fn time_lag_targets() {
        // score: ka 0..20, sa 20..40, a 40..60
        let s = score(&[(Some(60), 20, "ka"), (Some(62), 20, "sa"), (Some(64), 20, "a")]);
        // sung: a at 5, second vowel at 29, third vowel at 44
        let a = PhonemeAlignment::from_durations(&["k", "a", "s", "a", "a"], &[5, 16, 8, 15, 16])
            .unwrap();
        assert_eq!(compute_time_lag_targets(&s, &a).unwrap(), vec![0.0, 9.0, 4.0]);
        // consonant 8 frames early, vowel at the onset
        let s2 = score(&[(Some(60), 20, "a"), (Some(62), 20, "ka")]);
        let a2 = PhonemeAlignment::from_durations(&["a", "k", "a"], &[12, 8, 20]).unwrap();
        assert_eq!(compute_time_lag_targets(&s2, &a2).unwrap(), vec![0.0, 0.0]);
        let a3 = PhonemeAlignment::from_durations(&["a", "k", "a"], &[17, 8, 15]).unwrap();
        assert_eq!(compute_time_lag_targets(&s2, &a3).unwrap(), vec![0.0, 5.0]);
        let short = PhonemeAlignment::from_durations(&["a", "k"], &[12, 8]).unwrap();
        assert!(compute_time_lag_targets(&s2, &short).is_err());
    }

    fn log_lik(d: &[f64], mu: &[f64], var: &[f64]) -> f64 {
        d.iter()
            .zip(mu)
            .zip(var)
            .map(|((d, m), v)| -(d - m).powi(2) / (2.0 * v))
            .sum()
    }

    /// Greedy marginal-gain search on a 0.01-frame lattice; exact for a
    /// separable concave objective.
    fn lattice_optimum(total: f64, mu: &[f64], var: &[f64]) -> Vec<f64> {
        let step = 0.01;
        let n = (total / step).round() as usize;
        let mut units = vec![0usize; mu.len()];
        for _ in 0..n {
            let gain = |k: usize, u: usize| {
                let a = u as f64 * step;
                let b = a + step;
                ((a - mu[k]).powi(2) - (b - mu[k]).powi(2)) / (2.0 * var[k])
            };
            let best = (0..mu.len())
                .max_by(|&a, &b| gain(a, units[a]).total_cmp(&gain(b, units[b])))
                .unwrap();
            units[best] += 1;
        }
        units.iter().map(|&u| u as f64 * step).collect()
    }

    #[test]
    fn groups_follow_reference_phonemes() {
        let s = score(&[(None, 10, ""), (Some(60), 20, "ka"), (Some(62), 20, "sa")]);
        // pau | k a | s a  -> [pau k] [a s] [a]
        assert_eq!(allocation_groups(&s), vec![0..2, 2..4, 4..5]);
        let a = PhonemeAlignment::from_durations(&["pau", "k", "a", "s", "a"], &[7, 3, 16, 6, 18])
            .unwrap();
        let lags = compute_time_lag_targets(&s, &a).unwrap();
        let adj = adjust_note_lengths(&s.note_lengths(), &lags, RepairMode::Strict).unwrap();
        let d = a.durations();
        let sums: Vec<usize> = allocation_groups(&s).iter().map(|g| d[g.clone()].iter().sum()).collect();
        assert_eq!(adj.l_hat, sums);
        let dist = DurationDistribution {
            mu: d.iter().map(|&v| v as f64).collect(),
            var: vec![1.0; 5],
        };
        let (frames, repaired) =
            allocate_score(&s, &adj.l_hat, &dist, AllocationMethod::Ml, RepairMode::Strict).unwrap();
        assert_eq!(frames, d);
        assert!(!repaired);
    }

    proptest! {
        #[test]
        fn adjusted_lengths_preserve_total(
            lens in prop::collection::vec(30usize..200, 1..20),
            lags in prop::collection::vec(-14i32..15, 20),
        ) {
            let mut g: Vec<f64> = lags[..lens.len()].iter().map(|&v| v as f64).collect();
            g[0] = 0.0;
            let a = adjust_note_lengths(&lens, &g, RepairMode::Strict).unwrap();
            prop_assert_eq!(a.l_hat.iter().sum::<usize>(), lens.iter().sum::<usize>());
        }

        #[test]
        fn allocation_sums_are_exact(
            l_hat in 5usize..400,
            mu in prop::collection::vec(1.0f64..60.0, 1..6),
            var in prop::collection::vec(0.1f64..50.0, 6),
        ) {
            prop_assume!(l_hat >= mu.len());
            let u = allocate_uniform(l_hat, &mu).unwrap();
            prop_assert_eq!(u.frames.iter().sum::<usize>(), l_hat);
            prop_assert!(u.frames.iter().all(|&d| d >= 1));
            let m = allocate_ml(l_hat, &mu, &var[..mu.len()], RepairMode::Clamp).unwrap();
            prop_assert_eq!(m.frames.iter().sum::<usize>(), l_hat);
            prop_assert!(m.frames.iter().all(|&d| d >= 1));
            let real_sum: f64 = m.real.iter().sum();
            prop_assert!((real_sum - l_hat as f64).abs() < 1e-9 * l_hat as f64);
        }

        #[test]
        fn deviation_is_proportional_to_variance(
            mu in prop::collection::vec(10.0f64..40.0, 2..5),
            var in prop::collection::vec(0.5f64..20.0, 5),
            extra in 1.0f64..30.0,
        ) {
            let var = &var[..mu.len()];
            let l_hat = (mu.iter().sum::<f64>() + extra).round() as usize;
            let a = allocate_ml(l_hat, &mu, var, RepairMode::Strict).unwrap();
            let rho = (a.real[0] - mu[0]) / var[0];
            for k in 1..mu.len() {
                prop_assert!(((a.real[k] - mu[k]) / var[k] - rho).abs() < 1e-9);
            }
        }

        #[test]
        fn ml_matches_lattice_search(
            mu in prop::collection::vec(5.0f64..30.0, 2..5),
            var in prop::collection::vec(0.5f64..20.0, 4),
            extra in -3.0f64..25.0,
        ) {
            let var = &var[..mu.len()];
            let l_hat = (mu.iter().sum::<f64>() + extra).round().max(mu.len() as f64) as usize;
            let a = allocate_ml(l_hat, &mu, var, RepairMode::Strict).unwrap();
            let grid = lattice_optimum(l_hat as f64, &mu, var);
            let gap = log_lik(&a.real, &mu, var) - log_lik(&grid, &mu, var);
            prop_assert!(gap >= -1e-9, "lattice beat the closed form by {}", -gap);
            prop_assert!(gap <= 0.01, "gap {}", gap);
        }

        #[test]
        fn equal_variances_give_equal_shares(
            mu in prop::collection::vec(10.0f64..40.0, 2..5),
            v in 0.5f64..20.0,
            l_hat in 60usize..200,
        ) {
            let a = allocate_ml(l_hat, &mu, &vec![v; mu.len()], RepairMode::Strict).unwrap();
            let share = (l_hat as f64 - mu.iter().sum::<f64>()) / mu.len() as f64;
            for k in 0..mu.len() {
                prop_assert!((a.real[k] - mu[k] - share).abs() < 1e-9);
            }
        }
    }
}
