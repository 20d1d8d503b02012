//! Gap filling shared by F0 tracks, vibrato parameters, and pitch sequences.

/// Replaces every value whose `known` flag is false by linear interpolation
/// between the nearest known neighbours. Runs touching either end hold the
/// nearest known value. Returns `false` (leaving `values` untouched) when no
/// value is known.
pub fn fill_gaps(values: &mut [f64], known: &[bool]) -> bool {
    assert_eq!(values.len(), known.len());
    let Some(first) = known.iter().position(|&k| k) else {
        return false;
    };
    let last = known.iter().rposition(|&k| k).unwrap_or(first);
    let head = values[first];
    values[..first].fill(head);
    let tail = values[last];
    values[last + 1..].fill(tail);

    let mut prev = first;
    for t in first + 1..=last {
        if !known[t] {
            continue;
        }
        if t > prev + 1 {
            let (a, b) = (values[prev], values[t]);
            let span = (t - prev) as f64;
            for (j, v) in values[prev + 1..t].iter_mut().enumerate() {
                *v = a + (b - a) * ((j + 1) as f64 / span);
            }
        }
        prev = t;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interior_gap_is_linear() {
        let mut v = [100.0, 0.0, 0.0, 400.0];
        assert!(fill_gaps(&mut v, &[true, false, false, true]));
        assert_eq!(v, [100.0, 200.0, 300.0, 400.0]);
    }

    #[test]
    fn edges_hold() {
        let mut v = [9.0, 9.0, 5.0, 9.0, 7.0, 9.0];
        fill_gaps(&mut v, &[false, false, true, false, true, false]);
        assert_eq!(v, [5.0, 5.0, 5.0, 6.0, 7.0, 7.0]);
    }

    #[test]
    fn nothing_known() {
        let mut v = [1.0, 2.0];
        assert!(!fill_gaps(&mut v, &[false, false]));
        assert_eq!(v, [1.0, 2.0]);
    }
}
