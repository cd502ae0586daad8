//! Small shared helpers: tie-broken argmax and seed mixing.

/// Tolerance used when comparing exactly-computed action values for ties.
pub const TIE_TOL: f64 = 1e-9;

/// Index of the maximal value; values within `tol` of the maximum are treated
/// as tied and the lowest index wins.
pub fn argmax_tol(values: &[f64], tol: f64) -> usize {
    let mx = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    values
        .iter()
        .position(|&v| v >= mx - tol)
        .expect("argmax of empty slice")
}

/// All indices within `tol` of the maximum.
pub fn argmax_set_tol(values: &[f64], tol: f64) -> Vec<usize> {
    let mx = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v >= mx - tol)
        .map(|(i, _)| i)
        .collect()
}

/// SplitMix64 step; used to derive independent stream seeds from a base seed.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Deterministically mixes several components into one seed.
pub fn mix_seed(parts: &[u64]) -> u64 {
    let mut acc = 0x51_7c_c1_b7_27_22_0a_95;
    for &p in parts {
        acc = splitmix64(acc ^ p);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax_tol(&[1.0, 3.0, 3.0 - 1e-12, 2.0], TIE_TOL), 1);
        assert_eq!(argmax_tol(&[3.0 - 1e-12, 3.0, 2.0], TIE_TOL), 0);
        assert_eq!(argmax_set_tol(&[1.0, 3.0, 3.0, 2.0], TIE_TOL), vec![1, 2]);
    }

    #[test]
    fn mix_seed_is_stable() {
        assert_eq!(mix_seed(&[1, 2]), mix_seed(&[1, 2]));
        assert_ne!(mix_seed(&[1, 2]), mix_seed(&[2, 1]));
    }
}
