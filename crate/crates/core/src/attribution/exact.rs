use crate::error::{Error, Result};

/// Largest player count `exact_shapley` will enumerate (2^20 coalitions).
pub const MAX_EXACT_FEATURES: usize = 20;

/// A subset of at most 20 players, stored as a bitmask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Coalition {
    mask: u32,
    num_features: usize,
}

impl Coalition {
    pub fn empty(num_features: usize) -> Self {
        Self {
            mask: 0,
            num_features,
        }
    }

    pub fn full(num_features: usize) -> Self {
        Self {
            mask: if num_features == 0 {
                0
            } else {
                u32::MAX >> (32 - num_features)
            },
            num_features,
        }
    }

    pub fn contains(&self, feature: usize) -> bool {
        feature < self.num_features && self.mask & (1 << feature) != 0
    }

    pub fn with(self, feature: usize) -> Self {
        Self {
            mask: self.mask | (1 << feature),
            ..self
        }
    }

    pub fn len(&self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.mask == 0
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_features).filter(|&p| self.contains(p))
    }
}

/// Exact Shapley values by enumerating all `2^F` coalitions.
///
/// `phi_p = sum_{S not containing p} |S|! (F - |S| - 1)! / F! * (v(S + p) - v(S))`
pub fn exact_shapley(num_features: usize, mut value: impl FnMut(Coalition) -> f64) -> Result<Vec<f64>> {
    if num_features > MAX_EXACT_FEATURES {
        return Err(Error::TooManyFeatures(num_features));
    }
    if num_features == 0 {
        return Ok(Vec::new());
    }
    let n = num_features;
    let values: Vec<f64> = (0..1u32 << n)
        .map(|mask| {
            value(Coalition {
                mask,
                num_features: n,
            })
        })
        .collect();

    // weight[s] = 1 / (F * C(F - 1, s))
    let mut weight = vec![0.0; n];
    let mut binom = 1.0f64;
    for (s, w) in weight.iter_mut().enumerate() {
        *w = 1.0 / (n as f64 * binom);
        binom = binom * (n - 1 - s) as f64 / (s + 1) as f64;
    }

    let mut phi = vec![0.0; n];
    for (p, out) in phi.iter_mut().enumerate() {
        let bit = 1u32 << p;
        *out = (0..1u32 << n)
            .filter(|mask| mask & bit == 0)
            .map(|mask| weight[mask.count_ones() as usize] * (values[(mask | bit) as usize] - values[mask as usize]))
            .sum();
    }
    Ok(phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn product_game() {
        let phi = exact_shapley(2, |s| if s.len() == 2 { 1.0 } else { 0.0 }).unwrap();
        assert_eq!(phi, vec![0.5, 0.5]);
    }

    #[test]
    fn glove_game() {
        // Player 0 holds a left glove, players 1 and 2 right gloves.
        let phi = exact_shapley(3, |s| {
            if s.contains(0) && (s.contains(1) || s.contains(2)) {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        let want = [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0];
        for (a, b) in phi.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn too_many_features() {
        assert!(matches!(
            exact_shapley(21, |_| 0.0).unwrap_err(),
            Error::TooManyFeatures(21)
        ));
    }

    #[test]
    fn coalition_helpers() {
        let full = Coalition::full(5);
        assert_eq!(full.len(), 5);
        assert_eq!(full.members().collect::<Vec<_>>(), vec![0, 1, 2, 3, 4]);
        let s = Coalition::empty(5).with(1).with(3);
        assert!(s.contains(3) && !s.contains(2) && !s.contains(9));
        assert_eq!(Coalition::full(20).len(), 20);
    }

    proptest! {
        #[test]
        fn axioms_on_random_games(
            n in 1usize..9,
            table in prop::collection::vec(-10.0f64..10.0, 256),
            dummy in 0usize..8,
        ) {
            let dummy = dummy % n;
            // v ignores the dummy player entirely.
            let v = |s: Coalition| {
                let mask: usize = s.members().filter(|&p| p != dummy).map(|p| 1 << p).sum();
                table[mask]
            };
            let phi = exact_shapley(n, v).unwrap();
            let total: f64 = phi.iter().sum();
            let want = v(Coalition::full(n)) - v(Coalition::empty(n));
            prop_assert!((total - want).abs() < 1e-12);
            prop_assert!(phi[dummy].abs() < 1e-12);
        }
    }
}
