use rayon::prelude::*;

use super::{Predict, ShapValues};
use crate::error::{Error, Result};

pub const MAX_EXACT_FEATURES: usize = 12;

/// Shapley values by direct summation over all subsets:
/// `φ_j = Σ_{S ⊆ N∖{j}} |S|!(m−|S|−1)!/m! · (v(S∪{j}) − v(S))`.
pub fn exact_shapley(predict: &Predict<'_>, instance: &[f64], background: &[Vec<f64>]) -> Result<ShapValues> {
    let m = instance.len();
    if m == 0 || background.is_empty() {
        return Err(Error::invalid("exact Shapley needs at least one feature and one background row"));
    }
    if m > MAX_EXACT_FEATURES {
        return Err(Error::TooManyFeatures {
            max: MAX_EXACT_FEATURES,
            got: m,
        });
    }
    let value = |mask: u32| -> f64 {
        let mut total = 0.0;
        let mut row = vec![0.0; m];
        for b in background {
            for j in 0..m {
                row[j] = if mask & (1 << j) != 0 { instance[j] } else { b[j] };
            }
            total += predict(&row);
        }
        total / background.len() as f64
    };
    let full = (1u32 << m) - 1;
    let v: Vec<f64> = (0..=full).into_par_iter().map(value).collect();

    let mut fact = vec![1.0f64; m + 1];
    for k in 1..=m {
        fact[k] = fact[k - 1] * k as f64;
    }
    let mut phi = vec![0.0; m];
    for (j, phi_j) in phi.iter_mut().enumerate() {
        let bit = 1u32 << j;
        for s in 0..=full {
            if s & bit != 0 {
                continue;
            }
            let size = s.count_ones() as usize;
            let w = fact[size] * fact[m - size - 1] / fact[m];
            *phi_j += w * (v[(s | bit) as usize] - v[s as usize]);
        }
    }
    Ok(ShapValues {
        phi,
        base_value: v[0],
        prediction: predict(instance),
        exact: true,
        degenerate: v.iter().all(|&x| x == v[0]),
        n_coalitions: (1usize << m) - 2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_player_gets_everything() {
        let f = |x: &[f64]| 0.1 + 0.3 * x[0];
        let bg = vec![vec![0.0], vec![1.0]];
        let s = exact_shapley(&f, &[2.0], &bg).unwrap();
        assert!((s.phi[0] - (f(&[2.0]) - s.base_value)).abs() < 1e-15);
    }

    #[test]
    fn symmetric_features_share_equally() {
        let f = |x: &[f64]| x[0] + x[1];
        let bg = vec![vec![0.0, 0.0], vec![1.0, 1.0]];
        let s = exact_shapley(&f, &[3.0, 3.0], &bg).unwrap();
        assert_eq!(s.phi[0], s.phi[1]);
    }

    #[test]
    fn rejects_too_many_features() {
        let f = |_: &[f64]| 0.0;
        let x = vec![0.0; 13];
        assert!(matches!(
            exact_shapley(&f, &x, std::slice::from_ref(&x)),
            Err(Error::TooManyFeatures { .. })
        ));
    }
}
