//! Kernel SHAP: Shapley values as the solution of a weighted linear
//! regression over feature coalitions.
//!
//! Each proper coalition `z` (neither empty nor full) contributes a
//! regression row `y(z) = v(z) − base ≈ Σ φ_j z_j` weighted by the Shapley
//! kernel `(m−1) / (C(m,|z|) · |z| · (m−|z|))`. The efficiency constraint
//! `Σφ = f(x) − base` is imposed exactly by eliminating the last coefficient.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::Rng as _;

use super::{CoalitionBudget, Predict, ShapValues};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

type Mask = Vec<bool>;

/// `min(2^m − 2, 2m + 2048)`.
pub fn default_budget(m: usize) -> usize {
    let cap = 2 * m + 2048;
    total_coalitions(m).map_or(cap, |t| t.min(cap))
}

fn total_coalitions(m: usize) -> Option<usize> {
    if m >= usize::BITS as usize - 1 {
        None
    } else {
        Some((1usize << m) - 2)
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Shapley kernel weight of one coalition of size `s` among `m` features.
pub fn shapley_kernel_weight(m: usize, s: usize) -> f64 {
    (m - 1) as f64 / (binomial(m, s) * s as f64 * (m - s) as f64)
}

/// Total kernel mass of all coalitions of size `s`.
fn size_mass(m: usize, s: usize) -> f64 {
    (m - 1) as f64 / (s as f64 * (m - s) as f64)
}

pub fn kernel_shap(
    predict: &Predict<'_>,
    instance: &[f64],
    background: &[Vec<f64>],
    budget: CoalitionBudget,
    seed: u64,
) -> Result<ShapValues> {
    let m = instance.len();
    if m == 0 {
        return Err(Error::invalid("kernel SHAP needs at least one feature"));
    }
    if background.is_empty() {
        return Err(Error::invalid("kernel SHAP needs a nonempty background set"));
    }
    if let Some(bad) = background.iter().find(|b| b.len() != m) {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: bad.len(),
        });
    }
    let requested = match budget {
        CoalitionBudget::Auto(n) | CoalitionBudget::Sampled(n) => n,
    };
    if requested < 2 && m > 1 {
        return Err(Error::invalid("kernel SHAP needs at least 2 coalitions"));
    }

    let prediction = predict(instance);
    let base_value = background.iter().map(|b| predict(b)).sum::<f64>() / background.len() as f64;
    let delta = prediction - base_value;

    if m == 1 {
        return Ok(ShapValues {
            phi: vec![delta],
            base_value,
            prediction,
            exact: true,
            degenerate: delta == 0.0,
            n_coalitions: 0,
        });
    }

    let mut rng = rng::seeded(seed);
    let (coalitions, exact) = match budget {
        CoalitionBudget::Auto(n) if total_coalitions(m).is_some_and(|t| n >= t) => (enumerate_all(m), true),
        CoalitionBudget::Auto(n) => (hybrid_sample(m, n, &mut rng), false),
        CoalitionBudget::Sampled(n) => (iid_sample(m, n, &mut rng), false),
    };

    // sequential: callers parallelize across (model, instance) pairs while
    // holding per-key cache locks, so no nested pool work may happen here
    let values: Vec<f64> = coalitions
        .iter()
        .map(|(mask, _)| coalition_value(predict, instance, background, mask))
        .collect();

    let n_coalitions = coalitions.len();
    if values.iter().all(|&v| v == base_value) && prediction == base_value {
        return Ok(ShapValues {
            phi: vec![0.0; m],
            base_value,
            prediction,
            exact,
            degenerate: true,
            n_coalitions,
        });
    }

    // eliminate φ_last = Δ − Σ_{j<last} φ_j
    let k = m - 1;
    let mut a = vec![vec![0.0; k]; k];
    let mut b = vec![0.0; k];
    let mut x = vec![0.0; k];
    for ((mask, w), v) in coalitions.iter().zip(&values) {
        let z_last = if mask[k] { 1.0 } else { 0.0 };
        for j in 0..k {
            x[j] = (if mask[j] { 1.0 } else { 0.0 }) - z_last;
        }
        let t = (v - base_value) - z_last * delta;
        for r in 0..k {
            if x[r] == 0.0 {
                continue;
            }
            b[r] += w * x[r] * t;
            for c in 0..k {
                a[r][c] += w * x[r] * x[c];
            }
        }
    }
    let head = solve(a.clone(), b.clone()).unwrap_or_else(|| ridge_solve(a, b));
    let mut phi = head;
    phi.push(delta - phi.iter().sum::<f64>());
    Ok(ShapValues {
        phi,
        base_value,
        prediction,
        exact,
        degenerate: false,
        n_coalitions,
    })
}

fn coalition_value(predict: &Predict<'_>, instance: &[f64], background: &[Vec<f64>], mask: &[bool]) -> f64 {
    let mut row = vec![0.0; instance.len()];
    let mut total = 0.0;
    for bg in background {
        for (j, slot) in row.iter_mut().enumerate() {
            *slot = if mask[j] { instance[j] } else { bg[j] };
        }
        total += predict(&row);
    }
    total / background.len() as f64
}

fn enumerate_all(m: usize) -> Vec<(Mask, f64)> {
    let full: u64 = (1u64 << m) - 1;
    (1..full)
        .map(|bits| {
            let mask: Mask = (0..m).map(|j| bits & (1 << j) != 0).collect();
            let s = bits.count_ones() as usize;
            (mask, shapley_kernel_weight(m, s))
        })
        .collect()
}

fn subset_masks(m: usize, s: usize) -> Vec<Mask> {
    fn rec(m: usize, s: usize, start: usize, cur: &mut Mask, out: &mut Vec<Mask>) {
        let chosen = cur.iter().filter(|&&b| b).count();
        if chosen == s {
            out.push(cur.clone());
            return;
        }
        for j in start..m {
            if m - j < s - chosen {
                break;
            }
            cur[j] = true;
            rec(m, s, j + 1, cur, out);
            cur[j] = false;
        }
    }
    let mut out = Vec::new();
    rec(m, s, 0, &mut vec![false; m], &mut out);
    out
}

fn random_mask(m: usize, s: usize, rng: &mut Rng) -> Mask {
    let mut mask = vec![false; m];
    for j in index::sample(rng, m, s) {
        mask[j] = true;
    }
    mask
}

fn complement(mask: &[bool]) -> Mask {
    mask.iter().map(|b| !b).collect()
}

fn draw_size(probs: &[(usize, f64)], rng: &mut Rng) -> usize {
    let total: f64 = probs.iter().map(|(_, p)| p).sum();
    let mut u = rng.random::<f64>() * total;
    for &(s, p) in probs {
        if u < p {
            return s;
        }
        u -= p;
    }
    probs.last().expect("nonempty size distribution").0
}

/// `n` i.i.d. coalitions (drawn as complementary pairs) with sizes
/// proportional to their kernel mass; each draw carries unit weight.
fn iid_sample(m: usize, n: usize, rng: &mut Rng) -> Vec<(Mask, f64)> {
    let sizes: Vec<(usize, f64)> = (1..m).map(|s| (s, size_mass(m, s))).collect();
    let mut acc: BTreeMap<Mask, f64> = BTreeMap::new();
    let mut drawn = 0;
    while drawn < n {
        let s = draw_size(&sizes, rng);
        let mask = random_mask(m, s, rng);
        let comp = complement(&mask);
        *acc.entry(mask).or_default() += 1.0;
        drawn += 1;
        if drawn < n {
            *acc.entry(comp).or_default() += 1.0;
            drawn += 1;
        }
    }
    acc.into_iter().collect()
}

/// Enumerates whole coalition sizes, smallest (and their complements) first,
/// while the remaining budget covers them; samples the remaining sizes and
/// rescales the sampled weights to the kernel mass they stand for.
fn hybrid_sample(m: usize, n: usize, rng: &mut Rng) -> Vec<(Mask, f64)> {
    let n_sizes = m / 2; // sizes 1..=m/2, each paired with m − s
    let mass = |s: usize| {
        if s == m - s {
            size_mass(m, s)
        } else {
            2.0 * size_mass(m, s)
        }
    };
    let count = |s: usize| {
        if s == m - s {
            binomial(m, s)
        } else {
            2.0 * binomial(m, s)
        }
    };
    let mut mass_left: f64 = (1..=n_sizes).map(mass).sum();

    let mut out: Vec<(Mask, f64)> = Vec::new();
    let mut left = n as f64;
    let mut next = 1;
    while next <= n_sizes {
        let share = mass(next) / mass_left;
        if left * share / count(next) < 1.0 - 1e-8 {
            break;
        }
        let w = shapley_kernel_weight(m, next);
        for mask in subset_masks(m, next) {
            if next != m - next {
                out.push((complement(&mask), w));
            }
            out.push((mask, w));
        }
        left -= count(next);
        mass_left -= mass(next);
        next += 1;
    }

    let remaining: Vec<(usize, f64)> = (next..=n_sizes).map(|s| (s, mass(s))).collect();
    if !remaining.is_empty() && left >= 1.0 {
        let mut acc: BTreeMap<Mask, f64> = BTreeMap::new();
        let mut budget = left as usize;
        let mut drawn_weight = 0.0;
        while budget > 0 {
            let s = draw_size(&remaining, rng);
            let mask = random_mask(m, s, rng);
            if s != m - s && budget >= 2 {
                *acc.entry(complement(&mask)).or_default() += 1.0;
                budget -= 1;
                drawn_weight += 1.0;
            }
            *acc.entry(mask).or_default() += 1.0;
            budget -= 1;
            drawn_weight += 1.0;
        }
        // sampled draws stand in for the kernel mass of the sizes not enumerated
        let scale = mass_left / drawn_weight;
        out.extend(acc.into_iter().map(|(mask, c)| (mask, c * scale)));
    }
    out
}

/// Gaussian elimination with partial pivoting. `None` if singular.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a
        .iter()
        .enumerate()
        .map(|(i, r)| r[i].abs())
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() <= 1e-12 * scale {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Small ridge fallback for rank-deficient sampled designs.
fn ridge_solve(mut a: Vec<Vec<f64>>, b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    let trace: f64 = (0..n).map(|i| a[i][i]).sum();
    let lambda = 1e-8 * (trace / n as f64).max(1e-12);
    for (i, row) in a.iter_mut().enumerate() {
        row[i] += lambda;
    }
    solve(a, b).unwrap_or_else(|| vec![0.0; n])
}
