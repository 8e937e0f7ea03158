use rand::seq::SliceRandom;

use super::Dataset;
use crate::error::{Error, Result};
use crate::seed;

/// Per-class test counts by largest-remainder rounding so they sum to
/// `round(n * fraction)`. Remainder ties go to the smaller class label.
fn class_quotas(counts: [usize; 2], fraction: f64) -> [usize; 2] {
    let n: usize = counts.iter().sum();
    let total = (n as f64 * fraction).round() as usize;
    let exact = counts.map(|c| c as f64 * fraction);
    let mut quotas = exact.map(|q| q.floor() as usize);
    let assigned: usize = quotas.iter().sum();
    let mut order = [0usize, 1];
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &c in order.iter().take(total.saturating_sub(assigned)) {
        quotas[c] += 1;
    }
    quotas
}

/// Stratified train/test index split. Both index lists are sorted ascending.
pub fn stratified_split_indices(
    labels: &[u8],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Split(format!(
            "test fraction {test_fraction} not in (0, 1)"
        )));
    }
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &y) in labels.iter().enumerate() {
        by_class[usize::from(y)].push(i);
    }
    let quotas = class_quotas([by_class[0].len(), by_class[1].len()], test_fraction);
    let mut rng = seed::rng(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (class, members) in by_class.iter_mut().enumerate() {
        let q = quotas[class];
        if members.len() < 2 || q == 0 || q == members.len() {
            return Err(Error::Split(format!(
                "class {class} has {} instances; cannot place {q} in test and keep both sides nonempty",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        test.extend_from_slice(&members[..q]);
        train.extend_from_slice(&members[q..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Stratified split of a dataset by target label.
pub fn stratified_split(
    data: &Dataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    let (train, test) = stratified_split_indices(&data.labels, test_fraction, seed)?;
    Ok((data.subset(&train), data.subset(&test)))
}
