use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::sim::Task;

/// Training share of a stratum of `n` tasks: ⌈fraction·n⌉, leaving at least
/// one task for testing when the stratum has two or more.
pub fn train_count(n: usize, fraction: f64) -> usize {
    // the epsilon keeps 0.07·100 = 7.000000000000001 from rounding up to 8
    let k = ((fraction * n as f64) - 1e-9).ceil().max(0.0) as usize;
    if n >= 2 {
        k.clamp(1, n - 1)
    } else {
        k.min(n)
    }
}

/// Stratified split within each (site, task type); a seeded shuffle decides
/// which tasks of a stratum train. Both halves come back sorted by task id.
pub fn split_tasks(tasks: &[Task], fraction: f64, seed: u64) -> Result<(Vec<Task>, Vec<Task>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Precondition(format!("train fraction must be in (0,1), got {fraction}")));
    }
    let mut strata: BTreeMap<(&str, &str), Vec<&Task>> = BTreeMap::new();
    for t in tasks {
        strata.entry((&t.site_id, &t.task_type)).or_default().push(t);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (_, mut group) in strata {
        group.sort_by(|a, b| a.task_id.cmp(&b.task_id));
        group.shuffle(&mut rng);
        let k = train_count(group.len(), fraction);
        train.extend(group[..k].iter().map(|t| (*t).clone()));
        test.extend(group[k..].iter().map(|t| (*t).clone()));
    }
    train.sort_by(|a, b| a.task_id.cmp(&b.task_id));
    test.sort_by(|a, b| a.task_id.cmp(&b.task_id));
    Ok((train, test))
}
