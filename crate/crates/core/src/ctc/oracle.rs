//! Exhaustive path enumeration. Exponential in T; only for small grids.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

use super::{collapse, LabelSeq, PosteriorGrid};

/// Largest `|Y'|^T` the enumerators accept.
pub const ENUMERATION_BUDGET: u64 = 10_000_000;

fn path_count(grid: &PosteriorGrid) -> Result<u64> {
    let classes = grid.classes() as u64;
    let mut n: u64 = 1;
    for _ in 0..grid.frames() {
        n = n.saturating_mul(classes);
        if n > ENUMERATION_BUDGET {
            return Err(Error::Usage(format!(
                "enumerating {}^{} paths exceeds the budget of {ENUMERATION_BUDGET}",
                grid.classes(),
                grid.frames()
            )));
        }
    }
    Ok(n)
}

/// Calls `visit(path, probability)` for every frame-label path.
fn for_each_path(grid: &PosteriorGrid, mut visit: impl FnMut(&[usize], f64)) -> Result<()> {
    let total = path_count(grid)?;
    let (frames, classes) = (grid.frames(), grid.classes());
    let mut path = vec![0usize; frames];
    for code in 0..total {
        let mut rest = code;
        let mut p = 1.0;
        for t in (0..frames).rev() {
            path[t] = (rest % classes as u64) as usize;
            rest /= classes as u64;
            p *= grid.row(t)[path[t]];
        }
        visit(&path, p);
    }
    Ok(())
}

/// `ln Σ_{π : B(π) = target} Π_t p(π_t)`, or −∞ when no path collapses to
/// the target.
pub fn brute_force_log_prob(grid: &PosteriorGrid, target: &LabelSeq) -> Result<f64> {
    let blank = grid.blank();
    let mut total = 0.0;
    for_each_path(grid, |path, p| {
        if collapse(path, blank) == target.labels() {
            total += p;
        }
    })?;
    Ok(total.ln())
}

/// Probability mass of every collapsed sequence reachable from the grid.
pub fn collapsed_distribution(grid: &PosteriorGrid) -> Result<BTreeMap<Vec<usize>, f64>> {
    let blank = grid.blank();
    let mut dist = BTreeMap::new();
    for_each_path(grid, |path, p| {
        *dist.entry(collapse(path, blank)).or_insert(0.0) += p;
    })?;
    Ok(dist)
}
