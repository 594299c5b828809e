use rayon::prelude::*;

use super::Solution;
use crate::error::{Error, Result};
use crate::problem::{Evaluation, Genome, Problem};

/// Refuse problems with more assignments than this.
pub const DEFAULT_EVALUATION_CAP: f64 = 1e7;

const CHUNK: u64 = 2048;

struct Radix {
    digits: Vec<u32>,
}

impl Radix {
    fn of(p: &Problem) -> Self {
        let mut digits: Vec<u32> = (0..p.tasks().len()).map(|t| p.candidates(t).len() as u32).collect();
        digits.extend(std::iter::repeat_n(p.controls().len() as u32, p.free_nodes().len()));
        Radix { digits }
    }

    /// Genome at lexicographic position `index` (first service gene most significant).
    fn decode(&self, mut index: u64, services: usize) -> Genome {
        let mut genes = vec![0u32; self.digits.len()];
        for (g, &d) in genes.iter_mut().zip(&self.digits).rev() {
            *g = (index % d as u64) as u32;
            index /= d as u64;
        }
        let controls = genes.split_off(services);
        Genome { services: genes, controls }
    }

    fn increment(&self, g: &mut Genome) {
        let services = g.services.len();
        for i in (0..self.digits.len()).rev() {
            let gene = if i < services { &mut g.services[i] } else { &mut g.controls[i - services] };
            *gene += 1;
            if *gene < self.digits[i] {
                return;
            }
            *gene = 0;
        }
    }
}

/// Calls `f` on every assignment in lexicographic order.
pub fn enumerate(p: &Problem, mut f: impl FnMut(&Genome, &Evaluation)) -> Result<()> {
    let radix = Radix::of(p);
    let total = p.search_space_size() as u64;
    let mut g = radix.decode(0, p.tasks().len());
    for _ in 0..total {
        f(&g, &p.evaluate(&g)?);
        radix.increment(&mut g);
    }
    Ok(())
}

/// Exhaustive search. Returns the utility-maximal assignment, the
/// lexicographically first one on ties.
pub fn brute_force(p: &Problem, cap: f64) -> Result<Solution> {
    let size = p.search_space_size();
    if size > cap {
        return Err(Error::SearchSpaceTooLarge { size, cap });
    }
    let total = size as u64;
    let radix = Radix::of(p);
    let services = p.tasks().len();
    let chunks = total.div_ceil(CHUNK);

    let best = (0..chunks)
        .into_par_iter()
        .map(|c| -> Result<Option<(u64, Genome, Evaluation)>> {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(total);
            let mut g = radix.decode(lo, services);
            let mut best: Option<(u64, Genome, Evaluation)> = None;
            for i in lo..hi {
                let e = p.evaluate(&g)?;
                if best.as_ref().is_none_or(|(_, _, b)| e.utility > b.utility) {
                    best = Some((i, g.clone(), e));
                }
                radix.increment(&mut g);
            }
            Ok(best)
        })
        .try_reduce(
            || None,
            |a, b| {
                Ok(match (a, b) {
                    (None, x) | (x, None) => x,
                    (Some(a), Some(b)) => {
                        let a_wins = a.2.utility > b.2.utility || (a.2.utility == b.2.utility && a.0 < b.0);
                        Some(if a_wins { a } else { b })
                    }
                })
            },
        )?;
    let (_, genome, evaluation) = best.ok_or_else(|| Error::Config("empty search space".into()))?;
    Ok(Solution::new(p, genome, evaluation, total))
}
