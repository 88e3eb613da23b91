use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::numcore::logsumexp;

use super::{argmax, collapse, LabelSeq, PosteriorGrid};

pub const DEFAULT_BEAM_WIDTH: usize = 8;
pub const DEFAULT_NBEST: usize = 5;

/// Collapse of the per-frame argmax path.
pub fn greedy_decode(grid: &PosteriorGrid) -> LabelSeq {
    let path: Vec<usize> = (0..grid.frames()).map(|t| argmax(grid.row(t))).collect();
    let labels = collapse(&path, grid.blank());
    LabelSeq::new(labels, grid.alphabet_size()).expect("collapsed labels are in range")
}

#[derive(Clone, Copy)]
struct PrefixScore {
    /// log p(prefix, path ends in blank)
    blank: f64,
    /// log p(prefix, path ends in its last label)
    label: f64,
}

impl PrefixScore {
    const EMPTY: PrefixScore = PrefixScore {
        blank: f64::NEG_INFINITY,
        label: f64::NEG_INFINITY,
    };

    fn total(&self) -> f64 {
        logsumexp(&[self.blank, self.label])
    }
}

fn log_add(acc: &mut f64, v: f64) {
    *acc = logsumexp(&[*acc, v]);
}

/// Higher score first; on equal score the shorter, then lexicographically
/// smaller, sequence wins.
fn rank(a: &(Vec<usize>, f64), b: &(Vec<usize>, f64)) -> Ordering {
    b.1.partial_cmp(&a.1)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.0.len().cmp(&b.0.len()))
        .then_with(|| a.0.cmp(&b.0))
}

/// Prefix beam search over collapsed label sequences, without a language
/// model. Returns up to `n` hypotheses with their log-probabilities, best
/// first. With an unbounded beam the scores are exact sequence
/// log-probabilities.
pub fn beam_nbest(grid: &PosteriorGrid, beam_width: usize, n: usize) -> Vec<(LabelSeq, f64)> {
    let beam_width = beam_width.max(n).max(1);
    let blank = grid.blank();
    let mut beams: BTreeMap<Vec<usize>, PrefixScore> = BTreeMap::new();
    beams.insert(
        Vec::new(),
        PrefixScore {
            blank: 0.0,
            label: f64::NEG_INFINITY,
        },
    );
    for t in 0..grid.frames() {
        let lp: Vec<f64> = grid.row(t).iter().map(|p| p.ln()).collect();
        let mut next: BTreeMap<Vec<usize>, PrefixScore> = BTreeMap::new();
        for (prefix, score) in &beams {
            let total = score.total();
            let entry = next.entry(prefix.clone()).or_insert(PrefixScore::EMPTY);
            log_add(&mut entry.blank, total + lp[blank]);
            let last = prefix.last().copied();
            for (c, &lpc) in lp.iter().enumerate() {
                if c == blank || lpc == f64::NEG_INFINITY {
                    continue;
                }
                let mut extended = prefix.clone();
                extended.push(c);
                if Some(c) == last {
                    // a repeat needs a blank in between to extend the prefix
                    let ext = next.entry(extended).or_insert(PrefixScore::EMPTY);
                    log_add(&mut ext.label, score.blank + lpc);
                    let same = next.get_mut(prefix).expect("inserted above");
                    log_add(&mut same.label, score.label + lpc);
                } else {
                    let ext = next.entry(extended).or_insert(PrefixScore::EMPTY);
                    log_add(&mut ext.label, total + lpc);
                }
            }
        }
        let mut ranked: Vec<(Vec<usize>, f64)> =
            next.iter().map(|(p, s)| (p.clone(), s.total())).collect();
        ranked.sort_by(rank);
        ranked.truncate(beam_width);
        beams = ranked
            .into_iter()
            .map(|(p, _)| {
                let s = next[&p];
                (p, s)
            })
            .collect();
    }
    let mut ranked: Vec<(Vec<usize>, f64)> =
        beams.iter().map(|(p, s)| (p.clone(), s.total())).collect();
    ranked.sort_by(rank);
    ranked
        .into_iter()
        .take(n)
        .map(|(p, s)| {
            let seq = LabelSeq::new(p, grid.alphabet_size()).expect("beam labels in range");
            (seq, s)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctc::collapsed_distribution;
    use crate::numcore::{DenseArray, Rng};

    fn spiky(path: &[usize], classes: usize) -> PosteriorGrid {
        let rows: Vec<Vec<f64>> = path
            .iter()
            .map(|&k| {
                let mut r = vec![0.01 / (classes - 1) as f64; classes];
                r[k] = 0.99;
                r
            })
            .collect();
        PosteriorGrid::from_rows(&rows).unwrap()
    }

    fn random_grid(rng: &mut Rng, frames: usize, classes: usize) -> PosteriorGrid {
        PosteriorGrid::from_logits(&DenseArray::randn(&[frames, classes], 1.5, rng)).unwrap()
    }

    #[test]
    fn greedy_on_spikes() {
        // Y = {c, a, t}, blank = 3
        let grid = spiky(&[3, 0, 1, 3, 2], 4);
        assert_eq!(greedy_decode(&grid).labels(), &[0, 1, 2]);
    }

    #[test]
    fn greedy_all_blank() {
        let grid = spiky(&[2, 2, 2], 3);
        assert!(greedy_decode(&grid).is_empty());
    }

    #[test]
    fn greedy_matches_enumerated_argmax_path() {
        let mut rng = Rng::new(17);
        for _ in 0..200 {
            let grid = random_grid(&mut rng, 3, 3);
            // independent oracle: best path by full enumeration
            let mut best = (vec![], f64::NEG_INFINITY);
            for code in 0..27usize {
                let path = [code / 9, (code / 3) % 3, code % 3];
                let p: f64 = (0..3).map(|t| grid.row(t)[path[t]]).product();
                if p > best.1 {
                    best = (path.to_vec(), p);
                }
            }
            assert_eq!(greedy_decode(&grid).labels(), collapse(&best.0, 2).as_slice());
        }
    }

    #[test]
    fn uniform_single_frame_tie_goes_to_empty() {
        let grid = PosteriorGrid::from_rows(&[vec![0.5, 0.5]]).unwrap();
        let best = beam_nbest(&grid, DEFAULT_BEAM_WIDTH, 1);
        assert_eq!(best.len(), 1);
        assert!(best[0].0.is_empty());
        assert!((best[0].1 - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn spiky_top1_equals_greedy() {
        let grid = spiky(&[3, 0, 0, 3, 1, 3, 2, 2], 4);
        let best = beam_nbest(&grid, DEFAULT_BEAM_WIDTH, 1);
        assert_eq!(best[0].0, greedy_decode(&grid));
    }

    #[test]
    fn exhaustive_beam_equals_enumeration_ranking() {
        let mut rng = Rng::new(5);
        for _ in 0..50 {
            let grid = random_grid(&mut rng, 3, 3);
            let dist = collapsed_distribution(&grid).unwrap();
            let mut oracle: Vec<(Vec<usize>, f64)> =
                dist.into_iter().map(|(k, p)| (k, p.ln())).collect();
            oracle.sort_by(rank);
            let beam = beam_nbest(&grid, 27, oracle.len());
            assert_eq!(beam.len(), oracle.len());
            for ((seq, lp), (o_seq, o_lp)) in beam.iter().zip(&oracle) {
                assert!((lp - o_lp).abs() < 1e-10);
                // ordering may differ only between near-equal scores
                if seq.labels() != o_seq.as_slice() {
                    assert!((lp - o_lp).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn output_is_sorted_and_bounded() {
        let mut rng = Rng::new(6);
        let grid = random_grid(&mut rng, 6, 4);
        let nbest = beam_nbest(&grid, 4, 3);
        assert_eq!(nbest.len(), 3);
        assert!(nbest.windows(2).all(|w| w[0].1 >= w[1].1));
    }
}
