use rand::seq::SliceRandom;
use rand::Rng;

use crate::buffer::SharedBuffer;
use crate::collectives::ExchangeSpec;
use crate::patterns::SparseMatrix;

/// Shape of randomized exchanges used for oracle comparisons.
#[derive(Debug, Clone, Copy)]
pub struct RandomExchange {
    /// Largest per-pair count, in elements.
    pub max_count: usize,
    /// Probability that a pair exchanges nothing.
    pub zero_prob: f64,
    /// Probability that a rank sends nothing at all.
    pub empty_rank_prob: f64,
    /// Probability that a rank's self-transfer is inflated.
    pub self_heavy_prob: f64,
}

impl Default for RandomExchange {
    fn default() -> Self {
        RandomExchange {
            max_count: 24,
            zero_prob: 0.3,
            empty_rank_prob: 0.15,
            self_heavy_prob: 0.25,
        }
    }
}

const ELEM_SIZES: [usize; 4] = [1, 2, 4, 8];

/// A consistent set of per-rank specs with random counts, a random element
/// size, permuted region order on both sides, gaps between send regions,
/// and random send contents. Receive regions stay packed so the exposed
/// window covers them.
pub fn random_exchange<R: Rng>(ranks: usize, shape: &RandomExchange, rng: &mut R) -> Vec<ExchangeSpec> {
    let es = *ELEM_SIZES.choose(rng).expect("non-empty");
    let mut counts = vec![vec![0usize; ranks]; ranks];
    for (r, row) in counts.iter_mut().enumerate() {
        if rng.gen_bool(shape.empty_rank_prob) {
            continue;
        }
        for (p, c) in row.iter_mut().enumerate() {
            if !rng.gen_bool(shape.zero_prob) {
                *c = rng.gen_range(1..=shape.max_count);
            }
            if p == r && rng.gen_bool(shape.self_heavy_prob) {
                *c = (*c).max(1) * 8;
            }
        }
    }

    (0..ranks)
        .map(|r| {
            let sendcounts = counts[r].clone();
            let recvcounts: Vec<usize> = counts.iter().map(|row| row[r]).collect();

            let mut order: Vec<usize> = (0..ranks).collect();
            order.shuffle(rng);
            let mut sdispls = vec![0; ranks];
            let mut at = 0;
            for &p in &order {
                at += rng.gen_range(0..=2);
                sdispls[p] = at;
                at += sendcounts[p];
            }
            let send_len = at + rng.gen_range(0..=2);

            order.shuffle(rng);
            let mut rdispls = vec![0; ranks];
            let mut at = 0;
            for &p in &order {
                rdispls[p] = at;
                at += recvcounts[p];
            }

            let mut send = vec![0u8; send_len * es];
            rng.fill(send.as_mut_slice());
            ExchangeSpec {
                sendcounts,
                sdispls,
                recvcounts,
                rdispls,
                elem_size: es,
                send: SharedBuffer::from_vec(send),
                recv: SharedBuffer::zeroed(at * es),
            }
        })
        .collect()
}

/// An `n`x`n` matrix where each entry is present with probability `density`.
pub fn random_sparse_matrix<R: Rng>(n: usize, density: f64, rng: &mut R) -> SparseMatrix {
    let coords: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|_| rng.gen_bool(density))
        .collect();
    SparseMatrix::new(n, n, coords).expect("coordinates in range")
}
