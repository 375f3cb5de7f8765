use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MomError, Result};

/// `K` disjoint blocks of exactly `floor(N/K)` indices over `0..N`.
///
/// Indices inside a block are kept in ascending order, which fixes the
/// summation order of every block reduction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    n: usize,
    blocks: Vec<Vec<usize>>,
}

impl Partition {
    /// Draws `sigma ~ Unif(S_n)` and cuts it into `k` consecutive runs of
    /// `floor(n/k)`; the last `n mod k` permuted indices are dropped.
    pub fn random<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<Self> {
        check_sizes(n, k)?;
        let mut sigma: Vec<usize> = (0..n).collect();
        sigma.shuffle(rng);
        Ok(Self::cut(n, k, &sigma))
    }

    /// Blocks of consecutive indices, `{0..m}, {m..2m}, ...`.
    pub fn contiguous(n: usize, k: usize) -> Result<Self> {
        check_sizes(n, k)?;
        let identity: Vec<usize> = (0..n).collect();
        Ok(Self::cut(n, k, &identity))
    }

    pub fn from_blocks(n: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        check_sizes(n, blocks.len())?;
        let m = n / blocks.len();
        let mut seen = vec![false; n];
        let mut blocks = blocks;
        for block in &mut blocks {
            if block.len() != m {
                return Err(MomError::argument(format!(
                    "every block must hold {m} indices, found one with {}",
                    block.len()
                )));
            }
            for &i in block.iter() {
                if i >= n {
                    return Err(MomError::argument(format!("index {i} out of range 0..{n}")));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(MomError::argument(format!(
                        "index {i} appears in two blocks"
                    )));
                }
            }
            block.sort_unstable();
        }
        Ok(Partition { n, blocks })
    }

    fn cut(n: usize, k: usize, order: &[usize]) -> Self {
        let m = n / k;
        let blocks = order[..k * m]
            .chunks_exact(m)
            .map(|c| {
                let mut b = c.to_vec();
                b.sort_unstable();
                b
            })
            .collect();
        Partition { n, blocks }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_size(&self) -> usize {
        self.n / self.blocks.len()
    }

    /// `K * floor(N/K)`.
    pub fn covered(&self) -> usize {
        self.k() * self.block_size()
    }

    pub fn block(&self, k: usize) -> &[usize] {
        &self.blocks[k]
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    /// `block_of()[i]` is the block holding `i`, or `None` for dropped indices.
    pub fn block_of(&self) -> Vec<Option<usize>> {
        let mut owner = vec![None; self.n];
        for (k, block) in self.blocks.iter().enumerate() {
            for &i in block {
                owner[i] = Some(k);
            }
        }
        owner
    }

    pub fn dropped(&self) -> Vec<usize> {
        self.block_of()
            .iter()
            .enumerate()
            .filter_map(|(i, b)| b.is_none().then_some(i))
            .collect()
    }
}

fn check_sizes(n: usize, k: usize) -> Result<()> {
    if k == 0 {
        return Err(MomError::argument("block count K must be at least 1"));
    }
    if k > n {
        return Err(MomError::argument(format!(
            "block count K={k} exceeds sample count N={n}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngSeed;
    use proptest::prelude::*;

    #[test]
    fn ten_into_three_drops_one() {
        let p = Partition::random(10, 3, &mut RngSeed(1).rng()).unwrap();
        assert_eq!(p.k(), 3);
        assert!(p.blocks().iter().all(|b| b.len() == 3));
        assert_eq!(p.dropped().len(), 1);
    }

    #[test]
    fn single_block_holds_everything() {
        let p = Partition::random(6, 1, &mut RngSeed(2).rng()).unwrap();
        assert_eq!(p.block(0), &[0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn too_many_blocks() {
        assert!(matches!(
            Partition::random(3, 4, &mut RngSeed(0).rng()),
            Err(MomError::Argument(_))
        ));
        assert!(Partition::contiguous(3, 0).is_err());
    }

    #[test]
    fn from_blocks_validates() {
        assert!(Partition::from_blocks(4, vec![vec![0, 1], vec![1, 2]]).is_err());
        assert!(Partition::from_blocks(4, vec![vec![0, 1], vec![2]]).is_err());
        assert!(Partition::from_blocks(4, vec![vec![0, 9], vec![2, 3]]).is_err());
        let p = Partition::from_blocks(5, vec![vec![3, 0], vec![2, 4]]).unwrap();
        assert_eq!(p.block(0), &[0, 3]);
        assert_eq!(p.dropped(), vec![1]);
    }

    #[test]
    fn drop_frequency_is_uniform() {
        // 10^4 draws of (10, 3): each index is the dropped one w.p. 1/10.
        let mut rng = RngSeed(99).rng();
        let draws = 10_000;
        let mut dropped = [0usize; 10];
        for _ in 0..draws {
            for i in Partition::random(10, 3, &mut rng).unwrap().dropped() {
                dropped[i] += 1;
            }
        }
        for &c in &dropped {
            let freq = c as f64 / draws as f64;
            assert!((freq - 0.1).abs() <= 0.01, "drop frequency {freq}");
        }
    }

    #[test]
    fn block_membership_chi_square() {
        // Index 0 should land in each of the 4 blocks (or be dropped) uniformly.
        // N=9, K=4, m=2: P(block k) = 2/9 each, P(dropped) = 1/9.
        let mut rng = RngSeed(5).rng();
        let draws = 20_000;
        let mut cells = [0f64; 5];
        for _ in 0..draws {
            let p = Partition::random(9, 4, &mut rng).unwrap();
            let cell = p.block_of()[0].unwrap_or(4);
            cells[cell] += 1.0;
        }
        let expected = [2.0 / 9.0, 2.0 / 9.0, 2.0 / 9.0, 2.0 / 9.0, 1.0 / 9.0];
        let chi2: f64 = cells
            .iter()
            .zip(expected)
            .map(|(o, p)| {
                let e = p * draws as f64;
                (o - e).powi(2) / e
            })
            .sum();
        // 4 degrees of freedom, 0.999 quantile is 18.47.
        assert!(chi2 < 18.47, "chi2 = {chi2}");
    }

    proptest! {
        #[test]
        fn blocks_are_disjoint_and_equal(n in 1usize..200, k_frac in 0.0f64..1.0, seed: u64) {
            let k = 1 + ((n - 1) as f64 * k_frac) as usize;
            let p = Partition::random(n, k, &mut RngSeed(seed).rng()).unwrap();
            prop_assert_eq!(p.k(), k);
            let m = n / k;
            let mut seen = vec![false; n];
            for b in p.blocks() {
                prop_assert_eq!(b.len(), m);
                prop_assert!(b.windows(2).all(|w| w[0] < w[1]));
                for &i in b {
                    prop_assert!(!seen[i]);
                    seen[i] = true;
                }
            }
            prop_assert_eq!(seen.iter().filter(|&&s| s).count(), k * m);
        }
    }
}
