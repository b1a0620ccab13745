use std::ops::Range;

use crate::error::{Error, Result};
use crate::walk::{reduce_with, reduced_embedding, Walk};

/// The chain of reduced walks red(w, L1...Lm) for m = 0..k, each with its
/// embedding into the level below and into the ground walk.
#[derive(Clone, Debug)]
pub struct Hierarchy {
    scales: Vec<u64>,
    walks: Vec<Walk>,
    /// `down[m][j]`: index in level m-1 of the j-th level-m crossing (m >= 1).
    down: Vec<Vec<usize>>,
    /// `ground[m][j]`: ground time of the j-th level-m crossing.
    ground: Vec<Vec<usize>>,
}

impl Hierarchy {
    /// `scales[m-1]` is L_m.
    pub fn build(walk: &Walk, scales: &[u64]) -> Result<Self> {
        let mut walks = vec![walk.clone()];
        let mut down = vec![Vec::new()];
        let mut ground = vec![(0..=walk.len()).collect::<Vec<_>>()];
        for (idx, &l) in scales.iter().enumerate() {
            let prev = &walks[idx];
            let emb = reduced_embedding(prev, l)?;
            let red = reduce_with(prev, &emb);
            let g = emb.indices.iter().map(|&i| ground[idx][i]).collect();
            walks.push(red);
            ground.push(g);
            down.push(emb.indices);
        }
        Ok(Hierarchy { scales: scales.to_vec(), walks, down, ground })
    }

    pub fn top(&self) -> usize {
        self.scales.len()
    }

    pub fn scales(&self) -> &[u64] {
        &self.scales
    }

    /// L1...Lm.
    pub fn scale_product(&self, m: usize) -> u64 {
        self.scales[..m].iter().product()
    }

    pub fn ground_walk(&self) -> &Walk {
        &self.walks[0]
    }

    /// red(w, L1...Lm).
    pub fn level_walk(&self, m: usize) -> &Walk {
        &self.walks[m]
    }

    pub fn level_length(&self, m: usize) -> usize {
        self.walks[m].len()
    }

    /// Ground times of the level-m crossings, length len_m + 1.
    pub fn ground_embedding(&self, m: usize) -> &[usize] {
        &self.ground[m]
    }

    /// Indices into level m-1 of the level-m crossings.
    pub fn down_embedding(&self, m: usize) -> &[usize] {
        &self.down[m]
    }

    fn check(&self, m: usize, j: usize, mp: usize) -> Result<()> {
        if m > self.top() || mp > m {
            return Err(Error::LevelOutOfRange { m: m.max(mp), k: self.top() });
        }
        let len = self.level_length(m);
        if j >= len {
            return Err(Error::IntervalOutOfRange { m, j, len });
        }
        Ok(())
    }

    /// I_{m,j}^{m'} as a half-open range of level-m' indices.
    pub fn interval(&self, m: usize, j: usize, mp: usize) -> Result<Range<usize>> {
        self.check(m, j, mp)?;
        let (mut a, mut b) = (j, j + 1);
        for lvl in (mp + 1..=m).rev() {
            a = self.down[lvl][a];
            b = self.down[lvl][b];
        }
        Ok(a..b)
    }

    /// I_{m,j}^0 without the bounds check.
    pub fn ground_block(&self, m: usize, j: usize) -> Range<usize> {
        self.ground[m][j]..self.ground[m][j + 1]
    }

    /// I_{m,j} = I_{m,j}^{m-1}.
    pub fn reduced_block(&self, m: usize, j: usize) -> Range<usize> {
        self.down[m][j]..self.down[m][j + 1]
    }
}

pub fn level_length(walk: &Walk, scales: &[u64], m: usize) -> Result<usize> {
    if m > scales.len() {
        return Err(Error::LevelOutOfRange { m, k: scales.len() });
    }
    Ok(Hierarchy::build(walk, &scales[..m])?.level_length(m))
}

pub fn interval(walk: &Walk, scales: &[u64], m: usize, j: usize, mp: usize) -> Result<Range<usize>> {
    if m > scales.len() {
        return Err(Error::LevelOutOfRange { m, k: scales.len() });
    }
    Hierarchy::build(walk, &scales[..m])?.interval(m, j, mp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_traced_fixture() {
        let walk = Walk::from_steps(vec![1, 1, -1, -1, -1, -1]).unwrap();
        assert_eq!(level_length(&walk, &[2], 0).unwrap(), 6);
        assert_eq!(level_length(&walk, &[2], 1).unwrap(), 3);
        let h = Hierarchy::build(&walk, &[2]).unwrap();
        assert_eq!(h.interval(1, 0, 0).unwrap(), 0..2);
        assert_eq!(h.interval(1, 1, 0).unwrap(), 2..4);
        assert_eq!(h.interval(1, 2, 0).unwrap(), 4..6);
        assert_eq!(h.interval(1, 2, 1).unwrap(), 2..3);
        assert!(h.interval(1, 3, 0).is_err());
    }

    #[test]
    fn top_level_of_stopped_walk_has_length_one() {
        let walk = Walk::from_text("++-+++-+++").unwrap();
        assert_eq!(walk.end_position(), 6);
        let h = Hierarchy::build(&walk, &[2, 3]).unwrap();
        assert_eq!(h.level_length(2), 1);
        assert_eq!(h.interval(2, 0, 0).unwrap(), 0..10);
    }
}
