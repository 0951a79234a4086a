use crate::error::{Error, Result};
use crate::matrix::StateSpace;

/// An `M x (T + 1)` matrix of observed states, one row per sample path and
/// columns indexed by time `t = 0..=T`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrajectoryMatrix {
    chains: usize,
    horizon: usize,
    states: StateSpace,
    data: Vec<u32>,
}

impl TrajectoryMatrix {
    /// `data` holds the rows back to back, each of length `horizon + 1`.
    pub fn new(chains: usize, horizon: usize, state_count: usize, data: Vec<u32>) -> Result<Self> {
        let states = StateSpace::new(state_count)?;
        if chains == 0 || horizon == 0 {
            return Err(Error::domain("trajectory matrix needs at least one chain and horizon >= 1"));
        }
        Error::check_dim(chains * (horizon + 1), data.len())?;
        if let Some(&s) = data.iter().find(|&&s| !states.contains(s as usize)) {
            return Err(Error::domain(format!("state {s} outside 0..{state_count}")));
        }
        Ok(TrajectoryMatrix { chains, horizon, states, data })
    }

    pub fn from_rows(state_count: usize, rows: Vec<Vec<u32>>) -> Result<Self> {
        let chains = rows.len();
        let width = rows.first().map_or(0, Vec::len);
        if width < 2 {
            return Err(Error::domain("rows must hold at least two time points"));
        }
        let mut data = Vec::with_capacity(chains * width);
        for row in rows {
            Error::check_dim(width, row.len())?;
            data.extend(row);
        }
        Self::new(chains, width - 1, state_count, data)
    }

    pub(crate) fn from_parts_unchecked(chains: usize, horizon: usize, states: StateSpace, data: Vec<u32>) -> Self {
        debug_assert_eq!(data.len(), chains * (horizon + 1));
        TrajectoryMatrix { chains, horizon, states, data }
    }

    /// Number of sample paths `M`.
    pub fn chains(&self) -> usize {
        self.chains
    }

    /// Number of transitions per path `T`.
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn state_count(&self) -> usize {
        self.states.size()
    }

    pub fn state_space(&self) -> StateSpace {
        self.states
    }

    pub fn row(&self, m: usize) -> &[u32] {
        let w = self.horizon + 1;
        &self.data[m * w..(m + 1) * w]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[u32]> {
        self.data.chunks_exact(self.horizon + 1)
    }

    pub fn get(&self, m: usize, t: usize) -> usize {
        self.data[m * (self.horizon + 1) + t] as usize
    }

    pub(crate) fn row_mut(&mut self, m: usize) -> &mut [u32] {
        let w = self.horizon + 1;
        &mut self.data[m * w..(m + 1) * w]
    }

    /// Stacks the rows of `other` below `self`.
    pub fn concat(&self, other: &TrajectoryMatrix) -> Result<TrajectoryMatrix> {
        Error::check_dim(self.horizon, other.horizon)?;
        Error::check_dim(self.state_count(), other.state_count())?;
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(TrajectoryMatrix::from_parts_unchecked(
            self.chains + other.chains,
            self.horizon,
            self.states,
            data,
        ))
    }

    /// The rows `m` with `keep(m)`, in order; `None` when no row is kept.
    pub fn select_rows(&self, keep: impl Fn(usize) -> bool) -> Option<TrajectoryMatrix> {
        let mut data = Vec::new();
        let mut chains = 0;
        for (m, row) in self.rows().enumerate() {
            if keep(m) {
                data.extend_from_slice(row);
                chains += 1;
            }
        }
        (chains > 0).then(|| TrajectoryMatrix::from_parts_unchecked(chains, self.horizon, self.states, data))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_shape_and_states() {
        assert!(TrajectoryMatrix::new(1, 2, 2, vec![0, 1, 0]).is_ok());
        assert!(TrajectoryMatrix::new(1, 2, 2, vec![0, 1]).is_err());
        assert!(TrajectoryMatrix::new(1, 2, 2, vec![0, 2, 0]).is_err());
        assert!(TrajectoryMatrix::new(0, 2, 2, vec![]).is_err());
        assert!(TrajectoryMatrix::new(1, 0, 2, vec![0]).is_err());
        assert!(TrajectoryMatrix::from_rows(2, vec![vec![0, 1], vec![1]]).is_err());
    }

    #[test]
    fn concat_and_select() {
        let a = TrajectoryMatrix::from_rows(2, vec![vec![0, 1, 0]]).unwrap();
        let b = TrajectoryMatrix::from_rows(2, vec![vec![1, 1, 1]]).unwrap();
        let c = a.concat(&b).unwrap();
        assert_eq!(c.chains(), 2);
        assert_eq!(c.row(1), &[1, 1, 1]);
        let s = c.select_rows(|m| m == 1).unwrap();
        assert_eq!(s, b);
        assert!(c.select_rows(|_| false).is_none());
    }
}
