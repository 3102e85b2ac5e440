//! Fixed-capacity FIFO transition store with uniform sampling.

use rand::Rng;

use crate::nn::Matrix;

use super::SacError;

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    pub r: f64,
    pub s_next: Vec<f64>,
    /// True only when the episode ended in a terminal (non-bootstrapped) state.
    pub d: bool,
}

/// A sampled minibatch laid out row-per-transition.
#[derive(Clone, Debug)]
pub struct Batch {
    pub obs: Matrix,
    pub actions: Matrix,
    pub rewards: Vec<f64>,
    pub next_obs: Matrix,
    pub dones: Vec<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn from_transitions(items: &[Transition]) -> Self {
        let rows = |f: fn(&Transition) -> &Vec<f64>| Matrix::from_rows(&items.iter().map(f).collect::<Vec<_>>());
        Batch {
            obs: rows(|t| &t.s),
            actions: rows(|t| &t.a),
            rewards: items.iter().map(|t| t.r).collect(),
            next_obs: rows(|t| &t.s_next),
            dones: items.iter().map(|t| if t.d { 1.0 } else { 0.0 }).collect(),
        }
    }
}

/// Ring buffer; storage grows on demand up to `capacity`.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    obs_dim: usize,
    act_dim: usize,
    obs: Vec<f64>,
    actions: Vec<f64>,
    rewards: Vec<f64>,
    next_obs: Vec<f64>,
    dones: Vec<f64>,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, obs_dim: usize, act_dim: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            obs_dim,
            act_dim,
            obs: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            next_obs: Vec::new(),
            dones: Vec::new(),
            cursor: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, t: &Transition) -> Result<(), SacError> {
        if t.s.len() != self.obs_dim || t.s_next.len() != self.obs_dim || t.a.len() != self.act_dim {
            return Err(SacError::TransitionShape);
        }
        let finite = t.s.iter().chain(&t.a).chain(&t.s_next).all(|v| v.is_finite()) && t.r.is_finite();
        if !finite {
            return Err(SacError::NonFiniteTransition);
        }
        let d = if t.d { 1.0 } else { 0.0 };
        if self.len() < self.capacity {
            self.obs.extend_from_slice(&t.s);
            self.actions.extend_from_slice(&t.a);
            self.rewards.push(t.r);
            self.next_obs.extend_from_slice(&t.s_next);
            self.dones.push(d);
        } else {
            let i = self.cursor;
            self.obs[i * self.obs_dim..(i + 1) * self.obs_dim].copy_from_slice(&t.s);
            self.actions[i * self.act_dim..(i + 1) * self.act_dim].copy_from_slice(&t.a);
            self.rewards[i] = t.r;
            self.next_obs[i * self.obs_dim..(i + 1) * self.obs_dim].copy_from_slice(&t.s_next);
            self.dones[i] = d;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
        Ok(())
    }

    /// Transition at storage slot `i` (not insertion order once wrapped).
    pub fn get(&self, i: usize) -> Option<Transition> {
        if i >= self.len() {
            return None;
        }
        Some(Transition {
            s: self.obs[i * self.obs_dim..(i + 1) * self.obs_dim].to_vec(),
            a: self.actions[i * self.act_dim..(i + 1) * self.act_dim].to_vec(),
            r: self.rewards[i],
            s_next: self.next_obs[i * self.obs_dim..(i + 1) * self.obs_dim].to_vec(),
            d: self.dones[i] != 0.0,
        })
    }

    /// Slots in insertion order, oldest first.
    pub fn iter_oldest_first(&self) -> impl Iterator<Item = Transition> + '_ {
        let n = self.len();
        let start = if n < self.capacity { 0 } else { self.cursor };
        (0..n).map(move |k| self.get((start + k) % n).unwrap())
    }

    /// Storage slot indices of a uniform draw with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Vec<usize>, SacError> {
        if batch_size == 0 || self.len() < batch_size {
            return Err(SacError::Underfilled {
                size: self.len(),
                batch: batch_size,
            });
        }
        Ok((0..batch_size).map(|_| rng.random_range(0..self.len())).collect())
    }

    pub fn sample<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Batch, SacError> {
        let idx = self.sample_indices(batch_size, rng)?;
        let (od, ad) = (self.obs_dim, self.act_dim);
        let mut obs = Vec::with_capacity(batch_size * od);
        let mut actions = Vec::with_capacity(batch_size * ad);
        let mut next_obs = Vec::with_capacity(batch_size * od);
        let mut rewards = Vec::with_capacity(batch_size);
        let mut dones = Vec::with_capacity(batch_size);
        for &i in &idx {
            obs.extend_from_slice(&self.obs[i * od..(i + 1) * od]);
            actions.extend_from_slice(&self.actions[i * ad..(i + 1) * ad]);
            next_obs.extend_from_slice(&self.next_obs[i * od..(i + 1) * od]);
            rewards.push(self.rewards[i]);
            dones.push(self.dones[i]);
        }
        Ok(Batch {
            obs: Matrix::from_vec(batch_size, od, obs),
            actions: Matrix::from_vec(batch_size, ad, actions),
            rewards,
            next_obs: Matrix::from_vec(batch_size, od, next_obs),
            dones,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tr(tag: f64) -> Transition {
        Transition {
            s: vec![tag],
            a: vec![tag],
            r: tag,
            s_next: vec![tag + 0.5],
            d: false,
        }
    }

    #[test]
    fn fifo_eviction_at_capacity() {
        let mut b = ReplayBuffer::new(3, 1, 1);
        for k in 0..4 {
            b.push(&tr(k as f64)).unwrap();
        }
        assert_eq!(b.len(), 3);
        let kept: Vec<f64> = b.iter_oldest_first().map(|t| t.r).collect();
        assert_eq!(kept, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn single_item_sample() {
        let mut b = ReplayBuffer::new(10, 1, 1);
        b.push(&tr(4.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let batch = b.sample(1, &mut rng).unwrap();
        assert_eq!(batch.rewards, vec![4.0]);
        assert_eq!(batch.next_obs.as_slice(), &[4.5]);
    }

    #[test]
    fn underfilled_sample_is_an_error() {
        let mut b = ReplayBuffer::new(10, 1, 1);
        b.push(&tr(1.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(b.sample(2, &mut rng), Err(SacError::Underfilled { size: 1, batch: 2 })));
    }

    #[test]
    fn rejects_bad_transitions() {
        let mut b = ReplayBuffer::new(10, 2, 1);
        assert!(matches!(b.push(&tr(1.0)), Err(SacError::TransitionShape)));
        let mut t = Transition {
            s: vec![0.0, 0.0],
            a: vec![0.0],
            r: f64::NAN,
            s_next: vec![0.0, 0.0],
            d: true,
        };
        assert!(matches!(b.push(&t), Err(SacError::NonFiniteTransition)));
        t.r = 1.0;
        b.push(&t).unwrap();
        assert!(b.get(0).unwrap().d);
    }
}
