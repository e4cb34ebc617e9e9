//! Seeded generators for normal, Poisson and binomial stream models.
//!
//! Every trial owns two ChaCha8 streams derived from `(master_seed,
//! trial_index)`: stream `2i` produces observations, stream `2i + 1` seeds a
//! xoshiro256++ generator for the auxiliary uniforms of randomized p-values
//! (count models draw tens of thousands per step). A trial's data therefore
//! does not depend on how trials are scheduled across workers, nor on how
//! many uniforms the rule consumes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{Error, Result};
use crate::rules::DataSource;

/// Observation law before and after the change.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    /// `N(0, 1)` before, `N(Δ, 1)` after.
    Normal { delta: f64 },
    /// `Poisson(Δ0)` before, `Poisson(Δ1)` after.
    Poisson { delta0: f64, delta1: f64 },
    /// `Binomial(n0, p0)` before, `Binomial(n0, p1)` after.
    Binomial { n0: u64, p0: f64, p1: f64 },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Normal { .. } => "normal",
            Self::Poisson { .. } => "poisson",
            Self::Binomial { .. } => "binomial",
        }
    }
}

/// Which streams change.
#[derive(Debug, Clone, PartialEq)]
pub enum Subset {
    /// Each stream independently with probability `epsilon`, drawn per trial.
    Bernoulli { epsilon: f64 },
    /// A fixed set of zero-based stream indices.
    Fixed(Vec<usize>),
}

/// Change time, affected streams and observation law.
#[derive(Debug, Clone, PartialEq)]
pub struct ChangeScenario {
    pub num_streams: usize,
    /// `None` means no change (`ν = ∞`).
    pub change_time: Option<u64>,
    pub subset: Subset,
    pub family: Family,
}

impl ChangeScenario {
    /// No change at all.
    pub fn null(num_streams: usize, family: Family) -> Self {
        Self { num_streams, change_time: None, subset: Subset::Fixed(Vec::new()), family }
    }

    /// Change at `ν = 1` in streams `0..size`.
    pub fn first_streams(num_streams: usize, size: usize, family: Family) -> Self {
        Self { num_streams, change_time: Some(1), subset: Subset::Fixed((0..size).collect()), family }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_streams == 0 {
            return Err(Error::Config("scenario needs at least one stream".into()));
        }
        if self.change_time == Some(0) {
            return Err(Error::Config("change time must be >= 1".into()));
        }
        match &self.subset {
            Subset::Bernoulli { epsilon } if !(*epsilon > 0.0 && *epsilon < 1.0) => {
                return Err(Error::Config(format!("subset probability must lie in (0, 1), got {epsilon}")));
            }
            Subset::Fixed(idx) => {
                let mut seen = vec![false; self.num_streams];
                for &i in idx {
                    if i >= self.num_streams || std::mem::replace(&mut seen[i], true) {
                        return Err(Error::Config(format!("bad or repeated stream index {i}")));
                    }
                }
            }
            _ => {}
        }
        match self.family {
            Family::Normal { delta } if !delta.is_finite() => Err(Error::Config("delta must be finite".into())),
            Family::Poisson { delta0, delta1 } if !(delta0 >= 0.0 && delta1 >= 0.0) => {
                Err(Error::Config("poisson means must be non-negative".into()))
            }
            Family::Binomial { n0, p0, p1 }
                if n0 == 0 || !(0.0..=1.0).contains(&p0) || !(0.0..=1.0).contains(&p1) =>
            {
                Err(Error::Config("binomial parameters out of range".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Provenance of one trial's randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeededSource {
    pub master_seed: u64,
    pub trial_index: u64,
}

impl SeededSource {
    pub fn new(master_seed: u64, trial_index: u64) -> Self {
        Self { master_seed, trial_index }
    }

    fn stream(&self, lane: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(2 * self.trial_index + lane);
        rng
    }

    pub fn data_rng(&self) -> ChaCha8Rng {
        self.stream(0)
    }

    pub fn aux_rng(&self) -> Xoshiro256PlusPlus {
        Xoshiro256PlusPlus::from_rng(&mut self.stream(1))
    }
}

/// Includes each of `0..num_streams` independently with probability `epsilon`.
pub fn draw_subset(rng: &mut impl Rng, num_streams: usize, epsilon: f64) -> Result<Vec<usize>> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Domain(format!("subset probability must lie in (0, 1), got {epsilon}")));
    }
    Ok((0..num_streams).filter(|_| rng.random::<f64>() < epsilon).collect())
}

#[derive(Debug, Clone)]
enum Sampler {
    Normal { delta: f64 },
    Poisson { pre: Option<Poisson<f64>>, post: Option<Poisson<f64>> },
    Binomial { pre: Binomial, post: Binomial },
}

fn poisson(mean: f64) -> Result<Option<Poisson<f64>>> {
    if mean == 0.0 {
        return Ok(None);
    }
    Poisson::new(mean).map(Some).map_err(|e| Error::Config(format!("poisson mean {mean}: {e}")))
}

/// Data source for one trial of a scenario.
#[derive(Debug, Clone)]
pub struct ScenarioSource {
    change_time: u64,
    affected: Vec<bool>,
    sampler: Sampler,
    data: ChaCha8Rng,
    aux: Xoshiro256PlusPlus,
    time: u64,
}

impl ScenarioSource {
    pub fn new(scenario: &ChangeScenario, source: SeededSource) -> Result<Self> {
        scenario.validate()?;
        let mut data = source.data_rng();
        let affected_idx = match &scenario.subset {
            Subset::Fixed(idx) => idx.clone(),
            Subset::Bernoulli { epsilon } => draw_subset(&mut data, scenario.num_streams, *epsilon)?,
        };
        let mut affected = vec![false; scenario.num_streams];
        for i in affected_idx {
            affected[i] = true;
        }
        let sampler = match scenario.family {
            Family::Normal { delta } => Sampler::Normal { delta },
            Family::Poisson { delta0, delta1 } => Sampler::Poisson { pre: poisson(delta0)?, post: poisson(delta1)? },
            Family::Binomial { n0, p0, p1 } => {
                let mk = |p| Binomial::new(n0, p).map_err(|e| Error::Config(format!("binomial: {e}")));
                Sampler::Binomial { pre: mk(p0)?, post: mk(p1)? }
            }
        };
        Ok(Self {
            change_time: scenario.change_time.unwrap_or(u64::MAX),
            affected,
            sampler,
            data,
            aux: source.aux_rng(),
            time: 0,
        })
    }

    /// Streams that change in this trial.
    pub fn affected(&self) -> Vec<usize> {
        self.affected.iter().enumerate().filter_map(|(i, &a)| a.then_some(i)).collect()
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    /// Draws the observation vector of the next time step.
    pub fn generate_step(&mut self, out: &mut [f64]) {
        self.time += 1;
        let changed = self.time >= self.change_time;
        let rng = &mut self.data;
        for (x, &hit) in out.iter_mut().zip(&self.affected) {
            let post = changed && hit;
            *x = match &self.sampler {
                Sampler::Normal { delta } => {
                    let z: f64 = rng.sample(StandardNormal);
                    if post {
                        z + delta
                    } else {
                        z
                    }
                }
                Sampler::Poisson { pre, post: after } => match if post { after } else { pre } {
                    Some(d) => d.sample(rng),
                    None => 0.0,
                },
                Sampler::Binomial { pre, post: after } => {
                    (if post { after } else { pre }).sample(rng) as f64
                }
            };
        }
    }
}

impl DataSource for ScenarioSource {
    fn next_observation(&mut self, out: &mut [f64]) {
        self.generate_step(out);
    }

    fn fill_uniforms(&mut self, out: &mut [f64]) {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        let mut words = [0u64; 256];
        for chunk in out.chunks_mut(256) {
            let words = &mut words[..chunk.len()];
            self.aux.fill(words);
            for (u, &w) in chunk.iter_mut().zip(words.iter()) {
                *u = (w >> 11) as i64 as f64 * SCALE;
            }
        }
    }
}
