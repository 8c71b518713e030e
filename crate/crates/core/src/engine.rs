//! Exact thinning simulation of Hawkes processes with signed kernels.
//!
//! All processes in a coupled run consult one lazily realised unit-rate
//! planar Poisson field: candidates arrive at a piecewise-constant dominating
//! rate `B(t) = λ + sup h⁺ · n(t)`, where `n(t)` counts the dominating
//! process's own jumps in `(t - L⁺, t]`. Each candidate carries a uniform mark
//! `u`; process `p` keeps the candidate iff `u·B(t) < Λᵖ(t-)`.
//!
//! Because the intensity of every coupled process is bounded by that of the
//! dominating one, which in turn is bounded by `B`, a single stream of
//! candidates serves every member and the pathwise orderings between the
//! processes come for free.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{invalid, Error, Result};
use crate::kernel::Kernel;

pub const DEFAULT_MAX_EVENTS: usize = 100_000_000;

/// Parameters shared by every process of one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub lambda: f64,
    pub horizon: f64,
    pub seed: u64,
    pub replica: u64,
    /// Abort when any single process exceeds this many jumps.
    pub max_events: usize,
}

impl SimConfig {
    pub fn new(lambda: f64, horizon: f64) -> Self {
        Self {
            lambda,
            horizon,
            seed: 0,
            replica: 0,
            max_events: DEFAULT_MAX_EVENTS,
        }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn replica(mut self, replica: u64) -> Self {
        self.replica = replica;
        self
    }

    pub fn max_events(mut self, cap: usize) -> Self {
        self.max_events = cap;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(invalid(
                "lambda",
                format!("must be positive, got {}", self.lambda),
            ));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(invalid(
                "horizon",
                format!("must be positive, got {}", self.horizon),
            ));
        }
        Ok(())
    }
}

/// Sorted jump times of one path on `(0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EventStream {
    times: Vec<f64>,
    horizon: f64,
}

impl EventStream {
    /// Wraps externally produced times; they must be strictly increasing and
    /// lie in `(0, horizon]`.
    pub fn new(times: Vec<f64>, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(invalid(
                "horizon",
                format!("must be positive, got {horizon}"),
            ));
        }
        if let Some(w) = times.windows(2).find(|w| !(w[0] < w[1])) {
            return Err(invalid(
                "times",
                format!("not strictly increasing at {} -> {}", w[0], w[1]),
            ));
        }
        if let (Some(&first), Some(&last)) = (times.first(), times.last()) {
            if !(first > 0.0) || last > horizon {
                return Err(invalid("times", format!("must lie in (0, {horizon}]")));
            }
        }
        Ok(Self { times, horizon })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `N([s, t])`, jumps in the closed interval.
    pub fn count(&self, s: f64, t: f64) -> usize {
        if t < s {
            return 0;
        }
        let lo = self.times.partition_point(|&u| u < s);
        let hi = self.times.partition_point(|&u| u <= t);
        hi - lo
    }

    /// `N_t = N([0, t])`.
    pub fn count_until(&self, t: f64) -> usize {
        self.times.partition_point(|&u| u <= t)
    }

    /// Gaps between consecutive jumps, the first measured from 0.
    pub fn gaps(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.times
            .iter()
            .map(|&u| {
                let g = u - prev;
                prev = u;
                g
            })
            .collect()
    }

    /// `Λ(t) = (λ + Σ_{U < t} h(t - U))⁺` reconstructed from the path.
    pub fn intensity(&self, kernel: &Kernel, lambda: f64, t: f64) -> f64 {
        let end = self.times.partition_point(|&u| u < t);
        let begin = self.times[..end].partition_point(|&u| u <= t - kernel.support());
        let drive: f64 = self.times[begin..end]
            .iter()
            .map(|&u| kernel.eval(t - u))
            .sum();
        (lambda + drive).max(0.0)
    }
}

/// One consulted point of the planar field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub time: f64,
    pub mark: f64,
    /// Dominating rate in force when the candidate was drawn.
    pub rate: f64,
}

/// Randomness source of one replica plus an optional log of every candidate
/// it produced.
///
/// The generator is ChaCha8 keyed by `seed` on stream `replica`, so replicas
/// are independent and any one of them can be replayed on its own.
#[derive(Debug, Clone)]
pub struct Driver {
    seed: u64,
    replica: u64,
    rng: ChaCha8Rng,
    log: Option<Vec<Candidate>>,
}

impl Driver {
    pub fn new(seed: u64, replica: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(replica);
        Self {
            seed,
            replica,
            rng,
            log: None,
        }
    }

    pub fn with_log(mut self) -> Self {
        self.log = Some(Vec::new());
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn replica(&self) -> u64 {
        self.replica
    }

    pub fn log(&self) -> Option<&[Candidate]> {
        self.log.as_deref()
    }

    fn exp1(&mut self) -> f64 {
        Exp1.sample(&mut self.rng)
    }

    fn uniform(&mut self) -> f64 {
        self.rng.random()
    }
}

struct Track<'k> {
    kernel: &'k Kernel,
    times: Vec<f64>,
    // First jump that can still influence the intensity.
    head: usize,
}

impl Track<'_> {
    fn intensity(&mut self, lambda: f64, t: f64) -> f64 {
        let reach = self.kernel.support();
        while self.head < self.times.len() && self.times[self.head] + reach <= t {
            self.head += 1;
        }
        let drive: f64 = self.times[self.head..]
            .iter()
            .map(|&u| self.kernel.eval(t - u))
            .sum();
        (lambda + drive).max(0.0)
    }
}

/// Draws one path of `N^h` on `(0, horizon]` from the empty initial
/// condition.
///
/// Kernels with a negative part are run coupled to their positive part, which
/// supplies the dominating rate.
pub fn simulate(kernel: &Kernel, cfg: &SimConfig) -> Result<EventStream> {
    let mut driver = Driver::new(cfg.seed, cfg.replica);
    simulate_with(kernel, cfg, &mut driver)
}

/// [`simulate`] with a caller-supplied driver (e.g. one that logs candidates).
pub fn simulate_with(kernel: &Kernel, cfg: &SimConfig, driver: &mut Driver) -> Result<EventStream> {
    let mut streams = if kernel.is_nonnegative() {
        run(&[kernel], cfg, driver)?
    } else {
        let positive = kernel.positive_part();
        run(&[kernel, &positive], cfg, driver)?
    };
    Ok(streams.swap_remove(0))
}

/// Simulates every kernel from the same candidate stream.
///
/// The dominating rate comes from a member that is nonnegative and above
/// every other member's positive part, typically `h⁺` in `(h, h⁺)`. When no
/// member qualifies, the envelope `max_i h_i⁺` is run alongside as a hidden
/// process and its stream is not returned.
pub fn simulate_coupled(kernels: &[Kernel], cfg: &SimConfig) -> Result<Vec<EventStream>> {
    let mut driver = Driver::new(cfg.seed, cfg.replica);
    simulate_coupled_with(kernels, cfg, &mut driver)
}

pub fn simulate_coupled_with(
    kernels: &[Kernel],
    cfg: &SimConfig,
    driver: &mut Driver,
) -> Result<Vec<EventStream>> {
    if kernels.is_empty() {
        return Err(invalid("kernels", "coupling needs at least one kernel"));
    }
    let mut refs: Vec<&Kernel> = kernels.iter().collect();
    if refs.iter().any(|d| refs.iter().all(|k| d.dominates(k))) {
        return run(&refs, cfg, driver);
    }
    let envelope = Kernel::positive_envelope(kernels.iter())?;
    refs.push(&envelope);
    let mut streams = run(&refs, cfg, driver)?;
    streams.pop();
    Ok(streams)
}

fn run(kernels: &[&Kernel], cfg: &SimConfig, driver: &mut Driver) -> Result<Vec<EventStream>> {
    cfg.validate()?;
    let dom = kernels
        .iter()
        .position(|d| kernels.iter().all(|k| d.dominates(k)))
        .ok_or(Error::NoDominatingKernel)?;

    let lambda = cfg.lambda;
    let jump = kernels[dom].max_positive();
    let reach = kernels[dom].support();
    let mut tracks: Vec<Track> = kernels
        .iter()
        .map(|&kernel| Track {
            kernel,
            times: Vec::new(),
            head: 0,
        })
        .collect();
    // Start of the dominating process's window (t - L⁺, t].
    let mut window_head = 0usize;
    let mut t = 0.0;

    loop {
        let in_window = tracks[dom].times.len() - window_head;
        let rate = lambda + jump * in_window as f64;
        let candidate = t + driver.exp1() / rate;

        if jump > 0.0 && in_window > 0 {
            let departure = tracks[dom].times[window_head] + reach;
            if departure <= candidate {
                // The rate drops here; the pending gap is discarded and redrawn.
                t = departure;
                window_head += 1;
                if t > cfg.horizon {
                    break;
                }
                continue;
            }
        }
        if candidate > cfg.horizon {
            break;
        }
        t = candidate;
        let mark = driver.uniform();
        if let Some(log) = driver.log.as_mut() {
            log.push(Candidate {
                time: t,
                mark,
                rate,
            });
        }

        let threshold = mark * rate;
        for (p, track) in tracks.iter_mut().enumerate() {
            let intensity = track.intensity(lambda, t);
            if intensity > rate * (1.0 + 1e-12) {
                return Err(Error::DominationViolated {
                    process: p,
                    time: t,
                    intensity,
                    bound: rate,
                });
            }
            if threshold < intensity {
                track.times.push(t);
                if track.times.len() > cfg.max_events {
                    return Err(Error::RunawaySimulation {
                        cap: cfg.max_events,
                        time: t,
                    });
                }
            }
        }
    }

    Ok(tracks
        .into_iter()
        .map(|track| EventStream {
            times: track.times,
            horizon: cfg.horizon,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn signed() -> Kernel {
        Kernel::new([(0.0, 1.0, 0.5), (1.0, 2.0, -3.0)]).unwrap()
    }

    #[test]
    fn poisson_rate() {
        let s = simulate(&Kernel::zero(), &SimConfig::new(1.0, 1e5).seed(3)).unwrap();
        let rate = s.len() as f64 / 1e5;
        assert!((0.99..=1.01).contains(&rate), "rate {rate}");
    }

    #[test]
    fn canceling_gaps_exceed_dead_time() {
        let k = Kernel::canceling(2.0, 1.0).unwrap();
        for seed in 0..20 {
            let s = simulate(&k, &SimConfig::new(2.0, 500.0).seed(seed)).unwrap();
            assert!(s.times().windows(2).all(|w| w[1] - w[0] > 1.0));
        }
    }

    #[test]
    fn delayed_kernel_silences_after_first_jump() {
        let k = Kernel::delayed_canceling(1.0, 0.5, 1.0).unwrap();
        for seed in 0..200 {
            let s = simulate(&k, &SimConfig::new(1.0, 50.0).seed(seed)).unwrap();
            let Some(&first) = s.times().first() else {
                continue;
            };
            assert_eq!(s.count(first + 0.5 + 1e-15, first + 1.5), 0, "seed {seed}");
        }
    }

    #[test]
    fn duplicated_kernel_gives_identical_streams() {
        let k = signed();
        let kernels = [k.clone(), k.positive_part(), k];
        let out = simulate_coupled(&kernels, &SimConfig::new(1.0, 200.0).seed(9)).unwrap();
        assert_eq!(out[0], out[2]);
    }

    #[test]
    fn simulate_matches_coupled_first_member() {
        let k = signed();
        let cfg = SimConfig::new(1.0, 300.0).seed(4).replica(2);
        let alone = simulate(&k, &cfg).unwrap();
        let coupled = simulate_coupled(&[k.clone(), k.positive_part()], &cfg).unwrap();
        assert_eq!(alone, coupled[0]);
    }

    #[test]
    fn deterministic_replay() {
        let k = signed();
        let cfg = SimConfig::new(1.3, 400.0).seed(77).replica(5);
        let mut d1 = Driver::new(77, 5).with_log();
        let mut d2 = Driver::new(77, 5).with_log();
        let a = simulate_with(&k, &cfg, &mut d1).unwrap();
        let b = simulate_with(&k, &cfg, &mut d2).unwrap();
        assert_eq!(a, b);
        assert_eq!(d1.log(), d2.log());
        let c = simulate(&k, &cfg.replica(6)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn candidate_log_bounds_intensities() {
        let k = signed();
        let pos = k.positive_part();
        let cfg = SimConfig::new(1.0, 300.0).seed(11);
        let mut driver = Driver::new(11, 0).with_log();
        let out = simulate_coupled_with(&[k.clone(), pos.clone()], &cfg, &mut driver).unwrap();
        for c in driver.log().unwrap() {
            assert!(out[0].intensity(&k, 1.0, c.time) <= c.rate + 1e-12);
            assert!(out[1].intensity(&pos, 1.0, c.time) <= c.rate + 1e-12);
        }
    }

    #[test]
    fn pure_inhibition_never_exceeds_baseline() {
        let k = Kernel::new([(0.0, 0.7, -0.4), (0.7, 2.0, -1.5)]).unwrap();
        let s = simulate(&k, &SimConfig::new(1.5, 200.0).seed(1)).unwrap();
        for i in 0..2000 {
            let t = i as f64 * 0.1;
            assert!(s.intensity(&k, 1.5, t) <= 1.5);
        }
    }

    #[test]
    fn errors() {
        let k = signed();
        assert!(matches!(
            simulate_coupled(&[], &SimConfig::new(1.0, 1.0)),
            Err(Error::InvalidParameter { .. })
        ));
        // A lone signed kernel gets its positive part as a hidden dominator.
        let cfg = SimConfig::new(1.0, 50.0).seed(4);
        assert_eq!(
            simulate_coupled(&[k.clone()], &cfg).unwrap()[0],
            simulate(&k, &cfg).unwrap()
        );
        // Envelope of two subcritical kernels that is itself supercritical.
        let left = Kernel::new([(0.0, 1.0, 0.6)]).unwrap();
        let right = Kernel::new([(1.0, 2.0, 0.6)]).unwrap();
        assert!(matches!(
            simulate_coupled(&[left, right], &SimConfig::new(1.0, 1.0)),
            Err(Error::InvalidKernel(_))
        ));
        assert!(simulate(&k, &SimConfig::new(0.0, 1.0)).is_err());
        assert!(simulate(&k, &SimConfig::new(1.0, -1.0)).is_err());
        let capped = simulate(&Kernel::zero(), &SimConfig::new(10.0, 100.0).max_events(5));
        assert!(matches!(
            capped,
            Err(Error::RunawaySimulation { cap: 5, .. })
        ));
    }

    #[test]
    fn stream_counts() {
        let s = EventStream::new(vec![0.5, 0.7, 3.0], 10.0).unwrap();
        assert_eq!(s.count(0.5, 0.7), 2);
        assert_eq!(s.count(0.6, 2.9), 1);
        assert_eq!(s.count(3.0, 3.0), 1);
        assert_eq!(s.count_until(1.0), 2);
        assert_eq!(s.gaps(), vec![0.5, 0.7 - 0.5, 3.0 - 0.7]);
        assert!(EventStream::new(vec![0.5, 0.5], 1.0).is_err());
        assert!(EventStream::new(vec![0.0], 1.0).is_err());
        assert!(EventStream::new(vec![2.0], 1.0).is_err());
    }
}
