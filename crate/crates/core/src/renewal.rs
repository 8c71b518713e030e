//! Regeneration windows.
//!
//! Window `i` starts at `S_{i-1}` (with `S_0 = 0`), contains its first jump
//! `U^i_1` and every later jump until the first instant `S_i` at which the
//! interval `(S_i - L, S_i]` holds no jump. Since nothing older than `L` can
//! affect the intensity, the pairs `(τ_i, W_i) = (S_i - S_{i-1}, #jumps)`
//! are i.i.d.

use serde::{Deserialize, Serialize};

use crate::engine::{simulate, EventStream, SimConfig};
use crate::error::{invalid, Error, Result};
use crate::kernel::Kernel;

/// One completed regeneration cycle, in absolute time.
#[derive(Debug, Clone, PartialEq)]
pub struct RenewalWindow {
    start: f64,
    end: f64,
    times: Vec<f64>,
}

impl RenewalWindow {
    /// `times` must be nonempty, sorted and inside `(start, end)`.
    pub fn new(start: f64, end: f64, times: Vec<f64>) -> Result<Self> {
        let (Some(&first), Some(&last)) = (times.first(), times.last()) else {
            return Err(invalid("times", "a window holds at least one jump"));
        };
        if !(start < first && last < end) || times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid(
                "times",
                "jumps must be increasing and inside the window",
            ));
        }
        Ok(Self { start, end, times })
    }

    /// `S_{i-1}`.
    pub fn start(&self) -> f64 {
        self.start
    }

    /// `S_i`.
    pub fn end(&self) -> f64 {
        self.end
    }

    /// `τ_i = S_i - S_{i-1}`.
    pub fn tau(&self) -> f64 {
        self.end - self.start
    }

    /// `W_i`.
    pub fn w(&self) -> usize {
        self.times.len()
    }

    /// `U^i_1 - S_{i-1}`.
    pub fn first_offset(&self) -> f64 {
        self.times[0] - self.start
    }

    /// Absolute jump times.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn relative_times(&self) -> Vec<f64> {
        self.times.iter().map(|&u| u - self.start).collect()
    }
}

/// Where a sample came from; carried into exported files.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub lambda: Option<f64>,
    pub kernel: Option<Vec<crate::kernel::Segment>>,
    pub seed: Option<u64>,
    pub replicas: Vec<u64>,
}

/// Completed windows of one or more paths.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSample {
    windows: Vec<RenewalWindow>,
    tail: Vec<f64>,
    support: f64,
    horizon: f64,
    pub provenance: Provenance,
}

impl WindowSample {
    pub fn windows(&self) -> &[RenewalWindow] {
        &self.windows
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    /// Jumps after the last confirmed closure.
    pub fn tail(&self) -> &[f64] {
        &self.tail
    }

    pub fn discarded_tail_count(&self) -> usize {
        self.tail.len()
    }

    /// Window length `L` used to cut the path.
    pub fn support(&self) -> f64 {
        self.support
    }

    /// Total observed time (summed over paths after [`WindowSample::merge`]).
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// `(τ_i, W_i)` pairs.
    pub fn pairs(&self) -> Vec<(f64, f64)> {
        self.windows
            .iter()
            .map(|w| (w.tau(), w.w() as f64))
            .collect()
    }

    pub fn taus(&self) -> Vec<f64> {
        self.windows.iter().map(RenewalWindow::tau).collect()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.windows.iter().map(RenewalWindow::w).collect()
    }

    /// Appends the windows of an independent path.
    ///
    /// The tail and reconstruction data of `other` are dropped; only the i.i.d.
    /// windows are pooled.
    pub fn merge(&mut self, other: WindowSample) {
        self.windows.extend(other.windows);
        self.horizon += other.horizon;
        self.provenance.replicas.extend(other.provenance.replicas);
    }

    /// Keeps the first `n` windows; later jumps move to the tail and the
    /// horizon shrinks to the last kept closure.
    pub fn truncate(&mut self, n: usize) {
        if n >= self.windows.len() {
            return;
        }
        let dropped: Vec<f64> = self.windows.drain(n..).flat_map(|w| w.times).collect();
        self.horizon = self.windows.last().map_or(0.0, RenewalWindow::end);
        let mut tail = dropped;
        tail.append(&mut self.tail);
        self.tail = tail;
    }

    /// Rebuilds the source path from the windows and the tail.
    pub fn reconstruct(&self) -> Vec<f64> {
        self.windows
            .iter()
            .flat_map(|w| w.times.iter().copied())
            .chain(self.tail.iter().copied())
            .collect()
    }
}

/// Cuts `stream` into regeneration windows of closing length `support`.
///
/// A window is kept only if its closure `S_i` is at or before the horizon;
/// jumps after the last kept window end up in the tail.
pub fn decompose(stream: &EventStream, support: f64) -> Result<WindowSample> {
    if !(support > 0.0 && support.is_finite()) {
        return Err(invalid(
            "support",
            format!("must be positive, got {support}"),
        ));
    }
    let times = stream.times();
    let horizon = stream.horizon();
    let mut windows = Vec::new();
    let mut start = 0.0;
    let mut i = 0;
    let mut tail = Vec::new();

    while i < times.len() {
        let mut j = i;
        // A gap of exactly `support` keeps the window open: the later jump
        // falls in the half-open interval (last, last + L].
        while j + 1 < times.len() && times[j + 1] - times[j] <= support {
            j += 1;
        }
        let end = times[j] + support;
        if end > horizon {
            tail.extend_from_slice(&times[i..]);
            break;
        }
        windows.push(RenewalWindow {
            start,
            end,
            times: times[i..=j].to_vec(),
        });
        start = end;
        i = j + 1;
    }

    Ok(WindowSample {
        windows,
        tail,
        support,
        horizon,
        provenance: Provenance::default(),
    })
}

/// Exactly `n` windows from one path of `h` started empty, decomposed with
/// `L(h)` (or `1/λ` for the zero kernel).
///
/// The horizon is sized from a pilot run and grown until enough windows close.
/// Because the candidate stream does not depend on the horizon, the path is
/// the same prefix whatever horizon ends up being used.
pub fn sample_windows(kernel: &Kernel, lambda: f64, n: usize, seed: u64) -> Result<WindowSample> {
    if n == 0 {
        return Err(invalid("n", "must be positive".to_string()));
    }
    let support = window_length(kernel, lambda);
    let pilot_horizon = 200.0 * (support + 1.0 / lambda);
    let pilot = decompose(
        &simulate(kernel, &SimConfig::new(lambda, pilot_horizon).seed(seed))?,
        support,
    )?;
    let mean_tau = if pilot.is_empty() {
        support + 1.0 / lambda
    } else {
        pilot.taus().iter().sum::<f64>() / pilot.len() as f64
    };
    let mut horizon = (n as f64 * mean_tau * 1.05).max(pilot_horizon);
    loop {
        let stream = simulate(kernel, &SimConfig::new(lambda, horizon).seed(seed))?;
        let mut sample = decompose(&stream, support)?;
        if sample.len() >= n {
            sample.truncate(n);
            sample.provenance = Provenance {
                lambda: Some(lambda),
                kernel: Some(kernel.segments().to_vec()),
                seed: Some(seed),
                replicas: vec![0],
            };
            return Ok(sample);
        }
        horizon *= 1.25;
    }
}

/// Window length used to cut paths of `kernel`: `L(h)`, or `1/λ` when the
/// kernel is zero and any positive length works.
pub fn window_length(kernel: &Kernel, lambda: f64) -> f64 {
    if kernel.is_zero() {
        1.0 / lambda
    } else {
        kernel.support()
    }
}

/// `U^i_1 - S_{i-1}` for each window; these are i.i.d. `Exp(λ)`.
pub fn first_offsets(sample: &WindowSample) -> Result<Vec<f64>> {
    if sample.is_empty() {
        return Err(Error::InsufficientData("sample has no windows".into()));
    }
    Ok(sample
        .windows
        .iter()
        .map(RenewalWindow::first_offset)
        .collect())
}

/// `R_t = N_t - N̂_t` on a time grid, where `N̂_t` counts only jumps of
/// windows closed by `t`. Each residual lies between zero and the size of the
/// window in progress at `t`.
pub fn residual_trace(
    stream: &EventStream,
    sample: &WindowSample,
    grid: &[f64],
) -> Result<Vec<(f64, usize)>> {
    let closures: Vec<f64> = sample.windows.iter().map(RenewalWindow::end).collect();
    let mut cumulative = Vec::with_capacity(closures.len() + 1);
    cumulative.push(0usize);
    for w in &sample.windows {
        cumulative.push(cumulative.last().unwrap() + w.w());
    }
    grid.iter()
        .map(|&t| {
            if t > stream.horizon() {
                return Err(Error::BeyondHorizon {
                    time: t,
                    horizon: stream.horizon(),
                });
            }
            let closed = closures.partition_point(|&s| s <= t);
            Ok((t, stream.count_until(t) - cumulative[closed]))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hand_stream() -> EventStream {
        EventStream::new(vec![0.5, 0.7, 3.0], 10.0).unwrap()
    }

    #[test]
    fn sampled_windows_come_in_the_requested_number() {
        let k = Kernel::canceling(2.0, 1.0).unwrap();
        let s = sample_windows(&k, 2.0, 500, 7).unwrap();
        assert_eq!(s.len(), 500);
        assert_eq!(s.horizon(), s.windows()[499].end());
        assert_eq!(s.provenance.lambda, Some(2.0));
        let again = sample_windows(&k, 2.0, 500, 7).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn hand_traced_windows() {
        let s = decompose(&hand_stream(), 1.0).unwrap();
        assert_eq!(s.len(), 2);
        let w = s.windows();
        assert!((w[0].tau() - 1.7).abs() < 1e-15);
        assert_eq!(w[0].w(), 2);
        assert_eq!(w[0].first_offset(), 0.5);
        assert!((w[1].tau() - 2.3).abs() < 1e-15);
        assert_eq!(w[1].w(), 1);
        assert!((w[1].first_offset() - 1.3).abs() < 1e-15);
        assert_eq!(s.discarded_tail_count(), 0);
        let offsets = first_offsets(&s).unwrap();
        assert_eq!(offsets[0], 0.5);
        assert!((offsets[1] - 1.3).abs() < 1e-15);
    }

    #[test]
    fn empty_and_unconfirmed() {
        let empty = decompose(&EventStream::new(vec![], 10.0).unwrap(), 1.0).unwrap();
        assert!(empty.is_empty());
        assert_eq!(empty.discarded_tail_count(), 0);
        assert!(first_offsets(&empty).is_err());

        let late = decompose(&EventStream::new(vec![9.5], 10.0).unwrap(), 1.0).unwrap();
        assert!(late.is_empty());
        assert_eq!(late.discarded_tail_count(), 1);

        assert!(decompose(&hand_stream(), 0.0).is_err());
        assert!(decompose(&hand_stream(), -1.0).is_err());
    }

    #[test]
    fn gap_equal_to_support_keeps_window_open() {
        let s = decompose(&EventStream::new(vec![1.0, 2.0], 10.0).unwrap(), 1.0).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.windows()[0].w(), 2);
        assert_eq!(s.windows()[0].end(), 3.0);
    }

    #[test]
    fn closure_exactly_at_horizon_is_kept() {
        let s = decompose(&EventStream::new(vec![9.0], 10.0).unwrap(), 1.0).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.discarded_tail_count(), 0);
    }

    #[test]
    fn single_window_offsets() {
        let s = decompose(&EventStream::new(vec![0.25], 5.0).unwrap(), 1.0).unwrap();
        assert_eq!(first_offsets(&s).unwrap(), vec![0.25]);
    }

    #[test]
    fn residuals_hand_trace() {
        let stream = hand_stream();
        let s = decompose(&stream, 1.0).unwrap();
        let r = residual_trace(&stream, &s, &[0.4, 1.0, 1.7, 3.5, 4.0]).unwrap();
        assert_eq!(r, vec![(0.4, 0), (1.0, 2), (1.7, 0), (3.5, 1), (4.0, 0)]);
        assert!(residual_trace(&stream, &s, &[11.0]).is_err());
    }

    #[test]
    fn window_constructor_checks() {
        assert!(RenewalWindow::new(0.0, 2.0, vec![]).is_err());
        assert!(RenewalWindow::new(0.0, 2.0, vec![2.5]).is_err());
        let w = RenewalWindow::new(1.0, 3.0, vec![1.5, 2.0]).unwrap();
        assert_eq!(w.relative_times(), vec![0.5, 1.0]);
        assert_eq!(w.tau(), 2.0);
    }

    proptest! {
        #[test]
        fn structural_invariants(seed in 0u64..10_000, horizon in 5.0f64..80.0) {
            let k = Kernel::new([(0.0, 1.0, 0.5), (1.0, 2.0, -3.0)]).unwrap();
            let stream = simulate(&k, &SimConfig::new(1.0, horizon).seed(seed)).unwrap();
            let support = k.support();
            let s = decompose(&stream, support).unwrap();

            prop_assert_eq!(s.reconstruct(), stream.times().to_vec());
            let total: usize = s.counts().iter().sum();
            prop_assert_eq!(total + s.discarded_tail_count(), stream.len());
            prop_assert!(s.taus().iter().sum::<f64>() <= horizon + 1e-9);

            for w in s.windows() {
                let rel = w.relative_times();
                prop_assert_eq!(rel.len(), w.w());
                prop_assert_eq!(rel[0], w.first_offset());
                prop_assert!(rel.windows(2).all(|p| p[1] - p[0] <= support + 1e-12));
                prop_assert!((w.tau() - (rel[rel.len() - 1] + support)).abs() < 1e-9);
                // Nothing in (S_i - L, S_i].
                prop_assert_eq!(stream.count(w.end() - support + 1e-12, w.end()), 0);
            }

            let grid: Vec<f64> = (0..=40).map(|i| (horizon * i as f64 / 40.0).min(horizon)).collect();
            let residuals = residual_trace(&stream, &s, &grid).unwrap();
            for (t, r) in residuals {
                let in_progress = s
                    .windows()
                    .iter()
                    .find(|w| w.start() <= t && t < w.end())
                    .map(|w| w.w())
                    .unwrap_or(s.discarded_tail_count());
                prop_assert!(r <= in_progress, "t={} r={} bound={}", t, r, in_progress);
            }
        }
    }
}
