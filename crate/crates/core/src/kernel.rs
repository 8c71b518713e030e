//! Piecewise-constant signed reproduction kernels.
//!
//! A kernel `h` is a finite list of half-open segments `[start, end)` on which
//! it takes a constant (possibly negative) value. Positive values excite the
//! process, negative values inhibit it. The empty kernel is `h ≡ 0`, i.e. a
//! homogeneous Poisson process.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One constant piece of a kernel: `h(t) = value` for `t` in `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub value: f64,
}

impl Segment {
    pub fn new(start: f64, end: f64, value: f64) -> Self {
        Self { start, end, value }
    }

    fn len(&self) -> f64 {
        self.end - self.start
    }
}

impl From<(f64, f64, f64)> for Segment {
    fn from((start, end, value): (f64, f64, f64)) -> Self {
        Self { start, end, value }
    }
}

/// A validated kernel with its cached scalar functionals.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    segments: Vec<Segment>,
    support: f64,
    positive_l1: f64,
    l1: f64,
    max_positive: f64,
}

impl Kernel {
    /// Builds a kernel from segments given in any order.
    ///
    /// Segments with value zero are dropped so that they do not stretch the
    /// support length. The positive part must have L¹ norm strictly below one.
    pub fn new<I, S>(segments: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<Segment>,
    {
        let mut segs: Vec<Segment> = segments.into_iter().map(Into::into).collect();
        for s in &segs {
            if !(s.start.is_finite() && s.end.is_finite() && s.value.is_finite()) {
                return Err(Error::InvalidKernel(format!("non-finite segment {s:?}")));
            }
            if s.start < 0.0 {
                return Err(Error::InvalidKernel(format!(
                    "segment starts at negative time {}",
                    s.start
                )));
            }
            if s.end <= s.start {
                return Err(Error::InvalidKernel(format!(
                    "segment end {} is not after start {}",
                    s.end, s.start
                )));
            }
        }
        segs.sort_by(|a, b| a.start.total_cmp(&b.start));
        for pair in segs.windows(2) {
            if pair[1].start < pair[0].end {
                return Err(Error::InvalidKernel(format!(
                    "segments [{}, {}) and [{}, {}) overlap",
                    pair[0].start, pair[0].end, pair[1].start, pair[1].end
                )));
            }
        }
        segs.retain(|s| s.value != 0.0);

        let positive_l1: f64 = segs
            .iter()
            .filter(|s| s.value > 0.0)
            .map(|s| s.value * s.len())
            .sum();
        if positive_l1 >= 1.0 {
            return Err(Error::InvalidKernel(format!(
                "positive part has L1 norm {positive_l1} >= 1"
            )));
        }
        let l1 = segs.iter().map(|s| s.value.abs() * s.len()).sum();
        let support = segs.iter().map(|s| s.end).fold(0.0, f64::max);
        let max_positive = segs.iter().map(|s| s.value).fold(0.0, f64::max);

        Ok(Self {
            segments: segs,
            support,
            positive_l1,
            l1,
            max_positive,
        })
    }

    /// `h ≡ 0`.
    pub fn zero() -> Self {
        Self {
            segments: Vec::new(),
            support: 0.0,
            positive_l1: 0.0,
            l1: 0.0,
            max_positive: 0.0,
        }
    }

    /// The canceling kernel `-λ·1[0, A)`: the intensity drops to zero for a
    /// duration `A` after every jump.
    pub fn canceling(lambda: f64, a: f64) -> Result<Self> {
        Self::new([(0.0, a, -lambda)])
    }

    /// The delayed canceling kernel `-λ·1[r, r + A)`.
    pub fn delayed_canceling(lambda: f64, r: f64, a: f64) -> Result<Self> {
        Self::new([(r, r + a, -lambda)])
    }

    /// Constant excitation `height·1[0, width)`.
    pub fn boxcar(height: f64, width: f64) -> Result<Self> {
        Self::new([(0.0, width, height)])
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// `L(h)`, the right end of the support (0 for the empty kernel).
    pub fn support(&self) -> f64 {
        self.support
    }

    /// `‖h⁺‖₁`.
    pub fn positive_l1(&self) -> f64 {
        self.positive_l1
    }

    /// `‖h‖₁`.
    pub fn l1(&self) -> f64 {
        self.l1
    }

    /// `sup h⁺`, 0 when the kernel has no positive part.
    pub fn max_positive(&self) -> f64 {
        self.max_positive
    }

    pub fn is_zero(&self) -> bool {
        self.segments.is_empty()
    }

    /// True when `h ≤ 0` everywhere (pure inhibition, including `h ≡ 0`).
    pub fn is_nonpositive(&self) -> bool {
        self.segments.iter().all(|s| s.value <= 0.0)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.segments.iter().all(|s| s.value >= 0.0)
    }

    /// True for kernels with `h ≤ -λ` on all of `[0, L(h))`: every jump
    /// silences the process until the support has elapsed, so each renewal
    /// window holds exactly one jump.
    pub fn is_canceling(&self, lambda: f64) -> bool {
        if self.is_zero() {
            return false;
        }
        let mut covered = 0.0;
        for s in &self.segments {
            if s.start > covered || s.value > -lambda {
                return false;
            }
            covered = s.end;
        }
        covered >= self.support
    }

    /// `h(t)`; zero outside the support.
    pub fn eval(&self, t: f64) -> f64 {
        if !(t >= 0.0) || t >= self.support {
            return 0.0;
        }
        // Last segment whose start is <= t.
        let idx = self.segments.partition_point(|s| s.start <= t);
        if idx == 0 {
            return 0.0;
        }
        let s = &self.segments[idx - 1];
        if t < s.end {
            s.value
        } else {
            0.0
        }
    }

    /// `h⁺ = max(h, 0)`.
    ///
    /// The support of the result can be shorter than `L(h)`; renewal windows
    /// of a coupled `h⁺` process must still be cut with the original `L(h)`.
    pub fn positive_part(&self) -> Kernel {
        let segments: Vec<Segment> = self
            .segments
            .iter()
            .copied()
            .filter(|s| s.value > 0.0)
            .collect();
        let support = segments.iter().map(|s| s.end).fold(0.0, f64::max);
        Kernel {
            segments,
            support,
            positive_l1: self.positive_l1,
            l1: self.positive_l1,
            max_positive: self.max_positive,
        }
    }

    /// Pointwise maximum of the positive parts, `max_i h_i⁺`.
    ///
    /// Fails if the envelope is no longer subcritical.
    pub fn positive_envelope<'a>(kernels: impl IntoIterator<Item = &'a Kernel>) -> Result<Kernel> {
        let kernels: Vec<&Kernel> = kernels.into_iter().collect();
        let mut cuts: Vec<f64> = kernels
            .iter()
            .flat_map(|k| k.segments.iter())
            .filter(|s| s.value > 0.0)
            .flat_map(|s| [s.start, s.end])
            .collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let segments = cuts.windows(2).filter_map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            let value = kernels.iter().map(|k| k.eval(mid)).fold(0.0, f64::max);
            (value > 0.0).then_some(Segment::new(w[0], w[1], value))
        });
        Kernel::new(segments.collect::<Vec<_>>())
    }

    /// True when `self ≥ 0` and `self ≥ other⁺` pointwise.
    pub fn dominates(&self, other: &Kernel) -> bool {
        if !self.is_nonnegative() {
            return false;
        }
        let mut cuts: Vec<f64> = self
            .segments
            .iter()
            .chain(other.segments.iter())
            .flat_map(|s| [s.start, s.end])
            .collect();
        cuts.push(0.0);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        cuts.windows(2).all(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            self.eval(mid) >= other.eval(mid).max(0.0)
        })
    }
}
