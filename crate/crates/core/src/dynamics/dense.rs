//! Continuous extension of accepted integration steps.

use crate::model::State;

/// Number of state components: `S`, `I` and the exposure integral `Y`.
pub const DIM: usize = 3;

/// Degree-4 continuous extension of one Dormand–Prince step on
/// `[t0, t0 + h]`, in Hairer's form
/// `y(θ) = r0 + θ(r1 + (1-θ)(r2 + θ(r3 + (1-θ) r4)))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenseSegment {
    pub t0: f64,
    pub h: f64,
    pub r: [[f64; DIM]; 5],
}

impl DenseSegment {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    #[inline]
    pub fn eval_component(&self, t: f64, c: usize) -> f64 {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let r = &self.r;
        r[0][c] + th * (r[1][c] + th1 * (r[2][c] + th * (r[3][c] + th1 * r[4][c])))
    }

    pub fn eval(&self, t: f64) -> [f64; DIM] {
        std::array::from_fn(|c| self.eval_component(t, c))
    }

    /// Time derivative of component `c` at `t`.
    pub fn derivative_component(&self, t: f64, c: usize) -> f64 {
        let th = (t - self.t0) / self.h;
        let r = &self.r;
        let d = r[1][c]
            + (1.0 - 2.0 * th) * r[2][c]
            + th * (2.0 - 3.0 * th) * r[3][c]
            + 2.0 * th * (1.0 - th) * (1.0 - 2.0 * th) * r[4][c];
        d / self.h
    }

    /// Exact integral of component `c` over `[a, b] ⊂ [t0, t1]` (three-point
    /// Gauss–Legendre is exact for the quartic extension).
    pub fn integral_component(&self, a: f64, b: f64, c: usize) -> f64 {
        const X: f64 = 0.774_596_669_241_483_4; // sqrt(3/5)
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        half * (5.0 / 9.0 * self.eval_component(mid - half * X, c)
            + 8.0 / 9.0 * self.eval_component(mid, c)
            + 5.0 / 9.0 * self.eval_component(mid + half * X, c))
    }

    fn shifted(&self, by: f64) -> Self {
        Self {
            t0: self.t0 + by,
            ..*self
        }
    }
}

/// Index of the segment containing `t` (clamped to the first/last one).
pub(crate) fn locate(segments: &[DenseSegment], t: f64) -> usize {
    let k = segments.partition_point(|s| s.t0 <= t);
    k.saturating_sub(1).min(segments.len().saturating_sub(1))
}

pub(crate) fn integral_over(segments: &[DenseSegment], a: f64, b: f64, c: usize) -> f64 {
    if segments.is_empty() || b <= a {
        return 0.0;
    }
    let mut total = 0.0;
    let mut k = locate(segments, a);
    while k < segments.len() {
        let seg = &segments[k];
        let lo = a.max(seg.t0);
        let hi = b.min(seg.t1());
        if hi > lo {
            total += seg.integral_component(lo, hi, c);
        }
        if seg.t1() >= b {
            break;
        }
        k += 1;
    }
    total
}

/// Solution tail used as initial data of a new run, shifted to end at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseHistory {
    segments: Vec<DenseSegment>,
}

impl DenseHistory {
    /// Segments covering `[t_end - span, t_end]`, re-based so `t_end ↦ 0`.
    pub fn from_segments(segments: &[DenseSegment], span: f64) -> Option<Self> {
        let last = segments.last()?;
        let t_end = last.t1();
        let first = locate(segments, t_end - span);
        if segments[first].t0 > t_end - span + 1e-12 * span.max(1.0) {
            return None;
        }
        Some(Self {
            segments: segments[first..]
                .iter()
                .map(|s| s.shifted(-t_end))
                .collect(),
        })
    }

    pub fn start(&self) -> f64 {
        self.segments.first().map(|s| s.t0).unwrap_or(0.0)
    }

    pub fn eval(&self, theta: f64) -> State {
        let seg = &self.segments[locate(&self.segments, theta)];
        State::new(seg.eval_component(theta, 0), seg.eval_component(theta, 1))
    }

    pub fn integral_i(&self, a: f64, b: f64) -> f64 {
        integral_over(&self.segments, a, b, 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quartic_segment() -> DenseSegment {
        DenseSegment {
            t0: 1.0,
            h: 0.5,
            r: [[0.3; DIM], [0.2; DIM], [-0.1; DIM], [0.05; DIM], [0.7; DIM]],
        }
    }

    #[test]
    fn endpoints_and_derivative() {
        let s = quartic_segment();
        assert!((s.eval_component(1.0, 0) - 0.3).abs() < 1e-15);
        assert!((s.eval_component(1.5, 0) - 0.5).abs() < 1e-15);
        let t = 1.2;
        let h = 1e-6;
        let fd = (s.eval_component(t + h, 1) - s.eval_component(t - h, 1)) / (2.0 * h);
        assert!((fd - s.derivative_component(t, 1)).abs() < 1e-7);
    }

    #[test]
    fn gauss_integral_matches_fine_trapezoid() {
        let s = quartic_segment();
        let n = 20000;
        let (a, b) = (1.1, 1.45);
        let dt = (b - a) / n as f64;
        let trap: f64 = (0..n)
            .map(|k| {
                let x = a + k as f64 * dt;
                0.5 * dt * (s.eval_component(x, 2) + s.eval_component(x + dt, 2))
            })
            .sum();
        assert!((trap - s.integral_component(a, b, 2)).abs() < 1e-10);
    }
}
