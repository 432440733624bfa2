//! Locating and classifying non-analytic points of a rate function.
//!
//! Candidates are local maxima of the discrete second difference of `Γ` on the
//! grid. Each candidate is refined by repeatedly halving a bracket around the
//! point of largest second difference. The discontinuity at the refined point
//! is then estimated from one-sided linear extrapolations over steps `dt/4`
//! and `dt/8`.
//!
//! * **Jump**: both estimates exceed `delta_jump` and some entanglement level
//!   sits on opposite sides of 1/2 a quarter grid step before and after the point.
//! * **Cusp**: the finer estimate is below `delta_jump` but the one-sided
//!   slopes at a quarter grid step differ by more than `delta_slope`.
//!
//! Anything else that does not shrink like a continuous function is reported as
//! unclassified; smooth candidates are dropped.

use rayon::prelude::*;

use crate::entanglement::{EntanglementSnapshot, RATE_CAP};
use crate::series::SeriesBundle;
use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectorConfig {
    pub eps_deg: f64,
    pub delta_jump: f64,
    pub delta_slope: f64,
    /// Maximum number of bracket halvings.
    pub depth: usize,
    /// Target width of the final bracket.
    pub time_tol: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            eps_deg: 1e-9,
            delta_jump: 0.01,
            delta_slope: 0.5,
            depth: 12,
            time_tol: 1e-4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TransitionKind {
    Jump,
    Cusp,
}

impl TransitionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TransitionKind::Jump => "jump",
            TransitionKind::Cusp => "cusp",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransitionEvent {
    pub t_c: f64,
    pub kind: TransitionKind,
    pub ky: Option<f64>,
    /// Limits of the rate from the left / right of `t_c`.
    pub left_rate: f64,
    pub right_rate: f64,
    /// One-sided slopes at a quarter grid step.
    pub left_slope: f64,
    pub right_slope: f64,
    /// Levels (indices into the left spectrum) that pass through 1/2 at
    /// `t_c`. Always nonempty for jumps; a cusp may carry levels that touch 1/2
    /// without changing the rate discontinuously.
    pub crossing_levels: Vec<usize>,
}

impl TransitionEvent {
    pub fn jump_size(&self) -> f64 {
        (self.right_rate - self.left_rate).abs()
    }
}

/// A candidate neither criterion accepted.
#[derive(Clone, Debug, PartialEq)]
pub struct Unclassified {
    pub t: f64,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Detection {
    pub events: Vec<TransitionEvent>,
    pub unclassified: Vec<Unclassified>,
}

/// Rate (and optionally the spectrum) at an arbitrary time.
#[derive(Clone, Debug)]
pub struct Probe {
    /// Finite rate; exact zeros should already be capped.
    pub rate: f64,
    pub degenerate: bool,
    pub snapshot: Option<EntanglementSnapshot>,
}

/// Indices of `left` levels that move to the other side of 1/2, judged by the
/// weight of each left eigenvector inside the right spectrum's `ξ ≥ 1/2`
/// subspace.
pub fn level_crossings(left: &EntanglementSnapshot, right: &EntanglementSnapshot) -> Vec<usize> {
    // sides of 1/2 without the degeneracy window, so a pair drifting out of
    // the window is not mistaken for a crossing
    let above = |s: &EntanglementSnapshot| s.xs.iter().filter(|&&x| x >= 0.5).count();
    let (above_l, above_r) = (above(left), above(right));
    let overlaps = left.vectors.adjoint() * right.vectors.columns(0, above_r);
    (0..left.dim())
        .filter(|&i| {
            let weight: f64 = overlaps.row(i).iter().map(|z| z.norm_sqr()).sum();
            if i < above_l {
                weight < 0.5
            } else {
                weight > 0.5
            }
        })
        .collect()
}

/// Detect on a bundle's `Γ` column.
pub fn detect_transitions<F>(
    series: &SeriesBundle,
    refine: F,
    config: &DetectorConfig,
) -> Result<Detection>
where
    F: Fn(f64) -> Result<Probe> + Sync,
{
    let times = series.grid();
    let rates: Vec<f64> = series.gammas().iter().map(|g| g.min(RATE_CAP)).collect();
    detect_in_rates(&times, &rates, refine, config, None)
}

/// Grid indices whose second difference is a local maximum above threshold.
fn candidates(rates: &[f64], dt: f64, config: &DetectorConfig) -> Vec<usize> {
    let n = rates.len();
    if n < 5 {
        return Vec::new();
    }
    let threshold = 0.5 * config.delta_jump.min(config.delta_slope * dt);
    let second: Vec<f64> = (0..n)
        .map(|i| {
            if i == 0 || i + 1 == n {
                0.0
            } else {
                (rates[i + 1] - 2.0 * rates[i] + rates[i - 1]).abs()
            }
        })
        .collect();
    let mut picked: Vec<usize> = Vec::new();
    for i in 1..n - 1 {
        if second[i] < threshold || second[i] < second[i - 1] || second[i] < second[i + 1] {
            continue;
        }
        match picked.last() {
            Some(&prev) if i - prev <= 2 => {
                if second[i] > second[prev] {
                    *picked.last_mut().unwrap() = i;
                }
            }
            _ => picked.push(i),
        }
    }
    picked
}

enum Outcome {
    Event(TransitionEvent),
    Unclassified(Unclassified),
    Smooth,
}

/// Detect on raw `(t, Γ)` arrays. `ky` labels the produced events.
pub fn detect_in_rates<F>(
    times: &[f64],
    rates: &[f64],
    refine: F,
    config: &DetectorConfig,
    ky: Option<f64>,
) -> Result<Detection>
where
    F: Fn(f64) -> Result<Probe> + Sync,
{
    assert_eq!(times.len(), rates.len(), "series length mismatch");
    if times.len() < 5 {
        return Ok(Detection::default());
    }
    let dt = times[1] - times[0];
    let found = candidates(rates, dt, config);
    let outcomes = found
        .par_iter()
        .map(|&i| classify(times[i], dt, &refine, config, ky))
        .collect::<Result<Vec<_>>>()?;

    let mut detection = Detection::default();
    for outcome in outcomes {
        match outcome {
            Outcome::Event(e) => {
                // two candidates may refine onto the same point
                let dup = detection
                    .events
                    .last()
                    .is_some_and(|p| (p.t_c - e.t_c).abs() < dt && p.kind == e.kind);
                if !dup {
                    detection.events.push(e);
                }
            }
            Outcome::Unclassified(u) => detection.unclassified.push(u),
            Outcome::Smooth => {}
        }
    }
    Ok(detection)
}

/// Probe that steps off exact degeneracies.
fn probe_at<F>(refine: &F, t: f64, nudge: f64) -> Result<Probe>
where
    F: Fn(f64) -> Result<Probe>,
{
    let p = refine(t)?;
    if !p.degenerate {
        return Ok(p);
    }
    refine(t + nudge)
}

fn classify<F>(
    center: f64,
    dt: f64,
    refine: &F,
    config: &DetectorConfig,
    ky: Option<f64>,
) -> Result<Outcome>
where
    F: Fn(f64) -> Result<Probe>,
{
    let nudge = 0.01 * config.time_tol;
    let eval = |t: f64| probe_at(refine, t, nudge);

    let mut p = center;
    let mut half = dt;
    let mut left = eval(p - half)?;
    let mut mid = eval(p)?;
    let mut right = eval(p + half)?;

    for _ in 0..config.depth {
        if 2.0 * half <= config.time_tol {
            break;
        }
        let q_left = eval(p - half / 2.0)?;
        let q_right = eval(p + half / 2.0)?;
        let pts = [&left, &q_left, &mid, &q_right, &right];
        let second = |j: usize| (pts[j - 1].rate - 2.0 * pts[j].rate + pts[j + 1].rate).abs();
        let best = (1..4)
            .max_by(|&a, &b| second(a).total_cmp(&second(b)))
            .unwrap();
        let (new_left, new_mid, new_right) = match best {
            1 => (left, q_left, mid),
            2 => (q_left, mid, q_right),
            _ => (mid, q_right, right),
        };
        p += (best as f64 - 2.0) * half / 2.0;
        half /= 2.0;
        left = new_left;
        mid = new_mid;
        right = new_right;
    }
    drop((left, right));

    // Γ at p ± h for h = dt/8, dt/4, dt/2
    let h = dt / 8.0;
    let mut below = Vec::with_capacity(3);
    let mut above = Vec::with_capacity(3);
    for k in [1.0, 2.0, 4.0] {
        below.push(eval(p - k * h)?);
        above.push(eval(p + k * h)?);
    }
    // one-sided linear extrapolation to p removes the slope contribution, so a
    // cusp leaves only an O(h²) residue
    let limits = |i: usize, j: usize| {
        let l = 2.0 * below[i].rate - below[j].rate;
        let r = 2.0 * above[i].rate - above[j].rate;
        (l, r)
    };
    let (l_fine, r_fine) = limits(0, 1);
    let (l_coarse, r_coarse) = limits(1, 2);
    let gap_fine = (r_fine - l_fine).abs();
    let gap_coarse = (r_coarse - l_coarse).abs();

    // a quarter step out the levels are clear of 1/2 even for narrow
    // avoided crossings
    let quarter = 2.0 * h;
    let left_slope = (mid.rate - below[1].rate) / quarter;
    let right_slope = (above[1].rate - mid.rate) / quarter;

    let crossing = match (&below[1].snapshot, &above[1].snapshot) {
        (Some(l), Some(r)) => level_crossings(l, r),
        _ => Vec::new(),
    };
    if gap_coarse > config.delta_jump && gap_fine > config.delta_jump {
        if crossing.is_empty() {
            return Ok(Outcome::Unclassified(Unclassified {
                t: p,
                reason: format!("persistent jump {gap_fine:.3e} without a level crossing"),
            }));
        }
        return Ok(Outcome::Event(TransitionEvent {
            t_c: p,
            kind: TransitionKind::Jump,
            ky,
            left_rate: l_fine,
            right_rate: r_fine,
            left_slope,
            right_slope,
            crossing_levels: crossing,
        }));
    }

    if gap_fine > config.delta_jump {
        return Ok(Outcome::Unclassified(Unclassified {
            t: p,
            reason: format!(
                "jump estimate {gap_coarse:.3e} -> {gap_fine:.3e} does not settle about {}",
                config.delta_jump
            ),
        }));
    }
    if (right_slope - left_slope).abs() > config.delta_slope {
        return Ok(Outcome::Event(TransitionEvent {
            t_c: p,
            kind: TransitionKind::Cusp,
            ky,
            left_rate: l_fine,
            right_rate: r_fine,
            left_slope,
            right_slope,
            crossing_levels: crossing,
        }));
    }
    Ok(Outcome::Smooth)
}
