//! Quantitative evaluation: labeled-region velocity statistics, filter
//! consistency against the chi-square bound, binary static/dynamic
//! classification ROC, and velocity error summaries.

use serde::Serialize;
use std::io::Write;
use std::sync::OnceLock;

use crate::grid::{CellIdx, DogmCell, Grid};
use crate::sensor::{FrameTruth, TruthLabel};

/// Mean x-velocity over the labeled region; cells without velocity
/// moments are excluded and counted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionMean {
    pub v_x: f64,
    pub cells_used: usize,
    pub cells_excluded: usize,
}

/// Unweighted mean of the cell x-velocities over the labeled cells.
/// `None` when no labeled cell has moments (the startup-delay marker).
pub fn region_mean_velocity(dogm: &Grid<DogmCell>, l_dyn: &[CellIdx]) -> Option<RegionMean> {
    let mut sum = 0.0;
    let mut used = 0usize;
    let mut excluded = 0usize;
    for &c in l_dyn {
        match dogm.get(c).moments {
            Some(m) => {
                sum += m.v_x;
                used += 1;
            }
            None => excluded += 1,
        }
    }
    if used == 0 {
        None
    } else {
        Some(RegionMean {
            v_x: sum / used as f64,
            cells_used: used,
            cells_excluded: excluded,
        })
    }
}

/// Combined variance of the region under a per-cell Gaussian mixture:
/// the average of (per-cell variance plus squared per-cell mean) minus the
/// squared region mean. `None` when no labeled cell has moments.
pub fn region_combined_variance(dogm: &Grid<DogmCell>, l_dyn: &[CellIdx]) -> Option<f64> {
    let mean = region_mean_velocity(dogm, l_dyn)?;
    let mut acc = 0.0;
    for &c in l_dyn {
        if let Some(m) = dogm.get(c).moments {
            acc += m.var_vx + m.v_x * m.v_x;
        }
    }
    Some(acc / mean.cells_used as f64 - mean.v_x * mean.v_x)
}

/// Normalized estimation error squared with its consistency verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Nees {
    pub eta: f64,
    pub consistent: bool,
}

/// NEES of a scalar estimate against the reference under the combined
/// variance, tested one-sided against the 95% chi-square quantile with one
/// degree of freedom. Zero variance with zero error counts as consistent
/// (the 0/0 convention); zero variance with any error is an infinite,
/// inconsistent statistic.
pub fn nees(v_bar: f64, v_ref: f64, combined_var: f64) -> Nees {
    let err = v_bar - v_ref;
    if combined_var <= 0.0 {
        if err == 0.0 {
            return Nees {
                eta: 0.0,
                consistent: true,
            };
        }
        return Nees {
            eta: f64::INFINITY,
            consistent: false,
        };
    }
    let eta = err * err / combined_var;
    Nees {
        eta,
        consistent: eta <= chi2_95_1dof(),
    }
}

/// One-sided 95% chi-square bound for one degree of freedom, computed by
/// the in-crate quantile routine.
pub fn chi2_95_1dof() -> f64 {
    static BOUND: OnceLock<f64> = OnceLock::new();
    *BOUND.get_or_init(|| chi2_quantile_1dof(0.95))
}

/// Quantile of the chi-square distribution with one degree of freedom:
/// bisection on the CDF, which for 1 dof is erf(sqrt(x/2)).
pub fn chi2_quantile_1dof(p: f64) -> f64 {
    assert!((0.0..1.0).contains(&p), "p must be in [0, 1)");
    if p == 0.0 {
        return 0.0;
    }
    let cdf = |x: f64| erf((x / 2.0).sqrt());
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    while cdf(hi) < p {
        hi *= 2.0;
        assert!(hi < 1e6, "quantile out of range");
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Error function by its Maclaurin series; converges fast for the argument
/// range the quantile bisection visits (|x| below about 3).
fn erf(x: f64) -> f64 {
    if x < 0.0 {
        return -erf(-x);
    }
    if x > 6.0 {
        return 1.0;
    }
    let two_over_sqrt_pi = 2.0 / std::f64::consts::PI.sqrt();
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 1u32;
    loop {
        term *= -x2 / n as f64;
        let contrib = term / (2 * n + 1) as f64;
        sum += contrib;
        if contrib.abs() < 1e-18 || n > 300 {
            break;
        }
        n += 1;
    }
    (two_over_sqrt_pi * sum).clamp(-1.0, 1.0)
}

/// One evaluated cell for the ROC: its static mass and truth class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocSample {
    pub m_s: f64,
    pub truth_static: bool,
}

/// Extract ROC samples from one frame: only cells labeled static or
/// dynamic in truth take part; free and unknown cells are excluded.
pub fn collect_roc_samples(dogm: &Grid<DogmCell>, truth: &FrameTruth) -> Vec<RocSample> {
    assert_eq!(dogm.spec, truth.labels.spec, "grids must align");
    truth
        .labels
        .iter()
        .filter_map(|(c, label)| match label {
            TruthLabel::Static => Some(RocSample {
                m_s: dogm.get(c).mass.m_s,
                truth_static: true,
            }),
            TruthLabel::Dynamic => Some(RocSample {
                m_s: dogm.get(c).mass.m_s,
                truth_static: false,
            }),
            _ => None,
        })
        .collect()
}

/// One operating point of the static/dynamic classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// Sweep the decision threshold: a cell is classified static when its
/// static mass reaches the threshold; static truth is the positive class.
/// Points come back sorted by threshold. `None` when either truth class
/// has no samples.
pub fn roc_curve(samples: &[RocSample], thresholds: &[f64]) -> Option<Vec<RocPoint>> {
    let positives = samples.iter().filter(|s| s.truth_static).count();
    let negatives = samples.len() - positives;
    if positives == 0 || negatives == 0 {
        return None;
    }
    let mut sorted: Vec<f64> = thresholds.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Some(
        sorted
            .iter()
            .map(|&threshold| {
                let tp = samples
                    .iter()
                    .filter(|s| s.truth_static && s.m_s >= threshold)
                    .count();
                let fp = samples
                    .iter()
                    .filter(|s| !s.truth_static && s.m_s >= threshold)
                    .count();
                RocPoint {
                    threshold,
                    tpr: tp as f64 / positives as f64,
                    fpr: fp as f64 / negatives as f64,
                }
            })
            .collect(),
    )
}

/// Evenly spaced thresholds covering [0, 1] plus one above 1, so the curve
/// always reaches both degenerate corners.
pub fn default_roc_thresholds(n: usize) -> Vec<f64> {
    let mut t: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    t.push(1.0 + 1e-9);
    t
}

/// Trapezoid area under the curve, anchored at (0,0) and (1,1).
pub fn roc_auc(points: &[RocPoint]) -> f64 {
    let mut pts: Vec<(f64, f64)> = points.iter().map(|p| (p.fpr, p.tpr)).collect();
    pts.push((0.0, 0.0));
    pts.push((1.0, 1.0));
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut auc = 0.0;
    for w in pts.windows(2) {
        let (x0, y0) = w[0];
        let (x1, y1) = w[1];
        auc += (x1 - x0) * (y0 + y1) / 2.0;
    }
    auc
}

/// Velocity error summary over a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VelocityError {
    /// Mean squared error, (m/s)².
    pub mse: f64,
    /// Root mean square error, m/s.
    pub rms: f64,
    /// Frames where both series were defined.
    pub frames_used: usize,
}

/// Mean squared error between two per-frame series; frames undefined on
/// either side are excluded pairwise. `None` when nothing overlaps.
pub fn velocity_mse(estimates: &[Option<f64>], reference: &[Option<f64>]) -> Option<VelocityError> {
    assert_eq!(
        estimates.len(),
        reference.len(),
        "series must be aligned on timestamps"
    );
    let mut acc = 0.0;
    let mut used = 0usize;
    for (e, r) in estimates.iter().zip(reference) {
        if let (Some(e), Some(r)) = (e, r) {
            let d = e - r;
            acc += d * d;
            used += 1;
        }
    }
    if used == 0 {
        return None;
    }
    let mse = acc / used as f64;
    Some(VelocityError {
        mse,
        rms: mse.sqrt(),
        frames_used: used,
    })
}

/// Per-frame metric row of a run.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FrameMetrics {
    pub frame: usize,
    pub t: f64,
    pub v_bar_x: Option<f64>,
    pub v_ref_x: Option<f64>,
    pub combined_std: Option<f64>,
    pub eta: Option<f64>,
    pub consistent: Option<bool>,
    pub cluster_count: usize,
}

/// CSV header matching `write_metrics_csv_row`.
pub const METRICS_CSV_HEADER: &str =
    "frame,t,v_bar_x,v_ref_x,combined_std,eta,consistent,cluster_count";

pub fn write_metrics_csv_row<W: Write>(out: &mut W, m: &FrameMetrics) -> std::io::Result<()> {
    fn opt(v: Option<f64>) -> String {
        v.map(|x| format!("{x:.6}")).unwrap_or_default()
    }
    writeln!(
        out,
        "{},{:.3},{},{},{},{},{},{}",
        m.frame,
        m.t,
        opt(m.v_bar_x),
        opt(m.v_ref_x),
        opt(m.combined_std),
        opt(m.eta),
        m.consistent.map(|c| c.to_string()).unwrap_or_default(),
        m.cluster_count
    )
}

/// CSV header for ROC exports.
pub const ROC_CSV_HEADER: &str = "threshold,fpr,tpr";

pub fn write_roc_csv<W: Write>(out: &mut W, points: &[RocPoint]) -> std::io::Result<()> {
    writeln!(out, "{ROC_CSV_HEADER}")?;
    for p in points {
        writeln!(out, "{:.6},{:.6},{:.6}", p.threshold, p.fpr, p.tpr)?;
    }
    Ok(())
}
