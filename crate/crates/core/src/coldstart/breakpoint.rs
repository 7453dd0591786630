//! Where a success curve's fast early growth turns linear.

use std::fmt;
use std::str::FromStr;

use super::curves::SuccessCurve;
use crate::error::{Error, Result};

/// Points each segment needs on its side of a candidate breakpoint,
/// the breakpoint itself included.
pub const MIN_SEGMENT_POINTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BreakpointMethod {
    /// Exhaustive scan minimizing the summed SSE of two OLS lines that share
    /// the breakpoint.
    SegmentedLinear,
    /// Largest distance between the min-max normalized curve and the chord
    /// joining its endpoints.
    Kneedle,
}

impl fmt::Display for BreakpointMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BreakpointMethod::SegmentedLinear => "segmented_linear",
            BreakpointMethod::Kneedle => "kneedle",
        })
    }
}

impl FromStr for BreakpointMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "segmented_linear" => Ok(BreakpointMethod::SegmentedLinear),
            "kneedle" => Ok(BreakpointMethod::Kneedle),
            other => Err(Error::arg(format!("unknown breakpoint method {other:?}"))),
        }
    }
}

/// Ordinary least squares line `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    pub sse: f64,
    pub n: usize,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::arg("a line fit needs at least two paired points"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        return Err(Error::arg(
            "a line fit needs at least two distinct x values",
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    Ok(LineFit {
        intercept,
        slope,
        sse,
        n: xs.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BreakpointReport {
    pub t_star: usize,
    pub method: BreakpointMethod,
    /// Fit over `t <= t_star`.
    pub left_fit: LineFit,
    /// Fit over `t >= t_star`.
    pub right_fit: LineFit,
    pub total_sse: f64,
    pub search_range: (usize, usize),
}

impl BreakpointReport {
    /// `key=value` lines.
    pub fn to_key_values(&self) -> String {
        format!(
            "t_star={}\nmethod={}\nleft_slope={}\nleft_intercept={}\nleft_sse={}\n\
             right_slope={}\nright_intercept={}\nright_sse={}\ntotal_sse={}\nt_min={}\nt_max={}\n",
            self.t_star,
            self.method,
            self.left_fit.slope,
            self.left_fit.intercept,
            self.left_fit.sse,
            self.right_fit.slope,
            self.right_fit.intercept,
            self.right_fit.sse,
            self.total_sse,
            self.search_range.0,
            self.search_range.1,
        )
    }
}

/// Breakpoint of the success curve restricted to `t_min..=t_max`. Candidates
/// lie strictly inside the range; ties go to the smallest `t`.
pub fn detect_breakpoint(
    curve: &SuccessCurve,
    method: BreakpointMethod,
    t_min: usize,
    t_max: usize,
) -> Result<BreakpointReport> {
    detect_breakpoint_xy(&curve.ts(), &curve.fractions(), method, t_min, t_max)
}

/// [`detect_breakpoint`] over raw `(t, y)` series; `ts` strictly increasing.
pub fn detect_breakpoint_xy(
    ts: &[usize],
    ys: &[f64],
    method: BreakpointMethod,
    t_min: usize,
    t_max: usize,
) -> Result<BreakpointReport> {
    if ts.len() != ys.len() {
        return Err(Error::arg("t and y series differ in length"));
    }
    if ts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::arg("t values must be strictly increasing"));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = ts
        .iter()
        .zip(ys)
        .filter(|(&t, _)| (t_min..=t_max).contains(&t))
        .map(|(&t, &y)| (t as f64, y))
        .unzip();
    let n = xs.len();
    let candidates: Vec<usize> = (0..n)
        .filter(|&i| {
            let t = xs[i] as usize;
            t > t_min && t < t_max && i + 1 >= MIN_SEGMENT_POINTS && n - i >= MIN_SEGMENT_POINTS
        })
        .collect();
    if candidates.is_empty() {
        return Err(Error::arg(format!(
            "{n} points in [{t_min}, {t_max}]; need {MIN_SEGMENT_POINTS} on each side of a breakpoint"
        )));
    }

    let split_fit = |i: usize| -> Result<(LineFit, LineFit)> {
        Ok((
            fit_line(&xs[..=i], &ys[..=i])?,
            fit_line(&xs[i..], &ys[i..])?,
        ))
    };

    let best = match method {
        BreakpointMethod::SegmentedLinear => {
            let mut best: Option<(usize, f64)> = None;
            for &i in &candidates {
                let (l, r) = split_fit(i)?;
                let sse = l.sse + r.sse;
                if best.is_none_or(|(_, b)| sse < b) {
                    best = Some((i, sse));
                }
            }
            best.expect("candidates non-empty").0
        }
        BreakpointMethod::Kneedle => {
            let (x0, x1) = (xs[0], xs[n - 1]);
            let (ylo, yhi) = ys
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &y| {
                    (lo.min(y), hi.max(y))
                });
            let yspan = if yhi > ylo { yhi - ylo } else { 1.0 };
            let norm_y = |y: f64| (y - ylo) / yspan;
            let (c0, c1) = (norm_y(ys[0]), norm_y(ys[n - 1]));
            let mut best: Option<(usize, f64)> = None;
            for &i in &candidates {
                let xn = (xs[i] - x0) / (x1 - x0);
                let dist = (norm_y(ys[i]) - (c0 + (c1 - c0) * xn)).abs();
                if best.is_none_or(|(_, b)| dist > b) {
                    best = Some((i, dist));
                }
            }
            best.expect("candidates non-empty").0
        }
    };

    let (left_fit, right_fit) = split_fit(best)?;
    Ok(BreakpointReport {
        t_star: xs[best] as usize,
        method,
        left_fit,
        right_fit,
        total_sse: left_fit.sse + right_fit.sse,
        search_range: (t_min, t_max),
    })
}
