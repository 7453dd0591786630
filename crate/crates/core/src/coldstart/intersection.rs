use super::breakpoint::fit_line;
use super::curves::QualityCurve;
use crate::error::{Error, Result};

/// Where `y = a + b ln t`, fitted to the current-quality series, reaches the
/// mean reference quality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntersectionReport {
    pub log_a: f64,
    pub log_b: f64,
    pub reference_level: f64,
    pub t_cross: f64,
    /// `t_cross` lies outside the observed `t` range.
    pub extrapolated: bool,
}

impl IntersectionReport {
    pub fn to_key_values(&self) -> String {
        format!(
            "log_a={}\nlog_b={}\nreference_level={}\nt_cross={}\nextrapolated={}\n",
            self.log_a, self.log_b, self.reference_level, self.t_cross, self.extrapolated
        )
    }
}

pub fn regression_intersection(curve: &QualityCurve) -> Result<IntersectionReport> {
    let pts = &curve.points;
    if pts.len() < 3 {
        return Err(Error::arg("an intersection needs at least 3 curve points"));
    }
    if pts.iter().any(|p| p.t == 0) {
        return Err(Error::arg("log fit needs t >= 1"));
    }
    let xs: Vec<f64> = pts.iter().map(|p| (p.t as f64).ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.current_quality_mean).collect();
    let fit = fit_line(&xs, &ys)?;

    // A constant series can leave a slope of rounding size either sign.
    let scale = ys.iter().fold(1.0f64, |s, y| s.max(y.abs()));
    if fit.slope <= 1e-12 * scale {
        return Err(Error::NoIntersection { slope: fit.slope });
    }

    let reference_level =
        pts.iter().map(|p| p.reference_quality_mean).sum::<f64>() / pts.len() as f64;
    let t_cross = ((reference_level - fit.intercept) / fit.slope).exp();
    let (lo, hi) = (pts[0].t as f64, pts[pts.len() - 1].t as f64);
    Ok(IntersectionReport {
        log_a: fit.intercept,
        log_b: fit.slope,
        reference_level,
        t_cross,
        extrapolated: !(lo..=hi).contains(&t_cross),
    })
}
