//! CSV tables for the quantities computed by the other modules.

use serde::Serialize;

use crate::coarse_grain::{FractionalMomentReport, SiteStateField, SurvivalRow};
use crate::error::{Error, Result};
use crate::free_energy::{ExponentFit, GapScan, TraceRow};
use crate::walk::DimensionFit;

/// Serializes rows with a header taken from the field names.
pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Output(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Output(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Output(e.to_string()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SeriesRow {
    pub n: usize,
    pub value: f64,
}

pub fn series_csv(points: &[(usize, f64)]) -> Result<String> {
    let rows: Vec<SeriesRow> = points.iter().map(|&(n, value)| SeriesRow { n, value }).collect();
    to_csv(&rows)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateRow {
    pub quantity: String,
    pub estimate: f64,
    pub stderr: f64,
    pub window_lo: f64,
    pub window_hi: f64,
}

/// `d_f`, `d_s` and `d_w` with regression standard errors; `d_w` by the
/// delta method from the other two.
pub fn dimension_rows(fit: &DimensionFit) -> Vec<EstimateRow> {
    let v = &fit.volume_fit;
    let r = &fit.return_fit;
    let df_se = v.slope_stderr;
    let ds_se = 2.0 * r.slope_stderr;
    let dw_se = fit.d_w_hat * ((df_se / fit.d_f_hat).powi(2) + (ds_se / fit.d_s_hat).powi(2)).sqrt();
    vec![
        EstimateRow {
            quantity: "d_f".into(),
            estimate: fit.d_f_hat,
            stderr: df_se,
            window_lo: v.x_lo.exp(),
            window_hi: v.x_hi.exp(),
        },
        EstimateRow {
            quantity: "d_s".into(),
            estimate: fit.d_s_hat,
            stderr: ds_se,
            window_lo: r.x_lo.exp(),
            window_hi: r.x_hi.exp(),
        },
        EstimateRow {
            quantity: "d_w".into(),
            estimate: fit.d_w_hat,
            stderr: dw_se,
            window_lo: r.x_lo.exp(),
            window_hi: r.x_hi.exp(),
        },
    ]
}

pub fn trace_csv(rows: &[TraceRow]) -> Result<String> {
    to_csv(rows)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScanRow {
    pub beta: f64,
    pub n: usize,
    pub replicas: usize,
    pub fq_hat: f64,
    pub fq_stderr: f64,
    pub fa: f64,
    pub gap: f64,
    pub gap_stderr: f64,
    pub used_in_fit: bool,
}

pub fn scan_rows(scan: &GapScan) -> Vec<ScanRow> {
    scan.estimates
        .iter()
        .zip(scan.usable())
        .map(|(e, used_in_fit)| ScanRow {
            beta: e.beta,
            n: e.n,
            replicas: e.replicas,
            fq_hat: e.fq_hat,
            fq_stderr: e.fq_stderr,
            fa: e.fa,
            gap: e.gap,
            gap_stderr: e.gap_stderr,
            used_in_fit,
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanSummary {
    pub graph: String,
    pub ds: f64,
    pub slope: f64,
    pub ci: [f64; 2],
    pub theoretical_exponent: f64,
}

pub fn scan_summary(scan: &GapScan, fit: &ExponentFit) -> ScanSummary {
    ScanSummary {
        graph: scan.graph.clone(),
        ds: scan.ds,
        slope: fit.slope,
        ci: [fit.ci_lo, fit.ci_hi],
        theoretical_exponent: scan.theoretical_exponent,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SiteStateRow {
    #[serde(rename = "I")]
    pub i: usize,
    #[serde(rename = "J")]
    pub j: usize,
    #[serde(rename = "X")]
    pub x: u8,
    pub wtilde_plus: f64,
    /// Empty at `J = 0`.
    pub wtilde_minus: Option<f64>,
}

pub fn site_state_rows(field: &SiteStateField) -> Vec<SiteStateRow> {
    field
        .records
        .iter()
        .map(|r| SiteStateRow {
            i: r.i,
            j: r.j,
            x: r.open as u8,
            wtilde_plus: r.log_ratio_up.exp(),
            wtilde_minus: r.log_ratio_down.map(f64::exp),
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SurvivalTableRow {
    pub rho: f64,
    pub horizon: usize,
    pub runs: u64,
    pub survival: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

pub fn survival_rows(rows: &[SurvivalRow]) -> Vec<SurvivalTableRow> {
    rows.iter()
        .map(|r| SurvivalTableRow {
            rho: r.rho,
            horizon: r.horizon,
            runs: r.runs,
            survival: r.survival,
            ci_lo: r.ci_lo,
            ci_hi: r.ci_hi,
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FractionalMomentRow {
    pub n: usize,
    pub beta: f64,
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
    #[serde(rename = "R")]
    pub r_split: f64,
    pub tail: f64,
    pub core: f64,
    pub total: f64,
}

pub fn fractional_moment_rows(reports: &[FractionalMomentReport]) -> Vec<FractionalMomentRow> {
    reports
        .iter()
        .map(|r| FractionalMomentRow {
            n: r.n,
            beta: r.beta,
            c1: r.c1,
            c2: r.c2,
            r_split: r.r_split,
            tail: r.tail,
            core: r.core,
            total: r.total,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_header_and_rows() {
        let s = series_csv(&[(1, 0.5), (2, 0.25)]).unwrap();
        assert_eq!(s, "n,value\n1,0.5\n2,0.25\n");
    }

    #[test]
    fn missing_minus_ratio_is_empty() {
        let rows = [SiteStateRow {
            i: 0,
            j: 0,
            x: 1,
            wtilde_plus: 0.5,
            wtilde_minus: None,
        }];
        assert_eq!(to_csv(&rows).unwrap(), "I,J,X,wtilde_plus,wtilde_minus\n0,0,1,0.5,\n");
    }
}
