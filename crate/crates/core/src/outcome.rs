//! Residual-HFO outcome prediction and cohort metrics with exact binomial
//! confidence intervals.

use serde::Serialize;
use statrs::distribution::{Beta, ContinuousCDF};
use thiserror::Error;

/// Channels at or above this post-resection rate carry residual HFOs.
pub const RESIDUAL_RATE_PER_MIN: f64 = 1.0;

#[derive(Debug, Error)]
pub enum OutcomeError {
    #[error("negative HFO rate {0}")]
    NegativeRate(f64),
    #[error("ILAE grade {0} out of range 1..=6")]
    InvalidIlae(u8),
    #[error("invalid counts: successes={successes}, trials={trials}")]
    InvalidCounts { successes: usize, trials: usize },
    #[error("confidence level {0} outside (0, 1)")]
    InvalidLevel(f64),
    #[error("empty cohort")]
    EmptyCohort,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeizureOutcome {
    SeizureFree,
    Recurrence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PredictionClass {
    Tp,
    Tn,
    Fp,
    Fn,
}

/// Actual post-surgical outcome of one patient.
#[derive(Debug, Clone)]
pub struct PatientOutcome {
    pub patient_id: String,
    pub ilae: u8,
    pub followup_months: u32,
}

impl PatientOutcome {
    pub fn validate(&self) -> Result<(), OutcomeError> {
        if (1..=6).contains(&self.ilae) {
            Ok(())
        } else {
            Err(OutcomeError::InvalidIlae(self.ilae))
        }
    }

    /// ILAE 1 counts as seizure freedom, anything above as recurrence.
    pub fn actual(&self) -> SeizureOutcome {
        if self.ilae == 1 {
            SeizureOutcome::SeizureFree
        } else {
            SeizureOutcome::Recurrence
        }
    }
}

/// Per-patient decision row.
#[derive(Debug, Clone, Serialize)]
pub struct OutcomePrediction {
    pub patient_id: String,
    pub max_post_rate: f64,
    pub residual_hfo: bool,
    pub predicted: SeizureOutcome,
    pub actual: SeizureOutcome,
    pub class: PredictionClass,
}

/// Predicts recurrence iff the maximum post-resection rate reaches
/// 1 HFO/min (boundary inclusive).
pub fn predict(max_post_rate: f64) -> Result<SeizureOutcome, OutcomeError> {
    if max_post_rate < 0.0 || !max_post_rate.is_finite() {
        return Err(OutcomeError::NegativeRate(max_post_rate));
    }
    Ok(if max_post_rate >= RESIDUAL_RATE_PER_MIN {
        SeizureOutcome::Recurrence
    } else {
        SeizureOutcome::SeizureFree
    })
}

pub fn classify(predicted: SeizureOutcome, actual: SeizureOutcome) -> PredictionClass {
    use SeizureOutcome::*;
    match (predicted, actual) {
        (Recurrence, Recurrence) => PredictionClass::Tp,
        (SeizureFree, SeizureFree) => PredictionClass::Tn,
        (Recurrence, SeizureFree) => PredictionClass::Fp,
        (SeizureFree, Recurrence) => PredictionClass::Fn,
    }
}

/// Builds the full decision row for one patient. Warns when the rate comes
/// from less than a minute of analyzed recording.
pub fn predict_patient(
    outcome: &PatientOutcome,
    max_post_rate: f64,
    analyzed_minutes: f64,
) -> Result<OutcomePrediction, OutcomeError> {
    outcome.validate()?;
    if analyzed_minutes < 1.0 {
        log::warn!(
            "patient {}: post-resection rate computed from only {:.2} min of data",
            outcome.patient_id,
            analyzed_minutes
        );
    }
    let predicted = predict(max_post_rate)?;
    let actual = outcome.actual();
    Ok(OutcomePrediction {
        patient_id: outcome.patient_id.clone(),
        max_post_rate,
        residual_hfo: max_post_rate >= RESIDUAL_RATE_PER_MIN,
        predicted,
        actual,
        class: classify(predicted, actual),
    })
}

/// Cohort-level counts and metrics. Metrics whose denominator is zero are
/// absent rather than zero.
#[derive(Debug, Clone, Serialize)]
pub struct CohortMetrics {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ppv: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub npv: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sensitivity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub specificity: Option<f64>,
    pub accuracy: f64,
    pub accuracy_ci: (f64, f64),
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    if den == 0 {
        None
    } else {
        Some(num as f64 / den as f64)
    }
}

pub fn cohort_metrics(classes: &[PredictionClass]) -> Result<CohortMetrics, OutcomeError> {
    if classes.is_empty() {
        return Err(OutcomeError::EmptyCohort);
    }
    let count = |c: PredictionClass| classes.iter().filter(|x| **x == c).count();
    let (tp, tn, fp, fn_) = (
        count(PredictionClass::Tp),
        count(PredictionClass::Tn),
        count(PredictionClass::Fp),
        count(PredictionClass::Fn),
    );
    let total = tp + tn + fp + fn_;
    let correct = tp + tn;
    Ok(CohortMetrics {
        tp,
        tn,
        fp,
        fn_,
        ppv: ratio(tp, tp + fp),
        npv: ratio(tn, tn + fn_),
        sensitivity: ratio(tp, tp + fn_),
        specificity: ratio(tn, tn + fp),
        accuracy: correct as f64 / total as f64,
        accuracy_ci: binomial_ci(correct, total, 0.95)?,
    })
}

/// Clopper-Pearson exact binomial confidence interval from Beta quantiles.
/// The degenerate edges are closed form: low = 0 when no successes, high = 1
/// when all trials succeed.
pub fn binomial_ci(successes: usize, trials: usize, level: f64) -> Result<(f64, f64), OutcomeError> {
    if trials == 0 || successes > trials {
        return Err(OutcomeError::InvalidCounts { successes, trials });
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(OutcomeError::InvalidLevel(level));
    }
    let alpha = 1.0 - level;
    let s = successes as f64;
    let n = trials as f64;
    let low = if successes == 0 {
        0.0
    } else {
        Beta::new(s, n - s + 1.0).expect("valid beta").inverse_cdf(alpha / 2.0)
    };
    let high = if successes == trials {
        1.0
    } else {
        Beta::new(s + 1.0, n - s).expect("valid beta").inverse_cdf(1.0 - alpha / 2.0)
    };
    Ok((low, high))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_threshold_is_inclusive() {
        assert_eq!(predict(13.9).unwrap(), SeizureOutcome::Recurrence);
        assert_eq!(predict(0.0).unwrap(), SeizureOutcome::SeizureFree);
        assert_eq!(predict(1.0).unwrap(), SeizureOutcome::Recurrence);
        assert!(predict(-0.1).is_err());
    }

    #[test]
    fn monotone_above_threshold() {
        let mut r = 1.0;
        while r < 100.0 {
            assert_eq!(predict(r).unwrap(), SeizureOutcome::Recurrence);
            r *= 1.7;
        }
    }

    #[test]
    fn four_group_classification() {
        use PredictionClass::*;
        use SeizureOutcome::*;
        assert_eq!(classify(Recurrence, Recurrence), Tp);
        assert_eq!(classify(SeizureFree, SeizureFree), Tn);
        assert_eq!(classify(Recurrence, SeizureFree), Fp);
        assert_eq!(classify(SeizureFree, Recurrence), Fn);
    }

    #[test]
    fn ilae_grades_map_to_outcomes() {
        let p = |ilae| PatientOutcome { patient_id: "x".into(), ilae, followup_months: 12 };
        assert_eq!(p(1).actual(), SeizureOutcome::SeizureFree);
        for ilae in 2..=6 {
            assert_eq!(p(ilae).actual(), SeizureOutcome::Recurrence);
        }
        assert!(p(0).validate().is_err());
        assert!(p(7).validate().is_err());
    }

    #[test]
    fn metrics_for_one_tp_seven_tn() {
        use PredictionClass::*;
        let classes = [Tp, Tn, Tn, Tn, Tn, Tn, Tn, Tn];
        let m = cohort_metrics(&classes).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.ppv, Some(1.0));
        assert_eq!(m.npv, Some(1.0));
        assert_eq!(m.sensitivity, Some(1.0));
        assert_eq!(m.specificity, Some(1.0));
    }

    #[test]
    fn undefined_denominators_are_absent() {
        use PredictionClass::*;
        let m = cohort_metrics(&[Tp, Tp, Fp, Fp]).unwrap();
        assert_eq!(m.ppv, Some(0.5));
        assert_eq!(m.npv, None);
        assert_eq!(m.specificity, Some(0.0));
        assert!(cohort_metrics(&[]).is_err());
    }

    #[test]
    fn all_success_interval_has_closed_form_lower_bound() {
        let (low, high) = binomial_ci(8, 8, 0.95).unwrap();
        assert_eq!(high, 1.0);
        // low^8 = 0.025 exactly for the all-success case
        assert!((low.powi(8) - 0.025).abs() < 1e-9, "low={low}");
        assert!((low - 0.6306).abs() < 0.002);
    }

    #[test]
    fn degenerate_edges() {
        let (low, high) = binomial_ci(0, 8, 0.95).unwrap();
        assert_eq!(low, 0.0);
        assert!(high < 0.5);
        assert!(binomial_ci(3, 2, 0.95).is_err());
        assert!(binomial_ci(1, 0, 0.95).is_err());
    }

    /// Exact binomial tail sum, written independently of statrs.
    fn binom_tail_ge(n: usize, k: usize, p: f64) -> f64 {
        // P(X >= k)
        let mut total = 0.0;
        for i in k..=n {
            let mut log_c = 0.0;
            for j in 0..i {
                log_c += ((n - j) as f64).ln() - ((i - j) as f64).ln();
            }
            total += (log_c + i as f64 * p.ln() + (n - i) as f64 * (1.0 - p).ln()).exp();
        }
        total
    }

    #[test]
    fn interval_matches_tail_sum_scan() {
        let (low, high) = binomial_ci(4, 10, 0.95).unwrap();
        // scan a fine grid for the Clopper-Pearson bounds
        let mut scan_low = 0.0;
        let mut p = 1e-4;
        while p < 1.0 {
            if binom_tail_ge(10, 4, p) >= 0.025 {
                scan_low = p;
                break;
            }
            p += 1e-5;
        }
        let mut scan_high = 1.0;
        let mut q = 1.0 - 1e-4;
        while q > 0.0 {
            if 1.0 - binom_tail_ge(10, 5, q) >= 0.025 {
                scan_high = q;
                break;
            }
            q -= 1e-5;
        }
        assert!((low - scan_low).abs() < 1e-3, "low {low} vs scan {scan_low}");
        assert!((high - scan_high).abs() < 1e-3, "high {high} vs scan {scan_high}");
    }

    #[test]
    fn interval_always_contains_point_estimate() {
        for n in 1..=20 {
            for s in 0..=n {
                let (low, high) = binomial_ci(s, n, 0.95).unwrap();
                let p_hat = s as f64 / n as f64;
                assert!(low <= p_hat + 1e-12 && p_hat <= high + 1e-12, "s={s} n={n}");
            }
        }
    }

    #[test]
    fn table_reproduction_from_published_rates() {
        let pre = [3.4, 9.7, 1.3, 11.5, 30.0, 45.0, 1.4, 1.9];
        let post = [0.3, 0.8, 0.1, 0.5, 0.0, 13.9, 0.9, 0.2];
        let ilae = [1, 1, 1, 1, 1, 3, 1, 1];
        assert!(pre.iter().all(|r| *r >= 1.0));
        let mut classes = Vec::new();
        for i in 0..8 {
            let o = PatientOutcome {
                patient_id: format!("P{}", i + 1),
                ilae: ilae[i],
                followup_months: 12,
            };
            let row = predict_patient(&o, post[i], 3.0).unwrap();
            classes.push(row.class);
        }
        let tp = classes.iter().filter(|c| **c == PredictionClass::Tp).count();
        let tn = classes.iter().filter(|c| **c == PredictionClass::Tn).count();
        assert_eq!((tp, tn), (1, 7));
        let m = cohort_metrics(&classes).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert!((m.accuracy_ci.0 - 0.6306).abs() < 0.002);
        assert_eq!(m.accuracy_ci.1, 1.0);
    }
}
