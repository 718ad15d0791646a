//! Published reference values for the three built-in scenarios, and a
//! side-by-side delta table against model output. Informational only:
//! nothing here gates a build.

use serde::Serialize;

use crate::behavior::AnalyticMetrics;
use crate::metrics::SessionMetrics;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ReferenceScenario {
    pub scenario: &'static str,
    pub lambda_crit: f64,
    /// Share of customers above 4 s at λ = 20.
    pub unhappy_at_20: f64,
    pub pm1_browse: f64,
    pub pm1_search: f64,
    pub pm1_add: f64,
    pub pm1_checkout: f64,
    pub pm2_browse: f64,
    pub pm2_search: f64,
    pub pm2_checkout: f64,
    pub pm3: f64,
    pub pm4: f64,
    pub pm5: f64,
    pub pm6_browse: f64,
    pub pm6_search: f64,
    pub pm6_checkout: f64,
    pub pm7: f64,
    pub pm8: f64,
    pub pm9: f64,
    pub pm10: f64,
    pub pm11: f64,
}

pub const REFERENCE: [ReferenceScenario; 3] = [
    ReferenceScenario {
        scenario: "S1",
        lambda_crit: 14.78,
        unhappy_at_20: 0.9869,
        pm1_browse: 0.84909,
        pm1_search: 0.84773,
        pm1_add: 1.03331,
        pm1_checkout: 0.50874,
        pm2_browse: 0.26869,
        pm2_search: 0.26897,
        pm2_checkout: 0.46234,
        pm3: 0.1075,
        pm4: 189.4,
        pm5: 0.5,
        pm6_browse: 50.94720,
        pm6_search: 50.89374,
        pm6_checkout: 87.58523,
        pm7: 0.1962,
        pm8: 3.20799,
        pm9: 0.9859,
        pm10: 0.863179,
        pm11: 0.157805,
    },
    ReferenceScenario {
        scenario: "S2",
        lambda_crit: 19.81,
        unhappy_at_20: 0.6766,
        pm1_browse: 0.74141,
        pm1_search: 0.74106,
        pm1_add: 0.62983,
        pm1_checkout: 0.30612,
        pm2_browse: 0.31117,
        pm2_search: 0.31242,
        pm2_checkout: 0.37641,
        pm3: 0.0893,
        pm4: 142.6,
        pm5: 0.3,
        pm6_browse: 44.54833,
        pm6_search: 44.37167,
        pm6_checkout: 53.67539,
        pm7: 0.4062,
        pm8: 2.41300,
        pm9: 0.9885,
        pm10: 0.507155,
        pm11: 0.120595,
    },
    ReferenceScenario {
        scenario: "S3",
        lambda_crit: 24.28,
        unhappy_at_20: 0.0,
        pm1_browse: 0.68267,
        pm1_search: 0.68317,
        pm1_add: 0.41752,
        pm1_checkout: 0.20076,
        pm2_browse: 0.35036,
        pm2_search: 0.35155,
        pm2_checkout: 0.29809,
        pm3: 0.0727,
        pm4: 116.3,
        pm5: 0.2,
        pm6_browse: 40.88380,
        pm6_search: 40.74863,
        pm6_checkout: 34.66748,
        pm7: 0.5382,
        pm8: 1.976329,
        pm9: 0.9902,
        pm10: 0.321171,
        pm11: 0.093406,
    },
];

pub fn reference(scenario: &str) -> Option<&'static ReferenceScenario> {
    REFERENCE
        .iter()
        .find(|r| r.scenario.eq_ignore_ascii_case(scenario))
}

#[derive(Debug, Clone, Serialize)]
pub struct DeltaRow {
    pub metric: String,
    pub reference: f64,
    pub model: Option<f64>,
    pub delta: Option<f64>,
    pub relative: Option<f64>,
}

impl DeltaRow {
    fn new(metric: &str, reference: f64, model: Option<f64>) -> Self {
        let delta = model.map(|m| m - reference);
        DeltaRow {
            metric: metric.to_string(),
            reference,
            model,
            delta,
            relative: delta.filter(|_| reference != 0.0).map(|d| d / reference),
        }
    }
}

/// Optional model outputs to set against the reference columns.
#[derive(Debug, Default, Clone)]
pub struct ModelValues<'a> {
    pub analytic: Option<&'a AnalyticMetrics>,
    pub simulated: Option<&'a SessionMetrics>,
    pub lambda_crit: Option<f64>,
    pub unhappy_at_20: Option<f64>,
}

pub fn deltas(r: &ReferenceScenario, m: &ModelValues) -> Vec<DeltaRow> {
    let a = m.analytic;
    let s = m.simulated;
    let pm1 = |l: &str| a.and_then(|a| a.pm1.get(l).copied());
    let pm2 = |l: &str| a.and_then(|a| a.pm2.get(l).copied());
    let pm6 = |l: &str| s.and_then(|s| s.pm6.get(l).copied());
    vec![
        DeltaRow::new("lambda_crit", r.lambda_crit, m.lambda_crit),
        DeltaRow::new("unhappy_at_20", r.unhappy_at_20, m.unhappy_at_20),
        DeltaRow::new("PM1 Browse", r.pm1_browse, pm1("Browse")),
        DeltaRow::new("PM1 Search", r.pm1_search, pm1("Search")),
        DeltaRow::new("PM1 AddToCart", r.pm1_add, pm1("AddToCart")),
        DeltaRow::new("PM1 Checkout", r.pm1_checkout, pm1("Checkout")),
        DeltaRow::new("PM2 Browse", r.pm2_browse, pm2("Browse")),
        DeltaRow::new("PM2 Search", r.pm2_search, pm2("Search")),
        DeltaRow::new("PM2 Checkout", r.pm2_checkout, pm2("Checkout")),
        DeltaRow::new("PM3", r.pm3, a.map(|a| a.pm3)),
        DeltaRow::new("PM4", r.pm4, a.map(|a| a.pm4)),
        DeltaRow::new("PM5", r.pm5, a.map(|a| a.pm5)),
        DeltaRow::new("PM6 Browse", r.pm6_browse, pm6("Browse")),
        DeltaRow::new("PM6 Search", r.pm6_search, pm6("Search")),
        DeltaRow::new("PM6 Checkout", r.pm6_checkout, pm6("Checkout")),
        DeltaRow::new("PM7", r.pm7, s.map(|s| s.pm7)),
        DeltaRow::new("PM8", r.pm8, s.map(|s| s.pm8)),
        DeltaRow::new("PM9", r.pm9, s.map(|s| s.pm9)),
        DeltaRow::new("PM10", r.pm10, s.map(|s| s.pm10)),
        DeltaRow::new("PM11", r.pm11, s.map(|s| s.pm11)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_and_empty_model() {
        let r = reference("s2").unwrap();
        assert_eq!(r.lambda_crit, 19.81);
        let rows = deltas(r, &ModelValues::default());
        assert_eq!(rows.len(), 20);
        assert!(rows.iter().all(|x| x.model.is_none() && x.delta.is_none()));
    }

    #[test]
    fn relative_delta() {
        let r = reference("S1").unwrap();
        let rows = deltas(
            r,
            &ModelValues {
                lambda_crit: Some(14.78 * 1.1),
                ..ModelValues::default()
            },
        );
        assert!((rows[0].relative.unwrap() - 0.1).abs() < 1e-12);
        // zero reference has no relative delta
        let r3 = reference("S3").unwrap();
        let rows = deltas(
            r3,
            &ModelValues {
                unhappy_at_20: Some(0.01),
                ..ModelValues::default()
            },
        );
        assert_eq!(rows[1].relative, None);
    }
}
