//! Metrics, reports and report pooling.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::fisher_combine;

/// Where a target value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    /// Quoted from the source material.
    Paper,
    /// Computed by an independent oracle.
    Derived,
    /// Follows from a definition.
    Trivial,
}

/// Pass rule of a metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Check {
    /// |estimate / target − 1| ≤ tol.
    Relative { tol: f64 },
    /// |estimate − target| ≤ tol.
    Absolute { tol: f64 },
    /// The p-value is at least `level`.
    PValue { level: f64 },
    /// |estimate − target| ≤ k·se.
    WithinSe { k: f64 },
    /// estimate ≤ target.
    AtMost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub name: String,
    pub estimate: f64,
    pub se: Option<f64>,
    pub ci: Option<(f64, f64)>,
    /// None when the target is a whole distribution, see `about`.
    pub target: Option<f64>,
    pub provenance: Provenance,
    pub check: Check,
    pub p_value: Option<f64>,
    pub pass: bool,
    /// What is compared with what.
    pub about: String,
}

impl Metric {
    pub fn new(name: impl Into<String>, estimate: f64, target: Option<f64>, provenance: Provenance, check: Check) -> Self {
        let mut m = Self {
            name: name.into(),
            estimate,
            se: None,
            ci: None,
            target,
            provenance,
            check,
            p_value: None,
            pass: false,
            about: String::new(),
        };
        m.pass = m.evaluate();
        m
    }

    /// A goodness-of-fit style test: estimate is the statistic.
    pub fn test(name: impl Into<String>, statistic: f64, p_value: f64, level: f64, provenance: Provenance) -> Self {
        Self::new(name, statistic, None, provenance, Check::PValue { level }).with_p(p_value)
    }

    pub fn with_se(mut self, se: f64) -> Self {
        self.se = Some(se);
        self.ci = Some((self.estimate - 1.96 * se, self.estimate + 1.96 * se));
        self.pass = self.evaluate();
        self
    }

    pub fn with_p(mut self, p: f64) -> Self {
        self.p_value = Some(p);
        self.pass = self.evaluate();
        self
    }

    pub fn about(mut self, text: impl Into<String>) -> Self {
        self.about = text.into();
        self
    }

    /// Re-applies the pass rule, e.g. after pooling.
    pub fn evaluate(&self) -> bool {
        let e = self.estimate;
        if !e.is_finite() && !matches!(self.check, Check::PValue { .. }) {
            return false;
        }
        match (self.check, self.target) {
            (Check::Relative { tol }, Some(t)) => (e / t - 1.0).abs() <= tol,
            (Check::Absolute { tol }, Some(t)) => (e - t).abs() <= tol,
            (Check::WithinSe { k }, Some(t)) => self.se.is_some_and(|se| (e - t).abs() <= k * se),
            (Check::AtMost, Some(t)) => e <= t,
            (Check::PValue { level }, _) => self.p_value.is_some_and(|p| p >= level),
            (_, None) => false,
        }
    }

    /// Failing test whose p-value is close enough to the threshold to be
    /// an ordinary false positive.
    pub fn borderline(&self) -> bool {
        !self.pass && self.p_value.is_some_and(|p| (0.001..0.01).contains(&p))
    }
}

fn num(x: f64) -> String {
    if x != 0.0 && x.is_finite() && (x.abs() < 1e-3 || x.abs() >= 1e6) {
        format!("{x:.3e}")
    } else {
        format!("{x:.6}")
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:<4} {:<40} est {:<12}", if self.pass { "ok" } else { "FAIL" }, self.name, num(self.estimate))?;
        if let Some(se) = self.se {
            write!(f, " se {se:<10.3e}")?;
        }
        if let Some(t) = self.target {
            write!(f, " target {:<12}", num(t))?;
        }
        if let Some(p) = self.p_value {
            write!(f, " p {p:.4}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatReport {
    pub experiment: String,
    /// Seeds of the runs behind this report.
    pub seeds: Vec<u64>,
    /// Independent-seed reruns triggered by borderline failures.
    pub reruns: u32,
    pub metrics: Vec<Metric>,
    pub notes: Vec<String>,
}

impl StatReport {
    pub fn new(experiment: impl Into<String>, seed: u64) -> Self {
        Self { experiment: experiment.into(), seeds: vec![seed], reruns: 0, metrics: Vec::new(), notes: Vec::new() }
    }

    pub fn push(&mut self, metric: Metric) {
        self.metrics.push(metric);
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn pass(&self) -> bool {
        self.metrics.iter().all(|m| m.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Metric> {
        self.metrics.iter().filter(|m| !m.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Human-readable table.
    pub fn summary(&self) -> String {
        let mut s = format!(
            "{} [{}] seeds {:?}{}\n",
            self.experiment,
            if self.pass() { "PASS" } else { "FAIL" },
            self.seeds,
            if self.reruns > 0 { format!(", {} rerun(s)", self.reruns) } else { String::new() }
        );
        for m in &self.metrics {
            s.push_str(&format!("  {m}\n"));
        }
        for n in &self.notes {
            s.push_str(&format!("  note: {n}\n"));
        }
        s
    }
}

/// Pools reports of independent runs of one experiment: inverse-variance
/// weighted estimates, Fisher-combined p-values.
pub fn merge_reports(reports: &[StatReport]) -> Result<StatReport> {
    let first = reports.first().ok_or_else(|| Error::Merge("nothing to merge".into()))?;
    if reports.len() == 1 {
        return Ok(first.clone());
    }
    let mut seen = BTreeSet::new();
    for r in reports {
        if r.experiment != first.experiment {
            return Err(Error::Merge(format!("experiments `{}` and `{}` differ", first.experiment, r.experiment)));
        }
        let same_schema = r.metrics.len() == first.metrics.len()
            && r.metrics.iter().zip(&first.metrics).all(|(a, b)| a.name == b.name && a.check == b.check && a.target == b.target);
        if !same_schema {
            return Err(Error::Merge(format!("metric schema of `{}` differs between reports", r.experiment)));
        }
        for &s in &r.seeds {
            if !seen.insert(s) {
                return Err(Error::Merge(format!("seed {s} appears twice; runs must be independent")));
            }
        }
    }
    let metrics = (0..first.metrics.len())
        .map(|i| {
            let ms: Vec<&Metric> = reports.iter().map(|r| &r.metrics[i]).collect();
            let mut pooled = ms[0].clone();
            let ses: Option<Vec<f64>> = ms.iter().map(|m| m.se.filter(|s| *s > 0.0 && s.is_finite())).collect();
            match ses {
                Some(ses) => {
                    let w: Vec<f64> = ses.iter().map(|s| 1.0 / (s * s)).collect();
                    let wsum: f64 = w.iter().sum();
                    pooled.estimate = ms.iter().zip(&w).map(|(m, w)| m.estimate * w).sum::<f64>() / wsum;
                    pooled = pooled.with_se(wsum.recip().sqrt());
                }
                None => {
                    pooled.estimate = ms.iter().map(|m| m.estimate).sum::<f64>() / ms.len() as f64;
                    pooled.se = None;
                    pooled.ci = None;
                }
            }
            let ps: Option<Vec<f64>> = ms.iter().map(|m| m.p_value).collect();
            pooled.p_value = ps.map(|ps| fisher_combine(&ps));
            pooled.pass = pooled.evaluate();
            pooled
        })
        .collect();
    Ok(StatReport {
        experiment: first.experiment.clone(),
        seeds: seen.into_iter().collect(),
        reruns: reports.iter().map(|r| r.reruns).sum(),
        metrics,
        notes: reports.iter().flat_map(|r| r.notes.iter().cloned()).collect(),
    })
}
