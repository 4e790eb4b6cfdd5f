//! Value-at-Risk, expected shortfall, coherent and entropic risk measures.
//!
//! Outcomes are P&L (gains positive); every measure reports losses as positive numbers.

mod axioms;

pub use axioms::{
    check_axioms, var_subadditivity_check, var_subadditivity_violation, Axiom, AxiomOutcome, AxiomReport, AxiomWitness, BinaryPosition,
    RiskMeasure, SubadditivityWitness,
};

use crate::error::{Error, Result};
use serde::Serialize;
use std::collections::BTreeMap;
use std::io::Read;

/// P&L outcomes with optional probabilities (uniform by default).
#[derive(Debug, Clone, PartialEq)]
pub struct RiskSample {
    outcomes: Vec<f64>,
    probabilities: Option<Vec<f64>>,
}

fn check_probabilities(p: &[f64], n: usize) -> Result<()> {
    if p.len() != n {
        return Err(Error::invalid(format!("{} probabilities for {n} outcomes", p.len())));
    }
    if p.iter().any(|q| !(q.is_finite() && *q >= 0.0)) {
        return Err(Error::invalid("probabilities must be nonnegative"));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(format!("probabilities sum to {total}, not 1")));
    }
    Ok(())
}

impl RiskSample {
    pub fn new(outcomes: Vec<f64>) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(Error::invalid("risk sample is empty"));
        }
        if outcomes.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("outcomes must be finite"));
        }
        Ok(RiskSample {
            outcomes,
            probabilities: None,
        })
    }

    pub fn weighted(outcomes: Vec<f64>, probabilities: Vec<f64>) -> Result<Self> {
        let mut s = Self::new(outcomes)?;
        check_probabilities(&probabilities, s.outcomes.len())?;
        s.probabilities = Some(probabilities);
        Ok(s)
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.outcomes
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn probability(&self, i: usize) -> f64 {
        match &self.probabilities {
            Some(p) => p[i],
            None => 1.0 / self.outcomes.len() as f64,
        }
    }

    /// Same probabilities, outcomes mapped pointwise.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Ok(RiskSample {
            outcomes: self.outcomes.iter().map(|&x| f(x)).collect(),
            probabilities: self.probabilities.clone(),
        })
    }

    pub fn expected_loss(&self) -> f64 {
        (0..self.len()).map(|i| -self.probability(i) * self.outcomes[i]).sum()
    }

    /// Reads a `pnl[,prob]` CSV.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let pnl = col("pnl").ok_or_else(|| Error::Parse("risk CSV needs a `pnl` column".into()))?;
        let prob = col("prob");
        let (mut xs, mut ps) = (Vec::new(), Vec::new());
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let field = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.parse::<f64>().ok())
                    .ok_or_else(|| Error::Parse(format!("row {}: bad number in column {}", line + 1, &headers[i])))
            };
            xs.push(field(pnl)?);
            if let Some(j) = prob {
                ps.push(field(j)?);
            }
        }
        match prob {
            Some(_) => Self::weighted(xs, ps),
            None => Self::new(xs),
        }
    }

    /// Indices sorted by outcome, ascending.
    fn order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| self.outcomes[a].total_cmp(&self.outcomes[b]));
        idx
    }
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("confidence level must lie in (0, 1), got {level}")))
    }
}

/// Negated lower `(1 − level)` quantile of the outcomes.
///
/// Uniform samples use the order statistic at index `⌈(1 − level)·n⌉ − 1`; weighted
/// samples take the smallest outcome whose cumulative probability reaches `1 − level`.
pub fn value_at_risk(sample: &RiskSample, level: f64) -> Result<f64> {
    check_level(level)?;
    let order = sample.order();
    let alpha = 1.0 - level;
    let pick = match &sample.probabilities {
        None => {
            let n = sample.len();
            // Guard against `(1 − level)·n` landing a rounding error above an integer.
            let k = ((alpha * n as f64) - 1e-9).ceil() as isize - 1;
            order[k.clamp(0, n as isize - 1) as usize]
        }
        Some(p) => {
            let mut cum = 0.0;
            let mut pick = order[order.len() - 1];
            for &i in &order {
                cum += p[i];
                if cum >= alpha - 1e-12 {
                    pick = i;
                    break;
                }
            }
            pick
        }
    };
    Ok(-sample.outcomes[pick])
}

/// Average loss over the worst `1 − level` of probability, splitting the boundary atom.
pub fn expected_shortfall(sample: &RiskSample, level: f64) -> Result<f64> {
    check_level(level)?;
    let alpha = 1.0 - level;
    let mut remaining = alpha;
    let mut total = 0.0;
    for i in sample.order() {
        if remaining <= 0.0 {
            break;
        }
        let w = sample.probability(i).min(remaining);
        total += w * -sample.outcomes[i];
        remaining -= w;
    }
    Ok(total / alpha)
}

/// Probability vectors over a common outcome index.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFamily {
    measures: Vec<Vec<f64>>,
}

impl ScenarioFamily {
    pub fn new(measures: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = measures.first() else {
            return Err(Error::invalid("scenario family is empty"));
        };
        let n = first.len();
        if n == 0 {
            return Err(Error::invalid("scenario measures need at least one outcome"));
        }
        for m in &measures {
            check_probabilities(m, n)?;
        }
        Ok(ScenarioFamily { measures })
    }

    pub fn measures(&self) -> &[Vec<f64>] {
        &self.measures
    }

    pub fn outcome_count(&self) -> usize {
        self.measures[0].len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoherentRisk {
    pub value: f64,
    /// Index of the maximizing measure.
    pub witness_index: usize,
}

/// `max_Q E_Q[−X]` over the family.
pub fn coherent_risk(outcomes: &[f64], family: &ScenarioFamily) -> Result<CoherentRisk> {
    if outcomes.len() != family.outcome_count() {
        return Err(Error::invalid(format!(
            "{} outcomes for measures over {} states",
            outcomes.len(),
            family.outcome_count()
        )));
    }
    let mut best = CoherentRisk {
        value: f64::NEG_INFINITY,
        witness_index: 0,
    };
    for (k, q) in family.measures.iter().enumerate() {
        let v: f64 = q.iter().zip(outcomes).map(|(q, x)| -q * x).sum();
        if v > best.value {
            best = CoherentRisk { value: v, witness_index: k };
        }
    }
    Ok(best)
}

/// `(1/λ)·ln E[e^{−λX}]`, evaluated with a max shift.
pub fn entropic_risk(sample: &RiskSample, aversion: f64) -> Result<f64> {
    if !(aversion > 0.0 && aversion.is_finite()) {
        return Err(Error::invalid(format!("risk aversion must be positive, got {aversion}")));
    }
    let a: Vec<f64> = sample.outcomes.iter().map(|x| -aversion * x).collect();
    let m = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = a.iter().enumerate().map(|(i, v)| sample.probability(i) * (v - m).exp()).sum();
    let value = (m + s.ln()) / aversion;
    // Rounding can push tiny aversions outside the exact bounds.
    let lo = sample.expected_loss();
    let hi = -sample.outcomes.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(value.min(hi).max(lo))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropicReport {
    pub lambda: f64,
    pub value: f64,
}

/// `{var, es, entropic: {lambda, value}, coherent: {value, witness_index}, axioms}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskReport {
    pub level: f64,
    pub var: f64,
    pub es: f64,
    pub entropic: EntropicReport,
    pub coherent: Option<CoherentRisk>,
    /// Axiom checks keyed by measure name; empty unless requested.
    pub axioms: BTreeMap<String, AxiomReport>,
}

impl RiskReport {
    pub fn compute(sample: &RiskSample, level: f64, aversion: f64, family: Option<&ScenarioFamily>) -> Result<Self> {
        Ok(RiskReport {
            level,
            var: value_at_risk(sample, level)?,
            es: expected_shortfall(sample, level)?,
            entropic: EntropicReport {
                lambda: aversion,
                value: entropic_risk(sample, aversion)?,
            },
            coherent: family.map(|f| coherent_risk(sample.outcomes(), f)).transpose()?,
            axioms: BTreeMap::new(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ten() -> RiskSample {
        RiskSample::new(vec![-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0]).unwrap()
    }

    #[test]
    fn var_order_statistic() {
        assert_eq!(value_at_risk(&ten(), 0.9).unwrap(), 10.0);
        assert_eq!(value_at_risk(&ten(), 0.8).unwrap(), 5.0);
        assert_eq!(value_at_risk(&RiskSample::new(vec![3.0; 7]).unwrap(), 0.95).unwrap(), -3.0);
        assert!(value_at_risk(&ten(), 1.0).is_err());
        assert!(RiskSample::new(vec![]).is_err());
    }

    #[test]
    fn weighted_var_matches_uniform() {
        let w = RiskSample::weighted(ten().outcomes().to_vec(), vec![0.1; 10]).unwrap();
        for level in [0.5, 0.8, 0.9, 0.95] {
            assert_eq!(value_at_risk(&w, level).unwrap(), value_at_risk(&ten(), level).unwrap());
        }
    }

    #[test]
    fn shortfall_averages_the_tail() {
        assert!((expected_shortfall(&ten(), 0.8).unwrap() - 7.5).abs() < 1e-12);
        assert!((expected_shortfall(&ten(), 0.85).unwrap() - (10.0 + 0.5 * 5.0) / 1.5).abs() < 1e-12);
    }

    #[test]
    fn coherent_examples() {
        let uniform = ScenarioFamily::new(vec![vec![0.5, 0.5]]).unwrap();
        assert_eq!(coherent_risk(&[-4.0, 2.0], &uniform).unwrap().value, 1.0);
        let corners = ScenarioFamily::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let r = coherent_risk(&[-4.0, 2.0], &corners).unwrap();
        assert_eq!((r.value, r.witness_index), (4.0, 0));
        assert!(coherent_risk(&[1.0], &corners).is_err());
    }

    #[test]
    fn perturbed_uniform_family_by_enumeration() {
        // All ±ε perturbations of the uniform measure on pairs of states.
        let n = 5;
        let eps = 0.05;
        let mut family = vec![vec![0.2; n]];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let mut q = vec![0.2; n];
                    q[i] += eps;
                    q[j] -= eps;
                    family.push(q);
                }
            }
        }
        let x = [3.0, -1.0, 4.0, -5.0, 2.0];
        let r = coherent_risk(&x, &ScenarioFamily::new(family).unwrap()).unwrap();
        // Shift mass from the best state (4) to the worst (−5).
        let expected = -x.iter().sum::<f64>() / 5.0 + eps * (5.0 + 4.0);
        assert!((r.value - expected).abs() < 1e-12);
    }

    #[test]
    fn entropic_examples() {
        let two = RiskSample::new(vec![-1.0, 1.0]).unwrap();
        assert!((entropic_risk(&two, 1.0).unwrap() - 1f64.cosh().ln()).abs() < 1e-14);
        assert!((entropic_risk(&RiskSample::new(vec![2.5; 4]).unwrap(), 3.0).unwrap() + 2.5).abs() < 1e-14);
        let small = RiskSample::new(vec![-1.0, 1.0, 2.0]).unwrap();
        assert!((entropic_risk(&small, 1e-6).unwrap() - small.expected_loss()).abs() < 1e-4);
        // No overflow for large losses.
        let big = RiskSample::new(vec![-1e4, 0.0]).unwrap();
        assert!((entropic_risk(&big, 1.0).unwrap() - (1e4 - 2f64.ln())).abs() < 1e-9);
    }

    #[test]
    fn csv_input() {
        let s = RiskSample::read_csv("pnl,prob\n-1,0.25\n1,0.75\n".as_bytes()).unwrap();
        assert_eq!(s.probability(0), 0.25);
        assert!(RiskSample::read_csv("x\n1\n".as_bytes()).is_err());
        assert!(RiskSample::read_csv("pnl\nabc\n".as_bytes()).is_err());
    }

    fn naive_var(xs: &[f64], level: f64) -> f64 {
        let mut s = xs.to_vec();
        s.sort_by(f64::total_cmp);
        let n = s.len();
        let mut k = 0;
        // Smallest k with (k + 1)/n ≥ 1 − level.
        while k + 1 < n && ((k + 1) as f64) < (1.0 - level) * n as f64 - 1e-9 {
            k += 1;
        }
        -s[k]
    }

    proptest! {
        #[test]
        fn csv_reader_never_panics(body in "[0-9a-z.,\\-\n]{0,200}", weighted in any::<bool>()) {
            let text = format!("{}\n{body}", if weighted { "pnl,prob" } else { "pnl" });
            let _ = RiskSample::read_csv(text.as_bytes());
        }

        #[test]
        fn var_equals_sorted_order_statistic(xs in prop::collection::vec(-100.0..100.0f64, 1..300), level in 0.5..0.999f64) {
            let s = RiskSample::new(xs.clone()).unwrap();
            prop_assert_eq!(value_at_risk(&s, level).unwrap(), naive_var(&xs, level));
        }

        #[test]
        fn var_is_comonotone_additive(xs in prop::collection::vec(-100.0..100.0f64, 1..100), a in 0.1..3.0f64, level in 0.5..0.99f64) {
            // Y = a·X is comonotone with X.
            let x = RiskSample::new(xs.clone()).unwrap();
            let y = x.map(|v| a * v).unwrap();
            let sum = x.map(|v| v + a * v).unwrap();
            let lhs = value_at_risk(&sum, level).unwrap();
            let rhs = value_at_risk(&x, level).unwrap() + value_at_risk(&y, level).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
        }

        #[test]
        fn entropic_is_monotone_in_aversion_and_bounded(xs in prop::collection::vec(-10.0..10.0f64, 1..50), l1 in 0.01..5.0f64, dl in 0.0..5.0f64) {
            let s = RiskSample::new(xs.clone()).unwrap();
            let (r1, r2) = (entropic_risk(&s, l1).unwrap(), entropic_risk(&s, l1 + dl).unwrap());
            prop_assert!(r1 <= r2 + 1e-12);
            let worst = -xs.iter().copied().fold(f64::INFINITY, f64::min);
            prop_assert!(s.expected_loss() <= r1 + 1e-12 && r1 <= worst + 1e-12);
        }

        #[test]
        fn translation_invariance(xs in prop::collection::vec(-10.0..10.0f64, 2..50), c in -5.0..5.0f64, level in 0.5..0.99f64) {
            let s = RiskSample::new(xs).unwrap();
            let shifted = s.map(|v| v + c).unwrap();
            prop_assert!((value_at_risk(&shifted, level).unwrap() - value_at_risk(&s, level).unwrap() + c).abs() <= 1e-10);
            prop_assert!((expected_shortfall(&shifted, level).unwrap() - expected_shortfall(&s, level).unwrap() + c).abs() <= 1e-10);
            prop_assert!((entropic_risk(&shifted, 0.7).unwrap() - entropic_risk(&s, 0.7).unwrap() + c).abs() <= 1e-10);
        }
    }
}
