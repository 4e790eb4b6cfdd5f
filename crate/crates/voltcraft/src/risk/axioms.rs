use super::{coherent_risk, entropic_risk, expected_shortfall, value_at_risk, RiskSample, ScenarioFamily};
use crate::error::{Error, Result};
use crate::numerics::norm_inv_cdf;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// A risk measure evaluated on equally likely outcomes (or on a family's states).
#[derive(Debug, Clone, PartialEq)]
pub enum RiskMeasure {
    ValueAtRisk { level: f64 },
    ExpectedShortfall { level: f64 },
    Coherent(ScenarioFamily),
    Entropic { aversion: f64 },
}

impl RiskMeasure {
    pub fn eval(&self, outcomes: &[f64]) -> Result<f64> {
        match self {
            RiskMeasure::Coherent(family) => Ok(coherent_risk(outcomes, family)?.value),
            RiskMeasure::ValueAtRisk { level } => value_at_risk(&RiskSample::new(outcomes.to_vec())?, *level),
            RiskMeasure::ExpectedShortfall { level } => expected_shortfall(&RiskSample::new(outcomes.to_vec())?, *level),
            RiskMeasure::Entropic { aversion } => entropic_risk(&RiskSample::new(outcomes.to_vec())?, *aversion),
        }
    }

    fn name(&self) -> String {
        match self {
            RiskMeasure::ValueAtRisk { level } => format!("value-at-risk({level})"),
            RiskMeasure::ExpectedShortfall { level } => format!("expected-shortfall({level})"),
            RiskMeasure::Coherent(f) => format!("coherent({} measures)", f.measures().len()),
            RiskMeasure::Entropic { aversion } => format!("entropic({aversion})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Axiom {
    /// `X ≤ Y ⟹ ρ(X) ≥ ρ(Y)`.
    Monotonicity,
    /// `ρ(X + c) = ρ(X) − c`.
    TranslationInvariance,
    /// `ρ(λX) = λρ(X)` for `λ > 0`.
    PositiveHomogeneity,
    /// `ρ(X + Y) ≤ ρ(X) + ρ(Y)`.
    Subadditivity,
    /// `ρ(tX + (1 − t)Y) ≤ tρ(X) + (1 − t)ρ(Y)`.
    Convexity,
}

const AXIOMS: [Axiom; 5] = [
    Axiom::Monotonicity,
    Axiom::TranslationInvariance,
    Axiom::PositiveHomogeneity,
    Axiom::Subadditivity,
    Axiom::Convexity,
];

/// First counterexample found: the positions and the two sides of the violated relation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomWitness {
    pub trial: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Scalar parameter of the trial (shift, scale or mixing weight).
    pub parameter: f64,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomOutcome {
    pub axiom: Axiom,
    pub passed: bool,
    pub failures: usize,
    pub witness: Option<AxiomWitness>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomReport {
    pub measure: String,
    pub trials: usize,
    pub seed: u64,
    pub outcomes: Vec<AxiomOutcome>,
}

impl AxiomReport {
    pub fn passed(&self, axiom: Axiom) -> bool {
        self.outcomes.iter().any(|o| o.axiom == axiom && o.passed)
    }
}

/// Random position: Gaussian P&L, or a small gain with rare large losses.
fn position(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    if rng.random::<bool>() {
        let scale = rng.random_range(0.1..10.0);
        let shift = rng.random_range(-5.0..5.0);
        (0..n)
            .map(|_| shift + scale * norm_inv_cdf(rng.random_range(1e-12..1.0)))
            .collect()
    } else {
        let p = rng.random_range(0.01..0.1);
        let gain = rng.random_range(0.0..2.0);
        (0..n)
            .map(|_| {
                if rng.random::<f64>() < p {
                    -100.0 * rng.random_range(0.5..1.5)
                } else {
                    gain
                }
            })
            .collect()
    }
}

/// Randomized check of the coherence and convexity axioms on common outcome spaces.
pub fn check_axioms(measure: &RiskMeasure, trials: usize, seed: u64) -> Result<AxiomReport> {
    if trials == 0 {
        return Err(Error::invalid("axiom checks need at least one trial"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut outcomes: Vec<AxiomOutcome> = AXIOMS
        .iter()
        .map(|&axiom| AxiomOutcome {
            axiom,
            passed: true,
            failures: 0,
            witness: None,
        })
        .collect();
    for trial in 0..trials {
        let n = match measure {
            RiskMeasure::Coherent(f) => f.outcome_count(),
            _ => rng.random_range(50..200),
        };
        let x = position(&mut rng, n);
        let y = position(&mut rng, n);
        let rho = |v: &[f64]| measure.eval(v);
        let (rx, ry) = (rho(&x)?, rho(&y)?);
        let scale = 1.0 + x.iter().chain(&y).fold(0.0_f64, |a, v| a.max(v.abs()));
        let tol = 1e-10 * scale;

        for out in outcomes.iter_mut() {
            let (param, other, lhs, rhs, ok) = match out.axiom {
                Axiom::Monotonicity => {
                    let bump: Vec<f64> = x.iter().map(|v| v + rng.random_range(0.0..1.0)).collect();
                    let r = rho(&bump)?;
                    (0.0, bump, rx, r, rx >= r - tol)
                }
                Axiom::TranslationInvariance => {
                    let c = rng.random_range(-10.0..10.0);
                    let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
                    let r = rho(&shifted)?;
                    (c, shifted, r, rx - c, (r - (rx - c)).abs() <= tol)
                }
                Axiom::PositiveHomogeneity => {
                    let l = rng.random_range(0.1..5.0);
                    let scaled: Vec<f64> = x.iter().map(|v| l * v).collect();
                    let r = rho(&scaled)?;
                    (l, scaled, r, l * rx, (r - l * rx).abs() <= tol * l.max(1.0))
                }
                Axiom::Subadditivity => {
                    let sum: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
                    let r = rho(&sum)?;
                    (0.0, y.clone(), r, rx + ry, r <= rx + ry + tol)
                }
                Axiom::Convexity => {
                    let t = rng.random_range(0.0..1.0);
                    let mix: Vec<f64> = x.iter().zip(&y).map(|(a, b)| t * a + (1.0 - t) * b).collect();
                    let r = rho(&mix)?;
                    let bound = t * rx + (1.0 - t) * ry;
                    (t, y.clone(), r, bound, r <= bound + tol)
                }
            };
            if !ok {
                out.passed = false;
                out.failures += 1;
                if out.witness.is_none() {
                    out.witness = Some(AxiomWitness {
                        trial,
                        x: x.clone(),
                        y: other,
                        parameter: param,
                        lhs,
                        rhs,
                    });
                }
            }
        }
    }
    Ok(AxiomReport {
        measure: measure.name(),
        trials,
        seed,
        outcomes,
    })
}

/// Pays `gain` except for a loss state of probability `loss_prob` paying `loss`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BinaryPosition {
    pub gain: f64,
    pub loss: f64,
    pub loss_prob: f64,
}

impl BinaryPosition {
    fn sample(&self) -> Result<RiskSample> {
        RiskSample::weighted(vec![self.loss, self.gain], vec![self.loss_prob, 1.0 - self.loss_prob])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubadditivityWitness {
    pub level: f64,
    pub x: BinaryPosition,
    pub y: BinaryPosition,
    pub var_x: f64,
    pub var_y: f64,
    pub var_sum: f64,
    pub violated: bool,
}

/// VaR of two independent binary positions and of their sum, by exact enumeration
/// of the four-state product space.
pub fn var_subadditivity_check(x: &BinaryPosition, y: &BinaryPosition, level: f64) -> Result<SubadditivityWitness> {
    for p in [x, y] {
        if !(p.loss_prob > 0.0 && p.loss_prob < 1.0) {
            return Err(Error::invalid(format!("loss probability must lie in (0, 1), got {}", p.loss_prob)));
        }
    }
    let (var_x, var_y) = (value_at_risk(&x.sample()?, level)?, value_at_risk(&y.sample()?, level)?);
    let mut states: Vec<(f64, f64)> = Vec::with_capacity(4);
    for (a, pa) in [(x.loss, x.loss_prob), (x.gain, 1.0 - x.loss_prob)] {
        for (b, pb) in [(y.loss, y.loss_prob), (y.gain, 1.0 - y.loss_prob)] {
            states.push((a + b, pa * pb));
        }
    }
    let (outcomes, probs): (Vec<f64>, Vec<f64>) = states.into_iter().unzip();
    let var_sum = value_at_risk(&RiskSample::weighted(outcomes, probs)?, level)?;
    Ok(SubadditivityWitness {
        level,
        x: *x,
        y: *y,
        var_x,
        var_y,
        var_sum,
        violated: var_sum > var_x + var_y + 1e-12,
    })
}

/// Two independent positions each losing 100 with probability `0.8·(1 − level)` and
/// otherwise gaining 1: neither shows a loss at the quantile, their sum does.
pub fn var_subadditivity_violation(level: f64) -> Result<SubadditivityWitness> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid(format!("confidence level must lie in (0, 1), got {level}")));
    }
    let p = BinaryPosition {
        gain: 1.0,
        loss: -100.0,
        loss_prob: 0.8 * (1.0 - level),
    };
    var_subadditivity_check(&p, &p, level)
}
