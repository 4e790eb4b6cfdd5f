//! VaR, expected shortfall, entropic and scenario-based risk of a P&L sample, the
//! axiom checks, and a pair of positions where VaR is not subadditive.

use voltcraft::risk::*;

fn main() -> voltcraft::Result<()> {
    let pnl = vec![-12.0, -7.5, -3.0, -1.0, 0.5, 1.0, 2.0, 4.0, 6.0, 9.0];
    let sample = RiskSample::new(pnl.clone())?;
    let family = ScenarioFamily::new(vec![vec![0.1; 10], {
        let mut stressed = vec![0.05; 10];
        stressed[0] = 0.55;
        stressed
    }])?;
    let report = RiskReport::compute(&sample, 0.9, 0.5, Some(&family))?;
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));

    for measure in [
        RiskMeasure::ValueAtRisk { level: 0.95 },
        RiskMeasure::ExpectedShortfall { level: 0.95 },
        RiskMeasure::Entropic { aversion: 1.0 },
    ] {
        let r = check_axioms(&measure, 500, 1)?;
        let failed: Vec<_> = r.outcomes.iter().filter(|o| !o.passed).map(|o| o.axiom).collect();
        println!("{}: failing axioms {failed:?}", r.measure);
    }

    let w = var_subadditivity_violation(0.95)?;
    println!("VaR(X) = {}, VaR(Y) = {}, VaR(X+Y) = {}", w.var_x, w.var_y, w.var_sum);
    Ok(())
}
