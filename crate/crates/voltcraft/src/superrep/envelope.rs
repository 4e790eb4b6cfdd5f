use crate::error::{Error, Result};
use crate::market::Payoff;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnvelopeDomain {
    /// `[0, B]`.
    Bounded(f64),
    /// `[0, ∞)`; the payoff's terminal slope is handled exactly.
    Unbounded,
}

/// Smallest concave majorant of a piecewise-linear payoff.
///
/// On a bounded domain the result is the upper hull of the graph's vertices on
/// `[0, B]`, extended past `B` with its last slope. On `[0, ∞)` hull vertices are
/// dropped while their outgoing slope is below the terminal slope, which then
/// continues from the last remaining vertex.
pub fn concave_envelope(payoff: &Payoff, domain: EnvelopeDomain) -> Result<Payoff> {
    let xs = payoff.breakpoints();
    let vs = payoff.values();
    let mut points: Vec<(f64, f64)> = Vec::with_capacity(xs.len() + 2);
    if xs[0] > 0.0 {
        points.push((0.0, vs[0]));
    }
    let upper = match domain {
        EnvelopeDomain::Bounded(b) => {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::invalid(format!("envelope domain bound must be positive, got {b}")));
            }
            Some(b)
        }
        EnvelopeDomain::Unbounded => None,
    };
    for (&x, &v) in xs.iter().zip(vs) {
        if upper.is_none_or(|b| x < b) {
            points.push((x, v));
        }
    }
    if let Some(b) = upper {
        points.push((b, payoff.eval(b)));
    }

    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(points.len());
    for p in points {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            // Drop `b` unless it lies strictly above the chord from `a` to `p`.
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }

    let terminal = match upper {
        Some(_) => {
            let n = hull.len();
            if n >= 2 {
                (hull[n - 1].1 - hull[n - 2].1) / (hull[n - 1].0 - hull[n - 2].0)
            } else {
                0.0
            }
        }
        None => {
            let s = payoff.terminal_slope();
            while hull.len() >= 2 {
                let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
                if (b.1 - a.1) / (b.0 - a.0) <= s {
                    hull.pop();
                } else {
                    break;
                }
            }
            s
        }
    };
    let (hx, hv): (Vec<f64>, Vec<f64>) = hull.into_iter().unzip();
    Payoff::from_points(hx, hv, terminal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn call_on_half_line_is_the_stock() {
        let env = concave_envelope(&Payoff::call(100.0).unwrap(), EnvelopeDomain::Unbounded).unwrap();
        for x in [0.0, 50.0, 100.0, 1e4] {
            assert_eq!(env.eval(x), x);
        }
    }

    #[test]
    fn put_on_half_line_is_its_strike() {
        let env = concave_envelope(&Payoff::put(100.0).unwrap(), EnvelopeDomain::Unbounded).unwrap();
        for x in [0.0, 50.0, 100.0, 1e4] {
            assert_eq!(env.eval(x), 100.0);
        }
        // Large bounded domains approach the same constant.
        let b = concave_envelope(&Payoff::put(100.0).unwrap(), EnvelopeDomain::Bounded(1e6)).unwrap();
        assert!((b.eval(100.0) - 100.0 * (1.0 - 1e-4)).abs() < 1e-9);
    }

    #[test]
    fn call_on_bounded_domain_is_a_chord() {
        let env = concave_envelope(&Payoff::call(100.0).unwrap(), EnvelopeDomain::Bounded(300.0)).unwrap();
        assert_eq!(env.breakpoints(), &[0.0, 300.0]);
        assert!((env.eval(100.0) - 100.0 * 200.0 / 300.0).abs() < 1e-12);
    }

    #[test]
    fn butterfly_hull() {
        let fly = Payoff::butterfly(90.0, 100.0, 110.0).unwrap();
        let env = concave_envelope(&fly, EnvelopeDomain::Unbounded).unwrap();
        // Rises from (0, 0) to the peak and stays flat.
        assert_eq!(env.eval(100.0), 10.0);
        assert!((env.eval(50.0) - 5.0).abs() < 1e-12);
        assert_eq!(env.eval(500.0), 10.0);
    }

    #[test]
    fn concave_payoff_is_a_fixed_point() {
        let cap = Payoff::capped(100.0).unwrap();
        assert_eq!(concave_envelope(&cap, EnvelopeDomain::Unbounded).unwrap(), cap);
    }

    fn payoffs() -> impl Strategy<Value = Payoff> {
        (prop::collection::vec((0.5..30.0f64, -20.0..40.0f64), 1..8), -1.0..2.0f64).prop_map(|(steps, slope)| {
            let mut x = 0.0;
            let (mut xs, mut vs) = (Vec::new(), Vec::new());
            for (dx, v) in steps {
                xs.push(x);
                vs.push(v);
                x += dx;
            }
            Payoff::from_points(xs, vs, slope).unwrap()
        })
    }

    proptest! {
        #[test]
        fn envelope_is_concave_majorant(p in payoffs(), bounded in any::<bool>()) {
            let domain = if bounded { EnvelopeDomain::Bounded(250.0) } else { EnvelopeDomain::Unbounded };
            let env = concave_envelope(&p, domain).unwrap();
            prop_assert!(env.is_concave());
            for &x in p.breakpoints() {
                prop_assert!(env.eval(x) >= p.eval(x) - 1e-9 * (1.0 + p.eval(x).abs()));
            }
            // Contact: some vertex of the envelope is a vertex of the payoff.
            prop_assert!(env.breakpoints().iter().any(|&x| (env.eval(x) - p.eval(x)).abs() <= 1e-9 * (1.0 + p.eval(x).abs())));
            let again = concave_envelope(&env, domain).unwrap();
            prop_assert_eq!(again, env);
        }
    }
}
