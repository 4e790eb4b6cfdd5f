use crate::error::{Error, Result};
use crate::market::Payoff;
use std::path::Path;

/// Parses `call:K`, `put:K`, `butterfly:K1,K2,K3`, `capped:K` or `pwl:@file.csv`.
///
/// A bare name (`call`) takes its strike from `strike`. Breakpoint files have an
/// `x,value` header; the last segment's slope continues to infinity.
pub fn parse_payoff(spec: &str, strike: Option<f64>) -> Result<Payoff> {
    let (name, arg) = match spec.split_once(':') {
        Some((n, a)) => (n.trim(), Some(a.trim())),
        None => (spec.trim(), None),
    };
    let numbers = |arg: Option<&str>| -> Result<Vec<f64>> {
        match arg {
            Some(a) => a
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::invalid(format!("payoff `{spec}`: `{s}` is not a number")))
                })
                .collect(),
            None => strike
                .map(|k| vec![k])
                .ok_or_else(|| Error::invalid(format!("payoff `{spec}` needs a strike (`{name}:K` or --strike)"))),
        }
    };
    let single = |arg| -> Result<f64> {
        let v = numbers(arg)?;
        match v.as_slice() {
            [k] => Ok(*k),
            _ => Err(Error::invalid(format!("payoff `{spec}` takes one strike"))),
        }
    };
    match name {
        "call" => Payoff::call(single(arg)?),
        "put" => Payoff::put(single(arg)?),
        "capped" => Payoff::capped(single(arg)?),
        "butterfly" => match numbers(arg)?.as_slice() {
            [a, b, c] => Payoff::butterfly(*a, *b, *c),
            _ => Err(Error::invalid(format!("payoff `{spec}` needs three strikes"))),
        },
        "pwl" => {
            let path = arg
                .and_then(|a| a.strip_prefix('@'))
                .ok_or_else(|| Error::invalid("piecewise-linear payoff is given as `pwl:@file.csv`"))?;
            read_breakpoints(Path::new(path))
        }
        other => Err(Error::invalid(format!(
            "unknown payoff `{other}`; expected call, put, capped, butterfly or pwl"
        ))),
    }
}

fn read_breakpoints(path: &Path) -> Result<Payoff> {
    let file = std::fs::File::open(path).map_err(|e| Error::invalid(format!("cannot open {}: {e}", path.display())))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != ["x", "value"] {
        return Err(Error::Parse(format!("expected header `x,value`, found `{}`", header.join(","))));
    }
    let (mut xs, mut vs) = (Vec::new(), Vec::new());
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Parse(format!("line {}: bad number", line + 2)))
        };
        xs.push(num(0)?);
        vs.push(num(1)?);
    }
    let n = xs.len();
    let slope = if n >= 2 { (vs[n - 1] - vs[n - 2]) / (xs[n - 1] - xs[n - 2]) } else { 0.0 };
    Payoff::from_points(xs, vs, slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn mini_language() {
        assert_eq!(parse_payoff("call:100", None).unwrap(), Payoff::call(100.0).unwrap());
        assert_eq!(parse_payoff("put", Some(90.0)).unwrap(), Payoff::put(90.0).unwrap());
        assert_eq!(
            parse_payoff("butterfly:90,100,110", None).unwrap(),
            Payoff::butterfly(90.0, 100.0, 110.0).unwrap()
        );
        assert!(parse_payoff("call", None).is_err());
        assert!(parse_payoff("straddle:1", None).is_err());
        assert!(parse_payoff("butterfly:1,2", None).is_err());
    }

    #[test]
    fn breakpoint_file() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "x,value\n0,0\n100,0\n200,100").unwrap();
        let p = parse_payoff(&format!("pwl:@{}", f.path().display()), None).unwrap();
        assert_eq!(p.eval(300.0), 200.0);
        assert_eq!(p.eval(50.0), 0.0);
    }
}
