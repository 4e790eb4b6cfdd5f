//! CSV readers and writers for quotes and price paths.

use super::{MarketState, OptionKind, OptionQuote, PricePath, QuoteSurface};
use crate::error::{Error, Result};
use std::io::{Read, Write};

const QUOTE_HEADER: [&str; 5] = ["maturity", "strike", "kind", "price", "weight"];
const PATH_HEADER: [&str; 2] = ["time", "price"];

fn check_header(found: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let got: Vec<&str> = found.iter().map(str::trim).collect();
    if got != expected {
        return Err(Error::Parse(format!(
            "expected header `{}`, found `{}`",
            expected.join(","),
            got.join(",")
        )));
    }
    Ok(())
}

fn parse_number(field: Option<&str>, name: &str, line: usize) -> Result<f64> {
    let raw = field.ok_or_else(|| Error::Parse(format!("line {line}: missing `{name}`")))?;
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: `{name}` is not a number: `{raw}`")))?;
    if !v.is_finite() {
        return Err(Error::Parse(format!("line {line}: `{name}` is not finite")));
    }
    Ok(v)
}

/// Reads `maturity,strike,kind,price,weight` rows; `kind` is `C` or `P`.
pub fn read_quotes<R: Read>(reader: R, market: MarketState) -> Result<QuoteSurface> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    check_header(rdr.headers()?, &QUOTE_HEADER)?;
    let mut quotes = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() != QUOTE_HEADER.len() {
            return Err(Error::Parse(format!("line {line}: expected 5 fields, found {}", rec.len())));
        }
        let kind = match rec.get(2).map(str::trim) {
            Some("C") => OptionKind::Call,
            Some("P") => OptionKind::Put,
            other => {
                return Err(Error::Parse(format!(
                    "line {line}: kind must be C or P, found `{}`",
                    other.unwrap_or("")
                )))
            }
        };
        quotes.push(OptionQuote {
            maturity: parse_number(rec.get(0), "maturity", line)?,
            strike: parse_number(rec.get(1), "strike", line)?,
            kind,
            price: parse_number(rec.get(3), "price", line)?,
            weight: parse_number(rec.get(4), "weight", line)?,
        });
    }
    QuoteSurface::new(market, quotes)
}

pub fn write_quotes<W: Write>(writer: W, surface: &QuoteSurface) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(QUOTE_HEADER)?;
    for q in surface.quotes() {
        let kind = match q.kind {
            OptionKind::Call => "C",
            OptionKind::Put => "P",
        };
        w.write_record([
            q.maturity.to_string(),
            q.strike.to_string(),
            kind.to_string(),
            q.price.to_string(),
            q.weight.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `time,price` rows into a path.
pub fn read_price_path<R: Read>(reader: R) -> Result<PricePath> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    check_header(rdr.headers()?, &PATH_HEADER)?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() != 2 {
            return Err(Error::Parse(format!("line {line}: expected 2 fields, found {}", rec.len())));
        }
        times.push(parse_number(rec.get(0), "time", line)?);
        values.push(parse_number(rec.get(1), "price", line)?);
    }
    PricePath::new(times, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn market() -> MarketState {
        MarketState::flat(100.0, 0.0).unwrap()
    }

    #[test]
    fn reads_quote_file() {
        let csv = "maturity,strike,kind,price,weight\n0.5,100,C,5.6,1\n1.0,90,P,3.2,0.5\n";
        let s = read_quotes(csv.as_bytes(), market()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.quotes()[1].kind, OptionKind::Put);
        assert_eq!(s.quotes()[1].weight, 0.5);
    }

    #[test]
    fn quote_write_read_round_trip() {
        let s = QuoteSurface::new(
            market(),
            vec![OptionQuote::call(0.25, 95.0, 6.125), OptionQuote::put(1.5, 120.0, 21.0).with_weight(0.0)],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_quotes(&mut buf, &s).unwrap();
        let back = read_quotes(buf.as_slice(), market()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn missing_header_is_parse_error() {
        let csv = "0.5,100,C,5.6,1\n";
        assert!(matches!(read_quotes(csv.as_bytes(), market()), Err(Error::Parse(_))));
        let bad_kind = "maturity,strike,kind,price,weight\n0.5,100,X,5.6,1\n";
        assert!(matches!(read_quotes(bad_kind.as_bytes(), market()), Err(Error::Parse(_))));
        let thousands = "maturity,strike,kind,price,weight\n0.5,\"1,000\",C,5.6,1\n";
        assert!(read_quotes(thousands.as_bytes(), market()).is_err());
    }

    #[test]
    fn reads_path_file() {
        let csv = "time,price\n0,100\n0.5,101\n1.0,99.5\n";
        let p = read_price_path(csv.as_bytes()).unwrap();
        assert_eq!(p.len(), 3);
        assert!(read_price_path("time,price\n0,100\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn parsers_never_panic(input in "\\PC{0,200}") {
            let _ = read_quotes(input.as_bytes(), market());
            let _ = read_price_path(input.as_bytes());
        }

        #[test]
        fn parsers_never_panic_with_header(body in "[0-9a-zA-Z.,\\-\n\"]{0,200}") {
            let q = format!("maturity,strike,kind,price,weight\n{body}");
            let _ = read_quotes(q.as_bytes(), market());
            let p = format!("time,price\n{body}");
            let _ = read_price_path(p.as_bytes());
        }
    }
}
