//! Number formatting and table output.

use std::io::Write;

use rb_core::LN2;

/// `%.9g`: nine significant digits, trailing zeros dropped, `-0` printed as `0`.
pub fn g9(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..9).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exp.abs());
    }
    let decimals = (8 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    Bits,
    Nats,
}

impl Units {
    pub fn suffix(self) -> &'static str {
        match self {
            Units::Bits => "bits",
            Units::Nats => "nats",
        }
    }

    /// Converts a value in nats.
    pub fn from_nats(self, v: f64) -> f64 {
        match self {
            Units::Bits => v / LN2,
            Units::Nats => v,
        }
    }

    pub fn to_nats(self, v: f64) -> f64 {
        match self {
            Units::Bits => v * LN2,
            Units::Nats => v,
        }
    }
}

/// A header plus string rows, written as CSV.
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn write<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn printf_g_style() {
        assert_eq!(g9(0.5), "0.5");
        assert_eq!(g9(-0.0), "0");
        assert_eq!(g9(1.0), "1");
        assert_eq!(g9(0.311278124459), "0.311278124");
        assert_eq!(g9(1000.0), "1000");
        assert_eq!(g9(123456789.0), "123456789");
        assert_eq!(g9(1234567890.0), "1.23456789e+09");
        assert_eq!(g9(0.0001), "0.0001");
        assert_eq!(g9(0.00001234), "1.234e-05");
        assert_eq!(g9(-2.5e-17), "-2.5e-17");
        assert_eq!(g9(0.99999999999), "1");
        assert_eq!(g9(f64::INFINITY), "inf");
    }
}
