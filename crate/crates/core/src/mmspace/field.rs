use std::io::{BufRead, Write};
use std::ops::Deref;

use crate::error::{Error, Result};

use super::FiniteSpace;

/// One finite real value per point of a space.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField(Vec<f64>);

impl ScalarField {
    pub fn new(space: &FiniteSpace, values: Vec<f64>) -> Result<Self> {
        Self::with_len(space.len(), values)
    }

    /// Validate against an expected point count.
    pub fn with_len(len: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != len {
            return Err(Error::LengthMismatch { expected: len, got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue(i));
        }
        Ok(Self(values))
    }

    pub fn from_fn(space: &FiniteSpace, f: impl FnMut(usize) -> f64) -> Result<Self> {
        Self::new(space, (0..space.len()).map(f).collect())
    }

    pub fn constant(space: &FiniteSpace, c: f64) -> Self {
        Self(vec![c; space.len()])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    /// `∫ f dμ`.
    pub fn integral(&self, measure: &[f64]) -> f64 {
        self.0.iter().zip(measure).map(|(v, m)| v * m).sum()
    }

    pub fn l2_norm(&self, measure: &[f64]) -> f64 {
        self.0.iter().zip(measure).map(|(v, m)| v * v * m).sum::<f64>().sqrt()
    }

    pub fn linf_norm(&self) -> f64 {
        self.0.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "index,value")?;
        for (i, v) in self.0.iter().enumerate() {
            writeln!(out, "{i},{v}")?;
        }
        Ok(())
    }

    /// Read `index,value` rows; indices must run 0..n in order.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Vec<f64>> {
        let mut values = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line.starts_with("index")) {
                continue;
            }
            let err = |msg: String| Error::Parse { line: lineno + 1, msg };
            let (idx, val) = line.split_once(',').ok_or_else(|| err("expected `index,value`".into()))?;
            let idx: usize = idx.trim().parse().map_err(|e| err(format!("bad index: {e}")))?;
            let val: f64 = val.trim().parse().map_err(|e| err(format!("bad value: {e}")))?;
            if idx != values.len() {
                return Err(err(format!("expected index {}, found {idx}", values.len())));
            }
            values.push(val);
        }
        Ok(values)
    }
}

impl Deref for ScalarField {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for ScalarField {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn norms_against_measure() {
        let s = FiniteSpace::interval(1.0, 4).unwrap();
        let f = ScalarField::from_fn(&s, |i| i as f64).unwrap();
        assert_relative_eq!(f.integral(s.measure()), 6.0 * 0.25);
        assert_relative_eq!(f.l2_norm(s.measure()), (14.0f64 * 0.25).sqrt());
        assert_eq!(f.linf_norm(), 3.0);
    }

    #[test]
    fn rejects_bad_values() {
        let s = FiniteSpace::interval(1.0, 3).unwrap();
        assert!(matches!(ScalarField::new(&s, vec![0.0; 2]), Err(Error::LengthMismatch { expected: 3, got: 2 })));
        assert!(matches!(ScalarField::new(&s, vec![0.0, f64::NAN, 1.0]), Err(Error::NonFiniteValue(1))));
    }

    #[test]
    fn csv_round_trip() {
        let s = FiniteSpace::circle(1.0, 5).unwrap();
        let f = ScalarField::from_fn(&s, |i| (i as f64).sin()).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let back = ScalarField::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, f.values());
    }

    #[test]
    fn csv_reports_line() {
        let err = ScalarField::read_csv("index,value\n0,1\n1,x\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
    }
}
