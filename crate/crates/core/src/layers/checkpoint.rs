//! Versioned text dump of named tensors.
//!
//! ```text
//! embodied-cnn-checkpoint 1
//! meta variant embodied
//! tensor conv1.kernels 3 3 1 6
//! 1.2e-1 -3.4e-2 ...
//! ```
//!
//! Values are written in shortest round-trip exponent form, so a
//! save/load cycle reproduces every value bit for bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::{Error, Float, Result, Tensor};

pub const MAGIC: &str = "embodied-cnn-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    pub meta: BTreeMap<String, String>,
    pub tensors: Vec<(String, Tensor)>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_meta(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        assert!(!key.contains(char::is_whitespace) && !value.contains('\n'), "invalid checkpoint metadata");
        self.meta.insert(key.to_string(), value);
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.get(key).map(String::as_str)
    }

    pub fn push(&mut self, name: impl Into<String>, tensor: Tensor) {
        self.tensors.push((name.into(), tensor));
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn take(&self, name: &str) -> Result<Tensor> {
        self.get(name).cloned().ok_or_else(|| Error::Checkpoint(format!("missing tensor `{name}`")))
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{MAGIC} {VERSION}\n");
        for (k, v) in &self.meta {
            let _ = writeln!(out, "meta {k} {v}");
        }
        for (name, t) in &self.tensors {
            let _ = write!(out, "tensor {name}");
            for d in t.shape() {
                let _ = write!(out, " {d}");
            }
            out.push('\n');
            let mut first = true;
            for v in t.data() {
                if !first {
                    out.push(' ');
                }
                first = false;
                let _ = write!(out, "{v:e}");
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Checkpoint("empty file".into()))?;
        match header.split_once(' ') {
            Some((MAGIC, v)) if v.trim() == VERSION.to_string() => {}
            _ => return Err(Error::Checkpoint(format!("unrecognised header `{header}`"))),
        }
        let mut ckpt = Checkpoint::new();
        while let Some(line) = lines.next() {
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("meta ") {
                let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
                ckpt.meta.insert(k.to_string(), v.to_string());
            } else if let Some(rest) = line.strip_prefix("tensor ") {
                let mut parts = rest.split_whitespace();
                let name = parts.next().ok_or_else(|| Error::Checkpoint("tensor without name".into()))?;
                let shape = parts
                    .map(|d| d.parse::<usize>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| Error::Checkpoint(format!("bad shape for `{name}`: {e}")))?;
                let values = lines.next().ok_or_else(|| Error::Checkpoint(format!("missing values for `{name}`")))?;
                let data = values
                    .split_whitespace()
                    .map(|v| v.parse::<Float>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| Error::Checkpoint(format!("bad value in `{name}`: {e}")))?;
                let tensor = Tensor::from_vec(&shape, data).map_err(|e| Error::Checkpoint(e.to_string()))?;
                ckpt.tensors.push((name.to_string(), tensor));
            } else {
                return Err(Error::Checkpoint(format!("unexpected line `{line}`")));
            }
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    proptest! {
        #[test]
        fn text_round_trip_is_lossless(values in prop::collection::vec(any::<Float>().prop_filter("finite", |v| v.is_finite()), 1..40)) {
            let mut c = Checkpoint::new();
            c.set_meta("variant", "baseline");
            let n = values.len();
            c.push("layer.weights", Tensor::from_vec(&[n], values).unwrap());
            c.push("layer.bias", Tensor::zeros(&[2, 0]));
            let back = Checkpoint::parse(&c.to_text()).unwrap();
            prop_assert_eq!(back, c);
        }
    }

    #[test]
    fn rejects_foreign_header() {
        assert!(Checkpoint::parse("something else 1\n").is_err());
        assert!(Checkpoint::parse(&format!("{MAGIC} 2\n")).is_err());
    }
}
