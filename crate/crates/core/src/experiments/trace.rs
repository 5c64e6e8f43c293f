use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::device::DeviceParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Unit {
    Second,
    Coulomb,
    Ohm,
    Siemens,
    Volt,
    Ampere,
    /// Ordinal such as a cycle or phase number.
    Index,
    /// Cardinality such as an array size or phase count.
    Count,
    Ratio,
}

impl Unit {
    pub fn suffix(self) -> &'static str {
        match self {
            Unit::Second => "s",
            Unit::Coulomb => "C",
            Unit::Ohm => "ohm",
            Unit::Siemens => "S",
            Unit::Volt => "V",
            Unit::Ampere => "A",
            Unit::Index => "idx",
            Unit::Count => "n",
            Unit::Ratio => "1",
        }
    }

    pub fn from_suffix(s: &str) -> Option<Self> {
        [
            Unit::Second,
            Unit::Coulomb,
            Unit::Ohm,
            Unit::Siemens,
            Unit::Volt,
            Unit::Ampere,
            Unit::Index,
            Unit::Count,
            Unit::Ratio,
        ]
        .into_iter()
        .find(|u| u.suffix() == s)
    }

    /// Whether values are whole numbers by construction.
    pub fn is_integral(self) -> bool {
        matches!(self, Unit::Index | Unit::Count)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    /// Quantity name without unit, e.g. `t` or `R`.
    pub base: String,
    pub unit: Unit,
    pub values: Vec<f64>,
}

impl Column {
    /// `base_suffix`, e.g. `t_s`, `R_ohm`.
    pub fn header(&self) -> String {
        format!("{}_{}", self.base, self.unit.suffix())
    }

    fn is_time(&self) -> bool {
        self.unit == Unit::Second && self.base == "t"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MetaValue {
    Integer(u64),
    Number(f64),
    Text(String),
}

/// Named, unit-tagged series produced by one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentTrace {
    pub name: String,
    pub columns: Vec<Column>,
    pub metadata: Vec<(String, MetaValue)>,
}

impl ExperimentTrace {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            columns: Vec::new(),
            metadata: Vec::new(),
        }
    }

    pub fn push_column(&mut self, base: &str, unit: Unit, values: Vec<f64>) -> Result<()> {
        if let Some(first) = self.columns.first() {
            if first.values.len() != values.len() {
                return Err(Error::DimensionMismatch {
                    expected: first.values.len(),
                    found: values.len(),
                });
            }
        }
        self.columns.push(Column {
            base: base.to_string(),
            unit,
            values,
        });
        Ok(())
    }

    pub fn meta(&mut self, key: &str, value: MetaValue) {
        self.metadata.push((key.to_string(), value));
    }

    pub fn meta_number(&mut self, key: &str, value: f64) {
        self.meta(key, MetaValue::Number(value));
    }

    pub fn meta_integer(&mut self, key: &str, value: u64) {
        self.meta(key, MetaValue::Integer(value));
    }

    pub fn meta_text(&mut self, key: &str, value: &str) {
        self.meta(key, MetaValue::Text(value.to_string()));
    }

    pub fn get_meta(&self, key: &str) -> Option<&MetaValue> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn get_meta_number(&self, key: &str) -> Option<f64> {
        match self.get_meta(key)? {
            MetaValue::Number(x) => Some(*x),
            MetaValue::Integer(n) => Some(*n as f64),
            MetaValue::Text(_) => None,
        }
    }

    /// Looks a column up by its full header (`q_C`) or its base (`q`).
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns
            .iter()
            .find(|c| c.header() == name || c.base == name)
            .map(|c| c.values.as_slice())
    }

    pub fn require(&self, name: &str) -> Result<&[f64]> {
        self.column(name).ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, |c| c.values.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn headers(&self) -> Vec<String> {
        self.columns.iter().map(Column::header).collect()
    }

    /// Equal-length series and a strictly increasing `t_s` column.
    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        for c in &self.columns {
            if c.values.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: c.values.len(),
                });
            }
            // written negated so NaN fails too
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            let unordered = c.values.windows(2).any(|w| !(w[1] > w[0]));
            if c.is_time() && unordered {
                return Err(Error::InvalidParameter {
                    name: "t_s",
                    reason: "time column must be strictly increasing",
                });
            }
        }
        Ok(())
    }

    /// Attaches every device parameter under unit-suffixed keys.
    pub fn record_params(&mut self, p: &DeviceParams) {
        self.meta_number("e_C", p.constants.e);
        self.meta_number("d_m", p.geometry.d);
        self.meta_number("l_x_m", p.geometry.l_x);
        self.meta_number("l_y_m", p.geometry.l_y);
        self.meta_number("l_z_m", p.geometry.l_z);
        self.meta_number("c0_per_m3", p.material.c0);
        self.meta_number("mu_ion_m2_per_Vs", p.material.mu_ion);
        self.meta_number("mu_e_m2_per_Vs", p.material.mu_e);
        self.meta_number("g0_S", p.material.g0);
        self.meta_number("q_max_C", p.material.q_max);
        self.meta_number("tau_retention_s", p.material.tau_retention);
        self.meta_number("write_threshold_V", p.write_threshold);
    }
}
