//! MOF names of the form `str_m<metal>_o<linker1>_o<linker2>_<net>_sym.<group>`,
//! e.g. `str_m5_o16_o16_sra_sym.77`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NameFeatures {
    pub metal_units: u32,
    pub linker1_count: u32,
    pub linker2_count: u32,
    /// Periodic-net label such as `pcu` or `sra`.
    pub net_code: String,
    /// Kept as an opaque integer; the source data does not say whether this
    /// is a space-group number or a count.
    pub space_group: u32,
}

impl fmt::Display for NameFeatures {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "str_m{}_o{}_o{}_{}_sym.{}",
            self.metal_units,
            self.linker1_count,
            self.linker2_count,
            self.net_code,
            self.space_group
        )
    }
}

impl std::str::FromStr for NameFeatures {
    type Err = NameParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_mof_name(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid MOF name {name:?}: expected {expected} at byte {offset}")]
pub struct NameParseError {
    pub name: String,
    pub offset: usize,
    pub expected: &'static str,
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn fail(&self, at: usize, expected: &'static str) -> NameParseError {
        NameParseError {
            name: self.src.to_string(),
            offset: at,
            expected,
        }
    }

    fn literal(&mut self, lit: &'static str) -> Result<(), NameParseError> {
        if self.src[self.pos..].starts_with(lit) {
            self.pos += lit.len();
            Ok(())
        } else {
            Err(self.fail(self.pos, lit))
        }
    }

    /// Decimal integer without leading zeros, so formatting reproduces it.
    fn integer(
        &mut self,
        field_start: usize,
        expected: &'static str,
    ) -> Result<u32, NameParseError> {
        let rest = &self.src[self.pos..];
        let len = rest.bytes().take_while(u8::is_ascii_digit).count();
        if len == 0 || (len > 1 && rest.starts_with('0')) {
            return Err(self.fail(field_start, expected));
        }
        let value = rest[..len]
            .parse::<u32>()
            .map_err(|_| self.fail(field_start, expected))?;
        self.pos += len;
        Ok(value)
    }
}

/// Parses a MOF name into its structural descriptors.
///
/// Errors carry the byte offset where the offending field starts.
pub fn parse_mof_name(name: &str) -> Result<NameFeatures, NameParseError> {
    let mut c = Cursor { src: name, pos: 0 };
    c.literal("str")?;

    let mut counts = [0u32; 3];
    for (slot, prefix) in counts.iter_mut().zip(["_m", "_o", "_o"]) {
        let start = c.pos;
        c.literal(prefix)?;
        *slot = c.integer(start, "a count without leading zeros")?;
    }

    let start = c.pos;
    c.literal("_")?;
    let rest = &name[c.pos..];
    let len = rest.bytes().take_while(u8::is_ascii_lowercase).count();
    if len == 0 {
        return Err(c.fail(start, "a lowercase net code"));
    }
    let net_code = rest[..len].to_string();
    c.pos += len;

    let start = c.pos;
    c.literal("_sym.")?;
    let space_group = c.integer(start, "a positive symmetry index")?;
    if space_group == 0 {
        return Err(c.fail(start, "a positive symmetry index"));
    }
    if c.pos != name.len() {
        return Err(c.fail(c.pos, "end of name"));
    }

    Ok(NameFeatures {
        metal_units: counts[0],
        linker1_count: counts[1],
        linker2_count: counts[2],
        net_code,
        space_group,
    })
}
