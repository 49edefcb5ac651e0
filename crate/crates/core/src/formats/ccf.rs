//! Compute compression format (CCF) descriptors.
//!
//! A descriptor names the two dimensions of a matrix in storage order and
//! whether the inner one is compressed. `UMCK` is CSR of the M×K operand,
//! `UKCM` is its CSC, `UKUN` is a row-major dense K×N operand.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Matrix-multiplication dimension name: `A` is M×K, `B` is K×N.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Dim {
    M,
    K,
    N,
}

impl Dim {
    fn from_char(c: char) -> Option<Dim> {
        match c {
            'M' => Some(Dim::M),
            'K' => Some(Dim::K),
            'N' => Some(Dim::N),
            _ => None,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Dim::M => 'M',
            Dim::K => 'K',
            Dim::N => 'N',
        }
    }
}

impl fmt::Display for Dim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mode {
    Uncompressed,
    Compressed,
}

impl Mode {
    fn from_char(c: char) -> Option<Mode> {
        match c {
            'U' => Some(Mode::Uncompressed),
            'C' => Some(Mode::Compressed),
            _ => None,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Mode::Uncompressed => 'U',
            Mode::Compressed => 'C',
        }
    }
}

/// Which operand of `O = A·B` a matrix plays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    A,
    B,
    Output,
}

impl Role {
    /// Logical (row, column) dimensions.
    pub fn dims(self) -> (Dim, Dim) {
        match self {
            Role::A => (Dim::M, Dim::K),
            Role::B => (Dim::K, Dim::N),
            Role::Output => (Dim::M, Dim::N),
        }
    }
}

/// Per-dimension compression tag plus storage order. The outer mode is
/// always uncompressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct CcfDescriptor {
    pub outer_dim: Dim,
    pub inner_dim: Dim,
    pub inner_mode: Mode,
}

impl CcfDescriptor {
    pub const fn new(outer_dim: Dim, inner_dim: Dim, inner_mode: Mode) -> Self {
        Self {
            outer_dim,
            inner_dim,
            inner_mode,
        }
    }

    pub const fn dense(outer_dim: Dim, inner_dim: Dim) -> Self {
        Self::new(outer_dim, inner_dim, Mode::Uncompressed)
    }

    pub const fn compressed(outer_dim: Dim, inner_dim: Dim) -> Self {
        Self::new(outer_dim, inner_dim, Mode::Compressed)
    }

    pub fn outer_mode(&self) -> Mode {
        Mode::Uncompressed
    }

    pub fn is_compressed(&self) -> bool {
        self.inner_mode == Mode::Compressed
    }

    /// Row-major dense layout for a role.
    pub fn row_major(role: Role) -> Self {
        let (r, c) = role.dims();
        Self::dense(r, c)
    }

    /// Checks that this descriptor covers exactly the dimensions of `role`.
    pub fn check_role(&self, role: Role) -> Result<()> {
        let (r, c) = role.dims();
        let ok = (self.outer_dim == r && self.inner_dim == c)
            || (self.outer_dim == c && self.inner_dim == r);
        if ok {
            Ok(())
        } else {
            Err(Error::DimMismatch {
                expected: [r, c],
                found: [self.outer_dim, self.inner_dim],
            })
        }
    }

    /// The role this descriptor can describe, if unambiguous.
    pub fn role(&self) -> Option<Role> {
        [Role::A, Role::B, Role::Output]
            .into_iter()
            .find(|r| self.check_role(*r).is_ok())
    }
}

/// Parses a tag such as `UMCK`, read outer mode first.
pub fn parse_ccf(tag: &str) -> Result<CcfDescriptor> {
    let chars: Vec<char> = tag.trim().chars().collect();
    if chars.len() != 4 {
        return Err(Error::MalformedCcf(tag.to_string()));
    }
    let malformed = || Error::MalformedCcf(tag.to_string());
    let outer_mode = Mode::from_char(chars[0]).ok_or_else(malformed)?;
    let outer_dim = Dim::from_char(chars[1]).ok_or_else(malformed)?;
    let inner_mode = Mode::from_char(chars[2]).ok_or_else(malformed)?;
    let inner_dim = Dim::from_char(chars[3]).ok_or_else(malformed)?;
    if outer_mode == Mode::Compressed {
        return Err(Error::CompressedOuter(tag.to_string()));
    }
    if outer_dim == inner_dim {
        return Err(Error::RepeatedDim(tag.to_string(), outer_dim));
    }
    Ok(CcfDescriptor::new(outer_dim, inner_dim, inner_mode))
}

impl FromStr for CcfDescriptor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_ccf(s)
    }
}

impl TryFrom<String> for CcfDescriptor {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        parse_ccf(&s)
    }
}

impl From<CcfDescriptor> for String {
    fn from(c: CcfDescriptor) -> String {
        c.to_string()
    }
}

impl fmt::Display for CcfDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "U{}{}{}",
            self.outer_dim,
            self.inner_mode.letter(),
            self.inner_dim
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csr_of_a() {
        let c = parse_ccf("UMCK").unwrap();
        assert_eq!(c.outer_dim, Dim::M);
        assert_eq!(c.inner_dim, Dim::K);
        assert_eq!(c.outer_mode(), Mode::Uncompressed);
        assert_eq!(c.inner_mode, Mode::Compressed);
        assert_eq!(c.role(), Some(Role::A));
    }

    #[test]
    fn dense_a() {
        let c = parse_ccf("UMUK").unwrap();
        assert_eq!(c, CcfDescriptor::dense(Dim::M, Dim::K));
        assert!(!c.is_compressed());
    }

    #[test]
    fn rejects_compressed_outer() {
        assert!(matches!(parse_ccf("CKUM"), Err(Error::CompressedOuter(_))));
    }

    #[test]
    fn rejects_garbage() {
        for tag in ["", "UMC", "UMCKX", "XMCK", "UXCK", "UMXK", "UMCX", "umck"] {
            assert!(matches!(parse_ccf(tag), Err(Error::MalformedCcf(_))), "{tag}");
        }
        assert!(matches!(parse_ccf("UKCK"), Err(Error::RepeatedDim(_, Dim::K))));
    }

    #[test]
    fn display_round_trips() {
        for tag in ["UMCK", "UKCM", "UNCK", "UKCN", "UMUK", "UKUN", "UMUN"] {
            assert_eq!(parse_ccf(tag).unwrap().to_string(), tag);
        }
    }

    #[test]
    fn role_check() {
        let b = parse_ccf("UNCK").unwrap();
        assert!(b.check_role(Role::B).is_ok());
        assert!(matches!(b.check_role(Role::A), Err(Error::DimMismatch { .. })));
    }
}
