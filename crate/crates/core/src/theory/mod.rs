//! Constructive checks of the estimator's theory: Frobenius packing sets inside
//! `K(alpha, R)`, the Rademacher complexity of rank-one sign matrices, and the
//! closed-form upper and minimax lower rates.
//!
//! Every report renders as `key=value` lines.

use std::io::Write;

use crate::error::Result;

mod packing;
mod rademacher;
mod rates;

pub use packing::{packing_generate, packing_verify, PackingConfig, PackingReport};
pub use rademacher::{rademacher_sign_sup, sign_matrix_sup, RademacherReport, MAX_ENUMERATION_DIM};
pub use rates::{rate_bounds, RateBounds, RateParams};

/// Structured text output, one `key=value` pair per line.
pub trait KeyValueReport {
    fn entries(&self) -> Vec<(&'static str, String)>;

    fn write_report(&self, mut w: impl Write) -> Result<()>
    where
        Self: Sized,
    {
        for (k, v) in self.entries() {
            writeln!(w, "{k}={v}")?;
        }
        Ok(())
    }

    fn to_report_string(&self) -> String
    where
        Self: Sized,
    {
        let mut buf = Vec::new();
        self.write_report(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii report")
    }
}
