//! Doubling constants and Poincaré constants of finite spaces.

mod doubling;
mod poincare;

pub use doubling::{
    default_radii, doubling_report, greedy_cover, measure_doubling, measure_ratio, metric_doubling,
    verify_doubling_remark, DoublingEstimate, DoublingReport, RemarkCheck, Witness, Witnesses,
};
pub use poincare::{
    poincare_check, poincare_constant, poincare_quotient, PoincareCheck, PoincareOptions, PoincareReport,
};
