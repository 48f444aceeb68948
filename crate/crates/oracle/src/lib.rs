//! Independent reference implementations used to check `energon`.

pub mod enumerate;
pub mod random;
pub mod sim;
pub mod suites;
pub mod toy;
