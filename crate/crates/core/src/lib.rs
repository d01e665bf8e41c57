pub mod assessment;
pub mod calculus;
pub mod pathway;
pub mod reference;
pub mod reporting;
pub mod taxonomy;

#[cfg(any(test, feature = "testkit"))]
pub mod testkit;
