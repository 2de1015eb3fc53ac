//! Dose-finding designs for phase I oncology trials: the i3+3 rule with
//! its Beta safety rules, 3+3, BOIN, CRM and BLRM comparators, and a
//! Monte Carlo engine for their operating characteristics.

pub mod bayes;
pub mod design;
pub mod error;
pub mod interval;
pub mod model;
pub mod rules;
pub mod sim;
pub mod state;
pub mod table;

pub use design::{build_design, Design, DesignOptions, DesignRegistry, DesignSpec};
pub use error::{Error, Result};
pub use interval::EquivalenceInterval;
pub use state::{Cohort, ConductLimits, Step, StopReason, TrialState};
