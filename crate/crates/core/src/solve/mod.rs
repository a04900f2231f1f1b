//! SMT-LIB2 rendering of path formulas and an external solver driver.

mod process;
mod response;
mod system;

pub use process::{SmtProcess, Solver, SolverConfig, SolverDialect, SolverResult};
pub use response::{parse_response, ParsedResponse, Status};
pub use system::{Assertion, ConstraintSystem, LOGIC};
