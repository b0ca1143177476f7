//! Named examples with their expected results, the verification harness that
//! runs them against stored goldens, and random model generators.

mod worked;
mod random;

pub use worked::{
    first_difference, golden_text, worked_examples, run_example, verify_paper, write_goldens, Check, ExampleError,
    ExampleName, ExampleOutcome, ExampleParams, ExampleReport, GoldenComparison, GoldenStatus, Goldens, WorkedExample,
    WorkedReport, GOLDEN_VERSION,
};
pub use random::{random_tree_model, RandomModelParams};
