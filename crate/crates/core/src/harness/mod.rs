//! Scenario files, generators, and the experiment drivers behind the CLI.

pub mod compare;
pub mod generate;
pub mod growth;
pub mod report;
pub mod scenario;

pub use compare::{run_compare, CellStatus, CompareConfig, Method, ResultRow, ResultTable};
pub use generate::{
    default_params, generate_grid, generate_large, generate_random, FlowSpec, GridSpec, LargeSpec,
    RandomSpec,
};
pub use growth::{run_growth, GrowthConfig, GrowthRecord, GrowthTable};
pub use report::{write_paths_csv, write_plan_csv};
pub use scenario::{load_scenario, save_scenario, ArcSpec, ArcTiming, Scenario};
