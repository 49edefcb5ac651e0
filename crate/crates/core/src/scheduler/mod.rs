//! Single-kernel partitioning across clusters and many-kernel queue
//! scheduling.

mod compare;
mod density;
mod execute;
mod many;
mod plan;
mod search;

pub use crate::kernel_spec::KernelSpec;
pub use compare::{
    compare_baselines, default_searched_config, geomean, search_config, Comparison, ComparisonRow,
    ConfigSearch, GeomeanRow, SearchedConfig,
};
pub use density::DensityMap;
pub use execute::execute_plan;
pub use many::{
    schedule_many, schedule_many_with, serial_best_homogeneous, serial_cycles, serial_cycles_on,
    KernelPlacement, ManyReport,
};
pub use plan::{
    evaluate_plan, evaluate_plan_with, merge_cycles, template_regions, Assignment, ClusterReport,
    PartitionPlan, PlanScore, Region, RegionKind, RegionReport, ScheduleReport,
};
pub use search::{grid_cuts, search_single_kernel, search_with, Objective, SearchOptions};
