//! Pipeline orchestration, protection metric, rendering and experiment suites.

pub mod ablation;
pub mod metric;
pub mod pipeline;
pub mod render;

pub use ablation::{ablation_suite, shortest_path_objective, AblationReport, Variant, VariantReport};
pub use metric::{protection_metric, MetricError, ProtectionEntry, ProtectionLog};
pub use pipeline::{
    metric_report, read_json, run_pipeline, run_pipeline_from, run_stages, write_json, ArtifactBundle, DemSource,
    Instance, MetricReport, NamedRoutes, PipelineConfig, PipelineError, ScenarioConfig, SolutionFile, SolverConfig,
    Stage,
};
pub use render::{graph_dot, graph_svg, plan_dot, plan_svg, raster_svg, RenderStyle};
