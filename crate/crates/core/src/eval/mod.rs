//! Classification metrics, occlusion-robustness sweeps and their CSV / SVG
//! reports.

pub mod metrics;
pub mod report;
pub mod sweep;

pub use metrics::{weighted_prf, ClassMetrics, ClassificationReport};
pub use report::{read_sweep_csv, sweep_svg, write_report_csv, write_sweep_csv};
pub use sweep::{evaluate_classifier, evaluate_lifter, occlude_rows, occlusion_sweep, SweepResult, SweepRow, SweepSystem};
