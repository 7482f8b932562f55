//! Grid search over embedding and model settings, dev-based selection, and
//! the reports built from the result table.

mod grid;
mod heatmap;
mod report;
mod run;
mod table;

pub use grid::{CorpusSettings, EmbeddingKey, ExperimentGrid, GridCell, ModelKind};
pub use heatmap::{emit_heatmap, render_heatmap};
pub use report::{compute_trends, emit_comparison, emit_trends, Comparison, Trend, TrendAxis, TrendReport};
pub use run::{run_grid, GridInputs};
pub use table::{CellRecord, CellStatus, ResultTable};
