use contrastive::tre::{chasm_experiment, summarise_chasm, write_chasm_csv, ChasmConfig};
use serde_json::Value;

use super::{resolved, Experiment};
use crate::config::typed;
use crate::output::{float, Output};
use crate::CliError;

pub struct Chasm;

impl Experiment for Chasm {
    fn description(&self) -> &'static str {
        "single-ratio vs telescoping estimation across a density chasm"
    }

    fn run(&self, config: Value, out: &mut Output) -> Result<Value, CliError> {
        let config: ChasmConfig = typed(config)?;
        let rows = chasm_experiment(&config).map_err(anyhow::Error::from)?;
        out.write("chasm.csv", |w| Ok(write_chasm_csv(&rows, w)?))?;
        out.write("summary.csv", |w| {
            writeln!(w, "alpha,median_curvature_single,median_abs_error_single,median_abs_error_tre")?;
            for s in summarise_chasm(&rows) {
                writeln!(
                    w,
                    "{},{},{},{}",
                    float(s.alpha),
                    float(s.median_curvature_single),
                    float(s.median_abs_error_single),
                    float(s.median_abs_error_tre)
                )?;
            }
            Ok(())
        })?;
        resolved(&config)
    }
}
