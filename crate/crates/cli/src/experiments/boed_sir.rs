use contrastive::boed::{sir_design_experiment, SirExperimentConfig};
use contrastive::points::median;
use serde_json::{json, Value};

use super::{resolved, Experiment};
use crate::config::typed;
use crate::output::{float, floats, Output};
use crate::CliError;

pub const CHECKS_HEADER: &str =
    "replicate,infected,recovered,mode_beta,mode_gamma,mean_beta,mean_gamma,mode_distance,mean_distance,prior_mean_distance";

pub struct BoedSir;

impl Experiment for BoedSir {
    fn description(&self) -> &'static str {
        "choosing the measurement time of a stochastic SIR epidemic"
    }

    fn run(&self, config: Value, out: &mut Output) -> Result<Value, CliError> {
        let config: SirExperimentConfig = typed(config)?;
        let result = sir_design_experiment(&config).map_err(anyhow::Error::from)?;
        out.write("trace.csv", |w| Ok(result.trace.write_csv(w)?))?;
        out.write("oracle.csv", |w| {
            writeln!(w, "time,mi,std_error")?;
            for (t, m) in config.times.iter().zip(&result.oracle) {
                writeln!(w, "{},{},{}", float(*t), float(m.mi), float(m.std_error))?;
            }
            Ok(())
        })?;
        out.write("posterior.csv", |w| Ok(result.posterior.write_csv(w)?))?;
        out.write("posterior_checks.csv", |w| {
            writeln!(w, "{CHECKS_HEADER}")?;
            for c in &result.checks {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{}",
                    c.replicate,
                    floats(&c.x_obs),
                    floats(&c.mode),
                    floats(&c.mean),
                    float(c.mode_distance),
                    float(c.mean_distance),
                    float(c.prior_mean_distance)
                )?;
            }
            Ok(())
        })?;
        let modes: Vec<f64> = result.checks.iter().map(|c| c.mode_distance).collect();
        out.write_json(
            "summary.json",
            &json!({
                "chosen_time": result.trace.final_design,
                "oracle_argmax_time": config.times[result.oracle_argmax],
                "grid_steps_apart": result.chosen_index.abs_diff(result.oracle_argmax),
                "trajectories": result.trajectories,
                "conservation_violations": result.conservation_violations,
                "median_mode_distance": median(&modes),
                "prior_mean_distance": result.checks.first().map(|c| c.prior_mean_distance),
            }),
        )?;
        resolved(&config)
    }
}
