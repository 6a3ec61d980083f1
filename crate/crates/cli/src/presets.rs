//! Parameterizations of the reference figures.

use std::str::FromStr;

use crate::config::{Access, CoverageMethod, ExperimentConfig, Mode, SweepVariable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
}

impl FromStr for Figure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "fig1" => Ok(Figure::Fig1),
            "fig2" => Ok(Figure::Fig2),
            "fig3" => Ok(Figure::Fig3),
            "fig4" => Ok(Figure::Fig4),
            "fig5" => Ok(Figure::Fig5),
            "fig6" => Ok(Figure::Fig6),
            other => Err(format!("unknown preset `{other}`, expected fig1..fig6")),
        }
    }
}

fn range(start: f64, step: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| start + k as f64 * step).collect()
}

pub fn preset(figure: Figure) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    let sigmas = vec![5.0, 10.0, 15.0, 20.0, 25.0, 30.0];
    match figure {
        // Coverage against σ for two cluster densities, with simulation.
        Figure::Fig1 => {
            cfg.mode = Mode::Sweep;
            cfg.network.n_bar = 5.0;
            cfg.network.q = Access::Fixed(0.3);
            cfg.sweep.variable = Some(SweepVariable::SigmaM);
            cfg.sweep.values = sigmas;
            cfg.sweep.series_variable = Some(SweepVariable::LambdaPPerKm2);
            cfg.sweep.series_values = vec![10.0, 20.0];
            cfg.sweep.simulate = true;
            cfg.output_path = "fig1.csv".into();
        }
        // Coverage against q at three SIR thresholds, with simulation.
        Figure::Fig2 => {
            cfg.mode = Mode::Sweep;
            cfg.sweep.variable = Some(SweepVariable::Q);
            cfg.sweep.values = range(0.05, 0.05, 20);
            cfg.sweep.series_variable = Some(SweepVariable::ThetaDb);
            cfg.sweep.series_values = vec![0.0, 3.0, 6.0];
            cfg.sweep.simulate = true;
            cfg.output_path = "fig2.csv".into();
        }
        // Offloading gain of the three schemes against q.
        Figure::Fig3 => {
            cfg.mode = Mode::Sweep;
            cfg.sweep.variable = Some(SweepVariable::Q);
            cfg.sweep.values = range(0.05, 0.05, 20);
            cfg.output_path = "fig3.csv".into();
        }
        // Offloading gain of the three schemes against β at q*.
        Figure::Fig4 => {
            cfg.mode = Mode::Sweep;
            cfg.sweep.variable = Some(SweepVariable::Beta);
            cfg.sweep.values = range(0.0, 0.1, 11);
            cfg.output_path = "fig4.csv".into();
        }
        // Histograms of b* at q* and below it.
        Figure::Fig5 => {
            cfg.mode = Mode::Optimize;
            cfg.output_path = "fig5.csv".into();
        }
        // Closed-form offloading gain against σ for three densities.
        Figure::Fig6 => {
            cfg.mode = Mode::Sweep;
            cfg.coverage = CoverageMethod::ClosedForm;
            cfg.sweep.variable = Some(SweepVariable::SigmaM);
            cfg.sweep.values = sigmas;
            cfg.sweep.series_variable = Some(SweepVariable::LambdaPPerKm2);
            cfg.sweep.series_values = vec![10.0, 20.0, 30.0];
            cfg.output_path = "fig6.csv".into();
        }
    }
    cfg
}
