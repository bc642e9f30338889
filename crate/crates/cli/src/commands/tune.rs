use std::fmt::Write as _;

use log::info;
use mortsim_core::data_io::to_log_rates;
use mortsim_core::forecaster::{tune, AgeSplit, TuneGrid};

use super::{num, write_csv, Ctx};
use crate::error::CliResult;
use crate::TuneArgs;

pub fn run(ctx: &mut Ctx, args: TuneArgs) -> CliResult<()> {
    let sexes = ctx.sexes(&args.data)?;
    let base = ctx.train_config(&args.model)?;
    let d = TuneGrid::default();
    let grid = TuneGrid {
        input_sizes: ctx
            .res
            .list("tune", "input_sizes", args.input_sizes, d.input_sizes)?,
        depths: ctx.res.list("tune", "depths", args.depths, d.depths)?,
        hidden_widths: ctx.res.list(
            "tune",
            "hidden_widths",
            args.hidden_widths,
            d.hidden_widths,
        )?,
    };
    let history = ctx.mortality(&args.data, &sexes)?;
    for (&sex, surface) in &history {
        let x = to_log_rates(surface);
        let split = AgeSplit::standard(x.max_age());
        let report = tune(&base, &grid, &x, &split, ctx.seed)?;
        let path = ctx.out.file(&format!("tune_{sex}.csv"));
        let rows = report.entries.iter().map(|e| {
            [
                e.input_size.to_string(),
                e.depth.to_string(),
                e.hidden_width.to_string(),
                e.param_count.to_string(),
                e.seed.to_string(),
                num(e.min_validation_loss),
                e.min_at_step.to_string(),
                e.validation_losses
                    .last()
                    .map(|&l| num(l))
                    .unwrap_or_default(),
            ]
        });
        write_csv(
            &path,
            &[
                "input_size",
                "depth",
                "hidden_width",
                "param_count",
                "seed",
                "min_validation_loss",
                "min_at_step",
                "final_validation_loss",
            ],
            rows,
        )?;

        // Drop-in [train] section for the chosen geometry.
        let b = &report.best_config;
        let best = &report.entries[report.best];
        info!(
            "{sex}: best N={} K={} H={} with validation loss {:.6e} at step {}",
            b.input_size, b.depth, b.hidden_width, best.min_validation_loss, best.min_at_step
        );
        let mut text = String::new();
        writeln!(
            text,
            "# best of {} grid points for sex {sex}",
            report.entries.len()
        )
        .unwrap();
        writeln!(
            text,
            "# minimum validation loss {}",
            num(best.min_validation_loss)
        )
        .unwrap();
        writeln!(text, "[train]").unwrap();
        for (k, v) in [
            ("input_size", b.input_size.to_string()),
            ("depth", b.depth.to_string()),
            ("hidden_width", b.hidden_width.to_string()),
            ("steps", b.steps.to_string()),
        ] {
            writeln!(text, "{k} = {v}").unwrap();
        }
        ctx.out.write_text(&format!("best_{sex}.cfg"), &text)?;
    }
    ctx.manifest
        .seeds
        .insert("grid_point_seed_base".into(), ctx.seed);
    Ok(())
}
