use log::info;
use mortsim_core::data_io::{to_log_rates, Sex};
use mortsim_core::forecaster::{
    final_protocol, make_training_sequences, train, AgeSplit, TrainConfig, TrainedModel,
};
use mortsim_core::neural::Checkpoint;
use serde_json::json;

use super::{num, write_csv, Ctx};
use crate::error::CliResult;
use crate::TrainArgs;

pub fn run(ctx: &mut Ctx, args: TrainArgs) -> CliResult<()> {
    let sexes = ctx.sexes(&args.data)?;
    let cfg = ctx.train_config(&args.model)?;
    let final_run = ctx
        .res
        .flag("train", "final_protocol", args.final_protocol)?;
    let history = ctx.mortality(&args.data, &sexes)?;
    for (&sex, surface) in &history {
        let x = to_log_rates(surface);
        let model = if final_run {
            let split = AgeSplit::standard(x.max_age());
            let (model, report) = final_protocol(&cfg, &x, &split, ctx.seed)?;
            info!(
                "{sex}: test loss {:.6e}, test bias {:.6e}",
                report.test_loss, report.test_bias
            );
            let body = json!({
                "sex": sex.to_string(),
                "train_loss": report.train_loss,
                "test_loss": report.test_loss,
                "test_bias": report.test_bias,
                "seed": report.seed,
                "steps": report.steps,
                "training_ages": split.training_and_validation(),
                "test_ages": split.test,
            });
            let text = serde_json::to_string_pretty(&body).expect("report serializes") + "\n";
            ctx.out
                .write_text(&format!("final_report_{sex}.json"), &text)?;
            model
        } else {
            let ages: Vec<u32> = (0..=x.max_age()).collect();
            let data = make_training_sequences(&x, cfg.input_size, cfg.n_train, &ages)?;
            train(&cfg, &data, ctx.seed)?
        };
        info!(
            "{sex}: final training loss {:.6e}",
            model.checkpoint_losses.last().copied().unwrap_or(f64::NAN)
        );
        save_checkpoint(ctx, sex, &cfg, &model, final_run)?;
        write_history(ctx, sex, &cfg, &model)?;
    }
    Ok(())
}

pub fn checkpoint_name(sex: Sex) -> String {
    format!("checkpoint_{sex}.json")
}

fn save_checkpoint(
    ctx: &mut Ctx,
    sex: Sex,
    cfg: &TrainConfig,
    model: &TrainedModel,
    final_run: bool,
) -> CliResult<()> {
    let mut meta = std::collections::BTreeMap::new();
    meta.insert("sex".to_string(), sex.to_string());
    meta.insert(
        "ages".to_string(),
        if final_run {
            "training+validation"
        } else {
            "all"
        }
        .to_string(),
    );
    meta.insert(
        "train_config".to_string(),
        serde_json::to_string(cfg).expect("config serializes"),
    );
    if let Some(l) = model.checkpoint_losses.last() {
        meta.insert("final_training_loss".to_string(), num(*l));
    }
    let ckpt = Checkpoint {
        cell: model.cell.clone(),
        seed: model.seed,
        meta,
    };
    ckpt.save(&ctx.out.file(&checkpoint_name(sex)))?;
    Ok(())
}

fn write_history(
    ctx: &mut Ctx,
    sex: Sex,
    cfg: &TrainConfig,
    model: &TrainedModel,
) -> CliResult<()> {
    let path = ctx.out.file(&format!("loss_history_{sex}.csv"));
    let rows = (0..model.window_losses.len()).map(|w| {
        [
            w.to_string(),
            ((w + 1) * cfg.window).to_string(),
            num(model.window_losses[w]),
            num(model.checkpoint_losses[w]),
            num(model.learning_rates[w]),
        ]
    });
    write_csv(
        &path,
        &[
            "window",
            "step",
            "window_mean_loss",
            "training_loss",
            "learning_rate",
        ],
        rows,
    )
}
