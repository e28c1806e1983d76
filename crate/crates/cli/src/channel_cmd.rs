//! `channel`: compute the end-to-end channel by one or more methods and
//! export each result as JSON plus a CSV of the channel matrix entries.

use std::time::Instant;

use clap::Args;
use serde::Serialize;

use riswire::{ChannelResult, LoadNetwork};

use crate::common::{
    load_network, obtain_blocks, write_json, write_matrix_csv, CliError, Context,
};

#[derive(Args, Debug)]
pub struct ChannelOpts {
    /// Solve the full coupled port network column by column.
    #[arg(long)]
    pub direct: bool,
    /// Evaluate the block closed form.
    #[arg(long)]
    pub closed_form: bool,
    /// Evaluate the far-field scalar form (single-transmitter,
    /// single-receiver scenarios only).
    #[arg(long)]
    pub far_field: bool,
}

#[derive(Serialize)]
struct Summary {
    geometry_hash: String,
    cache_hit: bool,
    methods: Vec<String>,
    /// Largest entrywise relative gap between the direct and closed-form
    /// channels; present only when both were computed.
    #[serde(skip_serializing_if = "Option::is_none")]
    max_rel_discrepancy: Option<f64>,
    wall_ms: f64,
}

fn compute(
    method: &str,
    blocks: &riswire::ImpedanceBlocks,
    loads: &LoadNetwork,
) -> Result<ChannelResult, CliError> {
    let result = match method {
        "direct" => riswire::e2e_matrix_direct(blocks, loads),
        "closed_form" => riswire::e2e_closed_form(blocks, loads),
        "far_field" => riswire::far_field_siso(blocks, loads),
        _ => unreachable!(),
    }?;
    Ok(result)
}

pub fn run(ctx: &Context, opts: &ChannelOpts) -> Result<(), CliError> {
    let mut methods = Vec::new();
    if opts.direct {
        methods.push("direct");
    }
    if opts.closed_form {
        methods.push("closed_form");
    }
    if opts.far_field {
        methods.push("far_field");
    }
    if methods.is_empty() {
        return Err(CliError::usage(
            "select at least one of --direct, --closed-form, --far-field",
        ));
    }
    let nt = ctx.scenario.n_transmit();
    let nr = ctx.scenario.n_receive();
    if opts.far_field && (nt != 1 || nr != 1) {
        return Err(CliError::usage(format!(
            "--far-field needs exactly one transmitter and one receiver, got {nt} and {nr}"
        )));
    }

    let start = Instant::now();
    let outcome = obtain_blocks(&ctx.scenario, &ctx.quad, ctx.cache_dir.as_deref())?;
    let loads = load_network(ctx)?;

    let mut results: Vec<(&str, ChannelResult)> = Vec::new();
    for method in &methods {
        let result = compute(method, &outcome.blocks, &loads)?;
        write_json(&ctx.out.join(format!("channel_{method}.json")), &result)?;
        write_matrix_csv(&ctx.out.join(format!("h_e2e_{method}.csv")), &result.h_e2e)?;
        results.push((method, result));
    }

    let max_rel_discrepancy = match (
        results.iter().find(|(m, _)| *m == "direct"),
        results.iter().find(|(m, _)| *m == "closed_form"),
    ) {
        (Some((_, a)), Some((_, b))) => {
            let scale = a.h_e2e.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
            let gap = (&a.h_e2e - &b.h_e2e)
                .iter()
                .map(|z| z.norm())
                .fold(0.0f64, f64::max);
            Some(if scale > 0.0 { gap / scale } else { gap })
        }
        _ => None,
    };

    let summary = Summary {
        geometry_hash: outcome.key,
        cache_hit: outcome.cache_hit,
        methods: methods.iter().map(|s| s.to_string()).collect(),
        max_rel_discrepancy,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    write_json(&ctx.out.join("channel_summary.json"), &summary)?;
    match max_rel_discrepancy {
        Some(d) => println!(
            "computed {} channel(s); direct vs closed-form max relative discrepancy {d:.3e}",
            methods.len()
        ),
        None => println!("computed {} channel(s)", methods.len()),
    }
    Ok(())
}
