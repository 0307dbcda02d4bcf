use ambimt_core::eval::stats::{correlate_metrics, parse_metrics_table};
use ambimt_core::eval::{evaluate_run, parse_hypotheses};
use anyhow::{Context, Result};

use super::{load_eval, open, render_diagnostics, Outcome, EXIT_DIAGNOSTICS};
use crate::manifest::Run;
use crate::{CorrelateArgs, EvaluateArgs};

pub fn evaluate(args: EvaluateArgs) -> Result<Outcome> {
    let mut run = Run::start("evaluate", &args, None);
    run.input(&args.eval_set)?;
    run.input(&args.hypotheses)?;
    let items = load_eval(&args.eval_set)?;
    let (hyps, hyp_diags) = parse_hypotheses(open(&args.hypotheses)?)
        .with_context(|| format!("reading {}", args.hypotheses.display()))?;
    let mut report = evaluate_run(&hyps, &items, args.miss_policy, args.match_mode)
        .with_context(|| format!("scoring {}", args.hypotheses.display()))?;
    report
        .diagnostics
        .extend(render_diagnostics(&args.hypotheses, &hyp_diags));

    if let Some(out) = &args.out {
        let mut body = serde_json::to_string_pretty(&report)?;
        body.push('\n');
        run.write(out, body.as_bytes())?;
    }
    run.finish(args.manifest.as_deref())?;
    let exit = if report.diagnostics.is_empty() {
        0
    } else {
        EXIT_DIAGNOSTICS
    };
    Ok(Outcome::new(report.render_text(), &report).with_exit(exit))
}

pub fn correlate(args: CorrelateArgs) -> Result<Outcome> {
    let mut run = Run::start("correlate", &args, None);
    run.input(&args.table)?;
    let text = std::fs::read_to_string(&args.table)
        .with_context(|| format!("reading {}", args.table.display()))?;
    let table =
        parse_metrics_table(&text).with_context(|| format!("parsing {}", args.table.display()))?;
    let results = correlate_metrics(&table);
    if let Some(out) = &args.out {
        let mut body = serde_json::to_string_pretty(&results)?;
        body.push('\n');
        run.write(out, body.as_bytes())?;
    }
    run.finish(args.manifest.as_deref())?;

    let mut out = format!("{} systems\n", table.systems.len());
    for r in &results {
        match (&r.result, &r.error) {
            (Some(c), _) => out.push_str(&format!(
                "{}\trho = {:.4}\tp = {:.4}\tn = {}",
                r.metric, c.rho, c.p_value, c.n
            )),
            (None, Some(e)) => out.push_str(&format!("{}\tundefined: {e}", r.metric)),
            (None, None) => out.push_str(&r.metric),
        }
        if !r.excluded.is_empty() {
            out.push_str(&format!("\texcluded: {}", r.excluded.join(", ")));
        }
        out.push('\n');
    }
    Ok(Outcome::new(out, &results))
}
