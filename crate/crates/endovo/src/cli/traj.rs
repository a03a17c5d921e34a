use std::path::PathBuf;

use clap::Args;
use endovo_core::traj_metrics::{evaluate, DEFAULT_MAX_DT};
use nalgebra::Vector2;
use serde_json::{json, Value};

use super::{check_input, check_output, display_name, invalid, plot, Classify, CliError, Ctx, Outcome};
use crate::io::read_trajectory;
use crate::report::{header, num, stats};

#[derive(Debug, Args)]
pub(super) struct EvalTrajArgs {
    /// Ground-truth trajectory CSV.
    gt: PathBuf,
    /// Estimated trajectory CSV.
    est: PathBuf,
    /// Largest timestamp difference (s) for two poses to be associated.
    #[arg(long, default_value_t = DEFAULT_MAX_DT)]
    max_dt: f64,
    /// Fit a scale as well (for monocular estimates).
    #[arg(long)]
    scale: bool,
    /// Frame gap of the relative pose error.
    #[arg(long, default_value_t = 1)]
    delta: usize,
    /// Keep every n-th pose of both files.
    #[arg(long, default_value_t = 1)]
    decimate: usize,
    /// Top-view plot of both trajectories (PNG).
    #[arg(long, value_name = "PNG")]
    plot: Option<PathBuf>,
}

pub(super) fn eval_traj(a: &EvalTrajArgs, _ctx: &Ctx) -> Result<Outcome, CliError> {
    check_input(&a.gt)?;
    check_input(&a.est)?;
    if let Some(p) = &a.plot {
        check_output(p)?;
    }
    if !(a.max_dt >= 0.0 && a.max_dt.is_finite()) {
        return invalid("--max-dt must be a non-negative number");
    }
    if a.delta == 0 {
        return invalid("--delta must be at least 1");
    }
    let gt = read_trajectory(&a.gt, a.decimate).invalid()?;
    let est = read_trajectory(&a.est, a.decimate).invalid()?;
    let ev = evaluate(&gt, &est, a.max_dt, a.scale, a.delta).failed()?;

    let s = &ev.ate.alignment;
    let mut r = header("eval-traj");
    r.insert("inputs".into(), json!({ "gt": display_name(&a.gt), "est": display_name(&a.est) }));
    r.insert("pairs".into(), json!(ev.pairs.len()));
    r.insert(
        "alignment".into(),
        json!({
            "scale": num(s.scale),
            "translation": crate::report::nums(s.translation.as_slice()),
            "rotation_deg": num(s.rotation.angle().to_degrees()),
        }),
    );
    r.insert("ate".into(), json!({ "stats": stats(&ev.ate.stats) }));
    r.insert(
        "rpe".into(),
        json!({
            "delta": ev.rpe.delta,
            "trans": stats(&ev.rpe.trans),
            "rot_deg": stats(&ev.rpe.rot.scaled(1f64.to_degrees())),
        }),
    );

    if let Some(path) = &a.plot {
        let (g, e): (Vec<_>, Vec<_>) = ev
            .pairs
            .iter()
            .map(|&(i, j)| {
                let q = gt.poses()[i].translation();
                let p = s.apply(est.poses()[j].translation());
                (Vector2::new(q.x, q.y), Vector2::new(p.x, p.y))
            })
            .unzip();
        plot::trajectories(path, &g, &e)?;
        r.insert("plot".into(), Value::String(display_name(path)));
    }

    let summary = format!(
        "pairs {}\nATE rmse {:.6} mean {:.6} max {:.6}\nRPE(Δ={}) trans rmse {:.6} rot rmse {:.6} deg\n",
        ev.pairs.len(),
        ev.ate.stats.rmse,
        ev.ate.stats.mean,
        ev.ate.stats.max,
        ev.rpe.delta,
        ev.rpe.trans.rmse,
        ev.rpe.rot.rmse.to_degrees(),
    );
    Ok(Outcome { report: r, summary })
}
