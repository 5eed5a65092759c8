use rayon::prelude::*;
use serde_json::json;
use stir_core::bandit::{simulate, write_trajectory_csv, Policy, Trajectory};

use super::*;
use crate::config::PolicyName;

fn policies(cfg: &ExperimentConfig) -> Result<Vec<Policy>, CliError> {
    let b = &cfg.bandit;
    let fractions = if b.alpha_hat.is_empty() {
        vec![b.corruption_fraction]
    } else {
        b.alpha_hat.clone()
    };
    let mut out = Vec::new();
    for p in &b.policies {
        match p {
            PolicyName::WucbLin => out.push(Policy::WucbLin),
            PolicyName::Linucb => out.push(Policy::LinUcb),
            PolicyName::RucbLin => {
                for &alpha_hat in &fractions {
                    if !(0.0..0.5).contains(&alpha_hat) {
                        return Err(stir_core::DataError::InvalidParameter {
                            name: "alpha_hat",
                            reason: format!("must lie in [0, 0.5), got {alpha_hat}"),
                        }
                        .into());
                    }
                    out.push(Policy::RucbLin { alpha_hat });
                }
            }
        }
    }
    Ok(out)
}

fn slug(p: &Policy) -> String {
    match p {
        Policy::RucbLin { alpha_hat } => format!("rucb-lin-{alpha_hat}"),
        other => other.name(),
    }
}

/// Plays every policy on the same per-seed environments; writes
/// `regret.csv` (per policy), `regret_per_seed.csv` and, unless disabled,
/// one trajectory CSV per (policy, seed).
pub fn run(cfg: &ExperimentConfig) -> Result<serde_json::Value, CliError> {
    let pols = policies(cfg)?;
    cfg.policy.validate()?;
    cfg.bandit.env(cfg.seed).validate()?;
    prepare_out(cfg)?;
    let traj_dir = cfg.out.join("trajectories");
    if cfg.bandit.trajectories {
        create_dir(&traj_dir)?;
    }

    let cases: Vec<(usize, usize)> = (0..cfg.trials)
        .flat_map(|k| (0..pols.len()).map(move |p| (k, p)))
        .collect();
    let trajectories: Vec<Trajectory> = cases
        .par_iter()
        .map(|&(k, p)| simulate(&cfg.bandit.env(cfg.trial_seed(k)), pols[p], &cfg.policy))
        .collect::<Result<_, _>>()?;

    if cfg.bandit.trajectories {
        for t in &trajectories {
            let path = traj_dir.join(format!("{}-seed-{}.csv", slug(&pols[pols.iter().position(|p| p.name() == t.policy).unwrap()]), t.seed));
            let mut buf = Vec::new();
            write_trajectory_csv(t, &mut buf)?;
            write_file(&path, buf)?;
        }
    }

    let per_seed_path = cfg.out.join("regret_per_seed.csv");
    let mut w = csv_writer(&per_seed_path)?;
    csv_row(&mut w, &per_seed_path, ["seed", "policy", "cumulative_regret", "corrupted_rounds"])?;
    for t in &trajectories {
        csv_row(
            &mut w,
            &per_seed_path,
            [
                t.seed.to_string(),
                t.policy.clone(),
                t.cumulative_regret().to_string(),
                t.rounds.iter().filter(|r| r.corrupted).count().to_string(),
            ],
        )?;
    }
    finish_csv(w, &per_seed_path)?;

    let path = cfg.out.join("regret.csv");
    let mut w = csv_writer(&path)?;
    csv_row(
        &mut w,
        &path,
        ["policy", "seeds", "mean_regret", "std_regret", "mean_weight_corrupted", "mean_weight_clean"],
    )?;
    let mut summary = Vec::new();
    for (p, policy) in pols.iter().enumerate() {
        let mine: Vec<&Trajectory> = cases
            .iter()
            .zip(&trajectories)
            .filter(|((_, q), _)| *q == p)
            .map(|(_, t)| t)
            .collect();
        let regrets: Vec<f64> = mine.iter().map(|t| t.cumulative_regret()).collect();
        let (mean, std) = mean_std(&regrets);
        let avg = |vals: Vec<f64>| (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64);
        let bad = avg(mine.iter().filter_map(|t| t.mean_weights().0).collect());
        let good = avg(mine.iter().filter_map(|t| t.mean_weights().1).collect());
        csv_row(
            &mut w,
            &path,
            [
                policy.name(),
                regrets.len().to_string(),
                mean.to_string(),
                std.to_string(),
                cell(bad),
                cell(good),
            ],
        )?;
        summary.push(json!({ "policy": policy.name(), "mean_regret": mean, "std_regret": std }));
    }
    finish_csv(w, &path)?;
    Ok(json!({
        "command": "bandit",
        "seeds": cfg.trials,
        "regret": summary,
        "table": path.display().to_string(),
    }))
}
