use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ExperimentError, TrialSummary};

/// IDs closer than this belong to the same group.
const ID_GROUP_TOLERANCE: f64 = 1e-6;

/// Shannon index of difficulty, bits.
pub fn index_of_difficulty(amplitude: f64, width: f64) -> Result<f64, ExperimentError> {
    if !(width.is_finite() && width > 0.0) {
        return Err(ExperimentError::InvalidWidth(width));
    }
    if !(amplitude.is_finite() && amplitude >= 0.0) {
        return Err(ExperimentError::InvalidTask(format!(
            "amplitude must be non-negative, got {amplitude}"
        )));
    }
    Ok((amplitude / width + 1.0).log2())
}

/// Mean ID and MT of all trials sharing an ID.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupMean {
    pub id_bits: f64,
    pub mean_mt_s: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittsModel {
    /// s
    pub a_s: f64,
    /// s/bit
    pub b_s_per_bit: f64,
    pub r2: f64,
    /// bits/s
    pub tp_bits_per_s: f64,
}

fn check_groups(groups: &[GroupMean], needed: usize) -> Result<(), ExperimentError> {
    if groups
        .iter()
        .any(|g| !(g.mean_mt_s.is_finite() && g.mean_mt_s > 0.0))
    {
        return Err(ExperimentError::NonPositiveTime);
    }
    let mut ids: Vec<f64> = groups.iter().map(|g| g.id_bits).collect();
    ids.sort_by(f64::total_cmp);
    ids.dedup_by(|a, b| (*a - *b).abs() < ID_GROUP_TOLERANCE);
    if ids.len() < needed {
        return Err(ExperimentError::TooFewGroups(ids.len()));
    }
    Ok(())
}

/// Least-squares line MT = a + b·ID through the group means, plus throughput.
pub fn fit_fitts(groups: &[GroupMean]) -> Result<FittsModel, ExperimentError> {
    check_groups(groups, 2)?;
    let n = groups.len() as f64;
    let mx = groups.iter().map(|g| g.id_bits).sum::<f64>() / n;
    let my = groups.iter().map(|g| g.mean_mt_s).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for g in groups {
        let (dx, dy) = (g.id_bits - mx, g.mean_mt_s - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let b = sxy / sxx;
    let a = my - b * mx;
    let ss_res: f64 = groups
        .iter()
        .map(|g| (g.mean_mt_s - a - b * g.id_bits).powi(2))
        .sum();
    let r2 = if syy > 0.0 {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(FittsModel {
        a_s: a,
        b_s_per_bit: b,
        r2,
        tp_bits_per_s: throughput(groups)?,
    })
}

/// Mean over groups of ID / MT, bits/s.
pub fn throughput(groups: &[GroupMean]) -> Result<f64, ExperimentError> {
    check_groups(groups, 1)?;
    Ok(groups.iter().map(|g| g.id_bits / g.mean_mt_s).sum::<f64>() / groups.len() as f64)
}

fn id_key(id: f64) -> i64 {
    (id / ID_GROUP_TOLERANCE).round() as i64
}

/// Groups trials by ID and averages their mean MT.
pub fn group_by_id(trials: &[TrialSummary]) -> Vec<GroupMean> {
    let mut groups: BTreeMap<i64, (f64, f64, usize)> = BTreeMap::new();
    for t in trials {
        let e = groups.entry(id_key(t.id_bits)).or_default();
        e.0 += t.id_bits;
        e.1 += t.mean_mt_s;
        e.2 += 1;
    }
    groups
        .into_values()
        .map(|(id, mt, n)| GroupMean {
            id_bits: id / n as f64,
            mean_mt_s: mt / n as f64,
        })
        .collect()
}

/// Two-level averaging: each participant's trials are grouped by ID first,
/// then the participant means are averaged per ID.
pub fn participant_group_means(participants: &[Vec<TrialSummary>]) -> Vec<GroupMean> {
    let per: Vec<TrialSummary> = participants
        .iter()
        .flat_map(|trials| {
            group_by_id(trials).into_iter().map(|g| TrialSummary {
                id_bits: g.id_bits,
                mean_mt_s: g.mean_mt_s,
                n_used: 0,
                n_discarded: 0,
            })
        })
        .collect();
    group_by_id(&per)
}

/// Throughput as the mean over participants of each participant's mean
/// ID / MT across their conditions.
pub fn participant_throughput(participants: &[Vec<TrialSummary>]) -> Result<f64, ExperimentError> {
    let mut total = 0.0;
    let mut counted = 0;
    for trials in participants.iter().filter(|t| !t.is_empty()) {
        let groups: Vec<GroupMean> = trials
            .iter()
            .map(|t| GroupMean {
                id_bits: t.id_bits,
                mean_mt_s: t.mean_mt_s,
            })
            .collect();
        check_groups(&groups, 1)?;
        total += groups.iter().map(|g| g.id_bits / g.mean_mt_s).sum::<f64>() / groups.len() as f64;
        counted += 1;
    }
    if counted == 0 {
        return Err(ExperimentError::TooFewGroups(0));
    }
    Ok(total / counted as f64)
}
