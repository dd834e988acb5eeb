use levisim::experiments::{
    analyze_logs, analyze_trials, detect_hits, fit_fitts, generate_condition_schedule,
    index_of_difficulty, latin_square_row, study_conditions, summarize_trial, throughput,
    write_condition, ConditionFile, Direction, GroupMean, PointingTask, Target, TrialSummary,
    STUDY_AMPLITUDE,
};
use levisim::sim_server::{
    frame_us, run_offline, FrameRecord, Inbound, Script, ScriptEntry, ServerConfig, ServerMode,
    SessionWriter, TrapCommand, TICK_HZ,
};
use levisim::{LevitationVolume, Vec3};
use proptest::prelude::*;

const REAL: [(f64, f64); 3] = [(2.04, 0.665), (2.85, 0.823), (3.75, 1.028)];
const VR: [(f64, f64); 3] = [(2.04, 0.679), (2.85, 0.876), (3.75, 1.253)];

fn groups(points: &[(f64, f64)]) -> Vec<GroupMean> {
    points
        .iter()
        .map(|&(id_bits, mean_mt_s)| GroupMean { id_bits, mean_mt_s })
        .collect()
}

/// Textbook least squares, written out independently of the library.
fn ols(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let syy: f64 = points.iter().map(|p| p.1 * p.1).sum();
    let b = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let a = (sy - b * sx) / n;
    let r = (n * sxy - sx * sy) / ((n * sxx - sx * sx) * (n * syy - sy * sy)).sqrt();
    (a, b, r * r)
}

#[test]
fn study_ids() {
    let ids: Vec<f64> = [0.016, 0.008, 0.004]
        .iter()
        .map(|w| index_of_difficulty(0.05, *w).unwrap())
        .collect();
    for (id, want) in ids.iter().zip([2.044, 2.858, 3.755]) {
        assert!((id - want).abs() <= 0.005, "{id} vs {want}");
    }
    // log2(4.125), log2(7.25), log2(13.5)
    assert!((ids[0] - 4.125f64.log2()).abs() < 1e-15);
    assert!((ids[2] - 13.5f64.log2()).abs() < 1e-15);
}

#[test]
fn paper_group_means_regression() {
    for (points, slope) in [(REAL, 0.212), (VR, 0.337)] {
        let m = fit_fitts(&groups(&points)).unwrap();
        let (a, b, r2) = ols(&points);
        assert!((m.b_s_per_bit - b).abs() < 1e-12);
        assert!((m.a_s - a).abs() < 1e-12);
        assert!((m.r2 - r2).abs() < 1e-12);
        assert!((m.b_s_per_bit - slope).abs() <= 0.003, "{}", m.b_s_per_bit);
        assert!(m.r2 > 0.97, "{}", m.r2);
    }
}

#[test]
fn paper_group_means_throughput() {
    let real = throughput(&groups(&REAL)).unwrap();
    let vr = throughput(&groups(&VR)).unwrap();
    let by_hand = |p: &[(f64, f64)]| p.iter().map(|(id, mt)| id / mt).sum::<f64>() / p.len() as f64;
    assert!((real - by_hand(&REAL)).abs() < 1e-12);
    assert!((real - 3.39).abs() <= 0.05, "{real}");
    assert!((vr - 3.08).abs() <= 0.05, "{vr}");
    assert_eq!(throughput(&groups(&[(2.0, 1.0)])).unwrap(), 2.0);
}

fn frame(us: u64, p: Vec3) -> FrameRecord {
    FrameRecord::new(us, &p, &p, &p, &[])
}

#[test]
fn synthetic_alternating_crossings() {
    let task =
        PointingTask::centered(Vec3::zeros(), 0.05, 0.008, Direction::FrontBack, 70).unwrap();
    let a = task.center(Target::A);
    let b = task.center(Target::B);
    // Crossing k lasts 300 + 7k ms; between visits the particle sits at the midpoint.
    let mut frames = Vec::new();
    let mut t = 0u64;
    let mut expected_hits = Vec::new();
    for k in 0..70u64 {
        let target = if k % 2 == 0 { a } else { b };
        frames.push(frame(t, Vec3::zeros()));
        t += 300_000 + 7_000 * k;
        frames.push(frame(t, target));
        expected_hits.push(t);
        frames.push(frame(t + 1000, target));
        t += 2000;
    }
    let log = detect_hits(&frames, &task);
    assert_eq!(log.hits.len(), 70);
    assert_eq!(
        log.hits.iter().map(|h| h.frame_us).collect::<Vec<_>>(),
        expected_hits
    );
    assert!(log.hits.windows(2).all(|w| w[0].target != w[1].target));
    let want: Vec<f64> = expected_hits
        .windows(2)
        .map(|w| (w[1] - w[0]) as f64 * 1e-6)
        .collect();
    assert_eq!(log.durations, want);
}

#[test]
fn paper_shaped_trial() {
    let task = PointingTask::centered(
        Vec3::zeros(),
        STUDY_AMPLITUDE,
        0.016,
        Direction::LeftRight,
        70,
    )
    .unwrap();
    let mut durations = vec![2.0; 20];
    // 50 kept movements averaging 0.665 s.
    durations.extend((0..50).map(|i| 0.665 + if i % 2 == 0 { 0.1 } else { -0.1 }));
    let s = summarize_trial(&durations, &task).unwrap();
    assert!((s.id_bits - 2.044).abs() < 5e-4);
    assert!((s.mean_mt_s - 0.665).abs() < 1e-12);
}

fn stiff_pointing_config(task: &PointingTask) -> ServerConfig {
    let mut config = ServerConfig::ephemeral();
    config.mode = ServerMode::Pointing;
    config.pointing = Some(ConditionFile {
        label: None,
        participant: None,
        task: *task,
    });
    // A stiff, critically damped trap: the bead trails the trap by a fixed
    // distance at constant speed and settles within a tick.
    config.model.stiffness = Vec3::new(0.26, 0.26, 0.26);
    let omega = (0.26 / config.model.mass).sqrt();
    config.model.drag = 2.0 * omega;
    config.start = Some(task.center(Target::A));
    config
}

/// Trap sweeps A → B → A ... at constant speed, `ticks_per_leg` ticks per leg.
fn triangle_script(task: &PointingTask, ticks_per_leg: u64, legs: u64) -> Script {
    let mut script = Script::new();
    let (a, b) = (task.center(Target::A), task.center(Target::B));
    for tick in 0..ticks_per_leg * legs {
        let leg = tick / ticks_per_leg;
        let s = (tick % ticks_per_leg) as f64 / ticks_per_leg as f64;
        let (from, to) = if leg % 2 == 0 { (a, b) } else { (b, a) };
        script.push(
            tick,
            ScriptEntry::Inbound(Inbound::Trap(TrapCommand {
                seq: tick as u32 + 1,
                t_us: frame_us(tick),
                position: from + (to - from) * s,
            })),
        );
    }
    script
}

#[test]
fn simulated_sessions_reproduce_scripted_movement_times() {
    let dir = tempfile::tempdir().unwrap();
    let volume = LevitationVolume::prototype();
    // Leg lengths are multiples of 9 ticks, i.e. whole multiples of 0.1 s.
    let legs = [(0.016, 45u64), (0.008, 54), (0.004, 72)];
    let mut logs = Vec::new();
    for (i, &(w, n)) in legs.iter().enumerate() {
        let task =
            PointingTask::centered(volume.center(), 0.05, w, Direction::LeftRight, 70).unwrap();
        let config = stiff_pointing_config(&task);
        let mut records = Vec::new();
        run_offline(&config, &triangle_script(&task, n, 72), n * 72, |o| {
            records.push(o.record.clone())
        })
        .unwrap();
        let path = dir.path().join(format!("trial{i}.csv"));
        let mut writer = SessionWriter::create(&path).unwrap();
        for r in &records {
            writer.write(r).unwrap();
        }
        writer.flush().unwrap();
        write_condition(&path, config.pointing.as_ref().unwrap()).unwrap();
        logs.push(path);

        // The live harness tagged exactly the frames the offline detector finds.
        let log = detect_hits(&records, &task);
        let tagged: Vec<u64> = records
            .iter()
            .filter(|r| r.has_event("hit:A") || r.has_event("hit:B"))
            .map(|r| r.frame_us)
            .collect();
        assert_eq!(tagged.len(), 71);
        assert_eq!(
            tagged,
            log.hits[..71]
                .iter()
                .map(|h| h.frame_us)
                .collect::<Vec<_>>()
        );
        // Every leg spans a whole number of microseconds.
        assert_eq!(frame_us(n) * TICK_HZ as u64, n * 1_000_000);
        for d in &log.durations[1..70] {
            assert_eq!((d * 1e6).round() as u64, frame_us(n), "W {w}");
        }
    }
    let analysis = analyze_logs(&logs).unwrap();
    assert_eq!(analysis.trials.len(), 3);
    let points: Vec<(f64, f64)> = legs
        .iter()
        .map(|&(w, n)| {
            (
                index_of_difficulty(0.05, w).unwrap(),
                n as f64 / TICK_HZ as f64,
            )
        })
        .collect();
    for (row, (id, mt)) in analysis.trials.iter().zip(&points) {
        assert!(
            (row.mean_mt_s - mt).abs() < 1e-12,
            "{} vs {mt}",
            row.mean_mt_s
        );
        assert_eq!(row.id_bits, *id);
        assert_eq!((row.n_used, row.n_discarded), (50, 20));
    }
    let labels: Vec<&str> = analysis
        .trials
        .iter()
        .map(|r| r.condition.as_str())
        .collect();
    assert_eq!(
        labels,
        ["left-right/W16mm", "left-right/W8mm", "left-right/W4mm"]
    );
    let (a, b, r2) = ols(&points);
    assert!((analysis.model.a_s - a).abs() < 1e-12);
    assert!((analysis.model.b_s_per_bit - b).abs() < 1e-12);
    assert!((analysis.model.r2 - r2).abs() < 1e-12);
}

#[test]
fn participant_means_are_averaged_first() {
    let task =
        |w| PointingTask::centered(Vec3::zeros(), 0.05, w, Direction::LeftRight, 70).unwrap();
    let cond = |p, w| ConditionFile {
        label: None,
        participant: Some(p),
        task: task(w),
    };
    let s = |w: f64, mt| TrialSummary {
        id_bits: task(w).id_bits(),
        mean_mt_s: mt,
        n_used: 50,
        n_discarded: 20,
    };
    // Participant 0 ran the 16 mm condition twice.
    let trials = vec![
        (cond(0, 0.016), s(0.016, 0.6)),
        (cond(0, 0.016), s(0.016, 0.8)),
        (cond(0, 0.004), s(0.004, 1.0)),
        (cond(1, 0.016), s(0.016, 1.0)),
        (cond(1, 0.004), s(0.004, 1.2)),
    ];
    let a = analyze_trials(&trials).unwrap();
    assert!((a.groups[0].mean_mt_s - 0.85).abs() < 1e-12);
    assert!((a.groups[1].mean_mt_s - 1.1).abs() < 1e-12);
}

#[test]
fn study_schedule() {
    let conditions = study_conditions(Vec3::zeros());
    let rows: Vec<Vec<PointingTask>> = (0..6)
        .map(|p| generate_condition_schedule(&conditions, p))
        .collect();
    for pos in 0..6 {
        for c in &conditions {
            assert_eq!(rows.iter().filter(|r| r[pos] == *c).count(), 1);
        }
    }
    assert_eq!(generate_condition_schedule(&conditions, 6), rows[0]);
    assert_eq!(generate_condition_schedule(&conditions, 4), rows[4]);
}

proptest! {
    #[test]
    fn id_grows_as_targets_shrink(d in 1e-3f64..0.2, w in 1e-3f64..0.05, k in 1.01f64..4.0) {
        let wide = index_of_difficulty(d, w).unwrap();
        let narrow = index_of_difficulty(d, w / k).unwrap();
        prop_assert!(narrow > wide);
        prop_assert!(wide > 0.0);
    }

    #[test]
    fn regression_ignores_group_order(
        pts in prop::collection::vec((0.5f64..6.0, 0.1f64..3.0), 3..8),
        seed in any::<u64>(),
    ) {
        let ids: Vec<f64> = pts.iter().map(|p| p.0).collect();
        prop_assume!(ids.iter().any(|x| (x - ids[0]).abs() > 1e-3));
        let g = groups(&pts);
        let mut shuffled = g.clone();
        let n = shuffled.len();
        for i in 0..n {
            shuffled.swap(i, (seed as usize).wrapping_add(i * 7) % n);
        }
        let m1 = fit_fitts(&g).unwrap();
        let m2 = fit_fitts(&shuffled).unwrap();
        prop_assert!((m1.b_s_per_bit - m2.b_s_per_bit).abs() < 1e-9);
        prop_assert!((m1.a_s - m2.a_s).abs() < 1e-9);
        prop_assert!((m1.r2 - m2.r2).abs() < 1e-9);
        prop_assert!((m1.tp_bits_per_s - m2.tp_bits_per_s).abs() < 1e-9);
        prop_assert!((0.0..=1.0).contains(&m1.r2));
    }

    #[test]
    fn every_schedule_is_a_permutation(n in 1usize..12, p in 0usize..100) {
        let mut row = latin_square_row(n, p);
        prop_assert_eq!(row.clone(), latin_square_row(n, p));
        row.sort();
        prop_assert_eq!(row, (0..n).collect::<Vec<_>>());
    }
}
