//! Acceptance report: one PASS/FAIL line per requirement, non-zero exit on
//! any failure.

use std::process::ExitCode;
use std::sync::atomic::AtomicBool;
use std::time::Instant;

use levisim::acoustic_field::{calibrate_amplitude, linearize_trap};
use levisim::config::ArrayConfig;
use levisim::experiments::{
    detect_hits, fit_fitts, index_of_difficulty, summarize_trial, throughput, ConditionFile,
    Direction, GroupMean, PointingTask, Target,
};
use levisim::games::{
    advance_bead, bead_bounce_step, levi_shooter_step, BallisticBead, BeadBounceConfig, GameConfig,
    GameEvent, GameKind, GameRuntime, GameSession, GunPose, LeviShooterConfig, RacketPose,
};
use levisim::particle_dynamics::{
    mechanical_energy, simulate_trajectory, IntegratorConfig, ParticleState, TrapModel,
    TrapSchedule,
};
use levisim::sim_server::{
    frame_us, run_offline, FrameRecord, Inbound, RunOptions, Script, ScriptEntry, Server,
    ServerConfig, ServerMode, SessionWriter, TrapCommand, TICK_HZ,
};
use levisim::{Axis, LevitationVolume, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// Fitts

const REAL: [(f64, f64); 3] = [(2.04, 0.665), (2.85, 0.823), (3.75, 1.028)];
const VR: [(f64, f64); 3] = [(2.04, 0.679), (2.85, 0.876), (3.75, 1.253)];

fn groups(points: &[(f64, f64)]) -> Vec<GroupMean> {
    points
        .iter()
        .map(|&(id_bits, mean_mt_s)| GroupMean { id_bits, mean_mt_s })
        .collect()
}

fn fitts_ids() -> Outcome {
    let mut detail = Vec::new();
    let mut ok = true;
    for (w, want) in [(0.016, 2.044), (0.008, 2.858), (0.004, 3.755)] {
        let id = index_of_difficulty(0.05, w).map_err(|e| e.to_string())?;
        ok &= (id - want).abs() <= 0.005;
        detail.push(format!("{:.0} mm: {id:.4}", w * 1e3));
    }
    ensure(ok, detail.join(", ") + " bits")
}

fn fitts_regression() -> Outcome {
    let real = fit_fitts(&groups(&REAL)).map_err(|e| e.to_string())?;
    let vr = fit_fitts(&groups(&VR)).map_err(|e| e.to_string())?;
    let ok = (real.b_s_per_bit - 0.212).abs() <= 0.003
        && (vr.b_s_per_bit - 0.337).abs() <= 0.003
        && real.r2 > 0.97
        && vr.r2 > 0.97;
    ensure(
        ok,
        format!(
            "real slope {:.4} s/bit R² {:.4}; VR slope {:.4} s/bit R² {:.4}",
            real.b_s_per_bit, real.r2, vr.b_s_per_bit, vr.r2
        ),
    )
}

fn fitts_throughput() -> Outcome {
    let real = throughput(&groups(&REAL)).map_err(|e| e.to_string())?;
    let vr = throughput(&groups(&VR)).map_err(|e| e.to_string())?;
    let ok = (real - 3.39).abs() <= 0.05 && (vr - 3.08).abs() <= 0.05;
    ensure(
        ok,
        format!(
            "real {real:.3} bits/s, VR {vr:.3} bits/s; {:.3} below the per-participant 3.41",
            3.41 - real
        ),
    )
}

// Acoustics

fn trap_geometry_and_stiffness() -> (Outcome, Outcome) {
    let t0 = Instant::now();
    let calibrated = ArrayConfig::default()
        .field()
        .and_then(|f| calibrate_amplitude(&f, 2.2e-4));
    let trap = match calibrated {
        Ok(t) => t,
        Err(e) => return (Err(e.to_string()), Err(e.to_string())),
    };
    let ch = &trap.characterization;
    let d = ch.diameters() * 1e3;
    let fx = ch.axis(Axis::X).max_force;
    let geometry = ensure(
        (4.0..=6.0).contains(&d.y)
            && (10.0..=22.0).contains(&d.x)
            && (14.0..=26.0).contains(&d.z)
            && (2.2e-5..=8.8e-5).contains(&fx)
            && t0.elapsed().as_secs() < 60,
        format!(
            "d = ({:.1}, {:.1}, {:.1}) mm, max Fx {fx:.3e} N, Fy {:.3e} N, {:.1} s",
            d.x,
            d.y,
            d.z,
            ch.axis(Axis::Y).max_force,
            t0.elapsed().as_secs_f64()
        ),
    );
    let stiffness = match linearize_trap(&trap.field, &ch.center) {
        Ok(lin) => {
            let b = lin.stiffness();
            let (rx, rz) = (b.y / b.x, b.y / b.z);
            ensure(
                (10.0..=25.0).contains(&rx) && (15.0..=35.0).contains(&rz),
                format!(
                    "b = ({:.4}, {:.4}, {:.5}) N/m, b_y/b_x {rx:.2}, b_y/b_z {rz:.2}",
                    b.x, b.y, b.z
                ),
            )
        }
        Err(e) => Err(e.to_string()),
    };
    (geometry, stiffness)
}

// Dynamics

const M: f64 = 1.05e-7;
const C: f64 = 9.42;
const B: [f64; 3] = [0.016, 0.26, 0.011];

/// Fixed-step classical RK4 on the linear trap, x axis only.
fn rk4_x(target: f64, dt: f64, n: usize, every: usize) -> Vec<f64> {
    let acc = |x: f64, v: f64| (-B[0] * (x - target) - M * C * v) / M;
    let (mut x, mut v) = (0.0f64, 0.0f64);
    let mut out = vec![x];
    for s in 1..=n {
        let (k1x, k1v) = (v, acc(x, v));
        let (k2x, k2v) = (
            v + dt / 2.0 * k1v,
            acc(x + dt / 2.0 * k1x, v + dt / 2.0 * k1v),
        );
        let (k3x, k3v) = (
            v + dt / 2.0 * k2v,
            acc(x + dt / 2.0 * k2x, v + dt / 2.0 * k2v),
        );
        let (k4x, k4v) = (v + dt * k3v, acc(x + dt * k3x, v + dt * k3v));
        x += dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
        v += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        if s % every == 0 {
            out.push(x);
        }
    }
    out
}

fn dynamics_oracle() -> Outcome {
    let model = TrapModel::prototype();
    let config = IntegratorConfig::default();
    let err = |e: levisim::particle_dynamics::DynamicsError| e.to_string();
    let step = simulate_trajectory(
        &ParticleState::at_rest(Vec3::zeros()),
        &TrapSchedule::constant(Vec3::new(5e-3, 0.0, 0.0)),
        &model,
        &config,
        1.0,
        1000.0,
    )
    .map_err(err)?;
    let rk = rk4_x(5e-3, 1e-5, 100_000, 100);
    if step.len() != rk.len() {
        return Err(format!("{} samples vs {}", step.len(), rk.len()));
    }
    let worst = step
        .iter()
        .zip(&rk)
        .map(|(s, r)| (s.state.position.x - r).abs())
        .fold(0.0, f64::max);

    let samples = simulate_trajectory(
        &ParticleState::at_rest(Vec3::new(0.0, 1e-3, 0.0)),
        &TrapSchedule::constant(Vec3::zeros()),
        &model.with_drag(0.0),
        &config,
        0.1,
        50_000.0,
    )
    .map_err(err)?;
    let mut crossings = Vec::new();
    for w in samples.windows(2) {
        let (a, b) = (w[0].state.position.y, w[1].state.position.y);
        if a != 0.0 && a.signum() != b.signum() {
            let (t0, t1) = (w[0].state.time, w[1].state.time);
            crossings.push(t0 + (t1 - t0) * a / (a - b));
        }
    }
    let n = crossings.len();
    if n < 10 {
        return Err(format!("only {n} zero crossings"));
    }
    let f = (n - 1) as f64 / 2.0 / (crossings[n - 1] - crossings[0]);
    let analytic = (B[1] / M).sqrt() / (2.0 * std::f64::consts::PI);
    ensure(
        worst < 1e-6 && ((f - 250.3) / 250.3).abs() <= 0.01,
        format!("max |RK45 − RK4| {worst:.2e} m; f_y {f:.2} Hz (analytic {analytic:.2} Hz)"),
    )
}

fn energy_properties() -> Outcome {
    let model = TrapModel::prototype();
    let config = IntegratorConfig::default();
    let trap = Vec3::zeros();
    let err = |e: levisim::particle_dynamics::DynamicsError| e.to_string();
    let damped = simulate_trajectory(
        &ParticleState::at_rest(Vec3::new(4e-3, 1.5e-3, -6e-3)),
        &TrapSchedule::constant(trap),
        &model,
        &config,
        10_000.0 / 90.0,
        90.0,
    )
    .map_err(err)?;
    let mut rises = 0;
    let mut prev = f64::INFINITY;
    for s in &damped {
        let e = mechanical_energy(&s.state, &trap, &model);
        if e > prev && e - prev >= f64::MIN_POSITIVE {
            rises += 1;
        }
        prev = e;
    }
    let free = model.with_drag(0.0);
    let start = ParticleState::at_rest(Vec3::new(3e-3, 1e-3, -4e-3));
    let e0 = mechanical_energy(&start, &trap, &free);
    let drift = simulate_trajectory(
        &start,
        &TrapSchedule::constant(trap),
        &free,
        &config,
        1.0,
        1000.0,
    )
    .map_err(err)?
    .iter()
    .map(|s| ((mechanical_energy(&s.state, &trap, &free) - e0) / e0).abs())
    .fold(0.0, f64::max);
    ensure(
        damped.len() == 10_001 && rises == 0 && drift < 1e-3,
        format!(
            "{} ticks with {rises} energy increases; undamped drift {:.2e} %",
            damped.len() - 1,
            drift * 100.0
        ),
    )
}

// Server

fn trap_entry(seq: u32, tick: u64, p: Vec3) -> ScriptEntry {
    ScriptEntry::Inbound(Inbound::Trap(TrapCommand {
        seq,
        t_us: frame_us(tick),
        position: p,
    }))
}

fn session_csv(config: &ServerConfig, script: &Script, ticks: u64) -> Result<Vec<u8>, String> {
    let mut w = SessionWriter::new(Vec::new());
    let mut failure = None;
    run_offline(config, script, ticks, |o| {
        if let Err(e) = w.write(&o.record) {
            failure.get_or_insert(e.to_string());
        }
    })
    .map_err(|e| e.to_string())?;
    if let Some(e) = failure {
        return Err(e);
    }
    w.into_inner().map_err(|e| e.to_string())
}

fn protocol_determinism() -> Outcome {
    let config = ServerConfig::ephemeral();
    let ticks = 30 * TICK_HZ;
    let mut script = Script::new();
    let mut seq = 0;
    for tick in 0..ticks {
        let t = tick as f64 / 90.0;
        seq += 1;
        let p = Vec3::new(
            0.03 * (1.3 * t).sin(),
            0.02 * (0.7 * t).cos(),
            0.02 * (0.9 * t).sin(),
        );
        script.push(tick, trap_entry(seq, tick, p));
    }
    let a = session_csv(&config, &script, ticks)?;
    let b = session_csv(&config, &script, ticks)?;
    let identical = a == b;

    let mut burst = Script::new();
    let mut seq = 0;
    for tick in 0..270 {
        for j in 0..100 {
            seq += 1;
            burst.push(
                tick,
                trap_entry(seq, tick, Vec3::new(1e-4 * j as f64, 0.0, 0.0)),
            );
        }
    }
    let mut last_applied = true;
    let (_, stats) = run_offline(&config, &burst, 270, |o| {
        last_applied &= o.trap.x == 1e-4 * 99.0
    })
    .map_err(|e| e.to_string())?;
    let burst_ok = stats.applied == 270 && stats.superseded == 270 * 99 && last_applied;

    let server = Server::bind(ServerConfig::ephemeral(), true).map_err(|e| e.to_string())?;
    let report = server
        .run(
            RunOptions {
                paced: true,
                max_ticks: Some(450),
                ..RunOptions::default()
            },
            &AtomicBool::new(false),
        )
        .map_err(|e| e.to_string())?;
    let p99 = report.jitter.p99;
    ensure(
        identical && burst_ok && p99 < 2e-3,
        format!(
            "30 s CSVs identical: {identical} ({} bytes); burst applied {}/270 ticks, superseded {}; \
             jitter p50 {:.3} ms p99 {:.3} ms max {:.3} ms over {} ticks",
            a.len(),
            stats.applied,
            stats.superseded,
            report.jitter.p50 * 1e3,
            p99 * 1e3,
            report.jitter.max * 1e3,
            report.jitter.ticks
        ),
    )
}

// Games

fn game_properties() -> Outcome {
    let volume = LevitationVolume::prototype();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut speed_kept = true;
    for _ in 0..200 {
        let p = Vec3::from_fn(|i, _| rng.gen_range(volume.min[i]..=volume.max[i]));
        let d = Vec3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        let speed = rng.gen_range(0.0..2.0);
        let mut bead = BallisticBead::new(p, d, speed);
        for _ in 0..300 {
            let (next, _) = advance_bead(&bead, 1.0 / 90.0, &volume);
            speed_kept &=
                next.speed == speed && next.direction.map(f64::abs) == bead.direction.map(f64::abs);
            bead = next;
        }
    }

    let config = LeviShooterConfig::default();
    let dt = 1.0 / 90.0;
    let mut bead = config.initial_bead(&volume);
    let mut session = GameSession::new(GameKind::LeviShooter);
    let (mut h, mut r) = (0u32, 0u32);
    let mut speed_rule = true;
    let mut shot_ticks = Vec::new();
    let mut blocked = true;
    let mut tick = 0u64;
    let mut after_hit = false;
    for round in 0..60 {
        let hit = rng.gen_bool(0.6) || round < 5;
        if hit {
            // Pull the trigger every tick; only the first shot past the
            // cooldown may land.
            loop {
                let out = levi_shooter_step(
                    &bead,
                    Some(&aim(&bead, true)),
                    dt,
                    &session,
                    &volume,
                    &config,
                );
                let landed = out.events.contains(&GameEvent::ShotHit);
                blocked &= landed || out.events[0] == GameEvent::Cooldown;
                (bead, session) = (out.bead, out.session);
                tick += 1;
                if landed {
                    shot_ticks.push((tick, after_hit));
                    break;
                }
            }
            h += 1;
        } else {
            while session.cooldown > 0.0 {
                let out = levi_shooter_step(&bead, None, dt, &session, &volume, &config);
                (bead, session) = (out.bead, out.session);
                tick += 1;
            }
            for _ in 0..config.miss_limit {
                let out = levi_shooter_step(
                    &bead,
                    Some(&aim(&bead, false)),
                    dt,
                    &session,
                    &volume,
                    &config,
                );
                (bead, session) = (out.bead, out.session);
                tick += 1;
            }
            if h > r {
                r += 1;
            }
        }
        after_hit = hit;
        speed_rule &= bead.speed == 0.05 + 0.001 * (h - r) as f64;
    }
    // Back-to-back hits land exactly 180 ticks, 2.000 s, apart.
    let gaps: Vec<u64> = shot_ticks
        .windows(2)
        .filter(|w| w[1].1)
        .map(|w| w[1].0 - w[0].0)
        .collect();
    let cooldown_ok = blocked && !gaps.is_empty() && gaps.iter().all(|g| *g == 180);

    let bounce = BeadBounceConfig::default();
    let initial = GameRuntime::new(GameKind::BeadBounce, GameConfig::default(), volume)
        .bead()
        .speed;
    let racket = RacketPose {
        center: Vec3::new(-0.03, 0.0, 0.0),
        normal: -Vec3::x(),
        radius: RacketPose::DEFAULT_RADIUS,
        velocity: Vec3::new(-0.5, 0.0, 0.0),
    };
    let incoming = BallisticBead::new(Vec3::new(-0.0305, 0.0, 0.0), Vec3::x(), initial);
    let out = bead_bounce_step(&incoming, Some(&racket), dt, &volume, &bounce);
    let kicked = out.bead.speed;

    ensure(
        speed_kept && speed_rule && cooldown_ok && initial == 0.09 && kicked == 0.24,
        format!(
            "reflections keep speed: {speed_kept}; speed after {h} hits, {r} reverts = {:.3} m/s (rule holds: \
             {speed_rule}); cooldown 2.000 s: {cooldown_ok}; initial {initial} m/s; κ=0.3 head-on kick → {kicked} m/s",
            bead.speed
        ),
    )
}

fn aim(bead: &BallisticBead, at_bead: bool) -> GunPose {
    if at_bead {
        GunPose {
            origin: bead.position + Vec3::new(0.0, 0.0, 0.25),
            direction: -Vec3::z(),
            trigger: true,
        }
    } else {
        GunPose {
            origin: Vec3::new(0.0, 0.3, 0.3),
            direction: Vec3::y(),
            trigger: true,
        }
    }
}

// Analysis pipeline

/// Simulated pointing sessions with known movement times go through the
/// live hit tagging and the offline analysis; the scripted times must come
/// back.
fn pipeline_oracle() -> Outcome {
    let volume = LevitationVolume::prototype();
    let mut points = Vec::new();
    for (w, n) in [(0.016, 45u64), (0.008, 54), (0.004, 72)] {
        let task = PointingTask::centered(volume.center(), 0.05, w, Direction::LeftRight, 70)
            .map_err(|e| e.to_string())?;
        let mut config = ServerConfig::ephemeral();
        config.mode = ServerMode::Pointing;
        config.pointing = Some(ConditionFile {
            label: None,
            participant: None,
            task,
        });
        config.model.stiffness = Vec3::new(0.26, 0.26, 0.26);
        config.model.drag = 2.0 * (0.26 / config.model.mass).sqrt();
        config.start = Some(task.center(Target::A));
        let (a, b) = (task.center(Target::A), task.center(Target::B));
        let mut script = Script::new();
        for tick in 0..n * 72 {
            let s = (tick % n) as f64 / n as f64;
            let (from, to) = if (tick / n) % 2 == 0 { (a, b) } else { (b, a) };
            script.push(
                tick,
                trap_entry(tick as u32 + 1, tick, from + (to - from) * s),
            );
        }
        let mut frames: Vec<FrameRecord> = Vec::new();
        run_offline(&config, &script, n * 72, |o| frames.push(o.record.clone()))
            .map_err(|e| e.to_string())?;
        let trial = summarize_trial(&detect_hits(&frames, &task).durations, &task)
            .map_err(|e| e.to_string())?;
        let scripted = n as f64 / TICK_HZ as f64;
        if (trial.mean_mt_s - scripted).abs() > 1e-9 {
            return Err(format!(
                "W {w}: mean MT {} vs scripted {scripted}",
                trial.mean_mt_s
            ));
        }
        points.push((trial.id_bits, trial.mean_mt_s));
    }
    let model = fit_fitts(&groups(&points)).map_err(|e| e.to_string())?;
    ensure(
        model.r2 > 0.0 && model.tp_bits_per_s.is_finite(),
        format!(
            "scripted MTs recovered exactly; slope {:.4} s/bit, TP {:.3} bits/s; participant results not reproducible",
            model.b_s_per_bit, model.tp_bits_per_s
        ),
    )
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |name: &str, outcome: Outcome| {
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} {name}: {detail}");
    };
    report("Fitts ID values", fitts_ids());
    report("Fitts regression on group means", fitts_regression());
    report("throughput", fitts_throughput());
    let (geometry, stiffness) = trap_geometry_and_stiffness();
    report("trap geometry", geometry);
    report("stiffness ratios", stiffness);
    report("dynamics oracle", dynamics_oracle());
    report("energy properties", energy_properties());
    report("protocol determinism", protocol_determinism());
    report("game properties", game_properties());
    report("analysis pipeline oracle", pipeline_oracle());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance checks failed");
        ExitCode::FAILURE
    }
}
