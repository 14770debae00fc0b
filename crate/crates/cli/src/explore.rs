use anyhow::{Context, Result};
use clap::Args;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use topovor_core::topo_graph::write_snapshot;
use topovor_core::world_sim::{summary_csv, TourStats};
use topovor_core::{parse_scenario, run_episode, EpisodeMetrics, SimParams, Variant};

#[derive(Args, Debug, Clone)]
pub struct ExploreArgs {
    /// Scenario text file.
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of robots (first N starts of the scenario).
    #[arg(long)]
    pub robots: Option<usize>,
    #[arg(long, default_value = "full", value_parser = parse_variant)]
    pub variant: Variant,
    /// Simulated time cap, seconds.
    #[arg(long, default_value_t = 600.0)]
    pub max_time: f64,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Run seeds seed..seed+N, one subdirectory each.
    #[arg(long, default_value_t = 1)]
    pub repeat: u64,
    /// Skip trajectory.txt.
    #[arg(long)]
    pub no_trajectory: bool,

    /// Weighted iteration step (gamma), meters.
    #[arg(long, default_value_t = 0.5)]
    pub gamma: f64,
    /// Balanced threshold (B_lambda), meters.
    #[arg(long, default_value_t = 10.0)]
    pub b_lambda: f64,
    /// Travel cost weight (beta_C).
    #[arg(long, default_value_t = 0.3)]
    pub beta_c: f64,
    /// Self-priority weight (beta_S).
    #[arg(long, default_value_t = 0.1)]
    pub beta_s: f64,
    /// Coverage sample window (d_c), meters.
    #[arg(long, default_value_t = 5.0)]
    pub sample_window: f64,
    /// Targets sequenced per cycle (Pi).
    #[arg(long, default_value_t = 5)]
    pub atsp_nodes: usize,
    /// Actual motion feedback (gamma_d).
    #[arg(long, default_value_t = 1.0)]
    pub gamma_d: f64,
    /// Max linear velocity, m/s.
    #[arg(long, default_value_t = 1.2)]
    pub v_max: f64,
    /// Max angular velocity, rad/s.
    #[arg(long, default_value_t = 1.57)]
    pub omega_max: f64,
    /// Sensor range, meters. Defaults to the scenario's value, else 3.
    #[arg(long)]
    pub sensor_range: Option<f64>,
    /// Grid resolution, meters. Must match the scenario file.
    #[arg(long)]
    pub resolution: Option<f64>,
    /// Safe distance threshold, meters.
    #[arg(long, default_value_t = 0.5)]
    pub safe_distance: f64,
    /// Communication range, meters.
    #[arg(long, default_value_t = 15.0)]
    pub comm_range: f64,
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse()
}

impl ExploreArgs {
    pub fn params(&self, seed: u64) -> SimParams {
        let mut p = SimParams {
            seed,
            robots: self.robots,
            max_time: self.max_time,
            v_max: self.v_max,
            omega_max: self.omega_max,
            sensor_range: self.sensor_range,
            comm_range: self.comm_range,
            record_trajectory: !self.no_trajectory,
            ..SimParams::default()
        };
        p.balance.gamma = self.gamma;
        p.balance.b_lambda = self.b_lambda;
        p.balance.overload_threshold = 2.0 * self.b_lambda;
        p.planner.priority.beta_c = self.beta_c;
        p.planner.priority.beta_s = self.beta_s;
        p.planner.priority.horizon = self.atsp_nodes;
        p.planner.priority.gamma_d = self.gamma_d;
        p.planner.grid.safe_distance = self.safe_distance;
        p.mapper.coverage.radius = self.sample_window;
        p
    }
}

pub fn run(args: &ExploreArgs) -> Result<u8> {
    let text = fs::read_to_string(&args.scenario)
        .with_context(|| format!("reading {}", args.scenario.display()))?;
    let scenario = match parse_scenario(&text) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{}: {e}", args.scenario.display());
            return Ok(crate::EXIT_PARSE);
        }
    };
    if let Some(r) = args.resolution {
        if (r - scenario.world.resolution).abs() > 1e-9 {
            eprintln!(
                "--resolution {r} does not match the scenario's {}",
                scenario.world.resolution
            );
            return Ok(crate::EXIT_PARSE);
        }
    }
    let mut code = 0;
    let mut rows = Vec::new();
    for k in 0..args.repeat.max(1) {
        let seed = args.seed + k;
        let params = args.params(seed);
        let m = match run_episode(&scenario, &params, args.variant) {
            Ok(m) => m,
            Err(e) => {
                eprintln!("{e}");
                return Ok(crate::EXIT_PARSE);
            }
        };
        let dir = if args.repeat > 1 {
            args.out.join(format!("seed_{seed}"))
        } else {
            args.out.clone()
        };
        write_artifacts(&dir, &m)?;
        eprintln!(
            "{} seed {seed}: {} at t={:.1}s coverage {:.3} gap {:.3} m",
            args.variant,
            if m.completed {
                "complete"
            } else if m.trapped {
                "trapped"
            } else {
                "time cap"
            },
            m.time,
            m.coverage,
            m.tour_gap()
        );
        if m.trapped {
            code = crate::EXIT_TRAPPED;
        }
        rows.push(m);
    }
    if args.repeat > 1 {
        fs::write(args.out.join("repeat.csv"), repeat_csv(&rows))?;
    }
    Ok(code)
}

fn repeat_csv(rows: &[EpisodeMetrics]) -> String {
    let mut out = String::from(
        "variant,seed,completed,trapped,time,coverage,avg,max,min,std,max-min,collisions\n",
    );
    for m in rows {
        let d: Vec<f64> = m.tour_distances.iter().map(|x| x.1).collect();
        let s = TourStats::of(&d);
        let _ = writeln!(
            out,
            "{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
            m.variant,
            m.seed,
            m.completed,
            m.trapped,
            m.time,
            m.coverage,
            s.avg,
            s.max,
            s.min,
            s.std,
            s.max - s.min,
            m.collisions
        );
    }
    out
}

fn coverage_csv(m: &EpisodeMetrics) -> String {
    let mut out = String::from("t,explored_m2\n");
    for p in &m.coverage_curve {
        let _ = writeln!(out, "{:.3},{:.6}", p.t, p.explored);
    }
    out
}

fn balance_csv(m: &EpisodeMetrics) -> String {
    let mut out = String::from("t,group,iter,M_lambda,m_lambda,D_lambda,max_step,converged\n");
    for r in &m.balance_trace {
        let _ = writeln!(
            out,
            "{:.3},{},{},{:.6},{:.6},{:.6},{:.6},{}",
            r.t, r.group, r.iter, r.max_load, r.min_load, r.spread, r.max_step, r.converged
        );
    }
    out
}

fn trajectory_txt(m: &EpisodeMetrics) -> String {
    let mut out = String::from("# t robot x y heading\n");
    for p in &m.trajectory {
        let _ = writeln!(
            out,
            "{:.3} {} {:.4} {:.4} {:.4}",
            p.t, p.robot, p.x, p.y, p.heading
        );
    }
    out
}

fn events_jsonl(m: &EpisodeMetrics) -> Result<String> {
    let mut out = String::new();
    for c in &m.cycles {
        out += &serde_json::to_string(c)?;
        out.push('\n');
    }
    Ok(out)
}

pub fn write_artifacts(dir: &Path, m: &EpisodeMetrics) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join("summary.csv"), summary_csv(m))?;
    fs::write(dir.join("coverage.csv"), coverage_csv(m))?;
    fs::write(dir.join("balance.csv"), balance_csv(m))?;
    if !m.trajectory.is_empty() {
        fs::write(dir.join("trajectory.txt"), trajectory_txt(m))?;
    }
    fs::write(
        dir.join("graph_final.txt"),
        write_snapshot(&m.final_graph, Some(&m.final_labels)),
    )?;
    fs::write(dir.join("events.jsonl"), events_jsonl(m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_parameter_table() {
        let a = ExploreArgs {
            scenario: PathBuf::new(),
            seed: 0,
            robots: None,
            variant: Variant::Full,
            max_time: 600.0,
            out: PathBuf::new(),
            repeat: 1,
            no_trajectory: false,
            gamma: 0.5,
            b_lambda: 10.0,
            beta_c: 0.3,
            beta_s: 0.1,
            sample_window: 5.0,
            atsp_nodes: 5,
            gamma_d: 1.0,
            v_max: 1.2,
            omega_max: 1.57,
            sensor_range: None,
            resolution: None,
            safe_distance: 0.5,
            comm_range: 15.0,
        };
        let p = a.params(0);
        let d = SimParams {
            record_trajectory: true,
            ..SimParams::default()
        };
        assert_eq!(p, d);
    }
}
