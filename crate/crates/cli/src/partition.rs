use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use topovor_core::balancer::trace_csv;
use topovor_core::topo_graph::parse_snapshot;
use topovor_core::{
    balance, graph_voronoi, BalanceConfig, Metric, NodeId, PartitionResult, PowerPointSet,
};

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Plain,
    Online,
}

#[derive(Args, Debug, Clone)]
pub struct PartitionArgs {
    /// Graph snapshot file (`N`/`E` records).
    pub graph: PathBuf,
    /// Center node ids, comma separated; their order gives the center index.
    #[arg(long, value_delimiter = ',', required = true)]
    pub centers: Vec<u64>,
    /// Weights as `i:j=w` entries, comma separated; `w[j][i]` is set to `-w`.
    #[arg(long, value_delimiter = ',')]
    pub weights: Vec<String>,
    #[arg(long, value_enum, default_value = "plain")]
    pub metric: MetricArg,
    /// Run the weight iteration to convergence and print its trace.
    #[arg(long)]
    pub balance: bool,
    #[arg(long, default_value_t = 10.0)]
    pub b_lambda: f64,
    #[arg(long, default_value_t = 0.5)]
    pub gamma: f64,
    #[arg(long, default_value_t = 200)]
    pub max_iters: usize,
}

fn parse_weights(entries: &[String], n: usize) -> Result<Vec<Vec<f64>>, String> {
    let mut w = vec![vec![0.0; n]; n];
    for e in entries {
        let (ij, val) = e
            .split_once('=')
            .ok_or_else(|| format!("weight `{e}` is not i:j=w"))?;
        let (i, j) = ij
            .split_once(':')
            .ok_or_else(|| format!("weight `{e}` is not i:j=w"))?;
        let i: usize = i
            .trim()
            .parse()
            .map_err(|_| format!("bad index in `{e}`"))?;
        let j: usize = j
            .trim()
            .parse()
            .map_err(|_| format!("bad index in `{e}`"))?;
        let v: f64 = val
            .trim()
            .parse()
            .map_err(|_| format!("bad value in `{e}`"))?;
        if i >= n || j >= n || i == j {
            return Err(format!("weight `{e}` names an invalid center pair"));
        }
        w[i][j] = v;
        w[j][i] = -v;
    }
    Ok(w)
}

fn report(res: &PartitionResult, loads: &[f64]) -> String {
    let mut out = String::from("node,label\n");
    for (v, l) in &res.label {
        let _ = writeln!(out, "{v},{l}");
    }
    out += "center,node,nodes,load\n";
    for (i, c) in res.centers.iter().enumerate() {
        let _ = writeln!(out, "{i},{c},{},{:.6}", res.partition[i].len(), loads[i]);
    }
    out
}

pub fn run(args: &PartitionArgs) -> Result<u8> {
    let text = fs::read_to_string(&args.graph)
        .with_context(|| format!("reading {}", args.graph.display()))?;
    let snap = match parse_snapshot(&text) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{}: {e}", args.graph.display());
            return Ok(crate::EXIT_PARSE);
        }
    };
    let n = args.centers.len();
    let weights = match parse_weights(&args.weights, n) {
        Ok(w) => w,
        Err(e) => {
            eprintln!("{e}");
            return Ok(crate::EXIT_PARSE);
        }
    };
    let centers: Vec<(u32, NodeId)> = args
        .centers
        .iter()
        .enumerate()
        .map(|(i, &c)| (i as u32, NodeId(c)))
        .collect();
    let pp = match PowerPointSet::with_weights(centers, weights) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("{e}");
            return Ok(crate::EXIT_PARSE);
        }
    };
    let metric = match args.metric {
        MetricArg::Plain => Metric::Plain,
        MetricArg::Online => Metric::Online,
    };
    let g = &snap.graph;
    let res = if args.balance {
        let cfg = BalanceConfig {
            gamma: args.gamma,
            b_lambda: args.b_lambda,
            max_iters: args.max_iters,
            ..Default::default()
        };
        if let Err(e) = cfg.validate() {
            eprintln!("{e}");
            return Ok(crate::EXIT_PARSE);
        }
        let nb: Vec<Vec<usize>> = (0..n)
            .map(|i| (0..n).filter(|&j| j != i).collect())
            .collect();
        let out = balance(g, &pp, &cfg, metric, &nb, None)?;
        print!("{}", trace_csv(&out.load_trace));
        let last = out.load_trace.last().expect("trace has the initial row");
        println!(
            "converged,{},iterations,{},D_lambda,{:.6}",
            out.converged, out.iterations, last.spread
        );
        out.final_partition
    } else {
        graph_voronoi(g, &pp, metric)?
    };
    print!("{}", report(&res, &res.load));
    if !res.orphans.is_empty() {
        let ids: Vec<String> = res.orphans.iter().map(|v| v.to_string()).collect();
        eprintln!(
            "{} node(s) unreachable from every center: {}",
            ids.len(),
            ids.join(" ")
        );
        return Ok(crate::EXIT_ORPHANS);
    }
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_are_antisymmetric() {
        let w = parse_weights(&["0:1=0.5".into(), "2:1=-1".into()], 3).unwrap();
        assert_eq!(w[0][1], 0.5);
        assert_eq!(w[1][0], -0.5);
        assert_eq!(w[1][2], 1.0);
        assert!(parse_weights(&["0:0=1".into()], 2).is_err());
        assert!(parse_weights(&["0-1=1".into()], 2).is_err());
        assert!(parse_weights(&["0:5=1".into()], 2).is_err());
    }
}
