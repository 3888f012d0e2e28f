//! Attack reports: the ordered damaged nodes with per-step metric series.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cascade::{Episode, RewardWeights};
use crate::error::Result;
use crate::graph::{CoupledGraph, NodeId};

/// Step 0 of every series holds the intact-graph values, so each series has
/// `nodes.len() + 1` entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub method: String,
    pub nodes: Vec<NodeId>,
    pub power: Vec<f64>,
    pub sigma: Vec<f64>,
    pub gcc: Vec<usize>,
    pub anc: Vec<f64>,
    pub reward: Vec<f64>,
    pub cum_reward: Vec<f64>,
    pub seconds: f64,
}

impl AttackReport {
    pub fn budget(&self) -> usize {
        self.nodes.len()
    }

    pub fn final_cum_reward(&self) -> f64 {
        *self.cum_reward.last().expect("step 0 always present")
    }

    /// Remaining power as a fraction of the intact power (1.0 if there was none).
    pub fn final_power_fraction(&self) -> f64 {
        let p0 = self.power[0];
        if p0 > 0.0 {
            self.power[self.power.len() - 1] / p0
        } else {
            1.0
        }
    }

    pub fn final_anc(&self) -> f64 {
        self.anc[self.anc.len() - 1]
    }

    /// Columns: step, node, power, sigma, gcc, anc, reward, cum_reward.
    /// The node cell of step 0 is empty. Wall-clock time is not written.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["step", "node", "power", "sigma", "gcc", "anc", "reward", "cum_reward"])?;
        for k in 0..=self.budget() {
            let node = if k == 0 { String::new() } else { self.nodes[k - 1].to_string() };
            w.write_record([
                k.to_string(),
                node,
                self.power[k].to_string(),
                self.sigma[k].to_string(),
                self.gcc[k].to_string(),
                self.anc[k].to_string(),
                self.reward[k].to_string(),
                self.cum_reward[k].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    /// Parses a report written by [`AttackReport::write_csv`].
    pub fn read_csv(method: &str, path: impl AsRef<Path>) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let mut rep = AttackReport {
            method: method.to_string(),
            nodes: vec![],
            power: vec![],
            sigma: vec![],
            gcc: vec![],
            anc: vec![],
            reward: vec![],
            cum_reward: vec![],
            seconds: 0.0,
        };
        for row in r.deserialize() {
            let row: CsvRow = row?;
            if let Some(v) = row.node {
                rep.nodes.push(v);
            }
            rep.power.push(row.power);
            rep.sigma.push(row.sigma);
            rep.gcc.push(row.gcc);
            rep.anc.push(row.anc);
            rep.reward.push(row.reward);
            rep.cum_reward.push(row.cum_reward);
        }
        Ok(rep)
    }
}

#[derive(Deserialize)]
struct CsvRow {
    #[allow(dead_code)]
    step: usize,
    node: Option<NodeId>,
    power: f64,
    sigma: f64,
    gcc: usize,
    anc: f64,
    reward: f64,
    cum_reward: f64,
}

/// Drives an [`Episode`] and records the metric series of an attack.
#[derive(Debug)]
pub struct AttackRecorder<'g> {
    episode: Episode<'g>,
    weights: RewardWeights,
    report: AttackReport,
    sigma0: f64,
    sigma_sum: f64,
    started: Instant,
}

impl<'g> AttackRecorder<'g> {
    pub fn new(method: impl Into<String>, graph: &'g CoupledGraph, weights: RewardWeights) -> Self {
        let episode = Episode::new(graph);
        let sigma0 = episode.sigma();
        let report = AttackReport {
            method: method.into(),
            nodes: Vec::new(),
            power: vec![episode.power()],
            sigma: vec![sigma0],
            gcc: vec![episode.gcc()],
            anc: vec![1.0],
            reward: vec![0.0],
            cum_reward: vec![0.0],
            seconds: 0.0,
        };
        AttackRecorder {
            episode,
            weights,
            report,
            sigma0,
            sigma_sum: 0.0,
            started: Instant::now(),
        }
    }

    pub fn episode(&self) -> &Episode<'g> {
        &self.episode
    }

    /// Damages `v`, records the step and returns its reward.
    pub fn apply(&mut self, v: NodeId) -> Result<f64> {
        let out = self.episode.damage(v)?;
        let r = out.reward(&self.weights);
        let rep = &mut self.report;
        rep.nodes.push(v);
        rep.power.push(out.power_after);
        rep.sigma.push(out.sigma_after);
        rep.gcc.push(out.gcc_after);
        self.sigma_sum += out.sigma_after;
        let anc = if self.sigma0 > 0.0 {
            self.sigma_sum / self.sigma0 / rep.nodes.len() as f64
        } else {
            1.0
        };
        rep.anc.push(anc);
        rep.reward.push(r);
        rep.cum_reward.push(rep.cum_reward[rep.cum_reward.len() - 1] + r);
        Ok(r)
    }

    pub fn finish(mut self) -> AttackReport {
        self.report.seconds = self.started.elapsed().as_secs_f64();
        self.report
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::chain;

    #[test]
    fn chain_report_series() {
        let g = chain();
        let w = RewardWeights::new(1.0, 0.0).unwrap();
        let mut rec = AttackRecorder::new("manual", &g, w);
        assert_eq!(rec.apply(1).unwrap(), 100.0);
        let rep = rec.finish();
        assert_eq!(rep.nodes, vec![1]);
        assert_eq!(rep.power, vec![100.0, 0.0]);
        assert_eq!(rep.cum_reward, vec![0.0, 100.0]);
        assert_eq!(rep.final_power_fraction(), 0.0);
        let csv = rep.to_csv_string();
        assert_eq!(
            csv,
            "step,node,power,sigma,gcc,anc,reward,cum_reward\n0,,100,0,1,1,0,0\n1,1,0,0,0,1,100,100\n"
        );
    }

    #[test]
    fn csv_round_trip() {
        let g = chain();
        let mut rec = AttackRecorder::new("m", &g, RewardWeights::normalized(&g));
        rec.apply(2).unwrap();
        let rep = rec.finish();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        rep.save_csv(&p).unwrap();
        let back = AttackReport::read_csv("m", &p).unwrap();
        assert_eq!(back.nodes, rep.nodes);
        assert_eq!(back.cum_reward, rep.cum_reward);
        assert_eq!(back.to_csv_string(), rep.to_csv_string());
    }
}
