//! Episode summary table.

use super::EpisodeMetrics;
use std::fmt::Write;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TourStats {
    pub avg: f64,
    pub max: f64,
    pub min: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl TourStats {
    pub fn of(d: &[f64]) -> Self {
        if d.is_empty() {
            return Self {
                avg: 0.0,
                max: 0.0,
                min: 0.0,
                std: 0.0,
            };
        }
        let n = d.len() as f64;
        let avg = d.iter().sum::<f64>() / n;
        let var = d.iter().map(|x| (x - avg).powi(2)).sum::<f64>() / n;
        Self {
            avg,
            max: d.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            min: d.iter().copied().fold(f64::INFINITY, f64::min),
            std: var.sqrt(),
        }
    }

    pub fn gap(&self) -> f64 {
        self.max - self.min
    }
}

/// `robot,tour_distance` rows followed by the aggregate rows
/// (avg, max, min, std, max-min, time, coverage, completed).
pub fn summary_csv(m: &EpisodeMetrics) -> String {
    let mut out = String::from("robot,tour_distance\n");
    for (id, d) in &m.tour_distances {
        let _ = writeln!(out, "{id},{d:.6}");
    }
    let d: Vec<f64> = m.tour_distances.iter().map(|x| x.1).collect();
    let s = TourStats::of(&d);
    let _ = writeln!(out, "avg,{:.6}", s.avg);
    let _ = writeln!(out, "max,{:.6}", s.max);
    let _ = writeln!(out, "min,{:.6}", s.min);
    let _ = writeln!(out, "std,{:.6}", s.std);
    let _ = writeln!(out, "max-min,{:.6}", s.gap());
    let _ = writeln!(out, "time,{:.6}", m.time);
    let _ = writeln!(out, "coverage,{:.6}", m.coverage);
    let _ = writeln!(out, "completed,{}", m.completed);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats_of_known_values() {
        let s = TourStats::of(&[2.0, 4.0, 6.0]);
        assert_eq!(s.avg, 4.0);
        assert_eq!((s.max, s.min, s.gap()), (6.0, 2.0, 4.0));
        assert!((s.std - (8.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(TourStats::of(&[]).avg, 0.0);
    }
}
