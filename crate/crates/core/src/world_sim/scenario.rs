//! Scenario text files:
//!
//! ```text
//! resolution 0.1
//! robots 3
//! sensor_range 1.5      (optional)
//! start 0 1.0 1.0 0.0   (id x y heading, one per robot)
//! #########
//! #.......#
//! #########
//! ```
//!
//! Grid rows follow the header; the first row is the top of the map.

use crate::error::ScenarioError;
use crate::geom::Point2;
use crate::grid::{Cell, OccupancyGrid};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StartPose {
    pub id: u32,
    pub pos: Point2,
    pub heading: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub world: OccupancyGrid,
    pub robots: usize,
    pub starts: Vec<StartPose>,
    pub sensor_range: Option<f64>,
}

fn num<T: std::str::FromStr>(s: Option<&str>, line: usize, what: &str) -> Result<T, ScenarioError> {
    let s = s.ok_or_else(|| ScenarioError::Parse {
        line,
        msg: format!("missing {what}"),
    })?;
    s.parse().map_err(|_| ScenarioError::Parse {
        line,
        msg: format!("bad {what} `{s}`"),
    })
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let mut resolution: Option<f64> = None;
    let mut robots: Option<usize> = None;
    let mut sensor_range = None;
    let mut starts = Vec::new();
    let mut rows: Vec<(usize, &str)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.trim();
        if l.is_empty() {
            continue;
        }
        if l.chars().all(|c| c == '#' || c == '.') {
            rows.push((line, l));
            continue;
        }
        if !rows.is_empty() {
            return Err(ScenarioError::Parse {
                line,
                msg: "unexpected text inside the grid".into(),
            });
        }
        let mut parts = l.split_whitespace();
        match parts.next() {
            Some("resolution") => resolution = Some(num(parts.next(), line, "resolution")?),
            Some("robots") => robots = Some(num(parts.next(), line, "robot count")?),
            Some("sensor_range") => sensor_range = Some(num(parts.next(), line, "sensor range")?),
            Some("start") => {
                let id = num(parts.next(), line, "robot id")?;
                let x: f64 = num(parts.next(), line, "x")?;
                let y: f64 = num(parts.next(), line, "y")?;
                let heading = num(parts.next(), line, "heading")?;
                starts.push((
                    line,
                    StartPose {
                        id,
                        pos: Point2::new(x, y),
                        heading,
                    },
                ));
            }
            Some(k) => {
                return Err(ScenarioError::Parse {
                    line,
                    msg: format!("unknown key `{k}`"),
                })
            }
            None => {}
        }
        if parts.next().is_some() {
            return Err(ScenarioError::Parse {
                line,
                msg: "trailing fields".into(),
            });
        }
    }
    let resolution =
        resolution.ok_or_else(|| ScenarioError::Invalid("missing resolution".into()))?;
    if !(resolution > 0.0) {
        return Err(ScenarioError::Invalid("resolution must be > 0".into()));
    }
    if sensor_range.is_some_and(|r: f64| !(r > 0.0)) {
        return Err(ScenarioError::Invalid("sensor_range must be > 0".into()));
    }
    if rows.is_empty() {
        return Err(ScenarioError::Invalid("missing grid".into()));
    }
    let width = rows[0].1.len();
    let height = rows.len();
    let mut world = OccupancyGrid::filled(width, height, resolution, Cell::Free);
    for (r, (line, row)) in rows.iter().enumerate() {
        if row.len() != width {
            return Err(ScenarioError::Parse {
                line: *line,
                msg: format!("row width {} != {width}", row.len()),
            });
        }
        let y = height - 1 - r;
        for (x, c) in row.chars().enumerate() {
            world.set(x, y, if c == '#' { Cell::Occupied } else { Cell::Free });
        }
    }
    let robots = robots.unwrap_or(starts.len());
    if robots == 0 || robots > starts.len() {
        return Err(ScenarioError::Invalid(format!(
            "{robots} robots but {} start poses",
            starts.len()
        )));
    }
    let mut out = Vec::new();
    for (line, s) in starts {
        if world.cell_of(s.pos).map(|(x, y)| world.get(x, y)) != Some(Cell::Free) {
            return Err(ScenarioError::Parse {
                line,
                msg: "start pose is not in free space".into(),
            });
        }
        if out.iter().any(|o: &StartPose| o.id == s.id) {
            return Err(ScenarioError::Parse {
                line,
                msg: format!("duplicate robot id {}", s.id),
            });
        }
        out.push(s);
    }
    Ok(Scenario {
        world,
        robots,
        starts: out,
        sensor_range,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "resolution 0.5\nrobots 1\nstart 0 0.75 0.75 0\n####\n#..#\n#..#\n####\n";

    #[test]
    fn parses_small_room() {
        let s = parse_scenario(SMALL).unwrap();
        assert_eq!((s.world.width, s.world.height), (4, 4));
        assert_eq!(s.world.count(Cell::Free), 4);
        assert_eq!(s.starts[0].pos, Point2::new(0.75, 0.75));
        assert_eq!(s.sensor_range, None);
    }

    #[test]
    fn top_row_is_highest_y() {
        let s = parse_scenario("resolution 1\nstart 0 1.5 0.5 0\n###\n#.#\n...\n").unwrap();
        assert_eq!(s.world.get(0, 0), Cell::Free);
        assert_eq!(s.world.get(0, 2), Cell::Occupied);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            parse_scenario("resolution x\n"),
            Err(ScenarioError::Parse { line: 1, .. })
        ));
        assert!(parse_scenario("robots 1\nstart 0 0.75 0.75 0\n##\n").is_err());
        assert!(parse_scenario("resolution 0.5\nstart 0 0.1 0.1 0\n##\n##\n").is_err());
        assert!(parse_scenario(
            "resolution 0.5\nrobots 2\nstart 0 0.75 0.75 0\n####\n#..#\n####\n"
        )
        .is_err());
        assert!(matches!(
            parse_scenario("resolution 0.5\nstart 0 0.75 0.75 0\n####\n#..#\n###\n"),
            Err(ScenarioError::Parse { line: 5, .. })
        ));
        assert!(parse_scenario("resolution 0.5\nbogus 1\n").is_err());
    }
}
