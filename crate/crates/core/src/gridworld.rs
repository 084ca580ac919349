//! Gridworld layouts and the generic MDP text format.
//!
//! Layout characters: `S` start, `G` goal, `#` wall, `.` free cell.
//! Actions are 0=up, 1=down, 2=left, 3=right; a move into a wall or off the
//! grid stays in place. With probability `slip` the executed action is drawn
//! uniformly from all four. The goal is absorbing with reward 1 per step.

use crate::error::{CoreError, Result};
use crate::mdp::TabularMdp;

pub const GRID_ACTIONS: usize = 4;

#[derive(Debug, Clone)]
pub struct Gridworld {
    pub width: usize,
    pub height: usize,
    pub cells: Vec<char>,
    pub mdp: TabularMdp,
}

impl Gridworld {
    /// (x, y) coordinates of a state, normalized to [0, 1].
    pub fn coords(&self, state: usize) -> (f64, f64) {
        let x = (state % self.width) as f64 / (self.width.max(2) - 1) as f64;
        let y = (state / self.width) as f64 / (self.height.max(2) - 1) as f64;
        (x, y)
    }
}

pub fn parse_gridworld(layout: &str, slip: f64, gamma: f64) -> Result<Gridworld> {
    if !(0.0..=1.0).contains(&slip) {
        return Err(CoreError::InvalidInput(format!("slip {slip} outside [0,1]")));
    }
    let rows: Vec<&str> = layout.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    if rows.is_empty() {
        return Err(CoreError::Parse { line: 0, msg: "empty gridworld layout".into() });
    }
    let width = rows[0].chars().count();
    let height = rows.len();
    let mut cells = Vec::with_capacity(width * height);
    for (i, row) in rows.iter().enumerate() {
        if row.chars().count() != width {
            return Err(CoreError::Parse { line: i + 1, msg: "ragged row width".into() });
        }
        for c in row.chars() {
            match c {
                'S' | 'G' | '#' | '.' => cells.push(c),
                other => {
                    return Err(CoreError::Parse {
                        line: i + 1,
                        msg: format!("unknown cell character '{other}'"),
                    })
                }
            }
        }
    }
    let n_states = width * height;
    let starts: Vec<usize> =
        cells.iter().enumerate().filter(|(_, c)| **c == 'S').map(|(i, _)| i).collect();
    if starts.is_empty() {
        return Err(CoreError::Parse { line: 0, msg: "layout has no start cell".into() });
    }
    if !cells.iter().any(|c| *c == 'G') {
        return Err(CoreError::Parse { line: 0, msg: "layout has no goal cell".into() });
    }

    let step = |s: usize, a: usize| -> usize {
        let (x, y) = (s % width, s / width);
        let (nx, ny) = match a {
            0 => (x, y.wrapping_sub(1)),
            1 => (x, y + 1),
            2 => (x.wrapping_sub(1), y),
            _ => (x + 1, y),
        };
        if nx >= width || ny >= height {
            return s;
        }
        let t = ny * width + nx;
        if cells[t] == '#' {
            s
        } else {
            t
        }
    };

    let mut transition = vec![0.0; n_states * GRID_ACTIONS * n_states];
    let mut reward = vec![0.0; n_states * GRID_ACTIONS];
    for s in 0..n_states {
        for a in 0..GRID_ACTIONS {
            let base = (s * GRID_ACTIONS + a) * n_states;
            if cells[s] == 'G' {
                transition[base + s] = 1.0;
                reward[s * GRID_ACTIONS + a] = 1.0;
                continue;
            }
            if cells[s] == '#' {
                // Unreachable; self-loop keeps the tensor stochastic.
                transition[base + s] = 1.0;
                continue;
            }
            for exec in 0..GRID_ACTIONS {
                let p = if exec == a { 1.0 - slip + slip / 4.0 } else { slip / 4.0 };
                transition[base + step(s, exec)] += p;
            }
        }
    }
    let mut init = vec![0.0; n_states];
    for &s in &starts {
        init[s] = 1.0 / starts.len() as f64;
    }
    let mdp = TabularMdp::new(n_states, GRID_ACTIONS, transition, reward, gamma, init)?;
    Ok(Gridworld { width, height, cells, mdp })
}

/// The canonical 8x8 benchmark: start corner, goal corner, slip 0.1, gamma 0.95.
pub fn canonical_benchmark() -> Gridworld {
    let layout = "\
S.......
........
........
........
........
........
........
.......G";
    parse_gridworld(layout, 0.1, 0.95).expect("canonical layout is valid")
}

/// Parse the explicit-tensor MDP text format:
///
/// ```text
/// mdp v1 <n_states> <n_actions> <gamma>
/// init <n_states floats>
/// reward <s> <n_actions floats>          (one line per state)
/// trans <s> <a> <n_states floats>        (one line per state-action)
/// ```
pub fn parse_mdp_text(text: &str) -> Result<TabularMdp> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (ln, header) = lines
        .next()
        .ok_or(CoreError::Parse { line: 0, msg: "empty MDP file".into() })?;
    let head: Vec<&str> = header.split_whitespace().collect();
    if head.len() != 5 || head[0] != "mdp" || head[1] != "v1" {
        return Err(CoreError::Parse { line: ln + 1, msg: "expected 'mdp v1 S A gamma' header".into() });
    }
    let n_states: usize = parse_field(head[2], ln)?;
    let n_actions: usize = parse_field(head[3], ln)?;
    let gamma: f64 = parse_field(head[4], ln)?;
    let mut init = vec![0.0; n_states];
    let mut reward = vec![0.0; n_states * n_actions];
    let mut transition = vec![0.0; n_states * n_actions * n_states];
    let mut seen_init = false;
    for (ln, line) in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks[0] {
            "init" => {
                expect_len(&toks, 1 + n_states, ln)?;
                for (i, t) in toks[1..].iter().enumerate() {
                    init[i] = parse_field(t, ln)?;
                }
                seen_init = true;
            }
            "reward" => {
                expect_len(&toks, 2 + n_actions, ln)?;
                let s: usize = parse_field(toks[1], ln)?;
                check_index(s, n_states, "state", ln)?;
                for (a, t) in toks[2..].iter().enumerate() {
                    reward[s * n_actions + a] = parse_field(t, ln)?;
                }
            }
            "trans" => {
                expect_len(&toks, 3 + n_states, ln)?;
                let s: usize = parse_field(toks[1], ln)?;
                let a: usize = parse_field(toks[2], ln)?;
                check_index(s, n_states, "state", ln)?;
                check_index(a, n_actions, "action", ln)?;
                for (s2, t) in toks[3..].iter().enumerate() {
                    transition[(s * n_actions + a) * n_states + s2] = parse_field(t, ln)?;
                }
            }
            other => {
                return Err(CoreError::Parse {
                    line: ln + 1,
                    msg: format!("unknown record '{other}'"),
                })
            }
        }
    }
    if !seen_init {
        return Err(CoreError::Parse { line: 0, msg: "missing init line".into() });
    }
    TabularMdp::new(n_states, n_actions, transition, reward, gamma, init)
}

fn parse_field<T: std::str::FromStr>(tok: &str, ln: usize) -> Result<T> {
    tok.parse().map_err(|_| CoreError::Parse {
        line: ln + 1,
        msg: format!("cannot parse '{tok}'"),
    })
}

fn expect_len(toks: &[&str], want: usize, ln: usize) -> Result<()> {
    if toks.len() != want {
        return Err(CoreError::Parse {
            line: ln + 1,
            msg: format!("expected {want} tokens, found {}", toks.len()),
        });
    }
    Ok(())
}

fn check_index(i: usize, n: usize, what: &str, ln: usize) -> Result<()> {
    if i >= n {
        return Err(CoreError::Parse { line: ln + 1, msg: format!("{what} index {i} out of range") });
    }
    Ok(())
}
