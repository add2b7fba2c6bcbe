//! Reader for the subset of the MATPOWER `.m` case format the dispatch model needs.
//!
//! Only `mpc.baseMVA`, `mpc.bus`, `mpc.gen` and `mpc.gencost` are read. Columns
//! used: bus `bus_i, PD`; gen `GEN_BUS, GEN_STATUS, PMAX, PMIN`; gencost model 2
//! with at most three coefficients. Everything else is skipped.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::dispatch::DispatchCase;
use crate::error::{Error, Result};

const BUS_PD: usize = 2;
const GEN_BUS: usize = 0;
const GEN_STATUS: usize = 7;
const GEN_PMAX: usize = 8;
const GEN_PMIN: usize = 9;
const POLYNOMIAL_MODEL: i64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusRecord {
    pub id: i64,
    /// Active load, per unit.
    pub load: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenRecord {
    pub bus: i64,
    pub in_service: bool,
    /// Limits, per unit.
    pub p_max: f64,
    pub p_min: f64,
}

/// Polynomial cost in per-unit output: `c2 u^2 + c1 u + c0` in $/h.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenCost {
    pub c2: f64,
    pub c1: f64,
    pub c0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseFile {
    pub base_mva: f64,
    pub buses: Vec<BusRecord>,
    pub gens: Vec<GenRecord>,
    pub costs: Vec<GenCost>,
}

struct Row {
    line: usize,
    values: Vec<f64>,
}

fn strip_comment(line: &str) -> &str {
    match line.find('%') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn parse_row(text: &str, line: usize) -> Result<Option<Row>> {
    let text = text.trim().trim_end_matches(';').trim();
    if text.is_empty() {
        return Ok(None);
    }
    let values = text
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("malformed number '{t}'"),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Some(Row { line, values }))
}

/// Collect the rows of every `mpc.<name> = [ ... ];` block and scalar assignments.
fn scan(text: &str) -> Result<(HashMap<String, Vec<Row>>, HashMap<String, (usize, String)>)> {
    let mut blocks: HashMap<String, Vec<Row>> = HashMap::new();
    let mut scalars = HashMap::new();
    let mut open: Option<(String, usize)> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = strip_comment(raw);
        if let Some((name, _)) = &open {
            let (body, closed) = match line.find(']') {
                Some(i) => (&line[..i], true),
                None => (line, false),
            };
            for piece in body.split(';') {
                if let Some(row) = parse_row(piece, line_no)? {
                    blocks.get_mut(name).expect("block opened").push(row);
                }
            }
            if closed {
                open = None;
            }
            continue;
        }
        let trimmed = line.trim();
        let Some(rest) = trimmed.strip_prefix("mpc.") else {
            continue;
        };
        let Some((name, value)) = rest.split_once('=') else {
            continue;
        };
        let name = name.trim().to_string();
        let value = value.trim();
        if let Some(body) = value.strip_prefix('[') {
            let (body, closed) = match body.find(']') {
                Some(i) => (&body[..i], true),
                None => (body, false),
            };
            blocks.insert(name.clone(), Vec::new());
            for piece in body.split(';') {
                if let Some(row) = parse_row(piece, line_no)? {
                    blocks.get_mut(&name).expect("just inserted").push(row);
                }
            }
            if !closed {
                open = Some((name, line_no));
            }
        } else {
            scalars.insert(
                name,
                (line_no, value.trim_end_matches(';').trim().to_string()),
            );
        }
    }
    if let Some((name, line)) = open {
        return Err(Error::Parse {
            line,
            message: format!("block mpc.{name} is never closed"),
        });
    }
    Ok((blocks, scalars))
}

fn column(row: &Row, col: usize, block: &str) -> Result<f64> {
    row.values.get(col).copied().ok_or_else(|| Error::Parse {
        line: row.line,
        message: format!(
            "mpc.{block} row has {} columns, need at least {}",
            row.values.len(),
            col + 1
        ),
    })
}

fn take_block(
    blocks: &mut HashMap<String, Vec<Row>>,
    name: &str,
    total_lines: usize,
) -> Result<Vec<Row>> {
    blocks.remove(name).ok_or_else(|| Error::Parse {
        line: total_lines,
        message: format!("missing mpc.{name} block"),
    })
}

/// Parse MATPOWER case text, converting MW quantities to per unit.
pub fn parse_case(text: &str) -> Result<CaseFile> {
    let total_lines = text.lines().count().max(1);
    let (mut blocks, scalars) = scan(text)?;

    let base_mva = match scalars.get("baseMVA") {
        Some((line, v)) => v.parse::<f64>().map_err(|_| Error::Parse {
            line: *line,
            message: format!("malformed baseMVA '{v}'"),
        })?,
        None => {
            return Err(Error::Parse {
                line: total_lines,
                message: "missing mpc.baseMVA".into(),
            })
        }
    };
    if !(base_mva > 0.0 && base_mva.is_finite()) {
        let line = scalars["baseMVA"].0;
        return Err(Error::Parse {
            line,
            message: format!("baseMVA must be positive, got {base_mva}"),
        });
    }

    let bus_rows = take_block(&mut blocks, "bus", total_lines)?;
    let gen_rows = take_block(&mut blocks, "gen", total_lines)?;
    let cost_rows = take_block(&mut blocks, "gencost", total_lines)?;

    let mut buses = Vec::with_capacity(bus_rows.len());
    let mut bus_ids = HashMap::new();
    for row in &bus_rows {
        let id = column(row, 0, "bus")? as i64;
        if bus_ids.insert(id, buses.len()).is_some() {
            return Err(Error::Parse {
                line: row.line,
                message: format!("duplicate bus id {id}"),
            });
        }
        buses.push(BusRecord {
            id,
            load: column(row, BUS_PD, "bus")? / base_mva,
        });
    }

    let mut gens = Vec::with_capacity(gen_rows.len());
    for row in &gen_rows {
        let bus = column(row, GEN_BUS, "gen")? as i64;
        if !bus_ids.contains_key(&bus) {
            return Err(Error::Parse {
                line: row.line,
                message: format!("generator references unknown bus {bus}"),
            });
        }
        gens.push(GenRecord {
            bus,
            in_service: column(row, GEN_STATUS, "gen")? > 0.0,
            p_max: column(row, GEN_PMAX, "gen")? / base_mva,
            p_min: column(row, GEN_PMIN, "gen")? / base_mva,
        });
    }

    // Rows beyond the generator count hold reactive costs, which are not used.
    if cost_rows.len() < gens.len() {
        return Err(Error::Parse {
            line: cost_rows.last().map_or(total_lines, |r| r.line),
            message: format!(
                "mpc.gencost has {} rows for {} generators",
                cost_rows.len(),
                gens.len()
            ),
        });
    }
    let mut costs = Vec::with_capacity(gens.len());
    for row in cost_rows.iter().take(gens.len()) {
        let model = column(row, 0, "gencost")? as i64;
        if model != POLYNOMIAL_MODEL {
            return Err(Error::UnsupportedCostModel {
                model,
                line: row.line,
            });
        }
        let n = column(row, 3, "gencost")?;
        if !(n >= 0.0 && n <= 3.0 && n.fract() == 0.0) {
            return Err(Error::Parse {
                line: row.line,
                message: format!(
                    "polynomial cost with {n} coefficients; at most 3 (quadratic) supported"
                ),
            });
        }
        let n = n as usize;
        let coeffs: Vec<f64> = (0..n)
            .map(|k| column(row, 4 + k, "gencost"))
            .collect::<Result<_>>()?;
        // Highest order first; pad to [c2, c1, c0].
        let mut padded = [0.0; 3];
        padded[3 - n..].copy_from_slice(&coeffs);
        costs.push(GenCost {
            c2: padded[0] * base_mva * base_mva,
            c1: padded[1] * base_mva,
            c0: padded[2],
        });
    }

    Ok(CaseFile {
        base_mva,
        buses,
        gens,
        costs,
    })
}

impl CaseFile {
    /// Generators that are decision variables: in service with `p_min < p_max`.
    pub fn dispatchable(&self) -> Vec<usize> {
        (0..self.gens.len())
            .filter(|&i| self.gens[i].in_service && self.gens[i].p_min < self.gens[i].p_max)
            .collect()
    }

    /// In-service units with equal limits; their output is a constant injection.
    pub fn fixed(&self) -> Vec<usize> {
        (0..self.gens.len())
            .filter(|&i| self.gens[i].in_service && self.gens[i].p_min >= self.gens[i].p_max)
            .collect()
    }

    /// Dispatch model over the dispatchable units, with every bus as a load node.
    pub fn to_dispatch_case(&self) -> Result<DispatchCase> {
        let units = self.dispatchable();
        let fixed: f64 = self.fixed().iter().map(|&i| self.gens[i].p_max).sum();
        DispatchCase::new(
            units.iter().map(|&i| self.gens[i].p_min).collect(),
            units.iter().map(|&i| self.gens[i].p_max).collect(),
            units.iter().map(|&i| self.costs[i].c2).collect(),
            units.iter().map(|&i| self.costs[i].c1).collect(),
            self.buses.iter().map(|b| b.load).collect(),
        )?
        .with_fixed_output(fixed)
    }
}
