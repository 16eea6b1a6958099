//! 0-1 arc model of one order in LP file format, plus a reader for the
//! subset of the format this module writes.
//!
//! Nodes are numbered from 1: first one node per trailing slot (the bin
//! waiting at that I/O point, or the I/O point itself when empty), then the
//! candidate bins in ascending id order. Variables:
//!
//! * `x_p_i_j` (binary): a cycle at I/O point `p` returns node `i` and
//!   retrieves node `j`;
//! * `z_p_k` (binary): line `k` is sorted from the bin waiting at `p`,
//!   fixed by the instance;
//! * `u_i` (continuous): subtour-elimination order of candidate node `i`.
//!
//! Objective coefficients are the per-cycle expected times, so the optimum
//! equals the native solver's objective. The default model prices executed
//! cycles only; [`LpOptions::closed_tour`] adds one closing arc back into
//! every departing trailing node.
//!
//! Grammar written and read:
//!
//! ```text
//! file     := { "\" comment } "Minimize" obj "Subject To" { row }
//!             "Bounds" { bound } "Binary" { name } "End"
//! obj      := name ":" expr
//! row      := name ":" expr ("<=" | ">=" | "=") number
//! expr     := [ "-" ] number var { ("+" | "-") number var }
//! bound    := number "<=" var "<=" number
//! ```

use super::engine::price_cycle;
use super::SequencingError;
use crate::catalog::{Bin, SequencingInstance};
use crate::geometry::{GridPosition, RackConfig};
use crate::stochastics::SortingModel;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub name: String,
    pub terms: Vec<(String, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bound {
    pub var: String,
    pub lower: f64,
    pub upper: f64,
}

/// An LP/MILP in the shape written by [`write_lp`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LpModel {
    pub comments: Vec<String>,
    pub objective: Vec<(String, f64)>,
    pub rows: Vec<Row>,
    pub bounds: Vec<Bound>,
    pub binaries: Vec<String>,
}

impl LpModel {
    pub fn variable_count(&self) -> usize {
        self.binaries.len() + self.bounds.len()
    }

    /// Coefficient of `var` in row `row`, zero if absent.
    pub fn coefficient(&self, row: &str, var: &str) -> f64 {
        self.rows
            .iter()
            .find(|r| r.name == row)
            .and_then(|r| r.terms.iter().find(|(v, _)| v == var))
            .map_or(0.0, |(_, c)| *c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LpOptions {
    pub closed_tour: bool,
    pub max_variables: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self {
            closed_tour: false,
            max_variables: 250_000,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("LP line {line}: {message}")]
pub struct LpParseError {
    pub line: usize,
    pub message: String,
}

struct LpNode {
    label: String,
    position: Option<GridPosition>,
    /// Instance line index for candidate nodes.
    line: Option<usize>,
    bin: Option<Bin>,
}

/// Builds the arc model of `inst`.
pub fn build_model(
    inst: &SequencingInstance,
    rack: &RackConfig,
    sorting: &SortingModel,
    opts: &LpOptions,
) -> Result<LpModel, SequencingError> {
    let w = inst.layout.io_count();
    if rack.io_points.len() != w {
        return Err(SequencingError::LayoutMismatch {
            layout: inst.layout,
            io_points: rack.io_points.len(),
        });
    }
    let mut nodes: Vec<LpNode> = inst
        .trailing
        .slots
        .iter()
        .zip(&inst.trailing_bins)
        .map(|(slot, bin)| LpNode {
            label: match bin {
                Some(b) => format!("trailing bin {} at I/O {}", b.id, slot.io + 1),
                None => format!("empty I/O {}", slot.io + 1),
            },
            position: bin.as_ref().map(|b| b.position),
            line: None,
            bin: bin.clone(),
        })
        .collect();
    let mut candidates: Vec<(usize, Bin)> = inst
        .lines
        .iter()
        .enumerate()
        .flat_map(|(k, l)| l.candidates().iter().map(move |b| (k, b.clone())))
        .collect();
    candidates.sort_by_key(|(_, b)| b.id);
    for (k, b) in candidates {
        nodes.push(LpNode {
            label: format!("bin {} (drug {}, line {})", b.id, b.drug, k + 1),
            position: Some(b.position),
            line: Some(k),
            bin: Some(b),
        });
    }

    let n_nodes = nodes.len();
    let n_lines = inst.lines.len();
    let vars = n_nodes * n_nodes.saturating_sub(1) * w + n_lines * w + (n_nodes - w);
    if vars > opts.max_variables {
        return Err(SequencingError::TooLarge(format!(
            "{vars} LP variables exceed the cap {}",
            opts.max_variables
        )));
    }

    let x = |p: usize, i: usize, j: usize| format!("x_{}_{}_{}", p + 1, i + 1, j + 1);
    let z = |p: usize, k: usize| format!("z_{}_{}", p + 1, k + 1);
    let u = |i: usize| format!("u_{}", i + 1);
    let trailing = 0..w;
    let phi = w..n_nodes;
    let pairs = || {
        (0..n_nodes).flat_map(move |i| (0..n_nodes).filter(move |&j| j != i).map(move |j| (i, j)))
    };
    let arcs = || (0..w).flat_map(move |p| pairs().map(move |(i, j)| (p, i, j)));
    // I/O point of each trailing slot, and cycles executed per slot.
    let slot_io: Vec<usize> = inst.trailing.slots.iter().map(|s| s.io).collect();
    let routed = inst.routed_count();
    let per_slot: Vec<usize> = (0..w).map(|s| (s..routed).step_by(w).count()).collect();

    let mut model = LpModel::default();
    model.comments.push(format!(
        "retrieval sequencing model: layout {}, order {}, {} objective",
        inst.layout,
        inst.order.id,
        if opts.closed_tour { "closed-tour" } else { "executed-route" }
    ));
    model.comments.push(format!(
        "sorting mu={} sigma={}, {} routed lines",
        sorting.mu, sorting.sigma, routed
    ));
    for (i, node) in nodes.iter().enumerate() {
        model.comments.push(format!("node {}: {}", i + 1, node.label));
    }

    for (p, i, j) in arcs() {
        let o = rack.io_point(p);
        let from = nodes[i].position.unwrap_or(o);
        let to = nodes[j].position.unwrap_or(o);
        let t = rack.dual_command_unchecked(&o, &from, &to);
        model.objective.push((x(p, i, j), price_cycle(inst.layout, sorting, t)));
    }

    let mut row = |name: String, terms: Vec<(String, f64)>, sense: Sense, rhs: f64| {
        model.rows.push(Row {
            name,
            terms,
            sense,
            rhs,
        });
    };

    // Each trailing node starts exactly one route, from its own I/O point,
    // when that point runs any cycle.
    for s in trailing.clone() {
        let p = slot_io[s];
        let own: Vec<_> = (0..n_nodes).filter(|&j| j != s).map(|j| (x(p, s, j), 1.0)).collect();
        row(format!("depart_{}", s + 1), own, Sense::Eq, (per_slot[s] > 0) as u8 as f64);
        let other: Vec<_> = (0..w)
            .filter(|&q| q != p)
            .flat_map(|q| (0..n_nodes).filter(move |&j| j != s).map(move |j| (q, j)))
            .map(|(q, j)| (x(q, s, j), 1.0))
            .collect();
        if !other.is_empty() {
            row(format!("depart_io_{}", s + 1), other, Sense::Eq, 0.0);
        }
        // arcs into trailing nodes: none, or one closing arc at its own point
        if opts.closed_tour {
            let close: Vec<_> = (0..n_nodes).filter(|&i| i != s).map(|i| (x(p, i, s), 1.0)).collect();
            row(format!("close_{}", s + 1), close, Sense::Eq, (per_slot[s] > 0) as u8 as f64);
            let other: Vec<_> = (0..w)
                .filter(|&q| q != p)
                .flat_map(|q| (0..n_nodes).filter(move |&i| i != s).map(move |i| (q, i)))
                .map(|(q, i)| (x(q, i, s), 1.0))
                .collect();
            if !other.is_empty() {
                row(format!("close_io_{}", s + 1), other, Sense::Eq, 0.0);
            }
        } else {
            let into: Vec<_> = (0..w)
                .flat_map(|q| (0..n_nodes).filter(move |&i| i != s).map(move |i| (q, i)))
                .map(|(q, i)| (x(q, i, s), 1.0))
                .collect();
            row(format!("noreturn_{}", s + 1), into, Sense::Eq, 0.0);
        }
    }

    for (k, line) in inst.lines.iter().enumerate() {
        if !line.is_routed() {
            continue;
        }
        let members: Vec<usize> = phi.clone().filter(|&j| nodes[j].line == Some(k)).collect();
        let mut pick = Vec::new();
        let mut intra = Vec::new();
        for p in 0..w {
            for &j in &members {
                for i in (0..n_nodes).filter(|&i| i != j) {
                    pick.push((x(p, i, j), 1.0));
                    if members.contains(&i) {
                        intra.push((x(p, i, j), 1.0));
                    }
                }
            }
        }
        // exactly one retrieval from the candidate set, never from inside it
        row(format!("pick_{}", k + 1), pick, Sense::Eq, 1.0);
        if !intra.is_empty() {
            row(format!("intra_{}", k + 1), intra, Sense::Eq, 0.0);
        }
    }

    for j in phi.clone() {
        let inflow: Vec<_> = (0..w)
            .flat_map(|p| (0..n_nodes).filter(move |&i| i != j).map(move |i| (p, i)))
            .map(|(p, i)| (x(p, i, j), 1.0))
            .collect();
        row(format!("in_{}", j + 1), inflow.clone(), Sense::Le, 1.0);
        let outflow: Vec<_> = (0..w)
            .flat_map(|p| (0..n_nodes).filter(move |&i| i != j).map(move |i| (p, i)))
            .map(|(p, i)| (x(p, j, i), 1.0))
            .collect();
        row(format!("out_{}", j + 1), outflow, Sense::Le, 1.0);
        // a bin is returned at the point it was brought to, and only if brought
        for p in 0..w {
            let mut terms: Vec<_> = (0..n_nodes)
                .filter(|&i| i != j)
                .map(|i| (x(p, j, i), 1.0))
                .collect();
            terms.extend((0..n_nodes).filter(|&i| i != j).map(|i| (x(p, i, j), -1.0)));
            let sense = if opts.closed_tour { Sense::Eq } else { Sense::Le };
            row(format!("flow_{}_{}", p + 1, j + 1), terms, sense, 0.0);
        }
        let line = nodes[j].line.expect("candidate node");
        let bin = nodes[j].bin.as_ref().expect("candidate node");
        let dosage = f64::from(inst.lines[line].dosage);
        let stock: Vec<_> = inflow.into_iter().map(|(v, _)| (v, dosage)).collect();
        row(format!("stock_{}", j + 1), stock, Sense::Le, f64::from(bin.stock));
    }

    for s in 0..w {
        let p = slot_io[s];
        let closing = if opts.closed_tour && per_slot[s] > 0 { 1 } else { 0 };
        let terms: Vec<_> = pairs().map(|(i, j)| (x(p, i, j), 1.0)).collect();
        row(
            format!("count_io_{}", p + 1),
            terms,
            Sense::Eq,
            (per_slot[s] + closing) as f64,
        );
    }
    if w == 2 {
        let mut terms: Vec<_> = pairs().map(|(i, j)| (x(0, i, j), 1.0)).collect();
        terms.extend(pairs().map(|(i, j)| (x(1, i, j), -1.0)));
        row("balance_hi".into(), terms.clone(), Sense::Le, 1.0);
        row("balance_lo".into(), terms, Sense::Ge, -1.0);
    }
    let closing: usize = if opts.closed_tour {
        per_slot.iter().filter(|&&c| c > 0).count()
    } else {
        0
    };
    let all: Vec<_> = arcs().map(|(p, i, j)| (x(p, i, j), 1.0)).collect();
    row("cycles".into(), all, Sense::Eq, (routed + closing) as f64);

    let flags = inst.overlap_flags();
    let mut zsum = Vec::new();
    for p in 0..w {
        for k in 0..n_lines {
            let on = flags.iter().any(|&(slot, line)| slot_io[slot] == p && line == k);
            row(format!("zfix_{}_{}", p + 1, k + 1), vec![(z(p, k), 1.0)], Sense::Eq, on as u8 as f64);
            zsum.push((z(p, k), 1.0));
        }
    }
    row("overlap".into(), zsum, Sense::Le, w as f64);

    let big = n_nodes as f64;
    for p in 0..w {
        for i in phi.clone() {
            for j in phi.clone().filter(|&j| j != i) {
                row(
                    format!("mtz_{}_{}_{}", p + 1, i + 1, j + 1),
                    vec![(u(i), 1.0), (u(j), -1.0), (x(p, i, j), big)],
                    Sense::Le,
                    big - 1.0,
                );
            }
        }
    }

    model.bounds = phi
        .clone()
        .map(|i| Bound {
            var: u(i),
            lower: 1.0,
            upper: big - 1.0,
        })
        .collect();
    model.binaries = arcs().map(|(p, i, j)| x(p, i, j)).collect();
    for p in 0..w {
        model.binaries.extend((0..n_lines).map(|k| z(p, k)));
    }
    Ok(model)
}

/// Exports the arc model of `inst` as LP text.
pub fn export_lp(
    inst: &SequencingInstance,
    rack: &RackConfig,
    sorting: &SortingModel,
    opts: &LpOptions,
) -> Result<String, SequencingError> {
    Ok(write_lp(&build_model(inst, rack, sorting, opts)?))
}

const TERMS_PER_LINE: usize = 6;

fn write_expr(out: &mut String, terms: &[(String, f64)]) {
    for (n, (var, coef)) in terms.iter().enumerate() {
        if n > 0 && n % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        let sign = if coef.is_sign_negative() { "-" } else { "+" };
        if n == 0 {
            if coef.is_sign_negative() {
                let _ = write!(out, " - {} {var}", coef.abs());
            } else {
                let _ = write!(out, " {coef} {var}");
            }
        } else {
            let _ = write!(out, " {sign} {} {var}", coef.abs());
        }
    }
}

pub fn write_lp(model: &LpModel) -> String {
    let mut out = String::new();
    for c in &model.comments {
        let _ = writeln!(out, "\\ {c}");
    }
    out.push_str("Minimize\n obj:");
    write_expr(&mut out, &model.objective);
    out.push_str("\nSubject To\n");
    for r in &model.rows {
        let _ = write!(out, " {}:", r.name);
        write_expr(&mut out, &r.terms);
        let _ = writeln!(out, " {} {}", r.sense.symbol(), r.rhs);
    }
    out.push_str("Bounds\n");
    for b in &model.bounds {
        let _ = writeln!(out, " {} <= {} <= {}", b.lower, b.var, b.upper);
    }
    out.push_str("Binary\n");
    for chunk in model.binaries.chunks(8) {
        let _ = writeln!(out, " {}", chunk.join(" "));
    }
    out.push_str("End\n");
    out
}

#[derive(PartialEq, Clone, Copy)]
enum Section {
    Header,
    Objective,
    Rows,
    Bounds,
    Binary,
    End,
}

/// Parses LP text produced by [`write_lp`].
pub fn parse_lp(text: &str) -> Result<LpModel, LpParseError> {
    let mut model = LpModel::default();
    let mut section = Section::Header;
    // tokens of the current section with their line numbers
    let mut tokens: Vec<(usize, String)> = Vec::new();

    let flush = |section: Section, tokens: &mut Vec<(usize, String)>, model: &mut LpModel| -> Result<(), LpParseError> {
        let toks = std::mem::take(tokens);
        match section {
            Section::Objective => {
                let mut it = toks.into_iter().peekable();
                if let Some((line, name)) = it.next() {
                    if !name.ends_with(':') {
                        return Err(LpParseError { line, message: "objective needs a name".into() });
                    }
                }
                let (terms, rest) = parse_terms(&mut it)?;
                if let Some((line, tok)) = rest {
                    return Err(LpParseError { line, message: format!("unexpected `{tok}` in objective") });
                }
                model.objective = terms;
            }
            Section::Rows => {
                let mut it = toks.into_iter().peekable();
                while let Some((line, name)) = it.next() {
                    let Some(name) = name.strip_suffix(':') else {
                        return Err(LpParseError { line, message: format!("expected row name, got `{name}`") });
                    };
                    let (terms, sense_tok) = parse_terms(&mut it)?;
                    let (line, sense) = sense_tok.ok_or(LpParseError { line, message: "row without sense".into() })?;
                    let sense = match sense.as_str() {
                        "<=" | "=<" => Sense::Le,
                        ">=" | "=>" => Sense::Ge,
                        "=" => Sense::Eq,
                        other => return Err(LpParseError { line, message: format!("bad sense `{other}`") }),
                    };
                    let rhs = parse_signed(&mut it, line)?;
                    model.rows.push(Row { name: name.to_string(), terms, sense, rhs });
                }
            }
            Section::Bounds => {
                let mut it = toks.into_iter();
                while let Some((line, lo)) = it.next() {
                    let mut next = || it.next().map(|t| t.1).ok_or(LpParseError { line, message: "truncated bound".into() });
                    let le1 = next()?;
                    let var = next()?;
                    let le2 = next()?;
                    let hi = next()?;
                    if le1 != "<=" || le2 != "<=" {
                        return Err(LpParseError { line, message: "bounds must read `lo <= var <= hi`".into() });
                    }
                    model.bounds.push(Bound {
                        var,
                        lower: parse_number(&lo, line)?,
                        upper: parse_number(&hi, line)?,
                    });
                }
            }
            Section::Binary => model.binaries.extend(toks.into_iter().map(|t| t.1)),
            Section::Header | Section::End => {
                if let Some((line, tok)) = toks.into_iter().next() {
                    return Err(LpParseError { line, message: format!("unexpected `{tok}`") });
                }
            }
        }
        Ok(())
    };

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if let Some(comment) = trimmed.strip_prefix('\\') {
            if section == Section::Header {
                model.comments.push(comment.trim_start().to_string());
            }
            continue;
        }
        let next = match trimmed.to_ascii_lowercase().as_str() {
            "minimize" | "minimum" | "min" => Some(Section::Objective),
            "subject to" | "such that" | "st" | "s.t." => Some(Section::Rows),
            "bounds" => Some(Section::Bounds),
            "binary" | "binaries" | "bin" => Some(Section::Binary),
            "end" => Some(Section::End),
            _ => None,
        };
        if let Some(next) = next {
            flush(section, &mut tokens, &mut model)?;
            section = next;
            continue;
        }
        if section == Section::End && !trimmed.is_empty() {
            return Err(LpParseError { line, message: "content after End".into() });
        }
        tokens.extend(split_tokens(trimmed).into_iter().map(|t| (line, t)));
    }
    flush(section, &mut tokens, &mut model)?;
    if section != Section::End {
        return Err(LpParseError { line: text.lines().count(), message: "missing End".into() });
    }
    Ok(model)
}

/// Splits on whitespace, separating a trailing `name:` from what follows.
fn split_tokens(line: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in line.split_whitespace() {
        match word.find(':') {
            Some(pos) if pos + 1 < word.len() => {
                out.push(word[..=pos].to_string());
                out.push(word[pos + 1..].to_string());
            }
            _ => out.push(word.to_string()),
        }
    }
    out
}

fn parse_number(tok: &str, line: usize) -> Result<f64, LpParseError> {
    tok.parse::<f64>().map_err(|_| LpParseError {
        line,
        message: format!("expected number, got `{tok}`"),
    })
}

fn parse_signed<I: Iterator<Item = (usize, String)>>(
    it: &mut std::iter::Peekable<I>,
    line: usize,
) -> Result<f64, LpParseError> {
    let (l, tok) = it.next().ok_or(LpParseError { line, message: "missing right-hand side".into() })?;
    match tok.as_str() {
        "-" => {
            let (l, v) = it.next().ok_or(LpParseError { line: l, message: "dangling sign".into() })?;
            Ok(-parse_number(&v, l)?)
        }
        "+" => {
            let (l, v) = it.next().ok_or(LpParseError { line: l, message: "dangling sign".into() })?;
            parse_number(&v, l)
        }
        _ => parse_number(&tok, l),
    }
}

type Terms = (Vec<(String, f64)>, Option<(usize, String)>);

/// Reads `[-] coef var { +|- coef var }` up to a sense token or the end.
fn parse_terms<I: Iterator<Item = (usize, String)>>(
    it: &mut std::iter::Peekable<I>,
) -> Result<Terms, LpParseError> {
    let mut terms = Vec::new();
    let mut sign = 1.0;
    let mut coef: Option<f64> = None;
    for (line, tok) in it.by_ref() {
        match tok.as_str() {
            "<=" | ">=" | "=" | "=<" | "=>" => return Ok((terms, Some((line, tok)))),
            "+" => sign = 1.0,
            "-" => sign = -1.0,
            _ => {
                if let Ok(v) = tok.parse::<f64>() {
                    if coef.is_some() {
                        return Err(LpParseError { line, message: "two coefficients in a row".into() });
                    }
                    coef = Some(v);
                } else {
                    terms.push((tok, sign * coef.take().unwrap_or(1.0)));
                    sign = 1.0;
                }
            }
        }
    }
    Ok((terms, None))
}
