use std::fs;
use std::io::Write;
use std::path::Path;

use super::commands::probe_instance;
use super::{read_rules, CliError, CheckArgs};
use crate::augment::{ground, statement_cyclicity, AugmentError, GroundingContext, ProbeContext};
use crate::graph::{ComputationGraph, Cyclicity, GraphFile, NodeId};
use crate::rules::{contrapositive, decompose_consequent, normalize_antecedent, RuleProgram, RuleStatement, StatementKind};

fn node_name(graph: &ComputationGraph, id: NodeId) -> String {
    graph
        .node(id)
        .ok()
        .and_then(|r| r.name.clone())
        .unwrap_or_else(|| format!("node {id}"))
}

fn load_graph_file(path: &Path) -> Result<(ComputationGraph, GroundingContext), CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let file = GraphFile::parse(&text).map_err(|e| CliError::io(path, e))?;
    let graph = file.build().map_err(|e| CliError::io(path, e))?;
    let probe = ProbeContext::of_file(&file).map_err(|e| CliError::io(path, format!("probe section: {e}")))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let ctx = probe.load(base).map_err(|e| CliError::io(path, e))?;
    Ok((graph, ctx))
}

/// How the contrapositive of a cyclic statement fares.
fn contrapositive_hint(program: &RuleProgram, stmt: &RuleStatement, graph: &ComputationGraph) -> String {
    let flipped = match contrapositive(stmt) {
        Ok(c) => c,
        Err(e) => return format!("no usable contrapositive ({e})"),
    };
    let verdict = decompose_consequent(&flipped)
        .map_err(AugmentError::from)
        .and_then(|parts| {
            parts
                .iter()
                .map(|p| statement_cyclicity(program, p, graph))
                .collect::<Result<Vec<_>, _>>()
        });
    match verdict {
        Ok(v) if v.iter().all(|c| !c.is_cyclic()) => format!("the contrapositive `{flipped}` is acyclic"),
        Ok(_) => format!("the contrapositive `{flipped}` is cyclic as well"),
        Err(e) => format!("the contrapositive `{flipped}` does not compile: {e}"),
    }
}

/// Report one statement; returns whether it passed.
fn check_statement(
    program: &RuleProgram,
    stmt: &RuleStatement,
    graph: &ComputationGraph,
    ctx: &GroundingContext,
    out: &mut dyn Write,
) -> Result<bool, CliError> {
    let w = |out: &mut dyn Write, s: String| writeln!(out, "{s}").map_err(|e| CliError::Config(e.to_string()));
    w(out, format!("  line {}: {stmt}", stmt.line))?;
    if stmt.kind == StatementKind::Biconditional {
        w(out, "    auxiliary definition".into())?;
        return Ok(true);
    }
    let parts = match decompose_consequent(stmt) {
        Ok(p) => p,
        Err(e) => {
            w(out, format!("    error: {e}"))?;
            return Ok(false);
        }
    };
    let consequents: Vec<String> = parts.iter().map(|p| p.consequent.to_string()).collect();
    w(
        out,
        format!("    normal form: {} -> {}", normalize_antecedent(stmt), consequents.join(" & ")),
    )?;
    let mut ok = true;
    for part in &parts {
        match statement_cyclicity(program, part, graph) {
            Ok(Cyclicity::Acyclic) => {}
            Ok(Cyclicity::Cyclic { consequent, antecedent }) => {
                ok = false;
                let c = node_name(graph, consequent);
                let witness = if consequent == antecedent {
                    format!("the antecedent reads `{c}'`, the value this rule constrains")
                } else {
                    format!("consequent `{c}` is upstream of antecedent `{}`", node_name(graph, antecedent))
                };
                w(out, format!("    cyclic: {witness}"))?;
                w(out, format!("    hint: {}", contrapositive_hint(program, part, graph)))?;
            }
            Err(e @ AugmentError::UnknownTable { .. }) => return Err(e.into()),
            Err(e) => {
                w(out, format!("    error: {e}"))?;
                return Ok(false);
            }
        }
    }
    if !ok {
        return Ok(false);
    }
    match ground(program, stmt, ctx, graph) {
        Ok(g) => {
            w(out, format!("    grounded: {} constraint(s) on the probe", g.len()))?;
            w(out, "    acyclic".into())?;
            Ok(true)
        }
        Err(e @ AugmentError::UnknownTable { .. }) => Err(e.into()),
        Err(e) => {
            w(out, format!("    error: {e}"))?;
            Ok(false)
        }
    }
}

pub(super) fn cmd_check(a: &CheckArgs, out: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let (graph, ctx) = match (&a.graph, a.task) {
        (Some(path), _) => load_graph_file(path)?,
        (None, Some(task)) => probe_instance(task, a.data.as_deref())?,
        (None, None) => return Err(CliError::Config("give --graph or --task".into())),
    };
    let mut failed = 0usize;
    let mut total = 0usize;
    for spec in &a.rules {
        let program = read_rules(spec)?;
        writeln!(out, "{spec}: parse OK, {} statement(s)", program.statements.len())
            .map_err(|e| CliError::Config(e.to_string()))?;
        for stmt in &program.statements {
            total += 1;
            if !check_statement(&program, stmt, &graph, &ctx, out)? {
                failed += 1;
            }
        }
    }
    if failed > 0 {
        return Err(CliError::Validation(format!("{failed} of {total} statement(s) failed the check")));
    }
    writeln!(out, "{total} statement(s): all acyclic and well-formed").map_err(|e| CliError::Config(e.to_string()))?;
    Ok(())
}
