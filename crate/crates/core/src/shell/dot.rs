//! Graphviz text for CEGs, global nets and flattenings.

use std::fmt::Write;

use crate::ceg::{FailureCeg, NodeKind};
use crate::global_net::GlobalNet;
use crate::hierarchy::Flattening;

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Twelve-colour Brewer scheme; stages beyond it wrap around.
fn stage_colour(stage: usize) -> String {
    format!("/set312/{}", stage % 12 + 1)
}

pub fn ceg_to_dot(ceg: &FailureCeg) -> String {
    let mut out = String::from("digraph ceg {\n  rankdir=LR;\n  node [shape=circle];\n");
    let singleton: Vec<bool> = {
        let mut count = std::collections::BTreeMap::new();
        for n in ceg.nodes() {
            if let Some(s) = n.stage {
                *count.entry(s).or_insert(0) += 1;
            }
        }
        ceg.nodes().iter().map(|n| n.stage.is_none_or(|s| count[&s] == 1)).collect()
    };
    for (w, n) in ceg.nodes().iter().enumerate() {
        let mut attrs = vec![format!("label={}", quote(&n.name))];
        match n.kind {
            NodeKind::Internal => {
                let s = n.stage.expect("internal positions are staged");
                attrs.push(format!("stage={s}"));
                if !singleton[w] {
                    attrs.push(format!("style=filled, fillcolor={}", quote(&stage_colour(s))));
                }
            }
            NodeKind::SinkFail => attrs.push("shape=doublecircle, kind=fail".into()),
            NodeKind::SinkNotFail => attrs.push("shape=doublecircle, kind=\"not fail\"".into()),
        }
        let _ = writeln!(out, "  {} [{}];", quote(&n.name), attrs.join(", "));
    }
    for e in ceg.edges() {
        let _ = writeln!(
            out,
            "  {} -> {} [label={}, prob={}];",
            quote(&ceg.node(e.src).name),
            quote(&ceg.node(e.dst).name),
            quote(&e.label),
            quote(&e.prob.to_string())
        );
    }
    out.push_str("}\n");
    out
}

pub fn gn_to_dot(gn: &GlobalNet) -> String {
    let mut out = String::from("digraph global_net {\n");
    for v in gn.variables() {
        let _ = writeln!(out, "  {} [states={}];", quote(&v.name), quote(&v.states.join("|")));
    }
    for (a, b) in gn.edge_names() {
        let _ = writeln!(out, "  {} -> {};", quote(&a), quote(&b));
    }
    out.push_str("}\n");
    out
}

pub fn flattening_to_dot(flat: &Flattening) -> String {
    let g = &flat.graph;
    let mut names: Vec<&str> = (0..g.len()).map(|i| g.name(i)).collect();
    names.sort_unstable();
    let mut out = String::from("digraph flattening {\n");
    for n in &names {
        let shape = match n.split_once(':').map(|p| p.0) {
            Some("Y") => "box",
            Some("I") => "diamond",
            Some("B") => "octagon",
            Some("T") => "hexagon",
            _ => "ellipse",
        };
        let _ = writeln!(out, "  {} [shape={shape}];", quote(n));
    }
    for (a, b) in g.edge_list() {
        let _ = writeln!(out, "  {} -> {};", quote(&a), quote(&b));
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ceg::Target;

    #[test]
    fn two_edge_ceg() {
        let ceg = FailureCeg::from_parts(
            vec!["w0".into(), "w1".into()],
            vec![
                (0, Target::Pos(1), "a".into(), 1.0),
                (1, Target::Fail, "fail".into(), 0.5),
                (1, Target::NotFail, "not fail".into(), 0.5),
            ],
        )
        .unwrap();
        let dot = ceg_to_dot(&ceg);
        assert_eq!(dot.lines().filter(|l| l.contains(" [label=") && !l.contains("->")).count(), 4);
        assert_eq!(dot, ceg_to_dot(&ceg.clone()));
        assert!(dot.starts_with("digraph ceg {"));
    }
}
