use super::{InfluenceDiagram, NodeKind};
use std::fmt::Write;

impl InfluenceDiagram {
    /// Graphviz rendering: circles for chance nodes, boxes for decisions, a
    /// diamond for the value node, dashed informational arcs.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph influence {\n  rankdir=LR;\n");
        for (i, n) in self.nodes.iter().enumerate() {
            let shape = match n.kind {
                NodeKind::Chance => "circle",
                NodeKind::Decision => "box",
                NodeKind::Value => "diamond",
            };
            let _ = writeln!(out, "  n{} [label=\"N{} {}\", shape={shape}];", i, i + 1, escape(&n.name));
        }
        for (from, to) in self.arcs() {
            let style = if self.kind(to) == NodeKind::Decision { " [style=dashed]" } else { "" };
            let _ = writeln!(out, "  n{from} -> n{to}{style};");
        }
        out.push_str("}\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}
