use std::fmt::Write;

use crate::crn::{decompose_catalytic, Network};

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Graphviz bipartite graph: species are ovals `s<i>`, reactions boxes
/// `r<j>`. Catalytic edges are dashed and undirected.
pub fn export_dot(network: &Network) -> String {
    let mut s = String::from("digraph crn {\n    rankdir=LR;\n");
    for sp in &network.species {
        let _ = writeln!(s, "    s{} [label={}, shape=oval];", sp.id.0, quote(&sp.display_name));
    }
    for j in 0..network.reactions.len() {
        let _ = writeln!(s, "    r{j} [label={}, shape=box];", quote(&format!("r{j}")));
    }
    for (j, r) in network.reactions.iter().enumerate() {
        let d = decompose_catalytic(r);
        let label = |m: u32| if m > 1 { format!(" [label={}]", quote(&m.to_string())) } else { String::new() };
        for (sp, m) in d.net_reagents.iter() {
            let _ = writeln!(s, "    s{} -> r{j}{};", sp.0, label(m));
        }
        for (sp, m) in d.net_products.iter() {
            let _ = writeln!(s, "    r{j} -> s{}{};", sp.0, label(m));
        }
        for (sp, m) in d.catalysts.iter() {
            let extra = if m > 1 { format!(", label={}", quote(&m.to_string())) } else { String::new() };
            let _ = writeln!(s, "    s{} -> r{j} [style=dashed, dir=none, color=\"#2ca02c\"{extra}];", sp.0);
        }
    }
    s.push_str("}\n");
    s
}
