//! Synthetic inputs shared by the benchmarks.

use testpilot_core::workspace::SourceFile;
use testpilot_core::CallGraph;

/// A graph of `n` nodes where node i calls i+1 and i+7.
pub fn chain_graph(n: usize) -> CallGraph {
    let mut g = CallGraph::new("bench");
    for i in 0..n {
        g.add_node(format!("f{i}"));
        if i + 1 < n {
            g.add_edge(format!("f{i}"), format!("f{}", i + 1));
        }
        if i + 7 < n {
            g.add_edge(format!("f{i}"), format!("f{}", i + 7));
        }
    }
    g
}

/// `modules` Python files with `funcs` functions each, every function
/// calling its successor.
pub fn python_sources(modules: usize, funcs: usize) -> Vec<SourceFile> {
    (0..modules)
        .map(|m| {
            let mut text = String::new();
            for f in 0..funcs {
                text.push_str(&format!(
                    "def m{m}_f{f}(x):\n    y = x + {f}\n    return m{m}_f{}(y)\n\n\n",
                    (f + 1) % funcs
                ));
            }
            SourceFile::new(format!("pkg/mod_{m}.py"), text)
        })
        .collect()
}

/// coverage.py-style JSON with `files` entries.
pub fn coveragepy_json(files: usize) -> String {
    let entries: Vec<String> = (0..files)
        .map(|i| {
            format!(
                "\"src/m{i}.py\": {{\"summary\": {{\"num_statements\": {}, \"missing_lines\": {}}}}}",
                50 + i,
                i % 7
            )
        })
        .collect();
    format!("{{\"files\": {{{}}}}}", entries.join(", "))
}

/// JUnit XML with `cases` test cases, every tenth failing.
pub fn junit_xml(cases: usize) -> String {
    let mut xml = String::from("<testsuites><testsuite name=\"bench\">");
    for i in 0..cases {
        if i % 10 == 0 {
            xml.push_str(&format!(
                "<testcase classname=\"t\" name=\"c{i}\" time=\"0.01\"><failure message=\"boom {i}\"/></testcase>"
            ));
        } else {
            xml.push_str(&format!("<testcase classname=\"t\" name=\"c{i}\" time=\"0.01\"/>"));
        }
    }
    xml.push_str("</testsuite></testsuites>");
    xml
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_produce_parseable_inputs() {
        let g = chain_graph(30);
        assert_eq!(testpilot_core::parse_dot(&g.dot_text()).unwrap(), g);
        assert_eq!(testpilot_core::runner::parse_junit(&junit_xml(20)).unwrap().len(), 20);
        let graph = testpilot_core::static_callgraph(&python_sources(2, 5), testpilot_core::TargetLanguage::Python);
        assert_eq!(graph.nodes.len(), 10);
        assert_eq!(graph.edges.len(), 10);
    }
}
