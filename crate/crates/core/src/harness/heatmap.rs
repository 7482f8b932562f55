use std::fmt::Write as _;
use std::path::Path;

use crate::attention::AttentionExplanation;
use crate::corpus::TaskId;
use crate::{Error, Result};

pub(crate) fn escape_html(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            _ => out.push(c),
        }
    }
    out
}

/// Self-contained HTML page: one `<span>` per non-PAD token, background
/// alpha equal to its normalized attention weight.
pub fn render_heatmap(e: &AttentionExplanation, task: Option<TaskId>) -> String {
    let title = match task {
        Some(t) => format!("{t} ({})", t.name()),
        None => "document".to_string(),
    };
    let mut html = String::new();
    html.push_str("<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\"/>\n");
    let _ = writeln!(html, "<title>Attention heatmap: {}</title>", escape_html(&title));
    html.push_str(
        "<style>\nbody { font-family: sans-serif; max-width: 60em; margin: 2em auto; }\n\
         .doc { line-height: 2.2; }\n\
         .tok { padding: 0.15em 0.25em; border-radius: 0.2em; }\n</style>\n</head>\n<body>\n",
    );
    let _ = writeln!(
        html,
        "<h1>{}: predicted label {}</h1>",
        escape_html(&title),
        e.predicted_label
    );
    html.push_str("<p class=\"doc\">\n");
    for i in (0..e.v_a.len()).filter(|&i| !e.is_pad[i]) {
        let w = e.normalized_weights[i].clamp(0.0, 1.0);
        let _ = writeln!(
            html,
            "<span class=\"tok\" data-weight=\"{w:.3}\" style=\"background-color: rgba(220, 38, 38, {w:.3})\">{}</span>",
            escape_html(&e.token_surface[i])
        );
    }
    html.push_str("</p>\n</body>\n</html>\n");
    html
}

pub fn emit_heatmap(e: &AttentionExplanation, task: Option<TaskId>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, render_heatmap(e, task)).map_err(|err| Error::io(path, err))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attention::normalize_weights;

    fn explanation(tokens: &[&str], v_a: &[f64], pad: &[bool]) -> AttentionExplanation {
        AttentionExplanation {
            v_a: v_a.to_vec(),
            v_e: vec![0.0; 2],
            token_surface: tokens.iter().map(|s| s.to_string()).collect(),
            is_pad: pad.to_vec(),
            normalized_weights: normalize_weights(v_a, pad),
            predicted_label: 1,
            logits: vec![0.0; 3],
        }
    }

    #[test]
    fn escapes_markup() {
        assert_eq!(escape_html("a<b>&\"c'"), "a&lt;b&gt;&amp;&quot;c&#39;");
    }

    #[test]
    fn pad_tokens_are_omitted() {
        let e = explanation(&["no", "bleed", "<pad>"], &[1.0, 2.0, 0.0], &[false, false, true]);
        let html = render_heatmap(&e, TaskId::new(2).ok());
        assert_eq!(html.matches("class=\"tok\"").count(), 2);
        assert!(!html.contains("&lt;pad&gt;"));
        assert!(html.contains("predicted label 1"));
        assert!(html.contains("Acute Intracranial Bleed"));
    }
}
