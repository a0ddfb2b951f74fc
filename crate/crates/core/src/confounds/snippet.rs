/// Whether `line` opens or closes a backtick fence: at most three spaces of
/// indentation, then three or more backticks. Anything may follow (an info
/// string on an opening fence).
pub fn is_fence_line(line: &str) -> bool {
    let line = line.strip_suffix('\r').unwrap_or(line);
    let indent = line.len() - line.trim_start_matches(' ').len();
    indent <= 3 && line[indent..].starts_with("```")
}

/// True when `body` holds at least one enclosed fenced block: a fence line
/// followed later by another fence line. Unclosed fences, inline backticks,
/// tilde fences and indented code do not count.
pub fn detect_code_snippet(body: &str) -> bool {
    body.lines().filter(|l| is_fence_line(l)).nth(1).is_some()
}
